"""Two-qubit polarization tomography.

Sixteen product projectors (James-Kwiat ordering) are measured with a single
analyzer port per photon.  Reconstruction is available by linear inversion
and by maximum likelihood over ``rho = T T^dag / Tr(T T^dag)`` with ``T`` lower
triangular, which keeps every iterate physical.

Setting labels read qubit 0 first: ``"DV"`` projects the signal-2 photon on
D and the signal-1 photon on V.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .detection import DetectorParams, IDEAL_DETECTOR, coincidence_probability, outcome_probabilities
from .errors import InvalidArgument, ReconstructionError
from .qcore import PHI_PLUS, POLARIZATIONS, PolarizationVector, TwoQubitState, product_projector, state_fidelity

log = logging.getLogger(__name__)

JAMES_KWIAT_ORDER = ("HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH",
                     "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL")


@dataclass(frozen=True)
class TomoSetting:
    projector_1: PolarizationVector
    projector_2: PolarizationVector
    label: str

    @property
    def vector(self) -> np.ndarray:
        return product_projector(self.projector_1.vector, self.projector_2.vector)

    @property
    def analyzer_angles(self) -> tuple[float, float]:
        """Linear analyzer angles ``(theta1, theta2)``; NaN for circular projectors."""
        def ang(p: PolarizationVector):
            if abs(np.imag(np.conj(p.amp_h) * p.amp_v)) > 1e-12:
                return math.nan
            return math.atan2(np.real(p.amp_v * np.conj(p.amp_h)) * 2, abs(p.amp_h) ** 2 - abs(p.amp_v) ** 2) / 2
        return ang(self.projector_2), ang(self.projector_1)


def tomo_settings_16() -> list[TomoSetting]:
    return [TomoSetting(POLARIZATIONS[l[0]], POLARIZATIONS[l[1]], l) for l in JAMES_KWIAT_ORDER]


_PAULI = [np.eye(2, dtype=complex),
          np.array([[0, 1], [1, 0]], dtype=complex),
          np.array([[0, -1j], [1j, 0]], dtype=complex),
          np.array([[1, 0], [0, -1]], dtype=complex)]
_PAULI2 = np.array([np.kron(a, b) for a in _PAULI for b in _PAULI])


def design_matrix(settings: Sequence[TomoSetting]) -> np.ndarray:
    """``B[i, k] = <psi_i| sigma_k |psi_i> / 4`` over the two-qubit Pauli basis."""
    vecs = np.array([s.vector for s in settings])
    return np.einsum("ia,kab,ib->ik", vecs.conj(), _PAULI2, vecs).real / 4


@dataclass
class TomoCounts:
    settings: list
    counts: np.ndarray
    total_per_basis: int = 0

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.shape != (len(self.settings),):
            raise InvalidArgument("one count per setting expected")
        if not np.all(np.isfinite(self.counts)) or np.any(self.counts < 0):
            raise InvalidArgument("counts must be finite and nonnegative")

    @classmethod
    def from_mapping(cls, counts: Mapping[str, float], total_per_basis: int = 0) -> TomoCounts:
        settings = tomo_settings_16()
        missing = [s.label for s in settings if s.label not in counts]
        if missing:
            raise InvalidArgument(f"missing tomography settings: {missing}")
        return cls(settings, [counts[s.label] for s in settings], total_per_basis)

    def as_dict(self) -> dict[str, float]:
        return {s.label: float(c) for s, c in zip(self.settings, self.counts)}


def expected_counts(state: TwoQubitState, shots: float, settings=None,
                    det: DetectorParams = IDEAL_DETECTOR) -> np.ndarray:
    settings = settings or tomo_settings_16()
    out = []
    for s in settings:
        p4 = outcome_probabilities(state.rho, s.projector_1.vector, s.projector_2.vector)
        out.append(shots * coincidence_probability(p4, det, det))
    return np.array(out)


def simulate_tomo_counts(state: TwoQubitState, shots_per_setting: int, det: DetectorParams,
                         rng: np.random.Generator, settings=None) -> TomoCounts:
    if shots_per_setting < 1:
        raise InvalidArgument("shots_per_setting must be >= 1")
    settings = settings or tomo_settings_16()
    q = np.clip(expected_counts(state, 1.0, settings, det), 0.0, 1.0)
    return TomoCounts(settings, rng.binomial(shots_per_setting, q), shots_per_setting)


@dataclass(frozen=True)
class LinearInversion:
    rho: np.ndarray
    is_psd: bool
    min_eigenvalue: float


def linear_inversion(counts: TomoCounts) -> LinearInversion:
    """Solve the 16x16 linear system in the Pauli basis.

    Hermiticity holds by construction; the unknown count normalization is the
    identity coefficient, so the trace is exactly one.
    """
    B = design_matrix(counts.settings)
    if B.shape[0] < 16 or np.linalg.matrix_rank(B) < 16:
        raise ReconstructionError("setting list is not tomographically complete")
    coef, *_ = np.linalg.lstsq(B, counts.counts, rcond=None)
    if coef[0] <= 0:
        raise ReconstructionError("no counts to normalize the reconstruction")
    r = coef / coef[0]
    rho = np.einsum("k,kab->ab", r, _PAULI2) / 4
    rho = 0.5 * (rho + rho.conj().T)
    lam = np.linalg.eigvalsh(rho)
    return LinearInversion(rho, bool(lam[0] >= -1e-9), float(lam[0]))


# --- maximum likelihood ---------------------------------------------------

_TRIL = np.tril_indices(4)
_DIAG = np.array([i == j for i, j in zip(*_TRIL)])


def _unpack(x: np.ndarray) -> np.ndarray:
    t = np.zeros((4, 4), dtype=complex)
    re = x[:10]
    im = np.zeros(10)
    im[~_DIAG] = x[10:]
    t[_TRIL] = re + 1j * im
    return t


def _pack(t: np.ndarray) -> np.ndarray:
    v = t[_TRIL]
    return np.concatenate([v.real, v.imag[~_DIAG]])


def _t_from_rho(rho: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    lam, vec = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    lam = np.clip(lam, 0.0, None)
    psd = (vec * lam) @ vec.conj().T
    psd = psd / np.trace(psd).real
    psd = (1 - floor) * psd + floor * np.eye(4) / 4
    return np.linalg.cholesky(psd)


class _Objective:
    """Negative multinomial log-likelihood per count, ``-sum n_i log(p_i / sum p)``."""

    def __init__(self, counts: TomoCounts):
        self.n = counts.counts
        self.ntot = float(self.n.sum())
        self.vecs = np.array([s.vector for s in counts.settings])
        self.proj = np.einsum("ia,ib->iab", self.vecs, self.vecs.conj())

    def probs(self, t: np.ndarray) -> np.ndarray:
        w = self.vecs.conj() @ t  # rows are (T^dag psi_i)^dag
        return np.maximum(np.sum(np.abs(w) ** 2, axis=1), 1e-300)

    def __call__(self, x: np.ndarray):
        t = _unpack(x)
        p = self.probs(t)
        s = p.sum()
        f = -(np.dot(self.n, np.log(p)) - self.ntot * math.log(s)) / self.ntot
        w = -(self.n / p - self.ntot / s) / self.ntot
        g = np.einsum("i,iab->ab", w, self.proj) @ t
        return f, _pack(2 * g)


@dataclass
class MLEResult:
    state: TwoQubitState
    converged: bool
    iterations: int
    grad_norm: float
    log_likelihood: float
    objective_trace: list = field(default_factory=list)
    message: str = ""

    @property
    def rho(self) -> np.ndarray:
        return self.state.rho


def mle_reconstruct(counts: TomoCounts, max_iters: int = 2000, tolerance: float = 1e-7,
                    start: np.ndarray | None = None) -> MLEResult:
    """Maximum-likelihood density matrix.

    Converged means the gradient norm of the per-count objective at the
    trace-normalized optimum fell below ``tolerance``.  The returned result
    always carries the diagnostics; non-convergence is logged, never hidden.
    """
    if counts.counts.sum() <= 0:
        raise ReconstructionError("all tomography counts are zero")
    obj = _Objective(counts)
    if start is None:
        try:
            start = linear_inversion(counts).rho
        except ReconstructionError:
            start = np.eye(4) / 4
    x0 = _pack(_t_from_rho(start))
    trace = [-obj(x0)[0]]

    def record(xk):
        trace.append(-obj(xk)[0])

    res = minimize(obj, x0, jac=True, method="L-BFGS-B", callback=record,
                   options={"maxiter": max_iters, "gtol": tolerance * 1e-2, "ftol": 1e-15, "maxcor": 30})
    t = _unpack(res.x)
    t = t / math.sqrt(np.trace(t @ t.conj().T).real)
    f, g = obj(_pack(t))
    gnorm = float(np.linalg.norm(g))
    rho = t @ t.conj().T
    state = TwoQubitState.from_matrix(rho)
    converged = gnorm < tolerance
    if not converged:
        log.warning("MLE did not converge: |grad| = %.3e after %d iterations (%s)", gnorm, res.nit, res.message)
    return MLEResult(state, converged, int(res.nit), gnorm, -f, trace, str(res.message))


def fidelity_to_bell(rho) -> float:
    return state_fidelity(rho, PHI_PLUS)


def frobenius_error(rho_hat, rho) -> float:
    a = rho_hat.rho if isinstance(rho_hat, TwoQubitState) else np.asarray(rho_hat)
    b = rho.rho if isinstance(rho, TwoQubitState) else np.asarray(rho)
    return float(np.linalg.norm(a - b))
