"""Jones calculus and two-qubit density-matrix primitives.

Conventions used throughout the package:

* Two-qubit basis order is ``|00>, |01>, |10>, |11>``.
* Qubit 0 is the first system (low-lying spin wave, read out as the signal-2
  photon); qubit 1 is the second system (high-lying spin wave, read out as the
  signal-1 photon).
* Logical 0 is H polarization / U path / L path, logical 1 is V / D / R.
* The number-basis which-path state is mapped onto the same abstract qubits,
  see :func:`spinlink.memory.ideal_psi1`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-9

SQRT2 = np.sqrt(2.0)


def _finite(x: float, name: str) -> float:
    x = float(x)
    if not np.isfinite(x):
        raise InvalidArgument(f"{name} must be finite, got {x}")
    return x


# --- Jones calculus -------------------------------------------------------


def hwp_operator(angle: float) -> np.ndarray:
    """Jones matrix of a half-wave plate with fast axis at ``angle`` from H."""
    t = 2.0 * _finite(angle, "angle")
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, s], [s, -c]], dtype=complex)


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise InvalidArgument("tensor_product expects two matrices")
    return np.kron(a, b)


@dataclass(frozen=True)
class PolarizationVector:
    amp_h: complex
    amp_v: complex

    def __post_init__(self):
        norm = abs(self.amp_h) ** 2 + abs(self.amp_v) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise InvalidArgument(f"polarization vector not normalized (|a|^2 = {norm})")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp_h, self.amp_v], dtype=complex)

    def orthogonal(self) -> PolarizationVector:
        return PolarizationVector(-np.conj(self.amp_v), np.conj(self.amp_h))

    @classmethod
    def linear(cls, angle: float) -> PolarizationVector:
        """Linear polarization at ``angle`` from H, built as HWP(angle/2)|H>."""
        amp = hwp_operator(angle / 2.0) @ np.array([1.0, 0.0])
        return cls(complex(amp[0]), complex(amp[1]))


POL_H = PolarizationVector(1.0, 0.0)
POL_V = PolarizationVector(0.0, 1.0)
POL_D = PolarizationVector(1 / SQRT2, 1 / SQRT2)
POL_A = PolarizationVector(1 / SQRT2, -1 / SQRT2)
POL_R = PolarizationVector(1 / SQRT2, -1j / SQRT2)
POL_L = PolarizationVector(1 / SQRT2, 1j / SQRT2)

POLARIZATIONS = {"H": POL_H, "V": POL_V, "D": POL_D, "A": POL_A, "R": POL_R, "L": POL_L}


def analyzer_vector(angle: float) -> np.ndarray:
    """Polarization transmitted by an analyzer set to ``angle`` (radians from H)."""
    return PolarizationVector.linear(angle).vector


# --- density matrices -----------------------------------------------------


def density_violations(rho: np.ndarray) -> list[str]:
    """Return the list of density-matrix invariants that ``rho`` breaks."""
    problems = []
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return ["not square"]
    if not np.all(np.isfinite(rho)):
        return ["non-finite entries"]
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        problems.append("not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        problems.append(f"trace {tr.real:.3e} != 1")
    herm = 0.5 * (rho + rho.conj().T)
    lam = np.linalg.eigvalsh(herm)
    if lam[0] < PSD_TOL:
        problems.append(f"min eigenvalue {lam[0]:.3e} < 0")
    return problems


def is_density(rho: np.ndarray) -> bool:
    return not density_violations(rho)


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    """Immutable 4x4 density matrix. Construction validates every invariant."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise InvalidArgument(f"two-qubit state needs a 4x4 matrix, got {rho.shape}")
        problems = density_violations(rho)
        if problems:
            raise InvalidArgument("invalid density matrix: " + ", ".join(problems))
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_vector(cls, psi) -> TwoQubitState:
        psi = np.asarray(psi, dtype=complex).reshape(4)
        n = np.linalg.norm(psi)
        if n == 0:
            raise InvalidArgument("zero state vector")
        psi = psi / n
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def from_matrix(cls, rho) -> TwoQubitState:
        """Build from a matrix that is a density matrix up to round-off.

        Hermitian part is taken and trace rescaled; PSD is still checked.
        """
        rho = np.asarray(rho, dtype=complex)
        rho = 0.5 * (rho + rho.conj().T)
        return cls(rho / np.trace(rho).real)

    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.rho)

    def __eq__(self, other):
        if not isinstance(other, TwoQubitState):
            return NotImplemented
        return bool(np.allclose(self.rho, other.rho, atol=1e-12, rtol=0))

    def __hash__(self):
        return hash(np.round(self.rho, 10).tobytes())


PHI_PLUS = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / SQRT2


def bell_phi_plus() -> TwoQubitState:
    return TwoQubitState.from_vector(PHI_PLUS)


def werner_state(visibility: float) -> TwoQubitState:
    """``V |Phi+><Phi+| + (1 - V) I/4``."""
    v = _finite(visibility, "visibility")
    if not 0.0 <= v <= 1.0:
        raise InvalidArgument(f"visibility must lie in [0, 1], got {v}")
    return TwoQubitState(v * np.outer(PHI_PLUS, PHI_PLUS.conj()) + (1 - v) * np.eye(4) / 4)


def state_fidelity(rho, target) -> float:
    """Fidelity ``<psi|rho|psi>`` of a density matrix with a pure target."""
    if isinstance(rho, TwoQubitState):
        rho = rho.rho
    psi = np.asarray(target, dtype=complex).reshape(-1)
    if abs(np.vdot(psi, psi).real - 1.0) > 1e-10:
        raise InvalidArgument("target state vector must be normalized")
    f = np.vdot(psi, np.asarray(rho) @ psi)
    return float(np.clip(f.real, 0.0, 1.0))


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit density matrix."""
    if isinstance(rho, TwoQubitState):
        rho = rho.rho
    rho = np.asarray(rho, dtype=complex)
    yy = np.array([[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]], dtype=complex)
    r = rho @ yy @ rho.conj() @ yy
    lam = np.sqrt(np.clip(np.sort(np.linalg.eigvals(r).real)[::-1], 0.0, None))
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def product_projector(vec_q0, vec_q1) -> np.ndarray:
    """Vector ``|a> (x) |b>`` for an analyzer pair (qubit 0 first)."""
    return np.kron(np.asarray(vec_q0, dtype=complex), np.asarray(vec_q1, dtype=complex))
