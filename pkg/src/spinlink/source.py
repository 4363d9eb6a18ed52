"""Stochastic model of the Raman-scattering pair source (MOT A).

Each operation cycle emits 0, 1 or 2 photon/spin-wave pairs.  Every pair is
prepared in ``(|U_a H_s1> + e^{i phi} |D_a V_s1>)/sqrt(2)``, optionally mixed
with white noise (``visibility < 1``) to mimic imperfect interferometers.
Uncorrelated background photons, used by the Cauchy-Schwarz campaign, follow
multimode thermal statistics with ``mode_number`` modes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidArgument
from .qcore import TwoQubitState
from .rng import StreamFactory

HERALDED_G2_TARGET = 0.12


@dataclass(frozen=True)
class SourceParams:
    p_pair: float = 3.3e-3
    p_double: float = 0.0
    mode_number: float = 1.5625
    phase_phi: float = 0.0
    visibility: float = 1.0
    noise_mean: float = 0.0

    def __post_init__(self):
        for name in ("p_pair", "p_double", "mode_number", "phase_phi", "visibility", "noise_mean"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgument(f"source.{name} must be finite")
        if not 0.0 <= self.p_double <= self.p_pair <= 1.0:
            raise InvalidArgument("need 0 <= p_double <= p_pair <= 1")
        if self.p_pair + self.p_double > 1.0:
            raise InvalidArgument("p_pair + p_double must not exceed 1")
        if self.mode_number < 1.0:
            raise InvalidArgument("mode_number must be >= 1")
        if not 0.0 <= self.visibility <= 1.0:
            raise InvalidArgument("visibility must lie in [0, 1]")
        if self.noise_mean < 0.0:
            raise InvalidArgument("noise_mean must be >= 0")

    @property
    def multiplicity_probs(self) -> np.ndarray:
        return np.array([1.0 - self.p_pair - self.p_double, self.p_pair, self.p_double])


def default_p_double(p_pair: float, heralded_g2: float = HERALDED_G2_TARGET) -> float:
    """Double-pair probability giving ``heralded_g2`` in the weak-detection limit.

    With ``x = p_double / p_pair`` and all efficiencies small, the capped model
    gives ``g = 4x (1 + 2x) / (1 + 4x)^2``; this solves that quadratic for ``x``.
    """
    if not 0.0 <= heralded_g2 < 0.5:
        raise InvalidArgument("the two-pair cap limits the weak-detection heralded g2 to [0, 0.5)")
    if p_pair < 0:
        raise InvalidArgument("p_pair must be >= 0")
    x = (-0.5 + math.sqrt(0.25 + heralded_g2 / (2.0 * (1.0 - 2.0 * heralded_g2)))) / 2.0
    return p_pair * x


@dataclass(frozen=True)
class WaveVector:
    kx: float
    ky: float
    kz: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.kx, self.ky, self.kz)):
            raise InvalidArgument("wave-vector components must be finite")

    def __sub__(self, other: WaveVector) -> WaveVector:
        return WaveVector(self.kx - other.kx, self.ky - other.ky, self.kz - other.kz)

    def __neg__(self) -> WaveVector:
        return WaveVector(-self.kx, -self.ky, -self.kz)

    @property
    def norm(self) -> float:
        return math.sqrt(self.kx**2 + self.ky**2 + self.kz**2)

    @classmethod
    def along(cls, direction, wavelength: float) -> WaveVector:
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        k = 2 * math.pi / wavelength
        return cls(*(k * d))


def spin_wave_wavevector(k_drive: WaveVector, k_photon: WaveVector) -> WaveVector:
    """Wave vector of the collective excitation left behind, ``k_drive - k_photon``."""
    return k_drive - k_photon


def ideal_psi2(phase_phi: float = 0.0) -> TwoQubitState:
    psi = np.array([1.0, 0.0, 0.0, np.exp(1j * phase_phi)]) / math.sqrt(2)
    return TwoQubitState.from_vector(psi)


def pair_state(params: SourceParams) -> TwoQubitState:
    rho = ideal_psi2(params.phase_phi).rho
    v = params.visibility
    return TwoQubitState(v * rho + (1 - v) * np.eye(4) / 4)


@dataclass(frozen=True)
class PairEmission:
    cycle_index: int
    multiplicity: int
    joint_state: Optional[TwoQubitState] = None

    def __post_init__(self):
        if self.multiplicity not in (0, 1, 2):
            raise InvalidArgument("multiplicity must be 0, 1 or 2")
        if self.multiplicity == 0 and self.joint_state is not None:
            raise InvalidArgument("an empty cycle carries no state")
        if self.multiplicity > 0 and self.joint_state is None:
            raise InvalidArgument("emitted pairs need a joint state")


def sample_multiplicities(params: SourceParams, n: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(n)
    out = np.zeros(n, dtype=np.int8)
    out[u < params.p_pair + params.p_double] = 1
    out[u < params.p_double] = 2
    return out


def sample_emission(params: SourceParams, cycle_index: int, rng) -> PairEmission:
    """Draw one cycle.

    ``rng`` is either a ``numpy.random.Generator`` or a :class:`StreamFactory`;
    with a factory the cycle uses its own counter-keyed substream, so the result
    depends only on ``(params, cycle_index, seed)``.
    """
    if isinstance(rng, StreamFactory):
        rng = rng.cycle(cycle_index)
    m = int(sample_multiplicities(params, 1, rng)[0])
    return PairEmission(cycle_index, m, pair_state(params) if m else None)


def expected_autocorrelation(mode_number: float) -> float:
    """Unheralded ``g2`` of an M-mode thermal field, ``1 + 1/M``."""
    if not mode_number >= 1.0:
        raise InvalidArgument(f"mode_number must be >= 1, got {mode_number}")
    return 1.0 + 1.0 / mode_number


def thermal_photon_numbers(mean: float, mode_number: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Negative-binomial photon numbers with the given mean and ``g2 = 1 + 1/M``."""
    if mean <= 0:
        return np.zeros(n, dtype=np.int64)
    p = mode_number / (mode_number + mean)
    return rng.negative_binomial(mode_number, p, size=n)


def expected_heralded_g2(
    p_pair: float,
    p_double: float,
    herald_eff: float,
    eff_a: float,
    eff_b: float,
    dark_herald: float = 0.0,
    dark_a: float = 0.0,
    dark_b: float = 0.0,
) -> float:
    """Mean-count prediction of ``P2 P213 / (P21 P23)`` for the capped source.

    ``eff_a``/``eff_b`` are the probabilities that a signal-1 photon ends up
    detected behind beam-splitter port a/b (splitting already included), so
    ``eff_a + eff_b <= 1``.
    """
    p2 = p21 = p23 = p213 = 0.0
    for n, pn in ((1, p_pair), (2, p_double)):
        h = 1 - (1 - dark_herald) * (1 - herald_eff) ** n
        qa = (1 - dark_a) * (1 - eff_a) ** n
        qb = (1 - dark_b) * (1 - eff_b) ** n
        qab = (1 - dark_a) * (1 - dark_b) * (1 - eff_a - eff_b) ** n
        p2 += pn * h
        p21 += pn * h * (1 - qa)
        p23 += pn * h * (1 - qb)
        p213 += pn * h * (1 - qa - qb + qab)
    # empty cycles contribute only through dark counts
    p0 = 1 - p_pair - p_double
    p2 += p0 * dark_herald
    p21 += p0 * dark_herald * dark_a
    p23 += p0 * dark_herald * dark_b
    p213 += p0 * dark_herald * dark_a * dark_b
    if p21 <= 0 or p23 <= 0:
        return math.nan
    # grouped as two ratios so that tiny probabilities do not underflow the product
    return (p2 / p21) * (p213 / p23)


def tune_p_double(p_pair: float, target: float, **efficiencies) -> float:
    """Solve ``expected_heralded_g2(p_pair, p_double, ...) = target`` for ``p_double``."""
    def f(pd):
        return expected_heralded_g2(p_pair, pd, **efficiencies) - target

    hi = min(p_pair, 1.0 - p_pair)
    if f(0.0) > 0 or f(hi) < 0:
        raise InvalidArgument(f"heralded g2 = {target} not reachable with p_pair = {p_pair}")
    return brentq(f, 0.0, hi, xtol=1e-15, rtol=1e-12)
