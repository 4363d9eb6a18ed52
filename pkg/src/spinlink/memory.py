"""Phenomenological Rydberg-EIT memory (MOT B).

The memory is not modelled from the EIT susceptibility.  Retrieval efficiency
decays as

    eta(t) = eta0 * exp(-t/tau_life) * exp(-(t/tau_doppler)^2) * exp(-t/tau_extra)

and every stored excitation picks up a Gaussian relative phase between the two
spin-wave modes, which washes out the ensemble coherence by ``exp(-sigma^2/2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidArgument
from .qcore import TwoQubitState
from .source import PairEmission, ideal_psi2

RYDBERG_LIFETIME_N20 = 5e-6
DOPPLER_SPEED = 0.276
COUPLING_WAVELENGTH = 475e-9
SIGNAL_WAVELENGTH = 795e-9


def doppler_dephasing_time(lambda_coupling: float, lambda_signal: float, atom_speed: float) -> float:
    """Dephasing time ``1 / (|1/l1 - 1/l2| v)`` from the spin-wave wave-vector mismatch.

    The mismatch is counted in cycles per metre (``dk / 2 pi``), so the result is
    the time an atom needs to cross one grating period.
    """
    if lambda_coupling <= 0 or lambda_signal <= 0:
        raise InvalidArgument("wavelengths must be positive")
    if atom_speed <= 0:
        raise InvalidArgument("atom speed must be positive")
    dk = abs(1.0 / lambda_coupling - 1.0 / lambda_signal)
    if dk == 0.0:
        raise ZeroDivisionError("equal wavelengths give no wave-vector mismatch")
    return 1.0 / (dk * atom_speed)


DOPPLER_TIME = doppler_dephasing_time(COUPLING_WAVELENGTH, SIGNAL_WAVELENGTH, DOPPLER_SPEED)


def _decay(t: float | np.ndarray, tau_doppler: float, tau_life: float, tau_extra: float):
    t = np.asarray(t, dtype=float)
    rate = t / tau_life + (t / tau_doppler) ** 2
    if math.isfinite(tau_extra):
        rate = rate + t / tau_extra
    return np.exp(-rate)


def calibrate_eta0(target: float, t: float, tau_doppler: float = DOPPLER_TIME,
                   tau_life: float = RYDBERG_LIFETIME_N20, tau_extra: float = math.inf) -> float:
    """Zero-time efficiency that makes ``eta(t) == target``."""
    eta0 = target / float(_decay(t, tau_doppler, tau_life, tau_extra))
    if not 0.0 <= eta0 <= 1.0:
        raise InvalidArgument(f"target {target} at t={t} needs eta0={eta0} outside [0, 1]")
    return eta0


@dataclass(frozen=True)
class MemoryParams:
    eta0: float = calibrate_eta0(0.229, 300e-9)
    tau_doppler: float = DOPPLER_TIME
    tau_life: float = RYDBERG_LIFETIME_N20
    tau_extra: float = math.inf
    phase_jitter_sigma: float = 0.0
    storage_time: float = 300e-9

    def __post_init__(self):
        if not 0.0 <= self.eta0 <= 1.0:
            raise InvalidArgument("eta0 must lie in [0, 1]")
        for name in ("tau_doppler", "tau_life", "tau_extra", "storage_time"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"memory.{name} must be > 0")
        if not (math.isfinite(self.phase_jitter_sigma) and self.phase_jitter_sigma >= 0):
            raise InvalidArgument("phase_jitter_sigma must be finite and >= 0")

    @property
    def efficiency(self) -> float:
        return retrieval_efficiency(self.storage_time, self)

    @property
    def coherence_factor(self) -> float:
        return math.exp(-0.5 * self.phase_jitter_sigma**2)


def retrieval_efficiency(t, params: MemoryParams):
    """Storage-and-retrieval efficiency after ``t`` seconds (scalar or array)."""
    ta = np.asarray(t, dtype=float)
    if np.any(ta < 0) or not np.all(np.isfinite(ta)):
        raise InvalidArgument("storage time must be finite and >= 0")
    eta = params.eta0 * _decay(ta, params.tau_doppler, params.tau_life, params.tau_extra)
    return float(eta) if eta.ndim == 0 else eta


def jitter_for_visibility(visibility: float) -> float:
    """Gaussian phase spread that reduces a unit-contrast fringe to ``visibility``."""
    if not 0.0 < visibility <= 1.0:
        raise InvalidArgument("visibility must lie in (0, 1]")
    return math.sqrt(-2.0 * math.log(visibility))


def apply_phase(rho: np.ndarray, deltas) -> np.ndarray:
    """Rotate the ``|.1>`` branch of qubit 1 by ``exp(i delta)``.

    Accepts a scalar or an array of phases; returns ``(..., 4, 4)`` matrices.
    """
    deltas = np.asarray(deltas, dtype=float)
    u = np.ones(deltas.shape + (4,), dtype=complex)
    ph = np.exp(1j * deltas)
    u[..., 1] = ph
    u[..., 3] = ph
    return u[..., :, None] * np.asarray(rho) * u[..., None, :].conj()


class StoredOutcome(NamedTuple):
    retrieved: bool
    state: Optional[TwoQubitState]
    n_retrieved: int = 0


def apply_memory_channel(emission: PairEmission, params: MemoryParams, rng: np.random.Generator) -> StoredOutcome:
    """Store the signal-1 half of each pair for ``params.storage_time``.

    Each excitation survives independently with ``eta(storage_time)``; the
    returned state is that of the first survivor with its own random phase.
    """
    if emission.multiplicity < 1:
        raise InvalidArgument("nothing to store in an empty cycle")
    eta = params.efficiency
    survived = rng.random(emission.multiplicity) < eta
    deltas = rng.normal(0.0, params.phase_jitter_sigma, emission.multiplicity)
    n = int(survived.sum())
    if n == 0:
        return StoredOutcome(False, None, 0)
    delta = deltas[int(np.argmax(survived))]
    rho = apply_phase(emission.joint_state.rho, delta)
    return StoredOutcome(True, TwoQubitState.from_matrix(rho), n)


def ideal_psi3(total_phase: float = 0.0) -> TwoQubitState:
    """Low-lying / high-lying spin-wave entangled state after storage."""
    return ideal_psi2(total_phase)


def ideal_psi1(phase: float = 0.0) -> TwoQubitState:
    """Single-excitation which-path state ``(|0_R 1_L> + e^{i phi} |1_R 0_L>)/sqrt 2``.

    Basis is ``|m_R n_L>``, so index 1 holds one excitation in L (population
    ``p10``) and index 2 one excitation in R (``p01``), as in the which-path
    density matrix built by :func:`spinlink.analysis.build_whichpath_rho`.
    """
    psi = np.array([0.0, 1.0, np.exp(1j * phase), 0.0]) / math.sqrt(2)
    return TwoQubitState.from_vector(psi)


@dataclass(frozen=True)
class LossBudget:
    detection_loss: float = 0.50
    fiber_loss: float = 0.30
    filtering_loss: float = 0.335
    excitation_loss: float = 0.77

    def __post_init__(self):
        for name in ("detection_loss", "fiber_loss", "filtering_loss", "excitation_loss"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise InvalidArgument(f"losses.{name} must lie in [0, 1), got {v}")

    @property
    def path_transmission(self) -> float:
        """Passive optics only (fiber coupling and filtering).

        Detection and excitation losses are applied by the detector and memory
        models during simulation.
        """
        return (1 - self.fiber_loss) * (1 - self.filtering_loss)


def combined_loss(*losses: float) -> float:
    t = 1.0
    for x in losses:
        t *= 1 - x
    return 1 - t


class Transmission(NamedTuple):
    transmission: float
    total_loss: float


def end_to_end_transmission(budget: LossBudget) -> Transmission:
    t = 1.0
    for loss in (budget.detection_loss, budget.fiber_loss, budget.filtering_loss, budget.excitation_loss):
        t *= 1 - loss
    return Transmission(t, 1 - t)
