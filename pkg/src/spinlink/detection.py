"""Analyzers, detectors and coincidence bookkeeping.

Analyzer angles are polarization angles: a setting ``theta`` transmits linear
polarization at ``theta`` from H, which a half-wave plate at ``theta/2``
followed by a polarizing beam splitter realizes.  The CHSH angles
0, pi/8, pi/4, 3pi/8 are therefore analyzer angles.

Detector ids: D1 and D2 sit on the signal-1 arm (D2 only behind the HBT beam
splitter or on the second interferometer output), D3 on the signal-2 arm.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import DataIntegrityError, InvalidArgument
from .qcore import TwoQubitState, analyzer_vector, product_projector


class Basis(str, enum.Enum):
    H = "H"
    V = "V"
    D = "D"  # H+V
    A = "A"  # H-V
    CUSTOM = "CUSTOM"


BASIS_ANGLE = {Basis.H: 0.0, Basis.V: math.pi / 2, Basis.D: math.pi / 4, Basis.A: -math.pi / 4}


@dataclass(frozen=True)
class MeasurementSetting:
    theta1: float
    theta2: float
    basis_label: Basis = Basis.CUSTOM
    pp_phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "basis_label", Basis(self.basis_label))
        for name in ("theta1", "theta2", "pp_phase"):
            v = getattr(self, name)
            if v is None or not math.isfinite(v):
                raise InvalidArgument(f"{name} must be an explicit finite angle")
        if self.basis_label is not Basis.CUSTOM:
            expected = BASIS_ANGLE[self.basis_label]
            if abs(_wrap_pi(self.theta2 - expected)) > 1e-9:
                raise InvalidArgument(f"basis {self.basis_label.value} fixes theta2 = {expected}")

    @classmethod
    def for_basis(cls, basis: Basis | str, theta1: float) -> MeasurementSetting:
        basis = Basis(basis)
        if basis is Basis.CUSTOM:
            raise InvalidArgument("CUSTOM settings need both angles")
        return cls(theta1, BASIS_ANGLE[basis], basis)


def _wrap_pi(x: float) -> float:
    """Map an analyzer angle difference to (-pi/2, pi/2]."""
    return (x + math.pi / 2) % math.pi - math.pi / 2


@dataclass(frozen=True)
class DetectorParams:
    efficiency: float = 0.5
    dark_prob: float = 0.0
    gate_ns: float = 500.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise InvalidArgument("detector efficiency must lie in [0, 1]")
        if not 0.0 <= self.dark_prob <= 1.0:
            raise InvalidArgument("dark-click probability must lie in [0, 1]")
        if not self.gate_ns > 0:
            raise InvalidArgument("gate_ns must be > 0")

    def click_prob(self, photons: int) -> float:
        """Probability of a click with ``photons`` photons impinging."""
        return 1 - (1 - self.dark_prob) * (1 - self.efficiency) ** photons


IDEAL_DETECTOR = DetectorParams(1.0, 0.0)


class Detector(enum.IntEnum):
    D1 = 1
    D2 = 2
    D3 = 3


@dataclass(frozen=True)
class ClickRecord:
    cycle_index: int
    detector_id: Detector
    clicked: bool


# --- Born rule ------------------------------------------------------------


def outcome_probabilities(rho: np.ndarray, vec_q0, vec_q1, deltas=None) -> np.ndarray:
    """Joint pass/fail probabilities for one analyzer per qubit.

    Returns ``[..., 4]`` ordered (pass0 pass1, pass0 fail1, fail0 pass1,
    fail0 fail1).  ``deltas`` optionally applies a per-shot phase to the
    ``|.1>`` branch of qubit 1 (memory phase jitter) without building the
    rotated matrices.
    """
    a = np.asarray(vec_q0, dtype=complex)
    b = np.asarray(vec_q1, dtype=complex)
    a_perp = np.array([-np.conj(a[1]), np.conj(a[0])])
    b_perp = np.array([-np.conj(b[1]), np.conj(b[0])])
    vecs = np.stack([product_projector(x, y) for x in (a, a_perp) for y in (b, b_perp)])
    rho = np.asarray(rho, dtype=complex)
    if deltas is None:
        p = np.einsum("ki,ij,kj->k", vecs.conj(), rho, vecs).real
    else:
        # <v|U rho U^dag|v> with U = diag(1, e^{id}, 1, e^{id}) equals <U^dag v|rho|U^dag v>
        ph = np.exp(-1j * np.asarray(deltas, dtype=float))[..., None]
        mask = np.array([0, 1, 0, 1], dtype=bool)
        w = np.broadcast_to(vecs.conj(), ph.shape[:-1] + vecs.shape).copy()
        # w holds conj(U^dag v) = U^T conj(v); the |.1> entries pick up e^{+id}
        w[..., mask] = w[..., mask] * np.conj(ph[..., None])
        p = np.einsum("...ki,ij,...kj->...k", w, rho, w.conj()).real
    return np.clip(p, 0.0, 1.0)


def setting_vectors(setting: MeasurementSetting):
    return analyzer_vector(setting.theta2), analyzer_vector(setting.theta1)


def joint_click_probability(state: TwoQubitState, setting: MeasurementSetting) -> float:
    """``Tr[rho (P(theta2) x P(theta1))]`` for ideal detectors."""
    v0, v1 = setting_vectors(setting)
    return float(outcome_probabilities(state.rho, v0, v1)[0])


def coincidence_probability(probs4, det_sig1: DetectorParams, det_sig2: DetectorParams) -> float:
    """Exact coincidence probability behind two imperfect single-port analyzers."""
    p = np.asarray(probs4)
    on1 = det_sig1.click_prob(1)
    on2 = det_sig2.click_prob(1)
    off1 = det_sig1.dark_prob
    off2 = det_sig2.dark_prob
    return float(p[..., 0] * on2 * on1 + p[..., 1] * on2 * off1 + p[..., 2] * off2 * on1 + p[..., 3] * off2 * off1)


def _detect(has_photon: np.ndarray, det: DetectorParams, rng: np.random.Generator) -> np.ndarray:
    n = has_photon.shape[0]
    hit = has_photon & (rng.random(n) < det.efficiency)
    dark = rng.random(n) < det.dark_prob
    return hit | dark


def sample_outcomes(probs: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw joint outcomes from ``[..., 4]`` probabilities; returns (pass_q1, pass_q0)."""
    probs = np.atleast_2d(probs)
    cum = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[0]) * cum[:, -1]
    k = (u[:, None] >= cum[:, :-1]).sum(axis=1)
    pass_q0 = k < 2
    pass_q1 = (k % 2) == 0
    return pass_q1, pass_q0


def sample_clicks_batch(rho, setting: MeasurementSetting, det1: DetectorParams, det2: DetectorParams,
                        rng: np.random.Generator, n: int, deltas=None,
                        exists1=None, exists2=None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`sample_clicks` for ``n`` shots.

    ``exists1``/``exists2`` mark shots where the photon actually reaches the
    analyzer (lost photons still take part in the Born draw, which keeps the
    partner's marginal correct).  Returns (signal-1 clicks, signal-2 clicks).
    """
    v0, v1 = setting_vectors(setting)
    if deltas is None:
        probs = np.broadcast_to(outcome_probabilities(rho, v0, v1), (n, 4))
    else:
        probs = outcome_probabilities(rho, v0, v1, deltas)
    pass1, pass2 = sample_outcomes(probs, rng)
    if exists1 is not None:
        pass1 = pass1 & exists1
    if exists2 is not None:
        pass2 = pass2 & exists2
    return _detect(pass1, det1, rng), _detect(pass2, det2, rng)


def sample_clicks(state: TwoQubitState, setting: MeasurementSetting, det1: DetectorParams,
                  det2: DetectorParams, rng: np.random.Generator, cycle_index: int = 0):
    """One shot: Born draw, efficiency thinning, dark clicks ORed in.

    ``det1`` watches signal 1 (analyzer ``theta1``), ``det2`` signal 2.
    """
    c1, c2 = sample_clicks_batch(state.rho, setting, det1, det2, rng, 1)
    return (ClickRecord(cycle_index, Detector.D1, bool(c1[0])),
            ClickRecord(cycle_index, Detector.D3, bool(c2[0])))


def route_photons(n_photons, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """50:50 beam splitter: each photon independently takes port a or b."""
    n = np.asarray(n_photons, dtype=np.int64)
    a = rng.binomial(n, 0.5)
    return a, n - a


def hbt_split(n_photons: int, rng: np.random.Generator, cycle_index: int = 0):
    """Route the signal-1 photons of one cycle onto D1/D2 before detection."""
    a, b = route_photons(n_photons, rng)
    return (ClickRecord(cycle_index, Detector.D1, bool(a > 0)),
            ClickRecord(cycle_index, Detector.D2, bool(b > 0)))


# --- tallies --------------------------------------------------------------


@dataclass
class Tally:
    singles_1: int = 0
    singles_2: int = 0
    coincidences: int = 0
    trials: int = 0

    def __add__(self, other: Tally) -> Tally:
        return Tally(self.singles_1 + other.singles_1, self.singles_2 + other.singles_2,
                     self.coincidences + other.coincidences, self.trials + other.trials)

    def check(self):
        if not self.coincidences <= min(self.singles_1, self.singles_2) <= self.trials:
            raise DataIntegrityError(f"inconsistent tally {self}")


SettingKey = tuple  # (label, theta1, theta2)


def setting_key(label: str, theta1: float, theta2: float) -> SettingKey:
    def r(x):
        return float("nan") if x is None or not math.isfinite(x) else round(float(x), 6) + 0.0
    return (str(label), r(theta1), r(theta2))


@dataclass
class CoincidenceCounts:
    tallies: dict = field(default_factory=dict)

    def __getitem__(self, key) -> Tally:
        return self.tallies[key]

    def __iter__(self):
        return iter(self.tallies)

    def __len__(self):
        return len(self.tallies)

    def items(self):
        return self.tallies.items()

    def merge(self, other: CoincidenceCounts) -> CoincidenceCounts:
        out = dict(self.tallies)
        for k, t in other.tallies.items():
            out[k] = out[k] + t if k in out else t
        return CoincidenceCounts(out)

    @property
    def total_trials(self) -> int:
        return sum(t.trials for t in self.tallies.values())

    def lookup(self, theta1: float, theta2: float, label: str | None = None) -> Tally:
        """Find the tally for an analyzer pair, matching angles modulo pi."""
        found = None
        for (lab, t1, t2), tally in self.tallies.items():
            if label is not None and lab != label:
                continue
            if abs(_wrap_pi(t1 - theta1)) < 2e-6 and abs(_wrap_pi(t2 - theta2)) < 2e-6:
                found = tally if found is None else found + tally
        if found is None:
            raise KeyError(f"no tally for theta1={theta1}, theta2={theta2}")
        return found


class ClickTable(NamedTuple):
    """Column view of a click-record stream, one row per armed detector per cycle."""
    cycle: np.ndarray
    detector: np.ndarray
    clicked: np.ndarray

    @classmethod
    def from_records(cls, records: Iterable[ClickRecord]) -> ClickTable:
        records = list(records)
        return cls(np.array([r.cycle_index for r in records], dtype=np.int64),
                   np.array([int(r.detector_id) for r in records], dtype=np.int8),
                   np.array([r.clicked for r in records], dtype=bool))


def check_integrity(table: ClickTable) -> None:
    cyc = np.asarray(table.cycle)
    if cyc.size == 0:
        return
    if np.any(np.diff(cyc) < 0):
        raise DataIntegrityError("click records are not sorted by cycle index")
    key = cyc * 4 + np.asarray(table.detector, dtype=np.int64)
    if np.unique(key).size != key.size:
        raise DataIntegrityError("duplicated (cycle, detector) record")


def per_cycle_clicks(table: ClickTable) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pivot to (cycles, clicked[n, 4], armed[n, 4]); column index = detector id."""
    check_integrity(table)
    cycles, inv = np.unique(table.cycle, return_inverse=True)
    clicked = np.zeros((cycles.size, 4), dtype=bool)
    armed = np.zeros((cycles.size, 4), dtype=bool)
    det = np.asarray(table.detector, dtype=np.int64)
    armed[inv, det] = True
    clicked[inv, det] = np.asarray(table.clicked, dtype=bool)
    return cycles, clicked, armed


def count_coincidences(table: ClickTable, settings: Mapping[int, SettingKey] | np.ndarray | list,
                       pair=(Detector.D1, Detector.D3)) -> CoincidenceCounts:
    """Tally singles and same-cycle coincidences per setting.

    ``settings`` gives the setting key of every cycle, either as a mapping
    ``cycle -> key`` or as a sequence aligned with the sorted distinct cycles.
    Only cycles where both detectors of ``pair`` were armed count as trials.
    """
    cycles, clicked, armed = per_cycle_clicks(table)
    if isinstance(settings, Mapping):
        keys = [settings[int(c)] for c in cycles]
    else:
        keys = list(settings)
        if len(keys) != cycles.size:
            raise DataIntegrityError("settings do not align with the cycles in the record stream")
    a, b = int(pair[0]), int(pair[1])
    both_armed = armed[:, a] & armed[:, b]
    out: dict = {}
    if cycles.size == 0:
        return CoincidenceCounts(out)
    codes: dict = {}
    idx = np.array([codes.setdefault(k, len(codes)) for k in keys])
    for key, code in codes.items():
        sel = (idx == code) & both_armed
        t = Tally(int(clicked[sel, a].sum()), int(clicked[sel, b].sum()),
                  int((clicked[sel, a] & clicked[sel, b]).sum()), int(sel.sum()))
        if t.trials:
            out[key] = t
    return CoincidenceCounts(out)


def dark_corrected(tally: Tally, dark1: float, dark2: float) -> tuple[float, float, float]:
    """Subtract expected dark-click contributions from singles and coincidences."""
    n = tally.trials
    s1 = tally.singles_1 - dark1 * n
    s2 = tally.singles_2 - dark2 * n
    c = tally.coincidences - dark1 * s2 - dark2 * s1 - dark1 * dark2 * n
    return s1, s2, max(c, 0.0)
