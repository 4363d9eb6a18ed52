"""Counting-statistics estimators: correlations, HBT, fringes, concurrence, CHSH.

Error bars are first-order propagations of Poisson counting errors unless a
function says otherwise.  Estimators that hit a zero denominator return an
estimate flagged ``defined=False`` instead of inventing a number.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .detection import CoincidenceCounts, Tally
from .errors import FitError, InvalidArgument
from .qcore import TwoQubitState

CHSH_ANGLES = (0.0, math.pi / 8, math.pi / 4, 3 * math.pi / 8)
BELL_VISIBILITY_THRESHOLD = 1 / math.sqrt(2)


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float
    stderr: float = 0.0
    defined: bool = True
    note: str = ""

    def __post_init__(self):
        if self.defined and not (math.isfinite(self.stderr) and self.stderr >= 0):
            raise InvalidArgument(f"stderr must be finite and >= 0, got {self.stderr}")

    @classmethod
    def undefined(cls, note: str) -> CorrelationEstimate:
        return cls(math.nan, math.nan, False, note)


def poisson_stderr(count) -> float:
    if count < 0:
        raise InvalidArgument("counts are nonnegative")
    return math.sqrt(count)


def _ratio_estimate(num: Sequence[float], den: Sequence[float], scale: float = 1.0) -> CorrelationEstimate:
    """``scale * prod(num) / prod(den)`` with Poisson errors on every count."""
    if any(d <= 0 for d in den):
        return CorrelationEstimate.undefined("zero count in denominator")
    pn = math.prod(num)
    pd = math.prod(den)
    value = scale * pn / pd
    # d value / d x_i = value / x_i for numerator counts, computed without dividing by zero;
    # a zero count is given the variance of one count so that its error bar does not vanish
    var = 0.0
    for i, x in enumerate(num):
        others = math.prod(n for j, n in enumerate(num) if j != i)
        var += (scale * others / pd) ** 2 * (x if x > 0 else 1.0)
    for x in den:
        var += (value / x) ** 2 * x
    return CorrelationEstimate(value, math.sqrt(var))


def normalized_correlation(trials: float, singles_a: float, singles_b: float, coincidences: float) -> CorrelationEstimate:
    """``g = N C / (S_a S_b)``; the trial count is treated as exact."""
    if trials <= 0:
        return CorrelationEstimate.undefined("no trials")
    return _ratio_estimate([coincidences], [singles_a, singles_b], scale=trials)


def cauchy_schwarz_R(g12: CorrelationEstimate, g11: CorrelationEstimate, g22: CorrelationEstimate) -> CorrelationEstimate:
    """``R = g12^2 / (g11 g22)``; classical fields have ``R <= 1``."""
    if not (g11.defined and g22.defined and g12.defined):
        return CorrelationEstimate.undefined("undefined input correlation")
    if g11.value <= 0 or g22.value <= 0:
        raise InvalidArgument("auto-correlations must be positive")
    r = g12.value**2 / (g11.value * g22.value)
    rel2 = (2 * g12.stderr / g12.value) ** 2 if g12.value else 0.0
    rel2 += (g11.stderr / g11.value) ** 2 + (g22.stderr / g22.value) ** 2
    return CorrelationEstimate(r, abs(r) * math.sqrt(rel2), note="lower-bound style ratio")


def heralded_autocorrelation(P2: float, P21: float, P23: float, P213: float) -> CorrelationEstimate:
    """HBT statistic of the heralded photon, ``P2 P213 / (P21 P23)``."""
    if P21 <= 0 or P23 <= 0:
        return CorrelationEstimate.undefined("no heralded two-fold coincidences")
    return _ratio_estimate([P2, P213], [P21, P23])


# --- fringes --------------------------------------------------------------


@dataclass(frozen=True)
class FringeFit:
    visibility: float
    phase: float
    mean_level: float
    residual_norm: float
    visibility_stderr: float = 0.0
    amplitude: float = 0.0
    frequency: float = 1.0

    def model(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.mean_level + self.amplitude * np.cos(self.frequency * x - self.phase)


def fit_fringe_visibility(x, counts, frequency: float = 1.0) -> FringeFit:
    """Least-squares fit of ``a + b cos(f x - c)`` with ``a >= |b| >= 0``.

    The model is linear in ``(a, b cos c, b sin c)``, so the least-squares
    optimum is found exactly; the visibility is ``b / a``.  Its standard error
    uses Poisson variances on the counts.  ``frequency`` is 2 for polarization
    scans versus analyzer angle.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(counts, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("x and counts must be 1-d arrays of equal length")
    n = x.size
    if n < 5:
        raise FitError(f"need at least 5 points, got {n}")
    phase = np.mod(frequency * x, 2 * math.pi)
    span = (np.ptp(frequency * x)) * n / (n - 1)
    if span < 2 * math.pi - 1e-5:  # angles are stored to 6 decimals
        raise FitError("scan does not cover a full fringe period")
    X = np.column_stack([np.ones(n), np.cos(phase), np.sin(phase)])
    if np.linalg.matrix_rank(X) < 3:
        raise FitError("degenerate scan points")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    a, bc, bs = coef
    b = math.hypot(bc, bs)
    c = math.atan2(bs, bc)
    if a <= 0:
        if np.all(y == y[0]):
            raise FitError("flat zero fringe; visibility undefined")
        raise FitError("fitted mean level is not positive")
    fitted = X @ coef
    resid = float(np.linalg.norm(y - fitted))
    # sandwich covariance with Poisson variance var(y_i) = max(y_i, 1)
    xtx_inv = np.linalg.inv(X.T @ X)
    cov = xtx_inv @ (X.T * np.maximum(y, 1.0)) @ X @ xtx_inv
    if b > 0:
        grad = np.array([-b / a**2, bc / (a * b), bs / (a * b)])
    else:
        grad = np.array([0.0, 1 / a, 0.0])
    vis_err = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    vis = min(b / a, 1.0)
    amp = min(b, a)
    return FringeFit(vis, c, float(a), resid, vis_err, amp, frequency)


def visibility_from_extrema(counts) -> float:
    y = np.asarray(counts, dtype=float)
    hi, lo = y.max(), y.min()
    return float((hi - lo) / (hi + lo)) if hi + lo > 0 else math.nan


# --- which-path entanglement ----------------------------------------------


@dataclass(frozen=True)
class ProbTable:
    p00: float
    p01: float
    p10: float
    p11: float

    def __post_init__(self):
        vals = (self.p00, self.p01, self.p10, self.p11)
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise InvalidArgument("probabilities must be finite and >= 0")
        if sum(vals) > 1 + 1e-9:
            raise InvalidArgument("probabilities sum above 1")
        if sum(vals) <= 0:
            raise InvalidArgument("total probability P must be > 0")

    @property
    def total(self) -> float:
        return self.p00 + self.p01 + self.p10 + self.p11


def _check_vis(visibility: float):
    if not 0.0 <= visibility <= 1.0:
        raise InvalidArgument(f"visibility must lie in [0, 1], got {visibility}")


def whichpath_coherence(p: ProbTable, visibility: float) -> float:
    """Coherence ``d = V (p01 + p10) / 2`` (relative phase taken as zero)."""
    _check_vis(visibility)
    return visibility * (p.p01 + p.p10) / 2


def build_whichpath_rho(p: ProbTable, visibility: float) -> np.ndarray:
    """Which-path density matrix in the ``|m_R n_L>`` basis (see ``memory.ideal_psi1``)."""
    d = whichpath_coherence(p, visibility)
    rho = np.array([
        [p.p00, 0, 0, 0],
        [0, p.p10, d, 0],
        [0, d, p.p01, 0],
        [0, 0, 0, p.p11],
    ], dtype=complex)
    return rho / p.total


def concurrence_whichpath(p: ProbTable, visibility: float) -> float:
    d = whichpath_coherence(p, visibility)
    return max(0.0, 2 * abs(d) - 2 * math.sqrt(p.p00 * p.p11)) / p.total


def prob_table_from_counts(n00: int, n01: int, n10: int, n11: int) -> tuple[ProbTable, tuple[float, ...]]:
    """Occupation probabilities and their binomial standard errors."""
    n = n00 + n01 + n10 + n11
    if n <= 0:
        raise InvalidArgument("no heralded trials")
    ps = [c / n for c in (n00, n01, n10, n11)]
    return ProbTable(*ps), tuple(math.sqrt(q * (1 - q) / n) for q in ps)


def concurrence_stderr(p: ProbTable, dp: Sequence[float], visibility: float, dvis: float) -> float:
    """First-order error of :func:`concurrence_whichpath` from independent inputs."""
    c = concurrence_whichpath(p, visibility)
    if c == 0.0:
        return 0.0
    P = p.total
    g00 = (-math.sqrt(p.p11 / p.p00) if p.p00 > 0 else 0.0) / P - c / P
    g11 = (-math.sqrt(p.p00 / p.p11) if p.p11 > 0 else 0.0) / P - c / P
    g01 = visibility / P - c / P
    gv = (p.p01 + p.p10) / P
    grads = (g00, g01, g01, g11)
    var = sum((g * e) ** 2 for g, e in zip(grads, dp)) + (gv * dvis) ** 2
    return math.sqrt(var)


# --- CHSH -----------------------------------------------------------------


def correlation_from_counts(c_pp: float, c_mm: float, c_mp: float, c_pm: float) -> CorrelationEstimate:
    """``E = (C++ + C-- - C-+ - C+-) / (sum)`` with Poisson errors.

    ``C++ = C(t1, t2)``, ``C-- = C(t1+pi/2, t2+pi/2)``, ``C-+ = C(t1+pi/2, t2)``,
    ``C+- = C(t1, t2+pi/2)``.
    """
    a = c_pp + c_mm
    b = c_mp + c_pm
    if a + b <= 0:
        return CorrelationEstimate.undefined("no coincidences")
    e = (a - b) / (a + b)
    err = 2 * math.sqrt(a * b / (a + b) ** 3)
    return CorrelationEstimate(e, err)


def chsh_E(counts: CoincidenceCounts, theta1: float, theta2: float, label: str | None = None) -> CorrelationEstimate:
    h = math.pi / 2

    def c(t1, t2):
        return counts.lookup(t1, t2, label).coincidences

    return correlation_from_counts(c(theta1, theta2), c(theta1 + h, theta2 + h),
                                   c(theta1 + h, theta2), c(theta1, theta2 + h))


def chsh_S(e_12: CorrelationEstimate, e_12p: CorrelationEstimate, e_1p2: CorrelationEstimate,
           e_1p2p: CorrelationEstimate) -> CorrelationEstimate:
    """``S = |E(t1,t2) - E(t1,t2') + E(t1',t2) + E(t1',t2')|``."""
    es = (e_12, e_12p, e_1p2, e_1p2p)
    if not all(e.defined for e in es):
        return CorrelationEstimate.undefined("undefined correlation")
    s = abs(e_12.value - e_12p.value + e_1p2.value + e_1p2p.value)
    return CorrelationEstimate(s, math.sqrt(sum(e.stderr**2 for e in es)))


def chsh_from_counts(counts: CoincidenceCounts, angles=CHSH_ANGLES, label: str | None = None):
    """All four correlations and S for the analyzer set ``(t1, t2, t1', t2')``."""
    t1, t2, t1p, t2p = angles
    es = {
        "E_12": chsh_E(counts, t1, t2, label),
        "E_12p": chsh_E(counts, t1, t2p, label),
        "E_1p2": chsh_E(counts, t1p, t2, label),
        "E_1p2p": chsh_E(counts, t1p, t2p, label),
    }
    return es, chsh_S(es["E_12"], es["E_12p"], es["E_1p2"], es["E_1p2p"])


def chsh_settings(angles=CHSH_ANGLES) -> list[tuple[float, float]]:
    """The sixteen analyzer pairs needed for the four correlations."""
    t1, t2, t1p, t2p = angles
    h = math.pi / 2
    out = []
    for a, b in ((t1, t2), (t1, t2p), (t1p, t2), (t1p, t2p)):
        for da, db in ((0, 0), (h, h), (h, 0), (0, h)):
            out.append((a + da, b + db))
    return out


def chsh_S_exact(state: TwoQubitState | np.ndarray, angles=CHSH_ANGLES) -> float:
    """S from Born-rule correlations, ``E = <sigma(t2) x sigma(t1)>``."""
    from .detection import outcome_probabilities
    from .qcore import analyzer_vector

    rho = state.rho if isinstance(state, TwoQubitState) else np.asarray(state)

    def e(a, b):
        p = outcome_probabilities(rho, analyzer_vector(b), analyzer_vector(a))
        return p[0] - p[1] - p[2] + p[3]

    t1, t2, t1p, t2p = angles
    return abs(e(t1, t2) - e(t1, t2p) + e(t1p, t2) + e(t1p, t2p))


# --- resampling -----------------------------------------------------------


def bootstrap_stderr(estimator: Callable[..., float], counts: Sequence[float], rng: np.random.Generator,
                     n_resamples: int = 1000) -> float:
    """Parametric (Poisson) bootstrap spread of ``estimator(*counts)``."""
    lam = np.asarray(counts, dtype=float)
    draws = rng.poisson(lam, size=(n_resamples, lam.size))
    vals = []
    for row in draws:
        try:
            v = estimator(*row)
        except (ArithmeticError, ValueError):
            continue
        if math.isfinite(v):
            vals.append(v)
    if len(vals) < 2:
        return math.nan
    return float(np.std(vals, ddof=1))


def tally_singles(t: Tally) -> tuple[int, int, int, int]:
    return t.trials, t.singles_1, t.singles_2, t.coincidences
