import math

import numpy as np
from hypothesis import assume, given, settings, strategies as st

from spinlink.analysis import ProbTable, build_whichpath_rho, chsh_S_exact, concurrence_whichpath, fit_fringe_visibility
from spinlink.detection import outcome_probabilities
from spinlink.memory import retrieval_efficiency, MemoryParams
from spinlink.qcore import PHI_PLUS, TwoQubitState, analyzer_vector, concurrence, is_density, state_fidelity
from spinlink.source import expected_heralded_g2
from spinlink.tomography import TomoCounts, mle_reconstruct, tomo_settings_16

angles = st.floats(-math.pi, math.pi, allow_nan=False)
seeds = st.integers(0, 2**32 - 1)


def density_from_seed(seed, rank=None):
    rng = np.random.default_rng(seed)
    rank = rank or int(rng.integers(1, 5))
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


@given(seeds, angles, angles, st.floats(0, 2 * math.pi))
def test_born_outcomes_sum_to_one(seed, a, b, chi):
    rho = density_from_seed(seed)
    v1 = np.array([math.cos(b), math.sin(b) * np.exp(1j * chi)])
    p = outcome_probabilities(rho, analyzer_vector(a), v1)
    assert abs(p.sum() - 1) < 1e-12 and (p >= 0).all()


@given(seeds, st.lists(angles, min_size=4, max_size=4))
def test_tsirelson(seed, ang):
    assert chsh_S_exact(density_from_seed(seed), tuple(ang)) <= 2 * math.sqrt(2) + 1e-9


@given(seeds)
def test_separable_states_obey_chsh(seed):
    rng = np.random.default_rng(seed)
    a = density_from_seed(rng.integers(2**32), 1)[:2, :2]
    a /= np.trace(a).real
    b = density_from_seed(rng.integers(2**32), 1)[:2, :2]
    b /= np.trace(b).real
    rho = np.kron(a, b)
    ang = tuple(rng.uniform(-math.pi, math.pi, 4))
    assert chsh_S_exact(rho, ang) <= 2 + 1e-9


@given(seeds)
def test_measures_in_unit_interval(seed):
    rho = density_from_seed(seed)
    assert -1e-9 <= concurrence(rho) <= 1 + 1e-9
    assert -1e-12 <= state_fidelity(rho, PHI_PLUS) <= 1 + 1e-12


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 200))
def test_mle_is_physical(seed, shots):
    rng = np.random.default_rng(seed)
    counts = rng.integers(0, shots + 1, size=16)
    if counts.sum() == 0:
        counts[0] = 1
    res = mle_reconstruct(TomoCounts(tomo_settings_16(), counts))
    lam = np.linalg.eigvalsh(res.rho)
    assert lam.min() >= -1e-9
    assert abs(np.trace(res.rho).real - 1) < 1e-12
    assert np.abs(res.rho - res.rho.conj().T).max() < 1e-12


probs = st.floats(0, 1, allow_nan=False)


def table_from(a, b, c, d):
    total = a + b + c + d
    assume(total > 1e-6)
    return ProbTable(a / total, b / total, c / total, d / total)


@given(probs, probs, probs, probs, st.floats(0, 1))
def test_whichpath_psd_iff_coherence_bound(a, b, c, d, vis):
    p = table_from(a, b, c, d)
    coh = vis * (p.p01 + p.p10) / 2
    gap = coh**2 - p.p01 * p.p10
    assume(abs(gap) > 1e-9)
    assert is_density(build_whichpath_rho(p, vis)) == (gap < 0)


@given(probs, probs, probs, probs, st.floats(0, 1))
def test_whichpath_concurrence_matches_wootters(a, b, c, d, vis):
    p = table_from(a, b, c, d)
    assume(vis**2 * (p.p01 + p.p10) ** 2 / 4 <= p.p01 * p.p10)
    rho = build_whichpath_rho(p, vis)
    assert abs(concurrence_whichpath(p, vis) - concurrence(rho)) < 1e-7


@given(probs, probs, probs, probs, st.floats(0, 1), st.floats(0, 1))
def test_whichpath_concurrence_range_and_monotone(a, b, c, d, v1, v2):
    p = table_from(a, b, c, d)
    lo, hi = sorted((v1, v2))
    c_lo, c_hi = concurrence_whichpath(p, lo), concurrence_whichpath(p, hi)
    assert 0 <= c_lo <= c_hi + 1e-15 <= 1 + 1e-12


@given(st.floats(0.05, 1.0), angles, st.floats(10, 1e5), st.integers(5, 40))
def test_fringe_fit_exact(vis, phase, level, n):
    x = np.arange(n) * 2 * math.pi / n
    y = level * (1 + vis * np.cos(x - phase))
    assert abs(fit_fringe_visibility(x, y).visibility - vis) < 1e-9


pair_probs = st.one_of(st.just(0.0), st.floats(1e-12, 0.3))


@given(pair_probs, pair_probs, st.floats(0.01, 1), st.floats(0.01, 0.5), st.floats(0.01, 0.5))
def test_heralded_g2_bounds(p1, pd, eh, ea, eb):
    assume(p1 + pd > 0 and ea + eb <= 1)
    g = expected_heralded_g2(p1, pd, eh, ea, eb)
    # click detectors cap the two-photon contribution below one
    assert -1e-12 <= g <= 1 + 1e-12


@given(st.floats(0, 1e-5), st.floats(0, 1e-5))
def test_efficiency_nonincreasing(t1, t2):
    p = MemoryParams()
    lo, hi = sorted((t1, t2))
    assert retrieval_efficiency(hi, p) <= retrieval_efficiency(lo, p)
