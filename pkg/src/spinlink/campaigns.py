"""Seeded end-to-end simulation of the measurement campaigns.

A run is a sequence of operating windows of ``cycles_per_window`` cycles.
Each window holds one measurement setting; settings rotate round-robin over
windows, the way wave plates are stepped between MOT loading periods.  Every
window draws from its own counter-keyed stream, so windows can be simulated in
any order or in parallel and the merged event stream is identical.

Detector wiring per campaign:

==================  =======================================================
CAUCHY_SCHWARZ      S1S2: D1 signal 1, D3 signal 2; S1S1: D1/D2 split signal 1;
                    S2S2: D3/D2 split signal 2
HERALDED_G2         D3 herald (signal 2); D1/D2 HBT split of signal 1
WHICHPATH           D3 herald; LR: D1 = path L, D2 = path R;
                    FRINGE: paths recombined, D1/D2 = output ports
CHSH, TOMO          D1 signal-1 analyzer, D3 signal-2 analyzer
EFFICIENCY_SCAN     D3 herald, D1 signal 1 after storage (REF bypasses memory)
==================  =======================================================
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import Campaign, RunConfig
from .detection import BASIS_ANGLE, Basis, DetectorParams, outcome_probabilities, sample_outcomes
from .memory import retrieval_efficiency
from .qcore import analyzer_vector
from .rng import StreamFactory
from .source import pair_state, sample_multiplicities, thermal_photon_numbers
from .tomography import tomo_settings_16

DETECTOR_NAMES = {1: "D1", 2: "D2", 3: "D3"}


@dataclass(frozen=True)
class WindowSetting:
    label: str
    theta1: float = 0.0
    theta2: float = 0.0
    armed: tuple = (1, 3)
    storage_time_ns: float = math.nan


def window_settings(cfg: RunConfig) -> list[WindowSetting]:
    c = cfg.campaign
    if c is Campaign.CAUCHY_SCHWARZ:
        return [WindowSetting("S1S2", armed=(1, 3)), WindowSetting("S1S1", armed=(1, 2)),
                WindowSetting("S2S2", armed=(2, 3))]
    if c is Campaign.HERALDED_G2:
        label = "HBT_INPUT" if cfg.stage == "input" else "HBT_RETRIEVED"
        return [WindowSetting(label, armed=(1, 2, 3))]
    if c is Campaign.WHICHPATH:
        suffix = "_INPUT" if cfg.stage == "input" else ""
        out = [WindowSetting("LR" + suffix, armed=(1, 2, 3))]
        n = cfg.scan_points
        out += [WindowSetting("FRINGE" + suffix, 2 * math.pi * k / n, 0.0, (1, 2, 3)) for k in range(n)]
        return out
    if c is Campaign.CHSH:
        from .analysis import chsh_settings
        out = [WindowSetting("CHSH", a, b) for a, b in chsh_settings(cfg.chsh_angles)]
        n = cfg.scan_points
        for basis in (Basis.H, Basis.V, Basis.D, Basis.A):
            out += [WindowSetting(f"SCAN_{basis.value}", math.pi * k / n, BASIS_ANGLE[basis]) for k in range(n)]
        return out
    if c is Campaign.TOMO:
        out = []
        for s in tomo_settings_16():
            t1, t2 = s.analyzer_angles
            out.append(WindowSetting(s.label, t1, t2))
        return out
    if c is Campaign.EFFICIENCY_SCAN:
        out = [WindowSetting("REF")]
        out += [WindowSetting(f"STORE_{t:g}", storage_time_ns=float(t)) for t in cfg.storage_times_ns]
        return out
    raise ValueError(c)


def setting_for_window(cfg: RunConfig, window: int) -> WindowSetting:
    settings = window_settings(cfg)
    return settings[window % len(settings)]


# --- photon-level helpers -------------------------------------------------


def _detect(photons: np.ndarray, det: DetectorParams, rng: np.random.Generator) -> np.ndarray:
    hit = rng.binomial(photons, det.efficiency) > 0
    dark = rng.random(photons.shape[0]) < det.dark_prob
    return hit | dark


def _thin(photons: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    return rng.binomial(photons, p)


def _signal1_survival(cfg: RunConfig, storage_time_ns: float | None = None) -> float:
    """Signal-1 survival; with ``storage_time_ns`` the memory is read at that time (NaN bypasses it)."""
    if storage_time_ns is None:
        return cfg.signal1_survival
    t = cfg.losses.path_transmission
    if cfg.memory_enabled and math.isfinite(storage_time_ns):
        return t * float(retrieval_efficiency(storage_time_ns * 1e-9, cfg.memory))
    return t


def _jitter_active(cfg: RunConfig) -> bool:
    return cfg.memory_enabled and cfg.stage == "output" and cfg.memory.phase_jitter_sigma > 0


def _sim_cauchy_schwarz(cfg, ws, rng, n):
    src = cfg.source
    mult = sample_multiplicities(src, n, rng).astype(np.int64)
    t = cfg.losses.path_transmission
    n1 = _thin(mult, _signal1_survival(cfg), rng)
    n2 = _thin(mult, t, rng)
    n1 = n1 + _thin(thermal_photon_numbers(src.noise_mean, src.mode_number, n, rng), t, rng)
    n2 = n2 + _thin(thermal_photon_numbers(src.noise_mean, src.mode_number, n, rng), t, rng)
    d = cfg.detectors
    if ws.label == "S1S2":
        return {1: _detect(n1, d["D1"], rng), 3: _detect(n2, d["D3"], rng)}
    if ws.label == "S1S1":
        a = rng.binomial(n1, 0.5)
        return {1: _detect(a, d["D1"], rng), 2: _detect(n1 - a, d["D2"], rng)}
    a = rng.binomial(n2, 0.5)
    return {3: _detect(a, d["D3"], rng), 2: _detect(n2 - a, d["D2"], rng)}


def _sim_hbt(cfg, ws, rng, n):
    mult = sample_multiplicities(cfg.source, n, rng).astype(np.int64)
    n1 = _thin(mult, _signal1_survival(cfg), rng)
    n2 = _thin(mult, cfg.losses.path_transmission, rng)
    a = rng.binomial(n1, 0.5)
    d = cfg.detectors
    return {1: _detect(a, d["D1"], rng), 2: _detect(n1 - a, d["D2"], rng), 3: _detect(n2, d["D3"], rng)}


def _sim_whichpath(cfg, ws, rng, n):
    src = cfg.source
    mult = sample_multiplicities(src, n, rng).astype(np.int64)
    n2 = _thin(mult, cfg.losses.path_transmission, rng)
    p1 = _signal1_survival(cfg)
    sigma = cfg.memory.phase_jitter_sigma if _jitter_active(cfg) else 0.0
    port_a = np.zeros(n, dtype=np.int64)
    port_b = np.zeros(n, dtype=np.int64)
    for k in (0, 1):
        idx = np.nonzero(mult > k)[0]
        m = idx.size
        alive = rng.random(m) < p1
        if ws.label.startswith("LR"):
            p_a = np.full(m, 0.5)
        else:
            delta = rng.normal(0.0, sigma, m) if sigma > 0 else 0.0
            p_a = 0.5 * (1 + src.visibility * np.cos(ws.theta1 + src.phase_phi + delta))
        to_a = rng.random(m) < p_a
        port_a[idx] += alive & to_a
        port_b[idx] += alive & ~to_a
    d = cfg.detectors
    return {1: _detect(port_a, d["D1"], rng), 2: _detect(port_b, d["D2"], rng), 3: _detect(n2, d["D3"], rng)}


def _analyzer_vectors(cfg: RunConfig, ws: WindowSetting):
    if cfg.campaign is Campaign.TOMO:
        s = next(s for s in tomo_settings_16() if s.label == ws.label)
        return s.projector_1.vector, s.projector_2.vector
    return analyzer_vector(ws.theta2), analyzer_vector(ws.theta1)


def _sim_polarization(cfg, ws, rng, n):
    src = cfg.source
    mult = sample_multiplicities(src, n, rng)
    rho = pair_state(src).rho
    v0, v1 = _analyzer_vectors(cfg, ws)
    p1 = _signal1_survival(cfg)
    t2 = cfg.losses.path_transmission
    sigma = cfg.memory.phase_jitter_sigma if _jitter_active(cfg) else 0.0
    static = outcome_probabilities(rho, v0, v1)
    ph1 = np.zeros(n, dtype=np.int64)
    ph2 = np.zeros(n, dtype=np.int64)
    for k in (0, 1):
        idx = np.nonzero(mult > k)[0]
        m = idx.size
        if m == 0:
            continue
        if sigma > 0:
            probs = outcome_probabilities(rho, v0, v1, rng.normal(0.0, sigma, m))
        else:
            probs = np.broadcast_to(static, (m, 4))
        pass1, pass2 = sample_outcomes(probs, rng)
        ph1[idx] += pass1 & (rng.random(m) < p1)
        ph2[idx] += pass2 & (rng.random(m) < t2)
    d = cfg.detectors
    return {1: _detect(ph1, d["D1"], rng), 3: _detect(ph2, d["D3"], rng)}


def _sim_efficiency(cfg, ws, rng, n):
    mult = sample_multiplicities(cfg.source, n, rng).astype(np.int64)
    n1 = _thin(mult, _signal1_survival(cfg, ws.storage_time_ns), rng)
    n2 = _thin(mult, cfg.losses.path_transmission, rng)
    d = cfg.detectors
    return {1: _detect(n1, d["D1"], rng), 3: _detect(n2, d["D3"], rng)}


_SIMULATORS = {
    Campaign.CAUCHY_SCHWARZ: _sim_cauchy_schwarz,
    Campaign.HERALDED_G2: _sim_hbt,
    Campaign.WHICHPATH: _sim_whichpath,
    Campaign.CHSH: _sim_polarization,
    Campaign.TOMO: _sim_polarization,
    Campaign.EFFICIENCY_SCAN: _sim_efficiency,
}


@dataclass
class WindowEvents:
    window: int
    setting: WindowSetting
    cycle: np.ndarray
    detector: np.ndarray
    clicked: np.ndarray


def simulate_window(cfg: RunConfig, window: int) -> WindowEvents:
    n = cfg.schedule.cycles_per_window
    ws = setting_for_window(cfg, window)
    rng = StreamFactory(cfg.seed).window(window)
    clicks = _SIMULATORS[cfg.campaign](cfg, ws, rng, n)
    dets = sorted(clicks)
    assert tuple(dets) == tuple(sorted(ws.armed))
    first = window * n
    cycle = np.repeat(np.arange(first, first + n, dtype=np.int64), len(dets))
    detector = np.tile(np.array(dets, dtype=np.int8), n)
    clicked = np.stack([clicks[d] for d in dets], axis=1).ravel()
    return WindowEvents(window, ws, cycle, detector, clicked)


def _simulate_window_args(args):
    return simulate_window(*args)


def simulate(cfg: RunConfig, workers: int = 1) -> list[WindowEvents]:
    """All windows of a run, in window order regardless of ``workers``."""
    jobs = [(cfg, w) for w in range(cfg.windows)]
    if workers <= 1 or cfg.windows <= 1:
        return [simulate_window(c, w) for c, w in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_simulate_window_args, jobs, chunksize=max(1, cfg.windows // (4 * workers))))
