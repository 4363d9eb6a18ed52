"""Event files, per-campaign analysis, summaries and the reference comparison.

The event file is plain CSV with header ``EVENT_COLUMNS``; one row per armed
detector per cycle.  Analysis is a deterministic reduction over the merged
stream, so ``analyze`` on a written file reproduces the summary produced by
``simulate``.
"""
from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd
import yaml

from .analysis import (
    CHSH_ANGLES, CorrelationEstimate, FringeFit, cauchy_schwarz_R, chsh_from_counts, concurrence_stderr,
    concurrence_whichpath, correlation_from_counts, chsh_S, fit_fringe_visibility, heralded_autocorrelation,
    normalized_correlation, prob_table_from_counts,
)
from .campaigns import DETECTOR_NAMES, WindowEvents
from .config import Campaign, RunConfig
from .detection import CoincidenceCounts, Tally, dark_corrected, setting_key
from .errors import DataIntegrityError, FitError, InvalidArgument, ReconstructionError, ReportError
from .memory import retrieval_efficiency
from .qcore import concurrence as state_concurrence
from .rng import StreamFactory
from .tomography import TomoCounts, fidelity_to_bell, linear_inversion, mle_reconstruct, tomo_settings_16

log = logging.getLogger(__name__)

EVENT_COLUMNS = ["cycle", "detector", "clicked", "setting_theta1", "setting_theta2", "basis", "campaign"]
REPORT_COLUMNS = ["metric", "computed", "reference_value", "reference_uncertainty", "z", "status"]
REFERENCE_COLUMNS = ["metric", "campaign", "value", "uncertainty"]
FRINGE_COLUMNS = ["x", "counts", "stderr", "fitted"]


# --- event file -----------------------------------------------------------


def _fmt_angle(x: float) -> str:
    return "nan" if not math.isfinite(x) else f"{x:.6f}"


def events_to_csv(windows: Iterable[WindowEvents], campaign: Campaign, fh) -> int:
    """Write windows (already in cycle order) to ``fh``; returns the row count."""
    fh.write(",".join(EVENT_COLUMNS) + "\n")
    rows = 0
    for w in windows:
        s = w.setting
        tail = f",{_fmt_angle(s.theta1)},{_fmt_angle(s.theta2)},{s.label},{campaign.value}\n"
        names = np.array([DETECTOR_NAMES[d] for d in (1, 2, 3)] + ["?"])[np.clip(w.detector - 1, 0, 3)]
        body = np.char.add(np.char.add(np.char.add(w.cycle.astype(str), ","), names),
                           np.where(w.clicked, ",1", ",0"))
        fh.write(tail.join(body.tolist()) + (tail if body.size else ""))
        rows += body.size
    return rows


@dataclass
class EventData:
    """Per-cycle pivot of an event file."""
    campaign: Campaign
    rows: int
    cycles: np.ndarray
    clicked: np.ndarray  # (n, 4) bool, column = detector id
    armed: np.ndarray
    label: np.ndarray  # object array of basis labels
    theta1: np.ndarray
    theta2: np.ndarray

    def select(self, mask: np.ndarray) -> EventData:
        return EventData(self.campaign, self.rows, self.cycles[mask], self.clicked[mask], self.armed[mask],
                         self.label[mask], self.theta1[mask], self.theta2[mask])

    def labels(self) -> list[str]:
        return list(dict.fromkeys(self.label.tolist()))


def read_events(path_or_buf) -> EventData:
    try:
        df = pd.read_csv(path_or_buf, dtype={"cycle": "int64", "detector": str, "clicked": "int64",
                                            "basis": str, "campaign": str},
                         keep_default_na=False, na_values={"setting_theta1": ["nan"], "setting_theta2": ["nan"]})
    except (ValueError, pd.errors.ParserError) as exc:
        raise DataIntegrityError(f"unreadable event file: {exc}") from exc
    if list(df.columns) != EVENT_COLUMNS:
        raise DataIntegrityError(f"event header must be {','.join(EVENT_COLUMNS)}")
    camps = df["campaign"].unique()
    if len(camps) > 1:
        raise DataIntegrityError(f"mixed campaigns in one event file: {sorted(camps)}")
    try:
        campaign = Campaign(camps[0]) if len(camps) else Campaign.CHSH
    except ValueError as exc:
        raise DataIntegrityError(f"unknown campaign {camps[0]!r}") from exc
    det = df["detector"].map({"D1": 1, "D2": 2, "D3": 3})
    if det.isna().any():
        raise DataIntegrityError("detector ids must be D1, D2 or D3")
    if not df["clicked"].isin([0, 1]).all():
        raise DataIntegrityError("clicked must be 0 or 1")
    cyc = df["cycle"].to_numpy()
    det = det.to_numpy(dtype=np.int64)
    if cyc.size and (np.any(np.diff(cyc) < 0) or cyc[0] < 0):
        raise DataIntegrityError("event rows are not sorted by cycle index")
    key = cyc * 4 + det
    if np.unique(key).size != key.size:
        raise DataIntegrityError("duplicated (cycle, detector) row")
    cycles, first, inv = np.unique(cyc, return_index=True, return_inverse=True)
    # the setting columns must not change inside a cycle
    codes = pd.factorize(df["basis"])[0]
    same = codes == codes[first][inv]
    for col in ("setting_theta1", "setting_theta2"):
        v = df[col].to_numpy(dtype=float)
        ref = v[first][inv]
        same &= (v == ref) | (np.isnan(v) & np.isnan(ref))
    if not same.all():
        raise DataIntegrityError("setting changes within a cycle")
    clicked = np.zeros((cycles.size, 4), dtype=bool)
    armed = np.zeros((cycles.size, 4), dtype=bool)
    armed[inv, det] = True
    clicked[inv, det] = df["clicked"].to_numpy() == 1
    return EventData(campaign, len(df), cycles, clicked, armed, df["basis"].to_numpy(dtype=object)[first],
                     df["setting_theta1"].to_numpy(dtype=float)[first],
                     df["setting_theta2"].to_numpy(dtype=float)[first])


def write_events(windows: list[WindowEvents], campaign: Campaign, path: Path) -> int:
    with open(path, "w", newline="") as fh:
        return events_to_csv(windows, campaign, fh)


def events_from_windows(windows: list[WindowEvents], campaign: Campaign) -> EventData:
    buf = io.StringIO()
    events_to_csv(windows, campaign, buf)
    buf.seek(0)
    return read_events(buf)


# --- counting helpers -----------------------------------------------------


def _tally(ev: EventData, a: int, b: int) -> Tally:
    sel = ev.armed[:, a] & ev.armed[:, b]
    ca, cb = ev.clicked[sel, a], ev.clicked[sel, b]
    return Tally(int(ca.sum()), int(cb.sum()), int((ca & cb).sum()), int(sel.sum()))


def coincidence_counts(ev: EventData, a: int = 1, b: int = 3, prefix: str = "") -> CoincidenceCounts:
    """Tallies of detectors ``a`` and ``b`` per setting for labels starting with ``prefix``."""
    out: dict = {}
    frame = pd.DataFrame({"label": ev.label, "t1": np.round(ev.theta1, 6), "t2": np.round(ev.theta2, 6)})
    keys = frame.groupby(["label", "t1", "t2"], dropna=False, sort=False).ngroup().to_numpy()
    for code in range(keys.max() + 1 if keys.size else 0):
        m = keys == code
        i = int(np.argmax(m))
        if not str(ev.label[i]).startswith(prefix):
            continue
        t = _tally(ev.select(m), a, b)
        if t.trials:
            out[setting_key(ev.label[i], ev.theta1[i], ev.theta2[i])] = t
    return CoincidenceCounts(out)


@dataclass
class ScanData:
    name: str
    x: np.ndarray
    counts: np.ndarray
    frequency: float
    fit: FringeFit | None = None


def _scan_counts(ev: EventData, hit: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Counts per scan point, rescaled to the median number of trials per point.

    Round-robin windows can leave some points with an extra window; rescaling
    keeps the fringe shape independent of that bookkeeping.
    """
    xs = np.unique(ev.theta1)
    trials = np.array([(ev.theta1 == x).sum() for x in xs], dtype=float)
    raw = np.array([(hit & (ev.theta1 == x)).sum() for x in xs], dtype=float)
    return xs, raw * np.median(trials) / trials


def _scan(name, x, counts, frequency) -> ScanData:
    order = np.argsort(x)
    sd = ScanData(name, np.asarray(x, float)[order], np.asarray(counts, float)[order], frequency)
    try:
        sd.fit = fit_fringe_visibility(sd.x, sd.counts, frequency)
    except FitError as exc:
        log.warning("fringe %s not fitted: %s", name, exc)
    return sd


def emit_fringe_plot_data(scan: ScanData | None, path) -> int:
    """Tabular fringe data ``x,counts,stderr,fitted``; header only for an empty scan."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(FRINGE_COLUMNS) + "\n")
        if scan is None or scan.x.size == 0:
            return 0
        fitted = scan.fit.model(scan.x) if scan.fit is not None else np.full(scan.x.size, np.nan)
        for x, c, f in zip(scan.x, scan.counts, fitted):
            fh.write(f"{x:.6f},{c:.6f},{math.sqrt(c):.6f},{f:.6f}\n")
        return int(scan.x.size)


def _vis_estimate(scan: ScanData) -> CorrelationEstimate:
    if scan.fit is None:
        return CorrelationEstimate.undefined("fringe could not be fitted")
    return CorrelationEstimate(scan.fit.visibility, scan.fit.visibility_stderr)


# --- per-campaign analysis ------------------------------------------------


@dataclass
class Analysis:
    metrics: dict = field(default_factory=dict)
    scans: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


def _analyze_cauchy_schwarz(ev: EventData, opts) -> Analysis:
    out = Analysis()
    pairs = {"g12": ("S1S2", 1, 3), "g11": ("S1S1", 1, 2), "g22": ("S2S2", 3, 2)}
    for name, (label, a, b) in pairs.items():
        t = _tally(ev.select(ev.label == label), a, b)
        out.metrics[name] = normalized_correlation(t.trials, t.singles_1, t.singles_2, t.coincidences)
    m = out.metrics
    if all(m[k].defined and m[k].value > 0 for k in ("g11", "g22", "g12")):
        out.metrics["R"] = cauchy_schwarz_R(m["g12"], m["g11"], m["g22"])
    else:
        out.metrics["R"] = CorrelationEstimate.undefined("undefined correlation function")
    return out


def _analyze_hbt(ev: EventData, opts) -> Analysis:
    out = Analysis()
    for label in ev.labels():
        if not label.startswith("HBT_"):
            continue
        e = ev.select(ev.label == label)
        c = e.clicked
        h = c[:, 3]
        est = heralded_autocorrelation(int(h.sum()), int((h & c[:, 1]).sum()), int((h & c[:, 2]).sum()),
                                       int((h & c[:, 1] & c[:, 2]).sum()))
        out.metrics["g2_heralded_" + label[4:].lower()] = est
        out.metrics["herald_rate_" + label[4:].lower()] = CorrelationEstimate(
            float(h.mean()) if h.size else math.nan, math.sqrt(h.sum()) / h.size if h.size else math.nan,
            bool(h.size))
    return out


def _analyze_whichpath(ev: EventData, opts) -> Analysis:
    out = Analysis()
    for label in ev.labels():
        if not label.startswith("LR"):
            continue
        suffix = "_input" if label.endswith("_INPUT") else "_output"
        e = ev.select(ev.label == label)
        h = e.clicked[:, 3]
        L, R = e.clicked[h, 1], e.clicked[h, 2]
        n = [int((~L & ~R).sum()), int((~L & R).sum()), int((L & ~R).sum()), int((L & R).sum())]
        if sum(n) == 0:
            for k in ("p00", "p01", "p10", "p11", "visibility", "concurrence"):
                out.metrics[k + suffix] = CorrelationEstimate.undefined("no heralded cycles")
            continue
        table, errs = prob_table_from_counts(*n)
        for k, p, dp in zip(("p00", "p01", "p10", "p11"), (table.p00, table.p01, table.p10, table.p11), errs):
            out.metrics[k + suffix] = CorrelationEstimate(p, dp)
        fr_label = "FRINGE" + label[2:]
        f = ev.select(ev.label == fr_label)
        hh = f.clicked[:, 3]
        if f.cycles.size:
            xs, counts = _scan_counts(f, f.clicked[:, 1] & hh)
            scan = _scan(fr_label.lower(), xs, counts, 1.0)
            out.scans.append(scan)
            vis = _vis_estimate(scan)
        else:
            vis = CorrelationEstimate.undefined("no fringe scan windows")
        out.metrics["visibility" + suffix] = vis
        if vis.defined:
            v = min(max(vis.value, 0.0), 1.0)
            c = concurrence_whichpath(table, v)
            out.metrics["concurrence" + suffix] = CorrelationEstimate(c, concurrence_stderr(table, errs, v, vis.stderr))
        else:
            out.metrics["concurrence" + suffix] = CorrelationEstimate.undefined("visibility undefined")
    return out


def _chsh_S_corrected(counts: CoincidenceCounts, angles, dark1: float, dark2: float) -> CorrelationEstimate:
    h = math.pi / 2

    def c(t1, t2):
        return dark_corrected(counts.lookup(t1, t2, "CHSH"), dark1, dark2)[2]

    es = []
    t1, t2, t1p, t2p = angles
    for a, b in ((t1, t2), (t1, t2p), (t1p, t2), (t1p, t2p)):
        es.append(correlation_from_counts(c(a, b), c(a + h, b + h), c(a + h, b), c(a, b + h)))
    return chsh_S(*es)


def _analyze_chsh(ev: EventData, opts) -> Analysis:
    out = Analysis()
    angles = opts.get("chsh_angles", CHSH_ANGLES)
    counts = coincidence_counts(ev, 1, 3, "CHSH")
    try:
        es, s = chsh_from_counts(counts, angles, "CHSH")
        out.metrics.update(es)
        out.metrics["S"] = s
        d1, d3 = opts.get("dark", (0.0, 0.0))
        if d1 > 0 or d3 > 0:
            out.metrics["S_dark_corrected"] = _chsh_S_corrected(counts, angles, d1, d3)
    except KeyError as exc:
        out.metrics["S"] = CorrelationEstimate.undefined(f"missing CHSH setting ({exc})")
    out.extra["coincidences_chsh"] = int(sum(t.coincidences for _, t in counts.items()))
    for basis in ("H", "V", "D", "A"):
        label = f"SCAN_{basis}"
        f = ev.select(ev.label == label)
        if f.cycles.size == 0:
            out.metrics[f"V_{basis}"] = CorrelationEstimate.undefined("no scan windows")
            continue
        xs, counts_x = _scan_counts(f, f.clicked[:, 1] & f.clicked[:, 3])
        scan = _scan(label.lower(), xs, counts_x, 2.0)
        out.scans.append(scan)
        out.metrics[f"V_{basis}"] = _vis_estimate(scan)
    return out


def _analyze_tomo(ev: EventData, opts) -> Analysis:
    out = Analysis()
    settings = tomo_settings_16()
    counts = {}
    trials = {}
    for s in settings:
        e = ev.select(ev.label == s.label)
        counts[s.label] = int((e.clicked[:, 1] & e.clicked[:, 3]).sum())
        trials[s.label] = int(e.cycles.size)
    missing = [k for k, v in trials.items() if v == 0]
    names = ("fidelity_mle", "fidelity_linear", "purity_mle", "concurrence_mle")
    if missing or sum(counts.values()) == 0:
        note = f"missing settings {missing}" if missing else "no coincidences"
        for k in names:
            out.metrics[k] = CorrelationEstimate.undefined(note)
        return out
    tc = TomoCounts.from_mapping(counts, min(trials.values()))
    try:
        mle = mle_reconstruct(tc)
        li = linear_inversion(tc)
    except ReconstructionError as exc:
        for k in names:
            out.metrics[k] = CorrelationEstimate.undefined(str(exc))
        return out
    n_boot = int(opts.get("bootstrap", 50))
    rng = StreamFactory(opts.get("seed", 0)).aux("tomo-bootstrap")
    boot = []
    for _ in range(n_boot):
        try:
            r = mle_reconstruct(TomoCounts(tc.settings, rng.poisson(tc.counts)), start=mle.rho)
            boot.append(fidelity_to_bell(r.rho))
        except ReconstructionError:
            continue
    spread = float(np.std(boot, ddof=1)) if len(boot) > 1 else math.nan
    f = fidelity_to_bell(mle.rho)
    out.metrics["fidelity_mle"] = CorrelationEstimate(f, spread if math.isfinite(spread) else 0.0,
                                                      note=f"bootstrap spread over {len(boot)} Poisson resamples")
    out.metrics["fidelity_linear"] = CorrelationEstimate(fidelity_to_bell(_psd_projection(li.rho)),
                                                         note="PSD projection of linear inversion")
    out.metrics["purity_mle"] = CorrelationEstimate(mle.state.purity())
    out.metrics["concurrence_mle"] = CorrelationEstimate(state_concurrence(mle.state))
    out.extra["tomography"] = {
        "counts": counts,
        "rho_real": np.round(mle.rho.real, 6).tolist(),
        "rho_imag": np.round(mle.rho.imag, 6).tolist(),
        "mle_converged": bool(mle.converged),
        "mle_iterations": mle.iterations,
        "mle_grad_norm": float(mle.grad_norm),
        "linear_inversion_psd": li.is_psd,
        "linear_inversion_min_eigenvalue": li.min_eigenvalue,
    }
    if not mle.converged:
        out.warnings.append(f"MLE did not converge (|grad| = {mle.grad_norm:.3e})")
    return out


def _psd_projection(rho: np.ndarray) -> np.ndarray:
    lam, vec = np.linalg.eigh(rho)
    lam = np.clip(lam, 0.0, None)
    out = (vec * lam) @ vec.conj().T
    return out / np.trace(out).real


def _storage_ns(label: str) -> float:
    return float(label.split("_", 1)[1])


def _analyze_efficiency(ev: EventData, opts) -> Analysis:
    out = Analysis()

    def ratio(label):
        t = _tally(ev.select(ev.label == label), 1, 3)
        return t.coincidences, t.singles_2

    c_ref, h_ref = ratio("REF")
    if c_ref == 0 or h_ref == 0:
        out.metrics["eta_300ns"] = CorrelationEstimate.undefined("no reference coincidences")
        out.metrics["eta_monotone"] = CorrelationEstimate.undefined("no reference coincidences")
        return out
    r_ref = c_ref / h_ref
    curve = []
    for label in ev.labels():
        if not label.startswith("STORE_"):
            continue
        c, h = ratio(label)
        t_ns = _storage_ns(label)
        if h == 0:
            est = CorrelationEstimate.undefined("no heralds")
        else:
            r = c / h
            rel2 = (1 - r) / max(c, 1) + (1 - r_ref) / c_ref
            est = CorrelationEstimate(r / r_ref, (r / r_ref) * math.sqrt(max(rel2, 0.0)))
        curve.append((t_ns, est))
        out.metrics[f"eta_{t_ns:g}ns"] = est
    curve.sort(key=lambda p: p[0])
    out.extra["eta_curve"] = [{"storage_time_ns": t, "eta": e.value, "stderr": e.stderr} for t, e in curve]
    mem = opts.get("memory")
    if mem is not None:
        out.extra["eta_model"] = [{"storage_time_ns": t, "eta": float(retrieval_efficiency(t * 1e-9, mem))}
                                  for t, _ in curve]
    vals = [e.value for _, e in curve if e.defined]
    if len(vals) >= 2:
        # monotone within counting noise: no step rises by more than 3 combined sigma
        errs = [e.stderr for _, e in curve if e.defined]
        ok = all(b - a <= 3 * math.hypot(ea, eb) for a, b, ea, eb in zip(vals, vals[1:], errs, errs[1:]))
        out.metrics["eta_monotone"] = CorrelationEstimate(1.0 if ok else 0.0, note="1 = nonincreasing within 3 sigma")
    else:
        out.metrics["eta_monotone"] = CorrelationEstimate.undefined("fewer than two storage times")
    if "eta_300ns" not in out.metrics:
        out.metrics["eta_300ns"] = CorrelationEstimate.undefined("300 ns not scanned")
    return out


_ANALYZERS = {
    Campaign.CAUCHY_SCHWARZ: _analyze_cauchy_schwarz,
    Campaign.HERALDED_G2: _analyze_hbt,
    Campaign.WHICHPATH: _analyze_whichpath,
    Campaign.CHSH: _analyze_chsh,
    Campaign.TOMO: _analyze_tomo,
    Campaign.EFFICIENCY_SCAN: _analyze_efficiency,
}


def analysis_options(cfg: RunConfig | None, seed: int | None = None) -> dict:
    if cfg is None:
        return {"seed": seed or 0}
    return {"seed": cfg.seed, "chsh_angles": tuple(cfg.chsh_angles), "memory": cfg.memory,
            "dark": (cfg.detectors["D1"].dark_prob, cfg.detectors["D3"].dark_prob)}


def analyze_events(ev: EventData, opts: dict | None = None) -> Analysis:
    opts = opts or {}
    res = _ANALYZERS[ev.campaign](ev, opts)
    for name, m in res.metrics.items():
        if not m.defined:
            res.warnings.append(f"{name} undefined: {m.note}")
    for w in res.warnings:
        log.warning(w)
    return res


# --- summary --------------------------------------------------------------


def _num(x: float):
    x = float(x)
    return x if math.isfinite(x) else None


def build_summary(ev: EventData, res: Analysis, seed: int | None) -> dict:
    metrics = {}
    for name, m in res.metrics.items():
        metrics[name] = {"value": _num(m.value), "stderr": _num(m.stderr), "defined": bool(m.defined),
                         "note": m.note, "campaign": ev.campaign.value, "seed": seed, "event_count": ev.rows}
    return {
        "campaign": ev.campaign.value,
        "seed": seed,
        "events": ev.rows,
        "cycles": int(ev.cycles.size),
        "metrics": metrics,
        "extra": res.extra,
        "warnings": list(res.warnings),
    }


def dump_summary(summary: dict) -> str:
    return yaml.safe_dump(summary, sort_keys=False, default_flow_style=None, width=100)


def load_summary(path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ReportError(f"cannot read summary {path}: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("metrics"), dict) or "campaign" not in data:
        raise ReportError(f"summary {path} lacks campaign/metrics blocks")
    for name, m in data["metrics"].items():
        if not isinstance(m, dict) or "value" not in m:
            raise ReportError(f"metric {name!r} in {path} has no value field")
    return data


# --- reference comparison -------------------------------------------------


def default_reference_path() -> Path:
    return Path(__file__).with_name("data") / "reference.csv"


def load_reference(path=None) -> pd.DataFrame:
    path = Path(path) if path is not None else default_reference_path()
    try:
        ref = pd.read_csv(path, comment="#")
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise ReportError(f"cannot read reference {path}: {exc}") from exc
    if list(ref.columns) != REFERENCE_COLUMNS:
        raise ReportError(f"reference header must be {','.join(REFERENCE_COLUMNS)}")
    try:
        ref["value"] = ref["value"].astype(float)
        ref["uncertainty"] = ref["uncertainty"].astype(float)
    except ValueError as exc:
        raise ReportError(f"non-numeric reference entry: {exc}") from exc
    if (ref["uncertainty"] < 0).any():
        raise ReportError("reference uncertainties must be >= 0")
    return ref


@dataclass
class Report:
    rows: list
    passed: bool

    def to_csv(self) -> str:
        buf = io.StringIO()
        pd.DataFrame(self.rows, columns=REPORT_COLUMNS).to_csv(buf, index=False, lineterminator="\n")
        return buf.getvalue()


def z_distance(computed: float, value: float, uncertainty: float) -> float:
    if uncertainty == 0:
        return 0.0 if computed == value else math.inf
    return abs(computed - value) / uncertainty


def compare_to_reference(summaries: dict | list, reference: pd.DataFrame, z_threshold: float = 3.0) -> Report:
    """One row per reference metric of the summarized campaigns.

    The z-distance uses the reference uncertainty only; metrics absent from the
    summary, or flagged undefined, are marked ``absent`` and fail the report.
    """
    if z_threshold <= 0:
        raise InvalidArgument("z threshold must be positive")
    if isinstance(summaries, dict):
        summaries = [summaries]
    computed: dict = {}
    for s in summaries:
        for name, m in s["metrics"].items():
            computed[(s["campaign"], name)] = m
    campaigns = {s["campaign"] for s in summaries}
    rows = []
    ok = True
    for r in reference.itertuples(index=False):
        if r.campaign not in campaigns:
            continue
        m = computed.get((r.campaign, r.metric))
        if m is None or not m.get("defined", True) or m.get("value") is None:
            rows.append([r.metric, "", r.value, r.uncertainty, "", "absent"])
            ok = False
            continue
        z = z_distance(float(m["value"]), r.value, r.uncertainty)
        status = "pass" if z <= z_threshold else "fail"
        ok &= status == "pass"
        rows.append([r.metric, float(m["value"]), r.value, r.uncertainty, round(z, 4), status])
    if not rows:
        raise ReportError("no reference rows match the summarized campaigns")
    return Report(rows, ok)
