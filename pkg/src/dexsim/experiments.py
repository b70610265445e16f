"""Canned end-to-end experiments: simulate -> detect -> correlate -> analyze.

Each plan bundles a scheme, detector channels, correlation recipe, analysis
steps and a machine-checkable expected-outcome manifest (sign, tolerance band
or count, each tagged with where the expectation comes from).  The shipped
plans reproduce the polarized spectrum, the co/cross-polarized cascade
correlations, and the heralded spin-precession readout through either trion.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .analysis import (
    BeatFit,
    InsufficientSpanError,
    SpectrumResult,
    fit_damped_cosine,
    synth_spectrum,
    write_fit_report,
    write_spectrum_csv,
)
from .correlator import (
    CorrelationCurve,
    CorrelationPair,
    cross_correlate,
    degree_of_correlation,
    merge_histograms,
    normalize,
    windowed_degree,
    write_curve_csv,
    write_histogram_csv,
)
from .detection import DetectorChannel, SSPD_JITTER_SIGMA, SPCM_JITTER_SIGMA, apply_detectors
from .scheme import default_paper_scheme
from .trajectory import EngineConfig, concatenate_trajectories, simulate


@dataclass(frozen=True)
class ManifestEntry:
    """One expected outcome: an evaluator kind, its parameters, and the
    source of the expectation."""

    name: str
    kind: str
    params: dict
    provenance: str


@dataclass
class ManifestResult:
    name: str
    passed: bool
    value: float
    detail: str
    provenance: str


@dataclass(frozen=True)
class ExperimentPlan:
    name: str
    description: str
    duration: float
    record_lines: tuple[str, ...] | None
    channels: tuple[DetectorChannel, ...]
    co_pairs: tuple[tuple[str, str], ...] = ()
    cross_pairs: tuple[tuple[str, str], ...] = ()
    window: float = 25.0
    bin_width: float = 0.025
    fit_window: tuple[float, float] | None = None
    spectrum: bool = False
    scheme_kwargs: dict = field(default_factory=dict)
    manifest: tuple[ManifestEntry, ...] = ()


@dataclass
class PlanResult:
    plan: ExperimentPlan
    seed: int
    n_heralds: int
    singles: dict[str, int]
    h_co: object = None
    h_cross: object = None
    h_total: object = None
    curve: CorrelationCurve | None = None
    fit: BeatFit | None = None
    spectrum: SpectrumResult | None = None
    manifest_results: list[ManifestResult] = field(default_factory=list)
    runtime_s: float = 0.0

    @property
    def all_passed(self):
        return all(r.passed for r in self.manifest_results)


# ---------------------------------------------------------------------------
# Plan definitions

_SSPD = dict(jitter_sigma=SSPD_JITTER_SIGMA, efficiency=1.0, dead_time=0.0, dark_rate=0.0)
_SPCM = dict(jitter_sigma=SPCM_JITTER_SIGMA, efficiency=1.0, dead_time=0.0, dark_rate=0.0)

_REF_PERIOD = "reference: measured precession period 0.82+-0.01 ns"
_REF_FSS_DARK = "reference: dark-exciton splitting 5.0+-0.7 ueV"
_REF_FSS_BRIGHT = "reference: bright-exciton splitting 36+-1 ueV"
_REF_CYCLES = "reference: four resolved spin-precession cycles"
_REF_PHASE = "reference: readout phase reversal between the two trion charge states"
_REF_SIGNS = "reference: co/cross-rectilinear cascade correlation signs"
_REF_BUNCH = "reference: strong cascade bunching over the accidental baseline"
_REF_TRION_DOP = "reference: unpolarized trion lines"
_REF_RATIO = "reference: unpolarized triplet line 4x each cross-polarized component"
_MODEL_STATS = "model: statistical-power requirement of the fit"


def _fig3_plan(name, trion_line, phase_target, description):
    tag = trion_line.split("->")[0]
    return ExperimentPlan(
        name=name,
        description=description,
        duration=4.0e7,
        record_lines=("XX0_T3->DEs", trion_line),
        channels=(
            DetectorChannel("T3R", ("XX0_T3->DEs",), "R", **_SSPD),
            DetectorChannel("T3L", ("XX0_T3->DEs",), "L", **_SSPD),
            DetectorChannel(f"{tag}R", (trion_line,), "R", **_SSPD),
            DetectorChannel(f"{tag}L", (trion_line,), "L", **_SSPD),
        ),
        co_pairs=(("T3R", f"{tag}R"), ("T3L", f"{tag}L")),
        cross_pairs=(("T3R", f"{tag}L"), ("T3L", f"{tag}R")),
        fit_window=(0.1, 8.0),
        manifest=(
            ManifestEntry("heralds", "min_heralds", {"min": 1_000_000}, _MODEL_STATS),
            ManifestEntry(
                "precession period", "period",
                {"target": 0.8271, "rel_tol": 0.02}, _REF_PERIOD,
            ),
            ManifestEntry(
                "dark-exciton splitting", "fss",
                {"target": 5.0, "rel_tol": 0.02}, _REF_FSS_DARK,
            ),
            ManifestEntry(
                "resolved cycles", "cycles_above_noise",
                {"min_cycles": 4}, _REF_CYCLES,
            ),
            ManifestEntry(
                "readout phase", "phase",
                {"target": phase_target, "tol": 0.35}, _REF_PHASE,
            ),
            ManifestEntry(
                "charging bunching", "bunching",
                {"t_lo": 0.0, "t_hi": 2.0, "base_abs": 15.0, "min_ratio": 1.5},
                _REF_BUNCH,
            ),
        ),
    )


def _fig2_plan(name, trigger_line, sign, description):
    comparator = "greater" if sign > 0 else "less"
    threshold = 0.2 * sign
    t_hi = 1.0 if sign > 0 else 1.5  # triplet cascade is a little slower
    return ExperimentPlan(
        name=name,
        description=description,
        duration=4.0e6,
        record_lines=(trigger_line, "X0->ground"),
        channels=(
            DetectorChannel("trigV", (trigger_line,), "V", **_SPCM),
            DetectorChannel("X0V", ("X0->ground",), "V", **_SPCM),
            DetectorChannel("X0H", ("X0->ground",), "H", **_SPCM),
        ),
        co_pairs=(("trigV", "X0V"),),
        cross_pairs=(("trigV", "X0H"),),
        manifest=(
            ManifestEntry(
                "cascade polarization sign", "window_sign",
                {"t_lo": 0.0, "t_hi": t_hi, "comparator": comparator,
                 "threshold": threshold},
                _REF_SIGNS,
            ),
            ManifestEntry(
                "cascade bunching", "bunching",
                {"t_lo": 0.0, "t_hi": t_hi, "base_abs": 15.0, "min_ratio": 1.5},
                _REF_BUNCH,
            ),
        ),
    )


def _fig1_plan():
    return ExperimentPlan(
        name="fig1_spectrum",
        description="Polarized PL spectrum with DOP: exciton/biexciton doublets, "
        "unpolarized trions, biexciton-triplet region.",
        duration=2.0e6,
        record_lines=None,
        channels=(),
        spectrum=True,
        manifest=(
            ManifestEntry(
                "exciton doublet", "spectrum_doublet",
                {"line": "X0->ground", "split": 36.0, "tol": 1.0}, _REF_FSS_BRIGHT,
            ),
            ManifestEntry(
                "biexciton doublet", "spectrum_doublet",
                {"line": "XX0->X0", "split": 36.0, "tol": 1.0}, _REF_FSS_BRIGHT,
            ),
            ManifestEntry(
                "positive trion unpolarized", "spectrum_unpolarized",
                {"line": "Xp->h1", "max_abs_dop": 0.05}, _REF_TRION_DOP,
            ),
            ManifestEntry(
                "negative trion unpolarized", "spectrum_unpolarized",
                {"line": "Xm->e1", "max_abs_dop": 0.05}, _REF_TRION_DOP,
            ),
            ManifestEntry(
                "triplet intensity pattern", "spectrum_ratio",
                {"strong": "XX0_T3->DEs",
                 "weak_components": ("XX0_T0->X0s:H", "XX0_T0->X0s:V"),
                 "target": 4.0, "rel_tol": 0.30},
                _REF_RATIO,
            ),
        ),
    )


def _build_plans():
    plans = [
        _fig1_plan(),
        _fig2_plan(
            "fig2_singlet", "XX0->X0", +1,
            "Singlet biexciton-exciton cascade: co-rectilinear correlation "
            "(positive degree of correlation).",
        ),
        _fig2_plan(
            "fig2_triplet", "XX0_T0->X0s", -1,
            "Triplet-0 biexciton-exciton cascade: cross-rectilinear correlation "
            "(negative degree of correlation).",
        ),
        _fig3_plan(
            "fig3_xplus", "Xp->h1", 0.0,
            "Heralded dark-exciton precession read out through the positive "
            "trion (co/cross-circular beat).",
        ),
        _fig3_plan(
            "fig3_xminus", "Xm->e1", math.pi,
            "Heralded dark-exciton precession read out through the negative "
            "trion; beat phase reversed relative to fig3_xplus.",
        ),
    ]
    return {p.name: p for p in plans}


_PLANS = _build_plans()


def list_plans():
    """Available plan names with one-line descriptions."""
    return [(name, plan.description) for name, plan in _PLANS.items()]


def get_plan(name: str) -> ExperimentPlan:
    try:
        return _PLANS[name]
    except KeyError:
        known = ", ".join(sorted(_PLANS))
        raise KeyError(f"unknown plan {name!r}; available: {known}") from None


# ---------------------------------------------------------------------------
# Manifest evaluation


def _wrap_angle(x):
    return math.remainder(x, 2.0 * math.pi)


def _eval_entry(entry: ManifestEntry, res: PlanResult) -> ManifestResult:
    p = entry.params
    kind = entry.kind
    if kind == "min_heralds":
        value = res.n_heralds
        passed = value >= p["min"]
        detail = f"{value} heralds (need >= {p['min']})"
    elif kind == "period":
        value = res.fit.period if res.fit else math.nan
        passed = res.fit is not None and abs(value - p["target"]) <= p["rel_tol"] * p["target"]
        detail = f"period {value:.5g} ns vs {p['target']} ns +-{p['rel_tol']:.0%}"
    elif kind == "fss":
        value = res.fit.fss if res.fit else math.nan
        passed = (
            res.fit is not None
            and not res.fit.period_unconstrained
            and abs(value - p["target"]) <= p["rel_tol"] * p["target"]
        )
        detail = f"splitting {value:.5g} ueV vs {p['target']} ueV +-{p['rel_tol']:.0%}"
    elif kind == "cycles_above_noise":
        value = _resolved_cycles(res)
        passed = value >= p["min_cycles"]
        detail = f"{value} full periods above 3x bin noise (need >= {p['min_cycles']})"
    elif kind == "phase":
        value = res.fit.phase if res.fit else math.nan
        if res.fit is None:
            passed = False
        else:
            passed = abs(_wrap_angle(value - p["target"])) <= p["tol"]
        detail = f"phase {value:.3f} rad vs {p['target']:.3f} +-{p['tol']}"
    elif kind == "window_sign":
        value, err = windowed_degree(res.h_co, res.h_cross, p["t_lo"], p["t_hi"])
        if p["comparator"] == "greater":
            passed = value > p["threshold"]
        else:
            passed = value < p["threshold"]
        detail = (
            f"C[{p['t_lo']}, {p['t_hi']} ns] = {value:.3f} +- {err:.3f}, "
            f"required {p['comparator']} than {p['threshold']}"
        )
    elif kind == "bunching":
        h = res.h_total
        c = h.tau_centers
        sel = (c >= p["t_lo"]) & (c < p["t_hi"])
        base = np.abs(c) >= p["base_abs"]
        peak = float(h.g2[sel].mean())
        baseline = float(h.g2[base].mean())
        value = peak / baseline if baseline > 0 else math.inf
        passed = value > p["min_ratio"]
        detail = f"g2 window/baseline = {value:.2f} (need > {p['min_ratio']})"
    elif kind == "spectrum_doublet":
        value, dop_h, dop_v = _doublet_split(res.spectrum, p["line"])
        passed = abs(value - p["split"]) <= p["tol"] and dop_h * dop_v < 0
        detail = (
            f"split {value:.3g} ueV vs {p['split']} +- {p['tol']}; "
            f"component DOPs {dop_h:+.2f}/{dop_v:+.2f}"
        )
    elif kind == "spectrum_unpolarized":
        value = _dop_at_line(res.spectrum, p["line"])
        passed = abs(value) <= p["max_abs_dop"]
        detail = f"|DOP| = {abs(value):.4f} (allow <= {p['max_abs_dop']})"
    elif kind == "spectrum_ratio":
        strong = res.spectrum.line_total(p["strong"])
        ratios = [
            strong / res.spectrum.line_total(weak) for weak in p["weak_components"]
        ]
        value = float(np.mean(ratios))
        ok = [abs(r - p["target"]) <= p["rel_tol"] * p["target"] for r in ratios]
        passed = all(ok)
        detail = f"intensity ratios {[f'{r:.2f}' for r in ratios]} vs {p['target']} +-{p['rel_tol']:.0%}"
    else:
        raise ValueError(f"unknown manifest kind {kind!r}")
    return ManifestResult(entry.name, bool(passed), float(value), detail, entry.provenance)


def _resolved_cycles(res: PlanResult) -> int:
    """Consecutive full beat periods whose fitted envelope tops 3x the median
    per-bin error of the degree-of-correlation curve in that period."""
    fit, curve = res.fit, res.curve
    if fit is None or curve is None or fit.period_unconstrained:
        return 0
    cycles = 0
    for k in range(1, 64):
        t_lo, t_hi = (k - 1) * fit.period, k * fit.period
        sel = curve.defined & (curve.tau >= t_lo) & (curve.tau < t_hi)
        errs = curve.c_err[sel]
        errs = errs[np.isfinite(errs)]
        if len(errs) == 0:
            break
        envelope = fit.amplitude * math.exp(-(t_lo + t_hi) / 2.0 / fit.damping_time)
        if envelope > 3.0 * float(np.median(errs)):
            cycles = k
        else:
            break
    return cycles


def _refined_peak(e, y):
    """Peak position with three-point parabolic sub-bin refinement."""
    k = int(np.argmax(y))
    if 0 < k < len(y) - 1:
        denom = y[k - 1] - 2.0 * y[k] + y[k + 1]
        if denom < 0:
            k_frac = 0.5 * (y[k - 1] - y[k + 1]) / denom
            return float(e[k] + k_frac * (e[1] - e[0])), k
    return float(e[k]), k


def _doublet_split(spectrum: SpectrumResult, line_id: str):
    """Distance between the H- and V-intensity peaks of a doublet line and
    the DOP at each peak."""
    comps = [c for c in spectrum.lines if c.label.startswith(line_id)]
    center = float(np.mean([c.center for c in comps]))
    halfwin = 3.0 * max(abs(c.center - center) for c in comps) + 2.0 * spectrum.resolution
    sel = (spectrum.energy >= center - halfwin) & (spectrum.energy <= center + halfwin)
    e = spectrum.energy[sel]
    e_h, kh = _refined_peak(e, spectrum.i_h[sel])
    e_v, kv = _refined_peak(e, spectrum.i_v[sel])
    split = abs(e_h - e_v)
    return split, float(spectrum.dop[sel][kh]), float(spectrum.dop[sel][kv])


def _dop_at_line(spectrum: SpectrumResult, line_id: str):
    comps = [c for c in spectrum.lines if c.label.startswith(line_id)]
    center = float(np.mean([c.center for c in comps]))
    k = int(np.argmin(np.abs(spectrum.energy - center)))
    return float(spectrum.dop[k])


# ---------------------------------------------------------------------------
# Execution


def run_plan(plan, seed: int, out_dir=None, workers: int = 1) -> PlanResult:
    """Execute a plan end to end; deterministic for a given (seed, workers).

    With ``workers`` > 1 the acquisition is split into that many trajectory
    segments run in parallel and concatenated end to end.  Writes the full
    artifact bundle (events/, channels/, histograms/, fits/, report) when
    ``out_dir`` is given.
    """
    if isinstance(plan, str):
        plan = get_plan(plan)
    t_start = time.perf_counter()

    scheme = default_paper_scheme(**plan.scheme_kwargs)
    n_traj = max(1, int(workers))
    cfg = EngineConfig(
        duration=plan.duration / n_traj,
        seed=seed,
        scheme=scheme,
        record_lines=plan.record_lines,
        n_trajectories=n_traj,
    )
    sim = simulate(cfg, n_workers=n_traj)
    events = concatenate_trajectories(sim.events) if n_traj > 1 else sim.events

    result = PlanResult(
        plan=plan, seed=seed, n_heralds=sim.n_heralds, singles={},
    )

    streams = apply_detectors(events, plan.channels, seed) if plan.channels else {}
    result.singles = {cid: len(s) for cid, s in streams.items()}

    if plan.co_pairs:
        def _hist(a, b):
            pair = CorrelationPair(a, b, window=plan.window, bin_width=plan.bin_width)
            return cross_correlate(streams[a], streams[b], pair)

        result.h_co = normalize(merge_histograms(*[_hist(a, b) for a, b in plan.co_pairs]))
        result.h_cross = normalize(
            merge_histograms(*[_hist(a, b) for a, b in plan.cross_pairs])
        )
        result.h_total = normalize(merge_histograms(result.h_co, result.h_cross))
        result.curve = degree_of_correlation(result.h_co, result.h_cross)

        if plan.fit_window is not None:
            lo, hi = plan.fit_window
            m = (result.curve.tau >= lo) & (result.curve.tau <= hi)
            sub = CorrelationCurve(
                tau=result.curve.tau[m],
                c=result.curve.c[m],
                c_err=result.curve.c_err[m],
                defined=result.curve.defined[m],
                meta=dict(result.curve.meta),
            )
            try:
                result.fit = fit_damped_cosine(sub)
            except InsufficientSpanError:
                result.fit = None

    if plan.spectrum:
        result.spectrum = synth_spectrum(scheme, events)

    result.manifest_results = [_eval_entry(e, result) for e in plan.manifest]
    result.runtime_s = time.perf_counter() - t_start

    if out_dir is not None:
        _write_bundle(result, events, streams, Path(out_dir))
    return result


def _write_bundle(result: PlanResult, events, streams, out: Path):
    from . import eventio

    out.mkdir(parents=True, exist_ok=True)
    (out / "events").mkdir(exist_ok=True)
    eventio.write_events(events, out / "events" / "photons.qdev")
    if streams:
        (out / "channels").mkdir(exist_ok=True)
        for cid, s in streams.items():
            eventio.write_detection(s, out / "channels" / f"{cid}.qdet")
    if result.h_co is not None:
        (out / "histograms").mkdir(exist_ok=True)
        write_histogram_csv(result.h_co, out / "histograms" / "co.csv")
        write_histogram_csv(result.h_cross, out / "histograms" / "cross.csv")
        write_histogram_csv(result.h_total, out / "histograms" / "total.csv")
        write_curve_csv(result.curve, out / "histograms" / "degree_of_correlation.csv")
    if result.fit is not None:
        (out / "fits").mkdir(exist_ok=True)
        write_fit_report(
            result.fit, out / "fits" / "beat_fit.yaml",
            extra_meta={"plan": result.plan.name, "seed": result.seed},
        )
    if result.spectrum is not None:
        (out / "spectrum").mkdir(exist_ok=True)
        write_spectrum_csv(result.spectrum, out / "spectrum" / "spectrum.csv")
    report = plan_report(result)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    (out / "report.txt").write_text(format_report(result))


def plan_report(result: PlanResult) -> dict:
    """Machine-readable summary of a plan run.

    Deliberately excludes wall-clock timing so reruns at the same seed
    produce byte-identical report files.
    """
    rep = {
        "plan": result.plan.name,
        "description": result.plan.description,
        "seed": result.seed,
        "n_heralds": result.n_heralds,
        "singles": result.singles,
        "all_passed": result.all_passed,
        "manifest": [asdict(m) for m in result.manifest_results],
    }
    if result.fit is not None:
        f = result.fit
        rep["fit"] = {
            "period_ns": f.period,
            "period_err_ns": f.period_err,
            "damping_time_ns": f.damping_time,
            "amplitude": f.amplitude,
            "phase_rad": f.phase,
            "offset": f.offset,
            "fss_ueV": None if math.isnan(f.fss) else f.fss,
            "fss_err_ueV": None if math.isnan(f.fss_err) else f.fss_err,
            "reduced_chi_square": f.chi2_red,
        }
    return rep


def format_report(result: PlanResult) -> str:
    lines = [
        f"plan: {result.plan.name}",
        f"seed: {result.seed}",
        f"heralded spin preparations: {result.n_heralds}",
    ]
    if result.singles:
        lines.append("singles: " + ", ".join(f"{k}={v}" for k, v in result.singles.items()))
    if result.fit is not None:
        f = result.fit
        lines.append(
            f"beat fit: period {f.period:.4f} +- {f.period_err:.4f} ns, "
            f"damping {f.damping_time:.2f} ns, amplitude {f.amplitude:.3f}, "
            f"phase {f.phase:+.3f} rad"
        )
        if not math.isnan(f.fss):
            lines.append(f"splitting: {f.fss:.3f} +- {f.fss_err:.3f} ueV")
    lines.append("manifest:")
    for m in result.manifest_results:
        status = "PASS" if m.passed else "FAIL"
        lines.append(f"  [{status}] {m.name}: {m.detail}")
        lines.append(f"         source: {m.provenance}")
    lines.append(f"overall: {'PASS' if result.all_passed else 'FAIL'}")
    return "\n".join(lines) + "\n"
