"""Command-line entry point.

Subcommands cover the whole chain: scheme validation, trajectory simulation,
detector channels, coincidence correlation, beat fitting, spectrum synthesis
and the canned experiment plans.  Units are ns for times and windows (the
correlate --bin option is in ps), ueV for energies, 1/ns for rates.

Every data-producing command also writes a machine-readable JSON summary
alongside its primary output.  Exit codes: 0 success, 1 validation failure,
2 usage error.  Scheme discovery order: --config flag, then the
DEXSIM_SCHEME environment variable, then the packaged default scheme.
"""

from __future__ import annotations

import json
import logging
import math
import os
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from . import eventio
from .analysis import (
    fit_damped_cosine,
    read_spectrum_csv,
    synth_spectrum,
    write_fit_report,
    write_spectrum_csv,
)
from .correlator import (
    CorrelationCurve,
    CorrelationPair,
    cross_correlate,
    normalize,
    read_curve_csv,
    read_histogram_csv,
    start_stop_correlate,
    write_histogram_csv,
)
from .detection import DetectorChannel, apply_detectors
from .experiments import format_report, get_plan, list_plans, run_plan
from .scheme import SchemeError, default_paper_scheme, load_scheme, save_scheme, validate
from .trajectory import EngineConfig, concatenate_trajectories, simulate

log = logging.getLogger("dexsim")


def _write_summary(path, payload: dict):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _resolve_scheme(config_path):
    if config_path:
        return load_scheme(config_path)
    env = os.environ.get("DEXSIM_SCHEME")
    if env:
        return load_scheme(env)
    return default_paper_scheme()


@click.group(help=__doc__)
@click.option("-v", "--verbose", count=True, help="Increase log verbosity (-v, -vv).")
@click.option(
    "--out-dir",
    envvar="DEXSIM_OUT",
    default=".",
    show_default=True,
    help="Default output directory (env: DEXSIM_OUT).",
)
@click.pass_context
def main(ctx, verbose, out_dir):
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    ctx.obj["out_dir"] = Path(out_dir)


@main.group(help="Level-scheme utilities.")
def scheme():
    pass


@scheme.command("validate", help="Validate a YAML scheme config; exits 1 on violations.")
@click.argument("config_file", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True, help="Emit a machine-readable result.")
def scheme_validate(config_file, as_json):
    violations = []
    try:
        built = load_scheme(config_file)
        violations = validate(built)
    except SchemeError as exc:
        violations = [str(exc)]
    if as_json:
        click.echo(json.dumps({"file": str(config_file), "violations": violations}))
    elif violations:
        click.echo(f"{config_file}: {len(violations)} violation(s)")
        for v in violations:
            click.echo(f"  - {v}")
    else:
        click.echo(f"{config_file}: OK")
    sys.exit(1 if violations else 0)


@scheme.command("export-default", help="Write the built-in default scheme as YAML.")
@click.option("--out", "out_path", required=True, type=click.Path())
def scheme_export(out_path):
    save_scheme(default_paper_scheme(), out_path)
    click.echo(f"wrote {out_path}")


@main.command(help="Run the Monte Carlo trajectory engine and store photon events.")
@click.option("--config", "config_path", type=click.Path(exists=True), help="Scheme YAML.")
@click.option("--seed", default=12345, show_default=True, help="Master RNG seed.")
@click.option("--duration", required=True, type=float, help="Duration per trajectory (ns).")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Event file (.qdev).")
@click.option("--lines", multiple=True, help="Restrict recording to these line ids.")
@click.option("--trajectories", default=1, show_default=True, help="Trajectories in the ensemble.")
@click.option("--workers", default=1, show_default=True, help="Parallel worker cap.")
def simulate_cmd(config_path, seed, duration, out_path, lines, trajectories, workers):
    scheme_obj = _resolve_scheme(config_path)
    cfg = EngineConfig(
        duration=duration,
        seed=seed,
        scheme=scheme_obj,
        record_lines=tuple(lines) or None,
        n_trajectories=trajectories,
    )
    result = simulate(cfg, n_workers=workers)
    events = result.events
    if trajectories > 1:
        events = concatenate_trajectories(events)
    eventio.write_events(events, out_path)
    log.info("seed %d -> %d events, %d heralds", seed, len(events), result.n_heralds)
    click.echo(f"wrote {out_path}: {len(events)} events, {result.n_heralds} heralds")
    _write_summary(
        str(out_path) + ".summary.json",
        {
            "seed": seed,
            "duration_ns": duration,
            "trajectories": trajectories,
            "n_events": len(events),
            "n_heralds": result.n_heralds,
            "n_steps": result.n_steps,
            "lines": list(events.line_ids),
            "diagnostics": result.diagnostics,
        },
    )


def _load_channels(path):
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    items = doc["channels"] if isinstance(doc, dict) else doc
    channels = []
    for item in items:
        channels.append(
            DetectorChannel(
                id=str(item["id"]),
                line_filter=tuple(item["lines"]) if item.get("lines") else None,
                analyzer=item.get("analyzer"),
                efficiency=float(item.get("efficiency", 1.0)),
                jitter_sigma=float(item.get("jitter_sigma_ns", 0.0)),
                dead_time=float(item.get("dead_time_ns", 0.0)),
                dark_rate=float(item.get("dark_rate_per_ns", 0.0)),
            )
        )
    return channels


@main.command(help="Apply detector channels to an event file; one output per channel.")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--channels", "channels_path", required=True, type=click.Path(exists=True),
              help="YAML channel list (id, lines, analyzer, efficiency, jitter_sigma_ns, dead_time_ns, dark_rate_per_ns).")
@click.option("--seed", default=12345, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
def detect(in_path, channels_path, seed, out_dir):
    events = eventio.read_events(in_path)
    channels = _load_channels(channels_path)
    for ch in channels:
        if ch.line_filter:
            unknown = [l for l in ch.line_filter if l not in events.line_ids]
            if unknown:
                click.echo(f"channel {ch.id}: unknown line(s) {unknown}", err=True)
                sys.exit(1)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    streams = apply_detectors(events, channels, seed)
    counts = {}
    for ch in channels:
        s = streams[ch.id]
        eventio.write_detection(s, out / f"{ch.id}.qdet")
        counts[ch.id] = len(s)
        click.echo(f"wrote {out / (ch.id + '.qdet')}: {len(s)} records")
    log.info("seed %d over %d channels", seed, len(channels))
    _write_summary(out / "summary.json", {"seed": seed, "in": str(in_path), "counts": counts})


@main.command(help="Cross-correlate two detection streams into a g2 histogram CSV.")
@click.option("--a", "a_path", required=True, type=click.Path(exists=True),
              help="Start (trigger) stream: .qdet or text timestamps (ns).")
@click.option("--b", "b_path", required=True, type=click.Path(exists=True),
              help="Stop stream: .qdet or text timestamps (ns).")
@click.option("--bin", "bin_ps", default=25.0, show_default=True, help="Bin width (ps).")
@click.option("--window", default=25.0, show_default=True, help="Half window (ns).")
@click.option("--span", default=None, type=float, help="Acquisition span override (ns).")
@click.option("--start-stop", is_flag=True, help="Classic start-stop instead of all pairs.")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Histogram CSV.")
def correlate(a_path, b_path, bin_ps, window, span, start_stop, out_path):
    a = eventio.read_timestamps(a_path)
    b = eventio.read_timestamps(b_path)
    pair = CorrelationPair(a.channel, b.channel, window=window, bin_width=bin_ps * 1e-3)
    fn = start_stop_correlate if start_stop else cross_correlate
    hist = fn(a, b, pair, span=span)
    if hist.n_start and hist.n_stop and hist.span > 0:
        hist = normalize(hist)
    write_histogram_csv(hist, out_path)
    total = int(hist.counts.sum())
    click.echo(f"wrote {out_path}: {total} coincidences in +-{window} ns")
    _write_summary(
        str(out_path) + ".summary.json",
        {
            "a": str(a_path), "b": str(b_path),
            "bin_ps": bin_ps, "window_ns": window,
            "total_coincidences": total,
            "singles": [hist.n_start, hist.n_stop],
            "mean_g2": None if hist.g2 is None else float(np.nanmean(hist.g2)),
        },
    )


@main.command("fit-beat", help="Fit a damped cosine to a degree-of-correlation CSV.")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True),
              help="Curve CSV (tau_center_ns,C,C_err,defined).")
@click.option("--window", nargs=2, type=float, default=None,
              help="Fit window LO HI in ns (default: full curve).")
@click.option("--out", "out_path", required=True, type=click.Path(), help="YAML fit report.")
def fit_beat(in_path, window, out_path):
    from .analysis import FitError

    curve = read_curve_csv(in_path)
    if window:
        lo, hi = window
        m = (curve.tau >= lo) & (curve.tau <= hi)
        curve = CorrelationCurve(curve.tau[m], curve.c[m], curve.c_err[m],
                                 curve.defined[m], curve.meta)
    try:
        fit = fit_damped_cosine(curve)
    except FitError as exc:
        click.echo(f"fit failed: {exc}", err=True)
        sys.exit(1)
    write_fit_report(fit, out_path, extra_meta={"input": str(in_path)})
    click.echo(
        f"period {fit.period:.4f} +- {fit.period_err:.4f} ns, "
        f"damping {fit.damping_time:.2f} ns, amplitude {fit.amplitude:.3f}, "
        f"phase {fit.phase:+.3f} rad, reduced chi2 {fit.chi2_red:.2f}"
    )
    if math.isnan(fit.fss):
        click.echo("period unconstrained: no splitting reported")
    else:
        click.echo(f"splitting {fit.fss:.3f} +- {fit.fss_err:.3f} ueV")
    _write_summary(
        str(out_path) + ".summary.json",
        {
            "input": str(in_path),
            "period_ns": fit.period,
            "period_err_ns": fit.period_err,
            "fss_ueV": None if math.isnan(fit.fss) else fit.fss,
            "converged": fit.converged,
            "period_unconstrained": fit.period_unconstrained,
        },
    )
    sys.exit(0 if fit.converged else 1)


@main.command("spectrum", help="Synthesize the polarized spectrum with DOP as CSV.")
@click.option("--config", "config_path", type=click.Path(exists=True), help="Scheme YAML.")
@click.option("--events", "events_path", type=click.Path(exists=True),
              help="Optional event file; otherwise analytic steady-state rates.")
@click.option("--resolution", default=25.0, show_default=True, help="Instrument FWHM (ueV).")
@click.option("--out", "out_path", required=True, type=click.Path())
def spectrum_cmd(config_path, events_path, resolution, out_path):
    scheme_obj = _resolve_scheme(config_path)
    events = eventio.read_events(events_path) if events_path else None
    result = synth_spectrum(scheme_obj, events, resolution=resolution)
    write_spectrum_csv(result, out_path)
    click.echo(f"wrote {out_path}: {len(result.lines)} components")
    _write_summary(
        str(out_path) + ".summary.json",
        {
            "resolution_ueV": resolution,
            "source": "events" if events_path else "analytic",
            "components": [
                {"label": c.label, "center_ueV": c.center,
                 "I_H": c.intensity_h, "I_V": c.intensity_v}
                for c in result.lines
            ],
        },
    )


@main.command(help="Execute a canned experiment plan and write its artifact bundle.")
@click.option("--plan", "plan_name", required=True)
@click.option("--seed", default=12345, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), help="Bundle directory (default: <out-dir>/<plan>-<seed>).")
@click.option("--workers", default=1, show_default=True, help="Parallel trajectory segments.")
@click.option("--check", is_flag=True, help="Exit 1 if any manifest entry fails.")
@click.option("--no-plots", is_flag=True, help="Skip SVG rendering.")
@click.pass_context
def run(ctx, plan_name, seed, out_dir, workers, check, no_plots):
    try:
        plan = get_plan(plan_name)
    except KeyError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    out = Path(out_dir) if out_dir else ctx.obj["out_dir"] / f"{plan.name}-{seed}"
    result = run_plan(plan, seed=seed, out_dir=out, workers=workers)
    click.echo(format_report(result))
    click.echo(f"runtime: {result.runtime_s:.1f} s")
    if not no_plots:
        plots = out / "plots"
        plots.mkdir(exist_ok=True)
        if result.curve is not None:
            emit_plot(out / "histograms" / "degree_of_correlation.csv", "curve",
                      plots / "degree_of_correlation.svg")
            emit_plot(out / "histograms" / "total.csv", "histogram", plots / "g2_total.svg")
        if result.spectrum is not None:
            emit_plot(out / "spectrum" / "spectrum.csv", "spectrum", plots / "spectrum.svg")
    click.echo(f"bundle: {out}")
    log.info("plan %s seed %d -> %s", plan.name, seed, out)
    if check and not result.all_passed:
        sys.exit(1)


@main.command("list-plans", help="List the canned experiment plans.")
def list_plans_cmd():
    for name, desc in list_plans():
        click.echo(f"{name:14s} {desc}")


@main.command("plot", help="Render a CSV data file as a static SVG figure.")
@click.option("--kind", type=click.Choice(["histogram", "curve", "spectrum"]), required=True)
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def plot_cmd(kind, in_path, out_path):
    try:
        emit_plot(in_path, kind, out_path)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {out_path}")


def emit_plot(csv_path, kind, out_path):
    """Render one of the package CSV formats (histogram, curve, spectrum)
    as a self-contained SVG with axes, labels and error bars for curves."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "dexsim"

    if kind == "histogram":
        h = read_histogram_csv(csv_path)
        if len(h.counts) == 0:
            raise ValueError(f"{csv_path}: no histogram rows")
        fig, ax = plt.subplots(figsize=(7, 4))
        y = h.g2 if h.g2 is not None and np.any(np.isfinite(h.g2)) else h.counts
        ax.step(h.tau_centers, y, where="mid", lw=0.8)
        ax.set_xlabel("delay (ns)")
        ax.set_ylabel("g2" if h.g2 is not None else "coincidences")
        ax.set_title(f"{h.start} vs {h.stop}")
    elif kind == "curve":
        c = read_curve_csv(csv_path)
        if len(c.tau) == 0:
            raise ValueError(f"{csv_path}: no curve rows")
        sel = c.defined & np.isfinite(c.c_err)
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.errorbar(c.tau[sel], c.c[sel], yerr=c.c_err[sel], fmt=".", ms=2,
                    lw=0.5, elinewidth=0.4, alpha=0.8)
        ax.axhline(0.0, color="k", lw=0.5)
        ax.set_xlabel("delay (ns)")
        ax.set_ylabel("degree of correlation")
        ax.set_ylim(-1.1, 1.1)
    elif kind == "spectrum":
        energy, i_h, i_v, dop = read_spectrum_csv(csv_path)
        if len(energy) == 0:
            raise ValueError(f"{csv_path}: no spectrum rows")
        fig, (ax1, ax2) = plt.subplots(
            2, 1, figsize=(7, 5), sharex=True, height_ratios=[2, 1]
        )
        ax1.plot(energy, i_h, lw=0.9, label="H")
        ax1.plot(energy, i_v, lw=0.9, label="V")
        ax1.set_ylabel("intensity (1/s/ueV)")
        ax1.legend(frameon=False)
        ax2.plot(energy, dop, lw=0.9, color="C3")
        ax2.axhline(0.0, color="k", lw=0.5)
        ax2.set_ylabel("DOP")
        ax2.set_xlabel("energy offset (ueV)")
        ax2.set_ylim(-1.1, 1.1)
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


if __name__ == "__main__":
    main()
