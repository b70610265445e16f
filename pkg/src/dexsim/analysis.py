"""Polarized spectra with degree of polarization, quantum-beat fitting and
the period-to-splitting conversion.

The beat fitter does weighted nonlinear least squares of

    offset + amplitude * exp(-tau/damping_time) * cos(2*pi*tau/period + phase)

seeding itself from a discrete frequency scan when no initial guess is given,
and reports parameter errors from the local quadratic model.  A period whose
relative error exceeds 50% is flagged unconstrained and yields no splitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .constants import FWHM_TO_SIGMA, PLANCK_UEV_NS
from .correlator import CorrelationCurve
from .scheme import LevelScheme, line_emission_rates


# ---------------------------------------------------------------------------
# Spectrum synthesis


@dataclass(frozen=True)
class SpectrumLine:
    """One spectral component: center (ueV offset) and H/V intensities (1/s)."""

    center: float
    intensity_h: float
    intensity_v: float
    label: str


@dataclass
class SpectrumResult:
    lines: list[SpectrumLine]
    energy: np.ndarray
    i_h: np.ndarray
    i_v: np.ndarray
    dop: np.ndarray
    resolution: float

    def line_total(self, label_prefix: str) -> float:
        """Summed H+V intensity of every component whose label starts so."""
        return sum(
            ln.intensity_h + ln.intensity_v
            for ln in self.lines
            if ln.label.startswith(label_prefix)
        )


def _line_components(scheme: LevelScheme, totals: dict[str, float]) -> list[SpectrumLine]:
    comps = []
    for ln in scheme.lines:
        total = totals.get(ln.line_id, 0.0)
        if ln.split > 0:
            # rectilinear doublet: H component on one branch, V on the other
            comps.append(SpectrumLine(ln.energy_h, total / 2.0, 0.0, f"{ln.line_id}:H"))
            comps.append(SpectrumLine(ln.energy_v, 0.0, total / 2.0, f"{ln.line_id}:V"))
        else:
            # circular or unpolarized lines project 1/2 onto either basis
            comps.append(SpectrumLine(ln.center, total / 2.0, total / 2.0, ln.line_id))
    return comps


def _event_components(scheme: LevelScheme, events) -> list[SpectrumLine]:
    to_per_s = 1.0 / (events.duration * 1e-9)
    records = events.records
    comps = []
    for ln in scheme.lines:
        sel = records["line"] == ln.index
        pols = records["pol"][sel]
        if ln.split > 0:
            n_h = int(np.count_nonzero(pols == 0))
            n_v = int(np.count_nonzero(pols == 1))
            comps.append(SpectrumLine(ln.energy_h, n_h * to_per_s, 0.0, f"{ln.line_id}:H"))
            comps.append(SpectrumLine(ln.energy_v, 0.0, n_v * to_per_s, f"{ln.line_id}:V"))
        else:
            n = int(sel.sum())
            half = 0.5 * n * to_per_s
            comps.append(SpectrumLine(ln.center, half, half, ln.line_id))
    return comps


def synth_spectrum(
    scheme: LevelScheme,
    events=None,
    resolution: float = 25.0,
    grid_step: float | None = None,
    pad: float = 200.0,
) -> SpectrumResult:
    """Polarized spectrum with Gaussian instrumental broadening.

    With ``events`` (an EventStream) the line intensities are counted from
    the photon record; without, they come from the analytic steady-state
    emission rates.  ``resolution`` is the instrument FWHM in ueV.  The
    returned DOP(E) = (I_H - I_V)/(I_H + I_V) is NaN where intensity is
    negligible.
    """
    if not resolution > 0:
        raise ValueError("resolution must be > 0")
    if events is None:
        rates_per_s = {k: v * 1e9 for k, v in line_emission_rates(scheme).items()}
        comps = _line_components(scheme, rates_per_s)
    else:
        comps = _event_components(scheme, events)

    sigma = resolution * FWHM_TO_SIGMA
    step = grid_step if grid_step is not None else resolution / 8.0
    centers = [c.center for c in comps] or [0.0]
    lo, hi = min(centers) - pad, max(centers) + pad
    energy = np.arange(lo, hi + step, step)
    i_h = np.zeros_like(energy)
    i_v = np.zeros_like(energy)
    norm = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    for c in comps:
        kernel = norm * np.exp(-0.5 * ((energy - c.center) / sigma) ** 2)
        i_h += c.intensity_h * kernel
        i_v += c.intensity_v * kernel
    total = i_h + i_v
    dop = np.full_like(energy, np.nan)
    significant = total > 1e-9 * max(total.max(), 1e-300)
    np.divide(i_h - i_v, total, out=dop, where=significant)
    return SpectrumResult(
        lines=comps, energy=energy, i_h=i_h, i_v=i_v, dop=dop, resolution=resolution
    )


def write_spectrum_csv(result: SpectrumResult, path, extra_meta=None):
    """Spectrum CSV: '#' metadata then energy_ueV,I_H,I_V,DOP."""
    lines = [f"# resolution_ueV: {result.resolution:.9g}"]
    for c in result.lines:
        lines.append(
            f"# line: {c.label} center_ueV={c.center:.9g} "
            f"I_H={c.intensity_h:.9g} I_V={c.intensity_v:.9g}"
        )
    for key, val in (extra_meta or {}).items():
        lines.append(f"# {key}: {val}")
    lines.append("energy_ueV,I_H,I_V,DOP")
    for e, h, v, d in zip(result.energy, result.i_h, result.i_v, result.dop):
        lines.append(f"{e:.9g},{h:.9g},{v:.9g},{d:.9g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_spectrum_csv(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#") and not line.startswith("energy_ueV"):
                rows.append(line.split(","))
    data = np.array(rows, dtype=float)
    return data[:, 0], data[:, 1], data[:, 2], data[:, 3]


# ---------------------------------------------------------------------------
# Damped-cosine beat fit


class FitError(RuntimeError):
    pass


class InsufficientSpanError(FitError):
    pass


@dataclass
class BeatFit:
    """Damped-cosine fit result.

    Parameter order everywhere: (period, damping_time, amplitude, phase,
    offset); ``covariance`` follows it.  ``fss`` is h/period in ueV, withheld
    (NaN) when the period is unconstrained.
    """

    period: float
    damping_time: float
    amplitude: float
    phase: float
    offset: float
    covariance: np.ndarray
    fss: float
    fss_err: float
    chi2_red: float
    n_points: int
    converged: bool
    period_unconstrained: bool
    meta: dict = field(default_factory=dict)

    @property
    def period_err(self):
        return float(np.sqrt(self.covariance[0, 0]))

    @property
    def damping_time_err(self):
        return float(np.sqrt(self.covariance[1, 1]))

    @property
    def amplitude_err(self):
        return float(np.sqrt(self.covariance[2, 2]))

    @property
    def phase_err(self):
        return float(np.sqrt(self.covariance[3, 3]))

    @property
    def offset_err(self):
        return float(np.sqrt(self.covariance[4, 4]))

    def params(self):
        return np.array(
            [self.period, self.damping_time, self.amplitude, self.phase, self.offset]
        )


def model_damped_cosine(tau, period, damping_time, amplitude, phase, offset):
    """offset + amplitude * exp(-tau/damping_time) * cos(2 pi tau/period + phase)"""
    tau = np.asarray(tau, dtype=float)
    return offset + amplitude * np.exp(-tau / damping_time) * np.cos(
        2.0 * np.pi * tau / period + phase
    )


def _seed_scan(tau, values, weights, offset, n_candidates=64):
    """Discrete frequency scan: weighted cosine/sine projection power over
    log-spaced candidate periods; returns (best period, phase at best)."""
    dt = np.median(np.diff(np.sort(tau)))
    span = tau.max() - tau.min()
    lo = max(4.0 * dt, 1e-12)
    hi = max(span / 1.5, lo * 1.01)
    periods = np.geomspace(lo, hi, n_candidates)
    y = (values - offset) * weights
    best_power, best_period, best_phase = -1.0, periods[0], 0.0
    for p in periods:
        arg = 2.0 * np.pi * tau / p
        cterm = float(np.sum(y * np.cos(arg)))
        sterm = float(np.sum(y * np.sin(arg)))
        power = cterm * cterm + sterm * sterm
        if power > best_power:
            best_power, best_period = power, p
            best_phase = math.atan2(-sterm, cterm)
    return best_period, best_phase


def fit_damped_cosine(curve, values=None, errors=None, init: BeatFit | None = None) -> BeatFit:
    """Weighted least-squares fit of a damped cosine to C(tau).

    Accepts a CorrelationCurve or plain arrays (tau, values[, errors]).
    Bins flagged undefined or with non-finite values/errors are excluded.
    Needs at least 10 usable bins spanning at least 1.5 seed periods.
    """
    if isinstance(curve, CorrelationCurve):
        tau = np.asarray(curve.tau, dtype=float)
        vals = np.asarray(curve.c, dtype=float)
        errs = np.asarray(curve.c_err, dtype=float)
        usable = curve.defined.copy()
    else:
        tau = np.asarray(curve, dtype=float)
        vals = np.asarray(values, dtype=float)
        errs = (
            np.asarray(errors, dtype=float)
            if errors is not None
            else np.ones_like(vals)
        )
        usable = np.ones(len(tau), dtype=bool)

    usable &= np.isfinite(vals) & np.isfinite(errs) & (errs > 0)
    tau, vals, errs = tau[usable], vals[usable], errs[usable]
    if len(tau) < 10:
        raise InsufficientSpanError(f"only {len(tau)} usable bins, need >= 10")
    weights = 1.0 / errs

    if init is not None:
        p0 = [init.period, init.damping_time, init.amplitude, init.phase, init.offset]
    else:
        offset0 = float(np.average(vals, weights=weights**2))
        period0, phase0 = _seed_scan(tau, vals, weights, offset0)
        amp0 = max(float(np.max(np.abs(vals - offset0))) * 0.8, 1e-6)
        damp0 = max(float(tau.max() - tau.min()), 1e-3)
        p0 = [period0, damp0, amp0, phase0, offset0]

    span = float(tau.max() - tau.min())
    if span < 1.5 * p0[0]:
        raise InsufficientSpanError(
            f"window spans {span:.4g} ns < 1.5 seed periods ({1.5 * p0[0]:.4g} ns)"
        )

    dt = float(np.median(np.diff(np.sort(tau)))) if len(tau) > 1 else span
    vrange = max(float(vals.max() - vals.min()), 1e-9)
    lower = [2.0 * dt, dt / 10.0, 0.0, -2.0 * math.pi, float(vals.min()) - vrange]
    upper = [4.0 * span, 1e6, 4.0 * vrange + 1.0, 2.0 * math.pi, float(vals.max()) + vrange]
    p0 = [min(max(v, lo), hi) for v, lo, hi in zip(p0, lower, upper)]

    def residuals(p):
        return (model_damped_cosine(tau, *p) - vals) * weights

    res = least_squares(
        residuals, p0, bounds=(lower, upper), x_scale="jac", max_nfev=5000
    )
    period, damping, amplitude, phase, offset = res.x
    phase = math.remainder(phase, 2.0 * math.pi)  # wrap into (-pi, pi]

    jtj = res.jac.T @ res.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj)
    dof = max(len(tau) - 5, 1)
    chi2_red = 2.0 * res.cost / dof
    if errors is None and not isinstance(curve, CorrelationCurve):
        cov = cov * chi2_red  # unit weights: scale errors by the residual variance

    period_err = float(np.sqrt(abs(cov[0, 0])))
    unconstrained = (not np.isfinite(period_err)) or period_err / period > 0.5
    if unconstrained:
        fss, fss_err = math.nan, math.nan
    else:
        fss, fss_err = fss_from_period(float(period), period_err)

    return BeatFit(
        period=float(period),
        damping_time=float(damping),
        amplitude=float(amplitude),
        phase=float(phase),
        offset=float(offset),
        covariance=cov,
        fss=fss,
        fss_err=fss_err,
        chi2_red=float(chi2_red),
        n_points=len(tau),
        converged=res.status > 0,
        period_unconstrained=bool(unconstrained),
        meta={"tau_min": float(tau.min()), "tau_max": float(tau.max())},
    )


def fss_from_period(period: float, period_err: float = 0.0):
    """Fine-structure splitting (ueV) from a beat period (ns): fss = h/period."""
    if not period > 0:
        raise ValueError("period must be > 0")
    if math.isinf(period):
        return 0.0, 0.0
    fss = PLANCK_UEV_NS / period
    return fss, fss * period_err / period


def write_fit_report(fit: BeatFit, path, extra_meta=None):
    """Fit report: YAML document with parameters, errors, covariance, chi2."""
    import yaml

    doc = {
        "model": "offset + amplitude * exp(-tau/damping_time) * cos(2*pi*tau/period + phase)",
        "parameter_order": ["period", "damping_time", "amplitude", "phase", "offset"],
        "parameters": {
            "period_ns": float(fit.period),
            "damping_time_ns": float(fit.damping_time),
            "amplitude": float(fit.amplitude),
            "phase_rad": float(fit.phase),
            "offset": float(fit.offset),
        },
        "errors": {
            "period_ns": float(fit.period_err),
            "damping_time_ns": float(fit.damping_time_err),
            "amplitude": float(fit.amplitude_err),
            "phase_rad": float(fit.phase_err),
            "offset": float(fit.offset_err),
        },
        "fss_ueV": None if math.isnan(fit.fss) else float(fit.fss),
        "fss_err_ueV": None if math.isnan(fit.fss_err) else float(fit.fss_err),
        "reduced_chi_square": float(fit.chi2_red),
        "n_points": fit.n_points,
        "converged": fit.converged,
        "period_unconstrained": fit.period_unconstrained,
        "covariance": [[float(x) for x in row] for row in fit.covariance],
    }
    if extra_meta:
        doc["meta"] = dict(extra_meta)
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)
