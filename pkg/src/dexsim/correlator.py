"""Coincidence histograms g2(tau) and polarization degree-of-correlation.

The correlation is all-pairs-in-window: every (start, stop) pair with
tau = t_stop - t_start inside [-window, +window) lands in a uniform bin, the
right convention for CW streams at multi-ns delays (a start-stop option is
available for comparison).  Normalization divides by the accidental-pair
expectation n_start * n_stop * bin_width / span so uncorrelated light gives
g2 = 1, with per-bin Poisson errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class CorrelationPair:
    """Start/stop channel ids plus the +-window (ns) and bin width (ns)."""

    start: str
    stop: str
    window: float
    bin_width: float

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ValueError("bin_width must be > 0")
        if not self.window > self.bin_width:
            raise ValueError("window must exceed the bin width")

    @property
    def n_bins(self):
        return int(round(2.0 * self.window / self.bin_width))

    @property
    def bin_edges(self):
        return -self.window + self.bin_width * np.arange(self.n_bins + 1)


@dataclass
class CorrelationHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    n_start: int
    n_stop: int
    span: float
    start: str = ""
    stop: str = ""
    g2: np.ndarray | None = None
    g2_err: np.ndarray | None = None
    empty_input: bool = False

    @property
    def tau_centers(self):
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def bin_width(self):
        return float(self.bin_edges[1] - self.bin_edges[0])


def _times_and_span(stream):
    """Accepts a DetectionStream, an EventStream or a bare sorted array."""
    span = None
    times = getattr(stream, "times", None)
    if times is not None and not callable(times):
        s = getattr(stream, "span", None)
        if s is not None:
            span = float(s[1] - s[0])
        return np.asarray(times, dtype=float), span
    if hasattr(stream, "records"):
        return np.asarray(stream.records["t"], dtype=float), float(stream.duration)
    return np.asarray(stream, dtype=float), None


def _bin_pairs(a, b, window, bin_width, n_bins, chunk=1_000_000):
    """Histogram of t_b - t_a over all pairs within the window (chunked)."""
    counts = np.zeros(n_bins, dtype=np.int64)
    for lo_i in range(0, len(a), chunk):
        a_chunk = a[lo_i : lo_i + chunk]
        lo = np.searchsorted(b, a_chunk - window, side="left")
        hi = np.searchsorted(b, a_chunk + window, side="right")
        per = hi - lo
        total = int(per.sum())
        if total == 0:
            continue
        starts = np.repeat(lo, per)
        base = np.concatenate(([0], np.cumsum(per)[:-1]))
        offsets = np.arange(total) - np.repeat(base, per)
        tau = b[starts + offsets] - np.repeat(a_chunk, per)
        k = np.floor((tau + window) / bin_width).astype(np.int64)
        valid = (k >= 0) & (k < n_bins)
        counts += np.bincount(k[valid], minlength=n_bins)
    return counts


def cross_correlate(a, b, pair: CorrelationPair, span: float | None = None):
    """All-pairs coincidence histogram between two sorted record streams.

    ``span`` is the acquisition duration used for normalization; when omitted
    it is taken from the streams (or from the union time range as a fallback).
    Empty inputs yield a valid all-zero histogram flagged ``empty_input``.
    """
    ta, span_a = _times_and_span(a)
    tb, span_b = _times_and_span(b)
    if span is None:
        spans = [s for s in (span_a, span_b) if s is not None]
        if spans:
            span = min(spans)
        elif len(ta) and len(tb):
            span = float(max(ta[-1], tb[-1]) - min(ta[0], tb[0]))
        else:
            span = 0.0
    n_bins = pair.n_bins
    empty = len(ta) == 0 or len(tb) == 0
    if empty:
        counts = np.zeros(n_bins, dtype=np.int64)
    else:
        counts = _bin_pairs(ta, tb, pair.window, pair.bin_width, n_bins)
    return CorrelationHistogram(
        bin_edges=pair.bin_edges,
        counts=counts,
        n_start=len(ta),
        n_stop=len(tb),
        span=float(span),
        start=pair.start,
        stop=pair.stop,
        empty_input=empty,
    )


def cross_correlate_brute(a, b, pair: CorrelationPair, span: float | None = None):
    """O(n^2) reference implementation, for small streams (exact oracle)."""
    ta, _ = _times_and_span(a)
    tb, _ = _times_and_span(b)
    h = cross_correlate(a, b, pair, span=span)
    n_bins = pair.n_bins
    counts = np.zeros(n_bins, dtype=np.int64)
    if len(ta) and len(tb):
        tau = (tb[None, :] - ta[:, None]).ravel()
        k = np.floor((tau + pair.window) / pair.bin_width).astype(np.int64)
        valid = (k >= 0) & (k < n_bins)
        counts = np.bincount(k[valid], minlength=n_bins)
    return replace(h, counts=counts)


def start_stop_correlate(a, b, pair: CorrelationPair, span: float | None = None):
    """Classic start-stop histogram: each start pairs only with the next stop."""
    ta, span_a = _times_and_span(a)
    tb, span_b = _times_and_span(b)
    n_bins = pair.n_bins
    counts = np.zeros(n_bins, dtype=np.int64)
    if len(ta) and len(tb):
        nxt = np.searchsorted(tb, ta, side="left")
        ok = nxt < len(tb)
        tau = tb[nxt[ok]] - ta[ok]
        k = np.floor((tau + pair.window) / pair.bin_width).astype(np.int64)
        valid = (k >= 0) & (k < n_bins)
        counts = np.bincount(k[valid], minlength=n_bins)
    spans = [s for s in (span_a, span_b) if s is not None]
    return CorrelationHistogram(
        bin_edges=pair.bin_edges,
        counts=counts,
        n_start=len(ta),
        n_stop=len(tb),
        span=float(min(spans)) if spans else 0.0,
        start=pair.start,
        stop=pair.stop,
        empty_input=len(ta) == 0 or len(tb) == 0,
    )


def merge_histograms(*hists: CorrelationHistogram) -> CorrelationHistogram:
    """Exact associative merge: counts and singles add, binning must match."""
    first = hists[0]
    for h in hists[1:]:
        if not np.array_equal(h.bin_edges, first.bin_edges):
            raise ValueError("histogram binning mismatch")
        if h.span != first.span:
            raise ValueError("histogram span mismatch")
    return CorrelationHistogram(
        bin_edges=first.bin_edges.copy(),
        counts=sum(h.counts for h in hists),
        n_start=sum(h.n_start for h in hists),
        n_stop=sum(h.n_stop for h in hists),
        span=first.span,
        start="+".join(h.start for h in hists),
        stop="+".join(h.stop for h in hists),
        empty_input=all(h.empty_input for h in hists),
    )


def normalize(h: CorrelationHistogram) -> CorrelationHistogram:
    """Fill g2 and its Poisson standard error; uncorrelated light gives 1.

    Requires nonzero singles on both channels and a positive span.
    """
    if h.n_start <= 0 or h.n_stop <= 0:
        raise ValueError("cannot normalize: zero singles counts")
    if not h.span > 0:
        raise ValueError("cannot normalize: span must be > 0")
    scale = h.span / (h.n_start * h.n_stop * h.bin_width)
    g2 = h.counts * scale
    with np.errstate(divide="ignore"):
        err = np.where(h.counts > 0, g2 / np.sqrt(np.maximum(h.counts, 1)), np.inf)
    return replace(h, g2=g2, g2_err=err)


@dataclass
class CorrelationCurve:
    """Degree-of-correlation curve C(tau) with propagated errors.

    ``defined`` flags bins where the denominator g2_co + g2_cross is nonzero.
    """

    tau: np.ndarray
    c: np.ndarray
    c_err: np.ndarray
    defined: np.ndarray
    meta: dict = field(default_factory=dict)


def degree_of_correlation(h_co: CorrelationHistogram, h_cross: CorrelationHistogram):
    """C(tau) = (g2_co - g2_cross) / (g2_co + g2_cross), bin by bin.

    Errors follow from first-order propagation of the per-bin Poisson errors;
    bins with a zero denominator are flagged undefined (NaN).
    """
    if not np.array_equal(h_co.bin_edges, h_cross.bin_edges):
        raise ValueError("binning mismatch between co and cross histograms")
    if h_co.g2 is None:
        h_co = normalize(h_co)
    if h_cross.g2 is None:
        h_cross = normalize(h_cross)
    g_co, g_cr = h_co.g2, h_cross.g2
    den = g_co + g_cr
    defined = den > 0
    c = np.full_like(den, np.nan)
    err = np.full_like(den, np.nan)
    np.divide(g_co - g_cr, den, out=c, where=defined)
    with np.errstate(invalid="ignore"):
        num = np.sqrt((g_cr * h_co.g2_err) ** 2 + (g_co * h_cross.g2_err) ** 2)
        np.divide(2.0 * num, den**2, out=err, where=defined)
    return CorrelationCurve(
        tau=h_co.tau_centers,
        c=c,
        c_err=err,
        defined=defined,
        meta={
            "co": (h_co.start, h_co.stop),
            "cross": (h_cross.start, h_cross.stop),
            "bin_width": h_co.bin_width,
            "span": h_co.span,
        },
    )


def windowed_degree(h_co, h_cross, t_lo, t_hi):
    """Single C value over a tau window, from summed counts (Poisson errors)."""
    centers = h_co.tau_centers
    sel = (centers >= t_lo) & (centers < t_hi)
    n_co = int(h_co.counts[sel].sum())
    n_cr = int(h_cross.counts[sel].sum())
    if n_co + n_cr == 0:
        return math.nan, math.inf
    c = (n_co - n_cr) / (n_co + n_cr)
    err = 2.0 * math.sqrt(n_co * n_cr * (n_co + n_cr)) / (n_co + n_cr) ** 2
    return c, err


# ---------------------------------------------------------------------------
# CSV formats


def write_histogram_csv(h: CorrelationHistogram, path, extra_meta=None):
    """Histogram CSV: '#'-prefixed metadata then tau_center_ns,counts,g2,g2_err."""
    lines = [
        f"# start_channel: {h.start}",
        f"# stop_channel: {h.stop}",
        f"# bin_width_ns: {h.bin_width:.9g}",
        f"# window_ns: {abs(h.bin_edges[0]):.9g}",
        f"# span_ns: {h.span:.9g}",
        f"# singles_start: {h.n_start}",
        f"# singles_stop: {h.n_stop}",
    ]
    for key, val in (extra_meta or {}).items():
        lines.append(f"# {key}: {val}")
    lines.append("tau_center_ns,counts,g2,g2_err")
    g2 = h.g2 if h.g2 is not None else np.full(len(h.counts), np.nan)
    err = h.g2_err if h.g2_err is not None else np.full(len(h.counts), np.nan)
    for tau, n, g, e in zip(h.tau_centers, h.counts, g2, err):
        lines.append(f"{tau:.9g},{int(n)},{g:.9g},{e:.9g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_histogram_csv(path) -> CorrelationHistogram:
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
            elif not line.startswith("tau_center_ns"):
                rows.append(line.split(","))
    data = np.array(rows, dtype=float)
    width = float(meta["bin_width_ns"])
    centers = data[:, 0]
    edges = np.concatenate((centers - width / 2, [centers[-1] + width / 2]))
    return CorrelationHistogram(
        bin_edges=edges,
        counts=data[:, 1].astype(np.int64),
        n_start=int(meta.get("singles_start", 0)),
        n_stop=int(meta.get("singles_stop", 0)),
        span=float(meta.get("span_ns", 0.0)),
        start=meta.get("start_channel", ""),
        stop=meta.get("stop_channel", ""),
        g2=data[:, 2],
        g2_err=data[:, 3],
    )


def write_curve_csv(curve: CorrelationCurve, path, extra_meta=None):
    """Degree-of-correlation CSV: metadata then tau_center_ns,C,C_err,defined."""
    lines = []
    for key, val in {**curve.meta, **(extra_meta or {})}.items():
        lines.append(f"# {key}: {val}")
    lines.append("tau_center_ns,C,C_err,defined")
    for tau, c, e, d in zip(curve.tau, curve.c, curve.c_err, curve.defined):
        lines.append(f"{tau:.9g},{c:.9g},{e:.9g},{int(d)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_curve_csv(path) -> CorrelationCurve:
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
            elif not line.startswith("tau_center_ns"):
                rows.append(line.split(","))
    data = np.array(rows, dtype=float)
    return CorrelationCurve(
        tau=data[:, 0],
        c=data[:, 1],
        c_err=data[:, 2],
        defined=data[:, 3] > 0,
        meta=meta,
    )
