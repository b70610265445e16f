"""Detector channel model: spectral filtering, polarization analysis,
efficiency, Gaussian timing jitter, dead time and dark counts.

Channels are pure stream transforms with their own RNG substream, so several
channels can look at the same photon stream independently.  Timing figures
are quoted as Gaussian FWHM; the shipped presets convert the 250 ps (SPCM)
and 90 ps (SSPD) figures to sigma = 0.106 ns and 0.038 ns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import ANALYZERS, FWHM_TO_SIGMA, POL_CODES

SPCM_JITTER_SIGMA = 0.250 * FWHM_TO_SIGMA  # ns, from the 250 ps FWHM figure
SSPD_JITTER_SIGMA = 0.090 * FWHM_TO_SIGMA  # ns, from the 90 ps FWHM figure
SPECTRAL_RESOLUTION = 25.0  # ueV monochromator FWHM

_ANALYZER_INDEX = {a: i for i, a in enumerate(ANALYZERS)}
_ANALYZER_INDEX["none"] = _ANALYZER_INDEX[None]

# pass probability, rows = emission pol (H,V,R,L,unpolarized),
# columns = analyzer (H,V,D,A,R,L,none)
_PASS = np.array(
    [
        [1.0, 0.0, 0.5, 0.5, 0.5, 0.5, 1.0],
        [0.0, 1.0, 0.5, 0.5, 0.5, 0.5, 1.0],
        [0.5, 0.5, 0.5, 0.5, 1.0, 0.0, 1.0],
        [0.5, 0.5, 0.5, 0.5, 0.0, 1.0, 1.0],
        [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 1.0],
    ]
)


def project_polarization(pol, analyzer) -> float:
    """Probability that a photon of the given polarization passes the analyzer.

    ``pol`` is one of H, V, R, L, unpolarized (name or code); ``analyzer``
    one of H, V, D, A, R, L or None (no analyzer).  Mutually unbiased bases
    pass with probability 1/2.
    """
    p = POL_CODES[pol] if isinstance(pol, str) else int(pol)
    try:
        a = _ANALYZER_INDEX[analyzer]
    except KeyError:
        raise ValueError(f"unknown analyzer {analyzer!r}") from None
    return float(_PASS[p, a])


@dataclass(frozen=True)
class DetectorChannel:
    """One detection channel behind the monochromator.

    ``line_filter`` lists the spectral line ids the monochromator passes
    (None = everything); efficiency in [0, 1]; jitter_sigma, dead_time in ns;
    dark_rate in 1/ns.
    """

    id: str
    line_filter: tuple[str, ...] | None = None
    analyzer: str | None = None
    efficiency: float = 1.0
    jitter_sigma: float = 0.0
    dead_time: float = 0.0
    dark_rate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must be in [0, 1]")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")
        if self.dead_time < 0:
            raise ValueError("dead_time must be >= 0")
        if self.dark_rate < 0:
            raise ValueError("dark_rate must be >= 0")
        if self.analyzer not in _ANALYZER_INDEX:
            raise ValueError(f"unknown analyzer {self.analyzer!r}")
        if self.line_filter is not None and not isinstance(self.line_filter, tuple):
            object.__setattr__(self, "line_filter", tuple(self.line_filter))


def spcm_channel(id, line_filter=None, analyzer=None, **kw):
    """Silicon SPCM preset: 0.106 ns jitter sigma, 50 ns dead time."""
    kw.setdefault("jitter_sigma", SPCM_JITTER_SIGMA)
    kw.setdefault("dead_time", 50.0)
    return DetectorChannel(id=id, line_filter=line_filter, analyzer=analyzer, **kw)


def sspd_channel(id, line_filter=None, analyzer=None, **kw):
    """Superconducting nanowire preset: 0.038 ns jitter sigma, 20 ns dead time."""
    kw.setdefault("jitter_sigma", SSPD_JITTER_SIGMA)
    kw.setdefault("dead_time", 20.0)
    return DetectorChannel(id=id, line_filter=line_filter, analyzer=analyzer, **kw)


@dataclass
class DetectionStream:
    """Sorted detected timestamps of one channel over ``span`` = (t0, t1) ns."""

    times: np.ndarray
    channel: str
    span: tuple[float, float]

    def __len__(self):
        return len(self.times)


def _apply_dead_time(times, dead_time):
    if dead_time <= 0 or len(times) == 0:
        return times
    keep = np.empty(len(times), dtype=bool)
    last = -np.inf
    for i, t in enumerate(times):
        if t - last >= dead_time:
            keep[i] = True
            last = t
        else:
            keep[i] = False
    return times[keep]


def apply_detector(events, ch: DetectorChannel, rng) -> DetectionStream:
    """Turn ideal photon events into detector clicks.

    Pipeline: line filter -> analyzer projection and quantum efficiency
    (one Bernoulli draw at the product probability) -> Gaussian jitter and
    re-sort -> dead-time removal -> superposed Poisson dark counts over the
    stream span.  ``events`` is an EventStream; ``rng`` a numpy Generator.
    """
    records = events.records
    span = (0.0, float(events.duration))
    if ch.line_filter is not None:
        unknown = [l for l in ch.line_filter if l not in events.line_ids]
        if unknown:
            raise ValueError(
                f"channel {ch.id!r}: unknown line id(s) {unknown}; "
                f"stream carries {list(events.line_ids)}"
            )
        codes = np.array([events.line_ids.index(l) for l in ch.line_filter], dtype=np.uint32)
        mask = np.isin(records["line"], codes)
        records = records[mask]
    times = records["t"].astype(float)
    if len(times):
        p_pass = _PASS[records["pol"], _ANALYZER_INDEX[ch.analyzer]] * ch.efficiency
        keep = rng.random(len(times)) < p_pass
        times = times[keep]
    if ch.jitter_sigma > 0 and len(times):
        times = times + rng.normal(0.0, ch.jitter_sigma, len(times))
        times = np.sort(times)
    times = _apply_dead_time(times, ch.dead_time)
    if ch.dark_rate > 0:
        n_dark = rng.poisson(ch.dark_rate * (span[1] - span[0]))
        if n_dark:
            darks = rng.uniform(span[0], span[1], n_dark)
            times = np.sort(np.concatenate((times, darks)))
    return DetectionStream(times=np.ascontiguousarray(times), channel=ch.id, span=span)


def detection_rngs(seed, channels):
    """Per-channel RNG substreams: channel i uses spawn key (10000 + i,)."""
    return [
        np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(10_000 + i,)))
        for i in range(len(channels))
    ]


def apply_detectors(events, channels, seed) -> dict[str, DetectionStream]:
    """Run every channel over the same events with independent substreams."""
    out = {}
    for ch, rng in zip(channels, detection_rngs(seed, channels)):
        out[ch.id] = apply_detector(events, ch, rng)
    return out
