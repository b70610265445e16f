"""Detector channel effects: timing jitter, dead time and dark counts.

Correlating a jittered channel against the ideal photon times turns the
delta-like self-coincidence peak into a Gaussian of width sigma (and
sqrt(2) sigma when both channels jitter).  Dead time carves a hard hole
into an autocorrelation; dark counts add a flat uncorrelated floor.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from dexsim import CorrelationPair, DetectorChannel, apply_detector, cross_correlate
from dexsim.detection import SPCM_JITTER_SIGMA, SSPD_JITTER_SIGMA
from dexsim.trajectory import EVENT_DTYPE, EventStream

OUT = "demo_output"
os.makedirs(OUT, exist_ok=True)

rng = np.random.default_rng(5)
duration = 1e6
times = np.sort(rng.uniform(0, duration, 20_000))
rec = np.zeros(len(times), dtype=EVENT_DTYPE)
rec["t"] = times
rec["pol"] = 4
events = EventStream(rec, ("src",), duration)

fig, axes = plt.subplots(1, 3, figsize=(11, 3.4))

# jitter: single-photon-counter vs nanowire timing
pair = CorrelationPair("ideal", "jittered", window=1.5, bin_width=0.01)
for sigma, label in ((SPCM_JITTER_SIGMA, "250 ps FWHM module"),
                     (SSPD_JITTER_SIGMA, "90 ps FWHM nanowire")):
    ch = DetectorChannel("jit", jitter_sigma=sigma)
    out = apply_detector(events, ch, np.random.default_rng(11))
    h = cross_correlate(times, out.times, pair)
    axes[0].plot(h.tau_centers, h.counts, lw=0.8,
                 label=f"{label} (sigma {sigma * 1e3:.0f} ps)")
axes[0].set_xlabel("delay (ns)")
axes[0].set_ylabel("coincidences")
axes[0].set_title("timing jitter")
axes[0].legend(frameon=False, fontsize=7)

# dead time hole in the autocorrelation
dense = np.sort(rng.uniform(0, 2e4, 40_000))  # 2 photons/ns
rec2 = np.zeros(len(dense), dtype=EVENT_DTYPE)
rec2["t"] = dense
rec2["pol"] = 4
ev2 = EventStream(rec2, ("src",), 2e4)
for dead, style in ((0.0, "-"), (5.0, "--")):
    ch = DetectorChannel("d", dead_time=dead, efficiency=0.5)
    out = apply_detector(ev2, ch, np.random.default_rng(13))
    h = cross_correlate(out.times, out.times, CorrelationPair("d", "d", 20.0, 0.5))
    axes[1].plot(h.tau_centers, h.counts, style, lw=0.9, label=f"dead time {dead:.0f} ns")
axes[1].set_xlabel("delay (ns)")
axes[1].set_title("dead time")
axes[1].legend(frameon=False, fontsize=7)

# dark counts raise the uncorrelated floor (rate exaggerated well beyond the
# realistic 100/s preset so the effect is visible on this short acquisition)
sparse = np.sort(rng.uniform(0, duration, 500))
rec3 = np.zeros(len(sparse), dtype=EVENT_DTYPE)
rec3["t"] = sparse
rec3["pol"] = 4
ev3 = EventStream(rec3, ("src",), duration)
for label, dark in (("signal", 0.0), ("signal+dark", 1e-3)):
    ch = DetectorChannel("d", dark_rate=dark)
    out = apply_detector(ev3, ch, np.random.default_rng(17))
    rate = len(out) / duration
    axes[2].bar(label, rate * 1e3)
    print(f"dark rate {dark * 1e9:8.0f} /s -> channel rate {rate * 1e9:8.0f} /s")
axes[2].set_ylabel("click rate (1/us)")
axes[2].set_title("dark counts")

fig.tight_layout()
fig.savefig(f"{OUT}/05_detector_effects.svg")
print(f"wrote {OUT}/05_detector_effects.svg")
