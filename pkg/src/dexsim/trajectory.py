"""Continuous-time Monte Carlo walk over a level scheme under CW excitation.

The walker performs standard Gillespie steps (exponential dwell, rate-weighted
branch choice) and carries two pieces of context beyond the current state:

* a rectilinear eigenstate memory implementing the co/cross polarized cascade
  selection rules (imperfect with probability 1 - cascade_fidelity), erased
  whenever the walk leaves the neutral-exciton doublet family;
* the heralded pseudo-spin.  A circular-spin-correlated emission with no live
  spin context heralds it (helicity drawn 50/50 sets the spin along +-z); the
  context then precesses and dephases through every subsequent dwell until a
  circular-spin-correlated readout decay draws the photon helicity from it,
  so the readout phase tracks the total delay since the herald.

Everything is deterministic given the seed; trajectories use per-index RNG
substreams so ensembles merge identically for any worker count.
"""

from __future__ import annotations

import math
import random
import warnings
from array import array
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .constants import PLANCK_UEV_NS
from .scheme import LevelScheme, validate

EVENT_DTYPE = np.dtype([("t", "<f8"), ("line", "<u4"), ("pol", "u1"), ("trajectory", "<u4")])

# walker context list layout
_STATE, _SPIN_ACTIVE, _SY, _SZ, _LINMEM, _N_HERALDS = range(6)

# polarization rule codes used by the compiled tables
_RULE_NONE, _RULE_CO, _RULE_CROSS, _RULE_CIRC, _RULE_UNPOL = range(5)
_RULE_CODES = {
    "none": _RULE_NONE,
    "rectilinear-co": _RULE_CO,
    "rectilinear-cross": _RULE_CROSS,
    "circular-spin-correlated": _RULE_CIRC,
    "unpolarized": _RULE_UNPOL,
}


class AbsorbingStateError(RuntimeError):
    """The walker reached a state with no outgoing transitions."""


@dataclass
class EngineConfig:
    """Inputs of a simulation run.

    ``duration`` is per trajectory (ns); ``record_lines`` optionally restricts
    the recorded photon stream to a set of spectral line ids (all radiative
    lines when None); ``n_trajectories`` sizes ensembles.
    """

    duration: float
    seed: int
    scheme: LevelScheme
    record_lines: tuple[str, ...] | None = None
    n_trajectories: int = 1

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be > 0")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")


@dataclass
class EventStream:
    """Photon events plus the line-code table needed to interpret them.

    ``records`` is a structured array with fields t (ns), line (code into
    ``line_ids``), pol (code into constants.POL_NAMES) and trajectory.
    Events are time-ordered within each trajectory.
    """

    records: np.ndarray
    line_ids: tuple[str, ...]
    duration: float

    def __len__(self):
        return len(self.records)

    def times(self, line_id=None):
        if line_id is None:
            return self.records["t"]
        code = self.line_ids.index(line_id)
        return self.records["t"][self.records["line"] == code]


@dataclass
class SimulationResult:
    events: EventStream
    occupancy: np.ndarray
    state_ids: tuple[str, ...]
    n_heralds: int
    n_steps: int
    diagnostics: list[str] = field(default_factory=list)

    def occupancy_fractions(self):
        total = self.occupancy.sum()
        return self.occupancy / total if total > 0 else self.occupancy


class SchemeRuntime:
    """Scheme compiled to flat branch tables for the inner loop."""

    __slots__ = (
        "state_ids", "ground_idx", "tables", "omega", "t2_inv",
        "fidelity", "line_ids",
    )

    def __init__(self, scheme: LevelScheme):
        self.state_ids = tuple(s.id for s in scheme.states)
        idx = scheme.state_index
        self.ground_idx = idx[scheme.ground_id]
        self.omega = 2.0 * math.pi * scheme.fss_dark / PLANCK_UEV_NS
        t2 = scheme.spin_dephasing_time
        self.t2_inv = 1.0 / t2 if math.isfinite(t2) and t2 > 0 else 0.0
        self.fidelity = scheme.cascade_fidelity
        self.line_ids = scheme.line_ids

        line_index = {lid: i for i, lid in enumerate(self.line_ids)}
        holds = tuple(s.holds_linear_memory for s in scheme.states)
        grounds = tuple(s.kind == "ground" for s in scheme.states)
        tables = []
        for s in scheme.states:
            arcs = []
            cum = 0.0
            cums = []
            for tr in scheme.transitions:
                if tr.source != s.id:
                    continue
                cum += tr.rate
                cums.append(cum)
                tgt = idx[tr.target]
                arcs.append((
                    tgt,
                    1 if tr.radiative else 0,
                    line_index.get(tr.line_id, 0),
                    _RULE_CODES[tr.polarization],
                    tr.readout_sign,
                    1 if holds[tgt] else 0,
                    1 if grounds[tgt] else 0,
                ))
            if cums:
                cums[-1] = math.inf  # guard against float round-off in the scan
            tables.append((cum, tuple(cums), tuple(arcs)))
        self.tables = tuple(tables)


def new_context(rt: SchemeRuntime) -> list:
    """Fresh walker context: ground state, no spin, no eigenstate memory."""
    return [rt.ground_idx, 0, 0.0, 0.0, 0, 0]


def step(rt: SchemeRuntime, ctx: list, rng) -> tuple[float, int, tuple[int, int] | None]:
    """One Gillespie step.

    Draws the exponential dwell, evolves a live spin context through it,
    picks the outgoing arc with rate-proportional probability and applies the
    arc's polarization rule.  Returns (dwell_ns, next_state_index, emission)
    where emission is None or (line_code, pol_code).  The context list is
    updated in place.
    """
    total, cums, arcs = rt.tables[ctx[_STATE]]
    if total <= 0.0:
        raise AbsorbingStateError(
            f"state {rt.state_ids[ctx[_STATE]]!r} has no outgoing transitions"
        )
    dwell = -math.log(1.0 - rng.random()) / total

    if ctx[_SPIN_ACTIVE]:
        theta = rt.omega * dwell
        damp = math.exp(-dwell * rt.t2_inv)
        c, sn = math.cos(theta), math.sin(theta)
        sy, sz = ctx[_SY], ctx[_SZ]
        ctx[_SY] = damp * (sy * c - sz * sn)
        ctx[_SZ] = damp * (sy * sn + sz * c)

    u = rng.random() * total
    i = 0
    while u > cums[i]:
        i += 1
    tgt, radiative, line_idx, rule, rsign, tgt_holds, tgt_ground = arcs[i]

    emission = None
    if radiative:
        if rule == _RULE_CO:
            m = ctx[_LINMEM]
            if m:
                pol = m - 1 if rng.random() < rt.fidelity else 2 - m
            else:
                pol = 0 if rng.random() < 0.5 else 1
            ctx[_LINMEM] = pol + 1
        elif rule == _RULE_CROSS:
            m = ctx[_LINMEM]
            if m:
                pol = 2 - m if rng.random() < rt.fidelity else m - 1
            else:
                pol = 0 if rng.random() < 0.5 else 1
            ctx[_LINMEM] = 2 - pol
        elif rule == _RULE_CIRC:
            if ctx[_SPIN_ACTIVE]:
                # readout: helicity from the current spin projection
                p_r = 0.5 * (1.0 + rsign * ctx[_SZ])
                pol = 2 if rng.random() < p_r else 3
                ctx[_SPIN_ACTIVE] = 0
            else:
                # herald: 50/50 helicity prepares the spin along +-z
                if rng.random() < 0.5:
                    pol = 2
                    ctx[_SZ] = 1.0
                else:
                    pol = 3
                    ctx[_SZ] = -1.0
                ctx[_SY] = 0.0
                ctx[_SPIN_ACTIVE] = 1
                ctx[_N_HERALDS] += 1
        else:
            pol = 4
        emission = (line_idx, pol)

    if not tgt_holds:
        ctx[_LINMEM] = 0
    if tgt_ground:
        ctx[_SPIN_ACTIVE] = 0
    ctx[_STATE] = tgt
    return dwell, tgt, emission


def _trajectory_rng(seed: int, index: int) -> random.Random:
    """Deterministic per-trajectory substream derived from (seed, index)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    a, b = (int(x) for x in ss.generate_state(2, dtype=np.uint64))
    return random.Random((a << 64) | b)


def _run_single(scheme, duration, seed, index, record_lines):
    rt = SchemeRuntime(scheme)
    rng = _trajectory_rng(seed, index)
    if record_lines is None:
        record_set = frozenset(range(len(rt.line_ids)))
    else:
        record_set = frozenset(rt.line_ids.index(lid) for lid in record_lines)

    t_buf = array("d")
    line_buf = array("I")
    pol_buf = array("B")
    t_append, line_append, pol_append = t_buf.append, line_buf.append, pol_buf.append

    ctx = new_context(rt)
    occupancy = [0.0] * len(rt.state_ids)
    t = 0.0
    n_steps = 0
    diagnostic = None
    while True:
        state = ctx[_STATE]
        try:
            dwell, _, emission = step(rt, ctx, rng)
        except AbsorbingStateError as exc:
            occupancy[state] += duration - t
            diagnostic = f"trajectory {index} terminated at t={t:.6g} ns: {exc}"
            break
        t_next = t + dwell
        if t_next >= duration:
            occupancy[state] += duration - t
            break
        occupancy[state] += dwell
        t = t_next
        n_steps += 1
        if emission is not None and emission[0] in record_set:
            t_append(t)
            line_append(emission[0])
            pol_append(emission[1])

    n = len(t_buf)
    records = np.empty(n, dtype=EVENT_DTYPE)
    records["t"] = np.frombuffer(t_buf, dtype=np.float64, count=n)
    records["line"] = np.frombuffer(line_buf, dtype=np.uint32, count=n)
    records["pol"] = np.frombuffer(pol_buf, dtype=np.uint8, count=n)
    records["trajectory"] = index
    return records, np.asarray(occupancy), ctx[_N_HERALDS], n_steps, diagnostic


def simulate(cfg: EngineConfig, n_workers: int = 1) -> SimulationResult:
    """Run ``cfg.n_trajectories`` independent trajectories and merge them.

    The merged event multiset depends only on (seed, trajectory index), never
    on ``n_workers``.  Occupancies and herald counts are summed.
    """
    problems = validate(cfg.scheme)
    if problems:
        raise ValueError("scheme failed validation:\n  " + "\n  ".join(problems))
    indices = range(cfg.n_trajectories)
    args = [(cfg.scheme, cfg.duration, cfg.seed, i, cfg.record_lines) for i in indices]
    if n_workers > 1 and cfg.n_trajectories > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_run_single_star, args))
    else:
        results = [_run_single(*a) for a in args]

    all_records = np.concatenate([r[0] for r in results]) if results else np.empty(0, EVENT_DTYPE)
    occupancy = np.sum([r[1] for r in results], axis=0)
    diagnostics = [r[4] for r in results if r[4]]
    for msg in diagnostics:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    scheme = cfg.scheme
    return SimulationResult(
        events=EventStream(all_records, scheme.line_ids, cfg.duration),
        occupancy=occupancy,
        state_ids=tuple(s.id for s in scheme.states),
        n_heralds=sum(r[2] for r in results),
        n_steps=sum(r[3] for r in results),
        diagnostics=diagnostics,
    )


def _run_single_star(args):
    return _run_single(*args)


def run_trajectory(cfg: EngineConfig) -> EventStream:
    """Single-trajectory run returning just the photon event stream."""
    single = EngineConfig(
        duration=cfg.duration,
        seed=cfg.seed,
        scheme=cfg.scheme,
        record_lines=cfg.record_lines,
        n_trajectories=1,
    )
    return simulate(single).events


def run_ensemble(cfg: EngineConfig, n_workers: int = 1) -> EventStream:
    """Merged event streams of the configured ensemble (trajectory ids kept)."""
    return simulate(cfg, n_workers=n_workers).events


def concatenate_trajectories(stream: EventStream) -> EventStream:
    """Flatten an ensemble into one CW-like stream by offsetting trajectory i
    by i * duration.  Useful for correlating ensemble output as one record."""
    records = stream.records.copy()
    records["t"] += records["trajectory"] * stream.duration
    order = np.argsort(records["t"], kind="stable")
    records = records[order]
    n_traj = int(records["trajectory"].max()) + 1 if len(records) else 1
    return EventStream(records, stream.line_ids, stream.duration * n_traj)
