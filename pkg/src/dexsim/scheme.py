"""Quantum-dot level scheme: states, transitions, rates and selection rules.

A :class:`LevelScheme` is a validated directed graph of QD states.  Radiative
transitions carry a photon energy (ueV offset from ``reference_energy``) and a
polarization rule; each one defines exactly one spectral line.  Lines whose
rule is rectilinear are doublets split by the bright fine-structure splitting,
with the H component sitting on opposite branches for emission *from* the
exciton doublet versus emission *into* it (cascade mirror ordering).

Schemes are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

STATE_KINDS = (
    "ground",
    "bright-exciton",
    "dark-exciton",
    "excited-exciton",
    "excited-dark-exciton",
    "biexciton-singlet",
    "biexciton-triplet0",
    "biexciton-triplet3",
    "trion-positive",
    "trion-negative",
    "single-electron",
    "single-hole",
)

POLARIZATION_RULES = (
    "none",
    "rectilinear-co",
    "rectilinear-cross",
    "circular-spin-correlated",
    "unpolarized",
)

# Rectilinear eigenstate memory lives on the neutral-exciton doublet; any hop
# into a state outside this family erases it.
_HOLDS_LINEAR_MEMORY = ("bright-exciton", "excited-exciton")


class SchemeError(ValueError):
    """Raised when a scheme config cannot be parsed or violates an invariant."""


@dataclass(frozen=True)
class QDState:
    id: str
    kind: str
    carries_spin: bool = False

    @property
    def holds_linear_memory(self):
        return self.kind in _HOLDS_LINEAR_MEMORY


@dataclass(frozen=True)
class Transition:
    """Directed arc between two states.

    rate is in 1/ns.  photon_energy (ueV offset, radiative arcs only) is the
    line center; readout_sign flips the spin-to-helicity mapping of trion
    radiative decays (+1 and -1 give mutually reversed readout phases).
    """

    source: str
    target: str
    rate: float
    radiative: bool = False
    photon_energy: float | None = None
    polarization: str = "none"
    readout_sign: int = 1

    @property
    def line_id(self):
        return f"{self.source}->{self.target}"


@dataclass(frozen=True)
class SpectralLine:
    """One spectral line (one radiative transition), possibly an FSS doublet.

    ``split`` is the doublet splitting in ueV (0 for unsplit lines) and
    ``h_branch_sign`` tells which energy branch the H-polarized component
    occupies: +1 for center + split/2, -1 for center - split/2.
    """

    index: int
    line_id: str
    center: float
    split: float
    h_branch_sign: int
    polarization: str

    @property
    def energy_h(self):
        return self.center + self.h_branch_sign * self.split / 2.0

    @property
    def energy_v(self):
        return self.center - self.h_branch_sign * self.split / 2.0


@dataclass(frozen=True)
class LevelScheme:
    """Immutable, validated level scheme.

    Energies are ueV offsets from ``reference_energy`` (eV); rates 1/ns;
    times ns.  ``cascade_fidelity`` is the probability that the second photon
    of a rectilinear cascade obeys the ideal co/cross selection rule.
    """

    states: tuple[QDState, ...]
    transitions: tuple[Transition, ...]
    fss_bright: float
    fss_dark: float
    spin_dephasing_time: float
    reference_energy: float
    cascade_fidelity: float = 0.9

    @cached_property
    def state_index(self) -> dict[str, int]:
        return {s.id: i for i, s in enumerate(self.states)}

    @cached_property
    def ground_id(self) -> str:
        for s in self.states:
            if s.kind == "ground":
                return s.id
        raise SchemeError("scheme has no ground state")

    @cached_property
    def lines(self) -> tuple[SpectralLine, ...]:
        """Line table: one entry per radiative transition, in transition order."""
        table = []
        for tr in self.transitions:
            if not tr.radiative:
                continue
            split = 0.0
            h_sign = 1
            if tr.polarization in ("rectilinear-co", "rectilinear-cross"):
                split = self.fss_bright
                # Emission from the exciton doublet has H on the upper branch;
                # emission into the doublet family mirrors it.
                src_kind = self.states[self.state_index[tr.source]].kind
                h_sign = 1 if src_kind == "bright-exciton" else -1
            table.append(
                SpectralLine(
                    index=len(table),
                    line_id=tr.line_id,
                    center=float(tr.photon_energy),
                    split=split,
                    h_branch_sign=h_sign,
                    polarization=tr.polarization,
                )
            )
        return tuple(table)

    @cached_property
    def line_ids(self) -> tuple[str, ...]:
        return tuple(line.line_id for line in self.lines)

    def line(self, line_id: str) -> SpectralLine:
        for ln in self.lines:
            if ln.line_id == line_id:
                return ln
        raise KeyError(f"unknown spectral line {line_id!r}")

    def out_transitions(self, state_id: str) -> tuple[Transition, ...]:
        return tuple(t for t in self.transitions if t.source == state_id)


# ---------------------------------------------------------------------------
# Validation


def validate(scheme: LevelScheme) -> list[str]:
    """Check every scheme invariant; returns a list of violations (empty = ok).

    Violations are data, not exceptions: each entry names the offending state
    or transition and the broken rule.
    """
    v = []
    ids = [s.id for s in scheme.states]
    seen = set()
    for sid in ids:
        if sid in seen:
            v.append(f"state {sid!r}: duplicate id")
        seen.add(sid)

    for s in scheme.states:
        if s.kind not in STATE_KINDS:
            v.append(f"state {s.id!r}: unknown kind {s.kind!r}")
        if s.carries_spin and s.kind != "dark-exciton":
            v.append(f"state {s.id!r}: carries_spin allowed only on the dark exciton")

    grounds = [s.id for s in scheme.states if s.kind == "ground"]
    if len(grounds) != 1:
        v.append(f"scheme: expected exactly one ground state, found {len(grounds)}")
    spin_carriers = [s.id for s in scheme.states if s.carries_spin]
    if len(spin_carriers) > 1:
        v.append(f"scheme: more than one spin-carrying state: {spin_carriers}")

    if scheme.fss_bright < 0:
        v.append("scheme: fss_bright must be >= 0")
    if scheme.fss_dark < 0:
        v.append("scheme: fss_dark must be >= 0")

    id_set = set(ids)
    spin_adjacent = set(spin_carriers)
    trion_from_spin = set()
    for t in scheme.transitions:
        if t.source in spin_carriers:
            tgt = next((s for s in scheme.states if s.id == t.target), None)
            if tgt is not None and tgt.kind in ("trion-positive", "trion-negative"):
                trion_from_spin.add(t.target)

    for t in scheme.transitions:
        tag = f"transition {t.line_id}"
        if t.source not in id_set:
            v.append(f"{tag}: unknown source state")
        if t.target not in id_set:
            v.append(f"{tag}: unknown target state")
        if not t.rate > 0:
            v.append(f"{tag}: rate must be > 0 (got {t.rate})")
        if t.radiative and t.photon_energy is None:
            v.append(f"{tag}: radiative transition needs a photon energy")
        if not t.radiative and t.photon_energy is not None:
            v.append(f"{tag}: non-radiative transition must not carry a photon energy")
        if t.polarization not in POLARIZATION_RULES:
            v.append(f"{tag}: unknown polarization rule {t.polarization!r}")
        elif (t.polarization == "none") != (not t.radiative):
            v.append(f"{tag}: polarization rule must be 'none' exactly for non-radiative arcs")
        if t.readout_sign not in (-1, 1):
            v.append(f"{tag}: readout_sign must be +1 or -1")
        if t.polarization == "circular-spin-correlated":
            ok = (
                t.source in spin_adjacent
                or t.target in spin_adjacent
                or t.source in trion_from_spin
                or _touches_spin_via_relax(scheme, t, spin_carriers)
            )
            if not ok:
                v.append(
                    f"{tag}: circular-spin-correlated allowed only next to the "
                    "spin-carrying state or on a trion fed by it"
                )

    # connectivity (undirected) and outgoing arcs
    if not grounds or len(grounds) == 1:
        adj = {sid: set() for sid in ids}
        for t in scheme.transitions:
            if t.source in adj and t.target in adj:
                adj[t.source].add(t.target)
                adj[t.target].add(t.source)
        if ids:
            stack, reached = [ids[0]], {ids[0]}
            while stack:
                for nxt in adj[stack.pop()]:
                    if nxt not in reached:
                        reached.add(nxt)
                        stack.append(nxt)
            for sid in ids:
                if sid not in reached:
                    v.append(f"state {sid!r}: disconnected from the rest of the scheme")
        has_out = {t.source for t in scheme.transitions}
        for s in scheme.states:
            if s.kind != "ground" and s.id not in has_out:
                v.append(f"state {s.id!r}: non-ground state with no outgoing transition")

    return v


def _touches_spin_via_relax(scheme, t, spin_carriers):
    # Heralding arcs land on a precursor (e.g. a hot dark exciton) that relaxes
    # into the spin carrier; accept one non-radiative hop of separation.
    if not spin_carriers:
        return False
    for nxt in scheme.transitions:
        if nxt.source == t.target and nxt.target in spin_carriers:
            return True
    if t.source in {x.source for x in scheme.transitions if x.target in spin_carriers}:
        return True
    return False


# ---------------------------------------------------------------------------
# Config parsing / serialization

_SCHEMA = None


def _schema():
    global _SCHEMA
    if _SCHEMA is None:
        text = resources.files("dexsim.data").joinpath("scheme_schema.json").read_text()
        _SCHEMA = json.loads(text)
    return _SCHEMA


_CONSTANT_DEFAULTS = {
    "reference_energy_ev": 1.3395,
    "fss_bright_uev": 36.0,
    "fss_dark_uev": 5.0,
    "spin_dephasing_time_ns": 3.0,
    "cascade_fidelity": 0.9,
}


def build_scheme(config: dict) -> LevelScheme:
    """Build a validated LevelScheme from a parsed config tree.

    Raises :class:`SchemeError` naming the offending config path on parse or
    invariant failures.
    """
    import jsonschema

    try:
        jsonschema.validate(config, _schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemeError(f"config {path}: {exc.message}") from None

    consts = dict(_CONSTANT_DEFAULTS)
    consts.update(config.get("constants", {}))

    states = tuple(
        QDState(
            id=str(s["id"]),
            kind=s["kind"],
            carries_spin=bool(s.get("carries_spin", False)),
        )
        for s in config["states"]
    )
    known = {s.id for s in states}
    transitions = []
    for i, item in enumerate(config["transitions"]):
        path = f"transitions[{i}]"
        src, dst = str(item["from"]), str(item["to"])
        if src not in known:
            raise SchemeError(f"config {path}.from: unknown state {src!r}")
        if dst not in known:
            raise SchemeError(f"config {path}.to: unknown state {dst!r}")
        rate = float(item["rate"])
        if not rate > 0:
            raise SchemeError(f"config {path}.rate: must be > 0, got {rate}")
        radiative = bool(item.get("radiative", False))
        energy = item.get("energy")
        if radiative and energy is None:
            raise SchemeError(f"config {path}: radiative transition needs 'energy'")
        pol = item.get("polarization", "unpolarized" if radiative else "none")
        transitions.append(
            Transition(
                source=src,
                target=dst,
                rate=rate,
                radiative=radiative,
                photon_energy=None if energy is None else float(energy),
                polarization=pol,
                readout_sign=int(item.get("readout_sign", 1)),
            )
        )

    scheme = LevelScheme(
        states=states,
        transitions=tuple(transitions),
        fss_bright=float(consts["fss_bright_uev"]),
        fss_dark=float(consts["fss_dark_uev"]),
        spin_dephasing_time=float(consts["spin_dephasing_time_ns"]),
        reference_energy=float(consts["reference_energy_ev"]),
        cascade_fidelity=float(consts["cascade_fidelity"]),
    )
    violations = validate(scheme)
    if violations:
        raise SchemeError("invalid scheme:\n  " + "\n  ".join(violations))
    return scheme


def scheme_to_config(scheme: LevelScheme) -> dict:
    """Serialize a scheme back to the config-tree form accepted by build_scheme."""
    cfg = {
        "constants": {
            "reference_energy_ev": scheme.reference_energy,
            "fss_bright_uev": scheme.fss_bright,
            "fss_dark_uev": scheme.fss_dark,
            "spin_dephasing_time_ns": scheme.spin_dephasing_time,
            "cascade_fidelity": scheme.cascade_fidelity,
        },
        "states": [
            {"id": s.id, "kind": s.kind, **({"carries_spin": True} if s.carries_spin else {})}
            for s in scheme.states
        ],
        "transitions": [],
    }
    for t in scheme.transitions:
        item = {"from": t.source, "to": t.target, "rate": t.rate}
        if t.radiative:
            item["radiative"] = True
            item["energy"] = t.photon_energy
            item["polarization"] = t.polarization
            if t.polarization == "circular-spin-correlated":
                item["readout_sign"] = t.readout_sign
        cfg["transitions"].append(item)
    return cfg


def load_scheme(path) -> LevelScheme:
    """Read a YAML scheme config from ``path`` and build it."""
    try:
        with open(path) as fh:
            config = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise SchemeError(f"config parse failure in {path}: {exc}") from None
    if not isinstance(config, dict):
        raise SchemeError(f"config {path}: top level must be a mapping")
    return build_scheme(config)


def save_scheme(scheme: LevelScheme, path) -> None:
    Path(path).write_text(yaml.safe_dump(scheme_to_config(scheme), sort_keys=False))


# ---------------------------------------------------------------------------
# Default scheme

# Instrument anchor: the biexciton-triplet emission sits at 1.3395 eV; all
# other line positions are plausible placements well outside the 25 ueV
# instrument resolution of one another.
_E_X0 = 4000.0
_E_XX0 = 1500.0
_E_XP = 3000.0
_E_XM = 2600.0
_E_DE = 3600.0
_E_T0 = -150.0
_E_T3 = 0.0


def default_scheme_config(
    pump_rate=0.1,
    biexciton_branching=(2.0, 1.0, 1.0),
    charging_rate=0.5,
    trion_rate=1.5,
    cascade_fidelity=0.9,
    spin_dephasing_time=3.0,
) -> dict:
    """Config tree for the default scheme.

    ``biexciton_branching`` gives the relative re-excitation weights of the
    singlet biexciton and the triplet-0 and (per spin projection) triplet-3
    biexcitons; the +-3 pair is twofold, so its aggregate arc carries twice
    the per-state weight.  The defaults reproduce a biexciton line at half
    the exciton-line intensity and a triplet-3 line four times stronger than
    each cross-polarized triplet-0 component.
    """
    b_s, b_t0, b_t3 = biexciton_branching
    # scale so the singlet arc is pump-independent: 0.5/ns at the defaults,
    # which pins the 2:1 exciton:biexciton intensity ratio.
    scale = 0.5 / b_s
    return {
        "constants": {
            "reference_energy_ev": 1.3395,
            "fss_bright_uev": 36.0,
            "fss_dark_uev": 5.0,
            "spin_dephasing_time_ns": spin_dephasing_time,
            "cascade_fidelity": cascade_fidelity,
        },
        "states": [
            {"id": "ground", "kind": "ground"},
            {"id": "X0", "kind": "bright-exciton"},
            {"id": "X0s", "kind": "excited-exciton"},
            {"id": "XX0", "kind": "biexciton-singlet"},
            {"id": "XX0_T0", "kind": "biexciton-triplet0"},
            {"id": "XX0_T3", "kind": "biexciton-triplet3"},
            {"id": "DEs", "kind": "excited-dark-exciton"},
            {"id": "DE", "kind": "dark-exciton", "carries_spin": True},
            {"id": "Xp", "kind": "trion-positive"},
            {"id": "Xm", "kind": "trion-negative"},
            {"id": "h1", "kind": "single-hole"},
            {"id": "e1", "kind": "single-electron"},
        ],
        "transitions": [
            # effective CW pumping
            {"from": "ground", "to": "X0", "rate": pump_rate},
            {"from": "X0", "to": "XX0", "rate": b_s * scale},
            {"from": "X0", "to": "XX0_T0", "rate": b_t0 * scale},
            {"from": "X0", "to": "XX0_T3", "rate": 2.0 * b_t3 * scale},
            # bright exciton, ~1 ns radiative lifetime
            {"from": "X0", "to": "ground", "rate": 1.0, "radiative": True,
             "energy": _E_X0, "polarization": "rectilinear-co"},
            # singlet cascade: co-rectilinear pair
            {"from": "XX0", "to": "X0", "rate": 2.0, "radiative": True,
             "energy": _E_XX0, "polarization": "rectilinear-co"},
            # triplet-0 cascade: cross-rectilinear pair via the hot exciton
            {"from": "XX0_T0", "to": "X0s", "rate": 1.0, "radiative": True,
             "energy": _E_T0, "polarization": "rectilinear-cross"},
            {"from": "X0s", "to": "X0", "rate": 100.0},
            # triplet-3 decay heralds the dark exciton
            {"from": "XX0_T3", "to": "DEs", "rate": 1.0, "radiative": True,
             "energy": _E_T3, "polarization": "circular-spin-correlated"},
            {"from": "DEs", "to": "DE", "rate": 100.0},
            # dark exciton: ~1 us residual decay plus spontaneous charging
            {"from": "DE", "to": "ground", "rate": 0.001, "radiative": True,
             "energy": _E_DE, "polarization": "unpolarized"},
            {"from": "DE", "to": "Xp", "rate": charging_rate},
            {"from": "DE", "to": "Xm", "rate": charging_rate},
            # trion readout; opposite helicity conventions for X+ and X-
            {"from": "Xp", "to": "h1", "rate": trion_rate, "radiative": True,
             "energy": _E_XP, "polarization": "circular-spin-correlated",
             "readout_sign": 1},
            {"from": "Xm", "to": "e1", "rate": trion_rate, "radiative": True,
             "energy": _E_XM, "polarization": "circular-spin-correlated",
             "readout_sign": -1},
            # leftover single carriers neutralize back to the empty dot
            {"from": "h1", "to": "ground", "rate": 1.0},
            {"from": "e1", "to": "ground", "rate": 1.0},
        ],
    }


def default_paper_scheme(**kwargs) -> LevelScheme:
    """The default scheme: 36 ueV bright and 5.0 ueV dark splittings, 1/ns
    bright-exciton decay, 0.001/ns dark-exciton decay, triplet lines anchored
    at 1.3395 eV."""
    return build_scheme(default_scheme_config(**kwargs))


# ---------------------------------------------------------------------------
# Rate-matrix utilities (oracle for trajectory occupancies, analytic spectra)


def rate_matrix(scheme: LevelScheme) -> np.ndarray:
    """CTMC generator Q with Q[i, j] = rate(i -> j) and -total rate on the diagonal."""
    n = len(scheme.states)
    q = np.zeros((n, n))
    idx = scheme.state_index
    for t in scheme.transitions:
        q[idx[t.source], idx[t.target]] += t.rate
    np.fill_diagonal(q, q.diagonal() - q.sum(axis=1))
    return q


def stationary_distribution(scheme: LevelScheme) -> np.ndarray:
    """Stationary occupancy vector pi solving pi Q = 0, sum(pi) = 1."""
    q = rate_matrix(scheme)
    n = q.shape[0]
    a = q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(a, b)
    pi[np.abs(pi) < 1e-15] = 0.0
    return pi


def line_emission_rates(scheme: LevelScheme) -> dict[str, float]:
    """Steady-state photon rate (1/ns) of each spectral line."""
    pi = stationary_distribution(scheme)
    idx = scheme.state_index
    rates = {}
    for t in scheme.transitions:
        if t.radiative:
            rates[t.line_id] = pi[idx[t.source]] * t.rate
    return rates
