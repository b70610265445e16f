"""Coherent dynamics of the dark-exciton pseudo-spin.

The pseudo-spin lives on the Bloch sphere with the convention

    +z = |up,Up>        (spin projections parallel, "+" helicity herald)
    -z = |down,Down>
    +-x = the energy eigenstates (|up,Up> +- |down,Down>)/sqrt(2)

A finite fine-structure splitting between the eigenstates makes a spin
prepared along z precess about the x axis with period h / splitting, while
pure dephasing shrinks the components transverse to x.  All operations are
pure: they take and return values and draw randomness only from an explicit
rng handle (anything with a ``random()`` method).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import PLANCK_UEV_NS


@dataclass(frozen=True)
class SpinState:
    """Bloch vector (sx, sy, sz); pure states have unit norm."""

    sx: float
    sy: float
    sz: float

    @property
    def bloch(self):
        return (self.sx, self.sy, self.sz)

    def norm(self):
        return math.sqrt(self.sx**2 + self.sy**2 + self.sz**2)


@dataclass(frozen=True)
class PrecessionParams:
    """Precession inputs: eigenstate splitting (ueV) and dephasing time (ns).

    ``dephasing_time`` may be ``math.inf`` for a lossless spin.
    """

    fss_dark: float
    dephasing_time: float = math.inf
    planck: float = PLANCK_UEV_NS

    @property
    def period(self):
        """Beat period h / splitting (inf when the splitting vanishes)."""
        if self.fss_dark == 0:
            return math.inf
        return self.planck / self.fss_dark

    @property
    def omega(self):
        """Angular precession frequency in rad/ns."""
        return 2.0 * math.pi * self.fss_dark / self.planck


def init_spin(herald_helicity: str) -> SpinState:
    """Spin state right after a heralding photon of the given helicity.

    'R' prepares +z, 'L' prepares -z.  The absolute sign convention is fixed
    here; readout conventions carry the per-trion sign.
    """
    if herald_helicity == "R":
        return SpinState(0.0, 0.0, 1.0)
    if herald_helicity == "L":
        return SpinState(0.0, 0.0, -1.0)
    raise ValueError(f"helicity must be 'R' or 'L', got {herald_helicity!r}")


def evolve(s: SpinState, dt: float, p: PrecessionParams) -> SpinState:
    """Propagate the spin for ``dt`` ns: x-axis rotation by 2*pi*dt/period
    plus exp(-dt/dephasing_time) decay of the transverse (y, z) components.

    Composition is exact: evolve(evolve(s, a), b) == evolve(s, a + b).
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    theta = p.omega * dt
    damp = math.exp(-dt / p.dephasing_time) if math.isfinite(p.dephasing_time) else 1.0
    c, sn = math.cos(theta), math.sin(theta)
    return SpinState(
        s.sx,
        damp * (s.sy * c - s.sz * sn),
        damp * (s.sy * sn + s.sz * c),
    )


def measure_helicity(s: SpinState, sign: int, rng) -> tuple[str, SpinState]:
    """Projective helicity readout.

    Returns ('R' or 'L', collapsed state); 'R' occurs with probability
    (1 + sign*sz)/2.  ``sign`` = +1 or -1 encodes which trion performs the
    readout (the two give mutually reversed outcome phases).
    """
    if sign not in (-1, 1):
        raise ValueError("sign must be +1 or -1")
    p_r = 0.5 * (1.0 + sign * s.sz)
    if rng.random() < p_r:
        return "R", SpinState(0.0, 0.0, 1.0 * sign)
    return "L", SpinState(0.0, 0.0, -1.0 * sign)


def analytic_cocircular(tau: float, p: PrecessionParams) -> float:
    """Closed-form co-circular readout probability after a delay ``tau``.

    Reference curve 1/2 + exp(-tau/T2) * cos(2*pi*tau/period) / 2 used to
    validate the Monte Carlo spin lifecycle; its oscillating part is the
    expected circular degree-of-correlation envelope.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    damp = math.exp(-tau / p.dephasing_time) if math.isfinite(p.dephasing_time) else 1.0
    return 0.5 + 0.5 * damp * math.cos(p.omega * tau)
