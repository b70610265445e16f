"""Shared physical constants and unit conventions.

Units used throughout the package: time in ns, rates in 1/ns, energies in
micro-eV (ueV) as offsets from a reference energy given in eV.
"""

import math

# Planck constant in ueV * ns (4.135667696e-15 eV*s).
PLANCK_UEV_NS = 4.135668

# Gaussian FWHM = 2*sqrt(2*ln 2) * sigma.
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))

# Polarization descriptors carried by photon events (emission side).
POL_H = 0
POL_V = 1
POL_R = 2
POL_L = 3
POL_UNPOLARIZED = 4

POL_NAMES = ("H", "V", "R", "L", "unpolarized")
POL_CODES = {name: code for code, name in enumerate(POL_NAMES)}

# Analyzer settings accepted by detector channels (D/A are the diagonal basis).
ANALYZERS = ("H", "V", "D", "A", "R", "L", None)


def precession_period(fss_uev):
    """Quantum-beat period (ns) of a doublet split by ``fss_uev``."""
    if fss_uev < 0:
        raise ValueError("fss must be >= 0")
    if fss_uev == 0:
        return math.inf
    return PLANCK_UEV_NS / fss_uev
