"""
Unit conventions.

hbar = c = 1, lengths in micrometres.  Wavenumbers, frequencies and couplings
are in rad/um and times are reported as c t in um.  A dipole moment d given in
Debye becomes a coupling in rad/um through

    g = KAPPA * d[D] * sqrt(k / eps) * u,

with k in rad/um and the normalized mode amplitude u in um^-3/2.
"""
import numpy as np
from scipy import constants

DEBYE = 1e-21 / constants.c  # C m

# sqrt(k / (2 eps0 hbar c)) * d * u expressed with k [1/um], u [um^-3/2] and d in
# Debye gives a wavenumber in 1/um.
KAPPA = DEBYE * 1e6 / np.sqrt(2.0 * constants.epsilon_0 * constants.hbar * constants.c)
