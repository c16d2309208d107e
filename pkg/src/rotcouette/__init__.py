"""Numerical laboratory for inertial instability of rotating Couette flow.

Subpackages map onto the pieces of the analysis:

* :mod:`rotcouette.symbol`     -- Fourier symbols of the linearised operator
* :mod:`rotcouette.certify`    -- numerical-range / Routh-Hurwitz certificates
* :mod:`rotcouette.pseudomode` -- mollified pseudo-eigenfunctions
* :mod:`rotcouette.kelvin`     -- exact linear evolution along sheared wavevectors
* :mod:`rotcouette.sheardns`   -- nonlinear pseudo-spectral solver in a shearing box
* :mod:`rotcouette.cli`        -- batch front end
"""

__version__ = "0.1.0"

from rotcouette.symbol import FlowParams, WaveVector, growth_rates, instability_window

__all__ = ["FlowParams", "WaveVector", "growth_rates", "instability_window", "__version__"]
