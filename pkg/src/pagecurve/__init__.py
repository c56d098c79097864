"""
Entanglement-entropy dynamics of quantum impurities in Ohmic bosonic baths.

Two solvers share one bath description:

* :mod:`pagecurve.gaussian_qbm` solves the damped harmonic oscillator
  exactly through its Gaussian covariance matrix;
* :mod:`pagecurve.heom` propagates a spin-boson qubit with hierarchical
  equations of motion.
"""

__version__ = "0.1.0"

from .spectral import BathSpec, matsubara_expansion  # noqa: E402
from .gaussian_qbm import (OscillatorSpec, evolve_covariance,  # noqa: E402
                           evolve_trajectory, steady_covariance, wave_packet)
from .heom import QubitSpec, solve  # noqa: E402

__all__ = ["BathSpec", "matsubara_expansion", "OscillatorSpec",
           "evolve_covariance", "evolve_trajectory", "steady_covariance",
           "wave_packet", "QubitSpec", "solve", "__version__"]
