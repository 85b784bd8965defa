"""spinflow: spin-lattice Metropolis dynamics, constrained Langevin SDEs, and
harmonic map heat flow driven by one shared Brownian path."""

__version__ = "0.1.0"
