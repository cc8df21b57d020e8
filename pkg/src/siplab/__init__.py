"""siplab: simulation and numerical verification of the inclusion process
with long-range jumps — microscopic kinetic Monte Carlo, self-duality
checks, a spectral hydrodynamic solver, fluctuation-field statistics, and
Dirichlet-form convergence diagnostics on the periodic torus."""

__version__ = "0.1.0"
