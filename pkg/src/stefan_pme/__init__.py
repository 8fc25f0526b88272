"""Two-phase Stefan solver for porous-medium-type degenerate diffusion.

Modules:
  geometry      reference domains, front parameterization, extension maps
  hoelder       weighted parabolic Hölder norm estimators
  linear_pde    degenerate linear parabolic solvers on fixed grids
  stefan_linear linearized Stefan system with regularized front equation
  nonlinear     full free-boundary problem via fixed-point iteration
  oracle        exact reference solutions and convergence tooling
  cli           command-line entry points (run, sweep, norms)
"""

__version__ = "0.1.0"
