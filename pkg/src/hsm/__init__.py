"""Numerics for the Hardy-Sobolev-Maz'ya inequality on the half-space.

Submodules: :mod:`geometry` (conformal maps), :mod:`special` (F(A), constants
and prefactors), :mod:`kernels` (heat, Phi and Psi kernels), :mod:`quadrature`
(rules, grids and singular double sums), :mod:`functionals` (forms, norms and
quotients), :mod:`suites` and :mod:`cli` (verification runner).
"""

__version__ = "0.1.0"
