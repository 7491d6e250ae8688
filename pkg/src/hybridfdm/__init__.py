"""Sixth-order hybrid finite difference solver for 2D elliptic interface problems.

Solves -div(a grad u) = f on a rectangle with a smooth interior interface
across which a, f and u may jump, under mixed Dirichlet/Neumann/Robin boundary
conditions.  Interior points away from the interface get a 9-point compact
stencil with sixth-order consistency and an M-matrix sign structure for every
mesh size; boundary points get 6-point (edges) and 4-point (corners) analogues;
points straddling the interface get a 13-point fifth-order stencil driven by
transmission relations along the curve.  All required derivatives of the data
are recovered from point values by moving least squares.
"""

__version__ = "0.1.0"
