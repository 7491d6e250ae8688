"""Sixth-order 9-point compact stencil at interior regular points.

The stencil coefficients are degree-7 polynomials in h determined degree by
degree: the constant 15x9 leading matrix (rows = first band of order 7,
columns = the nine offsets) is solved with right-hand sides assembled from the
coefficient jets, the free parameters tied as

    c_{1,0,4} = c_{1,1,4},   c_{0,1,5} = c_{1,-1,5} = c_{1,0,5} = c_{1,1,5},
    c_{-1,1,6} = c_{0,1,6} = c_{1,-1,6} = c_{1,0,6} = c_{1,1,6},
    c_{0,0,6} = -8 c_{1,1,6},

the degree-0 solution pinned to (center 20, edges -4, corners -1), and each
remaining free parameter maximized under the per-degree sign conditions.  The
result satisfies the sign and sum conditions for every h > 0 (the per-degree
sums all vanish for this family), is unique, and reduces to the constant
Laplacian stencil when the coefficient is constant.

c_{1,1,0} = -1 is hard-coded; any negative value works and only rescales the
row.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .indexsets import lambda_band, lambda_full
from .jets import Jet2, Poly2
from .reduction import build_gh_polynomials, build_reduction_table
from .stencil_core import (
    MMatrixReport,
    build_degree_solvers,
    check_sign_sum,
    expand_poly_in_h,
    frac_leading_g,
    run_constant_recursion,
    stencil_values,
)

OFFSETS9 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 0), (0, 1),
            (1, -1), (1, 0), (1, 1))
CENTER9 = OFFSETS9.index((0, 0))
_COL = {off: i for i, off in enumerate(OFFSETS9)}
F_INDICES = lambda_full(5)          # f^(m,n) weights on the right-hand side


@dataclass
class StencilPoly:
    """Stencil coefficients C_o = sum_p coeffs[o, p] h^p over fixed offsets."""

    offsets: tuple
    coeffs: np.ndarray           # (n_off, D+1), batched variants use (..., n_off, D+1)
    scale: int                   # scheme is h^(-scale) * sum C_o u_o = rhs
    monotone: bool = True

    def values(self, h: float) -> np.ndarray:
        return stencil_values(self.coeffs, h)


def _tie(*terms, size=9):
    row = [Fraction(0)] * size
    for col, w in terms:
        row[col] += Fraction(w)
    return row


@lru_cache(maxsize=1)
def _regular_solvers():
    band = lambda_band(7)
    a0 = [[frac_leading_g(m, n, k, ell) for (k, ell) in OFFSETS9] for (m, n) in band]
    lead = [m + n for (m, n) in band]
    c = _COL

    def ties(d):
        if d == 4:
            return [_tie((c[(1, 0)], 1), (c[(1, 1)], -1))]
        if d == 5:
            return [_tie((c[o], 1), (c[(1, 1)], -1))
                    for o in ((0, 1), (1, -1), (1, 0))]
        if d == 6:
            rows = [_tie((c[o], 1), (c[(1, 1)], -1))
                    for o in ((-1, 1), (0, 1), (1, -1), (1, 0))]
            rows.append(_tie((c[(0, 0)], 1), (c[(1, 1)], 8)))
            return rows
        return []

    solvers = build_degree_solvers(
        a0, lead, T=7, ties_for_degree=ties, pin_col=c[(1, 1)],
        fixed_values={0: -1.0}, zero_degrees=(7,),
    )
    return solvers, lead


@dataclass
class RegularSystem:
    """Recursive linear systems of the 9-point stencil at one or many points."""

    expansions: np.ndarray       # (..., 15, 9, 8) h-expansions of G_{7,m,n}
    h_polys: dict                # (m, n) in Lambda_5 -> Poly2 (source weights)
    lead: tuple

    def a_matrix(self, d: int) -> np.ndarray:
        rows = [r for r, t in enumerate(self.lead) if t + d <= 7]
        return np.stack([self.expansions[..., r, :, self.lead[r]] for r in rows],
                        axis=-2)

    def b_matrix(self, d: int, s: int) -> np.ndarray:
        """B_{d,s}: jet-dependent couplings of degree s into degree d."""
        rows = [r for r, t in enumerate(self.lead) if t + d <= 7]
        return np.stack(
            [self.expansions[..., r, :, self.lead[r] + d - s] for r in rows], axis=-2
        )


def assemble_regular_system(a_jet: Jet2) -> RegularSystem:
    """Expansions and source polynomials at the stencil center (base = node)."""
    table = build_reduction_table(a_jet, 7)
    g, h_polys = build_gh_polynomials(table)
    band = lambda_band(7)
    exp = np.stack([expand_poly_in_h(g[mn], OFFSETS9, 8) for mn in band], axis=-3)
    _, lead = _regular_solvers()
    return RegularSystem(expansions=exp, h_polys=h_polys, lead=tuple(lead))


def solve_regular_stencil(system: RegularSystem) -> StencilPoly:
    solvers, lead = _regular_solvers()
    res = run_constant_recursion(system.expansions, lead, 7, solvers,
                                 center=CENTER9)
    return StencilPoly(OFFSETS9, res.coeffs, scale=2,
                       monotone=bool(np.all(res.monotone)))


def regular_rhs_weights(stencil: StencilPoly, h_polys: dict, h: float) -> np.ndarray:
    """Weights of f^(m,n) over Lambda_5: sum_o C_o(h) H_{7,m,n}(kh, lh).

    The h^-2 row scale of the scheme is applied by the assembler, not here.
    """
    ch = stencil.values(h)
    kh = h * np.array([o[0] for o in OFFSETS9], dtype=float)
    lh = h * np.array([o[1] for o in OFFSETS9], dtype=float)
    cols = []
    for mn in F_INDICES:
        hv = h_polys[mn].eval(kh, lh)          # (..., 9)
        cols.append(np.sum(ch * hv, axis=-1))
    return np.stack(cols, axis=-1)


def check_m_matrix(stencil: StencilPoly, tol: float = 1e-12) -> MMatrixReport:
    """Per-degree sufficient sign/sum conditions for the M-matrix property."""
    center = stencil.offsets.index((0, 0))
    return check_sign_sum(stencil.coeffs, center, tol)


def build_regular_batch(a_jet: Jet2):
    """Batched pipeline: jets with leading axes -> (stencil, rhs-weight maker).

    Returns the StencilPoly (batched coefficients), the per-point monotone
    flags, and the H polynomials for the source weights.
    """
    system = assemble_regular_system(a_jet)
    solvers, lead = _regular_solvers()
    res = run_constant_recursion(system.expansions, lead, 7, solvers,
                                 center=CENTER9)
    stencil = StencilPoly(OFFSETS9, res.coeffs, scale=2)
    return stencil, res.monotone, system.h_polys
