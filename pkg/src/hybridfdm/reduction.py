"""Derivative reduction for -div(a grad u) = f.

The PDE lets every partial derivative ``u^(p,q)`` be rewritten in terms of the
first-band derivatives ``u^(m,n)`` with ``m in {0,1}`` plus derivatives of the
source ``f``:

    u^(p,q) = sum a_u[p,q,m,n] u^(m,n)  +  sum a_f[p,q,i,j] f^(i,j)

The coefficients are functions of the diffusion coefficient alone; they are
obtained by recursively substituting the Leibniz-differentiated identity

    u^(m+2,n) = -(f/a)^(m,n) - u^(m,n+2)
                - sum binom * [ (a_x/a)^(..) u^(i+1,j) + (a_y/a)^(..) u^(i,j+1) ]

and are stored as jets so the recursion can differentiate them exactly.  From
the table come the polynomial families G (weights of the band derivatives) and
H (weights of the source derivatives) that every stencil builder consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np

from .errors import ReductionError
from .indexsets import lambda_band, lambda_full
from .jets import Jet2, Poly2


@dataclass
class ReductionTable:
    """Reduction coefficients a_u, a_f for all (p, q) in Lambda_order.

    ``u[(p, q)][(m, n)]`` is the jet of the coefficient multiplying
    ``u^(m,n)``; ``f[(p, q)][(i, j)]`` the jet multiplying ``f^(i,j)``.
    For transposed tables the band is n in {0, 1} instead of m in {0, 1}.
    """

    order: int
    a_jet: Jet2
    u: dict = field(default_factory=dict)
    f: dict = field(default_factory=dict)
    transposed: bool = False

    def u_value(self, p, q, m, n):
        jet = self.u.get((p, q), {}).get((m, n))
        if jet is None:
            return np.zeros(self.a_jet.c.shape[:-2])
        return jet.value

    def f_value(self, p, q, i, j):
        jet = self.f.get((p, q), {}).get((i, j))
        if jet is None:
            return np.zeros(self.a_jet.c.shape[:-2])
        return jet.value


def _accumulate(store: dict, key, jet: Jet2):
    if key in store:
        store[key] = store[key] + jet
    else:
        store[key] = jet


class _DerivCache:
    """Mixed-partial derivatives of a jet, computed once each."""

    def __init__(self, jet: Jet2):
        self._cache = {(0, 0): jet}

    def get(self, r: int, s: int) -> Jet2:
        if (r, s) not in self._cache:
            if r > 0:
                self._cache[(r, s)] = self.get(r - 1, s).dx()
            else:
                self._cache[(r, s)] = self.get(r, s - 1).dy()
        return self._cache[(r, s)]


def build_reduction_table(a_jet: Jet2, order: int) -> ReductionTable:
    """Reduction table for expansion order ``order`` (indices in Lambda_order).

    ``a_jet`` must carry derivatives of the coefficient up to total order
    ``order - 1`` and have a strictly positive value at the base point.
    """
    if a_jet.order < order - 1:
        raise ReductionError(
            f"coefficient jet of order {a_jet.order} cannot support an order-"
            f"{order} reduction (needs {order - 1})"
        )
    if not np.all(a_jet.value > 0.0):
        raise ReductionError("coefficient must be positive at the base point")

    table = ReductionTable(order=order, a_jet=a_jet)
    inv_a = a_jet.reciprocal()
    r1 = _DerivCache(a_jet.dx() * inv_a)
    r2 = _DerivCache(a_jet.dy() * inv_a)
    q_inv = _DerivCache(inv_a)

    for p, q in lambda_full(order):
        if p <= 1:
            table.u[(p, q)] = {(p, q): Jet2.constant(
                np.ones(a_jet.c.shape[:-2]), order)}
            table.f[(p, q)] = {}

    for p in range(2, order + 1):
        for q in range(0, order - p + 1):
            mr, nr = p - 2, q
            ucoef: dict = {}
            fcoef: dict = {}

            # -(f/a)^(mr,nr), expanded by Leibniz over f^(i,j)
            for i in range(mr + 1):
                for j in range(nr + 1):
                    w = -comb(mr, i) * comb(nr, j)
                    _accumulate(fcoef, (i, j), q_inv.get(mr - i, nr - j).scaled(w))

            def substitute(target, weight_jet=None, scale=1.0):
                """Add scale * weight * u^target, reducing target if needed."""
                tm, tn = target
                if tm <= 1:
                    jet = (Jet2.constant(np.full(a_jet.c.shape[:-2], scale), order)
                           if weight_jet is None else weight_jet.scaled(scale))
                    _accumulate(ucoef, target, jet)
                    return
                for key, sub in table.u[target].items():
                    j = sub if weight_jet is None else weight_jet * sub
                    _accumulate(ucoef, key, j.scaled(scale))
                for key, sub in table.f[target].items():
                    j = sub if weight_jet is None else weight_jet * sub
                    _accumulate(fcoef, key, j.scaled(scale))

            substitute((mr, nr + 2), None, -1.0)
            for i in range(mr + 1):
                for j in range(nr + 1):
                    w = comb(mr, i) * comb(nr, j)
                    substitute((i + 1, j), r1.get(mr - i, nr - j), -w)
                    substitute((i, j + 1), r2.get(mr - i, nr - j), -w)

            table.u[(p, q)] = ucoef
            table.f[(p, q)] = fcoef

    return table


def transpose_reduction_table(a_jet: Jet2, order: int) -> ReductionTable:
    """Reduction onto the n in {0, 1} band (roles of x and y swapped)."""
    t = build_reduction_table(a_jet.transposed(), order)
    out = ReductionTable(order=order, a_jet=a_jet, transposed=True)
    for (p, q), coeffs in t.u.items():
        out.u[(q, p)] = {(n, m): jet.transposed() for (m, n), jet in coeffs.items()}
    for (p, q), coeffs in t.f.items():
        out.f[(q, p)] = {(j, i): jet.transposed() for (i, j), jet in coeffs.items()}
    return out


def build_gh_polynomials(table: ReductionTable, order: int | None = None):
    """G/H coefficient polynomials of the Taylor identity

    u(x* + x, y* + y) = sum_band u^(m,n) G[m,n](x,y)
                        + sum_{Lambda_{order-2}} f^(m,n) H[m,n](x,y) + O(h^{order+1})

    For a transposed table the keys of G run over the n-band and the roles of
    x and y in the construction are exchanged.
    """
    if order is None:
        order = table.order
    if order > table.order:
        raise ReductionError("requested order exceeds the table order")
    batch = table.a_jet.c.shape[:-2]
    size = order + 1
    fact = [factorial(k) for k in range(size)]

    if table.transposed:
        band = tuple((n, m) for (m, n) in lambda_band(order))
    else:
        band = lambda_band(order)

    g = {}
    for mn in band:
        c = np.zeros(batch + (size, size))
        for (p, q) in lambda_full(order):
            v = table.u_value(p, q, *mn)
            c[..., p, q] = v / (fact[p] * fact[q])
        g[mn] = Poly2(c)

    h = {}
    for ij in lambda_full(order - 2):
        c = np.zeros(batch + (size, size))
        for (p, q) in lambda_full(order):
            v = table.f_value(p, q, *ij)
            c[..., p, q] = v / (fact[p] * fact[q])
        h[ij] = Poly2(c)
    return g, h


def leading_g_poly(m: int, n: int, size: int) -> Poly2:
    """The constant homogeneous polynomial G_{m,n} (x-band form, m in {0,1})."""
    c = np.zeros((size, size))
    for ell in range(n // 2 + 1):
        c[m + 2 * ell, n - 2 * ell] = (-1.0) ** ell / (
            factorial(m + 2 * ell) * factorial(n - 2 * ell)
        )
    return Poly2(c)
