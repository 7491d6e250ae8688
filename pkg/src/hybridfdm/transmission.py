"""Transmission relations across the interface.

At a base point on the curve, every minus-side band derivative u-^(m',n')
is a linear functional of the plus-side band derivatives, the one-sided
source derivatives, and the jump data:

    u-^(m',n') = sum T_u+ u+^(m,n) + sum (T+ f+ + T- f-) + sum T_g g^(p)
                 + sum T_gG gGamma^(p)

The coefficients come from expanding the two matching conditions [u] = g and
[a grad u . (s', -r')] = gGamma * sqrt(r'^2 + s'^2) in powers of the curve
parameter and solving the resulting 2x2 systems recursively in the order
p = 1..5, carrying lower orders forward.  The 2x2 determinant at step p
equals a-^(0,0) p ((r')^2 + (s')^2)^p / (p!)^2 up to sign, which is asserted
at runtime.

Everything here works on the eleven-sample local charts produced by the
geometry module; the curve, jump and coefficient jets are estimated from
point values by MLS, never differentiated symbolically.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

from .errors import StencilError
from .geometry import LocalChart
from .indexsets import lambda_band, lambda_full
from .jets import (
    Jet2,
    Poly2,
    poly2_compose_series,
    series_deriv,
    series_mul,
    series_sqrt,
)
from .mls import MlsProblem, mls_operator
from .reduction import build_gh_polynomials, build_reduction_table

M_IRR = 5                      # expansion order of the interface stencils
BAND5 = lambda_band(5)         # 11 entries
F3 = lambda_full(3)            # 10 entries

# symbol layout of the transmission functionals
N_UP = len(BAND5)
N_F = len(F3)
COL_UP = {mn: i for i, mn in enumerate(BAND5)}
COL_FP = {mn: N_UP + i for i, mn in enumerate(F3)}
COL_FM = {mn: N_UP + N_F + i for i, mn in enumerate(F3)}
COL_G = {p: N_UP + 2 * N_F + p for p in range(6)}
COL_GG = {p: N_UP + 2 * N_F + 6 + p for p in range(5)}
N_SYMBOLS = N_UP + 2 * N_F + 6 + 5


@dataclass
class CurveJet:
    """Local curve and jump-data derivatives at a base point.

    ``r``/``s`` hold raw derivatives d^p r/dt^p for p = 0..5; ``g`` holds the
    Taylor coefficients (1/p!) d^p g/dt^p; ``gg`` the Taylor coefficients of
    g_Gamma(t) sqrt(r'(t)^2 + s'(t)^2), arclength factor included.
    """

    base: tuple
    v0: float
    w0: float
    r: np.ndarray               # (6,)
    s: np.ndarray               # (6,)
    g: np.ndarray               # (6,)
    gg: np.ndarray              # (5,)
    tie: bool = False

    @property
    def r_taylor(self) -> np.ndarray:
        return self.r / np.array([factorial(p) for p in range(6)])

    @property
    def s_taylor(self) -> np.ndarray:
        return self.s / np.array([factorial(p) for p in range(6)])


@lru_cache(maxsize=32)
def _curve_operators(h: float):
    ts = np.arange(-5, 6) * (h / 16.0)
    op6 = mls_operator(MlsProblem(ts, np.zeros(1), np.zeros(1), 6, h),
                       list(range(6)))
    op5 = mls_operator(MlsProblem(ts, np.zeros(1), np.zeros(1), 5, h),
                       list(range(5)))
    return op6, op5


def curve_jet_from_chart(chart: LocalChart, base, v0: float, w0: float,
                         h: float) -> CurveJet:
    """Estimate the curve/jump jets from the eleven chart samples by MLS."""
    fact = np.array([factorial(p) for p in range(6)])
    op6, op5 = _curve_operators(float(h))
    if chart.exact_x_line:
        r = np.zeros(6)
        r[0], r[1] = chart.xs[5], np.sign(chart.xs[6] - chart.xs[5])
    else:
        r = op6 @ chart.xs
    if chart.exact_y_line:
        s = np.zeros(6)
        s[0], s[1] = chart.ys[5], np.sign(chart.ys[6] - chart.ys[5])
    else:
        s = op6 @ chart.ys
    g = (op6 @ chart.g_vals) / fact

    rp = series_deriv(r / fact)
    sp = series_deriv(s / fact)
    speed2 = series_mul(rp, rp, 5) + series_mul(sp, sp, 5)
    arc = series_sqrt(speed2, 5)
    gg_plain = (op5 @ chart.gg_vals) / fact[:5]
    gg = series_mul(gg_plain, arc, 5)
    return CurveJet(base=tuple(base), v0=v0, w0=w0, r=r, s=s, g=g, gg=gg)


@dataclass
class TransmissionTable:
    """Rows: u-^(m',n') over the band of order 5; columns: the symbol list."""

    matrix: np.ndarray          # (11, 42)

    def u_plus(self, mp, np_, m, n) -> float:
        return self.matrix[COL_UP[(mp, np_)], COL_UP[(m, n)]]

    def f_block(self, sign: str) -> np.ndarray:
        cols = COL_FP if sign == "+" else COL_FM
        return self.matrix[:, [cols[mn] for mn in F3]]

    def g_block(self) -> np.ndarray:
        return self.matrix[:, [COL_G[p] for p in range(6)]]

    def gg_block(self) -> np.ndarray:
        return self.matrix[:, [COL_GG[p] for p in range(5)]]

    def u_block(self) -> np.ndarray:
        return self.matrix[:, [COL_UP[mn] for mn in BAND5]]


@dataclass
class InterfaceLocalModel:
    """Everything the 13-point stencil needs at one base point."""

    curve: CurveJet
    table: TransmissionTable
    g_plus: dict                # (m,n) band -> Poly2 (order-5 expansion)
    g_minus: dict
    h_plus: dict                # (m,n) in Lambda_3 -> Poly2
    h_minus: dict


def _composition_series(polys: dict, r_t, s_t, nterms: int, mono) -> dict:
    return {mn: poly2_compose_series(p, r_t, s_t, nterms, mono)
            for mn, p in polys.items()}


def _flux_series(polys: dict, a_poly: Poly2, r_t, s_t, nterms: int, mono) -> dict:
    """Series of grad(P)(r, s) . (s', -r') * a(r, s) for each polynomial."""
    rp = series_deriv(r_t)
    sp = series_deriv(s_t)
    a_series = poly2_compose_series(a_poly, r_t, s_t, nterms, mono)
    out = {}
    for mn, p in polys.items():
        px = poly2_compose_series(p.dx(), r_t, s_t, nterms, mono)
        py = poly2_compose_series(p.dy(), r_t, s_t, nterms, mono)
        flux = series_mul(px, sp, nterms) - series_mul(py, rp, nterms)
        out[mn] = series_mul(flux, a_series, nterms)
    return out


def build_transmission(curve: CurveJet, a_plus_jet: Jet2,
                       a_minus_jet: Jet2) -> InterfaceLocalModel:
    """Solve the matching conditions recursively in the order p = 1..5."""
    stacked = Jet2(np.stack([a_plus_jet.c, a_minus_jet.c]), a_plus_jet.order)
    g_all, h_all = build_gh_polynomials(build_reduction_table(stacked, M_IRR))
    g_p = {mn: Poly2(poly.c[0]) for mn, poly in g_all.items()}
    g_m = {mn: Poly2(poly.c[1]) for mn, poly in g_all.items()}
    h_p = {mn: Poly2(poly.c[0]) for mn, poly in h_all.items()}
    h_m = {mn: Poly2(poly.c[1]) for mn, poly in h_all.items()}

    r_t, s_t = curve.r_taylor.copy(), curve.s_taylor.copy()
    r_t[0] = 0.0
    s_t[0] = 0.0
    from .jets import monomial_series_table

    mono = monomial_series_table(r_t, s_t, M_IRR + 1, 6)

    gu_p = _composition_series(g_p, r_t, s_t, 6, mono)
    gu_m = _composition_series(g_m, r_t, s_t, 6, mono)
    hu_p = _composition_series(h_p, r_t, s_t, 6, mono)
    hu_m = _composition_series(h_m, r_t, s_t, 6, mono)
    mono5 = mono[..., :5]
    fg_p = _flux_series(g_p, a_plus_jet.as_poly(), r_t, s_t, 5, mono5)
    fg_m = _flux_series(g_m, a_minus_jet.as_poly(), r_t, s_t, 5, mono5)
    fh_p = _flux_series(h_p, a_plus_jet.as_poly(), r_t, s_t, 5, mono5)
    fh_m = _flux_series(h_m, a_minus_jet.as_poly(), r_t, s_t, 5, mono5)

    rows = np.zeros((N_UP, N_SYMBOLS))
    seed = np.zeros(N_SYMBOLS)
    seed[COL_UP[(0, 0)]] = 1.0
    seed[COL_G[0]] = -1.0
    rows[COL_UP[(0, 0)]] = seed

    speed2 = curve.r[1] ** 2 + curve.s[1] ** 2
    am0 = a_minus_jet.value

    for p in range(1, M_IRR + 1):
        mat = np.array(
            [[fg_m[(0, p)][p - 1], fg_m[(1, p - 1)][p - 1]],
             [gu_m[(0, p)][p], gu_m[(1, p - 1)][p]]]
        )
        det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
        expected = am0 * p * speed2**p / factorial(p) ** 2
        if not np.isclose(abs(det), expected, rtol=1e-8, atol=1e-300):
            raise StencilError(
                f"transmission determinant at order {p} deviates from the "
                f"structural value ({det:.6e} vs +-{expected:.6e})")

        rhs_flux = np.zeros(N_SYMBOLS)
        rhs_jump = np.zeros(N_SYMBOLS)
        for mn in BAND5:
            rhs_flux[COL_UP[mn]] += fg_p[mn][p - 1]
            rhs_jump[COL_UP[mn]] += gu_p[mn][p]
        for mn in F3:
            rhs_flux[COL_FP[mn]] += fh_p[mn][p - 1]
            rhs_flux[COL_FM[mn]] -= fh_m[mn][p - 1]
            rhs_jump[COL_FP[mn]] += hu_p[mn][p]
            rhs_jump[COL_FM[mn]] -= hu_m[mn][p]
        rhs_flux[COL_GG[p - 1]] -= 1.0
        rhs_jump[COL_G[p]] -= 1.0
        for mn in BAND5:
            if sum(mn) <= p - 1:
                rhs_flux -= fg_m[mn][p - 1] * rows[COL_UP[mn]]
                rhs_jump -= gu_m[mn][p] * rows[COL_UP[mn]]

        sol = np.linalg.solve(mat, np.vstack([rhs_flux, rhs_jump]))
        rows[COL_UP[(0, p)]] = sol[0]
        rows[COL_UP[(1, p - 1)]] = sol[1]

    return InterfaceLocalModel(curve=curve, table=TransmissionTable(rows),
                               g_plus=g_p, g_minus=g_m, h_plus=h_p, h_minus=h_m)
