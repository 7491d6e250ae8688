"""Fifth-order 13-point stencil at interface points.

Offsets on the plus side contribute through their own expansion polynomials;
offsets on the minus side are first transported to plus-side band derivatives
through the transmission table, so each constraint row pairs the plus
polynomial G+_{m,n} against the T-weighted combination of minus polynomials.
Degrees are solved recursively with the center coefficient normalized to one
at degree zero, remaining free parameters pinned to zero (basic solutions),
and the top degree left empty.

The source and jump weights on the right-hand side follow the same split:
direct H-polynomial sums per side plus transmission-transported terms
through the minus-side band values I-.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import IRREGULAR_OFFSETS
from .stencil_core import expand_poly_in_h, run_basic_recursion, stencil_values
from .stencil_regular import StencilPoly
from .transmission import BAND5, COL_UP, F3, InterfaceLocalModel

CENTER13 = IRREGULAR_OFFSETS.index((0, 0))


@dataclass
class IrregularSystem:
    expansions: np.ndarray       # (11, 13, 6)
    lead: tuple
    minus_mask: np.ndarray       # (13,) True where the offset sits in minus
    model: InterfaceLocalModel

    def a_matrix(self, d: int) -> np.ndarray:
        rows = [r for r, t in enumerate(self.lead) if t + d <= 5]
        return np.stack([self.expansions[r, :, self.lead[r]] for r in rows])


def assemble_irregular_system(model: InterfaceLocalModel,
                              minus_mask: np.ndarray) -> IrregularSystem:
    curve = model.curve
    vw = np.array([(curve.v0 + k, curve.w0 + ell)
                   for (k, ell) in IRREGULAR_OFFSETS])
    gp_stack = np.stack([model.g_plus[mn].c for mn in BAND5])
    gm_stack = np.stack([model.g_minus[mn].c for mn in BAND5])
    ublock = model.table.u_block()
    phi_minus = np.einsum("ij,ipq->jpq", ublock, gm_stack)
    from .jets import Poly2

    exp_p = expand_poly_in_h(Poly2(gp_stack), vw, 6)
    exp_m = expand_poly_in_h(Poly2(phi_minus), vw, 6)
    exp = np.where(minus_mask[None, :, None], exp_m, exp_p)
    lead = [sum(mn) for mn in BAND5]
    return IrregularSystem(expansions=exp, lead=tuple(lead),
                           minus_mask=np.asarray(minus_mask, dtype=bool),
                           model=model)


KAPPA_CRIT = 0.75


def solve_irregular_stencil(system: IrregularSystem,
                            h: float | None = None) -> StencilPoly:
    """13-point stencil coefficients from the recursive solves.

    Resolved geometry gets the full fifth-order recursion with minimum-norm
    free parameters (the unique minimizer is basis independent, so the result
    is deterministic and chart independent).  Where the curve is
    under-resolved -- curvature radius below ``h / KAPPA_CRIT`` -- the
    transmission blocks grow like powers of kappa and every correction degree
    injects more pollution than it removes; those rows are reduced to the
    leading-degree stencil whose remaining freedom minimizes the minus-side
    transported band weights, which is the best bounded row available at that
    mesh.  Passing ``h`` enables this detection plus a growth cap backstop.
    """
    model = system.model
    curve = model.curve

    under_resolved = False
    if h is not None:
        speed2 = curve.r[1] ** 2 + curve.s[1] ** 2
        if speed2 > 0:
            kappa = abs(curve.r[1] * curve.s[2] - curve.r[2] * curve.s[1]) \
                / speed2**1.5
            under_resolved = kappa * h > KAPPA_CRIT

    if under_resolved:
        href = h
        vw = np.array([(curve.v0 + k, curve.w0 + ell)
                       for (k, ell) in IRREGULAR_OFFSETS])
        from .jets import Poly2

        gm = Poly2(np.stack([model.g_minus[mn].c for mn in BAND5]))
        gvals = gm.eval(vw[:, 0] * href, vw[:, 1] * href)
        penalty = np.where(system.minus_mask[None, :], gvals, 0.0)
        coeffs, _ = run_basic_recursion(
            system.expansions, system.lead, 5, normalize_col=CENTER13,
            penalty=penalty, max_degree=0)
        return StencilPoly(IRREGULAR_OFFSETS, coeffs, scale=1)

    coeffs, _ = run_basic_recursion(system.expansions, system.lead, 5,
                                    normalize_col=CENTER13, zero_degrees=(5,),
                                    h=h)
    return StencilPoly(IRREGULAR_OFFSETS, coeffs, scale=1)


@dataclass
class IrregularWeights:
    """Right-hand-side weights of the 13-point row (h^-1 already applied)."""

    j_plus: np.ndarray          # (10,) weights of f+^(m,n), Lambda_3
    j_minus: np.ndarray
    j_g: np.ndarray             # (6,) weights of g^(p)
    j_gg: np.ndarray            # (5,) weights of gGamma^(p)


def irregular_rhs_weights(stencil: StencilPoly, system: IrregularSystem,
                          h: float) -> IrregularWeights:
    model = system.model
    curve = model.curve
    ch = stencil.values(h)
    vw = np.array([(curve.v0 + k, curve.w0 + ell)
                   for (k, ell) in IRREGULAR_OFFSETS])
    xo, yo = vw[:, 0] * h, vw[:, 1] * h
    minus = system.minus_mask
    plus = ~minus

    from .jets import Poly2

    gm = Poly2(np.stack([model.g_minus[mn].c for mn in BAND5]))
    hp = Poly2(np.stack([model.h_plus[mn].c for mn in F3]))
    hm = Poly2(np.stack([model.h_minus[mn].c for mn in F3]))
    i_minus = gm.eval(xo[minus], yo[minus]) @ ch[minus]
    j_plus = hp.eval(xo[plus], yo[plus]) @ ch[plus]
    j_minus = hm.eval(xo[minus], yo[minus]) @ ch[minus]
    j_plus = j_plus + i_minus @ model.table.f_block("+")
    j_minus = j_minus + i_minus @ model.table.f_block("-")
    j_g = i_minus @ model.table.g_block()
    j_gg = i_minus @ model.table.gg_block()
    return IrregularWeights(j_plus=j_plus / h, j_minus=j_minus / h,
                            j_g=j_g / h, j_gg=j_gg / h)


def irregular_rhs_value(weights: IrregularWeights, f_plus_der: np.ndarray,
                        f_minus_der: np.ndarray, curve) -> float:
    """Contract the weights with the estimated data derivatives."""
    return float(
        weights.j_plus @ f_plus_der + weights.j_minus @ f_minus_der
        + weights.j_g @ curve.g + weights.j_gg @ curve.gg
    )
