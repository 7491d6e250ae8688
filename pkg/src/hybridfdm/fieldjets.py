"""Estimate the jets a stencil needs from point values of the data fields.

These helpers bind the sampling recipes to the MLS estimator.  All sample
lattices are anchor-relative and translation-invariant, so one operator
matrix per mesh size serves every anchor of a class; estimating the jets for
a whole batch of interior points is then a single matrix product against the
sampled values.
"""

from __future__ import annotations

import numpy as np

from .indexsets import lambda_full
from .jets import Jet2
from .mls import MlsProblem, mls_operator, sampling_recipe
from .stencil_boundary import BoundaryFrame


def regular_jets(a_field, f_field, anchors: np.ndarray, h: float):
    """Batched interior jets: a-jet of order 6 and f derivatives on Lambda_5.

    ``anchors`` is (B, 2); the fields must accept array arguments.
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    rec = sampling_recipe("regular-interior", h)
    op_a = mls_operator(rec.problem(6), lambda_full(6))
    op_f = mls_operator(rec.problem(5), lambda_full(5))
    pts = anchors[:, None, :] + rec.samples[None, :, :]
    va = np.asarray(a_field(pts[..., 0], pts[..., 1]), dtype=float)
    vf = np.asarray(f_field(pts[..., 0], pts[..., 1]), dtype=float)
    a_der = va @ op_a.T
    f_der = vf @ op_f.T
    jet = Jet2.from_derivatives(
        {mn: a_der[:, i] for i, mn in enumerate(lambda_full(6))}, 6)
    return jet, f_der


def edge_jets(a_field, f_field, alpha_field, g_field, anchors: np.ndarray,
              frame: BoundaryFrame, h: float):
    """Batched canonical-frame jets for a Robin side.

    Returns (a-jet order 5, alpha derivatives (B, 6), f derivatives (B, 15),
    g1 derivatives (B, 6)).  ``alpha_field`` and ``g_field`` take physical
    (x, y) points on the side.
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    rec = sampling_recipe("edge-boundary", h)
    op_a = mls_operator(rec.problem(5), lambda_full(5))
    op_f = mls_operator(rec.problem(4), lambda_full(4))
    xh, yh = rec.samples[:, 0], rec.samples[:, 1]
    px, py = frame.point((anchors[:, 0:1], anchors[:, 1:2]), xh[None, :], yh[None, :])
    va = np.asarray(a_field(px, py), dtype=float)
    vf = np.asarray(f_field(px, py), dtype=float)
    a_der = va @ op_a.T
    f_der = vf @ op_f.T
    jet = Jet2.from_derivatives(
        {mn: a_der[:, i] for i, mn in enumerate(lambda_full(5))}, 5)

    ts = np.arange(-8, 9) * (h / 8)
    op1 = mls_operator(MlsProblem(ts, np.zeros(1), np.zeros(1), 5, h),
                       list(range(6)))
    lx, ly = frame.line((anchors[:, 0:1], anchors[:, 1:2]), ts[None, :])
    lx, ly = np.broadcast_arrays(lx + 0.0 * ly, ly + 0.0 * lx)
    alpha_der = (np.asarray(alpha_field(lx, ly), dtype=float)
                 * np.ones_like(lx)) @ op1.T
    g_der = (np.asarray(g_field(lx, ly), dtype=float)
             * np.ones_like(lx)) @ op1.T
    return jet, alpha_der, f_der, g_der


def irregular_jets(a_plus, a_minus, f_plus, f_minus, psi, anchor, base,
                   h: float):
    """One-sided jets at an interface base point.

    Samples a lattice of spacing h/32 around the grid node, splits it by the
    sign of psi (points on the curve go minus), and fits each side separately
    with the basis centered on the node and derivatives taken at the base
    point.  On coarse grids one side can clip the standard lattice (half
    width h) in a thin sliver; the lattice extent is then widened to 2h,
    which stays within the enlarged-box contract of the field callables.
    Returns (a+ jet, a- jet, f+ derivatives, f- derivatives) with the jets of
    order 4 and the source derivatives over Lambda_3.
    """
    from .errors import MlsError

    anchor = np.asarray(anchor, dtype=float)
    target = np.asarray(base, dtype=float) - anchor

    last_exc = None
    for halfwidth in (32, 64):
        step = h / 32.0
        offs = np.arange(-halfwidth, halfwidth + 1) * step
        gx, gy = np.meshgrid(offs, offs, indexing="ij")
        samples = np.column_stack([gx.ravel(), gy.ravel()])
        pts = anchor[None, :] + samples
        side = np.asarray(psi(pts[:, 0], pts[:, 1]), dtype=float)
        masks = {"+": side > 0.0, "-": side <= 0.0}
        if min(masks["+"].sum(), masks["-"].sum()) < 30 and halfwidth < 64:
            continue

        def fit(field, mask, degree, reqs):
            prob = MlsProblem(samples[mask], target, np.zeros(2), degree, h)
            op = mls_operator(prob, reqs)
            vals = np.asarray(field(pts[mask, 0], pts[mask, 1]), dtype=float)
            return op @ vals

        try:
            ap = fit(a_plus, masks["+"], 4, lambda_full(4))
            am = fit(a_minus, masks["-"], 4, lambda_full(4))
            fp = fit(f_plus, masks["+"], 3, lambda_full(3))
            fm = fit(f_minus, masks["-"], 3, lambda_full(3))
        except MlsError as exc:
            last_exc = exc
            continue
        jet_p = Jet2.from_derivatives(
            {mn: ap[i] for i, mn in enumerate(lambda_full(4))}, 4, tuple(base))
        jet_m = Jet2.from_derivatives(
            {mn: am[i] for i, mn in enumerate(lambda_full(4))}, 4, tuple(base))
        return jet_p, jet_m, fp, fm
    raise MlsError(
        f"one-sided sample set near {tuple(np.round(anchor, 6))} stays "
        f"degenerate after widening: {last_exc}")


def corner_jets(a_field, f_field, alpha_field, g1_field, beta_field, g3_field,
                anchor, frame: BoundaryFrame, h: float):
    """Canonical-frame jets for a Robin-Robin corner (single anchor)."""
    anchor = np.asarray(anchor, dtype=float)
    rec = sampling_recipe("corner-boundary", h)
    op_a = mls_operator(rec.problem(5), lambda_full(5))
    op_f = mls_operator(rec.problem(4), lambda_full(4))
    px, py = frame.point(anchor, rec.samples[:, 0], rec.samples[:, 1])
    a_der = np.asarray(a_field(px, py), dtype=float) @ op_a.T
    f_der = np.asarray(f_field(px, py), dtype=float) @ op_f.T
    jet = Jet2.from_derivatives(
        {mn: a_der[i] for i, mn in enumerate(lambda_full(5))}, 5)

    ts = np.arange(0, 17) * (h / 16)
    op1 = mls_operator(MlsProblem(ts, np.zeros(1), np.zeros(1), 5, h),
                       list(range(6)))
    ones = np.ones_like(ts)
    ax, ay = frame.line(anchor, ts)
    alpha_der = op1 @ (np.asarray(alpha_field(ax, ay), dtype=float) * ones)
    g1_der = op1 @ (np.asarray(g1_field(ax, ay), dtype=float) * ones)
    bx, by = frame.line2(anchor, ts)
    beta_der = op1 @ (np.asarray(beta_field(bx, by), dtype=float) * ones)
    g3_der = op1 @ (np.asarray(g3_field(bx, by), dtype=float) * ones)
    return jet, alpha_der, f_der, g1_der, beta_der, g3_der
