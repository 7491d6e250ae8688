"""Moving least squares estimation of high-order derivatives from values.

Given samples Z = (z_1..z_K), a target z*, and a total-degree bound M, the
derivative of a function at z* is read off a weighted polynomial fit

    f^(w)(z*) = (f(z_1)..f(z_K)) D^-1 E (E^T D^-1 E)^-1 (p_1^(w)(z*)..)^T

with D = 2 diag(exp(|z_k - z*|^2 / h^2)) and E the basis Vandermonde.  The
basis is centered at a designated point (usually z* itself, but the stencil
at interface points centers on the grid node while targeting the projected
base point) and scaled by the sample radius, and the normal equations are
solved through a pivot-checked QR factorization rather than the explicit
inverse.  Everything reduces to a single (n_requests x K) matrix that can be
applied to many value vectors at once; for translation-invariant sample
lattices that matrix is built once per mesh size.

Sampling recipes package the concrete lattices used by each stencil family:
a 9x9 lattice of spacing h/4 at interior points (degrees 6/5 for a/f), a
65x65 one-sided lattice of spacing h/32 at interface points (4/3), eleven
abscissae of spacing h/16 along the curve parameter (6 for the curve and the
jump, 5 for the flux jump), a 9x17 lattice of spacing h/8 at edges (5/4) and
a one-sided 17x17 lattice of spacing h/16 at corners (5/4).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import MlsError
from .indexsets import lambda_full

COND_LIMIT = 1e12


@dataclass
class MlsProblem:
    """Sample geometry for one fit.  Points are relative to the anchor."""

    samples: np.ndarray          # (K,) for 1D, (K, 2) for 2D, anchor-relative
    target: np.ndarray           # anchor-relative coordinates of z*
    center: np.ndarray           # anchor-relative basis center (x*, y*)
    degree: int                  # total degree M of the basis
    h: float                     # weight length scale (the grid size)

    @property
    def dim(self) -> int:
        return 1 if self.samples.ndim == 1 else self.samples.shape[-1]


def _basis_exponents(degree: int, dim: int):
    if dim == 1:
        return [(m,) for m in range(degree + 1)]
    return [tuple(mn) for mn in lambda_full(degree)]


def mls_operator(problem: MlsProblem, requests) -> np.ndarray:
    """Matrix A with derivs = A @ values; one row per requested multi-index."""
    dim = problem.dim
    z = np.atleast_2d(problem.samples.astype(float))
    if dim == 1:
        z = problem.samples.astype(float)[:, None]
    target = np.atleast_1d(np.asarray(problem.target, dtype=float))
    center = np.atleast_1d(np.asarray(problem.center, dtype=float))
    K = z.shape[0]
    exps = _basis_exponents(problem.degree, dim)
    J = len(exps)
    if K < J:
        raise MlsError(f"{K} samples cannot determine a degree-{problem.degree} fit "
                       f"({J} coefficients)")

    rel = z - center
    scale = np.max(np.linalg.norm(rel, axis=1))
    if scale == 0.0:
        scale = problem.h
    u = rel / scale

    pows = [np.power.outer(u[:, d], np.arange(problem.degree + 1))
            for d in range(dim)]
    if dim == 1:
        E = pows[0][:, [a[0] for a in exps]]
    else:
        E = (pows[0][:, [a[0] for a in exps]]
             * pows[1][:, [a[1] for a in exps]])

    r2 = np.sum((z - target) ** 2, axis=1)
    sqrt_w = np.exp(-0.5 * r2 / problem.h**2) / np.sqrt(2.0)

    q, r = np.linalg.qr(sqrt_w[:, None] * E)
    diag = np.abs(np.diag(r))
    if diag.min() == 0.0 or diag.max() / diag.min() > COND_LIMIT:
        raise MlsError("rank-deficient moving least squares system "
                       f"(condition {diag.max() / max(diag.min(), 1e-300):.2e})")
    from scipy.linalg import solve_triangular

    coef_of_values = solve_triangular(r, q.T * sqrt_w[None, :])  # (J, K)

    tgt = (target - center) / scale
    D = np.zeros((len(requests), J))
    for i, omega in enumerate(requests):
        om = (omega,) if np.isscalar(omega) else tuple(omega)
        if sum(om) > problem.degree:
            raise MlsError(f"derivative order {om} exceeds basis degree {problem.degree}")
        for j, alpha in enumerate(exps):
            if any(a < o for a, o in zip(alpha, om)):
                continue
            val = 1.0
            for d, (a, o) in enumerate(zip(alpha, om)):
                val *= factorial(a) / factorial(a - o) * tgt[d] ** (a - o) / scale**o
            D[i, j] = val
    return D @ coef_of_values


def mls_estimate(problem: MlsProblem, values, requests) -> dict:
    """Estimated derivatives {omega: value}; values aligned with samples."""
    op = mls_operator(problem, requests)
    out = op @ np.asarray(values, dtype=float)
    keys = [(w,) if np.isscalar(w) else tuple(w) for w in requests]
    return dict(zip(keys, out))


# ----------------------------------------------------------------------------
# sampling recipes (anchor-relative lattices)
# ----------------------------------------------------------------------------

@dataclass
class SamplingRecipe:
    """Lattice and basis degrees prescribed for one stencil context."""

    context: str
    samples: np.ndarray        # anchor-relative offsets, (K,) or (K, 2)
    target: np.ndarray
    center: np.ndarray
    degree_primary: int        # basis degree for a (2D) or r,s,g (1D)
    degree_secondary: int      # basis degree for f (2D) or g_Gamma (1D)

    def problem(self, degree: int) -> MlsProblem:
        return MlsProblem(self.samples, self.target, self.center, degree, self._h)

    _h: float = 0.0


def _lattice(step: float, nx_lo, nx_hi, ny_lo, ny_hi) -> np.ndarray:
    xs = np.arange(nx_lo, nx_hi + 1) * step
    ys = np.arange(ny_lo, ny_hi + 1) * step
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def sampling_recipe(context: str, h: float, target_offset=None) -> SamplingRecipe:
    """Anchor-relative sample lattice for a stencil context.

    ``target_offset`` (2-vector) shifts the evaluation point off the anchor;
    only the interface context uses it (grid node anchor, on-curve target).
    """
    zero2 = np.zeros(2)
    if context == "regular-interior":
        rec = SamplingRecipe(context, _lattice(h / 4, -4, 4, -4, 4), zero2, zero2, 6, 5)
    elif context == "irregular-interface":
        tgt = zero2 if target_offset is None else np.asarray(target_offset, float)
        rec = SamplingRecipe(context, _lattice(h / 32, -32, 32, -32, 32), tgt, zero2, 4, 3)
    elif context in ("curve-1d-graph", "curve-1d-angle"):
        ts = np.arange(-5, 6) * (h / 16)
        rec = SamplingRecipe(context, ts, np.zeros(1), np.zeros(1), 6, 5)
    elif context == "edge-boundary":
        rec = SamplingRecipe(context, _lattice(h / 8, 0, 8, -8, 8), zero2, zero2, 5, 4)
    elif context == "corner-boundary":
        rec = SamplingRecipe(context, _lattice(h / 16, 0, 16, 0, 16), zero2, zero2, 5, 4)
    else:
        raise ValueError(f"unknown sampling context {context!r}")
    rec._h = h
    return rec
