"""Shared machinery for the recursive stencil solves.

Every stencil family in this package (9-point interior, 6-point edge, 4-point
corner, 13-point interface) is determined by the same kind of constraint: a
set of "row" polynomials Phi_r whose weighted offset sums must vanish through
a target order,

    sum_o C_o(h) * Phi_r(offset_o * h) = O(h^{T+1}),   C_o(h) = sum_p c_{o,p} h^p.

Expanding Phi_r(offset*h) in powers of h and collecting h^{lead_r + d} yields
one small linear system per degree d: the coefficient of the current degree
against the constant leading (homogeneous) parts of Phi_r, with all lower
degrees feeding the right-hand side.  The leading parts are offset-geometry
constants, so each degree has a fixed matrix A_d; uniqueness is restored by
tying designated free coefficients together and either pinning the remaining
one or maximizing it subject to the per-degree sign conditions (center >= 0,
off-center <= 0) and the next degree's row sum being nonnegative.

The constant systems are reduced once in exact rational arithmetic, giving a
per-degree solution operator that is then applied to batches of points with
plain matrix products.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np
from scipy.linalg import qr as scipy_qr, solve_triangular

from .errors import StencilError
from .jets import Poly2

RESID_TOL = 1e-9
SLACK = 1e-13
_TINY = 1e-11


def expand_poly_in_h(poly: Poly2, offsets: np.ndarray, nterms: int) -> np.ndarray:
    """phi[..., o, t] = coefficient of h^t in poly(vx_o * h, vy_o * h)."""
    offsets = np.asarray(offsets, dtype=float)
    n_off = offsets.shape[0]
    k = poly.size
    mon = np.empty((n_off, k, k))
    for o, (vx, vy) in enumerate(offsets):
        xp = vx ** np.arange(k)
        yp = vy ** np.arange(k)
        mon[o] = np.outer(xp, yp)
    batch = poly.c.shape[:-2]
    out = np.zeros(batch + (n_off, nterms))
    mm, nn = np.indices((k, k))
    for t in range(min(nterms, 2 * k - 1)):
        mask = (mm + nn) == t
        if not mask.any():
            continue
        out[..., t] = np.einsum("...pq,opq->...o", np.where(mask, poly.c, 0.0), mon)
    return out


def frac_leading_g(m: int, n: int, k: int, ell: int) -> Fraction:
    """Exact value of the homogeneous polynomial G_{m,n} at integer offsets."""
    total = Fraction(0)
    for j in range(n // 2 + 1):
        total += (
            Fraction((-1) ** j, factorial(m + 2 * j) * factorial(n - 2 * j))
            * Fraction(k) ** (m + 2 * j)
            * Fraction(ell) ** (n - 2 * j)
        )
    return total


def _solution_operator(rows: list[list[Fraction]]) -> np.ndarray:
    """Exact left-solve of a full-column-rank stacked system.

    Returns L (n_cols x n_rows) with x = L @ rhs; rows beyond the rank act as
    consistency conditions and are verified at runtime through residuals.
    """
    n_rows, n_cols = len(rows), len(rows[0])
    aug = [list(r) + [Fraction(int(i == j)) for j in range(n_rows)]
           for i, r in enumerate(rows)]
    prow = 0
    for c in range(n_cols):
        pr = next((i for i in range(prow, n_rows) if aug[i][c] != 0), None)
        if pr is None:
            raise StencilError("constant stencil system is rank deficient")
        aug[prow], aug[pr] = aug[pr], aug[prow]
        piv = aug[prow][c]
        aug[prow] = [v / piv for v in aug[prow]]
        for i in range(n_rows):
            if i != prow and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [vi - f * vp for vi, vp in zip(aug[i], aug[prow])]
        prow += 1
    return np.array(
        [[float(aug[i][n_cols + j]) for j in range(n_rows)] for i in range(n_cols)]
    )


@dataclass
class DegreeSolver:
    """Affine solution map C_d = Sb @ b_d + t * St for one degree."""

    Sb: np.ndarray           # (n_cols, n_rows_d)
    St: np.ndarray           # (n_cols,)
    n_rows: int
    fixed: float | None      # pin value; None means maximize the free parameter


def build_degree_solvers(a0: list[list[Fraction]], lead, T: int,
                         ties_for_degree, pin_col: int,
                         fixed_values: dict[int, float],
                         zero_degrees=()) -> list:
    """Exact per-degree solvers for a constant-matrix family.

    ``a0`` holds the leading values Phi_r(offset) as Fractions, ``lead`` the
    leading degree of each row.  ``ties_for_degree(d)`` returns extra exact
    constraint rows; the pin column is appended as the last stacked row.
    Degrees in ``zero_degrees`` get no solver (coefficients stay zero).
    """
    solvers: list = []
    for d in range(T + 1):
        if d in zero_degrees:
            solvers.append(None)
            continue
        rows_d = [r for r in range(len(a0)) if lead[r] + d <= T]
        stacked = [a0[r] for r in rows_d]
        stacked += [list(t) for t in ties_for_degree(d)]
        pin_row = [Fraction(0)] * len(a0[0])
        pin_row[pin_col] = Fraction(1)
        stacked.append(pin_row)
        L = _solution_operator(stacked)
        solvers.append(
            DegreeSolver(Sb=L[:, : len(rows_d)], St=L[:, -1],
                         n_rows=len(rows_d), fixed=fixed_values.get(d))
        )
    return solvers


@dataclass
class RecursionResult:
    coeffs: np.ndarray        # (..., n_off, T+1) displayed stencil coefficients
    raw: np.ndarray           # (..., n_cols, T+1) solver unknowns (hat/tilde split)
    monotone: np.ndarray      # (...,) sign/sum selection succeeded
    residual: float           # worst linear-system residual encountered


def run_constant_recursion(expansions: np.ndarray, lead, T: int, solvers,
                           combine: np.ndarray | None = None,
                           center: int = 0) -> RecursionResult:
    """Recursive degree-by-degree solve against precomputed exact operators.

    ``expansions`` has shape (..., R, O, T+1); ``combine`` maps raw unknowns
    to displayed stencil coefficients (corner hat+tilde), identity if None.
    The free parameter of each maximize-degree is chosen as the largest value
    keeping center coefficients >= 0, off-center <= 0, and the next degree's
    row sum >= 0 (the greedy selection that makes the scheme an M-matrix
    candidate for every h).
    """
    exp = expansions
    squeeze = exp.ndim == 3
    if squeeze:
        exp = exp[None]
    B, R, O, _ = exp.shape
    ncols = next(s for s in solvers if s is not None).Sb.shape[0]
    K = np.eye(ncols) if combine is None else np.asarray(combine, dtype=float)
    n_disp = K.shape[0]

    coeffs = np.zeros((B, ncols, T + 1))
    monotone = np.ones(B, dtype=bool)
    worst = 0.0
    sum_row = next((r for r in range(R) if lead[r] == 0), None)

    for d in range(T + 1):
        rows_d = [r for r in range(R) if lead[r] + d <= T]
        b = np.zeros((B, len(rows_d)))
        for i, r in enumerate(rows_d):
            for s in range(d):
                b[:, i] -= np.einsum("bo,bo->b", coeffs[:, :, s],
                                     exp[:, r, :, lead[r] + d - s])
        solver = solvers[d]
        if solver is None:
            # top degree left zero; rows must already balance
            worst = max(worst, float(np.abs(b).max(initial=0.0)))
            continue

        P = b @ solver.Sb.T
        V = solver.St
        if solver.fixed is not None:
            c_star = np.full(B, solver.fixed)
        else:
            Pc = P @ K.T
            Vc = K @ V
            upper = np.full(B, np.inf)
            lower = np.full(B, -np.inf)
            for o in range(n_disp):
                sgn = 1.0 if o == center else -1.0
                a = sgn * Vc[o]
                rhs = -sgn * Pc[:, o]
                if a > _TINY:
                    lower = np.maximum(lower, rhs / a)
                elif a < -_TINY:
                    upper = np.minimum(upper, rhs / a)
                else:
                    monotone &= -rhs >= -SLACK
            if d + 1 <= T and sum_row is not None:
                i0 = np.zeros(B)
                for s in range(d):
                    i0 -= np.einsum("bo,bo->b", coeffs[:, :, s],
                                    exp[:, sum_row, :, d + 1 - s])
                i0 -= np.einsum("bo,bo->b", P, exp[:, sum_row, :, 1])
                slope = -np.einsum("o,bo->b", V, exp[:, sum_row, :, 1])
                neg = slope < -_TINY
                pos = slope > _TINY
                flat = ~neg & ~pos
                up2 = np.where(neg, i0 / np.where(neg, -slope, 1.0), np.inf)
                lo2 = np.where(pos, -i0 / np.where(pos, slope, 1.0), -np.inf)
                upper = np.minimum(upper, up2)
                lower = np.maximum(lower, lo2)
                monotone &= ~flat | (i0 >= -SLACK)
            unbounded = ~np.isfinite(upper)
            c_star = np.where(unbounded, 0.0, upper)
            infeasible = lower > upper + SLACK
            monotone &= ~infeasible

        C_d = P + c_star[:, None] * V[None, :]
        coeffs[:, :, d] = C_d

        # residual of A_d C_d = b_d (includes stacked-row consistency)
        A_batch = np.stack([exp[:, r, :, lead[r]] for r in rows_d], axis=1)
        resid = np.einsum("bro,bo->br", A_batch, C_d) - b
        scale = max(1.0, float(np.abs(b).max(initial=0.0)))
        worst = max(worst, float(np.abs(resid).max(initial=0.0)) / scale)

    if worst > RESID_TOL:
        raise StencilError(f"stencil recursion residual {worst:.3e} exceeds {RESID_TOL}")

    disp = np.einsum("do,bot->bdt", K, coeffs)
    if squeeze:
        return RecursionResult(disp[0], coeffs[0], monotone[0], worst)
    return RecursionResult(disp, coeffs, monotone, worst)


def qr_basic_solution(A: np.ndarray, b: np.ndarray, rcond: float = 1e-11) -> np.ndarray:
    """Basic least-norm-style solution: non-pivot columns are set to zero."""
    q, r, piv = scipy_qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        raise StencilError("zero stencil system")
    rank = int(np.sum(diag > rcond * diag[0]))
    x = np.zeros(A.shape[1])
    y = solve_triangular(r[:rank, :rank], (q.T @ b)[:rank])
    x[piv[:rank]] = y
    return x


def _damped_solution(A: np.ndarray, b: np.ndarray,
                     penalty: np.ndarray | None) -> np.ndarray:
    """Solution of A x = b minimizing |penalty @ x| over the solution set.

    Falls back to the plain minimum-norm solution without a penalty.  The
    minimizer over the affine solution set is basis independent, which keeps
    the stencil deterministic and chart independent.
    """
    from scipy.linalg import null_space

    x = np.linalg.lstsq(A, b, rcond=1e-11)[0]
    if penalty is not None:
        N = null_space(A, rcond=1e-11)
        if N.size:
            t = np.linalg.lstsq(penalty @ N, -penalty @ x, rcond=1e-10)[0]
            x = x + N @ t
    return x


def run_basic_recursion(expansions: np.ndarray, lead, T: int,
                        normalize_col: int, zero_degrees=(),
                        h: float | None = None,
                        growth_cap: float = 2.0,
                        penalty: np.ndarray | None = None,
                        max_degree: int | None = None) -> tuple[np.ndarray, float]:
    """Recursive degree-by-degree solve for the interface stencil.

    Degree 0 is normalized by fixing the coefficient in ``normalize_col`` to
    one.  The remaining freedom of every degree is spent minimizing
    ``penalty @ C_d`` over the solution set (with the minus-side transported
    weights as the penalty this damps the pollution of the transmission
    terms); without a penalty the minimum-norm solution is taken.

    When ``h`` is given, the expansion is truncated as soon as a degree stops
    contracting (|C_d| h^d beyond ``growth_cap`` times the leading term):
    with the interface curvature under-resolved (kappa h > 1) the corrections
    grow like kappa^d and the h-polynomial diverges, so keeping the degrees
    that still contract preserves a bounded, lower-order row instead of an
    exploding one.  Fully resolved geometry never trips the cap.
    """
    R, O, _ = expansions.shape
    coeffs = np.zeros((O, T + 1))
    worst = 0.0
    for d in range(T + 1):
        if max_degree is not None and d > max_degree:
            break
        rows_d = [r for r in range(R) if lead[r] + d <= T]
        A = np.stack([expansions[r, :, lead[r]] for r in rows_d])
        b = np.zeros(len(rows_d))
        for i, r in enumerate(rows_d):
            for s in range(d):
                b[i] -= coeffs[:, s] @ expansions[r, :, lead[r] + d - s]
        if d in zero_degrees:
            worst = max(worst, float(np.abs(b).max(initial=0.0)))
            continue
        if d == 0:
            keep = [o for o in range(O) if o != normalize_col]
            pen = None if penalty is None else penalty[:, keep]
            x = np.zeros(O)
            x[normalize_col] = 1.0
            x[keep] = _damped_solution(A[:, keep], -A[:, normalize_col], pen)
        else:
            x = _damped_solution(A, b, penalty)
            if h is not None:
                lead_scale = max(float(np.abs(coeffs[:, 0]).max()), 1e-300)
                if float(np.abs(x).max()) * h**d > growth_cap * lead_scale:
                    break
        coeffs[:, d] = x
        scale = max(1.0, float(np.abs(b).max(initial=0.0)))
        worst = max(worst, float(np.abs(A @ x - b).max(initial=0.0)) / scale)
    if worst > RESID_TOL:
        raise StencilError(f"stencil recursion residual {worst:.3e} exceeds {RESID_TOL}")
    return coeffs, worst


# ----------------------------------------------------------------------------
# sign / sum audit
# ----------------------------------------------------------------------------

@dataclass
class MMatrixReport:
    """Outcome of the per-degree sign and sum audit of stencil coefficients."""

    passed: bool
    sign_violations: list      # (offset index, degree, value)
    sum_violations: list       # (degree, value)
    degree_sums: np.ndarray


def check_sign_sum(coeffs: np.ndarray, center: int, tol: float = 1e-12) -> MMatrixReport:
    """Audit c[o, p]: center >= 0 (> 0 at p=0), off-center <= 0, sums >= 0."""
    coeffs = np.asarray(coeffs)
    n_off, nterms = coeffs.shape
    sign_viol = []
    for o in range(n_off):
        for p in range(nterms):
            v = coeffs[o, p]
            if o == center:
                bad = v < -tol if p > 0 else v <= tol
            else:
                bad = v > tol
            if bad:
                sign_viol.append((o, p, float(v)))
    sums = coeffs.sum(axis=0)
    sum_viol = [(p, float(s)) for p, s in enumerate(sums) if s < -tol]
    return MMatrixReport(
        passed=not sign_viol and not sum_viol,
        sign_violations=sign_viol,
        sum_violations=sum_viol,
        degree_sums=sums,
    )


def stencil_values(coeffs: np.ndarray, h: float) -> np.ndarray:
    """Evaluate C_o(h) = sum_p c[o, p] h^p (batched over leading axes)."""
    nterms = coeffs.shape[-1]
    return coeffs @ (h ** np.arange(nterms))
