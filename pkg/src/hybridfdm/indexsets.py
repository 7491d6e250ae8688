"""Multi-index sets for truncated bivariate Taylor tables.

The whole discretization is organized around three families of index sets:
the full triangle ``Lambda_N = {(m, n) : m + n <= N}``, its first band
``Lambda1_N = {(m, n) in Lambda_N : m in {0, 1}}`` (the derivatives that
survive the PDE reduction), and the complement ``Lambda2_N``.

Canonical ordering: ascending total degree, and within a degree ``t`` the
index ``(0, t)`` precedes ``(1, t - 1)`` (and generally indices are sorted by
first component).  This ordering fixes the row order of all constant system
matrices used by the stencil solvers.
"""

from __future__ import annotations

from functools import lru_cache


@lru_cache(maxsize=None)
def lambda_full(order: int) -> tuple[tuple[int, int], ...]:
    """All (m, n) with m + n <= order, canonically ordered."""
    if order < 0:
        return ()
    out = []
    for t in range(order + 1):
        for m in range(t + 1):
            out.append((m, t - m))
    return tuple(out)


@lru_cache(maxsize=None)
def lambda_band(order: int) -> tuple[tuple[int, int], ...]:
    """First band: (m, n) with m in {0, 1} and m + n <= order."""
    return tuple(mn for mn in lambda_full(order) if mn[0] <= 1)


@lru_cache(maxsize=None)
def lambda_complement(order: int) -> tuple[tuple[int, int], ...]:
    """Second band: Lambda \\ Lambda^1."""
    return tuple(mn for mn in lambda_full(order) if mn[0] > 1)


def lambda_sets(order: int):
    """Return (Lambda, Lambda^1, Lambda^2) for the given order."""
    return lambda_full(order), lambda_band(order), lambda_complement(order)


@lru_cache(maxsize=None)
def band_index(order: int) -> dict[tuple[int, int], int]:
    """Position of each first-band index in the canonical ordering."""
    return {mn: i for i, mn in enumerate(lambda_band(order))}


@lru_cache(maxsize=None)
def full_index(order: int) -> dict[tuple[int, int], int]:
    return {mn: i for i, mn in enumerate(lambda_full(order))}
