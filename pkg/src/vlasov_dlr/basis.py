"""Fixed velocity basis construction and orthonormalization kernels.

All orthonormality here is with respect to a diagonally weighted inner
product (f0v*dv in velocity, dx in space).  One QR kernel serves both: rows
are scaled by the square root of the weights, factorized, and unscaled.

Rank-deficient input columns are replaced by deterministic fallback vectors
(cosine modes) re-orthonormalized against the other columns, so downstream
code always receives a full orthonormal set and a report of what was
replaced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .grids import SpatialGrid, VelocityGrid

# Relative size of |R_jj| below which a column counts as rank-deficient.
DEFICIENCY_TOL = 1e-12


class RankDeficiencyError(RuntimeError):
    """No fallback direction could be found to complete a basis."""


@dataclass(frozen=True)
class OrthoResult:
    """Factorization A = Q R with weighted-orthonormal Q.

    `replaced` lists input columns that were numerically rank-deficient and
    whose Q column is a fallback direction (their R diagonal is zero).
    """

    Q: np.ndarray
    R: np.ndarray
    replaced: tuple[int, ...]


@dataclass(frozen=True)
class FixedBasis:
    """The m conserved velocity directions (1, v, v^2-1 after Gram-Schmidt).

    norm_1, norm_v, norm_v2 are the discrete norms measured before each
    column was normalized; v2_coeffs holds the exact discrete expansion
    coefficients <v^2, U_a>_v used by the moment fast paths (they differ
    from the analytic constants by the velocity-domain truncation tail).
    """

    m: int
    U: np.ndarray
    norm_1: float
    norm_v: float
    norm_v2: float
    v2_coeffs: np.ndarray

    def c2_fixed_row_values(self) -> list[tuple[int, float]]:
        """Exact values of the advection coefficient rows for fixed columns.

        Row a of c2 is e_j-sparse: (column index, value) per fixed row, in
        row order.  Row 0 is identically zero.
        """
        rows: list[tuple[int, float]] = []
        if self.m >= 1:
            rows.append((-1, 0.0))
        if self.m >= 2:
            rows.append((0, -self.norm_1 / self.norm_v))
        if self.m >= 3:
            rows.append((1, -2.0 * self.norm_v / self.norm_v2))
        return rows


def velocity_fallbacks(grid: VelocityGrid) -> Iterator[np.ndarray]:
    """Deterministic fallback directions in v: Chebyshev polynomials T_k."""
    t = (2.0 * grid.v - (grid.vmin + grid.vmax)) / (grid.vmax - grid.vmin)
    t = np.clip(t, -1.0, 1.0)
    theta = np.arccos(t)
    k = 0
    while True:
        yield np.cos(k * theta)
        k += 1


def spatial_fallbacks(grid: SpatialGrid) -> Iterator[np.ndarray]:
    """Deterministic fallback directions in x: Fourier modes."""
    yield np.ones(grid.nx)
    k = 1
    while True:
        arg = 2.0 * np.pi * k * grid.x / grid.length
        yield np.cos(arg)
        yield np.sin(arg)
        k += 1


def _sqrt_weights(grid) -> np.ndarray:
    if isinstance(grid, VelocityGrid):
        return np.sqrt(grid.weights)
    return np.full(grid.nx, np.sqrt(grid.dx))


def _fix_signs(Q: np.ndarray, R: np.ndarray | None, sw: np.ndarray) -> None:
    """Make the largest-magnitude entry of each unscaled Q column positive."""
    if Q.shape[1] == 0:
        return
    unscaled = Q / sw[:, None]
    idx = np.argmax(np.abs(unscaled), axis=0)
    signs = np.sign(unscaled[idx, np.arange(Q.shape[1])])
    signs[signs == 0] = 1.0
    Q *= signs[None, :]
    if R is not None:
        R *= signs[:, None]


def _mgs_orthonormalize(
    B: np.ndarray,
    fallback: Iterator[np.ndarray] | None,
    sw: np.ndarray,
    tol: float,
) -> OrthoResult:
    """Modified Gram-Schmidt (two passes) in the scaled space, with fallback
    replacement of rank-deficient columns."""
    n, k = B.shape
    Q = np.zeros((n, k))
    R = np.zeros((k, k))
    replaced: list[int] = []
    for j in range(k):
        w = B[:, j].copy()
        scale = np.linalg.norm(w)
        for _ in range(2):
            for i in range(j):
                h = Q[:, i] @ w
                R[i, j] += h
                w -= h * Q[:, i]
        res = np.linalg.norm(w)
        if scale == 0.0 or res <= tol * scale:
            replaced.append(j)
            w = _next_fallback(Q[:, :j], fallback, sw)
            res = 1.0
            R[j, j] = 0.0
        else:
            R[j, j] = res
        q = w / res
        # polish the normalized vector: projections removed before
        # normalization get re-amplified by 1/res when res << scale
        for i in range(j):
            q -= (Q[:, i] @ q) * Q[:, i]
        qn = np.linalg.norm(q)
        Q[:, j] = q / qn if qn > 0 else q
    _fix_signs(Q, R, sw)
    return OrthoResult(Q, R, tuple(replaced))


def _next_fallback(
    Qprev: np.ndarray,
    fallback: Iterator[np.ndarray] | None,
    sw: np.ndarray,
    max_tries: int = 512,
) -> np.ndarray:
    """Return a unit vector orthogonal to Qprev built from fallback candidates."""
    if fallback is None:
        raise RankDeficiencyError("rank-deficient column and no fallback supplied")
    for _ in range(max_tries):
        g = next(fallback) * sw
        gn = np.linalg.norm(g)
        if gn == 0.0:
            continue
        w = g.copy()
        for _ in range(2):
            if Qprev.shape[1]:
                w -= Qprev @ (Qprev.T @ w)
        res = np.linalg.norm(w)
        if res > 1e-6 * gn:
            w = w / res
            if Qprev.shape[1]:
                w -= Qprev @ (Qprev.T @ w)
                w /= np.linalg.norm(w)
            return w
    raise RankDeficiencyError(
        "fallback candidates exhausted while completing an orthonormal basis"
    )


def _orthonormalize(grid, columns: np.ndarray, fallback_factory: Callable) -> OrthoResult:
    columns = np.asarray(columns, dtype=float)
    if columns.ndim == 1:
        columns = columns[:, None]
    if columns.ndim != 2:
        raise ValueError("expected a 2d array of columns")
    n, k = columns.shape
    if k > n:
        raise ValueError(f"cannot orthonormalize {k} columns in dimension {n}")
    sw = _sqrt_weights(grid)
    if n != len(sw):
        raise ValueError(f"columns have {n} rows, grid has {len(sw)}")
    B = columns * sw[:, None]
    # Fast path: Householder QR, falling back to MGS only when a diagonal
    # entry of R reveals a numerically dependent column.
    Q, R = np.linalg.qr(B)
    norms = np.linalg.norm(B, axis=0)
    diag = np.abs(np.diagonal(R))
    if np.all(diag > DEFICIENCY_TOL * norms) and np.all(norms > 0):
        _fix_signs(Q, R, sw)
        return OrthoResult(Q / sw[:, None], R, ())
    result = _mgs_orthonormalize(B, fallback_factory(), sw, DEFICIENCY_TOL)
    return OrthoResult(result.Q / sw[:, None], result.R, result.replaced)


def weighted_orthonormalize(grid: VelocityGrid, columns: np.ndarray) -> OrthoResult:
    """QR in the f0v-weighted inner product over the velocity grid."""
    return _orthonormalize(grid, columns, lambda: velocity_fallbacks(grid))


def unweighted_orthonormalize(grid: SpatialGrid, columns: np.ndarray) -> OrthoResult:
    """QR in the dx-weighted Euclidean inner product over the spatial grid."""
    return _orthonormalize(grid, columns, lambda: spatial_fallbacks(grid))


def extend_basis(grid, Q0: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Append the independent content of `candidates` to the orthonormal Q0.

    Q0 is returned bit-identical as the leading block.  Candidate columns
    whose residual against the running basis is below the deficiency
    threshold are dropped: they contribute nothing to the span, and near a
    steady state (or at full rank) there may be no room to replace them.

    Dropping works on whole input columns, iterating QR on the survivors:
    a Q column emerging after a degenerate input column can mix its novel
    direction with roundoff junk, so the factorization is redone until the
    surviving columns are all clean.
    """
    sw = _sqrt_weights(grid)
    Q0s = Q0 * sw[:, None]
    C = np.asarray(candidates, dtype=float) * sw[:, None]
    if C.shape[1] == 0:
        return Q0
    norms = np.linalg.norm(C, axis=0)
    floor = DEFICIENCY_TOL * 1e-3 * np.max(norms, initial=0.0)
    for _ in range(2):
        if Q0s.shape[1]:
            C = C - Q0s @ (Q0s.T @ C)
    n = C.shape[0]
    while True:
        Qc, Rc = np.linalg.qr(C)
        assessed = Qc.shape[1]
        diag = np.abs(np.diagonal(Rc))
        head = norms[:assessed]
        keep = (head > 0) & (diag > DEFICIENCY_TOL * head) & (diag > floor)
        if np.all(keep):
            if C.shape[1] <= n:
                break
            # more survivors than dimensions: the trailing ones are dependent
            C = C[:, :n]
            norms = norms[:n]
            continue
        mask = np.concatenate([keep, np.ones(C.shape[1] - assessed, dtype=bool)])
        C = C[:, mask]
        norms = norms[mask]
        if C.shape[1] == 0:
            return Q0
    # Re-deflate the *normalized* columns: a candidate whose residual was
    # tiny relative to its own norm re-amplifies the Q0 components left by
    # the pre-normalization passes, so one more pass on unit vectors is
    # required to get back to roundoff-level orthogonality.
    if Q0s.shape[1]:
        for _ in range(2):
            Qc = Qc - Q0s @ (Q0s.T @ Qc)
            Qc, _ = np.linalg.qr(Qc)
    _fix_signs(Qc, None, sw)
    return np.hstack([Q0, Qc / sw[:, None]])


def complete_basis(
    grid, Q0: np.ndarray, n_columns: int, fallback: Iterator[np.ndarray]
) -> np.ndarray:
    """Pad an orthonormal set to `n_columns` with fallback directions."""
    sw = _sqrt_weights(grid)
    Qs = Q0 * sw[:, None]
    added = []
    while Qs.shape[1] + len(added) < n_columns:
        base = Qs if not added else np.hstack([Qs] + [c[:, None] for c in added])
        added.append(_next_fallback(base, fallback, sw))
    if not added:
        return Q0
    Qa = np.column_stack(added)
    _fix_signs(Qa, None, sw)
    return np.hstack([Q0, Qa / sw[:, None]])


def build_fixed_basis(grid: VelocityGrid, m: int) -> FixedBasis:
    """Discrete Gram-Schmidt of (1, v, v^2-1) in the weighted inner product.

    Raises ValueError for m outside 0..3 (only the 1x1v conserved moments
    are supported).
    """
    if not 0 <= m <= 3:
        raise ValueError(f"m must be in 0..3 for 1x1v, got {m}")
    if m > 0 and grid.nv < 4:
        raise ValueError("need at least 4 velocity cells to build the fixed basis")
    v = grid.v
    raw = [np.ones_like(v), v, v * v - 1.0]
    U = np.zeros((grid.nv, m))
    norms = []
    for a in range(m):
        w = raw[a].copy()
        for b in range(a):
            w -= grid.inner(w, U[:, b]) * U[:, b]
        nrm = np.sqrt(grid.inner(w, w))
        if nrm <= 0:
            raise ValueError("degenerate velocity grid: fixed basis collapsed")
        U[:, a] = w / nrm
        norms.append(nrm)
    norms += [float("nan")] * (3 - m)
    v2 = v * v
    v2_coeffs = np.array([grid.inner(v2, U[:, a]) for a in range(m)])
    return FixedBasis(
        m=m,
        U=U,
        norm_1=norms[0],
        norm_v=norms[1],
        norm_v2=norms[2],
        v2_coeffs=v2_coeffs,
    )
