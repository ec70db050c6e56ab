"""Brute-force descriptor matching with cross-check or a kNN ratio test."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import InsufficientCandidates


class Match(NamedTuple):
    idx_a: int
    idx_b: int
    distance: float


def _as_desc(d) -> np.ndarray:
    a = np.asarray(d, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(0, 0) if a.size == 0 else a[None, :]
    return a


def pair_distances(da: np.ndarray, db: np.ndarray, ia, ib) -> np.ndarray:
    """Exact L2 distances between rows ``da[ia]`` and ``db[ib]``."""
    diff = da[ia] - db[ib]
    return np.sqrt((diff * diff).sum(axis=-1))


def _sq_dists(da: np.ndarray, db: np.ndarray) -> np.ndarray:
    """Approximate squared distances in single precision (shortlisting only)."""
    a = da.astype(np.float32)
    b = db.astype(np.float32)
    sq_a = (a * a).sum(axis=1)
    sq_b = (b * b).sum(axis=1)
    return sq_a[:, None] + sq_b[None, :] - 2.0 * (a @ b.T)


def _tolerance(da: np.ndarray, db: np.ndarray) -> np.ndarray:
    # generous bound on single-precision GEMM error (grows with the vector
    # length); exact re-ranking follows
    sq_a = (da * da).sum(axis=1)
    sq_b = (db * db).sum(axis=1)
    rel = max(1e-4, 4.0 * da.shape[1] * float(np.finfo(np.float32).eps))
    return rel * (sq_a + sq_b.max()) + 1e-9


def _rerank(da, db, i, cols, k):
    e = pair_distances(da, db, np.full(cols.size, i), cols)
    o = np.lexsort((cols, e))[:k]
    return cols[o], e[o]


def _nearest(da: np.ndarray, db: np.ndarray, k: int, d2: np.ndarray | None = None):
    """Indices and exact distances of the ``k`` nearest rows of ``db`` per row of ``da``.

    Candidates are shortlisted with the expanded-square GEMM form and then
    re-ranked on exact distances; ties go to the lower index.
    """
    na, nb = len(da), len(db)
    k = min(k, nb)
    if d2 is None:
        d2 = _sq_dists(da, db)
    tol = _tolerance(da, db)
    if k == 1:
        lo = d2.min(axis=1)
        near = d2 <= (lo + tol)[:, None]
        idx = d2.argmin(axis=1)[:, None]
        dist = pair_distances(da, db, np.arange(na), idx[:, 0])[:, None]
        crowded = np.nonzero(near.sum(axis=1) > 1)[0]
        for i in crowded:
            idx[i], dist[i] = _rerank(da, db, i, np.nonzero(near[i])[0], 1)
        return idx, dist
    shortlist = min(nb, k + 2)
    if shortlist < nb:
        part = np.argpartition(d2, shortlist - 1, axis=1)[:, :shortlist]
        kth = np.take_along_axis(d2, part, axis=1).max(axis=1)
    else:
        part = np.broadcast_to(np.arange(nb), (na, nb))
        kth = np.full(na, np.inf)
    cand = np.sort(part, axis=1)
    diff = da[:, None, :] - db[cand]
    exact = np.sqrt((diff * diff).sum(axis=-1))
    order = np.lexsort((cand, exact), axis=-1)[:, :k]
    idx = np.take_along_axis(cand, order, axis=1)
    dist = np.take_along_axis(exact, order, axis=1)
    # rows whose shortlist boundary is within rounding of an excluded column
    crowded = np.nonzero((d2 <= (kth + tol)[:, None]).sum(axis=1) > shortlist)[0]
    for i in crowded:
        idx[i], dist[i] = _rerank(da, db, i, np.nonzero(d2[i] <= kth[i] + tol[i])[0], k)
    return idx, dist


def match_bf(da, db, cross_check: bool = True) -> list[Match]:
    """Nearest neighbour in ``db`` for every row of ``da`` under L2.

    With ``cross_check`` only mutual nearest pairs survive. Output is sorted by
    distance, then ``idx_b``, then ``idx_a``.
    """
    da, db = _as_desc(da), _as_desc(db)
    if len(da) == 0 or len(db) == 0:
        return []
    d2 = _sq_dists(da, db)
    ib, dist = _nearest(da, db, 1, d2)
    ib, dist = ib[:, 0], dist[:, 0]
    ia = np.arange(len(da))
    if cross_check:
        back, _ = _nearest(db, da, 1, d2.T)
        keep = back[ib, 0] == ia
        ia, ib, dist = ia[keep], ib[keep], dist[keep]
    order = np.lexsort((ia, ib, dist))
    return [Match(int(ia[j]), int(ib[j]), float(dist[j])) for j in order]


def match_knn_ratio(da, db, k: int = 2, ratio: float = 0.75) -> list[Match]:
    """Keep ``a -> b1`` only when ``d(a, b1) < ratio * d(a, b2)``."""
    da, db = _as_desc(da), _as_desc(db)
    if len(db) < 2:
        raise InsufficientCandidates("ratio test needs at least 2 candidates")
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(da) == 0:
        return []
    idx, dist = _nearest(da, db, k)
    keep = dist[:, 0] < ratio * dist[:, 1]
    ia = np.nonzero(keep)[0]
    ib, d1 = idx[keep, 0], dist[keep, 0]
    order = np.lexsort((ia, ib, d1))
    return [Match(int(ia[j]), int(ib[j]), float(d1[j])) for j in order]
