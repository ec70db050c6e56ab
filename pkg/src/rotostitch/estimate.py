"""Inter-frame transformation models: affine normal equations, normalised DLT,
and RANSAC / LMedS robust wrappers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfiguration, NoConsensus

AFFINE = "affine"
PROJECTIVE = "projective"
_MIN_SAMPLES = {AFFINE: 3, PROJECTIVE: 4}
_COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class Transform:
    """3x3 homogeneous transform tagged ``affine`` or ``projective``."""

    m: np.ndarray
    kind: str = PROJECTIVE

    def __post_init__(self):
        m = np.array(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"transform must be 3x3, got {m.shape}")
        if self.kind == AFFINE:
            m[2] = (0.0, 0.0, 1.0)
            det = np.linalg.det(m[:2, :2])
        elif self.kind == PROJECTIVE:
            if abs(m[2, 2]) > 1e-12:
                m = m / m[2, 2]
            det = np.linalg.det(m)
        else:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if not np.all(np.isfinite(m)) or abs(det) <= 1e-12:
            raise DegenerateConfiguration("transform is singular")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @classmethod
    def identity(cls, kind: str = PROJECTIVE) -> Transform:
        return cls(np.eye(3), kind)

    @classmethod
    def translation(cls, tx: float, ty: float, kind: str = AFFINE) -> Transform:
        return cls(np.array([[1.0, 0, tx], [0, 1.0, ty], [0, 0, 1.0]]), kind)

    def apply(self, pts) -> np.ndarray:
        return apply_h(self.m, pts)

    def compose(self, other: Transform) -> Transform:
        """``self`` after ``other``."""
        kind = AFFINE if self.kind == other.kind == AFFINE else PROJECTIVE
        return Transform(self.m @ other.m, kind)

    def inverse(self) -> Transform:
        return Transform(np.linalg.inv(self.m), self.kind)


@dataclass(frozen=True)
class RobustParams:
    method: str = "ransac"
    inlier_thresh: float = 3.0
    max_iters: int = 1000
    confidence: float = 0.995
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("ransac", "lmeds"):
            raise ValueError(f"unknown robust method {self.method!r}")
        if not self.inlier_thresh > 0:
            raise ValueError("inlier_thresh must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")


def apply_h(m: np.ndarray, pts) -> np.ndarray:
    p = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    w = m[2, 0] * p[:, 0] + m[2, 1] * p[:, 1] + m[2, 2]
    x = (m[0, 0] * p[:, 0] + m[0, 1] * p[:, 1] + m[0, 2]) / w
    y = (m[1, 0] * p[:, 0] + m[1, 1] * p[:, 1] + m[1, 2]) / w
    return np.stack([x, y], axis=1)


def _pairs(src, dst, need: int):
    s = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    d = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    if len(s) != len(d):
        raise ValueError("src and dst must have equal length")
    if len(s) < need:
        raise DegenerateConfiguration(f"need at least {need} point pairs, got {len(s)}")
    return s, d


def affine_exact3(src, dst) -> Transform:
    """``A = P' P^-1`` for exactly three non-collinear pairs."""
    s, d = _pairs(src, dst, 3)
    if len(s) != 3:
        raise ValueError("affine_exact3 takes exactly three pairs")
    p = np.vstack([s.T, np.ones(3)])
    pp = np.vstack([d.T, np.ones(3)])
    if abs(np.linalg.det(p)) <= 1e-12 * max(1.0, np.abs(p).max() ** 2):
        raise DegenerateConfiguration("source points are collinear")
    return Transform(pp @ np.linalg.inv(p), AFFINE)


def affine_lstsq(src, dst) -> Transform:
    """Least-squares affine map via ``A = P'P^T (P P^T)^-1``.

    Both products are accumulated as the coordinate sum matrices, so no general
    least-squares solver is involved. Ill-conditioned ``P P^T`` (collinear
    sources) raises :class:`DegenerateConfiguration`.
    """
    s, d = _pairs(src, dst, 3)
    x, y = s[:, 0], s[:, 1]
    xp, yp = d[:, 0], d[:, 1]
    n = float(len(s))
    sx, sy = x.sum(), y.sum()
    ppt = np.array(
        [
            [np.dot(x, x), np.dot(x, y), sx],
            [np.dot(x, y), np.dot(y, y), sy],
            [sx, sy, n],
        ]
    )
    pppt = np.array(
        [
            [np.dot(xp, x), np.dot(xp, y), xp.sum()],
            [np.dot(yp, x), np.dot(yp, y), yp.sum()],
            [sx, sy, n],
        ]
    )
    if not np.isfinite(ppt).all() or np.linalg.cond(ppt) > _COND_LIMIT:
        raise DegenerateConfiguration("P P^T is singular (collinear source points)")
    a = pppt @ np.linalg.inv(ppt)
    return Transform(a, AFFINE)


def _normalizer(p: np.ndarray) -> np.ndarray:
    c = p.mean(axis=0)
    dist = np.sqrt(((p - c) ** 2).sum(axis=1)).mean()
    if dist <= 1e-12:
        raise DegenerateConfiguration("all points coincide")
    s = math.sqrt(2.0) / dist
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])


def _has_collinear_triple(p: np.ndarray, tol: float) -> bool:
    n = len(p)
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                area = (p[j, 0] - p[i, 0]) * (p[k, 1] - p[i, 1]) - (p[j, 1] - p[i, 1]) * (
                    p[k, 0] - p[i, 0]
                )
                if abs(area) <= tol:
                    return True
    return False


def homography_dlt(src, dst) -> Transform:
    """Normalised direct linear transform (Hartley conditioning, SVD null vector)."""
    s, d = _pairs(src, dst, 4)
    ts, td = _normalizer(s), _normalizer(d)
    sn, dn = apply_h(ts, s), apply_h(td, d)
    if len(s) == 4 and (_has_collinear_triple(sn, 1e-9) or _has_collinear_triple(dn, 1e-9)):
        raise DegenerateConfiguration("three of four points are collinear")
    n = len(s)
    a = np.zeros((2 * n, 9))
    x, y = sn[:, 0], sn[:, 1]
    u, v = dn[:, 0], dn[:, 1]
    a[0::2, 0] = x
    a[0::2, 1] = y
    a[0::2, 2] = 1
    a[0::2, 6] = -u * x
    a[0::2, 7] = -u * y
    a[0::2, 8] = -u
    a[1::2, 3] = x
    a[1::2, 4] = y
    a[1::2, 5] = 1
    a[1::2, 6] = -v * x
    a[1::2, 7] = -v * y
    a[1::2, 8] = -v
    if len(a) < 9:
        # a zero row keeps the null vector among the reduced right singular vectors
        a = np.vstack([a, np.zeros((9 - len(a), 9))])
    _, sv, vt = np.linalg.svd(a, full_matrices=False)
    if len(sv) >= 8 and sv[7] <= 1e-10 * sv[0]:
        raise DegenerateConfiguration("DLT system has a multi-dimensional null space")
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(td) @ hn @ ts
    if abs(h[2, 2]) <= 1e-12 * np.abs(h).max():
        raise DegenerateConfiguration("homography maps the origin to infinity")
    return Transform(h / h[2, 2], PROJECTIVE)


def fit_model(src, dst, kind: str) -> Transform:
    if kind == AFFINE:
        if len(src) == 3:
            return affine_exact3(src, dst)
        return affine_lstsq(src, dst)
    if kind == PROJECTIVE:
        return homography_dlt(src, dst)
    raise ValueError(f"unknown model kind {kind!r}")


def reprojection_errors(t: Transform, src, dst) -> np.ndarray:
    proj = t.apply(src)
    d = np.asarray(dst, dtype=np.float64) - proj
    err = np.sqrt((d * d).sum(axis=1))
    return np.where(np.isfinite(err), err, np.inf)


def _batch_minimal(sn: np.ndarray, dn: np.ndarray, samples: np.ndarray, kind: str):
    """Fit minimal-sample models for a batch in normalised coordinates.

    Returns ``(matrices, ok)``; degenerate samples have ``ok`` false.
    """
    ps = sn[samples]  # (B, s, 2)
    pd = dn[samples]
    b = len(samples)
    # every triple within the sample must span an area
    s = samples.shape[1]
    ok = np.ones(b, dtype=bool)
    for i in range(s):
        for j in range(i + 1, s):
            for k in range(j + 1, s):
                for q in (ps, pd):
                    area = (q[:, j, 0] - q[:, i, 0]) * (q[:, k, 1] - q[:, i, 1]) - (
                        q[:, j, 1] - q[:, i, 1]
                    ) * (q[:, k, 0] - q[:, i, 0])
                    ok &= np.abs(area) > 1e-6
    mats = np.tile(np.eye(3), (b, 1, 1))
    if not ok.any():
        return mats, ok
    if kind == AFFINE:
        p = np.concatenate([ps, np.ones((b, 3, 1))], axis=2)  # rows are points
        sol = np.zeros((b, 3, 2))
        sol[ok] = np.linalg.solve(p[ok], pd[ok])
        mats[:, :2, :] = np.transpose(sol, (0, 2, 1))
    else:
        a = np.zeros((b, 8, 8))
        rhs = np.zeros((b, 8))
        x, y = ps[..., 0], ps[..., 1]
        u, v = pd[..., 0], pd[..., 1]
        a[:, 0::2, 0] = x
        a[:, 0::2, 1] = y
        a[:, 0::2, 2] = 1
        a[:, 0::2, 6] = -u * x
        a[:, 0::2, 7] = -u * y
        a[:, 1::2, 3] = x
        a[:, 1::2, 4] = y
        a[:, 1::2, 5] = 1
        a[:, 1::2, 6] = -v * x
        a[:, 1::2, 7] = -v * y
        rhs[:, 0::2] = u
        rhs[:, 1::2] = v
        det = np.linalg.det(a)
        ok &= np.abs(det) > 1e-12
        h = np.zeros((b, 8))
        if ok.any():
            h[ok] = np.linalg.solve(a[ok], rhs[ok][..., None])[..., 0]
        mats[:, 0, :] = h[:, 0:3]
        mats[:, 1, :] = h[:, 3:6]
        mats[:, 2, :2] = h[:, 6:8]
    return mats, ok


def _batch_errors(mats: np.ndarray, sn: np.ndarray, dn: np.ndarray) -> np.ndarray:
    x, y = sn[:, 0], sn[:, 1]
    w = mats[:, 2, 0, None] * x + mats[:, 2, 1, None] * y + mats[:, 2, 2, None]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        px = (mats[:, 0, 0, None] * x + mats[:, 0, 1, None] * y + mats[:, 0, 2, None]) / w
        py = (mats[:, 1, 0, None] * x + mats[:, 1, 1, None] * y + mats[:, 1, 2, None]) / w
        e = np.sqrt((px - dn[:, 0]) ** 2 + (py - dn[:, 1]) ** 2)
    return np.where(np.isfinite(e), e, np.inf)


def _draw_samples(rng: np.random.Generator, n: int, need: int, count: int) -> np.ndarray:
    """``count`` index sets of size ``need`` drawn without replacement."""
    keys = rng.random((count, n))
    return np.argpartition(keys, need - 1, axis=1)[:, :need] if need < n else np.argsort(keys, axis=1)


def _required_iters(inlier_frac: float, s: int, confidence: float, cap: int) -> int:
    if inlier_frac <= 0:
        return cap
    if inlier_frac >= 1:
        return 1
    denom = math.log(1.0 - inlier_frac**s)
    if denom >= 0:
        return cap
    return min(cap, max(1, int(math.ceil(math.log(1.0 - confidence) / denom))))


def _refit(s, d, flags, kind, fallback: Transform) -> Transform:
    try:
        return fit_model(s[flags], d[flags], kind)
    except DegenerateConfiguration:
        return fallback


def robust_fit(src, dst, kind: str = PROJECTIVE, rp: RobustParams = RobustParams()):
    """Robustly fit ``dst ~ T(src)`` with RANSAC or least median of squares.

    Sampling uses a generator seeded from ``rp.seed`` only, so results are
    reproducible bit for bit.

    Returns
    -------
    (Transform, inlier_flags)
    """
    need = _MIN_SAMPLES[kind]
    s, d = _pairs(src, dst, need)
    n = len(s)
    ts, td = _normalizer(s), _normalizer(d)
    tdi = np.linalg.inv(td)
    sn, dn = apply_h(ts, s), apply_h(td, d)
    # normalised-space errors scale back to pixels through td's isotropic factor
    scale = 1.0 / td[0, 0]
    rng = np.random.default_rng(rp.seed)
    batch = 64

    if rp.method == "ransac":
        best_count, best_m, best_err = -1, None, None
        limit = rp.max_iters
        done = 0
        while done < limit:
            m_b = min(batch, rp.max_iters - done)
            samples = _draw_samples(rng, n, need, m_b)
            mats, ok = _batch_minimal(sn, dn, samples, kind)
            errs = _batch_errors(mats, sn, dn) * scale
            counts = np.where(ok, (errs < rp.inlier_thresh).sum(axis=1), -1)
            for j in range(m_b):
                done += 1
                if counts[j] > best_count:
                    best_count = int(counts[j])
                    best_m, best_err = mats[j], errs[j]
                    limit = min(limit, _required_iters(best_count / n, need, rp.confidence, rp.max_iters))
                if done >= limit:
                    break
        if best_m is None or best_count < need + 1:
            raise NoConsensus(f"best consensus {max(best_count, 0)} < {need + 1}")
        flags = best_err < rp.inlier_thresh
        sample_model = _denormalize(best_m, ts, tdi, kind)
        model = _refit(s, d, flags, kind, sample_model)
        err = reprojection_errors(model, s, d)
        new_flags = err < rp.inlier_thresh
        if new_flags.sum() < need + 1:
            model = sample_model
            new_flags = reprojection_errors(model, s, d) < rp.inlier_thresh
        return model, new_flags

    # least median of squares
    iters = _required_iters(0.5, need, rp.confidence, rp.max_iters)
    best_med, best_m = np.inf, None
    done = 0
    while done < iters:
        m_b = min(batch, iters - done)
        samples = _draw_samples(rng, n, need, m_b)
        mats, ok = _batch_minimal(sn, dn, samples, kind)
        errs = _batch_errors(mats, sn, dn) * scale
        meds = np.where(ok, np.median(errs * errs, axis=1), np.inf)
        j = int(np.argmin(meds))
        if meds[j] < best_med:
            best_med, best_m = float(meds[j]), mats[j]
        done += m_b
    if best_m is None or not np.isfinite(best_med):
        raise DegenerateConfiguration("no non-degenerate sample found")
    model = _denormalize(best_m, ts, tdi, kind)
    err = reprojection_errors(model, s, d)
    sigma = 1.4826 * (1.0 + 5.0 / max(n - need, 1)) * math.sqrt(best_med)
    flags = err <= max(2.5 * sigma, 1e-6)
    if flags.sum() < need + 1:
        raise NoConsensus(f"LMedS kept {int(flags.sum())} < {need + 1} inliers")
    refit = _refit(s, d, flags, kind, model)
    err = reprojection_errors(refit, s, d)
    return refit, err <= max(2.5 * sigma, 1e-6)


def _denormalize(mn: np.ndarray, ts: np.ndarray, tdi: np.ndarray, kind: str) -> Transform:
    try:
        return Transform(tdi @ mn @ ts, kind)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise DegenerateConfiguration(str(exc)) from exc
