import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotostitch.errors import DegenerateConfiguration, NoConsensus
from rotostitch.estimate import (
    AFFINE,
    PROJECTIVE,
    RobustParams,
    Transform,
    affine_exact3,
    affine_lstsq,
    apply_h,
    fit_model,
    homography_dlt,
    reprojection_errors,
    robust_fit,
)

A_KNOWN = np.array([[1.2, 0.1, 4.0], [-0.05, 0.9, 1.0], [0, 0, 1.0]])
TRI = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
QUAD = np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 8.0], [0.0, 8.0]])


def contaminated(rng, n, frac_out, shift=(7.0, 0.0)):
    src = rng.uniform(0, 200, (n, 2))
    dst = src + shift
    k = int(round(frac_out * n))
    bad = rng.choice(n, k, replace=False)
    dst[bad] = rng.uniform(0, 200, (k, 2))
    truth = np.ones(n, bool)
    truth[bad] = False
    return src, dst, truth


class TestAffine:
    def test_identity(self):
        assert np.allclose(affine_lstsq(TRI, TRI).m, np.eye(3), atol=1e-12)

    def test_forced_translation(self):
        m = affine_lstsq(TRI, TRI + (3, 2)).m
        assert np.allclose(m, [[1, 0, 3], [0, 1, 2], [0, 0, 1]], atol=1e-12)

    def test_recovers_known(self, rng):
        src = rng.uniform(-50, 50, (10, 2))
        dst = apply_h(A_KNOWN, src)
        t = affine_lstsq(src, dst)
        assert t.kind == AFFINE
        assert np.abs(t.m - A_KNOWN).max() < 1e-9

    @given(seed=st.integers(0, 2**16))
    @settings(max_examples=40, deadline=None)
    def test_two_routes_agree_on_three_pairs(self, seed):
        g = np.random.default_rng(seed)
        src = g.uniform(-20, 20, (3, 2))
        e1, e2 = src[1] - src[0], src[2] - src[0]
        area = abs(e1[0] * e2[1] - e1[1] * e2[0])
        if area < 1.0:
            return
        dst = g.uniform(-20, 20, (3, 2))
        a = affine_lstsq(src, dst).m
        b = affine_exact3(src, dst).m
        assert np.abs(a - b).max() < 1e-9 * max(1.0, np.abs(b).max())

    def test_collinear_rejected(self):
        pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        with pytest.raises(DegenerateConfiguration):
            affine_lstsq(pts, pts)
        with pytest.raises(DegenerateConfiguration):
            affine_exact3(pts[:3], pts[:3])

    @given(u=st.floats(-50, 50), v=st.floats(-50, 50), seed=st.integers(0, 2**16))
    @settings(max_examples=40, deadline=None)
    def test_translation_equivariance(self, u, v, seed):
        g = np.random.default_rng(seed)
        src = g.uniform(-30, 30, (8, 2))
        dst = apply_h(A_KNOWN, src)
        a = affine_lstsq(src, dst).m
        b = affine_lstsq(src, dst + (u, v)).m
        assert np.abs(b[:2, :2] - a[:2, :2]).max() < 1e-9
        assert abs(b[0, 2] - a[0, 2] - u) < 1e-9 and abs(b[1, 2] - a[1, 2] - v) < 1e-9

    def test_too_few_pairs(self):
        with pytest.raises(DegenerateConfiguration):
            affine_lstsq(TRI[:2], TRI[:2])


class TestHomography:
    def test_identity(self):
        assert np.allclose(homography_dlt(QUAD, QUAD).m, np.eye(3), atol=1e-12)

    def test_translation(self):
        m = homography_dlt(QUAD, QUAD + (5, 0)).m
        assert np.abs(m - [[1, 0, 5], [0, 1, 0], [0, 0, 1]]).max() < 1e-9

    def test_recovers_projective(self, rng):
        h = np.array([[1.05, 0.02, 3.0], [-0.01, 0.97, -2.0], [1e-3, -2e-4, 1.0]])
        src = rng.uniform(0, 100, (8, 2))
        t = homography_dlt(src, apply_h(h, src))
        assert t.kind == PROJECTIVE and t.m[2, 2] == 1.0
        assert np.abs(t.m - h).max() < 1e-6

    def test_three_collinear_rejected(self):
        src = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 5.0]])
        with pytest.raises(DegenerateConfiguration):
            homography_dlt(src, src)

    def test_fit_model_dispatch(self):
        assert fit_model(QUAD, QUAD, AFFINE).kind == AFFINE
        assert fit_model(QUAD, QUAD, PROJECTIVE).kind == PROJECTIVE
        with pytest.raises(ValueError):
            fit_model(QUAD, QUAD, "similarity")


class TestTransform:
    def test_affine_last_row_forced(self):
        t = Transform(np.array([[1.0, 0, 2], [0, 1, 3], [0.3, 0.1, 7]]), AFFINE)
        assert tuple(t.m[2]) == (0.0, 0.0, 1.0)

    def test_projective_normalised(self):
        t = Transform(2 * np.eye(3), PROJECTIVE)
        assert np.array_equal(t.m, np.eye(3))

    def test_singular_rejected(self):
        with pytest.raises(DegenerateConfiguration):
            Transform(np.zeros((3, 3)), AFFINE)

    def test_compose_and_inverse(self):
        a = Transform.translation(3, 4)
        assert np.allclose(a.compose(a.inverse()).m, np.eye(3))


class TestRobust:
    def test_outlier_free(self, rng):
        src = rng.uniform(0, 100, (20, 2))
        t, flags = robust_fit(src, src + (7, 0), AFFINE)
        assert np.allclose(t.m, [[1, 0, 7], [0, 1, 0], [0, 0, 1]], atol=1e-9)
        assert flags.all()

    @pytest.mark.parametrize("kind", [AFFINE, PROJECTIVE])
    def test_ransac_with_outliers(self, rng, kind):
        src, dst, truth = contaminated(rng, 100, 0.3)
        t, flags = robust_fit(src, dst, kind, RobustParams(seed=3))
        probe = np.array([[50.0, 50.0], [150.0, 120.0]])
        assert np.abs(t.apply(probe) - (probe + (7, 0))).max() < 0.5
        assert not flags[~truth].any()

    def test_ransac_inlier_residuals_below_threshold(self, rng):
        src, dst, _ = contaminated(rng, 80, 0.3)
        dst = dst + rng.normal(0, 0.3, dst.shape)
        rp = RobustParams(inlier_thresh=2.0, seed=11)
        t, flags = robust_fit(src, dst, AFFINE, rp)
        assert np.all(reprojection_errors(t, src, dst)[flags] < rp.inlier_thresh)

    def test_lmeds_majority(self, rng):
        src, dst, _ = contaminated(rng, 100, 0.4)
        dst = dst + rng.normal(0, 0.2, dst.shape)
        t, flags = robust_fit(src, dst, AFFINE, RobustParams(method="lmeds", seed=5))
        assert np.median(reprojection_errors(t, src, dst)[flags]) < 1.0

    @pytest.mark.parametrize("method", ["ransac", "lmeds"])
    def test_reproducible(self, rng, method):
        src, dst, _ = contaminated(rng, 60, 0.3)
        rp = RobustParams(method=method, seed=42)
        t1, f1 = robust_fit(src, dst, PROJECTIVE, rp)
        t2, f2 = robust_fit(src, dst, PROJECTIVE, rp)
        assert t1.m.tobytes() == t2.m.tobytes()
        assert np.array_equal(f1, f2)

    def test_no_consensus(self, rng):
        src = rng.uniform(0, 100, (12, 2))
        dst = rng.uniform(0, 100, (12, 2))
        with pytest.raises(NoConsensus):
            robust_fit(src, dst, PROJECTIVE, RobustParams(inlier_thresh=0.01, seed=1))

    def test_collinear_input_degenerate(self):
        src = np.array([[float(i), 2.0 * i] for i in range(10)])
        with pytest.raises(DegenerateConfiguration):
            robust_fit(src, src + 1, AFFINE, RobustParams(method="lmeds"))

    def test_params_validated(self):
        with pytest.raises(ValueError):
            RobustParams(method="prosac")
        with pytest.raises(ValueError):
            RobustParams(confidence=1.0)
