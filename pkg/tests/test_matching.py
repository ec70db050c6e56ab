import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import mutual_pairs_loop, nearest_loop
from rotostitch.errors import InsufficientCandidates
from rotostitch.matching import Match, match_bf, match_knn_ratio


def desc(rng, n, dim=16):
    return rng.normal(size=(n, dim))


class TestBruteForce:
    def test_identical_lists_pair_up(self, rng):
        d = desc(rng, 12)
        m = match_bf(d, d, cross_check=True)
        assert sorted((x.idx_a, x.idx_b) for x in m) == [(i, i) for i in range(12)]
        assert all(x.distance == 0 for x in m)

    def test_removed_element_unmatched(self):
        da = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
        db = da[[0, 2]]
        m = match_bf(da, db, cross_check=True)
        assert {(x.idx_a, x.idx_b) for x in m} == {(0, 0), (2, 1)}

    def test_empty(self):
        assert match_bf(np.zeros((0, 4)), np.ones((3, 4))) == []
        assert match_bf(np.ones((3, 4)), np.zeros((0, 4))) == []

    def test_sorted_and_tie_broken_by_lower_b(self):
        da = np.array([[0.0], [5.0]])
        db = np.array([[1.0], [-1.0], [5.0]])
        m = match_bf(da, db, cross_check=False)
        assert m[0] == Match(1, 2, 0.0)
        assert m[1] == Match(0, 0, 1.0)

    def test_oracle_nearest(self, rng):
        da, db = desc(rng, 40), desc(rng, 35)
        m = match_bf(da, db, cross_check=False)
        ref = nearest_loop(da, db)
        got = {x.idx_a: (x.idx_b, x.distance) for x in m}
        assert len(got) == 40
        for i, (j, d) in enumerate(ref):
            assert got[i][0] == j
            assert math.isclose(got[i][1], d, rel_tol=1e-12)

    def test_oracle_mutual(self, rng):
        da, db = desc(rng, 30), desc(rng, 30)
        m = match_bf(da, db, cross_check=True)
        assert {(x.idx_a, x.idx_b) for x in m} == mutual_pairs_loop(da, db)

    def test_near_duplicate_candidates_resolved_exactly(self, rng):
        # candidates closer than float32 resolution still pick the true nearest
        base = rng.normal(size=(1, 225)) * 3
        db = np.vstack([base + 1e-7, base + 2e-8, base - 5e-8])
        (m,) = match_bf(base, db, cross_check=False)
        assert m.idx_b == 1

    @given(seed=st.integers(0, 2**16), na=st.integers(1, 20), nb=st.integers(1, 20))
    @settings(max_examples=40, deadline=None)
    def test_cross_check_symmetric(self, seed, na, nb):
        g = np.random.default_rng(seed)
        # small integer grid so exact ties are frequent
        da = g.integers(0, 3, (na, 3)).astype(float)
        db = g.integers(0, 3, (nb, 3)).astype(float)
        fwd = {(x.idx_a, x.idx_b) for x in match_bf(da, db)}
        back = {(x.idx_b, x.idx_a) for x in match_bf(db, da)}
        assert fwd == back

    @given(seed=st.integers(0, 2**16))
    @settings(max_examples=30, deadline=None)
    def test_distances_are_exact(self, seed):
        g = np.random.default_rng(seed)
        da, db = g.normal(size=(8, 9)), g.normal(size=(11, 9))
        for x in match_bf(da, db, cross_check=False):
            ref = math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(da[x.idx_a], db[x.idx_b])))
            assert math.isclose(x.distance, ref, rel_tol=1e-13, abs_tol=1e-15)


class TestRatio:
    def test_duplicate_candidates_rejected(self):
        da = np.array([[1.0, 1.0]])
        db = np.array([[0.0, 0.0], [0.0, 0.0], [9.0, 9.0]])
        assert match_knn_ratio(da, db) == []

    def test_clear_winner_accepted(self):
        da = np.array([[0.0]])
        db = np.array([[10.0], [1.0]])
        assert match_knn_ratio(da, db, ratio=0.75) == [Match(0, 1, 1.0)]

    def test_needs_two_candidates(self):
        with pytest.raises(InsufficientCandidates):
            match_knn_ratio(np.ones((2, 3)), np.ones((1, 3)))

    def test_repeated_texture_rejected_more_often(self, rng):
        distinct = desc(rng, 60, 25)
        motifs = desc(rng, 6, 25)
        repeated = np.repeat(motifs, 10, axis=0) + rng.normal(scale=0.05, size=(60, 25))
        qd = distinct + rng.normal(scale=0.05, size=distinct.shape)
        qr = repeated + rng.normal(scale=0.05, size=repeated.shape)
        acc_d = len(match_knn_ratio(qd, distinct)) / 60
        acc_r = len(match_knn_ratio(qr, repeated)) / 60
        assert 1 - acc_r > 1 - acc_d

    @given(seed=st.integers(0, 2**16), ratio=st.floats(0.3, 1.0))
    @settings(max_examples=30, deadline=None)
    def test_subset_of_plain_nearest(self, seed, ratio):
        g = np.random.default_rng(seed)
        da, db = g.normal(size=(15, 6)), g.normal(size=(12, 6))
        plain = set(match_bf(da, db, cross_check=False))
        assert set(match_knn_ratio(da, db, ratio=ratio)) <= plain

    def test_k_larger_than_two(self, rng):
        da, db = desc(rng, 10), desc(rng, 10)
        assert match_knn_ratio(da, db, k=3) == match_knn_ratio(da, db, k=2)


def test_ratio_with_crowded_shortlist(rng):
    # many candidates within float32 rounding of each other force the exact re-rank
    base = rng.normal(size=(1, 225)) * 3
    db = np.vstack([base + rng.normal(scale=1e-7, size=(1, 225)) for _ in range(12)] + [desc(rng, 20, 225)])
    da = np.vstack([base, desc(rng, 5, 225)])
    got = match_knn_ratio(da, db, ratio=1.0 + 1e-12)
    ref = nearest_loop(da, db)
    for m in got:
        assert m.idx_b == ref[m.idx_a][0]
        assert math.isclose(m.distance, ref[m.idx_a][1], rel_tol=1e-12)
