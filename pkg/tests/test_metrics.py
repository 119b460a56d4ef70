import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis.extra.numpy import arrays

from fssk import ConfigError, DimensionError
from fssk import oracles
from fssk.metrics import (ZERO_COUNTS, EpisodeRecord, aggregate, counts, fb_iou, fg_bg_counts,
                          iou, miou, prior_cross_entropy, summaries_to_csv)

from fixtures_metrics import FB_IOU, MIOU, PAIRS


class TestIou:
    def test_identity(self):
        m = np.eye(3, dtype=bool)
        assert iou(m, m) == 1.0

    def test_disjoint(self):
        m = np.eye(3, dtype=bool)
        assert iou(m, np.rot90(m) & ~m) == 0.0

    def test_half(self):
        assert iou([[1, 0]], [[1, 1]]) == 0.5

    def test_both_empty(self):
        assert iou(np.zeros((2, 2)), np.zeros((2, 2))) == 1.0

    def test_extent_mismatch(self):
        with pytest.raises(DimensionError):
            iou(np.zeros((2, 2)), np.zeros((2, 3)))

    @given(arrays(np.bool_, (4, 5)), arrays(np.bool_, (4, 5)))
    def test_symmetric_and_monotone(self, p, t):
        assert iou(p, t) == iou(t, p)
        c = counts(p, t)
        assert c.intersection <= min(c.pred_area, c.target_area)
        assert c.union == c.pred_area + c.target_area - c.intersection
        missed = np.argwhere(t & ~p)
        if missed.size:
            p2 = p.copy()
            p2[tuple(missed[0])] = True
            assert iou(p2, t) >= iou(p, t)


class TestHandCountedFixtures:
    @pytest.mark.parametrize("cid,pred,target,fg,bg", PAIRS)
    def test_counts(self, cid, pred, target, fg, bg):
        f, b = fg_bg_counts(pred, target)
        assert (f.intersection, f.union) == fg
        assert (b.intersection, b.union) == bg

    def test_miou_and_fb_iou(self):
        pairs = [(p, t) for _, p, t, _, _ in PAIRS]
        assert miou([c for c, *_ in PAIRS], pairs) == pytest.approx(MIOU, abs=0)
        assert fb_iou(pairs) == FB_IOU


class TestFbIou:
    def test_perfect(self, rng):
        pairs = [(m, m) for m in (rng.random((4, 4)) < 0.5 for _ in range(3))]
        assert fb_iou(pairs) == 1.0

    def test_all_fg_vs_all_bg(self):
        assert fb_iou([(np.ones((3, 3)), np.zeros((3, 3)))]) == 0.0

    def test_empty(self):
        with pytest.raises(ConfigError):
            fb_iou([])

    def test_recount_oracle(self, rng):
        for _ in range(20):
            pairs = [(rng.random((6, 6)) < 0.5, rng.random((6, 6)) < 0.4) for _ in range(4)]
            want = oracles.naive_fb_iou([(p.tolist(), t.tolist()) for p, t in pairs])
            assert fb_iou(pairs) == want

    def test_batch_equals_concatenation(self, rng):
        pairs = [(rng.random((3, 5)) < 0.5, rng.random((3, 5)) < 0.5) for _ in range(5)]
        cat_p = np.concatenate([p for p, _ in pairs])
        cat_t = np.concatenate([t for _, t in pairs])
        assert fb_iou(pairs) == fb_iou([(cat_p, cat_t)])
        assert miou([7] * 5, pairs) == iou(cat_p, cat_t)


class TestCrossEntropy:
    def test_constant_half_is_ln2(self, rng):
        t = rng.random((7, 7)) < 0.3
        assert abs(prior_cross_entropy(np.full((1, 7, 7), 0.5), t) - math.log(2)) <= 1e-9

    def test_perfect_prior(self):
        t = np.eye(4, dtype=bool)
        ce = prior_cross_entropy(t.astype(np.float32), t, 1e-6)
        assert ce == pytest.approx(-math.log(1 - 1e-6), rel=1e-6)

    def test_epsilon_range(self):
        with pytest.raises(ConfigError):
            prior_cross_entropy(np.zeros((2, 2)), np.zeros((2, 2)), 0.5)

    def test_minimized_at_target_mean(self, rng):
        t = rng.random((5, 5)) < 0.36
        grid = np.linspace(0.01, 0.99, 99)
        ces = [prior_cross_entropy(np.full((5, 5), g, np.float32), t) for g in grid]
        best = grid[int(np.argmin(ces))]
        assert abs(best - t.mean()) <= 0.005 + 1e-9

    def test_extent_mismatch(self):
        with pytest.raises(DimensionError):
            prior_cross_entropy(np.zeros((1, 2, 2)), np.zeros((3, 3)))


class TestAggregate:
    def test_single(self):
        s = aggregate([EpisodeRecord(0, ZERO_COUNTS, ZERO_COUNTS, 0.3)])
        assert s.prior_ce_mean == 0.3 and s.prior_ce_std == 0.0 and s.episode_count == 1

    def test_two_point_std(self):
        s = aggregate([EpisodeRecord(0, ZERO_COUNTS, ZERO_COUNTS, v) for v in (0.2, 0.4)])
        assert s.prior_ce_mean == pytest.approx(0.3, abs=1e-12)
        assert s.prior_ce_std == pytest.approx(0.1, abs=1e-12)

    def test_recomputation(self, rng):
        recs = []
        for i in range(30):
            p, t = rng.random((4, 4)) < 0.5, rng.random((4, 4)) < 0.5
            prior = rng.random((4, 4)).astype(np.float32)
            recs.append((i % 3, p, t, prior))
        s = aggregate(EpisodeRecord.from_masks(c, p, t, pr) for c, p, t, pr in recs)
        ces = [prior_cross_entropy(pr, t) for _, _, t, pr in recs]
        mean, std = oracles.naive_ce_stats(ces)
        assert abs(s.prior_ce_mean - mean) <= 1e-9 and abs(s.prior_ce_std - std) <= 1e-9
        assert s.miou == miou([c for c, *_ in recs], [(p, t) for _, p, t, _ in recs])
        assert s.fb_iou == fb_iou([(p, t) for _, p, t, _ in recs])
        assert 0 <= s.miou <= 1 and 0 <= s.fb_iou <= 1

    def test_order_independent(self, rng):
        recs = [EpisodeRecord.from_masks(i % 2, rng.random((3, 3)) < 0.5,
                                         rng.random((3, 3)) < 0.5,
                                         rng.random((3, 3)).astype(np.float32))
                for i in range(6)]
        a, b = aggregate(recs), aggregate(recs[::-1])
        assert a.to_dict() == b.to_dict()

    def test_empty(self):
        with pytest.raises(ConfigError):
            aggregate([])

    def test_csv(self):
        s = aggregate([EpisodeRecord(0, ZERO_COUNTS, ZERO_COUNTS, 0.5)])
        text = summaries_to_csv({1: s})
        assert text.splitlines()[0] == "fold,miou,fb_iou,ce_mean,ce_std,n"
        assert text.splitlines()[1].startswith("1,")
