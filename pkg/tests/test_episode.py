import json

import numpy as np
import pytest
from scipy.ndimage import binary_erosion

from fssk import ConfigError, FormatError, InvalidEpisodeError, ModeError, oracles
from fssk.episode import (Episode, SyntheticConfig, baseline_prior, class_signature,
                          generate_synthetic_episode, load_episode, make_weights,
                          run_pipeline, save_episode)
from fssk.pmgm import pmgm_forward, CamHeatmap


def _same(a, b):
    for name in ("support_features", "support_masks", "support_cams",
                 "query_features", "query_cam"):
        if not np.array_equal(getattr(a, name), getattr(b, name)):
            return False
    return a.class_id == b.class_id and (
        (a.query_mask is None and b.query_mask is None)
        or np.array_equal(a.query_mask, b.query_mask))


class TestGenerator:
    def test_deterministic(self):
        cfg = SyntheticConfig(seed=4, distractor=True, k=2)
        assert _same(generate_synthetic_episode(cfg, 3), generate_synthetic_episode(cfg, 3))

    def test_index_independent_of_order(self):
        cfg = SyntheticConfig(seed=1)
        late = generate_synthetic_episode(cfg, 7)
        for i in range(7):
            generate_synthetic_episode(cfg, i)
        assert _same(late, generate_synthetic_episode(cfg, 7))

    def test_different_indices_differ(self):
        cfg = SyntheticConfig(seed=1)
        assert not _same(generate_synthetic_episode(cfg, 0), generate_synthetic_episode(cfg, 1))

    def test_shapes(self):
        ep = generate_synthetic_episode(SyntheticConfig(c=6, h=10, w=9, k=3), 0)
        assert ep.support_features.shape == (3, 6, 10, 9)
        assert ep.support_masks.shape == (3, 10, 9)
        assert ep.query_mask.shape == (10, 9)
        assert ep.k == 3 and ep.shape == (6, 10, 9)

    def test_inference_mode(self):
        ep = generate_synthetic_episode(SyntheticConfig(query_mask=False), 0)
        assert ep.query_mask is None

    def test_signatures_orthogonal(self):
        core, part = class_signature(2, 16)
        assert abs(core @ part) < 1e-12
        assert np.linalg.norm(core) == pytest.approx(1.0)

    @pytest.mark.parametrize("kw", [dict(noise=-1), dict(cam_fidelity=1.5), dict(c=1),
                                    dict(h=2), dict(k=0)])
    def test_config_validation(self, kw):
        with pytest.raises(ConfigError):
            SyntheticConfig(**kw)

    def test_noise_free_prior(self):
        # no noise, perfect CAM: core pixels tie at cosine 1 (-> 0.5), the ring is
        # the sole maximum of the CAM- region (-> 1) and empty background is 0
        ep = generate_synthetic_episode(SyntheticConfig(seed=2, noise=0.0, h=10, w=10), 0)
        qm = ep.query_mask
        core = binary_erosion(qm)
        res = pmgm_forward(ep.support_features[0], ep.support_masks[0],
                           CamHeatmap(ep.support_cams[0]), ep.query_features,
                           CamHeatmap(ep.query_cam))
        prior = res.query_prior[0]
        assert np.allclose(prior[core], 0.5)
        assert np.allclose(prior[qm & ~core], 1.0)
        assert np.allclose(prior[~qm], 0.0)

    def test_distractor_matches_core_under_baseline(self):
        cfg = SyntheticConfig(seed=5, noise=0.0, distractor=True, c=16, h=16, w=16)
        ep = generate_synthetic_episode(cfg, 0)
        d = ep.meta["query_distractor"]
        assert d.any()
        core = binary_erosion(ep.query_mask)
        proto = ep.support_features[0][:, ep.support_masks[0]].mean(axis=1)
        base = baseline_prior(ep.query_features, proto)[0]
        assert np.allclose(base[d], base[core][0])

    def test_distractor_stays_off_object(self):
        cfg = SyntheticConfig(seed=0, distractor=True, c=8, h=16, w=16)
        for i in range(20):
            ep = generate_synthetic_episode(cfg, i)
            assert not (ep.meta["query_distractor"] & ep.query_mask).any()


class TestEpisode:
    def test_empty_support_mask(self):
        with pytest.raises(InvalidEpisodeError):
            Episode(np.ones((2, 4, 4)), np.zeros((4, 4)), np.zeros((4, 4)),
                    np.ones((2, 4, 4)), np.zeros((4, 4)))

    def test_promotes_single_shot(self):
        ep = Episode(np.ones((2, 4, 4)), np.ones((4, 4)), np.zeros((4, 4)),
                     np.ones((2, 4, 4)), np.zeros((4, 4)))
        assert ep.k == 1

    def test_round_trip(self, tmp_path):
        ep = generate_synthetic_episode(SyntheticConfig(seed=3, k=2, distractor=True), 0)
        save_episode(ep, tmp_path / "e")
        back = load_episode(tmp_path / "e")
        assert _same(ep, back)
        assert back.meta["distractor"] is True

    def test_malformed_manifest(self, tmp_path):
        ep = generate_synthetic_episode(SyntheticConfig(), 0)
        save_episode(ep, tmp_path)
        m = json.loads((tmp_path / "manifest.json").read_text())
        m["k"] = 3
        (tmp_path / "manifest.json").write_text(json.dumps(m))
        with pytest.raises(FormatError):
            load_episode(tmp_path)


class TestBaselinePrior:
    def test_example(self):
        qf = np.array([[[1.0, 0.0], [-1.0, 0.0]], [[0.0, 1.0], [0.0, 0.0]]])
        # cosines to (1, 0): 1, 0, -1, 0 -> min-max 1, .5, 0, .5
        got = baseline_prior(qf, [1.0, 0.0])
        assert np.allclose(got[0], [[1.0, 0.5], [0.0, 0.5]])

    def test_oracle(self, rng):
        for _ in range(10):
            qf = rng.standard_normal((4, 5, 5)).astype(np.float32)
            p = rng.standard_normal(4)
            want = np.array(oracles.naive_baseline_prior(qf.tolist(), p.tolist()))
            assert np.max(np.abs(baseline_prior(qf, p)[0] - want)) <= 1e-5

    def test_rejects_missing_prototype(self):
        with pytest.raises(InvalidEpisodeError):
            baseline_prior(np.ones((2, 3, 3)), None)
        with pytest.raises(InvalidEpisodeError):
            baseline_prior(np.ones((2, 3, 3)), [0.0, 0.0])


class TestPipeline:
    @pytest.fixture
    def ep(self):
        return generate_synthetic_episode(SyntheticConfig(seed=9, c=8, h=8, w=8), 0)

    @pytest.fixture
    def weights(self):
        return make_weights(0, 8)

    @pytest.mark.parametrize("strategy", ["none", "dicm", "cyctr"])
    def test_shapes(self, ep, weights, strategy):
        res = run_pipeline(ep, weights, strategy)
        assert res.prior.shape == (1, 8, 8)
        assert res.fused_query.shape == (8, 8, 8)
        assert res.fused_support.shape == (8, 8, 8)
        assert res.decoder_output.shape == (8, 8, 8)
        assert len(res.reports) == 4
        assert all(r.strategy == strategy for r in res.reports)

    def test_deterministic(self, ep, weights):
        a = run_pipeline(ep, weights, "cyctr")
        b = run_pipeline(ep, make_weights(0, 8), "cyctr")
        assert np.array_equal(a.decoder_output, b.decoder_output)

    def test_dicm_needs_query_mask(self, ep, weights):
        with pytest.raises(ModeError, match="inference"):
            run_pipeline(ep.without_query_mask(), weights, "dicm")

    def test_inference_none_and_cyctr(self, ep, weights):
        inf = ep.without_query_mask()
        for s in ("none", "cyctr"):
            a = run_pipeline(inf, weights, s)
            b = run_pipeline(ep, weights, s)
            assert np.array_equal(a.decoder_output, b.decoder_output)

    def test_identical_shots_bit_identical(self, ep, weights):
        one = run_pipeline(ep, weights, "cyctr")
        for k in (2, 3, 5):
            rep = Episode(np.repeat(ep.support_features, k, 0),
                          np.repeat(ep.support_masks, k, 0),
                          np.repeat(ep.support_cams, k, 0),
                          ep.query_features, ep.query_cam, ep.query_mask, ep.class_id)
            res = run_pipeline(rep, weights, "cyctr")
            assert np.array_equal(res.prior, one.prior)
            assert np.array_equal(res.fused_support, one.fused_support)
            assert np.array_equal(res.decoder_output, one.decoder_output)

    def test_weights_validation(self):
        with pytest.raises(ConfigError):
            make_weights(0, 8, blocks=2, cab=3)
