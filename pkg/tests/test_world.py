import math
from dataclasses import replace

import numpy as np
import pytest

from splshot import ShallowNetClassifier, TrainConfig
from splshot.datamodel import KEYPOINT_DIM, Branch, LabelSpace, Sample, ViewAngles
from splshot.serialize import world_to_dict, dumps
from splshot.world import (
    VIEW_ANGLE_MAX,
    ConfigError,
    GenConfig,
    World,
    WorldConfig,
    gen_pose_set,
    gen_view_set,
    keypoints_of,
    make_world,
    render,
    split_kshot,
    validate_world,
)


def manual_matvec(M, v):
    """Loop-based matrix-vector product, independent of numpy's matmul."""
    out = []
    for row in M:
        acc = 0.0
        for a, b in zip(row, v):
            acc += a * b
        out.append(acc)
    return np.array(out)


def hand_world():
    """Tiny world with hand-listed matrices (d_tex=2, d_pose=2, d_feat=3)."""
    cfg = WorldConfig(
        n_base_classes=1,
        n_novel_classes=2,
        samples_per_class=2,
        d_tex=2,
        d_pose=2,
        d_feat=3,
        sigma_obs=0.5,
        sigma_kp=0.1,
        corruption_prob=0.0,
        corruption_scale=0.0,
    )
    return World(
        label_space=LabelSpace((0,), (1, 2)),
        mix_tex=np.array([[1.0, 2.0], [0.5, -1.0], [0.0, 3.0]]),
        mix_pose=np.array([[-1.0, 0.0], [2.0, 1.0], [1.0, 1.0]]),
        mix_view=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
        kp_map=np.ones((KEYPOINT_DIM, 2)),
        class_textures={},
        config=cfg,
    )


class TestMakeWorld:
    def test_same_seed_bit_identical(self):
        a = make_world(WorldConfig(), seed=11)
        b = make_world(WorldConfig(), seed=11)
        assert dumps(world_to_dict(a)) == dumps(world_to_dict(b))

    def test_different_seed_differs(self):
        a = make_world(WorldConfig(), seed=11)
        b = make_world(WorldConfig(), seed=12)
        assert dumps(world_to_dict(a)) != dumps(world_to_dict(b))

    def test_half_split_arithmetic(self):
        cfg = WorldConfig(n_novel_classes=5, samples_per_class=20)
        world = make_world(cfg, seed=0)
        assert len(world.test_samples) == 50

    def test_test_set_is_novel_only(self, tiny_world):
        novel = set(tiny_world.label_space.novel_labels)
        assert all(s.label in novel for s in tiny_world.test_samples)

    def test_noise_free_features_recomputable(self):
        cfg = WorldConfig(sigma_obs=0.0, n_base_classes=2, n_novel_classes=2, samples_per_class=4)
        world = make_world(cfg, seed=3)
        for s in world.train_samples + world.test_samples:
            expected = (
                manual_matvec(world.mix_tex, s.texture)
                + manual_matvec(world.mix_pose, s.pose)
                + manual_matvec(world.mix_view, s.view.as_array())
            )
            np.testing.assert_allclose(s.features, expected, rtol=1e-12, atol=1e-12)

    def test_invalid_config_rejected(self):
        with pytest.raises(ConfigError, match="n_novel_classes"):
            make_world(WorldConfig(n_novel_classes=1), seed=0)
        with pytest.raises(ConfigError, match="corruption_prob"):
            make_world(WorldConfig(corruption_prob=1.5), seed=0)

    def test_mixing_matrix_scale(self):
        # entries are N(0, 1/input_dim); empirical std within 10%
        world = make_world(WorldConfig(d_tex=64, d_feat=256, samples_per_class=2), seed=4)
        assert abs(world.mix_tex.std() - 1 / math.sqrt(64)) < 0.1 / math.sqrt(64)


class TestRender:
    def test_zero_latents_zero_features(self):
        w = hand_world()
        out = render(w, np.zeros(2), np.zeros(2), ViewAngles(0, 0, 0), np.zeros(3))
        assert np.array_equal(out, np.zeros(3))

    def test_hand_computed_features(self):
        w = hand_world()
        tex = np.array([1.0, -1.0])
        pose = np.array([2.0, 0.5])
        view = ViewAngles(0.1, 0.2, 0.3)
        noise = np.array([1.0, 1.0, -1.0])
        expected = (
            manual_matvec(w.mix_tex, tex)
            + manual_matvec(w.mix_pose, pose)
            + manual_matvec(w.mix_view, view.as_array())
            + 0.5 * noise
        )
        np.testing.assert_allclose(render(w, tex, pose, view, noise), expected, rtol=1e-15)

    def test_additive_in_texture(self):
        w = hand_world()
        zero_view = ViewAngles(0, 0, 0)
        a1, a2 = np.array([1.0, 2.0]), np.array([-0.5, 0.3])
        p = np.array([0.4, -0.6])
        joint = render(w, a1 + a2, p, zero_view, np.zeros(3))
        split = render(w, a1, p, zero_view, np.zeros(3)) + render(
            w, a2, np.zeros(2), zero_view, np.zeros(3)
        )
        np.testing.assert_allclose(joint, split, rtol=1e-12)

    def test_superposition_property(self):
        cfg = WorldConfig(sigma_obs=0.0)
        world = make_world(WorldConfig(sigma_obs=0.0, samples_per_class=2), seed=9)
        rng = np.random.default_rng(0)
        for _ in range(20):
            t1, t2 = rng.standard_normal((2, cfg.d_tex))
            p1, p2 = rng.standard_normal((2, cfg.d_pose))
            v1, v2 = rng.uniform(0, VIEW_ANGLE_MAX, (2, 3))
            zero = np.zeros(cfg.d_feat)
            lhs = render(world, t1 + t2, p1 + p2, ViewAngles(*(v1 + v2)), zero)
            rhs = render(world, t1, p1, ViewAngles(*v1), zero) + render(
                world, t2, p2, ViewAngles(*v2), zero
            )
            np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)

    def test_dimension_mismatch(self):
        w = hand_world()
        with pytest.raises(ValueError, match="texture"):
            render(w, np.zeros(3), np.zeros(2), ViewAngles(0, 0, 0), np.zeros(3))
        with pytest.raises(ValueError, match="noise"):
            render(w, np.zeros(2), np.zeros(2), ViewAngles(0, 0, 0), np.zeros(4))


class TestKeypoints:
    def test_zero_pose_at_origin(self):
        w = hand_world()
        kp = keypoints_of(w, np.zeros(2), np.zeros(KEYPOINT_DIM))
        assert np.array_equal(kp, np.zeros(KEYPOINT_DIM))

    def test_noiseless_map_deterministic(self):
        cfg = WorldConfig(sigma_kp=0.0, samples_per_class=2)
        world = make_world(cfg, seed=1)
        pose = np.arange(cfg.d_pose, dtype=float)
        a = keypoints_of(world, pose, np.ones(KEYPOINT_DIM))
        b = keypoints_of(world, pose, np.zeros(KEYPOINT_DIM))
        np.testing.assert_array_equal(a, b)

    def test_all_ones_map(self):
        # d_pose=1 world with kp_map of ones: pose (2,) maps to thirty 2s
        cfg = WorldConfig(
            n_base_classes=1, n_novel_classes=2, samples_per_class=2, d_pose=1, sigma_kp=0.0
        )
        world = make_world(cfg, seed=0)
        world.kp_map = np.ones((KEYPOINT_DIM, 1))
        kp = keypoints_of(world, np.array([2.0]), np.zeros(KEYPOINT_DIM))
        np.testing.assert_array_equal(kp, np.full(KEYPOINT_DIM, 2.0))


class TestGenViewSet:
    def test_cardinality_and_tagging(self, tiny_world):
        novel = tiny_world.train_novel()[0]
        cands = gen_view_set(tiny_world, novel, GenConfig(n_views=12, n_poses=1), seed=2)
        assert len(cands) == 12
        assert all(c.branch is Branch.VIEW for c in cands)
        assert all(c.source_id == novel.id for c in cands)
        assert all(c.donor_id is None for c in cands)

    def test_angles_within_range(self, tiny_world):
        novel = tiny_world.train_novel()[0]
        for c in gen_view_set(tiny_world, novel, GenConfig(n_views=50), seed=8):
            for angle in (c.sample.view.alpha, c.sample.view.beta, c.sample.view.gamma):
                assert 0.0 <= angle <= VIEW_ANGLE_MAX

    def test_noise_free_features_recomputable(self):
        cfg = WorldConfig(sigma_obs=0.0, samples_per_class=4)
        world = make_world(cfg, seed=6)
        novel = world.train_novel()[0]
        for c in gen_view_set(world, novel, GenConfig(n_views=5), seed=3):
            expected = render(world, novel.texture, novel.pose, c.sample.view, np.zeros(cfg.d_feat))
            np.testing.assert_allclose(c.sample.features, expected, rtol=1e-12)

    def test_rejects_base_sample(self, tiny_world):
        base = tiny_world.train_base()[0]
        with pytest.raises(ValueError, match="novel"):
            gen_view_set(tiny_world, base, GenConfig(), seed=0)

    def test_deterministic_in_seed(self, tiny_world):
        novel = tiny_world.train_novel()[0]
        a = gen_view_set(tiny_world, novel, GenConfig(n_views=4), seed=5)
        b = gen_view_set(tiny_world, novel, GenConfig(n_views=4), seed=5)
        for ca, cb in zip(a, b):
            np.testing.assert_array_equal(ca.sample.features, cb.sample.features)


class TestGenPoseSet:
    def test_clean_features_recomputable(self):
        cfg = WorldConfig(sigma_obs=0.0, corruption_prob=0.0, samples_per_class=10)
        world = make_world(cfg, seed=6)
        novel = world.train_novel()[0]
        base = world.train_base()
        cands = gen_pose_set(world, novel, base, GenConfig(n_poses=40), seed=4)
        assert len(cands) == 40
        donors = {s.id: s for s in base}
        for c in cands:
            donor = donors[c.donor_id]
            expected = render(world, novel.texture, donor.pose, donor.view, np.zeros(cfg.d_feat))
            np.testing.assert_allclose(c.sample.features, expected, rtol=1e-12)
            np.testing.assert_array_equal(c.sample.pose, donor.pose)

    def test_zero_scale_corruption_is_identity(self, tiny_world):
        novel = tiny_world.train_novel()[0]
        base = tiny_world.train_base()
        tiny_world.config = replace(tiny_world.config, corruption_prob=0.0)
        a = gen_pose_set(tiny_world, novel, base, GenConfig(n_poses=10), seed=9)
        tiny_world.config = replace(tiny_world.config, corruption_prob=1.0, corruption_scale=0.0)
        b = gen_pose_set(tiny_world, novel, base, GenConfig(n_poses=10), seed=9)
        for ca, cb in zip(a, b):
            np.testing.assert_array_equal(ca.sample.features, cb.sample.features)
            np.testing.assert_array_equal(ca.sample.keypoints, cb.sample.keypoints)

    def test_labels_follow_texture_not_donor(self, tiny_world):
        novel = tiny_world.train_novel()[0]
        base = tiny_world.train_base()
        for c in gen_pose_set(tiny_world, novel, base, GenConfig(n_poses=8), seed=1):
            assert c.sample.label == novel.label
            assert c.branch is Branch.POSE

    def test_distinct_donors(self, tiny_world):
        novel = tiny_world.train_novel()[0]
        base = tiny_world.train_base()
        cands = gen_pose_set(tiny_world, novel, base, GenConfig(n_poses=len(base)), seed=1)
        assert len({c.donor_id for c in cands}) == len(base)

    def test_insufficient_donors(self, tiny_world):
        novel = tiny_world.train_novel()[0]
        base = tiny_world.train_base()
        with pytest.raises(ValueError, match="distinct base donors"):
            gen_pose_set(tiny_world, novel, base, GenConfig(n_poses=len(base) + 1), seed=1)

    def test_same_donor_same_keypoints_when_noiseless(self):
        cfg = WorldConfig(sigma_kp=0.0, samples_per_class=6)
        world = make_world(cfg, seed=2)
        novel = world.train_novel()[:2]
        base = world.train_base()
        a = gen_pose_set(world, novel[0], base, GenConfig(n_poses=20), seed=3)
        b = gen_pose_set(world, novel[1], base, GenConfig(n_poses=20), seed=4)
        kp_a = {c.donor_id: c.sample.keypoints for c in a}
        for c in b:
            if c.donor_id in kp_a:
                np.testing.assert_array_equal(c.sample.keypoints, kp_a[c.donor_id])


class TestUnionPool:
    def test_pool_size_is_views_plus_poses(self, tiny_world):
        novel = tiny_world.train_novel()[0]
        base = tiny_world.train_base()
        gc = GenConfig(n_views=7, n_poses=9)
        views = gen_view_set(tiny_world, novel, gc, seed=1, id_start=1000)
        poses = gen_pose_set(tiny_world, novel, base, gc, seed=2, id_start=1007)
        pool = views + poses
        assert len(pool) == 7 + 9
        assert len({c.id for c in pool}) == 16


class TestSplitKshot:
    def test_one_shot_cardinality(self, desk_world):
        novel, base, test = split_kshot(desk_world, 1, seed=0)
        assert len(novel) == 5
        labels = [s.label for s in novel]
        assert sorted(labels) == sorted(set(labels))

    def test_determinism(self, desk_world):
        a, _, _ = split_kshot(desk_world, 3, seed=4)
        b, _, _ = split_kshot(desk_world, 3, seed=4)
        assert [s.id for s in a] == [s.id for s in b]

    def test_paper_shot_counts_supported(self, desk_world):
        for k in (1, 2, 5, 10, 20):
            novel, base, test = split_kshot(desk_world, k, seed=1)
            assert len(novel) == 5 * k
            assert len(base) == 250
            assert len(test) == 125

    def test_k_too_large(self, desk_world):
        with pytest.raises(ValueError, match="exceeds"):
            split_kshot(desk_world, 26, seed=0)

    def test_disjoint_from_test(self, desk_world):
        novel, base, test = split_kshot(desk_world, 5, seed=2)
        train_ids = {s.id for s in novel} | {s.id for s in base}
        assert not train_ids & {s.id for s in test}


class TestCorruptionSignal:
    def test_corrupted_candidates_score_lower_on_average(self):
        """Large-scale corruption must depress same-class confidence on average
        under a classifier trained on clean data."""
        cfg = WorldConfig(corruption_scale=5.0, corruption_prob=0.5)
        world = make_world(cfg, seed=42)
        base = world.train_base()
        X = np.stack([s.features for s in base])
        y = np.array([s.label for s in base])
        clf = ShallowNetClassifier(epochs=200, seed=7).fit(X, y)
        d_prime = clf.adapt_head(world.label_space.novel_labels, seed=13)
        novel_train = world.train_novel()
        d_prime.fine_tune(
            np.stack([s.features for s in novel_train]),
            np.array([s.label for s in novel_train]),
            TrainConfig(epochs=50, shuffle_seed=3),
        )

        clean_conf, corrupted_conf = [], []
        for novel in world.train_novel()[:10]:
            cands = gen_pose_set(world, novel, base, GenConfig(n_poses=40), seed=novel.id)
            feats = np.stack([c.sample.features for c in cands])
            conf = d_prime.confidence(feats, novel.label)
            for c, s in zip(cands, conf):
                clean = render(world, c.sample.texture, c.sample.pose, c.sample.view, np.zeros(cfg.d_feat))
                if np.linalg.norm(c.sample.features - clean) > 3.0:
                    corrupted_conf.append(s)
                else:
                    clean_conf.append(s)
        assert np.mean(corrupted_conf) < np.mean(clean_conf)


class TestValidateWorld:
    def test_valid_world_empty_report(self, tiny_world):
        assert validate_world(tiny_world) == []

    def test_label_overlap_reported(self, tiny_world):
        tiny_world.label_space = LabelSpace(
            base_labels=tiny_world.label_space.base_labels,
            novel_labels=tiny_world.label_space.base_labels[:1]
            + tiny_world.label_space.novel_labels,
        )
        codes = {v.code for v in validate_world(tiny_world)}
        assert "label-overlap" in codes

    def test_keypoint_arity_reported(self, tiny_world):
        tiny_world.train_samples[0].keypoints = np.zeros(28)  # 14 points
        codes = {v.code for v in validate_world(tiny_world)}
        assert "keypoint-arity" in codes

    def test_base_label_in_test_reported(self, tiny_world):
        bad = tiny_world.test_samples[0]
        bad.label = tiny_world.label_space.base_labels[0]
        codes = {v.code for v in validate_world(tiny_world)}
        assert "test-label-base" in codes

    def test_train_test_id_overlap_reported(self, tiny_world):
        tiny_world.test_samples[0].id = tiny_world.train_samples[0].id
        codes = {v.code for v in validate_world(tiny_world)}
        assert "train-test-overlap" in codes
