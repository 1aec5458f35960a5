"""Seeded synthetic universe standing in for 3D-model-based hallucination.

A world renders latent factors linearly into feature space:

    features = mix_tex @ texture + mix_pose @ pose + mix_view @ angles
               + sigma_obs * noise

Class identity lives entirely in the texture (one prototype per class),
while pose and view angles are nuisance factors. The two candidate
generators mirror the two hallucination routes: ``gen_view_set`` re-renders
a novel sample's own texture and pose under fresh camera angles, and
``gen_pose_set`` applies the novel texture to base-class donor poses and
angles. Pose transfer is noisy: with probability ``corruption_prob`` a
candidate's texture is perturbed before rendering, which is invisible to
downstream code except through the features themselves. That corruption is
the signal the self-paced selector has to learn to avoid.

All operations are pure functions of (world, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datamodel import (
    KEYPOINT_DIM,
    Branch,
    Candidate,
    LabelSpace,
    Sample,
    ViewAngles,
    Violation,
)

# Upper edge of the uniform view-angle sampling range, per camera axis.
VIEW_ANGLE_MAX = math.pi / 6

__all__ = [
    "VIEW_ANGLE_MAX",
    "GenConfig",
    "World",
    "WorldConfig",
    "gen_pose_set",
    "gen_view_set",
    "keypoints_of",
    "make_world",
    "render",
    "split_kshot",
    "validate_world",
]


class ConfigError(ValueError):
    """A configuration value violates its documented range or shape."""


@dataclass(frozen=True)
class WorldConfig:
    """Desk-scale world defaults: episodes run in seconds, yet random
    candidate selection is measurably worse than ranked selection."""

    n_base_classes: int = 10
    n_novel_classes: int = 5
    samples_per_class: int = 50
    d_tex: int = 8
    d_pose: int = 6
    d_feat: int = 32
    sigma_obs: float = 0.1
    sigma_kp: float = 0.05
    corruption_prob: float = 0.3
    corruption_scale: float = 3.0

    def violations(self) -> list[str]:
        bad = []
        for name in ("n_base_classes", "samples_per_class", "d_tex", "d_pose", "d_feat"):
            if getattr(self, name) < 1:
                bad.append(f"{name} must be >= 1")
        if self.n_novel_classes < 2:
            bad.append("n_novel_classes must be >= 2")
        if self.sigma_obs < 0:
            bad.append("sigma_obs must be >= 0")
        if self.sigma_kp < 0:
            bad.append("sigma_kp must be >= 0")
        if not 0.0 <= self.corruption_prob <= 1.0:
            bad.append("corruption_prob must lie in [0, 1]")
        if self.corruption_scale < 0:
            bad.append("corruption_scale must be >= 0")
        return bad


@dataclass(frozen=True)
class GenConfig:
    """Pool sizes: view-branch and pose-branch candidates per novel sample."""

    n_views: int = 12
    n_poses: int = 40

    def violations(self) -> list[str]:
        bad = []
        if self.n_views < 1:
            bad.append("n_views must be >= 1")
        if self.n_poses < 1:
            bad.append("n_poses must be >= 1")
        return bad


@dataclass(eq=False)
class World:
    """A fully materialized synthetic universe.

    ``train_samples`` spans base and novel classes; ``test_samples``
    carries novel classes only. Sample ids are dense and unique across
    both lists.
    """

    label_space: LabelSpace
    mix_tex: np.ndarray
    mix_pose: np.ndarray
    mix_view: np.ndarray
    kp_map: np.ndarray
    class_textures: dict[int, np.ndarray]
    train_samples: list[Sample] = field(default_factory=list)
    test_samples: list[Sample] = field(default_factory=list)
    config: WorldConfig = field(default_factory=WorldConfig)
    seed: int = 0

    def next_sample_id(self) -> int:
        ids = [s.id for s in self.train_samples] + [s.id for s in self.test_samples]
        return max(ids, default=-1) + 1

    def train_base(self) -> list[Sample]:
        base = set(self.label_space.base_labels)
        return [s for s in self.train_samples if s.label in base]

    def train_novel(self) -> list[Sample]:
        novel = set(self.label_space.novel_labels)
        return [s for s in self.train_samples if s.label in novel]


def make_world(cfg: WorldConfig, seed: int) -> World:
    """Build a world deterministically from (cfg, seed).

    Mixing matrices draw i.i.d. standard normal entries scaled by
    1/sqrt(input dim); each class gets a texture prototype ~ N(0, I); each
    sample draws a fresh pose ~ N(0, I) and view angles uniform in
    [0, pi/6]^3. Every class's samples are split half/half into train and
    test, but only novel-class test halves are retained.
    """
    bad = cfg.violations()
    if bad:
        raise ConfigError("; ".join(bad))

    rng = np.random.default_rng(seed)
    base = tuple(range(cfg.n_base_classes))
    novel = tuple(range(cfg.n_base_classes, cfg.n_base_classes + cfg.n_novel_classes))
    labels = LabelSpace(base_labels=base, novel_labels=novel)

    mix_tex = rng.standard_normal((cfg.d_feat, cfg.d_tex)) / math.sqrt(cfg.d_tex)
    mix_pose = rng.standard_normal((cfg.d_feat, cfg.d_pose)) / math.sqrt(cfg.d_pose)
    mix_view = rng.standard_normal((cfg.d_feat, 3)) / math.sqrt(3)
    kp_map = rng.standard_normal((KEYPOINT_DIM, cfg.d_pose)) / math.sqrt(cfg.d_pose)

    class_textures = {c: rng.standard_normal(cfg.d_tex) for c in labels.all_labels}

    world = World(
        label_space=labels,
        mix_tex=mix_tex,
        mix_pose=mix_pose,
        mix_view=mix_view,
        kp_map=kp_map,
        class_textures=class_textures,
        config=cfg,
        seed=seed,
    )

    n_test = cfg.samples_per_class // 2
    n_train = cfg.samples_per_class - n_test
    novel_set = set(novel)
    next_id = 0
    for label in labels.all_labels:
        texture = class_textures[label]
        for j in range(cfg.samples_per_class):
            pose = rng.standard_normal(cfg.d_pose)
            view = ViewAngles(*rng.uniform(0.0, VIEW_ANGLE_MAX, size=3))
            obs_noise = rng.standard_normal(cfg.d_feat)
            kp_noise = rng.standard_normal(KEYPOINT_DIM)
            sample = Sample(
                id=next_id,
                features=render(world, texture, pose, view, obs_noise),
                label=label,
                keypoints=keypoints_of(world, pose, kp_noise),
                texture=texture,
                pose=pose,
                view=view,
            )
            next_id += 1
            if j < n_train:
                world.train_samples.append(sample)
            elif label in novel_set:
                world.test_samples.append(sample)
            # base-class test halves are generated but not retained
    return world


def render(
    world: World,
    texture: np.ndarray,
    pose: np.ndarray,
    view: ViewAngles,
    noise_draw: np.ndarray,
) -> np.ndarray:
    """Map latent factors to a feature vector; pure given the noise draw."""
    cfg = world.config
    texture = np.asarray(texture, dtype=np.float64)
    pose = np.asarray(pose, dtype=np.float64)
    noise_draw = np.asarray(noise_draw, dtype=np.float64)
    if texture.shape != (cfg.d_tex,):
        raise ValueError(f"texture has shape {texture.shape}, expected ({cfg.d_tex},)")
    if pose.shape != (cfg.d_pose,):
        raise ValueError(f"pose has shape {pose.shape}, expected ({cfg.d_pose},)")
    if noise_draw.shape != (cfg.d_feat,):
        raise ValueError(
            f"noise_draw has shape {noise_draw.shape}, expected ({cfg.d_feat},)"
        )
    return (
        world.mix_tex @ texture
        + world.mix_pose @ pose
        + world.mix_view @ view.as_array()
        + cfg.sigma_obs * noise_draw
    )


def keypoints_of(world: World, pose: np.ndarray, noise_draw: np.ndarray) -> np.ndarray:
    """Project a pose to its flattened 15-point keypoint vector."""
    cfg = world.config
    pose = np.asarray(pose, dtype=np.float64)
    noise_draw = np.asarray(noise_draw, dtype=np.float64)
    if pose.shape != (cfg.d_pose,):
        raise ValueError(f"pose has shape {pose.shape}, expected ({cfg.d_pose},)")
    if noise_draw.shape != (KEYPOINT_DIM,):
        raise ValueError(
            f"noise_draw has shape {noise_draw.shape}, expected ({KEYPOINT_DIM},)"
        )
    return world.kp_map @ pose + cfg.sigma_kp * noise_draw


def gen_view_set(
    world: World,
    novel_sample: Sample,
    gen_cfg: GenConfig,
    seed: int,
    id_start: int = 0,
) -> list[Candidate]:
    """Hallucinate n_views candidates of the sample under fresh view angles.

    Texture and pose are the sample's own; only the camera moves. Keypoints
    are re-rendered from the shared pose with fresh keypoint noise.
    """
    if novel_sample.label not in world.label_space.novel_labels:
        raise ValueError(f"sample {novel_sample.id} is not a novel-class sample")
    cfg = world.config
    rng = np.random.default_rng(seed)
    out = []
    for j in range(gen_cfg.n_views):
        view = ViewAngles(*rng.uniform(0.0, VIEW_ANGLE_MAX, size=3))
        obs_noise = rng.standard_normal(cfg.d_feat)
        kp_noise = rng.standard_normal(KEYPOINT_DIM)
        sample = Sample(
            id=id_start + j,
            features=render(world, novel_sample.texture, novel_sample.pose, view, obs_noise),
            label=novel_sample.label,
            keypoints=keypoints_of(world, novel_sample.pose, kp_noise),
            texture=novel_sample.texture,
            pose=novel_sample.pose,
            view=view,
        )
        out.append(
            Candidate(
                id=sample.id,
                sample=sample,
                branch=Branch.VIEW,
                source_id=novel_sample.id,
            )
        )
    return out


def gen_pose_set(
    world: World,
    novel_sample: Sample,
    base_samples: list[Sample],
    gen_cfg: GenConfig,
    seed: int,
    id_start: int = 0,
) -> list[Candidate]:
    """Transfer the novel sample's texture onto n_poses base-class donors.

    Each candidate inherits one distinct donor's pose and view angles.
    With probability corruption_prob the texture fed to the renderer is
    perturbed by corruption_scale times a standard-normal draw, modelling
    failed pose transfer; the stored latent keeps the clean texture, so
    corruption shows up only in the features. The corruption draws are
    consumed whether or not they fire, so a zero corruption_scale is
    bit-identical to a zero corruption_prob.
    """
    if gen_cfg.n_poses > len(base_samples):
        raise ValueError(
            f"need {gen_cfg.n_poses} distinct base donors, have {len(base_samples)}"
        )
    cfg = world.config
    rng = np.random.default_rng(seed)
    donor_idx = rng.choice(len(base_samples), size=gen_cfg.n_poses, replace=False)
    out = []
    for j, di in enumerate(donor_idx):
        donor = base_samples[int(di)]
        corrupt = rng.random() < cfg.corruption_prob
        direction = rng.standard_normal(cfg.d_tex)
        scale = cfg.corruption_scale if corrupt else 0.0
        tex_used = novel_sample.texture + scale * direction
        obs_noise = rng.standard_normal(cfg.d_feat)
        kp_noise = rng.standard_normal(KEYPOINT_DIM)
        sample = Sample(
            id=id_start + j,
            features=render(world, tex_used, donor.pose, donor.view, obs_noise),
            label=novel_sample.label,
            keypoints=keypoints_of(world, donor.pose, kp_noise),
            texture=novel_sample.texture,
            pose=donor.pose,
            view=donor.view,
        )
        out.append(
            Candidate(
                id=sample.id,
                sample=sample,
                branch=Branch.POSE,
                source_id=novel_sample.id,
                donor_id=donor.id,
            )
        )
    return out


def split_kshot(
    world: World, k: int, seed: int
) -> tuple[list[Sample], list[Sample], list[Sample]]:
    """Draw k training samples per novel class, seeded, without replacement.

    Returns (novel k-shot training samples, full base training set, full
    novel test set).
    """
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[Sample]] = {c: [] for c in world.label_space.novel_labels}
    for s in world.train_samples:
        if s.label in by_class:
            by_class[s.label].append(s)

    picked: list[Sample] = []
    for label in world.label_space.novel_labels:
        pool = sorted(by_class[label], key=lambda s: s.id)
        if k > len(pool):
            raise ValueError(
                f"k={k} exceeds the {len(pool)} training samples of class {label}"
            )
        idx = rng.choice(len(pool), size=k, replace=False)
        picked.extend(pool[int(i)] for i in sorted(idx))
    return picked, world.train_base(), list(world.test_samples)


def validate_world(world: World) -> list[Violation]:
    """Collect every invariant violation found; empty means valid."""
    report: list[Violation] = []
    ls = world.label_space
    cfg = world.config

    overlap = set(ls.base_labels) & set(ls.novel_labels)
    if overlap:
        report.append(
            Violation("label-overlap", f"labels in both base and novel sets: {sorted(overlap)}")
        )
    if not ls.base_labels:
        report.append(Violation("empty-label-set", "base label set is empty"))
    if not ls.novel_labels:
        report.append(Violation("empty-label-set", "novel label set is empty"))

    all_labels = set(ls.all_labels)
    novel = set(ls.novel_labels)
    train_ids = {s.id for s in world.train_samples}
    test_ids = {s.id for s in world.test_samples}
    shared = train_ids & test_ids
    if shared:
        report.append(
            Violation("train-test-overlap", f"sample ids in both splits: {sorted(shared)[:5]}")
        )
    for s in world.test_samples:
        if s.label not in novel:
            report.append(
                Violation("test-label-base", f"test sample {s.id} carries base label {s.label}")
            )
    for s in world.train_samples + world.test_samples:
        if s.label not in all_labels:
            report.append(
                Violation("unknown-label", f"sample {s.id} has label {s.label} outside the label space")
            )
        if s.features.shape != (cfg.d_feat,):
            report.append(
                Violation("feature-dim", f"sample {s.id} features have shape {s.features.shape}")
            )
        if s.keypoints.shape != (KEYPOINT_DIM,):
            report.append(
                Violation("keypoint-arity", f"sample {s.id} keypoints have shape {s.keypoints.shape}")
            )
        elif not np.all(np.isfinite(s.keypoints)):
            report.append(Violation("non-finite", f"sample {s.id} keypoints are not finite"))
        if s.features.shape == (cfg.d_feat,) and not np.all(np.isfinite(s.features)):
            report.append(Violation("non-finite", f"sample {s.id} features are not finite"))

    for name, mat, shape in (
        ("mix_tex", world.mix_tex, (cfg.d_feat, cfg.d_tex)),
        ("mix_pose", world.mix_pose, (cfg.d_feat, cfg.d_pose)),
        ("mix_view", world.mix_view, (cfg.d_feat, 3)),
        ("kp_map", world.kp_map, (KEYPOINT_DIM, cfg.d_pose)),
    ):
        if mat.shape != shape:
            report.append(
                Violation("matrix-dim", f"{name} has shape {mat.shape}, expected {shape}")
            )
    return report
