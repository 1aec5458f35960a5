"""JSON persistence for worlds, classifier weights, and episode results.

Every document carries ``format_version`` (currently 1) and a ``kind``
tag; loaders validate both plus all array shapes. Serialization is
canonical (sorted keys, fixed indentation, shortest-round-trip floats),
so identical in-memory values always produce identical bytes. Episode
wall-clock timing is intentionally not serialized.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .classifier import ShallowNetClassifier
from .datamodel import Branch, Candidate, CandidateState, EpisodeSpec, LabelSpace, Sample, Variant, ViewAngles
from .evaluate import EpisodeResult, PoolEntry
from .network import NetParams
from .spl import SelectionEvent
from .world import GenConfig, World, WorldConfig

FORMAT_VERSION = 1

__all__ = [
    "FORMAT_VERSION",
    "SchemaError",
    "candidate_from_dict",
    "candidate_to_dict",
    "classifier_from_dict",
    "classifier_to_dict",
    "dumps",
    "episode_result_to_dict",
    "load_classifier",
    "load_world",
    "sample_from_dict",
    "sample_to_dict",
    "save_classifier",
    "save_world",
    "world_from_dict",
    "world_to_dict",
    "write_ablation_csv",
]


class SchemaError(ValueError):
    """A persisted document is malformed or has the wrong kind/version."""


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _check_header(doc: dict, kind: str) -> None:
    if doc.get("format_version") != FORMAT_VERSION:
        raise SchemaError(
            f"unsupported format_version {doc.get('format_version')!r}, expected {FORMAT_VERSION}"
        )
    if doc.get("kind") != kind:
        raise SchemaError(f"expected kind {kind!r}, found {doc.get('kind')!r}")


def _array(doc, key, shape=None) -> np.ndarray:
    try:
        arr = np.asarray(doc[key], dtype=np.float64)
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"field {key!r} is missing or not numeric") from exc
    if shape is not None and arr.shape != shape:
        raise SchemaError(f"field {key!r} has shape {arr.shape}, expected {shape}")
    return arr


# -- samples and candidates -------------------------------------------------


def sample_to_dict(s: Sample) -> dict:
    return {
        "id": s.id,
        "label": s.label,
        "features": s.features.tolist(),
        "keypoints": s.keypoints.tolist(),
        "texture": s.texture.tolist(),
        "pose": s.pose.tolist(),
        "view": {"alpha": s.view.alpha, "beta": s.view.beta, "gamma": s.view.gamma},
    }


def sample_from_dict(doc: dict) -> Sample:
    view = doc["view"]
    return Sample(
        id=int(doc["id"]),
        features=_array(doc, "features"),
        label=int(doc["label"]),
        keypoints=_array(doc, "keypoints"),
        texture=_array(doc, "texture"),
        pose=_array(doc, "pose"),
        view=ViewAngles(float(view["alpha"]), float(view["beta"]), float(view["gamma"])),
    )


def candidate_to_dict(c: Candidate) -> dict:
    return {
        "id": c.id,
        "sample": sample_to_dict(c.sample),
        "branch": c.branch.value,
        "source_id": c.source_id,
        "donor_id": c.donor_id,
        "state": c.state.value,
        "cluster_id": c.cluster_id,
    }


def candidate_from_dict(doc: dict) -> Candidate:
    return Candidate(
        id=int(doc["id"]),
        sample=sample_from_dict(doc["sample"]),
        branch=Branch(doc["branch"]),
        source_id=int(doc["source_id"]),
        donor_id=None if doc.get("donor_id") is None else int(doc["donor_id"]),
        state=CandidateState(doc["state"]),
        cluster_id=None if doc.get("cluster_id") is None else int(doc["cluster_id"]),
    )


# -- world -------------------------------------------------------------------


def world_config_to_dict(cfg: WorldConfig) -> dict:
    return {
        "n_base_classes": cfg.n_base_classes,
        "n_novel_classes": cfg.n_novel_classes,
        "samples_per_class": cfg.samples_per_class,
        "d_tex": cfg.d_tex,
        "d_pose": cfg.d_pose,
        "d_feat": cfg.d_feat,
        "sigma_obs": cfg.sigma_obs,
        "sigma_kp": cfg.sigma_kp,
        "corruption_prob": cfg.corruption_prob,
        "corruption_scale": cfg.corruption_scale,
    }


def world_to_dict(world: World) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "world",
        "seed": world.seed,
        "config": world_config_to_dict(world.config),
        "label_space": {
            "base_labels": list(world.label_space.base_labels),
            "novel_labels": list(world.label_space.novel_labels),
        },
        "mix_tex": world.mix_tex.tolist(),
        "mix_pose": world.mix_pose.tolist(),
        "mix_view": world.mix_view.tolist(),
        "kp_map": world.kp_map.tolist(),
        "class_textures": {str(c): t.tolist() for c, t in world.class_textures.items()},
        "train_samples": [sample_to_dict(s) for s in world.train_samples],
        "test_samples": [sample_to_dict(s) for s in world.test_samples],
    }


def world_from_dict(doc: dict) -> World:
    _check_header(doc, "world")
    try:
        cfg = WorldConfig(**doc["config"])
        ls = doc["label_space"]
        label_space = LabelSpace(
            base_labels=tuple(int(c) for c in ls["base_labels"]),
            novel_labels=tuple(int(c) for c in ls["novel_labels"]),
        )
        world = World(
            label_space=label_space,
            mix_tex=_array(doc, "mix_tex", (cfg.d_feat, cfg.d_tex)),
            mix_pose=_array(doc, "mix_pose", (cfg.d_feat, cfg.d_pose)),
            mix_view=_array(doc, "mix_view", (cfg.d_feat, 3)),
            kp_map=_array(doc, "kp_map"),
            class_textures={int(c): np.asarray(t, dtype=np.float64) for c, t in doc["class_textures"].items()},
            train_samples=[sample_from_dict(s) for s in doc["train_samples"]],
            test_samples=[sample_from_dict(s) for s in doc["test_samples"]],
            config=cfg,
            seed=int(doc["seed"]),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed world document: {exc}") from exc
    return world


# -- classifier ----------------------------------------------------------------


def classifier_to_dict(clf: ShallowNetClassifier) -> dict:
    p = clf.params_
    return {
        "format_version": FORMAT_VERSION,
        "kind": "classifier",
        "hyperparams": clf.get_params(),
        "classes": [int(c) for c in clf.classes_],
        "d_feat": p.d_feat,
        "hidden_dim": p.hidden_dim,
        "num_classes": p.num_classes,
        "w1": p.w1.tolist(),
        "b1": p.b1.tolist(),
        "w2": p.w2.tolist(),
        "b2": p.b2.tolist(),
    }


def classifier_from_dict(doc: dict) -> ShallowNetClassifier:
    _check_header(doc, "classifier")
    try:
        d, h, c = int(doc["d_feat"]), int(doc["hidden_dim"]), int(doc["num_classes"])
        clf = ShallowNetClassifier(**doc["hyperparams"])
        clf.params_ = NetParams(
            w1=_array(doc, "w1", (h, d)),
            b1=_array(doc, "b1", (h,)),
            w2=_array(doc, "w2", (c, h)),
            b2=_array(doc, "b2", (c,)),
        )
        classes = np.asarray(doc["classes"], dtype=np.int64)
        if classes.shape != (c,):
            raise SchemaError(f"{classes.shape[0]} classes listed for a {c}-way head")
        clf.classes_ = classes
        clf.n_features_in_ = d
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"malformed classifier document: {exc}") from exc
    return clf


# -- episode results ------------------------------------------------------------


def _event_to_dict(e: SelectionEvent) -> dict:
    return {
        "iteration": e.iteration,
        "class_id": e.class_id,
        "candidate_id": e.candidate_id,
        "branch": e.branch.value,
        "score": e.score,
        "dismissed_ids": list(e.dismissed_ids),
    }


def _pool_entry_to_dict(p: PoolEntry) -> dict:
    return {
        "id": p.id,
        "branch": p.branch.value,
        "source_id": p.source_id,
        "donor_id": p.donor_id,
        "cluster_id": p.cluster_id,
    }


def episode_result_to_dict(res: EpisodeResult) -> dict:
    spec = res.spec
    return {
        "format_version": FORMAT_VERSION,
        "kind": "episode_result",
        "spec": {
            "k_shot": spec.k_shot,
            "variant": spec.variant.value,
            "seed": spec.seed,
            "metric_ks": list(spec.metric_ks),
        },
        "topk": {str(k): v for k, v in res.topk.items()},
        "history": [_event_to_dict(e) for e in res.history],
        "pools": {
            str(c): [_pool_entry_to_dict(p) for p in entries]
            for c, entries in res.pools.items()
        },
        "world_seed": res.world_seed,
        "world_config": world_config_to_dict(res.world_config) if res.world_config else None,
        "gen_config": {"n_views": res.gen_config.n_views, "n_poses": res.gen_config.n_poses}
        if res.gen_config
        else None,
        "spl_config": _spl_config_to_dict(res.spl_config) if res.spl_config else None,
    }


def _spl_config_to_dict(cfg) -> dict:
    return {
        "r": cfg.r,
        "n_iterations": cfg.n_iterations,
        "epochs_per_iteration": cfg.epochs_per_iteration,
        "head_init_epochs": cfg.head_init_epochs,
        "n_clusters": cfg.n_clusters,
        "branch_policy": cfg.branch_policy.value,
        "dismissal": cfg.dismissal.value,
        "train": {
            "learning_rate": cfg.train_cfg.learning_rate,
            "batch_size": cfg.train_cfg.batch_size,
            "epochs": cfg.train_cfg.epochs,
            "beta1": cfg.train_cfg.beta1,
            "beta2": cfg.train_cfg.beta2,
            "epsilon": cfg.train_cfg.epsilon,
            "shuffle_seed": cfg.train_cfg.shuffle_seed,
        },
    }


# -- file helpers -----------------------------------------------------------------


def save_world(world: World, path) -> Path:
    path = Path(path)
    path.write_text(dumps(world_to_dict(world)))
    return path


def load_world(path) -> World:
    return world_from_dict(_read_json(path))


def save_classifier(clf: ShallowNetClassifier, path) -> Path:
    path = Path(path)
    path.write_text(dumps(classifier_to_dict(clf)))
    return path


def load_classifier(path) -> ShallowNetClassifier:
    return classifier_from_dict(_read_json(path))


def _read_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc


def write_ablation_csv(rows: list[dict], path) -> Path:
    """One row per (variant, k, metric_k); floats at fixed 6-decimal width
    so reruns are byte-identical."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["variant", "k", "metric_k", "mean_acc", "std_acc", "n_seeds"])
        for row in rows:
            writer.writerow(
                [
                    row["variant"],
                    row["k"],
                    row["metric_k"],
                    f"{row['mean_acc']:.6f}",
                    f"{row['std_acc']:.6f}",
                    row["n_seeds"],
                ]
            )
    return path
