"""Run configuration: JSON parsing with strict key checking and defaults.

An empty document is a complete, runnable configuration; every key is
optional and unknown keys are rejected with their full path. Documented
defaults: learning rate 1e-3, batch size 32, 600 pretraining epochs,
20 head-init epochs, 10 epochs per selection iteration, r=1, k in
{1, 2, 5, 10, 20}. View angles always sample from [0, pi/6] per axis
(``world.VIEW_ANGLE_MAX``); that range is structural, not configurable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

from .datamodel import Variant
from .network import TrainConfig
from .spl import BranchPolicy, Dismissal, SplConfig
from .world import GenConfig, WorldConfig

__all__ = ["ConfigError", "RunConfig", "config_to_dict", "parse_config"]

DEFAULT_K_LIST = [1, 2, 5, 10, 20]
DEFAULT_SEEDS = [0, 1, 2]
DEFAULT_METRIC_KS = [1, 2]
DEFAULT_HIDDEN_DIM = 64
DEFAULT_PRETRAIN_EPOCHS = 600


class ConfigError(ValueError):
    """A configuration document is syntactically or semantically invalid."""


@dataclass
class RunConfig:
    """Fully-resolved settings for a whole pipeline run."""

    world: WorldConfig = field(default_factory=WorldConfig)
    gen: GenConfig = field(default_factory=GenConfig)
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    pretrain: TrainConfig = field(
        default_factory=lambda: TrainConfig(epochs=DEFAULT_PRETRAIN_EPOCHS)
    )
    spl: SplConfig = field(
        default_factory=lambda: SplConfig(train_cfg=TrainConfig(epochs=10))
    )
    variants: list[Variant] = field(default_factory=lambda: list(Variant))
    k_list: list[int] = field(default_factory=lambda: list(DEFAULT_K_LIST))
    seeds: list[int] = field(default_factory=lambda: list(DEFAULT_SEEDS))
    metric_ks: list[int] = field(default_factory=lambda: list(DEFAULT_METRIC_KS))
    out_dir: str | None = None


_INT = "int"
_FLOAT = "float"


def _typecheck(value, kind: str, path: str):
    if kind == _INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path} must be an integer, got {value!r}")
    elif kind == _FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path} must be a number, got {value!r}")
    return value


def _build(cls, doc, path: str, int_fields: set[str], skip: set[str] = frozenset()):
    if not isinstance(doc, dict):
        raise ConfigError(f"{path} must be an object")
    names = {f.name for f in fields(cls)} - skip
    for key in doc:
        if key not in names:
            raise ConfigError(f"unknown key: {path}.{key}")
    kwargs = {}
    for name in names:
        if name in doc:
            kind = _INT if name in int_fields else _FLOAT
            kwargs[name] = _typecheck(doc[name], kind, f"{path}.{name}")
    inst = cls(**kwargs)
    bad = inst.violations()
    if bad:
        raise ConfigError(f"{path}.{bad[0]}")
    return inst


def _enum(enum_cls, value, path: str):
    try:
        return enum_cls(value)
    except ValueError:
        valid = ", ".join(e.value for e in enum_cls)
        raise ConfigError(f"{path} must be one of [{valid}], got {value!r}") from None


def _int_list(doc, path: str, minimum: int | None = None) -> list[int]:
    if not isinstance(doc, list) or not doc:
        raise ConfigError(f"{path} must be a non-empty list of integers")
    out = []
    for i, v in enumerate(doc):
        _typecheck(v, _INT, f"{path}[{i}]")
        if minimum is not None and v < minimum:
            raise ConfigError(f"{path}[{i}] must be >= {minimum}, got {v}")
        out.append(v)
    return out


_TRAIN_INTS = {"batch_size", "epochs", "shuffle_seed"}
_WORLD_INTS = {
    "n_base_classes",
    "n_novel_classes",
    "samples_per_class",
    "d_tex",
    "d_pose",
    "d_feat",
}
_SPL_INTS = {"r", "n_iterations", "epochs_per_iteration", "head_init_epochs", "n_clusters"}


def _build_spl(doc, path: str) -> SplConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"{path} must be an object")
    known = _SPL_INTS | {"branch_policy", "dismissal", "train"}
    for key in doc:
        if key not in known:
            raise ConfigError(f"unknown key: {path}.{key}")
    kwargs = {}
    for name in _SPL_INTS:
        if name in doc:
            kwargs[name] = _typecheck(doc[name], _INT, f"{path}.{name}")
    if "branch_policy" in doc:
        kwargs["branch_policy"] = _enum(BranchPolicy, doc["branch_policy"], f"{path}.branch_policy")
    if "dismissal" in doc:
        kwargs["dismissal"] = _enum(Dismissal, doc["dismissal"], f"{path}.dismissal")
    kwargs["train_cfg"] = _build(
        TrainConfig, doc.get("train", {}), f"{path}.train", _TRAIN_INTS
    )
    if "train" not in doc or "epochs" not in doc["train"]:
        # per-iteration fine-tuning defaults to 10 epochs
        kwargs["train_cfg"] = TrainConfig(
            **{**_train_to_dict(kwargs["train_cfg"]), "epochs": 10}
        )
    cfg = SplConfig(**kwargs)
    bad = cfg.violations()
    if bad:
        raise ConfigError(f"{path}.{bad[0]}")
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse a JSON config document into a fully-resolved RunConfig."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("top-level document must be an object")

    known = {"world", "gen", "model", "pretrain", "spl", "episodes", "out_dir"}
    for key in doc:
        if key not in known:
            raise ConfigError(f"unknown key: {key}")

    world = _build(WorldConfig, doc.get("world", {}), "world", _WORLD_INTS)
    gen = _build(GenConfig, doc.get("gen", {}), "gen", {"n_views", "n_poses"})

    model = doc.get("model", {})
    if not isinstance(model, dict):
        raise ConfigError("model must be an object")
    for key in model:
        if key != "hidden_dim":
            raise ConfigError(f"unknown key: model.{key}")
    hidden_dim = _typecheck(model.get("hidden_dim", DEFAULT_HIDDEN_DIM), _INT, "model.hidden_dim")
    if hidden_dim < 1:
        raise ConfigError(f"model.hidden_dim must be >= 1, got {hidden_dim}")

    pretrain_doc = dict(doc.get("pretrain", {}))
    if "epochs" not in pretrain_doc:
        pretrain_doc["epochs"] = DEFAULT_PRETRAIN_EPOCHS
    pretrain = _build(TrainConfig, pretrain_doc, "pretrain", _TRAIN_INTS)

    spl = _build_spl(doc.get("spl", {}), "spl")

    episodes = doc.get("episodes", {})
    if not isinstance(episodes, dict):
        raise ConfigError("episodes must be an object")
    for key in episodes:
        if key not in {"variants", "k_list", "seeds", "metric_ks"}:
            raise ConfigError(f"unknown key: episodes.{key}")
    if "variants" in episodes:
        raw = episodes["variants"]
        if not isinstance(raw, list) or not raw:
            raise ConfigError("episodes.variants must be a non-empty list")
        variants = [_enum(Variant, v, f"episodes.variants[{i}]") for i, v in enumerate(raw)]
    else:
        variants = list(Variant)
    k_list = _int_list(episodes["k_list"], "episodes.k_list", 1) if "k_list" in episodes else list(DEFAULT_K_LIST)
    seeds = _int_list(episodes["seeds"], "episodes.seeds") if "seeds" in episodes else list(DEFAULT_SEEDS)
    metric_ks = (
        _int_list(episodes["metric_ks"], "episodes.metric_ks", 1)
        if "metric_ks" in episodes
        else list(DEFAULT_METRIC_KS)
    )

    out_dir = doc.get("out_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("out_dir must be a string path")

    return RunConfig(
        world=world,
        gen=gen,
        hidden_dim=hidden_dim,
        pretrain=pretrain,
        spl=spl,
        variants=variants,
        k_list=k_list,
        seeds=seeds,
        metric_ks=metric_ks,
        out_dir=out_dir,
    )


def _train_to_dict(cfg: TrainConfig) -> dict:
    return {
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "epochs": cfg.epochs,
        "beta1": cfg.beta1,
        "beta2": cfg.beta2,
        "epsilon": cfg.epsilon,
        "shuffle_seed": cfg.shuffle_seed,
    }


def config_to_dict(cfg: RunConfig) -> dict:
    """Inverse of parse_config: parse_config(json.dumps(config_to_dict(c))) == c."""
    return {
        "world": {
            "n_base_classes": cfg.world.n_base_classes,
            "n_novel_classes": cfg.world.n_novel_classes,
            "samples_per_class": cfg.world.samples_per_class,
            "d_tex": cfg.world.d_tex,
            "d_pose": cfg.world.d_pose,
            "d_feat": cfg.world.d_feat,
            "sigma_obs": cfg.world.sigma_obs,
            "sigma_kp": cfg.world.sigma_kp,
            "corruption_prob": cfg.world.corruption_prob,
            "corruption_scale": cfg.world.corruption_scale,
        },
        "gen": {"n_views": cfg.gen.n_views, "n_poses": cfg.gen.n_poses},
        "model": {"hidden_dim": cfg.hidden_dim},
        "pretrain": _train_to_dict(cfg.pretrain),
        "spl": {
            "r": cfg.spl.r,
            "n_iterations": cfg.spl.n_iterations,
            "epochs_per_iteration": cfg.spl.epochs_per_iteration,
            "head_init_epochs": cfg.spl.head_init_epochs,
            "n_clusters": cfg.spl.n_clusters,
            "branch_policy": cfg.spl.branch_policy.value,
            "dismissal": cfg.spl.dismissal.value,
            "train": _train_to_dict(cfg.spl.train_cfg),
        },
        "episodes": {
            "variants": [v.value for v in cfg.variants],
            "k_list": list(cfg.k_list),
            "seeds": list(cfg.seeds),
            "metric_ks": list(cfg.metric_ks),
        },
        "out_dir": cfg.out_dir,
    }
