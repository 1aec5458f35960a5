"""Command-line front end.

Subcommands mirror the pipeline phases so expensive artifacts are cached
on disk between runs: ``gen-world`` builds a synthetic world, ``pretrain``
fits the base-class classifier, ``episode`` runs one variant, ``ablate``
sweeps variants x shot counts x seeds into a CSV, and ``validate`` audits
a stored world. Every run writes a manifest capturing the fully-resolved
configuration and seeds needed to replay it bit-identically.

Exit codes: 0 success, 2 configuration error, 3 data/IO error,
4 invariant violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .classifier import ShallowNetClassifier
from .config import ConfigError, RunConfig, config_to_dict, parse_config
from .datamodel import EpisodeSpec, InvariantViolation, Variant
from .evaluate import ablate, run_episode
from .serialize import (
    FORMAT_VERSION,
    SchemaError,
    dumps,
    episode_result_to_dict,
    load_classifier,
    load_world,
    save_classifier,
    save_world,
)
from .world import make_world, validate_world

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INVARIANT = 4


def _load_config(path: str | None) -> RunConfig:
    if path is None:
        return parse_config("{}")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, cfg: RunConfig, **extra) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "manifest",
        "command": command,
        "config": config_to_dict(cfg),
    }
    doc.update(extra)
    (out / f"manifest_{command}.json").write_text(dumps(doc))


def _cmd_gen_world(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args)
    world = make_world(cfg.world, args.seed)
    path = save_world(world, out / "world.json")
    _write_manifest(out, "gen-world", cfg, seed=args.seed, outputs=[path.name])
    print(f"world with {len(world.train_samples)} train / {len(world.test_samples)} test samples -> {path}")
    return EXIT_OK


def _cmd_pretrain(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args)
    world = load_world(args.world)
    base = world.train_base()
    if not base:
        raise InvariantViolation("world has no base-class training samples")
    import numpy as np

    X = np.stack([s.features for s in base])
    y = np.array([s.label for s in base])
    clf = ShallowNetClassifier(
        hidden_dim=cfg.hidden_dim,
        learning_rate=cfg.pretrain.learning_rate,
        batch_size=cfg.pretrain.batch_size,
        epochs=cfg.pretrain.epochs,
        beta1=cfg.pretrain.beta1,
        beta2=cfg.pretrain.beta2,
        epsilon=cfg.pretrain.epsilon,
        seed=args.seed,
    ).fit(X, y)
    path = save_classifier(clf, out / "classifier_D.json")
    _write_manifest(
        out, "pretrain", cfg, seed=args.seed, inputs={"world": str(args.world)}, outputs=[path.name]
    )
    acc = float((clf.predict(X) == y).mean())
    print(f"pretrained on {len(base)} base samples (train acc {acc:.3f}) -> {path}")
    return EXIT_OK


def _cmd_episode(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args)
    world = load_world(args.world)
    clf = load_classifier(args.classifier)
    try:
        variant = Variant(args.variant)
    except ValueError:
        raise ConfigError(
            f"unknown variant {args.variant!r}; choose from "
            + ", ".join(v.value for v in Variant)
        ) from None
    spec = EpisodeSpec(
        k_shot=args.k, variant=variant, seed=args.seed, metric_ks=tuple(cfg.metric_ks)
    )
    result = run_episode(world, spec, cfg.gen, cfg.spl, clf)
    doc = episode_result_to_dict(result)
    tag = hashlib.sha256(
        dumps({"spec": doc["spec"], "config": config_to_dict(cfg)}).encode()
    ).hexdigest()[:12]
    path = out / f"episode_{tag}.json"
    path.write_text(dumps(doc))
    _write_manifest(
        out,
        "episode",
        cfg,
        seed=args.seed,
        inputs={"world": str(args.world), "classifier": str(args.classifier)},
        outputs=[path.name],
    )
    summary = ", ".join(f"top-{k}: {v:.4f}" for k, v in sorted(result.topk.items()))
    print(f"{variant.value} k={args.k} seed={args.seed} -> {summary} ({path})")
    return EXIT_OK


def _cmd_ablate(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(args)
    world = load_world(args.world)
    clf = load_classifier(args.classifier)
    rows, results = ablate(
        world,
        clf,
        cfg.variants,
        cfg.k_list,
        cfg.seeds,
        cfg.gen,
        cfg.spl,
        tuple(cfg.metric_ks),
    )
    from .serialize import write_ablation_csv

    csv_path = write_ablation_csv(rows, out / "ablation.csv")
    episode_files = []
    for res in results:
        name = f"episode_{res.spec.variant.value}_k{res.spec.k_shot}_seed{res.spec.seed}.json"
        (out / name).write_text(dumps(episode_result_to_dict(res)))
        episode_files.append(name)
    _write_manifest(
        out,
        "ablate",
        cfg,
        inputs={"world": str(args.world), "classifier": str(args.classifier)},
        outputs=[csv_path.name] + episode_files,
    )
    print(f"{len(results)} episodes -> {csv_path}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    world = load_world(args.world)
    report = validate_world(world)
    if not report:
        print("world is valid")
        return EXIT_OK
    for violation in report:
        print(violation, file=sys.stderr)
    print(f"{len(report)} violation(s) found", file=sys.stderr)
    return EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splshot",
        description="Self-paced selection of hallucinated samples for low-shot classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, world=False, classifier=False, seed=True):
        p.add_argument("--config", default=None, help="JSON config path (defaults apply if omitted)")
        p.add_argument("--out", default=".", help="output directory")
        if seed:
            p.add_argument("--seed", type=int, default=0, help="64-bit root seed")
        if world:
            p.add_argument("--world", required=True, help="path to world.json")
        if classifier:
            p.add_argument("--classifier", required=True, help="path to classifier_D.json")

    p = sub.add_parser("gen-world", help="build and store a synthetic world")
    common(p)
    p.set_defaults(func=_cmd_gen_world)

    p = sub.add_parser("pretrain", help="train the base-class classifier")
    common(p, world=True)
    p.set_defaults(func=_cmd_pretrain)

    p = sub.add_parser("episode", help="run a single k-shot episode")
    common(p, world=True, classifier=True)
    p.add_argument("--variant", required=True, help="model variant, e.g. spl-all")
    p.add_argument("--k", type=int, required=True, help="shots per novel class")
    p.set_defaults(func=_cmd_episode)

    p = sub.add_parser("ablate", help="run the full ablation sweep to CSV")
    common(p, world=True, classifier=True, seed=False)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("validate", help="audit a stored world's invariants")
    p.add_argument("--world", required=True, help="path to world.json")
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaError, OSError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InvariantViolation, ValueError, RuntimeError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
