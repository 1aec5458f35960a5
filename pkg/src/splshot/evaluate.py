"""Episodic k-shot evaluation: every model variant end to end, plus the
top-k metric, the nearest-neighbor baseline, and the ablation table.

An episode takes a world and a base-class-pretrained classifier, draws the
k-shot split, runs one variant, and scores top-k accuracy on the novel
test set. Every variant fine-tunes with the same standard phase (Adam,
batch 32, 20 epochs by default): Baseline and the random-pick variant run
that phase once on their training set, while the self-paced variants run
it as head initialization and then keep training through their admission
iterations. Episodes sharing a seed share the same split and candidate
pools across variants, which pairs them for ordering comparisons.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .classifier import ShallowNetClassifier
from .clustering import cluster_points_by_id
from .datamodel import SPL_VARIANTS, Branch, Candidate, EpisodeSpec, Sample, Variant
from .seeding import derive_seed
from .spl import BranchPolicy, Dismissal, SelectionEvent, SplConfig, random_augment, spl_run
from .world import GenConfig, World, gen_pose_set, gen_view_set, split_kshot

__all__ = [
    "EpisodeResult",
    "PoolEntry",
    "VARIANT_POLICIES",
    "ablate",
    "build_pools",
    "nn_classify",
    "run_episode",
    "topk_accuracy",
]

# branch policy and dismissal strategy behind each self-paced variant
VARIANT_POLICIES: dict[Variant, tuple[BranchPolicy, Dismissal]] = {
    Variant.SPL_VIEWS: (BranchPolicy.VIEWS_ONLY, Dismissal.SELECTED_ONLY),
    Variant.SPL_POSES: (BranchPolicy.POSES_ONLY, Dismissal.SELECTED_ONLY),
    Variant.SPL_POSES_CLUSTERING: (BranchPolicy.POSES_ONLY, Dismissal.CLUSTER_DISCARD),
    Variant.SPL_POSES_VIEWS: (BranchPolicy.UNION, Dismissal.SELECTED_ONLY),
    Variant.SPL_BALANCED: (BranchPolicy.BALANCED, Dismissal.SELECTED_ONLY),
    Variant.SPL_ALL: (BranchPolicy.BALANCED, Dismissal.CLUSTER_DISCARD),
}


@dataclass(frozen=True)
class PoolEntry:
    """Audit record of one candidate as it entered its pool."""

    id: int
    branch: Branch
    source_id: int
    donor_id: int | None
    cluster_id: int | None


@dataclass(eq=False)
class EpisodeResult:
    """Metrics and full selection history of one episode.

    ``timing`` is wall-clock seconds and is deliberately excluded from the
    serialized form so identical runs produce identical files.
    """

    spec: EpisodeSpec
    topk: dict[int, float]
    history: list[SelectionEvent] = field(default_factory=list)
    pools: dict[int, list[PoolEntry]] = field(default_factory=dict)
    world_seed: int = 0
    world_config: object | None = None
    gen_config: GenConfig | None = None
    spl_config: SplConfig | None = None
    timing: float = 0.0


def topk_accuracy(logit_rows: np.ndarray, labels: np.ndarray, k: int) -> float:
    """Fraction of rows whose true label scores among the k largest.

    Ties at the k-th value admit the lower class index first, so the
    result is deterministic for any input.
    """
    logit_rows = np.atleast_2d(np.asarray(logit_rows, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    n, c = logit_rows.shape
    if labels.shape != (n,):
        raise ValueError(f"{n} rows but {labels.shape[0]} labels")
    if not 1 <= k <= c:
        raise ValueError(f"k={k} outside [1, {c}]")
    # argsort on (-logit, class index): stable deterministic top-k sets
    order = np.argsort(-logit_rows, axis=1, kind="stable")
    hits = (order[:, :k] == labels[:, None]).any(axis=1)
    return float(hits.mean())


def nn_classify(train_embeddings, query: np.ndarray) -> int:
    """Label of the Euclidean-nearest training embedding; ties keep the
    earliest entry (lowest sample position)."""
    pairs = list(train_embeddings)
    if not pairs:
        raise ValueError("reference set is empty")
    refs = np.stack([np.asarray(v, dtype=np.float64) for v, _ in pairs])
    query = np.asarray(query, dtype=np.float64)
    if query.shape != refs.shape[1:]:
        raise ValueError(f"query has shape {query.shape}, references {refs.shape[1:]}")
    d2 = np.sum((refs - query) ** 2, axis=1)
    return int(pairs[int(np.argmin(d2))][1])


def build_pools(
    world: World,
    s_novel: list[Sample],
    s_base: list[Sample],
    gen_cfg: GenConfig,
    seed: int,
    with_clusters: bool,
    n_clusters: int = 8,
    id_start: int | None = None,
) -> dict[int, list[Candidate]]:
    """Generate the per-class candidate pools for an episode.

    Candidate ids continue after the world's sample ids. When clustering
    is requested, each novel sample's pose candidates are clustered over
    their keypoints, with cluster ids namespaced globally.
    """
    if id_start is None:
        id_start = world.next_sample_id()
    pools: dict[int, list[Candidate]] = {c: [] for c in world.label_space.novel_labels}
    next_id = id_start
    cluster_offset = 0
    for sample in sorted(s_novel, key=lambda s: (s.label, s.id)):
        views = gen_view_set(
            world, sample, gen_cfg, derive_seed(seed, "gen-view", sample.id), id_start=next_id
        )
        next_id += gen_cfg.n_views
        poses = gen_pose_set(
            world, sample, s_base, gen_cfg, derive_seed(seed, "gen-pose", sample.id), id_start=next_id
        )
        next_id += gen_cfg.n_poses
        if with_clusters:
            k = min(n_clusters, len(poses))
            assignment, _ = cluster_points_by_id(
                [(c.id, c.sample.keypoints) for c in poses],
                n_clusters=k,
                seed=derive_seed(seed, "cluster", sample.id),
            )
            for c in poses:
                c.cluster_id = cluster_offset + assignment[c.id]
            cluster_offset += k
        pools[sample.label].extend(views + poses)
    return pools


def _features_labels(samples: list[Sample]) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.stack([s.features for s in samples]),
        np.array([s.label for s in samples], dtype=np.int64),
    )


def _nn_class_scores(
    refs: np.ndarray, ref_labels: np.ndarray, queries: np.ndarray, classes: np.ndarray
) -> np.ndarray:
    """Score each query against each class as minus the distance to the
    nearest reference of that class; argmax matches nn_classify."""
    d2 = np.sum((queries[:, None, :] - refs[None, :, :]) ** 2, axis=2)
    scores = np.empty((queries.shape[0], len(classes)))
    for j, c in enumerate(classes):
        scores[:, j] = -np.sqrt(d2[:, ref_labels == c].min(axis=1))
    return scores


def run_episode(
    world: World,
    spec: EpisodeSpec,
    gen_cfg: GenConfig,
    spl_cfg: SplConfig,
    pretrained_D: ShallowNetClassifier,
) -> EpisodeResult:
    """Execute one variant end to end and score it on the novel test set."""
    t0 = time.perf_counter()
    novel_labels = np.array(sorted(world.label_space.novel_labels), dtype=np.int64)
    if not spec.metric_ks:
        raise ValueError("metric_ks is empty")
    if max(spec.metric_ks) > len(novel_labels):
        raise ValueError(
            f"metric k {max(spec.metric_ks)} exceeds the {len(novel_labels)} novel classes"
        )

    seed = spec.seed
    s_novel, s_base, s_test = split_kshot(world, spec.k_shot, derive_seed(seed, "split"))
    X_test, y_test = _features_labels(s_test)
    X_real, y_real = _features_labels(s_novel)

    history: list[SelectionEvent] = []
    pools: dict[int, list[Candidate]] = {}

    if spec.variant is Variant.NEAREST_NEIGHBOR:
        refs = pretrained_D.hidden_embedding(X_real)
        queries = pretrained_D.hidden_embedding(X_test)
        logits = _nn_class_scores(refs, y_real, queries, novel_labels)
        classes = novel_labels
    else:
        d_prime = pretrained_D.adapt_head(novel_labels, derive_seed(seed, "head"))
        if spec.variant is Variant.BASELINE:
            d_prime.fine_tune(
                X_real,
                y_real,
                replace(
                    spl_cfg.train_cfg,
                    epochs=spl_cfg.head_init_epochs,
                    shuffle_seed=derive_seed(seed, "fine-tune"),
                ),
            )
        elif spec.variant is Variant.RANDOM_VIEWS_POSES:
            pools = build_pools(
                world, s_novel, s_base, gen_cfg, seed, with_clusters=False, n_clusters=spl_cfg.n_clusters
            )
            picks = random_augment(
                pools, spl_cfg.r * spl_cfg.n_iterations, derive_seed(seed, "random-augment")
            )
            X_aug, y_aug = _features_labels(s_novel + picks)
            d_prime.fine_tune(
                X_aug,
                y_aug,
                replace(
                    spl_cfg.train_cfg,
                    epochs=spl_cfg.head_init_epochs,
                    shuffle_seed=derive_seed(seed, "fine-tune"),
                ),
            )
        elif spec.variant in SPL_VARIANTS:
            policy, dismissal = VARIANT_POLICIES[spec.variant]
            pools = build_pools(
                world,
                s_novel,
                s_base,
                gen_cfg,
                seed,
                with_clusters=dismissal is Dismissal.CLUSTER_DISCARD,
                n_clusters=spl_cfg.n_clusters,
            )
            d_prime.fine_tune(
                X_real,
                y_real,
                replace(
                    spl_cfg.train_cfg,
                    epochs=spl_cfg.head_init_epochs,
                    shuffle_seed=derive_seed(seed, "head-init"),
                ),
            )
            run_cfg = replace(
                spl_cfg,
                branch_policy=policy,
                dismissal=dismissal,
                train_cfg=replace(spl_cfg.train_cfg, shuffle_seed=derive_seed(seed, "spl-train")),
            )
            d_prime, history, _ = spl_run(d_prime, s_novel, pools, run_cfg)
        else:
            raise ValueError(f"unhandled variant {spec.variant}")
        logits = d_prime.decision_function(X_test)
        classes = d_prime.classes_

    col_idx = np.searchsorted(classes, y_test)
    topk = {k: topk_accuracy(logits, col_idx, k) for k in spec.metric_ks}

    pool_entries = {
        class_id: [
            PoolEntry(c.id, c.branch, c.source_id, c.donor_id, c.cluster_id)
            for c in sorted(pool, key=lambda c: c.id)
        ]
        for class_id, pool in pools.items()
    }
    return EpisodeResult(
        spec=spec,
        topk=topk,
        history=history,
        pools=pool_entries,
        world_seed=world.seed,
        world_config=world.config,
        gen_config=gen_cfg,
        spl_config=spl_cfg,
        timing=time.perf_counter() - t0,
    )


def ablate(
    world: World,
    pretrained_D: ShallowNetClassifier,
    variants: list[Variant],
    k_list: list[int],
    seeds: list[int],
    gen_cfg: GenConfig,
    spl_cfg: SplConfig,
    metric_ks: tuple[int, ...] = (1, 2),
) -> tuple[list[dict], list[EpisodeResult]]:
    """Run every (variant, k, seed) episode and aggregate mean/std rows.

    Episodes run in deterministic order; any failure aborts the whole
    table with the offending coordinates attached.
    """
    if not variants or not k_list or not seeds:
        raise ValueError("variants, k_list, and seeds must be non-empty")
    results: list[EpisodeResult] = []
    rows: list[dict] = []
    for variant in variants:
        for k in k_list:
            per_metric: dict[int, list[float]] = {mk: [] for mk in metric_ks}
            for seed in seeds:
                spec = EpisodeSpec(k_shot=k, variant=variant, seed=seed, metric_ks=tuple(metric_ks))
                try:
                    res = run_episode(world, spec, gen_cfg, spl_cfg, pretrained_D)
                except Exception as exc:
                    raise RuntimeError(
                        f"episode failed: variant={variant.value} k={k} seed={seed}"
                    ) from exc
                results.append(res)
                for mk in metric_ks:
                    per_metric[mk].append(res.topk[mk])
            for mk in metric_ks:
                accs = np.array(per_metric[mk])
                rows.append(
                    {
                        "variant": variant.value,
                        "k": k,
                        "metric_k": mk,
                        "mean_acc": float(accs.mean()),
                        "std_acc": float(accs.std()),
                        "n_seeds": len(seeds),
                    }
                )
    return rows, results
