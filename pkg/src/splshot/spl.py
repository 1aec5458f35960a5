"""Self-paced admission of hallucinated candidates.

Each iteration, for every novel class: rank the still-available candidates
by the fine-tuned classifier's softmax confidence in their label, admit the
top pick(s) into the generated training set, dismiss per the configured
strategy, then fine-tune the classifier on the real k-shot samples plus
everything admitted so far. Classes whose pools run dry are skipped; the
loop stops early once no class can select anything.

Branch policies cover the ablation axes: a single ranked list over one or
both branches, or balanced selection that takes the best view and the best
pose separately each iteration. Cluster dismissal discards the whole
keypoint cluster of a selected pose candidate to force pose diversity;
view candidates are never cluster-dismissed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .classifier import ShallowNetClassifier
from .datamodel import Branch, Candidate, CandidateState, Sample
from .network import TrainConfig
from .seeding import derive_seed

__all__ = [
    "BranchPolicy",
    "Dismissal",
    "SelectionEvent",
    "SplConfig",
    "dismiss",
    "random_augment",
    "rank_candidates",
    "select_balanced",
    "select_top",
    "spl_run",
]


class BranchPolicy(enum.Enum):
    VIEWS_ONLY = "views-only"
    POSES_ONLY = "poses-only"
    UNION = "union"
    BALANCED = "balanced"


class Dismissal(enum.Enum):
    SELECTED_ONLY = "selected-only"
    CLUSTER_DISCARD = "cluster-discard"


@dataclass(frozen=True)
class SplConfig:
    """Knobs of the iterative selection loop.

    ``r`` candidates are admitted per class per iteration (balanced policy
    instead takes one per branch). ``train_cfg`` supplies the optimizer
    settings for the per-iteration fine-tuning; its epoch count is
    overridden by ``epochs_per_iteration``.
    """

    r: int = 1
    n_iterations: int = 10
    epochs_per_iteration: int = 10
    head_init_epochs: int = 20
    n_clusters: int = 8
    branch_policy: BranchPolicy = BranchPolicy.UNION
    dismissal: Dismissal = Dismissal.SELECTED_ONLY
    train_cfg: TrainConfig = field(default_factory=TrainConfig)

    def violations(self) -> list[str]:
        bad = []
        if self.r < 1:
            bad.append("r must be >= 1")
        if self.n_iterations < 1:
            bad.append("n_iterations must be >= 1")
        if self.epochs_per_iteration < 0:
            bad.append("epochs_per_iteration must be >= 0")
        if self.head_init_epochs < 0:
            bad.append("head_init_epochs must be >= 0")
        if self.n_clusters < 1:
            bad.append("n_clusters must be >= 1")
        bad.extend(f"train.{v}" for v in self.train_cfg.violations())
        return bad


@dataclass(frozen=True)
class SelectionEvent:
    """One admission: who was picked, at what score, and what it swept away."""

    iteration: int
    class_id: int
    candidate_id: int
    branch: Branch
    score: float
    dismissed_ids: tuple[int, ...] = ()


def rank_candidates(
    d_prime: ShallowNetClassifier, candidates: list[Candidate]
) -> list[tuple[int, float]]:
    """Rank candidates by the classifier's confidence in their shared label.

    Returns (candidate id, score) pairs in descending score order, ties
    broken by ascending id.
    """
    if not candidates:
        return []
    labels = {c.sample.label for c in candidates}
    if len(labels) != 1:
        raise ValueError(f"candidates carry mixed labels {sorted(labels)}")
    label = labels.pop()
    X = np.stack([c.sample.features for c in candidates])
    scores = d_prime.confidence(X, label)
    pairs = [(c.id, float(s)) for c, s in zip(candidates, scores)]
    pairs.sort(key=lambda p: (-p[1], p[0]))
    return pairs


def select_top(ranked: list[tuple[int, float]], r: int) -> list[int]:
    """First min(r, len) candidate ids of an already-ranked list."""
    if not ranked:
        raise ValueError("ranked list is empty")
    return [cid for cid, _ in ranked[:r]]


def select_balanced(
    ranked_views: list[tuple[int, float]], ranked_poses: list[tuple[int, float]]
) -> list[int]:
    """Head of each non-empty branch ranking: the branch-wise maxima."""
    if not ranked_views and not ranked_poses:
        raise ValueError("both branch rankings are empty")
    picks = []
    if ranked_views:
        picks.append(ranked_views[0][0])
    if ranked_poses:
        picks.append(ranked_poses[0][0])
    return picks


def dismiss(
    pool: list[Candidate], selected_ids: list[int], dismissal: Dismissal
) -> list[int]:
    """Mark selections, then apply the dismissal strategy; returns the ids
    dismissed as a consequence (never the selected ids themselves).

    Cluster discard additionally dismisses every still-available pose
    candidate sharing a cluster with a selected pose candidate. View
    selections never trigger cluster dismissal.
    """
    by_id = {c.id: c for c in pool}
    selected = []
    for cid in selected_ids:
        cand = by_id[cid]
        cand.mark_selected()
        selected.append(cand)

    dismissed: list[int] = []
    if dismissal is Dismissal.CLUSTER_DISCARD:
        for cand in selected:
            if cand.branch is not Branch.POSE:
                continue
            if cand.cluster_id is None:
                raise ValueError(
                    f"cluster discard requested but candidate {cand.id} has no cluster"
                )
            for other in pool:
                if (
                    other.state is CandidateState.AVAILABLE
                    and other.branch is Branch.POSE
                    and other.cluster_id == cand.cluster_id
                ):
                    other.mark_dismissed()
                    dismissed.append(other.id)
    return sorted(dismissed)


def _available(pool: list[Candidate], branch: Branch | None = None) -> list[Candidate]:
    return [
        c
        for c in pool
        if c.state is CandidateState.AVAILABLE and (branch is None or c.branch is branch)
    ]


def spl_run(
    d_prime: ShallowNetClassifier,
    s_train_novel: list[Sample],
    pools: dict[int, list[Candidate]],
    cfg: SplConfig,
) -> tuple[ShallowNetClassifier, list[SelectionEvent], list[Sample]]:
    """Run the full iterative select/dismiss/update loop.

    Returns the fine-tuned classifier, the complete selection history, and
    the accumulated generated training samples. Deterministic in its inputs;
    never selects a dismissed or already-selected candidate.
    """
    bad = cfg.violations()
    if bad:
        raise ValueError("; ".join(bad))
    if not pools or any(not p for p in pools.values()):
        raise ValueError("every class needs a non-empty candidate pool")
    pool_classes = set(pools)
    head_classes = set(int(c) for c in d_prime.classes_)
    if pool_classes != head_classes:
        raise ValueError(
            f"classifier head covers {sorted(head_classes)}, pools cover {sorted(pool_classes)}"
        )

    history: list[SelectionEvent] = []
    s_gen_novel: list[Sample] = []

    for iteration in range(1, cfg.n_iterations + 1):
        n_selected = 0
        for class_id in sorted(pools):
            pool = pools[class_id]
            if cfg.branch_policy is BranchPolicy.BALANCED:
                ranked_v = rank_candidates(d_prime, _available(pool, Branch.VIEW))
                ranked_p = rank_candidates(d_prime, _available(pool, Branch.POSE))
                if not ranked_v and not ranked_p:
                    continue
                picks = select_balanced(ranked_v, ranked_p)
                scores = dict(ranked_v + ranked_p)
                for cid in picks:
                    n_selected += _admit(
                        d_prime, pool, cid, scores[cid], iteration, class_id, cfg, history, s_gen_novel
                    )
            else:
                branch = {
                    BranchPolicy.VIEWS_ONLY: Branch.VIEW,
                    BranchPolicy.POSES_ONLY: Branch.POSE,
                    BranchPolicy.UNION: None,
                }[cfg.branch_policy]
                # iterate picks so cluster discard can never hand us a
                # just-dismissed candidate (identical to a prefix of the
                # ranking whenever dismissal is selected-only)
                for _ in range(cfg.r):
                    avail = _available(pool, branch)
                    if not avail:
                        break
                    ranked = rank_candidates(d_prime, avail)
                    cid = select_top(ranked, 1)[0]
                    n_selected += _admit(
                        d_prime, pool, cid, dict(ranked)[cid], iteration, class_id, cfg, history, s_gen_novel
                    )

        if n_selected == 0:
            break  # every pool is exhausted

        X = np.stack([s.features for s in s_train_novel] + [s.features for s in s_gen_novel])
        y = np.array([s.label for s in s_train_novel] + [s.label for s in s_gen_novel])
        d_prime.fine_tune(
            X,
            y,
            replace(
                cfg.train_cfg,
                epochs=cfg.epochs_per_iteration,
                shuffle_seed=derive_seed(cfg.train_cfg.shuffle_seed, "spl-iter", iteration),
            ),
        )
    return d_prime, history, s_gen_novel


def _admit(d_prime, pool, cid, score, iteration, class_id, cfg, history, s_gen_novel) -> int:
    cand = next(c for c in pool if c.id == cid)
    dismissed = dismiss(pool, [cid], cfg.dismissal)
    history.append(
        SelectionEvent(
            iteration=iteration,
            class_id=class_id,
            candidate_id=cid,
            branch=cand.branch,
            score=score,
            dismissed_ids=tuple(dismissed),
        )
    )
    s_gen_novel.append(cand.sample)
    return 1


def random_augment(
    pools: dict[int, list[Candidate]], n_picks: int, seed: int
) -> list[Sample]:
    """Uniform seeded draws without replacement, n_picks per class."""
    rng = np.random.default_rng(seed)
    out: list[Sample] = []
    for class_id in sorted(pools):
        pool = sorted(pools[class_id], key=lambda c: c.id)
        if n_picks > len(pool):
            raise ValueError(
                f"n_picks={n_picks} exceeds the {len(pool)} candidates of class {class_id}"
            )
        idx = rng.choice(len(pool), size=n_picks, replace=False)
        out.extend(pool[int(i)].sample for i in idx)
    return out
