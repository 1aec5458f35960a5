"""Shared domain types: labels, samples, hallucinated candidates, episodes.

Samples are immutable value data once constructed. The single mutable
field in the whole model is ``Candidate.state``, which may move from
AVAILABLE to SELECTED or DISMISSED exactly once and never back.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

KEYPOINT_COUNT = 15
KEYPOINT_DIM = 2 * KEYPOINT_COUNT

__all__ = [
    "KEYPOINT_COUNT",
    "KEYPOINT_DIM",
    "Branch",
    "Candidate",
    "CandidateState",
    "EpisodeSpec",
    "InvariantViolation",
    "LabelSpace",
    "Sample",
    "Variant",
    "ViewAngles",
    "Violation",
]


class InvariantViolation(RuntimeError):
    """A structural invariant of the data model was broken at runtime."""


class Branch(enum.Enum):
    """Which hallucination route produced a candidate."""

    VIEW = "view"
    POSE = "pose"


class CandidateState(enum.Enum):
    AVAILABLE = "available"
    SELECTED = "selected"
    DISMISSED = "dismissed"


class Variant(enum.Enum):
    """Model variants runnable by the episode harness."""

    BASELINE = "baseline"
    RANDOM_VIEWS_POSES = "random-views-poses"
    SPL_VIEWS = "spl-views"
    SPL_POSES = "spl-poses"
    SPL_POSES_CLUSTERING = "spl-poses-clustering"
    SPL_POSES_VIEWS = "spl-poses-views"
    SPL_BALANCED = "spl-balanced"
    SPL_ALL = "spl-all"
    NEAREST_NEIGHBOR = "nearest-neighbor"


SPL_VARIANTS = frozenset(
    {
        Variant.SPL_VIEWS,
        Variant.SPL_POSES,
        Variant.SPL_POSES_CLUSTERING,
        Variant.SPL_POSES_VIEWS,
        Variant.SPL_BALANCED,
        Variant.SPL_ALL,
    }
)


@dataclass(frozen=True)
class LabelSpace:
    """Disjoint base/novel class-id sets whose union is the label space."""

    base_labels: tuple[int, ...]
    novel_labels: tuple[int, ...]

    @property
    def all_labels(self) -> tuple[int, ...]:
        return self.base_labels + self.novel_labels

    def is_novel(self, label: int) -> bool:
        return label in self.novel_labels


@dataclass(frozen=True)
class ViewAngles:
    """Camera rotation angles in radians; view sampling keeps each in [0, pi/6]."""

    alpha: float
    beta: float
    gamma: float

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma], dtype=np.float64)


@dataclass(eq=False)
class Sample:
    """One observation: features, label, keypoints, and its latent provenance.

    ``keypoints`` is the 15-point pose signature stored flattened as a
    30-vector (u0, v0, u1, v1, ...). ``texture``/``pose``/``view`` record
    the latent factors the features were rendered from.
    """

    id: int
    features: np.ndarray
    label: int
    keypoints: np.ndarray
    texture: np.ndarray
    pose: np.ndarray
    view: ViewAngles


@dataclass(eq=False)
class Candidate:
    """A hallucinated sample plus its selection-lifecycle bookkeeping.

    Pose-branch candidates carry the donor sample id whose pose they
    inherit; view-branch candidates have no donor. ``cluster_id`` is set
    only when the pose pool has been clustered for dismissal.
    """

    id: int
    sample: Sample
    branch: Branch
    source_id: int
    donor_id: int | None = None
    state: CandidateState = CandidateState.AVAILABLE
    cluster_id: int | None = None

    def __post_init__(self) -> None:
        if self.branch is Branch.POSE and self.donor_id is None:
            raise InvariantViolation(f"pose candidate {self.id} lacks a donor_id")
        if self.branch is Branch.VIEW and self.donor_id is not None:
            raise InvariantViolation(f"view candidate {self.id} carries a donor_id")

    def mark_selected(self) -> None:
        if self.state is not CandidateState.AVAILABLE:
            raise InvariantViolation(
                f"candidate {self.id} is {self.state.value}, cannot select"
            )
        self.state = CandidateState.SELECTED

    def mark_dismissed(self) -> None:
        if self.state is not CandidateState.AVAILABLE:
            raise InvariantViolation(
                f"candidate {self.id} is {self.state.value}, cannot dismiss"
            )
        self.state = CandidateState.DISMISSED


@dataclass(frozen=True)
class EpisodeSpec:
    """What one k-shot run should do: shot count, variant, seed, metrics."""

    k_shot: int
    variant: Variant
    seed: int
    metric_ks: tuple[int, ...] = (1, 2)


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by a validator; data, not an exception."""

    code: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code}: {self.detail}"
