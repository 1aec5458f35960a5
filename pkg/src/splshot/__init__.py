"""Self-paced selection of hallucinated training samples for low-shot
classification, on a seeded synthetic latent-factor benchmark.

The package splits into a data world (``world``), a shallow classifier and
k-means clusterer with scikit-learn estimator surfaces (``classifier``,
``clustering``), the iterative selection engine (``spl``), an episodic
evaluation harness (``evaluate``), and JSON/CLI plumbing (``serialize``,
``config``, ``cli``).
"""

from .classifier import ShallowNetClassifier
from .clustering import KeypointKMeans, cluster_points_by_id
from .config import ConfigError, RunConfig, config_to_dict, parse_config
from .datamodel import (
    Branch,
    Candidate,
    CandidateState,
    EpisodeSpec,
    InvariantViolation,
    LabelSpace,
    Sample,
    Variant,
    ViewAngles,
    Violation,
)
from .evaluate import EpisodeResult, ablate, build_pools, nn_classify, run_episode, topk_accuracy
from .network import AdamState, NetParams, TrainConfig, adam_step, forward, init_params, loss_and_grads, softmax, train
from .seeding import derive_seed
from .spl import (
    BranchPolicy,
    Dismissal,
    SelectionEvent,
    SplConfig,
    dismiss,
    random_augment,
    rank_candidates,
    select_balanced,
    select_top,
    spl_run,
)
from .world import (
    VIEW_ANGLE_MAX,
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

__version__ = "0.1.0"
