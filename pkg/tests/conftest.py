import numpy as np
import pytest

from splshot import ShallowNetClassifier, WorldConfig, make_world


@pytest.fixture(scope="session")
def desk_world():
    """Default desk-scale world shared across the suite."""
    return make_world(WorldConfig(), seed=42)


@pytest.fixture(scope="session")
def pretrained(desk_world):
    """Base-class classifier pretrained with the default 600-epoch recipe."""
    base = desk_world.train_base()
    X = np.stack([s.features for s in base])
    y = np.array([s.label for s in base])
    return ShallowNetClassifier(epochs=600, seed=7).fit(X, y)


@pytest.fixture()
def tiny_world():
    """Small, fast world for structural tests."""
    cfg = WorldConfig(
        n_base_classes=4,
        n_novel_classes=3,
        samples_per_class=10,
        d_tex=3,
        d_pose=2,
        d_feat=8,
        sigma_obs=0.05,
        sigma_kp=0.02,
        corruption_prob=0.2,
        corruption_scale=1.0,
    )
    return make_world(cfg, seed=5)
