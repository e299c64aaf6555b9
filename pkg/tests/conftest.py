import os
import sys
from pathlib import Path

import numpy as np
import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(PROJECT_ROOT / "src"))

from guided_gan.datapipe import SynthHARConfig, synth_har  # noqa: E402
from guided_gan.helpers.config_loader import FrameworkConfig, ProbeConfig  # noqa: E402


@pytest.fixture
def make_config():
    """Tiny float64 framework configs for fast, exact checks."""
    def make(framework: str = "guided_gan", **overrides) -> FrameworkConfig:
        params = dict(framework=framework, latent_dim=4, hidden_dim=5, epochs=2, batch_size=8,
                      dtype="float64", checkpoint_every=1, seed=3)
        params.update(overrides)
        return FrameworkConfig(**params)
    return make


@pytest.fixture(scope="session")
def small_split():
    return synth_har(SynthHARConfig(num_classes=3, channels=2, window=6, per_class=12, noise=0.05, seed=0))


@pytest.fixture
def fast_probe():
    return ProbeConfig(epochs=20, batch_size=16, seed=0, fractions=(0.5, 1.0), runs=2)


@pytest.fixture
def write_ucihar():
    """Writes one part (train or test) of a UCI HAR style tree with random signals."""
    def write(root, part, rows=2, width=128, labels=(1, 6)):
        rng = np.random.default_rng({"train": 0, "test": 1}[part])
        sig_dir = root / part / "Inertial Signals"
        sig_dir.mkdir(parents=True)
        for name in ("body_acc_x", "body_acc_y", "body_acc_z", "body_gyro_x", "body_gyro_y", "body_gyro_z",
                     "total_acc_x", "total_acc_y", "total_acc_z"):
            np.savetxt(sig_dir / f"{name}_{part}.txt", rng.normal(size=(rows, width)), fmt="%.8e")
        np.savetxt(root / part / f"y_{part}.txt", np.array(labels[:rows]), fmt="%d")
    return write


@pytest.fixture(scope="session")
def mnist_root():
    root = os.environ.get("GUIDED_GAN_MNIST_ROOT")
    if not root or not Path(root).is_dir():
        pytest.skip("GUIDED_GAN_MNIST_ROOT not set; desk-scale MNIST checks skipped")
    return Path(root)
