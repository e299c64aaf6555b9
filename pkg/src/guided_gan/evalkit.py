# guided_gan/evalkit.py
"""
Evaluation battery for learned representations.

The feature extractor of a bundle is frozen; a single affine classifier is
trained on its features (the linear probe). Around that sit the parameter
audit, label-fraction sweeps, the reconstruction faithfulness study, the
BiGAN ablation and the embedding export.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from guided_gan.datapipe import DatasetSplit, SequenceWindow, stack_windows, stratified_subsample
from guided_gan.exceptions import (
    DegenerateProbeError,
    ShapeError,
    TrainingDiverged,
    UndefinedMetricsError,
    UnsupportedOperation,
)
from guided_gan.frameworks import (
    ModelBundle,
    fork_seed,
    framework_config_hash,
    generate,
    reconstruct_array,
    train,
)
from guided_gan.helpers.artifacts import CsvWriter
from guided_gan.helpers.config_loader import FrameworkConfig, ProbeConfig
from guided_gan.helpers.logger import setup_logger
from guided_gan.netcore import count_parameters, init_linear

logger = setup_logger("evalkit")

PROBE_SCHEMA = "guided-gan/probe"
FAITHFULNESS_SCHEMA = "guided-gan/faithfulness"
ABLATION_SCHEMA = "guided-gan/ablation"
SWEEP_SCHEMA = "guided-gan/sweep v1"
PROBE_CURVE_SCHEMA = "guided-gan/probe-curve v1"
EMBEDDINGS_SCHEMA = "guided-gan/embeddings"
SCHEMA_VERSION = 1

FEATURE_SOURCES = ("encoder", "discriminator")

Windows = Union[Sequence[SequenceWindow], np.ndarray]


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------

def _window_values(windows: Windows) -> np.ndarray:
    if isinstance(windows, np.ndarray):
        return windows
    return stack_windows(list(windows))[0]


def feature_module(bundle: Optional[ModelBundle], source: str = "encoder") -> Optional[nn.Module]:
    """The frozen part of ``bundle`` that produces probe features."""
    if bundle is None:
        return None
    if source == "encoder":
        if bundle.encoder is None:
            hint = " (pass --features discriminator to probe its discriminator)" if bundle.discriminator is not None else ""
            raise UnsupportedOperation(f"framework {bundle.framework!r} has no encoder to extract features from{hint}")
        return bundle.encoder
    if source == "discriminator":
        if bundle.discriminator is None:
            raise UnsupportedOperation(f"framework {bundle.framework!r} has no discriminator")
        return bundle.discriminator.lstm
    raise ValueError(f"feature source must be one of {FEATURE_SOURCES}, got {source!r}")


@torch.no_grad()
def extract_features(bundle: ModelBundle, windows: Windows, *, source: str = "encoder",
                     pooling: str = "last", batch_size: int = 512) -> np.ndarray:
    """
    (n, F) feature matrix. The encoder path returns E(x) (the posterior mean
    for variational encoders). The discriminator path returns the recurrent
    hidden state at the final timestep, or its mean over time with
    ``pooling="mean"``.
    """
    feature_module(bundle, source)
    values = _window_values(windows)
    if values.ndim != 3 or (len(values) and values.shape[1] != bundle.channels):
        raise ShapeError(f"expected (n, {bundle.channels}, W) windows, got {values.shape}")

    was_training = bundle.training
    bundle.eval()
    width = bundle.config.latent_dim if source == "encoder" else bundle.config.hidden_dim
    chunks = []
    try:
        for start in range(0, len(values), batch_size):
            x = torch.as_tensor(values[start:start + batch_size], dtype=bundle.dtype, device=bundle.device)
            if source == "encoder":
                feats = bundle.encoder(x)
            else:
                hidden = bundle.discriminator.hidden_states(x)
                feats = hidden.mean(dim=1) if pooling == "mean" else hidden[:, -1]
            chunks.append(feats.cpu().numpy().astype(np.float64))
    finally:
        bundle.train(was_training)
    return np.concatenate(chunks) if chunks else np.zeros((0, width))


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Metrics:
    accuracy: float
    macro_f1: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray


def metrics(confusion: np.ndarray) -> Metrics:
    """Rows are true classes, columns predictions. Zero-support classes score F1 = 0."""
    cm = np.asarray(confusion, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ShapeError(f"confusion matrix must be square, got {cm.shape}")
    if (cm < 0).any():
        raise ValueError("confusion matrix entries must be non-negative")
    total = cm.sum()
    if total == 0:
        raise UndefinedMetricsError("metrics are undefined for an all-zero confusion matrix")

    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        recall = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
        f1 = np.where(2 * tp + fp + fn > 0, 2 * tp / (2 * tp + fp + fn), 0.0)
    return Metrics(
        accuracy=float(tp.sum() / total),
        macro_f1=float(f1.mean()),
        precision=precision,
        recall=recall,
        f1=f1,
    )


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, num_classes: int) -> np.ndarray:
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


# ---------------------------------------------------------------------------
# Linear probe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParamAudit:
    frozen: int
    trainable: int

    @property
    def ratio(self) -> float:
        total = self.frozen + self.trainable
        return self.trainable / total if total else 0.0


def param_audit(bundle: Optional[ModelBundle], probe: Union[nn.Module, int],
                source: str = "encoder") -> ParamAudit:
    frozen = count_parameters(feature_module(bundle, source))
    trainable = probe if isinstance(probe, int) else count_parameters(probe)
    return ParamAudit(frozen=frozen, trainable=trainable)


@dataclass
class ProbeResult:
    accuracy: float
    macro_f1: float
    confusion: np.ndarray
    precision: List[float]
    recall: List[float]
    f1: List[float]
    trainable_params: int
    frozen_params: int
    n_train: int
    n_test: int
    seeds: Dict[str, int] = field(default_factory=dict)
    feature_source: str = "encoder"
    framework: Optional[str] = None
    config_hash: Optional[str] = None

    @property
    def trainable_ratio(self) -> float:
        return ParamAudit(self.frozen_params, self.trainable_params).ratio

    def to_dict(self) -> dict:
        return {
            "schema": PROBE_SCHEMA,
            "version": SCHEMA_VERSION,
            "framework": self.framework,
            "config_hash": self.config_hash,
            "feature_source": self.feature_source,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "confusion": self.confusion.tolist(),
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "trainable_params": self.trainable_params,
            "frozen_params": self.frozen_params,
            "trainable_ratio": self.trainable_ratio,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "seeds": self.seeds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProbeResult":
        if d.get("schema") != PROBE_SCHEMA:
            raise ValueError("not a probe result")
        return cls(
            accuracy=d["accuracy"], macro_f1=d["macro_f1"], confusion=np.asarray(d["confusion"], dtype=np.int64),
            precision=d["precision"], recall=d["recall"], f1=d["f1"],
            trainable_params=d["trainable_params"], frozen_params=d["frozen_params"],
            n_train=d["n_train"], n_test=d["n_test"], seeds=d.get("seeds", {}),
            feature_source=d.get("feature_source", "encoder"), framework=d.get("framework"),
            config_hash=d.get("config_hash"),
        )


def linear_probe(features_train: np.ndarray, labels_train: np.ndarray,
                 features_test: np.ndarray, labels_test: np.ndarray,
                 config: Optional[ProbeConfig] = None, *, num_classes: Optional[int] = None,
                 frozen_params: int = 0) -> ProbeResult:
    """
    Train one Linear(F, K) on fixed features with cross-entropy and score it
    on the test features. Only the probe's own weights are optimised.
    """
    config = config or ProbeConfig()
    features_train = np.asarray(features_train, dtype=np.float64)
    features_test = np.asarray(features_test, dtype=np.float64)
    labels_train = np.asarray(labels_train, dtype=np.int64)
    labels_test = np.asarray(labels_test, dtype=np.int64)

    if features_train.ndim != 2 or features_test.ndim != 2 or features_train.shape[1] != features_test.shape[1]:
        raise ShapeError(f"feature widths differ: train {features_train.shape} vs test {features_test.shape}")
    if len(features_train) != len(labels_train) or len(features_test) != len(labels_test):
        raise ShapeError("features and labels have different lengths")
    if (labels_train < 0).any() or (labels_test < 0).any():
        raise ValueError("linear probe labels must be non-negative class ids; drop unlabelled windows first")
    present = np.unique(labels_train)
    if len(present) < 2:
        raise DegenerateProbeError(f"linear probe needs at least two training classes, got {present.tolist()}")
    K = num_classes or int(max(labels_train.max(), labels_test.max(initial=0)) + 1)
    if K < 2:
        raise DegenerateProbeError("linear probe needs K >= 2")

    F_dim = features_train.shape[1]
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(fork_seed(config.seed, "probe_init"))
        probe = nn.Linear(F_dim, K).double()
        init_linear(probe)
    order = torch.Generator()
    order.manual_seed(fork_seed(config.seed, "probe_order"))

    xt = torch.from_numpy(features_train)
    yt = torch.from_numpy(labels_train)
    opt = torch.optim.Adam(probe.parameters(), lr=config.lr)
    n = len(xt)
    for epoch in range(config.epochs):
        perm = torch.randperm(n, generator=order)
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            loss = F.cross_entropy(probe(xt[idx]), yt[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
        if (epoch + 1) % 25 == 0:
            logger.debug(f"probe epoch {epoch + 1}/{config.epochs} loss={loss.item():.4f}")

    with torch.no_grad():
        pred = probe(torch.from_numpy(features_test)).argmax(dim=1).numpy()
    cm = confusion_matrix(labels_test, pred, K)
    m = metrics(cm)
    return ProbeResult(
        accuracy=m.accuracy,
        macro_f1=m.macro_f1,
        confusion=cm,
        precision=m.precision.tolist(),
        recall=m.recall.tolist(),
        f1=m.f1.tolist(),
        trainable_params=count_parameters(probe),
        frozen_params=frozen_params,
        n_train=len(labels_train),
        n_test=len(labels_test),
        seeds={"probe": config.seed},
    )


def probe_bundle(bundle: ModelBundle, split: DatasetSplit, config: Optional[ProbeConfig] = None, *,
                 source: str = "encoder") -> ProbeResult:
    """Features from the frozen bundle, then ``linear_probe`` on the labelled train windows."""
    config = config or ProbeConfig()
    x_train, y_train = split.labeled_train_arrays()
    x_test, y_test = split.test_arrays()
    kw = dict(source=source, pooling=config.feature_pooling)
    result = linear_probe(
        extract_features(bundle, x_train, **kw), y_train,
        extract_features(bundle, x_test, **kw), y_test,
        config, num_classes=split.num_classes,
        frozen_params=param_audit(bundle, 0, source).frozen,
    )
    result.feature_source = source
    result.framework = bundle.framework
    result.config_hash = framework_config_hash(bundle.config)
    result.seeds["framework"] = bundle.config.seed
    return result


# ---------------------------------------------------------------------------
# Label-fraction sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    fraction: float
    run: int
    seed: int
    n_labeled: int
    accuracy: float
    macro_f1: float
    degenerate: bool = False


@dataclass
class SweepCurve:
    points: List[SweepPoint]

    def summary(self) -> List[Dict[str, float]]:
        """Mean and std of accuracy per fraction over its non-degenerate runs."""
        out = []
        for f in sorted({p.fraction for p in self.points}):
            accs = [p.accuracy for p in self.points if p.fraction == f and not p.degenerate]
            out.append({
                "fraction": f,
                "mean": float(np.mean(accs)) if accs else math.nan,
                "std": float(np.std(accs)) if accs else math.nan,
                "runs": len(accs),
            })
        return out

    def rows(self) -> List[Dict[str, object]]:
        stats = {s["fraction"]: s for s in self.summary()}
        return [
            {**asdict(p), "mean_accuracy": stats[p.fraction]["mean"], "std_accuracy": stats[p.fraction]["std"]}
            for p in self.points
        ]

    def write_csv(self, path: Path) -> Path:
        columns = ("fraction", "run", "seed", "n_labeled", "accuracy", "macro_f1", "degenerate",
                   "mean_accuracy", "std_accuracy")
        with CsvWriter(path, columns, SWEEP_SCHEMA) as w:
            for row in self.rows():
                w.write(row)
        return Path(path)


def label_fraction_sweep(bundle: ModelBundle, split: DatasetSplit, fractions: Optional[Sequence[float]] = None,
                         n_runs: Optional[int] = None, config: Optional[ProbeConfig] = None, *,
                         source: str = "encoder") -> SweepCurve:
    """
    Probe on stratified subsets of the labelled train windows. Run r uses
    probe seed ``config.seed + r`` for both the subset and the probe, so run 0
    at fraction 1.0 is exactly ``probe_bundle``.
    """
    config = config or ProbeConfig()
    fractions = tuple(fractions or config.fractions)
    n_runs = n_runs or config.runs
    if any(not (0.0 < f <= 1.0) for f in fractions):
        raise ValueError(f"fractions must lie in (0, 1], got {fractions}")

    x_train, y_train = split.train_arrays()
    x_test, y_test = split.test_arrays()
    kw = dict(source=source, pooling=config.feature_pooling)
    f_train = extract_features(bundle, x_train, **kw)
    f_test = extract_features(bundle, x_test, **kw)
    frozen = param_audit(bundle, 0, source).frozen
    classes = set(np.unique(y_train[y_train >= 0]).tolist())

    points: List[SweepPoint] = []
    for f in fractions:
        for run in range(n_runs):
            seed = config.seed + run
            idx = stratified_subsample(y_train, f, seed)
            missing = classes - set(y_train[idx].tolist())
            if missing:
                logger.warning(f"sweep fraction={f} run={run}: classes {sorted(missing)} have no labelled window")
                points.append(SweepPoint(f, run, seed, len(idx), math.nan, math.nan, degenerate=True))
                continue
            try:
                res = linear_probe(f_train[idx], y_train[idx], f_test, y_test, replace(config, seed=seed),
                                   num_classes=split.num_classes, frozen_params=frozen)
            except DegenerateProbeError as e:
                logger.warning(f"sweep fraction={f} run={run}: degenerate subset ({e})")
                points.append(SweepPoint(f, run, seed, len(idx), math.nan, math.nan, degenerate=True))
                continue
            points.append(SweepPoint(f, run, seed, len(idx), res.accuracy, res.macro_f1))
        logger.info(f"sweep fraction={f}: " + ", ".join(
            f"{p.accuracy:.4f}" for p in points if p.fraction == f))
    return SweepCurve(points)


# ---------------------------------------------------------------------------
# Faithfulness
# ---------------------------------------------------------------------------

FAITHFULNESS_ROWS = (
    ("train", "test"),
    ("train", "reconstructed_test"),
    ("reconstructed_train", "test"),
    ("reconstructed_train", "reconstructed_test"),
)


@dataclass
class FaithfulnessTable:
    rows: Dict[Tuple[str, str], ProbeResult]

    def to_dict(self) -> dict:
        return {
            "schema": FAITHFULNESS_SCHEMA,
            "version": SCHEMA_VERSION,
            "rows": [
                {"development": dev, "evaluation": ev, "accuracy": r.accuracy, "macro_f1": r.macro_f1,
                 "confusion": r.confusion.tolist()}
                for (dev, ev), r in self.rows.items()
            ],
        }


Reconstructor = Callable[[np.ndarray], np.ndarray]


def faithfulness_study(bundle: ModelBundle, split: DatasetSplit, config: Optional[ProbeConfig] = None, *,
                       source: str = "encoder", reconstructor: Optional[Reconstructor] = None) -> FaithfulnessTable:
    """
    Probe every (development, evaluation) pairing of the original and the
    reconstructed splits. Reconstructions keep the original labels.
    """
    config = config or ProbeConfig()
    if reconstructor is None:
        if bundle.encoder is None or bundle.generator is None:
            raise UnsupportedOperation(
                f"faithfulness study needs an encoder and a generator; framework {bundle.framework!r} lacks one")
        reconstructor = lambda values: reconstruct_array(bundle, values)  # noqa: E731

    x_train, y_train = split.labeled_train_arrays()
    x_test, y_test = split.test_arrays()
    sets = {
        "train": x_train,
        "test": x_test,
        "reconstructed_train": reconstructor(x_train),
        "reconstructed_test": reconstructor(x_test),
    }
    for name in ("reconstructed_train", "reconstructed_test"):
        original = sets[name.split("_", 1)[1]]
        if sets[name].shape != original.shape:
            raise ShapeError(f"{name} has shape {sets[name].shape}, expected {original.shape}")

    kw = dict(source=source, pooling=config.feature_pooling)
    feats = {k: extract_features(bundle, v, **kw) for k, v in sets.items()}
    frozen = param_audit(bundle, 0, source).frozen
    rows = {}
    for dev, ev in FAITHFULNESS_ROWS:
        rows[(dev, ev)] = linear_probe(feats[dev], y_train, feats[ev], y_test, config,
                                       num_classes=split.num_classes, frozen_params=frozen)
        logger.info(f"faithfulness dev={dev} eval={ev} accuracy={rows[(dev, ev)].accuracy:.4f}")
    return FaithfulnessTable(rows)


# ---------------------------------------------------------------------------
# Periodic probing and the BiGAN ablation
# ---------------------------------------------------------------------------

@torch.no_grad()
def cycle_error(bundle: ModelBundle, n: int = 256, seed: int = 0) -> float:
    """Mean over n generated windows of ||x_hat - G(E(x_hat))||^2."""
    x_hat = generate(bundle, n, seed=seed)
    x_cyc = reconstruct_array(bundle, x_hat)
    return float(((x_hat - x_cyc) ** 2).reshape(n, -1).sum(axis=1).mean())


class PeriodicProbe:
    """Epoch callback: probe (and optionally measure cycle error) every ``every`` epochs, epoch 1 and the last."""

    def __init__(self, split: DatasetSplit, config: ProbeConfig, every: int, last_epoch: int, *,
                 source: str = "encoder", with_cycle_error: bool = False, csv_path: Optional[Path] = None):
        self.split = split
        self.config = config
        self.every = every
        self.last_epoch = last_epoch
        self.source = source
        self.with_cycle_error = with_cycle_error
        self.rows: List[Dict[str, float]] = []
        self._writer = None
        if csv_path is not None:
            self._writer = CsvWriter(csv_path, ("epoch", "accuracy", "macro_f1", "cycle_error"), PROBE_CURVE_SCHEMA)

    def due(self, epoch: int) -> bool:
        return epoch == 1 or epoch == self.last_epoch or (self.every > 0 and epoch % self.every == 0)

    def __call__(self, epoch: int, bundle: ModelBundle) -> None:
        if not self.due(epoch):
            return
        res = probe_bundle(bundle, self.split, self.config, source=self.source)
        row = {"epoch": epoch, "accuracy": res.accuracy, "macro_f1": res.macro_f1}
        if self.with_cycle_error:
            row["cycle_error"] = cycle_error(bundle, seed=self.config.seed)
        self.rows.append(row)
        if self._writer is not None:
            self._writer.write(row)
        logger.info(f"probe at epoch {epoch}: accuracy={res.accuracy:.4f}"
                    + (f" cycle_error={row['cycle_error']:.4f}" if "cycle_error" in row else ""))

    def close(self) -> None:
        if self._writer is not None:
            self._writer.close()


@dataclass
class AblationArm:
    name: str
    lambda_x: float
    lambda_z: float
    curve: List[Dict[str, float]] = field(default_factory=list)
    diverged: bool = False
    error: Optional[str] = None
    diverged_at_step: Optional[int] = None

    @property
    def final_accuracy(self) -> float:
        return self.curve[-1]["accuracy"] if self.curve else math.nan


@dataclass
class AblationRecord:
    arms: List[AblationArm]

    def to_dict(self) -> dict:
        return {"schema": ABLATION_SCHEMA, "version": SCHEMA_VERSION, "arms": [asdict(a) for a in self.arms]}

    def rows(self) -> List[Dict[str, object]]:
        return [{"arm": a.name, **r} for a in self.arms for r in a.curve]


def bigan_ablation(framework_config: FrameworkConfig, split: DatasetSplit, probe_config: Optional[ProbeConfig] = None,
                   *, epochs: Optional[int] = None, eval_every: int = 10) -> AblationRecord:
    """
    Train Guided-GAN and its lambda_x = lambda_z = 0 corner (the RBiGAN
    objective) under the same seed and configuration, probing and measuring
    cycle error along the way. A diverging arm is recorded, not raised.
    """
    probe_config = probe_config or ProbeConfig()
    base = replace(framework_config, framework="guided_gan", epochs=epochs or framework_config.epochs)
    arms = [
        AblationArm("guided_gan", base.lambda_x, base.lambda_z),
        AblationArm("rbigan", 0.0, 0.0),
    ]
    for arm in arms:
        cfg = replace(base, lambda_x=arm.lambda_x, lambda_z=arm.lambda_z)
        tracker = PeriodicProbe(split, probe_config, eval_every, cfg.epochs, with_cycle_error=True)
        logger.info(f"ablation arm {arm.name}: lambda_x={arm.lambda_x} lambda_z={arm.lambda_z}")
        try:
            train(cfg, split, on_epoch_end=tracker)
        except TrainingDiverged as e:
            arm.diverged, arm.error, arm.diverged_at_step = True, str(e), e.step
            logger.warning(f"ablation arm {arm.name} diverged at step {e.step}")
        arm.curve = tracker.rows
    return AblationRecord(arms)


# ---------------------------------------------------------------------------
# Embedding export
# ---------------------------------------------------------------------------

def export_embeddings(bundle: ModelBundle, windows: Sequence[SequenceWindow], path: Union[str, Path], *,
                      source: str = "encoder", pooling: str = "last") -> Path:
    """
    Text export for external projection tools.

        # guided-gan/embeddings v1 dims=<F> n=<n> config_hash=<sha256>
        <label> <f_1> ... <f_F>

    Features are written with 9 significant digits; unlabelled windows carry -1.
    """
    path = Path(path)
    windows = list(windows)
    feats = extract_features(bundle, windows, source=source, pooling=pooling)
    labels = [w.label if w.label is not None else -1 for w in windows]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# {EMBEDDINGS_SCHEMA} v{SCHEMA_VERSION} dims={feats.shape[1]} n={len(windows)} "
                f"config_hash={framework_config_hash(bundle.config)}\n")
        for label, row in zip(labels, feats):
            f.write(str(int(label)) + " " + " ".join("%.9g" % v for v in row) + "\n")
    return path


def read_embeddings(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray, Dict[str, str]]:
    with open(path, "r", encoding="utf-8") as f:
        head = f.readline()
        if not head.startswith(f"# {EMBEDDINGS_SCHEMA}"):
            raise ValueError(f"{path} is not an embeddings export")
        header = dict(tok.split("=", 1) for tok in head[2:].split() if "=" in tok)
        rows = [ln.split() for ln in f if ln.strip()]
    dims = int(header["dims"])
    labels = np.array([int(r[0]) for r in rows], dtype=np.int64)
    feats = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64).reshape(len(rows), dims)
    return feats, labels, header
