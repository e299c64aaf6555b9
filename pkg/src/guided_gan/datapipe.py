# guided_gan/datapipe.py
"""
Sequence-window data pipeline.

Turns raw multi-channel streams (and MNIST images) into fixed-length D x W
windows scaled into [-1, 1] with statistics fitted on the training split.

Dataset cache layout (``save_split_cache`` / ``load_split_cache``), one file
per split, little-endian:

    line 1   b"GGWIN1\\n"
    line 2   JSON header, UTF-8, terminated by b"\\n":
             {"schema": "guided-gan/window-cache", "version": 1, "n": N,
              "channels": D, "window": W, "num_classes": K, "seed": S,
              "normalizer": {"min": [...], "max": [...], "fitted_on": "train"} | null}
             (normaliser statistics written as decimal text via repr)
    body     int32[N] labels (-1 = unlabelled), then float32[N, D, W] row-major
"""
from __future__ import annotations

import gzip
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import requests

from guided_gan.exceptions import (
    DegenerateChannelError,
    IngestionError,
    ShapeError,
    UpsamplingNotSupported,
)
from guided_gan.helpers.logger import setup_logger

logger = setup_logger("datapipe")

CLIP_TOLERANCE = 1e-6
CACHE_MAGIC = b"GGWIN1\n"

UCIHAR_SIGNALS = (
    "body_acc_x", "body_acc_y", "body_acc_z",
    "body_gyro_x", "body_gyro_y", "body_gyro_z",
    "total_acc_x", "total_acc_y", "total_acc_z",
)
UCIHAR_RATE_HZ = 50.0

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}
MNIST_MIRROR = "https://ossci-datasets.s3.amazonaws.com/mnist"


@dataclass(frozen=True)
class RawStream:
    values: np.ndarray  # (D, T)
    sample_rate_hz: float
    channel_names: List[str]
    labels: Optional[np.ndarray] = None  # (T,)
    stream_id: str = "stream"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ShapeError(f"RawStream values must be a non-empty D x T matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            bad = sorted(set(np.nonzero(~np.isfinite(values))[1].tolist()))[:5]
            raise ValueError(f"RawStream {self.stream_id!r} contains non-finite samples (first columns: {bad})")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if len(self.channel_names) != values.shape[0]:
            raise ShapeError(f"{len(self.channel_names)} channel names for {values.shape[0]} channels")
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (values.shape[1],):
                raise ShapeError(f"labels must have length T={values.shape[1]}, got {labels.shape}")
            object.__setattr__(self, "labels", labels)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SequenceWindow:
    values: np.ndarray  # (D, W)
    label: Optional[int] = None
    source_span: Tuple[str, int] = ("-", 0)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError(f"SequenceWindow values must be D x W, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class NormalizerStats:
    minimum: np.ndarray
    maximum: np.ndarray
    fitted_on: str = "train"

    @property
    def channels(self) -> int:
        return self.minimum.shape[0]

    def to_dict(self) -> dict:
        return {
            "min": [repr(float(v)) for v in self.minimum],
            "max": [repr(float(v)) for v in self.maximum],
            "fitted_on": self.fitted_on,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizerStats":
        return cls(
            minimum=np.array([float(v) for v in d["min"]]),
            maximum=np.array([float(v) for v in d["max"]]),
            fitted_on=d.get("fitted_on", "train"),
        )


@dataclass(frozen=True)
class DatasetSplit:
    train: List[SequenceWindow]
    test: List[SequenceWindow]
    num_classes: int
    seed: int = 0
    label_fraction: float = 1.0
    name: str = "dataset"
    normalizer: Optional[NormalizerStats] = None
    labeled_index: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0.0 < self.label_fraction <= 1.0:
            raise ValueError(f"label_fraction must lie in (0, 1], got {self.label_fraction}")
        spans = {w.source_span for w in self.train}
        overlap = spans.intersection(w.source_span for w in self.test)
        if overlap:
            raise ValueError(f"train/test windows share source spans, e.g. {sorted(overlap)[:3]}")

    @property
    def channels(self) -> int:
        return (self.train or self.test)[0].values.shape[0]

    @property
    def window(self) -> int:
        return (self.train or self.test)[0].values.shape[1]

    def train_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return stack_windows(self.train)

    def test_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return stack_windows(self.test)

    def labeled_train_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        x, y = self.train_arrays()
        if self.labeled_index is None:
            return x, y
        return x[self.labeled_index], y[self.labeled_index]


def stack_windows(windows: Sequence[SequenceWindow]) -> Tuple[np.ndarray, np.ndarray]:
    """(N, D, W) float64 values and (N,) int64 labels, -1 for unlabelled windows."""
    if not windows:
        return np.zeros((0, 0, 0)), np.zeros((0,), dtype=np.int64)
    shapes = {w.values.shape for w in windows}
    if len(shapes) != 1:
        raise ShapeError(f"windows of a dataset must share one shape, found {sorted(shapes)}")
    x = np.stack([w.values for w in windows])
    y = np.array([-1 if w.label is None else int(w.label) for w in windows], dtype=np.int64)
    return x, y


def windows_from_arrays(values: np.ndarray, labels: Optional[np.ndarray], source: str) -> List[SequenceWindow]:
    labels = labels if labels is not None else np.full(len(values), -1)
    return [
        SequenceWindow(values=v, label=None if int(l) < 0 else int(l), source_span=(source, i))
        for i, (v, l) in enumerate(zip(values, labels))
    ]


# ---------------------------------------------------------------------------
# Stream operations
# ---------------------------------------------------------------------------

def downsample(stream: RawStream, target_hz: float) -> RawStream:
    """Keep every k-th sample, k = round(source / target). Labels are decimated identically."""
    source_hz = stream.sample_rate_hz
    if target_hz <= 0:
        raise ValueError(f"target_hz must be positive, got {target_hz}")
    if target_hz > source_hz:
        raise UpsamplingNotSupported(f"cannot resample {source_hz} Hz up to {target_hz} Hz")
    k = max(1, int(round(source_hz / target_hz)))
    if k == 1:
        return stream
    labels = stream.labels[::k] if stream.labels is not None else None
    logger.debug(f"downsample {stream.stream_id}: {source_hz} Hz -> {source_hz / k:.3f} Hz (k={k})")
    return replace(stream, values=stream.values[:, ::k], sample_rate_hz=source_hz / k, labels=labels)


def decimate_windows(values: np.ndarray, source_hz: float, target_hz: float) -> np.ndarray:
    """Window-batch variant of downsample for datasets published as pre-cut windows (N, D, W)."""
    if target_hz > source_hz:
        raise UpsamplingNotSupported(f"cannot resample {source_hz} Hz up to {target_hz} Hz")
    k = max(1, int(round(source_hz / target_hz)))
    return values[:, :, ::k]


TrainData = Union[RawStream, Sequence[SequenceWindow], np.ndarray]


def fit_normalizer(train: TrainData, channel_names: Optional[Sequence[str]] = None) -> NormalizerStats:
    """Per-channel min/max over training data only."""
    if isinstance(train, RawStream):
        channel_names = channel_names or train.channel_names
        flat = train.values
    else:
        arr = stack_windows(train)[0] if not isinstance(train, np.ndarray) else np.asarray(train, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.size == 0:
            raise ShapeError(f"expected (N, D, W) training windows, got shape {arr.shape}")
        flat = arr.transpose(1, 0, 2).reshape(arr.shape[1], -1)

    lo = flat.min(axis=1)
    hi = flat.max(axis=1)
    for c in range(flat.shape[0]):
        if not hi[c] > lo[c]:
            name = channel_names[c] if channel_names else f"channel_{c}"
            raise DegenerateChannelError(name)
    return NormalizerStats(minimum=lo, maximum=hi, fitted_on="train")


def normalize_array(stats: NormalizerStats, values: np.ndarray) -> np.ndarray:
    """x' = 2 (x - min) / (max - min) - 1 per channel, clipped to [-1, 1]. Accepts (D, W) or (N, D, W)."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-2] != stats.channels:
        raise ShapeError(f"normaliser fitted on {stats.channels} channels, window has {values.shape[-2]}")
    lo = stats.minimum[:, None]
    span = (stats.maximum - stats.minimum)[:, None]
    return np.clip(2.0 * (values - lo) / span - 1.0, -1.0, 1.0)


def denormalize_array(stats: NormalizerStats, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-2] != stats.channels:
        raise ShapeError(f"normaliser fitted on {stats.channels} channels, window has {values.shape[-2]}")
    span = (stats.maximum - stats.minimum)[:, None]
    return (values + 1.0) * span / 2.0 + stats.minimum[:, None]


def apply_normalizer(stats: NormalizerStats, window: SequenceWindow) -> SequenceWindow:
    return replace(window, values=normalize_array(stats, window.values))


def _window_label(labels: np.ndarray) -> int:
    """Majority label; ties go to the tied label seen latest (the last sample's label when it is tied)."""
    values, counts = np.unique(labels, return_counts=True)
    tied = set(values[counts == counts.max()].tolist())
    for lab in labels[::-1]:
        if int(lab) in tied:
            return int(lab)
    return int(values[0])


def segment(stream: RawStream, W: int, stride: int) -> List[SequenceWindow]:
    """Sliding-window segmentation; the ragged tail is dropped."""
    if stride <= 0:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if W <= 0:
        raise ValueError(f"window length must be >= 1, got {W}")
    T = stream.length
    if W > T:
        logger.warning(f"segment {stream.stream_id}: window W={W} longer than stream T={T}; no windows")
        return []

    out: List[SequenceWindow] = []
    for start in range(0, T - W + 1, stride):
        label = None
        if stream.labels is not None:
            label = _window_label(stream.labels[start:start + W])
        out.append(SequenceWindow(
            values=stream.values[:, start:start + W].copy(),
            label=label,
            source_span=(stream.stream_id, start),
        ))
    return out


def window_count(T: int, W: int, stride: int) -> int:
    return 0 if W > T else (T - W) // stride + 1


# ---------------------------------------------------------------------------
# Label subsets
# ---------------------------------------------------------------------------

def stratified_subsample(labels: np.ndarray, fraction: float, seed: int) -> np.ndarray:
    """
    Sorted indices of a class-stratified subset holding round(fraction * n_k)
    windows of each class k. A class that would round to zero keeps one window
    when the subset as a whole has room for every class. fraction == 1 returns
    every index in original order.
    """
    labels = np.asarray(labels)
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    if fraction == 1.0:
        return np.arange(len(labels))

    rng = np.random.default_rng(seed)
    classes = np.unique(labels[labels >= 0])
    room_for_all = int(round(fraction * len(labels))) >= len(classes)
    picked = []
    for k in classes:
        idx = np.flatnonzero(labels == k)
        take = int(np.floor(fraction * len(idx) + 0.5))
        if take == 0 and room_for_all:
            take = 1
        picked.append(rng.choice(idx, size=min(take, len(idx)), replace=False))
    return np.sort(np.concatenate(picked)) if picked else np.zeros(0, dtype=np.int64)


def with_label_fraction(split: DatasetSplit, fraction: float, seed: int) -> DatasetSplit:
    _, y = split.train_arrays()
    return replace(split, label_fraction=fraction, labeled_index=stratified_subsample(y, fraction, seed))


# ---------------------------------------------------------------------------
# Sequential MNIST
# ---------------------------------------------------------------------------

def mnist_as_sequence(image: np.ndarray, label: Optional[int] = None,
                      source_span: Tuple[str, int] = ("mnist", 0)) -> SequenceWindow:
    """One 28x28 image -> 28 channels x 28 timesteps, timestep t = image row t (top to bottom)."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (28, 28):
        raise ShapeError(f"MNIST image must be 28x28, got {image.shape}")
    if image.max(initial=0.0) > 1.0:
        image = image / 255.0
    return SequenceWindow(values=(2.0 * image - 1.0).T, label=label, source_span=source_span)


def _images_to_sequences(images: np.ndarray) -> np.ndarray:
    """Vectorised mnist_as_sequence for uint8 (N, 28, 28) batches."""
    return (2.0 * (images.astype(np.float64) / 255.0) - 1.0).transpose(0, 2, 1)


def _open_idx(root: Path, stem: str):
    for candidate in (root / stem, root / f"{stem}.gz"):
        if candidate.exists():
            return gzip.open(candidate, "rb") if candidate.suffix == ".gz" else open(candidate, "rb")
    raise IngestionError(
        f"MNIST file {stem}[.gz] not found under {root}. Expected layout: "
        + ", ".join(f"{root}/{name}[.gz]" for name in MNIST_FILES.values())
    )


def _read_idx(root: Path, stem: str) -> np.ndarray:
    with _open_idx(root, stem) as fh:
        raw = fh.read()
    magic = int.from_bytes(raw[:4], "big")
    ndim = magic & 0xFF
    dims = [int.from_bytes(raw[4 + 4 * i: 8 + 4 * i], "big") for i in range(ndim)]
    data = np.frombuffer(raw, dtype=np.uint8, offset=4 + 4 * ndim)
    if data.size != int(np.prod(dims)):
        raise IngestionError(f"{stem}: header declares {dims} but payload has {data.size} bytes")
    return data.reshape(dims)


def fetch_mnist(root: Union[str, Path], mirror: str = MNIST_MIRROR, timeout: int = 60) -> Path:
    """Download any missing MNIST IDX archive into ``root``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for stem in MNIST_FILES.values():
        if (root / stem).exists() or (root / f"{stem}.gz").exists():
            continue
        url = f"{mirror.rstrip('/')}/{stem}.gz"
        logger.info(f"Downloading {url}")
        r = requests.get(url, timeout=timeout)
        r.raise_for_status()
        (root / f"{stem}.gz").write_bytes(r.content)
    return root


def load_mnist(root: Union[str, Path], *, train_limit: Optional[int] = 10000, seed: int = 0,
               download: bool = False) -> DatasetSplit:
    """Sequential MNIST: a seeded train subset of ``train_limit`` images and the full test set."""
    root = Path(root)
    if download:
        fetch_mnist(root)
    x_train = _read_idx(root, MNIST_FILES["train_images"])
    y_train = _read_idx(root, MNIST_FILES["train_labels"]).astype(np.int64)
    x_test = _read_idx(root, MNIST_FILES["test_images"])
    y_test = _read_idx(root, MNIST_FILES["test_labels"]).astype(np.int64)

    index = np.arange(len(x_train))
    if train_limit is not None and train_limit < len(index):
        index = np.sort(np.random.default_rng(seed).choice(index, size=train_limit, replace=False))

    train = [
        SequenceWindow(values=v, label=int(y_train[i]), source_span=("mnist/train", int(i)))
        for i, v in zip(index, _images_to_sequences(x_train[index]))
    ]
    test = windows_from_arrays(_images_to_sequences(x_test), y_test, "mnist/test")
    logger.info(f"Sequential MNIST loaded train={len(train)} test={len(test)} from {root}")
    return DatasetSplit(train=train, test=test, num_classes=10, seed=seed, name="mnist")


# ---------------------------------------------------------------------------
# Synthetic HAR
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthHARConfig:
    num_classes: int = 6
    channels: int = 3
    window: int = 30
    per_class: int = 100
    noise: float = 0.1
    seed: int = 0
    train_share: float = 0.7

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError(f"synth_har needs at least 2 classes, got {self.num_classes}")
        if self.channels < 1 or self.window < 1 or self.per_class < 1:
            raise ValueError("synth_har channels, window and per_class must be >= 1")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")


def synth_har(config: SynthHARConfig) -> DatasetSplit:
    """
    Deterministic activity-like data: class k emits, on every channel, a sum of
    two sinusoids drawn from a per-class (frequency, amplitude, phase) template,
    plus Gaussian noise. Windows are generated class-interleaved and the first
    70% (generation order) form the train split.
    """
    rng = np.random.default_rng(config.seed)
    K, D, W = config.num_classes, config.channels, config.window
    t = np.arange(W, dtype=np.float64)

    # templates: (K, D, 2) cycles per window, amplitudes, phases
    freqs = rng.uniform(0.5, 4.0, size=(K, D, 2)) / W
    amps = rng.uniform(0.3, 1.0, size=(K, D, 2))
    phases = rng.uniform(0.0, 2 * np.pi, size=(K, D, 2))
    offsets = rng.uniform(-0.5, 0.5, size=(K, D))

    clean = offsets[..., None] + np.sum(
        amps[..., None] * np.sin(2 * np.pi * freqs[..., None] * t + phases[..., None]), axis=2
    )  # (K, D, W)

    n = K * config.per_class
    labels = np.tile(np.arange(K), config.per_class)
    values = clean[labels] + config.noise * rng.standard_normal((n, D, W))

    cut = int(config.train_share * n)
    stats = fit_normalizer(values[:cut])
    values = normalize_array(stats, values)

    windows = windows_from_arrays(values, labels, "synth_har")
    return DatasetSplit(
        train=windows[:cut], test=windows[cut:], num_classes=K, seed=config.seed,
        name="synth_har", normalizer=stats,
    )


# ---------------------------------------------------------------------------
# UCI HAR
# ---------------------------------------------------------------------------

def _ucihar_layout(root: Path, part: str) -> List[Path]:
    signal_dir = root / part / "Inertial Signals"
    return [signal_dir / f"{name}_{part}.txt" for name in UCIHAR_SIGNALS] + [root / part / f"y_{part}.txt"]


def _read_ucihar_part(root: Path, part: str) -> Tuple[np.ndarray, np.ndarray]:
    expected = _ucihar_layout(root, part)
    missing = [p for p in expected if not p.exists()]
    if missing:
        layout = "\n  ".join(str(p.relative_to(root)) for p in expected)
        raise IngestionError(
            f"UCI HAR {part} split incomplete under {root}; missing {len(missing)} file(s), "
            f"first {missing[0]}. Expected layout:\n  {layout}"
        )
    # one (rows, 128) matrix per signal, read in sorted signal order
    signal_paths = sorted(expected[:-1], key=lambda p: p.name)
    signals = [np.atleast_2d(np.loadtxt(p, dtype=np.float64)) for p in signal_paths]
    rows = {s.shape for s in signals}
    if len(rows) != 1:
        raise IngestionError(f"UCI HAR {part} signal files disagree on shape: {sorted(rows)}")
    values = np.stack(signals, axis=1)  # (N, 9, 128)
    labels = np.atleast_1d(np.loadtxt(expected[-1], dtype=np.int64)) - 1
    if len(labels) != len(values):
        raise IngestionError(f"UCI HAR {part}: {len(labels)} labels for {len(values)} windows")
    if labels.min(initial=0) < 0 or labels.max(initial=0) > 5:
        raise IngestionError(f"UCI HAR {part}: labels outside 1..6")
    return values, labels


def ingest_ucihar(root: Union[str, Path], *, target_hz: Optional[float] = None,
                  window: Optional[int] = None, stride: Optional[int] = None) -> DatasetSplit:
    """
    Assemble 9-channel windows from the published raw inertial-signal files.
    Optionally decimate to ``target_hz`` and re-cut each published window into
    sub-windows of length ``window``. Normalisation is fitted on train.
    """
    root = Path(root)
    parts = {}
    for part in ("train", "test"):
        values, labels = _read_ucihar_part(root, part)
        rate = UCIHAR_RATE_HZ
        if target_hz is not None:
            values = decimate_windows(values, rate, target_hz)
        parts[part] = (values, labels)

    stats = fit_normalizer(parts["train"][0], channel_names=list(UCIHAR_SIGNALS))

    out = {}
    for part, (values, labels) in parts.items():
        values = normalize_array(stats, values)
        native = values.shape[2]
        if window is None or window >= native:
            out[part] = windows_from_arrays(values, labels, f"ucihar/{part}")
            continue
        cut: List[SequenceWindow] = []
        for row, (v, lab) in enumerate(zip(values, labels)):
            stream = RawStream(values=v, sample_rate_hz=target_hz or UCIHAR_RATE_HZ,
                               channel_names=list(UCIHAR_SIGNALS),
                               labels=np.full(native, lab), stream_id=f"ucihar/{part}/{row}")
            cut.extend(segment(stream, window, stride or window))
        out[part] = cut

    logger.info(f"UCI HAR loaded train={len(out['train'])} test={len(out['test'])} from {root}")
    return DatasetSplit(train=out["train"], test=out["test"], num_classes=6, name="ucihar", normalizer=stats)


# ---------------------------------------------------------------------------
# Dataset cache
# ---------------------------------------------------------------------------

def save_split_cache(path: Union[str, Path], windows: Sequence[SequenceWindow], *, num_classes: int,
                     seed: int, normalizer: Optional[NormalizerStats] = None) -> Path:
    path = Path(path)
    x, y = stack_windows(windows)
    n = len(windows)
    D, W = (x.shape[1], x.shape[2]) if n else (0, 0)
    header = {
        "schema": "guided-gan/window-cache",
        "version": 1,
        "n": n,
        "channels": D,
        "window": W,
        "num_classes": int(num_classes),
        "seed": int(seed),
        "normalizer": normalizer.to_dict() if normalizer is not None else None,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(y.astype("<i4").tobytes())
        fh.write(x.astype("<f4").tobytes(order="C"))
    return path


def load_split_cache(path: Union[str, Path]) -> Tuple[List[SequenceWindow], dict]:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.readline() != CACHE_MAGIC:
            raise IngestionError(f"{path} is not a window cache (bad magic)")
        header = json.loads(fh.readline().decode("utf-8"))
        n, D, W = header["n"], header["channels"], header["window"]
        labels = np.frombuffer(fh.read(4 * n), dtype="<i4").astype(np.int64)
        values = np.frombuffer(fh.read(4 * n * D * W), dtype="<f4").reshape(n, D, W).astype(np.float64)
    return windows_from_arrays(values, labels, path.stem), header
