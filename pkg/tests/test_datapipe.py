import numpy as np
import pytest

from guided_gan.datapipe import (
    CLIP_TOLERANCE,
    DatasetSplit,
    NormalizerStats,
    RawStream,
    SequenceWindow,
    SynthHARConfig,
    apply_normalizer,
    denormalize_array,
    downsample,
    fit_normalizer,
    ingest_ucihar,
    load_mnist,
    load_split_cache,
    mnist_as_sequence,
    normalize_array,
    save_split_cache,
    segment,
    stratified_subsample,
    synth_har,
    window_count,
    with_label_fraction,
)
from guided_gan.exceptions import DegenerateChannelError, IngestionError, ShapeError, UpsamplingNotSupported


def _stream(values, rate=50.0, labels=None, sid="s"):
    values = np.atleast_2d(values)
    return RawStream(values=values, sample_rate_hz=rate,
                     channel_names=[f"c{i}" for i in range(values.shape[0])], labels=labels, stream_id=sid)


# --- RawStream ---------------------------------------------------------------

def test_raw_stream_rejects_non_finite_samples():
    with pytest.raises(ValueError):
        _stream([[0.0, np.nan, 1.0]])


def test_raw_stream_rejects_bad_rate():
    with pytest.raises(ValueError):
        _stream([[0.0, 1.0]], rate=0.0)


# --- downsample --------------------------------------------------------------

def test_downsample_keeps_every_kth_sample():
    s = _stream(np.arange(100.0)[None], labels=np.arange(100) % 3)
    out = downsample(s, 33.0)
    assert out.length == 50
    np.testing.assert_array_equal(out.values[0], np.arange(0, 100, 2))
    np.testing.assert_array_equal(out.labels, (np.arange(100) % 3)[::2])
    assert out.sample_rate_hz == pytest.approx(25.0)


def test_downsample_same_rate_is_identity():
    s = _stream(np.random.default_rng(0).normal(size=(2, 40)))
    assert downsample(s, 50.0) is s


def test_downsample_refuses_upsampling():
    with pytest.raises(UpsamplingNotSupported):
        downsample(_stream([[0.0, 1.0, 2.0]]), 100.0)


def test_downsample_preserves_sine_frequency():
    t = np.arange(1000) / 100.0
    s = _stream(np.sin(2 * np.pi * 1.0 * t + 0.1)[None], rate=100.0)
    out = downsample(s, 50.0)

    def crossings(x):
        return int(np.sum(np.signbit(x[:-1]) != np.signbit(x[1:])))

    duration = out.length / out.sample_rate_hz
    assert crossings(out.values[0]) / (2 * duration) == pytest.approx(1.0, abs=0.1)


# --- normalisation -----------------------------------------------------------

def test_fit_normalizer_min_max():
    stats = fit_normalizer(_stream([[-2.0, 0.0, 6.0], [1.0, 5.0, 3.0]]))
    np.testing.assert_array_equal(stats.minimum, [-2.0, 1.0])
    np.testing.assert_array_equal(stats.maximum, [6.0, 5.0])
    assert stats.fitted_on == "train"


def test_fit_normalizer_names_degenerate_channel():
    s = RawStream(values=np.array([[1.0, 2.0], [4.0, 4.0]]), sample_rate_hz=1.0, channel_names=["acc", "gyro"])
    with pytest.raises(DegenerateChannelError) as exc:
        fit_normalizer(s)
    assert exc.value.channel == "gyro"


def test_apply_normalizer_maps_and_clips():
    stats = NormalizerStats(minimum=np.array([-2.0]), maximum=np.array([6.0]))
    w = apply_normalizer(stats, SequenceWindow(values=np.array([[-2.0, 6.0, 2.0, 10.0]])))
    np.testing.assert_allclose(w.values[0], [-1.0, 1.0, 0.0, 1.0])


def test_apply_normalizer_channel_mismatch():
    stats = NormalizerStats(minimum=np.zeros(2), maximum=np.ones(2))
    with pytest.raises(ShapeError):
        apply_normalizer(stats, SequenceWindow(values=np.zeros((3, 4))))


def test_normalizer_properties_hold_on_random_cases():
    rng = np.random.default_rng(1234)
    for _ in range(1000):
        n, D, W = rng.integers(1, 6), rng.integers(1, 4), rng.integers(2, 8)
        train = rng.normal(scale=rng.uniform(0.1, 10), size=(n, D, W)) + rng.normal(size=(1, D, 1))
        stats = fit_normalizer(train)

        # exhaustive min/max oracle
        flat = train.transpose(1, 0, 2).reshape(D, -1)
        np.testing.assert_array_equal(stats.minimum, [min(row) for row in flat])
        np.testing.assert_array_equal(stats.maximum, [max(row) for row in flat])

        z = normalize_array(stats, train)
        assert z.min() >= -1 - CLIP_TOLERANCE and z.max() <= 1 + CLIP_TOLERANCE
        np.testing.assert_allclose(denormalize_array(stats, z), train, atol=1e-6 * max(1.0, np.abs(train).max()))


def test_channels_are_fitted_independently():
    base = np.array([[[0.0, 1.0, 2.0], [5.0, 6.0, 7.0]]])
    other = base.copy()
    other[0, 1] *= 100
    assert fit_normalizer(base).minimum[0] == fit_normalizer(other).minimum[0]
    assert fit_normalizer(base).maximum[0] == fit_normalizer(other).maximum[0]


# --- segmentation ------------------------------------------------------------

def test_segment_starts_and_count():
    windows = segment(_stream(np.arange(100.0)[None]), 30, 15)
    assert [w.source_span[1] for w in windows] == [0, 15, 30, 45, 60]


def test_segment_boundary_single_window():
    assert len(segment(_stream(np.arange(30.0)[None]), 30, 1)) == 1


def test_segment_window_longer_than_stream_warns_empty():
    assert segment(_stream(np.arange(10.0)[None]), 30, 1) == []


def test_segment_rejects_bad_stride():
    with pytest.raises(ValueError):
        segment(_stream(np.arange(10.0)[None]), 3, 0)


def test_segment_majority_label():
    labels = np.array([0] * 20 + [1] * 10)
    (w,) = segment(_stream(np.zeros((1, 30)) + np.arange(30), labels=labels), 30, 30)
    assert w.label == 0


def test_segment_tie_goes_to_last_sample_label():
    labels = np.array([0] * 15 + [1] * 15)
    (w,) = segment(_stream(np.arange(30.0)[None], labels=labels), 30, 30)
    assert w.label == 1


def test_segmentation_properties_on_random_streams():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        T = int(rng.integers(1, 80))
        W = int(rng.integers(1, 90))
        stride = int(rng.integers(1, 20))
        D = int(rng.integers(1, 4))
        s = _stream(rng.normal(size=(D, T)))
        windows = segment(s, W, stride)

        brute = [start for start in range(T) if start + W <= T and start % stride == 0]
        assert len(windows) == window_count(T, W, stride) == len(brute)
        if W <= T:
            assert len(windows) == (T - W) // stride + 1
        for w, start in zip(windows, brute):
            assert w.source_span[1] == start
            np.testing.assert_array_equal(w.values, s.values[:, start:start + W])


# --- MNIST -------------------------------------------------------------------

def test_mnist_black_and_white_images():
    np.testing.assert_array_equal(mnist_as_sequence(np.zeros((28, 28))).values, -np.ones((28, 28)))
    np.testing.assert_array_equal(mnist_as_sequence(np.full((28, 28), 255.0)).values, np.ones((28, 28)))


def test_mnist_rows_become_timesteps():
    img = np.random.default_rng(0).integers(0, 256, size=(28, 28)).astype(float)
    seq = mnist_as_sequence(img).values
    rev = mnist_as_sequence(img[::-1]).values
    np.testing.assert_array_equal(rev, seq[:, ::-1])
    np.testing.assert_allclose(seq[:, 3], 2 * img[3] / 255.0 - 1)


def test_mnist_wrong_shape():
    with pytest.raises(ShapeError):
        mnist_as_sequence(np.zeros((28, 27)))


def _write_idx(path, array, magic_type=0x08):
    header = bytes([0, 0, magic_type, array.ndim]) + b"".join(int(d).to_bytes(4, "big") for d in array.shape)
    path.write_bytes(header + array.astype(np.uint8).tobytes())


def test_load_mnist_from_idx_files(tmp_path):
    rng = np.random.default_rng(0)
    _write_idx(tmp_path / "train-images-idx3-ubyte", rng.integers(0, 256, size=(20, 28, 28)))
    _write_idx(tmp_path / "train-labels-idx1-ubyte", np.arange(20) % 10)
    _write_idx(tmp_path / "t10k-images-idx3-ubyte", rng.integers(0, 256, size=(5, 28, 28)))
    _write_idx(tmp_path / "t10k-labels-idx1-ubyte", np.arange(5))

    split = load_mnist(tmp_path, train_limit=8, seed=1)
    assert len(split.train) == 8 and len(split.test) == 5
    assert split.channels == 28 and split.window == 28 and split.num_classes == 10
    assert all(-1.0 <= w.values.min() and w.values.max() <= 1.0 for w in split.test)


def test_load_mnist_missing_files(tmp_path):
    with pytest.raises(IngestionError, match="t10k|train"):
        load_mnist(tmp_path)


# --- synthetic HAR -----------------------------------------------------------

def test_synth_har_is_deterministic():
    a = synth_har(SynthHARConfig(seed=5))
    b = synth_har(SynthHARConfig(seed=5))
    assert a.train_arrays()[0].tobytes() == b.train_arrays()[0].tobytes()
    assert a.test_arrays()[1].tobytes() == b.test_arrays()[1].tobytes()


def test_synth_har_split_and_range():
    split = synth_har(SynthHARConfig(num_classes=4, channels=2, window=10, per_class=10))
    assert len(split.train) == 28 and len(split.test) == 12
    x, _ = split.train_arrays()
    assert x.min() >= -1.0 and x.max() <= 1.0
    assert split.normalizer is not None and split.normalizer.fitted_on == "train"


def test_synth_har_noiseless_windows_repeat_per_class():
    split = synth_har(SynthHARConfig(num_classes=3, per_class=5, noise=0.0))
    x, y = split.train_arrays()
    for k in range(3):
        rows = x[y == k]
        np.testing.assert_allclose(rows, np.broadcast_to(rows[0], rows.shape))


def test_synth_har_nearest_centroid_separates_classes():
    split = synth_har(SynthHARConfig(noise=0.05, seed=2))
    xtr, ytr = split.train_arrays()
    xte, yte = split.test_arrays()
    centroids = np.stack([xtr[ytr == k].mean(axis=0) for k in range(split.num_classes)])
    dist = ((xte[:, None] - centroids[None]) ** 2).sum(axis=(2, 3))
    assert (dist.argmin(axis=1) == yte).mean() >= 0.95


# --- splits and label fractions ----------------------------------------------

def test_split_rejects_shared_spans():
    w = SequenceWindow(values=np.zeros((1, 2)), label=0, source_span=("s", 0))
    with pytest.raises(ValueError):
        DatasetSplit(train=[w], test=[w], num_classes=2)


def test_stratified_subsample_counts():
    labels = np.repeat(np.arange(4), [10, 20, 7, 3])
    for f in (0.1, 0.3, 0.5, 0.9):
        idx = stratified_subsample(labels, f, seed=0)
        for k, n_k in enumerate([10, 20, 7, 3]):
            got = int((labels[idx] == k).sum())
            assert got in (int(np.floor(f * n_k)), int(np.ceil(f * n_k)), 1)
        assert set(labels[idx]) == set(range(4))


def test_stratified_subsample_full_fraction_is_identity():
    labels = np.array([2, 0, 1, 1, 0])
    np.testing.assert_array_equal(stratified_subsample(labels, 1.0, seed=9), np.arange(5))


def test_with_label_fraction_keeps_every_class(small_split):
    sub = with_label_fraction(small_split, 0.25, seed=0)
    _, y = sub.labeled_train_arrays()
    assert set(y.tolist()) == set(range(small_split.num_classes))
    assert sub.label_fraction == 0.25


# --- UCI HAR -----------------------------------------------------------------

def test_ingest_ucihar_rows_and_labels(tmp_path, write_ucihar):
    write_ucihar(tmp_path, "train")
    write_ucihar(tmp_path, "test", labels=(3, 4))
    split = ingest_ucihar(tmp_path)
    assert len(split.train) == 2 and len(split.test) == 2
    assert split.channels == 9 and split.window == 128
    assert [w.label for w in split.train] == [0, 5]
    assert [w.label for w in split.test] == [2, 3]


def test_ingest_ucihar_cell_matches_text(tmp_path, write_ucihar):
    write_ucihar(tmp_path, "train")
    write_ucihar(tmp_path, "test")
    split = ingest_ucihar(tmp_path)
    token = (tmp_path / "train" / "Inertial Signals" / "body_acc_y_train.txt").read_text().split("\n")[1].split()[7]
    raw = float(token)
    stats = split.normalizer
    expected = 2 * (raw - stats.minimum[1]) / (stats.maximum[1] - stats.minimum[1]) - 1
    assert split.train[1].values[1, 7] == pytest.approx(expected, abs=1e-12)


def test_ingest_ucihar_recut_windows(tmp_path, write_ucihar):
    write_ucihar(tmp_path, "train")
    write_ucihar(tmp_path, "test")
    split = ingest_ucihar(tmp_path, window=32, stride=32)
    assert len(split.train) == 2 * 4 and split.window == 32


def test_ingest_ucihar_missing_files_lists_layout(tmp_path):
    with pytest.raises(IngestionError, match="Inertial Signals"):
        ingest_ucihar(tmp_path)


# --- dataset cache -----------------------------------------------------------

def test_split_cache_round_trip(tmp_path, small_split):
    path = save_split_cache(tmp_path / "train.bin", small_split.train, num_classes=3, seed=0,
                            normalizer=small_split.normalizer)
    windows, header = load_split_cache(path)
    assert header["n"] == len(small_split.train) and header["num_classes"] == 3
    assert NormalizerStats.from_dict(header["normalizer"]).minimum.tolist() == small_split.normalizer.minimum.tolist()
    np.testing.assert_allclose(np.stack([w.values for w in windows]), small_split.train_arrays()[0], atol=1e-6)
    assert [w.label for w in windows] == [w.label for w in small_split.train]
