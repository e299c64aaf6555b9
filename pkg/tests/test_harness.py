import json

import numpy as np
import pytest
import yaml

from guided_gan import main as cli
from guided_gan.datapipe import load_split_cache
from guided_gan.exceptions import TrainingDiverged
from guided_gan.helpers.artifacts import RunManifest, read_csv

TINY = {
    "dataset": "synth_har",
    "window": 6,
    "synth_classes": 3,
    "synth_channels": 2,
    "synth_per_class": 12,
    "synth_noise": 0.05,
    "framework": "guided_gan",
    "seed": 3,
    "epochs": 2,
    "batch_size": 8,
    "latent_dim": 4,
    "hidden_dim": 5,
    "dtype": "float64",
    "checkpoint_every": 1,
    "probe_epochs": 20,
    "probe_batch_size": 16,
    "probe_runs": 2,
}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY))
    return str(path)


@pytest.fixture
def run_train(config_file, tmp_path):
    def run(name="run", *extra):
        out = tmp_path / name
        code = cli.main(["train", "--config", config_file, "--out", str(out), *extra])
        return code, out
    return run


def _status(run_dir):
    return RunManifest.load(run_dir).data["status"]


def test_train_writes_manifest_and_checkpoints(run_train):
    code, out = run_train()
    assert code == cli.EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "completed"
    assert manifest["command"] == "train"
    assert manifest["config"]["framework"] == "guided_gan"
    for name in ("config", "losses", "training", "loss_curves", "log", "checkpoint_epoch_0002"):
        assert (out / manifest["artifacts"][name]).exists(), name
    assert sorted(p.name for p in (out / "checkpoints").iterdir()) == ["epoch_0001.pt", "epoch_0002.pt"]
    training = json.loads((out / "training.json").read_text())
    assert training["d_steps"] == training["ge_steps"] == 2 * 4


def test_equal_seeds_give_identical_losses(run_train):
    _, a = run_train("a")
    _, b = run_train("b")
    assert (a / "losses.csv").read_bytes() == (b / "losses.csv").read_bytes()


def test_negative_lambda_is_a_usage_error(config_file, tmp_path):
    with pytest.raises(SystemExit) as err:
        cli.main(["train", "--config", config_file, "--out", str(tmp_path / "x"), "--lambda-x", "-1"])
    assert err.value.code == 2
    assert not (tmp_path / "x").exists()


def test_unknown_config_key_is_a_usage_error(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump({**TINY, "learning_rate": 0.1}))
    assert cli.main(["train", "--config", str(path), "--out", str(tmp_path / "x")]) == cli.EXIT_USAGE


def test_missing_dataset_root_fails_before_compute(config_file, tmp_path):
    code = cli.main(["train", "--config", config_file, "--dataset", "ucihar", "--root", str(tmp_path / "nope"),
                     "--out", str(tmp_path / "x")])
    assert code == cli.EXIT_USAGE
    assert not (tmp_path / "x").exists()


def test_output_collision_needs_force(run_train):
    run_train()
    code, out = run_train()
    assert code == cli.EXIT_USAGE
    assert _status(out) == "completed"
    code, out = run_train("run", "--force")
    assert code == cli.EXIT_OK


def test_probe_writes_result(run_train):
    _, out = run_train()
    assert cli.main(["probe", str(out)]) == cli.EXIT_OK
    result = json.loads((out / "probe.json").read_text())
    assert result["framework"] == "guided_gan"
    assert result["trainable_params"] == 4 * 3 + 3
    assert 0.0 <= result["accuracy"] <= 1.0
    assert (out / "confusion.png").exists()
    # a second probe would overwrite probe.json
    assert cli.main(["probe", str(out)]) == cli.EXIT_USAGE
    assert cli.main(["probe", str(out), "--force"]) == cli.EXIT_OK


def test_rand_probe_reports_trainable_ratio(run_train):
    _, out = run_train("rand", "--framework", "rand")
    assert cli.main(["probe", str(out)]) == cli.EXIT_OK
    result = json.loads((out / "probe.json").read_text())
    assert 0.0 < result["trainable_ratio"] < 1.0
    assert result["trainable_ratio"] == pytest.approx(
        result["trainable_params"] / (result["trainable_params"] + result["frozen_params"]))


def test_probe_sweep_rows(run_train):
    _, out = run_train()
    assert cli.main(["probe", str(out), "--fractions", "0.1,1.0", "--runs", "5"]) == cli.EXIT_OK
    rows = read_csv(out / "sweep.csv")
    assert len(rows) == 10
    assert sorted({r["fraction"] for r in rows}) == ["0.1", "1.0"]


def test_probe_extras(run_train):
    _, out = run_train()
    assert cli.main(["probe", str(out), "--faithfulness", "--export-embeddings"]) == cli.EXIT_OK
    faith = json.loads((out / "faithfulness.json").read_text())
    assert len(faith["rows"]) == 4
    assert len((out / "embeddings.txt").read_text().splitlines()) == 1 + 11


def test_rgan_probe_needs_discriminator_features(run_train):
    _, out = run_train("rgan", "--framework", "rgan")
    assert cli.main(["probe", str(out)]) == cli.EXIT_USAGE
    assert _status(out) == "failed"
    assert cli.main(["probe", str(out), "--features", "discriminator", "--force"]) == cli.EXIT_OK
    assert json.loads((out / "probe.json").read_text())["feature_source"] == "discriminator"


def test_probe_framework_mismatch(run_train):
    _, out = run_train()
    assert cli.main(["probe", str(out), "--framework", "rbigan"]) == cli.EXIT_USAGE


def test_generate_samples_and_reconstructions(run_train):
    _, out = run_train()
    assert cli.main(["generate", str(out), "-n", "16", "--reconstruct", "4"]) == cli.EXIT_OK
    windows, header = load_split_cache(out / "generated" / "samples.bin")
    assert len(windows) == 16 and header["channels"] == 2 and header["window"] == 6
    assert all(np.all(np.abs(w.values) < 1.0) for w in windows)
    recon, _ = load_split_cache(out / "generated" / "reconstructions.bin")
    assert len(recon) == 4
    assert (out / "generated" / "samples.png").exists()
    assert (out / "generated" / "reconstructions.png").exists()


def test_generate_unsupported_for_rand(run_train):
    _, out = run_train("rand", "--framework", "rand")
    assert cli.main(["generate", str(out)]) == cli.EXIT_USAGE


def test_report_marks_missing_probe(run_train, tmp_path):
    _, probed = run_train("probed")
    _, bare = run_train("bare", "--framework", "rae_l2")
    assert cli.main(["probe", str(probed)]) == cli.EXIT_OK
    report = tmp_path / "report"
    assert cli.main(["report", str(probed), str(bare), "--out", str(report)]) == cli.EXIT_OK
    rows = {r["run"]: r for r in read_csv(report / "comparison.csv")}
    assert rows["bare"]["accuracy"] == "n/a"
    assert rows["bare"]["framework"] == "rae_l2"
    assert rows["probed"]["accuracy"] != "n/a"
    assert "n/a" in (report / "comparison.txt").read_text()
    assert _status(report) == "completed"


def test_empty_report_is_a_usage_error():
    assert cli.main(["report"]) == cli.EXIT_USAGE


def test_ablation_command(config_file, tmp_path):
    out = tmp_path / "ablation"
    assert cli.main(["ablation", "--config", config_file, "--out", str(out), "--eval-every", "1"]) == cli.EXIT_OK
    rows = read_csv(out / "ablation.csv")
    assert [r["arm"] for r in rows] == ["guided_gan", "guided_gan", "rbigan", "rbigan"]
    assert json.loads((out / "ablation.json").read_text())["schema"] == "guided-gan/ablation"


def test_probe_every_writes_curve(run_train):
    code, out = run_train("curve", "--probe-every", "1")
    assert code == cli.EXIT_OK
    assert [r["epoch"] for r in read_csv(out / "probe_curve.csv")] == ["1", "2"]


def test_divergence_exits_one(run_train, monkeypatch):
    def diverge(*_, **__):
        raise TrainingDiverged("guided_gan diverged", step=3, last_checkpoint=None)

    monkeypatch.setattr(cli, "train", diverge)
    code, out = run_train()
    assert code == cli.EXIT_FAILURE
    manifest = RunManifest.load(out).data
    assert manifest["status"] == "failed"
    assert "step 3" in manifest["error"]


def test_interrupt_exits_130(run_train, monkeypatch):
    def interrupt(*_, **__):
        raise KeyboardInterrupt

    monkeypatch.setattr(cli, "train", interrupt)
    code, out = run_train()
    assert code == cli.EXIT_INTERRUPTED
    assert _status(out) == "interrupted"


def test_checkpoints_are_byte_identical_per_seed(run_train):
    _, a = run_train("a")
    _, b = run_train("b")
    for name in ("epoch_0001.pt", "epoch_0002.pt"):
        assert (a / "checkpoints" / name).read_bytes() == (b / "checkpoints" / name).read_bytes()


def test_ucihar_smoke_run(tmp_path, write_ucihar):
    uci = tmp_path / "uci"
    write_ucihar(uci, "train", rows=6, labels=(1, 2, 3, 4, 5, 6))
    write_ucihar(uci, "test", rows=4, labels=(1, 2, 3, 4))
    path = tmp_path / "uci.yaml"
    path.write_text(yaml.safe_dump({**TINY, "dataset": "ucihar", "root": str(uci), "window": 32, "stride": 32}))
    out = tmp_path / "uci_run"
    assert cli.main(["train", "--config", str(path), "--out", str(out), "--epochs", "1"]) == cli.EXIT_OK
    rows = read_csv(out / "losses.csv")
    assert len(rows) == 3  # 24 windows at batch 8
    assert all(np.isfinite(float(r[k])) for r in rows for k in ("d_loss", "g_loss", "e_loss", "total"))
