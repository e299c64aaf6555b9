# guided_gan/frameworks.py
"""
Trainable frameworks built from the netcore blocks.

    rgan        G + data discriminator
    rfaae       G + E + data discriminator, E regresses z from G(z)
    rbigan      G + E + joint discriminator on (x, E(x)) vs (G(z), z)
    guided_gan  rbigan + lambda_x ||x - G(E(x))||^2 + lambda_z ||z - E(G(z))||^2
    rae_l1/l2   E + G autoencoder
    m2v         variational E + G
    sup         E + linear head trained with labels
    rand        untrained E

Adversarial losses use per-timestep BCE on logits, reduced over time then
averaged over the batch.
"""
from __future__ import annotations

import hashlib
from collections import OrderedDict
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from guided_gan.datapipe import DatasetSplit, SequenceWindow
from guided_gan.exceptions import ShapeError, TrainingDiverged, UnsupportedOperation
from guided_gan.helpers.artifacts import CsvWriter
from guided_gan.helpers.config_loader import FrameworkConfig, config_hash
from guided_gan.helpers.logger import setup_logger
from guided_gan.netcore import (
    JointDiscriminator,
    RecurrentDiscriminator,
    RecurrentEncoder,
    RecurrentGenerator,
    sample_prior,
)

logger = setup_logger("frameworks")

CHECKPOINT_SCHEMA = "guided-gan/checkpoint"
CHECKPOINT_VERSION = 1

LOSS_COLUMNS = ("d_loss", "g_loss", "e_loss", "recon_x", "recon_z", "kl", "ce", "total")
LOSSES_SCHEMA = "guided-gan/losses v1"

DTYPES = {"float32": torch.float32, "float64": torch.float64}


def fork_seed(root_seed: int, purpose: str) -> int:
    """Derive an independent seed for one purpose (init, order, prior, noise, ...) from the run seed."""
    digest = hashlib.sha256(f"{int(root_seed)}:{purpose}".encode("utf-8")).hexdigest()
    return int(digest[:15], 16)


def seeded_generator(root_seed: int, purpose: str) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(fork_seed(root_seed, purpose))
    return g


# ---------------------------------------------------------------------------
# Bundle
# ---------------------------------------------------------------------------

class ModelBundle(nn.Module):
    """
    The blocks one framework uses. Every path (adversarial, reconstruction,
    feature extraction) calls the same ``generator`` / ``encoder`` objects.
    """

    def __init__(self, config: FrameworkConfig, channels: int, seq_len: int,
                 generator: Optional[RecurrentGenerator] = None,
                 encoder: Optional[RecurrentEncoder] = None,
                 discriminator: Optional[nn.Module] = None,
                 classifier: Optional[nn.Linear] = None,
                 num_classes: Optional[int] = None):
        super().__init__()
        self.config = config
        self.framework = config.framework
        self.channels = channels
        self.seq_len = seq_len
        self.num_classes = num_classes
        self.add_module("generator", generator)
        self.add_module("encoder", encoder)
        self.add_module("discriminator", discriminator)
        self.add_module("classifier", classifier)
        self.step = 0
        self.d_steps_taken = 0
        self.ge_steps_taken = 0

    @property
    def dtype(self) -> torch.dtype:
        return DTYPES[self.config.dtype]

    @property
    def device(self) -> torch.device:
        return torch.device(self.config.device)

    def generator_encoder_parameters(self) -> List[nn.Parameter]:
        params: List[nn.Parameter] = []
        for block in (self.generator, self.encoder, self.classifier):
            if block is not None:
                params.extend(block.parameters())
        return params

    def header(self, epoch: int = 0) -> Dict[str, object]:
        return {
            "framework": self.framework,
            "channels": self.channels,
            "seq_len": self.seq_len,
            "latent_dim": self.config.latent_dim,
            "hidden_dim": self.config.hidden_dim,
            "num_classes": self.num_classes,
            "seed": self.config.seed,
            "step": self.step,
            "epoch": epoch,
            "d_steps": self.d_steps_taken,
            "ge_steps": self.ge_steps_taken,
            "config_hash": framework_config_hash(self.config),
        }


def framework_config_hash(config: FrameworkConfig) -> str:
    return config_hash(asdict(config))


def build_bundle(config: FrameworkConfig, channels: int, seq_len: int,
                 num_classes: Optional[int] = None) -> ModelBundle:
    L, H = config.latent_dim, config.hidden_dim
    fw = config.framework
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(fork_seed(config.seed, "init"))
        generator = encoder = discriminator = classifier = None
        if fw in ("rgan", "rfaae", "rbigan", "guided_gan", "rae_l1", "rae_l2", "m2v"):
            generator = RecurrentGenerator(L, channels, H)
        if fw in ("rfaae", "rbigan", "guided_gan", "rae_l1", "rae_l2", "m2v", "sup", "rand"):
            encoder = RecurrentEncoder(channels, L, H, variational=(fw == "m2v"))
        if fw in ("rgan", "rfaae"):
            discriminator = RecurrentDiscriminator(channels, H)
        elif fw in ("rbigan", "guided_gan"):
            discriminator = JointDiscriminator(channels, L, H, projection_dim=H)
        if fw == "sup":
            if not num_classes or num_classes < 2:
                raise ValueError("the sup framework needs num_classes >= 2")
            classifier = nn.Linear(L, num_classes)

    bundle = ModelBundle(config, channels, seq_len, generator, encoder, discriminator, classifier, num_classes)
    return bundle.to(device=config.device, dtype=DTYPES[config.dtype])


def parameter_checksum(module: Optional[nn.Module]) -> str:
    h = hashlib.sha256()
    if module is not None:
        for name, tensor in sorted(module.state_dict().items()):
            h.update(name.encode("utf-8"))
            h.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def _require(bundle: ModelBundle, what: str, *, encoder: bool = False, generator: bool = False) -> None:
    if (encoder and bundle.encoder is None) or (generator and bundle.generator is None):
        needs = " and ".join(n for n, flag in (("an encoder", encoder), ("a generator", generator)) if flag)
        raise UnsupportedOperation(f"{what} needs {needs}; framework {bundle.framework!r} has none")


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

@dataclass
class LossReport:
    d_loss: Optional[torch.Tensor] = None
    g_loss: Optional[torch.Tensor] = None
    e_loss: Optional[torch.Tensor] = None
    recon_x: Optional[torch.Tensor] = None
    recon_z: Optional[torch.Tensor] = None
    kl: Optional[torch.Tensor] = None
    ce: Optional[torch.Tensor] = None
    total: Optional[torch.Tensor] = None  # objective of the G/E (or single-model) update

    def scalars(self) -> Dict[str, float]:
        return {k: float(getattr(self, k).item()) for k in LOSS_COLUMNS if getattr(self, k) is not None}

    def merged(self, other: "LossReport") -> "LossReport":
        return LossReport(**{k: getattr(other, k) if getattr(other, k) is not None else getattr(self, k)
                             for k in LOSS_COLUMNS})

    def check_finite(self, step: int) -> None:
        for k in LOSS_COLUMNS:
            v = getattr(self, k)
            if v is not None and not torch.isfinite(v).all():
                raise TrainingDiverged(f"non-finite {k}", step=step)


def bce_logits(logits: torch.Tensor, target: float, time_reduction: str = "mean") -> torch.Tensor:
    """Per-timestep logit-space BCE, reduced over time (mean or sum), then averaged over the batch."""
    per_step = F.binary_cross_entropy_with_logits(logits, torch.full_like(logits, target), reduction="none")
    per_sample = per_step.mean(dim=1) if time_reduction == "mean" else per_step.sum(dim=1)
    return per_sample.mean()


def squared_error(a: torch.Tensor, b: torch.Tensor, reduction: str = "sum") -> torch.Tensor:
    """||a - b||^2 per sample (summed, or averaged over entries), averaged over the batch."""
    sq = (a - b).pow(2).flatten(1)
    return (sq.sum(dim=1) if reduction == "sum" else sq.mean(dim=1)).mean()


def _generator_adversarial(fake_logits: torch.Tensor, cfg: FrameworkConfig) -> torch.Tensor:
    tr = cfg.disc_time_reduction
    if cfg.generator_loss == "non_saturating":
        return bce_logits(fake_logits, 1.0, tr)
    return -bce_logits(fake_logits, 0.0, tr)


def _phases(phase: str):
    if phase not in ("all", "discriminator", "generator"):
        raise ValueError(f"unknown phase {phase!r}")
    return phase in ("all", "discriminator"), phase in ("all", "generator")


def _data_adversarial(x, z, bundle: ModelBundle, cfg: FrameworkConfig, phase: str):
    do_d, do_g = _phases(phase)
    G, D = bundle.generator, bundle.discriminator
    tr = cfg.disc_time_reduction
    fake = G(z, x.shape[2])
    report = LossReport()
    if do_d:
        report.d_loss = bce_logits(D(x), 1.0, tr) + bce_logits(D(fake.detach()), 0.0, tr)
    if do_g:
        report.g_loss = _generator_adversarial(D(fake), cfg)
        report.total = report.g_loss
    return report, fake


def loss_rgan(x_batch: torch.Tensor, z_batch: torch.Tensor, bundle: ModelBundle,
              config: Optional[FrameworkConfig] = None, *, phase: str = "all") -> LossReport:
    cfg = config or bundle.config
    report, _ = _data_adversarial(x_batch, z_batch, bundle, cfg, phase)
    return report


def loss_rfaae(x_batch: torch.Tensor, z_batch: torch.Tensor, bundle: ModelBundle,
               config: Optional[FrameworkConfig] = None, *, phase: str = "all") -> LossReport:
    cfg = config or bundle.config
    report, fake = _data_adversarial(x_batch, z_batch, bundle, cfg, phase)
    if report.total is None:
        return report
    z_rec = bundle.encoder(fake)
    report.recon_z = squared_error(z_batch, z_rec, "sum")
    report.total = report.g_loss + report.recon_z
    if cfg.faae_encoder_adversarial:
        regenerated = bundle.generator(z_rec, x_batch.shape[2])
        report.e_loss = _generator_adversarial(bundle.discriminator(regenerated), cfg)
        report.total = report.total + report.e_loss
    return report


def _bigan_adversarial(x, z, bundle: ModelBundle, cfg: FrameworkConfig, phase: str):
    do_d, do_g = _phases(phase)
    G, E, D = bundle.generator, bundle.encoder, bundle.discriminator
    tr = cfg.disc_time_reduction
    z_hat = E(x)
    fake = G(z, x.shape[2])
    report = LossReport()
    if do_d:
        report.d_loss = bce_logits(D(x, z_hat.detach()), 1.0, tr) + bce_logits(D(fake.detach(), z), 0.0, tr)
    if do_g:
        real_logits = D(x, z_hat)
        fake_logits = D(fake, z)
        if cfg.generator_loss == "non_saturating":
            report.g_loss = bce_logits(fake_logits, 1.0, tr)
            report.e_loss = bce_logits(real_logits, 0.0, tr)
        else:
            report.g_loss = -bce_logits(fake_logits, 0.0, tr)
            report.e_loss = -bce_logits(real_logits, 1.0, tr)
        report.total = report.g_loss + report.e_loss
    return report, z_hat, fake


def loss_rbigan(x_batch: torch.Tensor, z_batch: torch.Tensor, bundle: ModelBundle,
                config: Optional[FrameworkConfig] = None, *, phase: str = "all") -> LossReport:
    cfg = config or bundle.config
    report, _, _ = _bigan_adversarial(x_batch, z_batch, bundle, cfg, phase)
    return report


def loss_guided(x_batch: torch.Tensor, z_batch: torch.Tensor, bundle: ModelBundle,
                lambda_x: Optional[float] = None, lambda_z: Optional[float] = None,
                config: Optional[FrameworkConfig] = None, *, phase: str = "all") -> LossReport:
    """RBiGAN terms plus weighted data and latent cycle reconstructions through the shared G and E."""
    cfg = config or bundle.config
    lambda_x = cfg.lambda_x if lambda_x is None else lambda_x
    lambda_z = cfg.lambda_z if lambda_z is None else lambda_z
    if lambda_x < 0 or lambda_z < 0:
        raise ValueError(f"lambda_x and lambda_z must be >= 0, got {lambda_x}, {lambda_z}")

    report, z_hat, fake = _bigan_adversarial(x_batch, z_batch, bundle, cfg, phase)
    if report.total is None:
        return report

    x_rec = bundle.generator(z_hat, x_batch.shape[2])
    z_rec = bundle.encoder(fake)
    report.recon_x = squared_error(x_batch, x_rec, cfg.recon_reduction)
    report.recon_z = squared_error(z_batch, z_rec, "sum")
    # zero weights leave the RBiGAN objective untouched
    if lambda_x > 0:
        report.total = report.total + lambda_x * report.recon_x
    if lambda_z > 0:
        report.total = report.total + lambda_z * report.recon_z
    return report


def loss_rae(x_batch: torch.Tensor, bundle: ModelBundle, norm: str = "l2") -> LossReport:
    _require(bundle, "loss_rae", encoder=True, generator=True)
    x_rec = bundle.generator(bundle.encoder(x_batch), x_batch.shape[2])
    diff = (x_batch - x_rec).flatten(1)
    if norm == "l1":
        recon = diff.abs().sum(dim=1).mean()
    elif norm == "l2":
        recon = diff.pow(2).sum(dim=1).mean()
    else:
        raise ValueError(f"norm must be 'l1' or 'l2', got {norm!r}")
    return LossReport(recon_x=recon, total=recon)


def kl_standard_normal(mu: torch.Tensor, log_var: torch.Tensor) -> torch.Tensor:
    """KL(N(mu, sigma^2) || N(0, I)) summed over latent dims, averaged over the batch."""
    return (0.5 * (log_var.exp() + mu.pow(2) - 1.0 - log_var).sum(dim=1)).mean()


def loss_m2v(x_batch: torch.Tensor, bundle: ModelBundle, *, eps: Optional[torch.Tensor] = None,
             generator: Optional[torch.Generator] = None) -> LossReport:
    _require(bundle, "loss_m2v", encoder=True, generator=True)
    if not bundle.encoder.variational:
        raise UnsupportedOperation("loss_m2v needs a variational encoder emitting (mu, log_var)")
    mu, log_var = bundle.encoder.posterior(x_batch)
    if not torch.isfinite(log_var).all():
        raise TrainingDiverged("non-finite log-variance", step=bundle.step)
    if eps is None:
        eps = torch.randn(mu.shape, generator=generator, dtype=mu.dtype).to(mu.device)
    z = mu + torch.exp(0.5 * log_var) * eps
    x_rec = bundle.generator(z, x_batch.shape[2])
    recon = squared_error(x_batch, x_rec, "sum")
    kl = kl_standard_normal(mu, log_var)
    return LossReport(recon_x=recon, kl=kl, total=recon + kl)


def loss_sup(x_batch: torch.Tensor, y_batch: torch.Tensor, bundle: ModelBundle) -> LossReport:
    logits = bundle.classifier(bundle.encoder(x_batch))
    ce = F.cross_entropy(logits, y_batch)
    return LossReport(ce=ce, total=ce)


ADVERSARIAL_LOSSES: Dict[str, Callable[..., LossReport]] = {
    "rgan": loss_rgan,
    "rfaae": loss_rfaae,
    "rbigan": loss_rbigan,
    "guided_gan": loss_guided,
}


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class TrainRecord:
    framework: str
    seed: int
    config_hash: str
    rows: List[Dict[str, float]] = field(default_factory=list)
    epochs: List[Dict[str, float]] = field(default_factory=list)
    checkpoints: List[str] = field(default_factory=list)
    d_steps: int = 0
    ge_steps: int = 0
    wall_time_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "framework": self.framework,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "epochs": self.epochs,
            "checkpoints": self.checkpoints,
            "d_steps": self.d_steps,
            "ge_steps": self.ge_steps,
            "wall_time_s": self.wall_time_s,
        }


EpochCallback = Callable[[int, ModelBundle], None]


def _epoch_means(rows: List[Dict[str, float]], epoch: int) -> Dict[str, float]:
    out: Dict[str, float] = {"epoch": epoch}
    for k in LOSS_COLUMNS:
        vals = [r[k] for r in rows if k in r]
        if vals:
            out[k] = float(np.mean(vals))
    return out


def _training_arrays(config: FrameworkConfig, split: DatasetSplit):
    if config.framework == "sup":
        x, y = split.labeled_train_arrays()
        if (y < 0).any():
            raise ValueError("sup training needs labelled windows")
    else:
        x, y = split.train_arrays()
    if len(x) == 0:
        raise ValueError("training split is empty")
    dtype = DTYPES[config.dtype]
    return (torch.as_tensor(x, dtype=dtype, device=config.device),
            torch.as_tensor(y, dtype=torch.long, device=config.device))


def train(config: FrameworkConfig, split: DatasetSplit, *, run_dir: Optional[Path] = None,
          on_epoch_end: Optional[EpochCallback] = None) -> "tuple[ModelBundle, TrainRecord]":
    """
    Alternating minibatch training. Per batch, adversarial frameworks take
    ``d_steps`` discriminator updates then ``g_steps`` generator/encoder
    updates; other frameworks take one update of their single objective.
    With ``run_dir`` set, per-batch losses stream to losses.csv and
    checkpoints land in run_dir/checkpoints every ``checkpoint_every`` epochs
    and at the end.
    """
    import time

    x_all, y_all = _training_arrays(config, split)
    bundle = build_bundle(config, split.channels, split.window, split.num_classes)
    record = TrainRecord(framework=config.framework, seed=config.seed, config_hash=framework_config_hash(config))
    t0 = time.time()

    writer = None
    if run_dir is not None:
        writer = CsvWriter(Path(run_dir) / "losses.csv", ("epoch", "step") + LOSS_COLUMNS, LOSSES_SCHEMA)
    ckpt_dir = Path(run_dir) / "checkpoints" if run_dir is not None else None

    def checkpoint(epoch: int) -> None:
        if ckpt_dir is None:
            return
        path = save_checkpoint(bundle, ckpt_dir / f"epoch_{epoch:04d}.pt", epoch=epoch)
        record.checkpoints.append(str(path))

    try:
        if config.framework == "rand" or config.epochs == 0:
            logger.info(f"{config.framework}: no optimisation steps; keeping initial parameters")
            checkpoint(0)
            return bundle, record

        betas = (config.beta1, config.beta2)
        opt_ge = torch.optim.Adam(bundle.generator_encoder_parameters(), lr=config.lr, betas=betas)
        opt_d = None
        if config.adversarial:
            opt_d = torch.optim.Adam(bundle.discriminator.parameters(), lr=config.lr, betas=betas)

        order_gen = seeded_generator(config.seed, "order")
        prior_gen = seeded_generator(config.seed, "prior")
        noise_gen = seeded_generator(config.seed, "noise")
        n = len(x_all)

        for epoch in range(1, config.epochs + 1):
            bundle.train()
            perm = torch.randperm(n, generator=order_gen)
            epoch_rows: List[Dict[str, float]] = []
            for start in range(0, n, config.batch_size):
                idx = perm[start:start + config.batch_size].to(x_all.device)
                xb = x_all[idx]
                report = _train_step(bundle, xb, y_all[idx], opt_d, opt_ge, prior_gen, noise_gen)
                bundle.step += 1
                row = {"epoch": epoch, "step": bundle.step, **report.scalars()}
                epoch_rows.append(row)
                record.rows.append(row)
                if writer is not None:
                    writer.write(row)
                logger.debug(f"epoch={epoch} step={bundle.step} {report.scalars()}")

            summary = _epoch_means(epoch_rows, epoch)
            record.epochs.append(summary)
            logger.info("epoch %d/%d %s", epoch, config.epochs,
                        " ".join(f"{k}={v:.4f}" for k, v in summary.items() if k != "epoch"))

            if (config.checkpoint_every and epoch % config.checkpoint_every == 0) or epoch == config.epochs:
                checkpoint(epoch)
            if on_epoch_end is not None:
                on_epoch_end(epoch, bundle)
                bundle.train()
    except TrainingDiverged as e:
        last = record.checkpoints[-1] if record.checkpoints else None
        logger.error(f"training diverged at step {e.step}; last good checkpoint: {last}")
        raise TrainingDiverged(f"{config.framework} diverged", step=e.step, last_checkpoint=last) from e
    finally:
        if writer is not None:
            writer.close()
        record.d_steps = bundle.d_steps_taken
        record.ge_steps = bundle.ge_steps_taken
        record.wall_time_s = round(time.time() - t0, 3)
        bundle.eval()

    return bundle, record


def _train_step(bundle: ModelBundle, xb: torch.Tensor, yb: torch.Tensor, opt_d, opt_ge,
                prior_gen: torch.Generator, noise_gen: torch.Generator) -> LossReport:
    cfg = bundle.config
    fw = cfg.framework
    step = bundle.step + 1

    if fw in ADVERSARIAL_LOSSES:
        loss_fn = ADVERSARIAL_LOSSES[fw]
        z = sample_prior(len(xb), cfg.latent_dim, generator=prior_gen, dtype=bundle.dtype).to(xb.device)

        d_report = LossReport()
        for _ in range(cfg.d_steps):
            d_report = loss_fn(xb, z, bundle, phase="discriminator")
            d_report.check_finite(step)
            opt_d.zero_grad()
            d_report.d_loss.backward()
            opt_d.step()
            bundle.d_steps_taken += 1

        bundle.discriminator.requires_grad_(False)
        try:
            g_report = LossReport()
            for _ in range(cfg.g_steps):
                g_report = loss_fn(xb, z, bundle, phase="generator")
                g_report.check_finite(step)
                opt_ge.zero_grad()
                g_report.total.backward()
                opt_ge.step()
                bundle.ge_steps_taken += 1
        finally:
            bundle.discriminator.requires_grad_(True)
        return d_report.merged(g_report)

    if fw in ("rae_l1", "rae_l2"):
        report = loss_rae(xb, bundle, norm=fw[-2:])
    elif fw == "m2v":
        report = loss_m2v(xb, bundle, generator=noise_gen)
    elif fw == "sup":
        report = loss_sup(xb, yb, bundle)
    else:
        raise UnsupportedOperation(f"framework {fw!r} has no training objective")
    report.check_finite(step)
    opt_ge.zero_grad()
    report.total.backward()
    opt_ge.step()
    bundle.ge_steps_taken += 1
    return report


# ---------------------------------------------------------------------------
# Inference helpers
# ---------------------------------------------------------------------------

def _as_tensor(bundle: ModelBundle, values) -> torch.Tensor:
    t = torch.as_tensor(np.asarray(values) if not torch.is_tensor(values) else values)
    return t.to(device=bundle.device, dtype=bundle.dtype)


@torch.no_grad()
def reconstruct_array(bundle: ModelBundle, values: np.ndarray, batch_size: int = 512) -> np.ndarray:
    _require(bundle, "reconstruct", encoder=True, generator=True)
    bundle.eval()
    out = []
    for start in range(0, len(values), batch_size):
        x = _as_tensor(bundle, values[start:start + batch_size])
        out.append(bundle.generator(bundle.encoder(x), x.shape[2]).cpu().numpy())
    return np.concatenate(out).astype(np.float64) if out else np.zeros_like(values)


def reconstruct(x: Union[SequenceWindow, torch.Tensor, np.ndarray], bundle: ModelBundle):
    """x_rec = G(E(x)) for a window, or for a (batch, D, W) array/tensor."""
    _require(bundle, "reconstruct", encoder=True, generator=True)
    if isinstance(x, SequenceWindow):
        if x.values.shape[0] != bundle.channels:
            raise ShapeError(f"window shape {x.values.shape} does not match the bundle's {bundle.channels} channels")
        return replace(x, values=reconstruct_array(bundle, x.values[None])[0])
    if torch.is_tensor(x):
        return bundle.generator(bundle.encoder(x), x.shape[2])
    return reconstruct_array(bundle, np.asarray(x))


@torch.no_grad()
def generate(bundle: ModelBundle, n: int, seed: int = 0) -> np.ndarray:
    """Decode n prior draws into (n, D, W) windows."""
    _require(bundle, "generate", generator=True)
    bundle.eval()
    z = sample_prior(n, bundle.config.latent_dim, seed=seed, dtype=bundle.dtype).to(bundle.device)
    return bundle.generator(z, bundle.seq_len).cpu().numpy().astype(np.float64)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(bundle: ModelBundle, path: Union[str, Path], epoch: int = 0) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema": CHECKPOINT_SCHEMA,
        "version": CHECKPOINT_VERSION,
        "header": bundle.header(epoch),
        "config": asdict(bundle.config),
        "tensors": OrderedDict(
            (name, tensor.detach().cpu().clone()) for name, tensor in bundle.state_dict().items()
        ),
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path: Union[str, Path], *, device: Optional[str] = None) -> ModelBundle:
    path = Path(path)
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("schema") != CHECKPOINT_SCHEMA:
        raise ValueError(f"{path} is not a guided-gan checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    cfg_dict = dict(payload["config"])
    if device is not None:
        cfg_dict["device"] = device
    config = FrameworkConfig(**cfg_dict)
    header = payload["header"]
    bundle = build_bundle(config, header["channels"], header["seq_len"], header["num_classes"])
    bundle.load_state_dict(payload["tensors"])
    bundle.step = header["step"]
    bundle.d_steps_taken = header.get("d_steps", 0)
    bundle.ge_steps_taken = header.get("ge_steps", 0)
    bundle.eval()
    return bundle
