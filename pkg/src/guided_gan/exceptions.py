# guided_gan/exceptions.py
from __future__ import annotations

from typing import Optional


class GuidedGanError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(GuidedGanError, ValueError):
    pass


class ShapeError(GuidedGanError, ValueError):
    pass


class UpsamplingNotSupported(GuidedGanError, ValueError):
    pass


class DegenerateChannelError(GuidedGanError, ValueError):
    def __init__(self, channel: str):
        super().__init__(f"Channel {channel!r} is constant on the training data; cannot normalise")
        self.channel = channel


class IngestionError(GuidedGanError, OSError):
    pass


class TrainingDiverged(GuidedGanError, RuntimeError):
    def __init__(self, message: str, *, step: int, last_checkpoint: Optional[str] = None):
        super().__init__(f"{message} (step={step}, last_checkpoint={last_checkpoint})")
        self.step = step
        self.last_checkpoint = last_checkpoint


class UnsupportedOperation(GuidedGanError, TypeError):
    pass


class DegenerateProbeError(GuidedGanError, ValueError):
    pass


class UndefinedMetricsError(GuidedGanError, ValueError):
    pass


class ArtifactExistsError(GuidedGanError, FileExistsError):
    pass
