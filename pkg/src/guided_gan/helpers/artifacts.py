"""
Run directory bookkeeping: the manifest, atomic JSON writes and versioned CSVs.

Every file a command leaves in a run directory is registered in that
directory's manifest.json under a unique artifact name.
"""
import csv
import hashlib
import json
import os
import shutil
import subprocess
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from guided_gan.exceptions import ArtifactExistsError
from guided_gan.helpers.logger import setup_logger

logger = setup_logger("artifacts")

MANIFEST_NAME = "manifest.json"
MANIFEST_SCHEMA = "guided-gan/manifest"
MANIFEST_VERSION = 1


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_json_atomic(path: Path, data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)
    return path


def read_json(path: Path) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class CsvWriter:
    """Append-only CSV with a ``# schema: ...`` comment line ahead of the header."""

    def __init__(self, path: Path, columns: Sequence[str], schema: str):
        self.path = Path(path)
        self.columns = list(columns)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8", newline="")
        self._fh.write(f"# schema: {schema}\n")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(self.columns)

    def write(self, row: Dict[str, Any]) -> None:
        self._writer.writerow([_cell(row.get(c)) for c in self.columns])
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Dict[str, Any]], schema: str) -> Path:
    with CsvWriter(path, columns, schema) as w:
        for row in rows:
            w.write(row)
    return Path(path)


def read_csv(path: Path) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def source_revision(root: Optional[Path] = None) -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            cwd=str(root) if root else None,
            capture_output=True, text=True, timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"


def dataset_fingerprint(split) -> str:
    """SHA-256 over the split's name, labels and float32 window values."""
    h = hashlib.sha256(str(split.name).encode("utf-8"))
    for part in (split.train_arrays(), split.test_arrays()):
        x, y = part
        h.update(y.astype("<i8").tobytes())
        h.update(x.astype("<f4").tobytes())
    return h.hexdigest()


def prepare_run_dir(run_dir: Path, force: bool = False) -> Path:
    """
    Create an empty run directory. An existing non-empty one is refused
    unless ``force`` is set and it holds a manifest from an earlier run.
    """
    run_dir = Path(run_dir)
    if run_dir.exists() and any(run_dir.iterdir()):
        if not force:
            raise ArtifactExistsError(f"{run_dir} already exists and is not empty (use --force to replace it)")
        if not (run_dir / MANIFEST_NAME).exists():
            raise ArtifactExistsError(f"{run_dir} is not a run directory; refusing to clear it even with --force")
        logger.warning(f"--force: clearing previous run in {run_dir}")
        shutil.rmtree(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


class RunManifest:
    """
    manifest.json of one run directory. Created before any compute, updated
    as artifacts appear and finalized with a status on every exit path.
    Later commands on the same directory (probe, generate) append events.
    """

    def __init__(self, run_dir: Path, data: Dict[str, Any]):
        self.run_dir = Path(run_dir)
        self.data = data

    @property
    def path(self) -> Path:
        return self.run_dir / MANIFEST_NAME

    @property
    def artifacts(self) -> Dict[str, str]:
        return self.data["artifacts"]

    @classmethod
    def create(cls, run_dir: Path, command: str, snapshot: Dict[str, Any], config_hash: str,
               seeds: Dict[str, int], dataset_fp: Optional[str] = None) -> "RunManifest":
        manifest = cls(run_dir, {
            "schema": MANIFEST_SCHEMA,
            "version": MANIFEST_VERSION,
            "run_id": f"{datetime.now(timezone.utc):%Y%m%dT%H%M%S}-{uuid.uuid4().hex[:8]}",
            "command": command,
            "status": "running",
            "config": snapshot,
            "config_hash": config_hash,
            "source_revision": source_revision(Path(__file__).resolve().parent),
            "dataset_fingerprint": dataset_fp,
            "seeds": seeds,
            "started_at": utc_now(),
            "finished_at": None,
            "error": None,
            "timings": {},
            "artifacts": {},
            "events": [],
        })
        manifest.begin(command)
        return manifest

    @classmethod
    def load(cls, run_dir: Path) -> "RunManifest":
        path = Path(run_dir) / MANIFEST_NAME
        if not path.exists():
            raise FileNotFoundError(f"{run_dir} has no {MANIFEST_NAME}")
        data = read_json(path)
        if data.get("schema") != MANIFEST_SCHEMA:
            raise ValueError(f"{path} is not a guided-gan manifest")
        return cls(run_dir, data)

    def save(self) -> None:
        write_json_atomic(self.path, self.data)

    def begin(self, command: str) -> None:
        self.data["events"].append({"command": command, "status": "running", "started_at": utc_now(),
                                    "finished_at": None, "error": None})
        self.save()

    def artifact_path(self, name: str, relpath: str, *, force: bool = False) -> Path:
        """
        Reserve ``relpath`` inside the run directory under ``name``. A file
        already on disk is refused unless ``force`` is set.
        """
        path = self.run_dir / relpath
        if path.exists() and not force:
            raise ArtifactExistsError(f"{path} already exists (use --force to overwrite)")
        owner = next((k for k, v in self.artifacts.items() if v == relpath and k != name), None)
        if owner is not None:
            raise ArtifactExistsError(f"{relpath} is already registered as {owner!r}")
        path.parent.mkdir(parents=True, exist_ok=True)
        self.artifacts[name] = relpath
        self.save()
        return path

    def register(self, name: str, path: Path) -> None:
        """Record a file some other component has already written."""
        rel = Path(path).resolve().relative_to(self.run_dir.resolve()).as_posix()
        self.artifacts[name] = rel
        self.save()

    def record_timings(self, timings: Dict[str, float]) -> None:
        self.data["timings"].update({k: round(v, 3) for k, v in timings.items()})
        self.save()

    def finalize(self, status: str, error: Optional[str] = None) -> None:
        # drop registrations whose file never materialised
        for name in [k for k, v in self.artifacts.items() if not (self.run_dir / v).exists()]:
            del self.artifacts[name]
        now = utc_now()
        event = self.data["events"][-1]
        event.update(status=status, finished_at=now, error=error)
        self.data.update(status=status, finished_at=now, error=error)
        self.save()
