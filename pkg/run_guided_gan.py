#!/usr/bin/env python3
"""
Entry point wrapper: puts src/ on the import path and runs the CLI.

    python3 run_guided_gan.py train --framework guided_gan --dataset synth_har --epochs 2
"""

import sys
from pathlib import Path

project_root = Path(__file__).resolve().parent
sys.path.insert(0, str(project_root / "src"))

from guided_gan.main import main  # noqa: E402

if __name__ == "__main__":
    raise SystemExit(main())
