# helpers/run_context.py
import time
from contextlib import contextmanager
from typing import Dict

from guided_gan.helpers.logger import set_log_context


class RunContext:
    """
    Wraps pipeline phases in START / END log lines with the phase name as the
    log context step.

    ``timings`` maps step name to wall seconds (rounded to ms). A name used
    twice accumulates, so a retried phase reports its total. The harness copies
    the dict into the run manifest when the command finishes, whatever the
    outcome; a step that raised is still timed.
    """

    def __init__(self):
        self.timings: Dict[str, float] = {}

    @contextmanager
    def step(self, logger, step_name: str, **meta):
        set_log_context(step=step_name)
        t0 = time.time()

        meta_str = f" {meta}" if meta else ""
        logger.info(f"▶ START{meta_str}")

        try:
            yield
        except Exception:
            logger.exception("✖ ERROR")
            raise
        finally:
            took = time.time() - t0
            self.timings[step_name] = round(self.timings.get(step_name, 0.0) + took, 3)
            logger.info(f"■ END took={took:.2f}s")
            set_log_context(step="-")
