import logging
import sys
import time

import numpy as np

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def rel_err(value: float, reference: float) -> float:
    """Signed relative error ``(value - reference) / max(1, |reference|)``."""
    return (value - reference) / max(1.0, abs(reference))


def unit(vector: np.ndarray) -> np.ndarray:
    return vector / np.linalg.norm(vector)


class Stopwatch:
    """Accumulates wall-clock time over one or more ``with`` blocks."""

    def __init__(self):
        self.elapsed = 0.0
        self._start: float | None = None

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.elapsed += time.perf_counter() - self._start
        self._start = None


def configure_logging(verbosity: int = 0, stream=None):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)

    handler = logging.StreamHandler(sys.stderr if stream is None else stream)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))

    root = logging.getLogger("spg_scls")
    root.handlers[:] = [handler]
    root.setLevel(level)
