"""Sample-parallel execution and the Monte Carlo record type.

Samples are keyed by (master seed, sample index), so splitting the index range
into fixed chunks and concatenating per-sample results in index order gives
identical output for any number of workers.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Z95 = 1.959963984540054
CSV_COLUMNS = ("event", "d", "s", "L", "N", "p", "q", "mean", "stderr", "n", "seed")


def run_samples(fn: Callable[[int, int], np.ndarray], n_samples: int, workers: int = 1,
                chunk: int = 1024) -> np.ndarray:
    """Evaluate ``fn(start, stop)`` over fixed chunks and stitch results in order."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    bounds = [(a, min(a + chunk, n_samples)) for a in range(0, n_samples, chunk)]
    if workers <= 1 or len(bounds) == 1:
        parts = [fn(a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: fn(*ab), bounds))
    return np.concatenate(parts)


@dataclass
class EstimateRecord:
    event: str
    mean: float
    stderr: float
    n: int
    seed: int
    ci: tuple
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, values, seed: int, event: str, meta: dict | None = None,
                    indicator: bool | None = None) -> "EstimateRecord":
        x = np.asarray(values, dtype=float)
        n = int(x.shape[0])
        if indicator is None:
            indicator = bool(np.all((x == 0.0) | (x == 1.0)))
        mean = float(x.mean())
        if indicator:
            se = math.sqrt(max(mean * (1.0 - mean), 0.0) / n)
            lo, hi = max(0.0, mean - Z95 * se), min(1.0, mean + Z95 * se)
        else:
            se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
            lo, hi = mean - Z95 * se, mean + Z95 * se
        meta = dict(meta or {})
        meta["indicator"] = indicator
        return cls(event, mean, se, n, int(seed), (lo, hi), meta)

    def row(self) -> dict:
        spec = self.meta.get("spec", {})
        params = self.meta.get("params", {})
        return {"event": self.event, "d": spec.get("d", ""), "s": spec.get("s", ""),
                "L": spec.get("L", ""), "N": spec.get("N", ""),
                "p": params.get("p", ""), "q": params.get("q", ""),
                "mean": self.mean, "stderr": self.stderr, "n": self.n, "seed": self.seed}

    def to_dict(self) -> dict:
        return {"event": self.event, "mean": self.mean, "stderr": self.stderr, "n": self.n,
                "seed": self.seed, "ci": list(self.ci), "meta": self.meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)
