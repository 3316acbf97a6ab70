"""Batch-size-1 latency measurement for decoder callables.

A decoder is timed one sentence at a time on a monotonic clock.  Each run
produces a per-sentence mean; the reported figure is the mean of the run
means with a sample standard deviation over runs.  A few warmup sentences
are decoded untimed first so that one-time setup cost (allocation, caches)
does not land in the first run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class BenchError(ValueError):
    """Invalid benchmark setup."""


@dataclass(frozen=True)
class LatencyStats:
    """Per-sentence wall-clock summary for one system."""

    label: str
    mean_ms: float
    std_ms: float
    runs: int
    n_sentences: int

    def __post_init__(self):
        if self.runs < 1:
            raise BenchError("runs must be at least 1")
        if self.std_ms < 0:
            raise BenchError("std_ms must be non-negative")


def time_decode(
    decoder: Callable[[object], object],
    corpus: Sequence[object],
    *,
    runs: int = 3,
    warmup: int = 3,
    label: str = "system",
) -> LatencyStats:
    """Time ``decoder`` per sentence over ``runs`` passes of the corpus."""
    if not corpus:
        raise BenchError("empty corpus")
    if runs < 1:
        raise BenchError("runs must be at least 1")
    if warmup < 0:
        raise BenchError("warmup must be non-negative")

    n = len(corpus)
    for i in range(warmup):
        decoder(corpus[i % n])

    run_means = np.empty(runs)
    for r in range(runs):
        total = 0.0
        for sentence in corpus:
            start = time.perf_counter()
            decoder(sentence)
            total += time.perf_counter() - start
        run_means[r] = total / n * 1000.0

    std = float(np.std(run_means, ddof=1)) if runs > 1 else 0.0
    return LatencyStats(
        label=label,
        mean_ms=float(np.mean(run_means)),
        std_ms=std,
        runs=runs,
        n_sentences=n,
    )


def speedup(base: LatencyStats, other: LatencyStats) -> float:
    """How many times faster ``other`` is than ``base``."""
    if base.mean_ms <= 0 or other.mean_ms <= 0:
        raise BenchError("speedup needs strictly positive means")
    return base.mean_ms / other.mean_ms


def format_bench_table(stats: Sequence[LatencyStats], base_label: str) -> str:
    """TSV rows: label, mean_ms, std_ms, runs, speedup_vs_base."""
    by_label = {s.label: s for s in stats}
    if base_label not in by_label:
        raise BenchError(f"base label {base_label!r} not among systems")
    base = by_label[base_label]
    lines = ["label\tmean_ms\tstd_ms\truns\tspeedup_vs_base"]
    for s in stats:
        lines.append(
            f"{s.label}\t{s.mean_ms:.3f}\t{s.std_ms:.3f}\t{s.runs}\t{speedup(base, s):.1f}"
        )
    return "\n".join(lines) + "\n"
