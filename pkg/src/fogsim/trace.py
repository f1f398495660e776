"""PlanetLab-style CPU utilisation traces: parsing, replay and synthesis."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PLANETLAB_INTERVAL_S = 300.0


class TraceError(ValueError):
    pass


class MalformedLine(TraceError):
    def __init__(self, line_no: int, text: str = ""):
        super().__init__(f"line {line_no}: expected an integer percent in [0, 100], got {text!r}")
        self.line_no = line_no


class EmptyTrace(TraceError):
    pass


class EmptyTraceSet(TraceError):
    pass


class InvalidParameter(TraceError):
    pass


@dataclass(frozen=True, eq=False)
class UtilizationTrace:
    trace_id: int
    samples: np.ndarray
    sample_interval_s: float = PLANETLAB_INTERVAL_S

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise EmptyTrace(f"trace {self.trace_id} has no samples")
        if np.any(s < 0) or np.any(s > 1) or not np.all(np.isfinite(s)):
            raise InvalidParameter("samples must lie in [0, 1]")
        if not self.sample_interval_s > 0:
            raise InvalidParameter("sample interval must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def period_s(self) -> float:
        return self.samples.size * self.sample_interval_s

    def __repr__(self) -> str:
        return (f"UtilizationTrace(trace_id={self.trace_id}, n={len(self)}, "
                f"mean={self.samples.mean():.3f}, interval={self.sample_interval_s:g})")


def parse_trace(text: str, trace_id: int = 0, interval_s: float = PLANETLAB_INTERVAL_S) -> UtilizationTrace:
    """Parse one integer percentage per line; blank lines are skipped."""
    samples = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            value = int(line)
        except ValueError:
            raise MalformedLine(line_no, line) from None
        if not 0 <= value <= 100:
            raise MalformedLine(line_no, line)
        samples.append(value / 100.0)
    if not samples:
        raise EmptyTrace(f"trace {trace_id} has no samples")
    return UtilizationTrace(trace_id, np.array(samples), interval_s)


def serialize_trace(trace: UtilizationTrace) -> str:
    return "".join(f"{int(round(s * 100))}\n" for s in trace.samples)


def load_trace_dir(path: str | os.PathLike, interval_s: float = PLANETLAB_INTERVAL_S) -> list[UtilizationTrace]:
    """Load every regular file in ``path`` (sorted by name) as one trace."""
    files = sorted(p for p in Path(path).iterdir() if p.is_file() and not p.name.startswith("."))
    traces = [parse_trace(p.read_text(encoding="utf-8"), i, interval_s) for i, p in enumerate(files)]
    if not traces:
        raise EmptyTraceSet(f"no trace files in {path}")
    return traces


def sample_utilization(trace: UtilizationTrace, t_s: float) -> float:
    """Zero-order hold with wraparound once the trace is exhausted."""
    k = math.floor(t_s / trace.sample_interval_s)
    return float(trace.samples[k % trace.samples.size])


def assign_traces(device_ids: Sequence[int], traces: Sequence[UtilizationTrace],
                  seed: int | np.random.Generator) -> dict[int, int]:
    """Pick a trace uniformly at random for every device."""
    if len(traces) == 0:
        raise EmptyTraceSet("cannot assign from an empty trace set")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    picks = rng.integers(0, len(traces), size=len(device_ids))
    return {int(d): traces[int(k)].trace_id for d, k in zip(device_ids, picks)}


def synth_trace(seed: int | np.random.Generator, length: int, mean: float, jitter: float,
                trace_id: int = 0, interval_s: float = PLANETLAB_INTERVAL_S) -> UtilizationTrace:
    """Stand-in for a PlanetLab trace: clamp(mean + U(-jitter, jitter), 0, 1)."""
    if length < 1:
        raise InvalidParameter("length must be >= 1")
    if not 0.0 <= mean <= 1.0:
        raise InvalidParameter("mean must be in [0, 1]")
    if jitter < 0:
        raise InvalidParameter("jitter must be >= 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    noise = rng.uniform(-jitter, jitter, size=length) if jitter > 0 else np.zeros(length)
    return UtilizationTrace(trace_id, np.clip(mean + noise, 0.0, 1.0), interval_s)


def synth_trace_set(seed: int | np.random.Generator, count: int, length: int, mean_min: float,
                    mean_max: float, jitter: float) -> list[UtilizationTrace]:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    means = rng.uniform(mean_min, mean_max, size=count)
    return [synth_trace(rng, length, float(m), jitter, trace_id=i) for i, m in enumerate(means)]


def as_flat(traces: Iterable[UtilizationTrace]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Concatenate traces into (samples, offsets, lengths) for vectorised lookup."""
    traces = list(traces)
    lengths = np.array([len(t) for t in traces], dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(lengths)[:-1])).astype(np.int64)
    return np.concatenate([t.samples for t in traces]), offsets, lengths
