"""Shared domain types: processes, paths, speed sequences, deterministic RNG.

Samplers are pure functions of (seed, n): replica r of experiment e draws from
an independent counter-derived stream, so parallel replicas never share state
and reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

__all__ = [
    "RngStream",
    "Path",
    "SpeedSequence",
    "ProcessModel",
    "stream_index_for",
    "partial_sums",
    "normalized_process",
    "max_abs_partial_sum",
]


def stream_index_for(experiment: str, replica: int) -> int:
    """Stable 63-bit stream index for (experiment, replica)."""
    h = hashlib.blake2b(f"{experiment}:{replica}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big") >> 1


@dataclass(frozen=True)
class RngStream:
    """A named substream of a master seed.

    Derivation is a pure function of (master_seed, stream_index); distinct
    indices give statistically independent generators.
    """

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "RngStream":
        # children are substreams of this stream, not of the master directly
        return RngStream(self.master_seed, stream_index_for(str(self.stream_index), index))

    def named(self, experiment: str, replica: int = 0) -> "RngStream":
        return RngStream(self.master_seed, stream_index_for(experiment, replica))


@dataclass(frozen=True)
class Path:
    """A finite trajectory x_1..x_n; immutable after construction."""

    values: np.ndarray
    origin_seed: int
    states: Optional[np.ndarray] = None  # underlying Markov states, if the model has them

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("path must be a nonempty 1-d array")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.states is not None:
            s = np.asarray(self.states)
            s.setflags(write=False)
            object.__setattr__(self, "states", s)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class SpeedSequence:
    """Speed a_n with a_n -> 0 and n*a_n -> infinity.

    Either a power rule a_n = n**(-gamma) with 0 < gamma < 1, or an explicit
    list (caller's responsibility that it is admissible).
    """

    gamma: Optional[float] = None
    explicit: Optional[Sequence[float]] = None

    def __post_init__(self):
        if (self.gamma is None) == (self.explicit is None):
            raise ValueError("exactly one of gamma / explicit must be given")
        if self.gamma is not None and not (0.0 < self.gamma < 1.0):
            raise ValueError("power rule requires 0 < gamma < 1")

    def a(self, n: int) -> float:
        if self.gamma is not None:
            return float(n) ** (-self.gamma)
        return float(self.explicit[n - 1])


@dataclass
class ProcessModel:
    """A sampler of a stationary bounded mean-zero sequence.

    `sampler(n, rng)` returns either a value array of length n or a pair
    (values, states) when the model tracks an underlying Markov state.
    `kernel` (optional) carries exact conditional-expectation machinery;
    see mdplab.transfer for the kernel interface.
    """

    name: str
    bound: float
    sampler: Callable[[int, np.random.Generator], Any]
    kernel: Optional[Any] = None
    meta: dict = field(default_factory=dict)

    def sample(self, n: int, stream: RngStream) -> Path:
        if n < 1:
            raise ValueError("n must be >= 1")
        out = self.sampler(n, stream.generator())
        if isinstance(out, tuple):
            values, states = out
        else:
            values, states = out, None
        values = np.asarray(values, dtype=float)
        if values.size != n:
            raise RuntimeError(f"sampler returned {values.size} values, expected {n}")
        amax = float(np.max(np.abs(values))) if n else 0.0
        if amax > self.bound * (1 + 1e-12):
            raise RuntimeError(
                f"model {self.name}: sampled value {amax} exceeds bound {self.bound}"
            )
        return Path(values=values, origin_seed=stream.master_seed, states=states)

    def sample_batch(self, n: int, replicas: int, stream: RngStream) -> np.ndarray:
        """(replicas, n) array of values; replica r uses substream r."""
        rows = np.empty((replicas, n))
        for r in range(replicas):
            rows[r] = self.sample(n, stream.child(r)).values
        return rows


def partial_sums(path: Path) -> np.ndarray:
    """S_1..S_n."""
    return np.cumsum(path.values)


def normalized_process(path: Path, t: float) -> float:
    """W_n(t) = n^{-1/2} * S_[nt], with W_n(0) = 0."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    n = len(path)
    k = int(np.floor(n * t))
    if k == 0:
        return 0.0
    return float(np.sum(path.values[:k])) / np.sqrt(n)


def max_abs_partial_sum(path: Path) -> float:
    """max_{1<=k<=n} |S_k|."""
    return float(np.max(np.abs(partial_sums(path))))
