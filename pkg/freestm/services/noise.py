"""
Free Brownian motion increments.

An increment on a grid of step h is sqrt(h/(2N)) * (G + G^T) with G an N x N
matrix of independent standard normals. Off-diagonal entries have variance h/N,
diagonal entries 2h/N, so E[tr_N(dW^2)] = h(1 + 1/N) at finite N.

Random streams are numpy Philox generators keyed by (seed, path_id): the
sub-stream of a path is a pure function of that pair, so paths can be built in
any order or on any worker and come out bitwise identical. Normals come from
Generator.standard_normal (ziggurat). Changing either choice changes every
result file, so both are fixed for schema version 1.

A NoisePath stores only its header. Increments are regenerated from the stream
on every iteration and never held in memory all at once.
"""
import json
from dataclasses import dataclass, field
from math import prod
from pathlib import Path
from typing import IO, Iterator, Tuple, Union

import numpy as np

from freestm.exceptions import ConfigError
from freestm.services.linalg import SymMatrix

MAX_UINT64 = 2**64 - 1


def _check_key(seed: int, path_id: int) -> None:
    if not 0 <= seed <= MAX_UINT64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if not 0 <= path_id <= MAX_UINT64:
        raise ConfigError(f"path_id must be a non-negative 64-bit integer, got {path_id}")


class RandomStream:
    """Counter-based stream for one path. Not to be shared between workers."""

    def __init__(self, seed: int, path_id: int = 0):
        _check_key(seed, path_id)
        self.seed = seed
        self.path_id = path_id
        key = np.array([seed, path_id], dtype=np.uint64)
        self._generator = np.random.Generator(np.random.Philox(key=key))

    def standard_normal(self, shape: Tuple[int, ...]) -> np.ndarray:
        return self._generator.standard_normal(shape)


def sample_increment(dim: int, h: float, stream: RandomStream) -> SymMatrix:
    if dim < 1:
        raise ConfigError(f"matrix dimension must be >= 1, got {dim}")
    if not h > 0:
        raise ConfigError(f"step size must be positive, got {h}")
    g = stream.standard_normal((dim, dim))
    return SymMatrix(np.sqrt(h / (2.0 * dim)) * (g + g.T))


@dataclass(frozen=True)
class NoisePath:
    """
    Header of one noise path. `base_step_size` and `base_steps` describe the
    generated fine grid; `coarsening` lists the block factors applied on top.
    """

    dim: int
    base_step_size: float
    base_steps: int
    seed: int
    path_id: int = 0
    coarsening: Tuple[int, ...] = field(default_factory=tuple)

    @property
    def step_size(self) -> float:
        return self.base_step_size * prod(self.coarsening)

    @property
    def steps(self) -> int:
        return self.base_steps // prod(self.coarsening)

    def increments(self) -> Iterator[SymMatrix]:
        """Regenerate the increments from the start of the stream."""
        stream = RandomStream(self.seed, self.path_id)
        source: Iterator[SymMatrix] = (
            sample_increment(self.dim, self.base_step_size, stream) for _ in range(self.base_steps)
        )
        for factor in self.coarsening:
            source = _block_sums(source, factor)
        return source

    def __iter__(self) -> Iterator[SymMatrix]:
        return self.increments()

    def __len__(self) -> int:
        return self.steps

    def header(self) -> dict:
        return {
            "seed": self.seed,
            "path_id": self.path_id,
            "N": self.dim,
            "P": self.base_steps,
            "h": self.base_step_size,
            "coarsening": list(self.coarsening),
        }

    @classmethod
    def from_header(cls, header: dict) -> "NoisePath":
        return cls(
            dim=int(header["N"]),
            base_step_size=float(header["h"]),
            base_steps=int(header["P"]),
            seed=int(header["seed"]),
            path_id=int(header["path_id"]),
            coarsening=tuple(int(r) for r in header.get("coarsening", [])),
        )


def _block_sums(source: Iterator[SymMatrix], factor: int) -> Iterator[SymMatrix]:
    # Left-to-right summation inside each half-open block of `factor` increments.
    while True:
        acc = None
        for _ in range(factor):
            try:
                increment = next(source)
            except StopIteration:
                return
            acc = increment.entries.copy() if acc is None else acc + increment.entries
        yield SymMatrix(acc)


def generate_path(dim: int, steps: int, h: float, seed: int, path_id: int = 0) -> NoisePath:
    if steps < 1:
        raise ConfigError(f"a noise path needs at least one step, got P={steps}")
    if dim < 1:
        raise ConfigError(f"matrix dimension must be >= 1, got {dim}")
    if not h > 0:
        raise ConfigError(f"step size must be positive, got {h}")
    _check_key(seed, path_id)
    return NoisePath(dim=dim, base_step_size=float(h), base_steps=steps, seed=seed, path_id=path_id)


def coarsen(path: NoisePath, factor: int) -> NoisePath:
    """Sum consecutive blocks of `factor` increments; the step size grows by `factor`."""
    if factor < 1 or path.steps % factor != 0:
        raise ConfigError(
            f"refinement factor R={factor} must be a positive divisor of P={path.steps}"
        )
    if factor == 1:
        return path
    return NoisePath(
        dim=path.dim,
        base_step_size=path.base_step_size,
        base_steps=path.base_steps,
        seed=path.seed,
        path_id=path.path_id,
        coarsening=path.coarsening + (factor,),
    )


def dump_path_header(path: NoisePath, target: Union[str, Path, IO[str]]) -> None:
    text = json.dumps(path.header(), sort_keys=True)
    if hasattr(target, "write"):
        target.write(text)
    else:
        Path(target).write_text(text, encoding="utf-8")


def load_path_header(source: Union[str, Path, IO[str]]) -> NoisePath:
    text = source.read() if hasattr(source, "read") else Path(source).read_text(encoding="utf-8")
    return NoisePath.from_header(json.loads(text))
