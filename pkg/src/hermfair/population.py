"""Seeded synthetic populations: Beta-distributed uptake, power-law clicks.

Click probabilities follow ``p = u ** (1/k)`` with ``u ~ Uniform(0, 1)`` and a
group coefficient ``k`` (mean ``k / (1 + k)``, about 0.048 for the default
``k = 0.05``), a heavy mass near zero consistent with click-through rates.
This is one reading of a "power law with coefficient k"; alternatives can be
added behind :class:`ClickConfig`.

Sampling is deterministic given the seed carried by the population spec.
The generator is numpy's
PCG64 (:data:`RNG_STREAM`); record the numpy version alongside seeds when
archiving results, since distribution algorithms are pinned per release.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import Population

__all__ = [
    "RNG_STREAM",
    "UptakeConfig",
    "ClickConfig",
    "PopulationSpec",
    "beta_sample",
    "sample_population",
    "subseed",
    "population_to_csv",
    "population_from_csv",
]

RNG_STREAM = "numpy-pcg64"

POPULATION_CSV_HEADER = ("group", "p", "rho")


def _check_shape(name: str, value: float) -> float:
    value = float(value)
    if not (math.isfinite(value) and value > 0.0):
        raise ValueError(f"{name} must be a positive finite shape, got {value!r}")
    return value


@dataclass(frozen=True)
class UptakeConfig:
    """Beta shape pairs for the per-group uptake probability distributions."""

    beta_a: tuple[float, float]
    beta_b: tuple[float, float]

    def __post_init__(self) -> None:
        for label, pair in (("beta_a", self.beta_a), ("beta_b", self.beta_b)):
            pair = (_check_shape(f"{label}[0]", pair[0]), _check_shape(f"{label}[1]", pair[1]))
            object.__setattr__(self, label, pair)


@dataclass(frozen=True)
class ClickConfig:
    """Per-group power-law coefficients for click probabilities."""

    k_a: float = 0.05
    k_b: float = 0.05

    def __post_init__(self) -> None:
        object.__setattr__(self, "k_a", _check_shape("k_a", self.k_a))
        object.__setattr__(self, "k_b", _check_shape("k_b", self.k_b))


@dataclass(frozen=True)
class PopulationSpec:
    """Everything needed to draw one synthetic population deterministically."""

    n_a: int
    n_b: int
    uptake: UptakeConfig
    click: ClickConfig = ClickConfig()
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_a < 1 or self.n_b < 1:
            raise ValueError("group sizes must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


def beta_sample(shape1: float, shape2: float, rng: np.random.Generator, size=None):
    """Draw Beta(shape1, shape2) variates from ``rng``."""
    _check_shape("shape1", shape1)
    _check_shape("shape2", shape2)
    return rng.beta(shape1, shape2, size=size)


def _click_sample(k: float, rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.random(size) ** (1.0 / k)


def sample_population(spec: PopulationSpec) -> Population:
    """Sample a population: group-A users first, then group-B.

    Draw order is fixed (rho then p, group A then group B) so identical specs
    give bit-identical populations.
    """
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    rho_a = beta_sample(*spec.uptake.beta_a, rng, size=spec.n_a)
    p_a = _click_sample(spec.click.k_a, rng, spec.n_a)
    rho_b = beta_sample(*spec.uptake.beta_b, rng, size=spec.n_b)
    p_b = _click_sample(spec.click.k_b, rng, spec.n_b)
    groups = np.concatenate([np.full(spec.n_a, "A"), np.full(spec.n_b, "B")])
    p = np.clip(np.concatenate([p_a, p_b]), 0.0, 1.0)
    rho = np.clip(np.concatenate([rho_a, rho_b]), 0.0, 1.0)
    return Population.from_arrays(groups, p, rho)


def subseed(base_seed: int, *path: int) -> int:
    """Derive a 64-bit sub-seed for a cell of a larger experiment.

    Distinct ``path`` tuples give statistically independent streams, and the
    derivation is stable, so resampling one cell never perturbs another.
    """
    ss = np.random.SeedSequence([int(base_seed), *[int(x) for x in path]])
    return int(ss.generate_state(1, np.uint64)[0])


def population_to_csv(pop: Population, path: str | Path | io.TextIOBase) -> None:
    """Write ``group,p,rho`` rows; floats carry 17 significant digits."""
    own = isinstance(path, (str, Path))
    fh = open(path, "w", newline="") if own else path
    try:
        writer = csv.writer(fh)
        writer.writerow(POPULATION_CSV_HEADER)
        for g, p, r in zip(pop.groups, pop.p, pop.rho):
            writer.writerow([g, format(p, ".17g"), format(r, ".17g")])
    finally:
        if own:
            fh.close()


def population_from_csv(path: str | Path | io.TextIOBase) -> Population:
    """Parse a ``group,p,rho`` CSV back into a population.

    Raises:
        ValueError: malformed header, labels, or out-of-range values, with
            the offending line number in the message.
    """
    own = isinstance(path, (str, Path))
    fh = open(path, "r", newline="") if own else path
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty population CSV") from None
        if tuple(h.strip() for h in header) != POPULATION_CSV_HEADER:
            raise ValueError(
                f"line 1: expected header {','.join(POPULATION_CSV_HEADER)!r}, "
                f"got {','.join(header)!r}"
            )
        groups: list[str] = []
        p: list[float] = []
        rho: list[float] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ValueError(f"line {lineno}: expected 3 columns, got {len(row)}")
            g = row[0].strip()
            if g not in ("A", "B"):
                raise ValueError(f"line {lineno}: group must be 'A' or 'B', got {g!r}")
            try:
                pv, rv = float(row[1]), float(row[2])
            except ValueError:
                raise ValueError(f"line {lineno}: p and rho must be numbers") from None
            for name, v in (("p", pv), ("rho", rv)):
                if not (0.0 <= v <= 1.0):
                    raise ValueError(f"line {lineno}: {name} must lie in [0, 1], got {v}")
            groups.append(g)
            p.append(pv)
            rho.append(rv)
        if not groups:
            raise ValueError("population CSV contains no user rows")
        return Population.from_arrays(np.array(groups), np.array(p), np.array(rho))
    finally:
        if own:
            fh.close()
