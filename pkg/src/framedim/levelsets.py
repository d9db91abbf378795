"""Level sets I of digit positions that carry randomness.

A level set selects the positions i = 1, 2, 3, ... whose base-p digit is
drawn uniformly from {0, ..., p-1}; every other position holds digit 0.
The partial count #I_n = #{i in I : i <= n} is exact for every n, which is
what the dimension formulas consume: the upper entropy dimension of the
associated digit measure is limsup #I_n / n and the Hausdorff dimension of
its support is liminf #I_n / n.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import SpecValidationError


class LevelSet:
    """Common interface of the three level-set descriptions."""

    def contains(self, i: int) -> bool:
        raise NotImplementedError

    def count_upto(self, n: int) -> int:
        """Exact #I_n = #{i in I : 1 <= i <= n}."""
        raise NotImplementedError

    def levels_upto(self, n: int) -> np.ndarray:
        """Sorted int64 array of the elements of I_n."""
        raise NotImplementedError

    def is_finite(self) -> bool:
        raise NotImplementedError

    def density_liminf(self) -> float:
        """liminf of #I_n / n, computed analytically from the description."""
        raise NotImplementedError

    def density_limsup(self) -> float:
        """limsup of #I_n / n, computed analytically from the description."""
        raise NotImplementedError

    def partial_densities(self, n_max: int) -> np.ndarray:
        """The sequence #I_n / n for n = 1, ..., n_max."""
        counts = np.array([self.count_upto(n) for n in range(1, n_max + 1)],
                          dtype=float)
        return counts / np.arange(1, n_max + 1)

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ExplicitLevels(LevelSet):
    """A finite, explicitly listed level set. Density tails to zero."""

    levels: tuple[int, ...]

    def __post_init__(self):
        if any(i < 1 for i in self.levels):
            raise SpecValidationError("levels must be positive integers")
        if list(self.levels) != sorted(set(self.levels)):
            raise SpecValidationError("levels must be strictly increasing")

    def contains(self, i):
        return i in set(self.levels)

    def count_upto(self, n):
        return bisect_right(self.levels, n)

    def levels_upto(self, n):
        return np.array(self.levels[: self.count_upto(n)], dtype=np.int64)

    def is_finite(self):
        return True

    def density_liminf(self):
        return 0.0

    def density_limsup(self):
        return 0.0

    def describe(self):
        return {"kind": "explicit", "levels": list(self.levels)}


@dataclass(frozen=True)
class PeriodicLevels(LevelSet):
    """The infinite set {i >= 1 : i mod modulus in residues}.

    Both density limits equal len(residues)/modulus.  The evens are
    PeriodicLevels((0,), 2); all positions are PeriodicLevels((0,), 1).
    """

    residues: tuple[int, ...]
    modulus: int

    def __post_init__(self):
        if self.modulus < 1:
            raise SpecValidationError("modulus must be >= 1")
        rs = sorted(set(self.residues))
        if rs != list(self.residues):
            raise SpecValidationError("residues must be sorted and distinct")
        if any(r < 0 or r >= self.modulus for r in rs):
            raise SpecValidationError("residues must lie in [0, modulus)")

    def contains(self, i):
        return i >= 1 and (i % self.modulus) in self.residues

    def count_upto(self, n):
        if n < 1:
            return 0
        total = 0
        for r in self.residues:
            if r == 0:
                total += n // self.modulus
            elif r <= n:
                total += (n - r) // self.modulus + 1
        return total

    def levels_upto(self, n):
        out = [i for i in range(1, n + 1) if (i % self.modulus) in self.residues]
        return np.array(out, dtype=np.int64)

    def is_finite(self):
        return len(self.residues) == 0

    def density_liminf(self):
        return len(self.residues) / self.modulus

    def density_limsup(self):
        return len(self.residues) / self.modulus

    def describe(self):
        return {"kind": "periodic", "residues": list(self.residues),
                "modulus": self.modulus}


class OscillatingLevels(LevelSet):
    """Alternating include/exclude runs whose partial densities oscillate.

    The density target pair (low, high) is realized exactly in the limit:
    include runs stop the first time #I_n/n reaches ``high`` and exclude runs
    stop the first time it falls to ``low``, so run lengths grow geometrically
    at the cycle ratio (high/low) * (1-low)/(1-high).  The ``growth``
    parameter seeds the first include run and drives the run-length ratio for
    the extreme targets low = 0 / high = 1, which no finite density can hit.
    With low == high the set degenerates to the Beatty set of that density.

    ``max_level`` is a reporting horizon (default length of the density
    sequence); membership queries beyond it extend the block recurrence
    deterministically.
    """

    def __init__(self, low: float, high: float, growth: float, max_level: int):
        if not (0.0 <= low <= high <= 1.0):
            raise SpecValidationError("need 0 <= low <= high <= 1")
        if growth <= 1.0:
            raise SpecValidationError("growth factor must exceed 1")
        if max_level < 1:
            raise SpecValidationError("max_level must be >= 1")
        self.low = float(low)
        self.high = float(high)
        self.growth = float(growth)
        self.max_level = int(max_level)
        self._low_f = Fraction(self.low)
        self._high_f = Fraction(self.high)
        # runs: list of (end_n, included, count_at_end); starts empty, extended lazily
        self._runs: list[tuple[int, bool, int]] = []
        if self.low != self.high:
            self._extend(self.max_level)

    # -- block recurrence -------------------------------------------------
    def _extend(self, horizon: int) -> None:
        while not self._runs or self._runs[-1][0] < horizon:
            n = self._runs[-1][0] if self._runs else 0
            c = self._runs[-1][2] if self._runs else 0
            cycle = len(self._runs) // 2
            include = (len(self._runs) % 2 == 0)
            if include:
                if n == 0:
                    length = max(1, round(self.growth))
                elif self._high_f >= 1:
                    length = max(1, math.ceil(n * (self.growth ** (cycle + 1) - 1)))
                else:
                    need = (self._high_f * n - c) / (1 - self._high_f)
                    length = max(1, math.ceil(need))
                self._runs.append((n + length, True, c + length))
            else:
                if self._low_f <= 0:
                    length = max(1, math.ceil(n * (self.growth ** (cycle + 1) - 1)))
                else:
                    need = Fraction(c) / self._low_f - n
                    length = max(1, math.ceil(need))
                self._runs.append((n + length, False, c))

    def _beatty_count(self, n: int) -> int:
        f = self._low_f
        return int(n * f.numerator // f.denominator)

    # -- LevelSet interface ------------------------------------------------
    def contains(self, i):
        if i < 1:
            return False
        return self.count_upto(i) > self.count_upto(i - 1)

    def count_upto(self, n):
        if n < 1:
            return 0
        if self.low == self.high:
            return self._beatty_count(n)
        self._extend(n)
        prev_end, prev_count = 0, 0
        for end, included, count in self._runs:
            if n <= end:
                return prev_count + (n - prev_end if included else 0)
            prev_end, prev_count = end, count
        raise AssertionError("run extension failed")

    def levels_upto(self, n):
        out = [i for i in range(1, n + 1) if self.contains(i)]
        return np.array(out, dtype=np.int64)

    def is_finite(self):
        return self.low == self.high == 0.0

    def density_liminf(self):
        return self.low

    def density_limsup(self):
        return self.high

    def run_boundaries(self, horizon: int | None = None) -> list[tuple[int, bool, int]]:
        """The (end_n, included, #I_end) triples up to the horizon."""
        horizon = self.max_level if horizon is None else horizon
        if self.low == self.high:
            return []
        self._extend(horizon)
        return [r for r in self._runs if r[0] <= horizon] + \
            [r for r in self._runs if r[0] > horizon][:1]

    def describe(self):
        return {"kind": "oscillating", "low": self.low, "high": self.high,
                "growth": self.growth, "max_level": self.max_level}


def all_levels() -> PeriodicLevels:
    """The full set I = {1, 2, 3, ...} (density 1)."""
    return PeriodicLevels((0,), 1)


def even_levels() -> PeriodicLevels:
    """The even positions (density 1/2)."""
    return PeriodicLevels((0,), 2)


def levelset_from_dict(d: dict) -> LevelSet:
    kind = d.get("kind")
    if kind == "explicit":
        return ExplicitLevels(tuple(int(i) for i in d["levels"]))
    if kind == "periodic":
        return PeriodicLevels(tuple(int(r) for r in d["residues"]), int(d["modulus"]))
    if kind == "oscillating":
        return OscillatingLevels(float(d["low"]), float(d["high"]),
                                 float(d["growth"]), int(d["max_level"]))
    raise SpecValidationError(f"unknown level-set kind {kind!r}")
