"""Frequency sets with ball-counting access.

Counting uses closed Euclidean balls, and ties on the boundary count in,
so integer-valued spectra give bit-for-bit reproducible counts.  In one
dimension the sup over ball centers is computed exactly by a two-pointer
sweep over the sorted points; in higher dimensions it is a documented
heuristic over candidate centers (the points themselves plus a capped grid).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ResourceLimitError, SpecValidationError
from .levelsets import LevelSet

MAX_SPECTRUM = 1 << 20
DEFAULT_SHIFT = -1  # frequencies sum b_i p^(i-1); see the Gram-oracle tests


@dataclass(frozen=True, eq=False)
class ExplicitSpectrum:
    """Finite frequency set; (N,) for d = 1 (kept sorted) or (N, d)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = np.sort(pts)
        elif pts.ndim != 2:
            raise SpecValidationError("spectrum points must be 1- or 2-d")
        if pts.size and not np.all(np.isfinite(pts)):
            raise SpecValidationError("spectrum points must be finite")
        flat = pts.reshape(pts.shape[0], -1) if pts.size else pts
        if pts.shape[0] > 1:
            uniq = np.unique(flat, axis=0)
            if uniq.shape[0] != pts.shape[0]:
                raise SpecValidationError("spectrum contains duplicate points")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return 1 if self.points.ndim == 1 else self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def as_matrix(self) -> np.ndarray:
        return self.points.reshape(-1, 1) if self.points.ndim == 1 \
            else self.points


@dataclass(frozen=True)
class DigitSpectrum:
    """The frequency set Lambda_{I_n}: all sums b_i p^(i-1+shift), i in I_n.

    ``shift`` moves the exponent convention; the default -1 is the one under
    which the digit measure's truncations are orthonormal (the build-time
    Gram oracle pins this down).
    """

    p: int
    levels: LevelSet
    depth: int
    shift: int = DEFAULT_SHIFT

    def __post_init__(self):
        if self.p < 2:
            raise SpecValidationError("spectrum base p must be >= 2")
        if self.depth < 0:
            raise SpecValidationError("spectrum depth must be >= 0")
        lv = self.levels.levels_upto(self.depth)
        if lv.size and int(lv[0]) + self.shift < 0:
            raise SpecValidationError(
                f"shift {self.shift} makes level {int(lv[0])} a negative exponent")

    def cardinality(self) -> int:
        return self.p ** self.levels.count_upto(self.depth)

    def enumerate(self, limit: int = MAX_SPECTRUM) -> ExplicitSpectrum:
        n_elem = self.cardinality()
        if n_elem > limit:
            raise ResourceLimitError("max_spectrum", limit, n_elem)
        levels = [int(i) for i in self.levels.levels_upto(self.depth)]
        if levels and (levels[-1] + self.shift) * math.log2(self.p) > 62:
            raise ResourceLimitError("max_exponent_bits", 62,
                                     levels[-1] + self.shift)
        vals = np.zeros(1, dtype=np.int64)
        for i in levels:
            step = self.p ** (i + self.shift)
            vals = (vals[:, None] +
                    (np.arange(self.p, dtype=np.int64) * step)[None, :]).ravel()
        return ExplicitSpectrum(np.sort(vals).astype(float))


SpectrumSet = ExplicitSpectrum | DigitSpectrum


def _as_explicit(spectrum) -> ExplicitSpectrum:
    if isinstance(spectrum, ExplicitSpectrum):
        return spectrum
    if isinstance(spectrum, DigitSpectrum):
        return spectrum.enumerate()
    return ExplicitSpectrum(np.asarray(spectrum, dtype=float))


def ball_count(spectrum, center, radius: float) -> int:
    """Exact number of spectrum points in the closed ball B(center, radius)."""
    if radius <= 0:
        raise SpecValidationError("ball radius must be positive")
    spec = _as_explicit(spectrum)
    if spec.size == 0:
        return 0
    if spec.dim == 1:
        t = float(np.atleast_1d(np.asarray(center, dtype=float))[0])
        pts = spec.points
        left = np.searchsorted(pts, t - radius, side="left")
        right = np.searchsorted(pts, t + radius, side="right")
        return int(right - left)
    c = np.atleast_1d(np.asarray(center, dtype=float))
    diff = spec.as_matrix() - c
    return int(np.sum(np.einsum("ij,ij->i", diff, diff) <= radius * radius))


def sup_ball_count(spectrum, radius: float,
                   center_strategy: str = "auto",
                   grid_cap: int = 4096) -> tuple[int, dict]:
    """sup over centers of the closed-ball count, with strategy metadata.

    d = 1: exact via the classical two-pointer sweep (the optimum is attained
    with the ball's left edge at a point).  d > 1: heuristic maximum over the
    points themselves plus a grid of spacing radius/4 capped at ``grid_cap``
    centers; flagged as inexact in the returned metadata.
    """
    if radius <= 0:
        raise SpecValidationError("ball radius must be positive")
    spec = _as_explicit(spectrum)
    if spec.size == 0:
        return 0, {"strategy": "empty", "exact": True}
    if spec.dim == 1:
        pts = spec.points
        ends = np.searchsorted(pts, pts + 2.0 * radius, side="right")
        best = int(np.max(ends - np.arange(pts.size)))
        return best, {"strategy": "sliding-window", "exact": True}
    mat = spec.as_matrix()
    centers = [mat]
    lo, hi = mat.min(axis=0), mat.max(axis=0)
    spacing = radius / 4.0
    axes = [np.arange(lo[j], hi[j] + spacing, spacing) for j in range(spec.dim)]
    n_grid = int(np.prod([len(a) for a in axes]))
    if 0 < n_grid <= grid_cap:
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        centers.append(grid.reshape(-1, spec.dim))
        strategy = "points+grid"
    else:
        strategy = "points-only"
    cand = np.vstack(centers)
    tree = cKDTree(mat)
    counts = tree.query_ball_point(cand, r=radius * (1 + 1e-12),
                                   return_length=True)
    return int(np.max(counts)), {"strategy": strategy, "exact": False,
                                 "grid_spacing": spacing}


def scale_spectrum(spectrum, s: float) -> ExplicitSpectrum:
    """The dilated set s * Lambda (Beurling dimension is invariant under it)."""
    if s == 0:
        raise SpecValidationError("spectrum scale must be nonzero")
    spec = _as_explicit(spectrum)
    return ExplicitSpectrum(spec.points * s)


def translate_spectrum(spectrum, t) -> ExplicitSpectrum:
    spec = _as_explicit(spectrum)
    if spec.dim == 1:
        return ExplicitSpectrum(spec.points +
                                float(np.atleast_1d(np.asarray(t))[0]))
    return ExplicitSpectrum(spec.as_matrix() + np.asarray(t, dtype=float))


def cross_union(left: ExplicitSpectrum, right: ExplicitSpectrum) -> ExplicitSpectrum:
    """(Lambda_1 x {0}) union ({0} x Lambda_2), the mixed-measure spectrum shape."""
    l_mat = left.as_matrix()
    r_mat = right.as_matrix()
    a = np.hstack([l_mat, np.zeros((l_mat.shape[0], r_mat.shape[1]))])
    b = np.hstack([np.zeros((r_mat.shape[0], l_mat.shape[1])), r_mat])
    both = np.vstack([a, b])
    both = np.unique(both, axis=0)
    return ExplicitSpectrum(both)
