"""Measure representations and the operations the dimension theory needs.

The library works with a small closed algebra of finite Borel measures on
Euclidean space:

* ``AtomicMeasure``     -- finitely many weighted atoms;
* ``DigitMeasure``      -- the restricted-digit measure on [0,1]: the base-p
  digit at each position i in a level set I is uniform on {0,...,p-1} and
  every other digit is 0 (empty I gives the Dirac mass at 0);
* ``DyadicTreeMeasure`` -- cell masses on a depth-n b-adic grid, with the
  sub-cell distribution left unspecified;
* ``ProductMeasure``    -- product of two measures on complementary axes;
* ``MixedMeasure``      -- mu x delta_0 + delta_0 x nu on the coordinate cross;
* ``AffineMeasure``     -- pushforward under x -> x/s + v (so that a paired
  exponential spectrum scales as s * Lambda);
* ``ScaledMeasure``     -- nonnegative scalar multiple.

Cell conventions are half-open, [k b^-n, (k+1) b^-n) per axis, so depth-n
cell masses always sum to the total mass.  Every operation is a pure
function of immutable specs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import singledispatch

import numpy as np

from .cells import Cell
from .errors import (
    BaseMismatchError,
    ResourceLimitError,
    SpecValidationError,
    UndecidableSupportError,
    UnsupportedOperationError,
    ZeroMassError,
)
from .levelsets import ExplicitLevels, LevelSet, PeriodicLevels

MAX_ATOMS = 1 << 20          # atom-count limit for enumerating representations
MAX_DEPTH = 64               # partition depth limit
TREE_COHERENCE_RTOL = 1e-12  # parent mass == sum of children, relative
_SNAP_RTOL = 1e-11           # grid classification snap for float atom positions


# ---------------------------------------------------------------------------
# Spec kinds
# ---------------------------------------------------------------------------

class MeasureSpec:
    """Marker base class; all kinds are immutable dataclasses."""


@dataclass(frozen=True, eq=False)
class AtomicMeasure(MeasureSpec):
    """Finitely many atoms: points (M, d), nonnegative weights (M,)."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if pts.size == 0:
            pts = pts.reshape(0, max(1, pts.shape[-1] if pts.ndim == 2 else 1))
        if pts.shape[0] != w.shape[0]:
            raise SpecValidationError("points and weights must have equal length")
        if w.size and (np.any(w < 0) or not np.all(np.isfinite(w))):
            raise SpecValidationError("weights must be finite and nonnegative")
        if pts.size and not np.all(np.isfinite(pts)):
            raise SpecValidationError("atom positions must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def natoms(self) -> int:
        return self.points.shape[0]


def dirac(point, dim: int | None = None) -> AtomicMeasure:
    """A unit point mass."""
    p = np.atleast_1d(np.asarray(point, dtype=float))
    if dim is not None and p.shape != (dim,):
        raise SpecValidationError("point dimension mismatch")
    return AtomicMeasure(p.reshape(1, -1), np.array([1.0]))


def zero_measure(dim: int = 1) -> AtomicMeasure:
    """The zero measure (no atoms) in the given ambient dimension."""
    return AtomicMeasure(np.zeros((0, dim)), np.zeros(0))


@dataclass(frozen=True, eq=False)
class DigitMeasure(MeasureSpec):
    """Restricted-digit probability measure on [0,1] with base p digits."""

    p: int
    levels: LevelSet

    def __post_init__(self):
        if not isinstance(self.p, int) or self.p < 2:
            raise SpecValidationError("digit base p must be an integer >= 2")
        if not isinstance(self.levels, LevelSet):
            raise SpecValidationError("levels must be a LevelSet")


def lebesgue_unit() -> DigitMeasure:
    """Lebesgue measure on [0,1]: every dyadic digit uniform."""
    return DigitMeasure(2, PeriodicLevels((0,), 1))


@dataclass(frozen=True, eq=False)
class DyadicTreeMeasure(MeasureSpec):
    """Masses on the depth-n base-b grid; sub-cell distribution unspecified.

    ``masses`` has shape (b^depth,) * dim.  Queries finer than ``depth``
    are refused rather than guessed.
    """

    base: int
    depth: int
    masses: np.ndarray

    def __post_init__(self):
        if self.base < 2:
            raise SpecValidationError("tree base must be >= 2")
        if self.depth < 0:
            raise SpecValidationError("tree depth must be >= 0")
        m = np.asarray(self.masses, dtype=float)
        side = self.base ** self.depth
        if m.ndim == 0:
            m = m.reshape(1)
        expected = (side,) * m.ndim
        if m.shape != expected:
            raise SpecValidationError(
                f"tree masses must have shape {expected}, got {m.shape}")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise SpecValidationError("tree masses must be finite and nonnegative")
        object.__setattr__(self, "masses", m)

    @classmethod
    def from_levels(cls, base: int, masses_by_depth: list[np.ndarray]):
        """Build from per-depth mass arrays, checking parent/child coherence."""
        arrays = [np.asarray(a, dtype=float) for a in masses_by_depth]
        for shallow, deep in zip(arrays, arrays[1:]):
            rolled = _aggregate_to_depth(deep, base, int(round(
                math.log(shallow.shape[0], base))) if shallow.shape[0] > 1 else 0)
            scale = np.maximum(np.abs(shallow), 1e-300)
            if np.max(np.abs(rolled - shallow) / scale) > TREE_COHERENCE_RTOL:
                raise SpecValidationError(
                    "tree levels are incoherent: parent mass != sum of children")
        leaves = arrays[-1]
        depth = int(round(math.log(leaves.shape[0], base))) if leaves.shape[0] > 1 else 0
        return cls(base, depth, leaves)


def uniform_tree(base: int, depth: int, dim: int = 1) -> DyadicTreeMeasure:
    """The tree with equal cell masses summing to 1 (Lebesgue seen at depth n)."""
    side = base ** depth
    n_cells = side ** dim
    return DyadicTreeMeasure(base, depth,
                             np.full((side,) * dim, 1.0 / n_cells))


@dataclass(frozen=True, eq=False)
class ProductMeasure(MeasureSpec):
    left: MeasureSpec
    right: MeasureSpec


@dataclass(frozen=True, eq=False)
class MixedMeasure(MeasureSpec):
    """rho = mu x delta_0 + delta_0 x nu on dimensions dim(mu) + dim(nu).

    Not normalized by default: two probability parts give total mass 2,
    matching the statement of the mixed-type construction.  Use
    ``normalize`` for the mass-1 version.
    """

    mu: MeasureSpec
    nu: MeasureSpec


@dataclass(frozen=True, eq=False)
class AffineMeasure(MeasureSpec):
    """Pushforward of ``base`` under x -> x/scale + translate.

    The convention is fixed so that if ``base`` has exponential spectrum
    Lambda then the scaled measure has spectrum scale * Lambda.
    """

    base: MeasureSpec
    translate: np.ndarray
    scale: float

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.translate, dtype=float))
        if self.scale == 0:
            raise SpecValidationError("affine scale must be nonzero")
        if v.shape != (dimension(self.base),):
            raise SpecValidationError("translate dimension mismatch")
        object.__setattr__(self, "translate", v)
        object.__setattr__(self, "scale", float(self.scale))


@dataclass(frozen=True, eq=False)
class ScaledMeasure(MeasureSpec):
    """factor * base for factor >= 0 (frame bounds scale with the factor)."""

    base: MeasureSpec
    factor: float

    def __post_init__(self):
        if self.factor < 0 or not math.isfinite(self.factor):
            raise SpecValidationError("scale factor must be finite and >= 0")
        object.__setattr__(self, "factor", float(self.factor))


# ---------------------------------------------------------------------------
# Structure queries
# ---------------------------------------------------------------------------

@singledispatch
def dimension(spec: MeasureSpec) -> int:
    """Ambient dimension d of the Euclidean space carrying the measure."""
    raise UnsupportedOperationError(f"dimension: unknown spec {type(spec)!r}")


@dimension.register
def _(spec: AtomicMeasure):
    return spec.points.shape[1]


@dimension.register
def _(spec: DigitMeasure):
    return 1


@dimension.register
def _(spec: DyadicTreeMeasure):
    return spec.masses.ndim


@dimension.register
def _(spec: ProductMeasure):
    return dimension(spec.left) + dimension(spec.right)


@dimension.register
def _(spec: MixedMeasure):
    return dimension(spec.mu) + dimension(spec.nu)


@dimension.register
def _(spec: AffineMeasure):
    return dimension(spec.base)


@dimension.register
def _(spec: ScaledMeasure):
    return dimension(spec.base)


def _merge_bases(a, b):
    if a is None:
        return b
    if b is None or a == b:
        return a
    raise BaseMismatchError(f"component bases differ: {a} vs {b}")


@singledispatch
def natural_base(spec: MeasureSpec) -> int | None:
    """The partition base the spec resolves exactly (None = any base)."""
    raise UnsupportedOperationError(f"natural_base: unknown spec {type(spec)!r}")


@natural_base.register
def _(spec: AtomicMeasure):
    return None


@natural_base.register
def _(spec: DigitMeasure):
    return spec.p


@natural_base.register
def _(spec: DyadicTreeMeasure):
    return spec.base


@natural_base.register
def _(spec: ProductMeasure):
    return _merge_bases(natural_base(spec.left), natural_base(spec.right))


@natural_base.register
def _(spec: MixedMeasure):
    return _merge_bases(natural_base(spec.mu), natural_base(spec.nu))


@natural_base.register
def _(spec: AffineMeasure):
    return natural_base(spec.base)


@natural_base.register
def _(spec: ScaledMeasure):
    return natural_base(spec.base)


@singledispatch
def total_mass(spec: MeasureSpec) -> float:
    """Exact total mass of the measure."""
    raise UnsupportedOperationError(f"total_mass: unknown spec {type(spec)!r}")


@total_mass.register
def _(spec: AtomicMeasure):
    return float(np.sum(spec.weights)) if spec.natoms else 0.0


@total_mass.register
def _(spec: DigitMeasure):
    return 1.0


@total_mass.register
def _(spec: DyadicTreeMeasure):
    return float(np.sum(spec.masses))


@total_mass.register
def _(spec: ProductMeasure):
    return total_mass(spec.left) * total_mass(spec.right)


@total_mass.register
def _(spec: MixedMeasure):
    return total_mass(spec.mu) + total_mass(spec.nu)


@total_mass.register
def _(spec: AffineMeasure):
    return total_mass(spec.base)


@total_mass.register
def _(spec: ScaledMeasure):
    return spec.factor * total_mass(spec.base)


def is_probability(spec: MeasureSpec, tol: float = 1e-12) -> bool:
    return abs(total_mass(spec) - 1.0) <= tol


def normalize(spec: MeasureSpec) -> MeasureSpec:
    """Divide by the total mass; returns the spec unchanged if it is exactly 1."""
    m = total_mass(spec)
    if m <= 0:
        raise ZeroMassError("cannot normalize a zero measure")
    if m == 1.0:
        return spec
    return ScaledMeasure(spec, 1.0 / m)


@singledispatch
def support_bounds(spec: MeasureSpec) -> tuple[np.ndarray, np.ndarray]:
    """A bounding box [lo, hi] containing the support."""
    raise UnsupportedOperationError(f"support_bounds: unknown spec {type(spec)!r}")


@support_bounds.register
def _(spec: AtomicMeasure):
    d = dimension(spec)
    if spec.natoms == 0:
        return np.zeros(d), np.zeros(d)
    return spec.points.min(axis=0), spec.points.max(axis=0)


@support_bounds.register
def _(spec: DigitMeasure):
    return np.array([0.0]), np.array([1.0])


@support_bounds.register
def _(spec: DyadicTreeMeasure):
    d = dimension(spec)
    return np.zeros(d), np.ones(d)


@support_bounds.register
def _(spec: ProductMeasure):
    llo, lhi = support_bounds(spec.left)
    rlo, rhi = support_bounds(spec.right)
    return np.concatenate([llo, rlo]), np.concatenate([lhi, rhi])


@support_bounds.register
def _(spec: MixedMeasure):
    mlo, mhi = support_bounds(spec.mu)
    nlo, nhi = support_bounds(spec.nu)
    lo = np.concatenate([np.minimum(mlo, 0.0), np.minimum(nlo, 0.0)])
    hi = np.concatenate([np.maximum(mhi, 0.0), np.maximum(nhi, 0.0)])
    return lo, hi


@support_bounds.register
def _(spec: AffineMeasure):
    lo, hi = support_bounds(spec.base)
    a = lo / spec.scale + spec.translate
    b = hi / spec.scale + spec.translate
    return np.minimum(a, b), np.maximum(a, b)


@support_bounds.register
def _(spec: ScaledMeasure):
    return support_bounds(spec.base)


def support_radius(spec: MeasureSpec) -> float:
    lo, hi = support_bounds(spec)
    return float(np.max(np.maximum(np.abs(lo), np.abs(hi)))) if lo.size else 0.0


# ---------------------------------------------------------------------------
# Cell and box masses
# ---------------------------------------------------------------------------

def _snap_floor(y: np.ndarray) -> np.ndarray:
    """floor with a relative snap so grid-boundary atoms land in the upper cell."""
    f = np.floor(y)
    up = np.ceil(y)
    snap = (up - y) <= _SNAP_RTOL * np.maximum(1.0, np.abs(y))
    return np.where(snap & (up > f), up, f)


def _check_cell_base(spec: MeasureSpec, cell: Cell) -> None:
    nb = natural_base(spec)
    if nb is not None and nb != cell.base:
        raise BaseMismatchError(
            f"cell base {cell.base} != natural base {nb} of the spec")
    if cell.depth > MAX_DEPTH:
        raise ResourceLimitError("max_depth", MAX_DEPTH, cell.depth)


def _digits_of_index(k: int, base: int, depth: int) -> list[int] | None:
    """Base-b digits of the cell index, most significant first (level 1)."""
    if k < 0 or k >= base ** depth:
        return None
    digits = []
    for _ in range(depth):
        digits.append(k % base)
        k //= base
    return digits[::-1]


@singledispatch
def cell_mass(spec: MeasureSpec, cell: Cell) -> float:
    """Mass of the half-open cell [k b^-n, (k+1) b^-n) per axis."""
    raise UnsupportedOperationError(f"cell_mass: unknown spec {type(spec)!r}")


@cell_mass.register
def _(spec: AtomicMeasure, cell: Cell):
    if cell.dim != dimension(spec):
        raise SpecValidationError("cell dimension mismatch")
    if spec.natoms == 0:
        return 0.0
    scale = float(cell.base) ** cell.depth
    idx = _snap_floor(spec.points * scale)
    inside = np.all(idx == np.array(cell.index, dtype=float), axis=1)
    return float(np.sum(spec.weights[inside]))


@cell_mass.register
def _(spec: DigitMeasure, cell: Cell):
    _check_cell_base(spec, cell)
    digits = _digits_of_index(cell.index[0], spec.p, cell.depth)
    if digits is None:
        return 0.0
    c = 0
    for i, d in enumerate(digits, start=1):
        if spec.levels.contains(i):
            c += 1
        elif d != 0:
            return 0.0
    return float(spec.p) ** (-c)


@cell_mass.register
def _(spec: DyadicTreeMeasure, cell: Cell):
    _check_cell_base(spec, cell)
    if cell.dim != dimension(spec):
        raise SpecValidationError("cell dimension mismatch")
    if cell.depth > spec.depth:
        raise UnsupportedOperationError(
            f"tree resolves masses to depth {spec.depth}, requested {cell.depth}")
    side = spec.base ** spec.depth
    block = spec.base ** (spec.depth - cell.depth)
    slices = []
    for k in cell.index:
        if k < 0 or (k + 1) * block > side:
            return 0.0
        slices.append(slice(k * block, (k + 1) * block))
    return float(np.sum(spec.masses[tuple(slices)]))


@cell_mass.register
def _(spec: ProductMeasure, cell: Cell):
    dl = dimension(spec.left)
    cl = Cell(cell.base, cell.depth, cell.index[:dl])
    cr = Cell(cell.base, cell.depth, cell.index[dl:])
    return cell_mass(spec.left, cl) * cell_mass(spec.right, cr)


@cell_mass.register
def _(spec: MixedMeasure, cell: Cell):
    dmu = dimension(spec.mu)
    kmu, knu = cell.index[:dmu], cell.index[dmu:]
    mass = 0.0
    if all(k == 0 for k in knu):
        mass += cell_mass(spec.mu, Cell(cell.base, cell.depth, kmu))
    if all(k == 0 for k in kmu):
        mass += cell_mass(spec.nu, Cell(cell.base, cell.depth, knu))
    return mass


@cell_mass.register
def _(spec: ScaledMeasure, cell: Cell):
    return spec.factor * cell_mass(spec.base, cell)


@cell_mass.register
def _(spec: AffineMeasure, cell: Cell):
    lo = cell.anchor()
    hi = cell.upper()
    return _affine_box_mass(spec, lo, hi,
                            np.ones(cell.dim, bool), np.zeros(cell.dim, bool))


def _affine_box_mass(spec: AffineMeasure, lo, hi, inc_lo, inc_hi) -> float:
    s, v = spec.scale, spec.translate
    a = s * (np.asarray(lo, float) - v)
    b = s * (np.asarray(hi, float) - v)
    if s > 0:
        return box_mass(spec.base, a, b, inc_lo, inc_hi)
    # negative scale flips orientation and the open/closed sides
    return box_mass(spec.base, b, a, ~np.asarray(inc_hi, bool),
                    ~np.asarray(inc_lo, bool))


def box_mass(spec: MeasureSpec, lo, hi, include_lo=None, include_hi=None) -> float:
    """Mass of a box with per-axis open/closed flags (default [lo, hi))."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    d = dimension(spec)
    if lo.shape != (d,) or hi.shape != (d,):
        raise SpecValidationError("box endpoints must match the spec dimension")
    inc_lo = np.ones(d, bool) if include_lo is None else np.asarray(include_lo, bool)
    inc_hi = np.zeros(d, bool) if include_hi is None else np.asarray(include_hi, bool)
    if np.any(hi < lo):
        return 0.0
    return _box_mass(spec, lo, hi, inc_lo, inc_hi)


@singledispatch
def _box_mass(spec: MeasureSpec, lo, hi, inc_lo, inc_hi) -> float:
    raise UnsupportedOperationError(f"box_mass: unsupported spec {type(spec)!r}")


@_box_mass.register
def _(spec: AtomicMeasure, lo, hi, inc_lo, inc_hi):
    if spec.natoms == 0:
        return 0.0
    x = spec.points
    ok = np.ones(spec.natoms, bool)
    for j in range(x.shape[1]):
        left = (x[:, j] >= lo[j]) if inc_lo[j] else (x[:, j] > lo[j])
        right = (x[:, j] <= hi[j]) if inc_hi[j] else (x[:, j] < hi[j])
        ok &= left & right
    return float(np.sum(spec.weights[ok]))


@_box_mass.register
def _(spec: DigitMeasure, lo, hi, inc_lo, inc_hi):
    m = _digit_cdf(spec, float(hi[0])) - _digit_cdf(spec, float(lo[0]))
    if inc_hi[0]:
        m += point_mass(spec, hi)
    if not inc_lo[0]:
        m -= point_mass(spec, lo)
    return max(float(m), 0.0)


@_box_mass.register
def _(spec: DyadicTreeMeasure, lo, hi, inc_lo, inc_hi):
    if not (np.all(inc_lo) and not np.any(inc_hi)):
        raise UnsupportedOperationError(
            "tree box masses support only the native [lo, hi) convention")
    scale = spec.base ** spec.depth
    a = np.rint(lo * scale)
    b = np.rint(hi * scale)
    if np.max(np.abs(a - lo * scale)) > 1e-9 or np.max(np.abs(b - hi * scale)) > 1e-9:
        raise UnsupportedOperationError("box is not aligned to the tree grid")
    slices = []
    for j in range(dimension(spec)):
        aj = int(np.clip(a[j], 0, scale))
        bj = int(np.clip(b[j], 0, scale))
        slices.append(slice(aj, bj))
    return float(np.sum(spec.masses[tuple(slices)]))


@_box_mass.register
def _(spec: ProductMeasure, lo, hi, inc_lo, inc_hi):
    dl = dimension(spec.left)
    ml = box_mass(spec.left, lo[:dl], hi[:dl], inc_lo[:dl], inc_hi[:dl])
    mr = box_mass(spec.right, lo[dl:], hi[dl:], inc_lo[dl:], inc_hi[dl:])
    return ml * mr


def _interval_contains_zero(lo, hi, inc_lo, inc_hi) -> bool:
    left = (0.0 >= lo) if inc_lo else (0.0 > lo)
    right = (0.0 <= hi) if inc_hi else (0.0 < hi)
    return bool(left and right)


@_box_mass.register
def _(spec: MixedMeasure, lo, hi, inc_lo, inc_hi):
    dmu = dimension(spec.mu)
    zero_nu = all(_interval_contains_zero(lo[j], hi[j], inc_lo[j], inc_hi[j])
                  for j in range(dmu, len(lo)))
    zero_mu = all(_interval_contains_zero(lo[j], hi[j], inc_lo[j], inc_hi[j])
                  for j in range(dmu))
    m = 0.0
    if zero_nu:
        m += box_mass(spec.mu, lo[:dmu], hi[:dmu], inc_lo[:dmu], inc_hi[:dmu])
    if zero_mu:
        m += box_mass(spec.nu, lo[dmu:], hi[dmu:], inc_lo[dmu:], inc_hi[dmu:])
    return m


@_box_mass.register
def _(spec: ScaledMeasure, lo, hi, inc_lo, inc_hi):
    return spec.factor * box_mass(spec.base, lo, hi, inc_lo, inc_hi)


@_box_mass.register
def _(spec: AffineMeasure, lo, hi, inc_lo, inc_hi):
    return _affine_box_mass(spec, lo, hi, inc_lo, inc_hi)


def _digit_cdf(spec: DigitMeasure, x: float) -> Fraction:
    """P(X < x), exact rational arithmetic on the digit expansion of x."""
    if x <= 0.0:
        return Fraction(0)
    if x >= 1.0:
        return Fraction(1)
    r = Fraction(x)
    p = spec.p
    prob = Fraction(0)
    prefix = Fraction(1)
    for i in range(1, MAX_DEPTH * 4):
        r *= p
        d = int(r)
        r -= d
        if spec.levels.contains(i):
            prob += prefix * Fraction(d, p)
            prefix /= p
        elif d >= 1:
            # the measure's digit here is 0 < d, so the whole branch lies below x
            return prob + prefix
        if r == 0:
            return prob
        if prefix < Fraction(1, 10 ** 70):
            return prob
    return prob


# ---------------------------------------------------------------------------
# Point masses and support queries
# ---------------------------------------------------------------------------

@singledispatch
def point_mass(spec: MeasureSpec, x) -> float:
    """Mass of the single point x (exact for atomic and digit specs)."""
    raise UnsupportedOperationError(f"point_mass: unsupported spec {type(spec)!r}")


@point_mass.register
def _(spec: AtomicMeasure, x):
    if spec.natoms == 0:
        return 0.0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    same = np.all(np.abs(spec.points - x) <=
                  1e-12 * np.maximum(1.0, np.abs(x)), axis=1)
    return float(np.sum(spec.weights[same]))


@point_mass.register
def _(spec: DigitMeasure, x):
    x = float(np.atleast_1d(np.asarray(x, dtype=float))[0])
    if x < 0.0 or x >= 1.0:
        return 0.0
    if not spec.levels.is_finite():
        return 0.0  # infinitely many uniform digits: atomless
    levels = [int(i) for i in spec.levels.levels_upto(10 ** 9)] \
        if isinstance(spec.levels, ExplicitLevels) else None
    if levels is None:
        # finite but not explicit: enumerate through a generous horizon
        levels = [i for i in range(1, MAX_DEPTH * 4) if spec.levels.contains(i)]
    horizon = max(levels) if levels else 0
    r = Fraction(x)
    c = len(levels)
    for i in range(1, horizon + 1):
        r *= spec.p
        d = int(r)
        r -= d
        if d != 0 and not spec.levels.contains(i):
            return 0.0
    return float(Fraction(1, spec.p ** c)) if r == 0 else 0.0


@point_mass.register
def _(spec: DyadicTreeMeasure, x):
    raise UnsupportedOperationError(
        "tree specs do not resolve point masses; use boundary_mass's upper bound")


@point_mass.register
def _(spec: ProductMeasure, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dl = dimension(spec.left)
    return point_mass(spec.left, x[:dl]) * point_mass(spec.right, x[dl:])


@point_mass.register
def _(spec: MixedMeasure, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dmu = dimension(spec.mu)
    m = 0.0
    if np.all(x[dmu:] == 0.0):
        m += point_mass(spec.mu, x[:dmu])
    if np.all(x[:dmu] == 0.0):
        m += point_mass(spec.nu, x[dmu:])
    return m


@point_mass.register
def _(spec: AffineMeasure, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return point_mass(spec.base, spec.scale * (x - spec.translate))


@point_mass.register
def _(spec: ScaledMeasure, x):
    return spec.factor * point_mass(spec.base, x)


@singledispatch
def support_contains(spec: MeasureSpec, x) -> bool:
    """Whether x lies in the (closed) support of the measure."""
    raise UnsupportedOperationError(
        f"support_contains: undecidable for {type(spec)!r}")


@support_contains.register
def _(spec: AtomicMeasure, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    live = spec.weights > 0
    if not np.any(live):
        return False
    return bool(np.any(np.all(
        np.abs(spec.points[live] - x) <= 1e-12 * np.maximum(1.0, np.abs(x)),
        axis=1)))


@support_contains.register
def _(spec: DigitMeasure, x):
    x = float(np.atleast_1d(np.asarray(x, dtype=float))[0])
    if x < 0.0 or x > 1.0:
        return False
    # supp = closure of all digit sums; x must admit an expansion whose
    # digits vanish off the level set.
    r = Fraction(x)
    p = spec.p
    for i in range(1, MAX_DEPTH * 4):
        if r == 0:
            return True
        r *= p
        d = int(r)
        r -= d
        if not spec.levels.contains(i):
            if d == 0:
                continue
            # the only alternative expansion: x sits at the top of this branch
            # (digit d-1 followed by all-(p-1) digits), valid only if every
            # deeper level is free.
            if d == 1 and r == 0:
                return _all_deeper_levels_free(spec.levels, i)
            return False
    return True  # undetermined beyond the horizon: within 2^-256 of the support


def _all_deeper_levels_free(levels: LevelSet, i: int) -> bool:
    if levels.is_finite():
        return False
    if isinstance(levels, PeriodicLevels):
        return len(levels.residues) == levels.modulus
    # conservative scan for other infinite descriptions
    return all(levels.contains(j) for j in range(i + 1, i + 256))


@support_contains.register
def _(spec: DyadicTreeMeasure, x):
    raise UnsupportedOperationError("tree specs do not resolve their support")


@support_contains.register
def _(spec: ProductMeasure, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dl = dimension(spec.left)
    return support_contains(spec.left, x[:dl]) and \
        support_contains(spec.right, x[dl:])


@support_contains.register
def _(spec: MixedMeasure, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dmu = dimension(spec.mu)
    on_mu = np.all(x[dmu:] == 0.0) and support_contains(spec.mu, x[:dmu])
    on_nu = np.all(x[:dmu] == 0.0) and support_contains(spec.nu, x[dmu:])
    return bool(on_mu or on_nu)


@support_contains.register
def _(spec: AffineMeasure, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return support_contains(spec.base, spec.scale * (x - spec.translate))


@support_contains.register
def _(spec: ScaledMeasure, x):
    return spec.factor > 0 and support_contains(spec.base, x)


def measure_of_support(a: MeasureSpec, b: MeasureSpec) -> float:
    """a(supp(b)) for the decidable kind combinations; exact where defined."""
    if total_mass(b) == 0.0:
        return 0.0
    try:
        atoms = as_atomic(a)
    except UnsupportedOperationError:
        atoms = None
    if atoms is not None:
        live = atoms.weights > 0
        return float(sum(
            w for pt, w in zip(atoms.points[live], atoms.weights[live])
            if support_contains(b, pt)))
    a_core, a_factor = _strip_scaling(a)
    b_core, _ = _strip_scaling(b)
    if isinstance(a_core, DigitMeasure):
        if isinstance(b_core, AtomicMeasure):
            live = b_core.weights > 0
            pts = {tuple(p) for p in b_core.points[live]}
            return a_factor * float(sum(point_mass(a_core, np.array(p))
                                        for p in pts))
        if isinstance(b_core, DigitMeasure) and b_core.p == a_core.p:
            return a_factor * _digit_support_mass(a_core, b_core)
    raise UndecidableSupportError(
        f"a(supp(b)) undecidable for {type(a).__name__} vs {type(b).__name__}")


def _strip_scaling(spec: MeasureSpec) -> tuple[MeasureSpec, float]:
    factor = 1.0
    while isinstance(spec, ScaledMeasure):
        factor *= spec.factor
        spec = spec.base
    return spec, factor


def _digit_support_mass(a: DigitMeasure, b: DigitMeasure) -> float:
    """a(supp(b)) for same-base digit measures: p^-#(I_a \\ I_b)."""
    ia, ib = a.levels, b.levels
    if isinstance(ia, PeriodicLevels) and isinstance(ib, PeriodicLevels):
        lcm = math.lcm(ia.modulus, ib.modulus)
        diff_classes = [r for r in range(lcm)
                        if ia.contains(lcm + r) and not ib.contains(lcm + r)]
        if diff_classes:
            return 0.0
        extra = sum(1 for i in range(1, lcm + 1)
                    if ia.contains(i) and not ib.contains(i))
        return float(a.p) ** (-extra)
    if ia.is_finite():
        horizon = int(ia.levels_upto(10 ** 9).max(initial=0)) + 1 \
            if isinstance(ia, ExplicitLevels) else MAX_DEPTH * 4
        extra = sum(1 for i in range(1, horizon)
                    if ia.contains(i) and not ib.contains(i))
        return float(a.p) ** (-extra)
    raise UndecidableSupportError(
        "digit-vs-digit support mass needs periodic or finite level sets")


# ---------------------------------------------------------------------------
# Restriction, rescaling, affine images
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _ShiftedLevels(LevelSet):
    """Levels of I shifted down by a fixed offset: {i - off : i in I, i > off}."""

    inner: LevelSet
    offset: int

    def contains(self, i):
        return i >= 1 and self.inner.contains(i + self.offset)

    def count_upto(self, n):
        if n < 1:
            return 0
        return self.inner.count_upto(n + self.offset) - \
            self.inner.count_upto(self.offset)

    def levels_upto(self, n):
        inner = self.inner.levels_upto(n + self.offset)
        return np.asarray(inner[inner > self.offset] - self.offset,
                          dtype=np.int64)

    def is_finite(self):
        return self.inner.is_finite()

    def density_liminf(self):
        return self.inner.density_liminf()

    def density_limsup(self):
        return self.inner.density_limsup()

    def describe(self):
        return {"kind": "shifted", "offset": self.offset,
                "inner": self.inner.describe()}


def shift_levels(levels: LevelSet, offset: int) -> LevelSet:
    """The level set seen after discarding the first ``offset`` positions."""
    if offset == 0:
        return levels
    if isinstance(levels, ExplicitLevels):
        return ExplicitLevels(tuple(i - offset for i in levels.levels
                                    if i > offset))
    if isinstance(levels, PeriodicLevels):
        shifted = tuple(sorted({(r - offset) % levels.modulus
                                for r in levels.residues}))
        return PeriodicLevels(shifted, levels.modulus)
    if isinstance(levels, _ShiftedLevels):
        return _ShiftedLevels(levels.inner, levels.offset + offset)
    return _ShiftedLevels(levels, offset)


@singledispatch
def restrict(spec: MeasureSpec, cell: Cell) -> MeasureSpec:
    """The measure mu(. intersect K) for a half-open cell K with mu(K) > 0."""
    raise UnsupportedOperationError(f"restrict: unsupported spec {type(spec)!r}")


def _require_mass(spec, cell) -> float:
    m = cell_mass(spec, cell)
    if m <= 0.0:
        raise ZeroMassError(f"cell {cell} carries no mass")
    return m


@restrict.register
def _(spec: AtomicMeasure, cell: Cell):
    _require_mass(spec, cell)
    scale = float(cell.base) ** cell.depth
    idx = _snap_floor(spec.points * scale)
    inside = np.all(idx == np.array(cell.index, dtype=float), axis=1)
    return AtomicMeasure(spec.points[inside], spec.weights[inside])


@restrict.register
def _(spec: DigitMeasure, cell: Cell):
    mass = _require_mass(spec, cell)
    tail = DigitMeasure(spec.p, shift_levels(spec.levels, cell.depth))
    mapped = AffineMeasure(tail, cell.anchor(), float(spec.p) ** cell.depth)
    return ScaledMeasure(mapped, mass)


@restrict.register
def _(spec: DyadicTreeMeasure, cell: Cell):
    _require_mass(spec, cell)
    side = spec.base ** spec.depth
    block = spec.base ** (spec.depth - cell.depth)
    keep = np.zeros_like(spec.masses)
    slices = tuple(slice(k * block, (k + 1) * block) for k in cell.index)
    keep[slices] = spec.masses[slices]
    return DyadicTreeMeasure(spec.base, spec.depth, keep)


@restrict.register
def _(spec: ProductMeasure, cell: Cell):
    _require_mass(spec, cell)
    dl = dimension(spec.left)
    return ProductMeasure(
        restrict(spec.left, Cell(cell.base, cell.depth, cell.index[:dl])),
        restrict(spec.right, Cell(cell.base, cell.depth, cell.index[dl:])))


@restrict.register
def _(spec: MixedMeasure, cell: Cell):
    _require_mass(spec, cell)
    dmu = dimension(spec.mu)
    kmu = Cell(cell.base, cell.depth, cell.index[:dmu])
    knu = Cell(cell.base, cell.depth, cell.index[dmu:])
    mu_part: MeasureSpec = zero_measure(dmu)
    nu_part: MeasureSpec = zero_measure(dimension(spec.nu))
    if all(k == 0 for k in cell.index[dmu:]) and cell_mass(spec.mu, kmu) > 0:
        mu_part = restrict(spec.mu, kmu)
    if all(k == 0 for k in cell.index[:dmu]) and cell_mass(spec.nu, knu) > 0:
        nu_part = restrict(spec.nu, knu)
    return MixedMeasure(mu_part, nu_part)


@restrict.register
def _(spec: ScaledMeasure, cell: Cell):
    _require_mass(spec, cell)
    return ScaledMeasure(restrict(spec.base, cell), spec.factor)


@restrict.register
def _(spec: AffineMeasure, cell: Cell):
    _require_mass(spec, cell)
    pre = _affine_preimage_cell(spec, cell)
    return AffineMeasure(restrict(spec.base, pre), spec.translate, spec.scale)


def _affine_preimage_cell(spec: AffineMeasure, cell: Cell) -> Cell:
    """Preimage of a cell under x -> x/s + v, when it is again a b-adic cell."""
    nb = natural_base(spec.base)
    b = cell.base if nb is None else nb
    if spec.scale <= 0:
        raise UnsupportedOperationError(
            "cell operations on affine images need a positive scale")
    j = math.log(spec.scale, b)
    if abs(j - round(j)) > 1e-9:
        raise UnsupportedOperationError(
            "affine scale is not a power of the base; cell preimage undefined")
    j = round(j)
    depth = cell.depth - j
    if depth < 0:
        raise UnsupportedOperationError("cell preimage coarser than depth 0")
    scale = float(b) ** cell.depth
    shifted = np.array(cell.index, dtype=float) - spec.translate * scale
    idx = np.rint(shifted)
    if np.max(np.abs(idx - shifted)) > 1e-9:
        raise UnsupportedOperationError(
            "affine translate is not aligned to the cell grid")
    return Cell(b, depth, tuple(int(k) for k in idx))


@singledispatch
def normalize_rescale(spec: MeasureSpec, cell: Cell) -> MeasureSpec:
    """The unit-cube renormalization: push mu restricted to D through the
    map sending D onto [0,1]^d, divided by mu(D)."""
    raise UnsupportedOperationError(
        f"normalize_rescale: unsupported spec {type(spec)!r}")


@normalize_rescale.register
def _(spec: AtomicMeasure, cell: Cell):
    mass = _require_mass(spec, cell)
    inner = restrict(spec, cell)
    scale = float(cell.base) ** cell.depth
    pts = (inner.points - cell.anchor()) * scale
    return AtomicMeasure(pts, inner.weights / mass)


@normalize_rescale.register
def _(spec: DigitMeasure, cell: Cell):
    _require_mass(spec, cell)
    return DigitMeasure(spec.p, shift_levels(spec.levels, cell.depth))


@normalize_rescale.register
def _(spec: DyadicTreeMeasure, cell: Cell):
    mass = _require_mass(spec, cell)
    block = spec.base ** (spec.depth - cell.depth)
    slices = tuple(slice(k * block, (k + 1) * block) for k in cell.index)
    return DyadicTreeMeasure(spec.base, spec.depth - cell.depth,
                             spec.masses[slices] / mass)


@normalize_rescale.register
def _(spec: ProductMeasure, cell: Cell):
    _require_mass(spec, cell)
    dl = dimension(spec.left)
    return ProductMeasure(
        normalize_rescale(spec.left, Cell(cell.base, cell.depth, cell.index[:dl])),
        normalize_rescale(spec.right, Cell(cell.base, cell.depth, cell.index[dl:])))


@normalize_rescale.register
def _(spec: MixedMeasure, cell: Cell):
    mass = _require_mass(spec, cell)
    dmu = dimension(spec.mu)
    dnu = dimension(spec.nu)
    kmu = Cell(cell.base, cell.depth, cell.index[:dmu])
    knu = Cell(cell.base, cell.depth, cell.index[dmu:])
    scale = float(cell.base) ** cell.depth
    mu_part: MeasureSpec = zero_measure(dmu)
    nu_part: MeasureSpec = zero_measure(dnu)
    if all(k == 0 for k in cell.index[dmu:]) and cell_mass(spec.mu, kmu) > 0:
        # the delta_0 factor pins the nu axes, so only the mu block rescales
        mu_part = AffineMeasure(restrict(spec.mu, kmu),
                                -kmu.anchor() * scale, 1.0 / scale)
    if all(k == 0 for k in cell.index[:dmu]) and cell_mass(spec.nu, knu) > 0:
        nu_part = AffineMeasure(restrict(spec.nu, knu),
                                -knu.anchor() * scale, 1.0 / scale)
    return ScaledMeasure(MixedMeasure(mu_part, nu_part), 1.0 / mass)


@normalize_rescale.register
def _(spec: ScaledMeasure, cell: Cell):
    _require_mass(spec, cell)
    return normalize_rescale(spec.base, cell)


@normalize_rescale.register
def _(spec: AffineMeasure, cell: Cell):
    mass = _require_mass(spec, cell)
    pre = _affine_preimage_cell(spec, cell)
    del mass
    return normalize_rescale(spec.base, pre)


def affine_image(spec: MeasureSpec, translate, scale: float) -> MeasureSpec:
    """Pushforward under x -> x/scale + translate (spectrum scales as s*Lambda)."""
    if scale == 0:
        raise SpecValidationError("affine scale must be nonzero")
    v = np.atleast_1d(np.asarray(translate, dtype=float))
    if isinstance(spec, AtomicMeasure):
        return AtomicMeasure(spec.points / scale + v, spec.weights.copy())
    if isinstance(spec, AffineMeasure):
        # compose: x -> x/(s1 s2) + (v1/s2 + v2)
        return AffineMeasure(spec.base, spec.translate / scale + v,
                             spec.scale * scale)
    if float(scale) == 1.0 and not np.any(v):
        return spec
    return AffineMeasure(spec, v, float(scale))


# ---------------------------------------------------------------------------
# Boundary mass
# ---------------------------------------------------------------------------

def boundary_mass(spec: MeasureSpec, cell: Cell) -> float:
    """Mass of the topological boundary of the (closed) cell box.

    Exact for atomic/digit-backed kinds; an upper bound for trees (which
    cannot resolve faces below their leaf depth).
    """
    lo, hi = cell.anchor(), cell.upper()
    return _boundary_mass_box(spec, lo, hi)


def _boundary_mass_box(spec: MeasureSpec, lo, hi) -> float:
    if isinstance(spec, ScaledMeasure):
        return spec.factor * _boundary_mass_box(spec.base, lo, hi)
    if isinstance(spec, AffineMeasure):
        s, v = spec.scale, spec.translate
        a = s * (np.asarray(lo, float) - v)
        b = s * (np.asarray(hi, float) - v)
        return _boundary_mass_box(spec.base, np.minimum(a, b), np.maximum(a, b))
    if isinstance(spec, DyadicTreeMeasure):
        return _tree_boundary_upper(spec, lo, hi)
    d = dimension(spec)
    if d == 1 and isinstance(spec, (DigitMeasure, AtomicMeasure)):
        return point_mass(spec, lo) + point_mass(spec, hi)
    if isinstance(spec, AtomicMeasure):
        return _atomic_boundary(spec, lo, hi)
    if isinstance(spec, ProductMeasure):
        dl = dimension(spec.left)
        b1 = _boundary_mass_box(spec.left, lo[:dl], hi[:dl])
        b2 = _boundary_mass_box(spec.right, lo[dl:], hi[dl:])
        c1 = box_mass(spec.left, lo[:dl], hi[:dl],
                      np.ones(dl, bool), np.ones(dl, bool))
        c2 = box_mass(spec.right, lo[dl:], hi[dl:],
                      np.ones(len(lo) - dl, bool), np.ones(len(lo) - dl, bool))
        return b1 * c2 + c1 * b2 - b1 * b2
    if isinstance(spec, MixedMeasure):
        dmu = dimension(spec.mu)
        out = 0.0
        for part, sl in ((spec.mu, slice(0, dmu)), (spec.nu, slice(dmu, None))):
            other = slice(dmu, None) if sl == slice(0, dmu) else slice(0, dmu)
            olo, ohi = lo[other], hi[other]
            on_cl = bool(np.all((olo <= 0.0) & (0.0 <= ohi)))
            on_bd = bool(np.all((olo <= 0.0) & (0.0 <= ohi)) and
                         np.any((olo == 0.0) | (ohi == 0.0)))
            if not on_cl:
                continue
            dd = dmu if sl == slice(0, dmu) else len(lo) - dmu
            bpart = _boundary_mass_box(part, lo[sl], hi[sl])
            clpart = box_mass(part, lo[sl], hi[sl],
                              np.ones(dd, bool), np.ones(dd, bool))
            out += bpart + (clpart - bpart) * (1.0 if on_bd else 0.0)
        return out
    raise UnsupportedOperationError(
        f"boundary_mass: unsupported spec {type(spec)!r}")


def _atomic_boundary(spec: AtomicMeasure, lo, hi) -> float:
    if spec.natoms == 0:
        return 0.0
    x = spec.points
    tol = 1e-12 * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
    inside_cl = np.all((x >= lo - tol) & (x <= hi + tol), axis=1)
    on_face = np.any((np.abs(x - lo) <= tol) | (np.abs(x - hi) <= tol), axis=1)
    return float(np.sum(spec.weights[inside_cl & on_face]))


def _tree_boundary_upper(spec: DyadicTreeMeasure, lo, hi) -> float:
    # upper bound: total mass of leaves whose closed box meets a face
    side = spec.base ** spec.depth
    d = dimension(spec)
    leaf = 1.0 / side
    grids = np.indices((side,) * d).reshape(d, -1).T
    leaf_lo = grids * leaf
    leaf_hi = (grids + 1) * leaf
    meets_cl = np.all((leaf_hi >= lo) & (leaf_lo <= hi), axis=1)
    touches = np.zeros(len(grids), dtype=bool)
    for j in range(d):
        touches |= (leaf_lo[:, j] <= lo[j]) & (lo[j] <= leaf_hi[:, j])
        touches |= (leaf_lo[:, j] <= hi[j]) & (hi[j] <= leaf_hi[:, j])
    sel = (meets_cl & touches)
    return float(np.sum(spec.masses.reshape(-1)[sel]))


# ---------------------------------------------------------------------------
# Truncation and atomization
# ---------------------------------------------------------------------------

def truncate_digit(spec: DigitMeasure, n: int,
                   max_atoms: int = MAX_ATOMS) -> AtomicMeasure:
    """Uniform atoms on the depth-n digit set C(I_n); p^{#I_n} atoms."""
    if not isinstance(spec, DigitMeasure):
        raise UnsupportedOperationError("truncate_digit needs a digit spec")
    if n < 0:
        raise SpecValidationError("truncation depth must be >= 0")
    levels = spec.levels.levels_upto(n)
    count = len(levels)
    n_atoms = spec.p ** count
    if n_atoms > max_atoms:
        raise ResourceLimitError("max_atoms", max_atoms, n_atoms)
    if count * math.log2(spec.p) > 62:
        raise ResourceLimitError("max_depth", 62, count)
    nums = np.zeros(1, dtype=np.int64)
    top = max((int(i) for i in levels), default=0)
    for i in levels:
        step = spec.p ** (top - int(i))
        nums = (nums[:, None] +
                (np.arange(spec.p, dtype=np.int64) * step)[None, :]).ravel()
    pts = np.sort(nums).astype(float) / float(spec.p) ** top if top else \
        np.zeros(1)
    return AtomicMeasure(pts.reshape(-1, 1), np.full(n_atoms, 1.0 / n_atoms))


def as_atomic(spec: MeasureSpec, max_atoms: int = MAX_ATOMS) -> AtomicMeasure:
    """Materialize a finitely supported spec as explicit atoms."""
    if isinstance(spec, AtomicMeasure):
        return spec
    if isinstance(spec, DigitMeasure):
        if not spec.levels.is_finite():
            raise UnsupportedOperationError(
                "digit measure with infinite level set is not atomic")
        horizon = int(spec.levels.levels_upto(10 ** 9).max(initial=0)) \
            if isinstance(spec.levels, ExplicitLevels) else MAX_DEPTH * 4
        return truncate_digit(spec, horizon, max_atoms)
    if isinstance(spec, ScaledMeasure):
        inner = as_atomic(spec.base, max_atoms)
        return AtomicMeasure(inner.points, inner.weights * spec.factor)
    if isinstance(spec, AffineMeasure):
        inner = as_atomic(spec.base, max_atoms)
        return AtomicMeasure(inner.points / spec.scale + spec.translate,
                             inner.weights.copy())
    if isinstance(spec, MixedMeasure):
        mu = as_atomic(spec.mu, max_atoms)
        nu = as_atomic(spec.nu, max_atoms)
        dmu, dnu = dimension(spec.mu), dimension(spec.nu)
        pts_mu = np.hstack([mu.points, np.zeros((mu.natoms, dnu))])
        pts_nu = np.hstack([np.zeros((nu.natoms, dmu)), nu.points])
        return AtomicMeasure(np.vstack([pts_mu, pts_nu]),
                             np.concatenate([mu.weights, nu.weights]))
    if isinstance(spec, ProductMeasure):
        left = as_atomic(spec.left, max_atoms)
        right = as_atomic(spec.right, max_atoms)
        if left.natoms * right.natoms > max_atoms:
            raise ResourceLimitError("max_atoms", max_atoms,
                                     left.natoms * right.natoms)
        pts = np.hstack([
            np.repeat(left.points, right.natoms, axis=0),
            np.tile(right.points, (left.natoms, 1))])
        w = np.outer(left.weights, right.weights).ravel()
        return AtomicMeasure(pts, w)
    raise UnsupportedOperationError(
        f"as_atomic: {type(spec).__name__} has no finite atomic form")


# ---------------------------------------------------------------------------
# Depth-n mass profiles (cell masses with multiplicity)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MassProfile:
    """Positive depth-n cell masses: multiset off the origin cell + the
    origin cell's own mass (0 if that cell is empty).

    Splitting the origin cell out is what lets mixed and product specs
    combine profiles without enumerating cells.
    """

    values: np.ndarray   # distinct-or-not positive masses of non-origin cells
    counts: np.ndarray   # multiplicities (float: digit counts can be huge)
    origin: float

    def total(self) -> float:
        return float(np.sum(self.values * self.counts)) + self.origin

    def entropy_bits(self) -> float:
        """Shannon entropy (base 2) of the cell-mass distribution."""
        h = float(np.sum(self.counts * self.values *
                         (-np.log2(self.values)))) if self.values.size else 0.0
        if self.origin > 0.0:
            h += self.origin * (-math.log2(self.origin))
        return h

    def cell_count(self) -> float:
        return float(np.sum(self.counts)) + (1.0 if self.origin > 0 else 0.0)


@singledispatch
def mass_profile(spec: MeasureSpec, n: int) -> MassProfile:
    """Profile of positive depth-n cell masses in the spec's natural base."""
    raise UnsupportedOperationError(f"mass_profile: unsupported {type(spec)!r}")


def _profile_from_dense(masses: np.ndarray, origin_mass: float) -> MassProfile:
    vals = masses[masses > 0]
    return MassProfile(vals.astype(float), np.ones(vals.size), float(origin_mass))


@mass_profile.register
def _(spec: AtomicMeasure, n: int):
    if n > MAX_DEPTH:
        raise ResourceLimitError("max_depth", MAX_DEPTH, n)
    b = 2  # atomic specs accept any base; callers pass base via profile_in_base
    return _atomic_profile(spec, n, b)


def _atomic_profile(spec: AtomicMeasure, n: int, base: int) -> MassProfile:
    if spec.natoms == 0:
        return MassProfile(np.zeros(0), np.zeros(0), 0.0)
    scale = float(base) ** n
    if scale > 2 ** 62:
        raise ResourceLimitError("max_depth", 62, n)
    idx = _snap_floor(spec.points * scale).astype(np.int64)
    buckets: dict[tuple, float] = {}
    for key, w in zip(map(tuple, idx), spec.weights):
        if w > 0:
            buckets[key] = buckets.get(key, 0.0) + float(w)
    origin = buckets.pop(tuple([0] * dimension(spec)), 0.0)
    vals = np.array(list(buckets.values()), dtype=float)
    return MassProfile(vals, np.ones(vals.size), origin)


@mass_profile.register
def _(spec: DigitMeasure, n: int):
    c = spec.levels.count_upto(n)
    v = float(spec.p) ** (-c)
    cnt = float(spec.p) ** c
    return MassProfile(np.array([v]), np.array([cnt - 1.0]), v)


@mass_profile.register
def _(spec: DyadicTreeMeasure, n: int):
    if n > spec.depth:
        raise UnsupportedOperationError(
            f"tree resolves masses to depth {spec.depth}, requested {n}")
    agg = _aggregate_to_depth(spec.masses, spec.base, n)
    flat = agg.reshape(-1)
    origin = float(agg[tuple([0] * dimension(spec))])
    mask = flat > 0
    mask0 = np.zeros_like(mask)
    mask0.reshape(-1)[0] = True  # C-order: origin cell is the first entry
    vals = flat[mask & ~mask0.reshape(-1)]
    return MassProfile(vals.astype(float), np.ones(vals.size),
                       origin if origin > 0 else 0.0)


def _aggregate_to_depth(masses: np.ndarray, base: int, n: int) -> np.ndarray:
    d = masses.ndim
    side = masses.shape[0]
    depth = int(round(math.log(side, base))) if side > 1 else 0
    if n == depth:
        return masses
    block = base ** (depth - n)
    out = masses
    for axis in range(d):
        new_shape = out.shape[:axis] + (side // block, block) + out.shape[axis + 1:]
        out = out.reshape(new_shape).sum(axis=axis + 1)
    return out


@mass_profile.register
def _(spec: ProductMeasure, n: int):
    lp = profile_in_base(spec.left, n, natural_base(spec))
    rp = profile_in_base(spec.right, n, natural_base(spec))
    vals = []
    counts = []
    if lp.values.size and rp.values.size:
        vals.append(np.outer(lp.values, rp.values).ravel())
        counts.append(np.outer(lp.counts, rp.counts).ravel())
    if lp.origin > 0 and rp.values.size:
        vals.append(lp.origin * rp.values)
        counts.append(rp.counts)
    if rp.origin > 0 and lp.values.size:
        vals.append(rp.origin * lp.values)
        counts.append(lp.counts)
    values = np.concatenate(vals) if vals else np.zeros(0)
    cnts = np.concatenate(counts) if counts else np.zeros(0)
    return MassProfile(values, cnts, lp.origin * rp.origin)


@mass_profile.register
def _(spec: MixedMeasure, n: int):
    base = natural_base(spec)
    mp = profile_in_base(spec.mu, n, base)
    np_ = profile_in_base(spec.nu, n, base)
    values = np.concatenate([mp.values, np_.values])
    counts = np.concatenate([mp.counts, np_.counts])
    return MassProfile(values, counts, mp.origin + np_.origin)


@mass_profile.register
def _(spec: ScaledMeasure, n: int):
    inner = mass_profile(spec.base, n)
    return MassProfile(inner.values * spec.factor, inner.counts,
                       inner.origin * spec.factor)


@mass_profile.register
def _(spec: AffineMeasure, n: int):
    b = natural_base(spec.base)
    if b is None:
        return _atomic_profile(as_atomic(spec), n, 2)
    if spec.scale <= 0:
        raise UnsupportedOperationError(
            "profiles of affine images need a positive scale")
    j = math.log(spec.scale, b)
    if abs(j - round(j)) > 1e-9 or n - round(j) < 0:
        raise UnsupportedOperationError(
            "affine scale is not a compatible power of the base")
    j = round(j)
    scale = float(b) ** n
    k0 = -spec.translate * scale
    k0r = np.rint(k0)
    if np.max(np.abs(k0 - k0r)) > 1e-9:
        raise UnsupportedOperationError(
            "affine translate is not aligned to the depth-n grid")
    inner = mass_profile(spec.base, n - j)
    if all(int(v) == 0 for v in k0r):
        return inner
    source_origin_cell = Cell(b, n - j, tuple(int(v) for v in k0r))
    origin_img = cell_mass(spec.base, source_origin_cell)
    # re-home the origin: the image origin cell is some other source cell
    vals = list(inner.values)
    counts = list(inner.counts)
    if inner.origin > 0:
        vals.append(inner.origin)
        counts.append(1.0)
    if origin_img > 0:
        for i, (vv, cc) in enumerate(zip(vals, counts)):
            if vv == origin_img and cc >= 1:
                counts[i] = cc - 1
                break
        else:
            raise UnsupportedOperationError(
                "could not re-home the origin cell in an affine profile")
    vals_arr = np.array(vals, dtype=float)
    cnt_arr = np.array(counts, dtype=float)
    keep = cnt_arr > 0
    return MassProfile(vals_arr[keep], cnt_arr[keep], float(origin_img))


def profile_in_base(spec: MeasureSpec, n: int, base: int | None) -> MassProfile:
    """Profile at depth n, honoring a requested base when the spec allows any."""
    nb = natural_base(spec)
    if base is not None and nb is not None and base != nb:
        raise BaseMismatchError(
            f"requested base {base} != natural base {nb}")
    core, factor = _strip_scaling(spec)
    if isinstance(core, AtomicMeasure):
        prof = _atomic_profile(core, n, base if base is not None else 2)
        return MassProfile(prof.values * factor, prof.counts,
                           prof.origin * factor)
    return mass_profile(spec, n)


def positive_cells(spec: MeasureSpec, n: int,
                   limit: int = 1 << 16) -> list[tuple[Cell, float]]:
    """Enumerate (cell, mass) pairs with positive depth-n mass.

    Guarded by ``limit``; use profiles when only the multiset is needed.
    """
    base = natural_base(spec)
    base = 2 if base is None else base
    d = dimension(spec)
    core, factor = _strip_scaling(spec)
    if isinstance(core, DigitMeasure):
        levels = [int(i) for i in core.levels.levels_upto(n)]
        c = len(levels)
        if core.p ** c > limit:
            raise ResourceLimitError("max_cells", limit, core.p ** c)
        # depth-n cell indices are the digit sums sum b_i p^(n-i), exactly
        idxs = [0]
        for i in levels:
            step = core.p ** (n - i)
            idxs = [k + b * step for k in idxs for b in range(core.p)]
        m = float(core.p) ** (-c) * factor
        return [(Cell(base, n, (k,)), m) for k in sorted(idxs)]
    if isinstance(core, AtomicMeasure):
        scale = float(base) ** n
        idx = _snap_floor(core.points * scale).astype(np.int64)
        buckets: dict[tuple, float] = {}
        for key, w in zip(map(tuple, idx), core.weights):
            if w > 0:
                buckets[key] = buckets.get(key, 0.0) + float(w) * factor
        return [(Cell(base, n, tuple(int(v) for v in k)), m)
                for k, m in sorted(buckets.items())]
    if isinstance(core, DyadicTreeMeasure):
        agg = _aggregate_to_depth(core.masses, core.base, n)
        out_list = []
        it = np.ndindex(agg.shape)
        for key in it:
            m = float(agg[key])
            if m > 0:
                out_list.append((Cell(base, n, tuple(int(v) for v in key)),
                                 m * factor))
        return out_list
    if isinstance(core, MixedMeasure):
        dmu = dimension(core.mu)
        dnu = dimension(core.nu)
        mu_cells = positive_cells(core.mu, n, limit)
        nu_cells = positive_cells(core.nu, n, limit)
        combined: dict[tuple, float] = {}
        for c1, m in mu_cells:
            key = c1.index + (0,) * dnu
            combined[key] = combined.get(key, 0.0) + m * factor
        for c2, m in nu_cells:
            key = (0,) * dmu + c2.index
            combined[key] = combined.get(key, 0.0) + m * factor
        return [(Cell(base, n, k), m) for k, m in sorted(combined.items())]
    if isinstance(core, ProductMeasure):
        dl = dimension(core.left)
        lc = positive_cells(core.left, n, limit)
        rc = positive_cells(core.right, n, limit)
        if len(lc) * len(rc) > limit:
            raise ResourceLimitError("max_cells", limit, len(lc) * len(rc))
        return [(Cell(base, n, a.index + b.index), ma * mb * factor)
                for a, ma in lc for b, mb in rc]
    raise UnsupportedOperationError(
        f"positive_cells: unsupported spec {type(core)!r}")
