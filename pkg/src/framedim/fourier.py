"""Fourier transform evaluation with controlled truncation error.

The convention is mu_hat(xi) = integral of exp(+2*pi*i * xi.x) dmu(x), so the
exponential-system inner product is <e_t, e_lambda> = mu_hat(t - lambda).

Exactness by kind:

* atomic specs: finite exponential sums, error 0;
* digit specs: the level product  prod_{i in I} (1/p) sum_b e^{2 pi i xi b p^-i},
  truncated once the remaining factors are provably within the tolerance
  (each level-i factor differs from 1 by at most pi (p-1) p^-i |xi|);
* trees: per-cell midpoint rule with the rigorous modulus-of-continuity bound
  total_mass * pi * sqrt(d) * |xi| * b^-depth, refusing when the leaf depth
  cannot reach the requested tolerance;
* products / mixed / affine / scaled: the algebraic identities.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import FourierToleranceError, SpecValidationError
from .measures import (
    AffineMeasure,
    AtomicMeasure,
    DigitMeasure,
    DyadicTreeMeasure,
    MeasureSpec,
    MixedMeasure,
    ProductMeasure,
    ScaledMeasure,
    dimension,
    total_mass,
)

_CHUNK = 1 << 14


def fourier(spec: MeasureSpec, xi, tol: float = 1e-12) -> complex:
    """mu_hat(xi) within absolute error tol."""
    xis = np.atleast_1d(np.asarray(xi, dtype=float)).reshape(1, -1)
    return complex(fourier_array(spec, xis, tol)[0])


def fourier_array(spec: MeasureSpec, xis, tol: float = 1e-12) -> np.ndarray:
    """Vectorized mu_hat over an (N,) or (N, d) array of frequencies."""
    if tol <= 0:
        raise SpecValidationError("fourier tolerance must be positive")
    d = dimension(spec)
    arr = np.asarray(xis, dtype=float)
    if arr.ndim == 1:
        if d != 1:
            raise SpecValidationError(
                f"1-d frequency array for a {d}-dimensional measure")
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] != d:
        raise SpecValidationError(
            f"frequencies must have shape (N, {d}), got {arr.shape}")
    return _ft(spec, arr, float(tol))


def _ft(spec: MeasureSpec, xis: np.ndarray, tol: float) -> np.ndarray:
    if isinstance(spec, AtomicMeasure):
        return _ft_atomic(spec, xis)
    if isinstance(spec, DigitMeasure):
        return _ft_digit(spec, xis, tol)
    if isinstance(spec, DyadicTreeMeasure):
        return _ft_tree(spec, xis, tol)
    if isinstance(spec, ProductMeasure):
        return _ft_product(spec, xis, tol)
    if isinstance(spec, MixedMeasure):
        dmu = dimension(spec.mu)
        return (_ft(spec.mu, xis[:, :dmu], tol / 2) +
                _ft(spec.nu, xis[:, dmu:], tol / 2))
    if isinstance(spec, AffineMeasure):
        phase = np.exp(2j * np.pi * (xis @ spec.translate))
        return phase * _ft(spec.base, xis / spec.scale, tol)
    if isinstance(spec, ScaledMeasure):
        if spec.factor == 0.0:
            return np.zeros(xis.shape[0], dtype=complex)
        return spec.factor * _ft(spec.base, xis, tol / spec.factor)
    raise SpecValidationError(f"fourier: unknown spec kind {type(spec)!r}")


def _ft_atomic(spec: AtomicMeasure, xis: np.ndarray) -> np.ndarray:
    n = xis.shape[0]
    out = np.zeros(n, dtype=complex)
    if spec.natoms == 0:
        return out
    step = max(1, _CHUNK // max(1, spec.natoms))
    for a in range(0, n, step):
        b = min(n, a + step)
        phases = np.exp(2j * np.pi * (xis[a:b] @ spec.points.T))
        out[a:b] = phases @ spec.weights
    return out


def digit_truncation_level(p: int, max_abs_xi: float, tol: float) -> int:
    """First level beyond which the remaining product factors stay within tol.

    The factors at levels >= i multiply to within exp(s)-1 of 1, where
    s = sum_{j >= i} pi (p-1) p^-j |xi| = pi |xi| p^(1-i); requiring
    s <= tol/2 keeps the overall truncation error below tol.
    """
    if max_abs_xi == 0.0:
        return 0
    t = min(tol, 1.0)
    need = 1.0 + math.log(2.0 * math.pi * max_abs_xi / t, p)
    return max(0, math.ceil(need))


def _ft_digit(spec: DigitMeasure, xis: np.ndarray, tol: float) -> np.ndarray:
    x = xis[:, 0]
    cutoff = digit_truncation_level(spec.p, float(np.max(np.abs(x), initial=0.0)),
                                    tol)
    out = np.ones(x.shape[0], dtype=complex)
    for i in spec.levels.levels_upto(cutoff):
        w = np.exp(2j * np.pi * x * float(spec.p) ** (-int(i)))
        acc = np.ones_like(w)
        term = np.ones_like(w)
        for _ in range(spec.p - 1):
            term = term * w
            acc += term
        out *= acc / spec.p
    return out


def _ft_tree(spec: DyadicTreeMeasure, xis: np.ndarray, tol: float) -> np.ndarray:
    d = dimension(spec)
    max_xi = float(np.max(np.linalg.norm(xis, axis=1), initial=0.0))
    bound = total_mass(spec) * math.pi * math.sqrt(d) * max_xi \
        * float(spec.base) ** (-spec.depth)
    if bound > tol:
        raise FourierToleranceError(
            f"tree depth {spec.depth} certifies error {bound:.3e} > tol {tol:.3e}"
            " for the requested frequencies")
    side = spec.base ** spec.depth
    axes = (np.arange(side, dtype=float) + 0.5) / side
    mids = np.stack(np.meshgrid(*([axes] * d), indexing="ij"),
                    axis=-1).reshape(-1, d)
    flat = spec.masses.reshape(-1)
    live = flat > 0
    mids, flat = mids[live], flat[live]
    n = xis.shape[0]
    out = np.zeros(n, dtype=complex)
    step = max(1, _CHUNK // max(1, mids.shape[0] // 64 + 1))
    for a in range(0, n, step):
        b = min(n, a + step)
        out[a:b] = np.exp(2j * np.pi * (xis[a:b] @ mids.T)) @ flat
    return out


def _ft_product(spec: ProductMeasure, xis: np.ndarray, tol: float) -> np.ndarray:
    dl = dimension(spec.left)
    ml = total_mass(spec.left)
    mr = total_mass(spec.right)
    if ml == 0.0 or mr == 0.0:
        return np.zeros(xis.shape[0], dtype=complex)
    tol_l = tol / (2.0 * mr)
    tol_r = tol / (2.0 * ml)
    return _ft(spec.left, xis[:, :dl], tol_l) * _ft(spec.right, xis[:, dl:], tol_r)
