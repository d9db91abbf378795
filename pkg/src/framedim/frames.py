"""Exponential-system Gram matrices, frame bounds, and numeric lemma checks.

For an atomic measure with M atoms, L^2(mu) is M-dimensional and the frame
ratio  sum_{lambda} |<f, e_lambda>|^2 / ||f||^2  is a Rayleigh quotient of an
M x M Hermitian matrix, so the frame bounds A and B are its extreme
eigenvalues and the report is exact.  For every other kind the bounds are
only bracketed by trial functions (L^2(mu) is infinite dimensional and no
finite certificate exists), and the report says so.

The checkers turn the restriction lemma, the change-of-measure identity, the
small-frequency lower bound, and the counting-bound chain into sampled
numeric tests that record their worst violation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .cells import Cell
from .errors import (
    LemmaPreconditionError,
    ResourceLimitError,
    SpecValidationError,
    ZeroMassError,
)
from .fourier import fourier, fourier_array
from .measures import (
    MeasureSpec,
    as_atomic,
    boundary_mass,
    cell_mass,
    dimension,
    is_probability,
    natural_base,
    normalize_rescale,
    positive_cells,
    profile_in_base,
    restrict,
    support_bounds,
    total_mass,
)
from .spectra import DigitSpectrum, ExplicitSpectrum, ball_count

MAX_GRAM = 4096


@dataclass(frozen=True)
class FrameReport:
    """Frame-bound estimates for one (measure, finite spectrum) pair."""

    lower: float
    upper: float
    exact: bool
    spectrum_size: int
    gram_min_eig: float
    gram_max_eig: float
    hermiticity_defect: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.lower <= self.upper + 1e-12):
            raise SpecValidationError(
                f"frame bounds must satisfy 0 <= A <= B, got {self.lower}, {self.upper}")

    def condition(self) -> float:
        return self.upper / self.lower if self.lower > 0 else math.inf

    def to_dict(self) -> dict:
        return {
            "lower": self.lower, "upper": self.upper, "exact": self.exact,
            "spectrum_size": self.spectrum_size,
            "gram_min_eig": self.gram_min_eig,
            "gram_max_eig": self.gram_max_eig,
            "hermiticity_defect": self.hermiticity_defect,
            "params": dict(self.params),
        }


@dataclass(frozen=True)
class LemmaCheckRecord:
    """Outcome of one sampled lemma check: pass iff worst violation <= tol."""

    lemma_id: str
    sample_count: int
    max_violation: float
    tolerance: float
    passed: bool
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.passed != (self.max_violation <= self.tolerance):
            raise SpecValidationError("pass flag inconsistent with violation")

    def to_dict(self) -> dict:
        return {
            "lemma_id": self.lemma_id, "sample_count": self.sample_count,
            "max_violation": self.max_violation, "tolerance": self.tolerance,
            "passed": self.passed, "params": dict(self.params),
        }


def _freq_matrix(spectrum) -> np.ndarray:
    """Frequencies as an (N, d) matrix; raw arrays may carry duplicates."""
    if isinstance(spectrum, DigitSpectrum):
        return spectrum.enumerate().as_matrix()
    if isinstance(spectrum, ExplicitSpectrum):
        return spectrum.as_matrix()
    arr = np.asarray(spectrum, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


# ---------------------------------------------------------------------------
# Inner products and Gram matrices
# ---------------------------------------------------------------------------

def inner_product(spec: MeasureSpec, t, lam, tol: float = 1e-12) -> complex:
    """<e_t, e_lambda>_mu = mu_hat(t - lambda)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    return fourier(spec, t - lam, tol)


def gram_matrix(spec: MeasureSpec, spectrum, tol: float = 1e-12,
                max_size: int = MAX_GRAM) -> np.ndarray:
    """G[i, j] = mu_hat(lambda_i - lambda_j), Hermitian PSD up to tolerance."""
    lam = _freq_matrix(spectrum)
    n = lam.shape[0]
    if n > max_size:
        raise ResourceLimitError("max_gram", max_size, n)
    try:
        atoms = as_atomic(spec)
    except Exception:
        atoms = None
    if atoms is not None:
        phases = np.exp(2j * np.pi * (lam @ atoms.points.T))
        g = (phases * atoms.weights) @ phases.conj().T
    else:
        g = np.empty((n, n), dtype=complex)
        step = max(1, (1 << 22) // max(n, 1))
        for a in range(0, n, step):
            b = min(n, a + step)
            diffs = (lam[a:b, None, :] - lam[None, :, :]).reshape(-1, lam.shape[1])
            g[a:b] = fourier_array(spec, diffs, tol).reshape(b - a, n)
    return 0.5 * (g + g.conj().T)


def gram_identity_residual(spec: MeasureSpec, spectrum,
                           tol: float = 1e-12) -> float:
    """max-entry deviation of the Gram from the identity (orthonormality test)."""
    g = gram_matrix(spec, spectrum, tol)
    return float(np.max(np.abs(g - np.eye(g.shape[0]))))


# ---------------------------------------------------------------------------
# Frame bounds
# ---------------------------------------------------------------------------

def frame_bounds_atomic(spec: MeasureSpec, spectrum,
                        max_atoms: int = MAX_GRAM) -> FrameReport:
    """Exact frame bounds for an atomic measure and a finite spectrum.

    A and B are the extreme eigenvalues of the M x M Hermitian form
    S[m, m'] = sqrt(w_m w_m') sum_lambda e^{2 pi i lambda (x_m - x_m')},
    the symmetric reduction of the generalized eigenproblem between the
    analysis operator's normal matrix and the diagonal weight form.
    """
    atoms = as_atomic(spec)
    live = atoms.weights > 0
    pts = atoms.points[live]
    w = atoms.weights[live]
    m = pts.shape[0]
    if m == 0:
        raise ZeroMassError("frame bounds need at least one atom with weight > 0")
    if m > max_atoms:
        raise ResourceLimitError("max_atoms", max_atoms, m)
    lam = _freq_matrix(spectrum)
    if lam.shape[0] == 0:
        return FrameReport(0.0, 0.0, True, 0, 0.0, 0.0, 0.0,
                           params={"natoms": m})
    if lam.shape[1] != pts.shape[1]:
        raise SpecValidationError("spectrum dimension != measure dimension")
    psi = np.exp(-2j * np.pi * (lam @ pts.T))          # (N, M) analysis phases
    sw = np.sqrt(w)
    s_mat = (psi.conj().T @ psi) * np.outer(sw, sw)
    herm = float(np.max(np.abs(s_mat - s_mat.conj().T)))
    s_mat = 0.5 * (s_mat + s_mat.conj().T)
    eigs = scipy.linalg.eigvalsh(s_mat)
    lower = float(max(eigs[0], 0.0))
    upper = float(max(eigs[-1], 0.0))
    return FrameReport(
        lower=lower, upper=upper, exact=True, spectrum_size=lam.shape[0],
        gram_min_eig=float(eigs[0]), gram_max_eig=float(eigs[-1]),
        hermiticity_defect=herm,
        params={"natoms": m, "solver": "dense-hermitian-eigh"},
    )


def atomic_frame_ratio(spec: MeasureSpec, spectrum, f_values) -> float:
    """The frame ratio of one trial function given by its atom values."""
    atoms = as_atomic(spec)
    live = atoms.weights > 0
    pts, w = atoms.points[live], atoms.weights[live]
    f = np.asarray(f_values, dtype=complex)[live] \
        if np.asarray(f_values).shape[0] == atoms.natoms \
        else np.asarray(f_values, dtype=complex)
    lam = _freq_matrix(spectrum)
    coeffs = np.exp(-2j * np.pi * (lam @ pts.T)) @ (w * f)
    denom = float(np.sum(w * np.abs(f) ** 2))
    if denom <= 0:
        raise SpecValidationError("zero-norm trial function")
    return float(np.sum(np.abs(coeffs) ** 2) / denom)


@dataclass(frozen=True)
class TrialFunction:
    """A finite combination of exponentials: f = sum_k c_k e_{t_k}."""

    coeffs: np.ndarray
    freqs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        t = np.asarray(self.freqs, dtype=float)
        if t.ndim == 1:
            t = t.reshape(-1, 1)
        if c.shape[0] != t.shape[0]:
            raise SpecValidationError("coeffs and freqs must align")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "freqs", t)


def exponential_trial(t) -> TrialFunction:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return TrialFunction(np.array([1.0 + 0j]), t.reshape(1, -1))


def frame_bounds_bracket(spec: MeasureSpec, spectrum,
                         trials: list[TrialFunction] | None = None,
                         tol: float = 1e-12) -> FrameReport:
    """Trial-function bracketing for measures without an exact eigenproblem.

    The reported ``upper`` is the max trial ratio (a certified lower bound on
    the true B) and ``lower`` the min trial ratio (a certified upper bound on
    the true A); the exact flag is always False.
    """
    lam = _freq_matrix(spectrum)
    if trials is None:
        trials = [exponential_trial(row) for row in lam] or \
            [exponential_trial(np.zeros(dimension(spec)))]
    ratios = []
    for trial in trials:
        k = trial.freqs.shape[0]
        # ||f||^2 = sum_{k,k'} c_k conj(c_k') mu_hat(t_k - t_k')
        diffs = (trial.freqs[:, None, :] -
                 trial.freqs[None, :, :]).reshape(-1, trial.freqs.shape[1])
        gram_f = fourier_array(spec, diffs, tol).reshape(k, k)
        norm_sq = float(np.real(trial.coeffs.conj() @ gram_f.T @ trial.coeffs))
        if norm_sq <= tol:
            raise SpecValidationError("zero-norm trial function")
        if lam.shape[0]:
            cross = (trial.freqs[:, None, :] - lam[None, :, :]).reshape(-1,
                                                                        lam.shape[1])
            coef = fourier_array(spec, cross, tol).reshape(k, lam.shape[0])
            inner = trial.coeffs @ coef
            energy = float(np.sum(np.abs(inner) ** 2))
        else:
            energy = 0.0
        ratios.append(energy / norm_sq)
    lo = float(min(ratios))
    hi = float(max(ratios))
    return FrameReport(
        lower=max(lo, 0.0), upper=hi, exact=False, spectrum_size=lam.shape[0],
        gram_min_eig=math.nan, gram_max_eig=math.nan, hermiticity_defect=0.0,
        params={"trial_count": len(trials), "bracket": True},
    )


# ---------------------------------------------------------------------------
# Lemma checks
# ---------------------------------------------------------------------------

def check_restriction_lemma(spec: MeasureSpec, spectrum, cell: Cell,
                            tol: float = 1e-9) -> LemmaCheckRecord:
    """Restricting to a cell of zero boundary mass keeps the frame bounds valid
    (the restricted ratios can only tighten inside [A, B])."""
    bm = boundary_mass(spec, cell)
    if bm > 0.0:
        raise LemmaPreconditionError(
            f"mu(boundary of K) = {bm} > 0; the restriction lemma needs 0")
    full = frame_bounds_atomic(spec, spectrum)
    sub = frame_bounds_atomic(restrict(spec, cell), spectrum)
    violation = max(full.lower - sub.lower, sub.upper - full.upper, 0.0)
    return LemmaCheckRecord(
        lemma_id="restriction-keeps-frame-bounds",
        sample_count=1,
        max_violation=float(violation),
        tolerance=tol,
        passed=bool(violation <= tol),
        params={"full": [full.lower, full.upper],
                "restricted": [sub.lower, sub.upper],
                "boundary_mass": bm},
    )


def check_change_of_measure(spec: MeasureSpec, cell: Cell,
                            n_samples: int = 1000, seed: int = 0,
                            tol: float = 1e-9,
                            freq_range: float = 64.0) -> LemmaCheckRecord:
    """|<t, lambda>_{mu_D}| = mu(D) |<t/b^n, lambda/b^n>_{mu_D-rescaled}|.

    Both sides go through independent code paths (restriction vs unit-cube
    renormalization).  The squared form is the one the frame sums use, so it
    is the pass criterion; the unsquared residual is recorded alongside.
    """
    mass = cell_mass(spec, cell)
    if mass <= 0:
        raise ZeroMassError("change-of-measure needs a positive-mass cell")
    d = dimension(spec)
    rng = np.random.default_rng(seed)
    t = rng.uniform(-freq_range, freq_range, size=(n_samples, d))
    lam = rng.uniform(-freq_range, freq_range, size=(n_samples, d))
    xi = t - lam
    restricted = restrict(spec, cell)
    rescaled = normalize_rescale(spec, cell)
    scale = float(cell.base) ** (-cell.depth)
    lhs = np.abs(fourier_array(restricted, xi, 1e-13))
    rhs = mass * np.abs(fourier_array(rescaled, xi * scale, 1e-13))
    sq = float(np.max(np.abs(lhs ** 2 - rhs ** 2)))
    unsq = float(np.max(np.abs(lhs - rhs)))
    return LemmaCheckRecord(
        lemma_id="change-of-measure-modulus",
        sample_count=n_samples,
        max_violation=sq,
        tolerance=tol,
        passed=bool(sq <= tol),
        params={"cell_mass": mass, "squared_residual": sq,
                "unsquared_residual": unsq, "freq_range": freq_range,
                "seed": seed},
    )


def delta_for_epsilon(eps: float, d: int) -> float:
    """The small-frequency radius delta(eps) with cos(2 pi d delta) > eps.

    Uses 0.999 * min(1/(4d), arccos(eps)/(2 pi d)); both postconditions are
    asserted: 0 < delta < 1/(4d) and cos(2 pi d delta) > eps.
    """
    if not 0.0 < eps < 1.0:
        raise SpecValidationError("epsilon must lie in (0, 1)")
    if d < 1:
        raise SpecValidationError("dimension must be >= 1")
    delta = 0.999 * min(1.0 / (4.0 * d), math.acos(eps) / (2.0 * math.pi * d))
    assert 0.0 < delta < 1.0 / (4.0 * d)
    assert math.cos(2.0 * math.pi * d * delta) > eps
    return delta


def check_small_freq_lowerbound(spec: MeasureSpec, eps: float, depth: int,
                                n_samples: int = 10_000, seed: int = 0,
                                tol: float = 0.0,
                                cell_limit: int = 1 << 12) -> LemmaCheckRecord:
    """|mu_D-rescaled hat (xi)| > eps for every positive-mass depth-n cell D
    and every |xi| < delta(eps)."""
    d = dimension(spec)
    if not is_probability(spec, tol=1e-9):
        raise LemmaPreconditionError("the lemma is stated for probability measures")
    lo, hi = support_bounds(spec)
    if np.any(lo < -1e-12) or np.any(hi > 1.0 + 1e-12):
        raise LemmaPreconditionError("the lemma needs support inside the unit cube")
    delta = delta_for_epsilon(eps, d)
    rng = np.random.default_rng(seed)
    if d == 1:
        xi = rng.uniform(-delta, delta, size=(n_samples, 1))
    else:
        direction = rng.normal(size=(n_samples, d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radii = delta * rng.uniform(0.0, 1.0, size=(n_samples, 1)) ** (1.0 / d)
        xi = direction * radii
    xi *= (1.0 - 1e-12)  # strictly inside the ball
    worst = 0.0
    cells = positive_cells(spec, depth, limit=cell_limit)
    for cell, _mass in cells:
        rescaled = normalize_rescale(spec, cell)
        mags = np.abs(fourier_array(rescaled, xi, 1e-13))
        worst = max(worst, float(np.max(eps - mags)))
    violation = max(worst, 0.0)
    return LemmaCheckRecord(
        lemma_id="small-frequency-lower-bound",
        sample_count=n_samples * len(cells),
        max_violation=violation,
        tolerance=tol,
        passed=bool(violation <= tol),
        params={"epsilon": eps, "delta": delta, "depth": depth,
                "cells": len(cells), "seed": seed},
    )


def entropy_weight_product_log2(spec: MeasureSpec, n: int,
                                base: int | None = None) -> float:
    """log2 of prod_D mu(D)^(-mu(D)) over positive depth-n cells.

    Algebraically this equals the partition entropy in bits; the counting
    bound consumes it in log space to avoid overflow.
    """
    b = base if base is not None else (natural_base(spec) or 2)
    return profile_in_base(spec, n, b).entropy_bits()


def check_counting_bound(spec: MeasureSpec, spectrum, bessel_bound: float,
                         eps: float, t, h: float) -> LemmaCheckRecord:
    """#(Lambda n B(t,h)) <= B eps^-2 prod_D mu(D)^(-mu(D)) at depth n_h + rho.

    n_h is minimal with h <= b^{n_h} and rho minimal with b^-rho < delta(eps);
    the product is evaluated in log space.
    """
    if not 0.0 < eps < 1.0:
        raise SpecValidationError("epsilon must lie in (0, 1)")
    if h <= 0:
        raise SpecValidationError("ball radius must be positive")
    if bessel_bound <= 0:
        raise SpecValidationError("the Bessel bound must be positive")
    d = dimension(spec)
    b = natural_base(spec) or 2
    n_h = max(0, math.ceil(math.log(h, b) - 1e-12))
    delta = delta_for_epsilon(eps, d)
    rho = 1
    while float(b) ** (-rho) >= delta:
        rho += 1
    depth = n_h + rho
    h_bits = entropy_weight_product_log2(spec, depth)
    log2_rhs = math.log2(bessel_bound) - 2.0 * math.log2(eps) + h_bits
    lhs = ball_count(spectrum, t, h)
    log2_lhs = math.log2(lhs) if lhs > 0 else -math.inf
    violation = max(0.0, log2_lhs - log2_rhs)
    return LemmaCheckRecord(
        lemma_id="counting-bound",
        sample_count=1,
        max_violation=violation,
        tolerance=1e-9,
        passed=bool(violation <= 1e-9),
        params={"count": lhs, "log2_rhs": log2_rhs, "n_h": n_h, "rho": rho,
                "depth": depth, "entropy_bits": h_bits, "base": b,
                "epsilon": eps, "h": float(h),
                "t": np.atleast_1d(np.asarray(t, float)).tolist()},
    )


def counting_bound_suite(spec: MeasureSpec, spectrum, bessel_bound: float,
                         eps: float = 0.5, n_samples: int = 100,
                         seed: int = 0, h_max: float = 1024.0) -> LemmaCheckRecord:
    """Seeded random (t, h) sweep of the counting bound; records the worst case."""
    rng = np.random.default_rng(seed)
    lam = _freq_matrix(spectrum)
    lo = lam.min(axis=0) if lam.size else np.zeros(1)
    hi = lam.max(axis=0) if lam.size else np.zeros(1)
    worst = 0.0
    failed = 0
    for _ in range(n_samples):
        h = float(2.0 ** rng.uniform(0.0, math.log2(h_max)))
        t = rng.uniform(lo - h_max, hi + h_max)
        rec = check_counting_bound(spec, spectrum, bessel_bound, eps, t, h)
        worst = max(worst, rec.max_violation)
        failed += 0 if rec.passed else 1
    return LemmaCheckRecord(
        lemma_id="counting-bound-suite",
        sample_count=n_samples,
        max_violation=worst,
        tolerance=1e-9,
        passed=bool(failed == 0),
        params={"epsilon": eps, "h_max": h_max, "seed": seed,
                "failed_samples": failed},
    )
