"""Dimension estimators: entropy, Beurling, Fourier decay, and Lev exponent.

The paper-level quantities are all asymptotic (limits, limsups, liminfs), so
every estimator returns a ``DimensionEstimate`` carrying the full diagnostic
curve it was computed from, the tail-window statistic or least-squares slope
that produced the value, and a residual measuring how settled the tail is.
No estimator returns a bare number.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    QuadratureError,
    SpecValidationError,
    UnsupportedOperationError,
)
from .fourier import fourier_array
from .levelsets import LevelSet
from .measures import (
    DigitMeasure,
    DyadicTreeMeasure,
    MeasureSpec,
    _strip_scaling,
    dimension,
    is_probability,
    natural_base,
    profile_in_base,
    support_radius,
)
from .spectra import ExplicitSpectrum, _as_explicit, sup_ball_count


@dataclass(frozen=True)
class DimensionEstimate:
    """An estimated dimension plus the evidence it came from.

    ``curve`` holds (scale, statistic) rows; ``method`` says how the value
    was read off the tail (tail-max / tail-min for limsup- and liminf-style
    quantities, slope-fit for log-log regressions).
    """

    value: float
    method: str
    curve: np.ndarray
    residual: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.curve.ndim != 2 or self.curve.shape[1] != 2 or \
                self.curve.shape[0] == 0:
            raise SpecValidationError("estimate curve must be a nonempty (K,2) array")

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "residual": self.residual,
            "curve": [[float(a), float(b)] for a, b in self.curve],
            "params": dict(self.params),
        }


def _tail_window(n_points: int, window: int | None) -> int:
    w = math.ceil(n_points / 4) if window is None else int(window)
    return max(2, min(n_points, w))


def _lsq_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and RMS residual."""
    xm, ym = x.mean(), y.mean()
    var = float(np.sum((x - xm) ** 2))
    if var == 0.0:
        return 0.0, 0.0
    slope = float(np.sum((x - xm) * (y - ym)) / var)
    fit = ym + slope * (x - xm)
    return slope, float(np.sqrt(np.mean((y - fit) ** 2)))


# ---------------------------------------------------------------------------
# Entropy dimension
# ---------------------------------------------------------------------------

def partition_entropy(spec: MeasureSpec, n: int, base: int | None = None) -> float:
    """Shannon entropy (bits) of the depth-n partition cell masses.

    Requires a probability spec; the 0 * log 0 = 0 convention is built in.
    """
    if n < 1:
        raise SpecValidationError("partition depth must be >= 1")
    if not is_probability(spec, tol=1e-9):
        raise SpecValidationError(
            "partition entropy is defined for probability measures; normalize first")
    b = base if base is not None else (natural_base(spec) or 2)
    prof = profile_in_base(spec, n, b)
    h = prof.entropy_bits()
    upper = n * dimension(spec) * math.log2(b)
    if h < -1e-9 or h > upper + 1e-6:
        raise AssertionError(f"entropy {h} outside [0, {upper}]")
    return max(h, 0.0)


def digit_entropy_exact(levels: LevelSet, p: int, n: int) -> float:
    """Closed form for digit measures: depth-n base-p entropy = #I_n * log2 p."""
    return levels.count_upto(n) * math.log2(p)


def digit_hausdorff_formula(levels: LevelSet) -> float:
    """Hausdorff dimension of the digit measure's support: liminf #I_n / n."""
    return levels.density_liminf()


def entropy_dim_estimate(spec: MeasureSpec, n_max: int, mode: str = "upper",
                         base: int | None = None,
                         window: int | None = None) -> DimensionEstimate:
    """Entropy dimension from the curve H_n / (n log2 b), n = 1..n_max.

    ``upper`` reads the max of the tail window (a limsup surrogate), ``lower``
    the min.  Digit specs use the exact per-depth entropy formula so the curve
    extends to depths where cell enumeration is impossible; the equivalence of
    the two routes is itself a tested invariant.
    """
    if n_max < 8:
        raise SpecValidationError("entropy estimation needs n_max >= 8")
    if mode not in ("upper", "lower"):
        raise SpecValidationError("mode must be 'upper' or 'lower'")
    if not is_probability(spec, tol=1e-9):
        raise SpecValidationError("entropy dimension needs a probability spec")
    b = base if base is not None else (natural_base(spec) or 2)
    core, _ = _strip_scaling(spec)
    if isinstance(core, DyadicTreeMeasure) and n_max > core.depth:
        raise UnsupportedOperationError(
            f"tree resolves depth {core.depth} < n_max {n_max}")
    ns = np.arange(1, n_max + 1)
    curve_source = "partition-profile"
    if isinstance(core, DigitMeasure) and b == core.p:
        counts = np.array([core.levels.count_upto(int(n)) for n in ns], float)
        stats = counts / ns
        curve_source = "digit-exact"
    else:
        hs = np.array([partition_entropy(spec, int(n), b) for n in ns])
        stats = hs / (ns * math.log2(b))
    w = _tail_window(n_max, window)
    tail = stats[-w:]
    value = float(np.max(tail) if mode == "upper" else np.min(tail))
    d = dimension(spec)
    clipped = min(max(value, 0.0), float(d))
    curve = np.column_stack([ns.astype(float), stats])
    return DimensionEstimate(
        value=clipped,
        method="tail-max" if mode == "upper" else "tail-min",
        curve=curve,
        residual=float(np.std(tail)),
        params={"base": b, "n_max": n_max, "window": w, "mode": mode,
                "curve_source": curve_source, "raw_value": value,
                "ambient_dim": d},
    )


# ---------------------------------------------------------------------------
# Beurling density and dimension
# ---------------------------------------------------------------------------

def default_h_schedule(spectrum, n_points: int = 24) -> np.ndarray:
    """Geometric (ratio 2) radii from 1 up to a quarter of the spectrum extent."""
    spec = _as_explicit(spectrum)
    mat = spec.as_matrix()
    if spec.size <= 1:
        return np.array([1.0, 2.0, 4.0, 8.0])
    extent = float(np.max(mat.max(axis=0) - mat.min(axis=0)))
    j_max = max(3, int(math.floor(math.log2(max(extent, 8.0) / 4.0))))
    js = np.arange(0, min(j_max, n_points) + 1)
    return 2.0 ** js


def beurling_density(spectrum, r: float, h_schedule=None,
                     center_strategy: str = "auto") -> float:
    """max over the h-schedule of sup_x #(Lambda n B(x,h)) / h^r."""
    if r <= 0:
        raise SpecValidationError("density exponent r must be positive")
    hs = default_h_schedule(spectrum) if h_schedule is None \
        else np.asarray(h_schedule, dtype=float)
    if hs.size == 0:
        raise SpecValidationError("h-schedule must be nonempty")
    if np.any(np.diff(hs) <= 0):
        raise SpecValidationError("h-schedule must be strictly increasing")
    best = 0.0
    for h in hs:
        count, _ = sup_ball_count(spectrum, float(h), center_strategy)
        best = max(best, count / float(h) ** r)
    return best


def beurling_dim_estimate(spectrum, h_schedule=None, mode: str = "slope",
                          window: int | None = None,
                          center_strategy: str = "auto") -> DimensionEstimate:
    """Beurling dimension from sup-center ball counts N(h).

    ``slope``: least-squares slope of log N against log h over the tail
    window.  ``ratio-max``: max over the tail of log N / log h, the limsup
    reading -- the right tool when the count's local growth rate oscillates
    (restricted-digit spectra built from oscillating level sets).  Any finite
    sample under-counts the sup over all centers, so both are lower-biased.
    """
    spec = _as_explicit(spectrum)
    if spec.size == 0:
        raise SpecValidationError("cannot estimate the dimension of an empty set")
    hs = default_h_schedule(spec) if h_schedule is None \
        else np.asarray(h_schedule, dtype=float)
    if hs.size < 4:
        raise SpecValidationError("need at least 4 scales in the h-schedule")
    counts = np.empty(hs.size)
    meta = {}
    for i, h in enumerate(hs):
        c, meta = sup_ball_count(spec, float(h), center_strategy)
        counts[i] = max(c, 1)
    w = _tail_window(hs.size, window)
    log_h = np.log(hs[-w:])
    log_n = np.log(counts[-w:])
    d = spec.dim
    if mode == "slope":
        slope, resid = _lsq_slope(log_h, log_n)
        raw = slope
    elif mode == "ratio-max":
        usable = log_h > 0
        if not np.any(usable):
            raise SpecValidationError("ratio-max mode needs radii above 1")
        ratios = log_n[usable] / log_h[usable]
        raw = float(np.max(ratios))
        resid = float(np.std(ratios))
    else:
        raise SpecValidationError("mode must be 'slope' or 'ratio-max'")
    value = min(max(raw, 0.0), float(d))
    curve = np.column_stack([hs, counts])
    return DimensionEstimate(
        value=value,
        method="slope-fit" if mode == "slope" else "tail-max",
        curve=curve,
        residual=resid,
        params={"window": w, "mode": mode, "raw_value": raw,
                "ambient_dim": d, "center_sup": meta},
    )


# ---------------------------------------------------------------------------
# Fourier dimension
# ---------------------------------------------------------------------------

def fourier_dim_estimate(spec: MeasureSpec, octaves: int = 20,
                         per_octave: int = 16, tol: float = 1e-12,
                         window: int | None = None,
                         xi_schedule=None) -> DimensionEstimate:
    """Fourier dimension via the decay of the upper envelope of |mu_hat|.

    The envelope is the max of |mu_hat| over each geometric block (octave
    [2^j, 2^{j+1}), sampled ``per_octave`` times including the left endpoint);
    the estimate is -2 x (envelope log-log slope), clipped to [0, d].
    Sampling inside whole octaves is what keeps the sinc zeros of absolutely
    continuous measures from punching -inf holes in the log curve.
    """
    if dimension(spec) != 1:
        raise UnsupportedOperationError("Fourier-decay estimation is 1-d only")
    if xi_schedule is not None:
        xs = np.asarray(xi_schedule, dtype=float)
        starts = xs
        samples = [np.array([x]) for x in xs]
    else:
        if octaves < 4:
            raise SpecValidationError("need at least 4 octaves")
        starts = 2.0 ** np.arange(octaves)
        offs = np.arange(per_octave, dtype=float) / per_octave
        samples = [s * (1.0 + offs) for s in starts]
    all_xi = np.concatenate(samples)
    mags = np.abs(fourier_array(spec, all_xi, tol))
    env = np.empty(len(samples))
    pos = 0
    for j, block in enumerate(samples):
        env[j] = np.max(mags[pos:pos + len(block)])
        pos += len(block)
    usable = env > 1e-14
    if np.count_nonzero(usable) < 2:
        raise QuadratureError("all sampled |mu_hat| below the numeric floor")
    w = _tail_window(int(np.count_nonzero(usable)), window)
    log_x = np.log(starts[usable])[-w:]
    log_e = np.log(env[usable])[-w:]
    slope, resid = _lsq_slope(log_x, log_e)
    raw = -2.0 * slope
    value = min(max(raw, 0.0), 1.0)
    curve = np.column_stack([starts, env])
    return DimensionEstimate(
        value=value,
        method="slope-fit",
        curve=curve,
        residual=resid,
        params={"octaves": len(starts), "per_octave": per_octave,
                "window": w, "envelope_slope": slope, "raw_value": raw},
    )


# ---------------------------------------------------------------------------
# Lev integral and exponent
# ---------------------------------------------------------------------------

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_nodes(order: int):
    if order not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(order)
        _GL_CACHE[order] = (x, w)
    return _GL_CACHE[order]


def _squared_modulus_integral(spec: MeasureSpec, a: float, b: float,
                              tol: float) -> float:
    """integral over [a,b] of |mu_hat(t)|^2, composite Gauss-Legendre with
    order doubling as the error estimate."""
    if b <= a:
        return 0.0
    radius = max(1.0, support_radius(spec))
    panel = 0.5 / radius
    n_panels = max(1, int(math.ceil((b - a) / panel)))
    ftol = tol / (8.0 * (b - a + 1.0))
    for _ in range(6):
        if n_panels * 36 > 8_000_000:
            raise QuadratureError("quadrature subdivision limit exceeded")
        edges = np.linspace(a, b, n_panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1:] - edges[:-1])
        vals = []
        for order in (12, 24):
            x, wq = _gl_nodes(order)
            pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
            f = np.abs(fourier_array(spec, pts, ftol)) ** 2
            f = f.reshape(n_panels, order)
            vals.append(float(np.sum(f @ wq * half)))
        if abs(vals[0] - vals[1]) <= max(tol, 1e-15):
            return vals[1]
        n_panels *= 2
    raise QuadratureError(
        f"quadrature did not converge to {tol} on [{a}, {b}]")


def lev_integral(spec: MeasureSpec, r: float, quad_tol: float = 1e-8) -> float:
    """integral over [-r, r] of |mu_hat|^2, using evenness of the integrand."""
    if dimension(spec) != 1:
        raise UnsupportedOperationError("the growth condition is stated in 1-d")
    if r <= 0:
        raise SpecValidationError("r must be positive")
    return 2.0 * _squared_modulus_integral(spec, 0.0, float(r), quad_tol / 2.0)


def lev_exponent_estimate(spec: MeasureSpec, r_schedule=None,
                          quad_tol: float = 1e-8,
                          window: int | None = None) -> DimensionEstimate:
    """The growth exponent: d minus the log-log slope of r -> lev_integral(r).

    An exponent near 0 means the squared transform keeps full linear growth
    (point masses); near d it means the integral saturates (absolutely
    continuous measures).  Integrals accumulate over the schedule segments so
    each radius costs only the new panels.
    """
    if dimension(spec) != 1:
        raise UnsupportedOperationError("the growth condition is stated in 1-d")
    rs = 2.0 ** np.arange(0, 13) if r_schedule is None \
        else np.asarray(r_schedule, dtype=float)
    if rs.size < 4 or np.any(np.diff(rs) <= 0):
        raise SpecValidationError("r-schedule must be increasing with >= 4 points")
    seg_tol = quad_tol / (2.0 * rs.size)
    integrals = np.empty(rs.size)
    acc = 0.0
    prev = 0.0
    for i, r in enumerate(rs):
        acc += _squared_modulus_integral(spec, prev, float(r), seg_tol)
        prev = float(r)
        integrals[i] = 2.0 * acc
    if np.any(integrals <= 0):
        raise QuadratureError("lev integral underflow: vanishing transform")
    w = _tail_window(rs.size, window)
    slope, resid = _lsq_slope(np.log(rs[-w:]), np.log(integrals[-w:]))
    alpha = 1.0 - slope
    curve = np.column_stack([rs, integrals])
    return DimensionEstimate(
        value=alpha,
        method="slope-fit",
        curve=curve,
        residual=resid,
        params={"window": w, "quad_tol": quad_tol, "growth_slope": slope},
    )
