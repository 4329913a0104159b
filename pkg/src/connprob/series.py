"""Power-series CDF of ``||Delta||^2`` for a planar Gaussian ``Delta`` and the
adaptive-degree connection-probability algorithm built on it."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import CannotShrink, DegreeCapExceeded, SeriesOverflow
from .gaussian import Gaussian2, SpectralForm, eig2, spectral_form, validate_spd

DEFAULT_DELTA_F = 1e-10
INITIAL_DEGREE = 50
MAX_DEGREE = 5000
Y_CAP = 100.0
THREE_DELTA_ERROR = 3e-3
# TRACE fires below this eigenvalue; the extra 0.05 over 1/2 keeps 1/(2 lam - 1) bounded
TRACE_THRESHOLD = 0.55
B_SQ_FLOOR = 5e-3
MAX_BITS = 1 << 16
_LN2 = math.log(2.0)
_DOUBLE_GUARD_BITS = 10.0  # keep the double-precision error 1e-3 below delta_f
_MP_GUARD_BITS = 64.0


class Method(str, enum.Enum):
    APSE = "apse"
    BERNOULLI = "bernoulli"
    LINEAR = "linear"
    RANDOM = "random"
    ORACLE = "oracle"


@dataclass(frozen=True)
class ConnectionProbability:
    value: float
    method: Method
    degree_used: int = 0
    error_bound: float | None = None
    trace_applied: bool = False

    def as_record(self) -> dict:
        return {
            "value": self.value,
            "method": self.method.value,
            "degree_used": self.degree_used,
            "error_bound": self.error_bound,
            "trace_applied": self.trace_applied,
        }


@dataclass(frozen=True)
class SeriesCoefficients:
    d: np.ndarray  # d[k-1] holds d_k, k = 1..W
    c: np.ndarray  # c[w], w = 0..W
    d_peak: float


@dataclass(frozen=True)
class SeriesSum:
    value: float  # clamped to [0, 1]
    raw: float
    degree: int
    bits: int  # 53 when the double-precision pass was sufficient
    log_magnitude: float  # natural log of the summed term magnitudes


def coeff_d(spec: SpectralForm, w: int) -> float:
    if w < 1:
        raise ValueError("w must be >= 1")
    lam, bsq = spec.lam, spec.b_sq
    return 0.5 * sum((1.0 - w * bsq[j]) * (2.0 * lam[j]) ** (-w) for j in range(2))


def coeff_c(spec: SpectralForm, W: int) -> SeriesCoefficients:
    """Coefficients via the convolution recursion, in double precision."""
    if W < 1:
        raise ValueError("W must be >= 1")
    d, c = kernels.coeff_series(spec.lam[0], spec.lam[1], spec.b_sq[0], spec.b_sq[1], W)
    d = np.asarray(d)
    c = np.asarray(c)
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(d))):
        raise SeriesOverflow("coefficient recursion left the double range; rescale first")
    return SeriesCoefficients(d=d, c=c, d_peak=float(np.max(np.abs(d))))


def envelope(c0: float, d_peak: float, W: int) -> np.ndarray:
    """Majorant series with every ``d_w`` replaced by ``d_peak``."""
    out = np.empty(W + 1)
    out[0] = c0
    for w in range(W):
        out[w + 1] = out[w] * (d_peak + w) / (w + 1)
    return out


def e_series(c: np.ndarray, D: int) -> np.ndarray:
    """``c_w`` divided by the falling factorial used in the truncation bound."""
    w = np.arange(len(c), dtype=float)
    if D == 1:
        return c / (w + 1.0)
    out = np.array(c, dtype=float)
    for k in range(D - 1, len(c)):
        out[k] = c[k] / math.prod(k + 2 - j for j in range(1, D + 1))
    return out


def log_c0_of(spec: SpectralForm) -> float:
    return -0.5 * float(np.sum(spec.b_sq)) - 0.5 * math.log(4.0 * spec.lam[0] * spec.lam[1])


def c0_of(spec: SpectralForm) -> float:
    return math.exp(log_c0_of(spec))


def scan_d_peak(spec: SpectralForm, start: int = INITIAL_DEGREE, cap: int = MAX_DEGREE):
    """Largest ``|d_w|`` over ``w >= 1``, certified by a doubling scan.

    The window grows until the upper bound ``(1/2) sum_j (1 + w b_j^2) a_j^w``
    (``a_j = 1/(2 lam_j)``), which decreases once ``w > 1/ln(1/a_j)``, drops
    below the peak already seen.
    """
    if not np.all(2.0 * spec.lam > 1.0):
        raise ValueError("series degree selection needs both eigenvalues above 1/2")
    a = 1.0 / (2.0 * spec.lam)
    bsq = spec.b_sq
    turn = max(1.0 / math.log(1.0 / aj) if aj < 1.0 else math.inf for aj in a)
    window = start
    while True:
        w = np.arange(1, window + 1, dtype=float)
        d = 0.5 * sum((1.0 - w * bsq[j]) * a[j] ** w for j in range(2))
        peak = float(np.max(np.abs(d)))
        nxt = window + 1
        bound = 0.5 * sum((1.0 + nxt * bsq[j]) * a[j] ** nxt for j in range(2))
        if window >= turn and bound <= peak:
            return SeriesCoefficients(d=d, c=np.array([c0_of(spec)]), d_peak=peak)
        if window >= cap:
            return SeriesCoefficients(d=d, c=np.array([c0_of(spec)]), d_peak=max(peak, bound))
        window = min(2 * window, cap)


def log_g_tail(y: float, D: int, w_m: int) -> float:
    if w_m + 1 - D < 0:
        raise ValueError("w_m + 1 - D must be >= 0")
    return (w_m + 1) * math.log(y) - math.lgamma(w_m + 2 - D)


def g_tail(y: float, D: int, w_m: int) -> float:
    """``y^(w_m+1) / (w_m+1-D)!`` evaluated through log-gamma."""
    return math.exp(log_g_tail(y, D, w_m))


def min_degree_for_g(y: float, D: int, threshold: float) -> int:
    """Smallest ``w_m`` past the maximum of ``g`` with ``g(w_m) <= threshold``."""
    log_thr = math.log(threshold)
    w = max(D - 1, int(math.floor(y + D - 1)))
    while log_g_tail(y, D, w) > log_thr:
        w += 1
    return w


def truncation_bound(c0: float, d_peak: float, y: float, w_m: int) -> float:
    """Full tail bound ``c~_{D-1} (1 + pi^2/6) g(w_m)``."""
    D = max(1, math.ceil(d_peak))
    env = envelope(c0, d_peak, D - 1)
    return float(env[D - 1]) * (1.0 + math.pi**2 / 6.0) * g_tail(y, D, w_m)


def adaptive_degree(
    spec: SpectralForm,
    y: float,
    delta_f: float,
    d_scan,
    max_degree: int = MAX_DEGREE,
    b_sq_floor: float = B_SQ_FLOOR,
) -> int:
    """Smallest degree meeting every sufficient condition of the truncation bound.

    ``d_scan`` is a :class:`SeriesCoefficients` (or the peak ``|d_w|`` itself).
    """
    lam = spec.lam
    if not np.all(2.0 * lam > 1.0):
        raise ValueError("series degree selection needs both eigenvalues above 1/2")
    if y <= 0 or delta_f <= 0:
        raise ValueError("y and delta_f must be positive")
    d_peak = d_scan.d_peak if isinstance(d_scan, SeriesCoefficients) else float(d_scan)
    D = max(1, math.ceil(d_peak))
    log_c0 = log_c0_of(spec)
    cands = [float(INITIAL_DEGREE)]
    for j in range(2):
        w_j = 1.0 / (2.0 * lam[j] - 1.0)
        if spec.b_sq[j] >= b_sq_floor:
            w_j += 1.0 / spec.b_sq[j]
        cands.append(w_j)
    cands.append(math.e**2 * y + D)
    # 3D - ln(delta_f / (c0 y^D)) - 1, kept in log form
    cands.append(3 * D - (math.log(delta_f) - log_c0 - D * math.log(y)) - 1)
    w_m = int(max(math.ceil(v) for v in cands))
    if w_m > max_degree:
        raise DegreeCapExceeded(f"selected degree {w_m} exceeds cap {max_degree}")
    return w_m


def cauchy_degree(spec: SpectralForm, y: float, delta_f: float, max_degree: int = 10 * MAX_DEGREE) -> int:
    """Degree whose truncation error is below ``delta_f`` by a Cauchy estimate.

    The coefficients have the closed generating function
    ``c0 prod_j (1 - a_j s)^(-1/2) exp(-B_j a_j s / (2 (1 - a_j s)))``, so on
    ``|s| = r < 1/max(a)`` we get ``|c_w| <= M(r) r^-w``. The tail then reduces
    to an exponential-series remainder in ``y/r``. Unlike the envelope bound
    this does not grow with the peak of ``|d_w|``.
    """
    a = 1.0 / (2.0 * spec.lam)
    bsq = spec.b_sq
    a_max = float(np.max(a))
    log_c0 = log_c0_of(spec)
    log_thr = math.log(delta_f)
    best = None
    for t in np.linspace(0.05, 0.95, 19):
        r = t / a_max
        log_m = log_c0 + sum(
            -0.5 * math.log1p(-a[j] * r) + 0.5 * bsq[j] * a[j] * r / (1.0 + a[j] * r) for j in range(2)
        )
        x = y / r
        lead = log_m + math.log(r)
        W = max(INITIAL_DEGREE, int(math.ceil(x)))
        while True:
            k = W + 2
            if k + 1 > x:
                bound = lead + k * math.log(x) - math.lgamma(k + 1) - math.log1p(-x / (k + 1))
                if bound <= log_thr:
                    break
            W += 1
            if best is not None and W >= best:
                break
        if best is None or W < best:
            best = W
    if best > max_degree:
        raise DegreeCapExceeded(f"selected degree {best} exceeds cap {max_degree}")
    return best


def _series_args(spec: SpectralForm):
    a = 1.0 / (2.0 * spec.lam)
    return float(a[0]), float(a[1]), float(spec.b_sq[0]), float(spec.b_sq[1])


def series_sum(spec: SpectralForm, y: float, w_m: int, delta_f: float = DEFAULT_DELTA_F) -> SeriesSum:
    """Partial sum of the alternating series up to ``w_m`` with enough precision.

    A double-precision pass (compensated, log-magnitude terms) estimates the
    size of the terms; when cancellation would cost more than the target
    accuracy the sum is redone with the working precision raised to match.
    """
    if y <= 0:
        raise ValueError("y must be positive")
    if w_m < 1:
        raise ValueError("w_m must be >= 1")
    a1, a2, B1, B2 = _series_args(spec)
    raw, _log_max, log_sum = kernels.series_scan(a1, a2, B1, B2, float(y), int(w_m))
    if not math.isfinite(log_sum):
        raise SeriesOverflow("double-precision magnitude scan failed")
    # bits lost to cancellation plus bits of accuracy asked for
    need = log_sum / _LN2 + math.log2(1.0 / delta_f) + math.log2(w_m + 1)
    bits = 53
    if not math.isfinite(raw) or need + _DOUBLE_GUARD_BITS > 52.0:
        bits = int(math.ceil(max(need, 0.0) + _MP_GUARD_BITS))
        if bits > MAX_BITS:
            raise SeriesOverflow(f"series needs {bits} bits of precision")
        raw = kernels.series_mp(a1, a2, B1, B2, float(y), int(w_m), bits)
    return SeriesSum(
        value=min(1.0, max(0.0, raw)), raw=raw, degree=int(w_m), bits=bits, log_magnitude=log_sum
    )


def finite_cdf(spec: SpectralForm, y: float, w_m: int, delta_f: float = DEFAULT_DELTA_F) -> float:
    return series_sum(spec, y, w_m, delta_f).value


def three_delta_bounds(d: Gaussian2) -> tuple[float, float]:
    lam, _ = eig2(d.cov)
    dist = float(np.hypot(d.mean[0], d.mean[1]))
    spread = 3.0 * math.sqrt(max(lam[0], 0.0))
    return max(0.0, dist - spread), dist + spread


def _scaled(d: Gaussian2, rho: float, factor: float) -> tuple[Gaussian2, float]:
    root = math.sqrt(factor)
    return Gaussian2(root * d.mean, factor * d.cov), root * rho


def trace_rescale(d: Gaussian2, rho: float, threshold: float = 0.5) -> tuple[Gaussian2, float]:
    """Scale (cov, mean, rho) by (beta, sqrt(beta), sqrt(beta)) so lam_min becomes 1.

    The probability of ``||Delta|| <= rho`` is unchanged by the map.
    """
    lam, _ = eig2(validate_spd(d.cov))
    if lam[1] < threshold:
        return _scaled(d, rho, 1.0 / lam[1])
    return d, rho


def inverse_trace_rescale(
    d: Gaussian2,
    rho: float,
    y_cap: float = Y_CAP,
    lam_floor: float = 0.5,
    partial: bool = False,
) -> tuple[Gaussian2, float]:
    """Shrink (cov, mean, rho) so that ``rho^2 <= y_cap``.

    Raises :class:`CannotShrink` when the shrink would take ``lam_min`` to
    ``lam_floor`` or below. With ``partial=True`` the largest admissible shrink
    is applied instead.
    """
    y = rho * rho
    if y <= y_cap:
        return d, rho
    lam, _ = eig2(validate_spd(d.cov))
    gamma = y_cap / y
    if lam[1] * gamma > lam_floor:
        return _scaled(d, rho, gamma)
    if not partial:
        raise CannotShrink(f"shrink {gamma:.4g} takes lam_min {lam[1]:.4g} to {lam[1] * gamma:.4g}")
    gamma = lam_floor / lam[1]
    if gamma >= 1.0:
        return d, rho
    return _scaled(d, rho, gamma)


@dataclass(frozen=True)
class ApseSettings:
    delta_f: float = DEFAULT_DELTA_F
    three_delta: bool = True
    y_cap: float = Y_CAP
    max_degree: int = MAX_DEGREE
    trace_threshold: float = TRACE_THRESHOLD


def apse(
    d: Gaussian2,
    rho: float,
    delta_f: float = DEFAULT_DELTA_F,
    *,
    three_delta: bool = True,
    y_cap: float = Y_CAP,
    max_degree: int = MAX_DEGREE,
    trace_threshold: float = TRACE_THRESHOLD,
) -> ConnectionProbability:
    """Probability that ``||Delta|| <= rho`` for ``Delta ~ d``.

    The result is within ``delta_f`` of the infinite series unless the
    3-sigma short-circuit fired, in which case ``error_bound`` is 3e-3.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if not 0.0 < delta_f < 1.0:
        raise ValueError("delta_f must lie in (0, 1)")
    d = Gaussian2.spd(d.mean, d.cov)
    if three_delta:
        lo, hi = three_delta_bounds(d)
        if rho < lo:
            return ConnectionProbability(0.0, Method.APSE, 0, THREE_DELTA_ERROR, False)
        if rho > hi:
            return ConnectionProbability(1.0, Method.APSE, 0, THREE_DELTA_ERROR, False)
    work, r = trace_rescale(d, rho, threshold=trace_threshold)
    traced = work is not d
    if r * r > y_cap:
        work, r = inverse_trace_rescale(work, r, y_cap, lam_floor=trace_threshold, partial=True)
    spec = spectral_form(work)
    y = r * r
    scan = scan_d_peak(spec, cap=max_degree)
    try:
        w_m = adaptive_degree(spec, y, delta_f, scan, max_degree=max_degree)
    except DegreeCapExceeded:
        # the envelope bound scales with the peak |d_w|; fall back to a bound that does not
        w_m = cauchy_degree(spec, y, delta_f)
    total = series_sum(spec, y, w_m, delta_f)
    return ConnectionProbability(total.value, Method.APSE, w_m, delta_f, traced)


def apse_settings(d: Gaussian2, rho: float, settings: ApseSettings) -> ConnectionProbability:
    return apse(
        d,
        rho,
        settings.delta_f,
        three_delta=settings.three_delta,
        y_cap=settings.y_cap,
        max_degree=settings.max_degree,
        trace_threshold=settings.trace_threshold,
    )


__all__ = [
    "ApseSettings",
    "ConnectionProbability",
    "Method",
    "SeriesCoefficients",
    "SeriesSum",
    "adaptive_degree",
    "apse",
    "cauchy_degree",
    "coeff_c",
    "coeff_d",
    "e_series",
    "envelope",
    "finite_cdf",
    "g_tail",
    "inverse_trace_rescale",
    "min_degree_for_g",
    "scan_d_peak",
    "series_sum",
    "three_delta_bounds",
    "trace_rescale",
    "truncation_bound",
]
