"""One-parameter Mittag-Leffler function ``E_alpha(z)`` on the negative real axis.

Three regimes:

* ``|z| <= 5``: power series ``sum z**n / Gamma(alpha n + 1)``.  When the largest term
  is big enough for cancellation to cost accuracy the series is summed in
  double-double arithmetic, or with mpmath at a precision sized from that term.
* ``z <= -40``: asymptotic series ``-sum_{k>=1} z**(-k) / Gamma(1 - alpha k)``.
* in between: ``E_alpha(-x) = sin(pi a)/(pi a) * int_0^inf exp(-(u x)**(1/a)) / (u**2 + 2u cos(pi a) + 1) du``,
  a smooth form of the complete-monotonicity representation.
"""
from __future__ import annotations

import functools
import math

import mpmath
import numpy as np
from scipy import integrate
from scipy.special import gammaln, rgamma

__all__ = ["mittag_leffler", "SERIES_RADIUS", "ASYMPTOTIC_START"]

SERIES_RADIUS = 5.0
ASYMPTOTIC_START = 40.0
_TERM_FLOOR = 1e-17
# largest series term tolerated in plain double precision
_CANCEL_LIMIT = 1e2
# log10 of the largest peak term double-double summation absorbs (about 32 digits)
_DD_PEAK_LIMIT = 17.0


def _check_alpha(alpha):
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")


@functools.lru_cache(maxsize=64)
def _series_plan(alpha: float, radius: float):
    """Number of terms and log10 of the peak term for ``|z| = radius``."""
    size = 256
    while True:
        n = np.arange(size)
        logt = n * math.log(radius) - gammaln(alpha * n + 1)
        peak = int(np.argmax(logt))
        tail = np.flatnonzero((n > peak) & (logt < math.log(_TERM_FLOOR)))
        if tail.size:
            return int(tail[0]) + 1, float(logt[peak] / math.log(10))
        size *= 2


@functools.lru_cache(maxsize=16)
def _mp_coeffs(alpha: float, nterms: int, prec: int):
    with mpmath.workprec(prec):
        a = mpmath.mpf(alpha)
        return tuple(mpmath.rgamma(a * k + 1) for k in range(nterms))


@functools.lru_cache(maxsize=16)
def _dd_coeffs(alpha: float, nterms: int):
    """``1/Gamma(alpha k + 1)`` split into double-double (hi, lo) pairs."""
    coeffs = _mp_coeffs(alpha, nterms, 160)
    hi = np.array([float(c) for c in coeffs])
    with mpmath.workprec(160):
        lo = np.array([float(c - mpmath.mpf(h)) for c, h in zip(coeffs, hi)])
    return hi, lo


_SPLIT = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _two_prod(a, b):
    p = a * b
    t = _SPLIT * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLIT * b
    bh = t - (t - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_horner(hi, lo, z):
    """Horner evaluation in double-double arithmetic, vectorized over ``z``."""
    sh = np.full_like(z, hi[-1])
    sl = np.full_like(z, lo[-1])
    for ch, cl in zip(hi[-2::-1], lo[-2::-1]):
        p, e = _two_prod(sh, z)
        e = e + sl * z
        s, f = _two_sum(p, ch)
        f = f + e + cl
        sh = s + f
        sl = f - (sh - s)
    return sh + sl


def _series(alpha: float, z: np.ndarray) -> np.ndarray:
    if z.size == 0:
        return np.empty_like(z)
    radius = float(np.max(np.abs(z)))
    nterms, log_peak = _series_plan(alpha, max(radius, 1e-300))
    if log_peak <= math.log10(_CANCEL_LIMIT):
        k = np.arange(nterms)
        coef = np.exp(-gammaln(alpha * k + 1))
        term = np.ones_like(z)
        acc = np.zeros_like(z)
        for j in range(nterms):
            acc += coef[j] * term
            term = term * z
        return acc
    if log_peak <= _DD_PEAK_LIMIT:
        hi, lo = _dd_coeffs(alpha, nterms)
        return _dd_horner(hi, lo, z)
    # extended precision: enough bits to absorb the peak term plus a margin
    prec = 53 + int(math.ceil(log_peak * math.log2(10))) + 24
    coeffs = _mp_coeffs(alpha, nterms, prec)
    out = np.empty_like(z)
    with mpmath.workprec(prec):
        for i, zi in enumerate(z):
            x = mpmath.mpf(float(zi))
            s = mpmath.mpf(0)
            for c in reversed(coeffs):
                s = s * x + c
            out[i] = float(s)
    return out


def _asymptotic(alpha: float, z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z)
    for i, zi in enumerate(z):
        s = 0.0
        prev = np.inf
        for k in range(1, 200):
            term = -(zi ** -k) * rgamma(1.0 - alpha * k)
            mag = abs(term)
            if mag > prev and mag > 0:
                break  # optimal truncation
            s += term
            if mag != 0 and mag < _TERM_FLOOR:
                break
            if mag:
                prev = mag
        out[i] = s
    return out


def _integral(alpha: float, z: np.ndarray) -> np.ndarray:
    if alpha == 1.0:
        return np.exp(z)
    out = np.empty_like(z)
    c = math.cos(math.pi * alpha)
    pref = math.sin(math.pi * alpha) / (math.pi * alpha)
    inv_a = 1.0 / alpha
    for i, zi in enumerate(z):
        x = -float(zi)
        if x == 0.0:
            out[i] = 1.0
            continue

        def f(u):
            return math.exp(-((u * x) ** inv_a)) / (u * u + 2.0 * u * c + 1.0)

        umax = 50.0 ** alpha / x
        cuts = sorted({0.0, *(p for p in (1.0 / x, 1.0) if p < umax), umax})
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            val, _ = integrate.quad(f, lo, hi, epsabs=1e-15, epsrel=1e-13, limit=200)
            total += val
        out[i] = pref * total
    return out


_METHODS = {"series": _series, "asymptotic": _asymptotic, "integral": _integral}


def mittag_leffler(alpha: float, z, method: str | None = None):
    """``E_alpha(z)`` for ``0 < alpha <= 1`` and real ``z <= 0``.

    ``method`` forces one regime (``"series"``, ``"integral"``, ``"asymptotic"``); by
    default the regime follows ``|z|``.  Absolute error is below 1e-10.
    """
    _check_alpha(alpha)
    alpha = float(alpha)
    zarr = np.asarray(z, dtype=np.float64)
    if np.any(zarr > 0) or np.any(~np.isfinite(zarr)):
        raise ValueError("mittag_leffler supports finite real z <= 0 only")
    flat = zarr.reshape(-1)
    out = np.empty_like(flat)
    if method is not None:
        out[:] = _METHODS[method](alpha, flat)
    elif alpha == 1.0:
        out[:] = np.exp(flat)
    else:
        x = -flat
        regimes = (
            (x <= SERIES_RADIUS, _series),
            ((x > SERIES_RADIUS) & (x < ASYMPTOTIC_START), _integral),
            (x >= ASYMPTOTIC_START, _asymptotic),
        )
        for mask, fn in regimes:
            if np.any(mask):
                out[mask] = fn(alpha, flat[mask])
    out = out.reshape(zarr.shape)
    return float(out) if out.ndim == 0 else out
