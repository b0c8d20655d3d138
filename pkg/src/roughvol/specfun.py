"""Special functions and Black-Scholes utilities used across the package.

All functions are pure and safe to call concurrently. lower_incomplete_gamma
is deliberately dtype-generic: the exact L2 error evaluation feeds it
np.longdouble arguments and must get longdouble precision back.
"""

from __future__ import annotations

import functools

import numpy as np
from scipy.special import gamma as _sp_gamma
from scipy.special import ndtr as _ndtr

__all__ = [
    "gamma_fn",
    "lower_incomplete_gamma",
    "bs_call",
    "implied_vol",
]

# gamma(s, x) is treated as fully saturated (= Gamma(s)) beyond this point;
# Q(s, 60) < 1e-23 for s <= 3, far below even longdouble resolution.
_SATURATION_X = 60.0


def gamma_fn(x):
    """Gamma function for positive arguments.

    Raises ValueError for x <= 0 (the reflection region is not needed
    anywhere in this package and poles make silent use dangerous).
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("gamma_fn requires x > 0")
    out = _sp_gamma(x)
    if out.ndim == 0:
        return float(out)
    return out


@functools.lru_cache(maxsize=64)
def _gamma_longdouble(s: float) -> np.longdouble:
    # One high-precision constant per s, parsed into extended precision.
    import mpmath

    with mpmath.workdps(40):
        return np.longdouble(mpmath.nstr(mpmath.gamma(mpmath.mpf(s)), 30))


def _gamma_same_dtype(s: float, dtype) -> np.number:
    if dtype == np.longdouble:
        return _gamma_longdouble(float(s))
    return dtype.type(_sp_gamma(float(s)))


def lower_incomplete_gamma(s, x):
    """Lower incomplete gamma gamma(s, x) = int_0^x t^(s-1) e^(-t) dt.

    s must be a positive scalar; x a nonnegative scalar or array. The result
    dtype follows x (float64 in, float64 out; longdouble in, longdouble out).

    Uses the ascending series

        gamma(s, x) = x^s e^(-x) sum_n x^n / (s (s+1) ... (s+n)),

    whose terms are all positive (no cancellation), and saturates to
    Gamma(s) once the upper tail is below working precision. Relative
    accuracy ~1e-14 in float64, ~1e-17 in longdouble.
    """
    s = float(s)
    if s <= 0.0:
        raise ValueError("lower_incomplete_gamma requires s > 0")
    x_arr = np.asarray(x)
    scalar = x_arr.ndim == 0
    dtype = x_arr.dtype if x_arr.dtype in (np.dtype(np.longdouble),) else np.dtype(float)
    x_arr = np.atleast_1d(x_arr).astype(dtype, copy=False)
    if np.any(x_arr < 0.0):
        raise ValueError("lower_incomplete_gamma requires x >= 0")

    out = np.empty_like(x_arr)
    sat = x_arr >= _SATURATION_X
    if np.any(sat):
        out[sat] = _gamma_same_dtype(s, dtype)

    active = ~sat
    if np.any(active):
        xa = x_arr[active]
        one = dtype.type(1.0)
        s_t = dtype.type(s)
        term = one / s_t
        total = np.full_like(xa, term)
        term_vec = np.full_like(xa, term)
        n = 0
        # series needs ~x + O(40) terms; 60 + 200 is a conservative cap
        while n < 400:
            n += 1
            term_vec = term_vec * xa / (s_t + n)
            total += term_vec
            if np.all(term_vec <= np.finfo(dtype).eps * total):
                break
        out[active] = np.power(xa, s_t) * np.exp(-xa) * total

    if scalar:
        return out[()] if out.ndim == 0 else out[0]
    return out


def bs_call(spot, strike, vol_total):
    """Undiscounted Black-Scholes call price with total volatility sigma*sqrt(T).

    vol_total = 0 returns the intrinsic value max(spot - strike, 0).
    spot scalar, strike/vol_total broadcastable.
    """
    spot_arr = np.asarray(spot, dtype=float)
    strike_arr = np.asarray(strike, dtype=float)
    vt = np.asarray(vol_total, dtype=float)
    if np.any(spot_arr <= 0.0) or np.any(strike_arr <= 0.0):
        raise ValueError("bs_call requires positive spot and strike")
    if np.any(vt < 0.0):
        raise ValueError("bs_call requires vol_total >= 0")

    spot_b, strike_b, vt_b = np.broadcast_arrays(spot_arr, strike_arr, vt)
    out = np.maximum(spot_b - strike_b, 0.0).astype(float)
    pos = vt_b > 0.0
    if np.any(pos):
        S, K, v = spot_b[pos], strike_b[pos], vt_b[pos]
        d1 = np.log(S / K) / v + 0.5 * v
        d2 = d1 - v
        out = np.array(out, copy=True)
        out[pos] = S * _ndtr(d1) - K * _ndtr(d2)
    if out.ndim == 0 or (np.isscalar(spot) and np.isscalar(strike) and np.isscalar(vol_total)):
        return float(out.reshape(-1)[0]) if out.size == 1 else out
    return out


_VOL_LO = 1e-8
_VOL_HI = 10.0


def implied_vol(price, spot, strike, maturity):
    """Black-Scholes implied volatility by safeguarded Newton.

    Solves bs_call(spot, strike, sigma*sqrt(maturity)) = price for sigma in
    [1e-8, 10], bisecting whenever the Newton step leaves the bracket.
    Raises ValueError when price violates the arbitrage bounds
    intrinsic <= price <= spot.
    """
    price = float(price)
    spot = float(spot)
    strike = float(strike)
    maturity = float(maturity)
    if spot <= 0.0 or strike <= 0.0 or maturity <= 0.0:
        raise ValueError("implied_vol requires positive spot, strike, maturity")
    intrinsic = max(spot - strike, 0.0)
    slack = 1e-12 * spot
    if price < intrinsic - slack or price > spot + slack:
        raise ValueError(
            f"price {price} outside arbitrage bounds [{intrinsic}, {spot}]"
        )
    if price <= intrinsic + slack:
        return 0.0

    sqrt_t = np.sqrt(maturity)
    lo, hi = _VOL_LO, _VOL_HI
    f_lo = bs_call(spot, strike, lo * sqrt_t) - price
    f_hi = bs_call(spot, strike, hi * sqrt_t) - price
    if f_hi < 0.0:
        # price needs sigma > 10; cap at the bracket edge
        return _VOL_HI
    if f_lo > 0.0:
        return _VOL_LO

    # Brenner-Subrahmanyam starting guess, clipped into the bracket
    sigma = float(np.clip(np.sqrt(2.0 * np.pi / maturity) * price / spot, 1e-4, 5.0))
    for _ in range(100):
        vt = sigma * sqrt_t
        f = bs_call(spot, strike, vt) - price
        if abs(f) <= 1e-12:
            return sigma
        if f > 0.0:
            hi = sigma
        else:
            lo = sigma
        d1 = np.log(spot / strike) / vt + 0.5 * vt
        vega = spot * np.exp(-0.5 * d1 * d1) / np.sqrt(2.0 * np.pi) * sqrt_t
        if vega > 1e-14:
            candidate = sigma - f / vega
        else:
            candidate = 0.5 * (lo + hi)
        if not (lo < candidate < hi):
            candidate = 0.5 * (lo + hi)
        sigma = candidate
    return sigma
