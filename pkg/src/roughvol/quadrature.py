"""Gaussian quadrature with respect to singular power-law weights on finite
intervals.

The construction is the discretized Stieltjes procedure: the measure
w(x) dx on [a, b] is replaced by a composite Gauss-Legendre discretization
on geometric panels (the weight is analytic on every panel, so the
discretization error is far below double precision), the three-term
recurrence coefficients are computed by a Lanczos-type recurrence with full
reorthogonalization on the discrete measure, and nodes/weights come out of
the symmetric tridiagonal eigenproblem (Golub-Welsch). This avoids the
monomial-moment map, whose condition number grows like (b/a)^(2m) and which
breaks down in double precision long before m = 32.

For the fractional weight c_H x^(-H-1/2) the rule is scale covariant:
nodes on [la, lb] are l times the nodes on [a, b] and weights pick up
l^(1/2-H). gauss_rule exploits this by always solving on [1, b/a].
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import eigh_tridiagonal

from .specfun import gamma_fn

__all__ = [
    "WeightFunction",
    "QuadratureRule",
    "QuadratureBreakdownError",
    "fractional_weight",
    "general_weight",
    "fractional_moment",
    "gauss_rule",
]

MAX_LEVEL = 32


class QuadratureBreakdownError(RuntimeError):
    """Raised when the Jacobi-matrix construction loses positive definiteness
    (nonpositive recurrence norm, weights <= 0, or nodes escaping [a, b])."""


@dataclass(frozen=True)
class WeightFunction:
    """Integration weight on a positive interval.

    kind "fractional" is w(x) = c_H x^(-H-1/2); kind "general" wraps an
    arbitrary continuous nonnegative callable of type (gamma, delta), i.e.
    behaving like x^(-gamma) at 0 and integrable thanks to delta > 1/2.
    """

    kind: str
    gamma: float
    delta: float
    fn: Callable[[np.ndarray], np.ndarray]
    H: Optional[float] = None
    c: Optional[float] = None


def fractional_weight(H: float) -> WeightFunction:
    """Weight c_H x^(-H-1/2) with c_H = 1/(Gamma(H+1/2) Gamma(1/2-H))."""
    H = float(H)
    if not 0.0 < H < 0.5:
        raise ValueError("fractional weight requires H in (0, 1/2)")
    c = 1.0 / (gamma_fn(H + 0.5) * gamma_fn(0.5 - H))
    expo = H + 0.5

    def fn(x):
        return c * np.asarray(x, dtype=float) ** (-expo)

    return WeightFunction(kind="fractional", gamma=expo, delta=expo, fn=fn, H=H, c=c)


def general_weight(fn: Callable, gamma: float, delta: float) -> WeightFunction:
    """Wrap a general nonnegative weight of type (gamma, delta)."""
    gamma = float(gamma)
    delta = float(delta)
    if not gamma < 2.0:
        raise ValueError("general weight requires gamma < 2")
    if not 0.5 < delta < 1.5:
        raise ValueError("general weight requires delta in (1/2, 3/2)")
    return WeightFunction(kind="general", gamma=gamma, delta=delta, fn=fn)


@dataclass(frozen=True)
class QuadratureRule:
    """Level-m Gaussian rule on [a, b]: sum w_i f(x_i) ~ int_a^b f w dx."""

    interval: tuple
    level: int
    nodes: np.ndarray
    weights: np.ndarray


def fractional_moment(H: float, a: float, b: float, k: int) -> float:
    """Exact k-th moment int_a^b x^k c_H x^(-H-1/2) dx, in closed form.

    Written as c_H a^p expm1(p log(b/a))/p with p = k + 1/2 - H, which stays
    accurate when b/a is close to 1.
    """
    a = float(a)
    b = float(b)
    if a <= 0.0 or a >= b:
        raise ValueError("fractional_moment requires 0 < a < b")
    k = int(k)
    if k < 0:
        raise ValueError("fractional_moment requires k >= 0")
    c = 1.0 / (gamma_fn(H + 0.5) * gamma_fn(0.5 - H))
    p = k + 0.5 - H
    return c * a**p * np.expm1(p * np.log(b / a)) / p


@functools.lru_cache(maxsize=64)
def _gl(npoints: int):
    x, w = leggauss(npoints)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _discretize(fn, lo: float, hi: float, m: int, dense: bool):
    """Composite Gauss-Legendre discretization of fn(x) dx on [lo, hi]
    using geometric panels of ratio <= 1.25."""
    ratio = hi / lo
    npanels = max(1, int(np.ceil(np.log(ratio) / np.log(1.25))))
    npanels = min(npanels, 2000)
    npp = 2 * m + (32 if dense else 24)
    edges = lo * ratio ** (np.arange(npanels + 1) / npanels)
    gx, gw = _gl(npp)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    jac = (half[:, None] * gw[None, :]).ravel()
    mu = jac * fn(t)
    if np.any(mu < 0.0) or not np.all(np.isfinite(mu)):
        raise QuadratureBreakdownError("weight evaluated negative or non-finite")
    return t, mu


def _jacobi_from_discrete(t, mu, m: int):
    """Lanczos-type Stieltjes recurrence on the discrete measure (t, mu),
    with full reorthogonalization. Returns (alpha, beta, mu0)."""
    mu0 = float(np.sum(mu))
    if mu0 <= 0.0:
        raise QuadratureBreakdownError("total mass not positive")
    alpha = np.empty(m)
    beta = np.empty(max(m - 1, 0))
    q = np.empty((m, t.size))
    q[0] = 1.0 / np.sqrt(mu0)
    for k in range(m):
        alpha[k] = float(np.sum(mu * t * q[k] ** 2))
        if k == m - 1:
            break
        r = (t - alpha[k]) * q[k]
        if k > 0:
            r -= beta[k - 1] * q[k - 1]
        # full reorthogonalization: cheap at m <= 32 and keeps the
        # recurrence coefficients accurate to machine precision
        for j in range(k + 1):
            r -= np.sum(mu * r * q[j]) * q[j]
        nrm2 = float(np.sum(mu * r * r))
        if not nrm2 > 0.0 or not np.isfinite(nrm2):
            raise QuadratureBreakdownError(
                f"recurrence norm lost positivity at step {k + 1}"
            )
        beta[k] = np.sqrt(nrm2)
        q[k + 1] = r / beta[k]
    return alpha, beta, mu0


def _golub_welsch(alpha, beta, mu0):
    m = alpha.size
    if m == 1:
        return alpha.copy(), np.array([mu0])
    try:
        vals, vecs = eigh_tridiagonal(alpha, beta)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise QuadratureBreakdownError(str(exc)) from exc
    weights = mu0 * vecs[0, :] ** 2
    order = np.argsort(vals)
    return vals[order], weights[order]


def gauss_rule(w: WeightFunction, a: float, b: float, m: int) -> QuadratureRule:
    """Level-m Gaussian rule for the weight w on [a, b].

    Exact (to roundoff) for polynomials of degree <= 2m-1. Raises
    QuadratureBreakdownError when the construction degenerates; the caller
    should reduce m or split the interval.
    """
    a = float(a)
    b = float(b)
    m = int(m)
    if a <= 0.0 or a >= b:
        raise ValueError("gauss_rule requires 0 < a < b")
    if not 1 <= m <= MAX_LEVEL:
        raise ValueError(f"gauss_rule requires 1 <= m <= {MAX_LEVEL}")

    if w.kind == "fractional":
        # solve on [1, b/a] for the pure power weight, then rescale;
        # this makes scale covariance exact by construction
        r = b / a
        expo = w.gamma
        t, mu = _discretize(lambda u: u ** (-expo), 1.0, r, m, dense=False)
        alpha, beta, mu0 = _jacobi_from_discrete(t, mu, m)
        nodes_s, weights_s = _golub_welsch(alpha, beta, mu0)
        nodes = a * nodes_s
        weights = w.c * a ** (1.0 - expo) * weights_s
        lo_edge, hi_edge = a, a * r
    else:
        t, mu = _discretize(w.fn, a, b, m, dense=True)
        alpha, beta, mu0 = _jacobi_from_discrete(t, mu, m)
        nodes, weights = _golub_welsch(alpha, beta, mu0)
        lo_edge, hi_edge = a, b

    if not (
        np.all(np.diff(nodes) > 0.0)
        and nodes[0] > lo_edge
        and nodes[-1] < hi_edge
        and np.all(weights > 0.0)
    ):
        raise QuadratureBreakdownError(
            f"degenerate rule on [{a}, {b}] at level {m}"
        )
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(interval=(a, b), level=m, nodes=nodes, weights=weights)
