"""Sum-of-exponentials approximations of the fractional kernel
G(t) = t^(H-1/2)/Gamma(H+1/2).

A geometric Gaussian rule of type (H, N, alpha, beta, a, b) places level-m
Gaussian quadrature rules (w.r.t. the Laplace weight c_H x^(-H-1/2)) on n
geometrically spaced intervals [xi_i, xi_{i+1}] and prepends the zero node
x_0 = 0. Three named parameterizations are provided: thm31 (a = b = 1),
thm33 (optimized closed-form a, b), and learned (regression-fitted
constants with alpha = 1.8, beta = 0.9).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad as _quad

from .quadrature import (
    WeightFunction,
    fractional_weight,
    gauss_rule,
)
from .specfun import gamma_fn

__all__ = [
    "ALPHA",
    "BETA",
    "LEARNED_ALPHA",
    "LEARNED_BETA",
    "A_H",
    "FractionalKernel",
    "GeometricRuleParams",
    "ExpKernelApprox",
    "geometric_gaussian_rule",
    "thm31_rule",
    "thm33_rule",
    "thm33_ab",
    "learned_rule",
    "learned_xi",
    "general_kernel_rule",
    "w0_optimal",
    "eval_hatG",
    "eval_G",
    "write_nodes_csv",
]

# rate constants of the geometric rules
ALPHA = 1.06418
BETA = 0.4275

# regression-fitted counterparts
LEARNED_ALPHA = 1.8
LEARNED_BETA = 0.9

H_MIN = 0.01
H_MAX = 0.49


def _check_H(H: float) -> float:
    H = float(H)
    if not H_MIN <= H <= H_MAX:
        raise ValueError(f"H must lie in [{H_MIN}, {H_MAX}], got {H}")
    return H


def A_H(H: float) -> float:
    """A = (1/H + 1/(3/2 - H))^(1/2)."""
    return math.sqrt(1.0 / H + 1.0 / (1.5 - H))


@dataclass(frozen=True)
class FractionalKernel:
    """The kernel G(t) = t^(H-1/2)/Gamma(H+1/2) and its derived constants."""

    H: float
    c_H: float = field(init=False)
    A: float = field(init=False)
    gamma_half: float = field(init=False)  # Gamma(H + 1/2)

    def __post_init__(self):
        H = _check_H(self.H)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "gamma_half", gamma_fn(H + 0.5))
        object.__setattr__(
            self, "c_H", 1.0 / (self.gamma_half * gamma_fn(0.5 - H))
        )
        object.__setattr__(self, "A", A_H(H))

    def __call__(self, t):
        return eval_G(self, t)


def eval_G(kernel: FractionalKernel, t):
    """Pointwise kernel value t^(H-1/2)/Gamma(H+1/2), t > 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise ValueError("eval_G requires t > 0")
    out = t ** (kernel.H - 0.5) / kernel.gamma_half
    return float(out) if out.ndim == 0 else out


def _round_m(m_real: float, mode: str) -> int:
    if mode == "up":
        return max(1, int(math.ceil(m_real - 1e-12)))
    if mode == "nearest":
        return max(1, int(math.floor(m_real + 0.5)))
    raise ValueError(f"unknown m rounding mode {mode!r}")


@dataclass
class GeometricRuleParams:
    """Parameters (H, N, alpha, beta, a, b) of a geometric Gaussian rule plus
    the derived quadrature level m, interval count n, and endpoints xi_0, xi_n.

    n is chosen so that n*m is as close as possible to N; m rounding is
    "up" (theorem rules) or "nearest" (learned rule).
    """

    H: float
    N: int
    alpha: float = ALPHA
    beta: float = BETA
    a: float = 1.0
    b: float = 1.0
    m_rounding: str = "up"
    m: int = field(init=False)
    n: int = field(init=False)
    xi0: float = field(init=False)
    xin: float = field(init=False)

    def __post_init__(self):
        self.H = _check_H(self.H)
        self.N = int(self.N)
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if min(self.alpha, self.beta, self.a, self.b) <= 0.0:
            raise ValueError("alpha, beta, a, b must be positive")
        A = A_H(self.H)
        sqN = math.sqrt(self.N)
        self.m = _round_m(self.beta / A * sqN, self.m_rounding)
        self.n = max(1, int(math.floor(self.N / self.m + 0.5)))
        self.xi0 = self.a * math.exp(-self.alpha * sqN / ((1.5 - self.H) * A))
        self.xin = self.b * math.exp(self.alpha * sqN / (self.H * A))
        if not self.xi0 < self.xin:
            raise ValueError("degenerate geometry: xi0 >= xin")

    def xi(self) -> np.ndarray:
        """Geometric interval endpoints xi_0 ... xi_n."""
        i = np.arange(self.n + 1)
        return self.xi0 * (self.xin / self.xi0) ** (i / self.n)


@dataclass
class ExpKernelApprox:
    """Approximation hatG(t) = sum_i w_i exp(-x_i t), x_0 = 0 first.

    nodes and weights include the zero node; positive Gaussian nodes follow
    in increasing order. w0 is the Riemann value c_H/(1/2-H) xi_0^(1/2-H)
    under the default rule or the error-minimizing value (w0_optimal).
    """

    H: float
    nodes: np.ndarray
    weights: np.ndarray
    provenance: str = "custom"
    N_requested: Optional[int] = None
    params: Optional[GeometricRuleParams] = None
    w0_mode: str = "riemann"

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights must have equal length")
        if self.nodes.size == 0 or self.nodes[0] != 0.0:
            raise ValueError("first node must be x_0 = 0")
        if np.any(np.diff(self.nodes) <= 0.0):
            raise ValueError("nodes must be strictly increasing")

    @property
    def K(self) -> int:
        """Number of positive nodes."""
        return self.nodes.size - 1

    def eval(self, t):
        return eval_hatG(self, t)


def eval_hatG(approx: ExpKernelApprox, t):
    """Pointwise hatG(t) = sum w_i exp(-x_i t). Completely monotone in t
    whenever all weights are nonnegative."""
    t = np.asarray(t, dtype=float)
    out = np.exp(-np.multiply.outer(t, approx.nodes)) @ approx.weights
    return float(out) if out.ndim == 0 else out


def w0_optimal(approx_or_nodes, T: float, H: Optional[float] = None) -> float:
    """Error-minimizing zero-node weight.

    The exact L2 error is a quadratic polynomial in w_0; its vertex is
    w_0* = (T^(H+1/2)/Gamma(H+3/2) - sum_{i>=1} w_i (1-exp(-x_i T))/x_i)/T.
    Accepts an ExpKernelApprox (w_0 ignored) or positive node/weight arrays.
    """
    if isinstance(approx_or_nodes, ExpKernelApprox):
        H = approx_or_nodes.H
        x = approx_or_nodes.nodes[1:]
        w = approx_or_nodes.weights[1:]
    else:
        x, w = approx_or_nodes
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        if H is None:
            raise ValueError("H required when passing raw node arrays")
    if np.any(x <= 0.0):
        raise ValueError("w0_optimal requires strictly positive nodes")
    T = float(T)
    lead = T ** (H + 0.5) / gamma_fn(H + 1.5)
    if x.size:
        lead -= float(np.sum(w * (-np.expm1(-x * T)) / x))
    return lead / T


def geometric_gaussian_rule(
    params: GeometricRuleParams,
    w0: str = "riemann",
    T: Optional[float] = None,
    provenance: str = "custom",
) -> ExpKernelApprox:
    """Assemble the sum-of-exponentials rule for the given geometry.

    Concatenates level-m Gaussian rules on [xi_i, xi_{i+1}] and prepends
    (x_0, w_0) = (0, c_H/(1/2-H) xi_0^(1/2-H)) (w0="riemann") or the
    error-minimizing weight (w0="optimal", requires T). All intervals share
    the ratio xi_{i+1}/xi_i, so a single base solve on [1, ratio] is
    rescaled per interval (exact for the homogeneous fractional weight).
    """
    weight = fractional_weight(params.H)
    xi = params.xi()
    ratio = (params.xin / params.xi0) ** (1.0 / params.n)
    base = gauss_rule(weight, 1.0, ratio, params.m)
    scale_pow = 0.5 - params.H
    nodes = (xi[:-1, None] * base.nodes[None, :]).ravel()
    weights = (xi[:-1, None] ** scale_pow * base.weights[None, :]).ravel()

    if w0 == "riemann":
        w0_val = weight.c / (0.5 - params.H) * params.xi0 ** (0.5 - params.H)
    elif w0 == "optimal":
        if T is None:
            raise ValueError("w0='optimal' requires the horizon T")
        w0_val = w0_optimal((nodes, weights), T, H=params.H)
    else:
        raise ValueError(f"unknown w0 mode {w0!r}")

    return ExpKernelApprox(
        H=params.H,
        nodes=np.concatenate([[0.0], nodes]),
        weights=np.concatenate([[w0_val], weights]),
        provenance=provenance,
        N_requested=params.N,
        params=params,
        w0_mode=w0,
    )


def thm31_rule(H: float, N: int, w0: str = "riemann", T: Optional[float] = None) -> ExpKernelApprox:
    """Geometric rule of type (H, N, 1.06418, 0.4275, 1, 1), m rounded up."""
    params = GeometricRuleParams(H=H, N=N, alpha=ALPHA, beta=BETA, a=1.0, b=1.0, m_rounding="up")
    return geometric_gaussian_rule(params, w0=w0, T=T, provenance="thm31")


def thm33_ab(H: float, N: int, T: float) -> tuple:
    """Closed-form interval prefactors (a, b) of the constant-optimized rule."""
    H = _check_H(H)
    A = A_H(H)
    eab = math.exp(ALPHA * BETA)
    gam = 1.0 / (3.0 * eab / (8.0 * (eab - 1.0)) + 6.0 * H - 4.0 * H * H)
    first = ((9.0 - 6.0 * H) / (2.0 * H)) ** (eab / (8.0 * (eab - 1.0)))
    pi3 = math.pi**3
    fac_a = (
        5.0 * pi3 / 768.0 * eab * (eab - 1.0)
        * A ** (2.0 - 2.0 * H) * (3.0 - 2.0 * H)
        / (BETA ** (2.0 - 2.0 * H) * H)
        * N ** (1.0 - H)
    ) ** (2.0 * H)
    fac_b = (
        5.0 * pi3 / 1152.0 * eab * (eab - 1.0)
        * A ** (2.0 - 2.0 * H)
        / BETA ** (2.0 - 2.0 * H)
        * N ** (1.0 - H)
    ) ** (2.0 * H - 3.0)
    a = (first * fac_a) ** gam / T
    b = (first * fac_b) ** gam / T
    return a, b


def thm33_rule(H: float, N: int, T: float, w0: str = "riemann") -> ExpKernelApprox:
    """Constant-optimized geometric rule with closed-form a(H,N,T), b(H,N,T),
    m rounded up. Accepts N >= 1 (the formulas are well defined there and the
    reference tables include N = 1)."""
    a, b = thm33_ab(H, int(N), float(T))
    params = GeometricRuleParams(H=H, N=N, alpha=ALPHA, beta=BETA, a=a, b=b, m_rounding="up")
    return geometric_gaussian_rule(params, w0=w0, T=T, provenance="thm33")


def learned_xi(H: float, N: int, T: float) -> tuple:
    """Regression-fitted interval endpoints (xi_0, xi_n)."""
    H = _check_H(H)
    A = A_H(H)
    sqN = math.sqrt(N)
    xi0 = 0.65 / T * math.exp(3.1 * H) * math.exp(-LEARNED_ALPHA * sqN / ((1.5 - H) * A))
    xin = 1.0 / T * math.exp(3.0 * H ** -0.4) * math.exp(LEARNED_ALPHA * sqN / (H * A))
    return xi0, xin


def learned_rule(H: float, N: int, T: float) -> ExpKernelApprox:
    """Geometric rule with the regression-fitted parameters
    xi_0 = 0.65 T^-1 e^(3.1H) exp(-1.8 sqrt(N)/((3/2-H)A)),
    xi_n = T^-1 e^(3 H^-0.4) exp(1.8 sqrt(N)/(H A)),
    m = (0.9/A) sqrt(N) rounded to the nearest positive integer,
    and the error-minimizing w_0.
    """
    H = _check_H(H)
    T = float(T)
    a = 0.65 / T * math.exp(3.1 * H)
    b = 1.0 / T * math.exp(3.0 * H ** -0.4)
    params = GeometricRuleParams(
        H=H, N=N, alpha=LEARNED_ALPHA, beta=LEARNED_BETA, a=a, b=b, m_rounding="nearest"
    )
    return geometric_gaussian_rule(params, w0="optimal", T=T, provenance="learned")


def general_kernel_rule(
    w: WeightFunction,
    N: int,
    alpha: float = ALPHA,
    beta: float = BETA,
) -> ExpKernelApprox:
    """Geometric Gaussian rule for a general completely monotone kernel of
    type (gamma, delta): A = (1/(delta-1/2) + 1/(2-gamma))^(1/2),
    xi_0 = exp(-alpha sqrt(N)/((2-gamma)A)), xi_n = exp(alpha sqrt(N)/((delta-1/2)A)),
    per-interval moments integrated numerically.

    The zero-node weight is int_0^xi0 w(x) dx (computed adaptively) when the
    singularity is integrable (gamma < 1), else 0.
    """
    if not 0.5 < w.delta < 1.5:
        raise ValueError("general rule requires delta in (1/2, 3/2)")
    if not w.gamma < 2.0:
        raise ValueError("general rule requires gamma < 2")
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    A = math.sqrt(1.0 / (w.delta - 0.5) + 1.0 / (2.0 - w.gamma))
    sqN = math.sqrt(N)
    m = max(1, int(math.ceil(beta / A * sqN - 1e-12)))
    n = max(1, int(math.floor(N / m + 0.5)))
    xi0 = math.exp(-alpha * sqN / ((2.0 - w.gamma) * A))
    xin = math.exp(alpha * sqN / ((w.delta - 0.5) * A))
    xi = xi0 * (xin / xi0) ** (np.arange(n + 1) / n)

    nodes = []
    weights = []
    for i in range(n):
        rule = gauss_rule(w, xi[i], xi[i + 1], m)
        nodes.append(rule.nodes)
        weights.append(rule.weights)

    if w.gamma < 1.0:
        w0_val, _ = _quad(w.fn, 0.0, xi0, epsabs=1e-12, epsrel=1e-10, limit=200)
    else:
        w0_val = 0.0

    if w.kind == "fractional":
        H = w.H
    else:
        # only used for bookkeeping; general kernels have no Hurst index
        H = min(max(w.delta - 0.5, H_MIN), H_MAX)

    return ExpKernelApprox(
        H=H,
        nodes=np.concatenate([[0.0], *nodes]),
        weights=np.concatenate([[w0_val], *weights]),
        provenance="general",
        N_requested=N,
    )


def write_nodes_csv(approx: ExpKernelApprox, fh) -> None:
    """Node-set CSV: header i,x,w; one row per node; 17 significant digits."""
    close = False
    if isinstance(fh, (str, bytes)):
        fh = open(fh, "w", newline="")
        close = True
    try:
        fh.write("i,x,w\n")
        for i, (x, wv) in enumerate(zip(approx.nodes, approx.weights)):
            fh.write(f"{i},{x:.17g},{wv:.17g}\n")
    finally:
        if close:
            fh.close()
