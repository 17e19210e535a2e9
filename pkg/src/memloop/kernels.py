"""Kernel synthesis and analysis: Lagrange weights, loop kernels, time- and
Laplace-domain evaluation, moments, and positivity certificates.
"""

from __future__ import annotations

import math
import warnings
from typing import NamedTuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from numpy.polynomial.legendre import leggauss

from .core import (
    CoincidentRates,
    DimensionTooLarge,
    DomainError,
    ExpPolyKernel,
    LoopGenerator,
    LoopKernel,
    RationalFunction,
    ZeroMass,
    any_rates_coincident,
    validate_loop,
)

# Relative rate separation below which the Lagrange product is ill-conditioned.
_CONDITION_WARN_RTOL = 1e-4


class NearCoincidentRates(UserWarning):
    """Return rates are close enough that Lagrange weights lose accuracy."""


def lagrange_psi(b, j: int) -> np.ndarray:
    """Weights psi_i^j = prod_{k<=j, k != i} b_k / (b_k - b_i) for i = 1..j.

    They convert the product transform prod_{i<=j} b_i/(lambda+b_i) into the
    exponential sum sum_i psi_i^j b_i/(lambda+b_i) and always sum to 1.
    """
    b = np.asarray(b, float)
    if not 1 <= j <= len(b):
        raise DomainError(f"component index must be in 1..{len(b)}, got {j}")
    head = b[:j]
    if any_rates_coincident(head):
        raise CoincidentRates(f"return rates {head.tolist()} are not pairwise distinct")
    if j > 1:
        gaps = np.abs(head[:, None] - head[None, :])
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() < _CONDITION_WARN_RTOL * head.max():
            warnings.warn(
                "nearly coincident return rates: Lagrange weights are "
                "ill-conditioned",
                NearCoincidentRates,
                stacklevel=2,
            )
    psi = np.empty(j)
    for i in range(j):
        others = np.delete(head, i)
        psi[i] = np.prod(others / (others - head[i]))
    return psi


def loop_kernel(gen: LoopGenerator) -> LoopKernel:
    """Structured kernel K(t) = sum_j a_j K_j(t) synthesized from a loop chain.

    Use ``.flatten()`` on the result for the plain exponential-sum form and
    ``.component(j)`` for the unit-mass kernel of a single loop.
    """
    validate_loop(gen)
    if any_rates_coincident(gen.b):
        raise CoincidentRates(
            f"return rates {gen.b.tolist()} are not pairwise distinct"
        )
    n = gen.n_loops
    psi = np.zeros((n, n))
    for j in range(1, n + 1):
        psi[j - 1, :j] = lagrange_psi(gen.b, j)
    return LoopKernel(gen, psi)


def kernel_eval(K: ExpPolyKernel, t):
    """Evaluate sum_i c_i t^{k_i} e^{-alpha_i t} with compensated summation."""
    t_arr = np.asarray(t, float)
    scalar = t_arr.ndim == 0
    pts = np.atleast_1d(t_arr)
    if np.any(pts < 0):
        raise DomainError("kernels are defined for t >= 0")
    if not K.terms:
        out = np.zeros_like(pts)
        return float(out[0]) if scalar else out
    contrib = np.empty((len(K.terms), len(pts)))
    for row, (c, alpha, k) in enumerate(K.terms):
        contrib[row] = c * pts**k * np.exp(-alpha * pts)
    out = np.array([math.fsum(col) for col in contrib.T])
    return float(out[0]) if scalar else out


def kernel_laplace(K: ExpPolyKernel) -> RationalFunction:
    """Transform k(lambda) = sum_i c_i k_i! / (lambda + alpha_i)^{k_i + 1},
    combined over the common denominator."""
    if not K.terms:
        return RationalFunction(np.zeros(1), np.ones(1))
    factors = [
        npoly.polypow([alpha, 1.0], k + 1) for _, alpha, k in K.terms
    ]
    den = np.ones(1)
    for f in factors:
        den = npoly.polymul(den, f)
    num = np.zeros(1)
    for i, (c, _, k) in enumerate(K.terms):
        term = np.array([c * math.factorial(k)])
        for j, f in enumerate(factors):
            if j != i:
                term = npoly.polymul(term, f)
        num = npoly.polyadd(num, term)
    return RationalFunction(num, den)


class Moments(NamedTuple):
    mass: float
    mean_time: float


def moments(K: ExpPolyKernel) -> Moments:
    """Mass int K = k(0) and mean time -k'(0)/k(0), both analytic:
    int t^k e^{-alpha t} = k! / alpha^{k+1}."""
    masses = [c * math.factorial(k) / alpha ** (k + 1) for c, alpha, k in K.terms]
    firsts = [c * math.factorial(k + 1) / alpha ** (k + 2) for c, alpha, k in K.terms]
    mass = math.fsum(masses)
    scale = math.fsum(abs(m) for m in masses)
    if mass == 0.0 or abs(mass) < 1e-14 * scale:
        raise ZeroMass("kernel mass vanishes; mean time undefined")
    return Moments(mass, math.fsum(firsts) / mass)


# ---------------------------------------------------------------------------
# positivity


def _diff_terms(terms):
    """d/dt of an exponential-polynomial term list, merged."""
    out = {}
    for c, alpha, k in terms:
        if k > 0:
            key = (alpha, k - 1)
            out[key] = out.get(key, 0.0) + c * k
        key = (alpha, k)
        out[key] = out.get(key, 0.0) - c * alpha
    return tuple((c, alpha, k) for (alpha, k), c in out.items() if c != 0.0)


def _eval_terms(terms, t):
    t = np.asarray(t, float)
    total = np.zeros_like(t, dtype=float)
    for c, alpha, k in terms:
        total = total + c * t**k * np.exp(-alpha * t)
    return total


def minimize_exp_poly(terms, t_hi: float, t_lo: float = 0.0, n_grid: int = 2048):
    """Global minimum of sum c_i t^{k_i} e^{-alpha_i t} on [t_lo, t_hi].

    Dense grid (linear head, log-spaced tail) plus Newton refinement on the
    derivative, safeguarded by golden-section search when Newton strays.
    Returns ``(min_value, argmin)``.  Decay rates may be negative here; the
    search itself only needs a finite window.
    """
    if t_hi <= t_lo:
        raise DomainError("empty search window")
    head = np.linspace(t_lo, t_lo + 0.125 * (t_hi - t_lo), n_grid // 2)
    tail_start = max(head[-1], t_lo + 1e-12 * (t_hi - t_lo))
    tail = np.geomspace(tail_start, t_hi, n_grid - n_grid // 2) if tail_start > 0 \
        else np.linspace(head[-1], t_hi, n_grid - n_grid // 2)
    grid = np.unique(np.concatenate([head, tail]))
    vals = _eval_terms(terms, grid)
    best = int(np.argmin(vals))
    if best in (0, len(grid) - 1):
        lo = grid[max(best - 1, 0)]
        hi = grid[min(best + 1, len(grid) - 1)]
    else:
        lo, hi = grid[best - 1], grid[best + 1]

    d1 = _diff_terms(terms)
    d2 = _diff_terms(d1)
    t = grid[best]
    converged = False
    if 0 < best < len(grid) - 1:
        for _ in range(60):
            g = float(_eval_terms(d1, t))
            gg = float(_eval_terms(d2, t))
            if gg == 0.0:
                break
            step = g / gg
            t_new = t - step
            if not lo <= t_new <= hi:
                break
            if abs(step) <= 1e-14 * (1.0 + abs(t_new)):
                t = t_new
                converged = True
                break
            t = t_new
    if not converged:
        # golden-section fallback inside the bracket
        phi = (math.sqrt(5.0) - 1.0) / 2.0
        x1 = hi - phi * (hi - lo)
        x2 = lo + phi * (hi - lo)
        f1, f2 = float(_eval_terms(terms, x1)), float(_eval_terms(terms, x2))
        for _ in range(90):
            if f1 <= f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - phi * (hi - lo)
                f1 = float(_eval_terms(terms, x1))
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + phi * (hi - lo)
                f2 = float(_eval_terms(terms, x2))
        t = 0.5 * (lo + hi)
    candidates = np.array([grid[best], t])
    cand_vals = _eval_terms(terms, candidates)
    pick = int(np.argmin(cand_vals))
    return float(cand_vals[pick]), float(candidates[pick])


class PositivityReport(NamedTuple):
    positive: bool
    min_value: float
    argmin: float


def positivity_check(K: ExpPolyKernel, horizon: float | None = None) -> PositivityReport:
    """Decide K >= 0 by locating the global minimum on [0, horizon].

    The tail beyond the horizon is controlled analytically: the slowest-
    decaying term dominates there, so its coefficient sign settles the sign
    of K at large times.  When that coefficient is negative a witness point
    beyond the horizon is reported.
    """
    if not K.terms:
        return PositivityReport(True, 0.0, 0.0)
    if horizon is None:
        horizon = 50.0 / K.min_rate
    if horizon <= 0:
        raise DomainError("horizon must be positive")
    c_max = max(abs(c) for c, _, _ in K.terms)
    tol = 1e-12 * c_max

    min_value, argmin = minimize_exp_poly(K.terms, horizon)
    positive = min_value >= -tol

    # dominant slowest term: minimal alpha, then maximal power
    slow = min(alpha for _, alpha, _ in K.terms)
    slow_terms = [(c, alpha, k) for c, alpha, k in K.terms if alpha == slow]
    dom_c = max(slow_terms, key=lambda term: term[2])[0]
    if positive and dom_c < -tol:
        # eventually negative: scan outward for a witness
        t = horizon
        for _ in range(60):
            t *= 2.0
            val = kernel_eval(K, t)
            if val < -tol * math.exp(-slow * t):
                min_value, argmin, positive = val, t, False
                break
        else:
            positive = False
    return PositivityReport(positive, min_value, argmin)


def lemma_positivity_samples(K: ExpPolyKernel, m_max: int, lambda_grid) -> bool:
    """Sample the transform-domain positivity criterion for exponential sums:
    K >= 0 forces sum_j gamma_j / (lambda + alpha_j)^m >= 0 for every m >= 1
    and lambda >= 0.

    A ``False`` return is a certificate of non-positivity; ``True`` is only
    necessary-side evidence because the quantifier over m is sampled finitely.
    The lambda range is taken as lambda >= 0.
    """
    if not K.is_exp_sum():
        raise DomainError("transform-domain sampling applies to pure exponential sums")
    lams = np.asarray(lambda_grid, float)
    if np.any(lams < 0):
        raise DomainError("sampling is defined for lambda >= 0")
    for m in range(1, m_max + 1):
        for lam in lams:
            total = math.fsum(c / (lam + alpha) ** m for c, alpha, _ in K.terms)
            if total < -1e-12:
                return False
    return True


# ---------------------------------------------------------------------------
# simplex quadrature oracle

_GL_NODES, _GL_WEIGHTS = leggauss(32)


def _gl_rescale(lo, hi):
    half = 0.5 * (hi - lo)
    return lo + half * (_GL_NODES + 1.0), half * _GL_WEIGHTS


def simplex_oracle(b, t: float) -> float:
    """Evaluate K_j(t) through its simplex-integral representation:
    K_j(t) = (prod_i b_i) t^{j-1} * integral over the standard simplex of
    e^{-<b, s> t}, iterated over s_1..s_{j-1} with s_j = 1 - sum.

    Nested 32-node Gauss-Legendre per level; the deepest level is vectorized.
    Serves as an independent check of the Lagrange-weight synthesis, capped
    at j <= 4 because the node count grows as 32^(j-1).
    """
    b = np.asarray(b, float)
    j = len(b)
    if j < 1:
        raise DomainError("need at least one rate")
    if j > 4:
        raise DimensionTooLarge(f"simplex oracle supports j <= 4, got {j}")
    if t < 0:
        raise DomainError("kernels are defined for t >= 0")
    if any_rates_coincident(b):
        raise CoincidentRates(f"rates {b.tolist()} are not pairwise distinct")
    if j == 1:
        return float(b[0] * math.exp(-b[0] * t))

    def level(depth: int, remaining: float, partial: float) -> float:
        # integrate s_depth over [0, remaining]; partial = sum b_i s_i so far
        if depth == j - 2:
            s, w = _gl_rescale(0.0, remaining)
            integrand = np.exp(-(partial + b[depth] * s + b[j - 1] * (remaining - s)) * t)
            return float(w @ integrand)
        s, w = _gl_rescale(0.0, remaining)
        return float(
            math.fsum(
                wi * level(depth + 1, remaining - si, partial + b[depth] * si)
                for si, wi in zip(s, w)
            )
        )

    integral = level(0, 1.0, 0.0)
    return float(np.prod(b) * t ** (j - 1) * integral)
