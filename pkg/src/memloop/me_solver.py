"""Solvers for the scalar memory equation u' = -a u + (K * u)(t):
a direct Volterra quadrature scheme, the embedded-chain route, Laplace-domain
rational algebra with partial fractions, and equilibria.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import embed, kernels, markov, rootfind
from .core import (
    CoincidentRates,
    DomainError,
    ExpPolyKernel,
    LoopGenerator,
    RationalFunction,
    RepeatedPoles,
    StepTooLarge,
    Trajectory,
    any_rates_coincident,
    point_mass,
    validate_loop,
)


def _uniform_step(t_grid) -> float:
    t = np.asarray(t_grid, float)
    if len(t) < 2:
        raise DomainError("time grid needs at least two points")
    diffs = np.diff(t)
    h = float(diffs[0])
    if h <= 0 or np.any(np.abs(diffs - h) > 1e-9 * h):
        raise DomainError("time grid must be uniform and increasing")
    return h


def solve_me(a: float, K: ExpPolyKernel, u0: float, t_grid) -> Trajectory:
    """Product-trapezoidal Volterra scheme, the direct reference oracle.

    The convolution integral is discretized with trapezoidal weights on the
    grid and the local term is stepped implicitly (trapezoidal rule), giving
    an unconditionally order-2 scheme with O(n^2) total work.
    """
    t = np.asarray(t_grid, float)
    h = _uniform_step(t)
    mass = kernels.moments(K).mass if K.terms else 0.0
    if h * (a + mass) > 0.5:
        raise StepTooLarge(
            f"h * (a + kernel mass) = {h * (a + mass):.3g} exceeds 0.5; "
            "refine the grid"
        )
    n = len(t)
    kg = kernel_on_grid(K, t)
    k0 = kg[0]
    u = np.empty(n)
    u[0] = u0
    f_prev = -a * u0  # convolution vanishes at t = 0
    denom = 1.0 + 0.5 * h * a - 0.25 * h * h * k0
    for m in range(n - 1):
        # trapezoidal quadrature of int_0^{t_{m+1}} K(t_{m+1}-s) u(s) ds,
        # excluding the unknown endpoint contribution (h/2) K(0) u_{m+1}
        known = 0.5 * kg[m + 1] * u[0]
        if m >= 1:
            known += float(np.dot(kg[1 : m + 1][::-1], u[1 : m + 1]))
        conv_known = h * known
        u_next = (u[m] + 0.5 * h * (f_prev + conv_known)) / denom
        conv_full = conv_known + 0.5 * h * k0 * u_next
        f_prev = -a * u_next + conv_full
        u[m + 1] = u_next
    return Trajectory(t, u)


def kernel_on_grid(K: ExpPolyKernel, t_grid) -> np.ndarray:
    t = np.asarray(t_grid, float)
    if not K.terms:
        return np.zeros(len(t))
    return kernels.kernel_eval(K, t)


def solve_me_via_mp(a: float, K: ExpPolyKernel, u0: float, t_grid) -> Trajectory:
    """Solve the memory equation through its embedded chain: integrate the
    forward equation and project onto component 0."""
    A, p0 = embed.me_to_mp(a, K, u0)
    chain = markov.integrate(A, p0, t_grid)
    return chain.component(0)


def solve_loop_me(gen: LoopGenerator, u0: float, t_grid) -> Trajectory:
    """Component 0 of the chain built directly from a loop description."""
    A = markov.build_generator(gen)
    chain = markov.integrate(A, point_mass(A.n, u0), t_grid)
    return chain.component(0)


def laplace_solution(gen: LoopGenerator, u0: float = 1.0) -> RationalFunction:
    """Transform-domain solution of the loop chain's memory equation:
    u(lambda) = u0 prod_i (lambda + b_i) / (lambda D(lambda)) where
    lambda D(lambda) clears denominators of lambda + a - sum_j a_j k_j(lambda).
    """
    validate_loop(gen)
    if any_rates_coincident(gen.b):
        raise CoincidentRates(
            f"return rates {gen.b.tolist()} are not pairwise distinct"
        )
    num = np.array([u0])
    for bi in gen.b:
        num = npoly.polymul(num, [bi, 1.0])
    full = markov.loop_characteristic(gen)
    # the characteristic polynomial has an exact root at 0; drop the
    # (numerically negligible) constant term and keep the lambda factor
    reduced = full[1:]
    den = npoly.polymul([0.0, 1.0], reduced)
    return RationalFunction(num, den)


def equilibrium_me(gen: LoopGenerator, u0: float = 1.0) -> float:
    """Long-time limit u0 / Z computed in closed form.

    The memory equation is non-autonomous, so u' = 0 does not determine the
    equilibrium; the closed form matches the final-value limit
    lambda u(lambda) -> u_infinity as lambda -> 0.
    """
    return u0 / markov.partition_z(gen)


def closed_form(gen: LoopGenerator, u0: float = 1.0):
    """Partial-fraction expansion u(t) = sum_k r_k e^{p_k t}.

    Returns a list of ``(residue, pole)`` pairs sorted like the spectrum.
    The pole at 0 carries the equilibrium residue u0 / Z; conjugate poles
    carry conjugate residues.  Near-repeated poles are refused (fall back to
    :func:`solve_me` for those).
    """
    rf = laplace_solution(gen, u0)
    # den = lambda * reduced; the zero pole is exact by construction
    reduced = npoly.polydiv(rf.den, [0.0, 1.0])[0]
    other = rootfind.polynomial_roots(reduced)
    poles = np.concatenate([[0.0 + 0.0j], other])
    scale = max(1.0, float(np.abs(poles).max()))
    for i in range(len(poles)):
        for j in range(i + 1, len(poles)):
            if abs(poles[i] - poles[j]) <= 1e-6 * scale:
                raise RepeatedPoles(
                    f"poles {poles[i]:.6g} and {poles[j]:.6g} are too close "
                    "for a simple partial-fraction expansion"
                )
    num_at = npoly.polyval(poles, rf.num)
    dden_at = rf.den_derivative(poles)
    residues = num_at / dden_at
    order = np.lexsort((poles.imag, -poles.real))
    return [(complex(residues[k]), complex(poles[k])) for k in order]


def closed_form_eval(pairs, t_grid) -> Trajectory:
    """Evaluate sum_k r_k e^{p_k t} on a grid (imaginary parts cancel)."""
    t = np.asarray(t_grid, float)
    u = np.zeros(len(t), dtype=complex)
    for r, p in pairs:
        u += r * np.exp(p * t)
    return Trajectory(t, u.real)


def sup_difference(x: Trajectory, y: Trajectory) -> float:
    """Sup-norm distance between two trajectories on the same grid."""
    if len(x.times) != len(y.times) or np.any(np.abs(x.times - y.times) > 1e-12):
        raise DomainError("trajectories live on different grids")
    return float(np.abs(np.asarray(x.values) - np.asarray(y.values)).max())
