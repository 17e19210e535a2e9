"""The degenerate single-delay limit: Erlang-kernel chains concentrating at a
delay T, a method-of-steps delay solver, and spectral convergence between
chain eigenvalues and delay characteristic roots.
"""

from __future__ import annotations

import math

import numpy as np

from . import markov, rootfind
from .core import (
    DomainError,
    ExpPolyKernel,
    InvalidRate,
    RootCountShortfall,
    RootFindingFailure,
    Trajectory,
    point_mass,
)


def erlang_kernel(n_stages: int, delay: float) -> ExpPolyKernel:
    """Unit-mass kernel b^N t^{N-1} e^{-bt} / (N-1)! with b = N/T.

    Its mean time is exactly T and it concentrates at the delay T as N grows:
    the transform (b/(lambda+b))^N converges to e^{-lambda T}.
    """
    if not isinstance(n_stages, (int, np.integer)) or n_stages < 1:
        raise InvalidRate(f"stage count must be a positive integer, got {n_stages}")
    if not (delay > 0):
        raise InvalidRate(f"delay must be positive, got {delay}")
    b = n_stages / delay
    c = b**n_stages / math.factorial(n_stages - 1)
    return ExpPolyKernel(((c, b, n_stages - 1),))


def _hermite(u_l, u_r, d_l, d_r, t_l, h, q):
    """Cubic Hermite interpolation on [t_l, t_l + h] at query q."""
    x = (q - t_l) / h
    x2 = x * x
    x3 = x2 * x
    h00 = 2 * x3 - 3 * x2 + 1
    h10 = x3 - 2 * x2 + x
    h01 = -2 * x3 + 3 * x2
    h11 = x3 - x2
    return h00 * u_l + h10 * h * d_l + h01 * u_r + h11 * h * d_r


def solve_dde(a: float, delay: float, u0: float, t_grid) -> Trajectory:
    """Method of steps for u'(t) = -a u(t) + a u(t - T), t >= T, with the
    exact history u(t) = e^{-a t} u0 on [0, T].

    The step is adjusted internally so that it divides the delay exactly;
    the returned grid reflects the adjustment.  Integration is classical
    RK4 with cubic-Hermite dense output of the delayed segment; the solution
    is continuous with one derivative jump allowed at t = T.
    """
    if a < 0:
        raise InvalidRate(f"decay rate must be nonnegative, got {a}")
    if not (delay > 0):
        raise InvalidRate(f"delay must be positive, got {delay}")
    t_req = np.asarray(t_grid, float)
    if len(t_req) < 2:
        raise DomainError("time grid needs at least two points")
    h_req = t_req[1] - t_req[0]
    t_end = float(t_req[-1])
    m = max(1, int(round(delay / h_req)))
    h = delay / m
    n = max(m, int(math.ceil(t_end / h - 1e-9)))
    t = np.arange(n + 1) * h

    u = np.empty(n + 1)
    d = np.empty(n + 1)  # right-derivatives at the nodes
    hist = min(m, n)
    u[: hist + 1] = u0 * np.exp(-a * t[: hist + 1])
    d[: hist + 1] = -a * u[: hist + 1]
    if n <= m:
        return Trajectory(t, u)
    # at t = T the right-derivative picks up the delay term
    d_left_at_delay = d[m]
    d[m] = -a * u[m] + a * u[0]

    def delayed(q: float) -> float:
        # q = (index - m) * h up to roundoff; land on the grid when possible
        pos = q / h
        i = int(math.floor(pos + 1e-9))
        if abs(pos - round(pos)) < 1e-9:
            return u[int(round(pos))]
        i = min(max(i, 0), n - 1)
        d_r = d_left_at_delay if i + 1 == m else d[i + 1]
        return _hermite(u[i], u[i + 1], d[i], d_r, t[i], h, q)

    for i in range(m, n):
        ti = t[i]
        ui = u[i]
        z1 = delayed(ti - delay)
        k1 = -a * ui + a * z1
        zh = delayed(ti + 0.5 * h - delay)
        k2 = -a * (ui + 0.5 * h * k1) + a * zh
        k3 = -a * (ui + 0.5 * h * k2) + a * zh
        z2 = delayed(ti + h - delay)
        k4 = -a * (ui + h * k3) + a * z2
        u[i + 1] = ui + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        d[i + 1] = -a * u[i + 1] + a * z2
    return Trajectory(t, u)


def chain_approximation(
    a: float, delay: float, n_stages: int, u0: float, t_grid
) -> Trajectory:
    """Component 0 of the cyclic chain with b = N/T: the chain whose kernel
    is the Erlang kernel, approximating the delay equation."""
    A = markov.build_cyclic_generator(a, n_stages / delay, n_stages)
    chain = markov.integrate(A, point_mass(A.n, u0), t_grid)
    return chain.component(0)


def dde_char_roots(a: float, delay: float, count: int) -> np.ndarray:
    """Roots of the delay characteristic equation lambda = -a + a e^{-lambda T}.

    Returns the exact root 0 plus the nonzero roots of smallest modulus,
    found by Newton iteration from a grid of starting points and verified to
    residual 1e-10.  Nonzero roots come in conjugate pairs and pairs are kept
    whole, so the returned count is rounded up to an even number.
    """
    if not (a > 0) or not (delay > 0):
        raise InvalidRate("characteristic roots need a > 0 and T > 0")
    if count < 1:
        raise DomainError("need at least one root")
    n_pairs = (count + 1) // 2

    def g(z):
        return z + a - a * np.exp(-z * delay)

    def dg(z):
        return 1.0 + a * delay * np.exp(-z * delay)

    im_max = 2.0 * math.pi * (count + 2) / delay
    re_lo = -(a + 10.0 / delay)
    re_starts = np.linspace(re_lo, 1.0, 24)
    im_starts = np.linspace(0.0, im_max, 8 * (count + 2) + 1)
    grid = (re_starts[:, None] + 1j * im_starts[None, :]).ravel()

    z = grid.astype(complex)
    for _ in range(100):
        step = g(z) / dg(z)
        z = z - step
        if np.all(np.abs(step) <= 1e-14 * (1.0 + np.abs(z))):
            break
    ok = np.abs(g(z)) <= 1e-10
    z = z[ok]
    # keep the closed upper half plane; the only real root is 0
    z = z[z.imag >= -1e-9]
    z[np.abs(z.imag) <= 1e-9 * (1.0 + np.abs(z))] = z[
        np.abs(z.imag) <= 1e-9 * (1.0 + np.abs(z))
    ].real

    distinct: list[complex] = []
    for root in sorted(z, key=abs):
        if all(abs(root - r) > 1e-6 * (1.0 + abs(r)) for r in distinct):
            distinct.append(complex(root))
    nonzero = [r for r in distinct if abs(r) > 1e-9]
    if len(nonzero) < n_pairs:
        raise RootCountShortfall(
            f"found {len(nonzero)} distinct conjugate-pair roots, "
            f"needed {n_pairs}"
        )
    out = [0.0 + 0.0j]
    for r in nonzero[:n_pairs]:
        out.extend([r, r.conjugate()])
    return np.array(out)


def cyclic_characteristic(a: float, b: float, n_stages: int):
    """Evaluation oracle for the cyclic chain's characteristic function
    phi(z) = (z + a)(z + b)^N - a b^N in product form, with derivative.

    The product form is kept unexpanded: expanded coefficients reach b^N and
    root accuracy collapses for N in the tens, while the product evaluates
    to near machine precision.
    """
    offset = a * b**n_stages

    def phi(z):
        return (z + a) * (z + b) ** n_stages - offset

    def dphi(z):
        return (z + b) ** (n_stages - 1) * ((z + b) + n_stages * (z + a))

    return phi, dphi


def cyclic_spectrum(a: float, delay: float, n_stages: int) -> np.ndarray:
    """Eigenvalues of the cyclic chain with b = N/T as roots of
    (lambda + a)(lambda + b)^N - a b^N, degree N+1 including the zero mode.

    Initial guesses sit on the circle of radius b around -b (exact for
    a = b); results are residual-checked and, at matrix-checkable sizes,
    cross-checked against the dense spectrum.
    """
    if not isinstance(n_stages, (int, np.integer)) or n_stages < 1:
        raise InvalidRate(f"stage count must be a positive integer, got {n_stages}")
    if not (a > 0) or not (delay > 0):
        raise InvalidRate("cyclic spectrum needs a > 0 and T > 0")
    b = n_stages / delay
    # |z + b|^N reaches ~(3b)^N on the root circle; keep it inside doubles
    if (n_stages + 1) * math.log10(3.0 * (a + b) + 1.0) > 290.0:
        raise DomainError(
            f"N = {n_stages} with b = {b:.3g} overflows double precision in "
            "the characteristic evaluation"
        )
    phi, dphi = cyclic_characteristic(a, b, n_stages)
    d = n_stages + 1
    angles = 2.0 * math.pi * (np.arange(d) + 0.37) / d
    guesses = -b + b * np.exp(1j * angles)
    roots = rootfind.aberth(phi, dphi, guesses)

    scale = a * b**n_stages
    residual = float(np.abs(phi(roots)).max()) / scale
    if residual > 1e-8:
        raise RootFindingFailure(
            f"cyclic characteristic residual {residual:.3e} exceeds 1e-8"
        )
    nearest = int(np.argmin(np.abs(roots)))
    if abs(roots[nearest]) <= 1e-9 * max(1.0, b):
        roots[nearest] = 0.0
    roots = rootfind.sort_spectrum(roots)

    if n_stages <= 40:
        dense = markov.spectrum(markov.build_cyclic_generator(a, b, n_stages))
        gap = rootfind.match_distances(roots, dense).max()
        if gap > 1e-8:
            raise RootFindingFailure(
                f"cyclic roots disagree with the dense spectrum by {gap:.3e}"
            )
    return roots


def laplace_delay_gap(delay: float, n_stages: int, lambdas) -> float:
    """max over the grid of |(1 + lambda T / N)^{-N} - e^{-lambda T}|: how far
    the Erlang transform is from the pure-delay transform."""
    lams = np.asarray(lambdas, float)
    erl = (1.0 + lams * delay / n_stages) ** (-n_stages)
    return float(np.abs(erl - np.exp(-lams * delay)).max())
