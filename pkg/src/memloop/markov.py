"""Loop and cyclic chain generators, stationary states, spectra, forward
integration of p' = A p, and a stochastic jump-chain sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import rootfind
from .core import (
    DomainError,
    GeneratorMatrix,
    InvalidRate,
    LoopGenerator,
    NonUniqueStationary,
    ProbabilityVector,
    RootFindingFailure,
    Trajectory,
    any_rates_coincident,
    validate_loop,
)

# Internal substeps keep h * max|diag| at or below this during integration.
_STIFFNESS_GUARD = 0.1


def build_generator(gen: LoopGenerator) -> GeneratorMatrix:
    """Forward generator of the (N+1)-state loop chain.

    Column 0 carries the splitting rates a_j out of state 0; state j returns
    mass toward state j-1 at rate b_j, ending at state 0.
    """
    validate_loop(gen)
    n = gen.n_loops
    m = np.zeros((n + 1, n + 1))
    m[0, 0] = -gen.total_split
    for j in range(1, n + 1):
        m[j, 0] = gen.a[j - 1]
        m[j, j] = -gen.b[j - 1]
        m[j - 1, j] = gen.b[j - 1]
    return GeneratorMatrix(m)


def build_cyclic_generator(a: float, b: float, n_loops: int) -> GeneratorMatrix:
    """Single-loop chain: state 0 feeds state N at rate a, state j feeds
    state j-1 at rate b."""
    if not isinstance(n_loops, (int, np.integer)) or n_loops < 1:
        raise InvalidRate(f"need at least one chain state, got N = {n_loops}")
    if not (a > 0) or not (b > 0):
        raise InvalidRate(f"rates must be positive, got a = {a}, b = {b}")
    m = np.zeros((n_loops + 1, n_loops + 1))
    m[0, 0] = -a
    m[n_loops, 0] = a
    for j in range(1, n_loops + 1):
        m[j, j] = -b
        m[j - 1, j] = b
    return GeneratorMatrix(m)


def cyclic_loop(a: float, b: float, n_loops: int) -> LoopGenerator:
    """The cyclic chain expressed as a loop chain: a = (0, ..., 0, a)."""
    av = np.zeros(n_loops)
    av[-1] = a
    return LoopGenerator(av, np.full(n_loops, float(b)))


def stationary(A: GeneratorMatrix, total_mass: float = 1.0) -> ProbabilityVector:
    """Null-space vector of A normalized to the requested total mass.

    Solved by LU with the normalization row replacing the last equation;
    a one-dimensional null space is verified through the singular values.
    """
    m = A.entries
    n = A.n
    scale = max(1.0, float(np.abs(m).max()))
    sv = np.linalg.svd(m, compute_uv=False)
    rank = int(np.sum(sv > 1e-10 * scale))
    if rank != n - 1:
        raise NonUniqueStationary(
            f"generator rank is {rank}, expected {n - 1}: stationary state "
            "is not unique"
        )
    system = m.copy()
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = total_mass
    mu = np.linalg.solve(system, rhs)
    residual = float(np.abs(m @ mu).max())
    if residual > 1e-10 * scale * max(1.0, abs(total_mass)):
        raise NonUniqueStationary(f"stationary residual {residual:.3e} too large")
    return ProbabilityVector(mu, expected_total=total_mass)


def stationary_loop(gen: LoopGenerator, u0: float = 1.0) -> ProbabilityVector:
    """Closed-form stationary state of a loop chain.

    mu is proportional to (1, s_1/b_1, ..., s_N/b_N) with the suffix sums
    s_i = a_i + ... + a_N, normalized by Z = 1 + sum_i s_i / b_i.
    """
    validate_loop(gen)
    suffix = np.cumsum(gen.a[::-1])[::-1]
    weights = np.concatenate([[1.0], suffix / gen.b])
    z = math.fsum(weights)
    return ProbabilityVector(weights * (u0 / z), expected_total=u0)


def partition_z(gen: LoopGenerator) -> float:
    """Normalization Z = 1 + sum_i (1/b_i) sum_{j>=i} a_j."""
    validate_loop(gen)
    suffix = np.cumsum(gen.a[::-1])[::-1]
    return 1.0 + math.fsum(suffix / gen.b)


class BalanceCheck(NamedTuple):
    holds: bool
    max_violation: float


def detailed_balance(A: GeneratorMatrix, mu: ProbabilityVector) -> BalanceCheck:
    """Check A_ij mu_j = A_ji mu_i for all pairs against the stationary state."""
    m = A.entries
    flux = m * mu.p[None, :]
    violation = np.abs(flux - flux.T)
    np.fill_diagonal(violation, 0.0)
    worst = float(violation.max()) if A.n > 1 else 0.0
    scale = float(np.abs(m).max()) * max(float(np.abs(mu.p).max()), 1e-300)
    return BalanceCheck(worst <= 1e-10 * max(scale, 1e-300), worst)


def _loop_rates_from_matrix(A: GeneratorMatrix):
    """Recover (a, b) when the matrix has the exact loop sparsity pattern."""
    m = A.entries
    n = A.n - 1
    if n < 1:
        return None
    scale = max(1.0, float(np.abs(m).max()))
    tol = 1e-14 * scale
    b = np.array([m[j - 1, j] for j in range(1, n + 1)])
    a = np.array([m[j, 0] for j in range(1, n + 1)])
    expected = np.zeros_like(m)
    expected[0, 0] = -a.sum()
    for j in range(1, n + 1):
        expected[j, 0] = a[j - 1]
        expected[j, j] = -b[j - 1]
        expected[j - 1, j] = b[j - 1]
    if np.all(np.abs(m - expected) <= tol) and np.all(b > 0):
        return LoopGenerator(a, b)
    return None


def loop_characteristic(gen: LoopGenerator) -> np.ndarray:
    """Monic characteristic polynomial of the loop generator (ascending).

    Clearing denominators of lambda + a - sum_j a_j k_j(lambda) and
    multiplying by lambda for the zero mode gives
    (lambda + a) prod_i (lambda + b_i) - sum_j a_j (prod_{i<=j} b_i)
    prod_{i>j} (lambda + b_i).
    """
    a, b = gen.a, gen.b
    n = gen.n_loops
    poly = np.array([gen.total_split, 1.0])
    for bi in b:
        poly = npoly.polymul(poly, [bi, 1.0])
    for j in range(1, n + 1):
        term = np.array([float(np.prod(b[:j])) * a[j - 1]])
        for bi in b[j:]:
            term = npoly.polymul(term, [bi, 1.0])
        poly = npoly.polysub(poly, term)
    return np.atleast_1d(poly)


def spectrum(A: GeneratorMatrix) -> np.ndarray:
    """Eigenvalues sorted by (real desc, imag asc); the single eigenvalue
    within 1e-9 of zero is snapped to exactly 0.

    Loop-patterned matrices with distinct return rates are solved through
    their characteristic polynomial (Aberth-Ehrlich plus Newton polish);
    everything else falls back to dense Hessenberg QR.
    """
    if A.n > 64:
        raise DomainError(f"spectrum supports up to 64 states, got {A.n}")
    gen = _loop_rates_from_matrix(A)
    if gen is not None and not any_rates_coincident(gen.b) and np.all(gen.a >= 0):
        coeffs = loop_characteristic(gen)
        values = rootfind.polynomial_roots(coeffs)
        residual = rootfind.polynomial_residual(coeffs, values)
        if residual > 1e-8:
            raise RootFindingFailure(
                f"characteristic polynomial residual {residual:.3e} exceeds 1e-8"
            )
    else:
        values = np.linalg.eigvals(A.entries)
    values = rootfind.symmetrize_conjugates(values)
    dist = np.abs(values)
    nearest = int(np.argmin(dist))
    if dist[nearest] <= 1e-9:
        values[nearest] = 0.0
    return rootfind.sort_spectrum(values)


def _rk4_step_matrix(A: np.ndarray, h: float) -> np.ndarray:
    """One-step propagator I + hA + ... + (hA)^4/24 of the classical RK4
    scheme applied to the linear system p' = A p."""
    hA = h * A
    m = np.eye(len(A)) + hA
    power = hA
    for k in (2, 3, 4):
        power = power @ hA / k
        m = m + power
    return m


def integrate(A: GeneratorMatrix, p0: ProbabilityVector, t_grid) -> Trajectory:
    """Fixed-step 4th-order integration of p' = A p on the given grid.

    Steps are internally subdivided so that the substep times the largest
    diagonal magnitude stays below the stiffness guard; the per-interval
    propagator is applied as a precomputed matrix, which conserves total
    mass to roundoff.
    """
    t = np.asarray(t_grid, float)
    if p0.n != A.n:
        raise DomainError(f"initial state has {p0.n} entries, generator has {A.n}")
    m = A.entries
    max_diag = float(np.abs(np.diag(m)).max()) if A.n else 0.0

    def propagator(h: float) -> np.ndarray:
        substeps = max(1, int(math.ceil(h * max_diag / _STIFFNESS_GUARD)))
        step = _rk4_step_matrix(m, h / substeps)
        return np.linalg.matrix_power(step, substeps)

    values = np.empty((len(t), A.n))
    values[0] = p0.p
    p = p0.p.copy()
    diffs = np.diff(t)
    if len(diffs) and np.all(np.abs(diffs - diffs[0]) <= 1e-9 * diffs[0]):
        prop = propagator((t[-1] - t[0]) / (len(t) - 1))
        for i in range(1, len(t)):
            p = prop @ p
            values[i] = p
    else:
        for i in range(1, len(t)):
            p = propagator(t[i] - t[i - 1]) @ p
            values[i] = p
    return Trajectory(t, values)


@dataclass(frozen=True)
class EnsembleResult:
    """Empirical state occupation from a jump-chain ensemble."""

    mean: Trajectory
    stderr: np.ndarray
    n_paths: int


def simulate_ctmc(
    A: GeneratorMatrix,
    p0: ProbabilityVector,
    t_end: float,
    n_paths: int,
    seed: int,
    n_times: int = 61,
) -> EnsembleResult:
    """Jump-chain ensemble: exponential holding times, categorical jumps.

    Each path runs on its own counter-based Philox stream keyed by
    (seed, path index), so results are independent of execution order and
    reproducible for a fixed seed.  Every path carries the full initial
    mass, hence the ensemble conserves mass exactly.
    """
    if n_paths < 1:
        raise DomainError("need at least one path")
    if t_end <= 0:
        raise DomainError("t_end must be positive")
    m = A.entries
    n = A.n
    total = p0.total
    if total <= 0:
        raise DomainError("initial state carries no mass")
    start_probs = p0.p / total
    exit_rates = -np.diag(m)
    jump_probs = []
    for j in range(n):
        if exit_rates[j] > 0:
            col = m[:, j].copy()
            col[j] = 0.0
            jump_probs.append(col / exit_rates[j])
        else:
            jump_probs.append(None)  # absorbing

    grid = np.linspace(0.0, t_end, n_times)
    counts = np.zeros((n_times, n), dtype=np.int64)
    for path in range(n_paths):
        rng = np.random.Generator(
            np.random.Philox(key=np.array([seed, path], dtype=np.uint64))
        )
        state = int(rng.choice(n, p=start_probs))
        t = 0.0
        idx = 0
        while idx < n_times:
            rate = exit_rates[state]
            t_next = t + rng.exponential(1.0 / rate) if rate > 0 else np.inf
            while idx < n_times and grid[idx] <= t_next:
                counts[idx, state] += 1
                idx += 1
            if not np.isfinite(t_next):
                break
            state = int(rng.choice(n, p=jump_probs[state]))
            t = t_next

    frac = counts / n_paths
    mean = frac * total
    stderr = total * np.sqrt(frac * (1.0 - frac) / n_paths)
    return EnsembleResult(Trajectory(grid, mean), stderr, n_paths)
