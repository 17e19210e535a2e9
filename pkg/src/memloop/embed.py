"""Embedding of exponential-sum kernels into loop chains: decompose a kernel
into the loop basis with nonnegative weights, build loops from prescribed
mean times, and assemble the embedded chain.
"""

from __future__ import annotations

import itertools
import warnings

import numpy as np

from . import kernels, markov
from .core import (
    DomainError,
    DuplicateGaps,
    ExpPolyKernel,
    GeneratorMatrix,
    InconsistentMass,
    InfeasibleDecomposition,
    LoopGenerator,
    NegativeSplitRate,
    NonIncreasingTimes,
    ProbabilityVector,
    TooManyExponents,
    point_mass,
    rates_coincident,
)

# Splitting weights this close to zero are clamped rather than declared
# negative: the triangular solve amplifies rounding near-confluent rates.
_FEASIBILITY_TOL = 1e-10
# Full ordering search is refused beyond this many exponents (N! blowup).
_MAX_SEARCH_EXPONENTS = 6


def _solve_ordering(gammas: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve gamma_i = b_i sum_{j>=i} a_j psi_i^j for the weights a_j.

    The system is upper triangular in the loop index, so back substitution
    from the longest loop suffices.
    """
    n = len(b)
    u = np.zeros((n, n))
    for j in range(1, n + 1):
        psi = kernels.lagrange_psi(b, j)
        for i in range(j):
            u[i, j - 1] = b[i] * psi[i]
    a = np.zeros(n)
    for j in range(n - 1, -1, -1):
        a[j] = (gammas[j] - u[j, j + 1 :] @ a[j + 1 :]) / u[j, j]
    return a


def decompose_to_loop(K: ExpPolyKernel) -> LoopGenerator:
    """Find a loop chain whose kernel equals the given exponential sum.

    Every assignment of the kernel's exponents to loop positions is tried
    (descending order first, then the remaining orderings in lexicographic
    order); the first one with all splitting weights >= -1e-10 wins, with
    near-zero weights clamped to 0.  Raises
    :class:`~memloop.core.InfeasibleDecomposition` carrying one certificate
    (ordering, most negative weight) per ordering when none is feasible.

    Beyond 6 exponents the factorial search is refused: only the descending
    assignment is tried and a :class:`~memloop.core.TooManyExponents`
    warning is emitted.
    """
    if not K.is_exp_sum():
        raise DomainError("decomposition applies to pure exponential sums")
    if not K.terms:
        raise DomainError("cannot decompose an empty kernel")
    coeff_by_rate = {alpha: c for c, alpha, _ in K.terms}
    rates = sorted(coeff_by_rate, reverse=True)
    n = len(rates)
    if n > _MAX_SEARCH_EXPONENTS:
        warnings.warn(
            f"{n} exponents: trying the descending assignment only "
            f"(full search is refused beyond {_MAX_SEARCH_EXPONENTS})",
            TooManyExponents,
            stacklevel=2,
        )
        orderings = [tuple(rates)]
    else:
        orderings = list(itertools.permutations(rates))

    certificates = []
    for ordering in orderings:
        b = np.array(ordering)
        gammas = np.array([coeff_by_rate[x] for x in ordering])
        a = _solve_ordering(gammas, b)
        worst = float(a.min())
        if worst >= -_FEASIBILITY_TOL:
            a[a < 0.0] = 0.0
            return LoopGenerator(a, b)
        certificates.append((ordering, worst))
    raise InfeasibleDecomposition(certificates)


def from_mean_times(t_list, a_list) -> LoopGenerator:
    """Loop chain whose component kernels have unit mass and the prescribed
    mean times: b_j = 1 / (t_j - t_{j-1}) with t_0 = 0.

    Consecutive gaps must be pairwise distinct, otherwise the return rates
    coincide and the exponential-sum form degenerates.
    """
    t = np.asarray(t_list, float)
    a = np.asarray(a_list, float)
    if len(t) != len(a):
        raise DomainError(f"got {len(t)} mean times but {len(a)} weights")
    if len(t) == 0:
        raise DomainError("need at least one mean time")
    if t[0] <= 0 or np.any(np.diff(t) <= 0):
        raise NonIncreasingTimes(f"mean times must satisfy 0 < t_1 < ... : {t.tolist()}")
    if np.any(a < 0):
        raise NegativeSplitRate("loop weights must be nonnegative")
    gaps = np.diff(np.concatenate([[0.0], t]))
    b = 1.0 / gaps
    for i in range(len(b)):
        for j in range(i + 1, len(b)):
            if rates_coincident(b[i], b[j]):
                raise DuplicateGaps(
                    f"mean-time gaps {gaps[i]:.6g} and {gaps[j]:.6g} coincide"
                )
    return LoopGenerator(a, b)


def me_to_mp(
    a: float, K: ExpPolyKernel, u0: float
) -> tuple[GeneratorMatrix, ProbabilityVector]:
    """Embed the memory equation u' = -a u + K * u into a chain.

    Requires the consistency int K = a (the kernel mass equals the decay
    rate), decomposes K into a loop basis, and starts the chain with all
    mass in state 0.
    """
    if a <= 0:
        raise DomainError(f"decay rate must be positive, got {a}")
    mass = kernels.moments(K).mass
    if abs(a - mass) > 1e-9 * abs(a):
        raise InconsistentMass(
            f"decay rate a = {a} but the kernel mass is {mass}; "
            "the embedding requires them to be equal"
        )
    gen = decompose_to_loop(K)
    A = markov.build_generator(gen)
    return A, point_mass(A.n, u0)
