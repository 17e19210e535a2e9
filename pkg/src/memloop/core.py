"""Domain types shared by every module: loop chains, generator matrices,
exponential-polynomial kernels, rational Laplace transforms, trajectories.

All types are immutable after construction (arrays are stored read-only), so
instances can be shared freely between threads or tasks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

# Column sums of a generator matrix must vanish to this absolute tolerance.
COLUMN_SUM_TOL = 1e-12
# Two rates b_i, b_j are treated as coincident when
# |b_i - b_j| <= RATE_EQUAL_RTOL * max(b_i, b_j).  Lagrange weights blow up
# as rates merge, so coincidence is a hard construction error, not a warning.
RATE_EQUAL_RTOL = 1e-9
# Polynomial gcd reduction in RationalFunction discards remainders below this
# relative size.
POLY_REDUCE_TOL = 1e-12


# ---------------------------------------------------------------------------
# errors


class DomainError(ValueError):
    """Base class for all domain-level failures raised by this package."""


class EmptyLoop(DomainError):
    """The loop chain has no loops (N = 0)."""


class NonPositiveReturnRate(DomainError):
    """Some return rate b_j <= 0; the return chain would be broken."""


class NegativeSplitRate(DomainError):
    """Some splitting rate a_j < 0."""


class AllSplitRatesZero(DomainError):
    """Every a_j = 0: state 0 is decoupled from the loops."""


class InvariantViolation(DomainError):
    """A structural invariant of a constructed object does not hold."""


class ParseError(DomainError):
    """Malformed JSON input (syntax or schema)."""


class CoincidentRates(DomainError):
    """Two return rates coincide within tolerance; Lagrange weights undefined."""


class NonUniqueStationary(DomainError):
    """The generator's null space is not one-dimensional."""


class InvalidRate(DomainError):
    """A rate parameter is outside its admissible range."""


class RootFindingFailure(DomainError):
    """Polynomial/transcendental root finding did not meet its residual bound."""


class ZeroMass(DomainError):
    """The kernel integrates to zero; its mean time is undefined."""


class DimensionTooLarge(DomainError):
    """Simplex quadrature requested beyond its supported dimension."""


class NonIncreasingTimes(DomainError):
    """Prescribed mean times are not strictly increasing and positive."""


class DuplicateGaps(DomainError):
    """Two consecutive mean-time gaps coincide within tolerance."""


class InconsistentMass(DomainError):
    """Decay rate a and kernel mass disagree: the embedding needs a = int K."""


class StepTooLarge(DomainError):
    """Requested step size violates the Volterra scheme's stability guard."""


class RepeatedPoles(DomainError):
    """The Laplace solution has (near-)repeated poles; no simple-pole expansion."""


class RootCountShortfall(DomainError):
    """Fewer distinct characteristic roots found than requested."""


class InfeasibleDecomposition(DomainError):
    """No exponent ordering admits nonnegative loop weights.

    ``certificates`` holds one ``(ordering, most_negative_weight)`` pair per
    attempted assignment of kernel exponents to loop positions.
    """

    def __init__(self, certificates):
        self.certificates = list(certificates)
        worst = max(m for _, m in self.certificates)
        super().__init__(
            f"kernel is not representable with nonnegative loop weights "
            f"({len(self.certificates)} orderings tried; best case still has "
            f"a weight of {worst:.6g})"
        )


class TooManyExponents(UserWarning):
    """More than 6 exponents: the full ordering search is refused and only the
    descending assignment is tried."""


# ---------------------------------------------------------------------------
# small array helpers


def _readonly(x, dtype=float):
    arr = np.array(x, dtype=dtype)
    arr.flags.writeable = False
    return arr


def rates_coincident(x, y):
    """True when two positive rates are indistinguishable at tolerance."""
    return abs(x - y) <= RATE_EQUAL_RTOL * max(abs(x), abs(y))


def any_rates_coincident(b) -> bool:
    b = np.sort(np.asarray(b, float))
    return any(rates_coincident(x, y) for x, y in zip(b[:-1], b[1:]))


def time_grid(t_end: float, h: float) -> np.ndarray:
    """Uniform grid 0, h, 2h, ..., covering [0, t_end]."""
    if h <= 0 or t_end <= 0:
        raise DomainError("time grid needs h > 0 and t_end > 0")
    n = int(round(t_end / h))
    if n * h < t_end - 1e-12 * t_end:
        n += 1
    return np.arange(n + 1) * h


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True, eq=False)
class LoopGenerator:
    """Loop chain parameters: state 0 splits into N loops at rates ``a``;
    loop j returns to state 0 along the chain with rates ``b[j-1], ..., b[0]``.

    Construction only checks shape; value constraints are checked by
    :func:`validate_loop` so that invalid instances can be built and rejected
    explicitly.
    """

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = _readonly(np.atleast_1d(self.a))
        b = _readonly(np.atleast_1d(self.b))
        if a.ndim != 1 or b.ndim != 1 or len(a) != len(b):
            raise InvariantViolation(
                f"rate vectors must be 1-d and of equal length, "
                f"got {len(np.atleast_1d(a))} and {len(np.atleast_1d(b))}"
            )
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n_loops(self) -> int:
        return len(self.a)

    @property
    def n_states(self) -> int:
        return len(self.a) + 1

    @property
    def total_split(self) -> float:
        """a = sum of all splitting rates; also the kernel mass."""
        return float(math.fsum(self.a))

    def __eq__(self, other):
        if not isinstance(other, LoopGenerator):
            return NotImplemented
        return np.array_equal(self.a, other.a) and np.array_equal(self.b, other.b)

    def __repr__(self):
        return f"LoopGenerator(a={self.a.tolist()}, b={self.b.tolist()})"


def validate_loop(gen: LoopGenerator) -> None:
    """Raise unless ``gen`` satisfies every loop-chain invariant."""
    if gen.n_loops == 0:
        raise EmptyLoop("a loop chain needs at least one loop")
    if np.any(gen.b <= 0.0):
        j = int(np.argmin(gen.b))
        raise NonPositiveReturnRate(f"b[{j}] = {gen.b[j]} must be > 0")
    if np.any(gen.a < 0.0):
        j = int(np.argmin(gen.a))
        raise NegativeSplitRate(f"a[{j}] = {gen.a[j]} must be >= 0")
    if not np.any(gen.a > 0.0):
        raise AllSplitRatesZero("at least one splitting rate must be positive")


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Dense forward generator acting on probability column vectors.

    Off-diagonal entries are nonnegative and every column sums to zero
    (within ``COLUMN_SUM_TOL``); both are enforced at construction.
    """

    entries: np.ndarray

    def __post_init__(self):
        m = _readonly(self.entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvariantViolation(f"generator must be square, got shape {m.shape}")
        off = m[~np.eye(m.shape[0], dtype=bool)]
        if off.size and off.min() < 0.0:
            raise InvariantViolation(
                f"off-diagonal generator entries must be >= 0, min is {off.min()}"
            )
        colsums = m.sum(axis=0)
        scale = max(1.0, float(np.abs(m).max()) if m.size else 0.0)
        if np.any(np.abs(colsums) > COLUMN_SUM_TOL * scale):
            worst = int(np.argmax(np.abs(colsums)))
            raise InvariantViolation(
                f"column {worst} sums to {colsums[worst]:.3e}, expected 0"
            )
        object.__setattr__(self, "entries", m)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __repr__(self):
        return f"GeneratorMatrix(n={self.n})"


@dataclass(frozen=True)
class ExpPolyKernel:
    """Memory kernel K(t) = sum_i c_i t^{k_i} e^{-alpha_i t}.

    ``terms`` is a tuple of ``(c, alpha, k)`` triples with alpha > 0 and
    integer k >= 0.  Terms sharing (alpha, k) exactly are merged at
    construction and the result is stored sorted by (alpha, k), so equal
    kernels compare equal.
    """

    terms: tuple

    def __post_init__(self):
        merged: dict = {}
        for term in self.terms:
            if len(term) != 3:
                raise InvariantViolation(f"kernel term must be (c, alpha, k): {term!r}")
            c, alpha, k = float(term[0]), float(term[1]), term[2]
            if not (alpha > 0.0) or not math.isfinite(alpha):
                raise InvariantViolation(f"decay rate must be > 0, got {alpha}")
            if int(k) != k or k < 0:
                raise InvariantViolation(f"power must be a nonnegative integer, got {k}")
            key = (alpha, int(k))
            merged[key] = merged.get(key, 0.0) + c
        normalized = tuple(
            (c, alpha, k)
            for (alpha, k), c in sorted(merged.items())
            if c != 0.0
        )
        object.__setattr__(self, "terms", normalized)

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @property
    def min_rate(self) -> float:
        if not self.terms:
            raise DomainError("empty kernel has no decay rate")
        return min(alpha for _, alpha, _ in self.terms)

    def is_exp_sum(self) -> bool:
        """True when every power k is zero (pure exponential sum)."""
        return all(k == 0 for _, _, k in self.terms)

    def scaled(self, factor: float) -> "ExpPolyKernel":
        return ExpPolyKernel(tuple((c * factor, alpha, k) for c, alpha, k in self.terms))

    def __add__(self, other: "ExpPolyKernel") -> "ExpPolyKernel":
        return ExpPolyKernel(self.terms + other.terms)

    def __repr__(self):
        body = " + ".join(
            f"{c:g}*t^{k}*exp(-{alpha:g}t)" if k else f"{c:g}*exp(-{alpha:g}t)"
            for c, alpha, k in self.terms
        )
        return f"ExpPolyKernel({body or '0'})"


@dataclass(frozen=True, eq=False)
class LoopKernel:
    """Structured kernel of a loop chain: K(t) = sum_j a_j K_j(t) with
    K_j(t) = sum_{i<=j} b_i psi[j][i] e^{-b_i t}.

    ``psi`` is the lower-triangular matrix of Lagrange weights,
    ``psi[j-1, i-1]`` being the weight of rate b_i inside K_j.  Every row
    sums to 1 because each k_j(0) = 1.
    """

    gen: LoopGenerator
    psi: np.ndarray

    def __post_init__(self):
        n = self.gen.n_loops
        psi = _readonly(self.psi)
        if psi.shape != (n, n):
            raise InvariantViolation(f"psi must be {n}x{n}, got {psi.shape}")
        if any_rates_coincident(self.gen.b):
            raise CoincidentRates("loop kernels require pairwise distinct return rates")
        for j in range(n):
            row = math.fsum(psi[j, : j + 1])
            if abs(row - 1.0) > 1e-10 * max(1.0, float(np.abs(psi[j]).max())):
                raise InvariantViolation(
                    f"Lagrange weights of component {j + 1} sum to {row!r}, expected 1"
                )
        object.__setattr__(self, "psi", psi)

    def component(self, j: int) -> ExpPolyKernel:
        """Unit-mass kernel K_j of the j-th loop (1-based j)."""
        if not 1 <= j <= self.gen.n_loops:
            raise DomainError(f"component index must be in 1..{self.gen.n_loops}")
        b = self.gen.b
        return ExpPolyKernel(
            tuple((b[i] * self.psi[j - 1, i], b[i], 0) for i in range(j))
        )

    def flatten(self) -> ExpPolyKernel:
        """Collect coefficients per e^{-b_i t}: c_i = b_i sum_{j>=i} a_j psi_i^j."""
        a, b = self.gen.a, self.gen.b
        n = self.gen.n_loops
        terms = []
        for i in range(n):
            coeff = b[i] * math.fsum(a[j] * self.psi[j, i] for j in range(i, n))
            terms.append((coeff, b[i], 0))
        return ExpPolyKernel(tuple(terms))


def _trim_poly(c: np.ndarray) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c, float))
    scale = float(np.abs(c).max()) if c.size else 0.0
    if scale == 0.0:
        return np.zeros(1)
    keep = np.nonzero(np.abs(c) > POLY_REDUCE_TOL * scale)[0]
    return c[: keep[-1] + 1] if keep.size else np.zeros(1)


def _poly_gcd(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Euclidean gcd of two real polynomials with tolerance-based truncation."""
    p, q = _trim_poly(p), _trim_poly(q)
    while not (len(q) == 1 and q[0] == 0.0):
        if len(q) == 1:
            return np.ones(1)  # nonzero constant divides everything
        _, r = npoly.polydiv(p, q)
        r = _trim_poly(r)
        scale = float(np.abs(r).max())
        if scale > 0.0:
            r = r / scale  # gcd is defined up to a scalar; keep tolerances meaningful
        p, q = q, r
    return p / p[-1]


@dataclass(frozen=True, eq=False)
class RationalFunction:
    """Ratio of real polynomials, coefficients in ascending degree.

    The denominator is normalized monic and near-common factors are reduced
    away (coefficient tolerance ``POLY_REDUCE_TOL``).
    """

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        num = _trim_poly(self.num)
        den = _trim_poly(self.den)
        if len(den) == 1 and den[0] == 0.0:
            raise InvariantViolation("denominator is the zero polynomial")
        if len(num) > 1 or num[0] != 0.0:
            g = _poly_gcd(num, den)
            if len(g) > 1:
                num = _trim_poly(npoly.polydiv(num, g)[0])
                den = _trim_poly(npoly.polydiv(den, g)[0])
        lead = den[-1]
        object.__setattr__(self, "num", _readonly(num / lead))
        object.__setattr__(self, "den", _readonly(den / lead))

    def __call__(self, lam):
        return npoly.polyval(lam, self.num) / npoly.polyval(lam, self.den)

    @property
    def num_degree(self) -> int:
        return len(self.num) - 1

    @property
    def den_degree(self) -> int:
        return len(self.den) - 1

    def den_derivative(self, lam):
        return npoly.polyval(lam, npoly.polyder(self.den))

    def __repr__(self):
        return f"RationalFunction(num={self.num.tolist()}, den={self.den.tolist()})"


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution: strictly increasing times starting at 0 and per-time
    values (scalar, or a state vector per time)."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = _readonly(self.times)
        v = _readonly(self.values)
        if t.ndim != 1 or len(t) == 0:
            raise InvariantViolation("times must be a nonempty 1-d array")
        if t[0] != 0.0:
            raise InvariantViolation(f"trajectories start at t = 0, got {t[0]}")
        if np.any(np.diff(t) <= 0):
            raise InvariantViolation("times must be strictly increasing")
        if len(v) != len(t):
            raise InvariantViolation("values and times must have equal length")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def is_scalar(self) -> bool:
        return self.values.ndim == 1

    def component(self, i: int) -> "Trajectory":
        return Trajectory(self.times, self.values[:, i])

    def to_csv(self, labels=None) -> str:
        """Render as CSV with 17 significant digits ('.' decimal, no locale)."""
        if self.is_scalar:
            cols = self.values[:, None]
        else:
            cols = self.values
        if labels is None:
            labels = ["u"] if self.is_scalar else [f"state{i}" for i in range(cols.shape[1])]
        lines = ["t," + ",".join(labels)]
        for t, row in zip(self.times, cols):
            lines.append(",".join(f"{x:.17g}" for x in (t, *row)))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class ProbabilityVector:
    """Vector of nonnegative masses; total is an absolute concentration, not
    necessarily 1.  Entries above -1e-12 are clamped to zero on construction.
    """

    p: np.ndarray

    def __init__(self, p, expected_total: float | None = None):
        arr = np.atleast_1d(np.asarray(p, float)).copy()
        if arr.ndim != 1:
            raise InvariantViolation("probability vector must be 1-d")
        if arr.min(initial=0.0) < -1e-12:
            raise InvariantViolation(
                f"probability mass must be >= 0, min is {arr.min()}"
            )
        arr[arr < 0.0] = 0.0
        if expected_total is not None:
            tol = 1e-10 * max(1.0, abs(expected_total))
            if abs(math.fsum(arr) - expected_total) > tol:
                raise InvariantViolation(
                    f"total mass {math.fsum(arr)!r} differs from expected "
                    f"{expected_total!r}"
                )
        object.__setattr__(self, "p", _readonly(arr))

    @property
    def n(self) -> int:
        return len(self.p)

    @property
    def total(self) -> float:
        return float(math.fsum(self.p))

    def __repr__(self):
        return f"ProbabilityVector({self.p.tolist()})"


def point_mass(n: int, total: float = 1.0) -> ProbabilityVector:
    """All mass in state 0: the canonical initial condition (u0, 0, ..., 0)."""
    p = np.zeros(n)
    p[0] = total
    return ProbabilityVector(p)


# ---------------------------------------------------------------------------
# JSON serialization
#
# Canonical schemas:
#   {"loop": {"a": [...], "b": [...]}}
#   {"kernel": {"terms": [[c, alpha, k], ...]}}
#   {"generator": {"n": n, "entries": [[...row...], ...]}}


def to_json(obj) -> str:
    if isinstance(obj, LoopGenerator):
        payload = {"loop": {"a": obj.a.tolist(), "b": obj.b.tolist()}}
    elif isinstance(obj, ExpPolyKernel):
        payload = {"kernel": {"terms": [[c, alpha, k] for c, alpha, k in obj.terms]}}
    elif isinstance(obj, GeneratorMatrix):
        payload = {"generator": {"n": obj.n, "entries": obj.entries.tolist()}}
    else:
        raise TypeError(f"no JSON schema for {type(obj).__name__}")
    return json.dumps(payload)


def _require(cond, context, message):
    if not cond:
        raise ParseError(f"{context}: {message}")


def _float_list(raw, context):
    _require(isinstance(raw, list), context, "expected a list of numbers")
    out = []
    for i, x in enumerate(raw):
        _require(
            isinstance(x, (int, float)) and not isinstance(x, bool),
            f"{context}[{i}]",
            f"expected a number, got {x!r}",
        )
        out.append(float(x))
    return out


def from_json(text: str):
    """Parse any of the canonical schemas, dispatching on the top-level key."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    _require(isinstance(data, dict) and len(data) == 1, "document",
             "expected exactly one of the keys 'loop', 'kernel', 'generator'")
    key = next(iter(data))
    if key == "loop":
        return _parse_loop(data[key])
    if key == "kernel":
        return _parse_kernel(data[key])
    if key == "generator":
        return _parse_generator(data[key])
    raise ParseError(f"document: unknown key {key!r}")


def loop_from_json(text: str) -> LoopGenerator:
    obj = from_json(text)
    _require(isinstance(obj, LoopGenerator), "document", "expected a 'loop' object")
    return obj


def kernel_from_json(text: str) -> ExpPolyKernel:
    obj = from_json(text)
    _require(isinstance(obj, ExpPolyKernel), "document", "expected a 'kernel' object")
    return obj


def generator_from_json(text: str) -> GeneratorMatrix:
    obj = from_json(text)
    _require(isinstance(obj, GeneratorMatrix), "document", "expected a 'generator' object")
    return obj


def _parse_loop(raw) -> LoopGenerator:
    _require(isinstance(raw, dict), "loop", "expected an object")
    _require("a" in raw and "b" in raw, "loop", "needs fields 'a' and 'b'")
    a = _float_list(raw["a"], "loop.a")
    b = _float_list(raw["b"], "loop.b")
    _require(len(a) == len(b), "loop", f"length mismatch: {len(a)} vs {len(b)}")
    _require(len(a) >= 1, "loop", "needs at least one loop")
    return LoopGenerator(np.array(a), np.array(b))


def _parse_kernel(raw) -> ExpPolyKernel:
    _require(isinstance(raw, dict), "kernel", "expected an object")
    _require("terms" in raw, "kernel", "needs field 'terms'")
    _require(isinstance(raw["terms"], list), "kernel.terms", "expected a list")
    terms = []
    for i, term in enumerate(raw["terms"]):
        row = _float_list(term, f"kernel.terms[{i}]")
        _require(len(row) == 3, f"kernel.terms[{i}]", "expected [c, alpha, k]")
        terms.append((row[0], row[1], row[2]))
    return ExpPolyKernel(tuple(terms))


def _parse_generator(raw) -> GeneratorMatrix:
    _require(isinstance(raw, dict), "generator", "expected an object")
    _require("n" in raw and "entries" in raw, "generator", "needs fields 'n' and 'entries'")
    n = raw["n"]
    _require(isinstance(n, int) and n >= 1, "generator.n", "expected a positive integer")
    rows = raw["entries"]
    _require(isinstance(rows, list) and len(rows) == n, "generator.entries",
             f"expected {n} rows")
    entries = []
    for i, row in enumerate(rows):
        vals = _float_list(row, f"generator.entries[{i}]")
        _require(len(vals) == n, f"generator.entries[{i}]", f"expected {n} columns")
        entries.append(vals)
    return GeneratorMatrix(np.array(entries))
