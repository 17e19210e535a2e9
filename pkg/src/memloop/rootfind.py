"""Simultaneous polynomial root finding (Aberth-Ehrlich) with Newton polish.

The iteration works with arbitrary evaluation oracles so that structured
characteristic functions (e.g. (z+a)(z+b)^N - a b^N) can be solved in product
form, which is far better conditioned than their expanded coefficients.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as npoly

from .core import RootFindingFailure


def aberth(f, df, guesses, *, tol=1e-13, max_iter=200, newton_polish=3):
    """Find all roots of an analytic function with known degree simultaneously.

    Parameters
    ----------
    f, df : callables mapping a complex ndarray to function/derivative values.
    guesses : initial root estimates, one per expected root.
    tol : relative displacement threshold for convergence.
    newton_polish : plain Newton steps applied after the simultaneous phase.
    """
    z = np.asarray(guesses, complex).copy()
    n = len(z)
    for _ in range(max_iter):
        fz = f(z)
        dfz = df(z)
        dfz = np.where(dfz == 0.0, 1e-300, dfz)
        w = fz / dfz
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, np.inf)
        s = (1.0 / diff).sum(axis=1)
        denom = 1.0 - w * s
        denom = np.where(denom == 0.0, 1e-300, denom)
        step = w / denom
        z = z - step
        if np.all(np.abs(step) <= tol * (1.0 + np.abs(z))):
            break
    for _ in range(newton_polish):
        fz = f(z)
        dfz = df(z)
        dfz = np.where(dfz == 0.0, 1e-300, dfz)
        z = z - fz / dfz
    if n > 1:
        z = symmetrize_conjugates(z)
    return z


def symmetrize_conjugates(roots, imag_tol=1e-9):
    """Pair roots of a real function into exact conjugates; collapse stray
    imaginary parts below tolerance (relative to the root magnitude)."""
    roots = np.asarray(roots, complex).copy()
    scale = 1.0 + np.abs(roots)
    roots[np.abs(roots.imag) <= imag_tol * scale] = roots[
        np.abs(roots.imag) <= imag_tol * scale
    ].real
    used = np.zeros(len(roots), dtype=bool)
    for i in range(len(roots)):
        if used[i] or roots[i].imag == 0.0:
            continue
        target = np.conj(roots[i])
        cand = [j for j in range(len(roots)) if not used[j] and j != i]
        if not cand:
            continue
        j = min(cand, key=lambda j: abs(roots[j] - target))
        if abs(roots[j] - target) <= 1e-6 * (1.0 + abs(target)):
            mean = 0.5 * (roots[i] + np.conj(roots[j]))
            roots[i], roots[j] = mean, np.conj(mean)
            used[i] = used[j] = True
    return roots


def polynomial_roots(coeffs, *, tol=1e-13, max_iter=200):
    """All complex roots of a real polynomial given ascending coefficients.

    Exact zero constant terms are deflated into roots at the origin first;
    degrees up to two are solved in closed form.
    """
    c = np.atleast_1d(np.asarray(coeffs, float))
    scale = float(np.abs(c).max())
    if scale == 0.0:
        raise RootFindingFailure("zero polynomial has no well-defined roots")
    # strip vanishing leading (high-order) coefficients
    top = np.nonzero(np.abs(c) > 0.0)[0][-1]
    c = c[: top + 1]
    # deflate exact roots at the origin
    n_zero = 0
    while c[0] == 0.0 and len(c) > 1:
        c = c[1:]
        n_zero += 1
    zeros = [0.0 + 0.0j] * n_zero
    d = len(c) - 1
    if d == 0:
        return np.array(zeros, complex)
    if d == 1:
        return np.array(zeros + [-c[0] / c[1]], complex)
    if d == 2:
        a2, a1, a0 = c[2], c[1], c[0]
        disc = np.sqrt(complex(a1 * a1 - 4.0 * a2 * a0))
        # Citardauq pairing avoids cancellation for the small root
        q = -0.5 * (a1 + disc) if a1.real * disc.real >= 0 else -0.5 * (a1 - disc)
        r1 = q / a2
        r2 = a0 / q if q != 0 else 0.0
        return np.array(zeros + [r1, r2], complex)

    monic = c / c[-1]
    radius = 1.0 + float(np.abs(monic[:-1]).max())
    angles = 2.0 * np.pi * (np.arange(d) + 0.37) / d
    guesses = radius * np.exp(1j * angles)

    dmonic = npoly.polyder(monic)
    roots = aberth(
        lambda z: npoly.polyval(z, monic),
        lambda z: npoly.polyval(z, dmonic),
        guesses,
        tol=tol,
        max_iter=max_iter,
    )
    return np.concatenate([np.array(zeros, complex), roots])


def polynomial_residual(coeffs, roots):
    """Normalized residual max_i |p(r_i)| / sum_k |c_k r_i^k|."""
    c = np.atleast_1d(np.asarray(coeffs, float))
    roots = np.asarray(roots, complex)
    vals = np.abs(npoly.polyval(roots, c))
    powers = np.abs(roots)[:, None] ** np.arange(len(c))[None, :]
    norms = powers @ np.abs(c)
    norms = np.where(norms == 0.0, 1.0, norms)
    return float((vals / norms).max()) if len(roots) else 0.0


def sort_spectrum(values):
    """Order eigenvalues by descending real part, ascending imaginary part."""
    values = np.asarray(values, complex)
    order = np.lexsort((values.imag, -values.real))
    return values[order]


def match_distances(found, reference):
    """Greedy nearest-neighbor distances from each ``found`` value to
    ``reference`` (without replacement)."""
    found = list(np.asarray(found, complex))
    reference = list(np.asarray(reference, complex))
    out = []
    for z in found:
        if not reference:
            break
        j = min(range(len(reference)), key=lambda j: abs(reference[j] - z))
        out.append(abs(reference.pop(j) - z))
    return np.array(out)
