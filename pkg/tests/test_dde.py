import math

import numpy as np
import pytest

from memloop import InvalidRate, time_grid
from memloop import dde, kernels, markov, me_solver, rootfind


class TestErlangKernel:
    def test_single_stage_is_exponential(self):
        K = dde.erlang_kernel(1, 1.0)
        assert K.terms == ((1.0, 1.0, 0),)

    def test_two_stage_fixture(self):
        K = dde.erlang_kernel(2, 1.0)
        assert K.terms == ((4.0, 2.0, 1),)
        mom = kernels.moments(K)
        assert mom.mass == pytest.approx(1.0, rel=1e-14)
        assert mom.mean_time == pytest.approx(1.0, rel=1e-14)

    def test_laplace_is_power(self):
        n, t_delay = 5, 0.8
        b = n / t_delay
        rf = kernels.kernel_laplace(dde.erlang_kernel(n, t_delay))
        for lam in (0.1, 1.0, 4.2):
            assert rf(lam) == pytest.approx((b / (lam + b)) ** n, rel=1e-12)

    def test_invalid_parameters(self):
        with pytest.raises(InvalidRate):
            dde.erlang_kernel(0, 1.0)
        with pytest.raises(InvalidRate):
            dde.erlang_kernel(2, -1.0)


class TestSolveDde:
    def test_history_is_exact(self):
        a, t_delay = 1.6, 1.8
        traj = dde.solve_dde(a, t_delay, 1.0, time_grid(10.0, 0.01))
        head = traj.times <= t_delay + 1e-12
        assert np.array_equal(traj.values[head], np.exp(-a * traj.times[head]))

    def test_endpoint_of_history(self):
        a, t_delay = 0.9, 1.3
        traj = dde.solve_dde(a, t_delay, 2.0, time_grid(5.0, 0.01))
        i = int(np.argmin(np.abs(traj.times - t_delay)))
        assert traj.values[i] == pytest.approx(2.0 * math.exp(-a * t_delay), abs=1e-15)

    def test_zero_rate_is_constant(self):
        traj = dde.solve_dde(0.0, 1.0, 1.0, time_grid(5.0, 0.01))
        assert np.array_equal(traj.values, np.ones_like(traj.values))

    def test_paper_figure_equilibrium(self):
        a, t_delay = 1.6, 1.8
        traj = dde.solve_dde(a, t_delay, 1.0, time_grid(40.0, 0.01))
        assert abs(traj.values[-1] - 1.0 / (1.0 + a * t_delay)) <= 1e-3

    def test_step_adjusts_to_divide_delay(self):
        traj = dde.solve_dde(1.0, 1.0, 1.0, time_grid(3.0, 0.07))
        h = traj.times[1] - traj.times[0]
        assert round(1.0 / h) == pytest.approx(1.0 / h)

    def test_convergence_to_refined_solution(self):
        coarse = dde.solve_dde(1.0, 1.0, 1.0, time_grid(5.0, 0.05))
        fine = dde.solve_dde(1.0, 1.0, 1.0, time_grid(5.0, 0.002))
        idx = [int(round(t / 0.002)) for t in coarse.times]
        gap = np.abs(coarse.values - fine.values[idx]).max()
        assert gap <= 1e-6


class TestChainApproximation:
    def test_single_stage_is_two_state(self):
        a, t_delay = 1.2, 2.0
        grid = time_grid(8.0, 0.01)
        chain = dde.chain_approximation(a, t_delay, 1, 1.0, grid)
        b = 1.0 / t_delay
        exact = b / (a + b) + a / (a + b) * np.exp(-(a + b) * grid)
        assert np.abs(chain.values - exact).max() <= 1e-9

    def test_equilibrium_independent_of_stages(self):
        a, t_delay, u0 = 1.6, 1.8, 1.0
        expected = u0 / (1.0 + a * t_delay)
        for n in (1, 2, 5, 10, 20, 40):
            loop = markov.cyclic_loop(a, n / t_delay, n)
            assert me_solver.equilibrium_me(loop, u0) == pytest.approx(
                expected, abs=1e-12
            )
            mu = markov.stationary_loop(loop, u0)
            assert mu.p[0] == pytest.approx(expected, abs=1e-12)

    def test_sup_gap_decreases(self):
        ref = dde.solve_dde(1.0, 1.0, 1.0, time_grid(10.0, 0.01))
        gaps = []
        for n in (5, 10, 20, 40):
            chain = dde.chain_approximation(1.0, 1.0, n, 1.0, ref.times)
            gaps.append(me_solver.sup_difference(chain, ref))
        assert all(x > y for x, y in zip(gaps, gaps[1:]))

    def test_matches_memory_equation_with_erlang_kernel(self):
        # the cyclic chain and the Erlang-kernel memory equation are the
        # same object in two notations
        a, t_delay, n = 1.0, 1.0, 4
        grid = time_grid(6.0, 1e-3)
        chain = dde.chain_approximation(a, t_delay, n, 1.0, grid)
        volt = me_solver.solve_me(a, dde.erlang_kernel(n, t_delay), 1.0, grid)
        assert me_solver.sup_difference(chain, volt) <= 5e-4


class TestLaplaceConvergence:
    def test_monotone_in_stage_count(self):
        lams = np.arange(0.1, 5.01, 0.1)
        gaps = [dde.laplace_delay_gap(1.0, n, lams) for n in (5, 10, 20, 40, 80)]
        assert all(x > y for x, y in zip(gaps, gaps[1:]))


class TestCharRoots:
    def test_zero_is_exact_root(self):
        roots = dde.dde_char_roots(1.7, 0.9, 4)
        assert 0.0 in roots

    def test_residuals_and_conjugacy(self):
        a, t_delay = 1.0, 1.0
        roots = dde.dde_char_roots(a, t_delay, 6)
        for z in roots:
            assert abs(z + a - a * np.exp(-z * t_delay)) <= 1e-10
        nonzero = [z for z in roots if abs(z) > 1e-12]
        assert all(z.conjugate() in nonzero for z in nonzero)
        assert all(z.real < 0 for z in nonzero)

    def test_first_pair_fixture(self):
        # frozen from the Newton oracle itself (residual-verified above)
        roots = dde.dde_char_roots(1.0, 1.0, 2)
        first = min((z for z in roots if z.imag > 0), key=abs)
        assert first.real == pytest.approx(-1.53209212198638, abs=1e-9)
        assert first.imag == pytest.approx(4.597158013302574, abs=1e-9)


class TestCyclicSpectrum:
    def test_single_stage_two_state(self):
        a, t_delay = 1.0, 0.5
        values = dde.cyclic_spectrum(a, t_delay, 1)
        assert values == pytest.approx([0.0, -(a + 1.0 / t_delay)], abs=1e-10)

    def test_matches_dense_spectrum(self):
        for n in (3, 10, 25, 40):
            values = dde.cyclic_spectrum(1.0, 1.0, n)
            dense = markov.spectrum(markov.build_cyclic_generator(1.0, n, n))
            assert rootfind.match_distances(values, dense).max() <= 1e-8

    def test_exactly_one_zero_root(self):
        values = dde.cyclic_spectrum(2.0, 1.5, 12)
        assert np.count_nonzero(values == 0.0) == 1
        nonzero = values[values != 0.0]
        assert np.all(nonzero.real < 0)

    def test_root_distance_to_delay_roots_decreases(self):
        roots = dde.dde_char_roots(1.0, 1.0, 6)
        nonzero_ref = [z for z in roots if abs(z) > 1e-9]
        dists = []
        for n in (10, 20, 40, 80):
            eigs = dde.cyclic_spectrum(1.0, 1.0, n)
            small = min((z for z in eigs if abs(z) > 1e-9), key=abs)
            dists.append(min(abs(small - z) for z in nonzero_ref))
        assert all(x > y for x, y in zip(dists, dists[1:]))
