import numpy as np
import pytest

from memloop import (
    InvalidRate,
    LoopGenerator,
    NonUniqueStationary,
    GeneratorMatrix,
    point_mass,
    time_grid,
)
from memloop import markov

from conftest import make_random_loop


class TestBuildGenerator:
    def test_three_state_template(self):
        A = markov.build_generator(LoopGenerator([2, 5], [8, 1]))
        expected = np.array([[-7, 8, 0], [2, -8, 1], [5, 0, -1]], float)
        assert np.array_equal(A.entries, expected)

    def test_two_state(self):
        A = markov.build_generator(LoopGenerator([1], [1]))
        assert np.array_equal(A.entries, np.array([[-1.0, 1.0], [1.0, -1.0]]))

    def test_column_sums_vanish(self, rng):
        for _ in range(20):
            A = markov.build_generator(make_random_loop(rng, n_max=10, lo=0.1, hi=10.0))
            assert np.abs(A.entries.sum(axis=0)).max() <= 1e-12


class TestBuildCyclic:
    def test_two_state_coincides(self):
        A = markov.build_cyclic_generator(1.0, 1.0, 1)
        assert np.array_equal(A.entries, np.array([[-1.0, 1.0], [1.0, -1.0]]))

    def test_three_state_template(self):
        A = markov.build_cyclic_generator(1.0, 2.0, 2)
        expected = np.array([[-1, 2, 0], [0, -2, 2], [1, 0, -2]], float)
        assert np.array_equal(A.entries, expected)

    def test_degenerate_rejected(self):
        with pytest.raises(InvalidRate):
            markov.build_cyclic_generator(1.0, 1.0, 0)
        with pytest.raises(InvalidRate):
            markov.build_cyclic_generator(0.0, 1.0, 2)


class TestStationary:
    def test_three_state_fixture(self):
        A = markov.build_generator(LoopGenerator([2, 5], [8, 1]))
        mu = markov.stationary(A, 1.0)
        assert mu.p == pytest.approx([8 / 55, 7 / 55, 40 / 55], abs=1e-12)

    def test_two_state_symmetric(self):
        A = markov.build_generator(LoopGenerator([3], [3]))
        assert markov.stationary(A, 1.0).p == pytest.approx([0.5, 0.5], abs=1e-14)

    def test_cyclic_closed_form(self):
        a, b, n = 1.7, 0.4, 6
        mu = markov.stationary(markov.build_cyclic_generator(a, b, n), 1.0)
        z = 1 / a + n / b
        expected = np.concatenate([[1 / a], np.full(n, 1 / b)]) / z
        assert mu.p == pytest.approx(expected, abs=1e-12)

    def test_loop_closed_form_fixture(self):
        gen = LoopGenerator([2, 5], [8, 1])
        assert markov.partition_z(gen) == pytest.approx(55 / 8, abs=1e-14)
        mu = markov.stationary_loop(gen, 1.0)
        assert mu.p[0] == pytest.approx(8 / 55, abs=1e-14)

    def test_cyclic_loop_equilibrium(self):
        # all splitting on the last loop, equal return rates
        n, a, b = 5, 0.9, 2.3
        gen = markov.cyclic_loop(a, b, n)
        mu = markov.stationary_loop(gen, 1.0)
        assert mu.p[0] == pytest.approx(b / (n * a + b), abs=1e-14)

    def test_closed_form_matches_nullspace(self, rng):
        for _ in range(25):
            gen = make_random_loop(rng, n_max=10, lo=0.1, hi=10.0)
            direct = markov.stationary(markov.build_generator(gen), 1.0)
            closed = markov.stationary_loop(gen, 1.0)
            assert np.abs(direct.p - closed.p).max() <= 1e-10

    def test_disconnected_is_not_unique(self):
        A = GeneratorMatrix(np.zeros((2, 2)))
        with pytest.raises(NonUniqueStationary):
            markov.stationary(A, 1.0)


class TestDetailedBalance:
    def test_two_state_always_holds(self, rng):
        for _ in range(10):
            gen = make_random_loop(rng, n_max=1)
            A = markov.build_generator(gen)
            assert markov.detailed_balance(A, markov.stationary(A, 1.0)).holds

    def test_paper_loop_violates(self):
        A = markov.build_generator(LoopGenerator([2, 5], [8, 1]))
        check = markov.detailed_balance(A, markov.stationary(A, 1.0))
        assert not check.holds
        assert check.max_violation > 0.1

    def test_decoupled_chain_holds(self):
        A = markov.build_generator(LoopGenerator([1.5, 0], [2.0, 0.7]))
        assert markov.detailed_balance(A, markov.stationary(A, 1.0)).holds

    def test_generic_loops_violate(self, rng):
        for _ in range(20):
            gen = make_random_loop(rng, n_max=6)
            if gen.n_loops < 2 or not np.any(gen.a[1:] > 0):
                continue
            A = markov.build_generator(gen)
            assert not markov.detailed_balance(A, markov.stationary(A, 1.0)).holds


class TestSpectrum:
    def test_real_fixture(self):
        values = markov.spectrum(markov.build_generator(LoopGenerator([2, 5], [8, 1])))
        assert np.abs(values - np.array([0, -5, -11])).max() <= 1e-9

    def test_complex_fixture(self):
        values = markov.spectrum(markov.build_generator(LoopGenerator([2, 5], [8, 3])))
        expected = np.array([0, -9 + 2j, -9 - 2j])
        expected = expected[np.lexsort((expected.imag, -expected.real))]
        assert np.abs(values - expected).max() <= 1e-9

    def test_two_state(self):
        a, b = 1.3, 0.6
        values = markov.spectrum(markov.build_generator(LoopGenerator([a], [b])))
        assert values == pytest.approx([0.0, -(a + b)], abs=1e-12)

    def test_zero_always_present_and_rest_stable(self, rng):
        for _ in range(20):
            gen = make_random_loop(rng, n_max=8, lo=0.1, hi=10.0)
            values = markov.spectrum(markov.build_generator(gen))
            assert np.any(values == 0.0)
            nonzero = values[values != 0.0]
            assert np.all(nonzero.real < 0.0)

    def test_trace_identity(self, rng):
        for _ in range(15):
            gen = make_random_loop(rng, n_max=8, lo=0.1, hi=10.0)
            A = markov.build_generator(gen)
            values = markov.spectrum(A)
            assert complex(values.sum()) == pytest.approx(
                np.trace(A.entries), abs=1e-8
            )

    def test_nonzero_eigenvalue_product(self, rng):
        # 3-state loop: lambda_1 * lambda_2 = a1 b2 + a2 b1 + a2 b2 + b1 b2
        for _ in range(15):
            gen = make_random_loop(rng, n_max=2, lo=0.1, hi=10.0)
            if gen.n_loops != 2:
                continue
            (a1, a2), (b1, b2) = gen.a, gen.b
            values = markov.spectrum(markov.build_generator(gen))
            nonzero = values[values != 0.0]
            product = complex(np.prod(nonzero))
            assert product.real == pytest.approx(
                a1 * b2 + a2 * b1 + a2 * b2 + b1 * b2, rel=1e-8
            )
            assert abs(product.imag) <= 1e-8 * abs(product.real)

    def test_matches_dense_eigensolver(self, rng):
        for _ in range(10):
            gen = make_random_loop(rng, n_max=6, lo=0.1, hi=10.0)
            A = markov.build_generator(gen)
            structured = markov.spectrum(A)
            from memloop import rootfind

            dense = np.linalg.eigvals(A.entries)
            assert rootfind.match_distances(structured, dense).max() <= 1e-8


class TestIntegrate:
    def test_two_state_closed_form(self):
        A = markov.build_generator(LoopGenerator([1], [1]))
        grid = time_grid(1.0, 1e-3)
        traj = markov.integrate(A, point_mass(2, 1.0), grid)
        assert traj.values[-1, 0] == pytest.approx(0.5 + 0.5 * np.exp(-2.0), abs=1e-10)

    def test_initial_condition(self):
        A = markov.build_generator(LoopGenerator([2, 5], [8, 1]))
        traj = markov.integrate(A, point_mass(3, 2.0), np.array([0.0, 0.5]))
        assert np.array_equal(traj.values[0], [2.0, 0.0, 0.0])

    def test_long_time_hits_stationary(self):
        gen = LoopGenerator([2, 5], [8, 1])
        A = markov.build_generator(gen)
        traj = markov.integrate(A, point_mass(3, 1.0), time_grid(50.0, 0.01))
        assert np.abs(traj.values[-1] - markov.stationary_loop(gen).p).max() <= 1e-8

    def test_mass_conservation_and_positivity(self, rng):
        for _ in range(10):
            gen = make_random_loop(rng, n_max=6, lo=0.1, hi=10.0)
            A = markov.build_generator(gen)
            traj = markov.integrate(A, point_mass(A.n, 1.0), time_grid(10.0, 0.01))
            masses = traj.values.sum(axis=1)
            assert np.abs(masses - 1.0).max() <= 1e-9 * 10.0
            assert traj.values.min() >= -1e-9

    def test_order_four_convergence(self):
        a, b = 1.0, 1.0
        A = markov.build_generator(LoopGenerator([a], [b]))

        def sup_error(h):
            grid = time_grid(2.0, h)
            traj = markov.integrate(A, point_mass(2, 1.0), grid)
            exact = 0.5 + 0.5 * np.exp(-(a + b) * grid)
            return np.abs(traj.values[:, 0] - exact).max()

        # substepping keeps h_eff*max|diag| <= 0.1, so compare in that regime
        ratio = sup_error(0.05) / sup_error(0.025)
        assert 12.0 <= ratio <= 20.0


class TestSimulate:
    def test_two_state_within_three_se(self):
        A = markov.build_generator(LoopGenerator([1], [1]))
        res = markov.simulate_ctmc(A, point_mass(2, 1.0), 3.0, 10_000, seed=7)
        for t_query in (1.0, 2.0, 3.0):
            i = int(np.argmin(np.abs(res.mean.times - t_query)))
            exact = 0.5 + 0.5 * np.exp(-2.0 * res.mean.times[i])
            assert abs(res.mean.values[i, 0] - exact) <= 3.0 * res.stderr[i, 0]

    def test_deterministic_under_seed(self):
        A = markov.build_generator(LoopGenerator([2, 5], [8, 1]))
        one = markov.simulate_ctmc(A, point_mass(3, 1.0), 2.0, 500, seed=123)
        two = markov.simulate_ctmc(A, point_mass(3, 1.0), 2.0, 500, seed=123)
        assert np.array_equal(one.mean.values, two.mean.values)
        assert np.array_equal(one.stderr, two.stderr)

    def test_single_path_reproducible(self):
        A = markov.build_generator(LoopGenerator([1], [2]))
        one = markov.simulate_ctmc(A, point_mass(2, 1.0), 5.0, 1, seed=9)
        two = markov.simulate_ctmc(A, point_mass(2, 1.0), 5.0, 1, seed=9)
        assert np.array_equal(one.mean.values, two.mean.values)

    def test_paths_conserve_mass_exactly(self):
        A = markov.build_generator(LoopGenerator([2, 5], [8, 1]))
        res = markov.simulate_ctmc(A, point_mass(3, 1.0), 3.0, 400, seed=3)
        assert np.all(res.mean.values.sum(axis=1) == 1.0)
