import numpy as np
import pytest

from oracles import path_sum_joint, random_hermitian, random_unitary, taylor_expm
from qheat.errors import InvalidSpec
from qheat.linalg import eig_hermitian
from qheat.model import InitialState, Observable, spin1_operators
from qheat.protocol import (
    BLOCK_SIZE,
    WaitingTimeSpec,
    build_chain,
    exact_joint,
    heat_histogram,
    run_monte_carlo,
    sample_trajectory,
    trajectory_stream,
)

UNIFORM3 = InitialState(np.full(3, 1 / 3))


def commuting_observable(n=3):
    return Observable(np.arange(n, dtype=float), np.eye(n))


def assert_doubly_stochastic(mat, tol=1e-12):
    assert np.max(np.abs(mat.sum(axis=0) - 1)) < tol
    assert np.max(np.abs(mat.sum(axis=1) - 1)) < tol


class TestWaitingTimes:
    @pytest.mark.parametrize(
        "kwargs", [dict(kind="fixed", tau=0.0), dict(kind="fixed", tau=-1.0), dict(kind="uniform", tau_min=0.0, tau_max=1.0),
                   dict(kind="uniform", tau_min=2.0, tau_max=1.0), dict(kind="exponential", mean=0.0), dict(kind="gamma")],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidSpec):
            WaitingTimeSpec(**kwargs)

    def test_inverse_cdf(self):
        u = np.array([0.0, 0.5, 0.9])
        np.testing.assert_allclose(WaitingTimeSpec.uniform(0.5, 1.5).from_uniforms(u), [0.5, 1.0, 1.4])
        np.testing.assert_allclose(WaitingTimeSpec.exponential(2.0).from_uniforms(u), -2.0 * np.log(1 - u))
        np.testing.assert_allclose(WaitingTimeSpec.fixed(0.3).from_uniforms(u), 0.3)


class TestBuildChain:
    def test_commuting_observable_locks(self, spin1_system):
        h, _, _ = spin1_system
        chain = build_chain(h, commuting_observable(), [1.0, 0.7, 2.0])
        assert chain.locked
        for mat in chain.matrices:
            np.testing.assert_allclose(mat, np.eye(3), atol=1e-12)

    def test_generic_observable_not_locked(self, spin1_system):
        h, _, o = spin1_system
        assert not build_chain(h, o, [1.0]).locked

    def test_single_measurement(self, spin1_system, fig2_state):
        h, _, o = spin1_system
        chain = build_chain(h, o, [1.0])
        assert chain.middle == () and chain.n_measurements == 1
        p = exact_joint(fig2_state, chain).p
        np.testing.assert_allclose(p, chain.last @ chain.first @ np.diag(fig2_state.populations), atol=1e-15)

    def test_empty_chain(self, spin1_system):
        h, _, o = spin1_system
        chain = build_chain(h, o, [])
        assert chain.matrices == [] and chain.n_measurements == 0

    def test_against_taylor_propagator(self, spin1_system):
        h, _, o = spin1_system
        sz, sx = spin1_operators()
        u = taylor_expm(-1j * (sz + 0.5 * sx))
        energy = h.vectors
        omega = h.vectors @ o.eigenbasis
        first = np.abs(omega.conj().T @ u @ energy) ** 2
        middle = np.abs(omega.conj().T @ u @ omega) ** 2
        last = np.abs(energy.conj().T @ omega) ** 2
        chain = build_chain(h, o, [1.0, 1.0])
        np.testing.assert_allclose(chain.first, first, atol=1e-9)
        np.testing.assert_allclose(chain.middle[0], middle, atol=1e-9)
        np.testing.assert_allclose(chain.last, last, atol=1e-9)

    def test_doubly_stochastic(self, rng):
        for n in (2, 3, 4):
            h = eig_hermitian(random_hermitian(rng, n))
            o = Observable(np.arange(n, dtype=float), random_unitary(rng, n))
            for mat in build_chain(h, o, rng.uniform(0.1, 2.0, size=5)).matrices:
                assert_doubly_stochastic(mat)

    def test_tau_placement_does_not_matter(self, spin1_system, fig2_state):
        h, _, o = spin1_system
        taus = [0.4, 1.3, 0.9, 2.2]
        a = exact_joint(fig2_state, build_chain(h, o, taus, evolve_before_first=True)).p
        b = exact_joint(fig2_state, build_chain(h, o, taus[1:] + [taus[0]], evolve_before_first=False)).p
        np.testing.assert_allclose(a, b, atol=1e-14)

    def test_rejects_nonpositive_times(self, spin1_system):
        h, _, o = spin1_system
        with pytest.raises(InvalidSpec):
            build_chain(h, o, [1.0, 0.0])


class TestExactJoint:
    def test_empty_chain_is_diagonal(self, spin1_system, fig2_state):
        h, _, o = spin1_system
        np.testing.assert_array_equal(exact_joint(fig2_state, build_chain(h, o, [])).p, np.diag(fig2_state.populations))

    def test_locked_is_diagonal(self, spin1_system, fig2_state):
        h, _, _ = spin1_system
        p = exact_joint(fig2_state, build_chain(h, commuting_observable(), [1.0] * 7)).p
        np.testing.assert_allclose(p, np.diag(fig2_state.populations), atol=1e-12)

    def test_against_path_enumeration(self, spin1_system, fig2_state):
        h, _, o = spin1_system
        sz, sx = spin1_operators()
        taus = [1.0] * 3
        expected = path_sum_joint(fig2_state.populations, sz + 0.5 * sx, h.vectors, h.vectors @ o.eigenbasis, taus)
        joint = exact_joint(fig2_state, build_chain(h, o, taus))
        assert np.max(np.abs(joint.p - expected)) < 1e-12

    def test_marginals(self, rng):
        h = eig_hermitian(random_hermitian(rng, 3))
        o = Observable([0.0, 1.0, 2.0], random_unitary(rng, 3))
        s = InitialState.normalized(rng.uniform(size=3))
        joint = exact_joint(s, build_chain(h, o, rng.uniform(0.1, 2, size=6)))
        assert np.all(joint.p >= 0)
        assert abs(joint.p.sum() - 1) < 1e-12
        np.testing.assert_allclose(joint.initial_marginal, s.populations, atol=1e-12)

    def test_uniform_state_stays_uniform(self, rng):
        for _ in range(20):
            h = eig_hermitian(random_hermitian(rng, 3))
            o = Observable([0.0, 1.0, 2.0], random_unitary(rng, 3))
            joint = exact_joint(UNIFORM3, build_chain(h, o, rng.uniform(0.1, 2, size=rng.integers(0, 8))))
            np.testing.assert_allclose(joint.final_marginal, 1 / 3, atol=1e-12)

    def test_commuting_middle_permutation(self, rng):
        # two-level middle kernels always commute, so their order is irrelevant
        h = eig_hermitian(random_hermitian(rng, 2))
        o = Observable([0.0, 1.0], random_unitary(rng, 2))
        s = InitialState([0.8, 0.2])
        taus = [0.3, 1.1, 0.8, 1.9, 0.45]
        a = exact_joint(s, build_chain(h, o, taus)).p
        b = exact_joint(s, build_chain(h, o, [taus[0]] + taus[:0:-1])).p
        np.testing.assert_allclose(a, b, atol=1e-14)


class TestSampling:
    def test_pure_locked_state(self, spin1_system):
        h, _, _ = spin1_system
        chain = build_chain(h, commuting_observable(), [1.0] * 4)
        stream = np.random.default_rng(1)
        for _ in range(200):
            rec = sample_trajectory(stream, InitialState([1.0, 0.0, 0.0]), chain)
            assert (rec.first_index, rec.final_index, rec.heat) == (0, 0, 0.0)
            assert rec.intermediate == (0, 0, 0, 0)

    def test_empty_chain_has_no_heat(self, spin1_system):
        h, _, o = spin1_system
        chain = build_chain(h, o, [])
        stream = np.random.default_rng(2)
        assert all(sample_trajectory(stream, UNIFORM3, chain).heat == 0.0 for _ in range(200))

    def test_heat_matches_levels(self, spin1_system, fig2_state):
        h, e, o = spin1_system
        chain = build_chain(h, o, [1.0] * 3)
        rec = sample_trajectory(np.random.default_rng(5), fig2_state, chain)
        assert rec.heat == e.levels[rec.final_index] - e.levels[rec.first_index]

    def test_single_trajectory_matches_block_sampler(self, spin1_system, fig2_state):
        h, _, o = spin1_system
        M = 4
        chain = build_chain(h, o, [1.0] * M)
        counts = np.zeros((3, 3), dtype=np.int64)
        for t in range(300):
            rec = sample_trajectory(trajectory_stream(7, t, M), fig2_state, chain)
            counts[rec.final_index, rec.first_index] += 1
        mc = run_monte_carlo(fig2_state, h, o, WaitingTimeSpec.fixed(1.0), M, 300, master_seed=7)
        np.testing.assert_array_equal(mc.joint.counts, counts)

    def test_binomial_concentration(self, spin1_system, fig2_state):
        h, _, o = spin1_system
        R = 100_000
        exact = exact_joint(fig2_state, build_chain(h, o, [1.0] * 6)).p
        mc = run_monte_carlo(fig2_state, h, o, WaitingTimeSpec.fixed(1.0), 6, R, master_seed=11)
        within = np.abs(mc.joint.p - exact) <= 4 * np.sqrt(exact * (1 - exact) / R) + 1e-15
        assert within.mean() >= 0.99
        assert mc.joint.counts.sum() == R and abs(mc.joint.p.sum() - 1) < 1e-14

    def test_convergence_rate(self, spin1_system, fig2_state):
        h, _, o = spin1_system
        exact = exact_joint(fig2_state, build_chain(h, o, [1.0] * 5)).p
        errors = []
        for R in (1_000, 10_000, 100_000):
            mc = run_monte_carlo(fig2_state, h, o, WaitingTimeSpec.fixed(1.0), 5, R, master_seed=4)
            errors.append(np.max(np.abs(mc.joint.p - exact)))
        assert errors[0] > errors[1] > errors[2]
        sigma = np.sqrt(exact * (1 - exact) / 100_000)
        assert np.all(np.abs(mc.joint.p - exact) <= 4 * sigma + 1e-15)

    def test_workers_are_bit_identical(self, spin1_system, fig2_state):
        h, _, o = spin1_system
        R = 2 * BLOCK_SIZE + 123
        one = run_monte_carlo(fig2_state, h, o, WaitingTimeSpec.fixed(1.0), 5, R, master_seed=99, workers=1)
        three = run_monte_carlo(fig2_state, h, o, WaitingTimeSpec.fixed(1.0), 5, R, master_seed=99, workers=3)
        np.testing.assert_array_equal(one.joint.counts, three.joint.counts)
        assert one.heat_histogram == three.heat_histogram

    def test_seed_changes_sample(self, spin1_system, fig2_state):
        h, _, o = spin1_system
        a = run_monte_carlo(fig2_state, h, o, WaitingTimeSpec.fixed(1.0), 3, 5000, master_seed=1)
        b = run_monte_carlo(fig2_state, h, o, WaitingTimeSpec.fixed(1.0), 3, 5000, master_seed=2)
        assert not np.array_equal(a.joint.counts, b.joint.counts)

    def test_invalid_arguments(self, spin1_system, fig2_state):
        h, _, o = spin1_system
        with pytest.raises(InvalidSpec):
            run_monte_carlo(fig2_state, h, o, WaitingTimeSpec.fixed(1.0), 3, 0)
        with pytest.raises(InvalidSpec):
            run_monte_carlo(fig2_state, h, o, WaitingTimeSpec.fixed(1.0), -1, 10)

    def test_heat_histogram_bins(self, spin1_system, fig2_state):
        h, e, o = spin1_system
        mc = run_monte_carlo(fig2_state, h, o, WaitingTimeSpec.fixed(1.0), 3, 2000, master_seed=3)
        hist = heat_histogram(mc.joint.counts, e.levels)
        # equally spaced levels: heats -2d, -d, 0, d, 2d
        assert len(hist) == 5
        assert sum(c for _, c in hist) == 2000
        assert [q for q, _ in hist] == sorted(q for q, _ in hist)


def averaged_transition(h, o, wspec, nodes=80):
    """E_tau |<Omega_j|U(tau)|Omega_k>|^2 for uniform tau, by Gauss-Legendre quadrature."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    a, b = wspec.tau_min, wspec.tau_max
    taus = 0.5 * (b - a) * x + 0.5 * (b + a)
    total = np.zeros((h.dim, h.dim))
    for t, wt in zip(taus, w):
        phases = np.exp(-1j * h.values * t)
        u = (o.eigenbasis.conj().T * phases) @ o.eigenbasis
        total += 0.5 * wt * np.abs(u) ** 2
    return total


class TestRandomWaitingTimes:
    def test_against_averaged_chain(self, spin1_system, fig2_state):
        h, _, o = spin1_system
        wspec = WaitingTimeSpec.uniform(0.5, 1.5)
        M, R = 6, 100_000
        # i.i.d. times: the joint law is the chain built from the tau-averaged kernel
        avg = averaged_transition(h, o, wspec)
        chain = build_chain(h, o, [1.0] * M)
        p = np.diag(fig2_state.populations)
        p = chain.first @ p
        for _ in range(M - 1):
            p = avg @ p
        p = chain.last @ p
        mc = run_monte_carlo(fig2_state, h, o, wspec, M, R, master_seed=21)
        assert np.all(np.abs(mc.joint.p - p) <= 4 * np.sqrt(p * (1 - p) / R) + 1e-15)

    def test_exponential_times_deterministic(self, spin1_system, fig2_state):
        h, _, o = spin1_system
        wspec = WaitingTimeSpec.exponential(1.0)
        R = BLOCK_SIZE + 10
        a = run_monte_carlo(fig2_state, h, o, wspec, 4, R, master_seed=5, workers=1)
        b = run_monte_carlo(fig2_state, h, o, wspec, 4, R, master_seed=5, workers=2)
        np.testing.assert_array_equal(a.joint.counts, b.joint.counts)

    def test_large_m_uniform_for_fixed_and_random(self, spin1_system, fig2_state):
        h, _, o = spin1_system
        for wspec in (WaitingTimeSpec.fixed(1.0), WaitingTimeSpec.uniform(0.5, 1.5)):
            mc = run_monte_carlo(fig2_state, h, o, wspec, 150, 300_000, master_seed=8)
            assert np.max(np.abs(mc.joint.final_marginal - 1 / 3)) < 0.01

    def test_fixed_vs_random_at_m20(self, spin1_system, fig2_state):
        # at M = 20 neither run has reached the uniform state; they relax alike
        h, _, o = spin1_system
        fixed = run_monte_carlo(fig2_state, h, o, WaitingTimeSpec.fixed(1.0), 20, 300_000, master_seed=8)
        rand = run_monte_carlo(fig2_state, h, o, WaitingTimeSpec.uniform(0.5, 1.5), 20, 300_000, master_seed=8)
        assert np.max(np.abs(fixed.joint.final_marginal - rand.joint.final_marginal)) < 0.01
