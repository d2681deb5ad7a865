"""Reptation sampler: move kernel, estimators, and the small-instance oracle."""

import itertools
import math

import numpy as np
import pytest

from sptqmc import (
    EstimateWithError,
    GaussianTrial,
    HarmonicPotential,
    QuarticPotential,
    ReptationSampler,
    Reptile,
    SeriesTooShortError,
    acceptance_probability,
    action_moments,
    adaptive_burn_in,
    derive_rng,
    energy_estimator,
    extrapolate_linear,
    init_reptile,
    link_action,
    local_energy,
    pure_estimator,
    reptation_move,
    run_reptation,
    sample_local_energy_series,
    vmc_estimate,
)

ALPHA = 1.2

# Pinned after the first validated run (alpha=1.2, harmonic, eps=0.05,
# n_beads=100, sweeps=150, burn_in_sweeps=40, seed=9): 14953/15000.
GOLDEN_ACCEPTANCE = 0.9968666666666667


@pytest.fixture(scope="module")
def harmonic_run():
    return run_reptation(
        GaussianTrial(ALPHA),
        HarmonicPotential(),
        n_beads=120,
        epsilon=0.05,
        sweeps=2000,
        seed=11,
        burn_in_sweeps=100,
    )


@pytest.fixture(scope="module")
def exact_run():
    return run_reptation(
        GaussianTrial(1.0),
        HarmonicPotential(),
        n_beads=50,
        epsilon=0.05,
        sweeps=200,
        seed=5,
        burn_in_sweeps=20,
    )


class TestPrimitives:
    def test_link_action_value(self):
        assert link_action(0.1, 0.3, 0.5) == pytest.approx(0.04, rel=1e-15)

    def test_link_action_symmetric(self):
        assert link_action(0.2, 0.7, -0.4) == link_action(0.2, -0.4, 0.7)

    def test_acceptance_probability(self):
        assert acceptance_probability(0.0) == 1.0
        assert acceptance_probability(-3.0) == 1.0
        assert acceptance_probability(2.0) == pytest.approx(math.exp(-2.0), rel=1e-15)


class TestReptile:
    def test_requires_two_beads(self):
        with pytest.raises(ValueError, match="2 beads"):
            Reptile([0.0], [0.5], 0.1)

    def test_w_values_must_match(self):
        with pytest.raises(ValueError, match="per bead"):
            Reptile([0.0, 1.0], [0.5], 0.1)

    def test_direction_validated(self):
        with pytest.raises(ValueError, match="direction"):
            Reptile([0.0, 1.0], [0.5, 0.5], 0.1, direction=0)

    def test_counts_and_ends(self):
        r = Reptile([0.0, 1.0, 2.0, 3.0], [0.1, 0.2, 0.3, 0.4], 0.5)
        assert r.n_beads == 4
        assert r.n_links == 3
        assert r.path_length == pytest.approx(1.5, rel=1e-15)
        assert r.head == 3.0
        assert r.tail == 0.0
        assert r.middle == 2.0
        assert r.end_energy() == pytest.approx(0.25, rel=1e-15)

    def test_cached_action_matches_recomputation(self):
        r = Reptile([0.0, 1.0, 2.0], [0.3, -0.1, 0.4], 0.7)
        expected = link_action(0.7, 0.3, -0.1) + link_action(0.7, -0.1, 0.4)
        assert r.total_action == pytest.approx(expected, rel=1e-15)
        assert r.recomputed_action() == pytest.approx(r.total_action, rel=1e-15)

    def test_audit_links_zero_for_consistent_table(self):
        table = {0.0: 0.3, 1.0: -0.1, 2.0: 0.4}
        r = Reptile([0.0, 1.0, 2.0], [0.3, -0.1, 0.4], 0.7)
        assert r.audit_links(lambda b: table[b]) == 0.0


class TestInitReptile:
    def test_two_beads_single_link(self):
        rng = derive_rng(1, "init")
        r = init_reptile(GaussianTrial(ALPHA), HarmonicPotential(), 2, 0.1, rng,
                         equilibration_steps=50)
        assert r.n_links == 1
        assert r.total_action == pytest.approx(
            link_action(0.1, r.w_values[0], r.w_values[1]), rel=1e-15
        )

    def test_exact_trial_constant_action(self):
        rng = derive_rng(2, "init")
        r = init_reptile(GaussianTrial(1.0), HarmonicPotential(), 40, 0.05, rng,
                         equilibration_steps=50)
        assert all(w == 0.5 for w in r.w_values)
        assert r.total_action == 0.5 * 0.05 * r.n_links

    def test_cache_consistent_after_init(self):
        rng = derive_rng(3, "init")
        trial, pot = GaussianTrial(ALPHA), QuarticPotential(0.3)
        r = init_reptile(trial, pot, 30, 0.05, rng, equilibration_steps=100)
        assert abs(r.total_action - r.recomputed_action()) < 1e-12
        assert r.audit_links(lambda b: float(local_energy(trial, pot, b))) < 1e-12

    def test_validation(self):
        rng = derive_rng(4, "init")
        with pytest.raises(ValueError, match="n_beads"):
            init_reptile(GaussianTrial(1.0), HarmonicPotential(), 1, 0.1, rng)
        with pytest.raises(ValueError, match="epsilon"):
            init_reptile(GaussianTrial(1.0), HarmonicPotential(), 5, 0.0, rng)


class TestMoveKernel:
    def test_exact_trial_always_accepts(self):
        rng = derive_rng(5, "move")
        trial, pot = GaussianTrial(1.0), HarmonicPotential()
        r = init_reptile(trial, pot, 20, 0.05, rng, equilibration_steps=50)
        sampler = ReptationSampler.for_system(trial, pot, r, rng)
        for _ in range(500):
            sampler.move()
        assert sampler.acceptance_rate == 1.0

    def test_rigged_constant_w_always_accepts(self):
        # new link action equals the removed one, so every dS is exactly 0
        rng = derive_rng(6, "move")
        sampler = ReptationSampler.from_functions(
            w_fn=lambda s: 0.37,
            propose_fn=lambda rng_, end: end + rng_.normal(),
            beads=[0.0, 0.1, 0.2],
            epsilon=0.7,
            rng=rng,
        )
        before = sampler.reptile.total_action
        for _ in range(300):
            assert sampler.move()
        assert sampler.acceptance_rate == 1.0
        assert sampler.reptile.total_action == before

    def test_bounce_flips_direction_on_rejection(self):
        # proposed beads carry an enormous W, so rejection is certain
        rng = derive_rng(7, "move")
        sampler = ReptationSampler.from_functions(
            w_fn=lambda s: 1e7 * float(s),
            propose_fn=lambda rng_, end: end + 1,
            beads=[0, 0, 0],
            epsilon=0.7,
            rng=rng,
        )
        assert sampler.reptile.direction == 1
        assert not sampler.move()
        assert sampler.reptile.direction == -1
        assert not sampler.move()
        assert sampler.reptile.direction == 1
        assert list(sampler.reptile.beads) == [0, 0, 0]
        assert sampler.acceptance_rate == 0.0

    def test_policy_validated(self):
        rng = derive_rng(8, "move")
        with pytest.raises(ValueError, match="direction policy"):
            ReptationSampler.from_functions(
                w_fn=lambda s: 0.0,
                propose_fn=lambda rng_, end: end,
                beads=[0.0, 1.0],
                epsilon=0.1,
                rng=rng,
                direction_policy="diagonal",
            )

    def test_move_alias_drives_sampler(self):
        rng = derive_rng(9, "move")
        sampler = ReptationSampler.from_functions(
            w_fn=lambda s: 0.1,
            propose_fn=lambda rng_, end: end + rng_.normal(),
            beads=[0.0, 1.0, 2.0],
            epsilon=0.1,
            rng=rng,
        )
        assert reptation_move(sampler) is True
        assert sampler.moves_proposed == 1

    def test_acceptance_rate_golden(self):
        res = run_reptation(
            GaussianTrial(ALPHA), HarmonicPotential(),
            n_beads=100, epsilon=0.05, sweeps=150, seed=9, burn_in_sweeps=40,
        )
        assert 0.0 < res.acceptance_rate < 1.0
        assert res.acceptance_rate == GOLDEN_ACCEPTANCE

    def test_fixed_seed_reproducible(self):
        kwargs = dict(n_beads=100, epsilon=0.05, sweeps=150, seed=9, burn_in_sweeps=40)
        a = run_reptation(GaussianTrial(ALPHA), HarmonicPotential(), **kwargs)
        b = run_reptation(GaussianTrial(ALPHA), HarmonicPotential(), **kwargs)
        assert a.acceptance_rate == b.acceptance_rate
        assert np.array_equal(a.series, b.series)
        assert np.array_equal(a.actions, b.actions)


class ToyChain:
    """5-site state space with tabulated W, 3-bead reptiles, eps = 0.7."""

    w_table = np.array([0.3, -0.1, 0.5, 0.2, -0.4])
    epsilon = 0.7
    n_sites = 5

    @classmethod
    def link(cls, a, b):
        return link_action(cls.epsilon, cls.w_table[a], cls.w_table[b])

    @classmethod
    def states(cls):
        return list(itertools.product(range(cls.n_sites), repeat=3))

    @classmethod
    def exact_distribution(cls):
        weights = np.array([
            math.exp(-(cls.link(a, b) + cls.link(b, c))) for a, b, c in cls.states()
        ])
        return weights / weights.sum()

    @classmethod
    def kernel(cls):
        """One-move transition matrix: random direction, uniform site proposal."""
        states = cls.states()
        index = {s: i for i, s in enumerate(states)}
        n = len(states)
        p = np.zeros((n, n))
        flat = 0.5 / cls.n_sites
        for a, b, c in states:
            i = index[(a, b, c)]
            for y in range(cls.n_sites):
                acc = acceptance_probability(cls.link(c, y) - cls.link(a, b))
                p[i, index[(b, c, y)]] += flat * acc
                p[i, i] += flat * (1.0 - acc)
                acc = acceptance_probability(cls.link(y, a) - cls.link(b, c))
                p[i, index[(y, a, b)]] += flat * acc
                p[i, i] += flat * (1.0 - acc)
        return p, index


class TestToyBalance:
    def test_kernel_is_stochastic(self):
        p, _ = ToyChain.kernel()
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-13)

    def test_stationary_distribution_matches_action_weights(self):
        p, _ = ToyChain.kernel()
        v = np.full(p.shape[0], 1.0 / p.shape[0])
        for _ in range(5000):
            v = v @ p
        v /= v.sum()
        tv = 0.5 * np.abs(v - ToyChain.exact_distribution()).sum()
        assert tv < 1e-6

    def test_sampler_reproduces_stationary_distribution(self):
        _, index = ToyChain.kernel()
        rng = derive_rng(314, "toy")
        sampler = ReptationSampler.from_functions(
            w_fn=lambda s: float(ToyChain.w_table[int(s)]),
            propose_fn=lambda rng_, end: int(rng_.integers(ToyChain.n_sites)),
            beads=[0, 1, 2],
            epsilon=ToyChain.epsilon,
            rng=rng,
            direction_policy="random",
        )
        counts = np.zeros(len(index))
        n_moves = 300_000
        for _ in range(n_moves):
            sampler.move()
            r = sampler.reptile
            counts[index[(int(r.beads[0]), int(r.beads[1]), int(r.beads[2]))]] += 1
        tv = 0.5 * np.abs(counts / n_moves - ToyChain.exact_distribution()).sum()
        assert tv < 0.05
        assert 0.0 < sampler.acceptance_rate < 1.0


class TestIncrementalAction:
    def test_cache_tracks_recomputation_over_many_moves(self):
        rng = derive_rng(8, "integrity")
        trial, pot = GaussianTrial(ALPHA), QuarticPotential(0.3)
        r = init_reptile(trial, pot, 50, 0.05, rng, equilibration_steps=200)
        sampler = ReptationSampler.for_system(trial, pot, r, rng)
        for _ in range(100_000):
            sampler.move()
        assert abs(r.total_action - r.recomputed_action()) < 1e-9
        assert r.audit_links(lambda b: float(local_energy(trial, pot, b))) < 1e-12


class TestEnergyEstimator:
    def test_exact_trial_exact_energy(self, exact_run):
        assert exact_run.acceptance_rate == 1.0
        assert exact_run.energy.mean == 0.5
        assert exact_run.energy.std_error == 0.0
        assert np.all(exact_run.series == 0.5)
        assert np.all(exact_run.actions == exact_run.actions[0])

    def test_harmonic_energy_within_3_sigma(self, harmonic_run):
        e = harmonic_run.energy
        assert abs(e.mean - 0.5) < 3.0 * e.std_error

    def test_reptile_snapshots_accepted(self):
        reptiles = [
            Reptile([0.0, 1.0], [0.2, 0.4], 0.1),
            Reptile([0.0, 1.0], [0.6, 0.8], 0.1),
            Reptile([0.0, 1.0], [0.1, 0.5], 0.1),
        ]
        est = energy_estimator(reptiles)
        assert est.mean == pytest.approx((0.3 + 0.7 + 0.3) / 3.0, rel=1e-12)

    def test_plain_array_accepted(self):
        est = energy_estimator(np.array([0.5, 0.5, 0.5, 0.5]))
        assert est.mean == 0.5
        assert est.std_error == 0.0

    def test_too_few_samples(self):
        with pytest.raises(SeriesTooShortError):
            energy_estimator(np.array([0.5]))


class TestPureEstimator:
    def test_unit_observable_is_exact(self, harmonic_run):
        est = pure_estimator(lambda bead: 1.0, list(_snapshots(harmonic_run)),
                             projection_time=0.0)
        assert est.mean == 1.0
        assert est.std_error == 0.0

    def test_x_squared_within_3_sigma(self, harmonic_run):
        est = harmonic_run.pure_observables["x2"]
        assert abs(est.mean - 0.5) < 3.0 * est.std_error

    def test_x_squared_exact_trial_within_3_sigma(self):
        run = run_reptation(
            GaussianTrial(1.0), HarmonicPotential(),
            n_beads=80, epsilon=0.05, sweeps=1000, seed=21, burn_in_sweeps=50,
        )
        est = run.pure_observables["x2"]
        assert abs(est.mean - 0.5) < 3.0 * est.std_error

    def test_warns_when_path_too_short(self):
        reptiles = [
            Reptile([0.0, 1.0, 2.0], [0.1, 0.2, 0.3], 0.1),
            Reptile([0.0, 1.0, 2.0], [0.2, 0.3, 0.4], 0.1),
        ]
        with pytest.warns(UserWarning, match="projection"):
            pure_estimator(lambda bead: bead, reptiles, projection_time=1.0)

    def test_value_arrays_accepted(self):
        est = pure_estimator(lambda v: v * v, np.array([1.0, 2.0, 3.0, 2.0]))
        assert est.mean == pytest.approx(4.5, rel=1e-12)


def _snapshots(run):
    """Rebuild minimal end-value reptiles from the per-sweep series."""
    for w_tail, w_head in run.series:
        yield Reptile([0.0, 1.0], [w_tail, w_head], run.epsilon)


class TestActionCumulants:
    def test_sampled_actions_match_window_moments(self, harmonic_run):
        # Undoing the e^{-S} weight recovers plain-chain moments of S,
        # directly comparable to sliding-window lambdas at the same tau.
        s_vals = harmonic_run.actions
        weights = np.exp(s_vals - s_vals.mean())
        tau = (harmonic_run.n_beads - 1) * harmonic_run.epsilon

        def reweighted(s, w, order):
            return (s**order * w).mean() / (math.factorial(order) * w.mean())

        n_blocks = 20
        blocks = np.array_split(np.arange(s_vals.size), n_blocks)
        series = sample_local_energy_series(
            GaussianTrial(ALPHA), HarmonicPotential(),
            epsilon=harmonic_run.epsilon, steps=400_000, burn_in=4_000, seed=505,
        )
        mom = action_moments(series, [tau], max_order=2)
        for order in (1, 2):
            full = reweighted(s_vals, weights, order)
            jack = np.array([
                reweighted(np.delete(s_vals, idx), np.delete(weights, idx), order)
                for idx in blocks
            ])
            sigma_jack = math.sqrt(
                (n_blocks - 1) / n_blocks * ((jack - jack.mean()) ** 2).sum()
            )
            combined = math.hypot(sigma_jack, mom.errors[0, order])
            assert abs(full - mom.lam[0, order]) < 3.0 * combined


class TestAdaptiveBurnIn:
    def test_constant_energy_stops_after_two_windows(self):
        rng = derive_rng(3, "adapt")
        trial, pot = GaussianTrial(1.0), HarmonicPotential()
        r = init_reptile(trial, pot, 30, 0.05, rng, equilibration_steps=50)
        sampler = ReptationSampler.for_system(trial, pot, r, rng)
        assert adaptive_burn_in(sampler) == 50

    def test_warns_when_never_stabilizing(self):
        counter = itertools.count()
        rng = derive_rng(4, "adapt")
        sampler = ReptationSampler.from_functions(
            w_fn=lambda s: 0.1 * next(counter),
            propose_fn=lambda rng_, end: end + rng_.normal(),
            beads=[0.0, 1.0, 2.0],
            epsilon=0.1,
            rng=rng,
        )
        with pytest.warns(UserWarning, match="burn-in"):
            burned = adaptive_burn_in(sampler, window=10, max_windows=3)
        assert burned == 30


class TestRunBundle:
    def test_result_shapes(self, harmonic_run):
        assert harmonic_run.series.shape == (2000, 2)
        assert harmonic_run.actions.shape == (2000,)
        assert harmonic_run.n_beads == 120
        assert harmonic_run.epsilon == 0.05
        assert harmonic_run.sweeps == 2000
        assert harmonic_run.burn_in_sweeps == 100
        assert set(harmonic_run.pure_observables) == {"x2"}

    def test_acceptance_rate_in_range(self, harmonic_run):
        assert 0.0 < harmonic_run.acceptance_rate < 1.0

    def test_sweeps_validated(self):
        with pytest.raises(ValueError, match="sweeps"):
            run_reptation(
                GaussianTrial(1.0), HarmonicPotential(),
                n_beads=10, epsilon=0.1, sweeps=1,
            )

    def test_warns_on_short_path(self):
        with pytest.warns(UserWarning, match="projection"):
            run_reptation(
                GaussianTrial(1.0), HarmonicPotential(),
                n_beads=10, epsilon=0.05, sweeps=5, seed=1, burn_in_sweeps=0,
            )

    def test_custom_observables(self):
        run = run_reptation(
            GaussianTrial(1.0), HarmonicPotential(),
            n_beads=50, epsilon=0.05, sweeps=50, seed=2, burn_in_sweeps=5,
            observables={"x": lambda bead: float(np.sum(bead))},
        )
        assert set(run.pure_observables) == {"x"}


class TestMixedEstimatorOrdering:
    def test_projected_energy_not_above_variational(self, harmonic_run):
        series = sample_local_energy_series(
            GaussianTrial(ALPHA), HarmonicPotential(),
            epsilon=0.005, steps=400_000, burn_in=4_000, seed=99,
        )
        vmc = vmc_estimate(series)
        e = harmonic_run.energy
        combined = math.hypot(vmc.std_error, e.std_error)
        assert e.mean <= vmc.mean + 3.0 * combined


class TestProposalCorrection:
    def test_corrected_coarse_run_unbiased(self):
        run = run_reptation(
            GaussianTrial(ALPHA), HarmonicPotential(),
            n_beads=60, epsilon=0.1, sweeps=800, seed=13, burn_in_sweeps=100,
            proposal_correction=True,
        )
        assert abs(run.energy.mean - 0.5) < 3.0 * run.energy.std_error
        assert 0.0 < run.acceptance_rate < 1.0

    def test_correction_changes_the_kernel(self):
        kwargs = dict(n_beads=40, epsilon=0.1, sweeps=100, seed=13, burn_in_sweeps=20)
        plain = run_reptation(GaussianTrial(ALPHA), HarmonicPotential(), **kwargs)
        fixed = run_reptation(GaussianTrial(ALPHA), HarmonicPotential(),
                              proposal_correction=True, **kwargs)
        assert plain.acceptance_rate != fixed.acceptance_rate


class TestExtrapolation:
    def test_linear_arithmetic(self):
        coarse = EstimateWithError(mean=0.52, std_error=0.01,
                                   autocorr_time=2.0, effective_samples=400.0)
        fine = EstimateWithError(mean=0.51, std_error=0.005,
                                 autocorr_time=3.0, effective_samples=300.0)
        out = extrapolate_linear(coarse, fine)
        assert out.mean == pytest.approx(0.50, abs=1e-15)
        assert out.std_error == pytest.approx(math.sqrt(4 * 0.005**2 + 0.01**2), rel=1e-12)
        assert out.autocorr_time == 3.0
        assert out.effective_samples == 300.0

    def test_unbiased_runs_extrapolate_to_themselves(self):
        same = EstimateWithError(mean=0.5, std_error=0.01,
                                 autocorr_time=1.0, effective_samples=100.0)
        assert extrapolate_linear(same, same).mean == pytest.approx(0.5, abs=1e-15)
