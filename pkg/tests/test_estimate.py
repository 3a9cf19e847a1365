import math

import numpy as np
import pytest

from qadv.attack import AttackSpec
from qadv.bounds import StrengthRelation, MismatchSpec, strength_compare, xi
from qadv.embed import DataSpec, Dataset, EmbeddingSpec, quantized_prior, sample_dataset
from qadv.errors import ValidationError
from qadv.estimate import (
    AdvSupOptions,
    DatasetSampler,
    empirical_risk,
    gen_error,
    population_risk,
    rademacher_adversarial,
    rademacher_exact_binary,
    uniform_deviation_bound,
)
from qadv.experiment import fixed_computational_povm
from qadv.qmat import validate_povm
from qadv.seeding import substream

PROJ2 = fixed_computational_povm()


class TestEmpiricalRisk:
    def test_all_correct_with_identity_element(self, paper_embedding, paper_data):
        povm = validate_povm([np.eye(2, dtype=complex), np.zeros((2, 2), dtype=complex)])
        ds = Dataset(xs=np.linspace(-1, 1, 7), labels=np.zeros(7, dtype=int))
        assert empirical_risk(povm, ds, paper_embedding) == pytest.approx(0.0, abs=1e-12)

    def test_all_wrong(self, paper_embedding):
        povm = validate_povm([np.zeros((2, 2), dtype=complex), np.eye(2, dtype=complex)])
        ds = Dataset(xs=np.linspace(-1, 1, 7), labels=np.zeros(7, dtype=int))
        assert empirical_risk(povm, ds, paper_embedding) == pytest.approx(1.0, abs=1e-12)

    def test_empty_dataset_rejected(self, paper_embedding):
        with pytest.raises(ValidationError):
            empirical_risk(PROJ2, Dataset(xs=[], labels=[]), paper_embedding)

    def test_adversarial_dominates_clean(self, paper_embedding, paper_data):
        ds = sample_dataset(paper_data, 60, seed=2)
        clean = empirical_risk(PROJ2, ds, paper_embedding)
        for eps in (0.02, 0.08, 0.3):
            adv = empirical_risk(PROJ2, ds, paper_embedding, AttackSpec(p=1, epsilon=eps))
            assert adv >= clean - 1e-12

    def test_matches_per_sample_attacks(self, paper_embedding, paper_data):
        from qadv.attack import adversarial_loss
        from qadv.embed import embed_states

        ds = sample_dataset(paper_data, 12, seed=3)
        attack = AttackSpec(p=1, epsilon=0.08)
        states = embed_states(paper_embedding, ds.xs)
        expected = np.mean(
            [adversarial_loss(PROJ2, states[n], int(ds.labels[n]), attack).loss
             for n in range(ds.size)]
        )
        assert empirical_risk(PROJ2, ds, paper_embedding, attack) == pytest.approx(expected, abs=1e-10)


class TestPopulationRisk:
    def test_uniform_povm_is_chance(self, paper_embedding, paper_data):
        povm = validate_povm([np.eye(2, dtype=complex) / 2] * 2)
        assert population_risk(povm, paper_embedding, paper_data) == pytest.approx(0.5, abs=1e-12)

    def test_zero_budget_attack_is_noop(self, paper_embedding, paper_data):
        clean = population_risk(PROJ2, paper_embedding, paper_data)
        adv0 = population_risk(PROJ2, paper_embedding, paper_data, AttackSpec(p=1, epsilon=0.0))
        assert adv0 == clean

    def test_grid_refinement_stability(self, paper_embedding):
        coarse = population_risk(PROJ2, paper_embedding, DataSpec(quant_step=0.01))
        fine = population_risk(PROJ2, paper_embedding, DataSpec(quant_step=0.005))
        assert 0.0 < coarse < 1.0
        assert coarse == pytest.approx(fine, abs=1e-4)

    def test_adversarial_increment_in_nonbinding_regime(self, paper_embedding, paper_data):
        # the computational POVM never hits the PSD boundary at eps = 0.04
        clean = population_risk(PROJ2, paper_embedding, paper_data)
        adv = population_risk(PROJ2, paper_embedding, paper_data, AttackSpec(p=1, epsilon=0.04))
        assert adv - clean == pytest.approx(0.02, abs=1e-12)


class TestGenError:
    def test_full_grid_replay_near_zero(self, paper_embedding, paper_data):
        # a dataset replaying the prior weights gives empirical ~ population
        prior = quantized_prior(paper_data)
        rng = substream(8)
        xs, labels = [], []
        for c in range(2):
            draws = rng.choice(prior.xs, size=40_000, p=prior.conditional[c])
            xs.append(draws)
            labels.append(np.full(40_000, c))
        ds = Dataset(xs=np.concatenate(xs), labels=np.concatenate(labels))
        rep = gen_error(PROJ2, ds, paper_embedding, paper_data)
        assert abs(rep.gen_error) < 5e-3

    def test_matched_equals_default(self, paper_embedding, paper_data):
        ds = sample_dataset(paper_data, 50, seed=4)
        attack = AttackSpec(p=1, epsilon=0.08)
        a = gen_error(PROJ2, ds, paper_embedding, paper_data, attack)
        b = gen_error(PROJ2, ds, paper_embedding, paper_data, attack, test_attack=attack)
        assert a.gen_error == b.gen_error

    def test_report_identity(self, paper_embedding, paper_data):
        ds = sample_dataset(paper_data, 50, seed=5)
        rep = gen_error(PROJ2, ds, paper_embedding, paper_data)
        assert rep.gen_error == pytest.approx(rep.population - rep.empirical, abs=1e-12)
        assert 0.0 <= rep.empirical <= 1.0 and 0.0 <= rep.population <= 1.0

    def test_mismatched_direction_train_stronger(self, paper_embedding, paper_data):
        # train (inf, 0.1) stronger than test (1, 0.15): mismatched mean <= matched mean
        train = AttackSpec(p=math.inf, epsilon=0.1)
        test = AttackSpec(p=1, epsilon=0.15)
        assert strength_compare((train.p, train.epsilon), (test.p, test.epsilon), 2) \
            is StrengthRelation.TRAIN_STRONGER
        matched, mismatched = [], []
        for i in range(50):
            ds = sample_dataset(paper_data, 40, seed=0, rng=substream(60, i))
            matched.append(gen_error(PROJ2, ds, paper_embedding, paper_data, train).gen_error)
            mismatched.append(
                gen_error(PROJ2, ds, paper_embedding, paper_data, train, test_attack=test).gen_error
            )
        m, mm = np.mean(matched), np.mean(mismatched)
        se = np.std(np.array(mismatched) - np.array(matched), ddof=1) / math.sqrt(50)
        spec = MismatchSpec(train_p=math.inf, train_epsilon=0.1, test_p=1, test_epsilon=0.15, d=2)
        assert mm <= m + 2 * se + 1e-12
        assert mm >= m - xi(spec) - 2 * se


def _tiny_sampler(T=6):
    return DatasetSampler(EmbeddingSpec(), DataSpec(), T)


class TestRademacherExact:
    def test_single_sample_value(self):
        # one pure state: enumerating sigma = +-1 gives (1 + 0)/2
        from qadv.estimate import _clean_sups_eig

        state = np.diag([1.0, 0.0]).astype(complex)[None, :, :]
        labels = np.array([0])
        sups = [
            _clean_sups_eig(np.array([[s]]), state, labels)[0] for s in (1.0, -1.0)
        ]
        assert np.mean(sups) == pytest.approx(0.5, abs=1e-12)

    def test_empty_dataset(self):
        est = rademacher_exact_binary(_tiny_sampler(0), num_datasets=3, seed=1)
        assert est.value == 0.0

    def test_exhaustive_mode_flag(self):
        est = rademacher_exact_binary(_tiny_sampler(4), num_datasets=2, seed=1)
        assert est.mode == "exhaustive_sigma" and est.num_sigma == 16

    def test_bloch_matches_eig_path(self, paper_embedding, paper_data):
        from qadv.embed import bloch_vector, embed_states
        from qadv.estimate import _clean_sups_bloch, _clean_sups_eig

        rng = substream(9)
        ds = sample_dataset(paper_data, 7, seed=0, rng=rng)
        states = embed_states(paper_embedding, ds.xs)
        blochs = bloch_vector(states)
        sig = 1.0 - 2.0 * ((np.arange(128)[:, None] >> np.arange(7)[None, :]) & 1).astype(float)
        a = _clean_sups_bloch(sig, blochs, ds.labels)
        b = _clean_sups_eig(sig, states, ds.labels)
        assert np.max(np.abs(a - b)) < 1e-10

    def test_agreement_with_multistart(self):
        # 20 random configurations at T = 8, subsampled sigma for runtime
        from qadv.embed import embed_states
        from qadv.estimate import _inner_sup_multistart

        sampler = _tiny_sampler(8)
        attack = AttackSpec(p=1, epsilon=0.0)
        rng_all = substream(10)
        devs = []
        for k in range(20):
            ds = sampler.draw(substream(10, k))
            states = embed_states(sampler.embedding, ds.xs)
            from qadv.estimate import _clean_sups_eig

            sig_rows = 2.0 * substream(11, k).integers(0, 2, size=(6, 8)) - 1.0
            for row in sig_rows:
                exact = _clean_sups_eig(row[None, :], states, ds.labels)[0]
                ms = _inner_sup_multistart(
                    states, ds.labels, row, attack, 2, substream(12, k),
                    AdvSupOptions(multistart_random=6, multistart_iters=25),
                )
                devs.append(abs(exact - ms))
        assert max(devs) < 1e-3


class TestRademacherAdversarial:
    def test_zero_budget_matches_exact(self):
        sampler = _tiny_sampler(6)
        res = rademacher_adversarial(AttackSpec(p=1, epsilon=0.0), sampler, 5, seed=13)
        exact = rademacher_exact_binary(sampler, 5, seed=13)
        assert res.estimate.value == pytest.approx(exact.value, abs=1e-3)
        assert res.gap == pytest.approx(0.0, abs=1e-9)

    def test_paired_clean_equals_exact_estimator(self):
        sampler = _tiny_sampler(6)
        res = rademacher_adversarial(AttackSpec(p=1, epsilon=0.08), sampler, 5, seed=14)
        exact = rademacher_exact_binary(sampler, 5, seed=14)
        assert res.clean.value == pytest.approx(exact.value, abs=1e-12)

    def test_gap_under_p1_ceiling(self):
        sampler = _tiny_sampler(8)
        res = rademacher_adversarial(AttackSpec(p=1, epsilon=0.08), sampler, 30, seed=15)
        ceiling = 0.08 * math.sqrt(2 / 8)
        assert res.gap <= ceiling + 3 * res.gap_stderr

    def test_gap_under_pinf_ceiling(self):
        sampler = _tiny_sampler(8)
        res = rademacher_adversarial(AttackSpec(p=math.inf, epsilon=0.08), sampler, 30, seed=16)
        ceiling = 2 * 0.08 * math.sqrt(2 / 8)
        assert res.gap <= ceiling + 3 * res.gap_stderr

    def test_epsilon_monotone_within_noise(self):
        sampler = _tiny_sampler(8)
        values = []
        for eps in (0.0, 0.3, 0.8):
            res = rademacher_adversarial(AttackSpec(p=1, epsilon=eps), sampler, 30, seed=17)
            values.append((res.estimate.value, res.estimate.stderr))
        for (v1, s1), (v2, s2) in zip(values, values[1:]):
            assert v2 >= v1 - 2 * math.hypot(s1, s2)

    def test_multistart_fallback_k3(self):
        # K = 3 routes through the multistart path
        sampler = DatasetSampler(EmbeddingSpec(), DataSpec(num_classes=3), 3)
        res = rademacher_adversarial(
            AttackSpec(p=1, epsilon=0.05), sampler, 2, seed=18, num_sigma=4,
            opts=AdvSupOptions(multistart_random=2, multistart_iters=8),
        )
        assert res.estimate.mode == "multistart"
        assert res.estimate.value >= -1e-9


class TestUniformDeviationBound:
    def test_scalar_example(self):
        assert uniform_deviation_bound(0.1, 100, 0.8) == pytest.approx(0.33537, abs=1e-5)

    def test_zero_rademacher(self):
        assert uniform_deviation_bound(0.0, 100, 0.8) == pytest.approx(
            math.sqrt(2 * math.log(2 / 0.8) / 100)
        )

    def test_delta_domain(self):
        with pytest.raises(ValidationError):
            uniform_deviation_bound(0.1, 100, 1.5)

    def test_accepts_estimate_object(self):
        est = rademacher_exact_binary(_tiny_sampler(3), 2, seed=19)
        assert uniform_deviation_bound(est, 100, 0.8) == pytest.approx(
            2 * est.value + math.sqrt(2 * math.log(2.5) / 100)
        )
