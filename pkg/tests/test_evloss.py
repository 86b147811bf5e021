import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evtraj import kernels
from evtraj.evidist import DirichletEvidence, NIGParams, nig_kl
from evtraj.evloss import (
    LossBreakdown,
    LossWeights,
    Priors,
    _cls_parts,
    cls_loss,
    reg_loss,
    reg_nll,
    reg_regularizer,
    total_loss,
    winner_mode,
)
from evtraj.prediction import ScenePrediction
from evtraj.predictor.network import ModelConfig, decode, to_predictions

from oracles import mc_squared_cls, mp_reg_nll


def random_nig(rng):
    return NIGParams(rng.normal(0, 2), rng.uniform(0.05, 10), rng.uniform(1.01, 10), rng.uniform(0.05, 10))


def random_scene(rng, k=2, horizon=3):
    shape = (k, horizon, 2)
    return ScenePrediction(
        gamma=rng.normal(0, 2, shape), nu=rng.uniform(0.1, 3, shape),
        alpha=rng.uniform(1.1, 4, shape), beta=rng.uniform(0.1, 3, shape),
        mode_alphas=1.0 + rng.uniform(0, 5, k),
    )


class TestLossWeights:
    def test_defaults(self):
        w = LossWeights()
        assert (w.lambda1, w.lambda2, w.lambda3, w.lambda4) == (0.01, 0.0, 1.0, 1.0)

    @pytest.mark.parametrize("epoch, expected", [(0, 0.0), (5, 0.5), (10, 1.0), (50, 1.0)])
    def test_annealing(self, epoch, expected):
        assert LossWeights().annealed(epoch, 10).lambda3 == pytest.approx(expected)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            LossWeights(lambda1=-1.0)


class TestRegression:
    def test_nll_ln4(self):
        p = NIGParams(0, 1, 1, 1)
        assert reg_nll(p, 0.0) == pytest.approx(math.log(4), abs=1e-12)
        assert reg_nll(p, 0.0) == pytest.approx(mp_reg_nll(0, 1, 1, 1, 0), rel=1e-14)

    def test_nll_matches_high_precision(self, rng):
        for _ in range(200):
            p = random_nig(rng)
            y = rng.normal(p.gamma, 3)
            assert reg_nll(p, y) == pytest.approx(
                mp_reg_nll(p.gamma, p.nu, p.alpha, p.beta, y), rel=1e-12, abs=1e-12)

    @given(st.floats(-100, 100), st.floats(-100, 100))
    def test_nll_translation_invariant(self, y, c):
        p = NIGParams(0.7, 1.3, 2.1, 0.4)
        q = NIGParams(0.7 + c, 1.3, 2.1, 0.4)
        assert reg_nll(q, y + c) == pytest.approx(reg_nll(p, y), rel=1e-9, abs=1e-9)

    def test_regularizer_example(self):
        assert reg_regularizer(NIGParams(1, 0.5, 2, 1), 3.0) == pytest.approx(6.0)

    def test_regularizer_zero_at_mean(self, rng):
        for _ in range(20):
            p = random_nig(rng)
            assert reg_regularizer(p, p.gamma) == 0.0
            assert reg_regularizer(p, p.gamma, "omega") == 0.0

    def test_omega_regularizer(self):
        p = NIGParams(0, 1, 2, 3)
        assert reg_regularizer(p, 2.0, "omega") == pytest.approx(2.0 * p.omega)

    def test_loss_zero_weights(self, rng):
        p = random_nig(rng)
        w = LossWeights(lambda1=0, lambda2=0)
        assert reg_loss(p, 1.5, Priors().regression(p), w) == reg_nll(p, 1.5)

    def test_loss_regularizer_vanishes_at_mean(self, rng):
        p = random_nig(rng)
        w = LossWeights(lambda1=1, lambda2=0)
        assert reg_loss(p, p.gamma, Priors().regression(p), w) == reg_nll(p, p.gamma)

    def test_loss_hand_sum(self, rng):
        for _ in range(100):
            p = random_nig(rng)
            y = rng.normal(0, 3)
            prior = NIGParams(rng.normal(), rng.uniform(0.1, 2), rng.uniform(1.1, 3), rng.uniform(0.1, 2))
            w = LossWeights(lambda1=rng.uniform(0, 1), lambda2=rng.uniform(0, 1))
            expected = reg_nll(p, y) + w.lambda1 * reg_regularizer(p, y) + w.lambda2 * nig_kl(p, prior)
            assert reg_loss(p, y, prior, w) == pytest.approx(expected, abs=1e-12)

    def test_regression_prior_copies_location_and_scale(self):
        p = NIGParams(1.5, 3.0, 4.0, 2.0)
        prior = Priors().regression(p)
        assert (prior.gamma, prior.nu, prior.alpha, prior.beta) == (1.5, 0.1, 1.01, 2.0)


class TestClassification:
    def test_uniform_two_modes(self):
        w = LossWeights(lambda3=0.0)
        assert cls_loss(DirichletEvidence((1, 1)), 0, w) == pytest.approx(2 / 3, abs=1e-15)

    @pytest.mark.parametrize("target", [0, 1])
    def test_zero_evidence_kl_vanishes(self, target):
        _, kl = _cls_parts(DirichletEvidence((1, 1)), target, Priors.classification(2))
        assert kl == 0.0

    def test_concentrated_limit(self):
        vals = [cls_loss(DirichletEvidence((m, 1)), 0, LossWeights(lambda3=0)) for m in (10, 1e3, 1e6)]
        assert vals[0] > vals[1] > vals[2]
        assert vals[2] < 1e-5

    def test_squared_loss_is_dirichlet_expectation(self, rng):
        a = (1.0, 1.0)
        mc, se = mc_squared_cls(a, 0, 400_000, rng)
        sq, _ = _cls_parts(DirichletEvidence(a), 0, Priors.classification(2))
        assert abs(sq - mc) < 3 * se

    def test_target_out_of_range(self):
        with pytest.raises(IndexError):
            cls_loss(DirichletEvidence((1, 1)), 2, LossWeights())


class TestTotalLoss:
    def test_single_mode_always_wins(self, rng):
        pred = random_scene(rng, k=1)
        assert total_loss(pred, rng.normal(0, 50, (3, 2))).winner == 0

    def test_identical_modes_tie_to_lowest(self, rng):
        pred = random_scene(rng, k=3)
        gamma = np.repeat(pred.gamma[:1], 3, axis=0)
        assert total_loss(pred.with_means(gamma), rng.normal(0, 1, (3, 2))).winner == 0
        assert winner_mode(np.zeros((4, 3, 2)), np.ones((3, 2))) == 0

    def test_recomposition(self, rng):
        for _ in range(30):
            pred = random_scene(rng)
            gt = rng.normal(0, 2, (3, 2))
            w = LossWeights(lambda1=0.3, lambda2=0.2, lambda3=0.7, lambda4=1.3)
            out = total_loss(pred, gt, w)
            k = out.winner
            dist = [np.linalg.norm(pred.gamma[m] - gt, axis=1).sum() for m in range(pred.K)]
            assert k == int(np.argmin(dist))
            nll = reg = kl = 0.0
            for t in range(3):
                for ax in range(2):
                    p = pred.nig(k, t, ax)
                    nll += reg_nll(p, gt[t, ax]) / 6
                    reg += reg_regularizer(p, gt[t, ax]) / 6
                    kl += nig_kl(p, NIGParams(p.gamma, 0.1, 1.01, p.beta)) / 6
            sq, klc = _cls_parts(pred.evidence, k, DirichletEvidence((1.0,) * pred.K))
            expected = nll + 0.3 * reg + 0.2 * kl + 1.3 * (sq + 0.7 * klc)
            assert out.total == pytest.approx(expected, abs=1e-12)
            assert out.total == pytest.approx(
                LossBreakdown.compose(out.nll_reg, out.r_reg, out.kl_reg, out.squared_cls, out.kl_cls, w),
                abs=1e-15)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            total_loss(random_scene(rng), np.zeros((4, 2)))


def _kernel_args(w, priors):
    reg = kernels.REG_EQ4 if w.regularizer == "eq4" else kernels.REG_OMEGA
    return (w.lambda1, w.lambda2, w.lambda3, w.lambda4, priors.nu0, priors.alpha0, reg)


@pytest.mark.parametrize("backend", sorted(kernels.backends()))
class TestFusedHead:
    """The batched kernel against the per-value reference losses."""

    def test_parts_match_reference(self, backend, rng):
        core = kernels.backends()[backend]
        cfg = ModelConfig(n_modes=3, horizon=4)
        w = LossWeights(lambda1=0.2, lambda2=0.3, lambda3=0.5, regularizer="omega")
        raw = rng.normal(0, 1, (16, cfg.n_outputs))
        gt = rng.normal(0, 1, (16, 4, 2))
        parts, winners, _ = core.head_loss(raw, gt, 3, 4, *_kernel_args(w, Priors()))
        for i, pred in enumerate(to_predictions(decode(raw, cfg))):
            ref = total_loss(pred, gt[i], w)
            assert winners[i] == ref.winner
            np.testing.assert_allclose(parts[i], [ref.nll_reg, ref.r_reg, ref.kl_reg,
                                                  ref.squared_cls, ref.kl_cls], rtol=1e-11, atol=1e-12)

    def test_gradient_matches_finite_differences(self, backend, rng):
        core = kernels.backends()[backend]
        cfg = ModelConfig(n_modes=2, horizon=3)
        w = LossWeights(lambda1=0.2, lambda2=0.3, lambda3=0.5)
        args = _kernel_args(w, Priors())
        raw = rng.normal(0, 1, (1, cfg.n_outputs))
        gt = rng.normal(0, 1, (1, 3, 2))

        def total(r):
            pred = to_predictions(decode(r, cfg))[0]
            return total_loss(pred, gt[0], w).total

        _, _, grad = core.head_loss(raw, gt, 2, 3, *args)
        h = 1e-6
        fd = np.empty(cfg.n_outputs)
        for j in range(cfg.n_outputs):
            up, dn = raw.copy(), raw.copy()
            up[0, j] += h
            dn[0, j] -= h
            fd[j] = (total(up) - total(dn)) / (2 * h)
        np.testing.assert_allclose(grad[0], fd, rtol=1e-5, atol=1e-7)


@given(st.integers(1, 4), st.integers(1, 5), st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_backends_agree(k, horizon, seed):
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(n_modes=k, horizon=horizon)
    raw = rng.normal(0, 3, (5, cfg.n_outputs))
    gt = rng.normal(0, 3, (5, horizon, 2))
    args = _kernel_args(LossWeights(lambda2=0.1), Priors())
    results = [b.head_loss(raw, gt, k, horizon, *args) for b in kernels.backends().values()]
    for other in results[1:]:
        for a, b in zip(results[0], other):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)
