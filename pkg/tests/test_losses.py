import numpy as np
import pytest

from diffgt import autodiff as ad
from diffgt.errors import ConfigError, ShapeError
from diffgt.losses import LossWeights, bpr_loss, contrastive_loss, diffusion_loss, total_loss

from helpers import central_difference, max_relative_error


class TestBpr:
    def test_equal_scores_give_ln2(self):
        s = np.array([1.0, -2.0, 0.5])
        assert float(bpr_loss(s, s)) == pytest.approx(np.log(2.0))

    def test_unit_margin(self):
        # -ln sigmoid(1) = ln(1 + e^-1)
        out = bpr_loss(np.array([1.0]), np.array([0.0]))
        assert float(out) == pytest.approx(0.31326168751822286)

    def test_saturation_towards_zero(self):
        out = bpr_loss(np.array([50.0]), np.array([0.0]))
        assert 0.0 <= float(out) < 1e-20

    def test_shift_invariance(self):
        pos = np.array([0.3, 1.4, -0.2])
        neg = np.array([-0.5, 2.0, 0.0])
        a = float(bpr_loss(pos, neg))
        b = float(bpr_loss(pos + 7.5, neg + 7.5))
        assert a == pytest.approx(b, rel=1e-12)

    def test_mismatched_lengths(self):
        with pytest.raises(ShapeError):
            bpr_loss(np.zeros(3), np.zeros(4))


class TestDiffusionLoss:
    def test_perfect_reconstruction(self):
        x = np.array([[1.0, -2.0]])
        assert float(diffusion_loss(x, x)) == 0.0

    def test_hand_mean_of_squares(self):
        assert float(diffusion_loss(np.array([[1.0, 1.0]]), np.zeros((1, 2)))) == 1.0

    def test_nonnegative(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            a, b = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
            assert float(diffusion_loss(a, b)) >= 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            diffusion_loss(np.zeros((2, 2)), np.zeros((2, 3)))


class TestContrastive:
    def test_batch_of_one_is_zero(self):
        e = np.array([[3.0, 4.0]])
        assert float(contrastive_loss(e, e, temperature=0.7)) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_negative_closed_form(self):
        # e = e', one orthogonal negative, tau=1: loss = ln(e + 1) - 1
        e = np.array([[1.0, 0.0], [0.0, 1.0]])
        out = contrastive_loss(e, e, temperature=1.0)
        assert float(out) == pytest.approx(np.log(np.e + 1.0) - 1.0)

    def test_explicit_negatives_match_closed_form(self):
        anchor = np.array([[2.0, 0.0]])  # normalization makes magnitude irrelevant
        negatives = np.array([[0.0, 5.0], [0.0, -1.0], [0.0, 0.25]])
        out = contrastive_loss(anchor, anchor, temperature=1.0, negatives=negatives)
        # denominator: e^1 + 3 e^0
        assert float(out) == pytest.approx(np.log(np.e + 3.0) - 1.0)

    def test_loss_decreases_as_alignment_improves(self):
        base = np.array([[1.0, 0.0], [0.0, 1.0]])
        drifted = np.array([[0.8, 0.6], [0.0, 1.0]])
        loose = float(contrastive_loss(base, drifted, temperature=0.5))
        tight = float(contrastive_loss(base, base, temperature=0.5))
        assert tight < loose

    def test_nonnegative_when_positive_dominates(self):
        rng = np.random.default_rng(1)
        e = rng.standard_normal((5, 4))
        assert float(contrastive_loss(e, e, temperature=0.3)) >= 0.0

    def test_bad_temperature(self):
        with pytest.raises(ConfigError):
            contrastive_loss(np.ones((2, 2)), np.ones((2, 2)), temperature=0.0)
        with pytest.raises(ConfigError):
            LossWeights(temperature=-1.0)


class TestTotal:
    def test_zero_weights_collapse_to_bpr(self):
        w = LossWeights(diffusion_weight=0.0, contrastive_weight=0.0)
        assert float(total_loss(1.25, 9.0, 9.0, w)) == 1.25

    def test_hand_weighted_sum(self):
        w = LossWeights(diffusion_weight=0.5, contrastive_weight=0.1)
        assert float(total_loss(1.0, 2.0, 3.0, w)) == pytest.approx(2.3)

    def test_all_zero(self):
        assert float(total_loss(0.0, 0.0, 0.0, LossWeights())) == 0.0

    def test_disabled_terms_contribute_exactly_zero(self):
        w = LossWeights(diffusion_weight=0.5, contrastive_weight=0.1)
        only_bpr = total_loss(1.7, 2.0, 3.0, w, use_diffusion=False, use_contrastive=False)
        assert float(only_bpr) == 1.7


def _loss_fd_check(build, shapes, seed, tol=2e-6):
    rng = np.random.default_rng(seed)
    params = {k: rng.standard_normal(v) for k, v in shapes.items()}

    def f(p):
        tape = ad.Tape()
        nodes = {k: tape.watch(k, v) for k, v in p.items()}
        return float(ad.value_of(build(nodes)))

    tape = ad.Tape()
    nodes = {k: tape.watch(k, v) for k, v in params.items()}
    analytic = ad.gradient_of(build(nodes), tape)
    numeric = central_difference(f, params)
    assert max_relative_error(analytic, numeric) < tol


class TestGradients:
    def test_bpr_gradient_matches_finite_differences(self):
        fixed_neg = np.random.default_rng(9).standard_normal((1, 6))
        _loss_fd_check(
            lambda n: bpr_loss(n["pos"], ad.add(n["pos"], fixed_neg) * 0.5),
            {"pos": (1, 6)},
            seed=0,
        )

    def test_diffusion_gradient_matches_finite_differences(self):
        _loss_fd_check(
            lambda n: diffusion_loss(n["x0"], n["xh"]),
            {"x0": (3, 4), "xh": (3, 4)},
            seed=1,
        )

    def test_contrastive_gradient_matches_finite_differences(self):
        _loss_fd_check(
            lambda n: contrastive_loss(n["e"], n["ep"], temperature=0.4),
            {"e": (4, 3), "ep": (4, 3)},
            seed=2,
        )

    def test_composite_gradient_matches_finite_differences(self):
        w = LossWeights(diffusion_weight=0.7, contrastive_weight=0.3, temperature=0.5)

        def build(n):
            bpr = bpr_loss(ad.sum_(n["a"], axis=1), ad.sum_(n["b"], axis=1))
            diff = diffusion_loss(n["a"], n["b"])
            cl = contrastive_loss(n["a"], n["b"], temperature=w.temperature)
            return total_loss(bpr, diff, cl, w)

        _loss_fd_check(build, {"a": (4, 3), "b": (4, 3)}, seed=3)
