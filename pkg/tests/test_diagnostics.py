import numpy as np
import pytest

from diffgt.data import split
from diffgt.diagnostics import (
    AblationResult,
    SnrCurve,
    TIMING_VARIANTS,
    ablate,
    fisher_ratio,
    snr_curve,
    snr_curves_csv,
    svd_export,
    svd_export_csv,
    timing_csv,
    timing_harness,
)
from diffgt.diffusion import make_schedule
from diffgt.errors import DegenerateInputError
from diffgt.losses import LossWeights
from diffgt.rng import RandomSource
from diffgt.synth import anisotropic_clusters, clustered_interactions
from diffgt.training import DiffusionConfig, ModelConfig, TrainConfig


def two_clusters(separation, spread, n=60, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, dim)) * spread
    b = rng.standard_normal((n, dim)) * spread
    b[:, 0] += separation
    points = np.vstack([a, b])
    labels = np.array([0] * n + [1] * n)
    return points, labels


class TestFisherRatio:
    def test_separated_clusters_beat_overlapping(self):
        tight, labels = two_clusters(separation=10.0, spread=0.2)
        loose, _ = two_clusters(separation=10.0, spread=10.0)
        r_tight, _ = fisher_ratio(tight, labels)
        r_loose, _ = fisher_ratio(loose, labels)
        assert r_tight > 10.0 * r_loose

    def test_rotation_invariance(self):
        points, labels = two_clusters(separation=3.0, spread=1.0, dim=5, seed=2)
        rng = np.random.default_rng(3)
        q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        base, _ = fisher_ratio(points, labels)
        rotated, _ = fisher_ratio(points @ q, labels)
        assert rotated == pytest.approx(base, rel=1e-9)

    def test_ridge_flag_on_singular_within(self):
        points = np.array([[1.0, 0.0], [1.0, 0.0], [3.0, 0.0], [3.0, 0.0]])
        ratio, ridged = fisher_ratio(points, [0, 0, 1, 1])
        assert ridged and np.isfinite(ratio) and ratio > 0

    def test_needs_two_classes(self):
        with pytest.raises(DegenerateInputError):
            fisher_ratio(np.ones((4, 2)), [0, 0, 0, 0])
        with pytest.raises(DegenerateInputError):
            fisher_ratio(np.ones((3, 2)), [0, 0, 1])

    def test_negative_labels_excluded(self):
        points, labels = two_clusters(separation=5.0, spread=0.5, n=10)
        with_noise = np.vstack([points, np.full((2, 4), 99.0)])
        labels_ext = np.concatenate([labels, [-1, -1]])
        a, _ = fisher_ratio(points, labels)
        b, _ = fisher_ratio(with_noise, labels_ext)
        assert a == pytest.approx(b)


class TestSnrCurve:
    def test_zero_noise_limit_matches_clean_snr(self):
        from diffgt.diffusion import NoiseSchedule

        points, labels = two_clusters(separation=6.0, spread=0.5)
        sched = NoiseSchedule(
            betas=np.array([1e-12]), alphas=np.array([1.0 - 1e-12]), alpha_bars=np.array([1.0 - 1e-12])
        )
        clean, _ = fisher_ratio(points, labels)
        curve = snr_curve(points, labels, sched, "isotropic", [1], RandomSource(0))
        assert curve.snr[0] == pytest.approx(clean, rel=1e-3)

    def test_snr_nonnegative_and_decreasing_overall(self):
        points, labels = two_clusters(separation=8.0, spread=0.3)
        sched = make_schedule(20, 0.02, 0.3)
        curve = snr_curve(points, labels, sched, "isotropic", [1, 10, 20], RandomSource(1))
        assert all(v >= 0 for v in curve.snr)
        assert curve.snr[-1] < curve.snr[0]

    def test_directional_dominates_isotropic_on_anisotropic_clusters(self):
        rng = RandomSource(42)
        points, labels = anisotropic_clusters(300, 16, 3, rng)
        sched = make_schedule(50)
        steps = [1, 10, 20, 30, 40, 50]
        iso = snr_curve(points, labels, sched, "isotropic", steps, RandomSource(7))
        direc = snr_curve(points, labels, sched, "directional", steps, RandomSource(7))
        assert all(d >= i for d, i in zip(direc.snr, iso.snr))

    def test_csv_layout(self):
        c1 = SnrCurve("isotropic", [1, 2], [3.0, 2.0], [False, False])
        c2 = SnrCurve("directional", [1, 2], [4.0, 3.5], [False, False])
        csv = snr_curves_csv([c1, c2])
        lines = csv.strip().split("\n")
        assert lines[0] == "step,isotropic,directional"
        assert lines[1].startswith("1,3")


class TestSvdExport:
    def test_isotropic_cloud_ratio_near_one(self):
        rng = np.random.default_rng(0)
        points = rng.standard_normal((10000, 6))
        _, _, ratio = svd_export(points, np.zeros(10000))
        assert abs(ratio - 1.0) < 0.1

    def test_line_collapses_second_value(self):
        t = np.linspace(-1, 1, 40)[:, None]
        points = t @ np.array([[2.0, 1.0, 0.5]])
        proj, labels, ratio = svd_export(points, np.zeros(40))
        assert ratio == np.inf or ratio > 1e9

    def test_row_count_preserved(self):
        rng = np.random.default_rng(1)
        points = rng.standard_normal((33, 5))
        proj, labels, _ = svd_export(points, np.arange(33))
        assert proj.shape == (33, 2) and len(labels) == 33

    def test_scale_invariance_of_ratio(self):
        rng = np.random.default_rng(2)
        points = rng.standard_normal((50, 4)) @ np.diag([3.0, 1.0, 0.5, 0.2])
        _, _, r1 = svd_export(points, np.zeros(50))
        _, _, r2 = svd_export(points * 7.3, np.zeros(50))
        assert r1 == pytest.approx(r2, rel=1e-9)

    def test_csv_header_carries_ratio(self):
        proj = np.array([[1.0, 2.0]])
        csv = svd_export_csv(proj, [5], 3.25)
        assert csv.startswith("# anisotropy_ratio=3.25\nx,y,label\n")


def tiny_training_setup():
    graph, side = clustered_interactions(12, 12, 2, 4, RandomSource(0))
    data_split = split(graph, seed=0)
    model_cfg = ModelConfig(dim=8, encoder_layers=1, denoiser_layers=1, compress_len=4)
    diff_cfg = DiffusionConfig(steps=8, sampled_steps=2)
    cfg = TrainConfig(
        seed=0, learning_rate=5e-3, batch_size=64, max_epochs=4, patience=10,
        weights=LossWeights(0.5, 0.1, 0.2),
    )
    return graph, data_split, model_cfg, diff_cfg, cfg


class TestAblate:
    def test_base_vs_base_zero_difference(self):
        graph, data_split, m, d, cfg = tiny_training_setup()
        res = ablate(graph, data_split, m, d, cfg, "-DiffL", seeds=[0])
        same = ablate(graph, data_split, m, d, cfg, "-DiffL", seeds=[0])
        assert res.base_reports[0].recall_per_set == same.base_reports[0].recall_per_set

    def test_variant_reports_paired_per_seed(self):
        graph, data_split, m, d, cfg = tiny_training_setup()
        res = ablate(graph, data_split, m, d, cfg, "-Direction", seeds=[0, 1])
        assert len(res.base_reports) == len(res.variant_reports) == 2
        assert len(res.per_seed_recall_diff) == 2

    def test_transformer_variant_uses_weighted_matrix(self):
        from diffgt.training import apply_ablation, train

        graph, data_split, m, d, cfg = tiny_training_setup()
        result = train(graph, data_split, m, d, apply_ablation(cfg, "-Transformer"))
        assert result.uses_weighted_denoiser
        assert "den.weighted" in result.parameters


class TestTiming:
    def test_small_harness_orderings(self):
        reports = timing_harness(
            num_nodes=120, num_steps=10, sampled_steps=2, dim=16,
            encoder_layers=1, denoiser_layers=1, compress_len=16,
        )
        by_name = {r.variant: r for r in reports}
        assert set(by_name) == set(TIMING_VARIANTS)
        assert by_name["continuous"].forward_seconds < by_name["discrete"].forward_seconds
        assert by_name["continuous-sampling"].reverse_seconds < by_name["continuous"].reverse_seconds
        for r in reports:
            assert r.forward_seconds > 0 and r.reverse_seconds > 0

    def test_csv_blank_metrics(self):
        from diffgt.diagnostics import TimingReport

        csv = timing_csv([TimingReport("continuous", 0.5, 1.0)])
        assert csv.strip().split("\n")[1] == "continuous,0.500000,1.000000,,"


class TestFigures:
    def test_figures_render_and_are_deterministic(self, tmp_path):
        from diffgt.figures import save_snr_figure, save_svd_figure, save_training_figure

        c1 = SnrCurve("isotropic", [1, 2, 3], [3.0, 2.0, 1.0], [False] * 3)
        c2 = SnrCurve("directional", [1, 2, 3], [4.0, 3.5, 3.0], [False] * 3)
        p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
        save_snr_figure([c1, c2], p1)
        save_snr_figure([c1, c2], p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert b"<svg" in p1.read_bytes()

        rng = np.random.default_rng(0)
        proj = rng.standard_normal((30, 2))
        s1, s2 = tmp_path / "s1.svg", tmp_path / "s2.svg"
        save_svd_figure(proj, np.arange(30) % 3, 2.5, s1)
        save_svd_figure(proj, np.arange(30) % 3, 2.5, s2)
        assert s1.read_bytes() == s2.read_bytes()

        rows = [(1, 0.5, 0.4, 0.3, 1.2, 0.6), (2, 0.4, 0.3, 0.2, 0.9, 0.5)]
        t1 = tmp_path / "t.svg"
        save_training_figure(rows, t1)
        assert t1.exists()
