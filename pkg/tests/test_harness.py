"""Tests for generation, evaluation, glyph export, and the benchmark protocol."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hotfield.errors import InvalidOrderError, OutOfDomainError, TensorMismatchError
from hotfield.fieldio import downsample_by_two, read_field, write_field
from hotfield.harness import (
    evaluate_fields,
    field_at_sites,
    generate_synthetic,
    glyph_lines,
    holdout_sites,
    interpolate_field,
    positivity_fractions,
    sample_positive_core,
    write_report,
)
from hotfield.mcmc import McmcConfig
from hotfield.stejskal import fibonacci_directions
from hotfield.tensors import (
    SymmetricTensor,
    TensorField,
    evaluate_diffusivity,
    frobenius_distance,
    unique_count,
)


class TestGenerate:
    def test_seed_reproducibility_bytes(self, tmp_path):
        f1 = generate_synthetic(2, 5, 5, 0.1, 1.0, seed=11)
        f2 = generate_synthetic(2, 5, 5, 0.1, 1.0, seed=11)
        p1, p2 = tmp_path / "a.field", tmp_path / "b.field"
        write_field(p1, f1)
        write_field(p2, f2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_grid_shape_and_size(self):
        field = generate_synthetic(4, 16, 16, 0.1, 1.0, seed=0)
        assert field.grid_shape == (16, 16)
        assert field.n_sites == 256
        assert field.coeffs.shape == (256, 15)

    def test_file_line_layout(self, tmp_path):
        field = generate_synthetic(4, 16, 16, 0.1, 1.0, seed=0)
        path = tmp_path / "f.field"
        write_field(path, field)
        lines = path.read_text().splitlines()
        assert len(lines) == 257
        assert all(len(ln.split()) == 17 for ln in lines[1:])

    @pytest.mark.parametrize("order", (2, 4, 6))
    def test_fields_have_positive_profiles(self, order):
        field = generate_synthetic(order, 6, 6, 0.12, 1.0, seed=3)
        assert positivity_fractions(field) == 0.0

    def test_smoothness_neighbors_closer_than_random_pairs(self):
        neigh, far = [], []
        for seed in range(12):
            f = generate_synthetic(2, 8, 8, 0.1, 1.0, seed=seed)
            neigh.append(frobenius_distance(f.tensor(0), f.tensor(1)))
            far.append(frobenius_distance(f.tensor(0), f.tensor(63)))
        assert np.mean(neigh) < np.mean(far)

    def test_positive_core_sampler_margin(self):
        rng = np.random.default_rng(0)
        for order in (2, 4):
            core = sample_positive_core(order, 1.0, rng)
            dirs = fibonacci_directions(128)
            profile = [evaluate_diffusivity(core, g) for g in dirs]
            assert min(profile) > 0


class TestHoldout:
    def test_even_grid_excludes_outer_boundary(self):
        truth = generate_synthetic(2, 16, 16, 0.1, 1.0, seed=0)
        train = downsample_by_two(truth)
        targets = holdout_sites(truth, train)
        # removed nodes: 192; those beyond the last kept row/column fall
        # outside the training box and are excluded
        assert len(targets) == 161
        hi = train.coords.max(axis=0)
        assert np.all(targets <= hi + 1e-12)

    def test_odd_grid_keeps_every_removed_node(self):
        truth = generate_synthetic(2, 9, 9, 0.1, 1.0, seed=1)
        train = downsample_by_two(truth)
        targets = holdout_sites(truth, train)
        assert len(targets) == 81 - 25

    def test_field_at_sites_selects_matching_rows(self):
        truth = generate_synthetic(2, 5, 5, 0.1, 1.0, seed=2)
        sub = field_at_sites(truth, truth.coords[[3, 7, 11]])
        assert_allclose(sub.coeffs, truth.coeffs[[3, 7, 11]])

    def test_field_at_sites_rejects_unknown(self):
        truth = generate_synthetic(2, 5, 5, 0.1, 1.0, seed=2)
        with pytest.raises(TensorMismatchError):
            field_at_sites(truth, np.array([[0.123, 0.456]]))


class TestInterpolateDispatch:
    def test_direct_at_training_nodes_is_identity(self):
        train = generate_synthetic(4, 5, 5, 0.15, 1.0, seed=4)
        pred, spread = interpolate_field(train, train.coords, "direct")
        assert spread is None
        assert_allclose(pred.coeffs, train.coeffs, atol=1e-12)

    def test_logeuclid_requires_rank2(self):
        train = generate_synthetic(4, 5, 5, 0.15, 1.0, seed=5)
        with pytest.raises(InvalidOrderError):
            interpolate_field(train, train.coords[:2], "logeuclid")

    def test_unknown_method_rejected(self):
        train = generate_synthetic(2, 5, 5, 0.15, 1.0, seed=5)
        with pytest.raises(ValueError, match="unknown method"):
            interpolate_field(train, train.coords[:2], "kriging")

    def test_out_of_hull_target_rejected(self):
        train = generate_synthetic(2, 5, 5, 0.15, 1.0, seed=6)
        with pytest.raises(OutOfDomainError):
            interpolate_field(train, np.array([[1.5, 0.5]]), "direct")

    def test_tdp_returns_spread_sidecar(self):
        train = generate_synthetic(2, 5, 5, 0.2, 1.0, seed=7)
        cfg = McmcConfig(n_iters=200, burn_in=50, thin=10, seed=0)
        pred, spread = interpolate_field(
            train, np.array([[0.3, 0.3], [0.6, 0.1]]), "tdp", cfg=cfg
        )
        assert pred.n_sites == 2
        assert spread.shape == (2,)
        assert np.all(spread >= 0)


class TestEvaluate:
    def _pair(self, seed=8):
        truth = generate_synthetic(2, 5, 5, 0.15, 1.0, seed=seed)
        return truth, TensorField(2, truth.coords, truth.coeffs.copy())

    def test_identical_fields_score_zero(self):
        truth, pred = self._pair()
        report = evaluate_fields(pred, truth)
        assert report.mean == 0.0
        assert report.sd == 0.0

    def test_single_site_perturbation_mean(self):
        truth, pred = self._pair()
        pred.coeffs[3, 0] += 1.0  # D_xx bumped by 1 at one site
        report = evaluate_fields(pred, truth)
        assert_allclose(report.mean, 1.0 / truth.n_sites, rtol=1e-12)

    def test_mean_is_arithmetic_mean(self):
        truth, pred = self._pair()
        pred.coeffs += np.random.default_rng(0).normal(size=pred.coeffs.shape)
        report = evaluate_fields(pred, truth)
        assert_allclose(report.mean, report.distances.mean(), rtol=1e-12)
        assert_allclose(report.sd, report.distances.std(), rtol=1e-12)

    def test_site_mismatch_rejected(self):
        truth, pred = self._pair()
        shuffled = TensorField(2, pred.coords[::-1], pred.coeffs[::-1])
        with pytest.raises(TensorMismatchError):
            evaluate_fields(shuffled, truth)

    def test_order_mismatch_rejected(self):
        truth, _ = self._pair()
        other = TensorField(4, truth.coords, np.zeros((truth.n_sites, 15)))
        with pytest.raises(TensorMismatchError):
            evaluate_fields(other, truth)

    def test_positivity_fraction_counts_indefinite_tensors(self):
        coords = np.array([[0.0, 0.0], [1.0, 0.0]])
        good = SymmetricTensor.from_matrix(np.diag([1.0, 2.0, 3.0])).coeffs
        bad = SymmetricTensor.from_matrix(np.diag([-1.0, 2.0, 3.0])).coeffs
        field = TensorField(2, coords, np.stack([good, bad]))
        assert positivity_fractions(field) == 0.5

    def test_report_file_layout(self, tmp_path):
        truth, pred = self._pair()
        pred.coeffs[0, 0] += 0.5
        report = evaluate_fields(pred, truth, elapsed_seconds=1.25)
        path = tmp_path / "eval.report"
        write_report(path, report, pred.coords)
        lines = path.read_text().splitlines()
        assert lines[0] == f"HOTEVAL v1 n={truth.n_sites}"
        assert lines[1].startswith("mean ")
        assert lines[2].startswith("sd ")
        assert lines[3].startswith("positivity_violation_fraction ")
        assert lines[4].startswith("# elapsed_seconds ")
        assert sum(ln.startswith("site ") for ln in lines) == truth.n_sites


class TestGlyphs:
    def test_isotropic_rank2_circle(self):
        eye = SymmetricTensor.from_matrix(np.eye(3))
        field = TensorField(2, np.array([[0.0, 0.0]]), eye.coeffs[None])
        lines = glyph_lines(field, 16)
        assert len(lines) == 16
        radii = [float(ln.split()[3]) for ln in lines]
        assert_allclose(radii, 1.0, atol=1e-12)

    def test_axis_aligned_anisotropy(self):
        t = SymmetricTensor.from_matrix(np.diag([2.0, 1.0, 1.0]))
        field = TensorField(2, np.array([[0.0, 0.0]]), t.coeffs[None])
        lines = glyph_lines(field, 8)
        vals = {float(ln.split()[2]): float(ln.split()[3]) for ln in lines}
        assert_allclose(vals[0.0], 2.0, atol=1e-12)
        assert_allclose(vals[min(vals, key=lambda p: abs(p - math.pi / 2))], 1.0, atol=1e-12)

    def test_rank4_matches_diffusivity(self):
        rng = np.random.default_rng(9)
        coeffs = rng.standard_normal((1, unique_count(4)))
        field = TensorField(4, np.array([[0.2, 0.8]]), coeffs)
        t = field.tensor(0)
        for ln in glyph_lines(field, 8):
            _, _, phi, r = (float(v) for v in ln.split())
            g = np.array([math.cos(phi), math.sin(phi), 0.0])
            assert_allclose(r, evaluate_diffusivity(t, g), rtol=1e-12, atol=1e-12)

    def test_too_few_samples_rejected(self):
        field = TensorField(2, np.array([[0.0, 0.0]]), np.zeros((1, 6)))
        with pytest.raises(ValueError):
            glyph_lines(field, 7)


class TestPipelineDeterminism:
    def test_downsample_then_evaluate_on_kept_sites_is_zero(self):
        truth = generate_synthetic(2, 9, 9, 0.1, 1.0, seed=10)
        train = downsample_by_two(truth)
        kept_truth = field_at_sites(truth, train.coords)
        report = evaluate_fields(train, kept_truth)
        assert report.mean == 0.0
        assert report.sd == 0.0

    def test_full_pipeline_repeatable(self, tmp_path):
        cfg = McmcConfig(n_iters=150, burn_in=50, thin=10, seed=0)
        outputs = []
        for run in range(2):
            truth = generate_synthetic(2, 5, 5, 0.2, 1.0, seed=0)
            train = downsample_by_two(truth)
            targets = holdout_sites(truth, train)
            pred, spread = interpolate_field(train, targets, "tdp", cfg=cfg)
            path = tmp_path / f"pred{run}.field"
            write_field(path, pred)
            outputs.append(path.read_bytes())
        assert outputs[0] == outputs[1]
