import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surfopt import io
from surfopt.column_model import ColumnProblem, ConstraintSpec
from surfopt.errors import InvalidDimensionError, InvalidSpecError
from surfopt.ipm import solve
from surfopt.metrics import count_violations, masd
from surfopt.surface_head import expected_location
from surfopt.synth import SynthSpec, region_labels_from_positions, synth_generate


class TestMASD:
    def test_identical(self):
        gt = np.arange(6.0).reshape(2, 3)
        r = masd(gt, gt)
        np.testing.assert_array_equal(r.masd_per_surface, [0, 0])
        assert r.masd_overall == 0 and r.violation_count == 0

    def test_resolution(self):
        gt = np.array([[1.0, 2.0], [5.0, 6.0]])
        r = masd(gt + 1, gt, resolution=3.87)
        np.testing.assert_allclose(r.masd_per_surface, [3.87, 3.87])

    def test_hand_violation(self):
        r = masd([[0, 2], [1, 1]], [[0, 0], [2, 2]])
        np.testing.assert_allclose(r.masd_per_surface, [1, 1])
        assert r.violation_count == 1

    def test_shape_mismatch(self):
        with pytest.raises(InvalidDimensionError):
            masd(np.zeros((2, 3)), np.zeros((3, 3)))

    @given(st.integers(0, 10_000))
    def test_symmetric_except_violations(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=(3, 5)), rng.normal(size=(3, 5))
        ab, ba = masd(a, b), masd(b, a)
        np.testing.assert_array_equal(ab.masd_per_surface, ba.masd_per_surface)
        assert ab.violation_count == count_violations(a)


class TestRoundTrip:
    def test_surface_field_csv(self, tmp_path):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(3, 7)) * 1e3
        x[0, 0] = 1 / 3
        io.write_csv(tmp_path / "x.csv", x)
        assert io.read_csv(tmp_path / "x.csv").tobytes() == x.tobytes()

    def test_problems_json(self, tmp_path):
        rng = np.random.default_rng(2)
        probs = [ColumnProblem(rng.uniform(0, 100, 3), rng.uniform(0.25, 25, 3)),
                 ColumnProblem(rng.uniform(0, 100, 3), rng.uniform(0.25, 25, 3),
                               ConstraintSpec.gaps(rng.uniform(0, 3, 2), [math.inf, 9.5]))]
        io.write_problems(tmp_path / "p.json", probs)
        back = io.read_problems(tmp_path / "p.json")
        for a, b in zip(probs, back):
            assert a.mu.tobytes() == b.mu.tobytes()
            assert a.sigma_sq.tobytes() == b.sigma_sq.tobytes()
            assert a.to_json() == b.to_json()

    def test_field_directory(self, tmp_path):
        field, _ = synth_generate(SynthSpec(N=2, Z=40, W=5, gt_sigma=4))
        io.write_field(tmp_path, field)
        back = io.read_field(tmp_path)
        assert back.surface_probs.tobytes() == field.surface_probs.tobytes()
        np.testing.assert_array_equal(back.region_labels, field.region_labels)

    def test_missing_field(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            io.read_field(tmp_path)

    def test_solution_json(self):
        sol = solve(ColumnProblem([5, 3], [1, 1], ConstraintSpec.gaps([1])))
        obj = io.solution_to_json(sol)
        assert len(obj["lambda"]) == 2 and obj["converged"]


class TestSynth:
    def test_noiseless_round_trip(self):
        field, gt = synth_generate(SynthSpec(noise_sigma=0.0))
        n, _, w = field.shape
        xi = np.array([[expected_location(field.surface_probs[i, :, q]) for q in range(w)]
                       for i in range(n)])
        assert np.abs(xi - gt).max() <= 0.05

    def test_deterministic(self):
        a, ga = synth_generate(SynthSpec(seed=9))
        b, gb = synth_generate(SynthSpec(seed=9))
        assert a.surface_probs.tobytes() == b.surface_probs.tobytes()
        assert ga.tobytes() == gb.tobytes()
        c, _ = synth_generate(SynthSpec(seed=10))
        assert a.surface_probs.tobytes() != c.surface_probs.tobytes()

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 5))
    def test_gt_invariants(self, seed, n):
        field, gt = synth_generate(SynthSpec(N=n, Z=96, W=16, seed=seed, gt_sigma=4))
        assert gt.shape == (n, 16)
        assert np.all(np.diff(gt, axis=0) >= 1.0)
        assert gt.min() >= 0 and gt.max() <= 95
        labels = field.region_labels
        assert np.all(np.diff(labels, axis=0) >= 0)

    def test_unorderable(self):
        with pytest.raises(InvalidSpecError):
            synth_generate(SynthSpec(N=3, offsets=[10, 10.5, 30], amplitude=1.0))

    def test_leaves_image(self):
        with pytest.raises(InvalidSpecError):
            synth_generate(SynthSpec(N=1, Z=10, offsets=[0.5], amplitude=2.0))

    def test_labels(self):
        lab = region_labels_from_positions([[1.5], [3.0]], 6)
        np.testing.assert_array_equal(lab[:, 0], [0, 0, 1, 1, 2, 2])
