from __future__ import annotations

import json

import numpy as np
import pytest

import twoscale as ts
from twoscale.errors import ModelValidationError
from twoscale.model import (
    CSMA3_SPEC,
    CSMA5_SPEC,
    CsmaSpec,
    affine_transition,
    build_csma,
    enumerate_feasible_activations,
)

from helpers import build_toy_generic, naive_drift_matrix, naive_kernel


PATH3 = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])


class TestActivations:
    def test_path3_independent_sets(self):
        acts = enumerate_feasible_activations(PATH3)
        assert acts == [(0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0), (1, 0, 1)]

    def test_csma5_graph_has_twelve(self):
        acts = enumerate_feasible_activations(CSMA5_SPEC.adjacency)
        assert len(acts) == 12
        assert acts[0] == (0, 0, 0, 0, 0)

    def test_lexicographic_order(self):
        acts = enumerate_feasible_activations(np.zeros((2, 2), dtype=int))
        assert acts == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_complete_graph(self):
        K3 = 1 - np.eye(3, dtype=int)
        acts = enumerate_feasible_activations(K3)
        assert acts == [(0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0)]

    def test_class_count_guard(self):
        big = np.zeros((21, 21), dtype=int)
        with pytest.raises(ModelValidationError):
            enumerate_feasible_activations(big)


class TestCsmaSpec:
    def test_asymmetric_adjacency_rejected(self):
        bad = np.array([[0, 1], [0, 0]])
        with pytest.raises(ModelValidationError):
            CsmaSpec(bad, [1, 1], [1, 1], [1, 1], 2)

    def test_self_loop_rejected(self):
        bad = np.array([[1, 0], [0, 0]])
        with pytest.raises(ModelValidationError):
            CsmaSpec(bad, [1, 1], [1, 1], [1, 1], 2)

    def test_nonpositive_rates_rejected(self):
        adj = np.zeros((2, 2), dtype=int)
        with pytest.raises(ModelValidationError):
            CsmaSpec(adj, [1, 0], [1, 1], [1, 1], 2)
        with pytest.raises(ModelValidationError):
            CsmaSpec(adj, [1, 1], [1, -2], [1, 1], 2)
        with pytest.raises(ModelValidationError):
            CsmaSpec(adj, [1, 1], [1, 1], [0, 1], 2)

    def test_buffer_must_be_positive_integer(self):
        adj = np.zeros((2, 2), dtype=int)
        with pytest.raises(ModelValidationError):
            CsmaSpec(adj, [1, 1], [1, 1], [1, 1], 0)


class TestCsmaModel:
    def test_dimensions(self, csma3, csma5):
        assert csma3.d_x == 30 and csma3.n_fast == 5
        assert csma5.d_x == 50 and csma5.n_fast == 12

    def test_validate_clean(self, csma3, csma5):
        assert ts.validate(csma3) == []
        assert ts.validate(csma5) == []

    def test_projection_sorts_levels_descending(self, csma3):
        x = np.linspace(0.0, 1.0, 30)
        p = csma3.project_state(x)
        for c in range(3):
            level = p[c * 10 : (c + 1) * 10]
            assert np.all(np.diff(level) <= 0)
        assert np.all(p >= 0.0) and np.all(p <= 1.0)

    def test_sample_states_feasible(self, csma3):
        rng = np.random.default_rng(3)
        pts = ts.sample_states(csma3, rng, 20)
        assert pts.shape == (20, 30)
        for x in pts:
            for c in range(3):
                level = x[c * 10 : (c + 1) * 10]
                assert np.all(np.diff(level) <= 1e-12)

    def test_kernel_matches_naive(self, csma3):
        rng = np.random.default_rng(7)
        for x in ts.sample_states(csma3, rng, 5):
            K_fast = ts.build_kernel(csma3, x)
            np.testing.assert_allclose(K_fast, naive_kernel(csma3, x), atol=1e-12)

    def test_drift_matrix_matches_naive(self, csma3):
        rng = np.random.default_rng(11)
        for x in ts.sample_states(csma3, rng, 5):
            np.testing.assert_allclose(
                ts.drift_matrix(csma3, x), naive_drift_matrix(csma3, x), atol=1e-12
            )

    def test_tables_cached(self, csma3):
        assert csma3.tables() is csma3.tables()


class TestToyModel:
    def test_kernel_closed_form(self, toy):
        x = np.array([0.4])
        K = ts.build_kernel(toy, x)
        expected = np.array([[-(2 + 0.4), 2 + 0.4], [3.0, -3.0]])
        np.testing.assert_allclose(K, expected, atol=1e-14)

    def test_generic_twin_agrees(self, toy):
        gen = build_toy_generic()
        assert not gen.is_affine
        for xv in (0.1, 0.5, 0.9):
            x = np.array([xv])
            np.testing.assert_allclose(
                ts.build_kernel(toy, x), ts.build_kernel(gen, x), atol=1e-14
            )
            np.testing.assert_allclose(
                ts.drift_matrix(toy, x), ts.drift_matrix(gen, x), atol=1e-14
            )
            np.testing.assert_allclose(
                ts.average_drift(toy, x), ts.average_drift(gen, x), atol=1e-13
            )

    def test_validate_clean(self, toy):
        assert ts.validate(toy) == []


class TestValidate:
    def test_negative_rate_region_reported(self):
        model = ts.TwoTimescaleModel(
            name="bad",
            d_x=1,
            fast_states=(0,),
            transitions=(affine_transition([1.0], None, -0.5, [1.0]),),
            box_lower=np.zeros(1),
            box_upper=np.ones(1),
        )
        problems = ts.validate(model)
        assert problems and "transition 0" in problems[0]

    def test_bad_target_reported(self):
        bad = ts.Transition(
            ell=np.array([1.0]),
            target_fast=5,
            rate=lambda x, y: 1.0,
        )
        model = ts.TwoTimescaleModel(
            name="bad",
            d_x=1,
            fast_states=(0,),
            transitions=(bad,),
            box_lower=np.zeros(1),
            box_upper=np.ones(1),
        )
        problems = ts.validate(model)
        assert any("target" in p for p in problems)

    def test_wrong_ell_shape_reported(self):
        bad = ts.Transition(
            ell=np.array([1.0, 2.0]),
            target_fast=None,
            rate=lambda x, y: 1.0,
        )
        model = ts.TwoTimescaleModel(
            name="bad",
            d_x=1,
            fast_states=(0,),
            transitions=(bad,),
            box_lower=np.zeros(1),
            box_upper=np.ones(1),
        )
        problems = ts.validate(model)
        assert any("shape" in p for p in problems)


class TestDescriptors:
    def test_named_models(self):
        assert ts.named_model("toy").d_x == 1
        assert ts.named_model("csma3").d_x == 30
        assert ts.named_model("csma5").d_x == 50
        with pytest.raises(ModelValidationError):
            ts.named_model("nope")

    def test_descriptor_roundtrip(self):
        desc = {
            "csma": {
                "adjacency": PATH3.tolist(),
                "lambda": list(CSMA3_SPEC.lambda_),
                "nu": list(CSMA3_SPEC.nu),
                "mu": list(CSMA3_SPEC.mu),
                "buffer": 10,
            }
        }
        model = ts.model_from_descriptor(desc)
        ref = build_csma(CSMA3_SPEC)
        x = np.full(30, 0.1)
        np.testing.assert_allclose(ts.build_kernel(model, x), ts.build_kernel(ref, x))

    def test_unknown_top_key(self):
        with pytest.raises(ModelValidationError, match="bogus"):
            ts.model_from_descriptor({"bogus": {}})

    def test_missing_inner_key(self):
        with pytest.raises(ModelValidationError, match="buffer"):
            ts.model_from_descriptor(
                {"csma": {"adjacency": [[0]], "lambda": [1], "nu": [1], "mu": [1]}}
            )

    def test_extra_inner_key(self):
        with pytest.raises(ModelValidationError, match="extra"):
            ts.model_from_descriptor(
                {
                    "csma": {
                        "adjacency": [[0]],
                        "lambda": [1],
                        "nu": [1],
                        "mu": [1],
                        "buffer": 2,
                        "extra": 1,
                    }
                }
            )

    def test_load_model_from_file(self, tmp_path):
        path = tmp_path / "net.json"
        path.write_text(
            json.dumps(
                {
                    "csma": {
                        "adjacency": [[0, 1], [1, 0]],
                        "lambda": [0.3, 0.4],
                        "nu": [2.0, 2.0],
                        "mu": [1.0, 1.5],
                        "buffer": 3,
                    }
                }
            )
        )
        model = ts.load_model(str(path))
        assert model.d_x == 6 and model.n_fast == 3

    def test_load_model_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ModelValidationError, match="malformed JSON"):
            ts.load_model(str(path))

    def test_load_model_unknown_source(self):
        with pytest.raises(ModelValidationError, match="neither"):
            ts.load_model("no-such-model")
