import json
import math
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from probcal.binning import HistogramCalibrator
from probcal.density import DPMCalibrator, KDECalibrator
from probcal.monotone import IsotonicCalibrator, PlattCalibrator
from probcal.serialize import dumps, format_float, load_model, save_model
from probcal.synth import OracleSpec, generate_oracle


def finite_floats():
    return st.floats(allow_nan=False, allow_infinity=False)


class TestFormatFloat:
    @given(finite_floats())
    def test_round_trips_exactly(self, value):
        assert float(format_float(value)) == value or (
            value == 0.0 and float(format_float(value)) == 0.0
        )

    @given(finite_floats())
    def test_bit_pattern_preserved(self, value):
        recovered = float(format_float(value))
        assert struct.pack("<d", recovered) == struct.pack("<d", value)

    def test_non_finite_becomes_null(self):
        assert format_float(math.nan) == "null"
        assert format_float(math.inf) == "null"
        assert format_float(-math.inf) == "null"

    def test_known_rendering(self):
        assert format_float(0.1) == "0.10000000000000001"
        assert format_float(1.0) == "1"


class TestDumps:
    def test_scalars(self):
        assert dumps(None) == "null"
        assert dumps(True) == "true"
        assert dumps(False) == "false"
        assert dumps(7) == "7"
        assert dumps(0.5) == "0.5"
        assert dumps("hi") == '"hi"'

    def test_string_escaping(self):
        assert dumps('he said "no"\n') == json.dumps('he said "no"\n')

    def test_empty_containers(self):
        assert dumps({}) == "{}"
        assert dumps([]) == "[]"

    def test_dict_preserves_insertion_order(self):
        text = dumps({"b": 1, "a": 2})
        assert text.index('"b"') < text.index('"a"')

    def test_nested_structure_parses_back(self):
        payload = {"xs": [1.5, None, True], "inner": {"k": "v"}, "n": 3}
        assert json.loads(dumps(payload)) == payload

    def test_nan_inside_list_becomes_null(self):
        assert json.loads(dumps([math.nan]))[0] is None

    def test_tuple_serializes_like_list(self):
        assert dumps((1, 2)) == dumps([1, 2])

    def test_rejects_unknown_types(self):
        with pytest.raises(TypeError, match="cannot serialize"):
            dumps(object())

    def test_deterministic_bytes(self):
        payload = {"a": [0.1, 0.2], "b": {"c": 1e-300}}
        assert dumps(payload) == dumps(payload)


def _fitted_models():
    data = generate_oracle(OracleSpec(), 200, seed=3)
    scores, labels = data.scores, data.labels
    return [
        HistogramCalibrator(n_bins=4).fit(scores, labels),
        PlattCalibrator().fit(scores, labels),
        IsotonicCalibrator().fit(scores, labels),
        KDECalibrator().fit(scores, labels),
        DPMCalibrator(truncation=3, max_iter=30, seed=0).fit(scores, labels),
    ]


class TestModelFiles:
    def test_round_trip_predictions_for_every_method(self, tmp_path):
        grid = np.linspace(0, 1, 41)
        for model in _fitted_models():
            path = tmp_path / f"{model.to_dict()['method']}.json"
            save_model(model, path)
            loaded = load_model(path)
            assert type(loaded) is type(model)
            assert np.array_equal(loaded.predict(grid), model.predict(grid))

    def test_rewrite_is_byte_identical(self, tmp_path):
        model = _fitted_models()[0]
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        save_model(model, first)
        save_model(model, second)
        assert first.read_bytes() == second.read_bytes()

    def test_file_is_plain_json_with_method_key(self, tmp_path):
        path = tmp_path / "m.json"
        save_model(_fitted_models()[1], path)
        payload = json.loads(path.read_text())
        assert payload["method"] == "platt"

    def test_load_rejects_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ValueError, match="not valid JSON"):
            load_model(path)

    def test_load_rejects_missing_method(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"A": 1.0}')
        with pytest.raises(ValueError, match="missing 'method'"):
            load_model(path)

    def test_load_rejects_unknown_method(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"method": "spline"}')
        with pytest.raises(ValueError, match="unknown model method"):
            load_model(path)

    def test_load_rejects_non_object_payload(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[1, 2, 3]")
        with pytest.raises(ValueError, match="not a model file"):
            load_model(path)

    def test_save_rejects_foreign_payload(self, tmp_path):
        class Fake:
            def to_dict(self):
                return {"method": "mystery"}

        with pytest.raises(ValueError, match="unknown model method"):
            save_model(Fake(), tmp_path / "x.json")

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_model(tmp_path / "nope.json")
