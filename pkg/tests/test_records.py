"""Canonical records: byte-stable JSON, lossless floats, fixed CSV columns."""

import csv
import json
import math

import numpy as np
import pytest

from fastdiffusion import (
    COUPLE_CSV_COLUMNS,
    PLOT_CSV_COLUMNS,
    canonical_json,
    emit_report,
    load_record,
    make_record,
)


class TestCanonicalJson:
    def test_keys_sorted_and_trailing_newline(self):
        text = canonical_json({"b": 1, "a": 2})
        assert text.endswith("\n")
        assert text.index('"a"') < text.index('"b"')

    def test_floats_round_trip_exactly(self):
        vals = [1.0 / 3.0, 0.1, math.pi, 1e-300, 7.25]
        back = json.loads(canonical_json({"vals": vals}))
        assert back["vals"] == vals  # shortest repr reparses to the same bits

    def test_non_finite_becomes_null(self):
        back = json.loads(canonical_json({"a": math.nan, "b": math.inf, "c": -math.inf}))
        assert back == {"a": None, "b": None, "c": None}

    def test_numpy_scalars_and_arrays(self):
        payload = {
            "arr": np.array([1.5, 2.5]),
            "i": np.int64(7),
            "f": np.float64(0.25),
            "flag": np.bool_(True),
        }
        back = json.loads(canonical_json(payload))
        assert back == {"arr": [1.5, 2.5], "i": 7, "f": 0.25, "flag": True}

    def test_deterministic_bytes(self):
        payload = {"z": [0.1, 0.2], "a": {"nested": 3}}
        assert canonical_json(payload) == canonical_json(payload)


class TestResultRecord:
    def test_round_trip(self, tmp_path):
        rec = make_record("bounds", {"p": 2.0}, {"value": 1.0 / 3.0}, seed=5)
        path = tmp_path / "bounds.json"
        path.write_text(rec.to_json(), encoding="utf-8")
        back = load_record(path)
        assert back == rec

    def test_no_wall_clock(self):
        rec = make_record("bounds", {"p": 2.0}, {"value": 1.0}, seed=5)
        assert rec.timestamp is None
        again = make_record("bounds", {"p": 2.0}, {"value": 1.0}, seed=5)
        assert rec.to_json() == again.to_json()

    def test_inputs_hash_tracks_inputs_only(self):
        a = make_record("bounds", {"p": 2.0}, {"value": 1.0}, seed=5)
        b = make_record("bounds", {"p": 2.0}, {"value": 99.0}, seed=5)
        c = make_record("bounds", {"p": 4.0}, {"value": 1.0}, seed=5)
        assert a.inputs_hash == b.inputs_hash
        assert a.inputs_hash != c.inputs_hash
        assert len(a.inputs_hash) == 40  # sha1 hex

    def test_seed_recorded(self):
        rec = make_record("simulate", {}, {}, seed=12)
        assert rec.seed == 12
        assert make_record("simulate", {}, {}, seed=None).seed is None


class TestEmitReport:
    def test_files_written(self, tmp_path):
        rec = make_record("couple", {"a": 1}, {"b": 2}, seed=0)
        rows = [(0, True, 0.5, -0.1, 0.2, 0.3, 0.0)]
        paths = emit_report(rec, tmp_path, {"paths": (COUPLE_CSV_COLUMNS, rows)})
        assert [p.split("/")[-1] for p in paths] == ["couple.json", "couple_paths.csv"]
        back = load_record(tmp_path / "couple.json")
        assert back.outputs == {"b": 2}

    def test_csv_header_matches_contract(self, tmp_path):
        rec = make_record("couple", {}, {}, seed=0)
        rows = [(0, True, 0.5, -0.1, 0.2, 0.3, 0.0), (1, False, math.nan, 0.0, 0.1, 0.2, 0.4)]
        emit_report(rec, tmp_path, {"paths": (COUPLE_CSV_COLUMNS, rows)})
        with open(tmp_path / "couple_paths.csv", newline="", encoding="utf-8") as fh:
            got = list(csv.reader(fh))
        assert got[0] == list(COUPLE_CSV_COLUMNS)
        assert len(got) == 3
        # booleans become 0/1 and floats are written as repr text
        assert got[1][1] == "1"
        assert got[2][1] == "0"
        assert float(got[1][3]) == -0.1

    def test_column_contracts_frozen(self):
        assert COUPLE_CSV_COLUMNS == (
            "path_index",
            "coupled",
            "tau",
            "log_weight",
            "zeta_sq_int",
            "f_int",
            "final_dist_h",
        )
        assert PLOT_CSV_COLUMNS == ("path_index", "t", "dist_h", "beta", "zeta_sq")

    def test_float_cells_reparse_to_same_bits(self, tmp_path):
        rec = make_record("couple", {}, {}, seed=0)
        tricky = [1.0 / 3.0, math.pi, 1e-300, 0.1 + 0.2]
        rows = [(i, True, v, v, v, v, v) for i, v in enumerate(tricky)]
        emit_report(rec, tmp_path, {"paths": (COUPLE_CSV_COLUMNS, rows)})
        with open(tmp_path / "couple_paths.csv", newline="", encoding="utf-8") as fh:
            got = list(csv.reader(fh))[1:]
        for row, v in zip(got, tricky):
            assert float(row[2]) == v

    def test_no_tables_writes_json_only(self, tmp_path):
        rec = make_record("bounds", {}, {"x": 1}, seed=None)
        paths = emit_report(rec, tmp_path)
        assert len(paths) == 1
        assert paths[0].endswith("bounds.json")
