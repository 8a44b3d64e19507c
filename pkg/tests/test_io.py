import json
import math

import numpy as np
import pytest

from bqwave.io import (FormatError, config_hash, read_bqfl, read_csv, to_json, write_bqfl,
                       write_csv)


def test_bqfl_round_trip(tmp_path, rng):
    recs = {"T": (rng.standard_normal((5, 3, 4)), (0.1, 0.2, 0.3), (-1.0, 0.0, 0.0)),
            "line": (rng.standard_normal(7), 0.5, 2.0)}
    meta = {"c": 1 / 3, "nested": {"b": [1, 2], "a": True}}
    p = tmp_path / "s.bqfl"
    write_bqfl(p, recs, meta)
    m, back = read_bqfl(p)
    assert m == json.loads(to_json(meta))
    assert m["c"] == 1 / 3
    for k, (arr, sp, org) in recs.items():
        a2, sp2, org2 = back[k]
        assert a2.shape == arr.shape and np.array_equal(a2, arr)
        assert np.array_equal(sp2, np.broadcast_to(sp, (arr.ndim,)))
        assert np.array_equal(org2, np.broadcast_to(org, (arr.ndim,)))
    assert list(back) == list(recs)


def test_bqfl_rejects_bad_files(tmp_path):
    p = tmp_path / "s.bqfl"
    write_bqfl(p, {"x": (np.zeros(3), 1.0, 0.0)})
    q = tmp_path / "t.bqfl"
    q.write_bytes(p.read_bytes() + b"\0")
    with pytest.raises(FormatError, match="1 trailing bytes"):
        read_bqfl(q)
    q.write_bytes(b"NOPE" + p.read_bytes()[4:])
    with pytest.raises(FormatError, match="not a BQFL"):
        read_bqfl(q)


def test_bqfl_is_byte_deterministic(tmp_path):
    recs = {"x": (np.linspace(0, 1, 11), 0.1, 0.0)}
    write_bqfl(tmp_path / "a", recs, {"z": 1, "a": 0.1})
    write_bqfl(tmp_path / "b", recs, {"a": 0.1, "z": 1})
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_json_full_precision_and_order():
    x = 0.1 + 0.2
    s = to_json({"b": x, "a": [np.float64(1e-300), np.int64(3)], "c": math.inf})
    back = json.loads(s)
    assert back["b"] == x and back["a"] == [1e-300, 3] and back["c"] == "inf"
    assert s.index('"a"') < s.index('"b"') < s.index('"c"')
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 1.5})


def test_csv_round_trip(tmp_path):
    rows = [[0.1, True, "x"], [1 / 3, False, "y"]]
    write_csv(tmp_path / "t.csv", ["v", "flag", "s"], rows, {"k": "v", "a": "1"})
    header, cols, back = read_csv(tmp_path / "t.csv")
    assert header == {"k": "v", "a": "1"} and cols == ["v", "flag", "s"]
    assert float(back[1][0]) == 1 / 3 and back[0][1] == "true"
    assert (tmp_path / "t.csv").read_text().startswith("# a=1\n# k=v\n")
