import json

import numpy as np
import pytest

from roughshear.fields import Grid, GridField
from roughshear.io import (MAGIC, field_from_dict, field_to_dict, load_field, read_binary,
                           save_field, write_binary)

from conftest import random_complex_field, rough_field


@pytest.mark.parametrize("suffix", [".json", ".bin", ".rsf"])
def test_save_load_round_trip(tmp_path, suffix):
    f = random_complex_field(Grid(64, domain_length=3.0, origin=0.5), 1)
    path = tmp_path / f"field{suffix}"
    save_field(f, path)
    g = load_field(path)
    assert g.grid == f.grid
    assert np.array_equal(g.values, f.values)
    assert g.is_real == f.is_real


def test_json_layout_is_interleaved():
    f = GridField(Grid(16), np.arange(16) + 1j)
    d = json.loads(json.dumps(field_to_dict(f)))
    assert d["values"][:4] == [0.0, 1.0, 1.0, 1.0]
    assert d["grid"]["n_points"] == 16
    assert field_from_dict(d).values[3] == 3 + 1j


def test_json_length_mismatch():
    d = field_to_dict(rough_field(16))
    d["values"] = d["values"][:-2]
    with pytest.raises(ValueError):
        field_from_dict(d)


def test_binary_header(tmp_path):
    f = rough_field(32)
    path = tmp_path / "u.bin"
    write_binary(f, path)
    raw = path.read_bytes()
    assert raw[:4] == MAGIC
    assert len(raw) == 32 + 16 * 32
    assert int.from_bytes(raw[4:8], "little") == 32
    assert raw[24] == 1
    assert np.array_equal(read_binary(path).values, f.values)


def test_binary_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"XXXX" + bytes(60))
    with pytest.raises(ValueError):
        read_binary(path)
