import numpy as np
import pytest

from arcmusic import io, music
from arcmusic.errors import ConfigError


def test_complex_matrix_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    m = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    m[0, 0] = 1e-300 - 3e300j
    path = io.save_complex_matrix(tmp_path / "k.txt", m, {"k": 3.5, "arcs": "gamma1"})
    back, header = io.load_complex_matrix(path)
    assert np.array_equal(back, m)
    assert header == {"k": "3.5", "arcs": "gamma1"}


def test_matrix_parse_errors():
    with pytest.raises(ConfigError):
        io.parse_complex_matrix("1,2 3\n")
    with pytest.raises(ConfigError):
        io.parse_complex_matrix("1,2 3,4\n5,6\n")
    with pytest.raises(ConfigError):
        io.parse_complex_matrix("# shape: 2 2\n1,0\n")


def test_singular_value_csv():
    text = io.format_singular_values([2.0, 1.0, 0.01], 2)
    lines = text.splitlines()
    assert lines[0] == "m,sigma,sigma_over_sigma1,selected"
    assert lines[1] == "1,2.0,1.0,1"
    assert lines[3].endswith(",0")


def make_map():
    grid = music.ImageGrid(0.0, 1.0, 0.0, 2.0, 3, 2)
    values = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 1.0]])
    return music.ImagingMap(grid, values, music.MUSIC, {"clamp_count": 0})


def test_map_csv_row_major():
    lines = io.format_map_csv(make_map()).splitlines()
    assert lines[0] == "x,y,value"
    assert lines[1:3] == ["0.0,0.0,1.0", "0.0,2.0,2.0"]
    assert len(lines) == 7


def test_pgm_scaling_and_orientation():
    payload, (low, high) = io.pgm_bytes(make_map())
    head = b"P5\n3 2\n255\n"
    assert payload.startswith(head)
    pixels = np.frombuffer(payload[len(head):], dtype=np.uint8).reshape(2, 3)
    assert (low, high) == (1.0, 5.0)
    # top row is y = 2, columns run along x
    assert pixels[0].tolist() == [64, 191, 0]
    assert pixels[1].tolist() == [0, 128, 255]


def test_pgm_constant_map():
    m = make_map()
    m.values[:] = 1.0
    payload, _ = io.pgm_bytes(m)
    assert set(payload[len(b"P5\n3 2\n255\n"):]) == {0}


def test_atomic_write_leaves_no_temp(tmp_path):
    target = tmp_path / "sub" / "out.txt"
    io.atomic_write(target, "hello\n")
    io.atomic_write(target, b"bytes")
    assert target.read_bytes() == b"bytes"
    assert [p.name for p in target.parent.iterdir()] == ["out.txt"]


def test_key_values():
    assert io.parse_key_values("a = 1\n# note\nb=x # trailing\n\n") == {"a": "1", "b": "x"}
    with pytest.raises(ConfigError):
        io.parse_key_values("novalue\n")


def test_manifest_format():
    assert io.format_manifest({"a": 1, "b": "x"}) == "a: 1\nb: x\n"
