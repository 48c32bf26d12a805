import json

import numpy as np
import pytest

from mlwf import (
    Grid,
    InputError,
    SampledField,
    SpectralField,
    export_csv,
    forward_transform,
    load_field,
    save_field,
    stft,
    gaussian_window,
)

from conftest import random_field


def test_sampled_round_trip(tmp_path, grid64, rng):
    f = random_field(grid64, rng)
    path = save_field(f, tmp_path / "f.bin")
    back = load_field(path)
    assert isinstance(back, SampledField)
    assert np.array_equal(back.values, f.values)
    header = json.loads((tmp_path / "f.json").read_text())
    assert header == {"dimension": 1, "n": 64, "kind": "sampled", "dtype": "complex128"}


def test_spectral_round_trip(tmp_path, grid2d32, rng):
    F = forward_transform(random_field(grid2d32, rng))
    save_field(F, tmp_path / "F")
    back = load_field(tmp_path / "F.bin")
    assert isinstance(back, SpectralField)
    assert np.array_equal(back.coeffs, F.coeffs)


def test_phasespace_round_trip(tmp_path, rng):
    g = Grid(1, 16)
    V = stft(random_field(g, rng), gaussian_window(g, 0.8))
    save_field(V, tmp_path / "V.bin")
    back = load_field(tmp_path / "V.bin")
    assert np.array_equal(back.values, V.values)


def test_complex64_dtype(tmp_path, grid64, rng):
    f = random_field(grid64, rng)
    save_field(f, tmp_path / "f32.bin", dtype="complex64")
    back = load_field(tmp_path / "f32.bin")
    assert np.abs(back.values - f.values).max() < 1e-6


def test_missing_sidecar(tmp_path, grid64, rng):
    f = random_field(grid64, rng)
    path = save_field(f, tmp_path / "g.bin")
    (tmp_path / "g.json").unlink()
    with pytest.raises(FileNotFoundError):
        load_field(path)


def test_malformed_sidecar(tmp_path, grid64, rng):
    path = save_field(random_field(grid64, rng), tmp_path / "h.bin")
    (tmp_path / "h.json").write_text(json.dumps({"n": 64}))
    with pytest.raises(InputError):
        load_field(path)


def test_csv_export(tmp_path, grid64, rng):
    f = random_field(grid64, rng)
    out = export_csv(f, tmp_path / "f.csv")
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "index,re,im"
    assert len(lines) == 65
    idx, re, im = lines[1].split(",")
    assert complex(float(re), float(im)) == pytest.approx(complex(f.values[0]))
