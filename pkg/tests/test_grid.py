"""Grid, field, transform, norm and snapshot unit tests."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magma_lab import (
    Field,
    SnapshotFormatError,
    TorusGrid,
    field_stats,
    forward_transform,
    hs_norm,
    inverse_transform,
    read_snapshot,
    spectral_derivative,
    write_snapshot,
)
from magma_lab.grid import SNAPSHOT_MAGIC, Spectrum


def test_grid_validation():
    with pytest.raises(ValueError):
        TorusGrid((), ())
    with pytest.raises(ValueError):
        TorusGrid((8, 8), (1.0,))
    with pytest.raises(ValueError):
        TorusGrid((7,), (1.0,))
    with pytest.raises(ValueError):
        TorusGrid((2,), (1.0,))
    with pytest.raises(ValueError):
        TorusGrid((8,), (-1.0,))


def test_grid_geometry():
    g = TorusGrid((8, 16), (2.0, 4.0))
    assert g.d == 2
    assert g.shape == (8, 16)
    assert g.size == 128
    assert g.spacing == (0.25, 0.25)
    assert g.cell_volume == pytest.approx(0.0625)
    assert g.volume == pytest.approx(8.0)
    x0 = g.axis_coordinates(0)
    assert x0[0] == 0.0 and x0[-1] == pytest.approx(2.0 - 0.25)
    cub = TorusGrid.cubic(3, 4)
    assert cub.shape == (4, 4, 4)
    assert cub.lengths == (2.0 * np.pi,) * 3


def test_wavenumbers_and_modes():
    g = TorusGrid((8,), (2.0 * np.pi,))
    k = g.axis_wavenumbers(0)
    assert k[0] == 0.0
    assert k[1] == pytest.approx(1.0)
    assert k[-1] == pytest.approx(-1.0)
    gl = TorusGrid((8,), (4.0 * np.pi,))
    assert gl.axis_wavenumbers(0)[1] == pytest.approx(0.5)
    g2 = TorusGrid((8, 8), (2.0 * np.pi, 2.0 * np.pi))
    idx = g2.mode_index((1, -2))
    assert idx == (1, 6)
    np.testing.assert_allclose(g2.mode_wavevector((1, -2)), [1.0, -2.0])
    with pytest.raises(ValueError):
        g2.mode_index((1,))


def test_field_validation_and_ops():
    g = TorusGrid((8,), (2.0 * np.pi,))
    with pytest.raises(ValueError):
        Field(g, np.ones(7))
    with pytest.raises(ValueError):
        Field(g, np.full(8, np.nan))
    f = Field.from_function(g, np.cos)
    h = Field.constant(g, 2.0)
    assert (f + h).values[0] == pytest.approx(3.0)
    assert (h - f).values[0] == pytest.approx(1.0)
    assert (2.0 * f).values[0] == pytest.approx(2.0)
    assert (f**2).values[0] == pytest.approx(1.0)
    assert (-f).values[0] == pytest.approx(-1.0)
    assert h.mean() == pytest.approx(2.0)
    assert f.mean() == pytest.approx(0.0, abs=1e-15)
    other = TorusGrid((16,), (2.0 * np.pi,))
    with pytest.raises(ValueError):
        _ = f + Field.constant(other, 1.0)
    with pytest.raises(ValueError):
        f.values[0] = 3.0


def test_forward_transform_mean_and_mode():
    g = TorusGrid((32,), (2.0 * np.pi,))
    f = Field.from_function(g, lambda x: 1.5 + np.cos(3 * x))
    spec = forward_transform(f)
    assert spec.coeffs[g.mode_index((0,))] == pytest.approx(1.5)
    assert spec.coeffs[g.mode_index((3,))] == pytest.approx(0.5)
    assert spec.coeffs[g.mode_index((-3,))] == pytest.approx(0.5)


def test_inverse_transform_round_trip_and_symmetry_check():
    g = TorusGrid((16, 8), (2.0 * np.pi, 1.0))
    rng = np.random.default_rng(7)
    f = Field(g, rng.normal(size=g.shape))
    back = inverse_transform(forward_transform(f))
    np.testing.assert_allclose(back.values, f.values, atol=1e-13)
    bad = np.zeros(g.shape, dtype=complex)
    bad[1, 0] = 1.0j
    with pytest.raises(ValueError, match="conjugate"):
        inverse_transform(Spectrum(g, bad))


def test_spectral_derivative_exact_on_trig():
    g = TorusGrid((64,), (2.0 * np.pi,))
    f = Field.from_function(g, lambda x: np.sin(5 * x) + 0.3 * np.cos(2 * x))
    want = Field.from_function(g, lambda x: 5 * np.cos(5 * x) - 0.6 * np.sin(2 * x))
    got = spectral_derivative(f, 0)
    np.testing.assert_allclose(got.values, want.values, atol=1e-12)
    with pytest.raises(ValueError):
        spectral_derivative(f, 1)


def test_spectral_derivative_multidim_axes():
    g = TorusGrid((32, 32), (2.0 * np.pi, 4.0 * np.pi))
    f = Field.from_function(g, lambda x, y: np.cos(x + 0.5 * y))
    dx = spectral_derivative(f, 0)
    dy = spectral_derivative(f, 1)
    want = Field.from_function(g, lambda x, y: -np.sin(x + 0.5 * y))
    np.testing.assert_allclose(dx.values, want.values, atol=1e-12)
    np.testing.assert_allclose(dy.values, 0.5 * want.values, atol=1e-12)


def test_nyquist_mode_derivative_is_zero():
    g = TorusGrid((8,), (2.0 * np.pi,))
    f = Field.from_function(g, lambda x: np.cos(4 * x))
    np.testing.assert_allclose(f.values, [1, -1] * 4, atol=1e-14)
    d = spectral_derivative(f, 0)
    np.testing.assert_allclose(d.values, 0.0, atol=1e-13)


def test_hs_norm_analytic_values():
    g = TorusGrid((64,), (2.0 * np.pi,))
    f = Field.from_function(g, np.cos)
    assert hs_norm(f, 0.0) == pytest.approx(np.sqrt(np.pi), rel=1e-12)
    assert hs_norm(f, 1.0) == pytest.approx(np.sqrt(2.0 * np.pi), rel=1e-12)
    one = Field.constant(g, 1.0)
    assert hs_norm(one, 3.5) == pytest.approx(np.sqrt(2.0 * np.pi), rel=1e-12)
    with pytest.raises(ValueError):
        hs_norm(f, -1.0)


def test_hs_norm_matches_grid_l2():
    g = TorusGrid((32, 16), (2.0 * np.pi, 2.0))
    rng = np.random.default_rng(3)
    f = Field(g, rng.normal(size=g.shape))
    l2 = np.sqrt(np.sum(f.values**2) * g.cell_volume)
    assert hs_norm(f, 0.0) == pytest.approx(l2, rel=1e-12)


def test_field_stats():
    g = TorusGrid((16,), (2.0 * np.pi,))
    f = Field.from_function(g, lambda x: 2.0 + np.cos(x))
    s = field_stats(f)
    assert s.min == pytest.approx(1.0)
    assert s.max == pytest.approx(3.0)
    assert s.inv_sup == pytest.approx(1.0)


@given(
    st.integers(min_value=2, max_value=8).map(lambda m: 2 * m),
    st.floats(min_value=0.5, max_value=20.0),
    st.integers(min_value=0, max_value=2**31 - 1),
)
def test_transform_round_trip_property(n, length, seed):
    g = TorusGrid((n,), (length,))
    vals = np.random.default_rng(seed).normal(size=g.shape)
    f = Field(g, vals)
    back = inverse_transform(forward_transform(f))
    np.testing.assert_allclose(back.values, vals, atol=1e-12)


@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_hs_norm_monotone_in_s(seed):
    g = TorusGrid((16,), (2.0 * np.pi,))
    vals = np.random.default_rng(seed).normal(size=g.shape)
    f = Field(g, vals)
    norms = [hs_norm(f, s) for s in (0.0, 1.0, 2.5, 4.0)]
    assert all(a <= b + 1e-12 for a, b in zip(norms, norms[1:]))


@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_derivative_skew_adjoint(seed):
    g = TorusGrid((32,), (5.0,))
    rng = np.random.default_rng(seed)
    u = Field(g, rng.normal(size=g.shape))
    v = Field(g, rng.normal(size=g.shape))
    lhs = np.sum(spectral_derivative(u, 0).values * v.values)
    rhs = -np.sum(u.values * spectral_derivative(v, 0).values)
    scale = max(1.0, abs(lhs))
    assert abs(lhs - rhs) <= 1e-10 * scale


def test_snapshot_round_trip(tmp_path):
    g = TorusGrid((8, 4, 6), (1.0, 2.0, 3.5))
    rng = np.random.default_rng(11)
    f = Field(g, rng.normal(size=g.shape))
    path = tmp_path / "snap.bin"
    write_snapshot(f, path)
    back = read_snapshot(path)
    assert back.grid == g
    np.testing.assert_array_equal(back.values, f.values)


def test_snapshot_malformations(tmp_path):
    g = TorusGrid((8,), (2.0 * np.pi,))
    f = Field.constant(g, 1.0)
    path = tmp_path / "snap.bin"
    write_snapshot(f, path)
    raw = path.read_bytes()

    short = tmp_path / "short.bin"
    short.write_bytes(raw[:10])
    with pytest.raises(SnapshotFormatError, match="header"):
        read_snapshot(short)

    bad_magic = tmp_path / "magic.bin"
    bad_magic.write_bytes(b"NOTMAGMA" + raw[8:])
    with pytest.raises(SnapshotFormatError, match="magic"):
        read_snapshot(bad_magic)

    bad_pad = tmp_path / "pad.bin"
    bad_pad.write_bytes(SNAPSHOT_MAGIC + b"\x01" * 8 + raw[16:])
    with pytest.raises(SnapshotFormatError, match="magic"):
        read_snapshot(bad_pad)

    bad_version = tmp_path / "ver.bin"
    bad_version.write_bytes(raw[:16] + (99).to_bytes(4, "little") + raw[20:])
    with pytest.raises(SnapshotFormatError, match="version"):
        read_snapshot(bad_version)

    truncated = tmp_path / "trunc.bin"
    truncated.write_bytes(raw[:-8])
    with pytest.raises(SnapshotFormatError, match="payload"):
        read_snapshot(truncated)
