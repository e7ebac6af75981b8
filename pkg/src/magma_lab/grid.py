"""Uniform periodic grids, real fields, and their Fourier companions.

Conventions used throughout the package:

* the forward transform divides by the number of points, so the zeroth
  coefficient equals the mean of the field;
* wavenumbers on axis ``j`` are ``2*pi*fftfreq(N_j, L_j/N_j)``;
* odd-order spectral derivatives zero the Nyquist mode on the axis being
  differentiated, so real fields stay real and the derivative is
  skew-adjoint on the grid;
* ``hs_norm(f, 0)`` equals the L2 norm of ``f`` over the torus, i.e. the
  Parseval weight carries the domain volume.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "TorusGrid",
    "Field",
    "Spectrum",
    "FieldStats",
    "SnapshotFormatError",
    "forward_transform",
    "inverse_transform",
    "spectral_derivative",
    "hs_norm",
    "field_stats",
    "write_snapshot",
    "read_snapshot",
]

SNAPSHOT_MAGIC = b"MAGMAFLD"
SNAPSHOT_VERSION = 1


class SnapshotFormatError(IOError):
    """Raised when a snapshot file does not follow the binary layout."""


@dataclass(frozen=True)
class TorusGrid:
    """Uniform tensor grid on a d-dimensional torus of given side lengths."""

    n_points: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self) -> None:
        n_points = tuple(int(n) for n in self.n_points)
        lengths = tuple(float(L) for L in self.lengths)
        object.__setattr__(self, "n_points", n_points)
        object.__setattr__(self, "lengths", lengths)
        if len(n_points) == 0:
            raise ValueError("grid needs at least one axis")
        if len(lengths) != len(n_points):
            raise ValueError("n_points and lengths must have the same length")
        for n in n_points:
            if n < 4 or n % 2 != 0:
                raise ValueError(f"points per axis must be even and >= 4, got {n}")
        for L in lengths:
            if not np.isfinite(L) or L <= 0:
                raise ValueError(f"side lengths must be positive, got {L}")

    @classmethod
    def cubic(cls, d: int, n: int, length: float = 2.0 * np.pi) -> "TorusGrid":
        return cls((n,) * d, (length,) * d)

    @property
    def d(self) -> int:
        return len(self.n_points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n_points

    @cached_property
    def size(self) -> int:
        return int(np.prod(self.n_points))

    @cached_property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.n_points))

    @cached_property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @cached_property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def axis_coordinates(self, axis: int) -> np.ndarray:
        n, L = self.n_points[axis], self.lengths[axis]
        return np.arange(n) * (L / n)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Open (broadcastable) coordinate arrays, one per axis."""
        return tuple(
            self.axis_coordinates(j).reshape(
                tuple(-1 if i == j else 1 for i in range(self.d))
            )
            for j in range(self.d)
        )

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        axes = [self.axis_coordinates(j) for j in range(self.d)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def axis_wavenumbers(self, axis: int) -> np.ndarray:
        n, L = self.n_points[axis], self.lengths[axis]
        return 2.0 * np.pi * np.fft.fftfreq(n, d=L / n)

    @cached_property
    def k_squared(self) -> np.ndarray:
        """|k|^2 on the full transform lattice, Nyquist at its true value."""
        out = np.zeros(self.shape)
        for j in range(self.d):
            kj = self.axis_wavenumbers(j).reshape(
                tuple(-1 if i == j else 1 for i in range(self.d))
            )
            out = out + kj**2
        return out

    @cached_property
    def deriv_multipliers(self) -> tuple[np.ndarray, ...]:
        """Broadcastable i*k per axis with the Nyquist entry zeroed."""
        out = []
        for j in range(self.d):
            k = self.axis_wavenumbers(j).copy()
            k[self.n_points[j] // 2] = 0.0
            out.append(
                (1j * k).reshape(tuple(-1 if i == j else 1 for i in range(self.d)))
            )
        return tuple(out)

    # rfft-layout companions for the real-transform fast paths
    @cached_property
    def rfft_shape(self) -> tuple[int, ...]:
        return self.shape[:-1] + (self.n_points[-1] // 2 + 1,)

    @cached_property
    def rfft_deriv_multipliers(self) -> tuple[np.ndarray, ...]:
        out = []
        for j in range(self.d):
            if j == self.d - 1:
                n, L = self.n_points[j], self.lengths[j]
                k = 2.0 * np.pi * np.fft.rfftfreq(n, d=L / n)
                k[-1] = 0.0
            else:
                k = self.axis_wavenumbers(j).copy()
                k[self.n_points[j] // 2] = 0.0
            out.append(
                (1j * k).reshape(tuple(-1 if i == j else 1 for i in range(self.d)))
            )
        return tuple(out)

    @cached_property
    def rfft_k_squared(self) -> np.ndarray:
        """Derivative-convention |k|^2 on the rfft lattice (Nyquist zeroed)."""
        out = np.zeros(self.rfft_shape)
        for ik in self.rfft_deriv_multipliers:
            out = out + np.abs(ik) ** 2
        return out

    def mode_index(self, mode: Sequence[int]) -> tuple[int, ...]:
        """Lattice index of integer Fourier mode ``mode`` on the full layout."""
        if len(mode) != self.d:
            raise ValueError("mode vector length must match grid dimension")
        return tuple(int(m) % n for m, n in zip(mode, self.n_points))

    def mode_wavevector(self, mode: Sequence[int]) -> np.ndarray:
        return np.array([2.0 * np.pi * m / L for m, L in zip(mode, self.lengths)])


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Field:
    """Real scalar sample values on a :class:`TorusGrid`."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", _readonly(values.copy()))

    @classmethod
    def constant(cls, grid: TorusGrid, value: float) -> "Field":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: TorusGrid, fn: Callable[..., np.ndarray]) -> "Field":
        return cls(grid, np.broadcast_to(fn(*grid.coordinates()), grid.shape))

    def _binary(self, other, op) -> "Field":
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return Field(self.grid, op(self.values, other.values))
        return Field(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return Field(self.grid, np.subtract(other, self.values))

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __pow__(self, exponent: float):
        return Field(self.grid, np.power(self.values, exponent))

    def __neg__(self):
        return Field(self.grid, -self.values)

    def mean(self) -> float:
        return float(self.values.mean())


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier coefficients on the full transform lattice, mean at index 0."""

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.shape != self.grid.shape:
            raise ValueError(
                f"coeffs shape {coeffs.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("spectrum coefficients must be finite")
        object.__setattr__(self, "coeffs", _readonly(coeffs.copy()))


@dataclass(frozen=True)
class FieldStats:
    min: float
    max: float
    inv_sup: float


def forward_transform(f: Field) -> Spectrum:
    return Spectrum(f.grid, np.fft.fftn(f.values) / f.grid.size)


def _reflection_index(shape: tuple[int, ...]):
    return np.ix_(*[(-np.arange(n)) % n for n in shape])


def inverse_transform(s: Spectrum) -> Field:
    """Invert the transform; rejects coefficients without conjugate symmetry."""
    c = s.coeffs
    mirrored = np.conj(c[_reflection_index(s.grid.shape)])
    scale = max(1.0, float(np.abs(c).max()))
    if not np.allclose(c, mirrored, rtol=0.0, atol=1e-10 * scale):
        raise ValueError("coefficients are not conjugate symmetric")
    return Field(s.grid, np.fft.ifftn(c * s.grid.size).real)


def spectral_derivative(f: Field, axis: int) -> Field:
    """First derivative along ``axis``; Nyquist mode dropped."""
    if not 0 <= axis < f.grid.d:
        raise ValueError(f"axis {axis} out of range for d={f.grid.d}")
    ik = f.grid.rfft_deriv_multipliers[axis]
    out = np.fft.irfftn(
        ik * np.fft.rfftn(f.values), s=f.grid.shape, axes=tuple(range(f.grid.d))
    )
    return Field(f.grid, out)


def hs_norm(f: Field, s: float) -> float:
    """Sobolev norm of index ``s``; reduces to the L2 norm at ``s = 0``."""
    if s < 0:
        raise ValueError("norm index must be nonnegative")
    c = np.fft.fftn(f.values) / f.grid.size
    weight = (1.0 + f.grid.k_squared) ** s
    total = np.sum(weight * (c.real**2 + c.imag**2)) * f.grid.volume
    return float(np.sqrt(total))


def field_stats(f: Field) -> FieldStats:
    lo = float(f.values.min())
    hi = float(f.values.max())
    inv_sup = np.inf if lo <= 0.0 else 1.0 / lo
    return FieldStats(min=lo, max=hi, inv_sup=inv_sup)


def write_snapshot(f: Field, path) -> None:
    """Write the binary snapshot layout: magic, version, d, shape, lengths, data."""
    g = f.grid
    header = struct.pack("<8s8xII", SNAPSHOT_MAGIC, SNAPSHOT_VERSION, g.d)
    header += struct.pack(f"<{g.d}Q", *g.n_points)
    header += struct.pack(f"<{g.d}d", *g.lengths)
    data = np.ascontiguousarray(f.values, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data)


def read_snapshot(path) -> Field:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 24:
        raise SnapshotFormatError("snapshot shorter than fixed header")
    magic, pad, version, d = raw[:8], raw[8:16], *struct.unpack("<II", raw[16:24])
    if magic != SNAPSHOT_MAGIC or pad != b"\x00" * 8:
        raise SnapshotFormatError("bad magic bytes")
    if version != SNAPSHOT_VERSION:
        raise SnapshotFormatError(f"unsupported snapshot version {version}")
    if d < 1 or len(raw) < 24 + 16 * d:
        raise SnapshotFormatError("truncated snapshot header")
    off = 24
    n_points = struct.unpack(f"<{d}Q", raw[off : off + 8 * d])
    off += 8 * d
    lengths = struct.unpack(f"<{d}d", raw[off : off + 8 * d])
    off += 8 * d
    grid = TorusGrid(tuple(int(n) for n in n_points), lengths)
    expected = grid.size * 8
    if len(raw) - off != expected:
        raise SnapshotFormatError(
            f"payload holds {len(raw) - off} bytes, expected {expected}"
        )
    values = np.frombuffer(raw, dtype="<f8", offset=off).reshape(grid.shape)
    return Field(grid, values.astype(np.float64))
