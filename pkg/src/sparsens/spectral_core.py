"""Periodic grids, fields and the Fourier machinery everything else runs on.

The whole space R^d is modelled by a periodic box [-L/2, L/2)^d sampled at
``n`` points per axis. Fields store real samples with a leading component
axis, so a scalar field has shape ``(1, n, ..., n)`` and a vector field
``(d, n, ..., n)``. Fourier coefficients follow the unnormalised ``fftn``
convention; physical frequencies are ``xi = 2*pi*kappa/L``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np
import scipy.fft

from .errors import InputError

#: Upper bound on n**d accepted by :class:`Grid`.
MAX_POINTS = 2**24

_WORKERS = 1


def set_threads(n: int) -> None:
    """Set the number of worker threads used by the FFTs."""
    global _WORKERS
    _WORKERS = max(1, int(n))


def parse_exponent(p) -> float:
    """Accept ``p`` as a number or the strings ``"inf"``/``"infinity"``."""
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "∞"):
            return math.inf
        p = float(p)
    p = float(p)
    if math.isnan(p) or p < 1:
        raise InputError(f"Lebesgue exponent must lie in [1, inf], got {p}")
    return p


def format_exponent(p: float) -> str:
    return "inf" if math.isinf(p) else f"{p:g}"


@dataclass(frozen=True)
class Grid:
    d: int
    n: int
    L: float

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise InputError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.n < 8 or self.n & (self.n - 1):
            raise InputError(f"n must be a power of two >= 8, got {self.n}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise InputError(f"box side must be positive, got {self.L}")
        if self.n**self.d > MAX_POINTS:
            raise InputError(
                f"grid with {self.n}^{self.d} points exceeds the budget of {MAX_POINTS}"
            )
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def volume(self) -> float:
        return self.L**self.d

    def coords(self) -> np.ndarray:
        """1D sample positions, ``-L/2 + i*h``."""
        return -0.5 * self.L + self.h * np.arange(self.n)

    def mesh(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis."""
        x = self.coords()
        return [x.reshape(self._axis_shape(a)) for a in range(self.d)]

    def _axis_shape(self, axis: int) -> tuple[int, ...]:
        s = [1] * self.d
        s[axis] = self.n
        return tuple(s)

    @cached_property
    def kappa(self) -> np.ndarray:
        """Integer wavenumbers along one axis in fft order."""
        return np.rint(np.fft.fftfreq(self.n) * self.n).astype(np.int64)

    def xi(self, axis: int, *, derivative: bool = False) -> np.ndarray:
        """Physical frequency along ``axis``, broadcastable to the grid.

        With ``derivative=True`` the Nyquist entry is zeroed, which keeps odd
        derivatives real-valued.
        """
        k = 2.0 * np.pi * self.kappa / self.L
        if derivative:
            k = k.copy()
            k[self.n // 2] = 0.0
        return k.reshape(self._axis_shape(axis))

    @cached_property
    def xi_squared(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for a in range(self.d):
            out = out + self.xi(a) ** 2
        return out

    @cached_property
    def xi_norm(self) -> np.ndarray:
        return np.sqrt(self.xi_squared)

    @cached_property
    def kappa_max(self) -> np.ndarray:
        """max_a |kappa_a| at each mode; used for 2/3 dealiasing."""
        out = np.zeros(self.shape, dtype=np.int64)
        for a in range(self.d):
            out = np.maximum(out, np.abs(self.kappa).reshape(self._axis_shape(a)))
        return out

    @cached_property
    def displacement_norm(self) -> np.ndarray:
        """Minimum-image length of the lattice displacement stored at each index.

        Index 0 is the zero displacement, matching circular convolution.
        """
        k = self.kappa * self.h
        out = np.zeros(self.shape)
        for a in range(self.d):
            out = out + (k.reshape(self._axis_shape(a))) ** 2
        return np.sqrt(out)

    def to_dict(self) -> dict:
        return {"d": self.d, "n": self.n, "L": self.L}


class Field:
    """Real samples on a grid; immutable after construction."""

    __slots__ = ("grid", "values", "flags")

    def __init__(self, grid: Grid, values, flags=()):
        arr = np.array(values, dtype=np.float64)
        if arr.shape == grid.shape:
            arr = arr[np.newaxis]
        if arr.ndim != grid.d + 1 or arr.shape[1:] != grid.shape:
            raise InputError(
                f"values of shape {arr.shape} do not fit grid {grid.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise InputError("field contains non-finite values")
        arr.setflags(write=False)
        self.grid = grid
        self.values = arr
        self.flags = frozenset(flags)

    @classmethod
    def zeros(cls, grid: Grid, m: int = 1) -> Field:
        return cls(grid, np.zeros((m,) + grid.shape))

    @classmethod
    def from_function(cls, grid: Grid, func) -> Field:
        """Sample ``func(*mesh)``; it may return one array or a sequence."""
        out = func(*grid.mesh())
        if isinstance(out, (list, tuple)):
            out = np.stack([np.broadcast_to(c, grid.shape) for c in out])
        else:
            out = np.broadcast_to(out, grid.shape)
        return cls(grid, out)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean magnitude over components."""
        if self.m == 1:
            return np.abs(self.values[0])
        return np.sqrt(np.sum(self.values**2, axis=0))

    def component(self, i: int) -> Field:
        return Field(self.grid, self.values[i : i + 1])

    def with_values(self, values, flags=()) -> Field:
        return Field(self.grid, values, flags)

    def shifted(self, shift: tuple[int, ...]) -> Field:
        """Circular translation by a lattice vector."""
        return Field(
            self.grid, np.roll(self.values, shift, axis=tuple(range(1, self.grid.d + 1)))
        )

    def __add__(self, other: Field) -> Field:
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: Field) -> Field:
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> Field:
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> Field:
        return Field(self.grid, -self.values)

    def __repr__(self) -> str:
        return f"Field(grid={self.grid}, m={self.m})"


@dataclass(frozen=True)
class SpectralField:
    grid: Grid
    coeffs: np.ndarray = dc_field(repr=False)

    @property
    def m(self) -> int:
        return self.coeffs.shape[0]

    def l2_norm(self) -> float:
        """L2 norm of the inverse transform via Parseval."""
        g = self.grid
        return math.sqrt(g.cell_volume / g.size * float(np.sum(np.abs(self.coeffs) ** 2)))

    def multiply(self, multiplier) -> SpectralField:
        return SpectralField(self.grid, self.coeffs * multiplier)


def _axes(grid: Grid) -> tuple[int, ...]:
    return tuple(range(1, grid.d + 1))


def transform(f: Field) -> SpectralField:
    coeffs = scipy.fft.fftn(f.values, axes=_axes(f.grid), workers=_WORKERS)
    return SpectralField(f.grid, coeffs)


def inverse(F: SpectralField) -> Field:
    vals = scipy.fft.ifftn(F.coeffs, axes=_axes(F.grid), workers=_WORKERS).real
    return Field(F.grid, vals)


def apply_multiplier(f: Field, multiplier) -> Field:
    """Apply a real, even Fourier multiplier to every component."""
    return inverse(transform(f).multiply(multiplier))


def lp_norm(f: Field, p=2.0) -> float:
    """Riemann-sum L^p norm; vector fields use the pointwise Euclidean magnitude."""
    p = parse_exponent(p)
    a = f.magnitude()
    if math.isinf(p):
        return float(a.max())
    top = float(a.max())
    if top == 0.0:
        return 0.0
    # scale out the max to keep large p from overflowing
    s = float(np.sum((a / top) ** p)) * f.grid.cell_volume
    return top * s ** (1.0 / p)


def lp_norm_on(f: Field, mask: np.ndarray, p=2.0) -> float:
    """L^p norm restricted to the samples where ``mask`` is true."""
    p = parse_exponent(p)
    a = f.magnitude()[mask]
    if a.size == 0:
        return 0.0
    top = float(a.max())
    if math.isinf(p) or top == 0.0:
        return top
    return top * (float(np.sum((a / top) ** p)) * f.grid.cell_volume) ** (1.0 / p)


def inner(f: Field, g: Field) -> float:
    """Discrete L2 inner product."""
    return float(np.sum(f.values * g.values)) * f.grid.cell_volume


def derivative_symbol(grid: Grid, multi_index) -> np.ndarray:
    """Fourier symbol prod_a (i xi_a)^{alpha_a}."""
    if len(multi_index) != grid.d or any(int(a) < 0 for a in multi_index):
        raise InputError(f"multi-index {multi_index} invalid for d={grid.d}")
    sym = np.ones(grid.shape, dtype=complex)
    for a, order in enumerate(multi_index):
        order = int(order)
        if order:
            sym = sym * (1j * grid.xi(a, derivative=order % 2 == 1)) ** order
    return sym


def spectral_derivative(f: Field, multi_index, tol: float = 1e-6) -> Field:
    """Differentiate every component of ``f`` by multiplication with (i xi)^alpha.

    The result carries the flag ``"nyquist_amplified"`` when more than ``tol``
    of its L2 norm sits in the outer third of the band, i.e. the grid is too
    coarse for the requested order.
    """
    F = transform(f)
    sym = derivative_symbol(f.grid, multi_index)
    D = F.coeffs * sym
    flags = ()
    total = float(np.sum(np.abs(D) ** 2))
    if total > 0.0:
        outer = f.grid.kappa_max > f.grid.n // 3
        frac = math.sqrt(float(np.sum(np.abs(D[:, outer]) ** 2)) / total)
        if frac > tol:
            flags = ("nyquist_amplified",)
    vals = scipy.fft.ifftn(D, axes=_axes(f.grid), workers=_WORKERS).real
    return Field(f.grid, vals, flags)


def multi_indices(d: int, k: int) -> list[tuple[int, ...]]:
    """Ordered index sequences of length k, as multi-indices (d**k of them)."""
    out = []
    for seq in itertools.product(range(d), repeat=k):
        alpha = [0] * d
        for a in seq:
            alpha[a] += 1
        out.append(tuple(alpha))
    return out


def derivative_tensor(f: Field, k: int) -> Field:
    """All k-th partial derivatives of all components stacked as components.

    The pointwise Euclidean magnitude of the result is the Frobenius norm
    |nabla^k f|.
    """
    if k == 0:
        return f
    F = transform(f)
    g = f.grid
    parts = []
    cache: dict[tuple[int, ...], np.ndarray] = {}
    for alpha in multi_indices(g.d, k):
        if alpha not in cache:
            D = F.coeffs * derivative_symbol(g, alpha)
            cache[alpha] = scipy.fft.ifftn(D, axes=_axes(g), workers=_WORKERS).real
        parts.append(cache[alpha])
    return Field(g, np.concatenate(parts, axis=0))


def gradient(phi: Field) -> Field:
    """Gradient of a scalar field."""
    if phi.m != 1:
        raise InputError("gradient expects a scalar field")
    return derivative_tensor(phi, 1)


def divergence(u: Field) -> Field:
    g = u.grid
    if u.m != g.d:
        raise InputError("divergence expects a d-component field")
    F = transform(u)
    D = sum(1j * g.xi(a, derivative=True) * F.coeffs[a] for a in range(g.d))
    return inverse(SpectralField(g, D[np.newaxis]))


def curl(u: Field) -> Field:
    """Vorticity: scalar in 2D, vector in 3D."""
    g = u.grid
    if g.d not in (2, 3) or u.m != g.d:
        raise InputError("curl needs a vector field in 2 or 3 dimensions")
    F = transform(u).coeffs
    ik = [1j * g.xi(a, derivative=True) for a in range(g.d)]
    if g.d == 2:
        W = (ik[0] * F[1] - ik[1] * F[0])[np.newaxis]
    else:
        W = np.stack(
            [
                ik[1] * F[2] - ik[2] * F[1],
                ik[2] * F[0] - ik[0] * F[2],
                ik[0] * F[1] - ik[1] * F[0],
            ]
        )
    return inverse(SpectralField(g, W))


def leray_symbol_apply(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """(I - xi xi^T/|xi|^2) applied to Fourier coefficients of a vector field.

    Uses Nyquist-zeroed frequencies so the projection is consistent with
    :func:`divergence`; modes with vanishing frequency pass unchanged.
    """
    xs = [grid.xi(a, derivative=True) for a in range(grid.d)]
    k2 = sum(x**2 for x in xs)
    k2 = np.broadcast_to(k2, grid.shape)
    safe = np.where(k2 > 0, k2, 1.0)
    dot = sum(xs[a] * coeffs[a] for a in range(grid.d)) / safe
    return np.stack([coeffs[a] - xs[a] * dot for a in range(grid.d)])


def leray_project(u: Field) -> Field:
    """Project a vector field onto divergence-free fields; the mean is kept."""
    g = u.grid
    if u.m != g.d:
        raise InputError(f"Leray projection needs {g.d} components, got {u.m}")
    F = transform(u)
    return inverse(SpectralField(g, leray_symbol_apply(g, F.coeffs)))
