"""Field factories used by the experiments, the calibration corpus and the tests."""

from __future__ import annotations

import math

import numpy as np

from .errors import InputError
from .frequency import chi
from .spectral_core import Field, Grid, apply_multiplier, leray_project


def _radius2(grid: Grid, center=None) -> np.ndarray:
    center = np.zeros(grid.d) if center is None else np.asarray(center, dtype=float)
    r2 = 0.0
    for a, x in enumerate(grid.mesh()):
        dx = x - center[a]
        # periodic minimum image
        dx = dx - grid.L * np.round(dx / grid.L)
        r2 = r2 + dx * dx
    return np.broadcast_to(r2, grid.shape)


def gaussian_bump(grid: Grid, sigma: float, center=None, amplitude: float = 1.0) -> Field:
    """amplitude * exp(-|x - center|^2 / (2 sigma^2)), wrapped periodically."""
    return Field(grid, amplitude * np.exp(-_radius2(grid, center) / (2 * sigma**2)))


def indicator(
    grid: Grid, width: float, center=None, background: float = 0.0, height: float = 1.0
) -> Field:
    """background + height * 1_{|x - center| < width/2} (an interval when d = 1)."""
    inside = _radius2(grid, center) < (0.5 * width) ** 2
    return Field(grid, background + height * inside.astype(np.float64))


def indicator_example(grid: Grid, eps: float = 0.1) -> Field:
    """1/2 + 1/2 * 1_{(-eps/2, eps/2)}: sparse at unit scale, supremum one."""
    return indicator(grid, eps, background=0.5, height=0.5)


def plane_wave(grid: Grid, kappa, amplitude: float = 1.0, phase: float = 0.0) -> Field:
    """amplitude * cos(2 pi kappa.x / L + phase) for an integer wavevector."""
    kappa = tuple(int(k) for k in kappa)
    if len(kappa) != grid.d:
        raise InputError(f"wavevector {kappa} has the wrong length for d={grid.d}")
    arg = phase
    for k, x in zip(kappa, grid.mesh()):
        arg = arg + 2 * math.pi * k * x / grid.L
    return Field(grid, amplitude * np.broadcast_to(np.cos(arg), grid.shape))


def white_noise(grid: Grid, rng: np.random.Generator, m: int = 1) -> Field:
    return Field(grid, rng.standard_normal((m,) + grid.shape))


def band_pass_noise(
    grid: Grid, rng: np.random.Generator, lo: float, hi: float = math.inf, m: int = 1
) -> Field:
    """Noise whose spectrum lives in lo <= |xi| <= hi (smoothly cut below lo)."""
    u = white_noise(grid, rng, m)
    mult = 1.0 - chi(grid.xi_norm / (lo / 0.75))
    if math.isfinite(hi):
        mult = mult * chi(grid.xi_norm / (hi / (4.0 / 3.0)))
    return apply_multiplier(u, mult)


def bump_array(
    grid: Grid,
    sigma: float,
    count: int,
    rng: np.random.Generator,
    signed: bool = False,
) -> Field:
    """Sum of ``count`` Gaussian bumps at random centres with random weights."""
    vals = np.zeros(grid.shape)
    for _ in range(count):
        c = rng.uniform(-0.5 * grid.L, 0.5 * grid.L, grid.d)
        w = rng.uniform(0.5, 1.0) * (rng.choice([-1.0, 1.0]) if signed else 1.0)
        vals = vals + w * np.exp(-_radius2(grid, c) / (2 * sigma**2))
    return Field(grid, vals)


def taylor_green(grid: Grid, amplitude: float = 1.0) -> Field:
    """(sin x cos y, -cos x sin y) rescaled to the box, d = 2."""
    if grid.d != 2:
        raise InputError("the Taylor-Green field is two-dimensional")
    k = 2 * math.pi / grid.L
    x, y = grid.mesh()
    u = np.sin(k * x) * np.cos(k * y)
    v = -np.cos(k * x) * np.sin(k * y)
    return Field(grid, amplitude * np.stack([u, v]))


def perp_gradient_flow(grid: Grid, psi: np.ndarray) -> Field:
    """Divergence-free field (-d_y psi, d_x psi) from a 2D streamfunction, spectrally."""
    if grid.d != 2:
        raise InputError("streamfunction flows are two-dimensional")
    F = np.fft.fftn(psi)
    dx = np.fft.ifftn(1j * grid.xi(0, derivative=True) * F).real
    dy = np.fft.ifftn(1j * grid.xi(1, derivative=True) * F).real
    return Field(grid, np.stack([-dy, dx]))


def vortex_dipole(
    grid: Grid, width: float, separation: float, amplitude: float = 1.0
) -> Field:
    """Two counter-rotating Gaussian vortices, normalised to sup|u| = amplitude."""
    a = np.array([0.5 * separation, 0.0])
    psi = np.exp(-_radius2(grid, a) / (2 * width**2)) - np.exp(
        -_radius2(grid, -a) / (2 * width**2)
    )
    u = perp_gradient_flow(grid, psi)
    return u * (amplitude / float(u.magnitude().max()))


def random_solenoidal(
    grid: Grid, rng: np.random.Generator, k_max: float, amplitude: float = 1.0
) -> Field:
    """Smooth random divergence-free field with |xi| <= k_max, sup|u| = amplitude."""
    u = white_noise(grid, rng, grid.d)
    u = leray_project(apply_multiplier(u, chi(grid.xi_norm / (0.75 * k_max))))
    return u * (amplitude / float(u.magnitude().max()))
