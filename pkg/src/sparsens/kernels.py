"""Radial convolution kernels G with their norms and tail functions.

A kernel is described by its radial Fourier multiplier G^(rho) when one is
known in closed form, and by tabulated radial data otherwise. The tail
``||G||_{L^1(B_r^c)}`` is stored on a radius grid and interpolated
monotonically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import gamma as gamma_fn, gammaincc, jv

from .errors import InputError
from .frequency import chi

KINDS = ("heat", "lowpass", "custom")


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2) / gamma_fn(d / 2)


def ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / gamma_fn(d / 2 + 1)


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    d: int
    l1: float
    linf: float
    #: radii and ||G||_{L^1(B_r^c)} at those radii (nonincreasing)
    tail_radii: tuple[float, ...]
    tail_values: tuple[float, ...]
    #: radial Fourier multiplier, when the kernel has one in closed form
    multiplier: Callable | None = None
    #: radial physical profile, used to sample custom kernels
    profile: Callable | None = None
    #: integral of G; the discrete kernel mass is renormalised to it
    mass: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"kernel kind must be one of {KINDS}, got {self.kind!r}")
        if not math.isfinite(self.l1) or self.l1 <= 0:
            raise InputError("kernel L1 norm must be positive and finite")
        if np.any(np.diff(self.tail_values) > 1e-12 * self.l1):
            raise InputError("tabulated kernel tail must be nonincreasing")

    def tail(self, r: float) -> float:
        """||G||_{L^1(B_r^c)}, exact for the heat kernel, interpolated otherwise."""
        if self.kind == "heat":
            return float(gammaincc(self.d / 2, r * r / 4.0))
        radii = np.asarray(self.tail_radii)
        vals = np.asarray(self.tail_values)
        if r >= radii[-1]:
            return float(vals[-1])
        return float(np.interp(r, radii, vals))

    def radius_for_tail(self, level: float) -> float:
        """Smallest tabulated radius whose tail is at most ``level``."""
        if self.kind == "heat":
            from scipy.special import gammainccinv

            return 2.0 * math.sqrt(float(gammainccinv(self.d / 2, level)))
        vals = np.asarray(self.tail_values)
        idx = np.nonzero(vals <= level)[0]
        if idx.size == 0:
            raise InputError(
                f"kernel tail never drops below {level:g} on the tabulated range"
            )
        return float(self.tail_radii[idx[0]])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "d": self.d, "l1": self.l1, "linf": self.linf}


def heat_kernel(d: int) -> KernelSpec:
    """G = (4 pi)^{-d/2} exp(-|x|^2/4)."""
    radii = tuple(np.linspace(0.0, 40.0, 401))
    tails = tuple(float(gammaincc(d / 2, r * r / 4.0)) for r in radii)
    return KernelSpec(
        "heat",
        d,
        1.0,
        (4.0 * math.pi) ** (-d / 2),
        radii,
        tails,
        multiplier=lambda rho: np.exp(-rho * rho),
        mass=1.0,
    )


def radial_inverse_transform(
    multiplier: Callable,
    d: int,
    support: float,
    radii: np.ndarray,
    nodes: int = 300,
) -> np.ndarray:
    """Inverse Fourier transform of a radial multiplier supported in [0, support].

    G(r) = (2 pi)^{-d/2} r^{1-d/2} int m(rho) J_{d/2-1}(rho r) rho^{d/2} drho.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    rho = 0.5 * support * (x + 1.0)
    w = 0.5 * support * w
    m = multiplier(rho)
    nu = d / 2 - 1
    out = np.empty(radii.shape)
    zero = radii == 0
    out[zero] = (2 * math.pi) ** (-d) * sphere_area(d) * np.sum(w * m * rho ** (d - 1))
    r = radii[~zero]
    for lo in range(0, r.size, 512):
        rr = r[lo : lo + 512]
        vals = jv(nu, np.outer(rr, rho)) * (w * m * rho ** (d / 2))
        out[np.nonzero(~zero)[0][lo : lo + 512]] = (
            (2 * math.pi) ** (-d / 2) * rr ** (-nu) * vals.sum(axis=1)
        )
    return out


def _tabulate(profile_values: np.ndarray, radii: np.ndarray, d: int):
    dens = np.abs(profile_values) * sphere_area(d) * radii ** (d - 1)
    cum = cumulative_trapezoid(dens, radii, initial=0.0)
    l1 = float(cum[-1])
    tail = np.maximum(l1 - cum, 0.0)
    tail = np.minimum.accumulate(tail)
    mass = float(
        cumulative_trapezoid(profile_values * sphere_area(d) * radii ** (d - 1), radii)[-1]
    )
    return l1, tail, mass


def lowpass_table(d: int, r_max: float = 150.0, dr: float = 0.05) -> dict:
    """Norms and tail of the kernel whose multiplier is chi(|xi|)."""
    radii = np.arange(0.0, r_max + 0.5 * dr, dr)
    g = radial_inverse_transform(chi, d, 4.0 / 3.0, radii)
    l1, tail, _ = _tabulate(g, radii, d)
    stride = max(1, int(round(0.5 / dr)))
    return {
        "l1": l1,
        "linf": float(np.abs(g).max()),
        "tail_radii": [float(r) for r in radii[::stride]],
        "tail_values": [float(t) for t in tail[::stride]],
    }


def lowpass_kernel(d: int, table: dict | None = None) -> KernelSpec:
    """Kernel of the low-pass operator: G^ = chi, so G_t = Delta_{<J} when sqrt(t) = 2^-J."""
    if table is None:
        from .registry import load_registry

        table = load_registry().kernel_table("lowpass", d)
    return KernelSpec(
        "lowpass",
        d,
        float(table["l1"]),
        float(table["linf"]),
        tuple(table["tail_radii"]),
        tuple(table["tail_values"]),
        multiplier=chi,
        mass=1.0,
    )


def custom_kernel(
    d: int, profile: Callable, r_max: float = 60.0, samples: int = 12001
) -> KernelSpec:
    """Kernel from a radial physical profile G(r), tabulated by radial quadrature."""
    radii = np.linspace(0.0, r_max, samples)
    g = np.asarray(profile(radii), dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise InputError("kernel profile must be finite")
    l1, tail, mass = _tabulate(g, radii, d)
    if tail[-1] > 1e-6 * l1:
        raise InputError(f"kernel profile has not decayed by r = {r_max:g}")
    return KernelSpec(
        "custom",
        d,
        l1,
        float(np.abs(g).max()),
        tuple(float(r) for r in radii[::20]),
        tuple(float(t) for t in tail[::20]),
        profile=profile,
        mass=mass,
    )
