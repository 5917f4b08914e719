"""Littlewood-Paley blocks, frequency sparseness, Bernstein and Besov checks.

The low-pass multiplier chi is radial, equal to 1 for |xi| <= 3/4 and to 0
for |xi| >= 4/3, with the transition built from the exp(-1/x) smooth step.
The block multiplier phi(xi) = chi(xi/2) - chi(xi) is supported in the
annulus 3/4 <= |xi| <= 8/3, and the dilates phi(xi/2^j) telescope to one.
Low-pass at a real level J uses chi(xi/2^J) directly.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateInputError, InputError, RangeError
from .spectral_core import Field, Grid, apply_multiplier, format_exponent, lp_norm, parse_exponent

C1 = 3.0 / 4.0
C2 = 8.0 / 3.0
_CHI_OUT = 4.0 / 3.0


class TruncationWarning(UserWarning):
    """A dyadic supremum is attained at the edge of the resolvable range."""


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        y = 1.0 - x
        b = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
    return a / (a + b)


def chi(r):
    """Radial low-pass profile as a function of |xi|."""
    r = np.asarray(r, dtype=np.float64)
    return smooth_step((_CHI_OUT - r) / (_CHI_OUT - C1))


def phi(r):
    """Radial block profile, supported in [3/4, 8/3]."""
    r = np.asarray(r, dtype=np.float64)
    return chi(0.5 * r) - chi(r)


@lru_cache(maxsize=128)
def _low_multiplier(grid: Grid, J: float) -> np.ndarray:
    m = chi(grid.xi_norm * 2.0 ** (-J))
    m.setflags(write=False)
    return m


@lru_cache(maxsize=128)
def _block_multiplier(grid: Grid, j: float) -> np.ndarray:
    m = phi(grid.xi_norm * 2.0 ** (-j))
    m.setflags(write=False)
    return m


def _floor_log2(x: float) -> int:
    j = math.floor(math.log2(x))
    if 2.0 ** (j + 1) <= x * (1 + 1e-12):
        j += 1
    return j


@dataclass(frozen=True)
class DyadicDecomposition:
    """Littlewood-Paley family on one grid.

    ``j_min``: lowest block; low_pass(., j_min) keeps only the mean.
    ``j_max``: highest block whose centre frequency 2^j stays below pi/h.
    ``j_top``: highest block needed for the blocks plus the mean to
    reconstruct every grid frequency.
    """

    grid: Grid

    @property
    def j_min(self) -> int:
        return _floor_log2(2.0 * math.pi / self.grid.L / _CHI_OUT)

    @property
    def j_max(self) -> int:
        return _floor_log2(math.pi / self.grid.h)

    @property
    def j_top(self) -> int:
        kmax = math.sqrt(self.grid.d) * math.pi / self.grid.h
        return math.ceil(math.log2(kmax / (2.0 * C1)) - 1e-12)

    def levels(self) -> range:
        return range(self.j_min, self.j_top + 1)

    def resolvable_levels(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def _check_block(self, j) -> None:
        if not self.j_min <= j <= self.j_top:
            raise RangeError(f"block level {j} outside [{self.j_min}, {self.j_top}]")

    def _check_low(self, J) -> None:
        if not self.j_min <= J <= self.j_top + 1:
            raise RangeError(
                f"low-pass level {J} outside [{self.j_min}, {self.j_top + 1}]"
            )

    def block_multiplier(self, j) -> np.ndarray:
        self._check_block(j)
        return _block_multiplier(self.grid, float(j))

    def low_multiplier(self, J) -> np.ndarray:
        self._check_low(J)
        return _low_multiplier(self.grid, float(J))

    def block(self, u: Field, j) -> Field:
        return apply_multiplier(u, self.block_multiplier(j))

    def low_pass(self, u: Field, J) -> Field:
        """Delta_{<J} u; the mean always belongs to the low-pass part."""
        return apply_multiplier(u, self.low_multiplier(J))

    def high_pass(self, u: Field, J) -> Field:
        return apply_multiplier(u, 1.0 - self.low_multiplier(J))

    def partition_residual(self) -> float:
        """max |sum_j phi_j + chi_{j_min} - 1| over the grid."""
        total = self.low_multiplier(self.j_min).copy()
        for j in self.levels():
            total = total + self.block_multiplier(j)
        return float(np.abs(total - 1.0).max())


def block(u: Field, j) -> Field:
    return DyadicDecomposition(u.grid).block(u, j)


def low_pass(u: Field, J) -> Field:
    return DyadicDecomposition(u.grid).low_pass(u, J)


def high_pass(u: Field, J) -> Field:
    return DyadicDecomposition(u.grid).high_pass(u, J)


@dataclass(frozen=True)
class FrequencySparsenessParams:
    beta: float
    J: float

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise InputError(f"beta must lie in (0, 1), got {self.beta}")


@dataclass(frozen=True)
class FrequencyCertificate:
    params: FrequencySparsenessParams
    p: float
    ratio: float

    @property
    def verdict(self) -> bool:
        return self.ratio <= self.params.beta

    def to_dict(self) -> dict:
        return {
            "beta": self.params.beta,
            "J": self.params.J,
            "p": format_exponent(self.p),
            "ratio": self.ratio,
            "verdict": "pass" if self.verdict else "fail",
        }


def low_pass_ratio(u: Field, J, p) -> float:
    total = lp_norm(u, p)
    if total == 0.0:
        raise DegenerateInputError("frequency sparseness undefined for the zero field")
    return lp_norm(low_pass(u, J), p) / total


def certify_frequency(u: Field, params: FrequencySparsenessParams, p) -> FrequencyCertificate:
    """Measure ||Delta_{<J} u||_p / ||u||_p against beta."""
    p = parse_exponent(p)
    return FrequencyCertificate(params, p, low_pass_ratio(u, params.J, p))


def bernstein_ratio(u: Field, J, p) -> float:
    """||Delta_{<=J} u||_p / (2^{J d (1/2 - 1/p)} ||u||_2), with Delta_{<=J} = Delta_{<J+1}."""
    p = parse_exponent(p)
    if p < 2.0:
        raise InputError(f"Bernstein ratio needs p >= 2, got {p}")
    n2 = lp_norm(u, 2)
    if n2 == 0.0:
        raise DegenerateInputError("Bernstein ratio undefined for the zero field")
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    scale = 2.0 ** (J * u.grid.d * (0.5 - inv_p))
    return lp_norm(low_pass(u, J + 1), p) / (scale * n2)


@dataclass(frozen=True)
class BesovProfile:
    levels: tuple[int, ...]
    #: 2^-j ||Delta_j u||_inf per level
    weighted: tuple[float, ...]
    l2: tuple[float, ...]
    linf: tuple[float, ...]

    @property
    def norm(self) -> float:
        return max(self.weighted) if self.weighted else 0.0

    @property
    def argmax(self) -> int:
        return self.levels[int(np.argmax(self.weighted))]

    @property
    def truncated(self) -> bool:
        return self.norm > 0 and self.argmax in (self.levels[0], self.levels[-1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "l2", "linf"])
        for j, a, b in zip(self.levels, self.l2, self.linf):
            w.writerow([j, repr(a), repr(b)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "norm": self.norm,
            "argmax_level": self.argmax if self.norm > 0 else None,
            "truncated": self.truncated,
            "levels": list(self.levels),
            "weighted": list(self.weighted),
        }


def besov_profile(u: Field) -> BesovProfile:
    dec = DyadicDecomposition(u.grid)
    levels = tuple(dec.resolvable_levels())
    w, l2, linf = [], [], []
    for j in levels:
        b = dec.block(u, j)
        sup = lp_norm(b, math.inf)
        linf.append(sup)
        l2.append(lp_norm(b, 2))
        w.append(2.0 ** (-j) * sup)
    return BesovProfile(levels, tuple(w), tuple(l2), tuple(linf))


def besov_norm(u: Field) -> float:
    """Homogeneous B^{-1}_{inf,inf} norm over the resolvable levels."""
    prof = besov_profile(u)
    if prof.truncated:
        warnings.warn(
            f"Besov supremum attained at edge level {prof.argmax}; "
            "the value is dominated by grid truncation",
            TruncationWarning,
            stacklevel=2,
        )
    return prof.norm


def block_energy_csv(u: Field) -> str:
    """CSV with columns j, ||Delta_j u||_2, ||Delta_j u||_inf over all blocks."""
    dec = DyadicDecomposition(u.grid)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["j", "l2", "linf"])
    for j in dec.levels():
        b = dec.block(u, j)
        w.writerow([j, repr(lp_norm(b, 2)), repr(lp_norm(b, math.inf))])
    return buf.getvalue()


def spatial_implies_frequency_check(u: Field, gamma: float, J: float, p, **kwargs):
    """Check that spatial sparseness at scale ell_bar 2^-J forces (gamma, J) frequency sparseness.

    Thin wrapper over :func:`sparsens.semigroup.spatial_implies_frequency_check`,
    where the decay-lemma requirements it reuses are defined.
    """
    from .semigroup import spatial_implies_frequency_check as check

    return check(u, gamma, J, p, **kwargs)
