"""Physical-space sparseness: witness sets, local volume fractions, certificates.

A field u is (eps, beta, ell)-sparse in L^p when some set S carries all but a
beta-fraction of its L^p norm while filling at most an eps-fraction of every
ball of radius ell. The certificates here use the canonical witness
S = {|u| > lambda}; a pass proves sparseness, a fail proves nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.fft

from .errors import DegenerateInputError, DomainError, InputError, ResolutionError
from .spectral_core import (
    Field,
    Grid,
    derivative_tensor,
    format_exponent,
    lp_norm,
    lp_norm_on,
    parse_exponent,
)

BISECTION_STEPS = 40


@dataclass(frozen=True)
class SparsenessParams:
    """Sparseness parameters; ``ell`` is a physical radius."""

    epsilon: float
    beta: float
    ell: float
    p: float = math.inf

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise InputError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0.0 < self.beta < 1.0:
            raise InputError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.ell > 0.0:
            raise InputError(f"ell must be positive, got {self.ell}")
        object.__setattr__(self, "p", parse_exponent(self.p))

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "beta": self.beta,
            "ell": self.ell,
            "p": format_exponent(self.p),
        }


@dataclass(frozen=True)
class SparsenessCertificate:
    params: SparsenessParams
    grid: Grid
    threshold: float
    measured_beta: float
    measured_epsilon: float
    mask: np.ndarray = dc_field(repr=False, compare=False)

    @property
    def verdict(self) -> bool:
        return (
            self.measured_beta <= self.params.beta
            and self.measured_epsilon <= self.params.epsilon
        )

    def mask_field(self) -> Field:
        return Field(self.grid, self.mask.astype(np.float64))

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "grid": self.grid.to_dict(),
            "threshold": self.threshold,
            "measured_beta": self.measured_beta,
            "measured_epsilon": self.measured_epsilon,
            "witness_volume": float(self.mask.sum()) * self.grid.cell_volume,
            "verdict": "pass" if self.verdict else "fail",
        }


def superlevel_mask(f: Field, lam: float) -> np.ndarray:
    """Boolean mask of the samples where |f| > lam (strict)."""
    if lam < 0:
        raise InputError(f"threshold must be nonnegative, got {lam}")
    return f.magnitude() > lam


def ball_indicator(grid: Grid, ell: float) -> np.ndarray:
    """Lattice ball {y : |y| <= ell} centred at index 0 (circular layout)."""
    return grid.displacement_norm <= ell * (1.0 + 1e-12)


def _check_radius(grid: Grid, ell: float) -> None:
    if ell < 2.0 * grid.h:
        raise ResolutionError(
            f"radius {ell:g} is below two grid spacings ({2 * grid.h:g})"
        )
    if ell > 0.5 * grid.L * (1.0 + 1e-12):
        raise DomainError(f"radius {ell:g} exceeds half the box side {grid.L / 2:g}")


class LocalFraction:
    """Reusable evaluator of sup_x |S cap B_ell(x)| / |B_ell| for one mask."""

    def __init__(self, grid: Grid, mask: np.ndarray):
        self.grid = grid
        self.mask = np.asarray(mask, dtype=bool)
        self.count = int(self.mask.sum())
        self._mask_hat = None

    def counts(self, ell: float) -> tuple[np.ndarray, int]:
        """Lattice counts |S cap B_ell(x)| at every centre and the ball size."""
        _check_radius(self.grid, ell)
        ball = ball_indicator(self.grid, ell)
        size = int(ball.sum())
        if self.count == 0:
            return np.zeros(self.grid.shape), size
        if self._mask_hat is None:
            self._mask_hat = scipy.fft.rfftn(self.mask.astype(np.float64))
        conv = scipy.fft.irfftn(
            self._mask_hat * scipy.fft.rfftn(ball.astype(np.float64)),
            s=self.grid.shape,
        )
        return np.rint(conv), size

    def __call__(self, ell: float) -> float:
        if self.count == 0:
            _check_radius(self.grid, ell)
            return 0.0
        counts, size = self.counts(ell)
        return float(counts.max()) / size


def max_local_fraction(grid: Grid, mask: np.ndarray, ell: float) -> float:
    """Largest fraction of a lattice ball of radius ``ell`` covered by ``mask``."""
    return LocalFraction(grid, mask)(ell)


def tail_fraction(u: Field, lam: float, p) -> float:
    """||u||_{L^p({|u| <= lam})} / ||u||_{L^p}."""
    total = lp_norm(u, p)
    if total == 0.0:
        raise DegenerateInputError("field is identically zero")
    return lp_norm_on(u, u.magnitude() <= lam, p) / total


def witness_threshold(u: Field, beta: float, p) -> float:
    """Largest lambda whose complement {|u| <= lambda} keeps a tail fraction <= beta."""
    top = float(u.magnitude().max())
    if top == 0.0:
        raise DegenerateInputError("cannot bracket a threshold for the zero field")
    lo, hi = 0.0, top
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if tail_fraction(u, mid, p) <= beta:
            lo = mid
        else:
            hi = mid
    return lo


def certify(u: Field, params: SparsenessParams) -> SparsenessCertificate:
    """Sufficient sparseness certificate using a bisected superlevel witness."""
    lam = witness_threshold(u, params.beta, params.p)
    mask = superlevel_mask(u, lam)
    beta_meas = tail_fraction(u, lam, params.p)
    eps_meas = max_local_fraction(u.grid, mask, params.ell)
    return SparsenessCertificate(params, u.grid, lam, beta_meas, eps_meas, mask)


def naive_local_fraction(f: Field, ell: float) -> float:
    """Local fraction of {|f| > ||f||_inf / 2} at scale ell."""
    top = float(f.magnitude().max())
    if top == 0.0:
        raise DegenerateInputError("field is identically zero")
    return max_local_fraction(f.grid, superlevel_mask(f, 0.5 * top), ell)


def mu_exponent(d: int, p) -> float:
    """mu_p with 1/mu_p = d (1/2 - 1/p); requires p > 2."""
    p = parse_exponent(p)
    if p <= 2.0:
        raise InputError(f"the Chebyshev scale needs p > 2, got {p}")
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    return 1.0 / (d * (0.5 - inv_p))


@dataclass(frozen=True)
class ChebyshevScale:
    ell0: float
    mu_p: float
    p: float
    d: int
    l1_scale: float
    superlevel_volume: float

    @property
    def volume_bound(self) -> float:
        return 2.0 * self.l1_scale**self.d

    @property
    def bound_holds(self) -> bool:
        return self.superlevel_volume <= self.volume_bound * (1 + 1e-12)

    def to_dict(self) -> dict:
        return {
            "ell0": self.ell0,
            "mu_p": self.mu_p,
            "p": format_exponent(self.p),
            "l1_scale": self.l1_scale,
            "superlevel_volume": self.superlevel_volume,
            "volume_bound": self.volume_bound,
        }


def chebyshev_scale(u: Field, p) -> ChebyshevScale:
    """Length scale at which the L2 and L^p norms of ``u`` balance."""
    p = parse_exponent(p)
    d = u.grid.d
    mu = mu_exponent(d, p)
    n2, np_ = lp_norm(u, 2), lp_norm(u, p)
    if n2 == 0.0 or np_ == 0.0:
        raise DegenerateInputError("Chebyshev scale undefined for the zero field")
    ninf = lp_norm(u, math.inf)
    l1 = (lp_norm(u, 1) / ninf) ** (1.0 / d)
    vol = float(superlevel_mask(u, 0.5 * ninf).sum()) * u.grid.cell_volume
    return ChebyshevScale((n2 / np_) ** mu, mu, p, d, l1, vol)


@dataclass(frozen=True)
class AprioriCertificate:
    a: int
    b: float
    ell0: float
    certificate: SparsenessCertificate
    #: |S_t| measured by quadrature
    witness_volume: float
    #: ell0^d / b^2
    volume_bound: float
    #: b^(1 - 2/p) ||u||_p, the interpolation bound on ||u||_{L^p(S^c)}
    tail_bound: float
    tail_norm: float

    @property
    def ell(self) -> float:
        return self.a * self.ell0

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "ell0": self.ell0,
            "ell": self.ell,
            "witness_volume": self.witness_volume,
            "volume_bound": self.volume_bound,
            "tail_norm": self.tail_norm,
            "tail_bound": self.tail_bound,
            "certificate": self.certificate.to_dict(),
        }


def apriori_certificate(u: Field, epsilon: float, beta: float, p) -> AprioriCertificate:
    """Certify sparseness at the dyadic multiple a*ell0 of the Chebyshev scale.

    The witness is S = {|u| > b ell0^(-d/p) ||u||_p} with b^(1-2/p) = beta,
    whose volume Chebyshev bounds by ell0^d / b^2.
    """
    p = parse_exponent(p)
    if p <= 2.0:
        raise InputError(f"a priori sparseness needs p in (2, inf], got {p}")
    if not (0 < epsilon < 1 and 0 < beta < 1):
        raise InputError("epsilon and beta must lie in (0, 1)")
    g = u.grid
    cheb = chebyshev_scale(u, p)
    ell0 = cheb.ell0
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    b = beta ** (1.0 / (1.0 - 2.0 * inv_p))
    norm_p = lp_norm(u, p)
    lam = b * ell0 ** (-g.d * inv_p) * norm_p
    mask = superlevel_mask(u, lam)
    tail = lp_norm_on(u, ~mask, p)
    frac = LocalFraction(g, mask)
    a = 1
    while a * ell0 <= 0.5 * g.L:
        if a * ell0 >= 2.0 * g.h and frac(a * ell0) <= epsilon:
            params = SparsenessParams(epsilon, beta, a * ell0, p)
            cert = SparsenessCertificate(
                params, g, lam, tail / norm_p, frac(a * ell0), mask
            )
            return AprioriCertificate(
                a=a,
                b=b,
                ell0=ell0,
                certificate=cert,
                witness_volume=float(mask.sum()) * g.cell_volume,
                volume_bound=ell0**g.d / b**2,
                tail_bound=b ** (1.0 - 2.0 * inv_p) * norm_p,
                tail_norm=tail,
            )
        a *= 2
    raise DomainError(
        f"no dyadic a with a*ell0 <= L/2 certifies eps={epsilon}; enlarge the box"
    )


@dataclass(frozen=True)
class NonSparseScale:
    ell: float
    k: int
    beta: float
    sup_k: float
    sup_k1: float
    #: certificate of nabla^k u at radius ell/2 (None when ell is infinite)
    certificate: SparsenessCertificate | None

    @property
    def fails_at_half(self) -> bool:
        return self.certificate is None or self.certificate.measured_epsilon >= 1.0


def nonsparse_scale(u: Field, k: int, beta: float, epsilon: float = 0.5) -> NonSparseScale:
    """Scale below which nabla^k u cannot be sparse: (1-beta) sup|D^k u| / sup|D^{k+1} u|.

    The certificate at half that radius is returned; around the maximiser
    the field stays above beta * max, so the witness fills a whole ball.
    """
    if not 0 < beta < 1:
        raise InputError("beta must lie in (0, 1)")
    if lp_norm(u, math.inf) == 0.0:
        raise DegenerateInputError("zero field has no sparseness scale")
    dk = derivative_tensor(u, k)
    dk1 = derivative_tensor(u, k + 1)
    mk = lp_norm(dk, math.inf)
    mk1 = lp_norm(dk1, math.inf)
    scale = lp_norm(u, math.inf) * (u.grid.n / u.grid.L) ** k
    if mk <= 1e-12 * scale:
        raise DegenerateInputError(f"derivative of order {k} vanishes identically")
    if mk1 <= 1e-12 * mk * u.grid.n / u.grid.L:
        return NonSparseScale(math.inf, k, beta, mk, mk1, None)
    ell = (1.0 - beta) * mk / mk1
    half = min(0.5 * ell, 0.5 * u.grid.L)
    if half < 2.0 * u.grid.h:
        raise ResolutionError(
            f"non-sparseness scale {ell:g} is not resolved by spacing {u.grid.h:g}"
        )
    cert = certify(dk, SparsenessParams(epsilon, beta, half, math.inf))
    return NonSparseScale(ell, k, beta, mk, mk1, cert)
