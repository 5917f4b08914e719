"""Heat semigroup and mollifier evolution G_t, decay experiments and their checks.

G_t u = t^{-d/2} G(./sqrt t) * u. Sparse data at scale ell = ell_bar sqrt(t)
drops in norm by a factor gamma, and the drop is witnessed term by term
through the split G_t u = far + near_S + near_{S^c}, where "near" means
|x - y| <= ell and S is the sparseness witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import ContractError, DomainError, InputError, RangeError, ResolutionError
from .frequency import DyadicDecomposition, low_pass_ratio, phi
from .kernels import KernelSpec, heat_kernel
from .registry import Registry, load_registry
from .sparseness import (
    LocalFraction,
    SparsenessCertificate,
    SparsenessParams,
    ball_indicator,
    certify,
    superlevel_mask,
    tail_fraction,
    witness_threshold,
)
from .spectral_core import (
    Field,
    Grid,
    apply_multiplier,
    format_exponent,
    lp_norm,
    parse_exponent,
)

#: custom kernels must lose less than this fraction of their mass to the box
TAIL_TOLERANCE = 1e-6


def _check_time(grid: Grid, t: float, kernel: KernelSpec) -> None:
    if not (t > 0 and math.isfinite(t)):
        raise InputError(f"time must be positive and finite, got {t}")
    if math.sqrt(t) > grid.L / 8.0 * (1 + 1e-12):
        raise DomainError(
            f"sqrt(t) = {math.sqrt(t):g} exceeds L/8 = {grid.L / 8:g}; enlarge the box"
        )
    if kernel.kind == "custom":
        lost = kernel.tail(0.5 * grid.L / math.sqrt(t))
        if lost > TAIL_TOLERANCE * kernel.l1:
            raise DomainError(
                f"kernel tail {lost:.3g} outside the box exceeds tolerance; enlarge the box"
            )


def _sampled_kernel(grid: Grid, t: float, kernel: KernelSpec) -> np.ndarray:
    r = grid.displacement_norm / math.sqrt(t)
    k = t ** (-grid.d / 2) * np.asarray(kernel.profile(r), dtype=np.float64)
    total = k.sum() * grid.cell_volume
    if total != 0.0:
        k = k * (kernel.mass / total)
    return k


def kernel_multiplier(grid: Grid, t: float, kernel: KernelSpec | None = None) -> np.ndarray:
    """Fourier multiplier of G_t on the torus."""
    kernel = kernel or heat_kernel(grid.d)
    _check_time(grid, t, kernel)
    if kernel.kind == "heat":
        return np.exp(-t * grid.xi_squared)
    if kernel.multiplier is not None:
        return np.asarray(kernel.multiplier(math.sqrt(t) * grid.xi_norm), dtype=np.float64)
    k = _sampled_kernel(grid, t, kernel)
    return scipy.fft.fftn(k).real * grid.cell_volume


def evolve(u: Field, t: float, kernel: KernelSpec | None = None) -> Field:
    """G_t u. Heat flow uses the exact multiplier exp(-t |xi|^2)."""
    return apply_multiplier(u, kernel_multiplier(u.grid, t, kernel))


def torus_kernel(grid: Grid, t: float, kernel: KernelSpec | None = None) -> np.ndarray:
    """Physical samples of G_t on the torus, displacement zero at index 0."""
    m = kernel_multiplier(grid, t, kernel)
    return scipy.fft.ifftn(m).real / grid.cell_volume


def convolve(grid: Grid, kernel_samples: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Circular convolution (kernel * values) with quadrature weight h^d."""
    axes = tuple(range(-grid.d, 0))
    K = scipy.fft.fftn(kernel_samples)
    V = scipy.fft.fftn(values, axes=axes)
    return scipy.fft.ifftn(K * V, axes=axes).real * grid.cell_volume


@dataclass(frozen=True)
class Check:
    """One inequality lhs <= rhs."""

    name: str
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "holds": self.holds}


def f_of_gamma(kernel: KernelSpec, gamma: float, C0: float, registry: Registry) -> float:
    """Smallest admissible ell_bar.

    Heat: sqrt(C0 ln(C0/gamma)). Other kernels: the frozen table, read at the
    largest tabulated gamma not exceeding ``gamma``.
    """
    if kernel.kind == "heat":
        return math.sqrt(C0 * math.log(C0 / gamma))
    table = registry.constant(kernel.kind, "f_table", kernel.d)
    usable = [(g, l) for g, l in table if g <= gamma * (1 + 1e-12)]
    if not usable:
        raise RangeError(
            f"gamma = {gamma:g} is below the smallest calibrated value {min(g for g, _ in table):g}"
        )
    return max(usable)[1]


@dataclass(frozen=True)
class DecayRequirements:
    """Parameters under which sparse data drop by gamma under G_t.

    ``tail_fraction`` bounds ||u||_{L^p(S^c)} / ||u||_{L^p} and
    ``local_fraction`` bounds sup |S cap B_ell| / |B_ell|.
    """

    gamma: float
    p: float
    ell_bar: float
    tail_fraction: float
    local_fraction: float
    C0: float
    f_of_gamma: float
    kernel: KernelSpec

    @classmethod
    def build(
        cls, gamma: float, p, kernel: KernelSpec, registry: Registry | None = None
    ) -> DecayRequirements:
        if not 0.0 < gamma < 1.0:
            raise InputError(f"gamma must lie in (0, 1), got {gamma}")
        p = parse_exponent(p)
        if p == 1.0:
            raise ContractError(
                "no decay is possible in L^1: heat flow conserves the L^1 norm "
                "of nonnegative data however sparse"
            )
        registry = registry or load_registry()
        d = kernel.d
        C0 = float(registry.constant("decay", "C0", d))
        fg = f_of_gamma(kernel, gamma, C0, registry)
        inv_q = 1.0 - (0.0 if math.isinf(p) else 1.0 / p)
        local = (gamma / (C0 * kernel.linf * fg**d)) ** (1.0 / inv_q)
        tail = gamma / (3.0 * kernel.l1)
        return cls(gamma, p, fg, min(tail, 1.0 - 1e-12), local, C0, fg, kernel)

    def params(self, ell: float) -> SparsenessParams:
        return SparsenessParams(self.local_fraction, self.tail_fraction, ell, self.p)

    def checks(self, cert: SparsenessCertificate) -> list[Check]:
        inv_q = 1.0 - (0.0 if math.isinf(self.p) else 1.0 / self.p)
        d = self.kernel.d
        out = [
            Check("ell_bar >= f(gamma)", self.f_of_gamma, self.ell_bar),
            Check(
                "tail fraction <= gamma / (3 ||G||_1)",
                cert.measured_beta,
                self.gamma / (3.0 * self.kernel.l1),
            ),
            Check(
                "local fraction^(1-1/p) <= gamma / (C0 ||G||_inf ell_bar^d)",
                cert.measured_epsilon**inv_q,
                self.gamma / (self.C0 * self.kernel.linf * self.ell_bar**d),
            ),
        ]
        if self.kernel.kind == "heat":
            out.append(
                Check(
                    "C0 ln(C0/gamma) <= ell_bar^2",
                    self.C0 * math.log(self.C0 / self.gamma),
                    self.ell_bar**2 * (1 + 1e-12),
                )
            )
        return out

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "p": format_exponent(self.p),
            "ell_bar": self.ell_bar,
            "tail_fraction": self.tail_fraction,
            "local_fraction": self.local_fraction,
            "C0": self.C0,
            "f_of_gamma": self.f_of_gamma,
            "kernel": self.kernel.to_dict(),
        }


@dataclass(frozen=True)
class ThreeTerms:
    far: Field
    near_S: Field
    near_Sc: Field

    def total(self) -> Field:
        return self.far + self.near_S + self.near_Sc


def three_term_split(
    u: Field, t: float, ell: float, mask: np.ndarray, kernel: KernelSpec | None = None
) -> ThreeTerms:
    """Split G_t u by |x - y| <= ell (near/far) and y in S or not."""
    g = u.grid
    K = torus_kernel(g, t, kernel)
    ball = ball_indicator(g, ell)
    near_k = np.where(ball, K, 0.0)
    far_k = K - near_k
    inside = u.values * mask
    outside = u.values - inside
    return ThreeTerms(
        Field(g, convolve(g, far_k, u.values)),
        Field(g, convolve(g, near_k, inside)),
        Field(g, convolve(g, near_k, outside)),
    )


@dataclass
class DecayReport:
    requirements: DecayRequirements
    certificate: SparsenessCertificate
    checks: list[Check]
    t: float
    ell: float
    norm: float
    ratio: float
    #: L^p norms of far, near_S, near_{S^c}, relative to ||u||_p
    terms: dict[str, float]
    #: proof bounds of the same terms, relative to ||u||_p
    bounds: dict[str, float]
    identity_residual: float
    tolerance: float = 1e-6

    @property
    def precondition(self) -> bool:
        return all(c.holds for c in self.checks)

    @property
    def verdict(self) -> bool:
        g = self.requirements.gamma
        return (
            self.precondition
            and self.ratio <= g
            and all(v <= g / 3.0 + self.tolerance for v in self.terms.values())
        )

    def to_dict(self) -> dict:
        return {
            "requirements": self.requirements.to_dict(),
            "checks": [c.to_dict() for c in self.checks],
            "t": self.t,
            "ell": self.ell,
            "norm": self.norm,
            "ratio": self.ratio,
            "terms": self.terms,
            "bounds": self.bounds,
            "identity_residual": self.identity_residual,
            "certificate": self.certificate.to_dict(),
            "verdict": "pass" if self.verdict else "fail",
        }


def _scale_ladder(grid: Grid, ell_bar: float):
    ell = 2.0 * grid.h
    top = min(0.5 * grid.L, ell_bar * grid.L / 8.0)
    while ell <= top * (1 + 1e-12):
        yield ell
        ell *= math.sqrt(2.0)


def decay_experiment(
    u: Field,
    gamma: float,
    p,
    kernel: KernelSpec | None = None,
    *,
    ell: float | None = None,
    registry: Registry | None = None,
    strict: bool = True,
) -> DecayReport:
    """Measure ||G_t u||_p / ||u||_p at t = (ell / ell_bar)^2 against gamma.

    Without ``ell`` the smallest radius on a sqrt(2) ladder at which the
    requirements certify is used. With ``strict`` an unmet requirement
    raises :class:`ContractError` naming the violated inequalities.
    """
    g = u.grid
    kernel = kernel or heat_kernel(g.d)
    req = DecayRequirements.build(gamma, p, kernel, registry)
    norm = lp_norm(u, req.p)
    if norm == 0.0:
        raise ContractError("zero data: the decay ratio is undefined")
    if ell is None:
        lam = witness_threshold(u, req.tail_fraction, req.p)
        mask = superlevel_mask(u, lam)
        beta = tail_fraction(u, lam, req.p)
        frac = LocalFraction(g, mask)
        ladder = list(_scale_ladder(g, req.ell_bar))
        if not ladder:
            raise ResolutionError("no admissible radius between 2h and the box limits")
        cert = None
        for cand in ladder:
            c = SparsenessCertificate(req.params(cand), g, lam, beta, frac(cand), mask)
            if all(ch.holds for ch in req.checks(c)):
                cert = c
                break
        if cert is None:
            cert = c
        ell = cert.params.ell
    else:
        cert = certify(u, req.params(ell))
    checks = req.checks(cert)
    if strict and not all(c.holds for c in checks):
        bad = "; ".join(f"{c.name} ({c.lhs:.4g} > {c.rhs:.4g})" for c in checks if not c.holds)
        raise ContractError(f"sparseness requirements unmet: {bad}")
    t = (ell / req.ell_bar) ** 2
    full = evolve(u, t, kernel)
    parts = three_term_split(u, t, ell, cert.mask, kernel)
    top = float(np.abs(u.values).max())
    resid = float(np.abs(parts.total().values - full.values).max()) / top
    terms = {
        "far": lp_norm(parts.far, req.p) / norm,
        "near_S": lp_norm(parts.near_S, req.p) / norm,
        "near_Sc": lp_norm(parts.near_Sc, req.p) / norm,
    }
    K = torus_kernel(g, t, kernel)
    ball = ball_indicator(g, ell)
    inv_q = 1.0 - (0.0 if math.isinf(req.p) else 1.0 / req.p)
    bounds = {
        "far": float(np.abs(K[~ball]).sum()) * g.cell_volume,
        "near_S": float(np.abs(K).max())
        * cert.measured_epsilon**inv_q
        * float(ball.sum())
        * g.cell_volume,
        "near_Sc": float(np.abs(K[ball]).sum()) * g.cell_volume * cert.measured_beta,
    }
    return DecayReport(
        req, cert, checks, t, ell, norm, lp_norm(full, req.p) / norm, terms, bounds, resid
    )


def heat_drop_time(f: Field, drop: float = 0.75, steps: int = 60) -> float:
    """Smallest T with ||e^{T Delta} f||_inf <= drop ||f||_inf, by bisection."""
    top = lp_norm(f, math.inf)
    if top == 0.0:
        raise ContractError("zero data has no drop time")
    lo, hi = 0.0, (f.grid.L / 8.0) ** 2
    if lp_norm(evolve(f, hi), math.inf) > drop * top:
        raise DomainError("the drop is not reached while sqrt(T) <= L/8")
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if lp_norm(evolve(f, mid), math.inf) <= drop * top:
            hi = mid
        else:
            lo = mid
    return hi


def heat_drop_ratio(f: Field, ell: float, C_cal: float) -> float:
    """||e^{T Delta} f||_inf / ||f||_inf at T = C_cal ell^2."""
    return lp_norm(evolve(f, C_cal * ell * ell), math.inf) / lp_norm(f, math.inf)


@dataclass
class FrequencyDecayReport:
    gamma: float
    p: float
    t: float
    J: float
    low_ratio: float
    ratio: float
    C: float
    c: float
    K_cal: float
    #: rows (level, measured ||e^{t Delta} Delta_j u||_p / ||u||_p, bound C e^{-c t 4^j})
    blocks: list[tuple[float, float, float]]
    tail_sum: float
    tail_bound: float

    @property
    def blocks_hold(self) -> bool:
        return all(m <= b for _, m, b in self.blocks)

    @property
    def verdict(self) -> bool:
        return (
            self.ratio <= self.gamma
            and self.blocks_hold
            and self.tail_sum <= self.tail_bound
        )

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "p": format_exponent(self.p),
            "t": self.t,
            "J": self.J,
            "low_ratio": self.low_ratio,
            "ratio": self.ratio,
            "C": self.C,
            "c": self.c,
            "K_cal": self.K_cal,
            "blocks": [
                {"j": j, "measured": m, "bound": b} for j, m, b in self.blocks
            ],
            "tail_sum": self.tail_sum,
            "tail_bound": self.tail_bound,
            "verdict": "pass" if self.verdict else "fail",
        }


def frequency_level(gamma: float, t: float, K_cal: float) -> float:
    """J with 2^J = K_cal / (gamma sqrt t)."""
    return math.log2(K_cal / (gamma * math.sqrt(t)))


def block_tail_sum(C: float, c: float, tau: float, terms: int = 64) -> float:
    """C sum_{m >= 0} exp(-c tau 4^m)."""
    total = 0.0
    for m in range(terms):
        x = c * tau * 4.0**m
        if x > 745:
            break
        total += math.exp(-x)
    return C * total


def frequency_decay_experiment(
    u: Field, gamma: float, p, t: float, registry: Registry | None = None
) -> FrequencyDecayReport:
    """Heat decay of (gamma/2, J)-frequency-sparse data, 2^J = K_cal gamma^-1 t^-1/2."""
    if not 0.0 < gamma < 1.0:
        raise InputError(f"gamma must lie in (0, 1), got {gamma}")
    p = parse_exponent(p)
    g = u.grid
    registry = registry or load_registry()
    consts = registry.lookup("frequency", g.d)
    C, c, K = float(consts["C"]), float(consts["c"]), float(consts["K_cal"])
    J = frequency_level(gamma, t, K)
    dec = DyadicDecomposition(g)
    if not dec.j_min <= J <= dec.j_top + 1:
        raise RangeError(f"level J = {J:.3f} outside [{dec.j_min}, {dec.j_top + 1}]")
    norm = lp_norm(u, p)
    if norm == 0.0:
        raise ContractError("zero data: the decay ratio is undefined")
    low = low_pass_ratio(u, J, p)
    if low > 0.5 * gamma:
        raise ContractError(
            f"data not ({0.5 * gamma:g}, {J:.3f})-sparse in frequency: low-pass ratio {low:.4g}"
        )
    heat = np.exp(-t * g.xi_squared)
    ratio = lp_norm(apply_multiplier(u, heat), p) / norm
    blocks = []
    kmax = float(g.xi_norm.max())
    m = 0
    while (0.75 * 2.0 ** (J + m)) <= kmax:
        j = J + m
        mult = heat * phi(g.xi_norm * 2.0 ** (-j))
        meas = lp_norm(apply_multiplier(u, mult), p) / norm
        blocks.append((j, meas, C * math.exp(-c * t * 4.0**j)))
        m += 1
    tau = t * 4.0**J
    return FrequencyDecayReport(
        gamma,
        p,
        t,
        J,
        low,
        ratio,
        C,
        c,
        K,
        blocks,
        block_tail_sum(C, c, tau),
        4.0 * C / (3.0 * c * tau),
    )


@dataclass
class SpatialFrequencyReport:
    gamma: float
    J: float
    p: float
    requirements: DecayRequirements
    certificate: SparsenessCertificate | None
    checks: list[Check]
    ratio: float | None
    #: why the spatial precondition could not be evaluated, if it could not
    reason: str = ""

    @property
    def precondition(self) -> bool:
        return self.certificate is not None and all(c.holds for c in self.checks)

    @property
    def vacuous(self) -> bool:
        return not self.precondition

    @property
    def verdict(self) -> bool:
        return self.vacuous or (self.ratio is not None and self.ratio <= self.gamma)

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "J": self.J,
            "p": format_exponent(self.p),
            "requirements": self.requirements.to_dict(),
            "checks": [c.to_dict() for c in self.checks],
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "ratio": self.ratio,
            "vacuous": self.vacuous,
            "reason": self.reason,
            "verdict": "pass" if self.verdict else "fail",
        }


def spatial_implies_frequency_check(
    u: Field,
    gamma: float,
    J: float,
    p,
    *,
    registry: Registry | None = None,
    strict: bool = False,
) -> SpatialFrequencyReport:
    """Spatially sparse data at scale ell_bar 2^-J must be (gamma, J)-sparse in frequency.

    The requirements are those of the decay lemma for the kernel whose
    multiplier is chi, so that G_t with sqrt(t) = 2^-J is exactly Delta_{<J}.
    """
    from .kernels import lowpass_kernel

    registry = registry or load_registry()
    p = parse_exponent(p)
    kernel = lowpass_kernel(u.grid.d, registry.kernel_table("lowpass", u.grid.d))
    req = DecayRequirements.build(gamma, p, kernel, registry)
    ell = req.ell_bar * 2.0 ** (-J)
    ratio = low_pass_ratio(u, J, p)
    try:
        cert = certify(u, req.params(ell))
    except (DomainError, InputError, ResolutionError) as exc:
        if strict:
            raise ContractError(f"spatial precondition unavailable: {exc}") from exc
        return SpatialFrequencyReport(gamma, J, p, req, None, [], ratio, str(exc))
    checks = req.checks(cert)
    report = SpatialFrequencyReport(gamma, J, p, req, cert, checks, ratio)
    if strict and report.vacuous:
        bad = "; ".join(c.name for c in checks if not c.holds)
        raise ContractError(f"spatial sparseness precondition unmet: {bad}")
    return report
