"""Pseudo-spectral Navier-Stokes solver (viscosity one) and the regularity diagnostics.

Time stepping is an integrating-factor Heun scheme: the heat part is exact,
the projected nonlinearity N(u) = -P div(u (x) u) is advanced by explicit
RK2 with 2/3-rule dealiasing. Along the trajectory the Duhamel term
D(t) = int_0^t e^{(t-s) Delta} N(u(s)) ds is accumulated by the trapezoid
rule, so u(t) = e^{t Delta} u_0 + D(t) up to the time-stepping error.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.fft

from .errors import CFLError, ContractError, DegenerateInputError, InputError, RangeError
from .frequency import DyadicDecomposition, TruncationWarning, besov_profile, chi
from .kernels import heat_kernel
from .registry import Registry, load_registry
from .semigroup import DecayRequirements, evolve
from .sparseness import SparsenessCertificate, certify, chebyshev_scale
from . import spectral_core
from .spectral_core import (
    Field,
    Grid,
    format_exponent,
    lp_norm,
    parse_exponent,
)

#: largest admissible step of the Duhamel trapezoid rule
MAX_DT = 2e-3


def _axes(grid: Grid) -> tuple[int, ...]:
    return tuple(range(1, grid.d + 1))


def relative_divergence(u: Field) -> float:
    """||xi . u^|| / || |xi| |u^| ||, zero for the zero field."""
    g = u.grid
    U = scipy.fft.fftn(u.values, axes=_axes(g))
    div = sum(g.xi(a, derivative=True) * U[a] for a in range(g.d))
    scale = np.sqrt(g.xi_squared) * np.sqrt(np.sum(np.abs(U) ** 2, axis=0))
    den = float(np.linalg.norm(scale))
    return 0.0 if den == 0.0 else float(np.linalg.norm(div)) / den


def admissible_dt(u: Field) -> float:
    """min(h^2/4, h / (2 ||u||_inf))."""
    h = u.grid.h
    top = lp_norm(u, math.inf)
    adv = math.inf if top == 0.0 else h / (2.0 * top)
    return min(h * h / 4.0, adv)


class Solver:
    """Integrating-factor RK2 stepper bound to one grid.

    Works on the half spectrum of the real FFT; the Nyquist plane is zeroed
    in odd derivatives, as in :meth:`Grid.xi`.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        d, n = grid.d, grid.n
        self.axes = _axes(grid)
        self.shape = grid.shape[:-1] + (n // 2 + 1,)
        kap = [np.abs(grid.kappa)] * (d - 1) + [np.arange(n // 2 + 1)]
        self._xi, xi2 = [], 0.0
        mask = True
        for a, k in enumerate(kap):
            shape = [1] * d
            shape[a] = k.size
            sym = (2.0 * np.pi / grid.L) * (grid.kappa if a < d - 1 else k)
            odd = sym.astype(float).copy()
            odd[n // 2] = 0.0
            self._xi.append(odd.reshape(shape))
            xi2 = xi2 + sym.astype(float).reshape(shape) ** 2
            mask = mask & (k <= n // 3).reshape(shape)
        self.xi2 = np.broadcast_to(xi2, self.shape)
        self.dealias = np.broadcast_to(mask, self.shape)
        k2 = sum(x**2 for x in self._xi)
        self._k2 = np.where(k2 > 0, k2, 1.0)
        self._pairs = [(i, j) for i in range(d) for j in range(i, d)]
        self._slot = {}
        for s, (i, j) in enumerate(self._pairs):
            self._slot[i, j] = self._slot[j, i] = s
        self._factors: dict[float, np.ndarray] = {}

    def forward(self, values: np.ndarray) -> np.ndarray:
        return scipy.fft.rfftn(values, axes=self.axes, workers=spectral_core._WORKERS)

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        s = (self.grid.n,) * self.grid.d
        return scipy.fft.irfftn(coeffs, s=s, axes=self.axes, workers=spectral_core._WORKERS)

    def factor(self, dt: float) -> np.ndarray:
        """e^{-dt |xi|^2}, cached per step size."""
        if dt not in self._factors:
            self._factors[dt] = np.exp(-dt * self.xi2)
        return self._factors[dt]

    def nonlinear(self, U: np.ndarray) -> np.ndarray:
        """Half-spectrum coefficients of -P div(u (x) u), dealiased."""
        d = self.grid.d
        u = self.inverse(U)
        P = self.forward(np.stack([u[i] * u[j] for i, j in self._pairs]))
        out = np.empty_like(U)
        for i in range(d):
            out[i] = -1j * sum(self._xi[j] * P[self._slot[i, j]] for j in range(d))
        dot = sum(self._xi[a] * out[a] for a in range(d)) / self._k2
        for a in range(d):
            out[a] -= self._xi[a] * dot
        return out * self.dealias

    def advance(self, U: np.ndarray, N0: np.ndarray, dt: float):
        """One Heun step; returns (U_new, N(U_new))."""
        E = self.factor(dt)
        U1 = E * (U + dt * N0)
        N1 = self.nonlinear(U1)
        Unew = E * U + 0.5 * dt * (E * N0 + N1)
        return Unew, self.nonlinear(Unew)


@dataclass
class NSState:
    u: Field
    t: float = 0.0
    history: list = dc_field(default_factory=list)

    def __post_init__(self):
        if self.u.m != self.u.grid.d:
            raise InputError(f"velocity needs {self.u.grid.d} components, got {self.u.m}")
        div = relative_divergence(self.u)
        if div > 1e-8:
            raise InputError(
                f"initial velocity is not divergence-free (relative divergence {div:.2e}); "
                "apply leray_project first"
            )


def _check_dt(u: Field, dt: float) -> None:
    limit = admissible_dt(u)
    if not (dt > 0) or dt > limit * (1 + 1e-12):
        raise CFLError(f"time step {dt:g} violates the limit {limit:g}", limit)


def step(state: NSState, dt: float, solver: Solver | None = None) -> NSState:
    """Advance by one integrating-factor RK2 step of size ``dt``."""
    _check_dt(state.u, dt)
    solver = solver or Solver(state.u.grid)
    U = solver.forward(state.u.values)
    Unew, _ = solver.advance(U, solver.nonlinear(U), dt)
    u = Field(state.u.grid, solver.inverse(Unew))
    return NSState(u, state.t + dt, list(state.history))


@dataclass
class Trajectory:
    times: list[float]
    snapshots: list[Field]
    #: Duhamel term D(t) at each snapshot time
    duhamels: list[Field]
    energies: list[float]
    divergences: list[float]
    dt: float

    @property
    def final(self) -> Field:
        return self.snapshots[-1]

    @property
    def duhamel(self) -> Field:
        return self.duhamels[-1]


def integrate(
    u0: Field,
    t_end: float,
    dt: float | None = None,
    snapshot_every: int | None = None,
    solver: Solver | None = None,
) -> Trajectory:
    """Run from u0 to t_end with a uniform step no larger than ``dt``.

    The step is shrunk to land exactly on ``t_end`` and re-validated against
    the CFL limit whenever ||u||_inf grows.
    """
    NSState(u0)  # validates components and divergence
    g = u0.grid
    if t_end < 0:
        raise InputError("final time must be nonnegative")
    limit = min(admissible_dt(u0), MAX_DT)
    if dt is None:
        dt = 0.9 * limit
    if dt > limit * (1 + 1e-12):
        raise CFLError(f"time step {dt:g} violates the limit {limit:g}", limit)
    steps = max(1, math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    h_dt = t_end / steps if steps else 0.0
    solver = solver or Solver(g)
    U = solver.forward(u0.values)
    N = solver.nonlinear(U)
    D = np.zeros_like(U)
    times, snaps = [0.0], [u0]
    duhs = [Field.zeros(g, g.d)]
    energies = [lp_norm(u0, 2) ** 2]
    divs = [relative_divergence(u0)]
    every = snapshot_every or max(steps, 1)
    for k in range(steps):
        E = solver.factor(h_dt)
        Unew, Nnew = solver.advance(U, N, h_dt)
        D = E * D + 0.5 * h_dt * (E * N + Nnew)
        U, N = Unew, Nnew
        u = Field(g, solver.inverse(U))
        energies.append(lp_norm(u, 2) ** 2)
        if (k + 1) % every == 0 or k + 1 == steps:
            times.append((k + 1) * h_dt)
            snaps.append(u)
            duhs.append(Field(g, solver.inverse(D)))
            divs.append(relative_divergence(u))
        if lp_norm(u, math.inf) > 0 and h_dt > admissible_dt(u) * (1 + 1e-12):
            raise CFLError(
                f"velocity grew at t = {(k + 1) * h_dt:g}; step {h_dt:g} is no longer admissible",
                admissible_dt(u),
            )
    return Trajectory(times, snaps, duhs, energies, divs, h_dt)


def _time_exponent(d: int, p: float) -> float:
    """(1/2)(1 - d/p)."""
    return 0.5 * (1.0 - (0.0 if math.isinf(p) else d / p))


def _check_supercritical(d: int, p: float) -> None:
    if p <= d:
        raise RangeError(f"need p > d for a guaranteed existence time, got p={p:g}, d={d}")


def guaranteed_time(norm_p: float, p, d: int, registry: Registry | None = None) -> float:
    """T_bar with ||u0||_p T_bar^{(1-d/p)/2} = c_p."""
    p = parse_exponent(p)
    _check_supercritical(d, p)
    if not norm_p > 0:
        raise InputError("the norm of the initial data must be positive")
    registry = registry or load_registry()
    c_p = float(registry.constant("navier_stokes", "c_p", d, p))
    return (c_p / norm_p) ** (1.0 / _time_exponent(d, p))


@dataclass(frozen=True)
class DuhamelCheck:
    constant: float
    bound: float
    t: float
    t_bar: float
    duhamel_norm: float

    @property
    def holds(self) -> bool:
        return self.constant <= self.bound

    def to_dict(self) -> dict:
        return {
            "constant": self.constant,
            "bound": self.bound,
            "t": self.t,
            "t_bar": self.t_bar,
            "duhamel_norm": self.duhamel_norm,
            "holds": self.holds,
        }


def duhamel_bound_check(
    u0: Field, p, t: float, dt: float | None = None, registry: Registry | None = None
) -> DuhamelCheck:
    """||D(t)||_p / (t^{(1-d/p)/2} ||u0||_p^2) along the numerical trajectory."""
    p = parse_exponent(p)
    d = u0.grid.d
    registry = registry or load_registry()
    bound = float(registry.constant("navier_stokes", "C_duhamel", d, p))
    norm = lp_norm(u0, p)
    if norm == 0.0:
        return DuhamelCheck(0.0, bound, t, math.inf, 0.0)
    t_bar = guaranteed_time(norm, p, d, registry)
    if t > t_bar * (1 + 1e-12):
        raise ContractError(f"t = {t:g} exceeds the guaranteed existence time {t_bar:g}")
    if t == 0:
        return DuhamelCheck(0.0, bound, 0.0, t_bar, 0.0)
    traj = integrate(u0, t, dt)
    dn = lp_norm(traj.duhamel, p)
    return DuhamelCheck(dn / (t ** _time_exponent(d, p) * norm**2), bound, t, t_bar, dn)


@dataclass(frozen=True)
class CriterionThresholds:
    """Sparseness that guarantees continuation past T0.

    ``tail_fraction`` bounds the L^p share outside the witness set,
    ``local_fraction`` the share of each ball of radius ``ell`` it may fill.
    """

    gamma: float
    T0: float
    t_bar: float
    c_p: float
    C0: float
    ell_bar: float
    tail_fraction: float
    local_fraction: float
    p: float
    d: int

    @property
    def trivial(self) -> bool:
        return self.T0 <= self.t_bar * (1 + 1e-12)

    @property
    def ell(self) -> float:
        return math.sqrt(self.T0) * self.ell_bar

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "p": format_exponent(self.p),
            "T0": self.T0,
            "t_bar": self.t_bar,
            "gamma": self.gamma,
            "c_p": self.c_p,
            "C0": self.C0,
            "trivial": self.trivial,
            "ell_bar": self.ell_bar,
            "ell": self.ell,
            "tail_fraction": self.tail_fraction,
            "local_fraction": self.local_fraction,
        }


def criterion_thresholds(
    norm_p: float, p, d: int, T0: float, registry: Registry | None = None
) -> CriterionThresholds:
    """gamma from ||u0||_p T0^{(1-d/p)/2} gamma = c_p and the minimal sparseness.

    ell_bar^2 = C0 ln(C0/gamma), tail share gamma/C0 and
    local share^{1-1/p} = gamma / (C0 ell_bar^d). When T0 <= T_bar the
    result is marked trivial and gamma is reported as 1.
    """
    p = parse_exponent(p)
    _check_supercritical(d, p)
    if not T0 > 0:
        raise InputError("T0 must be positive")
    registry = registry or load_registry()
    t_bar = guaranteed_time(norm_p, p, d, registry)
    c_p = float(registry.constant("navier_stokes", "c_p", d, p))
    C0 = float(registry.constant("decay", "C0", d))
    if T0 <= t_bar * (1 + 1e-12):
        return CriterionThresholds(1.0, T0, t_bar, c_p, C0, math.nan, math.nan, math.nan, p, d)
    gamma = c_p / (norm_p * T0 ** _time_exponent(d, p))
    if not 0 < gamma < 1:
        raise ContractError(f"inconsistent inputs give gamma = {gamma:g}")
    ell_bar = math.sqrt(C0 * math.log(C0 / gamma))
    inv_q = 1.0 - (0.0 if math.isinf(p) else 1.0 / p)
    local = (gamma / (C0 * ell_bar**d)) ** (1.0 / inv_q)
    return CriterionThresholds(gamma, T0, t_bar, c_p, C0, ell_bar, gamma / C0, local, p, d)


@dataclass
class DecreasingReport:
    gamma: float
    p: float
    T: float
    t_bar: float
    ratio: float
    linear: float
    duhamel: float
    certificate: SparsenessCertificate | None
    requirements: DecayRequirements | None
    tolerance: float = 1e-4
    mode: str = "spatial"

    @property
    def verdict(self) -> bool:
        half = 0.5 * self.gamma + self.tolerance
        return self.ratio <= self.gamma and self.linear <= half and self.duhamel <= half

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "gamma": self.gamma,
            "p": format_exponent(self.p),
            "T": self.T,
            "t_bar": self.t_bar,
            "ratio": self.ratio,
            "linear": self.linear,
            "duhamel": self.duhamel,
            "requirements": self.requirements.to_dict() if self.requirements else None,
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "verdict": "pass" if self.verdict else "fail",
        }


def effective_duhamel_constant(C: float, gamma: float, c_p: float) -> float:
    """C raised to the smallest power of two above gamma / (2 c_p) when needed, so T < T_bar."""
    floor = 2.0 ** (math.floor(math.log2(gamma / (2.0 * c_p))) + 1)
    return max(C, floor)


def decreasing_time(norm_p: float, p: float, d: int, gamma: float, C: float) -> float:
    """T with ||u0||_p T^{(1-d/p)/2} = gamma / (2C)."""
    return (gamma / (2.0 * C * norm_p)) ** (1.0 / _time_exponent(d, p))


def decreasing_experiment(
    u0: Field,
    gamma: float,
    p,
    dt: float | None = None,
    registry: Registry | None = None,
) -> DecreasingReport:
    """Run to the decrease time T and split ||u(T)||_p into heat and Duhamel parts.

    The data must be sparse at scale ell_bar sqrt(T) with the decay
    requirements taken at gamma/2.
    """
    p = parse_exponent(p)
    d = u0.grid.d
    _check_supercritical(d, p)
    registry = registry or load_registry()
    norm = lp_norm(u0, p)
    if norm == 0.0:
        return DecreasingReport(gamma, p, 0.0, math.inf, 0.0, 0.0, 0.0, None, None)
    C = effective_duhamel_constant(
        float(registry.constant("navier_stokes", "C_duhamel", d, p)),
        gamma,
        float(registry.constant("navier_stokes", "c_p", d, p)),
    )
    T = decreasing_time(norm, p, d, gamma, C)
    t_bar = guaranteed_time(norm, p, d, registry)
    if T >= t_bar:
        raise ContractError(f"decrease time {T:g} is not below T_bar = {t_bar:g}")
    req = DecayRequirements.build(0.5 * gamma, p, heat_kernel(d), registry)
    ell = req.ell_bar * math.sqrt(T)
    cert = certify(u0, req.params(ell))
    bad = [c for c in req.checks(cert) if not c.holds]
    if bad:
        raise ContractError(
            "sparseness requirements unmet: "
            + "; ".join(f"{c.name} ({c.lhs:.4g} > {c.rhs:.4g})" for c in bad)
        )
    traj = integrate(u0, T, dt)
    lin = lp_norm(evolve(u0, T), p) / norm
    duh = lp_norm(traj.duhamel, p) / norm
    ratio = lp_norm(traj.final, p) / norm
    return DecreasingReport(gamma, p, T, t_bar, ratio, lin, duh, cert, req)


def decreasing_frequency_experiment(
    u0: Field,
    gamma: float,
    p,
    t: float | None = None,
    dt: float | None = None,
    registry: Registry | None = None,
) -> DecreasingReport:
    """Frequency version: (gamma/4, J)-sparse data with 2^J = K_cal (gamma/2)^-1 t^-1/2."""
    from .frequency import low_pass_ratio
    from .semigroup import frequency_level

    p = parse_exponent(p)
    d = u0.grid.d
    _check_supercritical(d, p)
    registry = registry or load_registry()
    norm = lp_norm(u0, p)
    if norm == 0.0:
        return DecreasingReport(gamma, p, 0.0, math.inf, 0.0, 0.0, 0.0, None, None, mode="frequency")
    C = effective_duhamel_constant(
        float(registry.constant("navier_stokes", "C_duhamel", d, p)),
        gamma,
        float(registry.constant("navier_stokes", "c_p", d, p)),
    )
    T = decreasing_time(norm, p, d, gamma, C)
    t_bar = guaranteed_time(norm, p, d, registry)
    if T >= t_bar:
        raise ContractError(f"decrease time {T:g} is not below T_bar = {t_bar:g}")
    t = T if t is None else t
    if not 0 < t <= T:
        raise InputError(f"t must lie in (0, {T:g}]")
    K = float(registry.constant("frequency", "K_cal", d))
    J = frequency_level(0.5 * gamma, t, K)
    low = low_pass_ratio(u0, J, p)
    if low > 0.25 * gamma:
        raise ContractError(
            f"data not ({0.25 * gamma:g}, {J:.3f})-sparse in frequency: ratio {low:.4g}"
        )
    traj = integrate(u0, t, dt)
    lin = lp_norm(evolve(u0, t), p) / norm
    duh = lp_norm(traj.duhamel, p) / norm
    ratio = lp_norm(traj.final, p) / norm
    return DecreasingReport(gamma, p, t, t_bar, ratio, lin, duh, None, None, mode="frequency")


def cutoff_level(u: Field, p, steps: int = 40) -> float:
    """Largest real J with ||Delta_{<J} u||_p < ||u||_p / 2, by bisection."""
    p = parse_exponent(p)
    g = u.grid
    dec = DyadicDecomposition(g)
    total = lp_norm(u, p)
    if total == 0.0:
        raise DegenerateInputError("cutoff level undefined for the zero field")
    ax = _axes(g)
    U = scipy.fft.fftn(u.values, axes=ax)

    def ratio(J):
        m = chi(g.xi_norm * 2.0 ** (-J))
        return lp_norm(Field(g, scipy.fft.ifftn(U * m, axes=ax).real), p) / total

    lo, hi = float(dec.j_min), float(dec.j_top + 1)
    if ratio(lo) >= 0.5:
        return lo
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if ratio(mid) < 0.5:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class BlowupMonitor:
    T_ref: float
    p_list: tuple
    c_p: dict
    rows: list[dict]
    escape_times: list[tuple[float, float]]
    #: (t, lhs, rhs) of the a priori scale bound, where gamma_p(t) <= 1
    apriori_checks: list[tuple[float, float, float, float]]

    @property
    def apriori_holds(self) -> bool:
        return all(lhs <= rhs * (1 + 1e-12) for _, _, lhs, rhs in self.apriori_checks)

    def series(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        if not self.rows:
            return ""
        keys = list(self.rows[0].keys())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for r in self.rows:
            w.writerow([repr(float(r[k])) for k in keys])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "T_ref": self.T_ref,
            "p": [format_exponent(p) for p in self.p_list],
            "c_p": {format_exponent(p): v for p, v in self.c_p.items()},
            "escape_times": [{"t": t, "level": m} for t, m in self.escape_times],
            "apriori_holds": self.apriori_holds,
            "samples": len(self.rows),
        }


def escape_times(times, sup_norms) -> list[tuple[float, float]]:
    """Sample times whose sup norm is a new record later exceeded again."""
    out = []
    if len(sup_norms) == 0:
        return out
    record = sup_norms[0]
    for i in range(1, len(sup_norms)):
        s = sup_norms[i]
        if s > record:
            record = s
            if any(v > s for v in sup_norms[i + 1 :]):
                out.append((float(times[i]), float(s)))
    return out


def monitor(
    times,
    snapshots,
    T_ref: float,
    p_list=("inf",),
    registry: Registry | None = None,
    c_p: dict | None = None,
) -> BlowupMonitor:
    """Blow-up diagnostics along a trajectory against a declared reference time."""
    ps = tuple(parse_exponent(p) for p in p_list)
    snapshots = list(snapshots)
    times = [float(t) for t in times]
    if any(t >= T_ref for t in times):
        raise InputError("all sample times must precede the reference time")
    if not snapshots or all(lp_norm(u, math.inf) == 0.0 for u in snapshots):
        return BlowupMonitor(T_ref, ps, {}, [], [], [])
    d = snapshots[0].grid.d
    if c_p is None:
        registry = registry or load_registry()
        c_p = {p: float(registry.constant("navier_stokes", "c_p", d, p)) for p in ps}
    u0_l2 = lp_norm(snapshots[0], 2)
    rows, checks = [], []
    for t, u in zip(times, snapshots):
        row = {"t": t}
        for p in ps:
            tag = format_exponent(p)
            n_p = lp_norm(u, p)
            e = _time_exponent(d, p)
            gam = c_p[p] / (n_p * (T_ref - t) ** e)
            row[f"norm_{tag}"] = n_p
            row[f"gamma_{tag}"] = gam
            if p > 2:
                ell0 = chebyshev_scale(u, p).ell0
                row[f"ell0_{tag}"] = ell0
                if gam <= 1.0:
                    lhs = lp_norm(u, 2) / n_p
                    rhs = u0_l2 * (T_ref - t) ** e / c_p[p]
                    checks.append((t, p, lhs, rhs))
            row[f"J_{tag}"] = cutoff_level(u, p)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            row["besov"] = besov_profile(u).norm
        rows.append(row)
    sups = [lp_norm(u, math.inf) for u in snapshots]
    return BlowupMonitor(T_ref, ps, dict(c_p), rows, escape_times(times, sups), checks)
