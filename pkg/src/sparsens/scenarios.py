"""Backward self-similar blow-up ansatz and the admissible exponent region.

Fields follow u(x, t) = (-t)^(-zeta_t) U(y, s) with y = x / (-t)^zeta_x and
s = -log(-t), t < 0. Profiles are closed-form Gaussian envelopes, optionally
modulated periodically in s. The exponent region is an exact intersection of
rational half-planes in the (zeta_x, zeta_t) plane.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DegenerateInputError, DomainError, InputError, ResolutionError
from .sparseness import (
    LocalFraction,
    SparsenessParams,
    certify,
    nonsparse_scale,
    superlevel_mask,
)
from .spectral_core import Field, Grid, derivative_tensor, lp_norm, lp_norm_on

#: relative level below which a profile counts as decayed at the box edge
EDGE_DECAY = 1e-3
#: phase samples per period when checking uniformity in s
PHASE_SAMPLES = 16


def _rational(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x).limit_denominator(10**9) if isinstance(x, float) else Fraction(x)


def alpha_k(zeta_x, zeta_t, k: int):
    """Sparseness exponent zeta_x / (zeta_t + k zeta_x); exact for rational input."""
    if k < 0:
        raise InputError(f"derivative order must be >= 0, got {k}")
    if not (zeta_x > 0 and zeta_t > 0):
        raise InputError("similarity exponents must be positive")
    if isinstance(zeta_x, float) or isinstance(zeta_t, float):
        return zeta_x / (zeta_t + k * zeta_x)
    return Fraction(zeta_x) / (Fraction(zeta_t) + k * Fraction(zeta_x))


def alpha_bar(d: int, k: int) -> Fraction:
    """Critical exponent 1 / (k + d/2)."""
    if k < 0 or d < 1:
        raise InputError(f"need k >= 0 and d >= 1, got k={k}, d={d}")
    return 1 / (k + Fraction(d, 2))


def homogeneity_index(alpha, k: int):
    """Scaling index k - 1/alpha of the class Z^(k)_alpha (a number only)."""
    if alpha <= 0:
        raise InputError(f"alpha must be positive, got {alpha}")
    if isinstance(alpha, Fraction):
        return k - 1 / alpha
    return k - 1.0 / alpha


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class GaussianProfile:
    """Closed-form profile with a Gaussian envelope of width ``sigma``.

    ``kind="scalar"`` gives A g(y); ``kind="dipole"`` (d = 2) gives the
    divergence-free perpendicular gradient of A y_1 g(y). A nonzero
    ``modulation`` multiplies by (1 + modulation sin s), period 2 pi in s.
    """

    d: int
    sigma: float = 0.5
    amplitude: float = 1.0
    modulation: float = 0.0
    kind: str = "dipole"
    constant: bool = False

    def __post_init__(self):
        if self.kind not in ("scalar", "dipole"):
            raise InputError(f"unknown profile kind {self.kind!r}")
        if self.kind == "dipole" and self.d != 2:
            raise InputError("the dipole profile is two-dimensional")
        if not self.sigma > 0:
            raise InputError("profile width must be positive")
        if not 0 <= self.modulation < 1:
            raise InputError("modulation must lie in [0, 1)")

    @property
    def m(self) -> int:
        return 1 if self.kind == "scalar" else 2

    @property
    def steady(self) -> bool:
        return self.modulation == 0.0

    @property
    def support_radius(self) -> float:
        """Radius beyond which U and grad U fall below EDGE_DECAY of their peaks."""
        if self.constant:
            return 0.0
        # envelope exp(-r^2/2s^2) times at most a cubic in r/s
        return self.sigma * math.sqrt(2.0 * math.log(1e2 / EDGE_DECAY))

    def phase(self, s: float) -> float:
        return 1.0 + self.modulation * math.sin(s)

    def jet(self, Y: list[np.ndarray], s: float, k: int) -> np.ndarray:
        """Components of nabla_y^k U at points Y, for k in {0, 1}.

        Gradients are stacked as [d_0 U, d_1 U, ...], each block over the
        components of U, the same layout as ``derivative_tensor``.
        """
        shape = np.broadcast_shapes(*(y.shape for y in Y))
        A = self.amplitude * self.phase(s)
        if self.constant:
            if k == 0:
                return np.full((self.m,) + shape, A)
            return np.zeros((self.d * self.m,) + shape)
        sig2 = self.sigma**2
        r2 = sum(y * y for y in Y)
        g = np.exp(-r2 / (2 * sig2))
        if self.kind == "scalar":
            if k == 0:
                return np.broadcast_to(A * g, (1,) + shape).copy()
            return np.stack([np.broadcast_to(-A * y / sig2 * g, shape) for y in Y])
        y1, y2 = (np.broadcast_to(y, shape) for y in Y)
        if k == 0:
            # U = (-d2 psi, d1 psi) with psi = y1 g
            return A * np.stack([y1 * y2 / sig2 * g, (1 - y1**2 / sig2) * g])
        p11 = -y1 / sig2 * g * (3 - y1**2 / sig2)
        p12 = -(1 - y1**2 / sig2) * y2 / sig2 * g
        p22 = -y1 / sig2 * g * (1 - y2**2 / sig2)
        return A * np.stack([-p12, p11, -p22, p12])


@dataclass(frozen=True)
class SimilarityAnsatz:
    zeta_x: float
    zeta_t: float
    profile: GaussianProfile

    def __post_init__(self):
        if not (self.zeta_x > 0 and self.zeta_t > 0):
            raise InputError("similarity exponents must be positive")

    @property
    def d(self) -> int:
        return self.profile.d

    def alpha(self, k: int):
        return alpha_k(self.zeta_x, self.zeta_t, k)

    def length(self, t: float) -> float:
        """(-t)^zeta_x, the physical size of one similarity unit."""
        _check_backward(t)
        return (-t) ** self.zeta_x

    def amplitude(self, t: float, k: int = 0) -> float:
        """(-t)^-(zeta_t + k zeta_x)."""
        _check_backward(t)
        return (-t) ** (-(self.zeta_t + k * self.zeta_x))

    def profile_bounds(self, k: int, R: float | None = None, n: int = 257) -> dict:
        """C_k = sup |nabla^k U| and c_k = sup over B_R of |nabla^k U|, over PHASE_SAMPLES phases."""
        span = 2.0 * max(self.profile.support_radius, 1.0)
        axis = np.linspace(-span, span, n)
        Y = np.meshgrid(*([axis] * self.d), indexing="ij")
        r = np.sqrt(sum(y * y for y in Y))
        R = self.profile.sigma if R is None else R
        C, c = 0.0, math.inf
        for s in np.linspace(0.0, 2 * math.pi, PHASE_SAMPLES, endpoint=False):
            mag = np.sqrt(np.sum(self.profile.jet(Y, float(s), k) ** 2, axis=0))
            C = max(C, float(mag.max()))
            c = min(c, float(mag[r <= R].max()))
        return {"k": k, "C_k": C, "c_k": c, "R_k": R}


def _check_backward(t: float) -> None:
    if not t < 0:
        raise InputError(f"similarity times are negative, got t={t}")


def _edge_mask(grid: Grid) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    for a in range(grid.d):
        idx = [slice(None)] * grid.d
        idx[a] = 0
        mask[tuple(idx)] = True
    return mask


def sample(ansatz: SimilarityAnsatz, grid: Grid, t: float) -> Field:
    """u(., t) on the grid, after checking that the rescaled profile fits."""
    if grid.d != ansatz.d:
        raise InputError(f"grid dimension {grid.d} does not match profile d={ansatz.d}")
    lam = ansatz.length(t)
    R = ansatz.profile.support_radius
    if lam * R > 0.25 * grid.L:
        raise DomainError(
            f"rescaled support {lam * R:g} at t={t:g} exceeds a quarter of the box "
            f"({0.25 * grid.L:g})"
        )
    Y = [x / lam for x in grid.mesh()]
    s = -math.log(-t)
    return Field(grid, ansatz.amplitude(t) * ansatz.profile.jet(Y, s, 0))


@dataclass(frozen=True)
class TrajectoryCheck:
    t: float
    #: sup relative error of the spectral grad u against the rescaled analytic jet
    derivative_error: float
    #: max |u| on the box faces relative to sup |u|
    edge_ratio: float


@dataclass(frozen=True)
class SimilarityTrajectory:
    ansatz: SimilarityAnsatz
    grid: Grid
    times: tuple[float, ...]
    fields: tuple[Field, ...]
    checks: tuple[TrajectoryCheck, ...]

    def sup_norms(self, k: int) -> np.ndarray:
        return np.array([lp_norm(derivative_tensor(u, k), math.inf) for u in self.fields])


def build_trajectory(
    ansatz: SimilarityAnsatz, grid: Grid, t_list, tolerance: float = 0.01
) -> SimilarityTrajectory:
    """Sample the ansatz at every t and verify the derivative scaling law.

    The spectral gradient of each sample is compared with
    (-t)^-(zeta_t + zeta_x) (nabla_y U)(y, s); a relative discrepancy above
    ``tolerance`` means the grid does not resolve the profile.
    """
    times = tuple(float(t) for t in t_list)
    if not times:
        raise InputError("empty time list")
    fields, checks = [], []
    edge = _edge_mask(grid)
    for t in times:
        u = sample(ansatz, grid, t)
        lam = ansatz.length(t)
        exact = ansatz.amplitude(t, 1) * ansatz.profile.jet(
            [x / lam for x in grid.mesh()], -math.log(-t), 1
        )
        spectral = derivative_tensor(u, 1).values
        scale = float(np.sqrt(np.sum(exact**2, axis=0)).max())
        if scale > 0:
            err = float(np.sqrt(np.sum((spectral - exact) ** 2, axis=0)).max()) / scale
        else:
            err = float(np.abs(spectral).max())
        mag = u.magnitude()
        top = float(mag.max())
        edge_ratio = float(mag[edge].max()) / top if top > 0 else 0.0
        if err > tolerance:
            raise ResolutionError(
                f"derivative scaling violated by {err:.2e} at t={t:g}; refine the grid"
            )
        if not ansatz.profile.constant and edge_ratio > EDGE_DECAY:
            raise DomainError(f"profile has not decayed at the box edge at t={t:g}")
        fields.append(u)
        checks.append(TrajectoryCheck(t, err, edge_ratio))
    return SimilarityTrajectory(ansatz, grid, times, tuple(fields), tuple(checks))


def ball_norm_scaling(traj: SimilarityTrajectory, k: int, p, R: float) -> np.ndarray:
    """||nabla^k u(t)||_{L^p(B_{(-t)^zeta_x R})} along the trajectory."""
    out = []
    for t, u in zip(traj.times, traj.fields):
        rad = traj.ansatz.length(t) * R
        ball = sum(x * x for x in traj.grid.mesh()) <= rad * rad
        out.append(lp_norm_on(derivative_tensor(u, k), ball, p))
    return np.array(out)


def discrete_self_similarity_residual(ansatz: SimilarityAnsatz, grid: Grid, t: float) -> float:
    """Relative sup mismatch of u(x, t) = mu^zeta_t u(mu^zeta_x x, mu t), mu = e^(-2 pi).

    The second sample lives on the box shrunk by mu^zeta_x, so mu^zeta_x x
    is again a grid point and no interpolation is needed.
    """
    mu = math.exp(-2 * math.pi)
    u = sample(ansatz, grid, t)
    small = Grid(grid.d, grid.n, grid.L * mu**ansatz.zeta_x)
    v = sample(ansatz, small, mu * t)
    top = float(u.magnitude().max())
    if top == 0.0:
        raise DegenerateInputError("zero profile")
    diff = u.values - mu**ansatz.zeta_t * v.values
    return float(np.sqrt(np.sum(diff**2, axis=0)).max()) / top


def power_law_exponent(x, y) -> float:
    """Least-squares slope of log y against log x."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise InputError("power-law fit needs positive data")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# ---------------------------------------------------------------------------
# sparseness scales


def dyadic_radii(grid: Grid) -> list[float]:
    """Radii 2^m h with 2h <= ell <= L/2."""
    out, ell = [], 2.0 * grid.h
    while ell <= 0.5 * grid.L * (1 + 1e-12):
        out.append(ell)
        ell *= 2.0
    return out


def minimal_passing_scale(
    f: Field, epsilon: float, beta: float, steps: int = 30
) -> tuple[float, float]:
    """(smallest dyadic passing radius, bisected transition radius) in L^inf.

    Both are +inf when no radius up to L/2 certifies sparseness.
    """
    g = f.grid
    top = float(f.magnitude().max())
    if top == 0.0:
        raise DegenerateInputError("zero field")
    mask = superlevel_mask(f, beta * top)
    frac = LocalFraction(g, mask)
    radii = dyadic_radii(g)
    passing = [ell for ell in radii if frac(ell) <= epsilon]
    if not passing:
        return math.inf, math.inf
    hi = passing[0]
    lo = hi / 2.0
    if lo < 2.0 * g.h:
        return hi, hi
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if frac(mid) <= epsilon:
            hi = mid
        else:
            lo = mid
    return passing[0], hi


@dataclass(frozen=True)
class SparsenessScales:
    t: float
    k: int
    epsilon: float
    beta: float
    #: smallest passing radius, physical units
    upper: float
    upper_dyadic: float
    #: non-sparseness radius, physical units
    lower: float
    #: the same two scales in similarity units
    L_k: float
    ell_k: float
    upper_passes: bool
    lower_fails: bool

    def to_dict(self) -> dict:
        return {k: (v if not (isinstance(v, float) and math.isinf(v)) else "inf")
                for k, v in self.__dict__.items()}


def sparseness_scales(
    traj: SimilarityTrajectory, index: int, k: int, epsilon: float, beta: float
) -> SparsenessScales:
    """Upper (sparse) and lower (not sparse) L^inf scales of nabla^k u at one time."""
    t = traj.times[index]
    u = traj.fields[index]
    dk = derivative_tensor(u, k)
    if lp_norm(dk, math.inf) <= 1e-12 * max(lp_norm(u, math.inf), 1.0):
        raise DegenerateInputError(f"derivative of order {k} vanishes")
    upper_dyadic, upper = minimal_passing_scale(dk, epsilon, beta)
    passes = False
    if math.isfinite(upper):
        passes = certify(dk, SparsenessParams(epsilon, beta, upper, math.inf)).verdict
    low = nonsparse_scale(u, k, beta, epsilon)
    lam = traj.ansatz.length(t)
    return SparsenessScales(
        t=t,
        k=k,
        epsilon=epsilon,
        beta=beta,
        upper=upper,
        upper_dyadic=upper_dyadic,
        lower=low.ell,
        L_k=upper / lam,
        ell_k=low.ell / lam,
        upper_passes=passes,
        lower_fails=low.certificate is None or not low.certificate.verdict,
    )


# ---------------------------------------------------------------------------
# exponent region


@dataclass(frozen=True)
class HalfPlane:
    """a zeta_x + b zeta_t <= c (or < c when ``strict``)."""

    a: Fraction
    b: Fraction
    c: Fraction
    label: str
    strict: bool = False

    def normalized(self) -> tuple[Fraction, Fraction, Fraction, bool]:
        scale = max(abs(self.a), abs(self.b))
        if scale == 0:
            raise InputError(f"degenerate constraint {self.label}")
        return self.a / scale, self.b / scale, self.c / scale, self.strict

    def slack(self, point) -> Fraction:
        x, t = point
        return self.c - (self.a * x + self.b * t)

    def satisfied(self, point) -> bool:
        s = self.slack(point)
        return s > 0 if self.strict else s >= 0

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "a": str(self.a),
            "b": str(self.b),
            "c": str(self.c),
            "relation": "<" if self.strict else "<=",
            "closed": not self.strict,
        }


def _hp(a, b, c, label, strict=False) -> HalfPlane:
    return HalfPlane(Fraction(a), Fraction(b), Fraction(c), label, strict)


def finite_energy_constraint(d: int) -> HalfPlane:
    # zeta_t <= (d/2) zeta_x
    return _hp(-Fraction(d, 2), 1, 0, "finite kinetic energy")


def z_class_constraint(d: int, k: int) -> HalfPlane:
    """alpha_k >= alpha_bar_k, i.e. zeta_t + k zeta_x <= (k + d/2) zeta_x."""
    ab = alpha_bar(d, k)
    return _hp(k - 1 / ab, 1, 0, f"Z^({k}) critical class")


def energy_class_constraint(d: int) -> HalfPlane:
    # zeta_t < (d/2 - 1) zeta_x + 1/2
    return _hp(-(Fraction(d, 2) - 1), 1, Fraction(1, 2), "energy class", strict=True)


def linf_criterion_constraint() -> HalfPlane:
    # zeta_t >= 1/2
    return _hp(0, -1, Fraction(-1, 2), "L^inf blow-up rate")


def lorentz_criterion_constraint(d: int, p) -> HalfPlane:
    # zeta_t >= d zeta_x / p
    return _hp(Fraction(d) / Fraction(p), -1, 0, f"L^{p} non-vanishing")


CONSTRAINTS = ("finite_energy", "z_class", "energy_class", "linf_criterion", "lorentz_criterion")


def constraint_set(d: int, p, flags=None, k: int = 1) -> list[HalfPlane]:
    flags = CONSTRAINTS if flags is None else tuple(flags)
    unknown = set(flags) - set(CONSTRAINTS)
    if unknown:
        raise InputError(f"unknown constraints {sorted(unknown)}; choose from {CONSTRAINTS}")
    make = {
        "finite_energy": lambda: finite_energy_constraint(d),
        "z_class": lambda: z_class_constraint(d, k),
        "energy_class": lambda: energy_class_constraint(d),
        "linf_criterion": linf_criterion_constraint,
        "lorentz_criterion": lambda: lorentz_criterion_constraint(d, p),
    }
    return [make[f]() for f in flags]


def _intersect(h1: HalfPlane, h2: HalfPlane):
    det = h1.a * h2.b - h1.b * h2.a
    if det == 0:
        return None
    x = (h1.c * h2.b - h1.b * h2.c) / det
    t = (h1.a * h2.c - h1.c * h2.a) / det
    return (x, t)


@dataclass(frozen=True)
class Vertex:
    point: tuple[Fraction, Fraction]
    active: tuple[str, ...]
    closed: bool


@dataclass(frozen=True)
class Edge:
    start: int
    end: int
    label: str
    closed: bool


@dataclass(frozen=True)
class ExponentRegion:
    d: int
    p: Fraction
    constraints: tuple[HalfPlane, ...]
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    bounded: bool
    window: tuple | None

    @property
    def empty(self) -> bool:
        if not self.vertices:
            return True
        # a degenerate polygon survives only if its boundary is closed
        if len(self.vertices) < 3:
            return not all(v.closed for v in self.vertices) or not all(
                e.closed for e in self.edges
            )
        return False

    @property
    def points(self) -> list[tuple[Fraction, Fraction]]:
        return [v.point for v in self.vertices]

    def satisfies(self, point) -> bool:
        """Membership by direct evaluation of every constraint."""
        point = tuple(_rational(c) for c in point)
        return all(h.satisfied(point) for h in self.constraints)

    def contains(self, point) -> bool:
        """Membership from the polygon geometry alone (vertices and edge flags)."""
        point = tuple(_rational(c) for c in point)
        if self.empty:
            return False
        pts = self.points
        for i, v in enumerate(self.vertices):
            if v.point == point:
                return v.closed
        if len(pts) == 1:
            return False
        if len(pts) == 2:
            e = self.edges[0]
            return e.closed and _on_segment(pts[0], pts[1], point)
        for e in self.edges:
            cr = _cross(pts[e.start], pts[e.end], point)
            if cr < 0:
                return False
            if cr == 0 and _on_segment(pts[e.start], pts[e.end], point):
                return e.closed
        return True

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "p": str(self.p),
            "empty": self.empty,
            "bounded": self.bounded,
            "window": None if self.window is None else [str(w) for w in self.window],
            "constraints": [h.to_dict() for h in self.constraints],
            "vertices": [
                {
                    "zeta_x": str(v.point[0]),
                    "zeta_t": str(v.point[1]),
                    "zeta_x_float": float(v.point[0]),
                    "zeta_t_float": float(v.point[1]),
                    "active": list(v.active),
                    "closed": v.closed,
                }
                for v in self.vertices
            ],
            "edges": [e.__dict__ for e in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def vertices_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["zeta_x", "zeta_t", "zeta_x_float", "zeta_t_float", "closed", "active"])
        for v in self.vertices:
            w.writerow([
                str(v.point[0]), str(v.point[1]),
                repr(float(v.point[0])), repr(float(v.point[1])),
                int(v.closed), ";".join(v.active),
            ])
        return buf.getvalue()

    def polyline(self) -> str:
        """Closed polyline, one "zeta_x zeta_t" pair per line (gnuplot data format)."""
        pts = self.points
        if not pts:
            return "# empty region\n"
        lines = [f"{float(x)!r} {float(t)!r}" for x, t in pts + [pts[0]]]
        return "# zeta_x zeta_t\n" + "\n".join(lines) + "\n"


def _cross(o, a, b) -> Fraction:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _on_segment(a, b, q) -> bool:
    if _cross(a, b, q) != 0:
        return False
    return min(a[0], b[0]) <= q[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= q[1] <= max(
        a[1], b[1]
    )


def _window_planes(window) -> list[HalfPlane]:
    x0, x1, t0, t1 = (Fraction(w) for w in window)
    return [
        _hp(-1, 0, -x0, "window"),
        _hp(1, 0, x1, "window"),
        _hp(0, -1, -t0, "window"),
        _hp(0, 1, t1, "window"),
    ]


#: box used to detect unbounded regions when no window is given
_FAR = Fraction(10**6)


def admissible_region(d: int, p, constraint_flags=None, *, k: int = 1, window=None) -> ExponentRegion:
    """Intersect the chosen exponent constraints with zeta_x, zeta_t > 0.

    Vertices are exact rationals. Strict constraints still contribute their
    boundary vertices, which are then flagged open. ``window`` is
    (zeta_x_min, zeta_x_max, zeta_t_min, zeta_t_max).
    """
    if d < 2:
        raise InputError(f"the exponent region needs d >= 2, got {d}")
    p_r = Fraction(p) if not isinstance(p, float) else Fraction(p).limit_denominator(10**6)
    if p_r < d:
        raise InputError(f"need p >= d, got p={p}")
    planes = sorted(constraint_set(d, p_r, constraint_flags, k), key=lambda h: (h.label, h.normalized()))
    positivity = [_hp(-1, 0, 0, "zeta_x > 0", strict=True), _hp(0, -1, 0, "zeta_t > 0", strict=True)]
    clip = _window_planes(window) if window is not None else _window_planes((-_FAR, _FAR, -_FAR, _FAR))
    every = planes + positivity + clip
    # closed relaxation; dedupe lines so concurrent constraints share one vertex
    found: dict[tuple, set] = {}
    for i in range(len(every)):
        for j in range(i + 1, len(every)):
            pt = _intersect(every[i], every[j])
            if pt is None:
                continue
            if all(h.slack(pt) >= 0 for h in every):
                found.setdefault(pt, set())
    vertices = _order(list(found))
    active = []
    for pt in vertices:
        labels = tuple(sorted({h.label for h in every if h.slack(pt) == 0}))
        closed = all(not h.strict for h in every if h.slack(pt) == 0)
        active.append(Vertex(pt, labels, closed))
    edges = []
    n = len(vertices)
    if n >= 2:
        for i in range(n if n > 2 else 1):
            a, b = vertices[i], vertices[(i + 1) % n]
            on = [h for h in every if h.slack(a) == 0 and h.slack(b) == 0]
            on.sort(key=lambda h: (h.label, h.normalized()))
            label = on[0].label if on else "?"
            edges.append(Edge(i, (i + 1) % n, label, all(not h.strict for h in on)))
    bounded = not any("window" in v.active for v in active) if window is None else True
    if window is None and not bounded:
        # unbounded without an explicit window: keep only genuine vertices
        keep = [v for v in active if "window" not in v.active]
        active, edges = keep, []
    return ExponentRegion(
        d=d,
        p=p_r,
        constraints=tuple(planes + positivity),
        vertices=tuple(active),
        edges=tuple(edges),
        bounded=bounded,
        window=None if window is None else tuple(Fraction(w) for w in window),
    )


def _order(points: list) -> list:
    """Counter-clockwise order around the centroid, starting from the lowest-left point."""
    if len(points) <= 2:
        return sorted(points)
    cx = sum(x for x, _ in points) / len(points)
    ct = sum(t for _, t in points) / len(points)
    ordered = sorted(points, key=lambda q: math.atan2(float(q[1] - ct), float(q[0] - cx)))
    start = min(range(len(ordered)), key=lambda i: (ordered[i][1], ordered[i][0]))
    return ordered[start:] + ordered[:start]
