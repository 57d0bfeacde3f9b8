"""Metrics of revolution on S^2: Clairaut quadrature and geodesic integration.

The metric is ``dx^2 + rho(x)^2 dtheta^2`` for ``x in [0, L]``.  A unit-speed
geodesic making angle ``phi`` with the meridian keeps ``c = rho sin(phi)``
constant and oscillates between the latitudes where ``rho = |c|``.  Over one
oscillation it advances by

    delta_theta = 2 int c / (rho sqrt(rho^2 - c^2)) dx
    arc_length  = 2 int rho / sqrt(rho^2 - c^2) dx

and it closes when ``delta_theta / 2 pi`` is rational.  The closure of the
geodesic flow on the unit tangent bundle is a contact form with Euler
number 2 whose volume is ``2 pi`` times the area, so the sharp bound
``sys^2 <= Vol / 2`` reads ``sys^2 <= pi * area``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

from ._events import IntegrationError, integrate_to_event
from .measures import EQUALITY_RTOL, InequalityReport, QuadratureError, TheoremViolation
from .profile_core import BranchFunction, ProfileFormatError

METRIC_FORMAT = "systolica-revmetric/1"
POLE_TOL = 1e-9
QUAD_EPSABS = 1e-11
QUAD_ERR_MAX = 1e-9
GEODESIC_CSV_COLUMNS = ("arclength", "x", "theta", "phi")


class MetricError(ValueError):
    pass


class SingularLevelError(MetricError):
    pass


class GeodesicIntegrationError(IntegrationError):
    pass


@dataclass(frozen=True)
class SineSeries:
    """``rho(x) = sum_n b_n sin(n pi x / L)``, n = 1, 2, ...

    Odd-index-only series are symmetric about the equator and close
    smoothly at both poles once ``rho'(0) = 1``.
    """

    L: float
    coefficients: tuple

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(b) for b in self.coefficients))
        if not self.L > 0 or not self.coefficients:
            raise MetricError("need L > 0 and at least one coefficient")

    @classmethod
    def normalized(cls, L: float, coefficients: Sequence[float]) -> "SineSeries":
        """Rescale the coefficients so that ``rho'(0) = 1``."""
        raw = cls(L, tuple(coefficients))
        return cls(L, tuple(b / raw.derivative(0.0) for b in raw.coefficients))

    def _modes(self):
        n = np.arange(1, len(self.coefficients) + 1)
        return n * math.pi / self.L, np.asarray(self.coefficients)

    def value(self, x):
        om, b = self._modes()
        return np.sin(np.multiply.outer(np.asarray(x, dtype=float), om)) @ b

    def derivative(self, x):
        om, b = self._modes()
        return np.cos(np.multiply.outer(np.asarray(x, dtype=float), om)) @ (b * om)

    def second_derivative(self, x):
        om, b = self._modes()
        return -np.sin(np.multiply.outer(np.asarray(x, dtype=float), om)) @ (b * om * om)

    def difference(self, x: float, y: float) -> float:
        """``rho(x) - rho(y)`` without cancellation (sum-to-product)."""
        om, b = self._modes()
        return float(np.sum(b * 2 * np.cos(om * (x + y) / 2) * np.sin(om * (x - y) / 2)))

    def integral(self) -> float:
        om, b = self._modes()
        n = np.arange(1, len(b) + 1)
        return float(np.sum(b / om * (1 - np.cos(n * math.pi))))

    def scaled(self, c: float) -> "SineSeries":
        return SineSeries(c * self.L, tuple(c * b for b in self.coefficients))

    def to_dict(self) -> dict:
        return {"kind": "sine", "L": self.L, "coefficients": list(self.coefficients)}


class _BranchRho:
    """Adapter giving a :class:`BranchFunction` the ``rho`` interface."""

    def __init__(self, br: BranchFunction):
        self.br = br

    def value(self, x):
        return self.br.value(x)

    def derivative(self, x):
        return self.br.derivative(x, side="left" if np.ndim(x) == 0 and x == self.br.hi else "right")

    def second_derivative(self, x):
        return self.br.second_derivative(x)

    def integral(self) -> float:
        return self.br.integral()

    def scaled(self, c: float):
        return _BranchRho(self.br.scaled(c))

    def to_dict(self) -> dict:
        return self.br.to_dict()


@dataclass(frozen=True)
class RevolutionMetric:
    L: float
    rho: object
    grid: int = 2048

    def __post_init__(self):
        if isinstance(self.rho, BranchFunction):
            object.__setattr__(self, "rho", _BranchRho(self.rho))
        if not self.L > 0:
            raise MetricError("L must be positive")
        r = self.rho
        checks = {
            "rho(0) = 0": abs(float(r.value(0.0))),
            "rho(L) = 0": abs(float(r.value(self.L))),
            "rho'(0) = 1": abs(float(r.derivative(0.0)) - 1),
            "rho'(L) = -1": abs(float(r.derivative(self.L)) + 1),
        }
        bad = [name for name, err in checks.items() if err > POLE_TOL]
        if bad:
            raise MetricError("pole closure fails: " + ", ".join(bad))
        xs = np.linspace(0, self.L, self.grid + 1)[1:-1]
        if not np.all(r.value(xs) > 0):
            raise MetricError("rho must be positive away from the poles")

    # --- basic geometry ---------------------------------------------------
    def area(self) -> float:
        return 2 * math.pi * self.rho.integral()

    def scaled(self, c: float) -> "RevolutionMetric":
        return RevolutionMetric(c * self.L, self.rho.scaled(c), self.grid)

    def critical_points(self) -> list[float]:
        """Interior zeros of ``rho'``, located by sign changes on the grid."""
        xs = np.linspace(0, self.L, self.grid + 1)
        d = self.rho.derivative(xs)
        out = []
        for i in np.flatnonzero(np.sign(d[:-1]) != np.sign(d[1:])):
            a, b = xs[i], xs[i + 1]
            if d[i] == 0:
                out.append(float(a))
                continue
            if d[i + 1] == 0:
                continue
            out.append(float(brentq(lambda x: float(self.rho.derivative(x)), a, b, xtol=1e-15)))
        return sorted(set(out))

    def equator(self) -> tuple[float, float]:
        """Latitude and radius of the unique maximum of ``rho``."""
        return self._equator

    @cached_property
    def _equator(self) -> tuple[float, float]:
        crit = self.critical_points()
        if len(crit) != 1:
            raise MetricError(f"expected a single critical latitude, found {len(crit)}")
        x = crit[0]
        return x, float(self.rho.value(x))

    # --- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {"format": METRIC_FORMAT, "L": self.L, "rho": self.rho.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "RevolutionMetric":
        if not isinstance(d, dict) or d.get("format") != METRIC_FORMAT:
            raise ProfileFormatError(f"expected format tag {METRIC_FORMAT!r}")
        try:
            L = float(d["L"])
            rd = d["rho"]
            if rd.get("kind") == "sine":
                rho = SineSeries(float(rd.get("L", L)), tuple(rd["coefficients"]))
            else:
                rho = BranchFunction.from_dict(rd)
        except (KeyError, TypeError, AttributeError) as exc:
            raise ProfileFormatError(f"malformed metric: {exc}") from exc
        return cls(L, rho)


def round_sphere() -> RevolutionMetric:
    return RevolutionMetric(math.pi, SineSeries(math.pi, (1.0,)))


def save_metric(metric: RevolutionMetric, path) -> None:
    Path(path).write_text(json.dumps(metric.to_dict(), indent=2) + "\n")


def load_metric(path) -> RevolutionMetric:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ProfileFormatError(f"malformed JSON: {exc}") from exc
    return RevolutionMetric.from_dict(d)


@dataclass
class ClairautData:
    c: float
    x_minus: float
    x_plus: float
    delta_theta: float
    arc_length: float

    @property
    def rotation(self) -> float:
        """``delta_theta / 2 pi``."""
        return self.delta_theta / (2 * math.pi)


def _oscillation_integral(rho, xl: float, xr: float, c: float, kind: str) -> float:
    """``2 int_{xl}^{xr} g dx`` between the turning latitudes ``rho = |c|``.

    With ``x = xl + 2h sin^2(chi)``, ``h = (xr - xl)/2``, the factor
    ``sqrt((x - xl)(xr - x))`` cancels against the Jacobian and the
    integrand ``2 g_0 / sqrt(G (rho + |c|))`` is smooth on ``[0, pi/2]``, where
    ``G = (rho - |c|) / ((x - xl)(xr - x))``.  Near each turning point the
    numerator of G is replaced by its second-order Taylor expansion; elsewhere
    it is ``rho(x) - rho(x_turn)``, taken from ``rho.difference`` when the
    profile offers a cancellation-free form.  The turning points solve
    ``rho = |c|`` to a few ulps, which shifts the level by a constant.
    """
    ac = abs(c)
    h = 0.5 * (xr - xl)
    dl1, dl2 = float(rho.derivative(xl)), float(rho.second_derivative(xl))
    dr1, dr2 = float(rho.derivative(xr)), float(rho.second_derivative(xr))
    near = 1e-4 * h
    diff = getattr(rho, "difference", None) or (lambda a, b: float(rho.value(a)) - float(rho.value(b)))

    def integrand(chi):
        sn, cs = math.sin(chi), math.cos(chi)
        dl, dr = 2 * h * sn * sn, 2 * h * cs * cs
        if dl < near:
            num = dl1 * dl + 0.5 * dl2 * dl * dl
        elif dr < near:
            num = -dr1 * dr + 0.5 * dr2 * dr * dr
        elif dl <= dr:
            num = diff(xl + dl, xl)
        else:
            num = diff(xr - dr, xr)
        rv = ac + num
        core = c / rv if kind == "theta" else rv
        return 2.0 * core / math.sqrt(num / (dl * dr) * (rv + ac))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(integrand, 0.0, 0.5 * math.pi, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=400)
    if err > QUAD_ERR_MAX:
        raise QuadratureError(f"Clairaut quadrature error {err:.2e} at c={c}")
    return 2.0 * val


def clairaut_data(metric: RevolutionMetric, c: float) -> ClairautData:
    """Turning latitudes and per-oscillation advance at Clairaut level c."""
    xm, rm = metric.equator()
    ac = abs(c)
    if not 0 < ac < rm:
        raise MetricError(f"|c| must lie in (0, {rm})")
    rho = metric.rho

    def f(x):
        return float(rho.value(x)) - ac

    xl = brentq(f, 0.0, xm, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    xr = brentq(f, xm, metric.L, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    for x in (xl, xr):
        if abs(float(rho.derivative(x))) < 1e-12:
            raise SingularLevelError(f"turning point {x} is degenerate")
    dth = _oscillation_integral(rho, xl, xr, c, "theta")
    arc = _oscillation_integral(rho, xl, xr, c, "arc")
    return ClairautData(float(c), float(xl), float(xr), dth, arc)


def _level_grid(rm: float, n: int) -> np.ndarray:
    # Chebyshev-like clustering at both ends of (0, rm)
    u = (np.arange(n) + 0.5) / n
    return rm * 0.5 * (1 - np.cos(math.pi * u))


@dataclass
class ClosedGeodesic:
    c: float
    p: int
    q: int
    length: float
    kind: str  # "level", "equator" or "meridian"
    plateau: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def closed_geodesics(metric: RevolutionMetric, q_max: int, levels: int = 256,
                     max_length: float | None = None) -> list[ClosedGeodesic]:
    """Closed geodesics with at most ``q_max`` oscillations, plus equator and meridians.

    The rotation ``delta_theta / 2 pi`` is tabulated on a level grid; each
    reduced ``p/q`` it crosses is solved for by Brent's method.  A rotation
    constant to 1e-9 across the grid is reported once, as a plateau.  With
    ``max_length``, brackets whose lengths (endpoint arc lengths times q,
    less 1%) already exceed it are skipped.
    """
    xm, rm = metric.equator()
    cs = _level_grid(rm, levels)
    data = [clairaut_data(metric, c) for c in cs]
    nu = np.array([d.rotation for d in data])
    arcs = np.array([d.arc_length for d in data])
    out = [ClosedGeodesic(0.0, 0, 1, 2 * metric.L, "meridian"),
           ClosedGeodesic(rm, 1, 1, 2 * math.pi * rm, "equator")]
    if np.ptp(nu) < 1e-9:
        fr = Fraction(float(nu.mean())).limit_denominator(q_max)
        if fr.denominator <= q_max and abs(float(fr) - nu.mean()) < 1e-9:
            mid = len(cs) // 2
            out.append(ClosedGeodesic(float(cs[mid]), fr.numerator, fr.denominator,
                                      fr.denominator * data[mid].arc_length, "level", plateau=True))
        return sorted(out, key=lambda g: g.length)
    lo, hi = float(nu.min()), float(nu.max())
    for q in range(1, q_max + 1):
        for p in range(math.ceil(lo * q), math.floor(hi * q) + 1):
            if math.gcd(p, q) != 1:
                continue
            target = p / q
            g = nu - target
            for i in np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0):
                if max_length is not None and 0.99 * q * min(arcs[i], arcs[i + 1]) > max_length:
                    continue
                c = brentq(lambda cc: clairaut_data(metric, cc).rotation - target, cs[i], cs[i + 1], xtol=1e-14)
                out.append(ClosedGeodesic(float(c), p, q, q * clairaut_data(metric, c).arc_length, "level"))
    return sorted(out, key=lambda g: g.length)


@dataclass
class GeodesicTrajectory:
    s: np.ndarray
    x: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    rho: np.ndarray = field(repr=False)

    @property
    def clairaut(self) -> np.ndarray:
        return self.rho * np.sin(self.phi)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(GEODESIC_CSV_COLUMNS)
        for row in zip(self.s, self.x, self.theta, self.phi):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def _geodesic_rhs(metric: RevolutionMetric):
    rho = metric.rho

    def rhs(_s, y):
        x, _th, ph = y
        r = float(rho.value(min(max(x, 0.0), metric.L)))
        dr = float(rho.derivative(min(max(x, 0.0), metric.L)))
        sp = math.sin(ph)
        return np.array([math.cos(ph), sp / r, -dr * sp / r])

    return rhs


def _meridian(metric: RevolutionMetric, x0, th0, phi0, s_out):
    """Closed form for ``c = 0``: x moves linearly, reflecting at the poles where theta jumps by pi."""
    L = metric.L
    down = math.cos(phi0) < 0
    u = (x0 if not down else 2 * L - x0) + s_out  # position on the doubled circle of length 2L
    u = np.mod(u, 2 * L)
    x = np.where(u <= L, u, 2 * L - u)
    # number of pole passages so far
    start = x0 if not down else 2 * L - x0
    passes = np.floor((start + s_out) / L) - math.floor(start / L)
    theta = th0 + math.pi * passes
    phi = np.where(u <= L, 0.0, math.pi)
    return x, theta, phi


def integrate_geodesic(metric: RevolutionMetric, initial: tuple[float, float, float], duration: float,
                       rtol: float = 1e-10, atol: float = 1e-12, samples: int = 1000) -> GeodesicTrajectory:
    """Unit-speed geodesic from ``(x, theta, phi)`` over arclength ``duration``.

    Meridians (``sin phi = 0``) use the closed form through the poles; every
    other geodesic stays in the open band between its turning latitudes.
    """
    from scipy.integrate import solve_ivp

    x0, th0, ph0 = map(float, initial)
    s_out = np.linspace(0.0, duration, samples + 1)
    if not 0 < x0 < metric.L:
        raise MetricError("start must be away from the poles")
    c = float(metric.rho.value(x0)) * math.sin(ph0)
    if abs(c) == 0.0:
        x, th, ph = _meridian(metric, x0, th0, ph0, s_out)
        return GeodesicTrajectory(s_out, x, th, ph, metric.rho.value(np.clip(x, 0, metric.L)))
    sol = solve_ivp(_geodesic_rhs(metric), (0.0, duration), [x0, th0, ph0], method="DOP853", rtol=rtol, atol=atol,
                    t_eval=s_out)
    if not sol.success:
        xmin = float(np.min(sol.y[0])) if sol.y.size else x0
        raise GeodesicIntegrationError(f"{sol.message}; c={c:.3e}, closest approach to a pole x={xmin:.3e}")
    x, th, ph = sol.y
    return GeodesicTrajectory(sol.t, x, th, ph, metric.rho.value(x))


def geodesic_period_map(metric: RevolutionMetric, c: float, oscillations: int = 1,
                        rtol: float = 1e-11, atol: float = 1e-13) -> tuple[float, float]:
    """Arclength and theta advance over ``oscillations`` full oscillations, by ODE.

    Starts on the equator moving toward larger x and stops at the
    ``oscillations``-th upward return to the equator.
    """
    xm, rm = metric.equator()
    if not 0 < abs(c) < rm:
        raise MetricError(f"|c| must lie in (0, {rm})")
    ph0 = math.asin(c / rm)

    def gap(y):
        return (y[0] - xm) if math.cos(y[2]) > 0 else -1.0

    hit = integrate_to_event(_geodesic_rhs(metric), [xm, 0.0, ph0], gap, rtol=rtol, atol=atol,
                             skip=oscillations - 1)
    return hit.time, float(hit.state[1])


@dataclass
class ShootingResult:
    p: int
    q: int
    c: float
    length: float
    closure_error: float
    iterations: int


def shoot_closed_geodesic(metric: RevolutionMetric, p: int, q: int, c_guess: float, tol: float = 1e-12,
                          max_iter: int = 30) -> ShootingResult:
    """Solve ``theta advance over q oscillations = 2 pi p`` by secant iteration on ODE runs."""
    _, rm = metric.equator()

    def miss(c):
        s_len, th = geodesic_period_map(metric, c, q)
        return th - 2 * math.pi * p, s_len

    c0 = c_guess
    f0, len0 = miss(c0)
    it = 0
    if abs(f0) > tol:
        c1 = min(c0 * (1 + 1e-4), 0.5 * (c0 + rm))
        f1, len1 = miss(c1)
        while abs(f1) > tol and it < max_iter:
            it += 1
            if f1 == f0:
                break
            c0, c1 = c1, c1 - f1 * (c1 - c0) / (f1 - f0)
            f0 = f1
            f1, len1 = miss(c1)
        c0, f0, len0 = c1, f1, len1
    return ShootingResult(p, q, float(c0), float(len0), float(abs(f0)), it)


@dataclass
class GeodesicSystole:
    value: float
    witness: ClosedGeodesic
    q_max_used: int
    certification_bound: float


def geodesic_systole(metric: RevolutionMetric, q_start: int = 4, q_cap: int = 256, levels: int = 256) -> GeodesicSystole:
    """Shortest closed geodesic, certified by ``q * min arc_length``.

    Any level geodesic with more than ``q_max`` oscillations is longer than
    ``q_max`` times the smallest single-oscillation length (with a 1% safety
    margin), so ``q_max`` is doubled until that bound exceeds the candidate.
    """
    _, rm = metric.equator()
    arc_min = 0.99 * min(clairaut_data(metric, c).arc_length for c in _level_grid(rm, levels))
    q = q_start
    while True:
        geo = closed_geodesics(metric, q, levels, max_length=min(2 * metric.L, 2 * math.pi * rm))
        best = geo[0]
        if best.length <= q * arc_min or q >= q_cap:
            if best.length > q * arc_min:
                raise MetricError(f"systole not certified up to q={q_cap}")
            return GeodesicSystole(best.length, best, q, q * arc_min)
        q *= 2


def finsler_corollary_check(metric: RevolutionMetric, q_max: int = 4, levels: int = 256,
                            tol: float = 1e-9) -> InequalityReport:
    """``sys^2 <= pi * area`` for a Riemannian metric of revolution.

    The report's ``volume`` is ``pi * area`` so that ``ratio = sys^2 / volume``
    is compared with 1.  Equality must come with a constant rotation 1 on
    every sampled level.
    """
    sysr = geodesic_systole(metric, q_start=q_max, levels=levels)
    area = metric.area()
    vol = math.pi * area
    ratio = sysr.value**2 / vol
    margin = 1.0 - ratio
    equal = abs(margin) <= EQUALITY_RTOL
    _, rm = metric.equator()
    nus = [clairaut_data(metric, c).rotation for c in _level_grid(rm, 32)]
    zoll_dev = max(abs(v - 1) for v in nus)
    rep = InequalityReport(2, sysr.value, vol, ratio, 1.0, margin, equal, "revolution",
                           {"area": area, "contact_volume": 2 * math.pi * area, "witness": sysr.witness.kind,
                            "q_max_used": sysr.q_max_used, "zoll_deviation": zoll_dev})
    if margin < -tol:
        raise TheoremViolation(f"sys^2 / (pi area) = {ratio} exceeds 1")
    if equal and zoll_dev > 1e-6:
        raise TheoremViolation("equality without constant rotation 1")
    return rep
