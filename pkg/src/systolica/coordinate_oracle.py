"""Explicit contact form on two glued solid tori, rebuilt from a profile.

Chart ``+`` covers ``k in (-delta, k_plus]`` with ``k = k_plus - r^2`` and
``alpha = k dt + C(k) ds``; chart ``-`` covers ``k in [k_minus, delta)``
with ``k = k_minus + r^2`` and ``alpha = k dt - D(k) ds``.  Here

    C(k) = J(k)           for k >= 0,   J(k) - e k   for k < 0
    D(k) = J(k)           for k <= 0,   J(k) + e k   for k > 0

and the charts are glued by ``(r, s, t) -> (sqrt(k_plus - k_minus - r^2), -s, t - e s)``.
The jump ``J'(0+) - J'(0-) = -e`` is exactly what makes C and D of class
C^1 across ``k = 0``.

Reeb field.  Writing ``alpha = k dt + Q(k) ds`` in either chart, the
equations ``alpha(R) = 1`` and ``d alpha(R, .) = 0`` with ``R = a d_s + b d_t``
give ``a Q + b k = 1`` and ``a Q' + b = 0``, hence

    a = 1 / (Q - k Q'),    b = -Q' a.

In chart ``+`` (k > 0) this is ``a = 1/tau``, ``b = -J'/tau``; in chart
``-`` (k < 0) it is ``a = -1/tau``, ``b = -J'/tau``.  The radial component
vanishes.  So a point at level k returns to its section after time ``tau``
and has moved ``-J'`` along the fibre.

The numerical side never uses these closed forms: it integrates the field
spanning the kernel of ``d alpha`` in Cartesian coordinates
``x + iy = r exp(2 pi i s)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from ._events import IntegrationError, integrate_to_event
from .profile_core import Profile, ProfileError, validate

CHARTS = ("+", "-")
EVENT_TOL = 1e-12
TRAJECTORY_CSV_COLUMNS = ("lambda", "r", "s", "t")


class ChartConstructionError(ProfileError):
    pass


@dataclass(frozen=True)
class ChartContactForm:
    """Contact form in the two solid-torus charts. Build with :func:`build_chart_form`."""

    profile: Profile
    delta: float

    # --- chart geometry -------------------------------------------------
    def sign(self, chart: str) -> float:
        """``dk / d(r^2)`` in the chart."""
        return -1.0 if chart == "+" else 1.0

    def k_range(self, chart: str) -> tuple[float, float]:
        p = self.profile
        return (-self.delta, p.k_plus) if chart == "+" else (p.k_minus, self.delta)

    def core_level(self, chart: str) -> float:
        return self.profile.k_plus if chart == "+" else self.profile.k_minus

    def k_of_rho(self, chart: str, rho):
        return self.core_level(chart) + self.sign(chart) * np.asarray(rho, dtype=float)

    def r_of_k(self, chart: str, k: float) -> float:
        rho = (k - self.core_level(chart)) * self.sign(chart)
        if rho < 0:
            raise ValueError(f"level {k} is outside chart {chart}")
        return math.sqrt(rho)

    def r_max(self, chart: str) -> float:
        lo, hi = self.k_range(chart)
        return self.r_of_k(chart, lo if chart == "+" else hi)

    def chart_for(self, k: float) -> str:
        return "+" if k > 0 else "-"

    def core_periods(self) -> tuple[float, float]:
        """Periods of the two core circles (``alpha = k_core dt`` there)."""
        return abs(self.profile.k_plus), abs(self.profile.k_minus)

    # --- form coefficients ----------------------------------------------
    def coefficients(self, chart: str, k):
        """``(Q, dQ/dk)`` with ``alpha = k dt + Q ds`` in the chart."""
        p = self.profile
        k = np.asarray(k, dtype=float)
        e = p.e
        if chart == "+":
            neg = k < 0
            kn, kp = np.minimum(k, 0.0), np.maximum(k, 0.0)
            q = np.where(neg, p.j_neg.value(kn) - e * kn, p.j_pos.value(kp))
            dq = np.where(neg, p.j_neg.derivative(kn, side="left") - e, p.j_pos.derivative(kp, side="right"))
            return q, dq
        pos = k > 0
        kn, kp = np.minimum(k, 0.0), np.maximum(k, 0.0)
        d = np.where(pos, p.j_pos.value(kp) + e * kp, p.j_neg.value(kn))
        dd = np.where(pos, p.j_pos.derivative(kp, side="right") + e, p.j_neg.derivative(kn, side="left"))
        return -d, -dd

    def contact_function(self, chart: str, r):
        """``P Q_r - Q P_r`` with ``P = k``; equals ``2 r tau`` when contact."""
        r = np.asarray(r, dtype=float)
        k = self.k_of_rho(chart, r * r)
        q, dq = self.coefficients(chart, k)
        kr = 2 * r * self.sign(chart)
        return k * dq * kr - q * kr

    def analytic_rates(self, k: float, chart: str | None = None) -> tuple[float, float, float]:
        """Reeb components ``(dr, ds, dt)`` per unit time at level k."""
        chart = chart or self.chart_for(k)
        q, dq = self.coefficients(chart, k)
        a = 1.0 / float(q - k * dq)
        return 0.0, a, float(-dq * a)

    # --- gluing ---------------------------------------------------------
    def glue(self, r, s, t):
        """Map a chart ``+`` point of the overlap to chart ``-``."""
        p = self.profile
        big = np.sqrt(p.k_plus - p.k_minus - np.asarray(r, dtype=float) ** 2)
        return big, -np.asarray(s), np.asarray(t) - p.e * np.asarray(s)

    def form_plus(self, r):
        """Components ``(dr, ds, dt)`` of ``alpha`` at chart ``+`` radius r."""
        k = self.k_of_rho("+", np.asarray(r, dtype=float) ** 2)
        q, _ = self.coefficients("+", k)
        return np.zeros_like(k), q, k

    def pullback_minus(self, r, s=0.0, t=0.0):
        """Components of ``g^* alpha_-`` at chart ``+`` point ``(r, s, t)``."""
        big, _, _ = self.glue(r, s, t)
        k = self.k_of_rho("-", big**2)
        q, _ = self.coefficients("-", k)
        # g^*(k dt' + q ds') with dt' = dt - e ds, ds' = -ds
        return np.zeros_like(k), -q - self.profile.e * k, k

    # --- Cartesian picture ----------------------------------------------
    def cartesian_terms(self, chart: str, x: float, y: float):
        """Cartesian coefficients of ``alpha`` and ``d alpha`` at ``(x, y)``.

        Returns ``(ax, ay, at, wxy, wxt, wyt)``.
        """
        rho = x * x + y * y
        sg = self.sign(chart)
        k = self.core_level(chart) + sg * rho
        q, dq = self.coefficients(chart, k)
        q, dq = float(q), float(dq)
        amp = q / (2 * math.pi * rho)
        return -y * amp, x * amp, k, dq * sg / math.pi, 2 * x * sg, 2 * y * sg

    def reeb_cartesian(self, chart: str, x: float, y: float) -> tuple[float, float, float]:
        ax, ay, at, wxy, wxt, wyt = self.cartesian_terms(chart, x, y)
        v = (wyt, -wxt, wxy)
        norm = ax * v[0] + ay * v[1] + at * v[2]
        return v[0] / norm, v[1] / norm, v[2] / norm

    def volume_density(self, chart: str, x: float, y: float) -> float:
        """Coefficient of ``dx dy dt`` in ``alpha ^ d alpha``."""
        ax, ay, at, wxy, wxt, wyt = self.cartesian_terms(chart, x, y)
        return ax * wyt - ay * wxt + at * wxy


def build_chart_form(profile: Profile, delta: float | None = None, samples: int = 2048) -> ChartContactForm:
    """Build the glued chart form; the contact condition is checked on a radial grid.

    ``delta`` defaults to a quarter of ``min(k_plus, -k_minus)``.
    """
    half = min(profile.k_plus, -profile.k_minus) / 2
    if delta is None:
        delta = half / 2
    if not 0 < delta < half:
        raise ChartConstructionError(f"delta must lie in (0, {half})")
    form = ChartContactForm(profile, float(delta))
    for chart in CHARTS:
        r = np.linspace(0.0, form.r_max(chart), samples + 1)[1:]
        cf = form.contact_function(chart, r)
        bad = np.flatnonzero(~(cf > 0))
        if bad.size:
            k_bad = float(form.k_of_rho(chart, r[bad[0]] ** 2))
            raise ChartConstructionError(f"contact condition fails in chart {chart} near k={k_bad:.6g}")
    report = validate(profile)
    if not report.ok:
        raise ChartConstructionError("profile fails invariants: " + ", ".join(report.failed()))
    return form


@dataclass
class ReebSample:
    chart: str
    r: float
    s0: float
    t0: float
    k: float
    return_time: float
    rotation: float
    steps: int
    trajectory: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("trajectory")
        return d


def integrate_return(form: ChartContactForm, k: float, *, s0: float = 0.0, t0: float = 0.0,
                     chart: str | None = None, rtol: float = 1e-10, atol: float = 1e-13,
                     max_steps: int = 200_000, core_margin: float = 1e-6, record: bool = False) -> ReebSample:
    """Follow the Reeb flow from level k until it is back on ``{s = s0}``.

    The state is ``(x, y, t, s)`` with ``s`` unwrapped.  Steps are taken by
    DOP853; the crossing is isolated by bisection on the step's dense output.
    """
    p = form.profile
    if k == 0 or not p.k_minus + core_margin < k < p.k_plus - core_margin:
        raise ValueError(f"level {k} must be nonzero and at least {core_margin} away from the cores")
    chart = chart or form.chart_for(k)
    lo, hi = form.k_range(chart)
    if not lo < k < hi:
        raise ValueError(f"level {k} is not covered by chart {chart}")
    r = form.r_of_k(chart, k)
    ang = 2 * math.pi * s0

    def rhs(_lam, z):
        x, y = z[0], z[1]
        rx, ry, rt = form.reeb_cartesian(chart, x, y)
        return np.array([rx, ry, rt, (x * ry - y * rx) / (2 * math.pi * (x * x + y * y))])

    z0 = np.array([r * math.cos(ang), r * math.sin(ang), t0, s0])
    direction = math.copysign(1.0, rhs(0.0, z0)[3])

    def gap(z):
        return direction * (z[3] - s0) - 1.0

    hit = integrate_to_event(rhs, z0, gap, rtol=rtol, atol=atol, max_steps=max_steps, time_tol=EVENT_TOL,
                             record=record)
    traj = np.array(hit.rows) if record else None
    lam, z = hit.time, hit.state
    return ReebSample(chart, r, s0, t0, float(k), lam, float(z[2] - t0), hit.steps, traj)


def trajectory_csv(sample: ReebSample) -> str:
    """``(lambda, r, s, t)`` rows of a recorded integration."""
    if sample.trajectory is None:
        raise ValueError("sample was integrated without record=True")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_CSV_COLUMNS)
    for lam, x, y, t, s in sample.trajectory:
        w.writerow([repr(float(lam)), repr(math.hypot(x, y)), repr(float(s)), repr(float(t))])
    return buf.getvalue()


def _rel(meas, ref, floor=1e-8):
    return abs(meas - ref) / max(abs(ref), floor)


@dataclass
class RoundtripReport:
    e: int
    sample_count: int
    max_rel_return_time_error: float
    max_rel_rotation_error: float
    reconstruction_sup_error: float
    rotation_jump: float
    rotation_jump_raw: float
    jump_error: float
    samples: list = field(default_factory=list)

    def to_dict(self, with_samples: bool = False) -> dict:
        d = asdict(self)
        d["samples"] = [s.to_dict() for s in self.samples] if with_samples else len(self.samples)
        return d

    def passed(self, tol: float = 1e-6, jump_tol: float = 5e-3) -> bool:
        return (self.max_rel_return_time_error <= tol and self.max_rel_rotation_error <= tol
                and self.reconstruction_sup_error <= tol and self.jump_error <= jump_tol)


def audit_levels(profile: Profile, count: int, seed: int | None = None) -> np.ndarray:
    """Stratified levels in ``(k_minus, k_plus)``, or uniform ones if a seed is given."""
    lo, hi = profile.k_minus, profile.k_plus
    if seed is None:
        ks = lo + (np.arange(count) + 0.5) / count * (hi - lo)
    else:
        ks = np.sort(np.random.default_rng(seed).uniform(lo, hi, count))
    eps = 1e-3 * (hi - lo)
    ks = np.clip(ks, lo + eps, hi - eps)
    ks[np.abs(ks) < eps] = eps
    return ks


_GL3 = (np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)]), np.array([5 / 9, 8 / 9, 5 / 9]))


def rotation_jump(form: ChartContactForm, h: float = 1e-3) -> tuple[float, float]:
    """Measured ``w(0+) - w(0-)``: linear extrapolation from ``+-h, +-2h``, and the raw value at ``+-h``."""
    w = {x: integrate_return(form, x).rotation for x in (h, 2 * h, -h, -2 * h)}
    raw = w[h] - w[-h]
    return (2 * w[h] - w[2 * h]) - (2 * w[-h] - w[-2 * h]), raw


def roundtrip_audit(profile: Profile, sample_count: int = 50, *, seed: int | None = None,
                    delta: float | None = None) -> RoundtripReport:
    """Compare numerically measured return data with ``tau`` and ``-J'``.

    ``J`` is also rebuilt from measured rotations alone (three-point
    Gauss-Legendre on every piece, anchored at ``J(k_plus) = 0``) and
    compared with the stored values at all breakpoints.
    """
    from .profile_core import return_time, rotation

    form = build_chart_form(profile, delta)
    samples, err_tau, err_rot = [], 0.0, 0.0
    for k in audit_levels(profile, sample_count, seed):
        smp = integrate_return(form, float(k))
        samples.append(smp)
        err_tau = max(err_tau, _rel(smp.return_time, return_time(profile, k)))
        err_rot = max(err_rot, _rel(smp.rotation, rotation(profile, k)))

    nodes, weights = _GL3
    rec_err = 0.0
    j_top = 0.0
    for br in (profile.j_pos, profile.j_neg):
        bp = np.asarray(br.breakpoints)
        jval = j_top
        for a, b in zip(bp[::-1][1:], bp[::-1][:-1]):
            mid, half = (a + b) / 2, (b - a) / 2
            ws = [integrate_return(form, float(mid + half * x)).rotation for x in nodes]
            jval += half * float(np.dot(weights, ws))
            rec_err = max(rec_err, abs(jval - float(br.value(a))))
        j_top = jval

    jump, raw = rotation_jump(form)
    return RoundtripReport(profile.e, len(samples), err_tau, err_rot, rec_err, jump, raw,
                           abs(jump - profile.e), samples)


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10 - 15 * u + 6 * u * u)


def chart_volume(form: ChartContactForm, n_radial: int = 10, n_angle: int = 4) -> float:
    """Volume of the glued form by Gauss-Legendre quadrature in ``(r, angle)``.

    The density is ``alpha ^ d alpha`` evaluated in Cartesian coordinates on
    each chart, weighted by a quintic partition of unity in ``k`` across the
    overlap.  Radial segments are split at every level where the integrand
    changes formula.
    """
    p, dl = form.profile, form.delta
    xr, wr = np.polynomial.legendre.leggauss(n_radial)
    xa, wa = np.polynomial.legendre.leggauss(n_angle)
    angles, w_ang = np.pi * (xa + 1), np.pi * wa
    total = 0.0
    for chart in CHARTS:
        lo, hi = form.k_range(chart)
        levels = sorted({lo, hi, 0.0, -dl, dl, *[b for b in p.breakpoints() if lo < b < hi]})
        radii = sorted({form.r_of_k(chart, kk) for kk in levels if lo <= kk <= hi})
        for r0, r1 in zip(radii, radii[1:]):
            rs = 0.5 * (r1 - r0) * xr + 0.5 * (r1 + r0)
            wrs = 0.5 * (r1 - r0) * wr
            for r, w_r in zip(rs, wrs):
                kk = float(form.k_of_rho(chart, r * r))
                phi = float(_smoothstep((kk + dl) / (2 * dl)))
                weight = phi if chart == "+" else 1.0 - phi
                if weight == 0.0:
                    continue
                acc = 0.0
                for th, w_th in zip(angles, w_ang):
                    # t-independent density; the fibre circle has length 1
                    acc += w_th * abs(form.volume_density(chart, r * math.cos(th), r * math.sin(th)))
                total += weight * w_r * r * acc
    return total
