"""Closed Reeb orbits from a profile.

A level ``k`` carries a closed orbit exactly when the rotation ``w(k)`` is
rational; with ``w = p/q`` in lowest terms its minimal period is
``q * tau(k)``.  The two fibers over the critical points of the moment map
are closed orbits of period ``|k_minus|`` and ``k_plus``.
"""

from __future__ import annotations

import csv
import enum
import functools
import io
import math
from dataclasses import dataclass, asdict
from fractions import Fraction

import numpy as np

from .constructors import min_return_time
from .profile_core import (
    AdmissibilityError,
    BranchFunction,
    Profile,
    branch_grid,
    evaluate,
    validate,
)

ROOT_TOL = 1e-12
RATIONAL_TOL = 1e-10
TIE_RTOL = 1e-12
SAFETY = 0.99

ORBIT_CSV_COLUMNS = ("k", "p", "q", "period", "contractible_period", "kind")


class InconclusiveSearch(RuntimeError):
    pass


@dataclass(frozen=True)
class ClosedOrbit:
    """A closed Reeb orbit.

    Section orbits carry the reduced rotation ``p/q = w(k)``.  Endpoint
    fibers carry ``(p, q) = (0, 1)``.  ``interval`` is set when the orbit
    represents a whole plateau of levels with the same rotation.
    """

    k: float
    p: int
    q: int
    period: float
    contractible_period: float
    kind: str
    interval: tuple[float, float] | None = None


@dataclass(frozen=True)
class SystoleResult:
    value: float
    witness: ClosedOrbit
    q_max_used: int
    certification_bound: float

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "witness": asdict(self.witness),
            "q_max_used": self.q_max_used,
            "certification_bound": self.certification_bound,
        }


class FormClass(str, enum.Enum):
    ZOLL = "Zoll"
    BESSE_EQUAL = "Besse-two-singular-equal"
    BESSE_OTHER = "Besse-other"
    NON_BESSE = "non-Besse"


@functools.lru_cache(maxsize=512)
def _check_valid(profile: Profile, grid_density: int) -> None:
    report = validate(profile, grid_density)
    if not report.ok:
        raise AdmissibilityError("profile fails invariants: " + ", ".join(report.failed()))


def lift_factor(p: int, e: int) -> int:
    """Iterates of a section orbit needed to become contractible."""
    return abs(e) // math.gcd(p, e)


def _tau(br: BranchFunction, k):
    return br.value(k) - k * br.derivative(k)


def _plateaus(br: BranchFunction) -> list[tuple[float, float, float]]:
    """Maximal runs of pieces on which ``w`` is constant: ``(lo, hi, w)``."""
    c = br.local_coefficients
    h = np.diff(np.asarray(br.breakpoints))
    out: list[tuple[float, float, float]] = []
    for i in range(br.n_pieces):
        w0 = -c[i, 1]
        var = sum(abs(n * c[i, n]) * h[i] ** (n - 1) for n in range(2, c.shape[1]))
        if var > 1e-12 * max(1.0, abs(w0)):
            continue
        lo, hi = br.breakpoints[i], br.breakpoints[i + 1]
        if out and out[-1][1] == lo and abs(out[-1][2] - w0) <= 1e-12 * max(1.0, abs(w0)):
            out[-1] = (out[-1][0], hi, out[-1][2])
        else:
            out.append((lo, hi, w0))
    return out


def _as_fraction(w: float, q_max: int) -> Fraction | None:
    fr = Fraction(w).limit_denominator(q_max)
    if abs(float(fr) - w) <= RATIONAL_TOL * max(1.0, abs(w)):
        return fr
    return None


def _bisect(br: BranchFunction, lo: np.ndarray, hi: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Vectorised bisection for ``w(k) = target`` on brackets with a sign change."""
    flo = -br.derivative(lo) - target
    for _ in range(200):
        if np.all(hi - lo <= ROOT_TOL):
            break
        mid = 0.5 * (lo + hi)
        fm = -br.derivative(mid) - target
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def _branch_orbits(profile: Profile, br: BranchFunction, q_max: int, grid_density: int) -> list[ClosedOrbit]:
    e = profile.e
    found: list[ClosedOrbit] = []
    plats = _plateaus(br)
    for lo, hi, w0 in plats:
        fr = _as_fraction(w0, q_max)
        if fr is None:
            continue
        mid = 0.5 * (lo + hi)
        tau = float(_tau(br, mid))
        p, q = fr.numerator, fr.denominator
        found.append(ClosedOrbit(mid, p, q, q * tau, q * lift_factor(p, e) * tau, "section", (lo, hi)))

    grid = branch_grid(br, grid_density)
    w = -br.derivative(grid)
    a, b = grid[:-1], grid[1:]
    wa, wb = w[:-1], w[1:]
    in_plat = np.zeros(a.shape, dtype=bool)
    for lo, hi, _ in plats:
        in_plat |= (a >= lo) & (b <= hi)
    if np.all(in_plat):
        return found
    live_w = np.concatenate([wa[~in_plat], wb[~in_plat]])
    wmin, wmax = float(live_w.min()), float(live_w.max())

    # grid points touched by a non-plateau segment
    pt_live = np.zeros(grid.shape, dtype=bool)
    pt_live[:-1] |= ~in_plat
    pt_live[1:] |= ~in_plat

    roots_k, roots_fr = [], []
    for q in range(1, q_max + 1):
        for m in range(math.ceil(wmin * q - 1e-9), math.floor(wmax * q + 1e-9) + 1):
            if math.gcd(m, q) != 1:
                continue
            t = m / q
            fa, fb = wa - t, wb - t
            br_mask = (~in_plat) & (fa * fb < 0)
            if np.any(br_mask):
                ks = _bisect(br, a[br_mask].copy(), b[br_mask].copy(), np.full(int(br_mask.sum()), t))
                roots_k.extend(ks.tolist())
                roots_fr.extend([(m, q)] * ks.size)
            zero = pt_live & (w - t == 0)
            for k in grid[zero]:
                roots_k.append(float(k))
                roots_fr.append((m, q))

    for k, (p, q) in zip(roots_k, roots_fr):
        if min(abs(k - profile.k_minus), abs(k - profile.k_plus)) <= ROOT_TOL:
            continue
        if any(lo - 1e-9 <= k <= hi + 1e-9 and Fraction(p, q) == _as_fraction(w0, q_max) for lo, hi, w0 in plats):
            continue
        tau = float(_tau(br, k))
        found.append(ClosedOrbit(float(k), p, q, q * tau, q * lift_factor(p, e) * tau, "section"))
    return found


def _dedupe(orbits: list[ClosedOrbit]) -> list[ClosedOrbit]:
    out: list[ClosedOrbit] = []
    zero_seen = False
    for o in orbits:
        if o.kind == "section" and o.interval is None and abs(o.k) <= ROOT_TOL:
            # the level k=0 is reached from both branches; rotations differ by e
            if zero_seen:
                continue
            zero_seen = True
        if any(x.kind == o.kind and x.p == o.p and x.q == o.q and abs(x.k - o.k) <= 1e-10 for x in out):
            continue
        out.append(o)
    return out


def endpoint_fibers(profile: Profile) -> list[ClosedOrbit]:
    e = abs(profile.e)
    return [
        ClosedOrbit(profile.k_minus, 0, 1, -profile.k_minus, e * -profile.k_minus, "endpoint_fiber"),
        ClosedOrbit(profile.k_plus, 0, 1, profile.k_plus, e * profile.k_plus, "endpoint_fiber"),
    ]


def enumerate_closed_orbits(profile: Profile, q_max: int, grid_density: int = 4096) -> list[ClosedOrbit]:
    """Endpoint fibers plus every section orbit with denominator ``q <= q_max``.

    Roots of ``w(k) = m/q`` are bracketed on a uniform grid merged with the
    breakpoints and refined by bisection to ``1e-12`` in ``k``.  Pieces of
    constant rotation yield one representative orbit per plateau.
    """
    if q_max < 1:
        raise ValueError("q_max must be positive")
    _check_valid(profile, min(grid_density, 1024))
    # positive branch first so that it owns the k=0 orbit
    section = _branch_orbits(profile, profile.j_pos, q_max, grid_density)
    section += _branch_orbits(profile, profile.j_neg, q_max, grid_density)
    section = _dedupe(section)
    section.sort(key=lambda o: (o.q, o.k))
    return endpoint_fibers(profile) + section


def _pick(orbits: list[ClosedOrbit], key: str) -> ClosedOrbit:
    best = min(getattr(o, key) for o in orbits)
    ties = [o for o in orbits if getattr(o, key) <= best * (1 + TIE_RTOL)]
    ties.sort(key=lambda o: (o.kind != "endpoint_fiber", getattr(o, key), o.q, o.k))
    return ties[0]


def _certified_min(profile: Profile, key: str, grid_density: int, q_cap: int) -> SystoleResult:
    _check_valid(profile, min(grid_density, 1024))
    tau_min = SAFETY * min_return_time(profile, grid_density)
    if not tau_min > 0:
        raise AdmissibilityError(f"minimal return time {tau_min} is not positive")
    q = 1
    while True:
        orbits = enumerate_closed_orbits(profile, q, grid_density)
        w = _pick(orbits, key)
        value = getattr(w, key)
        bound = q * tau_min
        if value <= bound:
            return SystoleResult(value, w, q, bound)
        if q >= q_cap:
            raise InconclusiveSearch(f"no certificate up to q={q}: min={value}, bound={bound}")
        q *= 2


@functools.lru_cache(maxsize=512)
def systole(profile: Profile, grid_density: int = 4096, q_cap: int = 4096) -> SystoleResult:
    """Certified shortest period.

    Orbits with denominator above ``q_max`` have period at least
    ``q_max * min tau``, so the search doubles ``q_max`` until the current
    minimum falls below that bound (with a 0.99 safety factor on the grid
    estimate of ``min tau``).
    """
    return _certified_min(profile, "period", grid_density, q_cap)


@functools.lru_cache(maxsize=512)
def contractible_systole(profile: Profile, grid_density: int = 4096, q_cap: int = 4096) -> SystoleResult:
    """Shortest period of a contractible closed orbit.

    Lifting to the degree-|e| fiberwise cover divides the rotation by ``e``,
    so an orbit with reduced rotation ``p/q`` needs ``|e|/gcd(p, e)``
    iterations to become contractible; endpoint fibers need ``|e|``.
    """
    return _certified_min(profile, "contractible_period", grid_density, q_cap)


def action_spectrum(profile: Profile, q_max: int, grid_density: int = 4096, rtol: float = 1e-9):
    """Sorted distinct periods with a count of orbit kinds and rotations per period."""
    orbits = sorted(enumerate_closed_orbits(profile, q_max, grid_density), key=lambda o: o.period)
    spectrum: list[tuple[float, dict]] = []
    for o in orbits:
        if spectrum and abs(o.period - spectrum[-1][0]) <= rtol * max(abs(o.period), 1e-300):
            desc = spectrum[-1][1]
        else:
            desc = {"endpoint_fiber": 0, "section": 0, "rotations": []}
            spectrum.append((o.period, desc))
        desc[o.kind] += 1
        if o.kind == "section" and (o.p, o.q) not in desc["rotations"]:
            desc["rotations"].append((o.p, o.q))
    return spectrum


def _constant_rotation(br: BranchFunction, grid_density: int) -> float | None:
    c = br.local_coefficients
    w0 = -c[0, 1]
    scale = max(1.0, abs(w0))
    if np.any(np.abs(c[:, 2:]) > 1e-12 * scale / max(br.hi - br.lo, 1e-300)):
        return None
    if np.any(np.abs(-c[:, 1] - w0) > 1e-12 * scale):
        return None
    k = branch_grid(br, grid_density)
    if np.max(np.abs(-br.derivative(k) - w0)) > RATIONAL_TOL * scale:
        return None
    return w0


def classify(profile: Profile, grid_density: int = 1024) -> FormClass:
    """Zoll / Besse pattern, read from the representation and confirmed on a grid."""
    _check_valid(profile, min(grid_density, 1024))
    w_pos = _constant_rotation(profile.j_pos, grid_density)
    w_neg = _constant_rotation(profile.j_neg, grid_density)
    if w_pos is None or w_neg is None:
        return FormClass.NON_BESSE
    fr = _as_fraction(w_pos, 10**6)
    if fr is None or _as_fraction(w_neg, 10**6) is None:
        return FormClass.NON_BESSE
    regular = fr.denominator * evaluate(profile, 0.0)
    top, bottom = profile.k_plus, -profile.k_minus

    def same(x, y):
        return abs(x - y) <= 1e-9 * max(x, y)

    if same(top, regular) and same(bottom, regular):
        return FormClass.ZOLL
    if same(top, bottom):
        return FormClass.BESSE_EQUAL
    return FormClass.BESSE_OTHER


def orbits_to_csv(orbits: list[ClosedOrbit]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(ORBIT_CSV_COLUMNS)
    for o in orbits:
        wr.writerow([repr(o.k), o.p, o.q, repr(o.period), repr(o.contractible_period), o.kind])
    return buf.getvalue()
