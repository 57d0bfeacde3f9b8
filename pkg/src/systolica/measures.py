"""Contact volume, systolic ratios and the systolic inequalities."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Sequence

import numpy as np

from .orbits import FormClass, classify, contractible_systole, systole
from .profile_core import Profile

EQUALITY_RTOL = 1e-8
MARGIN_TOL = 1e-9

REPORT_CSV_COLUMNS = ("e", "branch", "systole", "volume", "ratio", "bound", "margin", "equality_flag")


class QuadratureError(ArithmeticError):
    pass


class TheoremViolation(AssertionError):
    pass


class CertificateError(AssertionError):
    pass


class NormalizationError(ValueError):
    pass


class TransversalityError(ValueError):
    pass


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10, max_depth: int = 48) -> float:
    """Adaptive Simpson rule with Richardson correction."""
    if a == b:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) * (fa + 4 * fm + fb) / 6
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    total = 0.0
    while stack:
        a0, b0, fa0, fm0, fb0, whole0, tol0, depth = stack.pop()
        m = 0.5 * (a0 + b0)
        lm, rm = 0.5 * (a0 + m), 0.5 * (m + b0)
        flm, frm = f(lm), f(rm)
        left = (m - a0) * (fa0 + 4 * flm + fm0) / 6
        right = (b0 - m) * (fm0 + 4 * frm + fb0) / 6
        delta = left + right - whole0
        if abs(delta) <= 15 * tol0:
            total += left + right + delta / 15
        elif depth >= max_depth:
            raise QuadratureError(f"adaptive Simpson did not converge on [{a0}, {b0}]")
        else:
            stack.append((a0, m, fa0, flm, fm0, left, tol0 / 2, depth + 1))
            stack.append((m, b0, fm0, frm, fb0, right, tol0 / 2, depth + 1))
    return total


def integrate_piecewise(f: Callable[[float], float], cuts: Sequence[float], tol: float) -> float:
    cuts = sorted(set(cuts))
    n = max(len(cuts) - 1, 1)
    return sum(adaptive_simpson(f, a, b, tol / n) for a, b in zip(cuts, cuts[1:]))


def _j_integral(profile: Profile, lo: float, hi: float, tol: float) -> float:
    cuts = [lo, hi] + [b for b in profile.breakpoints() if lo < b < hi]

    def f(k):
        br = profile.j_neg if k < 0 else profile.j_pos
        return br.value(k)

    return integrate_piecewise(f, cuts, tol)


def contact_volume(profile: Profile, tol: float = 1e-10) -> float:
    """``2 * int J dk`` over the whole moment interval."""
    return 2.0 * _j_integral(profile, profile.k_minus, profile.k_plus, tol / 2)


def systolic_ratio(profile: Profile) -> float:
    return systole(profile).value ** 2 / contact_volume(profile)


@dataclass
class InequalityReport:
    e: int
    systole: float
    volume: float
    ratio: float
    bound: float
    margin: float
    equality_flag: bool
    branch: str
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self) -> list:
        return [self.e, self.branch, repr(self.systole), repr(self.volume), repr(self.ratio), repr(self.bound),
                repr(self.margin), int(self.equality_flag)]


def reports_to_csv(reports: Sequence[InequalityReport]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(REPORT_CSV_COLUMNS)
    for r in reports:
        wr.writerow(r.csv_row())
    return buf.getvalue()


def _report(e, sys_value, volume, bound, branch, ratio=None, **extras) -> InequalityReport:
    ratio = sys_value**2 / volume if ratio is None else ratio
    margin = bound - ratio
    return InequalityReport(e, sys_value, volume, ratio, bound, margin, abs(margin) <= EQUALITY_RTOL * bound, branch,
                            dict(extras))


def theorem_bound(e: int) -> tuple[float, str]:
    if e < 0:
        return 1 / abs(e), "e<0"
    if e in (1, 2):
        return 1 / e, f"e={e}"
    if e > 2:
        return 0.5, "e>2"
    raise ValueError("e must be nonzero")


def theorem_check(profile: Profile, tol: float = MARGIN_TOL) -> InequalityReport:
    """Compare ``sys^2 / Vol`` with the sharp bound for the profile's Euler number.

    Raises :class:`TheoremViolation` on a negative margin, on a non-strict
    margin for ``e > 2``, or on equality for a form that is not Zoll.
    """
    e = profile.e
    if e <= 0:
        raise ValueError("theorem_check models positive Euler numbers; use negative_euler_check for e<0")
    sres = systole(profile)
    vol = contact_volume(profile)
    bound, branch = theorem_bound(e)
    rep = _report(e, sres.value, vol, bound, branch, witness_kind=sres.witness.kind)
    if rep.margin < -tol:
        raise TheoremViolation(f"sys^2/Vol = {rep.ratio} exceeds {bound} by {-rep.margin}")
    if e > 2 and not rep.margin > tol:
        raise TheoremViolation(f"margin {rep.margin} is not strictly positive for e={e}")
    if rep.equality_flag and classify(profile) is not FormClass.ZOLL:
        raise TheoremViolation("equality reached by a form that is not Zoll")
    return rep


def contractible_check(profile: Profile) -> InequalityReport:
    """``sys_contr^2 <= |e| Vol`` with its equality flag."""
    cres = contractible_systole(profile)
    vol = contact_volume(profile)
    e = abs(profile.e)
    return _report(profile.e, cres.value, vol, float(e), "contractible", witness_kind=cres.witness.kind)


@dataclass
class CertificateReport:
    e: int
    systole: float
    k_min: float
    worst_pointwise_margin: float
    worst_k: float
    central_integral: float
    g_identity_error: float
    bound_integral: float
    volume: float
    volume_lower_bound: float
    chain_ok: bool

    def to_dict(self) -> dict:
        return asdict(self)


def certificate_check(profile: Profile, grid_density: int = 4096, tol: float = MARGIN_TOL) -> CertificateReport:
    """Re-run the lower-bound argument on the computed systole.

    With ``g = J + |k|`` (``e >= 2``) or ``g = J + |k|/2`` (``e = 1``) the
    pointwise bound ``g >= max(|k|, sys)`` (resp. half of it) is checked on
    a grid of ``[-K_min, K_min]``, and the volume chain
    ``Vol >= 2 int J >= 2 sys^2`` (resp. ``>= sys^2``) is rebuilt by
    quadrature.
    """
    e = profile.e
    if e < 1:
        raise ValueError("certificate_check needs e >= 1")
    s = systole(profile).value
    kmin = min(-profile.k_minus, profile.k_plus)
    c = 1.0 if e >= 2 else 0.5

    cuts = [-kmin, 0.0, kmin] + [b for b in profile.breakpoints() if -kmin < b < kmin]
    ks = np.union1d(np.linspace(-kmin, kmin, 2 * grid_density + 1), cuts)
    neg, pos = ks[ks <= 0], ks[ks >= 0]
    g = np.concatenate([profile.j_neg.value(neg) + c * np.abs(neg), profile.j_pos.value(pos) + c * pos])
    kk = np.concatenate([neg, pos])
    lower = c * np.maximum(np.abs(kk), s)
    diff = g - lower
    i = int(np.argmin(diff))
    worst, worst_k = float(diff[i]), float(kk[i])
    if worst < -tol:
        raise CertificateError(f"pointwise bound fails at k={worst_k} by {-worst}")

    central = _j_integral(profile, -kmin, kmin, 1e-11)

    def gfun(k):
        br = profile.j_neg if k < 0 else profile.j_pos
        return br.value(k) + c * abs(k)

    g_int = integrate_piecewise(gfun, cuts, 1e-11)
    triangle = c * kmin**2
    identity_err = abs(g_int - triangle - central)
    # int max(|k|, s) over [-kmin, kmin] minus the |k| triangle equals s^2 (s <= kmin)
    bound_integral = s**2
    vol = contact_volume(profile)
    if e >= 2:
        chain = central >= bound_integral - tol
    else:
        chain = 2 * central >= bound_integral - tol
    chain = chain and vol >= 2 * central - tol
    return CertificateReport(e, s, kmin, worst, worst_k, central, identity_err, bound_integral, vol, 2 * central, chain)


def negative_euler_check(e: int, K_samples: Sequence[float], weights: Sequence[float],
                         rtol: float = 1e-9) -> InequalityReport:
    """Negative Euler number, transverse case.

    The moment map is sampled with weights of total mass ``|e|`` (the volume
    of the Zoll form ``alpha / K``).  Then ``Vol = sum w K^2`` and the
    smallest ``|K|`` is the period of a closed orbit.
    """
    if e >= 0:
        raise ValueError("negative_euler_check needs e < 0")
    K = np.asarray(K_samples, dtype=float)
    w = np.asarray(weights, dtype=float)
    if K.shape != w.shape or K.size == 0:
        raise ValueError("need matching, non-empty samples and weights")
    if np.any(w < 0):
        raise NormalizationError("weights must be nonnegative")
    if abs(float(w.sum()) - abs(e)) > 1e-9:
        raise NormalizationError(f"weights sum to {w.sum()}, expected {abs(e)}")
    if np.any(K == 0):
        raise TransversalityError("moment map sample vanishes; the action is not transverse")
    live = w > 0
    sq = K[live] ** 2
    kmin2 = float(sq.min())
    volume = float(np.dot(w[live], sq))
    # bound - ratio, written as a sum of nonnegative terms
    margin = float(np.dot(w[live], sq - kmin2)) / (abs(e) * volume)
    bound = 1 / abs(e)
    absK = np.abs(K[live])
    equal = float(absK.max() - absK.min()) <= rtol * float(absK.max())
    return InequalityReport(e, math.sqrt(kmin2), volume, bound - margin, bound, margin, equal, "e<0")
