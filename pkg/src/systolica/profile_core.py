"""Potential-function data model for S^1-invariant contact forms.

A :class:`Profile` stores the potential ``J`` on ``[k_minus, k_plus]`` as two
branch functions meeting at ``k = 0``.  Everything dynamical is read off ``J``:

* return time of the surface-of-section map   ``tau(k) = J(k) - k J'(k)``
* rotation of the fiber circle per return     ``w(k) = -J'(k)``
* contact volume                              ``2 * int J dk``
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PROFILE_FORMAT = "systolica-profile/1"

KINDS = ("piecewise-polynomial", "cubic-hermite-spline")

EQ_TOL = 1e-12


class ProfileError(ValueError):
    """Base class for profile problems."""


class DomainError(ProfileError):
    pass


class KinkError(ProfileError):
    """Two-sided derivative requested where only one-sided ones exist."""


class AdmissibilityError(ProfileError):
    pass


class ProfileFormatError(ProfileError):
    pass


def _hermite_to_local(x0, x1, y0, y1, d0, d1):
    """Local power-basis coefficients (in u = x - x0) of the cubic Hermite piece."""
    h = x1 - x0
    delta = (y1 - y0) / h
    c2 = (3.0 * delta - 2.0 * d0 - d1) / h
    c3 = (d0 + d1 - 2.0 * delta) / (h * h)
    return (y0, d0, c2, c3)


@dataclass(frozen=True)
class BranchFunction:
    """C^1 piecewise polynomial on ``[breakpoints[0], breakpoints[-1]]``.

    ``kind="piecewise-polynomial"``: ``data`` holds one coefficient tuple per
    piece, ascending powers of the local variable ``u = x - breakpoints[i]``.

    ``kind="cubic-hermite-spline"``: ``data`` holds ``(value, derivative)``
    pairs, one per breakpoint.
    """

    kind: str
    breakpoints: tuple[float, ...]
    data: tuple[tuple[float, ...], ...]
    _coeffs: np.ndarray = field(init=False, repr=False, compare=False, hash=False)
    _bp: np.ndarray = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ProfileFormatError(f"unknown branch kind {self.kind!r}")
        bp = tuple(float(b) for b in self.breakpoints)
        data = tuple(tuple(float(c) for c in row) for row in self.data)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "data", data)
        if len(bp) < 2 or any(not b1 > b0 for b0, b1 in zip(bp, bp[1:])):
            raise ProfileFormatError("breakpoints must be strictly increasing, at least two")
        if not all(math.isfinite(b) for b in bp):
            raise ProfileFormatError("breakpoints must be finite")
        if self.kind == "piecewise-polynomial":
            if len(data) != len(bp) - 1 or any(len(row) == 0 for row in data):
                raise ProfileFormatError("need one non-empty coefficient list per piece")
            deg = max(len(row) for row in data)
            coeffs = np.zeros((len(data), max(deg, 2)))
            for i, row in enumerate(data):
                coeffs[i, : len(row)] = row
        else:
            if len(data) != len(bp) or any(len(row) != 2 for row in data):
                raise ProfileFormatError("need one (value, derivative) pair per breakpoint")
            coeffs = np.array(
                [
                    _hermite_to_local(bp[i], bp[i + 1], data[i][0], data[i + 1][0], data[i][1], data[i + 1][1])
                    for i in range(len(bp) - 1)
                ]
            )
        if not np.all(np.isfinite(coeffs)):
            raise ProfileFormatError("non-finite coefficients")
        object.__setattr__(self, "_coeffs", coeffs)
        object.__setattr__(self, "_bp", np.asarray(bp))

    # -- construction helpers -------------------------------------------------
    @classmethod
    def polynomial(cls, breakpoints: Sequence[float], coefficients: Iterable[Sequence[float]]) -> "BranchFunction":
        return cls("piecewise-polynomial", tuple(breakpoints), tuple(tuple(c) for c in coefficients))

    @classmethod
    def hermite(cls, breakpoints: Sequence[float], values: Sequence[float], derivatives: Sequence[float]) -> "BranchFunction":
        return cls("cubic-hermite-spline", tuple(breakpoints), tuple(zip(values, derivatives)))

    # -- basic geometry -------------------------------------------------------
    @property
    def lo(self) -> float:
        return self.breakpoints[0]

    @property
    def hi(self) -> float:
        return self.breakpoints[-1]

    @property
    def n_pieces(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def local_coefficients(self) -> np.ndarray:
        """Array ``(n_pieces, degree+1)`` of local power-basis coefficients."""
        return self._coeffs.copy()

    def _piece(self, x: np.ndarray, side: str) -> np.ndarray:
        if side == "left":
            idx = np.searchsorted(self._bp, x, side="left") - 1
        else:
            idx = np.searchsorted(self._bp, x, side="right") - 1
        return np.clip(idx, 0, self.n_pieces - 1)

    def _eval(self, x, side: str, order: int):
        xa = np.asarray(x, dtype=float)
        if np.any(xa < self.lo) or np.any(xa > self.hi):
            raise DomainError(f"argument outside [{self.lo}, {self.hi}]")
        idx = self._piece(xa, side)
        u = xa - self._bp[idx]
        c = self._coeffs[idx]
        deg = c.shape[-1] - 1
        out = np.zeros_like(u)
        # Horner on the order-th derivative of the local polynomial
        for n in range(deg, order - 1, -1):
            fac = math.perm(n, order)
            out = out * u + fac * c[..., n]
        return out if np.ndim(x) else float(out)

    def value(self, x, side: str = "right"):
        return self._eval(x, side, 0)

    def derivative(self, x, side: str = "right"):
        return self._eval(x, side, 1)

    def second_derivative(self, x, side: str = "right"):
        return self._eval(x, side, 2)

    def integral(self) -> float:
        """Exact integral of the stored polynomial pieces."""
        h = np.diff(self._bp)
        n = np.arange(self._coeffs.shape[1])
        return float(np.sum(self._coeffs * h[:, None] ** (n + 1) / (n + 1)))

    def scaled(self, c: float) -> "BranchFunction":
        """Branch of ``x -> c * f(x / c)``."""
        bp = tuple(c * b for b in self.breakpoints)
        if self.kind == "cubic-hermite-spline":
            return BranchFunction(self.kind, bp, tuple((c * v, d) for v, d in self.data))
        rows = tuple(tuple(a * c ** (1 - n) for n, a in enumerate(row)) for row in self.data)
        return BranchFunction(self.kind, bp, rows)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "breakpoints": list(self.breakpoints)}
        if self.kind == "piecewise-polynomial":
            d["coefficients"] = [list(row) for row in self.data]
        else:
            d["values"] = [v for v, _ in self.data]
            d["derivatives"] = [s for _, s in self.data]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BranchFunction":
        try:
            kind = d["kind"]
            if kind == "piecewise-polynomial":
                return cls.polynomial(d["breakpoints"], d["coefficients"])
            if kind == "cubic-hermite-spline":
                if len(d["values"]) != len(d["derivatives"]):
                    raise ProfileFormatError("values/derivatives length mismatch")
                return cls.hermite(d["breakpoints"], d["values"], d["derivatives"])
        except (KeyError, TypeError) as exc:
            raise ProfileFormatError(f"malformed branch: {exc}") from exc
        raise ProfileFormatError(f"unknown branch kind {kind!r}")


@dataclass(frozen=True)
class Profile:
    """Potential ``J`` of an invariant contact form with Euler number ``e``.

    Construction only checks structure (domains, types).  Mathematical
    admissibility is reported by :func:`validate`.
    """

    e: int
    k_minus: float
    k_plus: float
    j_neg: BranchFunction
    j_pos: BranchFunction

    def __post_init__(self):
        if isinstance(self.e, bool) or int(self.e) != self.e or self.e == 0:
            raise ProfileFormatError("Euler number must be a nonzero integer")
        object.__setattr__(self, "e", int(self.e))
        object.__setattr__(self, "k_minus", float(self.k_minus))
        object.__setattr__(self, "k_plus", float(self.k_plus))
        if not (self.k_minus < 0.0 < self.k_plus):
            raise ProfileFormatError("need k_minus < 0 < k_plus")
        if self.j_neg.lo != self.k_minus or self.j_neg.hi != 0.0:
            raise ProfileFormatError("negative branch must live on [k_minus, 0]")
        if self.j_pos.lo != 0.0 or self.j_pos.hi != self.k_plus:
            raise ProfileFormatError("positive branch must live on [0, k_plus]")

    def branch(self, k: float, side: str = "right") -> BranchFunction:
        if k < 0 or (k == 0 and side == "left"):
            return self.j_neg
        return self.j_pos

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(self.j_neg.breakpoints) + tuple(self.j_pos.breakpoints[1:])

    def scaled(self, c: float) -> "Profile":
        """Profile of ``c * alpha``: J and the k-range both scale by ``c``."""
        if not c > 0:
            raise ValueError("scale must be positive")
        return Profile(self.e, c * self.k_minus, c * self.k_plus, self.j_neg.scaled(c), self.j_pos.scaled(c))

    def to_dict(self) -> dict:
        return {
            "format": PROFILE_FORMAT,
            "euler": self.e,
            "k_minus": self.k_minus,
            "k_plus": self.k_plus,
            "j_neg": self.j_neg.to_dict(),
            "j_pos": self.j_pos.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Profile":
        if not isinstance(d, dict):
            raise ProfileFormatError("profile document must be a JSON object")
        if d.get("format") != PROFILE_FORMAT:
            raise ProfileFormatError(f"expected format tag {PROFILE_FORMAT!r}, got {d.get('format')!r}")
        try:
            return cls(
                e=d["euler"],
                k_minus=d["k_minus"],
                k_plus=d["k_plus"],
                j_neg=BranchFunction.from_dict(d["j_neg"]),
                j_pos=BranchFunction.from_dict(d["j_pos"]),
            )
        except (KeyError, TypeError) as exc:
            raise ProfileFormatError(f"malformed profile: {exc}") from exc


def dumps(profile: Profile) -> str:
    return json.dumps(profile.to_dict(), indent=2)


def loads(text: str) -> Profile:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProfileFormatError(f"invalid JSON: {exc}") from exc
    return Profile.from_dict(d)


def save(profile: Profile, path) -> None:
    Path(path).write_text(dumps(profile) + "\n")


def load(path) -> Profile:
    return loads(Path(path).read_text())


# -- pointwise quantities ------------------------------------------------------

def _check_domain(profile: Profile, k: float, closed: bool = True):
    if closed:
        ok = profile.k_minus <= k <= profile.k_plus
    else:
        ok = profile.k_minus < k < profile.k_plus
    if not ok:
        raise DomainError(f"k={k} outside the profile domain")


def _is_kink(profile: Profile, k: float) -> bool:
    return k == 0.0 or (k in profile.breakpoints() and k not in (profile.k_minus, profile.k_plus))


def evaluate(profile: Profile, k: float) -> float:
    _check_domain(profile, k)
    return profile.branch(k).value(k)


def derivative(profile: Profile, k: float, side: str = "two-sided") -> float:
    """One-sided or two-sided ``J'(k)``.

    Two-sided requests at 0 raise :class:`KinkError`.  At interior
    breakpoints the two sides agree for a C^1 branch; the right one is
    returned after checking agreement.
    """
    _check_domain(profile, k)
    if side not in ("left", "right", "two-sided"):
        raise ValueError(f"bad side {side!r}")
    if k == profile.k_minus:
        return profile.j_neg.derivative(k, "right")
    if k == profile.k_plus:
        return profile.j_pos.derivative(k, "left")
    if side != "two-sided":
        return profile.branch(k, side).derivative(k, side)
    if k == 0.0:
        raise KinkError("J has a derivative kink at k=0; specify side")
    br = profile.branch(k)
    if k in br.breakpoints:
        left, right = br.derivative(k, "left"), br.derivative(k, "right")
        if abs(left - right) > EQ_TOL * max(1.0, abs(left)):
            raise KinkError(f"derivative jump {right - left} at breakpoint {k}")
        return right
    return br.derivative(k)


def return_time(profile: Profile, k: float, side: str = "two-sided") -> float:
    """``tau(k) = J(k) - k J'(k)``; at ``k = 0`` the side is irrelevant."""
    _check_domain(profile, k, closed=False)
    if k == 0.0:
        tau = evaluate(profile, 0.0)
    else:
        tau = evaluate(profile, k) - k * derivative(profile, k, side)
    if not tau > 0:
        raise AdmissibilityError(f"nonpositive return time {tau} at k={k}")
    return tau


def rotation(profile: Profile, k: float, side: str = "two-sided") -> float:
    """Fiber rotation per return, ``w(k) = -J'(k)``."""
    _check_domain(profile, k, closed=False)
    return -derivative(profile, k, side)


# -- vectorised helpers used by the numerical modules --------------------------

def branch_grid(br: BranchFunction, density: int) -> np.ndarray:
    """Uniform grid of ``density`` points on the branch, merged with its breakpoints."""
    g = np.linspace(br.lo, br.hi, max(int(density), 2))
    return np.union1d(g, np.asarray(br.breakpoints))


def return_time_on(br: BranchFunction, k: np.ndarray) -> np.ndarray:
    return br.value(k) - k * br.derivative(k)


# -- validation ----------------------------------------------------------------

@dataclass
class InvariantCheck:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class ValidationReport:
    """Per-invariant outcome.

    ``margin`` is the worst absolute deviation for equality-type invariants
    and the smallest observed value for positivity-type ones.
    """

    checks: list[InvariantCheck]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checks": [
                {"name": c.name, "passed": c.passed, "margin": c.margin, "detail": c.detail} for c in self.checks
            ],
        }

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            flag = "PASS" if c.passed else "FAIL"
            lines.append(f"{flag}  {c.name:<24} margin={c.margin:.3e} {c.detail}".rstrip())
        return "\n".join(lines)


def _scale(profile: Profile) -> float:
    return max(1.0, abs(profile.k_minus), profile.k_plus, abs(evaluate(profile, 0.0)))


def validate(profile: Profile, grid_density: int = 4096) -> ValidationReport:
    checks = []
    tol = EQ_TOL * _scale(profile)
    neg, pos = profile.j_neg, profile.j_pos

    gap = abs(neg.value(0.0) - pos.value(0.0))
    checks.append(InvariantCheck("continuity_at_zero", gap <= tol, gap))

    for name, val in (("closure_k_minus", neg.value(profile.k_minus)), ("closure_k_plus", pos.value(profile.k_plus))):
        checks.append(InvariantCheck(name, abs(val) <= tol, abs(val)))

    jump = pos.derivative(0.0) - neg.derivative(0.0)
    err = abs(jump + profile.e)
    checks.append(InvariantCheck("derivative_jump", err <= tol * max(1, abs(profile.e)), err, f"jump={jump:.12g}"))

    # C^1 across interior breakpoints of each branch
    worst_c0, worst_c1 = 0.0, 0.0
    for br in (neg, pos):
        for b in br.breakpoints[1:-1]:
            worst_c0 = max(worst_c0, abs(br.value(b, "left") - br.value(b, "right")))
            worst_c1 = max(worst_c1, abs(br.derivative(b, "left") - br.derivative(b, "right")))
    checks.append(InvariantCheck("breakpoint_continuity", worst_c0 <= tol, worst_c0))
    checks.append(InvariantCheck("breakpoint_c1", worst_c1 <= tol, worst_c1))

    ends = [neg.derivative(profile.k_minus), pos.derivative(profile.k_plus), neg.derivative(0.0), pos.derivative(0.0)]
    finite = all(math.isfinite(d) for d in ends)
    checks.append(InvariantCheck("finite_one_sided_derivatives", finite, max(abs(d) for d in ends)))

    min_j, min_tau = math.inf, math.inf
    for br in (neg, pos):
        k = branch_grid(br, grid_density)
        inner = k[(k > profile.k_minus) & (k < profile.k_plus)]
        if inner.size:
            min_j = min(min_j, float(np.min(br.value(inner))))
            min_tau = min(min_tau, float(np.min(return_time_on(br, inner))))
    checks.append(InvariantCheck("positivity", min_j > 0, min_j))
    checks.append(InvariantCheck("return_time_positivity", min_tau > 0, min_tau))
    return ValidationReport(checks)


def require_valid(profile: Profile, grid_density: int = 1024) -> None:
    report = validate(profile, grid_density)
    if not report.ok:
        raise AdmissibilityError("profile fails invariants: " + ", ".join(report.failed()))
