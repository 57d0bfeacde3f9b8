"""Explicit families of invariant contact forms, expressed as profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .profile_core import (
    BranchFunction,
    Profile,
    ProfileError,
    branch_grid,
    return_time_on,
    validate,
)


class ConstructionError(ProfileError):
    pass


class GenerationError(ProfileError):
    pass


def _symmetric_linear(e: int, top: float, slope: float, half_width: float) -> Profile:
    """``J(k) = top - slope * |k|`` on ``[-half_width, half_width]``."""
    neg = BranchFunction.polynomial([-half_width, 0.0], [[top - slope * half_width, slope]])
    pos = BranchFunction.polynomial([0.0, half_width], [[top, -slope]])
    return Profile(e, -half_width, half_width, neg, pos)


def zoll_profile(e: int, T: float) -> Profile:
    """Zoll form of period ``T``: ``J = T - |k|`` (e=2) or ``(T - |k|)/2`` (e=1)."""
    if e not in (1, 2):
        raise ConstructionError("Zoll profiles exist only for e in {1, 2}")
    if not T > 0:
        raise ConstructionError("T must be positive")
    if e == 2:
        return _symmetric_linear(2, T, 1.0, T)
    return _symmetric_linear(1, T / 2, 0.5, T)


def besse_quotient_profile(e: int, scale: float = 1.0) -> Profile:
    """Quotient of the round S^3 form by the Z/e action with weights (1, -1).

    ``J(k) = scale/2 - (e/2)|k|`` on ``[-scale/e, scale/e]``: two singular
    orbits of period ``scale/e``, regular period ``scale`` (e odd) or
    ``scale/2`` (e even).
    """
    if int(e) != e or e < 1:
        raise ConstructionError("e must be a positive integer")
    if not scale > 0:
        raise ConstructionError("scale must be positive")
    return _symmetric_linear(int(e), scale / 2, e / 2, scale / e)


@dataclass(frozen=True)
class EtaFamilyParams:
    """Parameters of the near-maximising family for ``e > 2``.

    ``dip`` places the interior node of the transition on ``[eta/2, eta]``
    (as a fraction of its width).
    """

    e: int
    eta: float
    dip: float = 0.5

    def __post_init__(self):
        if int(self.e) != self.e or self.e <= 2:
            raise ConstructionError("eta family needs an integer e > 2")
        if not 0 < self.eta < 1 / (2 + self.e):
            raise ConstructionError(f"eta must lie in (0, 1/(2+e)) = (0, {1 / (2 + self.e):.6g})")
        if not 0 < self.dip < 1:
            raise ConstructionError("dip must lie in (0, 1)")

    @property
    def a(self) -> float:
        return 0.5 - self.e * self.eta / 2


def _eta_radial_data(p: EtaFamilyParams):
    """Nodes, values and slopes of the radial function f on [0, a].

    f = 1/2 - (e/2) r on [0, eta/2] and f = a - r on [eta, a].  The
    transition has a piecewise-linear slope with one interior node; that
    node's slope is fixed by the value difference across the transition.
    """
    e, eta, a = p.e, p.eta, p.a
    lo, hi = eta / 2, eta
    h = hi - lo
    f_lo, f_hi = 0.5 - e * lo / 2, a - hi
    g0, g2 = -e / 2, -1.0
    u = p.dip
    avg = (f_hi - f_lo) / h
    g1 = 2 * avg - u * g0 - (1 - u) * g2
    mid = lo + u * h
    f_mid = f_lo + u * h * (g0 + g1) / 2
    r = [0.0, lo, mid, hi, a]
    f = [0.5, f_lo, f_mid, f_hi, 0.0]
    df = [g0, g0, g1, g2, -1.0]
    return r, f, df


def eta_family_profile(params: EtaFamilyParams) -> Profile:
    """Profile ``J(k) = f(|k|)`` of the family approaching ratio 1/2.

    The transition on ``[eta/2, eta]`` is a C^1 piecewise-quadratic whose
    tangent-line intercept ``f - r f'`` is verified to stay ``>= a``; that is
    the property bounding the periods of transition orbits below by ``a``.
    """
    p = params
    r, f, df = _eta_radial_data(p)
    pos = BranchFunction.hermite(r, f, df)
    neg = BranchFunction.hermite([-x for x in reversed(r)], list(reversed(f)), [-d for d in reversed(df)])
    prof = Profile(p.e, -p.a, p.a, neg, pos)

    ks = np.linspace(r[1], r[3], 2049)
    intercept = return_time_on(pos, ks)
    worst = float(np.min(intercept - p.a))
    if worst < -1e-12:
        raise ConstructionError(f"transition intercept drops below a by {-worst:.3e}")
    report = validate(prof)
    if not report.ok:
        raise ConstructionError("eta profile fails invariants: " + ", ".join(report.failed()))
    return prof


def ellipsoid_profile(a1: float, a2: float) -> Profile:
    """Boundary of the ellipsoid E(a1, a2) with the anti-diagonal circle action.

    Linear branches with constant return time ``a1*a2/(a1+a2)``; the volume
    ``a1*a2`` and the jump ``-1`` are checked before returning.
    """
    if not (a1 > 0 and a2 > 0):
        raise ConstructionError("ellipsoid parameters must be positive")
    s = a1 + a2
    pos = BranchFunction.polynomial([0.0, a1], [[a1 * a2 / s, -a2 / s]])
    neg = BranchFunction.polynomial([-a2, 0.0], [[0.0, a1 / s]])
    prof = Profile(1, -a2, a1, neg, pos)
    vol = 2 * (neg.integral() + pos.integral())
    if abs(vol - a1 * a2) > 1e-12 * max(1.0, a1 * a2):
        raise ConstructionError(f"ellipsoid volume {vol} != a1*a2")
    jump = pos.derivative(0.0) - neg.derivative(0.0)
    if abs(jump + 1) > 1e-12:
        raise ConstructionError(f"ellipsoid jump {jump} != -1")
    return prof


@dataclass(frozen=True)
class RandomProfileParams:
    """Random admissible profile recipe.

    ``k_minus``/``k_plus`` left as ``None`` are drawn from the seed.
    """

    e: int
    seed: int = 0
    k_minus: float | None = None
    k_plus: float | None = None
    roughness: float = 0.2
    nodes: int = 6
    max_attempts: int = 200

    def __post_init__(self):
        if int(self.e) != self.e or self.e == 0:
            raise ValueError("e must be a nonzero integer")
        if self.k_minus is not None and not self.k_minus < 0:
            raise ValueError("k_minus must be negative")
        if self.k_plus is not None and not self.k_plus > 0:
            raise ValueError("k_plus must be positive")
        if not self.roughness > 0:
            raise ValueError("roughness must be positive")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


def random_admissible_profile(params: RandomProfileParams) -> Profile:
    """Deterministic random profile built in rotation space.

    The rotation ``w = -J'`` is piecewise linear with a jump of ``+e`` at 0.
    A constant shift makes ``int w = 0`` so that ``J(k) = int_k^{k_plus} w``
    closes at both ends; candidates are then rejected until positivity of
    ``J`` and of the return time holds, with the return time at the
    endpoint fibers kept above 10% of its unperturbed value.
    """
    p = params
    rng = np.random.default_rng(p.seed)
    k_minus = p.k_minus if p.k_minus is not None else -float(rng.uniform(0.5, 1.5))
    k_plus = p.k_plus if p.k_plus is not None else float(rng.uniform(0.5, 1.5))
    e = int(p.e)
    span = k_plus - k_minus
    # constant-return-time base (ellipsoid-like): w = c_pos on k>0, c_neg on k<0
    c_pos = e * (-k_minus) / span
    c_neg = c_pos - e
    base_tau = c_pos * k_plus
    kn = np.linspace(k_minus, 0.0, p.nodes + 1)
    kp = np.linspace(0.0, k_plus, p.nodes + 1)
    amp = p.roughness * abs(e) / 2

    for _ in range(p.max_attempts):
        dn = amp * rng.standard_normal(p.nodes + 1)
        dp = amp * rng.standard_normal(p.nodes + 1)
        dp[0] = dn[-1]  # keep the jump exactly e
        wn = c_neg + dn
        wp = c_pos + dp
        total = np.sum(np.diff(kn) * (wn[1:] + wn[:-1]) / 2) + np.sum(np.diff(kp) * (wp[1:] + wp[:-1]) / 2)
        shift = -total / span
        wn = wn + shift
        wp = wp + shift
        # J(k) = int_k^{k_plus} w, exact for piecewise-linear w
        pieces_p = np.diff(kp) * (wp[1:] + wp[:-1]) / 2
        jp = np.concatenate([np.cumsum(pieces_p[::-1])[::-1], [0.0]])
        pieces_n = np.diff(kn) * (wn[1:] + wn[:-1]) / 2
        jn = jp[0] + np.concatenate([np.cumsum(pieces_n[::-1])[::-1], [0.0]])
        jn[0] = 0.0
        pos = BranchFunction.hermite(kp, jp, -wp)
        neg = BranchFunction.hermite(kn, jn, -wn)
        prof = Profile(e, k_minus, k_plus, neg, pos)
        if not validate(prof, 512).ok:
            continue
        tau_ends = min(-k_minus * -wn[0], k_plus * wp[-1])
        if tau_ends < 0.1 * base_tau:
            continue
        return prof
    raise GenerationError(f"no admissible profile after {p.max_attempts} attempts (seed={p.seed})")


def min_return_time(profile: Profile, grid_density: int = 4096) -> float:
    """Smallest return time over a grid of both branches, endpoints included."""
    out = math.inf
    for br in (profile.j_neg, profile.j_pos):
        k = branch_grid(br, grid_density)
        out = min(out, float(np.min(return_time_on(br, k))))
    return out
