import dataclasses
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.integrate import quad

from systolica.constructors import (
    EtaFamilyParams,
    RandomProfileParams,
    besse_quotient_profile,
    ellipsoid_profile,
    eta_family_profile,
    random_admissible_profile,
    zoll_profile,
)
from systolica import measures
from systolica.measures import (
    CertificateError,
    NormalizationError,
    QuadratureError,
    TheoremViolation,
    TransversalityError,
    adaptive_simpson,
    certificate_check,
    contact_volume,
    contractible_check,
    negative_euler_check,
    reports_to_csv,
    systolic_ratio,
    theorem_bound,
    theorem_check,
)
from systolica.orbits import systole

profiles = st.builds(lambda e, s: random_admissible_profile(RandomProfileParams(e, seed=s)),
                     st.sampled_from([1, 2, 3, 5]), st.integers(0, 3000))


def test_simpson_against_closed_forms():
    assert adaptive_simpson(math.sin, 0, math.pi, 1e-12) == pytest.approx(2.0, abs=1e-11)
    assert adaptive_simpson(math.exp, -1, 2, 1e-12) == pytest.approx(math.e**2 - math.exp(-1), abs=1e-11)
    assert adaptive_simpson(lambda x: x**3, 0, 1) == pytest.approx(0.25, abs=1e-15)
    assert adaptive_simpson(math.sin, 1.0, 1.0) == 0.0


def test_simpson_reports_nonconvergence():
    with pytest.raises(QuadratureError):
        adaptive_simpson(lambda x: math.sin(1 / x) if x else 0.0, 0.0, 1.0, 1e-14, max_depth=12)


def test_volume_examples():
    assert contact_volume(zoll_profile(2, 1)) == pytest.approx(2.0, abs=1e-10)
    assert contact_volume(zoll_profile(2, 3)) == pytest.approx(18.0, abs=1e-9)
    assert contact_volume(besse_quotient_profile(5)) == pytest.approx(0.2, abs=1e-10)
    assert contact_volume(ellipsoid_profile(1, 2)) == pytest.approx(2.0, abs=1e-10)


@given(prof=profiles)
def test_volume_matches_exact_piece_integrals(prof):
    exact = 2 * (prof.j_neg.integral() + prof.j_pos.integral())
    assert contact_volume(prof) == pytest.approx(exact, abs=1e-10)


@given(prof=profiles)
def test_volume_matches_scipy_quad(prof):
    ref = 0.0
    for br in (prof.j_neg, prof.j_pos):
        bp = br.breakpoints
        ref += sum(quad(lambda k: float(br.value(k)), a, b, epsabs=1e-13)[0] for a, b in zip(bp, bp[1:]))
    assert contact_volume(prof) == pytest.approx(2 * ref, abs=1e-9)


@given(prof=profiles, c=st.floats(0.1, 10.0))
def test_volume_scales_quadratically_and_ratio_is_invariant(prof, c):
    assert contact_volume(prof.scaled(c)) == pytest.approx(c * c * contact_volume(prof), rel=1e-9)
    assert systolic_ratio(prof.scaled(c)) == pytest.approx(systolic_ratio(prof), rel=1e-9)


def test_ratio_examples():
    assert systolic_ratio(zoll_profile(1, 1)) == pytest.approx(1.0, abs=1e-12)
    assert systolic_ratio(zoll_profile(2, 1)) == pytest.approx(0.5, abs=1e-12)
    assert 0.47 < systolic_ratio(eta_family_profile(EtaFamilyParams(3, 0.01))) < 0.5


def test_theorem_bounds():
    assert theorem_bound(1) == (1.0, "e=1")
    assert theorem_bound(2) == (0.5, "e=2")
    assert theorem_bound(9) == (0.5, "e>2")
    assert theorem_bound(-4) == (0.25, "e<0")
    with pytest.raises(ValueError):
        theorem_bound(0)


def test_theorem_check_examples():
    z = theorem_check(zoll_profile(2, 1))
    assert z.margin == pytest.approx(0.0, abs=1e-12) and z.equality_flag and z.branch == "e=2"
    eta = theorem_check(eta_family_profile(EtaFamilyParams(4, 0.02)))
    assert eta.margin > 0 and eta.branch == "e>2" and not eta.equality_flag
    assert theorem_check(random_admissible_profile(RandomProfileParams(1, seed=3))).margin >= 0
    row = reports_to_csv([z, eta]).splitlines()
    assert row[0] == "e,branch,systole,volume,ratio,bound,margin,equality_flag"
    assert row[1].startswith("2,e=2,")


def inflate_systole(monkeypatch, factor):
    real = measures.systole
    monkeypatch.setattr(measures, "systole", lambda p: dataclasses.replace(real(p), value=factor * real(p).value))


def test_theorem_check_flags_overestimated_systole(monkeypatch):
    inflate_systole(monkeypatch, 1.01)
    with pytest.raises(TheoremViolation):
        theorem_check(zoll_profile(1, 1))
    with pytest.raises(ValueError):
        theorem_check(dataclasses.replace(zoll_profile(1, 1), e=-1))


def test_theorem_check_demands_strictness_above_two(monkeypatch):
    p = eta_family_profile(EtaFamilyParams(3, 0.05))
    exact = math.sqrt(0.5 * contact_volume(p)) / systole(p).value
    inflate_systole(monkeypatch, exact)
    with pytest.raises(TheoremViolation, match="strictly"):
        theorem_check(p)


@given(prof=profiles)
def test_theorem_holds_on_random_profiles(prof):
    rep = theorem_check(prof)
    assert rep.margin >= -1e-9
    if prof.e > 2:
        assert rep.margin > 1e-9


def test_contractible_equality_for_besse_quotients():
    for e in (3, 4, 5, 7):
        rep = contractible_check(besse_quotient_profile(e))
        assert rep.equality_flag and rep.systole**2 == pytest.approx(e * rep.volume, abs=1e-9)
    assert not contractible_check(ellipsoid_profile(1, 2)).equality_flag


def test_certificate_examples():
    z = certificate_check(zoll_profile(2, 1))
    assert z.worst_pointwise_margin == pytest.approx(0.0, abs=1e-12) and z.chain_ok
    ell = certificate_check(ellipsoid_profile(1, 2))
    assert ell.worst_pointwise_margin == pytest.approx(0.0, abs=1e-12)
    eta = certificate_check(eta_family_profile(EtaFamilyParams(3, 0.05)))
    assert eta.worst_pointwise_margin >= 0 and eta.chain_ok
    assert eta.bound_integral == pytest.approx(eta.systole**2)


def test_certificate_flags_overestimated_systole(monkeypatch):
    inflate_systole(monkeypatch, 1.05)
    with pytest.raises(CertificateError):
        certificate_check(ellipsoid_profile(1, 2))


@given(prof=profiles)
def test_certificate_holds_and_identity_is_exact(prof):
    rep = certificate_check(prof, 1024)
    assert rep.worst_pointwise_margin >= -1e-9
    assert rep.g_identity_error <= 1e-9
    assert rep.chain_ok


def test_negative_euler_examples():
    rep = negative_euler_check(-1, [1.0] * 4, [0.25] * 4)
    assert rep.ratio == pytest.approx(1.0) and rep.equality_flag and rep.margin == 0
    rep = negative_euler_check(-2, [1.0, 2.0], [1.0, 1.0])
    assert rep.volume == 5.0 and rep.systole == 1.0 and rep.ratio == pytest.approx(0.2)
    rng = np.random.default_rng(0)
    rep = negative_euler_check(-1, 1 + rng.uniform(0, 1, 1000), np.full(1000, 1e-3))
    assert rep.margin > 0 and not rep.equality_flag


def test_negative_euler_errors():
    with pytest.raises(TransversalityError):
        negative_euler_check(-1, [1.0, 0.0], [0.5, 0.5])
    with pytest.raises(NormalizationError):
        negative_euler_check(-3, [1.0, 2.0], [1.0, 1.0])
    with pytest.raises(NormalizationError):
        negative_euler_check(-1, [1.0, 2.0], [1.5, -0.5])
    with pytest.raises(ValueError):
        negative_euler_check(2, [1.0], [2.0])


samples = st.lists(st.floats(0.05, 20.0), min_size=1, max_size=60)


@given(e=st.integers(-8, -1), K=samples, signs=st.lists(st.booleans(), min_size=60, max_size=60),
       raw=st.lists(st.floats(0.01, 1.0), min_size=60, max_size=60))
def test_negative_euler_margin_sign(e, K, signs, raw):
    n = len(K)
    K = np.array([k if s else -k for k, s in zip(K, signs)])
    w = np.array(raw[:n])
    w = w * (abs(e) / w.sum())
    assume(abs(w.sum() - abs(e)) <= 1e-12)
    rep = negative_euler_check(e, K, w)
    assert rep.margin >= 0
    assert rep.ratio <= rep.bound
    constant = np.ptp(np.abs(K)) == 0
    assert (rep.margin == 0) == constant
    assert rep.equality_flag == (np.ptp(np.abs(K)) <= 1e-9 * np.abs(K).max())
