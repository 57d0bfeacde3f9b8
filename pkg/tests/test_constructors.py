import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from systolica.constructors import (
    ConstructionError,
    EtaFamilyParams,
    GenerationError,
    RandomProfileParams,
    besse_quotient_profile,
    ellipsoid_profile,
    eta_family_profile,
    random_admissible_profile,
    zoll_profile,
)
from systolica.measures import contact_volume, theorem_check
from systolica.orbits import enumerate_closed_orbits, systole
from systolica.profile_core import evaluate, return_time, return_time_on, rotation, validate


def same_function(p1, p2, n=401):
    ks = np.linspace(p1.k_minus, p1.k_plus, n)
    return (p1.e, p1.k_minus, p1.k_plus) == (p2.e, p2.k_minus, p2.k_plus) and all(
        abs(evaluate(p1, k) - evaluate(p2, k)) < 1e-14 for k in ks)


def test_zoll_shapes():
    z2 = zoll_profile(2, 1)
    assert evaluate(z2, 0.0) == 1.0
    assert rotation(z2, 0.4) == 1.0 and rotation(z2, -0.4) == -1.0
    z1 = zoll_profile(1, 1)
    assert rotation(z1, 0.3) == 0.5 and rotation(z1, -0.3) == -0.5
    assert 2 * return_time(z1, 0.3) == pytest.approx(1.0)
    assert contact_volume(zoll_profile(2, 2)) == pytest.approx(8.0, abs=1e-10)


def test_zoll_rejects_large_euler():
    with pytest.raises(ConstructionError):
        zoll_profile(3, 1)
    with pytest.raises(ConstructionError):
        zoll_profile(2, 0.0)


def test_besse_quotient():
    b5 = besse_quotient_profile(5)
    assert (b5.k_minus, b5.k_plus) == (-0.2, 0.2)
    assert rotation(b5, 0.1) == pytest.approx(2.5) and rotation(b5, -0.1) == pytest.approx(-2.5)
    assert contact_volume(b5) == pytest.approx(0.2, abs=1e-12)
    assert rotation(besse_quotient_profile(4), -0.1) == pytest.approx(-2.0)
    assert same_function(besse_quotient_profile(2, 1), zoll_profile(2, 0.5))


def test_eta_family_examples():
    p = eta_family_profile(EtaFamilyParams(3, 0.05))
    assert p.k_plus == pytest.approx(0.425) and p.k_minus == pytest.approx(-0.425)
    assert rotation(p, 0.02) == pytest.approx(1.5, abs=1e-12)
    assert 2 * return_time(p, 0.02) == pytest.approx(1.0, abs=1e-12)
    p4 = eta_family_profile(EtaFamilyParams(4, 0.05))
    assert rotation(p4, 0.02) == pytest.approx(2.0, abs=1e-12)
    assert return_time(p4, 0.02) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("e,eta", [(3, 0.1), (3, 0.001), (4, 0.02), (7, 0.1), (10, 0.08)])
def test_eta_transition_intercept_stays_above_a(e, eta):
    params = EtaFamilyParams(e, eta)
    p = eta_family_profile(params)
    ks = np.linspace(eta / 2, eta, 4001)
    tau = return_time_on(p.j_pos, ks)
    assert tau.min() >= params.a - 1e-12
    # transition orbits have q >= 1 so their periods are >= a; the systole is a fiber
    assert systole(p).value == pytest.approx(params.a, abs=1e-14)
    assert systole(p).witness.kind == "endpoint_fiber"


@pytest.mark.parametrize("eta", [0.0, -0.1, 0.2, 1.0])
def test_eta_family_parameter_domain(eta):
    with pytest.raises(ConstructionError):
        EtaFamilyParams(3, eta)
    with pytest.raises(ConstructionError):
        EtaFamilyParams(2, 0.05)


def test_ellipsoid_profile():
    ell = ellipsoid_profile(1, 2)
    assert contact_volume(ell) == pytest.approx(2.0, abs=1e-12)
    assert rotation(ell, 0.5) == pytest.approx(2 / 3) and rotation(ell, -0.5) == pytest.approx(-1 / 3)
    assert same_function(ellipsoid_profile(3.0, 3.0), zoll_profile(1, 3.0))
    with pytest.raises(ConstructionError):
        ellipsoid_profile(1, -1)


@given(a1=st.floats(0.1, 10), a2=st.floats(0.1, 10))
def test_ellipsoid_volume_and_endpoint_periods(a1, a2):
    ell = ellipsoid_profile(a1, a2)
    assert contact_volume(ell) == pytest.approx(a1 * a2, rel=1e-10)
    orbits = enumerate_closed_orbits(ell, 1)
    fibers = sorted(o.period for o in orbits if o.kind == "endpoint_fiber")
    assert fibers == pytest.approx(sorted([a1, a2]))


def test_random_profile_determinism():
    a = random_admissible_profile(RandomProfileParams(2, seed=0))
    b = random_admissible_profile(RandomProfileParams(2, seed=0))
    assert a == b
    assert validate(a).ok
    assert a != random_admissible_profile(RandomProfileParams(2, seed=1))


def test_random_profile_strict_for_large_euler():
    assert theorem_check(random_admissible_profile(RandomProfileParams(5, seed=7))).margin > 0


def test_random_profile_fixed_range():
    p = random_admissible_profile(RandomProfileParams(3, seed=2, k_minus=-0.7, k_plus=1.3))
    assert (p.k_minus, p.k_plus) == (-0.7, 1.3)


def test_random_profile_budget_exhaustion():
    with pytest.raises(GenerationError, match="seed=4"):
        random_admissible_profile(RandomProfileParams(3, seed=4, roughness=50.0, max_attempts=3))


@given(e=st.sampled_from([1, 2, 3, 4, 5, 8]), seed=st.integers(0, 5000))
def test_every_random_profile_validates(e, seed):
    assert validate(random_admissible_profile(RandomProfileParams(e, seed=seed)), 2048).ok
