import json
import math

import numpy as np
import pytest
from hypothesis import given
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
from systolica.profile_core import (
    AdmissibilityError,
    BranchFunction,
    DomainError,
    KinkError,
    Profile,
    ProfileFormatError,
    derivative,
    dumps,
    evaluate,
    load,
    loads,
    return_time,
    rotation,
    save,
    validate,
)

seeds = st.integers(0, 10_000)
eulers = st.sampled_from([1, 2, 3, 4, 5, -1, -3])


def test_evaluate_examples():
    assert evaluate(zoll_profile(2, 1), 0.0) == 1.0
    assert evaluate(ellipsoid_profile(1, 2), 0.0) == pytest.approx(2 / 3, abs=1e-15)
    for prof in (zoll_profile(2, 1), ellipsoid_profile(1, 2), eta_family_profile(EtaFamilyParams(3, 0.05))):
        assert evaluate(prof, prof.k_plus) == pytest.approx(0.0, abs=1e-15)


def test_evaluate_out_of_domain():
    with pytest.raises(DomainError):
        evaluate(zoll_profile(2, 1), 1.5)


def test_derivative_examples():
    z = zoll_profile(2, 1)
    assert derivative(z, 0.5) == -1.0
    assert derivative(ellipsoid_profile(1, 2), 0.1) == pytest.approx(-2 / 3, abs=1e-15)
    with pytest.raises(KinkError):
        derivative(z, 0.0)
    assert derivative(z, 0.0, "right") - derivative(z, 0.0, "left") == -2


def test_return_time_and_rotation_examples():
    assert return_time(zoll_profile(2, 1), 0.3) == pytest.approx(1.0, abs=1e-15)
    ell = ellipsoid_profile(1, 2)
    for k in (-1.5, -0.2, 0.0, 0.4, 0.9):
        assert return_time(ell, k) == pytest.approx(2 / 3, abs=1e-15)
    assert return_time(besse_quotient_profile(5), 0.1) == pytest.approx(0.5, abs=1e-15)
    assert rotation(zoll_profile(1, 1), 0.2) == pytest.approx(0.5, abs=1e-15)
    assert rotation(besse_quotient_profile(4), -0.1) == pytest.approx(-2.0, abs=1e-15)
    eta = eta_family_profile(EtaFamilyParams(3, 0.05))
    for k in (0.06, 0.2, 0.4):
        assert rotation(eta, k) == pytest.approx(1.0, abs=1e-12)


def test_return_time_rejects_nonpositive():
    # J = 1 + k - 5 k^2 (k+1) on [-1, 0] has tau < 0 near k = -0.8
    neg = BranchFunction.polynomial([-1.0, 0.0], [[1.0, 1.0, -5.0, -5.0]])
    pos = BranchFunction.polynomial([0.0, 1.0], [[1.0, -1.0]])
    prof = Profile(2, -1.0, 1.0, neg, pos)
    with pytest.raises(AdmissibilityError):
        return_time(prof, -0.8)
    assert not validate(prof).ok


def test_validate_passes_on_constructors():
    for prof in (zoll_profile(1, 1), zoll_profile(2, 3), besse_quotient_profile(7), ellipsoid_profile(2, 5),
                 eta_family_profile(EtaFamilyParams(5, 0.01))):
        assert validate(prof).ok, str(validate(prof))


def test_validate_flags_injected_jump():
    z = zoll_profile(2, 1)
    bad = Profile(1, z.k_minus, z.k_plus, z.j_neg, z.j_pos)  # jump is -2, e claims 1
    rep = validate(bad)
    assert rep.failed() == ["derivative_jump"]
    check = next(c for c in rep.checks if c.name == "derivative_jump")
    assert check.margin == pytest.approx(1.0)


def test_validate_flags_injected_closure():
    pos = BranchFunction.polynomial([0.0, 1.0], [[1.0, -1.0, 0.1]])  # J(1) = 0.1, slope at 0 unchanged
    neg = BranchFunction.polynomial([-1.0, 0.0], [[0.0, 1.0]])
    rep = validate(Profile(2, -1.0, 1.0, neg, pos))
    assert "closure_k_plus" in rep.failed()
    assert "derivative_jump" not in rep.failed()


def test_structural_errors():
    z = zoll_profile(2, 1)
    with pytest.raises(ProfileFormatError):
        Profile(0, z.k_minus, z.k_plus, z.j_neg, z.j_pos)
    with pytest.raises(ProfileFormatError):
        Profile(2, -0.5, z.k_plus, z.j_neg, z.j_pos)
    with pytest.raises(ProfileFormatError):
        BranchFunction.polynomial([0.0, 0.0], [[1.0]])
    with pytest.raises(ProfileFormatError):
        BranchFunction.hermite([0.0, 1.0, 2.0], [1, 2], [0, 0])


def test_file_round_trip(tmp_path):
    prof = eta_family_profile(EtaFamilyParams(3, 0.05))
    path = tmp_path / "eta.json"
    save(prof, path)
    doc = json.loads(path.read_text())
    assert doc["format"] == "systolica-profile/1"
    assert set(doc) >= {"euler", "k_minus", "k_plus", "j_neg", "j_pos"}
    assert load(path) == prof


def test_format_tag_checked():
    doc = zoll_profile(2, 1).to_dict()
    doc["format"] = "something-else/9"
    with pytest.raises(ProfileFormatError):
        loads(json.dumps(doc))
    with pytest.raises(ProfileFormatError):
        loads("{not json")


@given(e=st.sampled_from([1, 2, 3, 5]), seed=seeds)
def test_serialization_is_lossless(e, seed):
    prof = random_admissible_profile(RandomProfileParams(e, seed=seed))
    back = loads(dumps(prof))
    assert back == prof
    ks = np.linspace(prof.k_minus, prof.k_plus, 101)
    assert all(evaluate(back, k) == evaluate(prof, k) for k in ks)


@given(
    bp=st.lists(st.floats(-3, 3, allow_nan=False), min_size=2, max_size=6, unique=True),
    seed=seeds,
)
def test_hermite_derivative_matches_finite_differences(bp, seed):
    bp = sorted(bp)
    if min(np.diff(bp)) < 1e-2:
        return
    rng = np.random.default_rng(seed)
    br = BranchFunction.hermite(bp, rng.normal(size=len(bp)), rng.normal(size=len(bp)))
    # nodal data are reproduced exactly
    for (v, d), x in zip(br.data, bp):
        assert br.value(x) == pytest.approx(v, abs=1e-12)
        side = "left" if x == bp[-1] else "right"
        assert br.derivative(x, side) == pytest.approx(d, abs=1e-9)
    xs = rng.uniform(bp[0] + 1e-3, bp[-1] - 1e-3, 8)
    h = 1e-6
    for x in xs:
        fd = (br.value(x + h) - br.value(x - h)) / (2 * h)
        assert br.derivative(x) == pytest.approx(fd, rel=1e-5, abs=1e-5)


@given(e=st.sampled_from([1, 2, 3, 5]), seed=seeds)
def test_exact_integral_matches_quadrature(e, seed):
    prof = random_admissible_profile(RandomProfileParams(e, seed=seed))
    for br in (prof.j_neg, prof.j_pos):
        ref = sum(quad(lambda x: br.value(x), a, b, epsabs=1e-13)[0] for a, b in zip(br.breakpoints, br.breakpoints[1:]))
        assert br.integral() == pytest.approx(ref, abs=1e-11)


@given(e=st.sampled_from([1, 2, 3, 5]), seed=seeds)
def test_jump_and_breakpoint_continuity(e, seed):
    prof = random_admissible_profile(RandomProfileParams(e, seed=seed))
    jump = derivative(prof, 0.0, "right") - derivative(prof, 0.0, "left")
    assert abs(jump + e) <= 1e-12
    for br in (prof.j_neg, prof.j_pos):
        for b in br.breakpoints[1:-1]:
            assert abs(br.value(b, "left") - br.value(b, "right")) <= 1e-12


@given(e=st.sampled_from([1, 2, 3, 5]), seed=seeds, c=st.floats(0.1, 10))
def test_scaling_scales_return_time_keeps_rotation(e, seed, c):
    prof = random_admissible_profile(RandomProfileParams(e, seed=seed))
    big = prof.scaled(c)
    assert validate(big, 512).ok
    for u in np.linspace(0.05, 0.95, 7):
        k = prof.k_minus + u * (prof.k_plus - prof.k_minus)
        if abs(k) < 1e-9:
            continue
        assert return_time(big, c * k) == pytest.approx(c * return_time(prof, k), rel=1e-10)
        assert rotation(big, c * k) == pytest.approx(rotation(prof, k), rel=1e-10, abs=1e-12)


def test_random_profiles_are_admissible_on_fine_grid(random_profiles):
    for prof in random_profiles.values():
        rep = validate(prof, 8192)
        assert rep.ok, str(rep)
