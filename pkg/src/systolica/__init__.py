"""Systolic inequalities for circle-invariant contact forms, reduced to a one-variable potential."""

from .constructors import (
    EtaFamilyParams,
    RandomProfileParams,
    besse_quotient_profile,
    ellipsoid_profile,
    eta_family_profile,
    random_admissible_profile,
    zoll_profile,
)
from .measures import (
    InequalityReport,
    certificate_check,
    contact_volume,
    contractible_check,
    negative_euler_check,
    systolic_ratio,
    theorem_check,
)
from .orbits import (
    ClosedOrbit,
    FormClass,
    action_spectrum,
    classify,
    contractible_systole,
    enumerate_closed_orbits,
    systole,
)
from .profile_core import BranchFunction, Profile, derivative, evaluate, load, return_time, rotation, save, validate

__version__ = "0.1.0"
