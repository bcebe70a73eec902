import numpy as np
import pytest

from almostinv import (AllCandidatesBounded, ApproachSchedule, Diagonal, FamilyTooShort,
                       ForwardShift, ScheduleExhausted, SingularResolvent, basis_vector,
                       boundary_hypothesis, build_family, growth_diagnostic, identity,
                       make_operator, select_estar, wstar_decay_diagnostic)
from almostinv.resolvent import ResolventFamily, default_candidates, named_candidate

from conftest import power_estar

# mpmath backward recursion at 40 digits, e* = k^{-3/4} normalised, D = 1024
ORACLE_NORMS_1024 = [2.6834815446443737, 7.7446152760812213, 20.992030885169033,
                     51.207312553827919, 89.24542444372406, 108.82807405140834]
ORACLE_RATE_1024 = 0.7639482291351571
ORACLE_X1_1024 = [0.44436598, 0.31412176, 0.20400336, 0.13509809, 0.11001211, 0.10433463]
# first component of h at lam = 1 + 1e-4, e* = k^{-3/4} unnormalised, D = 4096
ORACLE_H1_4096 = 26.210198301461759


def test_schedule_points():
    pts = ApproachSchedule(1.0, 0.25, 3).points(1.0)
    assert np.allclose(pts, [1.25, 1.0625, 1.015625])
    assert np.allclose(ApproachSchedule(1.0, 0.5, 2).points(0), [0.5, 0.25])
    with pytest.raises(ValueError):
        ApproachSchedule(r=1.0)


def test_shift_family_norms_match_series(shift_family):
    assert np.allclose(shift_family.norms, ORACLE_NORMS_1024, rtol=1e-12)
    assert shift_family.max_inveq_residual <= 1e-8


def test_first_component_truncated_series():
    D = 4096
    T = make_operator(ForwardShift(np.ones(D)), D)
    e = np.arange(1, D + 1, dtype=float) ** -0.75
    fam = build_family(T, 1.0, lambdas=[1 + 1e-4], e_star=e)
    assert abs(fam.h_stars[0, 0] - ORACLE_H1_4096) <= 1e-9 * ORACLE_H1_4096


def test_e1_family_does_not_grow():
    D = 64
    T = make_operator(ForwardShift(np.ones(D)), D)
    lams = 1 + 1 / np.arange(1, 7)
    fam = build_family(T, 1.0, lambdas=lams, e_star=basis_vector(D, 1))
    for lam, h in zip(lams, fam.h_stars):
        assert np.allclose(h, basis_vector(D, 1) / lam, atol=1e-15)
    assert not growth_diagnostic(fam).growing


def test_eigenvalue_schedule_is_singular():
    T = make_operator(Diagonal(np.arange(1, 17, dtype=float)), 16)
    with pytest.raises(SingularResolvent):
        build_family(T, 3.0, lambdas=[3.0], e_star=np.ones(16))


def test_duplicate_points_exhaust_schedule():
    T = make_operator(ForwardShift(np.ones(16)), 16)
    with pytest.raises(ScheduleExhausted):
        build_family(T, 1.0, lambdas=[1.5, 1.5, 1.25], e_star=np.ones(16))


def test_growth_diagnostic(shift_family):
    g = growth_diagnostic(shift_family)
    assert g.growing
    assert g.rate == pytest.approx(ORACLE_RATE_1024, rel=1e-9)
    # the first component grows like delta^{-1/4}: ln(4)/4 per step asymptotically
    slope = np.polyfit(np.arange(1, 7), np.log(shift_family.h_stars[:, 0].real), 1)[0]
    assert 0.3 < slope < 0.6


def test_growth_needs_three_entries(shift_family):
    with pytest.raises(FamilyTooShort):
        growth_diagnostic(shift_family.subfamily([0]))


def test_select_estar_prefers_power_candidate(shift1024):
    D = 1024
    k = np.arange(1, D + 1, dtype=float)
    cands = [basis_vector(D, 1), 1 / k, k ** -0.75]
    e = select_estar(shift1024, 1.0, ApproachSchedule(), cands)
    assert np.allclose(e, power_estar(D))


def test_select_estar_single_and_bounded(shift1024):
    e = select_estar(shift1024, 1.0, ApproachSchedule(), [power_estar(1024)])
    assert np.allclose(e, power_estar(1024))
    with pytest.raises(AllCandidatesBounded):
        select_estar(shift1024, 1.0, ApproachSchedule(), [basis_vector(1024, 1)])


def test_default_and_named_candidates():
    c = default_candidates(8, seed=1)
    assert len(c) == 4 and np.array_equal(c[0], basis_vector(8, 1))
    assert np.allclose(named_candidate("power:0.5", 4), [1, 2 ** -0.5, 3 ** -0.5, 0.5])
    assert np.array_equal(named_candidate("gaussian", 8, 1), named_candidate("gaussian", 8, 1))
    with pytest.raises(ValueError):
        named_candidate("nope", 4)


def test_wstar_decay(shift_family):
    rep = wstar_decay_diagnostic(shift_family, probe_coords=4)
    assert np.allclose(rep.values[:, 0], ORACLE_X1_1024, atol=1e-8)
    assert rep.decaying[0]
    assert list(rep.coords) == [1, 2, 3, 4]


def test_wstar_constant_and_empty():
    D = 16
    e1 = basis_vector(D, 1)
    fam = ResolventFamily(1.0, np.ones(3), np.tile(e1, (3, 1)), np.ones(3), np.tile(e1, (3, 1)),
                          e1, np.zeros(3))
    assert not wstar_decay_diagnostic(fam).decaying.any()
    empty = fam.subfamily([])
    rep = wstar_decay_diagnostic(empty)
    assert rep.values.size == 0 and rep.coords.size == 0


def test_boundary_hypothesis():
    S = make_operator(ForwardShift(np.ones(32)), 32)
    bh = boundary_hypothesis(S, 1.0)
    assert bh.holds and bh.structural
    assert not boundary_hypothesis(S, 0.5).holds
    assert not boundary_hypothesis(S, 2.0).holds
    bh = boundary_hypothesis(identity(16), 1.0)
    assert not bh.holds and bh.reason == "boundary point is an eigenvalue"
