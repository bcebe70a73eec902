import itertools

import numpy as np
import pytest

from almostinv import (ApproachSchedule, ForwardShift, RankDeficient, TooFewSelected,
                       basis_vector, biorthogonal_from_family, build_family, dual_system,
                       make_operator)
from almostinv.biorthogonal import gram, gram_cond, select_subsequence
from almostinv.resolvent import ResolventFamily

from conftest import power_estar

# Gram condition numbers of the first k series-summed x*_n (mpmath, D = 1024)
ORACLE_GRAM_COND = {2: 84.80341479112388, 3: 2320.2679662582987}


def _family(rows, norms):
    X = np.asarray(rows, dtype=complex)
    n = len(norms)
    return ResolventFamily(1.0, np.ones(n), X * np.asarray(norms)[:, None], np.asarray(norms, float),
                           X, np.ones(X.shape[1]), np.zeros(n))


def test_gram_helpers():
    X = np.eye(3)[:2]
    assert np.array_equal(gram(X), np.eye(2))
    assert gram_cond(X) == 1.0


def test_orthonormal_family_all_selected():
    fam = _family(np.eye(4)[:3], [1, 2, 4])
    idx = select_subsequence(fam, 1e3, 2.0)
    assert idx == [0, 1, 2]
    assert np.allclose(gram(fam.x_stars[idx]), np.eye(3))


def test_duplicate_rejected():
    e1, e2 = np.eye(4)[:2]
    fam = _family([e1, e1, e2], [1, 2, 4])
    assert select_subsequence(fam, 1e3, 2.0) == [0, 2]


def test_too_few_selected():
    fam = _family([np.eye(4)[0]] * 3, [1, 2, 4])
    with pytest.raises(TooFewSelected):
        select_subsequence(fam, 1e3, 2.0)


def test_gram_cond_matches_series(shift_family):
    for k, ref in ORACLE_GRAM_COND.items():
        assert gram_cond(shift_family.x_stars[:k]) == pytest.approx(ref, rel=1e-8)


def test_shift_family_selection(shift1024):
    fam = build_family(shift1024, 1.0, ApproachSchedule(count=8), power_estar(1024))
    assert select_subsequence(fam, 1e3, 2.0) == [0, 1, 3]
    assert select_subsequence(fam, 1e4, 2.0) == [0, 1, 2, 4]


def test_no_four_subset_meets_kappa_1e3():
    # exhaustive check: the best 4 of the first 8 functionals have Gram cond ~1.1e3
    D = 4096
    T = make_operator(ForwardShift(np.ones(D)), D)
    fam = build_family(T, 1.0, ApproachSchedule(count=8), power_estar(D))
    best = min(gram_cond(fam.x_stars[list(s)]) for s in itertools.combinations(range(8), 4))
    assert 1e3 < best < 1.2e3


def test_dual_system_identity():
    sys_ = dual_system([basis_vector(4, 1), basis_vector(4, 2)], dim=4)
    assert np.allclose(sys_.x_duals, np.eye(4)[:2])
    assert sys_.M_bound == pytest.approx(1.0)


def test_dual_system_hand_solve():
    s = np.sqrt(0.5)
    sys_ = dual_system([[1, 0], [s, s]])
    # x*_1 = e1, x*_2 = (e1+e2)/sqrt2: duals e1 - e2 and sqrt2 e2
    assert np.allclose(sys_.x_duals, [[1, -1], [0, np.sqrt(2)]], atol=1e-15)
    assert sys_.pairing_residual <= 1e-15


def test_dual_system_rank_deficient():
    with pytest.raises(RankDeficient) as ei:
        dual_system([basis_vector(4, 1), np.zeros(4)])
    assert ei.value.sigma_min == 0.0
    with pytest.raises(ValueError):
        dual_system([basis_vector(4, 1)], dim=5)


def test_biorthogonal_from_family(shift_family):
    bio = biorthogonal_from_family(shift_family, 1e3, 2.0)
    assert bio.indices == (0, 1, 3)
    assert bio.pairing_residual <= 1e-12
    assert bio.gram_cond <= 1e3
