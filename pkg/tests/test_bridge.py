import numpy as np
import pytest

from almostinv import (BranchUnsupported, Diagonal, HypothesisFailed, NoDefect, Nilpotent,
                       assemble_small_norm, basis_vector, bridge_operator, dense, kernel_range,
                       make_operator, scaled_bridge)
from almostinv.bridge import KernelRangeData, is_quasinilpotent
from almostinv import zoo


def _cofactor_det(M):
    n = M.shape[0]
    if n == 1:
        return M[0, 0]
    return sum((-1) ** j * M[0, j] * _cofactor_det(np.delete(M[1:], j, axis=1))
               for j in range(n) if M[0, j] != 0)


def test_kernel_range_jordan():
    kr = kernel_range(make_operator(Nilpotent(), 4))
    assert (kr.n, kr.m) == (1, 1)
    assert np.allclose(kr.kernel_basis[:, 0], basis_vector(4, 4))
    assert np.allclose(kr.corange_basis[:, 0], basis_vector(4, 1))


def test_kernel_range_invertible_and_rank_two():
    kr = kernel_range(make_operator(Diagonal([1.0, 2, 3, 4]), 4))
    assert (kr.n, kr.m) == (0, 0)
    rng = np.random.default_rng(0)
    T = dense(rng.standard_normal((5, 2)) @ rng.standard_normal((2, 5)))
    kr = kernel_range(T)
    assert (kr.n, kr.m) == (3, 3)
    assert np.abs(T.matrix @ kr.kernel_basis).max() <= 1e-12
    assert np.abs(kr.corange_basis.conj().T @ T.matrix).max() <= 1e-12


def test_kernel_range_toys_with_boundary():
    kr = kernel_range(zoo.build("kernel_toy_m_lt_n", 32), boundary=1)
    assert (kr.n, kr.m) == (2, 1)
    kr = kernel_range(zoo.build("kernel_toy_n_lt_m", 32), boundary=1)
    assert (kr.n, kr.m) == (2, 3)
    with pytest.raises(ValueError):
        kernel_range(zoo.build("kernel_toy_n_lt_m", 32), boundary=32)


def test_bridge_jordan_determinant():
    J = make_operator(Nilpotent(), 4)
    G = bridge_operator(kernel_range(J))
    assert np.allclose(G.matrix(), np.outer(basis_vector(4, 1), basis_vector(4, 4)))
    for alpha in (0.1, 0.37):
        assert abs(abs(_cofactor_det(J.matrix + alpha * G.matrix())) - alpha) <= 1e-15


def test_bridge_n_lt_m_injective():
    T = zoo.build("kernel_toy_n_lt_m", 32)
    aG, kr, cert = scaled_bridge(T, 0.2, boundary=1)
    assert aG.rank() == 2 and cert.branch == "n<=m"
    assert cert.sigma_min > 0 and cert.proxy_ok


def test_bridge_no_defect():
    kr = KernelRangeData(np.zeros((4, 0)), np.zeros((4, 1)), 0, 1, 1e-8)
    with pytest.raises(NoDefect):
        bridge_operator(kr)


@pytest.mark.parametrize("D", [4, 16, 64])
def test_jordan_scaled_bridge(D):
    J = make_operator(Nilpotent(), D)
    with pytest.raises(BranchUnsupported) as ei:
        assemble_small_norm(J, 0.2)
    cert = ei.value.certificate
    assert cert.alphaG_norm < 0.1 and cert.alphaG_norm == pytest.approx(0.1, rel=1e-5)
    aG, _, _ = scaled_bridge(J, 0.2)
    s = np.linalg.svd(J.matrix + aG.matrix(), compute_uv=False)
    # singular values of the cyclic weighted shift: {1, ..., 1, alpha}
    assert np.allclose(s[:-1], 1.0, atol=1e-12)
    assert abs(s[-1] - cert.alpha) <= 1e-10
    assert abs(cert.sigma_min - cert.alpha) <= 1e-10


def test_assemble_m_lt_n():
    T = zoo.build("kernel_toy_m_lt_n", 32)
    F, cert = assemble_small_norm(T, 0.2, boundary=1)
    assert cert.branch == "m<n" and (cert.n, cert.m) == (2, 1)
    assert F.norm < 0.2 and cert.alphaG_norm < 0.1 and cert.F0_norm < 0.1
    assert np.linalg.matrix_rank(F.matrix(), tol=1e-10) == cert.F_rank <= 2
    assert cert.sigma_min >= cert.alpha / 2
    assert cert.invariance <= 1e-8 and cert.unit_pairing <= 1e-8
    assert cert.assumptions


def test_assemble_hypotheses():
    # invertible, not quasinilpotent
    with pytest.raises(HypothesisFailed):
        assemble_small_norm(make_operator(Diagonal(np.arange(1.0, 9)), 8), 0.2)
    # nilpotent but injective on the interior columns: n = 0
    with pytest.raises(HypothesisFailed):
        scaled_bridge(make_operator(Nilpotent(), 8), 0.2, boundary=1)
    with pytest.raises(ValueError):
        scaled_bridge(make_operator(Nilpotent(), 4), 0.0)
    assert is_quasinilpotent(zoo.build("kernel_toy_m_lt_n", 16))
