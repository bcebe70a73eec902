"""Kernel/co-range bridge for operators with 0 in the point spectrum of T and T*.

``G`` sends an orthonormal kernel basis ``f_i`` onto an orthonormal basis
``g_i`` of the orthogonal complement of the range, so ``T + alpha G`` loses
either its kernel (``n <= m``) or its range defect (``m < n``).  In the
second case a small rank-one ``F0`` from the resolvent-family construction
is added on top.

A square truncation always has ``dim ker = codim ran``.  ``boundary`` lets
callers mark the last ``b`` coordinates as the truncation edge: the kernel is
computed on the first ``D - b`` columns and the co-range on the first
``D - b`` rows, which recovers the infinite-dimensional counts for shift-like
toys.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .biorthogonal import GAMMA_GROWTH, biorthogonal_from_family
from .errors import BranchUnsupported, HypothesisFailed, NoDefect
from .operators import Nilpotent, OperatorRep, dense, operator_norm, spectral_radius
from .perturbation import PerturbationRep, small_norm_rank_one
from .resolvent import ApproachSchedule, select_estar

TOL_RANK = 1e-8
QUASINILPOTENT_RTOL = 1e-6
ALPHA_MARGIN = 1e-6
STRUCTURAL_ASSUMPTIONS = (
    "spectrum of a compact perturbation of a quasinilpotent operator is at most countable "
    "(assumed, not checked at finite D)",
)


def _canonical_basis(V):
    """Deterministic orthonormal basis of span(V).

    Column-pivoted QR of the orthogonal projector picks the coordinate
    directions the subspace is closest to, so e.g. ``span{e1, e2}`` comes
    back as ``[e1, e2]`` no matter how the SVD rotated it.  Phases are fixed
    so the largest entry of each vector is real and positive.
    """
    D, k = V.shape
    if k == 0:
        return np.zeros((D, 0), complex)
    P = V @ V.conj().T
    Q, _, _ = scipy.linalg.qr(P, pivoting=True, mode="economic")
    Q = Q[:, :k]
    for j in range(k):
        i = int(np.argmax(np.abs(Q[:, j])))
        Q[:, j] *= abs(Q[i, j]) / Q[i, j]
    Q[np.abs(Q) < 1e-15] = 0
    return Q


@dataclass(frozen=True, eq=False)
class KernelRangeData:
    kernel_basis: np.ndarray     # (D, n) orthonormal
    corange_basis: np.ndarray    # (D, m) orthonormal, orthogonal to the range
    n: int
    m: int
    tol_rank: float
    boundary: int = 0


def kernel_range(T: OperatorRep, tol_rank=TOL_RANK, boundary=0) -> KernelRangeData:
    """Kernel and co-range bases from SVDs, cut at ``tol_rank * sigma_1``."""
    if not 0 <= boundary < T.dim:
        raise ValueError(f"boundary must lie in [0, {T.dim}), got {boundary}")
    M = np.asarray(T.matrix, dtype=complex)
    D = T.dim
    k = D - boundary
    s1 = operator_norm(T)
    cut = tol_rank * max(s1, np.finfo(float).tiny)

    # kernel of the first k columns, padded to length D
    _, s, Vh = scipy.linalg.svd(M[:, :k], full_matrices=True)
    r = int(np.sum(s > cut))
    ker = np.zeros((D, k - r), complex)
    ker[:k] = Vh[r:].conj().T

    # vectors supported on the first k coordinates, orthogonal to the first k rows' range
    U, s, _ = scipy.linalg.svd(M[:k, :], full_matrices=True)
    r = int(np.sum(s > cut))
    co = np.zeros((D, k - r), complex)
    co[:k] = U[:, r:]

    ker = _canonical_basis(ker)
    co = _canonical_basis(co)
    return KernelRangeData(ker, co, ker.shape[1], co.shape[1], float(tol_rank), int(boundary))


def bridge_operator(kr: KernelRangeData) -> PerturbationRep:
    """``G = sum_{i <= min(n, m)} conj(f_i) (x) g_i``.

    ``conj(f_i)`` is the functional ``x -> <x, f_i>``, i.e. the dual of the
    kernel basis extended by zero on the orthogonal complement ``Y``.
    Kernel vectors beyond ``m`` go to zero.
    """
    if kr.n == 0 or kr.m == 0:
        raise NoDefect(f"bridge needs n >= 1 and m >= 1 (n={kr.n}, m={kr.m})")
    k = min(kr.n, kr.m)
    pairs = [(kr.kernel_basis[:, i].conj(), kr.corange_basis[:, i]) for i in range(k)]
    return PerturbationRep.finite_rank(pairs)


def is_quasinilpotent(T: OperatorRep, rtol=QUASINILPOTENT_RTOL) -> bool:
    if isinstance(T.structure, Nilpotent):
        return True
    return spectral_radius(T) <= rtol * operator_norm(T)


@dataclass(frozen=True, eq=False)
class BridgeCertificate:
    branch: str                  # "n<=m" or "m<n"
    n: int
    m: int
    alpha: float
    G_norm: float
    alphaG_norm: float
    proxy: str                   # which sigma_min was certified
    sigma_min: float
    sigma_floor: float
    F0_norm: float = None
    F_norm: float = None
    F_rank: int = None
    invariance: float = None
    unit_pairing: float = None
    indices: tuple = None
    assumptions: tuple = field(default=STRUCTURAL_ASSUMPTIONS)

    @property
    def proxy_ok(self) -> bool:
        return self.sigma_min > self.sigma_floor

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def scaled_bridge(T: OperatorRep, eps, tol_rank=TOL_RANK, boundary=0):
    """``(alpha*G, kernel data, certificate)`` with ``||alpha G|| < eps/2``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not is_quasinilpotent(T):
        raise HypothesisFailed("operator is not quasinilpotent at the truncation "
                               f"(spectral radius {spectral_radius(T):.3e})")
    kr = kernel_range(T, tol_rank, boundary)
    if kr.n == 0 or kr.m == 0:
        raise HypothesisFailed(f"0 must be an eigenvalue of T and T* (n={kr.n}, m={kr.m})")
    G = bridge_operator(kr)
    alpha = eps / (2 * G.norm * (1 + ALPHA_MARGIN))
    aG = PerturbationRep.finite_rank([(alpha * c, v) for c, v in G.pairs])
    A = T.matrix + aG.matrix()
    k = T.dim - boundary
    if kr.n <= kr.m:
        branch, proxy = "n<=m", "injectivity: sigma_min of (T + alpha G) on the interior columns"
        sv = scipy.linalg.svdvals(A[:, :k])
    else:
        branch, proxy = "m<n", "dense range: sigma_min of (T + alpha G)* on the interior rows"
        sv = scipy.linalg.svdvals(A[:k, :])
    cert = BridgeCertificate(branch, kr.n, kr.m, float(alpha), float(G.norm), float(aG.norm),
                             proxy, float(sv[-1]), float(tol_rank * sv[0]))
    return aG, kr, cert


def _rank(M, rtol=1e-10):
    s = scipy.linalg.svdvals(M)
    return int(np.sum(s > rtol * max(s[0], np.finfo(float).tiny))) if s.size else 0


def assemble_small_norm(T: OperatorRep, eps, tol_rank=TOL_RANK, boundary=0,
                        schedule=None, candidates=None, kappa_max=1e4,
                        gamma_growth=GAMMA_GROWTH):
    """``F = alpha G + F0`` with ``||F|| < eps`` and rank ``<= min(n, m) + 1``.

    Only the ``m < n`` branch produces ``F0`` (the small-norm rank-one
    construction applied to ``T + alpha G`` at the boundary point 0).  The
    ``n <= m`` branch raises :class:`BranchUnsupported` carrying the
    certificate for ``alpha G``.
    """
    aG, kr, cert = scaled_bridge(T, eps, tol_rank, boundary)
    if not cert.proxy_ok:
        raise HypothesisFailed(f"{cert.proxy} is {cert.sigma_min:.3e}, not above "
                               f"{cert.sigma_floor:.3e}")
    if cert.branch == "n<=m":
        raise BranchUnsupported(
            "the n <= m branch needs a rank-one F0 for an injective operator, "
            "which this package does not construct", certificate=cert)

    A = dense(T.matrix + aG.matrix())
    schedule = schedule or ApproachSchedule(q=1.0, r=0.7, count=4)
    e, fam = select_estar(A, 0.0, schedule, candidates, return_family=True)
    bio = biorthogonal_from_family(fam, kappa_max, gamma_growth)
    res = small_norm_rank_one(A, fam, bio, eps / 2)
    F = aG + res.F
    Fm = F.matrix()
    total = dict(cert.as_dict())
    total.update(F0_norm=float(res.F.norm), F_norm=float(F.norm), F_rank=_rank(Fm),
                 invariance=float(res.invariance), unit_pairing=float(res.unit_pairing),
                 indices=tuple(res.indices))
    return PerturbationRep(F.pairs, F.norm, eps), BridgeCertificate(**total)
