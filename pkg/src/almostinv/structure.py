"""Case-analysis tools: orbit minimality, range chains, eigenvector spans, Riesz projections."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import (ContourHitsSpectrum, InsufficientEigenpairs, NoStabilization,
                     NotEigenpair, OrbitCollapsed, QuadratureNotConverged)
from .halfspace import HalfSpaceRep
from .operators import (Nilpotent, OperatorRep, as_vector, dense,
                        matrix_norm, operator_norm)

ORBIT_DELTA = 1e-6
CHAIN_TOL_RANK = 1e-8
EIGEN_TOL = 1e-8
RIESZ_TOL = 1e-8
RIESZ_NODES = 64
RIESZ_MAX_NODES = 4096
CONTOUR_CLEARANCE = 1e-6


# --------------------------------------------------------------------------
# orbits
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OrbitReport:
    minimal: bool
    failing_index: Optional[int]
    distances: np.ndarray              # relative distance of T^p z to the other orbit vectors
    refinement_residual: Optional[float] = None   # T^p z against later vectors, at failing p
    collapsed_at: Optional[int] = None
    delta: float = ORBIT_DELTA


def _dist_to_span(v, B):
    """Euclidean distance from ``v`` to the column span of ``B``."""
    if B.shape[1] == 0:
        return float(np.linalg.norm(v))
    coef = scipy.linalg.lstsq(B, v)[0]
    return float(np.linalg.norm(v - B @ coef))


def _leave_one_out(U):
    """Distance of each unit column of ``U`` to the span of the others.

    For full column rank ``dist_p^2 = 1 / (G^{-1})_pp`` with ``G = U^H U``;
    with ``U = QR`` that is ``1 / ||row p of R^{-1}||^2``.  Ill-conditioned
    orbits fall back to one least-squares problem per column.
    """
    k = U.shape[1]
    if k == 1:
        return np.ones(1)
    R = scipy.linalg.qr(U, mode="r")[0][:k]
    d = np.abs(np.diag(R))
    if d.min() > 1e-8 * d.max():
        Rinv = scipy.linalg.solve_triangular(R, np.eye(k))
        return 1.0 / np.linalg.norm(Rinv, axis=1)
    return np.array([_dist_to_span(U[:, p], np.delete(U, p, axis=1)) for p in range(k)])


def orbit_minimality(T: OperatorRep, z, K=None, delta=ORBIT_DELTA) -> OrbitReport:
    """Is ``{T^k z : 0 <= k <= K}`` a minimal sequence, up to ``delta``?

    Distances are relative: ``dist(T^p z, span of the others) / ||T^p z||``.
    An orbit vector whose norm drops below machine precision (relative to
    the largest earlier one) ends the orbit and emits :class:`OrbitCollapsed`.
    """
    z = as_vector(z, T.dim)
    if not np.any(z):
        raise ValueError("z must be nonzero")
    K = T.dim // 2 if K is None else int(K)
    if not 0 <= K <= T.dim:
        raise ValueError(f"horizon K must lie in [0, {T.dim}], got {K}")
    vs = [z]
    collapsed = None
    top = np.linalg.norm(z)
    for k in range(1, K + 1):
        v = T.apply(vs[-1])
        nv = np.linalg.norm(v)
        if nv <= np.finfo(float).eps * top:
            collapsed = k
            warnings.warn(f"orbit collapsed at step {k} (||T^k z|| = {nv:.3e})", OrbitCollapsed,
                          stacklevel=2)
            break
        top = max(top, nv)
        vs.append(v)
    U = np.stack(vs, axis=1)
    U = U / np.linalg.norm(U, axis=0)
    dist = _leave_one_out(U)
    bad = np.flatnonzero(dist <= delta)
    if bad.size == 0:
        return OrbitReport(True, None, dist, None, collapsed, delta)
    p = int(bad[0])
    refine = _dist_to_span(U[:, p], U[:, p + 1:]) if p + 1 < U.shape[1] else 1.0
    return OrbitReport(False, p, dist, refine, collapsed, delta)


# --------------------------------------------------------------------------
# range chain
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ChainReport:
    j_star: int
    ranks: tuple                 # rank(T^j), j = 0..j*+1
    codims: tuple
    restriction: Optional[OperatorRep]   # compression of T to range(T^{j*})
    sigma_min: Optional[float]           # adjoint injectivity certificate
    degenerate: bool                     # stabilised at the zero space


def _rank_and_range(M, tol_rank):
    U, s, _ = scipy.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return 0, U[:, :0]
    r = int(np.sum(s > tol_rank * s[0]))
    return r, U[:, :r]


def dense_range_chain(T: OperatorRep, max_steps=None, tol_rank=CHAIN_TOL_RANK) -> ChainReport:
    """Ranks of ``T^j`` until ``rank T^{j+1} = rank T^j``.

    Reaching the zero space by losing exactly one rank per step is what a
    truncated shift does even though the infinite shift never stabilises;
    unless the operator is tagged nilpotent that run is reported through
    :class:`NoStabilization` with ``truncation_artifact=True``.
    """
    D = T.dim
    max_steps = D + 1 if max_steps is None else int(max_steps)
    M = np.asarray(T.matrix, dtype=complex)
    P = np.eye(D, dtype=complex)
    ranks = []
    bases = []
    for j in range(max_steps + 1):
        r, Q = _rank_and_range(P, tol_rank)
        ranks.append(r)
        bases.append(Q)
        if j > 0 and ranks[j] == ranks[j - 1]:
            break
        P = M @ P
    else:
        codims = [D - r for r in ranks]
        raise NoStabilization(
            f"ranks did not stabilise within {max_steps} steps (codims {codims})",
            codims=codims, truncation_artifact=_unit_loss(ranks))
    j = len(ranks) - 2
    codims = tuple(D - r for r in ranks)
    if ranks[j] == 0:
        if _unit_loss(ranks) and not isinstance(T.structure, Nilpotent):
            raise NoStabilization(
                "ranks fell to zero one step at a time: truncation artifact of a shift",
                codims=list(codims), truncation_artifact=True)
        return ChainReport(j, tuple(ranks), codims, None, None, True)
    Q = bases[j]
    C = Q.conj().T @ M @ Q
    smin = float(scipy.linalg.svdvals(C)[-1])
    return ChainReport(j, tuple(ranks), codims, dense(C) if C.shape[0] >= 1 else None,
                       smin, False)


def _unit_loss(ranks):
    d = np.diff(ranks)
    d = d[d != 0]
    return bool(d.size > 1 and np.all(d == -1))


# --------------------------------------------------------------------------
# eigenvector spans
# --------------------------------------------------------------------------

def eigen_halfspace(T: OperatorRep, eigen_data, selected, tol=EIGEN_TOL,
                    min_selected=2) -> HalfSpaceRep:
    """Span of the selected eigenvectors.

    Each supplied pair must satisfy ``||T v - lam v|| <= tol ||v|| max(1, ||T||)``.
    At least ``min_selected`` pairs must be selected and at least one withheld.
    """
    eigen_data = list(eigen_data)
    selected = sorted(set(int(i) for i in selected))
    if any(not 0 <= i < len(eigen_data) for i in selected):
        raise IndexError("selected index out of range")
    if len(selected) < min_selected:
        raise InsufficientEigenpairs(
            f"need at least {min_selected} selected eigenpairs, got {len(selected)}")
    if len(selected) == len(eigen_data):
        raise InsufficientEigenpairs("every eigenpair is selected; nothing is withheld")
    scale = max(1.0, operator_norm(T))
    for i, (lam, v) in enumerate(eigen_data):
        v = as_vector(v, T.dim)
        res = float(np.linalg.norm(T.apply(v) - lam * v) / np.linalg.norm(v))
        if res > tol * scale:
            raise NotEigenpair(f"pair {i} (lam={complex(lam)}) has residual {res:.3e}",
                               residual=res)
    V = np.stack([as_vector(eigen_data[i][1], T.dim) for i in selected], axis=1)
    return HalfSpaceRep.from_basis(V)


def cross_pairing(T: OperatorRep, eigen_data) -> np.ndarray:
    """``|w_i(v_j)| / (||w_i|| ||v_j||)`` for eigenvectors ``w_i`` of ``T*``.

    ``w_i`` is the eigenvector of ``T*`` for the eigenvalue closest to
    ``lam_i``.  Off-diagonal entries vanish in exact arithmetic when the
    eigenvalues differ; near-degenerate clusters show up as large entries.
    """
    lams, W = scipy.linalg.eig(np.asarray(T.matrix).T)
    V = np.stack([as_vector(v, T.dim) for _, v in eigen_data], axis=1)
    picks = [int(np.argmin(np.abs(lams - complex(lam)))) for lam, _ in eigen_data]
    Wsel = W[:, picks]
    P = np.abs(Wsel.T @ V)
    return P / np.outer(np.linalg.norm(Wsel, axis=0), np.linalg.norm(V, axis=0))


# --------------------------------------------------------------------------
# Riesz projections
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RieszData:
    center: complex
    radius: float
    nodes: int
    P: OperatorRep
    residuals: dict              # idempotency, commutation (partition via partition_residual)
    increment: float             # ||P_2N - P_N|| at the accepted node count


def _trapezoid(M, center, radius, thetas):
    D = M.shape[0]
    S = np.zeros((D, D), complex)
    I = np.eye(D)
    for th in thetas:
        w = radius * np.exp(1j * th)
        S += w * scipy.linalg.solve(((center + w) * I - M), I, check_finite=False)
    return S


def riesz_projection(T: OperatorRep, center, radius, nodes=RIESZ_NODES, tol=RIESZ_TOL,
                     max_nodes=RIESZ_MAX_NODES) -> RieszData:
    """Trapezoid rule for ``(1/2 pi i) \\oint (zeta I - T)^{-1} d zeta`` on a circle.

    The node count doubles (reusing previous nodes) until two successive
    approximations differ by at most ``tol * max(1, ||P||)``.
    """
    center = complex(center)
    radius = float(radius)
    if radius <= 0:
        raise ValueError("radius must be positive")
    if nodes < 4:
        raise ValueError("need at least 4 nodes")
    M = np.asarray(T.matrix, dtype=complex)
    ev = np.linalg.eigvals(M)
    gap = float(np.min(np.abs(np.abs(ev - center) - radius)))
    if gap <= CONTOUR_CLEARANCE:
        raise ContourHitsSpectrum(
            f"an eigenvalue lies within {gap:.3e} of the circle |z - {center}| = {radius}")

    N = int(nodes)
    S = _trapezoid(M, center, radius, 2 * np.pi * np.arange(N) / N)
    P = S / N
    while True:
        if 2 * N > max_nodes:
            raise QuadratureNotConverged(
                f"projection still changing after {N} nodes (max {max_nodes})")
        S = S + _trapezoid(M, center, radius, 2 * np.pi * (np.arange(N) + 0.5) / N)
        N *= 2
        P_new = S / N
        inc = matrix_norm(P_new - P)
        P = P_new
        if inc <= tol * max(1.0, matrix_norm(P)):
            break
    res = {"idempotency": matrix_norm(P @ P - P),
           "commutation": matrix_norm(P @ M - M @ P)}
    return RieszData(center, radius, N, OperatorRep(T.dim, P), res, float(inc))


def partition_residual(projections) -> float:
    """``||sum_i P_i - I||`` for a family meant to cover the whole spectrum."""
    projections = list(projections)
    if not projections:
        raise ValueError("no projections")
    D = projections[0].P.dim
    total = sum(np.asarray(r.P.matrix) for r in projections)
    return matrix_norm(total - np.eye(D))
