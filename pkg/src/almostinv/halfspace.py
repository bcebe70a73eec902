"""Pre-annihilators, defects of almost-invariant subspaces, invariance checks.

A subspace ``Y`` is stored twice: by an orthonormal basis (for projections)
and by defining functionals whose common kernel it is (for the algebraic
identities).  The numerical defect of ``Y`` for ``T`` is the rank of the
part of ``T Y`` that leaves ``Y``; the Euclidean complement basis makes that
an ``N x dim(Y)`` singular value problem instead of a ``D x dim(Y)`` one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DefectMismatch
from .operators import OperatorRep, operator_norm

DEFECT_RTOL = 1e-8
DEFECT_ATOL = 1e-10
TOL_INVARIANCE = 1e-8
PROXY_FRACTION = 8     # a "half-space" proxy keeps codim <= D/8


def _rank_tol(s, shape):
    if s.size == 0:
        return 0.0
    return max(shape) * np.finfo(float).eps * s[0]


@dataclass(frozen=True, eq=False)
class HalfSpaceRep:
    defining_functionals: np.ndarray   # (N, D); Y = {x : F x = 0}
    basis: np.ndarray                  # (D, dim) orthonormal
    complement: np.ndarray             # (D, codim) orthonormal basis of Y^perp
    dim: int
    codim_in_truncation: int
    halfspace_proxy_flag: bool

    @property
    def ambient_dim(self):
        return self.basis.shape[0]

    @classmethod
    def from_basis(cls, vectors) -> "HalfSpaceRep":
        """Span of the given columns, with defining functionals conj(complement)."""
        V = np.atleast_2d(np.asarray(vectors, dtype=complex))
        D = V.shape[0]
        if V.shape[1] == 0:
            Q = np.zeros((D, 0), complex)
            comp = np.eye(D, dtype=complex)
        else:
            U, s, _ = scipy.linalg.svd(V, full_matrices=True)
            r = int(np.sum(s > _rank_tol(s, V.shape)))
            Q, comp = U[:, :r], U[:, r:]
        funcs = comp.conj().T
        return cls(funcs, Q, comp, Q.shape[1], comp.shape[1],
                   _proxy(comp.shape[1], D))


def _proxy(codim, D):
    return bool(1 <= codim <= D / PROXY_FRACTION and D - codim >= 1)


def preannihilator(functionals, D) -> HalfSpaceRep:
    """``{x : f(x) = 0 for every f}`` under the bilinear pairing.

    ``F x = 0`` means ``x`` is Euclidean-orthogonal to the conjugated rows of
    ``F``, so the null space comes from the full SVD of ``F``.
    """
    F = np.asarray(functionals, dtype=complex)
    if F.size == 0:
        F = np.zeros((0, D), complex)
        return HalfSpaceRep(F, np.eye(D, dtype=complex), np.zeros((D, 0), complex),
                            D, 0, False)
    F = np.atleast_2d(F)
    if F.shape[1] != D:
        raise ValueError(f"functionals have length {F.shape[1]}, expected {D}")
    _, s, Vh = scipy.linalg.svd(F, full_matrices=True)
    r = int(np.sum(s > _rank_tol(s, F.shape)))
    basis = Vh[r:].conj().T
    comp = Vh[:r].conj().T
    return HalfSpaceRep(F, basis, comp, D - r, r, _proxy(r, D))


@dataclass(frozen=True)
class DefectReport:
    defect: int
    residual_spectrum: np.ndarray
    threshold: float
    note: str = "numerical rank at the stated threshold; basis dependent"

    @property
    def gap(self) -> float:
        """``sigma_1 / sigma_2`` of the out-of-subspace compression."""
        s = self.residual_spectrum
        if s.size < 2:
            return np.inf
        return float(s[0] / s[1]) if s[1] > 0 else np.inf


def out_of_subspace(T: OperatorRep, Y: HalfSpaceRep) -> np.ndarray:
    """``C^H T B``: the component of ``T Y`` orthogonal to ``Y``."""
    return Y.complement.conj().T @ (T.matrix @ Y.basis)


def defect_estimate(T: OperatorRep, Y: HalfSpaceRep, threshold=None) -> DefectReport:
    """Numerical rank of ``(I - P_Y) T B_Y``.

    Default cut: ``max(1e-8 * sigma_1, 1e-10 * max(1, ||T||))``.
    """
    C = out_of_subspace(T, Y)
    s = scipy.linalg.svdvals(C) if C.size else np.zeros(0)
    if threshold is None:
        s1 = s[0] if s.size else 0.0
        threshold = max(DEFECT_RTOL * s1, DEFECT_ATOL * max(1.0, operator_norm(T)))
    return DefectReport(int(np.sum(s > threshold)), s, float(threshold))


def invariance_residual(T_plus_F: OperatorRep, Z: HalfSpaceRep, floor_rel=1e-6) -> float:
    """``max |h((T+F) z)| / (||h|| (||(T+F) z|| + floor))`` over basis and functionals.

    ``floor = floor_rel * max_z ||(T+F) z||`` keeps basis vectors that are
    mapped (almost) to zero from turning rounding noise into an O(1) ratio.
    """
    H = np.atleast_2d(Z.defining_functionals)
    if H.shape[0] == 0 or Z.dim == 0:
        return 0.0
    W = T_plus_F.matrix @ Z.basis
    wn = np.linalg.norm(W, axis=0)
    floor = max(floor_rel * float(wn.max()), np.finfo(float).tiny)
    num = np.abs(H @ W)
    den = np.outer(np.linalg.norm(H, axis=1), wn + floor)
    return float(np.max(num / den))


def perturbation_from_defect(T: OperatorRep, Y: HalfSpaceRep, f, c, tol=TOL_INVARIANCE):
    """Rank-one ``F = -c (x) f`` that makes ``Y`` invariant for ``T + F``.

    Requires ``T y - c(y) f`` to lie in ``Y`` for every basis vector ``y``;
    otherwise :class:`DefectMismatch`.
    """
    f = np.asarray(f, dtype=complex)
    c = np.asarray(c, dtype=complex)
    TB = T.matrix @ Y.basis
    R = TB - np.outer(f, c @ Y.basis)
    out = np.linalg.norm(Y.complement.conj().T @ R, axis=0)
    scale = np.linalg.norm(TB, axis=0) + np.abs(c @ Y.basis) * np.linalg.norm(f)
    scale = np.where(scale > 0, scale, 1.0)
    worst = float(np.max(out / scale)) if out.size else 0.0
    if worst > tol:
        raise DefectMismatch(
            f"T y - c(y) f leaves Y (relative residual {worst:.3e} > {tol:.1e})",
            residual=worst)
    return OperatorRep(T.dim, -np.outer(f, c))


def rank_one_defect_data(T: OperatorRep, Y: HalfSpaceRep, threshold=None):
    """``(f, c)`` with ``T y - c(y) f`` in ``Y``, read off the leading singular triple.

    Only meaningful when :func:`defect_estimate` reports a defect of at most
    one; raises :class:`DefectMismatch` otherwise.  A defect of zero gives
    ``f = c = 0``.
    """
    rep = defect_estimate(T, Y, threshold)
    D = T.dim
    if rep.defect == 0:
        return np.zeros(D, complex), np.zeros(D, complex)
    if rep.defect > 1:
        raise DefectMismatch(f"defect {rep.defect} cannot be removed by a rank-one term",
                             residual=float(rep.residual_spectrum[1]))
    U, s, Wh = scipy.linalg.svd(out_of_subspace(T, Y), full_matrices=False)
    f = Y.complement @ U[:, 0] * s[0]
    # c(y) = w^H B^H y under the bilinear pairing
    c = Y.basis.conj() @ Wh[0]
    return f, c


def principal_angles(A, B) -> np.ndarray:
    """Principal angles (radians) between the column spans of ``A`` and ``B``."""
    return scipy.linalg.subspace_angles(np.asarray(A), np.asarray(B))
