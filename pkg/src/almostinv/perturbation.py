"""The two rank-one constructions.

``defect_one_construction`` takes the pre-annihilator ``Z`` of a resolvent
family and either finds it already invariant or produces ``f = T z0`` and
the functional ``alpha = e*/e*(z0)`` so that ``T z - alpha(z) f`` stays in
``Z``.  ``small_norm_rank_one`` builds ``f = sum x_n / ||h_n||`` from a
biorthogonal system so that ``h_n(f) = 1`` and ``e* (x) f`` has small norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .biorthogonal import dual_system
from .errors import BudgetInfeasible, RankDeficient
from .halfspace import (HalfSpaceRep, defect_estimate, invariance_residual,
                        preannihilator)
from .operators import OperatorRep

NORM_RTOL = 1e-10
TOL_ALREADY_INVARIANT = 1e-10


@dataclass(frozen=True, eq=False)
class PerturbationRep:
    """``F = sum_i c_i (x) v_i``, i.e. ``F x = sum_i c_i(x) v_i``.

    ``pairs`` holds ``(functional, vector)``.  A single pair is the rank-one
    case, whose norm is ``||c|| ||v||`` exactly.
    """

    pairs: tuple
    norm: float
    epsilon_budget: Optional[float] = None

    def __post_init__(self):
        if self.epsilon_budget is not None and not self.norm < self.epsilon_budget:
            raise ValueError(
                f"perturbation norm {self.norm:.6g} exceeds its budget {self.epsilon_budget:.6g}")

    @classmethod
    def rank_one(cls, functional, vector, epsilon_budget=None):
        c = np.asarray(functional, dtype=complex)
        v = np.asarray(vector, dtype=complex)
        return cls(((c, v),), float(np.linalg.norm(c) * np.linalg.norm(v)), epsilon_budget)

    @classmethod
    def finite_rank(cls, pairs, epsilon_budget=None):
        pairs = tuple((np.asarray(c, dtype=complex), np.asarray(v, dtype=complex))
                      for c, v in pairs)
        return cls(pairs, _factored_norm(pairs), epsilon_budget)

    @property
    def kind(self):
        return "rank_one" if len(self.pairs) == 1 else "finite_rank"

    @property
    def dim(self):
        return self.pairs[0][1].shape[0]

    def matrix(self) -> np.ndarray:
        V = np.stack([v for _, v in self.pairs], axis=1)
        C = np.stack([c for c, _ in self.pairs], axis=0)
        return V @ C

    def operator(self) -> OperatorRep:
        return OperatorRep(self.dim, self.matrix())

    def apply(self, x):
        return sum((c @ x) * v for c, v in self.pairs)

    def rank(self, rtol=1e-10) -> int:
        s = np.linalg.svd(self.matrix(), compute_uv=False)
        return int(np.sum(s > rtol * max(s[0], np.finfo(float).tiny))) if s.size else 0

    def __add__(self, other):
        if not isinstance(other, PerturbationRep):
            return NotImplemented
        return PerturbationRep.finite_rank(self.pairs + other.pairs)


def _factored_norm(pairs):
    if not pairs:
        return 0.0
    V = np.stack([v for _, v in pairs], axis=1)
    C = np.stack([c for c, _ in pairs], axis=1)
    # ||V C^T|| via thin QR of both factors
    _, Rv = np.linalg.qr(V)
    _, Rc = np.linalg.qr(C)
    return float(np.linalg.norm(Rv @ Rc.T, 2))


# --------------------------------------------------------------------------
# defect one
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DefectOneResult:
    already_invariant: bool
    z0: Optional[np.ndarray] = None
    f: Optional[np.ndarray] = None
    alpha: Optional[np.ndarray] = None
    F: Optional[PerturbationRep] = None
    cancellation: float = 0.0       # max relative |h_n(T z - alpha(z) f)|
    invariance: float = 0.0         # invariance residual of T + F (or T) on Z
    defect: Optional[object] = None


def cancellation_residual(T, h_stars, Z, alpha, f) -> float:
    """``max |h_n(T z - alpha(z) f)| / (||h_n|| (||T z|| + |alpha(z)| ||f||))``."""
    H = np.atleast_2d(h_stars)
    TB = T.matrix @ Z.basis
    az = alpha @ Z.basis
    R = TB - np.outer(f, az)
    num = np.abs(H @ R)
    scale = np.linalg.norm(TB, axis=0) + np.abs(az) * np.linalg.norm(f)
    den = np.outer(np.linalg.norm(H, axis=1), scale) + np.finfo(float).tiny
    return float(np.max(num / den))


def defect_one_construction(T: OperatorRep, fam, Z: HalfSpaceRep = None,
                            tol=TOL_ALREADY_INVARIANT) -> DefectOneResult:
    """Make ``Z = [h_n]^T`` invariant with one rank-one correction.

    If ``e*`` vanishes on ``Z`` the subspace is already invariant.  Otherwise
    ``z0`` is the ``Z``-basis vector maximising ``|e*(z0)|``, ``f = T z0``,
    ``alpha = e*/e*(z0)`` and ``F = -alpha (x) f``.
    """
    if Z is None:
        Z = preannihilator(fam.h_stars, T.dim)
    e = np.asarray(fam.e_star)
    ez = e @ Z.basis
    if Z.dim == 0 or np.max(np.abs(ez)) <= tol * np.linalg.norm(e):
        return DefectOneResult(True, invariance=invariance_residual(T, Z),
                               defect=defect_estimate(T, Z))
    j = int(np.argmax(np.abs(ez)))
    z0 = Z.basis[:, j]
    f = T.apply(z0)
    alpha = e / ez[j]
    F = PerturbationRep.rank_one(-alpha, f)
    TF = T + F.matrix()
    return DefectOneResult(
        False, z0, f, alpha, F,
        cancellation=cancellation_residual(T, fam.h_stars, Z, alpha, f),
        invariance=invariance_residual(TF, Z),
        defect=defect_estimate(T, Z))


# --------------------------------------------------------------------------
# small norm
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SmallNormResult:
    F: PerturbationRep
    Z: HalfSpaceRep
    indices: tuple            # family indices of the functionals used
    f: np.ndarray
    M_bound: float
    tail_sum: float           # sum 1/||h_n|| over the used indices
    unit_pairing: float       # max |h_n(f) - 1|
    invariance: float
    biorthogonality: float

    def __iter__(self):
        # unpacks as (F, Z)
        return iter((self.F, self.Z))


def small_norm_rank_one(T: OperatorRep, fam, bio, eps, min_keep=2) -> SmallNormResult:
    """Rank-one ``F = e* (x) f`` with ``||F|| < eps`` and ``[h_n]^T`` invariant for ``T+F``.

    Starting from the indices of ``bio``, the smallest-norm ``h_n`` are
    dropped one at a time until ``sum 1/||h_n|| < eps / M`` where ``M`` is the
    largest minimum-norm dual for the remaining functionals.  At least
    ``min_keep`` functionals are kept.
    """
    e = np.asarray(fam.e_star)
    if abs(np.linalg.norm(e) - 1.0) > 1e-12:
        raise ValueError("e* must be normalised (||e*|| = 1)")
    if eps <= 0:
        raise ValueError("eps must be positive")
    norms = np.asarray(fam.norms, dtype=float)
    order = sorted(bio.indices, key=lambda n: (norms[n], n))
    achievable = np.inf
    chosen = None
    while len(order) >= min_keep:
        idx = sorted(order)
        try:
            sys_ = dual_system(np.asarray(fam.x_stars)[idx], indices=idx)
        except RankDeficient:
            order = order[1:]
            continue
        tail = float(np.sum(1.0 / norms[idx]))
        achievable = min(achievable, sys_.M_bound * tail)
        if tail < eps / sys_.M_bound:
            chosen = (idx, sys_, tail)
            break
        order = order[1:]
    if chosen is None:
        raise BudgetInfeasible(
            f"no tail of {len(bio.indices)} functionals meets sum 1/||h_n|| < eps/M "
            f"for eps={eps:g}; best achievable eps is {achievable:.4g}",
            achievable=float(achievable))

    idx, sys_, tail = chosen
    f = (sys_.x_duals / norms[idx][:, None]).sum(axis=0)
    F = PerturbationRep.rank_one(e, f, epsilon_budget=eps)
    Z = preannihilator(np.asarray(fam.x_stars)[idx], T.dim)
    h = np.asarray(fam.h_stars)[idx]
    unit = float(np.max(np.abs(h @ f - 1.0)))
    TF = T + F.matrix()
    return SmallNormResult(F, Z, tuple(idx), f, sys_.M_bound, tail, unit,
                           invariance_residual(TF, Z), sys_.pairing_residual)
