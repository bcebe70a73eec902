"""Well-conditioned subsequences of functionals and their biorthogonal duals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import RankDeficient, TooFewSelected

KAPPA_MAX = 1e3
GAMMA_GROWTH = 2.0
RANK_FLOOR = 1e-10


def gram(x_stars) -> np.ndarray:
    """Sesquilinear Gram matrix ``G_ij = <x*_j, x*_i>`` of coefficient vectors."""
    X = np.atleast_2d(np.asarray(x_stars))
    return X.conj() @ X.T


def gram_cond(x_stars) -> float:
    s = scipy.linalg.svdvals(np.atleast_2d(np.asarray(x_stars)))
    if s[-1] == 0:
        return np.inf
    return float((s[0] / s[-1]) ** 2)


@dataclass(frozen=True, eq=False)
class BiorthogonalSystem:
    indices: tuple
    x_stars: np.ndarray    # (k, D)
    x_duals: np.ndarray    # (k, D); x_stars @ x_duals.T = I
    gram_cond: float
    M_bound: float

    @property
    def pairing(self):
        """Matrix ``x*_i(x_j)``."""
        return self.x_stars @ self.x_duals.T

    @property
    def pairing_residual(self) -> float:
        P = self.pairing
        return float(np.max(np.abs(P - np.eye(P.shape[0]))))


def select_subsequence(fam, kappa_max=KAPPA_MAX, gamma_growth=GAMMA_GROWTH) -> list:
    """Greedy pass over the family in index order.

    Index ``n`` is kept when the Gram condition number of the kept
    functionals stays below ``kappa_max`` and ``||h_n||`` is at least
    ``gamma_growth`` times the last kept norm.
    """
    xs = np.asarray(fam.x_stars)
    norms = np.asarray(fam.norms, dtype=float)
    if xs.shape[0] == 0:
        raise TooFewSelected("empty family")
    kept = []
    last = None
    for n in range(xs.shape[0]):
        if last is not None and norms[n] < gamma_growth * last:
            continue
        if gram_cond(xs[kept + [n]]) > kappa_max:
            continue
        kept.append(n)
        last = norms[n]
    if len(kept) < 2:
        raise TooFewSelected(f"only {len(kept)} index survived the selection")
    return kept


def dual_system(x_stars, dim=None, indices=None) -> BiorthogonalSystem:
    """Minimum-norm vectors ``x_j`` with ``x*_i(x_j) = delta_ij``.

    The duals are the columns of the pseudoinverse of the functional
    coordinate matrix; under the bilinear pairing that is exactly the
    minimum-norm solution of the biorthogonality system.
    """
    X = np.atleast_2d(np.asarray(x_stars, dtype=complex))
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"functionals have length {X.shape[1]}, expected {dim}")
    s = scipy.linalg.svdvals(X)
    if s[-1] <= RANK_FLOOR:
        raise RankDeficient(
            f"functionals are numerically dependent (smallest singular value {s[-1]:.3e})",
            sigma_min=float(s[-1]))
    Y = np.linalg.pinv(X)             # (D, k), X @ Y = I
    duals = Y.T.copy()
    M = float(np.max(np.linalg.norm(duals, axis=1)))
    idx = tuple(range(X.shape[0])) if indices is None else tuple(indices)
    return BiorthogonalSystem(idx, X, duals, float((s[0] / s[-1]) ** 2), M)


def biorthogonal_from_family(fam, kappa_max=KAPPA_MAX, gamma_growth=GAMMA_GROWTH):
    idx = select_subsequence(fam, kappa_max, gamma_growth)
    return dual_system(np.asarray(fam.x_stars)[idx], indices=idx)
