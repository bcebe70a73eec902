"""Named operators with the spectral facts the scenarios rely on."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .operators import (BackwardShift, Diagonal, ForwardShift, Nilpotent, OperatorRep, dense,
                        make_operator)


@dataclass(frozen=True)
class ZooEntry:
    name: str
    tag: str
    facts: str
    build: Callable      # (dim, params) -> OperatorRep
    boundary: int = 0    # truncation edge used by kernel/co-range counts


def _power(params, default):
    return float(params.get("power", default))


def _m_lt_n(dim, params):
    # T e1 = T e2 = 0, T e_k = k^{-p} e_{k-1}
    p = _power(params, 0.5)
    M = np.zeros((dim, dim))
    k = np.arange(3, dim + 1)
    M[k - 2, k - 1] = k ** -p
    return dense(M)


def _n_lt_m(dim, params):
    # T e1 = T e2 = 0, T e_k = e_{k+1} for k >= 3
    M = np.zeros((dim, dim))
    k = np.arange(3, dim)
    M[k, k - 1] = 1.0
    return dense(M)


def _diag_cluster(dim, params):
    # half the eigenvalues near 0, half near 5, in a random non-orthogonal basis
    rng = np.random.default_rng(int(params.get("seed", 0)))
    spread = float(params.get("spread", 0.05))
    h = dim // 2
    d = np.concatenate([rng.normal(0, spread, h), 5 + rng.normal(0, spread, dim - h)])
    Q = np.linalg.qr(rng.standard_normal((dim, dim)))[0]
    S = Q + 0.1 * rng.standard_normal((dim, dim))
    return dense(S @ np.diag(d) @ np.linalg.inv(S))


def _rank_one_diagonal(dim, params):
    rng = np.random.default_rng(int(params.get("seed", 0)))
    d = np.linspace(1, 2, dim)
    u, v = rng.standard_normal(dim), rng.standard_normal(dim)
    return dense(np.diag(d) + 0.1 * np.outer(u, v) / np.sqrt(dim))


ZOO = {e.name: e for e in [
    ZooEntry("forward_shift_unweighted", "ForwardShift",
             "no eigenvalues; spectrum = closed unit disk",
             lambda D, p: make_operator(ForwardShift(np.ones(D)), D)),
    ZooEntry("backward_shift_unweighted", "BackwardShift",
             "every |lam| < 1 is an eigenvalue; spectrum = closed unit disk",
             lambda D, p: make_operator(BackwardShift(np.ones(D)), D)),
    ZooEntry("weighted_forward_shift", "ForwardShift",
             "weights k^{-power} -> 0: quasinilpotent, no eigenvalues",
             lambda D, p: make_operator(
                 ForwardShift(np.arange(1, D, dtype=float) ** -_power(p, 1.0)), D)),
    ZooEntry("jordan_block", "Nilpotent", "nilpotent; n=m=1",
             lambda D, p: make_operator(Nilpotent(), D)),
    ZooEntry("identity", "Diagonal", "spectrum = {1}; every vector is an eigenvector",
             lambda D, p: make_operator(Diagonal(np.ones(D)), D)),
    ZooEntry("diagonal_harmonic", "Diagonal",
             "eigenvalues 1/k; spectrum = {0} and the 1/k; 0 is not an eigenvalue",
             lambda D, p: make_operator(Diagonal(1 / np.arange(1, D + 1)), D)),
    ZooEntry("diag_cluster", "Dense",
             "diagonalisable, eigenvalue clusters near 0 and 5",
             _diag_cluster),
    ZooEntry("rank_one_diagonal", "Dense",
             "diagonal 1..2 plus a small random rank-one term",
             _rank_one_diagonal),
    ZooEntry("kernel_toy_m_lt_n", "Dense",
             "nilpotent truncation; n=2, m=1 with boundary 1",
             _m_lt_n, boundary=1),
    ZooEntry("kernel_toy_n_lt_m", "Dense",
             "nilpotent truncation; n=2, m=3 with boundary 1",
             _n_lt_m, boundary=1),
]}


def zoo_list(filter_text=""):
    """Entries whose name, tag or facts contain ``filter_text`` (all if empty)."""
    f = (filter_text or "").lower()
    return [e for e in ZOO.values()
            if not f or f in e.name.lower() or f in e.tag.lower() or f in e.facts.lower()]


def build(name, dim, params=None) -> OperatorRep:
    if name not in ZOO:
        raise KeyError(name)
    return ZOO[name].build(int(dim), dict(params or {}))
