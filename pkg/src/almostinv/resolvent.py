"""Resolvent families ``h_n = (lam_n I - T*)^{-1} e*`` near a boundary point.

Given a spectral point ``lam`` of ``T*`` and points ``lam_n -> lam`` in the
resolvent set, the normalised vectors ``x_n = h_n / ||h_n||`` satisfy

    T* x_n = lam_n x_n - e* / ||h_n||

exactly, which every built family records as a residual.  Whether the
``||h_n||`` blow up is what decides if the rest of the construction can go
through, so the growth diagnostics live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import AllCandidatesBounded, FamilyTooShort, ScheduleExhausted
from .operators import (Diagonal, ForwardShift, OperatorRep, adjoint, as_vector, resolvent_solve,
                        shifted_sigma_min)

TOL_INVEQ = 1e-8
GROWTH_FACTOR = 10.0


@dataclass(frozen=True)
class ApproachSchedule:
    """Points ``lam_n = lam * (1 + q r^n)``, n = 1..count.

    For ``lam == 0`` the offsets ``q r^n`` are used directly.
    """

    q: float = 1.0
    r: float = 0.25
    count: int = 6

    def __post_init__(self):
        if not (0 < abs(self.r) < 1):
            raise ValueError("schedule ratio r must satisfy 0 < |r| < 1")
        if self.count < 1:
            raise ValueError("schedule count must be positive")

    def points(self, lam) -> np.ndarray:
        lam = complex(lam)
        n = np.arange(1, self.count + 1)
        offsets = self.q * self.r ** n
        if lam == 0:
            return offsets.astype(complex)
        return lam * (1 + offsets)


@dataclass(frozen=True, eq=False)
class ResolventFamily:
    boundary_point: complex
    lambdas: np.ndarray
    h_stars: np.ndarray          # (N, D)
    norms: np.ndarray
    x_stars: np.ndarray          # (N, D), unit rows
    e_star: np.ndarray
    inveq_residuals: np.ndarray

    def __len__(self):
        return len(self.lambdas)

    @property
    def dim(self):
        return self.e_star.shape[0]

    @property
    def max_inveq_residual(self):
        return float(np.max(self.inveq_residuals)) if len(self) else 0.0

    def subfamily(self, indices) -> "ResolventFamily":
        idx = list(indices)
        return ResolventFamily(self.boundary_point, self.lambdas[idx], self.h_stars[idx],
                               self.norms[idx], self.x_stars[idx], self.e_star,
                               self.inveq_residuals[idx])


def inveq_residual(Tstar: OperatorRep, lam_n, x_n, e_star, h_norm) -> float:
    """``||T* x_n - lam_n x_n + e*/||h_n||| |``, an exact identity up to solver error."""
    return float(np.linalg.norm(Tstar.apply(x_n) - lam_n * x_n + e_star / h_norm))


def build_family(T: OperatorRep, lam, schedule=None, e_star=None, count=None,
                 lambdas=None, method="auto") -> ResolventFamily:
    """Solve ``(lam_n I - T*) h_n = e*`` along the approach schedule.

    ``lambdas`` overrides the schedule with explicit points.  Singular
    points propagate :class:`SingularResolvent`; a schedule whose points
    collapse onto each other in floating point raises
    :class:`ScheduleExhausted`.
    """
    if e_star is None:
        raise ValueError("e_star is required")
    e = as_vector(e_star, T.dim)
    if not np.any(e):
        raise ValueError("e_star must be nonzero")
    if lambdas is None:
        schedule = schedule or ApproachSchedule()
        if count is not None and count != schedule.count:
            schedule = ApproachSchedule(schedule.q, schedule.r, count)
        lambdas = schedule.points(lam)
    lambdas = np.asarray(lambdas, dtype=complex)
    Tstar = adjoint(T)

    hs = np.empty((len(lambdas), T.dim), dtype=complex)
    for i, lam_n in enumerate(lambdas):
        hs[i] = resolvent_solve(Tstar, lam_n, e, method=method)

    if len(np.unique(lambdas)) < len(lambdas):
        raise ScheduleExhausted(
            f"only {len(np.unique(lambdas))} distinct points out of {len(lambdas)}; "
            "the schedule has collapsed in floating point")

    norms = np.linalg.norm(hs, axis=1)
    xs = hs / norms[:, None]
    res = np.array([inveq_residual(Tstar, l, x, e, n)
                    for l, x, n in zip(lambdas, xs, norms)])
    return ResolventFamily(complex(lam), lambdas, hs, norms, xs, e, res)


@dataclass(frozen=True)
class GrowthReport:
    growing: bool
    rate: float
    ratio: float


def growth_diagnostic(fam, factor=GROWTH_FACTOR) -> GrowthReport:
    """Does ``||h_n||`` blow up along the family?

    ``growing`` requires strict increase over the last ``ceil(N/2)`` entries
    and ``last/first >= factor``.  ``rate`` is the least-squares slope of
    ``log ||h_n||`` against ``n``.
    """
    norms = np.asarray(fam.norms, dtype=float)
    N = norms.shape[0]
    if N < 3:
        raise FamilyTooShort(f"growth diagnostic needs at least 3 entries, got {N}")
    tail = norms[N - math.ceil(N / 2):]
    increasing = bool(np.all(np.diff(tail) > 0))
    ratio = float(norms[-1] / norms[0])
    rate = float(np.polyfit(np.arange(1, N + 1), np.log(norms), 1)[0])
    return GrowthReport(increasing and ratio >= factor, rate, ratio)


def default_candidates(dim, seed=0) -> List[np.ndarray]:
    """The standard dictionary: ``e_1``, ``(1/k)``, ``(k^{-3/4})``, Gaussian."""
    k = np.arange(1, dim + 1, dtype=float)
    rng = np.random.default_rng(seed)
    e1 = np.zeros(dim)
    e1[0] = 1.0
    return [e1.astype(complex), (1 / k).astype(complex), (k ** -0.75).astype(complex),
            rng.standard_normal(dim).astype(complex)]


def named_candidate(name, dim, seed=0) -> np.ndarray:
    """Candidate vectors addressable from scenario files.

    ``e1``, ``harmonic`` (1/k), ``power:<p>`` (k^{-p}), ``gaussian``.
    """
    k = np.arange(1, dim + 1, dtype=float)
    if name == "e1":
        v = np.zeros(dim)
        v[0] = 1.0
    elif name == "harmonic":
        v = 1 / k
    elif name.startswith("power:"):
        v = k ** -float(name.split(":", 1)[1])
    elif name == "gaussian":
        v = np.random.default_rng(seed).standard_normal(dim)
    else:
        raise ValueError(f"unknown candidate {name!r}")
    return v.astype(complex)


def select_estar(T: OperatorRep, lam, schedule=None, candidates=None,
                 factor=GROWTH_FACTOR, return_family=False):
    """Pick the candidate with the largest ``||h_N||`` among growing ones.

    Candidates are normalised first so the comparison is scale free; the
    normalised winner is returned (with its family if ``return_family``).
    Ties go to the earlier candidate.
    """
    schedule = schedule or ApproachSchedule()
    if candidates is None:
        candidates = default_candidates(T.dim)
    if len(candidates) == 0:
        raise ValueError("candidate list is empty")
    best = None
    for c in candidates:
        c = as_vector(c, T.dim)
        c = c / np.linalg.norm(c)
        fam = build_family(T, lam, schedule, c)
        if not growth_diagnostic(fam, factor).growing:
            continue
        if best is None or fam.norms[-1] > best[1].norms[-1]:
            best = (c, fam)
    if best is None:
        raise AllCandidatesBounded(
            f"none of {len(candidates)} candidates shows resolvent growth at lam={complex(lam)}")
    return best if return_family else best[0]


@dataclass(frozen=True)
class DecayReport:
    """Finite surrogate for weak-star nullity.  Not equivalent to it."""

    coords: np.ndarray           # probed coordinate indices (1-based)
    values: np.ndarray           # (N, probe) |x_n(e_k)|
    tail_max: np.ndarray         # per coordinate, max over the second half of the family
    decaying: np.ndarray         # per coordinate, strictly decreasing along the family


def wstar_decay_diagnostic(fam, probe_coords=8) -> DecayReport:
    xs = np.asarray(fam.x_stars)
    if xs.size == 0:
        empty = np.zeros(0)
        return DecayReport(np.zeros(0, dtype=int), np.zeros((0, 0)), empty,
                           np.zeros(0, dtype=bool))
    p = min(int(probe_coords), xs.shape[1])
    vals = np.abs(xs[:, :p])
    N = vals.shape[0]
    tail = vals[N // 2:]
    decaying = np.all(np.diff(vals, axis=0) < 0, axis=0) if N > 1 else np.zeros(p, bool)
    return DecayReport(np.arange(1, p + 1), vals, tail.max(axis=0), decaying)


# --------------------------------------------------------------------------
# boundary-point hypothesis
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryHypothesis:
    """Is ``lam`` in the boundary of sigma(T*) but not an eigenvalue of T*?

    ``structural`` is True/False when the operator's tag settles the question
    for the untruncated operator, ``None`` when only the numerical check is
    available.  ``numerical_eigenvalue`` reports whether ``lam I - T*`` is
    singular at the truncation.
    """

    holds: bool
    structural: Optional[bool]
    numerical_eigenvalue: bool
    reason: str


def boundary_hypothesis(T: OperatorRep, lam) -> BoundaryHypothesis:
    lam = complex(lam)
    sigma, norm = shifted_sigma_min(adjoint(T), lam)
    numerical_eig = not sigma >= 1e-12 * max(norm, np.finfo(float).tiny)
    s = T.structure
    if isinstance(s, Diagonal):
        # a diagonal operator has sigma = closure of entries; at truncation
        # every entry is an eigenvalue of T* = T
        if np.any(np.isclose(np.asarray(s.entries), lam, rtol=0, atol=1e-12)):
            return BoundaryHypothesis(False, False, numerical_eig,
                                      "boundary point is an eigenvalue")
        return BoundaryHypothesis(True, None, numerical_eig,
                                  "lam is not a diagonal entry; it can only be an "
                                  "accumulation point, which the truncation cannot see")
    if isinstance(s, ForwardShift) and np.allclose(s.weights, 1.0):
        # T* = unweighted backward shift: sigma = closed disc, sigma_p = open disc
        if abs(abs(lam) - 1.0) <= 1e-12:
            return BoundaryHypothesis(True, True, numerical_eig,
                                      "|lam| = 1: boundary of sigma(T*), not an eigenvalue")
        if abs(lam) < 1:
            return BoundaryHypothesis(False, False, numerical_eig,
                                      "boundary point is an eigenvalue (interior of the disc)")
        return BoundaryHypothesis(False, False, numerical_eig,
                                  "lam lies outside the spectrum")
    if numerical_eig:
        return BoundaryHypothesis(False, None, True, "boundary point is an eigenvalue")
    return BoundaryHypothesis(True, None, False,
                              "no structural facts; lam is not an eigenvalue of the truncation")
