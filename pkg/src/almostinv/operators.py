"""Truncated operators, vectors and functionals.

Everything lives in the first ``D`` coordinates of a sequence space.  Vectors
and functionals share one representation, a complex numpy array of length
``D``; a functional ``f`` acts on a vector ``x`` through the *bilinear*
pairing ``f(x) = sum_k f_k x_k`` (no conjugation).  With that convention the
adjoint of an operator is the plain transpose of its matrix and
``(T* f)(x) = f(T x)`` holds exactly.  Norms and orthogonality use the usual
sesquilinear inner product.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg
import scipy.linalg.lapack
import scipy.sparse.linalg

from .errors import InvalidSpec, SingularResolvent

# sigma_min(lam*I - A) below this fraction of ||lam*I - A|| counts as singular
SINGULAR_RTOL = 1e-12
# full SVD up to this size, Lanczos above
DENSE_SVD_MAX = 512


def pair(f, x):
    """Bilinear pairing ``f(x)``; broadcasts over leading axes of ``f``."""
    return np.asarray(f) @ np.asarray(x)


def inner(x, y):
    """Sesquilinear inner product ``<x, y> = sum x_k conj(y_k)``."""
    return np.vdot(y, x)


def as_vector(x, dim=None):
    v = np.asarray(x, dtype=complex).reshape(-1)
    if dim is not None and v.shape[0] != dim:
        raise InvalidSpec(f"vector has length {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise InvalidSpec("vector has non-finite entries")
    return v


def basis_vector(dim, k):
    """Canonical basis vector ``e_k`` (1-based, as in the literature)."""
    e = np.zeros(dim, dtype=complex)
    e[k - 1] = 1.0
    return e


# --------------------------------------------------------------------------
# structure tags
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ForwardShift:
    """``e_k -> w_k e_{k+1}``; ``e_D -> 0`` at truncation."""
    weights: tuple

    def __init__(self, weights):
        object.__setattr__(self, "weights", tuple(float(w) for w in weights))


@dataclass(frozen=True)
class BackwardShift:
    """``e_{k+1} -> w_k e_k``; ``e_1 -> 0``.  Transpose of :class:`ForwardShift`."""
    weights: tuple

    def __init__(self, weights):
        object.__setattr__(self, "weights", tuple(float(w) for w in weights))


@dataclass(frozen=True)
class Diagonal:
    entries: tuple

    def __init__(self, entries):
        object.__setattr__(self, "entries", tuple(complex(d) for d in entries))


@dataclass(frozen=True)
class Nilpotent:
    """Jordan block at 0: ``e_k -> e_{k+1}``, ``e_D -> 0``."""


@dataclass(frozen=True)
class Dense:
    pass


Structure = Union[ForwardShift, BackwardShift, Diagonal, Nilpotent, Dense]


def _shift_weights(tag, dim):
    w = np.asarray(tag.weights, dtype=float)
    if w.shape[0] < dim - 1:
        raise InvalidSpec(
            f"{type(tag).__name__} needs at least {dim - 1} weights, got {w.shape[0]}")
    w = w[: dim - 1]
    if not np.all(np.isfinite(w)):
        raise InvalidSpec("shift weights must be finite")
    if np.any(w <= 0):
        raise InvalidSpec("shift weights must be positive")
    return w


def _diagonal_entries(tag, dim):
    d = np.asarray(tag.entries, dtype=complex)
    if d.shape[0] < dim:
        raise InvalidSpec(f"Diagonal needs at least {dim} entries, got {d.shape[0]}")
    d = d[:dim]
    if not np.all(np.isfinite(d)):
        raise InvalidSpec("diagonal entries must be finite")
    return d


def structure_matrix(tag, dim):
    """Dense matrix generated by a structure tag."""
    if isinstance(tag, ForwardShift):
        return np.diag(_shift_weights(tag, dim).astype(complex), -1)
    if isinstance(tag, BackwardShift):
        return np.diag(_shift_weights(tag, dim).astype(complex), 1)
    if isinstance(tag, Nilpotent):
        return np.diag(np.ones(dim - 1, dtype=complex), -1)
    if isinstance(tag, Diagonal):
        return np.diag(_diagonal_entries(tag, dim))
    raise InvalidSpec(f"tag {tag!r} does not generate a matrix")


def _canonical_tag(tag, dim):
    # trim sequences to the truncation so equal operators compare equal
    if isinstance(tag, ForwardShift):
        return ForwardShift(_shift_weights(tag, dim))
    if isinstance(tag, BackwardShift):
        return BackwardShift(_shift_weights(tag, dim))
    if isinstance(tag, Diagonal):
        return Diagonal(_diagonal_entries(tag, dim))
    if isinstance(tag, (Nilpotent, Dense)):
        return tag
    raise InvalidSpec(f"unknown structure tag {tag!r}")


class OperatorRep:
    """A bounded operator truncated to ``dim`` coordinates.

    Treated as immutable: the matrix is exposed read-only.  When
    ``structure`` is a generating tag the matrix must coincide with the one
    the tag produces, which lets resolvent and norm routines use closed
    forms; for tagged operators the dense matrix is only materialised on
    first access.
    """

    __slots__ = ("dim", "structure", "_matrix")

    def __init__(self, dim, matrix=None, structure=None):
        dim = int(dim)
        structure = Dense() if structure is None else structure
        if not isinstance(structure, Dense):
            structure = _canonical_tag(structure, dim)
        if matrix is not None:
            m = np.array(matrix, dtype=complex)
            if m.shape != (dim, dim):
                raise InvalidSpec(f"matrix shape {m.shape} does not match dim {dim}")
            if not np.all(np.isfinite(m)):
                raise InvalidSpec("operator matrix has non-finite entries")
            if not isinstance(structure, Dense) and not np.array_equal(
                    m, structure_matrix(structure, dim)):
                raise InvalidSpec("matrix does not match its structure tag")
            m.flags.writeable = False
        elif isinstance(structure, Dense):
            raise InvalidSpec("Dense operators need an explicit matrix")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "structure", structure)
        object.__setattr__(self, "_matrix", m if matrix is not None else None)

    def __setattr__(self, name, value):
        raise AttributeError("OperatorRep is immutable")

    @property
    def matrix(self):
        if self._matrix is None:
            m = structure_matrix(self.structure, self.dim)
            m.flags.writeable = False
            object.__setattr__(self, "_matrix", m)
        return self._matrix

    def apply(self, x):
        x = np.asarray(x, dtype=complex)
        s = self.structure
        if self._matrix is None and x.ndim == 1:
            if isinstance(s, Diagonal):
                return np.asarray(s.entries) * x
            w = np.ones(self.dim - 1) if isinstance(s, Nilpotent) else np.asarray(s.weights)
            y = np.zeros_like(x)
            if isinstance(s, BackwardShift):
                y[:-1] = w * x[1:]
            else:
                y[1:] = w * x[:-1]
            return y
        return self.matrix @ x

    def __matmul__(self, other):
        if isinstance(other, OperatorRep):
            return OperatorRep(self.dim, self.matrix @ other.matrix)
        return self.matrix @ other

    def __add__(self, other):
        other_m = other.matrix if isinstance(other, OperatorRep) else np.asarray(other)
        return OperatorRep(self.dim, self.matrix + other_m)

    def __sub__(self, other):
        other_m = other.matrix if isinstance(other, OperatorRep) else np.asarray(other)
        return OperatorRep(self.dim, self.matrix - other_m)

    def __repr__(self):
        return f"OperatorRep(dim={self.dim}, structure={type(self.structure).__name__})"


def make_operator(tag: Structure, dim: int, matrix=None) -> OperatorRep:
    """Instantiate an operator from a structure tag.

    ``Dense`` requires an explicit ``matrix``.
    """
    if not isinstance(dim, (int, np.integer)) or dim < 2:
        raise InvalidSpec(f"dimension must be an integer >= 2, got {dim!r}")
    dim = int(dim)
    if isinstance(tag, Dense):
        return OperatorRep(dim, matrix)
    if matrix is not None:
        raise InvalidSpec("structured operators take no explicit matrix")
    return OperatorRep(dim, None, tag)


def dense(matrix) -> OperatorRep:
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidSpec(f"expected a square matrix, got shape {m.shape}")
    return OperatorRep(m.shape[0], m)


def identity(dim) -> OperatorRep:
    return make_operator(Diagonal(np.ones(dim)), dim)


def adjoint(T: OperatorRep) -> OperatorRep:
    """Banach-space adjoint under the bilinear pairing: the matrix transpose."""
    s = T.structure
    if isinstance(s, ForwardShift):
        tag = BackwardShift(s.weights)
    elif isinstance(s, BackwardShift):
        tag = ForwardShift(s.weights)
    elif isinstance(s, Nilpotent):
        tag = BackwardShift(np.ones(T.dim - 1))
    elif isinstance(s, Diagonal):
        tag = s
    else:
        return OperatorRep(T.dim, T.matrix.T)
    return OperatorRep(T.dim, None, tag)


# --------------------------------------------------------------------------
# resolvent
# --------------------------------------------------------------------------

class _ShiftedSolver:
    """Solves with ``M = lam*I - A`` and ``M^H`` for the structured tags.

    Bidiagonal tags go through LAPACK's banded triangular solve, i.e. plain
    substitution with no pivoting.
    """

    def __init__(self, A, lam):
        self.A = A
        self.lam = complex(lam)
        s = A.structure
        self.kind = type(s)
        if self.kind is Diagonal:
            self.gaps = self.lam - np.asarray(s.entries)
            return
        w = np.ones(A.dim - 1) if self.kind is Nilpotent else np.asarray(s.weights)
        ab = np.zeros((2, A.dim), dtype=complex)
        if self.kind is BackwardShift:
            self.uplo = "U"
            ab[0, 1:] = -w
            ab[1, :] = self.lam
        else:
            self.uplo = "L"
            ab[0, :] = self.lam
            ab[1, :-1] = -w
        self.ab = ab
        self.w = w

    def _tb(self, b, trans):
        x, info = scipy.linalg.lapack.ztbtrs(self.ab, b.reshape(-1, 1), uplo=self.uplo,
                                             trans=trans)
        if info != 0:
            return np.full(b.shape, np.inf, dtype=complex)
        return x.reshape(-1)

    def solve(self, b):
        if self.kind is Diagonal:
            return b / self.gaps
        return self._tb(np.asarray(b, dtype=complex), "N")

    def solve_h(self, b):
        if self.kind is Diagonal:
            return b / np.conj(self.gaps)
        return self._tb(np.asarray(b, dtype=complex), "C")


def _inverse_norm_estimate(solve, solve_h, dim, iters=30, seed=0):
    """Lower bound on ``||M^{-1}||_2`` by power iteration on ``M^{-H} M^{-1}``."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    x /= np.linalg.norm(x)
    est = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(iters):
            y = solve(x)
            ny = np.linalg.norm(y)
            if not np.isfinite(ny):
                return np.inf
            z = solve_h(y)
            nz = np.linalg.norm(z)
            if not np.isfinite(nz):
                return np.inf
            new = np.sqrt(nz)
            if nz == 0.0:
                return 0.0
            x = z / nz
            if abs(new - est) <= 1e-6 * new:
                est = new
                break
            est = new
    return est


def shifted_sigma_min(A: OperatorRep, lam) -> tuple:
    """``(sigma_min, norm)`` of ``lam*I - A`` (estimated for large structured D)."""
    M = None
    s = A.structure
    if isinstance(s, Diagonal):
        gaps = np.abs(complex(lam) - np.asarray(s.entries))
        return float(gaps.min()), float(gaps.max())
    if A.dim <= DENSE_SVD_MAX or isinstance(s, Dense):
        M = complex(lam) * np.eye(A.dim) - A.matrix
        if A.dim <= DENSE_SVD_MAX:
            sv = scipy.linalg.svdvals(M)
            return float(sv[-1]), float(sv[0])
        lu = scipy.linalg.lu_factor(M, check_finite=False)
        inv_norm = _inverse_norm_estimate(
            lambda b: scipy.linalg.lu_solve(lu, b, check_finite=False),
            lambda b: scipy.linalg.lu_solve(lu, b, trans=2, check_finite=False),
            A.dim)
        norm = operator_norm(OperatorRep(A.dim, M))
    else:
        sol = _ShiftedSolver(A, lam)
        inv_norm = _inverse_norm_estimate(sol.solve, sol.solve_h, A.dim)
        w = sol.w
        # ||lam I - S|| for a bidiagonal shift lies in [max(|lam|, max w), |lam| + max w]
        norm = abs(complex(lam)) + float(np.max(np.abs(w))) if w.size else abs(complex(lam))
    sigma = 0.0 if not np.isfinite(inv_norm) else (np.inf if inv_norm == 0 else 1.0 / inv_norm)
    return float(sigma), float(norm)


def resolvent_solve(A: OperatorRep, lam, b, method="auto", rtol=SINGULAR_RTOL):
    """Solve ``(lam*I - A) h = b``.

    Shift, Jordan and diagonal tags use back/forward substitution, which is
    the truncated Neumann series summed exactly; ``method="lu"`` forces the
    generic dense LU path.  Raises :class:`SingularResolvent` when
    ``sigma_min(lam*I - A) < rtol * ||lam*I - A||``.
    """
    b = as_vector(b, A.dim)
    lam = complex(lam)
    sigma, norm = shifted_sigma_min(A, lam)
    if not sigma >= rtol * max(norm, np.finfo(float).tiny):
        raise SingularResolvent(
            f"lam={lam} is within the singularity threshold of the spectrum "
            f"(sigma_min={sigma:.3e}, ||lam I - A||={norm:.3e})",
            sigma_min=sigma, lam=lam)
    structured = not isinstance(A.structure, Dense)
    if method == "auto" and structured:
        return _ShiftedSolver(A, lam).solve(b)
    if method not in ("auto", "lu"):
        raise ValueError(f"unknown method {method!r}")
    M = lam * np.eye(A.dim) - A.matrix
    return scipy.linalg.solve(M, b, check_finite=False)


# --------------------------------------------------------------------------
# norms
# --------------------------------------------------------------------------

def matrix_norm(M) -> float:
    """Spectral norm of a (possibly rectangular) matrix."""
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    if min(M.shape) <= DENSE_SVD_MAX:
        return float(scipy.linalg.svdvals(M)[0])
    s = scipy.sparse.linalg.svds(M, k=1, tol=1e-12, return_singular_vectors=False,
                                 random_state=0)
    return float(s[0])


def operator_norm(T: OperatorRep) -> float:
    """Largest singular value; closed forms for the structured tags."""
    s = T.structure
    if isinstance(s, (ForwardShift, BackwardShift)):
        return float(np.max(np.abs(s.weights))) if s.weights else 0.0
    if isinstance(s, Nilpotent):
        return 1.0
    if isinstance(s, Diagonal):
        return float(np.max(np.abs(s.entries)))
    return matrix_norm(T.matrix)


def spectral_radius(T: OperatorRep) -> float:
    M = T.matrix
    # exactly triangular with zero diagonal: nilpotent, skip the eigensolver
    if not np.any(np.diag(M)) and (not np.any(np.tril(M)) or not np.any(np.triu(M))):
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))
