"""Dense complex linear algebra with tensor-factor bookkeeping.

Operators on multipartite spaces are stored as plain numpy complex matrices
in the row-major Kronecker convention (``np.kron`` ordering).  ``TensorShape``
records the factor dimensions and how many leading factors form the input
space; ``HermitianOperator`` couples a matrix to its shape and enforces
hermiticity at construction.

Vectorization convention: ``vec(a)`` stacks a map ``a`` from the input space
to the output space as the vector ``sum_i |i> (x) a|i>``, so the component at
flat index ``i * n_out + o`` equals ``a[o, i]``.  Kraus extraction and the
channel-evaluation identity ``E(rho) = Tr_in[(rho^T (x) I) R]`` both depend on
this layout; do not change it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITICITY_TOL = 1e-12


class EigenDecompositionError(RuntimeError):
    """Raised when the dense Hermitian eigensolver fails to converge."""


def as_complex_matrix(a) -> np.ndarray:
    """Coerce to a finite 2-D complex128 array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if not np.isfinite(m).all():
        raise ValueError("matrix has non-finite entries")
    return m


@dataclass(frozen=True, eq=False)
class TensorShape:
    """Ordered factor dimensions with an input/output partition.

    The first ``in_count`` factors span the input space, the rest the output
    space.  Factor indices used by :func:`partial_trace` and
    :func:`partial_transpose` are 0-based.
    """

    factors: tuple[int, ...]
    in_count: int

    def __post_init__(self):
        factors = tuple(int(f) for f in self.factors)
        if any(f < 1 for f in factors):
            raise ValueError(f"factor dimensions must be positive, got {factors}")
        if not 0 <= self.in_count <= len(factors):
            raise ValueError(
                f"in_count {self.in_count} out of range for {len(factors)} factors"
            )
        object.__setattr__(self, "factors", factors)

    @property
    def dim(self) -> int:
        return math.prod(self.factors)

    @property
    def in_dim(self) -> int:
        return math.prod(self.factors[: self.in_count])

    @property
    def out_dim(self) -> int:
        return math.prod(self.factors[self.in_count :])

    def drop(self, removed: Iterable[int]) -> "TensorShape":
        """Shape with the given factors removed (for partial traces)."""
        removed = set(removed)
        kept = [f for i, f in enumerate(self.factors) if i not in removed]
        new_in = sum(1 for i in range(self.in_count) if i not in removed)
        return TensorShape(tuple(kept), new_in)


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """A Hermitian matrix annotated with its tensor-factor shape.

    Construction asserts ``max |M - M^dag| <= 1e-12`` and then stores the
    symmetrized matrix ``(M + M^dag)/2``, since closed-form constructors
    accumulate roundoff.  The stored array is read-only.
    """

    matrix: np.ndarray
    shape: TensorShape

    def __post_init__(self):
        m = as_complex_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got {m.shape}")
        if self.shape.dim != m.shape[0]:
            raise ValueError(
                f"shape {self.shape.factors} has dimension {self.shape.dim}, "
                f"matrix is {m.shape[0]}x{m.shape[1]}"
            )
        dev = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
        if dev > HERMITICITY_TOL:
            raise ValueError(f"not Hermitian: max |M - M^dag| = {dev:.3e}")
        m = (m + m.conj().T) / 2
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def scaled(self, factor: float) -> "HermitianOperator":
        return HermitianOperator(self.matrix * factor, self.shape)


def operator(matrix, factors: Sequence[int], in_count: int) -> HermitianOperator:
    """Shorthand for ``HermitianOperator(matrix, TensorShape(factors, in_count))``."""
    return HermitianOperator(as_complex_matrix(matrix), TensorShape(tuple(factors), in_count))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, ``(a(x)b)[i*rb+k, j*cb+l] = a[i,j] b[k,l]``."""
    return np.kron(as_complex_matrix(a), as_complex_matrix(b))


def _check_factors(shape: TensorShape, which: Iterable[int]) -> set[int]:
    which = set(int(i) for i in which)
    for i in which:
        if not 0 <= i < len(shape.factors):
            raise IndexError(
                f"factor index {i} out of range for {len(shape.factors)} factors"
            )
    return which


def partial_trace_matrix(
    m: np.ndarray, factors: Sequence[int], traced: Iterable[int]
) -> np.ndarray:
    """Partial trace of a raw (not necessarily Hermitian) matrix."""
    factors = tuple(int(f) for f in factors)
    k = len(factors)
    traced = set(int(i) for i in traced)
    t = m.reshape(factors + factors)
    rows = list(range(k))
    cols = [k + i for i in range(k)]
    for i in traced:
        cols[i] = rows[i]
    out = [rows[i] for i in range(k) if i not in traced] + [
        cols[i] for i in range(k) if i not in traced
    ]
    res = np.einsum(t, rows + cols, out)
    d = math.prod(f for i, f in enumerate(factors) if i not in traced)
    return res.reshape(d, d)


def partial_trace(op: HermitianOperator, traced_factors: Iterable[int]) -> HermitianOperator:
    """Trace out the listed tensor factors (0-based indices).

    The result keeps the remaining factors in order and preserves the total
    trace.  Tracing every factor yields a 1x1 operator equal to ``Tr[op]``.
    """
    traced = _check_factors(op.shape, traced_factors)
    res = partial_trace_matrix(op.matrix, op.shape.factors, traced)
    return HermitianOperator(res, op.shape.drop(traced))


def partial_transpose(
    op: HermitianOperator, transposed_factors: Iterable[int]
) -> HermitianOperator:
    """Transpose the listed tensor factors; an involution."""
    chosen = _check_factors(op.shape, transposed_factors)
    factors = op.shape.factors
    k = len(factors)
    t = op.matrix.reshape(factors + factors)
    axes = list(range(2 * k))
    for i in chosen:
        axes[i], axes[k + i] = axes[k + i], axes[i]
    res = t.transpose(axes).reshape(op.dim, op.dim)
    return HermitianOperator(res, op.shape)


def eigh(op: HermitianOperator) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian operator.

    Returns eigenvalues in ascending order and the matrix whose columns are
    the corresponding orthonormal eigenvectors.  Reconstruction satisfies
    ``max |V diag(w) V^dag - M| <= 1e-10 (1 + max|M|)``.
    """
    try:
        w, v = np.linalg.eigh(op.matrix)
    except np.linalg.LinAlgError as exc:
        norm = float(np.max(np.abs(op.matrix)))
        raise EigenDecompositionError(
            f"eigensolver did not converge for a {op.dim}x{op.dim} matrix "
            f"with max-entry norm {norm:.3e}: {exc}"
        ) from exc
    return w, v


def vec(a: np.ndarray) -> np.ndarray:
    """Vectorize a map ``a`` (n_out x n_in) as a flat vector of length n_in*n_out.

    Component at index ``i * n_out + o`` equals ``a[o, i]``; this is the
    column vector ``sum_i |i> (x) a|i>``.
    """
    m = as_complex_matrix(a)
    return np.ascontiguousarray(m.T).reshape(-1)


def unvec(v: np.ndarray, n_out: int | None = None, n_in: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`; square output assumed unless dims are given."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    if n_out is None and n_in is None:
        d = math.isqrt(v.size)
        if d * d != v.size:
            raise ValueError(f"cannot infer square shape from length {v.size}")
        n_out = n_in = d
    elif n_out is None or n_in is None:
        known = n_out if n_out is not None else n_in
        other, rem = divmod(v.size, known)
        if rem:
            raise ValueError(f"length {v.size} not divisible by {known}")
        n_out = n_out if n_out is not None else other
        n_in = n_in if n_in is not None else other
    if n_in * n_out != v.size:
        raise ValueError(f"length {v.size} != {n_in} * {n_out}")
    return v.reshape(n_in, n_out).T


def max_entangled_vector(d: int) -> np.ndarray:
    """Unnormalized maximally entangled vector ``sum_i |i>(x)|i>`` (= vec of identity)."""
    return vec(np.eye(d))


def hermitian_basis(d: int) -> list[HermitianOperator]:
    """Trace-orthogonal Hermitian basis of d x d matrices.

    Identity first, then the generalized Gell-Mann set: symmetric and
    antisymmetric pair matrices followed by the traceless diagonal ones.
    Pairwise ``Tr[E_j E_k] = 0`` for ``j != k``.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    shape = TensorShape((d,), 1)
    basis = [HermitianOperator(np.eye(d, dtype=complex), shape)]
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0
            basis.append(HermitianOperator(sym, shape))
            asym = np.zeros((d, d), dtype=complex)
            asym[j, k] = -1.0j
            asym[k, j] = 1.0j
            basis.append(HermitianOperator(asym, shape))
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        diag *= math.sqrt(2.0 / (l * (l + 1)))
        basis.append(HermitianOperator(np.diag(diag).astype(complex), shape))
    return basis


def frobenius_inner(a: HermitianOperator, b: HermitianOperator) -> float:
    """``Tr[a b]`` for Hermitian operators; real up to a 1e-12 residue."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    val = complex(np.sum(a.matrix * b.matrix.T))
    if abs(val.imag) > 1e-12 * max(1.0, abs(val.real)):
        raise ValueError(f"inner product has imaginary residue {val.imag:.3e}")
    return float(val.real)
