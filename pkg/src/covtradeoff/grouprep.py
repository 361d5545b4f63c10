"""Group-representation tooling: Haar sampling, spin irreps, Schur twirls.

Haar sampling is done on U(d) rather than SU(d): every average taken here
conjugates (V . V^dag), so the global phase of each sample cancels and the
two distributions give identical twirls.  Dividing a U(2) sample by a square
root of its determinant changes the conjugation by nothing at all; a
regression test pins this down sample by sample.

All stochastic operations take an explicit ``numpy.random.Generator``;
identical seeds reproduce bit-identical sample sequences within one build.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .linalg import HermitianOperator, TensorShape, as_complex_matrix, eigh

# Samples processed per block in batched Monte Carlo loops.  Fixed so that
# chunked random draws are reproducible for a given seed.
_CHUNK = 8192


def half_integer(j) -> Fraction:
    """Validate and normalize a spin quantum number (2j must be a positive integer)."""
    if isinstance(j, str):
        j = Fraction(j)
    j = Fraction(j).limit_denominator(10**9)
    two_j = 2 * j
    if two_j.denominator != 1 or two_j <= 0:
        raise ValueError(f"j must be a positive half-integer, got {j}")
    return j


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """One Haar-distributed unitary on U(d) (Ginibre then phase-fixed QR)."""
    return haar_unitaries(d, 1, rng)[0]


def haar_unitaries(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Batch of ``n`` independent Haar unitaries, shape (n, d, d)."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    z = rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))
    q, r = np.linalg.qr(z / math.sqrt(2.0))
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    phases = diag / np.abs(diag)
    return q * phases[:, None, :]


_SPIN_CACHE: dict[Fraction, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def spin_operators(j) -> tuple[HermitianOperator, HermitianOperator, HermitianOperator]:
    """Angular-momentum matrices (Jx, Jy, Jz) for a spin-j system.

    Jz is diagonal with entries -j..j ascending, so basis index 0 is the
    eigenvector with minimum eigenvalue -j.
    """
    jx, jy, jz = _spin_matrices(half_integer(j))
    shape = TensorShape((jz.shape[0],), 1)
    return (
        HermitianOperator(jx, shape),
        HermitianOperator(jy, shape),
        HermitianOperator(jz, shape),
    )


def _spin_matrices(j: Fraction) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if j in _SPIN_CACHE:
        return _SPIN_CACHE[j]
    jf = float(j)
    dim = int(2 * j) + 1
    m = np.arange(dim) - jf  # m-values ascending from -j
    jz = np.diag(m).astype(complex)
    raise_amp = np.sqrt(jf * (jf + 1) - m[:-1] * (m[:-1] + 1))
    jplus = np.zeros((dim, dim), dtype=complex)
    jplus[np.arange(1, dim), np.arange(dim - 1)] = raise_amp
    jminus = jplus.conj().T
    jx = (jplus + jminus) / 2
    jy = (jplus - jminus) / 2j
    _SPIN_CACHE[j] = (jx, jy, jz)
    return _SPIN_CACHE[j]


_JY_EIG_CACHE: dict[Fraction, tuple[np.ndarray, np.ndarray]] = {}


def _jy_eig(j: Fraction) -> tuple[np.ndarray, np.ndarray]:
    if j not in _JY_EIG_CACHE:
        _, jy, _ = _spin_matrices(j)
        shape = TensorShape((jy.shape[0],), 1)
        w, v = eigh(HermitianOperator(jy, shape))
        _JY_EIG_CACHE[j] = (w, v)
    return _JY_EIG_CACHE[j]


def spin_rotation(j, alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Euler rotation exp(-i a Jz) exp(-i b Jy) exp(-i g Jz) in the spin-j irrep."""
    j = half_integer(j)
    return _spin_rotations(
        j, np.atleast_1d(float(alpha)), np.atleast_1d(float(beta)), np.atleast_1d(float(gamma))
    )[0]


def _spin_rotations(
    j: Fraction, alpha: np.ndarray, beta: np.ndarray, gamma: np.ndarray
) -> np.ndarray:
    _, _, jz = _spin_matrices(j)
    mz = np.diag(jz).real
    wy, vy = _jy_eig(j)
    # exp(-i b Jy) = Vy diag(exp(-i b wy)) Vy^dag, batched over samples
    mid = np.einsum(
        "ab,nb,cb->nac", vy, np.exp(-1j * beta[:, None] * wy[None, :]), vy.conj()
    )
    left = np.exp(-1j * alpha[:, None] * mz[None, :])
    right = np.exp(-1j * gamma[:, None] * mz[None, :])
    return left[:, :, None] * mid * right[:, None, :]


def haar_spin(j, rng: np.random.Generator) -> np.ndarray:
    """One Haar-distributed spin-j rotation.

    Euler angles with alpha, gamma uniform on [0, 2 pi) and cos(beta) uniform
    on [-1, 1]; Haar for every conjugation average used here.
    """
    return haar_spins(half_integer(j), 1, rng)[0]


def haar_spins(j, n: int, rng: np.random.Generator) -> np.ndarray:
    """Batch of ``n`` Haar spin-j rotations, shape (n, 2j+1, 2j+1)."""
    j = half_integer(j)
    alpha = rng.uniform(0.0, 2.0 * math.pi, size=n)
    beta = np.arccos(rng.uniform(-1.0, 1.0, size=n))
    gamma = rng.uniform(0.0, 2.0 * math.pi, size=n)
    return _spin_rotations(j, alpha, beta, gamma)


def total_spin_projector(j, l) -> HermitianOperator:
    """Projector onto the total-spin-l subspace of two coupled spin-j systems.

    Built from the eigenspaces of the total-spin Casimir (J(x)I + I(x)J)^2
    clustered at l(l+1) with absolute tolerance 1e-8 (safe: the eigenvalue
    gaps are >= 2 at the sizes in scope).  Idempotent with rank 2l+1.
    """
    j = half_integer(j)
    l = Fraction(l) if not isinstance(l, Fraction) else l
    if l.denominator != 1 and (2 * j).denominator == 1:
        raise ValueError(f"total spin {l} outside the coupling range of j={j}")
    if not 0 <= l <= 2 * j or (l - 2 * j).denominator != 1:
        raise ValueError(f"total spin {l} outside the coupling range of j={j}")
    dim = int(2 * j) + 1
    ops = _spin_matrices(j)
    eye = np.eye(dim)
    casimir = np.zeros((dim * dim, dim * dim), dtype=complex)
    for comp in ops:
        total = np.kron(comp, eye) + np.kron(eye, comp)
        casimir += total @ total
    shape = TensorShape((dim, dim), 1)
    w, v = eigh(HermitianOperator(casimir, shape))
    target = float(l * (l + 1))
    sel = np.abs(w - target) <= 1e-8
    rank = int(np.count_nonzero(sel))
    expected = int(2 * l) + 1
    if rank != expected:
        raise RuntimeError(
            f"total-spin clustering found rank {rank}, expected {expected} for l={l}"
        )
    vs = v[:, sel]
    return HermitianOperator(vs @ vs.conj().T, shape)


def schur_twirl_irreducible(y: HermitianOperator, d: int) -> HermitianOperator:
    """Exact Haar twirl of ``y`` under an irreducible representation: (Tr[y]/d) I.

    The caller asserts irreducibility of the acting representation.
    """
    if y.dim != d:
        raise ValueError(f"operator dimension {y.dim} != representation dimension {d}")
    return HermitianOperator(np.eye(d, dtype=complex) * (y.trace() / d), y.shape)


@dataclass(frozen=True, eq=False)
class RepSampler:
    """Descriptor of the unitary representation a scenario averages over.

    kind is one of "fundamental" (Haar on U(d)), "spin" (Haar spin-j
    rotations) or "lifted" (a base sampler tensored slot-by-slot with
    identities, e.g. U (x) I).
    """

    kind: str
    d: int | None = None
    j: Fraction | None = None
    base: "RepSampler | None" = None
    slots: tuple[str, ...] | None = None

    @classmethod
    def fundamental(cls, d: int) -> "RepSampler":
        if d < 1:
            raise ValueError(f"dimension must be >= 1, got {d}")
        return cls(kind="fundamental", d=int(d))

    @classmethod
    def spin(cls, j) -> "RepSampler":
        return cls(kind="spin", j=half_integer(j))

    @classmethod
    def lifted(cls, base: "RepSampler", slots: Sequence[str]) -> "RepSampler":
        slots = tuple(slots)
        if not slots or any(s not in ("rep", "id") for s in slots):
            raise ValueError(f"slots must be 'rep'/'id' strings, got {slots}")
        return cls(kind="lifted", base=base, slots=slots)

    @property
    def dimension(self) -> int:
        if self.kind == "fundamental":
            return self.d
        if self.kind == "spin":
            return int(2 * self.j) + 1
        return self.base.dimension ** len(self.slots)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample_batch(1, rng)[0]

    def sample_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Batch of ``n`` representation matrices, shape (n, D, D)."""
        if self.kind == "fundamental":
            return haar_unitaries(self.d, n, rng)
        if self.kind == "spin":
            return haar_spins(self.j, n, rng)
        base = self.base.sample_batch(n, rng)
        eye = np.eye(self.base.dimension, dtype=complex)
        out = None
        for slot in self.slots:
            block = base if slot == "rep" else np.broadcast_to(eye, base.shape)
            out = block if out is None else _batch_kron(out, block)
        return out


def _batch_kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, p, _ = a.shape
    _, q, _ = b.shape
    return (a[:, :, None, :, None] * b[:, None, :, None, :]).reshape(n, p * q, p * q)


@dataclass(frozen=True, eq=False)
class TwirlReport:
    """Monte Carlo estimate of a group average, with its sampling error."""

    sample_count: int
    mean: HermitianOperator
    standard_error: float  # max over entries


def monte_carlo_twirl(
    sampler: RepSampler,
    conjugate_flags: Sequence[bool],
    y: HermitianOperator,
    n: int,
    rng: np.random.Generator,
) -> TwirlReport:
    """Estimate the Haar average of V y V^dag over ``n`` samples.

    V is assembled factor by factor from one group sample per draw, using the
    sample itself or its complex conjugate as flagged (e.g. flags
    (True, False) realize V = U* (x) U).  The per-entry standard error is the
    usual sample estimate; ``standard_error`` is its maximum over entries.
    """
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    flags = tuple(bool(f) for f in conjugate_flags)
    d = sampler.dimension
    if y.dim != d ** len(flags):
        raise ValueError(
            f"operator dimension {y.dim} does not match {len(flags)} factors of size {d}"
        )
    w, v = eigh(y)
    amax = float(np.max(np.abs(w))) if w.size else 0.0
    rank_one = (
        w.size > 0
        and w[-1] > 0
        and np.all(np.abs(w[:-1]) <= 1e-12 * max(amax, 1e-300))
    )
    sum_m = np.zeros((y.dim, y.dim), dtype=complex)
    sum_sq = np.zeros((y.dim, y.dim))
    done = 0
    while done < n:
        c = min(_CHUNK, n - done)
        u = sampler.sample_batch(c, rng)
        if rank_one:
            vecs = _apply_factorwise(u, flags, math.sqrt(w[-1]) * v[:, -1])
            sum_m += np.einsum("ni,nj->ij", vecs, vecs.conj())
            mag = np.abs(vecs) ** 2
            sum_sq += np.einsum("ni,nj->ij", mag, mag)
        else:
            big = _assemble(u, flags)
            m = big @ y.matrix @ big.conj().swapaxes(1, 2)
            sum_m += m.sum(axis=0)
            sum_sq += (m.real**2 + m.imag**2).sum(axis=0)
        done += c
    mean = sum_m / n
    var = np.maximum(sum_sq / n - (mean.real**2 + mean.imag**2), 0.0)
    stderr = float(np.sqrt(var / n).max())
    mean = (mean + mean.conj().T) / 2
    return TwirlReport(n, HermitianOperator(mean, y.shape), stderr)


def _assemble(u: np.ndarray, flags: Sequence[bool]) -> np.ndarray:
    out = None
    for flag in flags:
        block = u.conj() if flag else u
        out = block if out is None else _batch_kron(out, block)
    return out


def _apply_factorwise(u: np.ndarray, flags: Sequence[bool], vec: np.ndarray) -> np.ndarray:
    """Apply the factored V of :func:`monte_carlo_twirl` to a fixed vector, batched."""
    n, d, _ = u.shape
    k = len(flags)
    t = np.broadcast_to(vec.reshape((d,) * k), (n,) + (d,) * k)
    for axis, flag in enumerate(flags):
        block = u.conj() if flag else u
        t = np.moveaxis(t, axis + 1, -1)
        t = np.einsum("nab,n...b->n...a", block, t)
        t = np.moveaxis(t, -1, axis + 1)
    return t.reshape(n, d**k)
