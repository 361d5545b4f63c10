"""Covariant estimation families: fidelity operators, constraints, seeds.

Each scenario bundles the two fidelity operators, the linear
trace-preservation constraints on the seed operator, the reference state and
a sampler for the family's unitary orbit:

* ``pure(d)``   -- unknown pure state in dimension d, Haar orbit of a basis
  vector under U(d).
* ``maxent(d)`` -- unknown maximally entangled state of two d-dimensional
  systems, orbit of the normalized pairing vector under U (x) I.
* ``spin(j)``   -- spin-j coherent states, orbit of the lowest-weight state
  |-j> under spin-j rotations.

Operator fidelity F and estimation fidelity G of a seed X are the traces
Tr[R_F X] and Tr[R_G X].  Seed operators live on the input (x) output space;
for maxent the factor ordering is frozen as (in1, in2, out1, out2), and all
factor-pair embeddings are built by explicit index maps.

The estimation operator is always derived from the disturbance operator by
the same contraction, R_G = Tr_out[(I (x) |psi0><psi0|) R_F] (x) I_out.  For
the maxent family the resulting closed form places the pairing projector on
the *input* pair, (1 - 2/d^2) I + (1/d) Phi_in (x) I_out, all over
d^2 (d^2 - 1); the Monte Carlo oracle tests pin this down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .grouprep import RepSampler, half_integer, total_spin_projector
from .linalg import (
    HermitianOperator,
    TensorShape,
    as_complex_matrix,
    eigh,
    frobenius_inner,
    hermitian_basis,
    kron,
    max_entangled_vector,
    partial_trace_matrix,
    partial_transpose,
    vec,
)

CONSTRAINT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class LinearConstraint:
    """One scalar equality Tr[operator X] = value on the seed operator."""

    operator: HermitianOperator
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"constraint value must be finite, got {self.value}")
        object.__setattr__(self, "value", float(self.value))

    def residual(self, x: HermitianOperator) -> float:
        return abs(frobenius_inner(self.operator, x) - self.value)


@dataclass(frozen=True, eq=False)
class Scenario:
    """A covariant family with its fidelity operators and seed constraints."""

    name: str
    param: str
    in_dim: int
    out_dim: int
    r_f: HermitianOperator
    r_g: HermitianOperator
    constraints: tuple[LinearConstraint, ...]
    psi0: np.ndarray
    sampler: RepSampler

    def __post_init__(self):
        if self.in_dim != self.out_dim:
            raise ValueError("all supported families have equal in/out dimensions")
        tr = self.r_f.trace()
        if abs(tr - 1.0) > 1e-10:
            raise ValueError(f"Tr[R_F] = {tr!r}, expected 1")
        for label, op in (("R_F", self.r_f), ("R_G", self.r_g)):
            floor = float(eigh(op)[0][0])
            if floor < -1e-10:
                raise ValueError(f"{label} has eigenvalue {floor:.3e} below -1e-10")
        psi = np.asarray(self.psi0, dtype=complex).reshape(-1)
        psi.setflags(write=False)
        object.__setattr__(self, "psi0", psi)
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def label(self) -> str:
        return f"{self.name}({self.param})"

    def constraint_residual(self, x: HermitianOperator) -> float:
        """Largest violation of the trace-preservation constraints by ``x``."""
        return max(c.residual(x) for c in self.constraints)

    def fidelities(self, x: HermitianOperator) -> tuple[float, float]:
        """(F, G) of a seed operator."""
        return frobenius_inner(self.r_f, x), frobenius_inner(self.r_g, x)


def _reference_projector(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def _derive_r_g(r_f: np.ndarray, psi0: np.ndarray, in_dim: int, out_dim: int) -> np.ndarray:
    """Tr_out[(I_in (x) |psi0><psi0|) R_F] (x) I_out on the (in, out) split."""
    sandwich = kron(np.eye(in_dim), _reference_projector(psi0)) @ r_f
    reduced = partial_trace_matrix(sandwich, (in_dim, out_dim), {1})
    return kron(reduced, np.eye(out_dim))


def build_pure(d: int) -> Scenario:
    """Unknown pure state in dimension d >= 2."""
    d = int(d)
    if d < 2:
        raise ValueError(f"pure scenario needs d >= 2, got {d}")
    phi = max_entangled_vector(d)
    pairing = np.outer(phi, phi.conj())
    norm = d * (d + 1)
    r_f = (np.eye(d * d) + pairing) / norm
    psi0 = np.zeros(d, dtype=complex)
    psi0[0] = 1.0
    r_g = kron(np.eye(d) + _reference_projector(psi0).T, np.eye(d)) / norm
    shape = TensorShape((d, d), 1)
    constraints = (
        LinearConstraint(HermitianOperator(np.eye(d * d, dtype=complex), shape), float(d)),
    )
    return Scenario(
        name="pure",
        param=str(d),
        in_dim=d,
        out_dim=d,
        r_f=HermitianOperator(r_f, shape),
        r_g=HermitianOperator(r_g, shape),
        constraints=constraints,
        psi0=psi0,
        sampler=RepSampler.fundamental(d),
    )


def embed_on_factors(
    op: np.ndarray, where: tuple[int, ...], dims: tuple[int, ...]
) -> np.ndarray:
    """Embed an operator acting on the listed factors into the full space.

    ``op`` acts on the tensor product of the factors in ``where`` (in that
    order); the remaining factors carry the identity.  Built by explicit
    index maps (axis permutation of an outer product), so the embedding is
    exact.
    """
    k = len(dims)
    rest = [i for i in range(k) if i not in where]
    t = op.reshape(tuple(dims[w] for w in where) * 2)
    for i in rest:
        t = np.multiply.outer(t, np.eye(dims[i]))
    nw = len(where)
    src: dict[int, tuple[int, int]] = {}
    for a, f in enumerate(where):
        src[f] = (a, nw + a)
    for a, f in enumerate(rest):
        src[f] = (2 * nw + 2 * a, 2 * nw + 2 * a + 1)
    perm = [src[f][0] for f in range(k)] + [src[f][1] for f in range(k)]
    full = math.prod(dims)
    return t.transpose(perm).reshape(full, full)


def build_maxent(d: int) -> Scenario:
    """Unknown maximally entangled state of two d-dimensional systems, d >= 2.

    The seed operator lives on four factors ordered (in1, in2, out1, out2);
    the family's unitary acts as U on in1/out1 and trivially on in2/out2.
    """
    d = int(d)
    if d < 2:
        raise ValueError(f"maxent scenario needs d >= 2, got {d}")
    dims = (d, d, d, d)
    full = d**4
    phi = max_entangled_vector(d)
    pairing = np.outer(phi, phi.conj())
    cross_in_out_1 = embed_on_factors(pairing, (0, 2), dims)  # pairs in1 with out1
    cross_in_out_2 = embed_on_factors(pairing, (1, 3), dims)  # pairs in2 with out2
    norm = d * d * (d * d - 1)
    r_f = (
        np.eye(full)
        + cross_in_out_1 @ cross_in_out_2
        - (cross_in_out_1 + cross_in_out_2) / d
    ) / norm
    psi0 = phi / math.sqrt(d)
    r_g = _derive_r_g(r_f, psi0, d * d, d * d)
    shape = TensorShape(dims, 2)
    constraints = []
    for basis_op in hermitian_basis(d):
        op = embed_on_factors(basis_op.matrix, (1,), dims)
        constraints.append(
            LinearConstraint(HermitianOperator(op, shape), d * basis_op.trace())
        )
    return Scenario(
        name="maxent",
        param=str(d),
        in_dim=d * d,
        out_dim=d * d,
        r_f=HermitianOperator(r_f, shape),
        r_g=HermitianOperator(r_g, shape),
        constraints=tuple(constraints),
        psi0=psi0,
        sampler=RepSampler.lifted(RepSampler.fundamental(d), ("rep", "id")),
    )


def build_spin(j) -> Scenario:
    """Spin-j coherent states (orbit of the lowest-weight state |-j>)."""
    j = half_integer(j)
    dim = int(2 * j) + 1
    projector = total_spin_projector(j, 2 * j)
    norm = float(4 * j + 1)
    r_f = partial_transpose(projector.scaled(1.0 / norm), {0})
    psi0 = np.zeros(dim, dtype=complex)
    psi0[0] = 1.0  # basis index 0 is the Jz eigenvector with eigenvalue -j
    r_g = _derive_r_g(r_f.matrix, psi0, dim, dim)
    shape = TensorShape((dim, dim), 1)
    constraints = (
        LinearConstraint(HermitianOperator(np.eye(dim * dim, dtype=complex), shape), float(dim)),
    )
    param = str(Fraction(j))
    return Scenario(
        name="spin",
        param=param,
        in_dim=dim,
        out_dim=dim,
        r_f=r_f,
        r_g=HermitianOperator(r_g, shape),
        constraints=constraints,
        psi0=psi0,
        sampler=RepSampler.spin(j),
    )


def build_scenario(name: str, param) -> Scenario:
    """Dispatch on the family name ('pure', 'maxent' or 'spin')."""
    if name == "pure":
        return build_pure(int(param))
    if name == "maxent":
        return build_maxent(int(param))
    if name == "spin":
        return build_spin(param)
    raise ValueError(f"unknown scenario {name!r}")


def identity_seed(scenario: Scenario) -> HermitianOperator:
    """Seed of the do-nothing instrument: the pairing projector on in (x) out."""
    phi = max_entangled_vector(scenario.in_dim)
    return HermitianOperator(np.outer(phi, phi.conj()), scenario.r_f.shape)


def measure_prepare_seed(scenario: Scenario) -> HermitianOperator:
    """Seed of the covariant measure-and-reprepare instrument.

    Measures the covariant POVM generated by d_in |psi0><psi0| and reprepares
    the guessed state; the most estimation-biased of the canonical seeds.
    """
    proj = _reference_projector(scenario.psi0)
    mat = scenario.in_dim * kron(proj.T, proj)
    seed = HermitianOperator(mat, scenario.r_f.shape)
    res = scenario.constraint_residual(seed)
    if res > CONSTRAINT_TOL:
        raise RuntimeError(
            f"measure-prepare seed violates constraints by {res:.3e} on {scenario.label}"
        )
    return seed


def covariant_seed(
    kraus_by_outcome: list[list[np.ndarray]],
    guess_unitaries: list[np.ndarray],
    scenario: Scenario | None = None,
) -> HermitianOperator:
    """Covariantize a discrete instrument plus guess into a seed operator.

    Each outcome r with Kraus operators {A} and guess unitary U_r contributes
    sum over A of vec(U_r^dag A U_r) vec(U_r^dag A U_r)^dag; the covariant
    continuous-outcome instrument built this way reproduces the discrete
    instrument's fidelities.  Requires POVM completeness of the input.
    """
    if len(kraus_by_outcome) != len(guess_unitaries):
        raise ValueError(
            f"{len(kraus_by_outcome)} outcomes but {len(guess_unitaries)} guess unitaries"
        )
    if not kraus_by_outcome or not kraus_by_outcome[0]:
        raise ValueError("need at least one outcome with at least one Kraus operator")
    first = as_complex_matrix(kraus_by_outcome[0][0])
    n_out, n_in = first.shape
    completeness = np.zeros((n_in, n_in), dtype=complex)
    for outcome in kraus_by_outcome:
        for a in outcome:
            a = as_complex_matrix(a)
            if a.shape != (n_out, n_in):
                raise ValueError(f"Kraus shape {a.shape} != {(n_out, n_in)}")
            completeness += a.conj().T @ a
    dev = float(np.max(np.abs(completeness - np.eye(n_in))))
    if dev > 1e-10:
        raise ValueError(f"POVM completeness violated: max |sum A^dag A - I| = {dev:.3e}")
    seed = np.zeros((n_in * n_out, n_in * n_out), dtype=complex)
    for outcome, guess in zip(kraus_by_outcome, guess_unitaries):
        guess = as_complex_matrix(guess)
        if guess.shape != (n_in, n_in):
            raise ValueError(f"guess unitary shape {guess.shape} != {(n_in, n_in)}")
        for a in outcome:
            v = vec(guess.conj().T @ as_complex_matrix(a) @ guess)
            seed += np.outer(v, v.conj())
    shape = scenario.r_f.shape if scenario is not None else TensorShape((n_in, n_out), 1)
    result = HermitianOperator(seed, shape)
    if scenario is not None:
        if scenario.in_dim != n_in or scenario.out_dim != n_out:
            raise ValueError(
                f"instrument dimensions {(n_in, n_out)} do not match {scenario.label}"
            )
        res = scenario.constraint_residual(result)
        if res > CONSTRAINT_TOL:
            raise ValueError(
                f"covariantized seed violates constraints by {res:.3e}; "
                "the input instrument is not trace preserving"
            )
    return result
