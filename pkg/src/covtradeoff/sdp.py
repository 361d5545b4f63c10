"""Dense Hermitian semidefinite programming by primal-dual path following.

Solves  max Tr[C X]  subject to  Tr[A_i X] = b_i  and  X >= 0  for Hermitian
C, A_i at desk scale (dimension <= 256).

The Hermitian problem is embedded into a real symmetric one via
H -> [[Re H, -Im H], [Im H, Re H]], which doubles eigenvalue multiplicities
and doubles inner products; all reported quantities (objective, duality gap,
residuals) are converted back to the original Hermitian inner product.  The
algorithm is infeasible-start path following with Nesterov-Todd scaling and
a Mehrotra-style predictor step that only sets the centering parameter;
Newton systems are solved by dense factorization.  Solves are deterministic:
identical problems yield bit-identical iterates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import HermitianOperator, frobenius_inner
from .scenarios import LinearConstraint

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITERATIONS = "max-iterations"
STATUS_INFEASIBLE = "infeasible"
STATUS_NUMERICAL_FAILURE = "numerical-failure"

_FRACTION_TO_BOUNDARY = 0.98
_MAX_DIMENSION = 256


class SdpError(RuntimeError):
    """Raised for malformed problems (inconsistent constraints, bad dimensions)."""


def _flatten(matrix: np.ndarray) -> np.ndarray:
    return np.concatenate([matrix.real.ravel(), matrix.imag.ravel()])


class SdpProblem:
    """max Tr[objective X] s.t. Tr[A_i X] = b_i, X >= 0.

    Linearly dependent constraint rows with consistent values are dropped at
    construction; inconsistent rows raise :class:`SdpError`.
    """

    def __init__(self, objective: HermitianOperator, constraints: list[LinearConstraint]):
        self.objective = objective
        self.constraints = tuple(constraints)
        self.dimension = objective.dim
        for c in self.constraints:
            if c.operator.dim != self.dimension:
                raise SdpError(
                    f"constraint dimension {c.operator.dim} != objective dimension {self.dimension}"
                )
        kept: list[LinearConstraint] = []
        kept_rows: list[np.ndarray] = []
        for c in self.constraints:
            row = _flatten(c.operator.matrix)
            scale = float(np.linalg.norm(row))
            if not kept_rows:
                residual = scale
                predicted = 0.0
            else:
                basis = np.stack(kept_rows, axis=1)
                coeffs, *_ = np.linalg.lstsq(basis, row, rcond=None)
                residual = float(np.linalg.norm(row - basis @ coeffs))
                predicted = float(np.dot(coeffs, [k.value for k in kept]))
            if residual > 1e-10 * (1.0 + scale):
                kept.append(c)
                kept_rows.append(row)
            elif abs(predicted - c.value) > 1e-8 * (1.0 + abs(c.value)):
                raise SdpError(
                    f"inconsistent constraints: dependent row wants {c.value}, "
                    f"existing rows imply {predicted}"
                )
        self.reduced_constraints = tuple(kept)


@dataclass(frozen=True, eq=False)
class SdpSolution:
    """Solver output: optimizer, certified value and diagnostics."""

    x: HermitianOperator
    value: float
    duality_gap: float
    primal_residual: float
    min_eigenvalue: float
    iterations: int
    status: str
    dual_value: float
    dual_residual: float


def _embed(h: np.ndarray) -> np.ndarray:
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


def _unembed(y: np.ndarray, n: int) -> np.ndarray:
    re = (y[:n, :n] + y[n:, n:]) / 2
    im = (y[n:, :n] - y[:n, n:]) / 2
    return re + 1j * im


def _certifies_infeasible(
    y: np.ndarray,
    b: np.ndarray,
    apply_at,
    b_scale: float,
    tol: float,
    ray_floor: float = 1e5,
) -> bool:
    """Farkas check: a large dual ray with A*(yhat) <~ 0 and b.yhat > 0.

    Any PSD X with A(X) = b would give 0 <= <A*(yhat), X> = b.yhat up to tol,
    so such a ray certifies that no feasible point exists.
    """
    norm = float(np.linalg.norm(y))
    if norm <= ray_floor * b_scale:
        return False
    yhat = y / norm
    ray = apply_at(yhat)
    lam_max = float(np.linalg.eigvalsh((ray + ray.T) / 2)[-1])
    return lam_max <= tol and float(np.dot(b, yhat)) > 1e-10


def _max_step(m: np.ndarray, dm: np.ndarray) -> float:
    """Largest alpha with m + alpha dm >= 0, for m > 0 (Cholesky scaling)."""
    l = np.linalg.cholesky(m)
    a = np.linalg.solve(l, dm)
    b = np.linalg.solve(l, a.T).T
    lam = float(np.linalg.eigvalsh((b + b.T) / 2)[0])
    if lam >= 0.0:
        return np.inf
    return -1.0 / lam


def solve(
    p: SdpProblem,
    gap_tol: float = 1e-8,
    feas_tol: float = 1e-9,
    max_iter: int = 200,
) -> SdpSolution:
    """Solve the problem to the requested duality gap and feasibility.

    On ``status == "optimal"`` the returned operator is positive semidefinite
    within ``feas_tol``, satisfies the constraints within ``feas_tol``, and
    the reported value is within ``duality_gap`` of the true optimum.
    """
    n = p.dimension
    if n > _MAX_DIMENSION:
        raise SdpError(f"dimension {n} exceeds the supported maximum {_MAX_DIMENSION}")
    if not p.reduced_constraints:
        raise SdpError("need at least one constraint")

    cons = p.reduced_constraints
    m = len(cons)
    dim = 2 * n
    a_flat = np.stack([_embed(c.operator.matrix).ravel() for c in cons])  # (m, dim^2)
    a_mats = a_flat.reshape(m, dim, dim)
    b = 2.0 * np.array([c.value for c in cons])
    # Normalize the objective so the dual slack stays O(1); every reported
    # quantity is scaled back to the caller's units.
    c_norm = max(1.0, float(np.max(np.abs(p.objective.matrix))))
    cm = _embed(-p.objective.matrix / c_norm)  # internal min form
    c_scale = 1.0 + float(np.max(np.abs(cm)))
    b_scale = 1.0 + float(np.max(np.abs(b)))

    def apply_a(mat: np.ndarray) -> np.ndarray:
        return a_flat @ mat.ravel()

    def apply_at(y: np.ndarray) -> np.ndarray:
        return (y @ a_flat).reshape(dim, dim)

    # Starting point: scale the identity to satisfy a trace-type constraint
    # if one exists; unit dual slack.
    tau = 1.0
    for c in cons:
        mat = c.operator.matrix
        lead = mat[0, 0].real
        if lead > 0 and np.max(np.abs(mat - lead * np.eye(n))) <= 1e-12:
            tau = c.value / (lead * n)
            break
    if not np.isfinite(tau) or tau <= 0:
        tau = 1.0
    x = tau * np.eye(dim)
    s = np.eye(dim)
    y = np.zeros(m)

    status = STATUS_MAX_ITERATIONS
    obj_history: list[float] = []
    iterations = 0

    def objective_value(xm: np.ndarray) -> float:
        return -float(np.sum(cm * xm)) / 2.0

    try:
        for iterations in range(1, max_iter + 1):
            rp = b - apply_a(x)
            rd = cm - s - apply_at(y)
            gap = float(np.sum(x * s)) / 2.0
            mu = gap / n
            pres = float(np.max(np.abs(rp))) / 2.0 if m else 0.0
            dres = float(np.max(np.abs(rd)))

            if gap * c_norm <= gap_tol and pres <= feas_tol and dres <= feas_tol * c_scale:
                status = STATUS_OPTIMAL
                break

            # Divergence of the dual variables certifies primal infeasibility.
            if _certifies_infeasible(y, b, apply_at, b_scale, tol=1e-7):
                status = STATUS_INFEASIBLE
                break
            if mu < 1e-15 * max(1.0, tau) and pres > max(1e3 * feas_tol, 1e-7):
                status = (
                    STATUS_INFEASIBLE
                    if _certifies_infeasible(y, b, apply_at, b_scale, tol=1e-6, ray_floor=1.0)
                    else STATUS_NUMERICAL_FAILURE
                )
                break

            ls = np.linalg.cholesky(s)
            li = np.linalg.inv(ls)
            s_inv = li.T @ li
            t = ls.T @ x @ ls
            w_eig, q = np.linalg.eigh((t + t.T) / 2)
            sqrt_t = (q * np.sqrt(np.maximum(w_eig, 0.0))) @ q.T
            w = li.T @ sqrt_t @ li
            w = (w + w.T) / 2

            wa = np.einsum("ab,mbc,cd->mad", w, a_mats, w, optimize=True)
            schur = a_flat @ wa.reshape(m, -1).T
            schur = (schur + schur.T) / 2
            w_rd_w = w @ rd @ w
            a_wrdw = apply_a(w_rd_w)

            try:
                schur_cho = np.linalg.cholesky(schur)
            except np.linalg.LinAlgError:
                schur_cho = None

            def solve_schur(rhs: np.ndarray) -> np.ndarray:
                if schur_cho is None:
                    return np.linalg.lstsq(schur, rhs, rcond=None)[0]

                def back(v: np.ndarray) -> np.ndarray:
                    return np.linalg.solve(schur_cho.T, np.linalg.solve(schur_cho, v))

                out = back(rhs)
                out += back(rhs - schur @ out)  # one refinement step
                return out

            # Predictor (affine scaling) step fixes the centering parameter.
            dy_aff = solve_schur(b + a_wrdw)
            ds_aff = rd - apply_at(dy_aff)
            dx_aff = -x - w @ ds_aff @ w
            dx_aff = (dx_aff + dx_aff.T) / 2
            ap_aff = min(1.0, _FRACTION_TO_BOUNDARY * _max_step(x, dx_aff))
            ad_aff = min(1.0, _FRACTION_TO_BOUNDARY * _max_step(s, ds_aff))
            mu_aff = float(np.sum((x + ap_aff * dx_aff) * (s + ad_aff * ds_aff))) / dim
            sigma = min(1.0, max((mu_aff / mu) ** 3, 0.0))

            dy = solve_schur(b + a_wrdw - sigma * mu * apply_a(s_inv))
            ds = rd - apply_at(dy)
            dx = sigma * mu * s_inv - x - w @ ds @ w
            dx = (dx + dx.T) / 2

            alpha_p = min(1.0, _FRACTION_TO_BOUNDARY * _max_step(x, dx))
            alpha_d = min(1.0, _FRACTION_TO_BOUNDARY * _max_step(s, ds))
            x = x + alpha_p * dx
            y = y + alpha_d * dy
            s = s + alpha_d * ds

            obj = objective_value(x)
            if not np.isfinite(obj):
                status = STATUS_NUMERICAL_FAILURE
                break
            obj_history.append(obj)

            # Weak duality audit: primal value must not exceed the dual bound
            # by more than the gap plus the infeasibility slack.
            dual = -float(np.dot(b, y)) / 2.0
            gap_now = float(np.sum(x * s)) / 2.0
            slack = (
                abs(float(np.sum(x * (cm - s - apply_at(y))))) / 2.0
                + abs(float(np.dot(y, b - apply_a(x)))) / 2.0
            )
            if obj > dual + gap_now + slack + 1e-6 * c_scale:
                status = STATUS_NUMERICAL_FAILURE
                break
    except np.linalg.LinAlgError:
        status = (
            STATUS_INFEASIBLE
            if _certifies_infeasible(y, b, apply_at, b_scale, tol=1e-6, ray_floor=1.0)
            else STATUS_NUMERICAL_FAILURE
        )

    if status == STATUS_OPTIMAL and len(obj_history) >= 2:
        tail = obj_history[-5:]
        if any(later < earlier - 1e-10 for earlier, later in zip(tail, tail[1:])):
            status = STATUS_NUMERICAL_FAILURE

    x_h = _unembed(x, n)
    x_op = HermitianOperator(x_h, p.objective.shape)
    value = float(np.sum(p.objective.matrix * x_h.T).real)
    primal_residual, min_eigenvalue = check_feasibility(p, x_op)
    rd_final = cm - s - apply_at(y)
    return SdpSolution(
        x=x_op,
        value=value,
        duality_gap=float(np.sum(x * s)) / 2.0 * c_norm,
        primal_residual=primal_residual,
        min_eigenvalue=min_eigenvalue,
        iterations=iterations,
        status=status,
        dual_value=-float(np.dot(b, y)) / 2.0 * c_norm,
        dual_residual=float(np.max(np.abs(rd_final))) * c_norm,
    )


def check_feasibility(p: SdpProblem, x: HermitianOperator) -> tuple[float, float]:
    """(max constraint violation, smallest eigenvalue) of a candidate operator."""
    if x.dim != p.dimension:
        raise SdpError(f"dimension mismatch: {x.dim} != {p.dimension}")
    residual = max(
        (abs(frobenius_inner(c.operator, x) - c.value) for c in p.constraints),
        default=0.0,
    )
    eigenvalues = np.linalg.eigvalsh(x.matrix)
    return float(residual), float(eigenvalues[0])
