"""Krylov solvers and spectral estimation.

* :func:`pcg` -- outer preconditioned conjugate gradients with the
  true-residual stopping rule ||A x - b|| / ||b|| <= tol, zero initial
  guess, and an optional flexible (Polak-Ribiere) direction update for
  nonlinear preconditioners.
* :func:`minres` -- minimum-residual iterations for symmetric systems,
  with a fixed-iteration smoother mode.
* :class:`GltPreconditioner` -- the composite cycle: relaxation sweeps,
  a fixed number of mass-preconditioned MINRES iterations on the
  system itself, then the auxiliary-space correction.
* :func:`estimate_condition_number` -- extreme eigenvalues of the
  (preconditioned) operator, dense or via preconditioned Lanczos.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .assembly import AssembledSystem
from .precond import AspPreconditioner

__all__ = [
    "SolveReport",
    "GltConfig",
    "GltPreconditioner",
    "pcg",
    "minres",
    "estimate_condition_number",
]


@dataclass
class SolveReport:
    """Outcome of one Krylov solve."""

    iterations: int
    converged: bool
    residuals: list[float] = field(repr=False, default_factory=list)
    wall_time: float = 0.0
    max_iter: int = 0
    breakdown: bool = False
    lambda_min: float | None = None
    lambda_max: float | None = None
    kappa2: float | None = None

    def to_json(self) -> str:
        return json.dumps({
            "iterations": self.iterations,
            "converged": self.converged,
            "breakdown": self.breakdown,
            "max_iter": self.max_iter,
            "wall_time": self.wall_time,
            "residuals": self.residuals,
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "kappa2": self.kappa2,
        })

    def residuals_csv(self) -> str:
        lines = ["iteration,relative_residual"]
        lines += [f"{i},{r:.16e}" for i, r in enumerate(self.residuals)]
        return "\n".join(lines) + "\n"


def _as_matvec(op):
    if op is None:
        return lambda v: v
    if callable(op) and not hasattr(op, "shape"):
        return op
    if hasattr(op, "apply"):
        return op.apply
    if hasattr(op, "matvec"):
        return op.matvec
    return lambda v: op @ v


def pcg(A, b: np.ndarray, B=None, tol: float = 1e-6, max_iter: int = 3000,
        x0: np.ndarray | None = None, flexible: bool = False):
    """Preconditioned CG with true-residual stopping.

    ``A`` and ``B`` may be sparse matrices, LinearOperators, objects
    with ``apply``, or plain callables.  The convergence test uses the
    recomputed residual ||b - A x||, not the recurrence residual.
    """
    amat = _as_matvec(A)
    bmat = _as_matvec(B)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    t0 = time.perf_counter()
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return x, SolveReport(0, True, [0.0], time.perf_counter() - t0, max_iter)
    r = b - amat(x)
    residuals = [float(np.linalg.norm(r) / nb)]
    if residuals[-1] <= tol:
        return x, SolveReport(0, True, residuals, time.perf_counter() - t0, max_iter)
    z = bmat(r)
    p = z.copy()
    rz = float(r @ z)
    breakdown = False
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        Ap = amat(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0 or not np.isfinite(pAp):
            breakdown = True
            it -= 1
            break
        alpha = rz / pAp
        r_old = r.copy() if flexible else None
        x = x + alpha * p
        r = r - alpha * Ap
        true_res = float(np.linalg.norm(b - amat(x)) / nb)
        residuals.append(true_res)
        if true_res <= tol:
            converged = True
            break
        z = bmat(r)
        if flexible:
            beta = float(z @ (r - r_old)) / rz
        else:
            beta = float(r @ z) / rz
        rz = float(r @ z)
        if rz == 0.0:
            breakdown = True
            break
        p = z + beta * p
    report = SolveReport(it, converged, residuals,
                         time.perf_counter() - t0, max_iter, breakdown)
    return x, report


def minres(M, b: np.ndarray, max_iter: int, x0: np.ndarray | None = None,
           tol: float | None = None):
    """Minimum-residual iterations for a symmetric system M x = b.

    With ``tol=None`` (smoother mode) exactly ``max_iter`` iterations
    are performed unless the residual vanishes; otherwise the loop exits
    once ||b - M x|| / ||b|| <= tol.  Conjugate-residual three-term
    recurrence form.
    """
    mv = _as_matvec(M)
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    t0 = time.perf_counter()
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return x, SolveReport(0, True, [0.0], time.perf_counter() - t0, max_iter)
    r = b - mv(x)
    residuals = [float(np.linalg.norm(r) / nb)]
    p1 = r.copy()
    s1 = mv(p1)
    p2 = None
    s2 = None
    breakdown = False
    it = 0
    for it in range(1, max_iter + 1):
        ss = float(s1 @ s1)
        if ss == 0.0 or not np.isfinite(ss):
            breakdown = ss != 0.0
            it -= 1
            break
        alpha = float(r @ s1) / ss
        x = x + alpha * p1
        r = r - alpha * s1
        residuals.append(float(np.linalg.norm(r) / nb))
        if tol is not None and residuals[-1] <= tol:
            break
        if residuals[-1] == 0.0:
            break
        # next direction: A-orthogonalize A s1 against the last two
        p0 = s1.copy()
        s0 = mv(s1)
        beta1 = float(s0 @ s1) / ss
        p0 = p0 - beta1 * p1
        s0 = s0 - beta1 * s1
        if p2 is not None:
            ss2 = float(s2 @ s2)
            if ss2 > 0.0:
                beta2 = float(s0 @ s2) / ss2
                p0 = p0 - beta2 * p2
                s0 = s0 - beta2 * s2
        p2, s2 = p1, s1
        p1, s1 = p0, s0
    converged = tol is None or residuals[-1] <= tol
    report = SolveReport(it, converged, residuals,
                         time.perf_counter() - t0, max_iter, breakdown)
    return x, report


@dataclass(frozen=True)
class GltConfig:
    """Cycle parameters of the composite preconditioner."""

    nu1: int = 1
    nu2: int = 1
    nu_asp: int = 3

    def __post_init__(self) -> None:
        if min(self.nu1, self.nu2, self.nu_asp) < 1:
            raise ValueError("all cycle counts must be positive")


class GltPreconditioner:
    """Composite preconditioner: per cycle, nu1 relaxation sweeps, then
    nu2 iterations of MINRES on the system preconditioned by the exact
    inverse mass matrix (the degree-robust "GLT" smoothing step), then
    the auxiliary-space correction; nu_asp cycles per application.

    The truncated MINRES step makes the map nonlinear, so the outer
    solver must use the flexible direction update.
    """

    def __init__(self, system: AssembledSystem, asp: AspPreconditioner,
                 cfg: GltConfig) -> None:
        self.system = system
        self.asp = asp
        self.cfg = cfg
        self.shape = asp.shape
        mass_solve = spla.factorized(system.M_D.tocsc())
        self._mass_inverse = spla.LinearOperator(
            self.shape, matvec=lambda v: mass_solve(v), dtype=float)

    def apply(self, b: np.ndarray) -> np.ndarray:
        A = self.system.A
        x = np.zeros_like(np.asarray(b, dtype=float))
        for _ in range(self.cfg.nu_asp):
            for _ in range(self.cfg.nu1):
                x = x + self.asp.smoother_apply(b - A @ x)
            x, _ = spla.minres(A, b, x0=x, M=self._mass_inverse,
                               maxiter=self.cfg.nu2, rtol=1e-14)
            d = b - A @ x
            x = x + self.asp.correction(d)
        return x


def _materialize(op, n: int) -> np.ndarray:
    mv = _as_matvec(op)
    cols = [mv(col) for col in np.eye(n)]
    return np.array(cols).T


def estimate_condition_number(A, B=None, mode: str = "dense", k: int = 200,
                              seed: int = 0):
    """Extreme eigenvalues and condition number of B A (or A alone).

    ``dense`` materializes the operators (dim <= 20000) and solves the
    generalized symmetric eigenproblem exactly; ``lanczos`` runs ``k``
    preconditioned-Lanczos steps with full reorthogonalization and
    returns the extreme Ritz values (about +/-2% at k = 200).
    """
    n = A.shape[0]
    if mode == "dense":
        if n > 20000:
            raise ValueError("dense mode limited to dimension 20000")
        Ad = A.toarray() if hasattr(A, "toarray") else np.asarray(A)
        Ad = 0.5 * (Ad + Ad.T)
        if B is None:
            w = sla.eigvalsh(Ad)
        else:
            Bd = _materialize(B, n)
            Bd = 0.5 * (Bd + Bd.T)
            # eigenvalues of B A via the symmetric pencil form
            w = sla.eigh(Ad, Bd, type=3, eigvals_only=True)
        lam_min, lam_max = float(w[0]), float(w[-1])
    elif mode == "lanczos":
        lam_min, lam_max = _lanczos_extremes(A, B, min(k, n), seed)
    else:
        raise ValueError("mode must be 'dense' or 'lanczos'")
    if lam_min <= 0.0:
        raise ArithmeticError("non-positive extreme eigenvalue estimate; "
                              "operator pair is not SPD to working accuracy")
    return lam_min, lam_max, lam_max / lam_min


def _lanczos_extremes(A, B, k: int, seed: int) -> tuple[float, float]:
    amat = _as_matvec(A)
    bmat = _as_matvec(B)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    z = bmat(v)
    beta = float(np.sqrt(v @ z))
    v /= beta
    z /= beta
    V = [v]
    Z = [z]
    alphas: list[float] = []
    betas: list[float] = []
    v_prev = np.zeros(n)
    beta_j = 0.0
    for _ in range(k):
        w = amat(Z[-1]) - beta_j * v_prev
        alpha = float(w @ Z[-1])
        w = w - alpha * V[-1]
        # full reorthogonalization in the B inner product
        for vi, zi in zip(V, Z):
            w = w - float(w @ zi) * vi
        wz = bmat(w)
        beta_j = float(np.sqrt(max(w @ wz, 0.0)))
        alphas.append(alpha)
        if beta_j <= 1e-14 * abs(alpha):
            break
        betas.append(beta_j)
        v_prev = V[-1]
        V.append(w / beta_j)
        Z.append(wz / beta_j)
    if len(betas) >= len(alphas):
        betas = betas[: len(alphas) - 1]
    w = sla.eigvalsh_tridiagonal(np.array(alphas), np.array(betas))
    return float(w[0]), float(w[-1])
