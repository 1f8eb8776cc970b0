"""Auxiliary-space preconditioners and their smoothers.

The preconditioner for the curl problem is

    B = S^{-1} + P (H + tau M)^{-1} P^T + tau^{-1} G L^{-1} G^T

with S the Jacobi or symmetric Gauss-Seidel smoother of A, P the
auxiliary-space transfer, H the vector H1 matrix, M the auxiliary mass,
L the scalar Laplacian, and G the gradient.  The 2-D div problem swaps
G for the rotated gradient R; the 3-D div problem replaces the
potential term by two curl-based corrections

    tau^{-1} C W^{-1} C^T + tau^{-1} C P_curl H^{-1} P_curl^T C^T

where W is either the diagonal of Q_curl = C^T M_div C or its symmetric
Gauss-Seidel matrix.

All inner inverses are exact sparse direct factorizations computed once
at setup; an inner-CG fallback is available for larger problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    AssembledSystem,
    curl_stiffness_matrix,
    h1_vector_matrix,
    make_quadratures,
    mass_matrix,
    scalar_laplacian_matrix,
)
from .derham import build_space
from .transfer import TransferSet, build_transfer_set

__all__ = [
    "Smoother",
    "InnerSolver",
    "AspPreconditioner",
    "apply_smoother_inverse",
    "build_asp_preconditioner",
]


def _lower_upper(A: sp.csr_matrix) -> tuple[sp.csc_matrix, sp.csc_matrix]:
    L = sp.tril(A, format="csc")
    U = sp.triu(A, format="csc")
    return L, U


def _triangular_factor(T: sp.csc_matrix):
    """Direct factorization of a triangular matrix (no fill, no pivots)."""
    return spla.splu(T, permc_spec="NATURAL",
                     options={"SymmetricMode": False, "DiagPivotThresh": 0.0})


class Smoother:
    """Jacobi or symmetric Gauss-Seidel smoother of a sparse matrix.

    ``apply`` realizes S^{-1} r:  Jacobi divides by the diagonal; SGS
    evaluates L^{-1} - L^{-1} A U^{-1} + U^{-1} with L/U the lower and
    upper triangles including the diagonal.
    """

    def __init__(self, kind: str, A: sp.spmatrix) -> None:
        if kind not in ("jacobi", "gs"):
            raise ValueError("smoother kind must be 'jacobi' or 'gs'")
        self.kind = kind
        self.A = sp.csr_matrix(A)
        diag = self.A.diagonal()
        if np.any(diag == 0.0):
            raise ArithmeticError("matrix has a zero diagonal entry")
        self._diag = diag
        if kind == "gs":
            L, U = _lower_upper(self.A)
            self._solve_l = _triangular_factor(L).solve
            self._solve_u = _triangular_factor(U).solve

    def apply(self, r: np.ndarray) -> np.ndarray:
        if self.kind == "jacobi":
            return r / self._diag
        x = self._solve_u(r)
        return x + self._solve_l(r - self.A @ x)


def apply_smoother_inverse(kind: str, A: sp.spmatrix, r: np.ndarray) -> np.ndarray:
    """One-shot S^{-1} r for the given smoother kind."""
    return Smoother(kind, A).apply(np.asarray(r, dtype=float))


@dataclass(frozen=True)
class InnerSolver:
    """How the SPD auxiliary matrices are inverted inside the
    preconditioner: exact factorization (default) or inner CG."""

    kind: str = "direct"
    tol: float = 1e-10
    maxit: int = 2000

    def make(self, M: sp.spmatrix):
        M = sp.csc_matrix(M)
        if self.kind == "direct":
            solve = spla.factorized(M)
            return lambda b: solve(b)
        if self.kind == "cg":
            def solve_cg(b, M=M):
                x, info = spla.cg(M, b, rtol=self.tol, atol=0.0, maxiter=self.maxit)
                if info != 0:
                    raise ArithmeticError("inner CG did not converge")
                return x
            return solve_cg
        raise ValueError("inner solver kind must be 'direct' or 'cg'")


class AspPreconditioner:
    """Matrix-free application of the auxiliary-space preconditioner."""

    def __init__(self, system: AssembledSystem, smoother: str = "jacobi",
                 curl_smoother: str = "diag",
                 inner: InnerSolver = InnerSolver()) -> None:
        spec = system.spec
        if spec.bc != "essential":
            raise ValueError("the preconditioner requires essential bc")
        self.system = system
        self.tau = spec.tau
        self.operator = spec.operator
        self.dim = spec.dim
        self.smoother = Smoother(smoother, system.A)
        self.transfers: TransferSet = build_transfer_set(spec)
        kw = dict(dim=spec.dim, bc="essential")
        xh = build_space("vector", spec.p, spec.n_elems, **kw)
        grad = build_space("grad", spec.p, spec.n_elems, **kw)
        quads = make_quadratures(xh)
        H = h1_vector_matrix(xh, quads)
        M_x = mass_matrix(xh, quads)
        self._solve_main = inner.make(H + self.tau * M_x)
        if spec.operator == "curl" or spec.dim == 2:
            L = scalar_laplacian_matrix(grad, quads)
            self._solve_potential = inner.make(L)
            self._apply_extra = None
        else:
            self._solve_potential = None
            self._setup_div_3d(spec, H, curl_smoother, inner, quads)
        self.shape = (system.A.shape[0], system.A.shape[0])

    def _setup_div_3d(self, spec, H, curl_smoother, inner, quads) -> None:
        if curl_smoother not in ("diag", "sgs"):
            raise ValueError("curl smoother must be 'diag' or 'sgs'")
        curl = build_space("curl", spec.p, spec.n_elems, dim=3, bc="essential")
        div = self.system.space
        Q_curl = curl_stiffness_matrix(curl, div, quads)
        dq = Q_curl.diagonal()
        if np.any(dq <= 0.0):
            raise ArithmeticError("Q_curl has a non-positive diagonal entry "
                                  "(curl-free curl basis function)")
        self._q_smoother = (Smoother("jacobi", Q_curl) if curl_smoother == "diag"
                            else Smoother("gs", Q_curl))
        self._solve_h_curl = inner.make(H)

    def apply(self, r: np.ndarray) -> np.ndarray:
        """B r: smoother + auxiliary-space correction terms."""
        r = np.asarray(r, dtype=float)
        out = self.smoother.apply(r) + self.correction(r)
        return out

    def smoother_apply(self, r: np.ndarray) -> np.ndarray:
        """The S^{-1} part alone."""
        return self.smoother.apply(np.asarray(r, dtype=float))

    def correction(self, r: np.ndarray) -> np.ndarray:
        """K r = (B - S^{-1}) r: the auxiliary-space terms alone."""
        r = np.asarray(r, dtype=float)
        P = self.transfers.P_main
        out = P @ self._solve_main(P.T @ r)
        if self._solve_potential is not None:
            Gm = self.transfers.potential
            out = out + (Gm @ self._solve_potential(Gm.T @ r)) / self.tau
        else:
            C = self.transfers.C
            Pc = self.transfers.P_curl
            ctr = C.T @ r
            out = out + (C @ self._q_smoother.apply(ctr)) / self.tau
            out = out + (C @ (Pc @ self._solve_h_curl(Pc.T @ ctr))) / self.tau
        return out

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.apply, dtype=float)


def build_asp_preconditioner(system: AssembledSystem, smoother: str = "jacobi",
                             curl_smoother: str = "diag",
                             inner: InnerSolver = InnerSolver()) -> AspPreconditioner:
    """Convenience factory mirroring the JSON configuration block."""
    return AspPreconditioner(system, smoother=smoother,
                             curl_smoother=curl_smoother, inner=inner)
