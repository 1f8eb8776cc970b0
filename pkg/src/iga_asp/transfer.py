"""Auxiliary-space transfer matrices.

The quasi-interpolation operators onto the curl/div spaces are tensor
products of the 1-D Greville interpolation P and histopolation Q.
Restricted to spline inputs (the auxiliary space is a vector of scalar
spline spaces), P is the identity on its own space, so each transfer
block is a Kronecker product of identities and 1-D histopolation
matrices:

    P_curl = diag(Q1 x I x I,  I x Q2 x I,  I x I x Q3)
    P_div  = diag(I x Q2 x Q3, Q1 x I x Q3, Q1 x Q2 x I)   (3-D)
    P_div  = diag(I x Q2,      Q1 x I)                     (2-D)

Essential boundary conditions restrict rows/columns of the 1-D factors
to interior indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import derham
from .assembly import ProblemSpec
from .derham import TensorSpace, build_space
from .splines1d import (
    Space1D,
    difference_matrix_1d,
    greville_points,
    histopolation_matrix_1d,
    interpolation_matrix_1d,
    make_quadrature,
    restrict_bc,
)

__all__ = [
    "TransferSet",
    "build_p_curl",
    "build_p_div",
    "build_transfer_set",
    "function_projection_1d",
]


@dataclass(frozen=True)
class TransferSet:
    """All matrices one ASP formula needs besides the smoother."""

    P_main: sp.csr_matrix = field(repr=False)
    potential: sp.csr_matrix = field(repr=False)   # G (curl) or R (2-D div)
    C: sp.csr_matrix | None = field(repr=False, default=None)     # 3-D div
    P_curl: sp.csr_matrix | None = field(repr=False, default=None)  # 3-D div


def _factor_transfer(src: Space1D, dst: Space1D) -> sp.csr_matrix:
    """1-D transfer from a B factor of the auxiliary space onto one
    factor of the target space: identity for B targets (Greville
    interpolation reproduces its own space), bc-restricted
    histopolation for D targets."""
    if src.kind != "B":
        raise ValueError("auxiliary factors are B-spline spaces")
    if dst.kind == "B":
        if src.dim != dst.dim:
            raise ValueError("factor dimension mismatch")
        return sp.identity(src.dim, format="csr")
    free = Space1D(src.knot, kind="B", bc="free")
    Q = histopolation_matrix_1d(free, make_quadrature(src.knot))
    return restrict_bc(Q, None, src if src.bc == "zero" else None)


def _kron_chain(mats) -> sp.csr_matrix:
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return sp.csr_matrix(out)


def _block_diag_transfer(xh_space: TensorSpace, target: TensorSpace) -> sp.csr_matrix:
    if xh_space.kind.kind != "vector":
        raise ValueError("transfers act on the auxiliary vector space")
    if xh_space.knots != target.knots or xh_space.kind.bc != target.kind.bc:
        raise ValueError("spaces must share knots and bc")
    if xh_space.n_components != target.n_components:
        raise ValueError("component count mismatch")
    blocks = []
    for src_comp, dst_comp in zip(xh_space.components, target.components):
        facs = [_factor_transfer(s, d) for s, d in zip(src_comp, dst_comp)]
        blocks.append(_kron_chain(facs))
    out = sp.csr_matrix(sp.block_diag(blocks, format="csr"))
    out.sort_indices()
    return out


def build_p_curl(xh_space: TensorSpace, curl_space: TensorSpace) -> sp.csr_matrix:
    """Transfer matrix from the auxiliary vector space onto V(curl)."""
    if curl_space.kind.kind != "curl":
        raise ValueError("target must be a curl space")
    return _block_diag_transfer(xh_space, curl_space)


def build_p_div(xh_space: TensorSpace, div_space: TensorSpace) -> sp.csr_matrix:
    """Transfer matrix from the auxiliary vector space onto V(div)."""
    if div_space.kind.kind != "div":
        raise ValueError("target must be a div space")
    return _block_diag_transfer(xh_space, div_space)


def function_projection_1d(factor: Space1D,
                           order: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Sampling nodes and matrix realizing the commuting 1-D projector
    on analytic data.

    Returns ``(nodes, T)`` such that ``T @ f(nodes)`` gives the factor's
    coefficients of the projection of a univariate function ``f``:

    * B factors: Greville interpolation, ``T = A^{-1}`` (rows restricted
      to the interior for zero-trace factors, valid for data satisfying
      the boundary conditions);
    * D factors: histopolation, ``T = Diff A^{-1} Cum`` where ``Cum``
      accumulates Gauss panel integrals into antiderivative values at
      the Greville points.
    """
    kv = factor.knot
    free = Space1D(kv, kind="B", bc="free")
    A = interpolation_matrix_1d(free).toarray()
    if factor.kind == "B":
        T = np.linalg.inv(A)
        if factor.bc == "zero":
            T = T[factor.indices(), :]
        return greville_points(kv), T
    # D factor: panels split at breakpoints and Greville points so every
    # Greville abscissa is a panel boundary of the cumulative integral.
    g = greville_points(kv)
    cuts = np.unique(np.concatenate([kv.breakpoints, g, [0.0, 1.0]]))
    q = order if order is not None else kv.degree + 3
    ref_x, ref_w = np.polynomial.legendre.leggauss(q)
    a, b = cuts[:-1], cuts[1:]
    half = 0.5 * (b - a)
    nodes = (a[:, None] + half[:, None] * (ref_x[None, :] + 1.0)).ravel()
    weights = (half[:, None] * ref_w[None, :]).ravel()
    # Cum[k, :]: weights of all panels fully left of the k-th Greville
    # point (every g_k is a panel boundary by construction)
    panels_left = np.searchsorted(b, g + 1e-12)
    Cum = np.zeros((len(g), len(nodes)))
    for k, m in enumerate(panels_left):
        Cum[k, : m * q] = weights[: m * q]
    T = difference_matrix_1d(kv.n).toarray() @ np.linalg.solve(A, Cum)
    return nodes, T


def build_transfer_set(spec: ProblemSpec) -> TransferSet:
    """Assemble the complete transfer-matrix set for one problem."""
    if spec.bc != "essential":
        raise ValueError("transfer sets exist for essential bc only")
    kw = dict(dim=spec.dim, bc=spec.bc)
    xh = build_space("vector", spec.p, spec.n_elems, **kw)
    grad = build_space("grad", spec.p, spec.n_elems, **kw)
    if spec.operator == "curl":
        curl = build_space("curl", spec.p, spec.n_elems, **kw)
        return TransferSet(P_main=build_p_curl(xh, curl),
                           potential=derham.gradient_matrix(grad, curl))
    div = build_space("div", spec.p, spec.n_elems, **kw)
    P_div = build_p_div(xh, div)
    if spec.dim == 2:
        return TransferSet(P_main=P_div,
                           potential=derham.vector_curl_matrix(grad, div))
    curl = build_space("curl", spec.p, spec.n_elems, **kw)
    return TransferSet(P_main=P_div,
                       potential=derham.curl_matrix(curl, div),
                       C=derham.curl_matrix(curl, div),
                       P_curl=build_p_curl(xh, curl))
