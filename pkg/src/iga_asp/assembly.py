"""Kronecker-structured assembly of all global matrices and vectors.

Every global matrix here is a (block-diagonal of) Kronecker products of
the 1-D factor matrices from :mod:`iga_asp.splines1d`:

* ``mass_matrix``           -- L2 mass of any tensor space,
* ``system_matrix``         -- A = D^T M_range D + tau M_D for the
                               curl-curl / grad-div problem,
* ``h1_vector_matrix``      -- vector H1 inner product on the auxiliary
                               space (matrix H, includes the L2 part),
* ``scalar_laplacian_matrix`` -- grad-grad form on the scalar potential
                               space (matrix L, essential bc only),
* ``curl_stiffness_matrix`` -- Q_curl = C^T M_div C (3-D only),
* ``assemble_rhs``          -- load vector from an analytic field.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from . import derham
from .derham import TensorSpace, build_space, differential_matrix
from .splines1d import (
    QuadratureRule,
    drop_small,
    make_quadrature,
    mass_matrix_1d,
    stiffness_matrix_1d,
    basis_values,
)

__all__ = [
    "ProblemSpec",
    "AssembledSystem",
    "make_quadratures",
    "mass_matrix",
    "system_matrix",
    "h1_vector_matrix",
    "scalar_laplacian_matrix",
    "curl_stiffness_matrix",
    "assemble_rhs",
    "system_manifest",
    "export_matrix_market",
]

FieldFunc = Sequence[Callable[..., np.ndarray]]


@dataclass(frozen=True)
class ProblemSpec:
    """One curl-curl or grad-div model problem on the unit square/cube."""

    operator: str                     # 'curl' or 'div'
    dim: int
    p: int | tuple[int, ...]
    n_elems: int | tuple[int, ...]
    tau: float
    bc: str = "essential"
    rhs: FieldFunc | None = None

    def __post_init__(self) -> None:
        if self.operator not in ("curl", "div"):
            raise ValueError("operator must be 'curl' or 'div'")
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if self.dim not in (2, 3):
            raise ValueError("dimension must be 2 or 3")

    @property
    def range_kind(self) -> str:
        if self.operator == "div":
            return "l2"
        return "div" if self.dim == 3 else "l2"


@dataclass(frozen=True)
class AssembledSystem:
    """System matrix plus the pieces it was assembled from."""

    spec: ProblemSpec
    space: TensorSpace
    range_space: TensorSpace
    A: sp.csr_matrix = field(repr=False)
    M_D: sp.csr_matrix = field(repr=False)
    M_range: sp.csr_matrix = field(repr=False)
    D_mat: sp.csr_matrix = field(repr=False)
    b: np.ndarray | None = field(repr=False, default=None)


def make_quadratures(space: TensorSpace, order: int | None = None) -> tuple[QuadratureRule, ...]:
    """One Gauss-Legendre rule per direction (default p + 2 points/span)."""
    return tuple(make_quadrature(kv, order) for kv in space.knots)


def _kron_chain(mats) -> sp.csr_matrix:
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return sp.csr_matrix(out)


def mass_matrix(space: TensorSpace,
                quads: tuple[QuadratureRule, ...] | None = None) -> sp.csr_matrix:
    """Block-diagonal L2 mass matrix; each component block is the
    Kronecker product of its 1-D factor masses."""
    if quads is None:
        quads = make_quadratures(space)
    blocks = []
    for comp in space.components:
        facs = [mass_matrix_1d(f, f, q) for f, q in zip(comp, quads)]
        blocks.append(_kron_chain(facs))
    out = sp.csr_matrix(sp.block_diag(blocks, format="csr"))
    out.sort_indices()
    return out


def system_matrix(spec: ProblemSpec,
                  quad_order: int | None = None) -> AssembledSystem:
    """Assemble A = D^T M_range D + tau M_D for the problem, plus the
    load vector when a right-hand side is attached."""
    space = build_space(spec.operator, spec.p, spec.n_elems, dim=spec.dim, bc=spec.bc)
    range_space = build_space(spec.range_kind, spec.p, spec.n_elems,
                              dim=spec.dim, bc=spec.bc)
    quads = make_quadratures(space, quad_order)
    D_mat = differential_matrix(space, range_space)
    M_D = mass_matrix(space, quads)
    M_range = mass_matrix(range_space, quads)
    A = drop_small(D_mat.T @ M_range @ D_mat + spec.tau * M_D)
    b = assemble_rhs(space, spec.rhs, quads) if spec.rhs is not None else None
    return AssembledSystem(spec, space, range_space, A, M_D, M_range, D_mat, b)


def _scalar_h1_block(comp, quads, include_mass: bool) -> sp.csr_matrix:
    masses = [mass_matrix_1d(f, f, q) for f, q in zip(comp, quads)]
    stiffs = [stiffness_matrix_1d(f, q) for f, q in zip(comp, quads)]
    d = len(comp)
    block = sp.csr_matrix((int(np.prod([f.dim for f in comp])),) * 2)
    for k in range(d):
        facs = [stiffs[j] if j == k else masses[j] for j in range(d)]
        block = block + _kron_chain(facs)
    if include_mass:
        block = block + _kron_chain(masses)
    return drop_small(block)


def h1_vector_matrix(vector_space: TensorSpace,
                     quads: tuple[QuadratureRule, ...] | None = None) -> sp.csr_matrix:
    """Matrix H: the full vector H1 inner product (grad-grad plus L2)
    on the auxiliary space, block-diagonal over the identical scalar
    components."""
    if vector_space.kind.kind != "vector":
        raise ValueError("H is assembled on the auxiliary vector space")
    if quads is None:
        quads = make_quadratures(vector_space)
    blocks = [_scalar_h1_block(comp, quads, include_mass=True)
              for comp in vector_space.components]
    out = sp.csr_matrix(sp.block_diag(blocks, format="csr"))
    out.sort_indices()
    return out


def scalar_laplacian_matrix(grad_space: TensorSpace,
                            quads: tuple[QuadratureRule, ...] | None = None) -> sp.csr_matrix:
    """Matrix L: grad-grad form on the scalar potential space.

    Only the essential-bc space is supported: with natural bc the
    constants make L singular and the preconditioner formulas that use
    L^{-1} are meaningless.
    """
    if grad_space.kind.kind != "grad":
        raise ValueError("L is assembled on the scalar grad space")
    if grad_space.kind.bc != "essential":
        raise ValueError("scalar Laplacian requires essential bc; "
                         "the natural-bc operator is singular (constants)")
    if quads is None:
        quads = make_quadratures(grad_space)
    return _scalar_h1_block(grad_space.components[0], quads, include_mass=False)


def curl_stiffness_matrix(curl_space: TensorSpace, div_space: TensorSpace,
                          quads: tuple[QuadratureRule, ...] | None = None) -> sp.csr_matrix:
    """Q_curl = C^T M_div C (3-D): the curl-curl stiffness whose
    diagonal drives the extra div-problem smoother."""
    if curl_space.dim != 3:
        raise ValueError("Q_curl exists only in 3-D")
    C = derham.curl_matrix(curl_space, div_space)
    M_div = mass_matrix(div_space, quads)
    return drop_small(C.T @ M_div @ C)


def assemble_rhs(space: TensorSpace, f: FieldFunc,
                 quads: tuple[QuadratureRule, ...] | None = None) -> np.ndarray:
    """Load vector b_r = ∫ f · v_r by tensor Gauss quadrature.

    ``f`` is a sequence of callables, one per component, each taking d
    coordinate arrays (broadcastable) and returning values.
    """
    if callable(f):
        f = [f]
    if len(f) != space.n_components:
        raise ValueError("need one right-hand side callable per component")
    if quads is None:
        quads = make_quadratures(space)
    out = []
    for comp, fc in zip(space.components, f):
        axes_pts = [q.flat_nodes for q in quads]
        axes_wts = [q.flat_weights for q in quads]
        grids = np.meshgrid(*axes_pts, indexing="ij")
        F = np.asarray(fc(*grids), dtype=float)
        # apply quadrature weights one axis at a time
        for ax, w in enumerate(axes_wts):
            shape = [1] * F.ndim
            shape[ax] = -1
            F = F * w.reshape(shape)
        # contract each axis with the basis values of that factor
        for ax, (fac, q) in enumerate(zip(comp, quads)):
            V = basis_values(fac, q.flat_nodes)      # (npts, dim)
            F = np.tensordot(V.T, F, axes=([1], [0]))
            # tensordot moved the contracted axis to the front; rotate it back
            F = np.moveaxis(F, 0, len(comp) - 1)
        out.append(F.ravel(order="C"))
    return np.concatenate(out)


def export_matrix_market(system: AssembledSystem, directory) -> list[str]:
    """Write A, M_D, M_range, D_mat (and b if present) plus a JSON
    manifest into ``directory``; returns the written file names."""
    import json
    from pathlib import Path

    import scipy.io as sio

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    mats = {"A": system.A, "M_D": system.M_D,
            "M_range": system.M_range, "D_mat": system.D_mat}
    for name, mat in mats.items():
        path = directory / f"{name}.mtx"
        sio.mmwrite(path, sp.coo_matrix(mat))
        written.append(path.name)
    if system.b is not None:
        path = directory / "b.mtx"
        sio.mmwrite(path, system.b.reshape(-1, 1))
        written.append(path.name)
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps(system_manifest(system), indent=2,
                                   sort_keys=True) + "\n")
    written.append(manifest.name)
    return written


def system_manifest(system: AssembledSystem) -> dict:
    """JSON-ready manifest: problem spec, dims, nnz, and checksums."""
    def checksum(mat: sp.csr_matrix) -> str:
        h = hashlib.sha256()
        h.update(mat.indptr.tobytes())
        h.update(mat.indices.tobytes())
        h.update(np.round(mat.data, 12).tobytes())
        return h.hexdigest()[:16]

    return {
        "problem": {
            "operator": system.spec.operator,
            "dim": system.spec.dim,
            "p": [int(v) for v in np.atleast_1d(system.spec.p)],
            "n_elems": [int(v) for v in np.atleast_1d(system.spec.n_elems)],
            "tau": system.spec.tau,
            "bc": system.spec.bc,
        },
        "space": derham.space_descriptor(system.space),
        "range_space": derham.space_descriptor(system.range_space),
        "nnz": {"A": int(system.A.nnz), "M_D": int(system.M_D.nnz),
                "M_range": int(system.M_range.nnz), "D_mat": int(system.D_mat.nnz)},
        "checksums": {"A": checksum(system.A), "M_D": checksum(system.M_D),
                      "D_mat": checksum(system.D_mat)},
    }
