"""Tensor-product discrete de Rham spaces and their exact difference
matrices.

A :class:`TensorSpace` is one scalar or vector spline space in the
grad -> curl -> div -> L2 chain (2-D: grad -> curl -> L2 and the
rotated grad -> div -> L2 variant).  Per component and direction each
factor is either the degree-p B-spline space ('B') or the reduced
degree-(p-1) Curry-Schoenberg space ('D'):

    3-D:  grad (B,B,B); curl (D,B,B),(B,D,B),(B,B,D);
          div (B,D,D),(D,B,D),(D,D,B); L2 (D,D,D)
    2-D:  grad (B,B); curl (D,B),(B,D); div (B,D),(D,B); L2 (D,D)

'vector' is the auxiliary space: d copies of the scalar grad space.
Essential boundary conditions constrain B factors only (first/last
B-spline dropped per constrained direction).

The grad/curl/div matrices between neighbouring spaces are exact
integer Kronecker products of bidiagonal difference factors; their
compositions vanish with exactly zero stored entries.

DOF numbering is component-major, then lexicographic with the *last*
coordinate index fastest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .splines1d import KnotVector, Space1D, difference_matrix_1d, make_uniform_open_knots

__all__ = [
    "SpaceKind",
    "TensorSpace",
    "build_space",
    "gradient_matrix",
    "curl_matrix",
    "divergence_matrix",
    "scalar_curl_matrix",
    "vector_curl_matrix",
    "differential_matrix",
    "flat_index",
    "unflatten_index",
    "space_descriptor",
]

_FACTOR_TABLE = {
    ("grad", 2): [("B", "B")],
    ("curl", 2): [("D", "B"), ("B", "D")],
    ("div", 2): [("B", "D"), ("D", "B")],
    ("l2", 2): [("D", "D")],
    ("vector", 2): [("B", "B"), ("B", "B")],
    ("grad", 3): [("B", "B", "B")],
    ("curl", 3): [("D", "B", "B"), ("B", "D", "B"), ("B", "B", "D")],
    ("div", 3): [("B", "D", "D"), ("D", "B", "D"), ("D", "D", "B")],
    ("l2", 3): [("D", "D", "D")],
    ("vector", 3): [("B", "B", "B")] * 3,
}


@dataclass(frozen=True)
class SpaceKind:
    """Which de Rham space: kind of field, spatial dimension, bc flavour."""

    kind: str
    dim: int
    bc: str = "natural"

    def __post_init__(self) -> None:
        if self.kind not in ("grad", "curl", "div", "l2", "vector"):
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.dim not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if self.bc not in ("natural", "essential"):
            raise ValueError("bc must be 'natural' or 'essential'")


@dataclass(frozen=True)
class TensorSpace:
    """One tensor-product de Rham space with fixed DOF numbering."""

    kind: SpaceKind
    knots: tuple[KnotVector, ...]
    components: tuple[tuple[Space1D, ...], ...]

    @property
    def dim(self) -> int:
        return self.kind.dim

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def component_shapes(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(f.dim for f in comp) for comp in self.components)

    @property
    def component_dims(self) -> tuple[int, ...]:
        return tuple(int(np.prod(s)) for s in self.component_shapes)

    @property
    def total_dim(self) -> int:
        return sum(self.component_dims)

    def component_offset(self, c: int) -> int:
        return sum(self.component_dims[:c])


def build_space(kind: str, p, n_elems, *, dim: int | None = None,
                bc: str = "natural") -> TensorSpace:
    """Build a tensor-product space from per-direction degrees and
    element counts (scalars broadcast)."""
    p = tuple(int(v) for v in np.atleast_1d(p))
    n_elems = tuple(int(v) for v in np.atleast_1d(n_elems))
    d = dim if dim is not None else max(len(p), len(n_elems))
    if len(p) == 1:
        p = p * d
    if len(n_elems) == 1:
        n_elems = n_elems * d
    if len(p) != d or len(n_elems) != d:
        raise ValueError("degrees/elements do not match the dimension")
    sk = SpaceKind(kind, d, bc)
    knots = tuple(make_uniform_open_knots(n, q) for n, q in zip(n_elems, p))
    comps = []
    for letters in _FACTOR_TABLE[(kind, d)]:
        factors = []
        for direction, letter in enumerate(letters):
            if letter == "D":
                factors.append(Space1D(knots[direction], kind="D"))
            else:
                fbc = "zero" if bc == "essential" else "free"
                factors.append(Space1D(knots[direction], kind="B", bc=fbc))
        comps.append(tuple(factors))
    return TensorSpace(sk, knots, tuple(comps))


def _check_compatible(src: TensorSpace, dst: TensorSpace) -> None:
    if src.knots != dst.knots or src.kind.bc != dst.kind.bc or src.dim != dst.dim:
        raise ValueError("spaces must share knots, bc, and dimension")


def _factor_block(src_factor: Space1D, dst_factor: Space1D) -> sp.csr_matrix:
    """Identity (B->B or D->D) or the bc-restricted difference matrix
    (B->D) between matching 1-D factors."""
    if src_factor.kind == dst_factor.kind:
        if src_factor.dim != dst_factor.dim:
            raise ValueError("identity factor dimension mismatch")
        return sp.identity(src_factor.dim, format="csr")
    if (src_factor.kind, dst_factor.kind) != ("B", "D"):
        raise ValueError("differential factors only map B to D")
    diff = difference_matrix_1d(src_factor.knot.n)
    return sp.csr_matrix(diff[:, src_factor.indices()])


def _kron_chain(mats) -> sp.csr_matrix:
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return sp.csr_matrix(out)


def _assemble_blocks(src: TensorSpace, dst: TensorSpace, pattern) -> sp.csr_matrix:
    """Assemble a block matrix from ``pattern[dst_comp][src_comp]``
    entries of the form ``(sign, derivative_direction)`` or ``None``."""
    _check_compatible(src, dst)
    rows = []
    for ci, dst_comp in enumerate(dst.components):
        row = []
        for cj, src_comp in enumerate(src.components):
            entry = pattern[ci][cj]
            if entry is None:
                row.append(sp.csr_matrix((int(np.prod([f.dim for f in dst_comp])),
                                          int(np.prod([f.dim for f in src_comp])))))
                continue
            sign, _ = entry
            factors = [_factor_block(sf, df) for sf, df in zip(src_comp, dst_comp)]
            row.append(sign * _kron_chain(factors))
        rows.append(row)
    out = sp.csr_matrix(sp.bmat(rows, format="csr"))
    out.sort_indices()
    return out


def gradient_matrix(grad_space: TensorSpace, curl_space: TensorSpace) -> sp.csr_matrix:
    """Exact gradient matrix G: V(grad) -> V(curl), stacked blocks of
    bc-restricted difference factors."""
    if grad_space.kind.kind != "grad" or curl_space.kind.kind != "curl":
        raise ValueError("gradient maps the grad space into the curl space")
    d = grad_space.dim
    pattern = [[(1, k)] for k in range(d)]
    return _assemble_blocks(grad_space, curl_space, pattern)


def curl_matrix(curl_space: TensorSpace, div_space: TensorSpace) -> sp.csr_matrix:
    """Exact 3-D curl matrix C: V(curl) -> V(div), realizing
    (d2 u3 - d3 u2, d3 u1 - d1 u3, d1 u2 - d2 u1)."""
    if curl_space.dim != 3:
        raise ValueError("the vector curl matrix exists only in 3-D")
    if curl_space.kind.kind != "curl" or div_space.kind.kind != "div":
        raise ValueError("curl maps the curl space into the div space")
    pattern = [
        [None, (-1, 2), (1, 1)],
        [(1, 2), None, (-1, 0)],
        [(-1, 1), (1, 0), None],
    ]
    return _assemble_blocks(curl_space, div_space, pattern)


def divergence_matrix(div_space: TensorSpace, l2_space: TensorSpace) -> sp.csr_matrix:
    """Exact divergence matrix D: V(div) -> V(L2)."""
    if div_space.kind.kind != "div" or l2_space.kind.kind != "l2":
        raise ValueError("divergence maps the div space into the L2 space")
    d = div_space.dim
    pattern = [[(1, k) for k in range(d)]]
    return _assemble_blocks(div_space, l2_space, pattern)


def scalar_curl_matrix(curl_space: TensorSpace, l2_space: TensorSpace) -> sp.csr_matrix:
    """2-D scalar curl matrix: curl u = d u1/d x2 - d u2/d x1,
    V(curl) -> V(L2)."""
    if curl_space.dim != 2:
        raise ValueError("the scalar curl exists only in 2-D")
    if curl_space.kind.kind != "curl" or l2_space.kind.kind != "l2":
        raise ValueError("scalar curl maps the curl space into the L2 space")
    pattern = [[(1, 1), (-1, 0)]]
    return _assemble_blocks(curl_space, l2_space, pattern)


def vector_curl_matrix(grad_space: TensorSpace, div_space: TensorSpace) -> sp.csr_matrix:
    """2-D vector curl (rotated gradient) R: V(grad) -> V(div),
    curl u = (d u/d x2, -d u/d x1)."""
    if grad_space.dim != 2:
        raise ValueError("the vector curl exists only in 2-D")
    if grad_space.kind.kind != "grad" or div_space.kind.kind != "div":
        raise ValueError("vector curl maps the grad space into the div space")
    pattern = [[(1, 1)], [(-1, 0)]]
    return _assemble_blocks(grad_space, div_space, pattern)


def differential_matrix(src: TensorSpace, dst: TensorSpace) -> sp.csr_matrix:
    """The de Rham differential between two neighbouring spaces,
    dispatched on their kinds."""
    key = (src.kind.kind, dst.kind.kind, src.dim)
    if key == ("grad", "curl", 2) or key == ("grad", "curl", 3):
        return gradient_matrix(src, dst)
    if key == ("curl", "div", 3):
        return curl_matrix(src, dst)
    if key == ("div", "l2", 2) or key == ("div", "l2", 3):
        return divergence_matrix(src, dst)
    if key == ("curl", "l2", 2):
        return scalar_curl_matrix(src, dst)
    if key == ("grad", "div", 2):
        return vector_curl_matrix(src, dst)
    raise ValueError(f"no differential between {src.kind} and {dst.kind}")


def flat_index(space: TensorSpace, component: int, multi: tuple[int, ...]) -> int:
    """Flat DOF index of ``(component, multi-index)``; last coordinate
    index runs fastest."""
    shape = space.component_shapes[component]
    if len(multi) != len(shape):
        raise ValueError("multi-index arity mismatch")
    if any(not 0 <= m < s for m, s in zip(multi, shape)):
        raise IndexError("multi-index out of range")
    return space.component_offset(component) + int(np.ravel_multi_index(multi, shape))

def unflatten_index(space: TensorSpace, flat: int) -> tuple[int, tuple[int, ...]]:
    """Inverse of :func:`flat_index`."""
    if not 0 <= flat < space.total_dim:
        raise IndexError("flat index out of range")
    for c, cdim in enumerate(space.component_dims):
        off = space.component_offset(c)
        if flat < off + cdim:
            multi = np.unravel_index(flat - off, space.component_shapes[c])
            return c, tuple(int(m) for m in multi)
    raise AssertionError("unreachable")


def space_descriptor(space: TensorSpace) -> dict:
    """JSON-ready description of a space for experiment manifests."""
    return {
        "kind": space.kind.kind,
        "dim": space.kind.dim,
        "bc": space.kind.bc,
        "degrees": [kv.degree for kv in space.knots],
        "elements": [len(kv.breakpoints) - 1 for kv in space.knots],
        "component_dims": list(space.component_dims),
        "total_dim": space.total_dim,
    }


def space_descriptor_json(space: TensorSpace) -> str:
    return json.dumps(space_descriptor(space), indent=2, sort_keys=True)
