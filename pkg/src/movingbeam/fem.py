"""Uniform-box C1 Hermite finite elements: mesh, space, quadrature, assembly.

The mesh is a uniform product grid on an axis-aligned box.  Degrees of
freedom are nodal values plus nodal derivatives (2 per node in 1D, 4 per
node in 2D), which makes the space C1 across cell interfaces.  Clamped
boundary conditions (value and all derivative DOFs zero on boundary nodes)
are imposed by elimination, so all assembled operators live on the free
DOFs only.

Assembly is vectorized over cells but accumulates in fixed cell order, so
two assemblies of the same inputs are bitwise identical.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .geometry import (
    BeamParameters,
    MovingBoundary,
    SingularMappingError,
    eval_boundary,
)
from .hermite import shape_eval_1d, shape_eval_2d

__all__ = [
    "Mesh",
    "HermiteSpace",
    "AssembledOperators",
    "TimeDependentOperators",
    "gauss_rule",
    "assemble_constant",
    "assemble_time_dependent",
    "assemble_load",
    "interpolate_initial",
    "project_initial",
]

DEFAULT_OPERATOR_QUAD = 5   # exact through degree 9 per axis
DEFAULT_LOAD_QUAD = 6


@dataclass(frozen=True)
class Mesh:
    """Uniform product mesh with ``cells_per_axis`` cells on each axis."""

    dim: int
    box: tuple[tuple[float, float], ...]
    cells_per_axis: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.box) != self.dim or len(self.cells_per_axis) != self.dim:
            raise ValueError("box and cells_per_axis must match dim")
        for (lo, hi), n in zip(self.box, self.cells_per_axis):
            if not hi > lo:
                raise ValueError(f"degenerate box interval ({lo}, {hi})")
            if n < 1:
                raise ValueError(f"cells_per_axis must be >= 1, got {n}")

    @staticmethod
    def uniform(dim: int, cells: int, box=None) -> "Mesh":
        if box is None:
            box = ((-1.0, 1.0),) * dim
        return Mesh(dim, tuple(tuple(b) for b in box), (cells,) * dim)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple((hi - lo) / n for (lo, hi), n in zip(self.box, self.cells_per_axis))

    @property
    def nodes_per_axis(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.cells_per_axis)

    @property
    def ncells(self) -> int:
        return int(np.prod(self.cells_per_axis))

    @property
    def nnodes(self) -> int:
        return int(np.prod(self.nodes_per_axis))

    def node_coords(self) -> np.ndarray:
        """Node coordinates, shape (nnodes, dim), x fastest."""
        axes = [np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(self.box, self.cells_per_axis)]
        if self.dim == 1:
            return axes[0][:, None]
        X, Y = np.meshgrid(axes[0], axes[1], indexing="xy")
        return np.column_stack([X.ravel(), Y.ravel()])


def gauss_rule(dim: int, npts: int):
    """Tensor Gauss-Legendre rule on [0,1]^dim: (points (nq, dim), weights (nq,))."""
    if npts < 1:
        raise ValueError("need at least one point per axis")
    x, w = np.polynomial.legendre.leggauss(npts)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    if dim == 1:
        return x[:, None], w
    if dim == 2:
        X, Y = np.meshgrid(x, x, indexing="xy")
        W = np.outer(w, w)  # W[j, i] = w_y[j] * w_x[i] to match 'xy' meshgrid
        return np.column_stack([X.ravel(), Y.ravel()]), W.ravel()
    raise ValueError(f"dim must be 1 or 2, got {dim}")


class HermiteSpace:
    """C1 Hermite space on a uniform mesh with clamped-boundary elimination.

    DOF layout: node-major; per node ``[v, v']`` in 1D and
    ``[v, vx, vy, vxy]`` in 2D.  ``full_to_free`` maps full DOF index to free
    index (-1 when constrained).
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.dofs_per_node = 2 if mesh.dim == 1 else 4
        self.ndof_full = mesh.nnodes * self.dofs_per_node

        constrained = np.zeros(self.ndof_full, dtype=bool)
        if mesh.dim == 1:
            nn = mesh.nodes_per_axis[0]
            for node in (0, nn - 1):
                constrained[2 * node: 2 * node + 2] = True
        else:
            nx, ny = mesh.nodes_per_axis
            ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
            boundary = (ii == 0) | (ii == nx - 1) | (jj == 0) | (jj == ny - 1)
            nodes = np.flatnonzero(boundary.ravel())
            for d in range(4):
                constrained[4 * nodes + d] = True

        self.full_to_free = np.full(self.ndof_full, -1, dtype=np.int64)
        self.free_dofs = np.flatnonzero(~constrained)
        self.full_to_free[self.free_dofs] = np.arange(self.free_dofs.size)
        self.ndof = self.free_dofs.size

        self.element_dofs = self._element_dof_matrix()
        self._basis_cache: dict[int, dict] = {}

    # -- connectivity -------------------------------------------------------

    def _element_dof_matrix(self) -> np.ndarray:
        m = self.mesh
        if m.dim == 1:
            nc = m.cells_per_axis[0]
            e = np.arange(nc)[:, None]
            return 2 * e + np.array([0, 1, 2, 3])[None, :]
        ncx, ncy = m.cells_per_axis
        nx = m.nodes_per_axis[0]
        ex, ey = np.meshgrid(np.arange(ncx), np.arange(ncy), indexing="xy")
        ex = ex.ravel()[:, None]
        ey = ey.ravel()[:, None]
        corners = np.concatenate(
            [
                ey * nx + ex,            # (0,0)
                ey * nx + ex + 1,        # (1,0)
                (ey + 1) * nx + ex,      # (0,1)
                (ey + 1) * nx + ex + 1,  # (1,1)
            ],
            axis=1,
        )
        dofs = (4 * corners)[:, :, None] + np.arange(4)[None, None, :]
        return dofs.reshape(-1, 16)

    def cell_origins(self) -> np.ndarray:
        """Lower-left corner of each cell, shape (ncells, dim)."""
        m = self.mesh
        hs = m.h
        if m.dim == 1:
            return (m.box[0][0] + hs[0] * np.arange(m.cells_per_axis[0]))[:, None]
        ncx, ncy = m.cells_per_axis
        ex, ey = np.meshgrid(np.arange(ncx), np.arange(ncy), indexing="xy")
        return np.column_stack(
            [m.box[0][0] + hs[0] * ex.ravel(), m.box[1][0] + hs[1] * ey.ravel()]
        )

    # -- reference basis tables ---------------------------------------------

    def basis_tables(self, nq: int) -> dict:
        """Reference-cell quadrature and basis tables, cached per rule size.

        Keys: ``w`` (weights incl. cell jacobian), ``points`` (physical
        coordinates per cell, (ncells, nq, dim)), ``N``, ``grad`` (nq, nloc,
        dim), ``hess`` (nq, nloc, dim, dim), ``lap`` (nq, nloc).
        """
        if nq in self._basis_cache:
            return self._basis_cache[nq]
        m = self.mesh
        pts, w = gauss_rule(m.dim, nq)
        hs = m.h
        jac = float(np.prod(hs))
        if m.dim == 1:
            N, dN, ddN = shape_eval_1d(pts[:, 0], hs[0])
            grad = dN[:, :, None]
            hess = ddN[:, :, None, None]
            lap = ddN
        else:
            tab = shape_eval_2d(pts[:, 0], pts[:, 1], hs[0], hs[1])
            N = tab["N"]
            grad = np.stack([tab["dx"], tab["dy"]], axis=-1)
            hess = np.empty((N.shape[0], N.shape[1], 2, 2))
            hess[:, :, 0, 0] = tab["dxx"]
            hess[:, :, 1, 1] = tab["dyy"]
            hess[:, :, 0, 1] = tab["dxy"]
            hess[:, :, 1, 0] = tab["dxy"]
            lap = tab["dxx"] + tab["dyy"]
        origins = self.cell_origins()
        phys = origins[:, None, :] + pts[None, :, :] * np.asarray(hs)[None, None, :]
        out = {"w": w * jac, "points": phys, "N": N, "grad": grad, "hess": hess, "lap": lap}
        self._basis_cache[nq] = out
        return out

    # -- scatter -------------------------------------------------------------

    def scatter(self, elem_mats: np.ndarray, full_space: bool = False) -> sp.csr_matrix:
        """Accumulate per-cell matrices (ncells, nloc, nloc) into a CSR matrix.

        Row index is the test DOF, column the trial DOF.  By default both
        sides are restricted to the free DOFs; ``full_space`` keeps every
        DOF (used by consistency checks that test against smooth functions
        not satisfying the clamped conditions).
        """
        ed = self.element_dofs
        nloc = ed.shape[1]
        rows = np.repeat(ed, nloc, axis=1).ravel()
        cols = np.tile(ed, (1, nloc)).ravel()
        if full_space:
            return sp.coo_matrix(
                (elem_mats.ravel(), (rows, cols)),
                shape=(self.ndof_full, self.ndof_full),
            ).tocsr()
        fr = self.full_to_free[rows]
        fc = self.full_to_free[cols]
        keep = (fr >= 0) & (fc >= 0)
        mat = sp.coo_matrix(
            (elem_mats.ravel()[keep], (fr[keep], fc[keep])),
            shape=(self.ndof, self.ndof),
        )
        return mat.tocsr()

    def scatter_vector(self, elem_vecs: np.ndarray) -> np.ndarray:
        ed = self.element_dofs
        out = np.zeros(self.ndof)
        fr = self.full_to_free[ed.ravel()]
        keep = fr >= 0
        np.add.at(out, fr[keep], elem_vecs.ravel()[keep])
        return out

    def bandwidth(self) -> int:
        ed = self.full_to_free[self.element_dofs]
        bw = 0
        for row in ed:
            f = row[row >= 0]
            if f.size:
                bw = max(bw, int(f.max() - f.min()))
        return bw

    # -- evaluation of discrete functions ------------------------------------

    def expand(self, d_free: np.ndarray) -> np.ndarray:
        """Free-DOF vector -> full DOF vector with zeros on constrained DOFs."""
        full = np.zeros(self.ndof_full)
        full[self.free_dofs] = d_free
        return full

    def eval_at_quad(self, d_free: np.ndarray, nq: int, deriv: str = "N") -> np.ndarray:
        """Values of the discrete function at the quadrature grid, (ncells, nq).

        ``deriv``: "N", "lap", "grad0", "grad1".
        """
        tab = self.basis_tables(nq)
        de = self.expand(d_free)[self.element_dofs]
        if deriv == "N":
            basis = tab["N"]
        elif deriv == "lap":
            basis = tab["lap"]
        elif deriv.startswith("grad"):
            basis = tab["grad"][:, :, int(deriv[4:])]
        else:
            raise ValueError(f"unknown derivative selector {deriv!r}")
        return np.einsum("ca,qa->cq", de, basis)

    def eval_points(self, d_free: np.ndarray, points, deriv: str = "N") -> np.ndarray:
        """Evaluate the discrete function at arbitrary points in the box."""
        m = self.mesh
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        hs = m.h
        cell_idx = []
        local = []
        for ax in range(m.dim):
            lo = m.box[ax][0]
            i = np.clip(
                np.floor((pts[:, ax] - lo) / hs[ax]).astype(int),
                0, m.cells_per_axis[ax] - 1,
            )
            cell_idx.append(i)
            local.append((pts[:, ax] - (lo + i * hs[ax])) / hs[ax])
        if m.dim == 1:
            cells = cell_idx[0]
            N, dN, ddN = shape_eval_1d(local[0], hs[0])
            table = {"N": N, "grad0": dN, "lap": ddN}[deriv]
        else:
            cells = cell_idx[1] * m.cells_per_axis[0] + cell_idx[0]
            tab = shape_eval_2d(local[0], local[1], hs[0], hs[1])
            table = {
                "N": tab["N"], "grad0": tab["dx"], "grad1": tab["dy"],
                "lap": tab["dxx"] + tab["dyy"],
            }[deriv]
        de = self.expand(d_free)[self.element_dofs[cells]]
        return np.einsum("pa,pa->p", de, table)


@dataclass
class AssembledOperators:
    """Constant matrices: mass A, gradient stiffness K1, bi-Laplacian K2."""

    A: sp.csr_matrix
    K1: sp.csr_matrix
    K2: sp.csr_matrix
    bandwidth: int


@dataclass
class TimeDependentOperators:
    """Coefficient-weighted matrices at one time level.

    Orientation: row = test DOF, column = trial DOF, i.e. ``(B3 @ d)[l] =
    (a4_i d_i v_h, phi_l)``; this is the transposed layout the three-level
    scheme applies to coefficient vectors.
    """

    B1: sp.csr_matrix
    B2: sp.csr_matrix
    B3: sp.csr_matrix
    B4: sp.csr_matrix
    t: float


def _elem_integrals(space: HermiteSpace, nq: int, coef, trial, test) -> np.ndarray:
    """Per-cell matrices sum_q w_q coef[c,q] trial[q,b] test[q,a] -> (c, a, b)."""
    tab = space.basis_tables(nq)
    cw = coef * tab["w"][None, :]
    return np.einsum("cq,qa,qb->cab", cw, test, trial, optimize=True)


def assemble_constant(space: HermiteSpace, nq: int = DEFAULT_OPERATOR_QUAD) -> AssembledOperators:
    """Assemble A, K1, K2 on the free DOFs."""
    tab = space.basis_tables(nq)
    ones = np.ones((space.mesh.ncells, tab["w"].size))
    A = space.scatter(_elem_integrals(space, nq, ones, tab["N"], tab["N"]))
    K1 = None
    for i in range(space.mesh.dim):
        gi = tab["grad"][:, :, i]
        term = space.scatter(_elem_integrals(space, nq, ones, gi, gi))
        K1 = term if K1 is None else K1 + term
    K2 = space.scatter(_elem_integrals(space, nq, ones, tab["lap"], tab["lap"]))
    return AssembledOperators(A=A, K1=K1.tocsr(), K2=K2, bandwidth=space.bandwidth())


def assemble_time_dependent(
    space: HermiteSpace,
    boundary: MovingBoundary,
    params: BeamParameters,
    t: float,
    nq: int = DEFAULT_OPERATOR_QUAD,
) -> TimeDependentOperators:
    """Assemble the coefficient-weighted matrices B1..B4 at time t."""
    tab = space.basis_tables(nq)
    pts = tab["points"]            # (ncells, nq, dim)
    dim = space.mesh.dim
    y = pts.reshape(-1, dim)
    # vectorized closed forms over the flattened quadrature grid
    k, kp, kpp = eval_boundary(boundary, t)
    if k <= 0.0:
        raise SingularMappingError(f"K(t) must be positive, got K({t}) = {k}")
    a1 = (params.zeta0 - 4.0 * (y * kp) ** 2) / k**2                   # (npts, dim)
    a3 = (2.0 * y * kp * kp - y * k * (params.nu * kp + kpp)) / k**2
    a4 = -2.0 * y * (kp / k)
    a5 = a3 + 2.0 * (kp / k) * a4

    shape = pts.shape[:2]
    B1 = B2 = B3 = B4 = None

    def acc(M, term):
        return term if M is None else M + term

    for i in range(dim):
        gi = tab["grad"][:, :, i]
        B1 = acc(B1, space.scatter(_elem_integrals(space, nq, a1[:, i].reshape(shape), gi, gi)))
        B3 = acc(B3, space.scatter(_elem_integrals(space, nq, a4[:, i].reshape(shape), gi, tab["N"])))
        B4 = acc(B4, space.scatter(_elem_integrals(space, nq, a5[:, i].reshape(shape), gi, tab["N"])))
        for j in range(dim):
            a2ij = 4.0 * y[:, i] * y[:, j] * (kp / k) ** 2
            gj = tab["grad"][:, :, j]
            B2 = acc(B2, space.scatter(_elem_integrals(space, nq, a2ij.reshape(shape), gi, gj)))
    return TimeDependentOperators(
        B1=B1.tocsr(), B2=B2.tocsr(), B3=B3.tocsr(), B4=B4.tocsr(), t=t
    )


def assemble_load(
    space: HermiteSpace,
    f: Callable[[np.ndarray, float], np.ndarray],
    t: float,
    nq: int = DEFAULT_LOAD_QUAD,
) -> np.ndarray:
    """Load vector F_l = (f(., t), phi_l) on the free DOFs.

    ``f(points, t)`` receives points of shape (npts, dim) and must return a
    flat array of values.
    """
    tab = space.basis_tables(nq)
    pts = tab["points"]
    vals = np.asarray(f(pts.reshape(-1, space.mesh.dim), t), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = pts.reshape(-1, space.mesh.dim)[~np.isfinite(vals)][0]
        raise ValueError(f"source evaluated to a non-finite value at y={bad}, t={t}")
    fw = vals.reshape(pts.shape[:2]) * tab["w"][None, :]
    elem = np.einsum("cq,qa->ca", fw, tab["N"], optimize=True)
    return space.scatter_vector(elem)


def _dof_multi_indices(dim: int):
    """Spatial derivative multi-index of each nodal DOF, in layout order."""
    if dim == 1:
        return [(0,), (1,)]
    return [(0, 0), (1, 0), (0, 1), (1, 1)]


def interpolate_initial(
    space: HermiteSpace,
    derivs: Callable[[np.ndarray, tuple], np.ndarray],
    full_space: bool = False,
) -> np.ndarray:
    """Nodal Hermite interpolant of a datum given its derivative evaluator.

    ``derivs(points, multi_index)`` returns the requested spatial derivative
    at the nodes.  Each free DOF takes the exact nodal value/derivative; this
    is the startup accuracy the error analysis assumes.  ``full_space``
    returns all DOFs including the ones the clamped space constrains.
    """
    nodes = space.mesh.node_coords()
    full = np.zeros(space.ndof_full)
    for d, mi in enumerate(_dof_multi_indices(space.mesh.dim)):
        full[d:: space.dofs_per_node] = derivs(nodes, mi)
    return full if full_space else full[space.free_dofs]


def project_initial(
    space: HermiteSpace,
    ops: AssembledOperators,
    value: Callable[[np.ndarray, float], np.ndarray],
    t: float = 0.0,
    nq: int = DEFAULT_LOAD_QUAD,
) -> np.ndarray:
    """L2 projection alternative to nodal interpolation: solve A d = (v, phi)."""
    from scipy.sparse.linalg import spsolve

    rhs = assemble_load(space, value, t, nq=nq)
    return spsolve(ops.A.tocsc(), rhs)
