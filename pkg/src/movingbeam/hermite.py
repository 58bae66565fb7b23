"""Cubic Hermite shape functions on the reference cell.

1D: four cubics on [0, 1] carrying (value, derivative) at each end; the
derivative shapes are scaled by the cell size so the degrees of freedom are
the physical nodal derivatives.  2D: the 16 tensor products on [0, 1]^2
(Bogner-Fox-Schmit square) carrying (value, d/dx, d/dy, d2/dxdy) per corner.

Local DOF order
  1D: [v(0), v'(0), v(L), v'(L)]
  2D: corners in order (0,0), (1,0), (0,1), (1,1); per corner
      [v, vx, vy, vxy]  ->  16 local DOFs.
"""
from __future__ import annotations

import numpy as np

__all__ = ["shape_eval_1d", "shape_eval_2d", "shape_eval"]

# reference cubics on s in [0,1] and their derivatives in s
_H = (
    lambda s: 2 * s**3 - 3 * s**2 + 1,   # value at 0
    lambda s: s**3 - 2 * s**2 + s,       # slope at 0
    lambda s: -2 * s**3 + 3 * s**2,      # value at 1
    lambda s: s**3 - s**2,               # slope at 1
)
_dH = (
    lambda s: 6 * s**2 - 6 * s,
    lambda s: 3 * s**2 - 4 * s + 1,
    lambda s: -6 * s**2 + 6 * s,
    lambda s: 3 * s**2 - 2 * s,
)
_ddH = (
    lambda s: 12 * s - 6,
    lambda s: 6 * s - 4,
    lambda s: -12 * s + 6,
    lambda s: 6 * s - 2,
)

# per local 1D DOF: (reference cubic index, derivative-DOF flag)
_DOF_1D = ((0, 0), (1, 1), (2, 0), (3, 1))


def _check_local(coords: np.ndarray) -> None:
    if np.any(coords < -1e-12) or np.any(coords > 1 + 1e-12):
        raise ValueError(f"local coordinate outside the reference cell: {coords}")


def shape_eval_1d(s, h: float):
    """Evaluate the four 1D shapes at local coords s in [0,1] on a cell of size h.

    Returns (N, dN, ddN) with shape (len(s), 4); derivatives are with respect
    to the physical coordinate.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    _check_local(s)
    N = np.empty((s.size, 4))
    dN = np.empty((s.size, 4))
    ddN = np.empty((s.size, 4))
    for a, (idx, isder) in enumerate(_DOF_1D):
        scale = h if isder else 1.0
        N[:, a] = scale * _H[idx](s)
        dN[:, a] = scale * _dH[idx](s) / h
        ddN[:, a] = scale * _ddH[idx](s) / h**2
    return N, dN, ddN


def shape_eval_2d(sx, sy, hx: float, hy: float):
    """Evaluate the 16 BFS shapes at local coords (sx, sy) on an hx x hy cell.

    Returns a dict with value ``N`` and physical derivatives ``dx, dy, dxx,
    dyy, dxy``, each of shape (npts, 16).  Corner order (0,0),(1,0),(0,1),(1,1)
    with per-corner DOFs [v, vx, vy, vxy].
    """
    sx = np.atleast_1d(np.asarray(sx, dtype=float))
    sy = np.atleast_1d(np.asarray(sy, dtype=float))
    _check_local(sx)
    _check_local(sy)
    if sx.shape != sy.shape:
        raise ValueError("sx and sy must have matching shapes")

    Nx, dNx, ddNx = shape_eval_1d(sx, hx)
    Ny, dNy, ddNy = shape_eval_1d(sy, hy)

    npts = sx.size
    out = {k: np.empty((npts, 16)) for k in ("N", "dx", "dy", "dxx", "dyy", "dxy")}
    # 1D local index for (corner coordinate c, derivative flag d): 2*c + d
    a = 0
    for cy in (0, 1):
        for cx in (0, 1):
            for dy_ in (0, 1):
                for dx_ in (0, 1):
                    ix = 2 * cx + dx_
                    iy = 2 * cy + dy_
                    out["N"][:, a] = Nx[:, ix] * Ny[:, iy]
                    out["dx"][:, a] = dNx[:, ix] * Ny[:, iy]
                    out["dy"][:, a] = Nx[:, ix] * dNy[:, iy]
                    out["dxx"][:, a] = ddNx[:, ix] * Ny[:, iy]
                    out["dyy"][:, a] = Nx[:, ix] * ddNy[:, iy]
                    out["dxy"][:, a] = dNx[:, ix] * dNy[:, iy]
                    a += 1
    return out


def shape_eval(dim: int, local_coord, cell_size):
    """Dimension-dispatching wrapper used by tests and the assembler."""
    if dim == 1:
        (h,) = np.atleast_1d(cell_size)
        pts = np.atleast_1d(np.asarray(local_coord, dtype=float))
        return shape_eval_1d(pts, float(h))
    if dim == 2:
        hx, hy = np.atleast_1d(cell_size)
        pts = np.atleast_2d(np.asarray(local_coord, dtype=float))
        return shape_eval_2d(pts[:, 0], pts[:, 1], float(hx), float(hy))
    raise ValueError(f"dim must be 1 or 2, got {dim}")
