"""Verification harness: error norms, convergence studies, theta sweeps.

Everything here measures the solver against manufactured exact solutions:
per-step spatial L2 and Laplacian-seminorm errors, their maxima over the
run, tables of errors under mesh/step refinement with observed log2 rates,
and the stability sweep over the scheme parameter theta where divergence is
recorded as data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fem import (
    AssembledOperators,
    HermiteSpace,
    Mesh,
    _elem_integrals,
    assemble_constant,
    interpolate_initial,
)
from .geometry import BeamParameters, MovingBoundary, eval_boundary
from .manufactured import ManufacturedCase, make_source
from .newmark import BeamSystem, NewmarkConfig, Trajectory, advance

__all__ = [
    "SimulationResult",
    "ErrorReport",
    "ConvergenceRow",
    "ConvergenceTable",
    "ThetaSweepResult",
    "simulate",
    "error_norms",
    "convergence_study",
    "theta_sweep",
    "weak_strong_consistency",
    "cells_for_h",
    "exact_nodal_trajectory",
]


def cells_for_h(box: Sequence[tuple[float, float]], h: float) -> int:
    """Cells per axis for a target cell size h; h must divide the box evenly."""
    length = box[0][1] - box[0][0]
    n = length / h
    if abs(n - round(n)) > 1e-9 or round(n) < 1:
        raise ValueError(f"cell size {h} does not tile a box of length {length}")
    return int(round(n))


@dataclass
class SimulationResult:
    space: HermiteSpace
    ops: AssembledOperators
    system: BeamSystem
    trajectory: Trajectory
    config: NewmarkConfig


def simulate(
    case: ManufacturedCase | None,
    boundary: MovingBoundary,
    params: BeamParameters,
    cells: int,
    cfg: NewmarkConfig,
    dim: int | None = None,
    box=None,
    homogeneous: bool = False,
    initial_displacement: Callable | None = None,
    initial_velocity: Callable | None = None,
    quad_operators: int = 5,
    quad_load: int = 6,
    collect_trace: bool = False,
) -> SimulationResult:
    """Assemble and march one run.

    With a manufactured ``case`` the source and initial data come from it
    (``homogeneous=True`` keeps the case's initial data but drops the
    source).  Otherwise initial data callbacks must be supplied.
    """
    if case is not None:
        dim = case.dim
        box = box or case.box
    if dim is None:
        raise ValueError("dim is required when no manufactured case is given")
    mesh = Mesh.uniform(dim, cells, box)
    space = HermiteSpace(mesh)
    ops = assemble_constant(space, nq=quad_operators)

    source = None
    if case is not None and not homogeneous:
        source = make_source(case, boundary, params)
    system = BeamSystem(
        space, ops, boundary, params, source,
        quad_operators=quad_operators, quad_load=quad_load,
    )

    if initial_displacement is None:
        if case is None:
            raise ValueError("initial data callbacks are required without a case")
        initial_displacement = case.initial_displacement()
        initial_velocity = case.initial_velocity()
    d0 = interpolate_initial(space, initial_displacement)
    d1 = interpolate_initial(space, initial_velocity)

    traj = advance(system, cfg, d0, d1, collect_trace=collect_trace)
    return SimulationResult(space, ops, system, traj, cfg)


@dataclass
class ErrorReport:
    """Max-over-time spatial errors plus the per-step series."""

    linf_l2: float
    linf_h2: float
    times: np.ndarray
    l2_series: np.ndarray
    h2_series: np.ndarray
    diverged: bool = False


def error_norms(
    space: HermiteSpace,
    trajectory: Trajectory,
    case: ManufacturedCase,
    nq: int = 8,
) -> ErrorReport:
    """Per-step L2 and Laplacian-seminorm errors against the exact solution."""
    if not trajectory.completed:
        return ErrorReport(
            linf_l2=math.nan, linf_h2=math.nan,
            times=trajectory.times, l2_series=np.array([]), h2_series=np.array([]),
            diverged=True,
        )
    tab = space.basis_tables(nq)
    pts = tab["points"].reshape(-1, space.mesh.dim)
    w = tab["w"]
    l2 = np.empty(len(trajectory.d))
    h2 = np.empty(len(trajectory.d))
    for eta, d in enumerate(trajectory.d):
        t = float(trajectory.times[eta])
        vh = space.eval_at_quad(d, nq, "N")
        ve = case.eval(pts, t).reshape(vh.shape)
        l2[eta] = math.sqrt(float(np.sum(((vh - ve) ** 2) * w[None, :])))
        lh = space.eval_at_quad(d, nq, "lap")
        le = case.laplacian(pts, t).reshape(vh.shape)
        h2[eta] = math.sqrt(float(np.sum(((lh - le) ** 2) * w[None, :])))
    return ErrorReport(
        linf_l2=float(l2.max()),
        linf_h2=float(h2.max()),
        times=trajectory.times,
        l2_series=l2,
        h2_series=h2,
    )


def exact_nodal_trajectory(space: HermiteSpace, case: ManufacturedCase, times) -> Trajectory:
    """Trajectory whose DOFs are the exact nodal values (interpolation-error probe)."""
    ds = [
        interpolate_initial(space, lambda pts, mi, t=float(t): case.eval(pts, t, 0, tuple(mi)))
        for t in times
    ]
    return Trajectory(d=ds, times=np.asarray(times, dtype=float), newton_iterations=[])


@dataclass
class ConvergenceRow:
    level: int
    h: float
    dt: float
    error: float
    rate: float | None = None
    diverged: bool = False


@dataclass
class ConvergenceTable:
    mode: str
    rows: list[ConvergenceRow] = field(default_factory=list)

    def fill_rates(self) -> None:
        prev: ConvergenceRow | None = None
        for row in self.rows:
            if row.diverged:
                row.rate = None
                prev = None  # a gap breaks the per-halving chain
                continue
            if prev is not None and row.error > 0:
                row.rate = math.log2(prev.error / row.error)
            else:
                row.rate = None
            prev = row

    @property
    def rates(self) -> list[float | None]:
        return [r.rate for r in self.rows]

    @property
    def errors(self) -> list[float]:
        return [r.error for r in self.rows]


def convergence_study(
    case: ManufacturedCase,
    boundary: MovingBoundary,
    params: BeamParameters,
    mode: str,
    levels: int,
    theta: float = 0.25,
    T: float = 1.0,
    fixed_h: float = 2.0 ** -6,
    fixed_dt: float = 2.0 ** -7,
    box=None,
    quad_operators: int = 5,
    quad_load: int = 6,
    error_quad: int = 8,
) -> ConvergenceTable:
    """Run a refinement study and tabulate errors with observed rates.

    Modes: ``coupled_h_eq_2dt`` (h = 2 dt, dt = 2^-(i+1)), ``fix_h_vary_dt``
    and ``fix_dt_vary_h`` (h = 2^-i), for level index i = 1..levels.
    """
    if levels < 2:
        raise ValueError("need at least two levels for a convergence study")
    box = box or case.box
    table = ConvergenceTable(mode=mode)
    for i in range(1, levels + 1):
        if mode == "coupled_h_eq_2dt":
            dt = 2.0 ** -(i + 1)
            h = 2.0 * dt
        elif mode == "fix_h_vary_dt":
            dt = 2.0 ** -(i + 1)
            h = fixed_h
        elif mode == "fix_dt_vary_h":
            dt = fixed_dt
            h = 2.0 ** -i
        else:
            raise ValueError(f"unknown study mode {mode!r}")
        cells = cells_for_h(box, h)
        cfg = NewmarkConfig.for_horizon(T, dt, theta=theta)
        res = simulate(
            case, boundary, params, cells, cfg, box=box,
            quad_operators=quad_operators, quad_load=quad_load,
        )
        if not res.trajectory.completed:
            table.rows.append(ConvergenceRow(i, h, dt, math.nan, diverged=True))
            continue
        rep = error_norms(res.space, res.trajectory, case, nq=error_quad)
        table.rows.append(ConvergenceRow(i, h, dt, rep.linf_l2))
    table.fill_rates()
    return table


@dataclass
class ThetaSweepResult:
    h_values: list[float]
    theta_values: list[float]
    errors: dict[tuple[float, float], float | None] = field(default_factory=dict)

    def error(self, h: float, theta: float) -> float | None:
        return self.errors[(h, theta)]

    def diverged(self, h: float, theta: float) -> bool:
        return self.errors[(h, theta)] is None


def theta_sweep(
    case: ManufacturedCase,
    boundary: MovingBoundary,
    params: BeamParameters,
    h_values: Sequence[float],
    theta_values: Sequence[float],
    dt: float = 2.0 ** -7,
    T: float = 1.0,
    box=None,
    quad_operators: int = 5,
    quad_load: int = 6,
    error_quad: int = 8,
) -> ThetaSweepResult:
    """Error per (h, theta) cell at fixed dt; divergence recorded as None."""
    box = box or case.box
    out = ThetaSweepResult(h_values=list(h_values), theta_values=list(theta_values))
    for h in h_values:
        cells = cells_for_h(box, h)
        for theta in theta_values:
            cfg = NewmarkConfig.for_horizon(T, dt, theta=theta)
            res = simulate(
                case, boundary, params, cells, cfg, box=box,
                quad_operators=quad_operators, quad_load=quad_load,
            )
            if res.trajectory.completed:
                rep = error_norms(res.space, res.trajectory, case, nq=error_quad)
                out.errors[(h, theta)] = rep.linf_l2
            else:
                out.errors[(h, theta)] = None
    return out


def weak_strong_consistency(
    space: HermiteSpace,
    boundary: MovingBoundary,
    params: BeamParameters,
    t: float,
    v_derivs: Callable[[np.ndarray, tuple], np.ndarray],
    w_derivs: Callable[[np.ndarray, tuple], np.ndarray],
    nq: int = 12,
    quad_operators: int = 5,
) -> float:
    """|weak form on interpolants - quadrature of (strong operator of v) * w|.

    Exercises the spatial operator only: the Kirchhoff scalar is evaluated
    from the exact gradient on both sides so the residual isolates the
    assembly/by-parts bookkeeping.  Must shrink at least quadratically under
    mesh refinement when the assembled form and the strong operator agree.
    """
    dim = space.mesh.dim
    k, kp, kpp = eval_boundary(boundary, t)
    b2 = k**-4
    b1 = params.zeta1 * b2
    s2 = (kp / k) ** 2
    shift = 4.0 * dim + 8.0

    def unit(ax, order):
        mi = [0] * dim
        mi[ax] = order
        return tuple(mi)

    # exact Kirchhoff scalar from the exact gradient
    tab = space.basis_tables(nq)
    pts = tab["points"].reshape(-1, dim)
    w_q = np.tile(tab["w"], space.mesh.ncells)
    grad_sq = sum(v_derivs(pts, unit(i, 1)) ** 2 for i in range(dim))
    g_exact = b1 * float(np.sum(grad_sq * w_q))

    # full-space assembly: the trial function need not satisfy the clamped
    # conditions; the (clamped) test function kills the constrained rows
    atab = space.basis_tables(quad_operators)
    qpts = atab["points"]
    y = qpts.reshape(-1, dim)
    shape = qpts.shape[:2]
    ones = np.ones(shape)
    K1f = sum(
        space.scatter(
            _elem_integrals(space, quad_operators, ones,
                            atab["grad"][:, :, i], atab["grad"][:, :, i]),
            full_space=True,
        )
        for i in range(dim)
    )
    K2f = space.scatter(
        _elem_integrals(space, quad_operators, ones, atab["lap"], atab["lap"]),
        full_space=True,
    )
    L2f = b2 * K2f
    for i in range(dim):
        yi = y[:, i]
        a1 = ((params.zeta0 - 4.0 * (yi * kp) ** 2) / k**2).reshape(shape)
        a3 = ((2.0 * yi * kp * kp - yi * k * (params.nu * kp + kpp)) / k**2)
        a5 = (a3 + 2.0 * (kp / k) * (-2.0 * yi * (kp / k))).reshape(shape)
        gi = atab["grad"][:, :, i]
        L2f = L2f + space.scatter(
            _elem_integrals(space, quad_operators, a1, gi, gi), full_space=True
        )
        L2f = L2f + space.scatter(
            _elem_integrals(space, quad_operators, a5, gi, atab["N"]), full_space=True
        )
        for j in range(dim):
            a2 = (4.0 * yi * y[:, j] * s2).reshape(shape)
            gj = atab["grad"][:, :, j]
            L2f = L2f - space.scatter(
                _elem_integrals(space, quad_operators, a2, gi, gj), full_space=True
            )

    d_v = interpolate_initial(space, v_derivs, full_space=True)
    d_w = space.expand(interpolate_initial(space, w_derivs))
    weak = float(d_w @ (L2f @ d_v)) + g_exact * float(d_w @ (K1f @ d_v))

    # strong operator of v at the quadrature grid
    lap = sum(v_derivs(pts, unit(i, 2)) for i in range(dim))
    if dim == 1:
        bilap = v_derivs(pts, (4,))
    else:
        bilap = (
            v_derivs(pts, (4, 0))
            + 2.0 * v_derivs(pts, (2, 2))
            + v_derivs(pts, (0, 4))
        )
    strong = -g_exact * lap + b2 * bilap
    for i in range(dim):
        y = pts[:, i]
        a1 = (params.zeta0 - 4.0 * (y * kp) ** 2) / k**2
        a3 = (2.0 * y * kp * kp - y * k * (params.nu * kp + kpp)) / k**2
        strong -= a1 * v_derivs(pts, unit(i, 2))
        strong += (a3 + shift * y * s2) * v_derivs(pts, unit(i, 1))
        for j in range(dim):
            mi = list(unit(i, 1))
            mi[j] += 1
            strong += 4.0 * y * pts[:, j] * s2 * v_derivs(pts, tuple(mi))
    w_vals = w_derivs(pts, (0,) * dim)
    strong_val = float(np.sum(strong * w_vals * w_q))
    return abs(weak - strong_val)
