"""Three-level Newmark-theta time stepping with Newton solves per step.

The semi-discrete system is

    A d'' + G(t, d) K1 d + L1(t) d' + L2(t) d = F(t),

with G(t, d) = b1(t) * d^T K1 d (squared gradient seminorm of the discrete
function), L1 = nu A + B3 and L2 = b2 K2 + B1 + B4 - B2.  Each implicit step
solves a nonlinear system whose Jacobian is a sparse matrix plus a low-rank
correction coming from the differential of G; the linear solves use a direct
factorization combined with the Woodbury identity, so results are
deterministic for a fixed configuration.

theta in ]1/4, 1] gives the unconditionally convergent family; theta < 1/4 is
conditionally stable and may legitimately diverge on fine meshes, which is
reported as data (``Trajectory.status``), not as a crash.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as dla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import (
    AssembledOperators,
    HermiteSpace,
    TimeDependentOperators,
    assemble_load,
    assemble_time_dependent,
)
from .geometry import BeamParameters, MovingBoundary, eval_boundary

__all__ = [
    "NewmarkConfig",
    "StepOperators",
    "StepProblem",
    "Trajectory",
    "NewtonNoConvergence",
    "SingularJacobian",
    "kirchhoff_scalar",
    "kirchhoff_gradient",
    "build_step_operators",
    "newton_solve",
    "advance",
    "BeamSystem",
]

_DENSE_LIMIT = 700  # below this many DOFs a dense factorization is cheaper


class NewtonNoConvergence(RuntimeError):
    """Newton hit the iteration cap without meeting either tolerance."""


class SingularJacobian(RuntimeError):
    """Direct factorization of the Newton matrix failed."""


@dataclass(frozen=True)
class NewmarkConfig:
    """Scheme parameters; tolerances are absolute, as used in practice."""

    theta: float = 0.25
    dt: float = 2.0 ** -7
    n_steps: int = 128
    newton_tol_step: float = 1e-14
    newton_tol_resid: float = 1e-14
    newton_max_iter: int = 50
    divergence_threshold: float = 1e8
    legacy_g_gradient: bool = False   # keep only diagonal K1 terms in dG/dX
    kirchhoff_mass_norm: bool = False  # experiment: G from |v_h|^2 instead of |grad v_h|^2

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def horizon(self) -> float:
        return self.dt * self.n_steps

    @staticmethod
    def for_horizon(T: float, dt: float, **kw) -> "NewmarkConfig":
        n = int(round(T / dt))
        if abs(n * dt - T) > 1e-12 * max(1.0, abs(T)):
            raise ValueError(f"dt = {dt} does not divide T = {T} evenly")
        return NewmarkConfig(dt=dt, n_steps=n, **kw)


@dataclass
class StepOperators:
    """The three matrices and averaged load of one step of the scheme."""

    M1: sp.csr_matrix
    M2: sp.csr_matrix
    M3: sp.csr_matrix
    F_avg: np.ndarray


@dataclass
class Trajectory:
    """Coefficient history d^0..d^N plus per-step Newton statistics."""

    d: list[np.ndarray]
    times: np.ndarray
    newton_iterations: list[int]
    status: str = "completed"          # "completed" | "diverged"
    diverged_step: int | None = None
    trace: list[tuple] = field(default_factory=list)  # (step, t, iters, resid, dinf)

    @property
    def completed(self) -> bool:
        return self.status == "completed"


def kirchhoff_scalar(b1_t: float, d: np.ndarray, K1: sp.spmatrix) -> float:
    """G(t, d) = b1(t) * d^T K1 d."""
    return float(b1_t * (d @ (K1 @ d)))


def kirchhoff_gradient(b1_t: float, d: np.ndarray, K1: sp.spmatrix,
                       legacy: bool = False) -> np.ndarray:
    """Exact differential 2 b1 K1 d; ``legacy`` keeps only the K1 diagonal."""
    if legacy:
        return 2.0 * b1_t * (K1.diagonal() * d)
    return 2.0 * b1_t * np.asarray(K1 @ d)


class _DirectSolver:
    """Deterministic direct solve with optional low-rank Woodbury update.

    Solves (S + U V^T) x = rhs where S is sparse (or densified when small)
    and U, V hold r columns.
    """

    def __init__(self, S: sp.spmatrix):
        n = S.shape[0]
        try:
            if n <= _DENSE_LIMIT:
                self._lu = dla.lu_factor(S.toarray())
                self._solve = lambda b: dla.lu_solve(self._lu, b)
            else:
                lu = spla.splu(S.tocsc())
                self._solve = lu.solve
        except (RuntimeError, ValueError) as exc:
            raise SingularJacobian(str(exc)) from exc

    def solve(self, rhs: np.ndarray, U: np.ndarray | None = None,
              V: np.ndarray | None = None) -> np.ndarray:
        x0 = self._solve(rhs)
        if U is None or U.shape[1] == 0:
            return x0
        Z = np.column_stack([self._solve(U[:, j]) for j in range(U.shape[1])])
        cap = np.eye(U.shape[1]) + V.T @ Z
        try:
            correction = Z @ np.linalg.solve(cap, V.T @ x0)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(f"singular Woodbury capacitance: {exc}") from exc
        return x0 - correction


class BeamSystem:
    """Assembled context for one run: constants, coefficient caches, loads."""

    def __init__(
        self,
        space: HermiteSpace,
        ops: AssembledOperators,
        boundary: MovingBoundary,
        params: BeamParameters,
        source: Callable[[np.ndarray, float], np.ndarray] | None = None,
        quad_operators: int = 5,
        quad_load: int = 6,
    ):
        self.space = space
        self.ops = ops
        self.boundary = boundary
        self.params = params
        self.source = source
        self.quad_operators = quad_operators
        self.quad_load = quad_load
        self._lmat_cache: dict[float, tuple[sp.csr_matrix, sp.csr_matrix]] = {}
        self._load_cache: dict[float, np.ndarray] = {}

    def b1(self, t: float) -> float:
        k, _, _ = eval_boundary(self.boundary, t)
        return self.params.zeta1 / k**4

    def b2(self, t: float) -> float:
        k, _, _ = eval_boundary(self.boundary, t)
        return 1.0 / k**4

    def l_matrices(self, t: float) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """L1(t) = nu A + B3(t);  L2(t) = b2(t) K2 + B1(t) + B4(t) - B2(t)."""
        key = round(t, 12)
        if key not in self._lmat_cache:
            bt: TimeDependentOperators = assemble_time_dependent(
                self.space, self.boundary, self.params, t, nq=self.quad_operators
            )
            L1 = (self.params.nu * self.ops.A + bt.B3).tocsr()
            L2 = (self.b2(t) * self.ops.K2 + bt.B1 + bt.B4 - bt.B2).tocsr()
            # the stepper touches three adjacent time levels; four slots make
            # each level assembled exactly once over the whole march
            while len(self._lmat_cache) >= 4:
                self._lmat_cache.pop(next(iter(self._lmat_cache)))
            self._lmat_cache[key] = (L1, L2)
        return self._lmat_cache[key]

    def load(self, t: float) -> np.ndarray:
        key = round(t, 12)
        if key not in self._load_cache:
            if self.source is None:
                val = np.zeros(self.space.ndof)
            else:
                val = assemble_load(self.space, self.source, t, nq=self.quad_load)
            while len(self._load_cache) >= 4:
                self._load_cache.pop(next(iter(self._load_cache)))
            self._load_cache[key] = val
        return self._load_cache[key]

    def g_norm_matrix(self, cfg: NewmarkConfig) -> sp.csr_matrix:
        """Matrix behind the Kirchhoff scalar: K1, or A in the experiment mode."""
        return self.ops.A if cfg.kirchhoff_mass_norm else self.ops.K1


def build_step_operators(
    system: BeamSystem, cfg: NewmarkConfig, eta: int
) -> StepOperators:
    """M1, M2, M3 and the theta-averaged load for step eta -> eta+1.

    M1  = A + (dt/2) L1^{eta+1} + theta dt^2 L2^{eta+1}
    M2  = dt^2 (1-2 theta)(G^eta K1 + L2^eta) - 2A        (G supplied later)
    M3  = A - (dt/2) L1^{eta-1} + theta dt^2 L2^{eta-1}
    F   = theta F^{eta-1} + (1-2 theta) F^eta + theta F^{eta+1}   (eta >= 1)
    F   = theta F^1 + (1-theta) F^0                               (eta = 0)

    For eta = 0 the level "eta-1" is evaluated at t_0 (ghost level).
    """
    dt, th = cfg.dt, cfg.theta
    t_n = eta * dt
    t_p = (eta + 1) * dt
    t_m = max((eta - 1) * dt, 0.0)

    A = system.ops.A
    L1p, L2p = system.l_matrices(t_p)
    L1m, L2m = system.l_matrices(t_m)
    _, L2n = system.l_matrices(t_n)

    M1 = (A + 0.5 * dt * L1p + th * dt * dt * L2p).tocsr()
    M2 = (dt * dt * (1.0 - 2.0 * th) * L2n - 2.0 * A).tocsr()
    M3 = (A - 0.5 * dt * L1m + th * dt * dt * L2m).tocsr()

    if eta == 0:
        F_avg = th * system.load(dt) + (1.0 - th) * system.load(0.0)
    else:
        F_avg = (
            th * system.load(t_m)
            + (1.0 - 2.0 * th) * system.load(t_n)
            + th * system.load(t_p)
        )
    return StepOperators(M1=M1, M2=M2, M3=M3, F_avg=F_avg)


class StepProblem:
    """Residual/Jacobian of one implicit step, in Woodbury-friendly form.

    Generic step (eta >= 1): find X = d^{eta+1} with

      R(X) = (M1 + theta dt^2 G^{eta+1}(X) K1) X + M2 d^eta
             + (M3 + theta dt^2 G^{eta-1} K1) d^{eta-1} - dt^2 F_avg

    Startup step (eta = 0): X = d^1 with the ghost level
    d^{-1} = X - 2 dt d1, which adds the G^{-1}(X) terms

      R(X) = (M1 + M3 + theta dt^2 (G^1(X) + G^{-1}(X)) K1) X
             - 2 theta dt^3 G^{-1}(X) K1 d1 + M2 d^0 - 2 dt M3 d1 - dt^2 F_avg
    """

    def __init__(self, system: BeamSystem, cfg: NewmarkConfig, eta: int,
                 step_ops: StepOperators, d_curr: np.ndarray,
                 d_prev: np.ndarray | None, d1: np.ndarray | None,
                 g_curr: float, g_prev: float = 0.0):
        self.cfg = cfg
        self.eta = eta
        self.K1g = system.g_norm_matrix(cfg)
        self.th_dt2 = cfg.theta * cfg.dt * cfg.dt
        dt = cfg.dt
        explicit_g = dt * dt * (1.0 - 2.0 * cfg.theta) * g_curr

        self.b1_next = system.b1((eta + 1) * dt)
        if eta == 0:
            self.b1_ghost = system.b1(0.0)  # b1^{-1} approximated by b1^0
            self.d1 = d1
            self.S_lin = (step_ops.M1 + step_ops.M3).tocsr()
            self.const = (
                step_ops.M2 @ d_curr
                + explicit_g * (self.K1g @ d_curr)
                - 2.0 * dt * (step_ops.M3 @ d1)
                - dt * dt * step_ops.F_avg
            )
        else:
            self.S_lin = step_ops.M1
            self.const = (
                step_ops.M2 @ d_curr
                + explicit_g * (self.K1g @ d_curr)
                + step_ops.M3 @ d_prev
                + self.th_dt2 * g_prev * (self.K1g @ d_prev)
                - dt * dt * step_ops.F_avg
            )

    # -- pieces ---------------------------------------------------------------

    def g_next(self, X: np.ndarray) -> float:
        return kirchhoff_scalar(self.b1_next, X, self.K1g)

    def g_ghost(self, X: np.ndarray) -> float:
        z = X - 2.0 * self.cfg.dt * self.d1
        return kirchhoff_scalar(self.b1_ghost, z, self.K1g)

    def residual(self, X: np.ndarray) -> np.ndarray:
        K1X = self.K1g @ X
        if self.eta == 0:
            g1 = self.g_next(X)
            gm = self.g_ghost(X)
            r = (
                self.S_lin @ X
                + self.th_dt2 * (g1 + gm) * K1X
                - 2.0 * self.cfg.dt * self.th_dt2 * gm * (self.K1g @ self.d1)
                + self.const
            )
        else:
            r = self.S_lin @ X + self.th_dt2 * self.g_next(X) * K1X + self.const
        return np.asarray(r)

    def jacobian_parts(self, X: np.ndarray):
        """(S sparse, U, V) with J = S + U V^T."""
        legacy = self.cfg.legacy_g_gradient
        K1X = np.asarray(self.K1g @ X)
        if self.eta == 0:
            g1 = self.g_next(X)
            gm = self.g_ghost(X)
            S = (self.S_lin + self.th_dt2 * (g1 + gm) * self.K1g).tocsr()
            z = X - 2.0 * self.cfg.dt * self.d1
            dg1 = kirchhoff_gradient(self.b1_next, X, self.K1g, legacy)
            dgm = kirchhoff_gradient(self.b1_ghost, z, self.K1g, legacy)
            K1d1 = np.asarray(self.K1g @ self.d1)
            U = np.column_stack([
                self.th_dt2 * K1X,
                self.th_dt2 * K1X,
                -2.0 * self.cfg.dt * self.th_dt2 * K1d1,
            ])
            V = np.column_stack([dg1, dgm, dgm])
        else:
            g1 = self.g_next(X)
            S = (self.S_lin + self.th_dt2 * g1 * self.K1g).tocsr()
            dg1 = kirchhoff_gradient(self.b1_next, X, self.K1g, legacy)
            U = (self.th_dt2 * K1X)[:, None]
            V = dg1[:, None]
        return S, U, V

    def jacobian_dense(self, X: np.ndarray) -> np.ndarray:
        S, U, V = self.jacobian_parts(X)
        return S.toarray() + U @ V.T


def newton_solve(problem: StepProblem, x0: np.ndarray, cfg: NewmarkConfig):
    """Newton iteration with direct solves; returns (X, iterations, residual)."""
    X = x0.copy()
    for it in range(1, cfg.newton_max_iter + 1):
        r = problem.residual(X)
        if not np.all(np.isfinite(r)):
            raise NewtonNoConvergence("non-finite residual")
        rn = float(np.max(np.abs(r)))
        if rn < cfg.newton_tol_resid:
            return X, it - 1, rn
        S, U, V = problem.jacobian_parts(X)
        step = _DirectSolver(S).solve(-r, U, V)
        X = X + step
        if not np.all(np.isfinite(X)):
            raise NewtonNoConvergence("non-finite Newton iterate")
        if float(np.max(np.abs(step))) < cfg.newton_tol_step:
            return X, it, float(np.max(np.abs(problem.residual(X))))
    raise NewtonNoConvergence(
        f"no convergence in {cfg.newton_max_iter} iterations"
    )


def advance(
    system: BeamSystem,
    cfg: NewmarkConfig,
    d0: np.ndarray,
    d1: np.ndarray,
    collect_trace: bool = False,
) -> Trajectory:
    """March the scheme over n_steps steps from the interpolated initial data.

    ``d0`` and ``d1`` are the initial displacement and velocity coefficient
    vectors.  Divergence (non-finite iterates, Newton failure or a norm
    explosion past ``divergence_threshold``) terminates the run early with
    status "diverged" carrying the offending step.
    """
    K1g = system.g_norm_matrix(cfg)
    times = cfg.dt * np.arange(cfg.n_steps + 1)
    ds = [np.asarray(d0, dtype=float)]
    iters: list[int] = []
    trace: list[tuple] = []

    d_prev: np.ndarray | None = None
    d_curr = ds[0]
    for eta in range(cfg.n_steps):
        step_ops = build_step_operators(system, cfg, eta)
        g_curr = kirchhoff_scalar(system.b1(eta * cfg.dt), d_curr, K1g)
        if eta == 0:
            prob = StepProblem(system, cfg, 0, step_ops, d_curr, None, d1, g_curr)
            x0 = d_curr
        else:
            g_prev = kirchhoff_scalar(system.b1((eta - 1) * cfg.dt), d_prev, K1g)
            prob = StepProblem(
                system, cfg, eta, step_ops, d_curr, d_prev, None, g_curr, g_prev
            )
            x0 = d_curr
        try:
            d_next, nit, resid = newton_solve(prob, x0, cfg)
        except (NewtonNoConvergence, SingularJacobian):
            return Trajectory(ds, times[: len(ds)], iters, "diverged", eta + 1, trace)
        dinf = float(np.max(np.abs(d_next))) if d_next.size else 0.0
        if not math.isfinite(dinf) or dinf > cfg.divergence_threshold:
            return Trajectory(ds, times[: len(ds)], iters, "diverged", eta + 1, trace)
        ds.append(d_next)
        iters.append(nit)
        if collect_trace:
            trace.append((eta + 1, float(times[eta + 1]), nit, resid, dinf))
        d_prev, d_curr = d_curr, d_next
    return Trajectory(ds, times, iters, "completed", None, trace)
