"""Moving-boundary geometry: K(t), the domain mapping and transformed coefficients.

The physical beam occupies ``Omega_t = K(t) * Omega`` where ``Omega`` is a fixed
reference box.  Pulling the equation back to the reference box turns the
constant-coefficient operator into one with the time/space dependent
coefficients ``b1, b2, a1..a5`` evaluated here.  Everything in this module is
pure and stateless; callers may evaluate from any number of workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "BoundaryKind",
    "MovingBoundary",
    "BeamParameters",
    "CoefficientSet",
    "HypothesisReport",
    "InvalidBoundaryError",
    "SingularMappingError",
    "eval_boundary",
    "eval_coefficients",
    "validate_hypotheses",
    "map_point",
    "map_back",
]


class InvalidBoundaryError(ValueError):
    """K, K' or K'' evaluated to a non-finite value."""


class SingularMappingError(ValueError):
    """The mapping x = K(t) y is singular (K <= 0)."""


class BoundaryKind(Enum):
    LINEAR_DRIFT = "linear_drift"            # K(t) = base + slope * t
    EXPONENTIAL_SATURATION = "exp_saturation"  # K(t) = base + amp * (1 - e^{-rate t})
    CONSTANT = "constant"                    # K(t) = base
    CUSTOM = "custom"                        # user-supplied callbacks


@dataclass(frozen=True)
class MovingBoundary:
    """Scalar end-point trajectory K(t) with analytic derivatives.

    ``k0``/``k1_bound`` bound K itself and ``k2_bound`` bounds K' on the run
    horizon; they are the admissibility constants checked by
    :func:`validate_hypotheses`.
    """

    kind: BoundaryKind
    base: float = 64.0
    slope: float = 0.0        # linear drift rate
    amplitude: float = 0.0    # exponential saturation amplitude
    rate: float = 1.0         # exponential saturation rate
    k0: float = 1e-8
    k1_bound: float = math.inf
    k2_bound: float = math.inf
    custom: tuple[Callable[[float], float], ...] | None = None  # (K, K', K'')
    label: str = ""

    def __call__(self, t: float) -> tuple[float, float, float]:
        return eval_boundary(self, t)

    # -- canonical boundaries used throughout the verification harness -----

    @staticmethod
    def b1(dim: int = 1) -> "MovingBoundary":
        """Slow linear drift: K = 64 + t/2^7 (1D) or 64 + t/2^17 (2D)."""
        slope = 2.0 ** -7 if dim == 1 else 2.0 ** -17
        return MovingBoundary(
            BoundaryKind.LINEAR_DRIFT, base=64.0, slope=slope,
            k0=1.0, k1_bound=128.0, k2_bound=1.0, label=f"B1/{dim}D",
        )

    @staticmethod
    def b2(dim: int = 1) -> "MovingBoundary":
        """Exponential saturation: K = 64 + 2(1-e^-t) (1D) or 64 + (1-e^-t)/2^17 (2D)."""
        amp = 2.0 if dim == 1 else 2.0 ** -17
        return MovingBoundary(
            BoundaryKind.EXPONENTIAL_SATURATION, base=64.0, amplitude=amp, rate=1.0,
            k0=1.0, k1_bound=128.0, k2_bound=4.0, label=f"B2/{dim}D",
        )

    @staticmethod
    def constant(value: float = 64.0) -> "MovingBoundary":
        return MovingBoundary(
            BoundaryKind.CONSTANT, base=value,
            k0=value / 2.0, k1_bound=2.0 * value, k2_bound=1.0, label="constant",
        )


@dataclass(frozen=True)
class BeamParameters:
    """Physical constants: tensile load, nonlinear stiffness, damping.

    ``zeta0`` may take any sign.  ``zeta1`` and ``nu`` are nonnegative; zero
    is admitted so the linear and undamped regression cases can run.
    """

    zeta0: float = 128.0
    zeta1: float = 2.0
    nu: float = 1.0

    def __post_init__(self):
        if self.zeta1 < 0.0:
            raise ValueError(f"zeta1 must be nonnegative, got {self.zeta1}")
        if self.nu < 0.0:
            raise ValueError(f"nu must be nonnegative, got {self.nu}")


@dataclass
class CoefficientSet:
    """Pointwise transformed-operator coefficients at one (y, t).

    ``a1``, ``a3``, ``a4``, ``a5`` have one entry per axis, ``a2`` is the
    (symmetric) n x n matrix 4 y_i y_j (K'/K)^2.
    """

    b1: float
    b2: float
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    a4: np.ndarray
    a5: np.ndarray


def eval_boundary(b: MovingBoundary, t: float) -> tuple[float, float, float]:
    """Return (K, K', K'') at time t, analytically per kind."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if b.kind is BoundaryKind.LINEAR_DRIFT:
        k, kp, kpp = b.base + b.slope * t, b.slope, 0.0
    elif b.kind is BoundaryKind.EXPONENTIAL_SATURATION:
        e = math.exp(-b.rate * t)
        k = b.base + b.amplitude * (1.0 - e)
        kp = b.amplitude * b.rate * e
        kpp = -b.amplitude * b.rate * b.rate * e
    elif b.kind is BoundaryKind.CONSTANT:
        k, kp, kpp = b.base, 0.0, 0.0
    elif b.kind is BoundaryKind.CUSTOM:
        if b.custom is None or len(b.custom) != 3:
            raise ValueError("custom boundary requires (K, K', K'') callbacks")
        k, kp, kpp = (float(f(t)) for f in b.custom)
    else:  # pragma: no cover
        raise ValueError(f"unknown boundary kind {b.kind}")
    if not (math.isfinite(k) and math.isfinite(kp) and math.isfinite(kpp)):
        raise InvalidBoundaryError(f"non-finite boundary value at t={t}: {(k, kp, kpp)}")
    return k, kp, kpp


def eval_coefficients(
    b: MovingBoundary, p: BeamParameters, y: Sequence[float] | np.ndarray, t: float
) -> CoefficientSet:
    """Evaluate b1, b2 and the a-coefficients at a reference point y and time t."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    k, kp, kpp = eval_boundary(b, t)
    if k <= 0.0:
        raise SingularMappingError(f"K(t) must be positive, got K({t}) = {k}")
    b2c = k ** -4
    b1c = p.zeta1 * b2c
    a1 = (p.zeta0 - 4.0 * (y * kp) ** 2) / k ** 2
    a2 = 4.0 * np.outer(y, y) * (kp / k) ** 2
    a3 = (2.0 * y * kp * kp - y * k * (p.nu * kp + kpp)) / k ** 2
    a4 = -2.0 * y * (kp / k)
    a5 = a3 + 2.0 * (kp / k) * a4
    return CoefficientSet(b1=b1c, b2=b2c, a1=a1, a2=a2, a3=a3, a4=a4, a5=a5)


def map_point(b: MovingBoundary, t: float, y: Sequence[float] | np.ndarray) -> np.ndarray:
    """Reference -> physical: x = K(t) y (componentwise)."""
    k, _, _ = eval_boundary(b, t)
    if k <= 0.0:
        raise SingularMappingError(f"K(t) must be positive, got K({t}) = {k}")
    return k * np.asarray(y, dtype=float)


def map_back(b: MovingBoundary, t: float, x: Sequence[float] | np.ndarray) -> np.ndarray:
    """Physical -> reference: y = x / K(t)."""
    k, _, _ = eval_boundary(b, t)
    if k <= 0.0:
        raise SingularMappingError(f"K(t) must be positive, got K({t}) = {k}")
    return np.asarray(x, dtype=float) / k


@dataclass
class HypothesisReport:
    """Outcome of the admissibility checks on [0, T].

    ``h1_bounds``  : 0 < K0 <= K(t) <= K1 on [0, T]
    ``h1_speed``   : 0 < K'(t) <= K2 on [0, T]
    ``h4``         : max (K')^2 < zeta0 / 4
    """

    h1_bounds: bool
    h1_speed: bool
    h4: bool
    max_kprime_sq: float
    failures: list[str] = field(default_factory=list)
    relaxed: bool = False

    @property
    def ok(self) -> bool:
        if self.relaxed:
            return self.h1_bounds and self.h4
        return self.h1_bounds and self.h1_speed and self.h4

    def summary(self) -> str:
        lines = [
            f"H1 bounds (K0 <= K <= K1):   {'pass' if self.h1_bounds else 'FAIL'}",
            f"H1 speed  (0 < K' <= K2):    {'pass' if self.h1_speed else 'FAIL'}",
            f"H4 (max K'^2 < zeta0/4):     {'pass' if self.h4 else 'FAIL'}"
            f"  [max K'^2 = {self.max_kprime_sq:.6e}]",
        ]
        lines += [f"  - {f}" for f in self.failures]
        return "\n".join(lines)


def _sample_times(b: MovingBoundary, T: float, per_unit: int) -> np.ndarray:
    # K and K' of the built-in kinds are monotone, so the interval ends are
    # their extrema; linspace includes both ends.
    n = max(int(per_unit * T), 64)
    return np.linspace(0.0, T, n + 1)


def validate_hypotheses(
    b: MovingBoundary,
    p: BeamParameters,
    T: float,
    samples_per_unit_time: int = 10_000,
    relaxed: bool = False,
) -> HypothesisReport:
    """Check the admissibility hypotheses on [0, T] by dense sampling.

    ``relaxed`` permits K' = 0 (stationary domain) so that fixed-domain
    regression runs are not rejected; the report still records the strict
    outcome of the speed clause.
    """
    if not T > 0:
        raise ValueError(f"horizon must be positive, got T={T}")
    ts = _sample_times(b, T, samples_per_unit_time)
    ks = np.empty_like(ts)
    kps = np.empty_like(ts)
    for i, t in enumerate(ts):
        ks[i], kps[i], _ = eval_boundary(b, float(t))

    failures: list[str] = []
    lo = bool(np.all(ks >= b.k0) and b.k0 > 0.0)
    hi = bool(np.all(ks <= b.k1_bound))
    if not lo:
        t_bad = float(ts[np.argmin(ks - b.k0)])
        failures.append(f"K(t) < K0 = {b.k0} near t = {t_bad:.6g}")
    if not hi:
        t_bad = float(ts[np.argmax(ks)])
        failures.append(f"K(t) > K1 = {b.k1_bound} near t = {t_bad:.6g}")

    pos = bool(np.all(kps > 0.0))
    spd = bool(np.all(kps <= b.k2_bound))
    if not pos:
        t_bad = float(ts[np.argmin(kps)])
        failures.append(f"K'(t) <= 0 near t = {t_bad:.6g}")
    if not spd:
        t_bad = float(ts[np.argmax(kps)])
        failures.append(f"K'(t) > K2 = {b.k2_bound} near t = {t_bad:.6g}")

    max_kp_sq = float(np.max(kps ** 2))
    h4 = max_kp_sq < p.zeta0 / 4.0
    if not h4:
        t_bad = float(ts[np.argmax(kps ** 2)])
        failures.append(
            f"max (K')^2 = {max_kp_sq:.6e} >= zeta0/4 = {p.zeta0 / 4.0:.6e}"
            f" near t = {t_bad:.6g}"
        )

    return HypothesisReport(
        h1_bounds=lo and hi,
        h1_speed=pos and spd,
        h4=h4,
        max_kprime_sq=max_kp_sq,
        failures=failures,
        relaxed=relaxed,
    )
