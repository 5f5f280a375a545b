"""The mean-reverting 3/2 volatility model.

    dx = (alpha x - beta x^2) dt + k x^(3/2) dz

Discounted harmonic functions solve ``L f = 0`` with

    L = 1/2 k^2 x^3 d2/dx2 + (alpha x - beta x^2) d/dx - r.

Substituting ``z = B/x`` turns ``L f = 0`` into Kummer's equation with
parameters ``a = r/alpha`` and ``b = A``, where

    A = 2 (1 + beta/k^2),   B = 2 alpha / k^2.

The fundamental system is ``Phi1(x) = M(a, A; B/x)`` (bounded as
``x -> inf``, where it tends to 1) and
``Phi2(x) = (B/x)^(1-A) M(a+1-A, 2-A; B/x)`` (grows like ``x^(A-1)``).
Since ``A > 2`` the point ``x = inf`` is an entrance boundary: the index
comes down from infinity, so option values stay bounded there but do not
vanish.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .exceptions import ModelAdvisoryWarning, SimulationError
from .specfn import kummer_m, kummer_m_log

BLOCK_SIZE = 4096
Y_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Model and contract constants.

    ``alpha``, ``beta``, ``k`` drive the index, ``r`` is the discount rate,
    ``strike`` the put strike (also the knock-out barrier) and ``delta``
    the cancellation penalty.
    """

    alpha: float
    beta: float
    k: float
    r: float
    strike: float
    delta: float = 0.0
    warn: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        for name in ("alpha", "beta", "k", "r", "strike"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {val!r}")
        if not (math.isfinite(self.delta) and self.delta >= 0.0):
            raise ValueError(f"delta must be finite and >= 0, got {self.delta!r}")
        if self.A <= 0.0:
            raise ValueError(f"derived constant A = {self.A} must be > 0")
        if self.warn:
            for msg in self.advisories():
                warnings.warn(msg, ModelAdvisoryWarning, stacklevel=3)

    @property
    def A(self) -> float:
        return 2.0 * (1.0 + self.beta / self.k**2)

    @property
    def B(self) -> float:
        return 2.0 * self.alpha / self.k**2

    @property
    def a(self) -> float:
        """First Kummer parameter r/alpha."""
        return self.r / self.alpha

    def advisories(self) -> list[str]:
        out = []
        if self.alpha <= self.r:
            out.append(f"alpha={self.alpha} <= r={self.r}: the theory assumes alpha > r")
        if self.beta >= 0.5 * self.k**2:
            out.append(
                f"beta={self.beta} >= k^2/2={0.5 * self.k**2}: "
                "outside the parameter range the closed-form conditions assume"
            )
        return out

    def with_delta(self, delta: float) -> "ModelParams":
        return replace(self, delta=delta, warn=False)

    def g1(self, x):
        """Exercise payoff (K - x)^+."""
        return np.maximum(self.strike - np.asarray(x, dtype=float), 0.0)

    def g2(self, x):
        """Cancellation payoff (K - x)^+ + delta."""
        return self.g1(x) + self.delta

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "k": self.k,
            "r": self.r,
            "strike": self.strike,
            "delta": self.delta,
        }


def derive_constants(params: ModelParams) -> tuple[float, float]:
    """Return the Kummer constants ``(A, B)``."""
    return params.A, params.B


@dataclass(frozen=True)
class PhiBasis:
    phi1: float
    phi2: float
    dphi1: float
    dphi2: float

    @property
    def wronskian(self) -> float:
        return self.phi1 * self.dphi2 - self.dphi1 * self.phi2


def phi_basis(params: ModelParams, x: float) -> PhiBasis:
    """Evaluate Phi1, Phi2 and their x-derivatives at ``x > 0``."""
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"x must be > 0, got {x!r}")
    a, A, B = params.a, params.A, params.B
    z = B / x
    m_a = kummer_m(a, A, z)
    m_b = kummer_m(a + 1.0 - A, 2.0 - A, z)
    phi1 = m_a
    phi2 = z ** (1.0 - A) * m_b
    dphi1 = -a * B / (A * x * x) * kummer_m(a + 1.0, A + 1.0, z)
    dphi2 = B ** (1.0 - A) * x ** (A - 2.0) * (
        (A - 1.0) * m_b
        - (a + 1.0 - A) * B / ((2.0 - A) * x) * kummer_m(a + 2.0 - A, 3.0 - A, z)
    )
    if not all(math.isfinite(v) for v in (phi1, phi2, dphi1, dphi2)):
        raise OverflowError(f"fundamental system not representable at x={x}")
    return PhiBasis(phi1, phi2, dphi1, dphi2)


def dlog_phi1(params: ModelParams, x: float) -> float:
    """Phi1'(x) / Phi1(x), evaluated in log space so it never overflows."""
    a, A, B = params.a, params.A, params.B
    z = B / x
    s_num, l_num = kummer_m_log(a + 1.0, A + 1.0, z)
    s_den, l_den = kummer_m_log(a, A, z)
    return -(a * B / (A * x * x)) * s_num * s_den * math.exp(l_num - l_den)


def log_phi1(params: ModelParams, x: float) -> float:
    """log Phi1(x); Phi1 > 0 for the model's positive parameters."""
    sign, lm = kummer_m_log(params.a, params.A, params.B / x)
    if sign <= 0:
        raise ArithmeticError(f"Phi1({x}) is not positive")
    return lm


def analytic_wronskian(params: ModelParams, x: float) -> float:
    """Abel's formula: (A-1) B^(1-A) x^(A-2) exp(B/x)."""
    A, B = params.A, params.B
    return (A - 1.0) * B ** (1.0 - A) * x ** (A - 2.0) * math.exp(B / x)


def generator_residual(params: ModelParams, f: Callable[[float], float], x: float) -> float:
    """``L f (x)`` with central differences of step ``max(1e-5, 1e-5 x)``."""
    h = max(1e-5, 1e-5 * x)
    fm, f0, fp = f(x - h), f(x), f(x + h)
    d1 = (fp - fm) / (2.0 * h)
    d2 = (fp - 2.0 * f0 + fm) / (h * h)
    return (
        0.5 * params.k**2 * x**3 * d2
        + (params.alpha * x - params.beta * x * x) * d1
        - params.r * f0
    )


# --------------------------------------------------------------------------
# simulation


@dataclass(frozen=True)
class PathConfig:
    x0: float
    dt: float = 1e-3
    horizon: float = 10.0
    seed: int = 0
    n_paths: int = 1000

    def __post_init__(self):
        if not self.x0 > 0.0:
            raise ValueError(f"x0 must be > 0, got {self.x0}")
        if not self.dt > 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.horizon >= self.dt:
            raise ValueError("horizon must be >= dt")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


def block_generators(seed: int, n_paths: int, block_size: int = BLOCK_SIZE):
    """Yield ``(start, stop, Generator)`` per fixed-size block of paths.

    Each block's stream depends only on ``(seed, block_index)``, so results
    do not depend on how blocks are distributed over workers.
    """
    root = np.random.SeedSequence(seed)
    n_blocks = -(-n_paths // block_size)
    for i, child in enumerate(root.spawn(n_blocks)):
        start = i * block_size
        yield start, min(start + block_size, n_paths), np.random.Generator(np.random.PCG64(child))


def reciprocal_euler_step(params: ModelParams, y: np.ndarray, dt: float, dw: np.ndarray) -> np.ndarray:
    """One full-truncation Euler step of ``y = 1/x``.

    By Ito, ``dy = ((beta + k^2) - alpha y) dt - k sqrt(y) dz``.
    """
    yp = np.maximum(y, 0.0)
    return y + ((params.beta + params.k**2) - params.alpha * yp) * dt - params.k * np.sqrt(yp) * dw


def simulate_paths(params: ModelParams, config: PathConfig) -> np.ndarray:
    """Simulate ``x_t`` on ``t = 0, dt, ..., horizon``.

    Returns an array of shape ``(n_paths, n_steps + 1)``.  Raises
    :class:`SimulationError` when the positivity floor on ``y`` is needed on
    more than 1% of steps.
    """
    n_steps = config.n_steps
    out = np.empty((config.n_paths, n_steps + 1))
    sqdt = math.sqrt(config.dt)
    floored = 0
    for start, stop, rng in block_generators(config.seed, config.n_paths):
        y = np.full(stop - start, 1.0 / config.x0)
        out[start:stop, 0] = config.x0
        for j in range(1, n_steps + 1):
            y = reciprocal_euler_step(params, y, config.dt, sqdt * rng.standard_normal(stop - start))
            low = y < Y_FLOOR
            floored += int(low.sum())
            out[start:stop, j] = 1.0 / np.maximum(y, Y_FLOOR)
    if floored > 0.01 * config.n_paths * n_steps:
        raise SimulationError(
            f"positivity floor hit on {floored} of {config.n_paths * n_steps} steps; reduce dt"
        )
    return out


def write_paths_csv(paths: np.ndarray, dt: float, fh) -> None:
    """Write an ensemble as ``path_id,t,x`` rows."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["path_id", "t", "x"])
    for pid, row in enumerate(paths):
        for j, x in enumerate(row):
            w.writerow([pid, repr(j * dt), repr(float(x))])
