"""Independent numerical oracles: a finite-difference Dynkin-game solver and
a Monte Carlo first-passage estimator.

Neither uses the hypergeometric basis.  The grid solver discretizes the
generator in ``xi = log x``; the Monte Carlo estimator simulates the
index through its reciprocal.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    EmptyExerciseSet,
    GridResolutionWarning,
    MonotonicityLoss,
    NonConvergence,
    SimulationError,
)
from .model import ModelParams, PathConfig, Y_FLOOR, block_generators, reciprocal_euler_step

log = logging.getLogger(__name__)

MIN_NODES = 200
SET_TOL = 1e-8


@dataclass(frozen=True)
class Grid:
    """Log-spaced nodes on ``[x_min, x_max]`` with the strike placed exactly on a node."""

    nodes: np.ndarray
    strike_index: int

    @property
    def x_min(self) -> float:
        return float(self.nodes[0])

    @property
    def x_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def log_step(self) -> float:
        return float(math.log(self.nodes[1] / self.nodes[0]))


def make_grid(params: ModelParams, n: int = 2000, x_min: float = 1e-3, x_max: float | None = None) -> Grid:
    K = params.strike
    if x_max is None:
        x_max = max(10.0, 20.0 * K)
    if not 0.0 < x_min < K < x_max:
        raise ValueError(f"need 0 < x_min < K < x_max, got {x_min}, {K}, {x_max}")
    if x_max <= max(3.0 * K, 5.0):
        raise ValueError(f"x_max={x_max} must exceed max(3K, 5)")
    if n < 3:
        raise ValueError("a grid needs at least 3 nodes")
    if n < MIN_NODES:
        warnings.warn(f"grid with n={n} nodes is below the minimum of {MIN_NODES}",
                      GridResolutionWarning, stacklevel=2)
    h = math.log(x_max / x_min) / (n - 1)
    j_K = int(round(math.log(K / x_min) / h))
    nodes = K * np.exp((np.arange(n) - j_K) * h)
    return Grid(nodes, j_K)


@dataclass(frozen=True)
class GridSolution:
    grid: Grid
    values: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    iterations: int
    residual: float

    @property
    def exercise_set(self) -> np.ndarray:
        x = self.grid.nodes
        return x[(self.values - self.g1 <= SET_TOL) & (x < x[self.grid.strike_index])]

    @property
    def cancel_set(self) -> np.ndarray:
        return self.grid.nodes[self.g2 - self.values <= SET_TOL]

    def interpolate(self, x):
        return np.interp(np.log(x), np.log(self.grid.nodes), self.values)

    def region_labels(self) -> list[str]:
        ex = self.values - self.g1 <= SET_TOL
        ex &= self.grid.nodes < self.grid.nodes[self.grid.strike_index]
        ca = self.g2 - self.values <= SET_TOL
        return ["exercise" if e else "cancel" if c else "continue" for e, c in zip(ex, ca)]

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "value", "g1", "g2", "region"])
        g2 = np.where(np.isfinite(self.g2), self.g2, np.nan)
        for x, v, a, b, lab in zip(self.grid.nodes, self.values, self.g1, g2, self.region_labels()):
            w.writerow([repr(float(x)), repr(float(v)), repr(float(a)), repr(float(b)), lab])


def _operator_coefficients(params: ModelParams, grid: Grid):
    """Tridiagonal ``(lower, diag, upper)`` of L in log coordinates.

    ``L f = 1/2 k^2 x f_xx_xi + (alpha - (beta + k^2/2) x) f_xi - r f``; central
    differences, switched to one-sided where they would break the M-matrix
    sign pattern.
    """
    x = grid.nodes
    h = grid.log_step
    diff = 0.5 * params.k**2 * x
    drift = params.alpha - (params.beta + 0.5 * params.k**2) * x
    lower = diff / h**2 - drift / (2 * h)
    upper = diff / h**2 + drift / (2 * h)
    bad = (lower < 0) | (upper < 0)
    if np.any(bad):
        fwd = bad & (drift > 0)
        bwd = bad & (drift <= 0)
        upper = np.where(fwd, diff / h**2 + drift / h, np.where(bwd, diff / h**2, upper))
        lower = np.where(fwd, diff / h**2, np.where(bwd, diff / h**2 - drift / h, lower))
        log.debug("upwinded %d of %d nodes", int(bad.sum()), len(x))
    diag = -(lower + upper) - params.r
    if np.any(lower < 0) or np.any(upper < 0) or np.any(diag >= 0):
        raise MonotonicityLoss("finite-difference operator is not an M-matrix")
    return lower, diag, upper


def far_field_ratio(params: ModelParams, x_prev: float, x_last: float, max_terms: int = 500) -> float:
    """``f(x_last) / f(x_prev)`` for the solution of ``L f = 0`` bounded at infinity.

    Substituting ``f = sum c_m x^(-m)`` with ``c_0 = 1`` into the generator
    gives ``c_(m+1) = (alpha m + r) c_m / ((m+1) (k^2 (m+2)/2 + beta))``.
    """
    def f(x):
        total = term = 1.0
        for m in range(max_terms):
            term *= (params.alpha * m + params.r) / ((m + 1) * (0.5 * params.k**2 * (m + 2) + params.beta) * x)
            total += term
            if abs(term) < 1e-17 * total:
                return total
        raise NonConvergence(f"far-field expansion did not converge at x={x}")

    return f(x_last) / f(x_prev)


def solve_dynkin_grid(
    params: ModelParams,
    grid: Grid,
    obstacle: str = "double",
    tol: float = 1e-10,
    max_sweeps: int = 50_000,
    omega: float | None = None,
) -> GridSolution:
    """Projected SOR for the stationary obstacle problem.

    ``obstacle`` selects the game: ``"double"`` (``g1 <= u <= g2``, the
    callable put), ``"single"`` (``u >= g1`` only, the American put) or
    ``"knockout"`` (``u >= g1`` with ``u(K) = delta`` pinned).

    Boundary conditions: ``u = g1`` at ``x_min``; at ``x_max`` the value
    follows the solution that stays bounded at infinity (the only one
    compatible with an entrance boundary), imposed as
    ``u_N = u_(N-1) f(x_N) / f(x_(N-1))`` with ``f`` from
    :func:`far_field_ratio`.
    """
    if obstacle not in ("double", "single", "knockout"):
        raise ValueError(f"unknown obstacle mode {obstacle!r}")
    x = grid.nodes
    n = grid.n
    h = grid.log_step
    lower, diag, upper = _operator_coefficients(params, grid)

    g1 = params.g1(x)
    g2 = params.g2(x) if obstacle == "double" else np.full(n, np.inf)
    lo = g1.copy()
    hi = g2.copy()
    if obstacle == "knockout":
        jK = grid.strike_index
        lo[jK] = hi[jK] = params.delta

    rho = far_field_ratio(params, float(x[-2]), float(x[-1]))

    u = np.clip(np.maximum(g1, 0.0), lo, hi)
    u[0] = g1[0]
    if omega is None:
        omega = 2.0 / (1.0 + math.sin(math.pi / n))

    a_ = -lower / diag
    c_ = -upper / diag
    red = np.arange(1, n - 1, 2)
    black = np.arange(2, n - 1, 2)
    residual = math.inf
    for sweep in range(1, max_sweeps + 1):
        change = 0.0
        for idx in (red, black):
            gs = a_[idx] * u[idx - 1] + c_[idx] * u[idx + 1]
            new = np.clip(u[idx] + omega * (gs - u[idx]), lo[idx], hi[idx])
            change = max(change, float(np.max(np.abs(new - u[idx]))))
            u[idx] = new
        far = min(max(rho * u[-2], lo[-1]), hi[-1])
        change = max(change, abs(far - u[-1]))
        u[-1] = far
        residual = change
        if change < tol:
            break
    else:
        raise NonConvergence(
            f"projected SOR did not converge in {max_sweeps} sweeps (last update {residual:.3g})",
            residual=residual,
            iterations=max_sweeps,
        )
    return GridSolution(grid, u.copy(), g1, g2, sweep, residual)


def boundary_from_grid(solution: GridSolution) -> float:
    """Exercise boundary estimate from a grid solution.

    Takes the last exercise node ``j`` and extrapolates ``sqrt(u - g1)``
    (linear in ``x - s`` under smooth pasting) from nodes ``j+1, j+2`` back
    to zero, clipped to ``[x_j, x_{j+1}]``.
    """
    x = solution.grid.nodes
    ex = (solution.values - solution.g1 <= SET_TOL) & (x < x[solution.grid.strike_index])
    if not np.any(ex):
        raise EmptyExerciseSet("grid solution has no exercise nodes")
    j = int(np.nonzero(ex)[0].max())
    if j + 2 >= len(x):
        return float(x[j])
    e1 = math.sqrt(max(solution.values[j + 1] - solution.g1[j + 1], 0.0))
    e2 = math.sqrt(max(solution.values[j + 2] - solution.g1[j + 2], 0.0))
    if e2 <= e1:
        return float(x[j])
    s = x[j + 1] - e1 * (x[j + 2] - x[j + 1]) / (e2 - e1)
    return float(min(max(s, x[j]), x[j + 1]))


# Monte Carlo


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    discount_applied: bool = True
    horizon_fraction: float = 0.0
    floor_hits: int = 0


class _FirstPassage:
    """Stopping rule shared by the plain and the coupled estimators."""

    def __init__(self, params, exercise_s, barrier_K, rebate, bridge):
        self.r = params.r
        self.k2 = params.k**2
        self.s = exercise_s
        self.payoff_ex = params.strike - exercise_s
        self.barrier = barrier_K
        self.rebate = rebate
        self.bridge = bridge
        self.y_ex = 1.0 / exercise_s
        self.y_ko = None if barrier_K is None else 1.0 / barrier_K

    def step(self, y_prev, y_new, u, dt, t0):
        """Return ``(done, payoff)`` for one step from ``y_prev`` to ``y_new``."""
        xp = 1.0 / np.maximum(y_prev, Y_FLOOR)
        xn = 1.0 / np.maximum(y_new, Y_FLOOR)
        hit_lo = xn <= self.s
        hit_hi = np.zeros_like(hit_lo) if self.barrier is None else xn >= self.barrier
        if self.bridge:
            var = self.k2 * dt * np.maximum(y_prev, Y_FLOOR)
            gap_lo = np.maximum(self.y_ex - y_prev, 0.0) * np.maximum(self.y_ex - y_new, 0.0)
            hit_lo |= u < np.exp(-2.0 * gap_lo / var)
            if self.barrier is not None:
                gap_hi = np.maximum(y_prev - self.y_ko, 0.0) * np.maximum(y_new - self.y_ko, 0.0)
                hit_hi |= (u < np.exp(-2.0 * gap_hi / var)) & ~hit_lo
        hit_hi &= ~hit_lo
        payoff = np.zeros(y_new.shape)
        if hit_lo.any():
            # bridge-detected crossings end on the near side, hence the clip
            frac = np.clip((xp[hit_lo] - self.s) / (xp[hit_lo] - xn[hit_lo]), 0.0, 1.0)
            payoff[hit_lo] = self.payoff_ex * np.exp(-self.r * (t0 + dt * frac))
        if hit_hi.any():
            frac = np.clip((self.barrier - xp[hit_hi]) / (xn[hit_hi] - xp[hit_hi]), 0.0, 1.0)
            payoff[hit_hi] = self.rebate * np.exp(-self.r * (t0 + dt * frac))
        return hit_lo | hit_hi, payoff


def _check_stopping_config(config, exercise_s, barrier_K):
    if not exercise_s < config.x0:
        raise ValueError(f"need exercise_s < x0, got {exercise_s} >= {config.x0}")
    if barrier_K is not None and not config.x0 < barrier_K:
        raise ValueError(f"need x0 < barrier_K, got {config.x0} >= {barrier_K}")


def _estimate(payoffs, alive, floors, config, max_horizon_fraction, n_steps):
    frac = alive / config.n_paths
    if frac > max_horizon_fraction:
        raise SimulationError(
            f"{100 * frac:.1f}% of paths reached the horizon {config.horizon}; extend it"
        )
    if floors > 0.01 * config.n_paths * n_steps:
        raise SimulationError(f"positivity floor hit {floors} times; reduce dt")
    se = float(payoffs.std(ddof=1) / math.sqrt(len(payoffs))) if len(payoffs) > 1 else 0.0
    return McEstimate(float(payoffs.mean()), se, len(payoffs), True, frac, floors)


def mc_stopping_value(
    params: ModelParams,
    config: PathConfig,
    exercise_s: float,
    barrier_K: float | None = None,
    rebate: float = 0.0,
    max_horizon_fraction: float = 0.05,
    bridge: bool = True,
    terminal_value=None,
) -> McEstimate:
    """Discounted payoff of the (exercise at ``s``, knock out at ``K``) strategy.

    Paths start at ``x0``; the first step at or below ``exercise_s`` pays
    ``K - s`` and the first at or above ``barrier_K`` pays ``rebate``, both
    discounted to a crossing time interpolated linearly in the state.
    Paths still alive at the horizon pay 0.

    With ``bridge`` (the default) a path that stays on the continuation
    side at both ends of a step is still stopped with the Brownian-bridge
    probability ``exp(-2 d0 d1 / (k^2 y dt))`` of having crossed in between,
    computed for ``y = 1/x``.  This removes the O(sqrt(dt)) bias of
    discrete monitoring.

    ``terminal_value``, if given, maps the state of surviving paths to the
    payoff credited (discounted) at the horizon instead of 0.
    """
    _check_stopping_config(config, exercise_s, barrier_K)
    rule = _FirstPassage(params, exercise_s, barrier_K, rebate, bridge)
    dt = config.dt
    sqdt = math.sqrt(dt)
    n_steps = config.n_steps
    payoffs = np.zeros(config.n_paths)
    alive = floors = 0
    for start, stop, rng in block_generators(config.seed, config.n_paths):
        idx = np.arange(stop - start)
        y = np.full(idx.size, 1.0 / config.x0)
        out = payoffs[start:stop]
        for j in range(n_steps):
            if idx.size == 0:
                break
            y_new = reciprocal_euler_step(params, y, dt, sqdt * rng.standard_normal(idx.size))
            floors += int(np.count_nonzero(y_new < Y_FLOOR))
            u = rng.random(idx.size) if bridge else None
            done, pay = rule.step(y, y_new, u, dt, j * dt)
            out[idx[done]] = pay[done]
            keep = ~done
            idx, y = idx[keep], y_new[keep]
        if terminal_value is not None and idx.size:
            x_end = 1.0 / np.maximum(y, Y_FLOOR)
            out[idx] = math.exp(-params.r * n_steps * dt) * np.asarray(terminal_value(x_end))
        alive += idx.size
    return _estimate(payoffs, alive, floors, config, max_horizon_fraction, n_steps)


def mc_dt_refinement(
    params: ModelParams,
    config: PathConfig,
    exercise_s: float,
    barrier_K: float | None = None,
    rebate: float = 0.0,
    max_horizon_fraction: float = 0.05,
) -> tuple[McEstimate, McEstimate, float]:
    """Coupled estimates at steps ``2 dt`` and ``dt`` on the same Brownian paths.

    Each coarse increment is the sum of the two fine increments, so the
    difference of the two means isolates the time-step bias.  Returns
    ``(coarse, fine, std_error_of_difference)``.
    """
    _check_stopping_config(config, exercise_s, barrier_K)
    rule = _FirstPassage(params, exercise_s, barrier_K, rebate, True)
    dt = config.dt
    sqdt = math.sqrt(dt)
    n_coarse = config.n_steps // 2
    pay_c = np.zeros(config.n_paths)
    pay_f = np.zeros(config.n_paths)
    alive_c = alive_f = floors = 0
    for start, stop, rng in block_generators(config.seed, config.n_paths):
        m = stop - start
        y_c = np.full(m, 1.0 / config.x0)
        y_f = y_c.copy()
        live_c = np.ones(m, dtype=bool)
        live_f = np.ones(m, dtype=bool)
        idx = np.arange(m)
        for j in range(n_coarse):
            if idx.size == 0:
                break
            n = idx.size
            dw1 = sqdt * rng.standard_normal(n)
            dw2 = sqdt * rng.standard_normal(n)
            u1, u2, uc = rng.random(n), rng.random(n), rng.random(n)
            t0 = 2 * j * dt

            lf = live_f[idx]
            for dw, u, t in ((dw1, u1, t0), (dw2, u2, t0 + dt)):
                sub = idx[lf]
                y_prev = y_f[sub]
                y_new = reciprocal_euler_step(params, y_prev, dt, dw[lf])
                floors += int(np.count_nonzero(y_new < Y_FLOOR))
                done, pay = rule.step(y_prev, y_new, u[lf], dt, t)
                pay_f[start + sub[done]] = pay[done]
                live_f[sub[done]] = False
                y_f[sub] = y_new
                lf = live_f[idx]

            lc = live_c[idx]
            sub = idx[lc]
            y_prev = y_c[sub]
            y_new = reciprocal_euler_step(params, y_prev, 2 * dt, (dw1 + dw2)[lc])
            done, pay = rule.step(y_prev, y_new, uc[lc], 2 * dt, t0)
            pay_c[start + sub[done]] = pay[done]
            live_c[sub[done]] = False
            y_c[sub] = y_new

            idx = idx[live_c[idx] | live_f[idx]]
        alive_c += int(live_c.sum())
        alive_f += int(live_f.sum())
    coarse = _estimate(pay_c, alive_c, 0, config, max_horizon_fraction, n_coarse)
    fine = _estimate(pay_f, alive_f, floors, config, max_horizon_fraction, 2 * n_coarse)
    diff = pay_f - pay_c
    return coarse, fine, float(diff.std(ddof=1) / math.sqrt(len(diff)))
