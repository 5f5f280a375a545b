"""Closed-form pricers for perpetual volatility puts under the 3/2 model.

Three instruments share the same strike ``K``:

* the perpetual American put ``v_A``, exercised at a constant level ``s``;
* the knock-out put ``v`` with barrier ``K`` and rebate ``delta``;
* the callable put ``u``, the value of the Dynkin game in which the seller
  may cancel by paying ``(K - x)^+ + delta``.

On a continuation interval every value is ``C1 Phi1 + C2 Phi2``.  Above
the strike only the bounded solution ``Phi1`` survives.

The callable put is dispatched on ``delta* = v_A(K)``:

* ``delta >= delta*``: cancelling never pays and ``u = v_A``.
* ``delta < delta*`` and either ``K <= d1`` or the slope condition at the
  barrier holds: the seller cancels only at ``K`` and ``u = v``.
* otherwise, if ``v`` breaks the upper obstacle, the seller cancels on a
  whole interval ``[c, K]`` and ``u`` is found from a two-boundary free
  boundary problem (smooth fit at both ``s`` and ``c``).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np

from .exceptions import NoAdmissibleRoot, RegimeWarning, SingularSystem
from .model import ModelParams, PhiBasis, dlog_phi1, log_phi1, phi_basis
from .roots import RootProblem, bracket_roots, find_roots, refine_root

log = logging.getLogger(__name__)

SEARCH_LO_FRACTION = 1e-4
SEARCH_HI_FRACTION = 1.0 - 1e-7
N_PROBE = 400
DELTA_STAR_TOL = 1e-12
SINGULAR_TOL = 1e-14


class Payoffs(NamedTuple):
    g1: Callable
    g2: Callable


def payoffs(params: ModelParams) -> Payoffs:
    return Payoffs(params.g1, params.g2)


def _vectorize(fn):
    """Lift a scalar ``fn(self, x)`` to accept arrays."""

    def wrapper(self, x):
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 0:
            return fn(self, float(arr))
        return np.array([fn(self, float(v)) for v in arr.ravel()]).reshape(arr.shape)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _phi_pair(params: ModelParams, x: float) -> tuple[float, float]:
    b = phi_basis(params, x)
    return b.phi1, b.phi2


# --------------------------------------------------------------------------
# American put


@dataclass(frozen=True)
class AmericanSolution:
    params: ModelParams
    boundary_s: float
    log_scale: float
    candidates: tuple = ()

    @_vectorize
    def value(self, x):
        """v_A(x): K - x below s, ``(K-s) Phi1(x)/Phi1(s)`` above."""
        if x <= self.boundary_s:
            return self.params.strike - x
        return math.exp(self.log_scale + log_phi1(self.params, x))

    @_vectorize
    def slope(self, x):
        if x <= self.boundary_s:
            return -1.0
        return math.exp(self.log_scale + log_phi1(self.params, x)) * dlog_phi1(self.params, x)

    __call__ = value

    @property
    def limit_at_infinity(self) -> float:
        """v_A(inf) = (K - s)/Phi1(s) > 0, since Phi1 -> 1."""
        return math.exp(self.log_scale)

    def to_dict(self) -> dict:
        return {"s": self.boundary_s, "params": self.params.to_dict()}


def american_boundary_objective(params: ModelParams) -> Callable[[float], float]:
    """Smooth pasting ``(K - s) Phi1'(s)/Phi1(s) + 1``."""
    K = params.strike
    return lambda s: (K - s) * dlog_phi1(params, s) + 1.0


def solve_american(params: ModelParams, n_probe: int = N_PROBE) -> AmericanSolution:
    K = params.strike
    problem = RootProblem(
        american_boundary_objective(params), SEARCH_LO_FRACTION * K, SEARCH_HI_FRACTION * K
    )
    candidates = find_roots(problem, n_probe)
    admissible = []
    for s in candidates:
        log_scale = math.log(K - s) - log_phi1(params, s)
        sol = AmericanSolution(params, s, log_scale, tuple(candidates))
        xs = np.linspace(s, K, 66)[1:-1]
        if np.all(sol.value(xs) >= params.g1(xs) - 1e-12):
            admissible.append(sol)
    if not admissible:
        raise NoAdmissibleRoot(
            f"no admissible American exercise boundary in (0, {K})", candidates
        )
    if len(candidates) > 1:
        log.info("American boundary candidates %s; taking the largest admissible", candidates)
    return admissible[-1]


# --------------------------------------------------------------------------
# knock-out put


@dataclass(frozen=True)
class KnockoutSolution:
    params: ModelParams
    boundary_s: float
    c1: float
    c2: float
    candidates: tuple = ()
    degenerate: bool = False
    phi1_at_K: float = field(default=1.0, repr=False)

    @_vectorize
    def value(self, x):
        """Knock-out value: K - x below s, C1 Phi1 + C2 Phi2 on (s, K), rebate tail above K."""
        K = self.params.strike
        if x <= self.boundary_s:
            return K - x
        if x < K:
            p1, p2 = _phi_pair(self.params, x)
            return self.c1 * p1 + self.c2 * p2
        return self.tail(x)

    __call__ = value

    def tail(self, x: float) -> float:
        """delta Phi1(x)/Phi1(K) for x >= K."""
        return knockout_tail_value(self.params, x, _phi1_K=self.phi1_at_K)

    @_vectorize
    def slope(self, x):
        K = self.params.strike
        if x <= self.boundary_s:
            return -1.0
        if x < K:
            b = phi_basis(self.params, x)
            return self.c1 * b.dphi1 + self.c2 * b.dphi2
        return self.tail(x) * dlog_phi1(self.params, x)

    @property
    def slope_at_barrier(self) -> float:
        """v'(K-) from the interior closed form."""
        if self.degenerate:
            return -1.0
        b = phi_basis(self.params, self.params.strike)
        return self.c1 * b.dphi1 + self.c2 * b.dphi2

    def to_dict(self) -> dict:
        return {
            "s": self.boundary_s,
            "C1": self.c1,
            "C2": self.c2,
            "a": self.slope_at_barrier,
            "params": self.params.to_dict(),
        }


def knockout_coefficients(params: ModelParams, s: float, basis_s: PhiBasis | None = None,
                          basis_K: PhiBasis | None = None) -> tuple[float, float]:
    """Solve ``C1 Phi1(s) + C2 Phi2(s) = K - s`` and ``C1 Phi1(K) + C2 Phi2(K) = delta``."""
    K, delta = params.strike, params.delta
    bs = basis_s or phi_basis(params, s)
    bK = basis_K or phi_basis(params, K)
    det = bs.phi1 * bK.phi2 - bs.phi2 * bK.phi1
    scale = abs(bs.phi1 * bK.phi2) + abs(bs.phi2 * bK.phi1)
    if abs(det) <= SINGULAR_TOL * scale:
        raise SingularSystem(f"knock-out coefficient system is singular at s={s}")
    c1 = ((K - s) * bK.phi2 - delta * bs.phi2) / det
    c2 = (delta * bs.phi1 - (K - s) * bK.phi1) / det
    return c1, c2


def knockout_boundary_objective(params: ModelParams) -> Callable[[float], float]:
    """High contact ``v'(s) + 1`` with C1, C2 from the two value conditions."""
    bK = phi_basis(params, params.strike)

    def objective(s):
        bs = phi_basis(params, s)
        c1, c2 = knockout_coefficients(params, s, bs, bK)
        return c1 * bs.dphi1 + c2 * bs.dphi2 + 1.0

    return objective


def solve_knockout(params: ModelParams, n_probe: int = N_PROBE) -> KnockoutSolution:
    K = params.strike
    bK = phi_basis(params, K)
    objective = knockout_boundary_objective(params)
    problem = RootProblem(objective, SEARCH_LO_FRACTION * K, SEARCH_HI_FRACTION * K)
    candidates = []
    for iv in bracket_roots(problem, n_probe):
        s = refine_root(problem, iv)
        # poles of the coefficients also flip sign; keep genuine roots only
        if abs(objective(s)) < 1e-6:
            candidates.append(s)
    admissible = []
    for s in candidates:
        c1, c2 = knockout_coefficients(params, s, basis_K=bK)
        sol = KnockoutSolution(params, s, c1, c2, tuple(candidates), phi1_at_K=bK.phi1)
        xs = np.linspace(s, K, 66)[1:-1]
        vals = sol.value(xs)
        if np.all(vals >= params.g1(xs) - 1e-12) and np.all(vals >= 0.0):
            admissible.append(sol)
    if admissible:
        if len(candidates) > 1:
            log.info("knock-out boundary candidates %s; taking the largest admissible", candidates)
        return admissible[-1]
    if params.delta == 0.0 and K <= compute_d1(params):
        # zero rebate and L g1 <= 0 on (0, K): exercising at once is optimal
        return KnockoutSolution(params, K, 0.0, 0.0, tuple(candidates), degenerate=True,
                                phi1_at_K=bK.phi1)
    raise NoAdmissibleRoot(f"no admissible knock-out exercise boundary in (0, {K})", candidates)


def knockout_tail_value(params: ModelParams, x: float, _phi1_K: float | None = None) -> float:
    """delta Phi1(x)/Phi1(K) on x >= K: the bounded solution with v(K) = delta."""
    K = params.strike
    if x < K:
        raise ValueError(f"tail branch needs x >= K, got x={x}")
    if params.delta == 0.0:
        return 0.0
    if _phi1_K is None:
        return params.delta * math.exp(log_phi1(params, x) - log_phi1(params, K))
    return params.delta * math.exp(log_phi1(params, x)) / _phi1_K


# --------------------------------------------------------------------------
# sufficient conditions


def compute_d1(params: ModelParams) -> float:
    """Positive root of ``beta x^2 - (alpha - r) x - r (K + delta)``."""
    p = params.alpha - params.r
    q = params.r * (params.strike + params.delta)
    disc = math.sqrt(p * p + 4.0 * params.beta * q)
    if p >= 0:
        return (p + disc) / (2.0 * params.beta)
    # avoid cancellation in p + disc when p < 0
    return 2.0 * q / (disc - p)


def g2_generator_quadratic(params: ModelParams, x):
    """L g2 on x < K: ``beta x^2 - (alpha - r) x - r (K + delta)``."""
    return params.beta * x * x - (params.alpha - params.r) * x - params.r * (params.strike + params.delta)


def check_theorem4(params: ModelParams) -> bool:
    """K <= d1, which makes L(v - g2) >= 0 on (s, K)."""
    return params.strike <= compute_d1(params)


def check_theorem5(params: ModelParams, solution: KnockoutSolution) -> bool:
    """v'(K-) > -1 and 2 beta x + r - alpha > 0 on (s, K).

    The linear expression is increasing in x, so checking it at ``s``
    covers the interval.
    """
    a = solution.slope_at_barrier
    return a > -1.0 and 2.0 * params.beta * solution.boundary_s + params.r - params.alpha > 0.0


# --------------------------------------------------------------------------
# cancellation on an interval


@dataclass(frozen=True)
class CancelIntervalSolution:
    """Game value when the seller cancels on ``[c, K]``.

    Exercise below ``s``, continuation ``C1 Phi1 + C2 Phi2`` on ``(s, c)``
    with smooth fit to ``g1`` at ``s`` and to ``g2`` at ``c``, ``u = g2`` on
    ``[c, K]`` and the rebate tail above ``K``.
    """

    params: ModelParams
    boundary_s: float
    cancel_c: float
    c1: float
    c2: float
    phi1_at_K: float = field(default=1.0, repr=False)

    @_vectorize
    def value(self, x):
        K, delta = self.params.strike, self.params.delta
        if x <= self.boundary_s:
            return K - x
        if x < self.cancel_c:
            p1, p2 = _phi_pair(self.params, x)
            return self.c1 * p1 + self.c2 * p2
        if x < K:
            return K - x + delta
        return knockout_tail_value(self.params, x, _phi1_K=self.phi1_at_K)

    __call__ = value

    @_vectorize
    def slope(self, x):
        K = self.params.strike
        if x <= self.boundary_s:
            return -1.0
        if x < self.cancel_c:
            b = phi_basis(self.params, x)
            return self.c1 * b.dphi1 + self.c2 * b.dphi2
        if x < K:
            return -1.0
        return knockout_tail_value(self.params, x, _phi1_K=self.phi1_at_K) * dlog_phi1(self.params, x)

    def to_dict(self) -> dict:
        return {
            "s": self.boundary_s,
            "c": self.cancel_c,
            "C1": self.c1,
            "C2": self.c2,
            "params": self.params.to_dict(),
        }


def _pasted_coefficients(params: ModelParams, s: float) -> tuple[float, float]:
    """C1, C2 with value K - s and slope -1 at s."""
    b = phi_basis(params, s)
    w = b.wronskian
    rhs_v, rhs_d = params.strike - s, -1.0
    c1 = (rhs_v * b.dphi2 - rhs_d * b.phi2) / w
    c2 = (rhs_d * b.phi1 - rhs_v * b.dphi1) / w
    return c1, c2


def _first_cancel_point(params: ModelParams, s: float, c1: float, c2: float, n_scan: int = 48):
    """First local max of ``u_s(x) + x`` on (s, K), i.e. where u_s' crosses -1 downward."""
    K = params.strike

    def excess_slope(x):
        b = phi_basis(params, x)
        return c1 * b.dphi1 + c2 * b.dphi2 + 1.0

    xs = np.linspace(s, K, n_scan + 1)[1:]
    prev_x, prev_v = None, None
    for x in xs:
        v = excess_slope(x)
        if prev_v is not None and prev_v > 0.0 >= v:
            return refine_root(RootProblem(excess_slope, prev_x, x), (prev_x, x))
        prev_x, prev_v = x, v
    return None


def solve_cancel_interval(params: ModelParams, s_lo: float, n_scan: int = 60) -> CancelIntervalSolution:
    """Solve for ``(s, c)`` with smooth fit at both boundaries.

    For a trial ``s`` the continuation is pasted to ``g1`` at ``s``; the
    cancel point ``c`` is the first local maximum of ``u_s - g2`` and the
    free-boundary condition is ``u_s(c) = g2(c)``.  ``s`` is searched in
    ``(s_lo, K)``.
    """
    K, delta = params.strike, params.delta

    def gap(s):
        c1, c2 = _pasted_coefficients(params, s)
        c = _first_cancel_point(params, s, c1, c2)
        if c is None:
            return math.nan
        p1, p2 = _phi_pair(params, c)
        return c1 * p1 + c2 * p2 - (K - c + delta)

    problem = RootProblem(gap, s_lo, SEARCH_HI_FRACTION * K, abs_tol=1e-13)
    candidates = find_roots(problem, n_scan)
    bK = phi_basis(params, K)
    for s in reversed(candidates):
        c1, c2 = _pasted_coefficients(params, s)
        c = _first_cancel_point(params, s, c1, c2)
        if c is None or not s < c < K:
            continue
        sol = CancelIntervalSolution(params, s, c, c1, c2, phi1_at_K=bK.phi1)
        xs = np.linspace(s, c, 66)[1:-1]
        vals = sol.value(xs)
        if np.all(vals >= params.g1(xs) - 1e-12) and np.all(vals <= params.g2(xs) + 1e-9):
            return sol
    raise NoAdmissibleRoot("no admissible (exercise, cancel) boundary pair", candidates)


# --------------------------------------------------------------------------
# callable put


class Regime(str, Enum):
    AMERICAN_EQUIVALENT = "AmericanEquivalent"
    KNOCKOUT_EQUIVALENT = "KnockoutEquivalent"
    CANCEL_INTERVAL = "CancelInterval"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class CallableSolution:
    regime: Regime
    params: ModelParams
    delta_star: float
    slope_a: float
    d1: float
    theorem4: bool
    theorem5: bool
    american: AmericanSolution
    knockout: KnockoutSolution | None
    game: CancelIntervalSolution | None = None

    @property
    def _active(self):
        if self.regime is Regime.AMERICAN_EQUIVALENT:
            return self.american
        if self.regime is Regime.CANCEL_INTERVAL:
            return self.game
        return self.knockout

    def value(self, x):
        return self._active.value(x)

    __call__ = value

    def slope(self, x):
        return self._active.slope(x)

    @property
    def boundary_s(self) -> float:
        return self._active.boundary_s

    @property
    def cancel_boundary(self) -> float | None:
        """Lower end of the cancellation set; None when the seller never cancels."""
        if self.regime is Regime.AMERICAN_EQUIVALENT:
            return None
        if self.regime is Regime.CANCEL_INTERVAL:
            return self.game.cancel_c
        return self.params.strike

    def to_dict(self) -> dict:
        active = self._active
        return {
            "regime": self.regime.value,
            "s": self.boundary_s,
            "c": self.cancel_boundary,
            "C1": getattr(active, "c1", None),
            "C2": getattr(active, "c2", None),
            "delta_star": self.delta_star,
            "a": self.slope_a,
            "d1": self.d1,
            "theorem4": self.theorem4,
            "theorem5": self.theorem5,
            "params": self.params.to_dict(),
        }


def _exceeds_upper_obstacle(params: ModelParams, sol: KnockoutSolution, n: int = 400) -> bool:
    xs = np.linspace(sol.boundary_s, params.strike, n + 2)[1:-1]
    return bool(np.any(sol.value(xs) > params.g2(xs) + 1e-12))


def solve_callable(params: ModelParams) -> CallableSolution:
    american = solve_american(params)
    K = params.strike
    delta_star = float(american.value(K))
    d1 = compute_d1(params)
    t4 = check_theorem4(params)
    try:
        knockout = solve_knockout(params)
    except NoAdmissibleRoot:
        if params.delta < delta_star - DELTA_STAR_TOL:
            raise
        knockout = None
    slope_a = knockout.slope_at_barrier if knockout is not None else math.nan
    t5 = check_theorem5(params, knockout) if knockout is not None else False
    common = dict(params=params, delta_star=delta_star, slope_a=slope_a, d1=d1,
                  theorem4=t4, theorem5=t5, american=american, knockout=knockout)

    if params.delta >= delta_star - DELTA_STAR_TOL:
        return CallableSolution(Regime.AMERICAN_EQUIVALENT, **common)
    if params.delta == 0.0 and not knockout.degenerate:
        # g1 = g2 below K pins u = g1; the seller cancels at no cost anywhere
        common["knockout"] = KnockoutSolution(params, K, 0.0, 0.0, knockout.candidates,
                                              degenerate=True, phi1_at_K=knockout.phi1_at_K)
        return CallableSolution(Regime.KNOCKOUT_EQUIVALENT, **common)
    if t4 or t5:
        return CallableSolution(Regime.KNOCKOUT_EQUIVALENT, **common)
    if _exceeds_upper_obstacle(params, knockout):
        try:
            game = solve_cancel_interval(params, s_lo=0.5 * knockout.boundary_s)
        except NoAdmissibleRoot as exc:
            warnings.warn(
                f"delta < delta* and neither sufficient condition holds; knock-out value "
                f"breaks the upper obstacle and the two-boundary solve failed ({exc})",
                RegimeWarning,
                stacklevel=2,
            )
            return CallableSolution(Regime.UNDETERMINED, **common)
        return CallableSolution(Regime.CANCEL_INTERVAL, game=game, **common)
    warnings.warn(
        "delta < delta* and neither sufficient condition holds; returning the knock-out "
        "value, which stays below the upper obstacle on a dense check",
        RegimeWarning,
        stacklevel=2,
    )
    return CallableSolution(Regime.UNDETERMINED, **common)
