"""Bracketing and refinement of scalar roots for the free-boundary equations."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize

from .exceptions import IterationLimitError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RootProblem:
    objective: Callable[[float], float]
    search_lo: float
    search_hi: float
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if not self.search_lo < self.search_hi:
            raise ValueError("search_lo must be < search_hi")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


def _safe_eval(f, x):
    try:
        val = float(f(x))
    except (ArithmeticError, ValueError) as exc:
        log.debug("objective failed at %r: %s", x, exc)
        return math.nan
    return val


def bracket_roots(problem: RootProblem, n_probe: int = 400) -> list[tuple[float, float]]:
    """All adjacent probe pairs with a sign change.

    Probes are log-spaced when ``search_lo > 0`` and linear otherwise.
    Probe points where the objective fails or is non-finite are skipped.
    """
    lo, hi = problem.search_lo, problem.search_hi
    if lo > 0:
        xs = np.geomspace(lo, hi, n_probe)
    else:
        xs = np.linspace(lo, hi, n_probe)
    vals = [_safe_eval(problem.objective, x) for x in xs]
    out = []
    prev_x, prev_v = None, None
    for x, v in zip(xs, vals):
        if not math.isfinite(v):
            continue
        if v == 0.0:
            # an exact hit; report a degenerate bracket around it
            out.append((float(x), float(x)))
            prev_x, prev_v = None, None
            continue
        if prev_v is not None and (prev_v < 0) != (v < 0):
            out.append((float(prev_x), float(x)))
        prev_x, prev_v = x, v
    return out


def refine_root(problem: RootProblem, interval: tuple[float, float]) -> float:
    """Brent's method inside a sign-change interval.

    Never evaluates outside ``interval``.
    """
    lo, hi = interval
    if lo == hi:
        return lo
    try:
        root, info = optimize.brentq(
            problem.objective,
            lo,
            hi,
            xtol=problem.abs_tol,
            rtol=max(problem.rel_tol, 4 * np.finfo(float).eps),
            maxiter=problem.max_iter,
            full_output=True,
            disp=False,
        )
    except ValueError as exc:
        raise ValueError(f"interval {interval} does not bracket a sign change") from exc
    if not info.converged:
        raise IterationLimitError(
            f"root refinement did not converge in {problem.max_iter} iterations "
            f"({info.flag})"
        )
    return root


def find_roots(problem: RootProblem, n_probe: int = 400) -> list[float]:
    """Bracket then refine every root on the search interval."""
    return [refine_root(problem, iv) for iv in bracket_roots(problem, n_probe)]
