"""Kummer's confluent hypergeometric function M(a, b; z) and log-gamma.

Everything here is scalar and pure.  The main entry point is
:func:`kummer_m_log`, which returns ``(sign, log|M|)`` and therefore never
overflows; :func:`kummer_m` exponentiates it.  Evaluation paths:

* ``z == 0``: exactly 1.
* ``z < 0``: Kummer's transformation ``M(a,b;z) = e^z M(b-a,b;-z)``, which
  turns an alternating series into a positive one.
* ``0 < z <= 60``: power series with the term recurrence
  ``t_{n+1} = t_n (a+n) z / ((b+n)(n+1))`` and exactly rounded summation.
* ``z > 60``: the large-argument expansion, truncated at its smallest
  term, when that term certifies ~1e-10 accuracy; otherwise the series
  with running rescaling.

The quadrature path :func:`kummer_m_quadrature` is an independent check
only.
"""

from __future__ import annotations

import math

from scipy import integrate

from .exceptions import SeriesConvergenceError, SpecialFunctionDomainError

POLE_TOL = 1e-8
ASYMPTOTIC_SWITCH = 60.0
MAX_TERMS = 10_000

# Lanczos approximation, g = 7, n = 9.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# rescale threshold for the series accumulator
_BIG = 1e250
_LOG_BIG = math.log(_BIG)


def _near_nonpositive_integer(x: float, tol: float = POLE_TOL) -> bool:
    return x <= tol and abs(x - round(x)) < tol


def _check_args(a: float, b: float, z: float) -> None:
    if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(z)):
        raise SpecialFunctionDomainError(f"non-finite argument a={a}, b={b}, z={z}")
    if _near_nonpositive_integer(b):
        raise SpecialFunctionDomainError(
            f"b={b!r} is within {POLE_TOL:g} of a non-positive integer (series pole)"
        )


def _lanczos_log_gamma(x: float) -> float:
    # valid for x >= 0.5
    x -= 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (x + 0.5) * math.log(t) - t + math.log(acc)


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for ``x > 0``.

    Uses the Lanczos approximation (g=7, nine coefficients), with the
    reflection formula below 1/2.
    """
    if not x > 0.0 or not math.isfinite(x):
        raise SpecialFunctionDomainError(f"log_gamma requires finite x > 0, got {x!r}")
    if x < 0.5:
        # Gamma(x) Gamma(1-x) = pi / sin(pi x), and sin(pi x) > 0 on (0, 1/2)
        return math.log(math.pi / math.sin(math.pi * x)) - _lanczos_log_gamma(1.0 - x)
    return _lanczos_log_gamma(x)


def _log_gamma_signed(x: float) -> tuple[int, float]:
    """(sign of Gamma(x), log|Gamma(x)|) for any non-pole real x."""
    if x > 0.0:
        return 1, log_gamma(x)
    if x == round(x):
        raise SpecialFunctionDomainError(f"Gamma has a pole at {x!r}")
    s = math.sin(math.pi * x)
    sign_g1, lg1 = _log_gamma_signed(1.0 - x)
    sign = (1 if s > 0 else -1) * sign_g1
    return sign, math.log(math.pi) - math.log(abs(s)) - lg1


def _series_log(a: float, b: float, z: float) -> tuple[int, float]:
    """Power series for M(a,b;z), returned as (sign, log|M|)."""
    terms = [1.0]
    t = 1.0
    running = 1.0
    log_scale = 0.0
    # before these indices the term ratio can still grow or flip sign
    settle = max(0.0, -b, -a) + 2.0
    small_run = 0
    for n in range(MAX_TERMS):
        ratio = (a + n) * z / ((b + n) * (n + 1))
        t *= ratio
        if t == 0.0:
            break
        terms.append(t)
        running += t
        if abs(running) > _BIG or abs(t) > _BIG:
            terms = [u / _BIG for u in terms]
            t /= _BIG
            running /= _BIG
            log_scale += _LOG_BIG
        if n > settle and abs(ratio) < 1.0 and abs(t) < 1e-16 * abs(running):
            small_run += 1
            if small_run >= 3:
                break
        else:
            small_run = 0
    else:
        raise SeriesConvergenceError(
            f"Kummer series did not converge in {MAX_TERMS} terms (a={a}, b={b}, z={z})"
        )
    total = math.fsum(terms)
    if total == 0.0:
        return 0, -math.inf
    return (1 if total > 0 else -1), math.log(abs(total)) + log_scale


def _asymptotic_log(a: float, b: float, z: float) -> tuple[int, float] | None:
    """Large-z expansion; None when it cannot reach ~1e-10 accuracy."""
    if a <= 0.0 and a == round(a):
        # M is a polynomial; the series is exact and cheap
        return None
    total = 1.0
    term = 1.0
    best = math.inf
    for n in range(200):
        nxt = term * (b - a + n) * (1.0 - a + n) / ((n + 1) * z)
        if nxt == 0.0:
            best = 0.0
            break
        if abs(nxt) >= abs(term):
            # smallest term reached; truncate here
            best = abs(term)
            break
        term = nxt
        total += term
        best = abs(term)
    if best > 1e-10 * abs(total) or total == 0.0:
        return None
    sign_b, lgb = _log_gamma_signed(b)
    sign_a, lga = _log_gamma_signed(a)
    sign = sign_b * sign_a * (1 if total > 0 else -1)
    return sign, lgb - lga + z + (a - b) * math.log(z) + math.log(abs(total))


def kummer_m_log(a: float, b: float, z: float) -> tuple[int, float]:
    """Return ``(sign, log|M(a,b;z)|)`` so that ``sign*exp(log) == M``."""
    _check_args(a, b, z)
    if z == 0.0:
        return 1, 0.0
    if z < 0.0:
        sign, lm = kummer_m_log(b - a, b, -z)
        return sign, lm + z
    if z > ASYMPTOTIC_SWITCH:
        res = _asymptotic_log(a, b, z)
        if res is not None:
            return res
    return _series_log(a, b, z)


def kummer_m(a: float, b: float, z: float) -> float:
    """Kummer's function M(a, b; z).

    Raises ``OverflowError`` when the result is not representable; use
    :func:`kummer_m_log` in that case.
    """
    sign, lm = kummer_m_log(a, b, z)
    if sign == 0:
        return 0.0
    if lm > 709.0:
        raise OverflowError(f"M({a}, {b}; {z}) overflows float64 (log|M| = {lm:.6g})")
    return sign * math.exp(lm)


def kummer_m_dz(a: float, b: float, z: float) -> float:
    """d/dz M(a,b;z) = (a/b) M(a+1, b+1; z)."""
    _check_args(a, b, z)
    if a == 0.0:
        return 0.0
    return (a / b) * kummer_m(a + 1.0, b + 1.0, z)


def kummer_m_quadrature(a: float, b: float, z: float) -> float:
    """M(a,b;z) from its Euler integral; test oracle, needs ``b > a > 0``.

    The endpoint singularities ``u^(a-1) (1-u)^(b-a-1)`` are handled by
    QUADPACK's algebraic weight, and the gamma prefactor comes from
    ``math.lgamma`` so this path shares nothing with the series code.
    """
    if not (b > a > 0.0):
        raise SpecialFunctionDomainError(
            f"integral representation requires b > a > 0, got a={a}, b={b}"
        )
    shift = max(z, 0.0)
    val, _ = integrate.quad(
        lambda u: math.exp(u * z - shift),
        0.0,
        1.0,
        weight="alg",
        wvar=(a - 1.0, b - a - 1.0),
        epsabs=0.0,
        epsrel=1e-13,
        limit=200,
    )
    log_pref = math.lgamma(b) - math.lgamma(a) - math.lgamma(b - a)
    return math.exp(log_pref + shift) * val
