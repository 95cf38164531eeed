"""Quantum-heat statistics: characteristic functions and effective temperatures.

G(eps) = <exp(-eps Q)> is convex with G(0) = 1, so whenever G'(0) != 0 it
crosses 1 exactly once more, at beta_eff. The root finder below exploits
that shape: expand a bracket geometrically away from zero on the downhill
side, then bisect.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import BracketNotFound, InvalidSpec
from .model import (
    AlphaBeta,
    EnergySpectrum,
    InitialState,
    log_pseudo_partition,
    log_sum_exp,
    populations_to_alphabeta,
)
from .protocol import JointOutcomeDistribution

FD_STEP = 1e-5
DEGENERATE_SLOPE = 1e-8
BRACKET_START = 1e-6
BRACKET_CAP = 1e3
ROOT_XTOL = 1e-12
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class CharacteristicCurve:
    epsilons: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None
    provenance: str = "exact"


def _heat_exponents(joint: JointOutcomeDistribution, eps: float) -> np.ndarray:
    return -eps * joint.heats()


def char_from_joint(joint: JointOutcomeDistribution, eps):
    """G(eps) = sum_{m,n} p[m, n] exp(-eps (E_m - E_n)), evaluated in log space."""
    eps_arr = np.atleast_1d(np.asarray(eps, dtype=float))
    with np.errstate(divide="ignore"):
        log_p = np.log(joint.p)
    out = np.array([np.exp(log_sum_exp(_heat_exponents(joint, x) + log_p)) for x in eps_arr])
    return float(out[0]) if np.ndim(eps) == 0 else out


def char_stderr(joint: JointOutcomeDistribution, eps):
    """Standard error of the empirical G from the trajectory-level variance of exp(-eps Q)."""
    if joint.realizations is None:
        raise InvalidSpec("standard errors need an empirical (Monte Carlo) distribution")
    R = joint.realizations
    eps_arr = np.atleast_1d(np.asarray(eps, dtype=float))
    out = np.empty(len(eps_arr))
    for i, x in enumerate(eps_arr):
        w = np.exp(_heat_exponents(joint, x))
        g = float(np.sum(joint.p * w))
        var = float(np.sum(joint.p * (w - g) ** 2)) * R / max(R - 1, 1)
        out[i] = np.sqrt(var / R)
    return float(out[0]) if np.ndim(eps) == 0 else out


def characteristic_curve(joint: JointOutcomeDistribution, epsilons) -> CharacteristicCurve:
    eps = np.asarray(epsilons, dtype=float)
    values = char_from_joint(joint, eps)
    if joint.source == "exact":
        return CharacteristicCurve(eps, values, None, "exact")
    return CharacteristicCurve(eps, values, char_stderr(joint, eps), "empirical")


def char_large_m(s: InitialState, e: EnergySpectrum, eps: float) -> float:
    """Large-M G(eps) for a final state uniform over the N levels:
    (1/N) sum_n exp(-eps E_n) * sum_m c_m exp(eps E_m)."""
    c = s.populations
    with np.errstate(divide="ignore"):
        log_c = np.log(c)
    return float(
        np.exp(log_sum_exp(-eps * e.levels) - np.log(e.dim) + log_sum_exp(eps * e.levels + log_c))
    )


def char_asymptotic(ab: AlphaBeta, e: EnergySpectrum, eps: float) -> float:
    """Large-M G(eps) as Z(eps)/Z(0) * Z~(alpha, beta - eps)/Z~(alpha, beta)."""
    shifted = AlphaBeta(ab.alpha, ab.beta - eps)
    log_g = (
        e.log_partition(eps)
        - e.log_partition(0.0)
        + log_pseudo_partition(shifted, e)
        - log_pseudo_partition(ab, e)
    )
    return float(np.exp(log_g))


@dataclass(frozen=True)
class BetaEffResult:
    """Nontrivial root of G(eps) = 1.

    ``degenerate`` marks G'(0) = 0, where zero is the only root; ``value``
    is then 0.0 and must not be read as an effective temperature.
    """

    value: float
    degenerate: bool
    bracket: tuple[float, float]
    residual: float
    slope_at_zero: float


def beta_eff(
    g: Callable[[float], float],
    search_range: tuple[float, float] = (-BRACKET_CAP, BRACKET_CAP),
    residual_tol: float = RESIDUAL_TOL,
) -> BetaEffResult:
    """Solve G(eps) = 1 for eps != 0 with a bracket-then-bisect search."""
    g0 = g(0.0)
    if abs(g0 - 1.0) > 1e-9:
        raise InvalidSpec(f"G(0) must be 1, got {g0!r}")
    slope = (g(FD_STEP) - g(-FD_STEP)) / (2 * FD_STEP)
    if abs(slope) < DEGENERATE_SLOPE:
        return BetaEffResult(0.0, True, (0.0, 0.0), 0.0, slope)

    # G dips below 1 on the side where it decreases
    side = -np.sign(slope)
    limit = search_range[1] if side > 0 else -search_range[0]
    inner, step = 0.0, BRACKET_START
    while True:
        x = side * step
        gx = g(x)
        if gx > 1.0 + 1e-12:
            break
        inner = x
        if step >= limit:
            raise BracketNotFound(
                f"G stays <= 1 up to eps = {x:g} (G = {gx:.6g})", boundary=x, value=gx
            )
        step = min(2 * step, limit)
    outer = x

    lo, hi = inner, outer
    while abs(hi - lo) > ROOT_XTOL:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if g(mid) > 1.0:
            hi = mid
        else:
            lo = mid
    candidates = [x for x in (lo, hi) if x != 0.0]
    root = min(candidates, key=lambda x: abs(g(x) - 1.0))
    residual = abs(g(root) - 1.0)
    if residual > residual_tol:
        raise BracketNotFound(
            f"bisection converged to eps = {root!r} with residual {residual:.3e}",
            boundary=root,
            value=g(root),
        )
    return BetaEffResult(float(root), False, (min(inner, outer), max(inner, outer)), residual, slope)


def beta_eff_alphabeta(ab: AlphaBeta, e: EnergySpectrum, **kw) -> BetaEffResult:
    """beta_eff of the large-M closed form for an (alpha, beta) initial state."""
    return beta_eff(lambda x: char_asymptotic(ab, e, x), **kw)


def beta_eff_state(s: InitialState, e: EnergySpectrum, **kw) -> BetaEffResult:
    """beta_eff of the large-M closed form for arbitrary populations (edge states included)."""
    return beta_eff(lambda x: char_large_m(s, e, x), **kw)


def beta_eff_joint(joint: JointOutcomeDistribution, residual_tol: float | None = None, **kw) -> BetaEffResult:
    """beta_eff of an exact or empirical joint distribution.

    For empirical data the residual tolerance defaults to three standard
    errors of G at the root.
    """
    g = lambda x: char_from_joint(joint, x)
    if residual_tol is None and joint.source != "exact":
        res = beta_eff(g, residual_tol=np.inf, **kw)
        tol = 3.0 * char_stderr(joint, res.value)
        if res.residual > tol:
            raise BracketNotFound(f"empirical residual {res.residual:.3e} exceeds 3 stderr ({tol:.3e})")
        return res
    return beta_eff(g, residual_tol=RESIDUAL_TOL if residual_tol is None else residual_tol, **kw)


def _phi(y):
    """expm1(y) / y with the removable singularity filled in."""
    y = float(y)
    return 1.0 if y == 0.0 else np.expm1(y) / y


def beta_bar_asymptotic(e: EnergySpectrum) -> float:
    """Plateau of beta_eff for large positive alpha: the nonzero root of
    exp(-b (E1 - E2)) + exp(-b (E3 - E2)) = 2, or 0 for E3 - E2 = E2 - E1."""
    e._require_three()
    e1, e2, e3 = e.levels
    lo_gap, hi_gap = e1 - e2, e3 - e2
    total = lo_gap + hi_gap
    if abs(total) <= 1e-14 * max(abs(lo_gap), abs(hi_gap)):
        return 0.0

    # divided by b to remove the trivial root at b = 0
    def h(b):
        return -lo_gap * _phi(-b * lo_gap) - hi_gap * _phi(-b * hi_gap)

    bound = np.log(2.0) / (-lo_gap) if total > 0 else -np.log(2.0) / hi_gap
    return float(brentq(h, 0.0, bound, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def beta_bar_limits(e: EnergySpectrum) -> tuple[float, float]:
    """Open interval (-ln2/(E3 - E2), ln2/(E2 - E1)) containing the plateau value."""
    e1, e2, e3 = e.levels
    return (-np.log(2.0) / (e3 - e2), np.log(2.0) / (e2 - e1))


def slope_r(e: EnergySpectrum) -> float:
    """Asymptotic slope of beta_eff in alpha for large negative alpha."""
    e1, e2, e3 = e.levels
    return float((e1 + e3 - 2 * e2) / e.norm)


def edge_alphabeta_divergence(q: float, e: EnergySpectrum, Y: float) -> AlphaBeta:
    """(alpha, beta) of the state (q(1 - e^-Y), e^-Y, (1 - q)(1 - e^-Y)).

    As Y grows this approaches the edge state with c_2 = 0 along a line
    with alpha / Y -> -v / (3 D1 D2) and beta / alpha -> -r, both with
    O(1/Y) corrections.
    """
    if not 0.0 < q < 1.0:
        raise InvalidSpec(f"q must lie in (0, 1), got {q}")
    if Y <= 0:
        raise InvalidSpec(f"Y must be positive, got {Y}")
    small = np.exp(-Y)
    s = InitialState(np.array([q * (1 - small), small, (1 - q) * (1 - small)]))
    return populations_to_alphabeta(s, e)


def shannon_entropy(s: InitialState) -> float:
    c = s.populations[s.populations > 0]
    return float(-np.sum(c * np.log(c)))
