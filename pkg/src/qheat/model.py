"""Physical model layer: spectra, observables and initial-state parametrizations.

Energy levels are always kept in ascending order. The (alpha, beta) chart of
diagonal initial states is defined for three-level systems only; the edge
states (one vanishing population) sit on the boundary of that chart and get
their own one-parameter family.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateDirection,
    DegenerateSpectrum,
    InvalidSpec,
    NonUnitaryBasis,
    ZeroPopulation,
)
from .linalg import EigenSystem, as_hermitian, eig_hermitian, unitarity_defect

MIN_GAP = 1e-9
ZERO_POPULATION = 1e-300
NORMALIZATION_TOL = 1e-12


def log_sum_exp(x) -> float:
    """log(sum(exp(x))) with a max shift; much cheaper than scipy's on length-N vectors."""
    x = np.asarray(x, dtype=float)
    m = np.max(x)
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(x - m))))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EnergySpectrum:
    """Nondegenerate energy levels E_1 < ... < E_N."""

    levels: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        if levels.ndim != 1 or len(levels) < 2:
            raise InvalidSpec("a spectrum needs at least two levels")
        if not np.all(np.isfinite(levels)):
            raise InvalidSpec("energy levels must be finite")
        if np.min(np.diff(levels)) <= MIN_GAP:
            raise DegenerateSpectrum(
                f"levels must be strictly increasing with gaps > {MIN_GAP}: {levels.tolist()}"
            )
        object.__setattr__(self, "levels", _frozen(levels))

    @classmethod
    def from_eigensystem(cls, es: EigenSystem) -> "EnergySpectrum":
        return cls(es.values)

    @property
    def dim(self) -> int:
        return len(self.levels)

    def _require_three(self):
        if self.dim != 3:
            raise InvalidSpec(f"this operation is defined for three levels only, got N={self.dim}")

    @property
    def gaps(self) -> tuple[float, float, float]:
        """(D1, D2, D3) = (E2 - E1, E3 - E2, E1 - E3); they sum to zero."""
        self._require_three()
        e1, e2, e3 = self.levels
        return (e2 - e1, e3 - e2, e1 - e3)

    @property
    def norm(self) -> float:
        """v with v^2 = 3 (D1^2 + D2^2 + D3^2)."""
        return float(np.sqrt(3.0 * sum(d * d for d in self.gaps)))

    def log_partition(self, beta: float) -> float:
        return log_sum_exp(-beta * self.levels)

    def partition(self, beta: float) -> float:
        """Canonical partition function Z(beta) = sum_k exp(-beta E_k)."""
        return float(np.exp(self.log_partition(beta)))

    def mirrored(self) -> "EnergySpectrum":
        """Spectrum with E'_k = -E_k, relabeled in ascending order."""
        return EnergySpectrum(-self.levels[::-1])


@dataclass(frozen=True)
class Observable:
    """Measured operator: outcomes and eigenvectors written in the energy basis.

    Column k of ``eigenbasis`` holds the components <E_n|Omega_k>.
    """

    outcomes: np.ndarray
    eigenbasis: np.ndarray

    def __post_init__(self):
        outcomes = np.asarray(self.outcomes, dtype=float)
        basis = np.asarray(self.eigenbasis, dtype=complex)
        if basis.shape != (len(outcomes), len(outcomes)):
            raise InvalidSpec(f"eigenbasis shape {basis.shape} does not match {len(outcomes)} outcomes")
        defect = unitarity_defect(basis)
        if defect > 1e-10:
            raise NonUnitaryBasis(f"observable eigenbasis is not unitary (defect {defect:.3e})")
        if len(np.unique(outcomes)) != len(outcomes):
            raise DegenerateSpectrum(f"observable outcomes must be distinct: {outcomes.tolist()}")
        object.__setattr__(self, "outcomes", _frozen(outcomes))
        object.__setattr__(self, "eigenbasis", _frozen(basis))

    @classmethod
    def from_matrix(cls, o, hamiltonian: EigenSystem) -> "Observable":
        """Diagonalize ``o`` (given in the same basis as the Hamiltonian) and
        rewrite its eigenvectors in the Hamiltonian's eigenbasis."""
        es = eig_hermitian(o)
        return cls(es.values, hamiltonian.vectors.conj().T @ es.vectors)

    @property
    def dim(self) -> int:
        return len(self.outcomes)

    def max_energy_overlap(self) -> float:
        """max_{j,k} |<Omega_j|E_k>|^2; close to 1 when O shares an eigenvector with H."""
        return float(np.max(np.abs(self.eigenbasis) ** 2))


@dataclass(frozen=True)
class InitialState:
    """Diagonal populations c_k of rho_0 in the energy eigenbasis."""

    populations: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.populations, dtype=float)
        if c.ndim != 1 or len(c) < 2:
            raise InvalidSpec("populations must be a vector of length >= 2")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise InvalidSpec(f"populations must be finite and non-negative: {c.tolist()}")
        total = float(c.sum())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise InvalidSpec(f"populations must sum to 1 (got {total!r})")
        object.__setattr__(self, "populations", _frozen(c))

    @classmethod
    def normalized(cls, weights: Sequence[float]) -> "InitialState":
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum())

    @property
    def dim(self) -> int:
        return len(self.populations)


@dataclass(frozen=True)
class AlphaBeta:
    """Non-thermal deviation alpha and fictitious inverse temperature beta."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise InvalidSpec(f"alpha and beta must be finite, got ({self.alpha}, {self.beta})")


SQRT2 = np.sqrt(2.0)


def spin1_operators() -> tuple[np.ndarray, np.ndarray]:
    """Spin-1 S_z and S_x in the S_z basis ordered as m = +1, 0, -1."""
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    sx = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / SQRT2
    return sz, sx


def spin1_sy() -> np.ndarray:
    return np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / SQRT2


def _check_spectrum(s: InitialState, e: EnergySpectrum):
    if s.dim != e.dim:
        raise InvalidSpec(f"state has {s.dim} populations but spectrum has {e.dim} levels")


def _positive_populations(s: InitialState) -> np.ndarray:
    c = s.populations
    if np.any(c <= ZERO_POPULATION):
        raise ZeroPopulation(
            f"populations {c.tolist()} contain a zero; use an edge state instead of (alpha, beta)"
        )
    return c


def partial_temperatures(s: InitialState, e: EnergySpectrum) -> tuple[float, float, float]:
    """(b1, b2, b3) from the population ratios c2/c1, c3/c2 and c1/c3."""
    _check_spectrum(s, e)
    d1, d2, d3 = e.gaps
    lc = np.log(_positive_populations(s))
    return (
        float(-(lc[1] - lc[0]) / d1),
        float(-(lc[2] - lc[1]) / d2),
        float(-(lc[0] - lc[2]) / d3),
    )


def nonthermal_direction(e: EnergySpectrum) -> np.ndarray:
    """d = (D3 - D2, D1 - D3, D2 - D1), the direction scaled by alpha/v."""
    d1, d2, d3 = e.gaps
    return np.array([d3 - d2, d1 - d3, d2 - d1])


def _alphabeta_exponents(ab: AlphaBeta, e: EnergySpectrum) -> np.ndarray:
    e1, e2, e3 = e.levels
    squares = np.array([(e2 - e3) ** 2, (e3 - e1) ** 2, (e1 - e2) ** 2])
    return -ab.beta * e.levels + (ab.alpha / e.norm) * squares


def log_pseudo_partition(ab: AlphaBeta, e: EnergySpectrum) -> float:
    e._require_three()
    return log_sum_exp(_alphabeta_exponents(ab, e))


def pseudo_partition(ab: AlphaBeta, e: EnergySpectrum) -> float:
    """Normalization Z~(alpha, beta) of the (alpha, beta) populations."""
    return float(np.exp(log_pseudo_partition(ab, e)))


def alphabeta_to_populations(ab: AlphaBeta, e: EnergySpectrum) -> InitialState:
    e._require_three()
    x = _alphabeta_exponents(ab, e)
    w = np.exp(x - x.max())
    return InitialState(w / w.sum())


def populations_to_alphabeta(s: InitialState, e: EnergySpectrum) -> AlphaBeta:
    """Invert the (alpha, beta) chart by projecting b onto (1,1,1) and d."""
    b = np.array(partial_temperatures(s, e))
    d = nonthermal_direction(e)
    dd = float(d @ d)
    if dd == 0.0:
        raise DegenerateDirection("non-thermal direction vanishes for this spectrum")
    beta = float(b.mean())
    alpha = e.norm * float((b - beta) @ d) / dd
    residual = float(np.max(np.abs(b - beta - (alpha / e.norm) * d)))
    scale = max(1.0, float(np.max(np.abs(b))))
    if residual > 1e-9 * scale:
        raise ArithmeticError(f"partial temperatures off the (alpha, beta) plane (residual {residual:.3e})")
    return AlphaBeta(alpha, beta)


def thermal_state(beta: float, e: EnergySpectrum) -> InitialState:
    """Gibbs populations exp(-beta E_k) / Z(beta)."""
    x = -beta * e.levels
    w = np.exp(x - x.max())
    return InitialState(w / w.sum())


EDGE_PAIRS = {"12": (0, 1), "13": (0, 2), "23": (1, 2)}


def edge_state(q: float, pair: str | int | tuple[int, int]) -> InitialState:
    """Three-level state q|E_i><E_i| + (1 - q)|E_j><E_j| for the pair (i, j)."""
    if isinstance(pair, tuple):
        pair = "".join(str(k) for k in pair)
    key = str(pair)
    if key not in EDGE_PAIRS:
        raise InvalidSpec(f"pair must be one of {sorted(EDGE_PAIRS)}, got {pair!r}")
    if not 0.0 <= q <= 1.0:
        raise InvalidSpec(f"q must lie in [0, 1], got {q}")
    i, j = EDGE_PAIRS[key]
    c = np.zeros(3)
    c[i] = q
    c[j] = 1.0 - q
    return InitialState(c)
