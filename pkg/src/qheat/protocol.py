"""Two-point energy measurement with M intermediate projective measurements.

The protocol is a Markov chain on measurement outcomes: an energy outcome n,
then M outcomes of the observable O, then a final energy outcome m. Each
step is a unistochastic matrix, so the exact joint law p[m, n] is a matrix
product and trajectories are sampled by inverse-CDF draws along the chain.

Monte Carlo seeding is counter based: trajectory t draws its uniforms from a
Philox stream keyed by the master seed and positioned at block t, so results
do not depend on how trajectories are split across workers.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidSpec
from .linalg import EigenSystem, overlap_stochastic, propagator
from .model import InitialState, Observable

log = logging.getLogger(__name__)

LOCKING_TOL = 1e-10
BLOCK_SIZE = 1 << 14


@dataclass(frozen=True)
class WaitingTimeSpec:
    """I.i.d. waiting times between consecutive measurements.

    ``kind`` is ``"fixed"`` (uses ``tau``), ``"uniform"`` (``tau_min``,
    ``tau_max``) or ``"exponential"`` (``mean``).
    """

    kind: str = "fixed"
    tau: float | None = None
    tau_min: float | None = None
    tau_max: float | None = None
    mean: float | None = None

    def __post_init__(self):
        if self.kind == "fixed":
            _positive("tau", self.tau)
        elif self.kind == "uniform":
            _positive("tau_min", self.tau_min)
            _positive("tau_max", self.tau_max)
            if self.tau_max < self.tau_min:
                raise InvalidSpec(f"tau_max ({self.tau_max}) < tau_min ({self.tau_min})")
        elif self.kind == "exponential":
            _positive("mean", self.mean)
        else:
            raise InvalidSpec(f"unknown waiting-time kind {self.kind!r}")

    @classmethod
    def fixed(cls, tau: float) -> "WaitingTimeSpec":
        return cls("fixed", tau=tau)

    @classmethod
    def uniform(cls, tau_min: float, tau_max: float) -> "WaitingTimeSpec":
        return cls("uniform", tau_min=tau_min, tau_max=tau_max)

    @classmethod
    def exponential(cls, mean: float) -> "WaitingTimeSpec":
        return cls("exponential", mean=mean)

    @property
    def is_random(self) -> bool:
        return self.kind != "fixed"

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms in [0, 1) to waiting times by inverse CDF."""
        u = np.asarray(u, dtype=float)
        if self.kind == "fixed":
            return np.full(u.shape, float(self.tau))
        if self.kind == "uniform":
            return self.tau_min + (self.tau_max - self.tau_min) * u
        return -self.mean * np.log1p(-u)


def _positive(name, value):
    if value is None or not np.isfinite(value) or value <= 0:
        raise InvalidSpec(f"waiting time {name} must be a positive number, got {value!r}")


@dataclass(frozen=True)
class MeasurementChain:
    """Transition matrices of one protocol realization.

    ``first[j, n]`` takes energy outcome n to O outcome j, each ``middle``
    matrix takes O outcome k to O outcome j, and ``last[m, j]`` takes the
    final O outcome to the final energy outcome. With M = 0 all three are
    absent and the two energy measurements coincide.
    """

    energies: np.ndarray
    first: np.ndarray | None
    middle: tuple[np.ndarray, ...]
    last: np.ndarray | None
    locked: bool = False

    @property
    def n_measurements(self) -> int:
        return 0 if self.first is None else len(self.middle) + 1

    @property
    def dim(self) -> int:
        return len(self.energies)

    @property
    def matrices(self) -> list[np.ndarray]:
        if self.first is None:
            return []
        return [self.first, *self.middle, self.last]


def build_chain(
    h: EigenSystem,
    o: Observable,
    taus: Sequence[float],
    evolve_before_first: bool = True,
) -> MeasurementChain:
    """Assemble the chain for the waiting times ``taus`` (one per O measurement).

    With ``evolve_before_first`` the system evolves for ``taus[0]`` between
    the first energy measurement and the first O measurement, and the final
    energy measurement follows the last O measurement immediately. Otherwise
    the first O measurement is immediate and ``taus[-1]`` elapses before the
    final energy measurement. Either way the evolution next to an energy
    measurement only adds a phase, so the two placements give the same chain.
    """
    taus = [float(t) for t in taus]
    if any(not np.isfinite(t) or t <= 0 for t in taus):
        raise InvalidSpec(f"waiting times must be positive, got {taus}")
    if o.dim != h.dim:
        raise InvalidSpec(f"observable dimension {o.dim} != Hamiltonian dimension {h.dim}")

    energy_basis = h.vectors
    o_basis = h.vectors @ o.eigenbasis
    locked = o.max_energy_overlap() > 1 - LOCKING_TOL
    if locked:
        log.warning("observable shares an eigenvector with H; the large-M uniform limit does not apply")

    if not taus:
        return MeasurementChain(h.values, None, (), None, locked)

    if evolve_before_first:
        first = overlap_stochastic(o_basis, propagator(h, taus[0]) @ energy_basis)
        between = taus[1:]
        last = overlap_stochastic(energy_basis, o_basis)
    else:
        first = overlap_stochastic(o_basis, energy_basis)
        between = taus[:-1]
        last = overlap_stochastic(energy_basis, propagator(h, taus[-1]) @ o_basis)
    middle = tuple(overlap_stochastic(o_basis, propagator(h, t) @ o_basis) for t in between)
    return MeasurementChain(h.values, first, middle, last, locked)


@dataclass(frozen=True)
class JointOutcomeDistribution:
    """p[m, n] = P(final energy E_m and initial energy E_n).

    ``source`` is ``"exact"`` or ``"monte-carlo"``; empirical distributions
    also carry the integer ``counts`` and the number of ``realizations``.
    """

    p: np.ndarray
    energies: np.ndarray
    source: str = "exact"
    realizations: int | None = None
    counts: np.ndarray | None = None

    @property
    def initial_marginal(self) -> np.ndarray:
        return self.p.sum(axis=0)

    @property
    def final_marginal(self) -> np.ndarray:
        return self.p.sum(axis=1)

    def heats(self) -> np.ndarray:
        """Q[m, n] = E_m - E_n."""
        return self.energies[:, None] - self.energies[None, :]


def exact_joint(s: InitialState, chain: MeasurementChain) -> JointOutcomeDistribution:
    if s.dim != chain.dim:
        raise InvalidSpec(f"state has {s.dim} populations, chain acts on {chain.dim} levels")
    p = np.diag(s.populations)
    for mat in chain.matrices:
        p = mat @ p
    return JointOutcomeDistribution(p, chain.energies, "exact")


@dataclass(frozen=True)
class TrajectoryRecord:
    first_index: int
    final_index: int
    heat: float
    intermediate: tuple[int, ...] = ()


def _draw(cdf_columns: np.ndarray, idx, u):
    """Inverse-CDF draw from the columns ``idx`` of a cumulative matrix."""
    col = cdf_columns[:, idx]
    k = np.sum(col <= u, axis=0)
    return np.minimum(k, cdf_columns.shape[0] - 1)


def sample_trajectory(stream: np.random.Generator, s: InitialState, chain: MeasurementChain) -> TrajectoryRecord:
    """Sample one realization, drawing one uniform per measurement from ``stream``."""
    c = np.cumsum(s.populations)
    n = int(_draw(c[:, None], 0, stream.random()))
    k = n
    path = []
    for mat in chain.matrices:
        k = int(_draw(np.cumsum(mat, axis=0), k, stream.random()))
        path.append(k)
    m = k
    intermediate = tuple(path[:-1])
    return TrajectoryRecord(n, m, float(chain.energies[m] - chain.energies[n]), intermediate)


def uniforms_per_trajectory(n_measurements: int) -> int:
    """Draw budget of one trajectory, padded to whole Philox blocks of four."""
    raw = 2 * n_measurements + 2
    return -(-raw // 4) * 4


def trajectory_stream(master_seed: int, index: int, n_measurements: int) -> np.random.Generator:
    """Generator positioned at the first uniform of trajectory ``index``."""
    bits = np.random.Philox(key=int(master_seed))
    bits.advance(index * uniforms_per_trajectory(n_measurements) // 4)
    return np.random.Generator(bits)


def _block_uniforms(master_seed: int, start: int, count: int, n_measurements: int) -> np.ndarray:
    stride = uniforms_per_trajectory(n_measurements)
    return trajectory_stream(master_seed, start, n_measurements).random((count, stride))


@dataclass(frozen=True)
class _Job:
    populations: np.ndarray
    hamiltonian: EigenSystem
    observable: Observable
    wspec: WaitingTimeSpec
    n_measurements: int
    master_seed: int
    evolve_before_first: bool


def _random_tau_block(job: _Job, u: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Walk a block of trajectories whose waiting times differ per trajectory.

    Works in the energy eigenbasis, where U(tau) is a diagonal phase.
    """
    M = job.n_measurements
    E = job.hamiltonian.values
    W = job.observable.eigenbasis
    dim = len(E)
    identity = np.eye(dim)
    taus = job.wspec.from_uniforms(u[:, M + 2 : 2 * M + 2])
    # state vectors in the energy basis
    psi = identity[states]
    k = states
    for i in range(M + 1):
        to_energy = i == M
        target = identity if to_energy else W
        evolve = (i < M) if job.evolve_before_first else (i > 0)
        if evolve:
            t = taus[:, i if job.evolve_before_first else i - 1]
            psi = psi * np.exp(-1j * E[None, :] * t[:, None])
        probs = np.abs(psi @ target.conj()) ** 2
        cdf = np.cumsum(probs, axis=1)
        k = np.minimum(np.sum(cdf <= u[:, i + 1 : i + 2], axis=1), dim - 1)
        psi = target.T[k]
    return k


def _sample_block(job: _Job, start: int, count: int) -> np.ndarray:
    """Joint counts[m, n] for trajectories start .. start + count - 1."""
    M = job.n_measurements
    u = _block_uniforms(job.master_seed, start, count, M)
    dim = len(job.populations)
    n = _draw(np.cumsum(job.populations)[:, None], np.zeros(count, dtype=int), u[:, 0])
    if M == 0:
        m = n
    elif job.wspec.is_random:
        m = _random_tau_block(job, u, n)
    else:
        chain = build_chain(job.hamiltonian, job.observable, [job.wspec.tau] * M, job.evolve_before_first)
        k = n
        for i, mat in enumerate(chain.matrices):
            k = _draw(np.cumsum(mat, axis=0), k, u[:, i + 1])
        m = k
    counts = np.zeros((dim, dim), dtype=np.int64)
    np.add.at(counts, (m, n), 1)
    return counts


def _sample_blocks(job: _Job, blocks: list[tuple[int, int]]) -> np.ndarray:
    dim = len(job.populations)
    total = np.zeros((dim, dim), dtype=np.int64)
    for start, count in blocks:
        total += _sample_block(job, start, count)
    return total


@dataclass(frozen=True)
class MonteCarloResult:
    joint: JointOutcomeDistribution
    heat_histogram: list[tuple[float, int]]
    master_seed: int
    workers: int
    wspec: WaitingTimeSpec = field(default_factory=lambda: WaitingTimeSpec.fixed(1.0))


def heat_histogram(counts: np.ndarray, energies: np.ndarray) -> list[tuple[float, int]]:
    """One bin per distinct heat value E_m - E_n, sorted by heat."""
    bins: dict[float, int] = {}
    dim = len(energies)
    for m in range(dim):
        for n in range(dim):
            q = float(energies[m] - energies[n])
            key = round(q, 12) + 0.0
            bins[key] = bins.get(key, 0) + int(counts[m, n])
    return sorted(bins.items())


def run_monte_carlo(
    s: InitialState,
    h: EigenSystem,
    o: Observable,
    wspec: WaitingTimeSpec,
    n_measurements: int,
    realizations: int,
    master_seed: int = 0,
    workers: int = 1,
    evolve_before_first: bool = True,
) -> MonteCarloResult:
    """Sample ``realizations`` trajectories and tabulate the joint outcome counts.

    Results are bit-identical for any ``workers`` given the same seed.
    """
    if realizations < 1:
        raise InvalidSpec(f"realizations must be >= 1, got {realizations}")
    if n_measurements < 0:
        raise InvalidSpec(f"M must be >= 0, got {n_measurements}")
    if s.dim != h.dim:
        raise InvalidSpec(f"state has {s.dim} populations, Hamiltonian has dimension {h.dim}")
    if not 0 <= master_seed < 2**64:
        raise InvalidSpec(f"master_seed must be an unsigned 64-bit integer, got {master_seed}")
    job = _Job(np.asarray(s.populations), h, o, wspec, n_measurements, int(master_seed), evolve_before_first)
    blocks = [(t, min(BLOCK_SIZE, realizations - t)) for t in range(0, realizations, BLOCK_SIZE)]

    workers = max(1, int(workers))
    if workers == 1 or len(blocks) == 1:
        counts = _sample_blocks(job, blocks)
    else:
        shards = [blocks[i::workers] for i in range(workers)]
        shards = [sh for sh in shards if sh]
        with ProcessPoolExecutor(max_workers=len(shards)) as pool:
            parts = list(pool.map(_sample_blocks, [job] * len(shards), shards))
        counts = sum(parts[1:], parts[0])

    p = counts / realizations
    joint = JointOutcomeDistribution(p, np.asarray(h.values), "monte-carlo", realizations, counts)
    return MonteCarloResult(joint, heat_histogram(counts, h.values), int(master_seed), workers, wspec)
