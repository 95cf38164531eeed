"""JSON experiment configuration.

Schema (every key optional except ``system`` and ``initial_state``)::

    {
      "system": {"hamiltonian": "1*Sz + 0.5*Sx"},        # or "Sz^2 + 0.5*Sx",
                                                          # or {"matrix": [[...]]}
      "observable": "Sz",                                 # or {"matrix": [[...]]}
                                                          # or {"outcomes": [...], "eigenbasis": [[...]]}
      "initial_state": {"populations": [0.8, 0.01, 0.19]},
                       # or {"alpha": a, "beta": b}, {"thermal_beta": b}, {"edge_q": q, "pair": "12"}
      "protocol": {"M": 20, "waiting_time": {"kind": "fixed", "tau": 1.0},
                   "evolve_before_first": true},
      "run": {"realizations": 100000, "master_seed": 0, "workers": 1,
              "mode": "exact" | "monte-carlo" | "both"},
      "analysis": {"epsilons": {"start": -2, "stop": 2, "num": 41}},
      "outputs": {"dir": "out", "prefix": "run", "format": "csv"}
    }

Matrix entries may be numbers, ``[re, im]`` pairs or strings such as ``"1-2j"``.
The observable's ``eigenbasis`` is written in the energy eigenbasis of H;
its ``matrix`` form is written in the same basis as the Hamiltonian matrix.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import QHeatError
from ..linalg import EigenSystem, eig_hermitian
from ..model import (
    AlphaBeta,
    EnergySpectrum,
    InitialState,
    Observable,
    alphabeta_to_populations,
    edge_state,
    spin1_operators,
    spin1_sy,
    thermal_state,
)
from ..protocol import WaitingTimeSpec


class ConfigError(QHeatError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


MODES = ("exact", "monte-carlo", "both")


def spin1_named() -> dict[str, np.ndarray]:
    sz, sx = spin1_operators()
    sy = spin1_sy()
    return {"Sz^2": sz @ sz, "Sx^2": sx @ sx, "Sy^2": sy @ sy, "Sz": sz, "Sx": sx, "Sy": sy}


_TERM = re.compile(r"^\s*(?:([0-9.eE+\-]+)\s*\*?\s*)?(S[xyz](?:\^2)?)\s*$")


def parse_named_hamiltonian(text: str, key: str = "system.hamiltonian") -> np.ndarray:
    """Parse sums such as ``"1*Sz + 0.5*Sx"`` or ``"Sz^2 - 0.5*Sx"`` into a spin-1 matrix."""
    ops = spin1_named()
    expr = text.replace(" ", "")
    if not expr:
        raise ConfigError(key, "empty Hamiltonian expression")
    # split before every +/- that is not part of an exponent
    pieces = re.split(r"(?<![eE*])(?=[+-])", expr)
    total = np.zeros((3, 3), dtype=complex)
    for piece in pieces:
        if not piece:
            continue
        sign = 1.0
        body = piece
        if body[0] in "+-":
            sign = -1.0 if body[0] == "-" else 1.0
            body = body[1:]
        match = _TERM.match(body)
        if not match:
            raise ConfigError(key, f"cannot parse term {piece!r} in {text!r}")
        coef = float(match.group(1)) if match.group(1) else 1.0
        total += sign * coef * ops[match.group(2)]
    return total


def parse_matrix(value: Any, key: str) -> np.ndarray:
    def entry(x):
        if isinstance(x, (list, tuple)) and len(x) == 2:
            return complex(float(x[0]), float(x[1]))
        if isinstance(x, str):
            return complex(x.replace(" ", ""))
        return complex(float(x))

    try:
        rows = [[entry(x) for x in row] for row in value]
        m = np.array(rows, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"invalid matrix entries ({exc})") from None
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(key, f"matrix must be square, got shape {m.shape}")
    return m


@dataclass
class ExperimentConfig:
    hamiltonian: np.ndarray
    observable: Any
    initial_state: dict
    M: int = 20
    waiting_time: WaitingTimeSpec = field(default_factory=lambda: WaitingTimeSpec.fixed(1.0))
    evolve_before_first: bool = True
    realizations: int = 100_000
    master_seed: int = 0
    workers: int = 1
    mode: str = "exact"
    epsilons: np.ndarray = field(default_factory=lambda: np.linspace(-2.0, 2.0, 41))
    out_dir: str = "out"
    prefix: str = "run"
    fmt: str = "csv"
    raw: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def eigensystem(self) -> EigenSystem:
        try:
            return eig_hermitian(self.hamiltonian)
        except QHeatError as exc:
            raise ConfigError("system.hamiltonian", str(exc)) from None

    def build(self) -> tuple[EigenSystem, EnergySpectrum, Observable, InitialState]:
        """Resolve the physical objects: H eigensystem, spectrum, observable, state."""
        h = self.eigensystem()
        try:
            spectrum = EnergySpectrum.from_eigensystem(h)
        except QHeatError as exc:
            raise ConfigError("system.hamiltonian", str(exc)) from None
        observable = _resolve_observable(self.observable, h)
        state = _resolve_state(self.initial_state, spectrum)
        return h, spectrum, observable, state


def _resolve_observable(spec, h: EigenSystem) -> Observable:
    key = "observable"
    try:
        if isinstance(spec, str):
            named = spin1_named()
            if spec not in named:
                raise ConfigError(key, f"unknown named observable {spec!r}")
            if h.dim != 3:
                raise ConfigError(key, f"named spin-1 observable needs N = 3, got N = {h.dim}")
            return Observable.from_matrix(named[spec], h)
        if "matrix" in spec:
            m = parse_matrix(spec["matrix"], "observable.matrix")
            if m.shape[0] != h.dim:
                raise ConfigError("observable.matrix", f"dimension {m.shape[0]} != Hamiltonian dimension {h.dim}")
            return Observable.from_matrix(m, h)
        if "eigenbasis" in spec:
            basis = parse_matrix(spec["eigenbasis"], "observable.eigenbasis")
            outcomes = spec.get("outcomes", list(range(basis.shape[0])))
            return Observable(np.asarray(outcomes, dtype=float), basis)
    except ConfigError:
        raise
    except QHeatError as exc:
        raise ConfigError(key, str(exc)) from None
    raise ConfigError(key, "expected a name, {'matrix': ...} or {'outcomes': ..., 'eigenbasis': ...}")


def _resolve_state(spec: dict, spectrum: EnergySpectrum) -> InitialState:
    key = "initial_state"
    try:
        if "populations" in spec:
            c = np.asarray(spec["populations"], dtype=float)
            if len(c) != spectrum.dim:
                raise ConfigError(f"{key}.populations", f"expected {spectrum.dim} values, got {len(c)}")
            return InitialState(c)
        if "thermal_beta" in spec:
            return thermal_state(float(spec["thermal_beta"]), spectrum)
        if "alpha" in spec or "beta" in spec:
            if spectrum.dim != 3:
                raise ConfigError(key, "alpha/beta states are defined for N = 3 only")
            return alphabeta_to_populations(
                AlphaBeta(float(spec.get("alpha", 0.0)), float(spec.get("beta", 0.0))), spectrum
            )
        if "edge_q" in spec:
            if spectrum.dim != 3:
                raise ConfigError(key, "edge states are defined for N = 3 only")
            return edge_state(float(spec["edge_q"]), str(spec.get("pair", "12")))
    except ConfigError:
        raise
    except (QHeatError, TypeError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from None
    raise ConfigError(key, "expected one of populations, alpha/beta, thermal_beta, edge_q")


def _get(d: dict, key: str, path: str, kind, default):
    if key not in d:
        return default
    value = d[key]
    try:
        if kind is int and (isinstance(value, bool) or float(value) != int(value)):
            raise ValueError
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}", f"expected {kind.__name__}, got {value!r}") from None


def _parse_waiting(d: dict) -> WaitingTimeSpec:
    kind = d.get("kind", "fixed")
    try:
        if kind == "fixed":
            return WaitingTimeSpec.fixed(float(d.get("tau", 1.0)))
        if kind == "uniform":
            return WaitingTimeSpec.uniform(float(d["tau_min"]), float(d["tau_max"]))
        if kind == "exponential":
            return WaitingTimeSpec.exponential(float(d["mean"]))
    except KeyError as exc:
        raise ConfigError(f"protocol.waiting_time.{exc.args[0]}", "missing") from None
    except (QHeatError, TypeError, ValueError) as exc:
        raise ConfigError("protocol.waiting_time", str(exc)) from None
    raise ConfigError("protocol.waiting_time.kind", f"unknown kind {kind!r}")


def parse_grid(spec, key: str) -> np.ndarray:
    """Grid from a list, ``{"start", "stop", "num"}`` or ``{"start", "stop", "step"}`` (inclusive)."""
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    if not isinstance(spec, dict) or "start" not in spec or "stop" not in spec:
        raise ConfigError(key, "expected a list or {start, stop, num|step}")
    start, stop = float(spec["start"]), float(spec["stop"])
    if "num" in spec:
        return np.linspace(start, stop, int(spec["num"]))
    if "step" in spec:
        step = float(spec["step"])
        if step <= 0:
            raise ConfigError(f"{key}.step", "must be positive")
        n = int(round((stop - start) / step)) + 1
        return start + step * np.arange(n)
    raise ConfigError(key, "needs num or step")


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    for required in ("system", "initial_state"):
        if required not in raw:
            raise ConfigError(required, "missing required key")
    system = raw["system"]
    if isinstance(system, str):
        system = {"hamiltonian": system}
    if "hamiltonian" not in system:
        raise ConfigError("system.hamiltonian", "missing required key")
    hspec = system["hamiltonian"]
    if isinstance(hspec, str):
        ham = parse_named_hamiltonian(hspec)
    elif isinstance(hspec, dict) and "matrix" in hspec:
        ham = parse_matrix(hspec["matrix"], "system.hamiltonian.matrix")
    elif isinstance(hspec, list):
        ham = parse_matrix(hspec, "system.hamiltonian")
    else:
        raise ConfigError("system.hamiltonian", "expected a named form or a matrix")
    if "dimension" in system and int(system["dimension"]) != ham.shape[0]:
        raise ConfigError("system.dimension", f"{system['dimension']} does not match matrix size {ham.shape[0]}")
    if not isinstance(raw["initial_state"], dict):
        raise ConfigError("initial_state", "expected an object")

    protocol = raw.get("protocol", {})
    run = raw.get("run", {})
    analysis = raw.get("analysis", {})
    outputs = raw.get("outputs", {})

    cfg = ExperimentConfig(
        hamiltonian=ham,
        observable=raw.get("observable", "Sz"),
        initial_state=raw["initial_state"],
        M=_get(protocol, "M", "protocol", int, 20),
        waiting_time=_parse_waiting(protocol.get("waiting_time", {"kind": "fixed", "tau": 1.0})),
        evolve_before_first=bool(protocol.get("evolve_before_first", True)),
        realizations=_get(run, "realizations", "run", int, 100_000),
        master_seed=_get(run, "master_seed", "run", int, 0),
        workers=_get(run, "workers", "run", int, 1),
        mode=run.get("mode", "exact"),
        out_dir=str(outputs.get("dir", "out")),
        prefix=str(outputs.get("prefix", "run")),
        fmt=str(outputs.get("format", "csv")),
        raw=raw,
    )
    if "epsilons" in analysis:
        cfg.epsilons = parse_grid(analysis["epsilons"], "analysis.epsilons")
    if cfg.M < 0:
        raise ConfigError("protocol.M", "must be >= 0")
    if cfg.realizations < 1:
        raise ConfigError("run.realizations", "must be >= 1")
    if not 0 <= cfg.master_seed < 2**64:
        raise ConfigError("run.master_seed", "must be an unsigned 64-bit integer")
    if cfg.workers < 1:
        raise ConfigError("run.workers", "must be >= 1")
    if cfg.mode not in MODES:
        raise ConfigError("run.mode", f"expected one of {MODES}, got {cfg.mode!r}")
    if cfg.fmt not in ("csv", "json"):
        raise ConfigError("outputs.format", f"expected csv or json, got {cfg.fmt!r}")
    # resolve once so dimension and state errors surface at load time
    cfg.build()
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a JSON config. OSError propagates for I/O failures."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON ({exc})") from None
    return parse_config(raw)
