"""Config-driven experiments and parameter scans."""
from __future__ import annotations

import platform
import time
from pathlib import Path
from typing import Any

import numpy as np
import scipy

from .. import __version__
from ..analysis import (
    beta_eff,
    beta_eff_alphabeta,
    beta_eff_joint,
    beta_eff_state,
    char_large_m,
    characteristic_curve,
)
from ..errors import QHeatError
from ..linalg import eig_hermitian
from ..model import AlphaBeta, EnergySpectrum, alphabeta_to_populations, edge_state
from ..protocol import (
    JointOutcomeDistribution,
    build_chain,
    exact_joint,
    run_monte_carlo,
)
from .config import ConfigError, ExperimentConfig, _resolve_observable, parse_grid, parse_matrix, parse_named_hamiltonian
from .io import json_text, write_atomic, write_table

JOINT_COLUMNS = ["n", "m", "E_n", "E_m", "Q", "probability", "stderr", "source"]
CURVE_COLUMNS = ["epsilon", "G", "stderr", "provenance"]


def provenance(cfg_hash: str | None, master_seed: int | None) -> dict:
    return {
        "config_hash": cfg_hash,
        "master_seed": master_seed,
        "engine_versions": {
            "qheat": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }


def joint_rows(joint: JointOutcomeDistribution) -> list[list[Any]]:
    """Rows of the joint-distribution table, indices 1-based."""
    E = joint.energies
    dim = len(E)
    rows = []
    for n in range(dim):
        for m in range(dim):
            p = float(joint.p[m, n])
            if joint.realizations:
                err = float(np.sqrt(p * (1 - p) / joint.realizations))
            else:
                err = float("nan")
            rows.append([n + 1, m + 1, E[n], E[m], E[m] - E[n], p, err, joint.source])
    return rows


def _beta_eff_summary(result) -> dict:
    return {
        "beta_eff": result.value,
        "residual": result.residual,
        "degenerate": result.degenerate,
        "slope_at_zero": result.slope_at_zero,
    }


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> dict:
    """Execute one configured experiment and write its datasets.

    Returns the summary dictionary (also written as ``<prefix>_summary.json``).
    """
    t0 = time.perf_counter()
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    h, spectrum, observable, state = cfg.build()
    joints: dict[str, JointOutcomeDistribution] = {}
    summary: dict[str, Any] = {"mode": cfg.mode, "M": cfg.M, "dimension": cfg.dim}

    if cfg.mode in ("exact", "both"):
        if cfg.waiting_time.is_random:
            raise ConfigError("run.mode", "the exact engine needs fixed waiting times")
        chain = build_chain(h, observable, [cfg.waiting_time.tau] * cfg.M, cfg.evolve_before_first)
        joints["exact"] = exact_joint(state, chain)
        summary["locked"] = chain.locked
    if cfg.mode in ("monte-carlo", "both"):
        mc = run_monte_carlo(
            state, h, observable, cfg.waiting_time, cfg.M, cfg.realizations,
            cfg.master_seed, cfg.workers, cfg.evolve_before_first,
        )
        joints["monte-carlo"] = mc.joint
        summary["heat_histogram"] = [{"Q": q, "count": c} for q, c in mc.heat_histogram]
        summary["realizations"] = cfg.realizations

    rows = [row for j in joints.values() for row in joint_rows(j)]
    write_table(out / f"{cfg.prefix}_joint", JOINT_COLUMNS, rows, cfg.fmt)

    curve_rows = []
    for name, joint in joints.items():
        curve = characteristic_curve(joint, cfg.epsilons)
        errs = curve.stderr if curve.stderr is not None else [float("nan")] * len(curve.epsilons)
        curve_rows += [[x, g, e, curve.provenance] for x, g, e in zip(curve.epsilons, curve.values, errs)]
    for x in cfg.epsilons:
        curve_rows.append([x, char_large_m(state, spectrum, x), float("nan"), "asymptotic-closed-form"])
    write_table(out / f"{cfg.prefix}_characteristic", CURVE_COLUMNS, curve_rows, cfg.fmt)

    engines = {}
    for name, joint in joints.items():
        engines[name] = _beta_eff_summary(beta_eff_joint(joint))
    engines["asymptotic-closed-form"] = _beta_eff_summary(
        beta_eff(lambda x: char_large_m(state, spectrum, x))
    )
    primary = engines["exact"] if "exact" in engines else engines["monte-carlo"]
    summary.update(primary)
    summary["engines"] = engines
    summary["initial_populations"] = state.populations
    summary["final_marginal"] = {k: j.final_marginal for k, j in joints.items()}
    summary["provenance"] = provenance(cfg.config_hash(), cfg.master_seed)
    summary["wall_time_s"] = time.perf_counter() - t0
    write_atomic(out / f"{cfg.prefix}_summary.json", json_text(summary))
    return summary


SCAN_VARIABLES = ("alpha", "beta", "q", "E3", "tau", "M")
SCAN_COLUMNS = [
    "variable", "value", "alpha", "beta", "q", "pair", "E1", "E2", "E3", "tau", "M",
    "beta_eff", "residual", "degenerate", "flags",
]


def run_scan(spec: dict) -> tuple[list[str], list[list[Any]]]:
    """Evaluate beta_eff along a one-dimensional grid.

    ``spec`` keys: ``variable`` (one of alpha, beta, q, E3, tau, M), ``grid``,
    ``evaluator`` (``closed-form`` or ``exact``), ``levels`` [E1, E2, E3],
    ``alpha``, ``beta``, ``q``, ``pair``, and for the exact evaluator
    ``hamiltonian``, ``observable``, ``tau``, ``M``. Failures at a grid
    point are recorded in the ``flags`` column and the scan continues.
    """
    var = spec.get("variable")
    if var not in SCAN_VARIABLES:
        raise ConfigError("variable", f"expected one of {SCAN_VARIABLES}, got {var!r}")
    if "grid" not in spec:
        raise ConfigError("grid", "missing required key")
    grid = parse_grid(spec["grid"], "grid")
    evaluator = spec.get("evaluator", "closed-form")
    if evaluator not in ("closed-form", "exact"):
        raise ConfigError("evaluator", f"expected closed-form or exact, got {evaluator!r}")
    if var in ("tau", "M") and evaluator != "exact":
        raise ConfigError("evaluator", f"scanning {var} needs the exact evaluator")

    base = {
        "alpha": float(spec.get("alpha", 0.0)),
        "beta": float(spec.get("beta", 1.0)),
        "q": spec.get("q"),
        "pair": str(spec.get("pair", "12")),
        "tau": float(spec.get("tau", 1.0)),
        "M": int(spec.get("M", 20)),
    }
    h = observable = None
    if evaluator == "exact":
        hspec = spec.get("hamiltonian", "1*Sz + 0.5*Sx")
        ham = parse_named_hamiltonian(hspec) if isinstance(hspec, str) else parse_matrix(hspec, "hamiltonian")
        h = eig_hermitian(ham)
        observable = _resolve_observable(spec.get("observable", "Sz"), h)
        levels = list(h.values)
        if var == "E3":
            raise ConfigError("variable", "E3 cannot be scanned with the exact evaluator (fixed Hamiltonian)")
    else:
        levels = [float(x) for x in spec.get("levels", [-1.0, 0.0, 1.0])]
        if len(levels) != 3:
            raise ConfigError("levels", "expected three energy levels")

    rows = []
    for value in grid:
        p = dict(base)
        lv = list(levels)
        if var == "E3":
            lv[2] = float(value)
        elif var == "M":
            p["M"] = int(round(value))
        else:
            p[var] = float(value)
        flags = []
        result = None
        try:
            e = EnergySpectrum(lv)
            if p["q"] is not None:
                state = edge_state(float(p["q"]), p["pair"])
            else:
                state = alphabeta_to_populations(AlphaBeta(p["alpha"], p["beta"]), e)
            if evaluator == "exact":
                chain = build_chain(h, observable, [p["tau"]] * p["M"])
                result = beta_eff_joint(exact_joint(state, chain))
            elif p["q"] is not None:
                result = beta_eff_state(state, e)
            else:
                result = beta_eff_alphabeta(AlphaBeta(p["alpha"], p["beta"]), e)
            if result.degenerate:
                flags.append("degenerate")
        except (QHeatError, ArithmeticError, ValueError) as exc:
            flags.append(f"{type(exc).__name__}: {exc}".replace(",", ";"))
        q = p["q"]
        rows.append([
            var, float(value) if var != "M" else int(round(value)),
            p["alpha"] if q is None else float("nan"), p["beta"] if q is None else float("nan"),
            float("nan") if q is None else float(q), p["pair"] if q is not None else "",
            lv[0], lv[1], lv[2],
            p["tau"] if evaluator == "exact" else float("nan"),
            p["M"] if evaluator == "exact" else "",
            result.value if result else float("nan"),
            result.residual if result else float("nan"),
            bool(result.degenerate) if result else False,
            "|".join(flags),
        ])
    return SCAN_COLUMNS, rows
