"""Command line front end: ``lattice-efimov <command> [--config PATH] [--out DIR]``.

Tabular results go to CSV files whose first line is ``# config_hash=<sha256>``
followed by a header row; ``--json`` prints a summary object on stdout.
Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import model, threebody, twobody
from .potential import LatticePotential, from_config
from .torus import TorusGrid, twobody_band

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

GRID_CAP = 32
EVAL_GRID_CAP = 16


class ConfigError(ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class RunConfig:
    potential: dict = field(default_factory=lambda: {"type": "zero_range"})
    calibrate: bool = True
    coupling_factor: float = 1.0
    grid: int = 8
    eval_grid: int = 6
    tiny_grid: int = 4
    k_list: list = field(default_factory=lambda: [[0.1 * i, 0.0, 0.0] for i in range(6)])
    K_list: list = field(default_factory=lambda: [[0.0, 0.0, 0.0]])
    z_list: list = field(default_factory=lambda: [-7.0])
    rho_list: list = field(default_factory=lambda: [10.0 ** -e for e in range(6, 31, 2)])
    r_list: list = field(default_factory=lambda: [50.0, 100.0, 150.0, 200.0])
    xtol: float = 1e-12
    delta: float = 1.0
    l_max: int = 6
    radial_n: int = threebody.DEFAULT_NODES_PER_DECADE
    angular_n: int = threebody.DEFAULT_T1_ANGULAR_N
    source: dict = field(default_factory=dict, repr=False)

    def hash(self) -> str:
        payload = json.dumps(self.source, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def _vectors(name: str, value) -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError(name, "must be a nonempty list")
    out = []
    for i, v in enumerate(value):
        if not isinstance(v, (list, tuple)) or len(v) != 3:
            raise ConfigError(f"{name}[{i}]", "must be a 3-vector")
        try:
            out.append([float(x) for x in v])
        except (TypeError, ValueError):
            raise ConfigError(f"{name}[{i}]", "entries must be numbers") from None
    return out


def _scalars(name: str, value) -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError(name, "must be a nonempty list")
    try:
        return [float(x) for x in value]
    except (TypeError, ValueError):
        raise ConfigError(name, "entries must be numbers") from None


def _positive(name: str, value, kind=float):
    try:
        value = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"must be a {kind.__name__}") from None
    if not value > 0:
        raise ConfigError(name, "must be positive")
    return value


def parse_config(data: dict) -> RunConfig:
    """Validate a decoded JSON object into a :class:`RunConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    cfg = RunConfig(source=data)
    known = set(RunConfig.__dataclass_fields__) - {"source"}
    for key in data:
        if key not in known:
            raise ConfigError(key, "unknown field")
    if "potential" in data:
        if not isinstance(data["potential"], dict):
            raise ConfigError("potential", "must be an object")
        cfg.potential = data["potential"]
    try:
        from_config(cfg.potential)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("potential", str(exc)) from None
    cfg.calibrate = bool(data.get("calibrate", cfg.calibrate))
    cfg.coupling_factor = float(data.get("coupling_factor", cfg.coupling_factor))
    if cfg.coupling_factor < 0:
        raise ConfigError("coupling_factor", "must be nonnegative")
    for name, cap in (("grid", GRID_CAP), ("eval_grid", EVAL_GRID_CAP), ("tiny_grid", threebody.TINY_GRID_MAX)):
        value = _positive(name, data.get(name, getattr(cfg, name)), int)
        if value > cap:
            raise ConfigError(name, f"must not exceed {cap}")
        setattr(cfg, name, value)
    for name in ("k_list", "K_list"):
        if name in data:
            setattr(cfg, name, _vectors(name, data[name]))
    for name in ("z_list", "rho_list", "r_list"):
        if name in data:
            setattr(cfg, name, _scalars(name, data[name]))
    if any(r <= 0 for r in cfg.rho_list):
        raise ConfigError("rho_list", "entries must be positive")
    if any(r <= 0 for r in cfg.r_list):
        raise ConfigError("r_list", "entries must be positive")
    for name in ("xtol", "delta"):
        setattr(cfg, name, _positive(name, data.get(name, getattr(cfg, name))))
    for name in ("radial_n", "angular_n"):
        setattr(cfg, name, _positive(name, data.get(name, getattr(cfg, name)), int))
    cfg.l_max = int(data.get("l_max", cfg.l_max))
    if cfg.l_max < 0:
        raise ConfigError("l_max", "must be nonnegative")
    return cfg


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return parse_config({})
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None
    return parse_config(data)


def _potential(cfg: RunConfig) -> tuple[LatticePotential, dict]:
    pot = from_config(cfg.potential)
    info = {}
    if cfg.calibrate:
        cal = twobody.calibrate_resonance(pot, TorusGrid(cfg.grid))
        info = {"mu_star": cal.mu_star, "phi0": cal.phi0, "residual": cal.residual}
        pot = pot.with_mu(cfg.coupling_factor * cal.mu_star)
    info["mu"] = pot.mu
    return pot, info


def _map(fn, items, threads: int) -> list:
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _check_finite(rows) -> None:
    for row in rows:
        for x in row:
            if isinstance(x, float) and not np.isfinite(x):
                raise FloatingPointError(f"non-finite value in output row {row}")


def write_csv(path: Path, header: list, rows: list, config_hash: str) -> None:
    _check_finite(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(x) if isinstance(x, float) else x for x in row])


def cmd_lambda0(cfg: RunConfig, out: Path | None, threads: int) -> dict:
    lam = model.lambda0()
    return {
        "lambda0": lam,
        "half_slope": lam / (2 * np.pi),
        "full_slope": lam / np.pi,
        "residual": float(model.lambda0_residual(lam)),
    }


def cmd_resonance(cfg: RunConfig, out: Path | None, threads: int) -> dict:
    pot = from_config(cfg.potential)
    grid = TorusGrid(cfg.grid)
    cal = twobody.calibrate_resonance(pot, grid)
    return {
        "mu_star": cal.mu_star,
        "phi0": cal.phi0,
        "residual": cal.residual,
        "witness_limit": cal.witness_limit,
        "grid": cfg.grid,
    }


def cmd_dispersion(cfg: RunConfig, out: Path | None, threads: int) -> dict:
    pot, info = _potential(cfg)

    def row(k):
        z = twobody.bound_state_energy(pot, k, xtol=cfg.xtol)
        e_min = twobody_band(k)[0]
        return [*map(float, k), "none" if z is None else float(z), float(e_min)]

    rows = _map(row, cfg.k_list, threads)
    if out is not None:
        write_csv(out / "dispersion.csv", ["k1", "k2", "k3", "z", "E_min"], rows, cfg.hash())
    return {**info, "rows": len(rows)}


def cmd_tau(cfg: RunConfig, out: Path | None, threads: int) -> dict:
    pot, info = _potential(cfg)
    eval_grid = TorusGrid(cfg.eval_grid)

    def row(K):
        rep = threebody.tau(pot, K, eval_grid, xtol=cfg.xtol)
        return [*map(float, K), rep.tau, rep.branch, rep.band[0], rep.band[1]]

    rows = _map(row, cfg.K_list, threads)
    if out is not None:
        write_csv(out / "tau.csv", ["K1", "K2", "K3", "tau", "branch", "E_min", "E_max"], rows, cfg.hash())
    return {**info, "rows": len(rows)}


def cmd_count_model(cfg: RunConfig, out: Path | None, threads: int) -> dict:
    curve = threebody.count_N_model(
        sorted(cfg.rho_list, reverse=True),
        delta=cfg.delta,
        l_max=cfg.l_max,
        radial_n=cfg.radial_n,
        angular_n=cfg.angular_n,
        threads=threads,
    )
    rho = np.exp(-curve.abscissa)
    rows = [[float(r), int(c)] for r, c in zip(rho, curve.counts)]
    if out is not None:
        write_csv(out / "count_model.csv", ["rho", "count"], rows, cfg.hash())
    target = model.lambda0() / (2 * np.pi)
    return {"slope": curve.slope, "stderr": curve.stderr, "target": target, "rows": len(rows)}


def cmd_count_tiny(cfg: RunConfig, out: Path | None, threads: int) -> dict:
    pot, info = _potential(cfg)
    grid = TorusGrid(cfg.tiny_grid)
    cases = [(K, z) for K in cfg.K_list for z in cfg.z_list]

    def row(case):
        K, z = case
        n_direct, n_bs = threebody.count_three_body_tiny(pot, np.array(K), z, grid)
        return [*map(float, K), float(z), n_direct, n_bs]

    rows = _map(row, cases, threads)
    if out is not None:
        write_csv(out / "count_tiny.csv", ["K1", "K2", "K3", "z", "N_direct", "N_bs"], rows, cfg.hash())
    return {**info, "rows": len(rows), "all_equal": all(r[4] == r[5] for r in rows)}


def cmd_slope_sr(cfg: RunConfig, out: Path | None, threads: int) -> dict:
    curve = model.slope_S_r(sorted(cfg.r_list), threads=threads)
    rows = [[float(r), int(c)] for r, c in zip(curve.abscissa, curve.counts)]
    if out is not None:
        write_csv(out / "slope_sr.csv", ["r", "count"], rows, cfg.hash())
    target = model.lambda0() / np.pi
    return {"slope": curve.slope, "stderr": curve.stderr, "target": target, "rows": len(rows)}


COMMANDS = {
    "lambda0": cmd_lambda0,
    "resonance": cmd_resonance,
    "dispersion": cmd_dispersion,
    "tau": cmd_tau,
    "count-model": cmd_count_model,
    "count-tiny": cmd_count_tiny,
    "slope-sr": cmd_slope_sr,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lattice-efimov", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--out", help="directory for CSV and summary files")
    parser.add_argument("--json", action="store_true", help="print the summary as JSON")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads", "must be at least 1")
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else None
    try:
        summary = COMMANDS[args.command](cfg, out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    summary = {"command": args.command, "config_hash": cfg.hash(), **summary}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / f"{args.command}.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        for key in sorted(summary):
            print(f"{key}: {summary[key]}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
