"""Command-line harness for the bound-verification suites and control experiments.

Each command reads a JSON config, writes CSV tables to ``--out`` and a
``manifest.json`` describing the run. Invalid configs exit with status 2
and a JSON error object on standard error.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, chebpoly, instances, ocp, pinv_approx, saddle
from .blockmat import load_matrix
from .metric import MalformedInputError, MetricError, metric_from_json, validate_metric
from .tables import SchemaError, emit_table

COMMANDS = ("approx", "bounds-table", "saddle", "ocp-run", "ocp-sweep", "validate-metric")


class ConfigError(ValueError):
    pass


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing {key!r}")
    return cfg[key]


def _resolve(base: Path, value):
    """Paths in a config are relative to the config file."""
    if isinstance(value, str):
        return base / value
    return value


def _instances(cfg: dict, seed: int, base: Path):
    if "matrix" in cfg:
        m = cfg["matrix"]
        A = load_matrix(base / _require(m, "csv"), base / _require(m, "sidecar"))
        return [("input", A)]
    rnd = cfg.get("random", {})
    return instances.random_suite(
        seed,
        int(rnd.get("count", 50)),
        tuple(rnd.get("n_range", (20, 60))),
        int(rnd.get("max_block", 4)),
    )


def cmd_approx(cfg: dict, seed: int, out: Path, base: Path) -> dict:
    kappas = cfg.get("kappa", list(range(1, 11)))
    mode = cfg.get("mode", "auto")
    distances = cfg.get("decay_distances", [2, 4, 8])
    approx_rows, decay_rows = [], []
    violations = 0
    for idx, (kind, A) in enumerate(_instances(cfg, seed, base)):
        sweep = pinv_approx.verify_bound(A, kappas, mode=mode)
        for rep in sweep:
            approx_rows.append(rep.as_row())
            violations += not rep.within_bound
        if distances:
            pairs = instances.pairs_at_distances(A.space, distances)
            prof = pinv_approx.offdiag_decay(A, pairs, (sweep[0].a, sweep[0].b), sweep[0].mode)
            violations += len(prof.violations())
            for e in prof.pairs:
                decay_rows.append(
                    {
                        "V1": " ".join(map(str, e.V1)),
                        "V2": " ".join(map(str, e.V2)),
                        "distance": e.distance,
                        "measured": e.measured,
                        "bound": e.bound,
                    }
                )
    files = [emit_table(approx_rows, "approx", out / "approx.csv")]
    if distances:
        files.append(emit_table(decay_rows, "decay", out / "decay.csv"))
    return {"files": files, "violations": violations}


def cmd_bounds_table(cfg: dict, seed: int, out: Path, base: Path) -> dict:
    a, b = float(_require(cfg, "a")), float(_require(cfg, "b"))
    omegas = cfg.get("omega", list(range(1, 11)))
    rows = []
    for w in omegas:
        row = {"omega": w}
        for kind in ("f1", "f2", "demko", "shin"):
            row[kind] = chebpoly.decay_bound(kind, float(w), a, b)
        rows.append(row)
    return {"files": [emit_table(rows, "bounds", out / "bounds.csv")], "violations": 0}


def cmd_saddle(cfg: dict, seed: int, out: Path, base: Path) -> dict:
    systems = []
    if "G" in cfg:
        G = np.loadtxt(_resolve(base, cfg["G"]), delimiter=",", ndmin=2)
        F = np.loadtxt(_resolve(base, _require(cfg, "F")), delimiter=",", ndmin=2)
        systems.append(("input", G, F))
    else:
        rnd = cfg.get("random", {})
        rng = np.random.default_rng(seed)
        n_range = rnd.get("n_range", (5, 40))
        for i in range(int(rnd.get("count", 50))):
            n = int(rng.integers(n_range[0], n_range[1] + 1))
            m = int(rng.integers(1, n + 1))
            G, F = instances.random_saddle(rng, n, m)
            systems.append((str(i), G, F))
    rows = []
    violations = 0
    for name, G, F in systems:
        rep = saddle.check_interval(saddle.assemble_saddle(G, F))
        violations += not rep["contained"]
        rows.append({"instance": name, **rep})
    return {"files": [emit_table(rows, "saddle", out / "saddle.csv")], "violations": violations}


def _scenario(cfg: dict, base: Path) -> ocp.OcpScenario:
    return ocp.scenario_from_json(_resolve(base, _require(cfg, "scenario")))


def cmd_ocp_run(cfg: dict, seed: int, out: Path, base: Path) -> dict:
    sc = _scenario(cfg, base)
    N_list = [int(n) for n in cfg.get("N", [100, 200, 400, 800])]
    method = cfg.get("method", "banded")
    window, direction = ocp.default_window(sc)
    if "window" in cfg:
        window = tuple(float(x) for x in cfg["window"])
        direction = cfg.get("direction", direction)
    profiles = ocp.parallel_map(lambda N: ocp.solve(ocp.assemble(sc, N), method=method), N_list, True)
    files, rates = [], []
    for N, prof in zip(N_list, profiles):
        files.append(emit_table(prof.rows(), "profile", out / f"profile_N{N}.csv"))
        try:
            rate = ocp.fit_decay_rate(prof.times, prof.s_norm, window, direction)
        except ValueError:
            rate = float("nan")
        rates.append({"N": N, "window_lo": window[0], "window_hi": window[1], "direction": direction, "rate": rate})
    files.append(emit_table(rates, "decay_rate", out / "decay_rates.csv"))
    return {"files": files, "violations": 0}


def cmd_ocp_sweep(cfg: dict, seed: int, out: Path, base: Path) -> dict:
    sc = _scenario(cfg, base)
    files = []
    violations = 0
    if cfg.get("stability_N", [100, 200, 400]):
        st = ocp.stability_sweep(sc, cfg.get("stability_N", [100, 200, 400]))
        violations += (not st.non_diverging) + (st.within_2dtilde is False)
        files.append(emit_table(st.rows, "stability", out / "stability.csv"))
    if cfg.get("consistency_N", [100, 200, 400]):
        cs = ocp.consistency_sweep(sc, cfg.get("consistency_N", [100, 200, 400]), cfg.get("reference_N", 1600))
        violations += not cs.decreasing
        files.append(emit_table(cs.rows, "consistency", out / "consistency.csv"))
    probes = cfg.get("decay_probes")
    if probes:
        rows = ocp.decay_experiment(sc, int(cfg.get("decay_N", 400)), [tuple(p) for p in probes])
        violations += sum(1 for r in rows if r["bound"] != "" and r["response"] > r["bound"])
        files.append(emit_table(rows, "ocp_decay", out / "ocp_decay.csv"))
    return {"files": files, "violations": violations}


def cmd_validate_metric(cfg: dict, seed: int, out: Path, base: Path) -> dict:
    doc = _require(cfg, "metric")
    if isinstance(doc, str):
        doc = json.loads(_resolve(base, doc).read_text())
    if "dist" in doc:
        found = validate_metric(doc["nodes"], doc["dist"], seed=seed)
    else:
        space = metric_from_json(doc)
        found = validate_metric(space.nodes, space.dist, seed=seed)
    rows = [{"axiom": v.axiom, "witness": " ".join(map(str, v.witness)), "detail": v.detail} for v in found]
    return {"files": [emit_table(rows, "violations", out / "violations.csv")], "violations": len(found)}


HANDLERS = {
    "approx": cmd_approx,
    "bounds-table": cmd_bounds_table,
    "saddle": cmd_saddle,
    "ocp-run": cmd_ocp_run,
    "ocp-sweep": cmd_ocp_sweep,
    "validate-metric": cmd_validate_metric,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bandpinv", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=COMMANDS, help="defaults to the config's 'command' field")
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--seed", type=int, help="64-bit seed for random suites (overrides the config)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    p.add_argument("--quiet", action="store_true", help="suppress the summary line")
    return p


def run(command: str | None, config: dict, *, seed: int | None = None, out: Path, base: Path | None = None) -> dict:
    """Execute one command and write its tables plus ``manifest.json`` to ``out``."""
    command = command or config.get("command")
    if command not in HANDLERS:
        raise ConfigError(f"unknown or missing command {command!r}; choose from {list(COMMANDS)}")
    if config.get("command", command) != command:
        raise ConfigError(f"config is for {config['command']!r}, not {command!r}")
    seed = int(config.get("seed", 0) if seed is None else seed)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    result = HANDLERS[command](config, seed, out, Path(".") if base is None else base)
    wall = time.perf_counter() - start
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "versions": {
            "bandpinv": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_time_s": wall,
        "outputs": [p.name for p in result["files"]],
        "violations": result["violations"],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))
    result["manifest"] = manifest
    return result


def _fail(kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config: dict = {}
    base = Path(".")
    if args.config is not None:
        try:
            config = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            return _fail("ConfigError", f"cannot read config {args.config}: {exc}")
        if not isinstance(config, dict):
            return _fail("ConfigError", "config must be a JSON object")
        base = args.config.parent
    try:
        result = run(args.command, config, seed=args.seed, out=args.out, base=base)
    except (ConfigError, MalformedInputError, MetricError, SchemaError, KeyError, TypeError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc))
    except ocp.SingularSystemError as exc:
        return _fail("SingularSystemError", str(exc))
    if not args.quiet:
        names = ", ".join(p.name for p in result["files"])
        print(f"{result['manifest']['command']}: wrote {names} to {args.out} ({result['violations']} violations)")
    return 1 if result["violations"] else 0


if __name__ == "__main__":
    sys.exit(main())
