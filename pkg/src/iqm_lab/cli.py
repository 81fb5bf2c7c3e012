"""Command-line front end: ``iqm-lab run | validate | worlds``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from . import bell, protocol, scan
from .coding import CodingRule
from .config import RunConfig, parse_config
from .errors import ConfigError, IqmError, MalformedModel
from .ops import EnvironmentSpec, SpacetimeSupport, measurement_from_dict
from .rng import derive_key
from .tree import (
    build_tree,
    composed_interference_report,
    joint_marginal_report,
    kolmogorov_violations,
    meta_dependence_report,
)
from .worlds import KINDS, World, WorldSpec, build_world

EXIT_OK, EXIT_PIPELINE, EXIT_CONFIG = 0, 1, 2


def _clean(obj: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    csv.writer(buf).writerows(rows)
    return buf.getvalue()


def _generation(w: World, spec: dict | None):
    if not spec:
        return w.default_generation()
    sup = spec.get("support", {})
    label = spec.get("label", w.default_generation().label)
    g = w.generation(label, SpacetimeSupport(sup.get("extent", 0.0), sup.get("duration", 0.0)), **spec.get("params", {}))
    for step in spec.get("evolution", ()):
        env = step["environment"]
        g = protocol.evolve_generation(g, EnvironmentSpec.make(env["name"], **env.get("params", {})), step["dt"], world=w)
    return g


def _measurement(w: World, spec: dict | None):
    if spec is None:
        return w.catalog()[0][0]
    return measurement_from_dict(spec)


# -- pipelines -------------------------------------------------------------------------
# each returns (summary line, result dict, {suffix: file text})


def _run_statistics(cfg: RunConfig, w: World, threads):
    b = cfg.block
    g = _generation(w, cfg.generation)
    mes = _measurement(w, b.get("measurement"))
    rule = CodingRule.from_dict(b["rule"]) if "rule" in b else w.default_rule(mes, g, b.get("bins"))
    table = protocol.accumulate_statistics(w, g, mes, rule, b["N"], cfg.seed, stream=("statistics",), threads=threads)
    result = {"table": table.to_dict()}
    parts = [f"statistics {mes.display}: N={table.N}, {table.k} values"]
    if all(s.is_scalar for s in table.spectrum) and table.N >= 2:
        result["dispersion"] = protocol.dispersion(table)
        parts.append(f"dispersion={result['dispersion']:.4f}")
    if "convergence_schedule" in b:
        rep = protocol.convergence_report(w, g, mes, rule, b["convergence_schedule"], cfg.seed, threads=threads)
        result["convergence"] = rep.to_dict()
        exp = "n/a" if rep.exponent is None else f"{rep.exponent:.3f}"
        parts.append(f"convergence {rep.verdict} (drift exponent {exp})")
    return ", ".join(parts), result, {"csv": table.to_csv()}


def _run_tree(cfg: RunConfig, w: World, threads):
    b = cfg.block
    g = _generation(w, cfg.generation)
    views = [_measurement(w, v) for v in b["views"]] if "views" in b else [m for m, _ in w.catalog()]
    bins = b.get("bins")
    rules = {m.label: w.default_rule(m, g, bins) for m in views}
    tree = build_tree(w, g, views, rules, b["N_per_branch"], cfg.seed, threads=threads)
    meta = meta_dependence_report(tree)
    kpairs = b.get("kolmogorov_pairs", 10_000)
    rng = np.random.Generator(np.random.Philox(key=np.array(derive_key(cfg.seed, "kolmogorov"), dtype=np.uint64)))
    violations = sum(len(kolmogorov_violations(br.space, kpairs, rng).violations) for br in tree.branches)
    factorization = {}
    for br in tree.branches:
        if all(isinstance(s.value, tuple) and len(s.value) == 2 for s in br.table.spectrum):
            factorization[br.class_id] = joint_marginal_report(br).to_dict()
    result = {
        "tree": tree.to_dict(),
        "meta_dependence": meta.to_dict(),
        "factorization": factorization,
        "kolmogorov": {"pairs_per_branch": kpairs, "violations": violations},
    }
    rows = [["class_id", "index", "label", "count", "freq", "ci_low", "ci_high"]]
    for br in tree.branches:
        rows += [[br.class_id, *r] for r in br.table.csv_rows()[1:]]
    summary = f"tree: {len(tree.branches)} branches, N={b['N_per_branch']} per branch, Kolmogorov violations {violations}"
    if meta.pauli_variance_sum is not None:
        summary += f", Pauli variance sum {meta.pauli_variance_sum:.4f}"
    return summary, result, {"csv": _csv(rows), "txt": tree.render() + "\n"}


def _lhv_from_config(spec: dict, settings: list[float]) -> bell.LHVModel:
    rho = [Fraction(r) if isinstance(r, str) else r for r in spec["rho"]]
    lambdas = list(range(len(rho)))
    tables = []
    for side in ("A", "B"):
        rows = spec[side]
        if len(rows) != len(settings) or any(len(r) != len(rho) for r in rows):
            raise MalformedModel(f"{side} needs one row per angle and one response per hidden value")
        tables.append({(s, lam): v for s, row in zip(settings, rows) for lam, v in zip(lambdas, row)})
    return bell.LHVModel.from_tables(lambdas, rho, *tables)


def _run_bell(cfg: RunConfig, w: World, threads):
    b = cfg.block
    kind = b.get("inequality", "chsh")
    default = [0.0, 90.0, 45.0, 135.0] if kind == "chsh" else [0.0, 60.0, 120.0]
    degs = b.get("angles_deg", default)
    settings = [math.radians(d) for d in degs]
    n = b.get("N", 100_000)
    model = _lhv_from_config(b["lhv_model"], settings) if "lhv_model" in b else None
    if kind == "chsh":
        if model is not None:
            S = bell.chsh_from_model(model, settings)
            bound, witness = bell.lhv_max_bruteforce(settings)
            state = "VIOLATED" if S > bound else "satisfied"
            return (
                f"CHSH S={float(S):.2f} (exact, local model), LHV bound {bound:.2f}: {state}",
                {"source": "lhv_exact", "S": S, "bound": bound, "witness": list(witness), "angles_deg": degs},
                {},
            )
        res = bell.world_chsh(w, settings, n, cfg.seed, threads=threads)
        table = bell.CorrelationTable(res.estimates)
        return res.summary(), {"source": "world_sampled", "angles_deg": degs, **res.to_dict()}, {"csv": table.to_csv()}
    a, bb, c = settings
    if model is not None:
        r = bell.bell1964_from_model(model, a, bb, c)
        state = "VIOLATED" if r.violated else "satisfied"
        return (
            f"Bell-1964 margin={float(r.margin):.2f} (exact, local model): {state}",
            {"source": "lhv_exact", "margin": r.margin, "violated": r.violated, "angles_deg": degs},
            {},
        )
    ests = [bell.world_correlation(w, x, y, n, cfg.seed, threads=threads) for x, y in ((a, bb), (a, c), (bb, c))]
    sigma = math.sqrt(sum(e.sigma**2 for e in ests))
    r = bell.bell1964_check(*(e.E for e in ests), threshold=4 * sigma)
    state = "VIOLATED" if r.violated else "satisfied"
    result = {
        "source": "world_sampled",
        "angles_deg": degs,
        "margin": r.margin,
        "sigma": sigma,
        "threshold": r.threshold,
        "violated": r.violated,
        "correlations": [e.to_dict() for e in ests],
    }
    return f"Bell-1964 margin={r.margin:.2f} ± {sigma:.2g}: {state}", result, {"csv": bell.CorrelationTable(ests).to_csv()}


def _run_scan(cfg: RunConfig, w: World, threads):
    b = cfg.block
    kw = {k: b[k] for k in ("d1", "d2", "v1", "v2", "margin", "N", "z") if k in b}
    if "angles_deg" in b:
        kw["settings"] = tuple(math.radians(d) for d in b["angles_deg"])
    sc = scan.ScanConfig(vi_grid=tuple(b["vi_grid"]), **kw)
    report = scan.run_scan(w, sc, cfg.seed, threads=threads)
    verdict = scan.scan_verdict(report)
    elim = ", ".join(f"{v:g}" for v in report.eliminated)
    return f"scan verdict {verdict}; eliminated [{elim}]", report.to_dict(), {"csv": report.to_csv()}


def _run_interference(cfg: RunConfig, w: World, threads):
    b = cfg.block
    if not hasattr(w, "slit"):
        raise IqmError(f"{w.kind} worlds have no two-route generations")
    g1, g2 = w.slit(1), w.slit(2)
    g12 = g1 if b.get("blocked", "none") == "slit2" else w.compose(g1, g2)
    mes = w.catalog()[0][0]
    rule = w.default_rule(mes, w.compose(g1, g2), b.get("bins"))
    rep = composed_interference_report(w, g1, g2, g12, mes, rule, b["N"], cfg.seed, z=b.get("z", 4.0), threads=threads)
    rows = [["value", "p1", "p2", "p12", "mixture", "deviation_mixture"]]
    for i, v in enumerate(rep.values):
        rows.append([repr(v), *(repr(float(a[i])) for a in (rep.p1, rep.p2, rep.p12, rep.mixture, rep.deviation_mixture))])
    summary = f"interference: visibility={rep.visibility:.3f}, dark bin p12/mixture={rep.dark_ratio:.3f}, reference {rep.reference}"
    if rep.reference != "mixture":
        summary += f" ({'matches' if rep.reference_within_ci else 'differs from'} single-route law)"
    return summary, rep.to_dict(), {"csv": _csv(rows)}


PIPELINES = {
    "statistics": _run_statistics,
    "tree": _run_tree,
    "bell": _run_bell,
    "scan": _run_scan,
    "interference": _run_interference,
}


def output_dir(cfg: RunConfig, override: str | None = None) -> Path:
    """``--out`` beats ``IQM_LAB_OUT``, which beats the config's ``output.dir``."""
    return Path(override or os.environ.get("IQM_LAB_OUT") or cfg.output_dir or ".")


def run(cfg: RunConfig, out: str | None = None, threads: int | None = None) -> tuple[str, list[Path]]:
    """Run the configured pipeline and write its report files; returns the summary line and paths."""
    w = build_world(cfg.world, cfg.world_id)
    protocol.set_thread_cap(threads)
    summary, result, extra = PIPELINES[cfg.command](cfg, w, threads)
    report = {
        "command": cfg.command,
        "seed": cfg.seed,
        "world": {"kind": cfg.world.kind, "id": w.world_id, "params": w.params},
        "summary": summary,
        "result": result,
    }
    d = output_dir(cfg, out)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    if "json" in cfg.formats:
        p = d / f"{cfg.command}.json"
        p.write_text(dumps(report), encoding="utf-8")
        paths.append(p)
    for suffix, text in sorted(extra.items()):
        if suffix == "csv" and "csv" not in cfg.formats:
            continue
        p = d / f"{cfg.command}.{suffix}"
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths.append(p)
    return summary, paths


def _catalog_lines() -> list[str]:
    lines = []
    for kind, cls in KINDS.items():
        w = cls(WorldSpec.make(kind))
        lines.append(f"{kind}: " + "; ".join(f"{m.display} [{c}]" for m, c in w.catalog()))
    return lines


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="iqm-lab", description="Hidden micro-world simulator and statistics runner.")
    sub = parser.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run the pipeline named in a configuration")
    p_run.add_argument("config")
    p_run.add_argument("--threads", type=int, default=None, help="worker cap (default: one per core)")
    p_run.add_argument("--out", default=None, help="output directory")
    p_val = sub.add_parser("validate", help="check a configuration without running it")
    p_val.add_argument("config")
    sub.add_parser("worlds", help="list built-in worlds and their view catalogs")
    args = parser.parse_args(argv)

    if args.cmd == "worlds":
        print("\n".join(_catalog_lines()))
        return EXIT_OK
    try:
        cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
        if args.cmd == "validate":
            build_world(cfg.world, cfg.world_id)
            print(f"ok: {cfg.command} on {cfg.world.kind}")
            return EXIT_OK
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except (IqmError, OSError) as e:
        # world specs are part of the configuration, so their errors count as config errors
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary, _ = run(cfg, args.out, args.threads)
    except (IqmError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_PIPELINE
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
