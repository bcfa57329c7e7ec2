"""Command-line front end.

    fopid-avr optimize   --case II --mode fopid --out-dir runs/II-fopid
    fopid-avr evaluate   genes.csv --case I --traces --out-dir eval/
    fopid-avr robustness genes.csv --out-dir robust/
    fopid-avr optimize   --manifest runs/II-fopid/manifest.json --out-dir rerun/

Every command writes ``manifest.json`` next to its CSV outputs; feeding
that manifest back through ``--manifest`` reproduces the CSVs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np

from fopid_avr import BACKEND, __version__
from fopid_avr.avr import (
    AvrPlantParams,
    DerivativeOn,
    DisturbanceSite,
    SimProtocol,
    simulate_disturbance,
    simulate_tracking,
)
from fopid_avr.errors import FopidAvrError, NumericalDivergence
from fopid_avr.folib import ControllerGenes, OustaloupConfig, gene_bounds
from fopid_avr.lti import step_metrics
from fopid_avr.moea import ChaoticRngState, NsgaConfig, check_seed, nsga2_run
from fopid_avr.objectives import CASE_OBJECTIVES, CaseEvaluator, EvalSettings, J2Mode, evaluate
from fopid_avr.tables import GeneRow, read_gene_rows

logger = logging.getLogger("fopid_avr")

DEFAULT_KG = (0.7, 0.8, 0.9, 1.0)
DEFAULT_TAUG = (1.0, 1.333, 1.667, 2.0)
ROBUSTNESS_HORIZON = 20.0


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _gene_columns(genes: ControllerGenes):
    return [genes.Kp, genes.Ki, genes.Kd, genes.lam, genes.mu]


# --------------------------------------------------------------------------
# settings <-> manifest


def settings_from_args(args) -> EvalSettings:
    params = AvrPlantParams.from_json(args.plant) if args.plant else AvrPlantParams()
    return EvalSettings(
        case_id=args.case,
        params=params,
        cfg=OustaloupConfig(),
        dt=args.dt,
        horizon=args.horizon,
        disturbance_at=args.disturbance_at,
        j2_mode=args.j2_mode,
        derivative_on=args.derivative_on,
    )


def settings_manifest(s: EvalSettings) -> dict:
    tracking, _ = s.protocols
    return {
        "case_id": s.case_id,
        "objectives": list(CASE_OBJECTIVES[s.case_id]),
        "plant": s.params.to_json_dict(),
        "oustaloup": asdict(s.cfg),
        "dt": s.dt,
        "horizon": tracking.horizon,
        "disturbance_at": s.disturbance_at.value,
        "j2_mode": s.j2_mode.value,
        "derivative_on": s.derivative_on.value,
    }


def settings_from_manifest(m: dict) -> EvalSettings:
    return EvalSettings(
        case_id=m["case_id"],
        params=AvrPlantParams.from_json_dict(m["plant"]),
        cfg=OustaloupConfig(**m["oustaloup"]),
        dt=m["dt"],
        horizon=m["horizon"],
        disturbance_at=m["disturbance_at"],
        j2_mode=m["j2_mode"],
        derivative_on=m["derivative_on"],
    )


def write_manifest(out_dir: Path, command: str, body: dict, started: float, outputs) -> None:
    manifest = {
        "command": command,
        **body,
        "software_version": __version__,
        "kernel_backend": BACKEND,
        "outputs": sorted(outputs),
        "wall_clock_seconds": round(time.perf_counter() - started, 3),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_manifest(path) -> dict:
    return json.loads(Path(path).read_text())


# --------------------------------------------------------------------------
# optimize


def cmd_optimize(args) -> int:
    started = time.perf_counter()
    if args.manifest:
        m = load_manifest(args.manifest)
        settings = settings_from_manifest(m["settings"])
        mode = m["controller_mode"]
        config = NsgaConfig(**m["nsga"])
        x0 = m["rng_seed_x0"]
    else:
        settings = settings_from_args(args)
        mode = args.mode
        config = NsgaConfig(
            pop_size=args.pop,
            max_generations=args.max_gens,
            truncate_pareto=not args.no_pareto_truncation,
        )
        x0 = args.seed_x0
    check_seed(x0)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lower, upper = gene_bounds(mode)
    evaluator = CaseEvaluator(settings, mode)
    result = nsga2_run(
        evaluator, lower, upper, config, ChaoticRngState(x=x0), workers=args.workers
    )
    names = CASE_OBJECTIVES[settings.case_id]
    rows = []
    for ind in result.front:
        genes = ControllerGenes.from_array(ind.genes)
        rows.append([*ind.objectives, *_gene_columns(genes)])
    write_csv(out / "front.csv", [*names, "Kp", "Ki", "Kd", "lambda", "mu"], rows)
    write_csv(
        out / "genlog.csv",
        ["generation", "front_size", "hypervolume", "stall"],
        [[r.generation, r.front_size, r.hypervolume, r.stall] for r in result.log],
    )
    write_manifest(
        out,
        "optimize",
        {
            "case_id": settings.case_id,
            "controller_mode": mode,
            "nsga": asdict(config),
            "rng_seed_x0": x0,
            "settings": settings_manifest(settings),
            "stop_reason": result.stop_reason,
            "generations": result.log[-1].generation,
            "evaluations": result.evaluations,
        },
        started,
        ["front.csv", "genlog.csv"],
    )
    print(
        f"case {settings.case_id} {mode}: {len(result.front)} front members after "
        f"{result.log[-1].generation} generations ({result.stop_reason}) -> {out}"
    )
    return 0


# --------------------------------------------------------------------------
# evaluate


def _checked_rows(path) -> list[GeneRow]:
    rows = []
    for row in read_gene_rows(path):
        if not row.genes.in_bounds():
            warnings.warn(f"skipping {row.label}: genes outside bounds", stacklevel=2)
            continue
        rows.append(row)
    return rows


def evaluate_rows(rows, settings: EvalSettings):
    """Objective vector and nominal tracking metrics for every gene row."""
    tracking, _ = settings.protocols
    out = []
    for row in rows:
        obj = evaluate(row.genes, settings)
        try:
            tr = simulate_tracking(
                row.genes, settings.params, tracking, settings.cfg, settings.derivative_on
            )
            metrics = step_metrics(tr)
        except NumericalDivergence:
            tr, metrics = None, None
        out.append((row, obj, tr, metrics))
    return out


METRIC_COLUMNS = ["overshoot", "settling", "rise", "peak", "settled"]


def _metric_values(metrics):
    if metrics is None:
        return [None] * 5
    return [
        metrics.overshoot,
        metrics.settling_time_2pct,
        metrics.rise_time_10_90,
        metrics.peak_time,
        metrics.settled,
    ]


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    if args.manifest:
        m = load_manifest(args.manifest)
        settings = settings_from_manifest(m["settings"])
        genes_file = m["genes_file"]
        traces = m["traces"]
    else:
        settings = settings_from_args(args)
        genes_file = args.genes_file
        traces = args.traces
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = CASE_OBJECTIVES[settings.case_id]
    results = evaluate_rows(_checked_rows(genes_file), settings)
    outputs = ["objectives.csv"]
    rows = []
    for row, obj, tr, metrics in results:
        rows.append(
            [row.label, row.mode, *obj.values, *_gene_columns(row.genes), *_metric_values(metrics)]
        )
        if traces and tr is not None:
            name = f"trace_{row.label}_tracking.csv"
            write_csv(out / name, ["t", "r", "y", "u", "e"], tr.as_rows())
            outputs.append(name)
            if "J3" in names and row.genes.Ki > 0:
                _, dproto = settings.protocols
                try:
                    dtr = simulate_disturbance(
                        row.genes,
                        settings.params,
                        dproto,
                        settings.cfg,
                        settings.disturbance_at,
                        derivative_on=settings.derivative_on,
                    )
                except FopidAvrError:
                    continue
                name = f"trace_{row.label}_disturbance.csv"
                write_csv(out / name, ["t", "r", "y", "u", "e"], dtr.as_rows())
                outputs.append(name)
    write_csv(
        out / "objectives.csv",
        ["solution", "mode", *names, "Kp", "Ki", "Kd", "lambda", "mu", *METRIC_COLUMNS],
        rows,
    )
    write_manifest(
        out,
        "evaluate",
        {
            "case_id": settings.case_id,
            "genes_file": str(Path(genes_file).resolve()),
            "traces": bool(traces),
            "settings": settings_manifest(settings),
        },
        started,
        outputs,
    )
    print(f"evaluated {len(rows)} rows -> {out / 'objectives.csv'}")
    return 0


# --------------------------------------------------------------------------
# robustness


def robustness_grid(
    genes: ControllerGenes,
    kg_values=DEFAULT_KG,
    taug_values=DEFAULT_TAUG,
    base: AvrPlantParams = AvrPlantParams(),
    proto: SimProtocol = SimProtocol(ROBUSTNESS_HORIZON),
    cfg: OustaloupConfig = OustaloupConfig(),
    derivative_on: DerivativeOn = DerivativeOn.ERROR,
):
    """Tracking step metrics over a generator gain x time-constant grid.

    Yields ``(KG, tauG, metrics or None, stable)``; a cell is stable when
    the simulation stays bounded and the response settles in the horizon.
    """
    for kg in kg_values:
        for tg in taug_values:
            params = base.replace(K_G=kg, tau_G=tg)
            try:
                tr = simulate_tracking(genes, params, proto, cfg, derivative_on)
            except NumericalDivergence:
                yield kg, tg, None, False
                continue
            if not tr.is_finite():
                yield kg, tg, None, False
                continue
            m = step_metrics(tr)
            yield kg, tg, m, bool(m.settled)


def _parse_grid(text, default):
    if text is None:
        return tuple(default)
    return tuple(float(v) for v in text.split(","))


def cmd_robustness(args) -> int:
    started = time.perf_counter()
    if args.manifest:
        m = load_manifest(args.manifest)
        genes_file = m["genes_file"]
        kg, tg = tuple(m["KG"]), tuple(m["tauG"])
        base = AvrPlantParams.from_json_dict(m["plant"])
        horizon, dt = m["horizon"], m["dt"]
        derivative_on = m["derivative_on"]
    else:
        genes_file = args.genes_file
        kg = _parse_grid(args.kg, DEFAULT_KG)
        tg = _parse_grid(args.taug, DEFAULT_TAUG)
        base = AvrPlantParams.from_json(args.plant) if args.plant else AvrPlantParams()
        horizon = args.horizon or ROBUSTNESS_HORIZON
        dt = args.dt
        derivative_on = args.derivative_on
    for v in kg:
        if not 0.7 <= v <= 1.0:
            warnings.warn(f"K_G={v} outside [0.7, 1]", stacklevel=2)
    for v in tg:
        if not 1.0 <= v <= 2.0:
            warnings.warn(f"tau_G={v} outside [1, 2]", stacklevel=2)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    proto = SimProtocol(horizon, dt)
    rows = []
    for row in _checked_rows(genes_file):
        for k, t, metrics, stable in robustness_grid(
            row.genes, kg, tg, base, proto, derivative_on=derivative_on
        ):
            vals = _metric_values(metrics)[:4] if metrics is not None else [None] * 4
            rows.append([row.label, k, t, *vals, stable])
    write_csv(
        out / "robustness.csv",
        ["solution", "KG", "tauG", "overshoot", "settling", "rise", "peak", "stable"],
        rows,
    )
    write_manifest(
        out,
        "robustness",
        {
            "genes_file": str(Path(genes_file).resolve()),
            "KG": list(kg),
            "tauG": list(tg),
            "plant": base.to_json_dict(),
            "horizon": horizon,
            "dt": dt,
            "derivative_on": DerivativeOn(derivative_on).value,
        },
        started,
        ["robustness.csv"],
    )
    n_bad = sum(1 for r in rows if not r[-1])
    print(f"{len(rows)} cells, {n_bad} unstable -> {out / 'robustness.csv'}")
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _add_sim_flags(p: argparse.ArgumentParser, with_case: bool = True) -> None:
    if with_case:
        p.add_argument("--case", choices=sorted(CASE_OBJECTIVES), default="I")
        p.add_argument("--disturbance-at", choices=[s.value for s in DisturbanceSite],
                       default=DisturbanceSite.GENERATOR_INPUT.value)
        p.add_argument("--j2-mode", choices=[m.value for m in J2Mode], default=J2Mode.DEVIATION.value)
    p.add_argument("--dt", type=float, default=1e-3, help="integration step in seconds")
    p.add_argument("--horizon", type=float, default=None,
                   help="simulation horizon in seconds (default: 10 for case I, else 20)")
    p.add_argument("--derivative-on", choices=[d.value for d in DerivativeOn],
                   default=DerivativeOn.ERROR.value)
    p.add_argument("--plant", help="JSON file with KA, tauA, KE, tauE, KG, tauG, KS, tauS")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--manifest", help="re-run with the settings recorded in this manifest")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fopid-avr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="run chaotic NSGA-II for one case and controller")
    p.add_argument("--mode", choices=["pid", "fopid"], default="fopid")
    p.add_argument("--pop", type=int, default=100)
    p.add_argument("--max-gens", type=int, default=500)
    p.add_argument("--seed-x0", type=float, default=0.2027)
    p.add_argument("--workers", type=int, default=None,
                   help="processes for fitness evaluation (results are identical)")
    p.add_argument("--no-pareto-truncation", action="store_true",
                   help="do not cap the first front at pareto_fraction * pop")
    _add_sim_flags(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate", help="re-evaluate gene rows from a CSV file")
    p.add_argument("genes_file", nargs="?")
    p.add_argument("--traces", action="store_true", help="also write per-row SimTrace CSVs")
    _add_sim_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("robustness", help="sweep generator K_G and tau_G for gene rows")
    p.add_argument("genes_file", nargs="?")
    p.add_argument("--kg", help="comma-separated K_G values")
    p.add_argument("--taug", help="comma-separated tau_G values")
    _add_sim_flags(p, with_case=False)
    p.set_defaults(func=cmd_robustness)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.command in ("evaluate", "robustness") and not (args.genes_file or args.manifest):
        parser.error(f"{args.command} needs a genes file or --manifest")
    try:
        return args.func(args)
    except (FopidAvrError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
