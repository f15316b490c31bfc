"""Command-line orchestration: plan, simulate, reconstruct, study, oracle.

Every command reads one JSON configuration document and derives all run
objects from it, so the artifacts it writes are reproducible: rerunning
a command with the same inputs and seed produces byte-identical files.
Each output embeds the config hash and the master seed.  Library errors
map onto exit codes (0 success, 2 config, 3 data, 4 numerical).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .errors import DataError, QnsError
from .estimation import (
    SpectrumEstimate,
    background_subtract,
    bootstrap_ci,
    pipeline_estimator,
    records_from_expectations,
)
from .noise import target_spectra
from .oracle import SpectralModel, oracle_expectations
from .sequences import ExperimentPlan
from .simulator import RunResult, run_plan
from .studies import (
    comb_compare_study,
    delay_sweep_study,
    mitigation_compare_study,
    pulse_width_study,
)

__all__ = ["build_parser", "main"]

_SPECTRUM_COLUMNS = ("s11", "s22", "re_s12", "im_s12", "s1212")


# ---------------------------------------------------------------------------
# Deterministic artifact writers

def _out_dir(cfg: RunConfig, args) -> Path:
    out = Path(args.out_dir or cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _write_csv(path: Path, header, rows, provenance) -> None:
    with open(path, "w", newline="") as fh:
        for key in sorted(provenance):
            fh.write(f"# {key}={provenance[key]}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _load_records(path) -> RunResult:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read records {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"records {path} is not valid JSON: {exc}") from exc
    return RunResult.from_dict(doc)


def _read_spectra_csv(path, centers: np.ndarray) -> dict[str, np.ndarray]:
    """Reference spectra on the reconstruction grid, from our CSV format."""
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(
                line for line in fh if not line.startswith("#"))
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read spectra {path}: {exc}") from exc
    if not rows or reader.fieldnames is None:
        raise DataError(f"spectra file {path} is empty")
    missing = [c for c in ("omega_rad_s", *_SPECTRUM_COLUMNS)
               if c not in reader.fieldnames]
    if missing:
        raise DataError(f"spectra file {path} lacks columns {missing}")
    try:
        omega = np.array([float(r["omega_rad_s"]) for r in rows])
        blocks = {name: np.array([float(r[name]) for r in rows])
                  for name in _SPECTRUM_COLUMNS}
    except ValueError as exc:
        raise DataError(f"spectra file {path}: non-numeric cell: {exc}") \
            from exc
    if len(omega) != len(centers) or not np.allclose(omega, centers,
                                                     rtol=1e-6):
        raise DataError(
            f"spectra file {path} is on a different frequency grid than "
            f"the configured plan ({len(omega)} vs {len(centers)} bins)")
    return blocks


# ---------------------------------------------------------------------------
# Shared run steps

def _simulate(cfg: RunConfig, threads: int | None,
              infinite_shots: bool) -> RunResult:
    shots = None if infinite_shots else cfg.shots
    return run_plan(cfg.build_plan(), list(cfg.noise), statics=cfg.statics,
                    n_trajectories=cfg.trajectories, shots=shots,
                    readout=None if shots is None else cfg.readout,
                    pulse_model=cfg.pulse, master_seed=cfg.seed,
                    oversample=cfg.oversample,
                    threads=threads or cfg.threads, sampling=cfg.sampling)


def _oracle_result(cfg: RunConfig) -> RunResult:
    """Cumulant-predicted expectations wrapped as an infinite-shot run."""
    plan = cfg.build_plan()
    model = SpectralModel.from_noise_specs(cfg.noise, dt=cfg.fine_dt)
    records = records_from_expectations(
        plan, oracle_expectations(plan, cfg.statics, model))
    return RunResult(records=records, master_seed=cfg.seed,
                     n_trajectories=1, shots=None)


def _require_settings(plan: ExperimentPlan, result: RunResult) -> None:
    for setting in plan.settings:
        if setting.key not in result.records:
            raise DataError(
                f"records are missing setting (combo={setting.combo}, "
                f"k={setting.k}) required by the configured plan")


def _reconstruct(cfg: RunConfig, result: RunResult) -> SpectrumEstimate:
    plan = cfg.build_plan()
    _require_settings(plan, result)
    estimator = pipeline_estimator(cfg.system(), cfg.options,
                                   total_time=plan.duration)
    if cfg.bootstrap_resamples and result.n_trajectories > 1:
        return bootstrap_ci(result, cfg.bootstrap_resamples, estimator,
                            seed=cfg.seed, confidence=cfg.confidence,
                            threads=cfg.threads)
    return estimator(result)


# ---------------------------------------------------------------------------
# Commands

def cmd_plan(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    plan = cfg.build_plan()
    doc = {
        "format": "qns-plan-v1",
        "provenance": cfg.provenance(),
        "K": plan.K,
        "m": plan.m,
        "tau_pi": plan.tau_pi,
        "repetitions": plan.repetitions,
        "n_slots": plan.n_slots,
        "duration": plan.duration,
        "max_pulses": plan.max_pulses,
        "settings": [
            {"combo": s.combo, "k": s.k, "prep": list(s.prep),
             "observables": list(s.observables),
             "pulses1": sorted(int(p) for p in s.seq1.pulse_slots),
             "pulses2": sorted(int(p) for p in s.seq2.pulse_slots)}
            for s in plan.settings],
    }
    out = _out_dir(cfg, args)
    _write_json(out / "plan.json", doc)
    print(f"{len(plan.settings)} settings, up to {plan.n_slots} pulses "
          f"per sequence ({plan.max_pulses} in the densest sequence)")
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    if args.oracle:
        result = _oracle_result(cfg)
    else:
        result = _simulate(cfg, args.threads, args.infinite_shots)
    doc = result.to_dict()
    doc["provenance"] = cfg.provenance()
    out = _out_dir(cfg, args)
    _write_json(out / "records.json", doc)
    mode = "oracle" if args.oracle else \
        f"{result.n_trajectories} trajectories"
    print(f"{len(result.records)} records ({mode}) -> "
          f"{out / 'records.json'}")
    return 0


def cmd_reconstruct(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    result = _load_records(args.records)
    estimate = _reconstruct(cfg, result)

    reference = None
    if args.truth is not None:
        reference = _read_spectra_csv(args.truth, cfg.grid().centers)
    report = estimate.report(reference=reference)
    report["provenance"] = cfg.provenance()

    delta = None
    if args.subtract is not None:
        native = _reconstruct(cfg, _load_records(args.subtract))
        delta = background_subtract(estimate, native)
        report["subtracted"] = str(args.subtract)

    out = _out_dir(cfg, args)
    estimate.to_csv(out / "spectra.csv", provenance=cfg.provenance())
    if delta is not None:
        delta.to_csv(out / "delta_spectra.csv", provenance=cfg.provenance())
    _write_json(out / "report.json", report)
    line = f"{estimate.grid.n_bins} bins, cond {estimate.cond:.3g}"
    if reference is not None:
        pcts = [report["mae"][name]["pct_of_range"]
                for name in _SPECTRUM_COLUMNS]
        pcts = [p for p in pcts if p is not None]
        if pcts:
            line += f", worst MAE {max(pcts):.2f}% of range"
    print(line + f" -> {out / 'spectra.csv'}")
    return 0


def cmd_oracle(args) -> int:
    """Cumulant-path records plus the analytic target spectra CSV."""
    cfg = load_config(args.config, seed_override=args.seed)
    result = _oracle_result(cfg)
    doc = result.to_dict()
    doc["provenance"] = cfg.provenance()

    grid = cfg.grid()
    truth = target_spectra(cfg.noise, grid.centers)
    rows = [
        [repr(float(w)), repr(float(truth.s11[i])), repr(float(truth.s22[i])),
         repr(float(truth.s12.real[i])), repr(float(truth.s12.imag[i])),
         repr(float(truth.s1212[i]))]
        for i, w in enumerate(grid.centers)]

    out = _out_dir(cfg, args)
    _write_json(out / "records.json", doc)
    _write_csv(out / "truth_spectra.csv", ["omega_rad_s", *_SPECTRUM_COLUMNS],
               rows, cfg.provenance())
    print(f"{len(result.records)} oracle records and {grid.n_bins} "
          f"truth bins -> {out}")
    return 0


def _study_rows(report: dict) -> tuple[list, list]:
    """Flatten a study report into plot-ready CSV rows."""
    name = report["study"]
    if name == "delay-sweep":
        header = ["delay", "omega_rad_s", "re_s12", "im_s12",
                  "re_s12_truth", "im_s12_truth"]
        rows = [[e["delay"], w, e["re_s12"][i], e["im_s12"][i],
                 e["re_s12_truth"][i], e["im_s12_truth"][i]]
                for e in report["entries"]
                for i, w in enumerate(e["omega"])]
    elif name == "comb-compare":
        variants = [k for k in report["entries"][0]
                    if isinstance(report["entries"][0][k], dict)]
        header = ["alpha", "omega_rad_s", "re_s12_truth",
                  *(f"re_s12_{v}" for v in variants)]
        rows = [[e["alpha"], w, e["re_s12_truth"][i],
                 *(e[v]["re_s12"][i] for v in variants)]
                for e in report["entries"]
                for i, w in enumerate(e["omega"])]
    elif name == "pulse-width":
        header = ["seed", "same", "alternating"]
        rows = [[e["seed"], e["same"], e["alternating"]]
                for e in report["per_seed"]]
    else:
        header = ["omega_rad_s", "block", "raw", "mitigated", "ideal"]
        spectra = report["spectra"]
        rows = [[w, block, spectra["raw"][block][i],
                 spectra["mitigated"][block][i], spectra["ideal"][block][i]]
                for block in _SPECTRUM_COLUMNS
                for i, w in enumerate(report["omega"])]
    return header, rows


_STUDIES = {
    "delay-sweep": delay_sweep_study,
    "comb-compare": comb_compare_study,
    "pulse-width": pulse_width_study,
    "mitigation-compare": mitigation_compare_study,
}


def cmd_study(args) -> int:
    cfg = load_config(args.config, seed_override=None)
    params = dict(cfg.study.get(args.study.replace("-", "_"), {}))
    if args.seed is not None:
        params["master_seed"] = args.seed
    if args.study != "pulse-width":
        params.setdefault("threads", args.threads or cfg.threads)
    try:
        report = _STUDIES[args.study](**params)
    except TypeError as exc:
        raise DataError(f"bad parameters for study {args.study}: {exc}") \
            from exc
    report["provenance"] = cfg.provenance()

    out = _out_dir(cfg, args)
    _write_json(out / f"{args.study}.json", report)
    header, rows = _study_rows(report)
    _write_csv(out / f"{args.study}.csv", header, rows, cfg.provenance())
    print(f"study {args.study} -> {out / (args.study + '.json')}")
    return 0


# ---------------------------------------------------------------------------
# Entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qns",
        description="Two-qubit dephasing and crosstalk noise spectroscopy: "
                    "plan pulse settings, simulate the protocol, and "
                    "reconstruct spectra from measurement records.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True,
                       help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the configured seed")
        p.add_argument("--out-dir", default=None,
                       help="output directory (default: config output_dir "
                            "or the working directory)")
        p.set_defaults(func=func)
        return p

    add("plan", cmd_plan, "enumerate the pulse-sequence settings")

    p = add("simulate", cmd_simulate,
            "run the trajectory-sampled measurement protocol")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for the per-setting loop")
    p.add_argument("--infinite-shots", action="store_true",
                   help="record exact per-trajectory expectations")
    p.add_argument("--oracle", action="store_true",
                   help="cumulant predictions instead of trajectories")

    p = add("reconstruct", cmd_reconstruct,
            "extract decay rates and invert them into spectra")
    p.add_argument("--records", required=True,
                   help="records.json from simulate or oracle")
    p.add_argument("--subtract", default=None, metavar="RECORDS",
                   help="second records file reconstructed and subtracted "
                        "as a background")
    p.add_argument("--truth", default=None, metavar="SPECTRA_CSV",
                   help="reference spectra for an error table")

    p = add("study", cmd_study, "run one of the comparison studies")
    p.add_argument("--study", required=True, choices=sorted(_STUDIES),
                   help="which study to run")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads passed to the study")

    add("oracle", cmd_oracle,
        "cumulant-path records plus analytic truth spectra")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QnsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
