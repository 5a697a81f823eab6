#!/usr/bin/env python3
"""
Ion Grover Search Command Line
==============================

Subcommands:

    simulate   run the search on the ion chain and emit the population trace
    tune       find (g0T, deltaT) for a reflection or oracle pulse
    ideal      run the ideal database-level search
    basis      dump the sector basis or the chain census
    pulse      apply one pulse and report the probe phases
    validate   run the invariant suite

Exit codes: 0 success, 1 validation failure, 2 usage or configuration
error, 3 numerical failure.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from algorithm import REFERENCE_PULSE_TABLE, RunResult, phi_states, run_search
from collective import build_collective_operators, build_ms_basis, chain_census, chain_representatives, dicke_state
from config import (
    SCHEMA_VERSION,
    ConfigManager,
    ExperimentConfig,
    PulseDocument,
    SimulateDocument,
    deep_merge,
)
from dynamics import PhaseReport, extract_phases
from exceptions import ConfigurationError, NumericalError, TuningFailedError
from hilbert import IonConfig, StateVector, basis_state, basis_table, build_sector_basis, format_ion_bits
from ideal_search import min_steps, run_ideal
from progress import print_run_header, print_run_summary, print_step_progress, print_validation_summary
from tuner import tune
from utils.logs import setup_logging
from utils.provenance import environment_versions, utc_timestamp, write_csv, write_json
from validation import run_validation_suite

logger = logging.getLogger(__name__)

TRACE_HEADER = ("step", "tau_elapsed", "marked_population", "norm")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _range(text: str) -> Tuple[float, float]:
    """'a:b' -> (a, b)."""
    try:
        low, high = (float(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a range 'low:high', got {text!r}") from None
    return low, high


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        type=str,
        help="JSON run document (or an emitted JSON result); its values override flags"
    )
    common.add_argument(
        "--settings",
        type=str,
        help="Simulator settings JSON (default: configs/default_config.json)"
    )
    common.add_argument(
        "-o", "--output",
        type=str,
        help="Output file (default: stdout)"
    )
    common.add_argument(
        "--format",
        choices=["csv", "json"],
        help="Output format for traces (default: csv)"
    )
    common.add_argument(
        "-v", "--verbose",
        action="count",
        default=0,
        help="Log progress (-v info, -vv debug)"
    )
    common.add_argument(
        "-q", "--quiet",
        action="store_true",
        help="Only log errors and skip the console progress"
    )

    parser = argparse.ArgumentParser(
        prog="cli.py",
        description="Grover search with red-sideband pulses on a trapped-ion chain",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    # Reference run for six ions, trace as CSV
    python cli.py simulate --N 6 --marked 111000 --oracle-g0T 28.610 --oracle-deltaT 19.470 \\
        --refl-g0T 25.830 --refl-deltaT 10.320 --steps 3

    # Ideal search on a 20-item database
    python cli.py ideal --N 20 --phi 3.14159265 --steps 3

    # Tune the reflection pulse for six ions
    python cli.py tune --kind reflection --N 6 --g0T-range 1:40 --deltaT-range 1:40

    # Re-run an emitted result
    python cli.py simulate --config results/run.json
        """
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", parents=[common], help="Run the search on the ion chain")
    simulate.add_argument("--N", dest="n_ions", type=int, help="Number of ions (even)")
    simulate.add_argument("--marked", type=str, help="Marked bitstring, ion 1 leftmost (default: 1..10..0)")
    simulate.add_argument("--oracle-g0T", type=float)
    simulate.add_argument("--oracle-deltaT", type=float)
    simulate.add_argument("--refl-g0T", type=float)
    simulate.add_argument("--refl-deltaT", type=float)
    simulate.add_argument("--steps", type=int, help="Grover steps (default: optimal for C(N, N/2))")
    simulate.add_argument("--K", dest="window", type=float, help="Pulse window half-width in units of T")
    simulate.add_argument("--seed", type=int, help="Seed for the measurement sample")
    simulate.add_argument("--shots", type=int, help="Number of measurement shots")
    simulate.add_argument("--mid-step", action="store_true", default=None,
                          help="Also record the population after each oracle pulse")
    simulate.add_argument("--trace-points", type=int, help="Samples per pulse for a continuous trace")
    simulate.add_argument("--frame", choices=["chain", "addressed"], help="Detuning frame")

    tuner = sub.add_parser("tune", parents=[common], help="Tune a reflection or oracle pulse")
    tuner.add_argument("--kind", choices=["reflection", "oracle"])
    tuner.add_argument("--N", dest="n_ions", type=int, help="Number of ions (even)")
    tuner.add_argument("--marked", type=str, help="Marked bitstring for the oracle")
    tuner.add_argument("--g0T-range", type=_range, help="g0T bounds 'low:high'")
    tuner.add_argument("--deltaT-range", type=_range, help="deltaT bounds 'low:high'")
    tuner.add_argument("--grid", type=int, help="Grid points per axis")
    tuner.add_argument("--tolerance", type=float, help="Refinement tolerance on the objective")
    tuner.add_argument("--target-phase", type=float, help="Reflection phase to tune for (default: pi)")
    tuner.add_argument("--subspace", choices=["database", "symmetric"])
    tuner.add_argument("--evaluation", choices=["reduced", "sector"])
    tuner.add_argument("--threshold", type=float, help="Largest acceptable objective")
    tuner.add_argument("--K", dest="window", type=float, help="Pulse window half-width in units of T")
    tuner.add_argument("--frame", choices=["chain", "addressed"], help="Detuning frame")

    ideal = sub.add_parser("ideal", parents=[common], help="Run the ideal database search")
    ideal.add_argument("--N", dest="dimension", type=int, help="Database dimension")
    ideal.add_argument("--phi", type=float, help="Inversion phase (default: pi)")
    ideal.add_argument("--phi-s", type=float, help="Oracle phase (default: equal to --phi)")
    ideal.add_argument("--steps", type=int, help="Grover steps (default: optimal)")
    ideal.add_argument("--marked", type=int, help="Index of the marked item")

    basis = sub.add_parser("basis", parents=[common], help="Dump the sector basis")
    basis.add_argument("--N", dest="n_ions", type=int, help="Number of ions (even)")
    basis.add_argument("--chains", action="store_true", default=None, help="Emit the chain census instead")

    pulse = sub.add_parser("pulse", parents=[common], help="Apply one pulse and report probe phases")
    pulse.add_argument("--N", dest="n_ions", type=int, help="Number of ions (even)")
    pulse.add_argument("--g0T", type=float)
    pulse.add_argument("--deltaT", type=float)
    pulse.add_argument("--K", dest="window", type=float, help="Pulse window half-width in units of T")
    pulse.add_argument("--addressed", type=str, help="'all', 'markedhalf' or a 0/1 bitmask")
    pulse.add_argument("--marked", type=str, help="Marked bitstring for 'markedhalf' and phi probes")
    pulse.add_argument("--probes", choices=["chains", "phi", "dicke", "database"])
    pulse.add_argument("--frame", choices=["chain", "addressed"], help="Detuning frame")

    sub.add_parser("validate", parents=[common], help="Run the invariant suite")
    return parser


def _drop_none(values: Dict[str, Any]) -> Dict[str, Any]:
    return {key: value for key, value in values.items() if value is not None}


def _pulse_flags(g0T: Optional[float], deltaT: Optional[float]) -> Optional[Dict[str, float]]:
    flags = _drop_none({"g0T": g0T, "deltaT": deltaT})
    return flags or None


def payload_from_flags(args: argparse.Namespace) -> Dict[str, Any]:
    """The run-document payload described by the command-line flags."""
    if args.command == "simulate":
        return _drop_none({
            "n_ions": args.n_ions,
            "marked_bits": args.marked,
            "oracle": _pulse_flags(args.oracle_g0T, args.oracle_deltaT),
            "reflection": _pulse_flags(args.refl_g0T, args.refl_deltaT),
            "n_steps": args.steps,
            "window": args.window,
            "frame": args.frame,
            "rng_seed": args.seed,
            "n_shots": args.shots,
            "record_mid_step": args.mid_step,
            "trace_points": args.trace_points,
        })
    if args.command == "tune":
        return _drop_none({
            "kind": args.kind,
            "n_ions": args.n_ions,
            "marked_bits": args.marked,
            "g0T_range": args.g0T_range,
            "deltaT_range": args.deltaT_range,
            "grid_density": args.grid,
            "refine_tolerance": args.tolerance,
            "target_phase": args.target_phase,
            "subspace": args.subspace,
            "evaluation": args.evaluation,
            "objective_threshold": args.threshold,
            "window": args.window,
            "frame": args.frame,
        })
    if args.command == "ideal":
        return _drop_none({
            "dimension": args.dimension,
            "phi": args.phi,
            "phi_s": args.phi_s,
            "n_steps": args.steps,
            "marked": args.marked,
        })
    if args.command == "basis":
        return _drop_none({"n_ions": args.n_ions, "chains": args.chains})
    return _drop_none({
        "n_ions": args.n_ions,
        "g0T": args.g0T,
        "deltaT": args.deltaT,
        "window": args.window,
        "addressed": args.addressed,
        "marked_bits": args.marked,
        "probes": args.probes,
        "frame": args.frame,
    })


def _with_reference_pulses(payload: Dict[str, Any]) -> Dict[str, Any]:
    """Fill missing simulate pulses from the reference table when N has a row."""
    row = REFERENCE_PULSE_TABLE.get(payload.get("n_ions"))
    if row is None:
        return payload
    filled = dict(payload)
    for role in ("oracle", "reflection"):
        g0T, deltaT = row[role]
        filled[role] = {"g0T": g0T, "deltaT": deltaT, **(payload.get(role) or {})}
    return filled


def read_document(path: str) -> Dict[str, Any]:
    """Raw run document; an emitted result is unwrapped to its provenance block."""
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} must hold a JSON object")
    if "provenance" in data:
        data = data["provenance"]
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: the provenance block must be a JSON object")
    return data


def load_experiment_config(path: str) -> ExperimentConfig:
    """Parse an ExperimentConfig document or an emitted JSON result."""
    return ExperimentConfig.model_validate(read_document(path))


def resolve_experiment(args: argparse.Namespace) -> ExperimentConfig:
    """Merge the flags with --config (the file wins) into one ExperimentConfig."""
    payload = payload_from_flags(args)
    document: Dict[str, Any] = {}
    if args.config:
        document = read_document(args.config)
        present = [name for name in ("simulate", "tune", "ideal", "basis", "pulse") if document.get(name)]
        if present and present != [args.command]:
            raise ConfigurationError(f"{args.config} describes {present}, not '{args.command}'")
        payload = deep_merge(payload, document.get(args.command) or {})
    if args.command == "simulate":
        payload = _with_reference_pulses(payload)

    merged = {
        "schema_version": document.get("schema_version", SCHEMA_VERSION),
        args.command: payload,
        "output_path": document.get("output_path") or args.output,
        "format": document.get("format") or args.format or "csv",
    }
    return ExperimentConfig.model_validate(_drop_none(merged))


def provenance_block(command: str, payload: Dict[str, Any], fmt: str) -> Dict[str, Any]:
    """A run document that reproduces the output it is embedded in."""
    return {"schema_version": SCHEMA_VERSION, command: payload, "format": fmt}


def _document_header(kind: str, provenance: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "created": utc_timestamp(),
        "versions": environment_versions(),
        "provenance": provenance,
    }


def run_summary(result: RunResult) -> Dict[str, Any]:
    def phases(report: Optional[PhaseReport]) -> Optional[Dict[str, object]]:
        return report.to_dict() if report is not None else None

    return {
        "final_fidelity": result.final_fidelity,
        "populations": [[step, population] for step, population in result.populations],
        "norm_drift": result.norm_drift,
        "oracle_phases": phases(result.oracle_phases),
        "reflection_phases": phases(result.reflection_phases),
        "rng_seed": result.config.rng_seed,
        "n_shots": result.config.n_shots,
        "sample_counts": dict(sorted(result.sample_counts().items())),
        "metrics": result.metrics,
        "wall_time": result.wall_time,
    }


def _trace_rows(result: RunResult) -> List[Tuple[Any, ...]]:
    return [
        (int(row.step) if row.is_step_boundary else row.step, row.tau_elapsed, row.marked_population, row.norm)
        for row in result.trace
    ]


def emit_trace(result: RunResult, fmt: str = "csv", path: Optional[str] = None,
               experiment: Optional[SimulateDocument] = None) -> List[Path]:
    """Write the population trace as CSV or JSON, with provenance.

    CSV written to a file is accompanied by <stem>.summary.json holding the
    phases, samples and metrics. Returns the paths written.
    """
    if fmt not in ("csv", "json"):
        raise ConfigurationError(f"format must be 'csv' or 'json', got {fmt!r}")
    document = experiment or SimulateDocument.from_algorithm_config(result.config)
    provenance = provenance_block("simulate", document.model_dump(mode="json"), fmt)
    written: List[Path] = []

    if fmt == "json":
        output = _document_header("simulate", provenance)
        output["trace"] = [dict(zip(TRACE_HEADER, row)) for row in _trace_rows(result)]
        output["summary"] = run_summary(result)
        target = write_json(output, path)
        return [target] if target else written

    comments = {"schema_version": SCHEMA_VERSION, "provenance": provenance}
    target = write_csv(TRACE_HEADER, _trace_rows(result), path, comments)
    if target is not None:
        written.append(target)
        summary = _document_header("simulate", provenance)
        summary["summary"] = run_summary(result)
        summary_path = write_json(summary, target.with_name(f"{target.stem}.summary.json"))
        if summary_path is not None:
            written.append(summary_path)
    return written


def _pulse_probes(doc: PulseDocument, ions: IonConfig) -> Tuple[List[StateVector], List[str]]:
    basis = build_sector_basis(ions)
    if doc.probes == "chains":
        ms_basis = build_ms_basis(basis, build_collective_operators(basis, ions.all_ions))
        representatives = chain_representatives(ms_basis)
        return list(representatives.values()), [f"j={j}" for j in representatives]
    if doc.probes == "phi":
        states = phi_states(ions, doc.marked_bits, basis)
        return states, [f"phi_{k}" for k in range(len(states))]
    if doc.probes == "dicke":
        counts = range(ions.excitations, -1, -1)
        return [dicke_state(basis, n) for n in counts], [f"dicke_{n}" for n in counts]
    kets = basis.kets[basis.database_slice]
    return [basis_state(basis, ket) for ket in kets], [format_ion_bits(ket.ion_bits, ions.n_ions) for ket in kets]


class CommandRunner:
    """Executes one resolved experiment."""

    def __init__(self, experiment: ExperimentConfig, settings: ConfigManager, quiet: bool = False):
        self.experiment = experiment
        self.settings = settings
        self.integrator_settings = settings.get_integrator_settings()
        self.quiet = quiet
        self.logger = logging.getLogger(__name__)

    @property
    def output(self) -> Optional[str]:
        return self.experiment.output_path

    def run(self) -> int:
        return getattr(self, f"run_{self.experiment.command}")()

    def run_simulate(self) -> int:
        document = self.experiment.simulate.resolved(self.settings)
        config = document.to_algorithm_config(self.settings)
        progress = None
        if not self.quiet:
            print_run_header("Ion Grover Search", {
                "Ions": config.ions.n_ions,
                "Marked": config.marked_bits,
                "Steps": config.n_steps,
                "Oracle (g0T, deltaT)": (config.oracle_pulse.g0T, config.oracle_pulse.deltaT),
                "Reflection (g0T, deltaT)": (config.reflection_pulse.g0T, config.reflection_pulse.deltaT),
                "Integrator": self.integrator_settings.method,
            })

            def progress(step: int, population: float) -> None:
                print_step_progress(step, config.n_steps, population)

        result = run_search(config, self.integrator_settings, progress)
        if not self.quiet:
            print_run_summary(result.final_fidelity, result.norm_drift, result.wall_time)
        emit_trace(result, self.experiment.format, self.output,
                   SimulateDocument.from_algorithm_config(config))
        return EXIT_OK

    def run_tune(self) -> int:
        document = self.experiment.tune.resolved(self.settings)
        target = document.to_target(self.settings)
        provenance = provenance_block("tune", document.model_dump(mode="json"), "json")
        if not self.quiet:
            print_run_header("Pulse Tuner", {
                "Kind": target.operator_kind,
                "Ions": target.ions.n_ions,
                "g0T bounds": target.g0T_bounds,
                "deltaT bounds": target.deltaT_bounds,
                "Grid": f"{target.grid_density} x {target.grid_density}",
                "Evaluation": target.evaluation,
            })
        output = _document_header("tune", provenance)
        try:
            result = tune(target, self.integrator_settings)
        except TuningFailedError as exc:
            output["status"] = "failed"
            output["result"] = exc.best.to_dict()
            write_json(output, self.output)
            raise
        output["status"] = "ok"
        output["result"] = result.to_dict()
        write_json(output, self.output)
        return EXIT_OK

    def run_ideal(self) -> int:
        doc = self.experiment.ideal
        db = doc.to_database()
        phi_s = doc.phi if doc.phi_s is None else doc.phi_s
        n_steps = min_steps(db.dimension) if doc.n_steps is None else doc.n_steps
        resolved = doc.model_copy(update={"phi_s": phi_s, "n_steps": n_steps})
        provenance = provenance_block("ideal", resolved.model_dump(mode="json"), self.experiment.format)
        populations = run_ideal(db, doc.phi, phi_s, n_steps, doc.method)
        rows = [(step, float(p)) for step, p in enumerate(populations)]

        if self.experiment.format == "json":
            output = _document_header("ideal", provenance)
            output["trace"] = [{"step": step, "population": p} for step, p in rows]
            output["summary"] = {"final_population": rows[-1][1], "peak_population": max(p for _, p in rows)}
            write_json(output, self.output)
        else:
            write_csv(("step", "population"), rows, self.output,
                      {"schema_version": SCHEMA_VERSION, "provenance": provenance})
        return EXIT_OK

    def run_basis(self) -> int:
        doc = self.experiment.basis
        ions = IonConfig(doc.n_ions)
        provenance = provenance_block("basis", doc.model_dump(mode="json"), "json" if doc.chains else "csv")
        if doc.chains:
            output = _document_header("chains", provenance)
            output["chains"] = [
                {"j": spec.j, "N_j": spec.degeneracy, "couplings": list(spec.rung_couplings)}
                for spec in chain_census(ions)
            ]
            write_json(output, self.output)
        else:
            write_csv(("index", "bits", "n_i", "n_p"), basis_table(build_sector_basis(ions)), self.output,
                      {"schema_version": SCHEMA_VERSION, "provenance": provenance}, delimiter="\t")
        return EXIT_OK

    def run_pulse(self) -> int:
        doc = self.experiment.pulse.resolved(self.settings)
        ions, pulse = doc.to_pulse(self.settings)
        probes, labels = _pulse_probes(doc, ions)
        report = extract_phases(probes[0].basis, pulse, probes, labels, self.integrator_settings)
        for entry in report.entries:
            if entry.return_population < 0.99:
                self.logger.warning("probe %s returns only %.4f of its population", entry.label,
                                    entry.return_population)
        output = _document_header("pulse", provenance_block("pulse", doc.model_dump(mode="json"), "json"))
        output["report"] = report.to_dict()
        write_json(output, self.output)
        return EXIT_OK


def run_validate(settings: ConfigManager, output: Optional[str], quiet: bool) -> int:
    results = run_validation_suite(settings.get_integrator_settings())
    if not quiet:
        print_validation_summary(results)
    if output:
        write_json({
            "schema_version": SCHEMA_VERSION,
            "kind": "validate",
            "created": utc_timestamp(),
            "versions": environment_versions(),
            "checks": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results],
        }, output)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def _log_level(args: argparse.Namespace, settings: ConfigManager) -> str:
    if args.quiet:
        return "error"
    if args.verbose:
        return "debug" if args.verbose > 1 else "info"
    return os.environ.get("IGS_LOG") or settings.get_logging_config().get("level") or "warning"


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        settings = ConfigManager(args.settings)
        logging_config = settings.get_logging_config()
        setup_logging(_log_level(args, settings), logging_config.get("log_dir"))
        if args.command == "validate":
            return run_validate(settings, args.output, args.quiet)
        experiment = resolve_experiment(args)
        return CommandRunner(experiment, settings, args.quiet).run()
    except TuningFailedError as exc:
        print(f"Tuning failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigurationError, ValidationError) as exc:
        print(f"Configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"Numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("Interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    raise SystemExit(main())
