"""Command-line front end.

    python -m app analyze [--mu 0.1 --m 1024]
    python -m app keyrate [--mu 0.05,0.1,0.2]
    python -m app simulate --N 1000000 --seed 42 [--out run.json]
    python -m app entangle-check [--k-max 4 --delta-theta 0,0.3,1.5708]
    python -m app schema

Exit codes: 0 success, 2 bad flags, 3 key pool, 4 negotiation overflow,
5 verification failure.
"""
import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ValidationError

from app.errors import PKDError, VerificationFailed
from app.middleware.logging import bind_run, setup_logging
from app.schemas.params import CliConfig, Sweep
from app.schemas.records import (
    AnalysisRecord,
    EntanglementRecord,
    KeyRateRow,
    SessionSummary,
)
from app.services.reports import build_analysis, build_entanglement, build_keyrate, build_simulation
from app.settings import settings
from app.startup import run_startup_validation

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_BAD_FLAGS = 2

COMMANDS = ("analyze", "keyrate", "simulate", "entangle-check", "schema")
SIMULATE_DEFAULT_ROUNDS = 10**6

# flag -> CliConfig field, for flags that accept a comma-separated sweep
SWEEPABLE = {
    "mu": "mu", "m": "m", "eta": "eta", "pd": "pd", "f": "f",
    "eps_cor": "eps_cor", "eps_sec": "eps_sec", "N": "N", "s": "s",
}
KEYRATE_COLUMNS = ["param", "n", "E", "ell", "R"]


class CliUsageError(Exception):
    """Flag combination rejected before any computation."""


def _flag(field: str) -> str:
    return "--" + field.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    shared.add_argument('--mu', help='Mean photon number per pulse (comma list sweeps, keyrate only)')
    shared.add_argument('--m', help='Number of global phases, a power of two')
    shared.add_argument('--eta', help='Detector efficiency')
    shared.add_argument('--pd', help='Dark-count probability per gate')
    shared.add_argument('--f', help='Error-correction efficiency')
    shared.add_argument('--eps-cor', dest='eps_cor', help='Correctness failure probability')
    shared.add_argument('--eps-sec', dest='eps_sec', help='Secrecy failure probability')
    shared.add_argument('--N', dest='N', help='Rounds per session')
    shared.add_argument('--s', dest='s', help='Length of K_upd')
    shared.add_argument('--t', dest='t', type=int, help='Negotiation output length')
    shared.add_argument('--seed', type=int, help='Master seed (falls back to PKD_SEED)')
    shared.add_argument('--out', dest='output_path',
                        help='Write the record here instead of stdout; simulate writes its transcript here')
    shared.add_argument('--format', dest='output_format', choices=['json', 'csv'], default='json')
    shared.add_argument('--count-verification-key', action='store_true',
                        help='Deduct the verification tag OTP from the net rate')
    shared.add_argument('--count-pa-seed', action='store_true',
                        help='Draw the privacy-amplification seed from the key pool and deduct it')
    shared.add_argument('--k-max', dest='k_max', type=int, help='Largest photon number checked')
    shared.add_argument('--delta-theta', dest='delta_theta', help='Comma list of phase differences')
    shared.add_argument('--workers', type=int, help='Threads for Monte Carlo shards')

    parser = argparse.ArgumentParser(
        prog='python -m app',
        description='Probability key distribution lab',
        allow_abbrev=False,
    )
    subparsers = parser.add_subparsers(dest='command', required=True)
    subparsers.add_parser('analyze', parents=[shared], allow_abbrev=False,
                          help='Discrimination figures for (mu, m)')
    subparsers.add_parser('keyrate', parents=[shared], allow_abbrev=False,
                          help='Analytic key rate, optionally swept over one parameter')
    subparsers.add_parser('simulate', parents=[shared], allow_abbrev=False,
                          help='Seeded Monte Carlo session')
    subparsers.add_parser('entangle-check', parents=[shared], allow_abbrev=False,
                          help='Zero phase-error check in small Fock spaces')
    subparsers.add_parser('schema', parents=[shared], allow_abbrev=False,
                          help='JSON Schema of every emitted record')
    return parser


def _split_list(text: str) -> List[float]:
    return [float(part) for part in text.split(',') if part.strip()]


def parse_config(argv: Optional[Sequence[str]] = None) -> CliConfig:
    """
    Parse flags into a validated CliConfig.

    Raises:
        CliUsageError: On invalid values, naming the offending flag
    """
    args = build_parser().parse_args(argv)
    values: Dict[str, Any] = {'command': args.command}
    sweep: Optional[Sweep] = None

    for flag, field in SWEEPABLE.items():
        raw = getattr(args, flag)
        if raw is None:
            continue
        try:
            parsed = _split_list(raw)
        except ValueError:
            raise CliUsageError(f"{_flag(flag)}: not a number or list of numbers: {raw!r}")
        if len(parsed) != 1:
            if args.command != 'keyrate':
                raise CliUsageError(f"{_flag(flag)}: lists are only accepted by keyrate")
            if sweep is not None:
                raise CliUsageError(f"{_flag(flag)}: only one parameter may be swept")
            try:
                sweep = Sweep(param=field, values=parsed)
            except ValidationError as exc:
                raise CliUsageError(f"{_flag(flag)}: {exc.errors()[0]['msg']}")
            parsed = parsed[:1]
        value = parsed[0]
        values[field] = int(value) if field in {"m", "N", "s"} and value == int(value) else value

    if args.command == 'simulate' and 'N' not in values:
        values['N'] = SIMULATE_DEFAULT_ROUNDS

    for field in ('t', 'seed', 'output_path', 'output_format', 'k_max', 'workers'):
        value = getattr(args, field)
        if value is not None:
            values[field] = value
    values['count_verification_key'] = args.count_verification_key
    values['count_pa_seed'] = args.count_pa_seed
    if args.delta_theta is not None:
        try:
            values['delta_theta'] = _split_list(args.delta_theta)
        except ValueError:
            raise CliUsageError(f"--delta-theta: not a list of numbers: {args.delta_theta!r}")
    if 'seed' not in values and settings.PKD_SEED is not None:
        values['seed'] = settings.PKD_SEED
    values['sweep'] = sweep

    try:
        return CliConfig(**values)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = str(first['loc'][0]) if first['loc'] else 'arguments'
        raise CliUsageError(f"{_flag(field)}: {first['msg']}")


# =============================================================================
# COMMANDS
# =============================================================================

def run_analyze(cfg: CliConfig) -> AnalysisRecord:
    return build_analysis(cfg.mu, cfg.m)


def run_keyrate(cfg: CliConfig) -> List[KeyRateRow]:
    return build_keyrate(cfg, cfg.sweep)


def run_simulate(cfg: CliConfig) -> Tuple[SessionSummary, Dict[str, Any]]:
    return build_simulation(cfg, cfg.seed or 0, workers=cfg.workers)


def run_entangle_check(cfg: CliConfig) -> EntanglementRecord:
    ks = list(range(cfg.k_max + 1))
    return build_entanglement(ks, cfg.delta_theta, cfg.mu, cfg.m, k_max=cfg.k_max + 1)


def record_schemas() -> Dict[str, Any]:
    """JSON Schema of every record the CLI emits."""
    return {
        model.__name__: model.model_json_schema()
        for model in (AnalysisRecord, KeyRateRow, SessionSummary, EntanglementRecord, CliConfig)
    }


# =============================================================================
# OUTPUT
# =============================================================================

def _csv_text(rows: List[Dict[str, Any]], columns: Optional[List[str]] = None) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns or list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def render(record: Any, output_format: str) -> str:
    """Serialize a record (or list of records) as JSON or CSV text."""
    if output_format == 'json':
        if isinstance(record, list):
            return json.dumps([r.model_dump(mode='json', by_alias=True) for r in record], indent=2) + "\n"
        if isinstance(record, BaseModel):
            return record.model_dump_json(indent=2, by_alias=True) + "\n"
        return json.dumps(record, indent=2, sort_keys=True) + "\n"

    if isinstance(record, list):
        return _csv_text([r.model_dump() for r in record], KEYRATE_COLUMNS)
    if isinstance(record, EntanglementRecord):
        return _csv_text([row.model_dump() for row in record.rows])
    if hasattr(record, 'flat'):
        return _csv_text([record.flat()])
    raise CliUsageError("--format csv is not available for this command")


def emit(text: str, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _run_command(cfg: CliConfig) -> int:
    run_startup_validation()

    if cfg.command == 'schema':
        emit(render(record_schemas(), 'json'), cfg.output_path)
        return EXIT_OK

    if cfg.command == 'analyze':
        record = run_analyze(cfg)
    elif cfg.command == 'keyrate':
        record = run_keyrate(cfg)
    elif cfg.command == 'simulate':
        record, transcript = run_simulate(cfg)
    else:
        record = run_entangle_check(cfg)

    if cfg.command == 'simulate':
        # transcript to --out, summary to stdout
        if cfg.output_path:
            emit(json.dumps(transcript, sort_keys=True, indent=1) + "\n", cfg.output_path)
        emit(render(record, cfg.output_format), None)
    else:
        emit(render(record, cfg.output_format), cfg.output_path)

    if cfg.command == 'simulate' and not record.verification_passed:
        print(f"Error: {VerificationFailed().message}", file=sys.stderr)
        return VerificationFailed.exit_code
    if cfg.command == 'entangle-check' and not record.passed:
        return EXIT_FAILED_CHECK
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one CLI command and return its exit code."""
    setup_logging()
    try:
        cfg = parse_config(argv)
    except CliUsageError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_BAD_FLAGS
    except SystemExit as exc:
        # argparse: unknown flags exit 2, --help exits 0
        return int(exc.code or 0)

    with bind_run(cfg.command):
        try:
            return _run_command(cfg)
        except CliUsageError as exc:
            print(f"Error: {exc}", file=sys.stderr)
            return EXIT_BAD_FLAGS
        except PKDError as exc:
            logger.error(f"{cfg.command} failed: {exc.message}", extra={'extra_fields': {'error': exc.code}})
            print(f"Error: {exc.message}", file=sys.stderr)
            return exc.exit_code
        except (ValidationError, ValueError) as exc:
            print(f"Error: {exc}", file=sys.stderr)
            return EXIT_BAD_FLAGS
