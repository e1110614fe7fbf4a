# main.py
"""
Punkt wejścia: podkomendy distance, sweep, gnn-compare, check, bound.

Kody wyjścia: 0 sukces, 2 błąd konfiguracji, 3 błąd dziedziny albo założeń,
4 błąd normalizacji parametrów sieci.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from bounds_model import (
    THEOREM_GNN_APPROXIMATION,
    THEOREM_GNN_SIGNAL_GAP,
    check_lipschitz_map,
    check_piece_structure,
    evaluate_bound,
    run_resolution_sweep,
)
from config import THEOREMS, ConfigError, ExperimentConfig, load_experiment_config
from gnn_model import GnnParams, load_gnn_params, random_gnn_params
from metric_model import dm_estimate
from models import (
    FLAG_CONSTANT_TO_LIPSCHITZ,
    DomainError,
    GraphopError,
    HypothesisViolationError,
    ParameterNormalizationError,
    ProfileSampleConfig,
    SerializationError,
)
from operator_model import build_operator, build_operator_pair, check_self_adjoint
from report_encoder import (
    FORMAT_CSV,
    FORMAT_JSON,
    encode_bound_reports_csv,
    encode_bound_reports_json,
    encode_check_reports_csv,
    encode_check_reports_json,
    encode_distance_report_json,
    write_report,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_NORMALIZATION = 4


# ---------- Pomocnicze ----------

def _apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
        update["profile"] = cfg.profile.model_copy(update={"seed": None})
    if args.threads is not None:
        update["threads"] = args.threads
    if args.strict:
        update["strict"] = True
    output = {}
    if args.out is not None:
        output["path"] = Path(args.out)
    if args.format is not None:
        output["format"] = args.format
    if output:
        update["output"] = cfg.output.model_copy(update=output)
    return cfg.model_copy(update=update) if update else cfg


def _profile_config(cfg: ExperimentConfig) -> ProfileSampleConfig:
    p = cfg.profile
    return ProfileSampleConfig(
        k=p.k,
        C_v=p.C_v,
        num_tuples=p.num_tuples,
        Q=p.Q,
        seed=cfg.profile_seed,
        estimator=p.estimator,
        family=p.family,
        lipschitz_schedule=p.lipschitz_schedule,
    )


def _threads(cfg: ExperimentConfig) -> int:
    return cfg.threads or os.cpu_count() or 1


def _gnn_params(cfg: ExperimentConfig) -> GnnParams:
    if cfg.gnn is None:
        raise ConfigError("gnn: this command needs a [gnn] section")
    if cfg.gnn.params_file is not None:
        return load_gnn_params(cfg.gnn.params_file).validate()
    r = cfg.gnn.random
    return random_gnn_params(r.L, r.widths, r.K, r.activation, r.seed)


def _emit(cfg: ExperimentConfig, text: str, summary: str) -> None:
    """Raport do pliku i jednolinijkowe podsumowanie na stdout; bez pliku raport idzie na stdout."""
    if cfg.output.path is None:
        sys.stdout.write(text)
        return
    write_report(text, cfg.output.path)
    print(summary)


def _bound_reports_text(cfg: ExperimentConfig, reports) -> str:
    if (cfg.output.format or FORMAT_CSV) == FORMAT_JSON:
        return encode_bound_reports_json(reports)
    return encode_bound_reports_csv(reports)


# ---------- Podkomendy ----------

def cmd_distance(cfg: ExperimentConfig) -> int:
    A, B = build_operator_pair(cfg.operator, cfg.other)
    logger.debug("distance: %s vs %s", A.name, B.name)
    report = dm_estimate(A, B, cfg.k_max, _profile_config(cfg), _threads(cfg))
    _emit(cfg, encode_distance_report_json(report),
          f"distance total={report.total!r} remainder={report.remainder_bound!r} estimator={report.estimator}")
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig) -> int:
    A = build_operator(cfg.operator.base())
    params = _gnn_params(cfg) if cfg.theorem.startswith("gnn") else None
    reports = run_resolution_sweep(
        A, cfg.resolutions, _profile_config(cfg), cfg.theorem, cfg.k_max,
        gnn_params=params, threads=_threads(cfg), strict=cfg.strict,
    )
    passed = sum(1 for r in reports if r.passed)
    _emit(cfg, _bound_reports_text(cfg, reports),
          f"sweep {cfg.theorem}: {passed}/{len(reports)} rows within bound")
    return EXIT_OK


def cmd_gnn_compare(cfg: ExperimentConfig) -> int:
    params = _gnn_params(cfg)
    A = build_operator(cfg.operator.base())
    profile, threads = _profile_config(cfg), _threads(cfg)
    reports = []
    for theorem in (THEOREM_GNN_SIGNAL_GAP, THEOREM_GNN_APPROXIMATION):
        reports.extend(run_resolution_sweep(
            A, cfg.resolutions, profile, theorem, cfg.k_max,
            gnn_params=params, threads=threads, strict=cfg.strict,
        ))
    passed = sum(1 for r in reports if r.passed)
    _emit(cfg, _bound_reports_text(cfg, reports),
          f"gnn-compare: {passed}/{len(reports)} rows within bound")
    return EXIT_OK


def cmd_check(cfg: ExperimentConfig) -> int:
    A = build_operator(cfg.operator.base())
    seed = cfg.profile_seed
    reports = []
    if A.is_linear:
        reports.append(check_self_adjoint(A, seed=seed))
    reports.append(check_lipschitz_map(A, A.constants.C_A, seed=seed))
    if A.domain is None:
        for n in cfg.resolutions:
            for flag in sorted(A.constants.assumption_flags):
                C = A.constants.C_c if flag == FLAG_CONSTANT_TO_LIPSCHITZ else cfg.profile.C_v
                reports.append(check_piece_structure(A, n, flag, C=C, seed=seed))
    if (cfg.output.format or FORMAT_JSON) == FORMAT_CSV:
        text = encode_check_reports_csv(reports)
    else:
        text = encode_check_reports_json(reports)
    failed = [r.check for r in reports if not r.passed]
    _emit(cfg, text, f"check {A.name}: {len(reports) - len(failed)}/{len(reports)} passed"
          + (f" (failed: {', '.join(failed)})" if failed else ""))
    return EXIT_OK


def cmd_bound(args: argparse.Namespace) -> int:
    value = evaluate_bound(
        args.theorem, args.C_A, args.C_v, args.n, m=args.m, C_c=args.C_c,
        K=args.K, L=args.L, n_max=args.n_max, variant=args.variant,
    )
    print(f"{args.theorem} bound={value!r}")
    return EXIT_OK


COMMANDS = {
    "distance": cmd_distance,
    "sweep": cmd_sweep,
    "gnn-compare": cmd_gnn_compare,
    "check": cmd_check,
}


# ---------- Argumenty ----------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="experiment config (TOML)")
    common.add_argument("--out", type=Path, default=None)
    common.add_argument("--format", choices=(FORMAT_CSV, FORMAT_JSON), default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--strict", action="store_true")

    parser = argparse.ArgumentParser(prog="graphops", description="Graphop discretization experiments")
    parser.add_argument("--verbose", "-v", action="store_true", help="DEBUG logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])

    b = sub.add_parser("bound", help="evaluate a bound formula without measuring")
    b.add_argument("--theorem", choices=THEOREMS, required=True)
    b.add_argument("--C-A", dest="C_A", type=float, required=True)
    b.add_argument("--C-v", dest="C_v", type=float, default=1.0)
    b.add_argument("--C-c", dest="C_c", type=float, default=0.0)
    b.add_argument("-K", dest="K", type=int, default=1)
    b.add_argument("-L", dest="L", type=int, default=1)
    b.add_argument("--n-max", dest="n_max", type=int, default=1)
    b.add_argument("-n", dest="n", type=int, required=True)
    b.add_argument("-m", dest="m", type=int, default=None)
    b.add_argument("--variant", default=None)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        if args.command == "bound":
            return cmd_bound(args)
        if args.seed is not None and args.seed < 0:
            raise ConfigError(f"--seed must be nonnegative, got {args.seed}")
        if args.threads is not None and args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
        cfg = _apply_overrides(load_experiment_config(args.config), args)
        logger.debug("command %s with config %s", args.command, args.config)
        return COMMANDS[args.command](cfg)
    except (ConfigError, SerializationError) as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except ParameterNormalizationError as e:
        logger.error("%s", e)
        return EXIT_NORMALIZATION
    except (DomainError, HypothesisViolationError) as e:
        logger.error("%s", e)
        return EXIT_DOMAIN
    except GraphopError as e:
        # pozostałe naruszenia warunków wstępnych (np. N hiperkostki poza zakresem)
        logger.error("%s", e)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
