"""
callbacks.py

Functions to be used during `run` (on_run), `verify` (on_verify)
and `config` (on_config) operations. Each returns the exit status:

    0 success
    1 a verified property has violations
    2 bad configuration
    3 input/output failure or aborted run
"""

####################
# Standard libraries
####################
import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional

#################
# Local libraries
#################
from configutils import ConfigError, RunConfig, apply_overrides, config_hash, dump_config, load_config
from constants import HRRL_VERSION
from contracts import ContractViolationError
from hashutils import open_and_hash_file, save_hashed_file
from learnerutils import RunAbortedError, init_learner, load_learner_checkpoint, run, save_learner_checkpoint
from logutils import stamp, verbose_log
from plotutils import emit_plots
from telemetryutils import CsvSink, EpisodeLog, emit_summary, summarize
from verifyutils import run_suites

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _error(message: str):
    print(message, file=sys.stderr, flush=True)


def on_version(args: argparse.Namespace) -> int:
    """
    Show version
    """
    if args.version:
        print(HRRL_VERSION)
    return EXIT_OK


def build_config(args: argparse.Namespace) -> RunConfig:
    """
    Config file (or defaults), then `--set KEY=VALUE` pairs, then the
    dedicated flags `--seed`, `--iterations` and `--out`
    """
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides: Dict[str, object] = {}
    for pair in getattr(args, "overrides", None) or []:
        key, separator, value = pair.partition("=")
        if not separator:
            raise ConfigError(f"expected KEY=VALUE, got {pair!r}", key=key.strip() or None)
        overrides[key.strip()] = value
    for key, name in (("seed", "seed"), ("iterations", "iterations"), ("out_dir", "out")):
        value = getattr(args, name, None)
        if value is not None:
            overrides[key] = value
    return apply_overrides(cfg, overrides)


def make_run_dir(cfg: RunConfig, force: bool = False) -> str:
    """
    `<out_dir>/<timestamp>-seed<seed>`, never reusing an existing
    directory. With `force` the directory is `<out_dir>/seed<seed>` and
    its files are overwritten.
    """
    if force:
        path = os.path.join(cfg.out_dir, f"seed{cfg.seed}")
        os.makedirs(path, exist_ok=True)
        return path
    base = os.path.join(cfg.out_dir, f"{stamp()}-seed{cfg.seed}")
    path, suffix = base, 1
    while True:
        try:
            os.makedirs(path)
            return path
        except FileExistsError:
            path = f"{base}-{suffix}"
            suffix += 1


def execute_run(cfg: RunConfig, **kwargs) -> Dict[str, object]:
    """
    One complete run: learner loop with streamed telemetry, then the
    CSV digest, plots, summary, final checkpoint and the config used.
    Returns the summary with the run directory added.

    Kwargs:
        :param resume
            Checkpoint to continue from
        :param force
            Reuse `<out_dir>/seed<seed>`
        :param verbose
            Apply verbose or not
    """
    resume: Optional[str] = kwargs.get("resume")
    verbose = kwargs.get("verbose")
    learner_cfg = cfg.learner_config()
    env = cfg.environment()
    drive_cfg = cfg.drive_config()

    if resume:
        learner, state, start_iteration, _ = load_learner_checkpoint(resume)
        if start_iteration > cfg.iterations:
            raise ConfigError(
                f"checkpoint is at iteration {start_iteration}, beyond {cfg.iterations}",
                key="iterations",
            )
    else:
        learner, state, start_iteration = init_learner(learner_cfg, cfg.seed), cfg.initial_state(), 0

    run_dir = make_run_dir(cfg, force=kwargs.get("force", False))
    if verbose:
        verbose_log(f"Run directory: {run_dir}")

    metadata = {
        "seed": cfg.seed,
        "config_hash": config_hash(cfg),
        "code_version": HRRL_VERSION,
        "target_mode": cfg.target_mode,
        "grad_clip": cfg.grad_clip,
        "start_iteration": start_iteration,
    }
    try:
        with open(os.path.join(run_dir, "config.txt"), mode="w", encoding="utf-8") as config_file:
            config_file.write(dump_config(cfg))
    except OSError as exc:
        raise OSError(f"Unable to write config file in {run_dir}") from exc

    csv_path = os.path.join(run_dir, "telemetry.csv")
    sink = CsvSink(csv_path, metadata, chunk=cfg.log_every)
    result = run(
        learner,
        env,
        learner_cfg,
        state,
        drive_cfg=drive_cfg,
        log=EpisodeLog(metadata=metadata, first_index=start_iteration + 1),
        start_iteration=start_iteration,
        sink=sink,
        checkpoint_path=os.path.join(run_dir, "aborted-checkpoint.npz"),
        verbose=verbose,
    )
    sink.flush()

    digest = open_and_hash_file(path=csv_path, verbose=verbose)
    save_hashed_file(data=digest, path=csv_path, verbose=verbose)
    if len(result.log) > 0:
        emit_plots(
            result.log,
            run_dir,
            stride=cfg.plot_stride,
            setpoints=(cfg.setpoint_1, cfg.setpoint_2),
            arena=env.arena,
            verbose=verbose,
        )
    summary = summarize(result.log, result.violations, cfg.sleep_min_steps)
    emit_summary(summary, os.path.join(run_dir, "summary.json"), verbose=verbose)
    save_learner_checkpoint(
        os.path.join(run_dir, "checkpoint.npz"),
        result.learner,
        result.state,
        max(start_iteration, cfg.iterations),
        metadata=metadata,
        verbose=verbose,
    )
    return {**summary, "run_dir": run_dir}


def _guarded_run(cfg: RunConfig, **kwargs):
    """(exit status, summary or None); picklable for the process pool"""
    try:
        return EXIT_OK, execute_run(cfg, **kwargs)
    except (ConfigError, ContractViolationError) as exc:
        _error(f"config error: {exc}")
        return EXIT_CONFIG, None
    except RunAbortedError as exc:
        _error(f"run aborted at step {exc.iteration}: {exc}")
        return EXIT_IO, None
    except OSError as exc:
        _error(f"i/o error: {exc}")
        return EXIT_IO, None


def _pool_run(job):
    cfg, kwargs = job
    return _guarded_run(cfg, **kwargs)


def parse_seeds(text: str) -> List[int]:
    """'1,2,3' -> [1, 2, 3]"""
    try:
        seeds = [int(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma separated list of integers, got {text!r}", key="seeds") from exc
    if not seeds:
        raise ConfigError("empty seed list", key="seeds")
    return seeds


def on_run(args: argparse.Namespace) -> int:
    """
    on_run is executed when `run` command is called:

    (1) build the configuration (file, then overrides);
    (2) run one seed, or fan a `--seeds` list out to worker processes,
        each seed with its own output directory;
    (3) print each summary as JSON.
    """
    try:
        cfg = build_config(args)
        seeds = parse_seeds(args.seeds) if args.seeds else None
    except ConfigError as exc:
        _error(f"config error: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        _error(f"i/o error: {exc}")
        return EXIT_IO

    options = {"resume": args.resume, "force": args.force, "verbose": args.verbose}
    if seeds is None:
        outcomes = [_guarded_run(cfg, **options)]
    else:
        try:
            jobs = [(apply_overrides(cfg, {"seed": seed}), options) for seed in seeds]
        except ConfigError as exc:
            _error(f"config error: {exc}")
            return EXIT_CONFIG
        with ProcessPoolExecutor(max_workers=min(len(jobs), os.cpu_count() or 1)) as pool:
            outcomes = list(pool.map(_pool_run, jobs))

    for _, summary in outcomes:
        if summary is not None:
            print(json.dumps(summary, indent=2, sort_keys=True))
    return max(status for status, _ in outcomes)


def on_verify(args: argparse.Namespace) -> int:
    """
    on_verify is executed when `verify` command is called: runs the
    selected suites, prints the JSON report (and writes it to `--report`)
    and prints the first counterexample when a property fails.
    """
    reports = run_suites(args.suite, verbose=args.verbose)
    text = json.dumps([report.to_dict() for report in reports], indent=2, sort_keys=True)
    print(text)
    if args.report:
        try:
            with open(args.report, mode="w", encoding="utf-8") as report_file:
                report_file.write(text + "\n")
        except OSError as exc:
            _error(f"i/o error: Unable to write report file: {args.report} ({exc})")
            return EXIT_IO

    failed = [report for report in reports if not report.passed]
    if failed:
        first = failed[0]
        _error(f"{first.property}: {first.violations} violations; counterexample {json.dumps(first.counterexample)}")
        return EXIT_VIOLATION
    return EXIT_OK


def on_config(args: argparse.Namespace) -> int:
    """
    on_config is executed when `config` command is called: `--dump`
    prints every parameter with the provenance of its default
    """
    if not args.dump:
        _error("config: nothing to do, use --dump")
        return EXIT_CONFIG
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        _error(f"config error: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        _error(f"i/o error: {exc}")
        return EXIT_IO
    print(dump_config(cfg), end="")
    return EXIT_OK
