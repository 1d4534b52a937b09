"""Command line entry point: ``simulate``, ``replay`` and ``sweep``.

Exit status: 0 when every requested run completed, 1 when some runs
failed (their seeds are listed), 2 for configuration errors and 3 for
unreadable or misaligned logs.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from . import config as cfgmod
from .errors import AlignmentError, ConfigurationError, LogFormatError
from .logs import SUMMARY_COLUMNS, atomic_write, fmt, read_nav_log, read_ping_log, read_truth
from .replay import ReplayReport, level_tag, replay
from .sim import run_mission

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_LOG = 0, 1, 2, 3


def _run_seed(args):
    cfg, seed, out_dir = args
    limits = cfgmod.build_limits(cfg)
    scene = cfgmod.build_scene(cfg, seed)
    script, start, first = cfgmod.build_mission(cfg, limits)
    log = run_mission(scene, script, limits, cfgmod.build_channel(cfg), cfgmod.build_loss(cfg),
                      seed, cfgmod.build_sim(cfg), start, first)
    log.write(Path(out_dir) / f"seed_{seed}")
    return seed, log.summary(), log.outcome, log.first_avoidance_range


def simulate(cfg, out_dir: Path, jobs: int = 1, echo=print) -> tuple[int, list]:
    """Run every seed; returns (exit status, summary rows)."""
    run = cfgmod.build_run(cfg)
    tasks = [(cfg, seed, str(out_dir)) for seed in run.seeds]
    results, failed = [], []
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_seed, t) for t in tasks]
            for seed, fut in zip(run.seeds, futures):
                try:
                    results.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - reported per seed
                    failed.append((seed, exc))
    else:
        for seed, t in zip(run.seeds, tasks):
            try:
                results.append(_run_seed(t))
            except Exception as exc:  # noqa: BLE001
                failed.append((seed, exc))
    rows = [r[1] for r in results]
    atomic_write(out_dir / "summary.csv", ",".join(SUMMARY_COLUMNS) + "\n"
                 + "".join(r + "\n" for r in rows))
    collisions = sum(r[2] == "collision" for r in results)
    if results:
        echo(f"collision rate: {collisions}/{len(results)} = {collisions / len(results):.3f}")
    for seed, exc in failed:
        echo(f"seed {seed} failed: {exc}", file=sys.stderr)
    return (EXIT_FAILED if failed else EXIT_OK), results


def _load_logs(pings_path, nav_path, truth_path=None):
    layout_hash, pings = read_ping_log(pings_path)
    nav = read_nav_log(nav_path)
    truth = read_truth(truth_path) if truth_path is not None else None
    return layout_hash, pings, nav, truth


def run_replay(cfg, pings_path, nav_path, out_dir: Path, truth_path=None,
               levels=None) -> ReplayReport:
    layout = cfgmod.build_layout(cfg)
    rcfg = cfgmod.build_replay(cfg, levels)
    if truth_path is None:
        sidecar = Path(pings_path).with_name("truth.json")
        truth_path = sidecar if sidecar.exists() else None
    layout_hash, pings, nav, truth = _load_logs(pings_path, nav_path, truth_path)
    if layout_hash is not None and layout_hash != layout.layout_hash():
        raise AlignmentError(f"ping log layout {layout_hash} does not match the configured "
                             f"layout {layout.layout_hash()}")
    report = replay(pings, nav, layout, rcfg, truth)
    report.write(out_dir)
    return report


def _replay_paths(cfg, args_pings=None, args_nav=None, base=None):
    r = cfg["replay"]
    pings = args_pings or (cfgmod.resolve(r["pings"], base) if r["pings"] else None)
    nav = args_nav or (cfgmod.resolve(r["nav"], base) if r["nav"] else None)
    truth = cfgmod.resolve(r["truth"], base) if r["truth"] else None
    return pings, nav, truth


def _parse_values(text: str) -> list:
    items = [v.strip() for v in text.strip().strip("[]{}").split(",") if v.strip()]
    if not items:
        raise ConfigurationError("--values is empty", "values")
    return [yaml.safe_load(v) for v in items]


def sweep(raw: dict, param: str, values: list, out_dir: Path, jobs: int = 1, base=None,
          echo=print) -> int:
    status = EXIT_OK
    rows = []
    base_cfg = cfgmod.normalize(raw)
    pings, nav, truth = _replay_paths(base_cfg, base=base)
    replay_mode = pings is not None and nav is not None
    for value in values:
        sub_raw = cfgmod.set_scalar(raw, param, value)
        cfg = cfgmod.normalize(sub_raw)
        sub = out_dir / f"{param}={value}"
        if replay_mode:
            levels = [float(value)] if param == "channel.delta_db" else None
            report = run_replay(cfg, pings, nav, sub, truth, levels)
            for r in report.levels:
                fa = "unlabeled" if r.false_alarm_count is None else str(r.false_alarm_count)
                rows.append([str(value), fmt(r.delta_db), fmt(r.first_detection_time),
                             fmt(r.first_detection_range), fa, str(r.avoidance_count)])
        else:
            code, results = simulate(cfg, sub, jobs, echo)
            status = max(status, code)
            n = len(results)
            coll = sum(r[2] == "collision" for r in results)
            ranges = [r[3] for r in results if not math.isnan(r[3])]
            mean_range = sum(ranges) / len(ranges) if ranges else math.nan
            rows.append([str(value), str(n), fmt(coll / n if n else math.nan), fmt(mean_range)])
    if replay_mode:
        header = "value,delta_db,first_detection_s,first_detection_range_m,false_alarm_count," \
                 "avoidance_count"
    else:
        header = "value,runs,collision_rate,mean_first_avoidance_range_m"
    atomic_write(out_dir / "sweep_summary.csv",
                 header + "\n" + "".join(",".join(r) + "\n" for r in rows))
    echo(f"sweep over {param}: {len(values)} values written to {out_dir}")
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flsavoid",
                                description="Sonar obstacle mapping and avoidance harness")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", help="run seeded missions")
    s.add_argument("--config", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--jobs", type=int, default=1)
    r = sub.add_parser("replay", help="replay ping and nav logs at each sensitivity level")
    r.add_argument("--pings", required=True, type=Path)
    r.add_argument("--nav", required=True, type=Path)
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--out", required=True, type=Path)
    r.add_argument("--truth", type=Path, default=None)
    w = sub.add_parser("sweep", help="repeat a batch for each value of one config scalar")
    w.add_argument("--config", required=True, type=Path)
    w.add_argument("--param", required=True)
    w.add_argument("--values", required=True)
    w.add_argument("--out", required=True, type=Path)
    w.add_argument("--jobs", type=int, default=1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = cfgmod.load(args.config)
            code, _ = simulate(cfg, args.out, max(1, args.jobs))
            return code
        if args.command == "replay":
            cfg = cfgmod.load(args.config)
            report = run_replay(cfg, args.pings, args.nav, args.out, args.truth)
            for r in report.levels:
                print(f"delta {level_tag(r.delta_db)} dB: first detection "
                      f"{r.first_detection_time} s, false alarms "
                      f"{'unlabeled' if r.false_alarm_count is None else r.false_alarm_count}")
            return EXIT_OK
        raw = cfgmod.read_raw(args.config)
        return sweep(raw, args.param, _parse_values(args.values), args.out,
                     max(1, args.jobs), base=args.config.parent)
    except ConfigurationError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"config error{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LogFormatError, AlignmentError, OSError) as exc:
        print(f"log error: {exc}", file=sys.stderr)
        return EXIT_LOG


if __name__ == "__main__":
    sys.exit(main())
