"""Fly one target mission with and without avoidance and print the outcome.

Run from the repository root: ``python3 demos/avoid_target.py [seed]``.
"""

import sys

from flsavoid.channel import ChannelModel
from flsavoid.decision import LossSpec
from flsavoid.pipeline import KinematicLimits, PipelineSettings
from flsavoid.sim import SimConfig, TargetScenario, run_mission


def command_string(commands):
    """Run-length encoding such as ``0x160 1x3 2x1`` of a command timeline."""
    out, prev, count = [], None, 0
    for c in commands + [None]:
        if c == prev:
            count += 1
            continue
        if prev is not None:
            out.append(f"{prev}x{count}")
        prev, count = c, 1
    return " ".join(out)


def main(seed=0):
    limits = KinematicLimits()
    settings = PipelineSettings(actions=(0, 1, 2))
    scene, script, start = TargetScenario().build(seed, limits)
    for avoidance in (False, True):
        cfg = SimConfig(settings=settings, avoidance=avoidance, record_pings=False)
        log = run_mission(scene, script, limits, ChannelModel(), LossSpec(), seed, cfg, start)
        label = "avoidance" if avoidance else "forced a0"
        print(f"{label:>10}: {log.outcome}, closest approach {log.min_distance:.2f} m, "
              f"false alarms {log.false_alarm_count}")
        if avoidance:
            print(f"  commands: {command_string(log.commands)}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
