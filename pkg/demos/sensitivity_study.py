"""Replay straight-line logs with noise bursts at three sensitivity levels.

Each log is recorded with decisions forced to a0, then replayed at
delta = 4, 7 and 10 dB.  Prints first detection time and false-alarm
count per level.  Run: ``python3 demos/sensitivity_study.py [n_logs]``.
"""

import sys

import numpy as np

from flsavoid.channel import ChannelModel
from flsavoid.decision import LossSpec
from flsavoid.geometry import prototype_layout
from flsavoid.pipeline import KinematicLimits, PipelineSettings
from flsavoid.replay import ReplayConfig, replay
from flsavoid.sim import MissionScript, SimConfig, run_mission
from flsavoid.world import NoiseBurst, Obstacle, Scene, VehicleState

LEVELS = (4.0, 7.0, 10.0)


def burst_log(seed, layout, settings):
    rng = np.random.default_rng((seed, 7))
    target = Obstacle((80.0 + rng.normal(0, 1), rng.normal(0, 0.5), 10.0), 1.0)
    centre = layout.beam_number(3, 3)
    bursts = (NoiseBurst(3.0, 6.0, centre, 4.0, 12.0, 3.5),
              NoiseBurst(10.0, 13.0, centre, 4.0, 12.0, 5.0))
    scene = Scene((target,), 25.0, bursts)
    script = MissionScript(((100.0, 0.0, 10.0),))
    start = VehicleState((0.0, 0.0, 10.0), 0.0, 0.0, 1.5)
    cfg = SimConfig(layout, settings, avoidance=False)
    log = run_mission(scene, script, KinematicLimits(), ChannelModel(), LossSpec(), seed, cfg,
                      start)
    return scene, log


def main(n_logs=5):
    layout = prototype_layout()
    settings = PipelineSettings(actions=(0, 1, 2))
    cfg = ReplayConfig(levels=LEVELS, settings=settings)
    print("seed  " + "  ".join(f"t_det@{lv:g}dB  fa@{lv:g}dB" for lv in LEVELS))
    for seed in range(n_logs):
        scene, log = burst_log(seed, layout, settings)
        report = replay(log.pings, log.nav, layout, cfg, (scene, 0.5))
        cells = [f"{r.first_detection_time:10.1f}  {r.false_alarm_count:7d}" for r in report.levels]
        print(f"{seed:4d}  " + "  ".join(cells))


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 5)
