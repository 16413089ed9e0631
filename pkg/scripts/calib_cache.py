#!/usr/bin/env python3
"""Calibration helper: build and cache desk source checkpoints (tmp use)."""
import sys
from pathlib import Path

import numpy as np

from hevrl.cycles import resolve_cycle, synth_trapezoid
from hevrl.env import CycleEnv
from hevrl.ddpg import Hyperparams, make_agent, train
from hevrl.explore import NoiseSpec
from hevrl.powertrain import Driveline, VehicleParams
from hevrl.runner import derive_rngs, cell_seed
from hevrl.transfer import save_checkpoint

SOURCES = ['Gaussian_AS(0.06)', 'OU_AS(0.09)', 'Gaussian_PS(0.03)', 'APS(0.09,0.03)']
CACHE = Path('/tmp/calib')
CACHE.mkdir(exist_ok=True)

def main(masters):
    trap20 = synth_trapezoid(20, 10, 8, 10, 1.0)
    uex = resolve_cycle('urban_excerpt')
    dl = Driveline(vehicle=VehicleParams(P_m_max=15e3))
    for master in masters:
        for lbl in SOURCES:
            path = CACHE / f"src_{master}_{lbl.replace('(', '_').replace(')', '').replace(',', '_')}.ckpt"
            if path.exists():
                continue
            env = CycleEnv([trap20, uex], dl)
            hp = Hyperparams(episodes=150, memory=10000)
            arng, erng = derive_rngs(cell_seed(master, 'source', lbl))
            ag = make_agent(hp, arng)
            train(ag, env, NoiseSpec.parse(lbl), 150, erng)
            save_checkpoint(ag, {'noise': lbl}, path)
            print('cached', path.name, flush=True)

if __name__ == '__main__':
    main([int(a) for a in sys.argv[1:]] or list(range(1, 10)))
