#!/usr/bin/env python3
"""Calibration helper: sweep target warmup using cached source checkpoints."""
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from hevrl.cycles import resolve_cycle, cycle_from_speeds
from hevrl.env import CycleEnv
from hevrl.ddpg import Hyperparams, make_agent, train
from hevrl.explore import NoiseSpec
from hevrl.powertrain import Driveline, VehicleParams
from hevrl.runner import derive_rngs, cell_seed
from hevrl.transfer import load_checkpoint, transfer_init, jumpstart

SOURCES = ['Gaussian_AS(0.06)', 'OU_AS(0.09)', 'Gaussian_PS(0.03)', 'APS(0.09,0.03)']
TARGETS = ['TFS', 'Gaussian_AS(0.06)', 'OU_AS(0.09)', 'Gaussian_PS(0.03)', 'APS(0.09,0.03)']
CACHE = Path('/tmp/calib')


def tgt_cycle():
    nedc = resolve_cycle('nedc')
    return cycle_from_speeds('nedc_49_244', nedc.v[49:245], 1.0)


def jp_table(args):
    master, warmup = args
    dl = Driveline(vehicle=VehicleParams(P_m_max=15e3))
    tgt_c = tgt_cycle()
    ckpts = {}
    for lbl in SOURCES:
        path = CACHE / f"src_{master}_{lbl.replace('(', '_').replace(')', '').replace(',', '_')}.ckpt"
        ckpts[lbl] = load_checkpoint(path)
    jp = {}
    for tgt in TARGETS:
        for src in ['TFS'] + SOURCES:
            env = CycleEnv([tgt_c], dl)
            hp = Hyperparams.target(episodes=12, memory=10000, warmup=warmup)
            arng, erng = derive_rngs(cell_seed(master, tgt, src))
            ag = transfer_init(ckpts[src], hp, arng) if src != 'TFS' else make_agent(hp, arng)
            curve = train(ag, env, NoiseSpec.parse(tgt), 12, erng)
            jp[(tgt, src)] = jumpstart(curve, 10)
    return master, warmup, jp


def main():
    warmups = [int(a) for a in sys.argv[1:]] or [400, 600, 800]
    masters = list(range(1, 10))
    jobs = [(m, w) for w in warmups for m in masters]
    tables = {}
    with ProcessPoolExecutor(max_workers=2) as pool:
        for master, warmup, jp in pool.map(jp_table, jobs):
            tables[(warmup, master)] = jp
            print(f'done master={master} warmup={warmup}', flush=True)

    for warmup in warmups:
        raw = sum(
            tables[(warmup, m)][(t, s)] > tables[(warmup, m)][(t, 'TFS')]
            for m in masters for t in TARGETS for s in SOURCES
        )
        stats = []
        for triple in itertools.combinations(masters, 3):
            wins = 0
            for t in TARGETS:
                tfs = np.mean([tables[(warmup, m)][(t, 'TFS')] for m in triple])
                for s in SOURCES:
                    wins += np.mean([tables[(warmup, m)][(t, s)] for m in triple]) > tfs
            stats.append(int(wins))
        stats = np.array(stats)
        print(
            f'warmup={warmup}: raw {raw}/180={raw/180:.0%}  triples>=18: '
            f'{np.mean(stats >= 18):.0%}  min {stats.min()}  median {np.median(stats)}',
            flush=True,
        )
        print('  triple detail:', stats.tolist(), flush=True)


if __name__ == '__main__':
    main()
