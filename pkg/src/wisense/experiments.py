"""Seeded sweeps shared by the CLI and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import infotheory as it
from .estimator import EstimatorConfig, Features, build_dataset, evaluate, train
from .estimator.data import WalkConfig


def sweep_source(seed: int, source_id: int, alphabet: int = 2, states: int = 2,
                 dependence: float = 0.7) -> it.JointSource:
    return it.random_source(np.random.default_rng([seed, source_id, 0x1F0]), alphabet, alphabet,
                            n_states=states, dependence=dependence)


def temporal_rate(src: it.JointSource, eps: float) -> float:
    """Smallest rate the temporal bound covers: I - I_hist + 3 eps (floored at 3 eps)."""
    return max(it.mutual_information(src) - src.history_information, 0.0) + 3 * eps


@dataclass
class SweepRow:
    source_id: int
    n: int
    epsilon: float
    pairs_checked: int
    violations: int
    bound_iid: float
    bound_temporal: float
    mc_mean_iid: float
    mc_mean_temporal: float

    def as_row(self):
        return [self.source_id, self.n, self.epsilon, self.pairs_checked, self.violations,
                self.bound_iid, self.bound_temporal, self.mc_mean_iid, self.mc_mean_temporal]


def infotheory_sweep(sources: int, seed: int = 0, alphabet: int = 2, states: int = 2, n: int = 4,
                     epsilons: Sequence[float] = (0.1, 0.2, 0.3), dependence: float = 0.7,
                     mc_n: int = 8, mc_trials: int = 200, backend=None) -> list:
    """Both lemmas by enumeration, both bounds, and paired random coding at
    the temporal rate, for each random source and slack."""
    rows = []
    for sid in range(sources):
        src = sweep_source(seed, sid, alphabet, states, dependence)
        for eps in epsilons:
            p = it.TypicalParams(n, eps)
            r1 = it.verify_lemma1(src, p, backend=backend)
            r2 = it.verify_lemma2(src, p, backend=backend)
            rate = temporal_rate(src, eps)
            b_iid, b_tmp = it.distortion_bound(src, p, rate)
            if mc_trials > 0:
                mp = it.TypicalParams(mc_n, eps)
                a = it.simulate_random_coding(src, mp, rate, mc_trials, seed=seed, backend=backend)
                b = it.simulate_random_coding(src, mp, rate, mc_trials, seed=seed, conditioned=True,
                                              backend=backend)
                mc = (a.mean, b.mean)
            else:
                mc = (float("nan"), float("nan"))
            rows.append(SweepRow(sid, n, eps, r1.typical_pairs + r2.typical_pairs,
                                 r1.violations + r2.violations + (not r2.lower_bound_ordered),
                                 b_iid, b_tmp, *mc))
    return rows


# --------------------------------------------------------------------------
# temporal vs memoryless estimator

@dataclass
class EstimatorComparison:
    seed: int
    memoryless_loc: float
    temporal_loc: float
    temporal_q1: float
    temporal_q4: float
    finetune_val: float
    direct_val: float
    memoryless_table: object = None
    temporal_table: object = None


def compare_estimators(seed: int, cfg: EstimatorConfig = EstimatorConfig(),
                       walk: WalkConfig = WalkConfig(), n_train: int = 48, n_val: int = 8,
                       n_test: int = 8) -> EstimatorComparison:
    """Memoryless vs two-stage temporal on one seeded dataset, plus direct
    temporal training with the stage-2 settings from a fresh start."""
    cfg = replace(cfg, seed=seed)
    ds = build_dataset(seed, n_train, n_val, n_test, walk)
    tr, va, te = Features.of(ds.train), Features.of(ds.val), Features.of(ds.test)
    # stage 1 of the two-stage protocol is the memoryless model itself
    mem, _ = train(replace(cfg, temporal=False), tr, va)
    stage2 = replace(cfg, temporal=True, epochs=cfg.finetune_epochs)
    tmp, h_ft = train(stage2, tr, va, init=mem)
    _, h_direct = train(stage2, tr, va)
    e_mem, e_tmp = evaluate(mem, te), evaluate(tmp, te)
    q1, q4 = e_tmp.quartile_means("loc")
    return EstimatorComparison(seed, e_mem.mean_loc, e_tmp.mean_loc, q1, q4,
                               h_ft.val_loss[-1], h_direct.val_loss[-1], e_mem, e_tmp)
