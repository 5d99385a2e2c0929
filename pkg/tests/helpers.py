"""Shared fixtures-as-functions for the estimator tests and the acceptance suite."""

import numpy as np

from wisense.estimator.data import Block, ToySample, encode_blocks
from wisense.estimator.model import EstimatorConfig, Model, loss_and_grads, make_targets


def random_blocks(rng, n_blocks=3, block_len=5, k_el=9, n_sub=30, cfg=EstimatorConfig(), on_cells=False):
    """Blocks of random CSI windows with truth inside the configured grids."""
    lg, pg = cfg.loc_grid, cfg.pose_grid
    blocks, bid = [], 0
    for sid in range(n_blocks):
        samples = []
        for t in range(block_len):
            win = np.stack([rng.uniform(0.1, 2.0, (32, k_el, n_sub)),
                            rng.uniform(-np.pi, np.pi, (32, k_el, n_sub))], axis=1)
            if on_cells:
                loc = lg.coords[rng.integers(lg.size)]
                pose = pg.coords[rng.integers(pg.size, size=cfg.n_keypoints)]
            else:
                loc = rng.uniform([lg.xs[0], lg.ys[0]], [lg.xs[-1], lg.ys[-1]])
                pose = rng.uniform([pg.xs[0], pg.ys[0]], [pg.xs[-1], pg.ys[-1]], (cfg.n_keypoints, 2))
            samples.append(ToySample(win.astype(np.float32), loc, pose, int(rng.integers(cfg.depth_bins)),
                                     t, sid, t / 30, bid))
        blocks.append(Block(samples, sid, bid))
        bid += 1
    return blocks


def gradient_check(n_points=25, seed=0, h=1e-6, per_tensor=2):
    """Max relative error between analytic and central-difference gradients.

    Each point draws fresh weights, inputs, targets, c and a config
    (temporal or not); the check covers a random direction through all
    weights and ``per_tensor`` random coordinates of every weight tensor.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for point in range(n_points):
        cfg = EstimatorConfig(temporal=bool(point % 2), max_seq_len=int(rng.integers(1, 5)),
                              hidden=6, gru_hidden=5, seed=point, a=float(rng.uniform(0.1, 0.9)),
                              b=float(rng.uniform(0.1, 0.9)), temperature=float(rng.uniform(0.05, 0.5)))
        blocks = random_blocks(rng, n_blocks=3, block_len=4, cfg=cfg)
        X = encode_blocks(blocks)
        tg = make_targets(blocks, cfg)
        model = Model.fresh(cfg, X)
        for k in model.params:
            model.params[k] = model.params[k] + rng.normal(0, 0.3, model.params[k].shape)
        c = float(rng.uniform(0, 1))
        _, _, grads = loss_and_grads(model, X, tg, c)

        def f():
            return loss_and_grads(model, X, tg, c, need_grad=False)[0]

        # directional derivative through every weight
        v = {k: rng.standard_normal(p.shape) for k, p in model.params.items()}
        base = {k: p.copy() for k, p in model.params.items()}
        analytic = sum(float(np.sum(grads[k] * v[k])) for k in v)
        vals = []
        for sgn in (1, -1):
            for k in v:
                model.params[k] = base[k] + sgn * h * v[k]
            vals.append(f())
        for k in v:
            model.params[k] = base[k].copy()
        fd = (vals[0] - vals[1]) / (2 * h)
        worst = max(worst, abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-8))

        for k, p in model.params.items():
            for _ in range(per_tensor):
                idx = tuple(rng.integers(s) for s in p.shape)
                old = p[idx]
                p[idx] = old + h
                up = f()
                p[idx] = old - h
                down = f()
                p[idx] = old
                fd = (up - down) / (2 * h)
                g = grads[k][idx]
                scale = max(abs(g), abs(fd))
                if scale > 1e-6:  # coordinates with no signal are checked by the direction above
                    worst = max(worst, abs(g - fd) / scale)
    return worst
