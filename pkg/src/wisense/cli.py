"""Command-line entry point.

Every subcommand resolves its configuration (defaults, ``--config`` file,
``--set key=value`` overrides, then explicit flags), writes it next to its
outputs, and leaves a ``.incomplete`` marker behind if it fails midway.

Exit codes: 0 success, 2 configuration error, 3 runtime error,
4 acceptance-check failure (``verify-*``).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, chansim, io, resolution
from .config import SCHEMA, ConfigError, RunConfig, resolve

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 2, 3, 4
INCOMPLETE = ".incomplete"


class CheckFailed(RuntimeError):
    pass


# --------------------------------------------------------------------------
# subcommands

def cmd_analyze_resolution(cfg: RunConfig, out: Path, args) -> int:
    r = cfg.section("resolution")
    geom = resolution.ArrayGeometry.from_carrier(
        r["carrier_hz"], n_tx=r["n_tx"], n_rx=r["n_rx"], spacing_wavelengths=r["spacing_wavelengths"],
        bandwidth=r["bandwidth"], d_rt=r["d_rt"], c=r["c"])
    theta_r = np.deg2rad(r["theta_r_deg"])
    table = resolution.resolution_table(geom, r["sum_path"], theta_r, r["target_range"], c=r["c"])
    units = {"angular_resolution_rad": "rad", "sum_path_resolution_m": "m",
             "range_resolution_m": "m", "total_resolution_m": "m"}
    rows = [[k, v, units[k]] for k, v in table.items()]
    io.write_csv(out / "resolution.csv", ["quantity", "value", "unit"], rows)
    width = max(len(k) for k in table)
    for k, v, u in rows:
        print(f"{k:<{width}}  {v:.3g} {u}")
    return EXIT_OK


def _scene_from(cfg: RunConfig) -> chansim.Scene:
    s = cfg.section("scene")
    seed = cfg["run.seed"]
    rng = np.random.default_rng([seed, 0x5C])
    start = rng.uniform([1.5, 1.0, 0.0], [5.5, 3.0, 0.0])
    heading = rng.uniform(0, 2 * np.pi)
    vel = s["target_speed"] * np.array([np.cos(heading), np.sin(heading), 0.0])
    target = chansim.Scatterer("dynamic", gain=s["target_gain"],
                               trajectory=chansim.LinearTrajectory(start, vel))
    return chansim.default_scene(seed, targets=[target], n_walls=s["n_walls"], noise_std=s["noise_std"],
                                 phase_distortion=s["phase_distortion"], sample_rate=s["sample_rate"])


def cmd_simulate(cfg: RunConfig, out: Path, args) -> int:
    scene = _scene_from(cfg)
    seq = chansim.synthesize_sequence(scene, cfg["scene.duration"])
    io.write_sequence(out / "csi.csis", seq)
    gt = seq.ground_truth
    io.write_csis(out / "dynamic_truth.csis", gt.h_d, seq.sample_rate)
    pos = gt.positions[:, 0]
    io.write_csv(out / "positions.csv", ["timestamp", "x", "y", "z"],
                 [[t, *p] for t, p in zip(seq.timestamps, pos)])
    print(f"simulated {len(seq)} packets of shape {seq.values.shape[1:]} -> {out / 'csi.csis'}")
    return EXIT_OK


def cmd_preprocess(cfg: RunConfig, out: Path, args) -> int:
    from .preprocess import preprocess_sequence
    if not args.input:
        raise ConfigError("preprocess needs --input FILE.csis")
    seq = io.read_csis(args.input)
    p = cfg.section("preprocess")
    stream = preprocess_sequence(seq, n_ref=p["n_ref"], kappa=p["kappa"], window_s=p["window_s"],
                                 cutoff_hz=p["cutoff_hz"])
    io.write_csid(out / "dynamic.csid", stream.tensors, stream.sample_rate, seq.start_time, stream.ref)
    print(f"dynamic tensors {stream.tensors.shape}, reference element {stream.ref}")
    return EXIT_OK


def cmd_verify_infotheory(cfg: RunConfig, out: Path, args) -> int:
    from .experiments import infotheory_sweep
    i = cfg.section("infotheory")
    rows = infotheory_sweep(i["sources"], cfg["run.seed"], i["alphabet"], i["states"], i["n"],
                            i["epsilons"], i["dependence"], i["mc_n"], i["mc_trials"])
    io.write_csv(out / "infotheory.csv", io.INFOTHEORY_HEADER, [r.as_row() for r in rows])
    violations = sum(r.violations for r in rows)
    ordered = all(r.bound_temporal <= r.bound_iid for r in rows)
    checked = sum(r.pairs_checked for r in rows)
    mc_gain = np.nanmean([r.mc_mean_iid - r.mc_mean_temporal for r in rows])
    print(f"sources: {i['sources']}  slacks: {','.join(map(str, i['epsilons']))}  n: {i['n']}")
    print(f"typical pairs checked: {checked}")
    print(f"lemma violations: {violations}")
    print(f"bound ordering holds: {ordered}")
    print(f"mean distortion gain from conditioning: {mc_gain:.4f}")
    if violations or not ordered:
        raise CheckFailed(f"{violations} violations, ordering {'ok' if ordered else 'broken'}")
    return EXIT_OK


def _walk_config(cfg: RunConfig):
    from .estimator.data import WalkConfig
    d = cfg.section("dataset")
    return WalkConfig(truth_rate=d["truth_rate"], csi_rate=d["csi_rate"],
                      samples_per_sequence=d["samples_per_sequence"], noise_std=d["noise_std"],
                      gain=d["target_gain"], kappa=cfg["preprocess.kappa"],
                      hp_window_s=cfg["preprocess.window_s"])


def cmd_make_dataset(cfg: RunConfig, out: Path, args) -> int:
    from .estimator.data import simulate_walk
    d = cfg.section("dataset")
    walk = _walk_config(cfg)
    seed = cfg["run.seed"]
    rows, sid = [], 0
    for split in ("train", "val", "test"):
        for _ in range(d[f"n_{split}"]):
            _, stream, truth = simulate_walk(seed, sid, walk, sequence_id=sid)
            io.write_csid(out / f"seq_{sid:04d}.csid", stream.tensors, stream.sample_rate,
                          float(stream.timestamps[0]), stream.ref)
            io.write_truth_csv(out / f"seq_{sid:04d}.truth.csv", truth)
            rows.append([sid, split])
            sid += 1
    io.write_csv(out / "splits.csv", ["sequence_id", "split"], rows)
    print(f"wrote {sid} sequences to {out}")
    return EXIT_OK


def load_split(directory, split: str) -> list:
    """Blocks of one split of a dataset directory written by make-dataset."""
    from .estimator.data import segment_blocks, window_csi
    directory = Path(directory)
    header, rows = io.read_csv(directory / "splits.csv")
    samples = []
    for sid, name in rows:
        if name != split:
            continue
        sid = int(sid)
        tensors, times, _, _ = io.read_csid(directory / f"seq_{sid:04d}.csid")
        truth = io.read_truth_csv(directory / f"seq_{sid:04d}.truth.csv")
        samples += window_csi(tensors, times, truth, sequence_id=sid)
    return segment_blocks(samples)


def estimator_config(cfg: RunConfig):
    from .estimator import EstimatorConfig
    e = cfg.section("estimator")
    e.pop("protocol")
    return EstimatorConfig(temporal=cfg["estimator.protocol"] != "memoryless", seed=cfg["run.seed"], **e)


def cmd_train(cfg: RunConfig, out: Path, args) -> int:
    from .estimator import Features, train
    if not args.dataset:
        raise ConfigError("train needs --dataset DIR")
    ecfg = estimator_config(cfg)
    tr = Features.of(load_split(args.dataset, "train"))
    va_blocks = load_split(args.dataset, "val")
    va = Features.of(va_blocks) if va_blocks else None
    protocol = cfg["estimator.protocol"]
    hist_rows = []
    if protocol == "two_stage":
        m1, h1 = train(replace(ecfg, temporal=False), tr, va)
        model, h2 = train(replace(ecfg, temporal=True, epochs=ecfg.finetune_epochs), tr, va, init=m1)
        hist_rows = io.history_rows("pretrain", h1) + io.history_rows("finetune", h2)
    else:
        model, h = train(ecfg, tr, va)
        hist_rows = io.history_rows(protocol, h)
    io.save_model(out / "weights.bin", model)
    io.write_csv(out / "history.csv", io.HISTORY_HEADER, hist_rows)
    print(f"trained ({protocol}); final train loss {hist_rows[-1][3]:.4f}, val loss {hist_rows[-1][4]:.4f}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, out: Path, args) -> int:
    from .estimator import evaluate
    if not args.dataset or not args.weights:
        raise ConfigError("evaluate needs --dataset DIR and --weights FILE")
    model = io.load_model(args.weights)
    table = evaluate(model, load_split(args.dataset, "test"))
    io.write_metrics_csv(out / "metrics.csv", table)
    q1, q4 = table.quartile_means("loc")
    io.write_csv(out / "summary.csv", ["metric", "value"],
                 [["mean_loc_err_m", table.mean_loc], ["mean_pose_err_m", table.mean_pose],
                  ["loc_err_first_quartile_m", q1], ["loc_err_last_quartile_m", q4]])
    print(f"mean localisation error {table.mean_loc:.4f} m, mean keypoint error {table.mean_pose:.4f} m")
    return EXIT_OK


def cmd_report(cfg: RunConfig, out: Path, args) -> int:
    from .report import plot_errors, plot_losses
    inputs = [Path(p) for p in (args.input or [])]
    if not inputs:
        raise ConfigError("report needs at least one --input DIR")
    metrics = {p.name: p / "metrics.csv" for p in inputs if (p / "metrics.csv").exists()}
    hists = {p.name: p / "history.csv" for p in inputs if (p / "history.csv").exists()}
    if not metrics and not hists:
        raise ConfigError("no metrics.csv or history.csv in the given inputs")
    if metrics:
        plot_errors(metrics, out / "errors.svg")
    if hists:
        plot_losses(hists, out / "loss.svg")
    print(f"wrote {', '.join(n for n, d in (('errors.svg', metrics), ('loss.svg', hists)) if d)}")
    return EXIT_OK


COMMANDS = {
    "analyze-resolution": (cmd_analyze_resolution, "resolution limits of the array geometry"),
    "simulate": (cmd_simulate, "simulate a CSI sequence (CSIS)"),
    "preprocess": (cmd_preprocess, "extract dynamic tensors from a CSIS file (CSID)"),
    "verify-infotheory": (cmd_verify_infotheory, "typical-set lemmas, bounds and random coding"),
    "make-dataset": (cmd_make_dataset, "simulate walks into a CSID + truth CSV dataset"),
    "train": (cmd_train, "train the toy estimator"),
    "evaluate": (cmd_evaluate, "per-timestamp test errors"),
    "report": (cmd_report, "SVG plots from metric and history CSVs"),
}


# --------------------------------------------------------------------------
# argument handling

def build_parser() -> argparse.ArgumentParser:
    keys = "\n".join(f"  {k} (default {SCHEMA[k].default!r}): {SCHEMA[k].help}" for k in sorted(SCHEMA))
    parser = argparse.ArgumentParser(
        prog="wisense", formatter_class=argparse.RawDescriptionHelpFormatter,
        description="Wi-Fi sensing toolkit.",
        epilog="configuration keys (key=value, one per line, '#' comments):\n" + keys
               + "\n\nexit codes: 0 ok, 2 config error, 3 runtime error, 4 check failed")
    parser.add_argument("--version", action="version", version=f"wisense {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        p.add_argument("--out", help=f"output directory (default runs/{name})")
        p.add_argument("--seed", type=int, help="global seed (run.seed)")
        if name == "simulate":
            p.add_argument("--duration", type=float, help="seconds to simulate (scene.duration)")
        if name == "preprocess":
            p.add_argument("--input", help="CSIS file")
        if name == "verify-infotheory":
            p.add_argument("--sources", type=int, help="random sources (infotheory.sources)")
        if name in ("train", "evaluate"):
            p.add_argument("--dataset", help="directory written by make-dataset")
        if name == "evaluate":
            p.add_argument("--weights", help="weights file written by train")
        if name == "report":
            p.add_argument("--input", action="append", help="run directory (repeatable)")
    return parser


def _flag_overrides(args) -> dict:
    return {"run.seed": args.seed,
            "scene.duration": getattr(args, "duration", None),
            "infotheory.sources": getattr(args, "sources", None)}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    func, _ = COMMANDS[args.command]
    try:
        cfg = resolve(args.config, args.set, _flag_overrides(args))
    except ConfigError as exc:
        print(f"wisense: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or Path("runs") / args.command)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"wisense: runtime error: cannot create {out}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    marker = out / INCOMPLETE
    marker.write_text(f"{args.command} started\n")
    cfg.write(out)
    try:
        code = func(cfg, out, args)
    except ConfigError as exc:
        print(f"wisense: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckFailed as exc:
        marker.unlink()
        print(f"wisense: check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except Exception as exc:  # structured message, partial outputs stay flagged
        print(f"wisense: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    marker.unlink()
    return code


if __name__ == "__main__":
    sys.exit(main())
