"""Flat ``section.key=value`` run configuration."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Optional

from . import __version__


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s: str) -> Optional[float]:
    return None if s.strip().lower() in ("", "none", "null") else float(s)


def _floats(s: str) -> tuple:
    return tuple(float(v) for v in s.split(",") if v.strip())


def _show(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    help: str = ""


SCHEMA: dict = {
    "run.seed": Key(int, 0, "global seed"),
    "scene.duration": Key(float, 4.0, "simulated seconds"),
    "scene.n_walls": Key(int, 4, "static reflectors"),
    "scene.noise_std": Key(float, 0.0, "complex noise std per CSI entry"),
    "scene.phase_distortion": Key(str, "uniform", "zero | uniform | linear"),
    "scene.sample_rate": Key(float, 1000.0, "packets per second"),
    "scene.target_speed": Key(float, 1.0, "walker speed, m/s"),
    "scene.target_gain": Key(float, 0.2, "walker reflection gain"),
    "resolution.carrier_hz": Key(float, 5.32e9, "carrier frequency"),
    "resolution.n_tx": Key(int, 3, "transmit antennas"),
    "resolution.n_rx": Key(int, 3, "receive antennas"),
    "resolution.spacing_wavelengths": Key(float, 0.5, "element spacing in wavelengths"),
    "resolution.bandwidth": Key(float, 40e6, "bandwidth, Hz"),
    "resolution.d_rt": Key(float, 7.0, "Tx-Rx baseline, m"),
    "resolution.theta_r_deg": Key(float, 0.0, "angle at the receiver, degrees"),
    "resolution.sum_path": Key(float, 20.0, "Tx-target-Rx path length, m"),
    "resolution.target_range": Key(float, 5.0, "receiver-target range, m"),
    "resolution.c": Key(float, 299_792_458.0, "propagation speed, m/s"),
    "preprocess.n_ref": Key(int, 1, "reference elements"),
    "preprocess.kappa": Key(float, 100.0, "beta magnitude over max |h_ref|"),
    "preprocess.window_s": Key(float, 1.0, "moving-mean window, s"),
    "preprocess.cutoff_hz": Key(_opt_float, None, "optional one-pole high-pass cutoff"),
    "infotheory.sources": Key(int, 20, "random sources"),
    "infotheory.alphabet": Key(int, 2, "alphabet size of M and Mhat (<= 3)"),
    "infotheory.states": Key(int, 2, "history states"),
    "infotheory.n": Key(int, 4, "block length for enumeration"),
    "infotheory.epsilons": Key(_floats, (0.1, 0.2, 0.3), "typicality slacks"),
    "infotheory.dependence": Key(float, 0.7, "history dependence of random sources"),
    "infotheory.mc_n": Key(int, 8, "block length for random coding"),
    "infotheory.mc_trials": Key(int, 200, "random-coding trials per source and slack"),
    "dataset.n_train": Key(int, 48, "training walks"),
    "dataset.n_val": Key(int, 8, "validation walks"),
    "dataset.n_test": Key(int, 8, "test walks"),
    "dataset.samples_per_sequence": Key(int, 68, "truth instants per walk"),
    "dataset.truth_rate": Key(float, 30.0, "truth rate, Hz"),
    "dataset.csi_rate": Key(float, 1000.0, "CSI rate, Hz"),
    "dataset.noise_std": Key(float, 0.02, "CSI noise std"),
    "dataset.target_gain": Key(float, 0.3, "per-scatterer gain"),
    "estimator.protocol": Key(str, "two_stage", "two_stage | memoryless | temporal"),
    "estimator.max_seq_len": Key(int, 17, "recurrent memory span"),
    "estimator.hidden": Key(int, 32, "trunk width"),
    "estimator.gru_hidden": Key(int, 32, "recurrent width"),
    "estimator.a": Key(float, 0.5, "loss weight a"),
    "estimator.b": Key(float, 0.5, "loss weight b"),
    "estimator.c_start": Key(float, 0.1, "peak-term weight at the start"),
    "estimator.c_end": Key(float, 0.9, "peak-term weight at the end"),
    "estimator.learning_rate": Key(float, 3e-3, "Adam step size"),
    "estimator.lr_final_frac": Key(float, 0.1, "final step size as a fraction"),
    "estimator.epochs": Key(int, 20, "epochs (stage 1 for two_stage)"),
    "estimator.finetune_epochs": Key(int, 10, "stage-2 epochs"),
    "estimator.batch_blocks": Key(int, 16, "blocks per batch"),
    "estimator.temperature": Key(float, 0.05, "soft-argmax temperature"),
    "estimator.sigma_cells": Key(float, 1.0, "truth heatmap std in cells"),
}


class RunConfig(dict):
    """Resolved key -> typed value mapping."""

    def section(self, name: str) -> dict:
        pre = name + "."
        return {k[len(pre):]: v for k, v in self.items() if k.startswith(pre)}

    def dump(self) -> str:
        lines = [f"# wisense {__version__}"]
        lines += [f"{k}={_show(self[k])}" for k in sorted(self)]
        return "\n".join(lines) + "\n"

    def write(self, directory) -> Path:
        path = Path(directory) / "config.resolved.txt"
        path.write_text(self.dump())
        (Path(directory) / "VERSION").write_text(__version__ + "\n")
        return path


def parse_assignments(lines: Iterable[str], origin: str = "<config>") -> dict:
    out = {}
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{no}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = (value, f"{origin}:{no}")
    return out


def resolve(path=None, overrides: Iterable[str] = (), extra: Optional[dict] = None) -> RunConfig:
    """Defaults <- config file <- ``--set`` overrides <- explicit flags."""
    raw = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        raw.update(parse_assignments(text.splitlines(), str(path)))
    raw.update(parse_assignments(overrides, "--set"))
    cfg = RunConfig({k: key.default for k, key in SCHEMA.items()})
    for k, (value, where) in raw.items():
        if k not in SCHEMA:
            raise ConfigError(f"{where}: unknown key {k!r}")
        try:
            cfg[k] = SCHEMA[k].parse(value)
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value for {k}: {exc}") from None
    for k, v in (extra or {}).items():
        if v is None:
            continue
        if k not in SCHEMA:
            raise ConfigError(f"unknown key {k!r}")
        cfg[k] = v
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    if cfg["scene.phase_distortion"] not in ("zero", "uniform", "linear"):
        raise ConfigError("scene.phase_distortion must be zero, uniform or linear")
    if cfg["estimator.protocol"] not in ("two_stage", "memoryless", "temporal"):
        raise ConfigError("estimator.protocol must be two_stage, memoryless or temporal")
    if not 2 <= cfg["infotheory.alphabet"] <= 3:
        raise ConfigError("infotheory.alphabet must be 2 or 3")
    if cfg["infotheory.sources"] < 1:
        raise ConfigError("infotheory.sources must be >= 1")
    if cfg["scene.duration"] <= 0:
        raise ConfigError("scene.duration must be positive")
    if not cfg["infotheory.epsilons"] or min(cfg["infotheory.epsilons"]) <= 0:
        raise ConfigError("infotheory.epsilons must be positive")
