"""Command line front end.

Configuration precedence, lowest to highest: built-in defaults, the JSON
document given by ``--config``, ``--set KEY=VALUE`` overrides, then the
dedicated flags ``--seed``, ``--workers`` and ``--out``.  When no worker
count is configured anywhere, ``TANKMIX_WORKERS`` is consulted, then 1.

A manifest written by any run is itself a valid ``--config`` document.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import io as tio
from .experiments import (
    centre_state,
    drift_run,
    equilibrium_run,
    kac_decay,
    passage_run,
    summarize_decay,
    tank_decay,
)
from .kac import KacState, kac_simulate
from .lyapunov import LyapunovParams, sup_V_outside_B
from .process import EnergyState, ModelParams, resolve_workers, run_ensemble, simulate
from .equilibrium import sample_pi
from .rng import RngStream

COMMANDS = ("simulate", "equilibrium", "tv-decay", "drift-check", "passage", "kac-compare")

DEFAULT_SIZE = {
    "simulate": 1,
    "equilibrium": 100_000,
    "tv-decay": 100_000,
    "drift-check": 100_000,
    "passage": 100_000,
    "kac-compare": 100_000,
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    model: str = "tank"
    m: int = 2
    n_particles: int = 10
    total_energy: float = 1.0
    alpha: float | None = None
    gamma: float = 0.5
    eps0: float | None = None
    eps1: float | None = None
    h: float | None = None
    times: list | None = None
    kac_times: list | None = None
    t_end: float | None = None
    ensemble_size: int | None = None
    initial: object = "centre"
    k_bins: int = 5
    marginal: str = "min"
    law: str = "power"
    input: str | None = None
    grid_per_axis: int = 40
    eps_a: float | None = None
    n_small: int = 10_000
    max_steps: int = 10**7
    seed: int = 0
    workers: int | None = None
    out: str = "."

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}; valid keys are {sorted(known)}")
        return cls(**data)

    def params(self) -> ModelParams:
        return ModelParams(self.m, self.total_energy)

    def size(self, command: str) -> int:
        return DEFAULT_SIZE[command] if self.ensemble_size is None else self.ensemble_size

    def validate(self, command: str) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.model in ("tank", "kac"), f"model must be 'tank' or 'kac', got {self.model!r}")
        need(isinstance(self.m, int) and self.m >= 1, f"m must be an integer >= 1, got {self.m!r}")
        need(isinstance(self.n_particles, int) and self.n_particles >= 2,
             f"n_particles (Kac N) must be an integer >= 2, got {self.n_particles!r}")
        need(_pos(self.total_energy), f"total_energy must be a positive finite number, got {self.total_energy!r}")
        need(isinstance(self.seed, int) and 0 <= self.seed < 2**64, f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        need(self.workers is None or (isinstance(self.workers, int) and self.workers >= 1),
             f"workers must be an integer >= 1, got {self.workers!r}")
        need(self.ensemble_size is None or (isinstance(self.ensemble_size, int) and self.ensemble_size >= 1),
             f"ensemble_size must be an integer >= 1, got {self.ensemble_size!r}")
        need(isinstance(self.k_bins, int) and self.k_bins >= 2, f"k_bins must be an integer >= 2, got {self.k_bins!r}")
        need(self.marginal in ("min", "y"), f"marginal must be 'min' or 'y', got {self.marginal!r}")
        need(self.law in ("power", "exponential"), f"law must be 'power' or 'exponential', got {self.law!r}")
        need(0 < self.gamma < 2, f"gamma must lie in (0, 2), got {self.gamma!r}")
        for name in ("times", "kac_times"):
            ts = getattr(self, name)
            if ts is not None:
                need(isinstance(ts, list) and len(ts) > 0 and all(_num(t) and t >= 0 for t in ts),
                     f"{name} must be a non-empty list of non-negative numbers")
                need(all(a < b for a, b in zip(ts, ts[1:])), f"{name} must be strictly increasing")
        need(self.t_end is None or _pos(self.t_end), f"t_end must be positive, got {self.t_end!r}")
        need(self.h is None or _pos(self.h), f"h must be positive, got {self.h!r}")
        need(self.eps_a is None or (_pos(self.eps_a) and self.eps_a < self.total_energy / (self.m + 1)),
             f"eps_a must lie in (0, E/(m+1)), got {self.eps_a!r}")
        need(isinstance(self.max_steps, int) and self.max_steps >= 1, "max_steps must be a positive integer")
        need(isinstance(self.grid_per_axis, int) and self.grid_per_axis >= 4, "grid_per_axis must be an integer >= 4")
        if self.model == "tank":
            self.initial_state()
        if command == "simulate" and self.t_end is None and self.times is None:
            raise ConfigError("simulate needs t_end or a times list")
        if command == "tv-decay" and self.input is not None:
            need(Path(self.input).is_file(), f"input file {self.input!r} does not exist")
        if command == "drift-check":
            need(self.model == "tank", "drift-check applies to the tank model only")
            try:
                self.lyapunov_params().check_against(self.params())
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        if command == "passage":
            need(self.model == "tank", "passage applies to the tank model only")
            need(0.25 < self.passage_alpha() < 0.5, f"passage alpha must lie in (1/4, 1/2), got {self.passage_alpha()}")
            need(self.passage_h() <= 0.5 / self.params().max_total_rate,
                 f"h must be <= 0.5/sqrt(m E) = {0.5 / self.params().max_total_rate:.6g}")

    def initial_state(self):
        init = self.initial
        params = self.params()
        if init == "pi":
            return "pi"
        if init == "centre":
            return centre_state(params)
        if isinstance(init, list) and all(_num(v) for v in init):
            arr = np.array(init, dtype=np.float64)
            if arr.size == params.m + 1 and math.isclose(arr.sum(), params.total_energy, rel_tol=1e-12) and np.all(arr > 0):
                return EnergyState.from_array(arr)
            raise ConfigError(f"initial must be {params.m + 1} positive numbers summing to total_energy={params.total_energy}")
        raise ConfigError("initial must be 'centre', 'pi' or a list [x1, ..., xm, y]")

    def lyapunov_params(self) -> LyapunovParams:
        params = self.params()
        alpha = 0.45 if self.alpha is None else self.alpha
        try:
            lp = LyapunovParams.default(params, alpha, self.eps1, self.eps0, self.h)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return lp

    def passage_alpha(self) -> float:
        return 0.5 - self.gamma / 8.0 if self.alpha is None else self.alpha

    def passage_h(self) -> float:
        return 0.5 / self.params().max_total_rate if self.h is None else self.h


def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _pos(v) -> bool:
    return _num(v) and v > 0


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: ExperimentConfig, out: Path, workers: int) -> list[str]:
    n = cfg.size("simulate")
    if cfg.model == "kac":
        times = cfg.times or list(np.linspace(0.0, cfg.t_end, 11))
        v0 = np.zeros(cfg.n_particles)
        v0[0] = math.sqrt(cfg.total_energy)
        ens = kac_simulate(KacState(v0), times, n, cfg.seed, workers)
        labels = [f"v{i}" for i in range(1, cfg.n_particles + 1)]
        if n == 1:
            rows = ([t, *ens.states[0, j]] for j, t in enumerate(ens.sample_times))
            tio.write_csv(out / "kac.csv", ["t"] + labels, rows)
        else:
            tio.write_ensemble(out / "kac.csv", ens.sample_times, ens.states, labels)
        return ["kac.csv"]
    params = cfg.params()
    init = cfg.initial_state()
    if n == 1 and cfg.times is None:
        rng = RngStream(cfg.seed, 0)
        start = sample_pi(params, rng) if init == "pi" else init
        traj = simulate(start, cfg.t_end, rng, params=params)
        tio.write_trajectory(out / "trajectory.csv", traj)
        return ["trajectory.csv"]
    times = cfg.times or list(np.linspace(0.0, cfg.t_end, 11))
    t_end = cfg.t_end if cfg.t_end is not None else times[-1]
    ens = run_ensemble(init, t_end, n, times, cfg.seed, workers, params)
    tio.write_ensemble(out / "ensemble.csv", ens.sample_times, ens.states)
    return ["ensemble.csv"]


def cmd_equilibrium(cfg: ExperimentConfig, out: Path, workers: int) -> list[str]:
    samples, report = equilibrium_run(cfg.params(), cfg.size("equilibrium"), cfg.seed, workers)
    tio.write_ensemble(out / "pi_samples.csv", np.zeros(1), samples[:, None, :])
    tio.write_json(out / "moments.json", report)
    return ["pi_samples.csv", "moments.json"]


def _decay_summary(report: dict, law: str) -> dict:
    top = dict(report[law])
    top["fits"] = report
    return top


def _write_decay(path: Path, run) -> None:
    tio.write_csv(path, ["t", "tv", "ci_lo", "ci_hi"], zip(run.times, run.tv, run.ci_lo, run.ci_hi))


def cmd_tv_decay(cfg: ExperimentConfig, out: Path, workers: int) -> list[str]:
    if cfg.input is not None:
        data = tio.read_csv(cfg.input)
        if "t" not in data or "tv" not in data:
            raise ConfigError(f"input file {cfg.input!r} needs columns 't' and 'tv'")
        report = summarize_decay(data["t"], data["tv"], None)
        tio.write_json(out / "fit.json", _decay_summary(report, cfg.law))
        return ["fit.json"]
    if cfg.model == "kac":
        run, _ = kac_decay(cfg.n_particles, cfg.times or [0.5, 1, 2, 4, 8], cfg.size("tv-decay"),
                           cfg.seed, workers, cfg.k_bins, cfg.total_energy)
    else:
        run, _ = tank_decay(cfg.params(), cfg.initial_state(), cfg.times or [5, 10, 20, 40, 80],
                            cfg.size("tv-decay"), cfg.seed, workers, cfg.k_bins, cfg.marginal)
    _write_decay(out / "decay.csv", run)
    tio.write_json(out / "fit.json", _decay_summary(run.report, cfg.law))
    return ["decay.csv", "fit.json"]


def cmd_drift_check(cfg: ExperimentConfig, out: Path, workers: int) -> list[str]:
    params = cfg.params()
    lp = cfg.lyapunov_params()
    rows, report = drift_run(params, lp, cfg.grid_per_axis, cfg.size("drift-check"), cfg.seed, workers)
    header = tio.state_header(params.m) + ["region", "V", "gen_V", "margin"]
    tio.write_csv(out / "drift.csv", header, ([*s.as_array(), r, v, g, mg] for s, r, v, g, mg in rows))
    tio.write_json(out / "drift.json", report)
    return ["drift.csv", "drift.json"]


def cmd_passage(cfg: ExperimentConfig, out: Path, workers: int) -> list[str]:
    params = cfg.params()
    eps_a = cfg.eps_a if cfg.eps_a is not None else params.total_energy / 50.0
    n = cfg.size("passage")
    sample, report = passage_run(params, cfg.passage_alpha(), cfg.passage_h(), eps_a, n,
                                 min(cfg.n_small, n), cfg.seed, workers, cfg.max_steps)
    report["gamma"] = cfg.gamma
    report["level_M_drift"] = 2.0 * sup_V_outside_B(params, cfg.passage_alpha(), eps_a)
    tio.write_csv(out / "passage.csv", ["trial", "tau_steps", "censored"],
                  zip(range(sample.n), sample.steps, sample.censored))
    tio.write_json(out / "passage.json", report)
    return ["passage.csv", "passage.json"]


def cmd_kac_compare(cfg: ExperimentConfig, out: Path, workers: int) -> list[str]:
    n = cfg.size("kac-compare")
    tank, _ = tank_decay(cfg.params(), cfg.initial_state(), cfg.times or [5, 10, 20, 40, 80], n,
                         cfg.seed, workers, cfg.k_bins, cfg.marginal)
    kac, _ = kac_decay(cfg.n_particles, cfg.kac_times or [0.5, 1, 2, 4, 8], n, cfg.seed, workers,
                       cfg.k_bins, cfg.total_energy)
    _write_decay(out / "tank_decay.csv", tank)
    _write_decay(out / "kac_decay.csv", kac)
    tio.write_json(out / "kac_compare.json", {
        "tank": tank.report,
        "kac": kac.report,
        "contrast": tank.report["better_law"] == "power" and kac.report["better_law"] == "exponential",
    })
    return ["tank_decay.csv", "kac_decay.csv", "kac_compare.json"]


HANDLERS = {
    "simulate": cmd_simulate,
    "equilibrium": cmd_equilibrium,
    "tv-decay": cmd_tv_decay,
    "drift-check": cmd_drift_check,
    "passage": cmd_passage,
    "kac-compare": cmd_kac_compare,
}


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tankmix", description="Energy-tank jump process experiments.")
    parser.add_argument("--version", action="version", version=f"tankmix {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="JSON config document (or a previous manifest)")
    parser.add_argument("--seed", type=int, help="64-bit base seed")
    parser.add_argument("--workers", type=int, help="worker threads (fallback: TANKMIX_WORKERS, then 1)")
    parser.add_argument("--out", type=str, help="output directory")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key; VALUE is parsed as JSON when possible")
    return parser


def load_config(args) -> ExperimentConfig:
    data: dict = {}
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {str(args.config)!r} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        data.update(doc.get("config", doc) if "manifest_version" in doc else doc)
    for item in args.set:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            data[key] = json.loads(raw)
        except json.JSONDecodeError:
            data[key] = raw
    for key in ("seed", "workers", "out"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    try:
        return ExperimentConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def run(argv=None) -> dict:
    args = build_parser().parse_args(argv)
    cfg = load_config(args)
    cfg.validate(args.command)
    try:
        workers = resolve_workers(cfg.workers)
    except ValueError as exc:
        raise ConfigError(f"TANKMIX_WORKERS: {exc}") from exc
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    written = HANDLERS[args.command](cfg, out, workers)
    manifest = {
        "manifest_version": 1,
        "command": args.command,
        "config": asdict(cfg),
        "seed": cfg.seed,
        "workers": workers,
        "version": __version__,
        "wall_time_s": time.perf_counter() - t0,
        "outputs": written,
    }
    tio.write_json(out / "manifest.json", manifest)
    return manifest


def main(argv=None) -> int:
    try:
        manifest = run(argv)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except ConfigError as exc:
        return _fail("ConfigError", str(exc), 2)
    except OSError as exc:
        return _fail("FilesystemError", str(exc), 3)
    except ValueError as exc:
        return _fail("ValueError", str(exc), 2)
    except Exception as exc:  # noqa: BLE001
        return _fail(type(exc).__name__, str(exc), 1)
    print(json.dumps({"ok": True, "command": manifest["command"], "outputs": manifest["outputs"]}))
    return 0


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
