"""Command-line interface: sample, diagnose, verify, search.

Every run is described by a flat RunConfig.  Values merge in three layers:
dataclass defaults, then a --config key=value file, then explicit flags.
Each command writes its data artifacts plus run_summary.txt (human-readable
report) and run_config.txt (the merged config, reusable via --config).

Exit codes: 0 success, 2 config error, 3 verification failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
import tempfile
import time

import numpy as np

from .diagnostics import (
    energy_curves,
    moment_report_csv,
    simulate_bias,
    verify_grid,
)
from .errors import EvaluationError, ParameterError, ProtocolError, ShapeError
from .model import (
    GaussianDataModel,
    OraclePredictor,
    perturbed_eps,
    reverse_terminal_law,
)
from .plots import plot_energy_curves, plot_moment_report, plot_search_trace
from .presets import get_preset
from .sampler import (
    HIGH_VARIANTS,
    LOW_VARIANTS,
    SamplerConfig,
    WeightPolicy,
    sample,
)
from .schedule import SIGMA_OPTIONS, cosine_schedule, linear_schedule
from .search import SearchContext, sequential_wl_wh_search
from .tensorfile import read_tensor, write_tensor

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3
EXIT_IO = 4


@dataclasses.dataclass
class RunConfig:
    """Flat run description; every field is one CLI flag and one file key."""

    command: str = ""
    out: str = "."
    seed: int = 0
    schedule: str = "linear"
    T: int = 1000
    steps: int = 50
    sigma: str = "posterior"
    kind: str = "ddpm"
    mu: float = 0.0
    s: float = 1.0
    mu_file: str = ""
    s_file: str = ""
    channels: int = 1
    height: int = 8
    width: int = 8
    eta: float = 0.0
    batch: int = 64
    policy: str = "off"
    preset: str = ""
    w_l: float = 1.0
    w_h: float = 1.0
    t_mid: float = 0.2
    low_variant: str = "constant"
    high_variant: str = "turnon"
    split: int = 0
    draws: int = 100000
    target: str = "baseline-law"
    wl_lo: float = 0.0
    wl_hi: float = 0.07
    wh_lo: float = 0.9
    wh_hi: float = 1.1
    coarse: float = 0.01
    fine: float = 0.001


_CHOICES = {
    "schedule": ("linear", "cosine"),
    "sigma": SIGMA_OPTIONS,
    "kind": ("ddpm", "ddim"),
    "policy": ("off", "wpp"),
    "target": ("baseline-law", "data"),
    "low_variant": LOW_VARIANTS,
    "high_variant": HIGH_VARIANTS,
}


def _threads() -> int:
    raw = os.environ.get("WPP_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ParameterError(f"WPP_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise ParameterError(f"WPP_THREADS must be >= 1, got {n}")
    return n


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    for f in dataclasses.fields(RunConfig):
        if f.name == "command":
            continue
        kwargs = {"dest": f.name, "default": None}
        if f.name in _CHOICES:
            kwargs["choices"] = _CHOICES[f.name]
        ftype = type(f.default)
        kwargs["type"] = ftype if ftype in (int, float) else str
        p.add_argument("--" + f.name.replace("_", "-"), **kwargs)
    p.add_argument(
        "--config",
        default=None,
        help="flat key=value file; explicit flags override its values",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wpp",
        description="wavelet-regulated diffusion sampling and its diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "sample": "draw a batch and write it as a tensor file",
        "diagnose": "compare forward and reverse subband energies",
        "verify": "Monte-Carlo check of the reverse moment formulas",
        "search": "two-stage sequential weight search",
    }
    for name, help_text in helps.items():
        _add_run_flags(sub.add_parser(name, help=help_text))
    return parser


def _parse_config_file(path: str) -> dict:
    vals = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, raw = line.split("=", 1)
            vals[key.strip()] = raw.strip()
    return vals


def _apply_file_values(cfg: RunConfig, vals: dict, path: str) -> None:
    types = {f.name: type(f.default) for f in dataclasses.fields(RunConfig)}
    for key, raw in vals.items():
        if key == "command":
            continue
        if key not in types:
            raise ParameterError(f"config file {path}: unknown key {key!r}")
        ftype = types[key]
        try:
            value = ftype(raw) if ftype in (int, float) else raw
        except ValueError:
            raise ParameterError(
                f"config key {key}: cannot parse {raw!r} as {ftype.__name__}"
            )
        setattr(cfg, key, value)


def _validate(cfg: RunConfig) -> None:
    for key, options in _CHOICES.items():
        if getattr(cfg, key) not in options:
            raise ParameterError(
                f"config key {key}: must be one of {', '.join(options)}, "
                f"got {getattr(cfg, key)!r}"
            )
    for key, low in (
        ("T", 1),
        ("steps", 1),
        ("batch", 1),
        ("channels", 1),
        ("height", 1),
        ("width", 1),
        ("seed", 0),
        ("split", 0),
    ):
        if getattr(cfg, key) < low:
            raise ParameterError(f"config key {key}: must be >= {low}, got {getattr(cfg, key)}")
    if cfg.steps > cfg.T:
        raise ParameterError(f"config key steps: must be <= T ({cfg.T}), got {cfg.steps}")
    if cfg.eta < 0:
        raise ParameterError(f"config key eta: must be >= 0, got {cfg.eta}")
    if not cfg.s_file and cfg.s <= 0:
        raise ParameterError(f"config key s: must be > 0, got {cfg.s}")
    if not 0.0 <= cfg.t_mid <= 1.0:
        raise ParameterError(f"config key t_mid: must lie in [0, 1], got {cfg.t_mid}")


def merge_config(args: argparse.Namespace) -> RunConfig:
    """Builds the effective RunConfig: defaults, then file, then flags."""
    cfg = RunConfig()
    if args.config:
        _apply_file_values(cfg, _parse_config_file(args.config), args.config)
    for f in dataclasses.fields(RunConfig):
        if f.name == "command":
            continue
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(cfg, f.name, value)
    cfg.command = args.command
    _validate(cfg)
    return cfg


def _build_schedule(cfg: RunConfig):
    make = linear_schedule if cfg.schedule == "linear" else cosine_schedule
    parent = make(cfg.T, sigma_option=cfg.sigma)
    if cfg.steps == cfg.T:
        return parent
    return parent.subsample(cfg.steps)


def _load_grid(path: str, role: str) -> np.ndarray:
    grid = read_tensor(path)
    if grid.shape[0] != 1:
        raise ShapeError(f"{role} must hold a single grid (B=1), got B={grid.shape[0]}")
    return grid[0]


def _build_model(cfg: RunConfig) -> GaussianDataModel:
    shape = (cfg.channels, cfg.height, cfg.width)
    mu = _load_grid(cfg.mu_file, "mu_file") if cfg.mu_file else None
    s = _load_grid(cfg.s_file, "s_file") if cfg.s_file else None
    if mu is not None and s is not None and mu.shape != s.shape:
        raise ShapeError(f"mu_file grid {mu.shape} does not match s_file grid {s.shape}")
    if mu is not None:
        shape = mu.shape
    elif s is not None:
        shape = s.shape
    if mu is None:
        mu = np.full(shape, float(cfg.mu))
    if s is None:
        s = np.full(shape, float(cfg.s))
    model = GaussianDataModel(mu=mu, s=s)
    cfg.channels, cfg.height, cfg.width = (int(d) for d in model.shape)
    return model


def _build_predictor(cfg: RunConfig, model: GaussianDataModel, sched):
    base = OraclePredictor(model, sched)
    if cfg.eta > 0.0:
        return perturbed_eps(base, cfg.eta, seed=cfg.seed + 1)
    return base


def _build_policy(cfg: RunConfig):
    if cfg.preset:
        return get_preset(cfg.preset, cfg.steps)
    if cfg.policy == "off":
        return None
    return WeightPolicy(
        low_variant=cfg.low_variant,
        high_variant=cfg.high_variant,
        w_l=cfg.w_l,
        w_h=cfg.w_h,
        t_mid_frac=cfg.t_mid,
    )


def _atomic_write_text(path: str, text: str) -> None:
    dest_dir = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=dest_dir, suffix=".txt.tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_csv(write_fn, path: str) -> None:
    dest_dir = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=dest_dir, suffix=".csv.tmp")
    os.close(fd)
    try:
        write_fn(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _config_lines(cfg: RunConfig) -> list:
    names = sorted(f.name for f in dataclasses.fields(RunConfig))
    return [f"{name}={getattr(cfg, name)}" for name in names]


def _ensure_out(cfg: RunConfig) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def _write_reports(cfg, out_dir, started, outputs, extra=()):
    lines = [
        f"command: {cfg.command}",
        f"seed: {cfg.seed}",
        f"threads: {_threads()}",
        f"wall_time_s: {time.monotonic() - started:.3f}",
        "outputs: " + ", ".join(outputs),
    ]
    lines.extend(extra)
    lines.append("config:")
    lines.extend(_config_lines(cfg))
    _atomic_write_text(os.path.join(out_dir, "run_summary.txt"), "\n".join(lines) + "\n")
    _atomic_write_text(
        os.path.join(out_dir, "run_config.txt"), "\n".join(_config_lines(cfg)) + "\n"
    )


def cmd_sample(cfg: RunConfig) -> int:
    """Draws one batch with the configured predictor and policy."""
    started = time.monotonic()
    sched = _build_schedule(cfg)
    model = _build_model(cfg)
    pred = _build_predictor(cfg, model, sched)
    policy = _build_policy(cfg)
    sampler_cfg = SamplerConfig(
        kind=cfg.kind, steps=sched.T, seed=cfg.seed, shape=model.shape, policy=policy
    )
    x = sample(pred, sched, sampler_cfg, cfg.batch)
    out = _ensure_out(cfg)
    write_tensor(os.path.join(out, "samples.wppt"), x)
    _write_reports(cfg, out, started, ["samples.wppt"])
    return EXIT_OK


def cmd_diagnose(cfg: RunConfig) -> int:
    """Writes the four-source subband energy table and its figure."""
    started = time.monotonic()
    sched = _build_schedule(cfg)
    model = _build_model(cfg)
    pred = _build_predictor(cfg, model, sched)
    split = cfg.split if cfg.split > 0 else int(np.floor(0.6 * sched.T + 0.5))
    if not 1 <= split <= sched.T - 1:
        raise ParameterError(
            f"config key split: must lie in [1, {sched.T - 1}], got {split}"
        )
    x0 = model.sample(cfg.batch, np.random.default_rng(cfg.seed + 2))
    fwd, rev = simulate_bias(pred, sched, x0, split, seed=cfg.seed)
    curve = energy_curves(fwd, rev, pred, sched)
    out = _ensure_out(cfg)
    _atomic_csv(curve.to_csv, os.path.join(out, "energy_curves.csv"))
    plot_energy_curves(curve, os.path.join(out, "energy_curves.png"))
    _write_reports(
        cfg,
        out,
        started,
        ["energy_curves.csv", "energy_curves.png"],
        extra=[f"split: {split}"],
    )
    return EXIT_OK


def cmd_verify(cfg: RunConfig, _variance_fn=None) -> int:
    """Runs the reverse-moment certification grid; exit 3 on any breach.

    `_variance_fn(phi, sched, t)` is a test hook replacing the predicted
    variance, used as a negative control for the breach detection path.
    """
    started = time.monotonic()
    if cfg.draws < 10**4:
        raise ParameterError(f"config key draws: must be >= 10^4, got {cfg.draws}")
    sched = _build_schedule(cfg)
    model = _build_model(cfg)
    x0 = model.sample(1, np.random.default_rng(cfg.seed + 2))[0]
    ts = sorted({1, max(1, round(sched.T / 2)), sched.T})
    triples = [
        (gamma, phi, t)
        for t in ts
        for gamma in (1.0, 0.9, 0.7)
        for phi in (0.0, 0.2, 0.4)
    ]
    reports = verify_grid(sched, triples, x0, cfg.draws, cfg.seed)
    if _variance_fn is not None:
        reports = [
            dataclasses.replace(r, pred_var=_variance_fn(phi, sched, r.t))
            for r, (_, phi, _) in zip(reports, triples)
        ]
    out = _ensure_out(cfg)
    _atomic_csv(lambda p: moment_report_csv(reports, p), os.path.join(out, "moment_report.csv"))
    plot_moment_report(reports, os.path.join(out, "moment_report.png"))
    breaches = sum(not r.within(3.0) for r in reports)
    _write_reports(
        cfg,
        out,
        started,
        ["moment_report.csv", "moment_report.png"],
        extra=[
            f"grid_points: {len(triples)}",
            f"draws_per_point: {cfg.draws}",
            f"breaches: {breaches}",
        ],
    )
    return EXIT_VERIFY if breaches else EXIT_OK


def cmd_search(cfg: RunConfig) -> int:
    """Runs the sequential weight search and writes its trace."""
    started = time.monotonic()
    sched = _build_schedule(cfg)
    model = _build_model(cfg)
    pred = _build_predictor(cfg, model, sched)
    if cfg.target == "data":
        target = model
    else:
        target = reverse_terminal_law(model, sched, kind=cfg.kind, eta=0.0)
    ctx = SearchContext(
        pred=pred,
        sched=sched,
        kind=cfg.kind,
        shape=model.shape,
        B=cfg.batch,
        seed=cfg.seed,
        target=target,
        t_mid_frac=cfg.t_mid,
        wl_lo=cfg.wl_lo,
        wl_hi=cfg.wl_hi,
        wh_lo=cfg.wh_lo,
        wh_hi=cfg.wh_hi,
        coarse=cfg.coarse,
        fine=cfg.fine,
    )
    res = sequential_wl_wh_search(ctx)
    out = _ensure_out(cfg)

    def write_trace(path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["stage", "w", "objective"])
            for prefix, stage_res in (("wl", res.stage1), ("wh", res.stage2)):
                for stage, w, val in stage_res.points:
                    writer.writerow([f"{prefix}-{stage}", f"{w:.10g}", f"{val:.10g}"])

    _atomic_csv(write_trace, os.path.join(out, "search_trace.csv"))
    plot_search_trace(res, os.path.join(out, "search_trace.png"))
    _write_reports(
        cfg,
        out,
        started,
        ["search_trace.csv", "search_trace.png"],
        extra=[
            f"w_l: {res.w_l:.10g}",
            f"w_h: {res.w_h:.10g}",
            f"neutral_objective: {res.neutral_objective:.10g}",
            f"best_objective: {res.objective:.10g}",
        ],
    )
    return EXIT_OK


_HANDLERS = {
    "sample": cmd_sample,
    "diagnose": cmd_diagnose,
    "verify": cmd_verify,
    "search": cmd_search,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _threads()
        cfg = merge_config(args)
        return _HANDLERS[cfg.command](cfg)
    except (ParameterError, ShapeError) as err:
        print(f"wpp: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except EvaluationError as err:
        print(f"wpp: evaluation failed: {err}", file=sys.stderr)
        return EXIT_VERIFY
    except (ProtocolError, OSError) as err:
        print(f"wpp: i/o error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
