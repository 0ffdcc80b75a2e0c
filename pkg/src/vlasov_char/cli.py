"""Command-line front end: figure data as CSV/JSON and the verification suite.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error (including an unwritable output path).
"""
from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import figures
from .chain_lift import PhaseBox
from .verify import VerifyConfig, run_all
from .well_solutions import ThetaSolution, TruncationPolicy, WellParams

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# keys accepted in a config file, with their types
_CONFIG_KEYS = {
    "mu": int,
    "beta": float,
    "a": float,
    "adot": float,
    "m": float,
    "hbar": float,
    "nx": int,
    "nt": int,
    "nv": int,
    "t_max": float,
    "x_max": float,
    "out": str,
    "format": str,
    "trunc_tol": float,
    "flux_cosine": str,
    "times": str,
    "stationary": bool,
}

# per-command defaults for keys whose natural value depends on the figure
_COMMAND_DEFAULTS = {
    "density-1d": {"mu": 5, "nx": 401, "nt": 64},
    "flux-1d": {"mu": 5, "nx": 401, "nt": 64},
    "theta-maps": {"mu": 1, "nx": 201, "nt": 201},
    "phase-snapshots": {"mu": 1, "nx": 81, "nv": 41},
    "verify": {"mu": 1},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Validated run settings; defaults are ``mu=1, beta=0.01, a=0.5, m=hbar=1``."""

    params: WellParams = field(default_factory=WellParams)
    mu: int = 1
    beta: float = 0.01
    adot: float = 1.0
    trunc: TruncationPolicy = field(default_factory=TruncationPolicy)
    flux_cosine: str = "multiple"
    nx: int = 201
    nt: int = 201
    nv: int = 41
    t_max: float | None = None
    x_max: float | None = None
    times: tuple | None = None
    stationary: bool = False
    out: str | None = None
    fmt: str = "csv"
    workers: int = 1

    @property
    def box(self) -> PhaseBox:
        return PhaseBox((self.params.a, self.adot))

    def solution(self) -> ThetaSolution:
        return ThetaSolution(self.params, self.params.mode(self.mu), self.beta, trunc=self.trunc, flux_cosine=self.flux_cosine)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment, dashes and underscores are interchangeable."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    out = {}
    for key, raw in parser["run"].items():
        key = key.replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r} in {path}")
        kind = _CONFIG_KEYS[key]
        try:
            out[key] = _parse_bool(raw) if kind is bool else kind(raw)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"bad value for {key!r} in {path}: {raw!r}") from exc
    return out


def _workers() -> int:
    raw = os.environ.get("VLASOV_CHAR_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"VLASOV_CHAR_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError("VLASOV_CHAR_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _parse_times(text: str) -> tuple:
    try:
        return tuple(float(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise ConfigError(f"times must be comma-separated numbers, got {text!r}") from None


def build_config(command: str, args: argparse.Namespace) -> RunConfig:
    """Merge command defaults, the config file and explicit flags (flags win)."""
    values = dict(_COMMAND_DEFAULTS.get(command, {}))
    if args.config:
        values.update(read_config_file(args.config))
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            values[key] = flag
    if isinstance(values.get("times"), str):
        values["times"] = _parse_times(values["times"])
    try:
        params = WellParams(
            m=float(values.pop("m", 1.0)), hbar=float(values.pop("hbar", 1.0)), a=float(values.pop("a", 0.5))
        )
        trunc = TruncationPolicy(term_tol=float(values.pop("trunc_tol", 1e-16)))
        fmt = values.pop("format", "csv")
        if fmt not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {fmt!r}")
        cfg = RunConfig(params=params, trunc=trunc, fmt=fmt, workers=_workers(), **values)
        if cfg.adot <= 0:
            raise ConfigError("adot must be positive")
        for name in ("nx", "nt", "nv"):
            if getattr(cfg, name) < 2:
                raise ConfigError(f"{name} must be >= 2")
        params.mode(cfg.mu)
        cfg.solution()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {out}: {exc.strerror}") from exc


# ---------------------------------------------------------------------------
# commands


def _marginal_grid(cfg: RunConfig) -> figures.GridSpec:
    grid = figures.default_marginal_grid(cfg.box, nx=cfg.nx, nt=cfg.nt, t_max=cfg.t_max)
    if cfg.x_max is not None:
        grid = figures.GridSpec(grid.x_min, cfg.x_max, grid.nx, grid.t_min, grid.t_max, grid.nt)
    return grid


def cmd_density_1d(cfg: RunConfig) -> int:
    table = figures.density_1d(cfg.params.mode(cfg.mu), cfg.box, _marginal_grid(cfg), cfg.workers)
    _emit(table.dumps(cfg.fmt), cfg.out)
    return EXIT_OK


def cmd_flux_1d(cfg: RunConfig) -> int:
    table = figures.flux_1d(cfg.params.mode(cfg.mu), cfg.box, _marginal_grid(cfg), cfg.workers)
    _emit(table.dumps(cfg.fmt), cfg.out)
    return EXIT_OK


def cmd_theta_maps(cfg: RunConfig) -> int:
    if not cfg.out:
        raise ConfigError("theta-maps writes several files; give an output directory with --out")
    sol = cfg.solution()
    periods = 1.0 if cfg.t_max is None else cfg.t_max / sol.mode.T
    if periods <= 0:
        raise ConfigError("t_max must be positive")
    tables = {
        "density": figures.theta_density_map(sol, cfg.nx, cfg.nt, periods),
        "flux_profiles": figures.theta_flux_profiles(sol, cfg.nx),
        "characteristic_lines": figures.characteristic_lines(sol),
    }
    outdir = Path(cfg.out)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create {outdir}: {exc.strerror}") from exc
    for name, table in tables.items():
        _emit(table.dumps(cfg.fmt), str(outdir / f"{name}.{cfg.fmt}"))
    return EXIT_OK


def cmd_phase_snapshots(cfg: RunConfig) -> int:
    box = cfg.box
    times = cfg.times
    if times is None:
        unit = box.a / box.adot
        times = (0.0, 0.5 * unit, unit, 2.0 * unit)
    if any(t < 0 for t in times):
        raise ConfigError("snapshot times must be non-negative")
    kw = {"mode": cfg.params.mode(cfg.mu)} if cfg.stationary else {"sol": cfg.solution()}
    table = figures.phase_snapshots(box, times, nx=cfg.nx, nv=cfg.nv, workers=cfg.workers, **kw)
    _emit(table.dumps(cfg.fmt), cfg.out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    vcfg = VerifyConfig(
        params=cfg.params, mu=cfg.mu, beta=cfg.beta, adot=cfg.adot, trunc=cfg.trunc, flux_cosine=cfg.flux_cosine
    )
    reports = run_all(vcfg)
    _emit(json.dumps([r.to_dict() for r in reports], indent=2, allow_nan=False) + "\n", cfg.out)
    failed = [r.name for r in reports if not r.passed]
    for name in failed:
        print(f"FAILED: {name}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


_COMMANDS = {
    "density-1d": (cmd_density_1d, "coordinate density of the order-2 stationary lift on an (x, t) grid"),
    "flux-1d": (cmd_flux_1d, "mean velocity of the order-2 stationary lift on an (x, t) grid"),
    "theta-maps": (cmd_theta_maps, "theta-solution density map, flux profiles and characteristic lines"),
    "phase-snapshots": (cmd_phase_snapshots, "order-2 phase density and support corners at chosen times"),
    "verify": (cmd_verify, "run every residual, invariant and negative-control check"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run settings (override --config)")
    g.add_argument("--config", help="flat key = value settings file")
    g.add_argument("--mu", type=int, help="mode number (default 5 for density-1d/flux-1d, else 1)")
    g.add_argument("--beta", type=float, help="inverse temperature of the theta solution (default 0.01)")
    g.add_argument("--a", type=float, help="well width (default 0.5)")
    g.add_argument("--adot", type=float, help="velocity width of the phase box (default 1)")
    g.add_argument("--m", type=float, help="mass (default 1)")
    g.add_argument("--hbar", type=float, help="reduced Planck constant (default 1)")
    g.add_argument("--nx", type=int, help="samples along x or eta")
    g.add_argument("--nt", type=int, help="samples along t or tau")
    g.add_argument("--nv", type=int, help="samples along v (phase-snapshots)")
    g.add_argument("--t-max", dest="t_max", type=float, help="end of the time axis")
    g.add_argument("--x-max", dest="x_max", type=float, help="end of the x axis (density-1d, flux-1d)")
    g.add_argument("--times", help="comma-separated snapshot times (phase-snapshots)")
    g.add_argument("--stationary", action="store_true", default=None, help="snapshot the stationary lift instead")
    g.add_argument("--out", help="output file (directory for theta-maps); stdout if omitted")
    g.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    g.add_argument("--trunc-tol", dest="trunc_tol", type=float, help="relative cut-off for series terms")
    g.add_argument(
        "--flux-cosine",
        dest="flux_cosine",
        choices=("multiple", "scaled"),
        help="flux series cosine form; 'scaled' is a deliberately wrong control",
    )
    parser = argparse.ArgumentParser(
        prog="vlasov-char",
        description="Exact Vlasov-chain solutions in an infinite well: figure data and verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in _COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    fn = _COMMANDS[args.command][0]
    try:
        cfg = build_config(args.command, args)
        return fn(cfg)
    except ConfigError as exc:
        print(f"vlasov-char: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # Downstream reader closed early (e.g. ``| head``); silence the
        # flush at interpreter exit.
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
