"""Command-line front end.

Subcommands mirror the library: equilibria, hopf, simulate, embed,
returnmap, sensitivity, sweep.  Parameters come either as the scaled
triple (--s/--Y/--tau) or as raw constants (--raw r,K,m,s,Y,tau), never
both; raw input is scaled first, so both forms drive identical numerics.

Options may also be supplied through --config FILE holding flat
`key = value` lines (# comments allowed); explicit flags win over the
file.  Data outputs are CSV with the resolved configuration echoed in a
leading comment line, so every file names the run that produced it.

Exit codes: 0 success, 2 invalid configuration, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from .analysis import (
    delay_embed,
    divergence,
    estimate_period,
    extrema,
    filter_kinks,
    return_map,
    write_divergence_csv,
    write_embedding_csv,
    write_extrema_csv,
    write_return_map_csv,
)
from .errors import DomainError, GauselabError, InvalidParams
from .integrator import HistorySpec, convergence_check, integrate, write_trajectory_csv
from .model import (
    Params,
    RawParams,
    equilibria,
    predator_ceiling,
    reproduction_number,
    scale,
)
from .spectral import hopf_candidates, stability_profile, write_crossing_curves_csv
from .sweep import (
    SweepPlan,
    detect_bistability,
    detect_period_doublings,
    run_sweep,
    write_bistability_csv,
    write_doublings_csv,
    write_orbit_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(InvalidParams):
    """Bad command-line or config-file input."""


# ----------------------------------------------------------------------
# config plumbing


def _parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, val = line.split("=", 1)
                values[key.strip()] = val.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


class Resolver:
    """Layered option lookup: explicit flag, then config file, then default.
    Tracks which keys were consumed so unknown config keys are rejected."""

    def __init__(self, args: argparse.Namespace, file_values: dict[str, str]):
        self.args = args
        self.file_values = file_values
        self.used: set[str] = set()
        self.echo: dict[str, str] = {}

    def get(self, key: str, typ, default=None):
        dest = key.replace("-", "_")
        val = getattr(self.args, dest, None)
        if val is None and key in self.file_values:
            raw = self.file_values[key]
            try:
                val = _convert(raw, typ)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"config key {key!r}: {exc}") from exc
        self.used.add(key)
        if val is None:
            val = default
        if val is not None:
            self.echo[key] = _echo_str(val)
        return val

    def finish(self) -> None:
        unknown = set(self.file_values) - self.used
        if unknown:
            raise ConfigError(
                "unknown config keys: " + ", ".join(sorted(unknown))
            )

    def comment(self, command: str) -> str:
        parts = [f"{k}={v}" for k, v in sorted(self.echo.items())]
        return f"gauselab {command} " + " ".join(parts)


def _convert(raw: str, typ):
    if typ is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return typ(raw)


def _echo_str(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, tuple):
        return ",".join(str(v) for v in val)
    return str(val)


def _pair(raw: str) -> tuple[float, float]:
    parts = raw.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {raw!r}")
    return float(parts[0]), float(parts[1])


def _six(raw: str) -> tuple[float, ...]:
    parts = raw.split(",")
    if len(parts) != 6:
        raise argparse.ArgumentTypeError(
            f"expected r,K,m,s,Y,tau (six numbers), got {raw!r}"
        )
    return tuple(float(v) for v in parts)


def _resolve_params(cfg: Resolver) -> Params:
    raw = cfg.get("raw", _six)
    s = cfg.get("s", float)
    bigy = cfg.get("Y", float)
    tau = cfg.get("tau", float)
    if raw is not None:
        if s is not None or bigy is not None or tau is not None:
            raise ConfigError("give either --raw or the scaled --s/--Y/--tau, not both")
        p, _ = scale(RawParams(*raw))
        return p
    if s is None or bigy is None or tau is None:
        raise ConfigError("missing parameters: need --s, --Y and --tau (or --raw)")
    return Params(s=s, Y=bigy, tau=tau)


def _resolve_history(cfg: Resolver) -> HistorySpec:
    hist = cfg.get("hist", _pair, default=(0.1, 0.1))
    at0 = cfg.get("at0", _pair)
    if at0 is None:
        return HistorySpec(hist[0], hist[1])
    return HistorySpec(hist[0], hist[1], x0=at0[0], y0=at0[1])


# ----------------------------------------------------------------------
# subcommands


def _cmd_equilibria(cfg: Resolver, out) -> int:
    p = _resolve_params(cfg)
    fmt = cfg.get("format", str, default="text")
    eq = equilibria(p)
    cfg.finish()
    payload = {
        "e0": list(eq.e0),
        "e1": list(eq.e1),
        "e_plus": None if eq.e_plus is None else list(eq.e_plus),
        "tau_c": eq.tau_c,
        "tau_star": eq.tau_star,
        "reproduction_at_capacity": reproduction_number(p, 1.0),
        "predator_ceiling": predator_ceiling(p),
    }
    if fmt == "json":
        print(json.dumps(payload, sort_keys=True), file=out)
    elif fmt == "text":
        print(f"e0        = (0, 0)", file=out)
        print(f"e1        = (1, 0)", file=out)
        if eq.e_plus is None:
            print("e_plus    = absent (tau >= tau_c)", file=out)
        else:
            print(f"e_plus    = ({eq.e_plus[0]:.12g}, {eq.e_plus[1]:.12g})", file=out)
        print(f"tau_c     = {eq.tau_c:.12g}", file=out)
        star_note = "" if eq.tau_star > 0.0 else " (no oscillatory instability possible)"
        print(f"tau_star  = {eq.tau_star:.12g}{star_note}", file=out)
        print(f"R(1)      = {payload['reproduction_at_capacity']:.12g}", file=out)
        print(f"y ceiling = {payload['predator_ceiling']:.12g}", file=out)
    else:
        raise ConfigError(f"unknown format {fmt!r} (text or json)")
    return EXIT_OK


def _cmd_hopf(cfg: Resolver, out) -> int:
    p = _resolve_params(cfg)
    fmt = cfg.get("format", str, default="text")
    grid = cfg.get("grid-points", int, default=10000)
    curves = cfg.get("curves", str)
    profile = stability_profile(p, grid_points=grid)
    if curves:
        write_crossing_curves_csv(curves, p, comment=cfg.comment("hopf"))
    cfg.finish()
    if fmt == "json":
        payload = {
            "candidates": [
                {
                    "n": c.n, "j": c.j, "tau": c.tau, "omega": c.omega,
                    "crossing": c.crossing.value, "slope_gap": c.slope_gap,
                }
                for c in profile.candidates
            ],
            "intervals": [
                {"tau_lo": lo, "tau_hi": hi, "state": label.value}
                for lo, hi, label in profile.intervals
            ],
        }
        print(json.dumps(payload, sort_keys=True), file=out)
    elif fmt == "text":
        if not profile.candidates:
            print("no crossings: the coexistence state never destabilises", file=out)
        for c in profile.candidates:
            print(
                f"crossing n={c.n} j={c.j} tau={c.tau:.6f} omega={c.omega:.6f} "
                f"{c.crossing.value}",
                file=out,
            )
        for lo, hi, label in profile.intervals:
            print(f"[{lo:.6f}, {hi:.6f}) {label.value}", file=out)
    else:
        raise ConfigError(f"unknown format {fmt!r} (text or json)")
    return EXIT_OK


def _common_run(cfg: Resolver):
    p = _resolve_params(cfg)
    h = _resolve_history(cfg)
    t_end = cfg.get("t-end", float, default=30000.0)
    dt = cfg.get("dt", float, default=0.05)
    dec = cfg.get("decimate", int, default=1)
    return p, h, t_end, dt, dec


def _cmd_simulate(cfg: Resolver, out) -> int:
    p, h, t_end, dt, dec = _common_run(cfg)
    path = cfg.get("out", str)
    cfg.finish()
    tr = integrate(p, h, t_end, dt, dec)
    if path is None:
        raise ConfigError("simulate needs --out PATH for the trajectory CSV")
    write_trajectory_csv(path, tr, comment=cfg.comment("simulate"))
    print(f"wrote {tr.data.shape[0]} nodes to {path}", file=out)
    return EXIT_OK


def _cmd_embed(cfg: Resolver, out) -> int:
    p, h, t_end, dt, dec = _common_run(cfg)
    lag = cfg.get("lag", float, default=p.tau if p.tau > 0 else 1.0)
    t_cut = cfg.get("t-cut", float, default=0.5 * t_end)
    path = cfg.get("out", str)
    cfg.finish()
    if path is None:
        raise ConfigError("embed needs --out PATH for the embedding CSV")
    tr = integrate(p, h, t_end, dt, dec)
    emb = delay_embed(tr, lag, t_cut)
    write_embedding_csv(path, emb, comment=cfg.comment("embed"))
    print(f"wrote {emb.shape[0]} embedded points to {path}", file=out)
    return EXIT_OK


def _cmd_extrema(cfg: Resolver, out) -> int:
    p, h, t_end, dt, dec = _common_run(cfg)
    comp = cfg.get("component", str, default="y")
    t_cut = cfg.get("t-cut", float, default=0.5 * t_end)
    kappa = cfg.get("kappa", float, default=0.2)
    path = cfg.get("out", str)
    cfg.finish()
    if path is None:
        raise ConfigError("extrema needs --out PATH for the extrema CSV")
    tr = integrate(p, h, t_end, dt, dec)
    es = filter_kinks(extrema(tr, comp, t_cut), kappa)
    write_extrema_csv(path, es, comment=cfg.comment("extrema"))
    pe = estimate_period(tr, t_cut, kappa=kappa, es=es)
    if pe is None:
        print("no recurrence found", file=out)
    else:
        print(f"period={pe.period:.6g} loops={pe.loops}", file=out)
    return EXIT_OK


def _cmd_returnmap(cfg: Resolver, out) -> int:
    p, h, t_end, dt, dec = _common_run(cfg)
    t_cut = cfg.get("t-cut", float, default=0.5 * t_end)
    kappa = cfg.get("kappa", float, default=0.2)
    threshold = cfg.get("threshold", float, default=0.7)
    path = cfg.get("out", str)
    cfg.finish()
    if path is None:
        raise ConfigError("returnmap needs --out PATH for the pairs CSV")
    tr = integrate(p, h, t_end, dt, dec)
    es = filter_kinks(extrema(tr, "y", t_cut), kappa)
    rm = return_map(es, threshold)
    write_return_map_csv(path, rm, comment=cfg.comment("returnmap"))
    print(f"wrote {rm.pairs.shape[0]} pairs to {path}", file=out)
    return EXIT_OK


def _cmd_sensitivity(cfg: Resolver, out) -> int:
    p = _resolve_params(cfg)
    h = _resolve_history(cfg)
    t_end = cfg.get("t-end", float, default=20000.0)
    dt = cfg.get("dt", float, default=0.05)
    dec = cfg.get("decimate", int, default=10)
    delta = cfg.get("delta", float, default=0.01)
    path = cfg.get("out", str)
    cfg.finish()
    dv = divergence(p, h, delta=delta, t_end=t_end, dt_target=dt, decimation=dec)
    if path is not None:
        write_divergence_csv(path, dv, comment=cfg.comment("sensitivity"))
    print(f"slope={dv.slope:.6g}", file=out)
    return EXIT_OK


def _cmd_order(cfg: Resolver, out) -> int:
    p = _resolve_params(cfg)
    h = _resolve_history(cfg)
    t_end = cfg.get("t-end", float, default=600.0)
    dt = cfg.get("dt", float, default=1.0)
    window = cfg.get("window", _pair)
    cfg.finish()
    order = convergence_check(p, h, t_end, dt, window=window)
    print(f"observed_order={order:.3f}", file=out)
    return EXIT_OK


def _cmd_sweep(cfg: Resolver, out) -> int:
    p = _resolve_params(cfg)
    if p.tau != 0.0:
        raise ConfigError("sweep takes --tau 0 (the grid supplies the delay)")
    rng = cfg.get("range", _pair)
    steps = cfg.get("steps", int)
    if rng is None or steps is None:
        raise ConfigError("sweep needs --range a,b and --steps N")
    direction = cfg.get("direction", str, default="forward")
    continuation = cfg.get("continuation", str, default="cold")
    t_transient = cfg.get("t-transient", float, default=30000.0)
    t_record = cfg.get("t-record", float, default=10000.0)
    dt = cfg.get("dt", float, default=0.05)
    dec = cfg.get("decimate", int, default=10)
    kappa = cfg.get("kappa", float, default=0.2)
    hist = _resolve_history(cfg)
    jobs = cfg.get("jobs", int, default=1)
    path = cfg.get("out", str)
    bi_path = cfg.get("bistability", str)
    dbl_path = cfg.get("doublings", str)
    refine = cfg.get("refine-steps", int, default=0)
    cfg.finish()
    if path is None:
        raise ConfigError("sweep needs --out PATH for the orbit-diagram CSV")
    if bi_path is not None and (direction != "both" or continuation != "warm"):
        raise ConfigError(
            "--bistability needs --direction both and --continuation warm"
        )
    plan = SweepPlan(
        tau_min=rng[0], tau_max=rng[1], steps=steps,
        direction=direction, continuation=continuation,
        t_transient=t_transient, t_record=t_record,
        dt_target=dt, decimation=dec, kappa=kappa, history=hist,
    )
    rows = run_sweep(p, plan, jobs=jobs)
    write_orbit_csv(path, rows, comment=cfg.comment("sweep"))
    print(f"wrote {len(rows)} rows to {path}", file=out)
    if bi_path is not None:
        fwd = [r for r in rows if r.direction == "forward"]
        bwd = [r for r in rows if r.direction == "backward"]
        windows = detect_bistability(fwd, bwd, p=p, plan=plan, refine_steps=refine)
        write_bistability_csv(bi_path, windows, comment=cfg.comment("sweep"))
        print(f"wrote {len(windows)} bistability windows to {bi_path}", file=out)
    if dbl_path is not None:
        fwd = [r for r in rows if r.direction == rows[0].direction]
        events = detect_period_doublings(fwd, p=p, plan=plan, refine_steps=refine)
        write_doublings_csv(dbl_path, events, comment=cfg.comment("sweep"))
        print(f"wrote {len(events)} doubling events to {dbl_path}", file=out)
    return EXIT_OK


_COMMANDS = {
    "equilibria": _cmd_equilibria,
    "hopf": _cmd_hopf,
    "simulate": _cmd_simulate,
    "embed": _cmd_embed,
    "extrema": _cmd_extrema,
    "returnmap": _cmd_returnmap,
    "sensitivity": _cmd_sensitivity,
    "order": _cmd_order,
    "sweep": _cmd_sweep,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gauselab",
        description="Delayed predator-prey laboratory: stability analysis, "
        "integration, and attractor diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_: str, *opts: tuple) -> None:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", default=None, help="key = value option file")
        sp.add_argument("--s", dest="s", type=float, default=None, help="scaled death rate")
        sp.add_argument("--Y", dest="Y", type=float, default=None, help="scaled yield")
        sp.add_argument("--tau", dest="tau", type=float, default=None, help="scaled delay")
        sp.add_argument(
            "--raw", dest="raw", type=_six, default=None,
            metavar="r,K,m,s,Y,tau", help="raw constants (scaled internally)",
        )
        for flag, kw in opts:
            sp.add_argument(flag, **kw)

    f = float
    add("equilibria", "equilibria, thresholds, reproduction number",
        ("--format", dict(type=str, default=None, choices=("text", "json"))))
    add("hopf", "stability crossings and delay intervals",
        ("--format", dict(type=str, default=None, choices=("text", "json"))),
        ("--grid-points", dict(dest="grid_points", type=int, default=None)),
        ("--curves", dict(type=str, default=None, metavar="CSV",
                          help="write the intersection curves")))
    run_opts = [
        ("--hist", dict(type=_pair, default=None, metavar="X,Y",
                        help="constant history on [-tau, 0)")),
        ("--at0", dict(type=_pair, default=None, metavar="X0,Y0",
                       help="override state at t = 0")),
        ("--t-end", dict(dest="t_end", type=f, default=None)),
        ("--dt", dict(type=f, default=None)),
        ("--decimate", dict(type=int, default=None)),
        ("--out", dict(type=str, default=None, metavar="CSV")),
    ]
    add("simulate", "integrate and write t,x,y", *run_opts)
    add("embed", "delay embedding of the predator series", *run_opts,
        ("--lag", dict(type=f, default=None)),
        ("--t-cut", dict(dest="t_cut", type=f, default=None)))
    add("extrema", "filtered extrema of one component", *run_opts,
        ("--component", dict(type=str, default=None, choices=("x", "y"))),
        ("--t-cut", dict(dest="t_cut", type=f, default=None)),
        ("--kappa", dict(type=f, default=None)))
    add("returnmap", "successor map on deep predator minima", *run_opts,
        ("--t-cut", dict(dest="t_cut", type=f, default=None)),
        ("--kappa", dict(type=f, default=None)),
        ("--threshold", dict(type=f, default=None)))
    add("sensitivity", "twin-run divergence under a history perturbation",
        ("--hist", dict(type=_pair, default=None, metavar="X,Y")),
        ("--at0", dict(type=_pair, default=None, metavar="X0,Y0")),
        ("--t-end", dict(dest="t_end", type=f, default=None)),
        ("--dt", dict(type=f, default=None)),
        ("--decimate", dict(type=int, default=None)),
        ("--delta", dict(type=f, default=None)),
        ("--out", dict(type=str, default=None, metavar="CSV")))
    add("order", "observed convergence order (step-halving)",
        ("--hist", dict(type=_pair, default=None, metavar="X,Y")),
        ("--at0", dict(type=_pair, default=None, metavar="X0,Y0")),
        ("--t-end", dict(dest="t_end", type=f, default=None)),
        ("--dt", dict(type=f, default=None)),
        ("--window", dict(type=_pair, default=None, metavar="T0,T1")))
    add("sweep", "orbit diagram over a delay grid",
        ("--range", dict(dest="range", type=_pair, default=None, metavar="A,B")),
        ("--steps", dict(type=int, default=None)),
        ("--direction", dict(type=str, default=None,
                             choices=("forward", "backward", "both"))),
        ("--continuation", dict(type=str, default=None, choices=("cold", "warm"))),
        ("--hist", dict(type=_pair, default=None, metavar="X,Y")),
        ("--at0", dict(type=_pair, default=None, metavar="X0,Y0")),
        ("--t-transient", dict(dest="t_transient", type=f, default=None)),
        ("--t-record", dict(dest="t_record", type=f, default=None)),
        ("--dt", dict(type=f, default=None)),
        ("--decimate", dict(type=int, default=None)),
        ("--kappa", dict(type=f, default=None)),
        ("--jobs", dict(type=int, default=None)),
        ("--out", dict(type=str, default=None, metavar="CSV")),
        ("--bistability", dict(type=str, default=None, metavar="CSV")),
        ("--doublings", dict(type=str, default=None, metavar="CSV")),
        ("--refine-steps", dict(dest="refine_steps", type=int, default=None)))
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        file_values = _parse_config_file(args.config) if args.config else {}
        cfg = Resolver(args, file_values)
        return _COMMANDS[args.command](cfg, sys.stdout)
    except (ConfigError, InvalidParams, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GauselabError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
