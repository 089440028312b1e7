"""Command-line front end.

    python -m beeident exponents-naive   --zchannel 0.9 --L 3 --rate-grid 0:0.22:0.01
    python -m beeident exponents-optimal --bsc 0.01 --rate-grid 0:0.5:0.01
    python -m beeident simulate          --bsc 0.2 --decoder naive --n 6 --M 4 --trials 100000
    python -m beeident constants         --bsc 0.01
    python -m beeident replay            previous_output.json

Every output embeds the run configuration that produced it; ``replay``
re-executes it.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import naive, optimal
from .info import ChannelFileError, bsc, channel_from_dict, is_symmetric, load_channel, z_channel
from .simulator import InstanceTooLarge, SimulationConfig, estimate_error, exact_error_naive, sample_codebook, Codebook
from .table import CurveTable

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3
CONFIG_SCHEMA = "beeident.runconfig/1"
LN2 = math.log(2.0)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    channel: dict
    channel_file: str | None = None
    params: dict = field(default_factory=dict)
    format: str = "json"
    seed: int | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = CONFIG_SCHEMA
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        obj = dict(obj)
        obj.pop("schema", None)
        return cls(**obj)


# ---------------------------------------------------------------------------
# argument handling


def parse_rate_grid(text: str | None) -> list[float]:
    """``start:stop:step`` with ``stop`` included when it lies on the grid; empty string means no rates."""
    if text is None or text.strip() == "":
        return []
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad --rate-grid {text!r}: expected start:stop:step") from exc
    if step <= 0 or stop < start:
        raise ConfigError(f"bad --rate-grid {text!r}: need step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def _channel_from_args(args) -> tuple[dict, str | None]:
    chosen = [a for a in ("channel", "bsc", "zchannel") if getattr(args, a, None) is not None]
    if len(chosen) != 1:
        raise ConfigError("exactly one of --channel, --bsc, --zchannel is required")
    if args.channel is not None:
        W = load_channel(args.channel)
        src = args.channel
    elif args.bsc is not None:
        W, src = bsc(args.bsc), None
    else:
        W, src = z_channel(args.zchannel), None
    m = np.asarray(W)
    return {"alphabet_in": m.shape[0], "alphabet_out": m.shape[1], "rows": m.tolist()}, src


def _q_x(params, nx):
    q = params.get("q_x")
    return [1.0 / nx] * nx if q is None else [float(v) for v in q]


def _add_channel(p):
    g = p.add_argument_group("channel")
    g.add_argument("--channel", metavar="FILE", help="JSON channel specification")
    g.add_argument("--bsc", type=float, metavar="P", help="binary symmetric channel with crossover P")
    g.add_argument("--zchannel", type=float, metavar="W00", help="z-channel with W(0|0)=W00")
    g.add_argument("--q-x", type=float, nargs="+", help="input distribution (default uniform)")


def _add_output(p, default_units):
    p.add_argument("--units", choices=("nats", "bits"), default=default_units)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--out", metavar="FILE")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="beeident", description="Bee-identification exponents and simulation.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponents-naive", help="naive-decoding exponent curves")
    _add_channel(p)
    p.add_argument("--rate-grid", default="0:0.2:0.02", help="start:stop:step, in --units")
    p.add_argument("--L", type=int, default=1)
    p.add_argument("--metric", choices=("ml", "mmi"), default="ml")
    p.add_argument("--metric-scale", type=float, default=1.0, help="multiply the decoding metric")
    p.add_argument("--outer-resolution", type=float)
    p.add_argument("--inner-resolution", type=float)
    p.add_argument("--qy-cache-resolution", type=float)
    p.add_argument("--refinement-rounds", type=int)
    _add_output(p, "nats")

    p = sub.add_parser("exponents-optimal", help="joint-decoding exponent curves")
    _add_channel(p)
    p.add_argument("--rate-grid", default="0:0.5:0.01", help="start:stop:step, in --units")
    p.add_argument("--sigma-max", type=float, default=1e4)
    p.add_argument("--sigma-grid-points", type=int, default=200)
    _add_output(p, "bits")

    p = sub.add_parser("simulate", help="Monte Carlo failure probability")
    _add_channel(p)
    p.add_argument("--decoder", choices=("naive", "joint"), default="naive")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--L", type=int, default=1)
    p.add_argument("--metric", choices=("ml", "mmi"), default="ml")
    p.add_argument("--metric-scale", type=float, default=1.0, help="multiply the decoding metric")
    p.add_argument("--gld-mode", choices=("stochastic", "map"), default="stochastic")
    p.add_argument("--codebook-kind", choices=("constant_composition", "iid"), default="constant_composition")
    p.add_argument("--fresh-codebook", action="store_true", help="new codebook every trial")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--exact", action="store_true", help="also compute the exact naive failure probability")
    p.add_argument("--trial-log", metavar="FILE", help="JSON-lines record per trial")
    p.add_argument("--format", choices=("json",), default="json")
    p.add_argument("--out", metavar="FILE")

    p = sub.add_parser("constants", help="thresholds and crossover constants")
    _add_channel(p)
    _add_output(p, "bits")

    p = sub.add_parser("replay", help="re-run the configuration embedded in an output file")
    p.add_argument("file")
    p.add_argument("--out", metavar="FILE")
    return ap


def config_from_args(args) -> RunConfig:
    channel, src = _channel_from_args(args)
    skip = {"command", "channel", "bsc", "zchannel", "format", "out", "verbose", "seed", "q_x"}
    params = {k.replace("-", "_"): v for k, v in vars(args).items() if k not in skip}
    params["q_x"] = args.q_x
    if args.bsc is not None:
        params["bsc"] = args.bsc
    return RunConfig(command=args.command, channel=channel, channel_file=src, params=params,
                     format=args.format, seed=getattr(args, "seed", None))


# ---------------------------------------------------------------------------
# commands


def _settings(params, nx, ny):
    base = naive.SolverSettings.for_alphabets(nx, ny)
    over = {k: params[k] for k in ("outer_resolution", "inner_resolution",
                                     "qy_cache_resolution", "refinement_rounds")
            if params.get(k) is not None}
    try:
        return naive.SolverSettings(**{**asdict(base), **over})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_exponents_naive(cfg: RunConfig) -> CurveTable:
    W = np.asarray(channel_from_dict(cfg.channel))
    p = cfg.params
    units = p["units"]
    scale = LN2 if units == "bits" else 1.0
    rates = parse_rate_grid(p["rate_grid"])
    scale_g = p.get("metric_scale", 1.0)
    if not scale_g > 0:
        raise ConfigError("--metric-scale must be positive")
    metric = naive.DecodingMetric.ml(W, scale_g) if p["metric"] == "ml" else naive.DecodingMetric.mmi(scale_g)
    if p["L"] < 1:
        raise ConfigError("--L must be a positive integer")
    q = naive.NaiveExponentQuery(rate=0.0, L=p["L"], q_x=_q_x(p, W.shape[0]), metric=metric,
                                 channel=W, solver=_settings(p, *W.shape))
    table = naive.curve(q, [r * scale for r in rates])
    table = CurveTable(rates=rates, columns={k: [v / scale for v in col] for k, col in table.columns.items()},
                       units=units, provenance=cfg.to_dict())
    return table


def cmd_exponents_optimal(cfg: RunConfig) -> CurveTable:
    W = np.asarray(channel_from_dict(cfg.channel))
    p = cfg.params
    units = p["units"]
    if not is_symmetric(W, tol=1e-9):
        raise ConfigError("channel fails the symmetry check: rows (or columns) are not permutations of one another")
    scale = LN2 if units == "bits" else 1.0
    rates = parse_rate_grid(p["rate_grid"])
    base = optimal.OptExponentQuery(rate=0.0, p_x=tuple(_q_x(p, W.shape[0])), channel=W,
                                    sigma_max=p["sigma_max"], sigma_grid_points=p["sigma_grid_points"])
    cols = {"opt_rc": [], "opt_ex": []}
    is_bsc = W.shape == (2, 2)
    if is_bsc:
        cols["tan"], cols["tan_in_range"] = [], []
        cross = float(min(W[0, 1], W[0, 0]))
    for r in rates:
        q = base.with_rate(r * scale)
        cols["opt_rc"].append(optimal.exponent_opt_rc(q) / scale)
        cols["opt_ex"].append(optimal.exponent_opt_ex(q) / scale)
        if is_bsc:
            if 0 < cross < 0.5:
                v, ok = optimal.exponent_tan(r * scale / LN2, cross)
                cols["tan"].append(v * LN2 / scale)
                cols["tan_in_range"].append(1.0 if ok else 0.0)
            else:
                cols["tan"].append(math.nan if cross == 0.5 else math.inf)
                cols["tan_in_range"].append(0.0)
    return CurveTable(rates=rates, columns=cols, units=units, provenance=cfg.to_dict())


def cmd_simulate(cfg: RunConfig) -> dict:
    W = np.asarray(channel_from_dict(cfg.channel))
    p = cfg.params
    q_x = _q_x(p, W.shape[0])
    if p["n"] < 1 or p["M"] < 1 or p["trials"] < 1:
        raise ConfigError("--n, --M and --trials must be positive")
    sim = SimulationConfig(decoder=p["decoder"], n=p["n"], M=p["M"], channel=W, q_x=q_x, L=p["L"],
                           metric=p["metric"], metric_scale=p.get("metric_scale", 1.0),
                           gld_mode=p["gld_mode"], codebook_kind=p["codebook_kind"],
                           fresh_codebook=p["fresh_codebook"])
    if not sim.metric_scale > 0:
        raise ConfigError("--metric-scale must be positive")
    exact = None
    if p.get("exact"):
        if p["decoder"] != "naive" or p["fresh_codebook"]:
            raise ConfigError("--exact needs the naive decoder with a fixed codebook")
        book_seed = int(np.random.SeedSequence(int(cfg.seed), spawn_key=(2**32 - 1,)).generate_state(1)[0])
        book = sample_codebook(sim.n, sim.M, q_x, book_seed, sim.codebook_kind)
        exact = exact_error_naive(book, W, sim.decoding_metric(), sim.L)  # raises InstanceTooLarge
    report = estimate_error(sim, p["trials"], cfg.seed, workers=p["workers"], log_path=p.get("trial_log"))
    out = {"schema": "beeident.estimate/1", "report": report.to_dict(), "run_config": cfg.to_dict()}
    if exact is not None:
        out["exact_failure_probability"] = exact
    return out


def cmd_constants(cfg: RunConfig) -> dict:
    W = np.asarray(channel_from_dict(cfg.channel))
    p = cfg.params
    units = p["units"]
    conv = (1 / LN2) if units == "bits" else 1.0
    vals = {"p_star": optimal.bsc_critical_p(1e-10)}
    if W.shape == (2, 2) and is_symmetric(W):
        cross = float(min(W[0, 1], W[0, 0]))
        if 0 < cross < 0.5:
            vals["rate_break"] = optimal.bsc_rate_break(cross) * conv
            vals["r_trc"] = optimal.r_trc(cross) * LN2 * conv
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        vals["rmax_lower_bound"] = naive.rmax_lower_bound(_q_x(p, W.shape[0]), W) * conv
    return {"schema": "beeident.constants/1", "units": units, "values": vals, "run_config": cfg.to_dict()}


COMMANDS = {
    "exponents-naive": cmd_exponents_naive,
    "exponents-optimal": cmd_exponents_optimal,
    "simulate": cmd_simulate,
    "constants": cmd_constants,
}


def render(cfg: RunConfig, result) -> str:
    if isinstance(result, CurveTable):
        return result.to_csv() if cfg.format == "csv" else result.to_json()
    if cfg.format == "csv":
        lines = [f"# schema={result['schema']} units={result.get('units', '')}",
                 "# config=" + json.dumps(cfg.to_dict(), sort_keys=True), "name,value"]
        lines += [f"{k},{v!r}" for k, v in result["values"].items()]
        return "\n".join(lines) + "\n"
    return json.dumps(result, indent=2, sort_keys=True) + "\n"


def execute(cfg: RunConfig) -> str:
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}")
    return render(cfg, COMMANDS[cfg.command](cfg))


def _embedded_config(path) -> RunConfig:
    with open(path) as fh:
        text = fh.read()
    if text.startswith("# schema="):
        line = next(ln for ln in text.splitlines() if ln.startswith("# config="))
        obj = json.loads(line[len("# config="):])
    else:
        doc = json.loads(text)
        obj = doc.get("run_config") or doc.get("provenance") or doc
    if obj.get("schema") != CONFIG_SCHEMA:
        raise ConfigError(f"{path} does not embed a run configuration")
    return RunConfig.from_dict(obj)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _embedded_config(args.file) if args.command == "replay" else config_from_args(args)
        text = execute(cfg)
    except (ConfigError, ChannelFileError, optimal.HypothesisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstanceTooLarge as exc:
        print(f"error: instance too large: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK
