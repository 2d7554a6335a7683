"""Command-line front end.

Subcommands: simulate, stats, keyrate, optimize, sweep, daily.
Exit codes: 0 success, 2 configuration/validation error, 3 numerical failure,
4 I/O error.  Outputs are byte-identical across reruns and worker counts.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .beam import BeamScenario, simulate
from .channel import fading_stats, read_eta_csv
from .errors import ConfigError, CvfadeError, DegenerateInput, DomainError, InternalError, NonPhysicalState, NumericalFailure
from .keyrate import FiniteSizeParams, key_rate
from .optimizer import optimize
from .outputs import render_csv, write_json, write_text
from .scenario import (
    ScenarioConfig,
    build_channel,
    load_scenario,
    read_cn2_csv,
    resolve_fading,
    sweep_values,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

ROW_FIELDS = [
    "label", "sweep_variable", "sweep_value",
    "v_s", "v_m", "v_an", "b", "beta", "reconciliation",
    "mean_eta", "mean_sqrt_eta", "var_sqrt", "eta_comb", "eps_plus", "n_block",
    "i_ab", "chi", "rate_asymptotic", "rate_finite", "flags",
]


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cvfade", description=__doc__)
    p.add_argument("--version", action="version", version=f"cvfade {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="Monte Carlo transmittance samples -> eta CSV + JSON sidecar")
    sp.add_argument("--config", required=True, help="scenario file (channel.fading.beam section)")
    sp.add_argument("--out", required=True, help="output CSV path (sidecar: same path + .json)")
    sp.add_argument("--n", type=int, default=None, help="sample count override")
    sp.add_argument("--seed", type=int, default=None, help="seed override")
    sp.add_argument("--jobs", type=int, default=1, help="worker threads")

    st = sub.add_parser("stats", help="fading moments of an eta sample CSV -> JSON")
    st.add_argument("samples", help="CSV with single `eta` column")
    st.add_argument("--out", default=None, help="write JSON here instead of stdout")

    for name, description in (
        ("keyrate", "key rates at the configured protocol parameters"),
        ("optimize", "key rates optimized over squeezing and modulation"),
        ("sweep", "key-rate table over the configured sweep"),
    ):
        kp = sub.add_parser(name, help=description)
        kp.add_argument("--config", required=True)
        kp.add_argument("--out", required=True, help="output CSV path")
        kp.add_argument("--n", type=int, default=None, help="Monte Carlo sample override")
        kp.add_argument("--seed", type=int, default=None, help="seed override")
        kp.add_argument("--jobs", type=int, default=1, help="worker threads")
        kp.add_argument("--trace", action="store_true", help="write optimizer trace JSON next to the CSV")

    dp = sub.add_parser("daily", help="hourly key rates from a Cn^2 time series")
    dp.add_argument("cn2", help="CSV with `<label>,cn2` columns")
    dp.add_argument("--config", required=True)
    dp.add_argument("--out", required=True)
    dp.add_argument("--n", type=int, default=None, help="Monte Carlo samples per hour")
    dp.add_argument("--seed", type=int, default=None)
    dp.add_argument("--jobs", type=int, default=1)
    return p


def _config_path(arg: str) -> str:
    """Resolve --config, falling back to $CVFADE_CONFIG_DIR for bare names."""
    if Path(arg).exists():
        return arg
    base = os.environ.get("CVFADE_CONFIG_DIR")
    if base and (Path(base) / arg).exists():
        return str(Path(base) / arg)
    return arg  # let load_scenario report the miss


def _load(args) -> "ScenarioConfig":
    return load_scenario(_config_path(args.config))


def _effective_seed(config: ScenarioConfig, args) -> int:
    return args.seed if getattr(args, "seed", None) is not None else config.seed


def _meta(config: ScenarioConfig, seed: int, extra: dict | None = None) -> dict:
    meta = {
        "config_sha256": config.config_hash(),
        "seed": seed,
        "generator": "philox",
        "package": f"cvfade {__version__}",
    }
    if extra:
        meta.update(extra)
    return meta


def _variant_rows(config: ScenarioConfig, chan, sweep_variable="",
                  sweep_value="", finite=None, trace_sink=None):
    """One output row per protocol variant on a fixed channel."""
    finite = finite if finite is not None else config.finite
    rows = []
    for variant in config.variants:
        params = variant.params
        if variant.optimizer is not None:
            opt = optimize(variant.optimizer, params, chan, finite,
                           collect_trace=trace_sink is not None)
            res, v_s, v_m = opt.result, opt.v_s, opt.v_m
            flags = list(res.diagnostics["flags"])
            if opt.no_positive_rate:
                flags.append("no_positive_rate")
            if trace_sink is not None:
                trace_sink.append({
                    "label": variant.label,
                    "sweep_value": sweep_value,
                    "evaluations": opt.evaluations,
                    "trace": opt.trace,
                })
        else:
            res = key_rate(params, chan, finite)
            v_s, v_m = params.v_s, params.v_m
            flags = list(res.diagnostics["flags"])
        st = chan.fading
        rows.append([
            variant.label, sweep_variable, sweep_value,
            v_s, v_m, params.v_an, params.b, params.beta, params.reconciliation,
            st.mean_eta, st.mean_sqrt_eta, st.var_sqrt, chan.eta_comb, chan.eps_plus,
            res.n_block, res.i_ab, res.chi, res.rate_asymptotic, res.rate_finite,
            ";".join(flags),
        ])
    return rows


def cmd_simulate(args) -> int:
    config = _load(args)
    if "beam" not in config.channel_doc["fading"]:
        raise ConfigError("simulate requires channel.fading.beam in the scenario")
    seed = _effective_seed(config, args)
    b = dict(config.channel_doc["fading"]["beam"])
    n = args.n if args.n is not None else b.pop("n_samples", 100000)
    b.pop("n_samples", None)
    if "distance" not in b:
        raise ConfigError("simulate requires channel.fading.beam.distance")
    scen = BeamScenario(**b)
    result = simulate(scen, n=int(n), seed=seed, jobs=args.jobs)

    meta = _meta(config, seed, {"n": int(n)})
    text = render_csv(meta, ["eta"], ([v] for v in result.samples))
    write_text(args.out, text)
    sidecar = dict(result.metadata)
    sidecar["config_sha256"] = config.config_hash()
    write_json(str(args.out) + ".json", sidecar)
    print(f"wrote {args.out} ({n} samples) and {args.out}.json", file=sys.stderr)
    return EXIT_OK


def cmd_stats(args) -> int:
    samples = read_eta_csv(args.samples)
    st = fading_stats(samples)
    doc = {
        "mean_eta": st.mean_eta,
        "mean_sqrt_eta": st.mean_sqrt_eta,
        "var_sqrt": st.var_sqrt,
        "n_samples": int(samples.size),
    }
    if args.out:
        write_json(args.out, doc)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        json.dump(doc, sys.stdout, indent=2, sort_keys=True)
        print()
    return EXIT_OK


def _write_rate_table(args, config, rows, extra_meta=None, traces=None):
    seed = _effective_seed(config, args)
    meta = _meta(config, seed, extra_meta)
    write_text(args.out, render_csv(meta, ROW_FIELDS, rows))
    if traces is not None and getattr(args, "trace", False):
        write_json(str(args.out) + ".trace.json", {"traces": traces})
    print(f"wrote {args.out} ({len(rows)} rows)", file=sys.stderr)
    return EXIT_OK


def cmd_keyrate(args, optimizing=False) -> int:
    config = _load(args)
    if not optimizing:
        config = ScenarioConfig(
            raw=config.raw,
            seed=config.seed,
            variants=tuple(replace(v, optimizer=None) for v in config.variants),
            channel_doc=config.channel_doc,
            finite=config.finite,
            sweep=config.sweep,
            daily=config.daily,
        )
    seed = _effective_seed(config, args)
    stats, sim_meta = resolve_fading(config, seed, n_override=args.n, jobs=args.jobs)
    chan = build_channel(config, stats)
    traces = [] if getattr(args, "trace", False) else None
    rows = _variant_rows(config, chan, trace_sink=traces)
    extra = {"fading_simulation": sim_meta["coefficient_table_version"]} if sim_meta else None
    return _write_rate_table(args, config, rows, extra_meta=extra, traces=traces)


def cmd_optimize(args) -> int:
    return cmd_keyrate(args, optimizing=True)


def _sweep_point(config, seed, variable, value, args):
    """Channel + finite-size parameters for one sweep point."""
    finite = config.finite
    distance = None
    stats_doc_override = None
    if variable == "distance":
        if "beam" not in config.channel_doc["fading"]:
            raise ConfigError("sweep over distance requires channel.fading.beam")
        distance = value
    if variable == "block_size":
        base = finite if finite is not None else FiniteSizeParams(n=value)
        finite = FiniteSizeParams(n=value, eps_bar=base.eps_bar, key_fraction=base.key_fraction)
    if variable in ("mean_eta_db", "var_sqrt"):
        fading = config.channel_doc["fading"]
        if "stats" not in fading:
            raise ConfigError(f"sweep over {variable} requires channel.fading.stats")
        s = dict(fading["stats"])
        if variable == "mean_eta_db":
            s.pop("mean_eta", None)
            s["mean_eta_db"] = value
        else:
            s.pop("mean_sqrt_eta", None)
            s["var_sqrt"] = value
        stats_doc_override = s

    if stats_doc_override is not None:
        raw = json.loads(json.dumps(config.raw))
        raw["channel"]["fading"]["stats"] = stats_doc_override
        point_config = ScenarioConfig(
            raw=raw, seed=config.seed, variants=config.variants,
            channel_doc=raw["channel"], finite=finite, sweep=config.sweep,
            daily=config.daily,
        )
    else:
        point_config = config
    stats, _ = resolve_fading(point_config, seed, n_override=args.n,
                              jobs=1, distance_override=distance)
    chan = build_channel(point_config, stats)
    return point_config, chan, finite


def cmd_sweep(args) -> int:
    config = _load(args)
    if config.sweep is None:
        raise ConfigError("sweep command requires a sweep section")
    variable = config.sweep["variable"]
    values = sweep_values(config.sweep)
    seed = _effective_seed(config, args)

    if variable in ("v_s", "v_m"):
        stats, _ = resolve_fading(config, seed, n_override=args.n, jobs=args.jobs)
        chan = build_channel(config, stats)

        def sweep_variant(v, value):
            # sweeping a source parameter freezes it in any configured optimizer
            opt = v.optimizer
            if opt is not None:
                opt = replace(opt, optimize_vs=False) if variable == "v_s" else None
            return replace(v, params=replace(v.params, **{variable: value}), optimizer=opt)

        def run_point(value):
            pc = ScenarioConfig(
                raw=config.raw, seed=config.seed,
                variants=tuple(sweep_variant(v, value) for v in config.variants),
                channel_doc=config.channel_doc, finite=config.finite,
                sweep=config.sweep, daily=config.daily,
            )
            return _variant_rows(pc, chan, sweep_variable=variable, sweep_value=value)

    else:

        def run_point(value):
            pc, chan, finite = _sweep_point(config, seed, variable, value, args)
            return _variant_rows(pc, chan, sweep_variable=variable,
                                 sweep_value=value, finite=finite)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            chunks = list(pool.map(run_point, values))
    else:
        chunks = [run_point(v) for v in values]
    rows = [row for chunk in chunks for row in chunk]
    return _write_rate_table(args, config, rows, extra_meta={"sweep_variable": variable})


def cmd_daily(args) -> int:
    config = _load(args)
    series = read_cn2_csv(args.cn2)
    fading = config.channel_doc["fading"]
    if "beam" not in fading:
        raise ConfigError("daily requires channel.fading.beam geometry in the scenario")
    beam_doc = dict(fading["beam"])
    if "cn2" in beam_doc or "sigma_r2" in beam_doc:
        raise ConfigError(
            "daily drives turbulence from the cn2 series; remove cn2/sigma_r2 from the beam section"
        )
    seed = _effective_seed(config, args)
    n = args.n if args.n is not None else config.daily.get("n_samples", 20000)
    beam_doc.pop("n_samples", None)
    beam_doc.setdefault("distance", 2200.0)

    header = ["label", "cn2", "sigma_r2", "mean_eta", "mean_sqrt_eta", "var_sqrt"]
    for variant in config.variants:
        header += [
            f"{variant.label}_v_s", f"{variant.label}_v_m",
            f"{variant.label}_rate_asymptotic", f"{variant.label}_rate_finite",
        ]

    def run_hour(item):
        index, (label, cn2) = item
        scen = BeamScenario(cn2=cn2, **beam_doc)
        result = simulate(scen, n=int(n), seed=seed + index, jobs=1)
        stats = fading_stats(result.samples)
        chan = build_channel(config, stats)
        row = [label, cn2, scen.rytov_variance,
               stats.mean_eta, stats.mean_sqrt_eta, stats.var_sqrt]
        for variant in config.variants:
            if variant.optimizer is not None:
                opt = optimize(variant.optimizer, variant.params, chan, config.finite)
                res, v_s, v_m = opt.result, opt.v_s, opt.v_m
            else:
                res = key_rate(variant.params, chan, config.finite)
                v_s, v_m = variant.params.v_s, variant.params.v_m
            row += [v_s, v_m, res.rate_asymptotic, res.rate_finite]
        return row

    items = list(enumerate(zip(series.labels, series.cn2)))
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(run_hour, items))
    else:
        rows = [run_hour(it) for it in items]

    meta = _meta(config, seed, {"n_per_hour": int(n), "cn2_rows": len(items)})
    write_text(args.out, render_csv(meta, header, rows))
    print(f"wrote {args.out} ({len(rows)} rows)", file=sys.stderr)
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "stats": cmd_stats,
    "keyrate": cmd_keyrate,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "daily": cmd_daily,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, NonPhysicalState, DegenerateInput, InternalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CvfadeError as exc:  # pragma: no cover - catch-all for package errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
