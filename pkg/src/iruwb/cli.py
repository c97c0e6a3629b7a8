"""Command line entry point: ``iruwb <subcommand> [options]``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.special import erfc

from . import __version__
from .analysis import QuadratureError, SeriesError, interference_terms, mui_kernel
from .channel import (
    _mean_ray_gap,
    estimate_intra_cluster_decay,
    mean_cluster_interval,
    mean_ray_interval,
    sample_cluster_arrivals,
    sample_ray_arrivals,
)
from .config import PRESETS, ConfigError, RunConfig, from_dict, load_config, load_preset
from .montecarlo import dump_components, run_curve

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VALIDATION = 4
EXIT_IO = 5

RESULT_FIELDS = ["engine", "ebn0_db", "trials", "errors", "ber", "ci_low", "ci_high"]
BREAKDOWN_FIELDS = ["ebn0_db", "eb", "sigma_n2", "sigma_iasi2", "sigma_isi2", "sigma_mui2", "sinr_db", "ber"]


class ValidationFailure(RuntimeError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _engines(text: str) -> tuple:
    return tuple(e.strip() for e in text.split(",") if e.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="TOML run configuration")
    src.add_argument("--preset", choices=PRESETS, help="bundled configuration")
    src.add_argument("--manifest", metavar="PATH", help="rerun the first configuration recorded in a manifest")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--engines", type=_engines, help="comma list of simulation,analysis")
    for name in ("iasi", "isi", "mui"):
        common.add_argument(f"--toggle-{name}", type=_bool, metavar="BOOL")
    common.add_argument("--trials-cap", type=int, metavar="N")
    common.add_argument("--min-errors", type=int, metavar="N")
    common.add_argument("--workers", type=int, metavar="N")
    common.add_argument("--dump-components", type=int, metavar="N", default=0,
                        help="write the first N trials' decision components as JSON lines")
    common.add_argument("--dump-pulse", action="store_true", help="write p(t) and R(tau) grids as CSV")

    p = argparse.ArgumentParser(prog="iruwb", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    cs = sub.add_parser("channel-stats", parents=[common], help="empirical vs theoretical arrival statistics")
    cs.add_argument("--samples", type=int, default=100_000, help="gaps drawn per statistic")
    cs.add_argument("--channels", type=int, default=2000, help="realizations for the decay fit")
    sub.add_parser("ber-sim", parents=[common], help="Monte Carlo BER curve")
    sub.add_parser("ber-analytic", parents=[common], help="analytical BER curve")
    sub.add_parser("curve", parents=[common], help="both engines, CSV and plot script")
    val = sub.add_parser("validate", parents=[common], help="run the oracle suite")
    val.add_argument("--samples", type=int, default=10**7, help="Monte Carlo samples per quadrature check")
    return p


def resolve_config(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.manifest:
        try:
            first = Path(args.manifest).read_text().splitlines()[0]
            cfg = from_dict(json.loads(first)["config"])
        except (OSError, IndexError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read manifest {args.manifest}: {exc}") from exc
    else:
        cfg = load_preset(args.preset or "fig1_15mbps")

    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.out:
        kw["output"] = args.out
    if args.engines is not None:
        kw["engines"] = args.engines
    if args.workers is not None:
        kw["workers"] = args.workers
    toggles = dict(cfg.toggles)
    for name in ("iasi", "isi", "mui"):
        v = getattr(args, f"toggle_{name}")
        if v is not None:
            toggles[name] = v
    kw["toggles"] = toggles
    rule = cfg.stop_rule
    try:
        if args.trials_cap is not None:
            rule = replace(rule, max_trials=args.trials_cap, min_trials=min(rule.min_trials, args.trials_cap))
        if args.min_errors is not None:
            rule = replace(rule, min_errors=args.min_errors)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    kw["stop_rule"] = rule
    # round-trip through the loader so overrides get the same validation
    return from_dict({**cfg.to_dict(), **{k: v for k, v in _plain(kw).items()}})


def _plain(kw: dict) -> dict:
    out = dict(kw)
    if "engines" in out:
        out["engines"] = list(out["engines"])
    if "stop_rule" in out:
        r = out["stop_rule"]
        out["stop_rule"] = {"min_errors": r.min_errors, "max_trials": r.max_trials,
                            "min_trials": r.min_trials, "batch_size": r.batch_size}
    return out


def _write_csv(path: Path, fields, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})


def _breakdown_row(e, a) -> dict:
    return {
        "ebn0_db": float(e), "eb": a.E_b, "sigma_n2": a.sigma_n2, "sigma_iasi2": a.sigma_iasi2,
        "sigma_isi2": a.sigma_isi2, "sigma_mui2": a.sigma_mui2,
        "sinr_db": 10 * math.log10(a.sinr) if a.sinr > 0 else -math.inf, "ber": a.ber,
    }


PLOT_SCRIPT = '''"""Plot BER curves written by iruwb. Usage: python plot_curves.py [results.csv ...]"""
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt

paths = [Path(p) for p in sys.argv[1:]] or sorted(Path(__file__).parent.glob("*results.csv"))
fig, ax = plt.subplots(figsize=(6, 4.5))
for path in paths:
    rows = list(csv.DictReader(open(path)))
    for engine, style in (("simulation", "o"), ("analysis", "-")):
        sel = [r for r in rows if r["engine"] == engine and float(r["ber"]) > 0]
        if not sel:
            continue
        x = [float(r["ebn0_db"]) for r in sel]
        y = [float(r["ber"]) for r in sel]
        label = f"{path.stem.replace('_results', '')} {engine}"
        if engine == "simulation":
            lo = [yi - float(r["ci_low"]) for yi, r in zip(y, sel)]
            hi = [float(r["ci_high"]) - yi for yi, r in zip(y, sel)]
            ax.errorbar(x, y, yerr=[lo, hi], fmt=style, ms=4, capsize=2, label=label)
        else:
            ax.plot(x, y, style, label=label)
ax.set_yscale("log")
ax.set_xlabel("Eb/N0 (dB)")
ax.set_ylabel("BER")
ax.grid(True, which="both", alpha=0.3)
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(Path(__file__).with_name("ber_curves.png"), dpi=150)
'''


def run_engines(cfg: RunConfig, out: Path, command: str, dump: int = 0, dump_pulse: bool = False) -> list[dict]:
    """Execute every run of ``cfg`` and write CSVs plus the manifest. Returns manifest records."""
    out.mkdir(parents=True, exist_ok=True)
    records = []
    p, R_sim, R_an = cfg.build_pulse()
    if dump_pulse:
        p.to_csv(out / "pulse.csv")
        R_sim.to_csv(out / "autocorrelation.csv")
    kernel = None
    for run in cfg.runs():
        t0 = time.perf_counter()
        terms = None
        if "analysis" in run.engines:
            if kernel is None and run.system.N_u > 0:
                # the MUI kernel does not depend on the number of users
                kernel = mui_kernel(run.channel, run.system, R_an, run.quadrature)
            terms = interference_terms(run.channel, run.system, R_an, run.quadrature,
                                       run.analysis.omega_sigma_reading, mui_kernel_value=kernel)
        points, breakdown = run_curve(
            run.channel, run.system, R_sim, R_an, run.ebn0_grid, run.engines, run.stop_rule, run.seed,
            run.toggles, run.quadrature, run.analysis.omega_sigma_reading, run.workers, terms,
        )
        prefix = run.name
        files = [f"{prefix}_results.csv"]
        _write_csv(out / files[0], RESULT_FIELDS, [pt.row() for pt in points])
        if breakdown:
            files.append(f"{prefix}_breakdown.csv")
            _write_csv(out / files[1], BREAKDOWN_FIELDS,
                       [_breakdown_row(e, a) for e, a in zip(run.ebn0_grid, breakdown)])
        if dump:
            files.append(f"{prefix}_components.jsonl")
            dump_components(run.channel, run.system, R_sim, run.seed, dump, out / files[-1])
        capped = [pt.ebn0_dB for pt in points if pt.engine == "simulation" and pt.capped]
        records.append({
            "run": run.name, "command": command, "version": __version__, "seed": int(run.seed),
            "config": run.to_dict(), "pulse_shape_parameter_ns": p.shape_parameter,
            "outputs": files, "capped_points_db": capped,
            "elapsed_s": round(time.perf_counter() - t0, 3),
        })
    (out / "plot_curves.py").write_text(PLOT_SCRIPT)
    with open(out / "manifest.jsonl", "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    return records


def first_gaps(chan, which: str, n: int, rng) -> np.ndarray:
    """First ``n`` inter-arrival gaps of one long arrival sequence.

    Gaps taken from many short windows are biased low (long gaps tend to
    straddle the window edge), so the horizon is stretched until ``n`` fit.
    """
    if which == "cluster":
        horizon = 1.2 * (n + 10) / chan.Lambda
        while True:
            t = sample_cluster_arrivals(replace(chan, tau_max=horizon), rng)
            if len(t) > n:
                return np.diff(t)[:n]
            horizon *= 1.5
    horizon = 1.2 * (n + 10) * _mean_ray_gap(chan)
    while True:
        t = sample_ray_arrivals(chan, horizon, rng)
        if len(t) > n:
            return np.diff(t)[:n]
        horizon *= 1.5


def cmd_channel_stats(cfg: RunConfig, args) -> dict:
    chan = cfg.channel
    if chan.kind == "single_tap":
        raise ConfigError("channel-stats needs an ieee802154a channel")
    if args.samples < 2:
        raise ConfigError("--samples must be >= 2")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
    ray_single = float(np.mean(first_gaps(replace(chan, ray_model="single_poisson"), "ray", args.samples, rng)))
    ray_model = float(np.mean(first_gaps(chan, "ray", args.samples, rng)))
    cluster = float(np.mean(first_gaps(chan, "cluster", args.samples, rng)))
    decay = estimate_intra_cluster_decay(chan, args.channels, rng)
    return {
        "samples": args.samples,
        "mean_ray_interval_ns": {"empirical": ray_single, "theory": mean_ray_interval(chan), "model": "single_poisson"},
        "mean_ray_interval_configured_ns": {"empirical": ray_model, "model": chan.ray_model},
        "mean_cluster_interval_ns": {"empirical": cluster, "theory": mean_cluster_interval(chan)},
        "intra_cluster_decay_ns": {"fitted": decay, "theory": chan.gamma0, "channels": args.channels},
    }


def cmd_validate(cfg: RunConfig, args) -> dict:
    """Quadrature vs sampling, tap vs waveform correlator, AWGN closed form."""
    from .analysis import omega_sigma, sigma_iasi2
    from .channel import ChannelParams
    from .modem import SystemParams
    from .montecarlo import StopRule, run_ber_point
    from .oracles import mc_mui_kernel, mc_omega_sigma, mc_sigma_iasi2, waveform_decision_statistic

    checks = []

    def record(name, ok, **detail):
        checks.append({"check": name, "pass": bool(ok), **detail})

    p, R_sim, R_an = cfg.build_pulse()
    chan = ChannelParams()
    sys15 = SystemParams.from_mbps(15.0, N_u=1)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
    n = args.samples
    tol = 0.02 if n >= 10**6 else 0.05
    for name, q, mc in (
        ("sigma_iasi2", sigma_iasi2(chan, sys15, R_an, cfg.quadrature), mc_sigma_iasi2(chan, sys15, R_an, n, rng)),
        ("mui_kernel", mui_kernel(chan, sys15, R_an, cfg.quadrature), mc_mui_kernel(chan, sys15, R_an, n, rng)),
        ("omega_sigma", omega_sigma(chan, sys15, cfg.quadrature), mc_omega_sigma(chan, sys15, n, rng)),
    ):
        rel = abs(q - mc) / abs(mc)
        record(f"quadrature:{name}", rel <= tol, quadrature=q, sampled=mc, rel_diff=rel, tolerance=tol)

    from .modem import correlation_windows, decision_statistic, draw_desired, draw_interferer, template_times
    from .channel import generate_realization

    worst = 0.0
    for i in range(20):
        r = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(2, i)))
        txs = [draw_desired(sys15, chan.tau_max, r), draw_interferer(sys15, chan.tau_max, r)]
        tmpl = template_times(sys15, txs[0])
        chs = [generate_realization(chan, r, windows=correlation_windows(sys15, tx, tmpl, p.duration)) for tx in txs]
        a = decision_statistic(chs, txs, R_sim, sys15)
        b = waveform_decision_statistic(p, chs, txs, sys15)
        scale = max(abs(b.Z_u), 1e-12)
        for f in ("Z_u", "Z_iasi", "Z_isi", "Z_mui"):
            worst = max(worst, abs(getattr(a, f) - getattr(b, f)) / scale)
    record("correlator:tap_vs_waveform", worst <= 1e-3, worst_rel=worst, channels=20)

    awgn = ChannelParams(kind="single_tap")
    sys1 = SystemParams.from_mbps(15.0)
    rule = StopRule(min_errors=0, max_trials=20000, min_trials=20000)
    off = {"iasi": False, "isi": False, "mui": False}
    for e in (0.0, 4.0, 8.0):
        pt = run_ber_point(sys1, awgn, R_sim, e, rule, cfg.seed, off)
        ref = 0.5 * erfc(math.sqrt(10 ** (e / 10)))
        sd = math.sqrt(ref * (1 - ref) / pt.trials)
        record(f"awgn:{e:g}dB", abs(pt.ber - ref) <= 3 * sd, ber=pt.ber, reference=ref, trials=pt.trials)
    return {"checks": checks, "passed": all(c["pass"] for c in checks)}


def _error(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "channel-stats":
            print(json.dumps(cmd_channel_stats(cfg, args), indent=2))
            return EXIT_OK
        if args.command == "validate":
            report = cmd_validate(cfg, args)
            print(json.dumps(report, indent=2))
            if not report["passed"]:
                failed = [c["check"] for c in report["checks"] if not c["pass"]]
                raise ValidationFailure("failed checks: " + ", ".join(failed))
            return EXIT_OK
        if args.command == "ber-sim":
            cfg = replace(cfg, engines=("simulation",))
        elif args.command == "ber-analytic":
            cfg = replace(cfg, engines=("analysis",))
        out = Path(cfg.output)
        records = run_engines(cfg, out, args.command, args.dump_components, args.dump_pulse)
        for r in records:
            print(f"{r['run']}: wrote {', '.join(r['outputs'])} to {out} ({r['elapsed_s']} s)")
        return EXIT_OK
    except ConfigError as exc:
        return _error(EXIT_CONFIG, "config", str(exc))
    except (QuadratureError, SeriesError) as exc:
        return _error(EXIT_NUMERICAL, "numerical", str(exc))
    except ValidationFailure as exc:
        return _error(EXIT_VALIDATION, "validation", str(exc))
    except OSError as exc:
        return _error(EXIT_IO, "io", str(exc))
    except Exception as exc:  # noqa: BLE001 - last-resort summary for scripts
        return _error(EXIT_INTERNAL, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
