"""Experiment command line.

Five subcommands, one report directory each run: `ber` (decision error
rates over the bandwidth ratio), `leak` (what a passive observer recovers),
`keyrate` (distance against secure bit rate), `session` (one key exchange
end to end), `sim` (scripted roadside scenario).  Every command writes a
self-describing JSON report, delimited CSV where the result is tabular and
a PNG figure next to them.  Exit codes: 0 on success, 1 for usage or
configuration problems, 2 for I/O failures.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from contextlib import contextmanager
from pathlib import Path

import click
import jsonschema

from . import figures
from .channel import ChannelConfig, DecisionRule, run_round
from .errors import ConfigError, KljnError, UsageError
from .eve import guess_case, leak_report, mid_null_distribution, observe
from .noise import derive_seed
from .protocol import (
    ALL_RULES,
    LinkModel,
    SessionConfig,
    bits_to_hex,
    build_ber_table,
    estimate_ber,
    key_rate,
    run_session,
    verify_keys,
)
from .report import ExperimentSpec, load_schema, report_payload, write_csv, write_json
from .vanet import NodeKind, load_scenario, load_shipped, run_scenario, shipped_scenarios

# Usage problems exit 1 in this artifact; click's default of 2 is reserved for I/O.
click.UsageError.exit_code = 1

CHANNEL_KEYS = ("gamma", "r_low", "r_high", "t_eff", "b_kljn")


def channel_options(f):
    opts = [
        click.option("--gamma", type=int, default=200, show_default=True,
                     help="Bandwidth to bit-rate ratio (samples per bit = 2*gamma)."),
        click.option("--r-low", type=float, default=1.0e3, show_default=True,
                     help="Low resistance, ohm."),
        click.option("--r-high", type=float, default=1.0e4, show_default=True,
                     help="High resistance, ohm."),
        click.option("--t-eff", type=float, default=1.0, show_default=True,
                     help="Effective noise temperature, normalized."),
        click.option("--b-kljn", type=float, default=2.0e6, show_default=True,
                     help="Exchange bandwidth, Hz."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def common_options(f):
    f = click.option("--seed", type=int, default=0, show_default=True,
                     help="Top-level 64-bit seed; all streams derive from it.")(f)
    f = click.option("--out", "out_dir", type=click.Path(file_okay=False), default="reports",
                     show_default=True, help="Report directory (created if missing).")(f)
    f = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                     help="JSON file with channel parameters; explicit flags win.")(f)
    return f


def resolve_channel(ctx, config_path, **flags) -> ChannelConfig:
    """Channel parameters, precedence: defaults < config file < explicit flags."""
    values = dict(flags)
    if config_path is not None:
        try:
            loaded = json.loads(Path(config_path).read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {config_path}: not valid JSON ({exc})") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {config_path}: expected a JSON object")
        unknown = sorted(set(loaded) - set(CHANNEL_KEYS))
        if unknown:
            raise ConfigError(f"config {config_path}: unknown keys {unknown}")
        for key, val in loaded.items():
            if ctx.get_parameter_source(key) is click.core.ParameterSource.DEFAULT:
                values[key] = val
    return ChannelConfig(**values)


@contextmanager
def io_phase():
    try:
        yield
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


def _outdir(out_dir) -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parse_int_list(text: str, what: str) -> list:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated integer list, got {text!r}") from None


def _parse_float_list(text: str, what: str) -> list:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated number list, got {text!r}") from None


@click.group()
@click.version_option(package_name="kljnsim", prog_name="kljn")
def cli():
    """Desk-scale simulator of statistical key exchange over noisy resistor pairs."""


@cli.command()
@click.option("--gammas", default="10,50,200,1000", show_default=True,
              help="Comma-separated gamma values to sweep.")
@click.option("--trials", type=int, default=10000, show_default=True)
@click.option("--rule", default="ALL",
              type=click.Choice(["VOLTAGE", "CURRENT", "COMBINED", "ALL"]),
              show_default=True)
@channel_options
@common_options
@click.pass_context
def ber(ctx, gammas, trials, rule, seed, out_dir, config_path, **channel):
    """Decision error rate per gamma, all rules scored on shared rounds."""
    if trials < 100:
        raise UsageError(f"trials must be >= 100 for a usable interval, got {trials}")
    gamma_list = _parse_int_list(gammas, "--gammas")
    if not gamma_list:
        raise UsageError("--gammas is empty")
    base = resolve_channel(ctx, config_path, **channel)
    rules = ALL_RULES if rule == "ALL" else (DecisionRule(rule),)

    rows = []
    for g in gamma_list:
        cfg = dataclasses.replace(base, gamma=g)
        ests = estimate_ber(cfg, trials, derive_seed(seed, "cmd-ber", g), rules=rules)
        for r in rules:
            e = ests[r]
            rows.append({
                "gamma": g, "rule": r.value, "error_rate": e.error_rate,
                "ci_low": e.ci_low, "ci_high": e.ci_high,
                "errors": e.errors, "trials": e.trials,
            })
            click.echo(f"gamma={g:>5} rule={r.value:<8} "
                       f"error_rate={e.error_rate:.6f} [{e.ci_low:.6f}, {e.ci_high:.6f}]")

    spec = ExperimentSpec("ber", seed, {
        "gammas": gamma_list, "trials": trials, "rule": rule,
        "channel": dataclasses.asdict(base),
    })
    with io_phase():
        out = _outdir(out_dir)
        header = ["gamma", "rule", "error_rate", "ci_low", "ci_high", "errors", "trials"]
        write_csv(out / "ber.csv", header, [[row[h] for h in header] for row in rows])
        write_json(out / "ber.json", report_payload(spec, {"rows": rows}))
        figures.ber_figure(rows, out / "ber.png")
        click.echo(f"wrote {out / 'ber.csv'}, {out / 'ber.json'}, {out / 'ber.png'}")


@cli.command()
@click.option("--rounds", type=int, default=10000, show_default=True)
@click.option("--mix", default="secure", type=click.Choice(["secure", "uniform"]),
              show_default=True,
              help="secure: only mixed connections; uniform: all four cases.")
@channel_options
@common_options
@click.pass_context
def leak(ctx, rounds, mix, seed, out_dir, config_path, **channel):
    """Passive-observer study; emits the leak statistics schema."""
    if rounds < 1000:
        raise UsageError(f"rounds must be >= 1000 for stable statistics, got {rounds}")
    cfg = resolve_channel(ctx, config_path, **channel)
    null = mid_null_distribution(cfg)
    import numpy as np

    rng = np.random.default_rng(derive_seed(seed, "cmd-leak-bits"))
    pairs = []
    for i in range(rounds):
        if mix == "secure":
            a = int(rng.integers(2))
            b = 1 - a
        else:
            a = int(rng.integers(2))
            b = int(rng.integers(2))
        rec = run_round(cfg, a, b, derive_seed(seed, "cmd-leak-round", i), retain_samples=True)
        verdict = guess_case(observe(rec, i), cfg, null)
        slim = dataclasses.replace(rec, wire_voltage=None, loop_current=None)
        pairs.append((slim, verdict))
    stats = leak_report(pairs).to_dict()
    jsonschema.validate(stats, load_schema("leak_report"))

    for case in sorted(stats["accuracy_by_case"]):
        click.echo(f"case {case}: accuracy {stats['accuracy_by_case'][case]:.4f}")
    if stats["secure_accuracy"] is not None:
        click.echo(f"secure accuracy {stats['secure_accuracy']:.4f} "
                   f"[{stats['ci_low']:.4f}, {stats['ci_high']:.4f}] (chance: 0.5)")

    spec = ExperimentSpec("leak", seed, {
        "rounds": rounds, "mix": mix, "channel": dataclasses.asdict(cfg),
    })
    with io_phase():
        out = _outdir(out_dir)
        write_json(out / "leak.json", report_payload(spec, stats))
        figures.leak_figure(stats, out / "leak.png")
        click.echo(f"wrote {out / 'leak.json'}, {out / 'leak.png'}")


@cli.command()
@click.option("--lengths", default="100,200,500,1000,2000,5000", show_default=True,
              help="Comma-separated wire lengths, m.")
@click.option("--v-prop", type=float, default=2.0e8, show_default=True,
              help="Propagation speed on the wire, m/s.")
@click.option("--margin", type=float, default=100.0, show_default=True,
              help="Safety factor between propagation limit and bandwidth.")
@click.option("--ber-trials", type=int, default=0, show_default=True,
              help="Monte-Carlo trials behind the error discount; 0 = ideal.")
@channel_options
@common_options
@click.pass_context
def keyrate(ctx, lengths, v_prop, margin, ber_trials, seed, out_dir, config_path, **channel):
    """Secure bit rate against wire length under the bandwidth cap."""
    length_list = _parse_float_list(lengths, "--lengths")
    if not length_list or any(not l > 0 for l in length_list):
        raise UsageError(f"--lengths must be positive numbers, got {lengths!r}")
    if ber_trials < 0:
        raise UsageError(f"--ber-trials must be >= 0, got {ber_trials}")
    cfg = resolve_channel(ctx, config_path, **channel)
    table = None
    if ber_trials:
        if ber_trials < 100:
            raise UsageError(f"--ber-trials must be >= 100 when set, got {ber_trials}")
        table = build_ber_table(cfg, [cfg.gamma], ber_trials, derive_seed(seed, "cmd-keyrate"))
    link = LinkModel(v_prop=v_prop, margin=margin, ber_table=table)

    rows = []
    for length in length_list:
        b = link.bandwidth(length)
        rate = key_rate(cfg, length, link)
        rows.append({
            "wire_length_m": length, "b_kljn_hz": b,
            "f_bit_hz": b / cfg.gamma, "key_rate_bps": rate,
        })
        click.echo(f"L={length:>8.6g} m  b={b:.6g} Hz  f={b / cfg.gamma:.6g} Hz  "
                   f"rate={rate:.6g} bit/s")

    spec = ExperimentSpec("keyrate", seed, {
        "lengths_m": length_list, "v_prop": v_prop, "margin": margin,
        "ber_trials": ber_trials, "ber_table": table,
        "channel": dataclasses.asdict(cfg),
    })
    with io_phase():
        out = _outdir(out_dir)
        header = ["wire_length_m", "b_kljn_hz", "f_bit_hz", "key_rate_bps"]
        write_csv(out / "keyrate.csv", header, [[row[h] for h in header] for row in rows])
        write_json(out / "keyrate.json", report_payload(spec, {"rows": rows}))
        figures.keyrate_figure(rows, out / "keyrate.png")
        click.echo(f"wrote {out / 'keyrate.csv'}, {out / 'keyrate.json'}, {out / 'keyrate.png'}")


@cli.command()
@click.option("--bits", type=int, default=128, show_default=True,
              help="Target key length.")
@click.option("--max-rounds", type=int, default=4096, show_default=True)
@click.option("--rule", default="COMBINED",
              type=click.Choice(["VOLTAGE", "CURRENT", "COMBINED"]), show_default=True)
@click.option("--emit-keys", is_flag=True,
              help="Include the key bits (hex, most significant bit first).")
@channel_options
@common_options
@click.pass_context
def session(ctx, bits, max_rounds, rule, emit_keys, seed, out_dir, config_path, **channel):
    """One key-exchange session end to end."""
    cfg = resolve_channel(ctx, config_path, **channel)
    scfg = SessionConfig(channel=cfg, target_bits=bits, max_rounds=max_rounds,
                         rule=DecisionRule(rule))
    alice, bob, stats = run_session(scfg, seed)
    mismatches = verify_keys(alice, bob)

    click.echo(f"rounds={stats.rounds_total} secure={stats.rounds_secure} "
               f"delivered={stats.bits_delivered}/{bits} "
               f"target_reached={str(stats.target_reached).lower()}")
    click.echo(f"effective key rate {stats.effective_key_rate:.6g} bit/s, "
               f"{len(mismatches)} mismatched bit(s)")
    if emit_keys:
        click.echo(f"key_a={bits_to_hex(alice.bits)}")
        click.echo(f"key_b={bits_to_hex(bob.bits)}")

    results = {
        "stats": stats.to_dict(),
        "key": {
            "link_id": alice.link_id, "created_at": alice.created_at,
            "lifetime_s": alice.lifetime_s, "rounds_used": alice.rounds_used,
            "n_bits": len(alice.bits),
        },
        "mismatch_indices": mismatches,
        "keys_match": not mismatches,
    }
    if emit_keys:
        results["alice_key_hex"] = bits_to_hex(alice.bits)
        results["bob_key_hex"] = bits_to_hex(bob.bits)
    spec = ExperimentSpec("session", seed, {
        "bits": bits, "max_rounds": max_rounds, "rule": rule,
        "emit_keys": emit_keys, "channel": dataclasses.asdict(cfg),
    })
    with io_phase():
        out = _outdir(out_dir)
        write_json(out / "session.json", report_payload(spec, results))
        figures.session_figure(stats.to_dict(), out / "session.png")
        click.echo(f"wrote {out / 'session.json'}, {out / 'session.png'}")


@cli.command()
@click.option("--scenario", "scenario_ref", required=True,
              help="Scenario JSON path, or the name of a shipped scenario "
                   "(see `kljn sim --scenario list`).")
@common_options
@click.pass_context
def sim(ctx, scenario_ref, seed, out_dir, config_path):
    """Run a roadside key-distribution scenario."""
    if config_path is not None:
        raise UsageError("sim takes its parameters from the scenario file, not --config")
    if scenario_ref == "list":
        for name in shipped_scenarios():
            click.echo(name)
        return
    with io_phase():
        if Path(scenario_ref).is_file():
            scenario = load_scenario(scenario_ref)
        else:
            scenario = load_shipped(scenario_ref)
    result = run_scenario(scenario, seed)

    totals = result.totals
    click.echo(f"{result.n_events} events over {result.horizon_s:.6g} s")
    click.echo(f"provisioned={totals['provisioned']} delivered={totals['delivered']} "
               f"consumed={totals['consumed']} expired={totals['expired']} "
               f"buffered={totals['buffered']} held={totals['held']}")
    click.echo("starvation: " + ", ".join(
        f"{k}={v}" for k, v in sorted(result.starvation_counts.items())))

    spec = ExperimentSpec("sim", seed, {
        "scenario_name": result.scenario_name,
        "scenario_sha256": result.scenario_sha256,
    })
    stations = [n["id"] for n in scenario.nodes if NodeKind(n["kind"]) is not NodeKind.VEHICLE]
    with io_phase():
        out = _outdir(out_dir)
        write_json(out / "sim_report.json", report_payload(spec, result.to_dict()))
        write_csv(out / "sim_timeseries.csv", result.time_series_header, result.time_series)
        figures.balance_figure(result.time_series_header, result.time_series, stations,
                               out / "sim.png")
        click.echo(f"wrote {out / 'sim_report.json'}, {out / 'sim_timeseries.csv'}, "
                   f"{out / 'sim.png'}")


def main(argv=None):
    try:
        return cli.main(args=argv)
    except KljnError as exc:
        click.echo(f"error: {exc}", err=True)
        raise SystemExit(1)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        raise SystemExit(2)


if __name__ == "__main__":
    main()
