"""Command-line entry point.

Exit codes: 0 success, 1 input or parse error, 2 domain infeasibility
(no twin within epsilon, invalid magnitudes on the pricing horizon).
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from . import __version__
from .errors import InvalidMagnitude, ReturnOutOfRange, RoundedToZero, TwinMarketError
from .fileio import (
    InputError,
    TwinRecord,
    dumps,
    prices_csv_text,
    read_prices_csv,
    twin_to_dict,
    write_rows_csv,
)
from .harness import (
    IncompleteModelSpec,
    hypothesis_report,
    indistinguishability_experiment,
    simulate_incomplete,
)
from .market import WeightConfig, build_twin
from .replicate import (
    Claim,
    PredictableMagnitudes,
    check_crr_completeness,
    price,
    replicate,
    verify_replication,
)

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    epsilon: float = 0.01
    weight_M: float = 0.0
    omega_min: float = 0.5 * math.pi
    omega_max: float = 0.995 * math.pi
    omega_steps: int = 12
    lam: float = 0.0
    tick: float = 0.01
    seed: int = 42
    window: int = 256
    rho: float = 1.0
    output_format: str = "json"

    def __post_init__(self):
        if not 0 < self.omega_min < self.omega_max < math.pi:
            raise click.BadParameter("need 0 < omega-min < omega-max < pi")
        if self.omega_steps < 1:
            raise click.BadParameter("omega-steps must be >= 1")
        if not self.epsilon > 0:
            raise click.BadParameter("epsilon must be > 0")
        if not self.tick > 0:
            raise click.BadParameter("tick must be > 0")
        if self.window < 2:
            raise click.BadParameter("window must be >= 2")
        if self.rho < 1:
            raise click.BadParameter("rho must be >= 1")
        if self.lam < 0 or self.weight_M < 0:
            raise click.BadParameter("lambda and weight-m must be >= 0")
        if self.seed < 0:
            raise click.BadParameter("seed must be unsigned")
        if self.output_format not in ("json", "csv"):
            raise click.BadParameter("format must be json or csv")

    @property
    def omega_grid(self) -> list[float]:
        if self.omega_steps == 1:
            return [self.omega_min]
        return np.linspace(self.omega_min, self.omega_max, self.omega_steps).tolist()

    @property
    def weights(self) -> WeightConfig:
        return WeightConfig(self.weight_M)


_CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)}


class OmegaType(click.ParamType):
    """Radians, optionally written as a multiple of pi (``0.9pi``)."""

    name = "omega"

    def convert(self, value, param, ctx):
        if isinstance(value, (int, float)):
            return float(value)
        s = str(value).strip().lower().replace("π", "pi")
        try:
            if s.endswith("pi"):
                head = s[:-2].rstrip("*")
                return (float(head) if head else 1.0) * math.pi
            return float(s)
        except ValueError:
            self.fail(f"{value!r} is not a number or multiple of pi", param, ctx)


OMEGA = OmegaType()


def _config_options(f):
    opts = [
        click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
                     help="JSON file with config keys; flags override it."),
        click.option("--epsilon", type=float),
        click.option("--weight-m", "weight_M", type=float),
        click.option("--omega-min", type=OMEGA),
        click.option("--omega-max", type=OMEGA),
        click.option("--omega-steps", type=int),
        click.option("--lambda", "lam", type=float),
        click.option("--tick", type=float),
        click.option("--seed", type=int),
        click.option("--window", type=int),
        click.option("--rho", type=float),
        click.option("--format", "output_format", type=click.Choice(["json", "csv"])),
        click.option("--output", "-o", type=click.Path(dir_okay=False), help="Output file (default stdout)."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _resolve(config_file, **flags) -> RunConfig:
    values = {}
    if config_file:
        try:
            data = json.loads(Path(config_file).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise InputError(f"{config_file}:{e.lineno}: invalid JSON ({e.msg})") from None
        unknown = set(data) - _CONFIG_KEYS
        if unknown:
            raise InputError(f"{config_file}: unknown config keys {sorted(unknown)}")
        values.update(data)
    values.update({k: v for k, v in flags.items() if k in _CONFIG_KEYS and v is not None})
    return RunConfig(**values)


def _emit(text: str, output):
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def _emit_report(report: dict, rows: list[dict] | None, cfg: RunConfig, output):
    if cfg.output_format == "csv" and rows is not None:
        buf = io.StringIO()
        write_rows_csv(rows, buf)
        _emit(buf.getvalue(), output)
    else:
        _emit(dumps(report), output)


def _header(command: str, cfg: RunConfig, **extra) -> dict:
    head = {"command": command, "version": __version__, "config": dataclasses.asdict(cfg)}
    head.update(extra)
    return head


@click.group()
@click.version_option(__version__)
def cli():
    """Build complete twins of observed price histories and replicate claims in them."""


@cli.command()
@click.argument("input_csv", type=click.Path(exists=True, dir_okay=False))
@_config_options
def twin(input_csv, config_file, output, **flags):
    """Build the complete twin of the prices in INPUT_CSV (header ``t,price``)."""
    cfg = _resolve(config_file, **flags)
    prices = read_prices_csv(input_csv, rho=cfg.rho)
    tw = build_twin(prices, cfg.epsilon, cfg.weights, cfg.omega_grid, cfg.lam, window=cfg.window)
    used = prices if len(prices) == tw.s_eps.size else prices.tail(tw.s_eps.size - 1)
    body = twin_to_dict(tw, used)
    report = _header("twin", cfg, input=Path(input_csv).name)
    report["twin"] = body
    _emit_report(report, body["series"], cfg, output)
    if not tw.within_epsilon:
        click.echo(str(tw.failure), err=True)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _claim(kind: str, strike, table_path, depth: int) -> Claim:
    if kind in ("call", "put"):
        if strike is None:
            raise InputError(f"--strike is required for {kind}")
        return Claim.call(strike) if kind == "call" else Claim.put(strike)
    if kind == "forward":
        return Claim.forward()
    if table_path is None:
        raise InputError("--table is required for custom-table claims")
    lines = Path(table_path).read_text(encoding="utf-8").splitlines()
    values = []
    for lineno, line in enumerate(lines, start=1):
        tok = line.strip()
        if not tok:
            continue
        try:
            values.append(float(tok))
        except ValueError:
            if lineno == 1:
                continue  # header
            raise InputError(f"{table_path}:{lineno}: {tok!r} is not a number") from None
    if len(values) != 2**depth:
        raise InputError(f"{table_path}: need {2**depth} payoffs for depth {depth}, got {len(values)}")
    return Claim.table(values)


def _pricing_inputs(twin_report, s, q):
    try:
        data = json.loads(Path(twin_report).read_text(encoding="utf-8"))
        rec = TwinRecord(data["twin"] if "twin" in data else data)
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise InputError(f"{twin_report}: not a twin report ({e})") from None
    if not s < q:
        raise InputError("need s < q")
    s_price = rec.discounted_price(s)
    mags = PredictableMagnitudes(s, q, [rec.magnitude(t) for t in range(s + 1, q + 1)])
    return rec, mags, s_price


def _claim_options(f):
    f = click.option("--table", "table_path", type=click.Path(exists=True, dir_okay=False),
                     help="One payoff per path (prefix order) for custom-table claims.")(f)
    f = click.option("--strike", type=float)(f)
    f = click.option("--claim", "claim_kind", default="call",
                     type=click.Choice(["call", "put", "forward", "custom-table"]))(f)
    f = click.option("--q", "q", type=int, required=True, help="Expiry time.")(f)
    f = click.option("--s", "s", type=int, required=True, help="Start time (inside the twin window).")(f)
    return f


def _price_or_replicate(command, twin_report, s, q, claim_kind, strike, table_path,
                        config_file, output, flags):
    cfg = _resolve(config_file, **flags)
    rec, mags, s_price = _pricing_inputs(twin_report, s, q)
    verdict = check_crr_completeness(mags)
    report = _header(command, cfg, twin_report=Path(twin_report).name)
    report.update({"s": s, "q": q, "claim": claim_kind, "strike": strike,
                   "magnitudes": [{"t": int(t), "a": float(a)} for t, a in zip(mags.times, mags.a)]})
    if not verdict:
        bad = mags.violations()
        report["error"] = str(InvalidMagnitude(*zip(*bad)))
        report["completeness"] = {"passed": False, "first_violation": list(verdict.first_violation)}
        _emit(dumps(report), output)
        click.echo(report["error"], err=True)
        return EXIT_INFEASIBLE
    claim = _claim(claim_kind, strike, table_path, mags.depth)
    b_s = rec.bond(s)
    plan = replicate(claim, mags, s_price, b_s, rec.rho)
    residual = verify_replication(plan, claim, mags, s_price, b_s, rec.rho)
    report["completeness"] = {"passed": True, "martingale_probability": 0.5}
    report["discounted_price_s"] = s_price
    report["price"] = price(claim, mags, s_price)
    report["initial_wealth"] = plan.initial_wealth
    report["replication_residual"] = residual
    rows = None
    if command == "replicate":
        rows = [
            {"t": t, "prefix": p, "wealth": x, "beta": b, "gamma": g}
            for (t, p), (x, b, g) in sorted(plan.nodes.items())
        ]
        report["nodes"] = rows
    _emit_report(report, rows, cfg, output)
    return EXIT_OK


@cli.command("price")
@click.argument("twin_report", type=click.Path(exists=True, dir_okay=False))
@_claim_options
@_config_options
def price_cmd(twin_report, s, q, claim_kind, strike, table_path, config_file, output, **flags):
    """Fair price at time S of a claim expiring at Q in the twin of TWIN_REPORT."""
    return _price_or_replicate("price", twin_report, s, q, claim_kind, strike, table_path,
                               config_file, output, flags)


@cli.command("replicate")
@click.argument("twin_report", type=click.Path(exists=True, dir_okay=False))
@_claim_options
@_config_options
def replicate_cmd(twin_report, s, q, claim_kind, strike, table_path, config_file, output, **flags):
    """Per-node hedging table (X, beta, gamma) replicating the claim, with its verification residual."""
    return _price_or_replicate("replicate", twin_report, s, q, claim_kind, strike, table_path,
                               config_file, output, flags)


def _spec_options(f):
    f = click.option("--kind", default="random_size_binomial",
                     type=click.Choice(["random_size_binomial", "iid_uniform_magnitude"]))(f)
    f = click.option("--initial-price", type=float, default=100.0)(f)
    f = click.option("--horizon", type=int, default=64)(f)
    f = click.option("--high", type=float, default=0.05, help="Upper magnitude bound.")(f)
    f = click.option("--low", type=float, default=0.005, help="Lower magnitude bound.")(f)
    return f


def _model_spec(cfg: RunConfig, low, high, horizon, initial_price, kind) -> IncompleteModelSpec:
    try:
        return IncompleteModelSpec(low, high, horizon, cfg.seed, cfg.rho, initial_price, kind)
    except ValueError as e:
        raise InputError(str(e)) from None


@cli.command()
@_spec_options
@_config_options
def simulate(low, high, horizon, initial_price, kind, config_file, output, **flags):
    """Simulate an incomplete random-size binomial price path."""
    cfg = _resolve(config_file, **flags)
    spec = _model_spec(cfg, low, high, horizon, initial_price, kind)
    prices = simulate_incomplete(spec)
    if cfg.output_format == "csv":
        _emit(prices_csv_text(prices), output)
    else:
        report = _header("simulate", cfg, model=dataclasses.asdict(spec))
        report["series"] = [{"t": int(t), "price": float(p)} for t, p in zip(prices.times, prices.prices)]
        _emit(dumps(report), output)
    return EXIT_OK


@cli.command()
@_spec_options
@_config_options
def experiment(low, high, horizon, initial_price, kind, config_file, output, **flags):
    """Rounding indistinguishability experiment on a simulated path."""
    cfg = _resolve(config_file, **flags)
    spec = _model_spec(cfg, low, high, horizon, initial_price, kind)
    rep = indistinguishability_experiment(spec, cfg.epsilon, cfg.tick, cfg.weights, cfg.omega_grid, cfg.lam)
    report = _header("experiment", cfg, model=dataclasses.asdict(spec))
    report["report"] = {
        "epsilon": rep.epsilon,
        "tick": rep.tick,
        "omega_used": rep.omega_used,
        "within_epsilon": rep.within_epsilon,
        "sup_price_error": rep.sup_price_error,
        "sup_return_error": rep.sup_return_error,
        "combined_error": rep.combined_error,
        "fraction_rounded_equal": rep.fraction_rounded_equal,
        "max_gap_ticks": rep.max_gap_ticks,
        "h_a_rejectable": rep.h_a_rejectable,
        "twin_valid": rep.twin_valid,
        "violations": [{"t": t, "a_eps": a} for t, a in rep.violations],
        "warnings": list(rep.warnings),
        "per_time_rounded_gap": [{"t": t, "gap_ticks": g} for t, g in rep.per_time_rounded_gap.items()],
    }
    _emit_report(report, report["report"]["per_time_rounded_gap"], cfg, output)
    return EXIT_OK if rep.within_epsilon else EXIT_INFEASIBLE


@cli.command()
@click.argument("input_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--epsilons", default="0.05,0.01,0.002",
              help="Comma-separated epsilons in descending order.")
@_config_options
def hypothesis(input_csv, epsilons, config_file, output, **flags):
    """Twin feasibility table over a descending list of epsilons."""
    cfg = _resolve(config_file, **flags)
    try:
        eps = [float(e) for e in epsilons.split(",") if e.strip()]
    except ValueError:
        raise InputError(f"--epsilons {epsilons!r} is not a list of numbers") from None
    if not eps or any(b > a for a, b in zip(eps, eps[1:])) or any(e <= 0 for e in eps):
        raise InputError("--epsilons must be positive and sorted descending")
    prices = read_prices_csv(input_csv, rho=cfg.rho)
    if len(prices) - 1 > cfg.window:
        prices = prices.tail(cfg.window)
    rows = hypothesis_report(prices, eps, cfg.weights, cfg.omega_grid, cfg.lam)
    table = [dataclasses.asdict(r) for r in rows]
    report = _header("hypothesis", cfg, input=Path(input_csv).name)
    report["rows"] = table
    _emit_report(report, table, cfg, output)
    return EXIT_OK


def main(argv=None) -> int:
    """Run the CLI and return its exit code instead of raising ``SystemExit``."""
    try:
        rv = cli.main(args=argv, prog_name="twinmarket", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_INPUT
    except click.ClickException as e:
        e.show()
        return EXIT_INPUT
    except (InputError, ReturnOutOfRange, RoundedToZero, FileNotFoundError) as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_INPUT
    except InvalidMagnitude as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_INFEASIBLE
    except (TwinMarketError, ValueError) as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_INPUT
    return int(rv or 0)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
