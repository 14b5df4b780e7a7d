"""Main CLI entry point for thinsieve."""

import functools
import io
import json
import logging
import os
from collections.abc import Callable
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Concatenate, NoReturn, ParamSpec, TextIO, TypeVar

import click
from sympy import isprime, primerange

from . import __version__
from .artifacts import dump_json, write_csv, write_points_csv
from .census import census, density_curve, export_figure, summarize
from .config import HOROCYCLE_MODES, RunConfig
from .congruence import (
    build_density_table,
    check_strong_primitivity,
    closed_form_density,
    cone_density,
    detect_ramified_primes,
    local_density,
    sieve_dimension_fit,
)
from .constants import POLYNOMIAL_DIMENSION
from .dhr import (
    delta_threshold,
    format_r_table,
    minimize_m,
    plan_sieve,
    r_table,
)
from .errors import InputError, InsufficientData, ThinSieveError
from .lattice import SievePolynomial, polynomial_by_tag
from .orbit import CountSeries, PowerLawFit, count_ball, enumerate_orbit, fit_exponent
from .presets import preset_names
from .spinner import spinner

logger = logging.getLogger(__name__)

LOG_ENV = "THINSIEVE_LOG"
LOG_FORMAT = "[%(levelname)s] %(name)s: %(message)s"

P = ParamSpec("P")
R = TypeVar("R")


@dataclass
class Session:
    """Effective configuration and output location for one invocation."""

    config: RunConfig
    out_dir: Path | None = None

    def emit_json(self, name: str, data: Any) -> None:
        """Write ``data`` to ``out_dir/name``, or to stdout without an out dir."""
        if self.out_dir is None:
            click.echo(json.dumps(data, indent=2, sort_keys=True))
            return
        path = self.out_dir / name
        dump_json(data, path)
        click.echo(f"Wrote {path}", err=True)

    def emit_csv(self, name: str, write: Callable[[TextIO | Path], None]) -> None:
        if self.out_dir is None:
            buffer = io.StringIO()
            write(buffer)
            click.echo(buffer.getvalue(), nl=False)
            return
        path = self.out_dir / name
        write(path)
        click.echo(f"Wrote {path}", err=True)


def _fail(error: ThinSieveError) -> NoReturn:
    """Report ``error`` as one line of JSON on stderr and exit with its code."""
    payload = {
        "error": type(error).__name__,
        "message": str(error),
        "exit_code": error.exit_code,
    }
    click.echo(json.dumps(payload), err=True)
    raise SystemExit(error.exit_code)


def _handles_errors(
    command: Callable[Concatenate[Session, P], R],
) -> Callable[Concatenate[Session, P], R]:
    @functools.wraps(command)
    def wrapper(session: Session, *args: P.args, **kwargs: P.kwargs) -> R:
        try:
            return command(session, *args, **kwargs)
        except ThinSieveError as e:
            _fail(e)

    return wrapper


def _configure_logging(debug: bool) -> None:
    """Route log records to stderr at the level from --debug or THINSIEVE_LOG."""
    requested = "DEBUG" if debug else os.environ.get(LOG_ENV, "WARNING").upper()
    level = logging.getLevelName(requested)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    if requested != logging.getLevelName(level):
        logger.warning(f"Ignoring {LOG_ENV}={requested!r}; using WARNING")


def _parse_moduli(text: str) -> list[int]:
    """'3..50' for the primes in a range, or a comma list such as '7,11,77'."""
    try:
        if ".." in text:
            lo, hi = (int(part) for part in text.split("..", 1))
            return [int(p) for p in primerange(lo, hi + 1)]
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise InputError(f"Invalid moduli '{text}'; use '3..50' or '7,11,77'") from None


def _parse_theta(text: str | None, default: float) -> float:
    if text is None:
        return default
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise InputError(f"Invalid theta '{text}'") from None


def _fraction_json(value: Fraction | None) -> dict[str, int] | None:
    if value is None:
        return None
    return {"num": value.numerator, "den": value.denominator}


def _polynomial(session: Session, tag: str | None) -> SievePolynomial:
    return polynomial_by_tag(tag or session.config.polynomial)


def _fit(config: RunConfig) -> tuple[CountSeries, PowerLawFit]:
    """Counts over the configured radii and a fit on the first window."""
    params = config.enum_params(config.radii[0])
    with spinner(f"Counting orbit points up to T={config.radii[-1]:g}"):
        series = count_ball(config.presentation(), params, config.radii)
    window = config.fit_windows[0] if config.fit_windows else None
    return series, fit_exponent(series, window)


def _resolve_delta(config: RunConfig, delta: float | None) -> tuple[float, str]:
    """δ from the flag, the config, or a fit of the orbit counts."""
    if delta is not None:
        return delta, "flag"
    if config.sieve.delta is not None:
        return config.sieve.delta, "config"
    _, fit = _fit(config)
    if fit.delta_hat > 1:
        logger.warning(f"Fitted δ = {fit.delta_hat:.5f} exceeds 1; using δ = 1")
    return min(fit.delta_hat, 1.0), "fit"


@click.group()
@click.version_option(version=__version__, prog_name="thinsieve")
@click.option(
    "--config",
    "config_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Run config (JSON document)",
)
@click.option(
    "--preset",
    type=click.Choice(list(preset_names())),
    default=None,
    help="Built-in preset; overrides the preset named in --config",
)
@click.option("--threads", type=int, default=None, help="Worker threads")
@click.option(
    "--out-dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Write artifacts here instead of to stdout",
)
@click.option("--budget-nodes", type=int, default=None, help="Enumeration node budget")
@click.option("--seed", type=int, default=None, help="Seed for randomised factoring")
@click.option("--debug", is_flag=True, help="Enable debug logging on stderr")
@click.pass_context
def main(
    ctx: click.Context,
    config_path: Path | None,
    preset: str | None,
    threads: int | None,
    out_dir: Path | None,
    budget_nodes: int | None,
    seed: int | None,
    debug: bool,
) -> None:
    """thinsieve - affine linear sieve workbench for Pythagorean-triple orbits.

    Every subcommand prints JSON or CSV on stdout, or writes files under
    --out-dir. Errors are reported as one JSON line on stderr with exit
    code 2 (invalid input) or 3 (computation failed).
    """
    _configure_logging(debug)
    try:
        if config_path is not None:
            config = RunConfig.load(config_path, preset=preset)
        else:
            config = RunConfig.from_preset(preset or "full-orbit")
        config = config.with_overrides(
            threads=threads,
            budget_nodes=budget_nodes,
            seed=seed,
            out_dir=None if out_dir is None else str(out_dir),
        )
        if config.threads < 1 or config.budget_nodes < 1:
            raise InputError("--threads and --budget-nodes must be positive")
    except ThinSieveError as e:
        _fail(e)
    directory = None if config.out_dir is None else Path(config.out_dir)
    ctx.obj = Session(config, directory)
    logger.debug(f"Effective config: {config.to_dict()}")


@main.command()
@click.option("--radius", type=float, default=None, help="Ball radius T")
@click.pass_obj
@_handles_errors
def orbit(session: Session, radius: float | None) -> None:
    """Enumerate orbit points of norm below T as CSV."""
    config = session.config
    radius = radius or config.radii[-1]
    with spinner(f"Enumerating orbit up to T={radius:g}"):
        points = enumerate_orbit(config.presentation(), config.enum_params(radius))
    session.emit_csv("orbit_points.csv", lambda out: write_points_csv(points, out))


@main.command()
@click.option(
    "--radius", "radii", type=float, multiple=True, help="Radius (repeatable)"
)
@click.pass_obj
@_handles_errors
def count(session: Session, radii: tuple[float, ...]) -> None:
    """Count orbit points in balls and fit N(T) ≈ c·T^δ."""
    config = session.config
    if radii:
        config = config.with_overrides(radii=tuple(sorted(radii)))
    params = config.enum_params(config.radii[0])
    with spinner(f"Counting orbit points up to T={config.radii[-1]:g}"):
        series = count_ball(config.presentation(), params, config.radii)
    windows = config.fit_windows or ((config.radii[0], config.radii[-1]),)
    fits = []
    for window in windows:
        try:
            fits.append(fit_exponent(series, window).to_json())
        except InsufficientData as e:
            logger.warning(f"No fit on {window}: {e}")
    if session.out_dir is None:
        session.emit_json("", {"counts": series.to_json(), "fits": fits})
    else:
        session.emit_json("counts.json", series.to_json())
        session.emit_json("fit.json", fits)


@main.command("local-density")
@click.option("--function", "tag", default=None, help="FH, FA or FC")
@click.option("--primes", "moduli", default=None, help="'3..50' or '7,11,77'")
@click.option("--oracle", is_flag=True, help="Compare with the cone count mod p")
@click.option(
    "--table-bound",
    type=float,
    default=None,
    help="Also tabulate g(p) for all p below this bound and fit κ",
)
@click.pass_obj
@_handles_errors
def local_density_command(
    session: Session,
    tag: str | None,
    moduli: str | None,
    oracle: bool,
    table_bound: float | None,
) -> None:
    """Exact local densities g^F(q) of the orbit mod q."""
    config = session.config
    F = _polynomial(session, tag)
    group = config.presentation()
    qs = _parse_moduli(moduli or f"2..{config.prime_bound}")
    ramified: tuple[int, ...] = ()
    if oracle and qs:
        ramified = detect_ramified_primes(group, max(2, max(qs))).primes

    entries = []
    with spinner(f"Computing densities of {F.tag} for {len(qs)} moduli"):
        for q in qs:
            g = local_density(group, F, q)
            entry: dict[str, Any] = {
                "q": q,
                "num": g.numerator,
                "den": g.denominator,
                "closed_form": _fraction_json(
                    closed_form_density(F, q) if isprime(q) else None
                ),
            }
            if oracle:
                checkable = q > 2 and isprime(q)
                expected = cone_density(F, q) if checkable else None
                entry["oracle"] = _fraction_json(expected)
                entry["ramified"] = q in ramified
                entry["agrees"] = None if expected is None else expected == g
            entries.append(entry)

    result: dict[str, Any] = {"polynomial": F.tag.value, "entries": entries}
    if oracle:
        result["ramified"] = list(ramified)
    if table_bound is not None:
        with spinner(f"Tabulating g(p) for p < {table_bound:g}"):
            table = build_density_table(group, F, table_bound, threads=config.threads)
        result["table"] = table.to_json()
        result["kappa_hat"] = sieve_dimension_fit(table, table_bound)
    session.emit_json(f"local_density_{F.tag.value}.json", result)


@main.command()
@click.option("--p-max", type=int, default=None, help="Largest prime to test")
@click.pass_obj
@_handles_errors
def ramified(session: Session, p_max: int | None) -> None:
    """Primes where the orbit mod p misses part of the base point's class."""
    config = session.config
    report = detect_ramified_primes(config.presentation(), p_max or config.prime_bound)
    session.emit_json("ramified.json", report.to_json())


@main.command()
@click.option("--function", "tag", default=None, help="FH, FA or FC")
@click.option("--q-max", type=int, default=None, help="Largest modulus to test")
@click.pass_obj
@_handles_errors
def primitivity(session: Session, tag: str | None, q_max: int | None) -> None:
    """Check that F is not identically zero mod any q ≤ q_max on the orbit."""
    config = session.config
    F = _polynomial(session, tag)
    result = check_strong_primitivity(
        config.presentation(), F, q_max or config.prime_bound
    )
    session.emit_json(
        f"primitivity_{F.tag.value}.json",
        {"polynomial": F.tag.value, **result.to_json()},
    )


@main.command("sieve-table")
@click.option("--json", "as_json", is_flag=True, help="Emit JSON rows")
@click.pass_obj
@_handles_errors
def sieve_table(session: Session, as_json: bool) -> None:
    """Recompute the 21-row table of R values."""
    results = r_table()
    if as_json or session.out_dir is not None:
        session.emit_json("r_table.json", [result.to_json() for result in results])
    if not as_json:
        click.echo(format_r_table(results))
    mismatches = sum(1 for result in results if not result.matches)
    if mismatches:
        click.echo(f"{mismatches} rows differ from the printed values", err=True)


@main.command("sieve-r")
@click.option("--kappa", type=int, default=None, help="Sieve dimension (1, 4, 5)")
@click.option("--delta", type=float, default=None, help="Critical exponent δ")
@click.option("--theta", default=None, help="Spectral gap θ, e.g. 5/6")
@click.option("--mode", type=click.Choice(HOROCYCLE_MODES), default=None)
@click.pass_obj
@_handles_errors
def sieve_r(
    session: Session,
    kappa: int | None,
    delta: float | None,
    theta: str | None,
    mode: str | None,
) -> None:
    """μ, τ and R for one set of sieve inputs."""
    config = session.config
    kappa = kappa or config.sieve.kappa or POLYNOMIAL_DIMENSION[config.polynomial]
    delta_value, source = _resolve_delta(config, delta)
    theta_value = _parse_theta(theta, config.sieve.theta)
    mode = mode or config.sieve.mode
    plan = plan_sieve(kappa, delta_value, theta_value, mode)
    bound = minimize_m(plan.mu, kappa, plan.constants.beta)
    session.emit_json(
        "sieve_r.json",
        {
            "kappa": kappa,
            "delta": delta_value,
            "delta_source": source,
            "theta": theta_value,
            "mode": plan.mode.value,
            "mu": plan.mu,
            "tau": plan.tau,
            "zeta_star": bound.zeta_star,
            "m_star": bound.m_star,
            "R": bound.R,
            "near_integer": bound.near_integer,
            "candidates": list(bound.candidates),
        },
    )


@main.command("delta-threshold")
@click.option("--r", "targets", type=int, multiple=True, help="Target R (repeatable)")
@click.option("--kappa", type=int, default=None, help="Sieve dimension (1, 4, 5)")
@click.option("--theta", default=None, help="Spectral gap θ, e.g. 5/6")
@click.option("--mode", type=click.Choice(HOROCYCLE_MODES), default=None)
@click.pass_obj
@_handles_errors
def delta_threshold_command(
    session: Session,
    targets: tuple[int, ...],
    kappa: int | None,
    theta: str | None,
    mode: str | None,
) -> None:
    """Smallest δ for which the sieve reaches each target R."""
    config = session.config
    kappa = kappa or config.sieve.kappa or POLYNOMIAL_DIMENSION[config.polynomial]
    theta_value = _parse_theta(theta, config.sieve.theta)
    mode = mode or config.sieve.mode
    rows = [
        {
            "R": r,
            "kappa": kappa,
            "theta": theta_value,
            "mode": mode,
            "delta": delta_threshold(r, theta_value, kappa, mode),
        }
        for r in targets or config.sieve.r_targets
    ]
    session.emit_json("delta_threshold.json", rows)


@main.command("census")
@click.option("--radius", type=float, default=None, help="Ball radius T")
@click.option("--function", "tag", default=None, help="FH, FA or FC")
@click.option("--r", "r_list", type=int, multiple=True, help="R (repeatable)")
@click.option(
    "--curve", is_flag=True, help="Add density ratios over the configured radii"
)
@click.pass_obj
@_handles_errors
def census_command(
    session: Session,
    radius: float | None,
    tag: str | None,
    r_list: tuple[int, ...],
    curve: bool,
) -> None:
    """Ω statistics of F over the orbit points of norm below T."""
    config = session.config
    F = _polynomial(session, tag)
    radius = radius or config.radii[-1]
    rs = list(r_list or config.r_list)
    with spinner(f"Enumerating orbit up to T={radius:g}"):
        points = enumerate_orbit(config.presentation(), config.enum_params(radius))
    with spinner(f"Factoring {F.tag} at {len(points)} points"):
        records, summaries = census(
            points, F, rs, radius=radius, threads=config.threads, seed=config.seed
        )

    result: dict[str, Any] = {
        "polynomial": F.tag.value,
        "T": radius,
        "summaries": [summaries[r].to_json() for r in rs],
    }
    if curve:
        delta_value, source = _resolve_delta(config, None)
        kappa = POLYNOMIAL_DIMENSION[F.tag.value]
        radii = [t for t in config.radii if t <= radius]
        result["curve"] = {
            "delta": delta_value,
            "delta_source": source,
            "kappa": kappa,
            "by_R": {
                str(r): [
                    point.to_json()
                    for point in density_curve(
                        [summarize(records, r, t) for t in radii], delta_value, kappa
                    )
                ]
                for r in rs
            },
        }
    session.emit_json(f"census_{F.tag.value}.json", result)
    if session.out_dir is not None:
        rows = [
            (*rec.triple.as_tuple(), rec.value, "" if rec.omega is None else rec.omega)
            for rec in records
        ]
        columns = ("x", "y", "z", "F", "omega")
        session.emit_csv(
            f"census_{F.tag.value}.csv",
            lambda out: write_csv(rows, columns, out, kind="census"),
        )


@main.command()
@click.option("--radius", type=float, default=None, help="Ball radius T")
@click.option("--function", "tag", default="FC", help="FC (Ω classes) or FH")
@click.option("--svg", is_flag=True, help="Also draw figure.svg (needs --out-dir)")
@click.pass_obj
@_handles_errors
def figure(session: Session, radius: float | None, tag: str, svg: bool) -> None:
    """Figure dataset: every orbit point with its Ω category."""
    config = session.config
    if svg and session.out_dir is None:
        raise InputError("--svg needs --out-dir")
    F = polynomial_by_tag(tag)
    radius = radius or config.radii[-1]
    with spinner(f"Enumerating orbit up to T={radius:g}"):
        points = enumerate_orbit(config.presentation(), config.enum_params(radius))
    with spinner(f"Factoring {F.tag} at {len(points)} points"):
        records, _ = census(points, F, [], threads=config.threads, seed=config.seed)
    svg_path = None
    if svg and session.out_dir is not None:
        svg_path = session.out_dir / "figure.svg"
    session.emit_csv(
        "figure.csv", lambda out: export_figure(records, out, svg_path=svg_path)
    )
