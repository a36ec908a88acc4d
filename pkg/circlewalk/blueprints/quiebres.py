"""Subcomandos de la frontera de cortes: cociclo, estabilización, transitoriedad y funciones armónicas."""

import click
from flask import Blueprint

from ..services.breakpoint_boundary import (
    calibrate_target,
    cocycle_pair_check,
    generator_breakpoints,
    harmonicity_check,
    orbit_return_stats,
    stabilization_run,
    theorem_b_witness,
)
from ..services.thompson import random_word
from ..services.walk_engine import derive_seed, make_rng

from .helpers import experiment, run_options

quiebres_bp = Blueprint("quiebres", __name__, cli_group=None)

_DEFAULT_XI_HORIZON = 240

_COCYCLE_HEADER = ("pair", "g_word", "h_word", "chain_rule", "inverse_rule", "integer_valued")
_STABILIZATION_HEADER = ("trial", "x", "last_change", "final_value", "matches_final")
_TRANSIENCE_HEADER = ("x", "returns", "last_return")
_HARMONIC_HEADER = ("g_word", "f_hat", "sigma", "ci_low", "ci_high", "unstabilized", "neighbor_mean", "within_3sigma")
_THEOREM_B_HEADER = ("n", "f_e", "f_an", "nu_In", "margin", "verdict")


def _target(ctx):
    """k dado por configuración o, si falta, el valor estabilizado más frecuente partiendo de e."""

    config = ctx.config
    if config.k is not None:
        return config.k
    calibration = calibrate_target(
        ctx.mu, config.y, config.horizon, config.trials, derive_seed(config.seed, 7), config.workers
    )
    ctx.summary["k_frequency"] = calibration.frequency
    return calibration.k


@quiebres_bp.cli.command("cocycle-check")
@run_options
@click.option("--max-length", "max_length", default=None)
@experiment("cocycle-check", outputs={"cocycle_check.csv": _COCYCLE_HEADER}, trials=200)
def cocycle_check(ctx):
    """Regla de la cadena, inversa e integralidad de C_g sobre pares aleatorios (g, h)."""

    config = ctx.config
    rng = make_rng(config.seed)
    rows = []
    failures = 0
    for pair in range(config.trials):
        g_word = random_word(ctx.generators, rng, config.max_length)
        h_word = random_word(ctx.generators, rng, config.max_length)
        check = cocycle_pair_check(ctx.element(g_word), ctx.element(h_word))
        ok = check.chain_rule and check.inverse_rule and check.integer_valued
        failures += not ok
        rows.append((pair, " ".join(g_word), " ".join(h_word), check.chain_rule, check.inverse_rule, check.integer_valued))
    ctx.write_csv("cocycle_check.csv", _COCYCLE_HEADER, rows)
    ctx.summary.update(pairs=config.trials, violations=failures)
    if failures:
        ctx.summary["failed"] = f"{failures} pares violan las identidades del cociclo"


@quiebres_bp.cli.command("stabilization")
@run_options
@click.option("--settle-by", "settle_by", default=None, help="Paso límite para considerar estabilizado un punto.")
@click.option("--verify-final/--no-verify-final", "verify_final", default=None)
@experiment("stabilization", outputs={"stabilization.csv": _STABILIZATION_HEADER}, horizon=300, settle_by=200)
def stabilization(ctx):
    """Último cambio N(x) de C_{w_n}(x) en los cortes de los generadores."""

    config = ctx.config
    watched = generator_breakpoints(ctx.generators)
    summary = stabilization_run(
        ctx.mu, watched, config.horizon, config.trials, config.seed, config.settle_by, config.workers, config.verify_final
    )
    rows = [
        (trial, x, last_change, final, matches)
        for trial, row in enumerate(summary.rows)
        for x, (last_change, final, matches) in zip(summary.watched, row)
    ]
    ctx.write_csv("stabilization.csv", _STABILIZATION_HEADER, rows)
    ctx.summary.update(
        watched=len(summary.watched),
        fraction_stabilized=summary.fraction_stabilized,
        max_last_change=summary.max_last_change,
        failures=summary.failures,
    )
    if config.verify_final:
        ctx.summary["mismatches"] = summary.mismatches
        if summary.mismatches:
            ctx.summary["failed"] = f"{summary.mismatches} valores finales distintos de C_w(x)"


@quiebres_bp.cli.command("transience")
@run_options
@click.option("--x", default=None, help="Punto de partida de la órbita.")
@experiment("transience", outputs={"transience.csv": _TRANSIENCE_HEADER}, x="1/2", horizon=400)
def transience(ctx):
    """Retornos de w_n⁻¹(x) a x y momento del último retorno."""

    config = ctx.config
    stats = orbit_return_stats(ctx.mu, config.x, config.horizon, config.trials, config.seed, config.workers)
    rows = [(stats.point, returns, last) for returns, last in zip(stats.returns, stats.last_returns)]
    ctx.write_csv("transience.csv", _TRANSIENCE_HEADER, rows)
    ctx.summary.update(
        mean_returns=stats.mean_returns,
        fraction_last_below_half=stats.fraction_last_below(config.horizon // 2),
        recurrent_degenerate=stats.recurrent_degenerate,
    )


@quiebres_bp.cli.command("harmonic")
@run_options
@click.option("--y", default=None, help="Corte observado.")
@click.option("--k", default=None, help="Valor objetivo (por defecto, el más frecuente).")
@click.option("--g-word", "g_word", default=None, help="Elemento inicial; si falta se sortean --random-checks.")
@click.option("--random-checks", "random_checks", default=None)
@click.option("--max-length", "max_length", default=None)
@experiment("harmonic", outputs={"harmonic.csv": _HARMONIC_HEADER}, horizon=300)
def harmonic(ctx):
    """f̂(g) = ℙ_g[C_∞(y) = k] frente al promedio Σ_h μ(h) f̂(gh)."""

    config = ctx.config
    k = _target(ctx)
    if config.g_word:
        words = [list(config.g_word)]
    else:
        rng = make_rng(derive_seed(config.seed, 11))
        words = [random_word(ctx.generators, rng, config.max_length) for _ in range(config.random_checks)]
    rows = []
    unstabilized = 0
    for word in words:
        report = harmonicity_check(
            ctx.mu, ctx.element(word), config.y, k, config.horizon, config.trials, config.seed, config.workers
        )
        estimate = report.f_g
        unstabilized += estimate.unstabilized
        rows.append(
            (
                " ".join(word),
                estimate.value,
                estimate.sigma,
                estimate.ci_low,
                estimate.ci_high,
                estimate.unstabilized,
                report.mean_value,
                report.within_3sigma,
            )
        )
    ctx.write_csv(
        "harmonic.csv",
        _HARMONIC_HEADER,
        rows,
    )
    ctx.summary.update(
        k=k,
        checks=len(rows),
        within_3sigma=sum(row[-1] for row in rows),
        unstabilized=unstabilized,
    )


@quiebres_bp.cli.command("theorem-b")
@run_options
@click.option("--y", default=None)
@click.option("--k", default=None)
@click.option("--n-list", "n_list", default=None)
@click.option("--xi-horizon", "xi_horizon", default=None)
@click.option("--bins", default=None)
@experiment("theorem-b", outputs={"theorem_b.csv": _THEOREM_B_HEADER}, n_list=(4, 6, 8), horizon=300)
def theorem_b(ctx):
    """Compara |f̂(a_n) − f̂(e)| con 2ν̂(I_n): una ruptura significativa descarta la frontera del círculo."""

    config = ctx.config
    k = _target(ctx)
    report = theorem_b_witness(
        ctx.mu,
        config.y,
        k,
        config.n_list,
        config.trials,
        config.horizon,
        config.xi_horizon or _DEFAULT_XI_HORIZON,
        config.seed,
        config.workers,
        config.bins,
        ctx.xi_settings,
    )
    rows = [(row.n, row.f_e, row.f_an, row.nu_In, row.margin, row.verdict) for row in report.rows]
    ctx.write_csv("theorem_b.csv", _THEOREM_B_HEADER, rows)
    ctx.summary.update(k=report.k, verdict=report.verdict, unstabilized=report.unstabilized)
