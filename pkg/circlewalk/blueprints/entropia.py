"""Subcomandos de entropía: curva exacta H(μ*ⁿ) y aproximación condicionada a ξ̂."""

import click
from flask import Blueprint

from ..services.circle_map import IDENTITY
from ..services.entropy import bernoulli_entropy, conditional_entropy_proxy, entropy_curve

from .helpers import experiment, run_options

entropia_bp = Blueprint("entropia", __name__, cli_group=None)

_CURVE_HEADER = ("n", "H", "support_size", "truncated_flag")
_COND_HEADER = ("n", "cond_proxy", "ci_low", "ci_high", "bins")


@entropia_bp.cli.command("entropy-curve")
@run_options
@click.option("--n-max", "n_max", default=None)
@click.option("--support-cap", "support_cap", default=None, help="Tamaño máximo del soporte de μ*ⁿ.")
@experiment("entropy-curve", outputs={"entropy_curve.csv": _CURVE_HEADER}, n_max=6)
def entropy_curve_command(ctx):
    """H(μ*ⁿ) exacta por convolución; marca la última fila si se truncó."""

    config = ctx.config
    curve = entropy_curve(ctx.mu, config.n_max, config.support_cap, config.workers)
    last = len(curve.rows) - 1
    rows = [
        (row.n, row.entropy, row.support_size, curve.truncated and i == last)
        for i, row in enumerate(curve.rows)
    ]
    ctx.write_csv("entropy_curve.csv", _CURVE_HEADER, rows)
    increments = curve.increments
    ctx.summary.update(
        rate_estimate=curve.rate_estimate,
        last_increment=increments[-1] if increments else None,
        truncated=curve.truncated,
    )


@entropia_bp.cli.command("cond-entropy")
@run_options
@click.option("--n-list", "n_list", default=None)
@click.option("--bins", default=None, help="Celdas del círculo para ξ̂.")
@click.option("--a-word", "a_word", default=None)
@experiment("cond-entropy", outputs={"cond_entropy.csv": _COND_HEADER}, n_list=(3, 6), bins=8, horizon=240)
def cond_entropy(ctx):
    """Entropía de w_n condicionada a la celda de ξ̂, con IC bootstrap."""

    config = ctx.config
    rows = []
    undersampled = 0
    for n in config.n_list:
        report = conditional_entropy_proxy(
            ctx.mu, n, config.trials, config.bins, config.horizon, config.seed, config.workers, ctx.xi_settings
        )
        undersampled += report.undersampled_bins
        rows.append((n, report.proxy, report.ci_low, report.ci_high, report.bins))
    ctx.write_csv("cond_entropy.csv", _COND_HEADER, rows)

    p_a, p_e = ctx.mu.weight_of(ctx.a), ctx.mu.weight_of(IDENTITY)
    ctx.summary.update(
        bernoulli_entropy=bernoulli_entropy(p_a, p_e) if p_a and p_e else None,
        undersampled_bins=undersampled,
    )
