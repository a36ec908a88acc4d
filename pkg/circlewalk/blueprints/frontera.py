"""Subcomandos sobre la frontera del círculo: contracción, ξ̂, medida estacionaria y visitas."""

import json
from fractions import Fraction

import click
from flask import Blueprint

from ..services.boundary_stats import (
    boundary_convergence_curve,
    conditional_increment_frequency,
    contract_interval_into,
    contraction_curve,
    pushforward_check,
    stationarity_check,
    xi_visit_fraction,
)
from ..services.circle_map import map_to_json, smallest_interval_containing_support
from ..services.thompson import contracting_conjugators, remark_element

from .helpers import experiment, run_options

frontera_bp = Blueprint("frontera", __name__, cli_group=None)

_CURVE_HEADER = ("n", "mean_distance", "ci_low", "ci_high")
_HISTOGRAM_HEADER = ("bin_left", "bin_right", "count")
_CHECK_HEADER = ("bin_left", "bin_right", "xi_count", "pushed_count")
_VISIT_HEADER = ("n", "fraction", "sigma", "nu_bar", "nu_bar_sigma", "bound_holds")
_RN_HEADER = ("n", "numerator", "denominator", "frequency", "expected", "sigma", "z", "within_3sigma")
_INTERVAL_HEADER = ("found", "steps", "trial", "image_left", "image_right", "element")
_CONJUGATORS_HEADER = ("n", "found", "support_diameter", "conjugator", "element")


def _curve_rows(report):
    return [(row.n, float(row.mean), row.ci_low, row.ci_high) for row in report.rows]


def _fit_summary(ctx, report):
    fit = report.fit
    ctx.summary.update(
        lambda_hat=fit.lambda_hat if fit else None,
        slope_ci_low=fit.slope_ci[0] if fit else None,
        slope_ci_high=fit.slope_ci[1] if fit else None,
        r_squared=fit.r_squared if fit else None,
        trials_used=report.trials_used,
        failures=report.failures,
        collisions=sum(row.collisions for row in report.rows),
    )


@frontera_bp.cli.command("contract-curve")
@run_options
@click.option("--x", default=None, help="Primer punto (racional).")
@click.option("--y", default=None, help="Segundo punto (racional).")
@click.option("--n-max", "n_max", default=None)
@click.option("--fit-start", "fit_start", default=None, help="Inicio de la ventana de ajuste.")
@experiment("contract-curve", outputs={"contract_curve.csv": _CURVE_HEADER}, n_max=60)
def contract_curve(ctx):
    """Media de d(w_n⁻¹(x), w_n⁻¹(y)) y tasa exponencial ajustada."""

    config = ctx.config
    report = contraction_curve(
        ctx.mu,
        config.x,
        config.y,
        config.n_max,
        config.trials,
        config.seed,
        config.workers,
        fit_window=(config.fit_start, None),
        checkpoint_interval=config.checkpoint_interval,
    )
    ctx.write_csv("contract_curve.csv", _CURVE_HEADER, _curve_rows(report))
    _fit_summary(ctx, report)


@frontera_bp.cli.command("boundary-curve")
@run_options
@click.option("--x", default=None)
@click.option("--n-max", "n_max", default=None)
@click.option("--fit-start", "fit_start", default=None)
@experiment("boundary-curve", outputs={"boundary_curve.csv": _CURVE_HEADER}, n_max=60, horizon=240)
def boundary_curve(ctx):
    """Media de d(w_n(x), ξ̂) con ξ̂ estimado a horizonte ``--horizon``."""

    config = ctx.config
    report = boundary_convergence_curve(
        ctx.mu,
        config.x,
        config.n_max,
        config.trials,
        config.horizon,
        config.seed,
        config.workers,
        ctx.xi_settings,
        fit_window=(config.fit_start, None),
        checkpoint_interval=config.checkpoint_interval,
    )
    ctx.write_csv("boundary_curve.csv", _CURVE_HEADER, _curve_rows(report))
    _fit_summary(ctx, report)
    evaluated = report.trials_used + report.excluded_not_concentrated
    ctx.summary["not_concentrated_fraction"] = report.excluded_not_concentrated / evaluated if evaluated else 0.0
    ctx.summary["xi_slack"] = config.horizon - config.n_max


@frontera_bp.cli.command("stationary")
@run_options
@click.option("--bins", default=None)
@click.option("--pushforward/--no-pushforward", "pushforward", default=None, help="Contrasta también w_N(malla) bajo μ̄.")
@experiment(
    "stationary",
    outputs={"stationary.csv": _HISTOGRAM_HEADER, "stationary_check.csv": _CHECK_HEADER},
    horizon=240,
)
def stationary(ctx):
    """Histograma de ξ̂ y autoconsistencia ν = μ∗ν celda a celda."""

    config = ctx.config
    report = stationarity_check(ctx.mu, config.horizon, config.trials, config.bins, config.seed, config.workers, ctx.xi_settings)
    first, second = report.first, report.second
    edges = [first.bin_edges(i) for i in range(first.bins)]
    ctx.write_csv("stationary.csv", _HISTOGRAM_HEADER, [(*edge, count) for edge, count in zip(edges, first.counts)])
    ctx.write_csv(
        "stationary_check.csv",
        _CHECK_HEADER,
        [(*edge, c1, c2) for edge, c1, c2 in zip(edges, first.counts, second.counts)],
    )
    ctx.summary.update(
        max_z=report.max_z,
        passed=report.passed,
        all_bins_positive=all(count > 0 for count in first.counts),
        not_concentrated=first.not_concentrated,
    )
    if config.pushforward:
        pushed = pushforward_check(ctx.mu, config.horizon, config.trials, config.bins, config.seed, config.workers, ctx.xi_settings)
        rows = [
            (*pushed.first.bin_edges(i), pushed.first.counts[i], pushed.second.counts[i])
            for i in range(pushed.first.bins)
        ]
        ctx.write_csv("pushforward.csv", ("bin_left", "bin_right", "xi_count", "grid_count"), rows)
        ctx.summary.update(pushforward_max_z=pushed.max_z, pushforward_passed=pushed.passed)


@frontera_bp.cli.command("visit-fraction")
@run_options
@click.option("--arc", default=None, help="Arco J como 'izquierda,derecha'.")
@click.option("--n", default=None)
@click.option("--bins", default=None)
@experiment("visit-fraction", outputs={"visit_fraction.csv": _VISIT_HEADER}, horizon=240)
def visit_fraction(ctx):
    """Fracción de tiempos con ξ̂ ∈ w_k(J) frente a 2ν̄̂(J)."""

    config = ctx.config
    arc = config.arc or smallest_interval_containing_support(remark_element(Fraction(1, 2), 4))
    report = xi_visit_fraction(
        ctx.mu, arc, config.n, config.trials, config.horizon, config.seed, config.workers, ctx.xi_settings, config.bins
    )
    ctx.write_csv(
        "visit_fraction.csv",
        _VISIT_HEADER,
        [(config.n, report.fraction, report.sigma, report.nu_bar, report.nu_bar_sigma, report.bound_holds)],
    )
    ctx.summary.update(fraction=report.fraction, nu_bar=report.nu_bar, bound_holds=report.bound_holds)


@frontera_bp.cli.command("rn-check")
@run_options
@click.option("--a-word", "a_word", default=None, help="Palabra del elemento a.")
@click.option("--arc", default=None)
@click.option("--n", default=None)
@experiment("rn-check", outputs={"rn_check.csv": _RN_HEADER}, horizon=240)
def rn_check(ctx):
    """Frecuencia condicional de g_{k+1} = a fuera de J frente a μ(a)."""

    config = ctx.config
    report = conditional_increment_frequency(
        ctx.mu, ctx.a, config.arc, config.n, config.trials, config.horizon, config.seed, config.workers, ctx.xi_settings
    )
    ctx.write_csv(
        "rn_check.csv",
        _RN_HEADER,
        [
            (
                config.n,
                report.numerator,
                report.denominator,
                report.frequency,
                report.expected,
                report.sigma,
                report.z,
                report.within_3sigma,
            )
        ],
    )
    ctx.summary.update(frequency=report.frequency, expected=report.expected, z=report.z, within_3sigma=report.within_3sigma)


@frontera_bp.cli.command("contract-interval")
@run_options
@click.option("--source-arc", "source_arc", default=None, help="Intervalo I (por defecto, el soporte de a).")
@click.option("--arc", default=None, help="Intervalo destino J.")
@click.option("--a-word", "a_word", default=None)
@click.option("--max-steps", "max_steps", default=None)
@experiment("contract-interval", outputs={"contract_interval.csv": _INTERVAL_HEADER}, trials=50, arc="1/4,5/16")
def contract_interval(ctx):
    """Busca w_n⁻¹ con w_n⁻¹(I) ⊆ J y certifica el resultado exactamente."""

    config = ctx.config
    source = config.source_arc or smallest_interval_containing_support(ctx.a)
    certificate = contract_interval_into(ctx.mu, source, config.arc, config.max_steps, config.trials, config.seed)
    if certificate is None:
        rows = [(False, None, None, None, None, None)]
    else:
        image = source.image(certificate.element)
        element = json.dumps(map_to_json(certificate.element), separators=(",", ":"))
        rows = [(True, certificate.steps, certificate.trial, image.left, image.right, element)]
    ctx.write_csv("contract_interval.csv", _INTERVAL_HEADER, rows)
    ctx.summary.update(found=certificate is not None, steps=certificate.steps if certificate else None)


@frontera_bp.cli.command("conjugators")
@run_options
@click.option("--a-word", "a_word", default=None)
@click.option("--n-list", "n_list", default=None, help="Valores de n separados por comas.")
@click.option("--max-steps", "max_steps", default=None)
@experiment("conjugators", outputs={"conjugators.csv": _CONJUGATORS_HEADER}, trials=50, n_list=(2, 4, 8))
def conjugators(ctx):
    """Conjugados b_n = t_n a t_n⁻¹ con soporte de diámetro ≤ 1/n."""

    config = ctx.config
    results = contracting_conjugators(ctx.mu, ctx.a, config.n_list, config.max_steps, config.trials, config.seed)
    rows = []
    for result in results:
        found = result.element is not None
        rows.append(
            (
                result.n,
                found,
                result.support_diameter,
                json.dumps(map_to_json(result.conjugator), separators=(",", ":")) if found else None,
                json.dumps(map_to_json(result.element), separators=(",", ":")) if found else None,
            )
        )
    ctx.write_csv("conjugators.csv", _CONJUGATORS_HEADER, rows)
    ctx.summary.update(found=sum(result.element is not None for result in results), requested=len(results))

