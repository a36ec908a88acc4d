"""Subcomandos de dominación de intervalos, contadores Z/W y colecciones ξ-buenas."""

import click
import numpy as np
from flask import Blueprint, current_app

from ..services.domination import (
    CALIBRATION_FILE,
    Calibration,
    calibration_payload,
    domination_batch,
    load_calibration,
    run_calibration,
    save_calibration,
    sparsity_search,
    z_batch,
)

from .helpers import experiment, run_options

dominacion_bp = Blueprint("dominacion", __name__, cli_group=None)

_Z_HEADER = ("trial", "n", "Z")
_SPARSITY_HEADER = ("s", "probability", "sigma", "trials")
_W_HEADER = ("trial", "n", "Z", "W", "k_extracted", "satisfactory_flag")
_COLLECTIONS_HEADER = ("trial", "n", "k_extracted", "k_checked", "satisfactory", "arcs_consistent")
_CALIBRATION_HEADER = ("quantity", "n", "mean_over_n", "floor")


def _floor_of(calibration: Calibration, table: str, n: int):
    return getattr(calibration, table).get(n)


@dominacion_bp.cli.command("domination-z")
@run_options
@click.option("--arc", default=None, help="Arco J (por defecto, el soporte de a).")
@click.option("--a-word", "a_word", default=None)
@click.option("--sparsity", default=None)
@click.option("--n-list", "n_list", default=None)
@click.option("--s-max", "s_max", default=None, help="Mayor sparsity a probar en la búsqueda.")
@click.option("--j-max", "j_max", default=None)
@experiment("domination-z", outputs={"domination_z.csv": _Z_HEADER, "sparsity.csv": _SPARSITY_HEADER}, n_list=(30, 60))
def domination_z(ctx):
    """Z^J_{n,s} por ensayo y búsqueda de la sparsity con ℙ[dominación] ≥ 1/24."""

    config = ctx.config
    arc = ctx.support_arc()
    counts = z_batch(ctx.mu, arc, config.sparsity, config.n_list, config.trials, config.seed, config.workers)
    rows = [
        (trial, n, z)
        for trial, values in enumerate(counts)
        if values is not None
        for n, z in zip(config.n_list, values)
    ]
    ctx.write_csv("domination_z.csv", _Z_HEADER, rows)

    calibration = load_calibration()
    ctx.summary["floors_calibrated"] = calibration.calibrated
    valid = [values for values in counts if values is not None]
    for position, n in enumerate(config.n_list):
        mean = float(np.mean([values[position] for values in valid])) / n if valid else 0.0
        floor = _floor_of(calibration, "z_floor", n)
        ctx.summary[f"mean_z_over_n_{n}"] = mean
        if floor is not None:
            ctx.summary[f"above_floor_{n}"] = mean > floor

    search = sparsity_search(ctx.mu, arc, config.s_max, config.j_max, config.trials, config.seed, config.workers)
    ctx.write_csv(
        "sparsity.csv",
        _SPARSITY_HEADER,
        [(e.s, e.probability, e.sigma, e.trials) for e in search.estimates],
    )
    ctx.summary.update(sparsity=search.s, linear_constant=search.c)


def _domination_run(ctx):
    config = ctx.config
    return domination_batch(
        ctx.mu,
        ctx.a,
        ctx.support_arc(),
        config.sparsity,
        config.n,
        config.trials,
        config.seed,
        config.workers,
        xi_horizon=config.xi_horizon,
        settings=ctx.xi_settings,
        truncation=config.collection_cap,
    )


@dominacion_bp.cli.command("domination-w")
@run_options
@click.option("--arc", default=None)
@click.option("--a-word", "a_word", default=None)
@click.option("--sparsity", default=None)
@click.option("--n", default=None)
@click.option("--xi-horizon", "xi_horizon", default=None, help="Horizonte de estimación de ξ̂ (por defecto 4n).")
@experiment("domination-w", outputs={"domination_w.csv": _W_HEADER})
def domination_w(ctx):
    """Z, W y colección ξ-buena por ensayo; verifica W_n = #{i ≥ 2 en la colección de longitud n+1}."""

    summary = _domination_run(ctx)
    rows = [
        (trial, row.n, row.z, row.w, row.k_extracted, row.satisfactory)
        for trial, row in enumerate(summary.rows)
        if row is not None
    ]
    ctx.write_csv("domination_w.csv", _W_HEADER, rows)
    calibration = load_calibration()
    floor = _floor_of(calibration, "w_floor", ctx.config.n)
    ctx.summary.update(
        floors_calibrated=calibration.calibrated,
        mean_z_over_n=summary.mean_z_over_n,
        mean_w_over_n=summary.mean_w_over_n,
        above_floor=summary.mean_w_over_n > floor if floor is not None else None,
        cross_check_failures=summary.cross_check_failures,
        horizon=summary.horizon,
    )
    if summary.cross_check_failures:
        ctx.summary["failed"] = f"cross-check W/colección falló en {summary.cross_check_failures} ensayos"


@dominacion_bp.cli.command("good-collections")
@run_options
@click.option("--arc", default=None)
@click.option("--a-word", "a_word", default=None)
@click.option("--n", default=None)
@click.option("--collection-cap", "collection_cap", default=None, help="Tiempos distinguidos verificados (≤ 16).")
@click.option("--xi-horizon", "xi_horizon", default=None)
@experiment("good-collections", outputs={"good_collections.csv": _COLLECTIONS_HEADER})
def good_collections(ctx):
    """Enumeración exhaustiva 2^k de las colecciones ξ-buenas (truncadas) de cada ensayo."""

    summary = _domination_run(ctx)
    rows = [
        (trial, row.n, row.k_extracted, row.k_checked, row.satisfactory, row.arcs_consistent)
        for trial, row in enumerate(summary.rows)
        if row is not None
    ]
    ctx.write_csv(
        "good_collections.csv",
        _COLLECTIONS_HEADER,
        rows,
    )
    valid = [row for row in summary.rows if row is not None]
    violations = sum(not (row.satisfactory and row.arcs_consistent) for row in valid)
    ctx.summary.update(collections=len(valid), violations=violations, failures=summary.failures)
    if violations:
        ctx.summary["failed"] = f"{violations} colecciones no satisfactorias"


@dominacion_bp.cli.command("calibrate")
@run_options
@click.option("--a-word", "a_word", default=None)
@click.option("--sparsity", default=None)
@click.option("--n-list", "n_list", default=None)
@click.option("--install/--no-install", "install", default=None, help="Reemplaza también el calibration.json empaquetado.")
@experiment("calibrate", outputs={"calibration.csv": _CALIBRATION_HEADER}, trials=2000, n_list=(30, 60))
def calibrate(ctx):
    """Recalcula las cotas de Ê[Z]/n y Ê[W]/n (la mitad de la media medida) y escribe calibration.json."""

    config = ctx.config
    run = run_calibration(
        ctx.mu,
        ctx.a,
        ctx.support_arc(),
        config.sparsity,
        config.n_list,
        config.trials,
        config.seed,
        config.workers,
        settings=ctx.xi_settings,
        source=f"calibrate v{current_app.config['VERSION']}",
    )
    ctx.write_csv("calibration.csv", _CALIBRATION_HEADER, run.rows)

    payload = calibration_payload(run.calibration, config.a_word, config.sparsity)
    save_calibration(payload, ctx.out_dir / CALIBRATION_FILE)
    if config.install:
        ctx.summary["installed"] = str(save_calibration(payload))
    ctx.summary.update({f"z_floor_{n}": floor for n, floor in run.calibration.z_floor.items()})
    ctx.summary.update({f"w_floor_{n}": floor for n, floor in run.calibration.w_floor.items()})
