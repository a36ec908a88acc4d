"""Subcomandos de álgebra exacta: relaciones, comprobaciones de exactitud y exportación de trayectorias."""

import click
from flask import Blueprint

from ..services.thompson import exactness_check, orbit_density, verify_relation
from ..services.walk_engine import export_trajectories

from .helpers import experiment, run_options

algebra_bp = Blueprint("algebra", __name__, cli_group=None)

_RELATIONS_HEADER = ("relation", "identity")
_EXACTNESS_HEADER = ("check", "failures")
_TRAJECTORIES_HEADER = ("trial", "step", "increment")


@algebra_bp.cli.command("verify-relations")
@run_options
@click.option("--words", default=None, help="Palabras aleatorias para las pruebas de exactitud.")
@click.option("--max-length", "max_length", default=None, help="Longitud máxima de las palabras.")
@experiment(
    "verify-relations",
    outputs={"relations.csv": _RELATIONS_HEADER, "exactness.csv": _EXACTNESS_HEADER},
    words=1000,
    max_length=12,
)
def verify_relations(ctx):
    """Comprueba las relaciones del conjunto generador y la exactitud del álgebra."""

    generators = ctx.generators
    results = [(" ".join(word), verify_relation(word, generators)) for word in generators.relations]
    ctx.write_csv("relations.csv", _RELATIONS_HEADER, results)

    config = ctx.config
    report = exactness_check(generators, config.words, config.max_length, triples=200, seed=config.seed)
    ctx.write_csv("exactness.csv", _EXACTNESS_HEADER, sorted(report.failures.items()))

    density = orbit_density(generators, words=config.words, seed=config.seed)
    failed_relations = sum(not ok for _, ok in results)
    ctx.summary.update(
        relations=len(results),
        failed_relations=failed_relations,
        exact=report.ok,
        orbit_covered=density.covered_fraction,
        in_thompson_T=generators.in_thompson_T,
    )
    if failed_relations or not report.ok:
        ctx.summary["failed"] = f"relaciones={failed_relations} exactitud={report.failures}"


@algebra_bp.cli.command("trajectories")
@run_options
@experiment("trajectories", outputs={"trajectories.csv": _TRAJECTORIES_HEADER}, trials=10, horizon=60)
def trajectories(ctx):
    """Exporta los incrementos de cada ensayo (etiqueta del átomo o huella del mapa)."""

    config = ctx.config
    rows = export_trajectories(ctx.mu, config.horizon, config.trials, config.seed, config.workers)
    ctx.write_csv("trajectories.csv", _TRAJECTORIES_HEADER, rows)
    ctx.summary.update(trials=config.trials, horizon=config.horizon)
