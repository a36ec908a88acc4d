"""Funciones compartidas entre blueprints para mantener reglas coherentes.

Se centralizan las opciones comunes, la combinación de capas de
configuración, la escritura de CSV y manifiestos y la traducción de
errores de dominio a salidas de una sola línea.
"""

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import wraps
from pathlib import Path

import click
from flask import current_app
from werkzeug.datastructures import MultiDict

from .. import format_metric, load_config_file
from ..forms import RunConfig, RunConfigForm
from ..services.boundary_stats import XiSettings
from ..services.circle_map import Arc, PiecewiseAffineCircleMap, smallest_interval_containing_support
from ..services.errors import DataFileError
from ..services.exact_arith import format_rational
from ..services.measure import StepDistribution, load_measure, measure_summary, moment
from ..services.thompson import GeneratorSet, load_generators, word_to_element


class InvalidConfigError(click.ClickException):
    """Error de validación: ``invalid-config field=<campo> reason=<motivo>``."""

    exit_code = 2

    def __init__(self, field_name: str, reason: str):
        reason = " ".join(str(reason).split())
        super().__init__(f"invalid-config field={field_name} reason={reason}")

    def show(self, file=None):
        click.echo(self.format_message(), err=True)


class RunFailedError(click.ClickException):
    """Fallo en tiempo de ejecución: ``run-failed subcommand=<nombre> reason=<motivo>``."""

    exit_code = 1

    def __init__(self, subcommand: str, reason: str):
        reason = " ".join(str(reason).split())
        super().__init__(f"run-failed subcommand={subcommand} reason={reason}")

    def show(self, file=None):
        click.echo(self.format_message(), err=True)


_COMMON_OPTIONS = (
    click.option("--config", "config_file", default=None, help="Fichero JSON de configuración."),
    click.option("--generators", default=None, help="Fichero de generadores (por defecto el de T)."),
    click.option("--measure", default=None, help="Fichero de medida de paso."),
    click.option("--seed", default=None, help="Semilla base (0..2^64-1)."),
    click.option("--trials", default=None, help="Número de ensayos."),
    click.option("--horizon", default=None, help="Longitud de las trayectorias."),
    click.option("--workers", default=None, help="Procesos en paralelo."),
    click.option("--out", default=None, help="Directorio de salida."),
)


def run_options(command):
    """Añade las opciones comunes a todos los subcomandos."""

    for option in reversed(_COMMON_OPTIONS):
        command = option(command)
    return command


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_csv_row(writer, values):
    """Escribe una fila CSV con el formato numérico fijo (racionales exactos, floats a 12 cifras)."""

    writer.writerow([_format_cell(val) for val in values])


@dataclass
class RunContext:
    subcommand: str
    config: RunConfig
    generators: GeneratorSet
    mu: StepDistribution
    out_dir: Path
    started: float = field(default_factory=time.perf_counter)
    outputs: dict[str, str] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def element(self, word) -> PiecewiseAffineCircleMap:
        return word_to_element(list(word), self.generators)

    @property
    def a(self) -> PiecewiseAffineCircleMap:
        return self.element(self.config.a_word)

    @property
    def xi_settings(self) -> XiSettings:
        return XiSettings(self.config.grid, self.config.delta, self.config.threshold)

    def support_arc(self) -> Arc:
        """J: el arco dado o el menor intervalo que contiene el soporte de a."""

        return self.config.arc or smallest_interval_containing_support(self.a)

    def write_csv(self, name: str, header, rows) -> Path:
        path = self.out_dir / name
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                write_csv_row(writer, row)
        self.outputs[name] = hashlib.sha256(path.read_bytes()).hexdigest()
        current_app.logger.info("csv-escrito fichero=%s", path)
        return path

    def write_manifest(self) -> Path:
        manifest = {
            "subcommand": self.subcommand,
            "config": self.config.to_json(),
            "seed": self.config.seed,
            "version": current_app.config["VERSION"],
            "wall_time_s": round(time.perf_counter() - self.started, 3),
            "provenance": {
                "generators": self.generators.provenance,
                "in_thompson_T": self.generators.in_thompson_T,
                "measure": self.config.measure or "bundled:measure_lazy_t.json",
            },
            "measure": measure_summary(self.mu),
            "measure_moment": format_rational(moment(self.mu)),
            "outputs": self.outputs,
            "summary": {key: _manifest_value(value) for key, value in self.summary.items()},
        }
        path = self.out_dir / f"{self.subcommand}.manifest.json"
        path.write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        return path


def _manifest_value(value):
    if isinstance(value, (Fraction, float)):
        return _format_cell(value)
    if isinstance(value, (list, tuple)):
        return [_manifest_value(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _manifest_value(v) for k, v in value.items()}
    return value


def _merged_settings(config_file, defaults: dict, flags: dict) -> dict:
    merged = dict(current_app.config["RUN_DEFAULTS"])
    merged.update(defaults)
    merged.update(current_app.config["RUN_ENV"])
    config_file = config_file or current_app.config.get("CONFIG_FILE")
    if config_file:
        try:
            payload = load_config_file(config_file)
        except FileNotFoundError:
            raise InvalidConfigError("config", f"no existe {config_file}") from None
        except ValueError as exc:
            raise InvalidConfigError("config", exc) from None
        unknown = sorted(set(payload) - set(RunConfig.keys()))
        if unknown:
            raise InvalidConfigError(unknown[0], "clave desconocida")
        merged.update(payload)
    merged.update({key: value for key, value in flags.items() if value is not None})
    return merged


def _form_value(key: str, value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, (list, tuple)):
        return " ".join(map(str, value)) if key.endswith("_word") else ",".join(map(str, value))
    return str(value)


def build_context(subcommand: str, defaults: dict, options: dict) -> RunContext:
    """Combina las capas de configuración, valida y carga generadores y medida."""

    options = dict(options)
    config_file = options.pop("config_file", None)
    merged = _merged_settings(config_file, defaults, options)
    formdata = MultiDict({key: _form_value(key, value) for key, value in merged.items() if value is not None})
    form = RunConfigForm(formdata)
    if not form.validate():
        field_name, messages = next(iter(form.errors.items()))
        raise InvalidConfigError(field_name, messages[0])
    config = form.to_config()
    try:
        generators = load_generators(config.generators or None)
    except DataFileError as exc:
        raise InvalidConfigError("generators", exc) from None
    try:
        mu = load_measure(config.measure or None, generators)
    except DataFileError as exc:
        raise InvalidConfigError("measure", exc) from None
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    current_app.logger.info("ejecucion subcomando=%s semilla=%s ensayos=%s", subcommand, config.seed, config.trials)
    return RunContext(subcommand=subcommand, config=config, generators=generators, mu=mu, out_dir=out_dir)


def write_empty_outputs(ctx: RunContext, outputs: dict) -> None:
    """Con ``trials = 0`` cada CSV declarado queda sólo con su cabecera."""

    for name, header in outputs.items():
        ctx.write_csv(name, header, ())
    ctx.summary["trials"] = 0
    current_app.logger.info("sin-ensayos subcomando=%s ficheros=%s", ctx.subcommand, len(outputs))


def experiment(subcommand: str, outputs: dict | None = None, **defaults):
    """Decorador de subcomando: construye el contexto, traduce errores y escribe el manifiesto.

    La función decorada recibe el ``RunContext``, escribe sus CSV y rellena
    ``ctx.summary``; los valores ``defaults`` son los propios del subcomando.
    ``outputs`` (nombre de CSV -> cabecera) son los ficheros que se escriben
    vacíos, sin llamar a la función, cuando ``trials = 0``.
    """

    outputs = dict(outputs or {})

    def decorator(f):
        @wraps(f)
        def wrapped(**options):
            ctx = build_context(subcommand, defaults, options)
            try:
                if ctx.config.trials == 0 and outputs:
                    write_empty_outputs(ctx, outputs)
                else:
                    f(ctx)
            except click.ClickException:
                raise
            except ValueError as exc:
                current_app.logger.error("Fallo en %s: %s", subcommand, exc)
                raise RunFailedError(subcommand, exc) from None
            ctx.write_manifest()
            echo_summary(ctx)
            if ctx.summary.get("failed"):
                raise RunFailedError(subcommand, ctx.summary["failed"])

        return wrapped

    return decorator


def echo_summary(ctx: RunContext) -> None:
    """Línea legible con el locale configurado; el CSV es la salida canónica."""

    if not current_app.config.get("ECHO_SUMMARY", True):
        return
    parts = []
    for key, value in ctx.summary.items():
        if key == "failed":
            continue
        if isinstance(value, bool) or value is None:
            parts.append(f"{key}={value}")
        elif isinstance(value, (int, float, Fraction)):
            parts.append(f"{key}={format_metric(value)}")
    click.echo(f"{ctx.subcommand}: " + " ".join(parts))
