"""Aplicación principal y configuración inicial.

La factory prepara una app de Flask sin vistas: sirve de contexto de
configuración y logging para los subcomandos de experimentos registrados
por los blueprints. Los valores por defecto pueden sobrescribirse por
entorno (``CIRCLEWALK_*``), por fichero JSON y por opciones de línea de
comandos, en ese orden.
"""

import json
import logging
import os

from babel.core import UnknownLocaleError
from babel.numbers import format_decimal
from flask import Flask, current_app

__version__ = "1.0.0"

_DEFAULT_LOCALE = os.getenv("CIRCLEWALK_LOCALE", "es_ES")

# Variable de entorno -> clave de configuración (con su conversión).
_ENV_KEYS = {
    "CIRCLEWALK_SEED": ("seed", int),
    "CIRCLEWALK_TRIALS": ("trials", int),
    "CIRCLEWALK_HORIZON": ("horizon", int),
    "CIRCLEWALK_WORKERS": ("workers", int),
    "CIRCLEWALK_OUT_DIR": ("out", str),
    "CIRCLEWALK_CHECKPOINT_INTERVAL": ("checkpoint_interval", int),
    "CIRCLEWALK_GENERATORS": ("generators", str),
    "CIRCLEWALK_MEASURE": ("measure", str),
}

RUN_DEFAULTS = {
    "generators": None,
    "measure": None,
    "seed": 0,
    "trials": 200,
    "horizon": 240,
    "workers": 1,
    "out": "resultados",
    "checkpoint_interval": 16,
}


def _get_bool_env(var_name: str, default: bool) -> bool:
    """Convierte variables de entorno en booleanos de forma segura."""
    value = os.getenv(var_name)
    if value is None:
        return default
    return value.lower() in {"1", "true", "t", "yes", "y"}


def _env_overrides() -> dict:
    """Valores de ejecución presentes en el entorno (sin validar: el formulario lo hará)."""

    overrides = {}
    for var_name, (key, cast) in _ENV_KEYS.items():
        raw = os.getenv(var_name)
        if raw is None or raw == "":
            continue
        try:
            overrides[key] = cast(raw)
        except ValueError:
            overrides[key] = raw
    return overrides


def format_metric(value, digits: int = 4, locale: str | None = None) -> str:
    """Número legible para el resumen por consola respetando el locale (nunca se usa en CSV)."""

    if value is None:
        return "—"
    if locale is None:
        try:
            locale = current_app.config.get("LOCALE", _DEFAULT_LOCALE)
        except RuntimeError:
            locale = _DEFAULT_LOCALE
    try:
        return format_decimal(float(value), format="#,##0." + "#" * digits, locale=locale)
    except (UnknownLocaleError, ValueError):
        return f"{float(value):.{digits}g}"


def create_app(config_path: str | None = None, overrides: dict | None = None):
    """Factory de la aplicación Flask.

    ``config_path`` fija el fichero JSON por defecto de los subcomandos
    (también ``CIRCLEWALK_CONFIG``); ``overrides`` se aplica al final y lo
    usan las pruebas.
    """

    app = Flask(__name__)

    # Logging básico; el nivel se ajusta con LOG_LEVEL.
    logging.basicConfig(
        level=os.getenv("LOG_LEVEL", "INFO"),
        format="%(asctime)s - %(levelname)s - %(message)s",
    )

    app.config.setdefault("RUN_DEFAULTS", dict(RUN_DEFAULTS))
    app.config.setdefault("RUN_ENV", _env_overrides())
    app.config.setdefault("LOCALE", _DEFAULT_LOCALE)
    app.config.setdefault("CONFIG_FILE", config_path or os.getenv("CIRCLEWALK_CONFIG"))
    # Desactivable para ejecuciones silenciosas (p. ej. en scripts de CI).
    app.config.setdefault("ECHO_SUMMARY", _get_bool_env("CIRCLEWALK_ECHO_SUMMARY", True))
    app.config.setdefault("VERSION", __version__)
    if overrides:
        app.config.update(overrides)

    # Los blueprints importan utilidades de este módulo; se registran al final
    # dentro del contexto para evitar imports circulares.
    with app.app_context():
        from .blueprints import register_blueprints

        register_blueprints(app)
    return app


def load_config_file(path) -> dict:
    """Lee el fichero JSON de configuración (un único objeto)."""

    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    if not isinstance(payload, dict):
        raise ValueError("el fichero de configuración debe contener un objeto JSON")
    return payload
