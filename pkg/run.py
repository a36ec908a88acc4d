"""Punto de entrada: ``python run.py <subcomando> [opciones]``."""

from flask.cli import FlaskGroup

from circlewalk import create_app


def _create_app():
    return create_app()


cli = FlaskGroup(
    name="circlewalk",
    create_app=_create_app,
    add_default_commands=False,
    load_dotenv=False,
    help="Experimentos de paseos aleatorios en el grupo de Thompson T.",
)


if __name__ == "__main__":
    cli()
