"""Registro centralizado de blueprints.

Cada blueprint agrupa los subcomandos de un área (álgebra, frontera,
dominación, entropía y cortes) y no expone rutas: sólo comandos de CLI
registrados en el grupo raíz de la app.
"""

from flask import Flask

from .algebra import algebra_bp
from .dominacion import dominacion_bp
from .entropia import entropia_bp
from .frontera import frontera_bp
from .quiebres import quiebres_bp


def register_blueprints(app: Flask) -> None:
    """Adjunta todos los blueprints a la aplicación Flask."""

    app.register_blueprint(algebra_bp)
    app.register_blueprint(frontera_bp)
    app.register_blueprint(dominacion_bp)
    app.register_blueprint(entropia_bp)
    app.register_blueprint(quiebres_bp)
