"""Excepciones de dominio.

Todas heredan de ``ValueError`` para que los llamadores que ya capturan
``ValueError`` (formularios, CLI) sigan funcionando sin cambios.
"""


class ArithmeticDomainError(ValueError):
    """División por cero o racional mal formado."""


class CircleMapError(ValueError):
    """Un mapa por trozos viola continuidad, grado uno o biyectividad."""


class DataFileError(ValueError):
    """Fichero de generadores, relaciones o medida inválido."""


class CollectionTooLargeError(ValueError):
    """Colección con más tiempos distinguidos que el tope de enumeración."""


class CalibrationError(ValueError):
    """La calibración del valor objetivo no deja f̂(e) lejos de cero."""
