"""Álgebra exacta de homeomorfismos afines a trozos del círculo que preservan orientación.

Representación: puntos de corte ordenados ``b_0 < … < b_{m-1}`` en ``[0, 1)``,
pendientes ``a_i`` sobre ``[b_i, b_{i+1})`` (índices módulo m) y el ancla
``g(b_0)``. La forma canónica no tiene cortes removibles; una rotación se
guarda como ``((0,), (1,), ángulo)``. Igualdad y hash dependen sólo de esos
tres campos, por lo que dos mapas son iguales como funciones si y sólo si sus
formas canónicas coinciden.
"""

from __future__ import annotations

import hashlib
import json
import logging
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

from .errors import CircleMapError
from .exact_arith import format_rational, in_arc, is_dyadic, is_power_of_two, parse_rational, to_circle

_logger = logging.getLogger(__name__)


class _FullCircle:
    """Valor distinguido para soportes que cubren todo S¹ (no es un Arc)."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "FULL_CIRCLE"


FULL_CIRCLE = _FullCircle()


@dataclass(frozen=True)
class Arc:
    """Arco cerrado recorrido en sentido antihorario de ``left`` a ``right``.

    ``left == right`` representa un arco degenerado (un punto); el círculo
    completo no es representable.
    """

    left: Fraction
    right: Fraction

    def __post_init__(self):
        object.__setattr__(self, "left", to_circle(self.left))
        object.__setattr__(self, "right", to_circle(self.right))

    @property
    def length(self) -> Fraction:
        return (self.right - self.left) % 1

    @property
    def midpoint(self) -> Fraction:
        return to_circle(self.left + self.length / 2)

    def contains_point(self, x: Fraction) -> bool:
        return in_arc(x, self.left, self.length)

    def contains_arc(self, other: "Arc") -> bool:
        offset = (other.left - self.left) % 1
        return offset + other.length <= self.length

    def interior_contains(self, other: "Arc") -> bool:
        offset = (other.left - self.left) % 1
        return offset > 0 and offset + other.length < self.length

    def is_disjoint(self, other: "Arc") -> bool:
        return not self.contains_point(other.left) and not other.contains_point(self.left)

    def image(self, g: "PiecewiseAffineCircleMap") -> "Arc":
        return Arc(g.evaluate(self.left), g.evaluate(self.right))

    def to_json(self) -> list[str]:
        return [format_rational(self.left), format_rational(self.right)]


@dataclass(frozen=True)
class Segment:
    """Trozo crudo: en ``[start, siguiente start)`` el mapa es ``image + slope·(x − start)``."""

    start: Fraction
    slope: Fraction
    image: Fraction


@dataclass(frozen=True)
class PiecewiseAffineCircleMap:
    breakpoints: tuple[Fraction, ...]
    slopes: tuple[Fraction, ...]
    anchor: Fraction

    def __hash__(self) -> int:
        return self._hash

    @cached_property
    def _hash(self) -> int:
        return hash((self.breakpoints, self.slopes, self.anchor))

    @cached_property
    def _starts(self) -> tuple[Fraction, ...]:
        # Imágenes levantadas de cada b_i; crecen desde anchor hasta anchor + 1.
        starts = [self.anchor]
        bps = self.breakpoints
        m = len(bps)
        for i in range(m - 1):
            starts.append(starts[-1] + self.slopes[i] * (bps[i + 1] - bps[i]))
        return tuple(starts)

    @property
    def is_rotation(self) -> bool:
        return len(self.breakpoints) == 1

    @property
    def is_identity(self) -> bool:
        return self.is_rotation and self.anchor == 0

    def _segment_index(self, x: Fraction) -> tuple[int, Fraction]:
        i = bisect_right(self.breakpoints, x) - 1
        if i < 0:
            return len(self.breakpoints) - 1, x + 1
        return i, x

    def evaluate(self, x) -> Fraction:
        x = to_circle(x)
        i, lifted = self._segment_index(x)
        return (self._starts[i] + self.slopes[i] * (lifted - self.breakpoints[i])) % 1

    __call__ = evaluate

    def preimage(self, y) -> Fraction:
        """Evalúa la inversa sin construirla."""

        lifted = self.anchor + (Fraction(y) - self.anchor) % 1
        i = bisect_right(self._starts, lifted) - 1
        return to_circle(self.breakpoints[i] + (lifted - self._starts[i]) / self.slopes[i])

    def slope_right(self, x) -> Fraction:
        i, _ = self._segment_index(to_circle(x))
        return self.slopes[i]

    def slope_left(self, x) -> Fraction:
        x = to_circle(x)
        i, _ = self._segment_index(x)
        if self.breakpoints[i] == x:
            return self.slopes[i - 1]
        return self.slopes[i]

    def true_breakpoints(self) -> tuple[Fraction, ...]:
        if self.is_rotation:
            return ()
        return self.breakpoints

    @cached_property
    def digest(self) -> str:
        payload = json.dumps(map_to_json(self), sort_keys=True)
        return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:16]


def _canonical(points: Sequence[Fraction], slopes: Sequence[Fraction], anchor: Fraction) -> PiecewiseAffineCircleMap:
    """Funde cortes removibles. ``points`` ordenados en [0,1); ``anchor`` es la imagen de points[0]."""

    m = len(points)
    kept = [i for i in range(m) if slopes[i] != slopes[i - 1]]
    if not kept:
        # Pendiente constante (=1): rotación, su ángulo es la imagen de 0.
        return rotation(anchor - points[0])
    if len(kept) == m:
        return PiecewiseAffineCircleMap(tuple(points), tuple(slopes), to_circle(anchor))
    image = anchor
    images = [anchor]
    for i in range(m - 1):
        image = image + slopes[i] * (points[i + 1] - points[i])
        images.append(image)
    return PiecewiseAffineCircleMap(
        tuple(points[i] for i in kept),
        tuple(slopes[i] for i in kept),
        to_circle(images[kept[0]]),
    )


def identity() -> PiecewiseAffineCircleMap:
    return IDENTITY


def rotation(angle) -> PiecewiseAffineCircleMap:
    return PiecewiseAffineCircleMap((Fraction(0),), (Fraction(1),), to_circle(angle))


IDENTITY = PiecewiseAffineCircleMap((Fraction(0),), (Fraction(1),), Fraction(0))


def canonicalize(segments: Iterable[Segment]) -> PiecewiseAffineCircleMap:
    """Construye la forma canónica a partir de trozos crudos, validando biyectividad."""

    raw = sorted(
        (Segment(to_circle(s.start), Fraction(s.slope), to_circle(s.image)) for s in segments),
        key=lambda s: s.start,
    )
    if not raw:
        raise CircleMapError("Se necesita al menos un trozo.")
    m = len(raw)
    total = Fraction(0)
    for i, seg in enumerate(raw):
        if seg.slope <= 0:
            raise CircleMapError(f"Pendiente no positiva {seg.slope} en {seg.start}.")
        nxt = raw[(i + 1) % m]
        length = (nxt.start - seg.start) % 1 or Fraction(1)
        if m > 1 and nxt.start == seg.start:
            raise CircleMapError(f"Corte repetido en {seg.start}.")
        if (seg.image + seg.slope * length - nxt.image) % 1 != 0:
            raise CircleMapError(f"Discontinuidad al final del trozo que empieza en {seg.start}.")
        total += seg.slope * length
    if total != 1:
        raise CircleMapError(f"El mapa no tiene grado uno (longitud de la imagen {total}).")
    return _canonical([s.start for s in raw], [s.slope for s in raw], raw[0].image)


def from_data(breakpoints: Sequence, slopes: Sequence, anchor) -> PiecewiseAffineCircleMap:
    """Valida y canonicaliza los tres campos de la representación."""

    bps = [parse_rational(b) for b in breakpoints]
    sls = [parse_rational(a) for a in slopes]
    if not bps or len(bps) != len(sls):
        raise CircleMapError("breakpoints y slopes deben tener la misma longitud no nula.")
    if any(not 0 <= b < 1 for b in bps):
        raise CircleMapError("Los cortes deben estar en [0, 1).")
    if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
        raise CircleMapError("Los cortes deben ser estrictamente crecientes.")
    image = parse_rational(anchor)
    segments = []
    for i, (b, a) in enumerate(zip(bps, sls)):
        segments.append(Segment(b, a, image))
        length = (bps[(i + 1) % len(bps)] - b) % 1 or Fraction(1)
        image = image + a * length
    result = canonicalize(segments)
    if result.breakpoints != tuple(bps) and len(bps) > 1:
        _logger.debug("Mapa no canónico en la entrada; se fusionaron cortes removibles.")
    return result


def evaluate(g: PiecewiseAffineCircleMap, x) -> Fraction:
    return g.evaluate(x)


def compose(g: PiecewiseAffineCircleMap, h: PiecewiseAffineCircleMap) -> PiecewiseAffineCircleMap:
    """Devuelve g∘h."""

    if h.is_rotation and g.is_rotation:
        return rotation(g.anchor + h.anchor)
    points = set(h.true_breakpoints())
    points.update(h.preimage(b) for b in g.true_breakpoints())
    ordered = sorted(points)
    slopes = [h.slope_right(p) * g.slope_right(h.evaluate(p)) for p in ordered]
    return _canonical(ordered, slopes, g.evaluate(h.evaluate(ordered[0])))


def invert(g: PiecewiseAffineCircleMap) -> PiecewiseAffineCircleMap:
    if g.is_rotation:
        return rotation(-g.anchor)
    triples = sorted(
        (start % 1, 1 / slope, bp) for start, slope, bp in zip(g._starts, g.slopes, g.breakpoints)
    )
    return _canonical([t[0] for t in triples], [t[1] for t in triples], triples[0][2])


def conjugate(t: PiecewiseAffineCircleMap, a: PiecewiseAffineCircleMap) -> PiecewiseAffineCircleMap:
    """t∘a∘t⁻¹."""

    return compose(compose(t, a), invert(t))


def breakpoints(g: PiecewiseAffineCircleMap) -> tuple[Fraction, ...]:
    """Puntos donde las pendientes lateral izquierda y derecha difieren (ordenados)."""

    return g.true_breakpoints()


def derivative_jump_ratio(g: PiecewiseAffineCircleMap, x) -> Fraction:
    return g.slope_right(x) / g.slope_left(x)


def _fixed_segments(g: PiecewiseAffineCircleMap) -> list[int]:
    return [
        i
        for i, (start, slope, bp) in enumerate(zip(g._starts, g.slopes, g.breakpoints))
        if slope == 1 and (start - bp) % 1 == 0
    ]


def support(g: PiecewiseAffineCircleMap):
    """Arcos maximales del cierre de ``{x : g(x) ≠ x}``; ``FULL_CIRCLE`` si no hay trozo fijo."""

    if g.is_rotation:
        return [] if g.is_identity else FULL_CIRCLE
    fixed = _fixed_segments(g)
    if not fixed:
        return FULL_CIRCLE
    m = len(g.breakpoints)
    arcs = []
    for position, i in enumerate(fixed):
        j = fixed[(position + 1) % len(fixed)]
        arcs.append(Arc(g.breakpoints[(i + 1) % m], g.breakpoints[j]))
    return sorted(arcs, key=lambda arc: arc.left)


def smallest_interval_containing_support(g: PiecewiseAffineCircleMap) -> Arc:
    """Complemento del mayor trozo fijo (empates: el primero en orden de cortes)."""

    if g.is_rotation:
        raise CircleMapError("La identidad y las rotaciones no tienen un arco soporte propio.")
    fixed = _fixed_segments(g)
    if not fixed:
        raise CircleMapError("El soporte es el círculo completo.")
    m = len(g.breakpoints)
    best, best_length = None, Fraction(-1)
    for i in fixed:
        length = (g.breakpoints[(i + 1) % m] - g.breakpoints[i]) % 1
        if length > best_length:
            best, best_length = i, length
    return Arc(g.breakpoints[(best + 1) % m], g.breakpoints[best])


def is_in_thompson_T(g: PiecewiseAffineCircleMap) -> bool:
    return (
        all(is_dyadic(b) for b in g.breakpoints)
        and all(is_power_of_two(a) for a in g.slopes)
        and is_dyadic(g.anchor)
    )


def map_to_json(g: PiecewiseAffineCircleMap) -> dict:
    return {
        "breakpoints": [format_rational(b) for b in g.breakpoints],
        "slopes": [format_rational(a) for a in g.slopes],
        "anchor": format_rational(g.anchor),
    }


def map_from_json(payload: dict) -> PiecewiseAffineCircleMap:
    try:
        return from_data(payload["breakpoints"], payload["slopes"], payload["anchor"])
    except (KeyError, TypeError) as exc:
        raise CircleMapError(f"Registro de mapa incompleto: {exc}") from exc
