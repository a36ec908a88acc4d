"""Datos propios del grupo T de Thompson.

Incluye el conjunto generador empaquetado (A, B de F y el elemento de torsión C,
con sus inversas), la familia explícita ``a_n`` de soporte pequeño, la
verificación de relaciones por composición exacta y la búsqueda de
conjugadores contractivos.

Convención de palabras: la palabra ``["X", "Y"]`` es el mapa X∘Y.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .circle_map import (
    IDENTITY,
    Arc,
    PiecewiseAffineCircleMap,
    Segment,
    canonicalize,
    compose,
    conjugate,
    from_data,
    invert,
    is_in_thompson_T,
    map_from_json,
    smallest_interval_containing_support,
)
from .errors import CircleMapError, DataFileError
from .exact_arith import is_dyadic, to_circle

_logger = logging.getLogger(__name__)

_DATA_PACKAGE = "circlewalk"
GENERATORS_FILE = "generators_t.json"
RELATIONS_FILE = "relations_t.json"


@dataclass(frozen=True, eq=False)
class GeneratorSet:
    elements: dict[str, PiecewiseAffineCircleMap]
    inverses: dict[str, str]
    provenance: str
    in_thompson_T: bool = True
    relations: tuple[tuple[str, ...], ...] = field(default_factory=tuple)

    def __getitem__(self, name: str) -> PiecewiseAffineCircleMap:
        try:
            return self.elements[name]
        except KeyError:
            raise DataFileError(f"Generador desconocido: {name!r}") from None

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.elements)


def read_json_file(path: Path, what: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataFileError(f"No existe el fichero de {what}: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataFileError(f"JSON inválido en {path}: {exc}") from exc


def bundled_path(name: str) -> Path:
    return Path(str(resources.files(_DATA_PACKAGE).joinpath("data").joinpath(name)))


def load_relations(path: str | Path | None = None) -> list[list[str]]:
    source = Path(path) if path else bundled_path(RELATIONS_FILE)
    payload = read_json_file(source, "relaciones")
    if not isinstance(payload, list) or not all(isinstance(word, list) for word in payload):
        raise DataFileError(f"{source}: se esperaba una lista de palabras.")
    return [[str(letter) for letter in word] for word in payload]


def load_generators(
    path: str | Path | None = None,
    relations_path: str | Path | None = None,
    require_thompson: bool | None = None,
) -> GeneratorSet:
    """Carga y valida un conjunto generador.

    El conjunto empaquetado debe pertenecer a T; un fichero propio puede
    describir otro subgrupo de PAff₊(S¹) y en ese caso sólo se avisa.
    """

    bundled = path is None
    source = bundled_path(GENERATORS_FILE) if bundled else Path(path)
    if require_thompson is None:
        require_thompson = bundled
    payload = read_json_file(source, "generadores")
    if not isinstance(payload, list) or not payload:
        raise DataFileError(f"{source}: se esperaba una lista no vacía de generadores.")

    elements: dict[str, PiecewiseAffineCircleMap] = {}
    inverses: dict[str, str] = {}
    for record in payload:
        try:
            name = str(record["name"])
            inverse_name = str(record["inverse_name"])
            element = map_from_json(record["map"])
        except (KeyError, TypeError) as exc:
            raise DataFileError(f"{source}: registro de generador incompleto ({exc}).") from exc
        except CircleMapError as exc:
            raise DataFileError(f"{source}: el generador {record.get('name')!r} no es válido: {exc}") from exc
        if name in elements:
            raise DataFileError(f"{source}: generador duplicado {name!r}.")
        elements[name] = element
        inverses[name] = inverse_name

    all_in_t = True
    for name, element in elements.items():
        inverse_name = inverses[name]
        if inverse_name not in elements:
            raise DataFileError(f"{source}: la inversa {inverse_name!r} de {name!r} no está en el conjunto.")
        if inverses[inverse_name] != name:
            raise DataFileError(f"{source}: {name!r} y {inverse_name!r} no son inversas recíprocas.")
        if not compose(element, elements[inverse_name]).is_identity:
            raise DataFileError(f"{source}: {name!r}∘{inverse_name!r} no es la identidad.")
        if not is_in_thompson_T(element):
            all_in_t = False
            if require_thompson:
                raise DataFileError(f"{source}: {name!r} no pertenece a T.")
            _logger.warning("El generador %s no pertenece a T; se usa como subgrupo de PAff.", name)

    relations: list[list[str]] = []
    if bundled or relations_path is not None:
        relations = load_relations(relations_path)
    generators = GeneratorSet(
        elements=elements,
        inverses=inverses,
        provenance=str(source),
        in_thompson_T=all_in_t,
        relations=tuple(tuple(word) for word in relations),
    )
    for word in generators.relations:
        if not verify_relation(word, generators):
            raise DataFileError(f"La relación {' '.join(word)} no se verifica con {source}.")
    _logger.info("generadores-cargados origen=%s n=%s relaciones=%s", source, len(elements), len(relations))
    return generators


_DEFAULT_GENERATORS: GeneratorSet | None = None


def default_generators() -> GeneratorSet:
    """Conjunto clásico A, B, C de T (y sus inversas), validado una sola vez por proceso."""

    global _DEFAULT_GENERATORS
    if _DEFAULT_GENERATORS is None:
        _DEFAULT_GENERATORS = load_generators()
    return _DEFAULT_GENERATORS


def word_to_element(word: Sequence[str], generators: GeneratorSet | None = None) -> PiecewiseAffineCircleMap:
    generators = generators or default_generators()
    element = IDENTITY
    for name in word:
        element = compose(element, generators[name])
    return element


def verify_relation(word: Sequence[str], generators: GeneratorSet | None = None) -> bool:
    return word_to_element(word, generators).is_identity


def remark_element(y, n: int) -> PiecewiseAffineCircleMap:
    """Elemento a_n: fija y, expande [y, y+4⁻ⁿ) por 2ⁿ, contrae el trozo siguiente por 2⁻ⁿ."""

    y = to_circle(y)
    if not is_dyadic(y):
        raise CircleMapError(f"y debe ser diádico (recibido {y}).")
    if n < 1:
        raise CircleMapError(f"n debe ser positivo (recibido {n}).")
    small = Fraction(1, 2 ** (2 * n))
    step = Fraction(1, 2**n)
    return canonicalize(
        [
            Segment(y, Fraction(2**n), y),
            Segment(y + small, step, y + step),
            Segment(y + small + step, Fraction(1), y + small + step),
        ]
    )


@dataclass(frozen=True)
class OrbitDensityReport:
    words: int
    resolution: Fraction
    covered_fraction: float
    dense: bool


def orbit_density(
    generators: GeneratorSet | None = None,
    words: int = 10_000,
    max_length: int = 30,
    resolution: Fraction = Fraction(1, 128),
    seed: int = 0,
    start=Fraction(0),
) -> OrbitDensityReport:
    """Heurística de minimalidad: ¿la órbita de ``start`` bajo palabras aleatorias llena todas las celdas?"""

    generators = generators or default_generators()
    names = generators.names
    rng = np.random.default_rng(seed)
    cells = int(1 / Fraction(resolution))
    hit = np.zeros(cells, dtype=bool)
    for _ in range(words):
        length = int(rng.integers(1, max_length + 1))
        letters = rng.integers(0, len(names), size=length).tolist()
        x = to_circle(start)
        for letter in reversed(letters):
            x = generators[names[letter]].evaluate(x)
        hit[int(x * cells)] = True
    covered = float(hit.mean())
    return OrbitDensityReport(words=words, resolution=Fraction(resolution), covered_fraction=covered, dense=bool(hit.all()))


@dataclass(frozen=True)
class ConjugatorResult:
    n: int
    conjugator: PiecewiseAffineCircleMap | None
    element: PiecewiseAffineCircleMap | None
    support_diameter: Fraction | None


def contracting_conjugators(
    mu,
    a: PiecewiseAffineCircleMap,
    n_values: Iterable[int],
    max_steps: int = 200,
    trials: int = 50,
    seed: int = 0,
    center=None,
) -> list[ConjugatorResult]:
    """Busca t_n con t_n(J) dentro de un arco de longitud 1/n y devuelve b_n = t_n a t_n⁻¹."""

    from .boundary_stats import contract_interval_into

    support_arc = smallest_interval_containing_support(a)
    center = support_arc.midpoint if center is None else to_circle(center)
    results = []
    for n in n_values:
        half = Fraction(1, 2 * n)
        target = Arc(center - half, center + half)
        certificate = contract_interval_into(mu, support_arc, target, max_steps, trials, seed + n)
        if certificate is None:
            _logger.warning("Sin conjugador contractivo para n=%s tras %s intentos.", n, trials)
            results.append(ConjugatorResult(n, None, None, None))
            continue
        t = certificate.element
        results.append(ConjugatorResult(n, t, conjugate(t, a), support_arc.image(t).length))
    return results


def random_word(generators: GeneratorSet, rng: np.random.Generator, max_length: int) -> list[str]:
    """Palabra uniforme de longitud 1..max_length sobre los nombres del conjunto generador."""

    names = generators.names
    length = int(rng.integers(1, max_length + 1))
    return [names[i] for i in rng.integers(0, len(names), size=length).tolist()]


@dataclass(frozen=True)
class ExactnessReport:
    words: int
    triples: int
    failures: dict[str, int]

    @property
    def ok(self) -> bool:
        return not any(self.failures.values())


def exactness_check(
    generators: GeneratorSet | None = None,
    words: int = 1000,
    max_length: int = 12,
    triples: int = 200,
    seed: int = 0,
) -> ExactnessReport:
    """Inversión, doble inversión, canonicalización idempotente y asociatividad sobre palabras aleatorias."""

    generators = generators or default_generators()
    rng = np.random.default_rng(seed)
    failures = {"inverse": 0, "double_inverse": 0, "canonical": 0, "associativity": 0}
    for _ in range(words):
        g = word_to_element(random_word(generators, rng, max_length), generators)
        inverse = invert(g)
        if not compose(g, inverse).is_identity or not compose(inverse, g).is_identity:
            failures["inverse"] += 1
        if invert(inverse) != g:
            failures["double_inverse"] += 1
        if from_data(g.breakpoints, g.slopes, g.anchor) != g:
            failures["canonical"] += 1
    for _ in range(triples):
        f, g, h = (word_to_element(random_word(generators, rng, max_length), generators) for _ in range(3))
        if compose(compose(f, g), h) != compose(f, compose(g, h)):
            failures["associativity"] += 1
    if any(failures.values()):
        _logger.error("algebra-inexacta fallos=%s", failures)
    return ExactnessReport(words=words, triples=triples, failures=failures)
