"""Distribuciones de paso μ con soporte finito y pesos racionales exactos."""

from __future__ import annotations

import logging
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .circle_map import IDENTITY, PiecewiseAffineCircleMap, compose, invert
from .errors import DataFileError
from .exact_arith import format_rational, parse_rational
from .thompson import GeneratorSet, bundled_path, read_json_file, default_generators, word_to_element

_logger = logging.getLogger(__name__)

MEASURE_FILE = "measure_lazy_t.json"
_TWO_64 = 1 << 64


@dataclass(frozen=True, eq=False)
class StepDistribution:
    """Lista de átomos ``(g, peso)``: pesos positivos que suman exactamente 1, elementos distintos."""

    atoms: tuple[tuple[PiecewiseAffineCircleMap, Fraction], ...]
    labels: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.atoms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepDistribution):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    __hash__ = None

    def as_dict(self) -> dict[PiecewiseAffineCircleMap, Fraction]:
        return dict(self.atoms)

    @property
    def elements(self) -> tuple[PiecewiseAffineCircleMap, ...]:
        return tuple(g for g, _ in self.atoms)

    @property
    def weights(self) -> tuple[Fraction, ...]:
        return tuple(w for _, w in self.atoms)

    @cached_property
    def _index(self) -> dict[PiecewiseAffineCircleMap, int]:
        return {g: i for i, (g, _) in enumerate(self.atoms)}

    def index_of(self, g: PiecewiseAffineCircleMap) -> int | None:
        return self._index.get(g)

    def weight_of(self, g: PiecewiseAffineCircleMap) -> Fraction:
        i = self.index_of(g)
        return self.atoms[i][1] if i is not None else Fraction(0)

    @cached_property
    def thresholds(self) -> tuple[int, ...]:
        # Umbrales enteros floor(F_i · 2⁶⁴) de la función de distribución acumulada.
        cumulative = Fraction(0)
        limits = []
        for _, weight in self.atoms:
            cumulative += weight
            limits.append((cumulative * _TWO_64).__floor__())
        return tuple(limits)


def make_distribution(
    pairs: Iterable[tuple[PiecewiseAffineCircleMap, Fraction]],
    labels: Sequence[str] | None = None,
) -> StepDistribution:
    """Valida pesos y funde átomos repetidos (con aviso)."""

    merged: dict[PiecewiseAffineCircleMap, Fraction] = {}
    merged_labels: dict[PiecewiseAffineCircleMap, str] = {}
    pairs = list(pairs)
    labels = list(labels) if labels is not None else [None] * len(pairs)
    if len(labels) != len(pairs):
        raise ValueError("Debe haber una etiqueta por átomo.")
    for (element, weight), label in zip(pairs, labels):
        weight = Fraction(weight)
        if weight <= 0:
            raise ValueError(f"Peso no positivo {weight}.")
        if element in merged:
            _logger.warning("Átomo repetido (%s); se suman sus pesos.", label or element.digest)
            merged[element] += weight
            continue
        merged[element] = weight
        merged_labels[element] = label or ("e" if element.is_identity else element.digest)
    total = sum(merged.values(), Fraction(0))
    if total != 1:
        raise ValueError(f"Los pesos suman {total}, no 1.")
    return StepDistribution(
        atoms=tuple(merged.items()),
        labels=tuple(merged_labels[g] for g in merged),
    )


def dirac(g: PiecewiseAffineCircleMap, label: str | None = None) -> StepDistribution:
    return make_distribution([(g, Fraction(1))], [label] if label else None)


def uniform(elements: Sequence[PiecewiseAffineCircleMap], labels: Sequence[str] | None = None) -> StepDistribution:
    weight = Fraction(1, len(elements))
    return make_distribution([(g, weight) for g in elements], labels)


def lazify(mu: StepDistribution) -> StepDistribution:
    """½μ + ½δ_e."""

    pairs = [(g, w / 2) for g, w in mu.atoms]
    labels = list(mu.labels)
    if mu.index_of(IDENTITY) is None:
        pairs.insert(0, (IDENTITY, Fraction(1, 2)))
        labels.insert(0, "e")
    else:
        pairs = [(g, w + Fraction(1, 2)) if g.is_identity else (g, w) for g, w in pairs]
    return make_distribution(pairs, labels)


def convolve(mu: StepDistribution, nu: StepDistribution) -> StepDistribution:
    """μ∗ν: ley de g·h con g ~ μ, h ~ ν independientes."""

    accumulated: dict[PiecewiseAffineCircleMap, Fraction] = {}
    for g, wg in mu.atoms:
        for h, wh in nu.atoms:
            product = compose(g, h)
            accumulated[product] = accumulated.get(product, Fraction(0)) + wg * wh
    return make_distribution(accumulated.items())


def power(mu: StepDistribution, s: int) -> StepDistribution:
    if s < 1:
        raise ValueError("La potencia de convolución requiere s ≥ 1.")
    result = mu
    for _ in range(s - 1):
        result = convolve(result, mu)
    return result


def reflect(mu: StepDistribution) -> StepDistribution:
    """μ̄(g) = μ(g⁻¹)."""

    labels = [label if label == "e" else f"({label})^-1" for label in mu.labels]
    return make_distribution([(invert(g), w) for g, w in mu.atoms], labels)


def sample_index(mu: StepDistribution, rng: np.random.Generator) -> int:
    """Índice de átomo por CDF inversa sobre un entero uniforme de 64 bits (sesgo < 2⁻⁶³)."""

    draw = int(rng.integers(0, _TWO_64 - 1, dtype=np.uint64, endpoint=True))
    return bisect_right(mu.thresholds, draw)


def sample_indices(mu: StepDistribution, rng: np.random.Generator, size: int) -> list[int]:
    draws = rng.integers(0, _TWO_64 - 1, size=size, dtype=np.uint64, endpoint=True).tolist()
    thresholds = mu.thresholds
    return [bisect_right(thresholds, draw) for draw in draws]


def sample(mu: StepDistribution, rng: np.random.Generator) -> PiecewiseAffineCircleMap:
    return mu.atoms[sample_index(mu, rng)][0]


def moment(mu: StepDistribution) -> Fraction:
    """Σ μ(g)·|Br_g|."""

    return sum((w * len(g.true_breakpoints()) for g, w in mu.atoms), Fraction(0))


def load_measure(path: str | Path | None = None, generators: GeneratorSet | None = None) -> StepDistribution:
    """Lee un fichero de medida ``[{word, weight}, …]`` resolviendo palabras con los generadores activos."""

    source = Path(path) if path else bundled_path(MEASURE_FILE)
    generators = generators or default_generators()
    payload = read_json_file(source, "medida")
    if not isinstance(payload, list) or not payload:
        raise DataFileError(f"{source}: se esperaba una lista no vacía de átomos.")
    pairs, labels = [], []
    for record in payload:
        try:
            word = [str(letter) for letter in record["word"]]
            weight = parse_rational(record["weight"])
        except (KeyError, TypeError) as exc:
            raise DataFileError(f"{source}: átomo incompleto ({exc}).") from exc
        except ValueError as exc:
            raise DataFileError(f"{source}: peso inválido ({exc}).") from exc
        pairs.append((word_to_element(word, generators), weight))
        labels.append(" ".join(word) if word else "e")
    try:
        mu = make_distribution(pairs, labels)
    except ValueError as exc:
        raise DataFileError(f"{source}: {exc}") from exc
    _logger.info("medida-cargada origen=%s atomos=%s", source, len(mu))
    return mu


def measure_summary(mu: StepDistribution) -> list[dict]:
    """Etiqueta y peso de cada átomo, para manifiestos."""

    return [{"label": label, "weight": format_rational(w)} for label, (_, w) in zip(mu.labels, mu.atoms)]
