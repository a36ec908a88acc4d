"""Dominación de intervalos, contadores Z y W, colecciones ξ-buenas y su verificación exhaustiva.

Convención de índices: ``Trajectory.increment(k)`` es g_k (k ≥ 1) y
``Trajectory.position(k)`` es w_k. ``count_W`` mira k ∈ 1..n con condiciones
sobre w_k y g_{k+1}; ``extract_good_collection`` mira i ∈ 1..n con condiciones
sobre w_{i−1}, g_i y w_i, de modo que
``count_W(n) == #{i ∈ colección(n+1) : i ≥ 2}``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np

from .boundary_stats import DEFAULT_XI, XiSettings, xi_of
from .circle_map import IDENTITY, Arc, PiecewiseAffineCircleMap, compose
from .errors import CollectionTooLargeError, DataFileError
from .exact_arith import format_rational, parse_rational
from .measure import StepDistribution
from .thompson import bundled_path, read_json_file
from .walk_engine import Trajectory, TrialFailure, batch, successful

_logger = logging.getLogger(__name__)

COLLECTION_CAP = 16
SATISFACTORY_TRUNCATION = 10
DOMINATION_TARGET = Fraction(1, 24)


def dominates(first: Arc, second: Arc) -> bool:
    """``first`` domina a ``second`` si son disjuntos o el interior de ``first`` contiene a ``second``."""

    return first.is_disjoint(second) or first.interior_contains(second)


def _dominance_flags(arcs: Sequence[Arc]) -> list[bool]:
    # flags[k]: arcs[k] domina a todos los anteriores (vacuamente cierto en k = 0).
    return [all(dominates(arcs[k], arcs[j]) for j in range(k)) for k in range(len(arcs))]


def _position_arcs(trajectory: Trajectory, arc: Arc, upto: int, stride: int = 1) -> list[Arc]:
    return [arc.image(w) for k, w in trajectory.iter_positions(upto) if k % stride == 0]


def _is_a_or_e(g: PiecewiseAffineCircleMap, a: PiecewiseAffineCircleMap) -> bool:
    return g.is_identity or g == a


def count_Z(trajectory: Trajectory, arc: Arc, s: int, n: int) -> int:
    """Número de k ≤ ⌈n/s⌉ con w_{ks}(J) dominando a w_{js}(J) para todo j < k."""

    if s < 1 or n < 1:
        raise ValueError("count_Z requiere s ≥ 1 y n ≥ 1.")
    blocks = math.ceil(n / s)
    if trajectory.horizon < blocks * s:
        raise ValueError(f"La trayectoria necesita horizonte ≥ {blocks * s}.")
    flags = _dominance_flags(_position_arcs(trajectory, arc, blocks * s, stride=s))
    return sum(flags[1:])


def count_W(
    trajectory: Trajectory,
    xi_hat: Fraction,
    a: PiecewiseAffineCircleMap,
    arc: Arc,
    n: int,
) -> int:
    if trajectory.horizon < n + 1:
        raise ValueError(f"count_W necesita horizonte ≥ {n + 1}.")
    flags = _dominance_flags(_position_arcs(trajectory, arc, n))
    orbit = trajectory.inverse_orbit(xi_hat, n)
    return sum(
        1
        for k in range(1, n + 1)
        if flags[k] and not arc.contains_point(orbit[k]) and _is_a_or_e(trajectory.increment(k + 1), a)
    )


@dataclass(frozen=True)
class Collection:
    """Colección de longitud n: tiempos distinguidos y los incrementos fijos del resto (``None`` en los distinguidos)."""

    length: int
    times: tuple[int, ...]
    increments: tuple[PiecewiseAffineCircleMap | None, ...]

    def __post_init__(self):
        if len(self.increments) != self.length:
            raise ValueError("Debe haber un incremento por índice.")
        if any(t2 <= t1 for t1, t2 in zip(self.times, self.times[1:])):
            raise ValueError("Los tiempos distinguidos deben ser estrictamente crecientes.")
        distinguished = set(self.times)
        for index, g in enumerate(self.increments, start=1):
            if (g is None) != (index in distinguished):
                raise ValueError(f"Índice {index}: incremento fijo inconsistente con los tiempos.")

    @property
    def k(self) -> int:
        return len(self.times)


def extract_good_collection(
    trajectory: Trajectory,
    xi_hat: Fraction,
    a: PiecewiseAffineCircleMap,
    arc: Arc,
    n: int,
) -> Collection:
    """Única colección ξ-buena de longitud n que contiene a la trayectoria."""

    if trajectory.horizon < n:
        raise ValueError(f"La trayectoria necesita horizonte ≥ {n}.")
    flags = _dominance_flags(_position_arcs(trajectory, arc, max(n - 1, 0)))
    orbit = trajectory.inverse_orbit(xi_hat, n)
    times = []
    increments: list[PiecewiseAffineCircleMap | None] = []
    for i in range(1, n + 1):
        g = trajectory.increment(i)
        if flags[i - 1] and _is_a_or_e(g, a) and not arc.contains_point(orbit[i]):
            times.append(i)
            increments.append(None)
        else:
            increments.append(g)
    return Collection(length=n, times=tuple(times), increments=tuple(increments))


def truncate_collection(collection: Collection, trajectory: Trajectory, k_max: int) -> Collection:
    """Conserva los primeros ``k_max`` tiempos; los posteriores quedan fijados a los incrementos de la trayectoria."""

    if collection.k <= k_max:
        return collection
    kept = collection.times[:k_max]
    increments = list(collection.increments)
    for i in collection.times[k_max:]:
        increments[i - 1] = trajectory.increment(i)
    return Collection(length=collection.length, times=kept, increments=tuple(increments))


def _fixed_blocks(collection: Collection) -> list[PiecewiseAffineCircleMap]:
    # P_0, …, P_k: productos de los incrementos fijos entre tiempos distinguidos.
    blocks = [IDENTITY]
    for g in collection.increments:
        if g is None:
            blocks.append(IDENTITY)
        else:
            blocks[-1] = compose(blocks[-1], g)
    return blocks


def _check_cap(collection: Collection, cap: int) -> None:
    if collection.k > cap:
        raise CollectionTooLargeError(f"k = {collection.k} supera el tope {cap} de la enumeración 2^k.")


def enumerate_variants(
    collection: Collection,
    a: PiecewiseAffineCircleMap,
    cap: int = COLLECTION_CAP,
) -> list[PiecewiseAffineCircleMap]:
    """Los 2^k extremos w_n al sustituir cada tiempo distinguido por a o por e (orden de ``itertools.product((a, e))``)."""

    _check_cap(collection, cap)
    blocks = _fixed_blocks(collection)
    endpoints = [blocks[0]]
    for block in blocks[1:]:
        with_a = compose(a, block)
        endpoints = [variant for prefix in endpoints for variant in (compose(prefix, with_a), compose(prefix, block))]
    return endpoints


def is_satisfactory(collection: Collection, a: PiecewiseAffineCircleMap, cap: int = COLLECTION_CAP) -> bool:
    endpoints = enumerate_variants(collection, a, cap)
    return len(set(endpoints)) == len(endpoints)


def variant_arcs_consistent(
    collection: Collection,
    a: PiecewiseAffineCircleMap,
    arc: Arc,
    cap: int = COLLECTION_CAP,
) -> bool:
    """¿Todas las variantes comparten el arco w_{i_r−1}(J) en cada tiempo distinguido i_r?"""

    _check_cap(collection, cap)
    blocks = _fixed_blocks(collection)
    prefixes = [blocks[0]]
    for block in blocks[1:]:
        if len({arc.image(prefix) for prefix in prefixes}) != 1:
            return False
        with_a = compose(a, block)
        prefixes = [variant for prefix in prefixes for variant in (compose(prefix, with_a), compose(prefix, block))]
    return True


@dataclass(frozen=True)
class DominationRow:
    n: int
    z: int
    w: int
    k_extracted: int
    k_checked: int
    satisfactory: bool
    arcs_consistent: bool
    w_matches_collection: bool
    xi_concentrated: bool


def domination_row(
    trajectory: Trajectory,
    a: PiecewiseAffineCircleMap,
    arc: Arc,
    s: int,
    n: int,
    settings: XiSettings = DEFAULT_XI,
    truncation: int = SATISFACTORY_TRUNCATION,
) -> DominationRow:
    """Z, W, tamaño de la colección ξ-buena y verificación exhaustiva (truncada) para un ensayo."""

    estimate = xi_of(trajectory, settings)
    collection = extract_good_collection(trajectory, estimate.xi_hat, a, arc, n)
    truncated = truncate_collection(collection, trajectory, truncation)
    w = count_W(trajectory, estimate.xi_hat, a, arc, n)
    longer = extract_good_collection(trajectory, estimate.xi_hat, a, arc, n + 1)
    return DominationRow(
        n=n,
        z=count_Z(trajectory, arc, s, n),
        w=w,
        k_extracted=collection.k,
        k_checked=truncated.k,
        satisfactory=is_satisfactory(truncated, a),
        arcs_consistent=variant_arcs_consistent(truncated, a, arc),
        w_matches_collection=w == sum(1 for i in longer.times if i >= 2),
        xi_concentrated=estimate.concentrated,
    )


def required_horizon(n: int, s: int = 1, slack: int | None = None) -> int:
    """Horizonte de la trayectoria: cubre Z, W y la holgura de estimación de ξ̂ (4n por defecto)."""

    slack = 4 * n if slack is None else slack
    return max(slack, math.ceil(n / s) * s, n + 1)


@dataclass(frozen=True)
class DominationSummary:
    rows: tuple[DominationRow | None, ...]
    failures: int
    mean_z_over_n: float
    mean_w_over_n: float
    satisfactory_fraction: float
    cross_check_failures: int
    horizon: int


def domination_batch(
    mu: StepDistribution,
    a: PiecewiseAffineCircleMap,
    arc: Arc,
    s: int,
    n: int,
    trials: int,
    seed: int,
    workers: int = 1,
    xi_horizon: int | None = None,
    settings: XiSettings = DEFAULT_XI,
    truncation: int = SATISFACTORY_TRUNCATION,
) -> DominationSummary:
    """Ejecuta ``domination_row`` en ``trials`` ensayos; las filas fallidas quedan como ``None``."""

    horizon = required_horizon(n, s, xi_horizon)
    statistic = partial(domination_row, a=a, arc=arc, s=s, n=n, settings=settings, truncation=truncation)
    results = batch(mu, horizon, trials, seed, statistic, workers)
    values, failures = successful(results)
    rows = tuple(None if isinstance(value, TrialFailure) else value for value in results)
    if not values:
        return DominationSummary(rows, len(failures), 0.0, 0.0, 0.0, 0, horizon)
    unsatisfactory = sum(not row.satisfactory for row in values)
    if unsatisfactory:
        _logger.warning("colecciones-no-satisfactorias n=%s de=%s", unsatisfactory, len(values))
    return DominationSummary(
        rows=rows,
        failures=len(failures),
        mean_z_over_n=float(np.mean([row.z for row in values])) / n,
        mean_w_over_n=float(np.mean([row.w for row in values])) / n,
        satisfactory_fraction=1 - unsatisfactory / len(values),
        cross_check_failures=sum(not row.w_matches_collection for row in values),
        horizon=horizon,
    )


def _dominates_start(trajectory: Trajectory, arc: Arc, s: int, j_max: int) -> bool:
    arcs = _position_arcs(trajectory, arc, s * j_max, stride=s)
    return all(dominates(image, arc) for image in arcs[1:])


@dataclass(frozen=True)
class DominationEstimate:
    s: int
    probability: float
    sigma: float
    trials: int


def domination_probability(
    mu: StepDistribution,
    arc: Arc,
    s: int,
    j_max: int,
    trials: int,
    seed: int,
    workers: int = 1,
) -> DominationEstimate:
    """Estima ℙ[w_{js}(J) domina a J para todo 1 ≤ j ≤ j_max]."""

    if s < 1 or j_max < 1:
        raise ValueError("Se requiere s ≥ 1 y j_max ≥ 1.")
    results = batch(mu, s * j_max, trials, seed, partial(_dominates_start, arc=arc, s=s, j_max=j_max), workers)
    values, _ = successful(results)
    if not values:
        return DominationEstimate(s, 0.0, 0.0, 0)
    p = sum(values) / len(values)
    return DominationEstimate(s, p, math.sqrt(p * (1 - p) / len(values)), len(values))


@dataclass(frozen=True)
class SparsitySearchResult:
    s: int | None
    c: Fraction | None
    estimates: tuple[DominationEstimate, ...]


def sparsity_search(
    mu: StepDistribution,
    arc: Arc,
    s_max: int,
    j_max: int,
    trials: int,
    seed: int,
    workers: int = 1,
    target: Fraction = DOMINATION_TARGET,
) -> SparsitySearchResult:
    """Primer s ≤ s_max cuya probabilidad de dominación alcanza ``target``; constante lineal c = 1/(48s)."""

    estimates = []
    for s in range(1, s_max + 1):
        estimate = domination_probability(mu, arc, s, j_max, trials, seed + s, workers)
        estimates.append(estimate)
        _logger.info("sparsity s=%s p=%.4f", s, estimate.probability)
        if estimate.probability >= target:
            return SparsitySearchResult(s, Fraction(1, 48 * s), tuple(estimates))
    return SparsitySearchResult(None, None, tuple(estimates))


def _z_counts(trajectory: Trajectory, arc: Arc, s: int, n_list: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(count_Z(trajectory, arc, s, n) for n in n_list)


def z_batch(
    mu: StepDistribution,
    arc: Arc,
    s: int,
    n_list: Sequence[int],
    trials: int,
    seed: int,
    workers: int = 1,
) -> list[tuple[int, ...] | None]:
    """Z^J_{n,s} para cada n de ``n_list`` sobre la misma trayectoria de cada ensayo."""

    n_list = tuple(n_list)
    horizon = max(math.ceil(n / s) * s for n in n_list)
    results = batch(mu, horizon, trials, seed, partial(_z_counts, arc=arc, s=s, n_list=n_list), workers)
    return [None if isinstance(result, TrialFailure) else result for result in results]


CALIBRATION_FILE = "calibration.json"


@dataclass(frozen=True)
class Calibration:
    seed: int
    trials: int
    z_floor: dict[int, Fraction]
    w_floor: dict[int, Fraction]
    source: str
    # False mientras las cotas no salgan de una ejecución de ``run_calibration``.
    calibrated: bool = True


def load_calibration(path=None) -> Calibration:
    """Cotas inferiores comprometidas para Ê[Z]/n y Ê[W]/n."""

    source = Path(path) if path else bundled_path(CALIBRATION_FILE)
    payload = read_json_file(source, "calibración")
    try:
        calibrated = payload.get("calibrated", True)
        if not isinstance(calibrated, bool):
            raise TypeError("calibrated debe ser booleano")
        return Calibration(
            seed=int(payload["seed"]),
            trials=int(payload["trials"]),
            z_floor={int(n): parse_rational(v) for n, v in payload["z_floor"].items()},
            w_floor={int(n): parse_rational(v) for n, v in payload["w_floor"].items()},
            source=str(payload.get("source", source)),
            calibrated=calibrated,
        )
    except (AttributeError, KeyError, TypeError, ValueError) as exc:
        raise DataFileError(f"{source}: calibración inválida ({exc}).") from exc


def calibration_payload(calibration: Calibration, a_word: Sequence[str], sparsity: int) -> dict:
    return {
        "seed": calibration.seed,
        "trials": calibration.trials,
        "a_word": list(a_word),
        "sparsity": sparsity,
        "z_floor": {str(n): format_rational(v) for n, v in sorted(calibration.z_floor.items())},
        "w_floor": {str(n): format_rational(v) for n, v in sorted(calibration.w_floor.items())},
        "source": calibration.source,
        "calibrated": calibration.calibrated,
    }


def save_calibration(payload: dict, path=None) -> Path:
    """Escribe ``payload``; sin ``path`` reemplaza el fichero empaquetado."""

    target = Path(path) if path else bundled_path(CALIBRATION_FILE)
    target.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    _logger.info("calibracion-guardada ruta=%s calibrada=%s", target, payload.get("calibrated"))
    return target


@dataclass(frozen=True)
class CalibrationRun:
    calibration: Calibration
    # (cantidad, n, media/n, cota)
    rows: tuple[tuple[str, int, Fraction, Fraction], ...]


def run_calibration(
    mu: StepDistribution,
    a: PiecewiseAffineCircleMap,
    arc: Arc,
    s: int,
    n_list: Sequence[int],
    trials: int,
    seed: int,
    workers: int = 1,
    settings: XiSettings = DEFAULT_XI,
    source: str = "run_calibration",
) -> CalibrationRun:
    """Mide Ê[Z]/n en ``n_list`` y Ê[W]/n en el mayor n; cada cota es la mitad de la media medida."""

    n_list = tuple(n_list)
    if not n_list or trials < 1:
        raise ValueError("La calibración necesita al menos un n y un ensayo.")
    counts = [values for values in z_batch(mu, arc, s, n_list, trials, seed, workers) if values is not None]
    z_floor = {}
    rows = []
    for position, n in enumerate(n_list):
        mean = Fraction(sum(values[position] for values in counts), n * len(counts)) if counts else Fraction(0)
        z_floor[n] = mean / 2
        rows.append(("Z", n, mean, z_floor[n]))

    n_w = max(n_list)
    summary = domination_batch(mu, a, arc, s, n_w, trials, seed, workers, settings=settings)
    valid = [row for row in summary.rows if row is not None]
    mean_w = Fraction(sum(row.w for row in valid), n_w * len(valid)) if valid else Fraction(0)
    w_floor = {n_w: mean_w / 2}
    rows.append(("W", n_w, mean_w, w_floor[n_w]))
    _logger.info("calibracion seed=%s ensayos=%s z=%s w=%s", seed, trials, len(counts), len(valid))
    calibration = Calibration(seed=seed, trials=trials, z_floor=z_floor, w_floor=w_floor, source=source)
    return CalibrationRun(calibration, tuple(rows))
