"""Entropía de Shannon (en nats) de potencias de convolución y estimadores asociados."""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from typing import Iterable, Mapping, Sequence

import numpy as np

from .boundary_stats import DEFAULT_XI, XiSettings, xi_of
from .circle_map import PiecewiseAffineCircleMap, compose
from .errors import ArithmeticDomainError
from .measure import StepDistribution
from .walk_engine import Trajectory, batch, derive_seed, make_rng, successful

_logger = logging.getLogger(__name__)

SUPPORT_CAP = 2_000_000
BOOTSTRAP_RESAMPLES = 200


def _log_fraction(q: Fraction) -> float:
    return math.log(q.numerator) - math.log(q.denominator)


def _entropy_of_weights(weights: Iterable[Fraction]) -> float:
    return max(0.0, -math.fsum(float(w) * _log_fraction(w) for w in weights if w > 0))


def shannon_entropy(dist: StepDistribution | Mapping[PiecewiseAffineCircleMap, Fraction]) -> float:
    """H = −Σ p log p con pesos exactos; sólo el logaritmo pasa a coma flotante."""

    weights = dist.weights if isinstance(dist, StepDistribution) else dist.values()
    return _entropy_of_weights(weights)


@dataclass(frozen=True)
class EntropyRow:
    n: int
    entropy: float
    support_size: int


@dataclass(frozen=True)
class EntropyCurve:
    rows: tuple[EntropyRow, ...]
    truncated: bool
    support_cap: int

    @property
    def increments(self) -> tuple[float, ...]:
        """H(μ*⁽ⁿ⁺¹⁾) − H(μ*ⁿ) para cada par consecutivo calculado."""

        return tuple(b.entropy - a.entropy for a, b in zip(self.rows, self.rows[1:]))

    @property
    def rate_estimate(self) -> float | None:
        return self.rows[-1].entropy / self.rows[-1].n if self.rows else None


def _convolve_chunk(
    chunk: Sequence[tuple[PiecewiseAffineCircleMap, Fraction]],
    atoms: Sequence[tuple[PiecewiseAffineCircleMap, Fraction]],
) -> dict[PiecewiseAffineCircleMap, Fraction]:
    partial_sum: dict[PiecewiseAffineCircleMap, Fraction] = defaultdict(Fraction)
    for g, wg in chunk:
        for h, wh in atoms:
            partial_sum[compose(g, h)] += wg * wh
    return dict(partial_sum)


def _convolve_step(
    current: dict[PiecewiseAffineCircleMap, Fraction],
    atoms: Sequence[tuple[PiecewiseAffineCircleMap, Fraction]],
    workers: int,
) -> dict[PiecewiseAffineCircleMap, Fraction]:
    items = list(current.items())
    if workers <= 1 or len(items) < 2 * workers:
        return _convolve_chunk(items, atoms)
    size = math.ceil(len(items) / workers)
    chunks = [items[i : i + size] for i in range(0, len(items), size)]
    merged: dict[PiecewiseAffineCircleMap, Fraction] = defaultdict(Fraction)
    with ProcessPoolExecutor(max_workers=workers) as executor:
        # El orden de fusión es el de los trozos: la salida no depende del reparto.
        for part in executor.map(partial(_convolve_chunk, atoms=atoms), chunks):
            for g, w in part.items():
                merged[g] += w
    return dict(merged)


def entropy_curve(
    mu: StepDistribution,
    n_max: int,
    support_cap: int = SUPPORT_CAP,
    workers: int = 1,
) -> EntropyCurve:
    """H(μ*ⁿ) exacta para n = 1..n_max; se detiene (marcando truncado) si el soporte supera ``support_cap``."""

    if n_max < 1:
        raise ValueError("n_max debe ser ≥ 1.")
    atoms = list(mu.atoms)
    current = dict(atoms)
    rows = []
    for n in range(1, n_max + 1):
        total = sum(current.values(), Fraction(0))
        if total != 1:
            raise ArithmeticDomainError(f"Los pesos de μ*{n} suman {total}.")
        rows.append(EntropyRow(n, _entropy_of_weights(current.values()), len(current)))
        _logger.info("entropia n=%s soporte=%s", n, len(current))
        if n == n_max:
            break
        current = _convolve_step(current, atoms, workers)
        if len(current) > support_cap:
            _logger.warning("curva-truncada n=%s soporte=%s cota=%s", n + 1, len(current), support_cap)
            return EntropyCurve(tuple(rows), truncated=True, support_cap=support_cap)
    return EntropyCurve(tuple(rows), truncated=False, support_cap=support_cap)


def bernoulli_entropy(p_a, p_e) -> float:
    """Entropía de la medida de Bernoulli sobre {a, e} con pesos normalizados μ(a)/(μ(a)+μ(e))."""

    p_a, p_e = Fraction(p_a), Fraction(p_e)
    if p_a <= 0 or p_e <= 0:
        raise ArithmeticDomainError("Los pesos de a y de e deben ser positivos.")
    q = p_a / (p_a + p_e)
    return _entropy_of_weights((q, 1 - q))


@dataclass(frozen=True)
class ConditionalEntropyReport:
    n: int
    proxy: float
    ci_low: float
    ci_high: float
    bins: int
    undersampled_bins: int
    trials_used: int
    correction: str = "miller-madow"


def _endpoint_and_bin(trajectory: Trajectory, n: int, bins: int, settings: XiSettings):
    estimate = xi_of(trajectory, settings)
    return trajectory.position(n), int(estimate.xi_hat * bins)


def _binned_entropy(samples: Sequence[tuple[PiecewiseAffineCircleMap, int]]) -> tuple[float, int]:
    # Σ p̂(celda)·Ĥ_MM(w_n | celda); devuelve también las celdas con K > N/2.
    by_bin: dict[int, Counter] = defaultdict(Counter)
    for endpoint, cell in samples:
        by_bin[cell][endpoint] += 1
    total = len(samples)
    parts = []
    undersampled = 0
    for counts in by_bin.values():
        size = sum(counts.values())
        distinct = len(counts)
        plug_in = -math.fsum((c / size) * math.log(c / size) for c in counts.values())
        parts.append(size / total * (plug_in + (distinct - 1) / (2 * size)))
        if distinct > size / 2:
            undersampled += 1
    return math.fsum(parts), undersampled


def conditional_entropy_proxy(
    mu: StepDistribution,
    n: int,
    trials: int,
    arc_bins: int,
    xi_horizon: int,
    seed: int = 0,
    workers: int = 1,
    settings: XiSettings = DEFAULT_XI,
    resamples: int = BOOTSTRAP_RESAMPLES,
) -> ConditionalEntropyReport:
    """Aproximación por celdas de H(w_n | ξ): entropía de w_n condicionada a la celda de ξ̂, con IC bootstrap.

    Es un sustituto empírico de la entropía condicional media; con n ≤ 8 el
    soporte de w_n suele quedar bien muestreado.
    """

    if xi_horizon < n:
        raise ValueError("xi_horizon debe ser ≥ n.")
    if arc_bins < 1:
        raise ValueError("arc_bins debe ser ≥ 1.")
    results = batch(
        mu, xi_horizon, trials, seed, partial(_endpoint_and_bin, n=n, bins=arc_bins, settings=settings), workers
    )
    samples, _ = successful(results)
    if not samples:
        return ConditionalEntropyReport(n, 0.0, 0.0, 0.0, arc_bins, 0, 0)
    proxy, undersampled = _binned_entropy(samples)
    if undersampled:
        _logger.warning("celdas-submuestreadas n=%s celdas=%s", n, undersampled)
    rng = make_rng(derive_seed(seed, resamples))
    replicates = []
    for _ in range(resamples):
        picks = rng.integers(0, len(samples), size=len(samples))
        replicates.append(_binned_entropy([samples[i] for i in picks])[0])
    ci_low, ci_high = (float(v) for v in np.percentile(replicates, [2.5, 97.5])) if replicates else (proxy, proxy)
    return ConditionalEntropyReport(
        n=n,
        proxy=proxy,
        ci_low=ci_low,
        ci_high=ci_high,
        bins=arc_bins,
        undersampled_bins=undersampled,
        trials_used=len(samples),
    )
