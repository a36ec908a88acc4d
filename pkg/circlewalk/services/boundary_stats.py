"""Estimadores de la medida estacionaria ν, del punto frontera ξ(w) y de tasas de contracción.

ξ̂ se estima sobre la misma trayectoria prolongada hasta ``xi_horizon``:
se empuja la malla uniforme de m puntos por w_N y se toma el punto medio del
arco más corto que contiene al menos ⌈(1−δ)m⌉ imágenes (empates: el de
extremo izquierdo menor).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from typing import Sequence

import numpy as np
from scipy import stats

from .circle_map import IDENTITY, Arc, PiecewiseAffineCircleMap, invert, smallest_interval_containing_support, support
from .errors import CircleMapError
from .exact_arith import circle_dist, to_circle
from .measure import StepDistribution, reflect, sample
from .walk_engine import (
    DEFAULT_CHECKPOINT_INTERVAL,
    Trajectory,
    batch,
    derive_seed,
    make_rng,
    sample_trajectory,
    successful,
)

_logger = logging.getLogger(__name__)

_Z_95 = 1.959963984540054


@dataclass(frozen=True)
class XiSettings:
    grid: int = 64
    delta: Fraction = Fraction(1, 10)
    threshold: Fraction = Fraction(1, 32)

    def __post_init__(self):
        if self.grid < 8:
            raise ValueError("La malla necesita al menos 8 puntos.")
        if not 0 < self.delta < 1:
            raise ValueError("delta debe estar en (0, 1).")


DEFAULT_XI = XiSettings()

# Holgura mínima del horizonte de ξ̂ sobre n_max, en múltiplos de n_max.
XI_SLACK_FACTOR = 3


@dataclass(frozen=True)
class BoundaryEstimate:
    xi_hat: Fraction
    concentration_radius: Fraction
    horizon: int
    grid: int
    mass_fraction: Fraction
    concentrated: bool


def _estimate_from_map(w: PiecewiseAffineCircleMap, horizon: int, settings: XiSettings) -> BoundaryEstimate:
    m = settings.grid
    images = sorted(w.evaluate(Fraction(i, m)) for i in range(m))
    needed = math.ceil((1 - settings.delta) * m)
    best_left, best_length = images[0], Fraction(2)
    for i in range(m):
        length = (images[(i + needed - 1) % m] - images[i]) % 1
        if length < best_length:
            best_left, best_length = images[i], length
    radius = best_length / 2
    return BoundaryEstimate(
        xi_hat=to_circle(best_left + radius),
        concentration_radius=radius,
        horizon=horizon,
        grid=m,
        mass_fraction=1 - settings.delta,
        concentrated=radius <= settings.threshold,
    )


def estimate_xi(
    trajectory: Trajectory,
    horizon: int | None = None,
    grid: int = 64,
    delta: Fraction = Fraction(1, 10),
    threshold: Fraction = Fraction(1, 32),
) -> BoundaryEstimate:
    horizon = trajectory.horizon if horizon is None else horizon
    settings = XiSettings(grid, Fraction(delta), Fraction(threshold))
    return _estimate_from_map(trajectory.position(horizon), horizon, settings)


def xi_of(trajectory: Trajectory, settings: XiSettings) -> BoundaryEstimate:
    return _estimate_from_map(trajectory.position(trajectory.horizon), trajectory.horizon, settings)


def _log_fraction(q: Fraction) -> float:
    return math.log(q.numerator) - math.log(q.denominator)


@dataclass(frozen=True)
class CurveRow:
    n: int
    mean: Fraction
    ci_low: float
    ci_high: float
    collisions: int


@dataclass(frozen=True)
class FitResult:
    lambda_hat: float
    slope: float
    slope_ci: tuple[float, float]
    r_squared: float
    window: tuple[int, int]
    excluded_zero: int


@dataclass(frozen=True)
class ContractionReport:
    rows: tuple[CurveRow, ...]
    fit: FitResult | None
    trials_used: int
    failures: int = 0
    excluded_not_concentrated: int = 0
    degenerate: bool = False

    @property
    def lambda_hat(self) -> float | None:
        return self.fit.lambda_hat if self.fit else None

    @property
    def r_squared(self) -> float | None:
        return self.fit.r_squared if self.fit else None


def _curve_rows(series: Sequence[Sequence[Fraction]], n_max: int) -> tuple[CurveRow, ...]:
    rows = []
    count = len(series)
    for n in range(n_max + 1):
        values = [s[n] for s in series]
        mean = sum(values, Fraction(0)) / count
        floats = np.array([float(v) for v in values])
        spread = float(floats.std(ddof=1)) if count > 1 else 0.0
        half = _Z_95 * spread / math.sqrt(count)
        rows.append(CurveRow(n, mean, float(mean) - half, float(mean) + half, sum(v == 0 for v in values)))
    return tuple(rows)


def _fit_rate(rows: Sequence[CurveRow], window: tuple[int, int]) -> FitResult | None:
    lo, hi = window
    selected = [row for row in rows if lo <= row.n <= hi]
    usable = [row for row in selected if row.mean > 0]
    excluded = len(selected) - len(usable)
    if excluded:
        _logger.info("ajuste-sin-colisiones excluidos=%s", excluded)
    if len(usable) < 3:
        return None
    ns = np.array([row.n for row in usable], dtype=float)
    logs = np.array([_log_fraction(row.mean) for row in usable])
    result = stats.linregress(ns, logs)
    t_crit = float(stats.t.ppf(0.975, len(usable) - 2))
    slope = float(result.slope)
    margin = t_crit * float(result.stderr)
    return FitResult(
        lambda_hat=max(0.0, -slope),
        slope=slope,
        slope_ci=(slope - margin, slope + margin),
        r_squared=float(result.rvalue) ** 2,
        window=(lo, hi),
        excluded_zero=excluded,
    )


def _resolve_window(fit_window: tuple[int, int | None], n_max: int) -> tuple[int, int]:
    lo, hi = fit_window
    hi = n_max if hi is None else min(hi, n_max)
    if lo >= hi:
        lo = 0
    return lo, hi


def _pair_distances(trajectory: Trajectory, x: Fraction, y: Fraction) -> tuple[Fraction, ...]:
    return tuple(circle_dist(u, v) for u, v in zip(trajectory.inverse_orbit(x), trajectory.inverse_orbit(y)))


def contraction_curve(
    mu: StepDistribution,
    x,
    y,
    n_max: int,
    trials: int,
    seed: int,
    workers: int = 1,
    fit_window: tuple[int, int | None] = (10, None),
    checkpoint_interval: int = DEFAULT_CHECKPOINT_INTERVAL,
) -> ContractionReport:
    """Media Monte Carlo de d(w_n⁻¹(x), w_n⁻¹(y)) para n ≤ n_max y ajuste log-lineal."""

    x, y = to_circle(x), to_circle(y)
    if x == y:
        raise ValueError("contraction_curve requiere x ≠ y.")
    results = batch(mu, n_max, trials, seed, partial(_pair_distances, x=x, y=y), workers, checkpoint_interval)
    series, failures = successful(results)
    if not series:
        return ContractionReport(rows=(), fit=None, trials_used=0, failures=len(failures), degenerate=True)
    rows = _curve_rows(series, n_max)
    fit = _fit_rate(rows, _resolve_window(fit_window, n_max))
    return ContractionReport(rows=rows, fit=fit, trials_used=len(series), failures=len(failures))


def _boundary_distances(trajectory: Trajectory, x: Fraction, n_max: int, settings: XiSettings):
    points = []
    final = IDENTITY
    for k, w in trajectory.iter_positions():
        if k <= n_max:
            points.append(w.evaluate(x))
        final = w
    estimate = _estimate_from_map(final, trajectory.horizon, settings)
    if not estimate.concentrated:
        return False, ()
    return True, tuple(circle_dist(p, estimate.xi_hat) for p in points)


def boundary_convergence_curve(
    mu: StepDistribution,
    x,
    n_max: int,
    trials: int,
    xi_horizon: int,
    seed: int = 0,
    workers: int = 1,
    settings: XiSettings = DEFAULT_XI,
    fit_window: tuple[int, int | None] = (10, None),
    checkpoint_interval: int = DEFAULT_CHECKPOINT_INTERVAL,
    slack: int | None = None,
) -> ContractionReport:
    """Media de d(w_n(x), ξ̂) con ξ̂ estimado en la misma trayectoria a ``xi_horizon``.

    Exige ``xi_horizon ≥ n_max + slack``; la holgura por defecto es 3·n_max,
    es decir, un horizonte total de 4·n_max como en los contadores Z y W.
    """

    slack = XI_SLACK_FACTOR * n_max if slack is None else slack
    if slack < 1 or xi_horizon < n_max + slack:
        raise ValueError(f"xi_horizon={xi_horizon} no deja la holgura {slack} sobre n_max={n_max}.")
    x = to_circle(x)
    results = batch(
        mu, xi_horizon, trials, seed, partial(_boundary_distances, x=x, n_max=n_max, settings=settings),
        workers, checkpoint_interval,
    )
    values, failures = successful(results)
    series = [distances for ok, distances in values if ok]
    excluded = len(values) - len(series)
    if excluded:
        _logger.warning("xi-no-concentrado excluidos=%s de=%s", excluded, len(values))
    if not series:
        return ContractionReport(
            rows=(), fit=None, trials_used=0, failures=len(failures),
            excluded_not_concentrated=excluded, degenerate=True,
        )
    rows = _curve_rows(series, n_max)
    fit = _fit_rate(rows, _resolve_window(fit_window, n_max))
    return ContractionReport(
        rows=rows, fit=fit, trials_used=len(series), failures=len(failures), excluded_not_concentrated=excluded
    )


@dataclass(frozen=True)
class EmpiricalMeasure:
    bins: int
    counts: tuple[int, ...]
    total: int
    points: tuple[Fraction, ...] = field(repr=False, default=())
    not_concentrated: int = 0
    failures: int = 0

    def bin_edges(self, i: int) -> tuple[Fraction, Fraction]:
        return Fraction(i, self.bins), Fraction(i + 1, self.bins)

    def fraction(self, i: int) -> float:
        return self.counts[i] / self.total if self.total else 0.0

    def arc_fraction(self, arc: Arc) -> tuple[float, float]:
        """Masa empírica exacta de un arco (sin redondear a celdas) y su error estándar."""

        if not self.points:
            return 0.0, 0.0
        p = sum(arc.contains_point(point) for point in self.points) / len(self.points)
        return p, math.sqrt(p * (1 - p) / len(self.points))


def _histogram(points: Sequence[Fraction], bins: int, **extra) -> EmpiricalMeasure:
    counts = [0] * bins
    for point in points:
        counts[int(point * bins)] += 1
    return EmpiricalMeasure(bins=bins, counts=tuple(counts), total=len(points), points=tuple(points), **extra)


def _xi_point(trajectory: Trajectory, settings: XiSettings) -> tuple[Fraction, bool]:
    estimate = xi_of(trajectory, settings)
    return estimate.xi_hat, estimate.concentrated


def stationary_histogram(
    mu: StepDistribution,
    xi_horizon: int,
    trials: int,
    bins: int,
    seed: int,
    workers: int = 1,
    settings: XiSettings = DEFAULT_XI,
    checkpoint_interval: int = DEFAULT_CHECKPOINT_INTERVAL,
) -> EmpiricalMeasure:
    if bins < 2:
        raise ValueError("Se necesitan al menos 2 celdas.")
    results = batch(mu, xi_horizon, trials, seed, partial(_xi_point, settings=settings), workers, checkpoint_interval)
    values, failures = successful(results)
    return _histogram(
        [xi for xi, _ in values],
        bins,
        not_concentrated=sum(not ok for _, ok in values),
        failures=len(failures),
    )


@dataclass(frozen=True)
class StationarityReport:
    max_z: float
    passed: bool
    first: EmpiricalMeasure
    second: EmpiricalMeasure


def _two_sample_max_z(first: EmpiricalMeasure, second: EmpiricalMeasure) -> float:
    worst = 0.0
    for c1, c2 in zip(first.counts, second.counts):
        p1 = c1 / first.total
        p2 = c2 / second.total
        variance = p1 * (1 - p1) / first.total + p2 * (1 - p2) / second.total
        if variance == 0:
            z = 0.0 if p1 == p2 else math.inf
        else:
            z = abs(p1 - p2) / math.sqrt(variance)
        worst = max(worst, z)
    return worst


def _pushed_xi_point(trajectory: Trajectory, settings: XiSettings, mu: StepDistribution) -> Fraction:
    g = sample(mu, make_rng(derive_seed(trajectory.seed, 0)))
    return g.evaluate(xi_of(trajectory, settings).xi_hat)


def stationarity_check(
    mu: StepDistribution,
    xi_horizon: int,
    trials: int,
    bins: int,
    seed: int,
    workers: int = 1,
    settings: XiSettings = DEFAULT_XI,
    tolerance: float = 4.0,
) -> StationarityReport:
    """Compara el histograma de ξ̂ con el de g·ξ̂ (g ~ μ, muestras independientes) celda a celda."""

    first = stationary_histogram(mu, xi_horizon, trials, bins, seed, workers, settings)
    pushed = batch(
        mu, xi_horizon, trials, derive_seed(seed, 1), partial(_pushed_xi_point, settings=settings, mu=mu), workers
    )
    values, failures = successful(pushed)
    second = _histogram(values, bins, failures=len(failures))
    max_z = _two_sample_max_z(first, second) if first.total and second.total else 0.0
    return StationarityReport(max_z=max_z, passed=max_z <= tolerance, first=first, second=second)


def _pushed_grid_point(trajectory: Trajectory, grid: int) -> Fraction:
    rng = make_rng(derive_seed(trajectory.seed, 0))
    index = int(rng.integers(0, grid))
    return trajectory.position(trajectory.horizon).evaluate(Fraction(index, grid))


def pushforward_check(
    mu: StepDistribution,
    horizon: int,
    trials: int,
    bins: int,
    seed: int,
    workers: int = 1,
    settings: XiSettings = DEFAULT_XI,
    tolerance: float = 4.0,
) -> StationarityReport:
    """Para μ̄: ley de w_N(u), u uniforme en la malla, frente al histograma de ξ̂ (ambos ≈ ν̄)."""

    reflected = reflect(mu)
    first = stationary_histogram(reflected, horizon, trials, bins, seed, workers, settings)
    pushed = batch(
        reflected, horizon, trials, derive_seed(seed, 2), partial(_pushed_grid_point, grid=settings.grid), workers
    )
    values, failures = successful(pushed)
    second = _histogram(values, bins, failures=len(failures))
    max_z = _two_sample_max_z(first, second) if first.total and second.total else 0.0
    return StationarityReport(max_z=max_z, passed=max_z <= tolerance, first=first, second=second)


@dataclass(frozen=True)
class VisitReport:
    fraction: float
    sigma: float
    nu_bar: float
    nu_bar_sigma: float
    bound_holds: bool
    degenerate: bool
    trials_used: int


def _visit_count(trajectory: Trajectory, arc: Arc, n: int, settings: XiSettings) -> tuple[int, bool]:
    estimate = xi_of(trajectory, settings)
    orbit = trajectory.inverse_orbit(estimate.xi_hat, n)
    return sum(arc.contains_point(u) for u in orbit[1:]), estimate.concentrated


def xi_visit_fraction(
    mu: StepDistribution,
    arc: Arc,
    n: int,
    trials: int,
    xi_horizon: int,
    seed: int = 0,
    workers: int = 1,
    settings: XiSettings = DEFAULT_XI,
    bins: int = 32,
) -> VisitReport:
    """E[#{1 ≤ k ≤ n : ξ̂ ∈ w_k(J)}]/n junto con ν̄̂(J) del paseo reflejado."""

    if xi_horizon < n:
        raise ValueError("xi_horizon debe ser ≥ n.")
    results = batch(mu, xi_horizon, trials, seed, partial(_visit_count, arc=arc, n=n, settings=settings), workers)
    values, _ = successful(results)
    fractions = np.array([count / n for count, _ in values], dtype=float)
    fraction = float(fractions.mean()) if len(fractions) else 0.0
    sigma = float(fractions.std(ddof=1) / math.sqrt(len(fractions))) if len(fractions) > 1 else 0.0
    reflected = stationary_histogram(reflect(mu), xi_horizon, trials, bins, derive_seed(seed, 3), workers, settings)
    nu_bar, nu_sigma = reflected.arc_fraction(arc)
    bound = 2 * nu_bar + 3 * math.sqrt(sigma**2 + 4 * nu_sigma**2)
    return VisitReport(
        fraction=fraction,
        sigma=sigma,
        nu_bar=nu_bar,
        nu_bar_sigma=nu_sigma,
        bound_holds=fraction <= bound,
        degenerate=not any(ok for _, ok in values),
        trials_used=len(values),
    )


@dataclass(frozen=True)
class RadonNikodymReport:
    frequency: float | None
    expected: Fraction
    sigma: float
    z: float
    within_3sigma: bool
    numerator: int
    denominator: int


def _rn_counts(trajectory: Trajectory, a_index: int, arc: Arc, n: int, settings: XiSettings) -> tuple[int, int]:
    estimate = xi_of(trajectory, settings)
    orbit = trajectory.inverse_orbit(estimate.xi_hat, n)
    numerator = denominator = 0
    for k in range(n):
        if arc.contains_point(orbit[k]):
            continue
        denominator += 1
        if trajectory.indices[k] == a_index:
            numerator += 1
    return numerator, denominator


def _check_support_inside(a: PiecewiseAffineCircleMap, arc: Arc) -> None:
    arcs = support(a)
    if not isinstance(arcs, list) or not all(arc.contains_arc(piece) for piece in arcs):
        raise CircleMapError("El soporte de a debe estar contenido en J.")


def conditional_increment_frequency(
    mu: StepDistribution,
    a: PiecewiseAffineCircleMap,
    arc: Arc | None,
    n: int,
    trials: int,
    xi_horizon: int,
    seed: int = 0,
    workers: int = 1,
    settings: XiSettings = DEFAULT_XI,
) -> RadonNikodymReport:
    """Frecuencia de g_{k+1} = a entre los pasos con w_k⁻¹(ξ̂) ∉ J, contrastada con μ(a)."""

    a_index = mu.index_of(a)
    if a_index is None:
        raise ValueError("a no pertenece al soporte de μ.")
    arc = smallest_interval_containing_support(a) if arc is None else arc
    _check_support_inside(a, arc)
    if xi_horizon < n:
        raise ValueError("xi_horizon debe ser ≥ n.")
    results = batch(
        mu, xi_horizon, trials, seed, partial(_rn_counts, a_index=a_index, arc=arc, n=n, settings=settings), workers
    )
    values, _ = successful(results)
    numerator = sum(num for num, _ in values)
    denominator = sum(den for _, den in values)
    expected = mu.atoms[a_index][1]
    p = float(expected)
    if denominator == 0:
        return RadonNikodymReport(None, expected, 0.0, 0.0, False, 0, 0)
    frequency = numerator / denominator
    sigma = math.sqrt(p * (1 - p) / denominator)
    if sigma == 0:
        z = 0.0 if frequency == p else math.inf
    else:
        z = (frequency - p) / sigma
    return RadonNikodymReport(frequency, expected, sigma, z, abs(z) <= 3, numerator, denominator)


@dataclass(frozen=True)
class ContractionCertificate:
    element: PiecewiseAffineCircleMap
    steps: int
    trial: int | None


def contract_interval_into(
    mu: StepDistribution,
    source: Arc,
    target: Arc,
    max_steps: int,
    trials: int,
    seed: int = 0,
) -> ContractionCertificate | None:
    """Busca w_n⁻¹ con w_n⁻¹(I) ⊆ J; el certificado se reverifica con aritmética exacta."""

    if source.length == 0 or target.length == 0:
        raise CircleMapError("I y J deben tener interior no vacío.")
    if target.contains_arc(source):
        return ContractionCertificate(IDENTITY, 0, None)
    for trial in range(trials):
        trajectory = sample_trajectory(mu, max_steps, derive_seed(seed, trial))
        left, right = source.left, source.right
        for step, g in enumerate(trajectory.increments, start=1):
            left, right = g.preimage(left), g.preimage(right)
            if not target.contains_arc(Arc(left, right)):
                continue
            element = invert(trajectory.position(step))
            if target.contains_arc(source.image(element)):
                return ContractionCertificate(element, step, trial)
            _logger.warning("Certificado descartado en el ensayo %s, paso %s.", trial, step)
    _logger.info("contraccion-no-encontrada ensayos=%s pasos=%s", trials, max_steps)
    return None
