"""Cociclo de saltos de derivada, dinámica de configuraciones y funciones armónicas asociadas.

C_g(x) es el logaritmo en base 2 del salto de derivada de g⁻¹ en x. En T los
saltos son potencias de 2 y los valores se guardan como racionales exactos;
para otros subgrupos se usa ``math.log2`` y la configuración queda marcada
como no exacta. Se cumple C_{gh} = C_g + S_g C_h con (S_g C)(x) = C(g⁻¹(x)).
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, partial
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .boundary_stats import DEFAULT_XI, XiSettings, stationary_histogram
from .circle_map import IDENTITY, PiecewiseAffineCircleMap, compose, derivative_jump_ratio, invert, smallest_interval_containing_support
from .errors import CalibrationError
from .exact_arith import exact_log2, format_rational, to_circle
from .measure import StepDistribution
from .thompson import GeneratorSet, default_generators, remark_element
from .walk_engine import Trajectory, batch, derive_seed, successful

_logger = logging.getLogger(__name__)

JumpValue = Union[Fraction, float]


@dataclass(frozen=True)
class BreakpointConfiguration:
    """Función de soporte finito S¹ → ℝ; las entradas nulas no se almacenan."""

    entries: Mapping[Fraction, JumpValue] = field(default_factory=dict)
    exact: bool = True

    def __post_init__(self):
        object.__setattr__(self, "entries", {x: v for x, v in self.entries.items() if v != 0})

    def get(self, x) -> JumpValue:
        return self.entries.get(x, Fraction(0))

    def __len__(self) -> int:
        return len(self.entries)

    def __add__(self, other: "BreakpointConfiguration") -> "BreakpointConfiguration":
        merged = dict(self.entries)
        for x, v in other.entries.items():
            merged[x] = merged.get(x, Fraction(0)) + v
        return BreakpointConfiguration(merged, self.exact and other.exact)

    def __neg__(self) -> "BreakpointConfiguration":
        return BreakpointConfiguration({x: -v for x, v in self.entries.items()}, self.exact)

    def to_json(self) -> dict[str, str]:
        return {
            format_rational(x): format_rational(v) if isinstance(v, Fraction) else f"{v:.12g}"
            for x, v in sorted(self.entries.items())
        }


EMPTY = BreakpointConfiguration()


@lru_cache(maxsize=4096)
def cocycle(g: PiecewiseAffineCircleMap) -> BreakpointConfiguration:
    inverse = invert(g)
    entries: dict[Fraction, JumpValue] = {}
    exact = True
    for x in inverse.true_breakpoints():
        ratio = derivative_jump_ratio(inverse, x)
        exponent = exact_log2(ratio)
        if exponent is None:
            exact = False
            entries[x] = math.log2(ratio.numerator) - math.log2(ratio.denominator)
        else:
            entries[x] = Fraction(exponent)
    return BreakpointConfiguration(entries, exact)


def shift_config(g: PiecewiseAffineCircleMap, config: BreakpointConfiguration) -> BreakpointConfiguration:
    """S_g C: la entrada en x pasa a g(x)."""

    return BreakpointConfiguration({g.evaluate(x): v for x, v in config.entries.items()}, config.exact)


def act(g: PiecewiseAffineCircleMap, config: BreakpointConfiguration) -> BreakpointConfiguration:
    """(g, C) ↦ C_g + S_g C."""

    return cocycle(g) + shift_config(g, config)


def verify_chain_rule(g: PiecewiseAffineCircleMap, h: PiecewiseAffineCircleMap) -> bool:
    return cocycle(compose(g, h)) == act(g, cocycle(h))


@dataclass(frozen=True)
class CocycleCheck:
    chain_rule: bool
    inverse_rule: bool
    integer_valued: bool


def cocycle_pair_check(g: PiecewiseAffineCircleMap, h: PiecewiseAffineCircleMap) -> CocycleCheck:
    """Regla de la cadena para (g, h), C_{g⁻¹} = −S_{g⁻¹}C_g y valores enteros (caso T)."""

    inverse = invert(g)
    values = list(cocycle(g).entries.values()) + list(cocycle(compose(g, h)).entries.values())
    return CocycleCheck(
        chain_rule=verify_chain_rule(g, h),
        inverse_rule=cocycle(inverse) == -shift_config(inverse, cocycle(g)),
        integer_valued=all(isinstance(v, Fraction) and v.denominator == 1 for v in values),
    )


def generator_breakpoints(generators: GeneratorSet | None = None) -> tuple[Fraction, ...]:
    """Unión de los cortes de los generadores: puntos vigilados por defecto."""

    generators = generators or default_generators()
    points = set()
    for name in generators.names:
        points.update(generators[name].true_breakpoints())
    return tuple(sorted(points))


@dataclass(frozen=True)
class StabilizationRecord:
    point: Fraction
    values: tuple[JumpValue, ...]
    last_change: int

    @property
    def final(self) -> JumpValue:
        return self.values[-1]


def track_configuration(
    trajectory: Trajectory,
    watched: Iterable,
    horizon: int | None = None,
) -> dict[Fraction, StabilizationRecord]:
    """Valores C_{w_n}(x), n = 0..horizon, para cada x vigilado.

    C_{w_{n+1}}(x) = C_{w_n}(x) + C_{g_{n+1}}(w_n⁻¹(x)): sólo cambia cuando
    w_n⁻¹(x) cae en el soporte de C_{g_{n+1}}.
    """

    horizon = trajectory.horizon if horizon is None else horizon
    records = {}
    for x in {to_circle(point) for point in watched}:
        u = x
        value: JumpValue = Fraction(0)
        values = [value]
        last_change = 0
        for step, g in enumerate(trajectory.increments[:horizon], start=1):
            delta = cocycle(g).get(u)
            if delta:
                value += delta
                last_change = step
            values.append(value)
            u = g.preimage(u)
        records[x] = StabilizationRecord(x, tuple(values), last_change)
    return records


def final_matches_cocycle(trajectory: Trajectory, record: StabilizationRecord, m: int) -> bool:
    """Comprueba que el valor estabilizado coincide con C_{w_m}(x) para m ≥ N(x)."""

    if m < record.last_change:
        raise ValueError("m debe ser ≥ al último cambio.")
    return cocycle(trajectory.position(m)).get(record.point) == record.final


def _last_changes(
    trajectory: Trajectory, watched: tuple[Fraction, ...], verify: bool = False
) -> tuple[tuple[int, JumpValue, bool | None], ...]:
    records = track_configuration(trajectory, watched)
    final = cocycle(trajectory.position(trajectory.horizon)) if verify else None
    return tuple(
        (records[x].last_change, records[x].final, final.get(x) == records[x].final if verify else None)
        for x in watched
    )


@dataclass(frozen=True)
class StabilizationSummary:
    watched: tuple[Fraction, ...]
    rows: tuple[tuple[tuple[int, JumpValue, bool | None], ...], ...]
    threshold: int
    fraction_stabilized: float
    failures: int

    @property
    def max_last_change(self) -> int:
        return max((change for row in self.rows for change, _, _ in row), default=0)

    @property
    def mismatches(self) -> int:
        return sum(matches is False for row in self.rows for _, _, matches in row)


def stabilization_run(
    mu: StepDistribution,
    watched: Sequence,
    horizon: int,
    trials: int,
    seed: int,
    threshold: int,
    workers: int = 1,
    verify: bool = False,
) -> StabilizationSummary:
    """Fracción de trayectorias con N(x) ≤ ``threshold`` en todos los puntos vigilados.

    Con ``verify`` se compara además cada valor final con C_{w_horizon}(x).
    """

    watched = tuple(sorted({to_circle(x) for x in watched}))
    results = batch(mu, horizon, trials, seed, partial(_last_changes, watched=watched, verify=verify), workers)
    rows, failures = successful(results)
    settled = sum(all(change <= threshold for change, _, _ in row) for row in rows)
    return StabilizationSummary(
        watched=watched,
        rows=tuple(rows),
        threshold=threshold,
        fraction_stabilized=settled / len(rows) if rows else 0.0,
        failures=len(failures),
    )


@dataclass(frozen=True)
class ReturnStats:
    point: Fraction
    horizon: int
    returns: tuple[int, ...]
    last_returns: tuple[int, ...]
    recurrent_degenerate: bool

    @property
    def mean_returns(self) -> float:
        return float(np.mean(self.returns)) if self.returns else 0.0

    def last_return_histogram(self, bins: int = 10) -> list[int]:
        counts, _ = np.histogram(self.last_returns, bins=bins, range=(0, self.horizon))
        return counts.tolist()

    def fraction_last_below(self, limit: int) -> float:
        if not self.last_returns:
            return 0.0
        return sum(last < limit for last in self.last_returns) / len(self.last_returns)


def _returns(trajectory: Trajectory, x: Fraction) -> tuple[int, int]:
    orbit = trajectory.inverse_orbit(x)
    hits = [k for k in range(1, len(orbit)) if orbit[k] == x]
    return len(hits), hits[-1] if hits else 0


def orbit_return_stats(
    mu: StepDistribution,
    x,
    horizon: int,
    trials: int,
    seed: int = 0,
    workers: int = 1,
) -> ReturnStats:
    """Retornos a x de la cadena x_n = w_n⁻¹(x) y el instante del último retorno (0 si no hay)."""

    x = to_circle(x)
    results = batch(mu, horizon, trials, seed, partial(_returns, x=x), workers)
    values, _ = successful(results)
    returns = tuple(count for count, _ in values)
    degenerate = bool(values) and horizon > 0 and all(count == horizon for count in returns)
    if degenerate:
        _logger.warning("cadena-recurrente-degenerada x=%s", x)
    return ReturnStats(
        point=x,
        horizon=horizon,
        returns=returns,
        last_returns=tuple(last for _, last in values),
        recurrent_degenerate=degenerate,
    )


@dataclass(frozen=True)
class HarmonicEstimate:
    value: float
    sigma: float
    ci_low: float
    ci_high: float
    unstabilized: int
    trials_used: int

    @property
    def unstabilized_fraction(self) -> float:
        return self.unstabilized / self.trials_used if self.trials_used else 0.0


def _stabilized_value(trajectory: Trajectory, g: PiecewiseAffineCircleMap, y: Fraction) -> tuple[JumpValue, bool]:
    # Paseo prefijado por g: C_{g w_n}(y) = C_g(y) + C_{w_n}(g⁻¹(y)).
    u = g.preimage(y)
    value: JumpValue = cocycle(g).get(y)
    last_change = 0
    for step, h in enumerate(trajectory.increments, start=1):
        delta = cocycle(h).get(u)
        if delta:
            value += delta
            last_change = step
        u = h.preimage(u)
    settle = trajectory.horizon - trajectory.horizon // 4
    return value, last_change > settle


def _harmonic_samples(
    mu: StepDistribution, g: PiecewiseAffineCircleMap, y: Fraction, horizon: int, trials: int, seed: int, workers: int
) -> list[tuple[JumpValue, bool]]:
    results = batch(mu, horizon, trials, seed, partial(_stabilized_value, g=g, y=y), workers)
    values, _ = successful(results)
    return values


def estimate_harmonic(
    mu: StepDistribution,
    g: PiecewiseAffineCircleMap,
    y,
    k,
    horizon: int,
    trials: int,
    seed: int = 0,
    workers: int = 1,
) -> HarmonicEstimate:
    """f̂(g) = ℙ_g[C_∞(w)(y) = k]; los ensayos sin estabilizar se cuentan, nunca se descartan."""

    y = to_circle(y)
    samples = _harmonic_samples(mu, g, y, horizon, trials, seed, workers)
    if not samples:
        return HarmonicEstimate(0.0, 0.0, 0.0, 0.0, 0, 0)
    p = sum(value == k for value, _ in samples) / len(samples)
    sigma = math.sqrt(p * (1 - p) / len(samples))
    return HarmonicEstimate(
        value=p,
        sigma=sigma,
        ci_low=max(0.0, p - 1.96 * sigma),
        ci_high=min(1.0, p + 1.96 * sigma),
        unstabilized=sum(flag for _, flag in samples),
        trials_used=len(samples),
    )


@dataclass(frozen=True)
class TargetCalibration:
    k: JumpValue
    frequency: float
    distribution: tuple[tuple[JumpValue, int], ...]


def calibrate_target(
    mu: StepDistribution,
    y,
    horizon: int,
    trials: int,
    seed: int = 0,
    workers: int = 1,
) -> TargetCalibration:
    """Valor estabilizado más frecuente de C_∞(w)(y) partiendo de e."""

    samples = _harmonic_samples(mu, IDENTITY, to_circle(y), horizon, trials, seed, workers)
    if not samples:
        raise CalibrationError("No hay ensayos válidos para calibrar k.")
    counts = Counter(value for value, _ in samples)
    k, hits = counts.most_common(1)[0]
    return TargetCalibration(k=k, frequency=hits / len(samples), distribution=tuple(counts.most_common()))


@dataclass(frozen=True)
class HarmonicityReport:
    f_g: HarmonicEstimate
    mean_value: float
    sigma_combined: float
    within_3sigma: bool


def harmonicity_check(
    mu: StepDistribution,
    g: PiecewiseAffineCircleMap,
    y,
    k,
    horizon: int,
    trials: int,
    seed: int = 0,
    workers: int = 1,
) -> HarmonicityReport:
    """Compara f̂(g) con Σ_h μ(h) f̂(gh) usando la misma semilla en todas las estimaciones."""

    f_g = estimate_harmonic(mu, g, y, k, horizon, trials, seed, workers)
    mean_value = 0.0
    variance = 0.0
    for h, weight in mu.atoms:
        f_gh = estimate_harmonic(mu, compose(g, h), y, k, horizon, trials, seed, workers)
        mean_value += float(weight) * f_gh.value
        variance += float(weight) ** 2 * f_gh.sigma**2
    sigma = math.sqrt(f_g.sigma**2 + variance)
    gap = abs(f_g.value - mean_value)
    return HarmonicityReport(f_g, mean_value, sigma, gap <= 3 * sigma if sigma else gap == 0)


@dataclass(frozen=True)
class TheoremBRow:
    n: int
    f_e: float
    f_an: float
    nu_In: float
    margin: float
    sigma: float
    verdict: bool


@dataclass(frozen=True)
class TheoremBReport:
    rows: tuple[TheoremBRow, ...]
    k: JumpValue
    unstabilized: int

    @property
    def verdict(self) -> bool:
        return any(row.verdict for row in self.rows)


def theorem_b_witness(
    mu: StepDistribution,
    y,
    k,
    n_list: Sequence[int],
    trials: int,
    horizon: int,
    xi_horizon: int,
    seed: int = 0,
    workers: int = 1,
    bins: int = 32,
    settings: XiSettings = DEFAULT_XI,
) -> TheoremBReport:
    """Contrasta |f̂(a_n) − f̂(e)| con la cota 2ν̂(I_n) que cumpliría una función armónica del círculo.

    El veredicto es cierto cuando la cota se rompe por más de 3σ en algún n.
    """

    y = to_circle(y)
    f_e = estimate_harmonic(mu, IDENTITY, y, k, horizon, trials, seed, workers)
    if f_e.value - 3 * f_e.sigma <= 0:
        raise CalibrationError(f"f̂(e) = {f_e.value:.4f} no se separa de 0; recalibre k.")
    histogram = stationary_histogram(mu, xi_horizon, trials, bins, derive_seed(seed, 5), workers, settings)
    rows = []
    unstabilized = f_e.unstabilized
    for n in n_list:
        a_n = remark_element(y, n)
        support_arc = smallest_interval_containing_support(a_n)
        f_an = estimate_harmonic(mu, a_n, y, k, horizon, trials, seed, workers)
        unstabilized += f_an.unstabilized
        nu, nu_sigma = histogram.arc_fraction(support_arc)
        margin = abs(f_an.value - f_e.value) - 2 * nu
        sigma = math.sqrt(f_e.sigma**2 + f_an.sigma**2 + 4 * nu_sigma**2)
        rows.append(TheoremBRow(n, f_e.value, f_an.value, nu, margin, sigma, margin > 3 * sigma))
        _logger.info("cota-armonica n=%s margen=%.4f sigma=%.4f", n, margin, sigma)
    return TheoremBReport(tuple(rows), k, unstabilized)
