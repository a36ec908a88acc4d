"""Trayectorias reproducibles del paseo aleatorio y ejecución Monte Carlo por lotes.

La semilla de cada ensayo es función pura de ``(base_seed, índice)`` y el
generador es Philox (basado en contador), así que el número de procesos
nunca cambia los resultados.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from .circle_map import IDENTITY, PiecewiseAffineCircleMap, compose
from .measure import StepDistribution, sample_indices

_logger = logging.getLogger(__name__)

DEFAULT_CHECKPOINT_INTERVAL = 16


def derive_seed(base_seed: int, index: int) -> int:
    """Semilla de 64 bits del ensayo ``index``."""

    sequence = np.random.SeedSequence(int(base_seed), spawn_key=(int(index),))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


@dataclass
class Trajectory:
    """Incrementos g_1..g_N; las posiciones w_k = g_1⋯g_k se calculan bajo demanda."""

    increments: tuple[PiecewiseAffineCircleMap, ...]
    seed: int | None = None
    indices: tuple[int, ...] | None = None
    labels: tuple[str, ...] | None = None
    checkpoint_interval: int = DEFAULT_CHECKPOINT_INTERVAL
    _checkpoints: dict[int, PiecewiseAffineCircleMap] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.checkpoint_interval < 1:
            raise ValueError("checkpoint_interval debe ser ≥ 1.")
        self._checkpoints.setdefault(0, IDENTITY)

    @classmethod
    def from_increments(
        cls,
        increments: Sequence[PiecewiseAffineCircleMap],
        checkpoint_interval: int = DEFAULT_CHECKPOINT_INTERVAL,
    ) -> "Trajectory":
        return cls(increments=tuple(increments), checkpoint_interval=checkpoint_interval)

    @property
    def horizon(self) -> int:
        return len(self.increments)

    def increment(self, k: int) -> PiecewiseAffineCircleMap:
        """g_k con k en 1..N."""

        if not 1 <= k <= self.horizon:
            raise IndexError(f"Incremento {k} fuera de 1..{self.horizon}.")
        return self.increments[k - 1]

    def position(self, k: int) -> PiecewiseAffineCircleMap:
        if not 0 <= k <= self.horizon:
            raise IndexError(f"Posición {k} fuera de 0..{self.horizon}.")
        interval = self.checkpoint_interval
        base = max(c for c in self._checkpoints if c <= k and c % interval == 0)
        current = self._checkpoints[base]
        for step in range(base + 1, k + 1):
            current = compose(current, self.increments[step - 1])
            if step % interval == 0:
                self._checkpoints[step] = current
        return current

    def iter_positions(self, upto: int | None = None) -> Iterator[tuple[int, PiecewiseAffineCircleMap]]:
        upto = self.horizon if upto is None else upto
        current = IDENTITY
        yield 0, current
        for step in range(1, upto + 1):
            current = compose(current, self.increments[step - 1])
            if step % self.checkpoint_interval == 0:
                self._checkpoints.setdefault(step, current)
            yield step, current

    def inverse_orbit(self, x, upto: int | None = None) -> list[Fraction]:
        """[w_0⁻¹(x), …, w_upto⁻¹(x)] vía w_k⁻¹(x) = g_k⁻¹(w_{k−1}⁻¹(x))."""

        upto = self.horizon if upto is None else upto
        point = Fraction(x) % 1
        orbit = [point]
        for g in self.increments[:upto]:
            point = g.preimage(point)
            orbit.append(point)
        return orbit

    def shift(self) -> "Trajectory":
        """Trayectoria conducida por los incrementos g_2, g_3, …"""

        return Trajectory(
            increments=self.increments[1:],
            indices=self.indices[1:] if self.indices is not None else None,
            labels=self.labels[1:] if self.labels is not None else None,
            checkpoint_interval=self.checkpoint_interval,
        )

    def increment_label(self, k: int) -> str:
        if self.labels is not None:
            return self.labels[k - 1]
        g = self.increment(k)
        return "e" if g.is_identity else g.digest


def sample_trajectory(
    mu: StepDistribution,
    horizon: int,
    seed: int,
    checkpoint_interval: int = DEFAULT_CHECKPOINT_INTERVAL,
) -> Trajectory:
    if horizon < 0:
        raise ValueError("El horizonte debe ser ≥ 0.")
    indices = sample_indices(mu, make_rng(seed), horizon)
    return Trajectory(
        increments=tuple(mu.atoms[i][0] for i in indices),
        seed=int(seed),
        indices=tuple(indices),
        labels=tuple(mu.labels[i] for i in indices),
        checkpoint_interval=checkpoint_interval,
    )


@dataclass(frozen=True)
class TrialFailure:
    index: int
    reason: str


def _run_trial(
    mu: StepDistribution,
    horizon: int,
    base_seed: int,
    checkpoint_interval: int,
    statistic: Callable[[Trajectory], Any],
    index: int,
):
    try:
        trajectory = sample_trajectory(mu, horizon, derive_seed(base_seed, index), checkpoint_interval)
        return statistic(trajectory)
    except Exception as exc:
        return TrialFailure(index, f"{type(exc).__name__}: {exc}")


def batch(
    mu: StepDistribution,
    horizon: int,
    trials: int,
    base_seed: int,
    statistic: Callable[[Trajectory], Any],
    workers: int = 1,
    checkpoint_interval: int = DEFAULT_CHECKPOINT_INTERVAL,
) -> list:
    """Aplica ``statistic`` a ``trials`` trayectorias; el orden del resultado es el de los índices.

    Un ensayo que lanza una excepción aparece como ``TrialFailure`` en su
    posición; el lote continúa. Con ``workers > 1`` la estadística debe ser
    serializable (función de módulo o ``functools.partial``).
    """

    if trials <= 0:
        return []
    task = partial(_run_trial, mu, horizon, base_seed, checkpoint_interval, statistic)
    if workers <= 1 or trials == 1:
        results = [task(index) for index in range(trials)]
    else:
        chunksize = max(1, trials // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(task, range(trials), chunksize=chunksize))
    failures = sum(isinstance(result, TrialFailure) for result in results)
    if failures:
        _logger.warning("lote-con-fallos fallidos=%s de=%s", failures, trials)
    return results


def successful(results: Sequence) -> tuple[list, list[TrialFailure]]:
    values = [result for result in results if not isinstance(result, TrialFailure)]
    failures = [result for result in results if isinstance(result, TrialFailure)]
    return values, failures


def _labels_of(trajectory: Trajectory) -> tuple[str, ...]:
    return tuple(trajectory.increment_label(step) for step in range(1, trajectory.horizon + 1))


def export_trajectories(
    mu: StepDistribution,
    horizon: int,
    trials: int,
    base_seed: int,
    workers: int = 1,
) -> Iterator[tuple[int, int, str]]:
    """Filas (ensayo, paso, incremento) para exportar a CSV."""

    labels = batch(mu, horizon, trials, base_seed, _labels_of, workers)
    for trial, row in enumerate(labels):
        if isinstance(row, TrialFailure):
            continue
        for step, label in enumerate(row, start=1):
            yield trial, step, label
