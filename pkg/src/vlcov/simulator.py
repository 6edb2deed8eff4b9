"""
Monte Carlo simulation of the attocell network, the reference the analytic engine is checked against.

Every trial draws its own random stream from (seed, trial index) with a counter-based generator, and trials are
processed in fixed chunks, so estimates do not depend on how many workers run them.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum, auto
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from .analytic import CoverageCurve, CoverageKind, Method, mean_load
from .channel import ChannelConstants, NetworkParams, derive_constants, pathloss_from_squared_distance
from .geometry import Point, check_location, mirror_coordinate, ring_offsets

logger = logging.getLogger(__name__)

CHUNK_TRIALS = 5000
"""Trials per work item; part of the definition of a run, never derived from the worker count"""

Z_95 = 1.96


class Mode(Enum):
    INDEPENDENT = auto()
    """Each ring holds a fresh Poisson process, as assumed by the analysis"""
    MIRRORED = auto()
    """Ring points are the wall images of the transmitters in the room"""


class Typical(Enum):
    TYPICAL = auto()


TYPICAL = Typical.TYPICAL
"""A receiver drawn uniformly in the room, anew for every trial"""

Location = Union[Point, Typical]


@dataclass(frozen=True)
class NetworkRealization:
    """One draw of the real (order 0) and virtual (order k) transmitters."""

    positions: np.ndarray
    """Shape (n, 2), positions on the floor plane"""
    orders: np.ndarray
    """Shape (n,), reflection orders"""
    seed: int

    def __post_init__(self) -> None:
        assert self.positions.ndim == 2 and self.positions.shape[1] == 2
        assert self.orders.shape == (self.positions.shape[0],)

    def __len__(self) -> int:
        return int(self.orders.size)

    def count(self, k: int) -> int:
        return int(np.count_nonzero(self.orders == k))

    @property
    def transmitters(self) -> List[Tuple[Point, int]]:
        return [((float(x), float(y)), int(k)) for (x, y), k in zip(self.positions, self.orders)]


@dataclass(frozen=True)
class McEstimate:
    value: float
    ci_halfwidth: float
    """95% normal approximation"""
    trials: int

    def __post_init__(self) -> None:
        assert 0 <= self.value <= 1 and self.ci_halfwidth >= 0 and self.trials >= 1

    @staticmethod
    def from_successes(successes: int, trials: int) -> 'McEstimate':
        p = successes / trials
        return McEstimate(value=p, ci_halfwidth=Z_95 * math.sqrt(p * (1 - p) / trials), trials=trials)


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    """The random stream of one trial, a pure function of (seed, trial)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial,))))


def _sample(params: NetworkParams, K: int, mode: Mode, rng: np.random.Generator, seed: int) -> NetworkRealization:
    a = params.a
    room_area = 4 * a * a
    count = rng.poisson(params.density * room_area)
    room = rng.uniform(-a, a, size=(count, 2))
    positions = [room]
    orders = [np.zeros(count, dtype=int)]
    for k in range(1, K + 1):
        offsets = np.array(ring_offsets(k, a).offsets)
        if mode is Mode.INDEPENDENT:
            ring_count = rng.poisson(params.density * room_area * len(offsets))
            squares = rng.integers(len(offsets), size=ring_count)
            points = offsets[squares] + rng.uniform(-a, a, size=(ring_count, 2))
        else:
            images = []
            for ox, oy in offsets:
                i, j = int(round(ox / (2 * a))), int(round(oy / (2 * a)))
                images.append(np.stack([mirror_coordinate(room[:, 0], i, a), mirror_coordinate(room[:, 1], j, a)],
                                       axis=1))
            points = np.concatenate(images) if images else np.zeros((0, 2))
        positions.append(points)
        orders.append(np.full(points.shape[0], k, dtype=int))
    return NetworkRealization(positions=np.concatenate(positions), orders=np.concatenate(orders), seed=seed)


def sample_network(params: NetworkParams, K: int, mode: Mode, rng_seed: int, trial: int = 0) -> NetworkRealization:
    """
    Draw the transmitters of one trial: a Poisson process of density lambda in the room plus, for every order
    1..K, either an independent Poisson process on ring k (INDEPENDENT) or the wall images of the room's
    transmitters (MIRRORED).
    """
    assert K >= 0, f"The reflection order cannot be negative, got {K}"
    return _sample(params, K, mode, trial_generator(rng_seed, trial), rng_seed)


def _losses(realization: NetworkRealization, y: Point, consts: ChannelConstants, eta: float) -> np.ndarray:
    d2 = np.sum((realization.positions - np.asarray(y)) ** 2, axis=1)
    return pathloss_from_squared_distance(d2, consts) * eta ** realization.orders


def evaluate_sinr(realization: NetworkRealization, y: Point, consts: ChannelConstants,
                  eta: float) -> Tuple[float, Optional[int]]:
    """
    The SINR at y under strongest-signal association.

    :returns: (sinr, index of the serving transmitter); (0.0, None) when there are no transmitters
    """
    if len(realization) == 0:
        return 0.0, None
    losses = _losses(realization, y, consts, eta)
    serving = int(np.argmax(losses))
    interference = float(losses.sum() - losses[serving])
    noise = interference + consts.sigma2
    sinr = math.inf if noise == 0 else float(losses[serving]) / noise
    return sinr, serving


def count_covering_transmitters(realization: NetworkRealization, y: Point, consts: ChannelConstants, eta: float,
                                tau: float) -> int:
    """The number of transmitters whose own SINR at y exceeds tau; at most one for tau >= 1."""
    if len(realization) == 0:
        return 0
    losses = _losses(realization, y, consts, eta)
    with np.errstate(divide="ignore", invalid="ignore"):
        sinrs = losses / (losses.sum() - losses + consts.sigma2)
    return int(np.count_nonzero(sinrs > tau))


@dataclass(frozen=True)
class _Outcomes:
    sinr: np.ndarray
    interference: np.ndarray
    """Total received signal of all transmitters, the object of the interference CDF"""


def _run_chunk(params: NetworkParams, location: Location, K: int, mode: Mode, seed: int, start: int,
               stop: int) -> _Outcomes:
    consts = derive_constants(params)
    sinr = np.empty(stop - start)
    interference = np.empty(stop - start)
    for position, trial in enumerate(range(start, stop)):
        rng = trial_generator(seed, trial)
        realization = _sample(params, K, mode, rng, seed)
        if location is TYPICAL:
            y: Point = tuple(rng.uniform(-params.a, params.a, size=2))  # type: ignore
        else:
            y = location  # type: ignore
        sinr[position], _ = evaluate_sinr(realization, y, consts, params.eta)
        interference[position] = float(_losses(realization, y, consts, params.eta).sum()) if len(realization) else 0.0
        assert count_covering_transmitters(realization, y, consts, params.eta, 1.0) <= 1, \
            f"Two transmitters cover trial {trial}"
    return _Outcomes(sinr=sinr, interference=interference)


def run_trials(params: NetworkParams, location: Location, K: int, mode: Mode, trials: int, seed: int,
               workers: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    Simulate `trials` independent networks.

    :returns: (sinr, interference) per trial, in trial order
    """
    assert trials >= 1, f"At least one trial is needed, got {trials}"
    if location is not TYPICAL:
        check_location(location, params.a)  # type: ignore
    chunks = [(start, min(start + CHUNK_TRIALS, trials)) for start in range(0, trials, CHUNK_TRIALS)]
    logger.info("Simulating %d trials in %d chunks on %d workers", trials, len(chunks), workers)
    outcomes = Parallel(n_jobs=workers)(
        delayed(_run_chunk)(params, location, K, mode, seed, start, stop) for start, stop in chunks)
    sinr = np.concatenate([outcome.sinr for outcome in outcomes])
    interference = np.concatenate([outcome.interference for outcome in outcomes])
    empty = int(np.count_nonzero(interference == 0))
    if empty:
        logger.debug("%d of %d trials had no transmitter", empty, trials)
    return sinr, interference


def _curve(thresholds: Sequence[float], samples: np.ndarray, kind: CoverageKind) -> CoverageCurve:
    estimates = [McEstimate.from_successes(int(np.count_nonzero(samples > threshold)), samples.size)
                 for threshold in thresholds]
    return CoverageCurve(thresholds=tuple(thresholds), values=tuple(e.value for e in estimates), kind=kind,
                         method=Method.MONTE_CARLO, ci_halfwidth=tuple(e.ci_halfwidth for e in estimates))


def estimate_coverage(params: NetworkParams, location: Location, taus: Sequence[float], K: int, mode: Mode,
                      trials: int, base_seed: int, workers: int = 1) -> CoverageCurve:
    """The fraction of trials whose SINR exceeds each tau. Thresholds below 1 are fine here."""
    assert all(tau > 0 for tau in taus)
    sinr, _ = run_trials(params, location, K, mode, trials, base_seed, workers)
    return _curve(taus, sinr, CoverageKind.SINR)


def empirical_interference_cdf(interference: np.ndarray, s_grid: Sequence[float]) -> List[McEstimate]:
    """
    The fraction of samples with I < s for each s. At s = 0 the empty networks (I = 0 exactly) are counted, so the
    value there is the void probability of the network.
    """
    trials = interference.size
    return [McEstimate.from_successes(int(np.count_nonzero(interference <= 0 if s == 0 else interference < s)), trials)
            for s in s_grid]


def estimate_interference_cdf(params: NetworkParams, location: Location, s_grid: Sequence[float], K: int,
                              mode: Mode, trials: int, seed: int, workers: int = 1) -> List[McEstimate]:
    """The empirical P(I < s), I summing every transmitter (the serving one included)."""
    _, interference = run_trials(params, location, K, mode, trials, seed, workers)
    return empirical_interference_cdf(interference, s_grid)


def rates(params: NetworkParams, sinr: np.ndarray) -> np.ndarray:
    """zeta1 W / n log2(1 + zeta2 SINR) with the mean load n."""
    n = mean_load(params.user_density, params.density)
    return params.zeta1 * params.bandwidth / n * np.log2(1 + params.zeta2 * sinr)


def estimate_rate_coverage(params: NetworkParams, location: Location, rhos: Sequence[float], K: int, mode: Mode,
                           trials: int, seed: int, workers: int = 1) -> CoverageCurve:
    sinr, _ = run_trials(params, location, K, mode, trials, seed, workers)
    return _curve(rhos, rates(params, sinr), CoverageKind.RATE)


def estimate_median_rate(params: NetworkParams, location: Location, K: int, mode: Mode, trials: int, seed: int,
                         workers: int = 1) -> float:
    """The empirical median of the rate, where Rc crosses 1/2."""
    sinr, _ = run_trials(params, location, K, mode, trials, seed, workers)
    return float(np.median(rates(params, sinr)))


def median_rate_from_curve(curve: CoverageCurve) -> Optional[float]:
    """
    The rate where a rate coverage curve crosses 1/2, interpolated linearly in log(rho).

    :returns: None when the curve does not cross 1/2
    """
    assert curve.kind is CoverageKind.RATE
    values = curve.values
    for index in range(1, len(values)):
        if values[index - 1] >= 0.5 > values[index]:
            lo, hi = math.log(curve.thresholds[index - 1]), math.log(curve.thresholds[index])
            share = (values[index - 1] - 0.5) / (values[index - 1] - values[index])
            return math.exp(lo + share * (hi - lo))
    return None
