"""
Analytic SINR and rate coverage of a receiver anywhere in the room.

The coverage probability follows from the Campbell-Mecke argument (valid for thresholds tau >= 1, where at most one
transmitter can exceed the threshold) combined with Gil-Pelaez inversion of the interference characteristic
function:

    Pc(tau, y) = lam |B_y| / 2 - lam / pi * integral_0^inf Im[exp(j t sigma2) F(j t / tau) K(j t)] / t dt

where F integrates exp(-s eta^k l) over the signal regions B_ky and K is the Laplace functional of the interference
over the reflection rings F_k(-y, a). Every spatial integrand depends on the position only through its distance to
the receiver, so all spatial integrals are computed as radial transforms (see `quadrature.integrate_radial`).
"""

import cmath
import logging
import math
from dataclasses import dataclass, field
from enum import Enum, auto
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import integrate

from .channel import ChannelConstants, NetworkParams, derive_constants, pathloss_from_squared_distance
from .geometry import Disk, Point, Region, arc_length, area, check_location, radial_breakpoints, ring_region, \
    signal_radius
from .quadrature import COVERAGE_SPEC, QuadratureSpec, ToleranceNotReachedError, adaptive_gauss, gil_pelaez_cdf, \
    gauss_legendre, integrate_radial, oscillatory_tail_integral

logger = logging.getLogger(__name__)

MEAN_LOAD_FACTOR = 1.28
"""Mean-load approximation constant for Poisson users and Poisson cells"""

MAX_SUPPORTED_ORDER = 4

MAX_RATE_DOUBLINGS = 64

TRANSFORM_SPEC = QuadratureSpec(rel_tol=1e-9, abs_tol=1e-14)
"""Tolerances of the spatial transforms inside the coverage integrand"""

ROTATED_PATH_END = 60.0
"""Where the rotated path of the h = 0 sector transform stops, exp(-60) being below any tolerance"""

_CHUNK = 16


class OutOfValidityError(ValueError):
    """Raised when the analytic model is asked about a threshold below 1, where it does not hold."""


class CoverageKind(Enum):
    SINR = auto()
    RATE = auto()


class Method(Enum):
    ANALYTIC = auto()
    MONTE_CARLO = auto()


@dataclass(frozen=True)
class CoverageCurve:
    """Coverage probabilities over a grid of thresholds."""

    thresholds: Tuple[float, ...]
    """SINR thresholds tau (linear) or rates rho (bits/s), strictly increasing"""
    values: Tuple[float, ...]
    kind: CoverageKind
    method: Method
    ci_halfwidth: Optional[Tuple[float, ...]] = None
    """95% confidence half widths, Monte Carlo only"""

    def __post_init__(self) -> None:
        assert len(self.thresholds) == len(self.values), "Every threshold needs exactly one value"
        assert all(0 <= v <= 1 for v in self.values), f"Coverage values must be probabilities, got {self.values}"
        assert all(b > a for a, b in zip(self.thresholds, self.thresholds[1:])), "Thresholds must be increasing"
        if self.ci_halfwidth is not None:
            assert len(self.ci_halfwidth) == len(self.values)
            assert all(w >= 0 for w in self.ci_halfwidth)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Scenario:
    """
    A network together with the location of the receiver.
    With noiseless set, sigma2 is forced to 0 (the setting of the corner/center equivalences).
    """

    params: NetworkParams
    y: Point
    noiseless: bool = False
    consts: ChannelConstants = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        check_location(self.y, self.params.a)
        consts = derive_constants(self.params)
        if self.noiseless:
            consts = consts.noiseless()
        object.__setattr__(self, "consts", consts)

    def at(self, y: Point) -> 'Scenario':
        """The same network seen from another location."""
        return Scenario(params=self.params, y=y, noiseless=self.noiseless)


@dataclass(frozen=True)
class ThresholdResult:
    """The SINR threshold matching a rate threshold, flagged when it falls below the analytic validity limit."""

    tau: float
    below_validity: bool


class RingTransforms:
    """
    Radial transforms of a family of rings, ring k weighted by eta^k:

        exponential(s) = sum_k integral over region_k of exp(-s eta^k l(|x|)) dx

    With h = 0 the path loss is singular at the receiver. The part of a ring around the receiver up to the first
    breakpoint is then a circular sector, whose transform is computed after the substitution u = l(r) as a
    Laplace-type integral on [u0, infinity), taken along a path turned into the direction where exp(-s u) decays.
    """

    def __init__(self, regions: Sequence[Region], weights: Sequence[float], consts: ChannelConstants,
                 spec: QuadratureSpec = TRANSFORM_SPEC) -> None:
        assert len(regions) == len(weights)
        self.consts = consts
        self.spec = spec
        self.rings = [(region, weight) for region, weight in zip(regions, weights) if not region.is_empty()]
        self.areas = [area(region) for region, _ in self.rings]
        self.cores = [self._core(region) for region, _ in self.rings]

    def _core(self, region: Region) -> Optional[Tuple[float, float]]:
        """(r0, opening angle) of the sector around the receiver, only needed when h = 0."""
        if self.consts.h > 0:
            return None
        edges = radial_breakpoints(region)
        if edges.size < 2 or edges[0] > 0:
            return None
        r0 = float(edges[1])
        angle = float(arc_length(region, np.array([r0 / 2]))[0]) / (r0 / 2)
        return r0, angle

    def total_area(self) -> float:
        return sum(self.areas)

    def _loss(self, r: np.ndarray) -> np.ndarray:
        return pathloss_from_squared_distance(r * r, self.consts)

    def exponential(self, s: np.ndarray) -> np.ndarray:
        """
        :param s: complex arguments with non-negative real part
        :returns: the transform for every s
        """
        s = np.asarray(s, dtype=complex).reshape(-1)
        total = np.zeros(s.size, dtype=complex)
        order = np.argsort(np.abs(s), kind="stable")
        for (region, weight), ring_area, core in zip(self.rings, self.areas, self.cores):
            if weight == 0:
                total += ring_area
                continue
            for start in range(0, s.size, _CHUNK):
                index = order[start:start + _CHUNK]
                total[index] += self._ring_exponential(region, weight, core, s[index])
        return total

    def _ring_exponential(self, region: Region, weight: float, core: Optional[Tuple[float, float]],
                          s: np.ndarray) -> np.ndarray:
        def g(r: np.ndarray) -> np.ndarray:
            with np.errstate(over="ignore", invalid="ignore"):
                values = np.exp(-np.outer(s, weight * self._loss(r)))
            return np.nan_to_num(values)

        r_min = 0.0 if core is None else core[0]
        outer = np.asarray(integrate_radial(g, region, self.spec, r_min=r_min).value).reshape(-1)
        if core is None:
            return outer
        r0, angle = core
        return outer + np.array([self._core_exponential(r0, angle, weight * value) for value in s])

    def _core_exponential(self, r0: float, angle: float, s: complex) -> complex:
        """
        (angle / 2 beta) integral_u0^inf u^(-1/beta - 1) exp(-s u) du with u0 = r0^(-2 beta).

        The path is turned onto u = u0 + w conj(s) / |s|^2, along which exp(-s u) decays like exp(-w) for any s with
        non-negative real part and Re(u) >= u0 stays away from the branch point. The integral over w is taken on
        [0, knee] directly and in log w above it, where the algebraic decay is smooth.
        """
        beta = self.consts.beta
        u0 = r0 ** (-2 * beta)
        scale = angle / (2 * beta)
        if s == 0:
            return scale * beta * u0 ** (-1 / beta)
        size = abs(s)
        direction = s.conjugate() / size
        exponent = -1 / beta - 1
        knee = min(1.0, u0 * size)

        def density(w: float) -> complex:
            u = u0 + direction * w / size
            assert u.real >= u0, f"The rotated path left the half plane Re(u) >= u0 at w = {w}"
            return u ** exponent * math.exp(-w)

        def stretched(v: float) -> complex:
            w = math.exp(v)
            return density(w) * w

        total = 0j
        for f, lo, hi in ((density, 0.0, knee), (stretched, math.log(knee), math.log(ROTATED_PATH_END))):
            real, _ = integrate.quad(lambda x: f(x).real, lo, hi, epsabs=self.spec.abs_tol,
                                     epsrel=self.spec.rel_tol, limit=200)
            tolerance = max(self.spec.abs_tol, self.spec.rel_tol * abs(real))
            imag, _ = integrate.quad(lambda x: f(x).imag, lo, hi, epsabs=tolerance, epsrel=self.spec.rel_tol,
                                     limit=200)
            total += complex(real, imag)
        return scale * direction / size * cmath.exp(-s * u0) * total

    def loss_moment(self) -> float:
        """sum_k eta^k * integral of l over ring k, infinite when h = 0 and a ring touches the receiver."""
        if any(core is not None for core in self.cores):
            return math.inf
        moment = 0.0
        for region, weight in self.rings:
            result = integrate_radial(lambda r: self._loss(r), region, self.spec)
            moment += weight * float(np.real(result.value))
        return moment


def _ring_weights(eta: float, K: int) -> List[float]:
    return [1.0] + [eta ** k for k in range(1, K + 1)]


def _check_order(K: int) -> None:
    assert 0 <= K <= MAX_SUPPORTED_ORDER, f"Reflection orders 0..{MAX_SUPPORTED_ORDER} are supported, got {K}"


def signal_regions(scenario: Scenario, tau: float, K: int) -> List[Region]:
    """The regions B_ky = F_k(-y, a) intersected with the disk of radius a_D^(k), for k = 0..K."""
    consts = scenario.consts
    params = scenario.params
    regions = []
    for k in range(K + 1):
        radius = signal_radius(k, tau, consts.sigma2, params.eta, consts.beta, consts.h)
        disk = None if radius is None else Disk(center=(0.0, 0.0), radius=radius)
        regions.append(ring_region(k, scenario.y, params.a).clipped(disk))
    return regions


def _t_scale(scenario: Scenario) -> float:
    """Where the interference characteristic function starts to turn: 1 / l at a quarter of the room."""
    consts = scenario.consts
    return (consts.h ** 2 + (scenario.params.a / 4) ** 2) ** consts.beta


class CoverageEvaluator:
    """
    Evaluates the analytic coverage of one scenario for any number of thresholds. The characteristic function of
    the interference does not depend on the threshold and is cached per t.
    """

    def __init__(self, scenario: Scenario, K: Optional[int] = None,
                 region_spec: QuadratureSpec = TRANSFORM_SPEC) -> None:
        self.scenario = scenario
        self.K = scenario.params.max_order if K is None else K
        _check_order(self.K)
        self.region_spec = region_spec
        self.weights = _ring_weights(scenario.params.eta, self.K)
        rings = [ring_region(k, scenario.y, scenario.params.a) for k in range(self.K + 1)]
        self.rings = RingTransforms(rings, self.weights, scenario.consts, region_spec)
        self._cf_cache: Dict[float, complex] = {}

    def laplace(self, s: np.ndarray) -> np.ndarray:
        """The Laplace transform of the interference, exp(-lam sum_k integral (1 - exp(-s eta^k l)))."""
        s = np.asarray(s, dtype=complex)
        density = self.scenario.params.density
        exponent = self.rings.total_area() - self.rings.exponential(s.reshape(-1))
        return np.exp(-density * exponent).reshape(s.shape)

    def characteristic(self, t: np.ndarray) -> np.ndarray:
        """E[exp(j t I)] = K(j t), cached per t."""
        t = np.asarray(t, dtype=float).reshape(-1)
        missing = np.array([value for value in np.unique(t) if float(value) not in self._cf_cache])
        if missing.size:
            for value, phi in zip(missing, self.laplace(-1j * missing)):
                self._cf_cache[float(value)] = complex(phi)
        return np.array([self._cf_cache[float(value)] for value in t], dtype=complex)

    def mean_interference(self) -> float:
        return self.scenario.params.density * self.rings.loss_moment()

    def interference_cdf(self, s: np.ndarray, spec: QuadratureSpec = COVERAGE_SPEC) -> np.ndarray:
        """P(I < s) for every s."""
        return np.atleast_1d(gil_pelaez_cdf(self.characteristic, np.asarray(s, dtype=float), spec,
                                            t_scale=_t_scale(self.scenario)))

    def small_t_limit(self, tau: float, signal: RingTransforms) -> Optional[float]:
        """
        The limit of Im[exp(j t sigma2) F(j t / tau) K(j t)] / t as t -> 0:
        |B| (sigma2 + E[I]) - (1 / tau) sum_k eta^k integral_B_k l. None when E[I] is infinite.
        """
        mean = self.mean_interference()
        if math.isinf(mean):
            return None
        return signal.total_area() * (self.scenario.consts.sigma2 + mean) - signal.loss_moment() / tau

    def sinr_coverage(self, tau: float, spec: QuadratureSpec = COVERAGE_SPEC) -> float:
        """
        :raises OutOfValidityError: for tau < 1
        :raises ToleranceNotReachedError: when the outer integral cannot reach spec.abs_tol
        """
        if tau < 1:
            raise OutOfValidityError(f"The analytic coverage only holds for tau >= 1, got {tau}")
        scenario = self.scenario
        density = scenario.params.density
        sigma2 = scenario.consts.sigma2
        signal = RingTransforms(signal_regions(scenario, tau, self.K), self.weights, scenario.consts,
                                self.region_spec)
        signal_area = signal.total_area()
        if signal_area == 0:
            return 0.0
        t_scale = _t_scale(scenario)
        small = t_scale * 1e-9
        limit = self.small_t_limit(tau, signal)

        def integrand(t: np.ndarray) -> np.ndarray:
            if t.size == 0:
                return np.zeros(0)
            product = np.exp(1j * t * sigma2) * signal.exponential(1j * t / tau) * self.characteristic(t)
            if limit is None:
                # integrable singularity at t = 0, Gauss nodes never hit it
                return np.imag(product) / np.where(t > 0, t, 1.0)
            safe_t = np.where(t < small, 1.0, t)
            return np.where(t < small, limit, np.imag(product) / safe_t)

        outer = spec.with_changes(abs_tol=spec.abs_tol * math.pi / density)
        if limit is None:
            # Im[...] / t grows like t^(1/beta - 1) at 0; in v = t^(1/beta) the first panel is smooth
            beta = scenario.consts.beta

            def stretched(v: np.ndarray) -> np.ndarray:
                return integrand(v ** beta) * beta * v ** (beta - 1)

            head = adaptive_gauss(stretched, 0.0, t_scale ** (1 / beta), outer.with_changes(abs_tol=outer.abs_tol / 10))
            tail = oscillatory_tail_integral(integrand, t_scale, outer, t_scale=t_scale)
            value = complex(head.value) + complex(tail.value)
            error = head.error + tail.error
            converged = head.converged and tail.converged
        else:
            result = oscillatory_tail_integral(integrand, 0.0, outer, t_scale=t_scale)
            value, error, converged = complex(result.value), result.error, result.converged
        estimate = density * signal_area / 2 - density / math.pi * value.real
        uncertainty = density / math.pi * error
        if not converged and uncertainty > spec.abs_tol:
            raise ToleranceNotReachedError(f"Coverage at y={scenario.y}, tau={tau} not certified",
                                           estimate=estimate, error=uncertainty)
        return _clamp(estimate, spec.abs_tol, f"Pc(tau={tau:g}, y={scenario.y})")


def _clamp(value: float, tolerance: float, label: str) -> float:
    clamped = min(max(value, 0.0), 1.0)
    if clamped != value:
        log = logger.warning if abs(clamped - value) > tolerance else logger.debug
        log("%s = %.3g clamped to [0, 1]", label, value)
    return clamped


def laplace_interference(s: complex, scenario: Scenario, K: Optional[int] = None) -> complex:
    """
    The Laplace transform E[exp(-s I)] of the interference at the receiver, all transmitters and their images up to
    order K included.

    :param s: a complex number with non-negative real part (or purely imaginary)
    """
    evaluator = CoverageEvaluator(scenario, K)
    return complex(evaluator.laplace(np.array([s]))[0])


def calF(s: complex, regions: Sequence[Region], consts: ChannelConstants, eta: float) -> complex:
    """sum_k integral over regions[k] of exp(-s eta^k l(|x|)) dx, regions[k] being B_ky."""
    transforms = RingTransforms(regions, _ring_weights(eta, len(regions) - 1), consts)
    return complex(transforms.exponential(np.array([s]))[0])


def calK(s: complex, scenario: Scenario, K: Optional[int] = None) -> complex:
    """exp(-lam sum_k integral over F_k(-y, a) of (1 - exp(s eta^k l))), so calK(j t) is the characteristic function."""
    return laplace_interference(-s, scenario, K)


def sinr_coverage(scenario: Scenario, tau: float, K: Optional[int] = None,
                  spec: QuadratureSpec = COVERAGE_SPEC) -> float:
    """
    The probability that the SINR of the receiver exceeds tau, with reflections up to order K
    (K = 0: line of sight only).

    :raises OutOfValidityError: for tau < 1
    """
    return CoverageEvaluator(scenario, K).sinr_coverage(tau, spec)


def interference_cdf(scenario: Scenario, s: np.ndarray, K: Optional[int] = None,
                     spec: QuadratureSpec = COVERAGE_SPEC) -> np.ndarray:
    """P(I < s) by Gil-Pelaez inversion of the interference characteristic function."""
    return CoverageEvaluator(scenario, K).interference_cdf(s, spec)


def mean_interference(scenario: Scenario, K: Optional[int] = None) -> float:
    """E[I] = lam sum_k eta^k integral over F_k(-y, a) of l."""
    return CoverageEvaluator(scenario, K).mean_interference()


def coverage_curve(scenario: Scenario, taus: Sequence[float], K: Optional[int] = None,
                   spec: QuadratureSpec = COVERAGE_SPEC) -> CoverageCurve:
    """Pc over a threshold grid, sharing one evaluator so the characteristic function is computed once."""
    evaluator = CoverageEvaluator(scenario, K)
    values = [evaluator.sinr_coverage(tau, spec) for tau in taus]
    values = list(np.minimum.accumulate(values))
    return CoverageCurve(thresholds=tuple(taus), values=tuple(values), kind=CoverageKind.SINR,
                         method=Method.ANALYTIC)


def _coverage_row(params: NetworkParams, y: Point, taus: Sequence[float], K: int, spec: QuadratureSpec,
                  noiseless: bool) -> List[float]:
    try:
        return list(coverage_curve(Scenario(params, y, noiseless), taus, K, spec).values)
    except ToleranceNotReachedError as e:
        raise ToleranceNotReachedError(f"Coverage failed at y={y}: {e}", e.estimate, e.error) from e


def coverage_at_points(params: NetworkParams, points: Sequence[Point], taus: Sequence[float],
                       K: Optional[int] = None, spec: QuadratureSpec = COVERAGE_SPEC, workers: int = 1,
                       noiseless: bool = False) -> np.ndarray:
    """
    Pc for every (point, tau), evaluated concurrently.

    :returns: array of shape (len(points), len(taus))
    """
    K = params.max_order if K is None else K
    rows = Parallel(n_jobs=workers)(delayed(_coverage_row)(params, y, taus, K, spec, noiseless) for y in points)
    return np.array(rows, dtype=float).reshape(len(points), len(taus))


def coverage_curves(params: NetworkParams, points: Sequence[Point], taus: Sequence[float], K: Optional[int] = None,
                    spec: QuadratureSpec = COVERAGE_SPEC, workers: int = 1) -> List[CoverageCurve]:
    """One SINR coverage curve per point, the points evaluated concurrently."""
    table = coverage_at_points(params, points, taus, K, spec, workers)
    return [CoverageCurve(thresholds=tuple(taus), values=tuple(float(v) for v in row), kind=CoverageKind.SINR,
                          method=Method.ANALYTIC) for row in table]


def typical_user_grid(a: float, grid_n: int) -> Tuple[List[Point], np.ndarray]:
    """
    Gauss points on the octant 0 <= y2 <= y1 <= a with weights that turn a weighted sum of Pc into the room average
    (the coverage is invariant under the 8 symmetries of the square).
    """
    assert grid_n >= 2, f"The typical user grid needs at least 2 points per dimension, got {grid_n}"
    nodes, weights = gauss_legendre(grid_n)
    u = 0.5 * (nodes + 1)
    w = 0.5 * weights
    points: List[Point] = []
    point_weights = []
    for ui, wi in zip(u, w):
        for vj, wj in zip(u, w):
            points.append((a * ui, a * ui * vj))
            point_weights.append(2 * wi * wj * ui)
    return points, np.array(point_weights)


def sinr_coverage_typical(params: NetworkParams, tau: float, K: Optional[int] = None, grid_n: int = 8,
                          spec: QuadratureSpec = COVERAGE_SPEC, workers: int = 1) -> float:
    """The coverage of a receiver placed uniformly at random in the room."""
    return typical_coverage_curve(params, [tau], K, grid_n, spec, workers).values[0]


def typical_coverage_curve(params: NetworkParams, taus: Sequence[float], K: Optional[int] = None, grid_n: int = 8,
                           spec: QuadratureSpec = COVERAGE_SPEC, workers: int = 1) -> CoverageCurve:
    points, weights = typical_user_grid(params.a, grid_n)
    table = coverage_at_points(params, points, taus, K, spec, workers)
    values = np.clip(weights @ table, 0.0, 1.0)
    return CoverageCurve(thresholds=tuple(taus), values=tuple(float(v) for v in values), kind=CoverageKind.SINR,
                         method=Method.ANALYTIC)


def mean_load(user_density: float, density: float) -> float:
    """The mean number of users sharing the serving attocell, 1 + 1.28 lam_u / lam."""
    assert density > 0 and user_density >= 0
    return 1 + MEAN_LOAD_FACTOR * user_density / density


def rate_to_sinr_threshold(rho: float, n: float, bandwidth: float, zeta1: float, zeta2: float) -> ThresholdResult:
    """
    The SINR threshold equivalent to the rate threshold rho: zeta2^-1 (2^(rho n / (W zeta1)) - 1).
    """
    assert rho >= 0, f"Rates cannot be negative, got {rho}"
    with np.errstate(over="ignore"):
        tau = float(np.expm1(math.log(2) * rho * n / (bandwidth * zeta1))) / zeta2
    return ThresholdResult(tau=tau, below_validity=tau < 1)


def sinr_threshold_to_rate(tau: float, n: float, bandwidth: float, zeta1: float, zeta2: float) -> float:
    """The inverse of rate_to_sinr_threshold: zeta1 W / n log2(1 + zeta2 tau)."""
    return zeta1 * bandwidth / n * math.log2(1 + zeta2 * tau)


def _rate_threshold(params: NetworkParams, rho: float) -> ThresholdResult:
    n = mean_load(params.user_density, params.density)
    return rate_to_sinr_threshold(rho, n, params.bandwidth, params.zeta1, params.zeta2)


def rate_coverage(scenario: Scenario, rho: float, K: Optional[int] = None,
                  spec: QuadratureSpec = COVERAGE_SPEC) -> float:
    """
    The probability that the rate of the receiver exceeds rho.

    :raises OutOfValidityError: when rho maps to an SINR threshold below 1
    """
    threshold = _rate_threshold(scenario.params, rho)
    if threshold.below_validity:
        raise OutOfValidityError(f"The rate {rho:g} maps to tau = {threshold.tau:g} < 1, below validity")
    return sinr_coverage(scenario, threshold.tau, K, spec)


def valid_rate_thresholds(params: NetworkParams, rhos: Sequence[float]) -> Tuple[List[float], List[float]]:
    """
    The rates of the grid whose SINR thresholds are at least 1, with those thresholds; the others are dropped.
    """
    kept = []
    taus = []
    for rho in rhos:
        threshold = _rate_threshold(params, rho)
        if threshold.below_validity:
            logger.warning("Rate %g maps to tau = %.3g < 1 and is skipped by the analytic engine", rho, threshold.tau)
            continue
        kept.append(rho)
        taus.append(threshold.tau)
    return kept, taus


def rate_coverage_curve(scenario: Scenario, rhos: Sequence[float], K: Optional[int] = None,
                        spec: QuadratureSpec = COVERAGE_SPEC) -> CoverageCurve:
    """Rc over the rates of the grid that stay within the validity of the analysis."""
    kept, taus = valid_rate_thresholds(scenario.params, rhos)
    values = coverage_curve(scenario, taus, K, spec).values if taus else ()
    return CoverageCurve(thresholds=tuple(kept), values=tuple(values), kind=CoverageKind.RATE,
                         method=Method.ANALYTIC)


def rate_coverage_curves(params: NetworkParams, points: Sequence[Point], rhos: Sequence[float],
                         K: Optional[int] = None, spec: QuadratureSpec = COVERAGE_SPEC,
                         workers: int = 1) -> List[CoverageCurve]:
    kept, taus = valid_rate_thresholds(params, rhos)
    table = coverage_at_points(params, points, taus, K, spec, workers)
    return [CoverageCurve(thresholds=tuple(kept), values=tuple(float(v) for v in row), kind=CoverageKind.RATE,
                          method=Method.ANALYTIC) for row in table]


def typical_rate_coverage_curve(params: NetworkParams, rhos: Sequence[float], K: Optional[int] = None,
                                grid_n: int = 8, spec: QuadratureSpec = COVERAGE_SPEC,
                                workers: int = 1) -> CoverageCurve:
    kept, taus = valid_rate_thresholds(params, rhos)
    values = typical_coverage_curve(params, taus, K, grid_n, spec, workers).values if taus else ()
    return CoverageCurve(thresholds=tuple(kept), values=tuple(values), kind=CoverageKind.RATE,
                         method=Method.ANALYTIC)


def median_rate(scenario: Scenario, K: Optional[int] = None, spec: QuadratureSpec = COVERAGE_SPEC,
                relative_precision: float = 0.01) -> Optional[float]:
    """
    The rate rho with Rc(rho) = 1/2, by bisection on log(rho) until the bracket is within relative_precision.

    :returns: the median rate, or None when Rc is already below 1/2 at tau = 1 (median below validity)
    """
    params = scenario.params
    evaluator = CoverageEvaluator(scenario, K)
    n = mean_load(params.user_density, params.density)

    def coverage(rho: float) -> float:
        # rho >= low throughout, so a tau just below 1 is rounding from the rate conversion
        return evaluator.sinr_coverage(max(1.0, _rate_threshold(params, rho).tau), spec)

    low = sinr_threshold_to_rate(1.0, n, params.bandwidth, params.zeta1, params.zeta2)
    if evaluator.sinr_coverage(1.0, spec) < 0.5:
        return None
    high = 2 * low
    for _ in range(MAX_RATE_DOUBLINGS):
        if coverage(high) < 0.5:
            break
        low, high = high, 2 * high
    else:
        raise ArithmeticError(f"Rc stays above 1/2 up to {high:g} bit/s")
    while high / low > 1 + relative_precision:
        middle = math.sqrt(low * high)
        if coverage(middle) >= 0.5:
            low = middle
        else:
            high = middle
    return math.sqrt(low * high)


def median_rate_drop(params: NetworkParams, y: Point, K: int = 1, eta: Optional[float] = None,
                     spec: QuadratureSpec = COVERAGE_SPEC) -> Optional[float]:
    """
    The relative loss of median rate when reflections up to order K are added: 1 - median_K / median_0.
    """
    with_eta = params if eta is None else params.with_changes(eta=eta)
    direct = median_rate(Scenario(with_eta, y), 0, spec)
    reflected = median_rate(Scenario(with_eta, y), K, spec)
    if direct is None or reflected is None:
        return None
    return 1 - reflected / direct


def corollary_transform(which: int, scenario: Scenario) -> Tuple[Scenario, Scenario]:
    """
    The two scenarios whose coverages coincide:

    1. a corner receiver with density lam in a room of half side a, and a center receiver with density lam / 4 in a
       room of half side 2a;
    2. without noise, a corner receiver under a ceiling at height h and a center receiver under a ceiling at h / 2;
    3. without noise and with transmitters at the receivers' height, a corner and a center receiver.

    The equalities hold for line-of-sight only (K = 0).
    """
    params = scenario.params
    a = params.a
    if which == 1:
        return (Scenario(params, (a, a), scenario.noiseless),
                Scenario(params.with_changes(density=params.density / 4, a=2 * a), (0.0, 0.0), scenario.noiseless))
    if which == 2:
        return (Scenario(params, (a, a), noiseless=True),
                Scenario(params.with_changes(h=params.h / 2), (0.0, 0.0), noiseless=True))
    if which == 3:
        flat = params.with_changes(h=0.0)
        return Scenario(flat, (a, a), noiseless=True), Scenario(flat, (0.0, 0.0), noiseless=True)
    raise ValueError(f"There are three corner/center equivalences, got {which}")
