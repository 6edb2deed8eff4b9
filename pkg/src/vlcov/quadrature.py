"""
Numerical integration used by the analytic engine.

Everything here is built on one primitive, adaptive composite Gauss-Legendre quadrature in which all panels of a
refinement level are evaluated in a single vectorized call. Integrands map an array of nodes of shape (n,) to an
array of shape (..., n); the leading "batch" dimensions are carried through, so one call can integrate a whole
family of integrands (for instance the same spatial integral at many values of t) on a shared panel layout.
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Iterable, Tuple, Union

import numpy as np

from .geometry import Region, arc_length, radial_breakpoints

logger = logging.getLogger(__name__)

Integrand = Callable[[np.ndarray], np.ndarray]
Value = Union[complex, np.ndarray]

MAX_GEOMETRIC_PANELS = 96
"""Upper bound on the number of doubling panels of a semi-infinite integral, i.e. a range of 2^96 t_scale"""


class ToleranceNotReachedError(ArithmeticError):
    """
    Raised when the panel budget ran out before the requested tolerance was met.
    The best estimate and its error bound travel with the exception.
    """

    def __init__(self, message: str, estimate: Value, error: float) -> None:
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class SlowDecayError(ToleranceNotReachedError):
    """Raised when the tail of a semi-infinite integral could not be certified."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and budgets of an adaptive integration."""

    rel_tol: float = 1e-6
    abs_tol: float = 1e-12
    max_panels: int = 200_000
    """Budget of panels per adaptive integration"""
    panel_order: int = 16
    """Number of Gauss-Legendre nodes per panel (per dimension)"""
    max_depth: int = 48
    """Maximal number of bisections of an initial panel"""

    def __post_init__(self) -> None:
        assert self.rel_tol > 0 and self.abs_tol > 0, "Tolerances must be positive"
        assert self.max_panels >= 1, f"At least one panel is needed, got {self.max_panels}"
        assert self.panel_order >= 2, f"Gauss rules need at least two nodes, got {self.panel_order}"
        assert self.max_depth >= 1

    def with_changes(self, **changes: float) -> 'QuadratureSpec':
        return replace(self, **changes)


REGION_SPEC = QuadratureSpec(rel_tol=1e-6, abs_tol=1e-12)
"""Defaults for the spatial integrals"""

COVERAGE_SPEC = QuadratureSpec(rel_tol=1e-6, abs_tol=1e-4)
"""Defaults for probabilities obtained by Gil-Pelaez inversion"""


@dataclass(frozen=True)
class QuadratureResult:
    value: Value
    """The estimate; an array when the integrand carries batch dimensions"""
    error: float
    """Estimated absolute error (maximum over the batch)"""
    peak: float
    """Largest modulus of the integrand seen at any node"""
    panels: int
    converged: bool


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the Gauss-Legendre rule on [-1, 1]."""
    return np.polynomial.legendre.leggauss(order)


def _panel_sums(f: Integrand, lo: np.ndarray, hi: np.ndarray, order: int) -> Tuple[np.ndarray, float]:
    nodes, weights = gauss_legendre(order)
    half = 0.5 * (hi - lo)
    middle = 0.5 * (hi + lo)
    x = (middle[:, None] + half[:, None] * nodes[None, :]).reshape(-1)
    values = np.asarray(f(x))
    values = values.reshape(values.shape[:-1] + (lo.size, order))
    sums = (values @ weights) * half
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    return sums, peak


def _batch_max(values: np.ndarray) -> np.ndarray:
    """Reduce all leading batch dimensions with max, keeping the panel axis."""
    magnitude = np.abs(values)
    return magnitude.reshape(-1, magnitude.shape[-1]).max(axis=0) if magnitude.ndim > 1 else magnitude


def adaptive_gauss(f: Integrand, a: float, b: float, spec: QuadratureSpec = REGION_SPEC,
                   breakpoints: Iterable[float] = ()) -> QuadratureResult:
    """
    Integrate f over [a, b] with adaptive composite Gauss-Legendre quadrature.

    Each panel is compared against its two halves. Panels whose difference is within their share of
    max(abs_tol, rel_tol * |estimate|) are accepted (with the value of the halves), the others are bisected.
    Panels reaching the maximal depth or exceeding the budget are accepted as they are and the result is marked
    as not converged.

    :param f: the (vectorized, possibly batched) integrand
    :param a: lower bound
    :param b: upper bound, b >= a
    :param spec: tolerances and budget
    :param breakpoints: points in (a, b) where f is not smooth; they become initial panel edges
    :returns: the result, never raises
    """
    assert b >= a, f"Integration bounds must be ordered, got [{a}, {b}]"
    empty = np.asarray(f(np.zeros(0)))
    total = np.zeros(empty.shape[:-1], dtype=complex)
    if b == a:
        return QuadratureResult(value=_unbox(total), error=0.0, peak=0.0, panels=0, converged=True)

    edges = np.unique(np.clip(np.concatenate([[a], np.asarray(list(breakpoints), dtype=float), [b]]), a, b))
    lo, hi = edges[:-1], edges[1:]
    coarse, peak = _panel_sums(f, lo, hi, spec.panel_order)
    error = 0.0
    panels = lo.size
    converged = True
    depth = 0
    width = b - a
    while lo.size:
        middle = 0.5 * (lo + hi)
        left, peak_left = _panel_sums(f, lo, middle, spec.panel_order)
        right, peak_right = _panel_sums(f, middle, hi, spec.panel_order)
        peak = max(peak, peak_left, peak_right)
        fine = left + right
        panel_error = _batch_max(fine - coarse)
        estimate = float(np.max(np.abs(total + fine.sum(axis=-1)))) if fine.size else 0.0
        allowed = max(spec.abs_tol, spec.rel_tol * estimate) * (hi - lo) / width
        accept = panel_error <= allowed
        depth += 1
        if depth >= spec.max_depth or panels + 2 * int(np.count_nonzero(~accept)) > spec.max_panels:
            if not accept.all():
                converged = False
                logger.debug("Adaptive Gauss on [%g, %g] stopped at depth %d with %d panels", a, b, depth, panels)
            accept = np.ones_like(accept)
        total = total + fine[..., accept].sum(axis=-1)
        error += float(panel_error[accept].sum())
        refine = ~accept
        panels += 2 * int(np.count_nonzero(refine))
        lo, hi, middle = lo[refine], hi[refine], middle[refine]
        coarse = np.concatenate([left[..., refine], right[..., refine]], axis=-1)
        lo, hi = np.concatenate([lo, middle]), np.concatenate([middle, hi])
    return QuadratureResult(value=_unbox(total), error=error, peak=peak, panels=panels, converged=converged)


def _unbox(value: np.ndarray) -> Value:
    return complex(value) if value.ndim == 0 else value


def integrate_radial(g: Integrand, region: Region, spec: QuadratureSpec = REGION_SPEC,
                     r_min: float = 0.0) -> QuadratureResult:
    """
    Integrate a radially symmetric function over a region, as the 1-D integral of g(r) L(r) where L(r) is the length
    of the circle of radius r inside the region.

    :param g: g(r), vectorized and possibly batched
    :param region: the region, with any clip disk centred at the origin
    :param spec: tolerances
    :param r_min: integrate over radii above r_min only
    """
    edges = radial_breakpoints(region)
    if r_min > 0 and edges.size:
        edges = np.concatenate([[r_min], edges[edges > r_min]]) if edges[-1] > r_min else np.zeros(0)
    if edges.size < 2:
        empty = np.asarray(g(np.zeros(0)))
        return QuadratureResult(value=_unbox(np.zeros(empty.shape[:-1], dtype=complex)), error=0.0, peak=0.0,
                                panels=0, converged=True)

    def weighted(r: np.ndarray) -> np.ndarray:
        return np.asarray(g(r)) * arc_length(region, r)

    return adaptive_gauss(weighted, float(edges[0]), float(edges[-1]), spec, breakpoints=edges[1:-1])


def integrate_region(f: Callable[[np.ndarray], np.ndarray], region: Region,
                     spec: QuadratureSpec = REGION_SPEC, disk_depth: int = 8) -> complex:
    """
    Integrate f over a region square by square with adaptive tensor-product Gauss panels.
    Cells fully inside the clip disk are refined on accuracy alone; cells crossing its boundary are bisected
    `disk_depth` times and then integrated with the disk indicator as weight; cells outside it are dropped.

    :param f: maps points of shape (n, 2) to complex values of shape (n,)
    :param region: the integration domain
    :param spec: tolerances and cell budget
    :param disk_depth: number of bisections of cells crossing the clip circle
    :raises ToleranceNotReachedError: when the cell budget runs out; cells still above tolerance at max_depth are
        accepted with a warning
    """
    if region.is_empty():
        return 0j
    order = spec.panel_order
    nodes, weights = gauss_legendre(order)
    weights2 = np.outer(weights, weights).reshape(-1)
    gx, gy = np.meshgrid(nodes, nodes, indexing="ij")
    gx, gy = gx.reshape(-1), gy.reshape(-1)
    disk = region.clip_disk

    def cell_sums(x0: np.ndarray, x1: np.ndarray, y0: np.ndarray, y1: np.ndarray) -> np.ndarray:
        hx, hy = 0.5 * (x1 - x0), 0.5 * (y1 - y0)
        px = (0.5 * (x0 + x1))[:, None] + hx[:, None] * gx[None, :]
        py = (0.5 * (y0 + y1))[:, None] + hy[:, None] * gy[None, :]
        points = np.stack([px.reshape(-1), py.reshape(-1)], axis=1)
        values = np.asarray(f(points), dtype=complex).reshape(x0.size, -1)
        if disk is not None:
            inside = (px - disk.center[0]) ** 2 + (py - disk.center[1]) ** 2 <= disk.radius ** 2
            values = values * inside
        return (values @ weights2) * hx * hy

    def crosses_disk(x0: np.ndarray, x1: np.ndarray, y0: np.ndarray, y1: np.ndarray) -> np.ndarray:
        if disk is None:
            return np.zeros(x0.size, dtype=bool)
        cx, cy = disk.center
        far = np.maximum(np.abs(x0 - cx), np.abs(x1 - cx)) ** 2 + np.maximum(np.abs(y0 - cy), np.abs(y1 - cy)) ** 2
        return far > disk.radius ** 2

    def outside_disk(x0: np.ndarray, x1: np.ndarray, y0: np.ndarray, y1: np.ndarray) -> np.ndarray:
        if disk is None:
            return np.zeros(x0.size, dtype=bool)
        cx, cy = disk.center
        dx = np.maximum.reduce([x0 - cx, np.zeros_like(x0), cx - x1])
        dy = np.maximum.reduce([y0 - cy, np.zeros_like(y0), cy - y1])
        return dx * dx + dy * dy >= disk.radius ** 2

    bounds = np.array([square.bounds() for square in region.squares], dtype=float)
    x0, x1, y0, y1 = bounds.T
    keep = ~outside_disk(x0, x1, y0, y1)
    x0, x1, y0, y1 = x0[keep], x1[keep], y0[keep], y1[keep]
    coarse = cell_sums(x0, x1, y0, y1)
    total = 0j
    error = 0.0
    cells = x0.size
    reference = sum(square.area() for square in region.squares)
    depth = 0
    while x0.size:
        xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        children = [(x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)]
        child_sums = [cell_sums(*child) for child in children]
        fine = sum(child_sums)
        difference = np.abs(fine - coarse)
        estimate = abs(total + fine.sum())
        allowed = max(spec.abs_tol, spec.rel_tol * estimate) * (x1 - x0) * (y1 - y0) / reference
        depth += 1
        straddling = crosses_disk(x0, x1, y0, y1) & ~outside_disk(x0, x1, y0, y1)
        accept = np.where(straddling, depth >= disk_depth, difference <= allowed)
        if depth >= spec.max_depth:
            if not accept.all():
                logger.warning("Region integral stopped at depth %d with %d cells above tolerance (error %.3g)",
                               depth, int(np.count_nonzero(~accept)), float(difference[~accept].sum()))
            accept[:] = True
        total += complex(fine[accept].sum())
        error += float(difference[accept].sum())
        refine = ~accept
        count = int(np.count_nonzero(refine))
        if count == 0:
            break
        if cells + 4 * count > spec.max_panels:
            total += complex(fine[refine].sum())
            error += float(difference[refine].sum())
            raise ToleranceNotReachedError(f"Region integral needed more than {spec.max_panels} cells",
                                           estimate=total, error=error)
        cells += 4 * count
        parts = [tuple(edge[refine] for edge in child) for child in children]
        x0 = np.concatenate([p[0] for p in parts])
        x1 = np.concatenate([p[1] for p in parts])
        y0 = np.concatenate([p[2] for p in parts])
        y1 = np.concatenate([p[3] for p in parts])
        coarse = np.concatenate([s[refine] for s in child_sums])
    return total


def oscillatory_tail_integral(g: Integrand, t0: float, spec: QuadratureSpec = COVERAGE_SPEC,
                              t_scale: float = 1.0) -> QuadratureResult:
    """
    Integrate g over [t0, infinity) on doubling panels [t0 2^n, t0 2^(n + 1)] (or [0, t_scale] followed by
    doubling panels when t0 = 0), each integrated adaptively so oscillations are resolved.
    Integration stops after two consecutive panels each contribute less than abs_tol / 10; the last contribution is
    added to the error bound.

    :param g: the integrand, vectorized and possibly batched
    :param t0: lower bound, >= 0
    :param spec: tolerances; abs_tol drives the truncation
    :param t_scale: width of the first panel when t0 = 0
    :raises SlowDecayError: when the tail is not certified within the panel range
    """
    assert t0 >= 0 and t_scale > 0
    panel_spec = spec.with_changes(abs_tol=spec.abs_tol / 10)
    lo = t0
    hi = t_scale if t0 == 0 else 2 * t0
    total: Value = 0j
    error = 0.0
    peak = 0.0
    panels = 0
    quiet = 0
    converged = True
    for _ in range(MAX_GEOMETRIC_PANELS):
        result = adaptive_gauss(g, lo, hi, panel_spec)
        total = total + result.value
        error += result.error
        peak = max(peak, result.peak)
        panels += result.panels
        converged = converged and result.converged
        contribution = float(np.max(np.abs(result.value)))
        quiet = quiet + 1 if contribution < spec.abs_tol / 10 else 0
        if quiet >= 2:
            error += contribution
            return QuadratureResult(value=total, error=error, peak=peak, panels=panels, converged=converged)
        lo, hi = hi, 2 * hi
    raise SlowDecayError(f"The integrand did not decay before t = {lo:g}", estimate=total, error=math.inf)


def gil_pelaez_cdf(cf: Integrand, s: Union[float, np.ndarray], spec: QuadratureSpec = COVERAGE_SPEC,
                   t_scale: float = 1.0, damping: float = 0.0) -> Union[float, np.ndarray]:
    """
    The CDF P(X < s) = 1/2 - 1/pi * integral_0^inf Im[exp(-j t s) phi(t)] / t dt recovered from the
    characteristic function phi.

    Near t = 0 the integrand is replaced by its finite limit E[X] - s, with E[X] estimated from phi.
    With damping > 0 the characteristic function is multiplied by exp(-(damping t)^2), i.e. X is smoothed with a
    narrow Gaussian, which makes point masses and lattice laws integrable.

    :param cf: phi(t) for an array of t > 0
    :param s: one threshold or an array of thresholds
    :param spec: tolerances; abs_tol is the accuracy of the probability
    :param t_scale: the scale of t where phi starts to decay, i.e. roughly 1 / (spread of X)
    :param damping: Gaussian smoothing width in units of 1 / t
    :returns: probabilities clamped to [0, 1], same shape as s
    :raises SlowDecayError: when the tail cannot be certified
    """
    thresholds = np.atleast_1d(np.asarray(s, dtype=float))
    small = t_scale * 1e-9
    nudge = t_scale * 1e-6
    mean = float(np.imag(cf(np.array([nudge]))[0])) / nudge

    def integrand(t: np.ndarray) -> np.ndarray:
        phi = np.asarray(cf(t), dtype=complex)
        if damping:
            phi = phi * np.exp(-(damping * t) ** 2)
        safe_t = np.where(t < small, 1.0, t)
        values = np.imag(np.exp(-1j * np.outer(thresholds, t)) * phi[None, :]) / safe_t[None, :]
        return np.where(t[None, :] < small, mean - thresholds[:, None], values)

    result = oscillatory_tail_integral(integrand, 0.0, spec.with_changes(abs_tol=spec.abs_tol * math.pi),
                                       t_scale=t_scale)
    probability = 0.5 - np.real(np.asarray(result.value)) / math.pi
    clamped = np.clip(probability, 0.0, 1.0)
    if np.any(np.abs(clamped - probability) > spec.abs_tol):
        logger.warning("Gil-Pelaez inversion left [0, 1] by more than %g; clamped", spec.abs_tol)
    return float(clamped[0]) if np.ndim(s) == 0 else clamped
