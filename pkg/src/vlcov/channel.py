"""
The Lambertian line-of-sight optical channel.

All SINR arithmetic in this package is done in normalized units: the useful signal from a transmitter is the path
loss l(x, y) = eta^k (|x - y|^2 + h^2)^(-beta) and the noise is sigma2 = N0 B_f / (alpha^2 P_tx).
Received powers in watts are only computed for reporting.
"""

import math
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from .geometry import Point


class ParameterError(ValueError):
    """Raised when network parameters violate their invariants. `name` is the configuration key at fault."""

    def __init__(self, name: str, message: str) -> None:
        super().__init__(f"{name} {message}")
        self.name = name


@dataclass(frozen=True)
class NetworkParams:
    """
    All physical and deployment parameters of the network. Powers are in watts; conversions from dBm happen
    when reading a configuration.
    """

    a: float = 9.0
    """Half side of the square room (m)"""
    h: float = 3.5
    """Height between the desktop (receivers) and the ceiling (transmitters) (m)"""
    density: float = 0.1
    """Density of the optical attocells (m^-2)"""
    user_density: float = 0.5
    """Density of the users (m^-2)"""
    psi_half: float = 60.0
    """LED semi-angle (degrees)"""
    pd_area: float = 0.01
    """Photodetector area (m^2)"""
    responsivity: float = 0.4
    """Photodetector responsivity (A/W)"""
    filter_gain: float = 1.0
    concentrator_gain: float = 2.25
    tx_power: float = 1.0
    """Transmit power per attocell (W)"""
    noise_power: float = 10 ** (-14.7)
    """N0 * B_f (W)"""
    bandwidth: float = 1e9
    """Bandwidth W available to each attocell (Hz)"""
    zeta1: float = 1.0
    zeta2: float = 1.0
    eta: float = 0.07
    """Wall reflection loss coefficient"""
    max_order: int = 1
    """Highest reflection order K taken into account"""

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """
        :raises ParameterError: on the first violated invariant
        """
        positive = {
            "a": self.a, "lambda": self.density, "a_pd": self.pd_area, "responsivity": self.responsivity,
            "g_f": self.filter_gain, "g_c": self.concentrator_gain, "ptx": self.tx_power,
            "n0bf": self.noise_power, "bandwidth": self.bandwidth, "zeta1": self.zeta1, "zeta2": self.zeta2,
        }
        for name, value in positive.items():
            if not value > 0 or math.isinf(value):
                raise ParameterError(name, f"must be a positive finite number, got {value}")
        if not self.h >= 0:
            raise ParameterError("h", f"cannot be negative, got {self.h}")
        if not self.user_density >= 0:
            raise ParameterError("lambda_u", f"cannot be negative, got {self.user_density}")
        if not 0 < self.psi_half < 90:
            raise ParameterError("psi_half", f"must lie strictly between 0 and 90 degrees, got {self.psi_half}")
        if not 0 <= self.eta <= 1:
            raise ParameterError("eta", f"must lie in [0, 1], got {self.eta}")
        if self.max_order < 0:
            raise ParameterError("k", f"cannot be negative, got {self.max_order}")

    def with_changes(self, **changes: float) -> 'NetworkParams':
        return replace(self, **changes)


@dataclass(frozen=True)
class ChannelConstants:
    """The constants derived from NetworkParams which every formula uses."""

    m: float
    """Lambertian order"""
    alpha: float
    """Lumped gain (m + 1) A_pd xi G_f G_c h^(m + 1) / (2 pi)"""
    beta: float
    """Path-loss exponent m + 3"""
    sigma2: float
    """Effective noise N0 B_f / (alpha^2 P_tx)"""
    h: float
    """Height, carried along because the path loss needs it"""

    def noiseless(self) -> 'ChannelConstants':
        """The same channel with sigma2 forced to 0."""
        return replace(self, sigma2=0.0)

    def peak_pathloss(self) -> float:
        """The largest possible path loss, from a transmitter right above the receiver."""
        if self.h == 0:
            return math.inf
        return self.h ** (-2 * self.beta)


def derive_constants(params: NetworkParams) -> ChannelConstants:
    """
    Compute m, alpha, beta and sigma2 from the network parameters.

    :raises ParameterError: when the semi-angle does not give a usable Lambertian order
    """
    psi = math.radians(params.psi_half)
    secant = 1 / math.cos(psi) if params.psi_half < 90 else math.inf
    if not 1 < secant < math.inf:
        raise ParameterError("psi_half", f"gives no Lambertian order: {params.psi_half}")
    m = 1 / math.log2(secant)
    alpha = (m + 1) * params.pd_area * params.responsivity * params.filter_gain * params.concentrator_gain \
        * params.h ** (m + 1) / (2 * math.pi)
    sigma2 = params.noise_power / (alpha * alpha * params.tx_power) if alpha > 0 else math.inf
    return ChannelConstants(m=m, alpha=alpha, beta=m + 3, sigma2=sigma2, h=params.h)


def pathloss_from_squared_distance(d2: np.ndarray, consts: ChannelConstants, k: int = 0,
                                   eta: float = 1.0) -> np.ndarray:
    """
    Vectorized path loss eta^k (d^2 + h^2)^(-beta) for squared horizontal distances d2.
    A zero distance at zero height gives infinity.
    """
    d2 = np.asarray(d2, dtype=float)
    with np.errstate(divide="ignore"):
        loss = (d2 + consts.h * consts.h) ** (-consts.beta)
    if k:
        loss = loss * eta ** k
    return loss


def pathloss(x: Point, y: Point, consts: ChannelConstants, k: int = 0, eta: float = 1.0) -> float:
    """
    The normalized signal l(x, y) received at y from a (possibly virtual) transmitter at x above the floor.

    :param x: the transmitter position projected on the floor
    :param y: the receiver position
    :param consts: the channel constants
    :param k: the reflection order of the transmitter
    :param eta: the reflection coefficient
    :returns: eta^k (|x - y|^2 + h^2)^(-beta), math.inf when h = 0 and x = y
    """
    assert k >= 0 and 0 <= eta <= 1
    d2 = (x[0] - y[0]) ** 2 + (x[1] - y[1]) ** 2
    return float(pathloss_from_squared_distance(np.array(d2), consts, k, eta))


def received_power(x: Point, y: Point, params: NetworkParams, consts: ChannelConstants, k: int = 0) -> float:
    """The received optical power in watts, P_tx alpha^2 l(x, y). Only used in reports."""
    return params.tx_power * consts.alpha ** 2 * pathloss(x, y, consts, k, params.eta)


def cosine_geometry(d: float, h: float) -> Tuple[float, float]:
    """
    The cosines of the irradiance and incidence angles for a downward facing LED and an upward facing receiver.

    :param d: the horizontal distance
    :param h: the height
    :returns: (cos theta_tx, cos theta_rx), which are equal
    """
    assert d >= 0 and h > 0
    c = h / math.sqrt(h * h + d * d)
    return c, c


def dc_gain(d: float, params: NetworkParams, consts: ChannelConstants) -> float:
    """
    The DC channel gain of a Lambertian emitter,
    (m + 1) xi A_pd / (2 pi D^2) cos^m(theta_tx) cos(theta_rx) G_c G_f with D the 3-D distance.
    """
    cos_tx, cos_rx = cosine_geometry(d, params.h)
    distance2 = d * d + params.h * params.h
    return (consts.m + 1) * params.responsivity * params.pd_area / (2 * math.pi * distance2) \
        * cos_tx ** consts.m * cos_rx * params.concentrator_gain * params.filter_gain
