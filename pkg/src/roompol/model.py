"""Closed-form polarimetric power delay spectrum for box-shaped rooms.

The diffuse in-room channel decays exponentially with the Eyring
reverberation time T, while wall bounces gradually leak power between the
two polarization states. Leakage per bounce is controlled by a single
material parameter, which sets a second time constant, the polarimetric
mixing time T_p, governing how fast the co- and cross-polarized spectra
converge to a common asymptote. All delays are in seconds and all power
densities are normalized to unit transmit power, i.e. have units 1/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 2.99792458e8  # m/s; override per parameter set for hand checks with 3e8


@dataclass(frozen=True)
class RoomGeometry:
    """Box-shaped room, dimensions in meters."""

    lx: float
    ly: float
    lz: float

    def __post_init__(self) -> None:
        for name in ("lx", "ly", "lz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"room dimension {name} must be > 0, got {getattr(self, name)}")

    def volume(self) -> float:
        return self.lx * self.ly * self.lz

    def surface(self) -> float:
        """Total wall area including floor and ceiling."""
        return 2.0 * (self.lx * self.ly + self.lx * self.lz + self.ly * self.lz)

    def diagonal(self) -> float:
        return math.sqrt(self.lx**2 + self.ly**2 + self.lz**2)


@dataclass(frozen=True)
class WallMaterial:
    """Average per-bounce power gain g and cross-polar leakage gamma.

    g must lie strictly inside (0, 1): a perfectly absorbing or lossless
    wall gives no meaningful reverberation decay. gamma in [0, 1); gamma=0
    means no polarization mixing, gamma -> 1 full depolarization in a
    single bounce.
    """

    g: float
    gamma: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.g < 1.0:
            raise ValueError(f"per-bounce gain g must be in (0, 1), got {self.g}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"cross-polar leakage gamma must be in [0, 1), got {self.gamma}")


@dataclass(frozen=True)
class PolGain:
    """Sphere-averaged antenna power gain per polarization (theta, phi)."""

    mu_theta: float
    mu_phi: float

    def __post_init__(self) -> None:
        if self.mu_theta < 0 or self.mu_phi < 0:
            raise ValueError(
                f"mean gains must be nonnegative, got ({self.mu_theta}, {self.mu_phi})"
            )

    @classmethod
    def from_split(cls, xi: float) -> "PolGain":
        """Lossless parameterization [1 - xi, xi] with 0 <= xi <= 1."""
        if not 0.0 <= xi <= 1.0:
            raise ValueError(f"polarization split xi must be in [0, 1], got {xi}")
        return cls(1.0 - xi, xi)

    def swapped(self) -> "PolGain":
        """Gain vector with the two polarization entries exchanged."""
        return PolGain(self.mu_phi, self.mu_theta)


@dataclass(frozen=True)
class PdsParams:
    """Full parameter set of the polarimetric power delay spectrum."""

    room: RoomGeometry
    material: WallMaterial
    mu_t: PolGain
    mu_r: PolGain
    wavelength: float
    speed_of_light: float = SPEED_OF_LIGHT

    def __post_init__(self) -> None:
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength}")
        if not self.speed_of_light > 0:
            raise ValueError(f"speed_of_light must be > 0, got {self.speed_of_light}")


@dataclass(frozen=True)
class DistanceCondition:
    """Fixed transmitter-receiver distance in meters, with or without line of sight."""

    distance: float
    los: bool = False

    def __post_init__(self) -> None:
        if not self.distance > 0:
            raise ValueError(f"distance must be > 0, got {self.distance}")


@dataclass(frozen=True)
class DirectPath:
    """Discrete direct-path arrival: a Dirac spike at `delay` carrying `weight`.

    The weight is dimensionless power (normalized to transmit power); it is
    never folded into sampled density values.
    """

    delay: float
    weight: float


def bounce_matrix(material: WallMaterial) -> np.ndarray:
    """Per-bounce 2x2 polarimetric power transfer g/(1+gamma) * [[1, gamma], [gamma, 1]]."""
    g, gamma = material.g, material.gamma
    return (g / (1.0 + gamma)) * np.array([[1.0, gamma], [gamma, 1.0]])


def bounce_matrix_power(material: WallMaterial, n: float) -> np.ndarray:
    """Closed-form n-th power of the bounce matrix, valid for any real n >= 0.

    Uses the eigenvalues {1, (1-gamma)/(1+gamma)} of the unit-gain mixing
    matrix, whose eigenvectors are the equal-split and anti-symmetric
    polarization states.
    """
    if n < 0:
        raise ValueError(f"matrix power exponent must be >= 0, got {n}")
    g, gamma = material.g, material.gamma
    lam2 = ((1.0 - gamma) / (1.0 + gamma)) ** n
    return (g**n / 2.0) * np.array([[1.0 + lam2, 1.0 - lam2], [1.0 - lam2, 1.0 + lam2]])


def reverberation_time(
    room: RoomGeometry, material: WallMaterial, speed_of_light: float = SPEED_OF_LIGHT
) -> float:
    """Eyring reverberation time T = -4V / (c S ln g), in seconds."""
    return -4.0 * room.volume() / (speed_of_light * room.surface() * math.log(material.g))


def mixing_time(
    room: RoomGeometry, material: WallMaterial, speed_of_light: float = SPEED_OF_LIGHT
) -> float:
    """Polarimetric mixing time T_p = -4V / (c S ln((1-gamma)/(1+gamma))), in seconds.

    Returns +inf for gamma = 0 (no mixing ever happens); tends to 0 as
    gamma -> 1 (instantaneous depolarization).
    """
    gamma = material.gamma
    if gamma == 0.0:
        return math.inf
    ratio = (1.0 - gamma) / (1.0 + gamma)
    return -4.0 * room.volume() / (speed_of_light * room.surface() * math.log(ratio))


def mixing_constant(material: WallMaterial) -> float:
    """Ratio T_p / T = ln(g) / ln((1-gamma)/(1+gamma)); room-independent.

    Returns +inf for gamma = 0.
    """
    if material.gamma == 0.0:
        return math.inf
    ratio = (1.0 - material.gamma) / (1.0 + material.gamma)
    return math.log(material.g) / math.log(ratio)


def wall_material_from_times(
    room: RoomGeometry,
    t_rev: float,
    t_mix: float,
    speed_of_light: float = SPEED_OF_LIGHT,
) -> WallMaterial:
    """Invert (T, T_p) back to the wall material for a known room.

    `t_mix` may be +inf, which maps to gamma = 0.
    """
    if not t_rev > 0:
        raise ValueError(f"reverberation time must be > 0, got {t_rev}")
    if not t_mix > 0:
        raise ValueError(f"mixing time must be > 0, got {t_mix}")
    scale = 4.0 * room.volume() / (speed_of_light * room.surface())
    g = math.exp(-scale / t_rev)
    if math.isinf(t_mix):
        gamma = 0.0
    else:
        ratio = math.exp(-scale / t_mix)
        gamma = (1.0 - ratio) / (1.0 + ratio)
    return WallMaterial(g=g, gamma=gamma)


def _mu_products(p: PdsParams) -> tuple[float, float]:
    """Co- and cross-products of the transmit/receive mean gain vectors."""
    k_co = p.mu_r.mu_theta * p.mu_t.mu_theta + p.mu_r.mu_phi * p.mu_t.mu_phi
    k_cross = p.mu_r.mu_theta * p.mu_t.mu_phi + p.mu_r.mu_phi * p.mu_t.mu_theta
    return k_co, k_cross


def _amplitude(p: PdsParams) -> float:
    return p.speed_of_light * p.wavelength**2 / (2.0 * p.room.volume())


def pds_components(tau, p: PdsParams):
    """Co- and cross-polar parts of the power delay spectrum at delay tau.

    co(tau)    = c lam^2 e^(-tau/T) / 2V * k_co    * (1 + e^(-tau/T_p))
    cross(tau) = c lam^2 e^(-tau/T) / 2V * k_cross * (1 - e^(-tau/T_p))

    for tau >= 0 and zero otherwise. The co part switches on abruptly while
    the cross part builds up with the mixing time. Accepts scalar or array
    tau; returns a (co, cross) pair of matching shape.
    """
    tau_arr = np.asarray(tau, dtype=float)
    scalar = tau_arr.ndim == 0
    tt = np.maximum(tau_arr, 0.0)
    t_rev = reverberation_time(p.room, p.material, p.speed_of_light)
    t_mix = mixing_time(p.room, p.material, p.speed_of_light)
    k_co, k_cross = _mu_products(p)
    decay = _amplitude(p) * np.exp(-tt / t_rev)
    mix = np.exp(-tt / t_mix) if math.isfinite(t_mix) else np.ones_like(tt)
    active = tau_arr >= 0
    co = np.where(active, decay * k_co * (1.0 + mix), 0.0)
    cross = np.where(active, decay * k_cross * (1.0 - mix), 0.0)
    if scalar:
        return float(co), float(cross)
    return co, cross


def pds(tau, p: PdsParams):
    """Polarimetric power delay spectrum, 1/s; zero for tau < 0.

    Equal to the sum of the two components returned by `pds_components`.
    """
    co, cross = pds_components(tau, p)
    return co + cross


def pds_asymptote(tau, p: PdsParams):
    """Large-delay asymptote c lam^2 e^(-tau/T) / 2V * (k_co + k_cross).

    Only defined for tau >= 0. For lossless antennas the bracket is one,
    i.e. the classical unpolarized exponential decay scaled by 1/2.
    """
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0):
        raise ValueError("asymptote is only defined for tau >= 0")
    scalar = tau_arr.ndim == 0
    t_rev = reverberation_time(p.room, p.material, p.speed_of_light)
    k_co, k_cross = _mu_products(p)
    out = _amplitude(p) * np.exp(-tau_arr / t_rev) * (k_co + k_cross)
    return float(out) if scalar else out


def co_cross_ratio(tau, p: PdsParams):
    """Delay-dependent ratio co(tau)/cross(tau) = (k_co/k_cross) coth(tau / 2 T_p).

    Requires tau > 0. Diverges for small delays and approaches the antenna
    prefactor k_co/k_cross at large delays. Returns +inf whenever the cross
    product of the mean gains is zero or gamma = 0 (no cross-polar power).
    """
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr <= 0):
        raise ValueError("co/cross ratio requires tau > 0")
    scalar = tau_arr.ndim == 0
    k_co, k_cross = _mu_products(p)
    t_mix = mixing_time(p.room, p.material, p.speed_of_light)
    if k_cross == 0.0 or not math.isfinite(t_mix):
        out = np.full_like(tau_arr, math.inf)
    else:
        out = (k_co / k_cross) / np.tanh(tau_arr / (2.0 * t_mix))
    return float(out) if scalar else out


def cpr(p: PdsParams) -> float:
    """Cross-polarization ratio: delay-integrated co power over cross power.

    Closed form (k_co/k_cross) * (1 + 2 T_p/T). Returns +inf when gamma = 0
    or when the cross product of the mean gains vanishes.
    """
    k_co, k_cross = _mu_products(p)
    if k_cross == 0.0 or p.material.gamma == 0.0:
        return math.inf
    return (k_co / k_cross) * (1.0 + 2.0 * mixing_constant(p.material))


def pds_conditional(tau, p: PdsParams, cond: DistanceCondition):
    """Power delay spectrum conditioned on the transmitter-receiver distance.

    The diffuse density is `pds` gated to delays strictly beyond the direct
    delay d/c. Under line of sight the direct path additionally carries a
    Dirac spike at d/c with weight k_co * lam^2 / (4 pi d^2), returned as a
    separate `DirectPath` descriptor (None in non line of sight); it is
    never added to the sampled density.
    """
    tau_arr = np.asarray(tau, dtype=float)
    scalar = tau_arr.ndim == 0
    direct_delay = cond.distance / p.speed_of_light
    diffuse = np.where(tau_arr > direct_delay, pds(tau_arr, p), 0.0)
    spike = None
    if cond.los:
        k_co, _ = _mu_products(p)
        weight = k_co * p.wavelength**2 / (4.0 * math.pi * cond.distance**2)
        spike = DirectPath(delay=direct_delay, weight=weight)
    if scalar:
        return float(diffuse), spike
    return diffuse, spike


def cpr_distance(p: PdsParams, cond: DistanceCondition) -> float:
    """Cross-polarization ratio of the distance-conditioned spectrum.

    Integrating the conditioned co and cross densities over delays beyond
    d/c (the line-of-sight spike counts toward the co numerator) gives

        (k_co/k_cross) * (Q(d) + (1 + r) / (1 - r)),
        r = T_p/(T+T_p) * e^(-d/(c T_p)),

    with Q(d) = 0 without line of sight and

        Q(d) = V / (2 pi c T d^2) * e^(d/(c T)) / (1 - r)

    with it. Returns +inf when gamma = 0 or the cross product of the mean
    gains vanishes.
    """
    k_co, k_cross = _mu_products(p)
    if k_cross == 0.0 or p.material.gamma == 0.0:
        return math.inf
    t_rev = reverberation_time(p.room, p.material, p.speed_of_light)
    t_mix = mixing_time(p.room, p.material, p.speed_of_light)
    d = cond.distance
    c = p.speed_of_light
    r = t_mix / (t_rev + t_mix) * math.exp(-d / (c * t_mix))
    bracket = (1.0 + r) / (1.0 - r)
    q = 0.0
    if cond.los:
        q = (
            p.room.volume()
            / (2.0 * math.pi * c * t_rev * d**2)
            * math.exp(d / (c * t_rev))
            / (1.0 - r)
        )
    return (k_co / k_cross) * (q + bracket)
