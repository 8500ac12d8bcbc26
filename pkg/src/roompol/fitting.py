"""Nonlinear least-squares recovery of wall and antenna parameters from PDPs.

Given a known room, wavelength, sounding pulse, and link condition, the
fitter adjusts the per-bounce gain g, cross-polar leakage gamma, antenna
split xi, and noise floor so that the modeled observed traces match the
measured co- and cross-polarized average PDPs jointly, in dB. The search
runs in an unconstrained space: g, gamma, xi through a scaled logit over
their bound intervals and the noise power through a log transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize
from scipy.special import expit, logit

from .measurement import ObservationParams, PdpTrace, PulseShape, observed_pds
from .model import (
    SPEED_OF_LIGHT,
    DistanceCondition,
    PdsParams,
    PolGain,
    RoomGeometry,
    WallMaterial,
    cpr,
    mixing_constant,
    mixing_time,
    reverberation_time,
)

_METHODS = ("least_squares", "simplex")
_DEFAULT_BOUNDS = ((1e-6, 1.0 - 1e-6),) * 3
# Convergence policy: stop on relative objective decrease below 1e-10 or
# step norm below 1e-12, within the evaluation budget.
_FTOL = 1e-10
_XTOL = 1e-12


@dataclass
class FitProblem:
    """Joint co/cross fitting task. Traces must be dB on one shared grid."""

    room: RoomGeometry
    wavelength: float
    cond: DistanceCondition | None
    pulse: PulseShape
    co_trace: PdpTrace
    cross_trace: PdpTrace
    fit_window: tuple[float, float] | None = None
    initial_guess: tuple[float, float, float, float | None] = (0.5, 0.05, 0.05, None)
    bounds: tuple[tuple[float, float], ...] = _DEFAULT_BOUNDS
    method: str = "least_squares"
    max_iterations: int = 2000
    speed_of_light: float = SPEED_OF_LIGHT

    def __post_init__(self) -> None:
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength}")
        for name, tr in (("co", self.co_trace), ("cross", self.cross_trace)):
            if tr.scale != "db":
                raise ValueError(f"{name} trace must be in dB, got scale {tr.scale!r}")
        if not np.array_equal(self.co_trace.delays, self.cross_trace.delays):
            raise ValueError("co and cross traces must share one delay grid")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if len(self.bounds) != 3:
            raise ValueError("bounds must give (low, high) for each of g, gamma, xi")
        for name, (lo, hi) in zip(("g", "gamma", "xi"), self.bounds):
            if not (0.0 < lo < hi < 1.0):
                raise ValueError(f"bounds for {name} must satisfy 0 < low < high < 1")
        if self.fit_window is not None:
            t0, t1 = self.fit_window
            grid = self.co_trace.delays
            if t0 >= t1 or t1 < grid[0] or t0 > grid[-1]:
                raise ValueError(f"fit window {self.fit_window} does not overlap the grid")
        # gated traces may hold -inf outside the window (zero power before
        # the direct delay); only the fitted samples must be finite
        mask = _window_mask(self)
        for name, tr in (("co", self.co_trace), ("cross", self.cross_trace)):
            if not np.all(np.isfinite(tr.values[mask])):
                raise ValueError(
                    f"{name} trace contains non-finite dB values inside the fit window"
                )


@dataclass
class FitResult:
    """Fitted parameters with derived model quantities and diagnostics."""

    g: float
    gamma: float
    xi: float
    noise_power: float
    t_rev: float
    t_mix: float
    mixing_constant: float
    cpr: float
    residual_rms_db: float
    iterations: int
    converged: bool
    weakly_identified: bool = False
    objective_initial: float = math.nan
    objective_final: float = math.nan
    objective_history: np.ndarray = field(default_factory=lambda: np.array([]))


def _window_mask(problem: FitProblem) -> np.ndarray:
    grid = problem.co_trace.delays
    if problem.fit_window is None:
        return np.ones(grid.size, dtype=bool)
    t0, t1 = problem.fit_window
    eps = 1e-9 * problem.co_trace.spacing
    return (grid >= t0 - eps) & (grid <= t1 + eps)


def channel_gains(xi: float) -> tuple[PolGain, PolGain, PolGain]:
    """Transmit gain plus co- and cross-channel receive gains for a split xi."""
    mu = PolGain.from_split(xi)
    return mu, mu, mu.swapped()


def _model_traces(params, problem: FitProblem) -> tuple[np.ndarray, np.ndarray]:
    g, gamma, xi, noise = params
    material = WallMaterial(g=g, gamma=gamma)
    mu_t, mu_r_co, mu_r_cross = channel_gains(xi)
    obs = ObservationParams(pulse=problem.pulse, noise_power=noise)
    grid = problem.co_trace.delays
    common = dict(
        room=problem.room,
        material=material,
        wavelength=problem.wavelength,
        speed_of_light=problem.speed_of_light,
    )
    co = observed_pds(grid, PdsParams(mu_t=mu_t, mu_r=mu_r_co, **common), problem.cond, obs)
    cross = observed_pds(grid, PdsParams(mu_t=mu_t, mu_r=mu_r_cross, **common), problem.cond, obs)
    return co.values, cross.values


def residual(params, problem: FitProblem) -> np.ndarray:
    """Stacked dB residuals (model minus measured) over the fit window.

    `params` is (g, gamma, xi, noise_power); each of the first three must
    lie inside its bound interval and the noise power must be positive.
    """
    g, gamma, xi, noise = params
    for name, value, (lo, hi) in zip(("g", "gamma", "xi"), (g, gamma, xi), problem.bounds):
        if not lo <= value <= hi:
            raise ValueError(f"parameter {name}={value} outside bounds ({lo}, {hi})")
    if not noise > 0:
        raise ValueError(f"noise power must be > 0, got {noise}")
    mask = _window_mask(problem)
    co_lin, cross_lin = _model_traces(params, problem)
    res_co = 10.0 * np.log10(co_lin[mask]) - problem.co_trace.values[mask]
    res_cross = 10.0 * np.log10(cross_lin[mask]) - problem.cross_trace.values[mask]
    return np.concatenate([res_co, res_cross])


def estimate_noise_floor(problem: FitProblem) -> float:
    """Median linear power over the last 10% of both measured traces.

    Clamped away from zero so the log-space start stays finite even for
    noise-free synthetic inputs.
    """
    n = problem.co_trace.delays.size
    tail = max(1, int(round(0.1 * n)))
    pooled = np.concatenate(
        [problem.co_trace.values[-tail:], problem.cross_trace.values[-tail:]]
    )
    return max(float(np.median(np.power(10.0, pooled / 10.0))), 1e-30)


def _to_internal(params, bounds) -> np.ndarray:
    u = [logit((v - lo) / (hi - lo)) for v, (lo, hi) in zip(params[:3], bounds)]
    return np.array(u + [math.log(params[3])])


def _from_internal(u, bounds) -> tuple[float, float, float, float]:
    vals = [lo + (hi - lo) * expit(ui) for ui, (lo, hi) in zip(u[:3], bounds)]
    return (*vals, math.exp(u[3]))


def fit(problem: FitProblem) -> FitResult:
    """Minimize the summed squared dB residuals of both channels.

    Runs a derivative-based least-squares search (central finite
    differences, relative step 1e-6) on the transformed parameters, or a
    Nelder-Mead simplex when problem.method is "simplex". Non-convergence
    within the iteration budget is reported through the `converged` flag;
    a result is returned either way.
    """
    mask = _window_mask(problem)
    n_window = int(mask.sum())
    if 2 * n_window < 4:
        raise ValueError(
            f"fit window holds {n_window} samples per channel; "
            "need at least as many residuals as parameters"
        )

    g0, gamma0, xi0, noise0 = problem.initial_guess
    if noise0 is None:
        noise0 = estimate_noise_floor(problem)
    start = []
    for value, (lo, hi) in zip((g0, gamma0, xi0), problem.bounds):
        span = hi - lo
        start.append(min(max(value, lo + 1e-9 * span), hi - 1e-9 * span))
    start.append(noise0)
    u0 = _to_internal(start, problem.bounds)

    history: list[float] = []

    def residual_u(u: np.ndarray) -> np.ndarray:
        r = residual(_from_internal(u, problem.bounds), problem)
        history.append(float(np.dot(r, r)))
        return r

    def jacobian_u(u: np.ndarray) -> np.ndarray:
        # central differences with step 1e-6 relative to the coordinate
        # scale; a bare x * step would collapse to zero for mid-interval
        # starts whose logit is ~0
        cols = []
        for i in range(u.size):
            h = 1e-6 * max(1.0, abs(u[i]))
            e = np.zeros_like(u)
            e[i] = h
            cols.append((residual_u(u + e) - residual_u(u - e)) / (2.0 * h))
        return np.stack(cols, axis=1)

    if problem.method == "least_squares":
        opt = least_squares(
            residual_u,
            u0,
            jac=jacobian_u,
            method="trf",
            ftol=_FTOL,
            xtol=_XTOL,
            gtol=1e-14,
            max_nfev=problem.max_iterations,
        )
        u_best = opt.x
        converged = opt.status > 0
        iterations = len(history)
    else:
        # the default simplex is scaled multiplicatively from x0, which
        # degenerates for coordinates whose logit is ~0; build an explicit
        # spread and restart once to escape simplex collapse
        objective = lambda u: float(np.sum(residual_u(u) ** 2))
        x = u0
        converged = False
        for _ in range(2):
            steps = np.maximum(0.25, 0.05 * np.abs(x))
            simplex = np.vstack([x, x + np.diag(steps)])
            opt = minimize(
                objective,
                x,
                method="Nelder-Mead",
                options=dict(
                    maxiter=problem.max_iterations,
                    xatol=_XTOL,
                    fatol=_FTOL,
                    adaptive=True,
                    initial_simplex=simplex,
                ),
            )
            x = opt.x
            converged = bool(opt.success)
        u_best = x
        iterations = len(history)

    g, gamma, xi, noise = _from_internal(u_best, problem.bounds)
    # both channel traces are exactly invariant under xi -> 1 - xi, so the
    # two mirror solutions are indistinguishable; report the canonical one
    if xi > 0.5:
        folded = 1.0 - xi
        lo, hi = problem.bounds[2]
        if lo <= folded <= hi:
            xi = folded
    final_res = residual((g, gamma, xi, noise), problem)
    objective_final = float(np.dot(final_res, final_res))
    material = WallMaterial(g=g, gamma=gamma)
    mu_t, mu_r_co, _ = channel_gains(xi)
    params = PdsParams(
        room=problem.room,
        material=material,
        mu_t=mu_t,
        mu_r=mu_r_co,
        wavelength=problem.wavelength,
        speed_of_light=problem.speed_of_light,
    )

    floor_db = 10.0 * math.log10(estimate_noise_floor(problem))
    cross_peak = float(np.max(problem.cross_trace.values[mask]))
    weakly_identified = cross_peak < floor_db + 3.0

    return FitResult(
        g=g,
        gamma=gamma,
        xi=xi,
        noise_power=noise,
        t_rev=reverberation_time(problem.room, material, problem.speed_of_light),
        t_mix=mixing_time(problem.room, material, problem.speed_of_light),
        mixing_constant=mixing_constant(material),
        cpr=cpr(params),
        residual_rms_db=float(np.sqrt(np.mean(final_res**2))),
        iterations=iterations,
        converged=converged,
        weakly_identified=weakly_identified,
        objective_initial=history[0] if history else math.nan,
        objective_final=objective_final,
        objective_history=np.array(history),
    )


def predict(
    result: FitResult,
    cond: DistanceCondition | None,
    problem: FitProblem,
    noise_power: float | None = None,
) -> tuple[PdpTrace, PdpTrace]:
    """Model observed traces at the fitted parameters under a new condition.

    The noise floor defaults to the fitted one but is caller-overridable,
    since it differs between measurement campaigns. Returns linear
    (co, cross) traces on the problem grid.
    """
    noise = result.noise_power if noise_power is None else noise_power
    params = (result.g, result.gamma, result.xi, noise)
    stand_in = FitProblem(
        room=problem.room,
        wavelength=problem.wavelength,
        cond=cond,
        pulse=problem.pulse,
        co_trace=problem.co_trace,
        cross_trace=problem.cross_trace,
        fit_window=problem.fit_window,
        bounds=problem.bounds,
        speed_of_light=problem.speed_of_light,
    )
    co_lin, cross_lin = _model_traces(params, stand_in)
    grid = problem.co_trace.delays
    return (
        PdpTrace(delays=grid.copy(), values=co_lin, scale="linear"),
        PdpTrace(delays=grid.copy(), values=cross_lin, scale="linear"),
    )
