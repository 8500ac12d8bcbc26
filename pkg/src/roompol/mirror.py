"""Brute-force mirror-source simulator for the box-shaped room.

Reflecting the transmitter iteratively in the six walls yields a lattice of
image sources; the signal of an image that took B wall interactions arrives
attenuated by the B-th power of the bounce matrix on top of free-space
spreading. Binning those arrivals over many random transmitter/receiver
placements estimates the power delay profile without using any closed-form
expression or the delay-based bounce-count approximation: every image
carries its exact interaction count. This makes the simulator an
independent validation oracle for the model module.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .measurement import PdpTrace
from .model import SPEED_OF_LIGHT, PolGain, RoomGeometry, WallMaterial

_CHUNK = 2048  # realizations per work unit; fixed so results never depend on worker count

_PLACEMENTS = ("uniform", "fixed")


@dataclass(frozen=True)
class ImageSource:
    """One mirror image of the transmitter: position and exact bounce count."""

    position: np.ndarray
    bounces: int


@dataclass(frozen=True)
class SimConfig:
    """Monte-Carlo settings for `simulate_pdp`.

    placement "uniform" draws transmitter and receiver independently and
    uniformly inside the room; "fixed" draws the receiver uniformly and the
    transmitter uniformly on the sphere of radius `distance` around it
    (rejection-sampled into the room), excluding the direct image when
    `los` is False.
    """

    n_realizations: int
    bin_width: float
    max_delay: float
    rng_seed: int = 0
    placement: str = "uniform"
    distance: float | None = None
    los: bool = True

    def __post_init__(self) -> None:
        if self.n_realizations < 1:
            raise ValueError(f"n_realizations must be >= 1, got {self.n_realizations}")
        if not self.bin_width > 0:
            raise ValueError(f"bin_width must be > 0, got {self.bin_width}")
        if not self.max_delay > self.bin_width:
            raise ValueError(
                f"max_delay ({self.max_delay}) must exceed bin_width ({self.bin_width})"
            )
        if self.placement not in _PLACEMENTS:
            raise ValueError(f"placement must be one of {_PLACEMENTS}, got {self.placement!r}")
        if self.placement == "fixed":
            if self.distance is None or not self.distance > 0:
                raise ValueError("fixed placement requires a positive distance")
        elif self.distance is not None:
            raise ValueError("distance is only meaningful for fixed placement")
        n_bins = self.max_delay / self.bin_width
        if abs(n_bins - round(n_bins)) > 1e-6:
            raise ValueError("max_delay must be an integer multiple of bin_width")


def _axis_images(length: float, span: float):
    """Mirror coordinates along one axis as offset + sign * tx.

    Covers every image coordinate in [-span, length + span]. Even-type
    images sit at 2p*length + tx with |2p| axis bounces, odd-type at
    2p*length - tx with |2p - 1|; the even p = 0 entry is the transmitter
    itself and is flagged for direct-path handling.
    """
    p_even = np.arange(
        math.floor(-(span + length) / (2.0 * length)),
        math.ceil((length + span) / (2.0 * length)) + 1,
    )
    p_odd = np.arange(
        math.floor(-span / (2.0 * length)),
        math.ceil((2.0 * length + span) / (2.0 * length)) + 1,
    )
    offsets = np.concatenate([2.0 * p_even * length, 2.0 * p_odd * length])
    signs = np.concatenate([np.ones(p_even.size), -np.ones(p_odd.size)])
    bounces = np.concatenate([np.abs(2 * p_even), np.abs(2 * p_odd - 1)]).astype(np.int64)
    direct = np.concatenate([p_even == 0, np.zeros(p_odd.size, dtype=bool)])
    return offsets, signs, bounces, direct


def enumerate_images(room: RoomGeometry, tx, reach: float) -> list[ImageSource]:
    """All mirror images within Euclidean distance `reach` of the room box.

    Guarantees that no arrival with delay <= reach / c is missed for any
    receiver inside the room, since the image-to-receiver distance is never
    smaller than the image-to-box distance. The result is a deterministic,
    order-stable list; the zeroth entry group contains the transmitter
    itself with zero bounces.
    """
    tx = np.asarray(tx, dtype=float)
    if tx.shape != (3,):
        raise ValueError(f"transmitter position must be a 3-vector, got shape {tx.shape}")
    dims = (room.lx, room.ly, room.lz)
    for i, l in enumerate(dims):
        if not 0.0 < tx[i] < l:
            raise ValueError(
                f"transmitter must lie strictly inside the room; axis {i} "
                f"coordinate {tx[i]} not in (0, {l})"
            )
    if not reach > 0:
        raise ValueError(f"reach must be > 0, got {reach}")

    per_axis = [_axis_images(l, reach) for l in dims]
    coords = [off + sign * tx[i] for i, (off, sign, _, _) in enumerate(per_axis)]
    cx, cy, cz = np.meshgrid(*coords, indexing="ij")
    bx, by, bz = np.meshgrid(*(a[2] for a in per_axis), indexing="ij")
    positions = np.stack([cx.ravel(), cy.ravel(), cz.ravel()], axis=1)
    bounces = (bx + by + bz).ravel()

    outside = np.maximum(0.0, np.maximum(-positions, positions - np.array(dims)))
    keep = np.einsum("ij,ij->i", outside, outside) <= reach * reach
    return [
        ImageSource(position=pos, bounces=int(b))
        for pos, b in zip(positions[keep], bounces[keep])
    ]


def _sample_uniform(rng: np.random.Generator, n: int, dims: np.ndarray):
    tx = rng.uniform(0.0, 1.0, (n, 3)) * dims
    rx = rng.uniform(0.0, 1.0, (n, 3)) * dims
    return tx, rx


def _sample_fixed(rng: np.random.Generator, n: int, dims: np.ndarray, distance: float):
    """Receiver uniform in the box, transmitter uniform on the sphere of
    radius `distance` around it, rejected until inside the box."""
    tx_out = np.empty((n, 3))
    rx_out = np.empty((n, 3))
    filled = 0
    stalled = 0
    while filled < n:
        m = max(4 * (n - filled), 128)
        rx = rng.uniform(0.0, 1.0, (m, 3)) * dims
        vec = rng.normal(size=(m, 3))
        norm = np.linalg.norm(vec, axis=1)
        good = norm > 1e-12
        tx = rx + distance * vec / np.maximum(norm, 1e-300)[:, None]
        inside = good & np.all((tx > 0.0) & (tx < dims), axis=1)
        take = min(int(inside.sum()), n - filled)
        if take == 0:
            stalled += 1
            if stalled > 1000:
                raise RuntimeError(
                    f"could not place transmitter at distance {distance} m inside the room"
                )
            continue
        stalled = 0
        idx = np.flatnonzero(inside)[:take]
        tx_out[filled : filled + take] = tx[idx]
        rx_out[filled : filled + take] = rx[idx]
        filled += take
    return tx_out, rx_out


def _run_chunk(args) -> tuple[np.ndarray, np.ndarray]:
    """Accumulate binned co/cross powers for one chunk of realizations."""
    (seed_seq, n, dims, axes, g_pow, mix_co, mix_cross, keep_img,
     lam, c, bin_width, n_bins, max_delay, placement, distance) = args
    rng = np.random.default_rng(seed_seq)
    if placement == "uniform":
        tx, rx = _sample_uniform(rng, n, dims)
    else:
        tx, rx = _sample_fixed(rng, n, dims, distance)

    d2 = None
    for i, (off, sign) in enumerate(axes):
        coord = off[None, :] + sign[None, :] * tx[:, i : i + 1]
        sq = (coord - rx[:, i : i + 1]) ** 2
        if i == 0:
            d2 = sq[:, :, None, None]
        elif i == 1:
            d2 = d2 + sq[:, None, :, None]
        else:
            d2 = d2 + sq[:, None, None, :]
    d2 = d2.reshape(n, -1)

    tau = np.sqrt(d2) / c
    mask = (tau < max_delay) & (d2 > 0.0) & keep_img[None, :]
    w = lam * lam / (4.0 * np.pi * d2[mask])
    attn = np.broadcast_to(g_pow, d2.shape)[mask] * w
    idx = (tau[mask] / bin_width).astype(np.int64)
    acc_co = np.bincount(
        idx, weights=attn * np.broadcast_to(mix_co, d2.shape)[mask], minlength=n_bins
    )
    acc_cross = np.bincount(
        idx, weights=attn * np.broadcast_to(mix_cross, d2.shape)[mask], minlength=n_bins
    )
    return acc_co, acc_cross


def _resolve_workers(workers: int | None) -> int:
    cap = os.environ.get("ROOMPOL_MAX_WORKERS")
    w = 1 if workers is None else int(workers)
    if cap is not None:
        w = min(w, int(cap))
    return max(1, w)


def simulate_pdp(
    room: RoomGeometry,
    material: WallMaterial,
    mu_t: PolGain,
    mu_r: PolGain,
    wavelength: float,
    cfg: SimConfig,
    speed_of_light: float = SPEED_OF_LIGHT,
    workers: int | None = None,
) -> tuple[PdpTrace, PdpTrace]:
    """Estimate co- and cross-channel power delay profiles by Monte Carlo.

    Each realization places transmitter and receiver per cfg.placement,
    evaluates every mirror image's arrival exactly (delay from the true
    image distance, attenuation from the exact bounce count), and adds its
    power to the delay bin containing the arrival; bins are left-closed,
    right-open and an arrival at exactly max_delay is discarded. Bin sums
    divided by (n_realizations * bin_width) estimate power density.

    The co channel uses (mu_t, mu_r) as given; the cross channel swaps the
    receive gain entries. Both are accumulated in one pass and returned as
    linear traces on the bin-center grid. Results are bit-identical for a
    fixed rng_seed regardless of `workers` because realizations are split
    into fixed-size chunks with per-chunk derived seeds, reduced in chunk
    order.
    """
    if not wavelength > 0:
        raise ValueError(f"wavelength must be > 0, got {wavelength}")
    dims = np.array([room.lx, room.ly, room.lz])
    if cfg.placement == "fixed" and cfg.distance >= room.diagonal():
        raise ValueError(
            f"fixed distance {cfg.distance} m admits no placement in a room "
            f"with diagonal {room.diagonal():.3f} m"
        )
    n_bins = int(round(cfg.max_delay / cfg.bin_width))
    if n_bins < 1:
        raise ValueError("delay range must contain at least one bin")

    span = speed_of_light * cfg.max_delay
    per_axis = [_axis_images(l, span) for l in dims]
    bx, by, bz = np.meshgrid(*(a[2] for a in per_axis), indexing="ij")
    bounces = (bx + by + bz).ravel()
    dx, dy, dz = np.meshgrid(*(a[3] for a in per_axis), indexing="ij")
    is_direct = (dx & dy & dz).ravel()

    g, gamma = material.g, material.gamma
    lam2_pow = ((1.0 - gamma) / (1.0 + gamma)) ** bounces
    g_pow = g**bounces.astype(float)
    k_co = mu_r.mu_theta * mu_t.mu_theta + mu_r.mu_phi * mu_t.mu_phi
    k_cross = mu_r.mu_theta * mu_t.mu_phi + mu_r.mu_phi * mu_t.mu_theta
    # Co channel pairs (k_co, k_cross) with (1 +/- lam2^B); swapping the
    # receive entries exchanges the two products, giving the cross channel.
    mix_co = 0.5 * (k_co * (1.0 + lam2_pow) + k_cross * (1.0 - lam2_pow))
    mix_cross = 0.5 * (k_cross * (1.0 + lam2_pow) + k_co * (1.0 - lam2_pow))

    keep_img = np.ones(bounces.size, dtype=bool)
    if cfg.placement == "fixed" and not cfg.los:
        keep_img &= ~is_direct

    axes = [(a[0], a[1]) for a in per_axis]
    n_chunks = (cfg.n_realizations + _CHUNK - 1) // _CHUNK
    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(n_chunks)
    tasks = []
    remaining = cfg.n_realizations
    for i in range(n_chunks):
        n = min(_CHUNK, remaining)
        remaining -= n
        tasks.append((
            seeds[i], n, dims, axes, g_pow, mix_co, mix_cross, keep_img,
            wavelength, speed_of_light, cfg.bin_width, n_bins, cfg.max_delay,
            cfg.placement, cfg.distance,
        ))

    acc_co = np.zeros(n_bins)
    acc_cross = np.zeros(n_bins)
    n_workers = _resolve_workers(workers)
    if n_workers > 1 and n_chunks > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for part_co, part_cross in pool.map(_run_chunk, tasks):
                acc_co += part_co
                acc_cross += part_cross
    else:
        for task in tasks:
            part_co, part_cross = _run_chunk(task)
            acc_co += part_co
            acc_cross += part_cross

    centers = (np.arange(n_bins) + 0.5) * cfg.bin_width
    norm = cfg.n_realizations * cfg.bin_width
    co = PdpTrace(delays=centers, values=acc_co / norm, scale="linear")
    cross = PdpTrace(delays=centers, values=acc_cross / norm, scale="linear")
    return co, cross
