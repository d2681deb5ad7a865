"""Trial wavefunctions, model potentials, and Langevin propagation.

Phase-space conventions (harmonized across the formula sets in play):
kinetic energy -1/2 laplacian, diffusion constant 1/2, Langevin step
variance epsilon per coordinate, drift prefactor epsilon/2.  With these
choices the local energy W = -1/2 (lap log Phi + |grad log Phi|^2) + V
is literally (H Phi)/Phi, and the auxiliary potential Veff satisfies
(-1/2 lap + Veff) Phi = 0 with W = V - Veff pointwise.

Positions are numpy vectors of arbitrary dimension d.  All trial and
potential callables accept batched positions of shape (..., d) and
return values of shape (...,), so whole trajectories evaluate in one
vectorized pass.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from .estimators import LocalEnergySeries


# ---------------------------------------------------------------------------
# trial wavefunctions


class GaussianTrial:
    """log Phi0 = -alpha |x|^2 / 2; exact harmonic ground state at alpha=1."""

    def __init__(self, alpha: float, dim: int = 1):
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.alpha = float(alpha)
        self.dim = int(dim)

    def log_value(self, positions: np.ndarray) -> np.ndarray:
        positions = np.asarray(positions, dtype=float)
        return -0.5 * self.alpha * np.sum(positions * positions, axis=-1)

    def gradient_log(self, positions: np.ndarray) -> np.ndarray:
        positions = np.asarray(positions, dtype=float)
        return -self.alpha * positions

    def laplacian_log(self, positions: np.ndarray) -> np.ndarray:
        positions = np.asarray(positions, dtype=float)
        return np.broadcast_to(-self.alpha * positions.shape[-1], positions.shape[:-1]).copy()

    def equilibrium_sigma(self) -> float:
        """Std of each coordinate under Phi0^2 = e^(-U)."""
        return math.sqrt(1.0 / (2.0 * self.alpha))

    def __repr__(self) -> str:
        return f"GaussianTrial(alpha={self.alpha}, dim={self.dim})"


class CallableTrial:
    """Trial built from user functions; dimension must be stated."""

    def __init__(
        self,
        log_value: Callable[[np.ndarray], np.ndarray],
        gradient_log: Callable[[np.ndarray], np.ndarray],
        laplacian_log: Callable[[np.ndarray], np.ndarray],
        dim: int,
    ):
        self.log_value = log_value
        self.gradient_log = gradient_log
        self.laplacian_log = laplacian_log
        self.dim = int(dim)


# ---------------------------------------------------------------------------
# potentials


class HarmonicPotential:
    """V = |x|^2 / 2 (omega = 1)."""

    def __call__(self, positions: np.ndarray) -> np.ndarray:
        positions = np.asarray(positions, dtype=float)
        return 0.5 * np.sum(positions * positions, axis=-1)

    def __repr__(self) -> str:
        return "HarmonicPotential()"


class QuarticPotential:
    """V = |x|^2 / 2 + quartic_coupling * sum_i x_i^4."""

    def __init__(self, quartic_coupling: float):
        self.quartic_coupling = float(quartic_coupling)

    def __call__(self, positions: np.ndarray) -> np.ndarray:
        positions = np.asarray(positions, dtype=float)
        sq = positions * positions
        return 0.5 * np.sum(sq, axis=-1) + self.quartic_coupling * np.sum(sq * sq, axis=-1)

    def __repr__(self) -> str:
        return f"QuarticPotential(quartic_coupling={self.quartic_coupling})"


class DoubleWellPotential:
    """V = barrier * ((|x|/half_separation)^2 - 1)^2, minima at |x| = a."""

    def __init__(self, barrier: float, half_separation: float = 1.0):
        if half_separation <= 0:
            raise ValueError("half_separation must be positive")
        self.barrier = float(barrier)
        self.half_separation = float(half_separation)

    def __call__(self, positions: np.ndarray) -> np.ndarray:
        positions = np.asarray(positions, dtype=float)
        r2 = np.sum(positions * positions, axis=-1) / self.half_separation**2
        return self.barrier * (r2 - 1.0) ** 2

    def __repr__(self) -> str:
        return f"DoubleWellPotential(barrier={self.barrier}, half_separation={self.half_separation})"


# ---------------------------------------------------------------------------
# pointwise quantities


def drift(trial, positions: np.ndarray) -> np.ndarray:
    """Drift force F = -dU/dR = 2 grad log Phi0."""
    return 2.0 * trial.gradient_log(positions)


def local_energy(trial, potential, positions: np.ndarray) -> np.ndarray:
    """W = -1/2 (lap log Phi0 + |grad log Phi0|^2) + V, i.e. (H Phi0)/Phi0."""
    grad = trial.gradient_log(positions)
    grad2 = np.sum(grad * grad, axis=-1)
    # grouped so that V cancels the gradient term bitwise when the trial
    # is an exact eigenstate; the zero-variance series is then constant
    # to the last bit, not merely to rounding
    return (potential(positions) - 0.5 * grad2) - 0.5 * trial.laplacian_log(positions)


def auxiliary_potential(trial, positions: np.ndarray) -> np.ndarray:
    """Veff = 1/2 (lap log Phi0 + |grad log Phi0|^2); (-1/2 lap + Veff) Phi0 = 0."""
    grad = trial.gradient_log(positions)
    return 0.5 * (trial.laplacian_log(positions) + np.sum(grad * grad, axis=-1))


# ---------------------------------------------------------------------------
# walker propagation


@dataclass
class WalkerState:
    """Single-owner mutable walker; caches always match the stored position."""

    trial: object
    potential: object
    position: np.ndarray
    drift: np.ndarray
    local_energy: float
    epsilon: float
    rng: np.random.Generator | None = None


def init_walker(trial, potential, position, epsilon: float, rng: np.random.Generator | None = None) -> WalkerState:
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    position = np.atleast_1d(np.asarray(position, dtype=float))
    return WalkerState(
        trial=trial,
        potential=potential,
        position=position,
        drift=drift(trial, position),
        local_energy=float(local_energy(trial, potential, position)),
        epsilon=float(epsilon),
        rng=rng,
    )


def langevin_step(state: WalkerState, rng: np.random.Generator | None = None, noise: np.ndarray | None = None) -> WalkerState:
    """One Euler step R' = R + (eps/2) F(R) + eta, eta ~ N(0, eps I).

    Mutates the state in place (caches refreshed) and returns it.  The
    noise argument is a test hook that bypasses the rng.
    """
    generator = rng if rng is not None else state.rng
    if noise is None:
        if generator is None:
            raise ValueError("langevin_step needs an rng or an explicit noise vector")
        noise = generator.normal(0.0, math.sqrt(state.epsilon), size=state.position.shape)
    new_position = state.position + (0.5 * state.epsilon) * state.drift + noise
    state.position = new_position
    state.drift = drift(state.trial, new_position)
    state.local_energy = float(local_energy(state.trial, state.potential, new_position))
    return state


def transition_density(state: WalkerState, r_from: np.ndarray, r_to: np.ndarray) -> float:
    """Gaussian density of the Langevin proposal r_from -> r_to."""
    return math.exp(log_transition_density(state.trial, state.epsilon, r_from, r_to))


def log_transition_density(trial, epsilon: float, r_from: np.ndarray, r_to: np.ndarray) -> float:
    """log of the proposal density; shared by walker and path samplers."""
    r_from = np.atleast_1d(np.asarray(r_from, dtype=float))
    r_to = np.atleast_1d(np.asarray(r_to, dtype=float))
    mean = r_from + (0.5 * epsilon) * drift(trial, r_from)
    diff = r_to - mean
    d = r_from.shape[-1]
    return float(-np.sum(diff * diff) / (2.0 * epsilon) - 0.5 * d * math.log(2.0 * math.pi * epsilon))


# ---------------------------------------------------------------------------
# rng streams


_MASK64 = (1 << 64) - 1


def derive_rng(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Independent stream for (master seed, purpose label, worker index).

    The label enters through a stable hash, so streams do not collide
    across purposes and runs reproduce across platforms and sessions.
    """
    label = int.from_bytes(hashlib.sha256(purpose.encode("utf-8")).digest()[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([int(seed) & _MASK64, label, int(index) & _MASK64]))


# ---------------------------------------------------------------------------
# series generation


def sample_local_energy_series(
    trial,
    potential,
    *,
    epsilon: float,
    steps: int,
    burn_in: int = 0,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
    initial: np.ndarray | None = None,
    return_positions: bool = False,
):
    """Local-energy series from one Langevin walk.

    Runs burn_in + steps Langevin updates and evaluates W on the whole
    trajectory in a single vectorized pass; the returned series carries
    the burn_in marker and analysis slices it off.  For a Gaussian trial
    the linear recursion x' = (1 - eps alpha) x + eta is evaluated per
    coordinate by scipy.signal.lfilter, which keeps the multi-million
    step calibration runs in the sub-second range; the noise stream and
    therefore the statistics match the generic loop.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if burn_in < 0:
        raise ValueError(f"burn_in must be >= 0, got {burn_in}")
    if rng is None:
        rng = derive_rng(0 if seed is None else seed, "local-energy-series")
    dim = getattr(trial, "dim", 1)
    if initial is None:
        if isinstance(trial, GaussianTrial):
            start = rng.normal(0.0, trial.equilibrium_sigma(), size=dim)
        else:
            start = np.zeros(dim)
    else:
        start = np.atleast_1d(np.asarray(initial, dtype=float))

    total = burn_in + steps
    if isinstance(trial, GaussianTrial):
        decay = 1.0 - epsilon * trial.alpha
        noise = rng.normal(0.0, math.sqrt(epsilon), size=(total, dim))
        # AR(1) per coordinate seeded with the initial position
        zi = (decay * start)[np.newaxis, :]
        trajectory = lfilter([1.0], [1.0, -decay], noise, axis=0, zi=zi)[0]
    else:
        state = init_walker(trial, potential, start, epsilon, rng)
        trajectory = np.empty((total, dim))
        for i in range(total):
            langevin_step(state)
            trajectory[i] = state.position
    values = np.asarray(local_energy(trial, potential, trajectory), dtype=float)
    series = LocalEnergySeries(values=values, step=float(epsilon), burn_in=burn_in)
    if return_positions:
        return series, trajectory
    return series
