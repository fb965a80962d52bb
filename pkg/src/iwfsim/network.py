"""Static interference-network data and the quantities derived from it.

Channel gains are stored as squared magnitudes; there are no complex
coefficients anywhere in the model.  Per-channel power masks may be
infinite (``numpy.inf`` is the "unbounded" sentinel).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Absolute slack allowed on the per-user budget constraint.  The water-level
# search terminates with a bounded residual, so every downstream feasibility
# check must accept at least this much.
FEASIBILITY_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NetworkModel:
    """All static data of the power-allocation game.

    Parameters
    ----------
    gain : ndarray, shape (N, N, K)
        Squared channel gain ``gain[i, j, k]`` from the transmitter of user
        ``i`` to the receiver of user ``j`` on channel ``k``.
    noise_floor : ndarray, shape (N, K)
        Environmental noise power at receiver ``i`` on channel ``k``.
    power_budget : ndarray, shape (N,)
        Total transmit power available to each user.
    power_mask : ndarray, shape (N, K)
        Per-channel power cap; ``numpy.inf`` means unconstrained.
    """

    gain: np.ndarray
    noise_floor: np.ndarray
    power_budget: np.ndarray
    power_mask: np.ndarray

    def __post_init__(self):
        gain = _readonly(self.gain)
        noise = _readonly(self.noise_floor)
        budget = _readonly(self.power_budget)
        mask = _readonly(self.power_mask)
        if gain.ndim != 3 or gain.shape[0] != gain.shape[1]:
            raise ValueError(f"gain must have shape (N, N, K), got {gain.shape}")
        n, _, k = gain.shape
        if noise.shape != (n, k):
            raise ValueError(f"noise_floor must have shape ({n}, {k}), got {noise.shape}")
        if budget.shape != (n,):
            raise ValueError(f"power_budget must have shape ({n},), got {budget.shape}")
        if mask.shape != (n, k):
            raise ValueError(f"power_mask must have shape ({n}, {k}), got {mask.shape}")
        if not np.all(np.isfinite(gain)) or np.any(gain < 0):
            raise ValueError("gains must be finite and nonnegative")
        direct = np.einsum("iik->ik", gain)
        if np.any(direct <= 0):
            raise ValueError("direct gains gain[i, i, k] must be strictly positive")
        if not np.all(np.isfinite(noise)) or np.any(noise <= 0):
            raise ValueError("noise floors must be finite and strictly positive")
        if not np.all(np.isfinite(budget)) or np.any(budget <= 0):
            raise ValueError("power budgets must be finite and strictly positive")
        if np.any(mask <= 0) or np.any(np.isnan(mask)):
            raise ValueError("power masks must be strictly positive (or infinite)")
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "noise_floor", noise)
        object.__setattr__(self, "power_budget", budget)
        object.__setattr__(self, "power_mask", mask)

    @property
    def num_users(self) -> int:
        return self.gain.shape[0]

    @property
    def num_channels(self) -> int:
        return self.gain.shape[2]

    @property
    def direct_gain(self) -> np.ndarray:
        """Diagonal gains ``gain[i, i, k]`` as an (N, K) array."""
        return np.einsum("iik->ik", self.gain)

    def check_user(self, i: int) -> None:
        if not 0 <= i < self.num_users:
            raise IndexError(f"user index {i} out of range [0, {self.num_users})")

    def check_channel(self, k: int) -> None:
        if not 0 <= k < self.num_channels:
            raise IndexError(f"channel index {k} out of range [0, {self.num_channels})")

    def assert_feasible(self, profile: "PowerProfile", tol: float = FEASIBILITY_TOL) -> None:
        """Raise ValueError unless ``profile`` respects masks and budgets."""
        v = profile.values
        if v.shape != (self.num_users, self.num_channels):
            raise ValueError(
                f"profile shape {v.shape} does not match network "
                f"({self.num_users}, {self.num_channels})"
            )
        if np.any(v > self.power_mask + tol):
            raise ValueError("profile exceeds a power mask")
        excess = v.sum(axis=1) - self.power_budget
        if np.any(excess > tol):
            raise ValueError(f"profile exceeds a power budget by {excess.max():.3e}")


@dataclass(frozen=True, eq=False)
class PowerProfile:
    """Stacked per-user, per-channel power allocation (N, K)."""

    values: np.ndarray

    def __post_init__(self):
        v = _readonly(self.values)
        if v.ndim != 2:
            raise ValueError(f"profile values must be 2-d (users, channels), got {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("profile powers must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls, model: NetworkModel) -> "PowerProfile":
        """Canonical default start: per channel ``min(budget/K, mask)``."""
        spread = model.power_budget[:, None] / model.num_channels
        return cls(np.minimum(spread + np.zeros_like(model.power_mask), model.power_mask))

    @classmethod
    def zeros(cls, model: NetworkModel) -> "PowerProfile":
        return cls(np.zeros((model.num_users, model.num_channels)))


def normalized_cross_gain(model: NetworkModel, j: int, i: int, k: int) -> float:
    """Cross gain from user j into receiver i, normalized by i's direct gain."""
    model.check_user(j)
    model.check_user(i)
    model.check_channel(k)
    if j == i:
        raise ValueError("cross gain requires j != i")
    return float(model.gain[j, i, k] / model.gain[i, i, k])


def true_ipn_all(model: NetworkModel, profile: PowerProfile) -> np.ndarray:
    """Normalized interference-plus-noise for every user, shape (N, K)."""
    model.assert_feasible(profile)
    p = profile.values
    direct = model.direct_gain
    received = np.einsum("jik,jk->ik", model.gain, p)
    interference = received - direct * p
    return (model.noise_floor + interference) / direct


def true_ipn(model: NetworkModel, profile: PowerProfile, i: int) -> np.ndarray:
    """Normalized interference-plus-noise at receiver i, shape (K,)."""
    model.check_user(i)
    return true_ipn_all(model, profile)[i]


def sinr(model: NetworkModel, profile: PowerProfile, i: int, k: int) -> float:
    """Signal to interference-plus-noise ratio of user i on channel k."""
    model.check_user(i)
    model.check_channel(k)
    model.assert_feasible(profile)
    p = profile.values
    signal = model.gain[i, i, k] * p[i, k]
    denom = model.noise_floor[i, k] + (
        model.gain[:, i, k] @ p[:, k] - model.gain[i, i, k] * p[i, k]
    )
    return float(signal / denom)


def rate(model: NetworkModel, profile: PowerProfile, i: int) -> float:
    """Achievable rate of user i: sum over channels of log(1 + SINR)."""
    model.check_user(i)
    model.assert_feasible(profile)
    p = profile.values
    direct = model.direct_gain[i]
    received = np.einsum("jk,jk->k", model.gain[:, i, :], p)
    denom = model.noise_floor[i] + received - direct * p[i]
    return float(np.log1p(direct * p[i] / denom).sum())
