"""Generators for the time-varying IPN estimation-error process.

The whole artifact draws randomness from one fixed, documented bit
generator: numpy's SFC64, wrapped in ``numpy.random.Generator`` via
:func:`make_generator`.  Gaussian variates come from numpy's deterministic
ziggurat transform of that stream, so a (seed, model, network, profile
sequence) tuple always reproduces the identical errors bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from iwfsim.network import NetworkModel, PowerProfile, true_ipn_all


def make_generator(seed) -> np.random.Generator:
    """The artifact-wide seeded random generator (SFC64)."""
    return np.random.Generator(np.random.SFC64(seed))

KINDS = ("none", "gaussian_ier", "gaussian_fixed_variance", "diminishing", "summable")

# Envelope decay exponents used when the model does not specify one.  The
# summable default keeps sum_t (1/(t+1)) * scale/(t+1)^q finite for q > 0.
_DEFAULT_DECAY = {"diminishing": 1.0, "summable": 0.5}


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Parameters of the estimation-error process.

    kind:
        ``none``                    exact measurements, zero error always.
        ``gaussian_ier``            zero-mean Gaussian whose per-entry
                                    variance tracks the current IPN at a
                                    fixed error ratio ``ier_db``.
        ``gaussian_fixed_variance`` zero-mean Gaussian with a fixed (N, K)
                                    ``variance`` matrix.
        ``diminishing``             random direction under the deterministic
                                    envelope ``scale/(t+1)**decay_exponent``.
        ``summable``                same envelope, default exponent 0.5 so
                                    the harmonically weighted error sum
                                    converges.
    """

    kind: str = "none"
    ier_db: float | None = None
    variance: np.ndarray | None = None
    decay_exponent: float | None = None
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "gaussian_ier":
            if self.ier_db is None or not np.isfinite(self.ier_db):
                raise ValueError("gaussian_ier requires a finite ier_db")
        if self.kind == "gaussian_fixed_variance":
            if self.variance is None:
                raise ValueError("gaussian_fixed_variance requires a variance matrix")
            v = np.array(self.variance, dtype=float)
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValueError("variances must be finite and nonnegative")
            v.setflags(write=False)
            object.__setattr__(self, "variance", v)
        if self.kind in ("diminishing", "summable"):
            if self.decay_exponent is not None and self.decay_exponent <= 0:
                raise ValueError("decay_exponent must be positive")
            if self.scale <= 0:
                raise ValueError("scale must be positive")

    @property
    def resolved_decay(self) -> float:
        if self.decay_exponent is not None:
            return self.decay_exponent
        return _DEFAULT_DECAY.get(self.kind, 1.0)

    def make_rng(self) -> np.random.Generator:
        return make_generator(self.seed)


@dataclass(frozen=True, eq=False)
class ErrorSample:
    """One iteration's error matrix, aligned with the network (N, K)."""

    epsilon: np.ndarray
    iteration: int

    def __post_init__(self):
        e = np.array(self.epsilon, dtype=float)
        e.setflags(write=False)
        object.__setattr__(self, "epsilon", e)


def variance_from_ier(ipn_value: float, ier_db: float) -> float:
    """Error variance for a given IPN level and error ratio in dB.

    Inverts ``ier_db = 10 * log10(ipn / var)``.
    """
    ipn_value = float(ipn_value)
    if not ipn_value > 0:
        raise ValueError("ipn_value must be strictly positive")
    return ipn_value * 10.0 ** (-ier_db / 10.0)


def sample(
    model: NoiseModel,
    network: NetworkModel,
    profile: PowerProfile,
    t: int,
    rng: np.random.Generator,
) -> ErrorSample:
    """Draw the error matrix for iteration ``t``.

    For ``gaussian_ier`` the variance is recomputed from the current
    profile's true IPN, so the error ratio holds per iteration.
    """
    if t < 0:
        raise ValueError("iteration index must be nonnegative")
    n, k = network.num_users, network.num_channels
    if model.kind == "none":
        eps = np.zeros((n, k))
    elif model.kind == "gaussian_ier":
        ipn = true_ipn_all(network, profile)
        std = np.sqrt(ipn * 10.0 ** (-model.ier_db / 10.0))
        eps = rng.standard_normal((n, k)) * std
    elif model.kind == "gaussian_fixed_variance":
        if model.variance.shape != (n, k):
            raise ValueError(f"variance shape {model.variance.shape} does not match ({n}, {k})")
        eps = rng.standard_normal((n, k)) * np.sqrt(model.variance)
    elif model.kind in ("diminishing", "summable"):
        direction = rng.standard_normal((n, k))
        norm = np.linalg.norm(direction)
        envelope = model.scale / (t + 1.0) ** model.resolved_decay
        eps = direction * (envelope / norm) if norm > 0 else np.zeros((n, k))
    else:  # pragma: no cover - guarded by NoiseModel validation
        raise ValueError(f"unknown noise kind {model.kind!r}")
    return ErrorSample(epsilon=eps, iteration=t)
