"""Canned scenarios, random networks, and the Monte Carlo studies.

The two strong-interference scenarios reproduce published 3-user, 2-channel
channel matrices on which the plain fixed-point iteration oscillates.  The
random generator draws contractive networks for the weak-interference
studies.  ``bias_study`` measures the conditional mean of the water-filling
bias under estimation error, and ``lemma4_recursion`` simulates the scalar
averaged recursion driving the convergence argument.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from iwfsim.algorithms import Algorithm, StepSizeSchedule
from iwfsim.analysis import spectral_radius
from iwfsim.network import NetworkModel, PowerProfile, true_ipn_all
from iwfsim.noise import NoiseModel, make_generator
from iwfsim.waterfill import _solve_rows, solve_batch, stacked_operator

# Cross gains of generated networks are rescaled to keep the certificate
# comfortably contractive.
TARGET_SPECTRAL_RADIUS = 0.9

# Fixed-point residual allowed for a scenario's declared equilibrium.
REFERENCE_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Scenario:
    """A named, fully specified experiment setup."""

    name: str
    network: NetworkModel
    noise: NoiseModel
    algorithms: tuple[Algorithm, ...]
    max_iters: int
    seed: int = 0
    start: PowerProfile | None = None
    reference: PowerProfile | None = None


def _verify_reference(network: NetworkModel, reference: PowerProfile) -> None:
    image = stacked_operator(network, reference)
    residual = np.abs(image.values - reference.values).max()
    if residual > REFERENCE_RESIDUAL_TOL:
        raise ValueError(
            f"declared equilibrium is not a fixed point (residual {residual:.3e})"
        )


def scenario_strong_interference_a(sigma_sq: float = 1.0) -> Scenario:
    """Three users, two identical channels, circulant strong cross gains.

    Noise is ``sigma_sq`` on channel 1 and ``sigma_sq + budget`` on channel
    2.  The unique equilibrium puts two thirds of each budget on channel 1;
    it is re-verified as a fixed point every time the scenario is built.
    """
    h = np.array([[1.0, 0.0, 2.0], [2.0, 1.0, 0.0], [0.0, 2.0, 1.0]])
    n, k = 3, 2
    gain = np.repeat(h[:, :, None], k, axis=2)
    budget = 10.0
    noise_floor = np.empty((n, k))
    noise_floor[:, 0] = sigma_sq
    noise_floor[:, 1] = sigma_sq + budget
    network = NetworkModel(
        gain=gain,
        noise_floor=noise_floor,
        power_budget=np.full(n, budget),
        power_mask=np.full((n, k), np.inf),
    )
    reference = PowerProfile(np.tile([2.0 * budget / 3.0, budget / 3.0], (n, 1)))
    _verify_reference(network, reference)
    return Scenario(
        name="strong-a",
        network=network,
        noise=NoiseModel(kind="none"),
        algorithms=(Algorithm.iwf(), Algorithm.aiwf(StepSizeSchedule.harmonic())),
        max_iters=4000,
        seed=0,
        reference=reference,
    )


def scenario_strong_interference_b(noise_power: float = 1.0) -> Scenario:
    """Three users, two distinct strong channel matrices, equal noise on
    both channels.  Used for the relaxation-factor sensitivity study; no
    equilibrium is declared."""
    h1 = np.array([[1.0, 2.0, 4.0], [4.0, 1.0, 2.0], [2.0, 4.0, 1.0]])
    h2 = np.array([[2.0, 3.0, 5.0], [3.0, 2.0, 5.0], [5.0, 3.0, 2.0]])
    n, k = 3, 2
    gain = np.stack([h1, h2], axis=2)
    network = NetworkModel(
        gain=gain,
        noise_floor=np.full((n, k), noise_power),
        power_budget=np.full(n, 10.0),
        power_mask=np.full((n, k), np.inf),
    )
    return Scenario(
        name="strong-b",
        network=network,
        noise=NoiseModel(kind="none"),
        algorithms=(
            Algorithm.riwf(0.4),
            Algorithm.riwf(0.7),
            Algorithm.aiwf(StepSizeSchedule.harmonic()),
        ),
        max_iters=4000,
        seed=0,
    )


def random_weak_network(
    n_users: int,
    n_channels: int,
    seed: int,
    power_mask: float = np.inf,
    target_rho: float = TARGET_SPECTRAL_RADIUS,
) -> NetworkModel:
    """Random network rescaled until the contraction certificate holds.

    Direct gains are uniform on (0.5, 1.5), cross gains uniform on
    (0, 0.5), noise floors uniform on (0.5, 1.5), budgets 10; the cross
    gains are then rescaled by the largest factor c <= 1 for which the gain
    matrix's spectral radius is at most ``target_rho``.
    """
    if n_users < 1 or n_channels < 1:
        raise ValueError("n_users and n_channels must be at least 1")
    if not 0 < target_rho < 1:
        raise ValueError("target_rho must lie in (0, 1)")
    rng = make_generator(seed)
    gain = rng.uniform(0.0, 0.5, size=(n_users, n_users, n_channels))
    direct = rng.uniform(0.5, 1.5, size=(n_users, n_channels))
    idx = np.arange(n_users)
    gain[idx, idx, :] = direct
    noise_floor = rng.uniform(0.5, 1.5, size=(n_users, n_channels))

    cross = gain.copy()
    cross[idx, idx, :] = 0.0
    upsilon = (cross / direct[None, :, :]).max(axis=2).T
    rho = spectral_radius(upsilon)
    if rho > target_rho:
        gain = cross * (target_rho / rho)
        gain[idx, idx, :] = direct
    return NetworkModel(
        gain=gain,
        noise_floor=noise_floor,
        power_budget=np.full(n_users, 10.0),
        power_mask=np.full((n_users, n_channels), power_mask),
    )


def scenario_random_weak(
    n_users: int = 10,
    n_channels: int = 64,
    seed: int = 0,
    noise: NoiseModel | None = None,
) -> Scenario:
    """Weak-interference scenario with estimation error, sized like the
    published noisy-tracking study (10 users, 64 channels, 20 dB ratio)."""
    network = random_weak_network(n_users, n_channels, seed)
    if noise is None:
        noise = NoiseModel(kind="gaussian_ier", ier_db=20.0, seed=seed)
    return Scenario(
        name="random-weak",
        network=network,
        noise=noise,
        algorithms=(Algorithm.iwf(), Algorithm.aiwf(StepSizeSchedule.harmonic())),
        max_iters=2000,
        seed=seed,
    )


CANNED_SCENARIOS = {
    "strong-a": scenario_strong_interference_a,
    "strong-b": scenario_strong_interference_b,
    "random-weak": scenario_random_weak,
}


@dataclass(frozen=True, eq=False)
class BiasStudyResult:
    """Aggregated bias-mean estimates and their empirical distribution."""

    sample_means: np.ndarray  # (repetitions, N, K)
    bin_edges: np.ndarray
    masses: np.ndarray  # sums to 1
    samples_per_estimate: int
    repetitions: int

    @property
    def pooled(self) -> np.ndarray:
        return self.sample_means.ravel()


def _random_feasible_profile(rng: np.random.Generator, model: NetworkModel) -> PowerProfile:
    draw_cap = np.minimum(model.power_mask, model.power_budget[:, None])
    values = rng.uniform(0.0, 1.0, size=draw_cap.shape) * draw_cap
    totals = values.sum(axis=1)
    over = totals > model.power_budget
    values[over] *= (model.power_budget[over] / totals[over])[:, None]
    return PowerProfile(values)


# The bias experiment keeps the IPN an order of magnitude below the
# per-channel waterline depth (budget/K).  Clamp events are then rare, so
# the conditional bias of the noisy response sits below the Monte Carlo
# resolution and the estimate spread is driven by the sample count alone,
# which is what the study measures.
_BIAS_NOISE_RANGE = (0.02, 0.03)
_BIAS_CROSS_SCALE = 0.05


def _bias_network(rng: np.random.Generator, n_users: int, n_channels: int,
                  budget: float, mask: float) -> NetworkModel:
    gain = rng.uniform(0.0, 0.5, size=(n_users, n_users, n_channels))
    direct = rng.uniform(0.5, 1.5, size=(n_users, n_channels))
    idx = np.arange(n_users)
    gain[idx, idx, :] = 0.0
    upsilon = (gain / direct[None, :, :]).max(axis=2).T
    rho = spectral_radius(upsilon)
    scale = _BIAS_CROSS_SCALE * min(1.0, TARGET_SPECTRAL_RADIUS / max(rho, 1e-12))
    gain *= scale
    gain[idx, idx, :] = direct
    return NetworkModel(
        gain=gain,
        noise_floor=rng.uniform(*_BIAS_NOISE_RANGE, size=(n_users, n_channels)),
        power_budget=np.full(n_users, budget),
        power_mask=np.full((n_users, n_channels), mask),
    )


def bias_study(
    n_users: int = 10,
    n_channels: int = 32,
    ier_db: float = 10.0,
    L: int = 1000,
    repetitions: int = 1000,
    seed: int = 0,
    budget: float = 10.0,
    mask: float = 3.0,
    bins: int = 101,
    chunk: int = 2000,
) -> BiasStudyResult:
    """Monte Carlo estimate of the conditional bias of the noisy response.

    Each repetition fixes a random network and a random feasible profile,
    draws ``L`` Gaussian error matrices at the given error ratio, re-solves
    the water-filling for each, and averages the resulting bias samples
    (noisy minus exact allocation) into one mean estimate per user and
    channel.  All estimates are pooled into a unit-mass histogram; its
    spread shrinks like 1/sqrt(L) when the conditional bias is negligible,
    which the network draw is scaled to guarantee (see ``_bias_network``).

    The solver is driven in chunks of ``chunk`` error samples; small chunks
    keep the working set in cache, and the draw stream is identical for any
    chunking.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    children = np.random.SeedSequence(seed).spawn(repetitions)
    means = np.empty((repetitions, n_users, n_channels))
    var_factor = 10.0 ** (-ier_db / 10.0)

    chunk = min(chunk, L)
    rows = chunk * n_users
    row_power = np.empty((rows, n_channels))
    row_level = np.empty(rows)
    row_sat = np.zeros(rows, dtype=np.bool_)

    for r in range(repetitions):
        rng = make_generator(children[r])
        network = _bias_network(rng, n_users, n_channels, budget, mask)
        profile = _random_feasible_profile(rng, network)
        ipn = true_ipn_all(network, profile)
        exact, _, _ = solve_batch(ipn, network.power_budget, network.power_mask)
        std = np.sqrt(ipn * var_factor)
        row_budgets = np.tile(network.power_budget, chunk)
        row_masks = np.tile(network.power_mask, (chunk, 1))

        acc = np.zeros((n_users, n_channels))
        done = 0
        while done < L:
            m = min(chunk, L - done)
            eps = rng.standard_normal((m, n_users, n_channels)) * std[None, :, :]
            noisy_ipn = np.ascontiguousarray(
                (ipn[None, :, :] + eps).reshape(m * n_users, n_channels)
            )
            _solve_rows(
                noisy_ipn,
                row_budgets[: m * n_users],
                row_masks[: m * n_users],
                row_power[: m * n_users],
                row_level[: m * n_users],
                row_sat[: m * n_users],
            )
            acc += (
                row_power[: m * n_users].reshape(m, n_users, n_channels)
                - exact[None, :, :]
            ).sum(axis=0)
            done += m
        means[r] = acc / L
    counts, edges = np.histogram(means.ravel(), bins=bins)
    masses = counts / counts.sum()
    return BiasStudyResult(
        sample_means=means,
        bin_edges=edges,
        masses=masses,
        samples_per_estimate=L,
        repetitions=repetitions,
    )


def lemma4_recursion(
    schedule: StepSizeSchedule,
    noise_bound: float,
    T: int,
    seed: int = 0,
    w0: float = 1.0,
) -> tuple[float, np.ndarray]:
    """Simulate ``w_t = (1 - a_t) w_{t-1} + a_t xi_t`` for t = 1..T.

    ``xi_t`` are i.i.d. zero-mean Gaussians with variance ``noise_bound``
    (identically zero when the bound is zero).  Returns ``|w_T|`` and the
    full trajectory including ``w0``.

    Under the harmonic schedule the recursion telescopes to the running
    mean ``w_t = (w0 + xi_1 + ... + xi_t) / (t + 1)``, and the trajectory
    is accumulated in that form; with zero noise this makes ``w_T`` equal
    ``w0 / (T + 1)`` exactly.
    """
    if schedule.kind == "constant":
        raise ValueError("the recursion requires a diminishing schedule")
    if noise_bound < 0:
        raise ValueError("noise_bound must be nonnegative")
    if T < 1:
        raise ValueError("T must be at least 1")
    rng = make_generator(seed)
    if noise_bound > 0:
        xi = rng.standard_normal(T) * np.sqrt(noise_bound)
    else:
        xi = np.zeros(T)
    trajectory = np.empty(T + 1)
    trajectory[0] = float(w0)
    if schedule.kind == "harmonic":
        trajectory[1:] = (w0 + np.cumsum(xi)) / np.arange(2, T + 2)
    else:
        w = float(w0)
        for t in range(1, T + 1):
            a = schedule.alpha(t)
            w = (1.0 - a) * w + a * xi[t - 1]
            trajectory[t] = w
    return abs(trajectory[-1]), trajectory
