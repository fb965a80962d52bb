"""The three iteration engines and the run harness.

All engines share one update skeleton: evaluate the stacked (noisy)
water-filling response against the current profile, then move by a mixing
coefficient -- 1 for the plain fixed-point iteration, a constant relaxation
factor, or a diminishing stepsize whose square sums stay finite while the
plain sums diverge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from iwfsim import analysis
from iwfsim.network import NetworkModel, PowerProfile
from iwfsim.noise import ErrorSample, NoiseModel, sample
from iwfsim.waterfill import _stacked_solve

DEFAULT_MAX_ITERS = 5000
DEFAULT_TOL = 1e-6
# Fraction of the run the detector inspects for a non-decaying tail.
DETECTOR_WINDOW_FRACTION = 0.2
# The last iterates always kept when a trace is decimated.
ALWAYS_KEEP_TAIL = 50

SCHEDULE_KINDS = ("harmonic", "power_decay", "constant")
ALGORITHM_KINDS = ("iwf", "riwf", "aiwf")


@dataclass(frozen=True)
class StepSizeSchedule:
    """Stepsize sequence for the averaged iteration.

    harmonic:     alpha_t = 1/(t+1)                 (alpha_0 = 1)
    power_decay:  alpha_t = scale/(t+offset)**gamma clipped to (0, 1],
                  with gamma in (0.5, 1] so the sums diverge while the
                  squared sums converge
    constant:     alpha_t = lam, valid only for the relaxed iteration
    """

    kind: str = "harmonic"
    gamma: float = 1.0
    scale: float = 1.0
    offset: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}; expected one of {SCHEDULE_KINDS}")
        if self.kind == "power_decay":
            if not 0.5 < self.gamma <= 1.0:
                raise ValueError("power_decay requires gamma in (0.5, 1]")
            if self.scale <= 0 or self.offset <= 0:
                raise ValueError("power_decay requires positive scale and offset")
        if self.kind == "constant" and not 0.0 < self.lam <= 1.0:
            raise ValueError("constant schedule requires lam in (0, 1]")

    def alpha(self, t: int) -> float:
        if t < 0:
            raise ValueError("iteration index must be nonnegative")
        if self.kind == "harmonic":
            return 1.0 / (t + 1.0)
        if self.kind == "power_decay":
            return min(1.0, self.scale / (t + self.offset) ** self.gamma)
        return self.lam

    @classmethod
    def harmonic(cls) -> "StepSizeSchedule":
        return cls(kind="harmonic")

    @classmethod
    def power_decay(cls, gamma: float, scale: float = 1.0, offset: float = 1.0) -> "StepSizeSchedule":
        return cls(kind="power_decay", gamma=gamma, scale=scale, offset=offset)

    @classmethod
    def constant(cls, lam: float) -> "StepSizeSchedule":
        return cls(kind="constant", lam=lam)


@dataclass(frozen=True)
class Algorithm:
    """Tagged iteration engine plus its parameters."""

    kind: str
    lam: float = 1.0
    schedule: StepSizeSchedule | None = None

    def __post_init__(self):
        if self.kind not in ALGORITHM_KINDS:
            raise ValueError(f"unknown algorithm {self.kind!r}; expected one of {ALGORITHM_KINDS}")
        if self.kind == "riwf" and not 0.0 < self.lam <= 1.0:
            raise ValueError("riwf requires lam in (0, 1]")
        if self.kind == "aiwf":
            sched = self.schedule or StepSizeSchedule.harmonic()
            if sched.kind == "constant":
                raise ValueError("aiwf requires a diminishing schedule, not a constant one")
            object.__setattr__(self, "schedule", sched)

    @classmethod
    def iwf(cls) -> "Algorithm":
        return cls(kind="iwf")

    @classmethod
    def riwf(cls, lam: float) -> "Algorithm":
        return cls(kind="riwf", lam=lam)

    @classmethod
    def aiwf(cls, schedule: StepSizeSchedule | None = None) -> "Algorithm":
        return cls(kind="aiwf", schedule=schedule)

    @property
    def label(self) -> str:
        if self.kind == "riwf":
            return f"riwf-lam{self.lam:g}"
        if self.kind == "aiwf":
            sched = self.schedule
            if sched.kind == "harmonic":
                return "aiwf-harmonic"
            return f"aiwf-power{sched.gamma:g}"
        return "iwf"

    def mix_coefficient(self, t: int) -> float:
        """Weight put on the operator output at iteration t."""
        if self.kind == "iwf":
            return 1.0
        if self.kind == "riwf":
            return self.lam
        return 1.0 if t == 0 else self.schedule.alpha(t)


def _epsilon_of(error: ErrorSample | None):
    if error is None:
        return None
    return error.epsilon


def _mix(profile: PowerProfile, operator_out: PowerProfile, coeff: float) -> PowerProfile:
    if coeff == 1.0:
        return operator_out
    return PowerProfile((1.0 - coeff) * profile.values + coeff * operator_out.values)


def iwf_step(model: NetworkModel, profile: PowerProfile, error: ErrorSample | None) -> PowerProfile:
    """One synchronous fixed-point step (noisy when ``error`` is set)."""
    new_profile, _, _ = _stacked_solve(model, profile, _epsilon_of(error))
    return new_profile


def riwf_step(
    model: NetworkModel, profile: PowerProfile, error: ErrorSample | None, lam: float
) -> PowerProfile:
    """Relaxed step: convex combination of the profile and the response."""
    if not 0.0 < lam <= 1.0:
        raise ValueError("lam must lie in (0, 1]")
    new_profile, _, _ = _stacked_solve(model, profile, _epsilon_of(error))
    return _mix(profile, new_profile, lam)


def aiwf_step(
    model: NetworkModel,
    profile: PowerProfile,
    error: ErrorSample | None,
    t: int,
    schedule: StepSizeSchedule,
) -> PowerProfile:
    """Averaged step with diminishing stepsizes.

    At t = 0 the output is exactly the operator evaluation; afterwards the
    iterate moves by alpha_t toward it.  Under the harmonic schedule the
    iterate equals the running mean of all operator outputs so far.
    """
    if schedule.kind == "constant":
        raise ValueError("aiwf requires a diminishing schedule, not a constant one")
    if t < 0:
        raise ValueError("iteration index must be nonnegative")
    new_profile, _, _ = _stacked_solve(model, profile, _epsilon_of(error))
    coeff = 1.0 if t == 0 else schedule.alpha(t)
    return _mix(profile, new_profile, coeff)


@dataclass
class RunTrace:
    """Time-indexed record of one run.

    ``kept_iterations`` indexes the stored iterates (iterate 0 is the
    start; decimated traces always keep the start, every m-th iterate and
    the final stretch).  ``residuals`` covers every iteration regardless of
    decimation: ``residuals[s]`` is the weighted block-max distance between
    iterates s+1 and s.  ``water_levels`` aligns with ``kept_iterations``
    and is None at the start iterate, which no operator evaluation
    produced.
    """

    algorithm: Algorithm
    seed: int
    weight: np.ndarray
    certificate: analysis.ContractionCertificate
    kept_iterations: list[int] = field(default_factory=list)
    iterates: list[PowerProfile] = field(default_factory=list)
    water_levels: list[np.ndarray | None] = field(default_factory=list)
    residuals: np.ndarray | None = None
    errors_applied: list[ErrorSample | None] | None = None
    distance_to_reference: np.ndarray | None = None
    converged: bool = False
    convergence_iteration: int | None = None
    verdict: str = "undecided"

    @property
    def final_profile(self) -> PowerProfile:
        return self.iterates[-1]

    @property
    def num_iterations(self) -> int:
        return self.kept_iterations[-1]


def _kept_mask(total: int, decimate: int) -> np.ndarray:
    keep = np.zeros(total + 1, dtype=bool)
    keep[::decimate] = True
    keep[max(0, total - ALWAYS_KEEP_TAIL + 1):] = True
    keep[0] = True
    keep[total] = True
    return keep


def run(
    model: NetworkModel,
    algorithm: Algorithm,
    noise: NoiseModel | None = None,
    start: PowerProfile | str = "default",
    max_iters: int = DEFAULT_MAX_ITERS,
    reference: PowerProfile | None = None,
    tol: float = DEFAULT_TOL,
    window: int | None = None,
    decimate: int = 1,
    record_errors: bool = False,
) -> RunTrace:
    """Execute an algorithm and record its trace.

    Parameters
    ----------
    start : PowerProfile or "default"
        "default" is the uniform allocation min(budget/K, mask).
    reference : PowerProfile, optional
        When given, the weighted block-max distance to it is recorded at
        every kept iterate.
    tol, window :
        Convergence-detector settings; ``window`` defaults to 20 percent of
        the run (at least 2).
    decimate : int
        Keep every m-th iterate; the start and the final stretch are always
        kept.  Residuals are recorded for every iteration regardless.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if decimate < 1:
        raise ValueError("decimate must be at least 1")
    noise = noise or NoiseModel(kind="none")
    profile = PowerProfile.uniform(model) if isinstance(start, str) else start
    model.assert_feasible(profile)
    if reference is not None:
        model.assert_feasible(reference)

    certificate = analysis.contraction_certificate(model)
    weight = certificate.weight if certificate.contractive else np.ones(model.num_users)
    if window is None:
        window = max(2, math.ceil(DETECTOR_WINDOW_FRACTION * max_iters))

    rng = noise.make_rng()
    keep = _kept_mask(max_iters, decimate)

    trace = RunTrace(algorithm=algorithm, seed=noise.seed, weight=weight, certificate=certificate)
    if record_errors:
        trace.errors_applied = []
    distances = [] if reference is not None else None
    residuals = np.empty(max_iters)

    def keep_iterate(t: int, prof: PowerProfile, levels: np.ndarray | None,
                     err: ErrorSample | None) -> None:
        trace.kept_iterations.append(t)
        trace.iterates.append(prof)
        trace.water_levels.append(levels)
        if record_errors:
            trace.errors_applied.append(err)
        if distances is not None:
            distances.append(
                analysis.weighted_block_max_norm(prof.values - reference.values, weight)
            )

    keep_iterate(0, profile, None, None)
    for t in range(max_iters):
        if noise.kind == "none":
            err = None
        else:
            err = sample(noise, model, profile, t, rng)
        operator_out, levels, _ = _stacked_solve(model, profile, _epsilon_of(err))
        new_profile = _mix(profile, operator_out, algorithm.mix_coefficient(t))
        residuals[t] = analysis.weighted_block_max_norm(
            new_profile.values - profile.values, weight
        )
        profile = new_profile
        if keep[t + 1]:
            keep_iterate(t + 1, profile, levels, err)

    trace.residuals = residuals
    if distances is not None:
        trace.distance_to_reference = np.asarray(distances)

    if len(residuals) >= window:
        verdict = analysis.verdict_from_residuals(residuals, window, tol)
        trace.verdict = verdict.status
        trace.converged = verdict.converged
        trace.convergence_iteration = verdict.iteration
    return trace
