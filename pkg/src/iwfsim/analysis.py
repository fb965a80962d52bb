"""Convergence-condition machinery and run diagnostics.

The worst-case normalized cross gains form a nonnegative matrix whose
spectral radius decides whether the stacked best-response map is a
contraction in a weighted block-maximum norm.  When it is, a certifying
weight vector and the contraction coefficient are computed constructively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from iwfsim.network import NetworkModel

_POWER_ITER_TOL = 1e-10
_POWER_ITER_CAP = 10**5

# Oscillation verdict thresholds; the source material is only qualitative.
_OSCILLATION_MEAN_FACTOR = 10.0
_OSCILLATION_SLOPE = -1e-3


@dataclass(frozen=True, eq=False)
class GainMatrix:
    """Worst-case normalized cross gains; zero diagonal, shape (N, N)."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError("gain matrix must be square")
        if np.any(e < 0) or not np.all(np.isfinite(e)):
            raise ValueError("gain matrix entries must be finite and nonnegative")
        if np.any(np.diag(e) != 0):
            raise ValueError("gain matrix diagonal must be exactly zero")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)


@dataclass(frozen=True, eq=False)
class ContractionCertificate:
    """Spectral radius plus, when contractive, the certifying weight and
    contraction coefficient of the best-response map."""

    spectral_radius: float
    contractive: bool
    weight: np.ndarray | None = None
    beta: float | None = None

    def describe(self) -> str:
        lines = [f"spectral_radius = {self.spectral_radius:.12g}"]
        lines.append(f"contractive = {self.contractive}")
        if self.contractive:
            lines.append(f"beta = {self.beta:.12g}")
            lines.append("weight = " + " ".join(f"{w:.12g}" for w in self.weight))
        return "\n".join(lines)


@dataclass(frozen=True)
class ConvergenceVerdict:
    """Detector outcome: 'converged' (with iteration), 'oscillating' or
    'undecided'."""

    status: str
    iteration: int | None = None

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _entries(m) -> np.ndarray:
    if isinstance(m, GainMatrix):
        return m.entries
    return np.asarray(m, dtype=float)


def build_gain_matrix(model: NetworkModel) -> GainMatrix:
    """Entry (i, j) is the largest normalized gain from user j into
    receiver i across channels; the diagonal is zero."""
    direct = model.direct_gain  # (N, K)
    # gain[j, i, k] / gain[i, i, k], maxed over k
    normalized = model.gain / direct[None, :, :]
    entries = normalized.max(axis=2).T
    np.fill_diagonal(entries, 0.0)
    return GainMatrix(entries)


def spectral_radius(m) -> float:
    """Largest eigenvalue modulus of a nonnegative square matrix.

    Power iteration on ``m + s*I`` with ``s`` the largest row sum, seeded
    with the all-ones vector.  For a nonnegative matrix every eigenvalue
    satisfies ``|lam + s| <= rho + s``, so the shift adds exactly ``s`` to
    the Perron root while strictly damping the tied-modulus eigenvalues
    (e.g. the ``+/-sqrt(bc)`` pair of a two-user gain matrix) that stall an
    unshifted iteration; the Rayleigh quotient then converges to
    ``rho + s`` and the shift is subtracted back out exactly.
    """
    a = _entries(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError("matrix must be nonnegative and finite")
    n = a.shape[0]
    shift = float(a.sum(axis=1).max())
    if shift == 0.0:
        return 0.0
    shifted = a + shift * np.eye(n)
    x = np.full(n, 1.0 / np.sqrt(n))
    estimate = 0.0
    stable = 0
    for _ in range(_POWER_ITER_CAP):
        y = shifted @ x
        new_estimate = float(x @ y)
        x = y / np.linalg.norm(y)
        if abs(new_estimate - estimate) <= _POWER_ITER_TOL * max(1.0, abs(new_estimate)):
            stable += 1
            if stable >= 2:
                estimate = new_estimate
                break
        else:
            stable = 0
        estimate = new_estimate
    return max(estimate - shift, 0.0)


def weight_vector(m) -> np.ndarray:
    """Certifying weight for a subunit-spectral-radius gain matrix.

    Solves ``(I - m) w = 1``.  The Neumann series of a nonnegative matrix
    with spectral radius below one makes every component at least one, and
    ``m @ w = w - 1 < w`` certifies that the induced weighted-max matrix
    norm is below one.
    """
    a = _entries(m)
    rho = spectral_radius(a)
    if rho >= 1.0:
        raise ValueError(f"spectral radius {rho:.6g} >= 1: no certifying weight exists")
    n = a.shape[0]
    w = np.linalg.solve(np.eye(n) - a, np.ones(n))
    return w


def weighted_block_max_norm(x, w) -> float:
    """Max over users of the Euclidean norm of that user's row divided by
    the user's weight.  ``x`` has one row per user."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    w = np.asarray(w, dtype=float)
    if w.shape != (x.shape[0],):
        raise ValueError(f"weight must have one entry per block ({x.shape[0]}), got {w.shape}")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    return float((np.sqrt((x * x).sum(axis=1)) / w).max())


def weighted_max_matrix_norm(m, w) -> float:
    """Induced matrix norm: max over rows i of sum_j |m[i,j]| w[j] / w[i]."""
    a = _entries(m)
    w = np.asarray(w, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or w.shape != (a.shape[0],):
        raise ValueError("matrix must be square with one weight per row")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    return float(((np.abs(a) @ w) / w).max())


def contraction_certificate(model: NetworkModel) -> ContractionCertificate:
    """Build the gain matrix and certify (or refuse) contraction."""
    gm = build_gain_matrix(model)
    rho = spectral_radius(gm)
    if rho < 1.0:
        w = weight_vector(gm)
        beta = weighted_max_matrix_norm(gm, w)
        return ContractionCertificate(spectral_radius=rho, contractive=True, weight=w, beta=beta)
    return ContractionCertificate(spectral_radius=rho, contractive=False)


def verdict_from_residuals(residuals, window: int, tol: float) -> ConvergenceVerdict:
    """Classify a run from its successive-iterate distance sequence.

    converged_at(t): the first t from which ``window`` consecutive
    residuals all stay below ``tol``.  oscillating: over the final window
    the residual mean exceeds ``10 * tol`` and a least-squares fit of the
    log-residuals has slope not meaningfully negative.  Anything else is
    undecided.
    """
    d = np.asarray(residuals, dtype=float)
    if window < 2:
        raise ValueError("window must be at least 2")
    if d.ndim != 1 or len(d) < window:
        raise ValueError(f"window {window} is longer than the residual sequence ({len(d)})")
    below = d < tol
    run_len = 0
    for s in range(len(d)):
        run_len = run_len + 1 if below[s] else 0
        if run_len == window:
            return ConvergenceVerdict(status="converged", iteration=s - window + 1)
    tail = d[-window:]
    if tail.mean() > _OSCILLATION_MEAN_FACTOR * tol:
        t = np.arange(window, dtype=float)
        logs = np.log(np.maximum(tail, 1e-300))
        slope = np.polyfit(t, logs, 1)[0]
        if slope >= _OSCILLATION_SLOPE:
            return ConvergenceVerdict(status="oscillating")
    return ConvergenceVerdict(status="undecided")


def detect_convergence(trace, window: int, tol: float) -> ConvergenceVerdict:
    """Run the verdict logic on a finished trace's residual sequence."""
    return verdict_from_residuals(trace.residuals, window, tol)
