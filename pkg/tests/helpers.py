"""Shared independent oracles and generators for the test suite."""

import itertools

import numpy as np

from iwfsim.experiments import random_weak_network


def grid_scan_level(ipn, budget, mask, points=2_000_001):
    """Brute-force scan of the water level over its bracket."""
    ipn = np.asarray(ipn, dtype=float)
    mask = np.broadcast_to(np.asarray(mask, dtype=float), ipn.shape)
    lo, hi = ipn.min(), ipn.max() + budget
    grid = np.linspace(lo, hi, points)
    totals = np.clip(grid[:, None] - ipn[None, :], 0.0, mask[None, :]).sum(axis=1)
    best = np.argmin(np.abs(totals - budget))
    return grid[best]


def projection_oracle(target, budget, mask):
    """Exact constrained-least-squares oracle for the best response.

    The best response spends the whole budget (its water level is chosen to
    do exactly that), so it is the Euclidean projection of the target onto
    {p : 0 <= p <= mask, sum(p) = B} with B = min(budget, sum(mask)); when
    the masks cannot absorb the budget the only point of that set is the
    mask itself.  The projection is found by enumerating every per-channel
    active-set assignment (zero / interior / capped), which is exhaustive
    for the small K used in tests.
    """
    target = np.asarray(target, dtype=float)
    mask = np.broadcast_to(np.asarray(mask, dtype=float), target.shape).astype(float)
    k = len(target)
    if np.all(np.isfinite(mask)) and mask.sum() <= budget:
        return mask.copy()
    best_p, best_d = None, np.inf
    for states in itertools.product((0, 1, 2), repeat=k):
        states = np.asarray(states)
        interior = states == 1
        capped = states == 2
        cap_total = mask[capped].sum()
        if not np.isfinite(cap_total):
            continue
        n_int = int(interior.sum())
        if n_int > 0:
            theta = (target[interior].sum() + cap_total - budget) / n_int
            p = np.where(interior, target - theta, 0.0)
        elif abs(cap_total - budget) <= 1e-9:
            p = np.zeros(k)
        else:
            continue
        p = np.where(capped, mask, p)
        if np.any(p < -1e-12) or np.any(p > mask + 1e-12):
            continue
        d = np.sum((p - target) ** 2)
        if d < best_d:
            best_d, best_p = d, np.clip(p, 0.0, mask)
    return best_p


def characteristic_polynomial(a):
    """Coefficients of det(xI - A) via the Faddeev-LeVerrier recursion."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    coeffs = np.empty(n + 1)
    coeffs[0] = 1.0
    m = np.zeros_like(a)
    for i in range(1, n + 1):
        m = a @ m + coeffs[i - 1] * np.eye(n)
        coeffs[i] = -(a @ m).trace() / i
    return coeffs


def brute_force_spectral_radius(a):
    """Largest root modulus of the characteristic polynomial."""
    roots = np.roots(characteristic_polynomial(a))
    return float(np.abs(roots).max()) if len(roots) else 0.0


def small_random_network(rng, n=None, k=None, **kwargs):
    n = n or int(rng.integers(2, 5))
    k = k or int(rng.integers(2, 7))
    return random_weak_network(n, k, seed=int(rng.integers(0, 2**31)), **kwargs)
