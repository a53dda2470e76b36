"""Regenerative simulation of the walk and exact lattice oracles.

Replications are partitioned into fixed-size batches of ``BATCH_SIZE``; batch
``b`` draws from the child stream ``SeedSequence(seed).spawn()[b]`` and rows
inside a batch consume disjoint slices of that stream.  The draw protocol
depends only on (seed, n) and the module constants, never on scheduling, so
estimates are bit-identical across runs and worker counts; batch results are
reduced in batch order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import DistributionSpec, sample_increments, validate_spec
from .errors import InvalidParameter, StepLimitExceeded

BATCH_SIZE = 8192       # replications per seed substream
CHUNK_STEPS = 128       # increments drawn per replication per round
STEP_CAP = 10**9        # per-replication safety cap


@dataclass(frozen=True)
class CycleStats:
    """One regenerative cycle: stop at the first passage below -z."""

    tau: int            # steps until S_k <= -z (tau >= 1)
    cycle_max: float    # max of S_1..S_tau (S_0 = 0 excluded)
    overshoot: float    # R_z = -z - S_tau >= 0


@dataclass(frozen=True)
class McEstimate:
    """Point estimate with a normal-approximation 95% interval."""

    p_hat: float
    stderr: float
    n: int
    seed: int
    ci95: tuple

    @classmethod
    def from_binomial(cls, successes: int, n: int, seed: int) -> "McEstimate":
        p = successes / n
        se = math.sqrt(p * (1.0 - p) / n)
        lo, hi = p - 1.96 * se, p + 1.96 * se
        return cls(p, se, n, seed, (max(lo, 0.0), min(hi, 1.0)))

    @classmethod
    def from_sums(cls, total: float, total_sq: float, n: int, seed: int) -> "McEstimate":
        mean = total / n
        var = max(total_sq / n - mean * mean, 0.0)
        se = math.sqrt(var / n)
        return cls(mean, se, n, seed, (mean - 1.96 * se, mean + 1.96 * se))

    def to_dict(self) -> dict:
        return {
            "p_hat": self.p_hat,
            "stderr": self.stderr,
            "n": self.n,
            "seed": self.seed,
            "ci95": list(self.ci95),
        }


def _batch_sizes(n: int):
    full, rem = divmod(n, BATCH_SIZE)
    return [BATCH_SIZE] * full + ([rem] if rem else [])


def _batch_rng(seed: int, index: int, n_batches: int) -> np.random.Generator:
    children = np.random.SeedSequence(seed).spawn(n_batches)
    return np.random.default_rng(children[index])


# ---------------------------------------------------------------------------
# Vectorized walkers
# ---------------------------------------------------------------------------


def _cycles_batch(spec, z, rng, n, step_cap):
    """Run n full cycles to the first passage below -z.

    Returns (tau, cycle_max, overshoot) arrays.  All replications in the
    batch advance in lockstep chunks; finished rows drop out.
    """
    s = np.zeros(n)
    tau = np.zeros(n, dtype=np.int64)
    cmax = np.full(n, -np.inf)
    over = np.zeros(n)
    active = np.arange(n)
    rounds = 0
    while active.size:
        rounds += 1
        if rounds * CHUNK_STEPS > step_cap:
            raise StepLimitExceeded(
                f"replication exceeded {step_cap} steps before reaching -z={-z}"
            )
        x = sample_increments(spec, rng, (active.size, CHUNK_STEPS))
        cs = s[active, None] + np.cumsum(x, axis=1)
        runmax = np.maximum.accumulate(cs, axis=1)
        below = cs <= -z
        hit = below.any(axis=1)
        rows = np.nonzero(hit)[0]
        if rows.size:
            col = below[rows].argmax(axis=1)
            g = active[rows]
            tau[g] += col + 1
            cmax[g] = np.maximum(cmax[g], runmax[rows, col])
            over[g] = -z - cs[rows, col]
        rows2 = np.nonzero(~hit)[0]
        g2 = active[rows2]
        tau[g2] += CHUNK_STEPS
        cmax[g2] = np.maximum(cmax[g2], runmax[rows2, -1])
        s[g2] = cs[rows2, -1]
        active = g2
    return tau, cmax, over


def _barrier_batch(spec, lower, upper, strict_upper, rng, n, step_cap):
    """First passage out of (lower, upper): True where the exit was upward.

    ``strict_upper`` selects S > upper versus S >= upper as the up-exit;
    the distinction only matters on lattice walks.
    """
    s = np.zeros(n)
    result = np.zeros(n, dtype=bool)
    active = np.arange(n)
    rounds = 0
    while active.size:
        rounds += 1
        if rounds * CHUNK_STEPS > step_cap:
            raise StepLimitExceeded(
                f"replication exceeded {step_cap} steps inside ({lower}, {upper})"
            )
        x = sample_increments(spec, rng, (active.size, CHUNK_STEPS))
        cs = s[active, None] + np.cumsum(x, axis=1)
        up = cs > upper if strict_upper else cs >= upper
        down = cs <= lower
        out = up | down
        hit = out.any(axis=1)
        rows = np.nonzero(hit)[0]
        if rows.size:
            col = out[rows].argmax(axis=1)
            result[active[rows]] = up[rows, col]
        keep = np.nonzero(~hit)[0]
        g2 = active[keep]
        s[g2] = cs[keep, -1]
        active = g2
    return result


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def simulate_cycle(
    spec: DistributionSpec, z: float, rng: np.random.Generator, step_cap: int = STEP_CAP
) -> CycleStats:
    """Simulate one regenerative cycle exactly, step by step."""
    if z <= 0:
        raise InvalidParameter(f"z must be positive, got {z}")
    validate_spec(spec)
    tau, cmax, over = _cycles_batch(spec, z, rng, 1, step_cap)
    return CycleStats(int(tau[0]), float(cmax[0]), float(over[0]))


def _map_batches(worker, ctx, n, seed, workers):
    sizes = _batch_sizes(n)
    args = [(i, sizes[i], len(sizes), seed, ctx) for i in range(len(sizes))]
    if workers > 1 and len(sizes) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, args))
    return [worker(a) for a in args]


# module-level workers so ProcessPoolExecutor can pickle them


def _mtau_worker(arg):
    i, size, n_batches, seed, (spec, z, x, step_cap) = arg
    rng = _batch_rng(seed, i, n_batches)
    hits = _barrier_batch(spec, -z, x, True, rng, size, step_cap)
    return int(hits.sum())


def _m_worker(arg):
    i, size, n_batches, seed, (spec, x, stop_margin, step_cap) = arg
    rng = _batch_rng(seed, i, n_batches)
    hits = _barrier_batch(spec, -(x + stop_margin), x, False, rng, size, step_cap)
    return int(hits.sum())


def _tau_worker(arg):
    i, size, n_batches, seed, (spec, z, step_cap) = arg
    rng = _batch_rng(seed, i, n_batches)
    tau, _, over = _cycles_batch(spec, z, rng, size, step_cap)
    return (
        float(tau.sum()),
        float(np.square(tau, dtype=float).sum()),
        float(over.sum()),
        float(np.square(over).sum()),
    )


def estimate_mtau_tail(
    spec: DistributionSpec,
    z: float,
    x: float,
    n: int,
    seed: int,
    workers: int = 1,
    step_cap: int = STEP_CAP,
) -> McEstimate:
    """Estimate P(M_tau > x): the walk strictly exceeds x before hitting -z."""
    if n < 1:
        raise InvalidParameter("n must be at least 1")
    if z <= 0:
        raise InvalidParameter(f"z must be positive, got {z}")
    validate_spec(spec)
    counts = _map_batches(_mtau_worker, (spec, z, x, step_cap), n, seed, workers)
    return McEstimate.from_binomial(sum(counts), n, seed)


def estimate_m_tail(
    spec: DistributionSpec,
    x: float,
    n: int,
    seed: int,
    stop_margin: Optional[float] = None,
    workers: int = 1,
    step_cap: int = STEP_CAP,
) -> McEstimate:
    """Estimate P(M >= x) for the global maximum.

    Each replication runs until S_k <= -(x + stop_margin) and records
    whether the walk reached x first.  The truncation bias is one-sided
    (downward) and shrinks with the margin; the default margin is 50/a.
    M >= S_0 = 0, so x <= 0 returns the exact value 1.
    """
    if n < 1:
        raise InvalidParameter("n must be at least 1")
    a = validate_spec(spec)
    if x <= 0:
        return McEstimate(1.0, 0.0, n, seed, (1.0, 1.0))
    if stop_margin is None:
        stop_margin = 50.0 / a
    if stop_margin <= 0:
        raise InvalidParameter(f"stop_margin must be positive, got {stop_margin}")
    counts = _map_batches(_m_worker, (spec, x, stop_margin, step_cap), n, seed, workers)
    return McEstimate.from_binomial(sum(counts), n, seed)


def estimate_tau_overshoot(
    spec: DistributionSpec,
    z: float,
    n: int,
    seed: int,
    workers: int = 1,
    step_cap: int = STEP_CAP,
) -> tuple:
    """Estimate (E[tau_z], E[R_z]) from n full cycles."""
    if n < 1:
        raise InvalidParameter("n must be at least 1")
    if z <= 0:
        raise InvalidParameter(f"z must be positive, got {z}")
    validate_spec(spec)
    parts = _map_batches(_tau_worker, (spec, z, step_cap), n, seed, workers)
    t1 = sum(p[0] for p in parts)
    t2 = sum(p[1] for p in parts)
    r1 = sum(p[2] for p in parts)
    r2 = sum(p[3] for p in parts)
    return (
        McEstimate.from_sums(t1, t2, n, seed),
        McEstimate.from_sums(r1, r2, n, seed),
    )


def wald_check(
    spec: DistributionSpec, z: float, n: int, seed: int, sigmas: float = 4.0
) -> dict:
    """Check a E[tau] = z + E[R] on per-cycle samples of d = a tau - R.

    Returns the discrepancy |mean(d) - z| against ``sigmas`` standard errors
    of d-bar; the per-cycle pairing keeps the tau/R correlation in the error.
    """
    a = validate_spec(spec)
    sizes = _batch_sizes(n)
    d1 = d2 = 0.0
    for i, size in enumerate(sizes):
        rng = _batch_rng(seed, i, len(sizes))
        tau, _, over = _cycles_batch(spec, z, rng, size, STEP_CAP)
        d = a * tau - over
        d1 += float(d.sum())
        d2 += float(np.square(d).sum())
    mean = d1 / n
    var = max(d2 / n - mean * mean, 0.0)
    se = math.sqrt(var / n)
    discrepancy = abs(mean - z)
    return {
        "mean_d": mean,
        "target_z": z,
        "stderr": se,
        "discrepancy": discrepancy,
        "passed": bool(discrepancy <= sigmas * se),
    }


# ---------------------------------------------------------------------------
# Exact lattice oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeOracle:
    """Exact first-passage quantities for the integer two-point walk."""

    mtau_tail: float   # P(M_tau_z > x)
    m_tail_geq: float  # P(M >= x)
    tau_mean: float    # E[tau_z]


def _lattice_hit_prob(p: float, z: int, x: int, u: int, d: int) -> float:
    """P(reach > x before <= -z) by solving the first-passage equations."""
    lo = -z - d + 1          # deepest reachable state before absorption below
    hi = x + u               # highest reachable state after an up-exit
    size = hi - lo + 1
    a_mat = np.zeros((size, size))
    b = np.zeros(size)
    q = 1.0 - p
    for s in range(lo, hi + 1):
        i = s - lo
        if s <= -z:
            a_mat[i, i] = 1.0
            b[i] = 0.0
        elif s >= x + 1:
            a_mat[i, i] = 1.0
            b[i] = 1.0
        else:
            a_mat[i, i] = 1.0
            a_mat[i, s + u - lo] -= p
            a_mat[i, s - d - lo] -= q
    h = np.linalg.solve(a_mat, b)
    return float(h[-lo])


def _lattice_tau_mean(p: float, z: int, u: int, d: int) -> float:
    """E[first passage below -z] via absorption-time solves on growing domains.

    The domain is cut at a ceiling N (treated as instant absorption, which
    underestimates) and doubled until the value is stable to 1e-12.
    """
    q = 1.0 - p
    drift = q * d - p * u
    n_top = max(int(64 / drift), 4 * z, 64)
    prev = -1.0
    for _ in range(40):
        lo = -z - d + 1
        hi = n_top
        size = hi - lo + 1
        a_mat = np.zeros((size, size))
        b = np.zeros(size)
        for s in range(lo, hi + 1):
            i = s - lo
            if s <= -z or s > n_top - u:
                a_mat[i, i] = 1.0
                b[i] = 0.0
            else:
                a_mat[i, i] = 1.0
                a_mat[i, s + u - lo] -= p
                a_mat[i, s - d - lo] -= q
                b[i] = 1.0
        g = np.linalg.solve(a_mat, b)
        val = float(g[-lo])
        if prev >= 0 and abs(val - prev) <= 1e-12 * max(val, 1.0):
            return val
        prev = val
        n_top *= 2
    return prev


def _lattice_m_geq(p: float, k: int, u: int, d: int) -> float:
    """P(M >= k) as the stable limit of deeper and deeper ruin barriers."""
    if k <= 0:
        return 1.0
    z = max(4 * k, 64)
    prev = -1.0
    for _ in range(40):
        val = _lattice_hit_prob(p, z, k - 1, u, d)
        if prev >= 0 and abs(val - prev) <= 1e-15:
            return val
        prev = val
        z *= 2
    return prev


def lattice_mtau_tail(p: float, z: int, x: int, u: int = 1, d: int = 1) -> float:
    """Exact P(M_tau_z > x) alone (first-passage linear solve)."""
    _check_lattice_args(p, z, x, u, d)
    return _lattice_hit_prob(p, int(z), int(x), int(u), int(d))


def lattice_m_geq(p: float, k: int, u: int = 1, d: int = 1) -> float:
    """Exact P(M >= k) alone (stabilized deep-barrier solves)."""
    _check_lattice_args(p, 1, max(int(k), 0), u, d)
    return _lattice_m_geq(p, int(k), int(u), int(d))


def lattice_tau_mean(p: float, z: int, u: int = 1, d: int = 1) -> float:
    """Exact E[tau_z] alone (stabilized absorption-time solves)."""
    _check_lattice_args(p, z, 0, u, d)
    return _lattice_tau_mean(p, int(z), int(u), int(d))


def _check_lattice_args(p, z, x, u, d):
    if not 0.0 < p < 1.0:
        raise InvalidParameter(f"p must be in (0,1), got {p}")
    if int(u) != u or int(d) != d or u < 1 or d < 1:
        raise InvalidParameter("u and d must be positive integers")
    if p * u >= (1.0 - p) * d:
        raise InvalidParameter("lattice oracle needs negative drift: p u < (1-p) d")
    if int(z) != z or z < 1:
        raise InvalidParameter(f"z must be a positive integer, got {z}")
    if int(x) != x or x < 0:
        raise InvalidParameter(f"x must be a nonnegative integer lattice level, got {x}")


def exact_lattice_oracle(
    p: float, z: int, x: int, u: int = 1, d: int = 1
) -> LatticeOracle:
    """Exact P(M_tau > x), P(M >= x) and E[tau_z] for the integer walk.

    All three come from linear solves of the first-passage equations, so
    they are independent of both the bound formulas and the simulator.
    """
    _check_lattice_args(p, z, x, u, d)
    u, d, z, x = int(u), int(d), int(z), int(x)
    return LatticeOracle(
        mtau_tail=_lattice_hit_prob(p, z, x, u, d),
        m_tail_geq=_lattice_m_geq(p, x, u, d),
        tau_mean=_lattice_tau_mean(p, z, u, d),
    )
