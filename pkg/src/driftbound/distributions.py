"""Increment laws for negative-drift random walks.

Four parametric families cover the regimes the bounds care about: a lattice
two-point law (exact oracles, bounded support), a shifted Pareto law
(regularly varying right tail, index r), a shifted exponential (light tail
with a Lundberg root) and a normal law.  Every family exposes exact right
tails, integrated tails, power moments, truncated moments and truncated
exponential moments; closed forms are used wherever they exist and adaptive
quadrature (relative tolerance 1e-10) elsewhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import integrate, special

from .errors import InvalidParameter, MomentDoesNotExist, NonNegativeDrift

QUAD_REL_TOL = 1e-10
MGF_REL_TOL = 1e-12
_QUAD_ABS_FLOOR = 1e-300

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def _quad(fn, lo, hi, rel_tol=QUAD_REL_TOL, points=None):
    kwargs = dict(epsabs=_QUAD_ABS_FLOOR, epsrel=rel_tol, limit=200)
    if points is not None and np.isfinite(lo) and np.isfinite(hi):
        kwargs["points"] = [p for p in points if lo < p < hi]
    val, _ = integrate.quad(fn, lo, hi, **kwargs)
    return val


def _phi(z):
    return np.exp(-0.5 * np.square(z)) / _SQRT2PI


def _ndtr(z):
    return special.ndtr(z)


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoPoint:
    """Lattice increment: +u with probability p, -d otherwise."""

    p: float
    u: float
    d: float

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise InvalidParameter(f"TwoPoint p must be in (0,1), got {self.p}")
        if self.u <= 0 or self.d <= 0:
            raise InvalidParameter("TwoPoint u and d must be positive")

    @property
    def q(self) -> float:
        return 1.0 - self.p

    def mean(self) -> float:
        return self.p * self.u - self.q * self.d

    def tail(self, v):
        v = np.asarray(v, dtype=float)
        out = np.where(v < self.u, self.p, 0.0)
        out = np.where(v < -self.d, 1.0, out)
        return out if out.ndim else float(out)

    def integrated_tail(self, x):
        x = np.asarray(x, dtype=float)
        mid = self.p * np.clip(self.u - x, 0.0, self.u + self.d)
        low = np.clip(-self.d - x, 0.0, None)
        out = mid + low
        return out if out.ndim else float(out)

    def abs_moment(self, t: float) -> float:
        return self.p * self.u**t + self.q * self.d**t

    def plus_moment(self, t: float) -> float:
        return self.p * self.u**t

    def minus_moment(self, t: float) -> float:
        return self.q * self.d**t

    def variance(self) -> float:
        return self.p * self.u**2 + self.q * self.d**2 - self.mean() ** 2

    def mgf(self, h: float) -> float:
        return self.p * math.exp(h * self.u) + self.q * math.exp(-h * self.d)

    def mgf_truncated(self, h: float, y: float) -> float:
        val = self.q * math.exp(-h * self.d)  # -d <= 0 < y always
        if self.u <= y:
            val += self.p * math.exp(h * self.u)
        return val

    def trunc_mean_t2(self, y):
        y = np.asarray(y, dtype=float)
        up = np.where(self.u <= y, self.p * self.u, 0.0)
        dn = np.where(self.d <= y, self.q * self.d, 0.0)
        return up - dn, np.where(self.u <= y, self.p * self.u**2, 0.0) + np.where(
            self.d <= y, self.q * self.d**2, 0.0
        )

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.where(rng.random(size) < self.p, self.u, -self.d)


@dataclass(frozen=True)
class ParetoShift:
    """X = X0 - shift with P(X0 > v) = (v/scale)^(-r) for v >= scale."""

    r: float
    scale: float
    shift: float

    def __post_init__(self):
        if self.r <= 1.0:
            raise InvalidParameter(f"ParetoShift r must exceed 1, got {self.r}")
        if self.scale <= 0:
            raise InvalidParameter("ParetoShift scale must be positive")

    @property
    def support_lo(self) -> float:
        return self.scale - self.shift

    def mean(self) -> float:
        return self.r * self.scale / (self.r - 1.0) - self.shift

    def _density0(self, v):
        # density of the unshifted Pareto variable X0 on [scale, inf)
        return self.r * self.scale**self.r * np.power(v, -self.r - 1.0)

    def _p0(self, lo, hi):
        # P(X0 in [lo, hi]) for scale <= lo <= hi (hi may be inf)
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        sr = float(self.scale) ** self.r
        hi_term = np.where(np.isinf(hi), 0.0, np.power(np.where(np.isinf(hi), 1.0, hi), -self.r))
        return sr * (np.power(lo, -self.r) - hi_term)

    def _m_k(self, lo, hi, k):
        # E[X0^k, X0 in [lo, hi]]
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        r, s = self.r, float(self.scale)
        if abs(k - r) < 1e-12:
            return r * s**r * (np.log(hi) - np.log(lo))
        e = k - r
        hi_term = np.where(
            np.isinf(hi), 0.0 if e < 0 else np.inf, np.power(np.where(np.isinf(hi), 1.0, hi), e)
        )
        return r * s**r * (hi_term - np.power(lo, e)) / e

    def tail(self, v):
        v = np.asarray(v, dtype=float)
        out = np.where(
            v >= self.support_lo,
            np.power(np.maximum(v + self.shift, self.scale) / self.scale, -self.r),
            1.0,
        )
        return out if out.ndim else float(out)

    def integrated_tail(self, x):
        x = np.asarray(x, dtype=float)
        s, c, r = self.scale, self.shift, self.r
        body = s**r * np.power(np.maximum(x + c, s), 1.0 - r) / (r - 1.0)
        out = np.where(x >= self.support_lo, body, (self.support_lo - x) + s / (r - 1.0))
        return out if out.ndim else float(out)

    def plus_moment(self, t: float) -> float:
        if t >= self.r:
            raise MomentDoesNotExist(
                f"E[X^{t}, X>0] is infinite for tail index r={self.r}"
            )
        # drift validation forces shift > scale, so X > 0 means X0 > shift
        c = self.shift
        return self.r * self.scale**self.r * c ** (t - self.r) * special.beta(
            self.r - t, t + 1.0
        )

    def minus_moment(self, t: float) -> float:
        c = self.shift
        if c <= self.scale:
            return 0.0
        return _quad(
            lambda v: (c - v) ** t * self._density0(v), self.scale, c
        )

    def abs_moment(self, t: float) -> float:
        return self.plus_moment(t) + self.minus_moment(t)

    def variance(self) -> Optional[float]:
        if self.r <= 2.0:
            return None
        m0 = self.r * self.scale / (self.r - 1.0)
        m2 = self.r * self.scale**2 / (self.r - 2.0)
        return m2 - m0**2

    def mgf(self, h: float) -> float:
        return 1.0 if h == 0.0 else math.inf

    def mgf_truncated(self, h: float, y: float) -> float:
        hi = y + self.shift
        if hi <= self.scale:
            return 0.0
        return _quad(
            lambda v: math.exp(h * (v - self.shift)) * self._density0(v),
            self.scale,
            hi,
            rel_tol=MGF_REL_TOL,
        )

    def trunc_mean_t2(self, y):
        # E[X, |X|<=y] and E[X^2, |X|<=y], vectorized in y
        y = np.asarray(y, dtype=float)
        c = self.shift
        lo = np.maximum(self.scale, c - y)
        hi = c + y
        p0 = self._p0(lo, hi)
        m1 = self._m_k(lo, hi, 1.0)
        m2 = self._m_k(lo, hi, 2.0)
        mean = m1 - c * p0
        sq = m2 - 2.0 * c * m1 + c * c * p0
        return mean, sq

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        u = 1.0 - rng.random(size)  # in (0, 1]
        return self.scale * np.power(u, -1.0 / self.r) - self.shift


@dataclass(frozen=True)
class ExponentialShift:
    """X = E - shift with E exponential(rate)."""

    rate: float
    shift: float

    def __post_init__(self):
        if self.rate <= 0:
            raise InvalidParameter("ExponentialShift rate must be positive")

    def mean(self) -> float:
        return 1.0 / self.rate - self.shift

    def tail(self, v):
        v = np.asarray(v, dtype=float)
        out = np.where(v >= -self.shift, np.exp(-self.rate * (v + self.shift)), 1.0)
        return out if out.ndim else float(out)

    def integrated_tail(self, x):
        x = np.asarray(x, dtype=float)
        lam, c = self.rate, self.shift
        body = np.exp(-lam * (np.maximum(x, -c) + c)) / lam
        out = np.where(x >= -c, body, (-c - x) + 1.0 / lam)
        return out if out.ndim else float(out)

    def _e_pieces(self, lo, hi):
        # P, E[E], E[E^2] of the exponential over [lo, hi]
        lam = self.rate

        def at(e):
            w = np.exp(-lam * e)
            return w, (e + 1.0 / lam) * w, (e * e + 2.0 * e / lam + 2.0 / lam**2) * w

        p_lo, e1_lo, e2_lo = at(lo)
        p_hi, e1_hi, e2_hi = at(hi)
        return p_lo - p_hi, e1_lo - e1_hi, e2_lo - e2_hi

    def plus_moment(self, t: float) -> float:
        lam, c = self.rate, self.shift
        return math.exp(-lam * c) * special.gamma(t + 1.0) / lam**t

    def minus_moment(self, t: float) -> float:
        lam, c = self.rate, self.shift
        if c <= 0:
            return 0.0
        return _quad(lambda e: (c - e) ** t * lam * math.exp(-lam * e), 0.0, c)

    def abs_moment(self, t: float) -> float:
        return self.plus_moment(t) + self.minus_moment(t)

    def variance(self) -> float:
        return 1.0 / self.rate**2

    def mgf(self, h: float) -> float:
        lam = self.rate
        if h >= lam:
            return math.inf
        return lam * math.exp(-h * self.shift) / (lam - h)

    def mgf_truncated(self, h: float, y: float) -> float:
        lam, c = self.rate, self.shift
        hi = y + c
        if hi <= 0:
            return 0.0
        if abs(h - lam) < 1e-14 * lam:
            integral = lam * hi
        else:
            integral = lam * math.expm1((h - lam) * hi) / (h - lam)
        return math.exp(-h * c) * integral

    def trunc_mean_t2(self, y):
        y = np.asarray(y, dtype=float)
        c = self.shift
        lo = np.maximum(0.0, c - y)
        hi = c + y
        p0, e1, e2 = self._e_pieces(lo, hi)
        return e1 - c * p0, e2 - 2.0 * c * e1 + c * c * p0

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.exponential(1.0 / self.rate, size) - self.shift


@dataclass(frozen=True)
class Normal:
    """Gaussian increment with mean mu < 0."""

    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise InvalidParameter("Normal sigma must be positive")

    def mean(self) -> float:
        return self.mu

    def tail(self, v):
        v = np.asarray(v, dtype=float)
        out = _ndtr(-(v - self.mu) / self.sigma)
        return out if out.ndim else float(out)

    def integrated_tail(self, x):
        # E[(X - x)^+] = sigma * (phi(alpha) - alpha * Qbar(alpha))
        x = np.asarray(x, dtype=float)
        alpha = (x - self.mu) / self.sigma
        out = self.sigma * (_phi(alpha) - alpha * _ndtr(-alpha))
        return out if out.ndim else float(out)

    def _pdf(self, v):
        return _phi((v - self.mu) / self.sigma) / self.sigma

    def plus_moment(self, t: float) -> float:
        return _quad(lambda v: v**t * self._pdf(v), 0.0, np.inf)

    def minus_moment(self, t: float) -> float:
        return _quad(lambda v: (-v) ** t * self._pdf(v), -np.inf, 0.0)

    def abs_moment(self, t: float) -> float:
        return self.plus_moment(t) + self.minus_moment(t)

    def variance(self) -> float:
        return self.sigma**2

    def mgf(self, h: float) -> float:
        return math.exp(h * self.mu + 0.5 * h * h * self.sigma**2)

    def mgf_truncated(self, h: float, y: float) -> float:
        z = (y - self.mu) / self.sigma - h * self.sigma
        return self.mgf(h) * float(_ndtr(z))

    def _moments_between(self, lo, hi):
        mu, sig = self.mu, self.sigma
        zl = np.asarray((lo - mu) / sig, dtype=float)
        zh = np.asarray((hi - mu) / sig, dtype=float)
        p0 = _ndtr(zh) - _ndtr(zl)
        phl, phh = _phi(zl), _phi(zh)
        # z * phi(z) -> 0 at infinite endpoints; avoid inf * 0
        zphl = np.where(np.isfinite(zl), zl, 0.0) * phl
        zphh = np.where(np.isfinite(zh), zh, 0.0) * phh
        e1 = mu * p0 + sig * (phl - phh)
        e2 = (mu * mu + sig * sig) * p0 + 2 * mu * sig * (phl - phh) + sig * sig * (
            zphl - zphh
        )
        return p0, e1, e2

    def trunc_mean_t2(self, y):
        y = np.asarray(y, dtype=float)
        _, e1, e2 = self._moments_between(-y, y)
        return e1, e2

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.normal(self.mu, self.sigma, size)


DistributionSpec = Union[TwoPoint, ParetoShift, ExponentialShift, Normal]

_FAMILY_TAGS = {
    TwoPoint: "two_point",
    ParetoShift: "pareto_shift",
    ExponentialShift: "exponential_shift",
    Normal: "normal",
}
_TAG_FAMILIES = {v: k for k, v in _FAMILY_TAGS.items()}


# ---------------------------------------------------------------------------
# Moment containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentProfile:
    """Full moments of the increment law at order t.

    ``var`` is None when the law has no second moment; callers that need a
    variance must treat None as "infinite" explicitly.
    """

    t: float
    a: float
    a_t: float
    a_t_plus: float
    a_t_minus: float
    var: Optional[float]

    @property
    def var_is_finite(self) -> bool:
        return self.var is not None


@dataclass(frozen=True)
class TruncatedMoments:
    """Level-y truncated moments used by the sharpened (truncated) bounds."""

    y: float
    t: float
    mean_trunc: float       # E[X, |X| <= y]
    a_t_trunc: float        # E[|X|^t, |X| <= y]
    a_t_plus_trunc: float   # E[X^t, X in (0, y]]
    b2: float               # E[X^2, X <= y]
    tail_y: float           # P(X > y)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def validate_spec(spec: DistributionSpec) -> float:
    """Check parameters and negative drift; return a = -E[X] > 0."""
    if not isinstance(spec, tuple(_FAMILY_TAGS)):
        raise InvalidParameter(f"unknown distribution spec {spec!r}")
    m = spec.mean()
    if not m < 0.0:
        raise NonNegativeDrift(f"E[X] = {m:.6g} must be negative")
    return -m


def tail(spec: DistributionSpec, v):
    """P(X > v), exact per family; accepts scalars or arrays."""
    return spec.tail(v)


def integrated_tail(spec: DistributionSpec, x):
    """G(x) = integral of P(X > u) for u from x to infinity."""
    return spec.integrated_tail(x)


def moment_profile(spec: DistributionSpec, t: float) -> MomentProfile:
    """Populate drift, absolute/one-sided t-th moments and the variance."""
    if t <= 1.0:
        raise InvalidParameter(f"moment order t must exceed 1, got {t}")
    a = validate_spec(spec)
    plus = spec.plus_moment(t)
    minus = spec.minus_moment(t)
    return MomentProfile(
        t=t, a=a, a_t=plus + minus, a_t_plus=plus, a_t_minus=minus,
        var=spec.variance(),
    )


def truncated_moments(spec: DistributionSpec, y: float, t: float) -> TruncatedMoments:
    """Truncated moments at level y.

    All quantities are finite for every family: truncation removes the heavy
    tail, so this path works even when the full t-th moment does not exist.
    """
    if y <= 0:
        raise InvalidParameter(f"truncation level y must be positive, got {y}")
    if t <= 1.0:
        raise InvalidParameter(f"moment order t must exceed 1, got {t}")
    validate_spec(spec)
    mean_tr, sq_tr = spec.trunc_mean_t2(y)
    mean_tr = float(mean_tr)
    if abs(t - 2.0) < 1e-12:
        a_t_tr = float(sq_tr)
        a_t_plus_tr = _plus_trunc(spec, y, 2.0)
    else:
        a_t_tr = _abs_trunc(spec, y, t)
        a_t_plus_tr = _plus_trunc(spec, y, t)
    return TruncatedMoments(
        y=y, t=t,
        mean_trunc=mean_tr,
        a_t_trunc=a_t_tr,
        a_t_plus_trunc=a_t_plus_tr,
        b2=_b2(spec, y),
        tail_y=float(spec.tail(y)),
    )


def _abs_trunc(spec, y, t):
    if isinstance(spec, TwoPoint):
        val = 0.0
        if spec.u <= y:
            val += spec.p * spec.u**t
        if spec.d <= y:
            val += spec.q * spec.d**t
        return val
    if isinstance(spec, ParetoShift):
        c = spec.shift
        lo = max(spec.scale, c - y)
        hi = c + y
        left = _quad(lambda v: (c - v) ** t * spec._density0(v), lo, min(c, hi))
        right = _quad(lambda v: (v - c) ** t * spec._density0(v), max(lo, c), hi)
        return left + right
    if isinstance(spec, ExponentialShift):
        lam, c = spec.rate, spec.shift
        lo = max(0.0, c - y)
        hi = c + y
        return _quad(
            lambda e: abs(e - c) ** t * lam * math.exp(-lam * e), lo, hi, points=(c,)
        )
    return _quad(lambda v: abs(v) ** t * spec._pdf(v), -y, y, points=(0.0,))


def _plus_trunc(spec, y, t):
    if isinstance(spec, TwoPoint):
        return spec.p * spec.u**t if spec.u <= y else 0.0
    if isinstance(spec, ParetoShift):
        c = spec.shift
        return _quad(lambda v: (v - c) ** t * spec._density0(v), c, c + y)
    if isinstance(spec, ExponentialShift):
        lam, c = spec.rate, spec.shift
        return (
            math.exp(-lam * c)
            * special.gamma(t + 1.0)
            * special.gammainc(t + 1.0, lam * y)
            / lam**t
        )
    return _quad(lambda v: v**t * spec._pdf(v), 0.0, y)


def _b2(spec, y):
    # E[X^2, X <= y]
    if isinstance(spec, TwoPoint):
        val = spec.q * spec.d**2
        if spec.u <= y:
            val += spec.p * spec.u**2
        return val
    if isinstance(spec, ParetoShift):
        c = spec.shift
        lo, hi = spec.scale, c + y
        p0 = spec._p0(lo, hi)
        m1 = spec._m_k(lo, hi, 1.0)
        m2 = spec._m_k(lo, hi, 2.0)
        return float(m2 - 2 * c * m1 + c * c * p0)
    if isinstance(spec, ExponentialShift):
        c = spec.shift
        p0, e1, e2 = spec._e_pieces(0.0, c + y)
        return float(e2 - 2 * c * e1 + c * c * p0)
    _, _, e2 = spec._moments_between(-np.inf, y)
    return float(e2)


def mgf_truncated(spec: DistributionSpec, h: float, y: float) -> float:
    """E[exp(hX), X <= y]; the certificate quantity for candidate rates."""
    if h < 0:
        raise InvalidParameter(f"rate h must be nonnegative, got {h}")
    if y <= 0:
        raise InvalidParameter(f"truncation level y must be positive, got {y}")
    return float(spec.mgf_truncated(h, y))


def mgf(spec: DistributionSpec, h: float) -> float:
    """E[exp(hX)]; returns inf when the exponential moment diverges."""
    return float(spec.mgf(h))


def sample_increments(spec: DistributionSpec, rng: np.random.Generator, size):
    """Draw iid increments from the law (vectorized)."""
    return spec.sample(rng, size)


# ---------------------------------------------------------------------------
# JSON serialization: {"family": ..., "params": {...}}
# ---------------------------------------------------------------------------


def spec_to_dict(spec: DistributionSpec) -> dict:
    tag = _FAMILY_TAGS[type(spec)]
    return {"family": tag, "params": dict(spec.__dict__)}


def spec_from_dict(obj: dict) -> DistributionSpec:
    try:
        family = obj["family"]
        params = obj["params"]
    except (KeyError, TypeError) as exc:
        raise InvalidParameter(f"malformed distribution object: {obj!r}") from exc
    cls = _TAG_FAMILIES.get(family)
    if cls is None:
        raise InvalidParameter(f"unknown distribution family {family!r}")
    try:
        return cls(**params)
    except TypeError as exc:
        raise InvalidParameter(f"bad parameters for {family}: {params!r}") from exc


def spec_to_json(spec: DistributionSpec) -> str:
    return json.dumps(spec_to_dict(spec), sort_keys=True)


def spec_from_json(text: str) -> DistributionSpec:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidParameter(f"invalid distribution JSON: {exc}") from exc
    return spec_from_dict(obj)
