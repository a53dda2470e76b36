"""Closed-form tail inequalities for the stopped and global maxima.

Everything here is a pure function of an increment law and a
:class:`BoundInputs` record.  Each bound returns a :class:`BoundResult`
carrying the raw value, a [0,1]-clamped copy, the exponential rate and the
named intermediate terms, plus the full precondition record, so a run can be
audited against the inequality it claims to instantiate.

Powers like A_t^(x/y) are evaluated in log space: x/y reaches 10^3 in sweeps
and the direct form overflows long before the bound itself is degenerate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate

from . import distributions as dist
from .distributions import (
    DistributionSpec,
    MomentProfile,
    TruncatedMoments,
    mgf_truncated,
    moment_profile,
    truncated_moments,
)
from .errors import (
    InfiniteVariance,
    InvalidOrder,
    InvalidParameter,
    MomentDoesNotExist,
    RateNotCertified,
    ValidityViolation,
)

E_MINUS_1 = math.e - 1.0
RATE_CERT_TOL = 1e-12


# ---------------------------------------------------------------------------
# Result plumbing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidityCheck:
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass(frozen=True)
class BoundResult:
    """A computed inequality value with its audit trail."""

    value: float
    regime: str
    terms: dict
    validity: tuple

    @property
    def value_clamped(self) -> float:
        return min(self.value, 1.0)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.validity)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "value_clamped": self.value_clamped,
            "regime": self.regime,
            "terms": dict(self.terms),
            "validity": [c.to_dict() for c in self.validity],
        }


@dataclass(frozen=True)
class NotApplicable:
    """Returned (not raised) when an inequality has no instance for this law."""

    reason: str


@dataclass(frozen=True)
class BoundInputs:
    """Shared argument record for the bound operations.

    ``y`` is the truncation level used by the stopped-maximum bounds;
    ``theta`` in (0,1) replaces it for the global-maximum bounds, which
    truncate at theta*(x + j*z) internally.  ``alpha`` only matters on the
    variance-split path (order t > 2).
    """

    x: float
    z: float
    t: float
    tau_mean_ub: float
    y: Optional[float] = None
    theta: Optional[float] = None
    alpha: float = 0.5
    use_truncated: bool = False

    def __post_init__(self):
        if self.x <= 0:
            raise InvalidParameter(f"x must be positive, got {self.x}")
        if self.z <= 0:
            raise InvalidParameter(f"z must be positive, got {self.z}")
        if self.t <= 1:
            raise InvalidParameter(f"moment order t must exceed 1, got {self.t}")
        if self.tau_mean_ub <= 0:
            raise InvalidParameter("tau_mean_ub must be positive")
        if self.y is not None and self.y <= 0:
            raise InvalidParameter(f"y must be positive, got {self.y}")
        if self.theta is not None and not 0 < self.theta < 1:
            raise InvalidParameter(f"theta must lie in (0,1), got {self.theta}")
        if not 0 < self.alpha < 1:
            raise InvalidParameter(f"alpha must lie in (0,1), got {self.alpha}")

    @property
    def beta(self) -> float:
        return 1.0 - self.alpha


def _require(checks, strict=True):
    failed = [c for c in checks if not c.passed]
    if failed and strict:
        raise ValidityViolation(
            "; ".join(f"{c.name}: {c.detail}" for c in failed), checks
        )
    return not failed


def _log1p_exp(log_u: float) -> float:
    # log(1 + u) from log(u), stable for u anywhere in (0, 1e300)
    return float(np.logaddexp(0.0, log_u))


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------


def rate_t1(moments: Union[MomentProfile, TruncatedMoments], y: float) -> float:
    """Exponential rate h0 for the order-t truncated-mgf certificate.

    Full-moment path: h0 = log(1 + a y^(t-1) / A_t) / y, valid once
    y^(t-1) >= (e-1) A_t / a.  Truncated path: the same formula with the
    drift and moment replaced by their level-y truncations, valid whenever
    the truncated mean is negative.
    """
    if y <= 0:
        raise InvalidParameter(f"y must be positive, got {y}")
    if isinstance(moments, TruncatedMoments):
        if moments.y != y:
            raise InvalidParameter(
                f"truncated moments were taken at y={moments.y}, rate requested at y={y}"
            )
        checks = (_check_trunc_mean(moments),)
        _require(checks)
        a_eff, big_a = -moments.mean_trunc, moments.a_t_trunc
        t = moments.t
    else:
        checks = (_check_t1_threshold(moments, y),)
        _require(checks)
        a_eff, big_a = moments.a, moments.a_t
        t = moments.t
    return _log1p_exp(math.log(a_eff) + (t - 1.0) * math.log(y) - math.log(big_a)) / y


def _check_t1_threshold(profile: MomentProfile, y: float) -> ValidityCheck:
    thr = E_MINUS_1 * profile.a_t / profile.a
    lhs = y ** (profile.t - 1.0)
    return ValidityCheck(
        "y^(t-1) >= (e-1) A_t / a",
        lhs >= thr,
        f"y^(t-1)={lhs:.6g} vs threshold {thr:.6g}",
    )


def _check_trunc_mean(tm: TruncatedMoments) -> ValidityCheck:
    return ValidityCheck(
        "E[X, |X|<=y] < 0",
        tm.mean_trunc < 0,
        f"truncated mean {tm.mean_trunc:.6g}",
    )


def rates_t2(
    profile: MomentProfile,
    y: float,
    alpha: float,
    trunc: Optional[TruncatedMoments] = None,
) -> tuple:
    """Rates (h1, h2) of the variance/positive-part split, plus the regime.

    h1 solves the quadratic branch, h2 minimizes the positive-part branch;
    regime "i" applies when h1 <= h2, otherwise "ii".  When ``trunc`` is
    given, Var(X) and E[X^t, X>0] are replaced by E[X^2, X<=y] and
    E[X^t, X in (0,y]].
    """
    if profile.t <= 2:
        raise InvalidOrder(f"variance-split rates need t > 2, got t={profile.t}")
    if y <= 0:
        raise InvalidParameter(f"y must be positive, got {y}")
    if not 0 < alpha < 1:
        raise InvalidParameter(f"alpha must lie in (0,1), got {alpha}")
    if trunc is not None:
        var, a_plus = trunc.b2, trunc.a_t_plus_trunc
    else:
        if not profile.var_is_finite:
            raise InfiniteVariance("Var(X) is infinite; the t>2 split does not apply")
        var, a_plus = profile.var, profile.a_t_plus
    if not math.isfinite(a_plus):
        raise MomentDoesNotExist("E[X^t, X>0] must be finite for the t>2 split")
    beta = 1.0 - alpha
    a = profile.a
    h1 = 2.0 * alpha * a / (math.exp(profile.t) * var)
    h2 = (
        _log1p_exp(
            math.log(beta) + math.log(a) + (profile.t - 1.0) * math.log(y) - math.log(a_plus)
        )
        / y
    )
    regime = "i" if h1 <= h2 else "ii"
    return h1, h2, regime


# ---------------------------------------------------------------------------
# Stopped-maximum bounds
# ---------------------------------------------------------------------------


def lemma1_bound(
    h: float,
    x: float,
    y: float,
    tau_mean_ub: float,
    a: float,
    tail_y: float,
    spec: Optional[DistributionSpec] = None,
) -> BoundResult:
    """Supermartingale bound on P(M_tau > x) at an admissible rate h.

    The caller must certify E[exp(hX), X <= y] <= 1; pass ``spec`` to have
    the certificate re-checked here (raises RateNotCertified on failure).
    """
    if h <= 0:
        raise InvalidParameter(f"rate h must be positive, got {h}")
    if x <= 0:
        raise InvalidParameter(f"x must be positive, got {x}")
    checks = []
    if spec is not None:
        m = mgf_truncated(spec, h, y)
        certified = m <= 1.0 + RATE_CERT_TOL
        checks.append(
            ValidityCheck("E[e^(hX), X<=y] <= 1", certified, f"mgf={m:.15g}")
        )
        if not certified:
            raise RateNotCertified(f"E[e^(hX), X<=y] = {m:.15g} > 1 at h={h:.6g}")
    denom = math.expm1(h * x)
    first = tau_mean_ub * a * h / denom
    tail_term = (1.0 + 1.0 / denom) * tau_mean_ub * tail_y
    return BoundResult(
        value=first + tail_term,
        regime="lemma1",
        terms={"h": h, "first_term": first, "tail_term": tail_term},
        validity=tuple(checks),
    )


def _t1_body(a_eff, big_a, t, x, y, tau, tail_y, log_beta=0.0):
    """Shared algebra of the order-t stopped-maximum bound.

    With log_beta = log(1) this is the order-t inequality; with
    log_beta = log(beta) and big_a = E[X^t, X>0] it is the t>2 regime-ii
    form (A_{t,+}/beta replaces A_t throughout).
    """
    k = x / y
    log_a = math.log(a_eff)
    log_big = math.log(big_a) - log_beta
    log_y = math.log(y)
    log_u = log_a + (t - 1.0) * log_y - log_big
    log1p_u = _log1p_exp(log_u)  # log(1 + u) > 0
    h = log1p_u / y
    first = math.exp(
        k * (log_big - log_a) + log_a - (1.0 + (t - 1.0) * k) * log_y + math.log(log1p_u)
    ) * tau
    coef_excess_log = k * (log_big - log_a) - (t - 1.0) * k * log_y
    if tail_y > 0.0:
        tail_term = tau * tail_y * (1.0 + math.exp(min(coef_excess_log, 700.0)))
    else:
        tail_term = 0.0
    return h, first, tail_term, coef_excess_log


def bound_mtau_t1(
    spec: DistributionSpec, inputs: BoundInputs, strict: bool = True
) -> BoundResult:
    """Order-t (1 < t <= 2) bound on P(M_tau > x) with truncation level y.

    The truncated variant replaces the drift and A_t by their level-y
    truncations everywhere and only needs the truncated mean to be negative.
    """
    if inputs.y is None:
        raise InvalidParameter("bound_mtau_t1 needs inputs.y")
    x, y, t, tau = inputs.x, inputs.y, inputs.t, inputs.tau_mean_ub
    checks = [
        ValidityCheck("t in (1, 2]", 1.0 < t <= 2.0, f"t={t}"),
        ValidityCheck("x >= y", x >= y, f"x={x}, y={y}"),
    ]
    tail_y = float(dist.tail(spec, y))
    if inputs.use_truncated:
        tm = truncated_moments(spec, y, t)
        checks.append(_check_trunc_mean(tm))
        ok = _require(checks, strict)
        if not ok:
            return BoundResult(math.nan, "T1", {}, tuple(checks))
        a_eff, big_a = -tm.mean_trunc, tm.a_t_trunc
    else:
        profile = moment_profile(spec, t)
        checks.append(_check_t1_threshold(profile, y))
        ok = _require(checks, strict)
        if not ok:
            return BoundResult(math.nan, "T1", {}, tuple(checks))
        a_eff, big_a = profile.a, profile.a_t
    h, first, tail_term, _ = _t1_body(a_eff, big_a, t, x, y, tau, tail_y)
    return BoundResult(
        value=first + tail_term,
        regime="T1",
        terms={"h": h, "first_term": first, "tail_term": tail_term, "tail_y": tail_y},
        validity=tuple(checks),
    )


def bound_mtau_t2(
    spec: DistributionSpec, inputs: BoundInputs, strict: bool = True
) -> BoundResult:
    """Order t > 2 bound on P(M_tau > x); regime picked by the rate ordering.

    Regime i applies the supermartingale bound at the variance rate h1;
    regime ii mirrors the order-t bound with A_{t,+}/beta in place of A_t.
    The truncated variant substitutes E[X^2, X<=y] and E[X^t, X in (0,y]].
    """
    if inputs.y is None:
        raise InvalidParameter("bound_mtau_t2 needs inputs.y")
    x, y, t, tau, alpha = inputs.x, inputs.y, inputs.t, inputs.tau_mean_ub, inputs.alpha
    if t <= 2:
        raise InvalidOrder(f"bound_mtau_t2 needs t > 2, got t={t}")
    profile = moment_profile(spec, t)
    trunc = truncated_moments(spec, y, t) if inputs.use_truncated else None
    h1, h2, regime = rates_t2(profile, y, alpha, trunc)
    tail_y = float(dist.tail(spec, y))
    checks = []
    if regime == "i":
        denom = math.expm1(h1 * x)
        first = profile.a * h1 * tau / denom
        tail_term = (1.0 + 1.0 / denom) * tau * tail_y
        h = h1
    else:
        checks.append(
            ValidityCheck("x >= y (regime ii power inequality)", x >= y, f"x={x}, y={y}")
        )
        if not _require(checks, strict):
            return BoundResult(math.nan, "T2ii", {}, tuple(checks))
        var, a_plus = (
            (trunc.b2, trunc.a_t_plus_trunc) if trunc is not None else (profile.var, profile.a_t_plus)
        )
        h, first, tail_term, _ = _t1_body(
            profile.a, a_plus, t, x, y, tau, tail_y, log_beta=math.log(inputs.beta)
        )
    return BoundResult(
        value=first + tail_term,
        regime=f"T2{regime}",
        terms={
            "h": h,
            "h1": h1,
            "h2": h2,
            "first_term": first,
            "tail_term": tail_term,
            "tail_y": tail_y,
        },
        validity=tuple(checks),
    )


# ---------------------------------------------------------------------------
# Overshoot and expected stopping time
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Lorden:
    """E[R_z] <= E[(X^-)^2] / a."""


@dataclass(frozen=True)
class Mogulskii:
    """E[R_z] <= A * (3/2) * E|X|^3 / E[X^2], with the guaranteed A <= 2."""

    A: float = 2.0

    def __post_init__(self):
        if not 0 < self.A <= 2.0:
            raise InvalidParameter(f"Mogulskii constant A must be in (0, 2], got {self.A}")


@dataclass(frozen=True)
class Prop1:
    """Order-t overshoot bound needing only E[(X^-)^t], t in (1, 2]."""

    t: float = 2.0

    def __post_init__(self):
        if not 1.0 < self.t <= 2.0:
            raise InvalidParameter(f"Prop1 order t must be in (1, 2], got {self.t}")


OvershootMethod = Union[Lorden, Mogulskii, Prop1]


def overshoot_ub(spec: DistributionSpec, z: float, method: OvershootMethod) -> float:
    """Upper bound on the expected overshoot E[R_z] below level -z."""
    a = dist.validate_spec(spec)
    if isinstance(method, Lorden):
        return spec.minus_moment(2.0) / a
    if isinstance(method, Mogulskii):
        third = spec.abs_moment(3.0)  # raises MomentDoesNotExist for heavy tails
        second = spec.abs_moment(2.0)
        return method.A * 1.5 * third / second
    if isinstance(method, Prop1):
        if z <= 0:
            raise InvalidParameter("Prop1 overshoot bound needs z > 0")
        t = method.t
        a_minus = spec.minus_moment(t)
        lead = t ** (t / (t - 1.0)) * a_minus ** (1.0 / (t - 1.0)) / (
            (t - 1.0) * a ** (t / (t - 1.0))
        )
        return lead * (spec.minus_moment(1.0) + z ** (2.0 - t) * a_minus / t)
    raise InvalidParameter(f"unknown overshoot method {method!r}")


def tau_mean_ub(spec: DistributionSpec, z: float, method: OvershootMethod) -> float:
    """Wald upper bound (z + E[R_z]-bound) / a on the mean passage time."""
    if z <= 0:
        raise InvalidParameter(f"z must be positive, got {z}")
    a = dist.validate_spec(spec)
    return (z + overshoot_ub(spec, z, method)) / a


# ---------------------------------------------------------------------------
# Global-maximum bounds
# ---------------------------------------------------------------------------


def _t3_common_checks(x, z, t, theta):
    return ValidityCheck(
        "x >= z (t-1) / theta", x >= z * (t - 1.0) / theta, f"x={x}, z(t-1)/theta={z*(t-1.0)/theta:.6g}"
    )


def bound_max_t3(
    spec: DistributionSpec, inputs: BoundInputs, strict: bool = True
) -> BoundResult:
    """Closed-form bound on P(M > x) with truncation at theta*x.

    Case (i) covers orders t in (1,2]; case (ii) covers t > 2 with finite
    variance.  The case (i) admissibility threshold uses the (e-1) constant
    from the theorem statement, which is stricter than the (e^theta - 1)
    constant the summation argument needs; both checks are recorded.
    """
    if inputs.theta is None:
        raise InvalidParameter("bound_max_t3 needs inputs.theta")
    x, z, t, theta, tau = inputs.x, inputs.z, inputs.t, inputs.theta, inputs.tau_mean_ub
    log_theta = math.log(theta)
    log_x = math.log(x)
    tail_theta_x = float(dist.tail(spec, theta * x))
    g_theta_x = float(dist.integrated_tail(spec, theta * x))
    tail_block = g_theta_x / (theta * z) + tail_theta_x

    if t <= 2.0:
        profile = moment_profile(spec, t)
        a, big_a = profile.a, profile.a_t
        thr_strict = theta ** (1.0 - t) * E_MINUS_1 * big_a / a
        thr_proof = theta ** (1.0 - t) * math.expm1(theta) * big_a / a
        lhs = x ** (t - 1.0)
        checks = [
            ValidityCheck(
                "x^(t-1) >= theta^(1-t) (e-1) A_t / a",
                lhs >= thr_strict,
                f"x^(t-1)={lhs:.6g} vs {thr_strict:.6g}",
            ),
            ValidityCheck(
                "x^(t-1) >= theta^(1-t) (e^theta - 1) A_t / a (summation step)",
                lhs >= thr_proof,
                f"x^(t-1)={lhs:.6g} vs {thr_proof:.6g}",
            ),
            _t3_common_checks(x, z, t, theta),
        ]
        if not _require(checks, strict):
            return BoundResult(math.nan, "T3i", {}, tuple(checks))
        log_big, log_a = math.log(big_a), math.log(a)
        regime = "T3i"
        log_beta = 0.0
    else:
        profile = moment_profile(spec, t)
        if not profile.var_is_finite:
            raise InfiniteVariance("case (ii) needs Var(X) < infinity")
        a, big_a = profile.a, profile.a_t_plus
        beta = inputs.beta
        h1, h2, regime12 = rates_t2(profile, theta * x, inputs.alpha)
        thr = theta ** (1.0 - t) * math.expm1(theta) * big_a / (beta * a)
        lhs = x ** (t - 1.0)
        checks = [
            ValidityCheck(
                "rate ordering h2 <= h1 at y = theta x",
                regime12 == "ii",
                f"h1={h1:.6g}, h2={h2:.6g}",
            ),
            ValidityCheck(
                "x^(t-1) >= theta^(1-t) (e^theta - 1) A_t+ / (beta a)",
                lhs >= thr,
                f"x^(t-1)={lhs:.6g} vs {thr:.6g}",
            ),
            _t3_common_checks(x, z, t, theta),
        ]
        if not _require(checks, strict):
            return BoundResult(math.nan, "T3ii", {}, tuple(checks))
        log_big, log_a = math.log(big_a) - math.log(beta), math.log(a)
        regime = "T3ii"
        log_beta = math.log(beta)

    # log c = log 3 + (1/theta) log A - ((t-1)/theta) log theta
    #         - log(t-1) - (1/theta - 1) log a        [A = A_t or A_t+/beta]
    log_c = (
        math.log(3.0)
        + log_big / theta
        - (t - 1.0) / theta * log_theta
        - math.log(t - 1.0)
        - (1.0 / theta - 1.0) * log_a
    )
    log_u = log_a + (t - 1.0) * (log_theta + log_x) - log_big
    log1p_u = _log1p_exp(log_u)
    first = math.exp(
        log_c + math.log(tau / z) + math.log(log1p_u) - (t - 1.0) / theta * log_x
    )
    coef_excess_log = (log_big - log_a - (t - 1.0) * (log_theta + log_x)) / theta
    if tail_block > 0.0:
        tail_term = tau * tail_block * (1.0 + math.exp(min(coef_excess_log, 700.0)))
    else:
        tail_term = 0.0
    return BoundResult(
        value=first + tail_term,
        regime=regime,
        terms={
            "c_const": math.exp(log_c),
            "first_term": first,
            "tail_term": tail_term,
            "integrated_tail_at_theta_x": g_theta_x,
            "tail_at_theta_x": tail_theta_x,
        },
        validity=tuple(checks),
    )


# ---------------------------------------------------------------------------
# Term-wise series bound
# ---------------------------------------------------------------------------


def bound_max_series(
    spec: DistributionSpec,
    inputs: BoundInputs,
    strict: bool = True,
    rel_tol: float = 1e-12,
    max_terms: int = 10_000_000,
    block: int = 1 << 18,
) -> BoundResult:
    """P(M > x) <= sum over j of the stopped bound at x + j z, y = theta (x + j z).

    The sum runs until a term falls below ``rel_tol`` times the partial sum
    (or ``max_terms`` is hit) and a rigorous integral majorant for the
    dropped tail is always added, so the result stays an upper bound no
    matter where the summation stops.
    """
    if inputs.theta is None:
        raise InvalidParameter("bound_max_series needs inputs.theta")
    x, z, t, theta = inputs.x, inputs.z, inputs.t, inputs.theta
    if t > 2.0:
        engine = _SeriesT2(spec, inputs)
        validity = ()
    else:
        # Validity is monotone in j: only the j = 0 term can fail.
        first_term = bound_mtau_t1(spec, replace(inputs, y=theta * x), strict=strict)
        if not first_term.ok:
            return BoundResult(math.nan, "series", {}, first_term.validity)
        validity = first_term.validity
        if inputs.use_truncated:
            engine = _SeriesTruncT1(spec, inputs)
        else:
            engine = _SeriesFullT1(spec, inputs)
    total, n_terms, w_last = _sum_terms(engine.term, x, z, rel_tol, max_terms, block)
    majorant = engine.majorant(w_last, z)
    return BoundResult(
        value=total + majorant,
        regime="series",
        terms={
            "n_terms": float(n_terms),
            "partial_sum": total,
            "tail_majorant": majorant,
            "j0_term": float(np.sum(np.add(*engine.term(np.array([x]))))),
            "last_w": w_last,
        },
        validity=validity,
    )


def _sum_terms(term_fn, x, z, rel_tol, max_terms, block):
    total = 0.0
    j = 0
    w_last = x
    n = 1 << 10
    while j < max_terms:
        n = min(n, max_terms - j)
        w = x + z * np.arange(j, j + n, dtype=float)
        first, tail_part = term_fn(w)
        vals = first + tail_part
        running = total + np.cumsum(vals)
        small = vals <= rel_tol * running
        if small.any():
            cut = int(np.argmax(small))
            total = float(running[cut])
            j += cut + 1
            w_last = float(w[cut])
            break
        total = float(running[-1])
        j += n
        w_last = float(w[-1])
        n = min(block, n * 8)
    return total, j, w_last


def _powerlog_integral_cover(log_d, c, t, kappa, w, z):
    """(1/z) * integral from w of D log(1 + c v^(t-1)) v^(-1-kappa) dv, bounded.

    Integration by parts plus c v^(t-2) / (1 + c v^(t-1)) <= 1/v gives the
    closed cover (D / (z kappa)) w^(-kappa) [log(1 + c w^(t-1)) + (t-1)/kappa].
    """
    log1p_u = _log1p_exp(math.log(c) + (t - 1.0) * math.log(w))
    log_val = (
        log_d
        - math.log(z * kappa)
        - kappa * math.log(w)
        + math.log(log1p_u + (t - 1.0) / kappa)
    )
    return math.exp(log_val) if log_val > -700.0 else 0.0


class _SeriesFullT1:
    """Order-t terms with full moments; constants fixed across j."""

    def __init__(self, spec, inputs):
        profile = moment_profile(spec, inputs.t)
        self.spec = spec
        self.t, self.theta, self.tau = inputs.t, inputs.theta, inputs.tau_mean_ub
        self.log_a, self.log_big = math.log(profile.a), math.log(profile.a_t)
        self.kappa = (inputs.t - 1.0) / inputs.theta

    def _pieces(self, w):
        t, theta, k = self.t, self.theta, 1.0 / self.theta
        log_y = math.log(theta) + np.log(w)
        log_u = self.log_a + (t - 1.0) * log_y - self.log_big
        log1p_u = np.logaddexp(0.0, log_u)
        first = self.tau * np.exp(
            k * (self.log_big - self.log_a)
            + self.log_a
            - (1.0 + (t - 1.0) * k) * log_y
            + np.log(log1p_u)
        )
        coef = 1.0 + np.exp(
            np.minimum(k * (self.log_big - self.log_a) - (t - 1.0) * k * log_y, 700.0)
        )
        return first, coef

    def term(self, w):
        first, coef = self._pieces(w)
        tail_y = np.asarray(dist.tail(self.spec, self.theta * w), dtype=float)
        return first, coef * self.tau * tail_y

    def majorant(self, w_last, z):
        t, theta, k = self.t, self.theta, 1.0 / self.theta
        _, coef = self._pieces(np.array([w_last]))
        maj_tail = (
            float(coef[0])
            * self.tau
            * float(dist.integrated_tail(self.spec, theta * w_last))
            / (theta * z)
        )
        # first(w) = D log(1 + c w^(t-1)) w^(-1-kappa)
        log_d = (
            math.log(self.tau)
            + k * (self.log_big - self.log_a)
            + self.log_a
            - (1.0 + (t - 1.0) * k) * math.log(theta)
        )
        c = math.exp(self.log_a + (t - 1.0) * math.log(theta) - self.log_big)
        return maj_tail + _powerlog_integral_cover(log_d, c, t, self.kappa, w_last, z)


class _SeriesTruncT1:
    """Level-y truncated terms at t = 2; moments vary with j.

    Only t = 2 is supported: this is the heavy-tail track, where the full
    second moment may not exist but its truncation always does.
    """

    def __init__(self, spec, inputs):
        if abs(inputs.t - 2.0) > 1e-12:
            raise InvalidParameter(
                "the truncated series path is implemented for t = 2 only; "
                "full-moment terms support any t in (1, 2]"
            )
        self.spec = spec
        self.t, self.theta, self.tau = 2.0, inputs.theta, inputs.tau_mean_ub
        self.kappa = 1.0 / inputs.theta

    def _pieces(self, w):
        theta, k = self.theta, 1.0 / self.theta
        y = theta * w
        mean_tr, a2_tr = self.spec.trunc_mean_t2(y)
        mean_tr = np.atleast_1d(np.asarray(mean_tr, dtype=float))
        a2_tr = np.atleast_1d(np.asarray(a2_tr, dtype=float))
        if np.any(mean_tr >= 0):
            bad = float(np.asarray(y).reshape(-1)[int(np.argmax(mean_tr))])
            raise ValidityViolation(
                "E[X, |X|<=y] < 0 fails inside the series",
                (ValidityCheck("E[X, |X|<=y] < 0", False, f"at y={bad:.6g}"),),
            )
        log_a = np.log(-mean_tr)
        log_big = np.log(a2_tr)
        log_y = np.log(y)
        log1p_u = np.logaddexp(0.0, log_a + log_y - log_big)
        first = self.tau * np.exp(
            k * (log_big - log_a) + log_a - (1.0 + k) * log_y + np.log(log1p_u)
        )
        coef = 1.0 + np.exp(np.minimum(k * (log_big - log_a) - k * log_y, 700.0))
        return first, coef

    def term(self, w):
        first, coef = self._pieces(w)
        tail_y = np.asarray(dist.tail(self.spec, self.theta * w), dtype=float)
        return first, coef * self.tau * tail_y

    def _assert_decreasing(self, fn, w_last, what):
        probes = fn(w_last * np.array([1.0, 1.5, 4.0, 16.0]))
        if np.any(np.diff(probes) > 0):
            raise ValidityViolation(
                f"series tail majorant needs a decreasing {what} beyond the cutoff",
                (ValidityCheck(f"{what} decreasing past w_J", False, f"w_J={w_last:.6g}"),),
            )

    def majorant(self, w_last, z):
        theta = self.theta
        self._assert_decreasing(lambda w: self._pieces(w)[1], w_last, "tail coefficient")
        coef_last = float(self._pieces(np.array([w_last]))[1][0])
        maj_tail = (
            coef_last
            * self.tau
            * float(dist.integrated_tail(self.spec, theta * w_last))
            / (theta * z)
        )
        self._assert_decreasing(lambda w: self._pieces(w)[0], w_last, "rate term")
        # int_{w_J}^inf f(w) dw = w_J int_0^1 f(w_J / s) / s^2 ds; the
        # substitution keeps quad on a finite interval with an integrable
        # endpoint (power-law decay makes the infinite form converge slowly).
        val, _ = integrate.quad(
            lambda s: float(self._pieces(np.array([w_last / s]))[0][0]) / (s * s),
            0.0,
            1.0,
            epsabs=1e-300,
            epsrel=1e-8,
            limit=200,
        )
        return maj_tail + val * w_last / z


class _SeriesT2:
    """Order t > 2 terms with per-term regime dispatch."""

    def __init__(self, spec, inputs):
        if inputs.use_truncated:
            raise InvalidParameter(
                "the truncated series path is implemented for t = 2 only; "
                "use full moments for t > 2"
            )
        profile = moment_profile(spec, inputs.t)
        if not profile.var_is_finite:
            raise InfiniteVariance("t > 2 series terms need Var(X) < infinity")
        if not math.isfinite(profile.a_t_plus):
            raise MomentDoesNotExist("t > 2 series terms need E[X^t, X>0] < infinity")
        self.spec = spec
        self.t, self.theta, self.tau = inputs.t, inputs.theta, inputs.tau_mean_ub
        self.a = profile.a
        self.h1 = 2.0 * inputs.alpha * profile.a / (math.exp(inputs.t) * profile.var)
        self.log_a = math.log(profile.a)
        self.log_big = math.log(profile.a_t_plus) - math.log(inputs.beta)
        self.kappa = (inputs.t - 1.0) / inputs.theta

    def _pieces(self, w):
        t, theta, k = self.t, self.theta, 1.0 / self.theta
        y = theta * w
        log_y = np.log(y)
        log1p_u = np.logaddexp(0.0, self.log_a + (t - 1.0) * log_y - self.log_big)
        h2 = log1p_u / y
        denom = np.expm1(self.h1 * np.minimum(w, 700.0 / self.h1))
        first_i = self.a * self.h1 * self.tau / denom
        coef_i = 1.0 + 1.0 / denom
        first_ii = self.tau * np.exp(
            k * (self.log_big - self.log_a)
            + self.log_a
            - (1.0 + (t - 1.0) * k) * log_y
            + np.log(log1p_u)
        )
        coef_ii = 1.0 + np.exp(
            np.minimum(k * (self.log_big - self.log_a) - (t - 1.0) * k * log_y, 700.0)
        )
        use_i = self.h1 <= h2
        return np.where(use_i, first_i, first_ii), np.where(use_i, coef_i, coef_ii)

    def term(self, w):
        first, coef = self._pieces(w)
        tail_y = np.asarray(dist.tail(self.spec, self.theta * w), dtype=float)
        return first, coef * self.tau * tail_y

    def majorant(self, w_last, z):
        t, theta, k = self.t, self.theta, 1.0 / self.theta
        # Tail coefficient: both regime forms are decreasing in w; freeze both.
        denom = math.expm1(self.h1 * min(w_last, 700.0 / self.h1))
        coef_cap = 1.0 + 1.0 / denom + math.exp(
            min(k * (self.log_big - self.log_a) - (t - 1.0) * k * math.log(theta * w_last), 700.0)
        )
        maj_tail = (
            coef_cap
            * self.tau
            * float(dist.integrated_tail(self.spec, theta * w_last))
            / (theta * z)
        )
        # Rate part: each dropped term is at most the regime-i form plus the
        # regime-ii form, and both have closed integral covers.
        # sum_{j>J} 1/(e^(h1 w_j) - 1) <= e^(-h1 (w_J + z)) / ((1 - e^(-h1 z)) (1 - e^(-h1 (w_J + z))))
        hz = self.h1 * z
        hw = self.h1 * (w_last + z)
        if hw < 700.0:
            maj_i = (
                self.a
                * self.h1
                * self.tau
                * math.exp(-hw)
                / ((1.0 - math.exp(-hz)) * (1.0 - math.exp(-hw)))
            )
        else:
            maj_i = 0.0
        log_d = (
            math.log(self.tau)
            + k * (self.log_big - self.log_a)
            + self.log_a
            - (1.0 + (t - 1.0) * k) * math.log(theta)
        )
        c = math.exp(self.log_a + (t - 1.0) * math.log(theta) - self.log_big)
        maj_ii = _powerlog_integral_cover(log_d, c, t, self.kappa, w_last, z)
        return maj_tail + maj_i + maj_ii


# ---------------------------------------------------------------------------
# Light-tail baseline
# ---------------------------------------------------------------------------


def cramer_lundberg(
    spec: DistributionSpec, x: float
) -> Union[BoundResult, NotApplicable]:
    """Exponential bound exp(-h* x) at the positive root of E[exp(hX)] = 1.

    Heavy-tailed laws have no positive exponential moments; those return
    :class:`NotApplicable` rather than raising.
    """
    if x <= 0:
        raise InvalidParameter(f"x must be positive, got {x}")
    dist.validate_spec(spec)
    root = lundberg_root(spec)
    if root is None:
        return NotApplicable("no positive root: E[exp(hX)] is infinite for h > 0")
    value = math.exp(-root * x)
    return BoundResult(
        value=value,
        regime="cramer_lundberg",
        terms={"h_star": root, "first_term": value, "tail_term": 0.0},
        validity=(
            ValidityCheck(
                "E[e^(h*X)] = 1",
                abs(dist.mgf(spec, root) - 1.0) < 1e-9,
                f"mgf={dist.mgf(spec, root):.15g}",
            ),
        ),
    )


def lundberg_root(spec: DistributionSpec) -> Optional[float]:
    """Positive root h* of E[exp(hX)] = 1, or None when no mgf exists."""
    from scipy.optimize import brentq

    if isinstance(spec, dist.ParetoShift):
        return None
    hi_cap = spec.rate if isinstance(spec, dist.ExponentialShift) else math.inf

    def f(h):
        return dist.mgf(spec, h) - 1.0

    # E[X] < 0 makes f negative just right of 0; expand until f > 0.
    lo = 1e-12
    while f(lo) >= 0:  # pathological scaling; shrink toward 0
        lo *= 0.5
        if lo < 1e-300:
            return None
    hi = min(1.0, 0.5 * hi_cap) if math.isfinite(hi_cap) else 1.0
    while f(hi) <= 0:
        if math.isfinite(hi_cap):
            hi = 0.5 * (hi + hi_cap)
            if hi_cap - hi < 1e-14 * hi_cap:
                break
        else:
            hi *= 2.0
            if hi > 1e8:
                return None
    return float(brentq(f, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=300))


# ---------------------------------------------------------------------------
# Alpha grid search (the split parameter is free; smaller is not always better)
# ---------------------------------------------------------------------------

ALPHA_GRID = tuple(np.round(np.arange(0.05, 0.951, 0.05), 2))


def minimize_over_alpha(
    op: Callable[..., BoundResult],
    spec: DistributionSpec,
    inputs: BoundInputs,
    grid=ALPHA_GRID,
) -> tuple:
    """Smallest valid bound over an alpha grid; returns (result, alpha)."""
    best = None
    best_alpha = None
    last_error = None
    for alpha in grid:
        try:
            res = op(spec, replace(inputs, alpha=float(alpha)))
        except (ValidityViolation, InvalidOrder, InfiniteVariance) as exc:
            last_error = exc
            continue
        if not math.isnan(res.value) and (best is None or res.value < best.value):
            best, best_alpha = res, float(alpha)
    if best is None:
        raise ValidityViolation(
            f"no alpha in the grid yields a valid bound (last error: {last_error})"
        )
    return best, best_alpha
