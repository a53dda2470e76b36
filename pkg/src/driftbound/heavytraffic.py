"""Drift-to-zero experiments against the regularly-varying asymptote.

A family fixes a mean-zero Pareto-tailed base law X0 (tail index r, constant
slowly-varying part L = scale^r) and sweeps X^(a) = X0 - a over a decreasing
drift list.  Each row evaluates a global-maximum bound, a Monte Carlo
estimate where the event is not hopelessly rare, and the first-order
asymptote x^(1-r) L / ((r-1) a); ratios of the first two against the third
make the precision of the inequalities visible as a -> 0.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import bounds as bnd
from .bounds import BoundInputs, Lorden, OvershootMethod
from .distributions import ParetoShift
from .errors import InfiniteVariance, InvalidOrder, InvalidParameter, ValidityViolation
from .montecarlo import estimate_m_tail

CSV_FLOAT_FMT = "%.12g"


# ---------------------------------------------------------------------------
# Schedules and stopping-depth rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogSchedule:
    """x_a = c * a^(-1) * log(1/a); the critical shape for the r > 2 track."""

    c: float = 10.0

    def x_for(self, a: float) -> float:
        if not 0 < a < 1:
            raise InvalidParameter("log schedule needs drifts in (0,1)")
        return self.c * math.log(1.0 / a) / a


@dataclass(frozen=True)
class PowerSchedule:
    """x_a = c * a^(-kappa)."""

    c: float
    kappa: float

    def x_for(self, a: float) -> float:
        return self.c * a ** (-self.kappa)


Schedule = Union[LogSchedule, PowerSchedule]


@dataclass(frozen=True)
class GeometricMeanZ:
    """z = c * sqrt(x/a): the geometric mean of the window (1/a, x)."""

    c: float = 1.0

    def z_for(self, a: float, x: float) -> float:
        return self.c * math.sqrt(x / a)


@dataclass(frozen=True)
class InverseDriftZ:
    """z = c / a."""

    c: float = 5.0

    def z_for(self, a: float, x: float) -> float:
        return self.c / a


@dataclass(frozen=True)
class FractionOfXZ:
    """z = phi * x."""

    phi: float = 0.05

    def z_for(self, a: float, x: float) -> float:
        return self.phi * x


ZRule = Union[GeometricMeanZ, InverseDriftZ, FractionOfXZ]


# ---------------------------------------------------------------------------
# Family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HeavyTrafficFamily:
    """Mean-zero Pareto-tailed base with a decreasing drift sweep.

    The base X0 is the ParetoShift configuration with shift r*scale/(r-1)
    (so E[X0] = 0); it is stored as (r, scale) because a zero-drift law is
    not a valid walk increment on its own.  r > 2 gives the finite-variance
    track; r in (1,2) gives the infinite-variance track (the negative part
    is bounded by the shift, so Lorden still applies).
    """

    r: float
    scale: float = 1.0
    drifts: tuple = (0.5, 0.2, 0.1, 0.05)
    schedule: Schedule = field(default_factory=LogSchedule)

    def __post_init__(self):
        if self.r <= 1.0 or abs(self.r - 2.0) < 1e-9:
            raise InvalidParameter("tail index r must be in (1,2) or (2,inf)")
        if self.scale <= 0:
            raise InvalidParameter("scale must be positive")
        if not self.drifts or any(a <= 0 for a in self.drifts):
            raise InvalidParameter("drifts must be positive")
        if list(self.drifts) != sorted(self.drifts, reverse=True):
            raise InvalidParameter("drifts must be decreasing")

    @property
    def track(self) -> str:
        return "t4" if self.r > 2.0 else "t5"

    @property
    def base_shift(self) -> float:
        return self.r * self.scale / (self.r - 1.0)

    @property
    def l_const(self) -> float:
        return self.scale**self.r

    @property
    def sigma2(self) -> Optional[float]:
        # Var is shift-invariant, so this is the raw Pareto variance.
        if self.r <= 2.0:
            return None
        m2 = self.r * self.scale**2 / (self.r - 2.0)
        m1 = self.r * self.scale / (self.r - 1.0)
        return m2 - m1 * m1

    def spec_for(self, a: float) -> ParetoShift:
        return ParetoShift(self.r, self.scale, self.base_shift + a)


# ---------------------------------------------------------------------------
# Pointwise quantities
# ---------------------------------------------------------------------------


def ht_asymptote(r: float, l_const: float, a: float, x: float) -> float:
    """First-order tail asymptote x^(1-r) L / ((r-1) a)."""
    if r <= 1.0 or a <= 0 or x <= 0:
        raise InvalidParameter("need r > 1, a > 0, x > 0")
    return x ** (1.0 - r) * l_const / ((r - 1.0) * a)


def t4_condition(r: float, sigma2: float, schedule: Schedule, drifts) -> dict:
    """Critical-schedule check for the finite-variance track.

    The schedule passes when x_a / (a^(-1) log(1/a)) stays above
    e^r (r-2) sigma^2 / 2; the per-drift ratios are reported either way.
    """
    if r <= 2.0:
        raise InvalidOrder("the critical-schedule condition needs r > 2")
    threshold = math.exp(r) * (r - 2.0) * sigma2 / 2.0
    rows = []
    for a in drifts:
        ratio = schedule.x_for(a) / (math.log(1.0 / a) / a)
        rows.append({"a": a, "ratio": ratio, "passed": bool(ratio > threshold)})
    return {"threshold": threshold, "rows": rows}


def g_scale(r: float, l_const: float, a: float, x: float) -> float:
    """a x^(r-1) / L: must diverge along the schedule on the r in (1,2) track."""
    if not 1.0 < r < 2.0:
        raise InvalidParameter(f"g_scale applies for r in (1,2), got r={r}")
    return a * x ** (r - 1.0) / l_const


# ---------------------------------------------------------------------------
# Ratio experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HtRow:
    a: float
    x: float
    z: float
    theta: float
    t: float
    bound_value: float          # nan when no valid bound exists at this row
    bound_ratio: float
    mc_estimate: Optional[float]
    mc_stderr: Optional[float]
    mc_ratio: Optional[float]
    asymptote: float
    cond: float
    validity_notes: str


@dataclass(frozen=True)
class HtResult:
    track: str
    rows: tuple
    theta: float
    t: float
    theta_limit: float          # theta^(-r): the ratio scale the bounds approach
    t4_threshold: Optional[float]

    @property
    def cond_column(self) -> str:
        return "cond_t4" if self.track == "t4" else "cond_g"

    def to_csv(self) -> str:
        out = io.StringIO()
        cols = [
            "a", "x_a", "z_a", "theta", "t", "bound_value", "bound_ratio",
            "mc_estimate", "mc_stderr", "mc_ratio", "asymptote",
            self.cond_column, "validity_notes",
        ]
        out.write(",".join(cols) + "\n")
        for row in self.rows:
            vals = [
                row.a, row.x, row.z, row.theta, row.t, row.bound_value,
                row.bound_ratio, row.mc_estimate, row.mc_stderr, row.mc_ratio,
                row.asymptote, row.cond,
            ]
            cells = ["" if v is None else CSV_FLOAT_FMT % v for v in vals]
            cells.append(row.validity_notes)
            out.write(",".join(cells) + "\n")
        return out.getvalue()


def _row_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence((seed, index)).generate_state(1)[0])


def ht_ratio_experiment(
    family: HeavyTrafficFamily,
    theta: float = 0.95,
    t: Optional[float] = None,
    alpha: Optional[float] = 0.5,
    z_rule: ZRule = GeometricMeanZ(1.0),
    n_mc: int = 200_000,
    seed: int = 0,
    method: OvershootMethod = Lorden(),
    bound_kind: str = "series",
    mc_min_events: float = 100.0,
    stop_margin: Optional[float] = None,
    series_max_terms: int = 10_000_000,
) -> HtResult:
    """Per-drift bounds, Monte Carlo estimates and asymptote ratios.

    The r > 2 track bounds P(M > x) through the order t < r inequalities
    (default t = r - 0.1); the r in (1,2) track uses the truncated order-2
    series, which is exactly how the infinite-variance asymptotics are
    proved.  ``alpha=None`` grid-minimizes the split parameter per row.
    Monte Carlo runs only when the expected event count
    asymptote * n_mc reaches ``mc_min_events``; rarer rows report the bound
    and asymptote alone.  Row failures are recorded, not raised.
    """
    if not 0 < theta < 1:
        raise InvalidParameter(f"theta must lie in (0,1), got {theta}")
    track = family.track
    if t is None:
        t = family.r - 0.1 if track == "t4" else 2.0
    if track == "t5" and abs(t - 2.0) > 1e-12:
        raise InvalidParameter("the r in (1,2) track runs at t = 2 (truncated)")
    if track == "t4" and not 2.0 < t < family.r:
        raise InvalidParameter(f"the r > 2 track needs t in (2, r), got t={t}")
    if bound_kind not in ("series", "t3"):
        raise InvalidParameter(f"bound_kind must be 'series' or 't3', got {bound_kind!r}")
    if track == "t5" and bound_kind == "t3":
        raise InvalidParameter(
            "the closed-form global bound has no truncated variant; "
            "the r in (1,2) track needs bound_kind='series'"
        )

    rows = []
    t4_threshold = None
    if track == "t4":
        t4_threshold = math.exp(family.r) * (family.r - 2.0) * family.sigma2 / 2.0
    for i, a in enumerate(family.drifts):
        x = family.schedule.x_for(a)
        z = z_rule.z_for(a, x)
        spec = family.spec_for(a)
        asym = ht_asymptote(family.r, family.l_const, a, x)
        notes = []
        if track == "t4":
            cond = x / (math.log(1.0 / a) / a)
            if cond <= t4_threshold:
                notes.append("cond_t4_fail")
        else:
            cond = g_scale(family.r, family.l_const, a, x)

        tau_ub = bnd.tau_mean_ub(spec, z, method)
        inputs = BoundInputs(
            x=x, z=z, t=t, tau_mean_ub=tau_ub, theta=theta,
            alpha=0.5 if alpha is None else alpha,
            use_truncated=(track == "t5"),
        )
        bound_value = math.nan
        try:
            if bound_kind == "t3":
                if alpha is None and t > 2.0:
                    res, _ = bnd.minimize_over_alpha(bnd.bound_max_t3, spec, inputs)
                else:
                    res = bnd.bound_max_t3(spec, inputs)
            else:
                if alpha is None and t > 2.0:
                    res, _ = bnd.minimize_over_alpha(
                        lambda s, inp: bnd.bound_max_series(
                            s, inp, max_terms=series_max_terms
                        ),
                        spec,
                        inputs,
                    )
                else:
                    res = bnd.bound_max_series(spec, inputs, max_terms=series_max_terms)
            bound_value = res.value
            notes.extend(c.name for c in res.validity if not c.passed)
        except (ValidityViolation, InfiniteVariance) as exc:
            notes.append(f"bound_invalid({exc})")

        mc_est = mc_se = mc_ratio = None
        if asym * n_mc >= mc_min_events:
            est = estimate_m_tail(
                spec, x, n_mc, _row_seed(seed, i), stop_margin=stop_margin
            )
            mc_est, mc_se = est.p_hat, est.stderr
            mc_ratio = est.p_hat / asym
        else:
            notes.append(f"mc_skipped(expected_events<{mc_min_events:g})")

        rows.append(
            HtRow(
                a=a, x=x, z=z, theta=theta, t=t,
                bound_value=bound_value,
                bound_ratio=bound_value / asym,
                mc_estimate=mc_est, mc_stderr=mc_se, mc_ratio=mc_ratio,
                asymptote=asym, cond=cond,
                validity_notes=";".join(notes),
            )
        )
    return HtResult(
        track=track,
        rows=tuple(rows),
        theta=theta,
        t=t,
        theta_limit=theta ** (-family.r),
        t4_threshold=t4_threshold,
    )
