"""Evaluation metrics and bound checks for conditional models under shift.

Two metric families:

- Preference metrics computed by exact enumeration: win rate, the logit
  Bradley-Terry preference margin (``pm``), the expected log-sigmoid reward
  objective (``rm``).  The default reward is the log of the true
  conditional; a finite custom table can replace it.
- Information metrics: the gap between the mutual information a model
  induces and the true mutual information (``emi``), its difference across
  two populations (``emid``), and executable upper bounds on that
  difference with every term exposed in :class:`BoundTerms`.

KL direction bookkeeping: ``delta_fwd`` is KL(model || true) and feeds the
preference-gap bound; ``delta_rev`` is KL(true || model) and is the tuning
residual the capacity bound consumes.  The two are never interchangeable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discrete import (
    ConditionalModel,
    DiscreteJoint,
    _check_sizes,
    _h,
    _js,
    _tv,
    delta_fwd,
    delta_rev,
    generation_mi,
    model_y_marginal,
    mutual_information,
)
from .errors import DomainError, PreconditionError, ShapeError

__all__ = [
    "PreferenceConfig",
    "BoundTerms",
    "win_rate",
    "emi",
    "emid",
    "pm",
    "rm",
    "pm_rm_identity_check",
    "PmRmResiduals",
    "lemma1_check",
    "Lemma1Report",
    "theorem1_check",
    "Theorem1Report",
    "theorem2_bound",
    "theorem3_bound",
    "corollary_tv_bound",
    "partial_bound",
    "check_consistency",
    "BoundReport",
    "build_bound_report",
    "bound_terms_from_json_dict",
    "bound_report_from_json_dict",
]


@dataclass(frozen=True)
class PreferenceConfig:
    """Reward choice for the preference metrics.

    ``reward=None`` selects the default ``r(x, y) = log P(y|x)`` under the
    true conditional of the joint being evaluated.  A custom table must be
    finite everywhere and shaped like the conditional (nv, nt, ny).
    """

    reward: np.ndarray | None = None

    def __post_init__(self):
        if self.reward is not None:
            r = np.ascontiguousarray(self.reward, dtype=np.float64)
            if r.ndim != 3:
                raise ShapeError(f"custom reward must be 3-d (nv, nt, ny), got {r.shape}")
            if not np.all(np.isfinite(r)):
                raise DomainError("custom reward table must be finite everywhere")
            r.setflags(write=False)
            object.__setattr__(self, "reward", r)


DEFAULT_PREFERENCE = PreferenceConfig()


def _reward_table(joint: DiscreteJoint, cfg: PreferenceConfig) -> np.ndarray:
    if cfg.reward is not None:
        if cfg.reward.shape != joint.p.shape:
            raise ShapeError(
                f"reward shape {cfg.reward.shape} does not match joint {joint.p.shape}"
            )
        return cfg.reward
    rows = joint.y_given_x
    with np.errstate(divide="ignore"):
        return np.where(rows > 0.0, np.log(np.where(rows > 0.0, rows, 1.0)), -np.inf)


def _require_finite_rewards(joint: DiscreteJoint, r: np.ndarray) -> None:
    """The model samples every response with positive probability, so a
    -inf reward on any supported input carries nonzero mass."""
    supported = joint.x_marginal > 0.0
    bad = ~np.isfinite(r) & supported[:, :, None]
    if bad.any():
        v, t, y = (int(i[0]) for i in np.nonzero(bad))
        raise DomainError(
            f"reward is -inf at (v={v}, t={t}, y={y}) on a supported input; "
            "the default reward needs full-support conditional rows"
        )


# -- preference metrics --------------------------------------------------------

def win_rate(
    joint: DiscreteJoint, model: ConditionalModel, cfg: PreferenceConfig = DEFAULT_PREFERENCE
) -> float:
    """Probability that a model response out-scores a reference response.

    ``E[1(r(x, yhat) > r(x, y))]`` with yhat from the model and y from the
    true conditional, enumerated exactly.  Ties contribute zero: the
    indicator is strict, so a model identical to a deterministic reference
    scores 0, not 1/2.
    """
    _check_sizes(joint, model)
    r = _reward_table(joint, cfg)
    _require_finite_rewards(joint, r)
    w = joint.x_marginal
    rows = joint.y_given_x
    theta = model.table
    total = 0.0
    for v, t in zip(*np.nonzero(w > 0.0)):
        rv = r[v, t]
        gt = rv[:, None] > rv[None, :]  # gt[yhat, y]
        total += w[v, t] * float(theta[v, t] @ gt @ rows[v, t])
    return total


def pm(
    joint: DiscreteJoint, model: ConditionalModel, cfg: PreferenceConfig = DEFAULT_PREFERENCE
) -> float:
    """Preference margin: expected reward of model responses minus expected
    reward of reference responses, ``E_x[E_yhat r - E_y r]``."""
    _check_sizes(joint, model)
    r = _reward_table(joint, cfg)
    _require_finite_rewards(joint, r)
    w = joint.x_marginal
    rows = joint.y_given_x
    theta = model.table
    total = 0.0
    for v, t in zip(*np.nonzero(w > 0.0)):
        rv = r[v, t]
        model_side = float(theta[v, t] @ rv)
        mask = rows[v, t] > 0.0
        ref_side = float(rows[v, t][mask] @ rv[mask])
        total += w[v, t] * (model_side - ref_side)
    return total


def rm(
    joint: DiscreteJoint, model: ConditionalModel, cfg: PreferenceConfig = DEFAULT_PREFERENCE
) -> float:
    """Expected log-sigmoid of the reward difference, always negative."""
    _check_sizes(joint, model)
    r = _reward_table(joint, cfg)
    _require_finite_rewards(joint, r)
    w = joint.x_marginal
    rows = joint.y_given_x
    theta = model.table
    total = 0.0
    for v, t in zip(*np.nonzero(w > 0.0)):
        rv = r[v, t]
        mask = rows[v, t] > 0.0
        diffs = rv[:, None] - rv[None, mask]  # (yhat, supported y)
        logsig = -np.logaddexp(0.0, -diffs)
        total += w[v, t] * float(theta[v, t] @ logsig @ rows[v, t][mask])
    return total


@dataclass(frozen=True)
class PmRmResiduals:
    """Residuals of the two conversion identities linking pm and rm values
    that share one preference probability.  ``skipped`` is set at the
    domain edge where exp(rm) rounds to 1 and the conversion blows up."""

    residual_pm: float | None
    residual_rm: float | None
    skipped: bool


def pm_rm_identity_check(pm_val: float, rm_val: float) -> PmRmResiduals:
    """Check ``pm = rm - log(1 - exp(rm))`` and ``rm = pm - log(1 + exp(pm))``.

    The identities hold exactly when both values derive from a single
    preference probability p via ``pm = logit(p)``, ``rm = log(p)``; that
    is the per-comparison level, not the aggregate level, and the tests
    feed per-comparison pairs.
    """
    if not rm_val < 0.0:
        raise DomainError(f"rm must be negative, got {rm_val!r}")
    if math.exp(rm_val) >= 1.0 - 1e-12:
        return PmRmResiduals(residual_pm=None, residual_rm=None, skipped=True)
    pm_from_rm = rm_val - math.log(-math.expm1(rm_val))
    rm_from_pm = pm_val - math.log1p(math.exp(pm_val)) if pm_val < 700 else -math.exp(-pm_val)
    return PmRmResiduals(
        residual_pm=abs(pm_val - pm_from_rm),
        residual_rm=abs(rm_val - rm_from_pm),
        skipped=False,
    )


# -- information metrics ---------------------------------------------------------

def emi(joint: DiscreteJoint, model: ConditionalModel) -> float:
    """Model-induced mutual information minus the true mutual information.

    Zero when the model equals the true conditional; sign-indefinite in
    general (a model can concentrate harder than the population does).
    """
    _check_sizes(joint, model)
    return generation_mi(joint, model) - mutual_information(joint, ("vt", "y"))


def emid(p_joint: DiscreteJoint, q_joint: DiscreteJoint, model: ConditionalModel) -> float:
    """``emi`` gap between a source population P and a shifted population Q."""
    if p_joint.p.shape != q_joint.p.shape:
        raise ShapeError(f"joint shapes differ: {p_joint.p.shape} vs {q_joint.p.shape}")
    return emi(p_joint, model) - emi(q_joint, model)


# -- gap bounds -------------------------------------------------------------------

@dataclass(frozen=True)
class Lemma1Report:
    gap: float
    delta: float | None
    bound: float | None
    holds: bool | None
    skipped: bool


def lemma1_check(joint: DiscreteJoint, model: ConditionalModel) -> Lemma1Report:
    """Bound the |emi - pm| gap by the model's forward KL to the truth.

    ``delta = E_x KL(model(.|x) || P(.|x))`` (model first); the bound is
    ``delta + 4.4 * delta**(1/8)``.  When delta is infinite (the model puts
    mass on responses the population never produces) the check is skipped
    with a flag instead of comparing against infinity.
    """
    _check_sizes(joint, model)
    d = delta_fwd(joint, model)
    if d is None:
        return Lemma1Report(gap=math.nan, delta=None, bound=None, holds=None, skipped=True)
    gap = abs(emi(joint, model) - pm(joint, model))
    bound = d + 4.4 * d ** 0.125
    return Lemma1Report(gap=gap, delta=d, bound=bound, holds=bool(gap <= bound + 1e-9), skipped=False)


@dataclass(frozen=True)
class Theorem1Report:
    gap: float
    delta: float
    bound: float
    holds: bool


def theorem1_check(
    joint: DiscreteJoint, tuned_model: ConditionalModel, epsilon: float, c: float
) -> Theorem1Report:
    """Gap bound driven by tuning quality instead of the forward KL.

    Preconditions: ``epsilon`` dominates the achieved tuning residual
    ``E_x KL(P(.|x) || model(.|x))`` and ``0 < c <= min`` of the joint over
    its support.  The intermediate ``delta = 4.4 eps^(1/8) - log(c) sqrt(2 eps)``
    feeds the same ``delta + 4.4 delta^(1/8)`` form the forward-KL bound uses.
    """
    _check_sizes(joint, tuned_model)
    if c <= 0.0:
        raise PreconditionError(f"c must be positive, got {c!r}")
    support_min = float(joint.p[joint.p > 0.0].min())
    if c > support_min + 1e-15:
        raise PreconditionError(
            f"c={c!r} exceeds the smallest supported joint mass {support_min!r}"
        )
    achieved = delta_rev(joint, tuned_model)
    if epsilon < achieved:
        raise PreconditionError(
            f"epsilon={epsilon!r} is below the achieved tuning residual {achieved!r}"
        )
    delta = 4.4 * epsilon ** 0.125 - math.log(c) * math.sqrt(2.0 * epsilon)
    bound = delta + 4.4 * delta ** 0.125
    gap = abs(emi(joint, tuned_model) - pm(joint, tuned_model))
    return Theorem1Report(gap=gap, delta=delta, bound=bound, holds=bool(gap <= bound + 1e-9))


# -- shift bounds -----------------------------------------------------------------

@dataclass(frozen=True)
class BoundTerms:
    """Every term of one shift-bound evaluation.

    ``variant`` selects the recomposition formula:

    - ``simplified``: ``h_hat * (sqrt(js_xv) + sqrt(js_xt)) + 8 * (delta_p + delta_q)**0.25``
      with ``delta_*`` the response-marginal JS divergences.
    - ``general``: adds ``h_hat * (sqrt(js_cond_t_given_v) + sqrt(js_cond_v_given_t))``
      and the conditional-response term ``js_y_given_x_term``.
    - ``corollary_tv``: the simplified formula, but ``delta_*`` hold
      expected conditional total variations instead of marginal JS.
    - ``partial``: marginal terms only, no ``delta`` contribution.

    Terms that a variant does not use are stored as 0.
    """

    js_xv: float
    js_xt: float
    js_cond_t_given_v: float
    js_cond_v_given_t: float
    js_y_given_x_term: float
    delta_p: float
    delta_q: float
    h_hat: float
    rhs_total: float
    variant: str

    def recompute_rhs(self) -> float:
        base = self.h_hat * (math.sqrt(self.js_xv) + math.sqrt(self.js_xt))
        delta_term = 8.0 * (self.delta_p + self.delta_q) ** 0.25
        if self.variant == "partial":
            return base
        if self.variant in ("simplified", "corollary_tv"):
            return base + delta_term
        if self.variant == "general":
            cond = self.h_hat * (
                math.sqrt(self.js_cond_t_given_v) + math.sqrt(self.js_cond_v_given_t)
            )
            return base + cond + delta_term + self.js_y_given_x_term
        raise DomainError(f"unknown variant {self.variant!r}")

    def to_json_dict(self) -> dict:
        return {
            "js_xv": self.js_xv,
            "js_xt": self.js_xt,
            "js_cond_t_given_v": self.js_cond_t_given_v,
            "js_cond_v_given_t": self.js_cond_v_given_t,
            "js_y_given_x_term": self.js_y_given_x_term,
            "delta_p": self.delta_p,
            "delta_q": self.delta_q,
            "h_hat": self.h_hat,
            "rhs_total": self.rhs_total,
            "variant": self.variant,
        }


def _shape_pair(p_joint: DiscreteJoint, q_joint: DiscreteJoint, model: ConditionalModel):
    if p_joint.p.shape != q_joint.p.shape:
        raise ShapeError(f"joint shapes differ: {p_joint.p.shape} vs {q_joint.p.shape}")
    _check_sizes(p_joint, model)


def check_consistency(
    p_joint: DiscreteJoint, q_joint: DiscreteJoint, tol: float = 1e-9
) -> None:
    """Require equal conditionals P(t|v), P(v|t), P(y|v,t) across P and Q.

    Rows are compared in max-norm at tolerance ``tol``; the error names the
    single worst row so generator bugs are directly attributable.  Rows off
    the support of both populations compare equal by the shared uniform
    fallback convention.
    """
    if p_joint.p.shape != q_joint.p.shape:
        raise ShapeError(f"joint shapes differ: {p_joint.p.shape} vs {q_joint.p.shape}")
    worst_dev = -1.0
    worst_name = ""
    checks = [
        ("P(t|v) row v=%d", p_joint.t_given_v, q_joint.t_given_v),
        ("P(v|t) row t=%d", p_joint.v_given_t, q_joint.v_given_t),
    ]
    for fmt, a, b in checks:
        dev = np.abs(a - b).max(axis=1)
        i = int(np.argmax(dev))
        if float(dev[i]) > worst_dev:
            worst_dev = float(dev[i])
            worst_name = fmt % i
    dev = np.abs(p_joint.y_given_x - q_joint.y_given_x).max(axis=2)
    v, t = np.unravel_index(int(np.argmax(dev)), dev.shape)
    if float(dev[v, t]) > worst_dev:
        worst_dev = float(dev[v, t])
        worst_name = f"P(y|x) row (v={v}, t={t})"
    if worst_dev > tol:
        raise PreconditionError(
            f"conditionals are not consistent across the pair: {worst_name} "
            f"deviates by {worst_dev:.6e} (tolerance {tol:g})"
        )


def _h_hat(q_joint: DiscreteJoint, model: ConditionalModel) -> float:
    """max over inputs of H(Q(.|x)) + H(model(.|x)), Q's conditional only."""
    rows = q_joint.y_given_x
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = np.where(rows > 0.0, np.log(np.where(rows > 0.0, rows, 1.0)), 0.0)
    h_q = -(rows * lp).sum(axis=2)
    h_m = -(model.table * model.log_table).sum(axis=2)
    return float((h_q + h_m).max())


def _marginal_js_terms(p_joint, q_joint, model):
    js_xv = _js(p_joint.v_marginal, q_joint.v_marginal)
    js_xt = _js(p_joint.t_marginal, q_joint.t_marginal)
    delta_p = _js(model_y_marginal(p_joint, model), p_joint.y_marginal)
    delta_q = _js(model_y_marginal(q_joint, model), q_joint.y_marginal)
    return js_xv, js_xt, delta_p, delta_q


def theorem2_bound(
    p_joint: DiscreteJoint, q_joint: DiscreteJoint, model: ConditionalModel
) -> BoundTerms:
    """Shift bound for pairs with consistent conditionals.

    ``emid(P, Q; model) <= h_hat * (sqrt(js_xv) + sqrt(js_xt)) + 8 * Delta**0.25``
    where Delta sums the JS divergences between each population's response
    marginal and the model's response marginal under the same inputs.
    Raises :class:`PreconditionError` when any conditional row differs
    across the pair beyond 1e-9.
    """
    _shape_pair(p_joint, q_joint, model)
    check_consistency(p_joint, q_joint)
    js_xv, js_xt, delta_p, delta_q = _marginal_js_terms(p_joint, q_joint, model)
    h_hat = _h_hat(q_joint, model)
    rhs = h_hat * (math.sqrt(js_xv) + math.sqrt(js_xt)) + 8.0 * (delta_p + delta_q) ** 0.25
    return BoundTerms(
        js_xv=js_xv, js_xt=js_xt,
        js_cond_t_given_v=0.0, js_cond_v_given_t=0.0, js_y_given_x_term=0.0,
        delta_p=delta_p, delta_q=delta_q, h_hat=h_hat,
        rhs_total=rhs, variant="simplified",
    )


def _mean_cond_js(rows_p: np.ndarray, rows_q: np.ndarray, w_p: np.ndarray, w_q: np.ndarray) -> float:
    """sum_i (w_p[i] + w_q[i]) * js(rows_p[i], rows_q[i]): the conditional
    divergence averaged under both populations' marginals."""
    total = 0.0
    for i in range(rows_p.shape[0]):
        wgt = float(w_p[i] + w_q[i])
        if wgt > 0.0:
            total += wgt * _js(rows_p[i], rows_q[i])
    return total


def theorem3_bound(
    p_joint: DiscreteJoint, q_joint: DiscreteJoint, model: ConditionalModel
) -> BoundTerms:
    """Shift bound with no consistency requirement.

    Extends the consistent-pair bound with cross-modality conditional
    terms (each averaged under both populations' marginals) and a
    response-conditional term ``4 * E_{x~P}[js(P(.|x), Q(.|x))**0.25]``.
    Reduces to the consistent-pair value when the pair is consistent.
    """
    _shape_pair(p_joint, q_joint, model)
    js_xv, js_xt, delta_p, delta_q = _marginal_js_terms(p_joint, q_joint, model)
    h_hat = _h_hat(q_joint, model)
    d_t_given_v = _mean_cond_js(
        p_joint.t_given_v, q_joint.t_given_v, p_joint.v_marginal, q_joint.v_marginal
    )
    d_v_given_t = _mean_cond_js(
        p_joint.v_given_t, q_joint.v_given_t, p_joint.t_marginal, q_joint.t_marginal
    )
    w = p_joint.x_marginal
    rows_p = p_joint.y_given_x
    rows_q = q_joint.y_given_x
    y_term = 0.0
    for v, t in zip(*np.nonzero(w > 0.0)):
        y_term += float(w[v, t]) * _js(rows_p[v, t], rows_q[v, t]) ** 0.25
    y_term *= 4.0
    rhs = (
        h_hat * (math.sqrt(js_xv) + math.sqrt(js_xt)
                 + math.sqrt(d_t_given_v) + math.sqrt(d_v_given_t))
        + 8.0 * (delta_p + delta_q) ** 0.25
        + y_term
    )
    return BoundTerms(
        js_xv=js_xv, js_xt=js_xt,
        js_cond_t_given_v=d_t_given_v, js_cond_v_given_t=d_v_given_t,
        js_y_given_x_term=y_term,
        delta_p=delta_p, delta_q=delta_q, h_hat=h_hat,
        rhs_total=rhs, variant="general",
    )


def corollary_tv_bound(
    p_joint: DiscreteJoint, q_joint: DiscreteJoint, model: ConditionalModel
) -> BoundTerms:
    """Consistent-pair bound with the response term in total variation.

    Replaces the response-marginal JS sum with expected conditional total
    variations between each population and the model, which upper-bound the
    marginal divergences by convexity, so this holds whenever the JS form
    does.  ``delta_p`` / ``delta_q`` store the TV expectations here.
    """
    _shape_pair(p_joint, q_joint, model)
    check_consistency(p_joint, q_joint)
    js_xv = _js(p_joint.v_marginal, q_joint.v_marginal)
    js_xt = _js(p_joint.t_marginal, q_joint.t_marginal)
    h_hat = _h_hat(q_joint, model)

    def _exp_tv(joint: DiscreteJoint) -> float:
        w = joint.x_marginal
        rows = joint.y_given_x
        total = 0.0
        for v, t in zip(*np.nonzero(w > 0.0)):
            total += float(w[v, t]) * _tv(rows[v, t], model.table[v, t])
        return total

    delta_p = _exp_tv(p_joint)
    delta_q = _exp_tv(q_joint)
    rhs = h_hat * (math.sqrt(js_xv) + math.sqrt(js_xt)) + 8.0 * (delta_p + delta_q) ** 0.25
    return BoundTerms(
        js_xv=js_xv, js_xt=js_xt,
        js_cond_t_given_v=0.0, js_cond_v_given_t=0.0, js_y_given_x_term=0.0,
        delta_p=delta_p, delta_q=delta_q, h_hat=h_hat,
        rhs_total=rhs, variant="corollary_tv",
    )


def partial_bound(
    p_joint: DiscreteJoint, q_joint: DiscreteJoint, model: ConditionalModel
) -> float:
    """Marginal-shift component of the consistent-pair bound.

    ``h_hat * (sqrt(js_xv) + sqrt(js_xt))`` with no response term.  Not an
    upper bound on emid by itself; it exists because it tracks shift
    severity monotonically and is the piece correlation analyses use.
    """
    _shape_pair(p_joint, q_joint, model)
    check_consistency(p_joint, q_joint)
    js_xv = _js(p_joint.v_marginal, q_joint.v_marginal)
    js_xt = _js(p_joint.t_marginal, q_joint.t_marginal)
    return _h_hat(q_joint, model) * (math.sqrt(js_xv) + math.sqrt(js_xt))


@dataclass(frozen=True)
class BoundReport:
    """Per-scenario record tying the exact metrics to every bound.

    Consistent pairs carry all four bound variants; pairs that break the
    shared-conditional assumption carry only the assumption-free bound
    and ``None`` for the rest.  ``holds_*`` flags compare ``emid`` (never
    its absolute value; the bounds are one-sided) against each RHS at the
    stated slack.  ``estimates`` is a free-form slot for sample-based
    estimator outputs attached by sweep pipelines.
    """

    label: str
    kind: str
    severity: float
    emi_p: float
    emi_q: float
    emid: float
    wr_p: float
    wr_q: float
    pm_p: float
    pm_q: float
    rm_p: float
    rm_q: float
    theorem3: BoundTerms
    holds_theorem3: bool
    theorem2: BoundTerms | None = None
    corollary: BoundTerms | None = None
    partial_rhs: float | None = None
    holds_theorem2: bool | None = None
    holds_corollary: bool | None = None
    slack: float = 1e-9
    estimates: dict = None  # type: ignore[assignment]

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "kind": self.kind,
            "severity": self.severity,
            "emi_p": self.emi_p,
            "emi_q": self.emi_q,
            "emid": self.emid,
            "wr_p": self.wr_p,
            "wr_q": self.wr_q,
            "pm_p": self.pm_p,
            "pm_q": self.pm_q,
            "rm_p": self.rm_p,
            "rm_q": self.rm_q,
            "theorem2": None if self.theorem2 is None else self.theorem2.to_json_dict(),
            "theorem3": self.theorem3.to_json_dict(),
            "corollary_tv": None if self.corollary is None else self.corollary.to_json_dict(),
            "partial_rhs": self.partial_rhs,
            "holds": {
                "theorem2": self.holds_theorem2,
                "theorem3": self.holds_theorem3,
                "corollary_tv": self.holds_corollary,
            },
            "slack": self.slack,
            "estimates": dict(self.estimates or {}),
        }


def build_bound_report(
    label: str,
    kind: str,
    severity: float,
    p_joint: DiscreteJoint,
    q_joint: DiscreteJoint,
    model: ConditionalModel,
    slack: float = 1e-9,
    estimates: dict | None = None,
) -> BoundReport:
    """Evaluate every metric and applicable bound for one (P, Q, model)."""
    cfg = DEFAULT_PREFERENCE
    emi_p = emi(p_joint, model)
    emi_q = emi(q_joint, model)
    d = emi_p - emi_q
    t3 = theorem3_bound(p_joint, q_joint, model)
    try:
        check_consistency(p_joint, q_joint)
        consistent = True
    except PreconditionError:
        consistent = False
    t2 = cor = part = None
    holds2 = holdsc = None
    if consistent:
        t2 = theorem2_bound(p_joint, q_joint, model)
        cor = corollary_tv_bound(p_joint, q_joint, model)
        part = partial_bound(p_joint, q_joint, model)
        holds2 = d <= t2.rhs_total + slack
        holdsc = d <= cor.rhs_total + slack
    return BoundReport(
        label=label,
        kind=kind,
        severity=severity,
        emi_p=emi_p,
        emi_q=emi_q,
        emid=d,
        wr_p=win_rate(p_joint, model, cfg),
        wr_q=win_rate(q_joint, model, cfg),
        pm_p=pm(p_joint, model, cfg),
        pm_q=pm(q_joint, model, cfg),
        rm_p=rm(p_joint, model, cfg),
        rm_q=rm(q_joint, model, cfg),
        theorem3=t3,
        holds_theorem3=d <= t3.rhs_total + slack,
        theorem2=t2,
        corollary=cor,
        partial_rhs=part,
        holds_theorem2=holds2,
        holds_corollary=holdsc,
        slack=slack,
        estimates=dict(estimates or {}),
    )


def bound_terms_from_json_dict(d: dict) -> BoundTerms:
    return BoundTerms(**d)


def bound_report_from_json_dict(d: dict) -> BoundReport:
    holds = d.get("holds", {})
    return BoundReport(
        label=d["label"],
        kind=d["kind"],
        severity=d["severity"],
        emi_p=d["emi_p"],
        emi_q=d["emi_q"],
        emid=d["emid"],
        wr_p=d["wr_p"],
        wr_q=d["wr_q"],
        pm_p=d["pm_p"],
        pm_q=d["pm_q"],
        rm_p=d["rm_p"],
        rm_q=d["rm_q"],
        theorem3=bound_terms_from_json_dict(d["theorem3"]),
        holds_theorem3=holds.get("theorem3", True),
        theorem2=None if d.get("theorem2") is None else bound_terms_from_json_dict(d["theorem2"]),
        corollary=None if d.get("corollary_tv") is None else bound_terms_from_json_dict(d["corollary_tv"]),
        partial_rhs=d.get("partial_rhs"),
        holds_theorem2=holds.get("theorem2"),
        holds_corollary=holds.get("corollary_tv"),
        slack=d.get("slack", 1e-9),
        estimates=dict(d.get("estimates") or {}),
    )
