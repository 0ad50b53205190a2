"""Exact finite-distribution computations.

Everything here enumerates: joints over (visual token, text token, response
token) are dense tensors, so entropies, divergences, mutual informations,
and expected log-likelihoods are sums, not estimates.  All information
quantities are in nats.

Conventions that matter and are easy to get wrong:

- ``0 * log 0 = 0`` throughout.
- ``kl`` returns ``None`` (not ``float('inf')``) when the support condition
  fails, so callers are forced to branch on the undefined case.
- ``tv`` is the unnormalized ``sum(|p - q|)`` with range [0, 2].
- Conditional rows for zero-mass inputs are uniform, so every derived row
  is a valid distribution; expectations weight them by zero anyway.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, DomainError, ShapeError

__all__ = [
    "DiscreteJoint",
    "ConditionalModel",
    "InfoReport",
    "entropy",
    "kl",
    "js",
    "tv",
    "mutual_information",
    "tensor_joint",
    "generation_mi",
    "model_y_marginal",
    "delta_fwd",
    "delta_rev",
    "instruction_tune",
    "tuning_loss",
    "lower_bound_identity_check",
    "LowerBoundReport",
    "info_report",
]

_AXES = {"v": 0, "t": 1, "y": 2}


# -- raw helpers (no validation; inputs are known-good arrays) --------------

def _h(p: np.ndarray) -> float:
    """Entropy in nats with 0 log 0 = 0.  ``p`` may be any-dimensional."""
    mask = p > 0.0
    vals = p[mask]
    return float(-(vals * np.log(vals)).sum()) if vals.size else 0.0


def _kl(p: np.ndarray, q: np.ndarray) -> float | None:
    mask = p > 0.0
    if np.any(q[mask] <= 0.0):
        return None
    vals = p[mask]
    # log of the ratio, not a difference of logs: p ~ q cancels the logs
    # to ~1e-16 absolute while the true value is ~(p-q)/q, and Pinsker is
    # tight exactly there; non-negative by Gibbs, clamp the last residue
    return max(0.0, float((vals * np.log(vals / q[mask])).sum()))


def _js(p: np.ndarray, q: np.ndarray) -> float:
    m = 0.5 * (p + q)
    # m > 0 wherever p > 0 or q > 0, so both KLs are finite
    acc = 0.0
    pm = p > 0.0
    qm = q > 0.0
    acc += float((p[pm] * (np.log(p[pm]) - np.log(m[pm]))).sum()) if pm.any() else 0.0
    acc += float((q[qm] * (np.log(q[qm]) - np.log(m[qm]))).sum()) if qm.any() else 0.0
    # non-negative by definition; cancellation can leave -1e-17 residue
    return max(0.0, 0.5 * acc)


def _tv(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.abs(p - q).sum())


def _check_dist(p, name: str, tol: float = 1e-9) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0.0):
        raise DomainError(f"{name} has a negative entry (min {p.min():.3e})")
    s = float(p.sum())
    if abs(s - 1.0) > tol:
        raise DomainError(f"{name} sums to {s!r}, not 1 within {tol:g}")
    return p


def _check_pair(p, q):
    p = _check_dist(p, "p")
    q = _check_dist(q, "q")
    if p.shape != q.shape:
        raise ShapeError(f"length mismatch: {p.shape} vs {q.shape}")
    return p, q


# -- public scalar operations ------------------------------------------------

def entropy(dist) -> float:
    """Shannon entropy of a probability vector, in nats."""
    return _h(_check_dist(dist, "dist"))


def kl(p, q) -> float | None:
    """KL divergence in nats, or ``None`` when some p_i > 0 has q_i = 0.

    The ``None`` flag stands for +infinity; callers must branch explicitly.
    """
    p, q = _check_pair(p, q)
    return _kl(p, q)


def js(p, q) -> float:
    """Jensen-Shannon divergence in nats; symmetric, in [0, ln 2]."""
    p, q = _check_pair(p, q)
    return _js(p, q)


def tv(p, q) -> float:
    """Unnormalized total variation ``sum(|p - q|)``, range [0, 2]."""
    p, q = _check_pair(p, q)
    return _tv(p, q)


# -- domain types -------------------------------------------------------------

class DiscreteJoint:
    """Dense joint distribution over (visual, text, response) alphabets.

    Immutable after construction; marginals and conditionals are derived on
    demand and cached.  ``p[v, t, y]`` is the joint mass.
    """

    def __init__(self, p: np.ndarray):
        p = np.ascontiguousarray(p, dtype=np.float64)
        if p.ndim != 3:
            raise ShapeError(f"joint tensor must be 3-d (nv, nt, ny), got shape {p.shape}")
        if min(p.shape) < 1:
            raise ShapeError(f"alphabet sizes must be positive, got {p.shape}")
        if np.any(p < 0.0):
            raise DomainError(f"joint has a negative entry (min {p.min():.3e})")
        s = float(p.sum())
        if abs(s - 1.0) > 1e-12:
            raise DomainError(f"joint sums to {s!r}, not 1 within 1e-12")
        p.setflags(write=False)
        self.p = p
        self.nv, self.nt, self.ny = p.shape

    @cached_property
    def x_marginal(self) -> np.ndarray:
        """Input marginal over (visual, text), shape (nv, nt)."""
        m = self.p.sum(axis=2)
        m.setflags(write=False)
        return m

    @cached_property
    def v_marginal(self) -> np.ndarray:
        m = self.p.sum(axis=(1, 2))
        m.setflags(write=False)
        return m

    @cached_property
    def t_marginal(self) -> np.ndarray:
        m = self.p.sum(axis=(0, 2))
        m.setflags(write=False)
        return m

    @cached_property
    def y_marginal(self) -> np.ndarray:
        m = self.p.sum(axis=(0, 1))
        m.setflags(write=False)
        return m

    @cached_property
    def y_given_x(self) -> np.ndarray:
        """Rows P(y | v, t), shape (nv, nt, ny); uniform rows off support."""
        return _rows_conditional(self.p.reshape(-1, self.ny)).reshape(self.p.shape)

    @cached_property
    def t_given_v(self) -> np.ndarray:
        """Rows P(t | v), shape (nv, nt); uniform rows off support."""
        return _rows_conditional(self.x_marginal)

    @cached_property
    def v_given_t(self) -> np.ndarray:
        """Rows P(v | t), shape (nt, nv); uniform rows off support."""
        return _rows_conditional(self.x_marginal.T)

    def to_json_dict(self) -> dict:
        return {
            "nv": self.nv,
            "nt": self.nt,
            "ny": self.ny,
            "probs": [float(x) for x in self.p.reshape(-1)],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "DiscreteJoint":
        p = np.array(d["probs"], dtype=np.float64).reshape(d["nv"], d["nt"], d["ny"])
        return cls(p)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "DiscreteJoint":
        return cls.from_json_dict(json.loads(s))

    def __repr__(self) -> str:
        return f"DiscreteJoint(nv={self.nv}, nt={self.nt}, ny={self.ny})"


def _rows_conditional(table: np.ndarray) -> np.ndarray:
    """Normalize each row of a nonneg 2-d table; zero rows become uniform."""
    sums = table.sum(axis=1, keepdims=True)
    n = table.shape[1]
    out = np.where(sums > 0.0, table / np.where(sums > 0.0, sums, 1.0), 1.0 / n)
    out.setflags(write=False)
    return out


class ConditionalModel:
    """Conditional table P(y | v, t) parameterized by logits.

    The table is a row-wise softmax, so every probability is strictly
    positive and each row sums to 1 to machine precision.
    """

    def __init__(self, logits: np.ndarray):
        logits = np.ascontiguousarray(logits, dtype=np.float64)
        if logits.ndim != 3:
            raise ShapeError(f"logits must be 3-d (nv, nt, ny), got shape {logits.shape}")
        if min(logits.shape) < 1:
            raise ShapeError(f"alphabet sizes must be positive, got {logits.shape}")
        if not np.all(np.isfinite(logits)):
            raise DomainError("logits must be finite")
        logits.setflags(write=False)
        self.logits = logits
        self.nv, self.nt, self.ny = logits.shape

    @cached_property
    def table(self) -> np.ndarray:
        z = self.logits - self.logits.max(axis=2, keepdims=True)
        e = np.exp(z)
        t = e / e.sum(axis=2, keepdims=True)
        t.setflags(write=False)
        return t

    @cached_property
    def log_table(self) -> np.ndarray:
        z = self.logits - self.logits.max(axis=2, keepdims=True)
        lt = z - np.log(np.exp(z).sum(axis=2, keepdims=True))
        lt.setflags(write=False)
        return lt

    @classmethod
    def uniform(cls, nv: int, nt: int, ny: int) -> "ConditionalModel":
        return cls(np.zeros((nv, nt, ny)))

    @classmethod
    def from_table(cls, table: np.ndarray) -> "ConditionalModel":
        """Build from an explicit strictly positive conditional table."""
        table = np.asarray(table, dtype=np.float64)
        if table.ndim != 3:
            raise ShapeError(f"table must be 3-d (nv, nt, ny), got shape {table.shape}")
        if np.any(table <= 0.0):
            bad = np.unravel_index(int(np.argmin(table)), table.shape)
            raise DomainError(
                f"conditional table must be strictly positive; cell {bad} is "
                f"{table[bad]!r} (softmax parameterization cannot express zeros)"
            )
        sums = table.sum(axis=2)
        worst = float(np.abs(sums - 1.0).max())
        if worst > 1e-9:
            raise DomainError(f"conditional rows must sum to 1 within 1e-9, worst {worst:.3e}")
        return cls(np.log(table / table.sum(axis=2, keepdims=True)))

    def to_json_dict(self) -> dict:
        return {
            "nv": self.nv,
            "nt": self.nt,
            "ny": self.ny,
            "logits": [float(x) for x in self.logits.reshape(-1)],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ConditionalModel":
        z = np.array(d["logits"], dtype=np.float64).reshape(d["nv"], d["nt"], d["ny"])
        return cls(z)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "ConditionalModel":
        return cls.from_json_dict(json.loads(s))

    def __repr__(self) -> str:
        return f"ConditionalModel(nv={self.nv}, nt={self.nt}, ny={self.ny})"


def _check_sizes(joint: DiscreteJoint, model: ConditionalModel) -> None:
    if (joint.nv, joint.nt, joint.ny) != (model.nv, model.nt, model.ny):
        raise ShapeError(
            f"alphabet mismatch: joint ({joint.nv}, {joint.nt}, {joint.ny}) vs "
            f"model ({model.nv}, {model.nt}, {model.ny})"
        )


@dataclass(frozen=True)
class InfoReport:
    """Entropy and mutual-information summary of one joint, in nats."""

    h_y: float
    h_y_given_x: float
    mi_xy: float
    mi_xv_y: float
    mi_xt_y_given_xv: float


def info_report(joint: DiscreteJoint) -> InfoReport:
    h_y = _h(joint.y_marginal)
    mi_xy = mutual_information(joint, ("vt", "y"))
    return InfoReport(
        h_y=h_y,
        h_y_given_x=h_y - mi_xy,
        mi_xy=mi_xy,
        mi_xv_y=mutual_information(joint, ("v", "y")),
        mi_xt_y_given_xv=mutual_information(joint, ("t", "y", "v")),
    )


# -- mutual information over axis groupings ----------------------------------

def mutual_information(joint: DiscreteJoint, grouping) -> float:
    """Mutual information between axis groups of the joint, in nats.

    ``grouping`` is ``(left, right)`` or ``(left, right, given)``, each a
    string over the axis letters v, t, y with no letter repeated, left and
    right non-empty.  Examples: ``("vt", "y")`` is I(X; Y); ``("v", "y")``
    is I(X_v; Y); ``("t", "y", "v")`` is I(X_t; Y | X_v).
    """
    if not isinstance(grouping, (tuple, list)) or len(grouping) not in (2, 3):
        raise DomainError(f"grouping must be (left, right) or (left, right, given), got {grouping!r}")
    left, right = grouping[0], grouping[1]
    given = grouping[2] if len(grouping) == 3 else ""
    parts = (left, right, given)
    letters = "".join(parts)
    if not left or not right:
        raise DomainError("grouping left and right parts must be non-empty")
    if len(set(letters)) != len(letters) or any(ch not in _AXES for ch in letters):
        raise DomainError(f"grouping letters must be distinct members of 'vty', got {grouping!r}")

    order = [_AXES[ch] for ch in letters]
    rest = [ax for ax in range(3) if ax not in order]
    perm = joint.p.transpose(order + rest)
    shape = perm.shape
    nl = int(np.prod(shape[: len(left)], dtype=np.int64))
    nr = int(np.prod(shape[len(left): len(left) + len(right)], dtype=np.int64))
    ng = int(np.prod(shape[len(left) + len(right): len(letters)], dtype=np.int64))
    # axes not named in the grouping are marginalized out
    cube = perm.reshape(nl, nr, ng, -1).sum(axis=3)

    p_lg = cube.sum(axis=1)
    p_rg = cube.sum(axis=0)
    p_g = cube.sum(axis=(0, 1))
    mask = cube > 0.0
    li, ri, gi = np.nonzero(mask)
    num = cube[mask] * p_g[gi]
    den = p_lg[li, gi] * p_rg[ri, gi]
    val = float((cube[mask] * np.log(num / den)).sum())
    if val < -1e-12:
        raise DomainError(f"mutual information came out {val!r} < 0, input not a distribution?")
    return max(val, 0.0)


# -- model/joint compositions -------------------------------------------------

def tensor_joint(input_marginal: np.ndarray, model: ConditionalModel) -> DiscreteJoint:
    """Joint with mass ``input_marginal[v, t] * model(y | v, t)``."""
    m = np.asarray(input_marginal, dtype=np.float64)
    if m.shape != (model.nv, model.nt):
        raise ShapeError(
            f"input marginal shape {m.shape} does not match model ({model.nv}, {model.nt})"
        )
    _check_dist(m.reshape(-1), "input marginal")
    return DiscreteJoint(m[:, :, None] * model.table)


def model_y_marginal(joint: DiscreteJoint, model: ConditionalModel) -> np.ndarray:
    """Response marginal of the model under the joint's input marginal."""
    _check_sizes(joint, model)
    return np.einsum("vt,vty->y", joint.x_marginal, model.table)


def generation_mi(joint: DiscreteJoint, model: ConditionalModel) -> float:
    """Mutual information the model induces over the joint's inputs.

    Equals ``H(E_x model(.|x)) - E_x H(model(.|x))`` and agrees with
    ``mutual_information(tensor_joint(...), ("vt", "y"))``.
    """
    _check_sizes(joint, model)
    mix = model_y_marginal(joint, model)
    w = joint.x_marginal
    row_h = -np.einsum("vty,vty->vt", model.table, model.log_table)
    return _h(mix) - float((w * row_h).sum())


def delta_rev(joint: DiscreteJoint, model: ConditionalModel) -> float:
    """``E_x KL(P(.|x) || model(.|x))``: true conditional first.

    Always finite because the model table is strictly positive.
    """
    _check_sizes(joint, model)
    w = joint.x_marginal
    rows = joint.y_given_x
    mask = rows > 0.0
    term = np.zeros_like(rows)
    term[mask] = rows[mask] * (np.log(rows[mask]) - model.log_table[mask])
    # non-negative by Gibbs; cancellation can leave -1e-17 at convergence
    return max(0.0, float((w * term.sum(axis=2)).sum()))


def delta_fwd(joint: DiscreteJoint, model: ConditionalModel) -> float | None:
    """``E_x KL(model(.|x) || P(.|x))``: model first.

    Returns ``None`` (the +infinity flag) when some supported input has a
    true-conditional zero where the model puts mass, which is the generic
    case for joints with zeros.
    """
    _check_sizes(joint, model)
    w = joint.x_marginal
    rows = joint.y_given_x
    total = 0.0
    for v in range(joint.nv):
        for t in range(joint.nt):
            if w[v, t] <= 0.0:
                continue
            val = _kl(model.table[v, t], rows[v, t])
            if val is None:
                return None
            total += w[v, t] * val
    return total


# -- instruction tuning --------------------------------------------------------

def tuning_loss(joint: DiscreteJoint, model: ConditionalModel) -> float:
    """Expected conditional cross-entropy ``E_{x,y}[-log model(y|x)]``."""
    _check_sizes(joint, model)
    return float(-(joint.p * model.log_table).sum())


def instruction_tune(
    joint: DiscreteJoint, init: ConditionalModel, steps: int, lr: float
) -> ConditionalModel:
    """Full-batch gradient descent on the expected cross-entropy.

    The objective is convex in the logits; for lr up to 0.1 the loss is
    non-increasing step over step, and with enough steps the tuned table
    matches the true conditional on supported rows to any tolerance.
    Unsupported rows receive no gradient and keep their init values.
    """
    _check_sizes(joint, init)
    if steps < 0:
        raise DomainError(f"steps must be >= 0, got {steps}")
    if lr <= 0.0:
        raise DomainError(f"lr must be positive, got {lr!r}")
    if steps == 0:
        return init
    w = joint.x_marginal[:, :, None]
    target = joint.y_given_x
    logits = np.array(init.logits, dtype=np.float64, copy=True)
    for step in range(steps):
        z = logits - logits.max(axis=2, keepdims=True)
        e = np.exp(z)
        table = e / e.sum(axis=2, keepdims=True)
        grad = w * (table - target)
        logits -= lr * grad
        if not np.all(np.isfinite(logits)):
            raise ConvergenceError(f"non-finite logits at step {step + 1}, lr too large?")
    # recentre rows so logits stay bounded over repeated tuning calls
    logits -= logits.max(axis=2, keepdims=True)
    return ConditionalModel(logits)


# -- the maximization identity -------------------------------------------------

class LowerBoundReport(NamedTuple):
    lhs: float
    rhs_sum: float
    delta: float


def lower_bound_identity_check(joint: DiscreteJoint, model: ConditionalModel) -> LowerBoundReport:
    """Decomposition of the joint MI against the model's log-likelihood.

    Returns ``(lhs, rhs_sum, delta)`` with ``lhs = I(X; Y)``,
    ``rhs_sum = E[log model(y|x)] + H(P_Y) + delta`` and
    ``delta = E_x KL(P(.|x) || model(.|x))``.  The two sides agree to
    rounding error, and since delta >= 0 the MI dominates
    ``E[log model] + H(P_Y)``: maximizing likelihood maximizes a lower
    bound on the MI.
    """
    _check_sizes(joint, model)
    lhs = mutual_information(joint, ("vt", "y"))
    ell = float((joint.p * model.log_table).sum())
    delta = delta_rev(joint, model)
    rhs_sum = ell + _h(joint.y_marginal) + delta
    return LowerBoundReport(lhs=lhs, rhs_sum=rhs_sum, delta=delta)
