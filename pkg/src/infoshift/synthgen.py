"""Synthetic populations with controllable distribution shift.

Two worlds:

- Exact discrete joints for bound verification.  Shift pairs (P, Q) are
  built so the structure each bound assumes holds by construction, not by
  tolerance tuning.
- Gaussian feature clouds with analytic mutual information for estimator
  calibration.

Shift-pair geometry, which took some care to get right: an input
distribution whose support is connected (any full-support joint, any
product marginal) admits no nontrivial pair with equal P(t|v), P(v|t), and
P(y|x) on both sides; the conditional-consistency constraints propagate
equality across the whole support.  Exactly consistent pairs therefore
live on block-structured supports, where reweighting the blocks moves both
input marginals by the same divergence.  Single-modality kinds instead
keep the targeted factorization (the untargeted marginal and P(y|x) exact)
and necessarily give up consistency of the opposite cross-conditional.
``make_consistent_pair`` implements both regimes and documents which
conditionals each kind preserves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discrete import ConditionalModel, DiscreteJoint
from .errors import DomainError
from .estimators.features import SampleBatch
from .numkit import Rng

__all__ = [
    "ShiftScenario",
    "GaussianWorld",
    "random_joint",
    "random_product_base",
    "random_blocked_base",
    "random_model",
    "perturbed_model",
    "make_consistent_pair",
    "make_conditional_shift_pair",
    "severity_ladder",
    "sample_discrete",
    "sample_gaussian_pairs",
    "sample_gaussian_shared",
]


@dataclass(frozen=True)
class ShiftScenario:
    """A population pair (p, q) with a labeled shift mechanism.

    kind "visual": q shifts the visual marginal; the text marginal and
    P(y|x) and P(t|v) are preserved exactly.  kind "text" is symmetric.
    kind "joint": both input marginals shift with all conditionals
    preserved (blocked bases) or with shared per-modality targets (product
    bases).  kind "conditional": P(y|x) rows are perturbed, everything a
    consistency check inspects stays equal, so only the no-assumption
    bound applies.  severity 0 always means q is p.
    """

    kind: str
    severity: float
    p: DiscreteJoint
    q: DiscreteJoint
    seed: int


# -- random bases -----------------------------------------------------------------

def random_joint(nv: int, nt: int, ny: int, rng: Rng) -> DiscreteJoint:
    """Full-support joint drawn flat-Dirichlet over the whole tensor."""
    g = rng.dirichlet(np.ones(nv * nt * ny))
    g = g / g.sum()
    return DiscreteJoint(g.reshape(nv, nt, ny))


def _dirichlet_rows(rng: Rng, shape: tuple[int, ...]) -> np.ndarray:
    """Rows of flat-Dirichlet draws along the last axis."""
    g = -np.log(rng.uniform(size=shape))
    return g / g.sum(axis=-1, keepdims=True)


def random_product_base(nv: int, nt: int, ny: int, rng: Rng) -> DiscreteJoint:
    """Joint with independent input modalities: P_X = P_v (x) P_t."""
    pv = rng.child("pv").dirichlet(np.ones(nv))
    pt = rng.child("pt").dirichlet(np.ones(nt))
    rows = _dirichlet_rows(rng.child("y-rows"), (nv, nt, ny))
    p = np.outer(pv, pt)[:, :, None] * rows
    return DiscreteJoint(p / p.sum())


def random_blocked_base(
    nv: int, nt: int, ny: int, rng: Rng, n_blocks: int = 2
) -> DiscreteJoint:
    """Joint whose input support splits into disjoint (v, t) blocks.

    Block k owns a contiguous slice of each modality's alphabet; the
    support graph has exactly ``n_blocks`` connected components, which is
    what makes exactly consistent reweighting pairs possible.
    """
    if n_blocks < 2:
        raise DomainError(f"n_blocks must be >= 2, got {n_blocks}")
    if n_blocks > min(nv, nt):
        raise DomainError(
            f"n_blocks={n_blocks} exceeds min alphabet size {min(nv, nt)}"
        )
    v_cuts = np.linspace(0, nv, n_blocks + 1).astype(int)
    t_cuts = np.linspace(0, nt, n_blocks + 1).astype(int)
    weights = rng.child("block-weights").dirichlet(np.ones(n_blocks))
    x_mass = np.zeros((nv, nt))
    inner_rng = rng.child("block-inner")
    for k in range(n_blocks):
        vs = slice(v_cuts[k], v_cuts[k + 1])
        ts = slice(t_cuts[k], t_cuts[k + 1])
        rows = inner_rng.child(str(k)).dirichlet(
            np.ones((v_cuts[k + 1] - v_cuts[k]) * (t_cuts[k + 1] - t_cuts[k]))
        )
        x_mass[vs, ts] = weights[k] * rows.reshape(
            v_cuts[k + 1] - v_cuts[k], t_cuts[k + 1] - t_cuts[k]
        )
    rows = _dirichlet_rows(rng.child("y-rows"), (nv, nt, ny))
    p = x_mass[:, :, None] * rows
    return DiscreteJoint(p / p.sum())


def random_model(nv: int, nt: int, ny: int, rng: Rng, scale: float = 1.0) -> ConditionalModel:
    """Model with independent normal logits."""
    return ConditionalModel(rng.normal(0.0, scale, (nv, nt, ny)))


def perturbed_model(joint: DiscreteJoint, noise: float, rng: Rng) -> ConditionalModel:
    """True conditional of ``joint`` with logit noise of scale ``noise``.

    Rows of the joint off its input support are uniform before the noise.
    """
    if noise < 0.0:
        raise DomainError(f"noise must be >= 0, got {noise!r}")
    rows = joint.y_given_x
    floor = 1e-12  # keep logits finite on rows with zero cells
    logits = np.log(np.maximum(rows, floor))
    return ConditionalModel(logits + rng.normal(0.0, noise, logits.shape))


# -- shift construction -------------------------------------------------------------

def _geo_interp(w: np.ndarray, target: np.ndarray, severity: float) -> np.ndarray:
    """Geometric path from ``w`` (severity 0) toward ``target`` (severity 1).

    Exponential-family interpolation keeps support fixed and moves the
    divergence from ``w`` monotonically.  severity 0 returns ``w`` itself.
    """
    if severity == 0.0:
        return w.copy()
    lw = np.log(w)
    lt = np.log(target)
    z = np.exp((1.0 - severity) * lw + severity * lt)
    return z / z.sum()


def _check_severity(severity: float, allow_zero: bool) -> float:
    severity = float(severity)
    if math.isnan(severity) or severity < 0.0 or severity > 1.0:
        raise DomainError(f"severity must be in [0, 1], got {severity!r}")
    if severity == 0.0 and not allow_zero:
        raise DomainError("severity 0 is the identity; use the consistent generator")
    return severity


def _support_blocks(x_mass: np.ndarray) -> np.ndarray | None:
    """Connected components of the bipartite (v, t) support graph.

    Returns a component id per supported cell (-1 off support), or None
    when the support is a single component.
    """
    nv, nt = x_mass.shape
    sup = x_mass > 0.0
    v_comp = np.full(nv, -1)
    t_comp = np.full(nt, -1)
    comp = 0
    for v0 in range(nv):
        if v_comp[v0] >= 0 or not sup[v0].any():
            continue
        stack = [("v", v0)]
        v_comp[v0] = comp
        while stack:
            side, i = stack.pop()
            if side == "v":
                for t in np.nonzero(sup[i])[0]:
                    if t_comp[t] < 0:
                        t_comp[t] = comp
                        stack.append(("t", int(t)))
            else:
                for v in np.nonzero(sup[:, i])[0]:
                    if v_comp[v] < 0:
                        v_comp[v] = comp
                        stack.append(("v", int(v)))
        comp += 1
    if comp < 2:
        return None
    bid = np.where(sup, v_comp[:, None], -1)
    return bid


def _product_parts(joint: DiscreteJoint) -> tuple[np.ndarray, np.ndarray] | None:
    """(P_v, P_t) if the input marginal factorizes, else None."""
    pv = joint.v_marginal
    pt = joint.t_marginal
    if np.abs(joint.x_marginal - np.outer(pv, pt)).max() <= 1e-12:
        return pv, pt
    return None


def make_consistent_pair(
    base: DiscreteJoint, kind: str, severity: float, rng: Rng
) -> ShiftScenario:
    """Shift pair sharing the base response conditional exactly.

    Marginal targets are drawn from fixed-label child streams
    ("target-v", "target-t", "target-blocks"), so scenarios of different
    kinds built from equal-seed streams share their targets; that is what
    makes the joint kind's input shift dominate each single-modality kind
    at the same seed and severity.

    Requirements by kind: "visual" and "text" need a product-form input
    marginal; "joint" reweights support blocks when the base has at least
    two, and falls back to shifting both product factors otherwise.
    """
    if kind not in ("visual", "text", "joint"):
        raise DomainError(f"kind must be visual, text, or joint, got {kind!r}")
    severity = _check_severity(severity, allow_zero=True)
    if severity == 0.0:
        return ShiftScenario(kind=kind, severity=0.0, p=base, q=base, seed=rng.seed)

    parts = _product_parts(base)
    rows = base.y_given_x

    if kind == "joint":
        bid = _support_blocks(base.x_marginal)
        if bid is not None:
            k = int(bid.max()) + 1
            w = np.array([base.x_marginal[bid == i].sum() for i in range(k)])
            target = rng.child("target-blocks").dirichlet(np.ones(k))
            w_new = _geo_interp(w, target, severity)
            scale = np.ones_like(base.x_marginal)
            on = bid >= 0
            scale[on] = (w_new / w)[bid[on]]
            q = base.p * scale[:, :, None]
            return ShiftScenario(
                kind=kind, severity=severity, p=base,
                q=DiscreteJoint(q / q.sum()), seed=rng.seed,
            )
        if parts is None:
            raise DomainError(
                "joint-kind shift needs a blocked or product-form input marginal"
            )
        pv, pt = parts
        qv = _geo_interp(pv, rng.child("target-v").dirichlet(np.ones(base.nv)), severity)
        qt = _geo_interp(pt, rng.child("target-t").dirichlet(np.ones(base.nt)), severity)
        qx = np.outer(qv, qt)
    elif kind == "visual":
        if parts is None:
            raise DomainError("visual-kind shift needs a product-form input marginal")
        pv, pt = parts
        qv = _geo_interp(pv, rng.child("target-v").dirichlet(np.ones(base.nv)), severity)
        qx = np.outer(qv, pt)
    else:  # text
        if parts is None:
            raise DomainError("text-kind shift needs a product-form input marginal")
        pv, pt = parts
        qt = _geo_interp(pt, rng.child("target-t").dirichlet(np.ones(base.nt)), severity)
        qx = np.outer(pv, qt)

    q = qx[:, :, None] * rows
    return ShiftScenario(
        kind=kind, severity=severity, p=base, q=DiscreteJoint(q / q.sum()), seed=rng.seed
    )


def make_conditional_shift_pair(
    base: DiscreteJoint, severity: float, rng: Rng
) -> ShiftScenario:
    """Pair differing only in the response conditional.

    The input marginal is shared bitwise; each P(y|x) row moves along a
    geometric path toward its own random target row.  Requires full-support
    response rows on supported inputs (log-space interpolation).
    """
    severity = _check_severity(severity, allow_zero=False)
    rows = base.y_given_x
    supported = base.x_marginal > 0.0
    if np.any((rows[supported] <= 0.0)):
        raise DomainError(
            "conditional shift needs full-support response rows on supported inputs"
        )
    targets = _dirichlet_rows(rng.child("target-y"), rows.shape)
    z = np.exp((1.0 - severity) * np.log(rows) + severity * np.log(targets))
    q_rows = z / z.sum(axis=2, keepdims=True)
    q = base.x_marginal[:, :, None] * q_rows
    return ShiftScenario(
        kind="conditional", severity=severity, p=base,
        q=DiscreteJoint(q / q.sum()), seed=rng.seed,
    )


def severity_ladder(
    kind: str,
    levels: int,
    rng: Rng,
    nv: int = 4,
    nt: int = 4,
    ny: int = 4,
    n_blocks: int = 2,
) -> list[ShiftScenario]:
    """Ordered scenarios at severities 1/levels, 2/levels, ..., 1.

    One base joint is drawn from the stream and shared by every rung, and
    every rung reuses the same target stream, so the ladder moves along a
    single geometric path at increasing exponent.
    """
    if levels < 2:
        raise DomainError(f"levels must be >= 2, got {levels}")
    if kind == "conditional":
        base = random_joint(nv, nt, ny, rng.child("base"))
        build = lambda s: make_conditional_shift_pair(base, s, rng.child("shift"))
    elif kind == "joint":
        base = random_blocked_base(nv, nt, ny, rng.child("base"), n_blocks=n_blocks)
        build = lambda s: make_consistent_pair(base, kind, s, rng.child("shift"))
    elif kind in ("visual", "text"):
        base = random_product_base(nv, nt, ny, rng.child("base"))
        build = lambda s: make_consistent_pair(base, kind, s, rng.child("shift"))
    else:
        raise DomainError(f"unknown ladder kind {kind!r}")
    return [build((i + 1) / levels) for i in range(levels)]


# -- sampling bridges ------------------------------------------------------------------

def sample_discrete(joint: DiscreteJoint, n: int, rng: Rng) -> np.ndarray:
    """(n, 3) array of (v, t, y) index triples drawn i.i.d. from the joint."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    cum = np.cumsum(joint.p.reshape(-1))
    u = rng.uniform(size=n)
    flat = np.searchsorted(cum, u, side="right")
    flat = np.minimum(flat, joint.p.size - 1)
    v, t, y = np.unravel_index(flat, joint.p.shape)
    return np.stack([v, t, y], axis=1).astype(np.int64)


@dataclass(frozen=True)
class GaussianWorld:
    """Correlated Gaussian pairs with closed-form mutual information.

    Each response dimension couples to its own input dimension with the
    role's correlation; MI is ``-d/2 * ln(1 - rho^2)`` nats.  ``mean_shift``
    offsets the reference role's response mean, giving the divergence
    estimators something nonzero to detect.
    """

    rho_ref: float
    rho_model: float
    d: int = 1
    mean_shift: float = 0.0

    def __post_init__(self):
        for name in ("rho_ref", "rho_model"):
            rho = getattr(self, name)
            if not abs(rho) < 1.0:
                raise DomainError(f"{name} must satisfy |rho| < 1, got {rho!r}")
        if self.d < 1:
            raise DomainError(f"d must be >= 1, got {self.d}")

    def analytic_mi(self, role: str = "model") -> float:
        rho = self._rho(role)
        return -0.5 * self.d * math.log(1.0 - rho * rho)

    def _rho(self, role: str) -> float:
        if role == "model":
            return self.rho_model
        if role == "ref":
            return self.rho_ref
        raise DomainError(f"role must be 'model' or 'ref', got {role!r}")


def _gaussian_y(x: np.ndarray, rho: float, rng: Rng) -> np.ndarray:
    return rho * x + math.sqrt(1.0 - rho * rho) * rng.standard_normal(x.shape)


def sample_gaussian_pairs(
    world: GaussianWorld, n: int, rng: Rng, role: str = "model"
) -> SampleBatch:
    """Batch of (x, y) pairs at the role's correlation; fresh inputs.

    The reference role additionally shifts the response mean by
    ``world.mean_shift``.  ``meta['analytic_mi']`` carries the exact MI.
    """
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    rho = world._rho(role)
    x = rng.child("x").standard_normal((n, world.d))
    y = _gaussian_y(x, rho, rng.child("y"))
    if role == "ref":
        y = y + world.mean_shift
    return SampleBatch(
        x=x, y=y,
        meta={"analytic_mi": world.analytic_mi(role), "rho": rho, "role": role},
    )


def sample_gaussian_shared(
    world: GaussianWorld, n: int, rng: Rng
) -> tuple[SampleBatch, SampleBatch]:
    """Model and reference batches conditioned on the same inputs.

    This is the sampled analogue of evaluating two conditionals on one
    population of queries, which is what a sample-based EMI needs.
    """
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    x = rng.child("x").standard_normal((n, world.d))
    y_model = _gaussian_y(x, world.rho_model, rng.child("y-model"))
    y_ref = _gaussian_y(x, world.rho_ref, rng.child("y-ref")) + world.mean_shift
    model = SampleBatch(
        x=x, y=y_model,
        meta={"analytic_mi": world.analytic_mi("model"), "rho": world.rho_model, "role": "model"},
    )
    ref = SampleBatch(
        x=x, y=y_ref,
        meta={"analytic_mi": world.analytic_mi("ref"), "rho": world.rho_ref, "role": "ref"},
    )
    return model, ref
