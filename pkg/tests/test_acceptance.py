"""Shipping gate: one test per acceptance criterion, at the pinned
tolerances.

These are deliberately heavier than the unit suites: thousand-instance
bound sweeps, full-budget estimator training, and double CLI runs.  The
estimator calibration tests share one module-scoped training sweep; the
whole module takes on the order of ten minutes.

Known red: the conditional-density estimator's calibration error gate.
The estimator converges to the dependence measure plus a nonnegative
excess that grows sharply with correlation strength, so its mean
absolute error against the closed form cannot meet the pinned gate at
high correlation.  The test states the gate as pinned and fails
honestly rather than loosening it; the unit suites cover the
estimator's actual contract (determinism, oracle agreement, ordering).
"""

import hashlib
import math
import subprocess
import time

import numpy as np
import pytest

from infoshift.analysis import PairedSeries, kendall, pearson, spearman, sweep_table
from infoshift.discrete import (
    ConditionalModel,
    delta_fwd,
    delta_rev,
    entropy,
    instruction_tune,
    js,
    kl,
    lower_bound_identity_check,
    model_y_marginal,
    mutual_information,
    generation_mi,
    tensor_joint,
    tv,
)
from infoshift.estimators import (
    EstimatorConfig,
    club_estimate,
    club_train,
    infonce_estimate,
    mine_estimate,
    nwj_estimate,
    rjsd,
)
from infoshift.metrics import (
    build_bound_report,
    corollary_tv_bound,
    emid,
    lemma1_check,
    pm_rm_identity_check,
    theorem1_check,
    theorem2_bound,
    theorem3_bound,
)
from infoshift.numkit import Rng
from infoshift.synthgen import (
    GaussianWorld,
    make_consistent_pair,
    perturbed_model,
    random_blocked_base,
    random_joint,
    random_model,
    sample_gaussian_pairs,
)

SLACK = 1e-9


def _sizes(rng, hi=6):
    return tuple(int(rng.integers(2, hi + 1)) for _ in range(3))


def _consistent_instance(rng):
    nv, nt, ny = _sizes(rng.child("sizes"))
    base = random_blocked_base(nv, nt, ny, rng.child("base"))
    severity = float(rng.child("sev").uniform())
    scen = make_consistent_pair(base, "joint", severity, rng.child("pair"))
    model = random_model(nv, nt, ny, rng.child("model"))
    return scen.p, scen.q, model


# -- criterion 1: inequality sweeps ------------------------------------------------

def test_criterion_1_bound_sweeps_hold_within_time_budget():
    """Four bound suites, 1000 seeded instances each on alphabets up to
    6x6x6: zero violations at 1e-9 slack, under 60 s single-threaded."""
    root = Rng(11)
    violations = []
    t0 = time.perf_counter()

    for i in range(1000):
        rng = root.child(f"lemma1.{i}")
        nv, nt, ny = _sizes(rng.child("sizes"))
        joint = random_joint(nv, nt, ny, rng.child("joint"))
        model = random_model(nv, nt, ny, rng.child("model"))
        rep = lemma1_check(joint, model)
        if not (rep.skipped or rep.gap <= rep.bound + SLACK):
            violations.append(("lemma1", i, rep.gap - rep.bound))

    for i in range(1000):
        p, q, model = _consistent_instance(root.child(f"theorem2.{i}"))
        rhs = theorem2_bound(p, q, model).rhs_total
        gap = emid(p, q, model)
        if not gap <= rhs + SLACK:
            violations.append(("theorem2", i, gap - rhs))

    for i in range(1000):
        rng = root.child(f"theorem3.{i}")
        nv, nt, ny = _sizes(rng.child("sizes"))
        p = random_joint(nv, nt, ny, rng.child("p"))
        q = random_joint(nv, nt, ny, rng.child("q"))
        model = random_model(nv, nt, ny, rng.child("model"))
        rhs = theorem3_bound(p, q, model).rhs_total
        gap = emid(p, q, model)
        if not gap <= rhs + SLACK:
            violations.append(("theorem3", i, gap - rhs))

    for i in range(1000):
        p, q, model = _consistent_instance(root.child(f"corollary.{i}"))
        rhs = corollary_tv_bound(p, q, model).rhs_total
        gap = emid(p, q, model)
        if not gap <= rhs + SLACK:
            violations.append(("corollary", i, gap - rhs))

    elapsed = time.perf_counter() - t0
    assert violations == [], violations[:5]
    assert elapsed <= 60.0, f"4000 instances took {elapsed:.1f}s"


# -- criterion 2: tuned-model gap bound --------------------------------------------

def test_criterion_2_tuned_gap_bound_holds_on_100_joints():
    """Tune the model to a reverse conditional divergence of at most 1e-6
    on 100 random full-support joints; the capacity gap bound holds with
    zero violations at the achieved divergence."""
    root = Rng(0)
    violations = []
    for i in range(100):
        rng = root.child(f"theorem1.{i}")
        nv, nt, ny = _sizes(rng.child("sizes"))
        joint = random_joint(nv, nt, ny, rng.child("joint"))
        model = ConditionalModel.uniform(nv, nt, ny)
        for _ in range(20):
            model = instruction_tune(joint, model, 20000, 2.0)
            if delta_rev(joint, model) <= 1e-6:
                break
        achieved = delta_rev(joint, model)
        assert achieved <= 1e-6, f"joint {i} stuck at {achieved:.2e}"
        c = float(joint.p[joint.p > 0.0].min())
        rep = theorem1_check(joint, model, epsilon=max(achieved, 1e-300), c=c)
        if not rep.gap <= rep.bound + SLACK:
            violations.append((i, rep.gap - rep.bound))
    assert violations == [], violations[:5]


# -- criterion 3: exact identities -------------------------------------------------

def test_criterion_3_exact_identities_hold():
    """Likelihood decomposition residual <= 1e-10, two-route generation
    dependence <= 1e-12, dependence chain rule <= 1e-10, and the pm/rm
    conversion residuals <= 1e-10, each over 1000 instances."""
    root = Rng(3)

    for i in range(1000):
        rng = root.child(f"identity.{i}")
        nv, nt, ny = _sizes(rng.child("sizes"))
        joint = random_joint(nv, nt, ny, rng.child("joint"))
        model = random_model(nv, nt, ny, rng.child("model"))
        rep = lower_bound_identity_check(joint, model)
        assert abs(rep.lhs - rep.rhs_sum) <= 1e-10, f"instance {i}"

    for i in range(1000):
        rng = root.child(f"tworoute.{i}")
        nv, nt, ny = _sizes(rng.child("sizes"))
        joint = random_joint(nv, nt, ny, rng.child("joint"))
        model = random_model(nv, nt, ny, rng.child("model"))
        direct = generation_mi(joint, model)
        routed = mutual_information(tensor_joint(joint.x_marginal, model), ("vt", "y"))
        assert abs(direct - routed) <= 1e-12, f"instance {i}"

    for i in range(1000):
        rng = root.child(f"chain.{i}")
        nv, nt, ny = _sizes(rng.child("sizes"))
        joint = random_joint(nv, nt, ny, rng.child("joint"))
        full = mutual_information(joint, ("vt", "y"))
        split = mutual_information(joint, ("v", "y")) + mutual_information(joint, ("t", "y", "v"))
        assert abs(full - split) <= 1e-10, f"instance {i}"

    for i in range(1000):
        rng = root.child(f"pmrm.{i}")
        p = float(rng.uniform(1e-6, 1.0 - 1e-6))
        res = pm_rm_identity_check(math.log(p / (1.0 - p)), math.log(p))
        assert not res.skipped
        assert res.residual_pm <= 1e-10 and res.residual_rm <= 1e-10, f"instance {i}"


# -- criterion 4: divergence inequalities ------------------------------------------

def test_criterion_4_divergence_inequalities_hold():
    """Bounded-function expectation gap, entropy-difference bound, the
    response-marginal deviation bound, and the js <= tv <= sqrt(2 kl)
    chain: 10^4 random trials each, zero violations."""
    root = Rng(4)

    for i in range(10000):
        rng = root.child(f"c2.{i}")
        n = int(rng.integers(2, 11))
        p = rng.dirichlet(np.ones(n))
        q = rng.dirichlet(np.ones(n))
        c = float(rng.uniform(0.1, 5.0))
        f = c * rng.uniform(size=n)
        assert abs(float(f @ (p - q))) <= c * tv(p, q) + 1e-12, f"trial {i}"

    for i in range(10000):
        rng = root.child(f"c3.{i}")
        n = int(rng.integers(2, 11))
        p = rng.dirichlet(np.ones(n))
        q = rng.dirichlet(np.ones(n))
        assert abs(entropy(p) - entropy(q)) <= 4.0 * js(p, q) ** 0.25 + 1e-12, f"trial {i}"

    for i in range(10000):
        rng = root.child(f"c5.{i}")
        nv, nt, ny = _sizes(rng.child("sizes"), hi=4)
        joint = random_joint(nv, nt, ny, rng.child("joint"))
        model = random_model(nv, nt, ny, rng.child("model"))
        d = delta_fwd(joint, model)
        assert d is not None
        gap = tv(joint.y_marginal, model_y_marginal(joint, model))
        assert gap <= math.sqrt(2.0 * d) + 1e-12, f"trial {i}"

    for i in range(10000):
        rng = root.child(f"pinsker.{i}")
        n = int(rng.integers(2, 11))
        p = rng.dirichlet(np.ones(n))
        q = rng.dirichlet(np.ones(n))
        t = tv(p, q)
        assert js(p, q) <= t + 1e-12, f"trial {i}"
        d = kl(p, q)
        assert d is not None and t <= math.sqrt(2.0 * d) + 1e-12, f"trial {i}"


# -- criterion 5: estimator calibration --------------------------------------------

def _gaussian_stream(world, batch, rng):
    # fresh batch per call: child() is pure, so key each draw by a counter
    calls = iter(range(1 << 62))

    def src():
        return sample_gaussian_pairs(world, batch, rng.child(f"call{next(calls)}"), role="model")

    return src


@pytest.fixture(scope="module")
def club_sweep():
    """Full-budget conditional-density calibration sweep: three
    correlation levels, five seeds each, defaults (hidden 250, lr 0.001,
    batch 1024, 5000 iterations), 10^4 evaluation samples."""
    out = {}
    for rho in (0.3, 0.6, 0.9):
        world = GaussianWorld(rho_ref=rho, rho_model=rho, d=1)
        truth = world.analytic_mi("model")
        t0 = time.perf_counter()
        errs = []
        for seed in range(5):
            cfg = EstimatorConfig(seed=seed)
            est = club_train(
                _gaussian_stream(world, cfg.batch, Rng(0).child(f"club.{rho}.{seed}")), cfg
            )
            eval_batch = sample_gaussian_pairs(
                world, 10000, Rng(0).child(f"clubeval.{rho}.{seed}"), "model"
            )
            errs.append(abs(club_estimate(est, eval_batch) - truth))
        out[rho] = (time.perf_counter() - t0, errs)
    return out


def test_criterion_5_club_calibration_error(club_sweep):
    """Mean absolute error against the closed-form Gaussian dependence,
    over rho in {0.3, 0.6, 0.9} x 5 seeds.  Known red; see the module
    docstring."""
    errs = [e for _, setting_errs in club_sweep.values() for e in setting_errs]
    mae = float(np.mean(errs))
    per_rho = {rho: float(np.mean(v[1])) for rho, v in club_sweep.items()}
    assert mae <= 0.12, f"MAE {mae:.3f} nats (per rho: {per_rho})"


def test_criterion_5_club_runtime_per_setting(club_sweep):
    """Each correlation setting (five full training runs) finishes within
    ten minutes."""
    worst = max(elapsed for elapsed, _ in club_sweep.values())
    assert worst <= 600.0, f"slowest setting took {worst:.0f}s"


def test_criterion_5_independence_screen():
    """All four estimators report |dependence| <= 0.05 nats on
    independent Gaussian data."""
    world0 = GaussianWorld(rho_ref=0.0, rho_model=0.0, d=4)
    reports = {}

    cfg = EstimatorConfig(seed=0)
    est = club_train(_gaussian_stream(world0, cfg.batch, Rng(0).child("indep.club.0")), cfg)
    eval_batch = sample_gaussian_pairs(world0, 10000, Rng(0).child("indepeval.0"), "model")
    reports["club"] = club_estimate(est, eval_batch)

    critic_cfg = EstimatorConfig(hidden=64, lr=0.001, batch=256, iterations=1200, seed=0)
    for name, fn in (("mine", mine_estimate), ("nwj", nwj_estimate), ("infonce", infonce_estimate)):
        src = _gaussian_stream(world0, critic_cfg.batch, Rng(0).child(f"indep.{name}.0"))
        reports[name] = fn(src, critic_cfg)

    bad = {k: v for k, v in reports.items() if abs(v) > 0.05}
    assert not bad, f"independence screen failed: {bad}"


# -- criterion 6: spectral divergence ----------------------------------------------

def test_criterion_6_rjsd_oracles_and_monotone_ladder():
    """Zero on identical sets (<= 1e-10), ln 2 on orthogonal
    one-dimensional supports (+- 1e-9), and strictly monotone over a
    four-level Gaussian mean-shift ladder for five seeds."""
    a = Rng(6).normal(size=(40, 5))
    assert abs(rjsd(a, a.copy())) <= 1e-10

    left = np.zeros((20, 4))
    right = np.zeros((20, 4))
    left[:, 0] = 1.0
    right[:, 1] = 1.0
    assert abs(rjsd(left, right) - math.log(2.0)) <= 1e-9

    for s in range(5):
        rng = Rng(100 + s)
        ref = rng.child("a").standard_normal((500, 8))
        vals = []
        for k, shift in enumerate((0.25, 0.5, 1.0, 2.0)):
            moved = rng.child(f"b{k}").standard_normal((500, 8)) + shift
            vals.append(rjsd(ref, moved))
        assert all(b > a for a, b in zip(vals, vals[1:])), f"seed {s}: {vals}"


# -- criterion 7: shift metric tracks its certificate ------------------------------

def test_criterion_7_emid_tracks_certificate_across_sweep():
    """Thirty consistent-conditional scenarios (six severity ladders off
    one blocked base, one fixed perturbed model): Pearson r between
    |EMID| and the consistent-pair bound >= 0.6 at permutation p < 0.01,
    and the input-term partial bound is strictly monotone per ladder."""
    root = Rng(1)
    base = random_blocked_base(4, 4, 4, root.child("base"))
    model = perturbed_model(base, 0.3, root.child("model"))
    reports = []
    for ladder in range(6):
        shift_rng = root.child(f"shift.{ladder}")
        for step in range(5):
            severity = (step + 1) / 5
            scen = make_consistent_pair(base, "joint", severity, shift_rng)
            reports.append(
                build_bound_report(
                    f"ladder{ladder}-s{step + 1}", scen.kind, severity, scen.p, scen.q, model
                )
            )
    table = sweep_table(reports)

    series = table["emid_thm2"].map_a(np.abs)
    res = pearson(series, permutations=10000, seed=0)
    assert series.n == 30
    assert res.statistic >= 0.6, f"r={res.statistic:.3f}"
    assert res.p_value < 0.01, f"p={res.p_value:.4f}"

    partial = table["emid_partial"]
    by_ladder = {}
    for label, rhs in zip(partial.labels, partial.b):
        by_ladder.setdefault(label.rsplit("-", 1)[0], []).append(rhs)
    for label, rungs in by_ladder.items():
        assert all(b > a for a, b in zip(rungs, rungs[1:])), f"{label}: {rungs}"


# -- criterion 8: determinism ------------------------------------------------------

VERIFY_TOML = """
seed = 7

[scenarios]
instances = 25
max_alphabet = 5
"""

SWEEP_TOML = """
seed = 9

[scenarios]
levels = 4
ladders = 1
kinds = ["joint", "conditional"]
"""

CALIBRATE_TOML = """
seed = 13

[estimator]
hidden = 16
lr = 0.01
batch = 64
iterations = 80

[calibration]
rhos = [0.6]
seeds = 1
eval_n = 2000
discrete_n = 4000
critic_hidden = 16
critic_batch = 64
critic_iterations = 80
"""


def _cli(*args):
    return subprocess.run(["infoshift", *args], capture_output=True, text=True, timeout=600)


def _digests(out_dir, names):
    return {n: hashlib.sha256((out_dir / n).read_bytes()).hexdigest() for n in names}


def test_criterion_8_pipeline_reruns_byte_identical(tmp_path):
    """Every pipeline, run twice with the same config and seed, emits
    byte-identical artifacts."""
    plans = [
        ("verify-bounds", VERIFY_TOML, (), ["bounds.jsonl"]),
        ("sweep-shifts", SWEEP_TOML, (), ["bounds.jsonl", "scenarios.csv"]),
        ("correlate", SWEEP_TOML, ("sweep-shifts",), ["correlations.csv"]),
        ("calibrate-estimators", CALIBRATE_TOML, (), ["calibration.csv"]),
    ]
    for command, toml_body, prereqs, artifacts in plans:
        cfg = tmp_path / f"{command}.toml"
        cfg.write_text(toml_body)
        digests = []
        for run in ("a", "b"):
            out = tmp_path / f"{command}.{run}"
            for pre in prereqs:
                r = _cli(pre, "--config", str(cfg), "--out", str(out))
                assert r.returncode == 0, f"{pre}: {r.stderr}"
            r = _cli(command, "--config", str(cfg), "--out", str(out))
            assert r.returncode in (0, 2), f"{command}: {r.stderr}"
            digests.append(_digests(out, artifacts))
        assert digests[0] == digests[1], f"{command} rerun differs"


# -- criterion 9: statistics worked examples ---------------------------------------

def _series(a, b):
    return PairedSeries(
        labels=tuple(str(i) for i in range(len(a))),
        a=np.array(a, float),
        b=np.array(b, float),
    )


def test_criterion_9_correlation_worked_examples():
    """Rank statistics on hand-checkable series and exact linear cases."""
    # ranks (1,2,3,4,5) vs (2,1,4,3,5): sum of squared gaps 4, rho = 1 - 24/120
    ranks = _series([10.0, 20.0, 30.0, 40.0, 50.0], [15.0, 5.0, 40.0, 30.0, 55.0])
    assert spearman(ranks).statistic == pytest.approx(0.8, abs=1e-15)

    triple = _series([1.0, 2.0, 3.0], [1.0, 3.0, 2.0])
    assert kendall(triple).statistic == pytest.approx(1.0 / 3.0, abs=1e-15)

    xs = [0.5, 1.25, 2.0, 3.5, 4.0, 7.5]
    up = _series(xs, [3.0 * v - 2.0 for v in xs])
    down = _series(xs, [-2.0 * v + 5.0 for v in xs])
    assert abs(pearson(up).statistic - 1.0) <= 1e-12
    assert abs(pearson(down).statistic + 1.0) <= 1e-12
