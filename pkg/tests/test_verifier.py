"""Verifier tests: frozen reference rates, exact counting oracles, and
cross-formula identities between the three pipelines."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cwbound.combinat import (
    Component,
    JointDistribution,
    SplitDistribution,
    entropy,
    marginals,
    point_split,
    uniform_split,
)
from cwbound.errors import (
    ConstraintViolated,
    MarginMismatch,
    MissingLowerValue,
    NonIntegerCounts,
    ParameterMismatch,
    PreconditionUnmet,
    SymmetryViolated,
    ValidationError,
    WrongLevel,
    ZeroComponent,
)
from cwbound.values import (
    ValuePair,
    level1_value_map,
    level2_112_value,
    optimal_112_split_mass,
    symhash_value_pair,
)
from cwbound.verifier import (
    GlobalParams,
    RegionParams,
    classic_global_params,
    endpoint_split,
    matmul_split_mass,
    nonrot_global_params,
    pcomp_exact_level2,
    phat_global,
    typical_distribution,
    verify_component,
    verify_global,
    verify_level2_nonrot,
)

from helpers import (
    CLASSIC_Q6,
    NONROT_Q6,
    classic_joint,
    level1_joint,
    maxent_entropy_oracle,
    nonrot_joint,
    table1_global_params,
)

Q = 6
# targets: a power-of-two tensor power of rank budget (q + 2)^m certifies
# the exponent bound 3 tau once the verified rate reaches m * log2(q + 2)
LEVEL1_TARGET = math.log2(Q + 2)
LEVEL2_TARGET = 2 * math.log2(Q + 2)


def nonrot_alpha():
    return nonrot_joint(**NONROT_Q6)


# --------------------------------------------------------------------------
# reference asymmetric run: frozen intermediate rates
# --------------------------------------------------------------------------

class TestNonrotReference:
    TAU0 = 2.375234 / 3.0

    def report(self, tau=TAU0):
        return verify_level2_nonrot(nonrot_alpha(), Q, tau)

    def test_x_block_rate(self):
        r = self.report()
        assert 2.0 ** r.log2_x_blocks == pytest.approx(2.9595937152, rel=1e-6)

    def test_z_block_rate(self):
        r = self.report()
        assert 2.0 ** r.log2_z_blocks == pytest.approx(2.9570775659, rel=1e-6)

    def test_compat_rate(self):
        r = self.report()
        assert 2.0 ** (-r.log2_compat_prob) == pytest.approx(1.0008517216, rel=1e-6)

    def test_hash_loss_deficit(self):
        r = self.report()
        deficit = 1.0 - 2.0 ** r.log2_hash_loss
        assert deficit == pytest.approx(2.49e-7, abs=5e-8)

    def test_constraint_satisfied(self):
        r = self.report()
        assert r.constraint_slack >= 0.0

    def test_bound_certifies_target(self):
        assert self.report().log2_bound >= LEVEL2_TARGET
        # and the certificate is not slack: a slightly smaller tau fails
        low = verify_level2_nonrot(nonrot_alpha(), Q, 2.3752 / 3.0)
        assert low.log2_bound < LEVEL2_TARGET

    def test_matches_global_pipeline(self):
        r = self.report()
        g = verify_global(nonrot_global_params(nonrot_alpha(), Q, self.TAU0))
        assert g.branch == "xy"
        assert g.log2_bound == pytest.approx(r.log2_bound, abs=1e-12)
        assert g.log2_compat_prob == pytest.approx(r.log2_compat_prob, abs=1e-12)
        assert g.log2_max_triples == pytest.approx(r.log2_max_triples, abs=1e-12)

    def test_maxent_against_dual_oracle(self):
        r = self.report()
        mx, my, mz = marginals(nonrot_alpha())
        h = maxent_entropy_oracle(
            [Component(i, j, 4 - i - j) for i in range(5) for j in range(5 - i)],
            dict(mx.mass), dict(my.mass), dict(mz.mass),
        )
        assert r.log2_max_triples == pytest.approx(h, abs=1e-9)


# --------------------------------------------------------------------------
# classic symmetric run and level-1 run
# --------------------------------------------------------------------------

def test_classic_symmetric_bound():
    alpha = classic_joint(**CLASSIC_Q6)
    hi = verify_global(classic_global_params(alpha, Q, (2.375477 + 1e-4) / 3.0))
    assert hi.log2_bound >= LEVEL2_TARGET
    lo = verify_global(classic_global_params(alpha, Q, (2.375477 - 1e-3) / 3.0))
    assert lo.log2_bound < LEVEL2_TARGET
    # symmetric marginals make the x side the binding one
    assert hi.branch == "xy"
    assert hi.constraint_slack >= 0.0


def test_level1_bound_and_closed_form():
    alpha = level1_joint(b=0.016)
    tau = 2.38719 / 3.0
    params = GlobalParams(q=Q, tau=tau, alpha=alpha, splits={}, values=None)
    r = verify_global(params)
    assert r.log2_bound >= LEVEL1_TARGET
    assert r.log2_hash_loss == 0.0
    assert r.log2_compat_prob == 0.0
    # closed form: x-block rate plus the mixed-mass value product
    a = 1.0 / 3.0 - 0.016
    hx = -((a + 2 * 0.016) * math.log2(a + 2 * 0.016)
           + 2 * a * math.log2(2 * a) + 0.016 * math.log2(0.016))
    assert r.log2_bound == pytest.approx(hx + 3 * a * tau * math.log2(Q), abs=1e-12)

    low = verify_global(GlobalParams(q=Q, tau=2.3865 / 3.0, alpha=alpha,
                                     splits={}, values=None))
    assert low.log2_bound < LEVEL1_TARGET


# --------------------------------------------------------------------------
# reference asymmetric distribution (swap-symmetric, not rotation-symmetric)
# --------------------------------------------------------------------------

def test_table_reference_certifies_its_exponent():
    omega = 2.374631
    hi = verify_global(table1_global_params((omega + 1e-5) / 3.0))
    assert hi.log2_bound >= LEVEL2_TARGET
    lo = verify_global(table1_global_params((omega - 1e-5) / 3.0))
    assert lo.log2_bound < LEVEL2_TARGET


def test_table_reference_needs_mirror_symmetry():
    params = table1_global_params(2.374631 / 3.0)
    mass = {c: p for c, p in params.alpha.mass.items()}
    delta = 0.01
    mass[Component(1, 2, 1)] += delta
    mass[Component(2, 1, 1)] -= delta
    skew = GlobalParams(
        q=params.q, tau=params.tau,
        alpha=JointDistribution(2, mass),
        splits=params.splits, values=params.values,
    )
    with pytest.raises(SymmetryViolated):
        verify_global(skew)


def test_value_entries_must_match_tau_and_split():
    params = table1_global_params(2.374631 / 3.0)
    stale = GlobalParams(q=params.q, tau=params.tau + 1e-4,
                         alpha=params.alpha, splits=params.splits,
                         values=params.values)
    with pytest.raises(ParameterMismatch):
        verify_global(stale)

    splits = dict(params.splits)
    splits[Component(0, 2, 2)] = endpoint_split(2, 2, 0.05)
    rekeyed = GlobalParams(q=params.q, tau=params.tau, alpha=params.alpha,
                           splits=splits, values=params.values)
    with pytest.raises(MissingLowerValue):
        verify_global(rekeyed)

    missing = dict(params.splits)
    del missing[Component(0, 2, 2)]
    with pytest.raises(PreconditionUnmet):
        verify_global(GlobalParams(q=params.q, tau=params.tau,
                                   alpha=params.alpha, splits=missing,
                                   values=params.values))


# --------------------------------------------------------------------------
# compatibility probability: closed form, exact counts, convergence
# --------------------------------------------------------------------------

def test_phat_zero_when_splits_agree_per_index():
    alpha = nonrot_alpha()
    params = nonrot_global_params(alpha, Q, 0.79)
    shared = dict(params.splits)
    sa = endpoint_split(2, 2, 0.1)
    for comp in alpha.support():
        if comp.k == 2:
            shared[comp] = sa
    assert phat_global(alpha, shared) == pytest.approx(0.0, abs=1e-12)


def test_phat_matches_two_split_closed_form():
    alpha = nonrot_alpha()
    tau = 2.375234 / 3.0
    params = nonrot_global_params(alpha, Q, tau)
    a, c = NONROT_Q6["a"], NONROT_Q6["c"]
    sa = endpoint_split(2, 2, optimal_112_split_mass(Q, tau))
    sb = endpoint_split(2, 2, matmul_split_mass(Q))
    avg = {kl: (2 * a * sb.p(kl) + c * sa.p(kl)) / (2 * a + c) for kl in (0, 1, 2)}
    expect = 2 * a * entropy(sb) + c * entropy(sa) - (2 * a + c) * entropy(avg)
    assert phat_global(alpha, params.splits) == pytest.approx(expect, abs=1e-12)


def test_typical_distribution_pair_sums():
    alpha = nonrot_alpha()
    params = nonrot_global_params(alpha, Q, 0.79)
    gamma = typical_distribution(alpha, params.splits)
    mz = marginals(alpha)[2]
    sums = {}
    for (kl, kr), p in gamma.mass.items():
        sums[kl + kr] = sums.get(kl + kr, 0.0) + p
    for k in set(sums) | set(mz.mass):
        assert sums.get(k, 0.0) == pytest.approx(mz.p(k), abs=1e-12)


def test_pcomp_exact_against_integer_oracle():
    # five components at mass 1/5 each; n = 40 makes every count integral
    alpha = JointDistribution(2, {
        Component(0, 2, 2): 0.2, Component(2, 0, 2): 0.2,
        Component(1, 1, 2): 0.2, Component(2, 2, 0): 0.2,
        Component(0, 0, 4): 0.2,
    })
    splits = {
        Component(0, 2, 2): SplitDistribution(2, 2, {0: 0.25, 1: 0.5, 2: 0.25}),
        Component(2, 0, 2): SplitDistribution(2, 2, {0: 0.25, 1: 0.5, 2: 0.25}),
        Component(1, 1, 2): SplitDistribution(2, 2, {0: 0.5, 2: 0.5}),
        Component(2, 2, 0): point_split(2, 0),
        Component(0, 0, 4): point_split(2, 4),
    }
    got = pcomp_exact_level2(alpha, splits, 40, strict=True)
    # per-component split counts (2,4,2), (2,4,2), (4,0,4); mixture (8,8,8)
    def multinom(n, parts):
        out = math.factorial(n)
        for p in parts:
            out //= math.factorial(p)
        return out
    exact = (multinom(8, (2, 4, 2)) ** 2 * multinom(8, (4, 0, 4))) \
        / multinom(24, (8, 8, 8))
    assert got == pytest.approx(math.log2(exact), abs=1e-12)
    assert 2.0 ** got == pytest.approx(1.3045e-3, rel=1e-3)

    with pytest.raises(NonIntegerCounts):
        pcomp_exact_level2(alpha, splits, 39, strict=True)
    # non-strict rounding still produces a defensible probability
    assert pcomp_exact_level2(alpha, splits, 39) < 0.0


def test_pcomp_rate_converges_to_phat():
    # the exact count carries a Stirling correction of order log(n)/n, so
    # the gap at n = 1e5 is ~1.4e-4 and drops below 1e-4 by n = 1e6
    alpha = nonrot_alpha()
    tau = 2.375234 / 3.0
    params = nonrot_global_params(alpha, Q, tau)
    phat = phat_global(alpha, params.splits)
    gaps = []
    for n in (10_000, 100_000, 1_000_000):
        rate = pcomp_exact_level2(alpha, params.splits, n) / n
        gaps.append(abs(2.0 ** rate - 2.0 ** phat))
    assert gaps[2] < 1e-4
    assert gaps[0] > gaps[1] > gaps[2]


def test_constraint_violation_detected():
    alpha = nonrot_joint(a=0.2, b=0.0, c=0.15, d=0.01, e=0.02)
    with pytest.raises(ConstraintViolated):
        verify_level2_nonrot(alpha, Q, 0.79)
    r = verify_level2_nonrot(alpha, Q, 0.79, enforce=False)
    assert r.constraint_slack < 0.0


# --------------------------------------------------------------------------
# property tests over the five-parameter family
# --------------------------------------------------------------------------

@st.composite
def family_joints(draw):
    raw = [draw(st.floats(0.01, 1.0)) for _ in range(5)]
    total = sum(raw)
    w = [r / total for r in raw]
    return nonrot_joint(a=w[0] / 2, b=w[1], c=w[2] / 3, d=w[3] / 3, e=w[4] / 6)


@settings(max_examples=30, deadline=None)
@given(family_joints())
def test_family_rate_identities(alpha):
    r = verify_level2_nonrot(alpha, Q, 0.79, enforce=False)
    assert r.log2_hash_loss <= 1e-12
    assert r.log2_compat_prob <= 0.0
    g = verify_global(nonrot_global_params(alpha, Q, 0.79))
    xy_bound = r.log2_bound
    z_bound = (r.log2_z_blocks - r.log2_compat_prob) + r.log2_value_product
    assert g.log2_bound == pytest.approx(min(xy_bound, z_bound), abs=1e-9)
    # the global slack compares min-branches, so it also carries the
    # hashing loss; the dedicated pipeline's slack compares raw block rates
    hash_loss = r.log2_max_triples - r.log2_triples
    assert g.constraint_slack == pytest.approx(r.constraint_slack + hash_loss,
                                               abs=1e-9)


# --------------------------------------------------------------------------
# component verification
# --------------------------------------------------------------------------

def region_tables(tau):
    vals = level1_value_map(Q, tau)
    splits = {}
    for c in vals:
        if c.k == 1:
            splits[c] = uniform_split(1, 1)
        else:
            splits[c] = point_split(1, c.k)
    return {c: ValuePair(c, "nonrot", tau, vals[c], splits[c]) for c in vals}


def rotated_law(law, times):
    mass = dict(law.mass)
    for _ in range(times):
        mass = {c.rotate(): p for c, p in mass.items()}
    return JointDistribution(law.level, mass)


def mixed_region_params(s, t, u, tau):
    """Three rotated copies of one swap-symmetric law over the children
    of the mixed level-2 component, with shared lower pairs."""
    base = JointDistribution(1, {
        Component(0, 1, 1): s, Component(1, 0, 1): s,
        Component(1, 1, 0): t, Component(0, 0, 2): u,
    })
    table = region_tables(tau)
    return RegionParams(
        component=Component(1, 1, 2),
        weights=(1 / 3, 1 / 3, 1 / 3),
        region_alphas=(base, rotated_law(base, 1), rotated_law(base, 2)),
        region_values=(table, table, table),
    ), base


def test_component_collapses_to_symmetric_hashing():
    tau = 0.7917
    rp, base = mixed_region_params(0.3, 0.25, 0.15, tau)
    pair, report = verify_component(rp, Q, tau)
    sym = symhash_value_pair(Component(1, 1, 2), base, level1_value_map(Q, tau), tau)
    assert pair.log2_value == pytest.approx(sym.log2_value, abs=1e-9)
    assert pair.z_split.digest() == sym.z_split.digest()
    assert report.log2_compat_prob == pytest.approx(0.0, abs=1e-12)
    # marginals determine level-1 joints, so no hashing loss either
    assert report.log2_hash_loss == pytest.approx(0.0, abs=1e-12)


def test_component_reproduces_mixed_value_family():
    tau = 0.791744
    for bp in (0.05, optimal_112_split_mass(Q, tau)):
        s = (1 - 2 * bp) / 2
        rp, _ = mixed_region_params(s, bp, bp, tau)
        pair, _ = verify_component(rp, Q, tau)
        want = level2_112_value(Q, tau, b=bp).log2_value
        assert pair.log2_value == pytest.approx(want, abs=1e-9)


def test_component_margin_targets():
    tau = 0.7917
    rp, base = mixed_region_params(0.3, 0.25, 0.15, tau)
    mz = marginals(base)[2]
    good = RegionParams(
        component=rp.component, weights=rp.weights,
        region_alphas=rp.region_alphas, region_values=rp.region_values,
        target_z_splits=(SplitDistribution(2, 2, dict(mz.mass)), None, None),
    )
    verify_component(good, Q, tau)
    bad = RegionParams(
        component=rp.component, weights=rp.weights,
        region_alphas=rp.region_alphas, region_values=rp.region_values,
        target_z_splits=(SplitDistribution(2, 2, {0: 0.5, 2: 0.5}), None, None),
    )
    with pytest.raises(MarginMismatch):
        verify_component(bad, Q, tau)


def test_component_input_validation():
    tau = 0.7917
    rp, _ = mixed_region_params(0.3, 0.25, 0.15, tau)
    with pytest.raises(ZeroComponent):
        verify_component(
            RegionParams(Component(0, 2, 2), rp.weights, rp.region_alphas,
                         rp.region_values), Q, tau)
    with pytest.raises(ValidationError):
        verify_component(
            RegionParams(rp.component, (0.5, 0.5, 0.5), rp.region_alphas,
                         rp.region_values), Q, tau)
    with pytest.raises(MissingLowerValue):
        empty = ({}, {}, {})
        verify_component(
            RegionParams(rp.component, rp.weights, rp.region_alphas, empty),
            Q, tau)
    stale = tuple(
        {c: ValuePair(c, p.kind, tau + 1e-3, p.log2_value, p.z_split)
         for c, p in table.items()}
        for table in rp.region_values
    )
    with pytest.raises(ParameterMismatch):
        verify_component(
            RegionParams(rp.component, rp.weights, rp.region_alphas, stale),
            Q, tau)
    with pytest.raises(WrongLevel):
        level2_laws = (
            nonrot_alpha(), rotated_law(nonrot_alpha(), 1),
            rotated_law(nonrot_alpha(), 2),
        )
        verify_component(
            RegionParams(rp.component, rp.weights, level2_laws,
                         rp.region_values), Q, tau)
