"""Certified lower bounds for restricted values of tensor powers.

Given a joint distribution over components, per-component split
distributions, and a table of lower-level value pairs, the verifiers here
evaluate the laser-method counting argument in closed form and return the
resulting log2 value bound.  Three pipelines share the arithmetic:

* `verify_global`     - the general bound for a full tensor power: block
  counts from marginal entropies, a hashing-loss ratio against the
  maximum-entropy distribution with the same marginals, a compatibility
  probability for the z-split refinement, and the product of component
  values.  The bound is min(triples * x-blocks / max, z-blocks / p) * V.
* `verify_level2_nonrot` - the dedicated level-2 route that uses
  non-rotational values for the zero components and enforces the hard
  x-side <= z-side constraint instead of taking the min.
* `verify_component`  - the value of a single zero-free component from a
  three-region decomposition of its six-fold symmetrization, producing a
  new value pair for use one level higher.

Everything is evaluated in log2 space with IEEE doubles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .combinat import (
    Component,
    JointDistribution,
    MarginalDistribution,
    SplitDistribution,
    TypicalDistribution,
    average_split,
    components_at_level,
    entropy,
    level1_joint_from_marginals,
    log_multinomial,
    marginals,
    max_entropy_with_marginals,
    point_split,
    split_pairs,
    uniform_split,
)
from .errors import (
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
    ZeroMass,
)
from .values import (
    ValuePair,
    ValueTable,
    level1_value,
    level2_112_value,
    merging_value,
    optimal_112_split_mass,
    restricted_merging_value,
)

TAU_MATCH_TOL = 1e-9
SYM_TOL = 1e-9


# --------------------------------------------------------------------------
# typical distributions and compatibility probabilities
# --------------------------------------------------------------------------

def typical_distribution(
    alpha: JointDistribution, splits: Mapping[Component, SplitDistribution]
) -> TypicalDistribution:
    """Joint law of (left, right) z-children under the mix of splits.

    Picking a component by `alpha` and then a left child by its split gives
    the pair distribution gamma(k_l, k_r); its pair-sum marginal is the
    z-marginal of `alpha`.
    """
    mass: Dict[Tuple[int, int], float] = {}
    for comp, p in alpha.mass.items():
        try:
            sd = splits[comp]
        except KeyError:
            raise PreconditionUnmet(f"no split assigned to {comp}") from None
        if sd.level != alpha.level or sd.parent != comp.k:
            raise PreconditionUnmet(f"split of {comp} targets parent {sd.parent}")
        for kl, w in sd.mass.items():
            key = (kl, comp.k - kl)
            mass[key] = mass.get(key, 0.0) + p * w
    return TypicalDistribution(alpha.level, mass)


def phat_global(
    alpha: JointDistribution, splits: Mapping[Component, SplitDistribution]
) -> float:
    """log2 of the asymptotic z-child compatibility probability (<= 0).

    A typical z-child block survives the per-component split conditions
    with probability 2^(n * phat + o(n)); the log2 rate is

        H(alpha_Z) - H(gamma) + sum_{zero components} alpha * H(split)
                              + sum_k alpha(+,+,k) * H(avg split at k)

    where gamma is the typical pair law and the last sum runs over the
    merged positive components per z-index.  Zero exactly when all
    components of every z-index share one split.
    """
    _, _, mz = marginals(alpha)
    gamma = typical_distribution(alpha, splits)
    log2p = entropy(mz) - entropy(gamma)
    pos_weight: Dict[int, float] = {}
    for comp, p in alpha.mass.items():
        if comp.i == 0 or comp.j == 0:
            log2p += p * entropy(splits[comp])
        else:
            pos_weight[comp.k] = pos_weight.get(comp.k, 0.0) + p
    for k, w in pos_weight.items():
        avg = average_split(alpha, splits, k, positive_only=True)
        log2p += w * entropy(avg)
    return min(log2p, 0.0)


def _round_counts(raw: Sequence[float], total: int, *, strict: bool, what: str) -> List[int]:
    if strict:
        for x in raw:
            if abs(x - round(x)) > 1e-9:
                raise NonIntegerCounts(f"{what}: count {x!r} is not an integer")
    base = [math.floor(x + 1e-12) for x in raw]
    rem = total - sum(base)
    if rem < 0 or rem > len(raw):
        raise NonIntegerCounts(f"{what}: counts {raw} cannot reach total {total}")
    order = sorted(range(len(raw)), key=lambda t: raw[t] - base[t], reverse=True)
    for t in order[:rem]:
        base[t] += 1
    return base


def pcomp_exact_level2(
    alpha: JointDistribution,
    splits: Mapping[Component, SplitDistribution],
    n: int,
    *,
    strict: bool = False,
) -> float:
    """Exact log2 compatibility probability at finite n (level 2).

    Counts the ways a fixed typical z-child can distribute its splits over
    the positions of each z-index-2 component, relative to distributing
    them freely: a ratio of per-component split multinomials over the
    mixture multinomial.  Non-integer implied counts are rounded by largest
    remainder unless `strict` is set, in which case they raise
    NonIntegerCounts.  Converges to `phat_global`'s k=2 contribution as n
    grows when the remaining z-indices share their splits.
    """
    if alpha.level != 2:
        raise WrongLevel(f"level {alpha.level}, expected 2")
    if n <= 0:
        raise PreconditionUnmet(f"n = {n}")
    comps = [c for c in alpha.support() if c.k == 2]
    if not comps:
        raise ZeroMass("no component carries z-index 2")
    raw = [alpha.p(c) * n for c in comps]
    total_raw = sum(raw)
    total = round(total_raw)
    if strict and abs(total_raw - total) > 1e-9:
        raise NonIntegerCounts(f"z-index-2 mass times n is {total_raw!r}")
    counts = _round_counts(raw, total, strict=strict, what="component counts")

    log2p = 0.0
    mix = [0, 0, 0]
    for comp, m in zip(comps, counts):
        try:
            sd = splits[comp]
        except KeyError:
            raise PreconditionUnmet(f"no split assigned to {comp}") from None
        sraw = [sd.p(kl) * m for kl in (0, 1, 2)]
        scounts = _round_counts(sraw, m, strict=strict, what=f"splits of {comp}")
        log2p += log_multinomial(m, scounts)
        for t in range(3):
            mix[t] += scounts[t]
    log2p -= log_multinomial(total, mix)
    return log2p


# --------------------------------------------------------------------------
# global verification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VerifyReport:
    """All intermediate log2 rates of one verification run."""

    q: int
    level: int
    tau: float
    log2_x_blocks: float
    log2_y_blocks: float
    log2_z_blocks: float
    log2_triples: float
    log2_max_triples: float
    log2_compat_prob: float
    log2_value_product: float
    branch: str
    log2_bound: float
    constraint_slack: float

    @property
    def log2_hash_loss(self) -> float:
        return self.log2_triples - self.log2_max_triples

    def rows(self) -> List[Tuple[str, float]]:
        return [
            ("log2_x_blocks", self.log2_x_blocks),
            ("log2_y_blocks", self.log2_y_blocks),
            ("log2_z_blocks", self.log2_z_blocks),
            ("log2_triples", self.log2_triples),
            ("log2_max_triples", self.log2_max_triples),
            ("log2_hash_loss", self.log2_hash_loss),
            ("log2_compat_prob", self.log2_compat_prob),
            ("log2_value_product", self.log2_value_product),
            ("constraint_slack", self.constraint_slack),
            ("log2_bound", self.log2_bound),
        ]


@dataclass(frozen=True)
class GlobalParams:
    """Inputs of one global verification: distribution, splits, values."""

    q: int
    tau: float
    alpha: JointDistribution
    splits: Mapping[Component, SplitDistribution]
    values: ValueTable

    @property
    def level(self) -> int:
        return self.alpha.level

    def chosen_pairs(self) -> Dict[Component, ValuePair]:
        """Resolve the value pair each supported component verifies with.

        Checks split presence, digest-matched table entries, matching tau,
        and the mirror-mass condition for cyclic-only (sym3) values.
        """
        chosen: Dict[Component, ValuePair] = {}
        for comp in self.alpha.support():
            try:
                sd = self.splits[comp]
            except KeyError:
                raise PreconditionUnmet(f"no split assigned to {comp}") from None
            if sd.level != self.level or sd.parent != comp.k:
                raise PreconditionUnmet(
                    f"split of {comp} has parent {sd.parent} at level {sd.level}"
                )
            pair = self.values.best(comp, sd.digest())
            if pair is None:
                raise MissingLowerValue(
                    f"no value entry for {comp} with split {sd.digest()!r}"
                )
            if abs(pair.tau - self.tau) > TAU_MATCH_TOL:
                raise ParameterMismatch(
                    f"value for {comp} was derived at tau={pair.tau}, run uses {self.tau}"
                )
            chosen[comp] = pair
        for comp, pair in chosen.items():
            if pair.kind != "sym3":
                continue
            mirror = comp.swap()
            if mirror == comp:
                continue
            if abs(self.alpha.p(comp) - self.alpha.p(mirror)) > SYM_TOL:
                raise SymmetryViolated(
                    f"{comp} carries a cyclic-only value but its mirror {mirror} "
                    f"has mass {self.alpha.p(mirror)!r} != {self.alpha.p(comp)!r}"
                )
            mp = chosen.get(mirror)
            if mp is None or mp.kind != "sym3":
                raise SymmetryViolated(
                    f"{comp} carries a cyclic-only value but {mirror} does not"
                )
        return chosen


def verify_global(params: GlobalParams) -> VerifyReport:
    """Evaluate the general laser-method bound for one parameter set.

    log2 V >= min(H(alpha) + H(alpha_X) - H*, H(alpha_Z) - log2 p)
              + sum_c alpha(c) log2 V(c)

    where H* is the maximum entropy over distributions sharing the
    marginals.  At level 1 the splits are trivial: p = 1 and H* = H(alpha)
    because the marginals determine the joint distribution uniquely.
    """
    alpha = params.alpha
    mx, my, mz = marginals(alpha)
    hx, hy, hz = entropy(mx), entropy(my), entropy(mz)
    h_alpha = entropy(alpha)

    if params.level == 1:
        value_product = sum(
            p * level1_value(c, params.q, params.tau) for c, p in alpha.mass.items()
        )
        h_star = h_alpha
        log2_phat = 0.0
    else:
        chosen = params.chosen_pairs()
        value_product = sum(p * chosen[c].log2_value for c, p in alpha.mass.items())
        _, h_star = max_entropy_with_marginals(None, mx, my, mz)
        log2_phat = phat_global(alpha, params.splits)

    xy_side = h_alpha + hx - h_star
    z_side = hz - log2_phat
    branch = "xy" if xy_side <= z_side else "z"
    bound = min(xy_side, z_side) + value_product
    return VerifyReport(
        q=params.q,
        level=params.level,
        tau=params.tau,
        log2_x_blocks=hx,
        log2_y_blocks=hy,
        log2_z_blocks=hz,
        log2_triples=h_alpha,
        log2_max_triples=h_star,
        log2_compat_prob=log2_phat,
        log2_value_product=value_product,
        branch=branch,
        log2_bound=bound,
        constraint_slack=z_side - xy_side,
    )


# --------------------------------------------------------------------------
# the dedicated level-2 pipeline with non-rotational values
# --------------------------------------------------------------------------

def endpoint_split(level: int, parent: int, b: float) -> SplitDistribution:
    """Symmetric three-point split (b, 1-2b, b) around the central child."""
    if parent % 2 != 0:
        raise PreconditionUnmet(f"parent index {parent} has no central child")
    mid = parent // 2
    return SplitDistribution(level, parent, {mid - 1: b, mid: 1 - 2 * b, mid + 1: b})


def matmul_split_mass(q: int) -> float:
    """Endpoint mass 1/(q^2 + 2) maximizing the merged zero-component value."""
    return 1.0 / (q * q + 2.0)


def _family_masses(alpha: JointDistribution) -> Tuple[float, float, float, float, float]:
    """Extract (a, b, c, d, e) from a five-parameter level-2 distribution."""
    if alpha.level != 2:
        raise WrongLevel(f"level {alpha.level}, expected 2")
    groups = {
        "a": [(0, 2, 2), (2, 0, 2)],
        "b": [(2, 2, 0)],
        "c": [(1, 1, 2), (1, 2, 1), (2, 1, 1)],
        "d": [(0, 0, 4), (0, 4, 0), (4, 0, 0)],
        "e": [(0, 1, 3), (0, 3, 1), (1, 0, 3), (1, 3, 0), (3, 0, 1), (3, 1, 0)],
    }
    out = {}
    seen = set()
    for name, members in groups.items():
        vals = [alpha.p(Component(*ijk)) for ijk in members]
        if max(vals) - min(vals) > SYM_TOL:
            raise ValidationError(
                f"family masses for group {name} differ: {vals}"
            )
        out[name] = sum(vals) / len(vals)
        seen.update(Component(*ijk) for ijk in members)
    stray = [c for c in alpha.support() if c not in seen]
    if stray:
        raise ValidationError(f"distribution puts mass outside the family: {stray}")
    return out["a"], out["b"], out["c"], out["d"], out["e"]


def verify_level2_nonrot(
    alpha: JointDistribution,
    q: int,
    tau: float,
    *,
    split_a: Optional[SplitDistribution] = None,
    split_b: Optional[SplitDistribution] = None,
    enforce: bool = True,
) -> VerifyReport:
    """Level-2 bound with non-rotational zero-component values.

    The five-parameter family (a: (0,2,2)/(2,0,2), b: (2,2,0), c: the
    mixed triple, d: the doubled triple, e: the six single-double
    components) is verified with splits `split_a` on the mixed component
    and `split_b` on the zero components of z-index 2 (defaults: the value
    maximizers).  The x-side bound requires x-blocks <= z-blocks / p; with
    `enforce` the violation raises ConstraintViolated, otherwise it is
    only recorded as negative slack.
    """
    a, b, c, d, e = _family_masses(alpha)
    if split_a is None:
        split_a = endpoint_split(2, 2, optimal_112_split_mass(q, tau))
    if split_b is None:
        split_b = endpoint_split(2, 2, matmul_split_mass(q))

    ha, hb = entropy(split_a), entropy(split_b)
    wa, wb = c, 2 * a
    log2_phat = 0.0
    if wa + wb > 0:
        avg = {
            kl: (wa * split_a.p(kl) + wb * split_b.p(kl)) / (wa + wb)
            for kl in (0, 1, 2)
        }
        log2_phat = wb * hb + wa * ha - (wa + wb) * entropy(avg)
    log2_phat = min(log2_phat, 0.0)

    v112 = level2_112_value(q, tau, b=split_a.p(0)).log2_value
    vmat = restricted_merging_value(Component(0, 2, 2), split_b, q, tau).log2_value
    value_product = (
        2 * a * vmat
        + b * tau * math.log2(q * q + 2)
        + 3 * c * v112
        + 6 * e * tau * math.log2(2 * q)
    )

    mx, my, mz = marginals(alpha)
    hx, hy, hz = entropy(mx), entropy(my), entropy(mz)
    h_alpha = entropy(alpha)
    _, h_star = max_entropy_with_marginals(None, mx, my, mz)

    slack = (hz - log2_phat) - hx
    if enforce and slack < -1e-9:
        raise ConstraintViolated(
            f"x-blocks exceed z-blocks/p: log2 slack {slack:.3e}"
        )
    bound = hx + (h_alpha - h_star) + value_product
    return VerifyReport(
        q=q,
        level=2,
        tau=tau,
        log2_x_blocks=hx,
        log2_y_blocks=hy,
        log2_z_blocks=hz,
        log2_triples=h_alpha,
        log2_max_triples=h_star,
        log2_compat_prob=log2_phat,
        log2_value_product=value_product,
        branch="xy",
        log2_bound=bound,
        constraint_slack=slack,
    )


def nonrot_global_params(
    alpha: JointDistribution,
    q: int,
    tau: float,
    *,
    split_a: Optional[SplitDistribution] = None,
    split_b: Optional[SplitDistribution] = None,
) -> GlobalParams:
    """Assemble the GlobalParams equivalent of the level-2 pipeline inputs."""
    _family_masses(alpha)  # validates the shape
    if split_a is None:
        split_a = endpoint_split(2, 2, optimal_112_split_mass(q, tau))
    if split_b is None:
        split_b = endpoint_split(2, 2, matmul_split_mass(q))
    splits: Dict[Component, SplitDistribution] = {}
    values = ValueTable()
    for comp in components_at_level(2):
        if comp.k == 2 and comp.zero_count() == 1:
            sd = split_b
        elif comp == Component(1, 1, 2):
            sd = split_a
        elif comp.k in (0, 4):
            sd = point_split(2, comp.k)
        else:
            sd = uniform_split(2, comp.k)
        splits[comp] = sd
        if comp in (Component(1, 1, 2), Component(1, 2, 1), Component(2, 1, 1)):
            values.add(level2_112_value(q, tau, b=split_a.p(0), component=comp))
        elif comp.zero_count() >= 2:
            values.add(ValuePair(comp, "nonrot", tau, merging_value(comp, q, tau), sd))
        else:
            pair = restricted_merging_value(comp, sd, q, tau)
            values.add(ValuePair(comp, "nonrot", tau, pair.log2_value, sd))
    return GlobalParams(q=q, tau=tau, alpha=alpha, splits=splits, values=values)


def classic_global_params(alpha: JointDistribution, q: int, tau: float) -> GlobalParams:
    """Symmetric parameter assembly: value-maximizing splits per component."""
    return nonrot_global_params(alpha, q, tau)


# --------------------------------------------------------------------------
# component verification from a three-region decomposition
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RegionParams:
    """Inputs for the value of one zero-free component.

    The six-fold symmetrization of the component power is partitioned into
    three region pairs r = 1..3 (the x<->y mirror of each region is folded
    in by squaring).  Region r spreads the rotated shape rot^(r-1)(i, j, k)
    over its level-(l-1) children with joint law `region_alphas[r-1]`, and
    assigns every child (and its complement) a lower value pair through
    `region_values[r-1]`.
    """

    component: Component
    weights: Tuple[float, float, float]
    region_alphas: Tuple[JointDistribution, JointDistribution, JointDistribution]
    region_values: Tuple[
        Mapping[Component, ValuePair],
        Mapping[Component, ValuePair],
        Mapping[Component, ValuePair],
    ]
    target_z_splits: Optional[Sequence[Optional[SplitDistribution]]] = None

    def shape(self, r: int) -> Component:
        comp = self.component
        for _ in range(r):
            comp = comp.rotate()
        return comp


def _region_beta(alpha_r: JointDistribution, shape: Component) -> Dict[Component, float]:
    beta: Dict[Component, float] = {}
    for comp, p in alpha_r.mass.items():
        mate = comp.complement_in(shape)
        beta[comp] = beta.get(comp, 0.0) + p / 2.0
        beta[mate] = beta.get(mate, 0.0) + p / 2.0
    return beta


def _region_pair(
    values_r: Mapping[Component, ValuePair], comp: Component, tau: float
) -> ValuePair:
    pair = values_r.get(comp)
    if pair is None:
        raise MissingLowerValue(f"region value table lacks {comp}")
    if pair.z_split is None:
        raise MissingLowerValue(f"value pair for {comp} carries no split")
    if abs(pair.tau - tau) > TAU_MATCH_TOL:
        raise ParameterMismatch(
            f"value for {comp} derived at tau={pair.tau}, run uses {tau}"
        )
    return pair


def component_typical_distribution(
    alpha_r: JointDistribution,
    values_r: Mapping[Component, ValuePair],
    shape: Component,
    tau: float,
) -> TypicalDistribution:
    """Quadruple law (left z-split, complement z-split) inside one region."""
    mass: Dict[Tuple[int, int, int, int], float] = {}
    for comp, p in alpha_r.mass.items():
        mate = comp.complement_in(shape)
        sd_left = _region_pair(values_r, comp, tau).z_split
        sd_right = _region_pair(values_r, mate, tau).z_split
        for k1, w1 in sd_left.mass.items():
            for k3, w3 in sd_right.mass.items():
                key = (k1, comp.k - k1, k3, mate.k - k3)
                mass[key] = mass.get(key, 0.0) + p * w1 * w3
    return TypicalDistribution(alpha_r.level, mass)


def _region_phat(
    alpha_r: JointDistribution,
    values_r: Mapping[Component, ValuePair],
    shape: Component,
    tau: float,
) -> float:
    """log2 compatibility probability of one region (<= 0)."""
    _, _, mz = marginals(alpha_r)
    gamma = component_typical_distribution(alpha_r, values_r, shape, tau)
    log2p = entropy(mz) - entropy(gamma)
    beta = _region_beta(alpha_r, shape)
    pos: Dict[int, Dict[int, float]] = {}
    pos_w: Dict[int, float] = {}
    for comp, w in beta.items():
        sd = _region_pair(values_r, comp, tau).z_split
        if comp.i == 0 or comp.j == 0:
            log2p += 2.0 * w * entropy(sd)
        else:
            acc = pos.setdefault(comp.k, {})
            for kl, m in sd.mass.items():
                acc[kl] = acc.get(kl, 0.0) + w * m
            pos_w[comp.k] = pos_w.get(comp.k, 0.0) + w
    for k, acc in pos.items():
        total = pos_w[k]
        avg = {kl: m / total for kl, m in acc.items()}
        log2p += 2.0 * total * entropy(avg)
    return min(log2p, 0.0)


def verify_component(
    rp: RegionParams, q: int, tau: float
) -> Tuple[ValuePair, VerifyReport]:
    """Value pair of a zero-free component from its region decomposition.

    Per region r (working in the rotated coordinates): block rates from the
    marginals of the region law, a hashing-loss ratio against the maximum
    entropy with those marginals, the compatibility probability from the
    assigned lower splits, and the value product with symmetrized
    exponents 2 beta.  Region rates combine linearly with the weights; the
    x/y rate is averaged because each region is paired with its mirror.
    The output pair's z-split is the weight-mixture of the region laws'
    marginals on the original z-axis.
    """
    comp = rp.component
    if comp.zero_count() > 0:
        raise ZeroComponent(f"{comp} has a zero index; use merging instead")
    if comp.level < 2:
        raise WrongLevel("component verification needs level >= 2")
    weights = tuple(float(w) for w in rp.weights)
    if len(weights) != 3 or min(weights) < -1e-12 or abs(sum(weights) - 1.0) > 1e-9:
        raise ValidationError(f"region weights {weights} are not a distribution")

    hx_acc = hz_acc = n_acc = max_acc = phat_acc = value_acc = 0.0
    out_split: Dict[int, float] = {}
    for r in range(3):
        A = weights[r]
        shape = rp.shape(r)
        alpha_r = rp.region_alphas[r]
        values_r = rp.region_values[r]
        if alpha_r.level != comp.level - 1:
            raise WrongLevel(
                f"region {r + 1} law lives at level {alpha_r.level}, "
                f"expected {comp.level - 1}"
            )
        for c in alpha_r.support():
            mate = c.complement_in(shape)
            half = 1 << (comp.level - 1)
            if max(mate.indices()) > half:
                raise ValidationError(f"{c} does not split {shape}")

        m1, m2, m3 = marginals(alpha_r)
        # the original z-index sits on axis 3 - r of the rotated shape
        region_out = (m3, m2, m1)[r]
        if rp.target_z_splits is not None and rp.target_z_splits[r] is not None:
            target = rp.target_z_splits[r]
            for kl in set(target.mass) | set(region_out.mass):
                if abs(target.p(kl) - region_out.p(kl)) > 1e-9:
                    raise MarginMismatch(
                        f"region {r + 1} output marginal differs from its target at {kl}"
                    )
        if A == 0.0:
            continue

        beta = _region_beta(alpha_r, shape)
        vhat = sum(
            2.0 * w * _region_pair(values_r, c, tau).log2_value
            for c, w in beta.items()
        )
        _, h_star = max_entropy_with_marginals(None, m1, m2, m3)
        hx_acc += A * (entropy(m1) + entropy(m2)) / 2.0
        hz_acc += A * entropy(m3)
        n_acc += A * entropy(alpha_r)
        max_acc += A * h_star
        phat_acc += A * _region_phat(alpha_r, values_r, shape, tau)
        value_acc += A * vhat
        for kl, p in region_out.mass.items():
            out_split[kl] = out_split.get(kl, 0.0) + A * p

    xy_side = n_acc + hx_acc - max_acc
    z_side = hz_acc - phat_acc
    branch = "xy" if xy_side <= z_side else "z"
    bound = min(xy_side, z_side) + value_acc
    z_split = SplitDistribution(comp.level, comp.k, out_split)
    pair = ValuePair(comp, "sym6", tau, bound, z_split)
    report = VerifyReport(
        q=q,
        level=comp.level,
        tau=tau,
        log2_x_blocks=hx_acc,
        log2_y_blocks=hx_acc,
        log2_z_blocks=hz_acc,
        log2_triples=n_acc,
        log2_max_triples=max_acc,
        log2_compat_prob=phat_acc,
        log2_value_product=value_acc,
        branch=branch,
        log2_bound=bound,
        constraint_slack=z_side - xy_side,
    )
    return pair, report
