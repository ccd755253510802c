"""Search routines that push the certified exponent down.

Three layers, one per structural knob of the bound: scalar search on the
symmetric level-1 family, exponentiated-gradient ascent on component
distributions (globally and inside the region decomposition of a single
component), and an outer driver that assembles value tables level by level
and re-certifies every candidate through the verifier.  Nothing in here is
trusted: each optimizer returns parameters whose bound was recomputed by
`verify_global` / `verify_component`, and `reverify` replays a finished
pipeline from its recorded inputs.
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .combinat import (
    Component,
    JointDistribution,
    SplitDistribution,
    components_at_level,
    entropy,
    marginals,
    max_entropy_with_marginals,
    point_split,
    split_pairs,
    uniform_split,
)
from .errors import (
    MissingLowerValue,
    NoFeasibleTau,
    OutOfRange,
    ValidationError,
    ZeroComponent,
)
from .omega import TAU_MAX, OmegaResult, certify_at_tau, omega_from_value
from .values import (
    ValuePair,
    ValueTable,
    best_merging_split,
    level1_value_map,
    level2_112_value,
    optimal_112_split_mass,
    restricted_merging_value,
)
from .verifier import (
    GlobalParams,
    RegionParams,
    VerifyReport,
    endpoint_split,
    matmul_split_mass,
    nonrot_global_params,
    verify_component,
    verify_global,
)

_INV_LN2 = 1.0 / math.log(2.0)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
REVERIFY_TOL = 1e-9


def softmin_bound(
    left: float, right: float, tie_tol: float = 1e-9
) -> Tuple[float, Tuple[float, float]]:
    """min(left, right) plus supergradient weights for the two branches.

    Away from a tie the active branch gets weight one.  On a tie any convex
    combination is a valid supergradient; (2/3, 1/3) favors the left (x/y)
    branch, which carries two of the three axis rates.
    """
    if left < right - tie_tol:
        return left, (1.0, 0.0)
    if right < left - tie_tol:
        return right, (0.0, 1.0)
    return min(left, right), (2.0 / 3.0, 1.0 / 3.0)


def _h_and_grad(p: np.ndarray) -> Tuple[float, np.ndarray]:
    # entropy in bits and its gradient, zero-safe
    safe = np.maximum(p, 1e-300)
    logs = np.log2(safe)
    return float(-(p * logs).sum()), -(logs + _INV_LN2)


def _golden_min(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    tol: float = 1e-8,
    max_iter: int = 120,
) -> Tuple[float, float]:
    a, b = float(lo), float(hi)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    return (c, fc) if fc <= fd else (d, fd)


def _mirror_ascent(
    fn_grad: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    x0: Sequence[float],
    *,
    max_steps: int = 400,
    step0: float = 0.5,
    min_step: float = 1e-12,
    tol: float = 1e-13,
    stall_limit: int = 12,
    blocks: Optional[Sequence[slice]] = None,
) -> Tuple[np.ndarray, float]:
    """Maximize a concave function on the simplex by exponentiated gradient.

    Multiplicative updates keep the iterate strictly positive, so entropy
    gradients stay finite; the step grows on accepted moves and halves on
    rejected ones.  With `blocks` the vector is a product of simplices and
    each slice is renormalized separately.
    """
    spans = [slice(0, len(x0))] if blocks is None else list(blocks)
    x = np.maximum(np.asarray(x0, dtype=float), 1e-12)
    for b in spans:
        x[b] = x[b] / x[b].sum()
    best, grad = fn_grad(x)
    eta = step0
    stall = 0
    for _ in range(max_steps):
        logs = np.log(x) + eta * grad
        cand = np.empty_like(x)
        for b in spans:
            piece = np.exp(logs[b] - logs[b].max())
            cand[b] = piece / piece.sum()
        val, g = fn_grad(cand)
        if val > best:
            stall = stall + 1 if val - best < tol else 0
            x, best, grad = cand, val, g
            eta = min(eta * 1.3, 50.0)
            if stall >= stall_limit:
                break
        else:
            eta *= 0.5
            if eta < min_step:
                break
    return x, best


# --------------------------------------------------------------------------
# level 1: one scalar knob
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Level1Result:
    q: int
    doubled_mass: float
    omega: float
    tau: float
    alpha: JointDistribution
    report: VerifyReport


def _level1_joint(doubled: float) -> JointDistribution:
    mixed = 1.0 / 3.0 - doubled
    mass = {
        c: (doubled if c.zero_count() == 2 else mixed)
        for c in components_at_level(1)
    }
    return JointDistribution(1, mass)


def _level1_params(q: int, tau: float, doubled: float) -> GlobalParams:
    # level-1 verification reads neither splits nor the value table
    return GlobalParams(q=q, tau=tau, alpha=_level1_joint(doubled), splits={}, values=ValueTable())


def optimize_level1(q: int, *, tol: float = 1e-8) -> Level1Result:
    """Best symmetric level-1 distribution by scalar search.

    The family has one free parameter, the mass on each doubled component;
    the exponent is quasiconvex in it, so golden-section search finds the
    optimum.  Every probe is a full bisection against the verified bound.
    """
    if q < 1:
        raise OutOfRange(f"q = {q}")

    def omega_of(doubled: float) -> float:
        fn = lambda t: verify_global(_level1_params(q, t, doubled)).log2_bound
        try:
            return omega_from_value(fn, 1, q).omega
        except NoFeasibleTau:
            # near-degenerate corners of the family certify nothing
            return 3.0

    doubled, _ = _golden_min(omega_of, 1e-6, 1.0 / 3.0 - 1e-6, tol=tol)
    res = omega_from_value(
        lambda t: verify_global(_level1_params(q, t, doubled)).log2_bound, 1, q
    )
    report = verify_global(_level1_params(q, res.tau, doubled))
    return Level1Result(q, doubled, res.omega, res.tau, _level1_joint(doubled), report)


# --------------------------------------------------------------------------
# level 2: the five-group family
# --------------------------------------------------------------------------

_FAMILY_GROUPS: Tuple[Tuple[Component, ...], ...] = (
    (Component(0, 2, 2), Component(2, 0, 2)),
    (Component(2, 2, 0),),
    (Component(1, 1, 2), Component(1, 2, 1), Component(2, 1, 1)),
    (Component(0, 0, 4), Component(0, 4, 0), Component(4, 0, 0)),
    (
        Component(0, 1, 3),
        Component(0, 3, 1),
        Component(1, 0, 3),
        Component(1, 3, 0),
        Component(3, 0, 1),
        Component(3, 1, 0),
    ),
)


def _expand_family(u: Sequence[float]) -> JointDistribution:
    mass: Dict[Component, float] = {}
    for w, group in zip(u, _FAMILY_GROUPS):
        share = float(w) / len(group)
        for comp in group:
            mass[comp] = share
    return JointDistribution(2, mass)


def _axis_matrix(comps: Sequence[Component], axis: int, level: int) -> np.ndarray:
    bins = (1 << level) + 1
    mat = np.zeros((bins, len(comps)))
    for idx, c in enumerate(comps):
        mat[c.indices()[axis], idx] = 1.0
    return mat


class _RateModel:
    """Concave lower model of a verified rate, tight at the last refit.

    Branch pieces over a distribution vector `a`:

        xy(a) = H(a) + sum_i w_i H(M_i a) - [maxent tangent](a)
        z(a)  = H(P a) - lin . a - [mixed-split tangent](a)

    plus the linear value term v . a.  The maximum entropy over the
    marginals of `a` and the averaged-split entropy inside the
    compatibility rate are themselves concave, and both enter the true
    branches with a minus sign; `refit` replaces each with its tangent
    plane at the current point.  A concave function sits below its
    tangents, so both modeled branches sit below the true rates
    everywhere while matching them at the refit point: ascending the
    model between refits can only raise the certified rate.
    """

    def __init__(
        self,
        comps: Sequence[Component],
        level: int,
        x_terms: Sequence[Tuple[float, np.ndarray]],
        pair_mat: np.ndarray,
        lin: np.ndarray,
        beta_mat: Optional[np.ndarray],
        groups: Sequence[Tuple[np.ndarray, np.ndarray]],
        mix_factor: float,
        v: np.ndarray,
    ) -> None:
        self.comps = list(comps)
        self.level = level
        self.x_terms = [(float(w), m) for w, m in x_terms]
        self.pair_mat = pair_mat
        self.lin = lin
        self.beta_mat = beta_mat
        self.groups = list(groups)
        self.mix_factor = float(mix_factor)
        self.v = v
        n = len(self.comps)
        self.g_star = np.zeros(n)
        self.c_star = 0.0
        self.g_mix = np.zeros(n)
        self.c_mix = 0.0

    def _mixture(self, beta: np.ndarray) -> Tuple[float, np.ndarray]:
        # sum over z-indices of (group mass) * H(mass-weighted split);
        # callers refit at interior points, keeping the logs finite
        total = 0.0
        grad = np.zeros(len(beta))
        for members, mat in self.groups:
            sub = beta[members]
            mass = float(sub.sum())
            if mass <= 0.0:
                continue
            log_t = np.log2(np.maximum(mat @ sub, 1e-300))
            total += mass * math.log2(mass) - float((mat @ sub) @ log_t)
            grad[members] = math.log2(mass) - mat.T @ log_t
        return total, grad

    def refit(self, a: np.ndarray) -> float:
        """Move both tangent planes to `a`; returns the true rate there."""
        joint = JointDistribution(
            self.level, {c: float(p) for c, p in zip(self.comps, a) if p > 0.0}
        )
        mx, my, mz = marginals(joint)
        star, h_star = max_entropy_with_marginals(None, mx, my, mz)
        # the maxent rate moves with the marginals at the dual potentials,
        # and their per-component sums are -log2 of the maxent law itself
        self.g_star = np.array(
            [-math.log2(max(star.p(c), 1e-300)) for c in self.comps]
        )
        self.c_star = h_star - float(self.g_star @ a)
        beta = a if self.beta_mat is None else self.beta_mat @ a
        f, g_beta = self._mixture(beta)
        folded = g_beta if self.beta_mat is None else self.beta_mat.T @ g_beta
        self.g_mix = self.mix_factor * folded
        self.c_mix = self.mix_factor * f - float(self.g_mix @ a)
        val, _ = self.fn_grad(a)
        return val

    def branches(self, a: np.ndarray) -> Tuple[float, np.ndarray, float, np.ndarray]:
        h_a, g_a = _h_and_grad(a)
        xy = h_a - (self.c_star + float(self.g_star @ a))
        gxy = g_a - self.g_star
        for wgt, mat in self.x_terms:
            h, g = _h_and_grad(mat @ a)
            xy += wgt * h
            gxy = gxy + wgt * (mat.T @ g)
        hp, gp = _h_and_grad(self.pair_mat @ a)
        zz = hp - float(self.lin @ a) - (self.c_mix + float(self.g_mix @ a))
        gzz = self.pair_mat.T @ gp - self.lin - self.g_mix
        return xy, gxy, zz, gzz

    def fn_grad(self, a: np.ndarray) -> Tuple[float, np.ndarray]:
        xy, gxy, zz, gzz = self.branches(a)
        base, (wl, wr) = softmin_bound(xy, zz)
        return base + float(self.v @ a), wl * gxy + wr * gzz + self.v


def _global_rate_model(
    comps: Sequence[Component],
    splits: Mapping[Component, SplitDistribution],
    v: np.ndarray,
    level: int,
) -> _RateModel:
    """Model of the global rate: one x-marginal term, pair law from splits."""
    n = len(comps)
    pair_index: Dict[Tuple[int, int], int] = {}
    for comp in comps:
        for kl in splits[comp].mass:
            pair_index.setdefault((kl, comp.k - kl), len(pair_index))
    pair_mat = np.zeros((len(pair_index), n))
    lin = np.zeros(n)
    by_k: Dict[int, List[int]] = {}
    for ci, comp in enumerate(comps):
        sd = splits[comp]
        for kl, w in sd.mass.items():
            pair_mat[pair_index[(kl, comp.k - kl)], ci] = w
        if comp.i == 0 or comp.j == 0:
            lin[ci] = entropy(sd)
        else:
            by_k.setdefault(comp.k, []).append(ci)
    groups = []
    for k, members in by_k.items():
        mat = np.zeros((k + 1, len(members)))
        for mi, ci in enumerate(members):
            for kl, w in splits[comps[ci]].mass.items():
                mat[kl, mi] = w
        groups.append((np.asarray(members), mat))
    x_terms = [(1.0, _axis_matrix(comps, 0, level))]
    return _RateModel(comps, level, x_terms, pair_mat, lin, None, groups, 1.0, v)


def _region_rate_model(
    support: Sequence[Component],
    values_r: Mapping[Component, ValuePair],
    shape: Component,
) -> _RateModel:
    """Model of one region's rate: averaged x/y terms, quadruple pair law.

    The region law sits on the left children of `shape`; symmetrized
    exponents, the doubled zero-split and mixed-split terms, and the
    quadruple law over (left split, complement split) reproduce the
    region accumulators of `verify_component` exactly.
    """
    level = shape.level - 1
    n = len(support)
    mates = [c.complement_in(shape) for c in support]
    beta_list: List[Component] = []
    beta_idx: Dict[Component, int] = {}
    for c in [*support, *mates]:
        if c not in beta_idx:
            beta_idx[c] = len(beta_list)
            beta_list.append(c)
    pairs: Dict[Component, ValuePair] = {}
    for c in beta_list:
        pair = values_r.get(c)
        if pair is None or pair.z_split is None:
            raise MissingLowerValue(f"no lower value pair with split for {c}")
        pairs[c] = pair
    bmat = np.zeros((len(beta_list), n))
    for ci, (c, mate) in enumerate(zip(support, mates)):
        bmat[beta_idx[c], ci] += 0.5
        bmat[beta_idx[mate], ci] += 0.5
    v = 2.0 * (bmat.T @ np.array([pairs[c].log2_value for c in beta_list]))
    quad_index: Dict[Tuple[int, int, int, int], int] = {}
    for c, mate in zip(support, mates):
        for k1 in pairs[c].z_split.mass:
            for k3 in pairs[mate].z_split.mass:
                key = (k1, c.k - k1, k3, mate.k - k3)
                quad_index.setdefault(key, len(quad_index))
    quad_mat = np.zeros((len(quad_index), n))
    for ci, (c, mate) in enumerate(zip(support, mates)):
        for k1, w1 in pairs[c].z_split.mass.items():
            for k3, w3 in pairs[mate].z_split.mass.items():
                key = (k1, c.k - k1, k3, mate.k - k3)
                quad_mat[quad_index[key], ci] += w1 * w3
    h_zero = np.array(
        [
            entropy(pairs[c].z_split) if (c.i == 0 or c.j == 0) else 0.0
            for c in beta_list
        ]
    )
    lin = 2.0 * (bmat.T @ h_zero)
    by_k: Dict[int, List[int]] = {}
    for bi, c in enumerate(beta_list):
        if c.i > 0 and c.j > 0:
            by_k.setdefault(c.k, []).append(bi)
    groups = []
    for k, members in by_k.items():
        mat = np.zeros((k + 1, len(members)))
        for mi, bi in enumerate(members):
            for kl, w in pairs[beta_list[bi]].z_split.mass.items():
                mat[kl, mi] = w
        groups.append((np.asarray(members), mat))
    x_terms = [
        (0.5, _axis_matrix(support, 0, level)),
        (0.5, _axis_matrix(support, 1, level)),
    ]
    return _RateModel(support, level, x_terms, quad_mat, lin, bmat, groups, 2.0, v)


@dataclass(frozen=True)
class Level2Result:
    q: int
    omega: float
    tau: float
    alpha: JointDistribution
    group_masses: Tuple[float, float, float, float, float]
    outer_rounds: int
    trace: Tuple[float, ...]
    report: VerifyReport


def optimize_level2(
    q: int,
    *,
    max_outer: int = 5,
    eg_steps: int = 900,
    tol: float = 1e-9,
) -> Level2Result:
    """Optimize the five-group level-2 family from a uniform start.

    Outer rounds alternate: rebuild the rate model at the working tau
    (splits and chosen values track the certified parameter assembly),
    ascend the group masses by exponentiated gradient with periodic
    tangent refits, then re-certify the exponent by bisection and move
    the working tau to the certified one.
    """
    comps = [c for g in _FAMILY_GROUPS for c in g]
    expand = np.zeros((len(comps), len(_FAMILY_GROUPS)))
    row = 0
    for gi, group in enumerate(_FAMILY_GROUPS):
        for _ in group:
            expand[row, gi] = 1.0 / len(group)
            row += 1

    def certified(alpha: JointDistribution) -> OmegaResult:
        return omega_from_value(
            lambda t: verify_global(nonrot_global_params(alpha, q, t)).log2_bound, 2, q
        )

    u = np.full(len(_FAMILY_GROUPS), 1.0 / len(_FAMILY_GROUPS))
    alpha = _expand_family(u)
    res = certified(alpha)
    tau_hat = res.tau
    best_res, best_alpha, best_u = res, alpha, u.copy()
    trace = [res.omega]
    rounds_used = 0
    refits = 4
    for _ in range(max_outer):
        rounds_used += 1
        params = nonrot_global_params(alpha, q, tau_hat)
        chosen = params.chosen_pairs()
        v_full = np.array([chosen[c].log2_value for c in comps])
        model = _global_rate_model(comps, params.splits, v_full, 2)

        def fn_grad(w: np.ndarray) -> Tuple[float, np.ndarray]:
            val, g = model.fn_grad(expand @ w)
            return val, expand.T @ g

        for _ in range(refits):
            a_t = np.maximum(expand @ u, 1e-15)
            model.refit(a_t / float(a_t.sum()))
            u, _ = _mirror_ascent(fn_grad, u, max_steps=max(eg_steps // refits, 50))
        alpha = _expand_family(u)
        res = certified(alpha)
        tau_hat = res.tau
        trace.append(res.omega)
        if res.omega < best_res.omega:
            best_res, best_alpha, best_u = res, alpha, u.copy()
        if trace[-2] - trace[-1] < tol:
            break
    report = verify_global(nonrot_global_params(best_alpha, q, best_res.tau))
    return Level2Result(
        q=q,
        omega=best_res.omega,
        tau=best_res.tau,
        alpha=best_alpha,
        group_masses=tuple(float(x) for x in best_u),
        outer_rounds=rounds_used,
        trace=tuple(trace),
        report=report,
    )


# --------------------------------------------------------------------------
# single-component search over the region decomposition
# --------------------------------------------------------------------------

def default_lower_values(
    level: int, q: int, tau: float, *, mixed_split_mass: Optional[float] = None
) -> Dict[Component, ValuePair]:
    """Closed-form value pairs for every component one level down.

    Level-1 children carry their plain values with the forced or uniform
    split; level-2 children get the merged zero-component optimum and the
    cyclically symmetrized mixed value, with `mixed_split_mass` overriding
    the endpoint mass of the (1, 1, 2) split when given.
    """
    if level == 2:
        vals = level1_value_map(q, tau)
        out: Dict[Component, ValuePair] = {}
        for comp in components_at_level(1):
            sd = uniform_split(1, 1) if comp.k == 1 else point_split(1, comp.k)
            out[comp] = ValuePair(comp, "nonrot", tau, vals[comp], sd)
        return out
    if level == 3:
        out = {}
        for comp in components_at_level(2):
            if comp.zero_count() == 0:
                b = mixed_split_mass if comp == Component(1, 1, 2) else None
                out[comp] = level2_112_value(q, tau, b=b, component=comp)
            else:
                out[comp] = best_merging_split(comp, q, tau)
        return out
    raise OutOfRange(f"no closed-form lower table feeding level {level}")


def _binomial_region_law(shape: Component) -> JointDistribution:
    # product of per-axis binomial splits, the law of an independent
    # coordinate-wise coin flip; strictly positive on every valid left child
    raw: Dict[Component, float] = {}
    for left, _ in split_pairs(shape):
        raw[left] = float(
            math.comb(shape.i, left.i)
            * math.comb(shape.j, left.j)
            * math.comb(shape.k, left.k)
        )
    total = sum(raw.values())
    return JointDistribution(shape.level - 1, {c: w / total for c, w in raw.items()})


def _best_region_weights(
    xs: np.ndarray, zs: np.ndarray, vs: np.ndarray, current: np.ndarray
) -> np.ndarray:
    """Exact maximizer of min(A.x, A.z) + A.v over the weight simplex.

    The objective is piecewise linear and concave, so the optimum sits at a
    vertex of the epigraph polytope: a simplex vertex, or an edge point
    where the two block-rate lines cross.
    """
    cands: List[np.ndarray] = [np.asarray(current, dtype=float), np.full(3, 1.0 / 3.0)]
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        cands.append(e)
    d = xs - zs
    for i in range(3):
        for j in range(i + 1, 3):
            if d[i] == d[j] or (d[i] > 0) == (d[j] > 0):
                continue
            t = d[j] / (d[j] - d[i])
            if 0.0 < t < 1.0:
                a = np.zeros(3)
                a[i] = t
                a[j] = 1.0 - t
                cands.append(a)
    scores = [min(float(a @ xs), float(a @ zs)) + float(a @ vs) for a in cands]
    return cands[int(np.argmax(scores))]


@dataclass(frozen=True)
class ComponentSearchResult:
    component: Component
    q: int
    tau: float
    pair: ValuePair
    report: VerifyReport
    params: RegionParams
    rounds: int
    trace: Tuple[float, ...]


def optimize_component(
    component: Component,
    q: int,
    tau: float,
    *,
    lower: Optional[Mapping[Component, ValuePair]] = None,
    rounds: int = 8,
    eg_steps: int = 300,
    tol: float = 1e-10,
    initial: Optional[Sequence[JointDistribution]] = None,
) -> ComponentSearchResult:
    """Search region laws and weights maximizing one component's value.

    Alternates an exact weight step (the bound is piecewise linear in the
    region weights once the laws are fixed) with per-region
    exponentiated-gradient steps on the laws against each region's rate
    model, tangents refit at the incoming law.  The returned pair is
    re-certified by `verify_component`.
    """
    if component.zero_count() > 0:
        raise ZeroComponent(f"{component} has a zero index; use merging instead")
    if lower is None:
        lower = default_lower_values(component.level, q, tau)
    values_triple = (lower, lower, lower)

    shapes = [component, component.rotate(), component.rotate().rotate()]
    supports = [[left for left, _ in split_pairs(s)] for s in shapes]
    if initial is not None:
        laws = list(initial)
        if len(laws) != 3:
            raise ValidationError("component search needs three region laws")
    else:
        laws = [_binomial_region_law(s) for s in shapes]

    def law_vector(r: int) -> np.ndarray:
        return np.array([laws[r].p(c) for c in supports[r]])

    def law_from_vector(r: int, vec: np.ndarray) -> JointDistribution:
        return JointDistribution(
            component.level - 1, dict(zip(supports[r], (float(x) for x in vec)))
        )

    def make_rp(ws: Sequence[float]) -> RegionParams:
        return RegionParams(
            component, tuple(float(w) for w in ws), tuple(laws), values_triple
        )

    def region_stats(r: int) -> VerifyReport:
        unit = tuple(1.0 if s == r else 0.0 for s in range(3))
        _, rep = verify_component(make_rp(unit), q, tau)
        return rep

    models = [_region_rate_model(supports[r], lower, shapes[r]) for r in range(3)]
    stops = [0]
    for s in supports:
        stops.append(stops[-1] + len(s))
    blocks = [slice(stops[r], stops[r + 1]) for r in range(3)]

    def refit_all() -> None:
        for r in range(3):
            vec = np.maximum(law_vector(r), 1e-15)
            models[r].refit(vec / float(vec.sum()))

    def rates() -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        reps = [region_stats(r) for r in range(3)]
        xs = np.array(
            [s.log2_triples + s.log2_x_blocks - s.log2_max_triples for s in reps]
        )
        zs = np.array([s.log2_z_blocks - s.log2_compat_prob for s in reps])
        vs = np.array([s.log2_value_product for s in reps])
        return xs, zs, vs

    weights = np.full(3, 1.0 / 3.0)
    pair, report = verify_component(make_rp(weights), q, tau)
    best = (pair, report, make_rp(weights))
    trace = [pair.log2_value]

    # phase one: rotation-symmetric ansatz.  One base law on the first
    # region's support drives all three regions through rotation, the
    # weights stay uniform, and the restricted objective is still concave;
    # this reaches tied-branch optima the free alternation tends to miss.
    idx0 = {c: i for i, c in enumerate(supports[0])}
    srcs = []
    for r in range(3):
        src = np.empty(len(supports[r]), dtype=int)
        for j, c in enumerate(supports[r]):
            back = c
            for _ in range((3 - r) % 3):
                back = back.rotate()
            src[j] = idx0[back]
        srcs.append(src)

    def sym_fn_grad(a0: np.ndarray) -> Tuple[float, np.ndarray]:
        xy = zz = val = 0.0
        parts = []
        for r in range(3):
            a = a0[srcs[r]]
            bx, gx, bz, gz = models[r].branches(a)
            xy += bx / 3.0
            zz += bz / 3.0
            val += float(models[r].v @ a) / 3.0
            parts.append((gx, gz))
        base, (wl, wr) = softmin_bound(xy, zz)
        g0 = np.zeros_like(a0)
        for r, (gx, gz) in enumerate(parts):
            np.add.at(g0, srcs[r], (wl * gx + wr * gz + models[r].v) / 3.0)
        return base + val, g0

    laws_in = list(laws)
    a0 = np.zeros(len(supports[0]))
    for r in range(3):
        np.add.at(a0, srcs[r], law_vector(r))
    a0 = np.maximum(a0 / 3.0, 1e-12)
    a0 = a0 / a0.sum()
    for _ in range(16):
        for r in range(3):
            vec = np.maximum(a0[srcs[r]], 1e-15)
            models[r].refit(vec / float(vec.sum()))
        a0, _ = _mirror_ascent(sym_fn_grad, a0, max_steps=eg_steps)
    for r in range(3):
        laws[r] = law_from_vector(r, a0[srcs[r]])
    pair, report = verify_component(make_rp(weights), q, tau)
    trace.append(pair.log2_value)
    if pair.log2_value > best[0].log2_value:
        best = (pair, report, make_rp(weights))
    else:
        laws[:] = laws_in

    xs, zs, vs = rates()
    for _ in range(rounds):
        weights = _best_region_weights(xs, zs, vs, weights)
        wts = weights.copy()

        def fn_grad(vec: np.ndarray) -> Tuple[float, np.ndarray]:
            xy = zz = val = 0.0
            parts = []
            for r in range(3):
                a = vec[blocks[r]]
                bx, gx, bz, gz = models[r].branches(a)
                xy += wts[r] * bx
                zz += wts[r] * bz
                val += wts[r] * float(models[r].v @ a)
                parts.append((gx, gz))
            base, (wl, wr) = softmin_bound(xy, zz)
            grad = np.empty_like(vec)
            for r, (gx, gz) in enumerate(parts):
                grad[blocks[r]] = wts[r] * (wl * gx + wr * gz + models[r].v)
            return base + val, grad

        # all three laws move together against the shared branch minimum;
        # a second refit mid-round keeps the tangents near the iterate
        for _ in range(2):
            refit_all()
            joint, _ = _mirror_ascent(
                fn_grad,
                np.concatenate([law_vector(r) for r in range(3)]),
                max_steps=max(eg_steps // 2, 50),
                blocks=blocks,
            )
            for r in range(3):
                laws[r] = law_from_vector(r, joint[blocks[r]])

        # parked regions track their best standalone rate instead, so the
        # next weight step can price re-activating them fairly
        for r in range(3):
            if weights[r] >= 0.05:
                continue
            vec = np.maximum(law_vector(r), 1e-15)
            models[r].refit(vec / float(vec.sum()))

            def solo(
                a: np.ndarray, m: _RateModel = models[r]
            ) -> Tuple[float, np.ndarray]:
                bx, gx, bz, gz = m.branches(a)
                base, (wl, wr) = softmin_bound(bx, bz)
                return base + float(m.v @ a), wl * gx + wr * gz + m.v

            vec, _ = _mirror_ascent(solo, vec, max_steps=max(eg_steps // 2, 50))
            laws[r] = law_from_vector(r, vec)

        xs, zs, vs = rates()
        weights = _best_region_weights(xs, zs, vs, weights)
        pair, report = verify_component(make_rp(weights), q, tau)
        trace.append(pair.log2_value)
        if pair.log2_value > best[0].log2_value:
            best = (pair, report, make_rp(weights))
        if trace[-1] - trace[-2] < tol:
            break

    return ComponentSearchResult(
        component=component,
        q=q,
        tau=tau,
        pair=best[0],
        report=best[1],
        params=best[2],
        rounds=len(trace) - 1,
        trace=tuple(trace),
    )


# --------------------------------------------------------------------------
# the full pipeline
# --------------------------------------------------------------------------

def _orbit_basis(
    level: int,
) -> Tuple[List[Component], List[Tuple[Component, ...]], np.ndarray]:
    # orbits of the x<->y swap; forcing equal mass inside an orbit keeps
    # sym3 mirror conditions satisfied for free
    comps = components_at_level(level)
    index = {c: i for i, c in enumerate(comps)}
    orbits: List[Tuple[Component, ...]] = []
    seen = set()
    for c in comps:
        if c in seen:
            continue
        m = c.swap()
        members = (c,) if m == c else (c, m)
        seen.update(members)
        orbits.append(members)
    basis = np.zeros((len(comps), len(orbits)))
    for o, members in enumerate(orbits):
        for c in members:
            basis[index[c], o] = 1.0 / len(members)
    return comps, orbits, basis


def _params_from_pairs(
    q: int, tau: float, alpha: JointDistribution, pairs: Mapping[Component, ValuePair]
) -> GlobalParams:
    splits = {c: p.z_split for c, p in pairs.items()}
    return GlobalParams(
        q=q, tau=tau, alpha=alpha, splits=splits, values=ValueTable(pairs.values())
    )


def _solve_alpha(
    q: int,
    tau: float,
    pairs: Mapping[Component, ValuePair],
    *,
    w0: Optional[np.ndarray] = None,
    rounds: int = 5,
    eg_steps: int = 600,
    tol: float = 1e-12,
) -> Tuple[JointDistribution, VerifyReport, np.ndarray]:
    """Ascend the verified bound at fixed tau in the swap-orbit basis.

    Each round refits the rate model's tangent planes at the current
    distribution and maximizes the concave model by exponentiated
    gradient; refit values trace the true bound, so the loop stops once
    a round stops paying.  The returned report is a fresh verification.
    """
    level = next(iter(pairs)).level
    comps, _, basis = _orbit_basis(level)
    for c in comps:
        if c not in pairs:
            raise MissingLowerValue(f"no value pair for {c}")
    v = np.array([pairs[c].log2_value for c in comps])
    model = _global_rate_model(comps, {c: pairs[c].z_split for c in comps}, v, level)

    def alpha_of(w: np.ndarray) -> JointDistribution:
        full = basis @ w
        return JointDistribution(level, dict(zip(comps, (float(x) for x in full))))

    def fn_grad(wv: np.ndarray) -> Tuple[float, np.ndarray]:
        val, g = model.fn_grad(basis @ wv)
        return val, basis.T @ g

    w = (
        np.full(basis.shape[1], 1.0 / basis.shape[1])
        if w0 is None
        else np.maximum(np.asarray(w0, dtype=float), 1e-12)
    )
    w = w / w.sum()
    prev = -math.inf
    for _ in range(rounds):
        a_t = np.maximum(basis @ w, 1e-15)
        cur = model.refit(a_t / float(a_t.sum()))
        if cur - prev < tol:
            break
        prev = cur
        w, _ = _mirror_ascent(fn_grad, w, max_steps=eg_steps)
    alpha = alpha_of(w)
    rep = verify_global(_params_from_pairs(q, tau, alpha, pairs))
    return alpha, rep, w


def _level2_pairs(
    q: int, tau: float, sa: float, sb: float
) -> Dict[Component, ValuePair]:
    """Level-2 value pairs with free endpoint masses on the two knobs.

    `sa` shifts the z-split of the matrix-multiplication components, `sb`
    the split of the central mixed component; everything else takes its
    value-maximizing split in closed form.
    """
    pairs: Dict[Component, ValuePair] = {}
    for comp in components_at_level(2):
        if comp.zero_count() == 0:
            if comp == Component(1, 1, 2):
                pairs[comp] = level2_112_value(q, tau, b=sb)
            else:
                pairs[comp] = level2_112_value(q, tau, component=comp)
        elif comp.k == 2 and comp.zero_count() == 1:
            pairs[comp] = restricted_merging_value(
                comp, endpoint_split(2, 2, sa), q, tau
            )
        else:
            pairs[comp] = best_merging_split(comp, q, tau)
    return pairs


@dataclass(frozen=True)
class PipelineState:
    """A finished run: certified exponent plus everything to replay it."""

    q: int
    level_star: int
    omega: float
    tau: float
    params: GlobalParams
    report: VerifyReport
    lower: Mapping[Component, RegionParams]
    trace: Tuple[Tuple[str, float], ...]


@dataclass(frozen=True)
class _Level2Stage:
    omega: float
    tau: float
    alpha: JointDistribution
    sa: float
    sb: float
    w: np.ndarray
    params: GlobalParams
    report: VerifyReport
    trace: Tuple[Tuple[str, float], ...]


def _level2_stage(q: int, *, max_outer: int = 4) -> _Level2Stage:
    _, _, basis = _orbit_basis(2)
    w = np.full(basis.shape[1], 1.0 / basis.shape[1])
    sa = matmul_split_mass(q)
    sb = 1e-3

    def bound_fn(t: float, alpha: JointDistribution, sa_: float, sb_: float) -> float:
        params = _params_from_pairs(q, t, alpha, _level2_pairs(q, t, sa_, sb_))
        return verify_global(params).log2_bound

    # the uniform start certifies nothing; ascend at the loosest parameter
    # first, where the target is easiest, then place the working tau
    alpha, _, w = _solve_alpha(
        q, TAU_MAX, _level2_pairs(q, TAU_MAX, sa, sb), w0=w, rounds=4, eg_steps=400
    )
    res = omega_from_value(lambda t: bound_fn(t, alpha, sa, sb), 2, q)
    tau_hat = res.tau
    trace: List[Tuple[str, float]] = [("level2_init", res.omega)]
    best: Optional[Tuple[OmegaResult, JointDistribution, float, float, np.ndarray]] = None
    for outer in range(max_outer):
        warm = [w]

        def eval_masses(sa_: float, sb_: float) -> float:
            pairs = _level2_pairs(q, tau_hat, sa_, sb_)
            _, rep, w_ = _solve_alpha(
                q, tau_hat, pairs, w0=warm[0], rounds=3, eg_steps=250
            )
            warm[0] = w_
            return -rep.log2_bound

        ln_sa, _ = _golden_min(
            lambda t: eval_masses(math.exp(t), sb),
            math.log(1e-3),
            math.log(0.3),
            tol=2e-3,
        )
        sa = math.exp(ln_sa)
        ln_sb, _ = _golden_min(
            lambda t: eval_masses(sa, math.exp(t)),
            math.log(1e-6),
            math.log(0.1),
            tol=2e-3,
        )
        sb = math.exp(ln_sb)

        pairs = _level2_pairs(q, tau_hat, sa, sb)
        alpha, _, w = _solve_alpha(
            q, tau_hat, pairs, w0=warm[0], rounds=8, eg_steps=1500
        )
        res = omega_from_value(lambda t: bound_fn(t, alpha, sa, sb), 2, q)
        trace.append((f"level2_round{outer + 1}", res.omega))
        if best is None or res.omega < best[0].omega:
            best = (res, alpha, sa, sb, w.copy())
        if abs(tau_hat - res.tau) < 1e-10:
            break
        tau_hat = res.tau
    assert best is not None
    res, alpha, sa, sb, w = best
    params = _params_from_pairs(q, res.tau, alpha, _level2_pairs(q, res.tau, sa, sb))
    report = verify_global(params)
    return _Level2Stage(
        omega=res.omega,
        tau=res.tau,
        alpha=alpha,
        sa=sa,
        sb=sb,
        w=w,
        params=params,
        report=report,
        trace=tuple(trace),
    )


def _convolution_square(alpha: JointDistribution) -> Dict[Component, float]:
    # law of an independent pair, i.e. the component distribution the
    # squared construction induces one level up
    out: Dict[Component, float] = {}
    for c1, p1 in alpha.mass.items():
        for c2, p2 in alpha.mass.items():
            c = Component(c1.i + c2.i, c1.j + c2.j, c1.k + c2.k)
            out[c] = out.get(c, 0.0) + p1 * p2
    return out


def _level3_stage(q: int, *, max_outer: int = 3) -> Tuple[
    OmegaResult,
    GlobalParams,
    VerifyReport,
    Dict[Component, RegionParams],
    Tuple[Tuple[str, float], ...],
]:
    stage2 = _level2_stage(q)
    trace: List[Tuple[str, float]] = list(stage2.trace)
    trace.append(("level2", stage2.omega))
    tau_hat = stage2.tau

    comps3, orbits3, basis3 = _orbit_basis(3)
    conv = _convolution_square(stage2.alpha)
    w3 = np.array(
        [sum(conv.get(m, 0.0) for m in members) for members in orbits3]
    )
    w3 = np.maximum(w3, 1e-9)
    w3 = w3 / w3.sum()

    representatives = [c for c in comps3 if c.zero_count() == 0 and c.i <= c.j]
    b_hat = optimal_112_split_mass(q, tau_hat)
    cache: Dict[Component, RegionParams] = {}

    def optimize_representatives(rounds: int) -> None:
        lower = default_lower_values(3, q, tau_hat, mixed_split_mass=b_hat)
        for comp in representatives:
            warm = cache.get(comp)
            sr = optimize_component(
                comp,
                q,
                tau_hat,
                lower=lower,
                rounds=rounds,
                eg_steps=250,
                initial=None if warm is None else warm.region_alphas,
            )
            cache[comp] = sr.params

    def pairs_at(t: float) -> Dict[Component, ValuePair]:
        lower_t = default_lower_values(3, q, t, mixed_split_mass=b_hat)
        triple = (lower_t, lower_t, lower_t)
        out: Dict[Component, ValuePair] = {}
        for comp in comps3:
            if comp.zero_count() > 0:
                out[comp] = best_merging_split(comp, q, t)
        for comp, rp0 in cache.items():
            rp = RegionParams(comp, rp0.weights, rp0.region_alphas, triple)
            pair, _ = verify_component(rp, q, t)
            out[comp] = pair
            mirror = comp.swap()
            if mirror != comp:
                out[mirror] = ValuePair(
                    mirror, "sym6", t, pair.log2_value, pair.z_split
                )
        return out

    optimize_representatives(rounds=5)
    best: Optional[
        Tuple[OmegaResult, JointDistribution, Dict[Component, RegionParams], float]
    ] = None
    alpha3 = None
    for outer in range(max_outer):
        pairs = pairs_at(tau_hat)
        alpha3, _, w3 = _solve_alpha(
            q, tau_hat, pairs, w0=w3, rounds=5, eg_steps=600
        )
        res = omega_from_value(
            lambda t: verify_global(
                _params_from_pairs(q, t, alpha3, pairs_at(t))
            ).log2_bound,
            3,
            q,
        )
        trace.append((f"level3_round{outer + 1}", res.omega))
        if best is None or res.omega < best[0].omega:
            best = (res, alpha3, dict(cache), b_hat)
        if abs(tau_hat - res.tau) < 1e-10:
            break
        tau_hat = res.tau
        b_hat = optimal_112_split_mass(q, tau_hat)
        optimize_representatives(rounds=3)
    assert best is not None
    res, alpha3, cache, b_hat = best

    # freeze everything at the certified tau
    lower_final = default_lower_values(3, q, res.tau, mixed_split_mass=b_hat)
    triple = (lower_final, lower_final, lower_final)
    stored = {
        comp: RegionParams(comp, rp.weights, rp.region_alphas, triple)
        for comp, rp in cache.items()
    }
    pairs_final: Dict[Component, ValuePair] = {}
    for comp in comps3:
        if comp.zero_count() > 0:
            pairs_final[comp] = best_merging_split(comp, q, res.tau)
    for comp, rp in stored.items():
        pair, _ = verify_component(rp, q, res.tau)
        pairs_final[comp] = pair
        mirror = comp.swap()
        if mirror != comp:
            pairs_final[mirror] = ValuePair(
                mirror, "sym6", res.tau, pair.log2_value, pair.z_split
            )
    params = _params_from_pairs(q, res.tau, alpha3, pairs_final)
    report = verify_global(params)
    return res, params, report, stored, tuple(trace)


def run_framework(q: int, level_star: int) -> PipelineState:
    """Optimize the bound at the requested level and certify the result.

    Level 1 searches the symmetric family; level 2 alternates split-mass
    search with distribution ascent over the full component family; level 3
    additionally builds six-fold symmetrized values for every zero-free
    component through the region decomposition, seeded by the squared
    level-2 optimum.  The returned state replays through `reverify`.
    """
    if q < 1:
        raise OutOfRange(f"q = {q}")
    if level_star == 1:
        r1 = optimize_level1(q)
        params = _level1_params(q, r1.tau, r1.doubled_mass)
        return PipelineState(
            q=q,
            level_star=1,
            omega=r1.omega,
            tau=r1.tau,
            params=params,
            report=r1.report,
            lower={},
            trace=(("level1", r1.omega),),
        )
    if level_star == 2:
        stage = _level2_stage(q)
        return PipelineState(
            q=q,
            level_star=2,
            omega=stage.omega,
            tau=stage.tau,
            params=stage.params,
            report=stage.report,
            lower={},
            trace=stage.trace + (("level2", stage.omega),),
        )
    if level_star == 3:
        res, params, report, stored, trace = _level3_stage(q)
        return PipelineState(
            q=q,
            level_star=3,
            omega=res.omega,
            tau=res.tau,
            params=params,
            report=report,
            lower=stored,
            trace=trace + (("level3", res.omega),),
        )
    raise OutOfRange(f"level {level_star} is not supported")


def reverify(state: PipelineState) -> OmegaResult:
    """Replay a pipeline state and fail loudly on any drift.

    Re-runs the global verification from the stored parameters, re-derives
    every stored region decomposition, and re-certifies the exponent at the
    recorded tau; discrepancies beyond 1e-9 raise ValidationError.
    """
    rep = verify_global(state.params)
    if abs(rep.log2_bound - state.report.log2_bound) > REVERIFY_TOL:
        raise ValidationError(
            f"stored bound {state.report.log2_bound!r} reverifies to {rep.log2_bound!r}"
        )
    for comp, rp in state.lower.items():
        pair, _ = verify_component(rp, state.q, state.params.tau)
        stored = state.params.values.get(comp, "sym6", pair.z_split.digest())
        if stored is None or abs(stored.log2_value - pair.log2_value) > REVERIFY_TOL:
            raise ValidationError(f"stored value for {comp} does not reverify")
    res = certify_at_tau(rep.log2_bound, state.level_star, state.q, state.params.tau)
    if abs(res.omega - state.omega) > REVERIFY_TOL:
        raise ValidationError(
            f"stored omega {state.omega!r} reverifies to {res.omega!r}"
        )
    return res
