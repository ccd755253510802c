"""Lower bounds on restricted values of tensor-power components.

The value of a component T_{i,j,k} at exponent parameter tau measures how
much matrix multiplication can be degenerated out of large powers of that
component.  Values here come in three strengths, recorded on each pair:

* ``sym6`` - valid when the component is symmetrized over all six axis
  permutations,
* ``sym3`` - valid under cyclic symmetrization only; using such a value in
  a six-fold pipeline additionally needs the x<->y mirror component to
  carry matching mass,
* ``nonrot`` - valid without any symmetrization.

A `ValuePair` couples the numeric bound with the z-index split
distribution it was derived for; downstream verification refuses to mix a
value with a differently-split block decomposition, which is what the
digest key enforces.  All values are stored as log2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from .combinat import (
    Component,
    JointDistribution,
    SplitDistribution,
    entropy,
    marginals,
    point_split,
    split_pairs,
    uniform_split,
)
from .errors import (
    InfeasibleSplit,
    InvalidComponent,
    MissingLowerValue,
    MultipleZeros,
    OutOfRange,
    PreconditionUnmet,
    WrongLevel,
)

KINDS = ("sym6", "sym3", "nonrot")


@dataclass(frozen=True)
class ValuePair:
    """A certified (value, z-split) pair for one component at one tau."""

    component: Component
    kind: str
    tau: float
    log2_value: float
    z_split: Optional[SplitDistribution]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise OutOfRange(f"value kind {self.kind!r}")
        if self.z_split is not None:
            if self.z_split.level != self.component.level:
                raise WrongLevel(
                    f"split level {self.z_split.level} vs component level "
                    f"{self.component.level}"
                )
            if self.z_split.parent != self.component.k:
                raise OutOfRange(
                    f"split parent {self.z_split.parent} vs z-index {self.component.k}"
                )

    def digest(self) -> str:
        return self.z_split.digest() if self.z_split is not None else ""


class ValueTable:
    """Value pairs keyed by (component, kind, split digest).

    Re-adding a key keeps the larger bound.  `best` scans all kinds for a
    component/digest pair; x<->y mirrored lookups are left to callers since
    kind semantics differ under mirroring.
    """

    def __init__(self, pairs: Iterable[ValuePair] = ()):
        self._pairs: Dict[Tuple[Component, str, str], ValuePair] = {}
        for pair in pairs:
            self.add(pair)

    def add(self, pair: ValuePair) -> None:
        key = (pair.component, pair.kind, pair.digest())
        old = self._pairs.get(key)
        if old is None or pair.log2_value > old.log2_value:
            self._pairs[key] = pair

    def get(self, component: Component, kind: str, digest: str) -> Optional[ValuePair]:
        return self._pairs.get((component, kind, digest))

    def best(self, component: Component, digest: str) -> Optional[ValuePair]:
        found = [
            p for (c, _, d), p in self._pairs.items() if c == component and d == digest
        ]
        if not found:
            return None
        return max(found, key=lambda p: p.log2_value)

    def entries(self) -> List[ValuePair]:
        return sorted(
            self._pairs.values(),
            key=lambda p: (p.component, p.kind, p.digest()),
        )

    def __len__(self) -> int:
        return len(self._pairs)


def level1_value(component: Component, q: int, tau: float) -> float:
    """log2 value of a level-1 component: the mixed ones are q^tau."""
    if component.level != 1:
        raise WrongLevel(f"{component} is level {component.level}, expected 1")
    if q < 1:
        raise OutOfRange(f"q = {q}")
    if 2 in component.indices():
        return 0.0
    return tau * math.log2(q)


def merging_sum(u: int, v: int, q: int) -> int:
    """Exact count sum_b multinomial((u+v)/2; b, (u-b)/2, (v-b)/2) * q**b.

    This is the matrix-multiplication volume packed into a zero-index
    component whose nonzero indices are u and v; it is symmetric in u, v.
    """
    if u < 0 or v < 0 or (u + v) % 2:
        raise InvalidComponent(f"bad index pair ({u}, {v})")
    m = (u + v) // 2
    total = 0
    fm = math.factorial(m)
    for b in range(u % 2, min(u, v) + 1, 2):
        du, dv = (u - b) // 2, (v - b) // 2
        if du + dv + b != m:
            continue
        total += fm // (math.factorial(b) * math.factorial(du) * math.factorial(dv)) * q ** b
    return total


def _zero_axes(component: Component) -> List[int]:
    return [t for t, v in enumerate(component.indices()) if v == 0]


def merging_value(component: Component, q: int, tau: float) -> float:
    """log2 value of a component with a zero index, by merging its blocks.

    All level-(l-1) children of such a component are matrix
    multiplications sharing the dimension forced by the zero axis, so they
    merge into a single larger matrix multiplication whose volume is
    `merging_sum` of the two nonzero indices.  Invariant under all six
    index permutations.
    """
    if q < 1:
        raise OutOfRange(f"q = {q}")
    zeros = _zero_axes(component)
    if not zeros:
        raise PreconditionUnmet(f"{component} has no zero index")
    idx = [v for t, v in enumerate(component.indices()) if t != zeros[0]]
    return tau * math.log2(merging_sum(idx[0], idx[1], q))


def restricted_merging_value(
    component: Component, z_split: SplitDistribution, q: int, tau: float
) -> ValuePair:
    """Merging value of a one-zero component under a prescribed z-split.

    With the zero on the x- or y-axis, fixing the z-index split k -> (k_l,
    k - k_l) pins the whole level-(l-1) factorization (the zero axis leaves
    the other nonzero index no freedom), so the restricted standard form is
    a z-split entropy factor times the per-child merged volumes.  A zero
    z-index makes the restriction vacuous.
    """
    if component.zero_count() >= 2:
        raise MultipleZeros(f"{component} has multiple zero indices")
    if component.zero_count() == 0:
        raise PreconditionUnmet(f"{component} has no zero index")
    if z_split.level != component.level or z_split.parent != component.k:
        raise WrongLevel(
            f"split is for parent {z_split.parent} at level {z_split.level}, "
            f"component is {component}"
        )
    lv = component.level
    half = 1 << (lv - 1)

    if component.k == 0:
        pair_split = point_split(lv, 0)
        return ValuePair(component, "sym6", tau, merging_value(component, q, tau), pair_split)

    zero_axis = _zero_axes(component)[0]
    free = component.j if zero_axis == 0 else component.i
    log2v = tau * entropy(z_split)
    for kl, p in z_split.mass.items():
        fl = half - kl  # the free nonzero index of the left child
        fr = free - fl
        kr = component.k - kl
        if fl < 0 or fr < 0 or fr > half or kr < 0 or kr > half:
            raise InfeasibleSplit(
                f"split mass at child {kl} leaves no valid factor pair for {component}"
            )
        log2v += tau * p * (
            math.log2(merging_sum(fl, kl, q)) + math.log2(merging_sum(fr, kr, q))
        )
    return ValuePair(component, "sym6", tau, log2v, z_split)


def best_merging_split(component: Component, q: int, tau: float) -> ValuePair:
    """Value-maximizing z-split of a zero component, in closed form.

    The restricted merging value is tau times (split entropy plus a term
    linear in the split), so the maximizer is the Gibbs law weighting each
    child by its merged volume.  A convolution identity makes the total
    equal the unrestricted merging volume: the z-restriction costs nothing
    at the optimizing split.  The split itself is tau-independent.
    """
    if component.zero_count() == 0:
        raise PreconditionUnmet(f"{component} has no zero index")
    lv = component.level
    half = 1 << (lv - 1)
    k = component.k
    if component.zero_count() >= 2 or k == 0:
        return ValuePair(
            component, "sym6", tau, merging_value(component, q, tau),
            point_split(lv, k),
        )
    free = 2 ** lv - k
    weights = {}
    for kl in range(max(0, k - half), min(k, half) + 1):
        fl = half - kl
        weights[kl] = merging_sum(fl, kl, q) * merging_sum(free - fl, k - kl, q)
    total = sum(weights.values())
    split = SplitDistribution(lv, k, {kl: w / total for kl, w in weights.items()})
    return ValuePair(component, "sym6", tau, tau * math.log2(total), split)


def optimal_112_split_mass(q: int, tau: float) -> float:
    """Endpoint mass b maximizing the mixed-component value at level 2."""
    return 1.0 / (2.0 + q ** (3.0 * tau))


def level2_112_value(
    q: int, tau: float, b: Optional[float] = None, component: Component = Component(1, 1, 2)
) -> ValuePair:
    """Cyclically-symmetrized value of a level-2 mixed component.

    For (1, 1, 2) with z-split (b, 1-2b, b) the bound is
    (4 / ((1-2b)^(1-2b) b^(2b)))^(1/3) * q^((2-2b) tau);  b = None picks the
    maximizing endpoint mass 1/(2 + q^(3 tau)).  The rotations (1, 2, 1)
    and (2, 1, 1) carry the same numeric bound with their forced uniform
    z-split, which is what this returns for them.
    """
    if q < 1:
        raise OutOfRange(f"q = {q}")
    if component not in (Component(1, 1, 2), Component(1, 2, 1), Component(2, 1, 1)):
        raise InvalidComponent(f"{component} is not a rotation of (1, 1, 2)")
    if b is None:
        b = optimal_112_split_mass(q, tau)
    if not (0.0 <= b < 0.5):
        raise OutOfRange(f"endpoint split mass b = {b}")
    mid = 1.0 - 2.0 * b
    log2v = 2.0
    if b > 0.0:
        log2v -= 2.0 * b * math.log2(b)
    if mid > 0.0:
        log2v -= mid * math.log2(mid)
    log2v = log2v / 3.0 + (2.0 - 2.0 * b) * tau * math.log2(q)
    if component == Component(1, 1, 2):
        z_split = SplitDistribution(2, 2, {0: b, 1: mid, 2: b})
    else:
        z_split = uniform_split(2, 1)
    return ValuePair(component, "sym3", tau, log2v, z_split)


def symhash_value_pair(
    component: Component,
    joint_split: JointDistribution,
    lower_values: Mapping[Component, float],
    tau: float,
) -> ValuePair:
    """Value pair from symmetric hashing over a chosen joint split law.

    `joint_split` is a distribution over the left children of `component`;
    each left child is paired with its complement.  The bound is the
    geometric mean of the three split-marginal block-count rates times the
    product of the paired lower values:

        log2 V >= (H_x + H_y + H_z) / 3
                  + sum_c alpha(c) (log2 V[c] + log2 V[complement(c)])

    and the resulting pair carries the z-marginal as its split.
    """
    lv = component.level
    if lv < 1:
        raise WrongLevel("level-0 components have no splits")
    if joint_split.level != lv - 1:
        raise WrongLevel(
            f"joint split lives at level {joint_split.level}, expected {lv - 1}"
        )
    half = 1 << (lv - 1)
    pair_value = 0.0
    for left, p in joint_split.mass.items():
        di = component.i - left.i
        dj = component.j - left.j
        dk = component.k - left.k
        if min(di, dj, dk) < 0 or max(di, dj, dk) > half:
            raise InfeasibleSplit(f"{left} does not split {component}")
        right = Component(di, dj, dk)
        for child in (left, right):
            if child not in lower_values:
                raise MissingLowerValue(f"no lower value for {child}")
        pair_value += p * (lower_values[left] + lower_values[right])

    sx, sy, sz = marginals(joint_split)
    log2v = (entropy(sx) + entropy(sy) + entropy(sz)) / 3.0 + pair_value
    z_split = SplitDistribution(lv, component.k, dict(sz.mass))
    return ValuePair(component, "sym3", tau, log2v, z_split)


def level1_value_map(q: int, tau: float) -> Dict[Component, float]:
    """All six level-1 component values, keyed for use as lower values."""
    from .combinat import components_at_level

    return {c: level1_value(c, q, tau) for c in components_at_level(1)}
