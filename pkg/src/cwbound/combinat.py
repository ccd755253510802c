"""Distributions over block indices of Coppersmith-Winograd tensor powers.

Powers of the base tensor are coarsened into blocks.  At level l every
variable group carries an index in {0, ..., 2**l}, and a triple
(i, j, k) with i + j + k = 2**l names one component of the level-l
decomposition.  This module holds the probability objects everything else
is built from:

* `JointDistribution`  - mass over level-l components,
* `MarginalDistribution` - mass over a single axis of block indices,
* `SplitDistribution`  - how one index splits across the two halves of an
  index sequence when passing from level l to level l-1,
* `TypicalDistribution` - joint law of split pairs/quadruples induced by a
  joint distribution together with per-component splits.

Counting rates (numbers of blocks, of triples, of compatible children) are
exponential in the sequence length, so every derived quantity is handled
as a log2 rate.  Entropies are Shannon entropies in bits.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DidNotConverge,
    Infeasible,
    InvalidComponent,
    NotNormalized,
    OutOfRange,
    PartsMismatch,
    PreconditionUnmet,
    WrongLevel,
    ZeroMass,
)

# normalization slack for input mass functions; dust below NEG_TOL is clipped
MASS_TOL = 1e-9
NEG_TOL = 1e-12

IPF_SWEEP_ENV = "CWBOUND_IPF_MAX_SWEEPS"
IPF_DEFAULT_SWEEPS = 100_000


def _clean_mass(items: Iterable[Tuple], what: str) -> Dict:
    out: Dict = {}
    total = 0.0
    for key, p in items:
        p = float(p)
        if p < -NEG_TOL:
            raise NotNormalized(f"{what}: negative mass {p} at {key}")
        if p <= 0.0:
            continue
        if key in out:
            raise NotNormalized(f"{what}: duplicate entry for {key}")
        out[key] = p
        total += p
    if abs(total - 1.0) > MASS_TOL:
        raise NotNormalized(f"{what}: total mass {total:.15g}, expected 1")
    return out


@dataclass(frozen=True, order=True)
class Component:
    """Level-l component label (i, j, k), i + j + k = 2**l."""

    i: int
    j: int
    k: int

    def __post_init__(self):
        for v in (self.i, self.j, self.k):
            if not isinstance(v, int) or v < 0:
                raise InvalidComponent(f"bad index triple ({self.i}, {self.j}, {self.k})")
        s = self.i + self.j + self.k
        if s <= 0 or (s & (s - 1)) != 0:
            raise InvalidComponent(
                f"({self.i}, {self.j}, {self.k}) sums to {s}, not a power of two"
            )

    @property
    def level(self) -> int:
        return (self.i + self.j + self.k).bit_length() - 1

    def indices(self) -> Tuple[int, int, int]:
        return (self.i, self.j, self.k)

    def rotate(self) -> "Component":
        """Cyclic X -> Y -> Z -> X relabeling."""
        return Component(self.j, self.k, self.i)

    def swap(self) -> "Component":
        """X <-> Y relabeling; Z is fixed."""
        return Component(self.j, self.i, self.k)

    def complement_in(self, parent: "Component") -> "Component":
        """The sibling such that self + sibling = parent, position-wise."""
        di, dj, dk = parent.i - self.i, parent.j - self.j, parent.k - self.k
        if min(di, dj, dk) < 0:
            raise InvalidComponent(f"{self} is not contained in {parent}")
        return Component(di, dj, dk)

    def zero_count(self) -> int:
        return (self.i == 0) + (self.j == 0) + (self.k == 0)


def components_at_level(level: int) -> List[Component]:
    """All (i, j, k) with i + j + k = 2**level, lexicographic order."""
    if level < 0:
        raise WrongLevel(f"level {level} < 0")
    n = 1 << level
    return [Component(i, j, n - i - j) for i in range(n + 1) for j in range(n + 1 - i)]


def split_pairs(parent: Component) -> List[Tuple[Component, Component]]:
    """All ordered (left, right) level-(l-1) pairs with left + right = parent."""
    if parent.level < 1:
        raise WrongLevel("level-0 components do not split")
    half = 1 << (parent.level - 1)
    out = []
    for left in components_at_level(parent.level - 1):
        di = parent.i - left.i
        dj = parent.j - left.j
        dk = parent.k - left.k
        if min(di, dj, dk) >= 0 and di <= half and dj <= half and dk <= half:
            out.append((left, Component(di, dj, dk)))
    return out


@dataclass(frozen=True)
class JointDistribution:
    """Probability mass over the level-l components."""

    level: int
    mass: Mapping[Component, float]

    def __post_init__(self):
        cleaned = _clean_mass(dict(self.mass).items(), "joint distribution")
        for comp in cleaned:
            if not isinstance(comp, Component):
                raise InvalidComponent(f"joint distribution keyed by {comp!r}")
            if comp.level != self.level:
                raise WrongLevel(f"{comp} is level {comp.level}, expected {self.level}")
        object.__setattr__(self, "mass", cleaned)

    def p(self, comp: Component) -> float:
        return self.mass.get(comp, 0.0)

    def support(self) -> List[Component]:
        return sorted(self.mass)


@dataclass(frozen=True)
class MarginalDistribution:
    """Mass over block indices {0..2**l} on one axis ('x', 'y' or 'z')."""

    level: int
    axis: str
    mass: Mapping[int, float]

    def __post_init__(self):
        if self.axis not in ("x", "y", "z"):
            raise OutOfRange(f"axis {self.axis!r}")
        cleaned = _clean_mass(dict(self.mass).items(), f"{self.axis}-marginal")
        hi = 1 << self.level
        for idx in cleaned:
            if not isinstance(idx, int) or idx < 0 or idx > hi:
                raise OutOfRange(f"index {idx} outside 0..{hi} at level {self.level}")
        object.__setattr__(self, "mass", cleaned)

    def p(self, idx: int) -> float:
        return self.mass.get(idx, 0.0)

    def as_vector(self) -> np.ndarray:
        v = np.zeros((1 << self.level) + 1)
        for idx, p in self.mass.items():
            v[idx] = p
        return v


def _split_bounds(level: int, parent: int) -> Tuple[int, int]:
    half = 1 << (level - 1)
    return max(0, parent - half), min(parent, half)


@dataclass(frozen=True)
class SplitDistribution:
    """Law of the left-half child of one level-l index.

    An index m at level l decomposes over a halved sequence as
    m = m_left + m_right with both children in {0..2**(l-1)}, so the left
    child ranges over [max(0, m - 2**(l-1)), min(m, 2**(l-1))].
    """

    level: int
    parent: int
    mass: Mapping[int, float]

    def __post_init__(self):
        if self.level < 1:
            raise WrongLevel("splits need level >= 1")
        if self.parent < 0 or self.parent > (1 << self.level):
            raise OutOfRange(f"parent index {self.parent} at level {self.level}")
        cleaned = _clean_mass(dict(self.mass).items(), "split distribution")
        lo, hi = _split_bounds(self.level, self.parent)
        for kl in cleaned:
            if not isinstance(kl, int) or kl < lo or kl > hi:
                raise OutOfRange(
                    f"child {kl} outside [{lo}, {hi}] for parent {self.parent}"
                )
        object.__setattr__(self, "mass", cleaned)

    def p(self, child: int) -> float:
        return self.mass.get(child, 0.0)

    def support(self) -> List[int]:
        return sorted(self.mass)

    def reflected(self) -> "SplitDistribution":
        """Law of the right-half child (child -> parent - child)."""
        return SplitDistribution(
            self.level, self.parent, {self.parent - kl: p for kl, p in self.mass.items()}
        )

    def digest(self) -> str:
        """Canonical 12-decimal fingerprint used to key value tables."""
        items = sorted((kl, round(p, 12)) for kl, p in self.mass.items())
        return ";".join(f"{kl}:{p:.12f}" for kl, p in items if p != 0.0)


def point_split(level: int, parent: int) -> SplitDistribution:
    """The forced split when the child range is a single index."""
    lo, hi = _split_bounds(level, parent)
    if lo != hi:
        raise PreconditionUnmet(f"parent {parent} at level {level} has free splits")
    return SplitDistribution(level, parent, {lo: 1.0})


def uniform_split(level: int, parent: int) -> SplitDistribution:
    lo, hi = _split_bounds(level, parent)
    n = hi - lo + 1
    return SplitDistribution(level, parent, {kl: 1.0 / n for kl in range(lo, hi + 1)})


@dataclass(frozen=True)
class TypicalDistribution:
    """Joint law of child indices under a joint distribution plus splits.

    Entries are tuples of child indices: pairs (k_left, k_right) for one
    split level, quadruples for two nested positions.  All children live at
    `level - 1`; consecutive pairs must sum to a valid parent index.
    """

    level: int
    mass: Mapping[Tuple[int, ...], float]

    def __post_init__(self):
        cleaned = _clean_mass(dict(self.mass).items(), "typical distribution")
        half = 1 << (self.level - 1)
        arity = None
        for key in cleaned:
            if arity is None:
                arity = len(key)
                if arity not in (2, 4):
                    raise OutOfRange(f"typical tuples must be pairs or quadruples, got {key}")
            elif len(key) != arity:
                raise OutOfRange(f"mixed tuple arity: {key}")
            if any((not isinstance(v, int)) or v < 0 or v > half for v in key):
                raise OutOfRange(f"child indices {key} outside 0..{half}")
            for t in range(0, arity, 2):
                if key[t] + key[t + 1] > (1 << self.level):
                    raise OutOfRange(f"pair {key[t:t + 2]} exceeds parent range")
        object.__setattr__(self, "mass", cleaned)

    @property
    def arity(self) -> int:
        return len(next(iter(self.mass)))


def entropy(dist) -> float:
    """Shannon entropy in bits; accepts a mass mapping or any type above."""
    mass = getattr(dist, "mass", dist)
    total = 0.0
    h = 0.0
    for p in mass.values():
        p = float(p)
        if p < -NEG_TOL:
            raise NotNormalized(f"negative mass {p}")
        if p <= 0.0:
            continue
        total += p
        h -= p * math.log2(p)
    if abs(total - 1.0) > MASS_TOL:
        raise NotNormalized(f"total mass {total:.15g}, expected 1")
    return h


def log_multinomial(n, parts: Sequence, *, asymptotic: bool = False) -> float:
    """log2 of the multinomial coefficient n! / prod(parts!).

    With `asymptotic=True` returns the entropy proxy n * H(parts / n)
    instead, which is an upper bound and the exact exponential rate as the
    counts grow proportionally.  The exact form requires integer counts.
    """
    if asymptotic:
        total = float(sum(parts))
        if n <= 0:
            if n == 0 and total == 0:
                return 0.0
            raise PartsMismatch(f"asymptotic form needs n > 0, got {n}")
        if any(p < -NEG_TOL for p in parts):
            raise PartsMismatch("negative part")
        if abs(total - n) > MASS_TOL * max(1.0, abs(n)):
            raise PartsMismatch(f"parts sum to {total}, expected {n}")
        return n * entropy({t: p / n for t, p in enumerate(parts)})

    ip = []
    for p in parts:
        r = round(p)
        if abs(p - r) > 0 or r < 0:
            raise PartsMismatch(f"exact multinomial needs nonnegative integers, got {p}")
        ip.append(int(r))
    if round(n) != n or n < 0:
        raise PartsMismatch(f"exact multinomial needs integer n, got {n}")
    n = int(n)
    if sum(ip) != n:
        raise PartsMismatch(f"parts sum to {sum(ip)}, expected {n}")
    log2e = 1.0 / math.log(2.0)
    return (math.lgamma(n + 1) - sum(math.lgamma(p + 1) for p in ip)) * log2e


def marginals(joint: JointDistribution):
    """The three axis marginals (x, y, z) of a joint component distribution."""
    mx: Dict[int, float] = {}
    my: Dict[int, float] = {}
    mz: Dict[int, float] = {}
    for comp, p in joint.mass.items():
        mx[comp.i] = mx.get(comp.i, 0.0) + p
        my[comp.j] = my.get(comp.j, 0.0) + p
        mz[comp.k] = mz.get(comp.k, 0.0) + p
    lv = joint.level
    return (
        MarginalDistribution(lv, "x", mx),
        MarginalDistribution(lv, "y", my),
        MarginalDistribution(lv, "z", mz),
    )


def level1_joint_from_marginals(
    mx: MarginalDistribution, my: MarginalDistribution, mz: MarginalDistribution
) -> JointDistribution:
    """Reconstruct the unique level-1 joint distribution from its marginals.

    At level 1 the six components are determined linearly: each doubled
    index pins one component, and the mixed components are differences of
    marginal masses.  Raises Infeasible when the differences go negative or
    the reconstruction does not reproduce the inputs.
    """
    for m in (mx, my, mz):
        if m.level != 1:
            raise WrongLevel(f"{m.axis}-marginal is level {m.level}, expected 1")
    raw = {
        Component(0, 0, 2): mz.p(2),
        Component(0, 2, 0): my.p(2),
        Component(2, 0, 0): mx.p(2),
        Component(0, 1, 1): mx.p(0) - my.p(2) - mz.p(2),
        Component(1, 0, 1): my.p(0) - mx.p(2) - mz.p(2),
        Component(1, 1, 0): mz.p(0) - mx.p(2) - my.p(2),
    }
    for comp, p in raw.items():
        if p < -MASS_TOL:
            raise Infeasible(f"marginals force negative mass {p:.3e} on {comp}")
    clipped = {c: max(p, 0.0) for c, p in raw.items()}
    try:
        joint = JointDistribution(1, clipped)
    except NotNormalized as exc:
        raise Infeasible(f"marginals are inconsistent: {exc}") from exc
    rx, ry, rz = marginals(joint)
    for got, want in ((rx, mx), (ry, my), (rz, mz)):
        for idx in range(3):
            if abs(got.p(idx) - want.p(idx)) > 10 * MASS_TOL:
                raise Infeasible(
                    f"reconstruction misses {want.axis}({idx}): "
                    f"{got.p(idx):.12g} vs {want.p(idx):.12g}"
                )
    return joint


def max_entropy_with_marginals(
    support: Optional[Iterable[Component]],
    mx: MarginalDistribution,
    my: MarginalDistribution,
    mz: MarginalDistribution,
    *,
    tol: float = 1e-12,
    max_sweeps: Optional[int] = None,
) -> Tuple[JointDistribution, float]:
    """Maximum-entropy joint distribution with the given axis marginals.

    Runs iterative proportional fitting from the uniform initializer on
    `support` (all level-l components when None), cycling x/y/z scalings
    until every marginal matches within `tol` in L1.  Returns the fitted
    distribution and its entropy in bits.

    Raises Infeasible when the marginals admit no joint distribution on the
    support, and DidNotConverge when the sweep cap is reached while still
    progressing.  The cap defaults to the CWBOUND_IPF_MAX_SWEEPS
    environment variable or 100000.
    """
    lv = mx.level
    if my.level != lv or mz.level != lv:
        raise WrongLevel("marginal levels differ")
    if support is None:
        comps = components_at_level(lv)
    else:
        comps = sorted(set(support))
        for c in comps:
            if c.level != lv:
                raise WrongLevel(f"{c} is level {c.level}, expected {lv}")
    if max_sweeps is None:
        max_sweeps = int(os.environ.get(IPF_SWEEP_ENV, IPF_DEFAULT_SWEEPS))

    full = 1 << lv
    # first moments must agree: every component triple sums to 2**l
    mean_sum = (
        sum(i * p for i, p in mx.mass.items())
        + sum(j * p for j, p in my.mass.items())
        + sum(k * p for k, p in mz.mass.items())
    )
    if abs(mean_sum - full) > 100 * MASS_TOL * full:
        raise Infeasible(
            f"marginal means sum to {mean_sum:.12g}, expected {full}; no joint exists"
        )

    if lv == 1:
        joint = level1_joint_from_marginals(mx, my, mz)
        if support is not None:
            allowed = set(comps)
            stray = [c for c in joint.mass if c not in allowed and joint.mass[c] > MASS_TOL]
            if stray:
                raise Infeasible(f"unique level-1 joint needs components {stray}")
        return joint, entropy(joint)

    tx, ty, tz = mx.as_vector(), my.as_vector(), mz.as_vector()
    # components with a zero-mass axis index can never carry mass
    comps = [c for c in comps if tx[c.i] > 0 and ty[c.j] > 0 and tz[c.k] > 0]
    if not comps:
        raise Infeasible("no support component is consistent with the marginals")
    for vec, axis, have in (
        (tx, "x", {c.i for c in comps}),
        (ty, "y", {c.j for c in comps}),
        (tz, "z", {c.k for c in comps}),
    ):
        missing = [idx for idx in range(full + 1) if vec[idx] > 0 and idx not in have]
        if missing:
            raise Infeasible(f"{axis}-marginal needs indices {missing} absent from support")

    ix = np.array([c.i for c in comps])
    iy = np.array([c.j for c in comps])
    iz = np.array([c.k for c in comps])
    p = np.full(len(comps), 1.0 / len(comps))

    def residual(vec: np.ndarray) -> float:
        rx = float(np.abs(np.bincount(ix, weights=vec, minlength=full + 1) - tx).sum())
        ry = float(np.abs(np.bincount(iy, weights=vec, minlength=full + 1) - ty).sum())
        rz = float(np.abs(np.bincount(iz, weights=vec, minlength=full + 1) - tz).sum())
        return max(rx, ry, rz)

    check_every = 500
    last_check = math.inf
    for sweep in range(1, max_sweeps + 1):
        for idx, target in ((ix, tx), (iy, ty), (iz, tz)):
            cur = np.bincount(idx, weights=p, minlength=full + 1)
            ratio = np.ones_like(cur)
            np.divide(target, cur, out=ratio, where=cur > 0)
            p *= ratio[idx]
        if sweep % 10 == 0 or sweep <= 10:
            res = residual(p)
            if res < tol:
                break
            if sweep % check_every == 0:
                if res > 1e-6 and res > 0.999 * last_check:
                    raise Infeasible(
                        f"iterative fitting stalled at residual {res:.3e}; "
                        "marginals are inconsistent with the support"
                    )
                last_check = res
    else:
        res = residual(p)
        if res >= tol:
            raise DidNotConverge(
                f"residual {res:.3e} after {max_sweeps} sweeps (tol {tol:.1e})"
            )

    joint = JointDistribution(lv, {c: float(v) for c, v in zip(comps, p) if v > 0})
    return joint, entropy(joint)


def average_split(
    joint: JointDistribution,
    splits: Mapping[Component, SplitDistribution],
    k: int,
    *,
    positive_only: bool = False,
) -> SplitDistribution:
    """Mixture of the splits of all components with z-index k.

    Weights are the joint masses, renormalized over the selection;
    `positive_only` restricts to components with both i > 0 and j > 0.
    """
    sel = [
        c
        for c in joint.support()
        if c.k == k and (not positive_only or (c.i > 0 and c.j > 0))
    ]
    weight = sum(joint.p(c) for c in sel)
    if weight <= 0.0:
        raise ZeroMass(f"no mass on z-index {k} selection (positive_only={positive_only})")
    mix: Dict[int, float] = {}
    for c in sel:
        try:
            sd = splits[c]
        except KeyError:
            raise PreconditionUnmet(f"no split assigned to {c}") from None
        if sd.level != joint.level or sd.parent != k:
            raise PreconditionUnmet(f"split of {c} has parent {sd.parent}, level {sd.level}")
        w = joint.p(c) / weight
        for kl, q in sd.mass.items():
            mix[kl] = mix.get(kl, 0.0) + w * q
    return SplitDistribution(joint.level, k, mix)
