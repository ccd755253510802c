"""Shared fixtures: reference parameter sets and independent oracles.

The oracles here deliberately avoid the library's own code paths: the
maximum-entropy oracle goes through scipy's L-BFGS on the dual problem,
counting oracles use exact integer arithmetic, and distribution sampling
uses numpy generators directly.
"""

from __future__ import annotations

import math
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np
import scipy.optimize

from cwbound.combinat import Component, JointDistribution

# reference level-2 parameter set (two-parameter family entries a, b,
# three-fold entries c, d, six-fold entry e); q = 6 throughout
NONROT_Q6 = dict(a=0.102787, b=0.102058, c=0.205540, d=0.000232)
NONROT_Q6["e"] = (1.0 - (2 * NONROT_Q6["a"] + NONROT_Q6["b"]
                         + 3 * NONROT_Q6["c"] + 3 * NONROT_Q6["d"])) / 6.0

# classic fully symmetric level-2 parameter set, q = 6
CLASSIC_Q6 = dict(a=0.000233, b=0.012506, c=0.102546, d=0.205542)

# reference asymmetric level-2 distribution, q = 6.  Swap-symmetric but not
# rotation-symmetric; the masses sum to 1 exactly.
TABLE1_Q6 = {
    (0, 0, 4): 0.00020860,
    (0, 4, 0): 0.00024731,
    (4, 0, 0): 0.00024731,
    (0, 1, 3): 0.01211153,
    (1, 0, 3): 0.01211153,
    (0, 3, 1): 0.01333318,
    (3, 0, 1): 0.01333318,
    (1, 3, 0): 0.01251758,
    (3, 1, 0): 0.01251758,
    (0, 2, 2): 0.10366945,
    (2, 0, 2): 0.10366945,
    (2, 2, 0): 0.10045791,
    (1, 1, 2): 0.20088623,
    (1, 2, 1): 0.20734458,
    (2, 1, 1): 0.20734458,
}
TABLE1_SPLIT_A = 0.03477403  # endpoint mass on the one-zero z-index-2 pair
TABLE1_SPLIT_B = 0.00021015  # endpoint mass on the mixed component


def nonrot_joint(a: float, b: float, c: float, d: float, e: float) -> JointDistribution:
    """Level-2 joint with the x<->y symmetric five-parameter shape."""
    mass = {
        Component(0, 2, 2): a,
        Component(2, 0, 2): a,
        Component(2, 2, 0): b,
        Component(1, 1, 2): c,
        Component(1, 2, 1): c,
        Component(2, 1, 1): c,
        Component(0, 0, 4): d,
        Component(0, 4, 0): d,
        Component(4, 0, 0): d,
    }
    for i, j, k in ((0, 1, 3), (0, 3, 1), (1, 0, 3), (1, 3, 0), (3, 0, 1), (3, 1, 0)):
        mass[Component(i, j, k)] = e
    return JointDistribution(2, mass)


def classic_joint(a: float, b: float, c: float, d: float) -> JointDistribution:
    """Fully rotation+swap symmetric level-2 joint (orbit masses a,b,c,d).

    Rounded published masses rarely sum to 1 exactly, so the joint is
    renormalized; the effect on any derived bound is below 1e-5.
    """
    mass = {}
    for comp in (Component(0, 0, 4), Component(0, 4, 0), Component(4, 0, 0)):
        mass[comp] = a
    for ijk in ((0, 1, 3), (0, 3, 1), (1, 0, 3), (1, 3, 0), (3, 0, 1), (3, 1, 0)):
        mass[Component(*ijk)] = b
    for ijk in ((0, 2, 2), (2, 0, 2), (2, 2, 0)):
        mass[Component(*ijk)] = c
    for ijk in ((1, 1, 2), (1, 2, 1), (2, 1, 1)):
        mass[Component(*ijk)] = d
    total = sum(mass.values())
    return JointDistribution(2, {c_: m / total for c_, m in mass.items()})


def level1_joint(b: float) -> JointDistribution:
    """Symmetric level-1 joint: doubled components get b, mixed get 1/3 - b."""
    a = 1.0 / 3.0 - b
    return JointDistribution(1, {
        Component(0, 1, 1): a, Component(1, 0, 1): a, Component(1, 1, 0): a,
        Component(0, 0, 2): b, Component(0, 2, 0): b, Component(2, 0, 0): b,
    })


def table1_global_params(tau: float, q: int = 6):
    """Assemble GlobalParams for the reference asymmetric distribution."""
    from cwbound.combinat import point_split, uniform_split
    from cwbound.values import (
        ValuePair, ValueTable, level2_112_value, merging_value,
        restricted_merging_value,
    )
    from cwbound.verifier import GlobalParams, endpoint_split

    alpha = JointDistribution(
        2, {Component(*ijk): m for ijk, m in TABLE1_Q6.items()}
    )
    sa = endpoint_split(2, 2, TABLE1_SPLIT_A)
    sb = endpoint_split(2, 2, TABLE1_SPLIT_B)
    splits = {}
    values = ValueTable()
    for comp in alpha.support():
        if comp in (Component(0, 2, 2), Component(2, 0, 2)):
            sd = sa
        elif comp == Component(1, 1, 2):
            sd = sb
        elif comp.k in (0, 4):
            sd = point_split(2, comp.k)
        else:
            sd = uniform_split(2, comp.k)
        splits[comp] = sd
        if comp == Component(1, 1, 2):
            values.add(level2_112_value(q, tau, b=TABLE1_SPLIT_B, component=comp))
        elif comp.indices() in ((1, 2, 1), (2, 1, 1)):
            # the rotations' z-split is the forced uniform one, so they are
            # free to claim the family value at the maximizing endpoint mass
            values.add(level2_112_value(q, tau, component=comp))
        elif comp.zero_count() >= 2:
            values.add(ValuePair(comp, "nonrot", tau, merging_value(comp, q, tau), sd))
        else:
            values.add(restricted_merging_value(comp, sd, q, tau))
    return GlobalParams(q=q, tau=tau, alpha=alpha, splits=splits, values=values)


def maxent_entropy_oracle(
    support: Sequence[Component],
    tx: Dict[int, float],
    ty: Dict[int, float],
    tz: Dict[int, float],
) -> float:
    """Max entropy (bits) over the support with given marginals, via the dual.

    Minimizes log(sum exp(u_i + v_j + w_k)) - <t, (u, v, w)> with L-BFGS;
    at the optimum this equals the maximum entropy in nats.
    """
    xs = sorted(i for i, p in tx.items() if p > 0)
    ys = sorted(j for j, p in ty.items() if p > 0)
    zs = sorted(k for k, p in tz.items() if p > 0)
    xi = {i: t for t, i in enumerate(xs)}
    yi = {j: t for t, j in enumerate(ys)}
    zi = {k: t for t, k in enumerate(zs)}
    comps = [c for c in support if c.i in xi and c.j in yi and c.k in zi]
    cx = np.array([xi[c.i] for c in comps])
    cy = np.array([yi[c.j] for c in comps])
    cz = np.array([zi[c.k] for c in comps])
    targ = np.concatenate(
        [np.array([tx[i] for i in xs]), np.array([ty[j] for j in ys]),
         np.array([tz[k] for k in zs])]
    )
    nx, ny, nz = len(xs), len(ys), len(zs)

    def dual(lam: np.ndarray):
        u, v, w = lam[:nx], lam[nx:nx + ny], lam[nx + ny:]
        score = u[cx] + v[cy] + w[cz]
        m = score.max()
        z = np.exp(score - m)
        total = z.sum()
        val = m + math.log(total) - float(lam @ targ)
        p = z / total
        grad = np.concatenate(
            [np.bincount(cx, weights=p, minlength=nx),
             np.bincount(cy, weights=p, minlength=ny),
             np.bincount(cz, weights=p, minlength=nz)]
        ) - targ
        return val, grad

    res = scipy.optimize.minimize(
        dual, np.zeros(nx + ny + nz), jac=True, method="L-BFGS-B",
        options=dict(maxiter=20000, ftol=1e-18, gtol=1e-14),
    )
    return res.fun / math.log(2.0)
