"""Degradedness and less-noisiness tests between channels sharing an input.

Degradedness is decided exactly as a linear feasibility problem.  Less
noisiness has no finite test; a pair is accepted when it is degraded, or when
p -> I(X;Y) - I(X;Z) looks concave on sampled segments and an explicit search
over auxiliary variables finds no counterexample.  Any counterexample found is
returned as a witness that re-evaluates to the reported negative gap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .channel import (
    EAVESDROPPER, BroadcastWiretapChannel, Channel, ParallelChannel, _plogp,
    marginal_channel, mutual_information,
)
from .errors import DimensionMismatch

DEGRADED_TOL = 1e-6
GAP_TOL = 1e-7


class Relation(str, Enum):
    DEGRADED = "Degraded"
    LESS_NOISY = "LessNoisy"
    INCOMPARABLE = "Incomparable"


class EavesdropperPosition(str, Enum):
    USER_LESS_NOISY = "UserLessNoisyThanEve"
    EVE_LESS_NOISY = "EveLessNoisyThanUser"
    INCOMPARABLE = "Incomparable"


@dataclass(frozen=True)
class AuxiliaryWitness:
    """U -> X construction with I(U;Y) - I(U;Z) equal to ``gap``."""

    p_u: np.ndarray
    p_x_given_u: np.ndarray
    gap: float

    @property
    def cardinality(self) -> int:
        return len(self.p_u)

    def to_json(self) -> dict:
        return {"cardinality": self.cardinality, "p_u": self.p_u.tolist(),
                "p_x_given_u": self.p_x_given_u.tolist(), "gap": self.gap}


@dataclass(frozen=True)
class OrderingVerdict:
    relation: Relation
    direction: tuple[str, str] = ("candidate", "other")
    witness: Channel | AuxiliaryWitness | None = None
    residual: float | None = None
    gap: float | None = None
    undetermined: bool = False
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def accepted(self) -> bool:
        return self.relation in (Relation.DEGRADED, Relation.LESS_NOISY)

    def to_json(self) -> dict:
        w = self.witness
        if isinstance(w, Channel):
            w = {"degrading_channel": w.matrix.tolist()}
        elif isinstance(w, AuxiliaryWitness):
            w = {"auxiliary": w.to_json()}
        return {"relation": self.relation.value, "dominant": self.direction[0], "dominated": self.direction[1],
                "witness": w, "residual": self.residual, "gap": self.gap,
                "undetermined": self.undetermined, "diagnostics": self.diagnostics}


@dataclass(frozen=True)
class LessNoisyBudget:
    """Search parameters for the less-noisy decision.

    ``max_u`` defaults to |X| + 1.  With ``strict`` the definition's strict
    inequality is enforced: the gap normalized by I(U;X) must stay above the
    tolerance, so a channel compared with itself is not accepted.
    """

    max_u: int | None = None
    restarts: int = 200
    steps: int = 500
    num_pairs: int = 2000
    seed: int = 0
    strict: bool = False
    tol: float = GAP_TOL


def _check_pair(a: Channel, b: Channel):
    if a.input_size != b.input_size:
        raise DimensionMismatch(f"channels have different input sizes ({a.input_size} vs {b.input_size})")


# ---------------------------------------------------------------------------
# degradedness


def check_degraded(strong: Channel, weak: Channel, tol: float = DEGRADED_TOL) -> OrderingVerdict:
    """Is ``weak`` a cascade of ``strong`` with some channel D?

    Solves min ||P_strong D - P_weak||_inf over row-stochastic D.
    """
    _check_pair(strong, weak)
    P, Q = strong.matrix, weak.matrix
    nx, ny = P.shape
    nz = Q.shape[1]
    nd = ny * nz
    # variables: D row-major (ny*nz), then t
    A_ub, b_ub = [], []
    for x in range(nx):
        for z in range(nz):
            row = np.zeros(nd + 1)
            row[z:nd:nz] = P[x]           # sum_y P[x,y] D[y,z]
            row[-1] = -1.0
            A_ub.append(row.copy())
            b_ub.append(Q[x, z])
            row[:nd] *= -1
            A_ub.append(row)
            b_ub.append(-Q[x, z])
    A_eq = np.zeros((ny, nd + 1))
    for y in range(ny):
        A_eq[y, y * nz:(y + 1) * nz] = 1.0
    c = np.zeros(nd + 1)
    c[-1] = 1.0
    res = linprog(c, A_ub=np.array(A_ub), b_ub=np.array(b_ub), A_eq=A_eq, b_eq=np.ones(ny),
                  bounds=[(0, None)] * (nd + 1), method="highs")
    if res.status != 0:
        return OrderingVerdict(Relation.INCOMPARABLE, residual=float("inf"),
                               diagnostics={"solver": res.message})
    D = np.clip(res.x[:nd].reshape(ny, nz), 0.0, None)
    D /= D.sum(axis=1, keepdims=True)
    residual = float(np.abs(P @ D - Q).max())
    if residual <= tol:
        return OrderingVerdict(Relation.DEGRADED, witness=Channel(D), residual=residual)
    return OrderingVerdict(Relation.INCOMPARABLE, residual=residual)


# ---------------------------------------------------------------------------
# less noisiness


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    return -_plogp(p).sum(axis=-1)


def _info_gap(pu: np.ndarray, pxu: np.ndarray, Wy: np.ndarray, Wz: np.ndarray):
    """I(U;Y) - I(U;Z) and I(U;X) for a batch of auxiliaries.

    ``pu`` is (R, k), ``pxu`` is (R, k, |X|).
    """
    out = []
    for W in (Wy, Wz, None):
        cond = pxu if W is None else pxu @ W             # (R, k, |out|)
        marg = np.einsum("rk,rko->ro", pu, cond)
        out.append(_entropy_rows(marg) - np.einsum("rk,rk->r", pu, _entropy_rows(cond)))
    return out[0] - out[1], out[2]


def _softmax(a: np.ndarray) -> np.ndarray:
    e = np.exp(a - a.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _concavity_margins(Wy, Wz, num: int, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Sample segment triples; the margin g(m) - t g(p) - (1-t) g(q) of each.

    The margin equals I(U;Y) - I(U;Z) for the binary auxiliary that picks p
    with probability t and q otherwise, so a negative margin is itself a
    witness.
    """
    nx = Wy.shape[0]
    p = rng.dirichlet(np.full(nx, 0.5), size=num)
    q = rng.dirichlet(np.full(nx, 0.5), size=num)
    t = rng.uniform(0.05, 0.95, size=num)
    pu = np.column_stack([t, 1 - t])
    pxu = np.stack([p, q], axis=1)
    gap, _ = _info_gap(pu, pxu, Wy, Wz)
    return gap, pu, pxu, t


def _falsify(Wy, Wz, k: int, budget: LessNoisyBudget, rng):
    """Multi-start coordinate descent on logits minimizing the (normalized) gap.

    Returns (best objective, pu, pxu, gap) of the most negative restart.
    """
    nx = Wy.shape[0]
    R = budget.restarts
    theta = rng.normal(scale=2.0, size=(R, k + k * nx))
    ncoord = theta.shape[1]

    def objective(th):
        pu = _softmax(th[:, :k])
        pxu = _softmax(th[:, k:].reshape(R, k, nx))
        gap, ix = _info_gap(pu, pxu, Wy, Wz)
        if budget.strict:
            # only auxiliaries carrying information about X count; ratio is scale free
            return np.where(ix > 1e-3, gap / np.maximum(ix, 1e-3), np.inf), gap
        return gap, gap

    f, _ = objective(theta)
    step = np.ones((R, ncoord))
    for _ in range(budget.steps):
        for c in range(ncoord):
            for sign in (1.0, -1.0):
                trial = theta.copy()
                trial[:, c] += sign * step[:, c]
                ft, _ = objective(trial)
                better = ft < f
                theta[better] = trial[better]
                f = np.where(better, ft, f)
                if sign > 0:
                    moved = better
                else:
                    moved = moved | better
            step[~moved, c] *= 0.5
        if not budget.strict and f.min() < -budget.tol:
            break
        if (step < 1e-7).all():
            break
    i = int(np.argmin(f))
    pu = _softmax(theta[i:i + 1, :k])[0]
    pxu = _softmax(theta[i:i + 1, k:].reshape(1, k, nx))[0]
    _, gap = objective(theta)
    return float(f[i]), pu, pxu, float(gap[i])


def auxiliary_gap(p_u, p_x_given_u, candidate: Channel, other: Channel) -> float:
    """I(U;Y) - I(U;Z) evaluated directly through the channel-core routines."""
    p_u = np.asarray(p_u, dtype=float)
    pxu = Channel(np.asarray(p_x_given_u, dtype=float))
    return (mutual_information(p_u, Channel(pxu.matrix @ candidate.matrix))
            - mutual_information(p_u, Channel(pxu.matrix @ other.matrix)))


def _witness(pu, pxu, candidate, other) -> AuxiliaryWitness:
    pu = pu / pu.sum()
    pxu = pxu / pxu.sum(axis=1, keepdims=True)
    return AuxiliaryWitness(pu, pxu, auxiliary_gap(pu, pxu, candidate, other))


def check_less_noisy(candidate: Channel, other: Channel, budget: LessNoisyBudget | None = None) -> OrderingVerdict:
    """Is ``candidate`` less noisy than ``other`` (I(U;cand) >= I(U;other) for all U)?"""
    _check_pair(candidate, other)
    budget = budget or LessNoisyBudget()
    diag: dict = {"strict": budget.strict}
    if not budget.strict:
        deg = check_degraded(candidate, other)
        diag["degraded_residual"] = deg.residual
        if deg.accepted:
            return OrderingVerdict(Relation.LESS_NOISY, witness=deg.witness, residual=deg.residual,
                                   diagnostics={**diag, "stage": "degraded"})

    rng = np.random.default_rng(budget.seed)
    Wy, Wz = candidate.matrix, other.matrix
    margins, pu, pxu, _ = _concavity_margins(Wy, Wz, budget.num_pairs, rng)
    j = int(np.argmin(margins))
    diag["min_concavity_margin"] = float(margins[j])
    if margins[j] < -budget.tol:
        w = _witness(pu[j], pxu[j], candidate, other)
        if w.gap < -budget.tol:
            return OrderingVerdict(Relation.INCOMPARABLE, witness=w, gap=w.gap,
                                   diagnostics={**diag, "stage": "concavity"})

    max_u = budget.max_u or candidate.input_size + 1
    best = None
    for k in range(2, max_u + 1):
        obj, bu, bx, gap = _falsify(Wy, Wz, k, budget, rng)
        if best is None or obj < best[0]:
            best = (obj, bu, bx, gap)
        if obj < -budget.tol:
            break
    obj, bu, bx, gap = best
    diag["falsifier_objective"] = obj
    w = _witness(bu, bx, candidate, other)
    if w.gap < -budget.tol:
        return OrderingVerdict(Relation.INCOMPARABLE, witness=w, gap=w.gap,
                               diagnostics={**diag, "stage": "falsifier"})
    if budget.strict and obj <= budget.tol:
        # boundary: gap not strictly positive, but no negative witness either
        return OrderingVerdict(Relation.INCOMPARABLE, witness=w, gap=w.gap,
                               diagnostics={**diag, "stage": "strict-boundary"})
    if diag["min_concavity_margin"] < -budget.tol:
        # concavity failed numerically yet no auxiliary reproduces a negative gap
        return OrderingVerdict(Relation.INCOMPARABLE, gap=w.gap, undetermined=True,
                               diagnostics={**diag, "stage": "undetermined"})
    return OrderingVerdict(Relation.LESS_NOISY, gap=w.gap, diagnostics={**diag, "stage": "concavity+falsifier"})


# ---------------------------------------------------------------------------
# parallel channels


@dataclass(frozen=True)
class SubchannelOrder:
    strongest_user: int
    strongest_certified: bool
    eavesdropper_position: tuple[EavesdropperPosition, ...]
    full_order: tuple[str, ...] | None
    relations: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        return {"strongest_user": self.strongest_user + 1, "strongest_certified": self.strongest_certified,
                "eavesdropper_position": [p.value for p in self.eavesdropper_position],
                "full_order": list(self.full_order) if self.full_order else None,
                "relations": {f"{a}>{b}": v for (a, b), v in self.relations.items()}}


@dataclass(frozen=True)
class SubchannelClassification:
    subchannels: tuple[SubchannelOrder, ...]

    @property
    def strongest(self) -> list[int]:
        return [s.strongest_user for s in self.subchannels]

    def to_json(self) -> dict:
        return {"subchannels": [s.to_json() for s in self.subchannels]}


def _terminal_name(t) -> str:
    return EAVESDROPPER if t == EAVESDROPPER else f"Y{t + 1}"


def classify_subchannel(bc: BroadcastWiretapChannel, budget: LessNoisyBudget | None = None) -> SubchannelOrder:
    K = bc.num_receivers
    terminals = list(range(K)) + [EAVESDROPPER]
    chans = {t: marginal_channel(bc, t) for t in terminals}
    less = {}
    for a in terminals:
        for b in terminals:
            if a != b:
                less[a, b] = check_less_noisy(chans[a], chans[b], budget).accepted

    wins = {t: sum(less[t, o] for o in terminals if o != t) for t in terminals}
    certified = [k for k in range(K) if all(less[k, j] for j in range(K) if j != k)]
    if certified:
        rho, ok = certified[0], True
    else:
        rho, ok = max(range(K), key=lambda k: (wins[k], -k)), False

    pos = []
    for k in range(K):
        if less[k, EAVESDROPPER]:
            pos.append(EavesdropperPosition.USER_LESS_NOISY)
        elif less[EAVESDROPPER, k]:
            pos.append(EavesdropperPosition.EVE_LESS_NOISY)
        else:
            pos.append(EavesdropperPosition.INCOMPARABLE)

    order = sorted(terminals, key=lambda t: (-wins[t], K if t == EAVESDROPPER else t))
    total = all(less[order[i], order[j]] for i in range(len(order)) for j in range(i + 1, len(order)))
    rel = {(_terminal_name(a), _terminal_name(b)): v for (a, b), v in less.items()}
    return SubchannelOrder(rho, ok, tuple(pos), tuple(_terminal_name(t) for t in order) if total else None, rel)


def classify_parallel(pc: ParallelChannel | BroadcastWiretapChannel,
                      budget: LessNoisyBudget | None = None) -> SubchannelClassification:
    """Per sub-channel: strongest receiver, eavesdropper position and total order.

    The strongest user is the lowest-indexed receiver less noisy than every
    other receiver.  When no receiver qualifies the one winning the most
    comparisons is reported with ``strongest_certified`` False.
    """
    subs: Sequence[BroadcastWiretapChannel] = pc.subchannels if isinstance(pc, ParallelChannel) else (pc,)
    return SubchannelClassification(tuple(classify_subchannel(bc, budget) for bc in subs))


def check_markov(bc: BroadcastWiretapChannel, terminals: Sequence, tol: float = DEGRADED_TOL) -> tuple[bool, float]:
    """Does X -> T1 -> T2 -> ... hold on the joint law of ``bc``?

    The conditional-MI rate expressions depend on how the outputs are coupled,
    not only on their marginals, so physical degradedness is checked on the
    joint: p(t_{j+1} | x, t_1..t_j) must equal p(t_{j+1} | t_j) wherever the
    context has positive probability.  Returns (holds, worst deviation).
    """
    from .channel import resolve_receiver

    axes = []
    for t in terminals:
        r = resolve_receiver(bc, t)
        axes.append(bc.num_receivers if r == EAVESDROPPER else r)
    T = bc.tensor()                                   # (x, y1..yK, z)
    drop = tuple(1 + a for a in range(bc.num_receivers + 1) if a not in axes)
    T = T.sum(axis=drop) if drop else T
    kept = sorted(axes)
    T = T.transpose([0] + [1 + kept.index(a) for a in axes])
    P = T / T.shape[0]                                # uniform input
    worst = 0.0
    for j in range(1, len(axes)):
        Pj = P.sum(axis=tuple(range(j + 2, P.ndim))) if P.ndim > j + 2 else P
        ctx = Pj.sum(axis=-1, keepdims=True)
        cond = np.divide(Pj, ctx, out=np.zeros_like(Pj), where=ctx > 1e-12)
        pair = Pj.sum(axis=tuple(range(j)))           # (t_j, t_{j+1})
        ref = np.divide(pair, pair.sum(axis=-1, keepdims=True), out=np.zeros_like(pair),
                        where=pair.sum(axis=-1, keepdims=True) > 1e-12)
        dev = np.abs(cond - ref) * (ctx > 1e-12)
        worst = max(worst, float(dev.max()))
    return worst <= tol, worst
