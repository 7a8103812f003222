"""Evaluate the capacity theorems: scalar capacities and rate-region unions.

Every region evaluator returns an inner approximation: a union of pieces, one
per evaluated auxiliary distribution (and time-sharing fraction), together
with its convex hull.  Candidate distributions come from three sources, all
seeded: a dyadic grid on the input simplex combined with the degenerate
auxiliaries (U constant, U = X), Dirichlet(1) samples, and batched coordinate
ascent on softmax logits that maximizes a weighted rate sum.  For two
sub-channels the per-sub-channel candidate pools are crossed, so every pair
contributes a piece.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import asdict, dataclass, field
from math import comb
from typing import Sequence

import numpy as np

from .channel import (
    AuxiliaryChain, BroadcastWiretapChannel, ParallelChannel, as_parallel, batch_cmi,
    marginal_channel, mutual_information,
)
from .errors import DimensionMismatch, HypothesisViolated, ValidationError
from .geometry import (
    LinearInequality, RateRegion, eliminate_all, hull_accumulate, pareto_frontier, support,
    vertex_map, weight_grid,
)
from .orderings import (
    EavesdropperPosition, LessNoisyBudget, check_degraded, check_less_noisy, check_markov,
    classify_parallel,
)

LOG2E = np.log2(np.e)
GRID_CAP = 1_000_000
POOL_GRID_CAP = 4096
PRODUCT_CAP = 250_000


@dataclass(frozen=True)
class SearchConfig:
    aux_cardinalities: tuple[int, ...] | None = None
    num_restarts: int = 8
    grid_resolution: int = 16
    ascent_steps: int = 60
    seed: int = 0
    alpha_steps: int = 11
    num_samples: int = 48
    strict: bool = True
    order_budget: LessNoisyBudget = LessNoisyBudget(restarts=40, steps=80)

    def __post_init__(self):
        ints = [self.num_samples, self.alpha_steps]
        if any(v < 0 for v in (self.num_restarts, self.ascent_steps, self.num_samples)):
            raise ValidationError("search counts must be nonnegative")
        if self.grid_resolution < 2:
            raise ValidationError("grid_resolution must be at least 2")
        if self.alpha_steps < 2 or min(ints) < 0:
            raise ValidationError("alpha_steps must be at least 2")
        if self.aux_cardinalities is not None:
            cards = tuple(int(c) for c in self.aux_cardinalities)
            if any(c < 1 for c in cards):
                raise ValidationError("auxiliary cardinalities must be positive")
            object.__setattr__(self, "aux_cardinalities", cards)

    def to_json(self) -> dict:
        out = asdict(self)
        out["aux_cardinalities"] = list(self.aux_cardinalities) if self.aux_cardinalities else None
        return out


@dataclass
class CapacityResult:
    """Scalar capacity (``value``) and/or region, with the achieving distributions."""

    value: float | None
    region: RateRegion | None = None
    argmax: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    formula_only: bool = False
    # candidate pools behind a two-user region (per sub-channel chains and the kept indices)
    pools: tuple | None = field(default=None, repr=False, compare=False)

    def to_json(self) -> dict:
        from .geometry import region_to_json
        out = {"value": self.value, "formula_only": self.formula_only,
               "argmax": self.argmax, "diagnostics": self.diagnostics}
        if self.region is not None:
            out["region"] = region_to_json(self.region)
        return out


# ---------------------------------------------------------------------------
# small utilities


def dyadic(r: int) -> int:
    """Largest power of two not above ``r``; grids at these sizes are nested."""
    return 1 << (int(r).bit_length() - 1)


def simplex_grid(n: int, r: int) -> np.ndarray:
    """All points of the n-simplex with coordinates in {0, 1/r, ..., 1}."""
    pts = []
    for bars in itertools.combinations(range(r + n - 1), n - 1):
        edges = (-1,) + bars + (r + n - 1,)
        pts.append([edges[i + 1] - edges[i] - 1 for i in range(n)])
    return np.array(pts, dtype=float) / r


def grid_for(n: int, resolution: int, cap: int) -> np.ndarray:
    r = dyadic(resolution)
    while r > 1 and comb(r + n - 1, n - 1) > cap:
        r //= 2
    return simplex_grid(n, r)


def project_simplex(V: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex."""
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    k = np.arange(1, V.shape[1] + 1)
    cond = U - css / k > 0
    rho = V.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(len(V)), rho] / (rho + 1)
    return np.maximum(V - theta[:, None], 0.0)


def _softmax(a: np.ndarray) -> np.ndarray:
    e = np.exp(a - a.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _enforce(ok: bool, message: str, cfg: SearchConfig, diag: dict) -> bool:
    """Raise in strict mode, otherwise warn; returns True when output is formula-only."""
    if ok:
        return False
    if cfg.strict:
        raise HypothesisViolated(message)
    warnings.warn(f"{message}; output is formula-only", stacklevel=3)
    diag.setdefault("hypothesis_warnings", []).append(message)
    return True


def _spread(values: np.ndarray) -> dict:
    """Restart objective values and their spread (a convergence proxy); empty pieces count as None."""
    fin = values[np.isfinite(values)]
    return {"restart_values": [float(v) if np.isfinite(v) else None for v in values],
            "restart_spread": float(fin.max() - fin.min()) if len(fin) else None}


def _prune_dominated(T: np.ndarray) -> np.ndarray:
    """Indices of rows not weakly dominated by another row (first copy of ties kept)."""
    n = len(T)
    keep = np.ones(n, dtype=bool)
    step = max(1, 2_000_000 // max(1, n * T.shape[1]))
    idx = np.arange(n)
    for s in range(0, n, step):
        Ti = T[s:s + step]
        ge = (T[None, :, :] >= Ti[:, None, :] - 1e-12).all(axis=2)      # j dominates-or-equals i
        gt = (T[None, :, :] > Ti[:, None, :] + 1e-12).any(axis=2)
        eq = ge & ~gt
        earlier = idx[None, :] < idx[s:s + step, None]
        dom = ge & (gt | (eq & earlier))
        np.fill_diagonal(dom[:, s:s + step], False)
        keep[s:s + step] = ~dom.any(axis=1)
    return np.nonzero(keep)[0]


# ---------------------------------------------------------------------------
# batched auxiliary chains


class ChainBatch:
    """A batch of chains p(u_1) p(u_2|u_1) ... p(x|u_last) stored as arrays.

    ``links[0]`` has shape (R, c_1) and ``links[j]`` shape (R, c_j, c_{j+1}),
    the last axis of the final link being the channel input.
    """

    def __init__(self, links: Sequence[np.ndarray]):
        self.links = [np.asarray(L, dtype=float) for L in links]

    def __len__(self):
        return self.links[0].shape[0]

    @property
    def shapes(self) -> list[tuple[int, ...]]:
        return [L.shape[1:] for L in self.links]

    @classmethod
    def random(cls, cards: Sequence[int], count: int, rng) -> "ChainBatch":
        links = [rng.dirichlet(np.ones(cards[0]), size=count)]
        for a, b in zip(cards, cards[1:]):
            links.append(rng.dirichlet(np.ones(b), size=(count, a)))
        return cls(links)

    @classmethod
    def degenerate(cls, P: np.ndarray, cards: Sequence[int]) -> "ChainBatch":
        """Each input law in ``P`` with auxiliaries that are constant or copies of X.

        With auxiliaries U_1..U_m the patterns are: the first j constant and
        the rest equal to X, for j = 0..m.  A copy needs |U| >= |X|.
        """
        R, nx = P.shape
        aux = list(cards[:-1])
        if not aux:
            return cls([P])
        sizes = aux + [nx]
        batches = []
        for j in range(len(aux) + 1):
            if any(aux[i] < nx for i in range(j, len(aux))):
                continue
            # variable i (0-based) is constant for i < j, a copy of X otherwise
            first = np.zeros((R, sizes[0]))
            if j == 0:
                first[:, :nx] = P
            else:
                first[:, 0] = 1.0
            links = [first]
            for i in range(1, len(sizes)):
                L = np.zeros((R, sizes[i - 1], sizes[i]))
                if i - 1 >= j:                       # copy -> copy: identity on the X symbols
                    for s in range(sizes[i - 1]):
                        L[:, s, min(s, nx - 1)] = 1.0
                elif i >= j:                         # constant -> copy: draw X
                    L[:, :, :nx] = P[:, None, :]
                else:                                # constant -> constant
                    L[:, :, 0] = 1.0
                links.append(L)
            batches.append(cls(links))
        return cls.concat(batches)

    @classmethod
    def concat(cls, batches: Sequence["ChainBatch"]) -> "ChainBatch":
        batches = [b for b in batches if len(b)]
        return cls([np.concatenate([b.links[i] for b in batches]) for i in range(len(batches[0].links))])

    @classmethod
    def from_chains(cls, chains: Sequence[AuxiliaryChain]) -> "ChainBatch":
        links = [np.stack([c.links[0].probs for c in chains])]
        for i in range(1, chains[0].depth):
            links.append(np.stack([c.links[i].matrix for c in chains]))
        return cls(links)

    def take(self, idx) -> "ChainBatch":
        return ChainBatch([L[idx] for L in self.links])

    def chain(self, i: int) -> AuxiliaryChain:
        return AuxiliaryChain(tuple(L[i] for L in self.links))

    def theta(self) -> np.ndarray:
        return np.concatenate([np.log(np.clip(L, 1e-9, None)).reshape(len(self), -1) for L in self.links], axis=1)

    @classmethod
    def from_theta(cls, theta: np.ndarray, shapes) -> "ChainBatch":
        links, pos = [], 0
        for shp in shapes:
            size = int(np.prod(shp))
            links.append(_softmax(theta[:, pos:pos + size].reshape((len(theta),) + tuple(shp))))
            pos += size
        return cls(links)

    def joint(self) -> np.ndarray:
        """Batched joint over (U_1, ..., X), shape (R, c_1, ..., |X|)."""
        J = self.links[0]
        for L in self.links[1:]:
            shape = (L.shape[0],) + (1,) * (J.ndim - 2) + L.shape[1:]
            J = J[..., None] * L.reshape(shape)
        return J


def _with_channel(J: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Append the channel's output axes to a batched joint whose last axis is X."""
    return J.reshape(J.shape + (1,) * (W.ndim - 1)) * W.reshape((1,) * (J.ndim - 1) + W.shape)


def _coordinate_ascent(theta: np.ndarray, objective, steps: int, step0: float = 1.0):
    """Batched coordinate ascent with per-coordinate step halving (maximization)."""
    f = objective(theta)
    step = np.full(theta.shape, step0)
    for _ in range(steps):
        for c in range(theta.shape[1]):
            moved = np.zeros(len(theta), dtype=bool)
            for sign in (1.0, -1.0):
                trial = theta.copy()
                trial[:, c] += sign * step[:, c]
                ft = objective(trial)
                better = ft > f + 1e-13
                theta[better] = trial[better]
                f = np.where(better, ft, f)
                moved |= better
            step[~moved, c] *= 0.5
        if (step < 1e-6).all():
            break
    return theta, f


def _directions(d: int) -> np.ndarray:
    """Ascent directions: the all-ones sum rate first, then a coarse weight grid."""
    grid = weight_grid(d, 3)
    ones = np.ones((1, d)) / d
    grid = grid[~np.all(np.isclose(grid, ones), axis=1)]
    return np.vstack([ones, grid])


# ---------------------------------------------------------------------------
# degraded receivers, one auxiliary chain (region_theorem1, region_corollary1)


def _default_cards(nx: int, n_aux: int, cfg: SearchConfig) -> tuple[int, ...]:
    if cfg.aux_cardinalities is None:
        aux = (nx,) * n_aux
    else:
        aux = tuple(cfg.aux_cardinalities)
        if len(aux) < n_aux:
            aux = aux + (aux[-1] if aux else nx,) * (n_aux - len(aux))
        aux = aux[:n_aux]
    return aux + (nx,)


def chain_bounds(batch: ChainBatch, bc: BroadcastWiretapChannel, conditional: bool) -> np.ndarray:
    """Bound vector of the degraded-receiver region for each chain in ``batch``.

    Entry l-1 bounds R0 + R1 + ... + Rl: sum_{k<=l} I(U_k;Y_k|U_{k-1}) - I(U_l;Z),
    or with ``conditional`` sum_{k<=l} I(U_k;Y_k|U_{k-1},Z).
    """
    K = bc.num_receivers
    J = batch.joint()
    nax = J.ndim - 2
    if nax != K - 1:
        raise DimensionMismatch(f"chain has {nax} auxiliaries, need {K - 1} for {K} receivers")
    terms, zterms = [], []
    for k in range(K):
        ny, nz = bc.receiver_alphabets[k], bc.eavesdropper_alphabet
        W = bc.pair(k).matrix.reshape(bc.input_size, ny, nz)
        full = _with_channel(J, W)
        u = k if k < nax else nax
        prev = [k - 1] if k >= 1 else []
        y, z = nax + 1, nax + 2
        terms.append(batch_cmi(full, [u], [y], prev + ([z] if conditional else [])))
        zterms.append(batch_cmi(full, [u], [z]))
    T = np.cumsum(np.stack(terms, axis=1), axis=1)
    return T if conditional else T - np.stack(zterms, axis=1)


def _degraded_A(K: int) -> np.ndarray:
    A = np.zeros((K, K + 1))
    for ell in range(K):
        A[ell, : ell + 2] = 1.0
    return A


def _rate_names(K: int) -> tuple[str, ...]:
    return tuple(f"R{k}" for k in range(K + 1))


def _degraded_hypotheses(bc: BroadcastWiretapChannel, conditional: bool, cfg: SearchConfig, diag: dict) -> bool:
    K = bc.num_receivers
    chans = [marginal_channel(bc, k) for k in range(K)]
    problems = []
    for k in range(K - 1, 0, -1):
        if not check_degraded(chans[k], chans[k - 1]).accepted:
            problems.append(f"Y{k} is not degraded with respect to Y{k + 1}")
    if conditional:
        ok, dev = check_markov(bc, [f"Y{k}" for k in range(K, 0, -1)] + ["Z"])
        if not ok:
            problems.append(f"X -> Y{K} -> ... -> Y1 -> Z is not a Markov chain (deviation {dev:.3g})")
    else:
        z = marginal_channel(bc, "Z")
        for k in range(K):
            if not check_less_noisy(chans[k], z, cfg.order_budget).accepted:
                problems.append(f"Y{k + 1} is not less noisy than the eavesdropper")
    return _enforce(not problems, "; ".join(problems), cfg, diag)


def _chain_pool(cards, nx, cfg: SearchConfig, stream: int) -> ChainBatch:
    P = grid_for(nx, cfg.grid_resolution, POOL_GRID_CAP)
    parts = [ChainBatch.degenerate(P, cards)]
    if cfg.num_samples:
        parts.append(ChainBatch.random(cards, cfg.num_samples, np.random.default_rng([cfg.seed, stream])))
    return ChainBatch.concat(parts)


def _restart_starts(cards, cfg: SearchConfig, stream: int) -> list[ChainBatch]:
    return [ChainBatch.random(cards, 1, np.random.default_rng([cfg.seed, stream, i])) for i in range(cfg.num_restarts)]


def _degraded_region(bc, cfg, chains, conditional) -> CapacityResult:
    cfg = cfg or SearchConfig()
    if isinstance(bc, ParallelChannel):
        if len(bc) != 1:
            raise DimensionMismatch("this theorem takes a single (non-parallel) channel")
        bc = bc[0]
    K = bc.num_receivers
    if K + 1 > 4:
        raise ValidationError("regions are enumerated for at most 3 receivers")
    diag: dict = {}
    formula_only = _degraded_hypotheses(bc, conditional, cfg, diag)
    A = _degraded_A(K)
    vm = vertex_map(A)
    cards = _default_cards(bc.input_size, K - 1, cfg)

    if chains is not None:
        pool = ChainBatch.from_chains(list(chains))
    else:
        pool = _chain_pool(cards, bc.input_size, cfg, 1)
        starts = _restart_starts(cards, cfg, 2)
        if starts and cfg.ascent_steps:
            start = ChainBatch.concat(starts)
            dirs = _directions(K + 1)
            W = dirs[np.arange(len(start)) % len(dirs)]
            shapes = start.shapes

            def objective(theta):
                B = chain_bounds(ChainBatch.from_theta(theta, shapes), bc, conditional)
                return vm.support_rows(B, W)

            theta, f = _coordinate_ascent(start.theta(), objective, cfg.ascent_steps)
            diag.update(_spread(f))
            pool = ChainBatch.concat([pool, start, ChainBatch.from_theta(theta, shapes)])
    B = chain_bounds(pool, bc, conditional)
    keep = _prune_dominated(B)
    region = hull_accumulate(RateRegion(_rate_names(K), A, B[keep]))
    value = float(support(region, np.ones(K + 1))[0])
    argmax = _argmax_records(region, lambda pid: {"chains": [pool.chain(int(keep[pid])).to_json()],
                                                  "bounds": B[keep[pid]].tolist()})
    diag.update(pieces_evaluated=len(B), pieces_kept=len(keep), cardinalities=list(cards))
    return CapacityResult(value, region, argmax, diag, formula_only)


def _argmax_records(region: RateRegion, describe) -> list:
    dirs = _directions(region.dim)
    pts, ids = pareto_frontier(region, dirs, with_ids=True)
    out = []
    for p, pid in zip(pts, ids):
        rec = {"point": p.tolist(), "piece": int(pid)}
        if pid >= 0:
            rec.update(describe(int(pid)))
        out.append(rec)
    return out


def region_theorem1(bc, cfg: SearchConfig | None = None, chains=None) -> CapacityResult:
    """Degraded receivers with a more noisy eavesdropper.

    R0 + R1 + ... + Rl <= sum_{k<=l} I(U_k;Y_k|U_{k-1}) - I(U_l;Z), l = 1..K,
    with receivers ordered X -> Y_K -> ... -> Y_1.  ``value`` is the largest
    total rate R0 + R1 + ... + RK on the hull.
    """
    return _degraded_region(bc, cfg, chains, conditional=False)


def region_corollary1(bc, cfg: SearchConfig | None = None, chains=None) -> CapacityResult:
    """Physically degraded chain X -> Y_K -> ... -> Y_1 -> Z; bounds use I(U_k;Y_k|U_{k-1},Z)."""
    return _degraded_region(bc, cfg, chains, conditional=True)


# ---------------------------------------------------------------------------
# parallel channels with product inputs: common-message and sum capacities


def _mi_and_grad(P: np.ndarray, W: np.ndarray):
    """I(X;Y) for each input row of P and its gradient with respect to P."""
    q = P @ W
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.where(W[None] > 0, np.log2(W[None] / q[:, None, :]), 0.0)
    D = (W[None] * logr).sum(axis=2)              # D(W_x || q) per x
    return (P * D).sum(axis=1), D - LOG2E


def _maxmin(subs: Sequence[tuple[list[np.ndarray], np.ndarray]], cfg: SearchConfig, stream: int):
    """max over product inputs of min_k sum_l [I(X_l;Y_kl) - I(X_l;Z_l)]^+.

    ``subs`` holds, per sub-channel, the list of receiver matrices and the
    eavesdropper matrix.  Returns (value, inputs, diagnostics).
    """
    K = len(subs[0][0])
    sizes = [s[1].shape[0] for s in subs]

    def terms(l, P, grad=False):
        Wys, Wz = subs[l]
        iz, gz = _mi_and_grad(P, Wz)
        vals, grads = [], []
        for Wy in Wys:
            iy, gy = _mi_and_grad(P, Wy)
            d = iy - iz
            vals.append(np.maximum(d, 0.0))
            grads.append(np.where((d > 0)[:, None], gy - gz, 0.0))
        return np.stack(vals, axis=1), np.stack(grads, axis=1)   # (R, K), (R, K, nx)

    best_val, best_p, source = -np.inf, None, None
    diag: dict = {}

    # grid cross-check over the product of simplices (nested dyadic grids)
    r = dyadic(cfg.grid_resolution)
    while r >= 1:
        counts = [comb(r + n - 1, n - 1) for n in sizes]
        if np.prod(counts, dtype=float) <= GRID_CAP:
            break
        r //= 2
    if r >= 1:
        grids = [simplex_grid(n, r) for n in sizes]
        total = np.zeros([len(g) for g in grids] + [K])
        for l, g in enumerate(grids):
            v, _ = terms(l, g)
            shape = [1] * len(grids) + [K]
            shape[l] = len(g)
            total = total + v.reshape(shape)
        obj = total.min(axis=-1)
        flat = int(np.argmax(obj))
        idx = np.unravel_index(flat, obj.shape)
        best_val, best_p, source = float(obj[idx]), [grids[l][i] for l, i in enumerate(idx)], "grid"
        diag["grid_resolution"] = r
        diag["grid_value"] = best_val

    # projected subgradient ascent, one independent stream per restart
    if cfg.num_restarts and cfg.ascent_steps:
        R = cfg.num_restarts
        rngs = [np.random.default_rng([cfg.seed, stream, i]) for i in range(R)]
        Ps = [np.stack([g.dirichlet(np.ones(n)) for g in rngs]) for n in sizes]
        steps = cfg.ascent_steps * 5
        run_best = np.full(R, -np.inf)
        run_arg = [P.copy() for P in Ps]
        for t in range(steps):
            vals, grads = zip(*(terms(l, Ps[l]) for l in range(len(subs))))
            tot = sum(vals)                                   # (R, K)
            obj = tot.min(axis=1)
            k_act = np.argmin(tot, axis=1)
            better = obj > run_best
            run_best = np.where(better, obj, run_best)
            for l in range(len(subs)):
                run_arg[l][better] = Ps[l][better]
            eta = 0.5 / np.sqrt(t + 1.0)
            for l in range(len(subs)):
                g = grads[l][np.arange(R), k_act]
                Ps[l] = project_simplex(Ps[l] + eta * g)
        diag.update(_spread(run_best))
        i = int(np.argmax(run_best))
        if run_best[i] > best_val:
            best_val, best_p, source = float(run_best[i]), [P[i] for P in run_arg], "ascent"
    diag["argmax_source"] = source
    return best_val, best_p, diag


def _subchannel_matrices(bc: BroadcastWiretapChannel, users=None):
    users = range(bc.num_receivers) if users is None else users
    return [marginal_channel(bc, k).matrix for k in users], marginal_channel(bc, "Z").matrix


def _reevaluate(pc: ParallelChannel, inputs, users_per_sub) -> float:
    """min over users of the clipped per-sub-channel sums, via channel-core routines."""
    K = len(users_per_sub[0])
    totals = np.zeros(K)
    for l, bc in enumerate(pc.subchannels):
        z = marginal_channel(bc, "Z")
        iz = mutual_information(inputs[l], z)
        for j, k in enumerate(users_per_sub[l]):
            totals[j] += max(0.0, mutual_information(inputs[l], marginal_channel(bc, k)) - iz)
    return float(totals.min())


def common_message_capacity(pc, cfg: SearchConfig | None = None) -> CapacityResult:
    """C0 = max over product inputs of min_k sum_l [I(X_l;Y_kl) - I(X_l;Z_l)]^+."""
    cfg = cfg or SearchConfig()
    pc = as_parallel(pc)
    diag: dict = {}
    cls = classify_parallel(pc, cfg.order_budget)
    unresolved = [(l + 1, k + 1) for l, s in enumerate(cls.subchannels)
                  for k, pos in enumerate(s.eavesdropper_position) if pos is EavesdropperPosition.INCOMPARABLE]
    formula_only = _enforce(not unresolved, "user/eavesdropper pairs without a less-noisy order "
                            f"(sub-channel, user): {unresolved}", cfg, diag)
    diag["classification"] = cls.to_json()
    subs = [_subchannel_matrices(bc) for bc in pc.subchannels]
    _, inputs, d = _maxmin(subs, cfg, 3)
    diag.update(d)
    users = [list(range(pc.num_receivers))] * len(pc)
    value = _reevaluate(pc, inputs, users)
    argmax = [{"subchannel": l + 1, "input": p.tolist()} for l, p in enumerate(inputs)]
    return CapacityResult(value, None, argmax, diag, formula_only)


def sum_secrecy_capacity(pc, cfg: SearchConfig | None = None) -> CapacityResult:
    """max sum_l [I(X_l;Y_rho(l),l) - I(X_l;Z_l)]^+, solved per sub-channel."""
    cfg = cfg or SearchConfig()
    pc = as_parallel(pc)
    diag: dict = {}
    cls = classify_parallel(pc, cfg.order_budget)
    missing = [l + 1 for l, s in enumerate(cls.subchannels) if s.full_order is None]
    formula_only = _enforce(not missing, f"sub-channels without a total less-noisy order: {missing}", cfg, diag)
    diag["classification"] = cls.to_json()
    rho = cls.strongest
    inputs, parts = [], []
    for l, bc in enumerate(pc.subchannels):
        val, p, d = _maxmin([_subchannel_matrices(bc, [rho[l]])], cfg, 100 + l)
        inputs.append(p[0])
        parts.append(d)
    per_sub = [_reevaluate(ParallelChannel((bc,)), [inputs[l]], [[rho[l]]]) for l, bc in enumerate(pc.subchannels)]
    diag["per_subchannel"] = per_sub
    diag["searches"] = parts
    argmax = [{"subchannel": l + 1, "strongest_user": rho[l] + 1, "input": p.tolist(), "value": v}
              for l, (p, v) in enumerate(zip(inputs, per_sub))]
    return CapacityResult(float(sum(per_sub)), None, argmax, diag, formula_only)


# ---------------------------------------------------------------------------
# two users, sub-channels with opposite degradation orders (region_theorem4/5/6)

# per-sub-channel term vector t = (uS, uW, xS, xSU):
#   uS = I(U;Y_strong|Z), uW = I(U;Y_weak|Z), xS = I(X;Y_strong|Z), xSU = I(X;Y_strong|U,Z)
# six bounds on (R0, R0, R0+R1, R0+R2, R0+R1+R2, R0+R1+R2) contributed by a
# sub-channel whose strong user is user 1 (class 0) or user 2 (class 1)
_L = (
    np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 1, 0, 1]], dtype=float),
    np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 0]], dtype=float),
)
TWO_USER_A = np.array([[1, 0, 0], [1, 1, 0], [1, 0, 1], [1, 1, 1]], dtype=float)
TWO_USER_VARS = ("R0", "R1", "R2")
SURFACE_A = {
    # surface 1 (U1 constant): R0, R2, R0+R1; surface 2 mirrored; surface 3: R0, R1, R2
    "surface1": np.array([[1, 0, 0], [0, 0, 1], [1, 1, 0]], dtype=float),
    "surface2": np.array([[1, 0, 0], [0, 1, 0], [1, 0, 1]], dtype=float),
    "surface3": np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float),
}


def subchannel_terms(batch: ChainBatch, bc: BroadcastWiretapChannel, strong: int) -> np.ndarray:
    """(uS, uW, xS, xSU) for each chain p(u) p(x|u) on a two-receiver sub-channel."""
    if bc.num_receivers != 2:
        raise DimensionMismatch("two-user theorems need sub-channels with exactly 2 receivers")
    full = _with_channel(batch.joint(), bc.tensor())   # (R, u, x, y1, y2, z)
    s, w = 2 + strong, 3 - strong
    t = np.stack([
        batch_cmi(full, [0], [s], [4]),
        batch_cmi(full, [0], [w], [4]),
        batch_cmi(full, [1], [s], [4]),
        batch_cmi(full, [1], [s], [0, 4]),
    ], axis=1)
    return np.maximum(t, 0.0)


def _merge_six(S: np.ndarray) -> np.ndarray:
    """Six bounds -> four rows of TWO_USER_A (equal left-hand sides take the min)."""
    return np.stack([np.minimum(S[..., 0], S[..., 1]), S[..., 2], S[..., 3],
                     np.minimum(S[..., 4], S[..., 5])], axis=-1)


def six_bounds(terms: Sequence[np.ndarray], classes: Sequence[int], weights=None) -> np.ndarray:
    """Six bounds for one term vector per sub-channel (optionally weighted, for time sharing)."""
    total = 0.0
    for l, (t, c) in enumerate(zip(terms, classes)):
        w = 1.0 if weights is None else weights[l]
        total = total + w * (t @ _L[c].T)
    return total


def _subchannel_class(bc: BroadcastWiretapChannel) -> int | None:
    """0 when X -> Y1 -> Y2 -> Z holds on the joint, 1 for X -> Y2 -> Y1 -> Z."""
    if check_markov(bc, ["Y1", "Y2", "Z"])[0]:
        return 0
    if check_markov(bc, ["Y2", "Y1", "Z"])[0]:
        return 1
    return None


def _two_user_setup(subs: Sequence[BroadcastWiretapChannel], classes, cfg: SearchConfig, diag: dict):
    if any(bc.num_receivers != 2 for bc in subs):
        raise DimensionMismatch("two-user theorems need sub-channels with exactly 2 receivers")
    found = [_subchannel_class(bc) for bc in subs]
    if classes is None:
        bad = [l + 1 for l, c in enumerate(found) if c is None]
        formula_only = _enforce(not bad, f"sub-channels {bad} satisfy neither X->Y1->Y2->Z nor X->Y2->Y1->Z", cfg, diag)
        if bad:
            strongest = classify_parallel(ParallelChannel(tuple(subs)), cfg.order_budget).strongest
            found = [c if c is not None else strongest[l] for l, c in enumerate(found)]
        return found, formula_only
    bad = [l + 1 for l, (c, f) in enumerate(zip(classes, found)) if f is None or (f != c and not _both(subs[l]))]
    chain = {0: "X->Y1->Y2->Z", 1: "X->Y2->Y1->Z"}
    formula_only = _enforce(not bad, "required orders " + ", ".join(
        f"sub-channel {l}: {chain[classes[l - 1]]}" for l in bad) + " do not hold", cfg, diag)
    return list(classes), formula_only


def _both(bc) -> bool:
    return check_markov(bc, ["Y1", "Y2", "Z"])[0] and check_markov(bc, ["Y2", "Y1", "Z"])[0]


def _two_user_pools(subs, classes, cfg: SearchConfig, chains, time_sharing: bool):
    """Candidate chain pools per sub-channel (plus ascended alphas when time sharing)."""
    if chains is not None:
        pools = [ChainBatch.from_chains(list(c)) for c in chains]
        return pools, {}
    cards = [_default_cards(bc.input_size, 1, cfg) for bc in subs]
    pools = [_chain_pool(cards[l], bc.input_size, cfg, 10 + l) for l, bc in enumerate(subs)]
    diag: dict = {}
    if not (cfg.num_restarts and cfg.ascent_steps):
        return pools, diag
    starts = [ChainBatch.concat([ChainBatch.random(cards[l], 1, np.random.default_rng([cfg.seed, 20 + l, i]))
                                 for i in range(cfg.num_restarts)]) for l in range(len(subs))]
    shapes = [s.shapes for s in starts]
    sizes = [s.theta().shape[1] for s in starts]
    dirs = _directions(3)
    W = dirs[np.arange(cfg.num_restarts) % len(dirs)]
    vm = vertex_map(TWO_USER_A)
    theta0 = np.concatenate([s.theta() for s in starts], axis=1)
    if time_sharing:
        theta0 = np.concatenate([theta0, np.zeros((cfg.num_restarts, 1))], axis=1)

    def split(theta):
        out, pos = [], 0
        for l, size in enumerate(sizes):
            out.append(ChainBatch.from_theta(theta[:, pos:pos + size], shapes[l]))
            pos += size
        return out

    def objective(theta):
        batches = split(theta)
        terms = [subchannel_terms(b, bc, c) for b, bc, c in zip(batches, subs, classes)]
        weights = None
        if time_sharing:
            a = 1.0 / (1.0 + np.exp(-theta[:, -1:]))
            weights = [a, 1.0 - a]
        return vm.support_rows(_merge_six(six_bounds(terms, classes, weights)), W)

    theta, f = _coordinate_ascent(theta0, objective, cfg.ascent_steps)
    diag.update(_spread(f))
    ascended = split(theta)
    pools = [ChainBatch.concat([pools[l], starts[l], ascended[l]]) for l in range(len(subs))]
    if time_sharing:
        diag["ascended_alphas"] = (1.0 / (1.0 + np.exp(-theta[:, -1]))).tolist()
    return pools, diag


def _combos(counts: Sequence[int], seed: int) -> np.ndarray:
    total = int(np.prod(counts, dtype=float))
    if total <= PRODUCT_CAP:
        return np.array(list(itertools.product(*[range(c) for c in counts])), dtype=int).reshape(-1, len(counts))
    rng = np.random.default_rng([seed, 99])
    idx = np.column_stack([rng.integers(0, c, size=PRODUCT_CAP) for c in counts])
    # keep every pool member at least once alongside the best-sum partner choice
    return np.unique(idx, axis=0)


def _two_user_region(subs, classes, cfg, chains, alphas=None) -> CapacityResult:
    cfg = cfg or SearchConfig()
    diag: dict = {}
    classes, formula_only = _two_user_setup(subs, classes, cfg, diag)
    time_sharing = alphas is not None
    pools, d = _two_user_pools(subs, classes, cfg, chains, time_sharing)
    diag.update(d)
    terms = [subchannel_terms(p, bc, c) for p, bc, c in zip(pools, subs, classes)]
    kept = [_prune_dominated(t) for t in terms]
    contrib = [terms[l][kept[l]] @ _L[classes[l]].T for l in range(len(subs))]     # (N_l, 6)
    idx = _combos([len(k) for k in kept], cfg.seed)
    if time_sharing:
        alphas = np.asarray(alphas, dtype=float)
        S = (alphas[None, :, None] * contrib[0][idx[:, 0]][:, None, :]
             + (1 - alphas)[None, :, None] * contrib[1][idx[:, 1]][:, None, :])        # (P, A, 6)
        S = S.reshape(-1, 6)
        labels = np.column_stack([np.repeat(idx, len(alphas), axis=0), np.tile(np.arange(len(alphas)), len(idx))])
    else:
        S = sum(contrib[l][idx[:, l]] for l in range(len(subs)))
        labels = idx
    B = _merge_six(S)
    region = hull_accumulate(RateRegion(TWO_USER_VARS, TWO_USER_A, B))
    value = float(support(region, np.ones(3))[0])

    def describe(pid):
        lab = labels[pid]
        rec = {"chains": [pools[l].chain(int(kept[l][lab[l]])).to_json() for l in range(len(subs))],
               "bounds": S[pid].tolist()}
        if time_sharing:
            rec["alpha"] = float(alphas[lab[-1]])
        return rec

    argmax = _argmax_records(region, describe)
    diag.update(classes=[c + 1 for c in classes], pieces_evaluated=len(B),
                pool_sizes=[len(p) for p in pools], pool_kept=[len(k) for k in kept])
    return CapacityResult(value, region, argmax, diag, formula_only, pools=(pools, kept, classes))


def region_theorem5(pc, cfg: SearchConfig | None = None, chains=None, classes=None) -> CapacityResult:
    """Two users, M sub-channels, each ordered X->Y1->Y2->Z (set S1) or X->Y2->Y1->Z (set S2).

    ``classes`` (0 for S1, 1 for S2 per sub-channel) is derived from the
    channel when omitted.  ``chains`` fixes the candidate distributions: one
    sequence of two-link chains p(u_l) p(x_l|u_l) per sub-channel.
    """
    pc = as_parallel(pc)
    return _two_user_region(pc.subchannels, classes, cfg, chains)


def region_theorem4(pc, cfg: SearchConfig | None = None, chains=None) -> CapacityResult:
    """Two sub-channels ordered X1->Y11->Y21->Z1 and X2->Y22->Y12->Z2."""
    pc = as_parallel(pc)
    if len(pc) != 2:
        raise DimensionMismatch("this theorem takes exactly two sub-channels")
    return _two_user_region(pc.subchannels, [0, 1], cfg, chains)


def region_theorem6(ch1, ch2=None, cfg: SearchConfig | None = None, chains=None, alphas=None) -> CapacityResult:
    """Time sharing between ch1 (X1->Y11->Y21->Z1) and ch2 (X2->Y22->Y12->Z2).

    Bounds are alpha-weighted per-channel terms; alpha sweeps ``alphas`` or
    ``cfg.alpha_steps`` uniform points of [0, 1].
    """
    if ch2 is None:
        pc = as_parallel(ch1)
        if len(pc) != 2:
            raise DimensionMismatch("this theorem takes exactly two channels")
        ch1, ch2 = pc.subchannels
    cfg = cfg or SearchConfig()
    if alphas is None:
        alphas = np.linspace(0.0, 1.0, cfg.alpha_steps)
    return _two_user_region((ch1, ch2), [0, 1], cfg, chains, alphas=alphas)


def surface_regions(result: CapacityResult, pc) -> dict[str, RateRegion]:
    """The three boundary surfaces of a region_theorem4 result, evaluated on its pools.

    Surface 1 uses chains with U1 constant on sub-channel 1, surface 2 the
    mirror image, surface 3 any pair.
    """
    pools = result.pools[0]
    subs = as_parallel(pc).subchannels
    t1 = subchannel_terms(pools[0], subs[0], 0)
    t2 = subchannel_terms(pools[1], subs[1], 1)
    const1 = np.isclose(t1[:, 0], 0) & np.isclose(t1[:, 1], 0)
    const2 = np.isclose(t2[:, 0], 0) & np.isclose(t2[:, 1], 0)
    out = {}
    i, j = np.meshgrid(np.arange(len(t1)), np.arange(len(t2)), indexing="ij")
    i, j = i.ravel(), j.ravel()
    a, b = t1[i], t2[j]
    # surface 1: R0 <= I(U2;Y12|Z2), R2 <= I(X2;Y22|U2,Z2), R0+R1 <= I(X1;Y11|Z1) + I(U2;Y12|Z2)
    m = const1[i]
    out["surface1"] = np.column_stack([b[m, 1], b[m, 3], a[m, 2] + b[m, 1]])
    m = const2[j]
    out["surface2"] = np.column_stack([a[m, 1], a[m, 3], b[m, 2] + a[m, 1]])
    out["surface3"] = np.column_stack([np.minimum(a[:, 0] + b[:, 1], a[:, 1] + b[:, 0]), a[:, 3], b[:, 3]])
    regions = {}
    for name, B in out.items():
        if len(B):
            regions[name] = hull_accumulate(RateRegion(TWO_USER_VARS, SURFACE_A[name], B))
    return regions


# ---------------------------------------------------------------------------
# no common message: Fourier-Motzkin on the two-user six-bound system

BOUND_SYMBOLS = ("a1", "a2", "b1", "b2", "c1", "c2")


def no_common_template() -> list[LinearInequality]:
    """Eliminate alpha, beta from the six-bound system under R0 = alpha+beta, R1' = R1+alpha, R2' = R2+beta.

    The six right-hand sides are kept symbolic (variables a1..c2 with
    coefficient -1), so the result is the generic projected system in
    R1p, R2p and the symbols.
    """
    al, be, r1, r2 = "alpha", "beta", "R1p", "R2p"
    system = [
        LinearInequality({al: 1, be: 1, "a1": -1}, 0),
        LinearInequality({al: 1, be: 1, "a2": -1}, 0),
        LinearInequality({be: 1, r1: 1, "b1": -1}, 0),      # R0 + R1 = beta + R1'
        LinearInequality({al: 1, r2: 1, "b2": -1}, 0),      # R0 + R2 = alpha + R2'
        LinearInequality({r1: 1, r2: 1, "c1": -1}, 0),      # R0 + R1 + R2 = R1' + R2'
        LinearInequality({r1: 1, r2: 1, "c2": -1}, 0),
        LinearInequality({al: 1, r1: -1}, 0),                # R1 >= 0
        LinearInequality({be: 1, r2: -1}, 0),                # R2 >= 0
    ]
    return eliminate_all(system, [al, be])


def _instantiate(template: Sequence[LinearInequality], S: np.ndarray):
    """Coefficient matrix over (R1, R2) and per-piece bounds from symbol values S (P, 6)."""
    rows, cols = [], []
    for ineq in template:
        c = [ineq.coeff("R1p"), ineq.coeff("R2p")]
        if c == [0.0, 0.0]:
            continue
        rows.append(c)
        cols.append(np.array([-ineq.coeff(s) for s in BOUND_SYMBOLS]))
    A = np.array(rows)
    B = S @ np.stack(cols, axis=1) + np.array([ineq.bound for ineq in template
                                               if [ineq.coeff("R1p"), ineq.coeff("R2p")] != [0.0, 0.0]])
    return A, B


def region_no_common(pc, cfg: SearchConfig | None = None, chains=None) -> CapacityResult:
    """Independent messages only: the region_theorem4 pieces projected by Fourier-Motzkin."""
    base = region_theorem4(pc, cfg, chains)
    pc = as_parallel(pc)
    pools, kept, _ = base.pools
    contrib = [subchannel_terms(pools[l], pc[l], c)[kept[l]] @ _L[c].T for l, c in enumerate((0, 1))]
    idx = _combos([len(k) for k in kept], (cfg or SearchConfig()).seed)
    S = contrib[0][idx[:, 0]] + contrib[1][idx[:, 1]]
    template = no_common_template()
    A, B = _instantiate(template, S)
    region = hull_accumulate(RateRegion(("R1", "R2"), A, B))
    value = float(support(region, np.ones(2))[0])

    def describe(pid):
        lab = idx[pid]
        return {"chains": [pools[l].chain(int(kept[l][lab[l]])).to_json() for l in range(2)],
                "bounds": S[pid].tolist()}

    diag = dict(base.diagnostics)
    diag["template"] = [str(t) for t in template]
    argmax = _argmax_records(region, describe)
    return CapacityResult(value, region, argmax, diag, base.formula_only)
