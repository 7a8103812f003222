"""Acceptance suite: ten criteria, each printed as one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` (the summary is also shown at
the end of a normal pytest run) or directly with ``python3 tests/test_acceptance.py``.
Every derived number is compared against an oracle written here with plain
numpy/scipy, independent of the package's information and search code.
"""
import itertools
import json
import time

import numpy as np
import pytest
from scipy.optimize import linprog, minimize, minimize_scalar

from secrecy_regions.channel import (
    AuxiliaryChain, BroadcastWiretapChannel, Channel, ParallelChannel, bec, bsc, constant, identity,
)
from secrecy_regions.cli import run
from secrecy_regions.codesim import CodebookSpec, build_codebook, check_lemma1, estimate_error, exact_equivocation
from secrecy_regions.geometry import (
    RateRegion, contains, hausdorff, hull_accumulate, pareto_frontier, weight_grid,
)
from secrecy_regions.orderings import LessNoisyBudget, check_degraded, check_less_noisy
from secrecy_regions.regions import (
    SearchConfig, common_message_capacity, no_common_template, region_corollary1, region_theorem1,
    region_theorem4, region_theorem6, sum_secrecy_capacity,
)

RESULTS: dict[int, str] = {}


def record(k: int, ok: bool, detail: str, elapsed: float | None = None):
    took = "" if elapsed is None else f" [{elapsed:.1f} s]"
    RESULTS[k] = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}{took}"
    print(RESULTS[k])
    return ok


# ---------------------------------------------------------------------------
# independent oracles


def h2(p):
    p = np.clip(np.asarray(p, dtype=float), 1e-300, 1.0)
    q = np.clip(1.0 - np.asarray(p, dtype=float), 1e-300, 1.0)
    return -(p * np.log2(p) + q * np.log2(q))


def bsc_mi(p1, q):
    """I(X;Y) for P(X=1)=p1 through BSC(q), vectorized over p1."""
    return h2(p1 * (1 - q) + (1 - p1) * q) - h2(q)


def plain_mi(joint_xy):
    """I(A;B) of a 2-D joint table."""
    P = np.asarray(joint_xy, dtype=float)
    pa, pb = P.sum(axis=1, keepdims=True), P.sum(axis=0, keepdims=True)
    m = P > 0
    return float((P[m] * np.log2(P[m] / (pa @ pb)[m])).sum())


def oracle_gap(pu, pxu, Wy, Wz):
    """I(U;Y) - I(U;Z) from plain joint tables."""
    pu, pxu = np.asarray(pu, dtype=float), np.asarray(pxu, dtype=float)
    return plain_mi(pu[:, None] * (pxu @ Wy)) - plain_mi(pu[:, None] * (pxu @ Wz))


def chain_tables(chain: AuxiliaryChain, bc: BroadcastWiretapChannel):
    """p(u, x, y1, y2) for a two-link chain on a two-receiver channel (eavesdropper summed out)."""
    pu, pxu = chain.links[0].probs, chain.links[1].matrix
    T = bc.tensor().sum(axis=3)
    return pu[:, None, None, None] * pxu[:, :, None, None] * T[None]


def mi_u(P, y):            # I(U;Y_y)
    m = P.sum(axis=1).sum(axis=1 if y == 1 else 2)
    return plain_mi(m)


def mi_x(P, y):            # I(X;Y_y)
    m = P.sum(axis=0).sum(axis=1 if y == 1 else 2)
    return plain_mi(m)


def mi_x_given_u(P, y):    # I(X;Y_y|U)
    out = 0.0
    for u in range(P.shape[0]):
        slab = P[u].sum(axis=1 if y == 1 else 2)
        w = slab.sum()
        if w > 0:
            out += w * plain_mi(slab / w)
    return out


def frontier(region, res=12):
    return pareto_frontier(hull_accumulate(region), weight_grid(region.dim, res))


def random_chains(rng, count):
    return [AuxiliaryChain.random((2, 2), rng) for _ in range(count)]


def swap_users(points):
    return np.asarray(points)[:, [0, 2, 1]]


def pair_channels(a, b, c, order1=("Y1", "Y2", "Z"), order2=("Y2", "Y1", "Z")):
    links = [bsc(a), bsc(b), bsc(c)]
    return (BroadcastWiretapChannel.from_cascade(links, list(order1)),
            BroadcastWiretapChannel.from_cascade(links, list(order2)))


def mirrored_parallel():
    sub = lambda a, b: BroadcastWiretapChannel.from_product([bsc(a), bsc(b)], bsc(0.3))
    return ParallelChannel((sub(0.1, 0.2), sub(0.2, 0.1)))


# ---------------------------------------------------------------------------
# 1. binary wiretap baseline


def test_criterion_01_wiretap_baseline(tmp_path):
    t0 = time.perf_counter()
    bc = BroadcastWiretapChannel.from_cascade([bsc(0.1), bsc(0.1)], ["Y1", "Z"])
    (tmp_path / "wiretap.json").write_text(json.dumps(bc.to_json()))
    out = tmp_path / "region.json"
    rc = run(["compute-region", "--theorem", "1", "--channel", str(tmp_path / "wiretap.json"), "--out", str(out)])
    value = json.loads(out.read_text())["result"]["value"]
    elapsed = time.perf_counter() - t0
    p = np.arange(0, 10_001) / 10_000
    oracle = float((bsc_mi(p, 0.1) - bsc_mi(p, 0.18)).max())
    closed = float(h2(0.18) - h2(0.1))
    ok = rc == 0 and abs(value - closed) <= 1e-3 and abs(value - oracle) <= 1e-3 and elapsed < 5
    assert record(1, ok, f"max rate {value:.6f}, closed form {closed:.6f}, grid oracle {oracle:.6f}", elapsed)


# ---------------------------------------------------------------------------
# 2 and 3. parallel channel scalar capacities


def _mirrored_terms(p):
    """Per sub-channel secrecy terms [I(X;Y_k) - I(X;Z)]+ on a grid of P(X=1)."""
    sub = [(0.1, 0.2), (0.2, 0.1)]
    return [[np.maximum(bsc_mi(p, y) - bsc_mi(p, 0.3), 0.0) for y in ys] for ys in sub]


def test_criterion_02_common_message():
    t0 = time.perf_counter()
    r = common_message_capacity(mirrored_parallel())
    elapsed = time.perf_counter() - t0
    p = np.arange(0, 1001) / 1000
    t = _mirrored_terms(p)
    # user k: sum over sub-channels; grid over the product of the two input simplices
    user1 = t[0][0][:, None] + t[1][0][None, :]
    user2 = t[0][1][:, None] + t[1][1][None, :]
    oracle = float(np.minimum(user1, user2).max())
    closed = float(h2(0.3) - h2(0.1) + h2(0.3) - h2(0.2))
    ok = abs(r.value - oracle) <= 2e-3 and abs(r.value - closed) <= 2e-3 and elapsed < 30
    assert record(2, ok, f"C0 {r.value:.6f}, closed form {closed:.6f}, double-simplex oracle {oracle:.6f}", elapsed)


def test_criterion_03_sum_capacity():
    t0 = time.perf_counter()
    r = sum_secrecy_capacity(mirrored_parallel())
    elapsed = time.perf_counter() - t0
    strongest = [0.1, 0.1]
    f = [lambda x, q=q: max(float(bsc_mi(x, q) - bsc_mi(x, 0.3)), 0.0) for q in strongest]
    per_sub = [-minimize_scalar(lambda x, g=g: -g(x), bounds=(0, 1), method="bounded",
                                options={"xatol": 1e-12}).fun for g in f]
    joint = minimize(lambda v: -(f[0](v[0]) + f[1](v[1])), x0=[0.3, 0.7], method="L-BFGS-B",
                     bounds=[(0, 1), (0, 1)], options={"ftol": 1e-15, "gtol": 1e-12})
    joint_val = -float(joint.fun)
    closed = float(2 * (h2(0.3) - h2(0.1)))
    ok = (abs(r.value - closed) <= 2e-3 and abs(joint_val - sum(per_sub)) <= 1e-6 and elapsed < 30)
    assert record(3, ok, f"sum capacity {r.value:.6f}, closed form {closed:.6f}, joint oracle {joint_val:.8f} "
                         f"vs per-sub-channel {sum(per_sub):.8f}", elapsed)


# ---------------------------------------------------------------------------
# 4. Fourier-Motzkin projection of the two-user system


def _extended_member(R1, R2, s):
    """Is there alpha, beta >= 0 extending (R1', R2') to a point of the six-bound system?"""
    a1, a2, b1, b2, c1, c2 = s
    if R1 + R2 > min(c1, c2) + 1e-12:
        return False
    A = [[1, 1], [1, 1], [0, 1], [1, 0], [1, 0], [0, 1]]
    b = [a1, a2, b1 - R1, b2 - R2, R1, R2]
    res = linprog([0, 0], A_ub=A, b_ub=b, bounds=[(0, None), (0, None)], method="highs")
    return res.status == 0


def test_criterion_04_fourier_motzkin():
    t0 = time.perf_counter()
    got = {(tuple(sorted(s.coeffs.items())), s.bound) for s in no_common_template()}
    want = {(tuple(sorted(c.items())), 0.0) for c in (
        {"R1p": 1.0, "b1": -1.0}, {"R2p": 1.0, "b2": -1.0},
        {"R1p": 1.0, "R2p": 1.0, "c1": -1.0}, {"R1p": 1.0, "R2p": 1.0, "c2": -1.0})}
    symbolic = got == want
    rng = np.random.default_rng(4)
    mismatches = 0
    for _ in range(1000):
        s = rng.uniform(0, 1, size=6)
        R1, R2 = rng.uniform(0, 1.2, size=2)
        point = {"R1p": R1, "R2p": R2, **dict(zip(("a1", "a2", "b1", "b2", "c1", "c2"), s))}
        eliminated = all(ineq.satisfied(point, tol=0.0) for ineq in no_common_template())
        mismatches += eliminated != _extended_member(R1, R2, s)
    elapsed = time.perf_counter() - t0
    ok = symbolic and mismatches == 0 and elapsed < 5
    assert record(4, ok, f"symbolic match {symbolic}, {mismatches} mismatches in 1000 points", elapsed)


# ---------------------------------------------------------------------------
# 5. reductions


def _direct_broadcast_region(c1s, c2s, s1, s2):
    """Two-user reversely ordered broadcast region without secrecy, coded from plain mutual informations."""
    rows = []
    for c1, c2 in itertools.product(c1s, c2s):
        P1, P2 = chain_tables(c1, s1), chain_tables(c2, s2)
        u11, u21 = mi_u(P1, 0), mi_u(P1, 1)
        u12, u22 = mi_u(P2, 0), mi_u(P2, 1)
        x11, x22 = mi_x(P1, 0), mi_x(P2, 1)
        rows.append([min(u11 + u12, u21 + u22), x11 + u12, u21 + x22,
                     min(x11 + u12 + mi_x_given_u(P2, 1), u21 + mi_x_given_u(P1, 0) + x22)])
    A = np.array([[1, 0, 0], [1, 1, 0], [1, 0, 1], [1, 1, 1]], dtype=float)
    return RateRegion(("R0", "R1", "R2"), A, np.array(rows))


def test_criterion_05_reductions():
    t0 = time.perf_counter()
    cfg = SearchConfig(num_restarts=3, ascent_steps=15, num_samples=16, grid_resolution=8)
    rng = np.random.default_rng(5)

    # (a) constant eavesdroppers: the broadcast capacity region
    s1 = BroadcastWiretapChannel.from_cascade([bsc(0.05), bsc(0.1), constant(2)], ["Y1", "Y2", "Z"])
    s2 = BroadcastWiretapChannel.from_cascade([bsc(0.05), bsc(0.1), constant(2)], ["Y2", "Y1", "Z"])
    c1, c2 = random_chains(rng, 12), random_chains(rng, 12)
    r4 = region_theorem4(ParallelChannel((s1, s2)), cfg, chains=[c1, c2])
    direct = _direct_broadcast_region(c1, c2, s1, s2)
    da = hausdorff(frontier(r4.region), frontier(direct))

    # (b) sub-channel 1 carries nothing: region_corollary1 of sub-channel 2
    dead = BroadcastWiretapChannel(2, (1, 1), 1, np.ones((2, 1)))
    _, live = pair_channels(0.05, 0.1, 0.15)
    c2 = random_chains(rng, 25)
    r4b = region_theorem4(ParallelChannel((dead, live)), cfg, chains=[random_chains(rng, 2), c2])
    rc = region_corollary1(live, cfg, chains=c2)
    db = hausdorff(frontier(r4b.region), frontier(rc.region))

    # (c) time sharing with alpha = 1: region_corollary1 of channel 1 (users relabeled)
    ch1, ch2 = pair_channels(0.02, 0.1, 0.15)
    relabeled = BroadcastWiretapChannel.from_cascade([bsc(0.02), bsc(0.1), bsc(0.15)], ["Y2", "Y1", "Z"])
    c1 = random_chains(rng, 25)
    r6 = region_theorem6(ch1, ch2, cfg, chains=[c1, random_chains(rng, 3)], alphas=[1.0])
    rc6 = region_corollary1(relabeled, cfg, chains=c1)
    dc = hausdorff(swap_users(frontier(r6.region)), frontier(rc6.region))
    elapsed = time.perf_counter() - t0
    ok = max(da, db, dc) < 1e-6 and elapsed < 60
    assert record(5, ok, f"Hausdorff (a) {da:.2e}, (b) {db:.2e}, (c) {dc:.2e}", elapsed)


# ---------------------------------------------------------------------------
# 6. time sharing never beats simultaneous use


def test_criterion_06_containment():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    violations, checked = 0, 0
    W = weight_grid(3, 31)[:500]
    for _ in range(5):
        a, b, c = rng.uniform(0.0, 0.15), rng.uniform(0.02, 0.2), rng.uniform(0.05, 0.3)
        s1, s2 = pair_channels(a, b, c)
        r4 = region_theorem4(ParallelChannel((s1, s2)))
        r6 = region_theorem6(s1, s2)
        pts = pareto_frontier(r6.region, W)
        # one frontier sample per weight direction (duplicates included)
        idx = np.argmax(W @ pts.T, axis=1)
        samples = pts[idx]
        inside = contains(r4.region, samples, mode="hull", tol=1e-9)
        violations += int((~inside).sum())
        checked += len(samples)
    elapsed = time.perf_counter() - t0
    assert record(6, violations == 0, f"{violations} violations over {checked} frontier samples, 5 channel pairs",
                  elapsed)


# ---------------------------------------------------------------------------
# 7. simulated codes land inside the computed region


def test_criterion_07_achievability_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2026)
    uniform = AuxiliaryChain((np.full(2, 0.5),))
    violations, filtered, total = 0, 0, 0
    for i in range(10):
        bc = BroadcastWiretapChannel.from_product([identity(2)], bsc(float(rng.uniform(0.33, 0.45))))
        region = region_theorem1(bc)
        cs = region.value
        for rates in [(0.0, 0.25 * cs), (0.0, 0.5 * cs), (0.0, 0.75 * cs), (0.25 * cs, 0.25 * cs)]:
            cb = build_codebook(CodebookSpec(n=12, message_rates=rates, chain=uniform, seed=i), bc)
            realized = cb.realized_rates()
            total += 1
            # both filters must hold; skip the Monte-Carlo run once secrecy already fails
            if exact_equivocation(cb) < 0.9 * sum(realized):
                continue
            err = estimate_error(cb, None, 100_000, np.random.default_rng([i, 7])).error_estimates[0]
            if err >= 0.05:
                continue
            filtered += 1
            violations += not bool(contains(region.region, np.array([realized]), mode="hull", tol=1e-6)[0])
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and filtered > 0 and elapsed < 600
    assert record(7, ok, f"{violations} violations; {filtered} of {total} operating points passed the error and "
                         f"equivocation filters", elapsed)


# ---------------------------------------------------------------------------
# 8. equivocation improves with block length


def test_criterion_08_secrecy_trend():
    t0 = time.perf_counter()
    bc = BroadcastWiretapChannel.from_product([identity(2)], bsc(0.2))
    rate = 0.8 * float(h2(0.2))
    uniform = AuxiliaryChain((np.full(2, 0.5),))
    good, ratios = 0, []
    for seed in range(20):
        r = []
        for n in (4, 8):
            cb = build_codebook(CodebookSpec(n=n, message_rates=(0.0, rate), chain=uniform, seed=seed), bc)
            r.append(exact_equivocation(cb) / sum(cb.realized_rates()))
        ratios.append(r)
        good += r[1] > r[0] and r[1] > 0.75
    mean = np.mean(ratios, axis=0)
    elapsed = time.perf_counter() - t0
    assert record(8, good >= 16, f"{good}/20 seeds improve and exceed 0.75 (mean ratio n=4 {mean[0]:.3f}, "
                                 f"n=8 {mean[1]:.3f})", elapsed)


# ---------------------------------------------------------------------------
# 9. sum-rate secrecy implies every subset constraint


def test_criterion_09_lemma1():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    counter, satisfied = 0, 0
    for i in range(200):
        sizes = tuple(int(s) for s in rng.integers(1, 4, size=int(rng.integers(2, 4))))
        nz = int(rng.integers(2, 5))
        M = int(np.prod(sizes))
        base = rng.dirichlet(np.ones(nz))
        # half the joints leak only a little, so the sum-rate constraint is often met
        mix = rng.uniform(0, 0.3) if i % 2 else 1.0
        pz = (1 - mix) * base + mix * rng.dirichlet(np.full(nz, 0.5), size=M)
        P = (pz / M).reshape(sizes + (nz,))
        slack = float(rng.uniform(0, 0.2))
        rep = check_lemma1(P, tolerance=slack)
        satisfied += rep.sum_satisfied
        counter += not rep.implication_holds
    elapsed = time.perf_counter() - t0
    assert record(9, counter == 0 and satisfied > 0,
                  f"{counter} counterexamples over 200 joints ({satisfied} met the sum-rate constraint)", elapsed)


# ---------------------------------------------------------------------------
# 10. ordering classifiers


def test_criterion_10_orderings():
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    accepted, rejected = 0, 0
    for _ in range(50):
        nx, ny, nz = (int(v) for v in rng.integers(2, 5, size=3))
        P = rng.dirichlet(np.ones(ny), size=nx)
        D = rng.dirichlet(np.ones(nz), size=ny)
        Q = P @ D
        v = check_degraded(Channel(P), Channel(Q))
        # residual oracle: the returned degrading channel must reproduce Q
        accepted += v.accepted and np.abs(P @ v.witness.matrix - Q).max() <= 1e-6
        # reverse pair: I(X;P) > I(X;Q) at uniform input rules out P being degraded from Q
        px = np.full(nx, 1.0 / nx)
        gap = plain_mi(px[:, None] * P) - plain_mi(px[:, None] * Q)
        r = check_degraded(Channel(Q), Channel(P))
        rejected += (not r.accepted) and gap > 1e-6
    cand, other = bec(0.9), bsc(0.1)
    verdict = check_less_noisy(cand, other, LessNoisyBudget(seed=0))
    w = verdict.witness
    witness_gap = (oracle_gap(w.p_u, w.p_x_given_u, cand.matrix, other.matrix)
                   if w is not None and hasattr(w, "p_u") else float("nan"))
    # |U| = 2, uniform U, 100 x 100 grid over the two rows of p(x|u)
    g = np.arange(100) / 99
    brute_min = min(oracle_gap([0.5, 0.5], [[1 - a, a], [1 - b, b]], cand.matrix, other.matrix)
                    for a in g for b in g)
    elapsed = time.perf_counter() - t0
    ok = (accepted == 50 and rejected == 50 and not verdict.accepted and witness_gap < 0 and brute_min < 0
          and elapsed < 60)
    assert record(10, ok, f"degraded {accepted}/50 accepted, reverse {rejected}/50 rejected; less-noisy witness gap "
                          f"{witness_gap:.4f}, brute-force min gap {brute_min:.4f}", elapsed)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
