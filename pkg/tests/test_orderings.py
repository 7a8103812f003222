import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from secrecy_regions.channel import (
    AuxiliaryChain, BroadcastWiretapChannel, Channel, ParallelChannel, bec, bsc, cascade,
    chain_to_joint, identity,
)
from secrecy_regions.errors import DimensionMismatch
from secrecy_regions.orderings import (
    EavesdropperPosition, LessNoisyBudget, Relation, check_degraded, check_less_noisy,
    classify_parallel,
)


def random_channel(rng, a, b):
    return Channel(rng.dirichlet(np.ones(b), size=a))


def joint_gap(w, cand, other):
    """I(U;Y) - I(U;Z) through the full named joint, independent of the verdict code."""
    bc = BroadcastWiretapChannel.from_product([cand], other)
    j = chain_to_joint(AuxiliaryChain((w.p_u, w.p_x_given_u)), bc)
    return j.mi("U1", "Y1") - j.mi("U1", "Z")


class TestDegraded:
    def test_bsc_cascade_witness(self):
        v = check_degraded(bsc(0.1), bsc(0.18))
        assert v.relation is Relation.DEGRADED
        # (0.18 - 0.1) / (1 - 0.2) = 0.1
        assert np.allclose(v.witness.matrix, bsc(0.1).matrix, atol=1e-6)

    def test_identity_strong(self):
        c = Channel([[0.2, 0.5, 0.3], [0.6, 0.1, 0.3]])
        v = check_degraded(identity(2), c)
        assert v.accepted and np.allclose(v.witness.matrix, c.matrix, atol=1e-6)

    def test_reverse_rejected(self):
        v = check_degraded(bsc(0.3), bsc(0.2))
        assert v.relation is Relation.INCOMPARABLE and v.residual > 1e-6

    def test_mismatch(self):
        with pytest.raises(DimensionMismatch):
            check_degraded(bsc(0.1), identity(3))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 100_000))
    def test_reflexive_and_transitive(self, seed):
        rng = np.random.default_rng(seed)
        a = random_channel(rng, 3, 3)
        b = cascade(a, random_channel(rng, 3, 3))
        c = cascade(b, random_channel(rng, 3, 2))
        self_v = check_degraded(a, a)
        assert self_v.accepted
        ab, bc_ = check_degraded(a, b), check_degraded(b, c)
        assert ab.accepted and bc_.accepted
        composed = ab.witness.matrix @ bc_.witness.matrix
        assert np.abs(a.matrix @ composed - c.matrix).max() <= 2e-6
        assert check_degraded(a, c).accepted

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 100_000))
    def test_degraded_implies_less_noisy(self, seed):
        rng = np.random.default_rng(seed)
        a = random_channel(rng, 2, 3)
        b = cascade(a, random_channel(rng, 3, 2))
        assert check_degraded(a, b).accepted
        assert check_less_noisy(a, b).accepted


def brute_force_min_gap(cand, other, points=100):
    """Grid over binary auxiliaries: uniform U, p(x=1|u) on a points x points grid."""
    g = np.linspace(0, 1, points)
    best = np.inf
    for a, b in itertools.product(g, g):
        pxu = np.array([[1 - a, a], [1 - b, b]])
        pu = np.array([0.5, 0.5])
        vals = []
        for W in (cand.matrix, other.matrix):
            cond = pxu @ W
            marg = pu @ cond
            h = lambda p: -(p[p > 0] * np.log2(p[p > 0])).sum()
            vals.append(h(marg) - sum(pu[i] * h(cond[i]) for i in range(2)))
        best = min(best, vals[0] - vals[1])
    return best


class TestLessNoisy:
    def test_degraded_pair_accepted_at_stage_one(self):
        v = check_less_noisy(bsc(0.1), bsc(0.2))
        assert v.relation is Relation.LESS_NOISY and v.diagnostics["stage"] == "degraded"

    def test_erasure_vs_bsc_witness(self):
        assert brute_force_min_gap(bec(0.9), bsc(0.1)) < 0
        v = check_less_noisy(bec(0.9), bsc(0.1))
        assert v.relation is Relation.INCOMPARABLE
        assert v.gap < -1e-7
        assert joint_gap(v.witness, bec(0.9), bsc(0.1)) == pytest.approx(v.gap, abs=1e-9)

    def test_self_strict_reports_zero_gap(self):
        v = check_less_noisy(bsc(0.2), bsc(0.2), LessNoisyBudget(strict=True, restarts=20, steps=50))
        assert v.relation is Relation.INCOMPARABLE
        assert abs(v.gap) <= 1e-7

    def test_self_relaxed_accepted(self):
        assert check_less_noisy(bsc(0.2), bsc(0.2)).accepted

    # BEC(e) vs BSC(p): degraded iff e <= 2p, less noisy iff e <= 4p(1-p)
    def test_less_noisy_not_degraded(self):
        assert not check_degraded(bec(0.3), bsc(0.11)).accepted
        v = check_less_noisy(bec(0.3), bsc(0.11), LessNoisyBudget(restarts=50, steps=100))
        assert v.relation is Relation.LESS_NOISY and not v.undetermined

    def test_more_capable_not_less_noisy(self):
        v = check_less_noisy(bec(0.45), bsc(0.11))
        assert v.relation is Relation.INCOMPARABLE
        assert joint_gap(v.witness, bec(0.45), bsc(0.11)) == pytest.approx(v.gap, abs=1e-9)

    def test_falsifier_stage_finds_witness(self):
        # a tiny concavity sample forces the falsifier to do the work
        v = check_less_noisy(bec(0.9), bsc(0.1), LessNoisyBudget(num_pairs=1, restarts=20, steps=50, seed=3))
        assert v.relation is Relation.INCOMPARABLE
        assert joint_gap(v.witness, bec(0.9), bsc(0.1)) == pytest.approx(v.gap, abs=1e-9)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 100_000))
    def test_witnesses_reproduce(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_channel(rng, 3, 3), random_channel(rng, 3, 2)
        v = check_less_noisy(a, b, LessNoisyBudget(restarts=20, steps=40, seed=seed))
        if v.witness is not None and v.gap is not None and v.gap < 0:
            assert joint_gap(v.witness, a, b) == pytest.approx(v.gap, abs=1e-9)


def mirrored_parallel():
    sub1 = BroadcastWiretapChannel.from_cascade([bsc(0.1), bsc(0.1), bsc(0.1)], ["Y1", "Y2", "Z"])
    sub2 = BroadcastWiretapChannel.from_cascade([bsc(0.1), bsc(0.1), bsc(0.1)], ["Y2", "Y1", "Z"])
    return ParallelChannel((sub1, sub2))


class TestClassify:
    def test_mirrored_cascades(self):
        cls = classify_parallel(mirrored_parallel())
        assert cls.strongest == [0, 1]
        assert cls.subchannels[0].full_order == ("Y1", "Y2", "Z")
        assert cls.subchannels[1].full_order == ("Y2", "Y1", "Z")
        for s in cls.subchannels:
            assert s.eavesdropper_position == (EavesdropperPosition.USER_LESS_NOISY,) * 2

    def test_single_user(self):
        bc = BroadcastWiretapChannel.from_product([bsc(0.3)], bsc(0.1))
        cls = classify_parallel(ParallelChannel((bc,)))
        assert cls.strongest == [0]

    def test_eavesdropper_noiseless(self):
        bc = BroadcastWiretapChannel.from_product([bsc(0.2), bsc(0.2)], identity(2))
        s = classify_parallel(bc).subchannels[0]
        assert s.eavesdropper_position == (EavesdropperPosition.EVE_LESS_NOISY,) * 2

    @settings(max_examples=6, deadline=None)
    @given(st.permutations(["Y1", "Y2", "Z"]), st.integers(0, 1000))
    def test_recovers_cascade_permutation(self, perm, seed):
        rng = np.random.default_rng(seed)
        links = [bsc(float(p)) for p in rng.uniform(0.05, 0.2, size=3)]
        bc = BroadcastWiretapChannel.from_cascade(links, list(perm))
        s = classify_parallel(bc, LessNoisyBudget(restarts=30, steps=60)).subchannels[0]
        assert s.full_order == tuple(perm)
