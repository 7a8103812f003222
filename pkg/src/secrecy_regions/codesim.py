"""Random superposition wiretap codes at tiny block lengths.

A codebook is a set of *layers*.  Each layer belongs to a segment (one
sub-channel, used for a stretch of channel uses), hangs below at most one
parent layer of the same segment and, for every parent codeword, holds one
sequence per (message index, confusion index).  Sequences are drawn letter by
letter from p(u | parent letter).  The segment's deepest layer is its channel
input.  The three schemes are layer layouts of this one engine:

* ``superposition``: one segment, layers U_1, ..., U_{K-1}, X; layer 1 carries
  (W0, W1), layer k carries W_k.  User k decodes layers 1..k.
* ``rate-split``: two sub-channels used simultaneously (both segments have
  length n), with the layouts of the three boundary surfaces of the two-user
  region, including the split of one private message over both sub-channels.
* ``time-shared``: the same layouts with the first channel used round(alpha n)
  times and the second n - round(alpha n) times.

Confusion rates default to I(layer; Z | parent) on the layer's segment, scaled
by the segment's share of the block.  Decoders use conditional strong
typicality of y^n given the decoded codeword path and succeed only when exactly
one message tuple has a typical path.  Equivocation is computed exactly by
enumerating all message/confusion indices and all eavesdropper outputs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .channel import (
    AuxiliaryChain, BroadcastWiretapChannel, ParallelChannel, as_parallel, chain_to_joint,
    marginal_channel,
)
from .errors import (
    CapacityExceeded, DecodeFailure, DimensionMismatch, EnumerationTooLarge, IndexOutOfRange,
    InvalidJoint, ValidationError,
)

SCHEMES = ("superposition", "rate-split", "time-shared")
WILSON_Z = 1.959963984540054
DEFAULT_MAX_CODEWORDS = 1 << 22
DEFAULT_ENUM_CAP = 100_000_000


@dataclass(frozen=True)
class CodebookSpec:
    """Parameters of a random codebook.

    ``message_rates`` are (R0, R1, ..., RK) in bits per channel use.
    ``chain`` is one AuxiliaryChain for ``superposition`` and a pair of
    two-variable chains p(u_l) p(x_l|u_l) for the two-channel schemes.
    ``confusion_rates`` (one per layer, layout order) override the defaults.
    ``split`` is the rate of the private message carried next to the common
    message on the other sub-channel (surfaces 1 and 2); ``None`` puts as much
    as is decodable on the private sub-channel and the rest on the other.
    """

    n: int
    message_rates: tuple[float, ...]
    chain: object
    confusion_rates: tuple[float, ...] | None = None
    seed: int = 0
    epsilon: float = 0.1
    scheme: str = "superposition"
    surface: int = 3
    alpha: float = 0.5
    split: float | None = None
    max_codewords: int = DEFAULT_MAX_CODEWORDS

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValidationError("block length n must be at least 1")
        rates = tuple(float(r) for r in self.message_rates)
        if any(r < 0 or not np.isfinite(r) for r in rates):
            raise ValidationError("message rates must be finite and nonnegative")
        object.__setattr__(self, "message_rates", rates)
        if self.confusion_rates is not None:
            conf = tuple(float(r) for r in self.confusion_rates)
            if any(r < 0 or not np.isfinite(r) for r in conf):
                raise ValidationError("confusion rates must be finite and nonnegative")
            object.__setattr__(self, "confusion_rates", conf)
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.epsilon <= 0:
            raise ValidationError("typicality slack epsilon must be positive")
        if self.surface not in (1, 2, 3):
            raise ValidationError("surface must be 1, 2 or 3")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError("alpha must lie in [0, 1]")
        if self.split is not None and self.split < 0:
            raise ValidationError("split rate must be nonnegative")

    def to_json(self) -> dict:
        chains = self.chain if isinstance(self.chain, (tuple, list)) else (self.chain,)
        return {"n": self.n, "message_rates": list(self.message_rates),
                "confusion_rates": None if self.confusion_rates is None else list(self.confusion_rates),
                "chains": [c.to_json() for c in chains], "seed": self.seed, "epsilon": self.epsilon,
                "scheme": self.scheme, "surface": self.surface, "alpha": self.alpha, "split": self.split}


# ---------------------------------------------------------------------------
# layouts


@dataclass(frozen=True)
class Layer:
    name: str
    segment: int
    parent: int | None
    parts: tuple[str, ...]           # message parts indexed by this layer
    link: np.ndarray                 # p(u) for a root, p(u | parent letter) otherwise
    info_z: float                    # I(U; Z | parent) per letter on the segment


@dataclass(frozen=True)
class DecodeStep:
    segment: int
    layers: tuple[int, ...]          # root-to-deepest path of decoded layers
    receiver: int                    # receiver index within the segment's sub-channel


@dataclass
class Layout:
    layers: list[Layer]
    segments: list[tuple[int, BroadcastWiretapChannel]]       # (length, sub-channel)
    part_rates: dict[str, float]
    messages: list[tuple[str, ...]]                             # user-level message -> parts
    plans: list[list[DecodeStep]]                               # per user


def _chain_layers(chain: AuxiliaryChain, bc: BroadcastWiretapChannel, segment: int, names, parts,
                  offset: int) -> list[Layer]:
    j = chain_to_joint(chain, bc)
    vars_ = j.names[: chain.depth]
    out = []
    for i in range(chain.depth):
        link = chain.links[i].probs if i == 0 else chain.links[i].matrix
        given = [vars_[i - 1]] if i else []
        out.append(Layer(names[i], segment, None if i == 0 else offset + i - 1, parts[i], np.array(link),
                         j.mi(vars_[i], "Z", given)))
    return out


def _superposition_layout(spec: CodebookSpec, bc) -> Layout:
    if isinstance(bc, ParallelChannel):
        if len(bc) != 1:
            raise DimensionMismatch("superposition coding takes a single channel")
        bc = bc[0]
    chain = spec.chain
    if not isinstance(chain, AuxiliaryChain):
        raise ValidationError("superposition coding takes one AuxiliaryChain")
    K = bc.num_receivers
    if chain.depth != K:
        raise DimensionMismatch(f"chain has {chain.depth - 1} auxiliaries, need {K - 1} for {K} receivers")
    if len(spec.message_rates) != K + 1:
        raise DimensionMismatch(f"need {K + 1} message rates (R0..R{K})")
    names = [f"U{i + 1}" for i in range(K - 1)] + ["X"]
    parts = [("W0", "W1")] + [(f"W{k + 1}",) for k in range(1, K)]
    layers = _chain_layers(chain, bc, 0, names, parts, 0)
    rates = {f"W{k}": r for k, r in enumerate(spec.message_rates)}
    plans = [[DecodeStep(0, tuple(range(k + 1)), k)] for k in range(K)]
    return Layout(layers, [(spec.n, bc)], rates, [(f"W{k}",) for k in range(K + 1)], plans)


def _two_channel_layout(spec: CodebookSpec, pc) -> Layout:
    pc = as_parallel(pc)
    if len(pc) != 2 or any(bc.num_receivers != 2 for bc in pc.subchannels):
        raise DimensionMismatch("two-channel schemes need two sub-channels with two receivers each")
    chains = spec.chain
    if not isinstance(chains, (tuple, list)) or len(chains) != 2 or any(c.depth != 2 for c in chains):
        raise ValidationError("two-channel schemes take a pair of chains p(u) p(x|u)")
    if len(spec.message_rates) != 3:
        raise DimensionMismatch("two-user schemes need rates (R0, R1, R2)")
    n = spec.n
    if spec.scheme == "time-shared":
        n1 = int(round(spec.alpha * n))
        if not 0 < n1 < n:
            raise ValidationError(f"alpha={spec.alpha} leaves an empty segment at n={n}")
        lengths = (n1, n - n1)
    else:
        lengths = (n, n)
    subs = pc.subchannels
    R0, R1, R2 = spec.message_rates
    s = spec.surface
    layers: list[Layer] = []
    rates = {"W0": R0}
    if s == 3:
        layers += _chain_layers(chains[0], subs[0], 0, ["U1", "X1"], [("W0",), ("W1",)], 0)
        layers += _chain_layers(chains[1], subs[1], 1, ["U2", "X2"], [("W0",), ("W2",)], 2)
        rates.update(W1=R1, W2=R2)
        messages = [("W0",), ("W1",), ("W2",)]
        plans = [[DecodeStep(0, (0, 1), 0), DecodeStep(1, (2,), 0)],
                 [DecodeStep(0, (0,), 1), DecodeStep(1, (2, 3), 1)]]
    else:
        # strong user's private message sits alone on one sub-channel; the other
        # sub-channel carries the common message (and the split part) in U
        own, other = (0, 1) if s == 1 else (1, 0)
        user = own                       # 0-based index of the split user
        R = (R1, R2)[user]
        solo_chain = AuxiliaryChain((chains[own].input_distribution(),))
        solo = _chain_layers(solo_chain, subs[own], own, [f"X{own + 1}"], [(f"W{user + 1}a",)], 0)[0]
        frac = lengths[own] / n
        if spec.split is None:
            j = chain_to_joint(solo_chain, subs[own])
            room = max(0.0, frac * (j.mi("X", f"Y{user + 1}") - j.mi("X", "Z")))
            split = max(0.0, R - room)
        else:
            split = min(spec.split, R)
        rates.update({f"W{user + 1}a": R - split, f"W{user + 1}b": split})
        pair = _chain_layers(chains[other], subs[other], other, [f"U{other + 1}", f"X{other + 1}"],
                             [("W0", f"W{user + 1}b"), (f"W{2 - user}",)], 1)
        layers = [solo] + pair
        rates[f"W{2 - user}"] = (R1, R2)[1 - user]
        messages = [("W0",)] + [None, None]
        messages[user + 1] = (f"W{user + 1}a", f"W{user + 1}b")
        messages[2 - user] = (f"W{2 - user}",)
        plans = [None, None]
        plans[user] = [DecodeStep(own, (0,), user), DecodeStep(other, (1,), user)]
        plans[1 - user] = [DecodeStep(other, (1, 2), 1 - user)]
    segments = [(lengths[0], subs[0]), (lengths[1], subs[1])]
    plans = [sorted(p, key=lambda st: st.segment) for p in plans]
    return Layout(layers, segments, rates, messages, plans)


# ---------------------------------------------------------------------------
# codebook


def _count(rate: float, n: int) -> int:
    return max(1, int(round(2.0 ** (n * rate))))


@dataclass
class Codebook:
    """Materialized layered codebook.

    ``words[i]`` holds every sequence of layer i, shape (parent codewords x
    local count, segment length); codeword g of layer i has parent codeword
    ``g // local_count[i]`` and local index ``g % local_count[i]``, the local
    index being ``message_index * confusion_count + confusion_index``.
    """

    spec: CodebookSpec
    layout: Layout
    channel: BroadcastWiretapChannel | ParallelChannel
    words: list[np.ndarray]
    part_counts: dict[str, int]
    confusion_counts: list[int]
    confusion_rates: list[float]

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def layers(self) -> list[Layer]:
        return self.layout.layers

    @property
    def num_users(self) -> int:
        return len(self.layout.plans)

    def message_counts(self) -> list[int]:
        return [int(np.prod([self.part_counts[p] for p in m])) for m in self.layout.messages]

    def msg_count(self, i: int) -> int:
        return int(np.prod([self.part_counts[p] for p in self.layers[i].parts], dtype=np.int64))

    def local_count(self, i: int) -> int:
        return self.msg_count(i) * self.confusion_counts[i]

    def realized_rates(self) -> list[float]:
        return [math.log2(c) / self.n for c in self.message_counts()]

    def realized_confusion_rates(self) -> list[float]:
        return [math.log2(c) / self.n for c in self.confusion_counts]

    def summary(self) -> dict:
        return {"nominal_rates": list(self.spec.message_rates), "realized_rates": self.realized_rates(),
                "nominal_confusion_rates": self.confusion_rates,
                "realized_confusion_rates": self.realized_confusion_rates(),
                "message_counts": self.message_counts(), "confusion_counts": self.confusion_counts,
                "layers": [layer.name for layer in self.layers]}


def _draw(rng, probs: np.ndarray) -> np.ndarray:
    """One letter per row of ``probs`` (..., A) by inverse CDF."""
    cum = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1])
    return np.minimum((u[..., None] >= cum).sum(axis=-1), probs.shape[-1] - 1)


def build_codebook(spec: CodebookSpec, channel) -> Codebook:
    layout = _superposition_layout(spec, channel) if spec.scheme == "superposition" else _two_channel_layout(spec, channel)
    n = spec.n
    part_counts = {p: _count(r, n) for p, r in layout.part_rates.items()}
    lengths = [length for length, _ in layout.segments]
    if spec.confusion_rates is not None:
        if len(spec.confusion_rates) != len(layout.layers):
            raise DimensionMismatch(f"need {len(layout.layers)} confusion rates, one per layer "
                                    f"({', '.join(layer.name for layer in layout.layers)})")
        conf_rates = list(spec.confusion_rates)
    else:
        conf_rates = [lengths[layer.segment] / n * layer.info_z for layer in layout.layers]
    conf_counts = [_count(r, n) for r in conf_rates]
    # sizes first, so an oversized request fails before any allocation
    sizes = []
    for i, layer in enumerate(layout.layers):
        local = int(np.prod([part_counts[p] for p in layer.parts], dtype=np.int64)) * conf_counts[i]
        parent = 1 if layer.parent is None else sizes[layer.parent]
        sizes.append(parent * local)
    total = sum(s * lengths[layer.segment] for s, layer in zip(sizes, layout.layers))
    if total > spec.max_codewords:
        raise CapacityExceeded(f"codebook needs {total} letters, cap is {spec.max_codewords}")
    rng = np.random.default_rng(spec.seed)
    words = []
    for i, layer in enumerate(layout.layers):
        length = lengths[layer.segment]
        local = sizes[i] // (1 if layer.parent is None else sizes[layer.parent])
        if layer.parent is None:
            probs = np.broadcast_to(layer.link, (sizes[i], length, len(layer.link)))
        else:
            parent_words = np.repeat(words[layer.parent], local, axis=0)
            probs = layer.link[parent_words]
        words.append(_draw(rng, probs).astype(np.int64))
    cb = Codebook(spec, layout, channel, words, part_counts, conf_counts, conf_rates)
    return cb


# ---------------------------------------------------------------------------
# encoding and channel sampling


def _split_message(cb: Codebook, values: Sequence[int]) -> dict[str, np.ndarray]:
    """User-level message indices (T, K+1) -> part values (mixed radix, first part most significant)."""
    values = np.atleast_2d(values)
    counts = cb.message_counts()
    if values.shape[1] != len(counts):
        raise DimensionMismatch(f"expected {len(counts)} messages (w0..w{len(counts) - 1})")
    out = {}
    for k, parts in enumerate(cb.layout.messages):
        v = values[:, k].astype(np.int64)
        if (v < 0).any() or (v >= counts[k]).any():
            raise IndexOutOfRange(f"message w{k} out of range [0, {counts[k]})")
        for p in reversed(parts):
            out[p] = v % cb.part_counts[p]
            v = v // cb.part_counts[p]
    return out


def _layer_index(cb: Codebook, i: int, parts: dict[str, np.ndarray], conf: np.ndarray,
                 memo: dict) -> np.ndarray:
    if i in memo:
        return memo[i]
    layer = cb.layers[i]
    m = np.zeros_like(conf[:, 0])
    for p in layer.parts:
        m = m * cb.part_counts[p] + parts[p]
    local = m * cb.confusion_counts[i] + conf[:, i]
    g = local if layer.parent is None else _layer_index(cb, layer.parent, parts, conf, memo) * cb.local_count(i) + local
    memo[i] = g
    return g


def _input_layers(cb: Codebook) -> list[int]:
    parents = {layer.parent for layer in cb.layers}
    out = []
    for s in range(len(cb.layout.segments)):
        leaf = [i for i, layer in enumerate(cb.layers) if layer.segment == s and i not in parents]
        out.append(leaf[0])
    return out


def _encode_batch(cb: Codebook, messages: np.ndarray, rng) -> list[np.ndarray]:
    parts = _split_message(cb, messages)
    T = len(messages)
    conf = np.column_stack([rng.integers(0, c, size=T) for c in cb.confusion_counts])
    memo: dict = {}
    return [cb.words[i][_layer_index(cb, i, parts, conf, memo)] for i in _input_layers(cb)]


def encode(cb: Codebook, messages: Sequence[int], rng=None) -> np.ndarray:
    """Codeword for (w0, ..., wK) with uniformly drawn confusion indices.

    Segments are concatenated in order; a two-channel scheme returns the
    inputs of sub-channel 1 followed by those of sub-channel 2.
    """
    rng = rng if rng is not None else np.random.default_rng()
    xs = _encode_batch(cb, np.asarray(messages)[None, :], rng)
    return np.concatenate([x[0] for x in xs])


def _sample_outputs(bc: BroadcastWiretapChannel, x: np.ndarray, rng) -> np.ndarray:
    """Outputs (..., K+1) = (y_1, ..., y_K, z) for inputs x."""
    flat = _draw(rng, bc.joint[x])
    return np.stack(np.unravel_index(flat, bc.output_shape), axis=-1)


def transmit(cb: Codebook, x: np.ndarray, rng, channel=None) -> list[np.ndarray]:
    """Channel outputs per segment, each of shape (..., length, K+1)."""
    pc = as_parallel(channel if channel is not None else cb.channel)
    xs = x if isinstance(x, list) else _split_segments(cb, x)
    return [_sample_outputs(pc[0] if len(pc) == 1 else pc[s], xs[s], rng) for s in range(len(xs))]


def _split_segments(cb: Codebook, x: np.ndarray) -> list[np.ndarray]:
    out, pos = [], 0
    for length, _ in cb.layout.segments:
        out.append(x[..., pos:pos + length])
        pos += length
    return out


# ---------------------------------------------------------------------------
# decoding


def _step_tables(cb: Codebook, step: DecodeStep):
    """Combined symbol sequences, part values and p(y|symbols) for one decoding step."""
    layers = step.layers
    deepest = layers[-1]
    P = len(cb.words[deepest])
    # ancestor codeword index of every path at every decoded layer
    idx = {deepest: np.arange(P)}
    for a, b in zip(layers[::-1], layers[-2::-1]):
        idx[b] = idx[a] // cb.local_count(a)
    codes = np.zeros((P, cb.words[deepest].shape[1]), dtype=np.int64)
    sizes = []
    for i in layers:
        size = cb.layers[i].link.shape[-1]
        codes = codes * size + cb.words[i][idx[i]]
        sizes.append(size)
    parts = {}
    for i in layers:
        local = idx[i] % cb.local_count(i)
        m = local // cb.confusion_counts[i]
        for p in reversed(cb.layers[i].parts):
            parts[p] = m % cb.part_counts[p]
            m = m // cb.part_counts[p]
    # p(decoded letters, y) from the segment's chain and channel
    seg_layers = [i for i, layer in enumerate(cb.layers) if layer.segment == step.segment]
    J = cb.layers[seg_layers[0]].link
    for i in seg_layers[1:]:
        J = J[..., None] * cb.layers[i].link.reshape((1,) * (J.ndim - 1) + cb.layers[i].link.shape)
    bc = as_parallel(cb.channel)[step.segment]
    W = marginal_channel(bc, step.receiver).matrix
    JY = J[..., None] * W.reshape((1,) * (J.ndim - 1) + W.shape)
    keep = [seg_layers.index(i) for i in layers]
    drop = tuple(a for a in range(J.ndim) if a not in keep)
    pd = JY.sum(axis=drop) if drop else JY
    pd = pd.reshape(-1, W.shape[1])
    tot = pd.sum(axis=1, keepdims=True)
    cond = np.divide(pd, tot, out=np.zeros_like(pd), where=tot > 0)
    return codes, parts, cond


@dataclass
class _UserDecoder:
    steps: list
    part_names: list[str]
    part_counts: list[int]
    step_parts: list[list[str]]
    step_ids: list[np.ndarray]        # per step: path -> message id over its parts
    step_maps: list[np.ndarray]       # per step: full candidate id -> step message id


def _user_decoder(cb: Codebook, user: int) -> _UserDecoder:
    steps = cb.layout.plans[user]
    names: list[str] = []
    tables = []
    for st in steps:
        codes, parts, cond = _step_tables(cb, st)
        tables.append((codes, parts, cond))
        for p in parts:
            if p not in names:
                names.append(p)
    counts = [cb.part_counts[p] for p in names]
    full = np.arange(int(np.prod(counts, dtype=np.int64)))
    digits = {}
    rem = full.copy()
    for p, c in zip(reversed(names), reversed(counts)):
        digits[p] = rem % c
        rem //= c
    ids, maps, sparts, steps_out = [], [], [], []
    for st, (codes, parts, cond) in zip(steps, tables):
        plist = [p for p in names if p in parts]
        pid = np.zeros(len(codes), dtype=np.int64)
        fmap = np.zeros(len(full), dtype=np.int64)
        for p in plist:
            pid = pid * cb.part_counts[p] + parts[p]
            fmap = fmap * cb.part_counts[p] + digits[p]
        ids.append(pid)
        maps.append(fmap)
        sparts.append(plist)
        steps_out.append((st, codes, cond, int(np.prod([cb.part_counts[p] for p in plist], dtype=np.int64))))
    return _UserDecoder(steps_out, names, counts, sparts, ids, maps)


def _decode_batch(cb: Codebook, dec: _UserDecoder, ys: list[np.ndarray], backend=None):
    """Unique candidate id per trial, -1 when none is typical, -2 when several are."""
    full = None
    for (st, codes, cond, n_ids), pid, fmap, y in zip(dec.steps, dec.step_ids, dec.step_maps, ys):
        mask = _kernels.typical_mask(codes, pid, n_ids, y, cond, cb.spec.epsilon, backend=backend)
        m = mask[:, fmap]
        full = m if full is None else full & m
    count = full.sum(axis=1)
    out = np.where(count == 1, np.argmax(full, axis=1), np.where(count == 0, -1, -2))
    return out, count


def _candidate_parts(dec: _UserDecoder, ids: np.ndarray) -> dict[str, np.ndarray]:
    out = {}
    rem = np.maximum(ids, 0)
    for p, c in zip(reversed(dec.part_names), reversed(dec.part_counts)):
        out[p] = rem % c
        rem = rem // c
    return out


def _user_messages(cb: Codebook, user: int) -> tuple[int, int]:
    return (0, user + 1)


def _observations(cb: Codebook, user: int, outputs: list[np.ndarray]) -> list[np.ndarray]:
    return [outputs[st.segment][..., st.receiver] for st in cb.layout.plans[user]]


def decode(cb: Codebook, y: np.ndarray, user: int) -> tuple[int, int]:
    """Decode (w0, w_user) from user ``user``'s observation (1-based user index).

    ``y`` concatenates the user's outputs on every segment it listens to, in
    segment order.
    """
    if not 1 <= user <= cb.num_users:
        raise IndexOutOfRange(f"user must be in 1..{cb.num_users}")
    u = user - 1
    y = np.asarray(y, dtype=np.int64)
    steps = cb.layout.plans[u]
    need = sum(cb.layout.segments[st.segment][0] for st in steps)
    if y.shape != (need,):
        raise DimensionMismatch(f"observation must have length {need}")
    ys, pos = [], 0
    for st in steps:
        length = cb.layout.segments[st.segment][0]
        ys.append(y[None, pos:pos + length])
        pos += length
    dec = _user_decoder(cb, u)
    ids, count = _decode_batch(cb, dec, ys)
    if ids[0] < 0:
        raise DecodeFailure("no typical candidate" if ids[0] == -1 else "several typical candidates",
                            int(count[0]))
    parts = _candidate_parts(dec, ids)
    return tuple(_compose(cb, k, parts)[0] for k in _user_messages(cb, u))


def _compose(cb: Codebook, k: int, parts: dict[str, np.ndarray]) -> np.ndarray:
    v = 0
    for p in cb.layout.messages[k]:
        v = v * cb.part_counts[p] + parts[p]
    return np.atleast_1d(v)


# ---------------------------------------------------------------------------
# Monte Carlo error estimate


def wilson_interval(errors: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    if trials <= 0:
        return (0.0, 1.0)
    p = errors / trials
    d = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / d
    half = z / d * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == trials else min(1.0, centre + half)
    return (lo, hi)


@dataclass
class SimulationReport:
    trials: int
    errors: list[int]
    error_estimates: list[float]
    intervals: list[tuple[float, float]]
    failures: list[dict] = field(default_factory=list)
    equivocation: dict[str, float] = field(default_factory=dict)
    codebook: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"trials": self.trials, "errors": self.errors, "error_estimates": self.error_estimates,
                "intervals": [list(i) for i in self.intervals], "failures": self.failures,
                "equivocation": self.equivocation, "codebook": self.codebook}

    def table(self) -> str:
        lines = [f"{'user':>4}  {'error':>8}  {'95% interval':>21}"]
        for k, (e, (lo, hi)) in enumerate(zip(self.error_estimates, self.intervals)):
            lines.append(f"{k + 1:>4}  {e:8.5f}  [{lo:8.5f}, {hi:8.5f}]")
        for name, v in self.equivocation.items():
            lines.append(f"H({name}|Z^n)/n = {v:.6f} bits")
        return "\n".join(lines)


def estimate_error(cb: Codebook, bc=None, trials: int = 1000, rng=None, chunk: int = 20_000,
                   backend: str | None = None) -> SimulationReport:
    """Per-user probability that (w0, w_k) is not recovered, with Wilson 95% intervals."""
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    rng = rng if rng is not None else np.random.default_rng(cb.spec.seed)
    counts = cb.message_counts()
    decoders = [_user_decoder(cb, u) for u in range(cb.num_users)]
    errors = np.zeros(cb.num_users, dtype=np.int64)
    none = np.zeros(cb.num_users, dtype=np.int64)
    many = np.zeros(cb.num_users, dtype=np.int64)
    done = 0
    while done < trials:
        T = min(chunk, trials - done)
        msgs = np.column_stack([rng.integers(0, c, size=T) for c in counts])
        xs = _encode_batch(cb, msgs, rng)
        outs = transmit(cb, xs, rng, bc)
        for u, dec in enumerate(decoders):
            ids, _ = _decode_batch(cb, dec, _observations(cb, u, outs), backend)
            parts = _candidate_parts(dec, ids)
            wrong = ids < 0
            for k in _user_messages(cb, u):
                wrong |= _compose(cb, k, parts) != msgs[:, k]
            errors[u] += int(wrong.sum())
            none[u] += int((ids == -1).sum())
            many[u] += int((ids == -2).sum())
        done += T
    est = [float(e) / trials for e in errors]
    return SimulationReport(trials, errors.tolist(), est, [wilson_interval(int(e), trials) for e in errors],
                            [{"no_candidate": int(a), "several_candidates": int(b)} for a, b in zip(none, many)],
                            codebook=cb.summary())


# ---------------------------------------------------------------------------
# exact equivocation


def _entropy_rows(P: np.ndarray) -> float:
    p = P[P > 0]
    return float(-(p * np.log2(p)).sum())


def _message_subset(cb: Codebook, subset) -> list[int]:
    K1 = len(cb.layout.messages)
    out = []
    for s in subset:
        k = int(s[1:]) if isinstance(s, str) and s.upper().startswith("W") else int(s)
        if not 0 <= k < K1:
            raise IndexOutOfRange(f"message index {s!r} outside w0..w{K1 - 1}")
        if k not in out:
            out.append(k)
    return sorted(out)


def exact_equivocation(cb: Codebook, subset=None, cap: int = DEFAULT_ENUM_CAP, backend: str | None = None) -> float:
    """H(W_S | Z^n) / n for the message subset S (all messages by default), by full enumeration."""
    subset = _message_subset(cb, range(len(cb.layout.messages)) if subset is None else subset)
    if not subset:
        return 0.0
    pc = as_parallel(cb.channel)
    inputs = _input_layers(cb)
    segs = cb.layout.segments
    if len(segs) > 2:
        raise ValidationError("exact equivocation supports at most two segments")
    parts = list(cb.part_counts)
    sizes = [cb.part_counts[p] for p in parts] + list(cb.confusion_counts)
    A = int(np.prod(sizes, dtype=np.int64))
    zcells = 1
    for length, bc in segs:
        zcells *= bc.eavesdropper_alphabet ** length
    if A * zcells > cap:
        raise EnumerationTooLarge(f"enumeration needs {A} x {zcells} cells, cap is {cap}")
    grid = np.indices(sizes).reshape(len(sizes), -1)
    pvals = {p: grid[i] for i, p in enumerate(parts)}
    conf = grid[len(parts):].T
    memo: dict = {}
    leaves = [_layer_index(cb, i, pvals, conf, memo) for i in inputs]
    sub_parts = [p for k in subset for p in cb.layout.messages[k]]
    g = np.zeros(A, dtype=np.int64)
    for p in sub_parts:
        g = g * cb.part_counts[p] + pvals[p]
    G = int(np.prod([cb.part_counts[p] for p in sub_parts], dtype=np.int64))
    Ls = []
    for s, ((length, _), i) in enumerate(zip(segs, inputs)):
        bc = pc[0] if len(pc) == 1 else pc[s]
        Wz = bc.tensor().sum(axis=tuple(range(1, bc.num_receivers + 1)))
        Ls.append(_kernels.likelihoods(cb.words[i], Wz, backend=backend))
    if len(Ls) == 1:
        C = np.zeros((G, len(Ls[0])))
        np.add.at(C, (g, leaves[0]), 1.0)
        PWZ = C @ Ls[0] / A
    else:
        PWZ = np.zeros((G, Ls[0].shape[1] * Ls[1].shape[1]))
        for gi in range(G):
            sel = g == gi
            C = np.zeros((len(Ls[0]), len(Ls[1])))
            np.add.at(C, (leaves[0][sel], leaves[1][sel]), 1.0)
            PWZ[gi] = (Ls[0].T @ C @ Ls[1]).ravel() / A
    value = (_entropy_rows(PWZ) - _entropy_rows(PWZ.sum(axis=0))) / cb.n
    return max(0.0, value)


def equivocation_table(cb: Codebook, cap: int = DEFAULT_ENUM_CAP) -> dict[str, float]:
    """Exact equivocation of every nonempty message subset, keyed like ``"W0,W2"``."""
    K1 = len(cb.layout.messages)
    out = {}
    for r in range(1, K1 + 1):
        for S in itertools.combinations(range(K1), r):
            out[",".join(f"W{k}" for k in S)] = exact_equivocation(cb, S, cap)
    return out


# ---------------------------------------------------------------------------
# sum-rate secrecy implies subset secrecy


@dataclass
class Lemma1Report:
    rates: list[float]
    sum_margin: float
    sum_satisfied: bool
    subset_margins: dict[str, float]
    worst_subset: str
    worst_margin: float
    implication_holds: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _cond_entropy(P: np.ndarray, keep: Sequence[int]) -> float:
    """H(W_keep | Z) where the last axis of P is Z."""
    z = P.ndim - 1
    drop = tuple(a for a in range(z) if a not in keep)
    M = P.sum(axis=drop) if drop else P
    return _entropy_rows(M) - _entropy_rows(P.sum(axis=tuple(range(z))))


def check_lemma1(joint, rates=None, tolerance: float = 1e-9, n: int = 1) -> Lemma1Report:
    """Check that sum-rate secrecy implies secrecy of every message subset.

    ``joint`` is p(w_0, ..., w_K, z) with the eavesdropper observation on the
    last axis.  Messages must be uniform and independent, and n R_j equals
    log2 |W_j|; ``rates`` (per use, optional) is checked against that.
    """
    P = np.asarray(joint, dtype=float)
    if P.ndim < 2:
        raise DimensionMismatch("joint needs at least one message axis and the eavesdropper axis")
    if (P < -1e-12).any() or abs(P.sum() - 1) > 1e-9:
        raise InvalidJoint("joint is not a probability distribution")
    P = np.clip(P, 0, None)
    sizes = P.shape[:-1]
    W = P.sum(axis=-1)
    uniform = np.full(sizes, 1.0 / np.prod(sizes))
    if np.abs(W - uniform).max() > 1e-9:
        raise InvalidJoint("messages must be uniform and mutually independent")
    block = [math.log2(s) for s in sizes]
    if rates is not None:
        if len(rates) != len(sizes) or any(abs(r * n - b) > 1e-9 for r, b in zip(rates, block)):
            raise ValidationError("rates must equal log2|W_j| / n for uniform messages")
    K1 = len(sizes)
    total = _cond_entropy(P, list(range(K1)))
    sum_margin = total - sum(block)
    margins = {}
    for r in range(1, K1 + 1):
        for S in itertools.combinations(range(K1), r):
            margins[",".join(f"W{k}" for k in S)] = _cond_entropy(P, list(S)) - sum(block[k] for k in S)
    worst = min(margins, key=margins.get)
    # entropies carry ~1e-15 of roundoff; do not let it flip a comparison at zero tolerance
    slack = tolerance + 1e-12
    sum_ok = sum_margin >= -slack
    all_ok = all(m >= -slack for m in margins.values())
    return Lemma1Report([b / n for b in block], sum_margin, sum_ok, margins, worst, margins[worst],
                        (not sum_ok) or all_ok)
