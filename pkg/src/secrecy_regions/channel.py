"""Finite-alphabet probability objects and entropy / mutual-information evaluation.

All logarithms are base 2.  Matrices are dense ``numpy`` arrays; the alphabets
handled here are tiny, so nothing is sparse and every joint is materialized.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, InvalidJoint, NotStochastic

SUM_TOL = 1e-9
CLAMP_TOL = 1e-12
EAVESDROPPER = "Z"


def _as_stochastic(matrix, what="matrix") -> np.ndarray:
    """Validate a row-stochastic matrix, clamping float noise in (-1e-12, 0)."""
    try:
        arr = np.array(matrix, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DimensionMismatch(f"{what} is not a rectangular numeric array") from exc
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionMismatch(f"{what} must be a non-empty 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        r, c = np.argwhere(~np.isfinite(arr))[0]
        raise NotStochastic(int(r), float("nan"), column=int(c))
    bad = arr < -CLAMP_TOL
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise NotStochastic(int(r), float(arr[r, c]), column=int(c))
    arr[arr < 0] = 0.0
    dev = arr.sum(axis=1) - 1.0
    off = np.abs(dev) > SUM_TOL
    if off.any():
        r = int(np.argmax(off))
        raise NotStochastic(r, float(dev[r]))
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Distribution:
    probs: np.ndarray

    def __post_init__(self):
        arr = _as_stochastic(np.atleast_2d(np.asarray(self.probs, dtype=float)), "distribution")
        if arr.shape[0] != 1:
            raise DimensionMismatch("a Distribution is a single probability vector")
        object.__setattr__(self, "probs", arr[0])

    @property
    def size(self) -> int:
        return self.probs.shape[0]

    @classmethod
    def uniform(cls, size: int) -> "Distribution":
        return cls(np.full(size, 1.0 / size))

    def __len__(self):
        return self.size


@dataclass(frozen=True)
class Channel:
    """Row-stochastic transition matrix p(out | in)."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _as_stochastic(self.matrix, "channel matrix"))

    @property
    def input_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def output_size(self) -> int:
        return self.matrix.shape[1]

    def output_distribution(self, p_in) -> np.ndarray:
        p = _probs(p_in)
        if p.shape[0] != self.input_size:
            raise DimensionMismatch(f"input length {p.shape[0]} != channel input size {self.input_size}")
        return p @ self.matrix


def validate_channel(matrix) -> Channel:
    return Channel(matrix)


def bsc(p: float) -> Channel:
    return Channel([[1 - p, p], [p, 1 - p]])


def bec(e: float) -> Channel:
    """Binary erasure channel; output symbol 2 is the erasure."""
    return Channel([[1 - e, 0.0, e], [0.0, 1 - e, e]])


def identity(n: int) -> Channel:
    return Channel(np.eye(n))


def constant(input_size: int, output_size: int = 1) -> Channel:
    """Channel whose output carries no information about the input."""
    m = np.zeros((input_size, output_size))
    m[:, 0] = 1.0
    return Channel(m)


def cascade(first: Channel, second: Channel) -> Channel:
    if first.output_size != second.input_size:
        raise DimensionMismatch(
            f"cannot cascade: first output size {first.output_size} != second input size {second.input_size}")
    return Channel(first.matrix @ second.matrix)


def _probs(p) -> np.ndarray:
    return p.probs if isinstance(p, Distribution) else np.asarray(p, dtype=float)


# ---------------------------------------------------------------------------
# entropy and information


def _plogp(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log2(p[pos])
    return out


def entropy(p) -> float:
    p = _probs(p)
    return float(-_plogp(p).sum())


def mutual_information(p_in, ch: Channel) -> float:
    """I(X;Y) in bits for input law ``p_in`` through channel ``ch``."""
    p = _probs(p_in)
    if p.shape[0] != ch.input_size:
        raise DimensionMismatch(f"input length {p.shape[0]} != channel input size {ch.input_size}")
    w = ch.matrix
    q = p @ w
    pxy = p[:, None] * w
    mask = pxy > 0
    ratio = np.ones_like(w)
    ratio[mask] = w[mask] / np.broadcast_to(q, w.shape)[mask]
    return max(0.0, float((pxy[mask] * np.log2(ratio[mask])).sum()))


def batch_entropy(p: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Entropy of the marginal on ``keep`` axes for a batch of joints.

    ``p`` has a leading batch axis; ``keep`` indexes the remaining axes
    (0-based, not counting the batch axis).
    """
    nd = p.ndim - 1
    drop = tuple(1 + a for a in range(nd) if a not in keep)
    m = p.sum(axis=drop) if drop else p
    m = m.reshape(m.shape[0], -1)
    return -_plogp(m).sum(axis=1)


def batch_cmi(p: np.ndarray, a: Sequence[int], b: Sequence[int], c: Sequence[int] = ()) -> np.ndarray:
    """I(A;B|C) for a batch of joints, via H(AC)+H(BC)-H(ABC)-H(C)."""
    a, b, c = list(a), list(b), list(c)
    val = (batch_entropy(p, a + c) + batch_entropy(p, b + c)
           - batch_entropy(p, a + b + c) - (batch_entropy(p, c) if c else 0.0))
    return val


def conditional_mutual_information(joint, shape: Sequence[int] | None = None) -> float:
    """I(A;B|C) for a joint over three axes.

    ``joint`` is either a 3-d array or a flat vector with ``shape`` giving the
    declared (|A|, |B|, |C|) sizes in row-major order.
    """
    arr = np.asarray(joint, dtype=float)
    if shape is not None:
        if prod(shape) != arr.size or len(shape) != 3:
            raise DimensionMismatch(f"joint of size {arr.size} does not match declared shape {tuple(shape)}")
        arr = arr.reshape(shape)
    if arr.ndim != 3:
        raise DimensionMismatch("joint must have exactly three axes (A, B, C)")
    if (arr < -CLAMP_TOL).any() or abs(arr.sum() - 1.0) > SUM_TOL:
        raise InvalidJoint(f"joint is not a probability distribution (sum {arr.sum():.12g})")
    arr = np.clip(arr, 0.0, None)
    return max(0.0, float(batch_cmi(arr[None], [0], [1], [2])[0]))


@dataclass(frozen=True)
class Joint:
    """Dense joint distribution with named axes."""

    probs: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        if self.probs.ndim != len(self.names):
            raise DimensionMismatch("one name per axis required")
        if abs(self.probs.sum() - 1.0) > SUM_TOL or (self.probs < -CLAMP_TOL).any():
            raise InvalidJoint("joint does not sum to one")

    def axes(self, names: Iterable[str]) -> list[int]:
        try:
            return [self.names.index(n) for n in names]
        except ValueError as exc:
            raise IndexOutOfRange(str(exc)) from None

    def marginal(self, names: Sequence[str]) -> np.ndarray:
        keep = self.axes(names)
        drop = tuple(i for i in range(len(self.names)) if i not in keep)
        m = self.probs.sum(axis=drop) if drop else self.probs
        srt = sorted(keep)
        return m.transpose([srt.index(k) for k in keep])

    def entropy(self, names: Sequence[str]) -> float:
        return float(batch_entropy(self.probs[None], self.axes(names))[0])

    def mi(self, a: Sequence[str] | str, b: Sequence[str] | str, given: Sequence[str] | str = ()) -> float:
        a, b, given = _names(a), _names(b), _names(given)
        return float(batch_cmi(self.probs[None], self.axes(a), self.axes(b), self.axes(given))[0])


def _names(x) -> list[str]:
    return [x] if isinstance(x, str) else list(x)


# ---------------------------------------------------------------------------
# broadcast and parallel channels


@dataclass(frozen=True)
class BroadcastWiretapChannel:
    """p(y_1, ..., y_K, z | x), columns row-major over (y_1, ..., y_K, z)."""

    input_size: int
    receiver_alphabets: tuple[int, ...]
    eavesdropper_alphabet: int
    joint: np.ndarray

    def __post_init__(self):
        rec = tuple(int(r) for r in self.receiver_alphabets)
        object.__setattr__(self, "receiver_alphabets", rec)
        if len(rec) < 1:
            raise DimensionMismatch("at least one legitimate receiver is required")
        if any(r < 1 for r in rec) or self.eavesdropper_alphabet < 1 or self.input_size < 1:
            raise DimensionMismatch("alphabet sizes must be positive")
        m = _as_stochastic(self.joint, "joint transition matrix")
        cols = prod(rec) * self.eavesdropper_alphabet
        if m.shape != (self.input_size, cols):
            raise DimensionMismatch(
                f"joint has shape {m.shape}, expected ({self.input_size}, {cols})")
        object.__setattr__(self, "joint", m)

    @property
    def num_receivers(self) -> int:
        return len(self.receiver_alphabets)

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self.receiver_alphabets + (self.eavesdropper_alphabet,)

    def tensor(self) -> np.ndarray:
        """Conditional law as an array of shape (|X|, |Y_1|, ..., |Y_K|, |Z|)."""
        return self.joint.reshape((self.input_size,) + self.output_shape)

    @classmethod
    def from_product(cls, receivers: Sequence[Channel], eavesdropper: Channel) -> "BroadcastWiretapChannel":
        """Outputs conditionally independent given X."""
        chans = list(receivers) + [eavesdropper]
        nx = chans[0].input_size
        if any(c.input_size != nx for c in chans):
            raise DimensionMismatch("all component channels must share the input alphabet")
        t = np.ones((nx,))
        for c in chans:
            t = t[..., None] * c.matrix.reshape((nx,) + (1,) * (t.ndim - 1) + (c.output_size,))
        return cls(nx, tuple(c.output_size for c in receivers), eavesdropper.output_size, t.reshape(nx, -1))

    @classmethod
    def from_cascade(cls, links: Sequence[Channel], terminals: Sequence[str]) -> "BroadcastWiretapChannel":
        """Physically degraded channel X -> T_1 -> T_2 -> ... built from cascade links.

        ``links[0]`` is p(t_1|x), ``links[i]`` is p(t_{i+1}|t_i).  ``terminals``
        labels each T_i as ``"Y1"``, ``"Y2"``, ... or ``"Z"``.
        """
        if len(links) != len(terminals):
            raise DimensionMismatch("one terminal label per cascade link")
        labels = [parse_terminal(t) for t in terminals]
        rec = sorted(x for x in labels if x != EAVESDROPPER)
        if labels.count(EAVESDROPPER) != 1 or rec != list(range(len(rec))):
            raise DimensionMismatch(f"terminals must be Y1..YK and Z exactly once, got {list(terminals)}")
        for a, b in zip(links, links[1:]):
            if a.output_size != b.input_size:
                raise DimensionMismatch("cascade links have incompatible sizes")
        nx = links[0].input_size
        t = links[0].matrix
        for link in links[1:]:
            t = t[..., None] * link.matrix.reshape((1,) * (t.ndim - 1) + link.matrix.shape)
        # axis i+1 of t holds terminal i; reorder to (x, y_1..y_K, z)
        target = rec + [EAVESDROPPER]
        perm = [0] + [1 + labels.index(lab) for lab in target]
        t = np.transpose(t, perm)
        sizes = [links[labels.index(k)].output_size for k in rec]
        zsize = links[labels.index(EAVESDROPPER)].output_size
        return cls(nx, tuple(sizes), zsize, t.reshape(nx, -1))

    def pair(self, which: int | str) -> Channel:
        """p(y_k, z | x) as a Channel with outputs flattened row-major over (y_k, z)."""
        k = resolve_receiver(self, which)
        if k == EAVESDROPPER:
            raise IndexOutOfRange("pair() needs a receiver, not the eavesdropper")
        t = self.tensor()
        drop = tuple(1 + i for i in range(self.num_receivers) if i != k)
        m = t.sum(axis=drop) if drop else t
        return Channel(m.reshape(self.input_size, -1))

    def to_json(self) -> dict:
        return {"input_size": self.input_size, "receivers": list(self.receiver_alphabets),
                "eavesdropper": self.eavesdropper_alphabet, "joint": self.joint.tolist()}


@dataclass(frozen=True)
class ParallelChannel:
    subchannels: tuple[BroadcastWiretapChannel, ...]

    def __post_init__(self):
        subs = tuple(self.subchannels)
        object.__setattr__(self, "subchannels", subs)
        if len(subs) < 1:
            raise DimensionMismatch("a parallel channel needs at least one sub-channel")
        ks = {s.num_receivers for s in subs}
        if len(ks) != 1:
            raise DimensionMismatch(f"sub-channels disagree on the number of receivers: {sorted(ks)}")

    @property
    def num_receivers(self) -> int:
        return self.subchannels[0].num_receivers

    def __len__(self):
        return len(self.subchannels)

    def __getitem__(self, i) -> BroadcastWiretapChannel:
        return self.subchannels[i]

    def to_json(self) -> dict:
        return {"subchannels": [s.to_json() for s in self.subchannels]}


def parse_terminal(which) -> int | str:
    """Map ``"Y3"`` -> 2, ``"Z"``/``"eve"`` -> EAVESDROPPER, ints pass through (0-based)."""
    if isinstance(which, (int, np.integer)):
        return int(which)
    s = str(which).strip()
    if s.upper() in ("Z", "EVE", "EAVESDROPPER"):
        return EAVESDROPPER
    if s[:1].upper() == "Y" and s[1:].isdigit():
        return int(s[1:]) - 1
    raise IndexOutOfRange(f"unknown terminal {which!r}")


def resolve_receiver(bc: BroadcastWiretapChannel, which) -> int | str:
    k = parse_terminal(which)
    if k != EAVESDROPPER and not 0 <= k < bc.num_receivers:
        raise IndexOutOfRange(f"receiver index {k} out of range for {bc.num_receivers} receivers")
    return k


def marginal_channel(bc: BroadcastWiretapChannel, which) -> Channel:
    """Extract p(y_k|x) (0-based int or ``"Y1"``...) or p(z|x) (``"Z"``)."""
    k = resolve_receiver(bc, which)
    axis = bc.num_receivers if k == EAVESDROPPER else k
    t = bc.tensor()
    drop = tuple(1 + i for i in range(bc.num_receivers + 1) if i != axis)
    return Channel(t.sum(axis=drop))


# ---------------------------------------------------------------------------
# auxiliary chains


@dataclass(frozen=True)
class AuxiliaryChain:
    """p(u_1) p(u_2|u_1) ... p(x|u_{K-1}); the last variable is the channel input X."""

    links: tuple = field()

    def __post_init__(self):
        links = list(self.links)
        if not links:
            raise DimensionMismatch("a chain needs at least the input distribution")
        first = links[0] if isinstance(links[0], Distribution) else Distribution(links[0])
        rest = [c if isinstance(c, Channel) else Channel(c) for c in links[1:]]
        size = first.size
        for i, c in enumerate(rest):
            if c.input_size != size:
                raise DimensionMismatch(f"chain link {i + 1} expects input size {c.input_size}, previous size {size}")
            size = c.output_size
        object.__setattr__(self, "links", (first, *rest))

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return (self.links[0].size,) + tuple(c.output_size for c in self.links[1:])

    @property
    def depth(self) -> int:
        """Number of variables in the chain (K-1 auxiliaries plus X)."""
        return len(self.links)

    def marginals(self) -> list[np.ndarray]:
        out = [self.links[0].probs]
        for c in self.links[1:]:
            out.append(out[-1] @ c.matrix)
        return out

    def input_distribution(self) -> Distribution:
        return Distribution(self.marginals()[-1])

    def joint(self) -> np.ndarray:
        t = self.links[0].probs
        for c in self.links[1:]:
            t = t[..., None] * c.matrix.reshape((1,) * (t.ndim - 1) + c.matrix.shape)
        return t

    def to_json(self) -> dict:
        return {"cardinalities": list(self.cardinalities),
                "links": [self.links[0].probs.tolist()] + [c.matrix.tolist() for c in self.links[1:]]}

    @classmethod
    def from_json(cls, obj: dict) -> "AuxiliaryChain":
        try:
            return cls(tuple(obj["links"]))
        except (KeyError, TypeError) as exc:
            raise DimensionMismatch(f"bad chain object: {exc}") from None

    @classmethod
    def random(cls, cardinalities: Sequence[int], rng: np.random.Generator) -> "AuxiliaryChain":
        """Dirichlet(1) draw for every row of every link."""
        first = rng.dirichlet(np.ones(cardinalities[0]))
        links = [first]
        for a, b in zip(cardinalities, cardinalities[1:]):
            links.append(rng.dirichlet(np.ones(b), size=a))
        return cls(tuple(links))


def chain_to_joint(chain: AuxiliaryChain, bc: BroadcastWiretapChannel) -> Joint:
    """Full joint over (U_1, ..., U_{K-1}, X, Y_1, ..., Y_K, Z)."""
    if chain.cardinalities[-1] != bc.input_size:
        raise DimensionMismatch(
            f"chain input cardinality {chain.cardinalities[-1]} != channel input size {bc.input_size}")
    t = chain.joint()
    ch = bc.tensor()
    full = t.reshape(t.shape + (1,) * (ch.ndim - 1)) * ch.reshape((1,) * (t.ndim - 1) + ch.shape)
    aux = [f"U{i + 1}" for i in range(chain.depth - 1)]
    rec = [f"Y{k + 1}" for k in range(bc.num_receivers)]
    return Joint(full, tuple(aux + ["X"] + rec + [EAVESDROPPER]))


# ---------------------------------------------------------------------------
# JSON channel files


def channel_from_json(obj: dict) -> BroadcastWiretapChannel | ParallelChannel:
    """Parse the channel file format; parallel channels have a ``subchannels`` key."""
    if not isinstance(obj, dict):
        raise DimensionMismatch("channel file must contain a JSON object")
    if "subchannels" in obj:
        subs = []
        for i, s in enumerate(obj["subchannels"]):
            try:
                subs.append(channel_from_json(s))
            except NotStochastic as exc:
                raise NotStochastic(exc.row, exc.deviation, exc.column,
                                    f"sub-channel {i}: {exc}") from None
        return ParallelChannel(tuple(subs))
    try:
        return BroadcastWiretapChannel(int(obj["input_size"]), tuple(obj["receivers"]),
                                       int(obj["eavesdropper"]), obj["joint"])
    except KeyError as exc:
        raise DimensionMismatch(f"channel object missing key {exc}") from None


def load_channel(path) -> BroadcastWiretapChannel | ParallelChannel:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DimensionMismatch(f"{path}: invalid JSON ({exc})") from None
    return channel_from_json(obj)


def as_parallel(ch: BroadcastWiretapChannel | ParallelChannel) -> ParallelChannel:
    return ch if isinstance(ch, ParallelChannel) else ParallelChannel((ch,))
