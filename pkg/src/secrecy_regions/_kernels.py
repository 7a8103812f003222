"""Hot loops of the code simulator, compiled with numba when available.

Set ``SECRECY_REGIONS_DISABLE_NUMBA=1`` to force the pure-numpy versions.
Both backends return identical arrays; the tests run each kernel through
both.  ``SECRECY_REGIONS_THREADS`` caps numba's worker count.
"""
from __future__ import annotations

import os

import numpy as np


def typical_mask_numpy(codes, msg, n_msgs, ys, cond, eps):
    """Which message indices have a codeword path conditionally typical with each y^n.

    ``codes[p]`` is the combined symbol sequence of path p (one symbol per
    tuple of decoded-layer letters), ``msg[p]`` its message index, ``ys[t]``
    the received sequence of trial t and ``cond[c, y] = p(y|c)``.  A path is
    typical when every count satisfies |N(c,y) - N(c) p(y|c)| <= eps * n and
    no pair with p(y|c) = 0 occurs.
    """
    T, n = ys.shape
    P = codes.shape[0]
    C, Y = cond.shape
    out = np.zeros((T, n_msgs), dtype=np.bool_)
    if P == 0 or T == 0:
        return out
    step = max(1, 4_000_000 // max(1, P * C * Y))
    base = (np.arange(P)[:, None] * (C * Y))
    for s in range(0, T, step):
        yb = ys[s:s + step]
        tb = len(yb)
        idx = base[None] + codes[None] * Y + yb[:, None, :]               # (tb, P, n)
        idx = idx + (np.arange(tb) * (P * C * Y))[:, None, None]
        N = np.bincount(idx.ravel(), minlength=tb * P * C * Y).reshape(tb, P, C, Y).astype(float)
        Nc = N.sum(axis=3, keepdims=True)
        ok = (np.abs(N - Nc * cond) <= eps * n + 1e-9).all(axis=(2, 3))
        ok &= ~((N > 0) & (cond == 0)).any(axis=(2, 3))
        tt, pp = np.nonzero(ok)
        out[s + tt, msg[pp]] = True
    return out


def likelihoods_numpy(codes, W):
    """P(z^n | path) for every path and every z^n (first letter most significant)."""
    P, n = codes.shape
    L = W[codes[:, 0]]
    for i in range(1, n):
        L = (L[:, :, None] * W[codes[:, i]][:, None, :]).reshape(P, -1)
    return L


def _build_numba():
    import numba

    if not os.environ.get("NUMBA_THREADING_LAYER"):
        numba.config.THREADING_LAYER = "workqueue"
    threads = os.environ.get("SECRECY_REGIONS_THREADS")
    if threads:
        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))

    @numba.njit(parallel=True, cache=True)
    def typical_mask(codes, msg, n_msgs, ys, cond, eps):
        T, n = ys.shape
        P = codes.shape[0]
        C, Y = cond.shape
        out = np.zeros((T, n_msgs), dtype=np.bool_)
        tol = eps * n + 1e-9
        for t in numba.prange(T):
            N = np.zeros((C, Y))
            Nc = np.zeros(C)
            for p in range(P):
                m = msg[p]
                if out[t, m]:
                    continue
                N[:, :] = 0.0
                Nc[:] = 0.0
                for i in range(n):
                    c = codes[p, i]
                    N[c, ys[t, i]] += 1.0
                    Nc[c] += 1.0
                ok = True
                for c in range(C):
                    for y in range(Y):
                        if cond[c, y] == 0.0 and N[c, y] > 0.0:
                            ok = False
                            break
                        if abs(N[c, y] - Nc[c] * cond[c, y]) > tol:
                            ok = False
                            break
                    if not ok:
                        break
                if ok:
                    out[t, m] = True
        return out

    @numba.njit(parallel=True, cache=True)
    def likelihoods(codes, W):
        P, n = codes.shape
        Z = W.shape[1]
        total = Z ** n
        L = np.empty((P, total))
        for p in numba.prange(P):
            for z in range(Z):
                L[p, z] = W[codes[p, 0], z]
            size = Z
            # expand one letter at a time, back to front so nothing is overwritten early
            for i in range(1, n):
                c = codes[p, i]
                for j in range(size - 1, -1, -1):
                    v = L[p, j]
                    for z in range(Z - 1, -1, -1):
                        L[p, j * Z + z] = v * W[c, z]
                size *= Z
        return L

    return typical_mask, likelihoods


def _select():
    if os.environ.get("SECRECY_REGIONS_DISABLE_NUMBA", "") not in ("", "0"):
        return "numpy", typical_mask_numpy, likelihoods_numpy
    try:
        tm, lk = _build_numba()
    except ImportError:
        return "numpy", typical_mask_numpy, likelihoods_numpy
    return "numba", tm, lk


BACKEND, _typical_mask, _likelihoods = _select()


def typical_mask(codes, msg, n_msgs, ys, cond, eps, backend: str | None = None):
    fn = typical_mask_numpy if (backend or BACKEND) == "numpy" else _typical_mask
    return fn(np.ascontiguousarray(codes, dtype=np.int64), np.ascontiguousarray(msg, dtype=np.int64),
              int(n_msgs), np.ascontiguousarray(ys, dtype=np.int64),
              np.ascontiguousarray(cond, dtype=np.float64), float(eps))


def likelihoods(codes, W, backend: str | None = None):
    fn = likelihoods_numpy if (backend or BACKEND) == "numpy" else _likelihoods
    return fn(np.ascontiguousarray(codes, dtype=np.int64), np.ascontiguousarray(W, dtype=np.float64))
