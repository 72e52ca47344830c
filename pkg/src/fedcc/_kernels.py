"""Token-game kernels over dense incidence arrays.

Markings are 1-d ``int32`` arrays indexed by place; ``pre``/``post`` are
``(n_transitions, n_places)`` ``int32`` arrays. Two interchangeable
implementations exist: numba-compiled loops and vectorised numpy. The numba
path is used when numba imports and ``FEDCC_NUMBA`` is not ``0``.
"""
import os

import numpy as np

try:
    import numba as nb
except ImportError:  # pragma: no cover - numba is a declared dependency
    nb = None

USE_NUMBA = nb is not None and os.environ.get("FEDCC_NUMBA", "1") != "0"


def _successors_numpy(marking, pre, post):
    enabled = np.flatnonzero(np.all(pre <= marking, axis=1))
    nxt = marking - pre[enabled] + post[enabled]
    return enabled.astype(np.int64), nxt.astype(np.int32)


def _enabled_numpy(marking, pre):
    return np.flatnonzero(np.all(pre <= marking, axis=1)).astype(np.int64)


def _fire_numpy(marking, pre, post, t):
    return (marking - pre[t] + post[t]).astype(np.int32)


if nb is not None:

    @nb.njit(cache=True)
    def _enabled_numba(marking, pre):
        n_t, n_p = pre.shape
        out = np.empty(n_t, dtype=np.int64)
        k = 0
        for t in range(n_t):
            ok = True
            for p in range(n_p):
                if pre[t, p] > marking[p]:
                    ok = False
                    break
            if ok:
                out[k] = t
                k += 1
        return out[:k]

    @nb.njit(cache=True)
    def _fire_numba(marking, pre, post, t):
        n_p = marking.shape[0]
        out = np.empty(n_p, dtype=np.int32)
        for p in range(n_p):
            out[p] = marking[p] - pre[t, p] + post[t, p]
        return out

    @nb.njit(cache=True)
    def _successors_numba(marking, pre, post):
        enabled = _enabled_numba(marking, pre)
        n_p = marking.shape[0]
        nxt = np.empty((enabled.shape[0], n_p), dtype=np.int32)
        for i in range(enabled.shape[0]):
            t = enabled[i]
            for p in range(n_p):
                nxt[i, p] = marking[p] - pre[t, p] + post[t, p]
        return enabled, nxt

else:  # pragma: no cover
    _enabled_numba = _enabled_numpy
    _fire_numba = _fire_numpy
    _successors_numba = _successors_numpy


def backend():
    return "numba" if USE_NUMBA else "numpy"


def enabled(marking, pre):
    """Indices of transitions whose preset is covered by ``marking``."""
    if USE_NUMBA:
        return _enabled_numba(marking, pre)
    return _enabled_numpy(marking, pre)


def fire(marking, pre, post, t):
    if USE_NUMBA:
        return _fire_numba(marking, pre, post, t)
    return _fire_numpy(marking, pre, post, t)


def successors(marking, pre, post):
    """Return ``(enabled_indices, next_markings)`` in one pass."""
    if USE_NUMBA:
        return _successors_numba(marking, pre, post)
    return _successors_numpy(marking, pre, post)


def warmup():
    """Trigger compilation (or cache load) of every kernel once."""
    m = np.zeros(1, dtype=np.int32)
    pre = np.zeros((1, 1), dtype=np.int32)
    enabled(m, pre)
    fire(m, pre, pre, 0)
    successors(m, pre, pre)


def set_backend(name):
    """Switch kernels at runtime (``"numba"`` or ``"numpy"``); used by the benchmark."""
    global USE_NUMBA
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and nb is None:  # pragma: no cover
        raise RuntimeError("numba is not installed")
    USE_NUMBA = name == "numba"
