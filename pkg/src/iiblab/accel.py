"""Hot contraction kernels with a numba fast path and a numpy fallback.

Three contractions dominate the cost of a flow step: building the
connection from metric derivatives, the second Ricci contraction of the
curvature, and the torsion square.  Each exists in two forms:

* ``*_numpy``: one readable einsum, always available;
* ``*_numba``: an explicit loop nest compiled with ``@njit``.

The public names (:func:`gamma_from_dg`, :func:`second_ricci`,
:func:`ttbar_matrix`) dispatch to whichever path is active.  The fallback
is selected when the environment variable ``IIBLAB_DISABLE_NUMBA`` is set
to anything but ``0``/``false``/empty, or when numba is not importable.
``IIBLAB_THREADS`` caps the numba thread count.

Array layout (grid axes first, matrix axes last, barred index first):

* ``ginv[..., p, a]``   inverse metric, row p unbarred;
* ``dg[..., j, a, b]``  holomorphic derivative along j of the metric;
* ``gamma[..., j, p, q]`` connection coefficients;
* ``curv[..., k, j, a, b]`` curvature endomorphism (k barred derivative);
* ``t_low[..., k, j, m]`` torsion with the barred slot lowered.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "NUMBA_ACTIVE",
    "gamma_from_dg",
    "second_ricci",
    "ttbar_matrix",
    "gamma_from_dg_numpy",
    "second_ricci_numpy",
    "ttbar_matrix_numpy",
]


def _env_flag(name: str) -> bool:
    raw = os.environ.get(name, "").strip().lower()
    return raw not in ("", "0", "false", "no")


NUMBA_ACTIVE = False
if not _env_flag("IIBLAB_DISABLE_NUMBA"):
    try:
        import numba

        threads = os.environ.get("IIBLAB_THREADS", "").strip()
        if threads:
            numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
        NUMBA_ACTIVE = True
    except ImportError:
        NUMBA_ACTIVE = False


# -- numpy reference path -----------------------------------------------------


def gamma_from_dg_numpy(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    return np.einsum("...pa,...jaq->...jpq", ginv, dg)


def second_ricci_numpy(g: np.ndarray, ginv: np.ndarray, curv: np.ndarray) -> np.ndarray:
    return np.einsum("...pl,...jk,...kjlq->...pq", g, ginv, curv, optimize=True)


def ttbar_matrix_numpy(ginv: np.ndarray, t_low: np.ndarray) -> np.ndarray:
    return np.einsum(
        "...kpq,...jab,...pa,...qb->...kj",
        t_low,
        np.conj(t_low),
        ginv,
        ginv,
        optimize=True,
    )


# -- numba fast path ----------------------------------------------------------

if NUMBA_ACTIVE:

    @numba.njit(cache=True)
    def _gamma_kernel(ginv, dg, out):  # pragma: no cover - exercised via wrapper
        m_nodes, n = ginv.shape[0], ginv.shape[1]
        for m in range(m_nodes):
            for j in range(n):
                for p in range(n):
                    for q in range(n):
                        acc = 0.0 + 0.0j
                        for a in range(n):
                            acc += ginv[m, p, a] * dg[m, j, a, q]
                        out[m, j, p, q] = acc

    @numba.njit(cache=True)
    def _second_ricci_kernel(g, ginv, curv, out):  # pragma: no cover
        m_nodes, n = g.shape[0], g.shape[1]
        for m in range(m_nodes):
            for p in range(n):
                for q in range(n):
                    acc = 0.0 + 0.0j
                    for l in range(n):
                        for j in range(n):
                            for k in range(n):
                                acc += g[m, p, l] * ginv[m, j, k] * curv[m, k, j, l, q]
                    out[m, p, q] = acc

    @numba.njit(cache=True)
    def _ttbar_kernel(ginv, t_low, out):  # pragma: no cover
        m_nodes, n = ginv.shape[0], ginv.shape[1]
        for m in range(m_nodes):
            for k in range(n):
                for j in range(n):
                    acc = 0.0 + 0.0j
                    for p in range(n):
                        for a in range(n):
                            for q in range(n):
                                for b in range(n):
                                    acc += (
                                        t_low[m, k, p, q]
                                        * np.conj(t_low[m, j, a, b])
                                        * ginv[m, p, a]
                                        * ginv[m, q, b]
                                    )
                    out[m, k, j] = acc


def _flatten_nodes(arr: np.ndarray, index_rank: int) -> tuple[np.ndarray, tuple]:
    grid_shape = arr.shape[: arr.ndim - index_rank]
    flat = np.ascontiguousarray(arr).reshape((-1,) + arr.shape[arr.ndim - index_rank:])
    return flat, grid_shape


def gamma_from_dg(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Connection ``gamma[..., j, p, q]`` from inverse metric and dg."""
    if not NUMBA_ACTIVE:
        return gamma_from_dg_numpy(ginv, dg)
    flat_ginv, grid_shape = _flatten_nodes(ginv, 2)
    flat_dg, _ = _flatten_nodes(dg, 3)
    out = np.empty_like(flat_dg)
    _gamma_kernel(flat_ginv, flat_dg, out)
    return out.reshape(grid_shape + dg.shape[dg.ndim - 3:])


def second_ricci(g: np.ndarray, ginv: np.ndarray, curv: np.ndarray) -> np.ndarray:
    """Second Ricci contraction ``out[..., p, q]`` (p barred)."""
    if not NUMBA_ACTIVE:
        return second_ricci_numpy(g, ginv, curv)
    flat_g, grid_shape = _flatten_nodes(g, 2)
    flat_ginv, _ = _flatten_nodes(ginv, 2)
    flat_curv, _ = _flatten_nodes(curv, 4)
    out = np.empty_like(flat_g)
    _second_ricci_kernel(flat_g, flat_ginv, flat_curv, out)
    return out.reshape(grid_shape + g.shape[g.ndim - 2:])


def ttbar_matrix(ginv: np.ndarray, t_low: np.ndarray) -> np.ndarray:
    """Hermitian torsion square ``out[..., k, j]`` (k barred)."""
    if not NUMBA_ACTIVE:
        return ttbar_matrix_numpy(ginv, t_low)
    flat_ginv, grid_shape = _flatten_nodes(ginv, 2)
    flat_t, _ = _flatten_nodes(t_low, 3)
    out = np.empty_like(flat_ginv)
    _ttbar_kernel(flat_ginv, flat_t, out)
    return out.reshape(grid_shape + ginv.shape[ginv.ndim - 2:])
