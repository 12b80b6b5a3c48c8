"""Connection, curvature, and torsion of a Hermitian metric field.

All tensors are ndarrays with grid axes first and index axes last.  The
index layout of every cached tensor is documented on its property.  A
*signature string* describes the index axes of an array, one character
per trailing axis:

    'u'  upper unbarred   (gains  +Gamma under the unbarred derivative)
    'l'  lower unbarred   (gains  -Gamma)
    'U'  upper barred     (gains  +conj(Gamma) under the barred derivative)
    'L'  lower barred     (gains  -conj(Gamma))

The unbarred covariant derivative corrects only 'u'/'l' slots and the
barred one only 'U'/'L' slots, which is the defining property of the
connection used here (the unique metric connection whose barred
derivative of any holomorphic frame vanishes).  New derivative indices
are prepended as the FIRST index axis, with signature 'l' or 'L'.

Index-first-barred convention: the metric array ``g[..., k, j]`` holds
the component with barred row k and unbarred column j, and the inverse
``ginv[..., p, a]`` holds the component with unbarred row p.
"""

from __future__ import annotations

import functools
import string

import numpy as np

from . import accel
from .errors import ValenceError
from .grid import SPECTRAL, TorusGrid
from .metrics import check_positive, volume_norm_sq

__all__ = ["ChernPackage", "relative_endomorphism", "relative_eigenvalues"]

_LETTERS = string.ascii_lowercase.replace("m", "").replace("p", "")


class ChernPackage:
    """Caches every derived tensor of one metric snapshot.

    Instances treat the metric array as immutable; build a new package
    after any update.  The derivative scheme is fixed per package so a
    single snapshot can be analyzed twice (spectrally and with finite
    differences) and the results compared.
    """

    def __init__(
        self,
        grid: TorusGrid,
        g: np.ndarray,
        scheme: str = SPECTRAL,
        volume_constant: complex = 1.0,
        validate: bool = True,
    ):
        expected = grid.shape + (grid.n, grid.n)
        if g.shape != expected:
            raise ValenceError(f"metric shape {g.shape}, expected {expected}")
        self.grid = grid
        self.g = np.asarray(g, dtype=complex)
        self.scheme = scheme
        self.volume_constant = complex(volume_constant)
        if validate:
            check_positive(self.g)

    # -- first layer: derivatives of the metric ------------------------------

    @functools.cached_property
    def ginv(self) -> np.ndarray:
        """Inverse metric, ``ginv[..., p, a]`` with p the unbarred row."""
        return np.linalg.inv(self.g)

    @functools.cached_property
    def dg(self) -> np.ndarray:
        """``dg[..., j, a, b]``: holomorphic derivative along j of g."""
        return self.grid.holomorphic_gradient(self.g, self.scheme)

    @functools.cached_property
    def gamma(self) -> np.ndarray:
        """Connection ``gamma[..., m, a, b]`` (upper a, lowers m and b)."""
        return accel.gamma_from_dg(self.ginv, self.dg)

    @functools.cached_property
    def curvature(self) -> np.ndarray:
        """``curv[..., k, j, a, b]``: minus the barred k-derivative of gamma."""
        return -self.grid.holomorphic_gradient(self.gamma, self.scheme, barred=True)

    @functools.cached_property
    def second_ricci(self) -> np.ndarray:
        """Both-lower contraction ``out[..., p, q]`` (p barred)."""
        return accel.second_ricci(self.g, self.ginv, self.curvature)

    @functools.cached_property
    def second_ricci_endo(self) -> np.ndarray:
        """Endomorphism form ``out[..., a, b]``: full trace of curvature."""
        return np.einsum("...jk,...kjab->...ab", self.ginv, self.curvature)

    @functools.cached_property
    def t_low(self) -> np.ndarray:
        """Torsion ``t_low[..., k, j, m]`` with the barred slot k lowered."""
        dg = self.dg
        return np.swapaxes(dg, -3, -2) - np.moveaxis(dg, (-3, -2, -1), (-1, -3, -2))

    @functools.cached_property
    def t_up(self) -> np.ndarray:
        """Torsion ``t_up[..., m, j, p]`` with the first slot raised."""
        return np.einsum("...mq,...qjp->...mjp", self.ginv, self.t_low)

    @functools.cached_property
    def tau(self) -> np.ndarray:
        """Torsion trace one-form ``tau[..., i]``."""
        return np.einsum("...ppi->...i", self.t_up)

    @functools.cached_property
    def ttbar(self) -> np.ndarray:
        """Hermitian square ``ttbar[..., k, j]`` of the torsion (k barred)."""
        return accel.ttbar_matrix(self.ginv, self.t_low)

    @functools.cached_property
    def t_norm_sq(self) -> np.ndarray:
        """Pointwise squared torsion norm (all free slots contracted)."""
        return np.einsum("...jk,...kj->...", self.ginv, self.ttbar).real

    @functools.cached_property
    def norm_sq(self) -> np.ndarray:
        """Squared volume-form norm at each node."""
        return volume_norm_sq(self.g, self.volume_constant)

    @functools.cached_property
    def log_norm(self) -> np.ndarray:
        """Dilaton: half the log of :attr:`norm_sq`."""
        return 0.5 * np.log(self.norm_sq)

    @functools.cached_property
    def chern_scalar(self) -> np.ndarray:
        """Scalar curvature as the metric trace of the log-volume Hessian."""
        return 2.0 * self.scalar_laplacian(self.log_norm.astype(complex)).real

    # -- covariant derivatives ------------------------------------------------

    def _check_signature(self, arr: np.ndarray, sig: str):
        if arr.ndim != self.grid.ndim_grid + len(sig):
            raise ValenceError(
                f"array rank {arr.ndim} does not match grid + signature '{sig}'"
            )
        if any(ch not in "ulUL" for ch in sig):
            raise ValenceError(f"bad signature '{sig}'")
        if len(sig) > len(_LETTERS):
            raise ValenceError("tensor rank too large")

    def covd(self, arr: np.ndarray, sig: str) -> np.ndarray:
        """Unbarred covariant derivative; result signature 'l' + sig."""
        return self._covd_impl(arr, sig, barred=False)

    def covd_bar(self, arr: np.ndarray, sig: str) -> np.ndarray:
        """Barred covariant derivative; result signature 'L' + sig."""
        return self._covd_impl(arr, sig, barred=True)

    def _covd_impl(self, arr: np.ndarray, sig: str, barred: bool) -> np.ndarray:
        self._check_signature(arr, sig)
        arr = np.asarray(arr, dtype=complex)
        out = self.grid.holomorphic_gradient(arr, self.scheme, barred=barred)
        gamma = np.conj(self.gamma) if barred else self.gamma
        touched = {"U", "L"} if barred else {"u", "l"}
        letters = _LETTERS[: len(sig)]
        for slot, ch in enumerate(sig):
            if ch not in touched:
                continue
            upper = ch in ("u", "U")
            arr_sub = letters[:slot] + "m" + letters[slot + 1:]
            out_sub = "p" + letters
            if upper:
                gamma_sub = "p" + letters[slot] + "m"
                term = np.einsum(
                    f"...{gamma_sub},...{arr_sub}->...{out_sub}", gamma, arr
                )
                out = out + term
            else:
                gamma_sub = "pm" + letters[slot]
                term = np.einsum(
                    f"...{gamma_sub},...{arr_sub}->...{out_sub}", gamma, arr
                )
                out = out - term
        return out

    def scalar_laplacian(self, f: np.ndarray) -> np.ndarray:
        """Metric trace of the mixed Hessian of a scalar field."""
        grad_bar = self.grid.holomorphic_gradient(
            np.asarray(f, dtype=complex), self.scheme, barred=True
        )
        hess = self.grid.holomorphic_gradient(grad_bar, self.scheme)
        return np.einsum("...pq,...pq->...", self.ginv, hess)

    def laplacian(self, arr: np.ndarray, sig: str) -> np.ndarray:
        """Rough Laplacian: unbarred after barred derivative, traced."""
        if not sig:
            return self.scalar_laplacian(arr)
        step = self.covd_bar(arr, sig)
        step = self.covd(step, "L" + sig)
        return np.einsum("...pq,...pq" + _LETTERS[: len(sig)] + "->..." + _LETTERS[: len(sig)], self.ginv, step)

    # -- quantities relative to a reference metric ----------------------------

    def connection_difference(self, reference: "ChernPackage") -> np.ndarray:
        """``a[..., m, a, b]``: this connection minus the reference one."""
        self.grid.require_same(reference.grid)
        return self.gamma - reference.gamma

    def endo_norm_sq(self, a: np.ndarray) -> np.ndarray:
        """Squared norm of an endomorphism-valued one-form ``a[..., m, x, y]``.

        Contracts the form slot with the inverse metric and the
        endomorphism slots with the metric pair, conjugating the second
        factor.
        """
        return np.einsum(
            "...mg,...ub,...la,...mbl,...gua->...",
            self.ginv,
            self.g,
            self.ginv,
            a,
            np.conj(a),
            optimize=True,
        ).real


def relative_endomorphism(g_ref: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``h[..., a, b]``: inverse reference metric times current metric."""
    return np.linalg.inv(g_ref) @ g


def relative_eigenvalues(g_ref: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Eigenvalues of the metric pencil, ascending along the last axis.

    Uses the Cholesky factor of the reference so the problem stays
    Hermitian: the eigenvalues of ``L^-1 g L^-H`` equal those of the
    relative endomorphism but eigvalsh sees an honest Hermitian matrix.
    """
    L = np.linalg.cholesky(g_ref)
    half = np.linalg.solve(L, g)
    full = np.linalg.solve(L, np.conj(np.swapaxes(half, -1, -2)))
    return np.linalg.eigvalsh(full)
