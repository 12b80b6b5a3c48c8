"""Hermitian metric fields on the torus and their volume data.

A metric field is a grid of positive Hermitian matrices ``g[..., k, j]``
where the FIRST matrix index is the barred one.  The associated positive
(1,1)-form is ``i g[kbar,j] dz^j ^ dzbar^k``.

The holomorphic volume form on the torus is ``c dz^1 ^ ... ^ dz^n`` with
a constant ``c``; its pointwise norm against a metric g is

    norm_sq = |c|**2 / det g.

A metric is *balanced* when d(omega^{n-1}) = 0 and *conformally balanced*
when d(norm ||Omega||_g * omega^{n-1}) = 0.  The defect of the latter is
what the flow preserves and what :meth:`conformally_balanced_defect`
measures.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import GridError, HermiticityError, PositivityError
from .forms import DifferentialForm, matrix_to_one_one, wedge_power
from .grid import SPECTRAL, TorusGrid

__all__ = [
    "hermitize",
    "hermiticity_defect",
    "check_positive",
    "min_eigenvalue",
    "flat_metric",
    "balanced_band_metric",
    "kahler_from_potential",
    "random_band_metric",
    "fourier_scalar",
    "volume_norm_sq",
    "volume_norm",
    "omega_form",
    "conformally_balanced_defect",
    "torsion_trace_defect",
]

HERMITICITY_TOLERANCE = 1e-12


def hermitize(g: np.ndarray) -> np.ndarray:
    """Average a matrix field with its conjugate transpose."""
    return 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))


def hermiticity_defect(g: np.ndarray) -> float:
    return float(np.abs(g - np.conj(np.swapaxes(g, -1, -2))).max())


def min_eigenvalue(g: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(g).min())


def check_positive(g: np.ndarray, floor: float = 0.0) -> float:
    """Validate Hermiticity and positivity; returns the minimum eigenvalue."""
    defect = hermiticity_defect(g)
    if defect > HERMITICITY_TOLERANCE:
        raise HermiticityError(f"matrix field deviates from Hermitian by {defect:.3e}")
    low = min_eigenvalue(g)
    if low <= floor:
        raise PositivityError(
            f"metric loses positivity: min eigenvalue {low:.3e}", min_eigenvalue=low
        )
    return low


# -- constructors -------------------------------------------------------------


def flat_metric(grid: TorusGrid) -> np.ndarray:
    g = np.zeros(grid.shape + (grid.n, grid.n), dtype=complex)
    for j in range(grid.n):
        g[..., j, j] = 1.0
    return g


def fourier_scalar(grid: TorusGrid, terms) -> np.ndarray:
    """Real scalar field from a list of Fourier terms.

    Each term is ``[k.., re, im]``: one integer per active real axis
    followed by the real and imaginary part of the coefficient ``a``.  The
    field gains ``Re(a * exp(2 pi i k.u))`` where ``u`` are the active
    coordinates.  Terms use the same axis order as ``grid.active_axes``.
    """
    out = np.zeros(grid.shape, dtype=float)
    m = len(grid.active_axes)
    for term in terms:
        if len(term) != m + 2:
            raise GridError(
                f"fourier term needs {m} wave numbers + 2 coefficient parts: {term}"
            )
        ks, (re, im) = term[:m], term[m:]
        phase = np.zeros(grid.shape, dtype=float)
        for k_int, axis in zip(ks, grid.active_axes):
            coord = grid.coordinate(axis)
            phase = phase + 2.0 * np.pi * float(k_int) * coord
        a = complex(re, im)
        out = out + (a * np.exp(1j * phase)).real
    return out


def balanced_band_metric(grid: TorusGrid, f: np.ndarray, stretch: float = 1.0) -> np.ndarray:
    """Anisotropic conformally balanced family driven by one scalar f.

    ``g = diag(stretch**2 * exp(2 f), exp(f), ..., exp(f))`` is exactly
    conformally balanced for any f because
    ``norm * omega^{n-1}`` has constant coefficients along the stretched
    direction block.  With n = 3 this is the closed-form family used by
    the stationarity and preservation checks.
    """
    n = grid.n
    g = np.zeros(grid.shape + (n, n), dtype=complex)
    g[..., 0, 0] = (stretch ** 2) * np.exp(2.0 * f)
    for j in range(1, n):
        g[..., j, j] = np.exp(f)
    return g


def kahler_from_potential(grid: TorusGrid, phi: np.ndarray, scheme: str = SPECTRAL) -> np.ndarray:
    """Metric ``g[kbar,j] = delta + d_j d_kbar phi`` from a real potential."""
    n = grid.n
    g = flat_metric(grid)
    phi_c = np.asarray(phi, dtype=complex)
    for k in range(n):
        row = grid.holomorphic_gradient(
            grid.complex_derivative_bar(phi_c, k, scheme), scheme
        )
        for j in range(n):
            g[..., k, j] = g[..., k, j] + row[..., j]
    return hermitize(g)


def random_band_metric(
    grid: TorusGrid,
    seed: int,
    amplitude: float = 0.05,
    kmax: int = 1,
) -> np.ndarray:
    """Random analytic positive metric ``g = exp(H)`` with band-limited H.

    The Hermitian exponent is a sum over integer wave vectors with entries
    in ``[-kmax, kmax]`` of smooth real oscillations times fixed random
    Hermitian matrices, rescaled so an analytic bound on the spectral
    norm of H equals ``amplitude`` (the realized sup is a little below).
    Drawing and scaling are resolution independent: the same seed samples
    the same analytic field on every grid, which is what lets refinement
    studies compare residuals of one field at two resolutions.
    """
    if not (0.0 < amplitude <= 0.3):
        raise PositivityError(
            f"amplitude {amplitude} outside (0, 0.3]; large exponents risk"
            " aliasing and loss of positivity"
        )
    rng = np.random.default_rng(seed)
    n = grid.n
    m = len(grid.active_axes)
    H = np.zeros(grid.shape + (n, n), dtype=complex)

    # half-space of wave vectors so each mode appears once
    waves = []
    for kvec in itertools.product(range(-kmax, kmax + 1), repeat=m):
        if all(c == 0 for c in kvec):
            continue
        first = next(c for c in kvec if c != 0)
        if first > 0:
            waves.append(kvec)

    bound = 0.0
    for kvec in waves:
        phase = np.zeros(grid.shape, dtype=float)
        for k_int, axis in zip(kvec, grid.active_axes):
            phase = phase + 2.0 * np.pi * k_int * grid.coordinate(axis)
        pair_norms = []
        for osc in (np.cos(phase), np.sin(phase)):
            raw = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            herm = 0.5 * (raw + np.conj(raw.T))
            H = H + osc[..., None, None] * herm
            pair_norms.append(np.linalg.norm(herm, ord=2))
        # cos*A + sin*B never exceeds hypot(|A|, |B|) in spectral norm
        bound += float(np.hypot(*pair_norms))

    if bound > 0:
        H = H * (amplitude / bound)

    vals, vecs = np.linalg.eigh(H)
    g = np.einsum("...ab,...b,...cb->...ac", vecs, np.exp(vals), np.conj(vecs))
    return hermitize(g)


# -- volume data --------------------------------------------------------------


def volume_norm_sq(g: np.ndarray, c: complex = 1.0) -> np.ndarray:
    """Pointwise squared norm of the holomorphic volume form."""
    det = np.linalg.det(g)
    if np.any(det.real <= 0.0) or np.any(np.abs(det.imag) > 1e-8 * np.abs(det.real)):
        raise PositivityError("determinant not positive; metric invalid")
    return (abs(c) ** 2) / det.real


def volume_norm(g: np.ndarray, c: complex = 1.0) -> np.ndarray:
    return np.sqrt(volume_norm_sq(g, c))


def omega_form(grid: TorusGrid, g: np.ndarray) -> DifferentialForm:
    """The positive (1,1)-form of a metric field."""
    return matrix_to_one_one(grid, g)


def conformally_balanced_defect(
    grid: TorusGrid, g: np.ndarray, c: complex = 1.0, scheme: str = SPECTRAL
) -> float:
    """Max norm of d( ||Omega||_g  omega^{n-1} ) over the grid.

    Zero exactly when the metric satisfies the conformally balanced
    condition the flow preserves.
    """
    u = volume_norm(g, c)
    omega = omega_form(grid, g)
    anchor = wedge_power(omega, grid.n - 1) * u.astype(complex)
    return anchor.exterior_d_max_abs(scheme)


def torsion_trace_defect(grid: TorusGrid, g: np.ndarray, c: complex = 1.0, scheme: str = SPECTRAL):
    """Max norm of tau_j - d_j log ||Omega||_g over grid and directions.

    The conformally balanced condition forces the torsion trace to equal
    the holomorphic gradient of the dilaton; this measures that equality
    directly from first derivatives of the metric.
    """
    n = grid.n
    ginv = np.linalg.inv(g)
    dlog = grid.holomorphic_gradient(np.log(volume_norm_sq(g, c)).astype(complex), scheme) * 0.5

    dg = np.stack(
        [grid.complex_derivative(g, j, scheme) for j in range(n)], axis=g.ndim - 2
    )
    # tau_i = T^p_{p i} with T^m_{jp} = g^{m qbar}(d_j g_{qbar p} - d_p g_{qbar j});
    # dg[..., j, q, p] holds d_j g_{qbar p}
    t_up = np.einsum("...mq,...jqp->...jmp", ginv, dg) - np.einsum(
        "...mq,...pqj->...jmp", ginv, dg
    )
    tau = np.einsum("...ppi->...i", t_up)
    return float(np.abs(tau - dlog).max())
