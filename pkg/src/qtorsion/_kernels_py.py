"""Vectorized numpy implementation of the P1 element kernels.

Used whenever the compiled ``_kernels`` extension is unavailable (or the
environment variable ``QTORSION_PURE_PYTHON`` is set).  The compiled module
exposes exactly the same functions.
"""

import numpy as np


def element_geometry(nodes, tris):
    """Signed areas and barycentric basis gradients, shape (Nt,) and (Nt, 3, 2)."""
    p0 = nodes[tris[:, 0]]
    d1 = nodes[tris[:, 1]] - p0
    d2 = nodes[tris[:, 2]] - p0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    grad = np.empty((len(tris), 3, 2))
    grad[:, 1, 0] = d2[:, 1] / det
    grad[:, 1, 1] = -d2[:, 0] / det
    grad[:, 2, 0] = -d1[:, 1] / det
    grad[:, 2, 1] = d1[:, 0] / det
    grad[:, 0] = -grad[:, 1] - grad[:, 2]
    return 0.5 * det, grad


def element_gradients(grad, tris, u):
    return np.einsum("tia,ti->ta", grad, u[tris])


def energy(area, g, q, eps):
    """``sum_T area (eps^2 + |g|^2)^(q/2) / q``."""
    s = eps * eps + np.einsum("ta,ta->t", g, g)
    return float(np.dot(area, s ** (0.5 * q)) / q)


def assemble(grad, area, g, tris, q, eps, entry_map, nnz, n_nodes, newton):
    """Linearized operator and gradient of the regularized energy.

    Returns ``(data, flux)``: ``data`` holds the matrix entries accumulated
    through ``entry_map`` (local (t, i, j) -> sparse slot, -1 to skip) and
    ``flux[i] = sum_T area w grad_i . g`` with ``w = (eps^2 + |g|^2)^((q-2)/2)``.
    With ``newton`` the element Hessian gets the rank-one term
    ``(q-2)(eps^2+|g|^2)^((q-4)/2) g g^T``; without it this is the
    lagged-diffusivity matrix.
    """
    s = eps * eps + np.einsum("ta,ta->t", g, g)
    if q == 2.0:
        w = np.ones_like(s)
    else:
        w = s ** (0.5 * (q - 2.0))
    Bg = np.einsum("tia,ta->ti", grad, g)
    K = np.einsum("tia,tja->tij", grad, grad) * w[:, None, None]
    if newton and q != 2.0:
        c = (q - 2.0) * w / s
        K += c[:, None, None] * Bg[:, :, None] * Bg[:, None, :]
    K *= area[:, None, None]
    mask = entry_map >= 0
    data = np.bincount(entry_map[mask], weights=K.reshape(len(tris), 9)[mask], minlength=nnz)
    flux = np.bincount(tris.ravel(), weights=(Bg * (area * w)[:, None]).ravel(),
                       minlength=n_nodes)
    return data, flux
