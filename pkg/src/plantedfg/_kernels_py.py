"""Pure numpy implementations of the hot kernels.

Used when the compiled extension is unavailable, and as the reference side
of the backend parity tests.  Tables are indexed row-major over ``[q]^k``
with coordinate 0 most significant.
"""
from __future__ import annotations

import numpy as np


def _product_weights(gammas: np.ndarray) -> np.ndarray:
    """Row-major outer products: (F, k, q) -> (F, q**k)."""
    F, k, q = gammas.shape
    w = np.ones((F, 1))
    for h in range(k):
        w = (w[:, :, None] * gammas[:, h, None, :]).reshape(F, -1)
    return w


def zf_batch(tables: np.ndarray, gammas: np.ndarray) -> np.ndarray:
    """Z_F for F independent (table, gamma-tuple) pairs."""
    tables = np.asarray(tables, dtype=np.float64)
    gammas = np.asarray(gammas, dtype=np.float64)
    if tables.shape[0] == 0:
        return np.zeros(0)
    return (tables * _product_weights(gammas)).sum(axis=1)


def messages_batch(tables: np.ndarray, hs: np.ndarray, gammas: np.ndarray) -> np.ndarray:
    """Cavity messages msg_f(s) = sum_tau 1{tau_h = s} psi_f(tau) prod_{h' != h} gamma_{f,h'}(tau_h')."""
    tables = np.asarray(tables, dtype=np.float64)
    gammas = np.asarray(gammas, dtype=np.float64)
    hs = np.asarray(hs, dtype=np.int64)
    F, k, q = gammas.shape
    out = np.empty((F, q))
    if F == 0:
        return out
    g = gammas.copy()
    g[np.arange(F), hs, :] = 1.0
    prod = tables * _product_weights(g)
    for h in range(k):
        sel = hs == h
        if sel.any():
            out[sel] = prod[sel].reshape(-1, q ** h, q, q ** (k - h - 1)).sum(axis=(1, 3))
    return out


def assignment_log_weights(n: int, q: int, wires: np.ndarray, log_tables: np.ndarray,
                           log_prior: np.ndarray) -> np.ndarray:
    """log(gamma*^n(sigma) psi_G(sigma)) for every sigma in [q]^n (row-major, variable 0 first)."""
    log_tables = np.asarray(log_tables, dtype=np.float64)
    wires = np.asarray(wires, dtype=np.int64)
    log_prior = np.asarray(log_prior, dtype=np.float64)
    size = q ** n
    digits = np.unravel_index(np.arange(size), (q,) * n) if n > 0 else ()
    out = np.zeros(size)
    for i in range(n):
        out += log_prior[digits[i]]
    for a in range(log_tables.shape[0]):
        idx = np.zeros(size, dtype=np.int64)
        for v in wires[a]:
            idx = idx * q + digits[v]
        out += log_tables[a][idx]
    return out
