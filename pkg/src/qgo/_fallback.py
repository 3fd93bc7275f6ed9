"""Pure numpy implementations of the time-stepping kernels.

Same signatures and results as the compiled ``_kernels`` module; used when
the extension is unavailable or ``QGO_PURE_PYTHON=1``.
"""
import numpy as np


def _apply_h(psi, out, diag, A, bx, cy, hz, spins, n):
    # out = -i H psi
    d = A * diag
    if hz is not None:
        d = d + spins @ hz
    acc = d * psi
    acc_v = acc.reshape(-1)
    for i in range(n):
        v = psi.reshape(2**i, 2, 2 ** (n - i - 1))
        a = acc_v.reshape(2**i, 2, 2 ** (n - i - 1))
        a[:, 0, :] += complex(-bx[i], cy[i]) * v[:, 1, :]
        a[:, 1, :] += complex(-bx[i], -cy[i]) * v[:, 0, :]
    np.multiply(acc, -1j, out=out)


def rk4_statevector(psi, diag, spins, A, bx, cy, hz, dt, k_start, k_end):
    """Advance ``psi`` in place from step ``k_start`` to ``k_end``.

    Coefficient tables are sampled on the half-step grid: row ``2k`` is
    ``t_k``, row ``2k + 1`` is ``t_k + dt/2``.  ``hz`` may be ``None``.
    """
    n = bx.shape[1]
    k1 = np.empty_like(psi)
    k2 = np.empty_like(psi)
    k3 = np.empty_like(psi)
    k4 = np.empty_like(psi)
    for k in range(k_start, k_end):
        r0, r1, r2 = 2 * k, 2 * k + 1, 2 * k + 2
        h0 = None if hz is None else hz[r0]
        h1 = None if hz is None else hz[r1]
        h2 = None if hz is None else hz[r2]
        _apply_h(psi, k1, diag, A[r0], bx[r0], cy[r0], h0, spins, n)
        _apply_h(psi + (0.5 * dt) * k1, k2, diag, A[r1], bx[r1], cy[r1], h1, spins, n)
        _apply_h(psi + (0.5 * dt) * k2, k3, diag, A[r1], bx[r1], cy[r1], h1, spins, n)
        _apply_h(psi + dt * k3, k4, diag, A[r2], bx[r2], cy[r2], h2, spins, n)
        psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return psi


def _master_rhs(p, out, dE, beta, flip_index):
    # Metropolis rates: out-rate min(1, e^{-beta dE}), in-rate from the flipped state
    x = -beta * dE
    out_rate = np.exp(np.minimum(x, 0.0))
    in_rate = np.exp(np.minimum(-x, 0.0))
    inflow = (in_rate * p[flip_index]).sum(axis=1)
    outflow = out_rate.sum(axis=1) * p
    np.subtract(inflow, outflow, out=out)


def rk4_master(p, dE, flip_index, beta, dt, k_start, k_end):
    """Advance the probability vector ``p`` in place under the Metropolis master equation."""
    k1 = np.empty_like(p)
    k2 = np.empty_like(p)
    k3 = np.empty_like(p)
    k4 = np.empty_like(p)
    for k in range(k_start, k_end):
        b0, b1, b2 = beta[2 * k], beta[2 * k + 1], beta[2 * k + 2]
        _master_rhs(p, k1, dE, b0, flip_index)
        _master_rhs(p + (0.5 * dt) * k1, k2, dE, b1, flip_index)
        _master_rhs(p + (0.5 * dt) * k2, k3, dE, b1, flip_index)
        _master_rhs(p + dt * k3, k4, dE, b2, flip_index)
        p += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return p
