"""Pure numpy implementations of the propagation kernels.

These define the reference semantics; the compiled module must agree with
them to rounding error.
"""

import numpy as np


def split_step(psi, ua_stack, ua_index, phonon_half, wy, wq, eb, record_steps):
    """Strang split-step propagation of a cavity-matter x phonon state.

    ``psi`` has shape ``(d_usc, d_phonon)``. Step ``j`` applies
    ``U_j (x) P``, then ``exp(-i B dt)``, then ``U_j (x) P`` again, where
    ``U_j = ua_stack[ua_index[j]]`` is the cavity-matter half-step propagator,
    ``P = diag(phonon_half)`` the free phonon half step, and ``B = Y (x) Q``
    is applied in its ``(wy, wq)`` eigenbasis through the phases ``eb``.

    Returns snapshots of ``psi`` taken before the steps listed in
    ``record_steps`` (an index equal to ``len(ua_index)`` means the final
    state).
    """
    psi = np.array(psi, dtype=complex, copy=True)
    nsteps = len(ua_index)
    record_steps = np.asarray(record_steps, dtype=np.int64)
    out = np.empty((record_steps.size,) + psi.shape, dtype=complex)
    wyt, wqt = wy.T, wq.T
    r = 0
    for j in range(nsteps + 1):
        while r < record_steps.size and record_steps[r] == j:
            out[r] = psi
            r += 1
        if j == nsteps:
            break
        ua = ua_stack[ua_index[j]]
        psi = (ua @ psi) * phonon_half
        psi = wy @ (((wyt @ psi) @ wq) * eb) @ wqt
        psi = (ua @ psi) * phonon_half
    return out


def _lindblad_rhs(r, f, sq, dephase, sqsq, g_down, g_up):
    fc = np.conj(f)
    out = dephase * r
    comm = np.zeros_like(r)
    comm[:-1] += fc * sq[1:, None] * r[1:]
    comm[1:] += f * sq[1:, None] * r[:-1]
    comm[:, 1:] -= fc * r[:, :-1] * sq[None, 1:]
    comm[:, :-1] -= f * r[:, 1:] * sq[None, 1:]
    out -= 1j * comm
    if g_down:
        out[:-1, :-1] += g_down * sqsq * r[1:, 1:]
    if g_up:
        out[1:, 1:] += g_up * sqsq * r[:-1, :-1]
    return out


def dephase_matrix(n, g_down, g_up, g_deph):
    m = np.arange(n, dtype=float)
    bbd = m + 1.0
    bbd[-1] = 0.0
    return (-0.5 * g_deph * (m[:, None] - m[None, :]) ** 2
            - 0.5 * g_down * (m[:, None] + m[None, :])
            - 0.5 * g_up * (bbd[:, None] + bbd[None, :]))


def lindblad_rk4(rho, f_nodes, dt, g_down, g_up, g_deph):
    """Fixed-step RK4 for the driven, damped phonon in the interaction frame.

    ``d rho/dt = -i[f* b + f b^dag, rho] + g_down D[b] + g_up D[b^dag]
    + g_deph D[b^dag b]``, with the drive ``f`` sampled at the RK4 nodes:
    ``f_nodes[2j]`` at the start of step ``j`` and ``f_nodes[2j+1]`` at its
    midpoint. Returns the state after ``(len(f_nodes) - 1) // 2`` steps.
    """
    r = np.array(rho, dtype=complex, copy=True)
    n = r.shape[0]
    m = np.arange(n, dtype=float)
    sq = np.sqrt(m)
    sqsq = np.sqrt(np.outer(m[1:], m[1:]))
    dephase = dephase_matrix(n, g_down, g_up, g_deph)
    nsteps = (len(f_nodes) - 1) // 2
    args = (sq, dephase, sqsq, g_down, g_up)
    for j in range(nsteps):
        f0, f1, f2 = f_nodes[2 * j], f_nodes[2 * j + 1], f_nodes[2 * j + 2]
        k1 = _lindblad_rhs(r, f0, *args)
        k2 = _lindblad_rhs(r + 0.5 * dt * k1, f1, *args)
        k3 = _lindblad_rhs(r + 0.5 * dt * k2, f1, *args)
        k4 = _lindblad_rhs(r + dt * k3, f2, *args)
        r += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return r
