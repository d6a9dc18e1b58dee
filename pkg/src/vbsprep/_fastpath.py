"""Numba-compiled fused loss+gradient kernel for the 3-qubit recompiler.

The ansatz is decomposed into ``1 + 2*n_layers`` stages:

* stage 0: the initial U3 on each of the three qubits,
* stage 2k-1: the CX of layer k (control is always the middle qubit;
  odd layers target qubit 0, even layers qubit 2),
* stage 2k: the two U3s of layer k on the qubits the CX touched.

The loss 1 - Re tr(U^dag V)/8 and its central finite-difference gradient
share the stage prefix/suffix products: perturbing one angle only rebuilds
its own stage, so each gradient component costs one 8x8 trace instead of a
full circuit rebuild.  Matches the reference path in ``recompiler`` to
machine precision; tests enforce that.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _u3_into(out, theta, phi, lam):
    c = np.cos(theta * 0.5)
    s = np.sin(theta * 0.5)
    out[0, 0] = c
    out[0, 1] = -np.exp(1j * lam) * s
    out[1, 0] = np.exp(1j * phi) * s
    out[1, 1] = np.exp(1j * (phi + lam)) * c


@njit(cache=True, nogil=True)
def _kron3_into(out, a, b, c):
    # out[8,8] = a (x) b (x) c, each 2x2; qubit 0 is the MSB factor
    for i0 in range(2):
        for j0 in range(2):
            for i1 in range(2):
                for j1 in range(2):
                    ab = a[i0, j0] * b[i1, j1]
                    for i2 in range(2):
                        for j2 in range(2):
                            out[4 * i0 + 2 * i1 + i2, 4 * j0 + 2 * j1 + j2] = (
                                ab * c[i2, j2]
                            )


@njit(cache=True, nogil=True)
def _mm(out, a, b):
    for i in range(8):
        for j in range(8):
            acc = 0.0 + 0.0j
            for k in range(8):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc


@njit(cache=True, nogil=True)
def _tr_prod(a, b):
    # Tr(a @ b)
    acc = 0.0 + 0.0j
    for i in range(8):
        for k in range(8):
            acc += a[i, k] * b[k, i]
    return acc


@njit(cache=True, nogil=True)
def _build_stage(g, angles, s, cx10, cx12, eye2):
    a0 = np.empty((2, 2), dtype=np.complex128)
    a1 = np.empty((2, 2), dtype=np.complex128)
    a2 = np.empty((2, 2), dtype=np.complex128)
    if s == 0:
        _u3_into(a0, angles[0], angles[1], angles[2])
        _u3_into(a1, angles[3], angles[4], angles[5])
        _u3_into(a2, angles[6], angles[7], angles[8])
        _kron3_into(g, a0, a1, a2)
    elif s % 2 == 1:
        k = (s + 1) // 2
        if k % 2 == 1:
            g[:, :] = cx10
        else:
            g[:, :] = cx12
    else:
        k = s // 2
        off = 9 + 6 * (k - 1)
        if k % 2 == 1:
            _u3_into(a0, angles[off], angles[off + 1], angles[off + 2])
            _u3_into(a1, angles[off + 3], angles[off + 4], angles[off + 5])
            _kron3_into(g, a0, a1, eye2)
        else:
            _u3_into(a1, angles[off], angles[off + 1], angles[off + 2])
            _u3_into(a2, angles[off + 3], angles[off + 4], angles[off + 5])
            _kron3_into(g, eye2, a1, a2)


@njit(cache=True, nogil=True)
def loss_grad(angles, n_layers, target_dag, cx10, cx12, fd_step):
    """Loss 1 - Re tr(target_dag @ V)/8 and its central-FD gradient."""
    npar = 9 + 6 * n_layers
    ns = 1 + 2 * n_layers
    eye2 = np.eye(2, dtype=np.complex128)
    gs = np.empty((ns, 8, 8), dtype=np.complex128)
    for s in range(ns):
        _build_stage(gs[s], angles, s, cx10, cx12, eye2)
    # pre[s] = product of stages < s, suf[s] = product of stages > s
    pre = np.empty((ns + 1, 8, 8), dtype=np.complex128)
    pre[0] = np.eye(8, dtype=np.complex128)
    for s in range(ns):
        _mm(pre[s + 1], gs[s], pre[s])
    suf = np.empty((ns, 8, 8), dtype=np.complex128)
    acc = np.eye(8, dtype=np.complex128)
    for s in range(ns - 1, -1, -1):
        suf[s] = acc
        tmp = np.empty((8, 8), dtype=np.complex128)
        _mm(tmp, acc, gs[s])
        acc = tmp
    f = 1.0 - _tr_prod(target_dag, pre[ns]).real / 8.0
    grad = np.empty(npar, dtype=np.float64)
    w = np.empty((8, 8), dtype=np.complex128)
    tmp = np.empty((8, 8), dtype=np.complex128)
    gpert = np.empty((8, 8), dtype=np.complex128)
    ap = angles.copy()
    for s in range(ns):
        if s % 2 == 1:
            continue  # CX stages carry no parameters
        # tr(target_dag @ suf @ g @ pre) = tr(w @ g), w = pre @ target_dag @ suf
        _mm(tmp, pre[s], target_dag)
        _mm(w, tmp, suf[s])
        if s == 0:
            lo, hi = 0, 9
        else:
            k = s // 2
            lo, hi = 9 + 6 * (k - 1), 9 + 6 * k
        for j in range(lo, hi):
            aj = angles[j]
            ap[j] = aj + fd_step
            _build_stage(gpert, ap, s, cx10, cx12, eye2)
            fp = 1.0 - _tr_prod(w, gpert).real / 8.0
            ap[j] = aj - fd_step
            _build_stage(gpert, ap, s, cx10, cx12, eye2)
            fm = 1.0 - _tr_prod(w, gpert).real / 8.0
            ap[j] = aj
            grad[j] = (fp - fm) / (2.0 * fd_step)
    return f, grad
