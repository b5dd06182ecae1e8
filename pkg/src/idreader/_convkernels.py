"""Numba kernels for same-padded cross-correlation and its gradients.

Parallelism is over independent output slices only (batch items, or kernel
taps for the weight gradient), with fixed-order accumulation inside each
slice, so results are bit-reproducible run to run regardless of thread
count. Kernels are dtype-generic; float32 for training, float64 for
finite-difference checks.
"""

import numpy as np
from numba import njit, prange


@njit(parallel=True, cache=True)
def conv_fwd(xp, K, bias, out):
    """out[b,y,x,f] = bias[f] + sum over (dy,dx,c) of xp[b,y+dy,x+dx,c]*K[dy,dx,c,f]."""
    k = K.shape[0]
    C = K.shape[2]
    B, H, W, F = out.shape
    for b in prange(B):
        acc = np.empty(F, dtype=out.dtype)
        for y in range(H):
            for x in range(W):
                for f in range(F):
                    acc[f] = bias[f]
                for dy in range(k):
                    for dx in range(k):
                        for c in range(C):
                            v = xp[b, y + dy, x + dx, c]
                            for f in range(F):
                                acc[f] += v * K[dy, dx, c, f]
                for f in range(F):
                    out[b, y, x, f] = acc[f]
    return out


@njit(parallel=True, cache=True)
def conv_bwd_input(dout, K, dxp):
    """Accumulate the padded-input gradient; dxp must be zero-initialized."""
    k = K.shape[0]
    C = K.shape[2]
    B, H, W, F = dout.shape
    for b in prange(B):
        for y in range(H):
            for x in range(W):
                for dy in range(k):
                    for dx in range(k):
                        for c in range(C):
                            s = dxp[b, y + dy, x + dx, c]
                            for f in range(F):
                                s += dout[b, y, x, f] * K[dy, dx, c, f]
                            dxp[b, y + dy, x + dx, c] = s
    return dxp


@njit(parallel=True, cache=True)
def conv_bwd_kernel(xp, dout, dK):
    """dK[dy,dx,c,f] = sum over (b,y,x) of xp[b,y+dy,x+dx,c]*dout[b,y,x,f]."""
    k = dK.shape[0]
    C = dK.shape[2]
    F = dK.shape[3]
    B, H, W, _ = dout.shape
    for p in prange(k * k):
        dy = p // k
        dx = p % k
        acc = np.zeros((C, F), dtype=dK.dtype)
        for b in range(B):
            for y in range(H):
                for x in range(W):
                    for c in range(C):
                        v = xp[b, y + dy, x + dx, c]
                        for f in range(F):
                            acc[c, f] += v * dout[b, y, x, f]
        for c in range(C):
            for f in range(F):
                dK[dy, dx, c, f] = acc[c, f]
    return dK
