"""Pure-numpy fallback for the compiled kernels.

Same signatures and semantics as ``_kernels.pyx``; used when the extension
is not built or when ``PRIVDIST_PURE=1`` is set.
"""

import numpy as np


def coord_value(xs, t, scale):
    return scale * float(np.abs(xs - t).mean())


def coord_value_batch(xs, ts, scale, out):
    np.mean(np.abs(xs[None, :] - ts[:, None]), axis=1, out=out)
    out *= scale


def coord_subgrad(xs, t, scale):
    return scale * float(np.sign(t - xs).mean())


def coord_subgrad_batch(xs, ts, scale, out):
    np.mean(np.sign(ts[:, None] - xs[None, :]), axis=1, out=out)
    out *= scale


def avg_l1(pts, y, scale):
    return scale * float(np.abs(pts - y).sum(axis=1).mean())


def avg_l2(pts, y, scale):
    return scale * float(np.sqrt(((pts - y) ** 2).sum(axis=1)).mean())


def pwl_eval(a, b, x):
    return float((a * x + b).max())


def pwl_eval_batch(a, b, xs, out):
    np.max(a[None, :] * xs[:, None] + b[None, :], axis=1, out=out)


def pwl_eval_coords(a_flat, b_flat, offsets, y, out):
    # Ragged max-of-lines per coordinate; vectorize per coordinate to keep
    # memory flat (line counts are small and uneven).
    for i in range(y.shape[0]):
        lo, hi = offsets[i], offsets[i + 1]
        out[i] = (a_flat[lo:hi] * y[i] + b_flat[lo:hi]).max()


def subset_min(dists, idx, offsets, fill, norm, out):
    for j in range(offsets.shape[0] - 1):
        lo, hi = offsets[j], offsets[j + 1]
        if hi == lo:
            out[:, j] = norm * fill
        else:
            out[:, j] = norm * dists[:, idx[lo:hi]].min(axis=1)
