"""Pure-Python reference versions of the compiled kernels."""

import numpy as np

TOL_RATIO = 1e-12


def interval_collisions(sorted_samples, starts, ends):
    """Per interval [start, end]: sample count and number of colliding pairs."""
    s = np.asarray(sorted_samples, dtype=np.int64)
    starts = np.asarray(starts, dtype=np.int64)
    ends = np.asarray(ends, dtype=np.int64)
    left = np.searchsorted(s, starts, side="left")
    right = np.searchsorted(s, ends, side="right")
    counts = right - left
    pairs = np.zeros(starts.size, dtype=np.int64)
    for k in range(starts.size):
        if counts[k] > 1:
            _, c = np.unique(s[left[k]:right[k]], return_counts=True)
            pairs[k] = int((c * (c - 1) // 2).sum())
    return counts, pairs


def fixup_weights(w, r):
    """Leftmost-witness repair loop, in place on the float64 array w."""
    ell = w.shape[0]
    for _ in range(ell * ell + 1):
        i = -1
        for k in range(1, ell):
            if w[k] > r[k - 1] * w[k - 1] + TOL_RATIO:
                i = k
                break
        if i < 0:
            return w
        delta = 0.0
        cap = w[i]
        j = i - 1
        while j >= 0:
            cap = cap / r[j]
            if w[j] >= cap:
                break
            delta += cap - w[j]
            w[j] = cap
            j -= 1
        k = ell - 1
        while delta > 0 and k >= 0:
            take = min(delta, w[k])
            w[k] -= take
            delta -= take
            k -= 1
    raise RuntimeError("fixup did not converge")
