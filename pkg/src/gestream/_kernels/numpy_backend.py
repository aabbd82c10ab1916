"""Pure-numpy implementation of the per-block trunk kernel.

This is the fallback used when the compiled extension is unavailable, and
the reference the extension is checked against.
"""

import numpy as np

NAME = "numpy"
LN_EPS = 1e-6


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def silu(x: np.ndarray) -> np.ndarray:
    return x * sigmoid(x)


def _layer_norm(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    return xc / np.sqrt(var + LN_EPS)


def block_forward(h, mods, mix_W, mix_b, ff1_W, ff1_b, ff2_W, ff2_b, inj=None):
    """One conditioned residual block.

    ``mods`` is (n, 6H): scale/shift/gate for the mixing sub-layer followed by
    scale/shift/gate for the feed-forward sub-layer.  ``inj``, when given, is
    an (n, H) residual added to the block output (control-branch injection).
    """
    H = h.shape[1]
    g1, b1, a1 = mods[:, 0:H], mods[:, H:2 * H], mods[:, 2 * H:3 * H]
    g2, b2, a2 = mods[:, 3 * H:4 * H], mods[:, 4 * H:5 * H], mods[:, 5 * H:6 * H]

    m1 = _layer_norm(h) * (1.0 + g1) + b1
    u = m1 @ mix_W + mix_b
    x = h + a1 * u

    m2 = _layer_norm(x) * (1.0 + g2) + b2
    v = silu(m2 @ ff1_W + ff1_b) @ ff2_W + ff2_b
    x = x + a2 * v
    if inj is not None:
        x = x + inj
    return x
