"""Pure numpy versions of the compiled kernels in ``_core.pyx``.

Same signatures and semantics; used when the extension is not built or
when ``OKSELECT_PURE_PYTHON`` is set.
"""

import numpy as np


def expansion_predict(points, coefs, n, x, gamma):
    if n == 0:
        return 0.0
    diff = points[:n] - x
    sq = np.einsum("ij,ij->i", diff, diff)
    return float(coefs[:n] @ np.exp(-gamma * sq))


def gram_row(points, n, x, gamma, out):
    diff = points[:n] - x
    np.exp(-gamma * np.einsum("ij,ij->i", diff, diff), out=out[:n])


def rff_features(freqs, phases, x, scale, out):
    np.cos(freqs @ x + phases, out=out)
    out *= scale
