"""Central finite-difference gradient verification shared by test modules."""

import numpy as np

from mfpod.mflstm import sequence_loss, sequence_loss_grads, trainable_parameters


def finite_difference_worst_error(model, x, y, step=1e-6):
    """Largest relative gradient deviation over all trainable arrays.

    Perturbs every trainable scalar in place (restoring it afterwards) and
    compares the analytic backpropagation gradient against the symmetric
    difference quotient of the loss. Each parameter array is scored as
    ``max|analytic - fd| / max(scale)`` with the scale taken over the
    array's gradient, so a wrong derivative anywhere shows up at O(1) while
    float64 quotient noise (about eps * loss / step on components whose
    true gradient is tiny) stays orders of magnitude below the tolerance.
    """
    _, grads = sequence_loss_grads(model, x, y)
    worst = 0.0
    for name, arr in trainable_parameters(model):
        analytic = np.atleast_1d(grads[name]).reshape(-1)
        flat = arr.reshape(-1)
        fd = np.empty_like(analytic)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            plus = sequence_loss(model, x, y)
            flat[i] = orig - step
            minus = sequence_loss(model, x, y)
            flat[i] = orig
            fd[i] = (plus - minus) / (2.0 * step)
        scale = max(np.abs(analytic).max(), np.abs(fd).max(), 1e-10)
        worst = max(worst, float(np.abs(analytic - fd).max() / scale))
    return worst
