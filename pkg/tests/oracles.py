"""Independent reference implementations used as test oracles.

Everything here is written as literal, slow transcriptions of the
definitions — explicit loops, no shared code with the package — so a
bug in the library cannot hide in its own oracle.
"""

import numpy as np


def conv2d_flipped(image, weights, bias, padding="valid"):
    """Quadruple-loop flipped-kernel convolution of one (h, w, c) image.

    out[y, z, k] = b_k + sum_{u,v,ch} W[P-1-u, Q-1-v, C-1-ch, k]
                                      * V[y+u, z+v, ch]
    over the valid extent of the (optionally zero-padded) input.
    """
    img = np.asarray(image, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    p, q, c, k = w.shape
    if padding == "same":
        ph, pw = (p - 1) // 2, (q - 1) // 2
        img = np.pad(img, ((ph, ph), (pw, pw), (0, 0)))
    h, wd, _ = img.shape
    ho, wo = h - p + 1, wd - q + 1
    out = np.zeros((ho, wo, k))
    for y in range(ho):
        for z in range(wo):
            for kk in range(k):
                acc = b[kk]
                for u in range(p):
                    for v in range(q):
                        for ch in range(c):
                            acc += (
                                w[p - 1 - u, q - 1 - v, c - 1 - ch, kk]
                                * img[y + u, z + v, ch]
                            )
                out[y, z, kk] = acc
    return out


def cohen_kappa(confusion):
    """k = (p_A - p_E) / (1 - p_E) from explicit double loops."""
    mat = np.asarray(confusion, dtype=np.float64)
    n = mat.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += mat[i, j]
    agree = 0.0
    for i in range(n):
        agree += mat[i, i]
    p_a = agree / total
    p_e = 0.0
    for i in range(n):
        row = sum(mat[i, j] for j in range(n))
        col = sum(mat[j, i] for j in range(n))
        p_e += (row / total) * (col / total)
    return (p_a - p_e) / (1.0 - p_e)


def auc_mann_whitney(scores, labels):
    """Probability a positive outranks a negative; ties count one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos = s[y == 1]
    neg = s[y == 0]
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def ensemble_scores(uncertainties):
    """Direct transcription: E_l = (sum_k 1 / u_l^k) / K."""
    u = np.asarray(uncertainties, dtype=np.float64)  # (K, L)
    n_members, n_classes = u.shape
    scores = np.zeros(n_classes)
    for l in range(n_classes):
        acc = 0.0
        for k in range(n_members):
            acc += 1.0 / u[k, l]
        scores[l] = acc / n_members
    return scores


def attenuated_loss_mc(logits, log_var, label, n_draws, seed):
    """Monte Carlo estimate (mean, standard error) of the noise-averaged
    cross-entropy for ONE sample, with an explicit per-draw loop."""
    z = np.asarray(logits, dtype=np.float64)
    sigma = np.exp(0.5 * np.asarray(log_var, dtype=np.float64))
    rng = np.random.default_rng(seed)
    draws = np.empty(n_draws)
    for t in range(n_draws):
        corrupted = z + sigma * rng.standard_normal(z.shape)
        shifted = corrupted - corrupted.max()
        log_probs = shifted - np.log(np.exp(shifted).sum())
        draws[t] = -log_probs[label]
    return draws.mean(), draws.std(ddof=1) / np.sqrt(n_draws)


def numeric_gradient(f, x, step=1e-5):
    """Central finite differences of scalar f at array x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = f(x)
        flat[i] = orig - step
        lo = f(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def relative_error(analytic, numeric):
    """Max |a - n| / max(1, |a|, |n|) over all entries."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
    return float(np.max(np.abs(a - n) / denom))
