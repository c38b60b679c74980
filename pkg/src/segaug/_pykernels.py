"""Pure-Python/numpy implementations of the DP kernels.

These mirror ``_ckernels.pyx`` operation for operation so both backends
produce bit-identical results.
"""

import numpy as np

NEG_INF = -np.inf


def viterbi_align(logprobs, tokens, blank):
    """Max-score monotonic alignment of ``tokens`` to ``logprobs``.

    Returns ``(score, states)`` where ``states[t]`` is the number of tokens
    consumed after frame ``t``. ``score`` is ``-inf`` when infeasible, in which
    case ``states`` is ``None``.
    """
    logprobs = np.ascontiguousarray(logprobs, dtype=np.float64)
    tokens = np.asarray(tokens, dtype=np.int64)
    n_frames = logprobs.shape[0]
    n_tok = tokens.shape[0]

    prev = np.full(n_tok + 1, NEG_INF)
    prev[0] = 0.0
    advance = np.zeros((n_frames, n_tok + 1), dtype=np.uint8)
    cur = np.empty_like(prev)
    for t in range(n_frames):
        row = logprobs[t]
        ub = row[blank]
        uc = row[tokens]
        cur[0] = prev[0] + ub
        if n_tok:
            stay = prev[1:] + np.maximum(ub, uc)
            adv = prev[:-1] + uc
            take = adv > stay
            cur[1:] = np.where(take, adv, stay)
            advance[t, 1:] = take
        prev, cur = cur, prev

    score = float(prev[n_tok])
    if score == NEG_INF:
        return score, None
    states = np.empty(n_frames, dtype=np.int64)
    j = n_tok
    for t in range(n_frames - 1, -1, -1):
        states[t] = j
        if j > 0 and advance[t, j]:
            j -= 1
    return score, states


def edit_rows(a, b, rows):
    """Unit-cost edit-distance table rows between token-id sequences.

    Returns an int64 array of shape ``(len(rows), len(b) + 1)`` where entry
    ``[r, k]`` is the distance between ``a[:rows[r]]`` and ``b[:k]``.
    """
    a = [int(x) for x in a]
    b = [int(x) for x in b]
    uniq, inverse = np.unique(np.asarray(rows, dtype=np.int64), return_inverse=True)
    if uniq.size and (uniq[0] < 0 or uniq[-1] > len(a)):
        raise ValueError(f"rows must lie in [0, {len(a)}]")
    wanted = {int(r): i for i, r in enumerate(uniq)}
    n = len(b)
    out = np.zeros((len(wanted), n + 1), dtype=np.int64)
    prev = list(range(n + 1))
    if 0 in wanted:
        out[wanted[0]] = prev
    for i in range(1, len(a) + 1):
        ai = a[i - 1]
        cur = [i] + [0] * n
        for k in range(1, n + 1):
            sub = prev[k - 1] + (ai != b[k - 1])
            dele = prev[k] + 1
            ins = cur[k - 1] + 1
            best = sub
            if dele < best:
                best = dele
            if ins < best:
                best = ins
            cur[k] = best
        prev = cur
        if i in wanted:
            out[wanted[i]] = cur
    return out[inverse.ravel()]
