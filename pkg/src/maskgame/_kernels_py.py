"""Pure numpy implementations of the hot kernels.

Same signatures and results as the compiled ``_kernels`` module; used when the
extension is unavailable or ``MASKGAME_PURE_PYTHON`` is set.
"""

import numpy as np


def group_rows(rows):
    """Assign a group id to each distinct row, numbered by first appearance.

    Args:
      rows: 2-D int8 array (M, d).

    Returns:
      (inverse, first): ``inverse[i]`` is the group of row ``i``; ``first[g]`` is
      the index of the first row belonging to group ``g``.
    """
    rows = np.ascontiguousarray(rows, dtype=np.int8)
    M = rows.shape[0]
    if M == 0:
        return np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp)
    if rows.shape[1] == 0:
        return np.zeros(M, dtype=np.intp), np.zeros(1, dtype=np.intp)
    keys = rows.view(np.dtype((np.void, rows.shape[1]))).ravel()
    _, index, inverse = np.unique(keys, return_index=True, return_inverse=True)
    order = np.argsort(index, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse.ravel()].astype(np.intp), index[order].astype(np.intp)


def group_argmax(inverse, weights, n_groups):
    """Per-group column sums followed by a row argmax.

    Ties resolve to the smallest column index.

    Returns:
      (choice, best): int array (G,) and float array (G,).
    """
    weights = np.asarray(weights, dtype=np.float64)
    E = weights.shape[1]
    sums = np.zeros((n_groups, E))
    for e in range(E):
        sums[:, e] = np.bincount(inverse, weights=weights[:, e], minlength=n_groups)
    if E == 0:
        return np.zeros(n_groups, dtype=np.intp), np.zeros(n_groups)
    choice = sums.argmax(axis=1)
    return choice.astype(np.intp), sums[np.arange(n_groups), choice]


def match_table(X, allowed):
    """Exploit applicability for every row of ``X``.

    Args:
      X: int8 array (K, n) of single-device configurations.
      allowed: uint8 array (E, n, V + 2); ``allowed[e, i, x_i + 1]`` is 1 when
        value ``x_i`` satisfies exploit ``e`` at attribute ``i``.

    Returns:
      uint8 array (K, E).
    """
    X = np.asarray(X, dtype=np.int8)
    K = X.shape[0]
    E = allowed.shape[0]
    out = np.empty((K, E), dtype=np.uint8)
    idx = X.astype(np.intp) + 1
    for e in range(E):
        ok = np.ones(K, dtype=bool)
        for i in np.flatnonzero(~allowed[e].all(axis=1)):
            ok &= allowed[e, i][idx[:, i]].astype(bool)
        out[:, e] = ok
    return out
