"""Ordinal states as root-to-leaf paths of a binary search tree.

A state ``y`` of a ``K``-state ordinal variable is located in a complete
binary tree of depth ``n = ceil(log2(K))``. The path is the binary
decomposition of ``y``, most significant bit first: bit ``i`` (1-based) is
``floor(y / 2**(n - i)) mod 2``. Leaves ``K .. 2**n - 1`` are padding.
"""

import warnings

import numpy as np

from .errors import (
    DegenerateDistributionWarning,
    InvalidCodeError,
    InvalidStateCountError,
    InvalidStateError,
    ShapeError,
)

# below this the retained mass is treated as having underflowed
MIN_RETAINED_MASS = 1e-300


def tree_depth(k_states):
    """Smallest ``n`` with ``2**n >= k_states``."""
    k_states = int(k_states)
    if k_states < 2:
        raise InvalidStateCountError(
            f"an ordinal variable needs at least 2 states, got {k_states}")
    return (k_states - 1).bit_length()


def encode_state(y, n_bits):
    """Decision path of state ``y`` in a depth-``n_bits`` tree.

    Returns a tuple of ints in {0, 1}, most significant bit first.
    """
    y = int(y)
    n_bits = int(n_bits)
    if n_bits < 1:
        raise InvalidCodeError(f"bit count must be >= 1, got {n_bits}")
    if not 0 <= y < 2 ** n_bits:
        raise InvalidStateError(
            f"state {y} outside [0, {2 ** n_bits - 1}] for a depth-{n_bits} tree")
    return tuple((y >> (n_bits - i)) & 1 for i in range(1, n_bits + 1))


def decode_bits(code):
    """Inverse of :func:`encode_state`."""
    code = tuple(code)
    if not code:
        raise InvalidCodeError("empty bit code")
    y = 0
    for b in code:
        if b not in (0, 1):
            raise InvalidCodeError(f"bit code entries must be 0 or 1, got {b!r}")
        y = (y << 1) | int(b)
    return y


def encode_states(labels, n_bits):
    """Vectorized :func:`encode_state`; returns an ``(N, n_bits)`` int array."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= 2 ** n_bits):
        raise InvalidStateError(
            f"labels must lie in [0, {2 ** n_bits - 1}] for a depth-{n_bits} tree")
    shifts = np.arange(n_bits - 1, -1, -1)
    return (labels[:, None] >> shifts[None, :]) & 1


def truncate_renormalize(dist, k_states):
    """Zero the padding leaves and rescale the first ``k_states`` to sum to 1.

    Accepts a single leaf distribution of length ``2**n`` or a 2-D batch with
    one distribution per row. If the retained mass of a row underflows, that
    row becomes uniform over ``k_states`` and a
    :class:`DegenerateDistributionWarning` is emitted.
    """
    dist = np.asarray(dist, dtype=np.float64)
    single = dist.ndim == 1
    rows = np.atleast_2d(dist)
    n_leaves = rows.shape[1]
    if n_leaves & (n_leaves - 1) or n_leaves < 2:
        raise ShapeError(f"leaf distribution length {n_leaves} is not a power of two >= 2")
    if not 2 <= k_states <= n_leaves:
        raise InvalidStateCountError(
            f"k_states={k_states} incompatible with {n_leaves} leaves")
    kept = rows[:, :k_states]
    mass = kept.sum(axis=1)
    degenerate = mass < MIN_RETAINED_MASS
    out = np.empty_like(kept)
    ok = ~degenerate
    out[ok] = kept[ok] / mass[ok, None]
    if degenerate.any():
        warnings.warn(
            f"{int(degenerate.sum())} distribution(s) had no retained mass; "
            "falling back to uniform", DegenerateDistributionWarning, stacklevel=2)
        out[degenerate] = 1.0 / k_states
    return out[0] if single else out
