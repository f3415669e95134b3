"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(master seed, replication,
slot, label)``. Labels are fixed small integers so that, e.g., the noise of
replication 17 can be regenerated without touching the path stream.
"""

import numpy as np

LABELS = {
    "path": 1,
    "times": 2,
    "noise": 3,
    "limit": 4,
    "reference": 5,
    "counterexample": 6,
}


def stream(seed, label="path", rep=0, slot=0):
    """Return an independent ``numpy.random.Generator``.

    Parameters
    ----------
    seed : int
        Master seed (non-negative).
    label : str
        One of ``LABELS``.
    rep, slot : int
        Replication index and an extra slot (e.g. position in a Delta grid).
    """
    if label not in LABELS:
        raise KeyError(f"unknown stream label {label!r}")
    ss = np.random.SeedSequence([int(seed), int(rep), int(slot), LABELS[label]])
    return np.random.Generator(np.random.Philox(ss))
