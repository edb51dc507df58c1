from __future__ import annotations

import numpy as np

from ..topo_channel import Topology


def neighbor_sets(topology: Topology, lam: int) -> np.ndarray:
    """Row i lists agent i followed by its ``lam`` closest pairs.

    Closeness is the distance from pair j's transmitter to pair i's receiver,
    since that path carries the interference j can cause i. Ties go to the
    lower index. Returns an int array of shape (N, min(lam + 1, N)).
    """
    tx, rx = topology.d2d_tx_pos, topology.d2d_rx_pos
    N = len(tx)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    width = min(lam + 1, N)
    nb = np.empty((N, width), dtype=np.int64)
    for i in range(N):
        d = np.hypot(*(tx - rx[i]).T)
        others = [j for j in range(N) if j != i]
        others.sort(key=lambda j: (d[j], j))
        nb[i] = [i, *others[: width - 1]]
    return nb
