"""Plot-ready exports of reachable sets."""

import csv
import io

import numpy as np

from .chain import BRSChain
from .grid import GridSpec, ValueGrid, boundary_nodes

BOUNDARY_HEADER = ["x1", "x2", "x3", "k"]


def chain_boundary(chain: BRSChain, grid: GridSpec, k, within_horizon=False):
    """Grid nodes on the boundary of BRS(k), shape ``(n, 3)``."""
    X = grid.points()
    inside = chain.contains(X, k, within_horizon)
    return X[boundary_nodes(inside)]


def grid_boundary(vg: ValueGrid):
    X = vg.grid.points()
    return X[boundary_nodes(vg.values <= 0.0)]


def boundary_csv(rows) -> str:
    """CSV text for ``[(k, points), ...]``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BOUNDARY_HEADER)
    for k, pts in rows:
        for p in np.atleast_2d(pts):
            if p.size:
                w.writerow([repr(float(v)) for v in p] + [int(k)])
    return buf.getvalue()
