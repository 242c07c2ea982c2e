"""Gradient-weighted graph construction and shortest-path layer extraction.

Every pixel of a working image is a graph node connected to its eight
nearest neighbours.  One synthetic column is appended on each side of the
image; every edge incident to a synthetic column carries the minimum weight
so the path can enter and leave the image at any row.  The start node is the
top-left corner of the grid and the end node the bottom-right corner, so a
shortest path is forced to cross the full image width.

Edge weights derive from the normalized vertical gradient of the image.  The
default form is ``w = 2 - (g_a + g_b) + w_min``: strong matching transitions
make edges cheap, so the minimum-cost path traces the most prominent boundary
of the requested polarity.  The literal difference form
``w = 2 - (g_a - g_b) + w_min`` is selectable for comparison runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .config import WEIGHT_FORM_SUM
from .errors import SearchRegionDisconnected

W_MIN = 1e-5

DARK_TO_LIGHT = "dark-to-light"
LIGHT_TO_DARK = "light-to-dark"

# relative (row, col) offsets of the 8-neighbourhood
_NEIGHBOR_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class GradientField:
    """Normalized vertical-gradient image in [0, 1] with its polarity."""

    values: np.ndarray
    polarity: str

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class WeightGraph:
    """Sparse 8-neighbour graph over an H x (W + 2) node grid.

    Nodes are numbered row-major over the grid, columns 0 and W + 1 being
    the synthetic endpoint columns.  Edges are stored as directed pairs
    sorted by (src, dst); absent pairs are unconnected.  Zero weights are
    never stored: every weight lies in [w_min, 2 + w_min] for the sum form.
    """

    height: int
    width: int  # real image columns, grid has width + 2
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_weight: np.ndarray
    w_min: float = W_MIN

    @property
    def grid_width(self) -> int:
        return self.width + 2

    @property
    def n_nodes(self) -> int:
        return self.height * self.grid_width

    @property
    def start(self) -> int:
        return 0

    @property
    def end(self) -> int:
        return self.n_nodes - 1


@dataclass(frozen=True)
class LayerPath:
    """Start-to-end node sequence; rows/cols are grid coordinates."""

    rows: np.ndarray
    cols: np.ndarray
    cost: float
    height: int
    grid_width: int


def vertical_gradient(img: np.ndarray, polarity: str) -> GradientField:
    """Central-difference vertical gradient, min-max normalized to [0, 1].

    Borders are replicated.  The light-to-dark field is computed as one
    minus the dark-to-light field, which makes the duality exact.  Images
    with a constant gradient response map to the all-0.5 field.
    """
    if polarity not in (DARK_TO_LIGHT, LIGHT_TO_DARK):
        raise ValueError(f"unknown polarity {polarity!r}")
    img = np.asarray(img, dtype=np.float64)
    padded = np.pad(img, ((1, 1), (0, 0)), mode="edge")
    g = (padded[2:] - padded[:-2]) / 2.0
    lo = g.min()
    hi = g.max()
    if hi == lo:
        values = np.full(img.shape, 0.5)
    else:
        values = (g - lo) / (hi - lo)
    if polarity == LIGHT_TO_DARK:
        values = 1.0 - values
    return GradientField(values=values, polarity=polarity)


@lru_cache(maxsize=16)
def _grid_topology(height: int, grid_width: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Directed 8-neighbour edge list of an H x grid_width grid, sorted by
    (src, dst), plus a mask of edges touching the two outer columns."""
    idx = np.arange(height * grid_width, dtype=np.int64).reshape(height, grid_width)
    srcs = []
    dsts = []
    for dr, dc in _NEIGHBOR_OFFSETS:
        r0, r1 = max(0, -dr), min(height, height - dr)
        c0, c1 = max(0, -dc), min(grid_width, grid_width - dc)
        srcs.append(idx[r0:r1, c0:c1].ravel())
        dsts.append(idx[r0 + dr:r1 + dr, c0 + dc:c1 + dc].ravel())
    src = np.concatenate(srcs)
    dst = np.concatenate(dsts)
    order = np.lexsort((dst, src))
    src = src[order]
    dst = dst[order]
    src_col = src % grid_width
    dst_col = dst % grid_width
    last = grid_width - 1
    synthetic = (src_col == 0) | (src_col == last) | (dst_col == 0) | (dst_col == last)
    for arr in (src, dst, synthetic):
        arr.setflags(write=False)
    return src, dst, synthetic


def build_weights(grad: GradientField, w_min: float = W_MIN,
                  form: str = WEIGHT_FORM_SUM) -> WeightGraph:
    """Weight graph for a gradient field, synthetic endpoint columns included.

    Every edge with an endpoint in a synthetic column gets exactly w_min.
    """
    values = grad.values
    height, width = values.shape
    grid_width = width + 2
    src, dst, synthetic = _grid_topology(height, grid_width)
    gfull = np.zeros((height, grid_width))
    gfull[:, 1:-1] = values
    flat = gfull.ravel()
    if form == WEIGHT_FORM_SUM:
        w = 2.0 - (flat[src] + flat[dst]) + w_min
    else:
        w = 2.0 - (flat[src] - flat[dst]) + w_min
    w[synthetic] = w_min
    return WeightGraph(height=height, width=width, edge_src=src, edge_dst=dst,
                       edge_weight=w, w_min=w_min)


def full_roi(height: int, width: int) -> np.ndarray:
    """All-true region-of-interest mask for an image of the given size."""
    return np.ones((height, width + 2), dtype=bool)


def roi_from_image_mask(mask: np.ndarray) -> np.ndarray:
    """Embed an H x W boolean image mask in the H x (W + 2) grid; the
    synthetic columns are always true."""
    height, width = mask.shape
    roi = np.ones((height, width + 2), dtype=bool)
    roi[:, 1:-1] = mask
    return roi


def apply_roi(graph: WeightGraph, roi: np.ndarray) -> WeightGraph:
    """Remove every edge with an endpoint outside the region of interest.

    The synthetic columns are always kept.  The input graph is unchanged; a
    filtered copy is returned.  A mask that disconnects the start from the
    end surfaces as SearchRegionDisconnected from the subsequent search.
    """
    if roi.shape != (graph.height, graph.grid_width):
        raise ValueError(
            f"ROI shape {roi.shape} does not match grid "
            f"({graph.height}, {graph.grid_width})")
    flat = roi.astype(bool).ravel().copy()
    cols = np.arange(graph.n_nodes) % graph.grid_width
    flat[(cols == 0) | (cols == graph.grid_width - 1)] = True
    keep = flat[graph.edge_src] & flat[graph.edge_dst]
    return WeightGraph(height=graph.height, width=graph.width,
                       edge_src=graph.edge_src[keep], edge_dst=graph.edge_dst[keep],
                       edge_weight=graph.edge_weight[keep], w_min=graph.w_min)


@njit(cache=True)
def _dijkstra(indptr, indices, weights, n, start, end):  # pragma: no cover - jitted
    """Binary-heap Dijkstra with lazy deletion.

    The heap orders entries by (cost, node id); node ids are row-major, so
    equal-cost candidates resolve toward the smaller row, then the smaller
    column.  Relaxation updates only on strict improvement, which together
    with the pop order makes parents, and therefore paths, deterministic.
    """
    dist = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    cap = len(weights) + 2
    hcost = np.empty(cap)
    hnode = np.empty(cap, dtype=np.int64)
    hcost[0] = 0.0
    hnode[0] = start
    size = 1
    dist[start] = 0.0
    while size > 0:
        c = hcost[0]
        u = hnode[0]
        size -= 1
        hcost[0] = hcost[size]
        hnode[0] = hnode[size]
        i = 0
        while True:  # sift down
            left = 2 * i + 1
            right = left + 1
            m = i
            if left < size and (hcost[left] < hcost[m]
                                or (hcost[left] == hcost[m] and hnode[left] < hnode[m])):
                m = left
            if right < size and (hcost[right] < hcost[m]
                                 or (hcost[right] == hcost[m] and hnode[right] < hnode[m])):
                m = right
            if m == i:
                break
            hcost[i], hcost[m] = hcost[m], hcost[i]
            hnode[i], hnode[m] = hnode[m], hnode[i]
            i = m
        if c > dist[u]:  # stale entry
            continue
        if u == end:
            break
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            nd = c + weights[k]
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                j = size
                hcost[j] = nd
                hnode[j] = v
                size += 1
                while j > 0:  # sift up
                    p = (j - 1) // 2
                    if hcost[j] < hcost[p] or (hcost[j] == hcost[p] and hnode[j] < hnode[p]):
                        hcost[j], hcost[p] = hcost[p], hcost[j]
                        hnode[j], hnode[p] = hnode[p], hnode[j]
                        j = p
                    else:
                        break
    return dist, parent


def shortest_path(graph: WeightGraph) -> LayerPath:
    """Minimum-cost path from the top-left to the bottom-right grid corner.

    Raises SearchRegionDisconnected when the end node is unreachable.
    """
    n = graph.n_nodes
    counts = np.bincount(graph.edge_src, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    dist, parent = _dijkstra(indptr, graph.edge_dst, graph.edge_weight,
                             n, graph.start, graph.end)
    if not np.isfinite(dist[graph.end]):
        raise SearchRegionDisconnected(
            "no path between the endpoint columns survives the search region")
    nodes = [graph.end]
    while nodes[-1] != graph.start:
        nodes.append(int(parent[nodes[-1]]))
    ids = np.array(nodes[::-1], dtype=np.int64)
    return LayerPath(rows=ids // graph.grid_width, cols=ids % graph.grid_width,
                     cost=float(dist[graph.end]), height=graph.height,
                     grid_width=graph.grid_width)


def extract_boundary(path: LayerPath, width: int) -> np.ndarray:
    """Per-column representative depth of a path over the real image columns.

    Columns visited more than once contribute the mean of their row indices;
    the synthetic columns are dropped.
    """
    sums = np.bincount(path.cols, weights=path.rows, minlength=path.grid_width)
    counts = np.bincount(path.cols, minlength=path.grid_width)
    real_sums = sums[1:width + 1]
    real_counts = counts[1:width + 1]
    if np.any(real_counts == 0):
        raise ValueError("path does not visit every image column")
    return real_sums / real_counts
