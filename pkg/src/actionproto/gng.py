"""Growing neural gas with a fixed node budget.

Inputs are presented as i.i.d. draws from the data. The net grows from two
nodes to ``node_budget`` nodes (one insertion every ``lam`` inputs) and is
then refined for ``refine_epochs`` epochs without insertions. Refinement moves
only the winner: the neighbour pull that spreads nodes during growth would
otherwise keep every node biased toward its graph neighbours.

Outlier robustness: the pull of a single input on a node is limited to an
interquartile-range based radius, so a far-away point moves a node no more
than a typical in-class point would.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientPoints
from .rng import substream


@dataclass(frozen=True)
class GngParams:
    eps_b: float = 0.05
    eps_n: float = 0.006
    lam: int = 100
    max_age: int = 50
    error_decay: float = 0.995
    alpha: float = 0.5
    refine_epochs: int = 5
    iqr_scale: float = 1.5
    steps_per_epoch: int | None = None  # defaults to the number of points


@dataclass
class GngGraph:
    nodes: np.ndarray
    errors: np.ndarray
    edges: dict[tuple[int, int], int] = field(default_factory=dict)
    epoch_qe: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.nodes)

    def neighbors(self, i: int) -> list[int]:
        return [b if a == i else a for (a, b) in self.edges if i in (a, b)]


def _edge(a, b):
    return (a, b) if a < b else (b, a)


def pull_radius(points: np.ndarray, scale: float) -> float:
    """IQR-based cap on how far one input may pull a node."""
    q1, q3 = np.percentile(points, [25, 75], axis=0, method="inverted_cdf")
    r = scale * float(np.linalg.norm(q3 - q1))
    if r > 0:
        return r
    # degenerate spread (e.g. all points identical along every axis)
    return scale * float(np.linalg.norm(points.max(axis=0) - points.min(axis=0))) or np.inf


def quantization_error(points: np.ndarray, nodes: np.ndarray) -> float:
    d2 = ((points[:, None, :] - nodes[None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(d2.min(axis=1)).mean())


def gng_fit(points, node_budget: int, params: GngParams | None = None,
            seed: int = 0) -> GngGraph:
    params = params or GngParams()
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = len(points)
    if node_budget < 2 or n < node_budget:
        raise InsufficientPoints(f"gng needs node_budget >= 2 and >= node_budget points "
                                 f"(budget={node_budget}, points={n})")
    rng = substream(seed, "gng")
    radius = pull_radius(points, params.iqr_scale)

    def draw(size):
        return np.minimum((rng.random(size) * n).astype(int), n - 1)

    first = draw(2)
    if np.array_equal(points[first[0]], points[first[1]]):
        # pick the second start node among points distinct from the first
        others = np.flatnonzero(np.any(points != points[first[0]], axis=1))
        if len(others):
            first[1] = others[0]
    g = GngGraph(points[first].copy(), np.zeros(2), {(0, 1): 0})

    def pull(node, x, rate):
        delta = x - g.nodes[node]
        dist = np.sqrt(delta @ delta)
        if dist > radius:
            delta *= radius / dist
        g.nodes[node] += rate * delta

    wins = np.zeros(node_budget, dtype=int)

    def adapt(x, allow_insert, t):
        d2 = ((g.nodes - x) ** 2).sum(axis=1)
        s1, s2 = np.argsort(d2, kind="stable")[:2]
        wins[s1] += 1
        for e in list(g.edges):
            if s1 in e:
                g.edges[e] += 1
        g.errors[s1] += d2[s1]
        pull(s1, x, params.eps_b)
        if allow_insert:
            for nb in g.neighbors(s1):
                pull(nb, x, params.eps_n)
        g.edges[_edge(s1, s2)] = 0
        for e, age in list(g.edges.items()):
            if age > params.max_age:
                del g.edges[e]
        if allow_insert and t % params.lam == 0 and len(g.nodes) < node_budget:
            _insert(g, params.alpha)
        g.errors *= params.error_decay

    t = 0
    while len(g.nodes) < node_budget:
        for idx in draw(params.lam):
            t += 1
            adapt(points[idx], True, t)

    epoch_len = params.steps_per_epoch or n
    for _ in range(params.refine_epochs):
        wins[:] = 0
        for idx in draw(epoch_len):
            adapt(points[idx], False, 0)
        _relocate_dead(g, points, np.flatnonzero(wins == 0))
        g.epoch_qe.append(quantization_error(points, g.nodes))
    return g


def _relocate_dead(g: GngGraph, points: np.ndarray, dead) -> None:
    """Move nodes that won nothing in an epoch onto the worst-served point.

    Stands in for GNG's remove-and-reinsert while keeping the node count.
    """
    for node in dead:
        others = np.delete(g.nodes, node, axis=0)
        d2 = ((points[:, None, :] - others[None, :, :]) ** 2).sum(axis=2).min(axis=1)
        if d2.max() <= 0:
            return
        g.nodes[node] = points[int(d2.argmax())]
        g.errors[node] = 0.0
        for e in [e for e in g.edges if node in e]:
            del g.edges[e]


def _insert(g: GngGraph, alpha: float) -> None:
    q = int(np.argmax(g.errors))
    nbs = g.neighbors(q)
    if nbs:
        f = max(nbs, key=lambda i: g.errors[i])
    else:
        d2 = ((g.nodes - g.nodes[q]) ** 2).sum(axis=1)
        d2[q] = np.inf
        f = int(np.argmin(d2))
    r = len(g.nodes)
    g.nodes = np.vstack([g.nodes, 0.5 * (g.nodes[q] + g.nodes[f])])
    g.edges.pop(_edge(q, f), None)
    g.edges[_edge(q, r)] = 0
    g.edges[_edge(f, r)] = 0
    g.errors[q] *= alpha
    g.errors[f] *= alpha
    g.errors = np.append(g.errors, g.errors[q])
