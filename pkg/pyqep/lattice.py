"""Finite lattice graphs and entanglement-swapping transformations.

Nodes are indexed row-major over unit cells with a sub-cell index:

    node = (y * width + x) * n_sub + sub

Every edge (a, b) carries a `winding` vector counting how many times it
crosses each periodic boundary. Seen from a, the unwrapped cell of b is

    (x_b, y_b) + winding[0] * (width, 0) + winding[1] * (shear, height)

Triangular lattices use axial coordinates, with neighbours (1, 0), (0, 1) and
(1, -1). Kagome lattices are drawn with offset rows, so kagome tori need an
even height.

Usage example:

    graph = build(LatticeKind.TRIANGULAR, 6, 6)
    plan = transform_tri_to_hex(graph)
    plan.result_graph.n_edges       # 72, every hexagonal edge doubled
"""

from dataclasses import dataclass
from enum import Enum, IntEnum
import logging
import math

import networkx as nx
import numpy as np


class LatticeKind(Enum):
    TRIANGULAR = 'triangular'
    SQUARE = 'square'
    HEXAGONAL = 'hexagonal'
    KAGOME = 'kagome'


class Boundary(Enum):
    OPEN = 'open'
    PERIODIC = 'periodic'


class Payload(IntEnum):
    BOND = 0
    ORIGINAL = 1
    SWAP_OUTCOME = 2
    DOUBLE_LINK = 3


class SwapMode(Enum):
    FULL = 'full'
    PARTIAL = 'partial'


# Critical bond density of classical bond percolation
CLASSICAL_PC = {
    LatticeKind.TRIANGULAR: 2 * math.sin(math.pi / 18),
    LatticeKind.SQUARE: 0.5,
    LatticeKind.KAGOME: 0.5244053,
    LatticeKind.HEXAGONAL: 1 - 2 * math.sin(math.pi / 18),
}

COORDINATION = {
    LatticeKind.TRIANGULAR: 6,
    LatticeKind.SQUARE: 4,
    LatticeKind.KAGOME: 4,
    LatticeKind.HEXAGONAL: 3,
}

N_SUB = {
    LatticeKind.TRIANGULAR: 1,
    LatticeKind.SQUARE: 1,
    LatticeKind.HEXAGONAL: 2,
    LatticeKind.KAGOME: 3,
}

# Bonds per unit cell: (sub_a, sub_b, (dx on even rows, dx on odd rows), dy)
BONDS = {
    LatticeKind.SQUARE: (
        (0, 0, (1, 1), 0),
        (0, 0, (0, 0), 1),
    ),
    LatticeKind.TRIANGULAR: (
        (0, 0, (1, 1), 0),
        (0, 0, (0, 0), 1),
        (0, 0, (1, 1), -1),
    ),
    LatticeKind.HEXAGONAL: (
        (0, 1, (0, 0), 0),
        (0, 1, (-1, -1), 0),
        (0, 1, (-1, -1), 1),
    ),
    # A = 0, B = 1, C = 2; bonds 4 and 5 leave C towards the row above
    LatticeKind.KAGOME: (
        (0, 1, (0, 0), 0),
        (0, 2, (0, 0), 0),
        (1, 2, (0, 0), 0),
        (1, 0, (1, 1), 0),
        (2, 0, (0, 1), 1),
        (2, 1, (-1, 0), 1),
    ),
}


def classical_pc(kind):
    """Critical open-bond density of bond percolation on `kind`."""
    return CLASSICAL_PC[LatticeKind(kind)]


def coordination(kind):
    return COORDINATION[LatticeKind(kind)]


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


class LatticeGraph:
    """Immutable graph of a finite lattice.

    Args:
        kind: LatticeKind of the underlying lattice
        width, height: number of unit cells in x and y
        boundary: Boundary.OPEN or Boundary.PERIODIC
        edges: (E, 2) array of node indices
        winding: (E, 2) array of periodic boundary crossings
        bond_type: (E,) index into the kind's bond table
        payload: (E,) Payload of each edge

    Kwargs:
        shear: x offset applied when wrapping in y (periodic only)
    """

    def __init__(self, kind, width, height, boundary, edges, winding,
                 bond_type, payload, shear=0):
        self.kind = LatticeKind(kind)
        self.width = int(width)
        self.height = int(height)
        self.boundary = Boundary(boundary)
        self.shear = int(shear)
        self.edges = _readonly(np.reshape(edges, (-1, 2)), np.int64)
        self.winding = _readonly(np.reshape(winding, (-1, 2)), np.int64)
        self.bond_type = _readonly(bond_type, np.int8)
        self.payload = _readonly(payload, np.int8)
        if not (len(self.edges) == len(self.winding) == len(self.bond_type)
                == len(self.payload)):
            raise ValueError("Edge arrays must all have one row per edge")

    @property
    def n_sub(self):
        return N_SUB[self.kind]

    @property
    def n_nodes(self):
        return self.width * self.height * self.n_sub

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def periodic(self):
        return self.boundary is Boundary.PERIODIC

    def node(self, x, y, sub=0):
        """Index of the node at cell (x, y), wrapping coordinates."""
        x, y = x % self.width, y % self.height
        return (y * self.width + x) * self.n_sub + sub

    def coords(self, node):
        """Return (x, y, sub) of a node index."""
        cell, sub = divmod(int(node), self.n_sub)
        y, x = divmod(cell, self.width)
        return x, y, sub

    def degrees(self):
        return np.bincount(self.edges.ravel(), minlength=self.n_nodes)

    def column_nodes(self, x):
        """All nodes in unit cells with cell coordinate x."""
        ys, subs = np.meshgrid(np.arange(self.height), np.arange(self.n_sub),
                               indexing='ij')
        return ((ys * self.width + x) * self.n_sub + subs).ravel()

    def far_pair(self):
        """Two distant nodes: opposite corners, or origin and centre."""
        if self.periodic:
            return self.node(0, 0), self.node(self.width // 2,
                                              self.height // 2)
        return (self.node(0, 0),
                self.node(self.width - 1, self.height - 1, self.n_sub - 1))

    def with_payload(self, payload):
        payload = np.broadcast_to(np.asarray(payload, dtype=np.int8),
                                  (self.n_edges,))
        return LatticeGraph(self.kind, self.width, self.height, self.boundary,
                            self.edges, self.winding, self.bond_type,
                            payload, shear=self.shear)

    def edge_list(self):
        """Edge list text, one `x,y,sub x,y,sub PAYLOAD` line per edge."""
        lines = []
        for (a, b), p in zip(self.edges, self.payload):
            ca = ",".join(str(c) for c in self.coords(a))
            cb = ",".join(str(c) for c in self.coords(b))
            lines.append(f"{ca} {cb} {Payload(p).name}")
        return "\n".join(lines) + "\n"

    def to_networkx(self):
        """Export as a networkx MultiGraph keeping payloads and windings."""
        g = nx.MultiGraph(kind=self.kind.value, width=self.width,
                          height=self.height, boundary=self.boundary.value)
        for node in range(self.n_nodes):
            x, y, sub = self.coords(node)
            g.add_node(node, x=x, y=y, sub=sub)
        for i, (a, b) in enumerate(self.edges):
            g.add_edge(int(a), int(b), key=i,
                       payload=Payload(self.payload[i]).name,
                       winding=tuple(int(w) for w in self.winding[i]))
        return g

    def __repr__(self):
        return (f"LatticeGraph({self.kind.value}, {self.width}x{self.height}"
                f", {self.boundary.value}, {self.n_nodes} nodes, "
                f"{self.n_edges} edges)")


def build(kind, width, height, boundary=Boundary.PERIODIC, shear=0):
    """Construct a pristine lattice of width x height unit cells.

    Args:
        kind: LatticeKind (or its value string)
        width, height: number of unit cells

    Kwargs:
        boundary: Boundary.PERIODIC (default) or Boundary.OPEN
        shear: twist of a periodic torus, 0 <= shear < width

    Returns:
        LatticeGraph with every edge of payload BOND
    """
    kind = LatticeKind(kind)
    boundary = Boundary(boundary)
    # A two-node cell never produces self-loops
    min_size = 1 if kind is LatticeKind.HEXAGONAL else 2
    if width < min_size or height < min_size:
        raise ValueError(
            f"{kind.value} lattice needs at least {min_size} cells in each "
            f"direction, got {width}x{height}")
    if kind is LatticeKind.KAGOME and boundary is Boundary.PERIODIC \
            and height % 2:
        raise ValueError(
            f"Periodic kagome lattice needs an even height, got {height} "
            f"(use {height + 1})")
    if shear and boundary is not Boundary.PERIODIC:
        raise ValueError("A shear is only meaningful for periodic lattices")
    if not 0 <= shear < width:
        raise ValueError(f"shear must be in [0, {width}), got {shear}")

    n_sub = N_SUB[kind]
    ys, xs = np.divmod(np.arange(width * height), width)
    edges, winding, bond_type = [], [], []
    for bt, (sa, sb, dxs, dy) in enumerate(BONDS[kind]):
        dx = np.where(ys & 1, dxs[1], dxs[0])
        wy = np.floor_divide(ys + dy, height)
        ny = ys + dy - wy * height
        nx1 = xs + dx - wy * shear
        wx = np.floor_divide(nx1, width)
        nx = nx1 - wx * width
        keep = np.ones(len(xs), dtype=bool)
        if boundary is Boundary.OPEN:
            keep = (wx == 0) & (wy == 0)
        a = (ys * width + xs) * n_sub + sa
        b = (ny * width + nx) * n_sub + sb
        edges.append(np.stack([a, b], axis=1)[keep])
        winding.append(np.stack([wx, wy], axis=1)[keep])
        bond_type.append(np.full(np.count_nonzero(keep), bt))
    edges = np.concatenate(edges)
    # Sort by first endpoint so that edges of a cell are contiguous
    order = np.lexsort((np.concatenate(bond_type), edges[:, 0]))
    graph = LatticeGraph(
        kind, width, height, boundary, edges[order],
        np.concatenate(winding)[order], np.concatenate(bond_type)[order],
        np.full(len(order), Payload.BOND), shear=shear)
    logging.debug(f"Built {graph}")
    return graph


@dataclass(frozen=True)
class Swap:
    """Entanglement swap of source edges `first` and `second` at `middle`."""
    first: int
    second: int
    middle: int
    mode: SwapMode


@dataclass(frozen=True, eq=False)
class TransformationPlan:
    """A lattice rewrite by entanglement swapping.

    `node_map[i]` is the result node of source node i, or -1 for the removed
    middle nodes. With `double_links`, result edges come in pairs: edge 2k
    is the ORIGINAL link and edge 2k + 1 the SWAP_OUTCOME on the same nodes.
    """
    source: LatticeGraph
    swaps: tuple
    result_graph: LatticeGraph
    removed: np.ndarray
    node_map: np.ndarray
    double_links: bool

    def bond_graph(self):
        """Result lattice with each double link collapsed to one bond."""
        g = self.result_graph
        if not self.double_links:
            return g
        return LatticeGraph(
            g.kind, g.width, g.height, g.boundary, g.edges[::2],
            g.winding[::2], g.bond_type[::2],
            np.full(g.n_edges // 2, Payload.DOUBLE_LINK), shear=g.shear)

    def originals(self):
        return np.flatnonzero(self.result_graph.payload == Payload.ORIGINAL)

    def check(self):
        """Raise ValueError if any structural invariant of the plan fails."""
        src, res = self.source, self.result_graph
        used = np.zeros(src.n_edges, dtype=int)
        removed = set(int(r) for r in self.removed)
        for s in self.swaps:
            used[[s.first, s.second]] += 1
            for e in (s.first, s.second):
                if s.middle not in src.edges[e]:
                    raise ValueError(f"{s} does not meet its middle node")
            if s.middle not in removed:
                raise ValueError(f"Middle node of {s} was not removed")
        if np.any(used > 1):
            raise ValueError(
                f"Source edges {np.flatnonzero(used > 1)} swapped twice")
        inner = np.isin(src.edges, self.removed)
        if np.any(inner.all(axis=1)):
            raise ValueError("Removed nodes are not an independent set")
        n_orig = len(self.originals())
        if n_orig + 2 * len(self.swaps) != src.n_edges:
            raise ValueError(
                f"Edge conservation failed: {n_orig} originals + 2 x "
                f"{len(self.swaps)} swaps != {src.n_edges} source edges")
        if np.any(res.edges[:, 0] == res.edges[:, 1]):
            raise ValueError("Result lattice contains self-loops")
        if self.double_links:
            if np.any(res.payload[0::2] != Payload.ORIGINAL) \
                    or np.any(res.payload[1::2] != Payload.SWAP_OUTCOME):
                raise ValueError("Double links must pair ORIGINAL with "
                                 "SWAP_OUTCOME")
            if np.any(res.edges[0::2] != res.edges[1::2]) \
                    or np.any(res.winding[0::2] != res.winding[1::2]):
                raise ValueError("Double link halves join different nodes")


def hermite_normal_form(p1, p2):
    """Basis (w, 0), (s, h) of the integer lattice spanned by p1, p2.

    Returns:
        (w, h, s) with w, h > 0 and 0 <= s < w
    """
    (a1, b1), (a2, b2) = p1, p2
    det = a1 * b2 - a2 * b1
    if det == 0:
        raise ValueError(f"Periods {p1} and {p2} are parallel")
    h = math.gcd(b1, b2)
    w = abs(det) // h
    for s in range(w):
        k1, r1 = divmod(s * b2 - h * a2, det)
        k2, r2 = divmod(a1 * h - b1 * s, det)
        if r1 == 0 and r2 == 0:
            return w, h, s
    raise ValueError(f"No normal form found for periods {p1}, {p2}")


def _incident(graph, nodes):
    """Map node -> {(bond_type, outgoing): (edge, outer node, winding)}."""
    wanted = set(int(n) for n in nodes)
    incident = {n: {} for n in wanted}
    for e, (a, b) in enumerate(graph.edges):
        bt, w = int(graph.bond_type[e]), graph.winding[e]
        if int(a) in wanted:
            incident[int(a)][(bt, True)] = (e, int(b), w)
        if int(b) in wanted:
            incident[int(b)][(bt, False)] = (e, int(a), -w)
    return incident


def _assemble(source, target, links, double_links):
    """Lay out result links in the edge order of `target`.

    Args:
        source: graph being transformed
        target: pristine lattice that the result must reproduce
        links: list of (key, payload) with key (a, b, wx, wy) in target
            node indices
        double_links: expect one ORIGINAL and one SWAP_OUTCOME per edge
    """
    index = {}
    for e, (a, b) in enumerate(target.edges):
        index[(int(a), int(b)) + tuple(int(w) for w in target.winding[e])] = e
    slots = 2 if double_links else 1
    payload = np.full(target.n_edges * slots, -1)
    for key, p in links:
        if key not in index:
            raise ValueError(f"Transformed link {key} is not a lattice edge")
        e = index[key]
        slot = e * slots + (p == Payload.SWAP_OUTCOME if double_links else 0)
        if payload[slot] != -1:
            raise ValueError(f"Transformed link {key} produced twice")
        payload[slot] = p
    if np.any(payload == -1):
        raise ValueError(
            f"Transformation of {source} left {np.count_nonzero(payload == -1)}"
            " lattice links empty")
    return LatticeGraph(
        target.kind, target.width, target.height, target.boundary,
        np.repeat(target.edges, slots, axis=0),
        np.repeat(target.winding, slots, axis=0),
        np.repeat(target.bond_type, slots), payload, shear=target.shear)


def _hex_position(x, y):
    """Honeycomb (x, y, sub) of a non-middle triangular site."""
    if (x - y) % 3 == 1:
        n = (y - x + 1) // 3
        return x - 1 + n, n, 0
    n = (y - x + 2) // 3
    return x - 2 + n, n, 1


# Incident edges of a middle node in angular order, from 0 to 300 degrees
TRI_ANGLES = ((0, True), (1, True), (2, False), (0, False), (1, False),
              (2, True))


def transform_tri_to_hex(graph):
    """Partial-swap a periodic triangular lattice into a honeycomb.

    Sites with (x + 2y) mod 3 == 0 are middle nodes. Each middle node swaps
    its six edges in adjacent pairs (0, 60), (120, 180) and (240, 300)
    degrees, so every swap outcome lands on an existing triangular edge
    and each honeycomb edge becomes a double link.

    The result is the honeycomb torus `build(HEXAGONAL, w, h, shear=s)`
    with (w, h, s) the normal form of the transformed periods.

    Returns:
        TransformationPlan with double links
    """
    if graph.kind is not LatticeKind.TRIANGULAR:
        raise ValueError(
            f"Expected a triangular lattice, got {graph.kind.value}")
    if not graph.periodic or graph.shear:
        raise ValueError("Triangular to hexagonal transformation needs an "
                         "untwisted periodic lattice")
    W, H = graph.width, graph.height
    if W % 3 or H % 3:
        raise ValueError(
            f"Triangular lattice of {W}x{H} cells cannot be 3-coloured; use "
            "a multiple of 3 in both directions")

    w, h, s = hermite_normal_form((2 * W // 3, -W // 3), (H // 3, H // 3))
    target = build(LatticeKind.HEXAGONAL, w, h, Boundary.PERIODIC, shear=s)

    def locate(x, y):
        hx, hy, sub = _hex_position(x, y)
        k = hy // h
        hx1 = hx - k * s
        j = hx1 // w
        return target.node(hx1 - j * w, hy - k * h, sub), j, k, sub

    def key(u, v, wind):
        # wind: raw displacement of v relative to u in periods (W, H)
        xu, yu, _ = graph.coords(u)
        xv, yv, _ = graph.coords(v)
        nu, ju, ku, su = locate(xu, yu)
        nv, jv, kv, _ = locate(xv + wind[0] * W, yv + wind[1] * H)
        if su == 0:
            return nu, nv, jv - ju, kv - ku
        return nv, nu, ju - jv, ku - kv

    middle = [graph.node(x, y) for y in range(H) for x in range(W)
              if (x + 2 * y) % 3 == 0]
    incident = _incident(graph, middle)
    swaps, links, swapped = [], [], set()
    for m in middle:
        around = [incident[m][slot] for slot in TRI_ANGLES]
        for i in range(0, 6, 2):
            (e1, u, w1), (e2, v, w2) = around[i], around[i + 1]
            swaps.append(Swap(e1, e2, m, SwapMode.PARTIAL))
            swapped.update((e1, e2))
            links.append((key(u, v, w2 - w1), Payload.SWAP_OUTCOME))
    for e, (a, b) in enumerate(graph.edges):
        if e not in swapped:
            links.append((key(int(a), int(b), graph.winding[e]),
                          Payload.ORIGINAL))

    result = _assemble(graph, target, links, double_links=True)
    node_map = np.full(graph.n_nodes, -1)
    for node in range(graph.n_nodes):
        x, y, _ = graph.coords(node)
        if (x + 2 * y) % 3:
            node_map[node] = locate(x, y)[0]
    plan = TransformationPlan(graph, tuple(swaps), result,
                              _readonly(middle, np.int64),
                              _readonly(node_map, np.int64), True)
    logging.info(
        f"Triangular {W}x{H} -> hexagonal {w}x{h} (shear {s}): removed "
        f"{len(middle)} nodes, {len(swaps)} partial swaps, "
        f"{target.n_edges} double links")
    return plan


def transform_kagome_to_square(graph):
    """Full-swap a periodic kagome lattice into a square lattice.

    At every C site the edges to A and to the upper-left B are swapped, and
    so are the edges to B and to the upper-right A. The swap outcomes are
    the vertical bonds of a 2W x H square torus; the A-B chains along the
    rows are its horizontal bonds.

    Returns:
        TransformationPlan with single links
    """
    if graph.kind is not LatticeKind.KAGOME:
        raise ValueError(f"Expected a kagome lattice, got {graph.kind.value}")
    if not graph.periodic or graph.shear:
        raise ValueError("Kagome to square transformation needs an untwisted "
                         "periodic lattice")
    W, H = graph.width, graph.height
    target = build(LatticeKind.SQUARE, 2 * W, H, Boundary.PERIODIC)

    def locate(x, y, sub):
        col = 2 * x + sub + (y & 1)
        j, k = col // (2 * W), y // H
        return target.node(col - j * 2 * W, y - k * H), j, k

    def key(u, v, wind):
        xu, yu, su = graph.coords(u)
        xv, yv, sv = graph.coords(v)
        nu, ju, ku = locate(xu, yu, su)
        nv, jv, kv = locate(xv + wind[0] * W, yv + wind[1] * H, sv)
        return nu, nv, jv - ju, kv - ku

    middle = [graph.node(x, y, 2) for y in range(H) for x in range(W)]
    incident = _incident(graph, middle)
    swaps, links, swapped = [], [], set()
    for m in middle:
        around = incident[m]
        for first, second in (((1, False), (5, True)),
                              ((2, False), (4, True))):
            (e1, u, w1), (e2, v, w2) = around[first], around[second]
            swaps.append(Swap(e1, e2, m, SwapMode.FULL))
            swapped.update((e1, e2))
            links.append((key(u, v, w2 - w1), Payload.SWAP_OUTCOME))
    for e, (a, b) in enumerate(graph.edges):
        if e not in swapped:
            links.append((key(int(a), int(b), graph.winding[e]),
                          Payload.ORIGINAL))

    result = _assemble(graph, target, links, double_links=False)
    node_map = np.full(graph.n_nodes, -1)
    for node in range(graph.n_nodes):
        x, y, sub = graph.coords(node)
        if sub != 2:
            node_map[node] = locate(x, y, sub)[0]
    plan = TransformationPlan(graph, tuple(swaps), result,
                              _readonly(middle, np.int64),
                              _readonly(node_map, np.int64), False)
    logging.info(
        f"Kagome {W}x{H} -> square {2 * W}x{H}: removed {len(middle)} "
        f"nodes, {len(swaps)} full swaps")
    return plan
