"""Directed road network, BPR link performance and route handling.

Links carry the usual BPR volume-delay parameters.  Routes are ordered link
sequences; a ``RouteSet`` holds the per-OD route lists in a stable order and
provides the route/link incidence used by flow loading and the solvers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, StructureError

NodeId = int
OD = tuple[NodeId, NodeId]


@dataclass(frozen=True)
class Link:
    """One directed link with BPR parameters.

    ``fftt`` is the free-flow travel time, ``capacity`` the practical capacity
    entering the BPR ratio.  Defaults ``alpha=0.15, beta=4`` are the standard
    BPR coefficients.
    """

    id: int
    tail: NodeId
    head: NodeId
    fftt: float
    capacity: float
    alpha: float = 0.15
    beta: float = 4.0

    def __post_init__(self) -> None:
        if not self.fftt > 0:
            raise DomainError(f"link {self.id}: fftt must be > 0, got {self.fftt}")
        if not self.capacity > 0:
            raise DomainError(f"link {self.id}: capacity must be > 0, got {self.capacity}")
        if self.alpha < 0:
            raise DomainError(f"link {self.id}: alpha must be >= 0, got {self.alpha}")
        if self.beta < 1:
            raise DomainError(f"link {self.id}: beta must be >= 1, got {self.beta}")


def bpr_time(link: Link, v: float) -> float:
    """Travel time ``t0 * (1 + alpha * (v/cap)^beta)`` at flow ``v >= 0``."""
    if v < 0:
        raise DomainError(f"link {link.id}: flow must be >= 0, got {v}")
    return link.fftt * (1.0 + link.alpha * (v / link.capacity) ** link.beta)


def beckmann_link_integral(link: Link, v: float) -> float:
    """Integral of ``bpr_time`` from 0 to ``v`` (closed-form antiderivative)."""
    if v < 0:
        raise DomainError(f"link {link.id}: flow must be >= 0, got {v}")
    ratio = (v / link.capacity) ** link.beta
    return link.fftt * v * (1.0 + link.alpha / (link.beta + 1.0) * ratio)


class Network:
    """Immutable directed network over a dense set of link ids.

    Link ids must be unique and contiguous (conventionally 1-based, matching
    the CSV ingestion which numbers rows from 1).  The outgoing-link adjacency
    is ordered by link id so that all traversals are deterministic.
    """

    def __init__(self, links: Iterable[Link], nodes: Iterable[NodeId] = ()) -> None:
        links = sorted(links, key=lambda lk: lk.id)
        if not links:
            raise StructureError("network must contain at least one link")
        ids = [lk.id for lk in links]
        if len(set(ids)) != len(ids):
            raise StructureError("duplicate link ids")
        if ids != list(range(ids[0], ids[0] + len(ids))):
            raise StructureError("link ids must form a contiguous range")
        self._links: tuple[Link, ...] = tuple(links)
        self._id0 = ids[0]
        node_set = set(nodes)
        for lk in links:
            node_set.add(lk.tail)
            node_set.add(lk.head)
        self._nodes = frozenset(node_set)
        adjacency: dict[NodeId, list[Link]] = {n: [] for n in node_set}
        for lk in links:
            adjacency[lk.tail].append(lk)
        self._adjacency = {n: tuple(out) for n, out in adjacency.items()}
        self._fftt = np.array([lk.fftt for lk in links])
        self._capacity = np.array([lk.capacity for lk in links])
        self._alpha = np.array([lk.alpha for lk in links])
        self._beta = np.array([lk.beta for lk in links])

    @property
    def links(self) -> tuple[Link, ...]:
        return self._links

    @property
    def nodes(self) -> frozenset[NodeId]:
        return self._nodes

    @property
    def n_links(self) -> int:
        return len(self._links)

    def link(self, link_id: int) -> Link:
        return self._links[self.index_of(link_id)]

    def index_of(self, link_id: int) -> int:
        idx = link_id - self._id0
        if not 0 <= idx < len(self._links):
            raise StructureError(f"unknown link id {link_id}")
        return idx

    def out_links(self, node: NodeId) -> tuple[Link, ...]:
        return self._adjacency.get(node, ())

    def link_times(self, link_flows: np.ndarray) -> np.ndarray:
        """Vectorised BPR times for a full link-flow vector."""
        v = np.asarray(link_flows, dtype=float)
        if v.shape != (self.n_links,):
            raise StructureError(f"expected {self.n_links} link flows, got shape {v.shape}")
        if np.any(v < 0):
            raise DomainError("negative link flow")
        return self._fftt * (1.0 + self._alpha * (v / self._capacity) ** self._beta)

    def beckmann(self, link_flows: np.ndarray) -> float:
        """Sum of closed-form link cost integrals at the given flows."""
        v = np.asarray(link_flows, dtype=float)
        if np.any(v < 0):
            raise DomainError("negative link flow")
        ratio = (v / self._capacity) ** self._beta
        return float(np.sum(self._fftt * v * (1.0 + self._alpha / (self._beta + 1.0) * ratio)))

    def link_time_derivative(self, link_flows: np.ndarray) -> np.ndarray:
        """d(time)/d(flow) per link; zero for constant-time links."""
        v = np.asarray(link_flows, dtype=float)
        if np.any(v < 0):
            raise DomainError("negative link flow")
        return self._fftt * self._alpha * self._beta / self._capacity * (v / self._capacity) ** (
            self._beta - 1.0
        )


@dataclass(frozen=True)
class ODPair:
    origin: NodeId
    destination: NodeId
    demand: float = 0.0

    def __post_init__(self) -> None:
        if self.origin == self.destination:
            raise DomainError(f"OD pair ({self.origin},{self.destination}): origin equals destination")
        if self.demand < 0:
            raise DomainError(f"OD pair ({self.origin},{self.destination}): demand must be >= 0")

    @property
    def od(self) -> OD:
        return (self.origin, self.destination)


@dataclass(frozen=True)
class Route:
    origin: NodeId
    destination: NodeId
    link_ids: tuple[int, ...]

    @property
    def od(self) -> OD:
        return (self.origin, self.destination)


def _check_route(network: Network, route: Route) -> None:
    if not route.link_ids:
        raise StructureError(f"route {route.od}: empty link sequence")
    node = route.origin
    seen = {node}
    for lid in route.link_ids:
        lk = network.link(lid)
        if lk.tail != node:
            raise StructureError(
                f"route {route.od}: link {lid} starts at node {lk.tail}, expected {node}"
            )
        node = lk.head
        if node in seen:
            raise StructureError(f"route {route.od}: repeated node {node}")
        seen.add(node)
    if node != route.destination:
        raise StructureError(f"route {route.od}: ends at node {node}, not {route.destination}")


class RouteSet:
    """Per-OD route lists with stable indices, bound to a network.

    OD pairs are kept in sorted order and routes keep their given order, so a
    flat route index is well defined and reproducible.
    """

    def __init__(self, network: Network, routes_by_od: Mapping[OD, Sequence[Route]]) -> None:
        self._network = network
        ods = sorted(routes_by_od)
        table: dict[OD, tuple[Route, ...]] = {}
        for od in ods:
            routes = tuple(routes_by_od[od])
            seen: set[tuple[int, ...]] = set()
            for r in routes:
                if r.od != od:
                    raise StructureError(f"route {r.od} filed under OD {od}")
                _check_route(network, r)
                if r.link_ids in seen:
                    raise StructureError(f"OD {od}: duplicate route {r.link_ids}")
                seen.add(r.link_ids)
            table[od] = routes
        self._routes = table
        self._ods = tuple(ods)
        flat: list[Route] = []
        slices: dict[OD, slice] = {}
        for od in self._ods:
            start = len(flat)
            flat.extend(table[od])
            slices[od] = slice(start, len(flat))
        self._flat = tuple(flat)
        self._slices = slices
        self._incidence: sp.csr_matrix | None = None

    @property
    def network(self) -> Network:
        return self._network

    @property
    def ods(self) -> tuple[OD, ...]:
        return self._ods

    @property
    def n_routes(self) -> int:
        return len(self._flat)

    @property
    def flat(self) -> tuple[Route, ...]:
        return self._flat

    def routes_for(self, od: OD) -> tuple[Route, ...]:
        try:
            return self._routes[od]
        except KeyError:
            raise StructureError(f"no routes for OD {od}") from None

    def slice_for(self, od: OD) -> slice:
        try:
            return self._slices[od]
        except KeyError:
            raise StructureError(f"no routes for OD {od}") from None

    def incidence(self) -> sp.csr_matrix:
        """Route/link incidence as a CSR matrix of shape (n_routes, n_links)."""
        if self._incidence is None:
            rows, cols = [], []
            for i, route in enumerate(self._flat):
                for lid in route.link_ids:
                    rows.append(i)
                    cols.append(self._network.index_of(lid))
            mat = sp.csr_matrix(
                (np.ones(len(rows)), (rows, cols)),
                shape=(self.n_routes, self._network.n_links),
            )
            mat.sort_indices()
            self._incidence = mat
        return self._incidence


@dataclass(frozen=True)
class FlowState:
    """Route flows with the derived link flows and travel times."""

    route_flows: np.ndarray
    link_flows: np.ndarray
    route_times: np.ndarray
    link_times: np.ndarray

    def __post_init__(self) -> None:
        for arr in (self.route_flows, self.link_flows, self.route_times, self.link_times):
            arr.flags.writeable = False


def load_flows(network: Network, route_set: RouteSet, route_flows) -> FlowState:
    """Aggregate route flows onto links and evaluate all travel times.

    ``route_flows`` is either a flat array in ``route_set`` order or a mapping
    from OD pair to a per-route sequence.
    """
    if isinstance(route_flows, Mapping):
        f = np.zeros(route_set.n_routes)
        extra = set(route_flows) - set(route_set.ods)
        if extra:
            raise StructureError(f"route flows given for unknown ODs {sorted(extra)}")
        for od, values in route_flows.items():
            values = np.asarray(values, dtype=float)
            sl = route_set.slice_for(od)
            if values.shape != (sl.stop - sl.start,):
                raise StructureError(
                    f"OD {od}: expected {sl.stop - sl.start} route flows, got {values.shape}"
                )
            f[sl] = values
    else:
        f = np.asarray(route_flows, dtype=float)
        if f.shape != (route_set.n_routes,):
            raise StructureError(
                f"expected {route_set.n_routes} route flows, got shape {f.shape}"
            )
        f = f.copy()
    if np.any(f < 0):
        raise DomainError("negative route flow")
    incidence = route_set.incidence()
    v = incidence.T @ f
    t = network.link_times(v)
    g = incidence @ t
    return FlowState(route_flows=f, link_flows=v, route_times=g, link_times=t)


@dataclass(frozen=True)
class RouteEnumeration:
    routes: tuple[Route, ...]
    truncated: bool


def _simple_paths(network, node, destination, visited, path, max_links, flags):
    for lk in network.out_links(node):
        if lk.head in visited:
            continue
        if len(path) + 1 > max_links:
            flags["pruned"] = True
            continue
        path.append(lk.id)
        if lk.head == destination:
            yield tuple(path)
        else:
            visited.add(lk.head)
            yield from _simple_paths(network, lk.head, destination, visited, path, max_links, flags)
            visited.discard(lk.head)
        path.pop()


def enumerate_routes(
    network: Network,
    od: ODPair | OD,
    max_routes: int = 64,
    max_links: int | None = None,
) -> RouteEnumeration:
    """All simple paths for one OD pair, in lexicographic link-id order.

    Depth-first search explores outgoing links in ascending id order, which
    yields paths sorted lexicographically by their link-id sequences.  The
    ``truncated`` flag is set when a route beyond ``max_routes`` exists or a
    branch was pruned at ``max_links`` links (default: node count); the depth
    flag is conservative since a pruned branch need not contain a path.
    """
    origin, destination = od.od if isinstance(od, ODPair) else od
    if origin not in network.nodes or destination not in network.nodes:
        raise StructureError(f"OD ({origin},{destination}): unknown node")
    if max_links is None:
        max_links = len(network.nodes)
    flags = {"pruned": False}
    routes: list[Route] = []
    truncated = False
    for seq in _simple_paths(network, origin, destination, {origin}, [], max_links, flags):
        if len(routes) >= max_routes:
            truncated = True
            break
        routes.append(Route(origin, destination, seq))
    truncated = truncated or flags["pruned"]
    if not routes and not truncated:
        raise StructureError(f"OD ({origin},{destination}): destination unreachable")
    return RouteEnumeration(routes=tuple(routes), truncated=truncated)


def build_route_set(
    network: Network,
    demands: Sequence[ODPair],
    max_routes: int = 64,
    max_links: int | None = None,
) -> RouteSet:
    """Enumerate a route set covering every OD pair with positive demand."""
    table: dict[OD, Sequence[Route]] = {}
    for od_pair in demands:
        if od_pair.demand <= 0 or od_pair.od in table:
            continue
        enum = enumerate_routes(network, od_pair, max_routes=max_routes, max_links=max_links)
        if not enum.routes:
            raise StructureError(f"OD {od_pair.od}: no route within enumeration limits")
        table[od_pair.od] = enum.routes
    return RouteSet(network, table)
