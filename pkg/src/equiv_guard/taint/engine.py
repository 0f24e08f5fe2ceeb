"""
taint.engine - Reverse path search from sinks, and the forward closure used to check it.

The backward walk follows Data, Call and Return edges only. It does not stop
at the first source it meets, so every source that can reach a sink within
the depth bound is reported. Per (source, sink) pair one path is kept: the
first unsanitized one found, otherwise the first sanitized one. Inline
assembly nodes never pass taint on.
"""

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Set, Tuple

import networkx as nx

from equiv_guard.ipdg.models import Ipdg
from equiv_guard.models import Diagnostic
from equiv_guard.taint.models import PathVerdict, TaintPath, TaintSpec
from equiv_guard.taint.patterns import (
    FLOW_EDGES,
    SanitizerChecker,
    matching_nodes,
    sink_matches,
    source_matches,
)

logger = logging.getLogger(__name__)


def flow_graph(ipdg: Ipdg) -> nx.DiGraph:
    """Taint-carrying projection: no out-edges from opaque nodes."""
    graph = nx.DiGraph()
    graph.add_nodes_from(sorted(ipdg.nodes))
    for edge in ipdg.edges:
        if edge.kind in FLOW_EDGES and not ipdg.nodes[edge.source].opaque:
            graph.add_edge(edge.source, edge.target)
    return graph


def _endpoints(ipdg: Ipdg, spec: TaintSpec) -> Tuple[Set[int], Set[int]]:
    sources = matching_nodes(ipdg, spec.sources, lambda node, p: source_matches(ipdg, node, p))
    sinks = matching_nodes(ipdg, spec.sinks, sink_matches)
    return sources, sinks


class _ReverseSearch:
    """One spec's search; owns its worklists and diagnostics."""

    def __init__(self, ipdg: Ipdg, spec: TaintSpec, depth_bound: int, path_cap: int, sanitize: bool):
        self.ipdg = ipdg
        self.spec = spec
        self.depth_bound = depth_bound
        self.path_cap = path_cap
        self.sanitize = sanitize and bool(spec.sanitizers)
        self.graph = flow_graph(ipdg)
        self.checker = SanitizerChecker(ipdg, depth_bound)
        self.diagnostics: List[Diagnostic] = []
        self._reported_opaque: Set[int] = set()

    def _diag(self, code: str, message: str, node: Optional[int] = None) -> None:
        n = self.ipdg.nodes.get(node) if node is not None else None
        self.diagnostics.append(Diagnostic(
            phase="taint", code=code, message=message,
            contract=n.contract if n else None, location=n.src if n else None))

    def _backward(self, sink: int) -> Tuple[Dict[int, Optional[int]], Optional[int]]:
        """BFS toward sources. Returns next-hop pointers and the first truncated node."""
        toward: Dict[int, Optional[int]] = {sink: None}
        truncated = None
        queue = deque([(sink, 0)])
        while queue:
            current, depth = queue.popleft()
            for edge in self.ipdg.in_edges(current, set(FLOW_EDGES)):
                pred = edge.source
                if self.ipdg.nodes[pred].opaque:
                    if pred not in self._reported_opaque:
                        self._reported_opaque.add(pred)
                        self._diag("assembly-blocks-taint", "inline assembly stops taint propagation", pred)
                    continue
                if pred in toward:
                    continue
                if depth >= self.depth_bound:
                    if truncated is None:
                        truncated = current
                    continue
                toward[pred] = current
                queue.append((pred, depth + 1))
        return toward, truncated

    @staticmethod
    def _chain(toward: Dict[int, Optional[int]], start: int) -> Tuple[int, ...]:
        chain = [start]
        while toward[chain[-1]] is not None:
            chain.append(toward[chain[-1]])
        return tuple(chain)

    def _hits(self, nodes: Sequence[int]) -> Tuple[Tuple[str, int], ...]:
        found = []
        for pattern in self.spec.sanitizers:
            nid = self.checker.hit(pattern, nodes)
            if nid is not None:
                found.append((pattern.id, nid))
        return tuple(found)

    def _classify(self, source: int, sink: int, shortest: Tuple[int, ...]) -> TaintPath:
        if not self.sanitize:
            return TaintPath(smell=self.spec.smell, nodes=shortest)
        hits = self._hits(shortest)
        if not hits:
            return TaintPath(smell=self.spec.smell, nodes=shortest)
        if source != sink:
            examined = 0
            for candidate in nx.all_simple_paths(self.graph, source, sink, cutoff=self.depth_bound):
                examined += 1
                if examined > self.path_cap:
                    self._diag("path-cap-hit", f"stopped after {self.path_cap} paths", sink)
                    break
                if not self._hits(candidate):
                    return TaintPath(smell=self.spec.smell, nodes=tuple(candidate))
        return TaintPath(smell=self.spec.smell, nodes=shortest, sanitizers_hit=hits,
                         verdict=PathVerdict.SANITIZED)

    def run(self) -> List[TaintPath]:
        sources, sinks = _endpoints(self.ipdg, self.spec)
        if not sources or not sinks:
            return []
        paths: List[TaintPath] = []
        for sink in sorted(sinks):
            toward, truncated = self._backward(sink)
            for source in sorted(s for s in sources if s in toward):
                paths.append(self._classify(source, sink, self._chain(toward, source)))
            if truncated is not None:
                self._diag("depth-bound-hit", f"taint search truncated at depth {self.depth_bound}", sink)
                if truncated not in sources:
                    paths.append(TaintPath(smell=self.spec.smell, nodes=self._chain(toward, truncated),
                                           low_confidence=True))
        return sorted(paths, key=lambda p: (p.nodes[0], p.nodes[-1], p.nodes))


def reverse_search(ipdg: Ipdg, spec: TaintSpec, *, depth_bound: int = 64, path_cap: int = 10_000,
                   sanitize: bool = True, diagnostics: Optional[List[Diagnostic]] = None) -> List[TaintPath]:
    """Trace from every sink back to the sources that reach it.

    Args:
        ipdg: A finished graph.
        spec: Sources, sinks and sanitizers.
        depth_bound: Longest backward walk, in edges.
        path_cap: Alternatives examined per pair when looking for an
            unsanitized path.
        sanitize: False skips sanitizer evaluation; every path is Suspicious.
        diagnostics: Receives depth-bound, path-cap and assembly diagnostics.

    Returns:
        One path per reachable (source, sink) pair, plus a low-confidence
        truncated path for each sink whose search hit the depth bound.
        Ordered by source, then sink, then nodes.
    """
    search = _ReverseSearch(ipdg, spec, depth_bound, path_cap, sanitize)
    paths = search.run()
    if diagnostics is not None:
        diagnostics.extend(search.diagnostics)
    logger.debug("%s: %d paths", spec.smell.value, len(paths))
    return paths


def forward_closure(ipdg: Ipdg, spec: TaintSpec) -> Set[Tuple[int, int]]:
    """Every (source, sink) pair connected by forward propagation."""
    sources, sinks = _endpoints(ipdg, spec)
    graph = flow_graph(ipdg)
    pairs: Set[Tuple[int, int]] = set()
    for source in sources:
        tainted = {source}
        worklist = [source]
        while worklist:
            current = worklist.pop()
            for succ in graph.successors(current):
                if succ not in tainted:
                    tainted.add(succ)
                    worklist.append(succ)
        pairs |= {(source, sink) for sink in tainted & sinks}
    return pairs


def search_all(ipdg: Ipdg, specs: Sequence[TaintSpec], *, depth_bound: int = 64, path_cap: int = 10_000,
               sanitize: bool = True, workers: int = 4,
               diagnostics: Optional[List[Diagnostic]] = None) -> List[TaintPath]:
    """Run several specs over the same graph concurrently; merge by smell, then path order."""
    def one(spec: TaintSpec) -> Tuple[List[TaintPath], List[Diagnostic]]:
        local: List[Diagnostic] = []
        return reverse_search(ipdg, spec, depth_bound=depth_bound, path_cap=path_cap,
                              sanitize=sanitize, diagnostics=local), local

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(one, specs))
    merged: List[TaintPath] = []
    for paths, local in results:
        merged.extend(paths)
        if diagnostics is not None:
            diagnostics.extend(local)
    return sorted(merged, key=lambda p: (p.smell.value, p.nodes[0], p.nodes[-1], p.nodes))
