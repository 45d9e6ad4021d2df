"""Class hierarchy for offering categories and port value types.

The ontology file is line oriented::

    @prefix ex: <http://example.org/>
    # comment
    ex:DimmableLight subClassOf ex:Light
    <http://example.org/Lamp> subClassOf ex:Light
    ex:Standalone

A line holding a single term declares an isolated class.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CycleError, OntologyParseError

_PREFIX_RE = re.compile(r"^@prefix\s+([A-Za-z_][\w.-]*)?:\s*<([^<>\s]*)>\s*\.?$")
_TERM_RE = re.compile(r"<[^<>\s]+>|[^\s<>]+")


def _expand(term: str, prefixes: dict[str, str]) -> str:
    if term.startswith("<") and term.endswith(">"):
        return term[1:-1]
    prefix, sep, local = term.partition(":")
    if sep and prefix in prefixes:
        return prefixes[prefix] + local
    return term


@dataclass(frozen=True)
class TypeGraph:
    """Immutable subclass hierarchy with a precomputed reflexive-transitive closure."""

    classes: frozenset[str] = frozenset()
    subclass_edges: frozenset[tuple[str, str]] = frozenset()
    prefixes: dict[str, str] = field(default_factory=dict, compare=False)
    _ancestors: dict[str, frozenset[str]] = field(
        default_factory=dict, init=False, repr=False, compare=False
    )
    _parents: dict[str, tuple[str, ...]] = field(
        default_factory=dict, init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        parents: dict[str, list[str]] = {c: [] for c in self.classes}
        for sub, sup in self.subclass_edges:
            if sub not in self.classes or sup not in self.classes:
                raise ValueError(f"edge {sub} -> {sup} references an undeclared class")
            parents[sub].append(sup)
        frozen_parents = {c: tuple(sorted(ps)) for c, ps in parents.items()}
        object.__setattr__(self, "_parents", frozen_parents)
        object.__setattr__(self, "_ancestors", _closure(frozen_parents))

    @classmethod
    def from_edges(cls, edges, classes=(), prefixes=None) -> "TypeGraph":
        # self-edges are implied by reflexivity
        edges = frozenset((a, b) for a, b in edges if a != b)
        all_classes = set(classes)
        for a, b in edges:
            all_classes.update((a, b))
        return cls(frozenset(all_classes), edges, dict(prefixes or {}))

    def resolve(self, term: str) -> str:
        """Expand a ``prefix:local`` term with the file's prefix table."""
        return _expand(term, self.prefixes)

    def ancestors(self, uri: str) -> frozenset[str]:
        uri = self.resolve(uri)
        return self._ancestors.get(uri, frozenset((uri,)))

    def is_subclass_of(self, a: str, b: str) -> bool:
        a, b = self.resolve(a), self.resolve(b)
        if a == b:
            return True
        anc = self._ancestors.get(a)
        return anc is not None and b in anc

    def longest_path(self, sub: str, sup: str) -> int:
        """Length of the longest edge path from ``sub`` up to ``sup``; -1 if unrelated."""
        sub, sup = self.resolve(sub), self.resolve(sup)
        if not self.is_subclass_of(sub, sup):
            return -1
        memo: dict[str, int] = {}

        def walk(c: str) -> int:
            if c == sup:
                return 0
            if c not in memo:
                best = -1
                for p in self._parents.get(c, ()):
                    if sup in self._ancestors[p]:
                        best = max(best, walk(p) + 1)
                memo[c] = best
            return memo[c]

        return walk(sub)

    def shortest_path(self, sub: str, sup: str) -> int:
        """Length of the shortest edge path from ``sub`` up to ``sup``; -1 if unrelated."""
        sub, sup = self.resolve(sub), self.resolve(sup)
        if not self.is_subclass_of(sub, sup):
            return -1
        frontier, seen, depth = [sub], {sub}, 0
        while frontier:
            if sup in frontier:
                return depth
            nxt = []
            for c in frontier:
                for p in self._parents.get(c, ()):
                    if p not in seen:
                        seen.add(p)
                        nxt.append(p)
            frontier, depth = nxt, depth + 1
        return -1  # pragma: no cover - unreachable given the closure check

    def with_edge(self, sub: str, sup: str) -> "TypeGraph":
        return TypeGraph.from_edges(
            self.subclass_edges | {(self.resolve(sub), self.resolve(sup))},
            self.classes,
            self.prefixes,
        )


def _closure(parents: dict[str, tuple[str, ...]]) -> dict[str, frozenset[str]]:
    white, grey, black = 0, 1, 2
    color = dict.fromkeys(parents, white)
    result: dict[str, frozenset[str]] = {}

    for root in sorted(parents):
        if color[root] != white:
            continue
        # iterative DFS; graphs are small but recursion limits are not worth risking
        stack: list[tuple[str, int]] = [(root, 0)]
        color[root] = grey
        while stack:
            node, idx = stack[-1]
            ps = parents[node]
            if idx < len(ps):
                stack[-1] = (node, idx + 1)
                nxt = ps[idx]
                if color[nxt] == grey:
                    raise CycleError(nxt)
                if color[nxt] == white:
                    color[nxt] = grey
                    stack.append((nxt, 0))
            else:
                anc = {node}
                for p in ps:
                    anc |= result[p]
                result[node] = frozenset(anc)
                color[node] = black
                stack.pop()
    return result


def load_type_graph(document: str) -> TypeGraph:
    """Parse ontology file content into a :class:`TypeGraph`.

    Raises :class:`OntologyParseError` on malformed lines and
    :class:`CycleError` when the subclass edges form a cycle.
    """
    prefixes: dict[str, str] = {}
    classes: set[str] = set()
    edges: set[tuple[str, str]] = set()
    for lineno, raw in enumerate(document.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("@prefix"):
            m = _PREFIX_RE.match(line)
            if not m:
                raise OntologyParseError(lineno, f"malformed prefix declaration: {raw!r}")
            prefixes[m.group(1) or ""] = m.group(2)
            continue
        if line.endswith(" ."):
            line = line[:-2].rstrip()
        tokens = _TERM_RE.findall(line)
        if "".join(tokens) != re.sub(r"\s+", "", line):
            raise OntologyParseError(lineno, f"unexpected characters: {raw!r}")
        if len(tokens) == 1:
            classes.add(_expand(tokens[0], prefixes))
        elif len(tokens) == 3 and tokens[1] == "subClassOf":
            edges.add((_expand(tokens[0], prefixes), _expand(tokens[2], prefixes)))
        else:
            raise OntologyParseError(lineno, f"expected '<sub> subClassOf <super>': {raw!r}")
    return TypeGraph.from_edges(edges, classes, prefixes)


def load_type_graph_file(path: str | Path) -> TypeGraph:
    return load_type_graph(Path(path).read_text(encoding="utf-8"))


def is_subclass_of(graph: TypeGraph, a: str, b: str) -> bool:
    return graph.is_subclass_of(a, b)
