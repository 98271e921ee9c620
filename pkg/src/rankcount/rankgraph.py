"""Ranking-judgment DAG with contradiction detection and transitive expansion.

Each judgment "image i shows more people than image j" is an arc i -> j.
The graph stays acyclic by construction: a judgment whose reverse is already
implied by a directed path is rejected with that path as a witness.  The
transitive closure of the accepted arcs is the full machine-expanded label
set; pairs not judged by hand are marked ``implied``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable

MANUAL = "manual"
IMPLIED = "implied"

RELATION_I_HIGHER = "i_higher"
RELATION_J_HIGHER = "j_higher"
RELATION_UNKNOWN = "unknown"


class SelfPairError(ValueError):
    """A judgment comparing an image with itself."""


class ConflictError(ValueError):
    """A judgment whose reverse ordering is already implied.

    ``witness`` is a directed path hi_0 -> ... -> hi_k proving the existing
    order, whose endpoints contradict the rejected judgment.
    """

    def __init__(self, witness: list[str]):
        self.witness = list(witness)
        super().__init__(
            "judgment contradicts existing order; witness path: "
            + " -> ".join(self.witness)
        )


class PairFileError(ValueError):
    """Malformed pair file; message carries the 1-based row number."""


@dataclass(frozen=True, order=True)
class RankingPair:
    """One normalized ranking judgment: ``hi`` has more people than ``lo``."""

    hi: str
    lo: str
    provenance: str = MANUAL

    def __post_init__(self):
        if self.hi == self.lo:
            raise SelfPairError(f"pair compares {self.hi!r} with itself")
        if self.provenance not in (MANUAL, IMPLIED):
            raise ValueError(f"unknown provenance {self.provenance!r}")


@dataclass(frozen=True)
class LabelStats:
    manual: int
    implied: int

    @property
    def total(self) -> int:
        return self.manual + self.implied


class RankGraph:
    """Directed acyclic order relation over image ids.

    Mutations are serialized by the caller (single logical writer); reads
    between mutations are safe.  Reachability is memoized and invalidated
    on insertion.
    """

    def __init__(self):
        self._succ: dict[str, set[str]] = {}
        self._pred: dict[str, set[str]] = {}
        self._manual: set[tuple[str, str]] = set()
        self._descendants: dict[str, frozenset[str]] | None = None

    @property
    def vertices(self) -> set[str]:
        return set(self._succ)

    def arcs(self) -> set[tuple[str, str]]:
        return {(hi, lo) for hi, lows in self._succ.items() for lo in lows}

    def manual_arcs(self) -> set[tuple[str, str]]:
        return set(self._manual)

    def _ensure_vertex(self, v: str) -> None:
        if v not in self._succ:
            self._succ[v] = set()
            self._pred[v] = set()

    def add_pair(self, i: str, j: str, q: int, provenance: str = MANUAL) -> None:
        """Insert the judgment <i, j, q>; q=1 means i has more people.

        Raises ConflictError (graph unchanged) if the reverse order is
        already implied, SelfPairError if i == j.
        """
        if i == j:
            raise SelfPairError(f"pair compares {i!r} with itself")
        if q not in (-1, 1):
            raise ValueError(f"ranking label must be -1 or 1, got {q!r}")
        hi, lo = (i, j) if q == 1 else (j, i)
        if hi in self._succ and lo in self._succ:
            witness = self.find_path(lo, hi)
            if witness is not None:
                raise ConflictError(witness)
        self._ensure_vertex(hi)
        self._ensure_vertex(lo)
        if lo not in self._succ[hi]:
            self._succ[hi].add(lo)
            self._pred[lo].add(hi)
            self._descendants = None
        if provenance == MANUAL:
            self._manual.add((hi, lo))

    def find_path(self, src: str, dst: str) -> list[str] | None:
        """Shortest directed path src -> ... -> dst, or None."""
        if src not in self._succ or dst not in self._succ:
            return None
        if src == dst:
            return [src]
        parent: dict[str, str] = {}
        frontier = [src]
        seen = {src}
        while frontier:
            nxt = []
            for u in frontier:
                for v in sorted(self._succ[u]):
                    if v in seen:
                        continue
                    parent[v] = u
                    if v == dst:
                        path = [dst]
                        while path[-1] != src:
                            path.append(parent[path[-1]])
                        return path[::-1]
                    seen.add(v)
                    nxt.append(v)
            frontier = nxt
        return None

    def _closure_map(self) -> dict[str, frozenset[str]]:
        if self._descendants is None:
            self._descendants = self._compute_descendants()
        return self._descendants

    def _compute_descendants(self) -> dict[str, frozenset[str]]:
        # Bit-parallel reachability over a reverse topological order.
        order = self._topological_order()
        index = {v: k for k, v in enumerate(order)}
        masks = [0] * len(order)
        for v in reversed(order):
            mask = 0
            for child in self._succ[v]:
                mask |= 1 << index[child]
                mask |= masks[index[child]]
            masks[index[v]] = mask
        out: dict[str, frozenset[str]] = {}
        for v in order:
            mask = masks[index[v]]
            out[v] = frozenset(u for u in order if mask >> index[u] & 1)
        return out

    def _topological_order(self) -> list[str]:
        # Kahn's algorithm with lexicographic tie-breaking for determinism.
        indeg = {v: len(self._pred[v]) for v in self._succ}
        ready = sorted(v for v, d in indeg.items() if d == 0)
        order: list[str] = []
        while ready:
            v = ready.pop(0)
            order.append(v)
            for u in sorted(self._succ[v]):
                indeg[u] -= 1
                if indeg[u] == 0:
                    ready.append(u)
            ready.sort()
        if len(order) != len(self._succ):
            raise AssertionError("cycle in rank graph; invariant violated")
        return order

    def reachable(self, src: str, dst: str) -> bool:
        if src not in self._succ or dst not in self._succ:
            return False
        return dst in self._closure_map()[src]

    def transitive_closure(self) -> list[RankingPair]:
        """All ordered pairs (hi, lo) connected by a directed path.

        Superset of the inserted arcs; pairs outside the manual set carry
        ``implied`` provenance.  Sorted for deterministic output.
        """
        pairs = []
        for hi, lows in self._closure_map().items():
            for lo in lows:
                prov = MANUAL if (hi, lo) in self._manual else IMPLIED
                pairs.append(RankingPair(hi, lo, prov))
        return sorted(pairs)

    def query_relation(self, i: str, j: str) -> str:
        if i == j:
            raise SelfPairError(f"pair compares {i!r} with itself")
        if self.reachable(i, j):
            return RELATION_I_HIGHER
        if self.reachable(j, i):
            return RELATION_J_HIGHER
        return RELATION_UNKNOWN

    def label_stats(self) -> LabelStats:
        total = sum(len(lows) for lows in self._closure_map().values())
        manual = len(self._manual)
        return LabelStats(manual=manual, implied=total - manual)


def graph_from_pairs(pairs: Iterable[RankingPair]) -> RankGraph:
    graph = RankGraph()
    for pair in pairs:
        graph.add_pair(pair.hi, pair.lo, 1, provenance=pair.provenance)
    return graph


def read_pair_file(path) -> list[RankingPair]:
    """Read a pair CSV (header ``i,j,q``, optional ``provenance`` column).

    Judgments are normalized so the returned pairs always rank hi over lo.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["i", "j", "q"]:
            raise PairFileError(f"row 1: expected header 'i,j,q', got {header!r}")
        has_provenance = len(header) == 4 and header[3].strip() == "provenance"
        pairs = []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            expected = 4 if has_provenance else 3
            if len(row) != expected:
                raise PairFileError(f"row {row_no}: expected {expected} fields, got {len(row)}")
            i, j, q_text = row[0].strip(), row[1].strip(), row[2].strip()
            if q_text not in ("-1", "1"):
                raise PairFileError(f"row {row_no}: q must be -1 or 1, got {q_text!r}")
            prov = row[3].strip() if has_provenance else MANUAL
            if prov not in (MANUAL, IMPLIED):
                raise PairFileError(f"row {row_no}: unknown provenance {prov!r}")
            q = int(q_text)
            hi, lo = (i, j) if q == 1 else (j, i)
            try:
                pairs.append(RankingPair(hi, lo, prov))
            except ValueError as exc:
                raise PairFileError(f"row {row_no}: {exc}") from exc
    return pairs


def write_pair_file(path, pairs: Iterable[RankingPair], include_provenance: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if include_provenance:
            writer.writerow(["i", "j", "q", "provenance"])
            for pair in pairs:
                writer.writerow([pair.hi, pair.lo, 1, pair.provenance])
        else:
            writer.writerow(["i", "j", "q"])
            for pair in pairs:
                writer.writerow([pair.hi, pair.lo, 1])
