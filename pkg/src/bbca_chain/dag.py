"""Causal block store.

Blocks are delivered only once their full referenced ancestry is delivered;
anything early is buffered and cascades out when the missing pieces arrive.
On top of the store sit the ancestry queries and the deterministic traversal
that linearizes everything a committed backbone block causally covers.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .blocks import Block, BlockRef


class UnknownBlockError(KeyError):
    pass


@dataclass
class _Pending:
    block: Block
    missing: set[BlockRef]


class DagStore:
    def __init__(self) -> None:
        self.delivered: dict[BlockRef, Block] = {}
        self.pending: dict[BlockRef, _Pending] = {}
        # missing ref -> digests of pending blocks waiting on it
        self._waiters: dict[BlockRef, set[BlockRef]] = {}
        self._referenced: set[BlockRef] = set()

    def __contains__(self, ref: BlockRef) -> bool:
        return ref in self.delivered

    def get(self, ref: BlockRef) -> Block:
        try:
            return self.delivered[ref]
        except KeyError:
            raise UnknownBlockError(ref.hex()) from None

    def tips(self) -> list[BlockRef]:
        """Delivered blocks not referenced by any delivered block, sorted."""
        return sorted(d for d in self.delivered if d not in self._referenced)

    def insert(self, block: Block) -> list[Block]:
        """Store a block; return whatever became deliverable, in causal order."""
        digest = block.digest
        if digest in self.delivered or digest in self.pending:
            return []
        if digest in block.refs:
            raise ValueError("block references its own digest")
        missing = {r for r in block.refs if r not in self.delivered}
        if missing:
            self.pending[digest] = _Pending(block, missing)
            for ref in missing:
                self._waiters.setdefault(ref, set()).add(digest)
            return []
        newly = [block]
        self._deliver(block)
        queue = [digest]
        while queue:
            arrived = queue.pop(0)
            for waiter in sorted(self._waiters.pop(arrived, ())):
                entry = self.pending[waiter]
                entry.missing.discard(arrived)
                if not entry.missing:
                    del self.pending[waiter]
                    self._deliver(entry.block)
                    newly.append(entry.block)
                    queue.append(waiter)
        return newly

    def _deliver(self, block: Block) -> None:
        self.delivered[block.digest] = block
        self._referenced.update(block.refs)

    def ancestry(self, root: BlockRef) -> set[BlockRef]:
        """Transitive closure of refs, including the root itself."""
        if root not in self.delivered:
            raise UnknownBlockError(root.hex())
        seen = {root}
        stack = [root]
        while stack:
            for ref in self.delivered[stack.pop()].refs:
                if ref not in seen:
                    seen.add(ref)
                    stack.append(ref)
        return seen

    def order_under(self, backbone: BlockRef,
                    already_committed: set[BlockRef]) -> list[BlockRef]:
        """Total order of the backbone's uncommitted ancestry.

        Topological over causal references, ties broken by ascending
        (view, author, digest); the backbone block itself comes last.
        Identical stores, backbone and committed set give identical output
        on every node.
        """
        members = self.ancestry(backbone) - already_committed
        indegree = {ref: 0 for ref in members}
        children: dict[BlockRef, list[BlockRef]] = {ref: [] for ref in members}
        for ref in members:
            for parent in self.delivered[ref].refs:
                if parent in members:
                    indegree[ref] += 1
                    children[parent].append(ref)
        heap = [self._order_key(ref) for ref, deg in indegree.items() if deg == 0]
        heapq.heapify(heap)
        out: list[BlockRef] = []
        while heap:
            *_, ref = heapq.heappop(heap)
            out.append(ref)
            for child in children[ref]:
                indegree[child] -= 1
                if indegree[child] == 0:
                    heapq.heappush(heap, self._order_key(child))
        assert len(out) == len(members) and (not out or out[-1] == backbone)
        return out

    def _order_key(self, ref: BlockRef) -> tuple[int, int, BlockRef, BlockRef]:
        block = self.delivered[ref]
        return (block.view, block.author, ref, ref)
