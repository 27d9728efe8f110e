"""Virtually indexed, virtually tagged cache array.

Write-through, allocate-on-miss.  The array itself never talks to memory:
write-through and line fetches are the caller's duty, as is deciding what
to invalidate.  Lines are addressed for invalidation by set index (how the
reverse lookup table reconstructs them), optionally qualified by the
virtual tag to pick the way in associative configurations.
"""

from .geometry import Geometry

WORD_BYTES = 4


class VivtCache:
    def __init__(self, geometry: Geometry):
        self.geometry = geometry
        self.ways = geometry.ways
        self.set_count = geometry.set_count
        n = self.set_count * self.ways
        self._valid = [False] * n
        self._vtags = [0] * n
        self._data: list = [None] * n
        # Per-set way ordering, most recently used first; only kept when
        # there is an actual choice of victim.
        self._lru = [list(range(self.ways)) for _ in range(self.set_count)] if self.ways > 1 else None
        # Optional mutation log consumed by the invariant monitor.  Entries:
        # ('fill', set, vtag), ('evict', set, old_vtag), ('inv', set, vtag),
        # ('flush',).
        self.journal = None

    def _touch(self, set_index: int, way: int) -> None:
        order = self._lru[set_index]
        order.remove(way)
        order.insert(0, way)

    def hit_check_and_access(self, is_write: bool, vaddr: int, wdata: int | None = None):
        """Tag and data access in one cycle.

        Returns (hit, word).  A read hit returns the cached word; a write hit
        updates the cached copy and returns the written word.  On a miss the
        cache is left untouched and the word is None.
        """
        g = self.geometry
        set_index = g.vivt_index(vaddr)
        vtag = g.vtag(vaddr)
        if self.ways == 1:
            if not (self._valid[set_index] and self._vtags[set_index] == vtag):
                return False, None
            i = set_index
        else:
            base = set_index * self.ways
            for way in range(self.ways):
                i = base + way
                if self._valid[i] and self._vtags[i] == vtag:
                    self._touch(set_index, way)
                    break
            else:
                return False, None
        off = vaddr & g.line_mask
        if is_write:
            self._data[i][off:off + WORD_BYTES] = wdata.to_bytes(WORD_BYTES, "little")
            return True, wdata
        return True, int.from_bytes(self._data[i][off:off + WORD_BYTES], "little")

    def fill_line(self, vaddr: int, line: bytes):
        """Install a fetched line; returns the set index of any valid line the
        fill displaced, else None.  The victim within a set is the least
        recently used way."""
        g = self.geometry
        set_index = g.vivt_index(vaddr)
        vtag = g.vtag(vaddr)
        if self.ways == 1:
            way = 0
            i = set_index
        else:
            base = set_index * self.ways
            way = None
            for w in range(self.ways):
                if not self._valid[base + w]:
                    way = w
                    break
            if way is None:
                way = self._lru[set_index][-1]
            i = base + way
        displaced = None
        if self._valid[i]:
            displaced = set_index
            if self.journal is not None:
                self.journal.append(("evict", set_index, self._vtags[i]))
        self._valid[i] = True
        self._vtags[i] = vtag
        self._data[i] = bytearray(line)
        if self.ways > 1:
            self._touch(set_index, way)
        if self.journal is not None:
            self.journal.append(("fill", set_index, vtag))
        return displaced

    def invalidate_virtual_line(self, line_index: int, expected_vtag: int | None = None) -> bool:
        """Clear the valid bit of the line at `line_index` whose tag matches
        `expected_vtag` (any tag when None).  Idempotent: returns False when no
        matching valid line exists, so stale requests are harmless no-ops."""
        base = line_index * self.ways
        for way in range(self.ways):
            i = base + way
            if self._valid[i] and (expected_vtag is None or self._vtags[i] == expected_vtag):
                self._valid[i] = False
                self._data[i] = None
                if self.journal is not None:
                    self.journal.append(("inv", line_index, self._vtags[i]))
                return True
        return False

    def flush_all(self) -> None:
        """Clear every valid bit; used on context switches to rule out homonyms."""
        n = self.set_count * self.ways
        self._valid = [False] * n
        self._data = [None] * n
        if self.ways > 1:
            self._lru = [list(range(self.ways)) for _ in range(self.set_count)]
        if self.journal is not None:
            self.journal.append(("flush",))

    def valid_lines(self):
        """Yield (set_index, vtag, data) for every valid line."""
        ways = self.ways
        for i, valid in enumerate(self._valid):
            if valid:
                yield i // ways, self._vtags[i], self._data[i]

    def valid_line_count(self) -> int:
        return sum(self._valid)
