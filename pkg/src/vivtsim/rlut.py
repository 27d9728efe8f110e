"""Reverse lookup table: a set-associative physical-to-virtual-line memory.

Each entry tracks one physical line and up to `synonym_limit` resident
virtual lines for it, storing only the virtual bits that cannot be
recovered from the physical address: the synonym bits for direct-mapped
caches, the full page-upper bits otherwise (needed to pick the way).
Snoop lookups are pure and cost one cycle, fully pipelined; the combined
lookup-and-insert used on the miss path costs two cycles and is not
pipelined.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

from .geometry import Geometry

LOOKUP_CYCLES = 1
INSERT_CYCLES = 2


class SynonymRecord(NamedTuple):
    """A resident virtual line reconstructed from a table entry: the set index
    to invalidate, plus the tag that picks the way (None when direct-mapped,
    where the set holds a single line)."""

    line_index: int
    vtag: int | None


@dataclass
class InvalidationPlan:
    """What a miss-path insert asks the cache to do.

    evict: the synonym whose table slot was overwritten; always invalidated.
    others: synonyms of the same physical line still in the table; the caller
        invalidates them only on a write miss.
    displaced: residents of a different physical line whose whole entry was
        displaced to make room; always invalidated, since an untracked line
        could never be found by later snoops.
    allocated: whether a fresh entry was claimed for this physical line.
    """

    evict: SynonymRecord | None = None
    others: list = field(default_factory=list)
    displaced: list = field(default_factory=list)
    allocated: bool = False


class _Slot:
    __slots__ = ("valid", "vbits")

    def __init__(self):
        self.valid = False
        self.vbits = 0


class _Entry:
    __slots__ = ("valid", "ptag", "slots", "replace_ptr")

    def __init__(self, synonym_limit: int):
        self.valid = False
        self.ptag = 0
        self.slots = [_Slot() for _ in range(synonym_limit)]
        self.replace_ptr = 0


class Rlut:
    def __init__(self, geometry: Geometry, synonym_limit: int):
        self.geometry = geometry
        self.synonym_limit = synonym_limit
        self._sets = [
            [_Entry(synonym_limit) for _ in range(geometry.rlut_ways)]
            for _ in range(geometry.rlut_sets)
        ]
        self._way_ptr = [0] * geometry.rlut_sets

    def _stored_bits(self, vaddr: int) -> int:
        # Direct-mapped: synonym bits suffice to rebuild the set index.
        # Associative: keep the whole page-upper payload to rebuild the tag.
        g = self.geometry
        if g.ways == 1:
            return g.synonym_bits(vaddr)
        return g.page_upper_bits(vaddr)

    def _record(self, vbits: int, paddr: int) -> SynonymRecord:
        g = self.geometry
        index = g.line_index_for(vbits, paddr)
        if g.ways == 1:
            return SynonymRecord(index, None)
        return SynonymRecord(index, g.vtag_for(vbits, paddr))

    def lookup(self, paddr: int):
        """Pure lookup: every resident virtual line recorded for `paddr`,
        reconstructed as (set index, way tag).  One cycle, pipelined."""
        g = self.geometry
        ptag = g.rlut_tag(paddr)
        for entry in self._sets[g.rlut_index(paddr)]:
            if entry.valid and entry.ptag == ptag:
                return [
                    self._record(slot.vbits, paddr)
                    for slot in entry.slots if slot.valid
                ]
        return []

    def lookup_and_insert(self, paddr: int, vaddr: int) -> InvalidationPlan:
        """Record vaddr as resident for paddr and report which residents the
        caller must invalidate to keep at most `synonym_limit` synonyms per
        physical line.  Two cycles, not pipelined; miss path only."""
        g = self.geometry
        set_index = g.rlut_index(paddr)
        ptag = g.rlut_tag(paddr)
        vbits = self._stored_bits(vaddr)
        ways = self._sets[set_index]

        entry = None
        for candidate in ways:
            if candidate.valid and candidate.ptag == ptag:
                entry = candidate
                break

        if entry is not None:
            match = None
            free = None
            for slot in entry.slots:
                if slot.valid:
                    if slot.vbits == vbits:
                        match = slot
                elif free is None:
                    free = slot
            if match is None and free is None:
                victim = entry.slots[entry.replace_ptr]
                entry.replace_ptr = (entry.replace_ptr + 1) % self.synonym_limit
            else:
                victim = None
            others = [
                self._record(slot.vbits, paddr)
                for slot in entry.slots
                if slot.valid and slot is not match and slot is not victim
            ]
            if match is not None:
                # Already recorded (the line itself was invalidated earlier);
                # the slot simply stands for the new residency.
                return InvalidationPlan(evict=None, others=others)
            if free is not None:
                free.valid = True
                free.vbits = vbits
                return InvalidationPlan(evict=None, others=others)
            evict = self._record(victim.vbits, paddr)
            victim.vbits = vbits
            return InvalidationPlan(evict=evict, others=others)

        # No entry for this physical line: allocate one, round-robin among
        # the ways once the set is full.
        entry = None
        for candidate in ways:
            if not candidate.valid:
                entry = candidate
                break
        displaced = []
        if entry is None:
            entry = ways[self._way_ptr[set_index]]
            self._way_ptr[set_index] = (self._way_ptr[set_index] + 1) % len(ways)
            # Reconstruction only uses physical bits below the page boundary,
            # which the displaced line shares with paddr (same table set).
            displaced = [
                self._record(slot.vbits, paddr)
                for slot in entry.slots if slot.valid
            ]
        entry.valid = True
        entry.ptag = ptag
        entry.replace_ptr = 0
        for slot in entry.slots:
            slot.valid = False
        entry.slots[0].valid = True
        entry.slots[0].vbits = vbits
        return InvalidationPlan(displaced=displaced, allocated=True)

    def entries(self):
        """Yield (set_index, way, ptag, [vbits of valid slots]) for checking."""
        for set_index in range(len(self._sets)):
            yield from self.entries_in_set(set_index)

    def entries_in_set(self, set_index: int):
        for way, entry in enumerate(self._sets[set_index]):
            if entry.valid:
                yield set_index, way, entry.ptag, [
                    slot.vbits for slot in entry.slots if slot.valid
                ]

    @staticmethod
    def _audit_slots(entry, set_index: int) -> str | None:
        slots = entry.slots
        count = len(slots)
        if count > 1:
            for a in range(count):
                if not slots[a].valid:
                    continue
                vbits = slots[a].vbits
                for b in range(a + 1, count):
                    if slots[b].valid and slots[b].vbits == vbits:
                        return f"duplicate synonym payloads in reverse-table set {set_index}"
        return None

    def audit_set(self, set_index: int) -> str | None:
        """First structural problem in one set, or None: at most one entry per
        physical tag, no duplicate synonym payloads within an entry."""
        seen = set()
        for entry in self._sets[set_index]:
            if not entry.valid:
                continue
            if entry.ptag in seen:
                return f"two reverse-table entries for ptag {entry.ptag:#x} in set {set_index}"
            seen.add(entry.ptag)
            problem = self._audit_slots(entry, set_index)
            if problem is not None:
                return problem
        return None

    def audit_entry(self, paddr: int) -> str | None:
        """Structural audit scoped to paddr's entry (which must exist)."""
        g = self.geometry
        set_index = g.rlut_index(paddr)
        ptag = g.rlut_tag(paddr)
        for entry in self._sets[set_index]:
            if entry.valid and entry.ptag == ptag:
                return self._audit_slots(entry, set_index)
        return f"no reverse-table entry for ptag {ptag:#x} in set {set_index}"

    def is_recorded(self, paddr: int, line_index: int, vtag: int) -> bool:
        """Whether the resident line (line_index, vtag) is recorded for paddr."""
        g = self.geometry
        ptag = g.rlut_tag(paddr)
        for entry in self._sets[g.rlut_index(paddr)]:
            if entry.valid and entry.ptag == ptag:
                for slot in entry.slots:
                    if slot.valid:
                        record = self._record(slot.vbits, paddr)
                        if record.line_index == line_index and (
                                record.vtag is None or record.vtag == vtag):
                            return True
                return False
        return False


def bytes_needed(cache_size: int, synonym_limit: int) -> int:
    """Storage bytes for one reverse lookup table at the reference geometry
    (64-byte lines, 4 KB pages, 36-bit physical addresses, direct-mapped).
    Caches of 4 KB or less never hold a synonym, so they need no table."""
    if cache_size <= 4096:
        return 0
    return ((cache_size // 64) * (24 + 3 * synonym_limit)) // 8
