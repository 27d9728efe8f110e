"""Multi-core write-through memory system with snoop invalidations.

One shared physical memory is the source of truth; every write goes
through to it immediately and fans out as an invalidation message to every
other core.  Each core's controller samples those messages only while it
has no miss pending, which rules out an invalidation racing ahead of an
in-flight miss for the same line: a message that arrives mid-miss waits in
the FIFO and removes the just-filled line when the controller returns to
ready.

The simulator serializes whole events; an access runs to completion before
the next one starts, and invalidations enqueued meanwhile are drained at
the owning core's next turn.
"""

from collections import deque
from dataclasses import dataclass
from enum import Enum, auto

from . import rlut as rlut_mod
from .cache import VivtCache, WORD_BYTES
from .geometry import CacheConfig, derive_geometry
from .mmu import Mmu, MissResult, PageTable, TranslationFault
from .rlut import Rlut
from .stats import CoreStats, SimStats
from .trace import ContextSwitch, Write


class ControllerState(Enum):
    READY = auto()
    MISS_PENDING_AWAIT_INVALIDATE = auto()
    MISS_PENDING_AWAIT_LINE = auto()


class FlatMemory:
    """Sparse physical memory, line-granular storage, zero-filled."""

    def __init__(self, line_size: int):
        self.line_size = line_size
        self._line_mask = line_size - 1
        self._lines: dict = {}

    def fetch_line(self, paddr: int) -> bytes:
        buf = self._lines.get(paddr & ~self._line_mask)
        return bytes(buf) if buf is not None else bytes(self.line_size)

    def write_word(self, paddr: int, word: int) -> None:
        base = paddr & ~self._line_mask
        buf = self._lines.get(base)
        if buf is None:
            buf = self._lines[base] = bytearray(self.line_size)
        off = paddr & self._line_mask
        buf[off:off + WORD_BYTES] = word.to_bytes(WORD_BYTES, "little")

    def read_word(self, paddr: int) -> int:
        buf = self._lines.get(paddr & ~self._line_mask)
        if buf is None:
            return 0
        off = paddr & self._line_mask
        return int.from_bytes(buf[off:off + WORD_BYTES], "little")

    def snapshot(self) -> dict:
        return {base: bytes(buf) for base, buf in self._lines.items()}


class _MemoryPort:
    """Memory as one core sees it: fetches are plain, writes are coherent."""

    def __init__(self, system: "MemorySystem", core_index: int):
        self._system = system
        self._core_index = core_index

    def fetch_line(self, paddr: int) -> bytes:
        return self._system.memory.fetch_line(paddr)

    def write_word(self, paddr: int, word: int) -> None:
        self._system.coherent_write(self._core_index, paddr, word)


class CoreNode:
    __slots__ = ("cache", "rlut", "state", "invalidate_queue", "ctx", "stats", "port")

    def __init__(self, cache: VivtCache, rlut: Rlut, port: "_MemoryPort"):
        self.cache = cache
        self.rlut = rlut
        self.state = ControllerState.READY
        self.invalidate_queue: deque = deque()
        self.ctx = 0
        self.stats = CoreStats()
        self.port = port


@dataclass(slots=True)
class AccessResult:
    kind: str
    hit: bool | None = None
    value: int | None = None
    paddr: int | None = None
    cycles: int = 0
    fault: bool = False
    miss: MissResult | None = None


class MemorySystem:
    def __init__(self, config: CacheConfig, page_table: PageTable, core_count: int = 1,
                 translate_latency: int = 2, fetch_latency: int = 8):
        if core_count < 1:
            raise ValueError(f"core_count must be >= 1, got {core_count}")
        self.geometry = derive_geometry(config)
        self.synonym_limit = config.synonym_limit
        self.memory = FlatMemory(config.line_size)
        self.mmu = Mmu(self.geometry, page_table, translate_latency, fetch_latency)
        self.cores = [
            CoreNode(VivtCache(self.geometry), Rlut(self.geometry, config.synonym_limit),
                     _MemoryPort(self, i))
            for i in range(core_count)
        ]
        self.max_invalidate_queue_depth = 0
        # Instrumentation: called with (core_index, phase) as a miss moves
        # through its controller phases; lets tests inject mid-miss traffic.
        self.miss_phase_hook = None

    # -- invalidation plumbing ------------------------------------------------

    def enqueue_invalidate(self, core_index: int, paddr: int) -> None:
        queue = self.cores[core_index].invalidate_queue
        queue.append(self.geometry.line_address(paddr))
        if len(queue) > self.max_invalidate_queue_depth:
            self.max_invalidate_queue_depth = len(queue)

    def coherent_write(self, source_core: int, paddr: int, word: int) -> None:
        """Write through to memory and broadcast an invalidation to every
        other core.  The writer's own copy was just updated, so it is spared."""
        self.memory.write_word(paddr, word)
        for index in range(len(self.cores)):
            if index != source_core:
                self.enqueue_invalidate(index, paddr)

    def external_invalidate(self, paddr: int) -> None:
        """An invalidation from outside the simulated cores (e.g. DMA)."""
        for index in range(len(self.cores)):
            self.enqueue_invalidate(index, paddr)

    def apply_snoop_invalidate(self, paddr: int, core_index: int) -> int:
        """Purge every resident synonym of `paddr` at one core; returns the
        number of lines actually cleared.  Stale table entries clear nothing."""
        core = self.cores[core_index]
        assert core.state is ControllerState.READY, "snoops apply only with no miss pending"
        cleared = 0
        for record in core.rlut.lookup(paddr):
            if core.cache.invalidate_virtual_line(record.line_index, record.vtag):
                cleared += 1
        return cleared

    def drain_invalidates(self, core_index: int) -> int:
        """Apply every queued invalidation at one core, FIFO; one cycle per
        message (lookups are pipelined at one per cycle)."""
        core = self.cores[core_index]
        stats = core.stats
        processed = 0
        while core.invalidate_queue:
            paddr = core.invalidate_queue.popleft()
            cleared = self.apply_snoop_invalidate(paddr, core_index)
            stats.snoop_lookups += 1
            stats.total_cycles += 1
            if cleared:
                stats.snoop_invalidations_applied += cleared
            else:
                stats.stale_invalidation_noops += 1
            processed += 1
        return processed

    def drain_all(self) -> None:
        for index in range(len(self.cores)):
            self.drain_invalidates(index)

    # -- the per-core controller ----------------------------------------------

    def controller_step(self, core_index: int, event) -> AccessResult:
        """Serve one event at one core: drain queued invalidations, then run
        the access to completion.  Hits cost one cycle; misses hold the
        controller in the pending states (materialized when a miss-phase
        hook is installed) while further invalidations stay queued."""
        core = self.cores[core_index]
        if core.invalidate_queue:
            self.drain_invalidates(core_index)

        if type(event) is ContextSwitch:
            core.cache.flush_all()
            core.ctx = event.ctx
            core.stats.flushes += 1
            core.stats.total_cycles += 1
            return AccessResult(kind="flush", cycles=1)

        is_write = type(event) is Write
        wdata = event.data if is_write else None
        return self._access(core_index, is_write, event.vaddr, wdata)

    def _access(self, core_index: int, is_write: bool, vaddr: int,
                wdata: int | None) -> AccessResult:
        core = self.cores[core_index]
        stats = core.stats
        hit, value = core.cache.hit_check_and_access(is_write, vaddr, wdata)

        if hit:
            cycles = 1
            if is_write:
                stats.write_hits += 1
                paddr = self.mmu.translate(core.ctx, vaddr)
                self.coherent_write(core_index, paddr, wdata)
                if self.synonym_limit > 1:
                    # Other resident synonyms of this line just went stale.
                    cycles += rlut_mod.LOOKUP_CYCLES
                    self._invalidate_sibling_synonyms(core, paddr, vaddr)
            else:
                stats.read_hits += 1
                paddr = None
            stats.total_cycles += cycles
            return AccessResult(kind="write" if is_write else "read", hit=True,
                                value=value, paddr=paddr, cycles=cycles)

        on_phase = None
        if self.miss_phase_hook is not None:
            def on_phase(phase: str) -> None:
                core.state = (ControllerState.MISS_PENDING_AWAIT_INVALIDATE
                              if phase == "await-invalidate"
                              else ControllerState.MISS_PENDING_AWAIT_LINE)
                self.miss_phase_hook(core_index, phase)

        try:
            miss = self.mmu.handle_miss(is_write, core.ctx, vaddr, wdata,
                                        core.rlut, core.cache, core.port,
                                        on_phase=on_phase)
        except TranslationFault:
            stats.translation_faults += 1
            cycles = 1 + self.mmu.translate_latency
            stats.total_cycles += cycles
            return AccessResult(kind="write" if is_write else "read",
                                fault=True, cycles=cycles)
        finally:
            core.state = ControllerState.READY

        if is_write:
            stats.write_misses += 1
            value = wdata
        else:
            stats.read_misses += 1
            off = vaddr & self.geometry.line_mask
            value = int.from_bytes(miss.line[off:off + WORD_BYTES], "little")
        stats.synonym_evictions += miss.synonym_cleared
        stats.displacement_invalidations += miss.displacement_cleared
        stats.stale_invalidation_noops += miss.stale_noops
        cycles = 1 + miss.cycles
        stats.total_cycles += cycles
        return AccessResult(kind="write" if is_write else "read", hit=False,
                            value=value, paddr=miss.paddr, cycles=cycles, miss=miss)

    def _invalidate_sibling_synonyms(self, core: CoreNode, paddr: int, vaddr: int) -> None:
        g = self.geometry
        own_index = g.vivt_index(vaddr)
        own_vtag = g.vtag(vaddr)
        stats = core.stats
        for record in core.rlut.lookup(paddr):
            if record.line_index == own_index and (record.vtag is None or record.vtag == own_vtag):
                continue
            if core.cache.invalidate_virtual_line(record.line_index, record.vtag):
                stats.synonym_evictions += 1
            else:
                stats.stale_invalidation_noops += 1

    @property
    def global_cycles(self) -> int:
        """Total cycles across all cores (events are serialized)."""
        return sum(core.stats.total_cycles for core in self.cores)

    def stats(self) -> SimStats:
        return SimStats(cores=[core.stats for core in self.cores],
                        max_invalidate_queue_depth=self.max_invalidate_queue_depth)
