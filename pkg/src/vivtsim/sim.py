"""Trace engine: drives the multi-core system over a list of events,
mirrors every access in a cacheless flat-memory oracle, and (in check
mode) audits the synonym and coherence invariants after every event.

Check mode keeps incremental per-core mirrors of cache residency so the
per-event audit is O(changed lines) rather than O(cache); the full
`check_invariants` sweep still runs periodically and at the end of the
run, and aborts with the offending event index on the first violation.
"""

from .cache import WORD_BYTES
from .coherence import MemorySystem
from .geometry import CacheConfig
from .mmu import PageTable
from .stats import SimStats
from .trace import ContextSwitch, ExternalInvalidate, Read, TraceError, Write

FULL_CHECK_INTERVAL = 2000


class InvariantViolationError(Exception):
    """An invariant or oracle check failed; carries the event index."""

    def __init__(self, event_index: int, violations: list):
        summary = violations[0] if violations else "invariant violation"
        extra = f" (+{len(violations) - 1} more)" if len(violations) > 1 else ""
        super().__init__(f"after event {event_index}: {summary}{extra}")
        self.event_index = event_index
        self.violations = violations


class TraceOracle:
    """Cacheless reference model: translation plus a flat word store.

    Consumes the same trace as the simulated system; a read returns the
    value of the latest preceding write to the same physical word, zero if
    untouched.
    """

    def __init__(self, geometry, page_table: PageTable, core_count: int):
        self._page_bits = geometry.page_bits
        self._page_mask = geometry.page_mask
        self._va_mask = geometry.va_mask
        self._pa_mask = geometry.pa_mask
        self._table = page_table
        self._ctx = [0] * core_count
        self._words: dict = {}

    def _translate(self, core: int, vaddr: int):
        vaddr &= self._va_mask
        ppn = self._table.lookup(self._ctx[core], vaddr >> self._page_bits)
        if ppn is None:
            return None
        return ((ppn << self._page_bits) | (vaddr & self._page_mask)) & self._pa_mask

    def read(self, core: int, vaddr: int):
        """Returns (value, faulted)."""
        paddr = self._translate(core, vaddr)
        if paddr is None:
            return None, True
        return self._words.get(paddr, 0), False

    def write(self, core: int, vaddr: int, word: int) -> bool:
        """Returns True when the write faulted (and was skipped)."""
        paddr = self._translate(core, vaddr)
        if paddr is None:
            return True
        self._words[paddr] = word
        return False

    def set_ctx(self, core: int, ctx: int) -> None:
        self._ctx[core] = ctx

    def oracle_read(self, paddr: int) -> int:
        return self._words.get(paddr, 0)

    def oracle_write(self, paddr: int, word: int) -> None:
        self._words[paddr] = word


def check_invariants(system: MemorySystem, page_table: PageTable | None = None) -> list:
    """Full sweep of every invariant the design promises; returns violation
    descriptions (empty when the state is sound).

    Per core: (a) at most synonym_limit resident lines translate to any one
    physical line; (b) at most rlut_ways distinct physical lines are resident
    per line-within-page offset class; (c) cached bytes match memory except
    for lines whose invalidation is still queued; (d) the reverse table is
    structurally sound and records every resident line.
    """
    if page_table is None:
        page_table = system.mmu.page_table
    g = system.geometry
    s_limit = system.synonym_limit
    violations = []
    for ci, core in enumerate(system.cores):
        queued = set(core.invalidate_queue)
        by_paddr: dict = {}
        by_off: dict = {}
        for set_index, vtag, data in core.cache.valid_lines():
            vaddr = g.vaddr_of_line(set_index, vtag)
            ppn = page_table.lookup(core.ctx, vaddr >> g.page_bits)
            if ppn is None:
                violations.append(
                    f"core {ci}: resident line vaddr {vaddr:#x} has no translation in ctx {core.ctx}")
                continue
            paddr = ((ppn << g.page_bits) | (vaddr & g.page_mask)) & g.pa_mask
            p_line = g.line_address(paddr)
            by_paddr.setdefault(p_line, []).append(vaddr)
            by_off.setdefault(g.offset_class(vaddr), set()).add(p_line)
            if p_line not in queued and bytes(data) != system.memory.fetch_line(p_line):
                violations.append(
                    f"core {ci}: cached bytes for vaddr {vaddr:#x} differ from memory at {p_line:#x}")
            recorded = any(
                rec.line_index == set_index and (rec.vtag is None or rec.vtag == vtag)
                for rec in core.rlut.lookup(paddr)
            )
            if not recorded:
                violations.append(
                    f"core {ci}: resident line vaddr {vaddr:#x} is not recorded in the "
                    f"reverse table for paddr {p_line:#x}")
        for p_line, vaddrs in by_paddr.items():
            if len(vaddrs) > s_limit:
                violations.append(
                    f"core {ci}: synonym limit exceeded at paddr {p_line:#x}: "
                    f"{len(vaddrs)} resident lines (limit {s_limit})")
        for off, p_lines in by_off.items():
            if len(p_lines) > g.rlut_ways:
                violations.append(
                    f"core {ci}: offset class {off:#x} holds {len(p_lines)} distinct "
                    f"physical lines (limit {g.rlut_ways})")
        seen_ptags: dict = {}
        for set_index, way, ptag, vbits_list in core.rlut.entries():
            key = (set_index, ptag)
            if key in seen_ptags:
                violations.append(
                    f"core {ci}: two reverse-table entries for ptag {ptag:#x} in set {set_index}")
            seen_ptags[key] = way
            if len(vbits_list) > s_limit:
                violations.append(
                    f"core {ci}: reverse-table entry in set {set_index} holds "
                    f"{len(vbits_list)} synonyms (limit {s_limit})")
            if len(set(vbits_list)) != len(vbits_list):
                violations.append(
                    f"core {ci}: duplicate synonym payloads in reverse-table set {set_index}")
    return violations


class _InvariantMonitor:
    """Incremental per-event audit driven by the caches' mutation journals."""

    def __init__(self, system: MemorySystem, page_table: PageTable,
                 full_interval: int = FULL_CHECK_INTERVAL):
        self._system = system
        self._table = page_table
        self._full_interval = full_interval
        g = system.geometry
        self._g = g
        for core in system.cores:
            core.cache.journal = []
        # Per core: (set, vtag) -> (p_line, offset class), plus counted views.
        self._residents = [dict() for _ in system.cores]
        self._by_paddr = [dict() for _ in system.cores]
        self._by_off = [dict() for _ in system.cores]
        # Journal list identity is stable (cleared in place, never replaced).
        self._journals = [
            (ci, core, core.cache.journal) for ci, core in enumerate(system.cores)
        ]

    def _fail(self, index: int, message: str):
        raise InvariantViolationError(index, [message])

    def _consume_journals(self, index: int) -> None:
        g = self._g
        s_limit = self._system.synonym_limit
        for ci, core, journal in self._journals:
            if not journal:
                continue
            residents = self._residents[ci]
            by_paddr = self._by_paddr[ci]
            by_off = self._by_off[ci]
            for entry in journal:
                op = entry[0]
                if op == "fill":
                    _, set_index, vtag = entry
                    key = (set_index, vtag)
                    if key in residents:
                        self._fail(index, f"core {ci}: duplicate fill of set {set_index}")
                    vaddr = g.vaddr_of_line(set_index, vtag)
                    ppn = self._table.lookup(core.ctx, vaddr >> g.page_bits)
                    if ppn is None:
                        self._fail(index, f"core {ci}: fill of untranslatable vaddr {vaddr:#x}")
                    paddr = ((ppn << g.page_bits) | (vaddr & g.page_mask)) & g.pa_mask
                    p_line = g.line_address(paddr)
                    off = g.offset_class(vaddr)
                    residents[key] = (p_line, off)
                    count = by_paddr.get(p_line, 0) + 1
                    by_paddr[p_line] = count
                    if count > s_limit:
                        self._fail(index, (
                            f"core {ci}: synonym limit exceeded at paddr {p_line:#x}: "
                            f"{count} resident lines (limit {s_limit})"))
                    per_off = by_off.setdefault(off, {})
                    per_off[p_line] = per_off.get(p_line, 0) + 1
                    if len(per_off) > g.rlut_ways:
                        self._fail(index, (
                            f"core {ci}: offset class {off:#x} holds {len(per_off)} "
                            f"distinct physical lines (limit {g.rlut_ways})"))
                elif op in ("inv", "evict"):
                    _, set_index, vtag = entry
                    record = residents.pop((set_index, vtag), None)
                    if record is not None:
                        p_line, off = record
                        count = by_paddr[p_line] - 1
                        if count:
                            by_paddr[p_line] = count
                        else:
                            del by_paddr[p_line]
                        per_off = by_off[off]
                        count = per_off[p_line] - 1
                        if count:
                            per_off[p_line] = count
                        else:
                            del per_off[p_line]
                else:  # flush
                    residents.clear()
                    by_paddr.clear()
                    by_off.clear()
            journal.clear()

    def _audit_miss(self, index: int, core_index: int, vaddr: int, miss) -> None:
        # Entry tags only change on allocation, so the set-wide audit is
        # scoped to allocating misses; the touched entry is always rechecked.
        g = self._g
        core = self._system.cores[core_index]
        paddr = miss.paddr
        if miss.entry_allocated:
            problem = core.rlut.audit_set(g.rlut_index(paddr))
        else:
            problem = core.rlut.audit_entry(paddr)
        if problem is not None:
            self._fail(index, f"core {core_index}: {problem}")
        if not core.rlut.is_recorded(paddr, g.vivt_index(vaddr), g.vtag(vaddr)):
            self._fail(index, (
                f"core {core_index}: freshly filled vaddr {vaddr:#x} is not recorded "
                f"in the reverse table"))

    def after_event(self, index: int, event, result) -> None:
        self._consume_journals(index)
        if result is not None and result.miss is not None:
            self._audit_miss(index, event.core, event.vaddr, result.miss)
        if self._full_interval and (index + 1) % self._full_interval == 0:
            self._run_full(index)

    def final(self, index: int) -> None:
        self._consume_journals(index)
        self._run_full(index)

    def _run_full(self, index: int) -> None:
        violations = check_invariants(self._system, self._table)
        if violations:
            raise InvariantViolationError(index, violations)


def run_trace(events, config: CacheConfig, core_count: int = 1,
              page_table: PageTable | None = None, check_mode: bool = False,
              translate_latency: int = 2, fetch_latency: int = 8,
              full_check_interval: int = FULL_CHECK_INTERVAL) -> SimStats:
    """Run a trace to completion and return the statistics.

    Deterministic: the same events and configuration produce bit-identical
    stats and final memory.  With check_mode set, the invariant audit and
    the oracle comparison run after every event and raise
    InvariantViolationError at the first divergence.  Trace validation
    problems raise TraceError with the offending line.
    """
    if page_table is None:
        page_table = PageTable(identity=True)
    system = MemorySystem(config, page_table, core_count,
                          translate_latency, fetch_latency)
    oracle = TraceOracle(system.geometry, page_table, core_count)
    monitor = _InvariantMonitor(system, page_table, full_check_interval) if check_mode else None

    for index, event in enumerate(events):
        te = type(event)
        if te is ExternalInvalidate:
            system.external_invalidate(event.paddr)
            result = None
        else:
            if not 0 <= event.core < core_count:
                raise TraceError(f"event {index}: core {event.core} out of range "
                                 f"(0..{core_count - 1})", event.line_no)
            if te is not ContextSwitch and event.ctx != system.cores[event.core].ctx:
                raise TraceError(
                    f"event {index}: ctx {event.ctx} does not match core "
                    f"{event.core}'s current ctx {system.cores[event.core].ctx}",
                    event.line_no)
            result = system.controller_step(event.core, event)
            if te is Read:
                expected, oracle_fault = oracle.read(event.core, event.vaddr)
                if check_mode:
                    if oracle_fault != result.fault:
                        raise InvariantViolationError(index, [
                            f"core {event.core}: fault divergence from the oracle at "
                            f"vaddr {event.vaddr:#x}"])
                    if not result.fault and result.value != expected:
                        raise InvariantViolationError(index, [
                            f"core {event.core}: read of vaddr {event.vaddr:#x} returned "
                            f"{result.value:#x}, oracle has {expected:#x}"])
            elif te is Write:
                oracle_fault = oracle.write(event.core, event.vaddr, event.data)
                if check_mode and oracle_fault != result.fault:
                    raise InvariantViolationError(index, [
                        f"core {event.core}: fault divergence from the oracle at "
                        f"vaddr {event.vaddr:#x}"])
            else:
                oracle.set_ctx(event.core, event.ctx)
        if monitor is not None:
            monitor.after_event(index, event, result)

    system.drain_all()
    if monitor is not None:
        monitor.final(len(events))
    return system.stats()
