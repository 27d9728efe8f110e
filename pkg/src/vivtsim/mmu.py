"""Virtual-to-physical translation and the cache-miss transaction.

The miss path strings together translation, the reverse-table update, the
synonym invalidations it implies, write-through, and the line fill, and
accounts the cycles of the whole transaction.  The reverse-table update
overlaps the line fetch, so it only shows up in the cycle count when the
fetch is faster than the two-cycle insert.
"""

from dataclasses import dataclass, field

from . import rlut as rlut_mod
from .geometry import Geometry

DEFAULT_TRANSLATE_LATENCY = 2
DEFAULT_FETCH_LATENCY = 8


class TranslationFault(Exception):
    def __init__(self, ctx: int, vaddr: int):
        super().__init__(f"no translation for ctx {ctx}, vaddr {vaddr:#x}")
        self.ctx = ctx
        self.vaddr = vaddr


class PageTableError(ValueError):
    """Malformed page-table text; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class PageTable:
    """Static (context, virtual page) -> physical page mapping.

    With `identity` set, unmapped pages translate to themselves, which is
    handy for traces that do not care about synonyms.
    """

    def __init__(self, identity: bool = False):
        self.default_identity = identity
        self._map: dict = {}

    def map_page(self, ctx: int, vpn: int, ppn: int) -> None:
        key = (ctx, vpn)
        if key in self._map:
            raise ValueError(f"duplicate mapping for ctx {ctx}, vpn {vpn:#x}")
        self._map[key] = ppn

    def lookup(self, ctx: int, vpn: int):
        ppn = self._map.get((ctx, vpn))
        if ppn is None and self.default_identity:
            return vpn
        return ppn

    def mappings(self):
        return self._map.items()

    def __len__(self):
        return len(self._map)


def load_page_table(text: str) -> PageTable:
    """Parse the page-table file format.

    One mapping per line: `<ctx> <vpn-hex> <ppn-hex>` with `#` comments; an
    optional header line `identity on|off` controls the fallback for
    unmapped pages (off when absent).
    """
    table = PageTable()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "identity":
            if len(fields) != 2 or fields[1] not in ("on", "off"):
                raise PageTableError(line_no, "expected `identity on` or `identity off`")
            table.default_identity = fields[1] == "on"
            continue
        if len(fields) != 3:
            raise PageTableError(line_no, f"expected `<ctx> <vpn> <ppn>`, got {raw!r}")
        try:
            ctx = int(fields[0], 16) if fields[0].lower().startswith("0x") else int(fields[0])
            vpn = int(fields[1], 16)
            ppn = int(fields[2], 16)
        except ValueError:
            raise PageTableError(line_no, f"bad number in {raw!r}") from None
        try:
            table.map_page(ctx, vpn, ppn)
        except ValueError as exc:
            raise PageTableError(line_no, str(exc)) from None
    return table


def dump_page_table(table: PageTable) -> str:
    lines = [f"identity {'on' if table.default_identity else 'off'}"]
    for (ctx, vpn), ppn in sorted(table.mappings()):
        lines.append(f"{ctx} {vpn:#x} {ppn:#x}")
    return "\n".join(lines) + "\n"


@dataclass
class MissResult:
    """Outcome of one miss transaction."""

    paddr: int
    line: bytes
    invalidations_issued: list = field(default_factory=list)
    cycles: int = 0
    synonym_cleared: int = 0
    displacement_cleared: int = 0
    stale_noops: int = 0
    fill_displaced: int | None = None
    entry_allocated: bool = False


class Mmu:
    def __init__(self, geometry: Geometry, page_table: PageTable,
                 translate_latency: int = DEFAULT_TRANSLATE_LATENCY,
                 fetch_latency: int = DEFAULT_FETCH_LATENCY):
        self.geometry = geometry
        self.page_table = page_table
        self.translate_latency = translate_latency
        self.fetch_latency = fetch_latency

    def translate(self, ctx: int, vaddr: int) -> int:
        """Physical address for (ctx, vaddr); the page offset carries over."""
        g = self.geometry
        vaddr &= g.va_mask
        ppn = self.page_table.lookup(ctx, vaddr >> g.page_bits)
        if ppn is None:
            raise TranslationFault(ctx, vaddr)
        return ((ppn << g.page_bits) | (vaddr & g.page_mask)) & g.pa_mask

    def handle_miss(self, is_write: bool, ctx: int, vaddr: int, wdata: int | None,
                    rlut, cache, memory, on_phase=None) -> MissResult:
        """Run one miss transaction, keeping the synonym limit intact.

        Order: translate; update the reverse table; invalidate the synonym it
        evicted plus (on writes) every other recorded synonym, and always the
        residents of any wholly displaced entry; write through; fetch; fill.
        A translation fault propagates before anything is touched.
        """
        g = self.geometry
        paddr = self.translate(ctx, vaddr)

        plan = rlut.lookup_and_insert(paddr, vaddr)
        if on_phase is not None:
            on_phase("await-invalidate")

        result = MissResult(paddr=paddr, line=b"", entry_allocated=plan.allocated)
        targets = []
        if plan.evict is not None:
            targets.append((plan.evict, True))
        for record in plan.displaced:
            targets.append((record, False))
        if is_write:
            for record in plan.others:
                targets.append((record, True))
        for record, is_synonym in targets:
            result.invalidations_issued.append(record.line_index)
            if cache.invalidate_virtual_line(record.line_index, record.vtag):
                if is_synonym:
                    result.synonym_cleared += 1
                else:
                    result.displacement_cleared += 1
            else:
                result.stale_noops += 1

        if on_phase is not None:
            on_phase("await-line")
        if is_write:
            memory.write_word(paddr, wdata)
        line = memory.fetch_line(g.line_address(paddr))
        result.line = line
        result.fill_displaced = cache.fill_line(vaddr, line)
        result.cycles = self.translate_latency + max(self.fetch_latency, rlut_mod.INSERT_CYCLES)
        return result
