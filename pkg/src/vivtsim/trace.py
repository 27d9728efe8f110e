"""Trace events and the line-oriented trace file format.

One event per line, `#` comments allowed:

    R <core> <ctx> <vaddr-hex>              read a word
    W <core> <ctx> <vaddr-hex> <word-hex>   write a word
    X <core> <ctx>                          context switch (flushes the cache)
    I <paddr-hex>                           external invalidation broadcast
"""

from dataclasses import dataclass

from .cache import WORD_BYTES


class TraceError(ValueError):
    """Malformed or invalid trace; carries the 1-based line number when known."""

    def __init__(self, message: str, line_no: int | None = None):
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)
        self.line_no = line_no


@dataclass(slots=True)
class Read:
    core: int
    ctx: int
    vaddr: int
    line_no: int | None = None


@dataclass(slots=True)
class Write:
    core: int
    ctx: int
    vaddr: int
    data: int
    line_no: int | None = None


@dataclass(slots=True)
class ContextSwitch:
    core: int
    ctx: int
    line_no: int | None = None


@dataclass(slots=True)
class ExternalInvalidate:
    paddr: int
    line_no: int | None = None


def _int_field(token: str, what: str, line_no: int, base: int = 10) -> int:
    try:
        return int(token, base)
    except ValueError:
        raise TraceError(f"bad {what} {token!r}", line_no) from None


def parse_trace(text: str) -> list:
    events = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        kind = fields[0]
        if kind == "R" and len(fields) == 4:
            core = _int_field(fields[1], "core", line_no)
            ctx = _int_field(fields[2], "ctx", line_no)
            vaddr = _int_field(fields[3], "vaddr", line_no, 16)
            event = Read(core, ctx, vaddr, line_no)
        elif kind == "W" and len(fields) == 5:
            core = _int_field(fields[1], "core", line_no)
            ctx = _int_field(fields[2], "ctx", line_no)
            vaddr = _int_field(fields[3], "vaddr", line_no, 16)
            data = _int_field(fields[4], "word", line_no, 16)
            if data < 0 or data >= (1 << (8 * WORD_BYTES)):
                raise TraceError(f"word {fields[4]} out of 32-bit range", line_no)
            event = Write(core, ctx, vaddr, data, line_no)
        elif kind == "X" and len(fields) == 3:
            core = _int_field(fields[1], "core", line_no)
            ctx = _int_field(fields[2], "ctx", line_no)
            event = ContextSwitch(core, ctx, line_no)
        elif kind == "I" and len(fields) == 2:
            paddr = _int_field(fields[1], "paddr", line_no, 16)
            if paddr % WORD_BYTES:
                raise TraceError(f"paddr {fields[1]} not word aligned", line_no)
            event = ExternalInvalidate(paddr, line_no)
        else:
            raise TraceError(f"unrecognized event {raw!r}", line_no)
        if isinstance(event, (Read, Write)):
            if event.vaddr % WORD_BYTES:
                raise TraceError(f"vaddr {fields[3]} not word aligned", line_no)
            if event.core < 0 or event.ctx < 0:
                raise TraceError("core and ctx must be non-negative", line_no)
        events.append(event)
    return events


def format_trace(events) -> str:
    lines = []
    for event in events:
        if isinstance(event, Read):
            lines.append(f"R {event.core} {event.ctx} {event.vaddr:#x}")
        elif isinstance(event, Write):
            lines.append(f"W {event.core} {event.ctx} {event.vaddr:#x} {event.data:#x}")
        elif isinstance(event, ContextSwitch):
            lines.append(f"X {event.core} {event.ctx}")
        elif isinstance(event, ExternalInvalidate):
            lines.append(f"I {event.paddr:#x}")
        else:
            raise TypeError(f"not a trace event: {event!r}")
    return "\n".join(lines) + ("\n" if lines else "")
