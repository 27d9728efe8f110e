"""Deterministic workload generator with controllable synonym pressure.

Synonym page groups are sets of virtual pages that deliberately differ in
the synonym bits (so their lines can be resident at distinct set indices)
while sharing one physical page.  Everything else maps injectively, so a
run with zero groups can never trigger a synonym eviction.
"""

import random

from .geometry import CacheConfig, DEFAULT_CONFIG, derive_geometry
from .mmu import PageTable
from .trace import ContextSwitch, Read, Write

_PRIVATE_PAGES_PER_CTX = 12
_SYNONYM_ACCESS_BIAS = 0.15
_HOT_PAGE_COUNT = 2
_HOT_REFRESH_PERIOD = 512
_HOT_PAGE_BIAS = 0.95
_LINES_TOUCHED_PER_PAGE = 16


def generate_trace(seed: int, core_count: int, event_count: int,
                   synonym_page_groups: int, write_ratio: float,
                   context_switch_ratio: float,
                   config: CacheConfig = DEFAULT_CONFIG):
    """Build (events, page_table), deterministic in `seed`.

    Each synonym group pins max(2, min(2**k, 4)) virtual pages with distinct
    synonym bits to one shared physical page; groups are spread round-robin
    over the contexts.  Ratios are probabilities per event.
    """
    if core_count < 1:
        raise ValueError(f"core_count must be >= 1, got {core_count}")
    if event_count < 0:
        raise ValueError(f"event_count must be >= 0, got {event_count}")
    if synonym_page_groups < 0:
        raise ValueError(f"synonym_page_groups must be >= 0, got {synonym_page_groups}")
    for name, ratio in (("write_ratio", write_ratio),
                        ("context_switch_ratio", context_switch_ratio)):
        if not 0.0 <= ratio <= 1.0:
            raise ValueError(f"{name} must be within [0, 1], got {ratio}")

    g = derive_geometry(config)
    rng = random.Random(seed)
    ctx_count = 2 if context_switch_ratio > 0 else 1
    group_size = max(2, min(1 << g.k, 4))
    group_stride = 1 << max(g.k, group_size.bit_length())
    vpn_limit = 1 << (g.va_width - g.page_bits)

    table = PageTable()
    group_pages: list = [[] for _ in range(ctx_count)]  # ctx -> [(vpn list, ppn)]
    next_ppn = 0
    for group in range(synonym_page_groups):
        ctx = group % ctx_count
        base_vpn = (group + 1) * group_stride
        members = []
        for member in range(group_size):
            vpn = base_vpn + member
            if vpn >= vpn_limit:
                raise ValueError(
                    f"synonym_page_groups {synonym_page_groups} does not fit the "
                    f"{g.va_width}-bit virtual address space")
            table.map_page(ctx, vpn, next_ppn)
            members.append(vpn)
        group_pages[ctx].append(members)
        next_ppn += 1

    private_pages: list = [[] for _ in range(ctx_count)]
    private_base = vpn_limit // 2
    for ctx in range(ctx_count):
        for i in range(_PRIVATE_PAGES_PER_CTX):
            vpn = private_base + ctx * _PRIVATE_PAGES_PER_CTX + i
            if vpn >= vpn_limit:
                raise ValueError(f"va_width {g.va_width} too small for the generated page set")
            table.map_page(ctx, vpn, next_ppn)
            private_pages[ctx].append(vpn)
            next_ppn += 1

    lines_per_page = g.page_size // g.line_size
    touched_lines = min(_LINES_TOUCHED_PER_PAGE, lines_per_page)
    words_per_line = g.line_size // 4

    # Temporal locality: each core works mostly inside its own small hot set
    # of pages, re-rolled periodically and on context switches.  Synonym
    # group traffic and cold picks provide the sharing and the pressure.
    all_pages = [
        [vpn for members in group_pages[ctx] for vpn in members] + private_pages[ctx]
        for ctx in range(ctx_count)
    ]

    def pick_hot(ctx: int):
        pages = all_pages[ctx]
        return rng.sample(pages, min(_HOT_PAGE_COUNT, len(pages)))

    current_ctx = [0] * core_count
    hot_pages = [pick_hot(0) for _ in range(core_count)]
    events = []
    for n in range(event_count):
        if n % _HOT_REFRESH_PERIOD == 0 and n:
            hot_pages = [pick_hot(current_ctx[core]) for core in range(core_count)]
        core = rng.randrange(core_count)
        if ctx_count > 1 and rng.random() < context_switch_ratio:
            new_ctx = (current_ctx[core] + 1) % ctx_count
            current_ctx[core] = new_ctx
            hot_pages[core] = pick_hot(new_ctx)
            events.append(ContextSwitch(core, new_ctx))
            continue
        ctx = current_ctx[core]
        groups = group_pages[ctx]
        if groups and rng.random() < _SYNONYM_ACCESS_BIAS:
            vpn = rng.choice(rng.choice(groups))
        elif rng.random() < _HOT_PAGE_BIAS:
            vpn = rng.choice(hot_pages[core])
        else:
            vpn = rng.choice(all_pages[ctx])
        line = rng.randrange(touched_lines)
        word = rng.randrange(words_per_line)
        vaddr = (vpn << g.page_bits) | (line * g.line_size) | (word * 4)
        if rng.random() < write_ratio:
            events.append(Write(core, ctx, vaddr, rng.getrandbits(32)))
        else:
            events.append(Read(core, ctx, vaddr))
    return events, table
