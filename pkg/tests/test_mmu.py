"""Translation and miss-path tests: page-table parsing, offset preservation,
synonym-limit maintenance (brute-forced on a toy geometry), fault purity,
and cycle accounting."""

import dataclasses
import itertools

import pytest
from hypothesis import given, strategies as st

from vivtsim import (CacheConfig, FlatMemory, Mmu, PageTable, PageTableError,
                     Rlut, TranslationFault, VivtCache, derive_geometry,
                     dump_page_table, load_page_table)
from vivtsim.geometry import DEFAULT_CONFIG

# 16-line toy: 16 B lines, 64 B pages, 2 synonym bits (VPN low bits).
TOY = CacheConfig(cache_size=256, line_size=16, assoc_log2=0, page_size=64,
                  va_width=10, pa_width=12, synonym_limit=1)


def make_parts(config=TOY, identity=False, translate_latency=2, fetch_latency=8):
    g = derive_geometry(config)
    table = PageTable(identity=identity)
    mmu = Mmu(g, table, translate_latency, fetch_latency)
    return g, table, mmu, VivtCache(g), Rlut(g, config.synonym_limit), FlatMemory(g.line_size)


class TestTranslate:
    def test_identity(self):
        g, table, mmu, *_ = make_parts(DEFAULT_CONFIG, identity=True)
        assert mmu.translate(0, 0x1234_5678) == 0x0_1234_5678

    def test_mapped_page_preserves_offset(self):
        g, table, mmu, *_ = make_parts(DEFAULT_CONFIG)
        table.map_page(3, 0x2, 0x5)
        assert mmu.translate(3, 0x0000_2040) == 0x0_0000_5040

    def test_unmapped_faults(self):
        g, table, mmu, *_ = make_parts(DEFAULT_CONFIG)
        with pytest.raises(TranslationFault):
            mmu.translate(0, 0x2040)

    @given(st.integers(min_value=0, max_value=(1 << 32) - 1),
           st.integers(min_value=0, max_value=(1 << 24) - 1))
    def test_offset_preservation(self, vaddr, ppn):
        g, table, mmu, *_ = make_parts(DEFAULT_CONFIG)
        table.map_page(0, vaddr >> g.page_bits, ppn)
        paddr = mmu.translate(0, vaddr)
        assert g.intra_page_offset(paddr) == g.intra_page_offset(vaddr)


class TestPageTableFile:
    def test_identity_header_only(self):
        table = load_page_table("identity on\n")
        assert table.lookup(0, 0x123) == 0x123

    def test_single_mapping(self):
        table = load_page_table("0 0x2 0x5\n")
        assert table.lookup(0, 0x2) == 0x5
        assert table.lookup(0, 0x3) is None

    def test_comments_and_blank_lines(self):
        table = load_page_table("# header comment\n\n0 0x2 0x5  # trailing\n")
        assert table.lookup(0, 0x2) == 0x5

    def test_duplicate_mapping_rejected(self):
        with pytest.raises(PageTableError, match="line 2"):
            load_page_table("0 0x2 0x5\n0 0x2 0x6\n")

    def test_malformed_line_reports_number(self):
        with pytest.raises(PageTableError, match="line 3"):
            load_page_table("identity off\n0 0x2 0x5\n0 zz 0x6\n")

    def test_roundtrip(self):
        table = PageTable(identity=True)
        table.map_page(0, 0x2, 0x5)
        table.map_page(1, 0x7, 0x9)
        parsed = load_page_table(dump_page_table(table))
        assert parsed.default_identity
        assert sorted(parsed.mappings()) == sorted(table.mappings())


def synonyms_of(g, table, ctx, paddr):
    """Resident virtual lines translating to paddr's line, via the table."""
    return lambda cache: sorted(
        g.vaddr_of_line(set_index, vtag)
        for set_index, vtag, _ in cache.valid_lines()
        if _translates_to(g, table, ctx, g.vaddr_of_line(set_index, vtag), paddr)
    )


def _translates_to(g, table, ctx, vaddr, paddr):
    ppn = table.lookup(ctx, vaddr >> g.page_bits)
    if ppn is None:
        return False
    p = ((ppn << g.page_bits) | (vaddr & g.page_mask)) & g.pa_mask
    return g.line_address(p) == g.line_address(paddr)


class TestHandleMiss:
    def test_cold_miss(self):
        g, table, mmu, cache, rlut, memory = make_parts(identity=True)
        result = mmu.handle_miss(False, 0, 0x90, None, rlut, cache, memory)
        assert result.invalidations_issued == []
        assert result.cycles == 2 + 8
        assert [rec.line_index for rec in rlut.lookup(result.paddr)] == [g.vivt_index(0x90)]
        hit, _ = cache.hit_check_and_access(False, 0x90)
        assert hit

    def test_rlut_insert_cycles_absorbed_by_fetch(self):
        g, table, mmu, cache, rlut, memory = make_parts(identity=True, fetch_latency=1)
        result = mmu.handle_miss(False, 0, 0x90, None, rlut, cache, memory)
        assert result.cycles == 2 + 2  # two-cycle table update dominates a 1-cycle fetch

    def test_read_miss_evicts_single_synonym(self):
        g, table, mmu, cache, rlut, memory = make_parts()
        table.map_page(0, 0b0000, 0x8)
        table.map_page(0, 0b0001, 0x8)
        v1, v2 = 0b0000 << g.page_bits, 0b0001 << g.page_bits
        mmu.handle_miss(False, 0, v1, None, rlut, cache, memory)
        paddr = mmu.translate(0, v1)

        # The displaced synonym is gone before the new line lands.
        seen = {}

        def on_phase(phase):
            seen[phase] = synonyms_of(g, table, 0, paddr)(cache)

        result = mmu.handle_miss(False, 0, v2, None, rlut, cache, memory,
                                 on_phase=on_phase)
        assert result.invalidations_issued == [g.vivt_index(v1)]
        assert result.synonym_cleared == 1
        assert seen["await-line"] == []
        assert synonyms_of(g, table, 0, paddr)(cache) == [v2]

    def test_write_miss_purges_all_synonyms_brute_force(self):
        # Enumerate every ordered way <= limit prior synonyms can be resident,
        # then write-miss a fresh one: only the writer survives for that line.
        limit = 2
        cfg = dataclasses.replace(TOY, synonym_limit=limit)
        pool_vpns = [0b0000, 0b0001, 0b0010, 0b0011]  # distinct synonym bits
        for count in range(limit + 1):
            for prior in itertools.permutations(pool_vpns[:3], count):
                g, table, mmu, cache, rlut, memory = make_parts(cfg)
                for vpn in pool_vpns:
                    table.map_page(0, vpn, 0x8)
                writer_vpn = next(v for v in pool_vpns if v not in prior)
                for vpn in prior:
                    mmu.handle_miss(False, 0, vpn << g.page_bits, None, rlut, cache, memory)
                writer = writer_vpn << g.page_bits
                result = mmu.handle_miss(True, 0, writer, 0xABCD0123, rlut, cache, memory)
                paddr = mmu.translate(0, writer)
                assert synonyms_of(g, table, 0, paddr)(cache) == [writer], \
                    f"prior={prior} writer={writer_vpn}"
                assert result.synonym_cleared == len(prior)
                assert memory.read_word(paddr) == 0xABCD0123

    def test_read_miss_keeps_other_synonyms_within_limit(self):
        cfg = dataclasses.replace(TOY, synonym_limit=2)
        g, table, mmu, cache, rlut, memory = make_parts(cfg)
        for vpn in (0b0000, 0b0001, 0b0010):
            table.map_page(0, vpn, 0x8)
        v1, v2 = 0b0000 << g.page_bits, 0b0001 << g.page_bits
        mmu.handle_miss(False, 0, v1, None, rlut, cache, memory)
        result = mmu.handle_miss(False, 0, v2, None, rlut, cache, memory)
        assert result.synonym_cleared == 0
        paddr = mmu.translate(0, v1)
        assert synonyms_of(g, table, 0, paddr)(cache) == sorted([v1, v2])

    def test_write_through_lands_before_fill(self):
        g, table, mmu, cache, rlut, memory = make_parts(identity=True)
        vaddr = 0x90
        result = mmu.handle_miss(True, 0, vaddr, 0x11223344, rlut, cache, memory)
        hit, value = cache.hit_check_and_access(False, vaddr)
        assert hit and value == 0x11223344
        assert memory.read_word(result.paddr) == 0x11223344

    def test_fault_leaves_state_untouched(self):
        g, table, mmu, cache, rlut, memory = make_parts(identity=False)
        table.map_page(0, 0b0001, 0x8)
        mmu.handle_miss(False, 0, 0b0001 << g.page_bits, None, rlut, cache, memory)
        cache_before = list(cache.valid_lines())
        rlut_before = list(rlut.entries())
        memory_before = memory.snapshot()
        with pytest.raises(TranslationFault):
            mmu.handle_miss(True, 0, 0b0111 << g.page_bits, 0x1, rlut, cache, memory)
        assert list(cache.valid_lines()) == cache_before
        assert list(rlut.entries()) == rlut_before
        assert memory.snapshot() == memory_before
