"""Multi-core controller tests: snoop application rules, FIFO invalidation
queues, the no-miss-pending sampling rule, and quiescent coherence."""

import dataclasses

from vivtsim import (ContextSwitch, ControllerState, DEFAULT_CONFIG, MemorySystem,
                     PageTable, Read, Write, check_invariants)


def make_system(core_count=2, synonym_limit=1, assoc_log2=0, table=None):
    cfg = dataclasses.replace(DEFAULT_CONFIG, synonym_limit=synonym_limit,
                              assoc_log2=assoc_log2)
    if table is None:
        table = PageTable(identity=True)
    return MemorySystem(cfg, table, core_count=core_count)


def synonym_table():
    # Two virtual pages with distinct synonym bits aliasing one physical page.
    table = PageTable()
    table.map_page(0, 0x10, 0x5)
    table.map_page(0, 0x11, 0x5)
    return table, 0x10 << 12, 0x11 << 12


class TestControllerStep:
    def test_hit_costs_one_cycle_and_stays_ready(self):
        system = make_system(core_count=1)
        system.controller_step(0, Read(0, 0, 0x1000))
        result = system.controller_step(0, Read(0, 0, 0x1000))
        assert result.hit and result.cycles == 1
        assert system.cores[0].state is ControllerState.READY
        assert system.cores[0].stats.read_hits == 1

    def test_context_switch_flushes(self):
        system = make_system(core_count=1)
        system.controller_step(0, Read(0, 0, 0x1000))
        system.controller_step(0, ContextSwitch(0, 1))
        assert system.cores[0].ctx == 1
        assert system.cores[0].cache.valid_line_count() == 0
        assert system.cores[0].stats.flushes == 1

    def test_faulting_access_is_counted_and_skipped(self):
        system = make_system(core_count=1, table=PageTable(identity=False))
        result = system.controller_step(0, Read(0, 0, 0x1000))
        assert result.fault
        assert system.cores[0].stats.translation_faults == 1
        assert system.cores[0].stats.read_misses == 0
        assert system.cores[0].cache.valid_line_count() == 0


class TestCoherentWrite:
    def test_single_core_sends_no_messages(self):
        system = make_system(core_count=1)
        system.controller_step(0, Write(0, 0, 0x1000, 0xAA))
        assert system.max_invalidate_queue_depth == 0

    def test_four_cores_get_three_messages(self):
        system = make_system(core_count=4)
        system.coherent_write(2, 0x5000, 0xBB)
        lengths = [len(core.invalidate_queue) for core in system.cores]
        assert lengths == [1, 1, 0, 1]
        assert system.memory.read_word(0x5000) == 0xBB

    def test_fifo_order_preserved(self):
        system = make_system(core_count=2)
        system.coherent_write(0, 0x1000, 1)
        system.coherent_write(0, 0x2000, 2)
        queue = list(system.cores[1].invalidate_queue)
        assert queue == [0x1000, 0x2000]

    def test_external_invalidate_reaches_every_core(self):
        system = make_system(core_count=3)
        system.external_invalidate(0x1040)
        assert all(list(core.invalidate_queue) == [0x1040] for core in system.cores)

    def test_max_queue_depth_tracked(self):
        system = make_system(core_count=2)
        for n in range(5):
            system.coherent_write(0, 0x1000 + 64 * n, n)
        assert system.max_invalidate_queue_depth == 5


class TestSnoopInvalidate:
    def test_empty_table_clears_nothing(self):
        system = make_system()
        assert system.apply_snoop_invalidate(0x4000, 0) == 0

    def test_resident_synonym_cleared_then_rereads_miss(self):
        system = make_system(core_count=1)
        system.controller_step(0, Read(0, 0, 0x7040))
        assert system.apply_snoop_invalidate(0x7040, 0) == 1
        result = system.controller_step(0, Read(0, 0, 0x7040))
        assert result.hit is False

    def test_stale_record_after_conflict_is_noop(self):
        # Two-way cache: enough same-set fills displace the tracked line, and
        # the tag carried with the reconstruction detects the staleness.
        system = make_system(core_count=1, assoc_log2=1)
        g = system.geometry
        v1 = 0x0100_1040
        same_set = [0x0200_0000 | (v1 & 0x3FFF), 0x0300_0000 | (v1 & 0x3FFF)]
        system.controller_step(0, Read(0, 0, v1))
        for vaddr in same_set:
            assert g.vivt_index(vaddr) == g.vivt_index(v1)
            system.controller_step(0, Read(0, 0, vaddr))
        hit, _ = system.cores[0].cache.hit_check_and_access(False, v1)
        assert not hit, "conflict fills should have displaced the first line"
        assert system.apply_snoop_invalidate(system.mmu.translate(0, v1), 0) == 0

    def test_drain_accounts_one_cycle_per_message(self):
        system = make_system(core_count=2)
        system.controller_step(1, Read(1, 0, 0x9000))
        for n in range(4):
            system.coherent_write(0, 0x8000 + 64 * n, n)
        before = system.cores[1].stats.total_cycles
        system.drain_invalidates(1)
        stats = system.cores[1].stats
        assert stats.total_cycles - before == 4
        assert stats.snoop_lookups == 4
        assert stats.snoop_invalidations_applied == 0
        assert stats.stale_invalidation_noops == 4


class TestMissRace:
    def test_invalidate_arriving_mid_miss_waits_for_the_fill(self):
        table, v1, v2 = synonym_table()
        system = make_system(core_count=2, synonym_limit=1, table=table)
        paddr = system.mmu.translate(0, v1)

        system.controller_step(0, Read(0, 0, v1))
        system.controller_step(1, Write(1, 0, v1, 0xCAFE0001))
        assert list(system.cores[0].invalidate_queue) == [paddr & ~0x3F]

        observed = []

        def hook(core_index, phase):
            if core_index == 0 and phase == "await-line":
                system.enqueue_invalidate(0, paddr)
                observed.append((system.cores[0].state,
                                 len(system.cores[0].invalidate_queue),
                                 system.cores[0].cache.valid_line_count()))

        system.miss_phase_hook = hook
        result = system.controller_step(0, Read(0, 0, v2))
        system.miss_phase_hook = None

        # The pre-existing message drained before the access; the mid-miss one
        # stayed buffered while the miss was pending.
        state, depth, _ = observed[0]
        assert state is ControllerState.MISS_PENDING_AWAIT_LINE
        assert depth == 1
        assert result.value == 0xCAFE0001, "fill must fetch the written data"
        hit, _ = system.cores[0].cache.hit_check_and_access(False, v2)
        assert hit, "mid-miss invalidate must not be applied before the fill"

        # Once ready again, the drain removes the just-filled copy: no stale
        # line survives even though it was installed after the message.
        system.drain_invalidates(0)
        assert system.cores[0].cache.valid_line_count() == 0
        assert system.cores[0].stats.snoop_invalidations_applied == 2

    def test_quiescent_state_is_coherent(self):
        table, v1, v2 = synonym_table()
        system = make_system(core_count=2, synonym_limit=1, table=table)
        system.controller_step(0, Read(0, 0, v1))
        system.controller_step(1, Read(1, 0, v2))
        system.controller_step(1, Write(1, 0, v2, 0x1111))
        system.controller_step(0, Write(0, 0, v1, 0x2222))
        system.drain_all()
        assert check_invariants(system) == []
        for core in system.cores:
            for set_index, vtag, data in core.cache.valid_lines():
                vaddr = system.geometry.vaddr_of_line(set_index, vtag)
                paddr = system.mmu.translate(core.ctx, vaddr)
                assert bytes(data) == system.memory.fetch_line(paddr)


class TestWriteHitWithMultipleSynonyms:
    def test_sibling_synonyms_invalidated_on_write_hit(self):
        table, v1, v2 = synonym_table()
        system = make_system(core_count=1, synonym_limit=2, table=table)
        system.controller_step(0, Read(0, 0, v1))
        system.controller_step(0, Read(0, 0, v2))
        assert system.cores[0].cache.valid_line_count() == 2

        result = system.controller_step(0, Write(0, 0, v1, 0x3333))
        assert result.hit and result.cycles == 2
        assert system.cores[0].stats.synonym_evictions == 1
        hit, _ = system.cores[0].cache.hit_check_and_access(False, v2)
        assert not hit, "the other synonym held stale data"
        result = system.controller_step(0, Read(0, 0, v2))
        assert result.hit is False and result.value == 0x3333

    def test_single_synonym_write_hit_stays_one_cycle(self):
        system = make_system(core_count=1, synonym_limit=1)
        system.controller_step(0, Read(0, 0, 0x4000))
        result = system.controller_step(0, Write(0, 0, 0x4000, 0x9))
        assert result.hit and result.cycles == 1
