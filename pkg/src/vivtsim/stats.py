"""Run statistics: per-core counters plus queue-depth bookkeeping.

total_cycles covers everything a core spends time on: one cycle per access
(hits are served at one per cycle), the translate-plus-fetch penalty of
each miss, one extra cycle on write hits when more than one synonym may be
resident (the reverse-table lookup), one cycle per drained external
invalidation, and one per context-switch flush.
"""

import io
import csv
from dataclasses import dataclass, field, fields


@dataclass
class CoreStats:
    read_hits: int = 0
    read_misses: int = 0
    write_hits: int = 0
    write_misses: int = 0
    synonym_evictions: int = 0
    displacement_invalidations: int = 0
    snoop_invalidations_applied: int = 0
    stale_invalidation_noops: int = 0
    snoop_lookups: int = 0
    flushes: int = 0
    translation_faults: int = 0
    total_cycles: int = 0

    @property
    def hits(self) -> int:
        return self.read_hits + self.write_hits

    @property
    def misses(self) -> int:
        return self.read_misses + self.write_misses

    @property
    def accesses(self) -> int:
        return self.hits + self.misses

    @property
    def hit_ratio(self) -> float:
        return self.hits / self.accesses if self.accesses else 0.0


@dataclass
class SimStats:
    cores: list = field(default_factory=list)
    max_invalidate_queue_depth: int = 0

    def totals(self) -> CoreStats:
        agg = CoreStats()
        for core in self.cores:
            for f in fields(CoreStats):
                setattr(agg, f.name, getattr(agg, f.name) + getattr(core, f.name))
        return agg


COUNTER_FIELDS = [f.name for f in fields(CoreStats)]
CSV_FIELDS = ["core"] + COUNTER_FIELDS + ["hit_ratio", "max_invalidate_queue_depth"]


def stats_rows(stats: SimStats) -> list:
    rows = []
    for index, core in enumerate(stats.cores):
        row = {"core": index}
        for name in COUNTER_FIELDS:
            row[name] = getattr(core, name)
        row["hit_ratio"] = core.hit_ratio
        row["max_invalidate_queue_depth"] = stats.max_invalidate_queue_depth
        rows.append(row)
    return rows


def render_csv(stats: SimStats) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in stats_rows(stats):
        row = dict(row)
        row["hit_ratio"] = f"{row['hit_ratio']:.6f}"
        writer.writerow(row)
    return out.getvalue()


def render_table(stats: SimStats) -> str:
    lines = []
    for index, core in enumerate(stats.cores):
        lines.append(f"core {index}:")
        for name in COUNTER_FIELDS:
            lines.append(f"  {name:<28} {getattr(core, name)}")
        lines.append(f"  {'hit_ratio':<28} {core.hit_ratio:.6f}")
    lines.append(f"max_invalidate_queue_depth     {stats.max_invalidate_queue_depth}")
    return "\n".join(lines) + "\n"


def report(stats: SimStats, csv_form: bool = False) -> str:
    return render_csv(stats) if csv_form else render_table(stats)
