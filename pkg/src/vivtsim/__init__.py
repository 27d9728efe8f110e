"""Trace-driven simulator for synonym-safe, coherent VIVT caches.

A per-core reverse lookup table maps physical lines back to the virtual
lines caching them, which bounds the number of resident synonyms per
physical address and gives snoop invalidations something to aim at.
"""

from .cache import VivtCache, WORD_BYTES
from .coherence import AccessResult, ControllerState, FlatMemory, MemorySystem
from .geometry import CacheConfig, ConfigError, DEFAULT_CONFIG, Geometry, derive_geometry
from .mmu import (Mmu, MissResult, PageTable, PageTableError, TranslationFault,
                  dump_page_table, load_page_table)
from .rlut import InvalidationPlan, Rlut, SynonymRecord, bytes_needed
from .sim import InvariantViolationError, TraceOracle, check_invariants, run_trace
from .stats import CoreStats, SimStats, report
from .trace import (ContextSwitch, ExternalInvalidate, Read, TraceError, Write,
                    format_trace, parse_trace)
from .tracegen import generate_trace

__version__ = "0.1.0"

__all__ = [
    "AccessResult", "CacheConfig", "ConfigError", "ContextSwitch",
    "ControllerState", "CoreStats", "DEFAULT_CONFIG", "ExternalInvalidate",
    "FlatMemory", "Geometry", "InvalidationPlan", "InvariantViolationError",
    "MemorySystem", "MissResult", "Mmu", "PageTable", "PageTableError",
    "Read", "Rlut", "SimStats", "SynonymRecord", "TraceError", "TraceOracle",
    "TranslationFault", "VivtCache", "WORD_BYTES", "Write", "bytes_needed",
    "check_invariants", "derive_geometry", "dump_page_table", "format_trace",
    "generate_trace", "load_page_table", "parse_trace", "report", "run_trace",
]
