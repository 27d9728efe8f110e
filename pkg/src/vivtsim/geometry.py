"""Address arithmetic for virtually indexed, virtually tagged (VIVT) caches.

Everything downstream (the cache array, the reverse lookup table, the
translation path, the invariant checker) works on bit fields computed here
once per configuration.

Bit layout for the default configuration (32 KB direct-mapped cache,
64-byte lines, 4 KB pages, 32-bit virtual / 36-bit physical addresses):

    virtual address
        [31:15]  tag, compared on lookup
        [14:6]   set index
        [14:12]  synonym bits: the slice of the set index above the page offset
        [11:0]   page offset, preserved by translation
        [5:0]    byte offset within the line

    physical address
        [35:12]  reverse-table tag
        [11:6]   reverse-table set index (the line-within-page bits)

Since a virtual address and its translation agree on the page offset, the
set index of a cached line is fully determined by the line's synonym bits
plus the line-within-page bits of the physical address.  That observation
fixes both the reverse-table shape (one set per line-within-page value,
one way per synonym-bit value) and the width of its per-synonym payload.
"""

from dataclasses import dataclass


class ConfigError(ValueError):
    """Invalid cache configuration; the message names the offending field."""


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class CacheConfig:
    """User-facing knobs; defaults are the reference 32 KB configuration."""

    cache_size: int = 32 * 1024
    line_size: int = 64
    assoc_log2: int = 0
    page_size: int = 4096
    va_width: int = 32
    pa_width: int = 36
    synonym_limit: int = 1


DEFAULT_CONFIG = CacheConfig()


@dataclass(frozen=True)
class Geometry:
    """Every bit position and mask derived from a validated CacheConfig."""

    cache_size: int
    line_size: int
    line_bits: int
    page_size: int
    page_bits: int
    va_width: int
    pa_width: int
    assoc_log2: int
    ways: int
    set_count: int
    set_index_width: int
    set_index_low: int
    set_index_high: int
    k: int
    synonym_problem: bool
    rlut_sets: int
    rlut_ways: int
    rlut_index_low: int
    rlut_index_high: int
    rlut_tag_low: int
    rlut_tag_high: int
    va_mask: int
    pa_mask: int
    line_mask: int
    page_mask: int
    set_mask: int
    offset_class_mask: int
    synonym_mask: int

    @property
    def total_lines(self) -> int:
        return self.set_count * self.ways

    def vivt_index(self, vaddr: int) -> int:
        """Set index of a virtual address: bits [set_index_high:line_bits]."""
        return ((vaddr & self.va_mask) >> self.line_bits) & self.set_mask

    def vtag(self, vaddr: int) -> int:
        """Virtual tag: every bit above the set index."""
        return (vaddr & self.va_mask) >> (self.set_index_high + 1)

    def rlut_index(self, paddr: int) -> int:
        """Reverse-table set index: bits [page_bits-1:line_bits] of a physical address."""
        return ((paddr & self.pa_mask) >> self.line_bits) & self.offset_class_mask

    def rlut_tag(self, paddr: int) -> int:
        """Reverse-table tag: physical bits above the page offset."""
        return (paddr & self.pa_mask) >> self.page_bits

    def intra_page_offset(self, addr: int) -> int:
        return addr & self.page_mask

    def synonym_bits(self, vaddr: int) -> int:
        """The k virtual bits just above the page offset."""
        return ((vaddr & self.va_mask) >> self.page_bits) & self.synonym_mask

    def page_upper_bits(self, vaddr: int) -> int:
        """All virtual bits above the page offset (the page number)."""
        return (vaddr & self.va_mask) >> self.page_bits

    def offset_class(self, addr: int) -> int:
        """Line-within-page index; identical for an address and its translation."""
        return (addr >> self.line_bits) & self.offset_class_mask

    def line_address(self, paddr: int) -> int:
        return (paddr & self.pa_mask) & ~self.line_mask

    def vaddr_of_line(self, set_index: int, vtag: int) -> int:
        """Base virtual address of the line stored at (set_index, vtag)."""
        return (vtag << (self.set_index_high + 1)) | (set_index << self.line_bits)

    def line_index_for(self, stored_bits: int, paddr: int) -> int:
        """Rebuild a set index from a stored synonym payload plus the physical
        line-within-page bits.  `stored_bits` is the synonym-bit payload for
        direct-mapped caches and the full page-upper payload otherwise."""
        hi = stored_bits & self.synonym_mask
        return ((hi << (self.page_bits - self.line_bits)) | self.rlut_index(paddr)) & self.set_mask

    def vtag_for(self, page_upper: int, paddr: int) -> int:
        """Rebuild a virtual tag from a stored page-upper payload.  When the set
        index ends below the page boundary the missing tag bits are recovered
        from the physical page offset (equal to the virtual one)."""
        shift = self.set_index_high + 1 - self.page_bits
        if shift >= 0:
            return page_upper >> shift
        return (page_upper << -shift) | ((paddr & self.page_mask) >> (self.set_index_high + 1))


def derive_geometry(config: CacheConfig) -> Geometry:
    """Validate a configuration and compute its bit-field layout.

    Raises ConfigError naming the offending field for anything out of range.
    """
    for name in ("cache_size", "line_size", "page_size"):
        value = getattr(config, name)
        if not _is_pow2(value):
            raise ConfigError(f"{name} must be a power of two, got {value}")
    if config.line_size < 4:
        raise ConfigError(f"line_size must be at least one 4-byte word, got {config.line_size}")
    if config.line_size > config.page_size:
        raise ConfigError(
            f"line_size {config.line_size} exceeds page_size {config.page_size}")
    if config.page_size > config.cache_size:
        raise ConfigError(
            f"page_size {config.page_size} exceeds cache_size {config.cache_size}")
    if config.assoc_log2 < 0:
        raise ConfigError(f"assoc_log2 must be >= 0, got {config.assoc_log2}")
    total_lines = config.cache_size // config.line_size
    if (1 << config.assoc_log2) > total_lines:
        raise ConfigError(
            f"assoc_log2 {config.assoc_log2} exceeds the {total_lines}-line capacity")
    if config.va_width <= 0 or config.va_width > config.pa_width:
        raise ConfigError(
            f"va_width {config.va_width} must be positive and <= pa_width {config.pa_width}")
    if config.synonym_limit < 1:
        raise ConfigError(f"synonym_limit must be >= 1, got {config.synonym_limit}")

    line_bits = config.line_size.bit_length() - 1
    page_bits = config.page_size.bit_length() - 1
    ways = 1 << config.assoc_log2
    set_count = total_lines // ways
    set_index_width = set_count.bit_length() - 1
    set_index_low = line_bits
    set_index_high = line_bits + set_index_width - 1
    if set_index_high + 1 > config.va_width:
        raise ConfigError(
            f"va_width {config.va_width} too narrow for cache_size {config.cache_size}")
    if page_bits > config.va_width:
        raise ConfigError(
            f"va_width {config.va_width} too narrow for page_size {config.page_size}")

    k_raw = set_index_high + 1 - page_bits
    k = max(0, k_raw)
    rlut_sets = config.page_size // config.line_size

    return Geometry(
        cache_size=config.cache_size,
        line_size=config.line_size,
        line_bits=line_bits,
        page_size=config.page_size,
        page_bits=page_bits,
        va_width=config.va_width,
        pa_width=config.pa_width,
        assoc_log2=config.assoc_log2,
        ways=ways,
        set_count=set_count,
        set_index_width=set_index_width,
        set_index_low=set_index_low,
        set_index_high=set_index_high,
        k=k,
        synonym_problem=k_raw > 0,
        rlut_sets=rlut_sets,
        rlut_ways=1 << k,
        rlut_index_low=line_bits,
        rlut_index_high=page_bits - 1,
        rlut_tag_low=page_bits,
        rlut_tag_high=config.pa_width - 1,
        va_mask=(1 << config.va_width) - 1,
        pa_mask=(1 << config.pa_width) - 1,
        line_mask=config.line_size - 1,
        page_mask=config.page_size - 1,
        set_mask=set_count - 1,
        offset_class_mask=rlut_sets - 1,
        synonym_mask=(1 << k) - 1,
    )
