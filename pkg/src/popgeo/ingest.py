"""Parsing and aggregation of the measured interface graph.

Inputs are pre-decomposed one-hop delay observations (`src_ip,dst_ip,delay_ms`
CSV) and an IP-to-AS prefix table (`prefix/len,asn` CSV). Observations are
aggregated into directed edges carrying the exact median delay and the
measurement count.
"""

import ipaddress
import logging
from collections import defaultdict
from dataclasses import dataclass, replace
from statistics import median
from typing import Iterable, Optional

from .iputil import ip_to_int

log = logging.getLogger(__name__)

DEFAULT_ERROR_CAP = 100


class ParseError(ValueError):
    """More malformed input records than the caller allows.

    Carries the accumulated (line_number, message) pairs in ``errors``.
    """

    def __init__(self, message: str, errors: Optional[list] = None):
        super().__init__(message)
        self.errors = list(errors or [])


@dataclass(frozen=True)
class DelayObservation:
    """One measured one-hop delay for the directed link src -> dst."""

    src: str
    dst: str
    delay_ms: float

    def __post_init__(self):
        ip_to_int(self.src)
        ip_to_int(self.dst)
        if self.src == self.dst:
            raise ValueError(f"self-loop observation {self.src}")
        if self.delay_ms < 0:
            raise ValueError(f"negative delay {self.delay_ms}")


@dataclass(frozen=True)
class DelayEdge:
    """Aggregate of all observations for one directed (src, dst) pair.

    median_delay_ms is the exact median of the observed delays (mean of the
    middle pair for even counts); as_src/as_dst are None until annotated.
    """

    src: str
    dst: str
    median_delay_ms: float
    count: int
    as_src: Optional[int] = None
    as_dst: Optional[int] = None


def _data_lines(lines: Iterable[str]):
    """Yield (line_number, stripped_text) for non-empty, non-comment lines."""
    for lineno, raw in enumerate(lines, 1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        yield lineno, text


def parse_observations(lines: Iterable[str], max_errors: int = DEFAULT_ERROR_CAP) -> list[DelayObservation]:
    """Parse `src_ip,dst_ip,delay_ms` lines into observations, in input order.

    Malformed lines are skipped and logged with their line number; once more
    than max_errors lines have failed the whole parse aborts with ParseError.
    """
    out = []
    errors = []
    for lineno, text in _data_lines(lines):
        try:
            fields = text.split(",")
            if len(fields) != 3:
                raise ValueError(f"expected 3 fields, got {len(fields)}")
            out.append(DelayObservation(fields[0].strip(), fields[1].strip(), float(fields[2])))
        except ValueError as exc:
            errors.append((lineno, str(exc)))
            if len(errors) > max_errors:
                raise ParseError(
                    f"aborting after {len(errors)} malformed observation lines (cap {max_errors})",
                    errors,
                ) from exc
    for lineno, msg in errors:
        log.warning("observation line %d skipped: %s", lineno, msg)
    return out


def aggregate_edges(observations: list[DelayObservation]) -> list[DelayEdge]:
    """Collapse observations into one edge per distinct ordered (src, dst) pair.

    Output is sorted by numeric (src, dst) so downstream results are
    reproducible regardless of observation order.
    """
    delays = defaultdict(list)
    for ob in observations:
        delays[(ob.src, ob.dst)].append(ob.delay_ms)
    edges = [
        DelayEdge(src, dst, float(median(vals)), len(vals))
        for (src, dst), vals in delays.items()
    ]
    edges.sort(key=lambda e: (ip_to_int(e.src), ip_to_int(e.dst)))
    return edges


class PrefixMap:
    """Longest-prefix-match table from CIDR prefixes to AS numbers.

    Unmatched addresses resolve to None (unknown AS). Duplicate prefixes keep
    the last entry.
    """

    def __init__(self, entries: Iterable[tuple[ipaddress.IPv4Network, int]]):
        self._by_len: dict[int, dict[int, int]] = {}
        for net, asn in entries:
            self._by_len.setdefault(net.prefixlen, {})[int(net.network_address)] = asn
        self._lens = sorted(self._by_len, reverse=True)

    def __len__(self) -> int:
        return sum(len(d) for d in self._by_len.values())

    def lookup(self, ip: str) -> Optional[int]:
        value = ip_to_int(ip)
        for plen in self._lens:
            mask = (0xFFFFFFFF << (32 - plen)) & 0xFFFFFFFF
            asn = self._by_len[plen].get(value & mask)
            if asn is not None:
                return asn
        return None


def load_ip2as(lines: Iterable[str], max_errors: int = DEFAULT_ERROR_CAP) -> PrefixMap:
    """Parse `prefix/len,asn` lines into a PrefixMap.

    Malformed lines are skipped and logged, subject to the same error cap as
    parse_observations.
    """
    entries = []
    errors = []
    for lineno, text in _data_lines(lines):
        try:
            fields = text.split(",")
            if len(fields) != 2:
                raise ValueError(f"expected 2 fields, got {len(fields)}")
            net = ipaddress.ip_network(fields[0].strip())
            if not isinstance(net, ipaddress.IPv4Network):
                raise ValueError(f"not an IPv4 prefix: {fields[0]}")
            entries.append((net, int(fields[1])))
        except ValueError as exc:
            errors.append((lineno, str(exc)))
            if len(errors) > max_errors:
                raise ParseError(
                    f"aborting after {len(errors)} malformed ip2as lines (cap {max_errors})",
                    errors,
                ) from exc
    for lineno, msg in errors:
        log.warning("ip2as line %d skipped: %s", lineno, msg)
    return PrefixMap(entries)


def annotate_as(edges: list[DelayEdge], prefix_map: PrefixMap) -> list[DelayEdge]:
    """Fill as_src/as_dst on every edge from the prefix map."""
    return [
        replace(e, as_src=prefix_map.lookup(e.src), as_dst=prefix_map.lookup(e.dst))
        for e in edges
    ]
