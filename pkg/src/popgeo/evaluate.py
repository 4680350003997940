"""Evaluation metrics over PoP maps and geolocation databases.

Covers null-reply accounting, per-database convergence and agreement CDFs,
per-IP deviation from the cross-database majority location, pairwise database
correlation, default-location (headquarters) anomaly detection, snapshot
churn, and regional breakdowns. Everything here is deterministic and pure
over its inputs.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from statistics import StatisticsError, correlation
from typing import Iterable, Optional, Sequence

from .extract import PopMap
from .geo import GeoCoord, coordinate_median, haversine_km
from .geodb import GeoDatabase
from .ingest import ParseError, PrefixMap
from .iputil import ip_to_int
from .locate import VoteConfig, locate_pop, locate_pop_single_db


@dataclass(frozen=True)
class NullStats:
    """Share of null replies per database, at IP and at whole-PoP granularity.

    A PoP counts as null only when every one of its members gets a null
    reply. core figures ignore singleton members; all figures include them.
    Percentages are on a 0..100 scale.
    """

    db_name: str
    pct_null_ip_core: float
    pct_null_pop_core: float
    pct_null_ip_all: float
    pct_null_pop_all: float


@dataclass(frozen=True)
class CdfSeries:
    """Cumulative distribution points plus explicit leftover accounting.

    points are (x, cumulative_fraction) with strictly increasing x.
    tail_count items lie beyond the largest x (e.g. PoPs that never
    converged) and keep the final fraction below 1; excluded_count items were
    left out of the denominator entirely (e.g. all-null PoPs).
    """

    label: str
    points: tuple[tuple[float, float], ...]
    total: int
    tail_count: int = 0
    excluded_count: int = 0

    @staticmethod
    def from_values(
        label: str,
        values: Iterable[float],
        tail_count: int = 0,
        excluded_count: int = 0,
    ) -> "CdfSeries":
        ordered = sorted(values)
        total = len(ordered) + tail_count
        points = []
        seen = 0
        for i, x in enumerate(ordered):
            seen += 1
            if i + 1 < len(ordered) and ordered[i + 1] == x:
                continue
            points.append((x, seen / total))
        return CdfSeries(label, tuple(points), total, tail_count, excluded_count)

    def fraction_at_or_below(self, x: float) -> float:
        best = 0.0
        for px, frac in self.points:
            if px <= x:
                best = frac
            else:
                break
        return best

    def fraction_beyond(self, x: float) -> float:
        return 1.0 - self.fraction_at_or_below(x)

    def validate(self) -> None:
        xs = [p[0] for p in self.points]
        fracs = [p[1] for p in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError(f"{self.label}: x values not strictly increasing")
        if any(b < a for a, b in zip(fracs, fracs[1:])):
            raise ValueError(f"{self.label}: fractions decrease")
        if fracs and fracs[-1] > 1.0 + 1e-12:
            raise ValueError(f"{self.label}: final fraction above 1")
        if self.total and self.points:
            expected = (self.total - self.tail_count) / self.total
            if abs(fracs[-1] - expected) > 1e-12:
                raise ValueError(f"{self.label}: tail does not account for the remainder")


@dataclass(frozen=True)
class CorrelationMatrix:
    db_names: tuple[str, ...]
    values: tuple[tuple[Optional[float], ...], ...]
    include_nulls: bool

    def value(self, a: str, b: str) -> Optional[float]:
        i = self.db_names.index(a)
        j = self.db_names.index(b)
        return self.values[i][j]


@dataclass(frozen=True)
class AnomalyReport:
    """One AS whose answers in one database pile up on a single coordinate."""

    db_name: str
    asn: int
    dominant_coord: GeoCoord
    share: float
    ip_count: int


@dataclass(frozen=True)
class RegionSpec:
    """Named union of inclusive lat/lon bounding boxes."""

    name: str
    boxes: tuple[tuple[float, float, float, float], ...]

    def __post_init__(self):
        for lat_min, lat_max, lon_min, lon_max in self.boxes:
            if lat_min > lat_max or lon_min > lon_max:
                raise ValueError(f"region {self.name}: malformed box")

    def contains(self, coord: GeoCoord) -> bool:
        return any(
            lat_min <= coord.lat <= lat_max and lon_min <= coord.lon <= lon_max
            for lat_min, lat_max, lon_min, lon_max in self.boxes
        )


BUILTIN_REGIONS = {
    "world": RegionSpec("world", ((-90.0, 90.0, -180.0, 180.0),)),
    "europe": RegionSpec("europe", ((35.0, 72.0, -11.0, 40.0),)),
    "usa": RegionSpec("usa", ((24.0, 50.0, -125.0, -66.0),)),
}


def load_regions(lines: Iterable[str]) -> dict[str, RegionSpec]:
    """Parse `name,lat_min,lat_max,lon_min,lon_max` rows; repeated names union boxes."""
    boxes: dict[str, list] = defaultdict(list)
    for lineno, raw in enumerate(lines, 1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        fields = [f.strip() for f in text.split(",")]
        try:
            if len(fields) != 5:
                raise ValueError(f"expected 5 fields, got {len(fields)}")
            boxes[fields[0]].append(tuple(float(v) for v in fields[1:]))
        except ValueError as exc:
            raise ParseError(f"regions line {lineno}: {exc}") from exc
    return {name: RegionSpec(name, tuple(bx)) for name, bx in boxes.items()}


def _pop_members(pop, include_singletons: bool) -> list[str]:
    return sorted(pop.members(include_singletons), key=ip_to_int)


def null_stats(popmap_core: PopMap, popmap_all: PopMap, db: GeoDatabase) -> NullStats:
    """Null-reply percentages at IP and PoP level, without and with singletons."""
    if not popmap_core.pops or not popmap_all.pops:
        raise ValueError("null_stats needs non-empty PoP maps")

    def _pcts(popmap: PopMap) -> tuple[float, float]:
        total_ips = null_ips = null_pops = 0
        for pop in popmap.pops:
            members = _pop_members(pop, include_singletons=True)
            nulls = sum(1 for ip in members if db.query(ip).coord is None)
            total_ips += len(members)
            null_ips += nulls
            if nulls == len(members):
                null_pops += 1
        return 100.0 * null_ips / total_ips, 100.0 * null_pops / len(popmap.pops)

    ip_core, pop_core = _pcts(popmap_core)
    ip_all, pop_all = _pcts(popmap_all)
    return NullStats(db.name, ip_core, pop_core, ip_all, pop_all)


def convergence_cdf(popmap: PopMap, db: GeoDatabase, cfg: VoteConfig) -> CdfSeries:
    """CDF over PoPs of the single-database convergence range.

    PoPs that never reach a majority, or whose members are all null, land in
    the tail bucket beyond the radius cap.
    """
    ranges = []
    tail = 0
    for pop in popmap.pops:
        loc = locate_pop_single_db(pop, db, cfg, include_singletons=popmap.with_singletons)
        if loc.coord is None or not loc.majority_found:
            tail += 1
        else:
            ranges.append(loc.range_km)
    return CdfSeries.from_values(f"convergence:{db.name}", ranges, tail_count=tail)


def pop_agreement(pop, db: GeoDatabase, radius_km: float, include_singletons: bool = False) -> Optional[float]:
    """Largest fraction of one PoP's located answers inside any circle of radius_km.

    Candidate centers are every located answer plus their median. None when
    the database is null on every member.
    """
    coords = [
        c
        for c in (db.query(ip).coord for ip in _pop_members(pop, include_singletons))
        if c is not None
    ]
    if not coords:
        return None
    candidates = coords + [coordinate_median(coords)]
    best = max(
        sum(1 for c in coords if haversine_km(c, cand) <= radius_km) for cand in candidates
    )
    return best / len(coords)


def agreement_cdf(
    popmap: PopMap, db: GeoDatabase, radius_km: float, cfg: Optional[VoteConfig] = None
) -> CdfSeries:
    """CDF over PoPs of within-database agreement at a fixed radius.

    cfg is accepted for call-site symmetry with the other per-database
    metrics but plays no role: agreement only depends on the radius. All-null
    PoPs are excluded from the denominator and reported via excluded_count.
    """
    del cfg
    values = []
    excluded = 0
    for pop in popmap.pops:
        agreement = pop_agreement(pop, db, radius_km, popmap.with_singletons)
        if agreement is None:
            excluded += 1
        else:
            values.append(agreement)
    return CdfSeries.from_values(
        f"agreement:{db.name}:{radius_km:g}km", values, excluded_count=excluded
    )


@dataclass(frozen=True)
class DeviationSample:
    """One answer's distance from the cross-database PoP location.

    range_km is the PoP's convergence range in the database under test (None
    when that database did not converge), kept for range-vs-deviation
    scatter plots.
    """

    ip: str
    deviation_km: float
    range_km: Optional[float]


@dataclass(frozen=True)
class DeviationReport:
    db_name: str
    samples: tuple[DeviationSample, ...]
    skipped_pops: int

    def cdf(self) -> CdfSeries:
        return CdfSeries.from_values(
            f"deviation:{self.db_name}", [s.deviation_km for s in self.samples]
        )


def deviation_samples(
    popmap: PopMap,
    dbs: Sequence[GeoDatabase],
    db_under_test: GeoDatabase,
    cfg: VoteConfig,
) -> DeviationReport:
    """Distance of every answer of one database from the all-database vote.

    PoPs whose cross-database location is null are skipped and counted.
    """
    if db_under_test not in dbs:
        raise ValueError(f"{db_under_test.name} not among the voting databases")
    samples = []
    skipped = 0
    for pop in popmap.pops:
        voted = locate_pop(pop, dbs, cfg, include_singletons=popmap.with_singletons)
        if voted.coord is None:
            skipped += 1
            continue
        own = locate_pop_single_db(pop, db_under_test, cfg, popmap.with_singletons)
        own_range = own.range_km if own.majority_found else None
        for ip in _pop_members(pop, popmap.with_singletons):
            rec = db_under_test.query(ip)
            if rec.coord is None:
                continue
            samples.append(
                DeviationSample(ip, haversine_km(rec.coord, voted.coord), own_range)
            )
    return DeviationReport(db_under_test.name, tuple(samples), skipped)


def _pearson(xs: list[float], ys: list[float]) -> Optional[float]:
    if len(xs) < 2:
        return None
    try:
        return correlation(xs, ys)
    except StatisticsError:
        return None


def correlation_matrix(
    dbs: Sequence[GeoDatabase], ips: Sequence[str], include_nulls: bool = False
) -> CorrelationMatrix:
    """Pairwise Pearson correlation of database answers over one IP universe.

    Each database's value vector is its latitude sequence concatenated with
    its longitude sequence. By default a pair is compared only on IPs both
    databases locate; with include_nulls, null answers enter as a (0, 0)
    sentinel, which drags correlations down where coverage differs.
    Zero-variance vectors make a coefficient undefined (None).
    """
    if len(dbs) < 2:
        raise ValueError("correlation needs at least two databases")
    answers = [[db.query(ip).coord for ip in ips] for db in dbs]

    def _vectors(i: int, j: int) -> tuple[list[float], list[float]]:
        lat_i, lon_i, lat_j, lon_j = [], [], [], []
        for a, b in zip(answers[i], answers[j]):
            if include_nulls:
                pa = (0.0, 0.0) if a is None else (a.lat, a.lon)
                pb = (0.0, 0.0) if b is None else (b.lat, b.lon)
            elif a is None or b is None:
                continue
            else:
                pa, pb = (a.lat, a.lon), (b.lat, b.lon)
            lat_i.append(pa[0])
            lon_i.append(pa[1])
            lat_j.append(pb[0])
            lon_j.append(pb[1])
        return lat_i + lon_i, lat_j + lon_j

    n = len(dbs)
    values: list[list[Optional[float]]] = [[None] * n for _ in range(n)]
    for i in range(n):
        vec_i, _ = _vectors(i, i)
        values[i][i] = 1.0 if len(set(vec_i)) > 1 else None
        for j in range(i + 1, n):
            vi, vj = _vectors(i, j)
            values[i][j] = values[j][i] = _pearson(vi, vj)
    return CorrelationMatrix(
        tuple(db.name for db in dbs), tuple(tuple(row) for row in values), include_nulls
    )


def detect_default_location(
    db: GeoDatabase,
    popmap: PopMap,
    prefix_map: Optional[PrefixMap] = None,
    min_ips: int = 50,
    share_threshold: float = 0.8,
    rounding_deg: float = 0.01,
) -> list[AnomalyReport]:
    """Flag (database, AS) pairs whose answers collapse onto one coordinate.

    Non-null answers for each AS's member addresses are bucketed on a
    rounding_deg grid; an AS is reported when its top bucket holds at least
    share_threshold of at least min_ips answers. Headquarters-default
    databases show up here.
    """
    per_as: dict[int, Counter] = defaultdict(Counter)
    for pop in popmap.pops:
        for ip in _pop_members(pop, popmap.with_singletons):
            coord = db.query(ip).coord
            if coord is None:
                continue
            asn = prefix_map.lookup(ip) if prefix_map is not None else None
            if asn is None:
                asn = pop.asn
            key = (round(coord.lat / rounding_deg), round(coord.lon / rounding_deg))
            per_as[asn][key] += 1

    reports = []
    for asn in sorted(per_as):
        counts = per_as[asn]
        total = sum(counts.values())
        if total < min_ips:
            continue
        top_key, top_count = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        share = top_count / total
        if share >= share_threshold:
            coord = GeoCoord(top_key[0] * rounding_deg, top_key[1] * rounding_deg)
            reports.append(AnomalyReport(db.name, asn, coord, share, total))
    return reports


def churn(
    db_old: GeoDatabase, db_new: GeoDatabase, ips: Sequence[str], epsilon_km: float = 1.0
) -> float:
    """Fraction of addresses whose answer changed between two snapshots.

    Any null/non-null flip counts as a change; two located answers count when
    they moved more than epsilon_km apart.
    """
    if not ips:
        raise ValueError("churn over an empty address list")
    changed = 0
    for ip in ips:
        a = db_old.query(ip).coord
        b = db_new.query(ip).coord
        if (a is None) != (b is None):
            changed += 1
        elif a is not None and haversine_km(a, b) > epsilon_km:
            changed += 1
    return changed / len(ips)


def filter_by_region(popmap: PopMap, locations, region: RegionSpec) -> PopMap:
    """PoPs whose cross-database voted coordinate falls inside the region.

    PoPs without a voted coordinate are excluded from every region.
    """
    by_id = {loc.pop_id: loc for loc in locations}
    kept = tuple(
        pop
        for pop in popmap.pops
        if (loc := by_id.get(pop.id)) is not None
        and loc.coord is not None
        and region.contains(loc.coord)
    )
    return PopMap(kept, popmap.with_singletons)
