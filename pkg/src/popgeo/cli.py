"""Command-line pipeline: extract, locate, evaluate, sweep, synth.

One INI-style config file wires every stage; any value can be overridden on
the command line (dedicated flags for the common ones, `--set section.key=v`
for the rest). Relative paths in a config resolve against the config file's
directory. Data goes to files under the output directory, logs go to stderr,
and reruns on identical inputs are byte-identical regardless of --threads.

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import evaluate as ev
from .extract import (
    ExtractionConfig,
    PopMap,
    attach_singletons,
    extract_pops,
    load_popmap,
    save_popmap,
    threshold_sweep,
)
from .geodb import GeoDatabase, load_null_coords, load_point_db, load_range_db
from .ingest import ParseError, aggregate_edges, annotate_as, load_ip2as, parse_observations
from .locate import VoteConfig, locate_pop, save_locations
from .synth import SynthDbSpec, SynthSpec, generate_scenario, write_scenario

log = logging.getLogger("popgeo")


class InputError(Exception):
    """Bad configuration or input data; maps to exit code 1."""


class InvariantError(RuntimeError):
    """An internal consistency check failed; maps to exit code 2."""


@dataclass(frozen=True)
class DbSpec:
    name: str
    kind: str
    path: Path


@dataclass
class RunConfig:
    base_dir: Path
    out_dir: Path
    observations: Optional[Path]
    ip2as: Optional[Path]
    regions_file: Optional[Path]
    null_coords_file: Optional[Path]
    db_specs: list[DbSpec]
    churn_pairs: list[tuple[str, DbSpec, DbSpec]]
    extraction: ExtractionConfig
    vote: VoteConfig
    agreement_radii: list[float]
    anomaly_min_ips: int
    anomaly_share_threshold: float
    anomaly_rounding_deg: float
    churn_epsilon_km: float
    correlation_include_nulls: bool
    region_names: list[str]
    sweep_grid: list[float]
    synth: Optional[SynthSpec]
    threads: int
    with_singletons: bool


def _parse_db_spec(name: str, value: str, base: Path) -> DbSpec:
    kind, sep, path = value.partition(":")
    if not sep or kind.strip() not in ("range", "point"):
        raise InputError(f"database {name}: expected '<range|point>:<path>', got {value!r}")
    return DbSpec(name, kind.strip(), _resolve(base, path.strip()))


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _getfloat(cp, section, option, default) -> float:
    raw = cp.get(section, option, fallback=None)
    return default if raw is None or raw == "" else float(raw)


def _getint(cp, section, option, default) -> int:
    raw = cp.get(section, option, fallback=None)
    return default if raw is None or raw == "" else int(raw)


def _optional_float(cp, section, option) -> Optional[float]:
    raw = cp.get(section, option, fallback=None)
    return None if raw is None or raw == "" else float(raw)


def _synth_db_specs(cp) -> tuple[SynthDbSpec, ...]:
    if not cp.has_section("synth_dbs"):
        return (SynthDbSpec("truthful"),)
    specs = []
    for name, value in cp.items("synth_dbs"):
        kwargs: dict = {}
        for part in value.split(","):
            part = part.strip()
            if not part:
                continue
            key, sep, raw = part.partition("=")
            if not sep:
                raise InputError(f"synth_dbs {name}: expected key=value, got {part!r}")
            key = key.strip()
            if key == "hq_asn":
                kwargs[key] = int(raw)
            elif key in ("noise_km", "null_rate", "hq_lat", "hq_lon", "hq_fraction"):
                kwargs[key] = float(raw)
            else:
                raise InputError(f"synth_dbs {name}: unknown key {key!r}")
        specs.append(SynthDbSpec(name, **kwargs))
    return tuple(specs)


def _build_synth_spec(cp) -> Optional[SynthSpec]:
    if not cp.has_section("synth"):
        return None
    intra = _floats(cp.get("synth", "intra_delay_ms", fallback="1.5,2.0"))
    inter = _floats(cp.get("synth", "inter_delay_ms", fallback="10,30"))
    if len(intra) != 2 or len(inter) != 2:
        raise InputError("synth delay ranges need exactly two values: lo,hi")
    return SynthSpec(
        pop_count=_getint(cp, "synth", "pop_count", 50),
        ips_per_pop=_getint(cp, "synth", "ips_per_pop", 10),
        as_count=_getint(cp, "synth", "as_count", 5),
        intra_delay_ms=(intra[0], intra[1]),
        inter_delay_ms=(inter[0], inter[1]),
        measurements_per_edge=_getint(cp, "synth", "measurements_per_edge", 5),
        singletons_per_pop=_getint(cp, "synth", "singletons_per_pop", 0),
        singleton_edge_measurements=_getint(cp, "synth", "singleton_edge_measurements", 2),
        seed=_getint(cp, "synth", "seed", 0),
        dbs=_synth_db_specs(cp),
    )


def build_run_config(args) -> RunConfig:
    config_path = Path(args.config)
    if not config_path.is_file():
        raise InputError(f"config file not found: {config_path}")
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep database names case-sensitive
    try:
        cp.read_string(config_path.read_text(encoding="utf-8"), source=str(config_path))
    except configparser.Error as exc:
        raise InputError(f"bad config: {exc}") from exc

    for item in args.set or []:
        target, sep, value = item.partition("=")
        section, dot, option = target.partition(".")
        if not sep or not dot:
            raise InputError(f"--set expects section.key=value, got {item!r}")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, option, value)

    # dedicated flags override the config in place
    def _override(section: str, option: str, value: str) -> None:
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, option, value)

    if getattr(args, "step_km", None) is not None:
        _override("vote", "step_km", repr(args.step_km))
    if getattr(args, "max_radius_km", None) is not None:
        _override("vote", "max_radius_km", repr(args.max_radius_km))
    if getattr(args, "seed", None) is not None:
        _override("synth", "seed", str(args.seed))

    base = config_path.parent

    def _path_or_none(option: str) -> Optional[Path]:
        raw = cp.get("paths", option, fallback=None)
        return None if raw is None or raw == "" else _resolve(base, raw)

    out_dir = Path(args.out) if args.out else (_path_or_none("out") or base / "out")
    null_coords = (
        Path(args.null_coords_file) if getattr(args, "null_coords_file", None) else _path_or_none("null_coords")
    )

    db_specs = []
    if cp.has_section("databases"):
        db_specs = [_parse_db_spec(n, v, base) for n, v in cp.items("databases")]
    if len({d.name for d in db_specs}) != len(db_specs):
        raise InputError("duplicate database names in [databases]")
    if any(d.name == "all" for d in db_specs):
        raise InputError("database name 'all' is reserved for the cross-database vote")

    churn_pairs = []
    if cp.has_section("churn"):
        for label, value in cp.items("churn"):
            halves = value.split(",")
            if len(halves) != 2:
                raise InputError(f"churn {label}: expected '<kind>:<old>,<kind>:<new>'")
            churn_pairs.append(
                (
                    label,
                    _parse_db_spec(f"{label}.old", halves[0].strip(), base),
                    _parse_db_spec(f"{label}.new", halves[1].strip(), base),
                )
            )

    try:
        extraction = ExtractionConfig(
            pop_max_delay_ms=_getfloat(cp, "extract", "pop_max_delay_ms", 5.0),
            pop_min_measurements=_getint(cp, "extract", "pop_min_measurements", 5),
            group_merge_delay_ms=_optional_float(cp, "extract", "group_merge_delay_ms"),
            singleton_max_links=_getint(cp, "extract", "singleton_max_links", 2),
            singleton_max_median_ms=_optional_float(cp, "extract", "singleton_max_median_ms"),
        )
        vote = VoteConfig(
            step_km=_getfloat(cp, "vote", "step_km", 1.11),
            max_radius_km=_getfloat(cp, "vote", "max_radius_km", 555.0),
            majority_fraction=_getfloat(cp, "vote", "majority_fraction", 0.5),
        )
        synth_spec = _build_synth_spec(cp)
    except ValueError as exc:
        raise InputError(f"bad config value: {exc}") from exc

    grid_text = getattr(args, "grid", None) or cp.get("sweep", "grid", fallback="")
    region_names = [
        r.strip() for r in cp.get("evaluate", "regions", fallback="").split(",") if r.strip()
    ]

    return RunConfig(
        base_dir=base,
        out_dir=out_dir,
        observations=_path_or_none("observations"),
        ip2as=_path_or_none("ip2as"),
        regions_file=_path_or_none("regions"),
        null_coords_file=null_coords,
        db_specs=db_specs,
        churn_pairs=churn_pairs,
        extraction=extraction,
        vote=vote,
        agreement_radii=_floats(cp.get("evaluate", "agreement_radii_km", fallback="100,500")),
        anomaly_min_ips=_getint(cp, "evaluate", "anomaly_min_ips", 50),
        anomaly_share_threshold=_getfloat(cp, "evaluate", "anomaly_share_threshold", 0.8),
        anomaly_rounding_deg=_getfloat(cp, "evaluate", "anomaly_rounding_deg", 0.01),
        churn_epsilon_km=_getfloat(cp, "evaluate", "churn_epsilon_km", 1.0),
        correlation_include_nulls=cp.getboolean("evaluate", "correlation_include_nulls", fallback=False),
        region_names=region_names,
        sweep_grid=_floats(grid_text),
        synth=synth_spec,
        threads=max(1, args.threads),
        with_singletons=bool(getattr(args, "with_singletons", False)),
    )


def _require_file(path: Optional[Path], what: str) -> Path:
    if path is None:
        raise InputError(f"no {what} configured")
    if not path.is_file():
        raise InputError(f"{what} not found: {path}")
    return path


def _null_coords(cfg: RunConfig):
    if cfg.null_coords_file is None:
        return None
    with _require_file(cfg.null_coords_file, "null-coords file").open(encoding="utf-8") as fh:
        return load_null_coords(fh)


def _load_databases(cfg: RunConfig) -> list[GeoDatabase]:
    null_coords = _null_coords(cfg)
    return [_load_one_db(spec, null_coords) for spec in cfg.db_specs]


def _load_one_db(spec: DbSpec, null_coords) -> GeoDatabase:
    loader = load_range_db if spec.kind == "range" else load_point_db
    with _require_file(spec.path, f"database {spec.name}").open(encoding="utf-8") as fh:
        return loader(fh, spec.name, null_coords)


def _map_jobs(threads: int, fn: Callable, items: Sequence):
    """Order-preserving map, optionally fanned out over worker threads."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _write_lines(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_cdf_csv(path: Path, header: str, series: ev.CdfSeries) -> None:
    lines = [header]
    lines += [f"{x!r},{frac!r}" for x, frac in series.points]
    _write_lines(path, lines)


def _selfcheck_cdf_csv(path: Path) -> None:
    """Re-read a written CDF file and fail hard if it is not monotone."""
    rows = [line.split(",") for line in path.read_text(encoding="utf-8").splitlines()[1:]]
    xs = [float(r[0]) for r in rows]
    fracs = [float(r[1]) for r in rows]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise InvariantError(f"{path.name}: non-monotone x column")
    if any(b < a for a, b in zip(fracs, fracs[1:])):
        raise InvariantError(f"{path.name}: decreasing cumulative fraction")
    if fracs and fracs[-1] > 1.0 + 1e-12:
        raise InvariantError(f"{path.name}: cumulative fraction exceeds 1")


def _popmap_paths(cfg: RunConfig) -> tuple[Path, Path]:
    return cfg.out_dir / "popmap_core.json", cfg.out_dir / "popmap_singletons.json"


def cmd_extract(cfg: RunConfig) -> int:
    obs_path = _require_file(cfg.observations, "observations file")
    ip2as_path = _require_file(cfg.ip2as, "ip2as file")
    with obs_path.open(encoding="utf-8") as fh:
        observations = parse_observations(fh)
    if not observations:
        log.warning("observation file %s contains no observations", obs_path)
    with ip2as_path.open(encoding="utf-8") as fh:
        prefix_map = load_ip2as(fh)

    edges = aggregate_edges(observations)
    core = extract_pops(edges, prefix_map, cfg.extraction, with_singletons=False)
    full = attach_singletons(core, annotate_as(edges, prefix_map), cfg.extraction)

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    core_path, full_path = _popmap_paths(cfg)
    save_popmap(core, core_path)
    save_popmap(full, full_path)
    log.info(
        "extracted %d PoPs: %d core interfaces, %d with singletons",
        len(core.pops),
        core.core_ip_count(),
        len(full.member_ips()),
    )
    return 0


def _load_metric_popmap(cfg: RunConfig) -> PopMap:
    core_path, full_path = _popmap_paths(cfg)
    if cfg.with_singletons:
        return load_popmap(_require_file(full_path, "PoP map"), with_singletons=True)
    return load_popmap(_require_file(core_path, "PoP map"), with_singletons=False)


def cmd_locate(cfg: RunConfig) -> int:
    if not cfg.db_specs:
        raise InputError("no databases configured")
    popmap = _load_metric_popmap(cfg)
    dbs = _load_databases(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)

    for db in dbs:
        locs = _map_jobs(
            cfg.threads,
            lambda pop, db=db: locate_pop(pop, [db], cfg.vote, cfg.with_singletons),
            popmap.pops,
        )
        save_locations(locs, cfg.out_dir / f"locations_{db.name}.json")
    cross = _map_jobs(
        cfg.threads,
        lambda pop: locate_pop(pop, dbs, cfg.vote, cfg.with_singletons),
        popmap.pops,
    )
    save_locations(cross, cfg.out_dir / "locations_all.json")
    log.info("located %d PoPs against %d databases", len(popmap.pops), len(dbs))
    return 0


def _regions_for(cfg: RunConfig) -> list[ev.RegionSpec]:
    named: dict[str, ev.RegionSpec] = {}
    if cfg.regions_file is not None:
        with _require_file(cfg.regions_file, "regions file").open(encoding="utf-8") as fh:
            named.update(ev.load_regions(fh))
    regions = []
    for name in cfg.region_names:
        spec = named.get(name) or ev.BUILTIN_REGIONS.get(name)
        if spec is None:
            raise InputError(f"unknown region {name!r}")
        regions.append(spec)
    return regions


def _per_db_reports(cfg: RunConfig, popmap: PopMap, dbs, suffix: str, out: Path) -> dict:
    """Convergence, agreement and deviation outputs for one PoP map subset."""
    counters: dict = {"convergence_tail": {}, "agreement_excluded": {}, "deviation_skipped": {}}
    if not popmap.pops:
        log.warning("PoP map%s is empty; emitting header-only reports", suffix or "")

    def _one_db(db):
        conv = ev.convergence_cdf(popmap, db, cfg.vote)
        agreements = [
            (radius, ev.agreement_cdf(popmap, db, radius, cfg.vote)) for radius in cfg.agreement_radii
        ]
        deviation = ev.deviation_samples(popmap, dbs, db, cfg.vote)
        return db, conv, agreements, deviation

    for db, conv, agreements, deviation in _map_jobs(cfg.threads, _one_db, dbs):
        _write_cdf_csv(out / f"convergence_{db.name}{suffix}.csv", "range_km,cum_fraction", conv)
        counters["convergence_tail"][db.name] = conv.tail_count
        for radius, series in agreements:
            _write_cdf_csv(
                out / f"agreement_{db.name}_{radius:g}{suffix}.csv", "agreement,cum_fraction", series
            )
            counters["agreement_excluded"][f"{db.name}:{radius:g}"] = series.excluded_count
        _write_cdf_csv(out / f"deviation_{db.name}{suffix}.csv", "deviation_km,cum_fraction", deviation.cdf())
        counters["deviation_skipped"][db.name] = deviation.skipped_pops
        scatter = [
            f"{s.ip},{'' if s.range_km is None else repr(s.range_km)},{s.deviation_km!r}"
            for s in deviation.samples
        ]
        _write_lines(out / f"range_vs_deviation_{db.name}{suffix}.csv", ["ip,range_km,deviation_km"] + scatter)
    return counters


def cmd_evaluate(cfg: RunConfig) -> int:
    if not cfg.db_specs:
        raise InputError("no databases configured")
    core_path, full_path = _popmap_paths(cfg)
    popmap_core = load_popmap(_require_file(core_path, "core PoP map"), with_singletons=False)
    popmap_all = load_popmap(_require_file(full_path, "singleton PoP map"), with_singletons=True)
    popmap = popmap_all if cfg.with_singletons else popmap_core
    dbs = _load_databases(cfg)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)

    prefix_map = None
    if cfg.ip2as is not None and cfg.ip2as.is_file():
        with cfg.ip2as.open(encoding="utf-8") as fh:
            prefix_map = load_ip2as(fh)

    summary: dict = {"databases": [db.name for db in dbs]}

    if popmap_core.pops and popmap_all.pops:
        stats = [ev.null_stats(popmap_core, popmap_all, db) for db in dbs]
        summary["null_stats"] = [vars(s) for s in stats]
    else:
        log.warning("empty PoP maps; skipping null statistics")
        summary["null_stats"] = []

    summary.update(_per_db_reports(cfg, popmap, dbs, "", out))

    ips = popmap.member_ips()
    matrix = None
    if len(dbs) >= 2 and ips:
        matrix = ev.correlation_matrix(dbs, ips, include_nulls=cfg.correlation_include_nulls)
        lines = ["db," + ",".join(matrix.db_names)]
        for name, row in zip(matrix.db_names, matrix.values):
            cells = ["" if v is None else repr(v) for v in row]
            lines.append(f"{name}," + ",".join(cells))
        _write_lines(out / "correlation.csv", lines)
        summary["correlation"] = {
            "db_names": list(matrix.db_names),
            "include_nulls": matrix.include_nulls,
            "values": [list(row) for row in matrix.values],
        }

    anomalies = []
    for db in dbs:
        anomalies += ev.detect_default_location(
            db,
            popmap,
            prefix_map,
            min_ips=cfg.anomaly_min_ips,
            share_threshold=cfg.anomaly_share_threshold,
            rounding_deg=cfg.anomaly_rounding_deg,
        )
    _write_lines(
        out / "anomalies.csv",
        ["db,asn,lat,lon,share,ip_count"]
        + [
            f"{a.db_name},{a.asn},{a.dominant_coord.lat!r},{a.dominant_coord.lon!r},{a.share!r},{a.ip_count}"
            for a in anomalies
        ],
    )
    summary["anomalies"] = [
        {
            "db": a.db_name,
            "asn": a.asn,
            "lat": a.dominant_coord.lat,
            "lon": a.dominant_coord.lon,
            "share": a.share,
            "ip_count": a.ip_count,
        }
        for a in anomalies
    ]

    churn_rows = []
    null_coords = _null_coords(cfg) if cfg.churn_pairs else None
    for label, old_spec, new_spec in cfg.churn_pairs:
        old_db = _load_one_db(old_spec, null_coords)
        new_db = _load_one_db(new_spec, null_coords)
        fraction = ev.churn(old_db, new_db, ips, cfg.churn_epsilon_km) if ips else 0.0
        churn_rows.append((label, fraction))
    _write_lines(
        out / "churn.csv",
        ["label,changed_fraction"] + [f"{label},{frac!r}" for label, frac in churn_rows],
    )
    summary["churn"] = {label: frac for label, frac in churn_rows}

    regions = _regions_for(cfg)
    if regions:
        cross = _map_jobs(
            cfg.threads,
            lambda pop: locate_pop(pop, dbs, cfg.vote, cfg.with_singletons),
            popmap.pops,
        )
        summary["regions"] = {}
        for region in regions:
            subset = ev.filter_by_region(popmap, cross, region)
            counters = _per_db_reports(cfg, subset, dbs, f"__{region.name}", out)
            counters["pop_count"] = len(subset.pops)
            summary["regions"][region.name] = counters

    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    for csv_path in sorted(out.glob("convergence_*.csv")) + sorted(out.glob("agreement_*.csv")) + sorted(
        out.glob("deviation_*.csv")
    ):
        _selfcheck_cdf_csv(csv_path)
    log.info("evaluation bundle written to %s", out)
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    if not cfg.sweep_grid:
        raise InputError("no sweep grid configured (use --grid or [sweep] grid)")
    obs_path = _require_file(cfg.observations, "observations file")
    ip2as_path = _require_file(cfg.ip2as, "ip2as file")
    with obs_path.open(encoding="utf-8") as fh:
        edges = aggregate_edges(parse_observations(fh))
    with ip2as_path.open(encoding="utf-8") as fh:
        prefix_map = load_ip2as(fh)
    try:
        rows = threshold_sweep(edges, prefix_map, cfg.extraction, cfg.sweep_grid)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    _write_lines(
        cfg.out_dir / "sweep.csv",
        ["threshold_ms,pop_count,ip_count"]
        + [f"{t!r},{pops},{ips}" for t, pops, ips in rows],
    )
    log.info("sweep over %d thresholds written", len(rows))
    return 0


def cmd_synth(cfg: RunConfig) -> int:
    if cfg.synth is None:
        raise InputError("no [synth] section configured")
    try:
        scenario = generate_scenario(cfg.synth)
    except ValueError as exc:
        raise InputError(f"bad synth spec: {exc}") from exc
    write_scenario(scenario, cfg.out_dir)

    # a ready-to-run config for the downstream stages, relative to the out dir
    lines = [
        "[paths]",
        "observations = observations.csv",
        "ip2as = ip2as.csv",
        "out = .",
        "",
        "[databases]",
    ]
    lines += [f"{db.name} = point:db_{db.name}.csv" for db in scenario.dbs]
    lines += [
        "",
        "[extract]",
        f"pop_max_delay_ms = {cfg.extraction.pop_max_delay_ms!r}",
        f"pop_min_measurements = {cfg.extraction.pop_min_measurements}",
        f"singleton_max_links = {cfg.extraction.singleton_max_links}",
        "",
        "[vote]",
        f"step_km = {cfg.vote.step_km!r}",
        f"max_radius_km = {cfg.vote.max_radius_km!r}",
        f"majority_fraction = {cfg.vote.majority_fraction!r}",
    ]
    _write_lines(cfg.out_dir / "run.ini", lines)
    log.info(
        "synthetic scenario with %d PoPs, %d observations, %d databases written to %s",
        cfg.synth.pop_count,
        len(scenario.observations),
        len(scenario.dbs),
        cfg.out_dir,
    )
    return 0


COMMANDS = {
    "extract": cmd_extract,
    "locate": cmd_locate,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="popgeo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("extract", "extract PoP maps from observations"),
        ("locate", "locate PoPs against the configured databases"),
        ("evaluate", "write the full evaluation report bundle"),
        ("sweep", "re-extract over a grid of delay thresholds"),
        ("synth", "generate a synthetic scenario with known truth"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--out", help="output directory (overrides [paths] out)")
        p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
        p.add_argument("--with-singletons", action="store_true", help="use the singleton-extended PoP map")
        p.add_argument("--step-km", type=float, help="vote radius step in km")
        p.add_argument("--max-radius-km", type=float, help="vote radius cap in km")
        p.add_argument("--null-coords-file", help="coordinates to treat as null replies")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override any config value")
        if name == "sweep":
            p.add_argument("--grid", help="comma-separated ascending thresholds in ms")
        if name == "synth":
            p.add_argument("--seed", type=int, help="scenario seed")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = build_run_config(args)
        return COMMANDS[args.command](cfg)
    except (InputError, ParseError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return 1
    except InvariantError as exc:
        log.error("invariant violated: %s", exc)
        return 2
    except Exception:  # internal failure: anything we did not classify above
        log.exception("internal error")
        return 2


if __name__ == "__main__":
    sys.exit(main())
