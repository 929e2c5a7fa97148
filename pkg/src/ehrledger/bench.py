"""Latency benchmark: ledger vs. baseline store across a record-volume ladder."""

from __future__ import annotations

import csv
import datetime
import gc
import io
import logging
import random
import statistics
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional, Sequence

from .baseline import BaselineStore, insert_row, read_row
from .chaincode import EHRRecord
from .network import NetworkConfig, init_network, query, submit_proposal

log = logging.getLogger(__name__)

TARGETS = ("baseline", "ledger")
DEFAULT_VOLUMES = (10, 100, 1000, 10_000, 100_000)
FULL_VOLUMES = DEFAULT_VOLUMES + (1_000_000,)
WARMUP = 20
CSV_HEADER = ("target", "volume", "op", "mean_ms", "p95_ms", "samples")

# Published query times in ms per volume (10 .. 1,000,000 records), used only
# as reference data in reports.
REFERENCE_VOLUMES = (10, 100, 1000, 10_000, 100_000, 1_000_000)
REFERENCE_MS = {
    ("ledger", "read"): (183.0,) * 6,
    ("ledger", "write"): (58.0,) * 6,
    ("baseline", "read"): (1.73, 1.79, 2.38, 8.76, 43.52, 136.19),
    ("baseline", "write"): (4.32, 4.48, 4.47, 4.37, 4.39, 4.45),
    ("medrec", "read"): (177.0, 186.0, 194.0, 199.0, 205.0, 210.0),
    ("medrec", "write"): (81.5, 86.9, 79.6, 71.6, 63.2, 79.6),
    ("blockstack", "read"): (360.0,) * 6,
    ("blockstack", "write"): (530.0,) * 6,
}


@dataclass(frozen=True)
class BenchPlan:
    targets: frozenset = frozenset(TARGETS)
    volumes: tuple[int, ...] = DEFAULT_VOLUMES
    reads_per_volume: int = 200
    seed: int = 42
    warmup: int = WARMUP
    block_size: int = 10

    def __post_init__(self):
        object.__setattr__(self, "targets", frozenset(self.targets))
        object.__setattr__(self, "volumes", tuple(self.volumes))
        unknown = self.targets - set(TARGETS)
        if unknown:
            raise ValueError(f"unknown targets {sorted(unknown)}")
        if any(v < 1 for v in self.volumes):
            raise ValueError("volumes must be positive")
        if any(a >= b for a, b in zip(self.volumes, self.volumes[1:])):
            raise ValueError("volumes must be strictly increasing")
        if self.reads_per_volume < 1:
            raise ValueError("reads_per_volume must be >= 1")
        if self.warmup < 0:
            raise ValueError("warmup must be >= 0")


@dataclass(frozen=True)
class BenchResult:
    target: str
    volume: int
    op: str
    mean_ms: float
    p95_ms: float
    samples: int

    @property
    def sort_key(self):
        return (self.target, self.volume, self.op)


_FIRST = ("Maria", "Nikos", "Eleni", "James", "Olivia", "Ahmed", "Sofia", "Lukas", "Chen",
          "Amara", "Dimitris", "Hannah", "Mateo", "Ingrid", "Kofi", "Yuki", "Priya", "Tomasz")
_LAST = ("Papadopoulou", "Okafor", "Lindqvist", "Moreau", "Kowalski", "Haddad", "Tanaka",
         "Fernandes", "Novak", "Brennan", "Achebe", "Varga", "Castellanos", "Iyer", "Schulz")
_STREETS = ("Harbour", "Acacia", "Mill", "Station", "Orchard", "Kings", "Lighthouse", "Elm",
            "Marina", "Olive", "Quarry", "Chapel")
_CITIES = ("Leeds", "Patras", "Lyon", "Gdansk", "Porto", "Tampere", "Graz", "Cork", "Brno")
_COUNTRIES = ("GR", "GB", "FR", "PL", "PT", "FI", "AT", "IE", "CZ", "DE", "ES", "IT")
_TESTS = ("HbA1c", "LDL", "CRP", "TSH", "Hb", "eGFR", "ALT", "Vitamin-D")


def generate_records(n: int, seed: int) -> Iterator[EHRRecord]:
    """Deterministic stream of ``n`` schema-valid records with distinct ids."""
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = random.Random(seed)
    seen = set()
    epoch = datetime.date(1930, 1, 1).toordinal()
    for _ in range(n):
        rid = rng.randbytes(16).hex()
        while rid in seen:
            rid = rng.randbytes(16).hex()
        seen.add(rid)
        dob = datetime.date.fromordinal(epoch + rng.randrange(85 * 365)).isoformat()
        yield EHRRecord(
            id=rid,
            name=f"{rng.choice(_FIRST)} {rng.choice(_LAST)}-{rng.randrange(10**6):06d}",
            address=f"{rng.randrange(1, 300)} {rng.choice(_STREETS)} Street, "
                    f"{rng.choice(_CITIES)} {rng.randrange(10**5):05d}",
            country=rng.choice(_COUNTRIES),
            date_of_birth=dob,
            test=f"{rng.choice(_TESTS)}={rng.uniform(0.1, 200):.2f}",
        )


def summarize(samples_ms: Sequence[float]) -> tuple[float, float]:
    """Mean and 95th percentile (inclusive interpolation) of latency samples."""
    if not samples_ms:
        raise ValueError("no samples")
    mean = statistics.fmean(samples_ms)
    if len(samples_ms) == 1:
        return mean, samples_ms[0]
    return mean, statistics.quantiles(samples_ms, n=100, method="inclusive")[94]


def _time_calls(fn: Callable, args: Iterable, warmup: int) -> list[float]:
    """Wall-clock each call in ms; the first ``warmup`` calls are discarded."""
    out = []
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for i, a in enumerate(args):
            t0 = time.perf_counter()
            fn(a)
            dt = (time.perf_counter() - t0) * 1e3
            if i >= warmup:
                out.append(dt)
    finally:
        if gc_was_enabled:
            gc.enable()
    return out


class LedgerTarget:
    """Writes go through propose, order, validate and commit on every peer."""

    name = "ledger"

    def __init__(self, seed: int, block_size: int = 10, client: str = "Healthcenter"):
        self.net = init_network(NetworkConfig(rng_seed=seed, block_size=block_size))
        self.client = client

    def populate(self, records: Iterable[EHRRecord]) -> None:
        for rec in records:
            tx = submit_proposal(self.net, self.client, "create", rec.to_json())
            for block in self.net.orderer.broadcast(tx):
                self.net.deliver(block)
        for block in self.net.orderer.drain():
            self.net.deliver(block)

    def write(self, rec: EHRRecord) -> None:
        tx = submit_proposal(self.net, self.client, "create", rec.to_json())
        for block in self.net.orderer.broadcast(tx) + self.net.orderer.drain():
            self.net.deliver(block)

    def read(self, record_id: str):
        return query(self.net, self.client, "read", {"id": record_id})

    def close(self) -> None:
        self.net.close()


class BaselineTarget:
    name = "baseline"

    def __init__(self, seed: int):
        self.store = BaselineStore(rng=random.Random(f"{seed}/baseline"))

    def populate(self, records: Iterable[EHRRecord]) -> None:
        for rec in records:
            insert_row(self.store, rec)

    def write(self, rec: EHRRecord) -> None:
        insert_row(self.store, rec)

    def read(self, record_id: str):
        return read_row(self.store, record_id)

    def close(self) -> None:
        pass


def make_target(name: str, plan: BenchPlan):
    if name == "ledger":
        return LedgerTarget(plan.seed, plan.block_size)
    if name == "baseline":
        return BaselineTarget(plan.seed)
    raise ValueError(name)


def run_cell(target_name: str, volume: int, plan: BenchPlan) -> list[BenchResult]:
    """Populate one target with ``volume`` records and measure writes and reads.

    The last ``min(reads, volume)`` records are written one at a time and
    timed (preceded by up to ``warmup`` untimed single writes); reads hit
    uniformly random existing ids after ``warmup`` untimed reads.
    """
    records = list(generate_records(volume, plan.seed))
    n_meas = min(plan.reads_per_volume, volume)
    n_warm = min(plan.warmup, volume - n_meas)
    split = volume - n_meas - n_warm
    target = make_target(target_name, plan)
    try:
        target.populate(records[:split])
        write_ms = _time_calls(target.write, records[split:], n_warm)
        rng = random.Random(f"{plan.seed}/reads/{volume}")
        ids = [records[rng.randrange(volume)].id for _ in range(plan.warmup + plan.reads_per_volume)]
        read_ms = _time_calls(target.read, ids, plan.warmup)
    finally:
        target.close()
    out = []
    for op, samples in (("read", read_ms), ("write", write_ms)):
        mean, p95 = summarize(samples)
        out.append(BenchResult(target_name, volume, op, mean, p95, len(samples)))
    return out


def run_bench(plan: BenchPlan, progress: Optional[Callable[[str], None]] = None) -> list[BenchResult]:
    results = []
    for target in sorted(plan.targets):
        for volume in plan.volumes:
            t0 = time.perf_counter()
            try:
                cell = run_cell(target, volume, plan)
            except Exception:  # a failed cell is reported, not fatal
                log.warning("benchmark cell %s/%d failed", target, volume, exc_info=True)
                continue
            results.extend(cell)
            if progress:
                progress(f"{target} {volume}: " + ", ".join(
                    f"{r.op} mean={r.mean_ms:.4f}ms" for r in cell)
                    + f" ({time.perf_counter() - t0:.1f}s)")
    return sorted(results, key=lambda r: r.sort_key)


def to_csv(results: Iterable[BenchResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in results:
        w.writerow([r.target, r.volume, r.op, repr(r.mean_ms), repr(r.p95_ms), r.samples])
    return buf.getvalue()


def from_csv(text: str) -> list[BenchResult]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError("unexpected CSV header")
    return [BenchResult(t, int(v), op, float(m), float(p), int(s))
            for t, v, op, m, p, s in rows[1:] if t]


def estimate_crossover(volumes: Sequence[float], baseline_read_ms: Sequence[float],
                       ledger_read_ms: float) -> Optional[float]:
    """Volume where a least-squares line through baseline reads meets the ledger constant.

    Returns None when the fit is degenerate or the baseline does not grow.
    """
    if len(volumes) < 2 or len(set(volumes)) < 2:
        return None
    slope, intercept = statistics.linear_regression(
        [float(v) for v in volumes], [float(m) for m in baseline_read_ms]
    )
    if slope <= 0:
        return None
    return (ledger_read_ms - intercept) / slope


def reference_crossover() -> float:
    return estimate_crossover(REFERENCE_VOLUMES, REFERENCE_MS[("baseline", "read")],
                              REFERENCE_MS[("ledger", "read")][0])


def report(results: Sequence[BenchResult], include_reference: bool = False) -> tuple[str, dict]:
    """CSV text plus a summary; the crossover needs both targets' reads."""
    results = sorted(results, key=lambda r: r.sort_key)
    summary: dict = {"targets": sorted({r.target for r in results})}
    reads = {t: [r for r in results if r.target == t and r.op == "read"] for t in TARGETS}
    if reads["ledger"] and reads["baseline"]:
        ledger_const = statistics.fmean(r.mean_ms for r in reads["ledger"])
        summary["ledger_read_ms"] = ledger_const
        summary["crossover_volume"] = estimate_crossover(
            [r.volume for r in reads["baseline"]], [r.mean_ms for r in reads["baseline"]],
            ledger_const,
        )
    for t in TARGETS:
        for op in ("read", "write"):
            rows = [r for r in results if r.target == t and r.op == op]
            if len(rows) >= 2:
                summary[f"{t}_{op}_growth"] = rows[-1].mean_ms / rows[0].mean_ms
    if include_reference:
        summary["reference"] = {
            "volumes": list(REFERENCE_VOLUMES),
            "ms": {f"{t}/{op}": list(v) for (t, op), v in REFERENCE_MS.items()},
            "crossover_volume": reference_crossover(),
        }
    return to_csv(results), summary


def format_summary(summary: dict) -> str:
    lines = [f"targets: {', '.join(summary['targets']) or '(none)'}"]
    if "crossover_volume" in summary:
        c = summary["crossover_volume"]
        lines.append(f"ledger read (mean over volumes): {summary['ledger_read_ms']:.4f} ms")
        lines.append("read crossover: " + ("none" if c is None else f"{c:,.0f} records"))
    for key in sorted(k for k in summary if k.endswith("_growth")):
        lines.append(f"{key}: x{summary[key]:.2f} (largest/smallest volume)")
    ref = summary.get("reference")
    if ref:
        lines.append(f"reference data crossover: {ref['crossover_volume']:,.0f} records")
    return "\n".join(lines)
