"""Flattens simulator traces into per-transaction sample records and
serializes them as CSV, VCD, and packed raw-bit artifacts.

The published schema has 52 protocol features plus 5 capture-infrastructure
debug fields, 290 signal bits per sample in total.  Column order is frozen;
any change must bump SCHEMA_VERSION.
"""

from __future__ import annotations

import csv as _csv
import struct
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .attacks import AttackKind
from .axi import ChannelKind
from .errors import CsvFormatError, SchemaError
from .sim import SimTrace

SCHEMA_VERSION = 1

# (name, bit width); widths are what the raw export packs and the caps
# applied at capture time, so all three export formats agree byte for byte
PROTOCOL_FIELDS = (
    ("aw_id", 4), ("aw_addr", 32), ("aw_len", 8), ("aw_size", 3),
    ("aw_burst", 2), ("aw_qos", 4), ("aw_prot", 3), ("aw_valid", 1),
    ("aw_ready", 1), ("aw_delta", 10), ("aw_stall", 8),
    ("ar_id", 4), ("ar_addr", 32), ("ar_len", 8), ("ar_size", 3),
    ("ar_burst", 2), ("ar_qos", 4), ("ar_prot", 3), ("ar_valid", 1),
    ("ar_ready", 1), ("ar_delta", 10), ("ar_stall", 8),
    ("w_strb", 8), ("w_last", 1), ("w_valid", 1), ("w_ready", 1),
    ("w_beats", 9), ("w_fill_wait", 10), ("w_gap_max", 8),
    ("r_id", 4), ("r_resp", 2), ("r_last", 1), ("r_valid", 1),
    ("r_ready", 1), ("r_beats", 9), ("r_first_delta", 10), ("r_gap_max", 8),
    ("b_id", 4), ("b_resp", 2), ("b_valid", 1), ("b_ready", 1),
    ("b_delta", 8),
    ("aw_active", 1), ("w_active", 1), ("b_active", 1), ("ar_active", 1),
    ("r_active", 1),
    ("is_write", 1), ("aw_dup_depth", 2), ("ar_dup_depth", 3),
    ("total_cycles", 12), ("issue_gap", 10),
)

DEBUG_FIELDS = (
    ("dbg_trigger_pos", 4), ("dbg_window_id", 4), ("dbg_probe_status", 2),
    ("dbg_sample_ctr", 4), ("dbg_overflow", 1),
)

ALL_FIELDS = PROTOCOL_FIELDS + DEBUG_FIELDS
PROTOCOL_COLUMNS = tuple(name for name, _ in PROTOCOL_FIELDS)
DEBUG_COLUMNS = tuple(name for name, _ in DEBUG_FIELDS)
SAMPLE_BITS = sum(width for _, width in ALL_FIELDS)
SAMPLE_BYTES = (SAMPLE_BITS + 7) // 8
RAW_MAGIC = b"AXIC"

assert len(PROTOCOL_FIELDS) == 52 and len(DEBUG_FIELDS) == 5
assert SAMPLE_BITS == 290

# numeric codes so the CSV stays purely decimal; 0 means untagged
ATTACK_KIND_CODES = {kind: i + 1 for i, kind in enumerate(AttackKind)}
ATTACK_KIND_FROM_CODE = {c: k for k, c in ATTACK_KIND_CODES.items()}


@dataclass
class CaptureRecord:
    """One flattened sample row."""

    sample_index: int
    cycle: int
    features: np.ndarray
    debug: np.ndarray
    label: int
    attack_kind: Optional[AttackKind]


class Dataset:
    """Columnar store of capture records.

    Freshly captured datasets carry the full frozen 57-column schema; the
    preprocessing stages produce reduced-schema variants of the same shape.
    """

    def __init__(self, values: np.ndarray, labels: np.ndarray,
                 attack_kinds: list, cycles: Optional[np.ndarray] = None,
                 schema: Optional[list] = None):
        values = np.asarray(values, dtype=np.int64)
        self.schema = (list(schema) if schema is not None
                       else list(PROTOCOL_COLUMNS + DEBUG_COLUMNS))
        if values.ndim != 2 or values.shape[1] != len(self.schema):
            raise SchemaError(
                f"expected {len(self.schema)} columns, got shape "
                f"{values.shape}")
        self.values = values
        self.labels = np.asarray(labels, dtype=np.int64)
        self.attack_kinds = list(attack_kinds)
        self.cycles = cycles

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def class_counts(self) -> dict:
        n = len(self)
        pos = int(self.labels.sum()) if n else 0
        return {0: n - pos, 1: pos}

    def records(self):
        n_proto = sum(1 for c in self.schema if not c.startswith("dbg_"))
        for i in range(len(self)):
            yield CaptureRecord(
                sample_index=i,
                cycle=int(self.cycles[i]) if self.cycles is not None else 0,
                features=self.values[i, :n_proto],
                debug=self.values[i, n_proto:],
                label=int(self.labels[i]),
                attack_kind=self.attack_kinds[i])

    def equals(self, other: "Dataset") -> bool:
        if self.schema != other.schema or len(self) != len(other):
            return False
        if not np.array_equal(self.values, other.values):
            return False
        if not np.array_equal(self.labels, other.labels):
            return False
        return self.attack_kinds == other.attack_kinds


def _sat(value: int, bits: int) -> int:
    cap = (1 << bits) - 1
    return cap if value > cap else (0 if value < 0 else value)


def _fill_waits(trace: SimTrace) -> list:
    """Cycles each write kept the W channel waiting once it was that
    write's turn (AW-handshake service order).  Queue delay behind other
    masters does not count; a withholding master cannot hide behind it.
    Aborted writes take no W turn and report 0."""
    waits = [0] * len(trace.transactions)
    writes = []
    for i, t in enumerate(trace.transactions):
        addr = t.address_event()
        if addr is None or not t.is_write:
            continue
        hdr = addr.header
        if hdr.len > 15 or (1 << hdr.size) > 8:   # aborted by interconnect
            continue
        writes.append((addr.cycle, i))
    writes.sort()
    prev_end = -1.0
    horizon = trace.drained_at
    for aw_cycle, i in writes:
        txn = trace.transactions[i]
        avail = max(aw_cycle, prev_end + 1)
        beats = [e.cycle for e in txn.events_on(ChannelKind.W)]
        if beats:
            waits[i] = max(int(beats[0] - avail), 0)
        else:
            waits[i] = max(int(horizon - avail), 0)
        expected = txn.address_event().header.len + 1
        prev_end = beats[-1] if len(beats) == expected else float("inf")
    return waits


def _dup_depths(trace: SimTrace) -> list:
    """Number of other in-flight transactions holding the same id on the
    same address channel at each transaction's handshake (issues before
    same-cycle completions, matching the oracle)."""
    timeline = []
    for i, t in enumerate(trace.transactions):
        addr = t.address_event()
        if addr is None:
            continue
        timeline.append((addr.cycle, 0, i, "issue"))
        if t.completed:
            timeline.append((t.complete_cycle, 1, i, "complete"))
    timeline.sort(key=lambda x: (x[0], x[1], x[2]))
    holders: dict = {}
    depths = [0] * len(trace.transactions)
    for _, _, i, what in timeline:
        t = trace.transactions[i]
        hdr = t.address_event().header
        key = (hdr.channel, hdr.id)
        if what == "complete":
            if holders.get(key, 0) > 0:
                holders[key] -= 1
            continue
        depths[i] = holders.get(key, 0)
        holders[key] = holders.get(key, 0) + 1
    return depths


def capture(trace: SimTrace) -> Dataset:
    """Mirror a trace into one record per transaction, in grant order."""
    n = len(trace.transactions)
    values = np.zeros((n, len(ALL_FIELDS)), dtype=np.int64)
    labels = np.zeros(n, dtype=np.int64)
    kinds: list = [None] * n
    cycles = np.zeros(n, dtype=np.int64)
    col = {name: j for j, (name, _) in enumerate(ALL_FIELDS)}
    width = {name: w for name, w in ALL_FIELDS}
    depths = _dup_depths(trace)
    fill_waits = _fill_waits(trace)
    prev_aw: dict = {}
    prev_ar: dict = {}
    prev_issue: dict = {}

    def put(row, name, value):
        values[row, col[name]] = _sat(int(value), width[name])

    for i, txn in enumerate(trace.transactions):
        addr = txn.address_event()
        hdr = addr.header
        is_write = hdr.channel is ChannelKind.AW
        cycles[i] = txn.issue_cycle
        labels[i] = 0 if txn.attack_kind is None else 1
        kinds[i] = txn.attack_kind
        prefix = "aw" if is_write else "ar"
        put(i, f"{prefix}_id", hdr.id)
        put(i, f"{prefix}_addr", hdr.addr)
        put(i, f"{prefix}_len", hdr.len)
        put(i, f"{prefix}_size", hdr.size)
        put(i, f"{prefix}_burst", int(hdr.burst))
        put(i, f"{prefix}_qos", hdr.qos)
        put(i, f"{prefix}_prot", hdr.prot)
        put(i, f"{prefix}_valid", 1)
        put(i, f"{prefix}_ready", 1)
        put(i, f"{prefix}_active", 1)
        put(i, f"{prefix}_stall", addr.cycle - txn.issue_cycle)
        prev = prev_aw if is_write else prev_ar
        if txn.master_id in prev:
            put(i, f"{prefix}_delta", addr.cycle - prev[txn.master_id])
        prev[txn.master_id] = addr.cycle
        if txn.master_id in prev_issue:
            put(i, "issue_gap", txn.issue_cycle - prev_issue[txn.master_id])
        prev_issue[txn.master_id] = txn.issue_cycle
        put(i, "is_write", int(is_write))
        put(i, "aw_dup_depth" if is_write else "ar_dup_depth", depths[i])

        if is_write:
            beats = txn.events_on(ChannelKind.W)
            put(i, "w_fill_wait", fill_waits[i])
            if beats:
                put(i, "w_active", 1)
                put(i, "w_valid", 1)
                put(i, "w_ready", 1)
                put(i, "w_strb", beats[0].header.strb)
                put(i, "w_last", int(beats[-1].header.last))
                put(i, "w_beats", len(beats))
                if len(beats) > 1:
                    gaps = [beats[k + 1].cycle - beats[k].cycle
                            for k in range(len(beats) - 1)]
                    put(i, "w_gap_max", max(gaps))
            bs = txn.events_on(ChannelKind.B)
            if bs:
                b = bs[0]
                put(i, "b_active", 1)
                put(i, "b_valid", 1)
                put(i, "b_ready", 1)
                put(i, "b_id", b.header.id)
                put(i, "b_resp", int(b.header.resp))
                anchor = beats[-1].cycle if beats else addr.cycle
                put(i, "b_delta", b.cycle - anchor)
        else:
            beats = txn.events_on(ChannelKind.R)
            if beats:
                put(i, "r_active", 1)
                put(i, "r_valid", 1)
                put(i, "r_ready", 1)
                put(i, "r_id", beats[0].header.id)
                put(i, "r_resp", int(beats[0].header.resp))
                put(i, "r_last", int(beats[-1].header.last))
                put(i, "r_beats", len(beats))
                put(i, "r_first_delta", beats[0].cycle - addr.cycle)
                if len(beats) > 1:
                    gaps = [beats[k + 1].cycle - beats[k].cycle
                            for k in range(len(beats) - 1)]
                    put(i, "r_gap_max", max(gaps))
        last_cycle = max(e.cycle for e in txn.events)
        if txn.completed:
            put(i, "total_cycles", txn.complete_cycle - txn.issue_cycle)
        else:
            put(i, "total_cycles", max(last_cycle - txn.issue_cycle,
                                       (1 << width["total_cycles"]) - 1))
        # synthetic capture-infrastructure fields
        put(i, "dbg_trigger_pos", (i * 7 + 3) % 16)
        put(i, "dbg_window_id", (i // 1024) % 16)
        put(i, "dbg_probe_status", 3)
        put(i, "dbg_sample_ctr", i % 16)
        put(i, "dbg_overflow", 0)
    return Dataset(values, labels, kinds, cycles)


# ---------------------------------------------------------------------------
# CSV

def export_csv(ds: Dataset, path: str) -> str:
    if ds.schema != list(PROTOCOL_COLUMNS + DEBUG_COLUMNS):
        raise SchemaError("only full-schema datasets are exported as capture "
                          "CSV")
    with open(path, "w", newline="") as f:
        f.write(f"#schema_version={SCHEMA_VERSION}\n")
        writer = _csv.writer(f)
        writer.writerow(list(ds.schema) + ["label", "attack_kind"])
        codes = [0 if k is None else ATTACK_KIND_CODES[k]
                 for k in ds.attack_kinds]
        for i in range(len(ds)):
            writer.writerow([*map(int, ds.values[i]), int(ds.labels[i]),
                             codes[i]])
    return path


def import_csv(path: str) -> Dataset:
    with open(path, newline="") as f:
        first = f.readline()
        if not first.startswith("#schema_version="):
            raise CsvFormatError("missing #schema_version comment", line=1)
        try:
            version = int(first.strip().split("=", 1)[1])
        except ValueError:
            raise CsvFormatError("unparsable schema version", line=1)
        if version != SCHEMA_VERSION:
            raise SchemaError(f"schema_version {version} unsupported")
        reader = _csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError("missing header row", line=2)
        expected = list(PROTOCOL_COLUMNS + DEBUG_COLUMNS) + [
            "label", "attack_kind"]
        if header != expected:
            unknown = [c for c in header if c not in expected]
            raise SchemaError(
                f"unexpected columns {unknown or header[:5]}; "
                f"schema requires {len(expected)} known columns")
        rows = []
        labels = []
        kinds = []
        for lineno, row in enumerate(reader, start=3):
            if not row:
                continue
            if len(row) != len(expected):
                raise CsvFormatError(
                    f"{len(row)} fields, expected {len(expected)}",
                    line=lineno)
            try:
                ints = [int(x) for x in row]
            except ValueError as exc:
                raise CsvFormatError(str(exc), line=lineno)
            rows.append(ints[:-2])
            labels.append(ints[-2])
            code = ints[-1]
            if code and code not in ATTACK_KIND_FROM_CODE:
                raise CsvFormatError(f"unknown attack_kind code {code}",
                                     line=lineno)
            kinds.append(ATTACK_KIND_FROM_CODE.get(code))
    values = (np.array(rows, dtype=np.int64) if rows
              else np.zeros((0, len(ALL_FIELDS)), dtype=np.int64))
    return Dataset(values, np.array(labels, dtype=np.int64), kinds)


# ---------------------------------------------------------------------------
# VCD

_VCD_SIGNALS = (
    ("awvalid", 1), ("awready", 1), ("awid", 4), ("awaddr", 32),
    ("awlen", 8), ("awsize", 3), ("awburst", 2), ("awqos", 4), ("awprot", 3),
    ("wvalid", 1), ("wready", 1), ("wstrb", 8), ("wlast", 1),
    ("bvalid", 1), ("bready", 1), ("bid", 4), ("bresp", 2),
    ("arvalid", 1), ("arready", 1), ("arid", 4), ("araddr", 32),
    ("arlen", 8), ("arsize", 3), ("arburst", 2), ("arqos", 4), ("arprot", 3),
    ("rvalid", 1), ("rready", 1), ("rid", 4), ("rresp", 2), ("rlast", 1),
)

_CHANNEL_SIGNALS = {
    ChannelKind.AW: ("awid", "awaddr", "awlen", "awsize", "awburst",
                     "awqos", "awprot"),
    ChannelKind.W: ("wstrb", "wlast"),
    ChannelKind.B: ("bid", "bresp"),
    ChannelKind.AR: ("arid", "araddr", "arlen", "arsize", "arburst",
                     "arqos", "arprot"),
    ChannelKind.R: ("rid", "rresp", "rlast"),
}

_HEADER_GETTERS = {
    "id": lambda h: h.id, "addr": lambda h: h.addr, "len": lambda h: h.len,
    "size": lambda h: h.size, "burst": lambda h: int(h.burst),
    "qos": lambda h: h.qos, "prot": lambda h: h.prot,
    "resp": lambda h: int(h.resp), "last": lambda h: int(h.last),
    "strb": lambda h: h.strb,
}


def export_vcd(trace: SimTrace, path: str) -> str:
    """Write the trace as a value-change dump, one timestep per cycle."""
    ids = {name: chr(33 + i) for i, (name, _) in enumerate(_VCD_SIGNALS)}
    widths = dict(_VCD_SIGNALS)
    by_cycle: dict = {}
    for txn in trace.transactions:
        for e in txn.events:
            by_cycle.setdefault(e.cycle, []).append(e.header)
    current = {name: 0 for name, _ in _VCD_SIGNALS}
    with open(path, "w") as f:
        f.write("$timescale 1ns $end\n")
        f.write("$scope module axi_bus $end\n")
        for name, w in _VCD_SIGNALS:
            label = name if w == 1 else f"{name}[{w - 1}:0]"
            f.write(f"$var wire {w} {ids[name]} {label} $end\n")
        f.write("$upscope $end\n$enddefinitions $end\n")
        f.write("$dumpvars\n")
        for name, w in _VCD_SIGNALS:
            f.write(_vcd_change(name, 0, w, ids))
        f.write("$end\n")
        pending_clear: set = set()
        for cycle in sorted(set(by_cycle) | {c + 1 for c in by_cycle}):
            headers = by_cycle.get(cycle, [])
            updates: dict = {}
            active_channels = set()
            for hdr in headers:
                ch = hdr.channel
                active_channels.add(ch)
                p = ch.value.lower()
                updates[f"{p}valid"] = 1
                updates[f"{p}ready"] = 1
                for sig in _CHANNEL_SIGNALS[ch]:
                    field = sig[len(p):]
                    updates[sig] = _HEADER_GETTERS[field](hdr)
            for ch in list(pending_clear):
                if ch not in active_channels:
                    p = ch.value.lower()
                    updates.setdefault(f"{p}valid", 0)
                    updates.setdefault(f"{p}ready", 0)
            pending_clear = active_channels
            lines = []
            for name, value in updates.items():
                if current[name] != value:
                    current[name] = value
                    lines.append(_vcd_change(name, value, widths[name], ids))
            if lines:
                f.write(f"#{cycle}\n")
                f.writelines(lines)
    return path


def _vcd_change(name: str, value: int, width: int, ids: dict) -> str:
    if width == 1:
        return f"{value}{ids[name]}\n"
    return f"b{value:b} {ids[name]}\n"


def read_vcd(path: str) -> dict:
    """Minimal VCD reader: signal name -> ordered list of (time, value)."""
    names: dict = {}
    changes: dict = {}
    time = 0
    with open(path) as f:
        tokens = f.read().split()
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok == "$var":
            code = tokens[i + 3]
            name = tokens[i + 4].split("[")[0]
            names[code] = name
            changes[name] = []
            while tokens[i] != "$end":
                i += 1
        elif tok.startswith("$"):
            if tok not in ("$end", "$dumpvars"):
                while i < len(tokens) and tokens[i] != "$end":
                    i += 1
        elif tok.startswith("#"):
            time = int(tok[1:])
        elif tok[0] in "01":
            code = tok[1:]
            changes[names[code]].append((time, int(tok[0])))
        elif tok[0] in "bB":
            value = int(tok[1:], 2)
            code = tokens[i + 1]
            changes[names[code]].append((time, value))
            i += 1
        i += 1
    return changes


def vcd_value_at(changes: list, t: int) -> int:
    value = 0
    for time, v in changes:
        if time > t:
            break
        value = v
    return value


# ---------------------------------------------------------------------------
# raw packed bits

def export_raw(source: Union[SimTrace, Dataset], path: str) -> str:
    """Pack each sample's 290 signal bits little-endian, 37 bytes/sample.

    Layout: fields in schema order, each field LSB-first at increasing bit
    offsets; bit k of the image lives at byte k//8, bit k%8.  No labels.
    """
    ds = capture(source) if isinstance(source, SimTrace) else source
    if ds.schema != list(PROTOCOL_COLUMNS + DEBUG_COLUMNS):
        raise SchemaError("raw export requires the full capture schema")
    with open(path, "wb") as f:
        f.write(RAW_MAGIC)
        f.write(bytes([SCHEMA_VERSION]))
        f.write(struct.pack("<I", len(ds)))
        for i in range(len(ds)):
            img = 0
            shift = 0
            for j, (_, w) in enumerate(ALL_FIELDS):
                img |= (int(ds.values[i, j]) & ((1 << w) - 1)) << shift
                shift += w
            f.write(img.to_bytes(SAMPLE_BYTES, "little"))
    return path


def read_raw(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != RAW_MAGIC:
            raise SchemaError(f"bad magic {magic!r}")
        version = f.read(1)[0]
        if version != SCHEMA_VERSION:
            raise SchemaError(f"raw version {version} unsupported")
        count = struct.unpack("<I", f.read(4))[0]
        out = np.zeros((count, len(ALL_FIELDS)), dtype=np.int64)
        for i in range(count):
            img = int.from_bytes(f.read(SAMPLE_BYTES), "little")
            shift = 0
            for j, (_, w) in enumerate(ALL_FIELDS):
                out[i, j] = (img >> shift) & ((1 << w) - 1)
                shift += w
    return out
