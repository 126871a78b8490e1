"""AXI4 domain types and the rule-based legality oracle.

Models the five AXI4 channels (AW, W, B, AR, R) at transaction level:
each transaction is a cycle-stamped list of channel handshake events.
The oracle defines ground truth for six availability-violation classes,
either per header (burst overflow, invalid size, duplicate ID, prot
violation) or statefully over a stream (QoS flooding, write-data stalls).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterable, Mapping, Optional, Sequence


class ChannelKind(Enum):
    """The five AXI4 channels."""

    AW = "AW"
    W = "W"
    B = "B"
    AR = "AR"
    R = "R"


class Burst(IntEnum):
    FIXED = 0
    INCR = 1
    WRAP = 2


class Resp(IntEnum):
    OKAY = 0
    EXOKAY = 1
    SLVERR = 2
    DECERR = 3


# Channels on which each header field is meaningful; everything else must be 0.
_ADDRESS_CHANNELS = (ChannelKind.AW, ChannelKind.AR)
_RESP_CHANNELS = (ChannelKind.B, ChannelKind.R)
_LAST_CHANNELS = (ChannelKind.W, ChannelKind.R)
_ID_CHANNELS = (ChannelKind.AW, ChannelKind.AR, ChannelKind.B, ChannelKind.R)


@dataclass(frozen=True)
class AxiHeader:
    """One channel's header fields for a single beat or handshake.

    Fields that do not apply to `channel` must stay zero; widths follow
    a 32-bit address / 8-byte data bus profile (4-bit IDs, 8-bit strobe).
    """

    channel: ChannelKind
    id: int = 0
    addr: int = 0
    len: int = 0
    size: int = 0
    burst: Burst = Burst.INCR
    qos: int = 0
    prot: int = 0
    resp: Resp = Resp.OKAY
    last: bool = False
    strb: int = 0

    def __post_init__(self):
        _check_width(self.id, 4, "id")
        _check_width(self.addr, 32, "addr")
        _check_width(self.len, 8, "len")
        _check_width(self.size, 3, "size")
        _check_width(self.qos, 4, "qos")
        _check_width(self.prot, 3, "prot")
        _check_width(self.strb, 8, "strb")
        ch = self.channel
        if ch not in _ADDRESS_CHANNELS:
            for name in ("addr", "len", "size", "qos", "prot"):
                if getattr(self, name):
                    raise ValueError(f"{name} not applicable on {ch.value}")
            if ch is not ChannelKind.W and self.burst != Burst.INCR:
                # burst defaults to INCR; treat any other value as misuse
                raise ValueError(f"burst not applicable on {ch.value}")
        if self.resp != Resp.OKAY and ch not in _RESP_CHANNELS:
            raise ValueError(f"resp not applicable on {ch.value}")
        if self.last and ch not in _LAST_CHANNELS:
            raise ValueError(f"last not applicable on {ch.value}")
        if self.strb and ch is not ChannelKind.W:
            raise ValueError(f"strb not applicable on {ch.value}")
        if self.id and ch not in _ID_CHANNELS:
            raise ValueError(f"id not applicable on {ch.value}")


def _check_width(value: int, bits: int, name: str) -> None:
    if not 0 <= value < (1 << bits):
        raise ValueError(f"{name}={value} exceeds {bits}-bit width")


@dataclass(frozen=True)
class ChannelEvent:
    """A handshake (or beat) observed on one channel at one cycle."""

    cycle: int
    header: AxiHeader
    valid: bool = True
    ready: bool = True


@dataclass
class AxiTransaction:
    """A complete five-channel transaction issued by one master.

    Writes carry AW, then one or more W beats, then B; reads carry AR then
    R beats.  `complete_cycle` is None while the transaction is outstanding.
    `attack_kind` / `attack_basis` are ground-truth tags set by the attack
    injector (basis names the concrete base vector inside a mixed pattern).
    """

    master_id: int
    events: list[ChannelEvent] = field(default_factory=list)
    issue_cycle: int = 0
    complete_cycle: Optional[int] = None
    attack_kind: Optional["AttackKindLike"] = None
    attack_basis: Optional["AttackKindLike"] = None

    @property
    def is_write(self) -> bool:
        return any(e.header.channel is ChannelKind.AW for e in self.events)

    @property
    def completed(self) -> bool:
        return self.complete_cycle is not None

    def events_on(self, channel: ChannelKind) -> list[ChannelEvent]:
        return [e for e in self.events if e.header.channel is channel]

    def address_event(self) -> Optional[ChannelEvent]:
        for e in self.events:
            if e.header.channel in _ADDRESS_CHANNELS:
                return e
        return None

    def validate(self) -> None:
        """Structural checks: event ordering and beat-count consistency."""
        cycles = [e.cycle for e in self.events]
        if cycles != sorted(cycles):
            raise ValueError("events not cycle-ordered")
        addr = self.address_event()
        if addr is None:
            raise ValueError("transaction has no address event")
        if self.completed:
            data_ch = ChannelKind.W if self.is_write else ChannelKind.R
            beats = len(self.events_on(data_ch))
            if beats != addr.header.len + 1:
                raise ValueError(
                    f"{beats} data beats for len={addr.header.len}"
                )


# typing alias only; the enum itself lives with the attack synthesizer
AttackKindLike = object


class ViolationKind(Enum):
    BurstLengthOverflow = "BurstLengthOverflow"
    DuplicateId = "DuplicateId"
    QosFlooding = "QosFlooding"
    InvalidSize = "InvalidSize"
    ProtViolation = "ProtViolation"
    WriteStall = "WriteStall"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    cycle: int
    master_id: int
    detail: str
    txn_index: Optional[int] = None


@dataclass(frozen=True)
class OracleConfig:
    """Thresholds defining the legality rules.

    `allowed_prot` maps master id to the set of prot values that master is
    entitled to issue; None disables the prot check entirely.
    """

    max_legal_len: int = 15
    qos_flood_value: int = 0xF
    qos_flood_window: int = 8
    stall_timeout_cycles: int = 256
    bus_width_bytes: int = 8
    allowed_prot: Optional[Mapping[int, frozenset]] = None

    def __post_init__(self):
        for name in ("max_legal_len", "qos_flood_window",
                     "stall_timeout_cycles", "bus_width_bytes"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 <= self.qos_flood_value <= 0xF:
            raise ValueError("qos_flood_value must fit 4 bits")

    @property
    def max_size(self) -> int:
        return int(math.log2(self.bus_width_bytes))


class OutstandingState:
    """In-flight transactions keyed by (address channel, id).

    An id is inserted at its address handshake and removed exactly when the
    final response beat completes.  Multiple entries under one key can exist
    only while a duplicate-id attack is in flight.
    """

    def __init__(self):
        self._inflight: dict[tuple, list] = {}

    def issue(self, channel: ChannelKind, txn_id: int, master_id: int,
              cycle: int) -> None:
        self._inflight.setdefault((channel, txn_id), []).append(
            (master_id, cycle))

    def complete(self, channel: ChannelKind, txn_id: int,
                 master_id: int) -> None:
        key = (channel, txn_id)
        entries = self._inflight.get(key)
        if not entries:
            return
        for i, (mid, _) in enumerate(entries):
            if mid == master_id:
                entries.pop(i)
                break
        else:
            entries.pop(0)
        if not entries:
            del self._inflight[key]

    def holders(self, channel: ChannelKind, txn_id: int) -> list:
        return list(self._inflight.get((channel, txn_id), []))

    def is_outstanding(self, channel: ChannelKind, txn_id: int) -> bool:
        return bool(self._inflight.get((channel, txn_id)))

    def per_master_counts(self) -> dict:
        counts: dict[int, int] = {}
        for entries in self._inflight.values():
            for mid, _ in entries:
                counts[mid] = counts.get(mid, 0) + 1
        return counts

    def __len__(self) -> int:
        return sum(len(v) for v in self._inflight.values())


def check_header(header: AxiHeader, cfg: OracleConfig, ctx: OutstandingState,
                 master_id: int = 0, cycle: int = 0) -> list[Violation]:
    """Per-header legality check against the in-flight context.

    Pure function of its arguments; returns every violation this header
    triggers, empty list if it is protocol-clean at header level.
    """
    out: list[Violation] = []
    if header.channel not in _ADDRESS_CHANNELS:
        return out
    ch = header.channel.value
    if header.len > cfg.max_legal_len:
        out.append(Violation(
            ViolationKind.BurstLengthOverflow, cycle, master_id,
            f"{ch}LEN={header.len} exceeds legal maximum {cfg.max_legal_len}"))
    if (1 << header.size) > cfg.bus_width_bytes:
        out.append(Violation(
            ViolationKind.InvalidSize, cycle, master_id,
            f"{ch}SIZE={header.size} implies {1 << header.size} bytes/beat "
            f"on a {cfg.bus_width_bytes}-byte bus"))
    holders = ctx.holders(header.channel, header.id)
    if holders:
        other = holders[0][0]
        who = "another master" if other != master_id else "the same master"
        out.append(Violation(
            ViolationKind.DuplicateId, cycle, master_id,
            f"{ch}ID={header.id} already in flight from {who} "
            f"(master {other})"))
    if cfg.allowed_prot is not None:
        allowed = cfg.allowed_prot.get(master_id)
        if allowed is not None and header.prot not in allowed:
            out.append(Violation(
                ViolationKind.ProtViolation, cycle, master_id,
                f"{ch}PROT={header.prot} outside privilege set "
                f"{sorted(allowed)} of master {master_id}"))
    return out


def check_stream(txns: Sequence[AxiTransaction], cfg: OracleConfig,
                 horizon: Optional[int] = None) -> list[Violation]:
    """Full-stream check: per-header rules plus stateful QoS/stall rules."""
    violations, _ = _walk_stream(txns, cfg, horizon)
    return violations


def attribute_violations(txns: Sequence[AxiTransaction], cfg: OracleConfig,
                         horizon: Optional[int] = None) -> dict:
    """Map each transaction index to the violation kinds it triggers.

    A transaction inside a saturated-QoS run of at least window length is
    attributed QosFlooding even if the firing event lands on a later member
    of the run; this is the contract the ground-truth labels rest on.
    """
    _, attribution = _walk_stream(txns, cfg, horizon)
    return attribution


def _walk_stream(txns: Sequence[AxiTransaction], cfg: OracleConfig,
                 horizon: Optional[int]):
    violations: list[Violation] = []
    attribution: dict[int, set] = {i: set() for i in range(len(txns))}

    if horizon is None:
        horizon = 0
        for t in txns:
            for e in t.events:
                if e.cycle > horizon:
                    horizon = e.cycle

    # Per-header rules, replayed against reconstructed outstanding state.
    # Issues are processed before same-cycle completions: an id whose final
    # response lands this cycle was still in flight when the new address
    # handshake occurred.
    ctx = OutstandingState()
    timeline = []
    for idx, txn in enumerate(txns):
        addr = txn.address_event()
        if addr is None:
            continue
        timeline.append((addr.cycle, 0, idx, "issue"))
        if txn.completed:
            timeline.append((txn.complete_cycle, 1, idx, "complete"))
    timeline.sort(key=lambda item: (item[0], item[1], item[2]))

    for cycle, _, idx, what in timeline:
        txn = txns[idx]
        addr = txn.address_event()
        if what == "complete":
            ctx.complete(addr.header.channel, addr.header.id, txn.master_id)
            continue
        for v in check_header(addr.header, cfg, ctx, txn.master_id, cycle):
            violations.append(Violation(v.kind, v.cycle, v.master_id,
                                        v.detail, txn_index=idx))
            attribution[idx].add(v.kind)
        ctx.issue(addr.header.channel, addr.header.id, txn.master_id, cycle)

    _check_qos_flooding(txns, cfg, violations, attribution)
    _check_write_stalls(txns, cfg, horizon, violations, attribution)
    violations.sort(key=lambda v: (v.cycle, v.kind.value, v.master_id))
    return violations, attribution


def _check_qos_flooding(txns, cfg, violations, attribution):
    # Consecutive saturated-QoS transactions are tracked per (master,
    # address channel) in that master's own issue order: reads interleaved
    # by the same master do not break an AW flood.
    runs: dict[tuple, list] = {}
    order = sorted(
        ((t.address_event().cycle, i) for i, t in enumerate(txns)
         if t.address_event() is not None),
        key=lambda item: item)
    for cycle, idx in order:
        txn = txns[idx]
        addr = txn.address_event()
        run = runs.setdefault((txn.master_id, addr.header.channel), [])
        if addr.header.qos == cfg.qos_flood_value:
            run.append((idx, cycle))
            if len(run) >= cfg.qos_flood_window:
                violations.append(Violation(
                    ViolationKind.QosFlooding, cycle, txn.master_id,
                    f"{len(run)} consecutive {addr.header.channel.value} "
                    f"transactions at QOS=0x{cfg.qos_flood_value:X}",
                    txn_index=idx))
        else:
            _close_qos_run(run, cfg, attribution)
            run.clear()
    for run in runs.values():
        _close_qos_run(run, cfg, attribution)


def _close_qos_run(run, cfg, attribution):
    if len(run) >= cfg.qos_flood_window:
        for idx, _ in run:
            attribution[idx].add(ViolationKind.QosFlooding)


def _check_write_stalls(txns, cfg, horizon, violations, attribution):
    # The W channel serves bursts in AW-handshake order, so a write is only
    # accountable for cycles where the channel was actually available to it:
    # from max(its AW cycle, predecessor's final beat + 1).  Followers stuck
    # behind a withholding head are victims, not culprits, and stay clean.
    # Structurally illegal writes (burst overflow, invalid size) are aborted
    # by the interconnect without a data phase and take no W-channel turn.
    def takes_w_turn(t):
        hdr = t.address_event().header
        return (hdr.len <= cfg.max_legal_len
                and (1 << hdr.size) <= cfg.bus_width_bytes)

    writes = sorted(
        ((t.address_event().cycle, i) for i, t in enumerate(txns)
         if t.is_write and t.address_event() is not None
         and takes_w_turn(t)),
        key=lambda item: item)
    prev_end: float = -1.0
    for aw_cycle, idx in writes:
        txn = txns[idx]
        avail = max(aw_cycle, prev_end + 1)
        beats = [e.cycle for e in txn.events_on(ChannelKind.W)]
        expected = txn.address_event().header.len + 1
        stalled_at = None
        if not beats:
            if horizon - avail > cfg.stall_timeout_cycles:
                stalled_at = avail + cfg.stall_timeout_cycles + 1
        else:
            if beats[0] - avail > cfg.stall_timeout_cycles:
                stalled_at = avail + cfg.stall_timeout_cycles + 1
            else:
                last = beats[0]
                for b in beats[1:]:
                    if b - last > cfg.stall_timeout_cycles:
                        stalled_at = last + cfg.stall_timeout_cycles + 1
                        break
                    last = b
                if (stalled_at is None and len(beats) < expected
                        and horizon - beats[-1] > cfg.stall_timeout_cycles):
                    stalled_at = beats[-1] + cfg.stall_timeout_cycles + 1
        if stalled_at is not None:
            violations.append(Violation(
                ViolationKind.WriteStall, int(stalled_at), txn.master_id,
                f"W data withheld beyond {cfg.stall_timeout_cycles} cycles "
                f"after AW handshake at {aw_cycle}", txn_index=idx))
            attribution[idx].add(ViolationKind.WriteStall)
        if len(beats) == expected:
            prev_end = beats[-1]
        else:
            # burst never finished; the channel never frees up behind it
            prev_end = math.inf
