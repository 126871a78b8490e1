"""Systematic synthesis of DoS attack traffic on the simulated bus.

Each attack plan compiles into an injection script that replaces the
attacker master's issue stream for a window of the run.  Every injected
transaction carries a ground-truth tag; `verify_label_agreement` checks the
contract all downstream metrics rest on: tagged transactions trigger an
oracle violation of the matching kind and untagged ones trigger none.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

import numpy as np

from .axi import (AxiTransaction, Burst, OracleConfig, ViolationKind,
                  attribute_violations)
from .errors import ConfigError, SimHorizonExceeded
from .sim import (ABORT_MAX_LEN, BUS_WIDTH_BYTES, InjectionScript,
                  MasterProfile, SimConfig, SimTrace, _Request,
                  estimate_horizon, oracle_config_for, simulate, trim_trace)


class AttackKind(Enum):
    AwlenOverflow = "awlen_overflow"
    AridDuplication = "arid_duplication"
    AwqosFlooding = "awqos_flooding"
    AwsizeInvalid = "awsize_invalid"
    ArprotViolation = "arprot_violation"
    WdataWithhold = "wdata_withhold"
    Mixed = "mixed"


# which oracle violation each base vector must trigger
VIOLATION_FOR = {
    AttackKind.AwlenOverflow: ViolationKind.BurstLengthOverflow,
    AttackKind.AridDuplication: ViolationKind.DuplicateId,
    AttackKind.AwqosFlooding: ViolationKind.QosFlooding,
    AttackKind.AwsizeInvalid: ViolationKind.InvalidSize,
    AttackKind.ArprotViolation: ViolationKind.ProtViolation,
    AttackKind.WdataWithhold: ViolationKind.WriteStall,
}

_BASE_KINDS = tuple(VIOLATION_FOR)

# per-kind sample counts of the reference malicious corpus
DEFAULT_ATTACK_MIX: dict = {
    AttackKind.AwlenOverflow: 642,
    AttackKind.AridDuplication: 558,
    AttackKind.AwqosFlooding: 423,
    AttackKind.AwsizeInvalid: 389,
    AttackKind.ArprotViolation: 345,
    AttackKind.Mixed: 885,
}


@dataclass
class AttackPlan:
    """One attacker, one window, `count` tagged malicious transactions."""

    kind: AttackKind
    attacker_master: int
    start_cycle: int
    count: int
    params: dict = field(default_factory=dict)

    def validate(self, cfg: SimConfig) -> None:
        if self.count <= 0:
            raise ConfigError("attack count must be > 0")
        if not 0 <= self.attacker_master < cfg.num_masters:
            raise ConfigError(
                f"attacker master {self.attacker_master} out of range")
        if self.start_cycle < 0 or self.start_cycle >= cfg.cycles:
            raise ConfigError("start_cycle outside simulation horizon")
        window = self.params.get("flood_window",
                                 OracleConfig().qos_flood_window)
        if self.kind is AttackKind.AwqosFlooding and self.count < window:
            raise ConfigError(
                f"flooding needs at least {window} consecutive transactions")
        lr = self.params.get("len_range", (16, 255))
        if self.kind is AttackKind.AwlenOverflow and not (
                ABORT_MAX_LEN < lr[0] <= lr[1] <= 255):
            raise ConfigError(f"overflow len range {lr} not in [16, 255]")


def _plan_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed & 0xFFFF_FFFF, 202, index])))


def _nominal(rng: np.random.Generator, profile: MasterProfile,
             cfg: SimConfig, mid: int, is_write: bool) -> _Request:
    blen = int(rng.choice((0, 1, 3)))
    size = int(rng.choice((0, 1, 2, 3)))
    qos = int(rng.integers(0, 4))
    prot = int(rng.choice(profile.allowed_prot))
    target = int(rng.integers(0, cfg.num_targets))
    offset = int(rng.integers(0, profile.addr_span >> 3)) << 3
    addr = ((target & 0xF) << 28) | ((mid & 0xF) << 24) | (offset & 0xFF_FFFF)
    return _Request(is_write=is_write, len=blen, size=size, burst=Burst.INCR,
                    qos=qos, prot=prot, addr=addr, strb=0xFF)


def _craft(basis: AttackKind, rng, profile, cfg, mid, params) -> _Request:
    oracle = OracleConfig()
    if basis is AttackKind.AwlenOverflow:
        lo, hi = params.get("len_range", (16, 255))
        req = _nominal(rng, profile, cfg, mid, is_write=True)
        # log-uniform: an attacker minimizes its footprint, so lengths
        # cluster just past the legal limit while still spanning the range
        u = rng.random()
        req.len = min(hi, int(round(lo * (hi / lo) ** u)))
        req.gap_after = int(rng.integers(0, 4))
    elif basis is AttackKind.AridDuplication:
        req = _nominal(rng, profile, cfg, mid, is_write=False)
        req.duplicate_id = True
        req.gap_after = int(rng.integers(0, 4))
    elif basis is AttackKind.AwqosFlooding:
        req = _nominal(rng, profile, cfg, mid, is_write=True)
        req.len = int(rng.choice((0, 1)))
        req.qos = params.get("flood_qos", oracle.qos_flood_value)
        req.gap_after = 0
    elif basis is AttackKind.AwsizeInvalid:
        req = _nominal(rng, profile, cfg, mid, is_write=True)
        max_size = BUS_WIDTH_BYTES.bit_length() - 1
        req.size = int(rng.integers(max_size + 1, 8))
        req.gap_after = int(rng.integers(0, 4))
    elif basis is AttackKind.ArprotViolation:
        req = _nominal(rng, profile, cfg, mid, is_write=False)
        illegal = [p for p in range(8) if p not in profile.allowed_prot]
        # prefer values other masters use legitimately: the violation is
        # relative to the issuer, not visible in the value alone
        common = [p for p in illegal if p < 4]
        req.prot = int(rng.choice(common if common else illegal))
        req.gap_after = int(rng.integers(0, 4))
    elif basis is AttackKind.WdataWithhold:
        req = _nominal(rng, profile, cfg, mid, is_write=True)
        req.len = int(rng.choice((1, 3)))
        lo = params.get("withhold_min",
                        oracle.stall_timeout_cycles + 8)
        hi = params.get("withhold_max",
                        oracle.stall_timeout_cycles + 96)
        req.withhold_cycles = int(rng.integers(lo, hi + 1))
        req.never_complete = bool(params.get("never_complete", False))
        req.gap_after = int(rng.integers(0, 3))
    else:
        raise ConfigError(f"{basis} is not a base attack kind")
    return req


def _mixed_bases(rng, count: int, window: int) -> list:
    n_bases = int(rng.integers(2, 5))
    picks = list(rng.choice(len(_BASE_KINDS), size=n_bases, replace=False))
    bases = [_BASE_KINDS[i] for i in picks]
    if AttackKind.AwqosFlooding in bases and count < window + n_bases - 1:
        bases = [b for b in bases if b is not AttackKind.AwqosFlooding]
        while len(bases) < 2:
            extra = _BASE_KINDS[int(rng.integers(0, len(_BASE_KINDS) - 1))]
            if extra not in bases and extra is not AttackKind.AwqosFlooding:
                bases.append(extra)
    sequence: list = []
    if AttackKind.AwqosFlooding in bases:
        others = [b for b in bases if b is not AttackKind.AwqosFlooding]
        sequence = [AttackKind.AwqosFlooding] * window
        insert_at = int(rng.integers(0, count - window + 1))
        rest = count - window
        filler = _draw_fillers(rng, others, rest, count)
        sequence = filler[:insert_at] + sequence + filler[insert_at:]
    else:
        sequence = _draw_fillers(rng, bases, count, count)
    return sequence


def _draw_fillers(rng, bases, n: int, total: int) -> list:
    # withholding blocks the bus for hundreds of cycles; keep it rare
    quota = max(1, total // 24)
    out = []
    used = 0
    for _ in range(n):
        b = bases[int(rng.integers(0, len(bases)))]
        if b is AttackKind.WdataWithhold:
            if used >= quota:
                alternatives = [x for x in bases
                                if x is not AttackKind.WdataWithhold]
                if alternatives:
                    b = alternatives[int(rng.integers(0, len(alternatives)))]
            else:
                used += 1
        out.append(b)
    return out


def inject(plan: AttackPlan, cfg: SimConfig,
           plan_index: int = 0) -> InjectionScript:
    """Compile a plan into the mutated issue stream the simulator consumes.

    Deterministic per (cfg.seed, plan_index); the script's requests carry
    the ground-truth tags and, for mixed patterns, the base vector each
    transaction instantiates.
    """
    plan.validate(cfg)
    rng = _plan_rng(cfg.seed, plan_index)
    profile = cfg.profiles()[plan.attacker_master]
    window = plan.params.get("flood_window", OracleConfig().qos_flood_window)
    if plan.kind is AttackKind.Mixed:
        bases = _mixed_bases(rng, plan.count, window)
    else:
        bases = [plan.kind] * plan.count
    requests = []
    for basis in bases:
        req = _craft(basis, rng, profile, cfg, plan.attacker_master,
                     plan.params)
        req.attack_kind = plan.kind
        req.attack_basis = basis
        requests.append(req)
    return InjectionScript(master_id=plan.attacker_master,
                           start_cycle=plan.start_cycle, requests=requests)


def _est_cycles(kind: AttackKind, count: int) -> int:
    # per-transaction estimates, inflated 2x for arbitration contention
    per = {AttackKind.AwlenOverflow: 7, AttackKind.AridDuplication: 10,
           AttackKind.AwqosFlooding: 4, AttackKind.AwsizeInvalid: 7,
           AttackKind.ArprotViolation: 10, AttackKind.WdataWithhold: 420,
           AttackKind.Mixed: 36}[kind]
    return 2 * per * count + 64


def build_plans(cfg: SimConfig, mix: Mapping, seed: Optional[int] = None,
                first_start: int = 2_048) -> list:
    """Chunk a per-kind sample mix into scheduled plans spread over the
    attacker masters 1..n-1 (master 0 stays a pure victim).  Attackers run
    their windows in parallel lanes so the whole campaign stays early in
    the run."""
    seed = cfg.seed if seed is None else seed
    rng = _plan_rng(seed, 0xA11)
    window = OracleConfig().qos_flood_window
    chunks: list[tuple] = []
    for kind in sorted(mix, key=lambda k: k.value):
        remaining = int(mix[kind])
        if remaining < 0:
            raise ConfigError(f"negative count for {kind}")
        while remaining > 0:
            if kind is AttackKind.AwqosFlooding:
                size = int(rng.integers(window, 4 * window + 1))
                if remaining - size < window:
                    size = remaining
            elif kind is AttackKind.WdataWithhold:
                size = min(remaining, int(rng.integers(1, 5)))
            elif kind is AttackKind.Mixed:
                size = min(remaining, int(rng.integers(40, 91)))
            else:
                size = min(remaining, int(rng.integers(60, 121)))
            size = min(size, remaining)
            chunks.append((kind, size))
            remaining -= size
    order = rng.permutation(len(chunks))
    plans = []
    attackers = list(range(1, cfg.num_masters)) or [0]
    cursor = {m: first_start for m in attackers}
    for ci in order:
        kind, size = chunks[int(ci)]
        attacker = min(cursor, key=lambda m: (cursor[m], m))
        plans.append(AttackPlan(kind=kind, attacker_master=attacker,
                                start_cycle=cursor[attacker], count=size))
        cursor[attacker] += _est_cycles(kind, size) + int(
            rng.integers(256, 1025))
    return plans


def compile_plans(plans: list, cfg: SimConfig) -> list:
    return [inject(plan, cfg, plan_index=i + 1)
            for i, plan in enumerate(plans)]


def build_attack_corpus(cfg: SimConfig, mix: Mapping,
                        seed: Optional[int] = None,
                        normal_count: Optional[int] = None) -> SimTrace:
    """Run the dual-mode simulation: seeded normal traffic plus the full
    attack mix, trimmed to exactly `normal_count` clean transactions when
    requested.  Tagged counts match the mix exactly."""
    total = sum(int(v) for v in mix.values())
    if total <= 0:
        raise ConfigError("attack mix must request at least one sample")
    seed = cfg.seed if seed is None else seed
    plans = build_plans(cfg, mix, seed=seed)
    attack_span = max(p.start_cycle + _est_cycles(p.kind, p.count)
                      for p in plans) + 2_048
    pad = normal_count if normal_count is not None else 0
    horizon = max(cfg.cycles, attack_span,
                  estimate_horizon(cfg, pad + total))
    for _ in range(4):
        run_cfg = SimConfig(num_masters=cfg.num_masters,
                            num_targets=cfg.num_targets, cycles=horizon,
                            seed=seed, load_percent=cfg.load_percent,
                            arbitration=cfg.arbitration,
                            master_profiles=cfg.master_profiles)
        trace = simulate(run_cfg, compile_plans(plans, run_cfg))
        tagged = [t for t in trace.transactions if t.attack_kind is not None]
        per_kind: dict = {}
        for t in tagged:
            per_kind[t.attack_kind] = per_kind.get(t.attack_kind, 0) + 1
        short = any(per_kind.get(k, 0) < int(mix[k]) for k in mix)
        if short:
            horizon = int(horizon * 1.5)
            continue
        if normal_count is None:
            return trace
        normals = [t for t in trace.transactions if t.attack_kind is None]
        if len(normals) < normal_count:
            horizon = int(horizon * 1.5)
            continue
        last_attack_cycle = max(
            e.cycle for t in tagged for e in t.events)
        cutoff = normals[normal_count - 1]
        if cutoff.issue_cycle <= last_attack_cycle:
            # only transactions issued after the whole campaign may be
            # trimmed; dropping earlier ones could erase the in-flight
            # context (or W-channel service order) that ground truth
            # attribution depends on
            raise SimHorizonExceeded(
                f"normal traffic reached {normal_count} transactions before "
                f"the attack campaign ended (cycle {last_attack_cycle}); "
                "request more normal samples relative to the attack mix")
        keep = tagged + normals[:normal_count]
        keep.sort(key=lambda t: t.events[0].cycle)
        return trim_trace(trace, keep)
    raise SimHorizonExceeded(
        f"attack corpus did not fit within {horizon} cycles")


def verify_label_agreement(trace: SimTrace,
                           oracle_cfg: Optional[OracleConfig] = None):
    """Check the tag-vs-oracle ground-truth contract over a whole trace.

    Returns (agreement_fraction, mismatches) where mismatches lists
    (txn_index, reason).  1.0 means every tagged transaction triggers (or
    contributes to) a violation of its kind and every untagged one is clean.
    """
    if oracle_cfg is None:
        oracle_cfg = OracleConfig()
    txns = trace.transactions
    attribution = attribute_violations(txns, oracle_cfg,
                                       horizon=trace.drained_at)
    mismatches = []
    for i, txn in enumerate(txns):
        kinds = attribution[i]
        if txn.attack_kind is None:
            if kinds:
                mismatches.append((i, f"untagged but oracle says {kinds}"))
        else:
            basis = txn.attack_basis or txn.attack_kind
            expected = VIOLATION_FOR[basis]
            if expected not in kinds:
                mismatches.append(
                    (i, f"tagged {basis} but oracle says {kinds or 'clean'}"))
    agreement = 1.0 - len(mismatches) / max(len(txns), 1)
    return agreement, mismatches
