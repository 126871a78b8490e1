"""Attack synthesis: per-kind oracle coverage, tag soundness, locality."""

import numpy as np
import pytest

from axiguard.attacks import (AttackKind, AttackPlan, DEFAULT_ATTACK_MIX,
                              VIOLATION_FOR, build_attack_corpus,
                              build_plans, compile_plans, inject,
                              verify_label_agreement)
from axiguard.axi import ViolationKind, check_stream
from axiguard.errors import ConfigError
from axiguard.sim import SimConfig, oracle_config_for, simulate


def cfg_for(cycles=6_000, seed=31, **kw):
    return SimConfig(cycles=cycles, seed=seed, load_percent=50, **kw)


def run_one(kind, count=1, seed=31, cycles=6_000, params=None):
    cfg = cfg_for(cycles=cycles, seed=seed)
    plan = AttackPlan(kind=kind, attacker_master=1, start_cycle=1_000,
                      count=count, params=params or {})
    trace = simulate(cfg, [inject(plan, cfg)])
    return cfg, trace


class TestSingleInjections:
    def test_single_overflow_flags_exactly_one(self):
        cfg, trace = run_one(AttackKind.AwlenOverflow, count=1)
        tagged = [t for t in trace.transactions if t.attack_kind]
        assert len(tagged) == 1
        assert tagged[0].address_event().header.len > 15
        out = check_stream(trace.transactions, oracle_config_for(cfg),
                           horizon=trace.drained_at)
        overflows = [v for v in out
                     if v.kind is ViolationKind.BurstLengthOverflow]
        assert len(overflows) == 1

    @pytest.mark.parametrize("kind", [k for k in AttackKind
                                      if k is not AttackKind.Mixed])
    def test_each_base_kind_triggers_its_violation(self, kind):
        count = 8 if kind is AttackKind.AwqosFlooding else 3
        cfg, trace = run_one(kind, count=count)
        out = check_stream(trace.transactions, oracle_config_for(cfg),
                           horizon=trace.drained_at)
        assert VIOLATION_FOR[kind] in {v.kind for v in out}
        agreement, mismatches = verify_label_agreement(
            trace, oracle_config_for(cfg))
        assert agreement == 1.0, mismatches[:5]

    def test_flood_window_exact(self):
        cfg, trace = run_one(AttackKind.AwqosFlooding, count=8)
        out = check_stream(trace.transactions, oracle_config_for(cfg),
                           horizon=trace.drained_at)
        floods = [v for v in out if v.kind is ViolationKind.QosFlooding]
        assert len(floods) == 1
        tagged = [t for t in trace.transactions
                  if t.attack_kind is AttackKind.AwqosFlooding]
        assert len(tagged) == 8

    def test_withhold_stalls_and_delays_victims(self):
        cfg = cfg_for(cycles=9_000)
        plan = AttackPlan(kind=AttackKind.WdataWithhold, attacker_master=1,
                          start_cycle=2_000, count=3)
        baseline = simulate(cfg)
        attacked = simulate(cfg, [inject(plan, cfg)])
        out = check_stream(attacked.transactions, oracle_config_for(cfg),
                           horizon=attacked.drained_at)
        stalls = [v for v in out if v.kind is ViolationKind.WriteStall]
        assert len(stalls) == 3
        assert all(v.master_id == 1 for v in stalls)

        def victim_write_latency(trace):
            # mean over the attack window: the blocked W channel pushes a
            # tail of victim writes far out
            lat = [t.complete_cycle - t.issue_cycle
                   for t in trace.transactions
                   if t.master_id != 1 and t.is_write and t.completed
                   and 2_000 <= t.issue_cycle <= 4_500]
            return float(np.mean(lat))

        assert victim_write_latency(attacked) > victim_write_latency(
            baseline)

    def test_overflow_lens_span_range(self):
        cfg, trace = run_one(AttackKind.AwlenOverflow, count=100,
                             cycles=12_000)
        lens = [t.address_event().header.len
                for t in trace.transactions if t.attack_kind]
        assert len(lens) == 100
        assert min(lens) >= 16
        assert min(lens) <= 24
        assert max(lens) >= 160
        assert len(set(lens)) > 20

    def test_mixed_expands_to_multiple_bases(self):
        cfg, trace = run_one(AttackKind.Mixed, count=60, cycles=20_000)
        tagged = [t for t in trace.transactions
                  if t.attack_kind is AttackKind.Mixed]
        assert len(tagged) == 60
        bases = {t.attack_basis for t in tagged}
        assert len(bases) >= 2
        assert all(b is not AttackKind.Mixed for b in bases)
        agreement, mm = verify_label_agreement(trace, oracle_config_for(cfg))
        assert agreement == 1.0, mm[:5]


class TestPlanValidation:
    def test_attacker_out_of_range(self):
        cfg = cfg_for()
        plan = AttackPlan(AttackKind.AwlenOverflow, attacker_master=9,
                          start_cycle=100, count=1)
        with pytest.raises(ConfigError):
            inject(plan, cfg)

    def test_count_positive(self):
        with pytest.raises(ConfigError):
            inject(AttackPlan(AttackKind.AwlenOverflow, 1, 100, 0),
                   cfg_for())

    def test_flood_below_window_rejected(self):
        with pytest.raises(ConfigError):
            inject(AttackPlan(AttackKind.AwqosFlooding, 1, 100, 5),
                   cfg_for())


class TestCorpus:
    def test_counts_tags_and_agreement(self):
        cfg = cfg_for(seed=77)
        mix = {AttackKind.AwlenOverflow: 40, AttackKind.AridDuplication: 30,
               AttackKind.AwqosFlooding: 24, AttackKind.AwsizeInvalid: 20,
               AttackKind.ArprotViolation: 18, AttackKind.Mixed: 45}
        trace = build_attack_corpus(cfg, mix, normal_count=2_000)
        tagged = [t for t in trace.transactions if t.attack_kind]
        per_kind = {}
        for t in tagged:
            per_kind[t.attack_kind] = per_kind.get(t.attack_kind, 0) + 1
        assert per_kind == mix
        normals = [t for t in trace.transactions if t.attack_kind is None]
        assert len(normals) == 2_000
        agreement, mm = verify_label_agreement(trace, oracle_config_for(cfg))
        assert agreement == 1.0, mm[:5]

    def test_tags_only_on_attacker_masters(self):
        cfg = cfg_for(seed=78)
        mix = {AttackKind.AwlenOverflow: 30, AttackKind.AwqosFlooding: 16}
        plans = build_plans(cfg, mix)
        attacker_ids = {p.attacker_master for p in plans}
        trace = build_attack_corpus(cfg, mix, normal_count=1_500)
        for t in trace.transactions:
            if t.attack_kind is not None:
                assert t.master_id in attacker_ids
        assert 0 not in attacker_ids

    def test_injection_locality_prefix_identical(self):
        cfg = cfg_for(cycles=8_000, seed=79)
        plan = AttackPlan(AttackKind.AwqosFlooding, attacker_master=2,
                          start_cycle=4_000, count=16)
        base = simulate(cfg)
        attacked = simulate(cfg, [inject(plan, cfg)])

        def prefix(trace, end):
            return [(t.master_id, t.issue_cycle,
                     tuple((e.cycle, e.header) for e in t.events))
                    for t in trace.transactions
                    if t.events[0].cycle < end
                    and (t.complete_cycle or 0) < end]

        assert prefix(base, 4_000) == prefix(attacked, 4_000)

    def test_requires_positive_mix(self):
        with pytest.raises(ConfigError):
            build_attack_corpus(cfg_for(), {})

    def test_default_mix_totals(self):
        assert sum(DEFAULT_ATTACK_MIX.values()) == 3_242


class TestCompilePlans:
    def test_deterministic_scripts(self):
        cfg = cfg_for()
        mix = {AttackKind.AwlenOverflow: 25, AttackKind.Mixed: 40}
        a = compile_plans(build_plans(cfg, mix), cfg)
        b = compile_plans(build_plans(cfg, mix), cfg)
        assert len(a) == len(b)
        for sa, sb in zip(a, b):
            assert sa.master_id == sb.master_id
            assert sa.start_cycle == sb.start_cycle
            assert [r.__dict__ for r in sa.requests] == [
                r.__dict__ for r in sb.requests]
