"""Rule-oracle tests: per-header checks, stateful stream checks, and the
constructive coverage of every violation kind."""

import pytest

from axiguard.axi import (AxiHeader, AxiTransaction, Burst, ChannelEvent,
                          ChannelKind, OracleConfig, OutstandingState, Resp,
                          ViolationKind, attribute_violations, check_header,
                          check_stream)


def aw(cycle, master=0, **kw):
    hdr = AxiHeader(channel=ChannelKind.AW, **kw)
    return ChannelEvent(cycle, hdr)


def write_txn(master, aw_cycle, length=0, first_beat=None, beats=None,
              b_cycle=None, **hdr_kw):
    """Complete write with contiguous beats unless given explicitly."""
    events = [ChannelEvent(aw_cycle, AxiHeader(channel=ChannelKind.AW,
                                               len=length, **hdr_kw))]
    if beats is None:
        start = aw_cycle + 1 if first_beat is None else first_beat
        beats = list(range(start, start + length + 1))
    for i, c in enumerate(beats):
        events.append(ChannelEvent(c, AxiHeader(
            channel=ChannelKind.W, strb=0xFF, last=(i == len(beats) - 1))))
    complete = None
    if b_cycle is not None:
        events.append(ChannelEvent(b_cycle, AxiHeader(
            channel=ChannelKind.B, id=hdr_kw.get("id", 0))))
        complete = b_cycle
    return AxiTransaction(master_id=master, events=events,
                          issue_cycle=aw_cycle, complete_cycle=complete)


def read_txn(master, ar_cycle, length=0, rid=0, complete=True, **hdr_kw):
    events = [ChannelEvent(ar_cycle, AxiHeader(
        channel=ChannelKind.AR, id=rid, len=length, **hdr_kw))]
    last_cycle = None
    for i in range(length + 1):
        last_cycle = ar_cycle + 2 + i
        events.append(ChannelEvent(last_cycle, AxiHeader(
            channel=ChannelKind.R, id=rid, last=(i == length))))
    if not complete:
        events = events[:1]
        last_cycle = None
    return AxiTransaction(master_id=master, events=events,
                          issue_cycle=ar_cycle, complete_cycle=last_cycle)


class TestHeaderValidation:
    def test_width_enforced(self):
        with pytest.raises(ValueError):
            AxiHeader(channel=ChannelKind.AW, len=256)
        with pytest.raises(ValueError):
            AxiHeader(channel=ChannelKind.AW, qos=16)

    def test_inapplicable_fields_rejected(self):
        with pytest.raises(ValueError):
            AxiHeader(channel=ChannelKind.AW, resp=Resp.SLVERR)
        with pytest.raises(ValueError):
            AxiHeader(channel=ChannelKind.B, strb=0xFF)
        with pytest.raises(ValueError):
            AxiHeader(channel=ChannelKind.AW, last=True)

    def test_nominal_headers_construct(self):
        AxiHeader(channel=ChannelKind.AW, id=3, addr=0x1000, len=15, size=3,
                  burst=Burst.INCR, qos=14, prot=2)
        AxiHeader(channel=ChannelKind.R, id=1, resp=Resp.OKAY, last=True)


class TestCheckHeader:
    def test_len_16_overflows(self):
        hdr = AxiHeader(channel=ChannelKind.AW, len=16)
        out = check_header(hdr, OracleConfig(), OutstandingState())
        assert [v.kind for v in out] == [ViolationKind.BurstLengthOverflow]

    def test_len_15_boundary_is_legal(self):
        hdr = AxiHeader(channel=ChannelKind.AW, len=15)
        assert check_header(hdr, OracleConfig(), OutstandingState()) == []

    def test_duplicate_ar_id_from_other_master(self):
        ctx = OutstandingState()
        ctx.issue(ChannelKind.AR, 3, master_id=0, cycle=10)
        hdr = AxiHeader(channel=ChannelKind.AR, id=3)
        out = check_header(hdr, OracleConfig(), ctx, master_id=1, cycle=20)
        assert [v.kind for v in out] == [ViolationKind.DuplicateId]

    def test_same_master_id_reuse_also_flagged(self):
        ctx = OutstandingState()
        ctx.issue(ChannelKind.AR, 5, master_id=2, cycle=10)
        hdr = AxiHeader(channel=ChannelKind.AR, id=5)
        out = check_header(hdr, OracleConfig(), ctx, master_id=2, cycle=20)
        assert [v.kind for v in out] == [ViolationKind.DuplicateId]

    def test_size_16_bytes_on_8_byte_bus(self):
        hdr = AxiHeader(channel=ChannelKind.AW, size=4)
        out = check_header(hdr, OracleConfig(), OutstandingState())
        assert [v.kind for v in out] == [ViolationKind.InvalidSize]

    def test_prot_outside_privilege_set(self):
        cfg = OracleConfig(allowed_prot={1: frozenset({0, 2})})
        hdr = AxiHeader(channel=ChannelKind.AR, prot=1)
        out = check_header(hdr, cfg, OutstandingState(), master_id=1)
        assert [v.kind for v in out] == [ViolationKind.ProtViolation]
        legal = AxiHeader(channel=ChannelKind.AR, prot=2)
        assert check_header(legal, cfg, OutstandingState(), master_id=1) == []

    def test_purity_same_inputs_same_output(self):
        ctx = OutstandingState()
        ctx.issue(ChannelKind.AW, 1, 0, 5)
        hdr = AxiHeader(channel=ChannelKind.AW, id=1, len=40)
        a = check_header(hdr, OracleConfig(), ctx, master_id=1, cycle=9)
        b = check_header(hdr, OracleConfig(), ctx, master_id=1, cycle=9)
        assert a == b


class TestCheckStream:
    def test_qos_flood_window_fires_once_at_eighth(self):
        cfg = OracleConfig()
        txns = [write_txn(1, 10 * i, length=0, b_cycle=10 * i + 3, qos=0xF)
                for i in range(8)]
        out = check_stream(txns, cfg)
        floods = [v for v in out if v.kind is ViolationKind.QosFlooding]
        assert len(floods) == 1
        assert floods[0].cycle == 70
        assert floods[0].master_id == 1

    def test_seven_floods_then_low_qos_is_clean(self):
        txns = [write_txn(1, 10 * i, length=0, b_cycle=10 * i + 3, qos=0xF)
                for i in range(7)]
        txns.append(write_txn(1, 70, length=0, b_cycle=73, qos=0))
        assert check_stream(txns, OracleConfig()) == []

    def test_write_stall_fires_past_timeout(self):
        txn = write_txn(0, 100, length=0, beats=[])
        txn.complete_cycle = None
        out = check_stream([txn], OracleConfig(), horizon=357)
        assert [v.kind for v in out] == [ViolationKind.WriteStall]
        assert out[0].cycle == 357

    def test_write_within_timeout_is_clean(self):
        txn = write_txn(0, 100, length=0, beats=[])
        txn.complete_cycle = None
        assert check_stream([txn], OracleConfig(), horizon=356) == []

    def test_follower_behind_withholder_stays_clean(self):
        # head write withholds past timeout; follower's beats start the
        # moment the channel frees, so only the head is the culprit
        head = write_txn(1, 100, length=0, beats=[500], b_cycle=501)
        follower = write_txn(2, 110, length=0, beats=[501], b_cycle=502,
                             id=1)
        out = check_stream([head, follower], OracleConfig())
        assert [(v.kind, v.master_id) for v in out] == [
            (ViolationKind.WriteStall, 1)]

    def test_mid_burst_withholding_flagged(self):
        txn = write_txn(0, 10, length=1, beats=[11, 300], b_cycle=301)
        out = check_stream([txn], OracleConfig())
        assert [v.kind for v in out] == [ViolationKind.WriteStall]

    def test_every_kind_constructively_producible(self):
        cfg = OracleConfig(allowed_prot={0: frozenset({0, 2}),
                                         1: frozenset({0, 2})})
        streams = {
            ViolationKind.BurstLengthOverflow:
                [write_txn(0, 10, length=16, beats=[], b_cycle=12)],
            ViolationKind.InvalidSize:
                [write_txn(0, 10, length=0, beats=[], b_cycle=12, size=4)],
            ViolationKind.DuplicateId:
                [read_txn(0, 10, rid=3, complete=False),
                 read_txn(1, 15, rid=3, complete=False)],
            ViolationKind.ProtViolation:
                [read_txn(1, 10, prot=1)],
            ViolationKind.QosFlooding:
                [write_txn(1, 10 * i, length=0, b_cycle=10 * i + 3, qos=0xF)
                 for i in range(8)],
            ViolationKind.WriteStall:
                [write_txn(0, 10, length=0, beats=[400], b_cycle=401)],
        }
        for kind, txns in streams.items():
            out = check_stream(txns, cfg)
            assert kind in {v.kind for v in out}, kind

    def test_clean_nominal_stream_empty(self):
        txns = [write_txn(0, 10, length=3, b_cycle=18),
                read_txn(1, 12, length=1, rid=4),
                write_txn(2, 30, length=0, b_cycle=34, id=8)]
        assert check_stream(txns, OracleConfig()) == []

    def test_prefix_monotonicity(self):
        prefix = [write_txn(0, 10, length=16, beats=[], b_cycle=12),
                  read_txn(1, 20, rid=4)]
        suffix = [write_txn(2, 500, length=0, b_cycle=504, id=9),
                  read_txn(3, 520, rid=12)]
        early = {(v.kind, v.cycle) for v in check_stream(prefix,
                                                         OracleConfig())}
        both = {(v.kind, v.cycle) for v in check_stream(prefix + suffix,
                                                        OracleConfig())}
        assert early <= both

    def test_id_reuse_after_completion_is_clean(self):
        first = read_txn(0, 10, rid=3)
        again = read_txn(0, first.complete_cycle + 1, rid=3)
        assert check_stream([first, again], OracleConfig()) == []

    def test_attribution_maps_flood_run_members(self):
        txns = [write_txn(1, 10 * i, length=0, b_cycle=10 * i + 3, qos=0xF)
                for i in range(9)]
        attr = attribute_violations(txns, OracleConfig())
        for i in range(9):
            assert ViolationKind.QosFlooding in attr[i]

    def test_transaction_validate(self):
        good = write_txn(0, 10, length=2, b_cycle=16)
        good.validate()
        bad = write_txn(0, 10, length=2, b_cycle=16)
        bad.events = bad.events[::-1]
        with pytest.raises(ValueError):
            bad.validate()


class TestOracleConfig:
    def test_thresholds_positive(self):
        with pytest.raises(ValueError):
            OracleConfig(max_legal_len=0)
        with pytest.raises(ValueError):
            OracleConfig(stall_timeout_cycles=-1)

    def test_outstanding_state_bookkeeping(self):
        st = OutstandingState()
        st.issue(ChannelKind.AR, 3, 0, 10)
        st.issue(ChannelKind.AR, 3, 1, 12)
        assert len(st) == 2
        assert st.is_outstanding(ChannelKind.AR, 3)
        st.complete(ChannelKind.AR, 3, 0)
        assert st.holders(ChannelKind.AR, 3) == [(1, 12)]
        st.complete(ChannelKind.AR, 3, 1)
        assert len(st) == 0
