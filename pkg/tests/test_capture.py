"""Capture schema and the three export formats."""

import os

import numpy as np
import pytest

from axiguard.attacks import AttackKind, AttackPlan, inject
from axiguard.axi import ChannelKind
from axiguard.capture import (ALL_FIELDS, DEBUG_COLUMNS, PROTOCOL_COLUMNS,
                              SAMPLE_BITS, SAMPLE_BYTES, Dataset, capture,
                              export_csv, export_raw, export_vcd, import_csv,
                              read_raw, read_vcd, vcd_value_at)
from axiguard.errors import CsvFormatError, SchemaError
from axiguard.sim import SimConfig, simulate, trim_trace


@pytest.fixture(scope="module")
def small_trace():
    return simulate(SimConfig(cycles=4_000, seed=17, load_percent=50))


@pytest.fixture(scope="module")
def mixed_trace():
    cfg = SimConfig(cycles=6_000, seed=18, load_percent=50)
    plans = [AttackPlan(AttackKind.AwlenOverflow, 1, 800, 5),
             AttackPlan(AttackKind.WdataWithhold, 2, 2_000, 2)]
    return simulate(cfg, [inject(p, cfg, i) for i, p in enumerate(plans)])


class TestSchema:
    def test_schema_counts(self):
        assert len(PROTOCOL_COLUMNS) == 52
        assert len(DEBUG_COLUMNS) == 5
        assert SAMPLE_BITS == 290
        assert SAMPLE_BYTES == 37

    def test_one_record_per_transaction(self, small_trace):
        ds = capture(small_trace)
        assert len(ds) == len(small_trace.transactions)
        assert ds.schema == list(PROTOCOL_COLUMNS + DEBUG_COLUMNS)
        assert ds.class_counts[1] == 0

    def test_labels_follow_tags(self, mixed_trace):
        ds = capture(mixed_trace)
        tagged = sum(1 for t in mixed_trace.transactions if t.attack_kind)
        assert ds.class_counts[1] == tagged == 7
        for rec in ds.records():
            assert (rec.label == 1) == (rec.attack_kind is not None)

    def test_values_fit_declared_widths(self, mixed_trace):
        ds = capture(mixed_trace)
        for j, (name, width) in enumerate(ALL_FIELDS):
            col = ds.values[:, j]
            assert col.min() >= 0, name
            assert col.max() < (1 << width), name

    def test_empty_trace_keeps_schema(self, small_trace):
        ds = capture(trim_trace(small_trace, []))
        assert len(ds) == 0
        assert len(ds.schema) == 57

    def test_inactive_channels_zeroed(self, small_trace):
        ds = capture(small_trace)
        col = {c: i for i, c in enumerate(ds.schema)}
        for rec_i in range(len(ds)):
            row = ds.values[rec_i]
            if row[col["is_write"]]:
                assert row[col["ar_active"]] == 0
                assert row[col["ar_addr"]] == 0
                assert row[col["r_beats"]] == 0
            else:
                assert row[col["aw_active"]] == 0
                assert row[col["w_beats"]] == 0
                assert row[col["b_valid"]] == 0

    def test_withheld_write_has_large_fill_wait(self, mixed_trace):
        ds = capture(mixed_trace)
        col = {c: i for i, c in enumerate(ds.schema)}
        waits = [ds.values[i, col["w_fill_wait"]]
                 for i, t in enumerate(mixed_trace.transactions)
                 if t.attack_kind is AttackKind.WdataWithhold]
        assert len(waits) == 2
        assert min(waits) > 256


class TestCsv:
    def test_round_trip_identity(self, mixed_trace, tmp_path):
        ds = capture(mixed_trace)
        path = export_csv(ds, str(tmp_path / "d.csv"))
        again = import_csv(path)
        assert ds.equals(again)

    def test_layout(self, small_trace, tmp_path):
        ds = capture(small_trace)
        path = export_csv(ds, str(tmp_path / "d.csv"))
        with open(path) as f:
            assert f.readline().strip() == "#schema_version=1"
            header = f.readline().strip().split(",")
            first = f.readline().strip().split(",")
        assert len(header) == 52 + 5 + 2
        assert header[-2:] == ["label", "attack_kind"]
        int(first[0])   # purely decimal

    def test_corrupt_row_reports_line(self, small_trace, tmp_path):
        ds = capture(small_trace)
        path = export_csv(ds, str(tmp_path / "d.csv"))
        lines = open(path).read().splitlines()
        lines[5] = lines[5].replace(",", ",junk,", 1)
        bad = tmp_path / "bad.csv"
        bad.write_text("\n".join(lines))
        with pytest.raises(CsvFormatError) as err:
            import_csv(str(bad))
        assert err.value.line == 6

    def test_missing_version_comment(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(CsvFormatError):
            import_csv(str(p))

    def test_wrong_columns_rejected(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("#schema_version=1\nfoo,bar\n1,2\n")
        with pytest.raises(SchemaError):
            import_csv(str(p))


class TestVcd:
    def test_replays_header_values(self, small_trace, tmp_path):
        two = trim_trace(small_trace, small_trace.transactions[:2])
        path = export_vcd(two, str(tmp_path / "t.vcd"))
        changes = read_vcd(path)
        for txn in two.transactions:
            addr = txn.address_event()
            p = "aw" if addr.header.channel is ChannelKind.AW else "ar"
            t = addr.cycle
            assert vcd_value_at(changes[p + "valid"], t) == 1
            assert vcd_value_at(changes[p + "ready"], t) == 1
            assert vcd_value_at(changes[p + "id"], t) == addr.header.id
            assert vcd_value_at(changes[p + "addr"], t) == addr.header.addr
            assert vcd_value_at(changes[p + "len"], t) == addr.header.len
            assert vcd_value_at(changes[p + "qos"], t) == addr.header.qos
            # valid drops once the handshake is done
            assert vcd_value_at(changes[p + "valid"], t + 1) == 0

    def test_declares_timescale_and_vars(self, small_trace, tmp_path):
        path = export_vcd(small_trace, str(tmp_path / "t.vcd"))
        text = open(path).read()
        assert "$timescale 1ns $end" in text
        assert "$var wire 8 " in text
        assert "$enddefinitions $end" in text

    def test_w_beats_replay(self, small_trace, tmp_path):
        path = export_vcd(small_trace, str(tmp_path / "t.vcd"))
        changes = read_vcd(path)
        writes = [t for t in small_trace.transactions if t.is_write]
        txn = writes[0]
        beats = txn.events_on(ChannelKind.W)
        assert vcd_value_at(changes["wlast"], beats[-1].cycle) == 1
        assert vcd_value_at(changes["wvalid"], beats[0].cycle) == 1


class TestRaw:
    def test_round_trip_and_size(self, mixed_trace, tmp_path):
        ds = capture(mixed_trace)
        path = export_raw(mixed_trace, str(tmp_path / "t.raw"))
        values = read_raw(path)
        assert np.array_equal(values, ds.values)
        size = os.path.getsize(path)
        assert size == 4 + 1 + 4 + len(ds) * SAMPLE_BYTES

    def test_magic_checked(self, tmp_path):
        p = tmp_path / "bad.raw"
        p.write_bytes(b"NOPE" + bytes(16))
        with pytest.raises(SchemaError):
            read_raw(str(p))

    def test_carries_no_labels(self, mixed_trace, tmp_path):
        # byte-identical raw for the same features with flipped labels
        ds = capture(mixed_trace)
        flipped = Dataset(ds.values.copy(), 1 - ds.labels,
                          [None] * len(ds), schema=ds.schema)
        a = export_raw(ds, str(tmp_path / "a.raw"))
        b = export_raw(flipped, str(tmp_path / "b.raw"))
        assert open(a, "rb").read() == open(b, "rb").read()
