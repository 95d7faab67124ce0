from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from flitnoc.analysis import (
    PathModel,
    TransactionModel,
    WclParams,
    WclReport,
    curve_csv,
    derive_wcl_params,
    header_wcl,
    latency_base,
    latency_be,
    latency_interleave,
    load_range,
    noc_latency,
    packet_wcl,
    payload_wcl,
    schedule_compare,
    sweep_offered_load,
    transaction_latency,
    validate_bound,
    wcl_breakdown,
)
from flitnoc.core_model import Address
from flitnoc.engine import LatencyRecord
from flitnoc.errors import Saturated
from flitnoc.traffic import FlowSpec, Periodic

FIG = PathModel(hops=4, t_r=3, b=1, flits=100)


def test_base_latency():
    assert latency_base(FIG) == 112
    assert latency_base(PathModel(4, 3, 1, 0)) == 12
    assert latency_base(PathModel(1, 2, 1, 1)) == 3


def test_best_effort():
    assert latency_be(FIG, 0) == 112
    assert latency_be(FIG, Fraction(1, 2)) == 212
    with pytest.raises(Saturated):
        latency_be(FIG, 1)


def test_interleave():
    assert latency_interleave(FIG, 3) == 312
    assert latency_interleave(FIG, 1) == latency_base(FIG)
    assert latency_interleave(PathModel(4, 3, 1, 0), 5) == 12
    ratio = Fraction(latency_interleave(FIG, 3), latency_base(FIG))
    assert Fraction(5, 2) <= ratio <= 3


@given(
    st.integers(0, 20), st.integers(1, 5), st.integers(1, 4), st.integers(0, 500), st.integers(1, 8)
)
def test_model_identities(h, tr, b, f, n):
    m = PathModel(h, tr, b, f)
    assert latency_interleave(m, 1) == latency_base(m)
    assert latency_be(m, 0) == latency_base(m)
    assert latency_interleave(m, n) == h * tr + n * Fraction(f, b)


def test_sweep():
    loads = load_range(0, "0.99", "0.01")
    assert len(loads) == 100 and loads[-1] == Fraction(99, 100)
    curve = sweep_offered_load(FIG, 3, loads)
    assert {pt.interleave_latency for pt in curve} == {312}
    assert curve[0].be_latency == 112
    assert all(pt.be_latency > 312 for pt in curve if pt.load > Fraction(2, 3))
    assert all(pt.be_latency <= 312 for pt in curve if pt.load <= Fraction(2, 3))
    assert all(pt.be_latency > 312 for pt in curve if pt.load >= Fraction(9, 10))
    be = [pt.be_latency for pt in curve]
    assert be == sorted(be) and be[-1] == 10012


def test_sweep_saturation_and_csv():
    curve = sweep_offered_load(FIG, 3, [0, Fraction(1, 2), 1])
    assert curve[-1].saturated
    assert curve_csv(curve) == (
        "offered_load,be_latency,interleave_latency,saturated\n"
        "0,112,312,0\n0.5,212,312,0\n1,,312,1\n"
    )


def test_wcl_examples():
    assert header_wcl([1, 1, 1, 1]) == 8
    assert header_wcl([3, 2]) == 10
    assert header_wcl([]) == 0
    assert payload_wcl(2, 100) == 396
    assert payload_wcl(5, 1) == 0
    assert payload_wcl(0, 50) == 0
    assert packet_wcl(WclParams([3, 2], 2, 100, 4)) == 414
    assert packet_wcl(WclParams([1], 0, 1, 1)) == 4
    assert wcl_breakdown(WclParams([3, 2], 2, 100, 4)) == {"header": 10, "payload": 396, "buffer": 8, "total": 414}


@given(
    st.lists(st.integers(1, 10), max_size=8), st.integers(0, 10), st.integers(1, 200), st.integers(1, 64), st.integers(1, 64)
)
def test_wcl_composition_and_linearity(n_i, k, f, b, db):
    w = WclParams(n_i, k, f, b)
    assert packet_wcl(w) == header_wcl(n_i) + payload_wcl(k, f) + 2 * b
    assert packet_wcl(WclParams(n_i, k, f, b + db)) - packet_wcl(w) == 2 * db


def test_wcl_params_validation():
    with pytest.raises(ValueError):
        WclParams([0], 0, 1, 1)
    with pytest.raises(ValueError):
        WclParams([1], -1, 1, 1)


def test_derive_wcl_params():
    sink = Address(1, 1, 5)
    a = FlowSpec("a", Address(0, 0, 1), sink, 8, Periodic(50))
    b = FlowSpec("b", Address(1, 0, 1), sink, 4, Periodic(50))
    c = FlowSpec("c", Address(0, 0, 3), Address(1, 0, 7), 4, Periodic(50))
    flows = [a, b, c]
    wa = derive_wcl_params(a, flows, 4)
    # a: (0,0)EE shared with c, (1,0)NN shared with b, (1,1)SW shared with b
    assert wa == WclParams((2, 2, 2), 1, 8, 4)
    assert derive_wcl_params(c, flows, 4) == WclParams((2, 1), 0, 4, 4)


def test_schedule_figure_example():
    s = schedule_compare([4, 3, 2])
    assert s.wormhole == (4, 7, 9)
    assert s.interleave[2] == 6
    assert s.interleave == (9, 8, 6)


def test_schedule_single_and_equal():
    assert schedule_compare([5]).wormhole == schedule_compare([5]).interleave == (5,)
    s = schedule_compare([2, 2, 2])
    assert s.interleave[0] >= s.wormhole[0]


def test_schedule_respects_order():
    s = schedule_compare([4, 3, 2], order=[2, 0, 1])
    assert s.wormhole == (6, 9, 2)
    with pytest.raises(ValueError):
        schedule_compare([1, 2], order=[0, 0])


def interleave_oracle(lengths, j):
    """Packet j (in priority order) finishes after every packet takes min(len, len_j)
    slots, minus the later packets' turns in j's final round."""
    lj = lengths[j]
    before = sum(min(n, lj) for n in lengths[: j + 1])
    after = sum(min(n, lj - 1) for n in lengths[j + 1:])
    return before + after


@given(st.lists(st.integers(1, 32), min_size=1, max_size=8))
def test_schedule_properties(lengths):
    s = schedule_compare(lengths)
    prefix = [sum(lengths[: i + 1]) for i in range(len(lengths))]
    assert list(s.wormhole) == prefix
    assert list(s.interleave) == [interleave_oracle(lengths, j) for j in range(len(lengths))]
    last = len(lengths) - 1
    assert s.interleave[last] <= s.wormhole[last]
    if any(n > lengths[last] for n in lengths[:last]):
        assert s.interleave[last] < s.wormhole[last]


def test_transactions():
    assert transaction_latency(TransactionModel()) == 0
    t = TransactionModel(1, 2, 3, 4, 5)
    assert noc_latency(t) == 10 and transaction_latency(t) == 15
    assert noc_latency(TransactionModel(t_wait_req=3, t_req=7)) == 10
    with pytest.raises(ValueError):
        TransactionModel(t_core=-1)


def test_validate_bound_report():
    assert validate_bound([], {}).rows == ()
    rec = LatencyRecord(0, "a", Address(0, 0, 1), Address(1, 1, 5), 3, 4, 0, 1, 8, 11)
    late = LatencyRecord(1, "a", Address(0, 0, 1), Address(1, 1, 5), 3, 4, 0, 1, 8, 40)
    rep = validate_bound([rec, late], {"a": WclParams([1, 1, 1], 0, 4, 4)})
    assert [r.slack for r in rep.rows] == [3, -26]
    assert not rep.ok and len(rep.violations) == 1
    assert rep.to_csv() == "packet_id,measured,bound,slack,violated\n0,11,14,3,0\n1,40,14,-26,1\n"
    assert WclReport(()).ok
