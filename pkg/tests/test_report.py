import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcmtrace import report
from pcmtrace.errors import ValidationError
from pcmtrace.report import CostRow


def test_cmos_row():
    rep = report.cost_report([("CMOS", 20 * 17, 6)])
    assert rep.row("CMOS").area_per_tau == pytest.approx(56.67, abs=5e-3)
    assert report.truncate(rep.row("CMOS").area_per_tau, 1) == 56.6


def test_pcm_row_at_bound():
    rep = report.cost_report([CostRow("PCM", 144.0, 30.0)])
    assert rep.row("PCM").area_per_tau == pytest.approx(4.8, rel=1e-15)


def test_published_checks_and_ratio():
    rep = report.cost_report([(p.name, p.area_um2, p.tau_s) for p in report.PUBLISHED_ROWS])
    assert all(c.ok for c in report.check_published(rep))
    assert rep.ratio("CMOS", "PCM") > 10


def test_mismatch_is_detected():
    rep = report.cost_report([("CMOS", 340, 5), ("PCM", 144, 20)])
    checks = {c.name: c.ok for c in report.check_published(rep)}
    assert checks == {"CMOS": False, "PCM": False}


@pytest.mark.parametrize("entry", [("x", 0, 1), ("x", 1, -2), ("x", "a", 1), ("x", float("inf"), 1)])
def test_invalid_entries(entry):
    with pytest.raises(ValidationError):
        report.cost_report([entry])


def test_table_and_lookup():
    rep = report.cost_report([("a", 10, 2), ("b", 3, 3)])
    assert rep.table() == [("a", 10.0, 2.0, 5.0), ("b", 3.0, 3.0, 1.0)]
    with pytest.raises(KeyError):
        rep.row("c")


def test_load_entries(tmp_path):
    p = tmp_path / "rows.csv"
    p.write_text("name,area_um2,tau_s\nCMOS,20x17,6\nPCM,144,30\n")
    assert report.load_cost_entries(p) == [("CMOS", 340.0, 6.0), ("PCM", 144.0, 30.0)]
    p.write_text("name,area_um2,tau_s\nA,1,1\nB,x,1\nC,2,0\n")
    with pytest.raises(ValidationError) as exc:
        report.load_cost_entries(p)
    assert [m.split(":")[0] for m in exc.value.problems] == ["row 3", "row 4"]


@given(a=st.floats(min_value=1e-3, max_value=1e6), t=st.floats(min_value=1e-3, max_value=1e6),
       k=st.floats(min_value=1e-3, max_value=1e3))
def test_homogeneous(a, t, k):
    rep = report.cost_report([("one", a, t), ("two", k * a, k * t)])
    assert rep.row("one").area_per_tau == pytest.approx(rep.row("two").area_per_tau, rel=1e-12)
