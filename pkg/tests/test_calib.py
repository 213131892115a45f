import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import power_law_fit

from pcmtrace import calib
from pcmtrace import device as dev
from pcmtrace.calib import DriftSample
from pcmtrace.errors import ConfigError, InsufficientDataError, ValidationError

TIMES = [float(t) for t in range(1, 31)]


def noisy(r_t0, nu, seed, sigma=0.02, times=TIMES, device_id="d0"):
    rng = np.random.default_rng(seed)
    return [DriftSample(device_id, t, r_t0 * t ** nu * float(np.exp(rng.normal(0, sigma))))
            for t in times]


def sse(samples, log_r0, nu, t0=1.0):
    return sum((math.log(s.r) - log_r0 - nu * math.log(s.t / t0)) ** 2 for s in samples)


class TestFit:
    def test_recovers_generating_model(self):
        fit = calib.fit_drift(calib.synthesize(2.0e6, 0.11, TIMES))
        assert fit.nu == pytest.approx(0.11, abs=1e-9)
        assert fit.r_t0 == pytest.approx(2.0e6, rel=1e-9)
        assert fit.rmse_log < 1e-12 and fit.n_samples == 30 and not fit.anomalous

    def test_constant_resistance(self):
        fit = calib.fit_drift([DriftSample("c", t, 2.5e6) for t in TIMES])
        assert fit.nu == pytest.approx(0.0, abs=1e-12)

    def test_three_device_measurement_keeps_order(self):
        p = dev.DeviceParams(nu=0.1)
        rows = []
        for name, r in (("a", 1.77e6), ("b", 2.39e6), ("c", 2.89e6)):
            d = dev.PcmDevice.with_reading(r, 1.0, p)
            rows.extend(DriftSample(name, t, dev.read_resistance(d, t)) for t in TIMES)
        fits = calib.fit_all(rows)
        assert [f.device_id for f in fits] == ["a", "b", "c"]
        assert [f.r_t0 for f in fits] == pytest.approx([1.77e6, 2.39e6, 2.89e6], rel=1e-9)
        assert all(f.nu == pytest.approx(0.1, abs=1e-9) for f in fits)

    def test_matches_independent_regression(self):
        s = noisy(2.2e6, 0.08, seed=5)
        fit = calib.fit_drift(s)
        r0, nu = power_law_fit([x.t for x in s], [x.r for x in s])
        assert fit.nu == pytest.approx(nu, rel=1e-10)
        assert fit.r_t0 == pytest.approx(r0, rel=1e-10)

    def test_too_few_distinct_times(self):
        with pytest.raises(InsufficientDataError):
            calib.fit_drift([DriftSample("x", 1.0, 2e6), DriftSample("x", 1.0, 2.1e6)])
        with pytest.raises(InsufficientDataError):
            calib.fit_drift([DriftSample("x", 1.0, 2e6)])

    def test_non_positive_values_report_positions(self):
        s = calib.synthesize(2e6, 0.1, TIMES)
        s[3] = DriftSample("d0", -1.0, 2e6)
        s[7] = DriftSample("d0", 8.0, 0.0)
        with pytest.raises(ValidationError) as exc:
            calib.fit_drift(s)
        assert len(exc.value.problems) == 2
        assert "sample 3" in exc.value.problems[0] and "sample 7" in exc.value.problems[1]

    def test_mixed_devices_rejected(self):
        s = calib.synthesize(2e6, 0.1, TIMES[:3], device_id="a") + calib.synthesize(
            2e6, 0.1, TIMES[:3], device_id="b")
        with pytest.raises(ValidationError):
            calib.fit_drift(s)

    def test_negative_exponent_is_flagged(self):
        fit = calib.fit_drift(calib.synthesize(2e6, -0.05, TIMES))
        assert fit.anomalous
        card = calib.export_model_card(fit)
        assert "anomalous_drift = true" in card
        with pytest.raises(ConfigError):
            calib.read_model_card(card)

    def test_trimmed_fit_ignores_outliers(self):
        s = calib.synthesize(2e6, 0.1, [float(t) for t in range(1, 41)])
        s[10] = DriftSample("d0", s[10].t, s[10].r * 3)
        s[30] = DriftSample("d0", s[30].t, s[30].r / 3)
        plain, trimmed = calib.fit_drift(s), calib.fit_drift(s, trim=True)
        assert trimmed.trimmed > 0
        assert abs(trimmed.nu - 0.1) < abs(plain.nu - 0.1)

    def test_predict(self):
        fit = calib.fit_drift(calib.synthesize(2e6, 0.1, TIMES, t0=2.0), t0=2.0)
        assert fit.predict([2.0, 20.0]) == pytest.approx([2e6, 2e6 * 10 ** 0.1], rel=1e-9)


class TestCsv:
    def test_parse(self):
        text = "device_id,t_seconds,resistance_ohms\nA,1,1.77e6\nA,2,1.9e6\nB,1,2.39e6\n"
        s = calib.parse_samples(io.StringIO(text))
        assert [(x.device_id, x.t, x.r, x.row) for x in s] == [
            ("A", 1.0, 1.77e6, 2), ("A", 2.0, 1.9e6, 3), ("B", 1.0, 2.39e6, 4)]

    def test_row_numbers(self):
        text = ("device_id,t_seconds,resistance_ohms\nA,1,1.77e6\nA,0,1.9e6\nA,x,2e6\n"
                ",3,2e6\nA,4,-5\n")
        with pytest.raises(ValidationError) as exc:
            calib.parse_samples(io.StringIO(text))
        assert [p.split(":")[0] for p in exc.value.problems] == ["row 3", "row 4", "row 5", "row 6"]

    def test_header(self):
        with pytest.raises(ValidationError):
            calib.parse_samples(io.StringIO("id,t,r\nA,1,2\n"))

    def test_empty(self):
        with pytest.raises(InsufficientDataError):
            calib.parse_samples(io.StringIO("device_id,t_seconds,resistance_ohms\n"))

    def test_load_from_file(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("device_id,t_seconds,resistance_ohms\n" +
                     "".join(f"A,{t},{2e6 * t ** 0.1!r}\n" for t in range(1, 6)))
        fits = calib.fit_all(calib.load_samples(p))
        assert fits[0].nu == pytest.approx(0.1, abs=1e-9)


class TestCard:
    def test_round_trip(self, tmp_path):
        fit = calib.fit_drift(calib.synthesize(2.39e6, 0.09, TIMES, device_id="dev7"))
        path = tmp_path / "card.ini"
        path.write_text(calib.export_model_card(fit))
        params, prov = calib.read_model_card(path)
        assert prov["device_id"] == "dev7" and float(prov["rmse_log"]) == fit.rmse_log
        assert params.nu == fit.nu
        d = dev.PcmDevice.from_params(params, 0.0)
        refit = calib.fit_drift([DriftSample("x", t, dev.read_resistance(d, t)) for t in TIMES])
        assert refit.nu == pytest.approx(fit.nu, abs=1e-6)
        assert refit.r_t0 == pytest.approx(fit.r_t0, rel=1e-6)

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            calib.read_model_card("[device]\nnu = 0.1\nflux = 3\n")
        with pytest.raises(ConfigError):
            calib.read_model_card("[other]\nnu = 0.1\n")


# properties

@settings(max_examples=40)
@given(c=st.floats(min_value=1e-3, max_value=1e3), seed=st.integers(0, 1000))
def test_scale_equivariance(c, seed):
    s = noisy(2e6, 0.1, seed)
    a = calib.fit_drift(s)
    b = calib.fit_drift([DriftSample(x.device_id, x.t, c * x.r) for x in s])
    assert b.nu == pytest.approx(a.nu, abs=1e-9)
    assert b.r_t0 == pytest.approx(c * a.r_t0, rel=1e-9)


@settings(max_examples=40)
@given(k=st.floats(min_value=1e-3, max_value=1e3), seed=st.integers(0, 1000))
def test_time_unit_equivariance(k, seed):
    s = noisy(2e6, 0.1, seed)
    a = calib.fit_drift(s, t0=1.0)
    b = calib.fit_drift([DriftSample(x.device_id, k * x.t, x.r) for x in s], t0=k)
    assert b.nu == pytest.approx(a.nu, abs=1e-9)
    assert b.r_t0 == pytest.approx(a.r_t0, rel=1e-9)


@settings(max_examples=40)
@given(seed=st.integers(0, 10_000), dn=st.sampled_from([-1e-3, 1e-3]),
       dr=st.sampled_from([-1e-3, 0.0, 1e-3]))
def test_fit_minimizes_log_sse(seed, dn, dr):
    s = noisy(2.4e6, 0.1, seed, sigma=0.05)
    fit = calib.fit_drift(s)
    best = sse(s, math.log(fit.r_t0), fit.nu)
    assert sse(s, math.log(fit.r_t0) + dr, fit.nu + dn) >= best
    assert sse(s, math.log(fit.r_t0) + dn, fit.nu) >= best
