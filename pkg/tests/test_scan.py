import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from iqm_lab.errors import NonPositiveSpeed
from iqm_lab.scan import ScanConfig, required_delay, run_scan, scan_verdict, schedule
from iqm_lab.worlds import WorldSpec, build_world

pos = st.floats(1e-3, 1e3, allow_nan=False, allow_infinity=False)


def contrast(v):
    return build_world(WorldSpec.make("influence_contrast", influence_speed=v))


def test_required_delay_examples():
    assert required_delay(ScanConfig(margin=1.0), 2.0) == 1.0
    assert required_delay(ScanConfig(d1=3.0, d2=1.0, margin=1.5), 2.0) == 3.0
    with pytest.raises(NonPositiveSpeed):
        required_delay(ScanConfig(), 0.0)


def test_invalid_configs():
    with pytest.raises(NonPositiveSpeed):
        ScanConfig(vi_grid=(1.0, -2.0))
    with pytest.raises(NonPositiveSpeed):
        ScanConfig(v1=0.0)
    with pytest.raises(ValueError):
        ScanConfig(vi_grid=(2.0, 1.0))
    with pytest.raises(ValueError):
        ScanConfig(margin=0.9)


@given(d1=pos, d2=pos, v1=pos, v2=pos, vi=pos, margin=st.floats(1.0, 10.0))
def test_schedule_exceeds_influence_window(d1, d2, v1, v2, vi, margin):
    cfg = ScanConfig(d1=d1, d2=d2, v1=v1, v2=v2, vi_grid=(vi,), margin=margin)
    run = schedule(cfg, vi)
    assert run.t_mes1 == d1 / v1
    assert run.t_mes2 >= d2 / v2
    assert run.gap > (d1 + d2) / vi
    assert run.tau == pytest.approx(margin * (d1 + d2) / vi)


def test_margin_one_still_strict():
    cfg = ScanConfig(margin=1.0, vi_grid=(3.0,), d1=0.1, d2=0.2)
    run = schedule(cfg, 3.0)
    assert run.gap > 0.3 / 3.0


def test_singlet_eliminates_whole_grid(singlet):
    rep = run_scan(singlet, ScanConfig(), 5)
    assert rep.eliminated == list(ScanConfig().vi_grid)
    assert rep.spread_within_ci
    v = scan_verdict(rep)
    assert v.kind == "no_influence_up_to_kappa" and v.bracket is None


@pytest.mark.parametrize("speed", [5.0, 1.5, 50.0])
def test_contrast_eliminated_set_is_reachable_speeds(speed):
    cfg = ScanConfig()
    rep = run_scan(contrast(speed), cfg, 6)
    # the influence lands before the second event iff vi <= margin * speed
    assert rep.eliminated == [vi for vi in cfg.vi_grid if vi <= cfg.margin * speed]
    v = scan_verdict(rep)
    assert v.kind == "influence_detected"
    lo, hi = v.bracket
    assert lo <= cfg.margin * speed < hi


def test_contrast_bracket_at_five():
    v = scan_verdict(run_scan(contrast(5.0), ScanConfig(), 7))
    assert v.bracket == (5.0, 10.0)
    assert str(v) == "influence_detected(bracket [5, 10])"


def test_slow_influence_fails_first_point():
    v = scan_verdict(run_scan(contrast(0.1), ScanConfig(), 7))
    assert v.bracket == (0.0, 1.0)


def test_small_samples_are_inconclusive(singlet):
    assert scan_verdict(run_scan(singlet, ScanConfig(N=20), 1)).kind == "inconclusive"


def test_empty_grid(singlet):
    rep = run_scan(singlet, ScanConfig(vi_grid=()), 1)
    assert rep.points == [] and scan_verdict(rep).kind == "no_influence_up_to_kappa"


def test_report_serializes_and_is_thread_independent(singlet):
    cfg = ScanConfig(N=5000, vi_grid=(1.0, 10.0))
    a, b = run_scan(singlet, cfg, 9), run_scan(singlet, cfg, 9, threads=4)
    assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)
    assert a.to_csv().splitlines()[0] == "vi,a,b,E,ci,S"
    assert len(a.to_csv().splitlines()) == 1 + 2 * 4
    assert a.quantum_S == pytest.approx(2 * math.sqrt(2))
