import math
import warnings

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdpcompare.pdp import (
    CancellationWarning,
    Frame,
    MultipathRecord,
    PdpError,
    PowerDelayProfile,
    apply_threshold,
    build_profile,
    dumps_pdp,
    loads_pdp,
    normalize_to_peak,
    process_profile,
    rezero_delays,
)


def rel(delays, powers, **kw):
    return PowerDelayProfile(np.array(delays, float), np.array(powers, float), frame=Frame.PEAK_RELATIVE_DB, **kw)


def ab(delays, powers, **kw):
    return PowerDelayProfile(np.array(delays, float), np.array(powers, float), **kw)


# --- types ------------------------------------------------------------------


def test_record_rejects_negative_toa():
    with pytest.raises(PdpError, match="invalid TOA"):
        MultipathRecord(1, -1e-9, -80.0, 0.0)


@pytest.mark.parametrize("raw, wrapped", [(370.0, 10.0), (-90.0, 270.0), (-1e-20, 0.0), (0.0, 0.0)])
def test_record_phase_wraps_into_range(raw, wrapped):
    r = MultipathRecord(1, 0.0, -80.0, raw)
    assert 0.0 <= r.phase_deg < 360.0
    assert r.phase_deg == pytest.approx(wrapped)


@pytest.mark.parametrize(
    "delays, powers, frame",
    [
        ([], [], Frame.ABSOLUTE_DBM),
        ([0, 0], [0, -1], Frame.PEAK_RELATIVE_DB),
        ([10, 5], [0, -1], Frame.PEAK_RELATIVE_DB),
        ([-1, 5], [0, -1], Frame.PEAK_RELATIVE_DB),
        ([0, 5], [-1, -2], Frame.PEAK_RELATIVE_DB),
        ([0, 5], [0, np.nan], Frame.ABSOLUTE_DBM),
    ],
)
def test_profile_invariants_enforced(delays, powers, frame):
    with pytest.raises(PdpError):
        PowerDelayProfile(np.array(delays, float), np.array(powers, float), frame=frame)


def test_profile_arrays_are_read_only():
    pdp = rel([0, 10], [0, -3])
    with pytest.raises(ValueError):
        pdp.delays_ns[0] = 1.0


def test_threshold_recorded_must_hold():
    with pytest.raises(PdpError):
        rel([0, 10], [0, -40], threshold_db=-30.0)


# --- build_profile ------------------------------------------------------------


def test_build_single_record():
    pdp = build_profile([MultipathRecord(1, 1e-7, -80.0, 30.0)])
    assert pdp.frame is Frame.ABSOLUTE_DBM
    assert pdp.delays_ns.tolist() == [0.0]
    assert pdp.powers_db.tolist() == [-80.0]


def test_build_two_records_noncoherent_sum():
    recs = [MultipathRecord(1, 1e-7, -80.0, 0.0), MultipathRecord(2, 1e-7 + 0.2e-9, -80.0, 90.0)]
    pdp = build_profile(recs, bin_width_ns=1.0)
    assert len(pdp) == 1
    # 10*log10(2) above a single path
    assert pdp.powers_db[0] == pytest.approx(-76.9897, abs=1e-4)
    assert pdp.delays_ns[0] == pytest.approx(0.1)


def test_build_coherent_cancellation_drops_bin():
    recs = [
        MultipathRecord(1, 1e-7, -80.0, 0.0),
        MultipathRecord(2, 1e-7, -80.0, 180.0),
        MultipathRecord(3, 1.5e-7, -85.0, 0.0),
    ]
    with pytest.warns(CancellationWarning):
        pdp = build_profile(recs, combine="coherent")
    assert pdp.delays_ns.tolist() == pytest.approx([50.0])
    assert pdp.powers_db[0] == pytest.approx(-85.0)


def test_build_coherent_full_cancellation_is_an_error():
    recs = [MultipathRecord(1, 1e-7, -80.0, 0.0), MultipathRecord(2, 1e-7, -80.0, 180.0)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CancellationWarning)
        with pytest.raises(PdpError):
            build_profile(recs, combine="coherent")


def test_build_coherent_in_phase_adds_amplitudes():
    recs = [MultipathRecord(1, 0.0, -80.0, 45.0), MultipathRecord(2, 0.0, -80.0, 45.0)]
    pdp = build_profile(recs, combine="coherent")
    assert pdp.powers_db[0] == pytest.approx(-80.0 + 20 * math.log10(2))


def test_build_errors():
    with pytest.raises(PdpError, match="empty input"):
        build_profile([])
    with pytest.raises(PdpError, match="invalid bin width"):
        build_profile([MultipathRecord(1, 0.0, -80.0, 0.0)], bin_width_ns=0.0)


def test_build_tap_at_power_weighted_mean_delay():
    # 3 ns and 3.5 ns share bin [3, 4); -80 dBm is 10x -90 dBm
    recs = [
        MultipathRecord(1, 0.0, -70.0, 0.0),
        MultipathRecord(2, 3e-9, -80.0, 0.0),
        MultipathRecord(3, 3.5e-9, -90.0, 0.0),
    ]
    pdp = build_profile(recs)
    assert pdp.delays_ns[1] == pytest.approx((10 * 3.0 + 1 * 3.5) / 11)


record_lists = st.lists(
    st.tuples(
        st.floats(0.0, 2e-6, allow_nan=False),
        st.floats(-140.0, -20.0),
        st.floats(0.0, 359.99),
    ),
    min_size=1,
    max_size=40,
)


@settings(max_examples=200, deadline=None)
@given(record_lists, st.floats(0.01, 50.0))
def test_noncoherent_power_conservation(rows, width):
    recs = [MultipathRecord(i, t, p, ph) for i, (t, p, ph) in enumerate(rows)]
    pdp = build_profile(recs, bin_width_ns=width)
    total_in = math.fsum(10 ** (r.power_dbm / 10) for r in recs)
    assert math.fsum(pdp.linear_powers) == pytest.approx(total_in, rel=1e-9)
    assert np.all(np.diff(pdp.delays_ns) > 0)
    assert pdp.delays_ns[0] >= 0


def test_fine_bins_keep_every_record():
    toa = np.array([0.0, 3.0, 7.5, 20.0, 21.25]) * 1e-9
    recs = [MultipathRecord(i, t, -80.0 - i, 0.0) for i, t in enumerate(toa)]
    pdp = build_profile(recs, bin_width_ns=1.0)
    assert len(pdp) == len(recs)
    npt.assert_allclose(pdp.delays_ns, [0.0, 3.0, 7.5, 20.0, 21.25], atol=1e-9)


# --- normalize / threshold / rezero -------------------------------------------


def test_normalize_to_peak():
    out = normalize_to_peak(ab([0, 50], [-90, -93]))
    assert out.frame is Frame.PEAK_RELATIVE_DB
    assert out.powers_db.tolist() == [0.0, -3.0]
    assert out.delays_ns.tolist() == [0.0, 50.0]


def test_normalize_idempotent_and_single_tap():
    once = normalize_to_peak(ab([12.0], [-77.7]))
    assert once.taps[0].power_db == 0.0
    assert normalize_to_peak(once) == once


def test_threshold_example():
    out = apply_threshold(rel([0, 100, 200], [0, -29.7, -31]), -30.0)
    assert out.delays_ns.tolist() == [0.0, 100.0]
    assert out.powers_db.tolist() == [0.0, -29.7]
    assert out.threshold_db == -30.0


def test_threshold_keeps_boundary_tap():
    out = apply_threshold(rel([0, 10], [0, -30.0]), -30.0)
    assert len(out) == 2


def test_threshold_errors():
    with pytest.raises(PdpError, match="invalid threshold"):
        apply_threshold(rel([0], [0]), 0.0)
    with pytest.raises(PdpError, match="profile not normalized"):
        apply_threshold(ab([0], [-50]), -30.0)


def test_threshold_single_and_all_above_unchanged():
    single = rel([5.0], [0.0])
    assert apply_threshold(single, -30).delays_ns.tolist() == [5.0]
    strong = rel([0, 1, 2], [0, -1, -2])
    out = apply_threshold(strong, -30)
    npt.assert_array_equal(out.powers_db, strong.powers_db)


def test_rezero_examples():
    assert rezero_delays(rel([40, 90], [0, -1])).delays_ns.tolist() == [0.0, 50.0]
    p = rel([0, 90], [0, -1])
    assert rezero_delays(p) is p
    assert rezero_delays(rel([70], [0])).delays_ns.tolist() == [0.0]


profiles = st.lists(
    st.tuples(st.integers(0, 100_000), st.floats(-80.0, 0.0)),
    min_size=1,
    max_size=30,
    unique_by=lambda t: t[0],
).map(lambda taps: sorted(taps))


def _absolute(taps, offset=-60.0):
    d, p = zip(*taps)
    return ab(np.array(d) * 0.25, np.array(p) + offset)


@settings(max_examples=200, deadline=None)
@given(profiles)
def test_threshold_after_normalize_keeps_peak(taps):
    n = normalize_to_peak(_absolute(taps))
    t = apply_threshold(n, -30.0)
    assert normalize_to_peak(t) == t
    assert t.powers_db.max() == 0.0


@settings(max_examples=200, deadline=None)
@given(profiles, st.floats(-60.0, -0.1), st.floats(-60.0, -0.1))
def test_threshold_idempotent_and_order_monotone(taps, a, b):
    n = normalize_to_peak(_absolute(taps))
    once = apply_threshold(n, a)
    assert apply_threshold(once, a) == once
    lo, hi = min(a, b), max(a, b)
    assert apply_threshold(apply_threshold(n, lo), hi) == apply_threshold(n, hi)


@settings(max_examples=200, deadline=None)
@given(profiles, st.integers(0, 5000))
def test_rezero_preserves_differences(taps, shift):
    # quarter-ns lattice: every shift and difference is exact in binary
    base = normalize_to_peak(_absolute(taps))
    shifted = base.replace(delays_ns=base.delays_ns + shift * 0.25)
    out = rezero_delays(shifted)
    assert out.delays_ns[0] == 0.0
    npt.assert_array_equal(np.diff(out.delays_ns), np.diff(base.delays_ns))


def test_process_profile_chain():
    out = process_profile(ab([10, 20, 30], [-60, -95, -70]), -30.0)
    assert out.delays_ns.tolist() == [0.0, 20.0]
    assert out.powers_db.tolist() == [0.0, -10.0]
    assert out.threshold_db == -30.0


# --- interchange format -------------------------------------------------------


def test_pdp_text_format():
    pdp = rel([0.0, 12.5], [0.0, -3.25], threshold_db=-30.0, source_id="Tx1/rx484")
    text = dumps_pdp(pdp)
    assert text.splitlines() == [
        "# frame=peak_relative_db threshold_db=-30.0 source=Tx1/rx484",
        "0.0,0.0",
        "12.5,-3.25",
    ]
    assert "\r" not in text


@settings(max_examples=100, deadline=None)
@given(profiles, st.booleans())
def test_pdp_round_trip(taps, normalized):
    pdp = _absolute(taps)
    if normalized:
        pdp = apply_threshold(normalize_to_peak(pdp), -45.0)
    assert loads_pdp(dumps_pdp(pdp)) == pdp


def test_pdp_read_errors():
    with pytest.raises(PdpError, match="bad header"):
        loads_pdp("0,0\n")
    with pytest.raises(PdpError, match="line 3"):
        loads_pdp("# frame=absolute_dbm threshold_db=none source=x\n0,-80\nabc,-3\n")
