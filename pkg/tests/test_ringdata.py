import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dendrostat.exceptions import AlignmentError, DomainError, GapError, LengthError, ParseError
from dendrostat.ringdata import (
    SITE_SPANS,
    AlignedPanel,
    BoxCoxTransformer,
    RingSeries,
    align_common_interval,
    boxcox,
    boxcox_mle_lambda,
    inv_boxcox,
    panel_summary,
    parse_panel,
    stationary_transform,
    synth_panel,
    synth_site_series,
    write_panel,
)


def csv_text(rows):
    return "\n".join(",".join(str(c) for c in r) for r in rows) + "\n"


def test_parse_trims_each_column_to_its_span():
    rows = [["year", "THO-A01B", "LATE"]]
    for year in range(1810, 1976):
        rows.append([year, 1.0 + (year % 7) / 10, "NA" if year < 1900 else 0.5])
    a, b = parse_panel(csv_text(rows))
    assert (a.sample_id, a.first_year, len(a), a.last_year) == ("THO-A01B", 1810, 166, 1975)
    assert (b.first_year, len(b)) == (1900, 76)


def test_header_only_gives_no_series():
    assert parse_panel("year,a,b\n") == []


def test_negative_width_is_domain_error_with_line():
    with pytest.raises(DomainError, match="line 3"):
        parse_panel("year,a\n2000,1.2\n2001,-0.3\n")


def test_interior_gap_names_series_and_year():
    with pytest.raises(GapError) as info:
        parse_panel("year,a,b\n2000,1,1\n2001,,1\n2002,1,1\n")
    assert "'a'" in str(info.value) and "2001" in str(info.value)
    assert info.value.line == 3


@pytest.mark.parametrize(
    "text, line",
    [
        ("year,a\n2000,1\n2001,1,2\n", 3),
        ("year,a\n2000,1\n2002,1\n", 3),
        ("year,a\nabc,1\n", 2),
        ("year,a\n2000,wide\n", 2),
        ("yr,a\n2000,1\n", 1),
    ],
)
def test_malformed_rows_report_line(text, line):
    with pytest.raises(ParseError) as info:
        parse_panel(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


def test_missing_header_is_parse_error():
    with pytest.raises(ParseError):
        parse_panel("\n\n")


def test_series_rejects_non_positive_widths():
    with pytest.raises(DomainError):
        RingSeries("x", 1900, [1.0, 0.0])
    with pytest.raises(LengthError):
        RingSeries("x", 1900, [])


def test_widths_are_read_only():
    s = RingSeries("x", 1900, [1.0, 2.0])
    with pytest.raises(ValueError):
        s.widths[0] = 3.0


def test_site_spans_align_to_common_interval():
    series = synth_site_series(0)
    assert [(s.sample_id, s.first_year, s.last_year) for s in series] == list(SITE_SPANS)
    assert [len(s) for s in series] == [166, 157, 154, 157, 157, 155, 143, 142, 144]
    panel = align_common_interval(series)
    assert (panel.start_year, panel.end_year) == (1835, 1975)
    assert all(len(s) == 141 for s in panel.series)


def test_single_series_aligns_to_itself():
    s = RingSeries("x", 1800, np.linspace(1, 2, 30))
    panel = align_common_interval([s])
    assert panel.series[0] == s


def test_disjoint_spans_report_both_series():
    a = RingSeries("early", 1800, np.ones(51))
    b = RingSeries("late", 1860, np.ones(41))
    with pytest.raises(AlignmentError, match="early") as info:
        align_common_interval([a, b])
    assert "late" in str(info.value)


def test_align_is_idempotent():
    panel = align_common_interval(synth_site_series(4))
    assert align_common_interval(panel.series) == panel


def test_panel_rejects_duplicate_ids_and_bad_spans():
    s = RingSeries("x", 1900, np.ones(5))
    with pytest.raises(ValueError):
        AlignedPanel(1900, 1904, (s, s))
    with pytest.raises(ValueError):
        AlignedPanel(1900, 1905, (s,))


def test_panel_lookup_and_matrix():
    panel = synth_panel(2, 3, 20)
    assert panel.matrix().shape == (20, 3)
    with pytest.raises(KeyError):
        panel.get("missing")


def test_summary_reports_spans_and_common_interval():
    summary = panel_summary(synth_site_series(1))
    assert summary["n_series"] == 9
    assert summary["common_interval"] == {"start_year": 1835, "end_year": 1975, "n_years": 141}
    first = summary["series"][0]
    assert (first["id"], first["first_year"], first["n_rings"]) == ("THO-A01B", 1810, 166)


def test_roundtrip_site_file_bitwise():
    series = synth_site_series(5)
    text = write_panel(series)
    again = parse_panel(text)
    assert again == series
    assert write_panel(again) == text


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.integers(1700, 1750),
            st.lists(st.floats(1e-3, 1e3, allow_nan=False), min_size=1, max_size=40),
        ),
        min_size=1,
        max_size=5,
    )
)
def test_parse_serialize_parse_roundtrip(specs):
    series = [RingSeries(f"s{k}", y0, w) for k, (y0, w) in enumerate(specs)]
    text = write_panel(series)
    parsed = parse_panel(text)
    assert parsed == series
    assert parse_panel(write_panel(parsed)) == parsed


def test_logdiff_examples():
    assert np.allclose(stationary_transform(RingSeries("c", 1, [2.0] * 6), "logdiff").values, 0.0)
    out = stationary_transform(RingSeries("e", 1, [1.0, math.e, math.e ** 2]), "logdiff")
    assert np.allclose(out.values, [1.0, 1.0], atol=1e-15)
    assert out.method == "logdiff"


def test_logdiff_needs_two_rings():
    with pytest.raises(LengthError):
        stationary_transform(RingSeries("one", 1, [1.0]), "logdiff")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 100.0), min_size=3, max_size=60).filter(lambda v: np.ptp(v) > 1e-6 * max(v)))
def test_standardize_has_zero_mean_unit_sd(values):
    s = RingSeries("x", 1900, values)
    z = stationary_transform(s, "standardize").values
    assert abs(z.mean()) < 1e-10
    assert abs(z.std(ddof=1) - 1.0) < 1e-10
    assert len(stationary_transform(s, "logdiff").values) == len(values) - 1


def test_unknown_transform_rejected():
    with pytest.raises(ValueError):
        stationary_transform(RingSeries("x", 1, [1.0, 2.0]), "detrend")


def test_boxcox_examples():
    assert np.allclose(boxcox([1, 2, 4], 1.0), [0, 1, 3])
    assert np.allclose(boxcox([1, math.e], 0.0), [0, 1])
    y = np.array([0.5, 2.0, 7.0])
    assert np.max(np.abs(boxcox(y, 1e-9) - boxcox(y, 0.0))) < 1e-6
    with pytest.raises(DomainError):
        boxcox([1.0, 0.0], 0.5)


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=30, unique=True),
    st.floats(-2.0, 2.0),
)
def test_boxcox_increasing_and_invertible(values, lmbda):
    y = np.sort(np.array(values))
    z = boxcox(y, lmbda)
    assert np.all(np.diff(z) > 0)
    back = inv_boxcox(z, lmbda)
    assert np.allclose(back, y, rtol=1e-10, atol=0)


def test_boxcox_lambda_recovers_known_optima():
    rng = np.random.default_rng(3)
    assert abs(boxcox_mle_lambda(rng.lognormal(0.0, 0.5, 5000))) <= 0.15
    assert abs(boxcox_mle_lambda(rng.normal(50.0, 5.0, 5000)) - 1.0) <= 0.2
    assert boxcox_mle_lambda([3.0, 3.0, 3.0, 3.0]) == 1.0
    with pytest.raises(LengthError):
        boxcox_mle_lambda([1.0, 2.0])


def test_boxcox_transformer_follows_estimator_api():
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.lognormal(size=200), rng.normal(20, 2, 200)])
    tr = BoxCoxTransformer().fit(X)
    assert tr.lambdas_.shape == (2,)
    assert np.allclose(tr.inverse_transform(tr.transform(X)), X, rtol=1e-10)
    assert BoxCoxTransformer(lmbda=0).fit(X).get_params() == {"lmbda": 0}


def test_synth_panel_is_deterministic_and_positive():
    a, b = synth_panel(7, 9, 141), synth_panel(7, 9, 141)
    assert a == b
    assert all(np.array_equal(x.widths, y.widths) for x, y in zip(a.series, b.series))
    assert np.all(a.matrix() > 0)
    assert synth_panel(8, 9, 141) != a


def test_synth_series_are_positively_correlated_on_average():
    means = []
    for seed in range(20):
        c = np.corrcoef(synth_panel(seed, 9, 141).matrix(), rowvar=False)
        means.append(c[np.triu_indices(9, 1)].mean())
    assert np.mean(means) > 0
