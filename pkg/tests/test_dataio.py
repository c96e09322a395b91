import numpy as np
import pytest
from hypothesis import given, strategies as st

from fourway.dataio import (Cohort, EventCode, ValidationError, bin_times, default_grid,
                            expand_person_periods, load_csv, write_csv)

T, D, C = EventCode.TARGET, EventCode.COMPETING, EventCode.CENSORED


def one(event, k, K=4):
    return Cohort(np.arange(K + 1), [1], [k], [event], [0], np.zeros((1, 0)))


def rows(cohort, cause):
    t = expand_person_periods(cohort, cause)
    return t.interval.tolist(), t.outcome.tolist()


def test_three_row_file(write_text):
    p = write_text("c.csv", "id,time,event,treatment\na,2,1,1\nb,1,2,0\nc,3,0,1\n")
    c = load_csv(p)
    assert c.n == 3 and c.K >= 3
    assert c.event.tolist() == [T, D, C]
    assert c.time_index.tolist() == [2, 1, 3]


def test_empty_cohort(write_text):
    with pytest.raises(ValidationError, match="empty cohort"):
        load_csv(write_text("e.csv", "id,time,event,treatment\n"))


def test_non_binary_treatment_names_record(write_text):
    p = write_text("t.csv", "id,time,event,treatment\na,1,1,0\nzz,2,0,2\n")
    with pytest.raises(ValidationError, match="non-binary treatment") as err:
        load_csv(p)
    assert "zz" in str(err.value)


def test_unknown_event_code(write_text):
    with pytest.raises(ValidationError, match="unknown event code"):
        load_csv(write_text("u.csv", "id,time,event,treatment\na,1,7,0\n"))


def test_missing_column(write_text):
    with pytest.raises(ValidationError, match="missing column"):
        load_csv(write_text("m.csv", "id,time,treatment\na,1,0\n"))


def test_missing_covariate_rejected(write_text):
    p = write_text("v.csv", "id,time,event,treatment,age\na,1,1,0,60\nb,2,0,1,\n")
    with pytest.raises(ValidationError, match="missing covariate values"):
        load_csv(p, covariates=["age"])


def test_non_monotone_grid(write_text):
    p = write_text("g.csv", "id,time,event,treatment\na,1.5,1,0\n")
    with pytest.raises(ValidationError, match="non-monotone grid"):
        load_csv(p, time_kind="continuous", grid=[0, 2, 1, 3])


def test_schema_and_codes(write_text):
    p = write_text("s.csv", "pid,months,status,arm\n1,3.2,pc,DES\n2,7.9,other,placebo\n3,9.0,alive,DES\n")
    c = load_csv(p, {"id": "pid", "time": "months", "event": "status", "treatment": "arm"},
                 time_kind="continuous", grid=[0, 4, 8, 12],
                 event_codes={"pc": "target", "other": "competing", "alive": "censored"},
                 treatment_codes={"DES": 1, "placebo": 0})
    assert c.time_index.tolist() == [1, 2, 3]
    assert c.treatment.tolist() == [1, 0, 1]
    assert c.event.tolist() == [T, D, C]


def test_time_beyond_grid(write_text):
    p = write_text("b.csv", "id,time,event,treatment\na,20,1,0\n")
    with pytest.raises(ValidationError, match="beyond the last grid point"):
        load_csv(p, time_kind="continuous", grid=[0, 5, 10])


def test_target_expansion():
    c = one(T, 3)
    assert rows(c, D) == ([1, 2, 3], [0, 0, 0])
    assert rows(c, T) == ([1, 2, 3], [0, 0, 1])


def test_competing_expansion():
    c = one(D, 2)
    assert rows(c, D) == ([1, 2], [0, 1])
    assert rows(c, T) == ([1], [0])


def test_censored_expansion():
    c = one(C, 2)
    assert rows(c, D) == ([1], [0])
    assert rows(c, T) == ([1], [0])


def test_censored_at_first_interval_contributes_nothing():
    c = one(C, 1)
    assert rows(c, T) == ([], [])


def test_bin_times_right_closed():
    assert bin_times([0.0, 1.0, 1.01, 3.0], [0, 1, 2, 3]).tolist() == [1, 1, 2, 3]


def test_default_grid_is_event_times():
    g = default_grid([2.0, 5.0, 5.0, 9.0], [1, 2, 0, 0])
    assert g.tolist() == [0.0, 2.0, 5.0, 9.0]


cohorts = st.integers(1, 40).flatmap(lambda n: st.tuples(
    st.integers(1, 6),
    st.lists(st.integers(1, 6), min_size=n, max_size=n),
    st.lists(st.sampled_from([0, 1, 2]), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n)))


def build(K, ks, evs, trt):
    ks = [min(k, K) for k in ks]
    cov = np.arange(len(ks), dtype=float)[:, None] / 7
    return Cohort(np.arange(K + 1), np.arange(len(ks)), ks, evs, trt, cov, ("x",))


@given(cohorts)
def test_expansion_invariants(args):
    c = build(*args)
    tt, td = expand_person_periods(c, T), expand_person_periods(c, D)
    assert tt.outcome.sum() == np.sum(c.event == T)
    assert td.outcome.sum() == np.sum(c.event == D)
    nt = np.bincount(tt.subject, minlength=c.n)
    nd = np.bincount(td.subject, minlength=c.n)
    assert np.array_equal(nd - nt, (c.event == D).astype(int))
    for tab in (tt, td):
        assert np.all(np.bincount(tab.subject, weights=tab.outcome, minlength=c.n) <= 1)
        for i in range(c.n):
            s = tab.interval[tab.subject == i]
            assert s.tolist() == list(range(1, len(s) + 1))


@given(cohorts)
def test_roundtrip_preserves_tables(tmp_path_factory, args):
    c = build(*args)
    p = tmp_path_factory.mktemp("rt") / "c.csv"
    write_csv(c, p)
    back = load_csv(p, covariates=["x"], grid=c.grid)
    for cause in (T, D):
        a, b = expand_person_periods(c, cause).to_frame(), expand_person_periods(back, cause).to_frame()
        assert a.equals(b)
