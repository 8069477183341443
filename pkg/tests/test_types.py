import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from elmeta.errors import (
    BadLevel,
    BadSampleSize,
    DegenerateInterval,
    EmptyDataset,
    MixedLevels,
    TooFewStudies,
    ValidationError,
)
from elmeta.quantiles import t_quantile
from elmeta.types import (
    AnalysisResult,
    MetaDataset,
    Method,
    Scale,
    StudyInterval,
    build_interval,
    critical_value,
    recover_arrays,
    recover_summary,
    validate_dataset,
)


def test_study_interval_validation():
    s = StudyInterval(-1, 1)
    assert s.level == 0.95 and s.sample_size is None
    with pytest.raises(DegenerateInterval):
        StudyInterval(1.0, 1.0)
    with pytest.raises(DegenerateInterval):
        StudyInterval(2.0, 1.0)
    with pytest.raises(BadLevel):
        StudyInterval(0, 1, level=1.0)
    with pytest.raises(BadSampleSize):
        StudyInterval(0, 1, sample_size=1)
    with pytest.raises(BadSampleSize):
        StudyInterval(0, 1, sample_size=10.5)
    with pytest.raises(ValidationError):
        StudyInterval(0, math.inf)


def test_dataset_validation():
    with pytest.raises(EmptyDataset):
        validate_dataset([])
    with pytest.raises(TooFewStudies):
        validate_dataset([(-1, 1)])
    with pytest.raises(MixedLevels):
        validate_dataset([(-1, 1, 0.95), (0, 2, 0.9)])
    ds = validate_dataset([(-1, 1), {"lower": 0, "upper": 2, "label": "b"}], "log")
    assert ds.K == 2 and ds.scale is Scale.LOG
    assert [s.label for s in ds.studies] == ["", "b"]
    np.testing.assert_array_equal(ds.lower, [-1, 0])
    with pytest.raises(ValueError):
        ds.lower[0] = 5.0


def test_from_arrays_preserves_order():
    ds = MetaDataset.from_arrays([3, 1, 2], [4, 5, 6], sample_sizes=[10, 40, 50])
    assert [s.lower for s in ds.studies] == [3, 1, 2]
    assert ds.sample_sizes == [10, 40, 50]
    assert ds.common_level == 0.95 and ds.alpha == pytest.approx(0.05)


def test_critical_value_switches_at_30():
    assert critical_value(0.95, 29) == pytest.approx(t_quantile(0.975, 28))
    assert critical_value(0.95, 30) == pytest.approx(1.959963984540054)
    assert critical_value(0.95, None) == pytest.approx(1.959963984540054)


@given(center=st.floats(-1e3, 1e3), sd=st.floats(1e-3, 1e3),
       n=st.one_of(st.none(), st.integers(2, 500)),
       level=st.sampled_from([0.8, 0.9, 0.95, 0.99]))
def test_build_recover_round_trip(center, sd, n, level):
    s = build_interval(center, sd, level, n)
    rec = recover_summary(s)
    assert rec.center == pytest.approx(center, abs=1e-9 * (1 + abs(center) + sd))
    assert rec.sd == pytest.approx(sd, rel=1e-9)


def test_recover_arrays_matches_scalar():
    ds = MetaDataset.from_arrays([-1, 0, 0.5], [1, 3, 0.7], sample_sizes=[12, 100, 30])
    c, s = recover_arrays(ds)
    for i, st_ in enumerate(ds.studies):
        r = recover_summary(st_)
        assert c[i] == r.center and s[i] == pytest.approx(r.sd, rel=1e-15)


def test_analysis_result_invariants():
    r = AnalysisResult("EL2", 1.0, 0.5, 2.0, 0.95)
    assert r.method is Method.EL2 and r.covers(0.5) and not r.covers(2.1)
    assert r.width == 1.5
    assert r.to_dict()["method"] == "EL2"
    with pytest.raises(ValidationError):
        AnalysisResult("EL2", 3.0, 0.5, 2.0, 0.95)
    with pytest.raises(ValidationError):
        AnalysisResult("CD-RE", 1.0, 0.5, 2.0, 0.95, tau2=-1.0)


def test_method_parse():
    assert Method.parse("el-re") is Method.EL_RE
    assert Method.parse("CONVENTIONAL_RE_REML") is Method.CONVENTIONAL_RE_REML
    assert len(Method) == 9
    with pytest.raises(ValueError):
        Method.parse("bogus")
