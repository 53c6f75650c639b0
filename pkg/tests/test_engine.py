import csv
import io
import math
from dataclasses import replace

import pytest

from boat.aggregators import OutputTable, Row
from boat.corpus import load_corpus
from boat.domain import County, Grid, SpeedRecord, WeatherRecord, parse_date
from boat.engine import (EvaluationContext, EvaluationError, OutOfRange, PlanError, evaluate,
                         plan, read_json, render_output, run)
from boat.ingest import SyntheticSpec, synthetic_counties, write_synthetic_dataset
from boat.lang import check_source
from boat.storage import open_dataset, write_dataset

from reference import reference_run

CORPUS = load_corpus()
BY_ID = {e.id: e for e in CORPUS}
DAY = parse_date("5-11-2017")
T0 = DAY * 86400


def execute(source, ds, workers=1):
    return run(plan(check_source(source), ds, workers))


def assert_matches_reference(tables, ref):
    got = {t.name: list(t.rows) for t in tables}
    assert sorted(got) == sorted(ref)
    for name, want in ref.items():
        kind = next(t.kind for t in tables if t.name == name)
        assert len(got[name]) == len(want), name
        for a, b in zip(got[name], want):
            assert (a.index, a.rank) == (b.index, b.rank), name
            if kind in ("mean", "stdev"):
                assert math.isclose(a.value, b.value, rel_tol=1e-9, abs_tol=1e-12), (name, a, b)
            else:
                assert (a.value, a.weight) == (b.value, b.weight), (name, a, b)
                assert type(a.value) is type(b.value)


@pytest.mark.parametrize("entry", CORPUS, ids=[e.id for e in CORPUS])
def test_corpus_matches_reference_interpreter(entry, small_ds):
    tables = execute(entry.source, small_ds, 1)
    assert any(t.rows for t in tables), "program produced no output on the dataset"
    assert_matches_reference(tables, reference_run(entry.source, small_ds))


@pytest.mark.parametrize("entry", [BY_ID[i] for i in ("A.4", "D.1", "E.3", "F.2")],
                         ids=["A.4", "D.1", "E.3", "F.2"])
def test_parallel_bytes_equal_sequential(entry, small_ds):
    one = render_output(execute(entry.source, small_ds, 1), "json")
    assert render_output(execute(entry.source, small_ds, 3), "json") == one


@pytest.fixture(scope="module")
def a4_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("a4")
    counties = [County("077", "Polk", (Grid(1, 41.6, -93.6), Grid(2, 41.6, -93.5))),
                County("085", "Story", (Grid(3, 42.0, -93.5), Grid(4, 42.0, -93.4)))]
    temps = {1: [10.0, 12.5], 2: [20.0, 15.0], 3: [5.0, 6.0], 4: [7.5]}
    weather = [(g, WeatherRecord(T0 + 300 * i, t)) for g, ts in temps.items() for i, t in enumerate(ts)]
    write_dataset(path, counties, weather)
    ds = open_dataset(path)
    yield ds
    ds.close()


def test_a4_example(a4_dataset):
    src = BY_ID["A.4"].source
    text = render_output(execute(src, a4_dataset, 1), "text").decode()
    assert text.splitlines() == ["max[Polk] = Polk weight 20", "max[Story] = Story weight 7.5",
                                 "min[Polk] = Polk weight 10", "min[Story] = Story weight 5"]
    for fmt in ("text", "csv", "json"):
        assert render_output(execute(src, a4_dataset, 2), fmt) == \
            render_output(execute(src, a4_dataset, 1), fmt)


def test_evaluate_examples(a4_dataset):
    ctx = EvaluationContext()
    assert evaluate("7 / 2", ctx) == 3
    assert evaluate("-7 / 2", ctx) == -3
    assert evaluate("7.0 / 2", ctx) == 3.5
    assert evaluate("sum / count", EvaluationContext({"sum": 45.0, "count": 3})) == 15.0
    bare = Grid(9, 41.0, -93.0)
    assert evaluate("def(g.weatherRoot)", EvaluationContext({"g": bare})) is False
    polk = a4_dataset.county_by_code["077"]
    assert evaluate("def(county.grid[1])", EvaluationContext(county=polk)) is True
    assert evaluate("def(county.grid[2])", EvaluationContext(county=polk)) is False
    ctx = EvaluationContext({"g": polk.grids[1]}, dataset=a4_dataset)
    assert evaluate('getweather(g, "5-11-2017").weather[0].tmpc', ctx) == 20.0
    assert evaluate('len(getweather(g, "5-12-2017").weather)', ctx) == 0


def test_out_of_range_is_located(a4_dataset):
    src = "p: County = input;\nm: output mean of int;\n\nm << p.grid[5].id;\n"
    with pytest.raises(OutOfRange) as info:
        execute(src, a4_dataset)
    assert info.value.line == 4 and "077" in str(info.value)


@pytest.mark.parametrize("workers", [1, 2])
def test_division_by_zero_names_county_and_line(a4_dataset, workers):
    src = ("p: County = input;\nm: output mean[string] of int;\nzero := 0;\n"
           'if (p.countyName == "Story")\n    zero = 1;\nm[p.countyName] << 10 / zero;\n')
    with pytest.raises(EvaluationError) as info:
        execute(src, a4_dataset, workers)
    assert info.value.line == 6
    assert "077 (Polk)" in str(info.value) and "division by zero" in str(info.value)


def test_dynamic_date_error(a4_dataset):
    src = ('p: County = input;\nm: output mean of float;\nd := "5-11-2017";\nd = "13-40-2017";\n'
           "m << len(getweather(p.grid[0], d).weather);\n")
    with pytest.raises(EvaluationError) as info:
        execute(src, a4_dataset)
    assert info.value.line == 5


def test_isolation(a4_dataset):
    """Locals start fresh for each county; nothing leaks between tasks."""
    src = ("p: County = input;\nseen: output top(10)[string] of int;\nn := 0;\n"
           "foreach (i: int; def(p.grid[i])) n = n + p.grid[i].id;\n"
           "seen[p.countyName] << n;\n")
    for w in (1, 2):
        rows = {r.index: r.value for r in execute(src, a4_dataset, w)[0].rows}
        assert rows == {"Polk": 3, "Story": 7}


def test_absent_values_skipped(tmp_path):
    counties = [County("077", "Polk", (Grid(1, 41.6, -93.6),))]
    weather = [(1, WeatherRecord(T0, 2.0)), (1, WeatherRecord(T0 + 300, None)),
               (1, WeatherRecord(T0 + 600, 4.0))]
    write_dataset(tmp_path, counties, weather)
    src = ('p: County = input;\nm: output mean of float;\nc: output top(1) of string;\n'
           'w := getweather(p.grid[0], "5-11-2017");\n'
           'foreach (s: int; def(w.weather[s])) {\n  m << w.weather[s].tmpc + 1.0;\n'
           '  if (w.weather[s].tmpc < 100.0) c << "counted";\n}\n')
    with open_dataset(tmp_path) as ds:
        tables = {t.name: t for t in execute(src, ds)}
    assert tables["m"].rows == (Row(None, 0, 4.0),)
    assert tables["c"].rows == (Row(None, 1, "counted", 2),)


def test_plan_errors(small_ds):
    typed = check_source(BY_ID["A.1"].source)
    for bad in (0, -1, 1.5, True, "4"):
        with pytest.raises(PlanError):
            plan(typed, small_ds, bad)
    with pytest.raises(PlanError):
        plan(replace(typed, schema_version="other/9"), small_ds, 1)


def test_plan_has_one_unit_per_county(tmp_path):
    write_dataset(tmp_path, synthetic_counties(SyntheticSpec(counties=99, grids_per_county=1)))
    with open_dataset(tmp_path) as ds:
        p = plan(check_source(BY_ID["A.1"].source), ds, 8)
        assert len(p.units) == 99 and list(p.units) == sorted(p.units)
        assert p.loads == {"weather"}
        assert all(not t.rows for t in run(p))


def test_weather_program_on_speed_only_dataset(tmp_path):
    spec = SyntheticSpec(seed=2, counties=2, grids_per_county=2, days=1)
    counties = synthetic_counties(spec)
    speed = [(1, SpeedRecord(T0 + 20 * i, "D", "car", 60.0, 65.0, "I-35")) for i in range(10)]
    write_dataset(tmp_path, counties, (), speed)
    with open_dataset(tmp_path) as ds:
        tables = run(plan(check_source(BY_ID["A.1"].source), ds, 1))
        assert [t.rows for t in tables] == [(), ()]
        assert ds.io.bytes["weather"] == 0


def test_speed_task_reads_no_weather(small_path):
    with open_dataset(small_path) as ds:
        run(plan(check_source(BY_ID["D.1"].source), ds, 1))
        assert ds.io.bytes["weather"] == 0 and ds.io.blocks["speed"] > 0


# -- rendering -----------------------------------------------------------

TABLES = (OutputTable("b", "maximum", (Row("x", 1, "v", 2.5), Row("x", 2, "w", 2.0))),
          OutputTable("a", "mean", (Row(None, 0, 1.25),)),
          OutputTable("c", "top", (Row(None, 1, 7, 3), Row(None, 2, "q,\"r", 1))))


def test_render_empty():
    for fmt in ("text", "csv", "json"):
        assert render_output((), fmt) == b""


def test_render_text_order():
    assert render_output(TABLES, "text").decode().splitlines() == [
        "a = 1.25", "b[x] = v weight 2.5", "b[x] = w weight 2", "c = 7 weight 3",
        'c = q,"r weight 1']


def test_render_formats_agree():
    back = read_json(render_output(TABLES, "json").decode())
    assert back == tuple(sorted(TABLES, key=lambda t: t.name))
    rows = list(csv.DictReader(io.StringIO(render_output(TABLES, "csv").decode())))
    assert [r["output"] for r in rows] == ["a", "b", "b", "c", "c"]
    assert rows[4]["value"] == 'q,"r' and rows[1]["weight"] == "2.5" and rows[0]["index"] == ""


def test_render_unknown_format():
    with pytest.raises(ValueError):
        render_output(TABLES, "xml")


def test_json_non_finite_round_trip():
    t = (OutputTable("z", "maximum", (Row(None, 1, "a", math.inf),)),)
    assert read_json(render_output(t, "json").decode()) == t


def test_dataset_sensitivity(tmp_path):
    """Different seeds give different answers, so agreement above is not vacuous."""
    outs = set()
    for seed in (1, 2):
        path = write_synthetic_dataset(SyntheticSpec(seed=seed, counties=2, grids_per_county=1),
                                       tmp_path / str(seed))
        with open_dataset(path) as ds:
            outs.add(render_output(execute(BY_ID["A.1"].source, ds), "json"))
    assert len(outs) == 2
