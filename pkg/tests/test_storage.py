import random

import pytest
from hypothesis import given, settings, strategies as st

from boat.domain import County, Grid, SpeedRecord, WeatherRecord
from boat.storage import (CODEC_DEFLATE, CODEC_IDENTITY, BlockReadError, FormatError,
                          StorageError, dataset_stats, extend_dataset, open_dataset,
                          write_dataset)
from boat.storage.encoding import (decode_block, encode_block, read_varint, unzigzag,
                                   write_varint, zigzag)

DAY = 17297
T0 = DAY * 86400

cents = st.integers(-5000000, 5000000).map(lambda c: c / 100)
opt = st.one_of(st.none(), cents)
nonneg = st.one_of(st.none(), st.integers(0, 1000000).map(lambda c: c / 100))
words = st.sampled_from(["", "RA", "SN", "-RA", "fog", "Ω"])


@st.composite
def weather_block(draw):
    times = sorted(draw(st.lists(st.integers(0, 86399), max_size=60)))
    return [WeatherRecord(T0 + t, draw(opt), draw(words), draw(words), draw(opt), draw(nonneg),
                          draw(st.one_of(st.none(), st.integers(0, 35999).map(lambda c: c / 100))),
                          draw(nonneg), draw(opt), draw(nonneg), draw(nonneg), draw(nonneg))
            for t in times]


@st.composite
def speed_block(draw):
    times = sorted(draw(st.lists(st.integers(0, 86399), max_size=60)))
    pos = st.integers(0, 20000).map(lambda c: c / 100)
    return [SpeedRecord(T0 + t, draw(words), draw(words), draw(pos), draw(pos), draw(words))
            for t in times]


@settings(max_examples=200, deadline=None)
@given(weather_block())
def test_weather_block_round_trip(recs):
    assert decode_block("weather", DAY, encode_block("weather", DAY, recs)) == recs


@settings(max_examples=200, deadline=None)
@given(speed_block())
def test_speed_block_round_trip(recs):
    assert decode_block("speed", DAY, encode_block("speed", DAY, recs)) == recs


@given(st.integers(-(2 ** 62), 2 ** 62))
def test_varint_zigzag(n):
    buf = bytearray()
    write_varint(buf, zigzag(n))
    z, pos = read_varint(buf, 0)
    assert unzigzag(z) == n and pos == len(buf)


def random_weather(rng, n_grids=8, days=3, n=10000):
    out = []
    for _ in range(n):
        g = rng.randrange(1, n_grids + 1)
        t = T0 + rng.randrange(days * 86400)
        vals = [None if rng.random() < 0.05 else rng.randrange(-400000, 400000) / 100 for _ in range(9)]
        vals[2] = None if vals[2] is None else abs(vals[2])  # smps
        vals[3] = None if vals[3] is None else rng.randrange(36000) / 100
        out.append((g, WeatherRecord(t, vals[0], rng.choice(["", "RA", "SN"]), rng.choice(["", "R"]),
                                     vals[1], vals[2], vals[3], *[None if v is None else abs(v)
                                                                  for v in vals[4:]])))
    return out


def counties(n_grids=8):
    return [County("077", "Polk", tuple(Grid(i, 41.6, -93.6 + i / 100) for i in range(1, n_grids // 2 + 1))),
            County("085", "Story", tuple(Grid(i, 42.0, -93.5) for i in range(n_grids // 2 + 1, n_grids + 1)))]


def expected_blocks(records):
    blocks = {}
    for g, r in records:
        blocks.setdefault((g, r.time // 86400), []).append(r)
    return {k: sorted(v, key=lambda r: r.time) for k, v in blocks.items()}


@pytest.mark.parametrize("codec", [CODEC_IDENTITY, CODEC_DEFLATE])
def test_dataset_round_trip_10k(tmp_path, codec):
    recs = random_weather(random.Random(3))
    write_dataset(tmp_path, counties(), recs, codec=codec)
    with open_dataset(tmp_path) as ds:
        want = expected_blocks(recs)
        for (g, d), rs in want.items():
            got = ds.get_weather(g, d)
            # stable sort by time keeps equal-time records in input order
            assert got == rs
        assert sum(e.count for e in ds.index["weather"]) == 10000
        ds.verify()


def test_open_reads_no_blocks(tmp_path):
    write_dataset(tmp_path, counties(), random_weather(random.Random(1), n=500))
    ds = open_dataset(tmp_path)
    assert ds.io.blocks == {"weather": 0, "speed": 0}
    assert [c.code for c in ds.counties] == ["077", "085"]
    assert ds.counties == tuple(County(c.code, c.name, tuple(
        Grid(g.id, g.latitude, g.longitude, ds.grid_by_id[g.id].weather_link)
        for g in c.grids)) for c in counties())


def test_one_block_per_get(tmp_path):
    write_dataset(tmp_path, counties(), random_weather(random.Random(2), n=2000))
    with open_dataset(tmp_path) as ds:
        for e in ds.index["weather"]:
            ds.io.reset()
            ds.get_weather(e.grid_id, e.day)
            assert ds.io.blocks == {"weather": 1, "speed": 0}
            assert ds.io.bytes["weather"] == e.length
        ds.io.reset()
        assert ds.get_weather(42, DAY) == [] and ds.get_speed(1, DAY) == []
        assert ds.io.blocks == {"weather": 0, "speed": 0}


def test_index_probes(tmp_path):
    recs = random_weather(random.Random(4), n=3000)
    write_dataset(tmp_path, counties(), recs)
    with open_dataset(tmp_path) as ds:
        present = {(e.grid_id, e.day) for e in ds.index["weather"]}
        for key in present:
            assert ds.find("weather", *key) is not None
        rng = random.Random(5)
        absent = set()
        while len(absent) < 1000:
            key = (rng.randrange(0, 50), DAY + rng.randrange(-30, 30))
            if key not in present:
                absent.add(key)
        assert all(ds.find("weather", *k) is None for k in absent)


def test_empty_dataset(tmp_path):
    write_dataset(tmp_path, [])
    with open_dataset(tmp_path) as ds:
        st_ = dataset_stats(ds)
        assert st_.total_records == 0
        assert ds.index == {"weather": [], "speed": []}
        assert st_.kinds["weather"].blocks == 0


def test_single_block_counts(tmp_path):
    recs = [(1, WeatherRecord(T0 + i * 300, 10.0 + i)) for i in range(3)]
    write_dataset(tmp_path, counties(2), recs)
    with open_dataset(tmp_path) as ds:
        assert len(ds.index["weather"]) == 1
        assert ds.index["weather"][0].count == 3
        assert [r.tmpc for r in ds.get_weather(1, DAY)] == [10.0, 11.0, 12.0]


def test_unknown_grid_rejected(tmp_path):
    with pytest.raises(StorageError, match="9999"):
        write_dataset(tmp_path, counties(2), [(9999, WeatherRecord(T0))])


def test_invalid_county_table(tmp_path):
    with pytest.raises(StorageError):
        write_dataset(tmp_path, [County("077", "Polk"), County("077", "Story")])


def test_truncated_data_file(tmp_path):
    write_dataset(tmp_path, counties(), random_weather(random.Random(6), n=2000))
    path = tmp_path / "weather.btd"
    path.write_bytes(path.read_bytes()[:-40])
    with open_dataset(tmp_path) as ds:  # open succeeds, manifest only
        last = ds.index["weather"][-1]
        first = ds.index["weather"][0]
        assert ds.get_weather(first.grid_id, first.day)
        with pytest.raises(BlockReadError) as info:
            ds.get_weather(last.grid_id, last.day)
        assert info.value.grid_id == last.grid_id
        with pytest.raises(FormatError):
            ds.verify()


def test_corrupted_block_detected(tmp_path):
    write_dataset(tmp_path, counties(), random_weather(random.Random(7), n=500))
    with open_dataset(tmp_path) as ds:
        e = ds.index["weather"][2]
    raw = bytearray((tmp_path / "weather.btd").read_bytes())
    raw[e.offset + e.length // 2] ^= 0xFF
    (tmp_path / "weather.btd").write_bytes(bytes(raw))
    with open_dataset(tmp_path) as ds:
        with pytest.raises(BlockReadError, match="checksum"):
            ds.get_weather(e.grid_id, e.day)


@pytest.mark.parametrize("name", ["manifest.btd", "weather.btd", "speed.btd"])
def test_wrong_magic(tmp_path, name):
    write_dataset(tmp_path, counties(2))
    p = tmp_path / name
    p.write_bytes(b"XXXX" + p.read_bytes()[4:])
    with pytest.raises(FormatError):
        open_dataset(tmp_path)


def test_missing_dataset(tmp_path):
    with pytest.raises(StorageError):
        open_dataset(tmp_path / "nowhere")


def test_rewrite_is_byte_identical(tmp_path):
    recs = random_weather(random.Random(8), n=1000)
    write_dataset(tmp_path / "a", counties(), recs)
    write_dataset(tmp_path / "b", counties(), recs)
    for name in ("manifest.btd", "weather.btd", "speed.btd"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_fusion_keeps_weather_bytes(tmp_path):
    recs = random_weather(random.Random(9), n=1500)
    write_dataset(tmp_path, counties(), recs)
    before = (tmp_path / "weather.btd").read_bytes()
    with open_dataset(tmp_path) as ds:
        blocks = ds.block_bytes("weather")
        answers = {(e.grid_id, e.day): ds.get_weather(e.grid_id, e.day) for e in ds.index["weather"]}
    speed = [(1, SpeedRecord(T0 + 20 * i, "D1", "car", 60.0 + i % 7, 65.0, "I-35")) for i in range(200)]
    extend_dataset(tmp_path, speed=speed)
    assert (tmp_path / "weather.btd").read_bytes() == before
    with open_dataset(tmp_path) as ds:
        assert ds.block_bytes("weather") == blocks
        assert {k: ds.get_weather(*k) for k in answers} == answers
        assert len(ds.get_speed(1, DAY)) == 200
        assert ds.grid_by_id[1].speed_link is not None
        assert ds.grid_by_id[2].speed_link is None
        ds.verify()
    with pytest.raises(StorageError):
        extend_dataset(tmp_path, speed=speed)


def test_stats_ratio(tmp_path):
    write_dataset(tmp_path, counties(), random_weather(random.Random(10), n=1000),
                  raw_bytes={"weather": 10 ** 6, "speed": 0})
    with open_dataset(tmp_path) as ds:
        s = dataset_stats(ds)
        assert s.kinds["weather"].records == 1000
        assert s.kinds["weather"].ratio == 10 ** 6 / s.kinds["weather"].file_bytes
        assert dataset_stats(ds, {"weather": 5}).kinds["weather"].raw_bytes == 5
