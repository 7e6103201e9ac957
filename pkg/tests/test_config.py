import pytest

from stabfn.config import ConfigError, config_from_dict, load_config, parse_grid


@pytest.mark.parametrize(
    "spec,expected",
    [
        ("4:64:*2", [4, 8, 16, 32, 64]),
        ("10:40:10", [10, 20, 30, 40]),
        ("0:1:0.25", [0, 0.25, 0.5, 0.75, 1]),
        ("25:200:*2", [25, 50, 100, 200]),
        ([1, 2.5], [1, 2.5]),
        (7, [7]),
    ],
)
def test_parse_grid(spec, expected):
    assert parse_grid(spec) == expected


def test_grid_values_are_exact():
    # Fraction arithmetic: no drift after many steps
    assert parse_grid("0:3:0.1")[-1] == 3


@pytest.mark.parametrize("spec,msg", [
    ("1:2", "start:stop"),
    ("0:8:*2", "factor"),
    ("1:8:*1", "factor"),
    ("1:8:0", "positive"),
    ("5:1:1", "empty"),
    ("a:b:c", "number"),
])
def test_bad_grids(spec, msg):
    with pytest.raises(ConfigError, match=msg) as info:
        parse_grid(spec, "grid.k")
    assert info.value.field == "grid.k"


def base(**kw):
    data = {"experiment": "halfform", "model": {"preset": "cp1"}}
    data.update(kw)
    return data


def test_defaults_filled_in():
    cfg = config_from_dict(base())
    assert cfg.grid["k"] == [4, 8, 16, 32, 64]
    assert cfg.tolerances["fit"] == 1e-3
    assert cfg.weight_system().d == 2


def field_of(data):
    with pytest.raises(ConfigError) as info:
        config_from_dict(data)
    return info.value.field


def test_error_fields():
    assert field_of(base(experiment="nope")) == "experiment"
    assert field_of(base(colour="red")) == "colour"
    assert field_of(base(model={"preset": "torus9"})) == "model.preset"
    assert field_of(base(model={"weights": [[1], [1]], "level": "[1"})) == "model.level"
    assert field_of(base(model={"weights": [[1], [1]]})) == "model"
    assert field_of(base(tolerances={"fit": -1})) == "tolerances.fit"
    assert field_of(base(grid={"k": "8:4:1"})) == "grid.k"
    assert field_of(base(grid={"k": [4, 4, 8, 16]})) == "grid.k"
    assert field_of(base(jobs=0)) == "jobs"
    assert field_of(base(model={"kind": "chain", "n": 3, "twists": [1, 2]})) == "model.kind"


def test_sampling_experiments_need_a_seed():
    data = {"experiment": "psi-cross-check", "model": {"preset": "cp2"}}
    assert field_of(data) == "seed"
    assert config_from_dict(data | {"seed": 1}).samples == 200
    assert config_from_dict({"experiment": "psi-grid", "model": {"preset": "cp2"}, "seed": 1}).samples == 50


def test_matrix_models():
    ok = config_from_dict({"experiment": "matrix-psi", "seed": 1,
                           "model": {"kind": "chain", "n": 3, "twists": [1, 2]}})
    assert ok.chain_spec().n == 3
    bad = {"experiment": "matrix-psi", "seed": 1}
    assert field_of(bad | {"model": {"kind": "chain", "n": 3, "twists": [1]}}) == "model.twists"
    assert field_of(bad | {"model": {"kind": "grassmannian", "k": 4, "n": 4}}) == "model.k"
    assert field_of(bad | {"model": {"kind": "polygon", "lambdas": [-1, 1, -1, 1]}}) == "model.lambdas"
    assert field_of(bad | {"model": {"kind": "quiver"}}) == "model.kind"
    assert field_of({"experiment": "chain-eigen", "seed": 1,
                     "model": {"kind": "grassmannian", "k": 1, "n": 2}}) == "model.kind"


def test_load_config(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('experiment = "norms"\n[model]\npreset = "cp1"\n[grid]\nk = "1:3:1"\n')
    cfg = load_config(p)
    assert cfg.grid["k"] == [1, 2, 3]
    assert cfg.echo()["experiment"] == "norms"
    p.write_text("experiment = \n")
    with pytest.raises(ConfigError) as info:
        load_config(p)
    assert info.value.field == "config"
