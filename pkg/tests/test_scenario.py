import copy

import numpy as np
import pytest
import yaml

from roomaerosol.config import dump_config, load_config, parse_config
from roomaerosol.errors import ValidationError
from roomaerosol.scenario import required_count, run_scenario, truncation_errors
from roomaerosol.greens import AxisModel
from roomaerosol.eigenspectrum import AxisSpec

BASE = {
    "name": "small",
    "room": {"x": {"length": 1.0, "diffusivity": 2.42e-5, "deposition_lo": 1e-7, "deposition_hi": 1e-1}},
    "sources": [{"kind": "point", "position": [0.5]}],
    "grid": {"lines": [{"axis": "x", "start": 0.0, "stop": 1.0, "num": 11, "through": [0.5]}],
             "times": [60.0, 600.0]},
}


def config(**changes):
    data = copy.deepcopy(BASE)
    data.update(changes)
    return parse_config(data)


def test_config_round_trip(tmp_path):
    cfg = config()
    path = tmp_path / "c.yaml"
    path.write_text(dump_config(cfg))
    again = load_config(path)
    assert again == cfg
    assert again.sha256() == cfg.sha256()


@pytest.mark.parametrize("name", ["fig4", "fig5a", "fig5b", "fig5c", "elevator", "elevator_point", "fig7",
                                  "fig8_absorbing", "fig8_reflecting"])
def test_shipped_configs_load(configs_dir, name):
    assert load_config(configs_dir / f"{name}.yaml").name.startswith(name.split("_")[0])


def test_unknown_key_reported_with_path():
    data = copy.deepcopy(BASE)
    data["room"]["x"]["typo"] = 1
    with pytest.raises(ValidationError, match=r"room\.x\.typo"):
        parse_config(data)


def test_empty_grid_rejected():
    with pytest.raises(ValidationError, match="grid is empty"):
        config(grid={"times": [1.0]})


def test_invalid_physical_values_rejected():
    data = copy.deepcopy(BASE)
    data["room"]["x"]["diffusivity"] = -1.0
    with pytest.raises(ValidationError, match="diffusivity"):
        parse_config(data)
    with pytest.raises(ValidationError):
        config(solver={"tol": 1e-3})


def test_missing_or_malformed_file(tmp_path):
    with pytest.raises(ValidationError):
        load_config(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump([1, 2]))
    with pytest.raises(ValidationError):
        load_config(bad)


def test_point_table_is_deterministic_across_threads():
    cfg = config()
    _, one = run_scenario(cfg, "point", threads=1)
    _, four = run_scenario(cfg, "point", threads=4)
    assert one[0].to_csv([]) == four[0].to_csv([])
    assert len(one[0].rows) == 22


def test_grid_outside_room_rejected():
    data = copy.deepcopy(BASE)
    data["grid"]["lines"][0]["stop"] = 1.5
    with pytest.raises(ValidationError, match="leaves the room"):
        run_scenario(parse_config(data), "point")


def test_command_needs_matching_sections():
    with pytest.raises(ValidationError):
        run_scenario(config(), "breath")
    with pytest.raises(ValidationError):
        run_scenario(config(), "pmd")
    with pytest.raises(ValidationError):
        run_scenario(config(), "nonsense")


def test_spectrum_table_lists_modes():
    _, tables = run_scenario(config(solver={"modes": 5}), "spectrum")
    kinds = [row[1] for row in tables[0].rows]
    assert kinds.count("positive") == 5


def test_truncation_error_shrinks_with_modes():
    model = AxisModel(AxisSpec(1.0, 2.42e-5, 1e-7, 1e-1))
    errors = truncation_errors(model, 0.5, [60.0, 600.0], reference=2000, max_count=40, line_points=201)
    assert errors.shape == (2, 40)
    assert errors[0, -1] < 1e-6 < errors[0, 0]
    # later times need fewer modes
    assert required_count(errors[1], 1e-4) < required_count(errors[0], 1e-4)


def test_required_count_semantics():
    assert required_count(np.array([1.0, 1e-5, 1e-3, 1e-6]), 1e-4) == 4
    assert required_count(np.array([1e-6, 1e-7]), 1e-4) == 1
    assert required_count(np.array([1.0, 1.0]), 1e-4) is None
