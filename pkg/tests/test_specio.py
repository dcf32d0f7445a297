import json
import re

import pytest

from skewloc.dynamics import TorusPoint
from skewloc.errors import SpecFormatError
from skewloc.operator import OperatorSpec, TrigPoly, sample_random_spec, with_hopping
from skewloc.specio import dumps_spec, load_spec, loads_spec, save_spec, validate_spec_file


@pytest.mark.parametrize("seed,d", [(0, 3), (1, 3), (7, 4), (8, 5)])
def test_round_trip_byte_identical(seed, d):
    spec = sample_random_spec(seed, d=d)
    text = dumps_spec(spec)
    back = loads_spec(text)
    assert dumps_spec(back) == text
    assert back == spec


def test_round_trip_float_point_and_empty_hopping():
    spec = sample_random_spec(3)
    spec = OperatorSpec(3, spec.omega, spec.v, with_hopping(spec, {}).hopping,
                        TorusPoint.from_floats([0.1, 0.25, 1 / 3]), None)
    text = dumps_spec(spec)
    assert dumps_spec(loads_spec(text)) == text
    assert loads_spec(text).x0 == spec.x0


def test_file_is_plain_json(tmp_path):
    path = save_spec(sample_random_spec(2), tmp_path / "s.json")
    data = json.loads(path.read_text())
    assert data["format"] == "skewloc-spec/1" and data["omega"]["hex"].startswith("0x.")
    assert load_spec(path) == sample_random_spec(2)


def test_validate_sampled(tmp_path):
    path = save_spec(sample_random_spec(1), tmp_path / "s.json")
    assert validate_spec_file(path) == []


def test_validate_hand_edited_phi5(tmp_path):
    spec = sample_random_spec(1)
    lines = dumps_spec(spec).split("\n")
    start = lines.index(next(l for l in lines if l.startswith('"5": ')))
    i = start + 1
    while lines[i].startswith("  ["):
        head, re_, im = re.match(r"(\s*\[\[.*?\]), (\S+), (\S+?)\](,?)$", lines[i]).groups()[:3]
        tail = "," if lines[i].endswith(",") else ""
        lines[i] = f"{head}, {2 * float(re_)!r}, {2 * float(im)!r}]{tail}"
        i += 1
    path = tmp_path / "edited.json"
    path.write_text("\n".join(lines))
    problems = validate_spec_file(path)
    assert len(problems) == 1
    assert "phi_5" in problems[0] and "gamma*e^-5" in problems[0]


def test_validate_constant_v(tmp_path):
    spec = sample_random_spec(1)
    flat = OperatorSpec(3, spec.omega, TrigPoly(3, {(0, 0, 0): 0.5}, real=True), spec.hopping, spec.x0, 1)
    path = save_spec(flat, tmp_path / "flat.json")
    assert any(p.startswith("v nonconstant") for p in validate_spec_file(path))


def test_parse_error_has_line():
    text = dumps_spec(sample_random_spec(1)).replace('"K_max": 20,', '"K_max": 20,,')
    with pytest.raises(SpecFormatError) as exc:
        loads_spec(text)
    assert exc.value.line == 9


def test_field_errors():
    text = dumps_spec(sample_random_spec(1))
    with pytest.raises(SpecFormatError) as exc:
        loads_spec(text.replace('"K_max": 20', '"K_max": "20"'))
    assert exc.value.field == "K_max" and exc.value.line == 9
    with pytest.raises(SpecFormatError) as exc:
        loads_spec(text.replace('"omega": {"hex": "0x.', '"omega": {"hex": "0y.'))
    assert exc.value.field == "omega" and exc.value.line == 5
    with pytest.raises(SpecFormatError) as exc:
        loads_spec(text.replace('"format": "skewloc-spec/1"', '"format": "other"'))
    assert exc.value.field == "format"
    with pytest.raises(SpecFormatError) as exc:
        loads_spec(text.replace("[[-2, -2, -2],", "[[-2, -2],", 1))
    assert exc.value.field == "v"


def test_missing_file(tmp_path):
    with pytest.raises(SpecFormatError):
        load_spec(tmp_path / "nope.json")
