import json
import math
from pathlib import Path

import pytest

from config import settings
from core.audits import AuditReport
from core.errors import ConfigError
from core.generators import generate
from core.partition import build_partition
from core.processor import RunConfig, run_pipeline
from core.refinement import (
    attach_refinement_ratios,
    refine_space_source,
    refined_config,
    refinement_ratio,
)
from core.whitney import build_whitney
from utils.file_utils import read_json

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def test_cantor_doubles_default_resolution():
    refined = refine_space_source({"generator": "fat_cantor", "params": {"level": 2}})
    assert refined["params"]["resolution"] == 128
    assert refined["params"]["spacing"] == 0.5
    assert refined["params"]["level"] == 2


def test_sierpinski_doubles_explicit_resolution():
    refined = refine_space_source({"generator": "fat_sierpinski", "params": {"level": 1, "resolution": 12,
                                                                           "spacing": 2.0}})
    assert refined["params"]["resolution"] == 24
    assert refined["params"]["spacing"] == 1.0


def test_grid_doubles_every_axis():
    refined = refine_space_source({"generator": "grid", "params": {"dims": [4, 6]}})
    assert refined["params"]["dims"] == [8, 12]


def test_files_cannot_be_refined():
    with pytest.raises(ConfigError):
        refine_space_source({"file": "space.mms"})


@pytest.mark.parametrize("coarse, fine, expected", [
    (2.0, 3.0, 1.5),
    (0.0, 0.0, 1.0),
    (0.0, 1.0, math.inf),
    (math.inf, math.inf, 1.0),
    (4.0, 0.0, 0.0),
])
def test_refinement_ratio(coarse, fine, expected):
    assert refinement_ratio(coarse, fine) == expected


def test_ratios_are_matched_by_name():
    coarse = [AuditReport("a", 2.0), AuditReport("b", 1.0)]
    fine = [AuditReport("b", 3.0)]
    attach_refinement_ratios(coarse, fine)
    assert coarse[0].refinement_ratio is None
    assert coarse[1].refinement_ratio == 3.0
    assert coarse[1].details["refined_observed_constant"] == 3.0


def test_indicator_input_cannot_be_refined(tmp_path):
    config = RunConfig.from_dict({
        "space": {"generator": "fat_cantor", "params": {"level": 1}},
        "input_function": {"name": "indicator", "params": {"ids": [0]}},
        "output_dir": str(tmp_path),
        "refine": True,
    })
    with pytest.raises(ConfigError, match="indicator"):
        refined_config(config)
    assert run_pipeline(config)[0] == settings.EXIT_ERROR


def test_refined_run_writes_both_levels(tmp_path):
    config = RunConfig.from_dict({
        "space": {"generator": "fat_cantor", "params": {"level": 1}},
        "delta": 2,
        "audits": ["gradient_inequality", "sharp_bounds"],
        "output_dir": str(tmp_path),
        "refine": True,
    })
    code, reports = run_pipeline(config)
    assert code in (settings.EXIT_PASS, settings.EXIT_AUDIT_FAILURE)
    assert all(r.refinement_ratio is not None for r in reports)
    assert read_json(str(tmp_path / "refined" / settings.PARAMS_FILE))["points"] == 32
    assert read_json(str(tmp_path / settings.PARAMS_FILE))["points"] == 16


def load_fixture(name, out, **overrides):
    data = json.loads((FIXTURES / name).read_text())
    data.update(overrides, output_dir=str(out))
    return RunConfig.from_dict(data)


def assert_stable(ratio):
    assert 0.25 <= ratio <= 4.0


def test_sub_inequalities_get_their_own_ratios():
    coarse = [AuditReport("trace_equivalence", 2.0, details={'upper': {'value': 2.0}, 'lower': {'value': 0.5},
                                                              'p': 2.0})]
    fine = [AuditReport("trace_equivalence", 3.0, details={'upper': {'value': 3.0}, 'lower': {'value': 0.25},
                                                            'p': 2.0})]
    attach_refinement_ratios(coarse, fine)
    assert coarse[0].details['refinement_ratios'] == {'lower': 0.5, 'upper': 1.5}
    assert coarse[0].details['refined_sub_constants'] == {'lower': 0.25, 'upper': 3.0}


def test_partition_constant_is_refinement_stable():
    source = {"generator": "fat_cantor", "params": {"level": 2}}
    constants = []
    for level in (source, refine_space_source(source)):
        generated = generate(level["generator"], **level["params"])
        cover = build_whitney(generated.space, generated.mask)
        constants.append(build_partition(generated.space, generated.mask, cover).lipschitz_constant)
    assert all(math.isfinite(c) and c > 0.0 for c in constants)
    assert 0.5 <= refinement_ratio(*constants) <= 2.0


@pytest.mark.slow
def test_gradient_constant_is_refinement_stable(tmp_path):
    config = load_fixture("fat_sierpinski_l2.json", tmp_path, p=2, audits=["gradient_inequality"])
    code, reports = run_pipeline(config)
    assert code != settings.EXIT_ERROR
    (report,) = reports
    assert math.isfinite(report.observed_constant)
    assert math.isfinite(report.details['refined_observed_constant'])
    assert_stable(report.refinement_ratio)


@pytest.mark.slow
@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_sharp_bound_everywhere_is_refinement_stable(tmp_path, alpha):
    config = load_fixture("fat_sierpinski_l2.json", tmp_path, alpha=alpha, audits=["sharp_bounds"])
    code, reports = run_pipeline(config)
    assert code != settings.EXIT_ERROR
    (report,) = reports
    ratios = report.details['refinement_ratios']
    assert {'on_subset', 'everywhere', 'pointwise', 'restriction'} <= set(ratios)
    assert math.isfinite(report.sub_constants()['everywhere'])
    assert math.isfinite(report.details['refined_sub_constants']['everywhere'])
    assert_stable(ratios['everywhere'])
    assert_stable(report.refinement_ratio)


@pytest.mark.slow
@pytest.mark.parametrize("p", [2, "inf"])
def test_cantor_norm_equivalence_is_refinement_stable(tmp_path, p):
    config = load_fixture("fat_cantor_pinf.json", tmp_path, p=p)
    code, reports = run_pipeline(config)
    assert code != settings.EXIT_ERROR
    by_name = {r.name: r for r in reports}
    trace = by_name["trace_equivalence"]
    for key in ("upper", "lower"):
        assert math.isfinite(trace.sub_constants()[key])
        assert_stable(trace.details['refinement_ratios'][key])
    assert "hajlasz" in trace.details['refinement_ratios']
    assert_stable(trace.refinement_ratio)
    assert_stable(by_name["maximal_boundedness"].refinement_ratio)
