import json
from pathlib import Path

import pytest

from vnfcmap.infra import VmPlacement
from vnfcmap.model import PhysicalMachine, make_slice
from vnfcmap.oracle import AssignmentProblem, solve_exact_matching
from vnfcmap.scenario import (
    GenerationParams,
    Scenario,
    ScenarioFormatError,
    ScenarioGenerationError,
    generate,
    identity_scenario,
    load,
    placement_violations,
    save,
    scenario_from_dict,
    scenario_to_dict,
)

FIXTURES = Path(__file__).parent / "fixtures"


def test_same_seed_gives_byte_identical_files(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save(generate(123), a)
    save(generate(123), b)
    assert a.read_bytes() == b.read_bytes()
    assert generate(123) == generate(123)


def test_different_seeds_differ():
    assert generate(1) != generate(2)


def test_generated_requirements_respect_dominance():
    for seed in range(6):
        subnet = generate(seed, GenerationParams(num_vms=12)).subnet
        cu_c = sum(c.compute_req for c in subnet.components[:3])
        du_c = sum(c.compute_req for c in subnet.components[3:])
        cu_s = sum(c.storage_req for c in subnet.components[:3])
        du_s = sum(c.storage_req for c in subnet.components[3:])
        assert cu_c >= du_c and cu_s >= du_s


def test_generated_values_stay_in_ranges():
    params = GenerationParams(num_vms=30, req_range=(1, 4), cap_range=(2, 7))
    scenario = generate(9, params)
    for comp in scenario.subnet.components:
        assert 1 <= comp.compute_req <= 4 and 1 <= comp.storage_req <= 4
    for vm in scenario.vms:
        assert 2 <= vm.compute_cap <= 7 and 2 <= vm.storage_cap <= 7


def test_every_generated_scenario_is_feasible():
    for seed in (0, 5, 17, 92):
        scenario = generate(seed, GenerationParams(num_vms=10))
        solution = solve_exact_matching(
            AssignmentProblem(scenario.subnet.components, scenario.vms)
        )
        assert len(solution.pairs) == 8


def test_identity_scenario_has_zero_optimum():
    subnet = make_slice([4, 3, 3, 2, 2, 2, 2, 2], [3, 3, 3, 2, 2, 2, 1, 1])
    scenario = identity_scenario(subnet)
    assert scenario.num_vms == 8
    solution = solve_exact_matching(AssignmentProblem(scenario.subnet.components, scenario.vms))
    assert solution.objective_value == 0.0


def test_generation_error_when_dominance_impossible():
    # With all requirements forced equal, five distributed-unit components
    # always outweigh three centralized-unit ones.
    with pytest.raises(ScenarioGenerationError, match="cu-dominance"):
        generate(0, GenerationParams(num_vms=10, req_range=(3, 3)))


def test_generation_error_when_capacity_hopeless():
    params = GenerationParams(num_vms=8, req_range=(1, 2), cap_range=(1, 1))
    with pytest.raises(ScenarioGenerationError, match="feasible"):
        generate(0, params)


def test_roundtrip_preserves_structure(tmp_path):
    scenario = generate(55, GenerationParams(num_vms=15))
    path = tmp_path / "scenario.json"
    save(scenario, path)
    assert load(path) == scenario


def test_missing_version_is_named():
    with pytest.raises(ScenarioFormatError, match="version") as err:
        scenario_from_dict({"slice": {}, "vms": []})
    assert err.value.field == "version"


def test_unsupported_version_rejected():
    doc = scenario_to_dict(generate(1, GenerationParams(num_vms=9)))
    doc["version"] = 99
    with pytest.raises(ScenarioFormatError, match="version"):
        scenario_from_dict(doc)


def test_malformed_component_field_path():
    doc = scenario_to_dict(generate(2, GenerationParams(num_vms=9)))
    del doc["slice"]["components"][2]["storage_req"]
    with pytest.raises(ScenarioFormatError) as err:
        scenario_from_dict(doc)
    assert err.value.field == "slice.components[2].storage_req"


def test_unknown_kind_rejected():
    doc = scenario_to_dict(generate(2, GenerationParams(num_vms=9)))
    doc["slice"]["components"][0]["kind"] = "NOPE"
    with pytest.raises(ScenarioFormatError, match="kind"):
        scenario_from_dict(doc)


def test_dominance_violation_in_file_is_validation_error():
    doc = scenario_to_dict(generate(3, GenerationParams(num_vms=9)))
    for comp in doc["slice"]["components"][:3]:
        comp["compute_req"] = 0
    with pytest.raises(ValueError, match="cu-dominance"):
        scenario_from_dict(doc)


def test_not_json_reports_document():
    with pytest.raises(ScenarioFormatError, match="JSON"):
        load(FIXTURES / "../test_scenario.py")


def test_substrate_roundtrip_and_validation(tmp_path):
    base = generate(4, GenerationParams(num_vms=8, cap_range=(3, 5)))
    vms = base.vms[:2]
    pms = (PhysicalMachine(id=1, compute_cap=20, storage_cap=20, max_vm_count=2),)
    placement = VmPlacement(x=((1,), (1,)), pm_active=(True,))
    scenario = Scenario(subnet=base.subnet, vms=vms, seed=4, pms=pms, placement=placement)
    assert placement_violations(scenario) == []
    path = tmp_path / "sub.json"
    save(scenario, path)
    assert load(path) == scenario

    # break the placement: point both machines at a substrate that cannot hold them
    doc = scenario_to_dict(scenario)
    doc["pms"][0]["compute_cap"] = 1
    bad_path = tmp_path / "bad.json"
    bad_path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="substrate"):
        load(bad_path)
    relaxed = load(bad_path, validate_placement=False)
    assert placement_violations(relaxed) != []


def test_placement_without_pms_rejected():
    base = generate(5, GenerationParams(num_vms=8, cap_range=(3, 5)))
    with pytest.raises(ValueError, match="substrate"):
        Scenario(
            subnet=base.subnet,
            vms=base.vms[:2],
            placement=VmPlacement(x=((1,), (0,)), pm_active=(True,)),
        )


def test_vm_ids_must_be_sequential():
    base = generate(6, GenerationParams(num_vms=8, cap_range=(3, 5)))
    with pytest.raises(ValueError, match="1..m"):
        Scenario(subnet=base.subnet, vms=(base.vms[1], base.vms[0], base.vms[2]))


def test_params_validation():
    with pytest.raises(ValueError):
        GenerationParams(num_vms=4)
    with pytest.raises(ValueError):
        GenerationParams(req_range=(0, 3))
    with pytest.raises(ValueError):
        GenerationParams(cap_range=(5, 2))


def test_canonical_fixture_loads():
    scenario = load(FIXTURES / "canonical_scenario.json")
    assert scenario.seed == 42
    assert scenario.num_vms == 100
