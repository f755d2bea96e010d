import json
import threading
import urllib.error
import urllib.request
from pathlib import Path

import pytest

from vnfcmap.agents import AgentVariant, save_policy, train
from vnfcmap.mdp import Hyperparameters
from vnfcmap.model import make_slice
from vnfcmap.scenario import (
    GenerationParams,
    generate,
    identity_scenario,
    load,
    scenario_to_dict,
)
from vnfcmap.service import (
    DEFAULT_DESCRIPTOR,
    handle_map,
    make_server,
    parse_request,
    validate_descriptor,
)

FIXTURES = Path(__file__).parent / "fixtures"


def _request_doc(scenario, policy):
    doc = scenario_to_dict(scenario)
    return {"slice": doc["slice"], "vms": doc["vms"], "policy": policy}


@pytest.fixture(scope="module")
def canonical():
    return load(FIXTURES / "canonical_scenario.json")


@pytest.fixture(scope="module")
def recorded_optimum():
    return json.loads((FIXTURES / "canonical_oracle.json").read_text())


def test_oracle_policy_returns_recorded_optimum(canonical, recorded_optimum):
    status, body = handle_map(_request_doc(canonical, "oracle"))
    assert status == 200
    assert body["status"] == "mapped"
    expected = recorded_optimum["absolute_surplus"]
    assert body["pairs"] == expected["pairs"]
    assert body["objective"]["value"] == expected["objective_value"]
    assert len(body["per_pair_wastage"]) == 8


def test_oracle_policy_is_idempotent(canonical):
    first = handle_map(_request_doc(canonical, "oracle"))
    second = handle_map(_request_doc(canonical, "oracle"))
    assert first == second


def test_undersized_inventory_cites_capacity_fit():
    subnet = make_slice([4, 3, 3, 2, 2, 2, 2, 2], [3, 3, 3, 2, 2, 2, 1, 1])
    scenario = identity_scenario(subnet)
    doc = _request_doc(scenario, "oracle")
    doc["vms"][0]["compute_cap"] = 1  # f1 can only fit machine 1
    status, body = handle_map(doc)
    assert status == 200
    assert body["status"] == "infeasible"
    assert body["rule"] == "capacity-fit"
    assert "component 1" in body["detail"]


def test_greedy_on_identity_inventory_is_exact():
    subnet = make_slice([4, 3, 3, 2, 2, 2, 2, 2], [3, 3, 3, 2, 2, 2, 1, 1])
    scenario = identity_scenario(subnet)
    status, body = handle_map(_request_doc(scenario, "greedy"))
    assert status == 200
    assert body["status"] == "mapped"
    assert body["objective"]["value"] == 0.0


def test_greedy_matches_oracle_value_or_worse(canonical):
    _, greedy = handle_map(_request_doc(canonical, "greedy"))
    _, oracle = handle_map(_request_doc(canonical, "oracle"))
    assert greedy["objective"]["value"] >= oracle["objective"]["value"]


def test_trained_policy_replays_model(tmp_path):
    scenario = generate(31, GenerationParams(num_vms=12))
    _, learner = train(
        AgentVariant.OFF_POLICY_TABULAR, scenario, Hyperparameters(episodes=400), seed=0
    )
    model_path = tmp_path / "model.json"
    save_policy(learner, model_path)
    doc = _request_doc(scenario, {"kind": "trained", "model": str(model_path)})
    status, body = handle_map(doc)
    assert status == 200
    if body["status"] == "mapped":
        assert sorted(body["pairs"]) == [str(i) for i in range(1, 9)]
        assert len(set(body["pairs"].values())) == 8
    else:
        assert body["rule"]


def test_trained_policy_requires_model_path(canonical):
    status, body = handle_map(_request_doc(canonical, {"kind": "trained"}))
    assert status == 400
    assert body["error"]["field"] == "policy.model"


def test_trained_policy_falls_back_to_default_model(tmp_path):
    scenario = generate(32, GenerationParams(num_vms=10))
    _, learner = train(
        AgentVariant.OFF_POLICY_LINEAR, scenario, Hyperparameters(episodes=100), seed=0
    )
    model_path = tmp_path / "model.json"
    save_policy(learner, model_path)
    doc = _request_doc(scenario, {"kind": "trained"})
    doc["policy"]["model"] = None
    status, body = handle_map(doc)
    assert status == 400
    status, body = handle_map(doc, default_model=str(model_path))
    assert status == 200


def test_missing_field_is_400_with_path(canonical):
    doc = _request_doc(canonical, "oracle")
    del doc["vms"]
    status, body = handle_map(doc)
    assert status == 400
    assert body["error"]["field"] == "vms"

    doc = _request_doc(canonical, "oracle")
    del doc["slice"]["components"][0]["compute_req"]
    status, body = handle_map(doc)
    assert status == 400
    assert "compute_req" in body["error"]["field"]


def test_unknown_policy_kind_rejected(canonical):
    status, body = handle_map(_request_doc(canonical, "magic"))
    assert status == 400
    assert body["error"]["field"] == "policy.kind"


def test_parse_request_normalizes_string_policy(canonical):
    request = parse_request(_request_doc(canonical, "greedy"))
    assert request.policy == "greedy"
    assert request.scenario.num_vms == canonical.num_vms


def test_descriptor_validation():
    validate_descriptor(DEFAULT_DESCRIPTOR)
    with pytest.raises(ValueError, match="missing"):
        validate_descriptor({"name": "x", "version": 1})
    with pytest.raises(ValueError, match="mocked"):
        validate_descriptor(
            {"name": "x", "version": 1, "stages": {"onboarding": "active"}}
        )


@pytest.fixture()
def server():
    srv = make_server(0)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv
    srv.shutdown()
    srv.server_close()


def _post(port, path, payload):
    req = urllib.request.Request(
        f"http://127.0.0.1:{port}{path}",
        data=json.dumps(payload).encode(),
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(req) as resp:
        return resp.status, json.loads(resp.read())


def test_http_health_and_map(server, canonical, recorded_optimum):
    port = server.server_address[1]
    with urllib.request.urlopen(f"http://127.0.0.1:{port}/health") as resp:
        health = json.loads(resp.read())
    assert health["status"] == "ok"
    assert health["descriptor"]["stages"]["onboarding"] == "mocked"

    status, body = _post(port, "/map", _request_doc(canonical, "oracle"))
    assert status == 200
    assert body["pairs"] == recorded_optimum["absolute_surplus"]["pairs"]


def test_http_malformed_body(server, canonical):
    port = server.server_address[1]
    doc = _request_doc(canonical, "oracle")
    del doc["slice"]
    with pytest.raises(urllib.error.HTTPError) as err:
        _post(port, "/map", doc)
    assert err.value.code == 400
    assert json.loads(err.value.read())["error"]["field"] == "slice"


def test_http_unknown_path(server):
    port = server.server_address[1]
    with pytest.raises(urllib.error.HTTPError) as err:
        urllib.request.urlopen(f"http://127.0.0.1:{port}/nope")
    assert err.value.code == 404


def test_http_invalid_json(server):
    port = server.server_address[1]
    req = urllib.request.Request(f"http://127.0.0.1:{port}/map", data=b"{not json")
    with pytest.raises(urllib.error.HTTPError) as err:
        urllib.request.urlopen(req)
    assert err.value.code == 400
