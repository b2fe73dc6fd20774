import pytest
from fastapi.testclient import TestClient

from connrisk import gbdt
from connrisk.domain import DsmStage
from connrisk.gbdt import sigmoid
from connrisk.pipeline import GmmConfig, RunConfig, run_stage
from connrisk.service import create_app
from connrisk.synthgen import SynthConfig


@pytest.fixture(scope="module")
def tactical_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("svc") / "tactical"
    config = RunConfig(
        stage=DsmStage.TACTICAL,
        synth=SynthConfig(seed=21, n_rows=12_000),
        seed=21,
        gmm=GmmConfig(components=30, max_iter=25, tol=1.0),
        boost=gbdt.BoostConfig(n_rounds=30, max_depth=5),
        shap_rows=300,
        render_figures=False,
    )
    run_stage(config, out)
    return out


@pytest.fixture(scope="module")
def client(tactical_bundle):
    return TestClient(create_app(bundle_dir=tactical_bundle))


BASE_FEATURES = {
    "TP From": "TP101",
    "TP To": "TP301",
    "Traffic Network": "NS",
    "Dep. Day": 2,
    "Dep. Month Day": 14,
    "Sex": "F",
    "Age": 44,
    "Is Group": False,
    "Class From": "Y",
    "Class To": "Y",
    "Perceived Conn. Time": 30,
}


def predict(client, **overrides):
    features = {**BASE_FEATURES, **overrides}
    return client.post("/v1/predict", json={"stage": "tactical", "features": features})


class TestHealthAndMetadata:
    def test_healthz(self, client):
        body = client.get("/healthz").json()
        assert body == {"status": "ok", "model_loaded": True}

    def test_model_metadata(self, client):
        body = client.get("/v1/model").json()
        assert body["stage"] == "tactical"
        names = [f["name"] for f in body["features"]]
        assert "Perceived Conn. Time" in names and "Age" in names
        assert 0 < body["threshold"] < 1
        assert body["r_min"] is None or body["r_min"] >= 1.0
        assert body["version"]


class TestPredict:
    def test_short_connection_riskier_than_long(self, client):
        p30 = predict(client, **{"Perceived Conn. Time": 30}).json()["probability"]
        p180 = predict(client, **{"Perceived Conn. Time": 180}).json()["probability"]
        assert p30 > p180

    def test_served_explanation_satisfies_local_accuracy(self, client):
        body = predict(client).json()
        total = body["base_value"] + sum(body["shap_values"].values())
        assert abs(total - body["margin"]) <= 1e-6
        assert body["probability"] == pytest.approx(float(sigmoid(body["margin"])))

    def test_deterministic_responses(self, client):
        r1 = predict(client).json()
        r2 = predict(client).json()
        assert r1 == r2

    def test_unknown_category_falls_back_to_prior(self, client):
        response = predict(client, **{"TP From": "ZZ999"})
        assert response.status_code == 200

    def test_missing_feature_names_field(self, client):
        features = dict(BASE_FEATURES)
        features.pop("Age")
        response = client.post("/v1/predict", json={"stage": "tactical", "features": features})
        assert response.status_code == 400
        assert "Age" in response.json()["detail"]

    def test_wrong_type_rejected(self, client):
        response = predict(client, Age="forty-two")
        assert response.status_code == 400
        assert "Age" in response.json()["detail"]

    def test_stage_mismatch_conflict(self, client):
        response = client.post("/v1/predict",
                               json={"stage": "strategic", "features": BASE_FEATURES})
        assert response.status_code == 409

    def test_unknown_stage_400(self, client):
        response = client.post("/v1/predict",
                               json={"stage": "wartime", "features": BASE_FEATURES})
        assert response.status_code == 400


class TestWhatIf:
    def test_batch_preserves_order(self, client):
        times = (20, 60, 120, 240)
        perturbations = [{"Perceived Conn. Time": t} for t in times]
        response = client.post("/v1/whatif", json={
            "base": {"stage": "tactical", "features": BASE_FEATURES},
            "perturbations": perturbations,
        })
        assert response.status_code == 200
        responses = response.json()["responses"]
        assert len(responses) == 4
        # responses come back in perturbation order
        direct = [predict(client, **{"Perceived Conn. Time": t}).json() for t in times]
        assert responses == direct
        # a 20-minute margin is the riskiest scenario of the batch
        probs = [r["probability"] for r in responses]
        assert probs[0] == max(probs)
        assert probs[0] > probs[-1]

    def test_empty_batch(self, client):
        response = client.post("/v1/whatif", json={
            "base": {"stage": "tactical", "features": BASE_FEATURES},
            "perturbations": [],
        })
        assert response.status_code == 200
        assert response.json()["responses"] == []

    def test_bad_perturbation_field_is_400(self, client):
        response = client.post("/v1/whatif", json={
            "base": {"stage": "tactical", "features": BASE_FEATURES},
            "perturbations": [{"Age": "old"}],
        })
        assert response.status_code == 400


class TestLifecycle:
    def test_unloaded_service_returns_503(self):
        bare = TestClient(create_app())
        assert bare.get("/healthz").json()["model_loaded"] is False
        response = bare.post("/v1/predict",
                             json={"stage": "tactical", "features": BASE_FEATURES})
        assert response.status_code == 503
        assert bare.get("/v1/model").status_code == 503

    def test_admin_reload_swaps_snapshot(self, tactical_bundle):
        bare = TestClient(create_app())
        response = bare.post("/admin/reload", json={"bundle_dir": str(tactical_bundle)})
        assert response.status_code == 200
        assert response.json()["stage"] == "tactical"
        assert bare.post("/v1/predict",
                         json={"stage": "tactical", "features": BASE_FEATURES}).status_code == 200

    def test_reload_requires_dir(self):
        bare = TestClient(create_app())
        assert bare.post("/admin/reload", json={}).status_code == 400
