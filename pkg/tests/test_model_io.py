import json
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError as SchemaError

from src.models.schemas import ModelFile, ReducedModelFile, StateFile
from src.services.model_io import (
    decode_matrix,
    encode_matrix,
    load_reduced_model,
    model_fingerprint,
    parse_model,
    parse_schedule,
    parse_state,
    read_model_document,
    read_trajectories,
    serialize_model,
    serialize_schedule,
    state_from_file,
    trajectory_file,
    validate_payload,
    write_json,
    write_trajectories,
)
from src.services.operators import PAULI_MATRICES
from src.services.propagation import ControlSchedule
from src.services.reduction_service import ReductionService
from src.utils import ValidationError

X, Z = PAULI_MATRICES["X"], PAULI_MATRICES["Z"]


def _qubit_payload(**overrides):
    payload = {
        "dim": 2,
        "hamiltonian_drift": {"pauli": [{"string": "Z", "coeff": 0.5}]},
        "noise_drift": [{"re": [[0.1, 0.0], [0.0, -0.1]]}],
        "control_channels": [
            {"kind": "hamiltonian", "label": "x", "operator": {"pauli": [{"string": "X"}]}},
            {"kind": "dissipator", "label": "decay", "operator": {"pauli": [{"string": "-"}]},
             "coefficient_domain": [0.0, None]},
        ],
        "observables": [{"label": "Z", "operator": {"pauli": [{"string": "Z"}]}}],
    }
    payload.update(overrides)
    return payload


class TestModelFiles:
    def test_parse_payload(self):
        parsed = parse_model(_qubit_payload())
        gen = parsed.generator
        assert gen.dim_H == 2
        assert gen.channel_labels == ["x", "decay"]
        assert_allclose(gen.H0, 0.5 * Z)
        assert parsed.omega.dim == 2
        assert parsed.omega.contains_identity()

    def test_write_and_parse_file(self, tmp_path, random_controlled_generator):
        path = tmp_path / "model.json"
        write_json(path, serialize_model(random_controlled_generator, [("P0", np.diag([1.0, 0.0, 0.0]))]))
        parsed = parse_model(path)
        assert_allclose(parsed.generator.H0, random_controlled_generator.H0, atol=1e-15)
        assert parsed.generator.channels[1].coefficient_domain.to_list() == [0.0, 2.0]
        assert [label for label, _ in parsed.observables] == ["P0"]

    def test_missing_field_reports_its_path(self):
        payload = _qubit_payload()
        del payload["dim"]
        with pytest.raises(ValidationError) as excinfo:
            parse_model(payload)
        assert excinfo.value.error_code == "SCHEMA_ERROR"
        assert "dim" in excinfo.value.details["fields"]

    def test_malformed_json_reports_the_line(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "dim": 2,\n  "hamiltonian_drift": ,\n}\n', encoding="utf-8")
        with pytest.raises(ValidationError) as excinfo:
            parse_model(path)
        assert excinfo.value.error_code == "JSON_ERROR"
        assert excinfo.value.details["line"] == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError) as excinfo:
            parse_model(tmp_path / "absent.json")
        assert excinfo.value.error_code == "FILE_NOT_FOUND"

    def test_non_hermitian_drift_rejected(self):
        payload = _qubit_payload(hamiltonian_drift={"re": [[0.0, 1.0], [0.0, 0.0]]})
        with pytest.raises(ValidationError):
            parse_model(payload)

    def test_negative_dissipator_domain_rejected(self):
        payload = _qubit_payload()
        payload["control_channels"][1]["coefficient_domain"] = [-1.0, None]
        with pytest.raises(ValidationError) as excinfo:
            parse_model(payload)
        assert excinfo.value.error_code == "SCHEMA_ERROR"

    def test_wrong_operator_size_rejected(self):
        payload = _qubit_payload(observables=[{"label": "ZZ", "operator": {"pauli": [{"string": "ZZ"}]}}])
        with pytest.raises(ValidationError):
            parse_model(payload)

    def test_unsupported_version_rejected(self):
        with pytest.raises(ValidationError):
            parse_model(_qubit_payload(format_version=7))

    def test_fingerprint_ignores_metadata(self):
        a = ModelFile.model_validate(_qubit_payload(metadata={"note": "a"}))
        b = ModelFile.model_validate(_qubit_payload(metadata={"note": "b"}))
        c = ModelFile.model_validate(_qubit_payload(dim=2, hamiltonian_drift={"pauli": [{"string": "X"}]}))
        assert model_fingerprint(a) == model_fingerprint(b)
        assert model_fingerprint(a) != model_fingerprint(c)

    def test_complex_dense_matrix(self):
        encoded = encode_matrix(PAULI_MATRICES["Y"])
        assert encoded.im is not None
        Y = decode_matrix(encoded)
        assert_allclose(Y, PAULI_MATRICES["Y"])


class TestSchedulesAndStates:
    def test_schedule_file(self, tmp_path):
        schedule = ControlSchedule(((0.5, [1.0, 0.0]), (0.25, [0.0, 2.0])))
        path = tmp_path / "schedule.json"
        write_json(path, serialize_schedule(schedule))
        loaded = parse_schedule(path)
        assert loaded.total_duration == pytest.approx(0.75)
        assert_allclose(loaded.segments[1][1], [0.0, 2.0])

    def test_zero_duration_in_file_rejected(self, tmp_path):
        path = tmp_path / "schedule.json"
        path.write_text(json.dumps({"segments": [{"duration": 0.0, "u": [1.0]}]}), encoding="utf-8")
        with pytest.raises(ValidationError):
            parse_schedule(path)

    def test_vector_state_is_normalized(self):
        rho = state_from_file(StateFile(vector=[[2.0, 0.0], [0.0, 0.0]]))
        assert_allclose(rho, np.diag([1.0, 0.0]), atol=1e-14)

    def test_density_state_dimension_checked(self, tmp_path):
        path = tmp_path / "state.json"
        write_json(path, StateFile(state={"re": [[0.5, 0.0], [0.0, 0.5]]}))
        assert_allclose(parse_state(path, dim=2), np.eye(2) / 2)
        with pytest.raises(ValidationError):
            parse_state(path, dim=4)

    def test_state_file_needs_exactly_one_encoding(self):
        with pytest.raises(ValidationError):
            validate_payload({"vector": None}, StateFile)


class TestReducedModelFiles:
    def test_reduced_file_loads_with_matching_fingerprint(self, tmp_path, central_spin_n1):
        parsed = central_spin_n1
        outcome = ReductionService().reduce(parsed, "observable", seed=3)
        path = tmp_path / "reduced.json"
        write_json(path, outcome.document)

        assert isinstance(read_model_document(path), ReducedModelFile)
        loaded = load_reduced_model(path)
        assert loaded.source_fingerprint == model_fingerprint(parsed.source)
        assert loaded.maps.dim_H == 4
        assert loaded.maps.block_dims == [2, 2]
        assert loaded.report.passed
        assert_allclose(loaded.generator.H0, outcome.reduced.generator.H0, atol=1e-12)
        assert loaded.model.metadata["path"] == "observable"

    def test_plain_model_document(self, tmp_path, central_spin_n1):
        path = tmp_path / "model.json"
        write_json(path, central_spin_n1.source)
        assert isinstance(read_model_document(path), ModelFile)


class TestTrajectories:
    def test_csv_export(self, tmp_path):
        data = trajectory_file([0.0, 0.5, 1.0], {"X0": [1.0, 0.25, -0.125], "Z0": [0.0, 0.1, 0.2]})
        path = write_trajectories(tmp_path / "out.csv", data)
        header = Path(path).read_text(encoding="utf-8").splitlines()[0]
        assert header == "time,X0,Z0"
        loaded = read_trajectories(path)
        assert loaded.series["X0"] == [1.0, 0.25, -0.125]
        assert loaded.times == [0.0, 0.5, 1.0]

    def test_json_export(self, tmp_path):
        data = trajectory_file([0.0, 1.0], {"X0": [1.0, 0.5]})
        path = write_trajectories(tmp_path / "out.json", data, "json")
        assert read_trajectories(path) == data

    def test_ragged_series_rejected(self):
        with pytest.raises(SchemaError):
            trajectory_file([0.0, 1.0], {"X0": [1.0]})
