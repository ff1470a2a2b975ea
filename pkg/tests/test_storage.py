import numpy as np
import pytest

from memd.core import RunRecorder
from memd.storage import canonical_run


@pytest.fixture(params=["memory", "sqlite"])
def storage(request, memory_storage, sqlite_storage):
    return memory_storage if request.param == "memory" else sqlite_storage


def test_recorder_ids_and_inactive_guard():
    recorder = RunRecorder()
    assert recorder.run_id.startswith("run_")
    assert len(recorder.run_id) == len("run_") + 8
    with pytest.raises(RuntimeError):
        recorder.record_step("imf_1")
    with pytest.raises(RuntimeError):
        recorder.save()


def test_recorder_steps_and_update():
    with RunRecorder(name="demo") as recorder:
        step = recorder.record_step("imf_1", "imf_extraction", {"samples": 10}, {"energy": 1.5}, "4 sifting iterations")
        recorder.record_step("imf_2")
        recorder.update_step(step_id=step["id"], reasoning="edited")
        recorder.update_step(step_index=1, output={"energy": 0.0})
        recorder.update_step(step_id="step_99", reasoning="ignored")
    run = recorder.get_run()
    assert run["name"] == "demo"
    assert [s["id"] for s in run["steps"]] == ["step_1", "step_2"]
    assert run["steps"][0]["reasoning"] == "edited"
    assert run["steps"][1]["type"] == "general"
    assert run["steps"][1]["output"] == {"energy": 0.0}
    assert run["ended_at"] is not None


def test_round_trip(storage):
    with RunRecorder(name="mixture", storage=storage) as recorder:
        recorder.record_step("imf_1", "imf_extraction", output_data={"energy": np.float64(2.5)})
        recorder.add_metadata("correlation", np.eye(2))
    run = storage.get_run(recorder.run_id)
    assert run["id"] == recorder.run_id
    assert run["name"] == "mixture"
    assert run["steps"][0]["output"]["energy"] == 2.5
    assert "name" not in run["metadata"]
    assert run["ended_at"] == recorder.ended_at


def test_errors_are_recorded(storage):
    with pytest.raises(ValueError):
        with RunRecorder(name="broken", storage=storage) as recorder:
            raise ValueError("bad input")
    assert storage.get_run(recorder.run_id)["metadata"]["error"] == "ValueError: bad input"


def test_list_and_delete(storage):
    ids = []
    for name in ("a", "b", "c"):
        recorder = RunRecorder(name=name, storage=storage, auto_save=False)
        with recorder:
            recorder.record_step("imf_1")
        recorder.save()
        ids.append(recorder.run_id)
    runs = storage.list_runs(limit=2)
    assert len(runs) == 2
    assert all(r["steps"] == [] for r in runs)
    storage.delete_run(ids[0])
    assert storage.get_run(ids[0]) is None
    assert {r["id"] for r in storage.list_runs()} == set(ids[1:])


def test_save_replaces_existing_run(storage):
    storage.save_run("run_fixed", {"name": "first"}, [{"id": "step_1"}])
    storage.save_run("run_fixed", {"name": "second"}, [])
    run = storage.get_run("run_fixed")
    assert run["name"] == "second"
    assert run["steps"] == []


def test_canonical_run_defaults():
    run = canonical_run("run_x", {"answer": 42}, None, "2024-01-01T00:00:00Z")
    assert run == {
        "id": "run_x",
        "name": "unnamed_run",
        "started_at": "2024-01-01T00:00:00Z",
        "ended_at": None,
        "metadata": {"answer": 42},
        "steps": [],
    }
