from codedfog import __version__
from codedfog.config import Settings, settings
from codedfog.core.errors import CodedFogError, PlanInfeasible
from codedfog.core.progress_emitter import ProgressEmitter


def test_defaults():
    assert settings.ARTIFACT_VERSION == __version__
    assert settings.CODEDFOG_SEED == 0xC0DEDF06
    assert settings.LOG_FORMAT in ("json", "console")


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("CODEDFOG_SEED", "7")
    monkeypatch.setenv("FINISHER_SAMPLES", "3")

    overridden = Settings()

    assert overridden.CODEDFOG_SEED == 7
    assert overridden.FINISHER_SAMPLES == 3


def test_error_document():
    error = PlanInfeasible("coverage too small", details={"minimum": 1})

    assert isinstance(error, CodedFogError)
    assert error.to_dict() == {
        "success": False,
        "error": "plan-infeasible",
        "message": "coverage too small",
        "details": {"minimum": 1},
    }


def test_progress_snapshot_drops_timestamps_and_empty_details():
    emitter = ProgressEmitter("run")
    emitter.emit("started", "go", 150, {"kept": 1, "dropped": None, "empty": []})

    (event,) = emitter.snapshot()

    assert event == {"stage": "started", "message": "go", "progress": 100, "details": {"kept": 1}}
