"""HTTP service wrapping the simulation and analysis package.

Request and response bodies are pydantic models; the experiment schema is the
same one the YAML configs validate against, so a config file can be posted
verbatim (as JSON) by any client.
"""

from __future__ import annotations

from typing import List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import __version__
from .config import ExperimentConfig
from .errors import EtseekError, ZenoSuspected
from .experiment import run_experiment, run_sweep

app = FastAPI(
    title="etseek",
    version=__version__,
    description="Event-triggered extremum-seeking simulation and analysis service",
)


class HealthResponse(BaseModel):
    status: str
    version: str


class CheckModel(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class RunRequest(BaseModel):
    config: ExperimentConfig
    output_dir: Optional[str] = None


class RunResponse(BaseModel):
    controller: str
    termination: str
    jump_count: int
    final_time: float
    final_state: List[float]
    checks: List[CheckModel]
    reports: dict
    files: List[str]
    all_passed: bool


class SweepResponse(BaseModel):
    parameter: str
    values: List[float]
    verdicts: List[CheckModel]
    runs: List[RunResponse]
    summary_file: Optional[str]
    all_passed: bool


class ValidateResponse(BaseModel):
    valid: bool
    resolved: ExperimentConfig


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/configs/validate", response_model=ValidateResponse)
def validate_config(config: ExperimentConfig) -> ValidateResponse:
    return ValidateResponse(valid=True, resolved=config)


def _run_response(result) -> RunResponse:
    summary = result.summary()
    return RunResponse(
        controller=summary["controller"],
        termination=summary["termination"],
        jump_count=summary["jump_count"],
        final_time=summary["final_time"],
        final_state=summary["final_state"],
        checks=[CheckModel(**c) for c in summary["checks"]],
        reports=summary["reports"],
        files=summary["files"],
        all_passed=result.all_passed,
    )


@app.post("/experiments/run", response_model=RunResponse)
def run(request: RunRequest) -> RunResponse:
    try:
        result = run_experiment(request.config, out_dir=request.output_dir)
    except ZenoSuspected as exc:
        raise HTTPException(status_code=422, detail=f"Zeno behavior suspected: {exc}")
    except EtseekError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return _run_response(result)


@app.post("/experiments/sweep", response_model=SweepResponse)
def sweep(request: RunRequest) -> SweepResponse:
    try:
        result = run_sweep(request.config, out_dir=request.output_dir)
    except ZenoSuspected as exc:
        raise HTTPException(status_code=422, detail=f"Zeno behavior suspected: {exc}")
    except EtseekError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return SweepResponse(
        parameter=result.parameter,
        values=result.values,
        verdicts=[CheckModel(**c.to_dict()) for c in result.verdicts],
        runs=[_run_response(r) for r in result.runs],
        summary_file=result.summary_file,
        all_passed=result.all_passed,
    )
