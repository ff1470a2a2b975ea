"""
FastAPI web application for browsing and launching MEMD runs.
"""

import logging
import os
import sys
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware

# Add parent directory to path to import memd
sys.path.insert(0, str(Path(__file__).parent.parent))
from memd import RunConfig, RunRecorder, SQLiteStorage, decompose
from memd.analysis import check_quadtone, correlation_report, imf_condition_check
from memd.errors import MemdError
from memd.signal_io import read_upload
from memd.synth import load_preset

logger = logging.getLogger(__name__)

app = FastAPI(title="MEMD Runs API", version="0.1.0")

app.add_middleware(
    CORSMiddleware,
    allow_origins=["http://localhost:5173", "http://localhost:3000"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

storage = SQLiteStorage(os.environ.get("MEMD_DB", "memd_runs.db"))


@app.get("/")
async def root():
    return {"message": "MEMD Runs API", "version": "0.1.0"}


@app.get("/api/runs")
async def list_runs(limit: int = 50):
    """Most recent runs first."""
    return storage.list_runs(limit=limit)


@app.get("/api/runs/{run_id}")
async def get_run(run_id: str):
    run = storage.get_run(run_id)
    if not run:
        raise HTTPException(status_code=404, detail="Run not found")
    return run


@app.delete("/api/runs/{run_id}")
async def delete_run(run_id: str):
    if not storage.get_run(run_id):
        raise HTTPException(status_code=404, detail="Run not found")
    storage.delete_run(run_id)
    return {"deleted": run_id}


@app.post("/api/decompose")
async def decompose_upload(
    file: UploadFile = File(...),
    imfs: int = Form(4),
    dirs: int = Form(8),
    siftings: int = Form(4),
    path: str = Form("real"),
    envelope: str = Form("cubic"),
):
    """
    Decompose an uploaded signal (CSV, Excel or JSON; first column is time)
    and store the run. Returns the run id and per-IMF condition checks.
    """
    contents = await file.read()
    try:
        x = read_upload(contents, file.filename or "upload.csv")
        config = RunConfig(
            channels=x.n_channels,
            directions=dirs,
            siftings=siftings,
            imfs=imfs,
            path=path,
            envelope=envelope,
            sample_rate=float(x.sample_rate),
        )
        with RunRecorder(name=file.filename, storage=storage) as recorder:
            recorder.add_metadata("command", "decompose")
            stack = decompose(x, config.imfs, config.sift_config(), recorder=recorder)
    except MemdError as e:
        raise HTTPException(status_code=400, detail=str(e))

    conditions = []
    for j in range(stack.n_extracted):
        report = imf_condition_check(stack.imf(j), reference=x)
        conditions.append({
            "imf": j + 1,
            "passed": report.passed,
            "channels": report.to_frame().to_dict(orient="records"),
        })
    logger.info("run %s: %d IMFs from %s", recorder.run_id, stack.n_extracted, file.filename)
    return {
        "run_id": recorder.run_id,
        "channels": x.n_channels,
        "samples": x.length,
        "n_extracted": stack.n_extracted,
        "conditions": conditions,
    }


@app.post("/api/validate")
async def validate_preset(preset: str = "quadtone", length: Optional[int] = None, seed: int = 0):
    """Decompose a preset with default settings and compare IMFs with its truths."""
    try:
        chosen = load_preset(preset, length, seed)
        config = RunConfig(channels=chosen.signal.n_channels, sample_rate=chosen.signal.sample_rate)
        with RunRecorder(name=chosen.name, storage=storage) as recorder:
            recorder.add_metadata("command", "validate")
            stack = decompose(chosen.signal, config.imfs, config.sift_config(), recorder=recorder)
            report = correlation_report(stack, chosen.truths, chosen.truth_labels)
            passed = check_quadtone(report).passed if chosen.name == "quadtone" else None
            recorder.add_metadata("correlation", report.matrix.tolist())
            recorder.add_metadata("passed", passed)
    except MemdError as e:
        raise HTTPException(status_code=400, detail=str(e))

    return {
        "run_id": recorder.run_id,
        "preset": chosen.name,
        "rows": report.row_labels,
        "columns": report.column_labels,
        "correlation": report.matrix.round(4).tolist(),
        "passed": passed,
    }
