"""
Run recorder: captures the provenance of a decomposition run.
"""

import logging
import uuid
from typing import Any, Dict, List, Optional

from .storage import utc_stamp as _now

logger = logging.getLogger(__name__)


class RunRecorder:
    """
    Context manager tracking the stages of one decomposition run.

    Usage:
        with RunRecorder(name="quadtone", storage=storage) as recorder:
            stack = decompose(x, 4, config, recorder=recorder)
    """

    def __init__(
        self,
        run_id: Optional[str] = None,
        name: Optional[str] = None,
        storage: Optional[Any] = None,
        auto_save: bool = True,
    ):
        """
        Args:
            run_id: Optional run ID. If None, generates one.
            name: Optional run name (e.g. the preset or input file).
            storage: Backend implementing StorageBackend. If None, nothing persists.
            auto_save: Save to storage on context exit.
        """
        self.run_id = run_id or f"run_{uuid.uuid4().hex[:8]}"
        self.name = name
        self.storage = storage
        self.auto_save = auto_save
        self.steps: List[Dict[str, Any]] = []
        self.started_at = _now()
        self.ended_at: Optional[str] = None
        self.metadata: Dict[str, Any] = {}
        self._active = False
        self._step_counter = 0

    def __enter__(self):
        self._active = True
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self._active = False
        self.ended_at = _now()
        if exc_type is not None:
            self.metadata["error"] = f"{exc_type.__name__}: {exc_val}"
        if self.storage is not None and self.auto_save:
            self._persist()
        return False

    def get_run(self) -> Dict[str, Any]:
        """
        Current run data in canonical format:
            {"id", "name", "started_at", "ended_at", "metadata", "steps"}
        """
        return {
            "id": self.run_id,
            "name": self.name or "unnamed_run",
            "started_at": self.started_at,
            "ended_at": self.ended_at or _now(),
            "metadata": self.metadata,
            "steps": self.steps,
        }

    def save(self):
        """Save to storage before (or without) leaving the context."""
        if self.storage is None:
            raise RuntimeError("No storage backend configured. Provide a storage instance when creating RunRecorder.")
        self._persist()

    def _persist(self):
        run = self.get_run()
        metadata = dict(run["metadata"], name=run["name"], started_at=run["started_at"], ended_at=run["ended_at"])
        self.storage.save_run(run_id=self.run_id, metadata=metadata, steps=run["steps"])
        logger.debug("saved run %s with %d steps", self.run_id, len(self.steps))

    def record_step(
        self,
        step_name: str,
        step_type: Optional[str] = None,
        input_data: Optional[Dict[str, Any]] = None,
        output_data: Optional[Dict[str, Any]] = None,
        reasoning: Optional[str] = None,
        **kwargs,
    ) -> Dict[str, Any]:
        """
        Record one stage of the run.

        Args:
            step_name: e.g. "imf_1"
            step_type: e.g. "imf_extraction", "validation"
            input_data: what the stage consumed
            output_data: what it produced (counts, energies, timings)
            reasoning: human-readable note
            **kwargs: extra fields stored on the step

        Raises:
            RuntimeError: outside the ``with`` block.
        """
        if not self._active:
            raise RuntimeError("RunRecorder context is not active. Use 'with RunRecorder() as recorder:'")
        self._step_counter += 1
        stamp = _now()
        step = {
            "id": f"step_{self._step_counter}",
            "name": step_name,
            "type": step_type or "general",
            "input": input_data or {},
            "output": output_data or {},
            "reasoning": reasoning or "",
            "started_at": stamp,
            "ended_at": stamp,
            **kwargs,
        }
        self.steps.append(step)
        return step

    def update_step(self, step_id: Optional[str] = None, step_index: Optional[int] = None, **updates):
        """Update a recorded step by id or position."""
        target = None
        if step_index is not None and 0 <= step_index < len(self.steps):
            target = self.steps[step_index]
        elif step_id:
            target = next((s for s in self.steps if s.get("id") == step_id), None)
        if target is None:
            return
        target.update(updates)
        if "ended_at" not in updates:
            target["ended_at"] = _now()

    def add_metadata(self, key: str, value: Any):
        self.metadata[key] = value
