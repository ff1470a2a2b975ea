"""
Storage layer for decomposition runs.

Provides the abstract base class, the canonical run shape shared by all
backends, and an in-memory implementation.
"""

from abc import ABC, abstractmethod
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

_TIMING_KEYS = ("name", "started_at", "ended_at")


def utc_stamp() -> str:
    return datetime.now(timezone.utc).replace(tzinfo=None).isoformat() + "Z"


def canonical_run(
    run_id: str,
    metadata: Dict[str, Any],
    steps: Optional[List[Dict[str, Any]]],
    created_at: str,
) -> Dict[str, Any]:
    """
    Canonical run structure:
        {"id", "name", "started_at", "ended_at", "metadata", "steps"}
    Name and timestamps travel inside the stored metadata and are lifted out here.
    """
    return {
        "id": run_id,
        "name": metadata.get("name") or "unnamed_run",
        "started_at": metadata.get("started_at") or created_at,
        "ended_at": metadata.get("ended_at"),
        "metadata": {k: v for k, v in metadata.items() if k not in _TIMING_KEYS},
        "steps": steps or [],
    }


class StorageBackend(ABC):
    """
    Interface for run storage backends (SQLite, in-memory, ...).
    """

    @abstractmethod
    def save_run(self, run_id: str, metadata: Dict[str, Any], steps: List[Dict[str, Any]]):
        """Save a run with all its steps. Saving an existing id replaces it."""

    @abstractmethod
    def get_run(self, run_id: str) -> Optional[Dict[str, Any]]:
        """Canonical run dictionary, or None if not found."""

    @abstractmethod
    def list_runs(self, limit: int = 50) -> List[Dict[str, Any]]:
        """Most recent runs first; summaries carry an empty step list."""

    @abstractmethod
    def delete_run(self, run_id: str):
        """Delete a run and all its steps."""


class InMemoryStorage(StorageBackend):
    """
    Keeps runs in process memory. Useful for tests and one-off scripts.
    """

    def __init__(self):
        self._runs: Dict[str, Dict[str, Any]] = {}
        self._order: List[str] = []

    def save_run(self, run_id: str, metadata: Dict[str, Any], steps: List[Dict[str, Any]]):
        if run_id in self._order:
            self._order.remove(run_id)
        self._order.append(run_id)
        self._runs[run_id] = {
            "metadata": dict(metadata),
            "steps": list(steps),
            "created_at": utc_stamp(),
        }

    def get_run(self, run_id: str) -> Optional[Dict[str, Any]]:
        data = self._runs.get(run_id)
        if data is None:
            return None
        return canonical_run(run_id, data["metadata"], data["steps"], data["created_at"])

    def list_runs(self, limit: int = 50) -> List[Dict[str, Any]]:
        recent = self._order[-limit:] if limit > 0 else []
        return [
            canonical_run(run_id, self._runs[run_id]["metadata"], None, self._runs[run_id]["created_at"])
            for run_id in reversed(recent)
        ]

    def delete_run(self, run_id: str):
        self._runs.pop(run_id, None)
        if run_id in self._order:
            self._order.remove(run_id)
