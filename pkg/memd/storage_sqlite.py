"""
SQLite storage backend for decomposition runs.

SQLite ships with Python; no extra dependency is needed.
"""

import json
import logging
import sqlite3
from typing import Any, Dict, List, Optional

from .storage import StorageBackend, canonical_run, utc_stamp

logger = logging.getLogger(__name__)


def _json_default(value):
    # numpy scalars and arrays reach the recorder through stats dictionaries
    if hasattr(value, "tolist"):
        return value.tolist()
    return str(value)


class SQLiteStorage(StorageBackend):
    """
    File-based run storage: a runs table plus one row per recorded step.
    """

    def __init__(self, db_path: str = "memd_runs.db"):
        """
        Args:
            db_path: Path to the SQLite database file
        """
        self.db_path = db_path
        self._init_db()

    def _init_db(self):
        conn = sqlite3.connect(self.db_path)
        try:
            cursor = conn.cursor()
            cursor.execute("""
                CREATE TABLE IF NOT EXISTS runs (
                    run_id TEXT PRIMARY KEY,
                    metadata TEXT NOT NULL,
                    created_at TEXT NOT NULL
                )
            """)
            cursor.execute("""
                CREATE TABLE IF NOT EXISTS steps (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id TEXT NOT NULL,
                    step_order INTEGER NOT NULL,
                    step_data TEXT NOT NULL,
                    FOREIGN KEY (run_id) REFERENCES runs(run_id)
                )
            """)
            cursor.execute("""
                CREATE INDEX IF NOT EXISTS idx_steps_run
                ON steps(run_id, step_order)
            """)
            conn.commit()
        finally:
            conn.close()

    def save_run(self, run_id: str, metadata: Dict[str, Any], steps: List[Dict[str, Any]]):
        conn = sqlite3.connect(self.db_path)
        try:
            cursor = conn.cursor()
            created_at = metadata.get("started_at") or utc_stamp()
            cursor.execute(
                "INSERT OR REPLACE INTO runs (run_id, metadata, created_at) VALUES (?, ?, ?)",
                (run_id, json.dumps(metadata, default=_json_default), created_at),
            )
            cursor.execute("DELETE FROM steps WHERE run_id = ?", (run_id,))
            cursor.executemany(
                "INSERT INTO steps (run_id, step_order, step_data) VALUES (?, ?, ?)",
                [
                    (run_id, order, json.dumps(step, default=_json_default))
                    for order, step in enumerate(steps)
                ],
            )
            conn.commit()
        finally:
            conn.close()
        logger.debug("stored run %s (%d steps) in %s", run_id, len(steps), self.db_path)

    def get_run(self, run_id: str) -> Optional[Dict[str, Any]]:
        conn = sqlite3.connect(self.db_path)
        try:
            cursor = conn.cursor()
            cursor.execute("SELECT metadata, created_at FROM runs WHERE run_id = ?", (run_id,))
            row = cursor.fetchone()
            if not row:
                return None
            metadata_json, created_at = row
            cursor.execute(
                "SELECT step_data FROM steps WHERE run_id = ? ORDER BY step_order",
                (run_id,),
            )
            steps = [json.loads(r[0]) for r in cursor.fetchall()]
            return canonical_run(run_id, json.loads(metadata_json), steps, created_at)
        finally:
            conn.close()

    def list_runs(self, limit: int = 50) -> List[Dict[str, Any]]:
        conn = sqlite3.connect(self.db_path)
        try:
            cursor = conn.cursor()
            cursor.execute(
                "SELECT run_id, metadata, created_at FROM runs ORDER BY created_at DESC LIMIT ?",
                (limit,),
            )
            return [
                canonical_run(run_id, json.loads(metadata_json), None, created_at)
                for run_id, metadata_json, created_at in cursor.fetchall()
            ]
        finally:
            conn.close()

    def delete_run(self, run_id: str):
        conn = sqlite3.connect(self.db_path)
        try:
            cursor = conn.cursor()
            cursor.execute("DELETE FROM steps WHERE run_id = ?", (run_id,))
            cursor.execute("DELETE FROM runs WHERE run_id = ?", (run_id,))
            conn.commit()
        finally:
            conn.close()
