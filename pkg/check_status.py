"""Quick status check of stored MEMD runs."""

import os

from memd.storage_sqlite import SQLiteStorage

print("=" * 60)
print("MEMD Run Status Check")
print("=" * 60)

try:
    storage = SQLiteStorage(os.environ.get("MEMD_DB", "memd_runs.db"))
    runs = storage.list_runs(10)

    print(f"\n[Database] Found {len(runs)} run(s):")
    for i, run in enumerate(runs, 1):
        meta = run["metadata"]
        extracted = meta.get("n_extracted", "?")
        verdict = {True: "PASS", False: "FAIL"}.get(meta.get("passed"), "-")
        print(f"  {i}. {run['id']} {run['name']} ({meta.get('command', '?')}, {extracted} IMFs, {verdict})")

    if runs:
        print("\n[API] Latest run: http://localhost:8000/api/runs/" + runs[0]["id"])
    else:
        print("\n[Info] No runs found. Run demo/quadtone_demo.py or `python -m memd validate --db memd_runs.db` first.")

except Exception as e:
    print(f"\n[Error] {e}")

print("\n" + "=" * 60)
