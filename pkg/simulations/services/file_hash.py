import hashlib
import json
import os
from contextlib import contextmanager
from typing import Dict, List, Optional

from filelock import FileLock, Timeout

from simulations.exceptions import OutputError, RunDirectoryBusyError

MANIFEST_NAME = "manifest.json"
FAILURE_NAME = "failure.json"


def get_file_hash(path) -> str:
    sha256_hash = hashlib.sha256()

    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            sha256_hash.update(chunk)

    return sha256_hash.hexdigest()


def get_lock_path(directory, purpose: str = "manifest") -> str:
    # locks live next to the run directory so they never show up in the file index
    directory = os.path.abspath(directory)
    parent, name = os.path.split(directory)
    return os.path.join(parent, f".{name}.{purpose}.lock")


@contextmanager
def run_directory_lock(directory):
    """Hold the run directory for one run; a second run into it fails fast."""
    lock = FileLock(get_lock_path(directory, "run"))
    try:
        lock.acquire(timeout=0)
    except Timeout as e:
        raise RunDirectoryBusyError(f"another run is writing to {directory}") from e
    try:
        yield
    finally:
        lock.release()


def index_directory(directory, exclude=(MANIFEST_NAME,)) -> List[Dict]:
    entries = []
    for root, _, files in os.walk(directory):
        for file_name in files:
            full_path = os.path.join(root, file_name)
            relative = os.path.relpath(full_path, directory).replace(os.sep, "/")
            if relative in exclude:
                continue
            entries.append({
                "path": relative,
                "sha256": get_file_hash(full_path),
                "bytes": os.path.getsize(full_path),
            })
    return sorted(entries, key=lambda entry: entry["path"])


def write_json_atomic(path, payload: dict):
    temp_file_path = f"{path}.tmp"
    try:
        with open(temp_file_path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(temp_file_path, path)
    except OSError as e:
        if os.path.exists(temp_file_path):
            os.remove(temp_file_path)
        raise OutputError(f"cannot write {path}: {e}") from e


def write_manifest(directory, manifest: dict) -> List[Dict]:
    """Index every file under ``directory`` and write the manifest atomically under a lock.

    Returns the file index that went into the manifest.
    """
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    with FileLock(get_lock_path(directory)):
        manifest = dict(manifest)
        manifest["files"] = index_directory(directory)
        write_json_atomic(manifest_path, manifest)
    return manifest["files"]


def load_manifest(directory) -> Optional[dict]:
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    if not os.path.exists(manifest_path):
        return None
    with FileLock(get_lock_path(directory)):
        try:
            with open(manifest_path, "r", encoding="utf-8") as f:
                return json.load(f)
        except json.JSONDecodeError as e:
            raise OutputError(f"manifest {manifest_path} is not valid JSON: {e}") from e


def read_manifest_file(path) -> dict:
    """Load a manifest given either its path or its run directory."""
    if os.path.isdir(path):
        manifest = load_manifest(path)
        if manifest is None:
            raise OutputError(f"no {MANIFEST_NAME} in {path}")
        return manifest
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise OutputError(f"cannot read manifest {path}: {e}") from e


def verify_manifest(directory) -> List[str]:
    """Problems found when re-checking the manifest against the directory; empty when clean."""
    manifest = load_manifest(directory)
    if manifest is None:
        return [f"{MANIFEST_NAME} is missing"]

    problems = []
    listed = {entry["path"]: entry for entry in manifest.get("files", [])}
    present = {entry["path"]: entry for entry in index_directory(directory)}
    for path, entry in listed.items():
        if path not in present:
            problems.append(f"{path}: listed but missing")
        elif present[path]["sha256"] != entry["sha256"]:
            problems.append(f"{path}: checksum mismatch")
    for path in present:
        if path not in listed:
            problems.append(f"{path}: not indexed")
    return problems


def clear_previous_outputs(directory):
    """Remove the files a previous run in ``directory`` listed, plus its manifest and failure dump."""
    manifest = load_manifest(directory)
    stale = [entry["path"] for entry in manifest.get("files", [])] if manifest else []
    stale += [MANIFEST_NAME, FAILURE_NAME]
    for relative in stale:
        path = os.path.join(directory, relative)
        if os.path.isfile(path):
            os.remove(path)
