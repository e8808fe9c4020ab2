"""Encrypted API-key storage, kept outside any project directory.

Keys live in the user config directory (override with REFSCREEN_KEYSTORE_DIR),
encrypted at rest with a locally generated Fernet secret. Nothing here ever
writes into a project store, so grepping a project directory for key material
must come up empty.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from cryptography.fernet import Fernet

ENV_VAR = "REFSCREEN_KEYSTORE_DIR"

_SECRET_FILE = "keystore.secret"
_KEYS_FILE = "keys.enc"


class KeystoreError(Exception):
    pass


def keystore_dir(directory: str | Path | None = None) -> Path:
    if directory is not None:
        return Path(directory)
    env = os.environ.get(ENV_VAR)
    if env:
        return Path(env)
    return Path.home() / ".config" / "refscreen"


def _fernet(base: Path) -> Fernet:
    base.mkdir(parents=True, exist_ok=True)
    secret_path = base / _SECRET_FILE
    if not secret_path.exists():
        secret = Fernet.generate_key()
        secret_path.touch(mode=0o600)
        secret_path.write_bytes(secret)
        os.chmod(secret_path, 0o600)
    return Fernet(secret_path.read_bytes())


def _load_all(base: Path, fernet: Fernet) -> dict[str, str]:
    path = base / _KEYS_FILE
    if not path.exists():
        return {}
    return json.loads(fernet.decrypt(path.read_bytes()).decode("utf-8"))


def store_key(name: str, value: str, directory: str | Path | None = None) -> None:
    if not name:
        raise KeystoreError("key name must be non-empty")
    base = keystore_dir(directory)
    fernet = _fernet(base)
    keys = _load_all(base, fernet)
    keys[name] = value
    payload = fernet.encrypt(json.dumps(keys).encode("utf-8"))
    path = base / _KEYS_FILE
    path.touch(mode=0o600, exist_ok=True)
    path.write_bytes(payload)
    os.chmod(path, 0o600)


def load_key(name: str, directory: str | Path | None = None) -> str:
    base = keystore_dir(directory)
    keys = _load_all(base, _fernet(base))
    if name not in keys:
        raise KeystoreError(f"no stored key named {name!r}")
    return keys[name]
