import os
import tempfile
from pathlib import Path

from .errors import CamlensIOError


def write_bytes_atomic(path, data):
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    except OSError as exc:
        raise CamlensIOError(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        if isinstance(exc, OSError):
            raise CamlensIOError(f"cannot write {path}: {exc}") from exc
        raise


def write_text_atomic(path, text):
    write_bytes_atomic(path, text.encode("utf-8"))
