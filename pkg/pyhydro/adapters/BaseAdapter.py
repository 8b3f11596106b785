import json
import logging
from pathlib import Path

from ..exceptions import BundleLoadError

log = logging.getLogger(__name__)


class Adapter:
    """Base class for all on-disk formats."""

    def __init__(self, path):
        self.path = Path(path)

    def read(self):
        """Reads the object stored at ``path``."""
        # Re-defined in all sub-classes
        raise NotImplementedError

    def write(self, obj):
        """Writes ``obj`` to ``path``."""
        # Re-defined in all sub-classes
        raise NotImplementedError

    def require(self, filename):
        """
        Resolves a file inside the adapter directory.

        Raises:
            BundleLoadError: If the file does not exist.
        """
        path = self.path / filename
        if not path.is_file():
            raise BundleLoadError(f"Missing file {path}")
        return path

    def read_json(self, filename):
        path = self.require(filename)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return json.load(fh)
        except json.JSONDecodeError as e:
            raise BundleLoadError(f"Malformed JSON in {path}: {e}") from e

    def write_json(self, filename, data):
        self.path.mkdir(parents=True, exist_ok=True)
        path = self.path / filename
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path

    def size_bytes(self):
        """Total size of the files under ``path``."""
        if self.path.is_file():
            return self.path.stat().st_size
        return sum(p.stat().st_size for p in self.path.rglob("*") if p.is_file())


def write_report(path, data):
    """Writes a JSON report, creating the parent directory if needed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info(f"Wrote report {path}")
    return path
