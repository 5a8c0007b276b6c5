"""Line-delimited structured event traces for debugging and determinism
checks. One JSON object per line; the header records the run configuration
digest and the digest/tag algorithm identifiers.
"""

from __future__ import annotations

import json
from typing import List, Optional

from .envelope import DIGEST_ALG, ENCODING_VERSION, TAG_ALG


class TraceRecorder:
    """Collects trace records into memory, a file, or both.

    With neither a path nor capture enabled the recorder is inert and the
    simulation skips record construction entirely (`enabled` is False).
    """

    def __init__(self, path: Optional[str] = None, capture: bool = False):
        self._fh = open(path, "w", encoding="ascii") if path else None
        self.capture = capture
        self.records: List[dict] = []
        self.enabled = capture or self._fh is not None

    def header(self, **fields) -> None:
        self.emit("header", encoding=ENCODING_VERSION, digest_alg=DIGEST_ALG,
                  tag_alg=TAG_ALG, **fields)

    def emit(self, kind: str, **fields) -> None:
        if not self.enabled:
            return
        record = {"event": kind, **fields}
        if self.capture:
            self.records.append(record)
        if self._fh is not None:
            self._fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
            self._fh.write("\n")

    def lines(self) -> List[str]:
        return [json.dumps(r, sort_keys=True, separators=(",", ":")) for r in self.records]

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None
