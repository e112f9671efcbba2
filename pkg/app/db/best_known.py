"""
Best-known spin-glass energies
JSON file keyed by instance fingerprint; ground truth for sizes the oracle cannot enumerate
"""

import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Optional, Union

from app.core.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


class BestKnownStore:
    """
    Lowest energy ever observed per instance

    Entries are only ever lowered; every update is written back to disk.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._entries: Dict[str, Dict] = {}
        self._loaded = False

    def connect(self) -> "BestKnownStore":
        """Load the file (missing file -> empty store)"""
        if self.path.exists():
            try:
                self._entries = json.loads(self.path.read_text() or "{}")
            except json.JSONDecodeError as e:
                raise ConfigurationError(f"best-known file {self.path} is not valid JSON: {e}")
            logger.info(f"✅ Loaded {len(self._entries)} best-known energies from {self.path}")
        else:
            self._entries = {}
            logger.info(f"📂 No best-known file at {self.path}; starting empty")
        self._loaded = True
        return self

    def _require_loaded(self) -> None:
        if not self._loaded:
            self.connect()

    # ========== QUERIES ==========

    def get_energy(self, fingerprint: str) -> Optional[int]:
        self._require_loaded()
        entry = self._entries.get(fingerprint)
        return None if entry is None else int(entry["energy"])

    def __len__(self) -> int:
        self._require_loaded()
        return len(self._entries)

    # ========== UPDATES ==========

    def update(self, fingerprint: str, energy: int, side: int, seed: int) -> bool:
        """Record energy if it is lower than the stored one; returns True when stored"""
        self._require_loaded()
        current = self.get_energy(fingerprint)
        if current is not None and energy >= current:
            return False

        self._entries[fingerprint] = {
            "energy": int(energy),
            "side": int(side),
            "seed": int(seed),
            "updated_at": datetime.now(timezone.utc).isoformat(),
        }
        self._save()
        if current is None:
            logger.info(f"💾 Best-known energy recorded for {fingerprint[:8]}: {energy}")
        else:
            logger.info(f"💾 Best-known energy for {fingerprint[:8]} lowered {current} -> {energy}")
        return True

    def _save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text(json.dumps(self._entries, indent=2, sort_keys=True))
        tmp.replace(self.path)
