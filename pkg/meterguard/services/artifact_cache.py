"""
Artifact cache for pipeline stages.

Every stage writes its outputs into one directory under the workdir named
``<stage>-<config hash>``. The directory is complete when its ``_meta.json``
sidecar exists and records the same key; stage outputs are built in a
temporary sibling and renamed into place, so an interrupted run never leaves
a directory that looks complete.

Usage:
    cache = ArtifactCache(Path("workdir"))
    out_dir = cache.get_or_build("train", cfg.config_hash("train"), build_fn, meta=cfg.model_dump())
"""
import json
import logging
import os
import shutil
import tempfile
from pathlib import Path
from typing import Any, Callable, Optional

from ..utils.common import write_json
from ..utils.errors import log_and_return_error

logger = logging.getLogger(__name__)

META_FILE = "_meta.json"


class ArtifactCache:
    """Content-addressed stage outputs with hit/miss statistics"""

    def __init__(self, workdir: Path):
        """
        Initialize cache

        Args:
            workdir: Root directory for all stage outputs
        """
        self.workdir = Path(workdir)
        self.stats = {
            "hits": 0,
            "misses": 0,
            "writes": 0,
        }

    def path_for(self, stage: str, key: str) -> Path:
        return self.workdir / f"{stage}-{key}"

    def read_meta(self, stage: str, key: str) -> Optional[dict]:
        meta_path = self.path_for(stage, key) / META_FILE
        if not meta_path.exists():
            return None
        try:
            return json.loads(meta_path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            # unreadable sidecar counts as a miss
            return log_and_return_error(e, context=f"reading {meta_path}", default_return=None)

    def lookup(self, stage: str, key: str) -> Optional[Path]:
        """
        Find a complete stage output

        Args:
            stage: Stage name (prepare-data, train, ...)
            key: Config hash of the stage

        Returns:
            Output directory, or None if missing or incomplete
        """
        meta = self.read_meta(stage, key)
        if meta is not None and meta.get("key") == key and meta.get("stage") == stage:
            self.stats["hits"] += 1
            logger.debug(f"✅ Cache HIT: {stage}:{key}")
            return self.path_for(stage, key)

        self.stats["misses"] += 1
        logger.debug(f"❌ Cache MISS: {stage}:{key}")
        return None

    def store(
        self,
        stage: str,
        key: str,
        writer: Callable[[Path], Optional[dict]],
        meta: Optional[dict] = None,
    ) -> Path:
        """
        Build a stage output and move it into place

        Args:
            stage: Stage name
            key: Config hash of the stage
            writer: Fills the given directory; may return extra metadata
            meta: Config and seed recorded in the sidecar

        Returns:
            Final output directory
        """
        self.workdir.mkdir(parents=True, exist_ok=True)
        target = self.path_for(stage, key)
        tmp = Path(tempfile.mkdtemp(dir=self.workdir, prefix=f".{stage}-{key}."))
        try:
            extra = writer(tmp) or {}
            write_json(tmp / META_FILE, {**(meta or {}), **extra, "stage": stage, "key": key})
            if target.exists():
                shutil.rmtree(target)
            os.replace(tmp, target)
        finally:
            if tmp.exists():
                shutil.rmtree(tmp, ignore_errors=True)

        self.stats["writes"] += 1
        logger.debug(f"➕ Cache STORED: {stage}:{key}")
        return target

    def get_or_build(
        self,
        stage: str,
        key: str,
        build: Callable[[Path], Optional[dict]],
        meta: Optional[dict] = None,
        force: bool = False,
    ) -> Path:
        """
        Return the cached output, building it on a miss (or always with force)
        """
        if not force:
            hit = self.lookup(stage, key)
            if hit is not None:
                logger.info(f"♻️ {stage}: up to date ({key})")
                return hit
        logger.info(f"🔨 {stage}: building ({key})")
        return self.store(stage, key, build, meta)

    def get_stats(self) -> dict[str, Any]:
        total = self.stats["hits"] + self.stats["misses"]
        hit_rate = (self.stats["hits"] / total * 100) if total > 0 else 0
        return {**self.stats, "total_requests": total, "hit_rate_percent": round(hit_rate, 2)}
