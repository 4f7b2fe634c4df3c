# flake8: noqa: E501
"""
JSON-lines storage for collision trees.

One object per line: the tree's own fields (x0, v0, collisions, T) plus the run
status and, when known, the ground-truth partner indices.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Tuple, Union

from core.collision_trees import CollisionTree
from utils.errors import TreeFormatError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TreeRecord:
    tree: CollisionTree
    status: str = "Completed"
    partners: Optional[Tuple[int, ...]] = None
    epsilon: Optional[float] = None

    def to_json(self) -> str:
        data = self.tree.to_dict()
        data["status"] = self.status
        if self.partners is not None:
            data["partners"] = [int(p) for p in self.partners]
        if self.epsilon is not None:
            data["epsilon"] = float(self.epsilon)
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "TreeRecord":
        try:
            data = json.loads(line)
        except json.JSONDecodeError as e:
            raise TreeFormatError(f"Tree line is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise TreeFormatError("Tree line must be a JSON object")
        partners = data.get("partners")
        return cls(
            tree=CollisionTree.from_dict(data),
            status=str(data.get("status", "Completed")),
            partners=tuple(int(p) for p in partners) if partners is not None else None,
            epsilon=float(data["epsilon"]) if data.get("epsilon") is not None else None,
        )


def write_trees(path: Union[str, Path], records: Iterable[TreeRecord]) -> int:
    """
    Write records as JSON lines, one per tree.

    Returns:
        Number of records written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(record.to_json())
            fh.write("\n")
            count += 1
    logger.info("Wrote %d trees to %s", count, path)
    return count


def iter_trees(path: Union[str, Path]) -> Iterator[TreeRecord]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield TreeRecord.from_json(line)
            except TreeFormatError as e:
                raise TreeFormatError(f"{path}:{lineno}: {e}") from e


def read_trees(path: Union[str, Path]) -> List[TreeRecord]:
    return list(iter_trees(path))
