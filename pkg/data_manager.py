"""
Data manager for experiment outputs.
Owns every file the experiments read or write: CSV tables, node-set text
files and the JSON run log.
"""

import csv
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from models.nodes import BOUNDARY, INTERIOR, NodeSet

logger = logging.getLogger(__name__)

RUN_LOG_ENTRIES = 100


def format_cell(value: Any) -> str:
    """Shortest round-trip text for floats; integers and strings as they are."""
    if isinstance(value, (bool, np.bool_)):
        return '1' if value else '0'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class DataManager:
    """Writes experiment results under one output directory."""

    def __init__(self, output_dir: str):
        """
        Initialize the data manager.

        Args:
            output_dir: Directory to store result files (created if missing)
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.run_log_file = self.output_dir / "run_log.json"
        self.written: List[str] = []

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        """
        Write a table with a header row.

        Args:
            name: File name inside the output directory
            header: Column names
            rows: Row values; floats are written with repr so reruns are byte-identical

        Returns:
            Path to the saved file
        """
        file_path = self.path(name)
        count = 0
        with open(file_path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                if len(row) != len(header):
                    raise ValueError(f"{name}: row has {len(row)} values for {len(header)} columns")
                writer.writerow([format_cell(v) for v in row])
                count += 1
        logger.debug("wrote %d rows to %s", count, file_path)
        self.written.append(str(file_path))
        return str(file_path)

    def read_csv(self, name: str) -> List[Dict[str, str]]:
        with open(self.path(name), 'r', newline='', encoding='utf-8') as f:
            return list(csv.DictReader(f))

    def write_node_set(self, name: str, nodes: NodeSet) -> str:
        """
        Save a node set as `x y kind nx ny` lines (normals on boundary nodes only).

        Returns:
            Path to the saved file
        """
        file_path = self.path(name)
        with open(file_path, 'w', encoding='utf-8') as f:
            f.write(f"# {len(nodes)} nodes: {nodes.n_interior} interior, {nodes.n_boundary} boundary\n")
            f.write(f"# spacing = {nodes.spacing!r}\n")
            for x, kind, n in zip(nodes.positions, nodes.kinds, nodes.normals):
                line = f"{x[0]:.17g} {x[1]:.17g} {int(kind)}"
                if kind == BOUNDARY:
                    line += f" {n[0]:.17g} {n[1]:.17g}"
                f.write(line + "\n")
        self.written.append(str(file_path))
        return str(file_path)

    def read_node_set(self, name: str, spacing: Optional[float] = None) -> NodeSet:
        """
        Load a node set written by write_node_set.

        Args:
            name: File name inside the output directory, or an absolute path
            spacing: Used when the file carries no `# spacing` line
        """
        file_path = Path(name) if Path(name).is_absolute() else self.path(name)
        positions, kinds, normals = [], [], []
        with open(file_path, 'r', encoding='utf-8') as f:
            for number, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line:
                    continue
                if line.startswith('#'):
                    body = line[1:].strip()
                    if body.startswith('spacing') and '=' in body and spacing is None:
                        spacing = float(body.split('=', 1)[1])
                    continue
                parts = line.split()
                kind = int(parts[2]) if len(parts) > 2 else -1
                if kind == INTERIOR and len(parts) == 3:
                    normals.append((0.0, 0.0))
                elif kind == BOUNDARY and len(parts) == 5:
                    normals.append((float(parts[3]), float(parts[4])))
                else:
                    raise ValueError(f"{file_path}:{number}: malformed node line")
                positions.append((float(parts[0]), float(parts[1])))
                kinds.append(kind)
        if spacing is None:
            raise ValueError(f"{file_path}: no spacing given")
        return NodeSet(np.array(positions), np.array(kinds), np.array(normals), spacing)

    def record_run(self, command: str, config: Dict[str, Any], outputs: Optional[Sequence[str]] = None):
        """Append a run entry to the run log, keeping the last 100."""
        logs = []
        if self.run_log_file.exists():
            logs = self._load_json(self.run_log_file)

        logs.append({
            'timestamp': datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%S.%fZ'),
            'command': command,
            'config': config,
            'outputs': list(self.written if outputs is None else outputs),
        })

        # Keep last 100 entries
        logs = logs[-RUN_LOG_ENTRIES:]
        self._save_json(self.run_log_file, logs)

    def load_run_log(self) -> List[Dict[str, Any]]:
        if not self.run_log_file.exists():
            return []
        return self._load_json(self.run_log_file)

    def _save_json(self, path: Path, data: Any):
        """Save data to JSON file with pretty printing."""
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, ensure_ascii=False)

    def _load_json(self, path: Path) -> Any:
        """Load data from JSON file."""
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
