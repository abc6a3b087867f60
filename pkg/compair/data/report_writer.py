"""
Thread-sicherer, atomarer Writer für Reports, Pläne und Sweep-CSVs
"""

import json
import logging
import os
import threading
from contextlib import contextmanager
from typing import Any, Dict, Iterable, List, Optional, Sequence

from compair.engine.report import REPORT_FIELDS, reports_to_csv

logger = logging.getLogger(__name__)


class ReportWriter:
    """Schreibt in ein Ausgabeverzeichnis; jede Datei über temp + os.replace"""

    def __init__(self, out_dir: Optional[str] = None):
        if out_dir is None:
            out_dir = os.environ.get('COMPAIR_OUT_DIR', os.path.join(os.getcwd(), 'out'))
        self.out_dir = out_dir
        self.locks: Dict[str, threading.RLock] = {}
        self._guard = threading.Lock()
        os.makedirs(self.out_dir, exist_ok=True)

    def _get_lock(self, filename: str) -> threading.RLock:
        with self._guard:
            if filename not in self.locks:
                self.locks[filename] = threading.RLock()
            return self.locks[filename]

    def path(self, filename: str) -> str:
        return os.path.join(self.out_dir, filename)

    @contextmanager
    def _file_lock(self, filename: str):
        lock = self._get_lock(filename)
        lock.acquire()
        try:
            yield
        finally:
            lock.release()

    def _atomic_write(self, filename: str, text: str) -> str:
        filepath = self.path(filename)
        with self._file_lock(filename):
            temp_filepath = f"{filepath}.tmp"
            try:
                with open(temp_filepath, 'w', encoding='utf-8') as f:
                    f.write(text)
                os.replace(temp_filepath, filepath)
            except Exception:
                if os.path.exists(temp_filepath):
                    os.remove(temp_filepath)
                raise
        logger.debug("geschrieben: %s", filepath)
        return filepath

    def write_json(self, filename: str, data: Any) -> str:
        return self._atomic_write(filename, json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + '\n')

    def read_json(self, filename: str) -> Any:
        with self._file_lock(filename):
            with open(self.path(filename), 'r', encoding='utf-8') as f:
                return json.load(f)

    def write_csv(self, filename: str, rows: Iterable[Dict[str, Any]],
                  fields: Sequence[str] = REPORT_FIELDS) -> str:
        return self._atomic_write(filename, reports_to_csv(list(rows), fields))

    def write_report(self, report: Dict[str, Any], stem: str = 'report') -> List[str]:
        """report.json + report.csv"""
        return [self.write_json(f'{stem}.json', report), self.write_csv(f'{stem}.csv', [report])]
