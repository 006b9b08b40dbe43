"""
Запись результатов прогона: CSV и JSON в UTF-8 с переводом строки LF.

Числа с плавающей точкой в CSV пишутся в экспоненциальной форме с 17 значащими цифрами,
в JSON - кратчайшим представлением, восстанавливающим значение без потерь.
"""

import csv
import json
from pathlib import Path
from typing import Any, Iterable, List, Sequence, Union

from app.core.logging import setup_logger
from app.models.report import RunManifest, RunSummary, SolveReport, SweepRow

TRAJECTORY_FILE = "trajectory.csv"
SCHEDULE_FILE = "schedule.csv"
ALLOCATION_FILE = "allocation.json"
ENERGY_FILE = "energy.json"
CONVERGENCE_FILE = "convergence.csv"
SUMMARY_FILE = "summary.json"
MANIFEST_FILE = "manifest.json"
SWEEP_FILE = "sweep.csv"

BUNDLE_FILES = (
    TRAJECTORY_FILE,
    SCHEDULE_FILE,
    ALLOCATION_FILE,
    ENERGY_FILE,
    CONVERGENCE_FILE,
    SUMMARY_FILE,
    MANIFEST_FILE,
)


def format_float(value: float) -> str:
    return f"{float(value):.17e}"


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    return str(value)


class BundleRepository:
    """Каталог результатов одного прогона или одного sweep"""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)
        self.logger = setup_logger("app.repositories.bundle")

    def _write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        return path

    def _write_json(self, name: str, payload: Any) -> Path:
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(payload, indent=2, sort_keys=True, allow_nan=True))
            f.write("\n")
        return path

    def write_run(self, report: SolveReport, summary: RunSummary, manifest: RunManifest) -> List[Path]:
        """
        Пишет все семь файлов прогона

        Returns:
            Пути записанных файлов в порядке BUNDLE_FILES
        """
        self.out_dir.mkdir(parents=True, exist_ok=True)
        traj = report.trajectory
        N = traj.N

        def trajectory_rows():
            for n in range(N + 1):
                # v и a определены для слотов 1..N; для последней точки пишутся нули
                v = traj.v[n] if n < N else (0.0, 0.0)
                a = traj.a[n] if n < N else (0.0, 0.0)
                yield [n + 1, float(traj.q[n, 0]), float(traj.q[n, 1]), float(v[0]), float(v[1]), float(a[0]), float(a[1])]

        users = report.schedule.slot_users()
        alloc = report.allocation

        def convergence_rows():
            for i, ee in enumerate(report.ee_trace):
                if i == 0:
                    lam = report.lambda_traces[0][0] if report.lambda_traces else 0.0
                else:
                    lam = report.lambda_traces[i - 1][-1]
                yield [i, float(ee), float(lam)]

        paths = [
            self._write_csv(TRAJECTORY_FILE, ["n", "x", "y", "vx", "vy", "ax", "ay"], trajectory_rows()),
            self._write_csv(SCHEDULE_FILE, ["n", "k"], ([n + 1, int(k) + 1] for n, k in enumerate(users))),
            self._write_json(
                ALLOCATION_FILE,
                {
                    "l_o": [float(x) for x in alloc.l_o],
                    "l_l": [float(x) for x in alloc.l_l],
                    "f_o": [float(x) for x in alloc.f_o],
                },
            ),
            self._write_json(ENERGY_FILE, report.energy.as_dict()),
            self._write_csv(CONVERGENCE_FILE, ["outer_iter", "ee", "lambda_final"], convergence_rows()),
            self._write_json(SUMMARY_FILE, summary.model_dump()),
            self._write_json(MANIFEST_FILE, manifest.model_dump(exclude_none=True)),
        ]
        self.logger.info(f"Run bundle written to {self.out_dir}")
        return paths

    def write_sweep(self, rows: Sequence[SweepRow]) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        header = ["algorithm", "T", "ee", "total_bits", "total_energy", "iters", "status"]
        path = self._write_csv(
            SWEEP_FILE,
            header,
            ([row.algorithm, row.T, row.ee, row.total_bits, row.total_energy, row.iters, row.status] for row in rows),
        )
        self.logger.info(f"Sweep table with {len(rows)} rows written to {path}")
        return path

    def point_dir(self, algorithm: str, T: float) -> Path:
        return self.out_dir / f"{algorithm}_T{T:g}"

    def read_json(self, name: str) -> Any:
        with open(self.out_dir / name, encoding="utf-8") as f:
            return json.load(f)

    def read_csv(self, name: str) -> List[dict]:
        with open(self.out_dir / name, encoding="utf-8", newline="") as f:
            return list(csv.DictReader(f))
