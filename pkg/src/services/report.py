import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from openpyxl import load_workbook
from openpyxl.styles import Font, PatternFill

from src.busca_subgrupos import __version__
from src.busca_subgrupos.exceptions import DataLoadError
from src.busca_subgrupos.honest import HonestRun
from src.busca_subgrupos.inference import (POOLING_RULE, NullDistribution,
                                           RighteousResult, critical_value,
                                           naive_p, righteous_p)
from src.busca_subgrupos.stump import StumpFit
from src.busca_subgrupos.utils.file_operator import FileOperator

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
REPORT_FILE = "relatorio.json"
EXCEL_FILE = "relatorio.xlsx"
QUANTILE_LEVELS = (0.1, 0.3, 0.5, 0.7, 0.9)
QUANTILES_SUFFIX = ".quantis.json"

NAIVE_WARNING = ("p ingênuo: aproximação normal sem ajuste pela seleção; "
                 "não controla a taxa de erro por família.")


@dataclass
class FitResult:
    fit: StumpFit
    righteous: Optional[RighteousResult]
    naive_p: Optional[float]

    def to_dict(self) -> Dict:
        return {
            "fit": self.fit.to_dict(),
            "righteous": self.righteous.to_dict() if self.righteous else None,
            "naive_p": self.naive_p,
        }


@dataclass
class SlotResult:
    min_node_size: int
    fits: List[FitResult] = field(default_factory=list)
    reason: Optional[str] = None

    def to_dict(self) -> Dict:
        return {
            "min_node_size": self.min_node_size,
            "fits": [f.to_dict() for f in self.fits],
            "reason": self.reason,
        }


@dataclass
class ObjectiveResult:
    objective: str
    slots: List[SlotResult]
    selected_slot: Optional[int]
    null: Optional[Dict] = None
    honest: Optional[HonestRun] = None

    @property
    def selected(self) -> Optional[FitResult]:
        if self.selected_slot is None:
            return None
        return self.slots[self.selected_slot].fits[0]

    def to_dict(self) -> Dict:
        selected = self.selected
        return {
            "objective": self.objective,
            "selected_min_node_size": (
                self.slots[self.selected_slot].min_node_size
                if self.selected_slot is not None else None),
            "selected": selected.to_dict() if selected else None,
            "tuning": [slot.to_dict() for slot in self.slots],
            "null": self.null,
            "honest": self.honest.to_dict() if self.honest else None,
            "naive_warning": NAIVE_WARNING,
        }


@dataclass
class AnalysisReport:
    config: Dict[str, Any]
    load_summary: Optional[Dict]
    global_ate: Dict
    n: int
    covariates: List[Dict]
    objectives: List[ObjectiveResult]
    generated_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat())
    truth_file: Optional[str] = None

    def to_dict(self) -> Dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "software_version": __version__,
            "generated_at": self.generated_at,
            "seed": self.config.get("seed"),
            "config": self.config,
            "load_summary": self.load_summary,
            "n": self.n,
            "global_ate": self.global_ate,
            "covariates": self.covariates,
            "objectives": [o.to_dict() for o in self.objectives],
            "truth_file": self.truth_file,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True,
                          ensure_ascii=False, allow_nan=False) + "\n"


def _jsonable(value):
    """Converte tipos numpy e troca valores não finitos por None."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def fit_results(fits: List[StumpFit],
                null: Optional[NullDistribution],
                alpha: float) -> List[FitResult]:
    """Valor-p righteous e ingênuo de cada posto contra a mesma nula."""
    results = []
    for fit in fits:
        t = fit.effect.t
        if t is None:
            results.append(FitResult(fit, None, None))
            continue
        righteous = righteous_p(t, null, alpha) if null is not None else None
        results.append(FitResult(fit, righteous, naive_p(t, fit.objective)))
    return results


def null_summary(null: NullDistribution, alpha: float) -> Dict:
    per_size = {str(size): critical_value(null.for_sizes([size]), alpha)
                for size in null.sizes}
    finite = null.values[np.isfinite(null.values)]
    return {
        "B": null.B,
        "exact": null.exact,
        "sizes": list(null.sizes),
        "seed": null.seed,
        "pooling_rule": POOLING_RULE,
        "critical_value": critical_value(null, alpha),
        "per_size_critical_values": per_size,
        "min": float(finite.min()),
        "max": float(finite.max()),
        "quantiles": {f"{q:g}": float(np.quantile(finite, q))
                      for q in QUANTILE_LEVELS},
    }


def emit_histogram(null: NullDistribution, path: str,
                   alpha: float = 0.05) -> Tuple[str, str]:
    """
    Grava a nula em duas colunas (permutação, t extremo) e, ao lado, um
    JSON com mínimo, cinco quantis igualmente espaçados, máximo e o valor
    crítico em ``alpha``.

    Returns:
        Tuple[str, str]: Caminho do CSV e do arquivo de quantis.
    """
    FileOperator.save_frame(path, null.to_frame())
    summary = null_summary(null, alpha)
    sidecar = f"{path}{QUANTILES_SUFFIX}"
    FileOperator.save_text_file(
        sidecar, json.dumps(_jsonable(summary), indent=2, sort_keys=True))
    logger.info(f"Nula com {null.B} valores gravada em '{path}'.")
    return path, sidecar


def read_histogram(path: str) -> np.ndarray:
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as e:
        raise DataLoadError(f"Não foi possível ler '{path}': {e}")
    return frame["extreme_t"].to_numpy(dtype=np.float64)


def read_quantiles(path: str) -> Dict:
    with open(f"{path}{QUANTILES_SUFFIX}", encoding="utf-8") as f:
        return json.load(f)


def write_report(report: AnalysisReport, output_dir: str) -> str:
    path = str(Path(output_dir) / REPORT_FILE)
    FileOperator.save_text_file(path, report.to_json())
    logger.info(f"Relatório gravado em '{path}'.")
    return path


def _excel_rows(report: AnalysisReport) -> pd.DataFrame:
    rows = []
    for objective in report.objectives:
        for slot in objective.slots:
            for result in slot.fits:
                effect = result.fit.effect
                righteous = result.righteous
                rows.append({
                    "Objetivo": objective.objective,
                    "Tamanho mínimo": slot.min_node_size,
                    "Posto": result.fit.rank,
                    "Regra": result.fit.rule,
                    "Tratados": effect.local.n_t,
                    "Controles": effect.local.n_c,
                    "ATE local": effect.local.ate,
                    "ATE centrado": effect.centered,
                    "t": effect.t,
                    "p ingênuo": result.naive_p,
                    "p righteous": righteous.p_value if righteous else None,
                    "Valor crítico": (righteous.critical_value
                                      if righteous else None),
                    "Rejeitado": bool(righteous and righteous.rejected),
                })
    return pd.DataFrame(rows)


def export_excel(report: AnalysisReport, output_dir: str) -> str:
    """Planilha com todos os tocos ajustados; linhas rejeitadas em destaque."""
    path = Path(output_dir) / EXCEL_FILE
    rows = _excel_rows(report)

    def write(tmp_path):
        with pd.ExcelWriter(tmp_path, engine="openpyxl") as writer:
            rows.to_excel(writer, sheet_name="Tocos", index=False)

        wb = load_workbook(tmp_path)
        ws = wb["Tocos"]
        for cell in ws[1]:
            cell.font = Font(bold=True)
        for column in ws.columns:
            width = max(len(str(c.value)) if c.value is not None else 0
                        for c in column)
            ws.column_dimensions[column[0].column_letter].width = \
                min(width + 2, 60)
        if not rows.empty:
            highlight = PatternFill(start_color="FFF2CC", end_color="FFF2CC",
                                    fill_type="solid")
            rejected_col = list(rows.columns).index("Rejeitado") + 1
            for row in range(2, ws.max_row + 1):
                if ws.cell(row=row, column=rejected_col).value:
                    for cell in ws[row]:
                        cell.fill = highlight
        wb.save(tmp_path)

    FileOperator.write_atomic(str(path), write, suffix=".xlsx")
    logger.info(f"Planilha gravada em '{path}'.")
    return str(path)
