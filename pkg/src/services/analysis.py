import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from src.busca_subgrupos.data import (Dataset, bin_dataset,
                                      collapse_rare_levels, load_dataset,
                                      make_indicator, make_interaction,
                                      save_dataset)
from src.busca_subgrupos.effects import global_ate
from src.busca_subgrupos.exceptions import (DegenerateDataError,
                                            DegenerateSearchError,
                                            EmptySplitUniverseError, StageError)
from src.busca_subgrupos.honest import HonestCentering, honest_fit
from src.busca_subgrupos.inference import build_null, exhaustive_null
from src.busca_subgrupos.splits import enumerate_splits
from src.busca_subgrupos.stump import (Centering, Criterion, SearchObjective,
                                       TuningSlot, extreme_slot, fit_sequence)
from src.busca_subgrupos.synthetic import TruthRecord, generate
from src.busca_subgrupos.utils.file_operator import FileOperator
from src.services.config import RunConfig
from src.services.report import (AnalysisReport, ObjectiveResult, SlotResult,
                                 emit_histogram, export_excel, fit_results,
                                 null_summary, write_report)

logger = logging.getLogger(__name__)

TRUTH_FILE = "verdade.csv"
SYNTHETIC_FILE = "dados_sinteticos.csv"


@contextmanager
def stage(name: str):
    """Embrulha qualquer erro da etapa em StageError com o nome da etapa."""
    logger.info(f"Etapa '{name}' iniciada.")
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        logger.error(f"Etapa '{name}' falhou: {e}")
        raise StageError(name, e) from e


class AnalysisService:
    """
    Executa a receita completa: carga (ou geração), binarização,
    interações, ajuste por objetivo e tamanho mínimo, nula de permutação,
    caminho honesto opcional e gravação do relatório.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.output_dir = Path(config.output_dir)
        self.truth: Optional[TruthRecord] = None

    def load(self, persist: bool = True) -> Dataset:
        config = self.config
        if config.data_path is not None:
            return load_dataset(config.data_path, config.data_schema,
                                config.cardinality_cap)
        data, self.truth = generate(config.generator_spec, config.seed)
        if not persist:
            return data
        FileOperator.save_frame(str(self.output_dir / TRUTH_FILE),
                                self.truth.to_frame())
        save_dataset(data, str(self.output_dir / SYNTHETIC_FILE))
        return data

    def prepare(self, data: Dataset) -> Dataset:
        config = self.config
        data = bin_dataset(data, config.binning, config.bin_columns)
        if config.collapse_rare:
            data = data.with_covariates(
                cov if cov.is_ordered
                else collapse_rare_levels(cov, config.collapse_rare)
                for cov in data.covariates)
        return data

    def add_derived(self, data: Dataset) -> Dataset:
        derived = []
        for indicator in self.config.indicators:
            derived.append(make_indicator(
                data.covariate(indicator["covariate"]), indicator["levels"],
                indicator.get("name")))
        for a, b in self.config.interactions:
            derived.append(make_interaction(
                data.covariate(a), data.covariate(b),
                self.config.cardinality_cap))
        if derived:
            logger.info(f"{len(derived)} covariável(is) derivada(s): "
                        f"{[cov.name for cov in derived]}")
            data = data.with_covariates(list(data.covariates) + derived)
        return data

    def fit(self, data: Dataset,
            objective: SearchObjective) -> Tuple[List[List], List[TuningSlot]]:
        config = self.config
        sequences, slots = [], []
        for size in config.sizes:
            try:
                fits = fit_sequence(data, objective, size, config.depth,
                                    centering=Centering(config.centering),
                                    criterion=Criterion(config.criterion))
                sequences.append(fits)
                slots.append(TuningSlot(size, fits[0]))
            except DegenerateDataError as e:
                logger.warning(f"Tamanho mínimo {size} sem ajuste: {e.message}")
                sequences.append([])
                slots.append(TuningSlot(size, reason=e.message))
        if all(slot.is_empty for slot in slots):
            raise DegenerateSearchError(
                f"Nenhum tamanho mínimo produziu ajuste "
                f"({[slot.reason for slot in slots]}).")
        return sequences, slots

    def null(self, data: Dataset, objective: SearchObjective):
        config = self.config
        centering = Centering(config.centering)
        if config.null_method == "exhaustive":
            return exhaustive_null(data, objective, config.sizes,
                                   config.exhaustive_cap, centering)
        return build_null(data, objective, config.sizes, config.B,
                          config.seed, config.workers, centering)

    def run_objective(self, data: Dataset,
                      objective: SearchObjective) -> ObjectiveResult:
        config = self.config
        with stage("ajuste"):
            sequences, slots = self.fit(data, objective)
            selected = extreme_slot(slots, objective)

        with stage("permutacao"):
            null = self.null(data, objective)

        honest = None
        if config.honest_fraction is not None:
            with stage("honesta"):
                honest = honest_fit(
                    data, objective, config.sizes, config.honest_fraction,
                    config.seed, HonestCentering(config.honest_centering),
                    centering=Centering(config.centering),
                    criterion=Criterion(config.criterion))

        with stage("relatorio"):
            histogram = self.output_dir / f"nula_{objective.value}.csv"
            _, sidecar = emit_histogram(null, str(histogram), config.alpha)
            summary = null_summary(null, config.alpha)
            summary["histogram_file"] = histogram.name
            summary["quantiles_file"] = Path(sidecar).name
            result = ObjectiveResult(
                objective=objective.value,
                slots=[SlotResult(slot.min_node_size,
                                  fit_results(fits, null, config.alpha),
                                  slot.reason)
                       for slot, fits in zip(slots, sequences)],
                selected_slot=selected, null=summary, honest=honest)

        chosen = result.selected
        if chosen is not None and chosen.righteous is not None:
            logger.info(
                f"{objective.value}-ATE: '{chosen.fit.rule}', t "
                f"{chosen.fit.effect.t:.3f}, p ingênuo {chosen.naive_p:.4f}, "
                f"p righteous {chosen.righteous.p_value:.4f} (valor crítico "
                f"{chosen.righteous.critical_value:.3f}).")
        return result

    def check(self) -> Dict:
        """
        Ensaio sem permutações nem arquivos: carrega, prepara e conta as
        partições admissíveis de cada tamanho mínimo.
        """
        with stage("carga"):
            data = self.load(persist=False)
        with stage("binarizacao"):
            data = self.prepare(data)
        with stage("interacoes"):
            data = self.add_derived(data)
        counts = {}
        with stage("ajuste"):
            for size in self.config.sizes:
                try:
                    counts[size] = len(enumerate_splits(data, size))
                except EmptySplitUniverseError:
                    counts[size] = 0
            if not any(counts.values()):
                raise EmptySplitUniverseError(
                    f"Nenhum tamanho mínimo admite partição: {counts}")
        return {"n": data.n, "n_treated": data.n_treated,
                "covariates": data.names, "splits_per_size": counts}

    def run(self) -> Tuple[AnalysisReport, str]:
        """
        Returns:
            Tuple[AnalysisReport, str]: O relatório e o caminho do JSON.

        Raises:
            StageError: Qualquer falha, com o nome da etapa e a causa.
        """
        config = self.config
        with stage("carga"):
            data = self.load()
        with stage("binarizacao"):
            data = self.prepare(data)
        with stage("interacoes"):
            data = self.add_derived(data)
            overall = global_ate(data)
        logger.info(f"{data.n} unidades ({data.n_treated} tratados), "
                    f"{len(data.covariates)} covariáveis, ATE global "
                    f"{overall.ate:.4f}.")

        objectives = [self.run_objective(data, objective)
                      for objective in config.search_objectives]

        with stage("relatorio"):
            report = AnalysisReport(
                config=config.to_dict(),
                load_summary=data.summary.to_dict() if data.summary else None,
                global_ate=overall.to_dict(),
                n=data.n,
                covariates=[{"name": cov.name, "kind": cov.kind.value,
                             "levels": list(cov.level_labels)}
                            for cov in data.covariates],
                objectives=objectives,
                truth_file=TRUTH_FILE if self.truth is not None else None)
            path = write_report(report, str(self.output_dir))
            if config.excel:
                export_excel(report, str(self.output_dir))
        return report, path


def unwrap(error: Exception) -> Exception:
    """Causa original de um StageError (ou o próprio erro)."""
    while isinstance(error, StageError) and isinstance(error.cause,
                                                       Exception):
        error = error.cause
    return error
