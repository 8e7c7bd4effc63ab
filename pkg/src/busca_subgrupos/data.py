import json
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.busca_subgrupos.exceptions import (CardinalityError, ConfigError,
                                            ConstantCovariateError,
                                            DataLoadError, EmptyArmError)
from src.busca_subgrupos.utils.file_operator import FileOperator
from src.utils.validators import (detect_separator, is_binary_indicator,
                                  is_delimited_text, missing_columns)

logger = logging.getLogger(__name__)

DEFAULT_CARDINALITY_CAP = 32
OTHER_LEVEL_LABEL = "outros"


class CovariateKind(str, Enum):
    ORDERED = "ordered"
    CATEGORICAL = "categorical"


class BinningStrategy(str, Enum):
    EQUAL_WIDTH = "equal_width"
    QUANTILE = "quantile"


@dataclass(frozen=True)
class BinningSpec:
    strategy: BinningStrategy = BinningStrategy.EQUAL_WIDTH
    bin_count: int = 10

    def __post_init__(self):
        object.__setattr__(self, "strategy", BinningStrategy(self.strategy))
        if self.bin_count < 2:
            raise ConfigError(
                f"bin_count deve ser pelo menos 2 (recebido {self.bin_count}).")


@dataclass(frozen=True, eq=False)
class Covariate:
    """
    Coluna de covariável codificada em níveis 0..k-1.

    Para covariáveis ordenadas, os códigos respeitam a ordem numérica
    original. ``level_values`` guarda o valor numérico bruto de cada nível
    quando a coluna ainda não foi binarizada (permite ``bin_dataset``).
    """
    name: str
    kind: CovariateKind
    values: np.ndarray
    level_labels: Tuple[str, ...]
    level_values: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", CovariateKind(self.kind))
        object.__setattr__(self, "level_labels",
                           tuple(str(label) for label in self.level_labels))
        if values.size and (values.min() < 0
                            or values.max() >= len(self.level_labels)):
            raise DataLoadError(
                f"Covariável '{self.name}': código de nível fora do intervalo "
                f"0..{len(self.level_labels) - 1}.")

    @property
    def n_levels(self) -> int:
        return len(self.level_labels)

    @property
    def is_ordered(self) -> bool:
        return self.kind is CovariateKind.ORDERED

    def observed_levels(self) -> np.ndarray:
        return np.unique(self.values)

    def level_counts(self) -> np.ndarray:
        return np.bincount(self.values, minlength=self.n_levels)

    def raw_values(self) -> Optional[np.ndarray]:
        if self.level_values is None:
            return None
        return self.level_values[self.values]

    def take(self, indices: np.ndarray) -> "Covariate":
        return Covariate(self.name, self.kind, self.values[indices],
                         self.level_labels, self.level_values)


@dataclass
class LoadSummary:
    path: str
    rows_read: int
    rows_dropped: int
    dropped_lines: List[int]
    n: int
    n_treated: int
    n_control: int

    def to_dict(self) -> Dict:
        return {
            "path": self.path,
            "rows_read": self.rows_read,
            "rows_dropped": self.rows_dropped,
            "dropped_lines": self.dropped_lines,
            "n": self.n,
            "n_treated": self.n_treated,
            "n_control": self.n_control,
        }


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Tabela colunar de um ensaio randomizado: resposta, indicador de
    tratamento W (0/1) e covariáveis tipadas. Imutável depois de construída,
    pode ser compartilhada entre processos de permutação.
    """
    response: np.ndarray
    treatment: np.ndarray
    covariates: Tuple[Covariate, ...]
    summary: Optional[LoadSummary] = field(default=None, compare=False)

    def __post_init__(self):
        response = np.asarray(self.response, dtype=np.float64)
        treatment = np.asarray(self.treatment)
        if response.ndim != 1 or treatment.shape != response.shape:
            raise DataLoadError(
                "Resposta e tratamento devem ter o mesmo número de unidades.")
        if not np.isin(treatment, (0, 1)).all():
            raise DataLoadError("O tratamento deve conter apenas 0 e 1.")
        treatment = treatment.astype(np.int8)
        for array in (response, treatment):
            array.setflags(write=False)
        object.__setattr__(self, "response", response)
        object.__setattr__(self, "treatment", treatment)
        object.__setattr__(self, "covariates", tuple(self.covariates))

        n = response.shape[0]
        for cov in self.covariates:
            if cov.values.shape[0] != n:
                raise DataLoadError(
                    f"Covariável '{cov.name}' tem {cov.values.shape[0]} "
                    f"valores, esperado {n}.")
        names = [cov.name for cov in self.covariates]
        duplicated = sorted({name for name in names if names.count(name) > 1})
        if duplicated:
            raise DataLoadError(f"Nomes de covariáveis duplicados: {duplicated}")
        n_treated = int(treatment.sum())
        if n_treated == 0 or n_treated == n:
            raise EmptyArmError(
                f"Braço vazio: {n_treated} tratados e {n - n_treated} "
                f"controles.")

    @property
    def n(self) -> int:
        return int(self.response.shape[0])

    @property
    def n_treated(self) -> int:
        return int(self.treatment.sum())

    @property
    def n_control(self) -> int:
        return self.n - self.n_treated

    @property
    def names(self) -> List[str]:
        return [cov.name for cov in self.covariates]

    def covariate(self, name: str) -> Covariate:
        for cov in self.covariates:
            if cov.name == name:
                return cov
        raise KeyError(f"Covariável '{name}' não existe no conjunto de dados.")

    def with_treatment(self, treatment: np.ndarray) -> "Dataset":
        return Dataset(self.response, treatment, self.covariates, self.summary)

    def with_covariates(self, covariates: Iterable[Covariate]) -> "Dataset":
        return Dataset(self.response, self.treatment, tuple(covariates),
                       self.summary)

    def with_response(self, response: np.ndarray) -> "Dataset":
        return Dataset(response, self.treatment, self.covariates, self.summary)

    def subset(self, indices: np.ndarray) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.response[indices], self.treatment[indices],
                       tuple(cov.take(indices) for cov in self.covariates))


@dataclass
class Schema:
    """
    Mapeamento de papéis das colunas do arquivo. Colunas listadas em
    ``level_labels`` já estão codificadas (0..k-1) com os rótulos dados.
    """
    response: str
    treatment: str
    covariates: List[str]
    categorical: List[str] = field(default_factory=list)
    level_labels: Dict[str, List[str]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.covariates:
            raise ConfigError("O esquema precisa de pelo menos uma covariável.")
        unknown = [c for c in self.categorical if c not in self.covariates]
        if unknown:
            raise ConfigError(
                f"Colunas categóricas fora da lista de covariáveis: {unknown}")

    @classmethod
    def from_dict(cls, raw: Dict) -> "Schema":
        try:
            return cls(response=raw["response"], treatment=raw["treatment"],
                       covariates=list(raw["covariates"]),
                       categorical=list(raw.get("categorical", [])),
                       level_labels={k: list(v) for k, v in
                                     raw.get("level_labels", {}).items()})
        except KeyError as e:
            raise ConfigError(f"Esquema sem a chave obrigatória {e}.")

    def to_dict(self) -> Dict:
        return {
            "response": self.response,
            "treatment": self.treatment,
            "covariates": list(self.covariates),
            "categorical": list(self.categorical),
            "level_labels": {k: list(v) for k, v in self.level_labels.items()},
        }


def schema_path_for(path: str) -> str:
    return f"{path}.schema.json"


def _format_number(value: float) -> str:
    return f"{value:g}"


def ordered_from_numeric(name: str, values: Sequence[float]) -> Covariate:
    """Covariável ordenada com um nível por valor distinto (ordem crescente)."""
    values = np.asarray(values, dtype=np.float64)
    levels, codes = np.unique(values, return_inverse=True)
    return Covariate(name, CovariateKind.ORDERED, codes,
                     tuple(_format_number(v) for v in levels), levels)


def categorical_from_values(name: str, values: Sequence,
                            cap: int = DEFAULT_CARDINALITY_CAP) -> Covariate:
    series = pd.Series(values)
    numeric = pd.to_numeric(series, errors="coerce")
    if not numeric.isna().any():
        codes, uniques = pd.factorize(numeric, sort=True)
        labels = tuple(_format_number(v) for v in uniques)
    else:
        codes, uniques = pd.factorize(series.astype(str), sort=True)
        labels = tuple(uniques)
    if len(labels) > cap:
        raise CardinalityError(
            f"Covariável '{name}' tem {len(labels)} níveis; o limite é {cap}.")
    return Covariate(name, CovariateKind.CATEGORICAL, codes, labels)


def load_dataset(path: str, schema: Optional[Schema] = None,
                 cardinality_cap: int = DEFAULT_CARDINALITY_CAP) -> Dataset:
    """
    Carrega um arquivo delimitado (vírgula ou tabulação, UTF-8, cabeçalho na
    primeira linha) e devolve um Dataset validado.

    Linhas com valor ausente em qualquer coluna usada são descartadas por
    inteiro e contadas no resumo de carga (``Dataset.summary``).

    Args:
        path (str): Caminho do arquivo.
        schema (Optional[Schema]): Papéis das colunas. Se None, lê o arquivo
            de esquema gravado ao lado dos dados por ``save_dataset``.
        cardinality_cap (int): Máximo de níveis de uma covariável categórica.

    Returns:
        Dataset: Dados validados, com ``summary`` preenchido.

    Raises:
        DataLoadError: Arquivo ausente ou malformado, colunas inexistentes,
            tratamento fora de {0,1} ou covariáveis duplicadas.
        EmptyArmError: Se um dos braços ficar vazio.
    """
    if not os.path.isfile(path):
        raise DataLoadError(f"Arquivo não encontrado: {path}")
    if not is_delimited_text(path):
        logger.warning(f"Extensão inesperada em '{path}'; lendo como texto "
                       f"delimitado.")
    if schema is None:
        sidecar = schema_path_for(path)
        if not os.path.isfile(sidecar):
            raise DataLoadError(
                f"Esquema não informado e '{sidecar}' não existe.")
        with open(sidecar, encoding="utf-8") as f:
            schema = Schema.from_dict(json.load(f))

    duplicated = sorted({c for c in schema.covariates
                         if schema.covariates.count(c) > 1})
    if duplicated:
        raise DataLoadError(f"Covariáveis duplicadas no esquema: {duplicated}")

    try:
        with open(path, encoding="utf-8") as f:
            header = f.readline()
        raw = pd.read_csv(path, sep=detect_separator(header), dtype=str,
                          encoding="utf-8", skipinitialspace=True)
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataLoadError(f"Arquivo malformado '{path}': {e}")

    used = [schema.response, schema.treatment, *schema.covariates]
    missing = missing_columns(raw, used)
    if missing:
        raise DataLoadError(f"Colunas ausentes em '{path}': {missing}")

    frame = raw[used]
    incomplete = frame.isna().any(axis=1)
    dropped_lines = [int(i) + 2 for i in frame.index[incomplete]]
    if dropped_lines:
        logger.warning(f"{len(dropped_lines)} linha(s) com valores ausentes "
                       f"descartadas de '{path}'.")
    frame = frame.loc[~incomplete]

    response = pd.to_numeric(frame[schema.response], errors="coerce")
    bad = response.index[response.isna() | ~np.isfinite(response)]
    if len(bad):
        raise DataLoadError(
            f"Resposta não numérica na linha {int(bad[0]) + 2}, coluna "
            f"'{schema.response}': {frame.at[bad[0], schema.response]!r}")

    if not is_binary_indicator(frame[schema.treatment]):
        treatment_num = pd.to_numeric(frame[schema.treatment], errors="coerce")
        offending = frame.index[~treatment_num.isin([0, 1])][0]
        raise DataLoadError(
            f"Tratamento fora de {{0,1}} na linha {int(offending) + 2}, "
            f"coluna '{schema.treatment}': "
            f"{frame.at[offending, schema.treatment]!r}")
    treatment = pd.to_numeric(frame[schema.treatment]).to_numpy().astype(np.int8)

    covariates = [
        _build_covariate(name, frame[name], schema, cardinality_cap)
        for name in schema.covariates
    ]

    summary = LoadSummary(path=path, rows_read=len(raw),
                          rows_dropped=len(dropped_lines),
                          dropped_lines=dropped_lines, n=len(frame),
                          n_treated=int(treatment.sum()),
                          n_control=int(len(treatment) - treatment.sum()))
    data = Dataset(response.to_numpy(dtype=np.float64), treatment,
                   tuple(covariates), summary)
    logger.info(f"Carregadas {data.n} unidades de '{path}' "
                f"({data.n_treated} tratados, {data.n_control} controles).")
    return data


def _build_covariate(name: str, column: pd.Series, schema: Schema,
                     cap: int) -> Covariate:
    kind = (CovariateKind.CATEGORICAL if name in schema.categorical
            else CovariateKind.ORDERED)
    if name in schema.level_labels:
        labels = schema.level_labels[name]
        codes = pd.to_numeric(column, errors="coerce")
        invalid = column.index[codes.isna() | (codes < 0)
                               | (codes >= len(labels)) | (codes % 1 != 0)]
        if len(invalid):
            raise DataLoadError(
                f"Código de nível inválido na linha {int(invalid[0]) + 2}, "
                f"coluna '{name}': {column.at[invalid[0]]!r}")
        return Covariate(name, kind, codes.to_numpy().astype(np.int64), labels)

    if kind is CovariateKind.CATEGORICAL:
        return categorical_from_values(name, column.to_numpy(), cap)

    numeric = pd.to_numeric(column, errors="coerce")
    invalid = column.index[numeric.isna() | ~np.isfinite(numeric)]
    if len(invalid):
        raise DataLoadError(
            f"Covariável ordenada não numérica na linha {int(invalid[0]) + 2}, "
            f"coluna '{name}': {column.at[invalid[0]]!r}. Declare-a como "
            f"categórica no esquema.")
    return ordered_from_numeric(name, numeric.to_numpy())


def save_dataset(data: Dataset, path: str, response_name: str = "y",
                 treatment_name: str = "w") -> Schema:
    """
    Grava o Dataset com as covariáveis codificadas e um arquivo de esquema
    ao lado (``<path>.schema.json``). ``load_dataset(path)`` reproduz
    exatamente códigos, rótulos e n.
    """
    frame = pd.DataFrame({response_name: data.response,
                          treatment_name: data.treatment.astype(int)})
    for cov in data.covariates:
        frame[cov.name] = cov.values
    schema = Schema(
        response=response_name, treatment=treatment_name,
        covariates=data.names,
        categorical=[c.name for c in data.covariates if not c.is_ordered],
        level_labels={c.name: list(c.level_labels) for c in data.covariates})
    FileOperator.save_frame(path, frame)
    FileOperator.save_text_file(
        schema_path_for(path),
        json.dumps(schema.to_dict(), indent=2, ensure_ascii=False))
    logger.info(f"Conjunto de dados com {data.n} unidades gravado em '{path}'.")
    return schema


def bin_numeric(values: Sequence[float], spec: BinningSpec,
                name: str = "x") -> Covariate:
    """
    Binariza uma coluna numérica em níveis ordenados.

    EqualWidth: o nível i cobre [min + i·w, min + (i+1)·w), com o último
    fechado. Quantile: limites nos quantis empíricos, limites repetidos são
    fundidos (o número de níveis pode ficar menor que ``bin_count``).

    Raises:
        ConstantCovariateError: Se a coluna tiver menos de dois valores
            distintos finitos.
    """
    values = np.asarray(values, dtype=np.float64)
    if not np.isfinite(values).all():
        raise DataLoadError(f"Coluna '{name}' contém valores não finitos.")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        raise ConstantCovariateError(
            f"Coluna '{name}' é constante ({lo:g}); nenhuma partição "
            f"admissível existe. Remova-a das covariáveis.")

    if spec.strategy is BinningStrategy.EQUAL_WIDTH:
        edges = np.linspace(lo, hi, spec.bin_count + 1)
    else:
        edges = np.unique(np.quantile(values, np.linspace(0.0, 1.0,
                                                          spec.bin_count + 1)))
    codes = np.searchsorted(edges[1:-1], values, side="right")
    n_bins = len(edges) - 1
    labels = tuple(
        f"[{_format_number(edges[i])}, {_format_number(edges[i + 1])}"
        f"{']' if i == n_bins - 1 else ')'}"
        for i in range(n_bins))
    return Covariate(name, CovariateKind.ORDERED, codes, labels)


def bin_dataset(data: Dataset, spec: BinningSpec,
                columns: Optional[Iterable[str]] = None) -> Dataset:
    """
    Aplica ``bin_numeric`` às covariáveis ordenadas que ainda guardam valores
    brutos. Sem ``columns``, binariza as que têm mais níveis que
    ``spec.bin_count``.
    """
    selected = set(columns) if columns is not None else None
    covariates = []
    for cov in data.covariates:
        raw = cov.raw_values()
        wanted = (cov.name in selected if selected is not None
                  else cov.n_levels > spec.bin_count)
        if raw is not None and cov.is_ordered and wanted:
            binned = bin_numeric(raw, spec, cov.name)
            logger.debug(f"Covariável '{cov.name}': {cov.n_levels} valores "
                         f"distintos -> {binned.n_levels} faixas.")
            covariates.append(binned)
        else:
            covariates.append(cov)
    return data.with_covariates(covariates)


def make_interaction(a: Covariate, b: Covariate,
                     cap: int = DEFAULT_CARDINALITY_CAP) -> Covariate:
    """
    Covariável categórica com um nível por par (nível de a, nível de b)
    observado. O produto cruzado substitui o produto numérico das colunas.

    Raises:
        CardinalityError: Se o número de pares observados passar de ``cap``.
    """
    if a.values.shape != b.values.shape:
        raise ConfigError(
            f"Interação entre '{a.name}' e '{b.name}' exige colunas do mesmo "
            f"conjunto de dados.")
    pairs = a.values * b.n_levels + b.values
    observed, codes = np.unique(pairs, return_inverse=True)
    if len(observed) > cap:
        raise CardinalityError(
            f"Interação '{a.name}×{b.name}' tem {len(observed)} níveis "
            f"observados; o limite é {cap}.")
    labels = tuple(f"{a.level_labels[p // b.n_levels]}×"
                   f"{b.level_labels[p % b.n_levels]}" for p in observed)
    return Covariate(f"{a.name}×{b.name}", CovariateKind.CATEGORICAL, codes,
                     labels)


def collapse_rare_levels(cov: Covariate, min_count: int,
                         other_label: str = OTHER_LEVEL_LABEL) -> Covariate:
    """
    Funde os níveis de uma covariável categórica com menos de ``min_count``
    unidades em um único nível ``other_label``.
    """
    if cov.is_ordered:
        raise ConfigError(
            f"Somente covariáveis categóricas podem ter níveis fundidos "
            f"('{cov.name}' é ordenada).")
    counts = cov.level_counts()
    observed = counts > 0
    rare = observed & (counts < min_count)
    if not rare.any():
        return cov
    kept = np.flatnonzero(observed & ~rare)
    mapping = np.full(cov.n_levels, len(kept), dtype=np.int64)
    mapping[kept] = np.arange(len(kept))
    labels = tuple(cov.level_labels[i] for i in kept) + (other_label,)
    if len(labels) < 2:
        raise ConstantCovariateError(
            f"Fundir níveis raros de '{cov.name}' deixaria um único nível.")
    logger.info(f"Covariável '{cov.name}': {int(rare.sum())} nível(is) raro(s) "
                f"fundido(s) em '{other_label}'.")
    return Covariate(cov.name, CovariateKind.CATEGORICAL, mapping[cov.values],
                     labels)


def make_indicator(cov: Covariate, levels: Iterable[str],
                   name: Optional[str] = None) -> Covariate:
    """Indicador (não/sim) de pertencer a um conjunto de rótulos de ``cov``."""
    wanted = set(str(level) for level in levels)
    unknown = wanted - set(cov.level_labels)
    if unknown:
        raise ConfigError(
            f"Rótulos inexistentes em '{cov.name}': {sorted(unknown)}")
    member = np.array([label in wanted for label in cov.level_labels])
    values = member[cov.values].astype(np.int64)
    if values.min() == values.max():
        raise ConstantCovariateError(
            f"Indicador sobre '{cov.name}' é constante nestes dados.")
    return Covariate(name or f"{cov.name}_em_{'_'.join(sorted(wanted))}",
                     CovariateKind.CATEGORICAL, values, ("não", "sim"))
