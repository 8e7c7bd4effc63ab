import itertools
import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Iterator, List, Tuple, Union

import numpy as np

from src.busca_subgrupos.data import Covariate, Dataset
from src.busca_subgrupos.exceptions import ConfigError, EmptySplitUniverseError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ThresholdRule:
    """Filho esquerdo: códigos <= level (covariáveis ordenadas)."""
    level: int

    def left_levels(self, n_levels: int) -> np.ndarray:
        return np.arange(n_levels) <= self.level

    def describe(self, cov: Covariate) -> str:
        return f"{cov.name} <= {cov.level_labels[self.level]}"

    def describe_complement(self, cov: Covariate) -> str:
        return f"{cov.name} > {cov.level_labels[self.level]}"

    def to_dict(self) -> Dict:
        return {"type": "threshold", "level": self.level}


@dataclass(frozen=True)
class SubsetRule:
    """Filho esquerdo: códigos em ``levels`` (covariáveis categóricas)."""
    levels: FrozenSet[int]

    def left_levels(self, n_levels: int) -> np.ndarray:
        mask = np.zeros(n_levels, dtype=bool)
        mask[sorted(self.levels)] = True
        return mask

    def describe(self, cov: Covariate) -> str:
        return _describe_levels(cov, sorted(self.levels))

    def describe_complement(self, cov: Covariate) -> str:
        rest = [int(level) for level in cov.observed_levels()
                if int(level) not in self.levels]
        return _describe_levels(cov, rest)

    def to_dict(self) -> Dict:
        return {"type": "subset", "levels": sorted(self.levels)}


SplitRule = Union[ThresholdRule, SubsetRule]


def _describe_levels(cov: Covariate, levels) -> str:
    labels = ",".join(cov.level_labels[i] for i in levels)
    return f"{cov.name} in {{{labels}}}"


@dataclass(frozen=True)
class Split:
    covariate: str
    rule: SplitRule
    n_left: int
    n_right: int
    description: str
    complement_description: str = ""

    def left_mask(self, data: Dataset) -> np.ndarray:
        cov = data.covariate(self.covariate)
        return self.rule.left_levels(cov.n_levels)[cov.values]

    def to_dict(self) -> Dict:
        return {
            "covariate": self.covariate,
            "rule": self.rule.to_dict(),
            "n_left": self.n_left,
            "n_right": self.n_right,
            "description": self.description,
            "complement_description": self.complement_description,
        }


@dataclass(frozen=True)
class SplitUniverse:
    """
    Todas as partições admissíveis de um Dataset para um tamanho mínimo de
    nó, na ordem (covariável, regra).
    """
    splits: Tuple[Split, ...]
    min_node_size: int

    def __len__(self) -> int:
        return len(self.splits)

    def __iter__(self) -> Iterator[Split]:
        return iter(self.splits)

    def __getitem__(self, index: int) -> Split:
        return self.splits[index]

    def covariates(self) -> List[str]:
        return list(dict.fromkeys(s.covariate for s in self.splits))


def _threshold_rules(cov: Covariate) -> Iterator[SplitRule]:
    observed = cov.observed_levels()
    for level in observed[:-1]:
        yield ThresholdRule(int(level))


def _subset_rules(cov: Covariate) -> Iterator[SplitRule]:
    # forma canônica: o bloco que contém o menor código observado é o esquerdo
    observed = [int(level) for level in cov.observed_levels()]
    anchor, rest = observed[0], observed[1:]
    for how_many in range(len(rest)):
        for chosen in itertools.combinations(rest, how_many):
            yield SubsetRule(frozenset((anchor, *chosen)))


def candidate_rules(cov: Covariate) -> Iterator[SplitRule]:
    if cov.is_ordered:
        return _threshold_rules(cov)
    return _subset_rules(cov)


def enumerate_splits(data: Dataset, min_node_size: int,
                     excluded: Iterable[str] = ()) -> SplitUniverse:
    """
    Enumera todas as partições admissíveis de ``data``.

    Covariáveis ordenadas com k níveis observados geram k-1 limiares;
    categóricas geram uma partição por divisão não ordenada em dois blocos
    (2^(k-1)-1). Partições com algum filho menor que ``min_node_size`` são
    descartadas.

    Args:
        data (Dataset): Dados.
        min_node_size (int): Menor número de unidades permitido em um filho.
        excluded (Iterable[str]): Covariáveis ignoradas.

    Returns:
        SplitUniverse: Partições admissíveis em ordem determinística.

    Raises:
        ConfigError: Se ``min_node_size`` < 1.
        EmptySplitUniverseError: Se nenhuma partição for admissível.
    """
    if min_node_size < 1:
        raise ConfigError(
            f"min_node_size deve ser positivo (recebido {min_node_size}).")
    excluded = set(excluded)
    splits = []
    for cov in data.covariates:
        if cov.name in excluded:
            continue
        counts = cov.level_counts()
        for rule in candidate_rules(cov):
            n_left = int(counts[rule.left_levels(cov.n_levels)].sum())
            n_right = data.n - n_left
            if min(n_left, n_right) >= min_node_size:
                splits.append(Split(cov.name, rule, n_left, n_right,
                                    rule.describe(cov),
                                    rule.describe_complement(cov)))
    if not splits:
        raise EmptySplitUniverseError(
            f"Nenhuma partição satisfaz o tamanho mínimo {min_node_size} "
            f"(n={data.n}, covariáveis excluídas: {sorted(excluded)}).")
    logger.debug(f"{len(splits)} partições admissíveis com tamanho mínimo "
                 f"{min_node_size}.")
    return SplitUniverse(tuple(splits), min_node_size)


def apply_split(split: Split, data: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """Índices das unidades no filho esquerdo e no direito."""
    mask = split.left_mask(data)
    return np.flatnonzero(mask), np.flatnonzero(~mask)


def level_membership(universe: SplitUniverse,
                     data: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """
    Matriz (partições × níveis de todas as covariáveis) com 1 onde o nível
    pertence ao filho esquerdo, e o deslocamento de cada covariável nas
    colunas. Somas por filho saem de um produto com as somas por nível.
    """
    offsets = np.concatenate(
        ([0], np.cumsum([cov.n_levels for cov in data.covariates])))
    position = {cov.name: i for i, cov in enumerate(data.covariates)}
    membership = np.zeros((len(universe), offsets[-1]), dtype=np.float64)
    for row, split in enumerate(universe):
        i = position[split.covariate]
        cov = data.covariates[i]
        membership[row, offsets[i]:offsets[i + 1]] = \
            split.rule.left_levels(cov.n_levels)
    return membership, offsets
