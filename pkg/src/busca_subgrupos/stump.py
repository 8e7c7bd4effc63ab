import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.busca_subgrupos.data import Dataset
from src.busca_subgrupos.effects import (ArmSums, CenteredEffect, NodeEffects,
                                         delta_loss, effect_from_sums,
                                         global_ate, node_effects, node_loss)
from src.busca_subgrupos.exceptions import (ConfigError, DegenerateDataError,
                                            DegenerateSearchError,
                                            EmptySplitUniverseError)
from src.busca_subgrupos.splits import (Split, SplitUniverse,
                                        enumerate_splits, level_membership)

logger = logging.getLogger(__name__)


class SearchObjective(str, Enum):
    MAX_ATE = "max"
    MIN_ATE = "min"

    def pick(self, scores: np.ndarray) -> int:
        """Índice do valor extremo; empates ficam com o primeiro."""
        return int(np.argmax(scores) if self is SearchObjective.MAX_ATE
                   else np.argmin(scores))

    @property
    def worst(self) -> float:
        return -np.inf if self is SearchObjective.MAX_ATE else np.inf

    def extreme(self, values: np.ndarray) -> float:
        return float(values.max() if self is SearchObjective.MAX_ATE
                     else values.min())

    def beyond(self, a: float, b: float) -> bool:
        """True se ``a`` é pelo menos tão extremo quanto ``b``."""
        return a >= b if self is SearchObjective.MAX_ATE else a <= b


class Child(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class Centering(str, Enum):
    GLOBAL = "global"
    ZERO = "zero"


class Criterion(str, Enum):
    ATE = "ate"
    MSE = "mse"


@dataclass(frozen=True)
class StumpFit:
    split: Split
    selected_child: Child
    effect: CenteredEffect
    other_child_effect: Optional[CenteredEffect]
    min_node_size: int
    objective: SearchObjective
    rank: int = 1
    dropped_covariates: Tuple[str, ...] = ()
    criterion: Criterion = Criterion.ATE

    @property
    def rule(self) -> str:
        if self.selected_child is Child.LEFT:
            return self.split.description
        return self.split.complement_description

    def node_mask(self, data: Dataset) -> np.ndarray:
        mask = self.split.left_mask(data)
        return mask if self.selected_child is Child.LEFT else ~mask

    def to_dict(self) -> Dict:
        return {
            "rank": self.rank,
            "objective": self.objective.value,
            "criterion": self.criterion.value,
            "min_node_size": self.min_node_size,
            "split": self.split.to_dict(),
            "selected_child": self.selected_child.value,
            "rule": self.rule,
            "effect": self.effect.to_dict(),
            "other_child_effect": (self.other_child_effect.to_dict()
                                   if self.other_child_effect else None),
            "dropped_covariates": list(self.dropped_covariates),
        }


@dataclass
class TuningSlot:
    min_node_size: int
    fit: Optional[StumpFit] = None
    reason: Optional[str] = None

    @property
    def is_empty(self) -> bool:
        return self.fit is None

    def to_dict(self) -> Dict:
        return {
            "min_node_size": self.min_node_size,
            "fit": self.fit.to_dict() if self.fit else None,
            "reason": self.reason,
        }


class SplitEvaluator:
    """
    Avalia todos os pares (partição, filho) de um universo para qualquer
    vetor de tratamento. Os nós ficam intercalados: o índice 2·s é o filho
    esquerdo da partição s e 2·s+1 o direito, que é a ordem de desempate.
    """

    def __init__(self, data: Dataset, universe: SplitUniverse):
        self.data = data
        self.universe = universe
        left, offsets = level_membership(universe, data)
        block = np.zeros_like(left)
        position = {cov.name: i for i, cov in enumerate(data.covariates)}
        for row, split in enumerate(universe):
            i = position[split.covariate]
            block[row, offsets[i]:offsets[i + 1]] = 1.0
        children = np.empty((2 * len(universe), left.shape[1]))
        children[0::2] = left
        children[1::2] = block - left
        self._children = children
        self._offsets = offsets
        self._codes = [cov.values for cov in data.covariates]
        # somas sobre a resposta centrada na média geral
        self._offset = float(np.mean(data.response))
        self._y = data.response - self._offset
        self._y2 = self._y ** 2
        self._spread = float(np.mean(self._y2))
        sizes = np.array([min(s.n_left, s.n_right) for s in universe])
        self._child_min_size = np.repeat(sizes, 2)

    @property
    def n_candidates(self) -> int:
        return self._children.shape[0]

    def split_of(self, index: int) -> Tuple[Split, Child]:
        return (self.universe[index // 2],
                Child.LEFT if index % 2 == 0 else Child.RIGHT)

    def admissible(self, min_node_size: int) -> np.ndarray:
        return self._child_min_size >= min_node_size

    def child_sums(self, treatment: np.ndarray) -> ArmSums:
        w = np.asarray(treatment, dtype=np.float64)
        c = 1.0 - w
        weights = (w, c, w * self._y, c * self._y, w * self._y2, c * self._y2)
        level_sums = np.empty((6, self._offsets[-1]))
        for i, codes in enumerate(self._codes):
            k = self._offsets[i + 1] - self._offsets[i]
            for j, weight in enumerate(weights):
                level_sums[j, self._offsets[i]:self._offsets[i + 1]] = \
                    np.bincount(codes, weights=weight, minlength=k)
        sums = self._children @ level_sums.T
        return ArmSums(*(sums[:, j] for j in range(6)),
                       offset=self._offset, spread=self._spread)

    def evaluate(self, treatment: np.ndarray,
                 centering: float) -> Tuple[ArmSums, NodeEffects]:
        sums = self.child_sums(treatment)
        return sums, node_effects(sums, centering)

    def loss_reduction(self, sums: ArmSums) -> np.ndarray:
        """ΔLoss de cada partição com a perda EQM dentro de cada filho."""
        n = sums.n_t + sums.n_c
        with np.errstate(divide="ignore", invalid="ignore"):
            within = (sums.q_t - np.where(sums.n_t > 0,
                                          sums.s_t ** 2 / sums.n_t, 0.0)
                      + sums.q_c - np.where(sums.n_c > 0,
                                            sums.s_c ** 2 / sums.n_c, 0.0))
            loss = within / n
        left, right = loss[0::2], loss[1::2]
        p = n[0::2] / (n[0::2] + n[1::2])
        parent = node_loss(self.data.response, self.data.treatment)
        return delta_loss(parent, left, right, p)


def centering_value(data: Dataset, centering: Centering) -> float:
    return global_ate(data).ate if centering is Centering.GLOBAL else 0.0


def fit_stump(data: Dataset, objective: SearchObjective, min_node_size: int,
              excluded: Iterable[str] = (),
              centering: Centering = Centering.GLOBAL,
              criterion: Criterion = Criterion.ATE) -> StumpFit:
    """
    Ajusta um toco (árvore de profundidade 1) pelo critério max-ATE ou
    min-ATE: entre todos os pares (partição, filho) admissíveis, escolhe o de
    ATE local centrado extremo.

    Filhos com menos de duas unidades em algum braço não são candidatos.
    Filhos com erro padrão zero continuam selecionáveis (o t fica indefinido).
    No modo de comparação (``Criterion.MSE``) a partição é escolhida pela
    redução de EQM e o filho pelo ATE centrado extremo.

    Args:
        data (Dataset): Dados completos.
        objective (SearchObjective): Direção da busca.
        min_node_size (int): Tamanho mínimo de cada filho.
        excluded (Iterable[str]): Covariáveis fora da busca.
        centering (Centering): Centrar pelo ATE global estimado ou por zero.
        criterion (Criterion): Critério de escolha da partição.

    Returns:
        StumpFit: O par escolhido e os efeitos dos dois filhos.

    Raises:
        EmptySplitUniverseError: Nenhuma partição admissível.
        DegenerateSearchError: Nenhum nó candidato com t definido.
    """
    objective = SearchObjective(objective)
    centering = Centering(centering)
    criterion = Criterion(criterion)
    excluded = tuple(sorted(set(excluded)))
    universe = enumerate_splits(data, min_node_size, excluded)
    evaluator = SplitEvaluator(data, universe)
    c = centering_value(data, centering)
    sums, effects = evaluator.evaluate(data.treatment, c)

    if not effects.has_t.any():
        raise DegenerateSearchError(
            f"Todos os {evaluator.n_candidates} nós candidatos são degenerados "
            f"(tamanho mínimo {min_node_size}).")

    if criterion is Criterion.ATE:
        scores = np.where(effects.eligible, effects.centered, objective.worst)
        index = objective.pick(scores)
    else:
        reduction = evaluator.loss_reduction(sums)
        usable = effects.eligible[0::2] | effects.eligible[1::2]
        split_index = int(np.argmax(np.where(usable, reduction, -np.inf)))
        pair = np.where(effects.eligible[2 * split_index:2 * split_index + 2],
                        effects.centered[2 * split_index:2 * split_index + 2],
                        objective.worst)
        index = 2 * split_index + objective.pick(pair)

    split, child = evaluator.split_of(index)
    other = index ^ 1
    fit = StumpFit(
        split=split,
        selected_child=child,
        effect=effect_from_sums(sums, index, c),
        other_child_effect=(effect_from_sums(sums, other, c)
                            if effects.eligible[other] else None),
        min_node_size=min_node_size,
        objective=objective,
        dropped_covariates=excluded,
        criterion=criterion,
    )
    logger.info(f"Toco {objective.value}-ATE (mínimo {min_node_size}): "
                f"{fit.rule}, ATE centrado {fit.effect.centered:.4f}, "
                f"t {fit.effect.t}.")
    return fit


def fit_sequence(data: Dataset, objective: SearchObjective,
                 min_node_size: int, depth: int,
                 **kwargs) -> List[StumpFit]:
    """
    Melhor, segundo melhor, terceiro melhor...: cada posto exclui as
    covariáveis de partição dos postos anteriores. Para cedo quando não
    sobra partição admissível.
    """
    if depth < 1:
        raise ConfigError(f"depth deve ser pelo menos 1 (recebido {depth}).")
    fits: List[StumpFit] = []
    excluded: List[str] = []
    for rank in range(1, depth + 1):
        try:
            fit = fit_stump(data, objective, min_node_size, excluded, **kwargs)
        except (EmptySplitUniverseError, DegenerateSearchError) as e:
            if rank == 1:
                raise
            logger.info(f"Sequência encerrada no posto {rank}: {e.message}")
            break
        fits.append(replace(fit, rank=rank))
        excluded.append(fit.split.covariate)
    return fits


def tune(data: Dataset, objective: SearchObjective, sizes: Sequence[int],
         **kwargs) -> List[TuningSlot]:
    """
    Um ajuste independente por tamanho mínimo de nó. Tamanhos sem partição
    admissível viram posições vazias, com o motivo registrado.
    """
    if not sizes:
        raise ConfigError("A lista de tamanhos mínimos está vazia.")
    slots = []
    for size in sizes:
        try:
            slots.append(TuningSlot(size, fit_stump(data, objective, size,
                                                    **kwargs)))
        except DegenerateDataError as e:
            logger.warning(f"Tamanho mínimo {size} sem ajuste: {e.message}")
            slots.append(TuningSlot(size, reason=e.message))
    return slots


def extreme_slot(slots: Sequence[TuningSlot],
                 objective: SearchObjective) -> Optional[int]:
    """Posição do ajuste com ATE centrado mais extremo (primeiro em empate)."""
    filled = [i for i, slot in enumerate(slots) if not slot.is_empty]
    if not filled:
        return None
    scores = np.array([slots[i].fit.effect.centered for i in filled])
    return filled[SearchObjective(objective).pick(scores)]
