import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from src.busca_subgrupos.data import Dataset
from src.busca_subgrupos.effects import (CenteredEffect, global_ate,
                                         local_effect, welch_df)
from src.busca_subgrupos.exceptions import (ConfigError, DegenerateNodeError,
                                            EmptyArmError,
                                            InsufficientArmError)
from src.busca_subgrupos.stump import (SearchObjective, StumpFit, TuningSlot,
                                       extreme_slot, tune)

logger = logging.getLogger(__name__)

DEFAULT_FRACTION = 0.5


class HonestCentering(str, Enum):
    TEST = "test"
    FULL = "full"


class HonestStatus(str, Enum):
    OK = "ok"
    INSUFFICIENT = "insufficient"
    DEGENERATE = "degenerate"


@dataclass(frozen=True, eq=False)
class DataSplit:
    """Metades de treino e teste, como índices ordenados do Dataset."""
    train: np.ndarray
    test: np.ndarray
    fraction: float
    seed: Optional[int]

    def to_dict(self) -> Dict:
        return {
            "n_train": int(self.train.size),
            "n_test": int(self.test.size),
            "fraction": self.fraction,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class HonestResult:
    node_rule: str
    selected_child: str
    test_n_t: int
    test_n_c: int
    status: HonestStatus
    effect: Optional[CenteredEffect] = None
    df: Optional[float] = None
    p_value_one_sided: Optional[float] = None
    p_value_two_sided: Optional[float] = None
    centering: HonestCentering = HonestCentering.TEST
    reason: Optional[str] = None

    def to_dict(self) -> Dict:
        return {
            "node_rule": self.node_rule,
            "selected_child": self.selected_child,
            "test_n_t": self.test_n_t,
            "test_n_c": self.test_n_c,
            "status": self.status.value,
            "effect": self.effect.to_dict() if self.effect else None,
            "df": self.df,
            "p_value_one_sided": self.p_value_one_sided,
            "p_value_two_sided": self.p_value_two_sided,
            "centering": self.centering.value,
            "reason": self.reason,
        }


@dataclass
class HonestRun:
    """Ajuste no treino (todos os tamanhos) e a estimativa no teste."""
    split: DataSplit
    slots: List[TuningSlot]
    selected: Optional[int]
    result: Optional[HonestResult]

    def to_dict(self) -> Dict:
        return {
            "split": self.split.to_dict(),
            "train_slots": [slot.to_dict() for slot in self.slots],
            "selected_slot": self.selected,
            "result": self.result.to_dict() if self.result else None,
        }


def split_data(data: Dataset, fraction: float = DEFAULT_FRACTION,
               seed: Optional[int] = None) -> DataSplit:
    """
    Divide as unidades em treino e teste por amostragem aleatória simples
    sem reposição (não estratificada por braço).

    Args:
        data (Dataset): Dados completos.
        fraction (float): Proporção destinada ao treino, em (0,1).
        seed (Optional[int]): Semente.

    Returns:
        DataSplit: Índices disjuntos e exaustivos.

    Raises:
        ConfigError: ``fraction`` fora de (0,1) ou metade vazia.
        EmptyArmError: Alguma metade ficou sem um dos braços.
    """
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"Fração de treino fora de (0,1): {fraction}")
    n_train = int(round(fraction * data.n))
    if n_train == 0 or n_train == data.n:
        raise ConfigError(
            f"Fração {fraction} com n={data.n} deixa uma metade vazia.")
    order = np.random.default_rng(seed).permutation(data.n)
    train, test = np.sort(order[:n_train]), np.sort(order[n_train:])
    for name, half in (("treino", train), ("teste", test)):
        treated = int(data.treatment[half].sum())
        if treated == 0 or treated == half.size:
            raise EmptyArmError(
                f"A metade de {name} ficou sem um dos braços "
                f"({treated} tratados em {half.size}).")
    logger.debug(f"Divisão honesta: {train.size} treino, {test.size} teste.")
    return DataSplit(train, test, fraction, seed)


def _p_values(effect: CenteredEffect, df: float,
              objective: SearchObjective):
    t = effect.t
    if objective is SearchObjective.MAX_ATE:
        one_sided = stats.t.sf(t, df)
    else:
        one_sided = stats.t.cdf(t, df)
    return float(one_sided), float(2.0 * stats.t.sf(abs(t), df))


def honest_estimate(fit: StumpFit, data: Dataset, split: DataSplit,
                    centering: HonestCentering = HonestCentering.TEST
                    ) -> HonestResult:
    """
    Passa as unidades de teste pela partição ajustada no treino e estima o
    ATE local centrado do filho escolhido usando só essas unidades.

    O valor-p unicaudal segue a direção do objetivo; o bicaudal testa
    ATE centrado = 0. Ambos usam a distribuição t com graus de liberdade de
    Welch–Satterthwaite. Nós com poucas unidades ou erro padrão zero são
    reportados no status, sem exceção.
    """
    centering = HonestCentering(centering)
    test = data.subset(split.test)
    node = np.flatnonzero(fit.node_mask(test))
    node_treatment = test.treatment[node]
    n_t = int(node_treatment.sum())
    n_c = int(node.size - n_t)
    base = dict(node_rule=fit.rule, selected_child=fit.selected_child.value,
                test_n_t=n_t, test_n_c=n_c, centering=centering)

    reference = test if centering is HonestCentering.TEST else data
    try:
        effect = local_effect(test, node, global_ate(reference).ate)
    except InsufficientArmError as e:
        logger.warning(f"Nó honesto '{fit.rule}' sem dados suficientes no "
                       f"teste: {e.message}")
        return HonestResult(status=HonestStatus.INSUFFICIENT,
                            reason=e.message, **base)
    except DegenerateNodeError as e:
        logger.warning(f"Nó honesto '{fit.rule}' degenerado: {e.message}")
        return HonestResult(status=HonestStatus.DEGENERATE,
                            reason=e.message, **base)

    local = effect.local
    df = welch_df(local.var_t, local.n_t, local.var_c, local.n_c)
    one_sided, two_sided = _p_values(effect, df, fit.objective)
    logger.info(f"Estimativa honesta de '{fit.rule}': ATE centrado "
                f"{effect.centered:.4f}, t {effect.t:.3f}, p unicaudal "
                f"{one_sided:.4f}.")
    return HonestResult(status=HonestStatus.OK, effect=effect, df=df,
                        p_value_one_sided=one_sided,
                        p_value_two_sided=two_sided, **base)


def honest_fit(data: Dataset, objective: SearchObjective,
               sizes: Sequence[int], fraction: float = DEFAULT_FRACTION,
               seed: Optional[int] = None,
               centering: HonestCentering = HonestCentering.TEST,
               **kwargs) -> HonestRun:
    """
    Caminho honesto completo: divide, ajusta e escolhe o tamanho mínimo só
    com o treino, e estima no teste. ``kwargs`` segue para ``fit_stump``.
    """
    split = split_data(data, fraction, seed)
    slots = tune(data.subset(split.train), objective, sizes, **kwargs)
    selected = extreme_slot(slots, objective)
    if selected is None:
        logger.warning("Nenhum tamanho mínimo produziu ajuste no treino.")
        return HonestRun(split, slots, None, None)
    result = honest_estimate(slots[selected].fit, data, split, centering)
    return HonestRun(split, slots, selected, result)
