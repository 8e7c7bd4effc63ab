import itertools
import logging
import math
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from src.busca_subgrupos.data import Dataset
from src.busca_subgrupos.exceptions import (ConfigError, DegenerateNullError,
                                            EmptySplitUniverseError,
                                            ExhaustiveCapError)
from src.busca_subgrupos.splits import enumerate_splits
from src.busca_subgrupos.stump import (Centering, SearchObjective,
                                       SplitEvaluator)

logger = logging.getLogger(__name__)

DEFAULT_PERMUTATIONS = 1000
DEFAULT_EXHAUSTIVE_CAP = 200_000
POOLING_RULE = "one extreme per permutation, taken jointly over all sizes"


@dataclass(frozen=True, eq=False)
class NullDistribution:
    """
    Distribuição nula do t extremo: um valor por permutação, o máximo (ou
    mínimo) sobre todos os pares (partição, filho) e todos os tamanhos
    mínimos. ``per_size`` guarda o extremo de cada tamanho (NaN quando o
    tamanho não produziu t definido naquela permutação).

    Permutações sem nenhum t definido valem -inf (max) ou +inf (min): nunca
    alcançam um valor observado.
    """
    values: np.ndarray
    per_size: np.ndarray
    objective: SearchObjective
    sizes: Tuple[int, ...]
    seed: Optional[int]
    exact: bool = False

    @property
    def B(self) -> int:
        return int(self.values.shape[0])

    def for_sizes(self, sizes: Sequence[int]) -> "NullDistribution":
        columns = [self.sizes.index(size) for size in sizes]
        per_size = self.per_size[:, columns]
        return NullDistribution(_combine(per_size, self.objective), per_size,
                                self.objective, tuple(sizes), self.seed,
                                self.exact)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"permutation": np.arange(self.B),
                             "extreme_t": self.values})


@dataclass(frozen=True)
class RighteousResult:
    observed_t: float
    p_value: float
    critical_value: float
    alpha: float
    B: int
    exact: bool

    @property
    def rejected(self) -> bool:
        return self.p_value <= self.alpha

    def to_dict(self) -> Dict:
        return {
            "observed_t": self.observed_t,
            "p_value": self.p_value,
            "critical_value": self.critical_value,
            "alpha": self.alpha,
            "B": self.B,
            "exact": self.exact,
            "rejected": self.rejected,
        }


def permutation_rng(seed: int, index: int) -> np.random.Generator:
    """Gerador próprio da permutação ``index``, derivado de (seed, index)."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def permute_treatment(data: Dataset, rng: np.random.Generator) -> Dataset:
    """Permuta o rótulo de tratamento; resposta e covariáveis não mudam."""
    return data.with_treatment(rng.permutation(data.treatment))


def _combine(per_size: np.ndarray, objective: SearchObjective) -> np.ndarray:
    filled = np.where(np.isnan(per_size), objective.worst, per_size)
    if objective is SearchObjective.MAX_ATE:
        return filled.max(axis=1)
    return filled.min(axis=1)


class NullBuilder:
    """
    Estado compartilhado pelas permutações: um avaliador sobre o universo do
    menor tamanho mínimo e a máscara de admissibilidade de cada tamanho
    (as contagens por filho não dependem de W).
    """

    def __init__(self, data: Dataset, objective: SearchObjective,
                 sizes: Sequence[int],
                 centering: Centering = Centering.GLOBAL):
        if not sizes:
            raise ConfigError("A lista de tamanhos mínimos está vazia.")
        self.objective = SearchObjective(objective)
        self.sizes = tuple(int(size) for size in sizes)
        self.centering = Centering(centering)
        self.data = data
        try:
            universe = enumerate_splits(data, min(self.sizes))
        except EmptySplitUniverseError:
            raise EmptySplitUniverseError(
                f"Nenhum dos tamanhos mínimos {list(self.sizes)} admite "
                f"partição.")
        self.evaluator = SplitEvaluator(data, universe)
        self.masks = [self.evaluator.admissible(size) for size in self.sizes]

    def extremes(self, treatment: np.ndarray) -> np.ndarray:
        """Extremo do t por tamanho mínimo para um vetor de tratamento."""
        if self.centering is Centering.GLOBAL:
            treated = treatment == 1
            c = (self.data.response[treated].mean()
                 - self.data.response[~treated].mean())
        else:
            c = 0.0
        _, effects = self.evaluator.evaluate(treatment, c)
        out = np.full(len(self.sizes), np.nan)
        for j, mask in enumerate(self.masks):
            t = effects.t[mask & effects.has_t]
            if t.size:
                out[j] = self.objective.extreme(t)
        return out

    def permutation(self, seed: int, index: int) -> np.ndarray:
        rng = permutation_rng(seed, index)
        return self.extremes(rng.permutation(self.data.treatment))


_worker_builder: Optional[NullBuilder] = None


def _init_worker(builder: NullBuilder) -> None:
    global _worker_builder
    _worker_builder = builder


def _run_chunk(task: Tuple[int, List[int]]) -> Tuple[List[int], np.ndarray]:
    seed, indices = task
    return indices, np.array([_worker_builder.permutation(seed, b)
                              for b in indices])


def _finalize(per_size: np.ndarray, objective: SearchObjective,
              sizes: Tuple[int, ...], seed: Optional[int],
              exact: bool) -> NullDistribution:
    undefined = np.isnan(per_size).all(axis=1)
    if undefined.all():
        raise DegenerateNullError(
            f"Nenhuma das {per_size.shape[0]} permutações produziu um valor "
            f"t definido (respostas constantes?).")
    if undefined.any():
        logger.warning(f"{int(undefined.sum())} permutação(ões) sem t "
                       f"definido; contam como {objective.worst}.")
    return NullDistribution(_combine(per_size, objective), per_size,
                            objective, sizes, seed, exact)


def build_null(data: Dataset, objective: SearchObjective,
               sizes: Sequence[int], B: int = DEFAULT_PERMUTATIONS,
               seed: int = 0, workers: int = 1,
               centering: Centering = Centering.GLOBAL) -> NullDistribution:
    """
    Aproximação de Monte Carlo da distribuição nula do t extremo.

    Para cada permutação b: permuta W uma vez com o gerador derivado de
    (seed, b), recalcula o ATE global permutado para a centragem, avalia
    todos os pares (partição, filho) admissíveis de cada tamanho e registra
    o extremo. O resultado não depende do número de processos.

    Args:
        data (Dataset): Dados observados.
        objective (SearchObjective): max (maior t) ou min (menor t).
        sizes (Sequence[int]): Tamanhos mínimos usados no ajuste.
        B (int): Número de permutações.
        seed (int): Semente.
        workers (int): Processos; 1 roda no processo atual.
        centering (Centering): Centragem dos t.

    Returns:
        NullDistribution: B valores extremos, na ordem das permutações.

    Raises:
        ConfigError: B < 1.
        EmptySplitUniverseError: Nenhum tamanho admite partição.
        DegenerateNullError: Nenhuma permutação produziu t definido.
    """
    if B < 1:
        raise ConfigError(f"B deve ser pelo menos 1 (recebido {B}).")
    builder = NullBuilder(data, objective, sizes, centering)
    logger.info(f"Construindo nula {builder.objective.value}-t com B={B}, "
                f"tamanhos {list(builder.sizes)}, "
                f"{builder.evaluator.n_candidates} nós candidatos, "
                f"{workers} processo(s).")
    per_size = np.empty((B, len(builder.sizes)))
    if workers <= 1:
        for b in range(B):
            per_size[b] = builder.permutation(seed, b)
    else:
        chunks = [chunk.tolist() for chunk in
                  np.array_split(np.arange(B), min(B, workers * 4))]
        with Pool(processes=workers, initializer=_init_worker,
                  initargs=(builder,)) as pool:
            for indices, rows in pool.imap_unordered(
                    _run_chunk, [(seed, chunk) for chunk in chunks]):
                per_size[indices] = rows
    return _finalize(per_size, builder.objective, builder.sizes, seed, False)


def exhaustive_null(data: Dataset, objective: SearchObjective,
                    sizes: Sequence[int],
                    cap: int = DEFAULT_EXHAUSTIVE_CAP,
                    centering: Centering = Centering.GLOBAL
                    ) -> NullDistribution:
    """
    Distribuição nula exata: enumera todas as atribuições com os tamanhos de
    braço observados (um valor extremo por atribuição).

    Raises:
        ExhaustiveCapError: Se C(n, n_t) passar de ``cap``.
    """
    total = math.comb(data.n, data.n_treated)
    if total > cap:
        raise ExhaustiveCapError(
            f"C({data.n}, {data.n_treated}) = {total} atribuições excede o "
            f"limite {cap}.")
    builder = NullBuilder(data, objective, sizes, centering)
    per_size = np.empty((total, len(builder.sizes)))
    treatment = np.zeros(data.n, dtype=np.int8)
    for row, treated in enumerate(itertools.combinations(range(data.n),
                                                         data.n_treated)):
        treatment[:] = 0
        treatment[list(treated)] = 1
        per_size[row] = builder.extremes(treatment)
    logger.info(f"Nula exata com {total} atribuições.")
    return _finalize(per_size, builder.objective, builder.sizes, None, True)


def critical_value(null: NullDistribution, alpha: float = 0.05) -> float:
    """
    Quantil empírico da nula: 1-alpha (superior) para max, alpha (inferior)
    para min. Ultrapassar o valor crítico garante p <= alpha.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha fora de (0,1): {alpha}")
    if null.objective is SearchObjective.MAX_ATE:
        return float(np.quantile(null.values, 1.0 - alpha, method="higher"))
    return float(np.quantile(null.values, alpha, method="lower"))


def righteous_p(observed_t: float, null: NullDistribution,
                alpha: float = 0.05) -> RighteousResult:
    """
    Valor-p válido após a seleção: fração de extremos nulos tão ou mais
    extremos que ``observed_t``. Nulas de Monte Carlo usam a convenção
    (1 + #)/(B + 1); nulas exatas usam a fração simples.
    """
    critical = critical_value(null, alpha)
    if null.objective is SearchObjective.MAX_ATE:
        count = int(np.sum(null.values >= observed_t))
    else:
        count = int(np.sum(null.values <= observed_t))
    if null.exact:
        p_value = count / null.B
    else:
        p_value = (1 + count) / (null.B + 1)
    return RighteousResult(float(observed_t), float(p_value), critical,
                           alpha, null.B, null.exact)


def naive_p(observed_t: float,
            objective: SearchObjective = SearchObjective.MAX_ATE) -> float:
    """
    Valor-p unicaudal pela aproximação normal, sem ajuste pela seleção.
    Serve apenas de contraste com o valor-p righteous.
    """
    if SearchObjective(objective) is SearchObjective.MAX_ATE:
        return float(stats.norm.sf(observed_t))
    return float(stats.norm.cdf(observed_t))
