import itertools
import logging
import math

import numpy as np

from src.busca_subgrupos.data import Covariate, CovariateKind, Dataset

LOG_FORMAT = ('%(asctime)s | %(levelname)-8s | %(name)-25s | '
              '%(funcName)-25s | %(message)s')


def configure_test_logging():
    logging.basicConfig(level=logging.DEBUG, format=LOG_FORMAT,
                        handlers=[logging.StreamHandler()])
    logging.getLogger('numexpr').setLevel(logging.WARNING)


def _labels(codes, labels):
    if labels is not None:
        return tuple(labels)
    return tuple(str(i) for i in range(int(np.max(codes)) + 1))


def ordered(name, codes, labels=None) -> Covariate:
    return Covariate(name, CovariateKind.ORDERED, codes, _labels(codes, labels))


def categorical(name, codes, labels=None) -> Covariate:
    return Covariate(name, CovariateKind.CATEGORICAL, codes,
                     _labels(codes, labels))


def make_dataset(response, treatment, *covariates) -> Dataset:
    return Dataset(np.asarray(response, dtype=float), np.asarray(treatment),
                   tuple(covariates))


def hand_fixture() -> Dataset:
    """Seis unidades, uma covariável ordenada e uma categórica."""
    return make_dataset(
        [3.0, 1.0, 2.0, 0.0, 1.0, 2.0],
        [1, 1, 1, 0, 0, 0],
        ordered("x", [0, 0, 1, 0, 1, 1]),
        categorical("g", [0, 1, 2, 2, 1, 0], ["a", "b", "c"]))


def random_dataset(rng: np.random.Generator, n: int = 24,
                   n_covariates: int = 3, max_levels: int = 5) -> Dataset:
    """Resposta contínua (sem empates), braços balanceados, tipos sorteados."""
    treatment = rng.permutation(np.arange(n) % 2)
    covariates = []
    for j in range(n_covariates):
        k = int(rng.integers(2, max_levels + 1))
        codes = rng.integers(0, k, size=n)
        labels = [f"n{i}" for i in range(k)]
        kind = (CovariateKind.ORDERED if rng.random() < 0.5
                else CovariateKind.CATEGORICAL)
        covariates.append(Covariate(f"c{j}", kind, codes, labels))
    response = rng.normal(size=n) + 0.8 * treatment * (covariates[0].values
                                                        == 0)
    return Dataset(response, treatment, tuple(covariates))


def candidate_nodes(data: Dataset, min_node_size: int):
    """
    Enumeração direta de todos os nós (covariável, níveis no nó) cujos dois
    lados têm pelo menos ``min_node_size`` unidades.
    """
    for cov in data.covariates:
        observed = sorted(set(cov.values.tolist()))
        if cov.is_ordered:
            blocks = [set(observed[:i]) for i in range(1, len(observed))]
            blocks += [set(observed[i:]) for i in range(1, len(observed))]
        else:
            blocks = [set(chosen) for r in range(1, len(observed))
                      for chosen in itertools.combinations(observed, r)]
        for block in blocks:
            mask = np.isin(cov.values, sorted(block))
            if min(mask.sum(), (~mask).sum()) >= min_node_size:
                yield cov.name, frozenset(block), mask


def welch_t(response, treatment, mask, centering):
    y_t = response[mask & (treatment == 1)]
    y_c = response[mask & (treatment == 0)]
    if y_t.size < 2 or y_c.size < 2:
        return None, None
    ate = y_t.mean() - y_c.mean()
    se = math.sqrt(y_t.var(ddof=1) / y_t.size + y_c.var(ddof=1) / y_c.size)
    centered = ate - centering
    return centered, (centered / se if se > 0 else None)


def brute_force_stump(data: Dataset, min_node_size: int, sign: float = 1.0,
                      centering: float = None):
    """Melhor nó por força bruta: (covariável, níveis, ATE centrado)."""
    if centering is None:
        treated = data.treatment == 1
        centering = (data.response[treated].mean()
                     - data.response[~treated].mean())
    best = None
    for name, block, mask in candidate_nodes(data, min_node_size):
        centered, _ = welch_t(data.response, data.treatment, mask, centering)
        if centered is None:
            continue
        if best is None or sign * centered > sign * best[2]:
            best = (name, block, centered)
    return best


def brute_force_extreme_t(data: Dataset, treatment, min_node_size: int,
                          sign: float = 1.0):
    treated = treatment == 1
    centering = data.response[treated].mean() - data.response[~treated].mean()
    values = []
    for _, _, mask in candidate_nodes(data, min_node_size):
        _, t = welch_t(data.response, treatment, mask, centering)
        if t is not None:
            values.append(t)
    if not values:
        return None
    return max(values) if sign > 0 else min(values)


def node_levels(fit, data: Dataset) -> frozenset:
    """Níveis observados que caem no filho escolhido de um StumpFit."""
    cov = data.covariate(fit.split.covariate)
    mask = fit.node_mask(data)
    return frozenset(np.unique(cov.values[mask]).tolist())
