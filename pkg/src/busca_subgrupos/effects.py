import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from src.busca_subgrupos.data import Dataset
from src.busca_subgrupos.exceptions import (ConfigError, DegenerateNodeError,
                                            EmptyArmError,
                                            InsufficientArmError)

logger = logging.getLogger(__name__)

MIN_UNITS_PER_ARM = 2
# variâncias abaixo desta fração da variância total da resposta são ruído de
# arredondamento das somas
_ZERO_VARIANCE_TOL = 1e-10


@dataclass(frozen=True)
class EffectEstimate:
    """
    Diferença de médias entre tratados e controles, com erro padrão de Welch
    (definido apenas com pelo menos duas unidades em cada braço).
    """
    ate: float
    n_t: int
    n_c: int
    mean_t: float
    mean_c: float
    var_t: Optional[float]
    var_c: Optional[float]
    se: Optional[float]

    def to_dict(self) -> Dict:
        return {
            "ate": self.ate,
            "n_t": self.n_t,
            "n_c": self.n_c,
            "mean_t": self.mean_t,
            "mean_c": self.mean_c,
            "var_t": self.var_t,
            "var_c": self.var_c,
            "se": self.se,
        }


@dataclass(frozen=True)
class CenteredEffect:
    local: EffectEstimate
    global_ate: float
    centered: float
    t: Optional[float]

    @property
    def degenerate(self) -> bool:
        return self.t is None

    def to_dict(self) -> Dict:
        return {
            "local": self.local.to_dict(),
            "global_ate": self.global_ate,
            "centered": self.centered,
            "t": self.t,
        }


def _sample_variance(values: np.ndarray) -> float:
    # zero só quando as respostas do braço são de fato idênticas
    if np.ptp(values) == 0.0:
        return 0.0
    return float(values.var(ddof=1))


def estimate_effect(response: np.ndarray,
                    treatment: np.ndarray) -> EffectEstimate:
    response = np.asarray(response, dtype=np.float64)
    treated = np.asarray(treatment) == 1
    y_t, y_c = response[treated], response[~treated]
    n_t, n_c = int(y_t.size), int(y_c.size)
    if n_t == 0 or n_c == 0:
        raise EmptyArmError(
            f"Braço vazio no nó: {n_t} tratados, {n_c} controles.")
    mean_t, mean_c = float(y_t.mean()), float(y_c.mean())
    var_t = var_c = se = None
    if n_t >= MIN_UNITS_PER_ARM and n_c >= MIN_UNITS_PER_ARM:
        var_t = _sample_variance(y_t)
        var_c = _sample_variance(y_c)
        se = math.sqrt(var_t / n_t + var_c / n_c)
    return EffectEstimate(mean_t - mean_c, n_t, n_c, mean_t, mean_c,
                          var_t, var_c, se)


def global_ate(data: Dataset) -> EffectEstimate:
    """ATE global: média dos tratados menos média dos controles."""
    return estimate_effect(data.response, data.treatment)


def center(local: EffectEstimate, global_value: float) -> CenteredEffect:
    centered = local.ate - global_value
    t = centered / local.se if local.se else None
    return CenteredEffect(local, float(global_value), centered, t)


def local_effect(data: Dataset, node: Sequence[int],
                 global_value: float) -> CenteredEffect:
    """
    ATE local centrado (ATE local menos ``global_value``) e seu escore t.
    O valor global entra como constante: não contribui para o erro padrão.

    Raises:
        InsufficientArmError: Menos de 2 unidades em algum braço do nó.
        DegenerateNodeError: Erro padrão zero (respostas constantes nos dois
            braços).
    """
    node = np.asarray(node, dtype=np.int64)
    treatment = data.treatment[node]
    n_t = int(treatment.sum())
    n_c = int(node.size - n_t)
    if n_t < MIN_UNITS_PER_ARM or n_c < MIN_UNITS_PER_ARM:
        raise InsufficientArmError(
            f"Nó com {n_t} tratados e {n_c} controles; mínimo de "
            f"{MIN_UNITS_PER_ARM} por braço.")
    effect = center(estimate_effect(data.response[node], treatment),
                    global_value)
    if effect.degenerate:
        raise DegenerateNodeError(
            f"Nó degenerado com {node.size} unidades: respostas constantes "
            f"nos dois braços.")
    return effect


def delta_loss(parent_loss, left_loss, right_loss, p):
    """
    Redução de perda de uma partição: L_A - p·L_esq - (1-p)·L_dir, onde p é
    a proporção de unidades no filho esquerdo. Aceita escalares ou arrays.
    """
    p_array = np.asarray(p, dtype=np.float64)
    if not np.all((p_array > 0.0) & (p_array < 1.0)):
        raise ConfigError(f"Proporção do filho esquerdo fora de (0,1): {p}")
    return parent_loss - p * left_loss - (1.0 - p) * right_loss


def node_loss(response: np.ndarray, treatment: np.ndarray) -> float:
    """
    Erro quadrático médio do ajuste Y = b0 + b1·W no nó (resíduos em torno
    das médias de cada braço).
    """
    response = np.asarray(response, dtype=np.float64)
    treated = np.asarray(treatment) == 1
    fitted = np.where(treated,
                      response[treated].mean() if treated.any() else 0.0,
                      response[~treated].mean() if (~treated).any() else 0.0)
    return float(np.mean((response - fitted) ** 2))


def welch_df(var_t: float, n_t: int, var_c: float, n_c: int) -> float:
    """Graus de liberdade de Welch–Satterthwaite."""
    a, b = var_t / n_t, var_c / n_c
    denominator = a * a / (n_t - 1) + b * b / (n_c - 1)
    if denominator == 0.0:
        return float(n_t + n_c - 2)
    return (a + b) ** 2 / denominator


@dataclass
class ArmSums:
    """
    Somas suficientes por nó: contagens, somas e somas de quadrados da
    resposta já centrada em ``offset`` (a média geral). ``spread`` é a
    variância populacional da resposta inteira e dá a escala do erro de
    arredondamento.
    """
    n_t: np.ndarray
    n_c: np.ndarray
    s_t: np.ndarray
    s_c: np.ndarray
    q_t: np.ndarray
    q_c: np.ndarray
    offset: float = 0.0
    spread: float = 1.0

    def complement(self, total: "ArmSums") -> "ArmSums":
        return ArmSums(total.n_t - self.n_t, total.n_c - self.n_c,
                       total.s_t - self.s_t, total.s_c - self.s_c,
                       total.q_t - self.q_t, total.q_c - self.q_c,
                       self.offset, self.spread)


@dataclass
class NodeEffects:
    """Efeitos vetorizados de muitos nós."""
    ate: np.ndarray
    se: np.ndarray
    centered: np.ndarray
    t: np.ndarray
    eligible: np.ndarray
    has_t: np.ndarray


def _variance_from_sums(q, s, n, spread: float):
    var = (q - s * (s / n)) / (n - 1)
    return np.where(var <= _ZERO_VARIANCE_TOL * spread, 0.0, var)


def node_effects(sums: ArmSums, centering: float) -> NodeEffects:
    """
    Calcula ATE local, erro padrão de Welch e escore t centrado para vários
    nós a partir das somas suficientes. Nós com menos de 2 unidades em algum
    braço ficam inelegíveis; nós com erro padrão zero ficam sem t.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        ate = sums.s_t / sums.n_t - sums.s_c / sums.n_c
        var_t = _variance_from_sums(sums.q_t, sums.s_t, sums.n_t, sums.spread)
        var_c = _variance_from_sums(sums.q_c, sums.s_c, sums.n_c, sums.spread)
        se = np.sqrt(var_t / sums.n_t + var_c / sums.n_c)
        eligible = ((sums.n_t >= MIN_UNITS_PER_ARM)
                    & (sums.n_c >= MIN_UNITS_PER_ARM))
        has_t = eligible & (se > 0.0)
        centered = ate - centering
        t = np.where(has_t, centered / np.where(has_t, se, 1.0), np.nan)
    return NodeEffects(ate, se, centered, t, eligible, has_t)


def effect_from_sums(sums: ArmSums, index: int,
                     centering: float) -> CenteredEffect:
    """Reconstrói um CenteredEffect escalar para o nó ``index``."""
    n_t, n_c = int(sums.n_t[index]), int(sums.n_c[index])
    shift_t = float(sums.s_t[index] / n_t)
    shift_c = float(sums.s_c[index] / n_c)
    var_t = var_c = se = None
    if n_t >= MIN_UNITS_PER_ARM and n_c >= MIN_UNITS_PER_ARM:
        var_t = float(_variance_from_sums(sums.q_t[index], sums.s_t[index],
                                          n_t, sums.spread))
        var_c = float(_variance_from_sums(sums.q_c[index], sums.s_c[index],
                                          n_c, sums.spread))
        se = math.sqrt(var_t / n_t + var_c / n_c)
    local = EffectEstimate(shift_t - shift_c, n_t, n_c,
                           sums.offset + shift_t, sums.offset + shift_c,
                           var_t, var_c, se)
    return center(local, centering)
