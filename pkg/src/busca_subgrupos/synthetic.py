import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.busca_subgrupos.data import (Covariate, CovariateKind, Dataset,
                                      ordered_from_numeric)
from src.busca_subgrupos.exceptions import ConfigError

logger = logging.getLogger(__name__)


class SyntheticKind(str, Enum):
    ORDERED = "ordered"
    CATEGORICAL = "categorical"
    NUMERIC = "numeric"


class NumericDistribution(str, Enum):
    UNIFORM = "uniform"
    NORMAL = "normal"


class ResponseKind(str, Enum):
    BINARY = "binary"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class CovariateSpec:
    """
    Uma covariável sorteada de forma IID. ``ordered``/``categorical`` usam
    ``levels`` níveis com probabilidades ``probabilities`` (uniformes se
    omitidas); ``numeric`` sorteia valores contínuos que depois passam pela
    binarização.
    """
    name: str
    kind: SyntheticKind = SyntheticKind.CATEGORICAL
    levels: int = 2
    probabilities: Optional[Tuple[float, ...]] = None
    labels: Optional[Tuple[str, ...]] = None
    distribution: NumericDistribution = NumericDistribution.UNIFORM
    low: float = 0.0
    high: float = 1.0
    mean: float = 0.0
    sd: float = 1.0

    def validate(self):
        if self.kind is SyntheticKind.NUMERIC:
            if self.distribution is NumericDistribution.UNIFORM \
                    and not self.low < self.high:
                raise ConfigError(f"Covariável '{self.name}': low deve ser "
                                  f"menor que high.")
            if self.distribution is NumericDistribution.NORMAL \
                    and self.sd <= 0:
                raise ConfigError(f"Covariável '{self.name}': sd deve ser "
                                  f"positivo.")
            return
        if self.levels < 2:
            raise ConfigError(f"Covariável '{self.name}' precisa de pelo "
                              f"menos 2 níveis.")
        if self.probabilities is not None:
            p = np.asarray(self.probabilities, dtype=np.float64)
            if p.size != self.levels or (p < 0).any() \
                    or not np.isclose(p.sum(), 1.0):
                raise ConfigError(
                    f"Covariável '{self.name}': probabilidades inválidas "
                    f"{list(self.probabilities)} para {self.levels} níveis.")
        if self.labels is not None and len(self.labels) != self.levels:
            raise ConfigError(f"Covariável '{self.name}': {len(self.labels)} "
                              f"rótulos para {self.levels} níveis.")

    @classmethod
    def from_dict(cls, raw: Dict) -> "CovariateSpec":
        try:
            return cls(
                name=raw["name"],
                kind=SyntheticKind(raw.get("kind", "categorical")),
                levels=int(raw.get("levels", 2)),
                probabilities=(tuple(raw["probabilities"])
                               if raw.get("probabilities") else None),
                labels=tuple(raw["labels"]) if raw.get("labels") else None,
                distribution=NumericDistribution(
                    raw.get("distribution", "uniform")),
                low=float(raw.get("low", 0.0)),
                high=float(raw.get("high", 1.0)),
                mean=float(raw.get("mean", 0.0)),
                sd=float(raw.get("sd", 1.0)))
        except KeyError as e:
            raise ConfigError(f"Covariável sintética sem a chave {e}.")
        except ValueError as e:
            raise ConfigError(f"Covariável sintética inválida: {e}")

    def to_dict(self) -> Dict:
        out = {"name": self.name, "kind": self.kind.value}
        if self.kind is SyntheticKind.NUMERIC:
            out.update(distribution=self.distribution.value, low=self.low,
                       high=self.high, mean=self.mean, sd=self.sd)
        else:
            out.update(levels=self.levels,
                       probabilities=(list(self.probabilities)
                                      if self.probabilities else None),
                       labels=list(self.labels) if self.labels else None)
        return out


@dataclass(frozen=True)
class Condition:
    """Predicado sobre uma covariável: códigos em ``levels`` ou low <= x < high."""
    covariate: str
    levels: Optional[Tuple[int, ...]] = None
    low: Optional[float] = None
    high: Optional[float] = None

    def matches(self, values: np.ndarray) -> np.ndarray:
        mask = np.ones(values.shape[0], dtype=bool)
        if self.levels is not None:
            mask &= np.isin(values, self.levels)
        if self.low is not None:
            mask &= values >= self.low
        if self.high is not None:
            mask &= values < self.high
        return mask

    @classmethod
    def from_dict(cls, raw: Dict) -> "Condition":
        if "covariate" not in raw:
            raise ConfigError("Condição sem a chave 'covariate'.")
        levels = raw.get("levels")
        return cls(raw["covariate"],
                   tuple(int(v) for v in levels) if levels is not None else None,
                   raw.get("low"), raw.get("high"))

    def to_dict(self) -> Dict:
        return {"covariate": self.covariate,
                "levels": list(self.levels) if self.levels is not None else None,
                "low": self.low, "high": self.high}


@dataclass(frozen=True)
class PlantedEffect:
    """Efeito local somado ao tratamento de quem satisfaz todas as condições."""
    name: str
    conditions: Tuple[Condition, ...]
    effect: float

    @classmethod
    def from_dict(cls, raw: Dict) -> "PlantedEffect":
        try:
            return cls(raw.get("name", "subgrupo"),
                       tuple(Condition.from_dict(c) for c in raw["conditions"]),
                       float(raw["effect"]))
        except KeyError as e:
            raise ConfigError(f"Efeito plantado sem a chave {e}.")

    def to_dict(self) -> Dict:
        return {"name": self.name, "effect": self.effect,
                "conditions": [c.to_dict() for c in self.conditions]}


@dataclass(frozen=True)
class GeneratorSpec:
    n: int
    covariates: Tuple[CovariateSpec, ...]
    assignment_probability: float = 0.5
    n_treated: Optional[int] = None
    response: ResponseKind = ResponseKind.BINARY
    base_rate: float = 0.18
    response_mean: float = 0.0
    noise_scale: float = 1.0
    planted: Tuple[PlantedEffect, ...] = ()
    drift: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "response", ResponseKind(self.response))
        self.validate()

    def validate(self):
        if self.n < 2:
            raise ConfigError(f"n deve ser pelo menos 2 (recebido {self.n}).")
        if not self.covariates:
            raise ConfigError("O gerador precisa de pelo menos uma covariável.")
        names = [c.name for c in self.covariates]
        if len(set(names)) != len(names):
            raise ConfigError(f"Nomes de covariáveis repetidos: {names}")
        for cov in self.covariates:
            cov.validate()
        if not 0.0 < self.assignment_probability < 1.0:
            raise ConfigError(f"Probabilidade de tratamento fora de (0,1): "
                              f"{self.assignment_probability}")
        if self.n_treated is not None and not 0 < self.n_treated < self.n:
            raise ConfigError(f"n_treated deve ficar entre 1 e n-1 "
                              f"(recebido {self.n_treated}).")
        if self.response is ResponseKind.BINARY \
                and not 0.0 <= self.base_rate <= 1.0:
            raise ConfigError(f"Taxa base fora de [0,1]: {self.base_rate}")
        if self.noise_scale < 0:
            raise ConfigError("noise_scale não pode ser negativo.")
        declared = {c.name: c for c in self.covariates}
        for planted in self.planted:
            for condition in planted.conditions:
                cov = declared.get(condition.covariate)
                if cov is None:
                    raise ConfigError(
                        f"Efeito '{planted.name}' usa a covariável não "
                        f"declarada '{condition.covariate}'.")
                if condition.levels is not None and (
                        cov.kind is SyntheticKind.NUMERIC
                        or max(condition.levels) >= cov.levels):
                    raise ConfigError(
                        f"Efeito '{planted.name}': níveis {condition.levels} "
                        f"inválidos para '{cov.name}'.")

    @classmethod
    def from_dict(cls, raw: Dict) -> "GeneratorSpec":
        try:
            return cls(
                n=int(raw["n"]),
                covariates=tuple(CovariateSpec.from_dict(c)
                                 for c in raw["covariates"]),
                assignment_probability=float(
                    raw.get("assignment_probability", 0.5)),
                n_treated=(int(raw["n_treated"])
                           if raw.get("n_treated") is not None else None),
                response=ResponseKind(raw.get("response", "binary")),
                base_rate=float(raw.get("base_rate", 0.18)),
                response_mean=float(raw.get("response_mean", 0.0)),
                noise_scale=float(raw.get("noise_scale", 1.0)),
                planted=tuple(PlantedEffect.from_dict(p)
                              for p in raw.get("planted", [])),
                drift=float(raw.get("drift", 0.0)))
        except KeyError as e:
            raise ConfigError(f"Especificação do gerador sem a chave {e}.")
        except ValueError as e:
            raise ConfigError(f"Especificação do gerador inválida: {e}")

    def to_dict(self) -> Dict:
        return {
            "n": self.n,
            "covariates": [c.to_dict() for c in self.covariates],
            "assignment_probability": self.assignment_probability,
            "n_treated": self.n_treated,
            "response": self.response.value,
            "base_rate": self.base_rate,
            "response_mean": self.response_mean,
            "noise_scale": self.noise_scale,
            "planted": [p.to_dict() for p in self.planted],
            "drift": self.drift,
        }


@dataclass(frozen=True, eq=False)
class TruthRecord:
    """
    Verdade oculta de uma geração: desfechos potenciais, efeito individual
    realizado, efeito esperado e pertencimento a cada subgrupo plantado.
    Fica fora do Dataset.
    """
    outcome_treated: np.ndarray
    outcome_control: np.ndarray
    expected_effect: np.ndarray
    membership: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def tau(self) -> np.ndarray:
        return self.outcome_treated - self.outcome_control

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({
            "unit": np.arange(self.tau.shape[0]),
            "y_t": self.outcome_treated,
            "y_c": self.outcome_control,
            "tau": self.tau,
            "expected_effect": self.expected_effect,
        })
        for name, member in self.membership.items():
            frame[f"subgroup_{name}"] = member.astype(int)
        return frame


def _draw_covariate(spec: CovariateSpec, n: int,
                    rng: np.random.Generator) -> Tuple[Covariate, np.ndarray]:
    if spec.kind is SyntheticKind.NUMERIC:
        if spec.distribution is NumericDistribution.UNIFORM:
            raw = rng.uniform(spec.low, spec.high, size=n)
        else:
            raw = rng.normal(spec.mean, spec.sd, size=n)
        return ordered_from_numeric(spec.name, raw), raw
    codes = rng.choice(spec.levels, size=n, p=spec.probabilities)
    labels = spec.labels or tuple(str(i) for i in range(spec.levels))
    kind = (CovariateKind.ORDERED if spec.kind is SyntheticKind.ORDERED
            else CovariateKind.CATEGORICAL)
    return Covariate(spec.name, kind, codes, labels), codes


def generate(spec: GeneratorSpec,
             seed: Optional[int] = None) -> Tuple[Dataset, TruthRecord]:
    """
    Sorteia um ensaio randomizado a partir dos desfechos potenciais.

    Ordem dos sorteios: covariáveis IID, desfechos potenciais (ambos, por
    unidade) e só então W, independente de tudo. Respostas binárias usam um
    uniforme comum às duas versões do desfecho, de modo que τ_i = 0 sempre
    que as probabilidades de sucesso coincidem.

    Args:
        spec (GeneratorSpec): Especificação validada.
        seed (Optional[int]): Semente.

    Returns:
        Tuple[Dataset, TruthRecord]: Dados observáveis e a verdade oculta.
    """
    rng = np.random.default_rng(seed)
    covariates: List[Covariate] = []
    raw: Dict[str, np.ndarray] = {}
    for cov_spec in spec.covariates:
        cov, values = _draw_covariate(cov_spec, spec.n, rng)
        covariates.append(cov)
        raw[cov_spec.name] = values

    effect = np.full(spec.n, spec.drift, dtype=np.float64)
    membership = {}
    for planted in spec.planted:
        member = np.ones(spec.n, dtype=bool)
        for condition in planted.conditions:
            member &= condition.matches(raw[condition.covariate])
        membership[planted.name] = member
        effect[member] += planted.effect
        logger.debug(f"Subgrupo '{planted.name}': {int(member.sum())} "
                     f"unidades, efeito {planted.effect}.")

    if spec.response is ResponseKind.BINARY:
        p_control = np.full(spec.n, spec.base_rate)
        p_treated = p_control + effect
        clamped = (p_treated < 0.0) | (p_treated > 1.0)
        if clamped.any():
            logger.warning(f"{int(clamped.sum())} probabilidade(s) de sucesso "
                           f"fora de [0,1] ajustada(s) ao limite.")
            p_treated = np.clip(p_treated, 0.0, 1.0)
        u = rng.uniform(size=spec.n)
        outcome_control = (u < p_control).astype(np.float64)
        outcome_treated = (u < p_treated).astype(np.float64)
        expected = p_treated - p_control
    else:
        outcome_control = spec.response_mean + spec.noise_scale * \
            rng.standard_normal(spec.n)
        outcome_treated = outcome_control + effect
        expected = effect

    if spec.n_treated is not None:
        treatment = np.zeros(spec.n, dtype=np.int8)
        treatment[rng.choice(spec.n, size=spec.n_treated, replace=False)] = 1
    else:
        treatment = (rng.uniform(size=spec.n)
                     < spec.assignment_probability).astype(np.int8)
    response = np.where(treatment == 1, outcome_treated, outcome_control)

    data = Dataset(response, treatment, tuple(covariates))
    truth = TruthRecord(outcome_treated, outcome_control, expected, membership)
    logger.info(f"Gerados {spec.n} registros sintéticos, {data.n_treated} "
                f"tratados.")
    return data, truth


_HIGH_RISK_SHARE = 116 / 1559


def _application_covariates() -> List[CovariateSpec]:
    return [
        CovariateSpec("idade", SyntheticKind.NUMERIC, low=18.0, high=70.0),
        CovariateSpec("antecedentes", SyntheticKind.NUMERIC,
                      distribution=NumericDistribution.NORMAL, mean=5.0,
                      sd=2.0),
        CovariateSpec("sexo", SyntheticKind.CATEGORICAL, 2,
                      (0.8, 0.2), ("masculino", "feminino")),
        CovariateSpec("raca", SyntheticKind.CATEGORICAL, 3,
                      (0.6, 0.3, 0.1), ("a", "b", "c")),
        CovariateSpec("regiao", SyntheticKind.CATEGORICAL, 5),
        CovariateSpec("escolaridade", SyntheticKind.ORDERED, 4,
                      (0.3, 0.4, 0.2, 0.1)),
        CovariateSpec("renda", SyntheticKind.ORDERED, 5),
        CovariateSpec("crime_violento", SyntheticKind.CATEGORICAL, 2,
                      (0.7, 0.3), ("não", "sim")),
        CovariateSpec("emprego", SyntheticKind.CATEGORICAL, 3,
                      (0.5, 0.3, 0.2), ("nenhum", "parcial", "integral")),
        CovariateSpec("risco", SyntheticKind.CATEGORICAL, 4,
                      (0.4, 0.3, 0.3 - _HIGH_RISK_SHARE, _HIGH_RISK_SHARE),
                      ("baixo", "medio", "elevado", "alto")),
    ]


def application_template(n: int = 1559, effect: float = 0.165,
                         base_rate: float = 0.18) -> GeneratorSpec:
    """
    Cenário no formato da aplicação de referência: resposta binária com taxa
    base 0,18, dez covariáveis e um subgrupo plantado de cerca de 116
    unidades (nível "alto" de ``risco``).
    """
    return GeneratorSpec(
        n=n, covariates=tuple(_application_covariates()),
        base_rate=base_rate,
        planted=(PlantedEffect("risco_alto",
                               (Condition("risco", levels=(3,)),), effect),))


def null_template(n: int = 1500, base_rate: float = 0.18) -> GeneratorSpec:
    """Mesmas dez covariáveis, sem nenhum efeito de tratamento."""
    return GeneratorSpec(n=n, covariates=tuple(_application_covariates()),
                         base_rate=base_rate)


def power_template(n: int = 1500, subgroup_size: int = 200,
                   effect: float = 0.3,
                   base_rate: float = 0.18) -> GeneratorSpec:
    """Subgrupo plantado de ``subgroup_size`` unidades esperadas em ``regiao``."""
    share = subgroup_size / n
    rest = (1.0 - share) / 4
    covariates = [
        spec if spec.name != "regiao" else
        CovariateSpec("regiao", SyntheticKind.CATEGORICAL, 5,
                      (rest, rest, rest, rest, share))
        for spec in _application_covariates()]
    return GeneratorSpec(
        n=n, covariates=tuple(covariates), base_rate=base_rate,
        planted=(PlantedEffect("regiao_4", (Condition("regiao", levels=(4,)),),
                               effect),))


def subgroup_covariates(spec: GeneratorSpec) -> Sequence[str]:
    """Covariáveis que definem algum subgrupo plantado."""
    return sorted({c.covariate for p in spec.planted for c in p.conditions})
