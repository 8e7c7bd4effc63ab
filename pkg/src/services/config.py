import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from src.busca_subgrupos.data import (DEFAULT_CARDINALITY_CAP, BinningSpec,
                                      BinningStrategy, Schema)
from src.busca_subgrupos.exceptions import ConfigError
from src.busca_subgrupos.honest import HonestCentering
from src.busca_subgrupos.inference import (DEFAULT_EXHAUSTIVE_CAP,
                                           DEFAULT_PERMUTATIONS)
from src.busca_subgrupos.stump import Centering, Criterion, SearchObjective
from src.busca_subgrupos.synthetic import GeneratorSpec

load_dotenv()


class Config:
    WORKERS = int(os.getenv("TOCOATE_WORKERS", "1"))
    LOG_LEVEL = os.getenv("TOCOATE_LOG_LEVEL", "INFO")
    OUTPUT_DIR = Path(os.getenv("TOCOATE_OUTPUT_DIR", "resultados"))
    EXHAUSTIVE_CAP = int(os.getenv("TOCOATE_EXHAUSTIVE_CAP",
                                   str(DEFAULT_EXHAUSTIVE_CAP)))
    CARDINALITY_CAP = int(os.getenv("TOCOATE_CARDINALITY_CAP",
                                    str(DEFAULT_CARDINALITY_CAP)))


NULL_METHODS = ("monte_carlo", "exhaustive")
# não alteram nenhum número do relatório
RUNTIME_KEYS = ("output_dir", "workers")


@dataclass
class RunConfig:
    """
    Configuração de uma execução, lida de um arquivo JSON. ``to_dict`` é
    ecoado no relatório e basta para repetir a execução.
    """
    data_path: Optional[str] = None
    schema: Optional[Dict[str, Any]] = None
    generator: Optional[Dict[str, Any]] = None
    binning_strategy: str = BinningStrategy.EQUAL_WIDTH.value
    bin_count: int = 10
    bin_columns: Optional[List[str]] = None
    collapse_rare: Optional[int] = None
    indicators: List[Dict[str, Any]] = field(default_factory=list)
    interactions: List[List[str]] = field(default_factory=list)
    objectives: List[str] = field(default_factory=lambda: ["max"])
    sizes: List[int] = field(default_factory=lambda: [100, 150, 200])
    depth: int = 3
    B: int = DEFAULT_PERMUTATIONS
    alpha: float = 0.05
    seed: int = 20240101
    null_method: str = "monte_carlo"
    honest_fraction: Optional[float] = None
    centering: str = Centering.GLOBAL.value
    honest_centering: str = HonestCentering.TEST.value
    criterion: str = Criterion.ATE.value
    output_dir: str = str(Config.OUTPUT_DIR)
    workers: int = Config.WORKERS
    excel: bool = False
    exhaustive_cap: int = Config.EXHAUSTIVE_CAP
    cardinality_cap: int = Config.CARDINALITY_CAP

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"Chaves desconhecidas na configuração: {unknown}")
        config = cls(**raw)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as f:
                raw = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"Arquivo de configuração não encontrado: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Configuração '{path}' não é JSON válido: {e}")
        if not isinstance(raw, dict):
            raise ConfigError(f"Configuração '{path}' deve ser um objeto JSON.")
        data_path = raw.get("data_path")
        if data_path and not os.path.isabs(data_path):
            raw["data_path"] = str(Path(path).resolve().parent / data_path)
        return cls.from_dict(raw)

    def to_dict(self, runtime: bool = False) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)
                if runtime or f.name not in RUNTIME_KEYS}

    def override(self, **values) -> "RunConfig":
        """Aplica valores da linha de comando (os ``None`` são ignorados)."""
        raw = self.to_dict(runtime=True)
        raw.update({k: v for k, v in values.items() if v is not None})
        return RunConfig.from_dict(raw)

    @property
    def search_objectives(self) -> List[SearchObjective]:
        expanded = []
        for objective in self.objectives:
            if objective == "both":
                expanded.extend([SearchObjective.MAX_ATE,
                                 SearchObjective.MIN_ATE])
            else:
                expanded.append(SearchObjective(objective))
        return list(dict.fromkeys(expanded))

    @property
    def binning(self) -> BinningSpec:
        return BinningSpec(BinningStrategy(self.binning_strategy),
                           self.bin_count)

    @property
    def generator_spec(self) -> Optional[GeneratorSpec]:
        if self.generator is None:
            return None
        return GeneratorSpec.from_dict(self.generator)

    @property
    def data_schema(self) -> Optional[Schema]:
        return Schema.from_dict(self.schema) if self.schema else None

    def validate(self):
        if (self.data_path is None) == (self.generator is None):
            raise ConfigError(
                "Informe exatamente um entre 'data_path' e 'generator'.")
        if not self.objectives:
            raise ConfigError("Informe pelo menos um objetivo.")
        try:
            self.search_objectives
            self.binning
            Centering(self.centering)
            HonestCentering(self.honest_centering)
            Criterion(self.criterion)
        except ValueError as e:
            raise ConfigError(f"Valor inválido na configuração: {e}")
        if not self.sizes or any(int(s) < 1 for s in self.sizes):
            raise ConfigError(f"Tamanhos mínimos inválidos: {self.sizes}")
        if self.depth < 1:
            raise ConfigError(f"depth deve ser pelo menos 1: {self.depth}")
        if self.B < 1:
            raise ConfigError(f"B deve ser pelo menos 1: {self.B}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha fora de (0,1): {self.alpha}")
        if self.null_method not in NULL_METHODS:
            raise ConfigError(f"null_method deve ser um de {NULL_METHODS}.")
        if self.honest_fraction is not None \
                and not 0.0 < self.honest_fraction < 1.0:
            raise ConfigError(
                f"honest_fraction fora de (0,1): {self.honest_fraction}")
        if self.workers < 1:
            raise ConfigError(f"workers deve ser pelo menos 1: {self.workers}")
        for pair in self.interactions:
            if len(pair) != 2:
                raise ConfigError(f"Interação deve ter duas covariáveis: {pair}")
        if self.generator is not None:
            self.generator_spec
        if self.schema is not None:
            self.data_schema
