import json
import os

import pytest

from src.busca_subgrupos.data import BinningStrategy
from src.busca_subgrupos.exceptions import ConfigError
from src.busca_subgrupos.stump import SearchObjective
from src.services.config import RUNTIME_KEYS, RunConfig

from .conftest import SMALL_GENERATOR


def test_ambos_os_objetivos():
    config = RunConfig.from_dict({"generator": SMALL_GENERATOR,
                                  "objectives": ["both", "max"]})
    assert config.search_objectives == [SearchObjective.MAX_ATE,
                                        SearchObjective.MIN_ATE]


def test_valores_padrao():
    config = RunConfig.from_dict({"generator": SMALL_GENERATOR})
    assert config.sizes == [100, 150, 200]
    assert config.B == 1000
    assert config.alpha == 0.05
    assert config.binning.strategy is BinningStrategy.EQUAL_WIDTH
    assert config.binning.bin_count == 10
    assert config.generator_spec.n == 240


@pytest.mark.parametrize("raw", [
    {},
    {"generator": SMALL_GENERATOR, "data_path": "dados.csv"},
    {"generator": SMALL_GENERATOR, "objectives": []},
    {"generator": SMALL_GENERATOR, "objectives": ["maior"]},
    {"generator": SMALL_GENERATOR, "sizes": [0, 10]},
    {"generator": SMALL_GENERATOR, "B": 0},
    {"generator": SMALL_GENERATOR, "null_method": "bootstrap"},
    {"generator": SMALL_GENERATOR, "honest_fraction": 1.0},
    {"generator": SMALL_GENERATOR, "bin_count": 1},
    {"generator": SMALL_GENERATOR, "interactions": [["a", "b", "c"]]},
    {"generator": SMALL_GENERATOR, "centering": "mediana"},
    {"generator": {"n": 10, "covariates": []}},
    {"generator": SMALL_GENERATOR, "desconhecida": True},
])
def test_configuracoes_invalidas(raw):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(raw)


def test_caminho_relativo_ao_arquivo(tmp_path):
    folder = tmp_path / "estudo"
    folder.mkdir()
    path = folder / "config.json"
    path.write_text(json.dumps({
        "data_path": "dados.csv",
        "schema": {"response": "y", "treatment": "w", "covariates": ["x"]},
    }), encoding="utf-8")
    config = RunConfig.from_file(str(path))
    assert config.data_path == str(folder.resolve() / "dados.csv")
    assert config.data_schema.response == "y"


def test_json_invalido(tmp_path):
    path = tmp_path / "ruim.json"
    path.write_text("{ nao e json", encoding="utf-8")
    with pytest.raises(ConfigError):
        RunConfig.from_file(str(path))


def test_sobrescrita_ignora_none():
    config = RunConfig.from_dict({"generator": SMALL_GENERATOR, "seed": 1})
    changed = config.override(seed=None, B=50, workers=None)
    assert changed.seed == 1
    assert changed.B == 50
    assert config.B == 1000


def test_eco_sem_chaves_de_execucao():
    config = RunConfig.from_dict({"generator": SMALL_GENERATOR})
    echo = config.to_dict()
    assert not set(RUNTIME_KEYS) & set(echo)
    assert set(RUNTIME_KEYS) <= set(config.to_dict(runtime=True))
    again = RunConfig.from_dict(echo)
    assert again.to_dict() == echo


def test_configuracoes_de_exemplo_sao_validas():
    root = os.path.join(os.path.dirname(__file__), os.pardir, "config")
    for name in ("aplicacao.json", "nula.json"):
        config = RunConfig.from_file(os.path.join(root, name))
        assert config.generator_spec.n in (1559, 1500)
        assert config.sizes == [100, 150, 200]
