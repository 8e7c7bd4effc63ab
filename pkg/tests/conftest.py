import json
import os

import numpy as np
import pytest
from dotenv import load_dotenv

load_dotenv()

ACEITACAO = os.getenv("TOCOATE_ACEITACAO", "0") == "1"

SMALL_GENERATOR = {
    "n": 240,
    "response": "numeric",
    "noise_scale": 1.0,
    "covariates": [
        {"name": "idade", "kind": "numeric", "low": 18, "high": 70},
        {"name": "regiao", "kind": "categorical", "levels": 3,
         "labels": ["norte", "centro", "sul"]},
        {"name": "renda", "kind": "ordered", "levels": 4},
    ],
    "planted": [
        {"name": "sul", "effect": 1.5,
         "conditions": [{"covariate": "regiao", "levels": [2]}]},
    ],
}


def _base_config(**overrides):
    config = {
        "generator": SMALL_GENERATOR,
        "bin_count": 5,
        "objectives": ["both"],
        "sizes": [20, 40],
        "depth": 2,
        "B": 60,
        "alpha": 0.05,
        "seed": 7,
        "workers": 1,
    }
    config.update(overrides)
    return {k: v for k, v in config.items() if v is not None}


@pytest.fixture
def write_config(tmp_path):
    """Grava uma configuração JSON em tmp_path e devolve o caminho."""
    def _write(name="config.json", **overrides):
        config = _base_config(output_dir=str(tmp_path / "saida"), **overrides)
        path = tmp_path / name
        path.write_text(json.dumps(config, ensure_ascii=False),
                        encoding="utf-8")
        return str(path)
    return _write


@pytest.fixture
def csv_dataset(tmp_path):
    """Arquivo CSV com um efeito concentrado em g == 'c'."""
    rng = np.random.default_rng(3)
    n = 200
    g = rng.choice(["a", "b", "c"], size=n)
    x = rng.integers(0, 6, size=n)
    w = rng.permutation(np.arange(n) % 2)
    y = rng.normal(size=n) + 3.0 * w * (g == "c")
    lines = ["resultado,tratado,grupo,faixa"]
    lines += [f"{y[i]:.6f},{w[i]},{g[i]},{x[i]}" for i in range(n)]
    path = tmp_path / "ensaio.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    schema = {"response": "resultado", "treatment": "tratado",
              "covariates": ["grupo", "faixa"], "categorical": ["grupo"]}
    return str(path), schema
