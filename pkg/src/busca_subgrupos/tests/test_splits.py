import itertools
import unittest

import numpy as np

from src.busca_subgrupos.exceptions import ConfigError, EmptySplitUniverseError
from src.busca_subgrupos.splits import (SubsetRule, ThresholdRule,
                                        apply_split, enumerate_splits)
from src.busca_subgrupos.tests.helpers import (candidate_nodes, categorical,
                                               configure_test_logging,
                                               make_dataset, ordered,
                                               random_dataset)


def _balanced(cov):
    n = cov.values.shape[0]
    return make_dataset(np.arange(n, dtype=float), np.arange(n) % 2, cov)


class TestEnumeracao(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        configure_test_logging()

    def test_categorica_tres_niveis(self):
        data = _balanced(categorical("crime", np.tile([0, 1, 2], 4),
                                     ["a", "b", "c"]))
        universe = enumerate_splits(data, 1)
        self.assertEqual(len(universe), 3)
        self.assertEqual([s.description for s in universe],
                         ["crime in {a}", "crime in {a,b}", "crime in {a,c}"])
        self.assertEqual([s.complement_description for s in universe],
                         ["crime in {b,c}", "crime in {c}", "crime in {b}"])

    def test_categorica_oito_niveis(self):
        data = _balanced(categorical("c", np.tile(np.arange(8), 4)))
        self.assertEqual(len(enumerate_splits(data, 1)), 2 ** 7 - 1)

    def test_ordenada_dez_faixas(self):
        data = _balanced(ordered("x", np.tile(np.arange(10), 2)))
        universe = enumerate_splits(data, 1)
        self.assertEqual(len(universe), 9)
        self.assertTrue(all(isinstance(s.rule, ThresholdRule)
                            for s in universe))
        self.assertEqual(universe[0].description, "x <= 0")
        self.assertEqual(universe[0].complement_description, "x > 0")

    def test_filtro_de_tamanho(self):
        skewed = ordered("raro", [0] * 9 + [1])
        even = ordered("par", np.arange(10) % 2)
        data = make_dataset(np.arange(10.0), np.arange(10) % 2, skewed, even)
        universe = enumerate_splits(data, 2)
        self.assertEqual(universe.covariates(), ["par"])
        for split in universe:
            self.assertGreaterEqual(min(split.n_left, split.n_right), 2)
            self.assertEqual(split.n_left + split.n_right, 10)

    def test_universo_vazio(self):
        data = _balanced(ordered("x", [0] * 9 + [1]))
        with self.assertRaises(EmptySplitUniverseError):
            enumerate_splits(data, 2)

    def test_tamanho_minimo_invalido(self):
        data = _balanced(ordered("x", np.arange(4) % 2))
        with self.assertRaises(ConfigError):
            enumerate_splits(data, 0)

    def test_niveis_nao_observados_sao_ignorados(self):
        cov = categorical("c", [0, 2, 0, 2, 3, 3], ["a", "b", "c", "d"])
        universe = enumerate_splits(_balanced(cov), 1)
        self.assertEqual(len(universe), 3)
        self.assertTrue(all(1 not in s.rule.levels for s in universe))

    def test_covariavel_excluida(self):
        data = make_dataset(np.arange(8.0), np.arange(8) % 2,
                            ordered("x", np.arange(8) // 4),
                            ordered("z", np.arange(8) % 4))
        universe = enumerate_splits(data, 1, excluded=["x"])
        self.assertEqual(universe.covariates(), ["z"])

    def test_monotonia_no_tamanho_minimo(self):
        rng = np.random.default_rng(7)
        data = random_dataset(rng, n=30, n_covariates=4)
        small = {(s.covariate, s.rule) for s in enumerate_splits(data, 2)}
        large = {(s.covariate, s.rule) for s in enumerate_splits(data, 6)}
        self.assertTrue(large <= small)

    def test_deterministico(self):
        rng = np.random.default_rng(3)
        data = random_dataset(rng)
        first = [s.to_dict() for s in enumerate_splits(data, 2)]
        second = [s.to_dict() for s in enumerate_splits(data, 2)]
        self.assertEqual(first, second)

    def test_exaustivo_contra_forca_bruta(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            data = random_dataset(rng, n=int(rng.integers(10, 31)),
                                  n_covariates=int(rng.integers(1, 5)))
            size = int(rng.integers(1, 5))
            expected = set()
            for name, block, mask in candidate_nodes(data, size):
                expected.add((name, frozenset(
                    [frozenset(np.unique(data.covariate(name).values[mask])
                               .tolist()),
                     frozenset(np.unique(data.covariate(name).values[~mask])
                               .tolist())])))
            try:
                universe = enumerate_splits(data, size)
            except EmptySplitUniverseError:
                self.assertEqual(expected, set())
                continue
            found = set()
            for split in universe:
                left, right = apply_split(split, data)
                values = data.covariate(split.covariate).values
                found.add((split.covariate, frozenset(
                    [frozenset(np.unique(values[left]).tolist()),
                     frozenset(np.unique(values[right]).tolist())])))
            self.assertEqual(found, expected)
            self.assertEqual(len(found), len(universe))


class TestAplicacao(unittest.TestCase):
    def test_limiar(self):
        data = _balanced(ordered("x", [0, 1, 0, 1]))
        split = enumerate_splits(data, 1)[0]
        left, right = apply_split(split, data)
        self.assertEqual(left.tolist(), [0, 2])
        self.assertEqual(right.tolist(), [1, 3])

    def test_subconjunto(self):
        data = _balanced(categorical("c", [0, 1, 2, 0], ["a", "b", "c"]))
        split = next(s for s in enumerate_splits(data, 1)
                     if s.rule == SubsetRule(frozenset({0})))
        left, right = apply_split(split, data)
        self.assertEqual(left.tolist(), [0, 3])
        self.assertEqual(right.tolist(), [1, 2])

    def test_filhos_particionam_os_dados(self):
        rng = np.random.default_rng(5)
        data = random_dataset(rng, n=20, n_covariates=3)
        for split in enumerate_splits(data, 1):
            left, right = apply_split(split, data)
            self.assertEqual(len(np.intersect1d(left, right)), 0)
            np.testing.assert_array_equal(
                np.sort(np.concatenate([left, right])), np.arange(data.n))
            self.assertEqual((len(left), len(right)),
                             (split.n_left, split.n_right))


class TestContagem(unittest.TestCase):
    def test_lei_de_contagem_categorica(self):
        for k in range(2, 7):
            data = _balanced(categorical("c", np.tile(np.arange(k), 2)))
            self.assertEqual(len(enumerate_splits(data, 1)), 2 ** (k - 1) - 1)

    def test_contagem_ordenada_de_niveis(self):
        # cada partição não ordenada aparece duas vezes na contagem ordenada
        k = 8
        unordered = 2 ** (k - 1) - 1
        self.assertEqual(2 * unordered, 2 ** k - 2)
        self.assertEqual(2 ** k - 2, 254)
        blocks = [c for r in range(1, k) for c in
                  itertools.combinations(range(k), r)]
        self.assertEqual(len(blocks), 254)
