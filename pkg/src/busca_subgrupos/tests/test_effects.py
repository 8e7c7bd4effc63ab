import math
import unittest

import numpy as np

from src.busca_subgrupos.effects import (center, delta_loss, estimate_effect,
                                         global_ate, local_effect, node_loss,
                                         welch_df)
from src.busca_subgrupos.exceptions import (ConfigError, DegenerateNodeError,
                                            EmptyArmError,
                                            InsufficientArmError)
from src.busca_subgrupos.splits import enumerate_splits
from src.busca_subgrupos.stump import SplitEvaluator
from src.busca_subgrupos.tests.helpers import (configure_test_logging,
                                               hand_fixture, make_dataset,
                                               ordered, random_dataset)


class TestEfeitoLocal(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        configure_test_logging()

    def test_diferenca_de_medias(self):
        estimate = estimate_effect([1, 0, 0, 0], [1, 1, 0, 0])
        self.assertAlmostEqual(estimate.ate, 0.5)
        self.assertEqual((estimate.n_t, estimate.n_c), (2, 2))

    def test_ate_global(self):
        data = make_dataset([1, 0, 0, 0], [1, 1, 0, 0], ordered("x", [0, 1, 0, 1]))
        self.assertAlmostEqual(global_ate(data).ate, 0.5)

    def test_no_centrado_calculado_a_mao(self):
        data = make_dataset([1, 1, 0, 0, 0, 0, 0, 0], [1, 1, 1, 1, 0, 0, 0, 0],
                            ordered("x", np.arange(8) % 2))
        effect = local_effect(data, np.arange(8), 0.0)
        self.assertAlmostEqual(effect.centered, 0.5)
        self.assertAlmostEqual(effect.local.se, math.sqrt((1 / 3) / 4))
        self.assertAlmostEqual(effect.local.se, 0.288675, places=6)
        self.assertAlmostEqual(effect.t, math.sqrt(3), places=6)

    def test_centragem_pelo_valor_global(self):
        effect = center(estimate_effect([3, 1, 0, 0], [1, 1, 0, 0]), 1.5)
        self.assertAlmostEqual(effect.centered, 0.5)
        self.assertAlmostEqual(effect.global_ate, 1.5)

    def test_braco_vazio(self):
        with self.assertRaises(EmptyArmError):
            estimate_effect([1, 2, 3], [1, 1, 1])

    def test_braco_insuficiente(self):
        data = hand_fixture()
        with self.assertRaises(InsufficientArmError):
            local_effect(data, [0, 3, 4], 0.0)

    def test_no_degenerado(self):
        data = make_dataset([1, 1, 0, 0], [1, 1, 0, 0], ordered("x", [0, 1, 0, 1]))
        with self.assertRaises(DegenerateNodeError):
            local_effect(data, np.arange(4), 0.0)

    def test_se_indefinido_com_um_tratado(self):
        estimate = estimate_effect([2, 0, 1], [1, 0, 0])
        self.assertIsNone(estimate.se)
        self.assertIsNone(center(estimate, 0.0).t)

    def test_equivale_a_inclinacao_de_mqo(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            w = rng.permutation(np.arange(30) % 2)
            y = rng.normal(size=30) + 0.7 * w
            design = np.column_stack([np.ones(30), w])
            slope = np.linalg.lstsq(design, y, rcond=None)[0][1]
            self.assertAlmostEqual(estimate_effect(y, w).ate, slope, places=10)

    def test_equivariancia_de_escala(self):
        rng = np.random.default_rng(4)
        w = rng.permutation(np.arange(20) % 2)
        y = rng.normal(size=20)
        base = center(estimate_effect(y, w), 0.1)
        scaled = center(estimate_effect(3.0 * y + 7.0, w), 0.3)
        self.assertAlmostEqual(scaled.centered, 3.0 * base.centered, places=10)
        self.assertAlmostEqual(scaled.t, base.t, places=10)


class TestEstabilidadeNumerica(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(4)
        self.w = rng.permutation(np.arange(20) % 2)
        self.y = rng.normal(size=20)
        self.base = center(estimate_effect(self.y, self.w), 0.1)

    def test_escalas_extremas(self):
        for a in (1e-7, 1e7):
            scaled = center(estimate_effect(a * self.y, self.w), a * 0.1)
            self.assertIsNotNone(scaled.t)
            self.assertTrue(math.isclose(scaled.t, self.base.t,
                                         rel_tol=1e-9))
            self.assertTrue(math.isclose(scaled.centered,
                                         a * self.base.centered,
                                         rel_tol=1e-9))

    def test_deslocamento_grande(self):
        shifted = center(estimate_effect(self.y + 1e8, self.w), 0.1)
        self.assertTrue(math.isclose(shifted.t, self.base.t, rel_tol=1e-5))

    def test_variacao_pequena_em_torno_de_media_grande(self):
        rng = np.random.default_rng(11)
        y = 1000.0 + 0.001 * rng.normal(size=40)
        data = make_dataset(y, np.arange(40) % 2,
                            ordered("x", np.arange(40) % 4))
        effect = local_effect(data, np.arange(40), 1000.0)
        self.assertGreater(effect.local.se, 0.0)
        self.assertIsNotNone(effect.t)

    def test_somas_vetorizadas_com_deslocamento(self):
        rng = np.random.default_rng(8)
        data = random_dataset(rng, n=30, n_covariates=3)
        for shift in (1e6, 1e8):
            shifted = data.with_response(data.response + shift)
            c = global_ate(shifted).ate
            evaluator = SplitEvaluator(shifted, enumerate_splits(shifted, 1))
            _, effects = evaluator.evaluate(shifted.treatment, c)
            for index in np.flatnonzero(effects.has_t):
                split, child = evaluator.split_of(index)
                mask = split.left_mask(shifted)
                if child.value == "right":
                    mask = ~mask
                scalar = local_effect(shifted, np.flatnonzero(mask), c)
                self.assertTrue(math.isclose(effects.t[index], scalar.t,
                                             rel_tol=1e-6, abs_tol=1e-6))


class TestPerda(unittest.TestCase):
    def test_reducao_de_perda(self):
        self.assertAlmostEqual(delta_loss(10, 4, 4, 0.5), 6.0)

    def test_perdas_iguais_nao_reduzem(self):
        for p in (0.1, 0.5, 0.9):
            self.assertAlmostEqual(delta_loss(2.5, 2.5, 2.5, p), 0.0)

    def test_proporcao_fora_do_intervalo(self):
        for p in (0.0, 1.0, -0.2, 1.5):
            with self.assertRaises(ConfigError):
                delta_loss(1, 1, 1, p)

    def test_perda_do_no(self):
        data = hand_fixture()
        self.assertAlmostEqual(node_loss(data.response, data.treatment), 2 / 3)

    def test_reducao_no_exemplo_manual(self):
        data = hand_fixture()
        evaluator = SplitEvaluator(data, enumerate_splits(data, 1))
        self.assertEqual(evaluator.universe[0].covariate, "x")
        sums = evaluator.child_sums(data.treatment)
        self.assertAlmostEqual(evaluator.loss_reduction(sums)[0], 0.25)


class TestEfeitosVetorizados(unittest.TestCase):
    def test_coincidem_com_estimativa_escalar(self):
        rng = np.random.default_rng(8)
        data = random_dataset(rng, n=30, n_covariates=3)
        c = global_ate(data).ate
        evaluator = SplitEvaluator(data, enumerate_splits(data, 1))
        _, effects = evaluator.evaluate(data.treatment, c)
        for index in range(evaluator.n_candidates):
            split, child = evaluator.split_of(index)
            mask = split.left_mask(data)
            if child.value == "right":
                mask = ~mask
            n_t = int(data.treatment[mask].sum())
            n_c = int(mask.sum()) - n_t
            if min(n_t, n_c) < 2:
                self.assertFalse(effects.eligible[index])
                continue
            scalar = center(estimate_effect(data.response[mask],
                                            data.treatment[mask]), c)
            self.assertAlmostEqual(effects.centered[index], scalar.centered,
                                   places=10)
            self.assertAlmostEqual(effects.t[index], scalar.t, places=8)

    def test_graus_de_liberdade_de_welch(self):
        # variâncias e tamanhos iguais: df = 2(n-1)
        self.assertAlmostEqual(welch_df(1.0, 10, 1.0, 10), 18.0)
        self.assertAlmostEqual(welch_df(0.0, 5, 0.0, 7), 10.0)


if __name__ == '__main__':
    unittest.main()
