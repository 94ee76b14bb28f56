import unittest
import numpy as np

import Gradient_Reversal_Adaptation.Tests.Mock as Mock
import Gradient_Reversal_Adaptation as GRA


class TestGradientReversalLayer(unittest.TestCase):
    """
    Tests Gradient_Reversal_Adaptation.Models.Network.grl_forward and grl_backward.
    """

    def test_forward_is_identity(self):
        for seed in range(100):
            x = np.random.default_rng(seed).normal(0.0, 10.0, (7, 5))
            self.assertTrue(np.array_equal(x, GRA.grl_forward(x)))

    def test_backward_negates_and_scales(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            g = rng.normal(0.0, 10.0, (7, 5))
            lambda_effective = float(rng.uniform(0.0, 5.0))
            self.assertTrue(np.array_equal(-lambda_effective * g, GRA.grl_backward(g, lambda_effective)))

    def test_backward_zero_coefficient(self):
        g = np.ones((2, 3))
        np.testing.assert_array_equal(np.zeros((2, 3)), GRA.grl_backward(g, 0.0))

    def test_negative_coefficient(self):
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.grl_backward(np.ones((1, 1)), -0.1))

    def test_node_uses_current_coefficient(self):
        node = GRA.GrlNode()
        node.lambda_effective = 1.5
        np.testing.assert_array_equal([[-3.0]], node.backward(np.array([[2.0]])))


class TestNetworkParams(unittest.TestCase):
    """
    Tests Gradient_Reversal_Adaptation.Models.Network.NetworkParams and the construction helpers.
    """

    def test_full_scale_parameter_count(self):
        self.assertEqual(17673315, GRA.count_parameters(759, [1024] * 8, 9315))

    def test_parameter_count_matches_layers(self):
        net = GRA.build_main_network(10, 4, [8, 6])
        self.assertEqual(GRA.count_parameters(10, [8, 6], 4), net.parameter_count)
        self.assertEqual(10 * 8 + 8 + 8 * 6 + 6 + 6 * 4 + 4, net.parameter_count)

    def test_main_network_layout(self):
        net = GRA.build_main_network(10, 4, [8, 6, 5])
        self.assertEqual(3, net.hidden_layer_count)
        self.assertEqual(10, net.n_input)
        self.assertEqual(4, net.n_classes)
        self.assertEqual(
            [GRA.Activation.Sigmoid] * 3 + [GRA.Activation.Softmax],
            [layer.spec.activation for layer in net.main_layers],
        )
        self.assertFalse(net.has_domain_head)
        self.assertEqual([], net.shared)

    def test_build_deterministic(self):
        self.assertEqual(GRA.build_main_network(5, 3, [4], seed=7), GRA.build_main_network(5, 3, [4], seed=7))
        self.assertNotEqual(GRA.build_main_network(5, 3, [4], seed=7), GRA.build_main_network(5, 3, [4], seed=8))

    def test_build_without_hidden_layers(self):
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.build_main_network(5, 3, []))

    def test_partition(self):
        net = Mock.mock_network(hidden=(8, 7, 6), f=2, adversary=(5, 4))
        self.assertEqual(2, len(net.shared))
        self.assertEqual(2, len(net.senone_head))
        self.assertEqual(3, len(net.domain_head))
        self.assertEqual(7, net.feature_dim)
        self.assertEqual(7, net.domain_head[0].spec.input_dim)
        self.assertEqual(2, net.domain_head[-1].spec.output_dim)
        self.assertEqual(
            [GRA.Activation.LeakyReLU] * 2 + [GRA.Activation.Softmax],
            [layer.spec.activation for layer in net.domain_head],
        )
        names = net.parameter_groups()
        self.assertEqual(2 * (2 + 2 + 3), len(names))
        self.assertIn("shared.1.weights", names)
        self.assertIn("senone.1.bias", names)
        self.assertIn("domain.2.weights", names)

    def test_partition_keeps_layers(self):
        net = Mock.mock_network(hidden=(8, 7, 6))
        attached = GRA.attach_domain_head(net, 3, [4])
        self.assertEqual(net.main_layers, attached.main_layers)
        self.assertEqual(1, len(attached.senone_head))
        self.assertFalse(net.has_domain_head)

    def test_attach_out_of_range(self):
        net = Mock.mock_network(hidden=(8, 7, 6))
        for f in [0, 4]:
            self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.attach_domain_head(net, f, [4]))

    def test_attach_twice(self):
        net = Mock.mock_network(f=1)
        self.assertRaises(GRA.Exceptions.StateError, lambda: GRA.attach_domain_head(net, 1, [4]))

    def test_attach_invalid_slope(self):
        net = Mock.mock_network()
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.attach_domain_head(net, 1, [4], slope=1.0))

    def test_detach(self):
        net = Mock.mock_network(f=2)
        detached = GRA.detach_domain_head(net)
        self.assertFalse(detached.has_domain_head)
        self.assertEqual(net.main_layers, detached.main_layers)
        self.assertRaises(GRA.Exceptions.StateError, lambda: GRA.detach_domain_head(detached))

    def test_domain_head_without_adversary_layers(self):
        net = GRA.attach_domain_head(Mock.mock_network(), 1, [])
        self.assertEqual(1, len(net.domain_head))
        self.assertEqual(GRA.Activation.Softmax, net.domain_head[0].spec.activation)

    def test_forward_probabilities(self):
        net = Mock.mock_network(f=1)
        probs = net.forward(np.random.default_rng(0).normal(size=(4, 6)))
        self.assertEqual((4, 3), probs.shape)
        np.testing.assert_allclose(np.ones(4), probs.sum(axis=1))

    def test_copy_is_deep(self):
        net = Mock.mock_network(f=1)
        copy = net.copy()
        self.assertEqual(net, copy)
        copy.domain_head[0].weights += 1.0
        self.assertNotEqual(net, copy)

    def test_inconsistent_layers(self):
        rng = np.random.default_rng(0)
        layers = [
            GRA.DenseLayer.initialize(GRA.LayerSpec(3, 4, GRA.Activation.Sigmoid), rng),
            GRA.DenseLayer.initialize(GRA.LayerSpec(5, 2, GRA.Activation.Softmax), rng),
        ]
        self.assertRaises(GRA.Exceptions.DimensionError, lambda: GRA.NetworkParams(layers))

    def test_softmax_only_at_the_end(self):
        rng = np.random.default_rng(0)
        layers = [
            GRA.DenseLayer.initialize(GRA.LayerSpec(3, 4, GRA.Activation.Softmax), rng),
            GRA.DenseLayer.initialize(GRA.LayerSpec(4, 2, GRA.Activation.Softmax), rng),
        ]
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.NetworkParams(layers))
        layers[-1] = GRA.DenseLayer.initialize(GRA.LayerSpec(4, 2, GRA.Activation.Sigmoid), rng)
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.NetworkParams(layers))
