import json
import os
import tempfile
import unittest
import numpy as np

import Gradient_Reversal_Adaptation.Tests.Mock as Mock
import Gradient_Reversal_Adaptation as GRA


class TestCheckpoint(unittest.TestCase):
    """
    Tests Gradient_Reversal_Adaptation.Models.Checkpoint.
    """

    def setUp(self) -> None:
        self.directory = tempfile.TemporaryDirectory()
        self.net = Mock.mock_network(f=2)
        self.optimizer = GRA.AdamState(0.01)
        GRA.adversarial_step(self.net, self.optimizer, Mock.mock_batch(6, 4, 4), 1.0)
        self.rng = np.random.default_rng(5)
        self.checkpoint = GRA.Checkpoint(
            self.net, self.optimizer, self.rng.bit_generator.state, epoch=3, stage="adapt"
        )

    def tearDown(self) -> None:
        self.directory.cleanup()

    def path(self, name: str) -> str:
        return os.path.join(self.directory.name, name)

    def test_round_trip(self):
        GRA.save_checkpoint(self.path("a.npz"), self.checkpoint)
        loaded = GRA.load_checkpoint(self.path("a.npz"))
        self.assertEqual(self.net, loaded.net)
        self.assertEqual(3, loaded.epoch)
        self.assertEqual("adapt", loaded.stage)
        self.assertEqual(self.optimizer.step_count, loaded.optimizer.step_count)
        for name, moment in self.optimizer.first_moment.items():
            np.testing.assert_array_equal(moment, loaded.optimizer.first_moment[name])

    def test_restored_generator_continues(self):
        GRA.save_checkpoint(self.path("a.npz"), self.checkpoint)
        restored = np.random.default_rng()
        restored.bit_generator.state = GRA.load_checkpoint(self.path("a.npz")).rng_state
        np.testing.assert_array_equal(self.rng.permutation(20), restored.permutation(20))

    def test_without_optimizer(self):
        GRA.save_checkpoint(self.path("a.npz"), GRA.Checkpoint(Mock.mock_network()))
        loaded = GRA.load_checkpoint(self.path("a.npz"))
        self.assertIsNone(loaded.optimizer)
        self.assertFalse(loaded.net.has_domain_head)
        self.assertEqual("train", loaded.stage)

    def test_saves_are_identical(self):
        GRA.save_checkpoint(self.path("a.npz"), self.checkpoint)
        GRA.save_checkpoint(self.path("b.npz"), self.checkpoint)
        with open(self.path("a.npz"), "rb") as a, open(self.path("b.npz"), "rb") as b:
            self.assertEqual(a.read(), b.read())

    def test_garbage_file(self):
        with open(self.path("garbage.npz"), "wb") as file:
            file.write(b"no checkpoint at all")
        self.assertRaises(GRA.Exceptions.FormatError, lambda: GRA.load_checkpoint(self.path("garbage.npz")))

    def test_missing_file(self):
        self.assertRaises(GRA.Exceptions.FormatError, lambda: GRA.load_checkpoint(self.path("missing.npz")))

    def test_missing_meta(self):
        np.savez(self.path("plain.npz"), weights=np.zeros(3))
        self.assertRaises(GRA.Exceptions.FormatError, lambda: GRA.load_checkpoint(self.path("plain.npz")))

    def rewrite(self, edit) -> str:
        GRA.save_checkpoint(self.path("a.npz"), self.checkpoint)
        with np.load(self.path("a.npz")) as archive:
            arrays = {name: archive[name] for name in archive.files}
        meta = json.loads(str(arrays["meta"]))
        edit(meta, arrays)
        arrays["meta"] = np.array(json.dumps(meta))
        np.savez(self.path("edited.npz"), **arrays)
        return self.path("edited.npz")

    def test_unknown_version(self):
        path = self.rewrite(lambda meta, arrays: meta.update(format_version=99))
        self.assertRaises(GRA.Exceptions.FormatError, lambda: GRA.load_checkpoint(path))

    def test_missing_parameter(self):
        path = self.rewrite(lambda meta, arrays: arrays.pop("main.0.bias"))
        self.assertRaises(GRA.Exceptions.FormatError, lambda: GRA.load_checkpoint(path))

    def test_shape_mismatch(self):
        def widen(meta, arrays):
            arrays["main.0.weights"] = np.zeros((7, 8))

        self.assertRaises(GRA.Exceptions.IntegrityError, lambda: GRA.load_checkpoint(self.rewrite(widen)))
