import json
import os
import tempfile
import unittest
import numpy as np

import Gradient_Reversal_Adaptation.Tests.Mock as Mock
import Gradient_Reversal_Adaptation as GRA


class CoreCorpusTest(unittest.TestCase):
    def setUp(self) -> None:
        self.source = Mock.mock_dataset(20)
        self.target = Mock.mock_dataset(20, domain=GRA.Domain.Target, shift=1.0, seed=1)
        self.directory = tempfile.TemporaryDirectory()

    def tearDown(self) -> None:
        self.directory.cleanup()

    def path(self, *parts: str) -> str:
        return os.path.join(self.directory.name, *parts)

    @staticmethod
    def sorted_rows(matrix: np.ndarray) -> np.ndarray:
        return matrix[np.lexsort(matrix.T[::-1])]


class TestFrameDataset(CoreCorpusTest):
    """
    Tests Gradient_Reversal_Adaptation.Corpus.Dataset.FrameDataset.
    """

    def test_properties(self):
        self.assertEqual(60, self.source.n_frames)
        self.assertEqual(6, self.source.dims)
        self.assertEqual(6, self.source.n_utterances)
        self.assertEqual(3, self.source.n_classes)
        self.assertTrue(self.source.is_labeled)
        self.assertAlmostEqual(60 * 0.01 / 3600, self.source.hours_equivalent)

    def test_utterance_bounds(self):
        self.assertEqual([(i * 10, i * 10 + 10) for i in range(6)], self.source.utterance_bounds())
        np.testing.assert_array_equal(np.full(6, 10), self.source.utterance_frames())

    def test_strip_labels(self):
        stripped = self.source.strip_labels()
        self.assertFalse(stripped.is_labeled)
        np.testing.assert_array_equal(self.source.labels, stripped.reference_labels)
        self.assertRaises(GRA.Exceptions.DataError, lambda: stripped.require_labels())

    def test_select_utterances(self):
        selected = self.source.select_utterances([2, 0])
        np.testing.assert_array_equal(
            np.concatenate([self.source.features[20:30], self.source.features[0:10]]), selected.features
        )
        np.testing.assert_array_equal(np.repeat([0, 1], 10), selected.utterance_index)
        self.assertEqual(["utt00002", "utt00000"], selected.utterance_ids)
        self.assertEqual(0, self.source.select_utterances([]).n_frames)

    def test_concatenate_domains(self):
        mixed = GRA.concatenate([self.source, self.target])
        self.assertIs(GRA.Domain.Mixed, mixed.domain)
        self.assertFalse(mixed.is_labeled)
        np.testing.assert_array_equal(np.repeat([0, 1], 60), mixed.row_domains)
        np.testing.assert_array_equal(
            np.concatenate([self.source.labels, self.target.reference_labels]), mixed.reference_labels
        )
        self.assertEqual(12, mixed.n_utterances)
        self.assertEqual(list(range(12)), sorted(set(mixed.utterance_index.tolist())))

    def test_concatenate_same_domain(self):
        both = GRA.concatenate([self.source, Mock.mock_dataset(10, seed=3)])
        self.assertIs(GRA.Domain.Source, both.domain)
        self.assertTrue(both.is_labeled)
        self.assertEqual(90, both.n_frames)

    def test_require_labels_of_empty_dataset(self):
        empty = self.source.select_utterances([])
        self.assertRaises(GRA.Exceptions.DataError, lambda: empty.require_labels())

    def test_invalid_construction(self):
        features = np.zeros((4, 2))
        self.assertRaises(GRA.Exceptions.IntegrityError, lambda: GRA.FrameDataset(features, [0, 1, 0]))
        self.assertRaises(GRA.Exceptions.LabelError, lambda: GRA.FrameDataset(features, [0, 1, 0, 2], n_classes=2))
        self.assertRaises(
            GRA.Exceptions.IntegrityError, lambda: GRA.FrameDataset(features, utterance_index=[0, 1, 0, 1])
        )
        self.assertRaises(
            GRA.Exceptions.IntegrityError, lambda: GRA.FrameDataset(features, utterance_ids=["a", "b"])
        )

    def test_equality(self):
        self.assertEqual(Mock.mock_dataset(20), self.source)
        self.assertNotEqual(self.source.strip_labels(), self.source)


class TestSubsetHours(CoreCorpusTest):
    """
    Tests Gradient_Reversal_Adaptation.Corpus.Dataset.subset_hours.
    """

    def setUp(self) -> None:
        super(TestSubsetHours, self).setUp()
        self.data = Mock.mock_dataset(100)
        self.utterance_hours = 10 * 0.01 / 3600

    def test_nested(self):
        small = GRA.subset_hours(self.data, 5 * self.utterance_hours, np.random.default_rng(4))
        large = GRA.subset_hours(self.data, 12 * self.utterance_hours, np.random.default_rng(4))
        self.assertEqual(5, small.n_utterances)
        self.assertEqual(12, large.n_utterances)
        self.assertTrue(set(small.utterance_ids) <= set(large.utterance_ids))

    def test_whole_utterances(self):
        subset = GRA.subset_hours(self.data, 4.5 * self.utterance_hours, np.random.default_rng(0))
        self.assertEqual(5, subset.n_utterances)
        self.assertGreaterEqual(subset.hours_equivalent, 4.5 * self.utterance_hours)

    def test_everything(self):
        subset = GRA.subset_hours(self.data, self.data.hours_equivalent, np.random.default_rng(0))
        self.assertEqual(self.data.n_utterances, subset.n_utterances)

    def test_nothing(self):
        self.assertEqual(0, GRA.subset_hours(self.data, 0.0, np.random.default_rng(0)).n_frames)

    def test_invalid_requests(self):
        self.assertRaises(
            GRA.Exceptions.DataError,
            lambda: GRA.subset_hours(self.data, 2 * self.data.hours_equivalent, np.random.default_rng(0)),
        )
        self.assertRaises(GRA.Exceptions.DataError, lambda: GRA.subset_hours(self.data, -1.0, np.random.default_rng(0)))


class TestFeatureStats(CoreCorpusTest):
    def test_standardizes(self):
        standardized = GRA.FeatureStats.fit(self.source).apply(self.source)
        np.testing.assert_allclose(np.zeros(6), standardized.features.mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(np.ones(6), standardized.features.std(axis=0))
        np.testing.assert_array_equal(self.source.labels, standardized.labels)

    def test_keeps_domain_shift(self):
        stats = GRA.FeatureStats.fit(self.source)
        shifted = stats.apply(Mock.mock_dataset(20, shift=1.0))
        np.testing.assert_allclose(1.0 / stats.scale, shifted.features.mean(axis=0), rtol=1e-9)

    def test_constant_dimension(self):
        data = GRA.FrameDataset(np.ones((3, 2)), [0, 0, 0])
        self.assertTrue(np.all(np.isfinite(GRA.FeatureStats.fit(data).apply(data).features)))

    def test_errors(self):
        stats = GRA.FeatureStats.fit(self.source)
        self.assertRaises(GRA.Exceptions.DimensionError, lambda: stats.apply(GRA.FrameDataset(np.zeros((2, 3)))))
        self.assertRaises(GRA.Exceptions.DataError, lambda: GRA.FeatureStats.fit(self.source.select_utterances([])))


class TestMixedBatchIterator(CoreCorpusTest):
    """
    Tests Gradient_Reversal_Adaptation.Corpus.Batches.MixedBatchIterator.
    """

    def collect(self, iterator: GRA.MixedBatchIterator) -> list[GRA.Batch]:
        return [batch for batch in iterator]

    def test_epoch_partitions_union(self):
        iterator = GRA.MixedBatchIterator(self.source, self.target, 16, seed=0)
        batches = self.collect(iterator)
        self.assertEqual(8, len(batches))
        self.assertEqual(iterator.batches_per_epoch, len(batches))
        self.assertEqual([16] * 7 + [8], [batch.size for batch in batches])
        features = np.concatenate([batch.features for batch in batches])
        np.testing.assert_array_equal(
            self.sorted_rows(np.concatenate([self.source.features, self.target.features])), self.sorted_rows(features)
        )
        self.assertEqual(60, sum(batch.n_source for batch in batches))
        self.assertEqual(60, sum(batch.n_target for batch in batches))

    def test_target_rows_carry_no_labels(self):
        for batch in GRA.MixedBatchIterator(self.source, self.target, 16, seed=0):
            self.assertTrue(np.all(batch.labels[batch.target_mask] == GRA.UNLABELED))
            self.assertTrue(np.all(batch.labels[batch.source_mask] >= 0))

    def test_end_of_epoch(self):
        iterator = GRA.MixedBatchIterator(self.source, None, 100)
        iterator.next_batch()
        self.assertRaises(GRA.Exceptions.EndOfEpoch, lambda: iterator.next_batch())
        self.assertTrue(issubclass(GRA.Exceptions.EndOfEpoch, StopIteration))

    def test_new_epoch_reshuffles(self):
        iterator = GRA.MixedBatchIterator(self.source, self.target, 200, seed=1)
        first = GRA.next_batch(iterator)
        iterator.new_epoch()
        second = GRA.next_batch(iterator)
        self.assertEqual(1, iterator.epoch)
        self.assertFalse(np.array_equal(first.features, second.features))
        np.testing.assert_array_equal(self.sorted_rows(first.features), self.sorted_rows(second.features))

    def test_deterministic(self):
        a = self.collect(GRA.MixedBatchIterator(self.source, self.target, 16, seed=2))
        b = self.collect(GRA.MixedBatchIterator(self.source, self.target, 16, seed=2))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.features, y.features)

    def test_passed_generator(self):
        rng = np.random.default_rng(2)
        a = self.collect(GRA.MixedBatchIterator(self.source, self.target, 16, seed=7, rng=rng))
        b = self.collect(GRA.MixedBatchIterator(self.source, self.target, 16, seed=2))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.features, y.features)
        replayed = np.random.default_rng(2)
        replayed.permutation(120)
        self.assertEqual(replayed.bit_generator.state, rng.bit_generator.state)

    def test_source_only(self):
        batches = self.collect(GRA.MixedBatchIterator(self.source, None, 16))
        self.assertEqual(0, sum(batch.n_target for batch in batches))
        self.assertEqual(60, sum(batch.size for batch in batches))

    def test_errors(self):
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.MixedBatchIterator(self.source, self.target, 0))
        self.assertRaises(GRA.Exceptions.DataError, lambda: GRA.MixedBatchIterator(self.target, None, 16))
        narrow = Mock.mock_dataset(10, dims=4, domain=GRA.Domain.Target)
        self.assertRaises(GRA.Exceptions.DimensionError, lambda: GRA.MixedBatchIterator(self.source, narrow, 16))


class TestStorage(CoreCorpusTest):
    """
    Tests Gradient_Reversal_Adaptation.Corpus.Storage.
    """

    def test_round_trip(self):
        for name, data in [
            ("source", self.source),
            ("target", self.target),
            ("valid", Mock.mock_validation()),
        ]:
            with self.subTest(name=name):
                GRA.save_dataset(data, self.path(name))
                self.assertEqual(data, GRA.load_dataset(self.path(name)))

    def test_directory_layout(self):
        GRA.save_dataset(self.target, self.path("target"))
        self.assertTrue(os.path.isfile(self.path("target", "dataset.json")))
        self.assertEqual(6, len(os.listdir(self.path("target", "features"))))
        self.assertEqual(0, len(os.listdir(self.path("target", "labels"))))
        self.assertEqual(6, len(os.listdir(self.path("target", "reference"))))
        with open(self.path("target", "manifest.jsonl")) as manifest:
            entries = [json.loads(line) for line in manifest]
        self.assertEqual("channel4", entries[0]["channel"])
        self.assertIsNone(entries[0]["labels"])

    def test_overwrite_removes_old_shards(self):
        GRA.save_dataset(self.source, self.path("data"))
        smaller = self.target.select_utterances([0, 1])
        GRA.save_dataset(smaller, self.path("data"))
        self.assertEqual(2, len(os.listdir(self.path("data", "features"))))
        self.assertEqual(0, len(os.listdir(self.path("data", "labels"))))
        self.assertEqual(2, len(os.listdir(self.path("data", "reference"))))
        self.assertEqual(smaller, GRA.load_dataset(self.path("data")))

    def test_empty_utterance(self):
        data = GRA.FrameDataset(
            np.ones((4, 6)), [0, 1, 1, 0], utterance_index=[0, 0, 2, 2], utterance_ids=["a", "b", "c"]
        )
        with self.assertRaises(GRA.Exceptions.DataError) as context:
            GRA.save_dataset(data, self.path("empty"))
        self.assertIn("b", str(context.exception))
        self.assertFalse(os.path.exists(self.path("empty")))

    def write(self, name: str, content: bytes) -> str:
        with open(self.path(name), "wb") as file:
            file.write(content)
        return self.path(name)

    def assertFormatError(self, path: str, offset: int, reader=GRA.read_feature_file):
        with self.assertRaises(GRA.Exceptions.FormatError) as context:
            reader(path)
        self.assertEqual(offset, context.exception.offset)

    def test_feature_file_round_trip(self):
        features = np.random.default_rng(0).normal(size=(4, 3))
        GRA.write_feature_file(self.path("a.feat"), features)
        np.testing.assert_array_equal(features, GRA.read_feature_file(self.path("a.feat")))
        self.assertEqual(GRA.FEATURE_HEADER.size + 4 * 3 * 8, os.path.getsize(self.path("a.feat")))

    def test_feature_file_defects(self):
        GRA.write_feature_file(self.path("a.feat"), np.ones((2, 3)))
        with open(self.path("a.feat"), "rb") as file:
            content = file.read()
        self.assertFormatError(self.write("short.feat", content[:5]), 5)
        self.assertFormatError(self.write("magic.feat", b"XXXX" + content[4:]), 0)
        self.assertFormatError(self.write("version.feat", content[:4] + b"\x09" + content[5:]), 4)
        self.assertFormatError(self.write("truncated.feat", content[:-3]), len(content) - 3)
        self.assertFormatError(self.write("trailing.feat", content + b"\x00"), len(content))

    def test_label_file_defects(self):
        GRA.write_label_file(self.path("a.lab"), np.array([1, 2, 3]))
        np.testing.assert_array_equal([1, 2, 3], GRA.read_label_file(self.path("a.lab")))
        with open(self.path("a.lab"), "rb") as file:
            content = file.read()
        self.assertFormatError(self.write("magic.lab", b"GRAF" + content[4:]), 0, GRA.read_label_file)
        self.assertFormatError(self.write("short.lab", content[:-1]), len(content) - 1, GRA.read_label_file)

    def test_labels_disagree_with_features(self):
        GRA.save_dataset(self.source, self.path("source"))
        GRA.write_label_file(self.path("source", "labels", "000000.lab"), np.zeros(9, dtype=np.int64))
        self.assertRaises(GRA.Exceptions.IntegrityError, lambda: GRA.load_dataset(self.path("source")))

    def test_features_disagree_with_manifest(self):
        GRA.save_dataset(self.source, self.path("source"))
        GRA.write_feature_file(self.path("source", "features", "000001.feat"), np.zeros((10, 5)))
        self.assertRaises(GRA.Exceptions.IntegrityError, lambda: GRA.load_dataset(self.path("source")))

    def test_broken_manifest(self):
        GRA.save_dataset(self.source, self.path("source"))
        with open(self.path("source", "manifest.jsonl"), "a") as manifest:
            manifest.write("{broken\n")
        self.assertRaises(GRA.Exceptions.FormatError, lambda: GRA.load_dataset(self.path("source")))


class TestCorpusBuilder(unittest.TestCase):
    """
    Tests Gradient_Reversal_Adaptation.Corpus.Builder.
    """

    @classmethod
    def setUpClass(cls) -> None:
        cls.spec = GRA.CorpusSpec(
            n_classes=3,
            source_hours=0.002,
            target_hours=0.001,
            crosslingual_hours=0.001,
            valid_hours=0.001,
            test_hours=0.001,
            utterance_length_s=1.5,
            target_channels=(GRA.CHANNEL_PRESETS["channel2"], GRA.CHANNEL_PRESETS["channel4"]),
            feature_config=GRA.FeatureConfig(n_mel=8, context_frames=1),
        )
        cls.corpus = GRA.build_corpus(cls.spec)

    def test_splits(self):
        self.assertEqual(set(GRA.SPLITS), set(self.corpus.splits))
        self.assertEqual(5, self.corpus[GRA.SOURCE_TRAIN].n_utterances)
        self.assertEqual(5 * 148, self.corpus[GRA.SOURCE_TRAIN].n_frames)
        for data in self.corpus.splits.values():
            self.assertEqual(72, data.dims)

    def test_adaptation_splits_are_unlabeled(self):
        for name in [GRA.TARGET_ADAPT, GRA.CROSSLINGUAL_ADAPT]:
            self.assertFalse(self.corpus[name].is_labeled)
            self.assertIsNotNone(self.corpus[name].reference_labels)
        for name in [GRA.SOURCE_TRAIN, GRA.SOURCE_VALID, GRA.TARGET_VALID, GRA.TARGET_TEST]:
            self.assertTrue(self.corpus[name].is_labeled)

    def test_domains_languages_and_channels(self):
        self.assertIs(GRA.Domain.Source, self.corpus[GRA.SOURCE_TRAIN].domain)
        self.assertIs(GRA.Domain.Target, self.corpus[GRA.TARGET_TEST].domain)
        self.assertEqual("fr", self.corpus[GRA.CROSSLINGUAL_ADAPT].language)
        self.assertEqual("it", self.corpus[GRA.TARGET_ADAPT].language)
        self.assertEqual({"channel1"}, set(self.corpus[GRA.SOURCE_TRAIN].channels))
        self.assertEqual(["channel2", "channel4", "channel2"], self.corpus[GRA.TARGET_VALID].channels)

    def test_standardized_on_source_training_data(self):
        np.testing.assert_allclose(0.0, self.corpus[GRA.SOURCE_TRAIN].features.mean(axis=0), atol=1e-9)
        self.assertGreater(np.abs(self.corpus[GRA.TARGET_TEST].features.mean(axis=0)).max(), 0.1)

    def test_validation(self):
        valid = self.corpus.validation
        self.assertIs(GRA.Domain.Mixed, valid.domain)
        self.assertTrue(valid.is_labeled)
        self.assertEqual(
            self.corpus[GRA.SOURCE_VALID].n_frames + self.corpus[GRA.TARGET_VALID].n_frames, valid.n_frames
        )
        self.assertEqual({0, 1}, set(valid.row_domains.tolist()))

    def test_unknown_split(self):
        self.assertRaises(GRA.Exceptions.DataError, lambda: self.corpus["unknown"])

    def test_deterministic_split(self):
        generator = GRA.make_generator_spec(3, utterance_length_s=1.5)
        channels = (GRA.CHANNEL_PRESETS["channel4"],)
        a = GRA.generate_split("x", self.spec, generator, channels, GRA.Domain.Target, 0.0005)
        b = GRA.generate_split("x", self.spec, generator, channels, GRA.Domain.Target, 0.0005)
        self.assertEqual(a, b)

    def test_save_and_load(self):
        with tempfile.TemporaryDirectory() as directory:
            GRA.save_corpus(self.corpus, directory)
            loaded = GRA.load_corpus(directory)
        self.assertEqual(self.spec, loaded.spec)
        for name, data in self.corpus.splits.items():
            self.assertEqual(data, loaded[name])
        np.testing.assert_array_equal(self.corpus.stats.mean, loaded.stats.mean)
        np.testing.assert_array_equal(self.corpus.stats.scale, loaded.stats.scale)

    def test_load_missing_corpus(self):
        with tempfile.TemporaryDirectory() as directory:
            self.assertRaises(GRA.Exceptions.DataError, lambda: GRA.load_corpus(directory))

    def test_invalid_spec(self):
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.CorpusSpec(source_hours=0.0))
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.CorpusSpec(target_channels=()))
