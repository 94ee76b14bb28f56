import unittest
import numpy as np
import scipy.signal

import Gradient_Reversal_Adaptation as GRA


class CoreSpeechTest(unittest.TestCase):
    def setUpGenerator(self, n_classes: int = 4, seed: int = 0, language: str = "it") -> GRA.GeneratorSpec:
        return GRA.make_generator_spec(n_classes, seed=seed, language_tag=language, utterance_length_s=1.5)

    @staticmethod
    def tone(seconds: float = 1.0, frequency: float = 440.0, sample_rate_hz: int = 16000) -> np.ndarray:
        t = np.arange(int(seconds * sample_rate_hz)) / sample_rate_hz
        return 0.1 * np.sin(2 * np.pi * frequency * t)

    @staticmethod
    def mean_features(waveform: np.ndarray) -> np.ndarray:
        """
        Log Mel energies of a waveform averaged over its frames.
        """
        return GRA.extract_features(waveform, GRA.FeatureConfig(context_frames=0, include_deltas=False)).mean(axis=0)

    @staticmethod
    def nearest_centroid_accuracy(train: list[tuple[int, np.ndarray]], test: list[tuple[int, np.ndarray]]) -> float:
        classes = sorted({label for label, _ in train})
        centroids = np.array([np.mean([x for label, x in train if label == c], axis=0) for c in classes])
        predicted = [classes[int(np.argmin(np.linalg.norm(centroids - x, axis=1)))] for _, x in test]
        return float(np.mean([p == label for p, (label, _) in zip(predicted, test)]))


class TestFeatures(CoreSpeechTest):
    """
    Tests Gradient_Reversal_Adaptation.Speech.Features.
    """

    def test_default_dimensions(self):
        cfg = GRA.FeatureConfig()
        self.assertEqual(759, cfg.output_dims)
        self.assertEqual(400, cfg.frame_length)
        self.assertEqual(160, cfg.frame_shift)

    def test_extract_shape(self):
        features = GRA.extract_features(self.tone())
        self.assertEqual((98, 759), features.shape)
        self.assertTrue(np.all(np.isfinite(features)))

    def test_extract_without_deltas(self):
        cfg = GRA.FeatureConfig(n_mel=8, context_frames=1, include_deltas=False)
        self.assertEqual(24, cfg.output_dims)
        self.assertEqual((98, 24), GRA.extract_features(self.tone(), cfg).shape)

    def test_silence_is_floored(self):
        features = GRA.extract_features(np.zeros(800), GRA.FeatureConfig(context_frames=0, include_deltas=False))
        np.testing.assert_allclose(np.log(1e-10), features)

    def test_invalid_config(self):
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.FeatureConfig(n_mel=0))
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.FeatureConfig(frame_length_ms=40.0))
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.FeatureConfig(context_frames=-1))

    def test_mel_filterbank(self):
        bank = GRA.mel_filterbank(23, 512, 16000)
        self.assertEqual((23, 257), bank.shape)
        self.assertTrue(np.all(bank >= 0))
        self.assertTrue(np.all(bank <= 1))
        self.assertTrue(np.all(bank.max(axis=1) > 0))
        centers = np.argmax(bank, axis=1)
        self.assertTrue(np.all(np.diff(centers) >= 0))

    def test_mel_filterbank_invalid_range(self):
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.mel_filterbank(23, 512, 16000, high_hz=9000.0))
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.mel_filterbank(23, 512, 16000, 4000.0, 3000.0))

    def test_mel_scale_inverse(self):
        frequencies = np.array([0.0, 700.0, 4000.0, 8000.0])
        np.testing.assert_allclose(frequencies, GRA.mel_to_hz(GRA.hz_to_mel(frequencies)), atol=1e-9)

    def test_deltas_of_constant(self):
        np.testing.assert_array_equal(np.zeros((6, 2)), GRA.delta_features(np.ones((6, 2))))

    def test_deltas_of_ramp(self):
        ramp = np.arange(10, dtype=np.float64)[:, None]
        np.testing.assert_allclose(np.ones((6, 1)), GRA.delta_features(ramp, 2)[2:8])

    def test_deltas_invalid_window(self):
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.delta_features(np.ones((3, 1)), 0))

    def test_splice_edges(self):
        spliced = GRA.splice(np.arange(3, dtype=np.float64)[:, None], 1)
        np.testing.assert_array_equal([[0, 0, 1], [0, 1, 2], [1, 2, 2]], spliced)

    def test_splice_without_context(self):
        frames = np.ones((2, 3))
        np.testing.assert_array_equal(frames, GRA.splice(frames, 0))

    def test_frame_signal(self):
        cfg = GRA.FeatureConfig()
        self.assertEqual((3, 400), GRA.frame_signal(np.arange(720.0), cfg).shape)
        self.assertRaises(GRA.Exceptions.DataError, lambda: GRA.frame_signal(np.zeros(399), cfg))
        self.assertEqual(0, cfg.frame_count(399))


class TestChannels(CoreSpeechTest):
    """
    Tests Gradient_Reversal_Adaptation.Speech.Channels.
    """

    def test_close_talk_is_scaled_copy(self):
        signal = self.tone()
        np.testing.assert_array_equal(
            signal, GRA.apply_channel(signal, GRA.CHANNEL_PRESETS["channel1"], np.random.default_rng(0))
        )
        self.assertTrue(GRA.CHANNEL_PRESETS["channel1"].is_clean)

    def test_signal_to_noise_ratio(self):
        profile = GRA.ChannelProfile("noisy", 10.0, 0.0, 0, 1.0)
        signal = self.tone()
        noise = GRA.apply_channel(signal, profile, np.random.default_rng(0)) - signal
        self.assertAlmostEqual(10.0, 10 * np.log10(np.mean(signal**2) / np.mean(noise**2)), places=6)

    def test_noise_as_loud_as_signal(self):
        profile = GRA.ChannelProfile("loud", 0.0, 0.0, 0, 1.0)
        signal = self.tone()
        noise = GRA.apply_channel(signal, profile, np.random.default_rng(1)) - signal
        self.assertAlmostEqual(1.0, np.mean(noise**2) / np.mean(signal**2), places=6)

    @staticmethod
    def autocorrelation_tail(signal: np.ndarray, lags: int) -> float:
        """
        Sum of the squared normalized autocorrelation over the lags 1 to lags.
        """
        full = scipy.signal.correlate(signal, signal, mode="full", method="fft")[signal.size - 1 :]
        return float(np.sum((full[1 : lags + 1] / full[0]) ** 2))

    def test_reverb_slows_autocorrelation_decay(self):
        profile = GRA.ChannelProfile("room", float("inf"), 0.1, 1600, 1.0)
        signal = np.random.default_rng(0).standard_normal(32000)
        reverberant = GRA.apply_channel(signal, profile, np.random.default_rng(1))
        self.assertGreater(self.autocorrelation_tail(reverberant, 800), 5 * self.autocorrelation_tail(signal, 800))

    def test_clean_and_far_field_are_separable(self):
        spec = self.setUpGenerator()
        rng = np.random.default_rng(0)
        utterances = []
        for i in range(24):
            waveform = GRA.generate_utterance(spec, GRA.random_class_sequence(spec, rng), rng)[0]
            domain = i % 2
            if domain:
                waveform = GRA.apply_channel(waveform, GRA.CHANNEL_PRESETS["channel4"], rng)
            utterances.append((domain, self.mean_features(waveform)))
        self.assertGreaterEqual(self.nearest_centroid_accuracy(utterances[:12], utterances[12:]), 0.8)

    def test_classes_survive_far_field(self):
        spec = self.setUpGenerator()
        rng = np.random.default_rng(0)
        clean, degraded = [], []
        for c in range(spec.n_classes):
            for i in range(12):
                waveform = GRA.generate_utterance(spec, [c], rng)[0]
                if i < 6:
                    clean.append((c, self.mean_features(waveform)))
                else:
                    far = GRA.apply_channel(waveform, GRA.CHANNEL_PRESETS["channel4"], rng)
                    degraded.append((c, self.mean_features(far)))
        # each domain is centered on its own mean
        for data in [clean, degraded]:
            center = np.mean([x for _, x in data], axis=0)
            data[:] = [(c, x - center) for c, x in data]
        self.assertGreater(self.nearest_centroid_accuracy(clean, degraded), 1.0 / spec.n_classes)

    def test_far_field_keeps_length(self):
        signal = self.tone()
        degraded = GRA.apply_channel(signal, GRA.CHANNEL_PRESETS["channel4"], np.random.default_rng(0))
        self.assertEqual(signal.shape, degraded.shape)
        self.assertFalse(np.allclose(signal * 0.4, degraded))

    def test_channel_deterministic(self):
        profile = GRA.CHANNEL_PRESETS["channel3"]
        signal = self.tone()
        np.testing.assert_array_equal(
            GRA.apply_channel(signal, profile, np.random.default_rng(2)),
            GRA.apply_channel(signal, profile, np.random.default_rng(2)),
        )

    def test_impulse_response(self):
        profile = GRA.CHANNEL_PRESETS["channel2"]
        response = GRA.impulse_response(profile, 16000, np.random.default_rng(0))
        self.assertEqual((320,), response.shape)
        self.assertAlmostEqual(1.0, np.linalg.norm(response))
        np.testing.assert_array_equal(
            np.ones(1), GRA.impulse_response(GRA.CHANNEL_PRESETS["channel1"], 16000, np.random.default_rng(0))
        )

    def test_presets_degrade_with_distance(self):
        presets = [GRA.CHANNEL_PRESETS[f"channel{i}"] for i in range(1, 5)]
        snr = [p.snr_db for p in presets]
        self.assertEqual(sorted(snr, reverse=True), snr)
        self.assertEqual(sorted(p.reverb_taps for p in presets), [p.reverb_taps for p in presets])

    def test_presets_match_configuration_file(self):
        self.assertEqual(GRA.CHANNEL_PRESETS, GRA.load_channels())

    def test_invalid_profile(self):
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.ChannelProfile("x", 10.0, 0.0, 0, 0.0))
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.ChannelProfile("x", 10.0, -1.0, 0, 1.0))
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.ChannelProfile("x", float("nan"), 0.0, 0, 1.0))


class TestGenerator(CoreSpeechTest):
    """
    Tests Gradient_Reversal_Adaptation.Speech.Generator.
    """

    def test_spec_deterministic(self):
        self.assertEqual(self.setUpGenerator(seed=3), self.setUpGenerator(seed=3))
        self.assertNotEqual(self.setUpGenerator(seed=3), self.setUpGenerator(seed=4))
        self.assertNotEqual(self.setUpGenerator(language="de"), self.setUpGenerator(language="it"))

    def test_segments_per_utterance(self):
        spec = self.setUpGenerator()
        self.assertEqual(5, spec.segments_per_utterance)
        self.assertEqual(4800, spec.segment_samples)
        self.assertEqual(5, len(GRA.random_class_sequence(spec, np.random.default_rng(0))))

    def test_labels_follow_frames(self):
        spec = self.setUpGenerator()
        waveform, labels = GRA.generate_utterance(spec, [0, 1, 2], np.random.default_rng(0))
        self.assertEqual((14400,), waveform.shape)
        self.assertEqual(88, labels.size)
        self.assertEqual(labels.size, GRA.extract_features(waveform).shape[0])
        self.assertEqual(0, labels[0])
        self.assertEqual(2, labels[-1])
        self.assertTrue(np.all(np.diff(labels) >= 0))

    def test_utterance_deterministic(self):
        spec = self.setUpGenerator()
        a = GRA.generate_utterance(spec, [3, 1], np.random.default_rng(7))
        b = GRA.generate_utterance(spec, [3, 1], np.random.default_rng(7))
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_classes_are_distinguishable(self):
        spec = self.setUpGenerator()
        cfg = GRA.FeatureConfig(context_frames=0, include_deltas=False)
        means = [
            GRA.extract_features(GRA.generate_utterance(spec, [c], np.random.default_rng(c))[0], cfg).mean(axis=0)
            for c in range(spec.n_classes)
        ]
        for a in range(spec.n_classes):
            for b in range(a + 1, spec.n_classes):
                self.assertGreater(np.linalg.norm(means[a] - means[b]), 0.5)

    def test_invalid_class_sequence(self):
        spec = self.setUpGenerator()
        self.assertRaises(GRA.Exceptions.DataError, lambda: GRA.generate_utterance(spec, [], np.random.default_rng(0)))
        self.assertRaises(GRA.Exceptions.DataError, lambda: GRA.generate_utterance(spec, [4], np.random.default_rng(0)))

    def test_language_variant(self):
        spec = self.setUpGenerator(n_classes=4)
        variant = GRA.language_variant(spec, "de", overlap=0.5)
        self.assertEqual("de", variant.language_tag)
        self.assertEqual(spec.class_signal_params[:2], variant.class_signal_params[:2])
        for a, b in zip(spec.class_signal_params[2:], variant.class_signal_params[2:]):
            self.assertNotEqual(a, b)

    def test_language_variant_errors(self):
        spec = self.setUpGenerator()
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.language_variant(spec, "it"))
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.language_variant(spec, "de", overlap=1.0))

    def test_invalid_spec(self):
        self.assertRaises(GRA.Exceptions.ConfigError, lambda: GRA.make_generator_spec(0))

    def test_narrowband_sample_rate(self):
        spec = GRA.make_generator_spec(20, sample_rate_hz=8000, utterance_length_s=0.6)
        self.assertTrue(any(t.noise_high_hz > 3600.0 for t in spec.class_signal_params))
        for c in range(spec.n_classes):
            waveform, _ = GRA.generate_utterance(spec, [c], np.random.default_rng(c))
            self.assertEqual((2400,), waveform.shape)
            self.assertTrue(np.all(np.isfinite(waveform)))
