#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "emotalk/emotion.hpp"
#include "emotalk/env.hpp"
#include "support/common.hpp"
#include "support/dsp_oracle.hpp"
#include "support/mock_http.hpp"

using namespace emotalk;
using namespace emotalk::emotion;
using emotalk::test::code_of;

namespace {

dsp::MelSpectrogram random_mel(std::size_t bands, std::size_t frames, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> d(-5.0, 3.0);
  dsp::MelSpectrogram mel{Matrix<double>(bands, frames), 62.5};
  for (std::size_t m = 0; m < bands; ++m) {
    for (std::size_t t = 0; t < frames; ++t) mel.values(m, t) = d(rng);
  }
  return mel;
}

BaselineEmotionBackend zero_backend(std::size_t bands) {
  return BaselineEmotionBackend({Matrix<double>(4, 2 * bands), {}});
}

double sum_of(const Probabilities& p) { return p[0] + p[1] + p[2] + p[3]; }

}  // namespace

TEST(LabelFromScores, Examples) {
  EXPECT_EQ(label_from_scores({0.25, 0.25, 0.25, 0.25}, 0.4), EmotionLabel::unknown);
  EXPECT_EQ(label_from_scores({0.5, 0.5, 0.0, 0.0}, 0.4), EmotionLabel::angry);
  EXPECT_EQ(label_from_scores({0.1, 0.6, 0.2, 0.1}, 0.4), EmotionLabel::happy);
}

TEST(LabelFromScores, ThresholdIsInclusive) {
  EXPECT_EQ(label_from_scores({0.4, 0.3, 0.2, 0.1}, 0.4), EmotionLabel::angry);
  EXPECT_EQ(label_from_scores({0.1, 0.2, 0.3, 0.4}, 0.4), EmotionLabel::sad);
}

TEST(LabelFromScores, TiesFollowFixedOrder) {
  EXPECT_EQ(label_from_scores({0.0, 0.0, 0.5, 0.5}, 0.4), EmotionLabel::neutral);
  EXPECT_EQ(label_from_scores({0.0, 0.5, 0.0, 0.5}, 0.4), EmotionLabel::happy);
  EXPECT_EQ(label_from_scores({0.25, 0.25, 0.25, 0.25}, 0.0), EmotionLabel::angry);
}

TEST(LabelFromScores, RejectsNonDistributions) {
  EXPECT_EQ(code_of([] { label_from_scores({0.5, 0.5, 0.5, 0.0}, 0.4); }), Errc::NotADistribution);
  EXPECT_EQ(code_of([] { label_from_scores({1.2, -0.2, 0.0, 0.0}, 0.4); }), Errc::NotADistribution);
  EXPECT_EQ(code_of([] { label_from_scores({NAN, 0.5, 0.5, 0.0}, 0.4); }), Errc::NotADistribution);
  EXPECT_EQ(code_of([] { label_from_scores({0.25, 0.25, 0.25, 0.25}, 1.5); }), Errc::InvalidConfig);
  // within 1e-6 is accepted
  EXPECT_NO_THROW(label_from_scores({0.25, 0.25, 0.25, 0.2500005}, 0.4));
}

TEST(LabelFromScores, ZeroThresholdNeverAbstains) {
  std::mt19937 rng(7);
  std::gamma_distribution<double> g(0.5, 1.0);
  for (int i = 0; i < 500; ++i) {
    Probabilities p{g(rng), g(rng), g(rng), g(rng)};
    const double s = sum_of(p);
    if (s == 0.0) continue;
    for (auto& v : p) v /= s;
    EXPECT_NE(label_from_scores(p, 0.0), EmotionLabel::unknown);
  }
}

TEST(Softmax, StableForHugeLogits) {
  const auto p = softmax({1000.0, 999.0, -1000.0, 0.0});
  EXPECT_NEAR(sum_of(p), 1.0, 1e-12);
  // e^0 / (e^0 + e^-1)
  EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_EQ(p[2], 0.0);
}

TEST(BaselineEmotion, ZeroWeightsGiveUniformAndUnknown) {
  const auto backend = zero_backend(64);
  const dsp::DspConfig cfg;
  const dsp::AudioClip clip{emotalk::test::sine(440, 16000, 16000, 0.3), 16000, "s"};
  const auto mel = dsp::mel_from_clip(clip, cfg);
  const auto s = detect_emotion(mel, backend);
  for (double p : s.probs) EXPECT_DOUBLE_EQ(p, 0.25);
  EXPECT_EQ(s.decided, EmotionLabel::unknown);
  EXPECT_EQ(s.backend_id, "baseline");
}

TEST(BaselineEmotion, SadLogitTenAboveOthers) {
  BaselineEmotionBackend::Weights w{Matrix<double>(4, 16), {0.0, 0.0, 0.0, 10.0}};
  const auto s = detect_emotion(random_mel(8, 20, 1), BaselineEmotionBackend(w));
  // e^10 / (e^10 + 3), worked by hand: 1 / (1 + 3 e^-10) = 0.999863...
  const double oracle = 1.0 / (1.0 + 3.0 * std::exp(-10.0));
  EXPECT_NEAR(s.prob(EmotionLabel::sad), oracle, 1e-12);
  EXPECT_GT(s.prob(EmotionLabel::sad), 0.99);
  EXPECT_EQ(s.decided, EmotionLabel::sad);
}

TEST(BaselineEmotion, FeaturesAreBandMeansThenPopulationStd) {
  dsp::MelSpectrogram mel{Matrix<double>(2, 4), 1.0};
  const double rows[2][4] = {{1, 2, 3, 4}, {-1, -1, -1, -1}};
  for (int m = 0; m < 2; ++m) {
    for (int t = 0; t < 4; ++t) mel.values(m, t) = rows[m][t];
  }
  const auto f = BaselineEmotionBackend::features(mel);
  ASSERT_EQ(f.size(), 4u);
  EXPECT_DOUBLE_EQ(f[0], 2.5);
  EXPECT_DOUBLE_EQ(f[1], -1.0);
  EXPECT_NEAR(f[2], std::sqrt(1.25), 1e-12);  // mean of (1.5^2, .5^2, .5^2, 1.5^2)
  EXPECT_DOUBLE_EQ(f[3], 0.0);
}

TEST(BaselineEmotion, LogitsMatchHandDotProduct) {
  BaselineEmotionBackend::Weights w{Matrix<double>(4, 4), {0.1, 0.2, 0.3, 0.4}};
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t j = 0; j < 4; ++j) w.w(c, j) = static_cast<double>(c + 1) * (j % 2 ? -1.0 : 1.0);
  }
  const auto mel = random_mel(2, 10, 3);
  const auto f = BaselineEmotionBackend::features(mel);
  const auto z = BaselineEmotionBackend(w).logits(mel);
  for (std::size_t c = 0; c < 4; ++c) {
    double acc = w.b[c];
    for (std::size_t j = 0; j < 4; ++j) acc += w.w(c, j) * f[j];
    EXPECT_NEAR(z[c], acc, 1e-12);
  }
}

TEST(BaselineEmotion, DecisionInvariantUnderLogitShift) {
  std::mt19937 rng(11);
  std::normal_distribution<double> d(0.0, 1.0);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  const auto mel = random_mel(4, 30, 5);
  for (int trial = 0; trial < 100; ++trial) {
    BaselineEmotionBackend::Weights w{Matrix<double>(4, 8), {}};
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t j = 0; j < 8; ++j) w.w(c, j) = 0.2 * d(rng);
      w.b[c] = d(rng);
    }
    auto shifted = w;
    const double k = shift(rng);
    for (auto& b : shifted.b) b += k;
    const auto a = detect_emotion(mel, BaselineEmotionBackend(w));
    const auto b = detect_emotion(mel, BaselineEmotionBackend(shifted));
    EXPECT_EQ(a.decided, b.decided) << "trial " << trial;
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a.probs[i], b.probs[i], 1e-9);
  }
}

TEST(BaselineEmotion, ProbabilitiesAlwaysADistribution) {
  std::mt19937 rng(13);
  std::normal_distribution<double> d(0.0, 30.0);
  for (int trial = 0; trial < 200; ++trial) {
    BaselineEmotionBackend::Weights w{Matrix<double>(4, 6), {d(rng), d(rng), d(rng), d(rng)}};
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t j = 0; j < 6; ++j) w.w(c, j) = d(rng);
    }
    const auto p = BaselineEmotionBackend(w).predict(random_mel(3, 8, static_cast<std::uint32_t>(trial)));
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_NEAR(sum_of(p), 1.0, 1e-6);
  }
}

TEST(BaselineEmotion, ShapeMismatch) {
  const auto backend = zero_backend(64);
  EXPECT_EQ(code_of([&] { backend.predict(random_mel(32, 10, 1)); }), Errc::ShapeMismatch);
  EXPECT_EQ(code_of([&] { backend.predict(dsp::MelSpectrogram{Matrix<double>(64, 0), 1.0}); }),
            Errc::ShapeMismatch);
}

TEST(BaselineEmotion, JsonRowsFollowFileLabelOrder) {
  const nlohmann::json doc{{"labels", {"sad", "angry", "happy", "neutral"}},
                           {"w", {{0, 0}, {0, 0}, {0, 0}, {0, 0}}},
                           {"b", {4.0, 1.0, 2.0, 3.0}}};
  const auto backend = BaselineEmotionBackend::from_json(doc.dump());
  EXPECT_EQ(backend.weights().b, (std::array<double, 4>{1.0, 2.0, 3.0, 4.0}));
  EXPECT_EQ(detect_emotion(random_mel(1, 4, 2), backend).decided, EmotionLabel::sad);

  EXPECT_EQ(code_of([] { BaselineEmotionBackend::from_json(R"({"labels":["sad"]})"); }),
            Errc::InvalidConfig);
  auto dup = doc;
  dup["labels"] = {"sad", "sad", "happy", "neutral"};
  EXPECT_EQ(code_of([&] { BaselineEmotionBackend::from_json(dup.dump()); }), Errc::InvalidConfig);
}

TEST(BaselineEmotion, ShippedZeroModelLoads) {
  const auto backend = BaselineEmotionBackend::from_file(data_dir() / "models" / "baseline_zero.json");
  EXPECT_EQ(backend.n_mels(), 64u);
}

TEST(RemoteEmotion, PostsMelAndDecidesArgmax) {
  emotalk::test::MockHttpServer mock;
  std::size_t rows = 0, cols = 0;
  mock.server().Post("/predict", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    rows = body["mel"].size();
    cols = body["mel"][0].size();
    res.set_content(R"({"probs":{"angry":0.7,"happy":0.1,"neutral":0.1,"sad":0.1}})",
                    "application/json");
  });
  mock.start();
  RemoteEmotionBackend backend({mock.base() + "/predict", "", 8, 12, {}});
  const auto s = detect_emotion(random_mel(8, 12, 4), backend);
  EXPECT_EQ(s.decided, EmotionLabel::angry);
  EXPECT_NEAR(s.prob(EmotionLabel::angry), 0.7, 1e-12);
  EXPECT_EQ(rows, 8u);
  EXPECT_EQ(cols, 12u);
  EXPECT_EQ(code_of([&] { backend.predict(random_mel(8, 13, 4)); }), Errc::ShapeMismatch);
}

TEST(RemoteEmotion, RenormalizesAndIgnoresExtraLabels) {
  emotalk::test::MockHttpServer mock;
  mock.server().Post("/", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"probs":{"happy":0.3,"sad":0.1,"surprised":0.6}})", "application/json");
  });
  mock.start();
  RemoteEmotionBackend backend({mock.base() + "/", "", 2, 2, {}});
  const auto p = backend.predict(random_mel(2, 2, 9));
  EXPECT_NEAR(p[index_of(EmotionLabel::happy)], 0.75, 1e-12);
  EXPECT_NEAR(p[index_of(EmotionLabel::sad)], 0.25, 1e-12);
  EXPECT_EQ(p[index_of(EmotionLabel::angry)], 0.0);
}

TEST(RemoteEmotion, UnreachableIsUnavailable) {
  RetryPolicy quick;
  quick.backoff = {std::chrono::milliseconds{1}};
  RemoteEmotionBackend backend(
      {"http://127.0.0.1:" + std::to_string(emotalk::test::closed_port()), "", 2, 2, quick});
  EXPECT_EQ(code_of([&] { backend.predict(random_mel(2, 2, 9)); }), Errc::BackendUnavailable);
}
