#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emotalk/audio_dsp.hpp"
#include "emotalk/emotion.hpp"
#include "emotalk/labels.hpp"

namespace emotalk::eval {

struct LabeledClip {
  std::filesystem::path path;
  EmotionLabel label = EmotionLabel::neutral;  // never unknown
  double duration_s = 0.0;
};

/// Reads a path,label CSV (optional header row). Relative paths resolve
/// against `data_dir`; every file must exist and decode.
std::vector<LabeledClip> load_corpus(const std::filesystem::path& data_dir,
                                     const std::filesystem::path& labels_csv);

struct LabelRow {
  std::string path;
  EmotionLabel label;
};

/// Raw path,label rows. `allow_unknown` admits "unknown", as model
/// predictions may abstain.
std::vector<LabelRow> read_label_csv(const std::filesystem::path& csv, bool allow_unknown);
std::vector<LabelRow> parse_label_csv(const std::string& text, bool allow_unknown);

struct Split {
  std::vector<LabeledClip> train;
  std::vector<LabeledClip> test;
};

inline constexpr std::size_t kMinPerLabel = 5;

/// round(n/5) items of every label go to test, chosen by a seeded shuffle.
/// Both halves keep input order. Throws TooFewItems when a label present
/// in `items` has fewer than kMinPerLabel clips.
Split split_dataset(const std::vector<LabeledClip>& items, std::uint64_t seed);

/// rows = truth (4 concrete labels), cols = prediction (4 + unknown).
using Confusion = std::array<std::array<long, 5>, 4>;

struct EvalResult {
  std::string model_name;
  double accuracy = 0.0;
  double f1 = 0.0;
  Confusion confusion{};
  long n = 0;
};

enum class F1Average { weighted, macro };

/// Throws LengthMismatch, EmptyInput, or InvalidLabel for an unknown truth.
/// Macro averaging covers the classes that occur in truth or prediction.
EvalResult evaluate_predictions(const std::vector<EmotionLabel>& truth,
                                const std::vector<EmotionLabel>& pred, const std::string& model_name,
                                F1Average average = F1Average::weighted);

/// Joins the two CSVs on path. Truth rows without a prediction count as
/// unknown; predictions for paths outside the truth set are ignored.
EvalResult score_label_rows(const std::vector<LabelRow>& truth, const std::vector<LabelRow>& pred,
                            const std::string& model_name, F1Average average = F1Average::weighted);

enum class TableFormat { text, markdown, latex };

std::optional<TableFormat> parse_table_format(std::string_view name);

/// Rows sorted by accuracy, best first (stable), values as %.2f.
std::string render_results_table(std::vector<EvalResult> results, TableFormat format);

using ClipClassifier = std::function<EmotionLabel(const LabeledClip&)>;

struct Predictions {
  std::vector<EmotionLabel> labels;  // same order as the input clips
  std::size_t failures = 0;          // clips that threw; recorded as unknown
};

/// Runs `classify` over the clips with at most `workers` threads.
Predictions predict_all(const std::vector<LabeledClip>& clips, const ClipClassifier& classify,
                        std::size_t workers);

/// File -> decode -> resample -> pad_or_trim -> Mel -> detect_emotion.
EmotionLabel classify_file(const std::filesystem::path& path, const emotion::EmotionBackend& backend,
                           const dsp::DspConfig& cfg, double tau = emotion::kDefaultUnknownThreshold);

}  // namespace emotalk::eval
