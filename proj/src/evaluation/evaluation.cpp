#include "emotalk/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "emotalk/env.hpp"
#include "emotalk/error.hpp"

namespace emotalk::eval {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// One CSV record; quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  for (auto& f : out) f = trim(f);
  return out;
}

// Unbiased draw from [0, bound) that does not depend on the standard
// library's distribution implementation, so splits match across platforms.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string latex_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': case '%': case '$': case '#': case '_': case '{': case '}':
        out += '\\';
        out += c;
        break;
      case '\\': out += "\\textbackslash{}"; break;
      case '~': out += "\\textasciitilde{}"; break;
      case '^': out += "\\textasciicircum{}"; break;
      default: out += c;
    }
  }
  return out;
}

std::string markdown_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::vector<LabelRow> parse_label_csv(const std::string& text, bool allow_unknown) {
  std::vector<LabelRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() < 2 || fields[0].empty()) {
      throw Error(Errc::InvalidLabel, "line " + std::to_string(line_no) + ": expected path,label");
    }
    std::transform(fields[1].begin(), fields[1].end(), fields[1].begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const auto label = parse_emotion(fields[1]);
    if (!label) {
      if (rows.empty() && fields[1] == "label") continue;  // header
      throw Error(Errc::InvalidLabel,
                  "line " + std::to_string(line_no) + ": unknown label '" + fields[1] + "'");
    }
    if (*label == EmotionLabel::unknown && !allow_unknown) {
      throw Error(Errc::InvalidLabel, "line " + std::to_string(line_no) + ": truth label cannot be unknown");
    }
    rows.push_back({fields[0], *label});
  }
  return rows;
}

std::vector<LabelRow> read_label_csv(const std::filesystem::path& csv, bool allow_unknown) {
  return parse_label_csv(read_file(csv), allow_unknown);
}

std::vector<LabeledClip> load_corpus(const std::filesystem::path& data_dir,
                                     const std::filesystem::path& labels_csv) {
  std::vector<LabeledClip> out;
  for (const auto& row : read_label_csv(labels_csv, false)) {
    std::filesystem::path p = row.path;
    if (p.is_relative()) p = data_dir / p;
    if (!std::filesystem::is_regular_file(p)) {
      throw Error(Errc::InvalidConfig, "listed clip does not exist: " + p.string());
    }
    const std::string raw = read_file(p);
    const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size());
    const auto clip = dsp::decode_audio(bytes, dsp::sniff_wav_format(bytes).value_or(dsp::WavFormat::pcm16),
                                        p.string());
    out.push_back({p, row.label, clip.duration_s()});
  }
  return out;
}

Split split_dataset(const std::vector<LabeledClip>& items, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 4> by_label;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto l = items[i].label;
    if (l == EmotionLabel::unknown) throw Error(Errc::InvalidLabel, "clip labeled unknown: " + items[i].path.string());
    by_label[index_of(l)].push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::vector<bool> in_test(items.size(), false);
  for (std::size_t k = 0; k < by_label.size(); ++k) {
    auto& idx = by_label[k];
    if (idx.empty()) continue;
    if (idx.size() < kMinPerLabel) {
      throw Error(Errc::TooFewItems, std::string(to_string(kConcreteEmotions[k])) + " has " +
                                         std::to_string(idx.size()) + " clips, need at least " +
                                         std::to_string(kMinPerLabel));
    }
    for (std::size_t i = idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[bounded(rng, i + 1)]);
    const std::size_t n_test = (idx.size() + 2) / 5;  // round(0.2 n); n/5 never lands on .5
    for (std::size_t i = 0; i < n_test; ++i) in_test[idx[i]] = true;
  }
  Split s;
  for (std::size_t i = 0; i < items.size(); ++i) (in_test[i] ? s.test : s.train).push_back(items[i]);
  return s;
}

EvalResult evaluate_predictions(const std::vector<EmotionLabel>& truth,
                                const std::vector<EmotionLabel>& pred, const std::string& model_name,
                                F1Average average) {
  if (truth.size() != pred.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(truth.size()) + " truth labels vs " +
                                          std::to_string(pred.size()) + " predictions");
  }
  if (truth.empty()) throw Error(Errc::EmptyInput, "nothing to evaluate");

  EvalResult r;
  r.model_name = model_name;
  r.n = static_cast<long>(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == EmotionLabel::unknown) {
      throw Error(Errc::InvalidLabel, "truth label " + std::to_string(i) + " is unknown");
    }
    ++r.confusion[index_of(truth[i])][index_of(pred[i])];
  }

  long correct = 0;
  double weighted = 0.0, macro = 0.0;
  int macro_classes = 0;
  for (std::size_t c = 0; c < 4; ++c) {
    const long tp = r.confusion[c][c];
    long support = 0, predicted = 0;
    for (std::size_t j = 0; j < 5; ++j) support += r.confusion[c][j];
    for (std::size_t t = 0; t < 4; ++t) predicted += r.confusion[t][c];
    correct += tp;
    if (support + predicted == 0) continue;
    const double f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(support + predicted);
    weighted += f1 * static_cast<double>(support);
    macro += f1;
    ++macro_classes;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);
  r.f1 = average == F1Average::weighted ? weighted / static_cast<double>(r.n)
                                        : (macro_classes > 0 ? macro / macro_classes : 0.0);
  return r;
}

EvalResult score_label_rows(const std::vector<LabelRow>& truth, const std::vector<LabelRow>& pred,
                            const std::string& model_name, F1Average average) {
  std::map<std::string, EmotionLabel> predicted;
  for (const auto& row : pred) predicted[row.path] = row.label;
  std::vector<EmotionLabel> t, p;
  for (const auto& row : truth) {
    t.push_back(row.label);
    const auto it = predicted.find(row.path);
    p.push_back(it == predicted.end() ? EmotionLabel::unknown : it->second);
  }
  return evaluate_predictions(t, p, model_name, average);
}

std::optional<TableFormat> parse_table_format(std::string_view name) {
  if (name == "text") return TableFormat::text;
  if (name == "markdown" || name == "md") return TableFormat::markdown;
  if (name == "latex" || name == "tex") return TableFormat::latex;
  return std::nullopt;
}

std::string render_results_table(std::vector<EvalResult> results, TableFormat format) {
  std::stable_sort(results.begin(), results.end(),
                   [](const EvalResult& a, const EvalResult& b) { return a.accuracy > b.accuracy; });
  std::string out;
  switch (format) {
    case TableFormat::text:
      out += "Model | Accuracy | F1 Score\n";
      for (const auto& r : results) out += r.model_name + " | " + fixed2(r.accuracy) + " | " + fixed2(r.f1) + "\n";
      break;
    case TableFormat::markdown:
      out += "| Model | Accuracy | F1 Score |\n|---|---:|---:|\n";
      for (const auto& r : results) {
        out += "| " + markdown_escape(r.model_name) + " | " + fixed2(r.accuracy) + " | " + fixed2(r.f1) + " |\n";
      }
      break;
    case TableFormat::latex:
      out += "\\begin{tabular}{lcc}\n\\hline\nModel & Accuracy & F1 Score \\\\\n\\hline\n";
      for (const auto& r : results) {
        out += latex_escape(r.model_name) + " & " + fixed2(r.accuracy) + " & " + fixed2(r.f1) + " \\\\\n";
      }
      out += "\\hline\n\\end{tabular}\n";
      break;
  }
  return out;
}

Predictions predict_all(const std::vector<LabeledClip>& clips, const ClipClassifier& classify,
                        std::size_t workers) {
  Predictions out;
  out.labels.assign(clips.size(), EmotionLabel::unknown);
  std::vector<char> failed(clips.size(), 0);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < clips.size();) {
      try {
        out.labels[i] = classify(clips[i]);
      } catch (const std::exception&) {
        failed[i] = 1;
      }
    }
  };
  const std::size_t n = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(clips.size(), 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < n; ++i) pool.emplace_back(work);
    work();
  }
  out.failures = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
  return out;
}

EmotionLabel classify_file(const std::filesystem::path& path, const emotion::EmotionBackend& backend,
                           const dsp::DspConfig& cfg, double tau) {
  const std::string raw = read_file(path);
  const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size());
  const auto clip = dsp::decode_audio(bytes, dsp::sniff_wav_format(bytes).value_or(dsp::WavFormat::pcm16),
                                      path.string());
  return emotion::detect_emotion(dsp::mel_from_clip(clip, cfg), backend, tau).decided;
}

}  // namespace emotalk::eval
