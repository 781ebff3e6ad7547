#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "emotalk/env.hpp"
#include "emotalk/error.hpp"
#include "emotalk/reporting.hpp"

namespace emotalk::reporting {

int EmotionSummary::total() const { return std::accumulate(counts.begin(), counts.end(), 0); }

std::vector<int> largest_remainder_tenths(std::span<const int> counts) {
  const long long n = std::accumulate(counts.begin(), counts.end(), 0LL);
  std::vector<int> out(counts.size(), 0);
  if (n == 0) return out;
  std::vector<long long> remainder(counts.size());
  long long assigned = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const long long scaled = 1000LL * counts[i];
    out[i] = static_cast<int>(scaled / n);
    remainder[i] = scaled % n;
    assigned += out[i];
  }
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < 1000; ++k, ++assigned) ++out[order[k]];
  return out;
}

EmotionSummary summarize_emotions(std::span<const ConversationTurn> turns) {
  EmotionSummary s;
  for (const auto& t : turns) ++s.counts[index_of(t.final_emotion)];
  const auto tenths = largest_remainder_tenths(s.counts);
  for (std::size_t i = 0; i < tenths.size(); ++i) s.percentages[i] = tenths[i] / 10.0;
  if (!turns.empty()) {
    const auto [lo, hi] = std::minmax_element(
        turns.begin(), turns.end(),
        [](const ConversationTurn& a, const ConversationTurn& b) { return a.turn_index < b.turn_index; });
    s.window = SummaryWindow{lo->turn_index, hi->turn_index, lo->created_at, hi->created_at};
  }
  return s;
}

ReportStrings ReportStrings::from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text, nullptr, false);
  if (!doc.is_object()) throw Error(Errc::InvalidConfig, "report strings must be a JSON object");
  ReportStrings s;
  for (const auto& [key, value] : doc.items()) {
    if (value.is_string()) s.text_[key] = value.get<std::string>();
  }
  auto labels = [&](const char* key) -> const nlohmann::json& {
    if (!doc.contains(key) || !doc[key].is_object()) {
      throw Error(Errc::InvalidConfig, std::string("report strings lack the \"") + key + "\" map");
    }
    return doc[key];
  };
  const auto& emotions = labels("emotions");
  for (auto l : kAllEmotions) {
    const auto key = std::string(to_string(l));
    if (!emotions.contains(key) || !emotions[key].is_string()) {
      throw Error(Errc::InvalidConfig, "report strings lack emotion name for " + key);
    }
    s.emotions_[l] = emotions[key].get<std::string>();
  }
  const auto& sentiments = labels("sentiments");
  for (auto l : {SentimentLabel::sad, SentimentLabel::neutral, SentimentLabel::happy}) {
    const auto key = std::string(to_string(l));
    if (!sentiments.contains(key) || !sentiments[key].is_string()) {
      throw Error(Errc::InvalidConfig, "report strings lack sentiment name for " + key);
    }
    s.sentiments_[l] = sentiments[key].get<std::string>();
  }
  static const char* const kRequired[] = {
      "subject", "title", "patient", "psychologist", "generated_at", "period", "period_value",
      "summary_heading", "emotion_column", "count_column", "percent_column", "total",
      "key_points_heading", "interactions_heading", "interaction", "date", "audio_emotion",
      "text_sentiment", "final_emotion", "user", "assistant", "empty", "first_turn", "last_turn",
      "negative_turn", "summarizer_prompt"};
  for (const char* key : kRequired) {
    if (!s.text_.contains(key)) {
      throw Error(Errc::InvalidConfig, std::string("report strings lack \"") + key + "\"");
    }
  }
  return s;
}

ReportStrings ReportStrings::from_file(const std::filesystem::path& path) {
  return from_json(read_file(path));
}

const std::string& ReportStrings::get(const std::string& key) const { return text_.at(key); }

std::string ReportStrings::format(const std::string& key,
                                  const std::map<std::string, std::string>& values) const {
  const std::string& tmpl = get(key);
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string::npos) {
        const auto it = values.find(tmpl.substr(i + 1, close - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

ReportStrings report_strings_from_env() {
  return ReportStrings::from_file(
      env_or("ET_REPORT_STRINGS", (data_dir() / "templates" / "report_pt.json").string()));
}

namespace {

constexpr std::size_t kExcerptBytes = 160;

// Single-line excerpt cut on a UTF-8 boundary.
std::string excerpt(std::string_view text) {
  std::string flat;
  for (char c : text) flat += (c == '\n' || c == '\r' || c == '\t') ? ' ' : c;
  if (flat.size() <= kExcerptBytes) return flat;
  std::size_t cut = kExcerptBytes;
  while (cut > 0 && (static_cast<unsigned char>(flat[cut]) & 0xC0) == 0x80) --cut;
  return flat.substr(0, cut) + "...";
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", v);
  return buf;
}

std::vector<std::string> summarize_with_chat(std::span<const ConversationTurn> turns,
                                             const ReportStrings& strings,
                                             const ReportOptions& options) {
  std::ostringstream transcript;
  for (const auto& t : turns) {
    transcript << "[#" << (t.turn_index + 1) << ", " << strings.emotion(t.final_emotion) << "] "
               << excerpt(t.user_text) << "\n";
  }
  responder::ChatRequest req;
  req.model = options.chat.model;
  req.temperature = options.chat.temperature;
  req.max_tokens = options.chat.max_tokens;
  req.messages = {{"system", strings.get("summarizer_prompt")}, {"user", transcript.str()}};
  const auto reply = options.summarizer->complete(req);

  std::vector<std::string> points;
  std::istringstream lines(reply.text);
  std::string line;
  while (std::getline(lines, line)) {
    std::string_view v(line);
    while (!v.empty()) {
      if (v.front() == ' ' || v.front() == '\t' || v.front() == '-' || v.front() == '*') {
        v.remove_prefix(1);
      } else if (v.starts_with("\u2022")) {
        v.remove_prefix(std::string_view("\u2022").size());
      } else {
        break;
      }
    }
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t' || v.back() == '\r')) v.remove_suffix(1);
    if (!v.empty()) points.emplace_back(v);
  }
  return points;
}

}  // namespace

std::vector<std::string> extract_key_points(std::span<const ConversationTurn> turns,
                                            const EmotionSummary& summary,
                                            const ReportStrings& strings) {
  std::vector<std::string> points;
  if (turns.empty()) return points;
  auto point = [&](const char* key, const ConversationTurn& t,
                   std::map<std::string, std::string> extra = {}) {
    extra["date"] = format_iso8601(t.created_at);
    extra["text"] = excerpt(t.user_text);
    extra["n"] = std::to_string(t.turn_index + 1);
    return strings.format(key, extra);
  };
  points.push_back(point("first_turn", turns.front()));
  if (turns.size() > 1) points.push_back(point("last_turn", turns.back()));

  const int angry = summary.count(EmotionLabel::angry);
  const int sad = summary.count(EmotionLabel::sad);
  if (angry + sad > 0) {
    const EmotionLabel worst = angry >= sad ? EmotionLabel::angry : EmotionLabel::sad;
    const auto it = std::find_if(turns.rbegin(), turns.rend(),
                                 [&](const ConversationTurn& t) { return t.final_emotion == worst; });
    points.push_back(point("negative_turn", *it,
                           {{"emotion", strings.emotion(worst)},
                            {"count", std::to_string(summary.count(worst))},
                            {"total", std::to_string(summary.total())}}));
  }
  return points;
}

Report build_report(const Patient& patient, const Psychologist& psychologist,
                    std::vector<ConversationTurn> turns, const ReportStrings& strings,
                    Timestamp generated_at, const ReportOptions& options) {
  std::stable_sort(turns.begin(), turns.end(), [](const auto& a, const auto& b) {
    return a.turn_index < b.turn_index;
  });
  Report r;
  r.patient = patient;
  r.psychologist = psychologist;
  r.summary = summarize_emotions(turns);
  r.turns = std::move(turns);
  r.generated_at = generated_at;
  if (options.summarizer != nullptr && !r.turns.empty()) {
    try {
      r.key_points = summarize_with_chat(r.turns, strings, options);
      r.key_points_summarized = !r.key_points.empty();
    } catch (const std::exception& e) {
      spdlog::warn("report summarizer {} failed: {}; using extractive key points",
                   options.summarizer->id(), e.what());
    }
  }
  if (r.key_points.empty()) r.key_points = extract_key_points(r.turns, r.summary, strings);
  return r;
}

Report build_report(const db::Store& store, PatientId patient_id, const ReportStrings& strings,
                    Timestamp generated_at, const ReportOptions& options) {
  const auto patient = store.find_patient(patient_id);
  if (!patient) throw Error(Errc::UnknownPatient, "no patient with id " + std::to_string(patient_id));
  const auto psychologist = store.find_psychologist(patient->psychologist_id);
  if (!psychologist) {
    throw Error(Errc::UnknownPsychologist,
                "patient " + std::to_string(patient_id) + " has no psychologist on record");
  }
  return build_report(*patient, *psychologist, store.get_history(patient_id), strings, generated_at,
                      options);
}

namespace {

std::vector<EmotionLabel> table_rows(const EmotionSummary& s) {
  std::vector<EmotionLabel> rows(kConcreteEmotions.begin(), kConcreteEmotions.end());
  if (s.count(EmotionLabel::unknown) > 0) rows.push_back(EmotionLabel::unknown);
  return rows;
}

std::string period_text(const Report& r, const ReportStrings& s) {
  if (!r.summary.window) return s.get("empty");
  const auto& w = *r.summary.window;
  return s.format("period_value", {{"first", format_iso8601(w.first_at)},
                                   {"last", format_iso8601(w.last_at)},
                                   {"first_n", std::to_string(w.first_turn_index + 1)},
                                   {"last_n", std::to_string(w.last_turn_index + 1)}});
}

void quote_markdown(std::ostringstream& out, const std::string& text) {
  std::istringstream lines(text);
  std::string line;
  bool any = false;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out << ">" << (line.empty() ? "" : " ") << line << "\n";
    any = true;
  }
  if (!any) out << ">\n";
}

std::string render_markdown(const Report& r, const ReportStrings& s) {
  std::ostringstream out;
  out << "# " << s.get("title") << "\n\n";
  out << "- **" << s.get("patient") << ":** " << r.patient.name << " (#" << r.patient.id << ")\n";
  out << "- **" << s.get("psychologist") << ":** " << r.psychologist.name << " <"
      << r.psychologist.email << ">\n";
  out << "- **" << s.get("generated_at") << ":** " << format_iso8601(r.generated_at) << "\n";
  out << "- **" << s.get("period") << ":** " << period_text(r, s) << "\n\n";

  out << "## " << s.get("summary_heading") << "\n\n";
  out << "| " << s.get("emotion_column") << " | " << s.get("count_column") << " | "
      << s.get("percent_column") << " |\n";
  out << "|---|---:|---:|\n";
  for (auto l : table_rows(r.summary)) {
    out << "| " << s.emotion(l) << " | " << r.summary.count(l) << " | " << pct(r.summary.percent(l))
        << " |\n";
  }
  const double total_pct = r.summary.total() > 0 ? 100.0 : 0.0;
  out << "| **" << s.get("total") << "** | " << r.summary.total() << " | " << pct(total_pct)
      << " |\n\n";

  out << "## " << s.get("key_points_heading") << "\n\n";
  if (r.key_points.empty()) {
    out << s.get("empty") << "\n\n";
  } else {
    for (const auto& p : r.key_points) out << "- " << p << "\n";
    out << "\n";
  }

  out << "## " << s.get("interactions_heading") << "\n\n";
  if (r.turns.empty()) {
    out << s.get("empty") << "\n";
    return out.str();
  }
  for (const auto& t : r.turns) {
    out << "### " << s.format("interaction", {{"n", std::to_string(t.turn_index + 1)}}) << "\n\n";
    out << "- **" << s.get("date") << ":** " << format_iso8601(t.created_at) << "\n";
    out << "- **" << s.get("audio_emotion") << ":** " << s.emotion(t.audio_emotion) << "\n";
    out << "- **" << s.get("text_sentiment") << ":** " << s.sentiment(t.text_sentiment) << "\n";
    out << "- **" << s.get("final_emotion") << ":** " << s.emotion(t.final_emotion) << "\n\n";
    out << "**" << s.get("user") << ":**\n\n";
    quote_markdown(out, t.user_text);
    out << "\n**" << s.get("assistant") << ":**\n\n";
    quote_markdown(out, t.reply_text);
    out << "\n";
  }
  return out.str();
}

std::string html_escape(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  for (char c : in) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

// One <p> per source line.
void html_text_block(std::ostringstream& out, const std::string& text) {
  out << "<blockquote>";
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out << "<p>" << html_escape(line) << "</p>";
  }
  out << "</blockquote>\n";
}

std::string render_html(const Report& r, const ReportStrings& s) {
  std::ostringstream out;
  auto e = [](const std::string& v) { return html_escape(v); };
  out << "<!DOCTYPE html>\n<html lang=\"pt-BR\">\n<head><meta charset=\"utf-8\"><title>"
      << e(s.get("title")) << "</title></head>\n<body>\n";
  out << "<h1>" << e(s.get("title")) << "</h1>\n<ul>\n";
  out << "<li><strong>" << e(s.get("patient")) << ":</strong> " << e(r.patient.name) << " (#"
      << r.patient.id << ")</li>\n";
  out << "<li><strong>" << e(s.get("psychologist")) << ":</strong> " << e(r.psychologist.name)
      << " &lt;" << e(r.psychologist.email) << "&gt;</li>\n";
  out << "<li><strong>" << e(s.get("generated_at")) << ":</strong> "
      << format_iso8601(r.generated_at) << "</li>\n";
  out << "<li><strong>" << e(s.get("period")) << ":</strong> " << e(period_text(r, s)) << "</li>\n";
  out << "</ul>\n";

  out << "<h2>" << e(s.get("summary_heading")) << "</h2>\n<table>\n<thead><tr><th>"
      << e(s.get("emotion_column")) << "</th><th>" << e(s.get("count_column")) << "</th><th>"
      << e(s.get("percent_column")) << "</th></tr></thead>\n<tbody>\n";
  for (auto l : table_rows(r.summary)) {
    out << "<tr><td>" << e(s.emotion(l)) << "</td><td>" << r.summary.count(l) << "</td><td>"
        << pct(r.summary.percent(l)) << "</td></tr>\n";
  }
  out << "<tr><th>" << e(s.get("total")) << "</th><td>" << r.summary.total() << "</td><td>"
      << pct(r.summary.total() > 0 ? 100.0 : 0.0) << "</td></tr>\n</tbody>\n</table>\n";

  out << "<h2>" << e(s.get("key_points_heading")) << "</h2>\n";
  if (r.key_points.empty()) {
    out << "<p>" << e(s.get("empty")) << "</p>\n";
  } else {
    out << "<ul>\n";
    for (const auto& p : r.key_points) out << "<li>" << e(p) << "</li>\n";
    out << "</ul>\n";
  }

  out << "<h2>" << e(s.get("interactions_heading")) << "</h2>\n";
  if (r.turns.empty()) out << "<p>" << e(s.get("empty")) << "</p>\n";
  for (const auto& t : r.turns) {
    out << "<section>\n<h3>" << e(s.format("interaction", {{"n", std::to_string(t.turn_index + 1)}}))
        << "</h3>\n<ul>\n";
    out << "<li><strong>" << e(s.get("date")) << ":</strong> " << format_iso8601(t.created_at)
        << "</li>\n";
    out << "<li><strong>" << e(s.get("audio_emotion")) << ":</strong> " << e(s.emotion(t.audio_emotion))
        << "</li>\n";
    out << "<li><strong>" << e(s.get("text_sentiment")) << ":</strong> "
        << e(s.sentiment(t.text_sentiment)) << "</li>\n";
    out << "<li><strong>" << e(s.get("final_emotion")) << ":</strong> " << e(s.emotion(t.final_emotion))
        << "</li>\n</ul>\n";
    out << "<h4>" << e(s.get("user")) << "</h4>\n";
    html_text_block(out, t.user_text);
    out << "<h4>" << e(s.get("assistant")) << "</h4>\n";
    html_text_block(out, t.reply_text);
    out << "</section>\n";
  }
  out << "</body>\n</html>\n";
  return out.str();
}

}  // namespace

std::string render_report(const Report& report, Format format, const ReportStrings& strings) {
  return format == Format::markdown ? render_markdown(report, strings) : render_html(report, strings);
}

}  // namespace emotalk::reporting
