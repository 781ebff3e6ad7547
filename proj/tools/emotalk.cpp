#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include "emotalk/audio_dsp.hpp"
#include "emotalk/env.hpp"
#include "emotalk/error.hpp"
#include "emotalk/evaluation.hpp"
#include "emotalk/persistence.hpp"
#include "emotalk/reporting.hpp"
#include "emotalk/service.hpp"

using namespace emotalk;

namespace {

dsp::AudioClip load_wav(const std::string& path) {
  const std::string raw = read_file(path);
  const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size());
  return dsp::decode_audio(bytes, dsp::sniff_wav_format(bytes).value_or(dsp::WavFormat::pcm16), path);
}

void write_or_print(const std::string& text, const std::string& out_path) {
  std::cout << text;
  if (out_path.empty()) return;
  std::ofstream out(out_path, std::ios::binary);
  if (!(out << text)) throw Error(Errc::InvalidConfig, "cannot write " + out_path);
}

void dsp_inspect(const std::string& path, const std::string& dump_mel) {
  const auto clip = load_wav(path);
  const dsp::DspConfig cfg;
  const auto mel = dsp::mel_from_clip(clip, cfg);
  std::printf("sample_rate_hz: %d\nduration_s: %.3f\nsamples: %zu\nmel_shape: %zu x %zu\n", clip.sample_rate_hz,
              clip.duration_s(), clip.samples.size(), mel.n_mels(), mel.n_frames());
  if (dump_mel.empty()) return;
  std::FILE* f = std::fopen(dump_mel.c_str(), "w");
  if (f == nullptr) throw Error(Errc::InvalidConfig, "cannot write " + dump_mel);
  for (std::size_t r = 0; r < mel.n_mels(); ++r) {
    for (std::size_t c = 0; c < mel.n_frames(); ++c) std::fprintf(f, c == 0 ? "%.9g" : ",%.9g", mel.values(r, c));
    std::fputc('\n', f);
  }
  std::fclose(f);
}

struct EvalRunArgs {
  std::string data, labels, backend = "baseline", out, format = "markdown", name;
  std::uint64_t seed = 42;
  std::size_t workers = 4;
  bool macro = false;
};

eval::TableFormat table_format(const std::string& name) {
  const auto f = eval::parse_table_format(name);
  if (!f) throw Error(Errc::InvalidConfig, "format must be text, markdown or latex");
  return *f;
}

void print_confusion(const eval::EvalResult& r) {
  std::fprintf(stderr, "n=%ld accuracy=%.4f f1=%.4f\n%-8s", r.n, r.accuracy, r.f1, "");
  for (auto l : kAllEmotions) std::fprintf(stderr, "%8s", std::string(to_string(l)).c_str());
  std::fputc('\n', stderr);
  for (std::size_t t = 0; t < 4; ++t) {
    std::fprintf(stderr, "%-8s", std::string(to_string(kConcreteEmotions[t])).c_str());
    for (long v : r.confusion[t]) std::fprintf(stderr, "%8ld", v);
    std::fputc('\n', stderr);
  }
}

void eval_run(const EvalRunArgs& a) {
  const auto format = table_format(a.format);
  const dsp::DspConfig cfg;
  ::setenv("ET_EMOTION_BACKEND", a.backend.c_str(), 1);
  const auto backend = emotion::make_emotion_backend_from_env(cfg);

  const auto split = eval::split_dataset(eval::load_corpus(a.data, a.labels), a.seed);
  std::fprintf(stderr, "split: %zu train / %zu test (seed %llu)\n", split.train.size(), split.test.size(),
               static_cast<unsigned long long>(a.seed));
  const auto preds = eval::predict_all(
      split.test, [&](const eval::LabeledClip& c) { return eval::classify_file(c.path, *backend, cfg); }, a.workers);
  if (preds.failures > 0) std::fprintf(stderr, "%zu clips failed and count as unknown\n", preds.failures);

  std::vector<EmotionLabel> truth;
  for (const auto& c : split.test) truth.push_back(c.label);
  const auto result = eval::evaluate_predictions(truth, preds.labels, a.name.empty() ? backend->id() : a.name,
                                                 a.macro ? eval::F1Average::macro : eval::F1Average::weighted);
  print_confusion(result);
  write_or_print(eval::render_results_table({result}, format), a.out);
}

void eval_score(const std::string& truth, const std::string& pred, const std::string& name,
                const std::string& format, const std::string& out, bool macro) {
  const auto result = eval::score_label_rows(eval::read_label_csv(truth, false), eval::read_label_csv(pred, true), name,
                                             macro ? eval::F1Average::macro : eval::F1Average::weighted);
  print_confusion(result);
  write_or_print(eval::render_results_table({result}, table_format(format)), out);
}

void report_send(PatientId patient, bool dry_run) {
  const auto store = db::open_store_from_env();
  const auto strings = reporting::report_strings_from_env();
  const auto report = reporting::build_report(*store, patient, strings, now_utc());
  if (dry_run) {
    std::cout << reporting::render_report(report, reporting::Format::markdown, strings);
    return;
  }
  const auto receipt = reporting::send_report_email(report, reporting::smtp_config_from_env(), strings);
  std::printf("sent %s to %s at %s\n", receipt.message_id.c_str(), report.psychologist.email.c_str(),
              format_iso8601(receipt.accepted_at).c_str());
}

void serve(std::optional<int> port) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const auto store = db::open_store_from_env();
  service::PipelineConfig cfg;
  cfg.responder = responder::responder_config_from_env();
  service::Pipeline pipeline(*store, service::backends_from_env(cfg.dsp), responder::prompt_template_from_env(),
                             responder::fallbacks_from_env(), cfg);
  auto server_cfg = service::server_config_from_env();
  if (port) server_cfg.port = *port;
  service::ApiServer server(pipeline, server_cfg);

  std::atomic<bool> signaled{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    signaled = true;
    spdlog::info("signal {}, shutting down", sig);
    server.stop();
  });
  auto release_waiter = [&] {
    if (!signaled) pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  };
  try {
    server.run();
  } catch (...) {
    release_waiter();
    throw;
  }
  release_waiter();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emotion-aware support backend"};
  app.require_subcommand(1);

  auto* dsp_cmd = app.add_subcommand("dsp", "Audio front end")->require_subcommand(1);
  auto* inspect = dsp_cmd->add_subcommand("inspect", "Print rate, duration and Mel shape of a WAV file");
  std::string wav_path, dump_mel;
  inspect->add_option("file", wav_path, "WAV file")->required();
  inspect->add_option("--dump-mel", dump_mel, "Write the Mel matrix as CSV");

  auto* db_cmd = app.add_subcommand("db", "Database maintenance (ET_DB_PATH)")->require_subcommand(1);
  auto* migrate = db_cmd->add_subcommand("migrate", "Apply pending migrations");
  auto* seed = db_cmd->add_subcommand("seed", "Insert fixture data");
  bool demo = false;
  seed->add_flag("--demo", demo, "One psychologist, two patients, six turns")->required();

  auto* report_cmd = app.add_subcommand("report", "Patient reports")->require_subcommand(1);
  auto* send = report_cmd->add_subcommand("send", "Email a patient's report to their psychologist");
  PatientId patient = 0;
  bool dry_run = false;
  send->add_option("--patient", patient, "Patient id")->required();
  send->add_flag("--dry-run", dry_run, "Print the markdown report instead of sending");

  auto* eval_cmd = app.add_subcommand("eval", "Classifier evaluation")->require_subcommand(1);
  auto* run = eval_cmd->add_subcommand("run", "Split a labeled corpus and score an emotion backend on the test part");
  EvalRunArgs run_args;
  run->add_option("--data", run_args.data, "Corpus directory")->required();
  run->add_option("--labels", run_args.labels, "path,label CSV")->required();
  run->add_option("--backend", run_args.backend, "baseline or remote")->check(CLI::IsMember({"baseline", "remote"}));
  run->add_option("--seed", run_args.seed, "Split seed");
  run->add_option("--out", run_args.out, "Also write the table here");
  run->add_option("--format", run_args.format, "text, markdown or latex");
  run->add_option("--name", run_args.name, "Model name in the table");
  run->add_option("--workers", run_args.workers, "Parallel clips")->check(CLI::PositiveNumber);
  run->add_flag("--macro", run_args.macro, "Macro instead of support-weighted F1");

  auto* score = eval_cmd->add_subcommand("score", "Score a predictions CSV against a truth CSV");
  std::string truth_csv, pred_csv, score_name = "model", score_format = "text", score_out;
  bool score_macro = false;
  score->add_option("--truth", truth_csv, "path,label CSV")->required();
  score->add_option("--pred", pred_csv, "path,label CSV; unknown allowed")->required();
  score->add_option("--name", score_name, "Model name in the table");
  score->add_option("--format", score_format, "text, markdown or latex");
  score->add_option("--out", score_out, "Also write the table here");
  score->add_flag("--macro", score_macro, "Macro instead of support-weighted F1");

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  std::optional<int> port;
  serve_cmd->add_option("--port", port, "Listen port (default ET_PORT or 8080)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (inspect->parsed()) {
      dsp_inspect(wav_path, dump_mel);
    } else if (migrate->parsed()) {
      const auto store = db::open_sqlite_store(env_or("ET_DB_PATH", "emotalk.db"), {.migrate_on_open = false});
      const int ran = store->migrate();
      std::printf("applied %d migration(s); schema version %d\n", ran, store->schema_version());
    } else if (seed->parsed()) {
      const auto store = db::open_store_from_env();
      std::puts(db::seed_demo(*store) ? "demo data inserted" : "store already has data; nothing inserted");
    } else if (send->parsed()) {
      report_send(patient, dry_run);
    } else if (run->parsed()) {
      eval_run(run_args);
    } else if (score->parsed()) {
      eval_score(truth_csv, pred_csv, score_name, score_format, score_out, score_macro);
    } else if (serve_cmd->parsed()) {
      serve(port);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(to_string(e.code())).c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
