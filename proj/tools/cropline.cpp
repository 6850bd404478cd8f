// Copyright 2026 The Cropline Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// cropline: command-line front end for the community-advisory pipeline.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cropline/cropline.hpp"

namespace fs = std::filesystem;
using namespace cropline;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUser = 2;

std::optional<fs::path> config_path_or_env(const std::string& flag) {
  if (!flag.empty()) return fs::path(flag);
  if (const char* env = std::getenv("CROPLINE_CONFIG"); env && *env) return fs::path(env);
  return std::nullopt;
}

StopWords stopwords_from(const std::string& path) {
  return path.empty() ? default_stopwords() : load_stopwords(path);
}

int run_kb(const std::string& csv, const std::string& store) {
  KnowledgeBase kb;
  const std::size_t n = kb.import_csv(csv);
  if (!store.empty()) kb.save_store(store);
  std::cout << "imported " << n << " records, " << kb.seasons().size() << " seasons\n";
  return kExitOk;
}

int run_embed(const std::string& embeddings, const std::string& stopwords,
              const std::string& text) {
  const auto table = load_embeddings(embeddings);
  const auto tokens = preprocess(text, stopwords_from(stopwords));
  std::cout << "tokens:";
  for (const auto& t : tokens) std::cout << ' ' << t;
  std::cout << '\n';
  const ProcessedDoc doc = to_nbow(tokens, table);
  for (const auto& [word, w] : doc.nbow) {
    std::cout << word << ' ' << format_fixed(w, 6) << '\n';
  }
  return kExitOk;
}

int run_wmd(const std::string& embeddings, const std::string& stopwords,
            const std::string& a, const std::string& b) {
  const auto table = load_embeddings(embeddings);
  const auto sw = stopwords_from(stopwords);
  const double d = wmd_distance(embed_text(a, sw, table), embed_text(b, sw, table), table);
  std::cout << format_fixed(d, 6);
  if (d > 1.0) std::cout << " (clipped " << format_fixed(clip_unit(d), 6) << ")";
  std::cout << '\n';
  return kExitOk;
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
  return s;
}

int run_phash(const std::vector<std::string>& images, const std::vector<std::string>& refs,
              int threshold) {
  std::vector<PerceptualHash> hashes;
  for (const auto& img : images) {
    hashes.push_back(phash(fs::path(img)));
    std::cout << hex64(hashes.back().bits) << "  " << img << '\n';
  }
  if (images.size() == 2 && refs.empty()) {
    std::cout << "hamming " << hamming(hashes[0], hashes[1]) << '\n';
  }
  if (!refs.empty()) {
    std::vector<fs::path> ref_paths(refs.begin(), refs.end());
    for (const auto& img : images) {
      const MatchResult m = verify_match(img, ref_paths, threshold);
      std::cout << img << ": " << (m.matched ? "match" : "no match") << " (distance "
                << m.best_distance << ", threshold " << threshold << ")\n";
    }
  }
  return kExitOk;
}

int run_replay(const std::string& log, const std::string& config_flag, const std::string& out_dir,
               const std::vector<std::string>& overrides, std::optional<std::int64_t> seed) {
  const auto cfg_path = config_path_or_env(config_flag);
  if (!cfg_path) throw Error(ErrorKind::kInvalidArgument, "--config or CROPLINE_CONFIG required");
  PipelineConfig cfg = load_config(*cfg_path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kInvalidArgument, "--set expects key=value, got '" + kv + "'");
    }
    apply_setting(cfg, trim(std::string_view(kv).substr(0, eq)), std::string_view(kv).substr(eq + 1));
  }
  if (seed) {
    if (*seed < 0) throw Error(ErrorKind::kInvalidArgument, "--seed must be >= 0");
    cfg.drift.seed = static_cast<std::uint64_t>(*seed);
  }
  const ReplayResult result = cropline::run_replay(fs::path(log), cfg);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  emit_replies(result.replies, out / "replies.jsonl");
  write_drift_report(result.report, out / "drift_report.csv");
  write_skipped(result.report, out / "skipped.csv");
  save_drift_state(out / "drift_state.csv", result.report.final_state);
  std::size_t switches = 0;
  for (const auto& r : result.replies) switches += r.switch_recommended ? 1 : 0;
  std::cout << "replies " << result.replies.size() << ", skipped "
            << result.report.skipped.size() << ", switch recommendations " << switches
            << ", season " << result.report.final_state.current_season << '\n';
  for (const auto& note : result.report.notes) std::cerr << "note: " << note << '\n';
  return kExitOk;
}

int run_drift(const std::string& state_path, const std::string& config_flag) {
  const DriftState state = load_drift_state(state_path);
  PipelineConfig cfg;
  if (const auto cfg_path = config_path_or_env(config_flag)) cfg = load_config(*cfg_path);
  cfg.drift.ransac.validate();
  std::cout << "season " << state.current_season << '\n';
  if (state.window.empty()) {
    std::cout << "window empty\n";
  } else {
    std::cout << "window " << state.window.size() << "/" << state.window.capacity() << '\n';
    if (state.window.size() >= static_cast<std::size_t>(cfg.drift.ransac.sample_size)) {
      const LineFit fit = ransac_fit(state.window, cfg.drift.ransac, cfg.drift.seed);
      std::cout << "ransac slope " << format_fixed(fit.slope, 6) << " (inliers "
                << fit.inlier_count << ")\n";
    }
  }
  if (state.wmds.size() >= 2) {
    const SwitchProbabilities sp = switch_probabilities(state.wmds);
    std::cout << "model wmd switch_probability rounded\n";
    for (const auto& [model, p] : sp.probability) {
      std::cout << model << ' ' << format_fixed(state.wmds.at(model), 6) << ' '
                << format_fixed(p, 6) << ' ' << format_fixed(p, 3) << '\n';
    }
    std::cout << "recommended " << sp.recommended << '\n';
    if (state.window.size() >= static_cast<std::size_t>(cfg.drift.ransac.sample_size)) {
      const SwitchDecision d = should_switch(state.window, cfg.drift.ransac, sp.probability,
                                             state.current_season, cfg.drift.seed);
      std::cout << "decision " << (d.switch_model ? "switch:" + d.target : std::string("stay"))
                << '\n';
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cropline: community plant-disease advisory pipeline"};
  app.require_subcommand(1);

  std::string csv, store;
  auto* kb = app.add_subcommand("kb", "Import a trusted knowledge-base CSV");
  kb->add_option("--csv", csv, "CSV file")->required();
  kb->add_option("--store", store, "SQLite store to write");

  std::string embeddings, stopwords, text;
  auto* embed = app.add_subcommand("embed", "Preprocess text and print its nBOW weights");
  embed->add_option("--embeddings", embeddings, "Embedding text file")->required();
  embed->add_option("--stopwords", stopwords, "Stop-word list (default: built-in)");
  embed->add_option("text", text, "Text to embed")->required();

  std::string text_a, text_b;
  auto* wmd = app.add_subcommand("wmd", "Word Mover's Distance between two texts");
  wmd->add_option("--embeddings", embeddings, "Embedding text file")->required();
  wmd->add_option("--stopwords", stopwords, "Stop-word list (default: built-in)");
  wmd->add_option("text_a", text_a, "First text")->required();
  wmd->add_option("text_b", text_b, "Second text")->required();

  std::vector<std::string> images, refs;
  int threshold = kDefaultMatchThreshold;
  auto* ph = app.add_subcommand("phash", "Difference-hash images, compare or verify them");
  ph->add_option("images", images, "Image files (PNG or JPEG)")->required();
  ph->add_option("--reference", refs, "Reference image(s) to verify against");
  ph->add_option("--threshold", threshold, "Match threshold in bits")->check(CLI::Range(0, 64));

  std::string log, config, out_dir;
  std::vector<std::string> overrides;
  std::optional<std::int64_t> seed;
  auto* replay = app.add_subcommand("replay", "Replay a message log through the pipeline");
  replay->add_option("--log", log, "Message log (JSON lines)")->required();
  replay->add_option("--config", config, "Config file (falls back to $CROPLINE_CONFIG)");
  replay->add_option("--out", out_dir, "Output directory")->required();
  replay->add_option("--seed", seed, "Override the RANSAC seed");
  replay->add_option("--set", overrides, "Override a config key (key=value)");

  std::string state;
  auto* drift = app.add_subcommand("drift", "Show drift window, slope and switch probabilities");
  drift->add_option("--state", state, "Drift state file")->required();
  drift->add_option("--config", config, "Config file (falls back to $CROPLINE_CONFIG)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUser;
  }

  try {
    if (kb->parsed()) return run_kb(csv, store);
    if (embed->parsed()) return run_embed(embeddings, stopwords, text);
    if (wmd->parsed()) return run_wmd(embeddings, stopwords, text_a, text_b);
    if (ph->parsed()) return run_phash(images, refs, threshold);
    if (replay->parsed()) return run_replay(log, config, out_dir, overrides, seed);
    if (drift->parsed()) return run_drift(state, config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_user_error() ? kExitUser : kExitInternal;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
