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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"

namespace {

using namespace cropline;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "failed: ";
      else detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool feasible(const WmdResult& r, const ProcessedDoc& a, const ProcessedDoc& b) {
  const auto& plan = r.plan;
  if (plan.rows.size() != a.nbow.size() || plan.cols.size() != b.nbow.size()) return false;
  for (std::size_t i = 0; i < plan.rows.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < plan.cols.size(); ++j) {
      if (plan.flow(i, j) < -1e-9) return false;
      s += plan.flow(i, j);
    }
    if (std::abs(s - a.nbow.at(plan.rows[i])) > 1e-9) return false;
  }
  for (std::size_t j = 0; j < plan.cols.size(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < plan.rows.size(); ++i) s += plan.flow(i, j);
    if (std::abs(s - b.nbow.at(plan.cols[j])) > 1e-9) return false;
  }
  return true;
}

void switch_probability_reproduction(Outcome& o) {
  const SeasonValues wmds = {{"m1", 0.38}, {"m2", 1.2}, {"m3", 0.1}};
  const auto start = Clock::now();
  const auto sp = switch_probabilities(wmds);
  const double elapsed = seconds_since(start);
  const double p1 = sp.probability.at("m1"), p2 = sp.probability.at("m2"),
               p3 = sp.probability.at("m3");
  o.require(std::abs(p1 - 0.38 / 1.48) <= 1e-6, "m1 full precision");
  o.require(std::abs(p2 - 1.0 / 1.48) <= 1e-6, "m2 full precision");
  o.require(std::abs(p3 - 0.1 / 1.48) <= 1e-6, "m3 full precision");
  o.require(std::abs(p1 - 0.25) <= 0.01, "m1 vs rounded reference 0.25");
  o.require(std::abs(p3 - 0.067) <= 0.01, "m3 vs rounded reference 0.067");
  o.require(std::abs(std::round(p1 * 1000) / 1000 - 0.257) < 1e-12 &&
                std::abs(std::round(p2 * 1000) / 1000 - 0.676) < 1e-12 &&
                std::abs(std::round(p3 * 1000) / 1000 - 0.068) < 1e-12,
            "rounded (0.257, 0.676, 0.068)");
  o.require(sp.recommended == "m3", "argmin is m3");
  o.require(elapsed < 1e-3, "runtime under 1 ms");
  o.detail << (o.pass ? "" : " | ") << "probabilities " << format_fixed(p1, 6) << ", "
           << format_fixed(p2, 6) << ", " << format_fixed(p3, 6) << " in "
           << format_fixed(elapsed * 1e6, 1) << " us";
}

void posterior_normalization(Outcome& o) {
  const auto start = Clock::now();
  const auto two = posterior({{"a", 0.9}, {"b", 0.1}}, {{"a", 0.5}, {"b", 0.5}});
  o.require(std::abs(two.posterior.at("a") - 0.9) <= 1e-12 &&
                std::abs(two.posterior.at("b") - 0.1) <= 1e-12,
            "two-season example");
  std::mt19937_64 rng(2021);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 2 + static_cast<int>(rng() % 6);
    SeasonValues lik, pri;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::string s = "s" + std::to_string(i);
      lik[s] = 0.001 + u(rng);
      pri[s] = 0.001 + u(rng);
      total += pri[s];
    }
    for (auto& [s, v] : pri) v /= total;
    double sum = 0.0;
    for (const auto& [s, v] : posterior(lik, pri).posterior) sum += v;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  const double elapsed = seconds_since(start);
  o.require(worst <= 1e-9, "posteriors sum to 1");
  o.require(elapsed < 1.0, "runtime under 1 s");
  o.detail << (o.pass ? "" : " | ") << "1000 cases, max |sum-1| = " << worst << ", "
           << format_fixed(elapsed * 1e3, 2) << " ms";
}

void ransac_trial_counts(Outcome& o) {
  const auto a = ransac_trials(0.99, 0.5, 2);
  const auto b = ransac_trials(0.99, 0.9, 2);
  const auto c = ransac_trials(0.99, 1.0, 2);
  o.require(a == 17, "(0.99, 0.5, 2) -> 17");
  o.require(b == 3, "(0.99, 0.9, 2) -> 3");
  o.require(c == 1, "e = 1 -> 1");
  o.detail << (o.pass ? "" : " | ") << "trials " << a << ", " << b << ", " << c;
}

void wmd_oracle_equivalence(Outcome& o) {
  const auto table = testing::random_table(10, 4, 1234);
  std::mt19937_64 rng(4);
  const auto start = Clock::now();
  double worst = 0.0;
  int infeasible = 0;
  for (int t = 0; t < 100; ++t) {
    const auto a = to_nbow(testing::random_tokens(rng, 10, 3), table);
    const auto b = to_nbow(testing::random_tokens(rng, 10, 3), table);
    const auto r = wmd_exact(a, b, table);
    worst = std::max(worst, std::abs(r.distance - testing::wmd_oracle(a, b, table)));
    if (!feasible(r, a, b)) ++infeasible;
  }
  const double elapsed = seconds_since(start);
  o.require(worst <= 1e-6, "distance matches oracle");
  o.require(infeasible == 0, std::to_string(infeasible) + " infeasible plans");
  o.require(elapsed < 5.0, "runtime under 5 s");
  o.detail << (o.pass ? "" : " | ") << "100 pairs, max error " << worst << ", "
           << format_fixed(elapsed * 1e3, 2) << " ms";
}

void bound_chain(Outcome& o) {
  const auto table = testing::random_table(12, 4, 99);
  std::mt19937_64 rng(5);
  int centroid_above_relaxed = 0;
  int relaxed_above_exact = 0;
  int centroid_above_exact = 0;
  for (int t = 0; t < 500; ++t) {
    const auto a = to_nbow(testing::random_tokens(rng, 12, 5), table);
    const auto b = to_nbow(testing::random_tokens(rng, 12, 5), table);
    const double exact = wmd_distance(a, b, table);
    const double c = wcd(a, b, table);
    const double r = rwmd(a, b, table);
    if (!(c <= r + 1e-9)) ++centroid_above_relaxed;
    if (!(r <= exact + 1e-9)) ++relaxed_above_exact;
    if (!(c <= exact + 1e-9)) ++centroid_above_exact;
  }
  int rank_mismatches = 0;
  for (int t = 0; t < 20; ++t) {
    std::vector<ProcessedDoc> cands;
    for (int c = 0; c < 25; ++c) cands.push_back(to_nbow(testing::random_tokens(rng, 12, 4), table));
    const auto q = to_nbow(testing::random_tokens(rng, 12, 4), table);
    for (std::size_t k : {std::size_t{1}, std::size_t{5}, cands.size()}) {
      if (rank_by_wmd(q, cands, k, table, true) != rank_by_wmd(q, cands, k, table, false)) {
        ++rank_mismatches;
      }
    }
  }
  o.require(centroid_above_relaxed == 0,
            "wcd > rwmd + 1e-9 on " + std::to_string(centroid_above_relaxed) + "/500 pairs");
  o.require(relaxed_above_exact == 0,
            "rwmd > wmd + 1e-9 on " + std::to_string(relaxed_above_exact) + "/500 pairs");
  o.require(rank_mismatches == 0, std::to_string(rank_mismatches) + " pruned rank mismatches");
  o.detail << (o.pass ? "" : " | ") << "rwmd <= wmd on all 500 pairs: "
           << (relaxed_above_exact == 0 ? "yes" : "no") << ", wcd <= wmd on all 500 pairs: "
           << (centroid_above_exact == 0 ? "yes" : "no") << ", pruned ranking exact on 60 sets: "
           << (rank_mismatches == 0 ? "yes" : "no");
}

void ransac_robustness(Outcome& o) {
  const double truth = -0.03;
  const auto f = testing::line_with_outliers(truth, 0.9, 30, testing::skewing_outliers());
  std::vector<Point> pts;
  for (std::size_t i = 0; i < f.x.size(); ++i) pts.push_back({f.x[i], f.y[i]});
  DriftWindow window(30);
  for (const auto& p : pts) window.push(static_cast<std::int64_t>(p.x), p.y);
  RansacConfig cfg;
  cfg.inlier_threshold = 0.05;
  const auto fit = ransac_fit(window, cfg, kDefaultSeed);
  const auto again = ransac_fit(window, cfg, kDefaultSeed);
  const double ols = testing::least_squares_slope(f.x, f.y);
  const double ransac_err = std::abs(fit.slope - truth) / std::abs(truth);
  const double ols_err = std::abs(ols - truth) / std::abs(truth);
  o.require(ransac_err <= 0.10, "ransac slope within 10%");
  o.require(ols_err > 0.50, "least squares errs by more than 50%");
  o.require(fit.slope == again.slope && fit.intercept == again.intercept,
            "deterministic under fixed seed");
  o.detail << (o.pass ? "" : " | ") << "ransac " << format_fixed(fit.slope, 6) << " ("
           << format_fixed(100 * ransac_err, 2) << "% off), least squares " << format_fixed(ols, 6)
           << " (" << format_fixed(100 * ols_err, 1) << "% off)";
}

void fixture_replay(Outcome& o) {
  const auto cfg = load_config(testing::fixture_dir() / "pipeline.cfg");
  const auto golden = testing::read_file(testing::golden_dir() / "replay_replies.jsonl");
  testing::TempDir dir;
  std::vector<std::string> outputs;
  std::size_t reply_count = 0;
  std::string author;
  for (int run = 0; run < 2; ++run) {
    const auto result = run_replay(testing::fixture_dir() / "log.jsonl", cfg);
    reply_count = result.replies.size();
    if (!result.replies.empty()) author = result.replies.front().contributing_author;
    const auto path = dir.path() / ("replies" + std::to_string(run) + ".jsonl");
    emit_replies(result.replies, path);
    outputs.push_back(testing::read_file(path));
  }
  o.require(reply_count == 1, "exactly one reply (got " + std::to_string(reply_count) + ")");
  o.require(author == "grower_anu", "labeled reply selected (got '" + author + "')");
  o.require(outputs[0] == golden && outputs[1] == golden, "byte-identical to golden");
  o.detail << (o.pass ? "" : " | ") << "selected " << author << ", 2 runs identical";
}

void parser_corpus(Outcome& o) {
  std::size_t checked = 0;
  const auto bad = testing::parser_corpus_mismatches(&checked);
  o.require(checked == 20, "corpus has 20 messages");
  for (const auto& b : bad) o.require(false, b);
  o.detail << (o.pass ? "" : " | ") << checked << " messages, " << bad.size() << " mismatches";
}

void perceptual_hash_properties(Outcome& o) {
  const auto base = testing::gradient_image(64, 48);
  const auto noisy = testing::noise_image(64, 48, 11);
  o.require(hamming(phash(base), phash(base)) == 0, "identity (gradient)");
  o.require(hamming(phash(noisy), phash(noisy)) == 0, "identity (noise)");
  o.require(hamming(phash(base), phash(testing::brighten(base, 20))) == 0,
            "brightness offset on gradient");
  auto dim_noise = noisy;
  for (auto& v : dim_noise.rgb) v = static_cast<std::uint8_t>(v / 2);
  o.require(hamming(phash(dim_noise), phash(testing::brighten(dim_noise, 60))) == 0,
            "brightness offset on noise");
  std::mt19937_64 rng(10000);
  int violations = 0;
  for (int t = 0; t < 10000; ++t) {
    const PerceptualHash a{rng()}, b{rng()}, c{rng()};
    const int ab = hamming(a, b), ba = hamming(b, a), bc = hamming(b, c), ac = hamming(a, c);
    if (hamming(a, a) != 0 || ab != ba || ac > ab + bc || ab < 0 || ab > 64 ||
        ((ab == 0) != (a.bits == b.bits))) {
      ++violations;
    }
  }
  o.require(violations == 0, std::to_string(violations) + " metric axiom violations");
  o.detail << (o.pass ? "" : " | ") << "10000 random triples";
}

class FixedClassifier final : public ClassifierProvider {
 public:
  explicit FixedClassifier(DiseaseVerdict v) : v_(std::move(v)) {}
  DiseaseVerdict classify(const std::filesystem::path&) const override { return v_; }

 private:
  DiseaseVerdict v_;
};

void classifier_contract(Outcome& o) {
  const auto passthrough = classify("leaf.png", FixedClassifier({"early blight", 0.87}));
  o.require(passthrough.label == "early blight" && passthrough.confidence == 0.87,
            "stub verdict passes through");
  auto rejects = [](double confidence) {
    try {
      classify("leaf.png", FixedClassifier({"x", confidence}));
    } catch (const Error& e) {
      return e.kind() == ErrorKind::kValidation;
    }
    return false;
  };
  o.require(rejects(1.5) && rejects(-0.1) && rejects(std::nan("")),
            "out-of-range confidence rejected");
  testing::TempDir dir;
  testing::write_file(dir.path() / "a.png.label", "Leaf Rust,0.5\n");
  const auto sidecar = classify(dir.path() / "a.png", SidecarClassifier{});
  o.require(sidecar.label == "leaf rust" && sidecar.confidence == 0.5, "sidecar verdict read");
  bool missing = false;
  try {
    classify(dir.path() / "b.png", SidecarClassifier{});
  } catch (const Error& e) {
    missing = e.kind() == ErrorKind::kIo;
  }
  o.require(missing, "missing sidecar is an error");
  o.detail << (o.pass ? "" : " | ")
           << "interface contract only; trained-network accuracy is out of scope";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"switch probabilities for the reference example", switch_probability_reproduction},
      {"season posterior normalizes", posterior_normalization},
      {"RANSAC trial counts", ransac_trial_counts},
      {"exact WMD matches brute-force transport oracle", wmd_oracle_equivalence},
      {"WCD <= RWMD <= WMD and pruned ranking is exact", bound_chain},
      {"RANSAC slope robust to outliers", ransac_robustness},
      {"fixture replay selects labeled reply", fixture_replay},
      {"parser corpus extractions", parser_corpus},
      {"perceptual hash properties", perceptual_hash_properties},
      {"classifier interface contract", classifier_contract},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s criterion %zu: %s -- %s\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.str().c_str());
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
