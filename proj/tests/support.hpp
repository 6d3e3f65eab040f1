#pragma once

// Shared fixtures and independent reference implementations for the tests.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sentdiag/corpus.hpp"
#include "sentdiag/provider.hpp"
#include "sentdiag/sentiment_probe.hpp"

namespace testsupport {

using sentdiag::Message;
using sentdiag::SentimentLabel;
namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = fs::temp_directory_path() / ("sentdiag-test-" + std::to_string(rng()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline Message msg(std::string id, std::string text, SentimentLabel a, SentimentLabel b) {
  Message m;
  m.id = std::move(id);
  m.text = std::move(text);
  m.annotator_labels = {a, b};
  return m;
}

inline Message msg(std::string id, std::string text, SentimentLabel both) {
  return msg(std::move(id), std::move(text), both, both);
}

// Fast-failing handle for tests: no real sleeping between attempts.
inline sentdiag::provider::ModelHandle handle(std::string name, std::string endpoint = "mock://test") {
  sentdiag::provider::ModelHandle h;
  h.name = std::move(name);
  h.endpoint = std::move(endpoint);
  h.backoff.base = std::chrono::milliseconds(1);
  h.backoff.jitter = 0.0;
  return h;
}

inline sentdiag::probe::ModelVerdict covered(std::string id, std::string model, SentimentLabel label,
                                             double confidence = 4.0, std::string explanation = "fine") {
  sentdiag::probe::ModelVerdict v;
  v.message_id = std::move(id);
  v.model = std::move(model);
  v.label = label;
  v.confidence = confidence;
  v.explanation = std::move(explanation);
  v.keywords = std::vector<std::string>{};
  v.covered = true;
  return v;
}

inline sentdiag::probe::ModelVerdict uncovered(std::string id, std::string model) {
  sentdiag::probe::ModelVerdict v;
  v.message_id = std::move(id);
  v.model = std::move(model);
  v.failure = sentdiag::probe::VerdictFailure::no_json;
  return v;
}

// ---------------------------------------------------------------------------
// Reference implementations written straight from the textbook definitions.

inline constexpr std::array<SentimentLabel, 3> kLabels = {SentimentLabel::Positive, SentimentLabel::Negative,
                                                          SentimentLabel::Neutral};

// Cohen's kappa via a joint probability table: p_o is the diagonal mass,
// p_e the product of the two marginals summed over classes.
inline std::optional<double> oracle_kappa(const std::vector<std::optional<SentimentLabel>>& a,
                                          const std::vector<std::optional<SentimentLabel>>& b) {
  std::map<std::pair<SentimentLabel, SentimentLabel>, double> joint;
  double n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && b[i]) {
      joint[{*a[i], *b[i]}] += 1;
      n += 1;
    }
  }
  if (n == 0) return std::nullopt;
  double po = 0, pe = 0;
  for (auto x : kLabels) {
    double row = 0, col = 0;
    for (auto y : kLabels) {
      row += joint[{x, y}] / n;
      col += joint[{y, x}] / n;
    }
    po += joint[{x, x}] / n;
    pe += row * col;
  }
  if (pe == 1.0) return 1.0;
  return (po - pe) / (1 - pe);
}

// Per-class F1 as the harmonic mean of precision and recall over covered
// items, macro-averaged over the classes present in the reference.
struct OracleF1 {
  std::map<SentimentLabel, double> per_class;
  double macro = 0;
  double coverage = 0;
};

inline OracleF1 oracle_f1(const std::vector<SentimentLabel>& ref, const std::vector<std::optional<SentimentLabel>>& pred) {
  OracleF1 out;
  std::map<std::pair<SentimentLabel, SentimentLabel>, int> confusion;  // (truth, predicted)
  int covered_n = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (!pred[i]) continue;
    ++covered_n;
    ++confusion[{ref[i], *pred[i]}];
  }
  double sum = 0;
  int classes = 0;
  for (auto c : kLabels) {
    if (std::find(ref.begin(), ref.end(), c) == ref.end()) continue;
    int tp = confusion[{c, c}];
    int predicted = 0, actual = 0;
    for (auto o : kLabels) {
      predicted += confusion[{o, c}];
      actual += confusion[{c, o}];
    }
    double f1 = 0;
    if (tp > 0) {
      const double precision = static_cast<double>(tp) / predicted;
      const double recall = static_cast<double>(tp) / actual;
      f1 = 2 * precision * recall / (precision + recall);
    }
    out.per_class[c] = f1;
    sum += f1;
    ++classes;
  }
  out.macro = sum / classes;
  out.coverage = static_cast<double>(covered_n) / static_cast<double>(ref.size());
  return out;
}

// Random label vector of length n; each position uncovered with probability p_gap.
inline std::vector<std::optional<SentimentLabel>> random_labels(std::mt19937_64& rng, std::size_t n, double p_gap) {
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::optional<SentimentLabel>> out(n);
  for (auto& x : out) {
    if (u(rng) >= p_gap) x = kLabels[static_cast<std::size_t>(pick(rng))];
  }
  return out;
}

}  // namespace testsupport
