#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sentdiag/corpus.hpp"
#include "sentdiag/rubric.hpp"
#include "sentdiag/sentiment_probe.hpp"

namespace sentdiag::measure {

// Uncovered items are left out of the confusion counts. They only lower
// coverage, and through it effective_f1.
struct ClassScores {
  std::map<SentimentLabel, double> per_class_f1;  // classes present in the reference
  double macro_f1 = 0.0;
  double coverage = 0.0;
  double effective_f1 = 0.0;
  std::size_t items = 0;
  std::size_t covered = 0;
};

// predictions[i] is nullopt when item i is uncovered. Throws PreconditionError
// on an empty reference or a length mismatch.
ClassScores f1_scores(std::span<const SentimentLabel> reference,
                      std::span<const std::optional<SentimentLabel>> predictions);
// Verdicts must be aligned with the reference by position.
ClassScores f1_scores(std::span<const SentimentLabel> reference, std::span<const probe::ModelVerdict> verdicts);

double effective(double score, double coverage);

struct ConfidenceScores {
  std::optional<double> mean_confidence;  // empty when nothing covered carries a confidence
  double coverage = 0.0;
  double effective_confidence = 0.0;
  std::size_t items = 0;
  std::size_t covered = 0;
  bool undefined() const { return !mean_confidence.has_value(); }
};

ConfidenceScores confidence_scores(std::span<const probe::ModelVerdict> verdicts);

struct KappaResult {
  std::optional<double> kappa;  // empty when no item is covered by both
  std::size_t n = 0;            // jointly covered items
};

// Over the positions where both sides are covered. Computed from integer
// counts so that kappa(a, b) == kappa(b, a) exactly.
KappaResult cohen_kappa(std::span<const std::optional<SentimentLabel>> a,
                        std::span<const std::optional<SentimentLabel>> b);

struct AgreementMatrix {
  std::vector<std::string> models;
  std::vector<std::vector<KappaResult>> kappa;
};

// labels[m] holds model m's predictions over the same ordered items.
AgreementMatrix agreement_matrix(const std::vector<std::string>& models,
                                 const std::vector<std::vector<std::optional<SentimentLabel>>>& labels);

struct RubricMean {
  std::string model;
  std::string partition;
  rubric::Kind kind = rubric::Kind::explanation;
  std::string dimension;
  rubric::RaterKind rater_kind = rubric::RaterKind::llm_judge;
  double mean = 0.0;
  std::size_t n = 0;
};

// One entry per (model, partition, rater kind, dimension) that has rows,
// ordered by those keys and then by dimension order within the rubric.
std::vector<RubricMean> rubric_means(std::span<const rubric::RubricRow> rows);

std::vector<std::optional<SentimentLabel>> predicted_labels(std::span<const probe::ModelVerdict> verdicts);

}  // namespace sentdiag::measure
