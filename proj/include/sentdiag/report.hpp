#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sentdiag/corpus.hpp"
#include "sentdiag/counterfactual.hpp"
#include "sentdiag/measurement.hpp"
#include "sentdiag/rubric.hpp"
#include "sentdiag/sentiment_probe.hpp"

namespace sentdiag::report {

struct ModelMetrics {
  std::string model;
  std::optional<measure::ClassScores> gold;
  // Gold messages that produced a completed flip, scored against their
  // agreed label, and the flips themselves scored against the target.
  std::optional<measure::ClassScores> pre_cf;
  std::optional<measure::ClassScores> post_cf;
  std::optional<double> delta;  // post_cf.effective_f1 - pre_cf.effective_f1
  // Keyed by partition: gold, ambiguous, synthetic.
  std::map<std::string, measure::ConfidenceScores> confidence;
};

struct CfSummary {
  std::size_t pool = 0;
  std::size_t completed = 0;
  std::size_t generation_failed = 0;
  std::size_t selection_failed = 0;
  std::size_t disputed = 0;
  std::size_t selection_mismatch = 0;
  std::map<std::string, std::size_t> flags;
  std::map<std::string, std::size_t> components;
};

struct MetricsReport {
  std::string manifest_sha256;
  std::vector<ModelMetrics> models;
  measure::AgreementMatrix gold_agreement;
  std::vector<measure::RubricMean> rubric_means;
  std::optional<CfSummary> cf;
};

struct ReportInputs {
  std::string manifest_sha256;
  std::vector<std::string> models;
  std::vector<Message> gold;
  std::vector<Message> ambiguous;
  // Per model, keyed by message id. A model may lack a partition entirely.
  std::map<std::string, std::vector<probe::ModelVerdict>> gold_verdicts;
  std::map<std::string, std::vector<probe::ModelVerdict>> ambiguous_verdicts;
  std::map<std::string, std::vector<probe::ModelVerdict>> synthetic_verdicts;
  std::optional<std::vector<forge::CounterfactualRecord>> cf_records;
  std::vector<forge::Skip> cf_skips;
  std::size_t cf_pool_size = 0;
  std::vector<rubric::RubricRow> rubric_rows;
};

// Throws PreconditionError when a verdict file does not cover every message
// of its partition.
MetricsReport compute(const ReportInputs& in);

nlohmann::json to_json(const MetricsReport& r);
// Aligned plain-text tables: 3 decimals for F1 and kappa, 2 for effective
// confidence.
std::string render_text(const MetricsReport& r);
std::string kappa_csv(const measure::AgreementMatrix& m);

}  // namespace sentdiag::report
