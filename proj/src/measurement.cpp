#include "sentdiag/measurement.hpp"

#include <tuple>

#include "sentdiag/errors.hpp"

namespace sentdiag::measure {

namespace {

std::size_t slot(SentimentLabel l) {
  switch (l) {
    case SentimentLabel::Negative: return 0;
    case SentimentLabel::Neutral: return 1;
    case SentimentLabel::Positive: return 2;
  }
  return 1;
}

}  // namespace

double effective(double score, double coverage) { return score * coverage; }

ClassScores f1_scores(std::span<const SentimentLabel> reference,
                      std::span<const std::optional<SentimentLabel>> predictions) {
  if (reference.empty()) throw PreconditionError("F1 needs a non-empty reference");
  if (reference.size() != predictions.size()) {
    throw PreconditionError("reference has " + std::to_string(reference.size()) + " items but there are " +
                            std::to_string(predictions.size()) + " predictions");
  }
  std::array<std::size_t, 3> tp{}, fp{}, fn{};
  std::array<bool, 3> present{};
  ClassScores out;
  out.items = reference.size();
  for (std::size_t i = 0; i < reference.size(); ++i) {
    present[slot(reference[i])] = true;
    if (!predictions[i]) continue;
    ++out.covered;
    const auto r = slot(reference[i]);
    const auto p = slot(*predictions[i]);
    if (r == p) {
      ++tp[r];
    } else {
      ++fp[p];
      ++fn[r];
    }
  }
  double sum = 0.0;
  std::size_t classes = 0;
  for (auto label : kAllLabels) {
    const auto k = slot(label);
    if (!present[k]) continue;
    const auto denom = 2 * tp[k] + fp[k] + fn[k];
    const double f1 = denom == 0 ? 0.0 : static_cast<double>(2 * tp[k]) / static_cast<double>(denom);
    out.per_class_f1[label] = f1;
    ++classes;
  }
  // Sum in a fixed class order so the mean is reproducible bit for bit.
  for (const auto& [label, f1] : out.per_class_f1) sum += f1;
  out.macro_f1 = sum / static_cast<double>(classes);
  out.coverage = static_cast<double>(out.covered) / static_cast<double>(out.items);
  out.effective_f1 = effective(out.macro_f1, out.coverage);
  return out;
}

std::vector<std::optional<SentimentLabel>> predicted_labels(std::span<const probe::ModelVerdict> verdicts) {
  std::vector<std::optional<SentimentLabel>> out;
  out.reserve(verdicts.size());
  for (const auto& v : verdicts) out.push_back(v.covered ? v.label : std::nullopt);
  return out;
}

ClassScores f1_scores(std::span<const SentimentLabel> reference, std::span<const probe::ModelVerdict> verdicts) {
  const auto preds = predicted_labels(verdicts);
  return f1_scores(reference, preds);
}

ConfidenceScores confidence_scores(std::span<const probe::ModelVerdict> verdicts) {
  ConfidenceScores out;
  out.items = verdicts.size();
  double sum = 0.0;
  std::size_t with_conf = 0;
  for (const auto& v : verdicts) {
    if (!v.covered) continue;
    ++out.covered;
    if (v.confidence) {
      sum += *v.confidence;
      ++with_conf;
    }
  }
  out.coverage = out.items == 0 ? 0.0 : static_cast<double>(out.covered) / static_cast<double>(out.items);
  if (with_conf > 0) {
    out.mean_confidence = sum / static_cast<double>(with_conf);
    out.effective_confidence = *out.mean_confidence * out.coverage;
  }
  return out;
}

KappaResult cohen_kappa(std::span<const std::optional<SentimentLabel>> a,
                        std::span<const std::optional<SentimentLabel>> b) {
  if (a.size() != b.size()) throw PreconditionError("kappa needs label vectors of equal length");
  std::array<long long, 3> ca{}, cb{};
  long long agree = 0;
  long long n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i] || !b[i]) continue;
    ++n;
    ++ca[slot(*a[i])];
    ++cb[slot(*b[i])];
    if (*a[i] == *b[i]) ++agree;
  }
  KappaResult out;
  out.n = static_cast<std::size_t>(n);
  if (n == 0) return out;
  long long chance = 0;
  for (std::size_t k = 0; k < 3; ++k) chance += ca[k] * cb[k];
  const long long denom = n * n - chance;
  // p_e == 1 means both sides used one and the same label throughout.
  if (denom == 0) {
    out.kappa = 1.0;
    return out;
  }
  out.kappa = static_cast<double>(agree * n - chance) / static_cast<double>(denom);
  return out;
}

AgreementMatrix agreement_matrix(const std::vector<std::string>& models,
                                 const std::vector<std::vector<std::optional<SentimentLabel>>>& labels) {
  if (models.size() != labels.size()) throw PreconditionError("one label vector per model is required");
  AgreementMatrix m;
  m.models = models;
  m.kappa.assign(models.size(), std::vector<KappaResult>(models.size()));
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t j = i; j < models.size(); ++j) {
      m.kappa[i][j] = cohen_kappa(labels[i], labels[j]);
      m.kappa[j][i] = m.kappa[i][j];
    }
  }
  return m;
}

std::vector<RubricMean> rubric_means(std::span<const rubric::RubricRow> rows) {
  using Key = std::tuple<std::string, std::string, int, int>;  // model, partition, kind, rater kind
  struct Acc {
    std::array<double, 4> sum{};
    std::size_t n = 0;
  };
  std::map<Key, Acc> groups;
  for (const auto& r : rows) {
    auto& acc = groups[Key{r.model, r.partition, static_cast<int>(r.kind), static_cast<int>(r.rater.kind)}];
    for (std::size_t d = 0; d < 4; ++d) acc.sum[d] += r.scores[d];
    ++acc.n;
  }
  std::vector<RubricMean> out;
  for (const auto& [key, acc] : groups) {
    const auto kind = static_cast<rubric::Kind>(std::get<2>(key));
    const auto& dims = rubric::dimensions(kind);
    for (std::size_t d = 0; d < 4; ++d) {
      RubricMean m;
      m.model = std::get<0>(key);
      m.partition = std::get<1>(key);
      m.kind = kind;
      m.dimension = std::string(dims[d]);
      m.rater_kind = static_cast<rubric::RaterKind>(std::get<3>(key));
      m.mean = acc.sum[d] / static_cast<double>(acc.n);
      m.n = acc.n;
      out.push_back(std::move(m));
    }
  }
  return out;
}

}  // namespace sentdiag::measure
