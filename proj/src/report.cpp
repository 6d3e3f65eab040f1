#include "sentdiag/report.hpp"

#include <unordered_map>

#include <fmt/format.h>

#include "sentdiag/errors.hpp"

namespace sentdiag::report {

using nlohmann::json;

namespace {

std::vector<std::optional<SentimentLabel>> aligned(const std::vector<probe::ModelVerdict>& verdicts,
                                                   const std::vector<std::string>& ids, const std::string& model,
                                                   std::string_view partition) {
  std::unordered_map<std::string, const probe::ModelVerdict*> by_id;
  for (const auto& v : verdicts) by_id[v.message_id] = &v;
  std::vector<std::optional<SentimentLabel>> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw PreconditionError(fmt::format("{} verdicts for {} lack message {}", partition, model, id));
    }
    out.push_back(it->second->covered ? it->second->label : std::nullopt);
  }
  return out;
}

std::vector<probe::ModelVerdict> restrict_to(const std::vector<probe::ModelVerdict>& verdicts,
                                             const std::vector<std::string>& ids, const std::string& model,
                                             std::string_view partition) {
  std::unordered_map<std::string, const probe::ModelVerdict*> by_id;
  for (const auto& v : verdicts) by_id[v.message_id] = &v;
  std::vector<probe::ModelVerdict> out;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw PreconditionError(fmt::format("{} verdicts for {} lack message {}", partition, model, id));
    }
    out.push_back(*it->second);
  }
  return out;
}

const std::vector<probe::ModelVerdict>* find(const std::map<std::string, std::vector<probe::ModelVerdict>>& m,
                                             const std::string& model) {
  auto it = m.find(model);
  return it == m.end() ? nullptr : &it->second;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json scores_json(const std::optional<measure::ClassScores>& s) {
  if (!s) return nullptr;
  json per = json::object();
  for (const auto& [label, f1] : s->per_class_f1) per[std::string(to_string(label))] = f1;
  return json{{"per_class_f1", per},   {"macro_f1", s->macro_f1}, {"coverage", s->coverage},
              {"effective_f1", s->effective_f1}, {"items", s->items},       {"covered", s->covered}};
}

json confidence_json(const measure::ConfidenceScores& c) {
  return json{{"mean_confidence", opt(c.mean_confidence)},
              {"coverage", c.coverage},
              {"effective_confidence", c.effective_confidence},
              {"undefined", c.undefined()},
              {"items", c.items},
              {"covered", c.covered}};
}

std::string fixed(std::optional<double> v, int places) {
  return v ? fmt::format("{:.{}f}", *v, places) : std::string("-");
}

// Renders rows with left-aligned first column and right-aligned others.
std::string table(const std::string& title, const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) return {};
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::string out = title + "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string line;
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      if (c > 0) line += "  ";
      line += c == 0 ? fmt::format("{:<{}}", rows[i][c], width[c]) : fmt::format("{:>{}}", rows[i][c], width[c]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
    }
  }
  return out + "\n";
}

}  // namespace

MetricsReport compute(const ReportInputs& in) {
  MetricsReport r;
  r.manifest_sha256 = in.manifest_sha256;

  std::vector<std::string> gold_ids;
  std::vector<SentimentLabel> gold_ref;
  for (const auto& m : in.gold) {
    gold_ids.push_back(m.id);
    gold_ref.push_back(m.agreed_label());
  }
  std::vector<std::string> ambiguous_ids;
  for (const auto& m : in.ambiguous) ambiguous_ids.push_back(m.id);

  std::vector<std::string> pre_ids;
  std::vector<SentimentLabel> pre_ref;
  std::vector<std::string> post_ids;
  std::vector<SentimentLabel> post_ref;
  if (in.cf_records) {
    for (const auto& rec : *in.cf_records) {
      pre_ids.push_back(rec.source_id);
      pre_ref.push_back(rec.original_sentiment);
      post_ids.push_back(forge::synthetic_id(rec.source_id));
      post_ref.push_back(rec.target_sentiment);
    }
  }

  std::vector<std::string> kappa_models;
  std::vector<std::vector<std::optional<SentimentLabel>>> kappa_labels;

  for (const auto& model : in.models) {
    ModelMetrics mm;
    mm.model = model;
    if (const auto* gv = find(in.gold_verdicts, model); gv && !gold_ids.empty()) {
      const auto preds = aligned(*gv, gold_ids, model, "gold");
      mm.gold = measure::f1_scores(gold_ref, preds);
      mm.confidence["gold"] = measure::confidence_scores(restrict_to(*gv, gold_ids, model, "gold"));
      kappa_models.push_back(model);
      kappa_labels.push_back(preds);
      if (!pre_ids.empty()) mm.pre_cf = measure::f1_scores(pre_ref, aligned(*gv, pre_ids, model, "gold"));
    }
    if (const auto* av = find(in.ambiguous_verdicts, model); av && !ambiguous_ids.empty()) {
      mm.confidence["ambiguous"] = measure::confidence_scores(restrict_to(*av, ambiguous_ids, model, "ambiguous"));
    }
    if (const auto* sv = find(in.synthetic_verdicts, model); sv && !post_ids.empty()) {
      mm.post_cf = measure::f1_scores(post_ref, aligned(*sv, post_ids, model, "synthetic"));
      mm.confidence["synthetic"] = measure::confidence_scores(restrict_to(*sv, post_ids, model, "synthetic"));
    }
    if (mm.pre_cf && mm.post_cf) mm.delta = mm.post_cf->effective_f1 - mm.pre_cf->effective_f1;
    r.models.push_back(std::move(mm));
  }
  r.gold_agreement = measure::agreement_matrix(kappa_models, kappa_labels);
  r.rubric_means = measure::rubric_means(in.rubric_rows);

  if (in.cf_records) {
    CfSummary cf;
    cf.pool = in.cf_pool_size;
    cf.completed = in.cf_records->size();
    for (const auto& s : in.cf_skips) {
      (s.stage == forge::SkipStage::generation ? cf.generation_failed : cf.selection_failed) += 1;
    }
    for (const auto& rec : *in.cf_records) {
      cf.disputed += rec.flip_disputed ? 1 : 0;
      cf.selection_mismatch += rec.selection_mismatch ? 1 : 0;
      for (auto f : rec.validation_flags) ++cf.flags[std::string(forge::to_string(f))];
    }
    cf.components = forge::component_histogram(*in.cf_records);
    r.cf = std::move(cf);
  }
  return r;
}

json to_json(const MetricsReport& r) {
  json models = json::array();
  for (const auto& m : r.models) {
    json conf = json::object();
    for (const auto& [partition, c] : m.confidence) conf[partition] = confidence_json(c);
    models.push_back(json{{"model", m.model},
                          {"gold", scores_json(m.gold)},
                          {"pre_cf", scores_json(m.pre_cf)},
                          {"post_cf", scores_json(m.post_cf)},
                          {"delta_effective_f1", opt(m.delta)},
                          {"confidence", conf}});
  }
  json kappa = json::array();
  for (const auto& row : r.gold_agreement.kappa) {
    json jr = json::array();
    for (const auto& k : row) jr.push_back(json{{"kappa", opt(k.kappa)}, {"n", k.n}});
    kappa.push_back(jr);
  }
  json means = json::array();
  for (const auto& m : r.rubric_means) {
    means.push_back(json{{"model", m.model},
                         {"partition", m.partition},
                         {"kind", rubric::to_string(m.kind)},
                         {"rater_kind", rubric::to_string(m.rater_kind)},
                         {"dimension", m.dimension},
                         {"mean", m.mean},
                         {"n", m.n}});
  }
  json out{{"manifest_sha256", r.manifest_sha256},
           {"models", models},
           {"gold_agreement", {{"models", r.gold_agreement.models}, {"kappa", kappa}}},
           {"rubric_means", means}};
  if (r.cf) {
    out["counterfactuals"] = json{{"pool", r.cf->pool},
                                  {"completed", r.cf->completed},
                                  {"generation_failed", r.cf->generation_failed},
                                  {"selection_failed", r.cf->selection_failed},
                                  {"disputed", r.cf->disputed},
                                  {"selection_mismatch", r.cf->selection_mismatch},
                                  {"validation_flags", r.cf->flags},
                                  {"components", r.cf->components}};
  } else {
    out["counterfactuals"] = nullptr;
  }
  return out;
}

std::string render_text(const MetricsReport& r) {
  std::string out = "manifest " + r.manifest_sha256 + "\n\n";

  auto f1_of = [](const std::optional<measure::ClassScores>& s, SentimentLabel l) -> std::optional<double> {
    if (!s) return std::nullopt;
    auto it = s->per_class_f1.find(l);
    if (it == s->per_class_f1.end()) return std::nullopt;
    return it->second;
  };

  std::vector<std::vector<std::string>> gold{{"Model", "Positive", "Negative", "Neutral", "Avg", "Coverage"}};
  for (const auto& m : r.models) {
    if (!m.gold) continue;
    gold.push_back({m.model, fixed(f1_of(m.gold, SentimentLabel::Positive), 3),
                    fixed(f1_of(m.gold, SentimentLabel::Negative), 3), fixed(f1_of(m.gold, SentimentLabel::Neutral), 3),
                    fixed(m.gold->macro_f1, 3), fixed(m.gold->coverage, 3)});
  }
  if (gold.size() > 1) out += table("F1 by sentiment class (gold set)", gold);

  std::vector<std::vector<std::string>> eff{
      {"Model", "Pre F1", "Pre Cov", "Pre Eff", "Post F1", "Post Cov", "Post Eff", "Delta"}};
  for (const auto& m : r.models) {
    if (!m.pre_cf && !m.post_cf) continue;
    auto get = [](const std::optional<measure::ClassScores>& s, double measure::ClassScores::*f) {
      return s ? std::optional<double>((*s).*f) : std::nullopt;
    };
    eff.push_back({m.model, fixed(get(m.pre_cf, &measure::ClassScores::macro_f1), 3),
                   fixed(get(m.pre_cf, &measure::ClassScores::coverage), 3),
                   fixed(get(m.pre_cf, &measure::ClassScores::effective_f1), 3),
                   fixed(get(m.post_cf, &measure::ClassScores::macro_f1), 3),
                   fixed(get(m.post_cf, &measure::ClassScores::coverage), 3),
                   fixed(get(m.post_cf, &measure::ClassScores::effective_f1), 3),
                   m.delta ? fmt::format("{:+.3f}", *m.delta) : std::string("-")});
  }
  if (eff.size() > 1) out += table("Effective F1 before and after counterfactual flips", eff);

  std::vector<std::vector<std::string>> conf{{"Model", "Set", "Confidence", "Coverage", "Effective"}};
  for (const auto& m : r.models) {
    for (const auto& [partition, c] : m.confidence) {
      conf.push_back({m.model, partition, fixed(c.mean_confidence, 3), fixed(c.coverage, 3),
                      fixed(c.effective_confidence, 2)});
    }
  }
  if (conf.size() > 1) out += table("Confidence and coverage", conf);

  const auto& km = r.gold_agreement;
  if (!km.models.empty()) {
    std::vector<std::vector<std::string>> kt;
    std::vector<std::string> head{""};
    for (const auto& m : km.models) head.push_back(m);
    kt.push_back(head);
    for (std::size_t i = 0; i < km.models.size(); ++i) {
      std::vector<std::string> row{km.models[i]};
      for (const auto& k : km.kappa[i]) row.push_back(fixed(k.kappa, 3));
      kt.push_back(row);
    }
    out += table("Cohen's kappa between model predictions (gold set)", kt);
  }

  if (!r.rubric_means.empty()) {
    std::vector<std::vector<std::string>> rt{{"Model", "Set", "Rater", "Dimension", "Mean", "n"}};
    for (const auto& m : r.rubric_means) {
      rt.push_back({m.model, m.partition, std::string(rubric::to_string(m.rater_kind)), m.dimension,
                    fixed(m.mean, 3), std::to_string(m.n)});
    }
    out += table("Rubric means", rt);
  }

  if (r.cf) {
    std::vector<std::vector<std::string>> ct{{"Counterfactuals", "Count"}};
    ct.push_back({"pool", std::to_string(r.cf->pool)});
    ct.push_back({"completed", std::to_string(r.cf->completed)});
    ct.push_back({"generation failed", std::to_string(r.cf->generation_failed)});
    ct.push_back({"selection failed", std::to_string(r.cf->selection_failed)});
    ct.push_back({"flip disputed", std::to_string(r.cf->disputed)});
    ct.push_back({"selection mismatch", std::to_string(r.cf->selection_mismatch)});
    for (const auto& [flag, n] : r.cf->flags) ct.push_back({"flag " + flag, std::to_string(n)});
    out += table("Counterfactual summary", ct);
    std::vector<std::vector<std::string>> ht{{"Component", "Count"}};
    for (const auto& [c, n] : r.cf->components) ht.push_back({c, std::to_string(n)});
    if (ht.size() > 1) out += table("Transformation components", ht);
  }
  return out;
}

std::string kappa_csv(const measure::AgreementMatrix& m) {
  std::string out = "model_a,model_b,kappa,n\n";
  for (std::size_t i = 0; i < m.models.size(); ++i) {
    for (std::size_t j = 0; j < m.models.size(); ++j) {
      const auto& k = m.kappa[i][j];
      out += fmt::format("{},{},{},{}\n", m.models[i], m.models[j], k.kappa ? fmt::format("{:.17g}", *k.kappa) : "",
                         k.n);
    }
  }
  return out;
}

}  // namespace sentdiag::report
