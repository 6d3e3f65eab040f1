#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "sentdiag/errors.hpp"
#include "sentdiag/measurement.hpp"
#include "sentdiag/report.hpp"
#include "support.hpp"

using namespace sentdiag;
using namespace sentdiag::measure;
using L = SentimentLabel;
using Opt = std::optional<L>;

namespace {

std::vector<Opt> random_opt_labels(std::mt19937_64& rng, std::size_t n, double p_gap) {
  std::vector<Opt> out(n);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& x : out) {
    if (u(rng) >= p_gap) x = testsupport::kLabels[rng() % 3];
  }
  return out;
}

}  // namespace

TEST(F1, PerfectClassifier) {
  const std::vector<L> ref = {L::Positive, L::Positive, L::Neutral, L::Negative};
  const std::vector<Opt> pred(ref.begin(), ref.end());
  const auto s = f1_scores(ref, pred);
  for (auto& [c, f] : s.per_class_f1) EXPECT_EQ(f, 1.0) << to_string(c);
  EXPECT_EQ(s.coverage, 1.0);
  EXPECT_EQ(s.effective_f1, 1.0);
}

TEST(F1, SixItemConfusion) {
  const std::vector<L> ref = {L::Positive, L::Positive, L::Positive, L::Negative, L::Negative, L::Negative};
  const std::vector<Opt> pred = {L::Positive, L::Positive, L::Negative, L::Negative, L::Negative, L::Positive};
  const auto s = f1_scores(ref, pred);
  EXPECT_DOUBLE_EQ(s.per_class_f1.at(L::Positive), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.per_class_f1.at(L::Negative), 2.0 / 3.0);
  EXPECT_EQ(s.per_class_f1.count(L::Neutral), 0u);
  EXPECT_DOUBLE_EQ(s.macro_f1, 2.0 / 3.0);
}

TEST(F1, UncoveredExcludedFromConfusion) {
  const std::vector<L> ref = {L::Positive, L::Negative, L::Negative, L::Positive};
  const std::vector<Opt> pred = {L::Positive, L::Negative, std::nullopt, std::nullopt};
  const auto s = f1_scores(ref, pred);
  EXPECT_EQ(s.macro_f1, 1.0);
  EXPECT_EQ(s.coverage, 0.5);
  EXPECT_EQ(s.effective_f1, 0.5);
  EXPECT_EQ(s.covered, 2u);
}

TEST(F1, Preconditions) {
  EXPECT_THROW(f1_scores(std::vector<L>{}, std::vector<Opt>{}), PreconditionError);
  EXPECT_THROW(f1_scores(std::vector<L>{L::Positive}, std::vector<Opt>{}), PreconditionError);
}

TEST(F1, OracleEquivalenceAndPermutationInvariance) {
  std::mt19937_64 rng(2024);
  for (int iter = 0; iter < 500; ++iter) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<L> ref(n);
    for (auto& r : ref) r = testsupport::kLabels[rng() % 3];
    const auto pred = random_opt_labels(rng, n, 0.3);
    const auto s = f1_scores(ref, pred);
    const auto o = testsupport::oracle_f1(ref, pred);
    EXPECT_NEAR(s.macro_f1, o.macro, 1e-12);
    EXPECT_NEAR(s.coverage, o.coverage, 1e-12);
    for (auto& [c, f] : o.per_class) EXPECT_NEAR(s.per_class_f1.at(c), f, 1e-12);
    EXPECT_LE(s.effective_f1, s.macro_f1 + 1e-15);
    EXPECT_LE(s.effective_f1, s.coverage + 1e-15);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<L> ref2;
    std::vector<Opt> pred2;
    for (auto i : perm) {
      ref2.push_back(ref[i]);
      pred2.push_back(pred[i]);
    }
    const auto s2 = f1_scores(ref2, pred2);
    EXPECT_NEAR(s2.macro_f1, s.macro_f1, 1e-12);
  }
}

TEST(Effective, ReportedTableRows) {
  EXPECT_NEAR(effective(0.93, 0.376), 0.349, 0.005);
  EXPECT_NEAR(effective(0.98, 0.476), 0.466, 0.005);
  EXPECT_NEAR(effective(4.698, 0.476), 2.236, 0.0005);
  EXPECT_NEAR(effective(3.981, 0.376), 1.497, 0.0005);
}

TEST(Confidence, MeanOverCoveredWithConfidence) {
  std::vector<probe::ModelVerdict> v = {testsupport::covered("a", "m", L::Positive, 5.0),
                                        testsupport::covered("b", "m", L::Positive, 3.0),
                                        testsupport::uncovered("c", "m"), testsupport::uncovered("d", "m")};
  auto s = confidence_scores(v);
  EXPECT_EQ(s.mean_confidence, 4.0);
  EXPECT_EQ(s.coverage, 0.5);
  EXPECT_EQ(s.effective_confidence, 2.0);
  std::vector<probe::ModelVerdict> none = {testsupport::uncovered("c", "m")};
  s = confidence_scores(none);
  EXPECT_TRUE(s.undefined());
  EXPECT_EQ(s.effective_confidence, 0.0);
}

TEST(Kappa, HandCaseIsExactlyPointFour) {
  const std::vector<Opt> a = {L::Positive, L::Positive, L::Negative};
  const std::vector<Opt> b = {L::Positive, L::Negative, L::Negative};
  const auto k = cohen_kappa(a, b);
  ASSERT_TRUE(k.kappa);
  EXPECT_EQ(*k.kappa, 0.4);
  EXPECT_EQ(k.n, 3u);
}

TEST(Kappa, IdentityAndDegenerateCases) {
  const std::vector<Opt> a = {L::Positive, L::Negative, L::Neutral, L::Positive};
  EXPECT_EQ(*cohen_kappa(a, a).kappa, 1.0);
  const std::vector<Opt> same = {L::Positive, L::Positive};
  EXPECT_EQ(*cohen_kappa(same, same).kappa, 1.0);
  const std::vector<Opt> gaps = {std::nullopt, std::nullopt};
  const auto k = cohen_kappa(gaps, same);
  EXPECT_FALSE(k.kappa);
  EXPECT_EQ(k.n, 0u);
}

TEST(Kappa, EngineeredModerateAgreement) {
  // 400 binary items, 346 agreements, balanced marginals: p_o = 0.865, p_e = 0.5.
  std::vector<Opt> a, b;
  auto add = [&](L x, L y, int n) {
    for (int i = 0; i < n; ++i) {
      a.push_back(x);
      b.push_back(y);
    }
  };
  add(L::Positive, L::Positive, 173);
  add(L::Negative, L::Negative, 173);
  add(L::Positive, L::Negative, 27);
  add(L::Negative, L::Positive, 27);
  EXPECT_NEAR(*cohen_kappa(a, b).kappa, 0.73, 1e-12);
}

TEST(Kappa, OracleEquivalenceAndSymmetry) {
  std::mt19937_64 rng(7);
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t n = 1 + rng() % 12;
    const auto a = random_opt_labels(rng, n, 0.25);
    const auto b = random_opt_labels(rng, n, 0.25);
    const auto k = cohen_kappa(a, b);
    const auto o = testsupport::oracle_kappa(a, b);
    ASSERT_EQ(k.kappa.has_value(), o.has_value());
    if (o) EXPECT_NEAR(*k.kappa, *o, 1e-12);
    EXPECT_EQ(cohen_kappa(b, a).kappa, k.kappa);
  }
}

TEST(Agreement, MatrixIsSymmetricWithUnitDiagonal) {
  const std::vector<std::vector<Opt>> labels = {
      {L::Positive, L::Negative, L::Neutral}, {L::Positive, L::Positive, L::Neutral}, {L::Negative, L::Negative, std::nullopt}};
  const auto m = agreement_matrix({"a", "b", "c"}, labels);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(m.kappa[i][i].kappa, 1.0);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(m.kappa[i][j].kappa, m.kappa[j][i].kappa);
  }
  EXPECT_EQ(m.kappa[0][2].n, 2u);
}

namespace {

rubric::RubricRow row(std::string model, std::string partition, rubric::Kind kind, rubric::RaterKind rk,
                      std::array<int, 4> s) {
  rubric::RubricRow r;
  r.item_id = "i";
  r.kind = kind;
  r.rater = {rk, rk == rubric::RaterKind::human ? "rater-a" : "judge"};
  r.model = std::move(model);
  r.partition = std::move(partition);
  r.scores = s;
  return r;
}

}  // namespace

TEST(RubricMeans, SimpleMeans) {
  std::vector<rubric::RubricRow> rows;
  for (int i = 0; i < 20; ++i) rows.push_back(row("gpt-4-32k", "synthetic", rubric::Kind::explanation, rubric::RaterKind::llm_judge, {1, 1, 1, 1}));
  for (int s : {1, 0, 1, 0}) rows.push_back(row("m", "gold", rubric::Kind::explanation, rubric::RaterKind::llm_judge, {s, 1, 1, 1}));
  const auto means = rubric_means(rows);
  auto find = [&](const std::string& model, const std::string& dim) {
    return *std::find_if(means.begin(), means.end(), [&](const RubricMean& m) { return m.model == model && m.dimension == dim; });
  };
  EXPECT_EQ(find("gpt-4-32k", "faithfulness").mean, 1.0);
  EXPECT_EQ(find("gpt-4-32k", "faithfulness").n, 20u);
  EXPECT_EQ(find("m", "faithfulness").mean, 0.5);
}

TEST(RubricMeans, HumanCfQualityColumn) {
  std::vector<rubric::RubricRow> rows;
  const std::array<int, 4> ones = {89, 68, 79, 78};
  for (int i = 0; i < 100; ++i) {
    std::array<int, 4> s{};
    for (int d = 0; d < 4; ++d) s[d] = i < ones[d] ? 1 : 0;
    rows.push_back(row("gen", "synthetic", rubric::Kind::cf_quality, rubric::RaterKind::human, s));
  }
  rows.push_back(row("gen", "synthetic", rubric::Kind::cf_quality, rubric::RaterKind::llm_judge, {1, 1, 1, 1}));
  const auto means = rubric_means(rows);
  std::vector<double> human;
  for (const auto& m : means) {
    if (m.rater_kind == rubric::RaterKind::human) human.push_back(m.mean);
  }
  ASSERT_EQ(human.size(), 4u);
  EXPECT_NEAR(human[0], 0.89, 1e-12);
  EXPECT_NEAR(human[1], 0.68, 1e-12);
  EXPECT_NEAR(human[2], 0.79, 1e-12);
  EXPECT_NEAR(human[3], 0.78, 1e-12);
}

TEST(Report, RendersRoundedTablesAndKeepsFullPrecision) {
  report::ReportInputs in;
  in.manifest_sha256 = "abc";
  in.models = {"m1", "m2"};
  in.gold = {testsupport::msg("g1", "a", L::Positive), testsupport::msg("g2", "b", L::Negative),
             testsupport::msg("g3", "c", L::Neutral)};
  in.gold_verdicts["m1"] = {testsupport::covered("g1", "m1", L::Positive, 4.0), testsupport::covered("g2", "m1", L::Negative, 5.0),
                            testsupport::uncovered("g3", "m1")};
  in.gold_verdicts["m2"] = {testsupport::covered("g1", "m2", L::Positive), testsupport::covered("g2", "m2", L::Positive),
                            testsupport::covered("g3", "m2", L::Neutral)};
  const auto r = report::compute(in);
  ASSERT_EQ(r.models.size(), 2u);
  EXPECT_NEAR(r.models[0].gold->coverage, 2.0 / 3.0, 1e-15);
  const auto j = report::to_json(r);
  EXPECT_EQ(j["manifest_sha256"], "abc");
  const auto text = report::render_text(r);
  EXPECT_NE(text.find("0.667"), std::string::npos);
  EXPECT_NE(text.find("m2"), std::string::npos);
  const auto csv = report::kappa_csv(r.gold_agreement);
  EXPECT_EQ(csv.rfind("model_a,model_b,kappa,n\n", 0), 0u);

  in.gold_verdicts["m2"].pop_back();
  EXPECT_THROW(report::compute(in), PreconditionError);
}
