#include <gtest/gtest.h>

#include <set>

#include "gnnlink/error.hpp"
#include "gnnlink/metrics.hpp"
#include "oracles.hpp"

using namespace gnnlink;

namespace {

// Labels/probabilities realizing given confusion counts at threshold 0.5.
void fill(std::vector<int>& y, std::vector<double>& p, std::uint64_t tp, std::uint64_t fp, std::uint64_t tn,
          std::uint64_t fn) {
  for (std::uint64_t i = 0; i < tp; ++i) y.push_back(1), p.push_back(0.9);
  for (std::uint64_t i = 0; i < fp; ++i) y.push_back(0), p.push_back(0.7);
  for (std::uint64_t i = 0; i < tn; ++i) y.push_back(0), p.push_back(0.2);
  for (std::uint64_t i = 0; i < fn; ++i) y.push_back(1), p.push_back(0.1);
}

}  // namespace

TEST(Confusion, ThresholdIsInclusive) {
  const std::vector<int> y{1, 0, 1, 0};
  const std::vector<double> p{0.9, 0.6, 0.3, 0.1};
  const auto cm = confusion_matrix(y, p, 0.5);
  EXPECT_EQ(cm.tp, 1u);
  EXPECT_EQ(cm.fp, 1u);
  EXPECT_EQ(cm.tn, 1u);
  EXPECT_EQ(cm.fn, 1u);
  EXPECT_EQ(f1_score(cm), 0.5);
  const std::vector<double> edge{0.5};
  const std::vector<int> one{1};
  EXPECT_EQ(confusion_matrix(one, edge, 0.5).tp, 1u);
}

TEST(Confusion, PublishedCountRates) {
  // Printed counts: 609 true negatives, 502 false positives, 75 false negatives,
  // 1036 true positives.
  std::vector<int> y;
  std::vector<double> p;
  fill(y, p, 1036, 502, 609, 75);
  const auto r = evaluate(y, p, 0.5);
  EXPECT_NEAR(100 * r.confusion.tnr(), 54.82, 0.01);
  EXPECT_NEAR(100 * r.confusion.tpr(), 93.25, 0.01);
  EXPECT_NEAR(r.f1, 2.0 * 1036 / (2.0 * 1036 + 502 + 75), 1e-15);
  EXPECT_NEAR(r.f1, 0.782, 0.001);
  EXPECT_EQ(r.confusion.total(), 2222u);
  EXPECT_DOUBLE_EQ(r.confusion.tpr() + r.confusion.fnr(), 1.0);
  EXPECT_DOUBLE_EQ(r.confusion.tnr() + r.confusion.fpr(), 1.0);
}

TEST(Confusion, MacroF1AndUndefinedCases) {
  ConfusionMatrix cm;
  EXPECT_EQ(f1_score(cm), 0.0);
  cm.tp = 3;
  cm.tn = 5;
  EXPECT_EQ(f1_score(cm), 1.0);
  EXPECT_EQ(macro_f1_score(cm), 1.0);
  cm.fp = 2;
  EXPECT_NEAR(macro_f1_score(cm), 0.5 * (6.0 / 8.0 + 10.0 / 12.0), 1e-15);
}

TEST(Confusion, InputErrors) {
  const std::vector<int> y{1};
  const std::vector<double> p{0.5, 0.2};
  EXPECT_THROW(confusion_matrix(y, p), DataError);
  EXPECT_THROW(confusion_matrix({}, {}), DataError);
}

TEST(Roc, PerfectReversedAndTied) {
  const std::vector<int> y{1, 1, 0, 0};
  EXPECT_EQ(roc_auc(y, std::vector<double>{0.9, 0.8, 0.2, 0.1}).auc, 1.0);
  EXPECT_EQ(roc_auc(y, std::vector<double>{0.1, 0.2, 0.8, 0.9}).auc, 0.0);
  EXPECT_EQ(roc_auc(y, std::vector<double>{0.5, 0.5, 0.5, 0.5}).auc, 0.5);
  EXPECT_THROW(roc_auc(std::vector<int>{1, 1}, std::vector<double>{0.1, 0.2}), DataError);
}

TEST(Roc, CurveEndpointsAndMonotone) {
  Rng rng(2);
  std::vector<int> y;
  std::vector<double> s;
  for (int i = 0; i < 100; ++i) {
    y.push_back(i % 3 == 0);
    s.push_back(static_cast<double>(rng.uniform_index(10)));
  }
  const auto roc = roc_auc(y, s);
  ASSERT_GE(roc.points.size(), 2u);
  EXPECT_EQ(roc.points.front().fpr, 0.0);
  EXPECT_EQ(roc.points.front().tpr, 0.0);
  EXPECT_EQ(roc.points.back().fpr, 1.0);
  EXPECT_EQ(roc.points.back().tpr, 1.0);
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    EXPECT_GE(roc.points[i].fpr, roc.points[i - 1].fpr);
    EXPECT_GE(roc.points[i].tpr, roc.points[i - 1].tpr);
  }
  const std::set<double> distinct(s.begin(), s.end());
  EXPECT_EQ(roc.points.size(), distinct.size() + 1);  // origin plus one point per distinct score
}

TEST(Roc, MatchesMannWhitney) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(59);
    std::vector<int> y(n);
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng.uniform_index(2));
      s[i] = static_cast<double>(rng.uniform_index(8)) / 7.0;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(roc_auc(y, s).auc, oracle::mann_whitney(y, s), 1e-12);
  }
}

TEST(Report, KeyValueFormat) {
  std::vector<int> y;
  std::vector<double> p;
  fill(y, p, 2, 1, 3, 1);
  const auto text = format_eval_report(evaluate(y, p));
  EXPECT_NE(text.find("tp: 2\n"), std::string::npos);
  EXPECT_NE(text.find("auc: "), std::string::npos);
  EXPECT_NE(text.find("f1: "), std::string::npos);
  const auto roc = format_roc_points(roc_auc(y, p));
  EXPECT_EQ(roc.substr(0, 8), "fpr,tpr\n");
}
