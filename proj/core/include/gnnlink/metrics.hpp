#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gnnlink {

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;
  double threshold = 0.5;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  double tpr() const noexcept { return ratio(tp, tp + fn); }
  double fnr() const noexcept { return ratio(fn, tp + fn); }
  double tnr() const noexcept { return ratio(tn, tn + fp); }
  double fpr() const noexcept { return ratio(fp, tn + fp); }
  double precision() const noexcept { return ratio(tp, tp + fp); }
  double accuracy() const noexcept { return ratio(tp + tn, total()); }

 private:
  static double ratio(std::uint64_t a, std::uint64_t b) noexcept {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  }
};

/// Predicts 1 iff p >= threshold. Throws DataError on empty or mismatched input.
ConfusionMatrix confusion_matrix(std::span<const int> labels, std::span<const double> probabilities,
                                 double threshold = 0.5);

/// F1 of the positive class; 0 when undefined.
double f1_score(const ConfusionMatrix& cm);

/// Unweighted mean of the positive-class and negative-class F1.
double macro_f1_score(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // score at or above which pairs are predicted positive
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) first, (1,1) last
  double auc = 0.0;
};

/// Threshold sweep over distinct scores (ties grouped) with trapezoidal AUC.
/// Throws DataError unless both classes are present.
RocCurve roc_auc(std::span<const int> labels, std::span<const double> scores);

struct EvalReport {
  ConfusionMatrix confusion;
  double f1 = 0.0;
  double macro_f1 = 0.0;
  RocCurve roc;
};

EvalReport evaluate(std::span<const int> labels, std::span<const double> probabilities, double threshold = 0.5);

/// `key: value` lines (counts, rates, F1 scores, AUC).
std::string format_eval_report(const EvalReport& report);

/// Two-column `fpr,tpr` CSV for plotting.
std::string format_roc_points(const RocCurve& roc);

}  // namespace gnnlink
