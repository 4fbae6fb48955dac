#include "gnnlink/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "gnnlink/error.hpp"
#include "gnnlink/text.hpp"

namespace gnnlink {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw DataError("labels and scores differ in length");
  if (a == 0) throw DataError("no samples to evaluate");
}

double f1_from(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  const std::uint64_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const int> labels, std::span<const double> probabilities,
                                 double threshold) {
  check_lengths(labels.size(), probabilities.size());
  ConfusionMatrix cm;
  cm.threshold = threshold;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = probabilities[i] >= threshold;
    if (labels[i] == 1)
      ++(predicted ? cm.tp : cm.fn);
    else
      ++(predicted ? cm.fp : cm.tn);
  }
  return cm;
}

// 2PR/(P+R) reduces to 2tp/(2tp+fp+fn), which is also 0 when tp == 0.
double f1_score(const ConfusionMatrix& cm) { return f1_from(cm.tp, cm.fp, cm.fn); }

double macro_f1_score(const ConfusionMatrix& cm) {
  return 0.5 * (f1_from(cm.tp, cm.fp, cm.fn) + f1_from(cm.tn, cm.fn, cm.fp));
}

RocCurve roc_auc(std::span<const int> labels, std::span<const double> scores) {
  check_lengths(labels.size(), scores.size());
  std::uint64_t pos = 0;
  for (int y : labels) pos += y == 1;
  const std::uint64_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw DataError("roc_auc: both classes must be present");

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  const double inf = std::numeric_limits<double>::infinity();
  roc.points.push_back({0.0, 0.0, inf});
  // Twice the area in units of (1 positive x 1 negative), kept integral for exactness.
  std::uint64_t twice_area = 0;  // bounded by 2 * pos * neg
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    std::uint64_t dtp = 0, dfp = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i) ++(labels[order[i]] == 1 ? dtp : dfp);
    twice_area += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    roc.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  roc.auc = static_cast<double>(static_cast<long double>(twice_area) /
                                (2.0L * static_cast<long double>(pos) * static_cast<long double>(neg)));
  return roc;
}

EvalReport evaluate(std::span<const int> labels, std::span<const double> probabilities, double threshold) {
  EvalReport r;
  r.confusion = confusion_matrix(labels, probabilities, threshold);
  r.f1 = f1_score(r.confusion);
  r.macro_f1 = macro_f1_score(r.confusion);
  r.roc = roc_auc(labels, probabilities);
  return r;
}

std::string format_eval_report(const EvalReport& report) {
  const auto& cm = report.confusion;
  auto line = [](const std::string& k, const std::string& v) { return k + ": " + v + "\n"; };
  std::string out;
  out += line("threshold", format_decimal(cm.threshold, 6));
  out += line("samples", std::to_string(cm.total()));
  out += line("tp", std::to_string(cm.tp));
  out += line("fp", std::to_string(cm.fp));
  out += line("tn", std::to_string(cm.tn));
  out += line("fn", std::to_string(cm.fn));
  out += line("tpr", format_decimal(cm.tpr(), 6));
  out += line("tnr", format_decimal(cm.tnr(), 6));
  out += line("fpr", format_decimal(cm.fpr(), 6));
  out += line("fnr", format_decimal(cm.fnr(), 6));
  out += line("precision", format_decimal(cm.precision(), 6));
  out += line("accuracy", format_decimal(cm.accuracy(), 6));
  out += line("f1", format_decimal(report.f1, 6));
  out += line("macro_f1", format_decimal(report.macro_f1, 6));
  out += line("auc", format_decimal(report.roc.auc, 6));
  return out;
}

std::string format_roc_points(const RocCurve& roc) {
  std::string out = "fpr,tpr\n";
  for (const auto& p : roc.points) out += format_decimal(p.fpr, 8) + "," + format_decimal(p.tpr, 8) + "\n";
  return out;
}

}  // namespace gnnlink
