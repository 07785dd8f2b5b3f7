#include "mtp/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <tuple>

#include "mtp/error.hpp"

namespace mtp {
namespace {

double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

// Rank-based Mann-Whitney statistic with integer doubled ranks, so ties stay
// exact. Returns 0.5 when either class is empty (no pairs to rank).
double rank_auc(const std::vector<double>& pos_scores,
                const std::vector<double>& neg_scores) {
  const std::size_t p = pos_scores.size();
  const std::size_t n = neg_scores.size();
  if (p == 0 || n == 0) return 0.5;

  struct Row {
    double score;
    bool positive;
  };
  std::vector<Row> rows;
  rows.reserve(p + n);
  for (double s : pos_scores) rows.push_back({s, true});
  for (double s : neg_scores) rows.push_back({s, false});
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.score < b.score; });

  // doubled average ranks: a tie group spanning ranks [i+1, j] gets i+1+j each
  std::uint64_t two_rank_pos = 0;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j + 1 < rows.size() && rows[j + 1].score == rows[i].score) ++j;
    std::uint64_t doubled = static_cast<std::uint64_t>(i + 1) +
                            static_cast<std::uint64_t>(j + 1);
    for (std::size_t k = i; k <= j; ++k)
      if (rows[k].positive) two_rank_pos += doubled;
    i = j + 1;
  }
  // 2U = 2R_pos - P(P+1)
  std::uint64_t two_u =
      two_rank_pos - static_cast<std::uint64_t>(p) * static_cast<std::uint64_t>(p + 1);
  return static_cast<double>(two_u) / (2.0 * static_cast<double>(p) * static_cast<double>(n));
}

void append_fixed(std::string& out, const std::string& cell, std::size_t width,
                  bool left) {
  if (left) {
    out += cell;
    for (std::size_t i = cell.size(); i < width; ++i) out += ' ';
  } else {
    for (std::size_t i = cell.size(); i < width; ++i) out += ' ';
    out += cell;
  }
}

std::string two_decimals(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

}  // namespace

MatchResult match_instance(const std::vector<double>& pred, const std::vector<double>& gt,
                           double delta_t, MatchMode mode) {
  MatchResult result;
  result.pred_matched.assign(pred.size(), false);
  result.gt_matched.assign(gt.size(), false);

  if (mode == MatchMode::Exists) {
    for (std::size_t i = 0; i < pred.size(); ++i)
      for (std::size_t j = 0; j < gt.size(); ++j)
        if (std::abs(pred[i] - gt[j]) <= delta_t) {
          result.pred_matched[i] = true;
          result.gt_matched[j] = true;
        }
    return result;
  }

  // greedy one-to-one by ascending distance, indices break ties
  struct Pair {
    double dist;
    std::size_t pi, gi;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t j = 0; j < gt.size(); ++j) {
      double d = std::abs(pred[i] - gt[j]);
      if (d <= delta_t) pairs.push_back({d, i, j});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.dist, a.pi, a.gi) < std::tie(b.dist, b.pi, b.gi);
  });
  for (const Pair& pair : pairs)
    if (!result.pred_matched[pair.pi] && !result.gt_matched[pair.gi]) {
      result.pred_matched[pair.pi] = true;
      result.gt_matched[pair.gi] = true;
    }
  return result;
}

ClassificationMetrics classification_metrics(std::span<const PredictionRecord> preds,
                                             const std::map<std::string, bool>& gts) {
  std::map<std::string, const PredictionRecord*> by_id;
  std::vector<std::string> duplicates, unknown;
  for (const PredictionRecord& p : preds) {
    if (!by_id.emplace(p.conversation_id, &p).second)
      duplicates.push_back(p.conversation_id);
    if (!gts.count(p.conversation_id)) unknown.push_back(p.conversation_id);
  }
  std::vector<std::string> missing;
  for (const auto& [id, label] : gts)
    if (!by_id.count(id)) missing.push_back(id);

  auto join = [](const std::vector<std::string>& ids) {
    std::string out;
    for (const std::string& id : ids) {
      if (!out.empty()) out += ", ";
      out += id;
    }
    return out;
  };
  if (!duplicates.empty())
    throw input_error("duplicate predictions for: " + join(duplicates));
  if (!unknown.empty())
    throw input_error("predictions for unknown conversations: " + join(unknown));
  if (!missing.empty())
    throw input_error("missing predictions for: " + join(missing));

  ClassificationMetrics m;
  std::vector<double> pos_scores, neg_scores;
  bool binary = true;
  for (const auto& [id, label] : gts) {
    const PredictionRecord& p = *by_id.at(id);
    double score = p.effective_score();
    if (score != 0.0 && score != 1.0) binary = false;
    if (label) {
      pos_scores.push_back(score);
      (p.has_tp ? m.confusion.tp : m.confusion.fn) += 1;
    } else {
      neg_scores.push_back(score);
      (p.has_tp ? m.confusion.fp : m.confusion.tn) += 1;
    }
  }

  m.precision = safe_div(m.confusion.tp, m.confusion.tp + m.confusion.fp);
  m.recall = safe_div(m.confusion.tp, m.confusion.tp + m.confusion.fn);
  m.f1 = f1_of(m.precision, m.recall);

  if (pos_scores.empty() || neg_scores.empty()) {
    m.auc = 0.5;
  } else if (binary) {
    // binary scores: the rank statistic collapses to balanced accuracy
    double tnr = safe_div(m.confusion.tn, m.confusion.tn + m.confusion.fp);
    m.auc = (m.recall + tnr) / 2.0;
  } else {
    m.auc = rank_auc(pos_scores, neg_scores);
  }
  return m;
}

DetectionMetrics detection_metrics(std::span<const DetectionInstance> instances,
                                   double delta_t, MatchMode mode) {
  if (!(delta_t > 0.0)) throw input_error("detection_metrics: delta_t must be positive");
  DetectionMetrics m;
  for (std::size_t idx = 0; idx < instances.size(); ++idx) {
    const DetectionInstance& inst = instances[idx];
    if (inst.gt.empty())
      throw input_error("detection instance " + std::to_string(idx) +
                        " has no ground-truth timestamps (positive set only)");
    MatchResult match = match_instance(inst.pred, inst.gt, delta_t, mode);
    m.counts.total_gt += static_cast<int>(inst.gt.size());
    m.counts.total_pred += static_cast<int>(inst.pred.size());
    m.counts.matched_gt +=
        static_cast<int>(std::count(match.gt_matched.begin(), match.gt_matched.end(), true));
    m.counts.matched_pred += static_cast<int>(
        std::count(match.pred_matched.begin(), match.pred_matched.end(), true));
  }
  m.precision = safe_div(m.counts.matched_pred, m.counts.total_pred);
  m.recall = safe_div(m.counts.matched_gt, m.counts.total_gt);
  m.f1 = f1_of(m.precision, m.recall);
  return m;
}

EvaluationResult evaluate_run(std::span<const PredictionRecord> preds,
                              std::span<const ConversationRecord> dataset, double delta_t,
                              MatchMode mode) {
  std::map<std::string, bool> gts;
  std::map<std::string, const ConversationRecord*> records;
  for (const ConversationRecord& r : dataset) {
    bool positive = r.consensus && !r.consensus->turning_points.empty();
    gts[r.conversation.id] = positive;
    records[r.conversation.id] = &r;
  }

  EvaluationResult result;
  result.classification = classification_metrics(preds, gts);

  std::map<std::string, const PredictionRecord*> by_id;
  for (const PredictionRecord& p : preds) by_id[p.conversation_id] = &p;

  std::vector<DetectionInstance> instances;
  std::vector<const ConversationRecord*> positive_records;
  for (const ConversationRecord& r : dataset) {
    const PredictionRecord& p = *by_id.at(r.conversation.id);
    ConversationDiagnostic diag;
    diag.conversation_id = r.conversation.id;
    diag.gt_has_tp = gts.at(r.conversation.id);
    diag.pred_has_tp = p.has_tp;
    if (diag.gt_has_tp) {
      DetectionInstance inst;
      inst.pred = p.timestamps;
      for (const TurningPoint& tp : r.consensus->turning_points)
        inst.gt.push_back(tp.location_s);
      MatchResult match = match_instance(inst.pred, inst.gt, delta_t, mode);
      for (std::size_t i = 0; i < inst.pred.size(); ++i)
        (match.pred_matched[i] ? diag.matched_pred : diag.unmatched_pred)
            .push_back(inst.pred[i]);
      for (std::size_t j = 0; j < inst.gt.size(); ++j)
        (match.gt_matched[j] ? diag.matched_gt : diag.unmatched_gt).push_back(inst.gt[j]);
      instances.push_back(std::move(inst));
      positive_records.push_back(&r);
    }
    result.diagnostics.push_back(std::move(diag));
  }

  result.detection = detection_metrics(instances, delta_t, mode);

  // macro diagnostics: average the per-conversation rates over the positive set
  result.detection_macro.counts = result.detection.counts;
  if (!instances.empty()) {
    double sum_p = 0.0, sum_r = 0.0, sum_f1 = 0.0;
    for (const DetectionInstance& inst : instances) {
      DetectionMetrics one = detection_metrics(std::span(&inst, 1), delta_t, mode);
      sum_p += one.precision;
      sum_r += one.recall;
      sum_f1 += one.f1;
    }
    double n = static_cast<double>(instances.size());
    result.detection_macro.precision = sum_p / n;
    result.detection_macro.recall = sum_r / n;
    result.detection_macro.f1 = sum_f1 / n;
  }
  return result;
}

ReportDocument render_report(std::span<const MethodMetrics> rows) {
  if (rows.empty()) throw input_error("render_report: no method rows");

  std::size_t name_width = 6;  // "method"
  for (const MethodMetrics& row : rows) name_width = std::max(name_width, row.name.size());
  const std::size_t col = 9;

  ReportDocument doc;
  append_fixed(doc.text, "method", name_width, true);
  for (const char* h : {"cls_p", "cls_r", "cls_f1", "cls_auc", "det_p", "det_r", "det_f1"})
    append_fixed(doc.text, h, col, false);
  doc.text += '\n';
  for (const MethodMetrics& row : rows) {
    append_fixed(doc.text, row.name, name_width, true);
    for (double v : {row.classification.precision, row.classification.recall,
                     row.classification.f1, row.classification.auc,
                     row.detection.precision, row.detection.recall, row.detection.f1})
      append_fixed(doc.text, two_decimals(v), col, false);
    doc.text += '\n';
  }
  doc.text += "\nAUC from binary labels equals balanced accuracy (TPR+TNR)/2.\n";

  doc.csv = "method,cls_precision,cls_recall,cls_f1,cls_auc,det_precision,det_recall,det_f1\n";
  for (const MethodMetrics& row : rows) {
    doc.csv += row.name;
    for (double v : {row.classification.precision, row.classification.recall,
                     row.classification.f1, row.classification.auc,
                     row.detection.precision, row.detection.recall, row.detection.f1}) {
      doc.csv += ',';
      doc.csv += two_decimals(v);
    }
    doc.csv += '\n';
  }
  return doc;
}

}  // namespace mtp
