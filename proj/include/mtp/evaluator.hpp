#pragma once
// Scoring: classification of "has a turning point" over every conversation,
// timestamp detection over the positive subset, and report rendering.

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mtp/types.hpp"

namespace mtp {

struct ClassificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  struct Confusion {
    int tp = 0, fp = 0, fn = 0, tn = 0;
  } confusion;
};

struct DetectionMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  struct Counts {
    int matched_gt = 0, total_gt = 0, matched_pred = 0, total_pred = 0;
  } counts;
};

// Exists: a point is matched iff any counterpart lies within delta_t.
// GreedyOneToOne: pairs consumed by ascending distance, each point used once.
enum class MatchMode { Exists, GreedyOneToOne };

struct DetectionInstance {
  std::vector<double> pred;
  std::vector<double> gt;
};

// Which predictions/gts of one conversation found a counterpart.
struct MatchResult {
  std::vector<bool> pred_matched;
  std::vector<bool> gt_matched;
};

MatchResult match_instance(const std::vector<double>& pred, const std::vector<double>& gt,
                           double delta_t, MatchMode mode);

// Positive class = "has a turning point". AUC is the rank statistic over all
// (positive, negative) pairs; ties credit 0.5. Binary scores reduce to
// (TPR + TNR) / 2 exactly.
ClassificationMetrics classification_metrics(std::span<const PredictionRecord> preds,
                                             const std::map<std::string, bool>& gts);

// Positive set only: every instance needs at least one gt timestamp.
// Micro-averaged pooled counts; zero predictions score precision 0.
DetectionMetrics detection_metrics(std::span<const DetectionInstance> instances,
                                   double delta_t, MatchMode mode = MatchMode::Exists);

struct ConversationDiagnostic {
  std::string conversation_id;
  bool gt_has_tp = false;
  bool pred_has_tp = false;
  // filled for the positive subset only
  std::vector<double> matched_gt, unmatched_gt, matched_pred, unmatched_pred;
};

struct EvaluationResult {
  ClassificationMetrics classification;
  DetectionMetrics detection;        // micro-averaged headline
  DetectionMetrics detection_macro;  // per-conversation averages, diagnostics
  std::vector<ConversationDiagnostic> diagnostics;
};

// Ground truth = consensus turning points (absent consensus means negative).
// Predictions must cover the dataset exactly once each.
EvaluationResult evaluate_run(std::span<const PredictionRecord> preds,
                              std::span<const ConversationRecord> dataset, double delta_t,
                              MatchMode mode = MatchMode::Exists);

struct MethodMetrics {
  std::string name;
  ClassificationMetrics classification;
  DetectionMetrics detection;
};

struct ReportDocument {
  std::string text;  // fixed-width table + footer note
  std::string csv;
};

// One row per method, 2-decimal values, byte-stable given equal inputs.
ReportDocument render_report(std::span<const MethodMetrics> rows);

}  // namespace mtp
