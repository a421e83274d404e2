#pragma once

#include "flowhunt/boost.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace flowhunt {

/// counts[t][p]: rows with true class t predicted as p.
struct ConfusionMatrix {
    int n_classes = 0;
    std::vector<std::vector<std::uint64_t>> counts;

    std::uint64_t total() const;
    std::uint64_t row_sum(int t) const;
    std::uint64_t col_sum(int p) const;
    std::uint64_t trace() const;
    bool operator==(const ConfusionMatrix&) const = default;
};

/// One-vs-rest statistics for a single class.
struct ClassStats {
    double precision = 0.0; // == PPV
    double recall = 0.0;    // == sensitivity
    double f1 = 0.0;
    std::uint64_t support = 0;
    double specificity = 0.0;
    double npv = 0.0;
    double accuracy = 0.0;  // (TP + TN) / total
};

/// Zero denominators evaluate to 0 (precision, recall, F1, specificity,
/// NPV); kappa is 0 when expected agreement is 1. Macro averages run over
/// classes that occur in the truth or the predictions.
struct ClassReport {
    std::vector<ClassStats> classes;
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double kappa = 0.0;
    double expected_agreement = 0.0;
    std::uint64_t total = 0;
};

struct RocCurve {
    std::vector<std::pair<double, double>> points; // (fpr, tpr) from (0,0) to (1,1)
    double auc = 0.0;
};

struct MultiClassRoc {
    std::vector<std::optional<RocCurve>> per_class; // nullopt when a class has no positives or no negatives
    double macro_auc = 0.0;
};

namespace metrics {

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, int n_classes);

ClassReport class_report(const ConfusionMatrix& cm);

/// Sweeps thresholds over distinct scores, highest first; tied scores form a
/// single step. AUC by the trapezoid rule.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> y_true, int positive_class);

/// One-vs-rest curves using column c of `proba` as the score for class c.
MultiClassRoc roc_one_vs_rest(const Probabilities& proba, std::span<const int> y_true);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

/// Maps each predicted label to a truth label so that total overlap is
/// maximal under a one-to-one matching. Predicted labels left unmatched
/// (more clusters than truth classes) map to their majority truth label.
std::vector<int> align_labels(std::span<const int> predicted, std::span<const int> truth);

} // namespace metrics
} // namespace flowhunt
