#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tagsim/errors.hpp"

namespace tagsim::classify {

struct LabeledFix {
    Eigen::Vector3d position{0.0, 0.0, 0.0};
    int label = 0;
    int group = 0;  // oversampling window id
};

struct ConfusionMatrix {
    int n_classes = 0;
    std::vector<std::int64_t> counts;  // row = true class, col = predicted

    explicit ConfusionMatrix(int n = 0) : n_classes(n), counts(static_cast<std::size_t>(n) * n, 0) {}
    std::int64_t& at(int truth, int predicted) {
        return counts[static_cast<std::size_t>(truth) * n_classes + predicted];
    }
    std::int64_t at(int truth, int predicted) const {
        return counts[static_cast<std::size_t>(truth) * n_classes + predicted];
    }
    std::int64_t total() const;
    std::int64_t diagonal() const;
};

// Fraction of correctly predicted labels: trace / total. Throws
// InsufficientData on an empty matrix.
double accuracy(const ConfusionMatrix& confusion);

// Componentwise median of an oversampling window; robust to gross outliers.
// `rate` only validates availability (>= rate fixes present); the aggregate
// uses every fix in the window so it is order-independent.
Eigen::Vector3d aggregate_oversampled(std::span<const Eigen::Vector3d> window, int rate);

// Collapses a dataset to one median fix per oversampling group.
std::vector<LabeledFix> aggregate_dataset(const std::vector<LabeledFix>& fixes, int rate);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct ClassificationReport {
    double accuracy = 0.0;
    ConfusionMatrix confusion;
    std::vector<std::vector<RocPoint>> roc_points;  // one-vs-rest, per class
    std::vector<RocPoint> mean_roc;                 // averaged over classes
    int folds = 0;
    int n_classes = 0;
};

enum class ClassifierKind { NearestCentroid, Knn };

struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::Knn;
    int k = 5;  // neighbors (Knn only)
};

// Fold id per sample: seeded per-class shuffle dealt round-robin, so class
// proportions hold within one sample per fold. Throws InsufficientData naming
// any class with fewer samples than folds.
std::vector<int> stratified_folds(const std::vector<int>& labels, int folds,
                                  std::uint64_t seed);

// Stratified k-fold cross-validation over 3D fixes.
ClassificationReport cross_validate(const std::vector<LabeledFix>& dataset,
                                    const ClassifierSpec& spec, int folds,
                                    std::uint64_t seed);

// Dataset CSV: header `x,y,z,label,group`, labels are small integers.
std::vector<LabeledFix> load_dataset_csv(const std::filesystem::path& path);
std::vector<LabeledFix> read_dataset_csv(std::istream& in, const std::string& name);
void write_dataset_csv(std::ostream& out, const std::vector<LabeledFix>& fixes);

std::string report_json(const ClassificationReport& report);

}  // namespace tagsim::classify
