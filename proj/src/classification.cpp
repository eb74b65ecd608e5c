#include "tagsim/classification.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tagsim/io_util.hpp"

namespace tagsim::classify {

std::int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::diagonal() const {
    std::int64_t d = 0;
    for (int i = 0; i < n_classes; ++i) d += at(i, i);
    return d;
}

double accuracy(const ConfusionMatrix& confusion) {
    const std::int64_t total = confusion.total();
    if (total == 0) throw InsufficientData("accuracy: empty confusion matrix");
    return static_cast<double>(confusion.diagonal()) / static_cast<double>(total);
}

Eigen::Vector3d aggregate_oversampled(std::span<const Eigen::Vector3d> window, int rate) {
    if (rate < 1) throw InvalidInput("aggregate_oversampled: rate must be >= 1");
    if (static_cast<int>(window.size()) < rate)
        throw InsufficientData("aggregate_oversampled: window smaller than rate");
    Eigen::Vector3d out;
    std::vector<double> comp(window.size());
    for (int axis = 0; axis < 3; ++axis) {
        for (std::size_t i = 0; i < window.size(); ++i) comp[i] = window[i](axis);
        auto mid = comp.begin() + static_cast<std::ptrdiff_t>(comp.size() / 2);
        std::nth_element(comp.begin(), mid, comp.end());
        double median = *mid;
        if (comp.size() % 2 == 0) {
            auto lower = std::max_element(comp.begin(), mid);
            median = 0.5 * (median + *lower);
        }
        out(axis) = median;
    }
    return out;
}

std::vector<LabeledFix> aggregate_dataset(const std::vector<LabeledFix>& fixes, int rate) {
    std::map<std::pair<int, int>, std::vector<Eigen::Vector3d>> windows;
    for (const LabeledFix& f : fixes) windows[{f.label, f.group}].push_back(f.position);
    std::vector<LabeledFix> out;
    out.reserve(windows.size());
    for (const auto& [key, positions] : windows) {
        LabeledFix f;
        f.label = key.first;
        f.group = key.second;
        f.position = aggregate_oversampled(positions, rate);
        out.push_back(f);
    }
    return out;
}

namespace {

struct DenseLabels {
    std::vector<int> labels;          // dense index per fix
    std::vector<int> original;        // dense index -> original label
    int n_classes = 0;
};

DenseLabels densify(const std::vector<LabeledFix>& dataset) {
    DenseLabels d;
    std::map<int, int> remap;
    for (const LabeledFix& f : dataset) remap.emplace(f.label, 0);
    int next = 0;
    for (auto& [orig, idx] : remap) {
        idx = next++;
        d.original.push_back(orig);
    }
    d.n_classes = next;
    d.labels.reserve(dataset.size());
    for (const LabeledFix& f : dataset) d.labels.push_back(remap[f.label]);
    return d;
}

// Scores one test point against every class; returns the predicted dense
// class. scores[c] is higher for more likely classes.
struct NearestCentroid {
    std::vector<Eigen::Vector3d> centroids;

    NearestCentroid(const std::vector<LabeledFix>& data, const std::vector<int>& labels,
                    const std::vector<int>& train_idx, int n_classes) {
        centroids.assign(n_classes, Eigen::Vector3d::Zero());
        std::vector<int> counts(n_classes, 0);
        for (int i : train_idx) {
            centroids[labels[i]] += data[i].position;
            ++counts[labels[i]];
        }
        for (int c = 0; c < n_classes; ++c)
            if (counts[c] > 0) centroids[c] /= static_cast<double>(counts[c]);
    }

    int predict(const Eigen::Vector3d& x, std::vector<double>& scores) const {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            const double d = (x - centroids[c]).squaredNorm();
            scores[c] = -d;
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        return best;
    }
};

struct Knn {
    const std::vector<LabeledFix>& data;
    const std::vector<int>& labels;
    const std::vector<int>& train_idx;
    int k;

    int predict(const Eigen::Vector3d& x, std::vector<double>& scores) const {
        // Max-heap of the k best (distance, label) pairs.
        std::vector<std::pair<double, int>> heap;
        heap.reserve(static_cast<std::size_t>(k) + 1);
        for (int i : train_idx) {
            const double d = (x - data[i].position).squaredNorm();
            if (static_cast<int>(heap.size()) < k) {
                heap.emplace_back(d, labels[i]);
                std::push_heap(heap.begin(), heap.end());
            } else if (d < heap.front().first) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = {d, labels[i]};
                std::push_heap(heap.begin(), heap.end());
            }
        }
        std::fill(scores.begin(), scores.end(), 0.0);
        const double w = 1.0 / static_cast<double>(heap.size());
        for (const auto& [d, label] : heap) scores[label] += w;  // vote fractions
        int best = 0;
        for (std::size_t c = 1; c < scores.size(); ++c)
            if (scores[c] > scores[best]) best = static_cast<int>(c);
        return best;
    }
};

std::vector<RocPoint> roc_curve(const std::vector<std::pair<double, bool>>& scored) {
    // (score, is_positive), threshold swept from high to low.
    std::int64_t n_pos = 0, n_neg = 0;
    for (const auto& [s, pos] : scored) (pos ? n_pos : n_neg)++;
    std::vector<std::pair<double, bool>> sorted = scored;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<RocPoint> curve;
    curve.push_back({0.0, 0.0});
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        const double s = sorted[i].first;
        while (i < sorted.size() && sorted[i].first == s) {
            (sorted[i].second ? tp : fp)++;
            ++i;
        }
        curve.push_back({n_neg > 0 ? static_cast<double>(fp) / n_neg : 0.0,
                         n_pos > 0 ? static_cast<double>(tp) / n_pos : 0.0});
    }
    if (curve.back().fpr != 1.0 || curve.back().tpr != 1.0) curve.push_back({1.0, 1.0});
    return curve;
}

double roc_tpr_at(const std::vector<RocPoint>& curve, double fpr) {
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (curve[i].fpr >= fpr) {
            const RocPoint& a = curve[i - 1];
            const RocPoint& b = curve[i];
            if (b.fpr == a.fpr) return std::max(a.tpr, b.tpr);
            const double t = (fpr - a.fpr) / (b.fpr - a.fpr);
            return a.tpr + t * (b.tpr - a.tpr);
        }
    }
    return 1.0;
}

}  // namespace

std::vector<int> stratified_folds(const std::vector<int>& labels, int folds,
                                  std::uint64_t seed) {
    if (folds < 2) throw InvalidInput("stratified_folds: need at least 2 folds");
    std::map<int, std::vector<int>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[labels[i]].push_back(static_cast<int>(i));
    std::mt19937_64 rng(seed);
    std::vector<int> fold_of(labels.size(), 0);
    for (auto& [label, idx] : by_class) {
        if (static_cast<int>(idx.size()) < folds)
            throw InsufficientData("stratified_folds: class " + std::to_string(label) +
                                   " has only " + std::to_string(idx.size()) +
                                   " samples for " + std::to_string(folds) + " folds");
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t j = 0; j < idx.size(); ++j)
            fold_of[idx[j]] = static_cast<int>(j % static_cast<std::size_t>(folds));
    }
    return fold_of;
}

ClassificationReport cross_validate(const std::vector<LabeledFix>& dataset,
                                    const ClassifierSpec& spec, int folds,
                                    std::uint64_t seed) {
    if (spec.kind == ClassifierKind::Knn && spec.k < 1)
        throw InvalidInput("cross_validate: k must be >= 1");
    const DenseLabels dense = densify(dataset);
    if (dense.n_classes < 2) throw InsufficientData("cross_validate: need at least 2 classes");
    std::vector<int> orig_labels(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) orig_labels[i] = dataset[i].label;
    const std::vector<int> fold_of = stratified_folds(orig_labels, folds, seed);

    ClassificationReport report;
    report.folds = folds;
    report.n_classes = dense.n_classes;
    report.confusion = ConfusionMatrix(dense.n_classes);
    std::vector<std::vector<std::pair<double, bool>>> scored(dense.n_classes);

    std::vector<double> scores(dense.n_classes);
    for (int f = 0; f < folds; ++f) {
        std::vector<int> train_idx, test_idx;
        for (std::size_t i = 0; i < dataset.size(); ++i)
            (fold_of[i] == f ? test_idx : train_idx).push_back(static_cast<int>(i));

        NearestCentroid centroid_model(dataset, dense.labels, train_idx, dense.n_classes);
        Knn knn_model{dataset, dense.labels, train_idx, spec.k};

        for (int i : test_idx) {
            const int truth = dense.labels[i];
            const int predicted = spec.kind == ClassifierKind::NearestCentroid
                                      ? centroid_model.predict(dataset[i].position, scores)
                                      : knn_model.predict(dataset[i].position, scores);
            report.confusion.at(truth, predicted) += 1;
            for (int c = 0; c < dense.n_classes; ++c)
                scored[c].emplace_back(scores[c], truth == c);
        }
    }

    report.accuracy = accuracy(report.confusion);
    report.roc_points.reserve(dense.n_classes);
    for (int c = 0; c < dense.n_classes; ++c) report.roc_points.push_back(roc_curve(scored[c]));

    // Mean curve over classes on a common grid.
    for (int g = 0; g <= 100; ++g) {
        const double fpr = g / 100.0;
        double tpr = 0.0;
        for (const auto& curve : report.roc_points) tpr += roc_tpr_at(curve, fpr);
        report.mean_roc.push_back({fpr, tpr / dense.n_classes});
    }
    return report;
}

std::vector<LabeledFix> read_dataset_csv(std::istream& in, const std::string& name) {
    std::vector<LabeledFix> fixes;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (lineno == 1 && line.rfind("x,", 0) == 0) continue;
        std::istringstream ss(line);
        std::string field;
        double v[3];
        LabeledFix f;
        try {
            for (double& axis : v) {
                if (!std::getline(ss, field, ',')) throw std::invalid_argument("short row");
                axis = std::stod(field);
            }
            if (!std::getline(ss, field, ',')) throw std::invalid_argument("short row");
            f.label = std::stoi(field);
            if (!std::getline(ss, field, ',')) throw std::invalid_argument("short row");
            f.group = std::stoi(field);
        } catch (const std::exception&) {
            throw ParseError(name + ":" + std::to_string(lineno) + ": expected x,y,z,label,group");
        }
        f.position = Eigen::Vector3d(v[0], v[1], v[2]);
        fixes.push_back(f);
    }
    if (fixes.empty()) throw ParseError(name + ": no samples");
    return fixes;
}

std::vector<LabeledFix> load_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset: " + path.string());
    return read_dataset_csv(in, path.filename().string());
}

void write_dataset_csv(std::ostream& out, const std::vector<LabeledFix>& fixes) {
    out << "x,y,z,label,group\n";
    for (const LabeledFix& f : fixes)
        out << format_full(f.position.x()) << ',' << format_full(f.position.y()) << ','
            << format_full(f.position.z()) << ',' << f.label << ',' << f.group << '\n';
}

std::string report_json(const ClassificationReport& report) {
    nlohmann::ordered_json j;
    j["accuracy"] = report.accuracy;
    j["folds"] = report.folds;
    j["n_classes"] = report.n_classes;
    nlohmann::ordered_json confusion = nlohmann::ordered_json::array();
    for (int r = 0; r < report.n_classes; ++r) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (int c = 0; c < report.n_classes; ++c) row.push_back(report.confusion.at(r, c));
        confusion.push_back(row);
    }
    j["confusion"] = confusion;
    auto curve_json = [](const std::vector<RocPoint>& curve) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const RocPoint& p : curve) arr.push_back({p.fpr, p.tpr});
        return arr;
    };
    nlohmann::ordered_json roc = nlohmann::ordered_json::array();
    for (const auto& curve : report.roc_points) roc.push_back(curve_json(curve));
    j["roc_points"] = roc;
    j["mean_roc"] = curve_json(report.mean_roc);
    return j.dump(2) + "\n";
}

}  // namespace tagsim::classify
