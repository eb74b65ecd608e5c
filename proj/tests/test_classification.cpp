#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "tagsim/classification.hpp"
#include "tagsim/office_scenario.hpp"

using namespace tagsim;
using namespace tagsim::classify;

namespace {

std::vector<LabeledFix> gaussian_blobs(const std::vector<Eigen::Vector3d>& centers,
                                       int per_class, double sigma, std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<LabeledFix> fixes;
    for (std::size_t c = 0; c < centers.size(); ++c)
        for (int i = 0; i < per_class; ++i) {
            LabeledFix f;
            f.label = static_cast<int>(c);
            f.group = i;
            f.position = centers[c] + Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
            fixes.push_back(f);
        }
    return fixes;
}

}  // namespace

TEST_CASE("accuracy identities") {
    SUBCASE("diagonal-only confusion is 1.0") {
        ConfusionMatrix m(3);
        m.at(0, 0) = 5;
        m.at(1, 1) = 7;
        m.at(2, 2) = 2;
        CHECK(accuracy(m) == 1.0);
    }
    SUBCASE("zero diagonal is 0.0") {
        ConfusionMatrix m(2);
        m.at(0, 1) = 4;
        m.at(1, 0) = 4;
        CHECK(accuracy(m) == 0.0);
    }
    SUBCASE("empty matrix throws") {
        ConfusionMatrix m(2);
        CHECK_THROWS_AS(accuracy(m), InsufficientData);
    }
    SUBCASE("invariant to class relabeling") {
        std::mt19937_64 rng(5);
        std::uniform_int_distribution<int> count(0, 20);
        ConfusionMatrix m(4);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) m.at(r, c) = count(rng);
        const double base = accuracy(m);
        const int perm[4] = {2, 0, 3, 1};
        ConfusionMatrix p(4);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) p.at(perm[r], perm[c]) = m.at(r, c);
        CHECK(accuracy(p) == base);
    }
}

TEST_CASE("oversampling aggregation") {
    SUBCASE("rate 1 on a single fix is the identity") {
        const Eigen::Vector3d x(1.0, -2.0, 3.0);
        CHECK(aggregate_oversampled(std::span(&x, 1), 1) == x);
    }
    SUBCASE("median rejects a gross outlier") {
        const std::vector<Eigen::Vector3d> window = {
            {1.0, 1.0, 1.0}, {1.1, 0.9, 1.0}, {50.0, -40.0, 9.0}};
        const Eigen::Vector3d agg = aggregate_oversampled(window, 3);
        CHECK(agg.x() == doctest::Approx(1.1));
        CHECK(agg.y() == doctest::Approx(0.9));
        CHECK(agg.z() == doctest::Approx(1.0));
    }
    SUBCASE("permutation-invariant within a window") {
        std::mt19937_64 rng(8);
        std::normal_distribution<double> noise(0.0, 1.0);
        std::vector<Eigen::Vector3d> window;
        for (int i = 0; i < 15; ++i)
            window.emplace_back(noise(rng), noise(rng), noise(rng));
        const Eigen::Vector3d base = aggregate_oversampled(window, 15);
        std::shuffle(window.begin(), window.end(), rng);
        CHECK(aggregate_oversampled(window, 15) == base);
    }
    SUBCASE("insufficient samples throw") {
        const Eigen::Vector3d x(0, 0, 0);
        CHECK_THROWS_AS(aggregate_oversampled(std::span(&x, 1), 2), InsufficientData);
    }
}

TEST_CASE("stratified folds preserve class proportions within one sample") {
    std::mt19937_64 rng(3);
    std::vector<int> labels;
    const int counts[] = {57, 103, 31, 10};
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < counts[c]; ++i) labels.push_back(c);
    std::shuffle(labels.begin(), labels.end(), rng);

    const int folds = 10;
    const std::vector<int> fold_of = stratified_folds(labels, folds, 99);
    for (int c = 0; c < 4; ++c) {
        int per_fold[10] = {0};
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == c) ++per_fold[fold_of[i]];
        const int lo = *std::min_element(per_fold, per_fold + folds);
        const int hi = *std::max_element(per_fold, per_fold + folds);
        CHECK(hi - lo <= 1);
    }
}

TEST_CASE("class with fewer samples than folds is a named error") {
    std::vector<int> labels(30, 0);
    labels.resize(37, 7);  // class 7 has 7 samples
    try {
        stratified_folds(labels, 10, 1);
        FAIL("expected InsufficientData");
    } catch (const InsufficientData& e) {
        CHECK(std::string(e.what()).find("class 7") != std::string::npos);
    }
}

TEST_CASE("well-separated classes classify perfectly") {
    std::mt19937_64 rng(11);
    const auto fixes = gaussian_blobs({{0, 0, 0}, {10, 0, 0}}, 60, 0.1, rng);
    for (ClassifierKind kind : {ClassifierKind::NearestCentroid, ClassifierKind::Knn}) {
        ClassifierSpec spec;
        spec.kind = kind;
        const ClassificationReport report = cross_validate(fixes, spec, 10, 42);
        CHECK(report.accuracy == 1.0);
        CHECK(report.folds == 10);
        CHECK(accuracy(report.confusion) == report.accuracy);
    }
}

TEST_CASE("shuffled labels fall to chance level over 38 classes") {
    std::mt19937_64 rng(13);
    std::vector<Eigen::Vector3d> centers;
    for (int i = 0; i < 38; ++i)
        centers.emplace_back(i % 6, i / 6, 0.0);
    auto fixes = gaussian_blobs(centers, 60, 0.5, rng);
    std::vector<int> labels;
    for (const auto& f : fixes) labels.push_back(f.label);
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t i = 0; i < fixes.size(); ++i) fixes[i].label = labels[i];

    ClassifierSpec spec;
    spec.kind = ClassifierKind::Knn;
    const ClassificationReport report = cross_validate(fixes, spec, 10, 7);
    CHECK(report.accuracy > 1.0 / 38.0 - 0.02);
    CHECK(report.accuracy < 1.0 / 38.0 + 0.02);
}

TEST_CASE("ROC curves are monotone staircases; mean curve spans [0,1]") {
    std::mt19937_64 rng(17);
    const auto fixes = gaussian_blobs({{0, 0, 0}, {1.5, 0, 0}, {0, 1.5, 0}}, 40, 0.8, rng);
    ClassifierSpec spec;
    spec.kind = ClassifierKind::Knn;
    const ClassificationReport report = cross_validate(fixes, spec, 5, 3);
    REQUIRE(report.roc_points.size() == 3);
    for (const auto& curve : report.roc_points) {
        REQUIRE(curve.size() >= 2);
        CHECK(curve.front().fpr == 0.0);
        CHECK(curve.back().fpr == 1.0);
        for (std::size_t i = 1; i < curve.size(); ++i) {
            CHECK(curve[i].fpr >= curve[i - 1].fpr);
            CHECK(curve[i].tpr >= curve[i - 1].tpr);
        }
    }
    CHECK(report.mean_roc.front().fpr == 0.0);
    CHECK(report.mean_roc.back().tpr == doctest::Approx(1.0));
}

TEST_CASE("dataset CSV round-trips") {
    std::mt19937_64 rng(23);
    const auto fixes = gaussian_blobs({{1, 2, 3}, {4, 5, 6}}, 12, 0.2, rng);
    std::ostringstream out;
    write_dataset_csv(out, fixes);
    std::istringstream in(out.str());
    const auto back = read_dataset_csv(in, "ds.csv");
    REQUIRE(back.size() == fixes.size());
    for (std::size_t i = 0; i < fixes.size(); ++i) {
        CHECK(back[i].position == fixes[i].position);
        CHECK(back[i].label == fixes[i].label);
        CHECK(back[i].group == fixes[i].group);
    }
    std::istringstream bad("x,y,z,label,group\n1,2,3,0\n");
    CHECK_THROWS_AS(read_dataset_csv(bad, "bad.csv"), ParseError);
}

TEST_CASE("report json carries accuracy, confusion, and roc") {
    std::mt19937_64 rng(29);
    const auto fixes = gaussian_blobs({{0, 0, 0}, {5, 0, 0}}, 20, 0.1, rng);
    ClassifierSpec spec;
    const auto report = cross_validate(fixes, spec, 5, 1);
    const std::string json = report_json(report);
    CHECK(json.find("\"accuracy\": 1.0") != std::string::npos);
    CHECK(json.find("\"confusion\"") != std::string::npos);
    CHECK(json.find("\"mean_roc\"") != std::string::npos);
}

TEST_CASE("office pipeline smoke: separable at reduced size, oversampling helps") {
    scenario::LocalizationSetup setup = scenario::office_default();
    scenario::OfficeDatasetParams params;
    params.windows_per_class = 12;
    params.window_size = 5;
    std::mt19937_64 rng(31);
    const auto dataset = scenario::generate_office_dataset(setup, params, rng);
    CHECK(dataset.size() == 38u * 12u * 5u);

    ClassifierSpec spec;
    spec.kind = ClassifierKind::Knn;
    const auto raw = cross_validate(dataset, spec, 10, 5);
    CHECK(raw.accuracy > 0.7);  // loose floor at smoke-test size

    const auto aggregated = aggregate_dataset(dataset, 5);
    CHECK(aggregated.size() == 38u * 12u);
    const auto agg_report = cross_validate(aggregated, spec, 10, 5);
    CHECK(agg_report.accuracy >= raw.accuracy - 0.05);
}
