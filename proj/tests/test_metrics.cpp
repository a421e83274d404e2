#include "flowhunt/error.hpp"
#include "flowhunt/metrics.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace flowhunt;

namespace {

ConfusionMatrix cm(std::vector<std::vector<std::uint64_t>> counts) {
    ConfusionMatrix m;
    m.n_classes = static_cast<int>(counts.size());
    m.counts = std::move(counts);
    return m;
}

void near(double got, double want) { CHECK(std::abs(got - want) <= 1e-12); }

} // namespace

TEST_CASE("confusion counts truth by row and prediction by column") {
    const std::vector<int> t{0, 0, 1, 2, 2, 2};
    const std::vector<int> p{0, 1, 1, 2, 0, 2};
    const ConfusionMatrix m = metrics::confusion(t, p, 3);
    CHECK(m.counts == std::vector<std::vector<std::uint64_t>>{{1, 1, 0}, {0, 1, 0}, {1, 0, 2}});
    CHECK(m.total() == 6);
    CHECK(m.trace() == 4);
    CHECK(m.row_sum(2) == 3);
    CHECK(m.col_sum(0) == 2);
    CHECK_THROWS_AS(metrics::confusion(t, p, 1), DataError);
    CHECK_THROWS_AS(metrics::confusion(t, std::vector<int>{0, 1, 1, 2, 0, 3}, 3), DataError);
    CHECK_THROWS_AS(metrics::confusion(t, std::vector<int>{0}, 3), DataError);
}

TEST_CASE("confusion tally matches a direct count") {
    Rng rng(3);
    std::vector<int> t, p;
    for (int i = 0; i < 500; ++i) {
        t.push_back(static_cast<int>(rng.index(5)));
        p.push_back(static_cast<int>(rng.index(5)));
    }
    const ConfusionMatrix m = metrics::confusion(t, p, 5);
    for (int a = 0; a < 5; ++a) {
        for (int b = 0; b < 5; ++b) {
            std::uint64_t n = 0;
            for (std::size_t i = 0; i < t.size(); ++i) n += t[i] == a && p[i] == b;
            CHECK(m.counts[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] == n);
        }
    }
}

TEST_CASE("report for [[5,1],[2,8]]") {
    const ClassReport r = metrics::class_report(cm({{5, 1}, {2, 8}}));
    near(r.classes[0].precision, 5.0 / 7.0);
    near(r.classes[0].recall, 5.0 / 6.0);
    near(r.classes[0].f1, 10.0 / 13.0);
    near(r.classes[0].specificity, 8.0 / 10.0);
    near(r.classes[0].npv, 8.0 / 9.0);
    near(r.classes[0].accuracy, 13.0 / 16.0);
    near(r.classes[1].precision, 8.0 / 9.0);
    near(r.classes[1].recall, 4.0 / 5.0);
    near(r.classes[1].f1, 16.0 / 19.0);
    near(r.classes[1].specificity, 5.0 / 6.0);
    near(r.classes[1].npv, 5.0 / 7.0);
    CHECK(r.classes[0].support == 6);
    CHECK(r.classes[1].support == 10);
    near(r.accuracy, 13.0 / 16.0);
    near(r.expected_agreement, 33.0 / 64.0);
    near(r.kappa, 19.0 / 31.0);
    near(r.macro_f1, (10.0 / 13.0 + 16.0 / 19.0) / 2.0);
    near(r.macro_precision, (5.0 / 7.0 + 8.0 / 9.0) / 2.0);
    near(r.macro_recall, (5.0 / 6.0 + 4.0 / 5.0) / 2.0);
}

TEST_CASE("perfect agreement has kappa one") {
    const ClassReport r = metrics::class_report(cm({{3, 0, 0}, {0, 4, 0}, {0, 0, 5}}));
    near(r.kappa, 1.0);
    near(r.accuracy, 1.0);
    near(r.expected_agreement, 50.0 / 144.0);
    for (const auto& s : r.classes) {
        near(s.precision, 1.0);
        near(s.recall, 1.0);
        near(s.f1, 1.0);
        near(s.specificity, 1.0);
    }
}

TEST_CASE("chance agreement has kappa zero") {
    const ClassReport r = metrics::class_report(cm({{1, 1}, {1, 1}}));
    near(r.kappa, 0.0);
    near(r.accuracy, 0.5);
    near(r.macro_f1, 0.5);
}

TEST_CASE("classes absent from truth and predictions leave the macro average") {
    const ClassReport r = metrics::class_report(cm({{2, 1, 0}, {0, 3, 0}, {0, 0, 0}}));
    near(r.classes[0].f1, 4.0 / 5.0);
    near(r.classes[1].precision, 3.0 / 4.0);
    near(r.classes[1].f1, 6.0 / 7.0);
    near(r.classes[2].precision, 0.0);
    near(r.classes[2].f1, 0.0);
    near(r.classes[2].specificity, 1.0);
    near(r.classes[2].npv, 1.0);
    near(r.macro_f1, (4.0 / 5.0 + 6.0 / 7.0) / 2.0);
    near(r.accuracy, 5.0 / 6.0);
    near(r.kappa, 2.0 / 3.0);
}

TEST_CASE("never-predicted class scores zero precision") {
    const ClassReport r = metrics::class_report(cm({{0, 4}, {0, 6}}));
    near(r.classes[0].precision, 0.0);
    near(r.classes[0].recall, 0.0);
    near(r.classes[1].precision, 0.6);
    near(r.classes[1].f1, 0.75);
    near(r.macro_f1, 0.375);
    near(r.kappa, 0.0);
}

TEST_CASE("kappa is zero when expected agreement is one") {
    const ClassReport r = metrics::class_report(cm({{0, 0}, {0, 7}}));
    near(r.expected_agreement, 1.0);
    near(r.kappa, 0.0);
    near(r.accuracy, 1.0);
    near(r.macro_f1, 1.0);
    CHECK_THROWS_AS(metrics::class_report(cm({{0, 0}, {0, 0}})), DataError);
}

TEST_CASE("roc points on a hand-checked ranking") {
    const std::vector<double> s{0.9, 0.8, 0.7, 0.6};
    const std::vector<int> y{1, 0, 1, 0};
    const RocCurve roc = metrics::roc_curve(s, y, 1);
    const std::vector<std::pair<double, double>> want{{0, 0}, {0, 0.5}, {0.5, 0.5}, {0.5, 1}, {1, 1}};
    CHECK(roc.points == want);
    CHECK(roc.auc == 0.75);
}

TEST_CASE("tied scores form one diagonal step") {
    const std::vector<double> s{0.5, 0.5, 0.5, 0.5};
    const std::vector<int> y{1, 0, 1, 0};
    const RocCurve roc = metrics::roc_curve(s, y, 1);
    CHECK(roc.points.size() == 2);
    CHECK(roc.auc == 0.5);
    CHECK_THROWS_AS(metrics::roc_curve(s, std::vector<int>{1, 1, 1, 1}, 1), DataError);
}

TEST_CASE("trapezoid auc equals the pair-counting auc") {
    Rng rng(17);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 5 + rng.index(200);
        std::vector<double> s(n);
        std::vector<int> y(n);
        const bool coarse = t % 2 == 0;
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.uniform() < 0.4 ? 1 : 0;
            s[i] = coarse ? std::floor(rng.uniform() * 10.0) / 10.0 : rng.uniform();
        }
        y[0] = 1;
        y[1] = 0;
        CHECK(std::abs(metrics::roc_curve(s, y, 1).auc - oracle::pair_auc(s, y)) <= 1e-9);
    }
}

TEST_CASE("one-vs-rest skips classes without positives") {
    Probabilities p;
    p.n_rows = 4;
    p.n_classes = 3;
    p.values = {0.8, 0.1, 0.1, 0.2, 0.7, 0.1, 0.6, 0.3, 0.1, 0.1, 0.8, 0.1};
    const MultiClassRoc roc = metrics::roc_one_vs_rest(p, std::vector<int>{0, 1, 0, 1});
    REQUIRE(roc.per_class.size() == 3);
    CHECK(roc.per_class[0]->auc == 1.0);
    CHECK(roc.per_class[1]->auc == 1.0);
    CHECK_FALSE(roc.per_class[2].has_value());
    CHECK(roc.macro_auc == 1.0);
}

TEST_CASE("adjusted rand index") {
    const std::vector<int> a{0, 0, 1, 1, 2, 2};
    CHECK(metrics::adjusted_rand_index(a, a) == 1.0);
    CHECK(metrics::adjusted_rand_index(a, std::vector<int>{5, 5, 3, 3, 9, 9}) == 1.0);
    near(metrics::adjusted_rand_index(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 0, 1}), -0.5);
    CHECK_THROWS_AS(metrics::adjusted_rand_index(a, std::vector<int>{0}), DataError);
}

TEST_CASE("label alignment finds the best one-to-one matching") {
    CHECK(metrics::align_labels(std::vector<int>{0, 0, 1, 1, 2, 2}, std::vector<int>{2, 2, 0, 0, 1, 1}) ==
          std::vector<int>{2, 0, 1});
    // Three clusters, two classes: the spare cluster maps to its majority.
    CHECK(metrics::align_labels(std::vector<int>{0, 0, 1, 1, 2}, std::vector<int>{0, 0, 1, 1, 1}) ==
          std::vector<int>{0, 1, 1});
    // Overlaps are [[3,4],[2,1]]; 0->1 and 1->0 give 4 + 2 against 3 + 1.
    const std::vector<int> pred{0, 0, 0, 0, 0, 0, 0, 1, 1, 1};
    const std::vector<int> truth{0, 0, 0, 1, 1, 1, 1, 0, 0, 1};
    CHECK(metrics::align_labels(pred, truth) == std::vector<int>{1, 0});
}
