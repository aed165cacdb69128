#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "triage/core.hpp"

using namespace triage;

TEST_CASE("squared loss") {
    CHECK(squared_loss(0.5, 0.5) == 0.0);
    CHECK(squared_loss(1.0, 0.0) == 1.0);
    CHECK(squared_loss(0.2, 0.5) == doctest::Approx(0.09).epsilon(1e-12));
    CHECK(squared_loss(0.2, 0.5) == squared_loss(0.5, 0.2));
}

TEST_CASE("cross entropy clamps and validates the simplex") {
    const std::vector<double> onehot{0.0, 1.0};
    CHECK(cross_entropy_loss(onehot, 1, 1e-6) == doctest::Approx(-std::log(1.0 - 1e-6)).epsilon(1e-12));
    CHECK(cross_entropy_loss(onehot, 0, 1e-6) == doctest::Approx(-std::log(1e-6)));

    const double e1 = std::exp(-1.0);
    const std::vector<double> p{e1, 1.0 - e1};
    CHECK(cross_entropy_loss(p, 0, 1e-6) == doctest::Approx(1.0).epsilon(1e-12));

    const std::vector<double> uniform{1.0 / 3, 1.0 / 3, 1.0 / 3};
    for (int y = 0; y < 3; ++y) CHECK(cross_entropy_loss(uniform, y, 1e-6) == doctest::Approx(std::log(3.0)));

    const std::vector<double> bad{0.5, 0.6};
    CHECK_THROWS_AS(cross_entropy_loss(bad, 0, 1e-6), PreconditionError);
    const std::vector<double> negative{1.5, -0.5};
    CHECK_THROWS_AS(cross_entropy_loss(negative, 0, 1e-6), PreconditionError);
    CHECK_THROWS_AS(cross_entropy_loss(uniform, 3, 1e-6), PreconditionError);
}

TEST_CASE("human loss averages over the recorded predictions") {
    const Sample reg{{0.0}, 0.5, {0.4, 0.6}};
    CHECK(human_loss(reg, LossFn::squared()) == doctest::Approx(0.01).epsilon(1e-12));

    const Sample unanimous{{0.0}, 1, {1, 1, 1}};
    CHECK(human_loss(unanimous, LossFn::cross_entropy(1e-6)) == doctest::Approx(-std::log(1.0 - 1e-6)));

    const Sample split{{0.0}, 2, {2, 0, 2, 1}};
    CHECK(human_loss(split, LossFn::cross_entropy(1e-6)) == doctest::Approx(std::log(2.0)));
    CHECK(human_agreement(split) == 0.5);

    const Sample wrong{{0.0}, 0, {1, 1}};
    CHECK(human_loss(wrong, LossFn::cross_entropy(1e-6)) == doctest::Approx(-std::log(1e-6)));

    const Sample empty{{0.0}, 0.0, {}};
    CHECK_THROWS(human_loss(empty, LossFn::squared()));
}

TEST_CASE("human loss is permutation invariant and bounded below by the point estimate") {
    Rng rng = make_rng(RngSeed{3});
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Sample s{{0.0}, normal(rng), {}};
        for (int k = 0; k < 5; ++k) s.h.push_back(normal(rng));
        const double base = human_loss(s, LossFn::squared());
        Sample shuffled = s;
        std::shuffle(shuffled.h.begin(), shuffled.h.end(), rng);
        CHECK(human_loss(shuffled, LossFn::squared()) == doctest::Approx(base).epsilon(1e-14));
        const double mean = std::accumulate(s.h.begin(), s.h.end(), 0.0) / static_cast<double>(s.h.size());
        CHECK(base > squared_loss(mean, s.y));
    }
    const Sample same{{0.0}, 0.3, {0.7, 0.7, 0.7}};
    CHECK(human_loss(same, LossFn::squared()) == doctest::Approx(squared_loss(0.7, 0.3)).epsilon(1e-14));
}

TEST_CASE("loss functions match their task") {
    CHECK(LossFn::for_task(TaskKind::regression).kind == LossKind::squared);
    CHECK(LossFn::for_task(TaskKind::classification).kind == LossKind::cross_entropy);
    CHECK(LossFn::squared().matches(TaskKind::regression));
    CHECK_FALSE(LossFn::squared().matches(TaskKind::classification));
    CHECK_THROWS_AS(LossFn::cross_entropy(0.0), PreconditionError);
    CHECK_THROWS_AS(LossFn::cross_entropy(0.5), PreconditionError);
}

TEST_CASE("dataset validates samples against its header") {
    Dataset reg(TaskKind::regression, 2);
    reg.add({{1.0, 2.0}, 0.3, {0.1}});
    CHECK(reg.size() == 1);
    CHECK_THROWS_AS(reg.add({{1.0}, 0.3, {0.1}}), PreconditionError);
    CHECK_THROWS_AS(reg.add({{1.0, 2.0}, 0.3, {}}), PreconditionError);

    Dataset cls(TaskKind::classification, 1, 3);
    cls.add({{0.0}, 2, {0, 1, 2}});
    CHECK_THROWS_AS(cls.add({{0.0}, 3, {0}}), PreconditionError);
    CHECK_THROWS_AS(cls.add({{0.0}, 1, {0, 5}}), PreconditionError);
    CHECK_THROWS_AS(cls.add({{0.0}, 0.5, {0}}), PreconditionError);
    CHECK_THROWS_AS(Dataset(TaskKind::classification, 1, 1), PreconditionError);
    CHECK_THROWS_AS(Dataset(TaskKind::regression, 0), PreconditionError);

    const std::vector<std::size_t> idx{0};
    CHECK(cls.subset(idx).size() == 1);
    CHECK(cls.empty_like().empty());
}

TEST_CASE("task kind names round trip") {
    for (auto k : {TaskKind::regression, TaskKind::classification}) CHECK(parse_task_kind(to_string(k)) == k);
    CHECK_THROWS_AS(parse_task_kind("ranking"), PreconditionError);
}

TEST_CASE("seeded generators are reproducible and streams are independent") {
    auto a = make_rng(RngSeed{42}, 1), b = make_rng(RngSeed{42}, 1), c = make_rng(RngSeed{42}, 2),
         d = make_rng(RngSeed{43}, 1);
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
}

TEST_CASE("budget counts are robust to representation error") {
    CHECK(budget_count(0.7, 10) == 7);
    CHECK(budget_count(0.29, 100) == 29);
    CHECK(budget_count(0.5, 5) == 2);
    CHECK(budget_count(1.0, 7) == 7);
    CHECK(budget_count(0.0, 7) == 0);
    CHECK(keep_count(0.71, 100) == 29);
    CHECK(keep_count(0.4, 5) == 3);
    CHECK(keep_count(0.0, 9) == 9);
    CHECK(keep_count(1.0, 9) == 0);
    CHECK_THROWS_AS(require_budget(-0.1), PreconditionError);
    CHECK_THROWS_AS(require_budget(1.1), PreconditionError);
    CHECK_THROWS_AS(require_budget(std::nan("")), PreconditionError);
}

namespace {

Dataset numbered(std::size_t n) {
    Dataset d(TaskKind::regression, 1);
    for (std::size_t i = 0; i < n; ++i) d.add({{static_cast<double>(i)}, 0.0, {0.0}});
    return d;
}

std::vector<int> ids(const Dataset& d) {
    std::vector<int> out;
    for (const auto& s : d.samples()) out.push_back(static_cast<int>(s.x[0]));
    return out;
}

}  // namespace

TEST_CASE("split sizes, disjointness and determinism") {
    auto s10 = split_dataset(numbered(10), {}, RngSeed{1});
    CHECK(s10.train.size() == 6);
    CHECK(s10.val.size() == 2);
    CHECK(s10.test.size() == 2);

    auto s72 = split_dataset(numbered(72), {}, RngSeed{1});
    CHECK(s72.train.size() == 44);
    CHECK(s72.val.size() == 14);
    CHECK(s72.test.size() == 14);

    std::set<int> all;
    for (const auto* part : {&s72.train, &s72.val, &s72.test})
        for (int id : ids(*part)) CHECK(all.insert(id).second);
    CHECK(all.size() == 72);

    auto again = split_dataset(numbered(72), {}, RngSeed{1});
    CHECK(ids(again.train) == ids(s72.train));
    CHECK(ids(again.test) == ids(s72.test));
    auto other = split_dataset(numbered(72), {}, RngSeed{2});
    CHECK(ids(other.train) != ids(s72.train));

    CHECK_THROWS_AS(split_dataset(numbered(2), {}, RngSeed{1}), PreconditionError);
    CHECK_THROWS_AS(split_dataset(numbered(10), {0.5, 0.2, 0.2}, RngSeed{1}), PreconditionError);
}
