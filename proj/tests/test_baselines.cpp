#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "triage/baselines.hpp"
#include "triage/eval.hpp"
#include "triage/synthdata.hpp"

using namespace triage;

namespace {

// K = 2 softmax model with W = 0 and bias (0, c): confidence of class 1 is logistic(c), so a
// 1-D feature can set any confidence through the weight of class 1.
AnyModel confidence_model() {
    // Params: W (2x1) then b (2): logits (0, x).
    const std::vector<double> params{0.0, 1.0, 0.0, 0.0};
    return make_model(ModelSpec{ModelKind::softmax_linear, 1, 2}, params);
}

double logit_for(double confidence) { return std::log(confidence / (1.0 - confidence)); }

Dataset with_confidences(const std::vector<double>& conf) {
    Dataset d(TaskKind::classification, 1, 2);
    for (double c : conf) d.add({{logit_for(c)}, 1, {1}});
    return d;
}

}  // namespace

TEST_CASE("method names") {
    for (auto m : {Method::ours, Method::full_automation, Method::score, Method::confidence})
        CHECK(parse_method(to_string(m)) == m);
    CHECK_THROWS_AS(parse_method("surrogate"), PreconditionError);
    CHECK(std::string(method_names()).find("confidence") != std::string::npos);
    CHECK(to_string(BaselineKind::score_based) == "score_based");
}

TEST_CASE("score-based triage defers the least confident samples") {
    auto m = confidence_model();
    const Dataset d = with_confidences({0.9, 0.5, 0.7, 0.99});
    CHECK(score_based_rank(*m, d, 0.5) == std::vector<std::size_t>{1, 2});
    CHECK(score_based_rank(*m, d, 0.0).empty());
    CHECK(score_based_rank(*m, d, 1.0).size() == 4);

    auto reg = make_model({ModelKind::sigmoid_1d, 1});
    CHECK_THROWS_AS(score_based_rank(*reg, d, 0.5), UnsupportedTask);
}

TEST_CASE("score-based selection is permutation invariant") {
    auto m = confidence_model();
    const std::vector<double> conf{0.9, 0.5, 0.7, 0.99, 0.6, 0.55, 0.8};
    const auto base = score_based_rank(*m, with_confidences(conf), 3.0 / 7.0);
    std::vector<std::size_t> perm{6, 2, 4, 0, 5, 1, 3};
    std::vector<double> shuffled;
    for (auto p : perm) shuffled.push_back(conf[p]);
    std::vector<std::size_t> mapped;
    for (auto i : score_based_rank(*m, with_confidences(shuffled), 3.0 / 7.0)) mapped.push_back(perm[i]);
    std::sort(mapped.begin(), mapped.end());
    CHECK(mapped == base);
}

TEST_CASE("confidence-based test selection") {
    auto m = confidence_model();
    const Dataset d = with_confidences({0.6, 0.8, 0.95});
    CHECK(confidence_based_test_selection(*m, d, 1.0, 0.9) == std::vector<std::size_t>{0, 1});
    CHECK(confidence_based_test_selection(*m, d, 1.0, 0.0).empty());
    CHECK(confidence_based_test_selection(*m, d, 1.0, 1.0).size() == 3);
    CHECK(confidence_based_test_selection(*m, d, 0.34, 1.0) == std::vector<std::size_t>{0});
}

TEST_CASE("global human accuracy pools all votes") {
    Dataset d(TaskKind::classification, 1, 2);
    d.add({{0.0}, 1, {1, 1, 0}});
    d.add({{0.0}, 0, {0}});
    CHECK(global_human_accuracy(d) == doctest::Approx(3.0 / 4.0));
}

TEST_CASE("confidence-based training") {
    ClassificationSpec spec;
    spec.n = 200;
    spec.seed = RngSeed{4};
    const Dataset data = gen_classification(spec);
    const ModelSpec model{ModelKind::softmax_linear, 2, 3};
    TrainConfig c;
    c.outer_steps = 3;
    c.batch_size = 20;
    c.learning_rate = 0.2;

    SUBCASE("humans always wrong: every batch falls back to the full batch") {
        ClassificationSpec wrong = spec;
        wrong.confusion_rates = {1.0};
        const auto r = confidence_based_train(gen_classification(wrong), model, c, 0.5);
        REQUIRE(r.trace.warnings.size() == 1);
        CHECK(r.trace.warnings[0].find("30 of 30") != std::string::npos);
    }
    SUBCASE("b = 0 falls back to the full batch, i.e. vanilla SGD") {
        const auto r = confidence_based_train(data, model, c, 0.0);
        CHECK(r.trace.warnings.size() == 1);
        TrainConfig fa = c;
        fa.budget = 0.0;
        const auto v = train_under_triage(data, model, fa);
        CHECK(r.trace.final_params == v.trace.final_params);
    }
    SUBCASE("perfect humans, uniform model at init: keeps floor(b n) per batch") {
        ClassificationSpec perfect = spec;
        perfect.confusion_rates = {0.0};
        TrainConfig one = c;
        one.outer_steps = 1;
        one.batch_size = 200;
        const Dataset pd = gen_classification(perfect);
        const auto r = confidence_based_train(pd, model, one, 0.25);
        CHECK(r.trace.warnings.empty());
        // At zero parameters all margins tie, so the first 50 samples of the shuffled batch are kept.
        Rng rng = make_rng(one.seed, 0x7a11);
        const auto batches = make_minibatches(pd.size(), one.batch_size, true, rng);
        std::vector<std::size_t> kept(batches[0].begin(), batches[0].begin() + 50);
        auto expect = make_model(model);
        std::vector<double> total(expect->num_params(), 0.0);
        for (auto i : kept) {
            const auto g = loss_gradient(*expect, pd[i], LossFn::cross_entropy());
            for (std::size_t p = 0; p < total.size(); ++p) total[p] += g[p];
        }
        for (std::size_t p = 0; p < total.size(); ++p)
            CHECK(r.trace.final_params[p] == doctest::Approx(-one.learning_rate * total[p] / 50.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(confidence_based_train(gen_regression({}), {ModelKind::sigmoid_1d, 1}, c, 0.5), UnsupportedTask);
}

TEST_CASE("full automation pipeline trains with b = 0 and honours the budget at test time") {
    ClassificationSpec spec;
    spec.n = 400;
    spec.seed = RngSeed{6};
    const auto split = split_dataset(gen_classification(spec), {}, RngSeed{6});
    const ModelSpec model{ModelKind::softmax_linear, 2, 3};
    const ModelSpec scorer{ModelKind::mlp, 2, 0, {8}};
    TrainConfig c;
    c.outer_steps = 5;
    c.epochs = 5;
    c.batch_size = 16;
    c.budget = 0.3;

    const auto fa = train_full_automation(split.train, split.val, model, scorer, c);
    TrainConfig zero = c;
    zero.budget = 0.0;
    const auto plain = train_under_triage(split.train, model, zero, &split.val);
    CHECK(std::equal(fa.model->params().begin(), fa.model->params().end(), plain.model->params().begin()));

    const auto dec = deploy_with_budget(fa.policy, split.test, 0.3);
    const auto n = static_cast<double>(split.test.size());
    CHECK(static_cast<double>(std::count(dec.begin(), dec.end(), 1)) / n <= 0.3 + 1.0 / n);
}
