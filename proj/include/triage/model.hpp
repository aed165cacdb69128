#pragma once

// Differentiable predictors with hand-derived gradients.
//
// Every model exposes a raw output vector (the regression value, or class
// logits) and the parameter gradient of a linear functional of that output.
// Loss gradients are assembled from those two pieces, so the per-model code
// only has to implement its own chain rule.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "triage/core.hpp"

namespace triage {

enum class ModelKind { sigmoid_1d, linear, softmax_linear, mlp };
enum class Activation { tanh, relu };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);
std::string_view to_string(Activation act);
Activation parse_activation(std::string_view text);

// Architecture description; enough to rebuild a model from a flat parameter vector.
struct ModelSpec {
    ModelKind kind = ModelKind::sigmoid_1d;
    std::size_t input_dim = 1;
    // Classes for softmax_linear and classification MLPs; 0 means a scalar regression output.
    int num_classes = 0;
    std::vector<std::size_t> hidden;  // mlp only
    Activation activation = Activation::tanh;

    TaskKind task() const;
    std::size_t output_dim() const;
    bool operator==(const ModelSpec&) const = default;
};

// Predictions: a single value for regression, a probability vector for classification.
using Prediction = std::vector<double>;

class Model {
public:
    virtual ~Model() = default;

    const ModelSpec& spec() const noexcept { return spec_; }
    TaskKind task() const { return spec_.task(); }
    std::size_t input_dim() const noexcept { return spec_.input_dim; }

    std::span<const double> params() const noexcept { return params_; }
    std::span<double> params() noexcept { return params_; }
    std::size_t num_params() const noexcept { return params_.size(); }

    // Regression value or class logits.
    virtual std::vector<double> forward(std::span<const double> x) const = 0;
    // Gradient w.r.t. the parameters of sum_k d_out[k] * forward(x)[k].
    virtual std::vector<double> backward(std::span<const double> x, std::span<const double> d_out) const = 0;

    virtual std::unique_ptr<Model> clone() const = 0;

protected:
    Model(ModelSpec spec, std::size_t num_params) : spec_(std::move(spec)), params_(num_params, 0.0) {}

    ModelSpec spec_;
    std::vector<double> params_;
};

// m(x) = 1 / (1 + exp(-theta * x)), scalar x.
class SigmoidModel1D final : public Model {
public:
    explicit SigmoidModel1D(double theta = 0.0);

    double theta() const noexcept { return params_[0]; }

    std::vector<double> forward(std::span<const double> x) const override;
    std::vector<double> backward(std::span<const double> x, std::span<const double> d_out) const override;
    std::unique_ptr<Model> clone() const override { return std::make_unique<SigmoidModel1D>(*this); }
};

// m(x) = w . x + bias. Parameters are laid out as [w..., bias].
class LinearRegressionModel final : public Model {
public:
    explicit LinearRegressionModel(std::size_t dim);

    std::vector<double> forward(std::span<const double> x) const override;
    std::vector<double> backward(std::span<const double> x, std::span<const double> d_out) const override;
    std::unique_ptr<Model> clone() const override { return std::make_unique<LinearRegressionModel>(*this); }
};

// softmax(W x + b). Parameters: W row-major (K x d), then b (K).
class SoftmaxLinearModel final : public Model {
public:
    SoftmaxLinearModel(std::size_t dim, int num_classes);

    std::vector<double> forward(std::span<const double> x) const override;
    std::vector<double> backward(std::span<const double> x, std::span<const double> d_out) const override;
    std::unique_ptr<Model> clone() const override { return std::make_unique<SoftmaxLinearModel>(*this); }
};

// Fully connected network. Each layer stores W (out x in, row-major) then b (out).
// Hidden layers use the configured activation; the output layer is linear and is
// followed by softmax when the spec has classes.
class MlpModel final : public Model {
public:
    explicit MlpModel(ModelSpec spec);

    // Glorot-uniform weights, zero biases.
    void initialize(Rng& rng);

    std::vector<double> forward(std::span<const double> x) const override;
    std::vector<double> backward(std::span<const double> x, std::span<const double> d_out) const override;
    std::unique_ptr<Model> clone() const override { return std::make_unique<MlpModel>(*this); }

    // Smallest |pre-activation| over the hidden units at x; relu gradients are
    // only comparable against finite differences away from the kink.
    double min_abs_preactivation(std::span<const double> x) const;

private:
    struct Layer {
        std::size_t in;
        std::size_t out;
        std::size_t offset;  // index of W in params_; b follows at offset + in * out
    };

    // Pre-activations of every layer for one input.
    std::vector<std::vector<double>> run(std::span<const double> x) const;
    double activate(double z) const;
    double activate_grad(double z) const;

    std::vector<Layer> layers_;
};

// Value-semantic owner of a polymorphic model; copies clone.
class AnyModel {
public:
    explicit AnyModel(std::unique_ptr<Model> model);
    AnyModel(const AnyModel& other) : model_(other.model_->clone()) {}
    AnyModel(AnyModel&&) noexcept = default;
    AnyModel& operator=(const AnyModel& other);
    AnyModel& operator=(AnyModel&&) noexcept = default;

    Model& operator*() noexcept { return *model_; }
    const Model& operator*() const noexcept { return *model_; }
    Model* operator->() noexcept { return model_.get(); }
    const Model* operator->() const noexcept { return model_.get(); }

private:
    std::unique_ptr<Model> model_;
};

// Builds a model with its documented initialization: zeros for the sigmoid,
// linear and softmax models, seeded Glorot-uniform weights for MLPs.
AnyModel make_model(const ModelSpec& spec, RngSeed seed = {});

// Rebuilds a model from a spec and an explicit parameter vector.
AnyModel make_model(const ModelSpec& spec, std::span<const double> params);

std::vector<double> softmax(std::span<const double> logits);

Prediction predict(const Model& model, std::span<const double> x);

// Argmax with ties broken toward the smallest class index.
int predicted_class(std::span<const double> probs);
// Largest class probability.
double confidence(std::span<const double> probs);

double sample_loss(const Model& model, const Sample& sample, const LossFn& loss);
std::vector<double> loss_gradient(const Model& model, const Sample& sample, const LossFn& loss);

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> gradient;
};
LossAndGradient loss_and_gradient(const Model& model, const Sample& sample, const LossFn& loss);

// Max component-wise relative error between loss_gradient and central differences,
// with denominator max(|analytic|, |numeric|, 1e-8).
double finite_difference_check(const Model& model, const Sample& sample, const LossFn& loss, double step);

// Same check against an arbitrary analytic gradient; used to validate the checker itself.
double finite_difference_check(const Model& model, const Sample& sample, const LossFn& loss, double step,
                               std::span<const double> analytic);

struct GradcheckOptions {
    std::size_t trials = 100;
    double step = 1e-5;
    double threshold = 1e-4;
    // ReLU draws are redrawn until no pre-activation lies within this distance of zero.
    double relu_margin = 1e-3;
    RngSeed seed{};
    // Negative control: perturbs the analytic gradient before comparing.
    bool corrupt_gradient = false;
};

struct GradcheckReport {
    std::size_t trials = 0;
    double worst = 0.0;
    bool passed = false;
};

// finite_difference_check over random (theta, sample) draws: theta and x uniform
// in [-1, 1] and [-2, 2], labels uniform.
GradcheckReport gradcheck(const ModelSpec& spec, const GradcheckOptions& options);

}  // namespace triage
