#include "triage/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace triage {

namespace {

void require_dim(const Model& model, std::span<const double> x) {
    if (x.size() != model.input_dim())
        throw PreconditionError("input has " + std::to_string(x.size()) + " features, model expects " +
                                std::to_string(model.input_dim()));
}

void require_compatible(const Model& model, const Sample& sample, const LossFn& loss) {
    if (!loss.matches(model.task()))
        throw UnsupportedTask("loss kind does not match the model's task");
    if (model.task() == TaskKind::classification &&
        (sample.label() < 0 || static_cast<std::size_t>(sample.label()) >= model.spec().output_dim()))
        throw PreconditionError("label outside the model's classes");
}

double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// d loss / d raw output, plus the loss value.
double output_gradient(const Model& model, std::span<const double> raw, const Sample& sample, const LossFn& loss,
                       std::vector<double>& d_out) {
    d_out.assign(raw.size(), 0.0);
    if (model.task() == TaskKind::regression) {
        d_out[0] = 2.0 * (raw[0] - sample.y);
        return squared_loss(raw[0], sample.y);
    }
    const auto p = softmax(raw);
    const auto y = static_cast<std::size_t>(sample.label());
    const double eps = loss.smoothing_epsilon;
    const double value = cross_entropy_loss(p, sample.label(), eps);
    // The clamp is flat outside [eps, 1 - eps].
    if (p[y] >= eps && p[y] <= 1.0 - eps) {
        for (std::size_t k = 0; k < p.size(); ++k) d_out[k] = p[k];
        d_out[y] -= 1.0;
    }
    return value;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::sigmoid_1d: return "sigmoid_1d";
        case ModelKind::linear: return "linear";
        case ModelKind::softmax_linear: return "softmax_linear";
        case ModelKind::mlp: return "mlp";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
    for (auto k : {ModelKind::sigmoid_1d, ModelKind::linear, ModelKind::softmax_linear, ModelKind::mlp})
        if (to_string(k) == text) return k;
    throw PreconditionError("unknown model kind: " + std::string(text));
}

std::string_view to_string(Activation act) { return act == Activation::tanh ? "tanh" : "relu"; }

Activation parse_activation(std::string_view text) {
    if (text == "tanh") return Activation::tanh;
    if (text == "relu") return Activation::relu;
    throw PreconditionError("unknown activation: " + std::string(text));
}

TaskKind ModelSpec::task() const {
    switch (kind) {
        case ModelKind::sigmoid_1d:
        case ModelKind::linear: return TaskKind::regression;
        case ModelKind::softmax_linear: return TaskKind::classification;
        case ModelKind::mlp: return num_classes > 0 ? TaskKind::classification : TaskKind::regression;
    }
    return TaskKind::regression;
}

std::size_t ModelSpec::output_dim() const {
    return task() == TaskKind::classification ? static_cast<std::size_t>(num_classes) : 1;
}

// --- SigmoidModel1D ---------------------------------------------------------

SigmoidModel1D::SigmoidModel1D(double theta) : Model(ModelSpec{ModelKind::sigmoid_1d, 1}, 1) {
    params_[0] = theta;
}

std::vector<double> SigmoidModel1D::forward(std::span<const double> x) const {
    return {logistic(params_[0] * x[0])};
}

std::vector<double> SigmoidModel1D::backward(std::span<const double> x, std::span<const double> d_out) const {
    const double s = logistic(params_[0] * x[0]);
    return {d_out[0] * s * (1.0 - s) * x[0]};
}

// --- LinearRegressionModel --------------------------------------------------

LinearRegressionModel::LinearRegressionModel(std::size_t dim)
    : Model(ModelSpec{ModelKind::linear, dim}, dim + 1) {}

std::vector<double> LinearRegressionModel::forward(std::span<const double> x) const {
    const std::size_t d = spec_.input_dim;
    return {std::inner_product(x.begin(), x.end(), params_.begin(), params_[d])};
}

std::vector<double> LinearRegressionModel::backward(std::span<const double> x,
                                                    std::span<const double> d_out) const {
    std::vector<double> g(params_.size());
    for (std::size_t j = 0; j < x.size(); ++j) g[j] = d_out[0] * x[j];
    g.back() = d_out[0];
    return g;
}

// --- SoftmaxLinearModel -----------------------------------------------------

SoftmaxLinearModel::SoftmaxLinearModel(std::size_t dim, int num_classes)
    : Model(ModelSpec{ModelKind::softmax_linear, dim, num_classes},
            static_cast<std::size_t>(std::max(num_classes, 0)) * (dim + 1)) {
    if (num_classes < 2) throw PreconditionError("softmax model needs at least 2 classes");
}

std::vector<double> SoftmaxLinearModel::forward(std::span<const double> x) const {
    const std::size_t d = spec_.input_dim;
    const auto k_count = static_cast<std::size_t>(spec_.num_classes);
    std::vector<double> z(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
        const double* w = params_.data() + k * d;
        z[k] = std::inner_product(x.begin(), x.end(), w, params_[k_count * d + k]);
    }
    return z;
}

std::vector<double> SoftmaxLinearModel::backward(std::span<const double> x, std::span<const double> d_out) const {
    const std::size_t d = spec_.input_dim;
    const auto k_count = static_cast<std::size_t>(spec_.num_classes);
    std::vector<double> g(params_.size());
    for (std::size_t k = 0; k < k_count; ++k) {
        for (std::size_t j = 0; j < d; ++j) g[k * d + j] = d_out[k] * x[j];
        g[k_count * d + k] = d_out[k];
    }
    return g;
}

// --- MlpModel ---------------------------------------------------------------

namespace {

std::size_t mlp_param_count(const ModelSpec& spec) {
    std::size_t count = 0;
    std::size_t in = spec.input_dim;
    for (std::size_t width : spec.hidden) {
        count += (in + 1) * width;
        in = width;
    }
    return count + (in + 1) * spec.output_dim();
}

}  // namespace

MlpModel::MlpModel(ModelSpec spec) : Model(spec, mlp_param_count(spec)) {
    if (spec_.kind != ModelKind::mlp) throw PreconditionError("MlpModel needs an mlp spec");
    if (spec_.num_classes == 1) throw PreconditionError("classification MLP needs at least 2 classes");
    if (spec_.hidden.empty()) throw PreconditionError("mlp needs at least one hidden layer");
    std::size_t in = spec_.input_dim;
    std::size_t offset = 0;
    auto push = [&](std::size_t out) {
        if (out == 0) throw PreconditionError("layer widths must be positive");
        layers_.push_back({in, out, offset});
        offset += (in + 1) * out;
        in = out;
    };
    for (std::size_t width : spec_.hidden) push(width);
    push(spec_.output_dim());
}

void MlpModel::initialize(Rng& rng) {
    for (const auto& layer : layers_) {
        const double a = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
        std::uniform_real_distribution<double> dist(-a, a);
        for (std::size_t i = 0; i < layer.in * layer.out; ++i) params_[layer.offset + i] = dist(rng);
        std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(layer.offset + layer.in * layer.out), layer.out,
                    0.0);
    }
}

double MlpModel::activate(double z) const {
    return spec_.activation == Activation::tanh ? std::tanh(z) : std::max(z, 0.0);
}

double MlpModel::activate_grad(double z) const {
    if (spec_.activation == Activation::tanh) {
        const double t = std::tanh(z);
        return 1.0 - t * t;
    }
    return z > 0.0 ? 1.0 : 0.0;
}

std::vector<std::vector<double>> MlpModel::run(std::span<const double> x) const {
    std::vector<std::vector<double>> pre;
    pre.reserve(layers_.size());
    std::vector<double> act(x.begin(), x.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        const double* w = params_.data() + layer.offset;
        const double* b = w + layer.in * layer.out;
        std::vector<double> z(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o)
            z[o] = std::inner_product(act.begin(), act.end(), w + o * layer.in, b[o]);
        if (l + 1 < layers_.size()) {
            act.resize(layer.out);
            for (std::size_t o = 0; o < layer.out; ++o) act[o] = activate(z[o]);
        }
        pre.push_back(std::move(z));
    }
    return pre;
}

std::vector<double> MlpModel::forward(std::span<const double> x) const { return run(x).back(); }

std::vector<double> MlpModel::backward(std::span<const double> x, std::span<const double> d_out) const {
    const auto pre = run(x);
    std::vector<double> g(params_.size(), 0.0);
    std::vector<double> delta(d_out.begin(), d_out.end());
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& layer = layers_[l];
        // Input activations of this layer.
        std::vector<double> input;
        if (l == 0) {
            input.assign(x.begin(), x.end());
        } else {
            input.resize(layer.in);
            for (std::size_t i = 0; i < layer.in; ++i) input[i] = activate(pre[l - 1][i]);
        }
        double* gw = g.data() + layer.offset;
        double* gb = gw + layer.in * layer.out;
        for (std::size_t o = 0; o < layer.out; ++o) {
            for (std::size_t i = 0; i < layer.in; ++i) gw[o * layer.in + i] = delta[o] * input[i];
            gb[o] = delta[o];
        }
        if (l == 0) break;
        const double* w = params_.data() + layer.offset;
        std::vector<double> prev(layer.in, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o)
            for (std::size_t i = 0; i < layer.in; ++i) prev[i] += w[o * layer.in + i] * delta[o];
        for (std::size_t i = 0; i < layer.in; ++i) prev[i] *= activate_grad(pre[l - 1][i]);
        delta = std::move(prev);
    }
    return g;
}

double MlpModel::min_abs_preactivation(std::span<const double> x) const {
    const auto pre = run(x);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l + 1 < pre.size(); ++l)
        for (double z : pre[l]) best = std::min(best, std::abs(z));
    return best;
}

// --- AnyModel and factories -------------------------------------------------

AnyModel::AnyModel(std::unique_ptr<Model> model) : model_(std::move(model)) {
    if (!model_) throw PreconditionError("AnyModel needs a model");
}

AnyModel& AnyModel::operator=(const AnyModel& other) {
    if (this != &other) model_ = other.model_->clone();
    return *this;
}

AnyModel make_model(const ModelSpec& spec, RngSeed seed) {
    switch (spec.kind) {
        case ModelKind::sigmoid_1d:
            if (spec.input_dim != 1) throw PreconditionError("sigmoid_1d takes scalar inputs");
            return AnyModel(std::make_unique<SigmoidModel1D>());
        case ModelKind::linear: return AnyModel(std::make_unique<LinearRegressionModel>(spec.input_dim));
        case ModelKind::softmax_linear:
            return AnyModel(std::make_unique<SoftmaxLinearModel>(spec.input_dim, spec.num_classes));
        case ModelKind::mlp: {
            auto mlp = std::make_unique<MlpModel>(spec);
            auto rng = make_rng(seed, 0x1417);
            mlp->initialize(rng);
            return AnyModel(std::move(mlp));
        }
    }
    throw PreconditionError("unknown model kind");
}

AnyModel make_model(const ModelSpec& spec, std::span<const double> params) {
    AnyModel model = make_model(spec);
    if (params.size() != model->num_params())
        throw PreconditionError("expected " + std::to_string(model->num_params()) + " parameters, got " +
                                std::to_string(params.size()));
    std::copy(params.begin(), params.end(), model->params().begin());
    return model;
}

// --- Predictions and losses -------------------------------------------------

std::vector<double> softmax(std::span<const double> logits) {
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double total = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) total += p[k] = std::exp(logits[k] - top);
    for (double& v : p) v /= total;
    return p;
}

Prediction predict(const Model& model, std::span<const double> x) {
    require_dim(model, x);
    auto raw = model.forward(x);
    if (model.task() == TaskKind::classification) return softmax(raw);
    return raw;
}

int predicted_class(std::span<const double> probs) {
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double confidence(std::span<const double> probs) { return *std::max_element(probs.begin(), probs.end()); }

double sample_loss(const Model& model, const Sample& sample, const LossFn& loss) {
    require_compatible(model, sample, loss);
    const auto p = predict(model, sample.x);
    if (model.task() == TaskKind::regression) return squared_loss(p[0], sample.y);
    return cross_entropy_loss(p, sample.label(), loss.smoothing_epsilon);
}

LossAndGradient loss_and_gradient(const Model& model, const Sample& sample, const LossFn& loss) {
    require_compatible(model, sample, loss);
    require_dim(model, sample.x);
    const auto raw = model.forward(sample.x);
    std::vector<double> d_out;
    const double value = output_gradient(model, raw, sample, loss, d_out);
    return {value, model.backward(sample.x, d_out)};
}

std::vector<double> loss_gradient(const Model& model, const Sample& sample, const LossFn& loss) {
    return loss_and_gradient(model, sample, loss).gradient;
}

double finite_difference_check(const Model& model, const Sample& sample, const LossFn& loss, double step,
                               std::span<const double> analytic) {
    if (!(step > 0.0)) throw PreconditionError("finite difference step must be positive");
    if (analytic.size() != model.num_params()) throw PreconditionError("gradient has the wrong dimension");
    auto probe = model.clone();
    auto theta = probe->params();
    double worst = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double saved = theta[i];
        theta[i] = saved + step;
        const double up = sample_loss(*probe, sample, loss);
        theta[i] = saved - step;
        const double down = sample_loss(*probe, sample, loss);
        theta[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

double finite_difference_check(const Model& model, const Sample& sample, const LossFn& loss, double step) {
    const auto analytic = loss_gradient(model, sample, loss);
    return finite_difference_check(model, sample, loss, step, analytic);
}

GradcheckReport gradcheck(const ModelSpec& spec, const GradcheckOptions& options) {
    if (options.trials < 1) throw PreconditionError("gradcheck needs at least one trial");
    auto rng = make_rng(options.seed, 0x9c4);
    std::uniform_real_distribution<double> weight(-1.0, 1.0), feature(-2.0, 2.0), target(-1.0, 1.0);
    const bool classification = spec.task() == TaskKind::classification;
    const LossFn loss = LossFn::for_task(spec.task());
    AnyModel model = make_model(spec);

    GradcheckReport report;
    for (std::size_t t = 0; t < options.trials; ++t) {
        for (double& p : model->params()) p = weight(rng);
        Sample s;
        s.x.resize(spec.input_dim);
        const auto* mlp = dynamic_cast<const MlpModel*>(&*model);
        const bool relu = mlp && spec.activation == Activation::relu;
        for (int attempt = 0;; ++attempt) {
            for (double& v : s.x) v = feature(rng);
            if (!relu || mlp->min_abs_preactivation(s.x) >= options.relu_margin) break;
            if (attempt >= 1000) throw std::runtime_error("could not draw a ReLU input away from the kinks");
        }
        if (classification) {
            std::uniform_int_distribution<int> label(0, spec.num_classes - 1);
            s.y = label(rng);
        } else {
            s.y = spec.kind == ModelKind::sigmoid_1d ? 0.5 * (target(rng) + 1.0) : target(rng);
        }
        s.h = {s.y};
        auto analytic = loss_gradient(*model, s, loss);
        if (options.corrupt_gradient) analytic[0] = 1.5 * analytic[0] + 0.1;
        report.worst = std::max(report.worst, finite_difference_check(*model, s, loss, options.step, analytic));
        ++report.trials;
    }
    report.passed = report.worst < options.threshold;
    return report;
}

}  // namespace triage
