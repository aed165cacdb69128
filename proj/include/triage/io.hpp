#pragma once

// Text formats: line-delimited dataset files, JSON model checkpoints, and the
// shared JSON configuration consumed by every command.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "triage/core.hpp"
#include "triage/eval.hpp"
#include "triage/model.hpp"
#include "triage/synthdata.hpp"
#include "triage/train.hpp"

namespace triage {

using Json = nlohmann::ordered_json;

// Malformed or unreadable configuration, dataset or checkpoint input.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dataset files: a header record {"task_kind", "d", "K"} followed by one
// {"x": [...], "y": ..., "h": [...]} record per sample.
void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);

Json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const Json& j);

// {"format": "triage.checkpoint.v1", "spec": {...}, "params": [...]}; parameters round-trip exactly.
Json checkpoint_to_json(const Model& model);
AnyModel checkpoint_from_json(const Json& j);

Json to_json(const TrainConfig& c);
Json to_json(const RegressionSpec& s);
Json to_json(const ClassificationSpec& s);
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});
RegressionSpec regression_spec_from_json(const Json& j, RegressionSpec base = {});
ClassificationSpec classification_spec_from_json(const Json& j, ClassificationSpec base = {});

struct GradcheckConfig {
    GradcheckOptions options;
    std::vector<ModelSpec> models;
};

GradcheckConfig default_gradcheck();

// Everything one config file can set. Every section and key is optional; unknown keys are errors.
struct AppConfig {
    TaskKind task = TaskKind::regression;
    RegressionSpec regression;
    ClassificationSpec classification;
    SplitFractions split;
    std::optional<ModelSpec> model;   // default depends on the task
    std::optional<ModelSpec> scorer;  // default depends on the task
    TrainConfig train = default_sweep_train();
    FourSettingsConfig four_settings = default_four_settings();
    std::vector<std::uint64_t> four_settings_seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<double> sweep_budgets{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<Method> sweep_methods{Method::ours, Method::full_automation, Method::score, Method::confidence};
    std::vector<std::uint64_t> sweep_seeds{1, 2, 3, 4, 5};
    int jobs = 1;
    GradcheckConfig gradcheck = default_gradcheck();

    ModelSpec model_for_task() const;
    ModelSpec scorer_for_task() const;
    SweepConfig sweep_config() const;
    // Applies one seed to every generator and training run.
    void override_seed(std::uint64_t seed);
};

AppConfig parse_config(const Json& j);
AppConfig load_config(const std::filesystem::path& path);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace triage
