#include "triage/io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

namespace triage {

namespace {

// Reads the keys of one JSON object, rejecting unknown ones.
class Fields {
public:
    Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) fail("expected an object");
    }

    bool has(const char* key) const { return j_.contains(key); }

    const Json& at(const char* key) {
        seen_.insert(key);
        return j_.at(key);
    }

    template <class T>
    void get(const char* key, T& out) {
        if (!j_.contains(key)) return;
        seen_.insert(key);
        out = convert<T>(j_.at(key), key);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) fail("unknown key '" + key + "'");
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError(where_.empty() ? what : where_ + ": " + what);
    }

    std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

private:
    template <class T>
    T convert(const Json& v, const char* key) const {
        const std::string p = path(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(p + ": expected a boolean");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) throw ConfigError(p + ": expected a number");
            return v.get<double>();
        } else if constexpr (std::is_same_v<T, int>) {
            if (!v.is_number_integer()) throw ConfigError(p + ": expected an integer");
            return v.get<int>();
        } else if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
            if (!v.is_number_unsigned()) throw ConfigError(p + ": expected a non-negative integer");
            return v.get<T>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(p + ": expected a string");
            return v.get<std::string>();
        } else if constexpr (std::is_same_v<T, RngSeed>) {
            return RngSeed{convert<std::uint64_t>(v, key)};
        } else {
            // vectors
            if (!v.is_array()) throw ConfigError(p + ": expected an array");
            T out;
            for (const auto& e : v) out.push_back(convert<typename T::value_type>(e, key));
            return out;
        }
    }

    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

template <class Parse>
auto parse_enum(Fields& f, const char* key, Parse parse) {
    std::string text;
    f.get(key, text);
    try {
        return parse(text);
    } catch (const PreconditionError& e) {
        throw ConfigError(f.path(key) + ": " + e.what());
    }
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    return in;
}

Json parse_line(const std::string& line, std::size_t lineno) {
    try {
        return Json::parse(line);
    } catch (const Json::parse_error& e) {
        throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
}

std::vector<double> number_array(const Json& j, const std::string& what) {
    if (!j.is_array()) throw ConfigError(what + ": expected an array");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw ConfigError(what + ": expected numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& data) {
    const bool cls = data.task() == TaskKind::classification;
    Json header{{"task_kind", std::string(to_string(data.task()))}, {"d", data.dim()}, {"K", data.num_classes()}};
    out << header.dump() << '\n';
    for (const auto& s : data.samples()) {
        Json rec;
        rec["x"] = s.x;
        if (cls) {
            rec["y"] = s.label();
            std::vector<int> votes(s.h.begin(), s.h.end());
            rec["h"] = votes;
        } else {
            rec["y"] = s.y;
            rec["h"] = s.h;
        }
        out << rec.dump() << '\n';
    }
}

Dataset read_dataset(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    std::optional<Dataset> data;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const Json j = parse_line(line, lineno);
        const std::string where = "line " + std::to_string(lineno);
        if (!data) {
            Fields f(j, where);
            std::string kind;
            std::size_t d = 0;
            int k = 0;
            if (!f.has("task_kind") || !f.has("d")) f.fail("dataset header needs task_kind and d");
            f.get("task_kind", kind);
            f.get("d", d);
            f.get("K", k);
            f.finish();
            try {
                data.emplace(parse_task_kind(kind), d, k);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(where + ": " + e.what());
            }
            continue;
        }
        Fields f(j, where);
        if (!f.has("x") || !f.has("y") || !f.has("h")) f.fail("sample record needs x, y and h");
        Sample s;
        s.x = number_array(f.at("x"), where + ".x");
        const Json& y = f.at("y");
        if (!y.is_number()) f.fail("y must be a number");
        s.y = y.get<double>();
        s.h = number_array(f.at("h"), where + ".h");
        f.finish();
        if (data->task() == TaskKind::classification) {
            bool integral = std::floor(s.y) == s.y;
            for (double v : s.h) integral = integral && std::floor(v) == v;
            if (!integral) f.fail("classification labels and votes must be integers");
        }
        try {
            data->add(std::move(s));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    if (!data) throw ConfigError("dataset file has no header record");
    return std::move(*data);
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
    std::ostringstream out;
    write_dataset(out, data);
    write_text_file(path, out.str());
}

Dataset read_dataset(const std::filesystem::path& path) {
    auto in = open_input(path);
    try {
        return read_dataset(in);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

Json to_json(const ModelSpec& spec) {
    Json j{{"kind", std::string(to_string(spec.kind))}, {"input_dim", spec.input_dim}, {"num_classes", spec.num_classes}};
    if (spec.kind == ModelKind::mlp) {
        j["hidden"] = spec.hidden;
        j["activation"] = std::string(to_string(spec.activation));
    }
    return j;
}

ModelSpec model_spec_from_json(const Json& j) {
    Fields f(j, "model");
    ModelSpec spec;
    spec.kind = parse_enum(f, "kind", [](const std::string& s) { return parse_model_kind(s); });
    f.get("input_dim", spec.input_dim);
    f.get("num_classes", spec.num_classes);
    f.get("hidden", spec.hidden);
    if (f.has("activation")) spec.activation = parse_enum(f, "activation", [](const std::string& s) { return parse_activation(s); });
    f.finish();
    try {
        (void)make_model(spec);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    return spec;
}

Json checkpoint_to_json(const Model& model) {
    const auto p = model.params();
    return Json{{"format", "triage.checkpoint.v1"},
                {"spec", to_json(model.spec())},
                {"params", std::vector<double>(p.begin(), p.end())}};
}

AnyModel checkpoint_from_json(const Json& j) {
    Fields f(j, "checkpoint");
    std::string format;
    f.get("format", format);
    if (format != "triage.checkpoint.v1") f.fail("unsupported format '" + format + "'");
    if (!f.has("spec") || !f.has("params")) f.fail("needs spec and params");
    const ModelSpec spec = model_spec_from_json(f.at("spec"));
    const auto params = number_array(f.at("params"), "checkpoint.params");
    f.finish();
    try {
        return make_model(spec, params);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("checkpoint: ") + e.what());
    }
}

Json to_json(const TrainConfig& c) {
    return Json{{"budget", c.budget},
                {"outer_steps", c.outer_steps},
                {"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"learning_rate", c.learning_rate},
                {"scorer_learning_rate", c.scorer_learning_rate},
                {"patience", c.patience},
                {"seed", c.seed.value},
                {"filter_with", std::string(to_string(c.filter_with))},
                {"optimizer", std::string(to_string(c.optimizer))},
                {"warmup_steps", c.warmup_steps},
                {"shuffle", c.shuffle},
                {"smoothing_epsilon", c.smoothing_epsilon}};
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
    Fields f(j, "train");
    f.get("budget", c.budget);
    f.get("outer_steps", c.outer_steps);
    f.get("epochs", c.epochs);
    f.get("batch_size", c.batch_size);
    f.get("learning_rate", c.learning_rate);
    f.get("scorer_learning_rate", c.scorer_learning_rate);
    f.get("patience", c.patience);
    f.get("seed", c.seed);
    if (f.has("filter_with")) c.filter_with = parse_enum(f, "filter_with", [](const std::string& s) { return parse_filter_with(s); });
    if (f.has("optimizer")) c.optimizer = parse_enum(f, "optimizer", [](const std::string& s) { return parse_optimizer(s); });
    f.get("warmup_steps", c.warmup_steps);
    f.get("shuffle", c.shuffle);
    f.get("smoothing_epsilon", c.smoothing_epsilon);
    f.finish();
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("train: ") + e.what());
    }
    return c;
}

Json to_json(const RegressionSpec& s) {
    return Json{{"n", s.n},
                {"x_min", s.x_min},
                {"x_max", s.x_max},
                {"boundaries", s.boundaries},
                {"generator_thetas", s.generator_thetas},
                {"noise_variances", s.noise_variances},
                {"replicate_humans", s.replicate_humans},
                {"seed", s.seed.value}};
}

RegressionSpec regression_spec_from_json(const Json& j, RegressionSpec s) {
    Fields f(j, "regression");
    f.get("n", s.n);
    f.get("x_min", s.x_min);
    f.get("x_max", s.x_max);
    f.get("boundaries", s.boundaries);
    f.get("generator_thetas", s.generator_thetas);
    f.get("noise_variances", s.noise_variances);
    f.get("replicate_humans", s.replicate_humans);
    f.get("seed", s.seed);
    f.finish();
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("regression: ") + e.what());
    }
    return s;
}

Json to_json(const ClassificationSpec& s) {
    return Json{{"n", s.n},
                {"d", s.d},
                {"num_classes", s.num_classes},
                {"regions", s.regions},
                {"region_spacing", s.region_spacing},
                {"separation", s.separation},
                {"blob_std", s.blob_std},
                {"experts", s.experts},
                {"confusion_rates", s.confusion_rates},
                {"seed", s.seed.value}};
}

ClassificationSpec classification_spec_from_json(const Json& j, ClassificationSpec s) {
    Fields f(j, "classification");
    f.get("n", s.n);
    f.get("d", s.d);
    f.get("num_classes", s.num_classes);
    f.get("regions", s.regions);
    f.get("region_spacing", s.region_spacing);
    f.get("separation", s.separation);
    f.get("blob_std", s.blob_std);
    f.get("experts", s.experts);
    f.get("confusion_rates", s.confusion_rates);
    f.get("seed", s.seed);
    f.finish();
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("classification: ") + e.what());
    }
    return s;
}

GradcheckConfig default_gradcheck() {
    GradcheckConfig g;
    g.models = {
        {ModelKind::sigmoid_1d, 1},
        {ModelKind::linear, 3},
        {ModelKind::softmax_linear, 3, 4},
        {ModelKind::mlp, 3, 0, {5, 4}, Activation::tanh},
        {ModelKind::mlp, 3, 4, {5, 4}, Activation::tanh},
        {ModelKind::mlp, 3, 4, {6}, Activation::relu},
    };
    return g;
}

ModelSpec AppConfig::model_for_task() const {
    if (model) return *model;
    if (task == TaskKind::regression) return {ModelKind::sigmoid_1d, 1};
    return {ModelKind::softmax_linear, classification.d, classification.num_classes};
}

ModelSpec AppConfig::scorer_for_task() const {
    if (scorer) return *scorer;
    const std::size_t d = task == TaskKind::regression ? 1 : classification.d;
    return {ModelKind::mlp, d, 0, {16}, Activation::tanh};
}

SweepConfig AppConfig::sweep_config() const {
    SweepConfig s;
    s.data = classification;
    s.split = split;
    s.model = model_for_task();
    s.scorer = scorer_for_task();
    s.train = train;
    s.budgets = sweep_budgets;
    s.methods = sweep_methods;
    s.seeds = sweep_seeds;
    s.jobs = jobs;
    return s;
}

void AppConfig::override_seed(std::uint64_t seed) {
    regression.seed = RngSeed{seed};
    classification.seed = RngSeed{seed};
    train.seed = RngSeed{seed};
    four_settings_seeds = {seed};
    sweep_seeds = {seed};
    gradcheck.options.seed = RngSeed{seed};
}

AppConfig parse_config(const Json& j) {
    AppConfig c;
    Fields f(j, "");
    if (f.has("task")) c.task = parse_enum(f, "task", [](const std::string& s) { return parse_task_kind(s); });
    if (f.has("regression")) c.regression = regression_spec_from_json(f.at("regression"));
    if (f.has("classification")) c.classification = classification_spec_from_json(f.at("classification"));
    if (f.has("split")) {
        Fields s(f.at("split"), "split");
        s.get("train", c.split.train);
        s.get("val", c.split.val);
        s.get("test", c.split.test);
        s.finish();
        if (!(c.split.train > 0 && c.split.val > 0 && c.split.test > 0) ||
            std::abs(c.split.train + c.split.val + c.split.test - 1.0) > 1e-9)
            s.fail("fractions must be positive and sum to 1");
    }
    if (f.has("model")) c.model = model_spec_from_json(f.at("model"));
    if (f.has("scorer")) c.scorer = model_spec_from_json(f.at("scorer"));
    if (f.has("train")) c.train = train_config_from_json(f.at("train"), c.train);
    if (f.has("four_settings")) {
        Fields s(f.at("four_settings"), "four_settings");
        if (s.has("full_automation"))
            c.four_settings.full_automation = train_config_from_json(s.at("full_automation"), c.four_settings.full_automation);
        if (s.has("triage")) c.four_settings.triage = train_config_from_json(s.at("triage"), c.four_settings.triage);
        s.get("seeds", c.four_settings_seeds);
        s.finish();
        if (c.four_settings_seeds.empty()) s.fail("seeds must not be empty");
    }
    if (f.has("sweep")) {
        Fields s(f.at("sweep"), "sweep");
        s.get("budgets", c.sweep_budgets);
        if (s.has("methods")) {
            std::vector<std::string> names;
            s.get("methods", names);
            c.sweep_methods.clear();
            for (const auto& n : names) {
                try {
                    c.sweep_methods.push_back(parse_method(n));
                } catch (const PreconditionError& e) {
                    s.fail(e.what());
                }
            }
        }
        s.get("seeds", c.sweep_seeds);
        s.get("jobs", c.jobs);
        s.finish();
        for (double b : c.sweep_budgets)
            if (!(b >= 0.0 && b <= 1.0)) s.fail("budgets must lie in [0, 1]");
        if (c.sweep_budgets.empty() || c.sweep_methods.empty() || c.sweep_seeds.empty())
            s.fail("budgets, methods and seeds must not be empty");
    }
    if (f.has("gradcheck")) {
        Fields s(f.at("gradcheck"), "gradcheck");
        s.get("trials", c.gradcheck.options.trials);
        s.get("step", c.gradcheck.options.step);
        s.get("threshold", c.gradcheck.options.threshold);
        s.get("seed", c.gradcheck.options.seed);
        if (s.has("models")) {
            const Json& models = s.at("models");
            if (!models.is_array() || models.empty()) s.fail("models must be a nonempty array");
            c.gradcheck.models.clear();
            for (const auto& m : models) c.gradcheck.models.push_back(model_spec_from_json(m));
        }
        s.finish();
        if (c.gradcheck.options.trials < 1) s.fail("trials must be at least 1");
    }
    f.finish();
    c.four_settings.data = c.regression;
    if (c.model && c.model->task() == TaskKind::regression) c.four_settings.model = *c.model;
    return c;
}

AppConfig load_config(const std::filesystem::path& path) {
    try {
        return parse_config(read_json_file(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

Json read_json_file(const std::filesystem::path& path) {
    auto in = open_input(path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace triage
