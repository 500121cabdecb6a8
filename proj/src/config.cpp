#include "robustlab/config.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <vector>

#include "robustlab/errors.hpp"

namespace robustlab {

namespace {

const char* const kKnownKeys[] = {
    "model",         "dataset",        "expert_init",     "optimizer",
    "lr",            "beta1",          "beta2",           "adam_eps",
    "batch_size",    "total_steps",    "epochs",          "decay_norm",
    "decay_lambda",  "decay_squared_l2", "adv_method",    "adv_eps",
    "adv_pgd_steps", "adv_pgd_step_size", "adv_delay_epochs", "adv_label_source",
    "adv_eps_linear_decay", "loss",    "label_smoothing", "seed",
    "invariant_check_stride",
};

std::string known_keys_joined() {
    std::string out;
    for (const char* k : kKnownKeys) {
        if (!out.empty()) out += ", ";
        out += k;
    }
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

// Plain decimal or a "numerator/denominator" fraction (for pixel-range
// budgets like 8/255).
double parse_number(const std::string& key, const std::string& value) {
    const std::size_t slash = value.find('/');
    auto one = [&](const std::string& s) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw ArgumentError("");
            return v;
        } catch (const std::exception&) {
            throw ArgumentError("config key '" + key + "' has unparseable number '" + value + "'");
        }
    };
    if (slash == std::string::npos) return one(value);
    const double num = one(trim(value.substr(0, slash)));
    const double den = one(trim(value.substr(slash + 1)));
    if (den == 0) throw ArgumentError("config key '" + key + "' divides by zero");
    return num / den;
}

long parse_integer(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long v = std::stol(value, &used);
        if (used != value.size()) throw ArgumentError("");
        return v;
    } catch (const std::exception&) {
        throw ArgumentError("config key '" + key + "' has unparseable integer '" + value + "'");
    }
}

std::uint64_t parse_seed(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        // stoull would wrap "-1" around instead of failing
        if (!value.empty() && value[0] == '-') throw ArgumentError("");
        const unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) throw ArgumentError("");
        return v;
    } catch (const std::exception&) {
        throw ArgumentError("config key '" + key + "' has unparseable seed '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ArgumentError("config key '" + key + "' must be true or false, got '" + value + "'");
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ArgumentError("config line " + std::to_string(lineno) +
                                " is not 'key = value': " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ArgumentError("config line " + std::to_string(lineno) + " has an empty key");
        if (value.empty())
            throw ArgumentError("config key '" + key + "' has an empty value (line " +
                                std::to_string(lineno) + ")");
        if (!kv.emplace(key, value).second)
            throw ArgumentError("config key '" + key + "' appears twice");
    }
    return kv;
}

ExperimentConfig parse_config_text(const std::string& text) {
    const auto kv = parse_key_values(text);
    for (const auto& [key, value] : kv) {
        (void)value;
        if (std::find_if(std::begin(kKnownKeys), std::end(kKnownKeys),
                         [&](const char* k) { return key == k; }) == std::end(kKnownKeys))
            throw ArgumentError("unknown config key '" + key + "'; known keys: " +
                                known_keys_joined());
    }

    ExperimentConfig c;
    bool loss_given = false;
    AdvTrainSpec adv;
    bool adv_given = false;

    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };

    if (const auto* v = get("model")) {
        if (*v == "linear")
            c.model = Recipe::LinearKind;
        else if (*v == "convnet")
            c.model = Recipe::ConvNetKind;
        else
            throw ArgumentError("model must be linear or convnet, got '" + *v + "'");
    }
    if (const auto* v = get("dataset")) {
        if (*v == "mnist37")
            c.dataset = Recipe::Mnist37;
        else if (*v == "cifar10")
            c.dataset = Recipe::Cifar10;
        else
            throw ArgumentError("dataset must be mnist37 or cifar10, got '" + *v + "'");
    }
    if (const auto* v = get("expert_init")) c.expert_init = parse_bool("expert_init", *v);
    if (const auto* v = get("optimizer")) {
        if (*v == "adam")
            c.train.optimizer = Optimizer::Adam;
        else if (*v == "sgd")
            c.train.optimizer = Optimizer::SGD;
        else
            throw ArgumentError("optimizer must be adam or sgd, got '" + *v + "'");
    }
    if (const auto* v = get("lr")) c.train.lr = parse_number("lr", *v);
    if (const auto* v = get("beta1")) c.train.beta1 = parse_number("beta1", *v);
    if (const auto* v = get("beta2")) c.train.beta2 = parse_number("beta2", *v);
    if (const auto* v = get("adam_eps")) c.train.adam_eps = parse_number("adam_eps", *v);
    if (const auto* v = get("batch_size"))
        c.train.batch_size = int(parse_integer("batch_size", *v));
    if (const auto* v = get("total_steps")) c.train.total_steps = parse_integer("total_steps", *v);
    if (const auto* v = get("epochs")) c.train.epochs = int(parse_integer("epochs", *v));
    if (const auto* v = get("decay_norm")) {
        if (*v == "none")
            c.train.decay.norm = DecayNorm::None;
        else if (*v == "l1")
            c.train.decay.norm = DecayNorm::L1;
        else if (*v == "l2")
            c.train.decay.norm = DecayNorm::L2;
        else
            throw ArgumentError("decay_norm must be none, l1, or l2, got '" + *v + "'");
    }
    if (const auto* v = get("decay_lambda"))
        c.train.decay.lambda = parse_number("decay_lambda", *v);
    if (const auto* v = get("decay_squared_l2"))
        c.train.decay.squared_l2 = parse_bool("decay_squared_l2", *v);
    if (const auto* v = get("adv_method")) {
        if (*v == "none") {
            adv_given = false;
        } else if (*v == "fgsm") {
            adv.method = AdvMethod::FGSM;
            adv_given = true;
        } else if (*v == "fast-grad-l2") {
            adv.method = AdvMethod::FastGradL2;
            adv_given = true;
        } else if (*v == "pgd") {
            adv.method = AdvMethod::PGD;
            adv_given = true;
        } else {
            throw ArgumentError("adv_method must be none, fgsm, fast-grad-l2, or pgd, got '" +
                                *v + "'");
        }
    }
    if (const auto* v = get("adv_eps")) adv.eps = parse_number("adv_eps", *v);
    if (const auto* v = get("adv_pgd_steps"))
        adv.pgd_steps = int(parse_integer("adv_pgd_steps", *v));
    if (const auto* v = get("adv_pgd_step_size"))
        adv.pgd_step_size = parse_number("adv_pgd_step_size", *v);
    if (const auto* v = get("adv_delay_epochs"))
        adv.delay_epochs = int(parse_integer("adv_delay_epochs", *v));
    if (const auto* v = get("adv_label_source")) {
        if (*v == "true-label")
            adv.label_source = LabelSource::TrueLabel;
        else if (*v == "model-prediction")
            adv.label_source = LabelSource::ModelPrediction;
        else
            throw ArgumentError(
                "adv_label_source must be true-label or model-prediction, got '" + *v + "'");
    }
    if (const auto* v = get("adv_eps_linear_decay"))
        adv.eps_linear_decay = parse_bool("adv_eps_linear_decay", *v);
    if (const auto* v = get("loss")) {
        loss_given = true;
        if (*v == "softplus-binary")
            c.train.loss.kind = LossFn::Kind::SoftplusBinary;
        else if (*v == "softmax-xent")
            c.train.loss.kind = LossFn::Kind::SoftmaxXent;
        else
            throw ArgumentError("loss must be softplus-binary or softmax-xent, got '" + *v + "'");
    }
    if (const auto* v = get("label_smoothing"))
        c.train.loss.smoothing = parse_number("label_smoothing", *v);
    if (const auto* v = get("seed")) c.train.seed = parse_seed("seed", *v);
    if (const auto* v = get("invariant_check_stride"))
        c.train.invariant_check_stride = int(parse_integer("invariant_check_stride", *v));

    if (!loss_given)
        c.train.loss.kind = c.model == Recipe::LinearKind ? LossFn::Kind::SoftplusBinary
                                                          : LossFn::Kind::SoftmaxXent;
    if (adv_given) c.train.adv = adv;

    c.train.validate();
    if (c.expert_init && c.model != Recipe::LinearKind)
        throw ArgumentError("expert_init applies to the linear model only");
    return c;
}

ExperimentConfig config_for_recipe(const Recipe& r) {
    ExperimentConfig c;
    c.model = r.model;
    c.dataset = r.dataset;
    c.expert_init = r.expert_init;
    c.train = r.config;
    return c;
}

std::map<std::string, std::string> config_to_map(const ExperimentConfig& c) {
    std::map<std::string, std::string> kv;
    kv["model"] = c.model == Recipe::LinearKind ? "linear" : "convnet";
    kv["dataset"] = c.dataset == Recipe::Mnist37 ? "mnist37" : "cifar10";
    kv["expert_init"] = c.expert_init ? "true" : "false";
    kv["optimizer"] = c.train.optimizer == Optimizer::Adam ? "adam" : "sgd";
    kv["lr"] = fmt_double(c.train.lr);
    kv["beta1"] = fmt_double(c.train.beta1);
    kv["beta2"] = fmt_double(c.train.beta2);
    kv["adam_eps"] = fmt_double(c.train.adam_eps);
    kv["batch_size"] = std::to_string(c.train.batch_size);
    if (c.train.total_steps > 0) kv["total_steps"] = std::to_string(c.train.total_steps);
    if (c.train.epochs > 0) kv["epochs"] = std::to_string(c.train.epochs);
    switch (c.train.decay.norm) {
        case DecayNorm::None: kv["decay_norm"] = "none"; break;
        case DecayNorm::L1: kv["decay_norm"] = "l1"; break;
        case DecayNorm::L2: kv["decay_norm"] = "l2"; break;
    }
    if (c.train.decay.norm != DecayNorm::None) {
        kv["decay_lambda"] = fmt_double(c.train.decay.lambda);
        kv["decay_squared_l2"] = c.train.decay.squared_l2 ? "true" : "false";
    }
    if (c.train.adv) {
        switch (c.train.adv->method) {
            case AdvMethod::FGSM: kv["adv_method"] = "fgsm"; break;
            case AdvMethod::FastGradL2: kv["adv_method"] = "fast-grad-l2"; break;
            case AdvMethod::PGD: kv["adv_method"] = "pgd"; break;
        }
        kv["adv_eps"] = fmt_double(c.train.adv->eps);
        if (c.train.adv->method == AdvMethod::PGD) {
            kv["adv_pgd_steps"] = std::to_string(c.train.adv->pgd_steps);
            kv["adv_pgd_step_size"] = fmt_double(c.train.adv->pgd_step_size);
        }
        kv["adv_delay_epochs"] = std::to_string(c.train.adv->delay_epochs);
        kv["adv_label_source"] = c.train.adv->label_source == LabelSource::TrueLabel
                                     ? "true-label"
                                     : "model-prediction";
        kv["adv_eps_linear_decay"] = c.train.adv->eps_linear_decay ? "true" : "false";
    } else {
        kv["adv_method"] = "none";
    }
    kv["loss"] = c.train.loss.kind == LossFn::Kind::SoftplusBinary ? "softplus-binary"
                                                                   : "softmax-xent";
    kv["label_smoothing"] = fmt_double(c.train.loss.smoothing);
    kv["seed"] = std::to_string(c.train.seed);
    kv["invariant_check_stride"] = std::to_string(c.train.invariant_check_stride);
    return kv;
}

std::string config_to_text(const ExperimentConfig& c) {
    std::string out;
    for (const auto& [key, value] : config_to_map(c)) out += key + " = " + value + "\n";
    return out;
}

double parse_fraction_value(const std::string& name, const std::string& value) {
    return parse_number(name, value);
}

}  // namespace robustlab
