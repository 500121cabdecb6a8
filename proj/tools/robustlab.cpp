#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "robustlab/attacks.hpp"
#include "robustlab/config.hpp"
#include "robustlab/dataio.hpp"
#include "robustlab/errors.hpp"
#include "robustlab/evalsweep.hpp"
#include "robustlab/manifest.hpp"
#include "robustlab/models.hpp"
#include "robustlab/training.hpp"

namespace rl = robustlab;

namespace {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw rl::DataError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw rl::DataError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw rl::DataError("failed writing '" + path + "'");
}

rl::LabeledDataset binary_as_labeled(const rl::BinaryView& b) {
    rl::LabeledDataset ds;
    ds.images = b.images;
    ds.labels.reserve(b.size());
    for (int y : b.y) ds.labels.push_back(y == 1 ? 0 : 1);  // class 0 is y=+1
    ds.class_names = {std::to_string(b.class_a), std::to_string(b.class_b)};
    return ds;
}

rl::BinaryView binary_head(const rl::BinaryView& b, std::size_t n) {
    if (n == 0 || n >= b.size()) return b;
    rl::BinaryView out;
    out.class_a = b.class_a;
    out.class_b = b.class_b;
    const std::size_t d = b.feature_count();
    out.images.shape = b.images.shape;
    out.images.shape[0] = n;
    out.images.data.assign(b.images.data.begin(), b.images.data.begin() + long(n * d));
    out.y.assign(b.y.begin(), b.y.begin() + long(n));
    return out;
}

struct DataPaths {
    std::vector<std::string> files;
};

rl::BinaryView load_mnist37(const std::string& root, bool train, DataPaths& used) {
    const std::string ip = rl::mnist_images_path(root, train);
    const std::string lp = rl::mnist_labels_path(root, train);
    used.files.push_back(ip);
    used.files.push_back(lp);
    return rl::binary_filter(rl::load_mnist_idx(ip, lp), 3, 7);
}

rl::LabeledDataset load_cifar(const std::string& root, bool train, DataPaths& used) {
    const auto paths = train ? rl::cifar10_train_paths(root) : rl::cifar10_test_paths(root);
    for (const auto& p : paths) used.files.push_back(p);
    return rl::load_cifar10_bin(paths);
}

std::map<std::string, std::string> digests_for(const DataPaths& used) {
    std::map<std::string, std::string> out;
    for (const auto& p : used.files) out[p] = rl::digest_hex(rl::file_digest(p));
    return out;
}

// "start:stop:step", a comma list, or one value; every component may be a
// fraction like 8/255.
std::vector<double> parse_grid(const std::string& spec) {
    std::vector<double> grid;
    if (spec.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::size_t pos = 0;
        while (true) {
            const std::size_t colon = spec.find(':', pos);
            if (colon == std::string::npos) {
                parts.push_back(spec.substr(pos));
                break;
            }
            parts.push_back(spec.substr(pos, colon - pos));
            pos = colon + 1;
        }
        if (parts.size() != 3)
            throw rl::ArgumentError("grid must be start:stop:step, a comma list, or one value");
        const double start = rl::parse_fraction_value("grid start", parts[0]);
        const double stop = rl::parse_fraction_value("grid stop", parts[1]);
        const double step = rl::parse_fraction_value("grid step", parts[2]);
        if (!(step > 0)) throw rl::ArgumentError("grid step must be positive");
        for (double v = start; v <= stop + step * 0.5; v += step) grid.push_back(v);
    } else {
        std::size_t pos = 0;
        while (pos <= spec.size()) {
            const std::size_t comma = spec.find(',', pos);
            const std::string tok =
                spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            if (!tok.empty()) grid.push_back(rl::parse_fraction_value("grid value", tok));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    if (grid.empty()) throw rl::ArgumentError("empty grid");
    return grid;
}

int class_of_logits(const std::vector<double>& probs) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < probs.size(); ++j)
        if (probs[j] > probs[best]) best = j;
    return int(best);
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string recipe, config_path, data_dir, out;
    std::string log_path, manifest_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    long subset = 0;
    int epochs_override = 0;
    long steps_override = 0;
    int threads = 1;
};

int cmd_train(const TrainArgs& a) {
    rl::ExperimentConfig cfg;
    std::string recipe_name = "custom";
    if (!a.recipe.empty() && !a.config_path.empty())
        throw rl::ArgumentError("pass --recipe or --config, not both");
    if (a.recipe.empty() && a.config_path.empty())
        throw rl::ArgumentError("pass --recipe NAME or --config FILE; recipes: " +
                                rl::recipe_names_joined());
    if (!a.recipe.empty()) {
        cfg = rl::config_for_recipe(rl::find_recipe(a.recipe));
        recipe_name = a.recipe;
    } else {
        cfg = rl::parse_config_text(read_text_file(a.config_path));
    }
    if (a.seed_given) cfg.train.seed = a.seed;
    if (a.epochs_override > 0) {
        if (cfg.train.epochs <= 0)
            throw rl::ArgumentError("--epochs applies to epoch-counted (convnet) configs");
        cfg.train.epochs = a.epochs_override;
    }
    if (a.steps_override > 0) {
        if (cfg.train.total_steps <= 0)
            throw rl::ArgumentError("--steps applies to step-counted (linear) configs");
        cfg.train.total_steps = a.steps_override;
    }
    cfg.train.validate();

    const std::string data_dir = a.data_dir.empty() ? rl::default_data_dir() : a.data_dir;
    const std::string log_path = a.log_path.empty() ? a.out + ".log.csv" : a.log_path;
    const std::string manifest_path =
        a.manifest_path.empty() ? a.out + ".manifest.json" : a.manifest_path;

    DataPaths used;
    rl::ExperimentManifest manifest;
    manifest.recipe = recipe_name;
    manifest.config = rl::config_to_map(cfg);
    manifest.seed = cfg.train.seed;
    manifest.output_paths = {a.out, log_path};
    manifest.version = rl::library_version();

    rl::ModelFile mf;
    mf.recipe = recipe_name;
    mf.loss = cfg.train.loss;
    rl::TrainingLog log;

    if (cfg.model == rl::Recipe::LinearKind) {
        if (cfg.dataset != rl::Recipe::Mnist37)
            throw rl::ArgumentError("the linear model trains on mnist37");
        rl::BinaryView train_data = load_mnist37(data_dir, /*train=*/true, used);
        if (a.subset > 0) train_data = binary_head(train_data, std::size_t(a.subset));
        manifest.dataset_digests = digests_for(used);
        const std::string digest = rl::write_manifest(manifest, manifest_path);
        mf.config_digest = digest;

        rl::LinearLogistic init;
        if (cfg.expert_init)
            init = rl::expert_init(train_data);
        else
            init.w = rl::Tensor({train_data.feature_count()});
        auto result = rl::train(std::move(init), train_data, cfg.train);
        mf.kind = rl::ModelFile::Linear;
        mf.linear = std::move(result.model);
        log = std::move(result.log);
        rl::save_model(mf, a.out);
        write_text_file(log_path, rl::training_log_to_csv(log, digest));
    } else {
        if (cfg.dataset != rl::Recipe::Cifar10)
            throw rl::ArgumentError("the convnet trains on cifar10");
        rl::LabeledDataset train_data = load_cifar(data_dir, /*train=*/true, used);
        if (a.subset > 0) train_data = rl::subset(train_data, std::size_t(a.subset));
        manifest.dataset_digests = digests_for(used);
        const std::string digest = rl::write_manifest(manifest, manifest_path);
        mf.config_digest = digest;

        auto result = rl::train(rl::convnet_init<float>(cfg.train.seed), train_data, cfg.train,
                                a.threads);
        mf.kind = rl::ModelFile::ConvNetKind;
        mf.cnn = rl::convnet_cast<double>(result.model);
        log = std::move(result.log);
        rl::save_model(mf, a.out);
        write_text_file(log_path, rl::training_log_to_csv(log, digest));
    }

    if (!log.rows.empty()) {
        const auto& last = log.rows.back();
        std::printf("trained %s: epochs=%d final_loss=%.6f clean_train_acc=%.4f\n",
                    recipe_name.c_str(), last.epoch, last.loss, last.clean_acc);
    }
    std::printf("model=%s log=%s manifest=%s\n", a.out.c_str(), log_path.c_str(),
                manifest_path.c_str());
    return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string model_path, attack, data_dir, out, images_path;
    std::string eps = "0", step_size = "2/255", ratio = "0", gamma = "0";
    int k = 0, steps = 20, fool_steps = 50;
    double scale = 100.0;
    std::string fool_step_size = "5e-3";
    bool no_clip = false, no_random_start = false, stop_at_zero = false;
    long n = 0;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string grid, mode = "single";
    int target = -1;
};

rl::AttackSpec spec_from_args(const EvalArgs& a) {
    rl::AttackSpec s;
    s.family = rl::attack_family_from_name(a.attack);
    s.eps = rl::parse_fraction_value("--eps", a.eps);
    s.scale = a.scale;
    s.steps = a.steps;
    s.step_size = rl::parse_fraction_value("--step-size", a.step_size);
    s.random_start = !a.no_random_start;
    s.ratio = rl::parse_fraction_value("--ratio", a.ratio);
    s.k = a.k;
    s.gamma = rl::parse_fraction_value("--gamma", a.gamma);
    s.target = a.target;
    s.fool_steps = a.fool_steps;
    s.fool_step_size = rl::parse_fraction_value("--fool-step-size", a.fool_step_size);
    s.clip = !a.no_clip;
    s.seed = a.seed;
    return s;
}

std::map<std::string, std::string> attack_config_map(const rl::AttackSpec& s) {
    std::map<std::string, std::string> kv;
    char buf[64];
    auto put = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        kv[key] = buf;
    };
    kv["attack"] = rl::attack_family_name(s.family);
    put("eps", s.eps);
    put("scale", s.scale);
    kv["steps"] = std::to_string(s.steps);
    put("step_size", s.step_size);
    kv["random_start"] = s.random_start ? "true" : "false";
    put("ratio", s.ratio);
    kv["k"] = std::to_string(s.k);
    put("gamma", s.gamma);
    kv["target"] = std::to_string(s.target);
    kv["clip"] = s.clip ? "true" : "false";
    kv["seed"] = std::to_string(s.seed);
    return kv;
}

std::string manifest_for_eval(const rl::ModelFile& mf, const rl::AttackSpec& s,
                              const EvalArgs& a, const DataPaths& used,
                              const std::string& manifest_path) {
    rl::ExperimentManifest manifest;
    manifest.recipe = mf.recipe + "+" + rl::attack_family_name(s.family);
    manifest.config = attack_config_map(s);
    manifest.config["model"] = a.model_path;
    manifest.config["model_digest"] = rl::digest_hex(rl::file_digest(a.model_path));
    manifest.config["n"] = std::to_string(a.n);
    manifest.seed = s.seed;
    manifest.dataset_digests = digests_for(used);
    manifest.output_paths = {a.out};
    manifest.version = rl::library_version();
    return rl::write_manifest(manifest, manifest_path);
}

int cmd_attack(const EvalArgs& a) {
    const rl::ModelFile mf = rl::load_model(a.model_path);
    rl::AttackSpec s = spec_from_args(a);
    const std::string data_dir = a.data_dir.empty() ? rl::default_data_dir() : a.data_dir;
    DataPaths used;

    const bool is_linear = mf.kind == rl::ModelFile::Linear;
    if (!is_linear &&
        (s.family == rl::AttackSpec::TopWeightPixel ||
         s.family == rl::AttackSpec::ScaledClippedFGL2))
        throw rl::ArgumentError(std::string("attack '") + rl::attack_family_name(s.family) +
                                "' applies to the linear model only");
    if (s.family == rl::AttackSpec::Fooling)
        throw rl::ArgumentError("use the fool command for fooling images");

    const std::string manifest_path = a.out + ".manifest.json";

    if (s.family == rl::AttackSpec::JSMA) {
        // Table-shaped output: one row for this gamma over the first n sources.
        rl::LabeledDataset data;
        rl::MulticlassHooks hooks;
        rl::ConvNet cnn;
        rl::LinearLogistic lin;
        if (is_linear) {
            lin = mf.linear;
            data = binary_as_labeled(load_mnist37(data_dir, false, used));
            hooks = rl::multiclass_hooks(lin);
        } else {
            cnn = mf.cnn;
            data = load_cifar(data_dir, false, used);
            hooks = rl::multiclass_hooks(cnn);
        }
        const std::size_t n_sources = a.n > 0 ? std::size_t(a.n) : std::size_t(10);
        const std::string digest = manifest_for_eval(mf, s, a, used, manifest_path);
        const rl::JsmaTable table =
            rl::jsma_table(hooks, data, n_sources, {s.gamma}, a.threads);
        write_text_file(a.out, rl::jsma_table_to_csv(table, digest));
        for (const auto& r : table.rows)
            std::printf("n=%ld gamma=%.4f asr=%.4f pert_rate=%.5f s_pert_rate=%.5f\n",
                        r.n_sources, r.gamma, r.asr, r.pert_rate, r.s_pert_rate);
        return 0;
    }

    std::vector<rl::AttackExampleRow> rows;
    std::vector<rl::Tensor> perturbations;
    std::size_t correct_clean = 0, correct_adv = 0;

    if (is_linear) {
        rl::BinaryView data = load_mnist37(data_dir, false, used);
        if (a.n > 0) data = binary_head(data, std::size_t(a.n));
        const std::string digest = manifest_for_eval(mf, s, a, used, manifest_path);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const rl::Tensor x = data.example(i);
            const int y = data.y[i];
            rl::AttackResult r;
            switch (s.family) {
                case rl::AttackSpec::FGSM:
                    r = rl::fgsm(mf.linear, x, y, s.eps, s.clip);
                    break;
                case rl::AttackSpec::FastGradL2:
                    r = rl::fast_grad_l2(mf.linear, x, y, s.eps, s.clip);
                    break;
                case rl::AttackSpec::ScaledClippedFGL2:
                    r = rl::scaled_clipped_fgl2(mf.linear, x, y, s.eps, s.scale);
                    break;
                case rl::AttackSpec::PGD:
                    r = rl::pgd(mf.linear, x, y, s.eps, s.steps, s.step_size, s.random_start,
                                rl::derive_seed(s.seed, i));
                    break;
                case rl::AttackSpec::PixelSwap:
                    r = rl::pixel_swap(x, s.ratio, rl::derive_seed(s.seed, i));
                    break;
                case rl::AttackSpec::TopWeightPixel:
                    r = rl::top_weight_pixel(mf.linear, x, y, s.k);
                    break;
                default:
                    throw rl::ArgumentError("unsupported attack for this command");
            }
            const int pred_clean = rl::predict(mf.linear, x) >= 0 ? 1 : -1;
            const int pred_adv = rl::predict(mf.linear, r.x_adv) >= 0 ? 1 : -1;
            if (pred_clean == y) ++correct_clean;
            if (pred_adv == y) ++correct_adv;
            rl::AttackExampleRow row;
            row.index = long(i);
            row.label = y;
            row.prediction = pred_adv;
            row.success = pred_adv != y;
            row.l2_distortion_pct = 100.0 * r.l2_distortion;
            row.features_changed = r.features_changed;
            rows.push_back(row);
            if (!a.images_path.empty() && perturbations.size() < 64) {
                rl::Tensor p({28, 28});
                for (std::size_t j = 0; j < p.size(); ++j)
                    p.data[j] = (r.x_adv.data[j] - x.data[j]) * 0.5 + 0.5;
                perturbations.push_back(std::move(p));
            }
        }
        write_text_file(a.out, rl::attack_rows_to_csv(rows, digest));
        std::printf("clean_accuracy=%.4f attacked_accuracy=%.4f n=%zu\n",
                    double(correct_clean) / double(data.size()),
                    double(correct_adv) / double(data.size()), data.size());
    } else {
        rl::LabeledDataset data = load_cifar(data_dir, false, used);
        if (a.n > 0) data = rl::subset(data, std::size_t(a.n));
        const std::string digest = manifest_for_eval(mf, s, a, used, manifest_path);
        const rl::MulticlassHooks hooks = rl::multiclass_hooks(mf.cnn);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const rl::Tensor x = data.example(i);
            const int label = data.labels[i];
            rl::AttackResult r;
            switch (s.family) {
                case rl::AttackSpec::FGSM:
                    r = rl::fgsm_multi(hooks, x, label, s.eps, s.clip);
                    break;
                case rl::AttackSpec::FastGradL2:
                    r = rl::fast_grad_l2_multi(hooks, x, label, s.eps, s.clip);
                    break;
                case rl::AttackSpec::PGD:
                    r = rl::pgd_multi(hooks, x, label, s.eps, s.steps, s.step_size,
                                      s.random_start, rl::derive_seed(s.seed, i));
                    break;
                case rl::AttackSpec::PixelSwap:
                    r = rl::pixel_swap(x, s.ratio, rl::derive_seed(s.seed, i));
                    break;
                default:
                    throw rl::ArgumentError("unsupported attack for this command");
            }
            const int pred_clean = class_of_logits(hooks.probs(x));
            const int pred_adv = class_of_logits(hooks.probs(r.x_adv));
            if (pred_clean == label) ++correct_clean;
            if (pred_adv == label) ++correct_adv;
            rl::AttackExampleRow row;
            row.index = long(i);
            row.label = label;
            row.prediction = pred_adv;
            row.success = pred_adv != label;
            row.l2_distortion_pct = 100.0 * r.l2_distortion;
            row.features_changed = r.features_changed;
            rows.push_back(row);
            if (!a.images_path.empty() && perturbations.size() < 64) {
                rl::Tensor p({32, 32, 3});
                for (std::size_t j = 0; j < p.size(); ++j)
                    p.data[j] = (r.x_adv.data[j] - x.data[j]) * 0.5 + 0.5;
                perturbations.push_back(std::move(p));
            }
        }
        write_text_file(a.out, rl::attack_rows_to_csv(rows, digest));
        std::printf("clean_accuracy=%.4f attacked_accuracy=%.4f n=%zu\n",
                    double(correct_clean) / double(data.size()),
                    double(correct_adv) / double(data.size()), data.size());
    }

    if (!a.images_path.empty() && !perturbations.empty())
        rl::export_image_grid(perturbations, a.images_path);
    return 0;
}

int cmd_sweep(const EvalArgs& a) {
    const rl::ModelFile mf = rl::load_model(a.model_path);
    rl::AttackSpec s = spec_from_args(a);
    const std::vector<double> grid = parse_grid(a.grid);
    const std::string data_dir = a.data_dir.empty() ? rl::default_data_dir() : a.data_dir;
    const std::string manifest_path = a.out + ".manifest.json";
    DataPaths used;

    rl::SweepCurve curve;
    if (mf.kind == rl::ModelFile::Linear) {
        rl::BinaryView data = load_mnist37(data_dir, false, used);
        if (a.n > 0) data = binary_head(data, std::size_t(a.n));
        const std::string digest = manifest_for_eval(mf, s, a, used, manifest_path);
        curve = rl::sweep(mf.linear, s, data, grid, a.stop_at_zero, a.threads);
        write_text_file(a.out, rl::sweep_to_csv(curve, digest));
    } else {
        rl::LabeledDataset data = load_cifar(data_dir, false, used);
        if (a.n > 0) data = rl::subset(data, std::size_t(a.n));
        const std::string digest = manifest_for_eval(mf, s, a, used, manifest_path);
        curve = rl::sweep(mf.cnn, s, data, grid, a.stop_at_zero, a.threads);
        write_text_file(a.out, rl::sweep_to_csv(curve, digest));
    }
    for (const auto& p : curve.points)
        std::printf("param=%.6g accuracy=%.4f distortion_pct=%.4f\n", p.param, p.accuracy,
                    p.mean_l2_distortion_pct);
    const auto crossing = rl::chance_crossing(curve);
    if (crossing)
        std::printf("crosses chance (%.2f) at param=%.6g\n", curve.chance, *crossing);
    else
        std::printf("never crosses chance (%.2f)\n", curve.chance);
    return 0;
}

int cmd_fool(const EvalArgs& a) {
    const rl::ModelFile mf = rl::load_model(a.model_path);
    rl::AttackSpec s;
    s.family = rl::AttackSpec::Fooling;
    s.target = a.target;
    s.fool_steps = a.fool_steps;
    s.fool_step_size = rl::parse_fraction_value("--step-size", a.fool_step_size);
    s.seed = a.seed;
    const std::string manifest_path = a.out + ".manifest.json";
    DataPaths used;  // fooling starts from noise; no dataset involved

    rl::MulticlassHooks hooks;
    rl::ConvNet cnn;
    rl::LinearLogistic lin;
    if (mf.kind == rl::ModelFile::Linear) {
        lin = mf.linear;
        hooks = rl::multiclass_hooks(lin);
    } else {
        cnn = mf.cnn;
        hooks = rl::multiclass_hooks(cnn);
    }
    const std::string digest = manifest_for_eval(mf, s, a, used, manifest_path);

    if (a.mode == "sweep") {
        const std::vector<double> grid =
            parse_grid(a.grid.empty() ? "0:64/255:4/255" : a.grid);
        const std::size_t n = a.n > 0 ? std::size_t(a.n) : 1000;
        const auto curve = rl::fooling_asr_sweep(hooks, grid, n, s.seed);
        write_text_file(a.out, rl::fooling_sweep_to_csv(curve, digest));
        for (const auto& p : curve)
            std::printf("eps=%.6g asr=%.4f margin=%.4f\n", p.eps, p.asr, p.margin);
        return 0;
    }
    if (a.mode != "single") throw rl::ArgumentError("--mode must be single or sweep");

    std::vector<rl::Tensor> images;
    std::string csv = "# manifest_digest=" + digest + "\ntarget,final_target_prob\n";
    const int targets = int(hooks.num_classes);
    const int lo = a.target >= 0 ? a.target : 0;
    const int hi = a.target >= 0 ? a.target + 1 : targets;
    for (int t = lo; t < hi; ++t) {
        const rl::FoolingRun run = rl::fooling_ascent(hooks, t, s.fool_steps, s.fool_step_size,
                                                      rl::derive_seed(s.seed, std::size_t(t)));
        char buf[64];
        std::snprintf(buf, sizeof buf, "%d,%.17g\n", t, run.prob_trace.back());
        csv += buf;
        images.push_back(run.image);
    }
    write_text_file(a.out, csv);
    if (!a.images_path.empty()) {
        // flatten linear inputs into their square image shape for display
        std::vector<rl::Tensor> shaped;
        for (const auto& im : images) {
            if (im.ndim() == 3)
                shaped.push_back(im);
            else {
                rl::Tensor p = im;
                const std::size_t side = std::size_t(std::lround(std::sqrt(double(p.size()))));
                p.shape = {side, side};
                shaped.push_back(std::move(p));
            }
        }
        rl::export_image_grid(shaped, a.images_path);
    }
    std::printf("wrote %zu fooling images' confidences to %s\n", images.size(), a.out.c_str());
    return 0;
}

struct ExportArgs {
    std::string model_path, out, layer = "auto";
};

int cmd_export_weights(const ExportArgs& a) {
    const rl::ModelFile mf = rl::load_model(a.model_path);
    if (mf.kind == rl::ModelFile::Linear) {
        rl::export_weight_image(mf.linear.w, a.out);
    } else {
        if (a.layer == "auto" || a.layer == "conv1")
            rl::export_weight_image(mf.cnn.conv1, a.out);
        else if (a.layer == "fc")
            rl::export_weight_image(mf.cnn.fc, a.out);
        else
            throw rl::ArgumentError("--layer must be conv1 or fc for the convnet");
    }
    std::printf("wrote %s\n", a.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"robustlab: train small models, attack them, and sweep the attacks"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train a recipe or config file");
    train->add_option("--recipe", ta.recipe, "named recipe (see list-recipes)");
    train->add_option("--config", ta.config_path, "key = value config file");
    train->add_option("--data-dir", ta.data_dir, "dataset root (default $ROBUSTLAB_DATA_DIR)");
    train->add_option("--seed", ta.seed, "override the config seed")
        ->each([&](const std::string&) { ta.seed_given = true; });
    train->add_option("--out", ta.out, "output model file")->required();
    train->add_option("--log", ta.log_path, "training log CSV (default OUT.log.csv)");
    train->add_option("--manifest", ta.manifest_path, "manifest path (default OUT.manifest.json)");
    train->add_option("--subset", ta.subset, "train on the first N examples only");
    train->add_option("--epochs", ta.epochs_override, "override epoch count (convnet)");
    train->add_option("--steps", ta.steps_override, "override step count (linear)");
    train->add_option("--threads", ta.threads, "worker threads (results are thread-invariant)");

    EvalArgs aa;
    auto* attack = app.add_subcommand("attack", "run one attack over the test set");
    attack->add_option("--model", aa.model_path, "model file")->required();
    attack->add_option("--attack", aa.attack, "attack family")->required();
    attack->add_option("--data-dir", aa.data_dir, "dataset root");
    attack->add_option("--out", aa.out, "results CSV")->required();
    attack->add_option("--images", aa.images_path, "perturbation grid image path");
    attack->add_option("--eps", aa.eps, "perturbation size (fractions like 8/255 accepted)");
    attack->add_option("--ratio", aa.ratio, "pixel-swap fraction");
    attack->add_option("--gamma", aa.gamma, "saliency-attack feature budget");
    attack->add_option("--k", aa.k, "top-weight pixel budget");
    attack->add_option("--steps", aa.steps, "iterative attack steps");
    attack->add_option("--step-size", aa.step_size, "iterative attack step size");
    attack->add_option("--scale", aa.scale, "pre-clip gain for scaled-clipped-fgl2");
    attack->add_flag("--no-clip", aa.no_clip, "skip the [0,1] clip");
    attack->add_flag("--no-random-start", aa.no_random_start, "deterministic PGD start");
    attack->add_option("--n", aa.n, "evaluate the first N test examples (0 = all)");
    attack->add_option("--seed", aa.seed, "attack seed");
    attack->add_option("--threads", aa.threads, "worker threads");

    EvalArgs sa;
    auto* sweep = app.add_subcommand("sweep", "evaluate an attack over a parameter grid");
    sweep->add_option("--model", sa.model_path, "model file")->required();
    sweep->add_option("--attack", sa.attack, "attack family")->required();
    sweep->add_option("--grid", sa.grid, "start:stop:step, comma list, or one value")->required();
    sweep->add_flag("--stop-at-zero", sa.stop_at_zero, "stop once accuracy hits zero");
    sweep->add_option("--data-dir", sa.data_dir, "dataset root");
    sweep->add_option("--out", sa.out, "sweep CSV")->required();
    sweep->add_option("--steps", sa.steps, "PGD steps (default 20)");
    sweep->add_option("--step-size", sa.step_size, "PGD step size (default 2/255)");
    sweep->add_option("--scale", sa.scale, "pre-clip gain for scaled-clipped-fgl2");
    sweep->add_flag("--no-clip", sa.no_clip, "skip the [0,1] clip");
    sweep->add_flag("--no-random-start", sa.no_random_start, "deterministic PGD start");
    sweep->add_option("--n", sa.n, "evaluate the first N test examples (0 = all)");
    sweep->add_option("--seed", sa.seed, "attack seed");
    sweep->add_option("--threads", sa.threads, "worker threads");

    EvalArgs fa;
    auto* fool = app.add_subcommand("fool", "grow unrecognizable high-confidence inputs");
    fool->add_option("--model", fa.model_path, "model file")->required();
    fool->add_option("--mode", fa.mode, "single (images) or sweep (ASR curve)");
    fool->add_option("--target", fa.target, "single mode: one target class (-1 = all)");
    fool->add_option("--steps", fa.fool_steps, "ascent steps");
    fool->add_option("--step-size", fa.fool_step_size, "ascent step size");
    fool->add_option("--grid", fa.grid, "sweep mode eps grid");
    fool->add_option("--n", fa.n, "sweep mode noise samples per point (default 1000)");
    fool->add_option("--seed", fa.seed, "noise seed");
    fool->add_option("--out", fa.out, "output CSV")->required();
    fool->add_option("--images", fa.images_path, "image grid path (single mode)");

    ExportArgs ea;
    auto* exportw = app.add_subcommand("export-weights", "render weights as an image");
    exportw->add_option("--model", ea.model_path, "model file")->required();
    exportw->add_option("--out", ea.out, "PGM/PNG path")->required();
    exportw->add_option("--layer", ea.layer, "convnet layer: conv1 (default) or fc");

    auto* lr = app.add_subcommand("list-recipes", "print the named training recipes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train->parsed()) return cmd_train(ta);
        if (attack->parsed()) return cmd_attack(aa);
        if (sweep->parsed()) return cmd_sweep(sa);
        if (fool->parsed()) return cmd_fool(fa);
        if (exportw->parsed()) return cmd_export_weights(ea);
        if (lr->parsed()) {
            for (const auto& r : rl::recipes())
                std::printf("%-18s %s\n", r.name.c_str(), r.notes.c_str());
            return 0;
        }
    } catch (const rl::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 4;
    } catch (const rl::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const rl::ArgumentError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const rl::DimensionError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
