#include "robustlab/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "robustlab/attacks.hpp"
#include "robustlab/errors.hpp"
#include "robustlab/parallel.hpp"
#include "robustlab/rng.hpp"

namespace robustlab {

void TrainConfig::validate() const {
    if (!(lr > 0)) throw ArgumentError("learning rate must be positive");
    if (batch_size < 1) throw ArgumentError("batch_size must be at least 1");
    if ((total_steps > 0) == (epochs > 0))
        throw ArgumentError("set exactly one of total_steps (linear) or epochs (convnet)");
    if (total_steps < 0 || epochs < 0) throw ArgumentError("training duration must be positive");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
        throw ArgumentError("Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0)) throw ArgumentError("Adam epsilon must be positive");
    if (decay.lambda < 0) throw ArgumentError("decay lambda must be non-negative");
    if (decay.norm == DecayNorm::None && decay.lambda != 0)
        throw ArgumentError("decay lambda set but decay norm is none");
    if (loss.smoothing < 0 || loss.smoothing >= 1)
        throw ArgumentError("label smoothing must lie in [0, 1)");
    if (loss.smoothing > 0 && loss.kind != LossFn::Kind::SoftmaxXent)
        throw ArgumentError("label smoothing applies to the softmax loss only");
    if (invariant_check_stride < 0) throw ArgumentError("invariant_check_stride must be >= 0");
    if (adv) {
        if (adv->eps < 0) throw ArgumentError("adversarial eps must be non-negative");
        if (adv->delay_epochs < 0) throw ArgumentError("delay_epochs must be non-negative");
        if (adv->method == AdvMethod::PGD) {
            if (adv->pgd_steps < 1) throw ArgumentError("PGD needs at least one step");
            if (!(adv->pgd_step_size > 0)) throw ArgumentError("PGD step size must be positive");
        }
    }
}

double decay_gradient_coeff_l2(const DecaySpec& d, double joint_l2_norm) {
    if (d.norm != DecayNorm::L2 || d.lambda == 0) return 0.0;
    if (d.squared_l2) return 2.0 * d.lambda;
    if (joint_l2_norm == 0.0) return 0.0;  // the norm's gradient at 0 is taken as 0
    return d.lambda / joint_l2_norm;
}

namespace {

// Shared SGD/Adam update over a fixed set of parameter slots. Gradients
// arrive as doubles; weights update in double and cast back to the model's
// scalar type.
class ParamUpdater {
public:
    ParamUpdater(const TrainConfig& cfg, const std::vector<std::size_t>& slot_sizes) : cfg_(cfg) {
        if (cfg.optimizer == Optimizer::Adam) {
            for (std::size_t n : slot_sizes) {
                m_.emplace_back(n, 0.0);
                v_.emplace_back(n, 0.0);
            }
        }
    }

    void begin_step() {
        ++t_;
        if (cfg_.optimizer == Optimizer::Adam) {
            bc1_ = 1.0 - std::pow(cfg_.beta1, double(t_));
            bc2_ = 1.0 - std::pow(cfg_.beta2, double(t_));
        }
    }

    template <typename T>
    void apply(std::size_t slot, const std::vector<double>& g, T* w) {
        if (cfg_.optimizer == Optimizer::SGD) {
            for (std::size_t i = 0; i < g.size(); ++i)
                w[i] = static_cast<T>(double(w[i]) - cfg_.lr * g[i]);
            return;
        }
        auto& m = m_[slot];
        auto& v = v_[slot];
        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1_;
            const double vhat = v[i] / bc2_;
            w[i] = static_cast<T>(double(w[i]) - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.adam_eps));
        }
    }

private:
    const TrainConfig& cfg_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
    double bc1_ = 1.0, bc2_ = 1.0;
};

double fmt_field(const char* s, const std::string& line) {
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw DataError("unparseable training-log field in line: " + line);
    }
}

}  // namespace

std::string training_log_to_csv(const TrainingLog& log, const std::string& manifest_digest) {
    std::string out = "# manifest_digest=" + manifest_digest + "\n";
    out += "epoch,loss,clean_acc,l1_norm,l2_norm\n";
    char buf[256];
    for (const auto& r : log.rows) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.loss,
                      r.clean_acc, r.l1_norm, r.l2_norm);
        out += buf;
    }
    return out;
}

TrainingLog training_log_from_csv(const std::string& csv) {
    TrainingLog log;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("epoch,", 0) == 0) continue;
        std::array<std::string, 5> fields;
        std::size_t pos = 0;
        for (int f = 0; f < 5; ++f) {
            const std::size_t comma = line.find(',', pos);
            if (f < 4 && comma == std::string::npos)
                throw DataError("training-log row needs 5 fields: " + line);
            fields[std::size_t(f)] = line.substr(pos, comma - pos);
            pos = comma + 1;
        }
        TrainingLog::Row r;
        r.epoch = int(fmt_field(fields[0].c_str(), line));
        r.loss = fmt_field(fields[1].c_str(), line);
        r.clean_acc = fmt_field(fields[2].c_str(), line);
        r.l1_norm = fmt_field(fields[3].c_str(), line);
        r.l2_norm = fmt_field(fields[4].c_str(), line);
        log.rows.push_back(r);
    }
    return log;
}

// ---------------------------------------------------------------------------
// Linear model.

LinearTrainResult train(LinearLogistic init, const BinaryView& data, const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.total_steps <= 0)
        throw ArgumentError("linear training is step-counted; set total_steps");
    if (cfg.loss.kind != LossFn::Kind::SoftplusBinary)
        throw ArgumentError("linear training uses the softplus binary loss");
    const std::size_t n = data.size();
    if (n == 0) throw ArgumentError("training data is empty");
    const std::size_t d = data.feature_count();
    if (init.w.size() != d)
        throw DimensionError("initial weights have " + std::to_string(init.w.size()) +
                             " entries for " + std::to_string(d) + " features");

    LinearLogistic model = std::move(init);
    ParamUpdater upd(cfg, {d, 1});
    TrainingLog log;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    const double* X = data.images.data.data();
    double* w = model.w.data.data();
    std::vector<double> xbuf(d);  // adversarial example under construction
    std::vector<double> dir(d);   // per-step attack direction
    std::vector<double> grad_w(d);
    std::vector<double> grad_b(1);

    long step = 0;
    int epoch = 0;
    while (step < cfg.total_steps) {
        Rng shuffle_rng(derive_seed(cfg.seed, std::uint64_t(epoch)));
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        long epoch_batches = 0;

        for (std::size_t start = 0; start < n && step < cfg.total_steps;
             start += std::size_t(cfg.batch_size)) {
            const std::size_t bn = std::min<std::size_t>(std::size_t(cfg.batch_size), n - start);
            const bool adv_on = cfg.adv && epoch >= cfg.adv->delay_epochs && cfg.adv->eps > 0;
            double eps = adv_on ? cfg.adv->eps : 0.0;
            if (adv_on && cfg.adv->eps_linear_decay)
                eps *= 1.0 - double(step) / double(cfg.total_steps);

            if (adv_on) {
                if (cfg.adv->method == AdvMethod::FGSM) {
                    for (std::size_t j = 0; j < d; ++j) dir[j] = sign0(w[j]);
                } else if (cfg.adv->method == AdvMethod::FastGradL2) {
                    const double nw = l2_norm(model.w);
                    if (nw > 0)
                        for (std::size_t j = 0; j < d; ++j) dir[j] = w[j] / nw;
                    else
                        std::fill(dir.begin(), dir.end(), 0.0);
                }
            }

            // The in-loop exactness check: under FGSM replacement with the
            // true label, the batch loss must equal the clean batch loss at
            // margins shifted down by eps*||w||1.
            const bool check_now = adv_on && cfg.adv->method == AdvMethod::FGSM &&
                                   cfg.adv->label_source == LabelSource::TrueLabel &&
                                   cfg.invariant_check_stride > 0 &&
                                   step % cfg.invariant_check_stride == 0;
            const double wl1 = check_now ? l1_norm(model.w) : 0.0;

            std::fill(grad_w.begin(), grad_w.end(), 0.0);
            grad_b[0] = 0.0;
            double batch_loss = 0.0;
            double shifted_clean_loss = 0.0;

            for (std::size_t bi = 0; bi < bn; ++bi) {
                const std::size_t idx = order[start + bi];
                const double* x = X + idx * d;
                const int y = data.y[idx];
                const double* xe = x;
                if (adv_on) {
                    int steer = y;
                    if (cfg.adv->label_source == LabelSource::ModelPrediction) {
                        double z = model.b;
                        for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
                        steer = z >= 0 ? 1 : -1;
                    }
                    if (cfg.adv->method == AdvMethod::PGD) {
                        Tensor xt({d});
                        std::copy(x, x + d, xt.data.begin());
                        AttackResult r =
                            pgd(model, xt, steer, eps, cfg.adv->pgd_steps, cfg.adv->pgd_step_size,
                                /*random_start=*/true,
                                derive_seed(derive_seed(cfg.seed, 0x50474400ull + std::uint64_t(step)),
                                            bi));
                        std::copy(r.x_adv.data.begin(), r.x_adv.data.end(), xbuf.begin());
                    } else {
                        // One signed step along the loss gradient; left
                        // unclipped so the margin-translation identity holds
                        // exactly.
                        const double scale = eps * double(steer);
                        for (std::size_t j = 0; j < d; ++j) xbuf[j] = x[j] - scale * dir[j];
                    }
                    xe = xbuf.data();
                }

                double margin = model.b;
                for (std::size_t j = 0; j < d; ++j) margin += w[j] * xe[j];
                margin *= double(y);
                batch_loss += softplus_of_neg(margin);
                const double c = -double(y) * sigmoid_of_neg(margin);
                for (std::size_t j = 0; j < d; ++j) grad_w[j] += c * xe[j];
                grad_b[0] += c;

                if (check_now) {
                    double clean_margin = model.b;
                    for (std::size_t j = 0; j < d; ++j) clean_margin += w[j] * x[j];
                    shifted_clean_loss += softplus_of_neg(double(y) * clean_margin - eps * wl1);
                }
            }

            const double inv_bn = 1.0 / double(bn);
            batch_loss *= inv_bn;
            if (!std::isfinite(batch_loss))
                throw NumericalError("training loss became non-finite at step " +
                                     std::to_string(step) + " (epoch " + std::to_string(epoch + 1) +
                                     ")");
            if (check_now) {
                shifted_clean_loss *= inv_bn;
                const double tol = 1e-9 * std::max(1.0, std::abs(shifted_clean_loss));
                if (std::abs(batch_loss - shifted_clean_loss) > tol)
                    throw NumericalError(
                        "adversarial batch loss " + std::to_string(batch_loss) +
                        " drifted from the margin-shifted clean loss " +
                        std::to_string(shifted_clean_loss) + " at step " + std::to_string(step));
            }

            for (std::size_t j = 0; j < d; ++j) grad_w[j] *= inv_bn;
            grad_b[0] *= inv_bn;

            double penalty = 0.0;
            if (cfg.decay.norm == DecayNorm::L1) {
                penalty = cfg.decay.lambda * l1_norm(model.w);
                for (std::size_t j = 0; j < d; ++j)
                    grad_w[j] += cfg.decay.lambda * sign0(w[j]);
            } else if (cfg.decay.norm == DecayNorm::L2) {
                const double nw = l2_norm(model.w);
                penalty = cfg.decay.squared_l2 ? cfg.decay.lambda * nw * nw : cfg.decay.lambda * nw;
                const double coeff = decay_gradient_coeff_l2(cfg.decay, nw);
                if (coeff != 0.0)
                    for (std::size_t j = 0; j < d; ++j) grad_w[j] += coeff * w[j];
            }

            epoch_loss += batch_loss + penalty;
            ++epoch_batches;

            upd.begin_step();
            upd.apply(0, grad_w, w);
            upd.apply(1, grad_b, &model.b);
            ++step;
        }

        long correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = X + i * d;
            double z = model.b;
            for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
            const int pred = z >= 0 ? 1 : -1;
            if (pred == data.y[i]) ++correct;
        }

        TrainingLog::Row row;
        row.epoch = epoch + 1;
        row.loss = epoch_loss / double(std::max<long>(1, epoch_batches));
        row.clean_acc = double(correct) / double(n);
        row.l1_norm = l1_norm(model.w);
        row.l2_norm = l2_norm(model.w);
        log.rows.push_back(row);
        ++epoch;
    }

    return {std::move(model), std::move(log)};
}

// ---------------------------------------------------------------------------
// ConvNet.

namespace {

constexpr std::size_t kChunk = 16;  // examples per accumulation chunk

template <typename T>
std::array<TensorT<T>*, 4> tensor_slots(ConvNetT<T>& m) {
    return {&m.conv1, &m.conv2, &m.conv3, &m.fc};
}

template <typename T>
std::array<const TensorT<T>*, 4> tensor_slots(const ConvNetT<T>& m) {
    return {&m.conv1, &m.conv2, &m.conv3, &m.fc};
}

struct ChunkAccum {
    std::array<std::vector<double>, 4> grads;
    double loss = 0.0;

    void reset(const std::array<std::size_t, 4>& sizes) {
        for (std::size_t k = 0; k < 4; ++k) grads[k].assign(sizes[k], 0.0);
        loss = 0.0;
    }
};

template <typename T>
int argmax_class(const TensorT<T>& logits) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.size(); ++j)
        if (logits.data[j] > logits.data[best]) best = j;
    return int(best);
}

template <typename T>
CnnTrainResult<T> train_cnn(ConvNetT<T> model, const LabeledDataset& data, const TrainConfig& cfg,
                            int threads) {
    cfg.validate();
    if (cfg.epochs <= 0) throw ArgumentError("convnet training is epoch-counted; set epochs");
    if (cfg.loss.kind != LossFn::Kind::SoftmaxXent)
        throw ArgumentError("convnet training uses the softmax cross-entropy loss");
    const std::size_t n = data.size();
    if (n == 0) throw ArgumentError("training data is empty");
    if (data.images.ndim() != 4 || data.images.dim(1) != 32 || data.images.dim(2) != 32 ||
        data.images.dim(3) != 3)
        throw DimensionError("convnet training expects [n,32,32,3] images");
    for (std::size_t i = 0; i < n; ++i)
        if (data.labels[i] < 0 || data.labels[i] > 9)
            throw DataError("label out of range at index " + std::to_string(i));
    if (threads < 1) threads = 1;

    auto slots = tensor_slots(model);
    std::array<std::size_t, 4> sizes{};
    std::vector<std::size_t> slot_sizes;
    for (std::size_t k = 0; k < 4; ++k) {
        sizes[k] = slots[k]->size();
        slot_sizes.push_back(sizes[k]);
    }

    ParamUpdater upd(cfg, slot_sizes);
    TrainingLog log;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    const std::size_t max_chunks = (std::size_t(cfg.batch_size) + kChunk - 1) / kChunk;
    std::vector<ChunkAccum> partials(max_chunks);
    std::array<std::vector<double>, 4> batch_grads;
    for (std::size_t k = 0; k < 4; ++k) batch_grads[k].assign(sizes[k], 0.0);

    const std::size_t eval_n = std::min<std::size_t>(2000, n);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, std::uint64_t(epoch)));
        shuffle_rng.shuffle(order);

        const bool adv_on = cfg.adv && epoch >= cfg.adv->delay_epochs && cfg.adv->eps > 0;
        double eps = adv_on ? cfg.adv->eps : 0.0;
        if (adv_on && cfg.adv->eps_linear_decay) eps *= 1.0 - double(epoch) / double(cfg.epochs);

        double epoch_loss = 0.0;
        long epoch_batches = 0;
        long step_in_epoch = 0;

        for (std::size_t start = 0; start < n; start += std::size_t(cfg.batch_size)) {
            const std::size_t bn = std::min<std::size_t>(std::size_t(cfg.batch_size), n - start);
            const std::size_t nchunks = (bn + kChunk - 1) / kChunk;

            parallel_chunks(nchunks, threads, [&](std::size_t c) {
                ChunkAccum& acc = partials[c];
                acc.reset(sizes);
                const std::size_t lo = c * kChunk;
                const std::size_t hi = std::min(lo + kChunk, bn);
                for (std::size_t bi = lo; bi < hi; ++bi) {
                    const std::size_t idx = order[start + bi];
                    Tensor x = data.example(idx);
                    const int label = data.labels[idx];
                    if (adv_on) {
                        int steer = label;
                        if (cfg.adv->label_source == LabelSource::ModelPrediction)
                            steer = argmax_class(predict(model, tensor_cast<T>(x)));
                        const std::uint64_t es =
                            derive_seed(derive_seed(cfg.seed, 0xad000000ull + std::uint64_t(epoch)),
                                        std::uint64_t(idx));
                        AttackResult r;
                        switch (cfg.adv->method) {
                            case AdvMethod::FGSM:
                                r = fgsm(model, x, steer, eps);
                                break;
                            case AdvMethod::FastGradL2:
                                r = fast_grad_l2(model, x, steer, eps);
                                break;
                            case AdvMethod::PGD:
                                r = pgd(model, x, steer, eps, cfg.adv->pgd_steps,
                                        cfg.adv->pgd_step_size, /*random_start=*/true, es);
                                break;
                        }
                        x = std::move(r.x_adv);
                    }
                    const TensorT<T> xt = tensor_cast<T>(x);
                    const TensorT<T> target =
                        one_hot_smoothed<T>(label, 10, cfg.loss.smoothing);
                    CnnLossGrads<T> lg =
                        cnn_loss_and_grads(model, xt, target, /*want_params=*/true,
                                           /*want_input=*/false);
                    acc.loss += lg.loss;
                    auto gslots = tensor_slots(lg.param_grads);
                    for (std::size_t k = 0; k < 4; ++k) {
                        const TensorT<T>& g = *gslots[k];
                        auto& dst = acc.grads[k];
                        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += double(g.data[i]);
                    }
                }
            });

            double batch_loss = 0.0;
            for (std::size_t k = 0; k < 4; ++k)
                std::fill(batch_grads[k].begin(), batch_grads[k].end(), 0.0);
            for (std::size_t c = 0; c < nchunks; ++c) {  // fixed reduction order
                batch_loss += partials[c].loss;
                for (std::size_t k = 0; k < 4; ++k) {
                    const auto& src = partials[c].grads[k];
                    auto& dst = batch_grads[k];
                    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
                }
            }

            const double inv_bn = 1.0 / double(bn);
            batch_loss *= inv_bn;
            if (!std::isfinite(batch_loss))
                throw NumericalError("training loss became non-finite at epoch " +
                                     std::to_string(epoch + 1) + ", step " +
                                     std::to_string(step_in_epoch));
            for (std::size_t k = 0; k < 4; ++k)
                for (auto& g : batch_grads[k]) g *= inv_bn;

            double penalty = 0.0;
            if (cfg.decay.norm != DecayNorm::None) {
                double l1 = 0.0, sq = 0.0;
                for (std::size_t k = 0; k < 4; ++k)
                    for (const T v : slots[k]->data) {
                        l1 += std::abs(double(v));
                        sq += double(v) * double(v);
                    }
                const double l2 = std::sqrt(sq);
                if (cfg.decay.norm == DecayNorm::L1) {
                    penalty = cfg.decay.lambda * l1;
                    for (std::size_t k = 0; k < 4; ++k)
                        for (std::size_t i = 0; i < sizes[k]; ++i)
                            batch_grads[k][i] += cfg.decay.lambda * sign0(double(slots[k]->data[i]));
                } else {
                    penalty =
                        cfg.decay.squared_l2 ? cfg.decay.lambda * sq : cfg.decay.lambda * l2;
                    const double coeff = decay_gradient_coeff_l2(cfg.decay, l2);
                    if (coeff != 0.0)
                        for (std::size_t k = 0; k < 4; ++k)
                            for (std::size_t i = 0; i < sizes[k]; ++i)
                                batch_grads[k][i] += coeff * double(slots[k]->data[i]);
                }
            }

            epoch_loss += batch_loss + penalty;
            ++epoch_batches;

            upd.begin_step();
            for (std::size_t k = 0; k < 4; ++k) upd.apply(k, batch_grads[k], slots[k]->data.data());
            ++step_in_epoch;
        }

        // Accuracy on a fixed subsample of the clean training inputs; integer
        // counts reduce the same way for any thread count.
        const std::size_t acc_chunks = (eval_n + 63) / 64;
        std::vector<long> chunk_correct(acc_chunks, 0);
        parallel_chunks(acc_chunks, threads, [&](std::size_t c) {
            const std::size_t lo = c * 64;
            const std::size_t hi = std::min(lo + 64, eval_n);
            long correct = 0;
            for (std::size_t i = lo; i < hi; ++i) {
                const TensorT<T> x = tensor_cast<T>(data.example(i));
                if (argmax_class(predict(model, x)) == data.labels[i]) ++correct;
            }
            chunk_correct[c] = correct;
        });
        long correct = 0;
        for (long cc : chunk_correct) correct += cc;

        double l1 = 0.0, sq = 0.0;
        for (std::size_t k = 0; k < 4; ++k)
            for (const T v : slots[k]->data) {
                l1 += std::abs(double(v));
                sq += double(v) * double(v);
            }

        TrainingLog::Row row;
        row.epoch = epoch + 1;
        row.loss = epoch_loss / double(std::max<long>(1, epoch_batches));
        row.clean_acc = double(correct) / double(eval_n);
        row.l1_norm = l1;
        row.l2_norm = std::sqrt(sq);
        log.rows.push_back(row);
    }

    return {std::move(model), std::move(log)};
}

}  // namespace

CnnTrainResult<float> train(ConvNetT<float> init, const LabeledDataset& data,
                            const TrainConfig& cfg, int threads) {
    return train_cnn(std::move(init), data, cfg, threads);
}

CnnTrainResult<double> train(ConvNetT<double> init, const LabeledDataset& data,
                             const TrainConfig& cfg, int threads) {
    return train_cnn(std::move(init), data, cfg, threads);
}

// ---------------------------------------------------------------------------
// Recipe registry.

namespace {

TrainConfig linear_base(long steps) {
    TrainConfig cfg;
    cfg.optimizer = Optimizer::Adam;
    cfg.lr = 1e-5;
    cfg.batch_size = 128;
    cfg.total_steps = steps;
    cfg.loss.kind = LossFn::Kind::SoftplusBinary;
    cfg.seed = 1;
    return cfg;
}

TrainConfig cnn_base() {
    TrainConfig cfg;
    cfg.optimizer = Optimizer::Adam;
    cfg.lr = 1e-3;
    cfg.batch_size = 128;
    cfg.epochs = 250;
    cfg.loss.kind = LossFn::Kind::SoftmaxXent;
    cfg.loss.smoothing = 0.1;
    cfg.seed = 1;
    return cfg;
}

AdvTrainSpec pgd_7_2_8() {
    AdvTrainSpec adv;
    adv.method = AdvMethod::PGD;
    adv.eps = 8.0 / 255.0;
    adv.pgd_steps = 7;
    adv.pgd_step_size = 2.0 / 255.0;
    adv.delay_epochs = 50;
    return adv;
}

std::vector<Recipe> build_recipes() {
    std::vector<Recipe> r;

    {
        Recipe x{"baseline-natural", Recipe::LinearKind, Recipe::Mnist37, false,
                 linear_base(50000), "3-vs-7 logistic regression, no decay, no adversary"};
        r.push_back(std::move(x));
    }
    {
        Recipe x{"expert-l2", Recipe::LinearKind, Recipe::Mnist37, true, linear_base(10000),
                 "class-mean init refined under an L2-norm penalty"};
        x.config.decay = {DecayNorm::L2, 0.05, false};
        r.push_back(std::move(x));
    }
    {
        Recipe x{"scratch-l2-3.25", Recipe::LinearKind, Recipe::Mnist37, false,
                 linear_base(50000), "from scratch with the L2-norm penalty at lambda 3.25"};
        x.config.decay = {DecayNorm::L2, 3.25, false};
        r.push_back(std::move(x));
    }
    {
        Recipe x{"scratch-l1-3.25", Recipe::LinearKind, Recipe::Mnist37, false,
                 linear_base(50000), "from scratch with the L1 penalty at lambda 3.25"};
        x.config.decay = {DecayNorm::L1, 3.25, false};
        r.push_back(std::move(x));
    }
    {
        Recipe x{"scratch-l1-32", Recipe::LinearKind, Recipe::Mnist37, false, linear_base(50000),
                 "heavy L1 penalty; trades clean accuracy for flat weights"};
        x.config.decay = {DecayNorm::L1, 32.0, false};
        r.push_back(std::move(x));
    }
    {
        Recipe x{"fgsm-train-0.25", Recipe::LinearKind, Recipe::Mnist37, false,
                 linear_base(50000), "every batch replaced by its one-sign-step counterpart"};
        AdvTrainSpec adv;
        adv.method = AdvMethod::FGSM;
        adv.eps = 0.25;
        x.config.adv = adv;
        r.push_back(std::move(x));
    }
    {
        Recipe x{"fgl2-train-0.25", Recipe::LinearKind, Recipe::Mnist37, false,
                 linear_base(50000), "gradient-direction adversary of L2 length 0.25"};
        AdvTrainSpec adv;
        adv.method = AdvMethod::FastGradL2;
        adv.eps = 0.25;
        x.config.adv = adv;
        r.push_back(std::move(x));
    }
    {
        Recipe x{"fgl2-train-0.5", Recipe::LinearKind, Recipe::Mnist37, false, linear_base(50000),
                 "over-strong L2 adversary; expected not to converge"};
        AdvTrainSpec adv;
        adv.method = AdvMethod::FastGradL2;
        adv.eps = 0.5;
        x.config.adv = adv;
        r.push_back(std::move(x));
    }
    {
        Recipe x{"cnn", Recipe::ConvNetKind, Recipe::Cifar10, false, cnn_base(),
                 "plain CIFAR-10 convnet"};
        r.push_back(std::move(x));
    }
    {
        Recipe x{"cnn-l2", Recipe::ConvNetKind, Recipe::Cifar10, false, cnn_base(),
                 "convnet with the L2-norm penalty at lambda 1e-3"};
        x.config.decay = {DecayNorm::L2, 1e-3, false};
        r.push_back(std::move(x));
    }
    {
        Recipe x{"cnn-pgd", Recipe::ConvNetKind, Recipe::Cifar10, false, cnn_base(),
                 "PGD(7, 2/255, 8/255) batches after a 50-epoch delay"};
        x.config.adv = pgd_7_2_8();
        r.push_back(std::move(x));
    }
    {
        Recipe x{"cnn-l2-pgd", Recipe::ConvNetKind, Recipe::Cifar10, false, cnn_base(),
                 "delayed PGD batches plus the L2-norm penalty"};
        x.config.decay = {DecayNorm::L2, 1e-3, false};
        x.config.adv = pgd_7_2_8();
        r.push_back(std::move(x));
    }
    return r;
}

}  // namespace

const std::vector<Recipe>& recipes() {
    static const std::vector<Recipe> r = build_recipes();
    return r;
}

std::string recipe_names_joined() {
    std::string out;
    for (const auto& r : recipes()) {
        if (!out.empty()) out += ", ";
        out += r.name;
    }
    return out;
}

const Recipe& find_recipe(const std::string& name) {
    for (const auto& r : recipes())
        if (r.name == name) return r;
    throw ArgumentError("unknown recipe '" + name + "'; known recipes: " + recipe_names_joined());
}

LinearLogistic linear_init_for(const Recipe& r, const BinaryView& data) {
    if (r.model != Recipe::LinearKind)
        throw ArgumentError("recipe '" + r.name + "' does not train the linear model");
    if (r.expert_init) return expert_init(data);
    LinearLogistic m;
    m.w = Tensor({data.feature_count()});
    m.b = 0.0;
    return m;
}

}  // namespace robustlab
