#include "robustlab/attacks.hpp"

#include <algorithm>
#include <numeric>

namespace robustlab {

const char* attack_family_name(AttackSpec::Family f) {
    switch (f) {
        case AttackSpec::FGSM: return "fgsm";
        case AttackSpec::FastGradL2: return "fast-grad-l2";
        case AttackSpec::ScaledClippedFGL2: return "scaled-clipped-fgl2";
        case AttackSpec::PGD: return "pgd";
        case AttackSpec::PixelSwap: return "pixel-swap";
        case AttackSpec::TopWeightPixel: return "top-weight-pixel";
        case AttackSpec::JSMA: return "jsma";
        case AttackSpec::Fooling: return "fooling";
    }
    return "?";
}

AttackSpec::Family attack_family_from_name(const std::string& name) {
    for (auto f : {AttackSpec::FGSM, AttackSpec::FastGradL2, AttackSpec::ScaledClippedFGL2,
                   AttackSpec::PGD, AttackSpec::PixelSwap, AttackSpec::TopWeightPixel,
                   AttackSpec::JSMA, AttackSpec::Fooling})
        if (name == attack_family_name(f)) return f;
    throw ArgumentError("unknown attack family \"" + name +
                        "\"; known: fgsm, fast-grad-l2, scaled-clipped-fgl2, pgd, pixel-swap, "
                        "top-weight-pixel, jsma, fooling");
}

namespace detail {

AttackResult finish_result(const Tensor& x, Tensor x_adv, bool success) {
    AttackResult r;
    double sq = 0;
    int changed = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x_adv.data[i] - x.data[i];
        sq += d * d;
        if (x_adv.data[i] != x.data[i]) ++changed;
    }
    r.l2_distortion = x.size() ? std::sqrt(sq / double(x.size())) : 0.0;
    r.features_changed = changed;
    r.success = success;
    r.x_adv = std::move(x_adv);
    return r;
}

}  // namespace detail

namespace {

void clip01_inplace(Tensor& t) {
    for (auto& v : t.data) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace

// ---------------------------------------------------------------------------
// Binary linear attacks

bool linear_misclassified(const LinearLogistic& m, const Tensor& x, int y) {
    const double logit = predict(m, x);
    const int pred = logit >= 0 ? +1 : -1;
    return pred != y;
}

AttackResult fgsm(const LinearLogistic& m, const Tensor& x, int y, double eps, bool clip) {
    if (eps < 0) throw ArgumentError("fgsm: eps must be >= 0");
    Tensor x_adv = x;
    // sign of the loss input-gradient, written analytically: the sigmoid
    // factor is positive, so sign(grad) = -y*sign(w) even where the sigmoid
    // would underflow.
    for (std::size_t i = 0; i < x.size(); ++i)
        x_adv.data[i] += eps * (-double(y) * sign0(m.w.data[i]));
    if (clip) clip01_inplace(x_adv);
    const bool success = linear_misclassified(m, x_adv, y);
    return detail::finish_result(x, std::move(x_adv), success);
}

AttackResult fast_grad_l2(const LinearLogistic& m, const Tensor& x, int y, double eps, bool clip) {
    if (eps < 0) throw ArgumentError("fast_grad_l2: eps must be >= 0");
    const double nw = l2_norm(m.w);
    if (nw == 0) {
        AttackResult r = detail::finish_result(x, x, linear_misclassified(m, x, y));
        r.zero_gradient = true;
        return r;
    }
    Tensor x_adv = x;
    for (std::size_t i = 0; i < x.size(); ++i)
        x_adv.data[i] += eps * (-double(y) * m.w.data[i] / nw);
    if (clip) clip01_inplace(x_adv);
    const bool success = linear_misclassified(m, x_adv, y);
    return detail::finish_result(x, std::move(x_adv), success);
}

AttackResult scaled_clipped_fgl2(const LinearLogistic& m, const Tensor& x, int y, double eps,
                                 double scale) {
    if (eps < 0) throw ArgumentError("scaled_clipped_fgl2: eps must be >= 0");
    const double nw = l2_norm(m.w);
    if (nw == 0) {
        AttackResult r = detail::finish_result(x, x, linear_misclassified(m, x, y));
        r.zero_gradient = true;
        return r;
    }
    Tensor x_adv = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double ghat = -double(y) * m.w.data[i] / nw;
        x_adv.data[i] += std::clamp(scale * ghat, -eps, eps);
    }
    clip01_inplace(x_adv);
    const bool success = linear_misclassified(m, x_adv, y);
    return detail::finish_result(x, std::move(x_adv), success);
}

AttackResult pgd(const LinearLogistic& m, const Tensor& x, int y, double eps, int steps,
                 double step_size, bool random_start, std::uint64_t seed) {
    if (steps < 1) throw ArgumentError("pgd: steps must be >= 1");
    Rng rng(seed);
    Tensor cur = x;
    if (random_start)
        for (auto& v : cur.data) v += rng.uniform(-eps, eps);
    auto project = [&](Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i)
            t.data[i] = std::clamp(t.data[i], std::max(x.data[i] - eps, 0.0),
                                   std::min(x.data[i] + eps, 1.0));
    };
    project(cur);
    for (int s = 0; s < steps; ++s) {
        for (std::size_t i = 0; i < cur.size(); ++i)
            cur.data[i] += step_size * (-double(y) * sign0(m.w.data[i]));
        project(cur);
    }
    const bool success = linear_misclassified(m, cur, y);
    return detail::finish_result(x, std::move(cur), success);
}

AttackResult top_weight_pixel(const LinearLogistic& m, const Tensor& x, int y, int k) {
    const std::size_t d = x.size();
    if (k < 0 || std::size_t(k) > d)
        throw ArgumentError("top_weight_pixel: k must be in [0, d], got " + std::to_string(k));
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return m.w.data[a] < m.w.data[b]; });
    Tensor x_adv = x;
    if (y == +1) {
        const std::size_t neg = std::size_t((k + 1) / 2), pos = std::size_t(k / 2);
        for (std::size_t i = 0; i < neg; ++i) x_adv.data[order[i]] = 1.0;
        for (std::size_t i = 0; i < pos; ++i) x_adv.data[order[d - 1 - i]] = 1.0;
    } else {
        // weight*y is most negative at the largest weights
        for (std::size_t i = 0; i < std::size_t(k); ++i) x_adv.data[order[d - 1 - i]] = 1.0;
    }
    const bool success = linear_misclassified(m, x_adv, y);
    return detail::finish_result(x, std::move(x_adv), success);
}

AttackResult pixel_swap(const Tensor& x, double ratio, std::uint64_t seed) {
    if (ratio < 0 || ratio > 1) throw ArgumentError("pixel_swap: ratio must be in [0,1]");
    const std::size_t d = x.size();
    const std::size_t k = std::size_t(std::lround(ratio * double(d)));
    Rng rng(seed);
    std::vector<std::size_t> idx(d);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i)
        std::swap(idx[i], idx[i + rng.index(d - i)]);
    std::vector<double> values(k);
    for (std::size_t i = 0; i < k; ++i) values[i] = x.data[idx[i]];
    rng.shuffle(values);
    Tensor x_adv = x;
    for (std::size_t i = 0; i < k; ++i) x_adv.data[idx[i]] = values[i];
    return detail::finish_result(x, std::move(x_adv), false);
}

// ---------------------------------------------------------------------------
// Multiclass hooks

namespace {

template <typename T>
std::vector<double> softmax_of(const TensorT<T>& logits) {
    double maxv = -std::numeric_limits<double>::infinity();
    for (T v : logits.data) maxv = std::max(maxv, double(v));
    std::vector<double> p(logits.size());
    double z = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(double(logits.data[i]) - maxv);
        z += p[i];
    }
    for (auto& v : p) v /= z;
    return p;
}

template <typename T>
MulticlassHooks cnn_hooks(const ConvNetT<T>& m) {
    MulticlassHooks h;
    h.num_classes = 10;
    h.input_shape = {32, 32, 3};
    h.probs = [&m](const Tensor& x) {
        return softmax_of(predict(m, tensor_cast<T>(x)));
    };
    h.xent_input_grad = [&m](const Tensor& x, int target) {
        CnnForward<T> f = cnn_forward(m, tensor_cast<T>(x));
        const std::vector<double> p = softmax_of(f.logits);
        TensorT<T> seed({10});
        for (std::size_t i = 0; i < 10; ++i)
            seed.data[i] = static_cast<T>(p[i] - (int(i) == target ? 1.0 : 0.0));
        return tensor_cast<double>(
            cnn_backward(m, f, seed, /*want_params=*/false, /*want_input=*/true).input_grad);
    };
    h.jacobian = [&m](const Tensor& x, int target, Tensor& dz_target, Tensor& dz_sum) {
        CnnForward<T> f = cnn_forward(m, tensor_cast<T>(x));
        TensorT<T> seed_t({10});
        seed_t.data[std::size_t(target)] = T(1);
        dz_target = tensor_cast<double>(
            cnn_backward(m, f, seed_t, false, true).input_grad);
        TensorT<T> seed_all({10});
        for (auto& v : seed_all.data) v = T(1);
        dz_sum = tensor_cast<double>(
            cnn_backward(m, f, seed_all, false, true).input_grad);
    };
    return h;
}

}  // namespace

MulticlassHooks multiclass_hooks(const ConvNetT<float>& m) { return cnn_hooks(m); }
MulticlassHooks multiclass_hooks(const ConvNetT<double>& m) { return cnn_hooks(m); }

MulticlassHooks multiclass_hooks(const LinearLogistic& m) {
    MulticlassHooks h;
    h.num_classes = 2;
    h.input_shape = {m.w.size()};
    h.probs = [&m](const Tensor& x) {
        const double z = predict(m, x);
        // softmax over (z, -z)
        const double p0 = sigmoid_of_neg(-2.0 * z);
        return std::vector<double>{p0, 1.0 - p0};
    };
    h.xent_input_grad = [&m](const Tensor& x, int target) {
        const double z = predict(m, x);
        const double p0 = sigmoid_of_neg(-2.0 * z);
        // d(-log p_t)/dx = ((p0 - p1) - (t==0 ? 1 : -1)) * w
        const double c = (2.0 * p0 - 1.0) - (target == 0 ? 1.0 : -1.0);
        Tensor g;
        g.shape = {m.w.size()};
        g.data.resize(m.w.size());
        for (std::size_t i = 0; i < m.w.size(); ++i) g.data[i] = c * m.w.data[i];
        return g;
    };
    h.jacobian = [&m](const Tensor&, int target, Tensor& dz_target, Tensor& dz_sum) {
        const double s = target == 0 ? 1.0 : -1.0;
        dz_target.shape = {m.w.size()};
        dz_target.data.resize(m.w.size());
        for (std::size_t i = 0; i < m.w.size(); ++i) dz_target.data[i] = s * m.w.data[i];
        dz_sum.shape = {m.w.size()};
        dz_sum.data.assign(m.w.size(), 0.0);  // z and -z cancel
    };
    return h;
}

// ---------------------------------------------------------------------------
// Multiclass attacks

namespace {

int argmax_of(const std::vector<double>& p) {
    return int(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace

AttackResult fgsm_multi(const MulticlassHooks& h, const Tensor& x, int label, double eps,
                        bool clip) {
    if (eps < 0) throw ArgumentError("fgsm: eps must be >= 0");
    const Tensor g = h.xent_input_grad(x, label);
    Tensor x_adv = x;
    for (std::size_t i = 0; i < x.size(); ++i) x_adv.data[i] += eps * sign0(g.data[i]);
    if (clip) clip01_inplace(x_adv);
    const bool success = argmax_of(h.probs(x_adv)) != label;
    return detail::finish_result(x, std::move(x_adv), success);
}

AttackResult fast_grad_l2_multi(const MulticlassHooks& h, const Tensor& x, int label, double eps,
                                bool clip) {
    if (eps < 0) throw ArgumentError("fast_grad_l2: eps must be >= 0");
    const Tensor g = h.xent_input_grad(x, label);
    const double norm = l2_norm(g);
    if (norm == 0) {
        AttackResult r = detail::finish_result(x, x, argmax_of(h.probs(x)) != label);
        r.zero_gradient = true;
        return r;
    }
    Tensor x_adv = x;
    for (std::size_t i = 0; i < x.size(); ++i) x_adv.data[i] += eps * g.data[i] / norm;
    if (clip) clip01_inplace(x_adv);
    const bool success = argmax_of(h.probs(x_adv)) != label;
    return detail::finish_result(x, std::move(x_adv), success);
}

AttackResult pgd_multi(const MulticlassHooks& h, const Tensor& x, int label, double eps, int steps,
                       double step_size, bool random_start, std::uint64_t seed) {
    if (steps < 1) throw ArgumentError("pgd: steps must be >= 1");
    Rng rng(seed);
    Tensor cur = x;
    if (random_start)
        for (auto& v : cur.data) v += rng.uniform(-eps, eps);
    auto project = [&](Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i)
            t.data[i] = std::clamp(t.data[i], std::max(x.data[i] - eps, 0.0),
                                   std::min(x.data[i] + eps, 1.0));
    };
    project(cur);
    for (int s = 0; s < steps; ++s) {
        const Tensor g = h.xent_input_grad(cur, label);
        for (std::size_t i = 0; i < cur.size(); ++i) cur.data[i] += step_size * sign0(g.data[i]);
        project(cur);
    }
    const bool success = argmax_of(h.probs(cur)) != label;
    return detail::finish_result(x, std::move(cur), success);
}

namespace {

struct GreedyState {
    Tensor x;
    int changed = 0;
};

// One saliency-pair pick: the (i,j) over the top_b candidate singles with
// target gradient sum positive, other-logit gradient sum negative, and the
// largest product magnitude. Returns false when no pair qualifies.
bool pick_and_apply_pair(const MulticlassHooks& h, int target, int top_b, GreedyState& st) {
    Tensor dzt, dzs;
    h.jacobian(st.x, target, dzt, dzs);
    std::vector<std::size_t> eligible;
    eligible.reserve(st.x.size());
    for (std::size_t i = 0; i < st.x.size(); ++i)
        if (st.x.data[i] < 1.0) eligible.push_back(i);
    if (eligible.size() < 2) return false;
    std::stable_sort(eligible.begin(), eligible.end(),
                     [&](std::size_t a, std::size_t b) { return dzt.data[a] > dzt.data[b]; });
    const std::size_t b = std::min<std::size_t>(std::size_t(top_b), eligible.size());

    double best = 0;
    std::size_t bi = 0, bj = 0;
    bool found = false;
    for (std::size_t ai = 0; ai < b; ++ai) {
        for (std::size_t aj = ai + 1; aj < b; ++aj) {
            const std::size_t i = eligible[ai], j = eligible[aj];
            const double alpha = dzt.data[i] + dzt.data[j];
            const double beta = (dzs.data[i] - dzt.data[i]) + (dzs.data[j] - dzt.data[j]);
            if (!(alpha > 0) || !(beta < 0)) continue;
            const double score = -alpha * beta;
            if (!found || score > best) {
                best = score;
                bi = i;
                bj = j;
                found = true;
            }
        }
    }
    if (!found) return false;
    st.x.data[bi] = 1.0;
    st.x.data[bj] = 1.0;
    st.changed += 2;
    return true;
}

}  // namespace

AttackResult jsma_multi(const MulticlassHooks& h, const Tensor& x, int true_label, int target,
                        double gamma, int top_b) {
    if (target == true_label) throw ArgumentError("jsma: target must differ from the true label");
    if (gamma < 0 || gamma > 1) throw ArgumentError("jsma: gamma must be in [0,1]");
    const int budget = int(std::lround(gamma * double(x.size())));
    GreedyState st{x, 0};
    bool success = argmax_of(h.probs(st.x)) == target;
    while (!success) {
        if (st.changed + 2 > budget) break;
        if (!pick_and_apply_pair(h, target, top_b, st)) break;
        success = argmax_of(h.probs(st.x)) == target;
    }
    AttackResult r = detail::finish_result(x, std::move(st.x), success);
    r.features_changed = st.changed;
    return r;
}

JsmaTrajectory jsma_trajectory(const MulticlassHooks& h, const Tensor& x, int target,
                               int max_changed, int top_b) {
    JsmaTrajectory tr;
    GreedyState st{x, 0};
    if (argmax_of(h.probs(st.x)) == target) {
        tr.success_at_start = true;
        tr.success_at_changed = 0;
        return tr;
    }
    while (st.changed + 2 <= max_changed) {
        if (!pick_and_apply_pair(h, target, top_b, st)) break;
        tr.changed_after_pair.push_back(st.changed);
        if (argmax_of(h.probs(st.x)) == target) {
            tr.success_at_changed = st.changed;
            break;
        }
    }
    return tr;
}

FoolingRun fooling_ascent(const MulticlassHooks& h, int target, int steps, double step_size,
                          std::uint64_t seed) {
    if (target < 0 || std::size_t(target) >= h.num_classes)
        throw ArgumentError("fooling: target class out of range");
    if (steps < 0) throw ArgumentError("fooling: steps must be >= 0");
    Rng rng(seed);
    FoolingRun run;
    run.image = Tensor(h.input_shape);
    for (auto& v : run.image.data) v = 0.5 + rng.uniform() * 0.1;
    run.prob_trace.push_back(h.probs(run.image)[std::size_t(target)]);
    for (int s = 0; s < steps; ++s) {
        const Tensor g = h.xent_input_grad(run.image, target);
        for (std::size_t i = 0; i < run.image.size(); ++i)
            run.image.data[i] = std::clamp(run.image.data[i] - step_size * g.data[i], 0.0, 1.0);
        run.prob_trace.push_back(h.probs(run.image)[std::size_t(target)]);
    }
    return run;
}

std::vector<FoolingSweepPoint> fooling_asr_sweep(const MulticlassHooks& h,
                                                 const std::vector<double>& eps_grid,
                                                 std::size_t n, std::uint64_t seed) {
    std::vector<FoolingSweepPoint> curve;
    curve.reserve(eps_grid.size());
    const std::size_t d = TensorT<double>::count(h.input_shape);
    for (double eps : eps_grid) {
        std::size_t hits = 0;
        double margin_sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            Rng rng(derive_seed(seed, i));
            Tensor x(h.input_shape);
            for (std::size_t j = 0; j < d; ++j) x.data[j] = rng.uniform();
            for (int target = 0; target < int(h.num_classes); ++target) {
                Tensor xa = x;
                if (eps > 0) {
                    const Tensor g = h.xent_input_grad(x, target);
                    for (std::size_t j = 0; j < d; ++j)
                        xa.data[j] = std::clamp(x.data[j] - eps * sign0(g.data[j]), 0.0, 1.0);
                }
                std::vector<double> p = h.probs(xa);
                if (argmax_of(p) == target) ++hits;
                std::nth_element(p.begin(), p.begin() + 1, p.end(), std::greater<double>());
                margin_sum += p[0] >= p[1] ? p[0] - p[1] : p[1] - p[0];
            }
        }
        const double denom = double(n) * double(h.num_classes);
        curve.push_back({eps, double(hits) / denom, margin_sum / denom});
    }
    return curve;
}

}  // namespace robustlab
