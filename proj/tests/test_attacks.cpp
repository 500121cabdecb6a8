#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "robustlab/attacks.hpp"
#include "robustlab/errors.hpp"
#include "robustlab/models.hpp"
#include "robustlab/rng.hpp"
#include "robustlab/tensor.hpp"
#include "testutil.hpp"

namespace rl = robustlab;
using rl::Tensor;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, rl::Rng& rng, double lo = 0.0,
                     double hi = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

rl::LinearLogistic random_linear(std::size_t d, rl::Rng& rng) {
    rl::LinearLogistic m;
    m.w = Tensor({d});
    for (auto& v : m.w.data) v = rng.uniform(-1.0, 1.0);
    m.b = rng.uniform(-0.3, 0.3);
    return m;
}

double margin_loss(const rl::LinearLogistic& m, const Tensor& x, int y) {
    return rl::softplus_of_neg(double(y) * rl::predict(m, x));
}

int argmax_of(const std::vector<double>& p) {
    return int(std::max_element(p.begin(), p.end()) - p.begin());
}

// Plain multiclass linear softmax (logits = W x), used to drive the greedy
// saliency attack through hand-built hooks whose math is transparent.
struct FlatSoftmax {
    std::size_t classes, d;
    std::vector<double> W;  // [classes][d]

    std::vector<double> logits(const Tensor& x) const {
        std::vector<double> z(classes, 0.0);
        for (std::size_t c = 0; c < classes; ++c)
            for (std::size_t j = 0; j < d; ++j) z[c] += W[c * d + j] * x.data[j];
        return z;
    }
};

std::vector<double> flat_probs(const FlatSoftmax& m, const Tensor& x) {
    auto z = m.logits(x);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : z) v /= sum;
    return z;
}

rl::MulticlassHooks hooks_of(const FlatSoftmax& m) {
    rl::MulticlassHooks h;
    h.num_classes = m.classes;
    h.input_shape = {m.d};
    h.probs = [&m](const Tensor& x) { return flat_probs(m, x); };
    h.xent_input_grad = [&m](const Tensor& x, int target) {
        const auto p = flat_probs(m, x);
        Tensor g({m.d});
        for (std::size_t c = 0; c < m.classes; ++c) {
            const double coeff = p[c] - (int(c) == target ? 1.0 : 0.0);
            for (std::size_t j = 0; j < m.d; ++j) g.data[j] += coeff * m.W[c * m.d + j];
        }
        return g;
    };
    h.jacobian = [&m](const Tensor&, int target, Tensor& dzt, Tensor& dzs) {
        dzt = Tensor({m.d});
        dzs = Tensor({m.d});
        for (std::size_t j = 0; j < m.d; ++j) {
            dzt.data[j] = m.W[std::size_t(target) * m.d + j];
            for (std::size_t c = 0; c < m.classes; ++c) dzs.data[j] += m.W[c * m.d + j];
        }
    };
    return h;
}

// Independent re-statement of the greedy saliency-pair loop, written straight
// from its contract: eligible = features < 1.0; candidates = top_b of those by
// target gradient (stable descending); among candidate pairs require
// alpha = dzt_i+dzt_j > 0 and beta = (dzs-dzt)_i+(dzs-dzt)_j < 0 and take the
// strictly largest -alpha*beta (first such pair on ties); set both to 1.0;
// stop on success, exhausted budget, or no pair.
rl::AttackResult greedy_pairs_reference(const rl::MulticlassHooks& h, const Tensor& x0,
                                        int target, double gamma, int top_b) {
    const int budget = int(std::lround(gamma * double(x0.size())));
    Tensor x = x0;
    int changed = 0;
    bool success = argmax_of(h.probs(x)) == target;
    while (!success && changed + 2 <= budget) {
        Tensor dzt, dzs;
        h.jacobian(x, target, dzt, dzs);
        std::vector<std::size_t> cand;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x.data[i] < 1.0) cand.push_back(i);
        if (cand.size() < 2) break;
        std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
            return dzt.data[a] > dzt.data[b];
        });
        if (cand.size() > std::size_t(top_b)) cand.resize(std::size_t(top_b));
        bool found = false;
        double best = 0.0;
        std::size_t bi = 0, bj = 0;
        for (std::size_t a = 0; a < cand.size(); ++a)
            for (std::size_t b = a + 1; b < cand.size(); ++b) {
                const std::size_t i = cand[a], j = cand[b];
                const double alpha = dzt.data[i] + dzt.data[j];
                const double beta = (dzs.data[i] - dzt.data[i]) + (dzs.data[j] - dzt.data[j]);
                if (!(alpha > 0) || !(beta < 0)) continue;
                const double score = -alpha * beta;
                if (!found || score > best) {
                    found = true;
                    best = score;
                    bi = i;
                    bj = j;
                }
            }
        if (!found) break;
        x.data[bi] = 1.0;
        x.data[bj] = 1.0;
        changed += 2;
        success = argmax_of(h.probs(x)) == target;
    }
    auto r = rl::detail::finish_result(x0, std::move(x), success);
    r.features_changed = changed;
    return r;
}

}  // namespace

TEST_CASE("attack family names round-trip") {
    using F = rl::AttackSpec::Family;
    for (F f : {F::FGSM, F::FastGradL2, F::ScaledClippedFGL2, F::PGD, F::PixelSwap,
                F::TopWeightPixel, F::JSMA, F::Fooling})
        CHECK(rl::attack_family_from_name(rl::attack_family_name(f)) == f);
    CHECK(std::string(rl::attack_family_name(F::ScaledClippedFGL2)) == "scaled-clipped-fgl2");
    try {
        rl::attack_family_from_name("fgsm2");
        FAIL("expected an ArgumentError");
    } catch (const rl::ArgumentError& e) {
        CHECK(std::string(e.what()).find("pixel-swap") != std::string::npos);
    }
}

TEST_CASE("linear_misclassified counts a zero logit as class +1") {
    rl::LinearLogistic m;
    m.w = Tensor::from({2}, {1.0, 0.0});
    m.b = 0.0;
    Tensor x({2});
    CHECK_FALSE(rl::linear_misclassified(m, x, +1));
    CHECK(rl::linear_misclassified(m, x, -1));
}

TEST_CASE("fgsm hand case: signed step against the label") {
    rl::LinearLogistic m;
    m.w = Tensor::from({2}, {1.0, -2.0});
    m.b = 0.0;
    Tensor x = Tensor::from({2}, {0.5, 0.5});
    auto r = rl::fgsm(m, x, +1, 0.1, /*clip=*/false);
    CHECK(r.x_adv.data[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(r.x_adv.data[1] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(r.features_changed == 2);
    // Every coordinate moved by the full eps, so ||delta||2/sqrt(d) == eps.
    CHECK(r.l2_distortion == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.success);  // logit moves from -0.5 to -0.8, still class -1... y=+1 misclassified

    // Clipping pins the step at the range boundary.
    Tensor edge = Tensor::from({2}, {0.05, 0.98});
    auto rc = rl::fgsm(m, edge, +1, 0.1, /*clip=*/true);
    CHECK(rc.x_adv.data[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(rc.x_adv.data[1] == doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS_AS(rl::fgsm(m, x, +1, -0.1), rl::ArgumentError);
}

TEST_CASE("eps=0 leaves every gradient attack at the input") {
    rl::Rng rng(3);
    rl::LinearLogistic m = random_linear(6, rng);
    Tensor x = random_tensor({6}, rng);
    for (auto r : {rl::fgsm(m, x, +1, 0.0), rl::fast_grad_l2(m, x, +1, 0.0),
                   rl::scaled_clipped_fgl2(m, x, +1, 0.0),
                   rl::pgd(m, x, +1, 0.0, 3, 0.0, true, 7),
                   rl::pixel_swap(x, 0.0, 5), rl::top_weight_pixel(m, x, +1, 0)}) {
        CHECK(r.x_adv.data == x.data);
        CHECK(r.features_changed == 0);
        CHECK(r.l2_distortion == 0.0);
    }
}

TEST_CASE("fgsm maximizes the linear loss over the eps-cube corners") {
    rl::Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 2 + rng.index(9);  // up to 10 -> 1024 corners
        rl::LinearLogistic m = random_linear(d, rng);
        Tensor x = random_tensor({d}, rng);
        const int y = trial % 2 == 0 ? +1 : -1;
        const double eps = rng.uniform(0.05, 0.4);
        auto r = rl::fgsm(m, x, y, eps, /*clip=*/false);
        const double fgsm_loss = margin_loss(m, r.x_adv, y);
        for (std::size_t mask = 0; mask < (std::size_t(1) << d); ++mask) {
            Tensor corner = x;
            for (std::size_t j = 0; j < d; ++j)
                corner.data[j] += (mask >> j) & 1 ? eps : -eps;
            const double corner_loss = margin_loss(m, corner, y);
            CHECK(fgsm_loss >= corner_loss - 1e-12 * std::max(1.0, corner_loss));
        }
    }
}

TEST_CASE("fast_grad_l2 lands on the eps sphere along -y w-hat") {
    rl::Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t d = 2 + rng.index(20);
        rl::LinearLogistic m = random_linear(d, rng);
        Tensor x = random_tensor({d}, rng);
        const int y = trial % 2 == 0 ? +1 : -1;
        const double eps = rng.uniform(0.01, 0.5);
        auto r = rl::fast_grad_l2(m, x, y, eps, /*clip=*/false);
        double sq = 0.0;
        const double nw = rl::l2_norm(m.w);
        for (std::size_t j = 0; j < d; ++j) {
            const double delta = r.x_adv.data[j] - x.data[j];
            sq += delta * delta;
            CHECK(testutil::rel_err(delta, -double(y) * eps * m.w.data[j] / nw) < 1e-12);
        }
        CHECK(testutil::rel_err(std::sqrt(sq), eps) < 1e-12);
        CHECK_FALSE(r.zero_gradient);
    }

    rl::LinearLogistic zero;
    zero.w = Tensor({4});
    Tensor x = Tensor::from({4}, {0.1, 0.2, 0.3, 0.4});
    auto r = rl::fast_grad_l2(zero, x, +1, 0.2);
    CHECK(r.zero_gradient);
    CHECK(r.x_adv.data == x.data);
    CHECK_THROWS_AS(rl::fast_grad_l2(zero, x, +1, -0.2), rl::ArgumentError);
}

TEST_CASE("fast_grad_l2 beats Monte Carlo directions on the eps sphere") {
    rl::Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 3 + rng.index(10);
        rl::LinearLogistic m = random_linear(d, rng);
        Tensor x = random_tensor({d}, rng);
        const int y = trial % 2 == 0 ? +1 : -1;
        const double eps = 0.3;
        auto r = rl::fast_grad_l2(m, x, y, eps, /*clip=*/false);
        const double best = margin_loss(m, r.x_adv, y);
        for (int probe = 0; probe < 500; ++probe) {
            std::vector<double> v(d);
            double norm = 0.0;
            for (auto& e : v) {
                e = rng.normal();
                norm += e * e;
            }
            norm = std::sqrt(norm);
            if (norm == 0) continue;
            Tensor cand = x;
            for (std::size_t j = 0; j < d; ++j) cand.data[j] += eps * v[j] / norm;
            CHECK(best >= margin_loss(m, cand, y) - 1e-12);
        }
    }
}

TEST_CASE("scaled_clipped_fgl2 interpolates between the two fast gradients") {
    rl::Rng rng(19);
    // Comparable-magnitude weights: at gain 100 every coordinate saturates to
    // +-eps, which is exactly the clipped signed step.
    rl::LinearLogistic m;
    m.w = Tensor({8});
    for (auto& v : m.w.data) {
        v = rng.uniform(0.5, 1.0);
        if (rng.index(2)) v = -v;
    }
    m.b = 0.1;
    Tensor x = random_tensor({8}, rng);
    const double eps = 0.2;
    for (int y : {+1, -1}) {
        auto sc = rl::scaled_clipped_fgl2(m, x, y, eps, 100.0);
        auto fg = rl::fgsm(m, x, y, eps, /*clip=*/true);
        CHECK(sc.x_adv.data == fg.x_adv.data);

        // At gain eps the pre-clip step is eps * ghat, which never exceeds
        // +-eps, so the clip is inert and the step is exactly fast-grad-L2.
        auto sc1 = rl::scaled_clipped_fgl2(m, x, y, eps, eps);
        auto fl = rl::fast_grad_l2(m, x, y, eps, /*clip=*/true);
        for (std::size_t j = 0; j < 8; ++j)
            CHECK(sc1.x_adv.data[j] == doctest::Approx(fl.x_adv.data[j]).epsilon(1e-15));
    }

    // A zero-weight coordinate never moves, whatever the gain.
    rl::LinearLogistic sparse;
    sparse.w = Tensor::from({3}, {1.0, 0.0, -1.0});
    Tensor xin = Tensor::from({3}, {0.4, 0.4, 0.4});
    auto r = rl::scaled_clipped_fgl2(sparse, xin, +1, 0.2, 100.0);
    CHECK(r.x_adv.data[1] == 0.4);
    CHECK(r.x_adv.data[0] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(r.x_adv.data[2] == doctest::Approx(0.6).epsilon(1e-15));

    rl::LinearLogistic zero;
    zero.w = Tensor({3});
    auto rz = rl::scaled_clipped_fgl2(zero, xin, +1, 0.2);
    CHECK(rz.zero_gradient);
    CHECK(rz.x_adv.data == xin.data);
}

TEST_CASE("pgd: reduction to fgsm, ball containment, determinism, monotonicity") {
    rl::Rng rng(23);
    rl::LinearLogistic m = random_linear(12, rng);
    Tensor x = random_tensor({12}, rng);
    const double eps = 0.15;

    auto one = rl::pgd(m, x, +1, eps, 1, eps, /*random_start=*/false, 0);
    auto fg = rl::fgsm(m, x, +1, eps, /*clip=*/true);
    CHECK(one.x_adv.data == fg.x_adv.data);

    auto r = rl::pgd(m, x, +1, eps, 8, eps / 4, /*random_start=*/true, 99);
    for (std::size_t j = 0; j < 12; ++j) {
        CHECK(std::abs(r.x_adv.data[j] - x.data[j]) <= eps + 1e-12);
        CHECK(r.x_adv.data[j] >= 0.0);
        CHECK(r.x_adv.data[j] <= 1.0);
    }

    auto again = rl::pgd(m, x, +1, eps, 8, eps / 4, true, 99);
    CHECK(r.x_adv.data == again.x_adv.data);
    // Long saturating runs on a linear model forget the random start, so probe
    // seed sensitivity with a single short step.
    auto short_a = rl::pgd(m, x, +1, eps, 1, eps / 8, true, 99);
    auto short_b = rl::pgd(m, x, +1, eps, 1, eps / 8, true, 100);
    CHECK(short_a.x_adv.data != short_b.x_adv.data);

    // Without a random start every step moves each coordinate toward its
    // adversarial edge, so the loss never decreases in the step count.
    double prev = margin_loss(m, x, +1);
    for (int steps = 1; steps <= 6; ++steps) {
        auto rs = rl::pgd(m, x, +1, eps, steps, eps / 8, false, 0);
        const double cur = margin_loss(m, rs.x_adv, +1);
        CHECK(cur >= prev - 1e-12);
        prev = cur;
    }

    CHECK_THROWS_AS(rl::pgd(m, x, +1, eps, 0, eps, false, 0), rl::ArgumentError);
}

TEST_CASE("pixel_swap permutes values without touching the multiset") {
    rl::Rng rng(29);
    Tensor x = random_tensor({40}, rng);
    for (double ratio : {0.1, 0.35, 0.8, 1.0}) {
        auto r = rl::pixel_swap(x, ratio, 7);
        CHECK_FALSE(r.success);
        const int k = int(std::lround(ratio * 40.0));
        CHECK(r.features_changed <= k);
        auto sorted_in = x.data, sorted_out = r.x_adv.data;
        std::sort(sorted_in.begin(), sorted_in.end());
        std::sort(sorted_out.begin(), sorted_out.end());
        CHECK(sorted_in == sorted_out);

        auto again = rl::pixel_swap(x, ratio, 7);
        CHECK(r.x_adv.data == again.x_adv.data);
    }
    auto big = rl::pixel_swap(x, 1.0, 11);
    CHECK(big.features_changed > 0);  // a 40-point permutation almost surely moves something

    Tensor flat({16});
    for (auto& v : flat.data) v = 0.25;
    auto id = rl::pixel_swap(flat, 1.0, 3);
    CHECK(id.x_adv.data == flat.data);
    CHECK(id.features_changed == 0);
    CHECK(id.l2_distortion == 0.0);

    CHECK_THROWS_AS(rl::pixel_swap(x, -0.1, 1), rl::ArgumentError);
    CHECK_THROWS_AS(rl::pixel_swap(x, 1.1, 1), rl::ArgumentError);
}

TEST_CASE("top_weight_pixel splits the budget by label") {
    rl::LinearLogistic m;
    m.w = Tensor::from({5}, {5.0, -4.0, 3.0, -2.0, 1.0});
    m.b = 0.0;
    Tensor x({5});
    for (auto& v : x.data) v = 0.2;

    auto up = rl::top_weight_pixel(m, x, +1, 3);
    // ceil(3/2)=2 most negative weights (indices 1, 3) plus floor(3/2)=1 most
    // positive (index 0).
    CHECK(up.x_adv.data == std::vector<double>{1.0, 1.0, 0.2, 1.0, 0.2});
    CHECK(up.features_changed == 3);

    auto down = rl::top_weight_pixel(m, x, -1, 3);
    // the 3 largest weights: indices 0, 2, 4
    CHECK(down.x_adv.data == std::vector<double>{1.0, 0.2, 1.0, 0.2, 1.0});

    auto none = rl::top_weight_pixel(m, x, +1, 0);
    CHECK(none.x_adv.data == x.data);
    auto all = rl::top_weight_pixel(m, x, -1, 5);
    CHECK(all.x_adv.data == std::vector<double>(5, 1.0));

    CHECK_THROWS_AS(rl::top_weight_pixel(m, x, +1, -1), rl::ArgumentError);
    CHECK_THROWS_AS(rl::top_weight_pixel(m, x, +1, 6), rl::ArgumentError);
}

TEST_CASE("binary hooks expose the two-logit view of the linear model") {
    rl::Rng rng(31);
    rl::LinearLogistic m = random_linear(7, rng);
    auto h = rl::multiclass_hooks(m);
    CHECK(h.num_classes == 2);
    CHECK(h.input_shape == std::vector<std::size_t>{7});

    Tensor x = random_tensor({7}, rng);
    const double z = rl::predict(m, x);
    auto p = h.probs(x);
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0 * z))).epsilon(1e-12));

    // The cross-entropy gradient toward class 0 matches finite differences of
    // -log p0.
    auto g = h.xent_input_grad(x, 0);
    auto nll0 = [&](const Tensor& xx) { return -std::log(h.probs(xx)[0]); };
    for (std::size_t j = 0; j < 7; ++j)
        CHECK(testutil::rel_err(g.data[j], testutil::central_diff(nll0, x, j, 1e-6)) < 1e-6);

    Tensor dzt, dzs;
    h.jacobian(x, 0, dzt, dzs);
    CHECK(dzt.data == m.w.data);
    for (double v : dzs.data) CHECK(v == 0.0);
    h.jacobian(x, 1, dzt, dzs);
    for (std::size_t j = 0; j < 7; ++j) CHECK(dzt.data[j] == -m.w.data[j]);
}

TEST_CASE("cnn hooks agree with the loss-and-grads path") {
    auto m = rl::convnet_init<double>(61);
    auto h = rl::multiclass_hooks(m);
    CHECK(h.num_classes == 10);
    CHECK(h.input_shape == std::vector<std::size_t>{32, 32, 3});

    rl::Rng rng(62);
    Tensor x = random_tensor({32, 32, 3}, rng);
    const int label = 4;
    auto g = h.xent_input_grad(x, label);
    auto lg = rl::cnn_loss_and_grads(m, x, rl::one_hot_smoothed<double>(label, 10, 0.0),
                                     /*want_params=*/false, /*want_input=*/true);
    REQUIRE(g.size() == lg.input_grad.size());
    for (std::size_t j = 0; j < g.size(); ++j)
        CHECK(g.data[j] == doctest::Approx(lg.input_grad.data[j]).epsilon(1e-12));

    auto p = h.probs(x);
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t c = 0; c < 10; ++c)
        CHECK(p[c] == doctest::Approx(lg.probs.data[c]).epsilon(1e-12));

    // jacobian's dz_target seeds a single logit.
    Tensor dzt, dzs;
    h.jacobian(x, 3, dzt, dzs);
    Tensor seed({10});
    seed.data[3] = 1.0;
    auto direct = rl::cnn_input_grad_from_logit_seed(m, x, seed);
    for (std::size_t j = 0; j < 40; ++j) {
        const std::size_t i = rng.index(dzt.size());
        CHECK(dzt.data[i] == doctest::Approx(direct.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("multiclass eps=0 is the identity and invalid arguments throw") {
    rl::Rng rng(67);
    FlatSoftmax fm{3, 6, {}};
    fm.W.resize(18);
    for (auto& v : fm.W) v = rng.uniform(-1.0, 1.0);
    auto h = hooks_of(fm);
    Tensor x = random_tensor({6}, rng);

    for (auto r : {rl::fgsm_multi(h, x, 0, 0.0), rl::fast_grad_l2_multi(h, x, 0, 0.0),
                   rl::pgd_multi(h, x, 0, 0.0, 3, 0.01, true, 5)}) {
        CHECK(r.x_adv.data == x.data);
        CHECK(r.features_changed == 0);
    }
    CHECK_THROWS_AS(rl::fgsm_multi(h, x, 0, -0.1), rl::ArgumentError);
    CHECK_THROWS_AS(rl::fast_grad_l2_multi(h, x, 0, -0.1), rl::ArgumentError);
    CHECK_THROWS_AS(rl::pgd_multi(h, x, 0, 0.1, 0, 0.05, true, 5), rl::ArgumentError);
    CHECK_THROWS_AS(rl::jsma_multi(h, x, 1, 1, 0.5), rl::ArgumentError);
    CHECK_THROWS_AS(rl::jsma_multi(h, x, 1, 0, -0.1), rl::ArgumentError);
    CHECK_THROWS_AS(rl::jsma_multi(h, x, 1, 0, 1.5), rl::ArgumentError);
}

TEST_CASE("greedy saliency pairs on the binary linear model match the closed form") {
    rl::Rng rng(71);
    const std::size_t d = 6;
    for (int trial = 0; trial < 200; ++trial) {
        rl::LinearLogistic m = random_linear(d, rng);
        auto h = rl::multiclass_hooks(m);
        Tensor x({d});  // all zeros: every feature eligible with equal headroom
        const double gamma =
            std::vector<double>{1.0 / 3.0, 0.5, 0.7, 1.0}[std::size_t(trial % 4)];
        const int budget = int(std::lround(gamma * double(d)));

        // Closed form: target 0 wants z = w.x + b >= 0. With a constant
        // Jacobian the best pair is always the two largest remaining weights,
        // applied while their sum is positive and the budget allows.
        std::vector<std::size_t> order(d);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return m.w.data[a] > m.w.data[b]; });
        Tensor expect = x;
        double z = m.b;
        int changed = 0;
        bool success = z >= 0;
        std::size_t pos = 0;
        while (!success && changed + 2 <= budget && pos + 1 < d) {
            const double s = m.w.data[order[pos]] + m.w.data[order[pos + 1]];
            if (!(s > 0)) break;
            expect.data[order[pos]] = 1.0;
            expect.data[order[pos + 1]] = 1.0;
            z += s;
            changed += 2;
            pos += 2;
            success = z >= 0;
        }

        auto r = rl::jsma_multi(h, x, 1, 0, gamma);
        CHECK(r.x_adv.data == expect.data);
        CHECK(r.features_changed == changed);
        CHECK(r.success == success);
        CHECK(r.features_changed <= budget);
    }
}

TEST_CASE("greedy saliency pairs match an independent reimplementation on 3 classes") {
    rl::Rng rng(73);
    for (int trial = 0; trial < 60; ++trial) {
        FlatSoftmax fm{3, 8, {}};
        fm.W.resize(24);
        for (auto& v : fm.W) v = rng.uniform(-1.0, 1.0);
        auto h = hooks_of(fm);
        Tensor x = random_tensor({8}, rng, 0.0, 0.9);
        if (trial % 3 == 0) x.data[rng.index(8)] = 1.0;  // some features start saturated
        const int target = int(rng.index(3));
        const int true_label = (target + 1) % 3;
        const double gamma = std::vector<double>{0.25, 0.5, 1.0}[std::size_t(trial % 3)];
        const int top_b = trial % 2 == 0 ? 4 : 64;

        auto got = rl::jsma_multi(h, x, true_label, target, gamma, top_b);
        auto want = greedy_pairs_reference(h, x, target, gamma, top_b);
        CHECK(got.x_adv.data == want.x_adv.data);
        CHECK(got.success == want.success);
        CHECK(got.features_changed == want.features_changed);
        CHECK(got.features_changed <= int(std::lround(gamma * 8.0)));
    }
}

TEST_CASE("a zero budget or saturated input stops the saliency attack immediately") {
    rl::Rng rng(79);
    rl::LinearLogistic m = random_linear(6, rng);
    m.b = -10.0;  // far from the target side, so no trivial success
    auto h = rl::multiclass_hooks(m);
    Tensor x({6});
    auto r = rl::jsma_multi(h, x, 1, 0, 0.0);
    CHECK(r.x_adv.data == x.data);
    CHECK(r.features_changed == 0);
    CHECK_FALSE(r.success);

    Tensor ones({6});
    for (auto& v : ones.data) v = 1.0;
    auto r2 = rl::jsma_multi(h, ones, 1, 0, 1.0);
    CHECK(r2.x_adv.data == ones.data);
    CHECK(r2.features_changed == 0);
}

TEST_CASE("one trajectory replays the per-budget saliency outcomes") {
    rl::Rng rng(83);
    for (int trial = 0; trial < 40; ++trial) {
        FlatSoftmax fm{3, 10, {}};
        fm.W.resize(30);
        for (auto& v : fm.W) v = rng.uniform(-1.0, 1.0);
        auto h = hooks_of(fm);
        Tensor x = random_tensor({10}, rng, 0.0, 0.9);
        const int target = int(rng.index(3));
        const int true_label = (target + 2) % 3;
        const std::vector<double> gammas = {0.0, 0.2, 0.4, 0.6, 1.0};

        const int max_budget = int(std::lround(gammas.back() * 10.0));
        auto tr = rl::jsma_trajectory(h, x, target, max_budget);

        for (double g : gammas) {
            auto direct = rl::jsma_multi(h, x, true_label, target, g);
            const int budget = int(std::lround(g * 10.0));
            const int pair_cap = budget / 2;
            bool expect_success;
            int expect_used;
            if (tr.success_at_start) {
                expect_success = true;
                expect_used = 0;
            } else if (tr.success_at_changed >= 0 && tr.success_at_changed <= 2 * pair_cap) {
                expect_success = true;
                expect_used = tr.success_at_changed;
            } else {
                expect_success = false;
                expect_used =
                    2 * std::min<int>(pair_cap, int(tr.changed_after_pair.size()));
            }
            CHECK(direct.success == expect_success);
            CHECK(direct.features_changed == expect_used);
        }
    }
}

TEST_CASE("fooling ascent: seeded start, trace bookkeeping, stationary at zero weights") {
    rl::Rng rng(89);
    FlatSoftmax fm{4, 12, {}};
    fm.W.resize(48);
    for (auto& v : fm.W) v = rng.uniform(-1.0, 1.0);
    auto h = hooks_of(fm);

    auto still = rl::fooling_ascent(h, 2, 0, 0.01, 5);
    CHECK(still.prob_trace.size() == 1);
    for (double v : still.image.data) {
        CHECK(v >= 0.5);
        CHECK(v <= 0.6);
    }

    auto run = rl::fooling_ascent(h, 2, 30, 0.05, 5);
    CHECK(run.prob_trace.size() == 31);
    CHECK(run.prob_trace.front() == still.prob_trace.front());
    CHECK(run.prob_trace.back() > run.prob_trace.front());
    for (double v : run.image.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    auto same = rl::fooling_ascent(h, 2, 30, 0.05, 5);
    CHECK(same.image.data == run.image.data);
    auto other = rl::fooling_ascent(h, 2, 30, 0.05, 6);
    CHECK(other.image.data != run.image.data);

    FlatSoftmax zero{4, 12, std::vector<double>(48, 0.0)};
    auto hz = hooks_of(zero);
    auto frozen = rl::fooling_ascent(hz, 1, 10, 0.05, 5);
    auto init = rl::fooling_ascent(hz, 1, 0, 0.05, 5);
    CHECK(frozen.image.data == init.image.data);
    for (double p : frozen.prob_trace) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));

    CHECK_THROWS_AS(rl::fooling_ascent(h, 4, 10, 0.05, 5), rl::ArgumentError);
    CHECK_THROWS_AS(rl::fooling_ascent(h, -1, 10, 0.05, 5), rl::ArgumentError);
    CHECK_THROWS_AS(rl::fooling_ascent(h, 2, -1, 0.05, 5), rl::ArgumentError);
}

TEST_CASE("noise fooling sweep: zero eps hits exactly one class per sample") {
    {
        auto m = rl::convnet_init<double>(91);
        auto h = rl::multiclass_hooks(m);
        auto curve = rl::fooling_asr_sweep(h, {0.0}, 20, 17);
        REQUIRE(curve.size() == 1);
        CHECK(curve[0].eps == 0.0);
        CHECK(curve[0].asr == 0.1);  // exactly 1 of 10 targets matches the argmax
        CHECK(curve[0].margin > 0.0);
        CHECK(curve[0].margin < 1.0);
    }
    {
        rl::Rng rng(93);
        rl::LinearLogistic m = random_linear(30, rng);
        auto h = rl::multiclass_hooks(m);
        auto curve = rl::fooling_asr_sweep(h, {0.0, 0.05}, 50, 3);
        REQUIRE(curve.size() == 2);
        CHECK(curve[0].asr == 0.5);
        // One signed step toward each side can only help.
        CHECK(curve[1].asr >= curve[0].asr);

        auto again = rl::fooling_asr_sweep(h, {0.0, 0.05}, 50, 3);
        CHECK(again[1].asr == curve[1].asr);
        CHECK(again[1].margin == curve[1].margin);
    }
}

TEST_CASE("a tiny normalized gradient step moves the probability linearly") {
    auto m = rl::convnet_init<double>(97);
    auto h = rl::multiclass_hooks(m);
    rl::Rng rng(98);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor x = random_tensor({32, 32, 3}, rng, 0.2, 0.8);
        const int label = int(rng.index(10));
        const double py = h.probs(x)[std::size_t(label)];
        const Tensor g = h.xent_input_grad(x, label);  // = grad of -log p_label
        const double gnorm = rl::l2_norm(g);
        REQUIRE(gnorm > 0.0);
        // grad p_label = -p_label * g, so the steepest descent direction for
        // the probability is +g/|g| scaled by -1... i.e. moving along +g/|g|
        // drops p_label at rate |grad p_label| = p_label * |g|.
        for (double eps : {1e-4, 1e-3}) {
            Tensor xp = x;
            for (std::size_t j = 0; j < x.size(); ++j) xp.data[j] += eps * g.data[j] / gnorm;
            const double moved = h.probs(xp)[std::size_t(label)];
            const double predicted = py - eps * (py * gnorm);
            CHECK(std::abs(moved - predicted) <= 1e-4);
        }
    }
}

TEST_CASE("iterated projected steps dominate the single signed step") {
    auto m = rl::convnet_init<float>(101);
    auto h = rl::multiclass_hooks(m);
    rl::Rng rng(102);
    const double eps = 8.0 / 255.0;
    int wins = 0, total = 0;
    for (int trial = 0; trial < 40; ++trial) {
        Tensor x = random_tensor({32, 32, 3}, rng);
        const int label = argmax_of(h.probs(x));
        auto f = rl::fgsm_multi(h, x, label, eps);
        auto p = rl::pgd_multi(h, x, label, eps, 10, 2.0 / 255.0, /*random_start=*/false, 0);
        const double fgsm_nll = -std::log(h.probs(f.x_adv)[std::size_t(label)]);
        const double pgd_nll = -std::log(h.probs(p.x_adv)[std::size_t(label)]);
        ++total;
        if (pgd_nll >= fgsm_nll - 1e-9) ++wins;
    }
    CHECK(double(wins) / double(total) >= 0.95);
}
