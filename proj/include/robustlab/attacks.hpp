#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "robustlab/models.hpp"
#include "robustlab/rng.hpp"
#include "robustlab/tensor.hpp"

namespace robustlab {

// Tagged description of one attack configuration, the unit the sweep layer
// and the CLI work in. Individual attack functions below take their
// parameters explicitly.
struct AttackSpec {
    enum Family {
        FGSM,
        FastGradL2,
        ScaledClippedFGL2,
        PGD,
        PixelSwap,
        TopWeightPixel,
        JSMA,
        Fooling,
    };
    Family family = FGSM;
    double eps = 0.0;         // fraction of the input range
    double scale = 100.0;     // ScaledClippedFGL2 pre-clip gain
    int steps = 1;            // PGD iterations
    double step_size = 0.0;   // PGD per-step size
    bool random_start = true; // PGD random init inside the eps-ball
    double ratio = 0.0;       // PixelSwap fraction of features
    int k = 0;                // TopWeightPixel pixel budget
    double gamma = 0.0;       // JSMA changed-feature budget (fraction)
    int target = -1;          // JSMA target class
    int fool_steps = 50;      // Fooling ascent iterations
    double fool_step_size = 5e-3;
    bool clip = true;
    std::uint64_t seed = 0;
};

const char* attack_family_name(AttackSpec::Family f);
AttackSpec::Family attack_family_from_name(const std::string& name);

struct AttackResult {
    Tensor x_adv;
    bool success = false;
    // ||delta||2 / sqrt(d), the perturbation norm as a fraction of the
    // largest norm a [0,1]^d image can have: 0 for an untouched input, 1
    // when every feature moves across the full range.
    double l2_distortion = 0.0;
    int features_changed = 0;
    bool zero_gradient = false;
};

namespace detail {
// Fills distortion and changed-feature count from the x -> x_adv pair.
AttackResult finish_result(const Tensor& x, Tensor x_adv, bool success);
}  // namespace detail

// ---------------------------------------------------------------------------
// Binary linear attacks (labels y in {+1,-1}). The prediction rule is
// sign(logit) with 0 counted as +1, matching evalsweep::accuracy.

bool linear_misclassified(const LinearLogistic& m, const Tensor& x, int y);

// x + eps * sign(loss input-gradient); for this model the sign is -y*sign(w)
// exactly, which is what gets used (it cannot underflow at huge margins).
AttackResult fgsm(const LinearLogistic& m, const Tensor& x, int y, double eps, bool clip = true);

// x + eps * g/||g||2. Returns x unchanged with zero_gradient=true when the
// weight vector (hence the gradient) is zero.
AttackResult fast_grad_l2(const LinearLogistic& m, const Tensor& x, int y, double eps,
                          bool clip = true);

// delta = clamp(scale * g/||g||2, ±eps), then clip to [0,1]. Saturated
// coordinates match FGSM polarity; coordinates with zero gradient stay put.
AttackResult scaled_clipped_fgl2(const LinearLogistic& m, const Tensor& x, int y, double eps,
                                 double scale = 100.0);

// Projected sign-gradient iterations inside the L∞ eps-ball around x,
// intersected with [0,1]. Optional uniform random start.
AttackResult pgd(const LinearLogistic& m, const Tensor& x, int y, double eps, int steps,
                 double step_size, bool random_start, std::uint64_t seed);

// Sets the k pixels whose weights hurt class y most to full scale. Attacking
// y=+1 splits the budget: ceil(k/2) most-negative weights plus floor(k/2)
// most-positive; attacking y=-1 takes the k features with the most negative
// weight*y (i.e. the largest weights).
AttackResult top_weight_pixel(const LinearLogistic& m, const Tensor& x, int y, int k);

// Model-free value shuffle: round(ratio*d) features chosen uniformly without
// replacement, then a uniformly random permutation of their values. The
// per-image multiset of feature values is preserved exactly. success is left
// false; the evaluation layer owns the prediction check.
AttackResult pixel_swap(const Tensor& x, double ratio, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Model-agnostic multiclass hooks: softmax probabilities, the cross-entropy
// input gradient toward a target, and logit Jacobian contractions. The CNN
// and the two-logit linear adapter both implement these, so the greedy
// attacks below have exactly one implementation.

struct MulticlassHooks {
    std::size_t num_classes = 0;
    std::vector<std::size_t> input_shape;
    // softmax probabilities at x
    std::function<std::vector<double>(const Tensor&)> probs;
    // d(-log p_target)/dx
    std::function<Tensor(const Tensor&, int target)> xent_input_grad;
    // dz_target/dx and d(sum_k z_k)/dx in one evaluation
    std::function<void(const Tensor&, int target, Tensor& dz_target, Tensor& dz_sum)> jacobian;
};

MulticlassHooks multiclass_hooks(const ConvNetT<float>& m);
MulticlassHooks multiclass_hooks(const ConvNetT<double>& m);
// Binary model viewed as logits (z, -z): class 0 is y=+1, class 1 is y=-1.
MulticlassHooks multiclass_hooks(const LinearLogistic& m);

// ---------------------------------------------------------------------------
// Multiclass attacks against the hooks (CNN convenience wrappers below).

AttackResult fgsm_multi(const MulticlassHooks& h, const Tensor& x, int label, double eps,
                        bool clip = true);
AttackResult fast_grad_l2_multi(const MulticlassHooks& h, const Tensor& x, int label, double eps,
                                bool clip = true);
AttackResult pgd_multi(const MulticlassHooks& h, const Tensor& x, int label, double eps, int steps,
                       double step_size, bool random_start, std::uint64_t seed);

// Greedy saliency-pair attack: repeatedly picks the feature pair with the
// best (target gradient up, other-logit mass down) score over the top_b
// singles, sets both features to full scale, and stops on success, budget
// exhaustion (round(gamma*d) changed features), or no valid pair.
AttackResult jsma_multi(const MulticlassHooks& h, const Tensor& x, int true_label, int target,
                        double gamma, int top_b = 64);

// One greedy run without a budget cap, recording the running changed-feature
// count and where success first occurred (-1 if never). Lets a table over
// several gamma values reuse one trajectory; equivalence with direct
// jsma_multi calls is pinned by tests.
struct JsmaTrajectory {
    std::vector<int> changed_after_pair;
    int success_at_changed = -1;
    bool success_at_start = false;
};
JsmaTrajectory jsma_trajectory(const MulticlassHooks& h, const Tensor& x, int target,
                               int max_changed, int top_b = 64);

// Gradient-descent "fooling" image: start at 0.5 + U(0, 0.1) per feature,
// take plain gradient steps toward the target class, clip to [0,1] each
// step. prob_trace holds the target probability at the start and after each
// step.
struct FoolingRun {
    Tensor image;
    std::vector<double> prob_trace;
};
FoolingRun fooling_ascent(const MulticlassHooks& h, int target, int steps, double step_size,
                          std::uint64_t seed);

// For each eps: n uniform-noise images, one sign step toward each class;
// ASR = fraction with argmax == target, margin = mean gap between the top two
// softmax probabilities (averaged over all samples, successful or not).
struct FoolingSweepPoint {
    double eps;
    double asr;
    double margin;
};
std::vector<FoolingSweepPoint> fooling_asr_sweep(const MulticlassHooks& h,
                                                 const std::vector<double>& eps_grid,
                                                 std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// CNN convenience wrappers.

template <typename T>
AttackResult fgsm(const ConvNetT<T>& m, const Tensor& x, int label, double eps, bool clip = true) {
    return fgsm_multi(multiclass_hooks(m), x, label, eps, clip);
}
template <typename T>
AttackResult fast_grad_l2(const ConvNetT<T>& m, const Tensor& x, int label, double eps,
                          bool clip = true) {
    return fast_grad_l2_multi(multiclass_hooks(m), x, label, eps, clip);
}
template <typename T>
AttackResult pgd(const ConvNetT<T>& m, const Tensor& x, int label, double eps, int steps,
                 double step_size, bool random_start, std::uint64_t seed) {
    return pgd_multi(multiclass_hooks(m), x, label, eps, steps, step_size, random_start, seed);
}
template <typename T>
AttackResult jsma(const ConvNetT<T>& m, const Tensor& x, int true_label, int target, double gamma,
                  int top_b = 64) {
    return jsma_multi(multiclass_hooks(m), x, true_label, target, gamma, top_b);
}
template <typename T>
FoolingRun fooling_ascent(const ConvNetT<T>& m, int target, int steps, double step_size,
                          std::uint64_t seed) {
    return fooling_ascent(multiclass_hooks(m), target, steps, step_size, seed);
}

}  // namespace robustlab
