#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "robustlab/dataio.hpp"
#include "robustlab/models.hpp"

namespace robustlab {

enum class DecayNorm { None, L1, L2 };

// Weight penalty added to the training loss, applied to all weights (never
// the bias). The L2 form is the norm lambda*||w||2 itself; squared_l2
// switches to lambda*||w||2^2 for comparison runs. The gradient of either
// norm at w=0 is taken as 0.
struct DecaySpec {
    DecayNorm norm = DecayNorm::None;
    double lambda = 0.0;
    bool squared_l2 = false;
};

enum class AdvMethod { FGSM, FastGradL2, PGD };
enum class LabelSource { TrueLabel, ModelPrediction };

// Adversarial-training setup: once epoch >= delay_epochs, every batch is
// replaced (not mixed) by its adversarial counterpart generated against the
// current model. eps stays constant for the whole run.
struct AdvTrainSpec {
    AdvMethod method = AdvMethod::FGSM;
    double eps = 0.0;
    int pgd_steps = 1;
    double pgd_step_size = 0.0;
    int delay_epochs = 0;
    LabelSource label_source = LabelSource::TrueLabel;
    // Optional hook: shrink eps linearly to 0 over the run. Off in every
    // named recipe.
    bool eps_linear_decay = false;
};

enum class Optimizer { SGD, Adam };

struct TrainConfig {
    Optimizer optimizer = Optimizer::Adam;
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    int batch_size = 128;
    long total_steps = 0;  // minibatch steps; the linear recipes count these
    int epochs = 0;        // full passes; the convnet recipes count these
    DecaySpec decay;
    std::optional<AdvTrainSpec> adv;
    LossFn loss;
    std::uint64_t seed = 1;
    // Cadence (in steps) of the in-loop exactness check that the FGSM-trained
    // linear batch loss equals the clean loss at margins shifted by
    // eps*||w||1. Tests set 1; 0 disables.
    int invariant_check_stride = 500;

    void validate() const;
};

struct TrainingLog {
    struct Row {
        int epoch;
        double loss;       // mean minibatch training loss over the epoch
        double clean_acc;  // accuracy on clean training inputs after the epoch
        double l1_norm;    // weight norms after the epoch (all weights, no bias)
        double l2_norm;
    };
    std::vector<Row> rows;
};

// epoch,loss,clean_acc,l1_norm,l2_norm rows; '#'-prefixed header lines carry
// the manifest digest and are ignored by the parser.
std::string training_log_to_csv(const TrainingLog& log, const std::string& manifest_digest);
TrainingLog training_log_from_csv(const std::string& csv);

// Gradient of the decay penalty at w (the norm is taken jointly over all
// weight tensors; `joint_l2_norm` carries it in). Exposed for direct tests.
double decay_gradient_coeff_l2(const DecaySpec& d, double joint_l2_norm);

struct LinearTrainResult {
    LinearLogistic model;
    TrainingLog log;
};

// Minibatch training of the binary linear model. Steps-based: one epoch is
// one reshuffled pass over the data. Throws NumericalError with a diagnostic
// when the loss stops being finite.
LinearTrainResult train(LinearLogistic init, const BinaryView& data, const TrainConfig& cfg);

template <typename T>
struct CnnTrainResult {
    ConvNetT<T> model;
    TrainingLog log;
};

// Epoch-based convnet training. clean_acc is measured on a fixed subsample
// (first 2000 training images) to keep epoch overhead bounded. Gradients
// accumulate over fixed 16-example chunks reduced in index order, so results
// are bitwise identical for any thread count.
CnnTrainResult<float> train(ConvNetT<float> init, const LabeledDataset& data,
                            const TrainConfig& cfg, int threads = 1);
CnnTrainResult<double> train(ConvNetT<double> init, const LabeledDataset& data,
                             const TrainConfig& cfg, int threads = 1);

// ---------------------------------------------------------------------------
// Named presets reproducing the library's reference experiments.

struct Recipe {
    std::string name;
    enum ModelKind { LinearKind, ConvNetKind } model = LinearKind;
    enum Dataset { Mnist37, Cifar10 } dataset = Mnist37;
    bool expert_init = false;  // linear only: start from the class-mean difference
    TrainConfig config;
    std::string notes;
};

const std::vector<Recipe>& recipes();
const Recipe& find_recipe(const std::string& name);  // ArgumentError lists known names
std::string recipe_names_joined();

// Starting weights for a linear recipe: class-mean difference when the recipe
// asks for expert initialization, zeros otherwise.
LinearLogistic linear_init_for(const Recipe& r, const BinaryView& data);

}  // namespace robustlab
