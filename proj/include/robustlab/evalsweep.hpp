#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "robustlab/attacks.hpp"
#include "robustlab/dataio.hpp"
#include "robustlab/models.hpp"

namespace robustlab {

// ---------------------------------------------------------------------------
// Clean accuracy.

// Binary: correct when sign(w.x+b) matches y, with the zero logit counted as
// the positive class.
double accuracy(const LinearLogistic& m, const BinaryView& data);

template <typename T>
double accuracy(const ConvNetT<T>& m, const LabeledDataset& data) {
    if (data.size() == 0) throw ArgumentError("accuracy needs a non-empty dataset");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const TensorT<T> logits = predict(m, tensor_cast<T>(data.example(i)));
        std::size_t best = 0;
        for (std::size_t j = 1; j < logits.size(); ++j)
            if (logits.data[j] > logits.data[best]) best = j;
        if (int(best) == data.labels[i]) ++correct;
    }
    return double(correct) / double(data.size());
}

// ---------------------------------------------------------------------------
// Parameter sweeps: one attack family evaluated over a grid of its primary
// parameter (eps for the gradient family, ratio for pixel-swap, pixel count
// for top-weight-pixel).

struct SweepPoint {
    double param = 0.0;
    double accuracy = 0.0;
    // Mean over successful attacks of 100 * ||delta||2 / sqrt(d): the
    // perturbation norm as a percentage of the largest norm a [0,1]^d image
    // can have. 0 when nothing succeeded.
    double mean_l2_distortion_pct = 0.0;
    long n = 0;
};
bool operator==(const SweepPoint& a, const SweepPoint& b);

struct SweepCurve {
    std::string attack;
    std::uint64_t seed = 0;
    double chance = 0.5;  // 0.5 binary, 0.1 ten-class
    std::vector<SweepPoint> points;
};
bool operator==(const SweepCurve& a, const SweepCurve& b);

// First grid param whose accuracy falls below the chance level.
std::optional<double> chance_crossing(const SweepCurve& c);

// Grid must be strictly increasing. stop_at_zero ends the sweep after the
// first point with accuracy exactly 0. Per-example jobs draw seeds derived
// from (base.seed, point index, example index), so results are independent of
// thread count and identical across runs.
SweepCurve sweep(const LinearLogistic& m, const AttackSpec& base, const BinaryView& data,
                 const std::vector<double>& grid, bool stop_at_zero, int threads = 1);
SweepCurve sweep_multi(const MulticlassHooks& h, const AttackSpec& base,
                       const LabeledDataset& data, const std::vector<double>& grid,
                       bool stop_at_zero, int threads = 1);

template <typename T>
SweepCurve sweep(const ConvNetT<T>& m, const AttackSpec& base, const LabeledDataset& data,
                 const std::vector<double>& grid, bool stop_at_zero, int threads = 1) {
    return sweep_multi(multiclass_hooks(m), base, data, grid, stop_at_zero, threads);
}

// `attack,param,accuracy,mean_l2_distortion_pct,n,seed` rows, one per grid
// point; '#' header lines carry the manifest digest, the chance level, and
// the chance-crossing annotation.
std::string sweep_to_csv(const SweepCurve& c, const std::string& manifest_digest);
SweepCurve sweep_from_csv(const std::string& csv);

// ---------------------------------------------------------------------------
// Saliency-attack table: for each of the first n_sources images, one targeted
// greedy attack per non-true class; a row per budget gamma.

struct JsmaRow {
    long n_sources = 0;
    double gamma = 0.0;
    double asr = 0.0;          // successes / (n_sources * (classes-1))
    double pert_rate = 0.0;    // mean fraction of features changed, all attacks
    double s_pert_rate = 0.0;  // same, over successful attacks only
};
bool operator==(const JsmaRow& a, const JsmaRow& b);

struct JsmaTable {
    std::vector<JsmaRow> rows;
};
bool operator==(const JsmaTable& a, const JsmaTable& b);

// Sources are the first n_sources images in dataset order; originally
// misclassified images are attacked like any other. One greedy trajectory per
// (source, target) pair at the largest budget serves every gamma row.
JsmaTable jsma_table(const MulticlassHooks& h, const LabeledDataset& data, std::size_t n_sources,
                     const std::vector<double>& gammas, int threads = 1);

template <typename T>
JsmaTable jsma_table(const ConvNetT<T>& m, const LabeledDataset& data, std::size_t n_sources,
                     const std::vector<double>& gammas, int threads = 1) {
    return jsma_table(multiclass_hooks(m), data, n_sources, gammas, threads);
}

std::string jsma_table_to_csv(const JsmaTable& t, const std::string& manifest_digest);
JsmaTable jsma_table_from_csv(const std::string& csv);

// ---------------------------------------------------------------------------
// Per-example attack results (one attack configuration over a dataset).

struct AttackExampleRow {
    long index = 0;
    int label = 0;
    int prediction = 0;  // class predicted on the attacked input
    bool success = false;
    double l2_distortion_pct = 0.0;
    long features_changed = 0;
};
bool operator==(const AttackExampleRow& a, const AttackExampleRow& b);

std::string attack_rows_to_csv(const std::vector<AttackExampleRow>& rows,
                               const std::string& manifest_digest);
std::vector<AttackExampleRow> attack_rows_from_csv(const std::string& csv);

// Fooling-sweep curve export: eps,asr,margin rows.
std::string fooling_sweep_to_csv(const std::vector<FoolingSweepPoint>& pts,
                                 const std::string& manifest_digest);
std::vector<FoolingSweepPoint> fooling_sweep_from_csv(const std::string& csv);

// ---------------------------------------------------------------------------
// Weight and image exports.

// Grayscale weights ([d] for a square image, or [h,w]) go to PGM with the
// symmetric map v -> 128 + round(127*v/max|v|), so zero weights render as
// mid-gray. 4-d filter banks [kh,kw,ci,co] tile into a grid with 1-pixel
// black separators (bank-wide normalization): PGM when ci==1, RGB PNG when
// ci==3.
void export_weight_image(const Tensor& w, const std::string& path);

// Grid of [0,1] images, all [h,w] (PGM) or [h,w,3] (PNG); values clamp to
// [0,1] and map to 0..255.
void export_image_grid(const std::vector<Tensor>& images, const std::string& path);

// Number of first-layer filters whose largest absolute weight is below tau.
template <typename T>
int conv1_zero_filter_count(const ConvNetT<T>& m, double tau = 1e-4) {
    const std::size_t co = m.conv1.dim(3);
    const std::size_t per = m.conv1.size() / co;
    int count = 0;
    for (std::size_t f = 0; f < co; ++f) {
        double mx = 0.0;
        for (std::size_t i = 0; i < per; ++i)
            mx = std::max(mx, std::abs(double(m.conv1.data[i * co + f])));
        if (mx < tau) ++count;
    }
    return count;
}

}  // namespace robustlab
