#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "robustlab/tensor.hpp"

namespace robustlab {

// Images in [0,1], shape [n, h, w, c] (or [n, d] for synthetic flat data),
// integer labels in [0, k).
struct LabeledDataset {
    Tensor images;
    std::vector<int> labels;
    std::vector<std::string> class_names;

    std::size_t size() const { return labels.size(); }
    std::size_t feature_count() const { return labels.empty() ? 0 : images.size() / labels.size(); }
    // Copy of example i with the per-example shape (leading axis dropped).
    Tensor example(std::size_t i) const;
};

// Two-class slice of a dataset with labels mapped to y ∈ {+1, -1};
// class_a is +1.
struct BinaryView {
    Tensor images;
    std::vector<int> y;
    int class_a = 0, class_b = 0;

    std::size_t size() const { return y.size(); }
    std::size_t feature_count() const { return y.empty() ? 0 : images.size() / y.size(); }
    Tensor example(std::size_t i) const;
};

// IDX-format MNIST pair (big-endian magic 2051 for images, 2049 for labels);
// pixels come out as u8/255.
LabeledDataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// CIFAR-10 binary batches: 3073-byte records, 1 label byte + three 32x32
// planes (R, G, B). Output is [n,32,32,3] with pixels /255.
LabeledDataset load_cifar10_bin(const std::vector<std::string>& paths);

// Writes records in the same 3073-byte binary format (used by round-trip
// tests and fixture generation). Pixels are quantized back to u8 by rounding.
void save_cifar10_bin(const LabeledDataset& ds, const std::string& path);

BinaryView binary_filter(const LabeledDataset& ds, int class_a, int class_b);

// Two isotropic Gaussian blobs (sigma 0.1) offset by ±(separation/2)·u from
// the range midpoint along a seeded random unit direction u, clipped to [0,1].
// Class +1 sits at the +u offset. n examples total, split evenly.
BinaryView make_synthetic(std::size_t n, std::size_t d, double separation, std::uint64_t seed);

// $ROBUSTLAB_DATA_DIR, or "." when unset.
std::string default_data_dir();

// Conventional file locations under a data root.
std::string mnist_images_path(const std::string& root, bool train);
std::string mnist_labels_path(const std::string& root, bool train);
std::vector<std::string> cifar10_train_paths(const std::string& root);
std::vector<std::string> cifar10_test_paths(const std::string& root);

// First n examples (dataset order).
LabeledDataset subset(const LabeledDataset& ds, std::size_t n);

}  // namespace robustlab
