#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "robustlab/dataio.hpp"
#include "robustlab/errors.hpp"
#include "testutil.hpp"

namespace rl = robustlab;
using rl::Tensor;

namespace {

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    REQUIRE(bool(f));
}

void push_be32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back((v >> 24) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back(v & 0xff);
}

std::vector<unsigned char> idx_images(std::uint32_t n, std::uint32_t h, std::uint32_t w,
                                      const std::vector<unsigned char>& pixels,
                                      std::uint32_t magic = 2051) {
    std::vector<unsigned char> out;
    push_be32(out, magic);
    push_be32(out, n);
    push_be32(out, h);
    push_be32(out, w);
    out.insert(out.end(), pixels.begin(), pixels.end());
    return out;
}

std::vector<unsigned char> idx_labels(const std::vector<unsigned char>& labels,
                                      std::uint32_t magic = 2049) {
    std::vector<unsigned char> out;
    push_be32(out, magic);
    push_be32(out, std::uint32_t(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

const std::string kTmp = "/tmp/rl_dataio_";

}  // namespace

TEST_CASE("load_mnist_idx parses a fabricated pair and scales by 255") {
    std::vector<unsigned char> pixels(12);
    for (std::size_t i = 0; i < 6; ++i) pixels[i] = static_cast<unsigned char>(i);
    for (std::size_t i = 0; i < 6; ++i) pixels[6 + i] = static_cast<unsigned char>(250 + i);
    write_bytes(kTmp + "img", idx_images(2, 2, 3, pixels));
    write_bytes(kTmp + "lbl", idx_labels({3, 7}));

    auto ds = rl::load_mnist_idx(kTmp + "img", kTmp + "lbl");
    CHECK(ds.size() == 2);
    CHECK(ds.images.shape == std::vector<std::size_t>{2, 2, 3, 1});
    CHECK(ds.feature_count() == 6);
    CHECK(ds.labels == std::vector<int>{3, 7});
    CHECK(ds.images.data[0] == 0.0);
    CHECK(ds.images.data[5] == doctest::Approx(5.0 / 255.0).epsilon(1e-15));
    CHECK(ds.images.data[6] == doctest::Approx(250.0 / 255.0).epsilon(1e-15));
    CHECK(ds.images.data[11] == 1.0);
    CHECK(ds.class_names.size() == 10);

    auto ex = ds.example(1);
    CHECK(ex.shape == std::vector<std::size_t>{2, 3, 1});
    CHECK(ex.data[0] == doctest::Approx(250.0 / 255.0));

    write_bytes(kTmp + "img0", idx_images(2, 2, 3, std::vector<unsigned char>(12, 0)));
    auto zeros = rl::load_mnist_idx(kTmp + "img0", kTmp + "lbl");
    for (double v : zeros.images.data) CHECK(v == 0.0);
}

TEST_CASE("load_mnist_idx rejects corrupt files") {
    const std::vector<unsigned char> pixels(12, 1);
    write_bytes(kTmp + "img", idx_images(2, 2, 3, pixels));
    write_bytes(kTmp + "lbl", idx_labels({3, 7}));

    write_bytes(kTmp + "badmagic", idx_images(2, 2, 3, pixels, 2052));
    CHECK_THROWS_AS(rl::load_mnist_idx(kTmp + "badmagic", kTmp + "lbl"), rl::DataError);

    write_bytes(kTmp + "lblmagic", idx_labels({3, 7}, 2050));
    CHECK_THROWS_AS(rl::load_mnist_idx(kTmp + "img", kTmp + "lblmagic"), rl::DataError);

    auto truncated = idx_images(2, 2, 3, pixels);
    truncated.pop_back();
    write_bytes(kTmp + "trunc", truncated);
    CHECK_THROWS_AS(rl::load_mnist_idx(kTmp + "trunc", kTmp + "lbl"), rl::DataError);

    write_bytes(kTmp + "lbl3", idx_labels({3, 7, 1}));
    CHECK_THROWS_AS(rl::load_mnist_idx(kTmp + "img", kTmp + "lbl3"), rl::DataError);

    write_bytes(kTmp + "lblrange", idx_labels({3, 10}));
    CHECK_THROWS_AS(rl::load_mnist_idx(kTmp + "img", kTmp + "lblrange"), rl::DataError);

    CHECK_THROWS_AS(rl::load_mnist_idx(kTmp + "missing_file", kTmp + "lbl"), rl::DataError);
}

TEST_CASE("load_cifar10_bin deinterleaves planar RGB") {
    std::vector<unsigned char> rec(3073, 0);
    rec[0] = 7;
    std::fill(rec.begin() + 1, rec.begin() + 1025, static_cast<unsigned char>(10));
    std::fill(rec.begin() + 1025, rec.begin() + 2049, static_cast<unsigned char>(20));
    std::fill(rec.begin() + 2049, rec.begin() + 3073, static_cast<unsigned char>(30));
    rec[1 + 5] = 100;  // R channel of pixel (0, 5)
    write_bytes(kTmp + "cifar", rec);

    auto ds = rl::load_cifar10_bin({kTmp + "cifar"});
    CHECK(ds.size() == 1);
    CHECK(ds.images.shape == std::vector<std::size_t>{1, 32, 32, 3});
    CHECK(ds.labels[0] == 7);
    CHECK(ds.class_names[7] == "horse");
    CHECK(ds.images.at4(0, 0, 0, 0) == doctest::Approx(10.0 / 255.0));
    CHECK(ds.images.at4(0, 0, 0, 1) == doctest::Approx(20.0 / 255.0));
    CHECK(ds.images.at4(0, 0, 0, 2) == doctest::Approx(30.0 / 255.0));
    CHECK(ds.images.at4(0, 0, 5, 0) == doctest::Approx(100.0 / 255.0));
    CHECK(ds.images.at4(0, 0, 5, 1) == doctest::Approx(20.0 / 255.0));

    std::vector<unsigned char> ones(3073, 255);
    ones[0] = 0;
    write_bytes(kTmp + "cifar1", ones);
    auto full = rl::load_cifar10_bin({kTmp + "cifar1"});
    for (double v : full.images.data) CHECK(v == 1.0);

    // Two files concatenate in order.
    auto both = rl::load_cifar10_bin({kTmp + "cifar", kTmp + "cifar1"});
    CHECK(both.size() == 2);
    CHECK(both.labels == std::vector<int>{7, 0});
}

TEST_CASE("cifar10 save/load round trip and corrupt inputs") {
    rl::LabeledDataset ds;
    ds.images = Tensor({3, 32, 32, 3});
    for (std::size_t i = 0; i < ds.images.size(); ++i)
        ds.images.data[i] = double((i * 37) % 256) / 255.0;
    ds.labels = {7, 0, 9};
    ds.class_names = {"a"};
    rl::save_cifar10_bin(ds, kTmp + "rt");
    auto back = rl::load_cifar10_bin({kTmp + "rt"});
    CHECK(back.labels == ds.labels);
    REQUIRE(back.images.size() == ds.images.size());
    for (std::size_t i = 0; i < ds.images.size(); ++i)
        CHECK(back.images.data[i] == ds.images.data[i]);

    rl::LabeledDataset flat;
    flat.images = Tensor({2, 16});
    flat.labels = {0, 1};
    CHECK_THROWS_AS(rl::save_cifar10_bin(flat, kTmp + "bad"), rl::DimensionError);

    write_bytes(kTmp + "short", std::vector<unsigned char>(3072, 0));
    CHECK_THROWS_AS(rl::load_cifar10_bin({kTmp + "short"}), rl::DataError);

    std::vector<unsigned char> badlabel(3073, 0);
    badlabel[0] = 12;
    write_bytes(kTmp + "badlabel", badlabel);
    CHECK_THROWS_AS(rl::load_cifar10_bin({kTmp + "badlabel"}), rl::DataError);
}

TEST_CASE("binary_filter keeps the two classes in order with mapped labels") {
    rl::LabeledDataset ds;
    ds.images = Tensor({5, 2});
    for (std::size_t i = 0; i < 10; ++i) ds.images.data[i] = double(i);
    ds.labels = {3, 7, 1, 3, 7};

    auto v = rl::binary_filter(ds, 3, 7);
    CHECK(v.size() == 4);
    CHECK(v.class_a == 3);
    CHECK(v.class_b == 7);
    CHECK(v.y == std::vector<int>{+1, -1, +1, -1});
    CHECK(v.images.shape == std::vector<std::size_t>{4, 2});
    CHECK(v.images.data == std::vector<double>{0, 1, 2, 3, 6, 7, 8, 9});

    auto swapped = rl::binary_filter(ds, 7, 3);
    CHECK(swapped.y == std::vector<int>{-1, +1, -1, +1});

    CHECK_THROWS_AS(rl::binary_filter(ds, 3, 3), rl::ArgumentError);
    CHECK_THROWS_AS(rl::binary_filter(ds, 3, 5), rl::ArgumentError);
    CHECK_THROWS_AS(rl::binary_filter(ds, 5, 3), rl::ArgumentError);
}

TEST_CASE("real MNIST loads with known sizes and class counts") {
    const std::string root = testutil::test_data_dir();
    auto test = rl::load_mnist_idx(rl::mnist_images_path(root, false),
                                   rl::mnist_labels_path(root, false));
    CHECK(test.size() == 10000);
    CHECK(test.images.shape == std::vector<std::size_t>{10000, 28, 28, 1});
    const double maxpix = *std::max_element(test.images.data.begin(), test.images.data.end());
    const double minpix = *std::min_element(test.images.data.begin(), test.images.data.end());
    CHECK(maxpix == 1.0);
    CHECK(minpix == 0.0);

    auto v = rl::binary_filter(test, 3, 7);
    CHECK(v.size() == 2038);
    CHECK(std::count(v.y.begin(), v.y.end(), +1) == 1010);
    CHECK(std::count(v.y.begin(), v.y.end(), -1) == 1028);

    auto train = rl::load_mnist_idx(rl::mnist_images_path(root, true),
                                    rl::mnist_labels_path(root, true));
    CHECK(train.size() == 60000);
    auto tv = rl::binary_filter(train, 3, 7);
    CHECK(tv.size() == 12396);
    CHECK(std::count(tv.y.begin(), tv.y.end(), +1) == 6131);
}

TEST_CASE("real CIFAR-10 batches load") {
    const std::string root = testutil::test_data_dir();
    auto test = rl::load_cifar10_bin(rl::cifar10_test_paths(root));
    CHECK(test.size() == 10000);
    CHECK(test.images.shape == std::vector<std::size_t>{10000, 32, 32, 3});
    for (int lbl : test.labels) {
        CHECK(lbl >= 0);
        CHECK(lbl <= 9);
    }
    // Every class shows up in the test batch.
    std::vector<int> counts(10, 0);
    for (int lbl : test.labels) ++counts[std::size_t(lbl)];
    for (int c : counts) CHECK(c == 1000);
}

TEST_CASE("make_synthetic is deterministic, clipped, and separable") {
    auto a = rl::make_synthetic(200, 10, 0.8, 42);
    auto b = rl::make_synthetic(200, 10, 0.8, 42);
    CHECK(a.images.data == b.images.data);
    CHECK(a.y == b.y);

    auto c = rl::make_synthetic(200, 10, 0.8, 43);
    CHECK(a.images.data != c.images.data);

    CHECK(a.size() == 200);
    CHECK(a.feature_count() == 10);
    CHECK(a.example(0).shape == std::vector<std::size_t>{10});
    for (std::size_t i = 0; i < 100; ++i) CHECK(a.y[i] == +1);
    for (std::size_t i = 100; i < 200; ++i) CHECK(a.y[i] == -1);
    for (double v : a.images.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    // Separation 0.8 is 8 sigma between the blob centers; the class-mean
    // direction should classify nearly everything.
    const std::size_t d = 10;
    std::vector<double> mean_pos(d, 0.0), mean_neg(d, 0.0);
    for (std::size_t i = 0; i < 200; ++i)
        for (std::size_t j = 0; j < d; ++j)
            (a.y[i] > 0 ? mean_pos[j] : mean_neg[j]) += a.images.data[i * d + j] / 100.0;
    int correct = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < d; ++j)
            z += (mean_pos[j] - mean_neg[j]) *
                 (a.images.data[i * d + j] - 0.5 * (mean_pos[j] + mean_neg[j]));
        if ((z >= 0 ? +1 : -1) == a.y[i]) ++correct;
    }
    CHECK(double(correct) / double(a.size()) >= 0.99);

    CHECK_THROWS_AS(rl::make_synthetic(201, 10, 0.8, 1), rl::ArgumentError);
    CHECK_THROWS_AS(rl::make_synthetic(200, 0, 0.8, 1), rl::ArgumentError);
}

TEST_CASE("subset takes a prefix and checks bounds") {
    rl::LabeledDataset ds;
    ds.images = Tensor({4, 3});
    for (std::size_t i = 0; i < 12; ++i) ds.images.data[i] = double(i);
    ds.labels = {1, 2, 3, 4};
    ds.class_names = {"x", "y"};

    auto s = rl::subset(ds, 2);
    CHECK(s.size() == 2);
    CHECK(s.images.shape == std::vector<std::size_t>{2, 3});
    CHECK(s.images.data == std::vector<double>{0, 1, 2, 3, 4, 5});
    CHECK(s.labels == std::vector<int>{1, 2});
    CHECK(s.class_names == ds.class_names);

    CHECK(rl::subset(ds, 0).size() == 0);
    CHECK(rl::subset(ds, 4).size() == 4);
    CHECK_THROWS_AS(rl::subset(ds, 5), rl::ArgumentError);
}

TEST_CASE("data paths and the data-dir environment override") {
    CHECK(rl::mnist_images_path("/data", false) == "/data/mnist/t10k-images-idx3-ubyte");
    CHECK(rl::mnist_images_path("/data", true) == "/data/mnist/train-images-idx3-ubyte");
    CHECK(rl::mnist_labels_path("/data", false) == "/data/mnist/t10k-labels-idx1-ubyte");
    CHECK(rl::mnist_labels_path("/data", true) == "/data/mnist/train-labels-idx1-ubyte");

    auto train = rl::cifar10_train_paths("/data");
    REQUIRE(train.size() == 5);
    CHECK(train[0] == "/data/cifar10/data_batch_1.bin");
    CHECK(train[4] == "/data/cifar10/data_batch_5.bin");
    auto test = rl::cifar10_test_paths("/data");
    REQUIRE(test.size() == 1);
    CHECK(test[0] == "/data/cifar10/test_batch.bin");

    const char* prev = std::getenv("ROBUSTLAB_DATA_DIR");
    const std::string saved = prev ? prev : "";
    setenv("ROBUSTLAB_DATA_DIR", "/elsewhere", 1);
    CHECK(rl::default_data_dir() == "/elsewhere");
    unsetenv("ROBUSTLAB_DATA_DIR");
    CHECK(rl::default_data_dir() == ".");
    if (prev) setenv("ROBUSTLAB_DATA_DIR", saved.c_str(), 1);
}
