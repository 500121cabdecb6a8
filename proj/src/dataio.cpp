#include "robustlab/dataio.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "robustlab/rng.hpp"

namespace robustlab {

namespace {

std::vector<unsigned char> read_all(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path);
    f.seekg(0, std::ios::end);
    const auto len = f.tellg();
    f.seekg(0);
    std::vector<unsigned char> bytes(static_cast<std::size_t>(len));
    if (len > 0) f.read(reinterpret_cast<char*>(bytes.data()), len);
    if (!f) throw DataError("short read on " + path);
    return bytes;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off, const std::string& path) {
    if (off + 4 > b.size())
        throw DataError(path + ": truncated at byte offset " + std::to_string(off) +
                        " (wanted a 4-byte big-endian field)");
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

}  // namespace

Tensor LabeledDataset::example(std::size_t i) const {
    const std::size_t d = feature_count();
    Tensor out;
    out.shape.assign(images.shape.begin() + 1, images.shape.end());
    out.data.assign(images.data.begin() + i * d, images.data.begin() + (i + 1) * d);
    return out;
}

Tensor BinaryView::example(std::size_t i) const {
    const std::size_t d = feature_count();
    Tensor out;
    out.shape.assign(images.shape.begin() + 1, images.shape.end());
    out.data.assign(images.data.begin() + i * d, images.data.begin() + (i + 1) * d);
    return out;
}

LabeledDataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    const auto ibytes = read_all(images_path);
    const auto lbytes = read_all(labels_path);

    const std::uint32_t imagic = be32(ibytes, 0, images_path);
    if (imagic != 2051)
        throw DataError(images_path + ": bad IDX magic " + std::to_string(imagic) +
                        ", expected 2051");
    const std::uint32_t n = be32(ibytes, 4, images_path);
    const std::uint32_t h = be32(ibytes, 8, images_path);
    const std::uint32_t w = be32(ibytes, 12, images_path);
    const std::size_t want = 16 + std::size_t(n) * h * w;
    if (ibytes.size() < want)
        throw DataError(images_path + ": truncated at byte offset " +
                        std::to_string(ibytes.size()) + ", header promises " +
                        std::to_string(want) + " bytes");

    const std::uint32_t lmagic = be32(lbytes, 0, labels_path);
    if (lmagic != 2049)
        throw DataError(labels_path + ": bad IDX magic " + std::to_string(lmagic) +
                        ", expected 2049");
    const std::uint32_t ln = be32(lbytes, 4, labels_path);
    if (ln != n)
        throw DataError("IDX count mismatch: " + images_path + " has " + std::to_string(n) +
                        " images but " + labels_path + " has " + std::to_string(ln) + " labels");
    if (lbytes.size() < 8 + std::size_t(n))
        throw DataError(labels_path + ": truncated at byte offset " +
                        std::to_string(lbytes.size()));

    LabeledDataset ds;
    ds.images = Tensor({n, h, w, 1});
    for (std::size_t i = 0; i < std::size_t(n) * h * w; ++i)
        ds.images.data[i] = double(ibytes[16 + i]) / 255.0;
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char v = lbytes[8 + i];
        if (v > 9)
            throw DataError(labels_path + ": label " + std::to_string(int(v)) +
                            " out of range at index " + std::to_string(i));
        ds.labels[i] = int(v);
    }
    ds.class_names = {"0", "1", "2", "3", "4", "5", "6", "7", "8", "9"};
    return ds;
}

LabeledDataset load_cifar10_bin(const std::vector<std::string>& paths) {
    constexpr std::size_t kRecord = 3073;
    constexpr std::size_t kPlane = 32 * 32;
    std::vector<unsigned char> all;
    for (const auto& p : paths) {
        auto b = read_all(p);
        if (b.size() % kRecord != 0)
            throw DataError(p + ": length " + std::to_string(b.size()) +
                            " is not a multiple of the 3073-byte record size");
        all.insert(all.end(), b.begin(), b.end());
    }
    const std::size_t n = all.size() / kRecord;
    if (n == 0) throw DataError("cifar10: no records in the given files");

    LabeledDataset ds;
    ds.images = Tensor({n, 32, 32, 3});
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char* rec = all.data() + i * kRecord;
        if (rec[0] > 9)
            throw DataError("cifar10: label " + std::to_string(int(rec[0])) +
                            " out of range in record " + std::to_string(i));
        ds.labels[i] = int(rec[0]);
        // Planar RGB -> interleaved h,w,c.
        double* img = ds.images.data.data() + i * kPlane * 3;
        for (std::size_t px = 0; px < kPlane; ++px) {
            img[px * 3 + 0] = double(rec[1 + px]) / 255.0;
            img[px * 3 + 1] = double(rec[1 + kPlane + px]) / 255.0;
            img[px * 3 + 2] = double(rec[1 + 2 * kPlane + px]) / 255.0;
        }
    }
    ds.class_names = {"airplane", "automobile", "bird",  "cat",  "deer",
                      "dog",      "frog",       "horse", "ship", "truck"};
    return ds;
}

void save_cifar10_bin(const LabeledDataset& ds, const std::string& path) {
    constexpr std::size_t kPlane = 32 * 32;
    if (ds.images.ndim() != 4 || ds.images.dim(1) != 32 || ds.images.dim(2) != 32 ||
        ds.images.dim(3) != 3)
        throw DimensionError("save_cifar10_bin: dataset is not [n,32,32,3]");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path + " for writing");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        unsigned char rec[3073];
        rec[0] = static_cast<unsigned char>(ds.labels[i]);
        const double* img = ds.images.data.data() + i * kPlane * 3;
        for (std::size_t px = 0; px < kPlane; ++px) {
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const double v = img[px * 3 + ch] * 255.0;
                rec[1 + ch * kPlane + px] =
                    static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 255.0)));
            }
        }
        f.write(reinterpret_cast<const char*>(rec), sizeof rec);
    }
    if (!f) throw DataError("write failed on " + path);
}

BinaryView binary_filter(const LabeledDataset& ds, int class_a, int class_b) {
    if (class_a == class_b)
        throw ArgumentError("binary_filter: the two classes must differ, got " +
                            std::to_string(class_a) + " twice");
    const std::size_t d = ds.feature_count();
    BinaryView v;
    v.class_a = class_a;
    v.class_b = class_b;
    std::vector<double> images;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] != class_a && ds.labels[i] != class_b) continue;
        images.insert(images.end(), ds.images.data.begin() + i * d,
                      ds.images.data.begin() + (i + 1) * d);
        v.y.push_back(ds.labels[i] == class_a ? +1 : -1);
    }
    const std::size_t na = std::size_t(std::count(v.y.begin(), v.y.end(), +1));
    if (na == 0) throw ArgumentError("binary_filter: class " + std::to_string(class_a) + " is empty");
    if (na == v.y.size())
        throw ArgumentError("binary_filter: class " + std::to_string(class_b) + " is empty");
    std::vector<std::size_t> shape = ds.images.shape;
    shape[0] = v.y.size();
    v.images = Tensor::from(std::move(shape), std::move(images));
    return v;
}

BinaryView make_synthetic(std::size_t n, std::size_t d, double separation, std::uint64_t seed) {
    if (n % 2 != 0) throw ArgumentError("make_synthetic: n must be even");
    if (d < 1) throw ArgumentError("make_synthetic: d must be >= 1");
    constexpr double kSigma = 0.1;
    Rng rng(derive_seed(seed, 0));

    std::vector<double> u(d);
    double norm = 0;
    do {
        norm = 0;
        for (auto& v : u) {
            v = rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
    } while (norm == 0);
    for (auto& v : u) v /= norm;

    BinaryView view;
    view.class_a = +1;
    view.class_b = -1;
    view.images = Tensor({n, d});
    view.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = i < n / 2 ? +1 : -1;
        view.y[i] = y;
        Rng ex(derive_seed(seed, i + 1));
        for (std::size_t j = 0; j < d; ++j) {
            const double mean = 0.5 + y * (separation / 2.0) * u[j];
            view.images.data[i * d + j] = std::clamp(mean + kSigma * ex.normal(), 0.0, 1.0);
        }
    }
    return view;
}

std::string default_data_dir() {
    const char* env = std::getenv("ROBUSTLAB_DATA_DIR");
    return env && *env ? std::string(env) : std::string(".");
}

std::string mnist_images_path(const std::string& root, bool train) {
    return root + "/mnist/" + (train ? "train-images-idx3-ubyte" : "t10k-images-idx3-ubyte");
}

std::string mnist_labels_path(const std::string& root, bool train) {
    return root + "/mnist/" + (train ? "train-labels-idx1-ubyte" : "t10k-labels-idx1-ubyte");
}

std::vector<std::string> cifar10_train_paths(const std::string& root) {
    std::vector<std::string> v;
    for (int i = 1; i <= 5; ++i)
        v.push_back(root + "/cifar10/data_batch_" + std::to_string(i) + ".bin");
    return v;
}

std::vector<std::string> cifar10_test_paths(const std::string& root) {
    return {root + "/cifar10/test_batch.bin"};
}

LabeledDataset subset(const LabeledDataset& ds, std::size_t n) {
    if (n > ds.size()) throw ArgumentError("subset: asked for more examples than the dataset has");
    const std::size_t d = ds.feature_count();
    LabeledDataset out;
    std::vector<std::size_t> shape = ds.images.shape;
    shape[0] = n;
    out.images = Tensor::from(std::move(shape),
                              std::vector<double>(ds.images.data.begin(),
                                                  ds.images.data.begin() + n * d));
    out.labels.assign(ds.labels.begin(), ds.labels.begin() + n);
    out.class_names = ds.class_names;
    return out;
}

}  // namespace robustlab
