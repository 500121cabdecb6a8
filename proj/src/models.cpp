#include "robustlab/models.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace robustlab {

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts are unsupported");

double scaled_softplus(double z, double s) {
    if (s < 0) throw ArgumentError("scaled_softplus: scale must be >= 0");
    return softplus_of_neg(s * z);
}

double predict(const LinearLogistic& m, const Tensor& x) {
    return matvec(m.w, x, m.b);
}

LinearLossGrads loss_and_grads(const LinearLogistic& m, const Tensor& x, int y) {
    if (y != 1 && y != -1)
        throw ArgumentError("binary label must be +1 or -1, got " + std::to_string(y));
    const double margin = y * predict(m, x);
    const double s = sigmoid_of_neg(margin);  // d loss / d (-margin)
    LinearLossGrads g;
    g.loss = softplus_of_neg(margin);
    const double dlogit = -double(y) * s;
    g.grad_w.shape = {m.w.size()};
    g.grad_w.data.resize(m.w.size());
    g.input_grad.shape = {m.w.size()};
    g.input_grad.data.resize(m.w.size());
    for (std::size_t i = 0; i < m.w.size(); ++i) {
        g.grad_w.data[i] = dlogit * x.data[i];
        g.input_grad.data[i] = dlogit * m.w.data[i];
    }
    g.grad_b = dlogit;
    return g;
}

double signed_distance(const LinearLogistic& m, const Tensor& x) {
    const double norm = l2_norm(m.w);
    if (norm == 0)
        throw ArgumentError("signed_distance: undefined for a zero weight vector");
    return matvec(m.w, x, m.b) / norm;
}

LinearLogistic expert_init(const BinaryView& train) {
    const std::size_t d = train.feature_count();
    std::size_t na = 0, nb = 0;
    std::vector<double> mean_a(d, 0.0), mean_b(d, 0.0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const double* img = train.images.data.data() + i * d;
        if (train.y[i] == +1) {
            ++na;
            for (std::size_t j = 0; j < d; ++j) mean_a[j] += img[j];
        } else {
            ++nb;
            for (std::size_t j = 0; j < d; ++j) mean_b[j] += img[j];
        }
    }
    if (na == 0 || nb == 0) throw ArgumentError("expert_init: a class is empty");
    LinearLogistic m;
    m.w.shape = {d};
    m.w.data.resize(d);
    for (std::size_t j = 0; j < d; ++j)
        m.w.data[j] = mean_a[j] / double(na) - mean_b[j] / double(nb);
    m.b = 0.0;
    return m;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[8] = {'R', 'L', 'M', 'O', 'D', 'E', 'L', '1'};

void put_u32(std::ofstream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_u64(std::ofstream& f, std::uint64_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_f64(std::ofstream& f, double v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_str(std::ofstream& f, const std::string& s) {
    put_u32(f, std::uint32_t(s.size()));
    f.write(s.data(), std::streamsize(s.size()));
}
void put_tensor(std::ofstream& f, const Tensor& t) {
    put_u32(f, std::uint32_t(t.ndim()));
    for (std::size_t d : t.shape) put_u64(f, d);
    f.write(reinterpret_cast<const char*>(t.data.data()),
            std::streamsize(t.data.size() * sizeof(double)));
}

std::uint32_t get_u32(std::ifstream& f, const std::string& path) {
    std::uint32_t v;
    if (!f.read(reinterpret_cast<char*>(&v), sizeof v))
        throw DataError(path + ": truncated model file");
    return v;
}
std::uint64_t get_u64(std::ifstream& f, const std::string& path) {
    std::uint64_t v;
    if (!f.read(reinterpret_cast<char*>(&v), sizeof v))
        throw DataError(path + ": truncated model file");
    return v;
}
double get_f64(std::ifstream& f, const std::string& path) {
    double v;
    if (!f.read(reinterpret_cast<char*>(&v), sizeof v))
        throw DataError(path + ": truncated model file");
    return v;
}
std::string get_str(std::ifstream& f, const std::string& path) {
    const std::uint32_t n = get_u32(f, path);
    if (n > (1u << 20)) throw DataError(path + ": implausible string length in model file");
    std::string s(n, '\0');
    if (n && !f.read(s.data(), n)) throw DataError(path + ": truncated model file");
    return s;
}
Tensor get_tensor(std::ifstream& f, const std::string& path) {
    const std::uint32_t nd = get_u32(f, path);
    if (nd > 8) throw DataError(path + ": implausible tensor rank in model file");
    std::vector<std::size_t> shape(nd);
    for (auto& d : shape) d = std::size_t(get_u64(f, path));
    Tensor t(shape);
    if (!f.read(reinterpret_cast<char*>(t.data.data()),
                std::streamsize(t.data.size() * sizeof(double))))
        throw DataError(path + ": truncated model file");
    return t;
}

}  // namespace

void save_model(const ModelFile& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path + " for writing");
    f.write(kMagic, sizeof kMagic);
    put_u32(f, m.kind == ModelFile::Linear ? 0 : 1);
    put_u32(f, m.loss.kind == LossFn::SoftplusBinary ? 0 : 1);
    put_f64(f, m.loss.smoothing);
    put_str(f, m.recipe);
    put_str(f, m.config_digest);
    if (m.kind == ModelFile::Linear) {
        put_u32(f, 2);
        put_tensor(f, m.linear.w);
        Tensor bias({1});
        bias.data[0] = m.linear.b;
        put_tensor(f, bias);
    } else {
        put_u32(f, 4);
        put_tensor(f, m.cnn.conv1);
        put_tensor(f, m.cnn.conv2);
        put_tensor(f, m.cnn.conv3);
        put_tensor(f, m.cnn.fc);
    }
    if (!f) throw DataError("write failed on " + path);
}

ModelFile load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path);
    char magic[8];
    if (!f.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw DataError(path + ": not a model file (bad magic)");
    ModelFile m;
    m.kind = get_u32(f, path) == 0 ? ModelFile::Linear : ModelFile::ConvNetKind;
    m.loss.kind = get_u32(f, path) == 0 ? LossFn::SoftplusBinary : LossFn::SoftmaxXent;
    m.loss.smoothing = get_f64(f, path);
    m.recipe = get_str(f, path);
    m.config_digest = get_str(f, path);
    const std::uint32_t ntensors = get_u32(f, path);
    if (m.kind == ModelFile::Linear) {
        if (ntensors != 2) throw DataError(path + ": linear model must hold 2 tensors");
        m.linear.w = get_tensor(f, path);
        Tensor bias = get_tensor(f, path);
        if (bias.size() != 1) throw DataError(path + ": malformed bias tensor");
        m.linear.b = bias.data[0];
    } else {
        if (ntensors != 4) throw DataError(path + ": convnet model must hold 4 tensors");
        m.cnn.conv1 = get_tensor(f, path);
        m.cnn.conv2 = get_tensor(f, path);
        m.cnn.conv3 = get_tensor(f, path);
        m.cnn.fc = get_tensor(f, path);
        const std::vector<std::vector<std::size_t>> want = {
            {8, 8, 3, 32}, {6, 6, 32, 64}, {5, 5, 64, 64}, {256, 10}};
        const TensorT<double>* got[] = {&m.cnn.conv1, &m.cnn.conv2, &m.cnn.conv3, &m.cnn.fc};
        for (int i = 0; i < 4; ++i)
            if (got[i]->shape != want[std::size_t(i)])
                throw DataError(path + ": convnet layer " + std::to_string(i + 1) +
                                " has an unexpected shape");
    }
    return m;
}

}  // namespace robustlab
