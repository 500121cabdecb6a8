#include "robustlab/evalsweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "robustlab/errors.hpp"
#include "robustlab/parallel.hpp"
#include "robustlab/rng.hpp"

namespace robustlab {

double accuracy(const LinearLogistic& m, const BinaryView& data) {
    if (data.size() == 0) throw ArgumentError("accuracy needs a non-empty dataset");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double z = predict(m, data.example(i));
        const int pred = z >= 0 ? 1 : -1;
        if (pred == data.y[i]) ++correct;
    }
    return double(correct) / double(data.size());
}

bool operator==(const SweepPoint& a, const SweepPoint& b) {
    return a.param == b.param && a.accuracy == b.accuracy &&
           a.mean_l2_distortion_pct == b.mean_l2_distortion_pct && a.n == b.n;
}

bool operator==(const SweepCurve& a, const SweepCurve& b) {
    return a.attack == b.attack && a.seed == b.seed && a.chance == b.chance &&
           a.points == b.points;
}

std::optional<double> chance_crossing(const SweepCurve& c) {
    for (const auto& p : c.points)
        if (p.accuracy < c.chance) return p.param;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Sweep core.

namespace {

void check_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw ArgumentError("sweep grid is empty");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw ArgumentError("sweep grid must be strictly increasing");
}

// One attack + evaluation per example; outcomes land in per-example slots and
// are reduced in index order.
template <typename RunFn>
SweepPoint evaluate_point(double param, std::size_t n, int threads, RunFn&& run_one) {
    std::vector<char> correct(n, 0);
    std::vector<double> dist(n, 0.0);
    const std::size_t chunk = 32;
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    parallel_chunks(nchunks, threads, [&](std::size_t c) {
        const std::size_t lo = c * chunk, hi = std::min(lo + chunk, n);
        for (std::size_t i = lo; i < hi; ++i) {
            bool ok = false;
            double d2 = 0.0;
            run_one(i, ok, d2);
            correct[i] = ok ? 1 : 0;
            dist[i] = d2;
        }
    });
    SweepPoint pt;
    pt.param = param;
    pt.n = long(n);
    std::size_t ncorrect = 0, nsuccess = 0;
    double dist_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (correct[i]) {
            ++ncorrect;
        } else {
            ++nsuccess;
            dist_sum += dist[i];
        }
    }
    pt.accuracy = double(ncorrect) / double(n);
    pt.mean_l2_distortion_pct = nsuccess ? 100.0 * dist_sum / double(nsuccess) : 0.0;
    return pt;
}

AttackResult run_linear_attack(const LinearLogistic& m, const AttackSpec& s, double param,
                               const Tensor& x, int y, std::uint64_t job_seed) {
    switch (s.family) {
        case AttackSpec::FGSM:
            return fgsm(m, x, y, param, s.clip);
        case AttackSpec::FastGradL2:
            return fast_grad_l2(m, x, y, param, s.clip);
        case AttackSpec::ScaledClippedFGL2:
            return scaled_clipped_fgl2(m, x, y, param, s.scale);
        case AttackSpec::PGD:
            return pgd(m, x, y, param, s.steps, s.step_size, s.random_start, job_seed);
        case AttackSpec::PixelSwap:
            return pixel_swap(x, param, job_seed);
        case AttackSpec::TopWeightPixel:
            return top_weight_pixel(m, x, y, int(std::lround(param)));
        default:
            throw ArgumentError(std::string("attack '") + attack_family_name(s.family) +
                                "' has no parameter sweep on the linear model");
    }
}

AttackResult run_multi_attack(const MulticlassHooks& h, const AttackSpec& s, double param,
                              const Tensor& x, int label, std::uint64_t job_seed) {
    switch (s.family) {
        case AttackSpec::FGSM:
            return fgsm_multi(h, x, label, param, s.clip);
        case AttackSpec::FastGradL2:
            return fast_grad_l2_multi(h, x, label, param, s.clip);
        case AttackSpec::PGD:
            return pgd_multi(h, x, label, param, s.steps, s.step_size, s.random_start, job_seed);
        case AttackSpec::PixelSwap:
            return pixel_swap(x, param, job_seed);
        default:
            throw ArgumentError(std::string("attack '") + attack_family_name(s.family) +
                                "' has no parameter sweep for multiclass models");
    }
}

int argmax_of(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < v.size(); ++j)
        if (v[j] > v[best]) best = j;
    return int(best);
}

}  // namespace

SweepCurve sweep(const LinearLogistic& m, const AttackSpec& base, const BinaryView& data,
                 const std::vector<double>& grid, bool stop_at_zero, int threads) {
    check_grid(grid);
    const std::size_t n = data.size();
    if (n == 0) throw ArgumentError("sweep needs a non-empty dataset");
    SweepCurve curve;
    curve.attack = attack_family_name(base.family);
    curve.seed = base.seed;
    curve.chance = 0.5;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const double param = grid[gi];
        const std::uint64_t point_seed = derive_seed(base.seed, gi);
        SweepPoint pt = evaluate_point(param, n, threads, [&](std::size_t i, bool& ok, double& d2) {
            const Tensor x = data.example(i);
            const int y = data.y[i];
            AttackResult r =
                run_linear_attack(m, base, param, x, y, derive_seed(point_seed, i));
            const double z = predict(m, r.x_adv);
            ok = (z >= 0 ? 1 : -1) == y;
            d2 = r.l2_distortion;
        });
        curve.points.push_back(pt);
        if (stop_at_zero && pt.accuracy == 0.0) break;
    }
    return curve;
}

SweepCurve sweep_multi(const MulticlassHooks& h, const AttackSpec& base,
                       const LabeledDataset& data, const std::vector<double>& grid,
                       bool stop_at_zero, int threads) {
    check_grid(grid);
    const std::size_t n = data.size();
    if (n == 0) throw ArgumentError("sweep needs a non-empty dataset");
    SweepCurve curve;
    curve.attack = attack_family_name(base.family);
    curve.seed = base.seed;
    curve.chance = 1.0 / double(h.num_classes);
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const double param = grid[gi];
        const std::uint64_t point_seed = derive_seed(base.seed, gi);
        SweepPoint pt = evaluate_point(param, n, threads, [&](std::size_t i, bool& ok, double& d2) {
            const Tensor x = data.example(i);
            const int label = data.labels[i];
            AttackResult r = run_multi_attack(h, base, param, x, label, derive_seed(point_seed, i));
            ok = argmax_of(h.probs(r.x_adv)) == label;
            d2 = r.l2_distortion;
        });
        curve.points.push_back(pt);
        if (stop_at_zero && pt.accuracy == 0.0) break;
    }
    return curve;
}

// ---------------------------------------------------------------------------
// CSV plumbing.

namespace {

std::vector<std::string> split_fields(const std::string& line, std::size_t expect) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        if (comma == std::string::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
    if (out.size() != expect)
        throw DataError("expected " + std::to_string(expect) + " fields, got " +
                        std::to_string(out.size()) + " in: " + line);
    return out;
}

double parse_double(const std::string& s, const std::string& line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw DataError("");
        return v;
    } catch (const std::exception&) {
        throw DataError("unparseable number '" + s + "' in: " + line);
    }
}

long parse_long(const std::string& s, const std::string& line) {
    try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size()) throw DataError("");
        return v;
    } catch (const std::exception&) {
        throw DataError("unparseable integer '" + s + "' in: " + line);
    }
}

std::uint64_t parse_u64(const std::string& s, const std::string& line) {
    try {
        std::size_t used = 0;
        // stoull would wrap "-1" around instead of failing
        if (!s.empty() && s[0] == '-') throw DataError("");
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size()) throw DataError("");
        return v;
    } catch (const std::exception&) {
        throw DataError("unparseable seed '" + s + "' in: " + line);
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Yields data lines (comments and blanks skipped); hands '#'-comments to the
// given callback for headers that carry state.
template <typename CommentFn, typename RowFn>
void for_csv_lines(const std::string& csv, CommentFn&& on_comment, RowFn&& on_row) {
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            on_comment(line);
            continue;
        }
        on_row(line);
    }
}

}  // namespace

std::string sweep_to_csv(const SweepCurve& c, const std::string& manifest_digest) {
    std::string out = "# manifest_digest=" + manifest_digest + "\n";
    out += "# chance=" + fmt(c.chance) + "\n";
    const auto crossing = chance_crossing(c);
    out += "# crosses_chance_at=" + (crossing ? fmt(*crossing) : std::string("never")) + "\n";
    out += "# distortion_metric=100*||delta||^2/d (mean squared per-feature perturbation)\n";
    out += "attack,param,accuracy,mean_l2_distortion_pct,n,seed\n";
    char seedbuf[32];
    std::snprintf(seedbuf, sizeof seedbuf, "%llu", (unsigned long long)c.seed);
    for (const auto& p : c.points)
        out += c.attack + "," + fmt(p.param) + "," + fmt(p.accuracy) + "," +
               fmt(p.mean_l2_distortion_pct) + "," + std::to_string(p.n) + "," + seedbuf + "\n";
    return out;
}

SweepCurve sweep_from_csv(const std::string& csv) {
    SweepCurve c;
    bool have_row = false;
    for_csv_lines(
        csv,
        [&](const std::string& line) {
            if (line.rfind("# chance=", 0) == 0) c.chance = parse_double(line.substr(9), line);
        },
        [&](const std::string& line) {
            if (line.rfind("attack,", 0) == 0) return;  // column header
            auto f = split_fields(line, 6);
            if (!have_row) {
                c.attack = f[0];
                c.seed = parse_u64(f[5], line);
                have_row = true;
            } else if (f[0] != c.attack) {
                throw DataError("mixed attack names in one sweep CSV: " + line);
            }
            SweepPoint p;
            p.param = parse_double(f[1], line);
            p.accuracy = parse_double(f[2], line);
            p.mean_l2_distortion_pct = parse_double(f[3], line);
            p.n = parse_long(f[4], line);
            c.points.push_back(p);
        });
    if (!have_row) throw DataError("sweep CSV has no data rows");
    return c;
}

// ---------------------------------------------------------------------------
// JSMA table.

bool operator==(const JsmaRow& a, const JsmaRow& b) {
    return a.n_sources == b.n_sources && a.gamma == b.gamma && a.asr == b.asr &&
           a.pert_rate == b.pert_rate && a.s_pert_rate == b.s_pert_rate;
}

bool operator==(const JsmaTable& a, const JsmaTable& b) { return a.rows == b.rows; }

JsmaTable jsma_table(const MulticlassHooks& h, const LabeledDataset& data, std::size_t n_sources,
                     const std::vector<double>& gammas, int threads) {
    if (n_sources == 0 || n_sources > data.size())
        throw ArgumentError("n_sources must be between 1 and the dataset size");
    if (gammas.empty()) throw ArgumentError("need at least one gamma");
    for (double g : gammas)
        if (g < 0 || g > 1) throw ArgumentError("gamma must lie in [0,1]");

    std::size_t d = 1;
    for (std::size_t e : h.input_shape) d *= e;
    const int classes = int(h.num_classes);
    const double max_gamma = *std::max_element(gammas.begin(), gammas.end());
    const int max_budget = int(std::lround(max_gamma * double(d)));

    struct Job {
        std::size_t src;
        int target;
    };
    std::vector<Job> jobs;
    jobs.reserve(n_sources * std::size_t(classes - 1));
    for (std::size_t i = 0; i < n_sources; ++i)
        for (int t = 0; t < classes; ++t)
            if (t != data.labels[i]) jobs.push_back({i, t});

    std::vector<JsmaTrajectory> trajs(jobs.size());
    parallel_chunks(jobs.size(), threads, [&](std::size_t j) {
        trajs[j] = jsma_trajectory(h, data.example(jobs[j].src), jobs[j].target, max_budget);
    });

    JsmaTable table;
    for (double gamma : gammas) {
        const int budget = int(std::lround(gamma * double(d)));
        const int pair_cap = budget / 2;
        std::size_t successes = 0;
        double rate_sum = 0.0, s_rate_sum = 0.0;
        for (const auto& traj : trajs) {
            bool success = false;
            int used = 0;
            if (traj.success_at_start) {
                success = true;
            } else if (traj.success_at_changed >= 0 && traj.success_at_changed <= 2 * pair_cap) {
                success = true;
                used = traj.success_at_changed;
            } else {
                used = 2 * std::min<int>(pair_cap, int(traj.changed_after_pair.size()));
            }
            if (success) {
                ++successes;
                s_rate_sum += double(used) / double(d);
            }
            rate_sum += double(used) / double(d);
        }
        JsmaRow row;
        row.n_sources = long(n_sources);
        row.gamma = gamma;
        row.asr = double(successes) / double(jobs.size());
        row.pert_rate = rate_sum / double(jobs.size());
        row.s_pert_rate = successes ? s_rate_sum / double(successes) : 0.0;
        table.rows.push_back(row);
    }
    return table;
}

std::string jsma_table_to_csv(const JsmaTable& t, const std::string& manifest_digest) {
    std::string out = "# manifest_digest=" + manifest_digest + "\n";
    out += "# pair search restricted to top-64 single-feature saliencies\n";
    out += "n_sources,gamma,asr,pert_rate,s_pert_rate\n";
    for (const auto& r : t.rows)
        out += std::to_string(r.n_sources) + "," + fmt(r.gamma) + "," + fmt(r.asr) + "," +
               fmt(r.pert_rate) + "," + fmt(r.s_pert_rate) + "\n";
    return out;
}

JsmaTable jsma_table_from_csv(const std::string& csv) {
    JsmaTable t;
    for_csv_lines(
        csv, [](const std::string&) {},
        [&](const std::string& line) {
            if (line.rfind("n_sources,", 0) == 0) return;
            auto f = split_fields(line, 5);
            JsmaRow r;
            r.n_sources = parse_long(f[0], line);
            r.gamma = parse_double(f[1], line);
            r.asr = parse_double(f[2], line);
            r.pert_rate = parse_double(f[3], line);
            r.s_pert_rate = parse_double(f[4], line);
            t.rows.push_back(r);
        });
    return t;
}

// ---------------------------------------------------------------------------
// Per-example attack rows and the fooling curve.

bool operator==(const AttackExampleRow& a, const AttackExampleRow& b) {
    return a.index == b.index && a.label == b.label && a.prediction == b.prediction &&
           a.success == b.success && a.l2_distortion_pct == b.l2_distortion_pct &&
           a.features_changed == b.features_changed;
}

std::string attack_rows_to_csv(const std::vector<AttackExampleRow>& rows,
                               const std::string& manifest_digest) {
    std::string out = "# manifest_digest=" + manifest_digest + "\n";
    out += "index,label,prediction,success,l2_distortion_pct,features_changed\n";
    for (const auto& r : rows)
        out += std::to_string(r.index) + "," + std::to_string(r.label) + "," +
               std::to_string(r.prediction) + "," + (r.success ? "1" : "0") + "," +
               fmt(r.l2_distortion_pct) + "," + std::to_string(r.features_changed) + "\n";
    return out;
}

std::vector<AttackExampleRow> attack_rows_from_csv(const std::string& csv) {
    std::vector<AttackExampleRow> rows;
    for_csv_lines(
        csv, [](const std::string&) {},
        [&](const std::string& line) {
            if (line.rfind("index,", 0) == 0) return;
            auto f = split_fields(line, 6);
            AttackExampleRow r;
            r.index = parse_long(f[0], line);
            r.label = int(parse_long(f[1], line));
            r.prediction = int(parse_long(f[2], line));
            r.success = parse_long(f[3], line) != 0;
            r.l2_distortion_pct = parse_double(f[4], line);
            r.features_changed = parse_long(f[5], line);
            rows.push_back(r);
        });
    return rows;
}

std::string fooling_sweep_to_csv(const std::vector<FoolingSweepPoint>& pts,
                                 const std::string& manifest_digest) {
    std::string out = "# manifest_digest=" + manifest_digest + "\n";
    out += "eps,asr,margin\n";
    for (const auto& p : pts)
        out += fmt(p.eps) + "," + fmt(p.asr) + "," + fmt(p.margin) + "\n";
    return out;
}

std::vector<FoolingSweepPoint> fooling_sweep_from_csv(const std::string& csv) {
    std::vector<FoolingSweepPoint> pts;
    for_csv_lines(
        csv, [](const std::string&) {},
        [&](const std::string& line) {
            if (line.rfind("eps,", 0) == 0) return;
            auto f = split_fields(line, 3);
            pts.push_back({parse_double(f[0], line), parse_double(f[1], line),
                           parse_double(f[2], line)});
        });
    return pts;
}

// ---------------------------------------------------------------------------
// Image exports.

namespace {

void write_file_bytes(const std::string& path, const void* bytes, std::size_t n) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out.write(static_cast<const char*>(bytes), std::streamsize(n));
    if (!out) throw DataError("failed writing '" + path + "'");
}

void write_pgm(const std::string& path, std::size_t w, std::size_t h,
               const std::vector<std::uint8_t>& px) {
    std::string head = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    std::string blob = head;
    blob.append(reinterpret_cast<const char*>(px.data()), px.size());
    write_file_bytes(path, blob.data(), blob.size());
}

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n, std::uint32_t seed) {
    static std::uint32_t table[256];
    static bool ready = false;
    if (!ready) {
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        ready = true;
    }
    std::uint32_t c = seed ^ 0xffffffffu;
    for (std::size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

void push_u32be(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(std::uint8_t(x >> 24));
    v.push_back(std::uint8_t(x >> 16));
    v.push_back(std::uint8_t(x >> 8));
    v.push_back(std::uint8_t(x));
}

void push_chunk(std::vector<std::uint8_t>& out, const char type[4],
                const std::vector<std::uint8_t>& payload) {
    push_u32be(out, std::uint32_t(payload.size()));
    std::vector<std::uint8_t> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    out.insert(out.end(), body.begin(), body.end());
    push_u32be(out, crc32_of(body.data(), body.size(), 0));
}

// Minimal PNG: 8-bit RGB or grayscale, zlib stream made of stored (type 0)
// deflate blocks, which any decoder accepts.
void write_png(const std::string& path, std::size_t w, std::size_t h, int channels,
               const std::vector<std::uint8_t>& px) {
    std::vector<std::uint8_t> raw;
    raw.reserve((w * std::size_t(channels) + 1) * h);
    for (std::size_t r = 0; r < h; ++r) {
        raw.push_back(0);  // per-row filter: none
        const std::uint8_t* row = px.data() + r * w * std::size_t(channels);
        raw.insert(raw.end(), row, row + w * std::size_t(channels));
    }

    std::uint32_t a = 1, b = 0;  // adler32
    for (std::uint8_t byte : raw) {
        a = (a + byte) % 65521u;
        b = (b + a) % 65521u;
    }

    std::vector<std::uint8_t> z;
    z.push_back(0x78);
    z.push_back(0x01);
    std::size_t off = 0;
    while (off < raw.size()) {
        const std::size_t len = std::min<std::size_t>(65535, raw.size() - off);
        const bool last = off + len == raw.size();
        z.push_back(last ? 1 : 0);
        z.push_back(std::uint8_t(len & 0xff));
        z.push_back(std::uint8_t(len >> 8));
        z.push_back(std::uint8_t(~len & 0xff));
        z.push_back(std::uint8_t((~len >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + long(off), raw.begin() + long(off + len));
        off += len;
    }
    push_u32be(z, (b << 16) | a);

    std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<std::uint8_t> ihdr;
    push_u32be(ihdr, std::uint32_t(w));
    push_u32be(ihdr, std::uint32_t(h));
    ihdr.push_back(8);                                // bit depth
    ihdr.push_back(channels == 3 ? 2 : 0);            // color type
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    push_chunk(png, "IHDR", ihdr);
    push_chunk(png, "IDAT", z);
    push_chunk(png, "IEND", {});
    write_file_bytes(path, png.data(), png.size());
}

std::uint8_t weight_byte(double v, double max_abs) {
    if (max_abs == 0.0) return 128;
    return std::uint8_t(128 + long(std::lround(127.0 * v / max_abs)));
}

struct GridGeom {
    std::size_t cols, rows, width, height;
};

GridGeom grid_geom(std::size_t n, std::size_t cell_h, std::size_t cell_w) {
    GridGeom g;
    g.cols = std::size_t(std::ceil(std::sqrt(double(n))));
    g.rows = (n + g.cols - 1) / g.cols;
    g.width = g.cols * cell_w + (g.cols - 1);
    g.height = g.rows * cell_h + (g.rows - 1);
    return g;
}

}  // namespace

void export_weight_image(const Tensor& w, const std::string& path) {
    double max_abs = 0.0;
    for (double v : w.data) max_abs = std::max(max_abs, std::abs(v));

    if (w.ndim() == 1 || w.ndim() == 2) {
        std::size_t rows, cols;
        if (w.ndim() == 2) {
            rows = w.dim(0);
            cols = w.dim(1);
        } else {
            const std::size_t side = std::size_t(std::lround(std::sqrt(double(w.size()))));
            if (side * side != w.size())
                throw DimensionError("flat weight image needs a square length, got " +
                                     std::to_string(w.size()));
            rows = cols = side;
        }
        std::vector<std::uint8_t> px(rows * cols);
        for (std::size_t i = 0; i < px.size(); ++i) px[i] = weight_byte(w.data[i], max_abs);
        write_pgm(path, cols, rows, px);
        return;
    }

    if (w.ndim() != 4)
        throw DimensionError("weight image export takes [d], [h,w], or [kh,kw,ci,co]");
    const std::size_t kh = w.dim(0), kw = w.dim(1), ci = w.dim(2), co = w.dim(3);
    if (ci != 1 && ci != 3)
        throw ArgumentError("filter grids support 1- or 3-channel filters, got " +
                            std::to_string(ci));
    const GridGeom g = grid_geom(co, kh, kw);
    const std::size_t ch = ci;
    // black separators, zero-level gray everywhere else
    std::vector<std::uint8_t> px(g.width * g.height * ch, 0);
    for (std::size_t f = 0; f < g.rows * g.cols; ++f) {
        const std::size_t r0 = (f / g.cols) * (kh + 1);
        const std::size_t c0 = (f % g.cols) * (kw + 1);
        for (std::size_t r = 0; r < kh; ++r)
            for (std::size_t c = 0; c < kw; ++c)
                for (std::size_t q = 0; q < ch; ++q) {
                    const std::size_t dst = ((r0 + r) * g.width + (c0 + c)) * ch + q;
                    px[dst] = f < co ? weight_byte(double(w.at4(r, c, q, f)), max_abs)
                                     : std::uint8_t(128);
                }
    }
    if (ci == 3)
        write_png(path, g.width, g.height, 3, px);
    else
        write_pgm(path, g.width, g.height, px);
}

void export_image_grid(const std::vector<Tensor>& images, const std::string& path) {
    if (images.empty()) throw ArgumentError("image grid needs at least one image");
    const auto& shape = images.front().shape;
    if (shape.size() != 2 && !(shape.size() == 3 && shape[2] == 3))
        throw DimensionError("image grid takes [h,w] or [h,w,3] images");
    for (const auto& im : images)
        if (im.shape != shape) throw DimensionError("image grid needs uniform shapes");
    const std::size_t h = shape[0], w = shape[1];
    const std::size_t ch = shape.size() == 3 ? 3 : 1;
    const GridGeom g = grid_geom(images.size(), h, w);
    std::vector<std::uint8_t> px(g.width * g.height * ch, 0);
    for (std::size_t f = 0; f < images.size(); ++f) {
        const std::size_t r0 = (f / g.cols) * (h + 1);
        const std::size_t c0 = (f % g.cols) * (w + 1);
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t c = 0; c < w; ++c)
                for (std::size_t q = 0; q < ch; ++q) {
                    const double v = images[f].data[(r * w + c) * ch + q];
                    px[((r0 + r) * g.width + (c0 + c)) * ch + q] =
                        std::uint8_t(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
                }
    }
    if (ch == 3)
        write_png(path, g.width, g.height, 3, px);
    else
        write_pgm(path, g.width, g.height, px);
}

}  // namespace robustlab
