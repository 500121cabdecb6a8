#include "robustlab/manifest.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "robustlab/errors.hpp"

namespace robustlab {

std::uint64_t fnv1a64(const void* bytes, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::uint64_t file_digest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path + " for digesting");
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (f) {
        f.read(buf, sizeof buf);
        const std::streamsize got = f.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

std::string digest_hex(std::uint64_t digest) {
    std::ostringstream os;
    os << std::hex;
    for (int shift = 60; shift >= 0; shift -= 4) os << ((digest >> shift) & 0xf);
    return os.str();
}

std::string library_version() { return "robustlab 0.1.0"; }

std::string ExperimentManifest::to_json() const {
    nlohmann::json j;
    j["recipe"] = recipe;
    j["config"] = config;
    j["seed"] = seed;
    j["dataset_digests"] = dataset_digests;
    j["output_paths"] = output_paths;
    j["version"] = version;
    return j.dump(2) + "\n";
}

std::string write_manifest(const ExperimentManifest& m, const std::string& path) {
    const std::string body = m.to_json();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path + " for writing");
    f << body;
    if (!f) throw DataError("write failed on " + path);
    return digest_hex(fnv1a64(body));
}

}  // namespace robustlab
