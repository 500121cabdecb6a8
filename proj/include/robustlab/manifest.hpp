#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace robustlab {

// FNV-1a, 64-bit: cheap content fingerprint for datasets, configs, models.
std::uint64_t fnv1a64(const void* bytes, std::size_t len);
std::uint64_t fnv1a64(const std::string& s);
std::uint64_t file_digest(const std::string& path);
std::string digest_hex(std::uint64_t digest);

std::string library_version();

// Experiment provenance. Written to disk before any result file, so every
// CSV can point back at the exact configuration that produced it (results
// embed this file's digest in their header).
struct ExperimentManifest {
    std::string recipe;
    std::map<std::string, std::string> config;  // flat key=value snapshot
    std::uint64_t seed = 0;
    std::map<std::string, std::string> dataset_digests;  // path -> hex digest
    std::vector<std::string> output_paths;
    std::string version;  // library version

    std::string to_json() const;
};

// Writes the manifest and returns the digest (hex) of the bytes written.
std::string write_manifest(const ExperimentManifest& m, const std::string& path);

}  // namespace robustlab
