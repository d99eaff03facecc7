#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cfa/network.hpp"
#include "json.hpp"

namespace cfa {

/// Container file shared by checkpoints, replay-memory dumps and persisted
/// streams: a JSON manifest followed by a flat little-endian float64
/// payload. The manifest's "params" array lists name, shape and element
/// offset of every block in the payload. Round-trips are bit-exact.
///
/// Layout: 8-byte magic "CFABIN1\n", uint64 manifest byte length, manifest
/// JSON, payload.
struct Container {
    nlohmann::ordered_json manifest;
    std::vector<NamedParam> blocks;
};

void write_container(const std::filesystem::path& path, nlohmann::ordered_json manifest,
                     const std::vector<NamedParam>& blocks);
Container read_container(const std::filesystem::path& path);

void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace cfa
