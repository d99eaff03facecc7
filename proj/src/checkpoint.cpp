#include "cfa/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "cfa/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "container payload assumes a little-endian host");

namespace cfa {

namespace {

constexpr char kMagic[8] = {'C', 'F', 'A', 'B', 'I', 'N', '1', '\n'};

}  // namespace

void write_container(const std::filesystem::path& path, nlohmann::ordered_json manifest,
                     const std::vector<NamedParam>& blocks) {
    nlohmann::ordered_json params = nlohmann::ordered_json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, tensor] : blocks) {
        nlohmann::ordered_json entry;
        entry["name"] = name;
        entry["shape"] = tensor.shape();
        entry["offset"] = offset;
        entry["count"] = tensor.size();
        params.push_back(std::move(entry));
        offset += tensor.size();
    }
    manifest["params"] = std::move(params);

    const std::string text = manifest.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, tensor] : blocks) {
        out.write(reinterpret_cast<const char*>(tensor.values().data()),
                  static_cast<std::streamsize>(tensor.size() * sizeof(double)));
    }
    if (!out) throw FormatError("write failed for " + path.string());
}

Container read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw FormatError(path.string() + " is not a container file");
    }
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw FormatError(path.string() + " is truncated");

    Container c;
    c.manifest = nlohmann::ordered_json::parse(text, nullptr, false);
    if (c.manifest.is_discarded()) {
        throw FormatError(path.string() + " has a malformed manifest");
    }
    for (const auto& entry : c.manifest.at("params")) {
        Shape shape = entry.at("shape").get<Shape>();
        const std::uint64_t count = entry.at("count").get<std::uint64_t>();
        std::vector<double> values(count);
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw FormatError(path.string() + " payload is truncated");
        c.blocks.push_back({entry.at("name").get<std::string>(),
                            Tensor::from_values(std::move(shape), std::move(values))});
    }
    return c;
}

void save_network(const Network& net, const std::filesystem::path& path) {
    nlohmann::ordered_json manifest;
    manifest["format"] = "cfa-container";
    manifest["version"] = 1;
    manifest["kind"] = "network";
    manifest["arch"]["input_dim"] = net.arch().input_dim;
    manifest["arch"]["extractor_widths"] = net.arch().extractor_widths;
    manifest["arch"]["head_hidden"] = net.arch().head_hidden;
    manifest["classes"] = net.classes();
    write_container(path, std::move(manifest), net.parameters());
}

Network load_network(const std::filesystem::path& path) {
    Container c = read_container(path);
    if (c.manifest.value("kind", "") != "network") {
        throw FormatError(path.string() + " does not hold a network checkpoint");
    }
    NetworkArch arch;
    arch.input_dim = c.manifest.at("arch").at("input_dim").get<std::size_t>();
    arch.extractor_widths =
        c.manifest.at("arch").at("extractor_widths").get<std::vector<std::size_t>>();
    arch.head_hidden = c.manifest.at("arch").at("head_hidden").get<std::size_t>();
    auto classes = c.manifest.at("classes").get<std::vector<int>>();

    Network net(arch, classes, 0);
    auto params = net.parameters();
    if (params.size() != c.blocks.size()) {
        throw FormatError("checkpoint parameter list does not match architecture");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name != c.blocks[i].name ||
            params[i].tensor.shape() != c.blocks[i].tensor.shape()) {
            throw FormatError("checkpoint parameter " + c.blocks[i].name + " is inconsistent");
        }
        params[i].tensor.values() = c.blocks[i].tensor.values();
    }
    return net;
}

}  // namespace cfa
