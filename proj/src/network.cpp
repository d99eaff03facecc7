#include "cfa/network.hpp"

#include <algorithm>
#include <cmath>

#include "cfa/errors.hpp"

namespace cfa {

namespace {

std::vector<double> glorot_values(std::size_t count, std::size_t fan_in, std::size_t fan_out,
                                  Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> v(count);
    for (double& x : v) x = rng.uniform(-bound, bound);
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Blocks
// ---------------------------------------------------------------------------

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Activation act, Rng& rng)
    : weight(Tensor::parameter({in, out}, glorot_values(in * out, in, out, rng))),
      bias(Tensor::parameter({out}, glorot_values(out, in, out, rng))),
      activation(act) {}

Tensor DenseLayer::forward(Tape& tape, const Tensor& x) const {
    Tensor y = tape.add(tape.matmul(x, weight), bias);
    return activation == Activation::relu ? tape.relu(y) : y;
}

void DenseLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

void DenseLayer::reinit(Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in_width() + out_width()));
    for (double& x : weight.values()) x = rng.uniform(-bound, bound);
    for (double& x : bias.values()) x = rng.uniform(-bound, bound);
}

ResidualBlock::ResidualBlock(std::size_t width, Activation inner_act, Rng& rng)
    : inner1(width, width, inner_act, rng), inner2(width, width, Activation::none, rng) {}

Tensor ResidualBlock::forward(Tape& tape, const Tensor& x) const {
    return tape.add(x, inner2.forward(tape, inner1.forward(tape, x)));
}

void ResidualBlock::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    inner1.collect(prefix + ".inner1", out);
    inner2.collect(prefix + ".inner2", out);
}

AdaptationLayer::AdaptationLayer(std::size_t in, std::size_t out, Rng& rng)
    : weight(Tensor::parameter({in, out}, glorot_values(in * out, in, out, rng))) {}

Tensor AdaptationLayer::forward(Tape& tape, const Tensor& f) const {
    if (f.ndim() != 1 || f.size() != in_width()) {
        throw ShapeError("adaptation layer expects feature width " + std::to_string(in_width()));
    }
    return tape.matmul(f, weight);
}

void AdaptationLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".weight", weight});
}

SharedExtractor::SharedExtractor(std::size_t width, Activation inner_act, Rng& rng) {
    if (width % 2 != 0) {
        throw ConfigError("shared extractor width must be even");
    }
    blocks.reserve(3);
    for (int i = 0; i < 3; ++i) blocks.emplace_back(width, inner_act, rng);
    reduce = DenseLayer(width, width / 2, Activation::none, rng);
}

Tensor SharedExtractor::forward(Tape& tape, const Tensor& f) const {
    Tensor h = f;
    for (const ResidualBlock& block : blocks) h = block.forward(tape, h);
    return reduce.forward(tape, h);
}

void SharedExtractor::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        blocks[i].collect(prefix + ".block" + std::to_string(i), out);
    }
    reduce.collect(prefix + ".reduce", out);
}

TeacherDecoder::TeacherDecoder(std::size_t shared_width, std::size_t feature_width, Rng& rng)
    : map(shared_width, feature_width, Activation::none, rng) {}

Tensor TeacherDecoder::forward(Tape& tape, const Tensor& shared_vec) const {
    if (shared_vec.ndim() != 1 || shared_vec.size() != in_width()) {
        throw ShapeError("decoder expects shared width " + std::to_string(in_width()));
    }
    return map.forward(tape, shared_vec);
}

void TeacherDecoder::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    map.collect(prefix, out);
}

Tensor encode_to_shared(Tape& tape, const Tensor& features, const AdaptationLayer& adapt,
                        const SharedExtractor& shared) {
    return shared.forward(tape, adapt.forward(tape, features));
}

Tensor decode_from_shared(Tape& tape, const Tensor& shared_vec, const TeacherDecoder& decoder) {
    return decoder.forward(tape, shared_vec);
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

Network::Network(NetworkArch arch, std::vector<int> classes, std::uint64_t seed)
    : arch_(std::move(arch)), classes_(std::move(classes)) {
    if (arch_.extractor_widths.empty()) {
        throw ConfigError("extractor needs at least one layer width");
    }
    if (classes_.empty()) {
        throw ConfigError("network needs at least one class");
    }
    Rng rng(seed);
    std::size_t in = arch_.input_dim;
    for (std::size_t width : arch_.extractor_widths) {
        extractor_.emplace_back(in, width, Activation::relu, rng);
        in = width;
    }
    hidden_ = DenseLayer(in, arch_.head_hidden, Activation::relu, rng);
    output_ = DenseLayer(arch_.head_hidden, classes_.size(), Activation::none, rng);
}

ForwardResult Network::forward(Tape& tape, const Tensor& x) const {
    if (x.ndim() != 1 || x.size() != arch_.input_dim) {
        throw ShapeError("network expects input width " + std::to_string(arch_.input_dim));
    }
    Tensor h = x;
    for (const DenseLayer& layer : extractor_) h = layer.forward(tape, h);
    Tensor features = h;
    Tensor logits = output_.forward(tape, hidden_.forward(tape, features));
    return {features, logits};
}

std::vector<NamedParam> Network::parameters() const {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < extractor_.size(); ++i) {
        extractor_[i].collect("extractor." + std::to_string(i), out);
    }
    hidden_.collect("head.hidden", out);
    output_.collect("head.output", out);
    return out;
}

void Network::set_trainable(bool trainable) {
    for (auto& named : parameters()) {
        named.tensor.set_requires_grad(trainable);
    }
}

Network Network::clone() const {
    Network copy(arch_, classes_, 0);
    auto src = parameters();
    auto dst = copy.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i].tensor.values() = src[i].tensor.values();
        dst[i].tensor.set_requires_grad(src[i].tensor.requires_grad());
    }
    return copy;
}

void Network::extend_classes(const std::vector<int>& new_classes, std::uint64_t seed) {
    if (new_classes.empty()) return;
    for (int c : new_classes) {
        if (std::find(classes_.begin(), classes_.end(), c) != classes_.end()) {
            throw ContractError("class " + std::to_string(c) + " already served");
        }
    }
    Rng rng(seed);
    const std::size_t old_out = output_.out_width();
    const std::size_t new_out = old_out + new_classes.size();
    const std::size_t in = output_.in_width();

    DenseLayer wider(in, new_out, Activation::none, rng);
    for (std::size_t r = 0; r < in; ++r) {
        for (std::size_t c = 0; c < old_out; ++c) {
            wider.weight.values()[r * new_out + c] = output_.weight.values()[r * old_out + c];
        }
    }
    for (std::size_t c = 0; c < old_out; ++c) {
        wider.bias.values()[c] = output_.bias.values()[c];
    }
    output_ = wider;
    classes_.insert(classes_.end(), new_classes.begin(), new_classes.end());
}

void Network::reinit(Rng& rng) {
    for (DenseLayer& layer : extractor_) layer.reinit(rng);
    hidden_.reinit(rng);
    output_.reinit(rng);
}

void init_parameters(Network& net, std::uint64_t seed) {
    Rng rng(seed);
    net.reinit(rng);
}

int predict(const Network& net, const Tensor& x) {
    Tape tape(false);
    const Tensor logits = net.forward(tape, x).logits;
    const auto& v = logits.values();
    const auto best = std::distance(v.begin(), std::max_element(v.begin(), v.end()));
    return net.classes()[static_cast<std::size_t>(best)];
}

std::uint64_t parameter_checksum(const std::vector<NamedParam>& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* data, std::size_t len) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [name, tensor] : params) {
        mix(name.data(), name.size());
        for (std::size_t extent : tensor.shape()) mix(&extent, sizeof(extent));
        mix(tensor.values().data(), tensor.values().size() * sizeof(double));
    }
    return h;
}

}  // namespace cfa
