#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfa/rng.hpp"
#include "cfa/tensor.hpp"

namespace cfa {

enum class Activation { relu, none };

struct NamedParam {
    std::string name;
    Tensor tensor;
};

/// Fully-connected layer, weight {in,out} + bias {out}.
struct DenseLayer {
    Tensor weight;
    Tensor bias;
    Activation activation = Activation::relu;

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out, Activation act, Rng& rng);

    Tensor forward(Tape& tape, const Tensor& x) const;
    std::size_t in_width() const { return weight.shape()[0]; }
    std::size_t out_width() const { return weight.shape()[1]; }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
    void reinit(Rng& rng);
};

/// Width-preserving residual block: out = x + inner2(inner1(x)).
/// inner1 carries the configurable activation, inner2 is linear.
struct ResidualBlock {
    DenseLayer inner1;
    DenseLayer inner2;

    ResidualBlock() = default;
    ResidualBlock(std::size_t width, Activation inner_act, Rng& rng);

    Tensor forward(Tape& tape, const Tensor& x) const;
    std::size_t width() const { return inner1.in_width(); }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

/// Bias-free linear projection onto a fixed output width. Maps feature
/// vectors of any configured input width to the common width the shared
/// extractor expects.
struct AdaptationLayer {
    Tensor weight;  // {in, out}

    AdaptationLayer() = default;
    AdaptationLayer(std::size_t in, std::size_t out, Rng& rng);

    Tensor forward(Tape& tape, const Tensor& f) const;
    std::size_t in_width() const { return weight.shape()[0]; }
    std::size_t out_width() const { return weight.shape()[1]; }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

/// Three residual blocks over the adaptation width followed by a linear
/// reduction to half that width. One instance is shared by the student and
/// every teacher within an amalgamation run.
struct SharedExtractor {
    std::vector<ResidualBlock> blocks;
    DenseLayer reduce;

    SharedExtractor() = default;
    SharedExtractor(std::size_t width, Activation inner_act, Rng& rng);

    Tensor forward(Tape& tape, const Tensor& f) const;
    std::size_t in_width() const { return reduce.in_width(); }
    std::size_t out_width() const { return reduce.out_width(); }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

/// Linear map from the shared space back to one teacher's feature width.
struct TeacherDecoder {
    DenseLayer map;

    TeacherDecoder() = default;
    TeacherDecoder(std::size_t shared_width, std::size_t feature_width, Rng& rng);

    Tensor forward(Tape& tape, const Tensor& shared_vec) const;
    std::size_t in_width() const { return map.in_width(); }
    std::size_t out_width() const { return map.out_width(); }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct NetworkArch {
    std::size_t input_dim = 20;
    std::vector<std::size_t> extractor_widths = {100, 64};
    std::size_t head_hidden = 32;

    bool operator==(const NetworkArch&) const = default;
};

struct ForwardResult {
    Tensor features;
    Tensor logits;
};

/// Classifier network: dense feature extractor plus a two-layer head. The
/// forward pass exposes the feature vector so amalgamation can align it.
class Network {
public:
    Network() = default;
    Network(NetworkArch arch, std::vector<int> classes, std::uint64_t seed);

    ForwardResult forward(Tape& tape, const Tensor& x) const;

    /// All trainable tensors in a fixed, name-stable order.
    std::vector<NamedParam> parameters() const;

    const NetworkArch& arch() const { return arch_; }
    const std::vector<int>& classes() const { return classes_; }
    std::size_t input_dim() const { return arch_.input_dim; }
    std::size_t feature_width() const { return arch_.extractor_widths.back(); }

    /// Flips requires_grad on every parameter. Frozen teachers skip tape
    /// recording entirely during amalgamation.
    void set_trainable(bool trainable);

    /// Deep copy: fresh storage, identical values.
    Network clone() const;

    /// Widens the output layer to serve additional classes, keeping the
    /// existing class columns bit-identical. Used by the sequential
    /// fine-tuning baseline.
    void extend_classes(const std::vector<int>& new_classes, std::uint64_t seed);

    void reinit(Rng& rng);

private:
    NetworkArch arch_;
    std::vector<int> classes_;
    std::vector<DenseLayer> extractor_;
    DenseLayer hidden_;
    DenseLayer output_;
};

/// Reinitializes every parameter in place: uniform in
/// +-sqrt(6/(fan_in+fan_out)) of the owning layer, deterministic in seed.
void init_parameters(Network& net, std::uint64_t seed);

/// Argmax class id over the network's class list.
int predict(const Network& net, const Tensor& x);

/// FNV-1a over parameter names, shapes and raw value bytes; detects any
/// mutation of a supposedly frozen module.
std::uint64_t parameter_checksum(const std::vector<NamedParam>& params);

/// Feature -> adaptation -> shared extractor. Output width is half the
/// adaptation width.
Tensor encode_to_shared(Tape& tape, const Tensor& features, const AdaptationLayer& adapt,
                        const SharedExtractor& shared);

/// Shared-space vector -> reconstructed teacher features.
Tensor decode_from_shared(Tape& tape, const Tensor& shared_vec, const TeacherDecoder& decoder);

}  // namespace cfa
