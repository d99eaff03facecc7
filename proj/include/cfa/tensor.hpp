#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "cfa/errors.hpp"

namespace cfa {

using Shape = std::vector<std::size_t>;

/// Dense tensor of 64-bit floats with optional gradient storage.
///
/// A Tensor is a cheap handle onto shared storage: copies alias the same
/// values and gradient. All shapes are row-major. Every op that produces a
/// Tensor verifies the result is finite and throws otherwise, so NaN/Inf
/// never propagate silently through a training run.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor from_values(Shape shape, std::vector<double> values);
    static Tensor row(std::vector<double> values);  // 1-D convenience
    static Tensor scalar(double value);
    /// Trainable tensor: participates in backward and optimizer updates.
    static Tensor parameter(Shape shape, std::vector<double> values);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t ndim() const { return node_->shape.size(); }
    std::size_t size() const { return node_->values.size(); }
    bool is_scalar() const { return size() == 1; }

    std::vector<double>& values() { return node_->values; }
    const std::vector<double>& values() const { return node_->values; }
    double scalar_value() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool flag) { node_->requires_grad = flag; }

    /// Gradient accumulated by the last backward pass. Allocated on demand;
    /// zero-length until the tensor has participated in a backward.
    const std::vector<double>& grad() const { return node_->grad; }
    /// Ensures the gradient buffer exists (zero-filled) and returns it.
    std::vector<double>& grad_buffer();
    void zero_grad();

    /// Identity of the underlying storage, for aliasing checks.
    const void* id() const { return node_.get(); }

private:
    struct Node {
        Shape shape;
        std::vector<double> values;
        bool requires_grad = false;
        std::vector<double> grad;
    };

    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    static Tensor make(Shape shape, std::vector<double> values, bool requires_grad);

    std::shared_ptr<Node> node_;

    friend class Tape;
};

/// Wengert list for reverse-mode differentiation.
///
/// Ops are invoked through the tape; each differentiable op appends one
/// record holding references to its operands and a local gradient rule.
/// Records are appended in execution order, so the list is topologically
/// ordered by construction and backward() visits each record exactly once,
/// in reverse. A non-recording tape (recording = false) runs the same
/// forward math without building the list; use it for inference.
class Tape {
public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    // -- core ops ------------------------------------------------------

    /// Matrix product. Accepts {m,k}x{k,n} -> {m,n}; a 1-D operand is
    /// treated as a single row ({k}x{k,n} -> {n}) or column ({m,k}x{k} -> {m}).
    Tensor matmul(const Tensor& a, const Tensor& b);

    // Elementwise family. Binary ops take identical shapes or a scalar on
    // either side; no other broadcasting.
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor relu(const Tensor& x);
    Tensor exp(const Tensor& x);
    /// Natural log; inputs must be strictly positive.
    Tensor log(const Tensor& x);
    Tensor scale(const Tensor& x, double c);
    /// max(x, floor) elementwise; gradient passes where x >= floor.
    Tensor clamp_min(const Tensor& x, double floor);

    /// Numerically stable softmax over a 1-D tensor.
    Tensor softmax(const Tensor& x);

    // Reductions.
    Tensor sum(const Tensor& x);
    Tensor mean(const Tensor& x);
    /// Euclidean norm, with the subgradient 0 at the origin.
    Tensor l2_norm(const Tensor& x);

    /// Concatenation of 1-D tensors in argument order.
    Tensor concat(const std::vector<Tensor>& parts);

    /// Reverse-mode sweep from a scalar loss. Accumulates gradients into
    /// every requires_grad tensor reachable from the loss; tensors that are
    /// not reachable keep whatever their buffers held (zero after
    /// zero_grad). Throws ContractError if the loss is not scalar.
    void backward(const Tensor& loss);

    bool recording() const { return recording_; }
    std::size_t op_count() const { return records_.size(); }
    void clear() { records_.clear(); }

private:
    struct Record {
        // Applies the local gradient rule: reads the output gradient and
        // accumulates into the operand gradients.
        void (*apply)(const Record&);
        Tensor out;
        Tensor in0;
        Tensor in1;
        double c0 = 0.0;
        std::vector<Tensor> extra;  // concat operands
    };

    enum class Binary { add, sub, mul };
    Tensor binary_op(Binary kind, const Tensor& a, const Tensor& b, const char* name);
    bool should_record(const Tensor& a) const;
    bool should_record(const Tensor& a, const Tensor& b) const;
    void push(Record record);
    void push_rule(void (*apply)(const Record&), Tensor out, Tensor in0, Tensor in1 = {});

    std::vector<Record> records_;
    bool recording_;
};

}  // namespace cfa
