#include "cfa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cfa {

namespace {

std::size_t shape_product(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t extent : shape) n *= extent;
    return n;
}

void ensure_finite(const char* op, const std::vector<double>& values) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw DomainError(std::string(op) + " produced a non-finite value");
        }
    }
}

bool is_scalar_like(const Tensor& t) { return t.size() == 1; }

}  // namespace

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor Tensor::make(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape.empty()) {
        throw ShapeError("tensor shape must have at least one extent");
    }
    for (std::size_t extent : shape) {
        if (extent == 0) throw ShapeError("tensor extents must be positive");
    }
    if (shape_product(shape) != values.size()) {
        throw ShapeError("value count does not match shape");
    }
    ensure_finite("tensor construction", values);
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape) {
    std::size_t n = shape_product(shape);
    return make(std::move(shape), std::vector<double>(n, 0.0), false);
}

Tensor Tensor::full(Shape shape, double value) {
    std::size_t n = shape_product(shape);
    return make(std::move(shape), std::vector<double>(n, value), false);
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values) {
    return make(std::move(shape), std::move(values), false);
}

Tensor Tensor::row(std::vector<double> values) {
    Shape shape{values.size()};
    return make(std::move(shape), std::move(values), false);
}

Tensor Tensor::scalar(double value) { return make({1}, {value}, false); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    return make(std::move(shape), std::move(values), true);
}

double Tensor::scalar_value() const {
    if (!is_scalar()) throw ContractError("scalar_value on non-scalar tensor");
    return node_->values[0];
}

std::vector<double>& Tensor::grad_buffer() {
    if (node_->grad.size() != node_->values.size()) {
        node_->grad.assign(node_->values.size(), 0.0);
    }
    return node_->grad;
}

void Tensor::zero_grad() {
    node_->grad.assign(node_->values.size(), 0.0);
}

// ---------------------------------------------------------------------------
// Backward rules
// ---------------------------------------------------------------------------

namespace {

// Every rule reads the (already populated) output gradient and accumulates
// into operand gradients. Records whose output never received a gradient
// are skipped by backward().

void grad_add_all(Tensor& t, const std::vector<double>& g) {
    auto& dst = t.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

void grad_add_sum(Tensor& t, const std::vector<double>& g, double sign = 1.0) {
    double total = 0.0;
    for (double v : g) total += v;
    t.grad_buffer()[0] += sign * total;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

bool Tape::should_record(const Tensor& a) const {
    return recording_ && a.requires_grad();
}

bool Tape::should_record(const Tensor& a, const Tensor& b) const {
    return recording_ && (a.requires_grad() || b.requires_grad());
}

void Tape::push(Record record) { records_.push_back(std::move(record)); }

void Tape::push_rule(void (*apply)(const Record&), Tensor out, Tensor in0, Tensor in1) {
    Record record;
    record.apply = apply;
    record.out = std::move(out);
    record.in0 = std::move(in0);
    record.in1 = std::move(in1);
    records_.push_back(std::move(record));
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() > 2 || b.ndim() > 2) {
        throw ShapeError("matmul operands must be 1-D or 2-D");
    }
    const std::size_t k = a.ndim() == 1 ? a.shape()[0] : a.shape()[1];
    const std::size_t m = a.size() / k;
    const std::size_t kb = b.ndim() == 1 ? b.shape()[0] : b.shape()[0];
    if (k != kb) throw ShapeError("matmul inner dimensions disagree");
    const std::size_t n = b.size() / k;

    Shape out_shape;
    if (a.ndim() == 1 && b.ndim() == 1) {
        out_shape = {1};
    } else if (a.ndim() == 1) {
        out_shape = {n};
    } else if (b.ndim() == 1) {
        out_shape = {m};
    } else {
        out_shape = {m, n};
    }

    std::vector<double> out(m * n, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            const double* brow = &bv[p * n];
            double* orow = &out[i * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    ensure_finite("matmul", out);
    bool rec = should_record(a, b);
    Tensor result = Tensor::make(std::move(out_shape), std::move(out), rec);
    if (rec) {
        push_rule([](const Record& r) {
                  Tensor a = r.in0;
                  Tensor b = r.in1;
                  const auto& g = r.out.grad();
                  const std::size_t k = a.ndim() == 1 ? a.shape()[0] : a.shape()[1];
                  const std::size_t m = a.size() / k;
                  const std::size_t n = b.size() / k;
                  if (a.requires_grad()) {
                      auto& ga = a.grad_buffer();
                      const auto& bv = b.values();
                      for (std::size_t i = 0; i < m; ++i) {
                          for (std::size_t p = 0; p < k; ++p) {
                              const double* grow = &g[i * n];
                              const double* brow = &bv[p * n];
                              double acc = 0.0;
                              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                              ga[i * k + p] += acc;
                          }
                      }
                  }
                  if (b.requires_grad()) {
                      auto& gb = b.grad_buffer();
                      const auto& av = a.values();
                      for (std::size_t i = 0; i < m; ++i) {
                          for (std::size_t p = 0; p < k; ++p) {
                              const double aip = av[i * k + p];
                              const double* grow = &g[i * n];
                              double* gbrow = &gb[p * n];
                              for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                          }
                      }
                  }
              },
              result, a, b);
    }
    return result;
}

Tensor Tape::binary_op(Binary kind, const Tensor& a, const Tensor& b, const char* name) {
    const bool a_scalar = is_scalar_like(a);
    const bool b_scalar = is_scalar_like(b);
    if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
        throw ShapeError(std::string(name) + ": shapes are not broadcast-compatible");
    }
    const Shape& out_shape = a_scalar && !b_scalar ? b.shape() : a.shape();
    const std::size_t n = a_scalar && !b_scalar ? b.size() : a.size();

    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a_scalar ? av[0] : av[i];
        const double y = b_scalar ? bv[0] : bv[i];
        switch (kind) {
            case Binary::add: out[i] = x + y; break;
            case Binary::sub: out[i] = x - y; break;
            case Binary::mul: out[i] = x * y; break;
        }
    }
    ensure_finite(name, out);
    bool rec = should_record(a, b);
    Tensor result = Tensor::make(out_shape, std::move(out), rec);
    if (!rec) return result;

    Record record;
    record.out = result;
    record.in0 = a;
    record.in1 = b;
    switch (kind) {
        case Binary::add:
            record.apply = [](const Record& r) {
                Tensor a = r.in0, b = r.in1;
                const auto& g = r.out.grad();
                if (a.requires_grad()) {
                    if (is_scalar_like(a) && g.size() > 1) grad_add_sum(a, g);
                    else grad_add_all(a, g);
                }
                if (b.requires_grad()) {
                    if (is_scalar_like(b) && g.size() > 1) grad_add_sum(b, g);
                    else grad_add_all(b, g);
                }
            };
            break;
        case Binary::sub:
            record.apply = [](const Record& r) {
                Tensor a = r.in0, b = r.in1;
                const auto& g = r.out.grad();
                if (a.requires_grad()) {
                    if (is_scalar_like(a) && g.size() > 1) grad_add_sum(a, g);
                    else grad_add_all(a, g);
                }
                if (b.requires_grad()) {
                    if (is_scalar_like(b) && g.size() > 1) {
                        grad_add_sum(b, g, -1.0);
                    } else {
                        auto& gb = b.grad_buffer();
                        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                    }
                }
            };
            break;
        case Binary::mul:
            record.apply = [](const Record& r) {
                Tensor a = r.in0, b = r.in1;
                const auto& g = r.out.grad();
                const auto& av = a.values();
                const auto& bv = b.values();
                const bool a_scalar = is_scalar_like(a);
                const bool b_scalar = is_scalar_like(b);
                if (a.requires_grad()) {
                    auto& ga = a.grad_buffer();
                    if (a_scalar && g.size() > 1) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * bv[b_scalar ? 0 : i];
                        ga[0] += acc;
                    } else {
                        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[b_scalar ? 0 : i];
                    }
                }
                if (b.requires_grad()) {
                    auto& gb = b.grad_buffer();
                    if (b_scalar && g.size() > 1) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[a_scalar ? 0 : i];
                        gb[0] += acc;
                    } else {
                        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[a_scalar ? 0 : i];
                    }
                }
            };
            break;
    }
    push(std::move(record));
    return result;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) { return binary_op(Binary::add, a, b, "add"); }
Tensor Tape::sub(const Tensor& a, const Tensor& b) { return binary_op(Binary::sub, a, b, "sub"); }
Tensor Tape::mul(const Tensor& a, const Tensor& b) { return binary_op(Binary::mul, a, b, "mul"); }

Tensor Tape::relu(const Tensor& x) {
    std::vector<double> out(x.size());
    const auto& xv = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    bool rec = should_record(x);
    Tensor result = Tensor::make(x.shape(), std::move(out), rec);
    if (rec) {
        push_rule([](const Record& r) {
                  Tensor x = r.in0;
                  const auto& g = r.out.grad();
                  const auto& xv = x.values();
                  auto& gx = x.grad_buffer();
                  for (std::size_t i = 0; i < g.size(); ++i) {
                      if (xv[i] > 0.0) gx[i] += g[i];
                  }
              },
              result, x);
    }
    return result;
}

Tensor Tape::exp(const Tensor& x) {
    std::vector<double> out(x.size());
    const auto& xv = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(xv[i]);
    ensure_finite("exp", out);
    bool rec = should_record(x);
    Tensor result = Tensor::make(x.shape(), std::move(out), rec);
    if (rec) {
        push_rule([](const Record& r) {
                  Tensor x = r.in0;
                  const auto& g = r.out.grad();
                  const auto& yv = r.out.values();
                  auto& gx = x.grad_buffer();
                  for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * yv[i];
              },
              result, x);
    }
    return result;
}

Tensor Tape::log(const Tensor& x) {
    const auto& xv = x.values();
    for (double v : xv) {
        if (v <= 0.0) throw DomainError("log requires strictly positive inputs");
    }
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(xv[i]);
    ensure_finite("log", out);
    bool rec = should_record(x);
    Tensor result = Tensor::make(x.shape(), std::move(out), rec);
    if (rec) {
        push_rule([](const Record& r) {
                  Tensor x = r.in0;
                  const auto& g = r.out.grad();
                  const auto& xv = x.values();
                  auto& gx = x.grad_buffer();
                  for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xv[i];
              },
              result, x);
    }
    return result;
}

Tensor Tape::scale(const Tensor& x, double c) {
    std::vector<double> out(x.size());
    const auto& xv = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * xv[i];
    ensure_finite("scale", out);
    bool rec = should_record(x);
    Tensor result = Tensor::make(x.shape(), std::move(out), rec);
    if (rec) {
        Record record;
        record.apply = [](const Record& r) {
            Tensor x = r.in0;
            const auto& g = r.out.grad();
            auto& gx = x.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += r.c0 * g[i];
        };
        record.out = result;
        record.in0 = x;
        record.c0 = c;
        push(std::move(record));
    }
    return result;
}

Tensor Tape::clamp_min(const Tensor& x, double floor) {
    std::vector<double> out(x.size());
    const auto& xv = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > floor ? xv[i] : floor;
    bool rec = should_record(x);
    Tensor result = Tensor::make(x.shape(), std::move(out), rec);
    if (rec) {
        Record record;
        record.apply = [](const Record& r) {
            Tensor x = r.in0;
            const auto& g = r.out.grad();
            const auto& xv = x.values();
            auto& gx = x.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (xv[i] >= r.c0) gx[i] += g[i];
            }
        };
        record.out = result;
        record.in0 = x;
        record.c0 = floor;
        push(std::move(record));
    }
    return result;
}

Tensor Tape::softmax(const Tensor& x) {
    if (x.ndim() != 1) throw ShapeError("softmax expects a 1-D tensor");
    const auto& xv = x.values();
    const double m = *std::max_element(xv.begin(), xv.end());
    std::vector<double> out(x.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(xv[i] - m);
        denom += out[i];
    }
    for (double& v : out) v /= denom;
    ensure_finite("softmax", out);
    bool rec = should_record(x);
    Tensor result = Tensor::make(x.shape(), std::move(out), rec);
    if (rec) {
        push_rule([](const Record& r) {
                  Tensor x = r.in0;
                  const auto& g = r.out.grad();
                  const auto& yv = r.out.values();
                  double dot = 0.0;
                  for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * yv[i];
                  auto& gx = x.grad_buffer();
                  for (std::size_t i = 0; i < g.size(); ++i) gx[i] += yv[i] * (g[i] - dot);
              },
              result, x);
    }
    return result;
}

Tensor Tape::sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.values()) total += v;
    if (!std::isfinite(total)) throw DomainError("sum produced a non-finite value");
    bool rec = should_record(x);
    Tensor result = Tensor::make({1}, {total}, rec);
    if (rec) {
        push_rule([](const Record& r) {
                  Tensor x = r.in0;
                  const double g = r.out.grad()[0];
                  auto& gx = x.grad_buffer();
                  for (double& v : gx) v += g;
              },
              result, x);
    }
    return result;
}

Tensor Tape::mean(const Tensor& x) {
    double total = 0.0;
    for (double v : x.values()) total += v;
    total /= static_cast<double>(x.size());
    if (!std::isfinite(total)) throw DomainError("mean produced a non-finite value");
    bool rec = should_record(x);
    Tensor result = Tensor::make({1}, {total}, rec);
    if (rec) {
        push_rule([](const Record& r) {
                  Tensor x = r.in0;
                  const double g = r.out.grad()[0] / static_cast<double>(x.size());
                  auto& gx = x.grad_buffer();
                  for (double& v : gx) v += g;
              },
              result, x);
    }
    return result;
}

Tensor Tape::l2_norm(const Tensor& x) {
    double sq = 0.0;
    for (double v : x.values()) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw DomainError("l2_norm produced a non-finite value");
    bool rec = should_record(x);
    Tensor result = Tensor::make({1}, {norm}, rec);
    if (rec) {
        push_rule([](const Record& r) {
                  Tensor x = r.in0;
                  const double norm = r.out.values()[0];
                  if (norm == 0.0) return;  // subgradient at the origin
                  const double g = r.out.grad()[0];
                  const auto& xv = x.values();
                  auto& gx = x.grad_buffer();
                  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * xv[i] / norm;
              },
              result, x);
    }
    return result;
}

Tensor Tape::concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat requires at least one operand");
    std::size_t total = 0;
    bool rec = false;
    for (const Tensor& p : parts) {
        if (p.ndim() != 1) throw ShapeError("concat expects 1-D tensors");
        total += p.size();
        rec = rec || (recording_ && p.requires_grad());
    }
    std::vector<double> out;
    out.reserve(total);
    for (const Tensor& p : parts) {
        out.insert(out.end(), p.values().begin(), p.values().end());
    }
    Tensor result = Tensor::make({total}, std::move(out), rec);
    if (rec) {
        Record record;
        record.apply = [](const Record& r) {
            const auto& g = r.out.grad();
            std::size_t offset = 0;
            for (Tensor part : r.extra) {
                if (part.requires_grad()) {
                    auto& gp = part.grad_buffer();
                    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
                }
                offset += part.size();
            }
        };
        record.out = result;
        record.extra = parts;
        push(std::move(record));
    }
    return result;
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || !loss.is_scalar()) {
        throw ContractError("backward requires a scalar loss");
    }
    loss.node_->grad.assign(1, 1.0);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        // Skip records whose output never received a gradient; their
        // contribution is exactly zero.
        if (it->out.grad().empty()) continue;
        it->apply(*it);
    }
}

}  // namespace cfa
