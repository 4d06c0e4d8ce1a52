#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mska::core {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct Node;

// Propagates the gradient of `self` (already accumulated in self.grad) into
// the gradients of self.inputs.
using BackwardFn = std::function<void(Node& self)>;

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty unless requires_grad
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    BackwardFn backward;
    const char* op = "leaf";

    bool is_leaf() const noexcept { return !backward; }
};

/// Dense float64 tensor participating in a reverse-mode computation graph.
/// Copies are shallow: two Values may refer to the same node.
class Value {
public:
    Value() = default;

    static Value constant(Shape shape, std::vector<double> data);
    static Value parameter(Shape shape, std::vector<double> data);
    static Value zeros(Shape shape, bool requires_grad = false);
    static Value scalar(double v);

    /// Creates an interior node. `data` must hold numel(shape) values. The
    /// backward rule is only attached when some input requires a gradient.
    static Value from_op(const char* op, Shape shape, std::vector<double> data,
                         std::vector<Value> inputs, BackwardFn backward);

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(int axis) const;
    std::size_t size() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    double item() const;
    double at(std::initializer_list<std::size_t> index) const;

    bool requires_grad() const;
    void zero_grad();
    const char* op() const;

    Node& node() const { return *node_; }
    const std::shared_ptr<Node>& node_ptr() const { return node_; }

private:
    explicit Value(std::shared_ptr<Node> n) : node_(std::move(n)) {}
    std::shared_ptr<Node> node_;
};

/// Disables graph recording on the current thread while alive. Operations
/// still compute values but attach no backward rules.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

/// Reverse pass from a scalar. Interior gradients are recomputed on every
/// call; leaf gradients accumulate until zero_grad().
void backward(const Value& loss);

/// Keeps freed tensor memory mapped between training steps instead of
/// returning it to the OS. Each step allocates and frees the same large
/// buffers, so this removes most page-fault overhead. No-op off glibc.
void tune_allocator();

/// Normalizes a possibly negative axis against `rank`; throws DimensionError.
std::size_t resolve_axis(int axis, std::size_t rank);

}  // namespace mska::core
