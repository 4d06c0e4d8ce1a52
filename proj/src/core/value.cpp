#include "mska/core/value.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "mska/errors.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace mska::core {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

thread_local bool g_grad_enabled = true;

// Leaves get their gradient buffer up front; interior nodes get one when a
// backward pass reaches them.
std::shared_ptr<Node> make_node(Shape shape, std::vector<double> data, bool requires_grad, bool leaf) {
    for (auto d : shape) {
        if (d == 0) throw DimensionError("zero extent in shape " + to_string(shape));
    }
    if (numel(shape) != data.size()) {
        throw DimensionError("shape " + to_string(shape) + " does not match " +
                             std::to_string(data.size()) + " values");
    }
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    if (requires_grad && leaf) n->grad.assign(n->data.size(), 0.0);
    return n;
}

}  // namespace

Value Value::constant(Shape shape, std::vector<double> data) {
    return Value(make_node(std::move(shape), std::move(data), false, true));
}

Value Value::parameter(Shape shape, std::vector<double> data) {
    return Value(make_node(std::move(shape), std::move(data), true, true));
}

Value Value::zeros(Shape shape, bool requires_grad) {
    const auto n = numel(shape);
    return Value(make_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad, true));
}

Value Value::scalar(double v) { return constant({1}, {v}); }

Value Value::from_op(const char* op, Shape shape, std::vector<double> data,
                     std::vector<Value> inputs, BackwardFn backward) {
    const bool needs = g_grad_enabled && std::any_of(inputs.begin(), inputs.end(),
                                   [](const Value& v) { return v.requires_grad(); });
    auto n = make_node(std::move(shape), std::move(data), needs, !needs);
    n->op = op;
    if (needs) {
        n->inputs.reserve(inputs.size());
        for (auto& v : inputs) n->inputs.push_back(v.node_);
        n->backward = std::move(backward);
    }
    return Value(std::move(n));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

const Shape& Value::shape() const { return node_->shape; }

std::size_t Value::dim(int axis) const { return node_->shape[resolve_axis(axis, rank())]; }

std::size_t Value::size() const { return node_->data.size(); }

std::span<const double> Value::data() const { return node_->data; }

std::span<double> Value::mutable_data() { return node_->data; }

std::span<const double> Value::grad() const { return node_->grad; }

std::span<double> Value::mutable_grad() { return node_->grad; }

double Value::item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
    return node_->data[0];
}

double Value::at(std::initializer_list<std::size_t> index) const {
    if (index.size() != rank()) throw DimensionError("index rank mismatch");
    std::size_t flat = 0;
    std::size_t i = 0;
    for (auto idx : index) {
        if (idx >= node_->shape[i]) throw DimensionError("index out of range");
        flat = flat * node_->shape[i] + idx;
        ++i;
    }
    return node_->data[flat];
}

bool Value::requires_grad() const { return node_ && node_->requires_grad; }

void Value::zero_grad() {
    if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

const char* Value::op() const { return node_->op; }

void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

std::size_t resolve_axis(int axis, std::size_t rank) {
    const long r = static_cast<long>(rank);
    long a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) {
        throw DimensionError("axis " + std::to_string(axis) + " invalid for rank " +
                             std::to_string(rank));
    }
    return static_cast<std::size_t>(a);
}

void backward(const Value& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw ContractError("backward() requires a scalar loss, got shape " +
                            (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
    }
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS; each node is emitted once.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(&loss.node(), 0);
    visited.insert(&loss.node());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->inputs.size()) {
            Node* child = n->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    for (Node* n : order) {
        if (!n->is_leaf()) n->grad.assign(n->data.size(), 0.0);
    }
    loss.node().grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (!(*it)->is_leaf()) (*it)->backward(**it);
    }
}

}  // namespace mska::core
