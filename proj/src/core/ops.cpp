#include "mska/core/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "mska/errors.hpp"

namespace mska::core {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;
using MatMap = Eigen::Map<RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;
using VecMap = Eigen::Map<Eigen::RowVectorXd>;

ConstMatMap cmat(const std::vector<double>& v, std::size_t offset, std::size_t r, std::size_t c) {
    return ConstMatMap(v.data() + offset, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

MatMap mmat(std::vector<double>& v, std::size_t offset, std::size_t r, std::size_t c) {
    return MatMap(v.data() + offset, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

Node& in(Node& self, std::size_t i) { return *self.inputs[i]; }

// outer x len x inner decomposition of a shape around `axis`.
struct AxisSplit {
    std::size_t outer = 1;
    std::size_t len = 1;
    std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.len = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
    Shape out;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i != axis) out.push_back(shape[i]);
    }
    if (out.empty()) out.push_back(1);
    return out;
}

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

enum class BinaryKind { Add, Sub, Mul };

Value binary(const Value& a_in, const Value& b_in, BinaryKind kind, const char* name) {
    // The broadcast operand always ends up in `b`; for Sub the sign is tracked.
    bool swapped = false;
    const Value* a = &a_in;
    const Value* b = &b_in;
    if (!is_suffix(b->shape(), a->shape())) {
        if (is_suffix(a->shape(), b->shape())) {
            std::swap(a, b);
            swapped = true;
        } else {
            throw DimensionError(std::string(name) + ": incompatible shapes " +
                                 to_string(a_in.shape()) + " and " + to_string(b_in.shape()));
        }
    }
    const auto& ad = a->data();
    const auto& bd = b->data();
    const std::size_t inner = bd.size();
    const std::size_t total = ad.size();
    // For Sub with swapped operands the result is b - a (broadcast).
    const double sa = (kind == BinaryKind::Sub && swapped) ? -1.0 : 1.0;
    const double sb = (kind == BinaryKind::Sub && !swapped) ? -1.0 : 1.0;
    const std::size_t outer = total / inner;
    std::vector<double> out(total);
    for (std::size_t o = 0; o < outer; ++o) {
        const double* x = ad.data() + o * inner;
        double* y = out.data() + o * inner;
        if (kind == BinaryKind::Mul) {
            for (std::size_t j = 0; j < inner; ++j) y[j] = x[j] * bd[j];
        } else {
            for (std::size_t j = 0; j < inner; ++j) y[j] = sa * x[j] + sb * bd[j];
        }
    }
    return Value::from_op(name, a->shape(), std::move(out), {*a, *b},
                          [kind, sa, sb, inner, outer](Node& self) {
                              Node& na = in(self, 0);
                              Node& nb = in(self, 1);
                              for (std::size_t o = 0; o < outer; ++o) {
                                  const double* g = self.grad.data() + o * inner;
                                  if (na.requires_grad) {
                                      double* dst = na.grad.data() + o * inner;
                                      if (kind == BinaryKind::Mul) {
                                          for (std::size_t j = 0; j < inner; ++j) dst[j] += g[j] * nb.data[j];
                                      } else {
                                          for (std::size_t j = 0; j < inner; ++j) dst[j] += sa * g[j];
                                      }
                                  }
                                  if (nb.requires_grad) {
                                      double* dst = nb.grad.data();
                                      if (kind == BinaryKind::Mul) {
                                          const double* x = na.data.data() + o * inner;
                                          for (std::size_t j = 0; j < inner; ++j) dst[j] += g[j] * x[j];
                                      } else {
                                          for (std::size_t j = 0; j < inner; ++j) dst[j] += sb * g[j];
                                      }
                                  }
                              }
                          });
}

template <class F, class DF>
Value unary(const Value& x, const char* name, F f, DF df) {
    const auto& xd = x.data();
    std::vector<double> out(xd.size());
    for (std::size_t i = 0; i < xd.size(); ++i) out[i] = f(xd[i]);
    return Value::from_op(name, x.shape(), std::move(out), {x}, [df](Node& self) {
        Node& nx = in(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            nx.grad[i] += self.grad[i] * df(nx.data[i], self.data[i]);
        }
    });
}

}  // namespace

void require_finite(const Value& x, const char* what) {
    for (double v : x.data()) {
        if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite input");
    }
}

Value matmul(const Value& a, const Value& b) {
    if (a.rank() < 2 || b.rank() < 2) {
        throw DimensionError("matmul: operands need rank >= 2, got " + to_string(a.shape()) +
                             " and " + to_string(b.shape()));
    }
    const std::size_t m = a.dim(-2);
    const std::size_t k = a.dim(-1);
    const std::size_t n = b.dim(-1);
    if (b.dim(-2) != k) {
        throw DimensionError("matmul: inner extents differ for " + to_string(a.shape()) + " x " +
                             to_string(b.shape()));
    }
    const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
    const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
    Shape batch;
    if (batch_a == batch_b || batch_b.empty()) {
        batch = batch_a;
    } else if (batch_a.empty()) {
        batch = batch_b;
    } else {
        throw DimensionError("matmul: batch extents not broadcastable for " + to_string(a.shape()) +
                             " x " + to_string(b.shape()));
    }
    const std::size_t count = numel(batch);
    const std::size_t step_a = batch_a.empty() ? 0 : m * k;
    const std::size_t step_b = batch_b.empty() ? 0 : k * n;

    Shape out_shape = batch;
    out_shape.push_back(m);
    out_shape.push_back(n);
    std::vector<double> out(count * m * n);
    const auto& ad = a.node().data;
    const auto& bd = b.node().data;
    for (std::size_t i = 0; i < count; ++i) {
        mmat(out, i * m * n, m, n).noalias() = cmat(ad, i * step_a, m, k) * cmat(bd, i * step_b, k, n);
    }
    return Value::from_op("matmul", std::move(out_shape), std::move(out), {a, b},
                          [=](Node& self) {
                              Node& na = in(self, 0);
                              Node& nb = in(self, 1);
                              for (std::size_t i = 0; i < count; ++i) {
                                  auto g = cmat(self.grad, i * m * n, m, n);
                                  if (na.requires_grad) {
                                      mmat(na.grad, i * step_a, m, k).noalias() +=
                                          g * cmat(nb.data, i * step_b, k, n).transpose();
                                  }
                                  if (nb.requires_grad) {
                                      mmat(nb.grad, i * step_b, k, n).noalias() +=
                                          cmat(na.data, i * step_a, m, k).transpose() * g;
                                  }
                              }
                          });
}

Value add(const Value& a, const Value& b) { return binary(a, b, BinaryKind::Add, "add"); }
Value sub(const Value& a, const Value& b) { return binary(a, b, BinaryKind::Sub, "sub"); }
Value mul(const Value& a, const Value& b) { return binary(a, b, BinaryKind::Mul, "mul"); }

Value scale(const Value& a, double s) {
    return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Value tanh(const Value& x) {
    require_finite(x, "tanh");
    return unary(x, "tanh", [](double v) { return std::tanh(v); },
                 [](double, double y) { return 1.0 - y * y; });
}

Value relu(const Value& x) {
    return unary(x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
                 [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Value leaky_relu(const Value& x, double slope) {
    return unary(x, "leaky_relu", [slope](double v) { return v > 0.0 ? v : slope * v; },
                 [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Value softmax(const Value& x, int axis) {
    require_finite(x, "softmax");
    const auto s = split_axis(x.shape(), resolve_axis(axis, x.rank()));
    const auto& xd = x.node().data;
    std::vector<double> out(xd.size());
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t j = 0; j < s.inner; ++j) {
            const std::size_t base = o * s.len * s.inner + j;
            double mx = -INFINITY;
            for (std::size_t l = 0; l < s.len; ++l) mx = std::max(mx, xd[base + l * s.inner]);
            double z = 0.0;
            for (std::size_t l = 0; l < s.len; ++l) {
                out[base + l * s.inner] = std::exp(xd[base + l * s.inner] - mx);
                z += out[base + l * s.inner];
            }
            for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= z;
        }
    }
    return Value::from_op("softmax", x.shape(), std::move(out), {x}, [s](Node& self) {
        Node& nx = in(self, 0);
        for (std::size_t o = 0; o < s.outer; ++o) {
            for (std::size_t j = 0; j < s.inner; ++j) {
                const std::size_t base = o * s.len * s.inner + j;
                double dot = 0.0;
                for (std::size_t l = 0; l < s.len; ++l) {
                    dot += self.grad[base + l * s.inner] * self.data[base + l * s.inner];
                }
                for (std::size_t l = 0; l < s.len; ++l) {
                    const std::size_t i = base + l * s.inner;
                    nx.grad[i] += self.data[i] * (self.grad[i] - dot);
                }
            }
        }
    });
}

Value log_softmax(const Value& x, int axis) {
    require_finite(x, "log_softmax");
    const auto s = split_axis(x.shape(), resolve_axis(axis, x.rank()));
    const auto& xd = x.node().data;
    std::vector<double> out(xd.size());
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t j = 0; j < s.inner; ++j) {
            const std::size_t base = o * s.len * s.inner + j;
            double mx = -INFINITY;
            for (std::size_t l = 0; l < s.len; ++l) mx = std::max(mx, xd[base + l * s.inner]);
            double z = 0.0;
            for (std::size_t l = 0; l < s.len; ++l) z += std::exp(xd[base + l * s.inner] - mx);
            const double lz = mx + std::log(z);
            for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] = xd[base + l * s.inner] - lz;
        }
    }
    return Value::from_op("log_softmax", x.shape(), std::move(out), {x}, [s](Node& self) {
        Node& nx = in(self, 0);
        for (std::size_t o = 0; o < s.outer; ++o) {
            for (std::size_t j = 0; j < s.inner; ++j) {
                const std::size_t base = o * s.len * s.inner + j;
                double gsum = 0.0;
                for (std::size_t l = 0; l < s.len; ++l) gsum += self.grad[base + l * s.inner];
                for (std::size_t l = 0; l < s.len; ++l) {
                    const std::size_t i = base + l * s.inner;
                    nx.grad[i] += self.grad[i] - std::exp(self.data[i]) * gsum;
                }
            }
        }
    });
}

Value kl_divergence(const Value& log_p, const Value& log_q, int axis) {
    if (log_p.shape() != log_q.shape()) {
        throw DimensionError("kl_divergence: shapes " + to_string(log_p.shape()) + " and " +
                             to_string(log_q.shape()) + " differ");
    }
    require_finite(log_p, "kl_divergence");
    require_finite(log_q, "kl_divergence");
    const std::size_t ax = resolve_axis(axis, log_p.rank());
    const auto s = split_axis(log_p.shape(), ax);
    const auto& lp = log_p.node().data;
    const auto& lq = log_q.node().data;
    std::vector<double> out(s.outer * s.inner, 0.0);
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t j = 0; j < s.inner; ++j) {
            double acc = 0.0;
            for (std::size_t l = 0; l < s.len; ++l) {
                const std::size_t i = (o * s.len + l) * s.inner + j;
                acc += std::exp(lp[i]) * (lp[i] - lq[i]);
            }
            out[o * s.inner + j] = acc;
        }
    }
    return Value::from_op("kl_divergence", drop_axis(log_p.shape(), ax), std::move(out),
                          {log_p, log_q}, [s](Node& self) {
                              Node& np = in(self, 0);
                              Node& nq = in(self, 1);
                              for (std::size_t o = 0; o < s.outer; ++o) {
                                  for (std::size_t j = 0; j < s.inner; ++j) {
                                      const double g = self.grad[o * s.inner + j];
                                      for (std::size_t l = 0; l < s.len; ++l) {
                                          const std::size_t i = (o * s.len + l) * s.inner + j;
                                          const double p = std::exp(np.data[i]);
                                          if (np.requires_grad) {
                                              np.grad[i] += g * p * (np.data[i] - nq.data[i] + 1.0);
                                          }
                                          if (nq.requires_grad) nq.grad[i] -= g * p;
                                      }
                                  }
                              }
                          });
}

Value linear(const Value& x, const Value& w, const Value& b) {
    if (w.rank() != 2 || x.dim(-1) != w.dim(0)) {
        throw DimensionError("linear: input " + to_string(x.shape()) + " vs weight " +
                             to_string(w.shape()));
    }
    const std::size_t k = w.dim(0);
    const std::size_t n = w.dim(1);
    const std::size_t rows = x.size() / k;
    const bool has_bias = b.defined();
    if (has_bias && (b.size() != n)) {
        throw DimensionError("linear: bias " + to_string(b.shape()) + " vs weight " +
                             to_string(w.shape()));
    }
    Shape out_shape = x.shape();
    out_shape.back() = n;
    std::vector<double> out(rows * n);
    auto y = mmat(out, 0, rows, n);
    y.noalias() = cmat(x.node().data, 0, rows, k) * cmat(w.node().data, 0, k, n);
    if (has_bias) y.rowwise() += ConstVecMap(b.node().data.data(), static_cast<Eigen::Index>(n));

    std::vector<Value> inputs{x, w};
    if (has_bias) inputs.push_back(b);
    return Value::from_op("linear", std::move(out_shape), std::move(out), std::move(inputs),
                          [=](Node& self) {
                              Node& nx = in(self, 0);
                              Node& nw = in(self, 1);
                              auto g = cmat(self.grad, 0, rows, n);
                              if (nx.requires_grad) {
                                  mmat(nx.grad, 0, rows, k).noalias() +=
                                      g * cmat(nw.data, 0, k, n).transpose();
                              }
                              if (nw.requires_grad) {
                                  mmat(nw.grad, 0, k, n).noalias() +=
                                      cmat(nx.data, 0, rows, k).transpose() * g;
                              }
                              if (has_bias && in(self, 2).requires_grad) {
                                  VecMap(in(self, 2).grad.data(), static_cast<Eigen::Index>(n)) +=
                                      g.colwise().sum();
                              }
                          });
}

Value temporal_conv(const Value& x, const Value& w, const Value& b, std::size_t stride) {
    if (x.rank() != 4) throw DimensionError("temporal_conv: expected [B,T,N,C], got " + to_string(x.shape()));
    if (w.rank() != 3 || w.dim(0) != 3 || w.dim(1) != x.dim(3)) {
        throw DimensionError("temporal_conv: weight " + to_string(w.shape()) + " incompatible with input " +
                             to_string(x.shape()));
    }
    if (stride == 0) throw ContractError("temporal_conv: stride must be positive");
    const std::size_t batch = x.dim(0), frames = x.dim(1), joints = x.dim(2), cin = x.dim(3);
    const std::size_t cout = w.dim(2);
    const std::size_t out_frames = (frames - 1) / stride + 1;
    const bool has_bias = b.defined();
    if (has_bias && b.size() != cout) throw DimensionError("temporal_conv: bias size mismatch");

    const std::size_t rows = batch * out_frames * joints;
    const std::size_t width = 3 * cin;
    auto cols = std::make_shared<std::vector<double>>(rows * width, 0.0);
    const auto& xd = x.node().data;
    for (std::size_t bi = 0; bi < batch; ++bi) {
        for (std::size_t to = 0; to < out_frames; ++to) {
            for (std::size_t tap = 0; tap < 3; ++tap) {
                const long t = static_cast<long>(to * stride + tap) - 1;
                if (t < 0 || t >= static_cast<long>(frames)) continue;
                for (std::size_t n = 0; n < joints; ++n) {
                    const double* src = xd.data() + ((bi * frames + t) * joints + n) * cin;
                    double* dst = cols->data() + ((bi * out_frames + to) * joints + n) * width + tap * cin;
                    std::copy(src, src + cin, dst);
                }
            }
        }
    }
    std::vector<double> out(rows * cout);
    auto y = mmat(out, 0, rows, cout);
    y.noalias() = cmat(*cols, 0, rows, width) * cmat(w.node().data, 0, width, cout);
    if (has_bias) y.rowwise() += ConstVecMap(b.node().data.data(), static_cast<Eigen::Index>(cout));

    std::vector<Value> inputs{x, w};
    if (has_bias) inputs.push_back(b);
    return Value::from_op(
        "temporal_conv", {batch, out_frames, joints, cout}, std::move(out), std::move(inputs),
        [=](Node& self) {
            Node& nx = in(self, 0);
            Node& nw = in(self, 1);
            auto g = cmat(self.grad, 0, rows, cout);
            if (nw.requires_grad) {
                mmat(nw.grad, 0, width, cout).noalias() += cmat(*cols, 0, rows, width).transpose() * g;
            }
            if (has_bias && in(self, 2).requires_grad) {
                VecMap(in(self, 2).grad.data(), static_cast<Eigen::Index>(cout)) += g.colwise().sum();
            }
            if (nx.requires_grad) {
                RowMat dcols = g * cmat(nw.data, 0, width, cout).transpose();
                for (std::size_t bi = 0; bi < batch; ++bi) {
                    for (std::size_t to = 0; to < out_frames; ++to) {
                        for (std::size_t tap = 0; tap < 3; ++tap) {
                            const long t = static_cast<long>(to * stride + tap) - 1;
                            if (t < 0 || t >= static_cast<long>(frames)) continue;
                            for (std::size_t n = 0; n < joints; ++n) {
                                const std::size_t row = (bi * out_frames + to) * joints + n;
                                const double* src = dcols.data() + row * width + tap * cin;
                                double* dst = nx.grad.data() + ((bi * frames + t) * joints + n) * cin;
                                for (std::size_t c = 0; c < cin; ++c) dst[c] += src[c];
                            }
                        }
                    }
                }
            }
        });
}

Value mean(const Value& x, int axis) {
    const std::size_t ax = resolve_axis(axis, x.rank());
    const auto s = split_axis(x.shape(), ax);
    const auto& xd = x.node().data;
    std::vector<double> out(s.outer * s.inner, 0.0);
    const double inv = 1.0 / static_cast<double>(s.len);
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t l = 0; l < s.len; ++l) {
            const double* src = xd.data() + (o * s.len + l) * s.inner;
            double* dst = out.data() + o * s.inner;
            for (std::size_t j = 0; j < s.inner; ++j) dst[j] += src[j];
        }
    }
    for (auto& v : out) v *= inv;
    return Value::from_op("mean", drop_axis(x.shape(), ax), std::move(out), {x}, [s, inv](Node& self) {
        Node& nx = in(self, 0);
        for (std::size_t o = 0; o < s.outer; ++o) {
            for (std::size_t l = 0; l < s.len; ++l) {
                double* dst = nx.grad.data() + (o * s.len + l) * s.inner;
                const double* g = self.grad.data() + o * s.inner;
                for (std::size_t j = 0; j < s.inner; ++j) dst[j] += g[j] * inv;
            }
        }
    });
}

Value sum(const Value& x) {
    const auto& xd = x.node().data;
    const double total = std::accumulate(xd.begin(), xd.end(), 0.0);
    return Value::from_op("sum", {1}, {total}, {x}, [](Node& self) {
        Node& nx = in(self, 0);
        for (auto& g : nx.grad) g += self.grad[0];
    });
}

Value concat(const std::vector<Value>& parts, int axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    const std::size_t ax = resolve_axis(axis, parts[0].rank());
    Shape out_shape = parts[0].shape();
    out_shape[ax] = 0;
    std::vector<std::size_t> lens;
    for (const auto& p : parts) {
        if (p.rank() != parts[0].rank()) throw DimensionError("concat: rank mismatch");
        for (std::size_t i = 0; i < p.rank(); ++i) {
            if (i != ax && p.shape()[i] != parts[0].shape()[i]) {
                throw DimensionError("concat: shapes " + to_string(parts[0].shape()) + " and " +
                                     to_string(p.shape()) + " differ off-axis");
            }
        }
        lens.push_back(p.shape()[ax]);
        out_shape[ax] += p.shape()[ax];
    }
    const auto s = split_axis(out_shape, ax);
    std::vector<double> out(numel(out_shape));
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& pd = parts[k].node().data;
        const std::size_t chunk = lens[k] * s.inner;
        for (std::size_t o = 0; o < s.outer; ++o) {
            std::copy(pd.begin() + o * chunk, pd.begin() + (o + 1) * chunk,
                      out.begin() + o * s.len * s.inner + offset * s.inner);
        }
        offset += lens[k];
    }
    return Value::from_op("concat", out_shape, std::move(out), parts, [s, lens](Node& self) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < lens.size(); ++k) {
            Node& np = in(self, k);
            const std::size_t chunk = lens[k] * s.inner;
            if (np.requires_grad) {
                for (std::size_t o = 0; o < s.outer; ++o) {
                    const double* g = self.grad.data() + o * s.len * s.inner + offset * s.inner;
                    double* dst = np.grad.data() + o * chunk;
                    for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[i];
                }
            }
            offset += lens[k];
        }
    });
}

Value reshape(const Value& x, Shape shape) {
    if (numel(shape) != x.size()) {
        throw DimensionError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
    }
    return Value::from_op("reshape", std::move(shape), x.node().data, {x}, [](Node& self) {
        Node& nx = in(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += self.grad[i];
    });
}

Value permute(const Value& x, const std::vector<std::size_t>& order) {
    const std::size_t r = x.rank();
    if (order.size() != r) throw DimensionError("permute: order rank mismatch");
    std::vector<bool> seen(r, false);
    for (auto o : order) {
        if (o >= r || seen[o]) throw DimensionError("permute: invalid axis order");
        seen[o] = true;
    }
    const Shape& in_shape = x.shape();
    std::vector<std::size_t> in_stride(r, 1);
    for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * in_shape[i];
    Shape out_shape(r);
    std::vector<std::size_t> src_stride(r);
    for (std::size_t i = 0; i < r; ++i) {
        out_shape[i] = in_shape[order[i]];
        src_stride[i] = in_stride[order[i]];
    }
    // map[i] = source flat index of output element i
    auto map = std::make_shared<std::vector<std::size_t>>(x.size());
    std::vector<std::size_t> idx(r, 0);
    std::size_t src = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        (*map)[i] = src;
        for (std::size_t d = r; d-- > 0;) {
            ++idx[d];
            src += src_stride[d];
            if (idx[d] < out_shape[d]) break;
            src -= src_stride[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    const auto& xd = x.node().data;
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[(*map)[i]];
    return Value::from_op("permute", std::move(out_shape), std::move(out), {x}, [map](Node& self) {
        Node& nx = in(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[(*map)[i]] += self.grad[i];
    });
}

Value detach(const Value& x) { return Value::constant(x.shape(), x.node().data); }

Value batch_norm(const Value& x, const Value& gamma, const Value& beta, BatchNormState& state,
                 bool training) {
    const std::size_t c = x.dim(-1);
    if (gamma.size() != c || beta.size() != c || state.running_mean.size() != c) {
        throw DimensionError("batch_norm: channel count mismatch for input " + to_string(x.shape()));
    }
    const std::size_t rows = x.size() / c;
    const auto& xd = x.node().data;
    const auto& gd = gamma.node().data;
    const auto& bd = beta.node().data;

    std::vector<double> mu(c, 0.0), var(c, 0.0);
    if (training) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < c; ++j) mu[j] += xd[r * c + j];
        for (auto& m : mu) m /= static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < c; ++j) {
                const double d = xd[r * c + j] - mu[j];
                var[j] += d * d;
            }
        for (auto& v : var) v /= static_cast<double>(rows);
        for (std::size_t j = 0; j < c; ++j) {
            state.running_mean[j] = state.momentum * state.running_mean[j] + (1.0 - state.momentum) * mu[j];
            state.running_var[j] = state.momentum * state.running_var[j] + (1.0 - state.momentum) * var[j];
        }
    } else {
        mu = state.running_mean;
        var = state.running_var;
    }
    auto inv_std = std::make_shared<std::vector<double>>(c);
    for (std::size_t j = 0; j < c; ++j) (*inv_std)[j] = 1.0 / std::sqrt(var[j] + state.eps);
    auto xhat = std::make_shared<std::vector<double>>(x.size());
    std::vector<double> out(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < c; ++j) {
            const std::size_t i = r * c + j;
            (*xhat)[i] = (xd[i] - mu[j]) * (*inv_std)[j];
            out[i] = gd[j] * (*xhat)[i] + bd[j];
        }
    }
    return Value::from_op(
        "batch_norm", x.shape(), std::move(out), {x, gamma, beta},
        [=](Node& self) {
            Node& nx = in(self, 0);
            Node& ng = in(self, 1);
            Node& nb = in(self, 2);
            const auto& g = self.grad;
            std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t j = 0; j < c; ++j) {
                    sum_g[j] += g[r * c + j];
                    sum_gx[j] += g[r * c + j] * (*xhat)[r * c + j];
                }
            }
            if (ng.requires_grad)
                for (std::size_t j = 0; j < c; ++j) ng.grad[j] += sum_gx[j];
            if (nb.requires_grad)
                for (std::size_t j = 0; j < c; ++j) nb.grad[j] += sum_g[j];
            if (!nx.requires_grad) return;
            const double inv_rows = 1.0 / static_cast<double>(rows);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t j = 0; j < c; ++j) {
                    const std::size_t i = r * c + j;
                    const double k = ng.data[j] * (*inv_std)[j];
                    if (training) {
                        nx.grad[i] += k * (g[i] - sum_g[j] * inv_rows - (*xhat)[i] * sum_gx[j] * inv_rows);
                    } else {
                        nx.grad[i] += k * g[i];
                    }
                }
            }
        });
}

}  // namespace mska::core
