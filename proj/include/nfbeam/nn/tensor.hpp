// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode differentiable tensor engine. Tensors are 2-D
// (rows x cols); scalars are 1x1. Every op records a backward closure on a
// tape of shared nodes; backward() runs a topological sweep from a scalar
// output and accumulates gradients additively, so reusing a tensor sums the
// path gradients.
//
// The scalar type is a template parameter: float for training, double for
// finite-difference gradient checks.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace nfbeam::nn {

template <class T>
struct TensorNode {
    int rows = 0;
    int cols = 0;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward;

    std::size_t numel() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

template <class T>
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode<T>> node) : node_(std::move(node)) {}

    static Tensor zeros(int rows, int cols, bool requires_grad = false) {
        return filled(rows, cols, T(0), requires_grad);
    }

    static Tensor filled(int rows, int cols, T v, bool requires_grad = false) {
        auto node = std::make_shared<TensorNode<T>>();
        node->rows = rows;
        node->cols = cols;
        node->value.assign(static_cast<std::size_t>(rows) * cols, v);
        node->requires_grad = requires_grad;
        return Tensor(node);
    }

    static Tensor from_data(int rows, int cols, std::vector<T> data, bool requires_grad = false) {
        if (data.size() != static_cast<std::size_t>(rows) * cols) {
            throw std::invalid_argument("tensor: data length does not match shape");
        }
        auto node = std::make_shared<TensorNode<T>>();
        node->rows = rows;
        node->cols = cols;
        node->value = std::move(data);
        node->requires_grad = requires_grad;
        return Tensor(node);
    }

    bool defined() const { return node_ != nullptr; }
    int rows() const { return node_->rows; }
    int cols() const { return node_->cols; }
    std::size_t numel() const { return node_->numel(); }
    bool requires_grad() const { return node_->requires_grad; }

    T& at(int r, int c) { return node_->value[static_cast<std::size_t>(r) * cols() + c]; }
    T at(int r, int c) const { return node_->value[static_cast<std::size_t>(r) * cols() + c]; }
    T item() const {
        if (numel() != 1) throw std::invalid_argument("tensor: item() on non-scalar");
        return node_->value[0];
    }

    std::vector<T>& values() { return node_->value; }
    const std::vector<T>& values() const { return node_->value; }
    std::vector<T>& grad() { return node_->grad; }
    const std::vector<T>& grad() const { return node_->grad; }

    std::shared_ptr<TensorNode<T>> node() const { return node_; }

    void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

    // Reverse-mode sweep from this (scalar) node.
    void backward() const {
        if (numel() != 1) throw std::invalid_argument("backward: output must be scalar");
        if (!node_->requires_grad) return;
        // Iterative post-order over grad-requiring nodes.
        std::vector<TensorNode<T>*> order;
        std::vector<std::pair<TensorNode<T>*, std::size_t>> stack;
        std::unordered_set<TensorNode<T>*> seen;
        stack.emplace_back(node_.get(), 0);
        seen.insert(node_.get());
        while (!stack.empty()) {
            auto& top = stack.back();
            if (top.second < top.first->parents.size()) {
                TensorNode<T>* p = top.first->parents[top.second].get();
                ++top.second;
                if (p->requires_grad && seen.insert(p).second) {
                    stack.emplace_back(p, 0);
                }
            } else {
                order.push_back(top.first);
                stack.pop_back();
            }
        }
        for (auto* n : order) n->ensure_grad();
        node_->grad[0] = T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            if ((*it)->backward) (*it)->backward(**it);
        }
    }

  private:
    std::shared_ptr<TensorNode<T>> node_;
};

namespace detail {

inline std::string shape_str(int r, int c) {
    std::ostringstream os;
    os << "[" << r << " x " << c << "]";
    return os.str();
}

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a.rows(), a.cols()) + " vs " +
                                    shape_str(b.rows(), b.cols()));
    }
}

template <class T>
Tensor<T> make_result(int rows, int cols, std::vector<std::shared_ptr<TensorNode<T>>> parents,
                      std::function<void(TensorNode<T>&)> backward) {
    auto node = std::make_shared<TensorNode<T>>();
    node->rows = rows;
    node->cols = cols;
    node->value.assign(static_cast<std::size_t>(rows) * cols, T(0));
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    node->requires_grad = rg;
    if (rg) {
        node->parents = std::move(parents);
        node->backward = std::move(backward);
    }
    return Tensor<T>(node);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Arithmetic

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "add");
    auto an = a.node();
    auto bn = b.node();
    auto out = detail::make_result<T>(a.rows(), a.cols(), {an, bn}, [an, bn](TensorNode<T>& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
        }
    });
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.values()[i] = an->value[i] + bn->value[i];
    }
    return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "sub");
    auto an = a.node();
    auto bn = b.node();
    auto out = detail::make_result<T>(a.rows(), a.cols(), {an, bn}, [an, bn](TensorNode<T>& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
        }
    });
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.values()[i] = an->value[i] - bn->value[i];
    }
    return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "mul");
    auto an = a.node();
    auto bn = b.node();
    auto out = detail::make_result<T>(a.rows(), a.cols(), {an, bn}, [an, bn](TensorNode<T>& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                an->grad[i] += self.grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                bn->grad[i] += self.grad[i] * an->value[i];
        }
    });
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.values()[i] = an->value[i] * bn->value[i];
    }
    return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, double c) {
    auto an = a.node();
    const T tc = static_cast<T>(c);
    auto out = detail::make_result<T>(a.rows(), a.cols(), {an}, [an, tc](TensorNode<T>& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += tc * self.grad[i];
    });
    for (std::size_t i = 0; i < out.numel(); ++i) out.values()[i] = tc * an->value[i];
    return out;
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, double c) {
    auto an = a.node();
    const T tc = static_cast<T>(c);
    auto out = detail::make_result<T>(a.rows(), a.cols(), {an}, [an](TensorNode<T>& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    });
    for (std::size_t i = 0; i < out.numel(); ++i) out.values()[i] = an->value[i] + tc;
    return out;
}

// Adds a 1 x n row vector to every row of a.
template <class T>
Tensor<T> add_rowvec(const Tensor<T>& a, const Tensor<T>& b) {
    if (b.rows() != 1 || b.cols() != a.cols()) {
        throw std::invalid_argument("add_rowvec: shape mismatch " +
                                    detail::shape_str(a.rows(), a.cols()) + " vs " +
                                    detail::shape_str(b.rows(), b.cols()));
    }
    auto an = a.node();
    auto bn = b.node();
    const int rows = a.rows(), cols = a.cols();
    auto out = detail::make_result<T>(rows, cols, {an, bn}, [an, bn, rows, cols](TensorNode<T>& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (int r = 0; r < rows; ++r) {
                for (int c = 0; c < cols; ++c) {
                    bn->grad[static_cast<std::size_t>(c)] +=
                        self.grad[static_cast<std::size_t>(r) * cols + c];
                }
            }
        }
    });
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            out.values()[static_cast<std::size_t>(r) * cols + c] =
                an->value[static_cast<std::size_t>(r) * cols + c] +
                bn->value[static_cast<std::size_t>(c)];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Linear algebra

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: shape mismatch " +
                                    detail::shape_str(a.rows(), a.cols()) + " vs " +
                                    detail::shape_str(b.rows(), b.cols()));
    }
    auto an = a.node();
    auto bn = b.node();
    const int m = a.rows(), k = a.cols(), n = b.cols();
    auto out = detail::make_result<T>(m, n, {an, bn}, [an, bn, m, k, n](TensorNode<T>& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            // dA += dC * B^T
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    const T g = self.grad[static_cast<std::size_t>(i) * n + j];
                    if (g == T(0)) continue;
                    const T* brow = bn->value.data();
                    for (int p = 0; p < k; ++p) {
                        an->grad[static_cast<std::size_t>(i) * k + p] +=
                            g * brow[static_cast<std::size_t>(p) * n + j];
                    }
                }
            }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            // dB += A^T * dC
            for (int i = 0; i < m; ++i) {
                for (int p = 0; p < k; ++p) {
                    const T av = an->value[static_cast<std::size_t>(i) * k + p];
                    if (av == T(0)) continue;
                    const T* grow = self.grad.data() + static_cast<std::size_t>(i) * n;
                    T* brow = bn->grad.data() + static_cast<std::size_t>(p) * n;
                    for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
                }
            }
        }
    });
    // ikj ordering for contiguous inner loops.
    T* c = out.values().data();
    const T* av = an->value.data();
    const T* bv = bn->value.data();
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const T aval = av[static_cast<std::size_t>(i) * k + p];
            if (aval == T(0)) continue;
            const T* brow = bv + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += aval * brow[j];
        }
    }
    return out;
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
    auto an = a.node();
    const int m = a.rows(), n = a.cols();
    auto out = detail::make_result<T>(n, m, {an}, [an, m, n](TensorNode<T>& self) {
        an->ensure_grad();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < m; ++j) {
                an->grad[static_cast<std::size_t>(j) * n + i] +=
                    self.grad[static_cast<std::size_t>(i) * m + j];
            }
        }
    });
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            out.values()[static_cast<std::size_t>(j) * m + i] =
                an->value[static_cast<std::size_t>(i) * n + j];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shape ops

template <class T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
    const int cols = parts[0].cols();
    int rows = 0;
    std::vector<std::shared_ptr<TensorNode<T>>> parents;
    for (const auto& p : parts) {
        if (p.cols() != cols) {
            throw std::invalid_argument("concat_rows: column mismatch " +
                                        detail::shape_str(p.rows(), p.cols()) + " vs cols=" +
                                        std::to_string(cols));
        }
        rows += p.rows();
        parents.push_back(p.node());
    }
    auto parents_copy = parents;
    auto out = detail::make_result<T>(rows, cols, std::move(parents),
                                      [parents_copy](TensorNode<T>& self) {
                                          std::size_t off = 0;
                                          for (const auto& p : parents_copy) {
                                              const std::size_t len = p->numel();
                                              if (p->requires_grad) {
                                                  p->ensure_grad();
                                                  for (std::size_t i = 0; i < len; ++i) {
                                                      p->grad[i] += self.grad[off + i];
                                                  }
                                              }
                                              off += len;
                                          }
                                      });
    std::size_t off = 0;
    for (const auto& p : parts) {
        const auto& v = p.values();
        std::copy(v.begin(), v.end(), out.values().begin() + static_cast<std::ptrdiff_t>(off));
        off += v.size();
    }
    return out;
}

template <class T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
    const int rows = parts[0].rows();
    int cols = 0;
    std::vector<std::shared_ptr<TensorNode<T>>> parents;
    std::vector<int> widths;
    for (const auto& p : parts) {
        if (p.rows() != rows) {
            throw std::invalid_argument("concat_cols: row mismatch " +
                                        detail::shape_str(p.rows(), p.cols()) + " vs rows=" +
                                        std::to_string(rows));
        }
        cols += p.cols();
        widths.push_back(p.cols());
        parents.push_back(p.node());
    }
    auto parents_copy = parents;
    const int total = cols;
    auto out = detail::make_result<T>(
        rows, cols, std::move(parents), [parents_copy, widths, rows, total](TensorNode<T>& self) {
            int col0 = 0;
            for (std::size_t pi = 0; pi < parents_copy.size(); ++pi) {
                const auto& p = parents_copy[pi];
                const int w = widths[pi];
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (int r = 0; r < rows; ++r) {
                        for (int c = 0; c < w; ++c) {
                            p->grad[static_cast<std::size_t>(r) * w + c] +=
                                self.grad[static_cast<std::size_t>(r) * total + col0 + c];
                        }
                    }
                }
                col0 += w;
            }
        });
    int col0 = 0;
    for (const auto& p : parts) {
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < p.cols(); ++c) {
                out.values()[static_cast<std::size_t>(r) * cols + col0 + c] = p.at(r, c);
            }
        }
        col0 += p.cols();
    }
    return out;
}

template <class T>
Tensor<T> slice(const Tensor<T>& a, int r0, int r1, int c0, int c1) {
    if (r0 < 0 || r1 > a.rows() || r0 >= r1 || c0 < 0 || c1 > a.cols() || c0 >= c1) {
        throw std::invalid_argument("slice: window [" + std::to_string(r0) + "," +
                                    std::to_string(r1) + ")x[" + std::to_string(c0) + "," +
                                    std::to_string(c1) + ") outside " +
                                    detail::shape_str(a.rows(), a.cols()));
    }
    auto an = a.node();
    const int rows = r1 - r0, cols = c1 - c0, acols = a.cols();
    auto out = detail::make_result<T>(rows, cols, {an},
                                      [an, r0, c0, rows, cols, acols](TensorNode<T>& self) {
                                          an->ensure_grad();
                                          for (int r = 0; r < rows; ++r) {
                                              for (int c = 0; c < cols; ++c) {
                                                  an->grad[static_cast<std::size_t>(r0 + r) * acols +
                                                           c0 + c] +=
                                                      self.grad[static_cast<std::size_t>(r) * cols + c];
                                              }
                                          }
                                      });
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            out.values()[static_cast<std::size_t>(r) * cols + c] = a.at(r0 + r, c0 + c);
        }
    }
    return out;
}

template <class T>
Tensor<T> slice_rows(const Tensor<T>& a, int r0, int r1) {
    return slice(a, r0, r1, 0, a.cols());
}

template <class T>
Tensor<T> slice_cols(const Tensor<T>& a, int c0, int c1) {
    return slice(a, 0, a.rows(), c0, c1);
}

template <class T>
Tensor<T> row(const Tensor<T>& a, int r) {
    return slice(a, r, r + 1, 0, a.cols());
}

// Forward copy that blocks gradient flow.
template <class T>
Tensor<T> detach(const Tensor<T>& a) {
    return Tensor<T>::from_data(a.rows(), a.cols(), a.values(), false);
}

// ---------------------------------------------------------------------------
// Reductions

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
    auto an = a.node();
    auto out = detail::make_result<T>(1, 1, {an}, [an](TensorNode<T>& self) {
        an->ensure_grad();
        for (auto& g : an->grad) g += self.grad[0];
    });
    T total = T(0);
    for (const T v : an->value) total += v;
    out.values()[0] = total;
    return out;
}

template <class T>
Tensor<T> mean(const Tensor<T>& a) {
    auto an = a.node();
    const T inv = T(1) / static_cast<T>(a.numel());
    auto out = detail::make_result<T>(1, 1, {an}, [an, inv](TensorNode<T>& self) {
        an->ensure_grad();
        for (auto& g : an->grad) g += inv * self.grad[0];
    });
    T total = T(0);
    for (const T v : an->value) total += v;
    out.values()[0] = total * inv;
    return out;
}

// Mean over rows: m x n -> 1 x n.
template <class T>
Tensor<T> mean_rows(const Tensor<T>& a) {
    auto an = a.node();
    const int rows = a.rows(), cols = a.cols();
    const T inv = T(1) / static_cast<T>(rows);
    auto out = detail::make_result<T>(1, cols, {an}, [an, rows, cols, inv](TensorNode<T>& self) {
        an->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                an->grad[static_cast<std::size_t>(r) * cols + c] +=
                    inv * self.grad[static_cast<std::size_t>(c)];
            }
        }
    });
    for (int c = 0; c < cols; ++c) {
        T total = T(0);
        for (int r = 0; r < rows; ++r) total += a.at(r, c);
        out.values()[static_cast<std::size_t>(c)] = total * inv;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

template <class T>
Tensor<T> relu(const Tensor<T>& a) {
    auto an = a.node();
    auto out = detail::make_result<T>(a.rows(), a.cols(), {an}, [an](TensorNode<T>& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (an->value[i] > T(0)) an->grad[i] += self.grad[i];
        }
    });
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.values()[i] = an->value[i] > T(0) ? an->value[i] : T(0);
    }
    return out;
}

template <class T>
Tensor<T> gelu(const Tensor<T>& a) {
    auto an = a.node();
    auto out = detail::make_result<T>(a.rows(), a.cols(), {an}, [an](TensorNode<T>& self) {
        an->ensure_grad();
        constexpr double inv_sqrt2 = 0.70710678118654752440;
        constexpr double inv_sqrt2pi = 0.39894228040143267794;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double x = static_cast<double>(an->value[i]);
            const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            an->grad[i] += self.grad[i] * static_cast<T>(cdf + x * pdf);
        }
    });
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double x = static_cast<double>(an->value[i]);
        out.values()[i] = static_cast<T>(x * 0.5 * (1.0 + std::erf(x * inv_sqrt2)));
    }
    return out;
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    auto an = a.node();
    auto out = detail::make_result<T>(a.rows(), a.cols(), {an}, [an](TensorNode<T>& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const T s = self.value[i];
            an->grad[i] += self.grad[i] * s * (T(1) - s);
        }
    });
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double x = static_cast<double>(an->value[i]);
        const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        out.values()[i] = static_cast<T>(s);
    }
    return out;
}

template <class T>
Tensor<T> abs_op(const Tensor<T>& a) {
    auto an = a.node();
    auto out = detail::make_result<T>(a.rows(), a.cols(), {an}, [an](TensorNode<T>& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const T x = an->value[i];
            if (x > T(0)) {
                an->grad[i] += self.grad[i];
            } else if (x < T(0)) {
                an->grad[i] -= self.grad[i];
            }
        }
    });
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.values()[i] = an->value[i] < T(0) ? -an->value[i] : an->value[i];
    }
    return out;
}

template <class T>
Tensor<T> log_op(const Tensor<T>& a) {
    auto an = a.node();
    auto out = detail::make_result<T>(a.rows(), a.cols(), {an}, [an](TensorNode<T>& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            an->grad[i] += self.grad[i] / an->value[i];
        }
    });
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out.values()[i] = std::log(an->value[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Row-wise softmax family and layer norm

template <class T>
Tensor<T> softmax_rows(const Tensor<T>& a) {
    auto an = a.node();
    const int rows = a.rows(), cols = a.cols();
    auto out = detail::make_result<T>(rows, cols, {an}, [an, rows, cols](TensorNode<T>& self) {
        an->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            const T* s = self.value.data() + static_cast<std::size_t>(r) * cols;
            const T* g = self.grad.data() + static_cast<std::size_t>(r) * cols;
            T dot = T(0);
            for (int c = 0; c < cols; ++c) dot += g[c] * s[c];
            T* ag = an->grad.data() + static_cast<std::size_t>(r) * cols;
            for (int c = 0; c < cols; ++c) ag[c] += (g[c] - dot) * s[c];
        }
    });
    for (int r = 0; r < rows; ++r) {
        const T* x = an->value.data() + static_cast<std::size_t>(r) * cols;
        T* y = out.values().data() + static_cast<std::size_t>(r) * cols;
        T mx = x[0];
        for (int c = 1; c < cols; ++c) mx = std::max(mx, x[c]);
        T total = T(0);
        for (int c = 0; c < cols; ++c) {
            y[c] = std::exp(x[c] - mx);
            total += y[c];
        }
        for (int c = 0; c < cols; ++c) y[c] /= total;
    }
    return out;
}

template <class T>
Tensor<T> log_softmax_rows(const Tensor<T>& a) {
    auto an = a.node();
    const int rows = a.rows(), cols = a.cols();
    auto out = detail::make_result<T>(rows, cols, {an}, [an, rows, cols](TensorNode<T>& self) {
        an->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            const T* ls = self.value.data() + static_cast<std::size_t>(r) * cols;
            const T* g = self.grad.data() + static_cast<std::size_t>(r) * cols;
            T gsum = T(0);
            for (int c = 0; c < cols; ++c) gsum += g[c];
            T* ag = an->grad.data() + static_cast<std::size_t>(r) * cols;
            for (int c = 0; c < cols; ++c) ag[c] += g[c] - std::exp(ls[c]) * gsum;
        }
    });
    for (int r = 0; r < rows; ++r) {
        const T* x = an->value.data() + static_cast<std::size_t>(r) * cols;
        T* y = out.values().data() + static_cast<std::size_t>(r) * cols;
        T mx = x[0];
        for (int c = 1; c < cols; ++c) mx = std::max(mx, x[c]);
        T total = T(0);
        for (int c = 0; c < cols; ++c) total += std::exp(x[c] - mx);
        const T lse = mx + std::log(total);
        for (int c = 0; c < cols; ++c) y[c] = x[c] - lse;
    }
    return out;
}

// Row-wise softmax restricted to entries with keep[r*cols+c] != 0; denied
// entries get exactly zero weight and zero gradient.
template <class T>
Tensor<T> masked_softmax_rows(const Tensor<T>& a, const std::vector<std::uint8_t>& keep) {
    if (keep.size() != a.numel()) {
        throw std::invalid_argument("masked_softmax: mask size " + std::to_string(keep.size()) +
                                    " != tensor " + detail::shape_str(a.rows(), a.cols()));
    }
    auto an = a.node();
    const int rows = a.rows(), cols = a.cols();
    auto mask = keep;
    auto out =
        detail::make_result<T>(rows, cols, {an}, [an, rows, cols, mask](TensorNode<T>& self) {
            an->ensure_grad();
            for (int r = 0; r < rows; ++r) {
                const T* s = self.value.data() + static_cast<std::size_t>(r) * cols;
                const T* g = self.grad.data() + static_cast<std::size_t>(r) * cols;
                T dot = T(0);
                for (int c = 0; c < cols; ++c) dot += g[c] * s[c];
                T* ag = an->grad.data() + static_cast<std::size_t>(r) * cols;
                for (int c = 0; c < cols; ++c) ag[c] += (g[c] - dot) * s[c];
            }
        });
    for (int r = 0; r < rows; ++r) {
        const T* x = an->value.data() + static_cast<std::size_t>(r) * cols;
        const std::uint8_t* krow = keep.data() + static_cast<std::size_t>(r) * cols;
        T* y = out.values().data() + static_cast<std::size_t>(r) * cols;
        T mx = T(0);
        bool any = false;
        for (int c = 0; c < cols; ++c) {
            if (krow[c] && (!any || x[c] > mx)) {
                mx = x[c];
                any = true;
            }
        }
        if (!any) throw std::invalid_argument("masked_softmax: fully masked row");
        T total = T(0);
        for (int c = 0; c < cols; ++c) {
            y[c] = krow[c] ? std::exp(x[c] - mx) : T(0);
            total += y[c];
        }
        for (int c = 0; c < cols; ++c) y[c] /= total;
    }
    return out;
}

// Row-wise layer norm with learnable gain/bias (1 x n each).
template <class T>
Tensor<T> layer_norm_rows(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                          double eps = 1e-5) {
    if (gain.rows() != 1 || gain.cols() != x.cols() || bias.rows() != 1 ||
        bias.cols() != x.cols()) {
        throw std::invalid_argument("layer_norm: gain/bias must be 1 x " +
                                    std::to_string(x.cols()) + ", got " +
                                    detail::shape_str(gain.rows(), gain.cols()) + " and " +
                                    detail::shape_str(bias.rows(), bias.cols()));
    }
    auto xn = x.node();
    auto gn = gain.node();
    auto bn = bias.node();
    const int rows = x.rows(), cols = x.cols();
    const T teps = static_cast<T>(eps);

    // Cache normalized rows and inverse stddevs for the backward pass.
    auto xhat = std::make_shared<std::vector<T>>(x.numel());
    auto istd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows));

    auto out = detail::make_result<T>(
        rows, cols, {xn, gn, bn}, [xn, gn, bn, xhat, istd, rows, cols](TensorNode<T>& self) {
            const T invn = T(1) / static_cast<T>(cols);
            for (int r = 0; r < rows; ++r) {
                const T* xh = xhat->data() + static_cast<std::size_t>(r) * cols;
                const T* g = self.grad.data() + static_cast<std::size_t>(r) * cols;
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    for (int c = 0; c < cols; ++c) gn->grad[static_cast<std::size_t>(c)] += g[c] * xh[c];
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    for (int c = 0; c < cols; ++c) bn->grad[static_cast<std::size_t>(c)] += g[c];
                }
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    T mean_dxhat = T(0), mean_dxhat_xhat = T(0);
                    for (int c = 0; c < cols; ++c) {
                        const T dxh = g[c] * gn->value[static_cast<std::size_t>(c)];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xh[c];
                    }
                    mean_dxhat *= invn;
                    mean_dxhat_xhat *= invn;
                    const T is = (*istd)[static_cast<std::size_t>(r)];
                    T* ag = xn->grad.data() + static_cast<std::size_t>(r) * cols;
                    for (int c = 0; c < cols; ++c) {
                        const T dxh = g[c] * gn->value[static_cast<std::size_t>(c)];
                        ag[c] += is * (dxh - mean_dxhat - xh[c] * mean_dxhat_xhat);
                    }
                }
            }
        });
    for (int r = 0; r < rows; ++r) {
        const T* xi = xn->value.data() + static_cast<std::size_t>(r) * cols;
        T mu = T(0);
        for (int c = 0; c < cols; ++c) mu += xi[c];
        mu /= static_cast<T>(cols);
        T var = T(0);
        for (int c = 0; c < cols; ++c) var += (xi[c] - mu) * (xi[c] - mu);
        var /= static_cast<T>(cols);
        const T is = T(1) / std::sqrt(var + teps);
        (*istd)[static_cast<std::size_t>(r)] = is;
        T* xh = xhat->data() + static_cast<std::size_t>(r) * cols;
        T* y = out.values().data() + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) {
            xh[c] = (xi[c] - mu) * is;
            y[c] = xh[c] * gn->value[static_cast<std::size_t>(c)] +
                   bn->value[static_cast<std::size_t>(c)];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Embedding and time ops

template <class T>
Tensor<T> embedding_lookup(const Tensor<T>& table, const std::vector<int>& ids) {
    if (ids.empty()) throw std::invalid_argument("embedding_lookup: no indices");
    for (int id : ids) {
        if (id < 0 || id >= table.rows()) {
            throw std::out_of_range("embedding_lookup: index " + std::to_string(id) +
                                    " outside [0, " + std::to_string(table.rows()) + ")");
        }
    }
    auto tn = table.node();
    const int cols = table.cols();
    const int n = static_cast<int>(ids.size());
    auto idv = ids;
    auto out = detail::make_result<T>(n, cols, {tn}, [tn, idv, cols, n](TensorNode<T>& self) {
        tn->ensure_grad();
        for (int r = 0; r < n; ++r) {
            const std::size_t dst = static_cast<std::size_t>(idv[static_cast<std::size_t>(r)]) * cols;
            for (int c = 0; c < cols; ++c) {
                tn->grad[dst + c] += self.grad[static_cast<std::size_t>(r) * cols + c];
            }
        }
    });
    for (int r = 0; r < n; ++r) {
        const std::size_t src = static_cast<std::size_t>(ids[static_cast<std::size_t>(r)]) * cols;
        for (int c = 0; c < cols; ++c) {
            out.values()[static_cast<std::size_t>(r) * cols + c] = tn->value[src + c];
        }
    }
    return out;
}

// Prefix sums over rows (time axis); backward is the reversed suffix sum.
template <class T>
Tensor<T> cumsum_rows(const Tensor<T>& a) {
    auto an = a.node();
    const int rows = a.rows(), cols = a.cols();
    auto out = detail::make_result<T>(rows, cols, {an}, [an, rows, cols](TensorNode<T>& self) {
        an->ensure_grad();
        for (int c = 0; c < cols; ++c) {
            T acc = T(0);
            for (int r = rows - 1; r >= 0; --r) {
                acc += self.grad[static_cast<std::size_t>(r) * cols + c];
                an->grad[static_cast<std::size_t>(r) * cols + c] += acc;
            }
        }
    });
    for (int c = 0; c < cols; ++c) {
        T acc = T(0);
        for (int r = 0; r < rows; ++r) {
            acc += an->value[static_cast<std::size_t>(r) * cols + c];
            out.values()[static_cast<std::size_t>(r) * cols + c] = acc;
        }
    }
    return out;
}

}  // namespace nfbeam::nn
