#include "grepool/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace grepool {

namespace {

std::string shape_str(int r, int c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

std::string shape_str(const TensorNode& n) {
    return shape_str(n.rows, n.cols);
}

// C[n x m] += A[n x k] * B[k x m], ikj order for row-major locality.
void mm_acc(double* c, const double* a, const double* b, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) continue;
            const double* bp = b + static_cast<size_t>(p) * m;
            for (int j = 0; j < m; ++j) ci[j] += aip * bp[j];
        }
    }
}

// C[n x m] += A[n x k] * B^T, where B is m x k.
void mm_nt_acc(double* c, const double* a, const double* b, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * m;
        for (int j = 0; j < m; ++j) {
            const double* bj = b + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] += s;
        }
    }
}

// C[n x m] += A^T * B, where A is k x n and B is k x m.
void mm_tn_acc(double* c, const double* a, const double* b, int n, int k, int m) {
    for (int p = 0; p < k; ++p) {
        const double* ap = a + static_cast<size_t>(p) * n;
        const double* bp = b + static_cast<size_t>(p) * m;
        for (int i = 0; i < n; ++i) {
            const double api = ap[i];
            if (api == 0.0) continue;
            double* ci = c + static_cast<size_t>(i) * m;
            for (int j = 0; j < m; ++j) ci[j] += api * bp[j];
        }
    }
}

std::shared_ptr<TensorNode> make_node(int rows, int cols, std::vector<std::shared_ptr<TensorNode>> inputs,
                                      const char* op) {
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->values.assign(static_cast<size_t>(rows) * cols, 0.0);
    n->inputs = std::move(inputs);
    n->op = op;
    for (const auto& in : n->inputs) {
        if (in->requires_grad) n->requires_grad = true;
    }
    return n;
}

}  // namespace

double* TensorNode::grad_data() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    return grad.data();
}

void TensorNode::zero_grad() {
    std::fill(grad.begin(), grad.end(), 0.0);
}

Tensor::Tensor(int rows, int cols) {
    if (rows < 0 || cols < 0) throw shape_error("tensor shape must be non-negative, got " + shape_str(rows, cols));
    node_ = std::make_shared<TensorNode>();
    node_->rows = rows;
    node_->cols = cols;
    node_->values.assign(static_cast<size_t>(rows) * cols, 0.0);
}

Tensor::Tensor(int rows, int cols, std::vector<double> values) : Tensor(rows, cols) {
    if (values.size() != static_cast<size_t>(rows) * cols) {
        throw shape_error("value count " + std::to_string(values.size()) + " does not fill " + shape_str(rows, cols));
    }
    node_->values = std::move(values);
}

Tensor Tensor::full(int rows, int cols, double value) {
    Tensor t(rows, cols);
    std::fill(t.values().begin(), t.values().end(), value);
    return t;
}

Tensor Tensor::identity(int n) {
    Tensor t(n, n);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

Tensor& Tensor::set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
}

double Tensor::item() const {
    if (rows() != 1 || cols() != 1) throw shape_error("item() needs a 1x1 tensor, got " + shape_str(*node_));
    return node_->values[0];
}

double Tensor::grad_at(int r, int c) const {
    if (!has_grad()) return 0.0;
    return node_->grad[static_cast<size_t>(r) * cols() + c];
}

Tape Tape::record(const Tensor& root) {
    Tape tape;
    tape.root_ = root.node();
    std::unordered_set<TensorNode*> seen;
    // Iterative post-order DFS; the resulting order places inputs before
    // every node that consumes them.
    std::vector<std::pair<TensorNode*, size_t>> stack;
    std::unordered_map<TensorNode*, std::shared_ptr<TensorNode>> owner;
    owner[root.node().get()] = root.node();
    stack.push_back({root.node().get(), 0});
    seen.insert(root.node().get());
    std::unordered_set<TensorNode*> emitted;
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            auto child = node->inputs[next++];
            if (!emitted.count(child.get()) && !seen.count(child.get())) {
                seen.insert(child.get());
                owner[child.get()] = child;
                stack.push_back({child.get(), 0});
            }
        } else {
            tape.records_.push_back(owner[node]);
            emitted.insert(node);
            seen.erase(node);
            stack.pop_back();
        }
    }
    return tape;
}

void Tape::backward() {
    if (root_->rows != 1 || root_->cols != 1) {
        throw shape_error("backward needs a scalar loss, got " + shape_str(*root_));
    }
    // Each replay must start from clean pass-local gradients; previously
    // accumulated ones are stashed and added back afterwards, so repeated
    // calls accumulate on every node without double-counting through stale
    // intermediate buffers.
    std::vector<std::vector<double>> stash(records_.size());
    for (size_t i = 0; i < records_.size(); ++i) stash[i] = std::move(records_[i]->grad);
    for (auto& n : records_) n->grad.clear();

    root_->grad_data()[0] = 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        TensorNode& n = **it;
        if (n.backward_fn && n.requires_grad && n.has_grad()) n.backward_fn(n);
    }
    for (size_t i = 0; i < records_.size(); ++i) {
        if (stash[i].empty()) continue;
        if (records_[i]->grad.empty()) {
            records_[i]->grad = std::move(stash[i]);
        } else {
            for (size_t j = 0; j < stash[i].size(); ++j) records_[i]->grad[j] += stash[i][j];
        }
    }
}

void Tape::zero_grad() {
    for (auto& n : records_) n->zero_grad();
}

void backward(const Tensor& loss) {
    Tape::record(loss).backward();
}

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw shape_error("matmul: inner dimensions differ, " + shape_str(*a.node()) + " * " + shape_str(*b.node()));
    }
    auto out = make_node(a.rows(), b.cols(), {a.node(), b.node()}, "matmul");
    mm_acc(out->values.data(), a.values().data(), b.values().data(), a.rows(), a.cols(), b.cols());
    out->backward_fn = [](TensorNode& o) {
        TensorNode& a = *o.inputs[0];
        TensorNode& b = *o.inputs[1];
        // da += g * b^T, db += a^T * g
        if (a.requires_grad) mm_nt_acc(a.grad_data(), o.grad.data(), b.values.data(), a.rows, b.cols, a.cols);
        if (b.requires_grad) mm_tn_acc(b.grad_data(), a.values.data(), o.grad.data(), a.cols, a.rows, b.cols);
    };
    return Tensor(out);
}

Tensor transpose(const Tensor& t) {
    auto out = make_node(t.cols(), t.rows(), {t.node()}, "transpose");
    for (int i = 0; i < t.rows(); ++i)
        for (int j = 0; j < t.cols(); ++j) out->values[static_cast<size_t>(j) * t.rows() + i] = t.at(i, j);
    out->backward_fn = [](TensorNode& o) {
        TensorNode& in = *o.inputs[0];
        if (!in.requires_grad) return;
        double* g = in.grad_data();
        for (int i = 0; i < o.rows; ++i)
            for (int j = 0; j < o.cols; ++j)
                g[static_cast<size_t>(j) * o.rows + i] += o.grad[static_cast<size_t>(i) * o.cols + j];
    };
    return Tensor(out);
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw shape_error(std::string(op) + ": shapes differ, " + shape_str(*a.node()) + " vs " + shape_str(*b.node()));
    }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    auto out = make_node(a.rows(), a.cols(), {a.node(), b.node()}, "add");
    for (size_t i = 0; i < out->values.size(); ++i) out->values[i] = a.values()[i] + b.values()[i];
    out->backward_fn = [](TensorNode& o) {
        for (int k = 0; k < 2; ++k) {
            TensorNode& in = *o.inputs[k];
            if (!in.requires_grad) continue;
            double* g = in.grad_data();
            for (size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
        }
    };
    return Tensor(out);
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "hadamard");
    auto out = make_node(a.rows(), a.cols(), {a.node(), b.node()}, "hadamard");
    for (size_t i = 0; i < out->values.size(); ++i) out->values[i] = a.values()[i] * b.values()[i];
    out->backward_fn = [](TensorNode& o) {
        TensorNode& a = *o.inputs[0];
        TensorNode& b = *o.inputs[1];
        if (a.requires_grad) {
            double* g = a.grad_data();
            for (size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * b.values[i];
        }
        if (b.requires_grad) {
            double* g = b.grad_data();
            for (size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * a.values[i];
        }
    };
    return Tensor(out);
}

Tensor scale(const Tensor& t, double s) {
    auto out = make_node(t.rows(), t.cols(), {t.node()}, "scale");
    for (size_t i = 0; i < out->values.size(); ++i) out->values[i] = t.values()[i] * s;
    out->backward_fn = [s](TensorNode& o) {
        TensorNode& in = *o.inputs[0];
        if (!in.requires_grad) return;
        double* g = in.grad_data();
        for (size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * s;
    };
    return Tensor(out);
}

Tensor relu(const Tensor& t) {
    auto out = make_node(t.rows(), t.cols(), {t.node()}, "relu");
    for (size_t i = 0; i < out->values.size(); ++i) out->values[i] = t.values()[i] > 0.0 ? t.values()[i] : 0.0;
    out->backward_fn = [](TensorNode& o) {
        TensorNode& in = *o.inputs[0];
        if (!in.requires_grad) return;
        double* g = in.grad_data();
        for (size_t i = 0; i < o.grad.size(); ++i)
            if (in.values[i] > 0.0) g[i] += o.grad[i];
    };
    return Tensor(out);
}

Tensor tanh(const Tensor& t) {
    auto out = make_node(t.rows(), t.cols(), {t.node()}, "tanh");
    for (size_t i = 0; i < out->values.size(); ++i) out->values[i] = std::tanh(t.values()[i]);
    out->backward_fn = [](TensorNode& o) {
        TensorNode& in = *o.inputs[0];
        if (!in.requires_grad) return;
        double* g = in.grad_data();
        for (size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * (1.0 - o.values[i] * o.values[i]);
    };
    return Tensor(out);
}

Tensor log(const Tensor& t) {
    auto out = make_node(t.rows(), t.cols(), {t.node()}, "log");
    for (size_t i = 0; i < out->values.size(); ++i) out->values[i] = std::log(t.values()[i]);
    out->backward_fn = [](TensorNode& o) {
        TensorNode& in = *o.inputs[0];
        if (!in.requires_grad) return;
        double* g = in.grad_data();
        for (size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] / in.values[i];
    };
    return Tensor(out);
}

Tensor clamp_min(const Tensor& t, double lo) {
    auto out = make_node(t.rows(), t.cols(), {t.node()}, "clamp_min");
    for (size_t i = 0; i < out->values.size(); ++i) out->values[i] = std::max(t.values()[i], lo);
    out->backward_fn = [lo](TensorNode& o) {
        TensorNode& in = *o.inputs[0];
        if (!in.requires_grad) return;
        double* g = in.grad_data();
        for (size_t i = 0; i < o.grad.size(); ++i)
            if (in.values[i] > lo) g[i] += o.grad[i];
    };
    return Tensor(out);
}

namespace {

Tensor row_reduce(const Tensor& t, bool mean) {
    auto out = make_node(t.rows(), 1, {t.node()}, mean ? "row_mean" : "row_sum");
    const double w = mean ? 1.0 / t.cols() : 1.0;
    for (int i = 0; i < t.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < t.cols(); ++j) s += t.at(i, j);
        out->values[i] = s * w;
    }
    out->backward_fn = [w](TensorNode& o) {
        TensorNode& in = *o.inputs[0];
        if (!in.requires_grad) return;
        double* g = in.grad_data();
        for (int i = 0; i < in.rows; ++i)
            for (int j = 0; j < in.cols; ++j) g[static_cast<size_t>(i) * in.cols + j] += o.grad[i] * w;
    };
    return Tensor(out);
}

}  // namespace

Tensor row_sum(const Tensor& t) { return row_reduce(t, false); }
Tensor row_mean(const Tensor& t) { return row_reduce(t, true); }

Tensor sum_all(const Tensor& t) {
    auto out = make_node(1, 1, {t.node()}, "sum_all");
    double s = 0.0;
    for (double v : t.values()) s += v;
    out->values[0] = s;
    out->backward_fn = [](TensorNode& o) {
        TensorNode& in = *o.inputs[0];
        if (!in.requires_grad) return;
        double* g = in.grad_data();
        for (size_t i = 0; i < in.values.size(); ++i) g[i] += o.grad[0];
    };
    return Tensor(out);
}

Tensor recip(const Tensor& t) {
    auto out = make_node(t.rows(), t.cols(), {t.node()}, "recip");
    for (size_t i = 0; i < out->values.size(); ++i) out->values[i] = 1.0 / t.values()[i];
    out->backward_fn = [](TensorNode& o) {
        TensorNode& in = *o.inputs[0];
        if (!in.requires_grad) return;
        double* g = in.grad_data();
        for (size_t i = 0; i < o.grad.size(); ++i) g[i] -= o.grad[i] * o.values[i] * o.values[i];
    };
    return Tensor(out);
}

Tensor segment_sum_rows(const Tensor& t, const std::vector<int>& row_segment, int n_segments) {
    if (row_segment.size() != static_cast<size_t>(t.rows())) {
        throw shape_error("segment_sum_rows: " + std::to_string(row_segment.size()) + " segment ids for " +
                          std::to_string(t.rows()) + " rows");
    }
    for (int s : row_segment) {
        if (s < 0 || s >= n_segments) throw index_error("segment_sum_rows: segment " + std::to_string(s) + " out of range");
    }
    auto out = make_node(n_segments, t.cols(), {t.node()}, "segment_sum_rows");
    for (int r = 0; r < t.rows(); ++r) {
        double* dst = out->values.data() + static_cast<size_t>(row_segment[r]) * t.cols();
        const double* src = t.values().data() + static_cast<size_t>(r) * t.cols();
        for (int j = 0; j < t.cols(); ++j) dst[j] += src[j];
    }
    out->backward_fn = [row_segment](TensorNode& o) {
        TensorNode& in = *o.inputs[0];
        if (!in.requires_grad) return;
        double* g = in.grad_data();
        for (int r = 0; r < in.rows; ++r) {
            const double* src = o.grad.data() + static_cast<size_t>(row_segment[r]) * o.cols;
            for (int j = 0; j < o.cols; ++j) g[static_cast<size_t>(r) * o.cols + j] += src[j];
        }
    };
    return Tensor(out);
}

Tensor gather_rows(const Tensor& t, const std::vector<int>& idx) {
    std::unordered_set<int> seen;
    for (int i : idx) {
        if (i < 0 || i >= t.rows()) {
            throw index_error("gather_rows: index " + std::to_string(i) + " out of range [0, " +
                              std::to_string(t.rows()) + ")");
        }
        if (!seen.insert(i).second) throw index_error("gather_rows: duplicate index " + std::to_string(i));
    }
    auto out = make_node(static_cast<int>(idx.size()), t.cols(), {t.node()}, "gather_rows");
    for (size_t r = 0; r < idx.size(); ++r)
        std::copy_n(t.values().data() + static_cast<size_t>(idx[r]) * t.cols(), t.cols(),
                    out->values.data() + r * t.cols());
    out->backward_fn = [idx](TensorNode& o) {
        TensorNode& in = *o.inputs[0];
        if (!in.requires_grad) return;
        double* g = in.grad_data();
        for (size_t r = 0; r < idx.size(); ++r)
            for (int j = 0; j < o.cols; ++j)
                g[static_cast<size_t>(idx[r]) * o.cols + j] += o.grad[r * o.cols + j];
    };
    return Tensor(out);
}

Tensor slice_cols(const Tensor& t, int c0, int c1) {
    if (c0 < 0 || c1 > t.cols() || c0 >= c1) {
        throw index_error("slice_cols: range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                          ") invalid for " + std::to_string(t.cols()) + " columns");
    }
    const int w = c1 - c0;
    auto out = make_node(t.rows(), w, {t.node()}, "slice_cols");
    for (int i = 0; i < t.rows(); ++i)
        std::copy_n(t.values().data() + static_cast<size_t>(i) * t.cols() + c0, w,
                    out->values.data() + static_cast<size_t>(i) * w);
    out->backward_fn = [c0, w](TensorNode& o) {
        TensorNode& in = *o.inputs[0];
        if (!in.requires_grad) return;
        double* g = in.grad_data();
        for (int i = 0; i < o.rows; ++i)
            for (int j = 0; j < w; ++j) g[static_cast<size_t>(i) * in.cols + c0 + j] += o.grad[static_cast<size_t>(i) * w + j];
    };
    return Tensor(out);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw shape_error("concat_cols: no parts");
    int rows = parts[0].rows(), cols = 0;
    std::vector<std::shared_ptr<TensorNode>> ins;
    std::vector<int> widths;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw shape_error("concat_cols: row counts differ");
        cols += p.cols();
        widths.push_back(p.cols());
        ins.push_back(p.node());
    }
    auto out = make_node(rows, cols, std::move(ins), "concat_cols");
    int off = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < rows; ++i)
            std::copy_n(p.values().data() + static_cast<size_t>(i) * p.cols(), p.cols(),
                        out->values.data() + static_cast<size_t>(i) * cols + off);
        off += p.cols();
    }
    out->backward_fn = [widths](TensorNode& o) {
        int off = 0;
        for (size_t k = 0; k < o.inputs.size(); ++k) {
            TensorNode& in = *o.inputs[k];
            const int w = widths[k];
            if (in.requires_grad) {
                double* g = in.grad_data();
                for (int i = 0; i < o.rows; ++i)
                    for (int j = 0; j < w; ++j)
                        g[static_cast<size_t>(i) * w + j] += o.grad[static_cast<size_t>(i) * o.cols + off + j];
            }
            off += w;
        }
    };
    return Tensor(out);
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw shape_error("concat_rows: no parts");
    int cols = parts[0].cols(), rows = 0;
    std::vector<std::shared_ptr<TensorNode>> ins;
    std::vector<int> heights;
    for (const auto& p : parts) {
        if (p.cols() != cols) throw shape_error("concat_rows: column counts differ");
        rows += p.rows();
        heights.push_back(p.rows());
        ins.push_back(p.node());
    }
    auto out = make_node(rows, cols, std::move(ins), "concat_rows");
    size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.values().begin(), p.values().end(), out->values.begin() + off);
        off += p.values().size();
    }
    out->backward_fn = [heights](TensorNode& o) {
        size_t off = 0;
        for (size_t k = 0; k < o.inputs.size(); ++k) {
            TensorNode& in = *o.inputs[k];
            const size_t count = static_cast<size_t>(heights[k]) * o.cols;
            if (in.requires_grad) {
                double* g = in.grad_data();
                for (size_t i = 0; i < count; ++i) g[i] += o.grad[off + i];
            }
            off += count;
        }
    };
    return Tensor(out);
}

Tensor scale_rows(const Tensor& t, const Tensor& s) {
    if (s.cols() != 1 || s.rows() != t.rows()) {
        throw shape_error("scale_rows: scales must be " + std::to_string(t.rows()) + "x1, got " + shape_str(*s.node()));
    }
    auto out = make_node(t.rows(), t.cols(), {t.node(), s.node()}, "scale_rows");
    for (int i = 0; i < t.rows(); ++i)
        for (int j = 0; j < t.cols(); ++j) out->values[static_cast<size_t>(i) * t.cols() + j] = t.at(i, j) * s.values()[i];
    out->backward_fn = [](TensorNode& o) {
        TensorNode& t = *o.inputs[0];
        TensorNode& s = *o.inputs[1];
        if (t.requires_grad) {
            double* g = t.grad_data();
            for (int i = 0; i < o.rows; ++i)
                for (int j = 0; j < o.cols; ++j)
                    g[static_cast<size_t>(i) * o.cols + j] += o.grad[static_cast<size_t>(i) * o.cols + j] * s.values[i];
        }
        if (s.requires_grad) {
            double* g = s.grad_data();
            for (int i = 0; i < o.rows; ++i) {
                double acc = 0.0;
                for (int j = 0; j < o.cols; ++j)
                    acc += o.grad[static_cast<size_t>(i) * o.cols + j] * t.values[static_cast<size_t>(i) * o.cols + j];
                g[i] += acc;
            }
        }
    };
    return Tensor(out);
}

Tensor add_row_vector(const Tensor& t, const Tensor& v) {
    if (v.rows() != 1 || v.cols() != t.cols()) {
        throw shape_error("add_row_vector: vector must be 1x" + std::to_string(t.cols()) + ", got " + shape_str(*v.node()));
    }
    auto out = make_node(t.rows(), t.cols(), {t.node(), v.node()}, "add_row_vector");
    for (int i = 0; i < t.rows(); ++i)
        for (int j = 0; j < t.cols(); ++j) out->values[static_cast<size_t>(i) * t.cols() + j] = t.at(i, j) + v.values()[j];
    out->backward_fn = [](TensorNode& o) {
        TensorNode& t = *o.inputs[0];
        TensorNode& v = *o.inputs[1];
        if (t.requires_grad) {
            double* g = t.grad_data();
            for (size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
        }
        if (v.requires_grad) {
            double* g = v.grad_data();
            for (int i = 0; i < o.rows; ++i)
                for (int j = 0; j < o.cols; ++j) g[j] += o.grad[static_cast<size_t>(i) * o.cols + j];
        }
    };
    return Tensor(out);
}

namespace {

// Stabilized softmax of one row restricted to unmasked positions; masked
// positions are written as exact 0.
void softmax_row(const double* logits, const uint8_t* mask, int n, double* out) {
    double mx = -1e300;
    for (int j = 0; j < n; ++j)
        if (!mask || mask[j]) mx = std::max(mx, logits[j]);
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
        if (!mask || mask[j]) {
            out[j] = std::exp(logits[j] - mx);
            denom += out[j];
        } else {
            out[j] = 0.0;
        }
    }
    for (int j = 0; j < n; ++j)
        if (!mask || mask[j]) out[j] /= denom;
}

// d logits = y * (dy - sum(dy * y)) over the row's support (masked entries
// have y == 0 and contribute nothing).
void softmax_row_backward(const double* y, const double* dy, int n, double* dlogits) {
    double dot = 0.0;
    for (int j = 0; j < n; ++j) dot += dy[j] * y[j];
    for (int j = 0; j < n; ++j) dlogits[j] += y[j] * (dy[j] - dot);
}

}  // namespace

Tensor softmax_masked(const Tensor& logits, const std::vector<uint8_t>& mask) {
    if (logits.rows() != 1) throw shape_error("softmax_masked: logits must be 1xn, got " + shape_str(*logits.node()));
    if (mask.size() != static_cast<size_t>(logits.cols())) {
        throw shape_error("softmax_masked: mask length " + std::to_string(mask.size()) + " != " +
                          std::to_string(logits.cols()));
    }
    if (std::none_of(mask.begin(), mask.end(), [](uint8_t m) { return m != 0; })) {
        throw mask_error("softmax_masked: every position is masked");
    }
    auto out = make_node(1, logits.cols(), {logits.node()}, "softmax_masked");
    softmax_row(logits.values().data(), mask.data(), logits.cols(), out->values.data());
    out->backward_fn = [](TensorNode& o) {
        TensorNode& in = *o.inputs[0];
        if (!in.requires_grad) return;
        softmax_row_backward(o.values.data(), o.grad.data(), o.cols, in.grad_data());
    };
    return Tensor(out);
}

Tensor softmax_rows(const Tensor& logits) {
    auto out = make_node(logits.rows(), logits.cols(), {logits.node()}, "softmax_rows");
    for (int i = 0; i < logits.rows(); ++i)
        softmax_row(logits.values().data() + static_cast<size_t>(i) * logits.cols(), nullptr, logits.cols(),
                    out->values.data() + static_cast<size_t>(i) * logits.cols());
    out->backward_fn = [](TensorNode& o) {
        TensorNode& in = *o.inputs[0];
        if (!in.requires_grad) return;
        for (int i = 0; i < o.rows; ++i) {
            const size_t off = static_cast<size_t>(i) * o.cols;
            softmax_row_backward(o.values.data() + off, o.grad.data() + off, o.cols, in.grad_data() + off);
        }
    };
    return Tensor(out);
}

GradCheckReport grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs, double h,
                           double tol) {
    if (h <= 0) throw config_error("grad_check: h must be positive");
    GradCheckReport report;

    Tensor loss = f();
    if (loss.rows() != 1 || loss.cols() != 1) throw shape_error("grad_check: f must return a scalar");
    Tape tape = Tape::record(loss);
    tape.zero_grad();
    // Inputs that do not reach the loss are not on the tape; clear their
    // gradients too so the snapshot below is this pass's gradient only.
    for (const auto& in : inputs) in.node()->zero_grad();
    tape.backward();
    std::vector<std::vector<double>> analytic;
    for (const auto& in : inputs) {
        analytic.push_back(in.has_grad() ? in.grad() : std::vector<double>(in.values().size(), 0.0));
    }

    for (size_t k = 0; k < inputs.size(); ++k) {
        Tensor in = inputs[k];
        for (int r = 0; r < in.rows(); ++r) {
            for (int c = 0; c < in.cols(); ++c) {
                const double saved = in.at(r, c);
                in.at(r, c) = saved + h;
                const double hi = f().item();
                in.at(r, c) = saved - h;
                const double lo = f().item();
                in.at(r, c) = saved;
                const double numeric = (hi - lo) / (2.0 * h);
                const double a = analytic[k][static_cast<size_t>(r) * in.cols() + c];
                const double rel = std::abs(a - numeric) / std::max(1e-6, std::max(std::abs(a), std::abs(numeric)));
                report.max_rel_err = std::max(report.max_rel_err, rel);
                if (rel > tol) {
                    report.failures.push_back({static_cast<int>(k), r, c, a, numeric, rel});
                }
            }
        }
    }
    return report;
}

}  // namespace grepool
