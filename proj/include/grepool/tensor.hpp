#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "grepool/errors.hpp"

namespace grepool {

// One node of the computation record: a dense 2-D value grid plus the
// provenance needed to replay the producing operation backward. Leaves have
// empty inputs and no backward_fn. The provenance graph is acyclic by
// construction (an op's inputs always exist before its output).
struct TensorNode {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;  // row-major, rows*cols entries
    std::vector<double> grad;    // empty until first accumulation
    bool requires_grad = false;

    std::vector<std::shared_ptr<TensorNode>> inputs;
    std::function<void(TensorNode&)> backward_fn;  // accumulates into inputs
    const char* op = "leaf";

    // Gradient buffer, zero-initialized on first use.
    double* grad_data();
    void zero_grad();
    bool has_grad() const { return !grad.empty(); }
};

// Shared handle over a TensorNode. Copies alias the same storage; ops build
// fresh nodes. All numeric state is 64-bit.
class Tensor {
public:
    Tensor() = default;
    Tensor(int rows, int cols);  // zero-filled
    Tensor(int rows, int cols, std::vector<double> values);

    static Tensor full(int rows, int cols, double value);
    static Tensor identity(int n);

    Tensor& set_requires_grad(bool on = true);

    bool defined() const { return node_ != nullptr; }
    int rows() const { return node_->rows; }
    int cols() const { return node_->cols; }
    int size() const { return node_->rows * node_->cols; }

    double at(int r, int c) const { return node_->values[static_cast<size_t>(r) * node_->cols + c]; }
    double& at(int r, int c) { return node_->values[static_cast<size_t>(r) * node_->cols + c]; }
    double item() const;  // value of a 1x1 tensor

    const std::vector<double>& values() const { return node_->values; }
    std::vector<double>& values() { return node_->values; }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return node_->has_grad(); }
    double grad_at(int r, int c) const;
    const std::vector<double>& grad() const { return node_->grad; }
    void zero_grad() { node_->zero_grad(); }

    const std::shared_ptr<TensorNode>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<TensorNode> node_;
};

// The operation record of one backward pass: every node reachable from a
// root, ordered so that each record's inputs precede it. Replaying the
// reversed list propagates gradients to every requires_grad ancestor.
class Tape {
public:
    static Tape record(const Tensor& root);

    // Seeds the root gradient with 1 and replays the reversed record list.
    // Repeated calls without zero_grad accumulate. Root must be scalar.
    void backward();
    void zero_grad();

    size_t size() const { return records_.size(); }
    const std::vector<std::shared_ptr<TensorNode>>& records() const { return records_; }

private:
    std::vector<std::shared_ptr<TensorNode>> records_;
    std::shared_ptr<TensorNode> root_;
};

// Convenience: record + replay in one step.
void backward(const Tensor& loss);

// ---- differentiable operations ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& t);
Tensor add(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& t, double s);
Tensor relu(const Tensor& t);
Tensor tanh(const Tensor& t);
Tensor log(const Tensor& t);
Tensor clamp_min(const Tensor& t, double lo);  // zero subgradient on clamped entries

Tensor row_sum(const Tensor& t);   // n x d -> n x 1
Tensor row_mean(const Tensor& t);  // n x d -> n x 1
Tensor sum_all(const Tensor& t);   // n x d -> 1 x 1
Tensor recip(const Tensor& t);     // elementwise 1/x

// out[s, :] = sum of rows r with row_segment[r] == s; segments without rows
// stay zero.
Tensor segment_sum_rows(const Tensor& t, const std::vector<int>& row_segment, int n_segments);

Tensor gather_rows(const Tensor& t, const std::vector<int>& idx);
Tensor slice_cols(const Tensor& t, int c0, int c1);  // half-open [c0, c1)
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);

// out[i, :] = t[i, :] * s[i]; s is n x 1.
Tensor scale_rows(const Tensor& t, const Tensor& s);
// out[i, :] = t[i, :] + v; v is 1 x d.
Tensor add_row_vector(const Tensor& t, const Tensor& v);

// Masked softmax over a single row. Masked positions output exactly 0;
// unmasked outputs are positive and sum to 1, stabilized by max-subtraction
// over the unmasked entries. Throws mask_error if everything is masked.
Tensor softmax_masked(const Tensor& logits, const std::vector<uint8_t>& mask);

// Row-wise stabilized softmax (no mask).
Tensor softmax_rows(const Tensor& logits);

// ---- gradient checking ----

struct GradCheckIssue {
    int input = 0;
    int row = 0;
    int col = 0;
    double analytic = 0;
    double numeric = 0;
    double rel_err = 0;
};

struct GradCheckReport {
    double max_rel_err = 0;
    std::vector<GradCheckIssue> failures;  // coordinates exceeding tol
    bool passed() const { return failures.empty(); }
};

// Compares the analytic gradient of f (a scalar-valued function rebuilt from
// the given leaves on every call) against central finite differences
// (f(x+h) - f(x-h)) / 2h, coordinate by coordinate.
GradCheckReport grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs,
                           double h, double tol);

}  // namespace grepool
