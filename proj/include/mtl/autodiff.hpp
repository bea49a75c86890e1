#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "mtl/tensor.hpp"

namespace mtl::ad {

struct Node;
using NodeRef = std::shared_ptr<Node>;

// One value in the computation graph. Gradient storage is allocated lazily,
// on first contribution during the backward pass. `pass_grad` holds the
// current pass's gradient while it propagates; backward() folds it into
// `grad` so that repeated backward calls accumulate instead of compounding.
struct Node {
    Tensor value;
    Tensor grad;
    Tensor pass_grad;
    std::vector<NodeRef> parents;
    std::function<void(Node&)> backprop;  // pulls this->pass_grad into parents
    const char* op = "leaf";
    int id = 0;
    bool requires_grad = false;

    bool on_tape() const { return id >= 0; }
    bool has_grad() const { return grad.numel() > 0; }

    void ensure_grad() {
        if (!has_grad()) grad = Tensor(value.shape());
    }

    void zero_grad() {
        if (has_grad()) grad.fill(0.0);
    }

    // Gradient sink during a backward pass. Off-tape leaves (parameters)
    // accumulate directly so gradients survive across tapes.
    Tensor& sink() {
        if (!on_tape()) {
            ensure_grad();
            return grad;
        }
        if (pass_grad.numel() == 0) pass_grad = Tensor(value.shape());
        return pass_grad;
    }
};

// Long-lived leaf for model parameters; lives outside any tape so its
// gradient persists across forward passes (explicit zero_grad between steps,
// accumulation across backward calls is defined behavior).
NodeRef make_param(Tensor value, const char* name = "param");

// Records one forward pass in topological order. One tape per pass; interior
// nodes are freed with the tape.
class Tape {
public:
    explicit Tape(bool check_finite = true, bool grad = true)
        : check_finite_(check_finite), grad_(grad) {}

    NodeRef leaf(Tensor value, bool requires_grad = false, const char* name = "input");
    NodeRef record(Tensor value, std::vector<NodeRef> parents,
                   std::function<void(Node&)> backprop, const char* op);

    // Accumulates dL/dx into every requires_grad ancestor of loss. Repeated
    // calls without zeroing accumulate.
    void backward(const NodeRef& loss);

    // One line per node: `node_id op_name shape parent_ids`
    void dump(std::ostream& os) const;

    std::size_t size() const { return nodes_.size(); }
    bool checked() const { return check_finite_; }
    bool grad_enabled() const { return grad_; }

private:
    std::vector<NodeRef> nodes_;
    bool check_finite_;
    bool grad_;
    int next_id_ = 0;
};

// Verification-time fault injection; never set outside tests.
struct Hooks {
    static inline bool corrupt_sigmoid_backward = false;
};

// ---- ops ------------------------------------------------------------------

NodeRef matmul(Tape& t, const NodeRef& a, const NodeRef& b);
NodeRef add(Tape& t, const NodeRef& a, const NodeRef& b);
NodeRef sub(Tape& t, const NodeRef& a, const NodeRef& b);
NodeRef mul(Tape& t, const NodeRef& a, const NodeRef& b);
NodeRef scale(Tape& t, const NodeRef& a, Real c);
// m: [r x c], row: [1 x c]; adds row to every row of m
NodeRef add_rowvec(Tape& t, const NodeRef& m, const NodeRef& row);
NodeRef sigmoid(Tape& t, const NodeRef& a);
NodeRef tanh_(Tape& t, const NodeRef& a);
NodeRef relu(Tape& t, const NodeRef& a);
NodeRef concat(Tape& t, const std::vector<NodeRef>& xs, int axis);
NodeRef slice_cols(Tape& t, const NodeRef& a, int begin, int end);
NodeRef transpose(Tape& t, const NodeRef& a);
// rank-2 softmax along axis (1 = per row, 0 = per column)
NodeRef softmax(Tape& t, const NodeRef& a, int axis);
NodeRef mean_all(Tape& t, const NodeRef& a);
NodeRef sum_all(Tape& t, const NodeRef& a);
// rank-2 input; axis 0 -> [1 x c], axis 1 -> [r x 1]. Max routes its gradient
// to the winning slot, lowest index on ties.
NodeRef mean_axis(Tape& t, const NodeRef& a, int axis);
NodeRef max_axis(Tape& t, const NodeRef& a, int axis);
// row i of a rank-2 node as [1 x c]; gradient scatters back into that row
NodeRef row(Tape& t, const NodeRef& a, int i);

// Mean over unmasked positions of -log softmax(logits)[gold]. logits: [n x K],
// gold: n class indices, mask: n flags (true = contributes). Stabilized by
// max subtraction.
NodeRef softmax_xent(Tape& t, const NodeRef& logits, const std::vector<int>& gold,
                     const std::vector<bool>& mask);
NodeRef softmax_xent(Tape& t, const NodeRef& logits, const std::vector<int>& gold);

// ---- verification oracle ---------------------------------------------------

// Central differences (f(x+eps*ei) - f(x-eps*ei)) / (2 eps) per coordinate.
Tensor finite_difference_grad(const std::function<Real(const Tensor&)>& f,
                              const Tensor& at, Real epsilon);

// max over coordinates of |a-b| / max(|a|, |b|, 1e-8)
Real max_rel_error(const Tensor& a, const Tensor& b);

}  // namespace mtl::ad
