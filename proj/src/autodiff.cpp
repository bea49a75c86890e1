#include "mtl/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>

namespace mtl::ad {

namespace {

void check_rank2(const NodeRef& a, const char* op) {
    if (a->value.rank() != 2)
        throw ShapeError(std::string(op) + ": expected rank-2 input, got " + a->value.shape_str());
}

void check_same_shape(const NodeRef& a, const NodeRef& b, const char* op) {
    if (!a->value.same_shape(b->value))
        throw ShapeError(std::string(op) + ": shape mismatch " + a->value.shape_str() + " vs " +
                         b->value.shape_str());
}

bool any_requires_grad(const std::vector<NodeRef>& parents) {
    for (const auto& p : parents)
        if (p->requires_grad) return true;
    return false;
}

Real stable_sigmoid(Real x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    Real e = std::exp(x);
    return e / (1.0 + e);
}

std::atomic<int> g_param_id{0};

}  // namespace

NodeRef make_param(Tensor value, const char* name) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->op = name;
    n->id = --g_param_id;  // negative ids mark off-tape leaves
    return n;
}

NodeRef Tape::leaf(Tensor value, bool requires_grad, const char* name) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->op = name;
    n->id = next_id_++;
    nodes_.push_back(n);
    return n;
}

NodeRef Tape::record(Tensor value, std::vector<NodeRef> parents,
                     std::function<void(Node&)> backprop, const char* op) {
    if (check_finite_ && !value.all_finite())
        throw NumericError(std::string("non-finite value produced by op '") + op + "' (node " +
                           std::to_string(next_id_) + ")");
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = grad_ && any_requires_grad(parents);
    n->parents = std::move(parents);
    if (n->requires_grad) n->backprop = std::move(backprop);
    n->op = op;
    n->id = next_id_++;
    nodes_.push_back(n);
    return n;
}

void Tape::backward(const NodeRef& loss) {
    if (loss->value.numel() != 1)
        throw ShapeError("backward: loss must be scalar, got " + loss->value.shape_str());
    if (!loss->on_tape()) {
        loss->ensure_grad();
        loss->grad[0] += 1.0;
        return;
    }
    if (loss->pass_grad.numel() == 0) loss->pass_grad = Tensor(loss->value.shape());
    loss->pass_grad[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = **it;
        if (n.pass_grad.numel() == 0) continue;
        if (n.requires_grad && n.backprop) n.backprop(n);
        n.ensure_grad();
        for (std::size_t i = 0; i < n.grad.numel(); ++i) n.grad[i] += n.pass_grad[i];
        n.pass_grad = Tensor();
    }
}

void Tape::dump(std::ostream& os) const {
    for (const auto& n : nodes_) {
        os << n->id << ' ' << n->op << ' ' << n->value.shape_str();
        for (const auto& p : n->parents) os << ' ' << p->id;
        os << '\n';
    }
}

// ---- ops ------------------------------------------------------------------

NodeRef matmul(Tape& t, const NodeRef& a, const NodeRef& b) {
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    const Tensor& A = a->value;
    const Tensor& B = b->value;
    if (A.dim(1) != B.dim(0))
        throw ShapeError("matmul: inner dimensions disagree, " + A.shape_str() + " x " +
                         B.shape_str());
    int m = A.dim(0), k = A.dim(1), n = B.dim(1);
    Tensor C({m, n});
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            Real aip = A.at(i, p);
            if (aip == 0.0) continue;
            const Real* brow = B.data() + static_cast<std::size_t>(p) * n;
            Real* crow = C.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    return t.record(std::move(C), {a, b},
                    [a, b, m, k, n](Node& self) {
                        const Tensor& G = self.pass_grad;
                        if (a->requires_grad) {
                            Tensor& ga = a->sink();
                            // dA = G * B^T
                            for (int i = 0; i < m; ++i)
                                for (int p = 0; p < k; ++p) {
                                    Real s = 0.0;
                                    const Real* grow = G.data() + static_cast<std::size_t>(i) * n;
                                    const Real* brow = b->value.data() + static_cast<std::size_t>(p) * n;
                                    for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
                                    ga.at(i, p) += s;
                                }
                        }
                        if (b->requires_grad) {
                            Tensor& gb = b->sink();
                            // dB = A^T * G
                            for (int i = 0; i < m; ++i) {
                                const Real* grow = G.data() + static_cast<std::size_t>(i) * n;
                                for (int p = 0; p < k; ++p) {
                                    Real aip = a->value.at(i, p);
                                    if (aip == 0.0) continue;
                                    Real* brow = gb.data() + static_cast<std::size_t>(p) * n;
                                    for (int j = 0; j < n; ++j) brow[j] += aip * grow[j];
                                }
                            }
                        }
                    },
                    "matmul");
}

NodeRef add(Tape& t, const NodeRef& a, const NodeRef& b) {
    check_same_shape(a, b, "add");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
    return t.record(std::move(out), {a, b},
                    [a, b](Node& self) {
                        const Tensor& G = self.pass_grad;
                        if (a->requires_grad) {
                            Tensor& ga = a->sink();
                            for (std::size_t i = 0; i < G.numel(); ++i) ga[i] += G[i];
                        }
                        if (b->requires_grad) {
                            Tensor& gb = b->sink();
                            for (std::size_t i = 0; i < G.numel(); ++i) gb[i] += G[i];
                        }
                    },
                    "add");
}

NodeRef sub(Tape& t, const NodeRef& a, const NodeRef& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
    return t.record(std::move(out), {a, b},
                    [a, b](Node& self) {
                        const Tensor& G = self.pass_grad;
                        if (a->requires_grad) {
                            Tensor& ga = a->sink();
                            for (std::size_t i = 0; i < G.numel(); ++i) ga[i] += G[i];
                        }
                        if (b->requires_grad) {
                            Tensor& gb = b->sink();
                            for (std::size_t i = 0; i < G.numel(); ++i) gb[i] -= G[i];
                        }
                    },
                    "sub");
}

NodeRef mul(Tape& t, const NodeRef& a, const NodeRef& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
    return t.record(std::move(out), {a, b},
                    [a, b](Node& self) {
                        const Tensor& G = self.pass_grad;
                        if (a->requires_grad) {
                            Tensor& ga = a->sink();
                            for (std::size_t i = 0; i < G.numel(); ++i) ga[i] += G[i] * b->value[i];
                        }
                        if (b->requires_grad) {
                            Tensor& gb = b->sink();
                            for (std::size_t i = 0; i < G.numel(); ++i) gb[i] += G[i] * a->value[i];
                        }
                    },
                    "mul");
}

NodeRef scale(Tape& t, const NodeRef& a, Real c) {
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c;
    return t.record(std::move(out), {a},
                    [a, c](Node& self) {
                        if (!a->requires_grad) return;
                        const Tensor& G = self.pass_grad;
                        Tensor& ga = a->sink();
                        for (std::size_t i = 0; i < G.numel(); ++i) ga[i] += c * G[i];
                    },
                    "scale");
}

NodeRef add_rowvec(Tape& t, const NodeRef& m, const NodeRef& rowv) {
    check_rank2(m, "add_rowvec");
    check_rank2(rowv, "add_rowvec");
    if (rowv->value.dim(0) != 1 || rowv->value.dim(1) != m->value.dim(1))
        throw ShapeError("add_rowvec: row " + rowv->value.shape_str() + " does not broadcast over " +
                         m->value.shape_str());
    int r = m->value.dim(0), c = m->value.dim(1);
    Tensor out = m->value;
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.at(i, j) += rowv->value[static_cast<std::size_t>(j)];
    return t.record(std::move(out), {m, rowv},
                    [m, rowv, r, c](Node& self) {
                        const Tensor& G = self.pass_grad;
                        if (m->requires_grad) {
                            Tensor& gm = m->sink();
                            for (std::size_t i = 0; i < G.numel(); ++i) gm[i] += G[i];
                        }
                        if (rowv->requires_grad) {
                            Tensor& gr = rowv->sink();
                            for (int i = 0; i < r; ++i)
                                for (int j = 0; j < c; ++j)
                                    gr[static_cast<std::size_t>(j)] += G.at(i, j);
                        }
                    },
                    "add_rowvec");
}

NodeRef sigmoid(Tape& t, const NodeRef& a) {
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = stable_sigmoid(out[i]);
    return t.record(std::move(out), {a},
                    [a](Node& self) {
                        if (!a->requires_grad) return;
                        const Tensor& G = self.pass_grad;
                        Tensor& ga = a->sink();
                        Real fault = Hooks::corrupt_sigmoid_backward ? 1.01 : 1.0;
                        for (std::size_t i = 0; i < G.numel(); ++i) {
                            Real s = self.value[i];
                            ga[i] += fault * G[i] * s * (1.0 - s);
                        }
                    },
                    "sigmoid");
}

NodeRef tanh_(Tape& t, const NodeRef& a) {
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
    return t.record(std::move(out), {a},
                    [a](Node& self) {
                        if (!a->requires_grad) return;
                        const Tensor& G = self.pass_grad;
                        Tensor& ga = a->sink();
                        for (std::size_t i = 0; i < G.numel(); ++i) {
                            Real y = self.value[i];
                            ga[i] += G[i] * (1.0 - y * y);
                        }
                    },
                    "tanh");
}

NodeRef relu(Tape& t, const NodeRef& a) {
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    return t.record(std::move(out), {a},
                    [a](Node& self) {
                        if (!a->requires_grad) return;
                        const Tensor& G = self.pass_grad;
                        Tensor& ga = a->sink();
                        for (std::size_t i = 0; i < G.numel(); ++i)
                            if (a->value[i] > 0.0) ga[i] += G[i];
                    },
                    "relu");
}

NodeRef concat(Tape& t, const std::vector<NodeRef>& xs, int axis) {
    if (xs.empty()) throw ShapeError("concat: empty input list");
    int rank = xs[0]->value.rank();
    if (axis < 0 || axis >= rank)
        throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank));
    for (const auto& x : xs) {
        if (x->value.rank() != rank) throw ShapeError("concat: mixed ranks");
        for (int d = 0; d < rank; ++d)
            if (d != axis && x->value.dim(d) != xs[0]->value.dim(d))
                throw ShapeError("concat: shape mismatch off axis, " + x->value.shape_str() +
                                 " vs " + xs[0]->value.shape_str());
    }

    if (rank == 1) {
        int total = 0;
        for (const auto& x : xs) total += x->value.dim(0);
        Tensor out({total});
        int off = 0;
        for (const auto& x : xs) {
            std::copy(x->value.data(), x->value.data() + x->value.numel(), out.data() + off);
            off += x->value.dim(0);
        }
        auto parents = xs;
        return t.record(std::move(out), parents,
                        [parents](Node& self) {
                            const Tensor& G = self.pass_grad;
                            int off = 0;
                            for (const auto& x : parents) {
                                int len = x->value.dim(0);
                                if (x->requires_grad) {
                                    Tensor& gx = x->sink();
                                    for (int i = 0; i < len; ++i)
                                        gx[static_cast<std::size_t>(i)] +=
                                            G[static_cast<std::size_t>(off + i)];
                                }
                                off += len;
                            }
                        },
                        "concat");
    }

    int rows = xs[0]->value.dim(0), cols = xs[0]->value.dim(1);
    if (axis == 0) {
        int total = 0;
        for (const auto& x : xs) total += x->value.dim(0);
        Tensor out({total, cols});
        int off = 0;
        for (const auto& x : xs) {
            std::copy(x->value.data(), x->value.data() + x->value.numel(),
                      out.data() + static_cast<std::size_t>(off) * cols);
            off += x->value.dim(0);
        }
        auto parents = xs;
        return t.record(std::move(out), parents,
                        [parents, cols](Node& self) {
                            const Tensor& G = self.pass_grad;
                            int off = 0;
                            for (const auto& x : parents) {
                                int r = x->value.dim(0);
                                if (x->requires_grad) {
                                    Tensor& gx = x->sink();
                                    for (int i = 0; i < r; ++i)
                                        for (int j = 0; j < cols; ++j)
                                            gx.at(i, j) += G.at(off + i, j);
                                }
                                off += r;
                            }
                        },
                        "concat");
    }

    int total = 0;
    for (const auto& x : xs) total += x->value.dim(1);
    Tensor out({rows, total});
    int off = 0;
    for (const auto& x : xs) {
        int c = x->value.dim(1);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < c; ++j) out.at(i, off + j) = x->value.at(i, j);
        off += c;
    }
    auto parents = xs;
    return t.record(std::move(out), parents,
                    [parents, rows](Node& self) {
                        const Tensor& G = self.pass_grad;
                        int off = 0;
                        for (const auto& x : parents) {
                            int c = x->value.dim(1);
                            if (x->requires_grad) {
                                Tensor& gx = x->sink();
                                for (int i = 0; i < rows; ++i)
                                    for (int j = 0; j < c; ++j) gx.at(i, j) += G.at(i, off + j);
                            }
                            off += c;
                        }
                    },
                    "concat");
}

NodeRef slice_cols(Tape& t, const NodeRef& a, int begin, int end) {
    check_rank2(a, "slice_cols");
    int rows = a->value.dim(0), cols = a->value.dim(1);
    if (begin < 0 || end > cols || begin >= end)
        throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for " + a->value.shape_str());
    int w = end - begin;
    Tensor out({rows, w});
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < w; ++j) out.at(i, j) = a->value.at(i, begin + j);
    return t.record(std::move(out), {a},
                    [a, begin, rows, w](Node& self) {
                        if (!a->requires_grad) return;
                        const Tensor& G = self.pass_grad;
                        Tensor& ga = a->sink();
                        for (int i = 0; i < rows; ++i)
                            for (int j = 0; j < w; ++j) ga.at(i, begin + j) += G.at(i, j);
                    },
                    "slice_cols");
}

NodeRef transpose(Tape& t, const NodeRef& a) {
    check_rank2(a, "transpose");
    int r = a->value.dim(0), c = a->value.dim(1);
    Tensor out({c, r});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.at(j, i) = a->value.at(i, j);
    return t.record(std::move(out), {a},
                    [a, r, c](Node& self) {
                        if (!a->requires_grad) return;
                        const Tensor& G = self.pass_grad;
                        Tensor& ga = a->sink();
                        for (int i = 0; i < r; ++i)
                            for (int j = 0; j < c; ++j) ga.at(i, j) += G.at(j, i);
                    },
                    "transpose");
}

NodeRef softmax(Tape& t, const NodeRef& a, int axis) {
    check_rank2(a, "softmax");
    if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
    int r = a->value.dim(0), c = a->value.dim(1);
    Tensor out({r, c});
    auto row_idx = [c](int g, int i) { return static_cast<std::size_t>(g) * c + i; };
    auto col_idx = [c](int g, int i) { return static_cast<std::size_t>(i) * c + g; };
    auto run = [&](int groups, int len, auto idx) {
        for (int g = 0; g < groups; ++g) {
            Real mx = -std::numeric_limits<Real>::infinity();
            for (int i = 0; i < len; ++i) mx = std::max(mx, a->value[idx(g, i)]);
            Real z = 0.0;
            for (int i = 0; i < len; ++i) {
                Real e = std::exp(a->value[idx(g, i)] - mx);
                out[idx(g, i)] = e;
                z += e;
            }
            for (int i = 0; i < len; ++i) out[idx(g, i)] /= z;
        }
    };
    if (axis == 1)
        run(r, c, row_idx);
    else
        run(c, r, col_idx);
    return t.record(std::move(out), {a},
                    [a, axis, r, c, row_idx, col_idx](Node& self) {
                        if (!a->requires_grad) return;
                        const Tensor& G = self.pass_grad;
                        Tensor& ga = a->sink();
                        auto back = [&](int groups, int len, auto idx) {
                            for (int g = 0; g < groups; ++g) {
                                Real dot = 0.0;
                                for (int i = 0; i < len; ++i) dot += G[idx(g, i)] * self.value[idx(g, i)];
                                for (int i = 0; i < len; ++i)
                                    ga[idx(g, i)] += self.value[idx(g, i)] * (G[idx(g, i)] - dot);
                            }
                        };
                        if (axis == 1)
                            back(r, c, row_idx);
                        else
                            back(c, r, col_idx);
                    },
                    "softmax");
}

NodeRef mean_all(Tape& t, const NodeRef& a) {
    Real s = 0.0;
    for (std::size_t i = 0; i < a->value.numel(); ++i) s += a->value[i];
    std::size_t n = a->value.numel();
    return t.record(Tensor::scalar(s / static_cast<Real>(n)), {a},
                    [a, n](Node& self) {
                        if (!a->requires_grad) return;
                        Real g = self.pass_grad[0] / static_cast<Real>(n);
                        Tensor& ga = a->sink();
                        for (std::size_t i = 0; i < n; ++i) ga[i] += g;
                    },
                    "mean");
}

NodeRef sum_all(Tape& t, const NodeRef& a) {
    Real s = 0.0;
    for (std::size_t i = 0; i < a->value.numel(); ++i) s += a->value[i];
    std::size_t n = a->value.numel();
    return t.record(Tensor::scalar(s), {a},
                    [a, n](Node& self) {
                        if (!a->requires_grad) return;
                        Real g = self.pass_grad[0];
                        Tensor& ga = a->sink();
                        for (std::size_t i = 0; i < n; ++i) ga[i] += g;
                    },
                    "sum");
}

NodeRef mean_axis(Tape& t, const NodeRef& a, int axis) {
    check_rank2(a, "mean_axis");
    if (axis != 0 && axis != 1) throw ShapeError("mean_axis: axis must be 0 or 1");
    int r = a->value.dim(0), c = a->value.dim(1);
    if (axis == 0) {
        Tensor out({1, c});
        for (int j = 0; j < c; ++j) {
            Real s = 0.0;
            for (int i = 0; i < r; ++i) s += a->value.at(i, j);
            out[static_cast<std::size_t>(j)] = s / r;
        }
        return t.record(std::move(out), {a},
                        [a, r, c](Node& self) {
                            if (!a->requires_grad) return;
                            const Tensor& G = self.pass_grad;
                            Tensor& ga = a->sink();
                            for (int j = 0; j < c; ++j) {
                                Real g = G[static_cast<std::size_t>(j)] / r;
                                for (int i = 0; i < r; ++i) ga.at(i, j) += g;
                            }
                        },
                        "mean_axis");
    }
    Tensor out({r, 1});
    for (int i = 0; i < r; ++i) {
        Real s = 0.0;
        for (int j = 0; j < c; ++j) s += a->value.at(i, j);
        out[static_cast<std::size_t>(i)] = s / c;
    }
    return t.record(std::move(out), {a},
                    [a, r, c](Node& self) {
                        if (!a->requires_grad) return;
                        const Tensor& G = self.pass_grad;
                        Tensor& ga = a->sink();
                        for (int i = 0; i < r; ++i) {
                            Real g = G[static_cast<std::size_t>(i)] / c;
                            for (int j = 0; j < c; ++j) ga.at(i, j) += g;
                        }
                    },
                    "mean_axis");
}

NodeRef max_axis(Tape& t, const NodeRef& a, int axis) {
    check_rank2(a, "max_axis");
    if (axis != 0 && axis != 1) throw ShapeError("max_axis: axis must be 0 or 1");
    int r = a->value.dim(0), c = a->value.dim(1);
    std::vector<int> argmax;
    if (axis == 0) {
        Tensor out({1, c});
        argmax.assign(static_cast<std::size_t>(c), 0);
        for (int j = 0; j < c; ++j) {
            int best = 0;
            for (int i = 1; i < r; ++i)
                if (a->value.at(i, j) > a->value.at(best, j)) best = i;
            argmax[static_cast<std::size_t>(j)] = best;
            out[static_cast<std::size_t>(j)] = a->value.at(best, j);
        }
        return t.record(std::move(out), {a},
                        [a, c, argmax](Node& self) {
                            if (!a->requires_grad) return;
                            const Tensor& G = self.pass_grad;
                            Tensor& ga = a->sink();
                            for (int j = 0; j < c; ++j)
                                ga.at(argmax[static_cast<std::size_t>(j)], j) +=
                                    G[static_cast<std::size_t>(j)];
                        },
                        "max_axis");
    }
    Tensor out({r, 1});
    argmax.assign(static_cast<std::size_t>(r), 0);
    for (int i = 0; i < r; ++i) {
        int best = 0;
        for (int j = 1; j < c; ++j)
            if (a->value.at(i, j) > a->value.at(i, best)) best = j;
        argmax[static_cast<std::size_t>(i)] = best;
        out[static_cast<std::size_t>(i)] = a->value.at(i, best);
    }
    return t.record(std::move(out), {a},
                    [a, r, argmax](Node& self) {
                        if (!a->requires_grad) return;
                        const Tensor& G = self.pass_grad;
                        Tensor& ga = a->sink();
                        for (int i = 0; i < r; ++i)
                            ga.at(i, argmax[static_cast<std::size_t>(i)]) +=
                                G[static_cast<std::size_t>(i)];
                    },
                    "max_axis");
}

NodeRef row(Tape& t, const NodeRef& a, int i) {
    check_rank2(a, "row");
    int r = a->value.dim(0), c = a->value.dim(1);
    if (i < 0 || i >= r) throw ShapeError("row: index " + std::to_string(i) + " out of range");
    Tensor out({1, c});
    for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(j)] = a->value.at(i, j);
    return t.record(std::move(out), {a},
                    [a, i, c](Node& self) {
                        if (!a->requires_grad) return;
                        const Tensor& G = self.pass_grad;
                        Tensor& ga = a->sink();
                        for (int j = 0; j < c; ++j) ga.at(i, j) += G[static_cast<std::size_t>(j)];
                    },
                    "row");
}

NodeRef softmax_xent(Tape& t, const NodeRef& logits, const std::vector<int>& gold,
                     const std::vector<bool>& mask) {
    check_rank2(logits, "softmax_xent");
    int n = logits->value.dim(0), k = logits->value.dim(1);
    if (static_cast<int>(gold.size()) != n || static_cast<int>(mask.size()) != n)
        throw ShapeError("softmax_xent: gold/mask length must equal logit rows (" +
                         std::to_string(n) + ")");
    int live = 0;
    for (int i = 0; i < n; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        ++live;
        int g = gold[static_cast<std::size_t>(i)];
        if (g < 0 || g >= k)
            throw ShapeError("softmax_xent: gold index " + std::to_string(g) + " out of [0, " +
                             std::to_string(k) + ") at row " + std::to_string(i));
    }
    if (live == 0) throw NumericError("softmax_xent: all positions masked");

    auto probs = std::make_shared<Tensor>(Tensor({n, k}));
    Real total = 0.0;
    for (int i = 0; i < n; ++i) {
        Real mx = -std::numeric_limits<Real>::infinity();
        for (int j = 0; j < k; ++j) mx = std::max(mx, logits->value.at(i, j));
        Real z = 0.0;
        for (int j = 0; j < k; ++j) {
            Real e = std::exp(logits->value.at(i, j) - mx);
            probs->at(i, j) = e;
            z += e;
        }
        for (int j = 0; j < k; ++j) probs->at(i, j) /= z;
        if (mask[static_cast<std::size_t>(i)]) {
            Real p = probs->at(i, gold[static_cast<std::size_t>(i)]);
            total += -(std::log(std::max(p, std::numeric_limits<Real>::min())));
        }
    }
    return t.record(Tensor::scalar(total / live), {logits},
                    [logits, gold, mask, probs, n, k, live](Node& self) {
                        if (!logits->requires_grad) return;
                        Real g0 = self.pass_grad[0] / live;
                        Tensor& gl = logits->sink();
                        for (int i = 0; i < n; ++i) {
                            if (!mask[static_cast<std::size_t>(i)]) continue;
                            for (int j = 0; j < k; ++j) {
                                Real d = probs->at(i, j);
                                if (j == gold[static_cast<std::size_t>(i)]) d -= 1.0;
                                gl.at(i, j) += g0 * d;
                            }
                        }
                    },
                    "softmax_xent");
}

NodeRef softmax_xent(Tape& t, const NodeRef& logits, const std::vector<int>& gold) {
    return softmax_xent(t, logits, gold, std::vector<bool>(gold.size(), true));
}

// ---- verification oracle ---------------------------------------------------

Tensor finite_difference_grad(const std::function<Real(const Tensor&)>& f, const Tensor& at,
                              Real epsilon) {
    if (epsilon <= 0.0) throw NumericError("finite_difference_grad: epsilon must be positive");
    Tensor grad(at.shape());
    Tensor x = at;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        Real orig = x[i];
        x[i] = orig + epsilon;
        Real fp = f(x);
        x[i] = orig - epsilon;
        Real fm = f(x);
        x[i] = orig;
        grad[i] = (fp - fm) / (2.0 * epsilon);
    }
    return grad;
}

Real max_rel_error(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeError("max_rel_error: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Real worst = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        Real denom = std::max({std::fabs(a[i]), std::fabs(b[i]), 1e-8});
        worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace mtl::ad
