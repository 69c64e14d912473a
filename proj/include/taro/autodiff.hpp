#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "taro/common.hpp"
#include "taro/tensor.hpp"

namespace taro {

// Handle to a node on a Tape.
struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
};

// Define-by-run reverse-mode tape over dense tensors. Nodes are appended in
// topological order; the backward pass walks them in strict reverse order,
// so gradient accumulation is deterministic. A tape is rebuilt per forward
// pass and confined to one execution context.
class Tape {
public:
    Var leaf(Tensor value) { return push(std::move(value), {}, nullptr); }

    Var constant(double v) { return leaf(Tensor::scalar(v)); }

    const Tensor& value(Var v) const { return nodes_[v.id].value; }

    std::size_t num_nodes() const { return nodes_.size(); }

    Var add(Var a, Var b) {
        const Tensor& ta = value(a);
        const Tensor& tb = value(b);
        require_same_shape(ta, tb, "add");
        std::vector<double> out(ta.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = ta[i] + tb[i];
        return push(Tensor(ta.shape(), std::move(out)), {a.id, b.id},
                    [](Tape&, const Tensor& g, std::span<Tensor* const> gin) {
                        axpy(*gin[0], 1.0, g);
                        axpy(*gin[1], 1.0, g);
                    });
    }

    Var sub(Var a, Var b) {
        const Tensor& ta = value(a);
        const Tensor& tb = value(b);
        require_same_shape(ta, tb, "sub");
        std::vector<double> out(ta.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = ta[i] - tb[i];
        return push(Tensor(ta.shape(), std::move(out)), {a.id, b.id},
                    [](Tape&, const Tensor& g, std::span<Tensor* const> gin) {
                        axpy(*gin[0], 1.0, g);
                        axpy(*gin[1], -1.0, g);
                    });
    }

    Var mul(Var a, Var b) {
        const Tensor& ta = value(a);
        const Tensor& tb = value(b);
        require_same_shape(ta, tb, "mul");
        std::vector<double> out(ta.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = ta[i] * tb[i];
        return push(Tensor(ta.shape(), std::move(out)), {a.id, b.id},
                    [ia = a.id, ib = b.id](Tape& t, const Tensor& g, std::span<Tensor* const> gin) {
                        const Tensor& va = t.nodes_[ia].value;
                        const Tensor& vb = t.nodes_[ib].value;
                        for (std::size_t i = 0; i < g.size(); ++i) {
                            (*gin[0])[i] += g[i] * vb[i];
                            (*gin[1])[i] += g[i] * va[i];
                        }
                    });
    }

    Var scale(Var a, double c) {
        const Tensor& ta = value(a);
        std::vector<double> out(ta.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * ta[i];
        return push(Tensor(ta.shape(), std::move(out)), {a.id},
                    [c](Tape&, const Tensor& g, std::span<Tensor* const> gin) { axpy(*gin[0], c, g); });
    }

    Var neg(Var a) { return scale(a, -1.0); }

    Var add_scalar(Var a, double c) {
        const Tensor& ta = value(a);
        std::vector<double> out(ta.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = ta[i] + c;
        return push(Tensor(ta.shape(), std::move(out)), {a.id},
                    [](Tape&, const Tensor& g, std::span<Tensor* const> gin) { axpy(*gin[0], 1.0, g); });
    }

    Var sum(Var a) {
        const Tensor& ta = value(a);
        double acc = 0.0;
        for (std::size_t i = 0; i < ta.size(); ++i) acc += ta[i];
        return push(Tensor::scalar(acc), {a.id},
                    [](Tape&, const Tensor& g, std::span<Tensor* const> gin) {
                        for (std::size_t i = 0; i < gin[0]->size(); ++i) (*gin[0])[i] += g[0];
                    });
    }

    Var dot(Var a, Var b) {
        const Tensor& ta = value(a);
        const Tensor& tb = value(b);
        require_same_shape(ta, tb, "dot");
        return push(Tensor::scalar(ta.dot(tb)), {a.id, b.id},
                    [ia = a.id, ib = b.id](Tape& t, const Tensor& g, std::span<Tensor* const> gin) {
                        const Tensor& va = t.nodes_[ia].value;
                        const Tensor& vb = t.nodes_[ib].value;
                        for (std::size_t i = 0; i < va.size(); ++i) {
                            (*gin[0])[i] += g[0] * vb[i];
                            (*gin[1])[i] += g[0] * va[i];
                        }
                    });
    }

    Var relu(Var a) {
        const Tensor& ta = value(a);
        std::vector<double> out(ta.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = ta[i] > 0.0 ? ta[i] : 0.0;
        // subgradient at exactly 0 is 0
        return push(Tensor(ta.shape(), std::move(out)), {a.id},
                    [ia = a.id](Tape& t, const Tensor& g, std::span<Tensor* const> gin) {
                        const Tensor& va = t.nodes_[ia].value;
                        for (std::size_t i = 0; i < g.size(); ++i) {
                            if (va[i] > 0.0) (*gin[0])[i] += g[i];
                        }
                    });
    }

    Var log(Var a) {
        const Tensor& ta = value(a);
        std::vector<double> out(ta.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(ta[i]);
        return push(Tensor(ta.shape(), std::move(out)), {a.id},
                    [ia = a.id](Tape& t, const Tensor& g, std::span<Tensor* const> gin) {
                        const Tensor& va = t.nodes_[ia].value;
                        for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] / va[i];
                    });
    }

    Var exp(Var a) {
        const Tensor& ta = value(a);
        std::vector<double> out(ta.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(ta[i]);
        std::size_t self = nodes_.size();
        return push(Tensor(ta.shape(), std::move(out)), {a.id},
                    [self](Tape& t, const Tensor& g, std::span<Tensor* const> gin) {
                        const Tensor& y = t.nodes_[self].value;
                        for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * y[i];
                    });
    }

    // Wx + b for W[m x n], b[m], x[n].
    Var linear(Var W, Var b, Var x) {
        const Tensor& tw = value(W);
        const Tensor& tb = value(b);
        const Tensor& tx = value(x);
        if (tw.ndim() != 2 || tb.ndim() != 1 || tx.ndim() != 1 || tw.shape()[0] != tb.shape()[0] ||
            tw.shape()[1] != tx.shape()[0]) {
            throw ShapeError("linear: shapes do not conform, W " + tw.shape_string() + ", b " +
                             tb.shape_string() + ", x " + tx.shape_string());
        }
        std::size_t m = tw.shape()[0];
        std::size_t n = tw.shape()[1];
        std::vector<double> out(m);
        for (std::size_t i = 0; i < m; ++i) {
            double acc = tb[i];
            for (std::size_t j = 0; j < n; ++j) acc += tw[i * n + j] * tx[j];
            out[i] = acc;
        }
        return push(Tensor({m}, std::move(out)), {W.id, b.id, x.id},
                    [iw = W.id, ix = x.id, m, n](Tape& t, const Tensor& g, std::span<Tensor* const> gin) {
                        const Tensor& vw = t.nodes_[iw].value;
                        const Tensor& vx = t.nodes_[ix].value;
                        for (std::size_t i = 0; i < m; ++i) {
                            (*gin[1])[i] += g[i];
                            for (std::size_t j = 0; j < n; ++j) {
                                (*gin[0])[i * n + j] += g[i] * vx[j];
                                (*gin[2])[j] += vw[i * n + j] * g[i];
                            }
                        }
                    });
    }

    // v / ||v||_2; rejects near-zero norm.
    Var l2_normalize(Var a) {
        const Tensor& ta = value(a);
        double n = ta.norm2();
        if (n <= kNormEps) throw NumericError("l2_normalize: degenerate vector norm");
        std::vector<double> out(ta.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = ta[i] / n;
        std::size_t self = nodes_.size();
        return push(Tensor(ta.shape(), std::move(out)), {a.id},
                    [self, n](Tape& t, const Tensor& g, std::span<Tensor* const> gin) {
                        const Tensor& y = t.nodes_[self].value;
                        double gy = g.dot(y);
                        for (std::size_t i = 0; i < g.size(); ++i) {
                            (*gin[0])[i] += (g[i] - gy * y[i]) / n;
                        }
                    });
    }

    Var cosine_similarity(Var a, Var b) { return dot(l2_normalize(a), l2_normalize(b)); }

    // Forward identity, backward contributes exactly zero.
    Var stop_gradient(Var a) { return push(value(a), {}, nullptr); }

    Var pick(Var a, std::size_t index) {
        const Tensor& ta = value(a);
        if (index >= ta.size()) throw ShapeError("pick: index out of range");
        return push(Tensor::scalar(ta[index]), {a.id},
                    [index](Tape&, const Tensor& g, std::span<Tensor* const> gin) {
                        (*gin[0])[index] += g[0];
                    });
    }

    // Numerically stable log(sum(exp(v))).
    Var logsumexp(Var a) {
        const Tensor& ta = value(a);
        double m = ta[0];
        for (std::size_t i = 1; i < ta.size(); ++i) m = std::max(m, ta[i]);
        double s = 0.0;
        for (std::size_t i = 0; i < ta.size(); ++i) s += std::exp(ta[i] - m);
        return push(Tensor::scalar(m + std::log(s)), {a.id},
                    [ia = a.id, m, s](Tape& t, const Tensor& g, std::span<Tensor* const> gin) {
                        const Tensor& va = t.nodes_[ia].value;
                        for (std::size_t i = 0; i < va.size(); ++i) {
                            (*gin[0])[i] += g[0] * std::exp(va[i] - m) / s;
                        }
                    });
    }

    // Reverse-mode gradients of a scalar loss with respect to params.
    std::vector<Tensor> backward(Var loss, std::span<const Var> params) const {
        if (!value(loss).is_scalar()) {
            throw ShapeError("backward: loss must be a scalar, got " +
                             value(loss).shape_string());
        }
        std::vector<Tensor> grads(nodes_.size());
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            grads[i] = Tensor::zeros(nodes_[i].value.shape());
        }
        grads[loss.id][0] = 1.0;
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            const Node& node = nodes_[i];
            if (!node.backward) continue;
            // input accumulators by pointer; inputs always precede i
            std::vector<Tensor*> gin;
            gin.reserve(node.inputs.size());
            for (std::size_t in : node.inputs) gin.push_back(&grads[in]);
            node.backward(const_cast<Tape&>(*this), grads[i], gin);
        }
        std::vector<Tensor> out;
        out.reserve(params.size());
        for (Var p : params) out.push_back(grads[p.id]);
        return out;
    }

    std::vector<Tensor> backward(Var loss, std::initializer_list<Var> params) const {
        std::vector<Var> ps(params);
        return backward(loss, std::span<const Var>(ps));
    }

private:
    using BackwardFn = std::function<void(Tape&, const Tensor&, std::span<Tensor* const>)>;

    struct Node {
        Tensor value;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
    };

    Var push(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
        nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(fn)});
        return Var{nodes_.size() - 1};
    }

    static void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
        if (!a.same_shape(b)) {
            throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                             b.shape_string());
        }
    }

    static void axpy(Tensor& acc, double c, const Tensor& g) {
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += c * g[i];
    }

    std::vector<Node> nodes_;
};

// Central-difference gradient oracle, independent of the tape.
// lossfn must be a pure function of the parameter values.
inline std::vector<Tensor> finite_diff_grad(
    const std::function<double(std::span<const Tensor>)>& lossfn, std::vector<Tensor> params,
    double h = 1e-5) {
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor g = Tensor::zeros(params[p].shape());
        for (std::size_t i = 0; i < params[p].size(); ++i) {
            double orig = params[p][i];
            params[p][i] = orig + h;
            double up = lossfn(params);
            params[p][i] = orig - h;
            double down = lossfn(params);
            params[p][i] = orig;
            g[i] = (up - down) / (2.0 * h);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

}  // namespace taro
