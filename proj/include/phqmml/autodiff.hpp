#pragma once

// Tape-based reverse-mode autodiff over Eigen double matrices, sized for
// desk-scale models: eager forward evaluation, backward closures replayed in
// reverse creation order, and a parameter store with AdamW. Everything runs
// in 64-bit so finite-difference checks are meaningful.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "phqmml/common.hpp"

namespace phqmml::ad {

using Mat = Eigen::MatrixXd;

struct Param {
    std::string name;
    Mat value;
    Mat grad;
    Mat m, v;  // AdamW moments
};

class ParamStore {
public:
    int add(const std::string& name, Mat init) {
        if (index_.count(name)) throw ConfigError("duplicate parameter: " + name);
        const int id = static_cast<int>(params_.size());
        index_[name] = id;
        Param p;
        p.name = name;
        p.grad = Mat::Zero(init.rows(), init.cols());
        p.m = Mat::Zero(init.rows(), init.cols());
        p.v = Mat::Zero(init.rows(), init.cols());
        p.value = std::move(init);
        params_.push_back(std::move(p));
        return id;
    }

    Param& at(int id) { return params_.at(static_cast<std::size_t>(id)); }
    const Param& at(int id) const { return params_.at(static_cast<std::size_t>(id)); }

    int id_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return index_.count(name) > 0; }
    std::size_t size() const { return params_.size(); }
    std::vector<Param>& all() { return params_; }
    const std::vector<Param>& all() const { return params_; }

    void zero_grads() {
        for (Param& p : params_) p.grad.setZero();
    }

    std::size_t coordinate_count() const {
        std::size_t n = 0;
        for (const Param& p : params_) n += static_cast<std::size_t>(p.value.size());
        return n;
    }

private:
    std::vector<Param> params_;
    std::unordered_map<std::string, int> index_;
};

struct AdamW {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    long t = 0;

    void step(ParamStore& store) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (Param& p : store.all()) {
            p.m = beta1 * p.m + (1.0 - beta1) * p.grad;
            p.v = beta2 * p.v + (1.0 - beta2) * p.grad.cwiseProduct(p.grad);
            const Mat mhat = p.m / bc1;
            const Mat vhat = p.v / bc2;
            p.value -=
                lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
            if (weight_decay > 0.0) p.value -= lr * weight_decay * p.value;
        }
    }
};

// Computation graph. Nodes are created eagerly with their forward values;
// backward() replays registered closures in reverse order. With gradients
// disabled the same code path runs forward-only.
class Graph {
public:
    using NodeId = int;

    explicit Graph(ParamStore* store = nullptr, bool grad_enabled = true)
        : store_(store), grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    NodeId input(Mat value) { return push(std::move(value), {}, nullptr); }

    NodeId param(int param_id) {
        if (!store_) throw ConfigError("graph has no parameter store");
        NodeId id = push(store_->at(param_id).value, {}, nullptr);
        nodes_[static_cast<std::size_t>(id)].param_id = param_id;
        return id;
    }

    NodeId param(const std::string& name) { return param(store_->id_of(name)); }

    const Mat& value(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
    Mat& grad(NodeId id) { return nodes_.at(static_cast<std::size_t>(id)).grad; }

    // ---- elementwise and linear algebra ----

    NodeId add(NodeId a, NodeId b) {
        check_same_shape(a, b, "add");
        return push(value(a) + value(b), {a, b}, [](Graph& g, const Node& n) {
            g.grad(n.parents[0]) += n.grad;
            g.grad(n.parents[1]) += n.grad;
        });
    }

    // Broadcasts a 1 x c row over every row of a.
    NodeId add_row(NodeId a, NodeId row) {
        if (value(row).rows() != 1 || value(row).cols() != value(a).cols())
            throw ValidationError("add_row: shape mismatch");
        Mat out = value(a);
        out.rowwise() += value(row).row(0);
        return push(std::move(out), {a, row}, [](Graph& g, const Node& n) {
            g.grad(n.parents[0]) += n.grad;
            g.grad(n.parents[1]).row(0) += n.grad.colwise().sum();
        });
    }

    NodeId scale(NodeId a, double s) {
        return push(value(a) * s, {a}, [s](Graph& g, const Node& n) {
            g.grad(n.parents[0]) += s * n.grad;
        });
    }

    NodeId cmul(NodeId a, NodeId b) {
        check_same_shape(a, b, "cmul");
        return push(value(a).cwiseProduct(value(b)), {a, b}, [](Graph& g, const Node& n) {
            g.grad(n.parents[0]) += n.grad.cwiseProduct(g.value(n.parents[1]));
            g.grad(n.parents[1]) += n.grad.cwiseProduct(g.value(n.parents[0]));
        });
    }

    NodeId matmul(NodeId a, NodeId b) {
        if (value(a).cols() != value(b).rows()) throw ValidationError("matmul: shape mismatch");
        return push(value(a) * value(b), {a, b}, [](Graph& g, const Node& n) {
            g.grad(n.parents[0]) += n.grad * g.value(n.parents[1]).transpose();
            g.grad(n.parents[1]) += g.value(n.parents[0]).transpose() * n.grad;
        });
    }

    // a * b^T, the attention-score shape.
    NodeId matmul_nt(NodeId a, NodeId b) {
        if (value(a).cols() != value(b).cols()) throw ValidationError("matmul_nt: shape mismatch");
        return push(value(a) * value(b).transpose(), {a, b}, [](Graph& g, const Node& n) {
            g.grad(n.parents[0]) += n.grad * g.value(n.parents[1]);
            g.grad(n.parents[1]) += n.grad.transpose() * g.value(n.parents[0]);
        });
    }

    NodeId gelu(NodeId a) {
        const Mat& x = value(a);
        Mat out = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)); });
        return push(std::move(out), {a}, [](Graph& g, const Node& n) {
            const Mat& x = g.value(n.parents[0]);
            const Mat d = x.unaryExpr([](double v) {
                const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
                const double pdf = std::exp(-0.5 * v * v) * 0.3989422804014326779399461;
                return cdf + v * pdf;
            });
            g.grad(n.parents[0]) += n.grad.cwiseProduct(d);
        });
    }

    // ---- softmax family (row-wise) ----

    NodeId softmax_rows(NodeId a) {
        Mat out = value(a);
        for (Eigen::Index r = 0; r < out.rows(); ++r) {
            const double mx = out.row(r).maxCoeff();
            out.row(r) = (out.row(r).array() - mx).exp();
            out.row(r) /= out.row(r).sum();
        }
        return push(std::move(out), {a}, [](Graph& g, const Node& n) {
            const Mat& y = n.value;
            Mat da(y.rows(), y.cols());
            for (Eigen::Index r = 0; r < y.rows(); ++r) {
                const double dot = n.grad.row(r).dot(y.row(r));
                da.row(r) = y.row(r).cwiseProduct(n.grad.row(r)) - dot * y.row(r);
            }
            g.grad(n.parents[0]) += da;
        });
    }

    NodeId log_softmax_rows(NodeId a) {
        Mat out = value(a);
        for (Eigen::Index r = 0; r < out.rows(); ++r) {
            const double mx = out.row(r).maxCoeff();
            const double lse = std::log((out.row(r).array() - mx).exp().sum()) + mx;
            out.row(r).array() -= lse;
        }
        return push(std::move(out), {a}, [](Graph& g, const Node& n) {
            Mat da(n.value.rows(), n.value.cols());
            for (Eigen::Index r = 0; r < n.value.rows(); ++r) {
                const double gsum = n.grad.row(r).sum();
                da.row(r) = n.grad.row(r) - gsum * n.value.row(r).array().exp().matrix();
            }
            g.grad(n.parents[0]) += da;
        });
    }

    // ---- normalization ----

    NodeId layer_norm_rows(NodeId a, NodeId gain, NodeId bias, double eps = 1e-5) {
        const Mat& x = value(a);
        if (value(gain).rows() != 1 || value(gain).cols() != x.cols() ||
            value(bias).rows() != 1 || value(bias).cols() != x.cols())
            throw ValidationError("layer_norm_rows: gain/bias must be 1 x cols");
        Mat xhat(x.rows(), x.cols());
        std::vector<double> inv_std(static_cast<std::size_t>(x.rows()));
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const double mean = x.row(r).mean();
            const double var = (x.row(r).array() - mean).square().mean();
            const double is = 1.0 / std::sqrt(var + eps);
            inv_std[static_cast<std::size_t>(r)] = is;
            xhat.row(r) = (x.row(r).array() - mean) * is;
        }
        Mat out = xhat;
        out.array().rowwise() *= value(gain).row(0).array();
        out.rowwise() += value(bias).row(0);
        NodeId id = push(std::move(out), {a, gain, bias},
                         [xhat, inv_std](Graph& g, const Node& n) {
                             const Mat& gain_v = g.value(n.parents[1]);
                             const Eigen::Index c = n.value.cols();
                             Mat dxhat = n.grad;
                             dxhat.array().rowwise() *= gain_v.row(0).array();
                             Mat da(n.grad.rows(), c);
                             for (Eigen::Index r = 0; r < n.grad.rows(); ++r) {
                                 const double m1 = dxhat.row(r).mean();
                                 const double m2 =
                                     dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                                 da.row(r) =
                                     inv_std[static_cast<std::size_t>(r)] *
                                     (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                             }
                             g.grad(n.parents[0]) += da;
                             g.grad(n.parents[1]).row(0) +=
                                 n.grad.cwiseProduct(xhat).colwise().sum();
                             g.grad(n.parents[2]).row(0) += n.grad.colwise().sum();
                         });
        return id;
    }

    // ---- shape plumbing ----

    NodeId slice_rows(NodeId a, Eigen::Index r0, Eigen::Index count) {
        if (r0 < 0 || count < 0 || r0 + count > value(a).rows())
            throw ValidationError("slice_rows: out of range");
        return push(value(a).middleRows(r0, count), {a}, [r0, count](Graph& g, const Node& n) {
            g.grad(n.parents[0]).middleRows(r0, count) += n.grad;
        });
    }

    NodeId slice_cols(NodeId a, Eigen::Index c0, Eigen::Index count) {
        if (c0 < 0 || count < 0 || c0 + count > value(a).cols())
            throw ValidationError("slice_cols: out of range");
        return push(value(a).middleCols(c0, count), {a}, [c0, count](Graph& g, const Node& n) {
            g.grad(n.parents[0]).middleCols(c0, count) += n.grad;
        });
    }

    NodeId concat_cols(NodeId a, NodeId b) {
        if (value(a).rows() != value(b).rows()) throw ValidationError("concat_cols: row mismatch");
        Mat out(value(a).rows(), value(a).cols() + value(b).cols());
        out << value(a), value(b);
        return push(std::move(out), {a, b}, [](Graph& g, const Node& n) {
            const Eigen::Index ca = g.value(n.parents[0]).cols();
            g.grad(n.parents[0]) += n.grad.leftCols(ca);
            g.grad(n.parents[1]) += n.grad.rightCols(n.grad.cols() - ca);
        });
    }

    // Mean over a row range, giving a 1 x cols vector.
    NodeId mean_rows(NodeId a, Eigen::Index r0, Eigen::Index count) {
        if (count <= 0 || r0 < 0 || r0 + count > value(a).rows())
            throw ValidationError("mean_rows: empty or out-of-range span");
        Mat out = value(a).middleRows(r0, count).colwise().mean();
        return push(std::move(out), {a}, [r0, count](Graph& g, const Node& n) {
            const double w = 1.0 / static_cast<double>(count);
            for (Eigen::Index r = 0; r < count; ++r)
                g.grad(n.parents[0]).row(r0 + r) += w * n.grad.row(0);
        });
    }

    NodeId mean_all_rows(NodeId a) { return mean_rows(a, 0, value(a).rows()); }

    NodeId stack_rows(const std::vector<NodeId>& rows) {
        if (rows.empty()) throw ValidationError("stack_rows: empty");
        const Eigen::Index c = value(rows[0]).cols();
        Mat out(static_cast<Eigen::Index>(rows.size()), c);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (value(rows[i]).rows() != 1 || value(rows[i]).cols() != c)
                throw ValidationError("stack_rows: need 1 x c rows");
            out.row(static_cast<Eigen::Index>(i)) = value(rows[i]).row(0);
        }
        std::vector<NodeId> parents = rows;
        return push(std::move(out), std::move(parents), [](Graph& g, const Node& n) {
            for (std::size_t i = 0; i < n.parents.size(); ++i)
                g.grad(n.parents[i]).row(0) += n.grad.row(static_cast<Eigen::Index>(i));
        });
    }

    // Embedding gather: rows of `table` selected by ids.
    NodeId lookup(NodeId table, const std::vector<int>& ids) {
        const Mat& t = value(table);
        Mat out(static_cast<Eigen::Index>(ids.size()), t.cols());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0 || ids[i] >= t.rows()) throw ValidationError("lookup: id out of range");
            out.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
        }
        return push(std::move(out), {table}, [ids](Graph& g, const Node& n) {
            for (std::size_t i = 0; i < ids.size(); ++i)
                g.grad(n.parents[0]).row(ids[i]) += n.grad.row(static_cast<Eigen::Index>(i));
        });
    }

    // ---- losses ----

    // -sum_i logprobs(i, targets[i]); the NLL of a log-softmax output.
    NodeId pick_nll(NodeId logprobs, const std::vector<int>& targets) {
        const Mat& lp = value(logprobs);
        if (static_cast<Eigen::Index>(targets.size()) != lp.rows())
            throw ValidationError("pick_nll: target count mismatch");
        double total = 0.0;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            if (targets[i] < 0 || targets[i] >= lp.cols())
                throw ValidationError("pick_nll: class id out of range");
            total -= lp(static_cast<Eigen::Index>(i), targets[i]);
        }
        Mat out(1, 1);
        out(0, 0) = total;
        return push(std::move(out), {logprobs}, [targets](Graph& g, const Node& n) {
            const double w = n.grad(0, 0);
            for (std::size_t i = 0; i < targets.size(); ++i)
                g.grad(n.parents[0])(static_cast<Eigen::Index>(i), targets[i]) -= w;
        });
    }

    NodeId add_scaled(const std::vector<std::pair<NodeId, double>>& terms) {
        if (terms.empty()) throw ValidationError("add_scaled: empty");
        Mat out = Mat::Zero(value(terms[0].first).rows(), value(terms[0].first).cols());
        std::vector<NodeId> parents;
        std::vector<double> weights;
        for (const auto& [id, w] : terms) {
            out += w * value(id);
            parents.push_back(id);
            weights.push_back(w);
        }
        return push(std::move(out), std::move(parents), [weights](Graph& g, const Node& n) {
            for (std::size_t i = 0; i < n.parents.size(); ++i)
                g.grad(n.parents[i]) += weights[i] * n.grad;
        });
    }

    double scalar(NodeId id) const {
        const Mat& v = value(id);
        if (v.size() != 1) throw ValidationError("scalar: node is not 1x1");
        return v(0, 0);
    }

    // Backpropagate from a scalar node; parameter gradients accumulate into
    // the store.
    void backward(NodeId seed) {
        if (!grad_enabled_) throw ConfigError("backward on a no-grad graph");
        if (value(seed).size() != 1) throw ValidationError("backward: seed must be scalar");
        for (Node& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
        nodes_[static_cast<std::size_t>(seed)].grad(0, 0) = 1.0;
        for (int i = seed; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.backward) n.backward(*this, n);
            if (n.param_id >= 0) store_->at(n.param_id).grad += n.grad;
        }
    }

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Mat value;
        Mat grad;
        std::vector<NodeId> parents;
        std::function<void(Graph&, const Node&)> backward;
        int param_id = -1;
    };

    NodeId push(Mat value, std::vector<NodeId> parents,
                std::function<void(Graph&, const Node&)> back) {
        Node n;
        n.value = std::move(value);
        n.parents = std::move(parents);
        if (grad_enabled_) n.backward = std::move(back);
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    void check_same_shape(NodeId a, NodeId b, const char* op) const {
        if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
            throw ValidationError(std::string(op) + ": shape mismatch");
    }

    ParamStore* store_;
    bool grad_enabled_;
    std::vector<Node> nodes_;
};

// Xavier-uniform initialization, deterministic under the caller's Rng.
inline Mat xavier_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-a, a);
    return m;
}

inline Mat normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, stddev);
    return m;
}

}  // namespace phqmml::ad
