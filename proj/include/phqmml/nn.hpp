#pragma once

// Transformer building blocks over the autodiff graph: linear and layer-norm
// modules, multi-head attention (self, causal, cross), pre-norm encoder and
// cross-attention layers, and sinusoidal positions. Modules register their
// parameters once and rebuild nodes per graph.

#include <string>
#include <vector>

#include "phqmml/autodiff.hpp"

namespace phqmml::nn {

using ad::Graph;
using ad::Mat;
using ad::ParamStore;
using NodeId = ad::Graph::NodeId;

inline Mat sinusoidal_positions(Eigen::Index len, Eigen::Index dim) {
    Mat pe(len, dim);
    for (Eigen::Index pos = 0; pos < len; ++pos)
        for (Eigen::Index i = 0; i < dim; ++i) {
            const double angle =
                static_cast<double>(pos) /
                std::pow(10000.0, 2.0 * static_cast<double>(i / 2) / static_cast<double>(dim));
            pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return pe;
}

struct Linear {
    int w = -1, b = -1;
    Eigen::Index in = 0, out = 0;

    Linear() = default;
    Linear(ParamStore& store, Rng& rng, const std::string& prefix, Eigen::Index in_dim,
           Eigen::Index out_dim, bool zero_init = false)
        : in(in_dim), out(out_dim) {
        w = store.add(prefix + ".w", zero_init ? Mat::Zero(in_dim, out_dim)
                                               : ad::xavier_init(in_dim, out_dim, rng));
        b = store.add(prefix + ".b", Mat::Zero(1, out_dim));
    }

    NodeId apply(Graph& g, NodeId x) const { return g.add_row(g.matmul(x, g.param(w)), g.param(b)); }
};

struct LayerNorm {
    int gain = -1, bias = -1;

    LayerNorm() = default;
    LayerNorm(ParamStore& store, const std::string& prefix, Eigen::Index dim) {
        gain = store.add(prefix + ".gain", Mat::Ones(1, dim));
        bias = store.add(prefix + ".bias", Mat::Zero(1, dim));
    }

    NodeId apply(Graph& g, NodeId x) const {
        return g.layer_norm_rows(x, g.param(gain), g.param(bias));
    }
};

struct MultiHeadAttention {
    Linear wq, wk, wv, wo;
    int heads = 1;
    Eigen::Index dim = 0;
    bool causal = false;
    // Test hook: replaces attention scores with zeros so every query attends
    // uniformly over the keys.
    bool force_uniform = false;

    MultiHeadAttention() = default;
    MultiHeadAttention(ParamStore& store, Rng& rng, const std::string& prefix, Eigen::Index d,
                       int n_heads, bool causal_mask = false)
        : heads(n_heads), dim(d), causal(causal_mask) {
        if (d % n_heads != 0) throw ConfigError(prefix + ": dim must divide heads");
        wq = Linear(store, rng, prefix + ".wq", d, d);
        wk = Linear(store, rng, prefix + ".wk", d, d);
        wv = Linear(store, rng, prefix + ".wv", d, d);
        wo = Linear(store, rng, prefix + ".wo", d, d);
    }

    NodeId apply(Graph& g, NodeId query_in, NodeId kv_in) const {
        const NodeId q = wq.apply(g, query_in);
        const NodeId k = wk.apply(g, kv_in);
        const NodeId v = wv.apply(g, kv_in);
        const Eigen::Index dk = dim / heads;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
        const Eigen::Index lq = g.value(q).rows();
        const Eigen::Index lk = g.value(k).rows();

        NodeId mask = -1;
        if (causal) {
            Mat m = Mat::Zero(lq, lk);
            for (Eigen::Index r = 0; r < lq; ++r)
                for (Eigen::Index c = r + 1; c < lk; ++c) m(r, c) = -1e30;
            mask = g.input(std::move(m));
        }

        NodeId concat = -1;
        for (int h = 0; h < heads; ++h) {
            const NodeId qh = g.slice_cols(q, h * dk, dk);
            const NodeId kh = g.slice_cols(k, h * dk, dk);
            const NodeId vh = g.slice_cols(v, h * dk, dk);
            NodeId scores = g.scale(g.matmul_nt(qh, kh), scale);
            if (force_uniform) scores = g.input(Mat::Zero(lq, lk));
            if (mask >= 0) scores = g.add(scores, mask);
            const NodeId attn = g.softmax_rows(scores);
            const NodeId head_out = g.matmul(attn, vh);
            concat = h == 0 ? head_out : g.concat_cols(concat, head_out);
        }
        return wo.apply(g, concat);
    }
};

struct FeedForward {
    Linear up, down;

    FeedForward() = default;
    FeedForward(ParamStore& store, Rng& rng, const std::string& prefix, Eigen::Index d,
                Eigen::Index inner) {
        up = Linear(store, rng, prefix + ".up", d, inner);
        down = Linear(store, rng, prefix + ".down", inner, d);
    }

    NodeId apply(Graph& g, NodeId x) const { return down.apply(g, g.gelu(up.apply(g, x))); }
};

// Pre-norm self-attention block: x + Attn(LN(x)), then x + FFN(LN(x)).
struct EncoderLayer {
    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    FeedForward ffn;

    EncoderLayer() = default;
    EncoderLayer(ParamStore& store, Rng& rng, const std::string& prefix, Eigen::Index d,
                 int heads, Eigen::Index ffn_inner, bool causal = false) {
        ln1 = LayerNorm(store, prefix + ".ln1", d);
        ln2 = LayerNorm(store, prefix + ".ln2", d);
        attn = MultiHeadAttention(store, rng, prefix + ".attn", d, heads, causal);
        ffn = FeedForward(store, rng, prefix + ".ffn", d, ffn_inner);
    }

    NodeId apply(Graph& g, NodeId x) const {
        const NodeId normed = ln1.apply(g, x);
        x = g.add(x, attn.apply(g, normed, normed));
        x = g.add(x, ffn.apply(g, ln2.apply(g, x)));
        return x;
    }
};

// Pre-norm cross-attention block: queries attend over an external memory.
struct CrossLayer {
    LayerNorm ln_q, ln_kv, ln2;
    MultiHeadAttention attn;
    FeedForward ffn;

    CrossLayer() = default;
    CrossLayer(ParamStore& store, Rng& rng, const std::string& prefix, Eigen::Index d, int heads,
               Eigen::Index ffn_inner) {
        ln_q = LayerNorm(store, prefix + ".ln_q", d);
        ln_kv = LayerNorm(store, prefix + ".ln_kv", d);
        ln2 = LayerNorm(store, prefix + ".ln2", d);
        attn = MultiHeadAttention(store, rng, prefix + ".attn", d, heads);
        ffn = FeedForward(store, rng, prefix + ".ffn", d, ffn_inner);
    }

    NodeId apply(Graph& g, NodeId q, NodeId kv) const {
        q = g.add(q, attn.apply(g, ln_q.apply(g, q), ln_kv.apply(g, kv)));
        q = g.add(q, ffn.apply(g, ln2.apply(g, q)));
        return q;
    }
};

// Decoder block: causal self-attention, cross-attention over the encoder
// memory, feed-forward; all pre-norm with residuals.
struct DecoderLayer {
    LayerNorm ln1, ln_cq, ln_ckv, ln3;
    MultiHeadAttention self_attn, cross_attn;
    FeedForward ffn;

    DecoderLayer() = default;
    DecoderLayer(ParamStore& store, Rng& rng, const std::string& prefix, Eigen::Index d,
                 int heads, Eigen::Index ffn_inner) {
        ln1 = LayerNorm(store, prefix + ".ln1", d);
        ln_cq = LayerNorm(store, prefix + ".ln_cq", d);
        ln_ckv = LayerNorm(store, prefix + ".ln_ckv", d);
        ln3 = LayerNorm(store, prefix + ".ln3", d);
        self_attn = MultiHeadAttention(store, rng, prefix + ".self", d, heads, /*causal=*/true);
        cross_attn = MultiHeadAttention(store, rng, prefix + ".cross", d, heads);
        ffn = FeedForward(store, rng, prefix + ".ffn", d, ffn_inner);
    }

    NodeId apply(Graph& g, NodeId x, NodeId memory) const {
        const NodeId n1 = ln1.apply(g, x);
        x = g.add(x, self_attn.apply(g, n1, n1));
        x = g.add(x, cross_attn.apply(g, ln_cq.apply(g, x), ln_ckv.apply(g, memory)));
        x = g.add(x, ffn.apply(g, ln3.apply(g, x)));
        return x;
    }
};

}  // namespace phqmml::nn
