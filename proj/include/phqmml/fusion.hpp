#pragma once

// Multimodal half of the model: unimodal feature extraction with length
// clipping, per-modality self-attention encoders, cross-modal fusion with
// text queries, the severity head, and the combined training objective.

#include <optional>

#include "phqmml/corpus.hpp"
#include "phqmml/nn.hpp"
#include "phqmml/summarizer.hpp"

namespace phqmml {

struct TextFeatures {
    Mat states;  // summary length x text embedding dim
};

struct LossWeights {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 1.0;

    void validate() const {
        if (alpha < 0 || beta < 0 || gamma < 0)
            throw ConfigError("loss weights must be non-negative");
        if (alpha == 0 && beta == 0 && gamma == 0)
            throw ConfigError("loss weights must not all be zero");
    }
};

struct SeverityDistribution {
    Eigen::VectorXd probs;  // 4 classes

    void validate() const {
        if (probs.size() != 4) throw ValidationError("severity distribution needs 4 classes");
        if (probs.minCoeff() < 0) throw ValidationError("severity distribution negative entry");
        if (std::abs(probs.sum() - 1.0) > 1e-6)
            throw ValidationError("severity distribution does not sum to 1");
    }

    int argmax() const {
        int best = 0;
        for (int i = 1; i < 4; ++i)
            if (probs[i] > probs[best]) best = i;
        return best;
    }
};

// Per-sample cross-entropy against the gold severity; the caller applies
// the batch mean.
inline double sp_loss(const SeverityDistribution& pred, const SeverityLevel& gold) {
    pred.validate();
    return -std::log(std::max(pred.probs[gold.value], 1e-300));
}

// alpha * L_IC + beta * L_SS + gamma * L_SP with NaN attribution.
inline double total_loss(double l_ic, double l_ss, double l_sp, const LossWeights& w) {
    w.validate();
    if (std::isnan(l_ic)) throw TrainingError("total_loss: l_ic is NaN");
    if (std::isnan(l_ss)) throw TrainingError("total_loss: l_ss is NaN");
    if (std::isnan(l_sp)) throw TrainingError("total_loss: l_sp is NaN");
    return w.alpha * l_ic + w.beta * l_ss + w.gamma * l_sp;
}

// Modality sequence lengths are clipped at mean + sigma * std over the
// training split.
struct ClipPolicy {
    Eigen::Index max_acoustic = 1;
    Eigen::Index max_visual = 1;
};

inline ClipPolicy compute_clip_policy(const std::vector<Sample>& train, double sigma = 3.0) {
    auto bound = [sigma](const std::vector<double>& lengths) -> Eigen::Index {
        if (lengths.empty()) return 1;
        double mean = 0.0;
        for (double l : lengths) mean += l;
        mean /= static_cast<double>(lengths.size());
        double var = 0.0;
        for (double l : lengths) var += (l - mean) * (l - mean);
        var /= static_cast<double>(lengths.size());
        const double b = mean + sigma * std::sqrt(var);
        return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(b)));
    };
    std::vector<double> la, lv;
    for (const Sample& s : train) {
        if (s.acoustic) la.push_back(static_cast<double>(s.acoustic->frames.rows()));
        if (s.visual) lv.push_back(static_cast<double>(s.visual->frames.rows()));
    }
    return {bound(la), bound(lv)};
}

inline Mat clip_frames(const Mat& frames, Eigen::Index max_rows) {
    return frames.rows() <= max_rows ? frames : Mat(frames.topRows(max_rows));
}

// ---------------------------------------------------------------------------
// Fusion model
// ---------------------------------------------------------------------------

struct FusionConfig {
    int d_model = 32;
    int heads = 4;
    int sat_layers_acoustic = 1;
    int sat_layers_visual = 3;
    int cmt_layers_ta = 2;
    int cmt_layers_tv = 2;
    int text_embed_dim = 32;
    int mlp_hidden = 32;
    int ffn_mult = 2;
    int acoustic_dim = synth::kAcousticDim;
    int visual_dim = synth::kVisualDim;
    int vocab_size = 0;
    bool use_audio = true;
    bool use_vision = true;

    void validate() const {
        if (d_model <= 0 || heads <= 0 || text_embed_dim <= 0 || mlp_hidden <= 0 ||
            vocab_size <= 0)
            throw ConfigError("fusion config: dimensions must be positive");
        if (d_model % heads != 0) throw ConfigError("fusion config: heads must divide d_model");
        if (sat_layers_acoustic < 0 || sat_layers_visual < 0 || cmt_layers_ta < 0 ||
            cmt_layers_tv < 0)
            throw ConfigError("fusion config: negative layer count");
    }
};

// Intra-modal self-attention stack: input projection to the shared model
// dimension, sinusoidal positions, then the configured number of layers.
// Zero layers degenerate to the projection alone.
class SatEncoder {
public:
    SatEncoder() = default;
    SatEncoder(ad::ParamStore& store, Rng& rng, const std::string& prefix, Modality modality,
               Eigen::Index in_dim, const FusionConfig& cfg, int layers)
        : modality_(modality), d_model_(cfg.d_model) {
        proj_ = nn::Linear(store, rng, prefix + ".proj", in_dim, cfg.d_model);
        for (int l = 0; l < layers; ++l)
            layers_.emplace_back(store, rng, prefix + ".l" + std::to_string(l), cfg.d_model,
                                 cfg.heads, static_cast<Eigen::Index>(cfg.ffn_mult) * cfg.d_model);
        if (!layers_.empty()) final_ln_ = nn::LayerNorm(store, prefix + ".final", cfg.d_model);
    }

    int layer_count() const { return static_cast<int>(layers_.size()); }
    Modality modality() const { return modality_; }

    nn::NodeId apply(ad::Graph& g, nn::NodeId features) const {
        nn::NodeId x = proj_.apply(g, features);
        if (layers_.empty()) return x;
        x = g.add(x, g.input(nn::sinusoidal_positions(g.value(x).rows(), d_model_)));
        for (const auto& layer : layers_) x = layer.apply(g, x);
        return final_ln_.apply(g, x);
    }

    // Spec-facing entry: validates the modality and preserves row count.
    Mat encode(const FeatureSequence& features, ad::ParamStore& store) const {
        if (features.modality != modality_)
            throw ValidationError("sat_encode: features carry the wrong modality");
        if (features.frames.rows() < 1) throw ValidationError("sat_encode: empty sequence");
        ad::Graph g(&store, /*grad=*/false);
        return g.value(apply(g, g.input(features.frames)));
    }

private:
    Modality modality_ = Modality::Acoustic;
    Eigen::Index d_model_ = 0;
    nn::Linear proj_;
    std::vector<nn::EncoderLayer> layers_;
    nn::LayerNorm final_ln_;
};

// Cross-modal transformer: text states supply the queries, modality states
// the keys and values; the output keeps the text length.
class CmtFuser {
public:
    CmtFuser() = default;
    CmtFuser(ad::ParamStore& store, Rng& rng, const std::string& prefix, const FusionConfig& cfg,
             int layers) {
        for (int l = 0; l < layers; ++l)
            layers_.emplace_back(store, rng, prefix + ".l" + std::to_string(l), cfg.d_model,
                                 cfg.heads, static_cast<Eigen::Index>(cfg.ffn_mult) * cfg.d_model);
        final_ln_ = nn::LayerNorm(store, prefix + ".final", cfg.d_model);
    }

    int layer_count() const { return static_cast<int>(layers_.size()); }

    void set_force_uniform(bool v) {
        for (auto& layer : layers_) layer.attn.force_uniform = v;
    }

    nn::NodeId apply(ad::Graph& g, nn::NodeId h_text, nn::NodeId h_modality) const {
        if (g.value(h_text).cols() != g.value(h_modality).cols())
            throw ValidationError("cmt_fuse: model dimension mismatch");
        nn::NodeId q = h_text;
        for (const auto& layer : layers_) q = layer.apply(g, q, h_modality);
        return final_ln_.apply(g, q);
    }

    Mat fuse(const Mat& h_text, const Mat& h_modality, ad::ParamStore& store) const {
        ad::Graph g(&store, /*grad=*/false);
        return g.value(apply(g, g.input(h_text), g.input(h_modality)));
    }

private:
    std::vector<nn::CrossLayer> layers_;
    nn::LayerNorm final_ln_;
};

struct SampleFeatures {
    TextFeatures text;
    FeatureSequence acoustic;
    FeatureSequence visual;
};

class FusionModel {
public:
    FusionModel(ad::ParamStore& store, const FusionConfig& cfg, Rng& rng)
        : store_(&store), cfg_(cfg) {
        cfg_.validate();
        text_embed_ =
            store.add("fus.text_embed", ad::normal_init(cfg.vocab_size, cfg.text_embed_dim, 0.05, rng));
        text_fc_ = nn::Linear(store, rng, "fus.text_fc", cfg.text_embed_dim, cfg.d_model);
        if (cfg_.use_audio) {
            sat_a_ = SatEncoder(store, rng, "fus.sat_a", Modality::Acoustic, cfg.acoustic_dim,
                                cfg_, cfg.sat_layers_acoustic);
            cmt_ta_ = CmtFuser(store, rng, "fus.cmt_ta", cfg_, cfg.cmt_layers_ta);
        }
        if (cfg_.use_vision) {
            sat_v_ = SatEncoder(store, rng, "fus.sat_v", Modality::Visual, cfg.visual_dim, cfg_,
                                cfg.sat_layers_visual);
            cmt_tv_ = CmtFuser(store, rng, "fus.cmt_tv", cfg_, cfg.cmt_layers_tv);
        }
        const int streams = (cfg_.use_audio ? 1 : 0) + (cfg_.use_vision ? 1 : 0);
        const Eigen::Index mlp_in = cfg.d_model * std::max(1, streams);
        mlp_hidden_ = nn::Linear(store, rng, "fus.mlp_hidden", mlp_in, cfg.mlp_hidden);
        // Zero-initialized output layer: an untrained model predicts the
        // uniform severity distribution.
        mlp_out_ = nn::Linear(store, rng, "fus.mlp_out", cfg.mlp_hidden, 4, /*zero_init=*/true);
    }

    const FusionConfig& config() const { return cfg_; }
    const SatEncoder& sat_acoustic() const { return require(cfg_.use_audio, sat_a_, "audio"); }
    const SatEncoder& sat_visual() const { return require(cfg_.use_vision, sat_v_, "vision"); }
    CmtFuser& cmt_text_acoustic() { return require(cfg_.use_audio, cmt_ta_, "audio"); }
    CmtFuser& cmt_text_visual() { return require(cfg_.use_vision, cmt_tv_, "vision"); }

    // Trainable text encoder output plus the stored (clipped) modality
    // matrices; the desk stand-ins for the pretrained extractors.
    SampleFeatures extract_features(const Sample& sample, const std::string& summary_text,
                                    const Vocab& vocab, const ClipPolicy& clip) const {
        SampleFeatures out;
        out.text.states = text_feature_values(summary_tokens(summary_text, vocab));
        if (cfg_.use_audio) {
            if (!sample.acoustic)
                throw ConfigError("extract_features: sample " + sample.id +
                                  " has no acoustic features and no backend substitute");
            out.acoustic = *sample.acoustic;
            out.acoustic.frames = clip_frames(out.acoustic.frames, clip.max_acoustic);
        }
        if (cfg_.use_vision) {
            if (!sample.visual)
                throw ConfigError("extract_features: sample " + sample.id +
                                  " has no visual features and no backend substitute");
            out.visual = *sample.visual;
            out.visual.frames = clip_frames(out.visual.frames, clip.max_visual);
        }
        return out;
    }

    static std::vector<int> summary_tokens(const std::string& summary_text, const Vocab& vocab) {
        std::vector<int> ids = vocab.encode(split_ws(summary_text));
        if (ids.empty()) ids.push_back(Vocab::kEos);  // l_t >= 1
        return ids;
    }

    // Severity log-probabilities for one sample; absent streams may be
    // zero-substituted (missing-modality fallback at evaluation).
    nn::NodeId severity_logprobs_node(ad::Graph& g, const std::vector<int>& summary_ids,
                                      const Mat* acoustic, const Mat* visual,
                                      bool allow_missing = false) const {
        const nn::NodeId h_t = text_states_node(g, summary_ids);
        std::vector<nn::NodeId> pooled;
        if (cfg_.use_audio)
            pooled.push_back(stream_pooled(g, h_t, acoustic, sat_a_, cmt_ta_, allow_missing));
        if (cfg_.use_vision)
            pooled.push_back(stream_pooled(g, h_t, visual, sat_v_, cmt_tv_, allow_missing));
        if (pooled.empty()) pooled.push_back(g.mean_all_rows(h_t));  // text-only head
        nn::NodeId features = pooled[0];
        for (std::size_t i = 1; i < pooled.size(); ++i)
            features = g.concat_cols(features, pooled[i]);
        const nn::NodeId hidden = g.gelu(mlp_hidden_.apply(g, features));
        return g.log_softmax_rows(mlp_out_.apply(g, hidden));
    }

    SeverityDistribution predict_severity_for(const std::vector<int>& summary_ids,
                                              const Mat* acoustic, const Mat* visual,
                                              bool allow_missing = false) const {
        ad::Graph g(store_, /*grad=*/false);
        const nn::NodeId lp =
            severity_logprobs_node(g, summary_ids, acoustic, visual, allow_missing);
        SeverityDistribution dist{g.value(lp).row(0).array().exp().transpose()};
        dist.validate();
        return dist;
    }

    // Severity from the two fused streams: temporal mean pooling,
    // concatenation, MLP, softmax. Defined on the trimodal shape.
    SeverityDistribution predict_severity(const Mat& h_ta, const Mat& h_tv) const {
        if (!cfg_.use_audio || !cfg_.use_vision)
            throw ConfigError("predict_severity: model is not trimodal");
        if (h_ta.rows() != h_tv.rows())
            throw ValidationError("predict_severity: fused streams disagree on text length");
        ad::Graph g(store_, /*grad=*/false);
        const nn::NodeId features =
            g.concat_cols(g.mean_all_rows(g.input(h_ta)), g.mean_all_rows(g.input(h_tv)));
        const nn::NodeId hidden = g.gelu(mlp_hidden_.apply(g, features));
        const nn::NodeId lp = g.log_softmax_rows(mlp_out_.apply(g, hidden));
        SeverityDistribution dist{g.value(lp).row(0).array().exp().transpose()};
        dist.validate();
        return dist;
    }

    nn::NodeId text_states_node(ad::Graph& g, const std::vector<int>& summary_ids) const {
        const nn::NodeId x = g.lookup(g.param(text_embed_), summary_ids);
        nn::NodeId h = text_fc_.apply(g, x);
        return g.add(h, g.input(nn::sinusoidal_positions(g.value(h).rows(), cfg_.d_model)));
    }

    Mat text_feature_values(const std::vector<int>& summary_ids) const {
        ad::Graph g(store_, /*grad=*/false);
        return g.value(g.lookup(g.param(text_embed_), summary_ids));
    }

private:
    template <typename T>
    static T& require(bool enabled, T& member, const char* what) {
        if (!enabled) throw ConfigError(std::string("fusion stream disabled: ") + what);
        return member;
    }
    template <typename T>
    static const T& require(bool enabled, const T& member, const char* what) {
        if (!enabled) throw ConfigError(std::string("fusion stream disabled: ") + what);
        return member;
    }

    nn::NodeId stream_pooled(ad::Graph& g, nn::NodeId h_t, const Mat* frames,
                             const SatEncoder& sat, const CmtFuser& cmt,
                             bool allow_missing) const {
        if (frames == nullptr || frames->rows() == 0) {
            if (!allow_missing)
                throw ConfigError("fusion: modality stream missing at training time");
            return g.input(Mat::Zero(1, cfg_.d_model));
        }
        const nn::NodeId h_m = sat.apply(g, g.input(*frames));
        return g.mean_all_rows(cmt.apply(g, h_t, h_m));
    }

    ad::ParamStore* store_;
    FusionConfig cfg_;
    int text_embed_ = -1;
    nn::Linear text_fc_;
    SatEncoder sat_a_, sat_v_;
    CmtFuser cmt_ta_, cmt_tv_;
    nn::Linear mlp_hidden_, mlp_out_;
};

}  // namespace phqmml
