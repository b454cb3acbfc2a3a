#pragma once

// Orchestration: run configuration, the combined-loss training loop,
// checkpoint save/load, end-to-end evaluation (generate, fuse, predict),
// ablations, and report emission as JSON plus rendered tables.

#include <iomanip>
#include <memory>
#include <set>
#include <sstream>

#include "phqmml/fusion.hpp"
#include "phqmml/labeling.hpp"
#include "phqmml/metrics.hpp"
#include "phqmml/phqcot.hpp"
#include "phqmml/summarizer.hpp"

namespace phqmml {

struct OptimizerConfig {
    double lr = 1e-4;  // the training-based default
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::string corpus_dir;
    LossWeights loss_weights;
    BackendConfig backend;
    FusionConfig fusion;
    OptimizerConfig optimizer;
    int epochs = 3;
    int eval_every_epochs = 1;
    long max_steps = 0;  // 0 = run all epochs
    double clip_sigma = 3.0;
    std::string label_source = "truth";  // truth | heuristic | labels_dir
    std::string labels_dir;
    std::string out_dir;

    void validate() const {
        loss_weights.validate();
        if (epochs < 1) throw ConfigError("run config: epochs must be >= 1");
        if (eval_every_epochs < 1) throw ConfigError("run config: eval cadence must be >= 1");
        if (label_source != "truth" && label_source != "heuristic" &&
            label_source != "labels_dir")
            throw ConfigError("run config: unknown label_source '" + label_source + "'");
        if (label_source == "labels_dir" && labels_dir.empty())
            throw ConfigError("run config: labels_dir required for label_source=labels_dir");
    }
};

inline nlohmann::json optimizer_to_json(const OptimizerConfig& o) {
    return {{"lr", o.lr}, {"beta1", o.beta1}, {"beta2", o.beta2}, {"eps", o.eps},
            {"weight_decay", o.weight_decay}};
}

inline nlohmann::json backend_to_json(const BackendConfig& b) {
    return {{"vocab_size", b.vocab_size},
            {"hidden", b.hidden},
            {"layers", b.layers},
            {"heads", b.heads},
            {"ffn_mult", b.ffn_mult},
            {"max_input_tokens", b.max_input_tokens},
            {"max_output_tokens", b.max_output_tokens},
            {"decode", b.decode == DecodeMode::Greedy ? "greedy" : "beam"},
            {"beam_width", b.beam_width}};
}

inline nlohmann::json fusion_to_json(const FusionConfig& f) {
    return {{"d_model", f.d_model},
            {"heads", f.heads},
            {"sat_layers_acoustic", f.sat_layers_acoustic},
            {"sat_layers_visual", f.sat_layers_visual},
            {"cmt_layers_ta", f.cmt_layers_ta},
            {"cmt_layers_tv", f.cmt_layers_tv},
            {"text_embed_dim", f.text_embed_dim},
            {"mlp_hidden", f.mlp_hidden},
            {"ffn_mult", f.ffn_mult},
            {"acoustic_dim", f.acoustic_dim},
            {"visual_dim", f.visual_dim},
            {"vocab_size", f.vocab_size},
            {"use_audio", f.use_audio},
            {"use_vision", f.use_vision}};
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
    return {{"seed", c.seed},
            {"corpus", c.corpus_dir},
            {"loss_weights",
             {{"alpha", c.loss_weights.alpha}, {"beta", c.loss_weights.beta},
              {"gamma", c.loss_weights.gamma}}},
            {"backend", backend_to_json(c.backend)},
            {"fusion", fusion_to_json(c.fusion)},
            {"optimizer", optimizer_to_json(c.optimizer)},
            {"epochs", c.epochs},
            {"eval_every_epochs", c.eval_every_epochs},
            {"max_steps", c.max_steps},
            {"clip_sigma", c.clip_sigma},
            {"label_source", c.label_source},
            {"labels_dir", c.labels_dir},
            {"out_dir", c.out_dir}};
}

inline BackendConfig backend_from_json(const nlohmann::json& j) {
    BackendConfig b;
    b.vocab_size = j.value("vocab_size", 0);
    b.hidden = j.value("hidden", b.hidden);
    b.layers = j.value("layers", b.layers);
    b.heads = j.value("heads", b.heads);
    b.ffn_mult = j.value("ffn_mult", b.ffn_mult);
    b.max_input_tokens = j.value("max_input_tokens", b.max_input_tokens);
    b.max_output_tokens = j.value("max_output_tokens", b.max_output_tokens);
    b.decode = j.value("decode", "greedy") == std::string("beam") ? DecodeMode::Beam
                                                                  : DecodeMode::Greedy;
    b.beam_width = j.value("beam_width", b.beam_width);
    return b;
}

inline FusionConfig fusion_from_json(const nlohmann::json& j) {
    FusionConfig f;
    f.d_model = j.value("d_model", f.d_model);
    f.heads = j.value("heads", f.heads);
    f.sat_layers_acoustic = j.value("sat_layers_acoustic", f.sat_layers_acoustic);
    f.sat_layers_visual = j.value("sat_layers_visual", f.sat_layers_visual);
    f.cmt_layers_ta = j.value("cmt_layers_ta", f.cmt_layers_ta);
    f.cmt_layers_tv = j.value("cmt_layers_tv", f.cmt_layers_tv);
    f.text_embed_dim = j.value("text_embed_dim", f.text_embed_dim);
    f.mlp_hidden = j.value("mlp_hidden", f.mlp_hidden);
    f.ffn_mult = j.value("ffn_mult", f.ffn_mult);
    f.acoustic_dim = j.value("acoustic_dim", f.acoustic_dim);
    f.visual_dim = j.value("visual_dim", f.visual_dim);
    f.vocab_size = j.value("vocab_size", 0);
    f.use_audio = j.value("use_audio", true);
    f.use_vision = j.value("use_vision", true);
    return f;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    c.seed = j.value("seed", 1ull);
    c.corpus_dir = j.value("corpus", "");
    if (j.contains("loss_weights")) {
        const auto& w = j.at("loss_weights");
        c.loss_weights = {w.value("alpha", 1.0), w.value("beta", 1.0), w.value("gamma", 1.0)};
    }
    if (j.contains("backend")) c.backend = backend_from_json(j.at("backend"));
    if (j.contains("fusion")) c.fusion = fusion_from_json(j.at("fusion"));
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        c.optimizer.lr = o.value("lr", c.optimizer.lr);
        c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
        c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
        c.optimizer.eps = o.value("eps", c.optimizer.eps);
        c.optimizer.weight_decay = o.value("weight_decay", c.optimizer.weight_decay);
    }
    c.epochs = j.value("epochs", c.epochs);
    c.eval_every_epochs = j.value("eval_every_epochs", c.eval_every_epochs);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.clip_sigma = j.value("clip_sigma", c.clip_sigma);
    c.label_source = j.value("label_source", c.label_source);
    c.labels_dir = j.value("labels_dir", c.labels_dir);
    c.out_dir = j.value("out_dir", c.out_dir);
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    nlohmann::json j;
    in >> j;
    RunConfig c = run_config_from_json(j);
    c.validate();
    if (!c.corpus_dir.empty() && !std::filesystem::exists(c.corpus_dir))
        throw ConfigError("config: corpus path does not exist: " + c.corpus_dir);
    if (c.label_source == "labels_dir" && !std::filesystem::exists(c.labels_dir))
        throw ConfigError("config: labels_dir does not exist: " + c.labels_dir);
    return c;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct StepRecord {
    long step = 0;
    double l_ic = 0, l_ss = 0, l_sp = 0, total = 0;
};

struct EvalResult {
    std::string split;
    GenerationScores generation;
    ClassificationScores binary;
    ClassificationScores per_class;
    bool modality_fallback = false;
    std::vector<std::string> notes;
};

struct RunReport {
    nlohmann::json config_echo;
    std::vector<StepRecord> steps;
    std::vector<double> epoch_mean_total;
    std::vector<std::pair<int, EvalResult>> eval_points;
    std::optional<EvalResult> final_dev;
    std::optional<EvalResult> final_test;
    std::vector<std::string> ablation_tags;
};

inline double table_value(double raw) { return std::round(raw * 10000.0) / 100.0; }

inline nlohmann::json generation_to_json(const GenerationScores& g) {
    return {{"rouge1", table_value(g.rouge1)},
            {"rouge2", table_value(g.rouge2)},
            {"rougeL", table_value(g.rougeL)},
            {"bleu", table_value(g.bleu)},
            {"embed_score", table_value(g.embed_score)}};
}

inline nlohmann::json eval_to_json(const EvalResult& e) {
    nlohmann::json j;
    j["split"] = e.split;
    j["generation"] = generation_to_json(e.generation);
    j["severity"] = {{"Precision", table_value(e.binary.precision)},
                     {"Recall", table_value(e.binary.recall)},
                     {"Dep", table_value(e.binary.per_class_f1.count(1)
                                             ? e.binary.per_class_f1.at(1)
                                             : 0.0)},
                     {"Con", table_value(e.binary.per_class_f1.count(0)
                                             ? e.binary.per_class_f1.at(0)
                                             : 0.0)},
                     {"Macro", table_value(e.binary.macro_f1)}};
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& [cls, f1] : e.per_class.per_class_f1)
        per_class[std::to_string(cls)] = table_value(f1);
    j["severity"]["per_class_f1"] = per_class;
    j["flags"] = {{"modality_fallback", e.modality_fallback}};
    if (!e.notes.empty()) j["notes"] = e.notes;
    return j;
}

inline nlohmann::json report_to_json(const RunReport& r) {
    nlohmann::json j;
    j["config"] = r.config_echo;
    j["ablation"] = r.ablation_tags;
    j["curves"] = {{"epoch_mean_total", r.epoch_mean_total}};
    nlohmann::json evals = nlohmann::json::array();
    for (const auto& [epoch, e] : r.eval_points) {
        nlohmann::json row = eval_to_json(e);
        row["epoch"] = epoch;
        evals.push_back(row);
    }
    j["evals"] = evals;
    j["final"] = nlohmann::json::object();
    if (r.final_dev) j["final"]["dev"] = eval_to_json(*r.final_dev);
    if (r.final_test) j["final"]["test"] = eval_to_json(*r.final_test);
    return j;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

// Owns the parameter store, both models, the vocabulary, and the clip
// policy. Not movable: the models hold a pointer into the store.
class Pipeline {
public:
    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    static std::unique_ptr<Pipeline> create(const Corpus& corpus, const RunConfig& cfg) {
        cfg.validate();
        auto p = std::unique_ptr<Pipeline>(new Pipeline());
        p->cfg_ = cfg;
        p->vocab_ = build_vocab(corpus);
        p->cfg_.backend.vocab_size = p->vocab_.size();
        p->cfg_.fusion.vocab_size = p->vocab_.size();
        p->clip_ = compute_clip_policy(corpus.train, cfg.clip_sigma);
        Rng rng(cfg.seed);
        p->summ_ = std::make_unique<SummarizerModel>(p->store_, p->cfg_.backend, rng);
        p->fus_ = std::make_unique<FusionModel>(p->store_, p->cfg_.fusion, rng);
        return p;
    }

    const Vocab& vocab() const { return vocab_; }
    const ClipPolicy& clip() const { return clip_; }
    SummarizerModel& summarizer() { return *summ_; }
    FusionModel& fusion() { return *fus_; }
    ad::ParamStore& store() { return store_; }
    const RunConfig& config() const { return cfg_; }
    std::vector<std::string>& ablation_tags() { return ablation_tags_; }

    std::vector<PhqItem> labels_for(const Sample& sample, const std::string& split) const {
        if (cfg_.label_source == "heuristic") {
            std::vector<PhqItem> labels(sample.dialogue.size(), PhqItem::NONE);
            for (std::size_t i = 0; i < sample.dialogue.size(); ++i)
                if (sample.dialogue[i].speaker == Speaker::Participant)
                    labels[i] = heuristic_label(sample.dialogue[i]);
            return labels;
        }
        if (cfg_.label_source == "labels_dir") {
            const std::filesystem::path file =
                std::filesystem::path(cfg_.labels_dir) / split / sample.id / "labels.json";
            std::ifstream in(file);
            if (!in) throw ConfigError("labels file missing: " + file.string());
            nlohmann::json j;
            in >> j;
            std::vector<PhqItem> labels;
            for (const auto& code : j.at("labels")) {
                const auto item = item_from_code(code.get<std::string>());
                if (!item) throw ParseError("bad item code in " + file.string());
                labels.push_back(*item);
            }
            if (labels.size() != sample.dialogue.size())
                throw ValidationError("labels length mismatch for sample " + sample.id);
            return labels;
        }
        if (!sample.truth.utterance_items)
            throw ConfigError("sample " + sample.id + " has no truth labels");
        return *sample.truth.utterance_items;
    }

    SummaryTokens gold_summary_tokens(const Sample& sample) const {
        SummaryTokens t;
        t.ids = vocab_.encode(split_ws(sample.truth.summary.rendered_text));
        t.ids.push_back(Vocab::kEos);
        return t;
    }

    struct StepGraph {
        ad::Graph graph;
        nn::NodeId ic = -1, ss = -1, sp = -1, total = -1;
    };

    // The full combined-objective graph for one sample: serialize, encode,
    // both text losses, teacher-forced fusion, severity loss, weighted sum.
    StepGraph build_step_graph(const Sample& sample, const std::vector<PhqItem>& labels,
                               bool grad = true) {
        const SerializedInput in =
            serialize_input(sample.dialogue, labels, vocab_, cfg_.backend.max_input_tokens);
        std::vector<PhqItem> kept(labels.begin() + static_cast<long>(in.dropped_utterances),
                                  labels.end());
        kept.resize(in.utterance_spans.size(), PhqItem::NONE);
        const SummaryTokens target = gold_summary_tokens(sample);
        // Teacher forcing: the gold summary text feeds fusion during training.
        const std::vector<int> summary_ids =
            FusionModel::summary_tokens(sample.truth.summary.rendered_text, vocab_);
        Mat acoustic, visual;
        const Mat* ap = nullptr;
        const Mat* vp = nullptr;
        if (cfg_.fusion.use_audio) {
            if (!sample.acoustic) throw ConfigError("sample " + sample.id + " lacks audio");
            acoustic = clip_frames(sample.acoustic->frames, clip_.max_acoustic);
            ap = &acoustic;
        }
        if (cfg_.fusion.use_vision) {
            if (!sample.visual) throw ConfigError("sample " + sample.id + " lacks vision");
            visual = clip_frames(sample.visual->frames, clip_.max_visual);
            vp = &visual;
        }

        StepGraph sg{ad::Graph(&store_, grad)};
        ad::Graph& g = sg.graph;
        const auto enc = summ_->encode_node(g, in.tokens);
        sg.ic = summ_->ic_nll_node(g, enc, in.utterance_spans, kept);
        sg.ss = summ_->ss_nll_node(g, enc, target);
        const auto sp_lp = fus_->severity_logprobs_node(g, summary_ids, ap, vp);
        sg.sp = g.pick_nll(sp_lp, {sample.truth.severity});
        sg.total = g.add_scaled({{sg.ic, cfg_.loss_weights.alpha},
                                 {sg.ss, cfg_.loss_weights.beta},
                                 {sg.sp, cfg_.loss_weights.gamma}});
        return sg;
    }

    // One combined-objective training step on one sample (batch size 1).
    StepRecord train_step(const Sample& sample, const std::vector<PhqItem>& labels,
                          ad::AdamW& opt) {
        StepGraph sg = build_step_graph(sample, labels);
        StepRecord rec;
        rec.l_ic = sg.graph.scalar(sg.ic);
        rec.l_ss = sg.graph.scalar(sg.ss);
        rec.l_sp = sg.graph.scalar(sg.sp);
        rec.total = total_loss(rec.l_ic, rec.l_ss, rec.l_sp, cfg_.loss_weights);  // NaN gate
        store_.zero_grads();
        sg.graph.backward(sg.total);
        opt.step(store_);
        return rec;
    }

    // Generated summary, scored text metrics, and fused severity per sample.
    EvalResult evaluate(const std::vector<Sample>& split, const std::string& split_name,
                        const EmbeddingBackend& backend) {
        if (split.empty()) throw ValidationError("evaluate: empty split");
        EvalResult result;
        result.split = split_name;
        GenerationScores sums;
        std::vector<SeverityLevel> pred, gold;
        for (const Sample& sample : split) {
            const std::vector<PhqItem> labels = labels_for(sample, split_name);
            const SerializedInput in =
                serialize_input(sample.dialogue, labels, vocab_, cfg_.backend.max_input_tokens);
            const EncoderStates states = summ_->encode(in);
            const SummaryTokens generated = summ_->generate_summary(states);
            const std::string hyp = vocab_.decode(generated.ids);

            const GenerationScores g = score_generation_references(sample, hyp, backend);
            sums.rouge1 += g.rouge1;
            sums.rouge2 += g.rouge2;
            sums.rougeL += g.rougeL;
            sums.bleu += g.bleu;
            sums.embed_score += g.embed_score;

            std::vector<int> summary_ids = generated.ids;
            summary_ids.erase(std::remove_if(summary_ids.begin(), summary_ids.end(),
                                             [](int id) {
                                                 return id == Vocab::kBos || id == Vocab::kEos;
                                             }),
                              summary_ids.end());
            if (summary_ids.empty()) summary_ids.push_back(Vocab::kEos);

            Mat acoustic, visual;
            const Mat* ap = nullptr;
            const Mat* vp = nullptr;
            if (cfg_.fusion.use_audio) {
                if (sample.acoustic) {
                    acoustic = clip_frames(sample.acoustic->frames, clip_.max_acoustic);
                    ap = &acoustic;
                } else {
                    result.modality_fallback = true;
                    result.notes.push_back(sample.id + ": acoustic missing, zero-substituted");
                }
            }
            if (cfg_.fusion.use_vision) {
                if (sample.visual) {
                    visual = clip_frames(sample.visual->frames, clip_.max_visual);
                    vp = &visual;
                } else {
                    result.modality_fallback = true;
                    result.notes.push_back(sample.id + ": visual missing, zero-substituted");
                }
            }
            const SeverityDistribution dist =
                fus_->predict_severity_for(summary_ids, ap, vp, /*allow_missing=*/true);
            pred.emplace_back(SeverityLevel(dist.argmax()));
            gold.emplace_back(SeverityLevel(sample.truth.severity));
        }
        const double n = static_cast<double>(split.size());
        result.generation = {sums.rouge1 / n, sums.rouge2 / n, sums.rougeL / n, sums.bleu / n,
                             sums.embed_score / n};
        result.binary = classification_scores(pred, gold, ClassificationMode::Binary);
        result.per_class = classification_scores(pred, gold, ClassificationMode::PerClass);
        return result;
    }

    void save(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        vocab_.save(dir / "vocab.txt");
        nlohmann::json j;
        j["version"] = 1;
        j["backend"] = backend_to_json(cfg_.backend);
        j["fusion"] = fusion_to_json(cfg_.fusion);
        j["loss_weights"] = {{"alpha", cfg_.loss_weights.alpha},
                             {"beta", cfg_.loss_weights.beta},
                             {"gamma", cfg_.loss_weights.gamma}};
        j["clip"] = {{"max_acoustic", clip_.max_acoustic}, {"max_visual", clip_.max_visual}};
        j["label_source"] = cfg_.label_source;
        j["ablation"] = ablation_tags_;
        nlohmann::json params = nlohmann::json::object();
        for (const auto& p : store_.all()) {
            nlohmann::json entry;
            entry["rows"] = p.value.rows();
            entry["cols"] = p.value.cols();
            std::vector<double> data(p.value.data(), p.value.data() + p.value.size());
            entry["data"] = data;
            params[p.name] = std::move(entry);
        }
        j["params"] = std::move(params);
        std::ofstream out(dir / "checkpoint.json");
        if (!out) throw Error("cannot write checkpoint in " + dir.string());
        out << j.dump() << '\n';
    }

    static std::unique_ptr<Pipeline> load(const std::filesystem::path& dir) {
        std::ifstream in(dir / "checkpoint.json");
        if (!in) throw Error("cannot open checkpoint: " + (dir / "checkpoint.json").string());
        nlohmann::json j;
        in >> j;
        if (j.value("version", 0) != 1) throw ParseError("checkpoint: unsupported version");

        auto p = std::unique_ptr<Pipeline>(new Pipeline());
        p->vocab_ = Vocab::load(dir / "vocab.txt");
        p->cfg_.backend = backend_from_json(j.at("backend"));
        p->cfg_.fusion = fusion_from_json(j.at("fusion"));
        const auto& w = j.at("loss_weights");
        p->cfg_.loss_weights = {w.at("alpha"), w.at("beta"), w.at("gamma")};
        p->clip_.max_acoustic = j.at("clip").at("max_acoustic").get<Eigen::Index>();
        p->clip_.max_visual = j.at("clip").at("max_visual").get<Eigen::Index>();
        p->cfg_.label_source = j.value("label_source", "truth");
        for (const auto& tag : j.value("ablation", nlohmann::json::array()))
            p->ablation_tags_.push_back(tag.get<std::string>());

        Rng rng(0);  // parameter values are overwritten below
        p->summ_ = std::make_unique<SummarizerModel>(p->store_, p->cfg_.backend, rng);
        p->fus_ = std::make_unique<FusionModel>(p->store_, p->cfg_.fusion, rng);

        const auto& params = j.at("params");
        for (auto& param : p->store_.all()) {
            if (!params.contains(param.name))
                throw ParseError("checkpoint: missing parameter " + param.name);
            const auto& entry = params.at(param.name);
            const Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
            const Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
            if (rows != param.value.rows() || cols != param.value.cols())
                throw ParseError("checkpoint: shape mismatch for " + param.name);
            const auto data = entry.at("data").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(data.size()) != rows * cols)
                throw ParseError("checkpoint: data size mismatch for " + param.name);
            std::copy(data.begin(), data.end(), param.value.data());
        }
        return p;
    }

private:
    Pipeline() = default;

    GenerationScores score_generation_references(const Sample& sample, const std::string& hyp,
                                                 const EmbeddingBackend& backend) const {
        // Per-sample best over the available references (one on the
        // synthetic corpus, several when a split carries multiple
        // annotations).
        GenerationScores best;
        const std::vector<std::string> refs = {sample.truth.summary.rendered_text};
        for (const std::string& ref : refs) {
            best.rouge1 = std::max(best.rouge1, rouge_n(ref, hyp, 1));
            best.rouge2 = std::max(best.rouge2, rouge_n(ref, hyp, 2));
            best.rougeL = std::max(best.rougeL, rouge_l(ref, hyp));
            best.bleu = std::max(best.bleu, bleu(ref, hyp));
            best.embed_score = std::max(best.embed_score, embed_score(ref, hyp, backend));
        }
        return best;
    }

    RunConfig cfg_;
    Vocab vocab_;
    ad::ParamStore store_;
    std::unique_ptr<SummarizerModel> summ_;
    std::unique_ptr<FusionModel> fus_;
    ClipPolicy clip_;
    std::vector<std::string> ablation_tags_;
};

struct TrainOutput {
    std::unique_ptr<Pipeline> pipeline;
    RunReport report;
};

// Combined-objective training over the train split, batch size 1, with
// deterministic per-epoch shuffling. On a NaN loss the checkpoint of the
// last finite step is saved before the error propagates.
inline TrainOutput train(const Corpus& corpus, const RunConfig& cfg) {
    cfg.validate();
    if (corpus.train.empty()) throw ValidationError("train: empty train split");

    TrainOutput out;
    out.pipeline = Pipeline::create(corpus, cfg);
    out.report.config_echo = run_config_to_json(cfg);

    ad::AdamW opt;
    opt.lr = cfg.optimizer.lr;
    opt.beta1 = cfg.optimizer.beta1;
    opt.beta2 = cfg.optimizer.beta2;
    opt.eps = cfg.optimizer.eps;
    opt.weight_decay = cfg.optimizer.weight_decay;

    std::ofstream metrics_log;
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        metrics_log.open(std::filesystem::path(cfg.out_dir) / "metrics.jsonl");
    }

    const HashedEmbeddingBackend embed_backend;
    Rng shuffle_rng(cfg.seed ^ 0x7a11ab1e5eedull);
    long step = 0;
    bool stop = false;
    for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
        std::vector<std::size_t> order(corpus.train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle_rng.shuffle(order);
        double epoch_total = 0.0;
        long epoch_steps = 0;
        for (std::size_t idx : order) {
            const Sample& sample = corpus.train[idx];
            const std::vector<PhqItem> labels = out.pipeline->labels_for(sample, "train");
            StepRecord rec;
            try {
                rec = out.pipeline->train_step(sample, labels, opt);
            } catch (const TrainingError&) {
                if (!cfg.out_dir.empty())
                    out.pipeline->save(std::filesystem::path(cfg.out_dir) /
                                       "checkpoint_last_finite");
                throw;
            }
            rec.step = ++step;
            epoch_total += rec.total;
            ++epoch_steps;
            if (metrics_log.is_open()) {
                nlohmann::json row = {{"step", rec.step},
                                      {"l_ic", rec.l_ic},
                                      {"l_ss", rec.l_ss},
                                      {"l_sp", rec.l_sp},
                                      {"total", rec.total}};
                metrics_log << row.dump() << '\n';
            }
            out.report.steps.push_back(rec);
            if (cfg.max_steps > 0 && step >= cfg.max_steps) {
                stop = true;
                break;
            }
        }
        if (epoch_steps > 0)
            out.report.epoch_mean_total.push_back(epoch_total / static_cast<double>(epoch_steps));
        const bool last_epoch = epoch + 1 == cfg.epochs || stop;
        if (!corpus.dev.empty() && ((epoch + 1) % cfg.eval_every_epochs == 0 || last_epoch))
            out.report.eval_points.emplace_back(
                epoch + 1, out.pipeline->evaluate(corpus.dev, "dev", embed_backend));
    }

    if (!corpus.dev.empty())
        out.report.final_dev = out.report.eval_points.empty()
                                   ? out.pipeline->evaluate(corpus.dev, "dev", embed_backend)
                                   : out.report.eval_points.back().second;
    if (!corpus.test.empty())
        out.report.final_test = out.pipeline->evaluate(corpus.test, "test", embed_backend);
    out.report.ablation_tags = out.pipeline->ablation_tags();

    if (!cfg.out_dir.empty()) {
        out.pipeline->save(std::filesystem::path(cfg.out_dir) / "checkpoint");
        std::ofstream report_file(std::filesystem::path(cfg.out_dir) / "report.json");
        report_file << report_to_json(out.report).dump(2) << '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

enum class AblationTarget { Audio, Vision, Ic };

inline AblationTarget ablation_target_from_name(std::string_view name) {
    const std::string n = to_lower(name);
    if (n == "audio") return AblationTarget::Audio;
    if (n == "vision") return AblationTarget::Vision;
    if (n == "ic") return AblationTarget::Ic;
    throw std::invalid_argument("unknown ablation target '" + std::string(name) +
                                "' (expected audio, vision, or ic)");
}

// Dropped modalities disappear structurally; dropping IC forces alpha to 0.
inline TrainOutput ablate(const Corpus& corpus, RunConfig cfg,
                          const std::set<AblationTarget>& drop) {
    if (drop.empty()) throw std::invalid_argument("ablate: drop set must be non-empty");
    std::vector<std::string> tags;
    for (AblationTarget t : drop) {
        switch (t) {
            case AblationTarget::Audio:
                cfg.fusion.use_audio = false;
                tags.push_back("audio");
                break;
            case AblationTarget::Vision:
                cfg.fusion.use_vision = false;
                tags.push_back("vision");
                break;
            case AblationTarget::Ic:
                cfg.loss_weights.alpha = 0.0;
                tags.push_back("ic");
                break;
        }
    }
    if (cfg.loss_weights.alpha == 0 && cfg.loss_weights.beta == 0 && cfg.loss_weights.gamma == 0)
        throw std::invalid_argument("ablate: every objective dropped");
    TrainOutput out = train(corpus, cfg);
    out.pipeline->ablation_tags() = tags;
    out.report.ablation_tags = tags;
    return out;
}

// ---------------------------------------------------------------------------
// Rendered tables
// ---------------------------------------------------------------------------

inline std::string render_eval_table(const nlohmann::json& eval, const std::string& label) {
    std::ostringstream os;
    const auto& g = eval.at("generation");
    const auto& s = eval.at("severity");
    os << label << " (" << eval.value("split", "?") << ")\n";
    os << "  Rouge-1  Rouge-2  Rouge-L     BLEU  EmbedScore";
    const bool dev_style = eval.value("split", "") == "dev";
    if (dev_style) os << " |      Dep      Con    Macro\n";
    else os << " | Precision   Recall    Macro\n";
    auto cell = [&os](double v) { os << std::setw(9) << std::fixed << std::setprecision(2) << v; };
    cell(g.at("rouge1"));
    cell(g.at("rouge2"));
    cell(g.at("rougeL"));
    cell(g.at("bleu"));
    os << std::setw(11) << std::fixed << std::setprecision(2) << g.at("embed_score").get<double>();
    os << " |";
    if (dev_style) {
        cell(s.at("Dep"));
        cell(s.at("Con"));
    } else {
        cell(s.at("Precision"));
        cell(s.at("Recall"));
    }
    cell(s.at("Macro"));
    os << "\n";
    return os.str();
}

inline std::string render_report(const nlohmann::json& report) {
    std::ostringstream os;
    if (report.contains("ablation") && !report.at("ablation").empty()) {
        os << "ablation:";
        for (const auto& t : report.at("ablation")) os << " -" << t.get<std::string>();
        os << "\n";
    }
    if (report.contains("final")) {
        if (report.at("final").contains("dev"))
            os << render_eval_table(report.at("final").at("dev"), "final");
        if (report.at("final").contains("test"))
            os << render_eval_table(report.at("final").at("test"), "final");
    }
    // a phqcot-run report renders as a single row
    if (report.contains("strategy")) {
        os << "client " << report.value("client", "?") << ", strategy "
           << report.value("strategy", "?") << ", shots " << report.value("shots", 0)
           << (report.value("valid", true) ? "" : "  [INVALID RUN: >20% failures]") << "\n";
        os << render_eval_table(report, "training-free");
    }
    return os.str();
}

inline nlohmann::json phqcot_report_to_json(const PhqCotReport& r) {
    nlohmann::json j;
    j["client"] = r.client;
    j["strategy"] = r.strategy;
    j["shots"] = r.shots;
    j["split"] = "test";
    j["total"] = r.total;
    j["failed"] = r.failed;
    j["valid"] = r.valid;
    j["generation"] = generation_to_json(r.generation);
    j["severity"] = {{"Precision", table_value(r.classification.precision)},
                     {"Recall", table_value(r.classification.recall)},
                     {"Dep", table_value(r.classification.per_class_f1.count(1)
                                             ? r.classification.per_class_f1.at(1)
                                             : 0.0)},
                     {"Con", table_value(r.classification.per_class_f1.count(0)
                                             ? r.classification.per_class_f1.at(0)
                                             : 0.0)},
                     {"Macro", table_value(r.classification.macro_f1)}};
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : r.samples) {
        nlohmann::json row = {{"id", s.id}, {"ok", s.ok}};
        if (s.ok) {
            row["pred_severity"] = s.predicted_severity;
            row["gold_severity"] = s.gold_severity;
            row["rouge1"] = table_value(s.generation.rouge1);
            row["discrepancy"] = s.discrepancy;
        } else {
            row["error"] = s.error;
        }
        rows.push_back(row);
    }
    j["samples"] = rows;
    return j;
}

}  // namespace phqmml
