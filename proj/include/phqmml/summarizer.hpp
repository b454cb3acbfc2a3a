#pragma once

// Text core: word-level vocabulary, dialogue serialization with inline item
// tags, a small trainable encoder-decoder with an auxiliary per-utterance
// item classification head, the two text losses, and greedy/beam decoding.

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "phqmml/corpus.hpp"
#include "phqmml/labeling.hpp"
#include "phqmml/nn.hpp"

namespace phqmml {

enum class DecodeMode { Greedy, Beam };

struct BackendConfig {
    int vocab_size = 0;
    int hidden = 64;
    int layers = 2;
    int heads = 4;
    int ffn_mult = 4;
    int max_input_tokens = 512;
    int max_output_tokens = 160;
    DecodeMode decode = DecodeMode::Greedy;
    int beam_width = 4;

    void validate() const {
        if (vocab_size <= 0 || hidden <= 0 || layers <= 0 || heads <= 0)
            throw ConfigError("backend config: dimensions must be positive");
        if (hidden % heads != 0) throw ConfigError("backend config: heads must divide hidden");
        if (max_input_tokens <= 0 || max_input_tokens > 6000)
            throw ConfigError("backend config: max_input_tokens must be in 1..6000");
        if (max_output_tokens <= 0) throw ConfigError("backend config: bad max_output_tokens");
        if (decode == DecodeMode::Beam && beam_width < 1)
            throw ConfigError("backend config: beam width must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

class Vocab {
public:
    static constexpr int kUnk = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;

    Vocab() {
        add("<unk>");
        add("<bos>");
        add("<eos>");
    }

    int add(const std::string& token) {
        auto it = index_.find(token);
        if (it != index_.end()) return it->second;
        const int id = static_cast<int>(tokens_.size());
        index_[token] = id;
        tokens_.push_back(token);
        return id;
    }

    int id(const std::string& token) const {
        auto it = index_.find(token);
        return it == index_.end() ? kUnk : it->second;
    }

    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    int size() const { return static_cast<int>(tokens_.size()); }

    std::vector<int> encode(const std::vector<std::string>& toks) const {
        std::vector<int> out;
        out.reserve(toks.size());
        for (const std::string& t : toks) out.push_back(id(t));
        return out;
    }

    std::string decode(const std::vector<int>& ids) const {
        std::string out;
        for (int i : ids) {
            if (i == kBos || i == kEos) continue;
            if (!out.empty()) out += ' ';
            out += token(i);
        }
        return out;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw Error("cannot write vocab: " + path.string());
        for (const std::string& t : tokens_) out << t << '\n';
    }

    static Vocab load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot read vocab: " + path.string());
        Vocab v;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            if (line_no < 3) {
                // header rows must be the reserved specials in fixed order
                if (line != v.token(line_no))
                    throw ParseError("vocab file: reserved token mismatch at line " +
                                     std::to_string(line_no + 1));
            } else {
                v.add(line);
            }
            ++line_no;
        }
        if (line_no < 3) throw ParseError("vocab file: missing reserved tokens");
        return v;
    }

private:
    std::vector<std::string> tokens_;
    std::map<std::string, int> index_;
};

inline std::string speaker_mark(Speaker s) {
    return s == Speaker::Interviewer ? "INTERVIEWER:" : "PARTICIPANT:";
}

inline std::string item_tag(PhqItem item) {
    return "[ITEM=" + std::string(item_code(item)) + "]";
}

// One utterance renders as  SPEAKER: text tokens [ITEM=code]
inline std::vector<std::vector<std::string>> serialize_utterances(
    const std::vector<Utterance>& dialogue, const std::vector<PhqItem>& labels) {
    if (dialogue.empty()) throw std::invalid_argument("serialize_utterances: empty dialogue");
    if (labels.size() != dialogue.size())
        throw std::invalid_argument("serialize_utterances: labels length mismatch");
    std::vector<std::vector<std::string>> out;
    for (std::size_t i = 0; i < dialogue.size(); ++i) {
        std::vector<std::string> toks;
        toks.push_back(speaker_mark(dialogue[i].speaker));
        for (std::string& w : split_ws(dialogue[i].text)) toks.push_back(std::move(w));
        toks.push_back(item_tag(labels[i]));
        out.push_back(std::move(toks));
    }
    return out;
}

struct SerializedInput {
    std::vector<int> tokens;
    std::vector<std::pair<int, int>> utterance_spans;  // [begin, end) into tokens
    std::size_t dropped_utterances = 0;                // dropped from the front
};

// Tokenizes the dialogue and drops whole utterances from the front until the
// budget fits. A single over-long utterance is tail-truncated as a last
// resort.
inline SerializedInput serialize_input(const std::vector<Utterance>& dialogue,
                                       const std::vector<PhqItem>& labels, const Vocab& vocab,
                                       int max_input_tokens) {
    const auto per_utterance = serialize_utterances(dialogue, labels);
    std::size_t first = 0;
    std::size_t total = 0;
    for (const auto& u : per_utterance) total += u.size();
    while (first + 1 < per_utterance.size() &&
           total > static_cast<std::size_t>(max_input_tokens)) {
        total -= per_utterance[first].size();
        ++first;
    }
    SerializedInput out;
    out.dropped_utterances = first;
    for (std::size_t i = first; i < per_utterance.size(); ++i) {
        const int begin = static_cast<int>(out.tokens.size());
        for (const std::string& t : per_utterance[i]) {
            if (out.tokens.size() >= static_cast<std::size_t>(max_input_tokens)) break;
            out.tokens.push_back(vocab.id(t));
        }
        const int end = static_cast<int>(out.tokens.size());
        if (end > begin) out.utterance_spans.emplace_back(begin, end);
    }
    return out;
}

// Vocabulary over the training split: serialized dialogue tokens (with the
// generator's labels when present) plus summary tokens, with every item tag
// and speaker mark reserved up front.
inline Vocab build_vocab(const Corpus& corpus) {
    Vocab v;
    v.add(speaker_mark(Speaker::Interviewer));
    v.add(speaker_mark(Speaker::Participant));
    v.add(item_tag(PhqItem::NONE));
    for (PhqItem it : kPhqItems) v.add(item_tag(it));
    std::set<std::string> words;
    for (const Sample& s : corpus.train) {
        std::vector<PhqItem> labels =
            s.truth.utterance_items ? *s.truth.utterance_items
                                    : std::vector<PhqItem>(s.dialogue.size(), PhqItem::NONE);
        for (const auto& toks : serialize_utterances(s.dialogue, labels))
            for (const std::string& t : toks) words.insert(t);
        for (const std::string& t : split_ws(s.truth.summary.rendered_text)) words.insert(t);
    }
    for (const std::string& w : words) v.add(w);
    return v;
}

// ---------------------------------------------------------------------------
// Encoder states and the item classification head
// ---------------------------------------------------------------------------

struct EncoderStates {
    Mat token_states;                                  // tokens x hidden
    std::vector<std::pair<int, int>> utterance_spans;  // [begin, end)
};

struct ItemClassifierHead {
    Mat weight;  // hidden x 9
    Mat bias;    // 1 x 9
};

// Mean-pool each utterance span, apply the affine head, softmax-normalize.
inline Mat classify_items(const EncoderStates& states, const ItemClassifierHead& head) {
    if (head.weight.rows() != states.token_states.cols() || head.weight.cols() != kNumItemClasses)
        throw ValidationError("classify_items: head shape mismatch");
    Mat out(static_cast<Eigen::Index>(states.utterance_spans.size()), kNumItemClasses);
    for (std::size_t i = 0; i < states.utterance_spans.size(); ++i) {
        const auto [b, e] = states.utterance_spans[i];
        if (e <= b || b < 0 || e > states.token_states.rows())
            throw ValidationError("classify_items: empty or invalid span");
        const Mat pooled = states.token_states.middleRows(b, e - b).colwise().mean();
        Eigen::RowVectorXd logits = pooled * head.weight + head.bias.row(0);
        const double mx = logits.maxCoeff();
        Eigen::RowVectorXd ex = (logits.array() - mx).exp();
        out.row(static_cast<Eigen::Index>(i)) = ex / ex.sum();
    }
    return out;
}

// Summed negative log-likelihood over utterances; gold NONE is class 8.
inline double ic_loss(const Mat& probs, const std::vector<PhqItem>& gold) {
    if (static_cast<Eigen::Index>(gold.size()) != probs.rows())
        throw ValidationError("ic_loss: length mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const int cls = item_index(gold[i]);
        if (cls < 0 || cls >= kNumItemClasses) throw ValidationError("ic_loss: bad class id");
        total -= std::log(std::max(probs(static_cast<Eigen::Index>(i), cls), 1e-300));
    }
    return total;
}

struct SummaryTokens {
    std::vector<int> ids;  // ends with <eos>
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

class SummarizerModel {
public:
    SummarizerModel(ad::ParamStore& store, const BackendConfig& cfg, Rng& rng)
        : store_(&store), cfg_(cfg) {
        cfg_.validate();
        const Eigen::Index d = cfg_.hidden;
        const Eigen::Index inner = static_cast<Eigen::Index>(cfg_.ffn_mult) * d;
        embed_ = store.add("summ.embed", ad::normal_init(cfg_.vocab_size, d, 0.05, rng));
        for (int l = 0; l < cfg_.layers; ++l) {
            enc_layers_.emplace_back(store, rng, "summ.enc" + std::to_string(l), d, cfg_.heads,
                                     inner);
            dec_layers_.emplace_back(store, rng, "summ.dec" + std::to_string(l), d, cfg_.heads,
                                     inner);
        }
        enc_final_ = nn::LayerNorm(store, "summ.enc_final", d);
        dec_final_ = nn::LayerNorm(store, "summ.dec_final", d);
        out_proj_ = nn::Linear(store, rng, "summ.out", d, cfg_.vocab_size);
        ic_head_ = nn::Linear(store, rng, "summ.ic", d, kNumItemClasses);
    }

    const BackendConfig& config() const { return cfg_; }
    ad::ParamStore& store() const { return *store_; }

    // Graph route used by training and (with grads off) by the public ops.
    nn::NodeId encode_node(ad::Graph& g, const std::vector<int>& tokens) const {
        if (tokens.empty()) throw std::invalid_argument("encode: empty input");
        if (tokens.size() > static_cast<std::size_t>(cfg_.max_input_tokens))
            throw ValidationError("encode: input exceeds max_input_tokens");
        nn::NodeId x = embed_tokens(g, tokens);
        for (const auto& layer : enc_layers_) x = layer.apply(g, x);
        return enc_final_.apply(g, x);
    }

    EncoderStates encode(const SerializedInput& input) const {
        ad::Graph g(store_, /*grad=*/false);
        EncoderStates s;
        s.token_states = g.value(encode_node(g, input.tokens));
        s.utterance_spans = input.utterance_spans;
        return s;
    }

    ItemClassifierHead classifier_head() const {
        return {store_->at(ic_head_.w).value, store_->at(ic_head_.b).value};
    }

    // Summed NLL of the gold item over utterance spans.
    nn::NodeId ic_nll_node(ad::Graph& g, nn::NodeId enc,
                           const std::vector<std::pair<int, int>>& spans,
                           const std::vector<PhqItem>& gold) const {
        if (spans.size() != gold.size())
            throw ValidationError("ic_nll: spans and labels length mismatch");
        std::vector<nn::NodeId> pooled;
        std::vector<int> targets;
        for (std::size_t i = 0; i < spans.size(); ++i) {
            pooled.push_back(g.mean_rows(enc, spans[i].first, spans[i].second - spans[i].first));
            targets.push_back(item_index(gold[i]));
        }
        const nn::NodeId logits = ic_head_.apply(g, g.stack_rows(pooled));
        return g.pick_nll(g.log_softmax_rows(logits), targets);
    }

    // Teacher-forced log-probabilities over the target sequence.
    nn::NodeId decoder_logprobs_node(ad::Graph& g, nn::NodeId enc,
                                     const std::vector<int>& decoder_inputs) const {
        nn::NodeId x = embed_tokens(g, decoder_inputs);
        for (const auto& layer : dec_layers_) x = layer.apply(g, x, enc);
        x = dec_final_.apply(g, x);
        return g.log_softmax_rows(out_proj_.apply(g, x));
    }

    // Summed NLL of the target tokens given gold prefixes.
    nn::NodeId ss_nll_node(ad::Graph& g, nn::NodeId enc, const SummaryTokens& target) const {
        if (target.ids.empty()) throw ValidationError("ss_loss: empty target");
        for (int t : target.ids)
            if (t < 0 || t >= cfg_.vocab_size) throw ValidationError("ss_loss: token outside vocab");
        std::vector<int> inputs;
        inputs.push_back(Vocab::kBos);
        inputs.insert(inputs.end(), target.ids.begin(), target.ids.end() - 1);
        const nn::NodeId lp = decoder_logprobs_node(g, enc, inputs);
        return g.pick_nll(lp, target.ids);
    }

    double ss_loss(const SerializedInput& input, const SummaryTokens& target) const {
        ad::Graph g(store_, /*grad=*/false);
        return g.scalar(ss_nll_node(g, encode_node(g, input.tokens), target));
    }

    SummaryTokens generate_summary(const EncoderStates& states) const {
        return cfg_.decode == DecodeMode::Greedy ? decode_beam(states.token_states, 1)
                                                 : decode_beam(states.token_states, cfg_.beam_width);
    }

    SummaryTokens generate_greedy(const EncoderStates& states) const {
        return decode_beam(states.token_states, 1);
    }

private:
    nn::NodeId embed_tokens(ad::Graph& g, const std::vector<int>& tokens) const {
        const nn::NodeId e = g.lookup(g.param(embed_), tokens);
        const nn::NodeId scaled = g.scale(e, std::sqrt(static_cast<double>(cfg_.hidden)));
        return g.add(scaled, g.input(nn::sinusoidal_positions(
                                 static_cast<Eigen::Index>(tokens.size()), cfg_.hidden)));
    }

    struct Beam {
        std::vector<int> ids;
        double logp = 0.0;
        bool done = false;
    };

    SummaryTokens decode_beam(const Mat& memory, int width) const {
        ad::Graph g0(store_, false);
        const nn::NodeId mem_node = g0.input(memory);
        (void)mem_node;
        std::vector<Beam> beams = {{{}, 0.0, false}};
        for (int step = 0; step < cfg_.max_output_tokens; ++step) {
            std::vector<Beam> next;
            bool all_done = true;
            for (const Beam& beam : beams) {
                if (beam.done) {
                    next.push_back(beam);
                    continue;
                }
                all_done = false;
                std::vector<int> inputs;
                inputs.push_back(Vocab::kBos);
                inputs.insert(inputs.end(), beam.ids.begin(), beam.ids.end());
                ad::Graph g(store_, false);
                const nn::NodeId lp =
                    decoder_logprobs_node(g, g.input(memory), inputs);
                const Eigen::RowVectorXd row = g.value(lp).row(g.value(lp).rows() - 1);
                // Top `width` continuations of this beam.
                std::vector<int> order(static_cast<std::size_t>(row.size()));
                for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
                std::partial_sort(order.begin(), order.begin() + std::min<std::size_t>(width, order.size()),
                                  order.end(),
                                  [&row](int a, int b) { return row[a] > row[b]; });
                for (int k = 0; k < width && k < static_cast<int>(order.size()); ++k) {
                    Beam b = beam;
                    b.ids.push_back(order[static_cast<std::size_t>(k)]);
                    b.logp += row[order[static_cast<std::size_t>(k)]];
                    b.done = order[static_cast<std::size_t>(k)] == Vocab::kEos;
                    next.push_back(std::move(b));
                }
            }
            if (all_done) break;
            std::sort(next.begin(), next.end(),
                      [](const Beam& a, const Beam& b) { return a.logp > b.logp; });
            if (static_cast<int>(next.size()) > width) next.resize(static_cast<std::size_t>(width));
            beams = std::move(next);
        }
        Beam best = beams.front();
        for (const Beam& b : beams)
            if (b.logp > best.logp) best = b;
        if (best.ids.empty() || best.ids.back() != Vocab::kEos) best.ids.push_back(Vocab::kEos);
        return {best.ids};
    }

    ad::ParamStore* store_;
    BackendConfig cfg_;
    int embed_ = -1;
    std::vector<nn::EncoderLayer> enc_layers_;
    std::vector<nn::DecoderLayer> dec_layers_;
    nn::LayerNorm enc_final_, dec_final_;
    nn::Linear out_proj_, ic_head_;
};

}  // namespace phqmml
