#pragma once

// Per-utterance PHQ-8 item labeling. Clients are prompted to quote dialogue
// passages per item; quotes are located in the rendered dialogue, projected
// onto utterances by character overlap, and the per-utterance label is the
// strict majority across clients. Ties and interviewer turns resolve to
// NONE. A deterministic lexicon heuristic doubles as the offline client.

#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "phqmml/common.hpp"
#include "phqmml/corpus.hpp"
#include "phqmml/llm.hpp"
#include "phqmml/phq.hpp"

namespace phqmml {

struct ItemLabelSequence {
    std::vector<PhqItem> labels;  // one per utterance
};

// Keyword lexicon per item, probed in PHQ order; substring match on the
// lowercased text. First hit wins.
inline const std::vector<std::string>& item_lexicon(PhqItem item) {
    static const std::map<PhqItem, std::vector<std::string>> table = {
        {PhqItem::LOI, {"interest", "pleasure", "enjoy", "hobbies"}},
        {PhqItem::FD, {"depressed", "hopeless", "miserable", "feeling down"}},
        {PhqItem::SD, {"sleep", "insomnia", "doze"}},
        {PhqItem::LOE, {"tired", "energy", "exhausted", "fatigue"}},
        {PhqItem::AC, {"appetite", "eating", "overeat", "meals"}},
        {PhqItem::LSE, {"failure", "worthless", "bad about myself"}},
        {PhqItem::CP, {"concentrate", "focus", "distracted"}},
        {PhqItem::PC, {"restless", "fidgety", "sluggish", "slowed"}},
    };
    static const std::vector<std::string> empty;
    auto it = table.find(item);
    return it == table.end() ? empty : it->second;
}

inline PhqItem heuristic_label(const Utterance& utterance) {
    const std::string text = to_lower(utterance.text);
    for (PhqItem item : kPhqItems)
        for (const std::string& keyword : item_lexicon(item))
            if (text.find(keyword) != std::string::npos) return item;
    return PhqItem::NONE;
}

// ---------------------------------------------------------------------------
// Span protocol
// ---------------------------------------------------------------------------

// The dialogue is rendered one utterance per line as "SPEAKER: text".
// Clients answer with lines of the form
//   SPAN ITEM=<CODE> TEXT="<verbatim quote from the rendering>"
// and anything else is ignored.

struct DialogueRendering {
    std::string text;
    std::vector<std::pair<std::size_t, std::size_t>> utterance_chars;  // [begin, end)
};

inline DialogueRendering render_dialogue_for_labeling(const std::vector<Utterance>& dialogue) {
    DialogueRendering out;
    for (const Utterance& u : dialogue) {
        const std::size_t begin = out.text.size();
        out.text += u.speaker == Speaker::Interviewer ? "INTERVIEWER: " : "PARTICIPANT: ";
        out.text += u.text;
        out.utterance_chars.emplace_back(begin, out.text.size());
        out.text += '\n';
    }
    return out;
}

inline std::string labeling_prompt(const std::vector<Utterance>& dialogue) {
    std::string prompt =
        "Read the clinical interview below. For each PHQ-8 item, quote every passage of the "
        "dialogue where the participant speaks about that symptom.\n\nItems:\n";
    for (PhqItem it : kPhqItems) {
        prompt += std::string(item_code(it)) + " (" + item_name(it) + "): " +
                  item_description(it) + "\n";
    }
    prompt +=
        "\nAnswer with one line per passage, exactly in the form\n"
        "SPAN ITEM=<CODE> TEXT=\"<verbatim quote>\"\n"
        "and nothing else.\n\nDialogue:\n";
    prompt += render_dialogue_for_labeling(dialogue).text;
    return prompt;
}

struct LabeledSpan {
    PhqItem item = PhqItem::NONE;
    std::size_t begin = 0;
    std::size_t end = 0;
};

// Locates the quoted spans from one client response in the rendering.
// Quotes that do not occur verbatim are dropped.
inline std::vector<LabeledSpan> parse_span_response(const std::string& response,
                                                    const DialogueRendering& rendering) {
    std::vector<LabeledSpan> spans;
    for (const std::string& raw_line : split_char(response, '\n')) {
        const std::string line = trim(raw_line);
        if (!starts_with(line, "SPAN ITEM=")) continue;
        const std::size_t code_begin = std::string("SPAN ITEM=").size();
        const std::size_t code_end = line.find(' ', code_begin);
        if (code_end == std::string::npos) continue;
        const auto item = item_from_code(line.substr(code_begin, code_end - code_begin));
        if (!item || *item == PhqItem::NONE) continue;
        const std::size_t q1 = line.find('"', code_end);
        const std::size_t q2 = line.rfind('"');
        if (q1 == std::string::npos || q2 <= q1) continue;
        const std::string quote = line.substr(q1 + 1, q2 - q1 - 1);
        if (quote.empty()) continue;
        const std::size_t pos = rendering.text.find(quote);
        if (pos == std::string::npos) continue;
        spans.push_back({*item, pos, pos + quote.size()});
    }
    return spans;
}

// Projects character spans onto utterances: an utterance inherits an item if
// any of its characters lies inside a span; several items on one utterance
// resolve by longest total overlap, ties by PHQ item order.
inline std::vector<PhqItem> project_spans(const std::vector<LabeledSpan>& spans,
                                          const DialogueRendering& rendering) {
    std::vector<PhqItem> labels(rendering.utterance_chars.size(), PhqItem::NONE);
    for (std::size_t u = 0; u < rendering.utterance_chars.size(); ++u) {
        const auto [ub, ue] = rendering.utterance_chars[u];
        std::map<PhqItem, std::size_t> overlap;
        for (const LabeledSpan& s : spans) {
            const std::size_t lo = std::max(ub, s.begin);
            const std::size_t hi = std::min(ue, s.end);
            if (lo < hi) overlap[s.item] += hi - lo;
        }
        std::size_t best = 0;
        for (PhqItem item : kPhqItems) {
            auto it = overlap.find(item);
            if (it != overlap.end() && it->second > best) {
                best = it->second;
                labels[u] = item;
            }
        }
    }
    return labels;
}

// ---------------------------------------------------------------------------
// Clients and voting
// ---------------------------------------------------------------------------

// Offline labeler: emits a span for every participant utterance whose text
// hits an item lexicon.
class HeuristicLabelClient : public LlmClient {
public:
    explicit HeuristicLabelClient(std::string name = "mock-lexicon") : name_(std::move(name)) {}

    std::string name() const override { return name_; }

    std::string invoke(const std::string& prompt) override {
        // Recover the dialogue lines from the prompt rendering.
        const std::size_t pos = prompt.find("Dialogue:\n");
        if (pos == std::string::npos) throw Error(name_ + ": prompt has no dialogue section");
        std::string out;
        for (const std::string& line : split_char(prompt.substr(pos + 10), '\n')) {
            if (!starts_with(line, "PARTICIPANT: ")) continue;
            Utterance u;
            u.text = line.substr(std::string("PARTICIPANT: ").size());
            const PhqItem item = heuristic_label(u);
            if (item != PhqItem::NONE)
                out += "SPAN ITEM=" + std::string(item_code(item)) + " TEXT=\"" + line + "\"\n";
        }
        return out;
    }

private:
    std::string name_;
};

struct LabelAuditEntry {
    std::string client;
    std::string sample_id;
    std::string prompt_hash;
    std::string response;
};

inline ItemLabelSequence label_utterances(const Sample& sample,
                                          const std::vector<std::shared_ptr<LlmClient>>& clients,
                                          std::vector<LabelAuditEntry>* audit = nullptr) {
    if (clients.empty()) throw ValidationError("label_utterances: need at least one client");
    if (sample.dialogue.empty()) throw ValidationError("label_utterances: empty dialogue");

    const DialogueRendering rendering = render_dialogue_for_labeling(sample.dialogue);
    const std::string prompt = labeling_prompt(sample.dialogue);

    std::vector<std::vector<PhqItem>> votes;
    std::vector<std::string> failures;
    for (const auto& client : clients) {
        try {
            const std::string response = invoke_with_retries(*client, prompt);
            if (audit)
                audit->push_back({client->name(), sample.id, fnv1a64_hex(prompt), response});
            votes.push_back(project_spans(parse_span_response(response, rendering), rendering));
        } catch (const std::exception& e) {
            failures.push_back(e.what());
        }
    }
    if (votes.empty()) {
        std::string causes;
        for (const std::string& f : failures) causes += "\n  " + f;
        throw Error("label_utterances: all clients failed:" + causes);
    }

    ItemLabelSequence out;
    out.labels.resize(sample.dialogue.size(), PhqItem::NONE);
    for (std::size_t u = 0; u < sample.dialogue.size(); ++u) {
        if (sample.dialogue[u].speaker == Speaker::Interviewer) continue;  // forced NONE
        std::map<PhqItem, std::size_t> counts;
        for (const auto& v : votes) ++counts[v[u]];
        for (const auto& [item, count] : counts) {
            if (item == PhqItem::NONE) continue;
            if (2 * count > votes.size()) {  // strict majority
                out.labels[u] = item;
                break;
            }
        }
    }
    return out;
}

inline void write_label_audit(const std::vector<LabelAuditEntry>& audit,
                              const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write audit log: " + path.string());
    for (const LabelAuditEntry& e : audit) {
        nlohmann::json j;
        j["client"] = e.client;
        j["sample"] = e.sample_id;
        j["prompt_fnv1a"] = e.prompt_hash;
        j["response"] = e.response;
        out << j.dump() << '\n';
    }
}

}  // namespace phqmml
