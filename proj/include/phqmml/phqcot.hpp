#pragma once

// Training-free pipeline: Standard/CoT/PhqCoT prompt assembly with zero,
// two, or four-shot exemplars, response parsing into per-item scores with
// evidence, local severity conversion, and split-level evaluation against
// the metric suite. Responses can be cached on disk keyed by prompt hash
// and client name.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "phqmml/corpus.hpp"
#include "phqmml/llm.hpp"
#include "phqmml/metrics.hpp"
#include "phqmml/phq.hpp"

namespace phqmml {

enum class PromptStrategy { Standard, CoT, PhqCoT };

inline const char* strategy_name(PromptStrategy s) {
    switch (s) {
        case PromptStrategy::Standard: return "standard";
        case PromptStrategy::CoT: return "cot";
        case PromptStrategy::PhqCoT: return "phqcot";
    }
    return "standard";
}

inline std::optional<PromptStrategy> strategy_from_name(std::string_view name) {
    if (name == "standard") return PromptStrategy::Standard;
    if (name == "cot") return PromptStrategy::CoT;
    if (name == "phqcot") return PromptStrategy::PhqCoT;
    return std::nullopt;
}

// The scale-guided instruction appended by the PhqCoT strategy.
inline constexpr const char* kPhqCotInstruction =
    "It is crucial for the participant's depression diagnosis, so please score and find the "
    "corresponding explanatory content in the conversation for each of the PHQ-8 questionnaire "
    "items sequentially (scores range from 0 to 3) and then summarize.";

struct Exemplar {
    std::string dialogue_digest;
    std::string summary;
    int severity = 0;
};

struct PromptSpec {
    PromptStrategy strategy = PromptStrategy::Standard;
    int shots = 0;  // 0, 2 or 4
    std::vector<Exemplar> exemplars;

    void validate() const {
        if (shots != 0 && shots != 2 && shots != 4)
            throw ConfigError("prompt spec: shots must be 0, 2 or 4");
        if (static_cast<int>(exemplars.size()) != shots)
            throw ConfigError("prompt spec: exemplar count must equal shots");
        if (shots == 2) {
            const bool first_depressed = exemplars[0].severity >= 2;
            const bool second_depressed = exemplars[1].severity >= 2;
            if (first_depressed == second_depressed)
                throw ConfigError("prompt spec: two-shot needs one depressed and one normal");
        }
        if (shots == 4) {
            std::set<int> seen;
            for (const Exemplar& e : exemplars) seen.insert(e.severity);
            if (seen != std::set<int>{0, 1, 2, 3})
                throw ConfigError("prompt spec: four-shot must cover severities 0-3");
        }
    }
};

// Interviewer turns that do not open with a question word count as small
// talk (greetings, thanks, chatter) and drop first when a dialogue must
// shrink; digest level 2 drops every interviewer turn.
inline bool is_interviewer_small_talk(const Utterance& u) {
    if (u.speaker != Speaker::Interviewer) return false;
    const auto tokens = tokenize_lower(u.text);
    if (tokens.empty()) return true;
    static const std::set<std::string> question_words = {
        "how", "what", "have", "has", "do", "does", "did", "tell",
        "where", "when", "why", "is", "are", "can", "could", "would"};
    return question_words.count(tokens.front()) == 0;
}

inline std::string render_dialogue_text(const std::vector<Utterance>& dialogue,
                                        int digest_level = 0) {
    std::string out;
    for (const Utterance& u : dialogue) {
        if (u.speaker == Speaker::Interviewer) {
            if (digest_level >= 2) continue;
            if (digest_level == 1 && is_interviewer_small_talk(u)) continue;
        }
        out += u.speaker == Speaker::Interviewer ? "INTERVIEWER: " : "PARTICIPANT: ";
        out += u.text;
        out += '\n';
    }
    return out;
}

inline std::string answer_schema_text() {
    std::string out = "Answer exactly in this format:\n";
    for (PhqItem it : kPhqItems)
        out += "ITEM " + std::string(item_code(it)) + ": <score 0-3> | EVIDENCE: \"<quote>\"\n";
    out +=
        "SUMMARY:\n"
        "<structured symptom summary>\n"
        "TOTAL: <sum of the eight scores>\n"
        "SEVERITY: <0-3>\n";
    return out;
}

namespace detail {

inline std::string build_prompt_at(const Sample& sample, const PromptSpec& spec,
                                   int digest_level) {
    std::string prompt;
    for (std::size_t i = 0; i < spec.exemplars.size(); ++i) {
        const Exemplar& e = spec.exemplars[i];
        prompt += "Example interview " + std::to_string(i + 1) + ":\n" + e.dialogue_digest;
        prompt += "Example summary: " + e.summary + "\n";
        prompt += "Example severity: " + std::to_string(e.severity) + "\n\n";
    }
    prompt += "You are reviewing a clinical screening interview.\n";
    prompt += "Interview ID: " + sample.id + "\n\n";
    prompt +=
        "Task: summarize the participant's PHQ-8 symptoms and their possible underlying "
        "causes, then predict the participant's depression severity as an integer from 0 "
        "(none) to 3 (severe).\n";
    if (spec.strategy == PromptStrategy::CoT)
        prompt += "Think step by step about the dialogue before giving the final answer.\n";
    if (spec.strategy == PromptStrategy::PhqCoT) {
        prompt += std::string(kPhqCotInstruction) + "\n\nThe eight PHQ-8 items:\n";
        for (PhqItem it : kPhqItems)
            prompt += std::string(item_code(it)) + " (" + item_name(it) + "): " +
                      item_description(it) + "\n";
    }
    prompt += "\n" + answer_schema_text();
    prompt += "\nDialogue:\n" + render_dialogue_text(sample.dialogue, digest_level);
    return prompt;
}

}  // namespace detail

inline std::string build_prompt(const Sample& sample, const PromptSpec& spec,
                                std::size_t context_budget_chars = 1u << 20) {
    spec.validate();
    if (sample.dialogue.empty()) throw ValidationError("build_prompt: empty dialogue");
    for (int digest = 0; digest <= 1; ++digest) {
        std::string prompt = detail::build_prompt_at(sample, spec, digest);
        if (prompt.size() <= context_budget_chars) return prompt;
    }
    throw ValidationError("build_prompt: dialogue exceeds the client context budget even after "
                          "dropping interviewer small talk");
}

// Exemplars come from the training split by fixed id order: two-shot takes
// the first depressed and the first control sample, four-shot the first
// sample of each severity.
inline PromptSpec make_prompt_spec(const Corpus& corpus, PromptStrategy strategy, int shots) {
    PromptSpec spec;
    spec.strategy = strategy;
    spec.shots = shots;
    std::vector<const Sample*> ordered;
    for (const Sample& s : corpus.train) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const Sample* a, const Sample* b) { return a->id < b->id; });
    auto digest = [](const Sample& s) { return render_dialogue_text(s.dialogue, 2); };
    if (shots == 2) {
        const Sample* depressed = nullptr;
        const Sample* normal = nullptr;
        for (const Sample* s : ordered) {
            if (s->truth.severity >= 2 && !depressed) depressed = s;
            if (s->truth.severity < 2 && !normal) normal = s;
        }
        if (!depressed || !normal)
            throw ConfigError("make_prompt_spec: train split lacks both binary classes");
        spec.exemplars = {{digest(*depressed), depressed->truth.summary.rendered_text,
                           depressed->truth.severity},
                          {digest(*normal), normal->truth.summary.rendered_text,
                           normal->truth.severity}};
    } else if (shots == 4) {
        for (int sev = 0; sev <= 3; ++sev) {
            const Sample* pick = nullptr;
            for (const Sample* s : ordered)
                if (s->truth.severity == sev) {
                    pick = s;
                    break;
                }
            if (!pick)
                throw ConfigError("make_prompt_spec: train split lacks severity " +
                                  std::to_string(sev));
            spec.exemplars.push_back(
                {digest(*pick), pick->truth.summary.rendered_text, pick->truth.severity});
        }
    }
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// Response schema
// ---------------------------------------------------------------------------

struct PhqCotResponse {
    std::map<PhqItem, int> item_scores;                    // all eight items
    std::map<PhqItem, std::vector<std::string>> evidence;  // verbatim quotes
    std::string summary_text;
    int total = 0;
    SeverityLevel severity;
    std::optional<int> claimed_total;
    std::optional<int> claimed_severity;
    bool discrepancy = false;  // model's own claim disagreed with the local conversion
};

// The emitter the mocks use; parse_response inverts it.
inline std::string emit_response(const std::map<PhqItem, int>& scores,
                                 const std::map<PhqItem, std::vector<std::string>>& evidence,
                                 const std::string& summary,
                                 std::optional<int> claimed_total = std::nullopt,
                                 std::optional<int> claimed_severity = std::nullopt) {
    std::string out;
    for (PhqItem it : kPhqItems) {
        auto score_it = scores.find(it);
        const int score = score_it == scores.end() ? 0 : score_it->second;
        out += "ITEM " + std::string(item_code(it)) + ": " + std::to_string(score);
        auto ev_it = evidence.find(it);
        if (ev_it != evidence.end() && !ev_it->second.empty()) {
            out += " | EVIDENCE:";
            for (const std::string& quote : ev_it->second) out += " \"" + quote + "\"";
        }
        out += '\n';
    }
    out += "SUMMARY:\n" + summary + "\n";
    if (claimed_total) out += "TOTAL: " + std::to_string(*claimed_total) + "\n";
    if (claimed_severity) out += "SEVERITY: " + std::to_string(*claimed_severity) + "\n";
    return out;
}

inline PhqCotResponse parse_response(const std::string& raw) {
    if (trim(raw).empty()) throw ParseError("parse_response: empty response");
    PhqCotResponse out;
    std::vector<std::string> summary_lines;
    bool in_summary = false;
    for (const std::string& raw_line : split_char(raw, '\n')) {
        const std::string line = trim(raw_line);
        if (starts_with(line, "ITEM ")) {
            in_summary = false;
            const std::size_t colon = line.find(':');
            if (colon == std::string::npos)
                throw ParseError("parse_response: malformed item line: " + line);
            const auto item = item_from_code(trim(line.substr(5, colon - 5)));
            if (!item || *item == PhqItem::NONE)
                throw ParseError("parse_response: unknown item code in: " + line);
            std::string rest = trim(line.substr(colon + 1));
            const std::size_t bar = rest.find('|');
            const std::string score_text = trim(bar == std::string::npos ? rest : rest.substr(0, bar));
            char* end = nullptr;
            const long score = std::strtol(score_text.c_str(), &end, 10);
            if (end == score_text.c_str() || *end != '\0')
                throw ParseError("parse_response: non-integer score for " +
                                 std::string(item_code(*item)) + ": '" + score_text + "'");
            if (score < 0 || score > 3)
                throw ParseError("parse_response: score outside 0-3 for " +
                                 std::string(item_code(*item)));
            out.item_scores[*item] = static_cast<int>(score);
            // every quoted region on the line is one evidence span
            std::size_t q = bar == std::string::npos ? std::string::npos : rest.find('"', bar);
            while (q != std::string::npos) {
                const std::size_t q2 = rest.find('"', q + 1);
                if (q2 == std::string::npos) break;
                out.evidence[*item].push_back(rest.substr(q + 1, q2 - q - 1));
                q = rest.find('"', q2 + 1);
            }
            continue;
        }
        if (starts_with(line, "SUMMARY:")) {
            in_summary = true;
            const std::string inline_part = trim(line.substr(8));
            if (!inline_part.empty()) summary_lines.push_back(inline_part);
            continue;
        }
        if (starts_with(line, "TOTAL:")) {
            in_summary = false;
            const std::string t = trim(line.substr(6));
            char* end = nullptr;
            const long v = std::strtol(t.c_str(), &end, 10);
            if (end != t.c_str() && *end == '\0') out.claimed_total = static_cast<int>(v);
            continue;
        }
        if (starts_with(line, "SEVERITY:")) {
            in_summary = false;
            const std::string t = trim(line.substr(9));
            char* end = nullptr;
            const long v = std::strtol(t.c_str(), &end, 10);
            if (end != t.c_str() && *end == '\0') out.claimed_severity = static_cast<int>(v);
            continue;
        }
        if (in_summary && !line.empty()) summary_lines.push_back(line);
    }

    std::string missing;
    for (PhqItem it : kPhqItems)
        if (!out.item_scores.count(it)) missing += std::string(missing.empty() ? "" : ", ") + item_code(it);
    if (!missing.empty()) throw ParseError("parse_response: missing item lines: " + missing);

    for (std::size_t i = 0; i < summary_lines.size(); ++i) {
        if (i) out.summary_text += ' ';
        out.summary_text += summary_lines[i];
    }

    // The conversion from scores to severity is local and always overrides
    // whatever the model claimed.
    out.total = total_score(out.item_scores);
    out.severity = severity_from_total(out.total);
    out.discrepancy = (out.claimed_total && *out.claimed_total != out.total) ||
                      (out.claimed_severity && *out.claimed_severity != out.severity.value);
    return out;
}

// ---------------------------------------------------------------------------
// Mock clients
// ---------------------------------------------------------------------------

namespace detail {

inline const Sample* find_sample_by_prompt(const Corpus& corpus, const std::string& prompt) {
    const std::size_t pos = prompt.find("Interview ID: ");
    if (pos == std::string::npos) return nullptr;
    std::size_t end = prompt.find('\n', pos);
    if (end == std::string::npos) end = prompt.size();
    const std::string id = trim(prompt.substr(pos + 14, end - pos - 14));
    for (const auto* split : {&corpus.train, &corpus.dev, &corpus.test})
        for (const Sample& s : *split)
            if (s.id == id) return &s;
    return nullptr;
}

inline std::map<PhqItem, std::vector<std::string>> gold_evidence(const Sample& s) {
    std::map<PhqItem, std::vector<std::string>> out;
    if (!s.truth.utterance_items) return out;
    for (std::size_t i = 0; i < s.truth.utterance_items->size(); ++i) {
        const PhqItem it = (*s.truth.utterance_items)[i];
        if (it != PhqItem::NONE) out[it].push_back(s.dialogue[i].text);
    }
    return out;
}

}  // namespace detail

// Echoes the gold summary and gold-consistent item scores.
inline std::shared_ptr<LlmClient> make_oracle_client(const Corpus& corpus) {
    return std::make_shared<CallbackClient>("mock-oracle", [&corpus](const std::string& prompt) {
        const Sample* s = detail::find_sample_by_prompt(corpus, prompt);
        if (!s) throw Error("mock-oracle: no Interview ID in prompt");
        if (!s->truth.item_scores) throw Error("mock-oracle: sample has no item scores");
        const int total = total_score(*s->truth.item_scores);
        return emit_response(*s->truth.item_scores, detail::gold_evidence(*s),
                             s->truth.summary.rendered_text, total,
                             severity_from_total(total).value);
    });
}

// Scores every item zero regardless of the dialogue.
inline std::shared_ptr<LlmClient> make_zero_client(const Corpus& corpus) {
    return std::make_shared<CallbackClient>("mock-zero", [&corpus](const std::string& prompt) {
        const Sample* s = detail::find_sample_by_prompt(corpus, prompt);
        if (!s) throw Error("mock-zero: no Interview ID in prompt");
        std::map<PhqItem, int> zeros;
        for (PhqItem it : kPhqItems) zeros[it] = 0;
        return emit_response(zeros, {}, s->truth.summary.rendered_text, 0, 0);
    });
}

// Schema-sensitive: answers item scores correctly only when the prompt
// carries the item-guided PhqCoT instruction, and scores zero otherwise.
inline std::shared_ptr<LlmClient> make_improving_client(const Corpus& corpus) {
    return std::make_shared<CallbackClient>("mock-improving", [&corpus](const std::string& prompt) {
        const Sample* s = detail::find_sample_by_prompt(corpus, prompt);
        if (!s) throw Error("mock-improving: no Interview ID in prompt");
        const bool guided = prompt.find(kPhqCotInstruction) != std::string::npos;
        std::map<PhqItem, int> scores;
        for (PhqItem it : kPhqItems)
            scores[it] = guided && s->truth.item_scores ? s->truth.item_scores->at(it) : 0;
        const int total = total_score(scores);
        return emit_response(scores, guided ? detail::gold_evidence(*s) : std::map<PhqItem, std::vector<std::string>>{},
                             s->truth.summary.rendered_text, total,
                             severity_from_total(total).value);
    });
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct PhqCotSampleResult {
    std::string id;
    bool ok = false;
    std::string error;
    GenerationScores generation;
    int predicted_severity = 0;
    int gold_severity = 0;
    bool discrepancy = false;
};

struct PhqCotReport {
    std::string client;
    std::string strategy;
    int shots = 0;
    std::size_t total = 0;
    std::size_t failed = 0;
    bool valid = false;  // a run with > 20% parse failures is invalid
    GenerationScores generation;
    ClassificationScores classification;
    std::vector<PhqCotSampleResult> samples;
};

// Scores a hypothesis against every reference and keeps the best value per
// metric (the multi-annotation evaluation rule).
inline GenerationScores score_generation(const std::vector<std::string>& references,
                                         const std::string& hypothesis,
                                         const EmbeddingBackend& backend) {
    GenerationScores best;
    for (const std::string& ref : references) {
        best.rouge1 = std::max(best.rouge1, rouge_n(ref, hypothesis, 1));
        best.rouge2 = std::max(best.rouge2, rouge_n(ref, hypothesis, 2));
        best.rougeL = std::max(best.rougeL, rouge_l(ref, hypothesis));
        best.bleu = std::max(best.bleu, bleu(ref, hypothesis));
        best.embed_score = std::max(best.embed_score, embed_score(ref, hypothesis, backend));
    }
    return best;
}

inline std::string cached_invoke(LlmClient& client, const std::string& prompt,
                                 const std::optional<std::filesystem::path>& cache_dir) {
    if (!cache_dir) return invoke_with_retries(client, prompt);
    std::filesystem::create_directories(*cache_dir);
    const std::filesystem::path file =
        *cache_dir / (client.name() + "_" + fnv1a64_hex(prompt) + ".txt");
    if (std::filesystem::exists(file)) {
        std::ifstream in(file, std::ios::binary);
        std::string cached((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return cached;
    }
    const std::string response = invoke_with_retries(client, prompt);
    std::ofstream(file, std::ios::binary) << response;
    return response;
}

inline PhqCotReport run_evaluation(const std::vector<Sample>& split, LlmClient& client,
                                   const PromptSpec& spec, const EmbeddingBackend& backend,
                                   const std::optional<std::filesystem::path>& cache_dir =
                                       std::nullopt) {
    spec.validate();
    if (split.empty()) throw ValidationError("run_evaluation: empty split");

    PhqCotReport report;
    report.client = client.name();
    report.strategy = strategy_name(spec.strategy);
    report.shots = spec.shots;
    report.total = split.size();

    std::vector<SeverityLevel> pred, gold;
    GenerationScores sums;
    std::size_t scored = 0;
    for (const Sample& s : split) {
        PhqCotSampleResult row;
        row.id = s.id;
        row.gold_severity = s.truth.severity;
        try {
            const std::string prompt = build_prompt(s, spec, client.context_budget_chars());
            const std::string response = cached_invoke(client, prompt, cache_dir);
            const PhqCotResponse parsed = parse_response(response);
            row.generation = score_generation({s.truth.summary.rendered_text},
                                              parsed.summary_text, backend);
            row.predicted_severity = parsed.severity.value;
            row.discrepancy = parsed.discrepancy;
            row.ok = true;
            pred.emplace_back(parsed.severity);
            gold.emplace_back(SeverityLevel(s.truth.severity));
            sums.rouge1 += row.generation.rouge1;
            sums.rouge2 += row.generation.rouge2;
            sums.rougeL += row.generation.rougeL;
            sums.bleu += row.generation.bleu;
            sums.embed_score += row.generation.embed_score;
            ++scored;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
            ++report.failed;
        }
        report.samples.push_back(std::move(row));
    }

    if (scored > 0) {
        report.generation.rouge1 = sums.rouge1 / static_cast<double>(scored);
        report.generation.rouge2 = sums.rouge2 / static_cast<double>(scored);
        report.generation.rougeL = sums.rougeL / static_cast<double>(scored);
        report.generation.bleu = sums.bleu / static_cast<double>(scored);
        report.generation.embed_score = sums.embed_score / static_cast<double>(scored);
        report.classification = classification_scores(pred, gold, ClassificationMode::Binary);
    }
    report.valid =
        static_cast<double>(report.failed) <= 0.2 * static_cast<double>(report.total);
    return report;
}

}  // namespace phqmml
