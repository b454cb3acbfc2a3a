#pragma once

// PHQ-8 ontology: the eight symptom items, score arithmetic, severity
// mapping, and the four-sentence structured symptom summary with a
// bidirectional render/parse pair.
//
// The summary grammar is a closed template:
//   (1) optional history sentence, extra clauses kept as an opaque suffix
//   (2) symptom assessment list, degree adjective + item noun phrase
//   (3) optional causes sentence
//   (4) action plan sentence keyed to severity (referral at >= 2,
//       conditional referral at 1, nothing at 0)

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phqmml/common.hpp"

namespace phqmml {

enum class PhqItem { LOI, FD, SD, LOE, AC, LSE, CP, PC, NONE };

inline constexpr std::array<PhqItem, 8> kPhqItems = {
    PhqItem::LOI, PhqItem::FD, PhqItem::SD, PhqItem::LOE,
    PhqItem::AC,  PhqItem::LSE, PhqItem::CP, PhqItem::PC,
};

inline constexpr int kNumItemClasses = 9;  // 8 items + NONE

inline const char* item_code(PhqItem item) {
    switch (item) {
        case PhqItem::LOI: return "LOI";
        case PhqItem::FD: return "FD";
        case PhqItem::SD: return "SD";
        case PhqItem::LOE: return "LOE";
        case PhqItem::AC: return "AC";
        case PhqItem::LSE: return "LSE";
        case PhqItem::CP: return "CP";
        case PhqItem::PC: return "PC";
        case PhqItem::NONE: return "NONE";
    }
    return "NONE";
}

inline const char* item_name(PhqItem item) {
    switch (item) {
        case PhqItem::LOI: return "Lack of Interest";
        case PhqItem::FD: return "Feeling Down";
        case PhqItem::SD: return "Sleeping Disorder";
        case PhqItem::LOE: return "Lack of Energy";
        case PhqItem::AC: return "Appetite Changes";
        case PhqItem::LSE: return "Low Self Esteem";
        case PhqItem::CP: return "Concentration Problem";
        case PhqItem::PC: return "Psychomotor Changes";
        case PhqItem::NONE: return "None";
    }
    return "None";
}

// Scale wording for each item, used verbatim in prompts.
inline const char* item_description(PhqItem item) {
    switch (item) {
        case PhqItem::LOI: return "Little interest or pleasure in doing things.";
        case PhqItem::FD: return "Feeling down, depressed, or hopeless.";
        case PhqItem::SD: return "Trouble falling or staying asleep, or sleeping too much.";
        case PhqItem::LOE: return "Feeling tired or having little energy.";
        case PhqItem::AC: return "Poor appetite or overeating.";
        case PhqItem::LSE:
            return "Feeling bad about yourself — or that you are a failure or have let "
                   "yourself or your family down.";
        case PhqItem::CP:
            return "Trouble concentrating on things, such as reading the newspaper or "
                   "watching television.";
        case PhqItem::PC:
            return "Moving or speaking so slowly that other people could have noticed? Or "
                   "the opposite — being so fidgety or restless that you have been moving "
                   "around a lot more than usual.";
        case PhqItem::NONE: return "No PHQ-8 symptom.";
    }
    return "";
}

inline std::optional<PhqItem> item_from_code(std::string_view code) {
    for (PhqItem it : kPhqItems)
        if (code == item_code(it)) return it;
    if (code == "NONE") return PhqItem::NONE;
    return std::nullopt;
}

inline int item_index(PhqItem item) { return static_cast<int>(item); }

struct ItemScore {
    PhqItem item = PhqItem::NONE;
    int score = 0;

    ItemScore() = default;
    ItemScore(PhqItem it, int sc) : item(it), score(sc) {
        if (it == PhqItem::NONE) throw ValidationError("ItemScore: item may not be NONE");
        if (sc < 0 || sc > 3) throw ValidationError("ItemScore: score outside 0-3");
    }
};

struct SeverityLevel {
    int value = 0;       // 0..3
    bool binary = false;  // depressed, equivalent to value >= 2

    SeverityLevel() = default;
    explicit SeverityLevel(int v) : value(v), binary(v >= 2) {
        if (v < 0 || v > 3) throw ValidationError("SeverityLevel: value outside 0-3");
    }
    friend bool operator==(const SeverityLevel&, const SeverityLevel&) = default;
};

// Sum of present item scores; missing items count 0.
inline int total_score(const std::map<PhqItem, int>& scores) {
    int total = 0;
    for (const auto& [item, score] : scores) {
        if (item == PhqItem::NONE) throw ValidationError("total_score: NONE has no score");
        if (score < 0 || score > 3)
            throw ValidationError("total_score: score outside 0-3 for item " +
                                  std::string(item_code(item)));
        total += score;
    }
    return total;
}

// Clinical PHQ-8 cut-points: 0-4, 5-9, 10-14, 15-24.
inline SeverityLevel severity_from_total(int total) {
    if (total < 0 || total > 24) throw ValidationError("severity_from_total: total outside 0-24");
    if (total <= 4) return SeverityLevel(0);
    if (total <= 9) return SeverityLevel(1);
    if (total <= 14) return SeverityLevel(2);
    return SeverityLevel(3);
}

enum class Degree { Occasional, Mild, Moderate, Significant, Severe };

inline const char* degree_word(Degree d) {
    switch (d) {
        case Degree::Occasional: return "occasional";
        case Degree::Mild: return "mild";
        case Degree::Moderate: return "moderate";
        case Degree::Significant: return "significant";
        case Degree::Severe: return "severe";
    }
    return "mild";
}

inline std::optional<Degree> degree_from_word(std::string_view w) {
    if (w == "occasional") return Degree::Occasional;
    if (w == "mild") return Degree::Mild;
    if (w == "moderate") return Degree::Moderate;
    if (w == "significant") return Degree::Significant;
    if (w == "severe") return Degree::Severe;
    return std::nullopt;
}

enum class CauseCategory {
    LifeEventsAndEnvironmentalAdaptation,
    EconomicAndCareerStress,
    HealthIssues,
    PersonalPsychologicalAndEmotionalRegulation,
    Others,
    Unspecified,
};

inline const char* cause_category_name(CauseCategory c) {
    switch (c) {
        case CauseCategory::LifeEventsAndEnvironmentalAdaptation:
            return "Life Events and Environmental Adaptation";
        case CauseCategory::EconomicAndCareerStress: return "Economic and Career Stress";
        case CauseCategory::HealthIssues: return "Health Issues";
        case CauseCategory::PersonalPsychologicalAndEmotionalRegulation:
            return "Personal Psychological and Emotional Regulation";
        case CauseCategory::Others: return "Others";
        case CauseCategory::Unspecified: return "Unspecified";
    }
    return "Unspecified";
}

inline std::optional<CauseCategory> cause_category_from_name(std::string_view name) {
    for (CauseCategory c :
         {CauseCategory::LifeEventsAndEnvironmentalAdaptation, CauseCategory::EconomicAndCareerStress,
          CauseCategory::HealthIssues, CauseCategory::PersonalPsychologicalAndEmotionalRegulation,
          CauseCategory::Others, CauseCategory::Unspecified})
        if (name == cause_category_name(c)) return c;
    return std::nullopt;
}

// Keyword lookup for cause categorisation. First matching category wins;
// anything unmatched is Unspecified.
inline CauseCategory categorize_cause(std::string_view text) {
    const std::string t = to_lower(text);
    auto hit = [&](std::initializer_list<const char*> keys) {
        for (const char* k : keys)
            if (t.find(k) != std::string::npos) return true;
        return false;
    };
    if (hit({"financial", "unemploy", "job", "work", "career", "money", "debt"}))
        return CauseCategory::EconomicAndCareerStress;
    if (hit({"health", "illness", "medical", "pain", "ptsd", "injury", "diagnosis"}))
        return CauseCategory::HealthIssues;
    if (hit({"self-criticism", "self-confidence", "emotional", "psychological", "loneliness"}))
        return CauseCategory::PersonalPsychologicalAndEmotionalRegulation;
    if (hit({"relocation", "moving", "breakup", "divorce", "graduation", "environment",
             "family", "relationship", "adapting", "life"}))
        return CauseCategory::LifeEventsAndEnvironmentalAdaptation;
    if (hit({"homeless", "living situation"})) return CauseCategory::Others;
    return CauseCategory::Unspecified;
}

struct Cause {
    std::string text;
    CauseCategory category = CauseCategory::Unspecified;
    friend bool operator==(const Cause&, const Cause&) = default;
};

struct Assessment {
    PhqItem item = PhqItem::NONE;
    Degree degree = Degree::Mild;
    friend bool operator==(const Assessment&, const Assessment&) = default;
};

enum class ActionPlan { None, ConditionalReferral, Referral };

struct StructuredSummary {
    bool has_history = false;
    std::vector<Assessment> assessments;  // in PHQ item order, one per item at most
    std::vector<Cause> causes;
    ActionPlan action_plan = ActionPlan::None;
    std::string rendered_text;

    friend bool operator==(const StructuredSummary&, const StructuredSummary&) = default;
};

// Field equality ignoring rendered_text; the round-trip contract.
inline bool same_structure(const StructuredSummary& a, const StructuredSummary& b) {
    return a.has_history == b.has_history && a.assessments == b.assessments &&
           a.causes == b.causes && a.action_plan == b.action_plan;
}

namespace detail {

struct ItemPhrase {
    PhqItem item;
    bool article;             // canonical phrase takes "a"/"an" before the degree
    const char* canonical;
    std::vector<const char*> aliases;
};

inline const std::vector<ItemPhrase>& item_phrases() {
    static const std::vector<ItemPhrase> table = {
        {PhqItem::LOI, true, "lack of interest or pleasure",
         {"lack of interest or pleasure in activities", "reduction of interest or pleasure",
          "decrease in interest or pleasure in activities", "decrease in interest or pleasure"}},
        {PhqItem::FD, false, "feelings of depression or hopelessness",
         {"feelings of depression and hopelessness"}},
        {PhqItem::SD, false, "sleep issues", {"sleep disturbances", "sleep problems"}},
        {PhqItem::LOE, false, "low energy or fatigue", {"fatigue", "low energy"}},
        {PhqItem::AC, false, "appetite issues", {"appetite disturbances", "appetite changes"}},
        {PhqItem::LSE, false, "self-worth issues", {"feelings of worthlessness"}},
        {PhqItem::CP, false, "concentration difficulties", {"concentration problems"}},
        {PhqItem::PC, false, "psychomotor agitation",
         {"psychomotor agitation or retardation", "psychomotor changes"}},
    };
    return table;
}

inline std::optional<PhqItem> item_from_phrase(std::string_view phrase) {
    for (const auto& entry : item_phrases()) {
        if (phrase == entry.canonical) return entry.item;
        for (const char* alias : entry.aliases)
            if (phrase == alias) return entry.item;
    }
    return std::nullopt;
}

inline const ItemPhrase& phrase_for(PhqItem item) {
    for (const auto& entry : item_phrases())
        if (entry.item == item) return entry;
    throw ValidationError("no phrase for NONE");
}

inline std::string join_list(const std::vector<std::string>& parts) {
    if (parts.empty()) return "";
    if (parts.size() == 1) return parts[0];
    if (parts.size() == 2) return parts[0] + " and " + parts[1];
    std::string out;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) out += parts[i] + ", ";
    out += "and " + parts.back();
    return out;
}

// Cause texts are free prose and may themselves contain " and ", so cause
// lists always carry the comma before the final element.
inline std::string join_list_comma(const std::vector<std::string>& parts) {
    if (parts.size() < 2) return join_list(parts);
    std::string out;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) out += parts[i] + ", ";
    out += "and " + parts.back();
    return out;
}

// Splits "a, b, and c" / "a and b" / "a" back into elements.
inline std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> parts;
    if (text.find(", ") != std::string_view::npos) {
        for (std::string& seg : split_char(std::string(text), ',')) {
            std::string p = trim(seg);
            if (starts_with(p, "and ")) p = p.substr(4);
            if (!p.empty()) parts.push_back(p);
        }
    } else {
        const std::size_t pos = text.find(" and ");
        if (pos != std::string_view::npos) {
            parts.emplace_back(trim(text.substr(0, pos)));
            parts.emplace_back(trim(text.substr(pos + 5)));
        } else {
            parts.emplace_back(trim(text));
        }
    }
    return parts;
}

// Sentence splitter for template prose: breaks after '.' followed by space.
inline std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i) {
        cur += text[i];
        if (text[i] == '.' &&
            (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
            std::string t = trim(cur);
            if (!t.empty()) out.push_back(t);
            cur.clear();
        }
    }
    std::string t = trim(cur);
    if (!t.empty()) out.push_back(t);
    return out;
}

inline constexpr const char* kHistorySentence = "The participant reported a history of depression";
inline constexpr const char* kNoSymptomsSentence =
    "The participant does not report significant depressive symptoms.";
inline constexpr const char* kCausesPrefix = "These symptoms may be related to ";
inline constexpr const char* kReferralSentence =
    "It is advised that the participant seek further evaluation and treatment from a "
    "psychiatrist or psychologist.";
inline constexpr const char* kConditionalReferralSentence =
    "If symptoms persist or worsen, it is recommended that the participant seek further "
    "evaluation and treatment from a psychiatrist or psychologist.";

inline const std::vector<const char*>& assessment_prefixes() {
    static const std::vector<const char*> p = {
        "The participant primarily experiences ",
        "The participant experiences ",
        "They currently experience ",
        "They primarily experience ",
    };
    return p;
}

}  // namespace detail

inline void validate_summary(const StructuredSummary& s, const SeverityLevel& severity) {
    switch (s.action_plan) {
        case ActionPlan::Referral:
            if (severity.value < 2)
                throw ValidationError("render_summary: referral requires severity >= 2");
            break;
        case ActionPlan::ConditionalReferral:
            if (severity.value != 1)
                throw ValidationError("render_summary: conditional referral requires severity 1");
            break;
        case ActionPlan::None:
            if (severity.value >= 1)
                throw ValidationError("render_summary: severity >= 1 requires an action plan");
            break;
    }
    if (s.assessments.empty() && severity.value != 0)
        throw ValidationError("render_summary: empty assessments only allowed at severity 0");
    int last = -1;
    for (const Assessment& a : s.assessments) {
        if (a.item == PhqItem::NONE) throw ValidationError("render_summary: NONE assessment");
        if (item_index(a.item) <= last)
            throw ValidationError("render_summary: assessments must follow PHQ item order");
        last = item_index(a.item);
    }
}

inline std::string render_summary(const StructuredSummary& s, const SeverityLevel& severity) {
    validate_summary(s, severity);
    std::string out;
    if (s.has_history) {
        out += detail::kHistorySentence;
        out += ".";
    }
    auto append_sentence = [&out](const std::string& sentence) {
        if (!out.empty()) out += " ";
        out += sentence;
    };
    if (s.assessments.empty()) {
        append_sentence(detail::kNoSymptomsSentence);
    } else {
        std::vector<std::string> phrases;
        for (const Assessment& a : s.assessments) {
            const auto& entry = detail::phrase_for(a.item);
            std::string phrase;
            if (entry.article) {
                const char* w = degree_word(a.degree);
                phrase += (w[0] == 'a' || w[0] == 'e' || w[0] == 'i' || w[0] == 'o' || w[0] == 'u')
                              ? "an "
                              : "a ";
            }
            phrase += degree_word(a.degree);
            phrase += " ";
            phrase += entry.canonical;
            phrases.push_back(phrase);
        }
        append_sentence("The participant primarily experiences " + detail::join_list(phrases) +
                        ".");
    }
    if (!s.causes.empty()) {
        std::vector<std::string> texts;
        for (const Cause& c : s.causes) texts.push_back(c.text);
        append_sentence(std::string(detail::kCausesPrefix) + detail::join_list_comma(texts) + ".");
    }
    if (s.action_plan == ActionPlan::Referral) append_sentence(detail::kReferralSentence);
    if (s.action_plan == ActionPlan::ConditionalReferral)
        append_sentence(detail::kConditionalReferralSentence);
    return out;
}

inline StructuredSummary parse_summary(const std::string& text) {
    const std::vector<std::string> sentences = detail::split_sentences(text);
    if (sentences.empty()) throw ParseError("parse_summary: empty text (sentence 0)");

    StructuredSummary s;
    s.rendered_text = text;
    std::size_t idx = 0;

    if (starts_with(sentences[idx], detail::kHistorySentence)) {
        // Trailing clauses like "and is currently undergoing treatment" are
        // opaque; only the history flag is structured.
        s.has_history = true;
        ++idx;
    }

    if (idx >= sentences.size())
        throw ParseError("parse_summary: missing assessment sentence (sentence " +
                         std::to_string(idx) + ")");

    const std::string& assess = sentences[idx];
    if (assess == detail::kNoSymptomsSentence) {
        ++idx;
    } else {
        std::string body;
        bool matched = false;
        for (const char* prefix : detail::assessment_prefixes()) {
            if (starts_with(assess, prefix)) {
                body = assess.substr(std::string_view(prefix).size());
                matched = true;
                break;
            }
        }
        if (!matched)
            throw ParseError("parse_summary: unrecognized sentence (sentence " +
                             std::to_string(idx) + "): " + assess);
        if (!body.empty() && body.back() == '.') body.pop_back();

        // Skip a lead-in like "severe depressive symptoms, including ...".
        const std::size_t inc = body.find("including ");
        if (inc != std::string::npos) {
            const std::string head = body.substr(0, inc);
            if (head.find("symptoms") != std::string::npos) body = body.substr(inc + 10);
        }

        for (const std::string& raw : detail::split_list(body)) {
            std::string phrase = raw;
            if (starts_with(phrase, "a ")) phrase = phrase.substr(2);
            else if (starts_with(phrase, "an ")) phrase = phrase.substr(3);
            const std::size_t sp = phrase.find(' ');
            if (sp == std::string::npos)
                throw ParseError("parse_summary: bad assessment phrase (sentence " +
                                 std::to_string(idx) + "): " + raw);
            auto degree = degree_from_word(phrase.substr(0, sp));
            // "moderate to severe ..." style hedges collapse to the first adverb.
            std::string rest = phrase.substr(sp + 1);
            if (degree && starts_with(rest, "to ")) {
                const std::size_t sp2 = rest.find(' ', 3);
                if (sp2 != std::string::npos && degree_from_word(rest.substr(3, sp2 - 3)))
                    rest = rest.substr(sp2 + 1);
            }
            if (!degree)
                throw ParseError("parse_summary: unknown degree adverb (sentence " +
                                 std::to_string(idx) + "): " + raw);
            auto item = detail::item_from_phrase(rest);
            if (!item)
                throw ParseError("parse_summary: unknown symptom phrase (sentence " +
                                 std::to_string(idx) + "): " + rest);
            s.assessments.push_back({*item, *degree});
        }
        ++idx;
    }

    if (idx < sentences.size() && starts_with(sentences[idx], detail::kCausesPrefix)) {
        std::string body = sentences[idx].substr(std::string_view(detail::kCausesPrefix).size());
        if (!body.empty() && body.back() == '.') body.pop_back();
        // Cause lists are comma-separated; a comma-free clause is one cause,
        // since free cause prose may itself contain " and ".
        std::vector<std::string> parts;
        if (body.find(", ") != std::string::npos) parts = detail::split_list(body);
        else parts.push_back(trim(body));
        for (const std::string& part : parts)
            s.causes.push_back({part, categorize_cause(part)});
        ++idx;
    }

    if (idx < sentences.size()) {
        if (sentences[idx] == detail::kReferralSentence) {
            s.action_plan = ActionPlan::Referral;
            ++idx;
        } else if (sentences[idx] == detail::kConditionalReferralSentence) {
            s.action_plan = ActionPlan::ConditionalReferral;
            ++idx;
        }
    }

    if (idx != sentences.size())
        throw ParseError("parse_summary: unrecognized sentence (sentence " + std::to_string(idx) +
                         "): " + sentences[idx]);
    return s;
}

}  // namespace phqmml
