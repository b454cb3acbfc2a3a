#pragma once

// Clinical-interview corpus: data model, tab-separated transcript ingestion,
// the on-disk corpus layout, and a deterministic synthetic-corpus generator
// used in place of the license-gated interview recordings.

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phqmml/common.hpp"
#include "phqmml/phq.hpp"

namespace phqmml {

using Mat = Eigen::MatrixXd;

enum class Speaker { Interviewer, Participant };

struct Utterance {
    int index = 0;
    Speaker speaker = Speaker::Participant;
    std::string text;
    double start_time = 0.0;
    double stop_time = 0.0;

    friend bool operator==(const Utterance&, const Utterance&) = default;
};

enum class Modality { Acoustic, Visual };

struct FeatureSequence {
    Mat frames;  // length x dim
    Modality modality = Modality::Acoustic;
    double frame_rate = 0.0;

    friend bool operator==(const FeatureSequence& a, const FeatureSequence& b) {
        return a.modality == b.modality && a.frame_rate == b.frame_rate &&
               a.frames.rows() == b.frames.rows() && a.frames.cols() == b.frames.cols() &&
               a.frames == b.frames;
    }
};

struct GroundTruth {
    int severity = 0;
    std::optional<std::map<PhqItem, int>> item_scores;
    StructuredSummary summary;
    std::optional<std::vector<PhqItem>> utterance_items;

    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct Sample {
    std::string id;
    std::vector<Utterance> dialogue;
    std::optional<FeatureSequence> acoustic;
    std::optional<FeatureSequence> visual;
    GroundTruth truth;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct Corpus {
    std::vector<Sample> train, dev, test;

    friend bool operator==(const Corpus&, const Corpus&) = default;

    const std::vector<Sample>& split(const std::string& name) const {
        if (name == "train") return train;
        if (name == "dev") return dev;
        if (name == "test") return test;
        throw ConfigError("unknown split: " + name);
    }
};

struct SplitSizes {
    std::size_t train = 0, dev = 0, test = 0;
    friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

inline SplitSizes split_counts(const Corpus& c) {
    return {c.train.size(), c.dev.size(), c.test.size()};
}

// Apportion `count` in the source corpus ratio 107:35:47 by largest
// remainder; remainder seats go train first, then dev, then test.
inline SplitSizes split_sizes_for(std::size_t count) {
    constexpr double kWeights[3] = {107.0, 35.0, 47.0};
    constexpr double kTotal = 189.0;
    std::size_t sizes[3];
    double fracs[3];
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double quota = static_cast<double>(count) * kWeights[i] / kTotal;
        sizes[i] = static_cast<std::size_t>(quota);
        fracs[i] = quota - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    while (assigned < count) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (fracs[i] > fracs[best]) best = i;
        ++sizes[best];
        fracs[best] = -1.0;
        ++assigned;
    }
    return {sizes[0], sizes[1], sizes[2]};
}

// ---------------------------------------------------------------------------
// Transcript ingestion
// ---------------------------------------------------------------------------

inline Speaker speaker_from_label(const std::string& label, int line_no) {
    if (label == "Ellie") return Speaker::Interviewer;
    if (to_lower(label) == "participant") return Speaker::Participant;
    throw ValidationError("transcript line " + std::to_string(line_no) +
                          ": unknown speaker label '" + label + "'");
}

inline const char* speaker_label(Speaker s) {
    return s == Speaker::Interviewer ? "Ellie" : "Participant";
}

inline std::vector<Utterance> parse_transcript(std::istream& in, const std::string& origin) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(origin + ": missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split_char(line, '\t');
    if (header.size() < 4 || header[0] != "start_time" || header[1] != "stop_time" ||
        header[2] != "speaker" || header[3] != "value")
        throw ParseError(origin + ": header must name start_time, stop_time, speaker, value");

    std::vector<Utterance> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const std::vector<std::string> cols = split_char(line, '\t');
        if (cols.size() < 4)
            throw ParseError(origin + " line " + std::to_string(line_no) +
                             ": expected 4 tab-separated columns");
        if (trim(cols[3]).empty()) continue;  // rows with empty value are dropped
        char* end = nullptr;
        const double start = std::strtod(cols[0].c_str(), &end);
        if (end == cols[0].c_str() || *end != '\0')
            throw ParseError(origin + " line " + std::to_string(line_no) + ": bad start_time '" +
                             cols[0] + "'");
        const double stop = std::strtod(cols[1].c_str(), &end);
        if (end == cols[1].c_str() || *end != '\0')
            throw ParseError(origin + " line " + std::to_string(line_no) + ": bad stop_time '" +
                             cols[1] + "'");
        if (stop < start)
            throw ValidationError(origin + " line " + std::to_string(line_no) +
                                  ": stop_time before start_time");
        Utterance u;
        u.index = static_cast<int>(out.size());
        u.speaker = speaker_from_label(cols[2], line_no);
        u.text = trim(cols[3]);
        u.start_time = start;
        u.stop_time = stop;
        out.push_back(std::move(u));
    }
    return out;
}

inline std::vector<Utterance> load_transcript(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open transcript: " + path.string());
    return parse_transcript(in, path.filename().string());
}

// ---------------------------------------------------------------------------
// On-disk corpus layout
// ---------------------------------------------------------------------------

namespace synth {
inline constexpr int kAcousticDim = 16;
inline constexpr int kVisualDim = 12;
inline constexpr double kAcousticRate = 100.0;
inline constexpr double kVisualRate = 30.0;
}  // namespace synth

inline nlohmann::json summary_to_json(const StructuredSummary& s) {
    nlohmann::json j;
    j["has_history"] = s.has_history;
    j["assessments"] = nlohmann::json::array();
    for (const Assessment& a : s.assessments)
        j["assessments"].push_back({{"item", item_code(a.item)}, {"degree", degree_word(a.degree)}});
    j["causes"] = nlohmann::json::array();
    for (const Cause& c : s.causes)
        j["causes"].push_back({{"text", c.text}, {"category", cause_category_name(c.category)}});
    switch (s.action_plan) {
        case ActionPlan::None: j["action_plan"] = "none"; break;
        case ActionPlan::ConditionalReferral: j["action_plan"] = "conditional_referral"; break;
        case ActionPlan::Referral: j["action_plan"] = "referral"; break;
    }
    j["rendered_text"] = s.rendered_text;
    return j;
}

inline StructuredSummary summary_from_json(const nlohmann::json& j) {
    StructuredSummary s;
    s.has_history = j.at("has_history").get<bool>();
    for (const auto& a : j.at("assessments")) {
        const auto item = item_from_code(a.at("item").get<std::string>());
        const auto degree = degree_from_word(a.at("degree").get<std::string>());
        if (!item || !degree) throw ParseError("summary json: bad assessment entry");
        s.assessments.push_back({*item, *degree});
    }
    for (const auto& c : j.at("causes")) {
        const auto cat = cause_category_from_name(c.at("category").get<std::string>());
        if (!cat) throw ParseError("summary json: bad cause category");
        s.causes.push_back({c.at("text").get<std::string>(), *cat});
    }
    const std::string plan = j.at("action_plan").get<std::string>();
    if (plan == "none") s.action_plan = ActionPlan::None;
    else if (plan == "conditional_referral") s.action_plan = ActionPlan::ConditionalReferral;
    else if (plan == "referral") s.action_plan = ActionPlan::Referral;
    else throw ParseError("summary json: bad action_plan '" + plan + "'");
    s.rendered_text = j.at("rendered_text").get<std::string>();
    return s;
}

inline nlohmann::json truth_to_json(const GroundTruth& t) {
    nlohmann::json j;
    j["severity"] = t.severity;
    if (t.item_scores) {
        nlohmann::json scores;
        for (const auto& [item, score] : *t.item_scores) scores[item_code(item)] = score;
        j["item_scores"] = scores;
    } else {
        j["item_scores"] = nullptr;
    }
    j["summary"] = summary_to_json(t.summary);
    if (t.utterance_items) {
        nlohmann::json items = nlohmann::json::array();
        for (PhqItem it : *t.utterance_items) items.push_back(item_code(it));
        j["utterance_items"] = items;
    } else {
        j["utterance_items"] = nullptr;
    }
    return j;
}

inline GroundTruth truth_from_json(const nlohmann::json& j) {
    GroundTruth t;
    t.severity = j.at("severity").get<int>();
    if (t.severity < 0 || t.severity > 3) throw ValidationError("truth json: severity outside 0-3");
    if (j.contains("item_scores") && !j.at("item_scores").is_null()) {
        std::map<PhqItem, int> scores;
        for (const auto& [code, score] : j.at("item_scores").items()) {
            const auto item = item_from_code(code);
            if (!item || *item == PhqItem::NONE)
                throw ParseError("truth json: bad item code '" + code + "'");
            const int v = score.get<int>();
            if (v < 0 || v > 3) throw ValidationError("truth json: item score outside 0-3");
            scores[*item] = v;
        }
        t.item_scores = std::move(scores);
    }
    t.summary = summary_from_json(j.at("summary"));
    if (j.contains("utterance_items") && !j.at("utterance_items").is_null()) {
        std::vector<PhqItem> items;
        for (const auto& code : j.at("utterance_items")) {
            const auto item = item_from_code(code.get<std::string>());
            if (!item) throw ParseError("truth json: bad utterance item code");
            items.push_back(*item);
        }
        t.utterance_items = std::move(items);
    }
    return t;
}

inline void write_matrix_csv(const Mat& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << format_double(m(r, c));
        }
        out << '\n';
    }
}

inline Mat read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::vector<double> row;
        for (const std::string& cell : split_char(line, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && rows.back().size() != row.size())
            throw ParseError(path.string() + ": ragged csv rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return Mat(0, 0);
    Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return m;
}

inline void save_sample(const Sample& s, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "transcript.tsv");
        if (!out) throw Error("cannot write transcript in " + dir.string());
        out << "start_time\tstop_time\tspeaker\tvalue\n";
        for (const Utterance& u : s.dialogue)
            out << format_double(u.start_time) << '\t' << format_double(u.stop_time) << '\t'
                << speaker_label(u.speaker) << '\t' << u.text << '\n';
    }
    if (s.acoustic) write_matrix_csv(s.acoustic->frames, dir / "acoustic.csv");
    if (s.visual) write_matrix_csv(s.visual->frames, dir / "visual.csv");
    std::ofstream truth(dir / "truth.json");
    truth << truth_to_json(s.truth).dump(2) << '\n';
}

inline Sample load_sample(const std::filesystem::path& dir, double acoustic_rate,
                          double visual_rate) {
    Sample s;
    s.id = dir.filename().string();
    s.dialogue = load_transcript(dir / "transcript.tsv");
    if (std::filesystem::exists(dir / "acoustic.csv"))
        s.acoustic = FeatureSequence{read_matrix_csv(dir / "acoustic.csv"), Modality::Acoustic,
                                     acoustic_rate};
    if (std::filesystem::exists(dir / "visual.csv"))
        s.visual =
            FeatureSequence{read_matrix_csv(dir / "visual.csv"), Modality::Visual, visual_rate};
    std::ifstream truth(dir / "truth.json");
    if (!truth) throw Error("missing truth.json in " + dir.string());
    nlohmann::json j;
    truth >> j;
    s.truth = truth_from_json(j);
    return s;
}

inline void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json meta;
    meta["format"] = 1;
    meta["acoustic_rate"] = synth::kAcousticRate;
    meta["visual_rate"] = synth::kVisualRate;
    std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
    const std::pair<const char*, const std::vector<Sample>*> splits[] = {
        {"train", &corpus.train}, {"dev", &corpus.dev}, {"test", &corpus.test}};
    for (const auto& [name, samples] : splits) {
        std::filesystem::create_directories(dir / name);
        for (const Sample& s : *samples) save_sample(s, dir / name / s.id);
    }
}

inline Corpus load_corpus(const std::filesystem::path& dir) {
    double acoustic_rate = synth::kAcousticRate;
    double visual_rate = synth::kVisualRate;
    if (std::filesystem::exists(dir / "meta.json")) {
        nlohmann::json meta;
        std::ifstream(dir / "meta.json") >> meta;
        acoustic_rate = meta.value("acoustic_rate", acoustic_rate);
        visual_rate = meta.value("visual_rate", visual_rate);
    }
    Corpus corpus;
    const std::pair<const char*, std::vector<Sample>*> splits[] = {
        {"train", &corpus.train}, {"dev", &corpus.dev}, {"test", &corpus.test}};
    for (const auto& [name, samples] : splits) {
        const std::filesystem::path split_dir = dir / name;
        if (!std::filesystem::exists(split_dir)) continue;
        std::vector<std::filesystem::path> sample_dirs;
        for (const auto& entry : std::filesystem::directory_iterator(split_dir))
            if (entry.is_directory()) sample_dirs.push_back(entry.path());
        std::sort(sample_dirs.begin(), sample_dirs.end());
        for (const auto& sd : sample_dirs)
            samples->push_back(load_sample(sd, acoustic_rate, visual_rate));
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

namespace synth {

struct ItemTemplates {
    const char* question;
    const char* answers[2];
};

inline const ItemTemplates& templates_for(PhqItem item) {
    static const std::map<PhqItem, ItemTemplates> table = {
        {PhqItem::LOI,
         {"what kinds of things do you usually enjoy doing",
          {"i used to enjoy painting but lately i have lost interest in everything",
           "nothing really brings me pleasure anymore even my old hobbies feel empty"}}},
        {PhqItem::FD,
         {"how has your mood been over the past few weeks",
          {"i have been feeling depressed and hopeless most days",
           "honestly i feel pretty miserable and hopeless about things"}}},
        {PhqItem::SD,
         {"how have you been sleeping lately",
          {"i have trouble falling asleep and i keep waking up through the night",
           "my sleep is a mess some nights i get two hours and then i doze all day"}}},
        {PhqItem::LOE,
         {"how is your energy during the day",
          {"i feel tired all the time and i have no energy for anything",
           "i am exhausted even after resting it is like running on fumes"}}},
        {PhqItem::AC,
         {"how has your appetite been",
          {"my appetite is basically gone and i have been skipping meals",
           "i have been overeating at night and my eating schedule is all over the place"}}},
        {PhqItem::LSE,
         {"how do you feel about yourself these days",
          {"i feel like a failure like i keep letting everyone around me down",
           "i feel pretty worthless lately like i only ever let people down"}}},
        {PhqItem::CP,
         {"have you been able to focus on things like reading or tv",
          {"i cannot concentrate on anything i reread the same page five times",
           "i get distracted constantly i cannot focus long enough to finish a show"}}},
        {PhqItem::PC,
         {"have you noticed changes in how you move or speak",
          {"i feel restless and fidgety like i cannot sit still for a minute",
           "everything i do feels sluggish lately even my speech has slowed way down"}}},
    };
    return table.at(item);
}

struct FillerQa {
    const char* question;
    const char* answer;
};

inline const std::vector<FillerQa>& filler_qa() {
    static const std::vector<FillerQa> pool = {
        {"how are you doing today", "i am doing okay thanks for asking"},
        {"where are you from originally", "i grew up near the coast and came here for school"},
        {"tell me about where you live", "i live in a small apartment with my cat"},
        {"what do you do for work these days", "i work part time at a grocery store"},
        {"what did you do last weekend", "i mostly stayed home and watched some old movies"},
    };
    return pool;
}

inline const std::vector<std::string>& cause_library() {
    static const std::vector<std::string> pool = {
        "their ongoing unemployment and financial stress",
        "pressure from mounting debt",
        "stress from work and career challenges",
        "the recent loss of their job",
        "their recent relocation to a new city",
        "the breakup of a significant relationship",
        "the various challenges they will face after graduation",
        "difficulty adapting to an unfamiliar environment",
        "their ongoing struggles with chronic pain",
        "a recent medical diagnosis that worries them",
        "lingering health problems after an injury",
        "persistent self-criticism",
        "difficulty with emotional regulation",
        "low self-confidence in social settings",
        "past experiences with homelessness",
        "their current living situation",
    };
    return pool;
}

inline Degree degree_for_score(int score, Rng& rng) {
    switch (score) {
        case 1: return rng.uniform() < 0.5 ? Degree::Occasional : Degree::Mild;
        case 2: return rng.uniform() < 0.5 ? Degree::Moderate : Degree::Significant;
        default: return Degree::Severe;
    }
}

// Draw 8 item scores whose total lands inside the severity's cut-point band.
inline std::map<PhqItem, int> draw_item_scores(int severity, Rng& rng) {
    int lo = 0, hi = 4;
    if (severity == 1) { lo = 5; hi = 9; }
    if (severity == 2) { lo = 10; hi = 14; }
    if (severity == 3) { lo = 15; hi = 24; }
    const int target = static_cast<int>(rng.uniform_int(lo, hi));
    std::map<PhqItem, int> scores;
    for (PhqItem it : kPhqItems) scores[it] = 0;
    int total = 0;
    while (total < target) {
        const PhqItem it = kPhqItems[static_cast<std::size_t>(rng.uniform_int(0, 7))];
        if (scores[it] < 3) {
            ++scores[it];
            ++total;
        }
    }
    return scores;
}

inline Mat draw_features(int severity, int dim, Rng& rng) {
    const long frames = rng.uniform_int(20, 60);
    Mat m(frames, dim);
    for (long r = 0; r < frames; ++r)
        for (int c = 0; c < dim; ++c) {
            const double offset = c < 4 ? 0.5 * severity : 0.0;
            m(r, c) = rng.normal(offset, 1.0);
        }
    return m;
}

inline Sample make_sample(const std::string& id, int severity, Rng rng) {
    Sample s;
    s.id = id;
    s.truth.severity = severity;

    const std::map<PhqItem, int> scores = draw_item_scores(severity, rng);
    s.truth.item_scores = scores;

    StructuredSummary summary;
    summary.has_history = rng.uniform() < 0.15 + 0.10 * severity;
    for (PhqItem it : kPhqItems) {
        const int sc = scores.at(it);
        if (sc > 0) summary.assessments.push_back({it, degree_for_score(sc, rng)});
    }
    if (severity >= 1) {
        std::vector<std::string> pool = cause_library();
        rng.shuffle(pool);
        const long n = rng.uniform_int(1, 3);
        for (long i = 0; i < n; ++i)
            summary.causes.push_back({pool[static_cast<std::size_t>(i)],
                                      categorize_cause(pool[static_cast<std::size_t>(i)])});
    }
    summary.action_plan = severity >= 2 ? ActionPlan::Referral
                          : severity == 1 ? ActionPlan::ConditionalReferral
                                          : ActionPlan::None;
    const SeverityLevel level(severity);
    summary.rendered_text = render_summary(summary, level);
    s.truth.summary = summary;

    // Dialogue assembly. Bookkeeping records the injected item per utterance.
    std::vector<std::pair<Utterance, PhqItem>> turns;
    double t = 0.0;
    auto push = [&](Speaker sp, const std::string& text, PhqItem tag) {
        Utterance u;
        u.index = static_cast<int>(turns.size());
        u.speaker = sp;
        u.text = text;
        const double dur = 1.0 + 0.35 * static_cast<double>(split_ws(text).size());
        u.start_time = t;
        u.stop_time = t + dur;
        t += dur + 0.3;
        turns.emplace_back(std::move(u), tag);
    };

    push(Speaker::Interviewer, "hi i am ellie thanks for coming in today", PhqItem::NONE);
    push(Speaker::Participant, "hi thanks for having me", PhqItem::NONE);

    std::vector<FillerQa> fillers = filler_qa();
    rng.shuffle(fillers);
    std::size_t next_filler = 0;
    const long lead_fillers = rng.uniform_int(1, 2);
    for (long i = 0; i < lead_fillers && next_filler < fillers.size(); ++i, ++next_filler) {
        push(Speaker::Interviewer, fillers[next_filler].question, PhqItem::NONE);
        push(Speaker::Participant, fillers[next_filler].answer, PhqItem::NONE);
    }

    push(Speaker::Interviewer, "have you ever been diagnosed with depression before",
         PhqItem::NONE);
    push(Speaker::Participant,
         summary.has_history ? "yes i was diagnosed with depression a few years ago"
                             : "no i have never been diagnosed with anything like that",
         PhqItem::NONE);

    for (PhqItem it : kPhqItems) {
        if (scores.at(it) == 0) continue;
        const ItemTemplates& tpl = templates_for(it);
        push(Speaker::Interviewer, tpl.question, PhqItem::NONE);
        push(Speaker::Participant, tpl.answers[rng.uniform_int(0, 1)], it);
    }

    if (next_filler < fillers.size() && rng.uniform() < 0.6) {
        push(Speaker::Interviewer, fillers[next_filler].question, PhqItem::NONE);
        push(Speaker::Participant, fillers[next_filler].answer, PhqItem::NONE);
        ++next_filler;
    }

    push(Speaker::Interviewer, "thank you for sharing all of this with me today", PhqItem::NONE);
    push(Speaker::Participant, "thank you this actually helped", PhqItem::NONE);

    std::vector<PhqItem> utterance_items;
    for (auto& [utt, tag] : turns) {
        s.dialogue.push_back(std::move(utt));
        utterance_items.push_back(tag);
    }
    s.truth.utterance_items = std::move(utterance_items);

    s.acoustic = FeatureSequence{draw_features(severity, kAcousticDim, rng), Modality::Acoustic,
                                 kAcousticRate};
    s.visual =
        FeatureSequence{draw_features(severity, kVisualDim, rng), Modality::Visual, kVisualRate};
    return s;
}

}  // namespace synth

inline Corpus generate_synthetic(std::size_t count, std::uint64_t seed) {
    if (count < 4)
        throw std::invalid_argument("generate_synthetic: count must be >= 4 so every severity "
                                    "level is representable");
    const SplitSizes sizes = split_sizes_for(count);
    Rng rng(seed ^ 0x5eedc0de5eedc0deull);

    Corpus corpus;
    std::size_t sample_index = 0;
    const std::pair<std::vector<Sample>*, std::size_t> splits[] = {
        {&corpus.train, sizes.train}, {&corpus.dev, sizes.dev}, {&corpus.test, sizes.test}};
    for (const auto& [samples, n] : splits) {
        // Round-robin severities within each split so every split of size >= 4
        // carries all four levels, then shuffle the order.
        std::vector<int> severities;
        for (std::size_t i = 0; i < n; ++i) severities.push_back(static_cast<int>(i % 4));
        rng.shuffle(severities);
        for (std::size_t i = 0; i < n; ++i, ++sample_index) {
            char id[16];
            std::snprintf(id, sizeof(id), "synth_%04zu", sample_index);
            samples->push_back(synth::make_sample(id, severities[i], rng.fork(sample_index)));
        }
    }
    return corpus;
}

}  // namespace phqmml
