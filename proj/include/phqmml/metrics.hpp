#pragma once

// Evaluation and agreement metrics: ROUGE-1/2/L, sentence BLEU-4, a greedy
// embedding-similarity score, binary and per-class classification metrics,
// and Fleiss' kappa over IoU-clustered annotations.
//
// All text metrics tokenize by lowercasing and splitting on whitespace.
// Degenerate inputs: an empty hypothesis or reference scores 0, except that
// two empty strings count as identical and score 1.

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "phqmml/common.hpp"
#include "phqmml/phq.hpp"

namespace phqmml {

struct GenerationScores {
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
    double bleu = 0.0;
    double embed_score = 0.0;
};

struct ClassificationScores {
    double precision = 0.0;  // macro-averaged
    double recall = 0.0;     // macro-averaged
    double macro_f1 = 0.0;
    std::map<int, double> per_class_f1;
};

namespace detail {

inline double f1(double p, double r) { return p + r > 0.0 ? (2.0 * p * r) / (p + r) : 0.0; }

// Clipped n-gram match count between token sequences.
inline void ngram_counts(const std::vector<std::string>& ref, const std::vector<std::string>& hyp,
                         int n, long& matches, long& hyp_total, long& ref_total) {
    std::map<std::vector<std::string>, long> ref_counts;
    ref_total = static_cast<long>(ref.size()) - n + 1;
    if (ref_total < 0) ref_total = 0;
    for (long i = 0; i + n <= static_cast<long>(ref.size()); ++i)
        ++ref_counts[std::vector<std::string>(ref.begin() + i, ref.begin() + i + n)];
    hyp_total = static_cast<long>(hyp.size()) - n + 1;
    if (hyp_total < 0) hyp_total = 0;
    matches = 0;
    std::map<std::vector<std::string>, long> used;
    for (long i = 0; i + n <= static_cast<long>(hyp.size()); ++i) {
        std::vector<std::string> gram(hyp.begin() + i, hyp.begin() + i + n);
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end() && used[gram] < it->second) {
            ++used[gram];
            ++matches;
        }
    }
}

inline long lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<long> prev(m + 1, 0), cur(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[m];
}

}  // namespace detail

inline double rouge_n(const std::string& reference, const std::string& hypothesis, int n) {
    if (n != 1 && n != 2) throw ValidationError("rouge_n: n must be 1 or 2");
    const auto ref = tokenize_lower(reference);
    const auto hyp = tokenize_lower(hypothesis);
    if (ref.empty() && hyp.empty()) return 1.0;
    if (ref.empty() || hyp.empty()) return 0.0;
    long matches, hyp_total, ref_total;
    detail::ngram_counts(ref, hyp, n, matches, hyp_total, ref_total);
    if (hyp_total == 0 || ref_total == 0) return 0.0;
    const double p = static_cast<double>(matches) / static_cast<double>(hyp_total);
    const double r = static_cast<double>(matches) / static_cast<double>(ref_total);
    return detail::f1(p, r);
}

inline double rouge_l(const std::string& reference, const std::string& hypothesis) {
    const auto ref = tokenize_lower(reference);
    const auto hyp = tokenize_lower(hypothesis);
    if (ref.empty() && hyp.empty()) return 1.0;
    if (ref.empty() || hyp.empty()) return 0.0;
    const long lcs = detail::lcs_length(ref, hyp);
    const double p = static_cast<double>(lcs) / static_cast<double>(hyp.size());
    const double r = static_cast<double>(lcs) / static_cast<double>(ref.size());
    return detail::f1(p, r);
}

// Sentence BLEU-4: unsmoothed unigram precision, add-one smoothing for the
// higher orders, standard brevity penalty.
inline double bleu(const std::string& reference, const std::string& hypothesis) {
    const auto ref = tokenize_lower(reference);
    const auto hyp = tokenize_lower(hypothesis);
    if (ref.empty() && hyp.empty()) return 1.0;
    if (ref.empty() || hyp.empty()) return 0.0;
    double log_sum = 0.0;
    for (int n = 1; n <= 4; ++n) {
        long matches, hyp_total, ref_total;
        detail::ngram_counts(ref, hyp, n, matches, hyp_total, ref_total);
        double p;
        if (n == 1) {
            p = static_cast<double>(matches) / static_cast<double>(hyp_total);
            if (p == 0.0) return 0.0;
        } else {
            p = (static_cast<double>(matches) + 1.0) / (static_cast<double>(hyp_total) + 1.0);
        }
        log_sum += std::log(p);
    }
    const double c = static_cast<double>(hyp.size());
    const double r = static_cast<double>(ref.size());
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return bp * std::exp(log_sum / 4.0);
}

// ---------------------------------------------------------------------------
// Embedding similarity
// ---------------------------------------------------------------------------

// Maps a token to a unit-norm vector. Implementations must be deterministic.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual Eigen::VectorXd embed(const std::string& token) const = 0;
};

// Deterministic hashed random embeddings; the desk stand-in for a learned
// contextual scorer.
class HashedEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HashedEmbeddingBackend(int dim = 64, std::uint64_t seed = 0x9d5f) : dim_(dim), seed_(seed) {}

    Eigen::VectorXd embed(const std::string& token) const override {
        Rng rng(fnv1a64(token) ^ seed_);
        Eigen::VectorXd v(dim_);
        for (int i = 0; i < dim_; ++i) v[i] = rng.normal();
        const double norm = v.norm();
        return norm > 0 ? Eigen::VectorXd(v / norm) : v;
    }

private:
    int dim_;
    std::uint64_t seed_;
};

// One-hot embeddings over a growing token dictionary: cosine is 1 for equal
// tokens and 0 otherwise. Used for degenerate-case checks.
class ExactMatchBackend : public EmbeddingBackend {
public:
    Eigen::VectorXd embed(const std::string& token) const override {
        auto [it, inserted] = index_.emplace(token, index_.size());
        Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(index_.size()) + 1);
        v[static_cast<Eigen::Index>(it->second)] = 1.0;
        return v;
    }

private:
    mutable std::map<std::string, std::size_t> index_;
};

inline double embed_score(const std::string& reference, const std::string& hypothesis,
                          const EmbeddingBackend& backend) {
    const auto ref = tokenize_lower(reference);
    const auto hyp = tokenize_lower(hypothesis);
    if (ref.empty() && hyp.empty()) return 1.0;
    if (ref.empty() || hyp.empty()) return 0.0;
    std::vector<Eigen::VectorXd> ref_vecs, hyp_vecs;
    try {
        for (const auto& t : ref) ref_vecs.push_back(backend.embed(t));
        for (const auto& t : hyp) hyp_vecs.push_back(backend.embed(t));
    } catch (const std::exception& e) {
        throw MetricError(std::string("embed_score backend failure: ") + e.what());
    }
    auto cosine = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        const Eigen::Index n = std::min(a.size(), b.size());
        return a.head(n).dot(b.head(n));
    };
    // Greedy max matching; negative similarities clamp to zero so scores
    // stay inside [0, 1].
    double precision = 0.0;
    for (const auto& h : hyp_vecs) {
        double best = 0.0;
        for (const auto& r : ref_vecs) best = std::max(best, cosine(h, r));
        precision += best;
    }
    precision /= static_cast<double>(hyp_vecs.size());
    double recall = 0.0;
    for (const auto& r : ref_vecs) {
        double best = 0.0;
        for (const auto& h : hyp_vecs) best = std::max(best, cosine(r, h));
        recall += best;
    }
    recall /= static_cast<double>(ref_vecs.size());
    return detail::f1(precision, recall);
}

// ---------------------------------------------------------------------------
// Classification metrics
// ---------------------------------------------------------------------------

enum class ClassificationMode { Binary, PerClass };

inline ClassificationScores classification_scores(const std::vector<SeverityLevel>& pred,
                                                  const std::vector<SeverityLevel>& gold,
                                                  ClassificationMode mode) {
    if (pred.size() != gold.size())
        throw ValidationError("classification_scores: length mismatch");
    if (pred.empty()) throw ValidationError("classification_scores: empty input");

    std::vector<int> classes;
    std::vector<int> p(pred.size()), g(gold.size());
    if (mode == ClassificationMode::Binary) {
        classes = {0, 1};  // 1 = depressed, 0 = control
        for (std::size_t i = 0; i < pred.size(); ++i) {
            p[i] = pred[i].binary ? 1 : 0;
            g[i] = gold[i].binary ? 1 : 0;
        }
    } else {
        classes = {0, 1, 2, 3};
        for (std::size_t i = 0; i < pred.size(); ++i) {
            p[i] = pred[i].value;
            g[i] = gold[i].value;
        }
    }

    ClassificationScores out;
    double sum_p = 0.0, sum_r = 0.0, sum_f = 0.0;
    for (int cls : classes) {
        long tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i] == cls && g[i] == cls) ++tp;
            else if (p[i] == cls) ++fp;
            else if (g[i] == cls) ++fn;
        }
        // Zero denominators score 0.
        const double prec = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        const double rec = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        const double f = detail::f1(prec, rec);
        out.per_class_f1[cls] = f;
        sum_p += prec;
        sum_r += rec;
        sum_f += f;
    }
    const double k = static_cast<double>(classes.size());
    out.precision = sum_p / k;
    out.recall = sum_r / k;
    out.macro_f1 = sum_f / k;
    return out;
}

// ---------------------------------------------------------------------------
// Fleiss' kappa
// ---------------------------------------------------------------------------

struct AgreementResult {
    double kappa = 0.0;
    Eigen::MatrixXd pairwise_iou;  // mean token-set IoU per rater pair
};

// Standard Fleiss' kappa over a subjects x categories count table. Every row
// must sum to the same number of raters.
inline double fleiss_kappa(const std::vector<std::vector<long>>& table) {
    if (table.size() < 2) throw ValidationError("fleiss_kappa: need >= 2 subjects");
    const std::size_t k = table[0].size();
    long raters = 0;
    for (long c : table[0]) raters += c;
    if (raters < 2) throw ValidationError("fleiss_kappa: need >= 2 raters");

    const double n = static_cast<double>(table.size());
    const double r = static_cast<double>(raters);
    std::vector<double> category_totals(k, 0.0);
    double p_bar = 0.0;
    for (const auto& row : table) {
        if (row.size() != k) throw ValidationError("fleiss_kappa: ragged table");
        long row_sum = 0;
        double sq = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            row_sum += row[j];
            sq += static_cast<double>(row[j]) * static_cast<double>(row[j]);
            category_totals[j] += static_cast<double>(row[j]);
        }
        if (row_sum != raters) throw ValidationError("fleiss_kappa: uneven rater counts");
        p_bar += (sq - r) / (r * (r - 1.0));
    }
    p_bar /= n;
    double pe = 0.0;
    for (double total : category_totals) {
        const double pj = total / (n * r);
        pe += pj * pj;
    }
    if (1.0 - pe < 1e-12) return 1.0;  // all mass in one category: full agreement
    return (p_bar - pe) / (1.0 - pe);
}

namespace detail {

inline std::set<std::string> token_set(const std::string& text) {
    const auto tokens = tokenize_lower(text);
    return std::set<std::string>(tokens.begin(), tokens.end());
}

inline double iou(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    long inter = 0;
    for (const auto& t : a) inter += b.count(t) ? 1 : 0;
    const long uni = static_cast<long>(a.size() + b.size()) - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

}  // namespace detail

// Per subject, raters whose pairwise token-set IoU exceeds `threshold` are
// single-link clustered; cluster ids become categorical ratings for the
// standard Fleiss formula. Cluster ids are canonicalized by descending
// cluster size so the result is invariant under rater relabeling. An empty
// summary is always its own singleton cluster.
inline AgreementResult fleiss_kappa_iou(const std::vector<std::vector<std::string>>& annotations,
                                        double threshold = 0.5) {
    if (annotations.size() < 2) throw ValidationError("fleiss_kappa_iou: need >= 2 subjects");
    const std::size_t raters = annotations[0].size();
    if (raters < 2) throw ValidationError("fleiss_kappa_iou: need >= 2 raters");

    AgreementResult result;
    result.pairwise_iou = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(raters),
                                                static_cast<Eigen::Index>(raters));
    std::vector<std::vector<long>> table;
    for (const auto& subject : annotations) {
        if (subject.size() != raters)
            throw ValidationError("fleiss_kappa_iou: uneven rater count across subjects");
        std::vector<std::set<std::string>> sets;
        for (const auto& text : subject) sets.push_back(detail::token_set(text));

        // Union-find single-link clustering over the IoU graph.
        std::vector<std::size_t> parent(raters);
        for (std::size_t i = 0; i < raters; ++i) parent[i] = i;
        std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (std::size_t i = 0; i < raters; ++i)
            for (std::size_t j = i + 1; j < raters; ++j) {
                const double score = detail::iou(sets[i], sets[j]);
                result.pairwise_iou(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
                    score;
                result.pairwise_iou(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) +=
                    score;
                if (score > threshold && !sets[i].empty() && !sets[j].empty())
                    parent[find(i)] = find(j);
            }

        std::map<std::size_t, std::vector<std::size_t>> clusters;
        for (std::size_t i = 0; i < raters; ++i) clusters[find(i)].push_back(i);
        std::vector<std::pair<std::size_t, std::size_t>> order;  // (size, min rater)
        for (const auto& [root, members] : clusters) order.emplace_back(members.size(), members[0]);
        std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });

        std::vector<long> row(raters, 0);
        std::size_t category = 0;
        for (const auto& [size, min_rater] : order) row[category++] = static_cast<long>(size);
        table.push_back(std::move(row));
    }
    result.pairwise_iou /= static_cast<double>(annotations.size());
    for (std::size_t i = 0; i < raters; ++i)
        result.pairwise_iou(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
    result.kappa = fleiss_kappa(table);
    return result;
}

}  // namespace phqmml
