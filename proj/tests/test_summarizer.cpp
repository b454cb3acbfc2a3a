#include <catch2/catch_amalgamated.hpp>

#include "phqmml/summarizer.hpp"
#include "testutil.hpp"

using namespace phqmml;

namespace {

Utterance utt(int index, Speaker sp, const std::string& text) {
    Utterance u;
    u.index = index;
    u.speaker = sp;
    u.text = text;
    u.start_time = index;
    u.stop_time = index + 1.0;
    return u;
}

std::vector<Utterance> small_dialogue() {
    return {
        utt(0, Speaker::Interviewer, "how have you been sleeping"),
        utt(1, Speaker::Participant, "i sleep badly"),
        utt(2, Speaker::Interviewer, "how is your energy"),
        utt(3, Speaker::Participant, "i feel tired all day"),
    };
}

Vocab vocab_for(const std::vector<Utterance>& dialogue) {
    Vocab v;
    v.add(speaker_mark(Speaker::Interviewer));
    v.add(speaker_mark(Speaker::Participant));
    v.add(item_tag(PhqItem::NONE));
    for (PhqItem it : kPhqItems) v.add(item_tag(it));
    for (const Utterance& u : dialogue)
        for (const std::string& t : split_ws(u.text)) v.add(t);
    return v;
}

BackendConfig tiny_config(int vocab_size) {
    BackendConfig cfg;
    cfg.vocab_size = vocab_size;
    cfg.hidden = 16;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.ffn_mult = 2;
    cfg.max_input_tokens = 128;
    cfg.max_output_tokens = 24;
    return cfg;
}

}  // namespace

TEST_CASE("serialize_input renders speaker, text, and item tag") {
    const std::vector<Utterance> dialogue = {utt(0, Speaker::Participant, "i sleep badly")};
    const Vocab v = vocab_for(dialogue);
    const SerializedInput in = serialize_input(dialogue, {PhqItem::SD}, v, 128);
    REQUIRE(in.utterance_spans.size() == 1);
    CHECK(in.utterance_spans[0] == std::pair<int, int>{0, 5});
    CHECK(in.tokens.size() == 5);
    CHECK(v.token(in.tokens.front()) == "PARTICIPANT:");
    CHECK(v.token(in.tokens.back()) == "[ITEM=SD]");
    bool has_unk = false;
    for (int t : in.tokens) has_unk = has_unk || t == Vocab::kUnk;
    CHECK_FALSE(has_unk);
}

TEST_CASE("serialize_input validates label length") {
    CHECK_THROWS_AS(serialize_input(small_dialogue(), {PhqItem::SD}, Vocab(), 128),
                    std::invalid_argument);
    CHECK_THROWS_AS(serialize_input({}, {}, Vocab(), 128), std::invalid_argument);
}

TEST_CASE("a label change touches only that utterance's span") {
    const auto dialogue = small_dialogue();
    const Vocab v = vocab_for(dialogue);
    std::vector<PhqItem> labels_a(4, PhqItem::NONE);
    std::vector<PhqItem> labels_b = labels_a;
    labels_b[3] = PhqItem::LOE;
    const SerializedInput a = serialize_input(dialogue, labels_a, v, 128);
    const SerializedInput b = serialize_input(dialogue, labels_b, v, 128);
    REQUIRE(a.tokens.size() == b.tokens.size());
    const auto [s3, e3] = a.utterance_spans[3];
    for (std::size_t i = 0; i < a.tokens.size(); ++i) {
        const bool inside = static_cast<int>(i) >= s3 && static_cast<int>(i) < e3;
        if (!inside) CHECK(a.tokens[i] == b.tokens[i]);
    }
    CHECK(a.tokens != b.tokens);
}

TEST_CASE("serialize_input drops whole utterances from the front") {
    const auto dialogue = small_dialogue();
    const Vocab v = vocab_for(dialogue);
    const std::vector<PhqItem> labels(4, PhqItem::NONE);
    // Utterances have 7, 5, 6, 7 tokens; budget 14 keeps the last two.
    const SerializedInput in = serialize_input(dialogue, labels, v, 14);
    CHECK(in.dropped_utterances == 2);
    REQUIRE(in.utterance_spans.size() == 2);
    CHECK(in.tokens.size() == 13);
    CHECK(v.token(in.tokens[0]) == "INTERVIEWER:");
}

TEST_CASE("serialize_input is injective over generated dialogues") {
    const Corpus c = generate_synthetic(16, 41);
    const Vocab v = build_vocab(c);
    std::set<std::vector<int>> seen;
    std::size_t n = 0;
    for (const auto* split : {&c.train, &c.dev, &c.test})
        for (const Sample& s : *split) {
            const SerializedInput in =
                serialize_input(s.dialogue, *s.truth.utterance_items, v, 6000);
            seen.insert(in.tokens);
            ++n;
        }
    CHECK(seen.size() == n);
}

TEST_CASE("encode preserves token count and is deterministic") {
    const Corpus c = generate_synthetic(4, 9);
    const Vocab v = build_vocab(c);
    ad::ParamStore store;
    Rng rng(77);
    SummarizerModel model(store, tiny_config(v.size()), rng);

    const Sample& s = c.train[0];
    const SerializedInput in = serialize_input(s.dialogue, *s.truth.utterance_items, v, 128);
    const EncoderStates states = model.encode(in);
    CHECK(states.token_states.rows() == static_cast<Eigen::Index>(in.tokens.size()));
    CHECK(states.token_states.cols() == 16);

    const EncoderStates again = model.encode(in);
    CHECK(states.token_states == again.token_states);
}

TEST_CASE("permuting utterances changes the encoder states") {
    const auto dialogue = small_dialogue();
    const Vocab v = vocab_for(dialogue);
    ad::ParamStore store;
    Rng rng(78);
    SummarizerModel model(store, tiny_config(v.size()), rng);

    auto swapped = dialogue;
    std::swap(swapped[1], swapped[3]);
    swapped[1].index = 1;
    swapped[3].index = 3;
    const std::vector<PhqItem> labels(4, PhqItem::NONE);
    const Mat a = model.encode(serialize_input(dialogue, labels, v, 128)).token_states;
    const Mat b = model.encode(serialize_input(swapped, labels, v, 128)).token_states;
    REQUIRE(a.rows() == b.rows());
    CHECK((a - b).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("classify_items with zero head is uniform") {
    EncoderStates states;
    states.token_states = Mat::Random(6, 8);
    states.utterance_spans = {{0, 3}, {3, 6}};
    ItemClassifierHead head{Mat::Zero(8, kNumItemClasses), Mat::Zero(1, kNumItemClasses)};
    const Mat probs = classify_items(states, head);
    REQUIRE(probs.rows() == 2);
    for (Eigen::Index r = 0; r < probs.rows(); ++r)
        for (Eigen::Index c = 0; c < probs.cols(); ++c)
            CHECK(probs(r, c) == Catch::Approx(1.0 / 9.0));
}

TEST_CASE("classify_items rows are distributions") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        EncoderStates states;
        states.token_states = ad::normal_init(10, 8, 1.0, rng);
        states.utterance_spans = {{0, 4}, {4, 7}, {7, 10}};
        ItemClassifierHead head{ad::normal_init(8, kNumItemClasses, 1.0, rng),
                                ad::normal_init(1, kNumItemClasses, 1.0, rng)};
        const Mat probs = classify_items(states, head);
        for (Eigen::Index r = 0; r < probs.rows(); ++r) {
            CHECK(probs.row(r).sum() == Catch::Approx(1.0).margin(1e-6));
            CHECK(probs.row(r).minCoeff() >= 0.0);
        }
    }
}

TEST_CASE("classify_items matches a hand-computed softmax") {
    EncoderStates states;
    states.token_states = Mat(2, 2);
    states.token_states << 1.0, 2.0, 3.0, 4.0;  // pooled = (2, 3)
    states.utterance_spans = {{0, 2}};
    ItemClassifierHead head{Mat::Zero(2, kNumItemClasses), Mat::Zero(1, kNumItemClasses)};
    head.weight(0, 0) = 1.0;  // logit0 = pooled[0] = 2
    head.weight(1, 1) = 1.0;  // logit1 = pooled[1] = 3
    const Mat probs = classify_items(states, head);
    const double z = std::exp(2.0) + std::exp(3.0) + 7.0 * std::exp(0.0);
    CHECK(probs(0, 0) == Catch::Approx(std::exp(2.0) / z).epsilon(1e-12));
    CHECK(probs(0, 1) == Catch::Approx(std::exp(3.0) / z).epsilon(1e-12));
    CHECK(probs(0, 5) == Catch::Approx(1.0 / z).epsilon(1e-12));
}

TEST_CASE("classify_items rejects empty spans") {
    EncoderStates states;
    states.token_states = Mat::Random(4, 8);
    states.utterance_spans = {{2, 2}};
    ItemClassifierHead head{Mat::Zero(8, kNumItemClasses), Mat::Zero(1, kNumItemClasses)};
    CHECK_THROWS_AS(classify_items(states, head), ValidationError);
}

TEST_CASE("ic_loss analytic values") {
    Mat one_hot = Mat::Zero(3, kNumItemClasses);
    one_hot(0, item_index(PhqItem::SD)) = 1.0;
    one_hot(1, item_index(PhqItem::NONE)) = 1.0;
    one_hot(2, item_index(PhqItem::AC)) = 1.0;
    CHECK(ic_loss(one_hot, {PhqItem::SD, PhqItem::NONE, PhqItem::AC}) ==
          Catch::Approx(0.0).margin(1e-12));

    const Mat uniform = Mat::Constant(4, kNumItemClasses, 1.0 / 9.0);
    CHECK(ic_loss(uniform, {PhqItem::LOI, PhqItem::NONE, PhqItem::PC, PhqItem::FD}) ==
          Catch::Approx(4.0 * std::log(9.0)));

    CHECK_THROWS_AS(ic_loss(uniform, {PhqItem::LOI}), ValidationError);
}

TEST_CASE("ic_loss matches a scalar recomputation on random rows") {
    Rng rng(88);
    Mat probs(3, kNumItemClasses);
    for (Eigen::Index r = 0; r < 3; ++r) {
        double total = 0.0;
        for (Eigen::Index c = 0; c < kNumItemClasses; ++c) {
            probs(r, c) = rng.uniform(0.01, 1.0);
            total += probs(r, c);
        }
        probs.row(r) /= total;
    }
    const std::vector<PhqItem> gold = {PhqItem::SD, PhqItem::NONE, PhqItem::CP};
    double expected = 0.0;
    expected -= std::log(probs(0, item_index(PhqItem::SD)));
    expected -= std::log(probs(1, item_index(PhqItem::NONE)));
    expected -= std::log(probs(2, item_index(PhqItem::CP)));
    CHECK(ic_loss(probs, gold) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ss_loss is m*ln(V) under a uniform output distribution") {
    const Corpus c = generate_synthetic(4, 31);
    const Vocab v = build_vocab(c);
    ad::ParamStore store;
    Rng rng(3);
    SummarizerModel model(store, tiny_config(v.size()), rng);
    // Zeroing the output projection makes every step uniform over the vocab.
    store.at(store.id_of("summ.out.w")).value.setZero();
    store.at(store.id_of("summ.out.b")).value.setZero();

    const Sample& s = c.train[0];
    const SerializedInput in = serialize_input(s.dialogue, *s.truth.utterance_items, v, 128);
    SummaryTokens target;
    target.ids = v.encode(split_ws(s.truth.summary.rendered_text));
    target.ids.push_back(Vocab::kEos);
    const double loss = model.ss_loss(in, target);
    CHECK(loss == Catch::Approx(static_cast<double>(target.ids.size()) *
                                std::log(static_cast<double>(v.size()))));
}

TEST_CASE("ss_loss matches a token-by-token recomputation") {
    const Corpus c = generate_synthetic(4, 32);
    const Vocab v = build_vocab(c);
    ad::ParamStore store;
    Rng rng(4);
    SummarizerModel model(store, tiny_config(v.size()), rng);

    const Sample& s = c.train[0];
    const SerializedInput in = serialize_input(s.dialogue, *s.truth.utterance_items, v, 128);
    SummaryTokens target;
    target.ids = v.encode(split_ws(s.truth.summary.rendered_text));
    if (target.ids.size() > 12) target.ids.resize(12);
    target.ids.push_back(Vocab::kEos);

    ad::Graph g(&store, false);
    const auto enc = model.encode_node(g, in.tokens);
    std::vector<int> dec_inputs;
    dec_inputs.push_back(Vocab::kBos);
    dec_inputs.insert(dec_inputs.end(), target.ids.begin(), target.ids.end() - 1);
    const Mat lp = g.value(model.decoder_logprobs_node(g, enc, dec_inputs));
    double expected = 0.0;
    for (std::size_t j = 0; j < target.ids.size(); ++j)
        expected -= lp(static_cast<Eigen::Index>(j), target.ids[j]);
    CHECK(model.ss_loss(in, target) == Catch::Approx(expected).epsilon(1e-10));
}

TEST_CASE("ss_loss rejects bad targets") {
    const Corpus c = generate_synthetic(4, 33);
    const Vocab v = build_vocab(c);
    ad::ParamStore store;
    Rng rng(5);
    SummarizerModel model(store, tiny_config(v.size()), rng);
    const SerializedInput in =
        serialize_input(c.train[0].dialogue, *c.train[0].truth.utterance_items, v, 128);
    CHECK_THROWS_AS(model.ss_loss(in, SummaryTokens{{}}), ValidationError);
    CHECK_THROWS_AS(model.ss_loss(in, SummaryTokens{{v.size() + 5}}), ValidationError);
}

TEST_CASE("greedy decoding is deterministic and beam width 1 matches it") {
    const Corpus c = generate_synthetic(4, 34);
    const Vocab v = build_vocab(c);
    ad::ParamStore store;
    Rng rng(6);
    BackendConfig cfg = tiny_config(v.size());
    cfg.max_output_tokens = 8;
    SummarizerModel model(store, cfg, rng);

    const SerializedInput in =
        serialize_input(c.train[0].dialogue, *c.train[0].truth.utterance_items, v, 128);
    const EncoderStates states = model.encode(in);
    const SummaryTokens a = model.generate_summary(states);
    const SummaryTokens b = model.generate_summary(states);
    CHECK(a.ids == b.ids);
    REQUIRE(!a.ids.empty());
    CHECK(a.ids.back() == Vocab::kEos);
    CHECK(a.ids.size() <= static_cast<std::size_t>(cfg.max_output_tokens) + 1);

    const SummaryTokens greedy = model.generate_greedy(states);
    CHECK(greedy.ids == a.ids);
}

TEST_CASE("teacher-forced perfect logprobs give zero loss through pick_nll") {
    ad::ParamStore store;
    ad::Graph g(&store, false);
    // log p = 0 at the target ids means probability one.
    Mat lp = Mat::Constant(3, 5, -50.0);
    lp(0, 2) = 0.0;
    lp(1, 4) = 0.0;
    lp(2, 1) = 0.0;
    const auto loss = g.pick_nll(g.input(lp), {2, 4, 1});
    CHECK(g.scalar(loss) == 0.0);
}

TEST_CASE("text loss gradients match finite differences on sampled coordinates") {
    const Corpus c = generate_synthetic(4, 35);
    const Vocab v = build_vocab(c);
    ad::ParamStore store;
    Rng rng(7);
    SummarizerModel model(store, tiny_config(v.size()), rng);

    const Sample& s = c.train[0];
    const SerializedInput in = serialize_input(s.dialogue, *s.truth.utterance_items, v, 128);
    std::vector<PhqItem> gold(in.utterance_spans.size(), PhqItem::NONE);
    for (std::size_t i = in.dropped_utterances; i < s.truth.utterance_items->size(); ++i)
        gold[i - in.dropped_utterances] = (*s.truth.utterance_items)[i];
    SummaryTokens target;
    target.ids = v.encode(split_ws(s.truth.summary.rendered_text));
    if (target.ids.size() > 10) target.ids.resize(10);
    target.ids.push_back(Vocab::kEos);

    auto run = [&](bool back) {
        ad::Graph g(&store, back);
        const auto enc = model.encode_node(g, in.tokens);
        const auto ic = model.ic_nll_node(g, enc, in.utterance_spans, gold);
        const auto ss = model.ss_nll_node(g, enc, target);
        const auto total = g.add_scaled({{ic, 1.0}, {ss, 1.0}});
        if (back) g.backward(total);
        return g.scalar(total);
    };

    store.zero_grads();
    run(true);

    Rng pick(1001);
    int checked = 0;
    double worst = 0.0;
    const double eps = 1e-5;
    while (checked < 25) {
        const int pi = static_cast<int>(pick.uniform_int(0, static_cast<long>(store.size()) - 1));
        ad::Param& p = store.at(pi);
        if (p.value.size() == 0) continue;
        const Eigen::Index ci = static_cast<Eigen::Index>(
            pick.uniform_int(0, static_cast<long>(p.value.size()) - 1));
        const double analytic = p.grad.data()[ci];
        const double saved = p.value.data()[ci];
        p.value.data()[ci] = saved + eps;
        const double up = run(false);
        p.value.data()[ci] = saved - eps;
        const double down = run(false);
        p.value.data()[ci] = saved;
        const double fd = (up - down) / (2.0 * eps);
        const double rel =
            std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-4});
        worst = std::max(worst, rel);
        ++checked;
    }
    CHECK(worst <= 1e-3);
}
