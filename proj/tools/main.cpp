// Command-line front end: corpus generation, utterance labeling, training,
// evaluation, ablations, training-free prompting runs, annotation agreement,
// and report rendering.

#include <CLI11.hpp>

#include <iostream>

#include "phqmml/harness.hpp"
#include "phqmml/llm_http.hpp"

using namespace phqmml;

namespace {

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << '\n';
}

std::vector<std::shared_ptr<LlmClient>> make_label_clients(const std::string& spec) {
    std::vector<std::shared_ptr<LlmClient>> clients;
    for (const std::string& raw : split_char(spec, ',')) {
        const std::string name = trim(raw);
        if (name.empty()) continue;
        if (name == "mock") clients.push_back(std::make_shared<HeuristicLabelClient>());
        else clients.push_back(std::make_shared<HttpLlmClient>(name));
    }
    if (clients.empty()) throw ConfigError("no labeling clients given");
    return clients;
}

int cmd_gen_synthetic(std::size_t count, std::uint64_t seed, const std::string& out) {
    const Corpus corpus = generate_synthetic(count, seed);
    save_corpus(corpus, out);
    const SplitSizes sizes = split_counts(corpus);
    std::cout << "wrote " << count << " samples to " << out << " (train " << sizes.train
              << ", dev " << sizes.dev << ", test " << sizes.test << ")\n";
    return 0;
}

int cmd_label(const std::string& corpus_dir, const std::string& clients_spec,
              const std::string& out_dir) {
    const Corpus corpus = load_corpus(corpus_dir);
    auto clients = make_label_clients(clients_spec);
    std::vector<LabelAuditEntry> audit;
    std::filesystem::create_directories(out_dir);
    std::size_t labeled = 0;
    const std::pair<const char*, const std::vector<Sample>*> splits[] = {
        {"train", &corpus.train}, {"dev", &corpus.dev}, {"test", &corpus.test}};
    for (const auto& [split, samples] : splits) {
        for (const Sample& s : *samples) {
            const ItemLabelSequence labels = label_utterances(s, clients, &audit);
            const std::filesystem::path dir =
                std::filesystem::path(out_dir) / split / s.id;
            std::filesystem::create_directories(dir);
            nlohmann::json j;
            j["labels"] = nlohmann::json::array();
            for (PhqItem item : labels.labels) j["labels"].push_back(item_code(item));
            write_json_file(j, (dir / "labels.json").string());
            ++labeled;
        }
    }
    write_label_audit(audit, std::filesystem::path(out_dir) / "audit.jsonl");
    std::cout << "labeled " << labeled << " samples with " << clients.size()
              << " client(s); audit log at " << out_dir << "/audit.jsonl\n";
    return 0;
}

RunConfig resolve_config(const std::string& config_path, const std::string& corpus_dir,
                         const std::string& out_dir) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (!corpus_dir.empty()) cfg.corpus_dir = corpus_dir;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (cfg.corpus_dir.empty()) throw ConfigError("a corpus is required (--corpus or config)");
    cfg.validate();
    return cfg;
}

int cmd_train(const std::string& config_path, const std::string& corpus_dir,
              const std::string& out_dir) {
    const RunConfig cfg = resolve_config(config_path, corpus_dir, out_dir);
    const Corpus corpus = load_corpus(cfg.corpus_dir);
    const TrainOutput out = train(corpus, cfg);
    const nlohmann::json report = report_to_json(out.report);
    std::cout << render_report(report);
    if (!cfg.out_dir.empty())
        std::cout << "checkpoint and report written under " << cfg.out_dir << "\n";
    return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& corpus_dir,
                 const std::string& split, const std::string& out_file) {
    auto pipeline = Pipeline::load(checkpoint);
    const Corpus corpus = load_corpus(corpus_dir);
    const HashedEmbeddingBackend backend;
    const EvalResult result = pipeline->evaluate(corpus.split(split), split, backend);
    nlohmann::json j = eval_to_json(result);
    std::cout << render_eval_table(j, "evaluate");
    if (result.modality_fallback)
        std::cout << "note: some samples lacked modalities and were zero-substituted\n";
    if (!out_file.empty()) write_json_file(j, out_file);
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& corpus_dir,
               const std::string& drop_spec, const std::string& out_dir) {
    RunConfig cfg = resolve_config(config_path, corpus_dir, out_dir);
    std::set<AblationTarget> drop;
    for (const std::string& part : split_char(drop_spec, ','))
        if (!trim(part).empty()) drop.insert(ablation_target_from_name(trim(part)));
    const Corpus corpus = load_corpus(cfg.corpus_dir);
    const TrainOutput out = ablate(corpus, cfg, drop);
    std::cout << render_report(report_to_json(out.report));
    return 0;
}

int cmd_phqcot(const std::string& corpus_dir, const std::string& split,
               const std::string& strategy_name_in, int shots, const std::string& client_name,
               const std::string& cache_dir, const std::string& out_file) {
    const Corpus corpus = load_corpus(corpus_dir);
    const auto strategy = strategy_from_name(strategy_name_in);
    if (!strategy) throw ConfigError("unknown strategy '" + strategy_name_in + "'");

    std::shared_ptr<LlmClient> client;
    if (client_name == "mock" || client_name == "mock-oracle") client = make_oracle_client(corpus);
    else if (client_name == "mock-zero") client = make_zero_client(corpus);
    else if (client_name == "mock-improving") client = make_improving_client(corpus);
    else client = std::make_shared<HttpLlmClient>(client_name);

    const PromptSpec spec = make_prompt_spec(corpus, *strategy, shots);
    const HashedEmbeddingBackend backend;
    std::optional<std::filesystem::path> cache;
    if (!cache_dir.empty()) cache = cache_dir;
    const PhqCotReport report =
        run_evaluation(corpus.split(split), *client, spec, backend, cache);
    const nlohmann::json j = phqcot_report_to_json(report);
    std::cout << render_report(j);
    if (!report.valid)
        std::cout << "warning: run invalid, " << report.failed << "/" << report.total
                  << " samples failed to parse\n";
    if (!out_file.empty()) write_json_file(j, out_file);
    return 0;
}

int cmd_agreement(const std::string& annotations_file, double threshold,
                  const std::string& out_file) {
    const nlohmann::json j = read_json_file(annotations_file);
    std::vector<std::vector<std::string>> subjects;
    for (const auto& subject : j) {
        std::vector<std::string> raters;
        for (const auto& text : subject) raters.push_back(text.get<std::string>());
        subjects.push_back(std::move(raters));
    }
    const AgreementResult result = fleiss_kappa_iou(subjects, threshold);
    std::cout << "fleiss kappa (IoU > " << threshold << "): " << std::fixed
              << std::setprecision(4) << result.kappa << "\n";
    std::cout << "mean pairwise IoU:\n";
    for (Eigen::Index r = 0; r < result.pairwise_iou.rows(); ++r) {
        std::cout << " ";
        for (Eigen::Index c = 0; c < result.pairwise_iou.cols(); ++c)
            std::cout << " " << std::setw(6) << std::setprecision(3)
                      << result.pairwise_iou(r, c);
        std::cout << "\n";
    }
    if (!out_file.empty()) {
        nlohmann::json out;
        out["kappa"] = result.kappa;
        out["threshold"] = threshold;
        std::vector<std::vector<double>> matrix;
        for (Eigen::Index r = 0; r < result.pairwise_iou.rows(); ++r) {
            std::vector<double> row;
            for (Eigen::Index c = 0; c < result.pairwise_iou.cols(); ++c)
                row.push_back(result.pairwise_iou(r, c));
            matrix.push_back(std::move(row));
        }
        out["pairwise_iou"] = matrix;
        write_json_file(out, out_file);
    }
    return 0;
}

int cmd_report(const std::string& in_file) {
    std::cout << render_report(read_json_file(in_file));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PHQ-aware multimodal depression recognition toolkit"};
    app.require_subcommand(1);

    // gen-synthetic
    std::size_t gen_count = 76;
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-synthetic", "generate a deterministic synthetic corpus");
    gen->add_option("--count", gen_count, "number of samples (>= 4)")->required();
    gen->add_option("--seed", gen_seed, "generator seed")->required();
    gen->add_option("--out", gen_out, "output corpus directory")->required();

    // label
    std::string label_corpus, label_clients = "mock", label_out;
    auto* label = app.add_subcommand("label", "assign PHQ-8 item labels per utterance");
    label->add_option("--corpus", label_corpus, "corpus directory")->required();
    label->add_option("--clients", label_clients, "comma list: mock or live client names");
    label->add_option("--out", label_out, "output labels directory")->required();

    // train
    std::string train_config, train_corpus, train_out;
    auto* tr = app.add_subcommand("train", "train the multimodal multi-task model");
    tr->add_option("--config", train_config, "JSON run config");
    tr->add_option("--corpus", train_corpus, "corpus directory (overrides config)");
    tr->add_option("--out", train_out, "run output directory (overrides config)");

    // evaluate
    std::string eval_ckpt, eval_corpus, eval_split = "dev", eval_out;
    auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint on a split");
    ev->add_option("--checkpoint", eval_ckpt, "checkpoint directory")->required();
    ev->add_option("--corpus", eval_corpus, "corpus directory")->required();
    ev->add_option("--split", eval_split, "train|dev|test");
    ev->add_option("--out", eval_out, "write the evaluation report JSON here");

    // ablate
    std::string ab_config, ab_corpus, ab_drop, ab_out;
    auto* ab = app.add_subcommand("ablate", "train with dropped modalities or IC objective");
    ab->add_option("--config", ab_config, "JSON run config");
    ab->add_option("--corpus", ab_corpus, "corpus directory (overrides config)");
    ab->add_option("--drop", ab_drop, "comma list of audio, vision, ic")->required();
    ab->add_option("--out", ab_out, "run output directory (overrides config)");

    // phqcot-run
    std::string pc_corpus, pc_split = "test", pc_strategy = "phqcot", pc_client = "mock";
    std::string pc_cache, pc_out;
    int pc_shots = 0;
    auto* pc = app.add_subcommand("phqcot-run", "training-free prompting evaluation");
    pc->add_option("--corpus", pc_corpus, "corpus directory")->required();
    pc->add_option("--split", pc_split, "train|dev|test");
    pc->add_option("--strategy", pc_strategy, "standard|cot|phqcot");
    pc->add_option("--shots", pc_shots, "0, 2 or 4");
    pc->add_option("--client", pc_client,
                   "mock, mock-zero, mock-improving, or a live client name");
    pc->add_option("--cache", pc_cache, "response cache directory");
    pc->add_option("--out", pc_out, "write the report JSON here");

    // agreement
    std::string ag_file, ag_out;
    double ag_threshold = 0.5;
    auto* ag = app.add_subcommand("agreement", "Fleiss kappa over rater summaries");
    ag->add_option("--annotations", ag_file,
                   "JSON: array of subjects, each an array of rater texts")
        ->required();
    ag->add_option("--threshold", ag_threshold, "IoU consistency threshold");
    ag->add_option("--out", ag_out, "write the agreement JSON here");

    // report
    std::string rp_in;
    auto* rp = app.add_subcommand("report", "render a report JSON as text tables");
    rp->add_option("--in", rp_in, "report JSON file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_synthetic(gen_count, gen_seed, gen_out);
        if (label->parsed()) return cmd_label(label_corpus, label_clients, label_out);
        if (tr->parsed()) return cmd_train(train_config, train_corpus, train_out);
        if (ev->parsed()) return cmd_evaluate(eval_ckpt, eval_corpus, eval_split, eval_out);
        if (ab->parsed()) return cmd_ablate(ab_config, ab_corpus, ab_drop, ab_out);
        if (pc->parsed())
            return cmd_phqcot(pc_corpus, pc_split, pc_strategy, pc_shots, pc_client, pc_cache,
                              pc_out);
        if (ag->parsed()) return cmd_agreement(ag_file, ag_threshold, ag_out);
        if (rp->parsed()) return cmd_report(rp_in);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
