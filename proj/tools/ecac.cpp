// ecac — emotion-cause analysis pipeline for conversation corpora.
//
// Subcommands follow the workflow order: stats -> build -> infer ->
// correct -> score, plus vocab/submit utilities. Every stage consumes the
// previous stage's files, so stages can be rerun independently.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecac/chain.hpp"
#include "ecac/corpus_json.hpp"
#include "ecac/dataset.hpp"
#include "ecac/evaluation.hpp"
#include "ecac/http_backend.hpp"
#include "ecac/span_correction.hpp"
#include "ecac/stats.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitBackend = 2;
constexpr int kExitIo = 3;

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ecac::IoError("cannot open output file: " + path);
    out << content;
    if (!out) throw ecac::IoError("failed writing " + path);
}

ecac::SchemaMapping schema_from(const std::string& path) {
    return path.empty() ? ecac::SchemaMapping{} : ecac::load_schema_mapping(path);
}

struct StatsArgs {
    std::string corpus;
    std::string schema;
    std::string predictions;
    std::string states;
    std::string out;
    std::string tsv;
    std::vector<std::string> tables;
    int max_delta = 4;
};

void cmd_stats(const StatsArgs& args) {
    std::cerr << "[config] stats corpus=" << args.corpus
              << (args.predictions.empty() ? "" : " predictions=" + args.predictions)
              << " max_delta=" << args.max_delta << '\n';
    const auto schema = schema_from(args.schema);
    const auto corpus = ecac::parse_corpus_file(args.corpus, schema);

    auto wants = [&](const std::string& table) {
        return args.tables.empty() || std::find(args.tables.begin(), args.tables.end(), table) != args.tables.end();
    };

    std::string human;
    std::string tsv;
    if (args.predictions.empty()) {
        if (wants("quant")) {
            const auto q = ecac::quantitative_stats(corpus);
            human += ecac::format_quant_table(q) + "\n";
            tsv += ecac::tsv_quant(q, "quant");
        }
        if (wants("distance")) {
            const auto d = ecac::distance_stats(corpus, args.max_delta);
            human += ecac::format_distance_table(d) + "\n";
            tsv += ecac::tsv_distance(d, "distance");
        }
        if (wants("matrix") || wants("caused_by")) {
            const auto m = ecac::state_cause_matrix(corpus, ecac::MatrixDirection::caused_by_speaker);
            human += ecac::format_matrix_table(m) + "\n";
            tsv += ecac::tsv_matrix(m, "caused_by");
        }
    } else {
        const auto predictions = ecac::read_pair_predictions(args.predictions);
        std::optional<std::vector<ecac::StatePrediction>> states;
        if (!args.states.empty()) states = ecac::read_state_predictions(args.states);
        const auto s = ecac::prediction_stats(predictions, corpus, states, args.max_delta);
        if (wants("quant")) {
            human += ecac::format_quant_table(s.quant) + "\n";
            tsv += ecac::tsv_quant(s.quant, "pred_quant");
        }
        if (wants("distance")) {
            human += ecac::format_distance_table(s.distance) + "\n";
            tsv += ecac::tsv_distance(s.distance, "pred_distance");
        }
        if (wants("caused_by") || wants("matrix")) {
            human += ecac::format_matrix_table(s.caused_by) + "\n";
            tsv += ecac::tsv_matrix(s.caused_by, "pred_caused_by");
        }
        if (wants("caused_on")) {
            human += ecac::format_matrix_table(s.caused_on) + "\n";
            tsv += ecac::tsv_matrix(s.caused_on, "pred_caused_on");
        }
    }
    std::cout << human;
    if (!args.out.empty()) write_text_file(args.out, human);
    if (!args.tsv.empty()) write_text_file(args.tsv, tsv);
}

struct BuildArgs {
    std::string corpus;
    std::string test_corpus;
    std::string out_dir;
    std::string schema;
    int k = 3;
    double ratio = 0.9;
    bool include_same_speaker_cross = false;
};

void cmd_build(const BuildArgs& args) {
    std::cerr << "[config] build corpus=" << args.corpus << " k=" << args.k << " ratio=" << args.ratio
              << " exclude_same_speaker_cross=" << (args.include_same_speaker_cross ? "off" : "on") << '\n';
    const bool exclude = !args.include_same_speaker_cross;
    const auto schema = schema_from(args.schema);
    const auto corpus = ecac::parse_corpus_file(args.corpus, schema);
    std::optional<ecac::Corpus> test_corpus;
    if (!args.test_corpus.empty()) test_corpus = ecac::parse_corpus_file(args.test_corpus, schema);

    const auto [train, dev] = ecac::split_train_dev(corpus, args.ratio);

    struct Part {
        std::string name;
        ecac::DatasetFile file;
    };
    std::vector<Part> parts;
    parts.push_back({"d_state.train", {"state", args.k, ecac::to_records(ecac::build_state_dataset(train, args.k))}});
    parts.push_back({"d_state.dev", {"state", args.k, ecac::to_records(ecac::build_state_dataset(dev, args.k))}});
    parts.push_back(
        {"d_cause.train", {"cause", args.k, ecac::to_records(ecac::build_cause_dataset(train, args.k, exclude))}});
    parts.push_back(
        {"d_cause.dev", {"cause", args.k, ecac::to_records(ecac::build_cause_dataset(dev, args.k, exclude))}});
    if (test_corpus) {
        parts.push_back(
            {"d_cause.test",
             {"cause", args.k, ecac::to_records(ecac::build_cause_dataset(*test_corpus, args.k, exclude))}});
    }

    std::filesystem::create_directories(args.out_dir);
    nlohmann::ordered_json manifest;
    manifest["k"] = args.k;
    manifest["ratio"] = args.ratio;
    manifest["exclude_same_speaker_cross"] = exclude;
    for (const auto& part : parts) {
        const auto path = (std::filesystem::path(args.out_dir) / (part.name + ".jsonl")).string();
        ecac::export_records(part.file, path);
        nlohmann::ordered_json info;
        info["entries"] = part.file.records.size();
        for (const auto& [label, count] : ecac::label_histogram(part.file)) info["classes"][label] = count;
        manifest["parts"][part.name] = std::move(info);
        std::cerr << part.name << ": " << part.file.records.size() << " entries\n";
    }
    write_text_file((std::filesystem::path(args.out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

struct InferArgs {
    std::string dataset;
    std::string kind = "cause_rr";
    std::string backend;
    std::string templates;
    std::string out_predictions;
    std::string out_transcripts;
    std::size_t concurrency = 1;
    int max_new_tokens = 128;
    double temperature = 1.0;
    std::size_t limit = 0;
};

void cmd_infer(const InferArgs& args) {
    std::cerr << "[config] infer dataset=" << args.dataset << " kind=" << args.kind
              << " concurrency=" << args.concurrency << " max_new_tokens=" << args.max_new_tokens
              << " temperature=" << args.temperature << '\n';
    const auto kind = ecac::chain_kind_from_string(args.kind);
    auto dataset = ecac::import_records(args.dataset);
    if (kind == ecac::ChainKind::state && dataset.kind != "state") {
        throw ecac::ValidationError("state chains need a state dataset (got kind '" + dataset.kind + "')");
    }
    if (kind != ecac::ChainKind::state && dataset.kind != "cause") {
        throw ecac::ValidationError("cause chains need a cause dataset (got kind '" + dataset.kind + "')");
    }
    if (args.limit > 0 && dataset.records.size() > args.limit) dataset.records.resize(args.limit);

    const auto templates = args.templates.empty() ? ecac::default_templates() : ecac::load_templates(args.templates);
    const auto config = ecac::load_backend_config(args.backend);
    const auto backend = ecac::make_backend(config);
    backend->health_check();

    ecac::GenerationParams params;
    params.max_new_tokens = args.max_new_tokens;
    params.temperature = args.temperature;
    const auto outcomes = ecac::run_batch(kind, dataset.records, *backend, args.concurrency, templates, params);

    ecac::write_transcripts(kind, dataset.records, outcomes, args.out_transcripts);
    if (kind == ecac::ChainKind::state) {
        ecac::write_state_predictions(ecac::state_predictions(dataset.records, outcomes), args.out_predictions);
    } else {
        ecac::write_pair_predictions(ecac::pair_predictions(dataset.records, outcomes), args.out_predictions);
    }

    std::size_t failed = 0;
    for (const auto& o : outcomes) {
        if (!o.result) ++failed;
    }
    std::cerr << "entries=" << outcomes.size() << " failed=" << failed << '\n';
    if (failed == outcomes.size() && !outcomes.empty()) {
        throw ecac::BackendError("every entry failed; see " + args.out_transcripts, 0, 0);
    }
}

struct CorrectArgs {
    std::string predictions;
    std::string out;
    std::string vocabulary;
    std::string corpus;
    std::string schema;
    std::string method = "vocab";
    std::string mode = "semantic";
    std::string diff;
    std::string save_vocabulary;
};

void cmd_correct(const CorrectArgs& args) {
    std::cerr << "[config] correct predictions=" << args.predictions << " method=" << args.method
              << " mode=" << args.mode << '\n';
    auto predictions = ecac::read_pair_predictions(args.predictions);

    ecac::AffixVocabulary vocab;
    if (args.method == "vocab") {
        if (!args.vocabulary.empty()) {
            vocab = ecac::load_vocabulary(args.vocabulary);
        } else if (!args.corpus.empty()) {
            auto built = ecac::build_vocabularies(ecac::parse_corpus_file(args.corpus, schema_from(args.schema)));
            for (const auto& w : built.warnings) std::cerr << "warning: " << w << '\n';
            vocab = std::move(built.vocabulary);
        } else {
            throw ecac::ValidationError(
                "no vocabulary available; pass --vocabulary FILE (see 'ecac vocab') or --corpus TRAIN_JSON");
        }
    } else if (args.method != "punct") {
        throw ecac::ValidationError("unknown correction method '" + args.method + "'");
    }
    const auto mode = args.mode == "literal" ? ecac::CorrectionMode::literal : ecac::CorrectionMode::semantic;
    if (args.mode != "literal" && args.mode != "semantic") {
        throw ecac::ValidationError("unknown correction mode '" + args.mode + "'");
    }

    std::string diff;
    std::size_t changed = 0;
    std::size_t fallbacks = 0;
    for (auto& p : predictions) {
        const std::string before = p.span;
        std::string after;
        bool fell_back = false;
        if (args.method == "vocab") {
            auto correction = ecac::correct_span_verbose(before, vocab, mode);
            after = std::move(correction.text);
            fell_back = correction.reverted;
        } else {
            after = ecac::default_punct_trim(before);
            if (after.empty()) {
                after = before;
                fell_back = true;
            }
        }
        if (after != before) {
            ++changed;
            diff += std::to_string(p.conversation_id) + "\t" + std::to_string(p.src_id) + "\t" +
                    std::to_string(p.tgt_id) + "\t" + before + "\t->\t" + after + "\n";
        } else if (fell_back) {
            ++fallbacks;
            diff += std::to_string(p.conversation_id) + "\t" + std::to_string(p.src_id) + "\t" +
                    std::to_string(p.tgt_id) + "\t" + before + "\t->\t(kept: correction emptied the span)\n";
        }
        p.span = after;
    }

    if (!args.save_vocabulary.empty() && args.method == "vocab") {
        ecac::save_vocabulary(vocab, args.save_vocabulary);
    }
    ecac::write_pair_predictions(predictions, args.out);
    if (!args.diff.empty()) write_text_file(args.diff, diff);
    std::cerr << "corrected=" << changed << " fallbacks=" << fallbacks << " of " << predictions.size() << '\n';
}

struct VocabArgs {
    std::string corpus;
    std::string out;
    std::string schema;
};

void cmd_vocab(const VocabArgs& args) {
    std::cerr << "[config] vocab corpus=" << args.corpus << '\n';
    auto built = ecac::build_vocabularies(ecac::parse_corpus_file(args.corpus, schema_from(args.schema)));
    for (const auto& w : built.warnings) std::cerr << "warning: " << w << '\n';
    ecac::save_vocabulary(built.vocabulary, args.out);
    std::cerr << "prefixes=" << built.vocabulary.prefixes.size() << " suffixes=" << built.vocabulary.suffixes.size()
              << '\n';
}

struct SubmitArgs {
    std::string predictions;
    std::string corpus;
    std::string out;
    std::string schema;
};

void cmd_submit(const SubmitArgs& args) {
    std::cerr << "[config] submit predictions=" << args.predictions << " corpus=" << args.corpus << '\n';
    const auto predictions = ecac::read_pair_predictions(args.predictions);
    const auto corpus = ecac::parse_corpus_file(args.corpus, schema_from(args.schema));
    const auto submission = ecac::format_submission(corpus, predictions, schema_from(args.schema));
    write_text_file(args.out, submission.dump(2) + "\n");
    std::cerr << "pairs=" << predictions.size() << '\n';
}

struct ScoreArgs {
    bool dev = false;
    std::string predictions;
    std::string gold;
    std::string transcripts;
    std::string dataset;
    std::string schema;
    std::string out;
    std::string tsv;
};

void cmd_score(const ScoreArgs& args) {
    if (args.dev) {
        std::cerr << "[config] score dev transcripts=" << args.transcripts << " dataset=" << args.dataset << '\n';
        if (args.transcripts.empty() || args.dataset.empty()) {
            throw ecac::ValidationError("--dev scoring needs --transcripts and --dataset");
        }
        const auto labels = ecac::read_transcript_labels(args.transcripts);
        const auto dataset = ecac::import_records(args.dataset);
        std::vector<ecac::Emotion> predicted;
        std::vector<ecac::Emotion> gold;
        std::size_t failed = 0;
        for (const auto& label : labels) {
            if (label.index >= dataset.records.size()) {
                throw ecac::ValidationError("transcript index " + std::to_string(label.index) +
                                            " is outside the dataset");
            }
            if (label.failed) {
                ++failed;
                continue;
            }
            const auto& record = dataset.records[label.index];
            if (record.labels.empty()) throw ecac::ValidationError("dataset record has no labels");
            const auto gold_label = ecac::emotion_from_string(record.labels.back());
            if (!gold_label) throw ecac::ValidationError("dataset record has label outside the emotion set");
            predicted.push_back(*label.label);
            gold.push_back(*gold_label);
        }
        const double f1 = ecac::score_dev_classification(predicted, gold);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * f1);
        std::string human = "F1_dev: " + std::string(buf) + " (entries=" + std::to_string(predicted.size()) +
                            ", failed=" + std::to_string(failed) + ")\n";
        std::cout << human;
        if (!args.out.empty()) write_text_file(args.out, human);
        if (!args.tsv.empty()) {
            std::snprintf(buf, sizeof(buf), "%.6f", f1);
            write_text_file(args.tsv, "score\tf1_dev\t" + std::string(buf) + "\n");
        }
        return;
    }

    std::cerr << "[config] score predictions=" << args.predictions << " gold=" << args.gold << '\n';
    if (args.predictions.empty() || args.gold.empty()) {
        throw ecac::ValidationError("pair scoring needs --predictions and --gold");
    }
    const auto predictions = ecac::read_pair_predictions(args.predictions);
    const auto corpus = ecac::parse_corpus_file(args.gold, schema_from(args.schema));
    for (const auto& p : predictions) {
        const auto* conv = corpus.find_conversation(p.conversation_id);
        if (conv == nullptr || conv->find_utterance(p.src_id) == nullptr ||
            conv->find_utterance(p.tgt_id) == nullptr) {
            throw ecac::ValidationError("prediction does not resolve in the gold corpus (conversation " +
                                        std::to_string(p.conversation_id) + ")");
        }
    }
    const auto report = ecac::score_pairs(predictions, corpus);
    const std::string human = ecac::format_score_report(report);
    std::cout << human;
    if (!args.out.empty()) write_text_file(args.out, human);
    if (!args.tsv.empty()) write_text_file(args.tsv, ecac::tsv_score_report(report));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"emotion-cause analysis pipeline for conversation corpora"};
    app.require_subcommand(1);

    StatsArgs stats_args;
    auto* stats = app.add_subcommand("stats", "corpus or prediction-side analysis reports");
    stats->add_option("--corpus", stats_args.corpus, "corpus JSON file")->required();
    stats->add_option("--schema", stats_args.schema, "schema mapping JSON file");
    stats->add_option("--predictions", stats_args.predictions, "pair predictions file (switches to prediction mode)");
    stats->add_option("--states", stats_args.states, "state predictions file (for unannotated corpora)");
    stats->add_option("--max-delta", stats_args.max_delta, "largest distance bucket")->capture_default_str();
    stats->add_option("--out", stats_args.out, "write the human-readable report here");
    stats->add_option("--tsv", stats_args.tsv, "write the machine-readable report here");
    stats->add_option("--tables", stats_args.tables, "subset of quant,distance,matrix,caused_by,caused_on")
        ->delimiter(',');
    stats->callback([&] { cmd_stats(stats_args); });

    BuildArgs build_args;
    auto* build = app.add_subcommand("build", "compose the state/cause instruction datasets");
    build->add_option("--corpus", build_args.corpus, "annotated training corpus JSON")->required();
    build->add_option("--test-corpus", build_args.test_corpus, "evaluation corpus JSON (adds d_cause.test)");
    build->add_option("--out-dir", build_args.out_dir, "output directory")->required();
    build->add_option("--schema", build_args.schema, "schema mapping JSON file");
    build->add_option("--k", build_args.k, "context window size")->capture_default_str();
    build->add_option("--ratio", build_args.ratio, "train share of the train/dev split")->capture_default_str();
    build->add_flag("--include-same-speaker-cross", build_args.include_same_speaker_cross,
                    "keep same-speaker cross-utterance pairs");
    build->callback([&] { cmd_build(build_args); });

    InferArgs infer_args;
    auto* infer = app.add_subcommand("infer", "run reasoning chains over a dataset");
    infer->add_option("--dataset", infer_args.dataset, "dataset JSONL file")->required();
    infer->add_option("--kind", infer_args.kind, "state|cause|cause_rr|baseline")->capture_default_str();
    infer->add_option("--backend", infer_args.backend, "backend config JSON")->required();
    infer->add_option("--templates", infer_args.templates, "prompt template directory (defaults to built-ins)");
    infer->add_option("--out-predictions", infer_args.out_predictions, "predictions output")->required();
    infer->add_option("--out-transcripts", infer_args.out_transcripts, "transcripts output")->required();
    infer->add_option("--concurrency", infer_args.concurrency, "chains in flight")->capture_default_str();
    infer->add_option("--max-new-tokens", infer_args.max_new_tokens, "completion budget per step")
        ->capture_default_str();
    infer->add_option("--temperature", infer_args.temperature, "sampling temperature")->capture_default_str();
    infer->add_option("--limit", infer_args.limit, "only run the first N entries");
    infer->callback([&] { cmd_infer(infer_args); });

    CorrectArgs correct_args;
    auto* correct = app.add_subcommand("correct", "apply span correction to pair predictions");
    correct->add_option("--predictions", correct_args.predictions, "pair predictions file")->required();
    correct->add_option("--out", correct_args.out, "corrected predictions output")->required();
    correct->add_option("--vocabulary", correct_args.vocabulary, "affix vocabulary file");
    correct->add_option("--corpus", correct_args.corpus, "annotated corpus to build the vocabulary from");
    correct->add_option("--schema", correct_args.schema, "schema mapping JSON file");
    correct->add_option("--method", correct_args.method, "vocab|punct")->capture_default_str();
    correct->add_option("--mode", correct_args.mode, "semantic|literal")->capture_default_str();
    correct->add_option("--diff", correct_args.diff, "write a correction diff report here");
    correct->add_option("--save-vocabulary", correct_args.save_vocabulary, "persist the vocabulary used");
    correct->callback([&] { cmd_correct(correct_args); });

    VocabArgs vocab_args;
    auto* vocab = app.add_subcommand("vocab", "build and persist the affix vocabulary");
    vocab->add_option("--corpus", vocab_args.corpus, "annotated corpus JSON")->required();
    vocab->add_option("--out", vocab_args.out, "vocabulary output file")->required();
    vocab->add_option("--schema", vocab_args.schema, "schema mapping JSON file");
    vocab->callback([&] { cmd_vocab(vocab_args); });

    SubmitArgs submit_args;
    auto* submit = app.add_subcommand("submit", "format predictions as a competition submission");
    submit->add_option("--predictions", submit_args.predictions, "pair predictions file")->required();
    submit->add_option("--corpus", submit_args.corpus, "evaluation corpus JSON")->required();
    submit->add_option("--out", submit_args.out, "submission JSON output")->required();
    submit->add_option("--schema", submit_args.schema, "schema mapping JSON file");
    submit->callback([&] { cmd_submit(submit_args); });

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "score predictions against gold");
    score->add_flag("--dev", score_args.dev, "classification scoring of transcripts against dataset labels");
    score->add_option("--predictions", score_args.predictions, "pair predictions file");
    score->add_option("--gold", score_args.gold, "annotated gold corpus JSON");
    score->add_option("--transcripts", score_args.transcripts, "transcripts file (with --dev)");
    score->add_option("--dataset", score_args.dataset, "dataset JSONL file (with --dev)");
    score->add_option("--schema", score_args.schema, "schema mapping JSON file");
    score->add_option("--out", score_args.out, "write the report here");
    score->add_option("--tsv", score_args.tsv, "write the machine-readable report here");
    score->callback([&] { cmd_score(score_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ecac::BackendError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBackend;
    } catch (const ecac::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return kExitOk;
}
