#pragma once

#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ecac/backend.hpp"
#include "ecac/dataset.hpp"
#include "ecac/emotion.hpp"
#include "ecac/errors.hpp"
#include "ecac/predictions.hpp"

namespace ecac {

enum class ChainKind { state, cause, cause_rr, baseline };

inline std::string_view to_string(ChainKind kind) {
    switch (kind) {
    case ChainKind::state: return "state";
    case ChainKind::cause: return "cause";
    case ChainKind::cause_rr: return "cause_rr";
    case ChainKind::baseline: return "baseline";
    }
    return "state";
}

inline ChainKind chain_kind_from_string(const std::string& s) {
    if (s == "state") return ChainKind::state;
    if (s == "cause") return ChainKind::cause;
    if (s == "cause_rr") return ChainKind::cause_rr;
    if (s == "baseline") return ChainKind::baseline;
    throw ValidationError("unknown chain kind '" + s + "'");
}

/// Prompt templates keyed by name. Placeholders use {name} syntax and are
/// substituted in a single pass; completions are inserted verbatim and never
/// re-scanned, so utterance text may contain anything.
using TemplateSet = std::map<std::string, std::string>;

/// The built-in prompt set. The context wrapper and the clauses that carry
/// earlier completions forward are deliberate, documented choices; the
/// question sentences drive the three hops: candidate span, implicit
/// opinion, final emotion (plus the source-state revision hop for cause_rr).
inline const TemplateSet& default_templates() {
    static const TemplateSet templates = {
        {"state.step1",
         "Given the conversation: {context}. which text spans are possibly causes emotion on \"{target_text}\"?"},
        {"state.step2",
         "Given the conversation: {context}. The mentioned text spans are: {span}. Based on the common sense, what is "
         "the implicit opinion towards the mentioned text spans that causes emotion on \"{target_text}\", and why?"},
        {"state.step3",
         "Given the conversation: {context}. The mentioned text spans are: {span}. The implicit opinion is: {opinion}. "
         "Based on such opinion, what is the emotion state of \"{target_text}\"?"},
        {"cause.step1",
         "Given the conversation: {context}. which specific text span of \"{source_text}\" is possibly causes "
         "emotion?"},
        {"cause.step2",
         "Given the conversation: {context}. The mentioned text span is: {span}. Based on the common sense, what is "
         "the implicit opinion towards the cause of mentioned text span of \"{source_text}\", and why?"},
        {"cause.step3",
         "Given the conversation: {context}. The mentioned text span is: {span}. The implicit opinion is: {opinion}. "
         "Based on such opinion, what is the emotion caused by \"{source_text}\" towards the last conversation "
         "utterance?"},
        {"cause.step3_1",
         "Given the conversation: {context}. The mentioned text span is: {span}. The implicit opinion is: {opinion}. "
         "Based on such opinion, what is the emotion state of \"{source_text}\"?"},
        {"cause.step3_rr",
         "Given the conversation: {context}. The mentioned text span is: {span}. The implicit opinion is: {opinion}. "
         "The speaker's emotion state is {source_state}. Based on such opinion, what is the emotion caused by "
         "\"{source_text}\" towards the last conversation utterance?"},
        {"baseline",
         "Given the conversation: {context}. What emotion causes \"{source_text}\" towards the last conversation "
         "utterance? Choose from {choices}"},
    };
    return templates;
}

/// Loads `<key>.txt` for every default template key from a directory,
/// overriding the built-ins. A template file holds the prompt text without
/// a trailing newline (one trailing newline is tolerated and stripped).
inline TemplateSet load_templates(const std::string& dir) {
    TemplateSet templates;
    for (const auto& [key, unused] : default_templates()) {
        const auto path = std::filesystem::path(dir) / (key + ".txt");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("missing template file: " + path.string());
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (!text.empty() && text.back() == '\n') text.pop_back();
        templates[key] = std::move(text);
    }
    return templates;
}

inline void save_templates(const TemplateSet& templates, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [key, text] : templates) {
        const auto path = std::filesystem::path(dir) / (key + ".txt");
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write template file: " + path.string());
        out << text << '\n';
    }
}

struct StepSpec {
    std::string name;         // "1", "2", "3.1", "3"
    std::string template_key; // key into the TemplateSet
};

/// The step sequence per chain kind; cause_rr inserts the revision hop
/// between the opinion and the final answer.
inline const std::vector<StepSpec>& steps_for(ChainKind kind) {
    static const std::vector<StepSpec> state = {{"1", "state.step1"}, {"2", "state.step2"}, {"3", "state.step3"}};
    static const std::vector<StepSpec> cause = {{"1", "cause.step1"}, {"2", "cause.step2"}, {"3", "cause.step3"}};
    static const std::vector<StepSpec> cause_rr = {
        {"1", "cause.step1"}, {"2", "cause.step2"}, {"3.1", "cause.step3_1"}, {"3", "cause.step3_rr"}};
    static const std::vector<StepSpec> baseline = {{"1", "baseline"}};
    switch (kind) {
    case ChainKind::state: return state;
    case ChainKind::cause: return cause;
    case ChainKind::cause_rr: return cause_rr;
    case ChainKind::baseline: return baseline;
    }
    return state;
}

struct StepTranscript {
    std::string step;
    std::string prompt;
    std::string completion;
};

/// Everything one chain run produced. `final_label` is empty exactly when
/// the last completion contained no label word; that is surfaced, never
/// silently defaulted.
struct ChainResult {
    std::string span;
    std::string opinion;
    std::optional<Emotion> revised_src_state;
    std::optional<Emotion> final_label;
    bool parse_fallback = false;
    std::vector<StepTranscript> transcripts;
};

/// Case-insensitive scan for the seven label words at word boundaries;
/// when several occur, the last occurrence wins (completions tend to end
/// with the answer). No label word at all yields nullopt.
inline std::optional<Emotion> parse_emotion(std::string_view completion) {
    std::string lower;
    lower.reserve(completion.size());
    for (char c : completion) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    const auto is_letter = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; };
    std::optional<Emotion> found;
    std::size_t best_pos = 0;
    for (Emotion e : kAllEmotions) {
        const std::string_view word = to_string(e);
        std::size_t pos = lower.find(word);
        while (pos != std::string::npos) {
            const bool left_ok = pos == 0 || !is_letter(lower[pos - 1]);
            const std::size_t end = pos + word.size();
            const bool right_ok = end == lower.size() || !is_letter(lower[end]);
            if (left_ok && right_ok && (!found || pos >= best_pos)) {
                found = e;
                best_pos = pos;
            }
            pos = lower.find(word, pos + 1);
        }
    }
    return found;
}

namespace detail {

inline std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& values,
                              const std::string& template_key) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] != '{') {
            out += tmpl[i++];
            continue;
        }
        const std::size_t close = tmpl.find('}', i);
        if (close == std::string_view::npos) {
            throw ContractError("template " + template_key + ": unclosed placeholder");
        }
        const std::string name(tmpl.substr(i + 1, close - i - 1));
        const auto it = values.find(name);
        if (it == values.end()) {
            throw ContractError("template " + template_key + ": placeholder {" + name + "} is not available");
        }
        out += it->second;
        i = close + 1;
    }
    return out;
}

inline std::map<std::string, std::string> placeholder_values(ChainKind kind, std::size_t step_index,
                                                             const DatasetRecord& record, const ChainResult& prior) {
    if (prior.transcripts.size() < step_index) {
        throw ContractError("render_step: step " + std::to_string(step_index + 1) + " rendered before " +
                            std::to_string(step_index) + " completions are available");
    }
    std::map<std::string, std::string> values;
    values["context"] = record.context;
    values["choices"] = emotion_choices();
    if (kind == ChainKind::state) {
        values["target_text"] = record.tgt_text;
    } else {
        // The target is referred to as the end of the conversation and is
        // not exposed as a named parameter for cause-style chains.
        values["source_text"] = record.src_text;
    }
    if (step_index >= 1) values["span"] = prior.transcripts[0].completion;
    if (step_index >= 2) values["opinion"] = prior.transcripts[1].completion;
    if (kind == ChainKind::cause_rr && step_index == 3) {
        values["source_state"] = prior.revised_src_state ? std::string(to_string(*prior.revised_src_state))
                                                         : prior.transcripts[2].completion;
    }
    return values;
}

} // namespace detail

/// Renders the prompt for one step. Deterministic: identical inputs yield
/// byte-identical prompts.
inline std::string render_step(ChainKind kind, std::size_t step_index, const DatasetRecord& record,
                               const ChainResult& prior, const TemplateSet& templates = default_templates()) {
    const auto& steps = steps_for(kind);
    if (step_index >= steps.size()) {
        throw ContractError("render_step: step index " + std::to_string(step_index) + " out of range for " +
                            std::string(to_string(kind)));
    }
    const auto it = templates.find(steps[step_index].template_key);
    if (it == templates.end()) {
        throw ContractError("missing template '" + steps[step_index].template_key + "'");
    }
    return detail::substitute(it->second, detail::placeholder_values(kind, step_index, record, prior),
                              steps[step_index].template_key);
}

/// The single-prompt baseline over a cause record.
inline std::string render_baseline(const DatasetRecord& record, const TemplateSet& templates = default_templates()) {
    if (record.labels.size() != 2) {
        throw ContractError("render_baseline: record is not a cause entry");
    }
    return render_step(ChainKind::baseline, 0, record, ChainResult{}, templates);
}

struct GenerationParams {
    int max_new_tokens = 128;
    double temperature = 1.0;
    std::vector<std::string> stop;
};

/// Executes all steps of one chain sequentially, feeding every completion
/// into the later prompts. Backend failures surface as ChainError carrying
/// the failed step.
inline ChainResult run_chain(ChainKind kind, const DatasetRecord& record, CompletionBackend& backend,
                             const TemplateSet& templates = default_templates(), const GenerationParams& params = {}) {
    if (kind == ChainKind::baseline && record.labels.size() != 2) {
        throw ContractError("baseline chains require cause entries");
    }
    ChainResult result;
    const auto& steps = steps_for(kind);
    for (std::size_t i = 0; i < steps.size(); ++i) {
        CompletionRequest request;
        request.prompt = render_step(kind, i, record, result, templates);
        request.max_new_tokens = params.max_new_tokens;
        request.temperature = params.temperature;
        request.stop = params.stop;
        std::string completion;
        try {
            completion = backend.complete(request);
        } catch (const std::exception& e) {
            throw ChainError(std::string("step ") + steps[i].name + ": " + e.what(), i, steps[i].name);
        }
        result.transcripts.push_back({steps[i].name, request.prompt, completion});
        if (steps.size() > 1 && i == 0) result.span = completion;
        if (steps.size() > 1 && i == 1) result.opinion = completion;
        if (kind == ChainKind::cause_rr && steps[i].name == "3.1") {
            result.revised_src_state = parse_emotion(completion);
        }
        if (i + 1 == steps.size()) {
            result.final_label = parse_emotion(completion);
            result.parse_fallback = !result.final_label.has_value();
        }
    }
    return result;
}

struct ChainOutcome {
    std::size_t index = 0;
    std::optional<ChainResult> result;
    std::string error; // empty on success
};

/// Runs chains for every record with up to `concurrency` in flight. Results
/// come back in record order; failed entries are recorded and the batch
/// continues.
inline std::vector<ChainOutcome> run_batch(ChainKind kind, const std::vector<DatasetRecord>& records,
                                           CompletionBackend& backend, std::size_t concurrency = 1,
                                           const TemplateSet& templates = default_templates(),
                                           const GenerationParams& params = {}) {
    if (concurrency < 1) throw ContractError("run_batch: concurrency must be >= 1");
    std::vector<ChainOutcome> outcomes(records.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= records.size()) return;
            outcomes[i].index = i;
            try {
                outcomes[i].result = run_chain(kind, records[i], backend, templates, params);
            } catch (const std::exception& e) {
                outcomes[i].error = e.what();
            }
        }
    };
    const std::size_t workers = std::min(concurrency, records.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return outcomes;
}

// ---------------------------------------------------------------------------
// Batch output files.
// ---------------------------------------------------------------------------

inline constexpr const char* kTranscriptsFormat = "ecac-transcripts";

/// JSON-lines transcript file: header, one record per entry (prompts and
/// completions for every step), then an aggregate summary record.
inline void write_transcripts(ChainKind kind, const std::vector<DatasetRecord>& records,
                              const std::vector<ChainOutcome>& outcomes, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open transcript output: " + path);
    nlohmann::ordered_json header;
    header["header"] = {{"format", kTranscriptsFormat}, {"kind", std::string(to_string(kind))}};
    out << header.dump() << '\n';
    std::size_t failed = 0;
    std::size_t fallbacks = 0;
    for (const auto& outcome : outcomes) {
        const auto& record = records[outcome.index];
        nlohmann::ordered_json j;
        j["index"] = outcome.index;
        j["conversation_id"] = record.conversation_id;
        j["src_id"] = record.src_id;
        j["tgt_id"] = record.tgt_id;
        if (outcome.result) {
            const ChainResult& r = *outcome.result;
            nlohmann::ordered_json steps = nlohmann::ordered_json::array();
            for (const auto& t : r.transcripts) {
                steps.push_back({{"step", t.step}, {"prompt", t.prompt}, {"completion", t.completion}});
            }
            j["steps"] = std::move(steps);
            j["span"] = r.span;
            j["opinion"] = r.opinion;
            j["revised_src_state"] =
                r.revised_src_state ? nlohmann::ordered_json(std::string(to_string(*r.revised_src_state)))
                                    : nlohmann::ordered_json(nullptr);
            j["final_label"] = r.final_label ? nlohmann::ordered_json(std::string(to_string(*r.final_label)))
                                             : nlohmann::ordered_json(nullptr);
            j["parse_fallback"] = r.parse_fallback;
            if (r.parse_fallback) ++fallbacks;
            j["error"] = nullptr;
        } else {
            j["error"] = outcome.error;
            ++failed;
        }
        out << j.dump() << '\n';
    }
    nlohmann::ordered_json summary;
    summary["summary"] = {{"entries", outcomes.size()}, {"failed", failed}, {"parse_fallbacks", fallbacks}};
    out << summary.dump() << '\n';
    if (!out) throw IoError("failed writing transcripts to " + path);
}

/// Final labels per entry index as read back from a transcript file.
/// Unparsable completions surface as neutral with the fallback flag set;
/// failed entries have no label.
struct TranscriptLabel {
    std::size_t index = 0;
    std::optional<Emotion> label;
    bool parse_fallback = false;
    bool failed = false;
};

inline std::vector<TranscriptLabel> read_transcript_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open transcript file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path + ": missing transcripts header");
    try {
        const auto header = nlohmann::json::parse(line);
        if (!header.contains("header") || header["header"]["format"] != kTranscriptsFormat) {
            throw ValidationError(path + ": not a transcript file");
        }
        std::vector<TranscriptLabel> labels;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            if (j.contains("summary")) continue;
            TranscriptLabel label;
            label.index = j.at("index").get<std::size_t>();
            if (!j.at("error").is_null()) {
                label.failed = true;
            } else if (j.at("final_label").is_null()) {
                label.label = Emotion::neutral;
                label.parse_fallback = true;
            } else {
                label.label = emotion_from_string(j.at("final_label").get<std::string>());
                label.parse_fallback = j.value("parse_fallback", false);
            }
            labels.push_back(label);
        }
        return labels;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": bad transcript record: " + e.what());
    }
}

/// Pair predictions from a cause-style batch: non-neutral clean answers
/// only. Unparsable answers fall back to neutral and are therefore
/// suppressed here while staying visible in the transcripts.
inline std::vector<PredictedPair> pair_predictions(const std::vector<DatasetRecord>& records,
                                                   const std::vector<ChainOutcome>& outcomes) {
    std::vector<PredictedPair> predictions;
    for (const auto& outcome : outcomes) {
        if (!outcome.result || !outcome.result->final_label) continue;
        const Emotion label = *outcome.result->final_label;
        if (label == Emotion::neutral) continue;
        const auto& record = records[outcome.index];
        PredictedPair p;
        p.conversation_id = record.conversation_id;
        p.src_id = record.src_id;
        p.tgt_id = record.tgt_id;
        p.emotion = label;
        p.span = record.src_text;
        p.parse_fallback = false;
        predictions.push_back(std::move(p));
    }
    return predictions;
}

/// State predictions from a state batch: every entry that completed keeps
/// its label; unparsable answers export as flagged neutral.
inline std::vector<StatePrediction> state_predictions(const std::vector<DatasetRecord>& records,
                                                      const std::vector<ChainOutcome>& outcomes) {
    std::vector<StatePrediction> predictions;
    for (const auto& outcome : outcomes) {
        if (!outcome.result) continue;
        const auto& record = records[outcome.index];
        StatePrediction s;
        s.conversation_id = record.conversation_id;
        s.utterance_id = record.tgt_id;
        s.emotion = outcome.result->final_label.value_or(Emotion::neutral);
        s.parse_fallback = outcome.result->parse_fallback;
        predictions.push_back(s);
    }
    return predictions;
}

} // namespace ecac
