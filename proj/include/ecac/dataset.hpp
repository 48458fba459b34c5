#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ecac/corpus.hpp"
#include "ecac/corpus_json.hpp"
#include "ecac/errors.hpp"

namespace ecac {

/// One emotion-state instruction entry: the target utterance plus its
/// clamped history window (ids in [id-k, id]), ending with the target.
struct StateEntry {
    int conversation_id = 0;
    Utterance target;
    std::vector<Utterance> context;
    Emotion state = Emotion::neutral;
};

/// One cause instruction entry for a (source, target) candidate pair. The
/// cause label is the annotated emotion when the pair is annotated and
/// neutral otherwise; the source state rides along as auxiliary label.
struct CauseEntry {
    int conversation_id = 0;
    Utterance source;
    Utterance target;
    std::vector<Utterance> context;
    Emotion source_state = Emotion::neutral;
    Emotion cause = Emotion::neutral;
};

namespace detail {

inline std::vector<Utterance> context_window(const Conversation& conv, int anchor_id, int k) {
    std::vector<Utterance> window;
    for (const auto& u : conv.utterances) {
        const int back = anchor_id - u.id;
        if (back >= 0 && back <= k) window.push_back(u);
    }
    return window;
}

} // namespace detail

/// One entry per utterance, unconditionally.
inline std::vector<StateEntry> build_state_dataset(const Corpus& corpus, int k) {
    if (k < 0) throw ContractError("build_state_dataset: k must be >= 0");
    if (!corpus.annotated) {
        throw ValidationError("state dataset requires an annotated corpus");
    }
    std::vector<StateEntry> entries;
    entries.reserve(corpus.utterance_count());
    for (const auto& conv : corpus.conversations) {
        for (const auto& u : conv.utterances) {
            StateEntry entry;
            entry.conversation_id = conv.id;
            entry.target = u;
            entry.context = detail::context_window(conv, u.id, k);
            entry.state = u.state;
            entries.push_back(std::move(entry));
        }
    }
    return entries;
}

/// Every (source, target) pair with 0 <= tgt.id - src.id <= k. When
/// exclude_same_speaker_cross is set, pairs whose utterances share a
/// speaker without being the same utterance are dropped — including
/// annotated ones.
inline std::vector<CauseEntry> build_cause_dataset(const Corpus& corpus, int k,
                                                   bool exclude_same_speaker_cross = true) {
    if (k < 0) throw ContractError("build_cause_dataset: k must be >= 0");
    std::vector<CauseEntry> entries;
    for (const auto& conv : corpus.conversations) {
        std::map<std::pair<int, int>, Emotion> gold;
        for (const auto& pair : conv.pairs) {
            gold.emplace(std::make_pair(pair.src_id, pair.tgt_id), pair.emotion);
        }
        for (const auto& tgt : conv.utterances) {
            for (const auto& src : conv.utterances) {
                const int delta = tgt.id - src.id;
                if (delta < 0 || delta > k) continue;
                if (exclude_same_speaker_cross && src.id != tgt.id && src.speaker == tgt.speaker) continue;
                CauseEntry entry;
                entry.conversation_id = conv.id;
                entry.source = src;
                entry.target = tgt;
                entry.context = detail::context_window(conv, tgt.id, k);
                entry.source_state = src.state;
                const auto it = gold.find({src.id, tgt.id});
                entry.cause = it != gold.end() ? it->second : Emotion::neutral;
                entries.push_back(std::move(entry));
            }
        }
    }
    return entries;
}

/// Deterministic conversation-level split: the first ceil(ratio*N)
/// conversations in file order become the first part.
inline std::pair<Corpus, Corpus> split_train_dev(const Corpus& corpus, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ContractError("split_train_dev: ratio must be in (0, 1)");
    }
    const std::size_t n = corpus.conversations.size();
    const auto cut = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n)));
    Corpus train{{}, corpus.annotated};
    Corpus dev{{}, corpus.annotated};
    train.conversations.assign(corpus.conversations.begin(), corpus.conversations.begin() + static_cast<long>(cut));
    dev.conversations.assign(corpus.conversations.begin() + static_cast<long>(cut), corpus.conversations.end());
    return {std::move(train), std::move(dev)};
}

/// Flat, file-ready form of an entry. For state entries source and target
/// describe the same utterance and `labels` has one element; cause entries
/// carry [source state, cause emotion].
struct DatasetRecord {
    int conversation_id = 0;
    int src_id = 0;
    int tgt_id = 0;
    std::string context;
    std::string src_text;
    std::string tgt_text;
    std::vector<std::string> labels;

    bool operator==(const DatasetRecord&) const = default;
};

inline DatasetRecord to_record(const StateEntry& entry) {
    DatasetRecord r;
    r.conversation_id = entry.conversation_id;
    r.src_id = entry.target.id;
    r.tgt_id = entry.target.id;
    r.context = render_context(entry.context);
    r.src_text = entry.target.text;
    r.tgt_text = entry.target.text;
    r.labels = {std::string(to_string(entry.state))};
    return r;
}

inline DatasetRecord to_record(const CauseEntry& entry) {
    DatasetRecord r;
    r.conversation_id = entry.conversation_id;
    r.src_id = entry.source.id;
    r.tgt_id = entry.target.id;
    r.context = render_context(entry.context);
    r.src_text = entry.source.text;
    r.tgt_text = entry.target.text;
    r.labels = {std::string(to_string(entry.source_state)), std::string(to_string(entry.cause))};
    return r;
}

template <typename Entry>
std::vector<DatasetRecord> to_records(const std::vector<Entry>& entries) {
    std::vector<DatasetRecord> records;
    records.reserve(entries.size());
    for (const auto& e : entries) records.push_back(to_record(e));
    return records;
}

struct DatasetFile {
    std::string kind; // "state" or "cause"
    int k = 0;
    std::vector<DatasetRecord> records;
};

inline constexpr const char* kDatasetFormat = "ecac-dataset";
inline constexpr int kDatasetVersion = 1;

// Column order is part of the file contract; import rejects files whose
// header disagrees.
inline const std::vector<std::string>& dataset_columns() {
    static const std::vector<std::string> cols = {"conversation_id", "src_id", "tgt_id", "context",
                                                  "src_text",        "tgt_text", "labels"};
    return cols;
}

/// JSON-lines export: a header record, then one record per line.
inline void export_records(const DatasetFile& file, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open dataset output: " + path);
    nlohmann::ordered_json header;
    header["header"] = {{"format", kDatasetFormat},
                        {"version", kDatasetVersion},
                        {"kind", file.kind},
                        {"k", file.k},
                        {"columns", dataset_columns()}};
    out << header.dump() << '\n';
    for (const auto& r : file.records) {
        nlohmann::ordered_json j;
        j["conversation_id"] = r.conversation_id;
        j["src_id"] = r.src_id;
        j["tgt_id"] = r.tgt_id;
        j["context"] = r.context;
        j["src_text"] = r.src_text;
        j["tgt_text"] = r.tgt_text;
        j["labels"] = r.labels;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("failed writing dataset to " + path);
}

inline DatasetFile import_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path + ": missing dataset header line");
    DatasetFile file;
    try {
        const auto header = nlohmann::json::parse(line);
        if (!header.contains("header") || header["header"]["format"] != kDatasetFormat) {
            throw ValidationError(path + ": not a dataset file");
        }
        if (header["header"]["columns"].get<std::vector<std::string>>() != dataset_columns()) {
            throw ValidationError(path + ": unexpected column layout");
        }
        file.kind = header["header"]["kind"].get<std::string>();
        file.k = header["header"]["k"].get<int>();
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            DatasetRecord r;
            r.conversation_id = j.at("conversation_id").get<int>();
            r.src_id = j.at("src_id").get<int>();
            r.tgt_id = j.at("tgt_id").get<int>();
            r.context = j.at("context").get<std::string>();
            r.src_text = j.at("src_text").get<std::string>();
            r.tgt_text = j.at("tgt_text").get<std::string>();
            r.labels = j.at("labels").get<std::vector<std::string>>();
            file.records.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": bad dataset record: " + e.what());
    }
    return file;
}

/// Per-class counts keyed by the answer label: the state for state entries,
/// the cause emotion for cause entries.
inline std::map<std::string, std::size_t> label_histogram(const DatasetFile& file) {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : file.records) {
        if (r.labels.empty()) continue;
        counts[r.labels.back()] += 1;
    }
    return counts;
}

} // namespace ecac
