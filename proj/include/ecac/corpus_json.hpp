#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "ecac/corpus.hpp"
#include "ecac/errors.hpp"

namespace ecac {

/// Maps the logical corpus fields onto concrete JSON key names, so the
/// ingestion survives schema drift between data releases. Defaults match
/// the conversation-task release this project targets.
struct SchemaMapping {
    std::string conversation_id = "conversation_ID";
    std::string utterances = "conversation";
    std::string utterance_id = "utterance_ID";
    std::string speaker = "speaker";
    std::string text = "text";
    std::string emotion = "emotion";
    std::string pairs = "emotion-cause_pairs";

    bool operator==(const SchemaMapping&) const = default;
};

inline SchemaMapping load_schema_mapping(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open schema mapping file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("schema mapping " + path + ": " + e.what(), e.byte);
    }
    SchemaMapping m;
    auto take = [&](const char* logical, std::string& slot) {
        if (!j.contains(logical)) return;
        if (!j[logical].is_string() || j[logical].get<std::string>().empty()) {
            throw ValidationError(std::string("schema mapping: field '") + logical + "' must be a nonempty string");
        }
        slot = j[logical].get<std::string>();
        j.erase(logical);
    };
    take("conversation_id", m.conversation_id);
    take("utterances", m.utterances);
    take("utterance_id", m.utterance_id);
    take("speaker", m.speaker);
    take("text", m.text);
    take("emotion", m.emotion);
    take("pairs", m.pairs);
    if (!j.empty()) {
        throw ValidationError("schema mapping: unknown field '" + j.begin().key() + "'");
    }
    return m;
}

namespace detail {

// Pair entries are encoded as ["<tgtId>_<emotion>", "<srcId>_<span>"]; the
// second underscore split happens at the first '_' after the digits so the
// span may itself contain underscores.
inline bool split_id_payload(const std::string& field, int& id, std::string& payload, bool& has_payload) {
    std::size_t i = 0;
    while (i < field.size() && std::isdigit(static_cast<unsigned char>(field[i]))) ++i;
    if (i == 0) return false;
    try {
        id = std::stoi(field.substr(0, i));
    } catch (const std::exception&) {
        return false;
    }
    if (i == field.size()) {
        has_payload = false;
        payload.clear();
        return true;
    }
    if (field[i] != '_') return false;
    has_payload = true;
    payload = field.substr(i + 1);
    return true;
}

inline CausePair parse_pair_entry(const nlohmann::json& entry, int conv_id) {
    const std::string where = "conversation " + std::to_string(conv_id);
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string() || !entry[1].is_string()) {
        throw ValidationError(where + ": cause pair entry must be a 2-element array of strings");
    }
    CausePair pair;
    std::string payload;
    bool has_payload = false;
    if (!split_id_payload(entry[0].get<std::string>(), pair.tgt_id, payload, has_payload) || !has_payload) {
        throw ValidationError(where + ": malformed pair target '" + entry[0].get<std::string>() + "'");
    }
    const auto emotion = emotion_from_string(payload);
    if (!emotion) {
        throw ValidationError(where + ": unknown emotion '" + payload + "' in pair target");
    }
    pair.emotion = *emotion;
    if (!split_id_payload(entry[1].get<std::string>(), pair.src_id, payload, has_payload)) {
        throw ValidationError(where + ": malformed pair source '" + entry[1].get<std::string>() + "'");
    }
    if (has_payload && !payload.empty()) pair.span = payload;
    return pair;
}

} // namespace detail

/// Parses a competition-style corpus. A corpus counts as annotated when
/// every utterance carries the emotion key; a mix of annotated and bare
/// utterances is rejected.
inline Corpus parse_corpus(std::string_view raw, const SchemaMapping& schema = {}) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("corpus JSON: ") + e.what(), e.byte);
    }
    if (!root.is_array()) {
        throw ValidationError("corpus JSON: top level must be an array of conversations");
    }

    Corpus corpus;
    std::size_t with_state = 0;
    std::size_t total_utterances = 0;
    for (const auto& jconv : root) {
        Conversation conv;
        if (!jconv.contains(schema.conversation_id) || !jconv[schema.conversation_id].is_number_integer()) {
            throw ValidationError("conversation is missing integer key '" + schema.conversation_id + "'");
        }
        conv.id = jconv[schema.conversation_id].get<int>();
        const std::string where = "conversation " + std::to_string(conv.id);
        if (!jconv.contains(schema.utterances) || !jconv[schema.utterances].is_array()) {
            throw ValidationError(where + ": missing utterance array '" + schema.utterances + "'");
        }
        for (const auto& ju : jconv[schema.utterances]) {
            Utterance u;
            if (!ju.contains(schema.utterance_id) || !ju[schema.utterance_id].is_number_integer()) {
                throw ValidationError(where + ": utterance is missing integer key '" + schema.utterance_id + "'");
            }
            u.id = ju[schema.utterance_id].get<int>();
            if (!ju.contains(schema.speaker) || !ju[schema.speaker].is_string() || ju[schema.speaker].get<std::string>().empty()) {
                throw ValidationError(where + ", utterance " + std::to_string(u.id) + ": missing speaker");
            }
            u.speaker = ju[schema.speaker].get<std::string>();
            if (!ju.contains(schema.text) || !ju[schema.text].is_string()) {
                throw ValidationError(where + ", utterance " + std::to_string(u.id) + ": missing text");
            }
            u.text = ju[schema.text].get<std::string>();
            ++total_utterances;
            if (ju.contains(schema.emotion)) {
                if (!ju[schema.emotion].is_string()) {
                    throw ValidationError(where + ", utterance " + std::to_string(u.id) + ": emotion must be a string");
                }
                const auto state = emotion_from_string(ju[schema.emotion].get<std::string>());
                if (!state) {
                    throw ValidationError(where + ", utterance " + std::to_string(u.id) + ": unknown emotion '" +
                                          ju[schema.emotion].get<std::string>() + "'");
                }
                u.state = *state;
                ++with_state;
            }
            conv.utterances.push_back(std::move(u));
        }
        if (jconv.contains(schema.pairs)) {
            if (!jconv[schema.pairs].is_array()) {
                throw ValidationError(where + ": '" + schema.pairs + "' must be an array");
            }
            for (const auto& jpair : jconv[schema.pairs]) {
                conv.pairs.push_back(detail::parse_pair_entry(jpair, conv.id));
            }
        }
        corpus.conversations.push_back(std::move(conv));
    }

    if (with_state != 0 && with_state != total_utterances) {
        throw ValidationError("corpus mixes annotated and unannotated utterances (" + std::to_string(with_state) + "/" +
                              std::to_string(total_utterances) + " carry an emotion state)");
    }
    // Vacuously true for an empty corpus, so downstream zero-reports work.
    corpus.annotated = with_state == total_utterances;
    validate_corpus(corpus);
    return corpus;
}

inline Corpus parse_corpus_file(const std::string& path, const SchemaMapping& schema = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_corpus(buf.str(), schema);
}

/// Mirror of parse_corpus: emits the same schema so a serialize→parse
/// round-trip reproduces the corpus exactly.
inline nlohmann::ordered_json serialize_corpus(const Corpus& corpus, const SchemaMapping& schema = {}) {
    nlohmann::ordered_json root = nlohmann::ordered_json::array();
    for (const auto& conv : corpus.conversations) {
        nlohmann::ordered_json jconv;
        jconv[schema.conversation_id] = conv.id;
        nlohmann::ordered_json jutts = nlohmann::ordered_json::array();
        for (const auto& u : conv.utterances) {
            nlohmann::ordered_json ju;
            ju[schema.utterance_id] = u.id;
            ju[schema.text] = u.text;
            ju[schema.speaker] = u.speaker;
            if (corpus.annotated) ju[schema.emotion] = std::string(to_string(u.state));
            jutts.push_back(std::move(ju));
        }
        jconv[schema.utterances] = std::move(jutts);
        nlohmann::ordered_json jpairs = nlohmann::ordered_json::array();
        for (const auto& pair : conv.pairs) {
            std::string tgt = std::to_string(pair.tgt_id) + "_" + std::string(to_string(pair.emotion));
            std::string src = std::to_string(pair.src_id);
            if (pair.span) src += "_" + *pair.span;
            jpairs.push_back(nlohmann::ordered_json::array({tgt, src}));
        }
        jconv[schema.pairs] = std::move(jpairs);
        root.push_back(std::move(jconv));
    }
    return root;
}

inline void write_corpus_file(const Corpus& corpus, const std::string& path, const SchemaMapping& schema = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open output file: " + path);
    out << serialize_corpus(corpus, schema).dump(2) << '\n';
    if (!out) throw IoError("failed writing corpus to " + path);
}

} // namespace ecac
