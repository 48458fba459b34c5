#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecac/emotion.hpp"
#include "ecac/errors.hpp"

namespace ecac {

/// A predicted emotion-cause pair. `span` is the predicted cause span
/// (initially the full source utterance text, later trimmed by the span
/// corrector). `parse_fallback` marks pairs whose label came from the
/// unparsable-completion fallback rather than a clean parse.
struct PredictedPair {
    int conversation_id = 0;
    int src_id = 0;
    int tgt_id = 0;
    Emotion emotion = Emotion::neutral;
    std::string span;
    bool parse_fallback = false;

    bool operator==(const PredictedPair&) const = default;
};

/// A predicted per-utterance emotion state.
struct StatePrediction {
    int conversation_id = 0;
    int utterance_id = 0;
    Emotion emotion = Emotion::neutral;
    bool parse_fallback = false;

    bool operator==(const StatePrediction&) const = default;
};

inline constexpr const char* kPredictionsFormat = "ecac-predictions";

namespace detail {

inline nlohmann::json read_prediction_header(std::ifstream& in, const std::string& path, const char* kind) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path + ": missing predictions header line");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what(), e.byte);
    }
    if (!header.contains("header") || header["header"]["format"] != kPredictionsFormat) {
        throw ValidationError(path + ": not a predictions file");
    }
    if (header["header"]["kind"] != kind) {
        throw ValidationError(path + ": expected kind '" + std::string(kind) + "', found '" +
                              header["header"]["kind"].get<std::string>() + "'");
    }
    return header;
}

} // namespace detail

inline void write_pair_predictions(const std::vector<PredictedPair>& pairs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open predictions output: " + path);
    nlohmann::ordered_json header;
    header["header"] = {{"format", kPredictionsFormat}, {"kind", "pairs"}};
    out << header.dump() << '\n';
    for (const auto& p : pairs) {
        nlohmann::ordered_json j;
        j["conversation_id"] = p.conversation_id;
        j["src_id"] = p.src_id;
        j["tgt_id"] = p.tgt_id;
        j["emotion"] = std::string(to_string(p.emotion));
        j["span"] = p.span;
        j["parse_fallback"] = p.parse_fallback;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("failed writing predictions to " + path);
}

inline std::vector<PredictedPair> read_pair_predictions(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open predictions file: " + path);
    detail::read_prediction_header(in, path, "pairs");
    std::vector<PredictedPair> pairs;
    std::string line;
    try {
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            PredictedPair p;
            p.conversation_id = j.at("conversation_id").get<int>();
            p.src_id = j.at("src_id").get<int>();
            p.tgt_id = j.at("tgt_id").get<int>();
            const auto emotion = emotion_from_string(j.at("emotion").get<std::string>());
            if (!emotion) throw ValidationError(path + ": unknown emotion '" + j.at("emotion").get<std::string>() + "'");
            p.emotion = *emotion;
            p.span = j.at("span").get<std::string>();
            p.parse_fallback = j.value("parse_fallback", false);
            pairs.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": bad prediction record: " + e.what());
    }
    return pairs;
}

inline void write_state_predictions(const std::vector<StatePrediction>& states, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open predictions output: " + path);
    nlohmann::ordered_json header;
    header["header"] = {{"format", kPredictionsFormat}, {"kind", "state"}};
    out << header.dump() << '\n';
    for (const auto& s : states) {
        nlohmann::ordered_json j;
        j["conversation_id"] = s.conversation_id;
        j["utterance_id"] = s.utterance_id;
        j["emotion"] = std::string(to_string(s.emotion));
        j["parse_fallback"] = s.parse_fallback;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("failed writing predictions to " + path);
}

inline std::vector<StatePrediction> read_state_predictions(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open predictions file: " + path);
    detail::read_prediction_header(in, path, "state");
    std::vector<StatePrediction> states;
    std::string line;
    try {
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            StatePrediction s;
            s.conversation_id = j.at("conversation_id").get<int>();
            s.utterance_id = j.at("utterance_id").get<int>();
            const auto emotion = emotion_from_string(j.at("emotion").get<std::string>());
            if (!emotion) throw ValidationError(path + ": unknown emotion '" + j.at("emotion").get<std::string>() + "'");
            s.emotion = *emotion;
            s.parse_fallback = j.value("parse_fallback", false);
            states.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": bad prediction record: " + e.what());
    }
    return states;
}

} // namespace ecac
