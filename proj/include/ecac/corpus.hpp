#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "ecac/emotion.hpp"
#include "ecac/errors.hpp"

namespace ecac {

/// One speaker turn. Ids are 1-based and consecutive within a conversation.
struct Utterance {
    int id = 0;
    std::string speaker;
    std::string text;
    Emotion state = Emotion::neutral;

    bool operator==(const Utterance&) const = default;
};

/// Annotated source→target cause link. `emotion` is never neutral for gold
/// annotations; `span` is the cause span inside the source utterance text,
/// when the annotation provides one.
struct CausePair {
    int src_id = 0;
    int tgt_id = 0;
    Emotion emotion = Emotion::neutral;
    std::optional<std::string> span;

    bool operator==(const CausePair&) const = default;
};

struct Conversation {
    int id = 0;
    std::vector<Utterance> utterances;
    std::vector<CausePair> pairs;

    bool operator==(const Conversation&) const = default;

    const Utterance* find_utterance(int utterance_id) const {
        for (const auto& u : utterances) {
            if (u.id == utterance_id) return &u;
        }
        return nullptr;
    }
};

struct Corpus {
    std::vector<Conversation> conversations;
    bool annotated = false;

    bool operator==(const Corpus&) const = default;

    const Conversation* find_conversation(int conversation_id) const {
        for (const auto& c : conversations) {
            if (c.id == conversation_id) return &c;
        }
        return nullptr;
    }

    std::size_t utterance_count() const {
        std::size_t n = 0;
        for (const auto& c : conversations) n += c.utterances.size();
        return n;
    }

    std::size_t pair_count() const {
        std::size_t n = 0;
        for (const auto& c : conversations) n += c.pairs.size();
        return n;
    }
};

/// "<speaker> : <text>", exactly; the text is never escaped or trimmed.
inline std::string render_utterance(const Utterance& u) {
    std::string out;
    out.reserve(u.speaker.size() + 3 + u.text.size());
    out += u.speaker;
    out += " : ";
    out += u.text;
    return out;
}

/// Newline-joined utterance renderings, in the given order.
inline std::string render_context(std::span<const Utterance> window) {
    if (window.empty()) {
        throw ContractError("render_context: empty utterance window");
    }
    std::string out;
    for (std::size_t i = 0; i < window.size(); ++i) {
        if (i > 0) out += '\n';
        out += render_utterance(window[i]);
    }
    return out;
}

inline std::string render_context(const std::vector<Utterance>& window) {
    return render_context(std::span<const Utterance>(window));
}

/// Structural validation: unique conversation ids, nonempty conversations,
/// 1-based consecutive utterance ids, resolvable pair ids, no neutral gold
/// pairs. Throws ValidationError naming the offending conversation.
inline void validate_corpus(const Corpus& corpus) {
    std::unordered_set<int> conv_ids;
    for (const auto& conv : corpus.conversations) {
        if (!conv_ids.insert(conv.id).second) {
            throw ValidationError("duplicate conversation id " + std::to_string(conv.id));
        }
        if (conv.utterances.empty()) {
            throw ValidationError("conversation " + std::to_string(conv.id) + " has no utterances");
        }
        for (std::size_t i = 0; i < conv.utterances.size(); ++i) {
            const int expected = static_cast<int>(i) + 1;
            if (conv.utterances[i].id != expected) {
                throw ValidationError(
                    "conversation " + std::to_string(conv.id) + ": utterance ids must be 1-based and consecutive (got " +
                    std::to_string(conv.utterances[i].id) + " at position " + std::to_string(i + 1) + ")");
            }
        }
        for (const auto& pair : conv.pairs) {
            if (conv.find_utterance(pair.src_id) == nullptr || conv.find_utterance(pair.tgt_id) == nullptr) {
                throw ValidationError(
                    "conversation " + std::to_string(conv.id) + ": cause pair references unknown utterance id " +
                    std::to_string(conv.find_utterance(pair.src_id) == nullptr ? pair.src_id : pair.tgt_id));
            }
            if (pair.emotion == Emotion::neutral) {
                throw ValidationError(
                    "conversation " + std::to_string(conv.id) + ": cause pair " + std::to_string(pair.src_id) + "->" +
                    std::to_string(pair.tgt_id) + " carries a neutral label");
            }
        }
    }
}

} // namespace ecac
