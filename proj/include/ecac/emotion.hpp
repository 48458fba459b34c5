#pragma once

#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

namespace ecac {

/// Closed label set for conversational emotion analysis. The first six
/// values form the cause-label subset; `neutral` marks absence of emotion.
enum class Emotion {
    surprise,
    sadness,
    joy,
    disgust,
    fear,
    anger,
    neutral,
};

inline constexpr std::array<Emotion, 7> kAllEmotions = {
    Emotion::surprise, Emotion::sadness, Emotion::joy,  Emotion::disgust,
    Emotion::fear,     Emotion::anger,   Emotion::neutral,
};

/// The six labels a cause pair may carry (everything but neutral).
inline constexpr std::array<Emotion, 6> kCauseEmotions = {
    Emotion::surprise, Emotion::sadness, Emotion::joy,
    Emotion::disgust,  Emotion::fear,    Emotion::anger,
};

inline constexpr std::size_t emotion_index(Emotion e) noexcept {
    return static_cast<std::size_t>(e);
}

constexpr std::string_view to_string(Emotion e) noexcept {
    switch (e) {
    case Emotion::surprise: return "surprise";
    case Emotion::sadness: return "sadness";
    case Emotion::joy: return "joy";
    case Emotion::disgust: return "disgust";
    case Emotion::fear: return "fear";
    case Emotion::anger: return "anger";
    case Emotion::neutral: return "neutral";
    }
    return "neutral";
}

/// Case-insensitive lookup; anything outside the seven labels is nullopt.
inline std::optional<Emotion> emotion_from_string(std::string_view s) {
    std::string lower;
    lower.reserve(s.size());
    for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    for (Emotion e : kAllEmotions) {
        if (lower == to_string(e)) return e;
    }
    return std::nullopt;
}

/// Comma-joined lowercase label list, cause labels first, neutral last.
inline std::string emotion_choices() {
    std::string out;
    for (Emotion e : kAllEmotions) {
        if (!out.empty()) out += ", ";
        out += to_string(e);
    }
    return out;
}

} // namespace ecac
