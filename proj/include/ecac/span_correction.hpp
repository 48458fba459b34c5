#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ecac/corpus.hpp"
#include "ecac/errors.hpp"

namespace ecac {

// The conventional 32-character ASCII punctuation set.
inline constexpr std::string_view kAsciiPunctuation = R"(!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~)";

inline bool is_ascii_punct(char c) {
    return kAsciiPunctuation.find(c) != std::string_view::npos;
}

inline bool is_space_char(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && is_space_char(s[begin])) ++begin;
    while (end > begin && is_space_char(s[end - 1])) --end;
    return std::string(s.substr(begin, end - begin));
}

inline std::size_t word_count(std::string_view s) {
    std::size_t words = 0;
    bool in_word = false;
    for (char c : s) {
        if (is_space_char(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++words;
        }
    }
    return words;
}

} // namespace detail

/// Affix vocabularies harvested from gold span annotations. Every prefix
/// entry ends with a punctuation sign, every suffix entry starts with one,
/// and no entry exceeds five whitespace-delimited words.
struct AffixVocabulary {
    std::set<std::string> prefixes;
    std::set<std::string> suffixes;

    bool operator==(const AffixVocabulary&) const = default;
};

inline bool valid_prefix_entry(std::string_view entry) {
    return !entry.empty() && detail::word_count(entry) <= 5 && is_ascii_punct(entry.back());
}

inline bool valid_suffix_entry(std::string_view entry) {
    return !entry.empty() && detail::word_count(entry) <= 5 && is_ascii_punct(entry.front());
}

struct VocabularyBuildResult {
    AffixVocabulary vocabulary;
    std::vector<std::string> warnings; // spans that were not found in their utterance
};

/// Harvests candidates from the text before/after each gold span (first
/// occurrence), trims surrounding whitespace, keeps candidates passing the
/// entry criteria, and collapses duplicates.
inline VocabularyBuildResult build_vocabularies(const Corpus& corpus) {
    if (!corpus.annotated) throw ValidationError("build_vocabularies requires an annotated corpus");
    VocabularyBuildResult result;
    for (const auto& conv : corpus.conversations) {
        for (const auto& pair : conv.pairs) {
            if (!pair.span) continue;
            const Utterance* src = conv.find_utterance(pair.src_id);
            const std::string& text = src->text;
            const std::size_t pos = text.find(*pair.span);
            if (pair.span->empty() || pos == std::string::npos) {
                result.warnings.push_back("conversation " + std::to_string(conv.id) + ", utterance " +
                                          std::to_string(pair.src_id) + ": span not found in utterance text");
                continue;
            }
            const std::string before = detail::trim(std::string_view(text).substr(0, pos));
            const std::string after = detail::trim(std::string_view(text).substr(pos + pair.span->size()));
            if (valid_prefix_entry(before)) result.vocabulary.prefixes.insert(before);
            if (valid_suffix_entry(after)) result.vocabulary.suffixes.insert(after);
        }
    }
    return result;
}

/// Semantic mode strips prefix entries from the front and suffix entries
/// from the back. Literal mode keeps the published algorithm's direction:
/// prefix entries match the *end* of the text and suffix entries the front.
enum class CorrectionMode { semantic, literal };

namespace detail {

inline std::vector<std::string> by_length_desc(const std::set<std::string>& entries) {
    std::vector<std::string> sorted(entries.begin(), entries.end());
    std::sort(sorted.begin(), sorted.end(), [](const std::string& a, const std::string& b) {
        const auto wa = word_count(a);
        const auto wb = word_count(b);
        if (wa != wb) return wa > wb;
        if (a.size() != b.size()) return a.size() > b.size();
        return a < b;
    });
    return sorted;
}

// Repeats until nothing matched or the text emptied; entries are tried
// longest-first and at most one strips per iteration.
inline std::string strip_affixes(std::string text, const std::vector<std::string>& sorted, bool from_front) {
    bool updated = true;
    while (!text.empty() && updated) {
        updated = false;
        for (const auto& entry : sorted) {
            if (entry.empty() || entry.size() > text.size()) continue;
            const std::string_view view(text);
            if (from_front && view.starts_with(entry)) {
                text = trim(view.substr(entry.size()));
                updated = true;
                break;
            }
            if (!from_front && view.ends_with(entry)) {
                text = trim(view.substr(0, view.size() - entry.size()));
                updated = true;
                break;
            }
        }
    }
    return text;
}

} // namespace detail

inline std::string correct_prefixes(const std::string& text, const std::set<std::string>& prefixes,
                                    CorrectionMode mode = CorrectionMode::semantic) {
    const auto sorted = detail::by_length_desc(prefixes);
    return detail::strip_affixes(text, sorted, mode == CorrectionMode::semantic);
}

inline std::string correct_suffixes(const std::string& text, const std::set<std::string>& suffixes,
                                    CorrectionMode mode = CorrectionMode::semantic) {
    const auto sorted = detail::by_length_desc(suffixes);
    return detail::strip_affixes(text, sorted, mode != CorrectionMode::semantic);
}

struct SpanCorrection {
    std::string text;
    bool reverted = false; // the passes emptied the span and it was kept as-is
};

/// Prefix pass then suffix pass; a result that emptied out reverts to the
/// uncorrected input, so the output is always a nonempty contiguous
/// substring of it.
inline SpanCorrection correct_span_verbose(const std::string& text, const AffixVocabulary& vocab,
                                           CorrectionMode mode = CorrectionMode::semantic) {
    if (text.empty()) throw ContractError("correct_span: text must be nonempty");
    // Work on the trimmed text: affix matches are anchored at the ends, so
    // surrounding whitespace would shadow them on the first pass only and
    // break idempotence.
    std::string corrected = correct_prefixes(detail::trim(text), vocab.prefixes, mode);
    corrected = correct_suffixes(corrected, vocab.suffixes, mode);
    if (corrected.empty()) return {text, true};
    return {std::move(corrected), false};
}

inline std::string correct_span(const std::string& text, const AffixVocabulary& vocab,
                                CorrectionMode mode = CorrectionMode::semantic) {
    return correct_span_verbose(text, vocab, mode).text;
}

/// Strips leading and trailing punctuation and whitespace. May return an
/// empty string; callers needing a nonempty span fall back themselves.
inline std::string default_punct_trim(const std::string& text) {
    std::size_t begin = 0;
    std::size_t end = text.size();
    while (begin < end && (is_ascii_punct(text[begin]) || is_space_char(text[begin]))) ++begin;
    while (end > begin && (is_ascii_punct(text[end - 1]) || is_space_char(text[end - 1]))) --end;
    return text.substr(begin, end - begin);
}

// ---------------------------------------------------------------------------
// Plain-text persistence: one entry per line under a section heading,
// bytewise sorted for stable diffs.
// ---------------------------------------------------------------------------

inline void save_vocabulary(const AffixVocabulary& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open vocabulary output: " + path);
    out << "[prefixes]\n";
    for (const auto& entry : vocab.prefixes) {
        if (entry.find('\n') != std::string::npos) continue;
        out << entry << '\n';
    }
    out << "[suffixes]\n";
    for (const auto& entry : vocab.suffixes) {
        if (entry.find('\n') != std::string::npos) continue;
        out << entry << '\n';
    }
    if (!out) throw IoError("failed writing vocabulary to " + path);
}

inline AffixVocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocabulary file: " + path);
    AffixVocabulary vocab;
    std::set<std::string>* section = nullptr;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line == "[prefixes]") {
            section = &vocab.prefixes;
            continue;
        }
        if (line == "[suffixes]") {
            section = &vocab.suffixes;
            continue;
        }
        if (line.empty()) continue;
        if (section == nullptr) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": entry outside a section");
        }
        const bool ok = section == &vocab.prefixes ? valid_prefix_entry(line) : valid_suffix_entry(line);
        if (!ok) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": entry violates the vocabulary criteria (max 5 words, punctuation boundary)");
        }
        section->insert(line);
    }
    return vocab;
}

} // namespace ecac
