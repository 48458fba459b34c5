#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "ecac/corpus.hpp"
#include "ecac/corpus_json.hpp"
#include "ecac/predictions.hpp"
#include "ecac/stats.hpp"

namespace ecac {

/// Collapses whitespace runs to single spaces and trims the ends; spans are
/// compared in this normalized form.
inline std::string normalize_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c)) != 0) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += c;
    }
    return out;
}

inline std::size_t longest_common_substring(std::string_view a, std::string_view b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    std::size_t best = 0;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            if (a[i - 1] == b[j - 1]) {
                cur[j] = prev[j - 1] + 1;
                best = std::max(best, cur[j]);
            } else {
                cur[j] = 0;
            }
        }
        std::swap(prev, cur);
    }
    return best;
}

struct SpanCredit {
    double strict = 0.0;
    double proportional = 0.0;
};

/// Strict credit is exact equality of the normalized spans; proportional
/// credit is the longest-common-substring length over the longer normalized
/// span, so strict credit never exceeds proportional credit.
inline SpanCredit span_credit(std::string_view predicted, std::string_view gold) {
    const std::string p = normalize_whitespace(predicted);
    const std::string g = normalize_whitespace(gold);
    SpanCredit credit;
    if (p == g) {
        credit.strict = 1.0;
        credit.proportional = 1.0;
        return credit;
    }
    const std::size_t longer = std::max(p.size(), g.size());
    if (longer > 0) {
        credit.proportional = static_cast<double>(longest_common_substring(p, g)) / static_cast<double>(longer);
    }
    return credit;
}

struct PrfScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EmotionScore {
    PrfScore strict;
    PrfScore proportional;
    std::size_t gold_support = 0;
    std::size_t predicted = 0;
};

struct ScoreReport {
    double f1_weighted_strict = 0.0;
    double f1_weighted_proportional = 0.0;
    double f1_strict = 0.0;
    double f1_proportional = 0.0;
    std::map<Emotion, EmotionScore> per_emotion;
};

namespace detail {

inline PrfScore prf(double credit, std::size_t predicted, std::size_t gold) {
    PrfScore s;
    if (predicted > 0) s.precision = credit / static_cast<double>(predicted);
    if (gold > 0) s.recall = credit / static_cast<double>(gold);
    if (s.precision + s.recall > 0.0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

struct GoldPairKey {
    int conversation_id;
    int src_id;
    int tgt_id;
    Emotion emotion;
    auto operator<=>(const GoldPairKey&) const = default;
};

} // namespace detail

/// Gold pairs flattened out of an annotated corpus; pairs without a span
/// annotation fall back to the full source utterance text.
struct GoldPair {
    int conversation_id = 0;
    int src_id = 0;
    int tgt_id = 0;
    Emotion emotion = Emotion::neutral;
    std::string span;
};

inline std::vector<GoldPair> gold_pairs_from_corpus(const Corpus& corpus) {
    if (!corpus.annotated) throw ValidationError("scoring requires an annotated gold corpus");
    std::vector<GoldPair> out;
    out.reserve(corpus.pair_count());
    for (const auto& conv : corpus.conversations) {
        for (const auto& pair : conv.pairs) {
            GoldPair g;
            g.conversation_id = conv.id;
            g.src_id = pair.src_id;
            g.tgt_id = pair.tgt_id;
            g.emotion = pair.emotion;
            g.span = pair.span ? *pair.span : conv.find_utterance(pair.src_id)->text;
            out.push_back(std::move(g));
        }
    }
    return out;
}

/// Pair-level scoring. A prediction matches gold when conversation, source,
/// target and emotion all agree; span overlap then grades the match. The
/// weighted averages weigh per-emotion F1 by gold support, the unweighted
/// ones average uniformly over emotions that occur in the gold set.
inline ScoreReport score_pairs(const std::vector<PredictedPair>& predictions, const std::vector<GoldPair>& gold) {
    std::set<std::tuple<int, int, int>> seen;
    for (const auto& p : predictions) {
        if (!seen.insert({p.conversation_id, p.src_id, p.tgt_id}).second) {
            throw ValidationError("duplicate prediction for conversation " + std::to_string(p.conversation_id) +
                                  ", pair " + std::to_string(p.src_id) + "->" + std::to_string(p.tgt_id));
        }
        if (p.emotion == Emotion::neutral) {
            throw ValidationError("predicted pairs must carry a non-neutral emotion");
        }
        if (p.span.empty()) {
            throw ValidationError("predicted pairs must carry a nonempty span");
        }
    }

    std::map<detail::GoldPairKey, std::vector<const GoldPair*>> gold_index;
    for (const auto& g : gold) {
        gold_index[{g.conversation_id, g.src_id, g.tgt_id, g.emotion}].push_back(&g);
    }

    struct Tally {
        double strict_credit = 0.0;
        double proportional_credit = 0.0;
        std::size_t predicted = 0;
        std::size_t gold_support = 0;
    };
    std::array<Tally, 6> tallies{};

    for (const auto& g : gold) tallies[emotion_index(g.emotion)].gold_support += 1;
    for (const auto& p : predictions) {
        Tally& t = tallies[emotion_index(p.emotion)];
        t.predicted += 1;
        const auto it = gold_index.find({p.conversation_id, p.src_id, p.tgt_id, p.emotion});
        if (it == gold_index.end()) continue;
        SpanCredit best;
        for (const GoldPair* g : it->second) {
            const SpanCredit credit = span_credit(p.span, g->span);
            best.strict = std::max(best.strict, credit.strict);
            best.proportional = std::max(best.proportional, credit.proportional);
        }
        t.strict_credit += best.strict;
        t.proportional_credit += best.proportional;
    }

    ScoreReport report;
    double weighted_strict = 0.0;
    double weighted_prop = 0.0;
    double sum_strict = 0.0;
    double sum_prop = 0.0;
    std::size_t total_support = 0;
    std::size_t supported_emotions = 0;
    for (Emotion e : kCauseEmotions) {
        const Tally& t = tallies[emotion_index(e)];
        EmotionScore score;
        score.gold_support = t.gold_support;
        score.predicted = t.predicted;
        score.strict = detail::prf(t.strict_credit, t.predicted, t.gold_support);
        score.proportional = detail::prf(t.proportional_credit, t.predicted, t.gold_support);
        report.per_emotion[e] = score;
        if (t.gold_support > 0) {
            total_support += t.gold_support;
            supported_emotions += 1;
            weighted_strict += static_cast<double>(t.gold_support) * score.strict.f1;
            weighted_prop += static_cast<double>(t.gold_support) * score.proportional.f1;
            sum_strict += score.strict.f1;
            sum_prop += score.proportional.f1;
        }
    }
    if (total_support > 0) {
        report.f1_weighted_strict = weighted_strict / static_cast<double>(total_support);
        report.f1_weighted_proportional = weighted_prop / static_cast<double>(total_support);
    }
    if (supported_emotions > 0) {
        report.f1_strict = sum_strict / static_cast<double>(supported_emotions);
        report.f1_proportional = sum_prop / static_cast<double>(supported_emotions);
    }
    return report;
}

inline ScoreReport score_pairs(const std::vector<PredictedPair>& predictions, const Corpus& gold_corpus) {
    return score_pairs(predictions, gold_pairs_from_corpus(gold_corpus));
}

/// Macro-averaged F1 over the seven-label set, restricted to labels that
/// occur in the gold or predicted sequence.
inline double score_dev_classification(const std::vector<Emotion>& predicted, const std::vector<Emotion>& gold) {
    if (predicted.size() != gold.size()) {
        throw ValidationError("dev scoring: " + std::to_string(predicted.size()) + " predictions vs " +
                              std::to_string(gold.size()) + " gold labels");
    }
    std::array<std::size_t, 7> tp{};
    std::array<std::size_t, 7> fp{};
    std::array<std::size_t, 7> fn{};
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (predicted[i] == gold[i]) {
            ++tp[emotion_index(gold[i])];
        } else {
            ++fp[emotion_index(predicted[i])];
            ++fn[emotion_index(gold[i])];
        }
    }
    double sum = 0.0;
    std::size_t classes = 0;
    for (Emotion e : kAllEmotions) {
        const std::size_t i = emotion_index(e);
        if (tp[i] + fp[i] + fn[i] == 0) continue;
        ++classes;
        const double p = tp[i] + fp[i] > 0 ? static_cast<double>(tp[i]) / static_cast<double>(tp[i] + fp[i]) : 0.0;
        const double r = tp[i] + fn[i] > 0 ? static_cast<double>(tp[i]) / static_cast<double>(tp[i] + fn[i]) : 0.0;
        sum += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    return classes > 0 ? sum / static_cast<double>(classes) : 0.0;
}

/// Builds the upload file: the evaluation corpus with the predicted pair
/// lists attached per conversation, in the ingestion schema.
inline nlohmann::ordered_json format_submission(const Corpus& corpus, const std::vector<PredictedPair>& predictions,
                                                const SchemaMapping& schema = {}) {
    Corpus with_pairs = corpus;
    for (auto& conv : with_pairs.conversations) conv.pairs.clear();
    for (const auto& p : predictions) {
        if (p.span.empty()) {
            throw ValidationError("submission rejected: empty span for conversation " +
                                  std::to_string(p.conversation_id));
        }
        if (p.emotion == Emotion::neutral) {
            throw ValidationError("submission rejected: neutral pair for conversation " +
                                  std::to_string(p.conversation_id));
        }
        Conversation* conv = nullptr;
        for (auto& c : with_pairs.conversations) {
            if (c.id == p.conversation_id) {
                conv = &c;
                break;
            }
        }
        if (conv == nullptr || conv->find_utterance(p.src_id) == nullptr ||
            conv->find_utterance(p.tgt_id) == nullptr) {
            throw ValidationError("submission rejected: prediction does not resolve in conversation " +
                                  std::to_string(p.conversation_id));
        }
        conv->pairs.push_back(CausePair{p.src_id, p.tgt_id, p.emotion, p.span});
    }
    return serialize_corpus(with_pairs, schema);
}

inline std::string format_score_report(const ScoreReport& r) {
    std::ostringstream out;
    out << "F1 weighted strict:        " << detail::fixed(100.0 * r.f1_weighted_strict, 2) << '\n';
    out << "F1 weighted proportional:  " << detail::fixed(100.0 * r.f1_weighted_proportional, 2) << '\n';
    out << "F1 strict:                 " << detail::fixed(100.0 * r.f1_strict, 2) << '\n';
    out << "F1 proportional:           " << detail::fixed(100.0 * r.f1_proportional, 2) << '\n';
    out << "emotion\tP_s\tR_s\tF1_s\tP_p\tR_p\tF1_p\tsupport\tpredicted\n";
    for (const auto& [emotion, s] : r.per_emotion) {
        out << to_string(emotion) << '\t' << detail::fixed(s.strict.precision, 4) << '\t'
            << detail::fixed(s.strict.recall, 4) << '\t' << detail::fixed(s.strict.f1, 4) << '\t'
            << detail::fixed(s.proportional.precision, 4) << '\t' << detail::fixed(s.proportional.recall, 4) << '\t'
            << detail::fixed(s.proportional.f1, 4) << '\t' << s.gold_support << '\t' << s.predicted << '\n';
    }
    return out.str();
}

inline std::string tsv_score_report(const ScoreReport& r) {
    std::ostringstream out;
    out << "score\tf1_weighted_strict\t" << detail::fixed(r.f1_weighted_strict, 6) << '\n';
    out << "score\tf1_weighted_proportional\t" << detail::fixed(r.f1_weighted_proportional, 6) << '\n';
    out << "score\tf1_strict\t" << detail::fixed(r.f1_strict, 6) << '\n';
    out << "score\tf1_proportional\t" << detail::fixed(r.f1_proportional, 6) << '\n';
    for (const auto& [emotion, s] : r.per_emotion) {
        out << "score\tf1_strict_" << to_string(emotion) << '\t' << detail::fixed(s.strict.f1, 6) << '\n';
        out << "score\tf1_proportional_" << to_string(emotion) << '\t' << detail::fixed(s.proportional.f1, 6) << '\n';
        out << "score\tsupport_" << to_string(emotion) << '\t' << s.gold_support << '\n';
    }
    return out.str();
}

} // namespace ecac
