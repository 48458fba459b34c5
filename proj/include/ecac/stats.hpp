#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ecac/corpus.hpp"
#include "ecac/predictions.hpp"

namespace ecac {

/// A cause pair with everything the analyses need resolved against its
/// conversation. Shared by the gold-data and prediction-side reports.
struct ResolvedPair {
    int conversation_id = 0;
    int src_id = 0;
    int tgt_id = 0;
    Emotion cause = Emotion::neutral;
    Emotion src_state = Emotion::neutral;
    Emotion tgt_state = Emotion::neutral;
    bool same_speaker = false;

    int delta() const { return tgt_id - src_id; }
};

inline std::vector<ResolvedPair> resolve_gold_pairs(const Corpus& corpus) {
    std::vector<ResolvedPair> out;
    out.reserve(corpus.pair_count());
    for (const auto& conv : corpus.conversations) {
        for (const auto& pair : conv.pairs) {
            const Utterance* src = conv.find_utterance(pair.src_id);
            const Utterance* tgt = conv.find_utterance(pair.tgt_id);
            ResolvedPair r;
            r.conversation_id = conv.id;
            r.src_id = pair.src_id;
            r.tgt_id = pair.tgt_id;
            r.cause = pair.emotion;
            r.src_state = src->state;
            r.tgt_state = tgt->state;
            r.same_speaker = src->speaker == tgt->speaker;
            out.push_back(r);
        }
    }
    return out;
}

/// Utterance states for prediction-side analyses: taken from the corpus
/// when it is annotated, otherwise from a supplied state-prediction set.
using StateLookup = std::map<std::pair<int, int>, Emotion>;

inline StateLookup state_lookup_from_corpus(const Corpus& corpus) {
    StateLookup lookup;
    for (const auto& conv : corpus.conversations) {
        for (const auto& u : conv.utterances) lookup[{conv.id, u.id}] = u.state;
    }
    return lookup;
}

inline StateLookup state_lookup_from_predictions(const std::vector<StatePrediction>& states) {
    StateLookup lookup;
    for (const auto& s : states) lookup[{s.conversation_id, s.utterance_id}] = s.emotion;
    return lookup;
}

inline std::vector<ResolvedPair> resolve_predicted_pairs(const std::vector<PredictedPair>& predictions,
                                                         const Corpus& corpus, const StateLookup& states) {
    std::vector<ResolvedPair> out;
    out.reserve(predictions.size());
    for (const auto& p : predictions) {
        const Conversation* conv = corpus.find_conversation(p.conversation_id);
        if (conv == nullptr) {
            throw ValidationError("prediction references unknown conversation " + std::to_string(p.conversation_id));
        }
        const Utterance* src = conv->find_utterance(p.src_id);
        const Utterance* tgt = conv->find_utterance(p.tgt_id);
        if (src == nullptr || tgt == nullptr) {
            throw ValidationError("prediction references unknown utterance in conversation " +
                                  std::to_string(p.conversation_id));
        }
        ResolvedPair r;
        r.conversation_id = p.conversation_id;
        r.src_id = p.src_id;
        r.tgt_id = p.tgt_id;
        r.cause = p.emotion;
        r.same_speaker = src->speaker == tgt->speaker;
        const auto src_state = states.find({p.conversation_id, p.src_id});
        const auto tgt_state = states.find({p.conversation_id, p.tgt_id});
        if (src_state == states.end() || tgt_state == states.end()) {
            throw ValidationError("no utterance state available for conversation " + std::to_string(p.conversation_id) +
                                  "; provide an annotated corpus or a state-prediction file");
        }
        r.src_state = src_state->second;
        r.tgt_state = tgt_state->second;
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reports. All pair-level analyses run over the delta >= 0 population;
// future-directed pairs (delta < 0) appear only in DistanceReport.
// ---------------------------------------------------------------------------

struct QuantReport {
    std::size_t conversations = 0;
    std::size_t pairs_total = 0;           // pairs with delta >= 0
    std::size_t self_cause_count = 0;      // same utterance (delta == 0)
    std::size_t self_cause_diff_count = 0; // same speaker, different utterance
    double pairs_per_conversation = 0.0;
    double self_cause_pct = 0.0;
    double self_cause_diff_utterance_pct = 0.0;
};

struct DistanceBucket {
    int delta = 0;
    std::size_t count = 0;
    double avg_per_conversation = 0.0;
    double coverage_pct = 0.0; // cumulative share of all delta >= 0 pairs
};

struct DistanceReport {
    std::size_t future_count = 0; // delta < 0
    double future_avg_per_conversation = 0.0;
    std::vector<DistanceBucket> per_delta; // delta in [0, max_delta]
    std::size_t beyond_count = 0;          // delta > max_delta
    std::size_t past_total = 0;            // all pairs with delta >= 0
    std::size_t all_pairs = 0;             // past_total + future_count
};

enum class MatrixDirection {
    caused_by_speaker, // rows keyed by the causing (source) speaker state
    caused_on_speaker, // rows keyed by the affected (target) speaker state
};

/// Row-normalized 7x6 distribution of cause emotions per speaker state.
/// Rows without support stay all-zero and are flagged.
struct StateCauseMatrix {
    MatrixDirection direction = MatrixDirection::caused_by_speaker;
    std::array<std::array<std::size_t, 6>, 7> counts{};
    std::array<std::array<double, 6>, 7> rows{};
    std::array<bool, 7> row_support{};
    std::array<std::size_t, 6> col_totals{};
};

namespace detail {

inline QuantReport quant_from_pairs(const std::vector<ResolvedPair>& pairs, std::size_t conversations) {
    QuantReport q;
    q.conversations = conversations;
    for (const auto& p : pairs) {
        if (p.delta() < 0) continue;
        ++q.pairs_total;
        if (p.src_id == p.tgt_id) ++q.self_cause_count;
        else if (p.same_speaker) ++q.self_cause_diff_count;
    }
    if (conversations > 0) {
        q.pairs_per_conversation = static_cast<double>(q.pairs_total) / static_cast<double>(conversations);
    }
    if (q.pairs_total > 0) {
        q.self_cause_pct = 100.0 * static_cast<double>(q.self_cause_count) / static_cast<double>(q.pairs_total);
        q.self_cause_diff_utterance_pct =
            100.0 * static_cast<double>(q.self_cause_diff_count) / static_cast<double>(q.pairs_total);
    }
    return q;
}

inline DistanceReport distance_from_pairs(const std::vector<ResolvedPair>& pairs, std::size_t conversations,
                                          int max_delta) {
    if (max_delta < 0) throw ContractError("distance_stats: max_delta must be >= 0");
    DistanceReport d;
    std::vector<std::size_t> counts(static_cast<std::size_t>(max_delta) + 1, 0);
    for (const auto& p : pairs) {
        const int delta = p.delta();
        if (delta < 0) ++d.future_count;
        else if (delta > max_delta) { ++d.beyond_count; ++d.past_total; }
        else { ++counts[static_cast<std::size_t>(delta)]; ++d.past_total; }
    }
    d.all_pairs = d.past_total + d.future_count;
    const auto conv = static_cast<double>(conversations);
    if (conversations > 0) d.future_avg_per_conversation = static_cast<double>(d.future_count) / conv;
    std::size_t cumulative = 0;
    for (int delta = 0; delta <= max_delta; ++delta) {
        DistanceBucket b;
        b.delta = delta;
        b.count = counts[static_cast<std::size_t>(delta)];
        cumulative += b.count;
        if (conversations > 0) b.avg_per_conversation = static_cast<double>(b.count) / conv;
        if (d.past_total > 0) {
            b.coverage_pct = 100.0 * static_cast<double>(cumulative) / static_cast<double>(d.past_total);
        }
        d.per_delta.push_back(b);
    }
    return d;
}

inline StateCauseMatrix matrix_from_pairs(const std::vector<ResolvedPair>& pairs, MatrixDirection direction) {
    StateCauseMatrix m;
    m.direction = direction;
    for (const auto& p : pairs) {
        if (p.delta() < 0) continue;
        if (p.cause == Emotion::neutral) continue;
        const Emotion state = direction == MatrixDirection::caused_by_speaker ? p.src_state : p.tgt_state;
        const std::size_t row = emotion_index(state);
        const std::size_t col = emotion_index(p.cause);
        ++m.counts[row][col];
        ++m.col_totals[col];
    }
    for (std::size_t row = 0; row < m.counts.size(); ++row) {
        std::size_t support = 0;
        for (const auto c : m.counts[row]) support += c;
        m.row_support[row] = support > 0;
        if (support == 0) continue;
        for (std::size_t col = 0; col < m.counts[row].size(); ++col) {
            m.rows[row][col] = static_cast<double>(m.counts[row][col]) / static_cast<double>(support);
        }
    }
    return m;
}

} // namespace detail

inline QuantReport quantitative_stats(const Corpus& corpus) {
    if (!corpus.annotated) throw ValidationError("quantitative_stats requires an annotated corpus");
    return detail::quant_from_pairs(resolve_gold_pairs(corpus), corpus.conversations.size());
}

inline DistanceReport distance_stats(const Corpus& corpus, int max_delta = 4) {
    if (!corpus.annotated) throw ValidationError("distance_stats requires an annotated corpus");
    return detail::distance_from_pairs(resolve_gold_pairs(corpus), corpus.conversations.size(), max_delta);
}

inline StateCauseMatrix state_cause_matrix(const Corpus& corpus,
                                           MatrixDirection direction = MatrixDirection::caused_by_speaker) {
    if (!corpus.annotated) throw ValidationError("state_cause_matrix requires an annotated corpus");
    return detail::matrix_from_pairs(resolve_gold_pairs(corpus), direction);
}

struct PredictionStats {
    QuantReport quant;
    DistanceReport distance;
    StateCauseMatrix caused_by;
    StateCauseMatrix caused_on;
};

/// Same analyses over predicted pairs. Conversations are counted from the
/// evaluation corpus; utterance states come from the corpus annotation or,
/// for unannotated corpora, from `predicted_states`.
inline PredictionStats prediction_stats(const std::vector<PredictedPair>& predictions, const Corpus& corpus,
                                        const std::optional<std::vector<StatePrediction>>& predicted_states = std::nullopt,
                                        int max_delta = 4) {
    StateLookup states;
    if (corpus.annotated) states = state_lookup_from_corpus(corpus);
    else if (predicted_states) states = state_lookup_from_predictions(*predicted_states);
    const auto pairs = resolve_predicted_pairs(predictions, corpus, states);
    PredictionStats s;
    s.quant = detail::quant_from_pairs(pairs, corpus.conversations.size());
    s.distance = detail::distance_from_pairs(pairs, corpus.conversations.size(), max_delta);
    s.caused_by = detail::matrix_from_pairs(pairs, MatrixDirection::caused_by_speaker);
    s.caused_on = detail::matrix_from_pairs(pairs, MatrixDirection::caused_on_speaker);
    return s;
}

// ---------------------------------------------------------------------------
// Rendering. Percentages print at 2 decimals, coverage at 1, averages at 2;
// raw counts always appear so rounding never hides information.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

} // namespace detail

// Display order follows the conventional table layout for these analyses.
inline const std::array<Emotion, 7>& matrix_row_order() {
    static const std::array<Emotion, 7> order = {Emotion::joy,     Emotion::surprise, Emotion::anger,
                                                 Emotion::sadness, Emotion::disgust,  Emotion::fear,
                                                 Emotion::neutral};
    return order;
}

inline const std::array<Emotion, 6>& matrix_col_order() {
    static const std::array<Emotion, 6> order = {Emotion::joy,     Emotion::surprise, Emotion::anger,
                                                 Emotion::sadness, Emotion::disgust,  Emotion::fear};
    return order;
}

inline std::string format_quant_table(const QuantReport& q) {
    std::ostringstream out;
    out << "Conversations:                                " << q.conversations << '\n';
    out << "Cause pairs (total):                          " << q.pairs_total << '\n';
    out << "Cause pairs per conversation:                 " << detail::fixed(q.pairs_per_conversation, 2) << '\n';
    out << "Same-utterance causes:                        " << q.self_cause_count << " ("
        << detail::fixed(q.self_cause_pct, 2) << "%)" << '\n';
    out << "Same-speaker causes from another utterance:   " << q.self_cause_diff_count << " ("
        << detail::fixed(q.self_cause_diff_utterance_pct, 2) << "%)" << '\n';
    return out.str();
}

inline std::string format_distance_table(const DistanceReport& d) {
    std::ostringstream out;
    out << "delta     count  per_conversation  coverage%\n";
    out << std::left << std::setw(8) << "future" << std::right << std::setw(7) << d.future_count << std::setw(18)
        << detail::fixed(d.future_avg_per_conversation, 2) << std::setw(11) << "-" << '\n';
    for (const auto& b : d.per_delta) {
        out << std::left << std::setw(8) << b.delta << std::right << std::setw(7) << b.count << std::setw(18)
            << detail::fixed(b.avg_per_conversation, 2) << std::setw(11) << detail::fixed(b.coverage_pct, 1) << '\n';
    }
    if (d.beyond_count > 0) {
        out << std::left << std::setw(8) << ">max" << std::right << std::setw(7) << d.beyond_count << '\n';
    }
    return out.str();
}

inline std::string format_matrix_table(const StateCauseMatrix& m) {
    std::ostringstream out;
    out << (m.direction == MatrixDirection::caused_by_speaker ? "state \\ caused-by-speaker"
                                                              : "state \\ caused-on-speaker");
    for (Emotion col : matrix_col_order()) out << '\t' << to_string(col);
    out << '\n';
    for (Emotion row : matrix_row_order()) {
        out << to_string(row);
        for (Emotion col : matrix_col_order()) {
            out << '\t' << detail::fixed(m.rows[emotion_index(row)][emotion_index(col)], 2);
        }
        if (!m.row_support[emotion_index(row)]) out << "\t(no support)";
        out << '\n';
    }
    return out.str();
}

/// Machine-readable counterpart: `<table>\t<key>\t<value>` per line.
inline std::string tsv_quant(const QuantReport& q, const std::string& table) {
    std::ostringstream out;
    out << table << "\tconversations\t" << q.conversations << '\n';
    out << table << "\tpairs_total\t" << q.pairs_total << '\n';
    out << table << "\tpairs_per_conversation\t" << detail::fixed(q.pairs_per_conversation, 6) << '\n';
    out << table << "\tself_cause_count\t" << q.self_cause_count << '\n';
    out << table << "\tself_cause_pct\t" << detail::fixed(q.self_cause_pct, 6) << '\n';
    out << table << "\tself_cause_diff_count\t" << q.self_cause_diff_count << '\n';
    out << table << "\tself_cause_diff_utterance_pct\t" << detail::fixed(q.self_cause_diff_utterance_pct, 6) << '\n';
    return out.str();
}

inline std::string tsv_distance(const DistanceReport& d, const std::string& table) {
    std::ostringstream out;
    out << table << "\tfuture_count\t" << d.future_count << '\n';
    for (const auto& b : d.per_delta) {
        out << table << "\tcount_delta_" << b.delta << '\t' << b.count << '\n';
        out << table << "\tcoverage_delta_" << b.delta << '\t' << detail::fixed(b.coverage_pct, 6) << '\n';
    }
    out << table << "\tbeyond_count\t" << d.beyond_count << '\n';
    out << table << "\tpast_total\t" << d.past_total << '\n';
    out << table << "\tall_pairs\t" << d.all_pairs << '\n';
    return out.str();
}

inline std::string tsv_matrix(const StateCauseMatrix& m, const std::string& table) {
    std::ostringstream out;
    for (Emotion row : matrix_row_order()) {
        for (Emotion col : matrix_col_order()) {
            out << table << '\t' << to_string(row) << "_" << to_string(col) << '\t'
                << detail::fixed(m.rows[emotion_index(row)][emotion_index(col)], 6) << '\n';
        }
    }
    return out.str();
}

} // namespace ecac
