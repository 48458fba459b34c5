#include <catch2/catch.hpp>

#include "ecac/chain.hpp"

#include "helpers.hpp"

using namespace ecac;

namespace {

// The frozen fixture entries behind the golden prompt files.
DatasetRecord state_record() {
    DatasetRecord r;
    r.conversation_id = 7;
    r.src_id = 4;
    r.tgt_id = 4;
    r.context =
        "Chandler : Hey, you wanted to see me?\n"
        "Monica : I got the job!\n"
        "Chandler : You are kidding me!\n"
        "Monica : They called this morning.";
    r.src_text = "They called this morning.";
    r.tgt_text = "They called this morning.";
    r.labels = {"joy"};
    return r;
}

DatasetRecord cause_record() {
    DatasetRecord r;
    r.conversation_id = 7;
    r.src_id = 2;
    r.tgt_id = 3;
    r.context =
        "Chandler : Hey, you wanted to see me?\n"
        "Monica : I got the job!\n"
        "Chandler : You are kidding me!";
    r.src_text = "I got the job!";
    r.tgt_text = "You are kidding me!";
    r.labels = {"joy", "surprise"};
    return r;
}

constexpr const char* kSpan = "the job news";
constexpr const char* kOpinion = "the speaker is excited about the new job";

ChainResult prior_with(std::initializer_list<const char*> completions, std::optional<Emotion> revised = std::nullopt) {
    ChainResult prior;
    int i = 1;
    for (const char* c : completions) {
        prior.transcripts.push_back({std::to_string(i++), "prompt", c});
    }
    prior.revised_src_state = revised;
    return prior;
}

} // namespace

TEST_CASE("golden prompts: state chain") {
    const auto record = state_record();
    REQUIRE(render_step(ChainKind::state, 0, record, {}) == testutil::golden("state_step1.txt"));
    REQUIRE(render_step(ChainKind::state, 1, record, prior_with({kSpan})) == testutil::golden("state_step2.txt"));
    REQUIRE(render_step(ChainKind::state, 2, record, prior_with({kSpan, kOpinion})) ==
            testutil::golden("state_step3.txt"));
}

TEST_CASE("golden prompts: cause chain") {
    const auto record = cause_record();
    REQUIRE(render_step(ChainKind::cause, 0, record, {}) == testutil::golden("cause_step1.txt"));
    REQUIRE(render_step(ChainKind::cause, 1, record, prior_with({kSpan})) == testutil::golden("cause_step2.txt"));
    REQUIRE(render_step(ChainKind::cause, 2, record, prior_with({kSpan, kOpinion})) ==
            testutil::golden("cause_step3.txt"));
}

TEST_CASE("golden prompts: cause_rr chain renders steps 1, 2, 3.1, 3") {
    const auto record = cause_record();
    // Steps 1 and 2 reuse the cause templates byte for byte.
    REQUIRE(render_step(ChainKind::cause_rr, 0, record, {}) == testutil::golden("cause_step1.txt"));
    REQUIRE(render_step(ChainKind::cause_rr, 1, record, prior_with({kSpan})) == testutil::golden("cause_step2.txt"));
    REQUIRE(render_step(ChainKind::cause_rr, 2, record, prior_with({kSpan, kOpinion})) ==
            testutil::golden("cause_rr_step3_1.txt"));
    REQUIRE(render_step(ChainKind::cause_rr, 3, record, prior_with({kSpan, kOpinion, "joy"}, Emotion::joy)) ==
            testutil::golden("cause_rr_step3.txt"));
}

TEST_CASE("golden prompts: baseline") {
    const auto record = cause_record();
    REQUIRE(render_baseline(record) == testutil::golden("baseline.txt"));
    const std::string prompt = render_baseline(record);
    const std::string choices = "surprise, sadness, joy, disgust, fear, anger, neutral";
    REQUIRE(prompt.size() >= choices.size());
    REQUIRE(prompt.substr(prompt.size() - choices.size()) == choices);
}

TEST_CASE("baseline requires a cause entry") {
    REQUIRE_THROWS_AS(render_baseline(state_record()), ContractError);
    auto mock = MockBackend::ordered({"joy"});
    REQUIRE_THROWS_AS(run_chain(ChainKind::baseline, state_record(), mock), ContractError);
}

TEST_CASE("baseline prompts differ only in the substituted source text") {
    auto a = cause_record();
    auto b = cause_record();
    a.src_text = "alpha signal";
    b.src_text = "beta signal";
    std::string pa = render_baseline(a);
    std::string pb = render_baseline(b);
    REQUIRE(pa != pb);
    const auto pos = pa.find(a.src_text);
    REQUIRE(pos != std::string::npos);
    pa.replace(pos, a.src_text.size(), b.src_text);
    REQUIRE(pa == pb);
}

TEST_CASE("rendering without the prior completions is a contract violation") {
    REQUIRE_THROWS_AS(render_step(ChainKind::state, 1, state_record(), ChainResult{}), ContractError);
    REQUIRE_THROWS_AS(render_step(ChainKind::cause_rr, 3, cause_record(), prior_with({kSpan})), ContractError);
    REQUIRE_THROWS_AS(render_step(ChainKind::state, 9, state_record(), ChainResult{}), ContractError);
}

TEST_CASE("run_chain wires completions through the steps") {
    auto mock = MockBackend::ordered({kSpan, kOpinion, "The emotion is joy."});
    const auto result = run_chain(ChainKind::state, state_record(), mock);
    REQUIRE(result.transcripts.size() == 3);
    REQUIRE(result.transcripts[0].prompt == testutil::golden("state_step1.txt"));
    REQUIRE(result.transcripts[1].prompt == testutil::golden("state_step2.txt"));
    REQUIRE(result.transcripts[2].prompt == testutil::golden("state_step3.txt"));
    REQUIRE(result.span == kSpan);
    REQUIRE(result.opinion == kOpinion);
    REQUIRE(result.final_label == Emotion::joy);
    REQUIRE_FALSE(result.parse_fallback);
}

TEST_CASE("cause_rr executes in order 1, 2, 3.1, 3 and parses the revision") {
    auto mock = MockBackend::ordered({kSpan, kOpinion, "joy", "surprise"});
    const auto result = run_chain(ChainKind::cause_rr, cause_record(), mock);
    REQUIRE(result.transcripts.size() == 4);
    REQUIRE(result.transcripts[0].step == "1");
    REQUIRE(result.transcripts[1].step == "2");
    REQUIRE(result.transcripts[2].step == "3.1");
    REQUIRE(result.transcripts[3].step == "3");
    REQUIRE(result.revised_src_state == Emotion::joy);
    REQUIRE(result.final_label == Emotion::surprise);
    REQUIRE(result.transcripts[3].prompt == testutil::golden("cause_rr_step3.txt"));
}

TEST_CASE("later prompts embed every earlier completion verbatim") {
    for (ChainKind kind : {ChainKind::state, ChainKind::cause, ChainKind::cause_rr}) {
        auto mock = MockBackend::ordered({"span completion text", "opinion completion text", "anger", "anger"});
        const auto record = kind == ChainKind::state ? state_record() : cause_record();
        const auto result = run_chain(kind, record, mock);
        for (std::size_t i = 1; i < result.transcripts.size(); ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                REQUIRE(result.transcripts[i].prompt.find(result.transcripts[j].completion) != std::string::npos);
            }
        }
    }
}

TEST_CASE("chain kinds issue exactly 3/3/4/1 backend calls") {
    const std::vector<std::pair<ChainKind, std::size_t>> expected = {{ChainKind::state, 3},
                                                                     {ChainKind::cause, 3},
                                                                     {ChainKind::cause_rr, 4},
                                                                     {ChainKind::baseline, 1}};
    for (const auto& [kind, calls] : expected) {
        auto mock = MockBackend::pattern({}, std::string("neutral"));
        const auto record = kind == ChainKind::state ? state_record() : cause_record();
        run_chain(kind, record, mock);
        REQUIRE(mock.call_count() == calls);
    }
}

TEST_CASE("parse_emotion scans for label words") {
    REQUIRE(parse_emotion("anger") == Emotion::anger);
    REQUIRE(parse_emotion("not sadness but anger") == Emotion::anger);
    REQUIRE(parse_emotion("anger, although maybe sadness") == Emotion::sadness);
    REQUIRE(parse_emotion("The emotion is Surprise.") == Emotion::surprise);
    REQUIRE(parse_emotion("NEUTRAL") == Emotion::neutral);
    REQUIRE_FALSE(parse_emotion("I cannot tell").has_value());
    REQUIRE_FALSE(parse_emotion("").has_value());
    // Label words match at word boundaries only.
    REQUIRE_FALSE(parse_emotion("that was dangerous").has_value());
    REQUIRE_FALSE(parse_emotion("a joyful moment").has_value());
    REQUIRE(parse_emotion("joy!") == Emotion::joy);
}

TEST_CASE("unparsable final completions are flagged, never defaulted") {
    auto mock = MockBackend::ordered({kSpan, kOpinion, "no answer here"});
    const auto result = run_chain(ChainKind::state, state_record(), mock);
    REQUIRE_FALSE(result.final_label.has_value());
    REQUIRE(result.parse_fallback);
}

namespace {

std::vector<DatasetRecord> numbered_records(std::size_t n) {
    std::vector<DatasetRecord> records;
    for (std::size_t i = 0; i < n; ++i) {
        auto r = cause_record();
        r.src_id = static_cast<int>(i) + 1;
        r.tgt_id = static_cast<int>(i) + 1;
        r.src_text = "entry-" + std::to_string(i);
        records.push_back(std::move(r));
    }
    return records;
}

} // namespace

TEST_CASE("run_batch keeps results in entry order under concurrency") {
    const auto records = numbered_records(10);
    auto mock = MockBackend::pattern({{"entry-3", "sadness"}}, std::string("joy"));
    const auto outcomes = run_batch(ChainKind::cause, records, mock, 4);
    REQUIRE(outcomes.size() == 10);
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        REQUIRE(outcomes[i].index == i);
        REQUIRE(outcomes[i].result.has_value());
        REQUIRE(outcomes[i].result->final_label == (i == 3 ? Emotion::sadness : Emotion::joy));
    }
    REQUIRE_THROWS_AS(run_batch(ChainKind::cause, records, mock, 0), ContractError);
}

TEST_CASE("a cause_rr batch of 5 entries produces 20 transcript steps") {
    const auto records = numbered_records(5);
    auto mock = MockBackend::pattern({}, std::string("neutral"));
    const auto outcomes = run_batch(ChainKind::cause_rr, records, mock, 2);
    std::size_t steps = 0;
    for (const auto& o : outcomes) {
        REQUIRE(o.result.has_value());
        steps += o.result->transcripts.size();
    }
    REQUIRE(steps == 20);
    REQUIRE(mock.call_count() == 20);
}

TEST_CASE("one failing entry does not stop the batch") {
    const auto records = numbered_records(10);
    auto mock = MockBackend::pattern({{"entry-5", "<error>"}}, std::string("joy"));
    const auto outcomes = run_batch(ChainKind::cause, records, mock, 3);
    std::size_t ok = 0;
    for (const auto& o : outcomes) {
        if (o.result) ++ok;
    }
    REQUIRE(ok == 9);
    REQUIRE_FALSE(outcomes[5].result.has_value());
    REQUIRE_FALSE(outcomes[5].error.empty());
}

TEST_CASE("chain errors carry the failing step") {
    auto mock = MockBackend::ordered({kSpan, "<error>"});
    try {
        run_chain(ChainKind::cause, cause_record(), mock);
        FAIL("expected ChainError");
    } catch (const ChainError& e) {
        REQUIRE(e.step_index == 1);
        REQUIRE(e.step_name == "2");
    }
}

TEST_CASE("identical mock scripts produce byte-identical output files") {
    const auto records = numbered_records(3);
    testutil::TempDir dir("determinism");
    auto run_once = [&](const std::string& tag) {
        auto mock = MockBackend::pattern({{"which specific text span", "a span"},
                                          {"implicit opinion", "an opinion"},
                                          {"emotion state of", "joy"},
                                          {"entry-1", "anger"}},
                                         std::string("neutral"));
        const auto outcomes = run_batch(ChainKind::cause_rr, records, mock, 2);
        write_transcripts(ChainKind::cause_rr, records, outcomes, dir.file("t_" + tag + ".jsonl"));
        write_pair_predictions(pair_predictions(records, outcomes), dir.file("p_" + tag + ".jsonl"));
    };
    run_once("a");
    run_once("b");
    REQUIRE(testutil::read_file(dir.file("t_a.jsonl")) == testutil::read_file(dir.file("t_b.jsonl")));
    REQUIRE(testutil::read_file(dir.file("p_a.jsonl")) == testutil::read_file(dir.file("p_b.jsonl")));
}

TEST_CASE("pair predictions suppress neutral and unparsable answers") {
    const auto records = numbered_records(4);
    auto mock = MockBackend::pattern({{"entry-0", "fear"}, {"entry-1", "neutral"}, {"entry-2", "no label at all"}},
                                     std::string("disgust"));
    const auto outcomes = run_batch(ChainKind::cause, records, mock, 1);
    const auto predictions = pair_predictions(records, outcomes);
    REQUIRE(predictions.size() == 2);
    REQUIRE(predictions[0].emotion == Emotion::fear);
    REQUIRE(predictions[0].span == "entry-0");
    REQUIRE(predictions[1].emotion == Emotion::disgust);

    // The unparsable entry is visible in the transcripts as flagged neutral.
    testutil::TempDir dir("labels");
    write_transcripts(ChainKind::cause, records, outcomes, dir.file("t.jsonl"));
    const auto labels = read_transcript_labels(dir.file("t.jsonl"));
    REQUIRE(labels.size() == 4);
    REQUIRE(labels[2].label == Emotion::neutral);
    REQUIRE(labels[2].parse_fallback);
    REQUIRE_FALSE(labels[0].parse_fallback);
}

TEST_CASE("state predictions keep neutral answers") {
    std::vector<DatasetRecord> records = {state_record()};
    auto mock = MockBackend::pattern({}, std::string("neutral"));
    const auto outcomes = run_batch(ChainKind::state, records, mock, 1);
    const auto predictions = state_predictions(records, outcomes);
    REQUIRE(predictions.size() == 1);
    REQUIRE(predictions[0].emotion == Emotion::neutral);
    REQUIRE(predictions[0].utterance_id == 4);
}

TEST_CASE("failed entries appear in transcripts with their error") {
    const auto records = numbered_records(2);
    auto mock = MockBackend::pattern({{"entry-0", "<error>"}}, std::string("joy"));
    const auto outcomes = run_batch(ChainKind::cause, records, mock, 1);
    testutil::TempDir dir("failed");
    write_transcripts(ChainKind::cause, records, outcomes, dir.file("t.jsonl"));
    const auto labels = read_transcript_labels(dir.file("t.jsonl"));
    REQUIRE(labels[0].failed);
    REQUIRE_FALSE(labels[1].failed);
}

TEST_CASE("the shipped template files match the built-in defaults") {
    const auto loaded = load_templates(ECAC_TEMPLATES_DIR);
    REQUIRE(loaded == default_templates());
}

TEST_CASE("template sets save and load through a directory") {
    testutil::TempDir dir("templates");
    save_templates(default_templates(), dir.path.string());
    REQUIRE(load_templates(dir.path.string()) == default_templates());
    std::filesystem::remove(dir.path / "baseline.txt");
    REQUIRE_THROWS_AS(load_templates(dir.path.string()), IoError);
}

TEST_CASE("custom templates flow through rendering") {
    TemplateSet templates = default_templates();
    templates["baseline"] = "ANSWER for {source_text} among {choices}";
    const auto prompt = render_baseline(cause_record(), templates);
    REQUIRE(prompt == "ANSWER for I got the job! among surprise, sadness, joy, disgust, fear, anger, neutral");

    templates["baseline"] = "{unknown_placeholder}";
    REQUIRE_THROWS_AS(render_baseline(cause_record(), templates), ContractError);
    templates["baseline"] = "unclosed {brace";
    REQUIRE_THROWS_AS(render_baseline(cause_record(), templates), ContractError);
}
