#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <set>

#include "lawline/ingest.hpp"
#include "test_util.hpp"

using namespace lawline;
namespace fs = std::filesystem;

namespace {

const fs::path kDataDir = LAWLINE_TEST_DATA_DIR;

std::size_t error_count(const RecordSet& rs) {
    std::size_t n = 0;
    for (const auto& d : rs.diagnostics)
        if (d.severity == Severity::Error) ++n;
    return n;
}

} // namespace

TEST_CASE("jsonl parsing", "[ingest]") {
    const std::string good =
        R"({"config":{"pretrain_data":"d","architecture":"a","tokenizer":"t"},"params_n":10,"tokens_d":20,"losses":{"x":{"value":1.5,"unit":"nats_per_token"}}})";

    SECTION("well-formed lines round into records") {
        const auto rs = parse_jsonl(good + "\n" + good + "\n" + good + "\n", "mem");
        CHECK(rs.records.size() == 3);
        CHECK(error_count(rs) == 0);
        CHECK(rs.records[0].losses.at("x").value == 1.5);
    }

    SECTION("a line missing params_n becomes a named, line-numbered diagnostic") {
        const std::string bad =
            R"({"config":{"pretrain_data":"d","architecture":"a","tokenizer":"t"},"tokens_d":20,"losses":{"x":{"value":1.5,"unit":"nats_per_token"}}})";
        const auto rs = parse_jsonl(bad + "\n", "mem");
        CHECK(rs.records.empty());
        REQUIRE(rs.diagnostics.size() == 1);
        CHECK(rs.diagnostics[0].line == 1);
        CHECK(std::string(rs.diagnostics[0].message).find("params_n") != std::string::npos);
    }

    SECTION("broken JSON and blank lines") {
        const auto rs = parse_jsonl("\n{not json\n" + good + "\n", "mem");
        CHECK(rs.records.size() == 1);
        REQUIRE(error_count(rs) == 1);
        CHECK(rs.diagnostics[0].line == 2);
    }

    SECTION("order is preserved") {
        std::string two;
        two += R"({"config":{"pretrain_data":"d","architecture":"a","tokenizer":"t"},"params_n":1,"tokens_d":1,"losses":{"x":{"value":1.0,"unit":"nats_per_token"}}})";
        two += "\n";
        two += R"({"config":{"pretrain_data":"d","architecture":"a","tokenizer":"t"},"params_n":2,"tokens_d":1,"losses":{"x":{"value":2.0,"unit":"nats_per_token"}}})";
        two += "\n";
        const auto rs = parse_jsonl(two, "mem");
        REQUIRE(rs.records.size() == 2);
        CHECK(rs.records[0].params_n == 1);
        CHECK(rs.records[1].params_n == 2);
    }
}

TEST_CASE("canonical jsonl round-trips byte-identically", "[ingest][property]") {
    auto w = testutil::recovery_world(0.02);
    w.seeds = {1};
    const RecordSet rs = generate(w, 5);
    const std::string first = to_jsonl(rs);
    const RecordSet reloaded = parse_jsonl(first, "mem");
    REQUIRE(reloaded.records.size() == rs.records.size());
    CHECK(to_jsonl(reloaded) == first);
}

TEST_CASE("csv ingestion of the bundled evaluation grid", "[ingest]") {
    const auto rs = load_records(kDataDir / "mamba_llama_8bt.csv", RecordFormat::Csv);
    REQUIRE(rs.records.size() == 12);
    CHECK(error_count(rs) == 0);

    SECTION("per-row averages match the published columns within 0.01") {
        const auto& expected = testutil::eval_grid_averages();
        for (std::size_t i = 0; i < expected.size(); ++i) {
            const auto& rec = rs.records[i];
            CHECK(rec.config.pretrain_data == expected[i].pretrain);
            CHECK(rec.config.architecture == expected[i].arch);
            CHECK(rec.params_n == expected[i].params);
            CHECK_THAT(average_loss(rec, testutil::validation_sets()),
                       Catch::Matchers::WithinAbs(expected[i].avg_val, 0.01));
            CHECK_THAT(average_loss(rec, testutil::test_sets()),
                       Catch::Matchers::WithinAbs(expected[i].avg_test, 0.01));
        }
    }

    SECTION("unit directive is honored") {
        CHECK(record_unit(rs.records[0]) == LossUnit::NatsPerToken);
    }
}

TEST_CASE("csv parsing details", "[ingest]") {
    SECTION("bpb unit directive") {
        const std::string text =
            "#unit=bpb\npretrain_data,architecture,tokenizer,params_n,tokens_d,seed,step,x\n"
            "d,a,t,10,20,,,1.25\n";
        const auto rs = parse_csv(text, "mem");
        REQUIRE(rs.records.size() == 1);
        CHECK(record_unit(rs.records[0]) == LossUnit::BitsPerByte);
    }

    SECTION("missing directive warns and assumes nats") {
        const std::string text =
            "pretrain_data,architecture,tokenizer,params_n,tokens_d,seed,step,x\nd,a,t,10,20,,,1\n";
        const auto rs = parse_csv(text, "mem");
        REQUIRE(rs.records.size() == 1);
        CHECK(record_unit(rs.records[0]) == LossUnit::NatsPerToken);
        REQUIRE_FALSE(rs.diagnostics.empty());
        CHECK(rs.diagnostics[0].severity == Severity::Warning);
    }

    SECTION("extra.* columns land in config.extra and quoted fields parse") {
        const std::string text =
            "#unit=nats_per_token\n"
            "pretrain_data,architecture,tokenizer,params_n,tokens_d,seed,step,extra.context,x\n"
            "\"d,with,commas\",a,t,10,20,3,7,1024,2.5\n";
        const auto rs = parse_csv(text, "mem");
        REQUIRE(rs.records.size() == 1);
        CHECK(rs.records[0].config.pretrain_data == "d,with,commas");
        CHECK(rs.records[0].config.extra.at("context") == "1024");
        CHECK(rs.records[0].seed == 3);
        CHECK(rs.records[0].step == 7);
    }

    SECTION("bad numeric cell becomes a diagnostic, not an abort") {
        const std::string text =
            "#unit=nats_per_token\n"
            "pretrain_data,architecture,tokenizer,params_n,tokens_d,seed,step,x\n"
            "d,a,t,not_a_number,20,,,1.0\n"
            "d,a,t,10,20,,,1.0\n";
        const auto rs = parse_csv(text, "mem");
        CHECK(rs.records.size() == 1);
        CHECK(error_count(rs) == 1);
    }
}

TEST_CASE("load_records error paths", "[ingest]") {
    CHECK_THROWS_AS(load_records("/nonexistent/path.jsonl", RecordFormat::JsonLines), IoError);

    const fs::path tmp = fs::temp_directory_path() / "lawline_empty_input.jsonl";
    write_file_atomic(tmp, "{broken\n");
    CHECK_THROWS_AS(load_records(tmp, RecordFormat::JsonLines), EmptyInputError);
    fs::remove(tmp);
}

TEST_CASE("grouping partitions records by configuration", "[ingest]") {
    const auto cfg_a = testutil::config("d1", "a", "t");
    const auto cfg_b = testutil::config("d2", "a", "t");

    RecordSet rs;
    rs.source = "mem";
    for (int i = 0; i < 3; ++i)
        rs.records.push_back(testutil::record(cfg_b, 10 + i, 20, {{"x", 1.0 + i}}));
    for (int i = 0; i < 3; ++i)
        rs.records.push_back(testutil::record(cfg_a, 10 + i, 20, {{"x", 2.0 + i}}));

    SECTION("six records over two configs give two groups of three, sorted") {
        const auto groups = group_by_config(rs);
        REQUIRE(groups.size() == 2);
        CHECK(groups[0].config == cfg_a);  // lexicographic: d1 < d2
        CHECK(groups[0].records.size() == 3);
        CHECK(groups[1].records.size() == 3);
    }

    SECTION("the group union is the input multiset") {
        const auto groups = group_by_config(rs);
        std::multiset<std::pair<std::uint64_t, double>> in, out;
        for (const auto& r : rs.records) in.insert({r.params_n, r.losses.at("x").value});
        for (const auto& g : groups)
            for (const auto& r : g.records) out.insert({r.params_n, r.losses.at("x").value});
        CHECK(in == out);
    }

    SECTION("all records in one config give one group") {
        RecordSet one;
        one.records.push_back(testutil::record(cfg_a, 1, 1, {{"x", 1.0}}));
        one.records.push_back(testutil::record(cfg_a, 2, 1, {{"x", 1.0}}));
        CHECK(group_by_config(one).size() == 1);
    }

    SECTION("records differing only in extra are distinct groups") {
        RecordSet two;
        auto r1 = testutil::record(cfg_a, 1, 1, {{"x", 1.0}});
        auto r2 = testutil::record(cfg_a, 1, 1, {{"x", 1.0}});
        r2.config.extra["context"] = "2048";
        two.records = {r1, r2};
        CHECK(group_by_config(two).size() == 2);
    }
}

TEST_CASE("filter_group", "[ingest]") {
    const auto rs = load_records(kDataDir / "mamba_llama_8bt.csv", RecordFormat::Csv);
    const auto groups = group_by_config(rs);

    SECTION("pass-through predicate is the identity") {
        for (const auto& g : groups) {
            const auto same = filter_group(g, [](const CheckpointRecord&) { return true; });
            CHECK(same.records.size() == g.records.size());
        }
    }

    SECTION("false predicate empties the group") {
        const auto none = filter_group(groups[0], [](const CheckpointRecord&) { return false; });
        CHECK(none.records.empty());
        CHECK(none.config == groups[0].config);
    }

    SECTION("size filter keeps exactly the six ~420M rows") {
        std::size_t kept = 0;
        for (const auto& g : groups)
            kept += filter_group(g, [](const CheckpointRecord& r) {
                        return r.params_n >= 400000000;
                    }).records.size();
        CHECK(kept == 6);
    }
}

TEST_CASE("ingest diagnostics for duplicates and ragged coverage", "[ingest]") {
    const auto cfg = testutil::config();
    const std::string line =
        R"({"config":{"pretrain_data":"d","architecture":"a","tokenizer":"t"},"params_n":10,"tokens_d":20,"losses":{"x":{"value":1.5,"unit":"nats_per_token"}}})";
    const std::string ragged =
        R"({"config":{"pretrain_data":"d","architecture":"a","tokenizer":"t"},"params_n":11,"tokens_d":20,"losses":{"x":{"value":1.5,"unit":"nats_per_token"},"y":{"value":2.0,"unit":"nats_per_token"}}})";

    const fs::path tmp = fs::temp_directory_path() / "lawline_dup.jsonl";
    write_file_atomic(tmp, line + "\n" + line + "\n" + ragged + "\n");
    const auto rs = load_records(tmp, RecordFormat::JsonLines);
    fs::remove(tmp);

    CHECK(rs.records.size() == 3);  // duplicates are kept
    bool saw_dup = false, saw_ragged = false;
    for (const auto& d : rs.diagnostics) {
        if (d.message.find("duplicate") != std::string::npos) saw_dup = true;
        if (d.message.find("ragged") != std::string::npos) saw_ragged = true;
        CHECK(d.severity == Severity::Warning);
    }
    CHECK(saw_dup);
    CHECK(saw_ragged);
}

TEST_CASE("averaged pseudo-dataset", "[ingest]") {
    const auto cfg = testutil::config();
    RecordSet rs;
    rs.records.push_back(testutil::record(cfg, 1, 1, {{"a", 1.0}, {"b", 3.0}}));
    rs.records.push_back(testutil::record(cfg, 2, 1, {{"a", 2.0}}));  // missing b

    const std::vector<std::string> labels = {"a", "b"};
    CHECK(average_label(labels) == "avg(a+b)");
    const auto out = with_average_dataset(rs, labels, average_label(labels));
    CHECK(out.records[0].losses.at("avg(a+b)").value == 2.0);
    CHECK(out.records[1].losses.count("avg(a+b)") == 0);
}
