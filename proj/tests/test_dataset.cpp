#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "fplink/dataset.hpp"
#include "fplink/rng.hpp"
#include "helpers.hpp"

using namespace fplink;
using testutil::make_record;

namespace {

FingerprintStore small_store() {
  FingerprintStore store;
  insert_record(store, make_record("u1", "2020-01-01 00:00:00", "2020-01-04 00:00:00"));
  insert_record(store, make_record("u2", "2020-01-02 00:00:00", "2020-01-05 00:00:00"));
  auto r = make_record("u1", "2020-01-03 08:30:00", "2020-01-06 00:00:00");
  r.fonts = "Arial,Tab\tSeparated,New\nLine";  // exercises escaping
  insert_record(store, std::move(r));
  return store;
}

}  // namespace

TEST_CASE("export/ingest round trip is byte-stable") {
  auto store = small_store();
  store.records[0].extras.emplace_back("battery_level", "0.93");
  store.records[0].updated_date.reset();
  std::string text = export_store(store);
  auto again = ingest_text(text);
  CHECK(again == store);
  CHECK(export_store(again) == text);
}

TEST_CASE("ingest errors") {
  SECTION("missing created_date names the line") {
    std::string text = "#fpds 1\nuser_id=u1\texpired_date=2020-01-02 00:00:00\n";
    CHECK_THROWS_WITH(ingest_text(text), Catch::Matchers::ContainsSubstring("line 2") &&
                                             Catch::Matchers::ContainsSubstring("created_date"));
  }
  SECTION("duplicate counters are rejected") {
    auto store = small_store();
    store.records[1].counter = 0;
    std::string dup = "#fpds 1\n";
    for (const auto& r : store.records) dup += serialize_record(r) + "\n";
    CHECK_THROWS_WITH(ingest_text(dup), Catch::Matchers::ContainsSubstring("duplicate counter"));
  }
  SECTION("missing header") {
    CHECK_THROWS_WITH(ingest_text("user_id=x\n"), Catch::Matchers::ContainsSubstring("#fpds"));
  }
  SECTION("bad timestamp names the line") {
    std::string text =
        "#fpds 1\nuser_id=u1\tcreated_date=not-a-date\texpired_date=2020-01-02 00:00:00\n";
    CHECK_THROWS_AS(ingest_text(text), Error);
  }
}

TEST_CASE("ingest reassigns counters when absent or inconsistent") {
  // two records, no counters, out of date order in the file
  std::string text =
      "#fpds 1\n"
      "user_id=b\tcreated_date=2020-01-02 00:00:00\texpired_date=2020-01-03 00:00:00\n"
      "user_id=a\tcreated_date=2020-01-01 00:00:00\texpired_date=2020-01-03 00:00:00\n";
  std::vector<std::string> notes;
  auto store = ingest_text(text, &notes);
  REQUIRE(store.size() == 2);
  CHECK(store.records[0].user_id == "a");
  CHECK(store.records[1].user_id == "b");
  CHECK_FALSE(notes.empty());
}

TEST_CASE("clean_consistency removes whole inconsistent users") {
  FingerprintStore store;
  insert_record(store, make_record("ok", "2020-01-01 00:00:00", "2020-01-05 00:00:00"));
  insert_record(store, make_record("ok", "2020-01-02 00:00:00", "2020-01-06 00:00:00"));

  SECTION("os change") {
    auto r1 = make_record("bad", "2020-01-01 06:00:00", "2020-01-05 00:00:00");
    auto r2 = make_record("bad", "2020-01-03 00:00:00", "2020-01-07 00:00:00");
    r2.os = "Ubuntu 20.04";
    insert_record(store, std::move(r1));
    insert_record(store, std::move(r2));
    auto [cleaned, summary] = clean_consistency(store);
    CHECK(summary.n_removed_inconsistent_users == 1);
    CHECK(summary.n_users == 1);
    CHECK(cleaned.size() == 2);
    for (const auto& r : cleaned.records) CHECK(r.user_id == "ok");
  }

  SECTION("browser version downgrade") {
    auto r1 = make_record("bad", "2020-01-01 06:00:00", "2020-01-05 00:00:00");
    r1.browser_version = "88.0";
    auto r2 = make_record("bad", "2020-01-03 00:00:00", "2020-01-07 00:00:00");
    r2.browser_version = "87.0";
    insert_record(store, std::move(r1));
    insert_record(store, std::move(r2));
    auto [cleaned, summary] = clean_consistency(store);
    CHECK(summary.n_removed_inconsistent_users == 1);
    CHECK(cleaned.size() == 2);
  }

  SECTION("consistent store is unchanged and cleaning is idempotent") {
    auto [cleaned, summary] = clean_consistency(store);
    CHECK(cleaned == store);
    CHECK(summary.n_removed_inconsistent_users == 0);
    auto [cleaned2, summary2] = clean_consistency(cleaned);
    CHECK(cleaned2 == cleaned);
  }
}

TEST_CASE("filter_min_fingerprints") {
  FingerprintStore store;
  for (int i = 0; i < 7; ++i) {
    auto r = make_record("seven", "2020-01-01 00:00:00", "2020-02-01 00:00:00");
    r.created_date += i * kSecondsPerDay;
    insert_record(store, std::move(r));
  }
  for (int i = 0; i < 6; ++i) {
    auto r = make_record("six", "2020-01-01 12:00:00", "2020-02-01 00:00:00");
    r.created_date += i * kSecondsPerDay;
    insert_record(store, std::move(r));
  }
  auto [kept, summary] = filter_min_fingerprints(store, 7);
  CHECK(summary.n_removed_small_users == 1);
  CHECK(summary.n_users == 1);
  CHECK(kept.size() == 7);
  for (const auto& r : kept.records) CHECK(r.user_id == "seven");

  SECTION("idempotent") {
    auto [kept2, s2] = filter_min_fingerprints(kept, 7);
    CHECK(kept2 == kept);
    CHECK(s2.n_removed_small_users == 0);
  }

  SECTION("empty store stays empty") {
    FingerprintStore empty;
    auto [kept3, s3] = filter_min_fingerprints(empty, 7);
    CHECK(kept3.empty());
  }
}

TEST_CASE("split") {
  FingerprintStore store;
  for (int i = 0; i < 10; ++i) {
    auto r = make_record("u" + std::to_string(i % 3), "2020-01-01 00:00:00",
                         "2020-02-01 00:00:00");
    r.created_date += i * kSecondsPerDay;
    insert_record(store, std::move(r));
  }

  SECTION("10 records at 0.4 give 4 train, 6 test") {
    auto [train, test] = split(store, 0.4);
    CHECK(train.size() == 4);
    CHECK(test.size() == 6);
    // partition: train ++ test == store (test counters are reindexed)
    for (std::size_t i = 0; i < train.size(); ++i) CHECK(train.records[i] == store.records[i]);
    for (std::size_t i = 0; i < test.size(); ++i) {
      auto expected = store.records[train.size() + i];
      expected.counter = i;
      CHECK(test.records[i] == expected);
    }
  }

  SECTION("degenerate splits are errors") {
    CHECK_THROWS_AS(split(store, 0.01), Error);
    CHECK_THROWS_AS(split(store, 1.0), Error);
    CHECK_THROWS_AS(split(store, 0.0), Error);
  }

  SECTION("floor arithmetic at 15009 records") {
    FingerprintStore big;
    big.records.resize(15009);
    for (std::size_t i = 0; i < big.records.size(); ++i) {
      big.records[i].user_id = "u";
      big.records[i].counter = i;
      big.records[i].created_date = static_cast<std::int64_t>(i);
      big.records[i].expired_date = static_cast<std::int64_t>(i);
    }
    auto [train, test] = split(big, 0.4);
    CHECK(train.size() == 6003);
    CHECK(test.size() == 15009 - 6003);
  }
}

TEST_CASE("expand reproduces the worked validity example") {
  FingerprintStore store;
  insert_record(store, make_record("u1", "2020-01-01 00:00:00", "2020-01-10 00:00:00"));

  SECTION("nine-day validity, frequency 2 -> 5 replicas") {
    auto ex = expand(store, 2);
    CHECK(ex.store.size() == 5);
    for (std::size_t i = 0; i < ex.store.size(); ++i) {
      CHECK(ex.origins[i] == ReplicaOrigin{0, static_cast<std::uint32_t>(i)});
      CHECK(ex.store.records[i].created_date ==
            store.records[0].created_date + static_cast<std::int64_t>(i) * 2 * kSecondsPerDay);
    }
  }

  SECTION("nine-day validity, frequency 4 -> 3 replicas") {
    auto ex = expand(store, 4);
    CHECK(ex.store.size() == 3);
  }

  SECTION("zero-length validity -> single replica") {
    FingerprintStore s2;
    insert_record(s2, make_record("u1", "2020-01-01 00:00:00", "2020-01-01 00:00:00"));
    auto ex = expand(s2, 2);
    CHECK(ex.store.size() == 1);
  }

  SECTION("expired before created -> skipped with a warning") {
    FingerprintStore s3 = store;
    s3.records[0].expired_date = s3.records[0].created_date - 1;
    auto ex = expand(s3, 2);
    CHECK(ex.store.empty());
    REQUIRE_FALSE(ex.warnings.empty());
  }

  SECTION("non-standard frequency warns") {
    auto ex = expand(store, 9);
    CHECK_FALSE(ex.warnings.empty());
  }
}

TEST_CASE("expand stops at the next record of the same user") {
  FingerprintStore store;
  insert_record(store, make_record("u1", "2020-01-01 00:00:00", "2020-01-20 00:00:00"));
  insert_record(store, make_record("u1", "2020-01-05 00:00:00", "2020-01-09 00:00:00"));
  auto ex = expand(store, 1);
  // first record: days 0..4 (next record at +4d), second: 4 days of validity
  std::size_t first = 0, second = 0;
  for (const auto& o : ex.origins) (o.source_counter == 0 ? first : second)++;
  CHECK(first == 5);
  CHECK(second == 5);
  check_store(ex.store);
}

TEST_CASE("expand preserves attribute bytes and matches the count oracle (randomized)") {
  Rng rng(99);
  for (int iter = 0; iter < 250; ++iter) {
    FingerprintStore store;
    const int fc = static_cast<int>(1 + rng.bounded(8));
    const std::int64_t t0 = parse_timestamp("2020-01-01 00:00:00") +
                            static_cast<std::int64_t>(rng.bounded(1000)) * 3600;
    const std::int64_t validity = static_cast<std::int64_t>(rng.bounded(40)) * kSecondsPerDay +
                                  static_cast<std::int64_t>(rng.bounded(86400));
    const std::int64_t gap = static_cast<std::int64_t>(rng.bounded(30)) * kSecondsPerDay +
                             static_cast<std::int64_t>(rng.bounded(86400));
    auto r1 = make_record("u1", "2020-01-01 00:00:00", "2020-01-01 00:00:00");
    r1.created_date = t0;
    r1.expired_date = t0 + validity;
    auto r2 = make_record("u1", "2020-01-01 00:00:00", "2020-01-01 00:00:00");
    r2.created_date = t0 + gap;
    r2.expired_date = t0 + gap + validity / 2;
    r2.fonts += ",Marker";
    insert_record(store, std::move(r1));
    insert_record(store, std::move(r2));

    auto ex = expand(store, fc);
    std::size_t count0 = 0, count1 = 0;
    for (std::size_t i = 0; i < ex.origins.size(); ++i) {
      const auto& src = store.records[ex.origins[i].source_counter];
      const auto& rep = ex.store.records[i];
      // only timestamps and counters may differ
      auto probe = rep;
      probe.counter = src.counter;
      probe.created_date = src.created_date;
      probe.expired_date = src.expired_date;
      probe.updated_date = src.updated_date;
      REQUIRE(probe == src);
      (ex.origins[i].source_counter == store.records[0].counter ? count0 : count1)++;
    }
    const auto& a = store.records[0];
    const auto& b = store.records[1];
    REQUIRE(count0 == testutil::replica_count_oracle(a.created_date, a.expired_date,
                                                     b.created_date, fc));
    REQUIRE(count1 ==
            testutil::replica_count_oracle(b.created_date, b.expired_date, std::nullopt, fc));
  }
}

TEST_CASE("synthesize") {
  SyntheticConfig cfg;
  cfg.n_users = 2;
  cfg.records_per_user = 3;
  cfg.span_days = 30;
  cfg.seed = 5;

  SECTION("two stable users give six records with two attribute profiles") {
    auto store = synthesize(cfg);
    REQUIRE(store.size() == 6);
    std::set<std::string> agents;
    for (const auto& r : store.records) agents.insert(r.user_agent);
    CHECK(agents.size() == 2);
  }

  SECTION("same config and seed reproduce the same store") {
    CHECK(synthesize(cfg) == synthesize(cfg));
    CHECK(store_hash(synthesize(cfg)) == store_hash(synthesize(cfg)));
  }

  SECTION("distinct users differ in at least 3 of the four identity attributes") {
    cfg.n_users = 6;
    auto store = synthesize(cfg);
    auto groups = detail::group_by_user(store);
    for (std::size_t i = 0; i < groups.size(); ++i) {
      for (std::size_t j = i + 1; j < groups.size(); ++j) {
        const auto& a = store.records[groups[i].second[0]];
        const auto& b = store.records[groups[j].second[0]];
        int diffs = (a.os != b.os) + (a.user_agent != b.user_agent) +
                    (a.canvas_hash != b.canvas_hash) + (a.fonts != b.fonts);
        CHECK(diffs >= 3);
      }
    }
  }

  SECTION("version_bump bumps mid-series") {
    cfg.drift = DriftModel::version_bump;
    auto store = synthesize(cfg);
    auto groups = detail::group_by_user(store);
    for (const auto& [uid, idxs] : groups) {
      CHECK(store.records[idxs.front()].browser_version !=
            store.records[idxs.back()].browser_version);
    }
  }

  SECTION("attr_churn mutates only the four mutable attributes") {
    cfg.drift = DriftModel::attr_churn;
    cfg.churn_rate = 0.5;
    cfg.records_per_user = 10;
    auto store = synthesize(cfg);
    auto groups = detail::group_by_user(store);
    bool any_churn = false;
    for (const auto& [uid, idxs] : groups) {
      const auto& first = store.records[idxs.front()];
      for (std::size_t k : idxs) {
        const auto& r = store.records[k];
        CHECK(r.os == first.os);
        CHECK(r.user_agent == first.user_agent);
        CHECK(r.canvas_hash == first.canvas_hash);
        if (r.timezone != first.timezone || r.resolution != first.resolution ||
            r.plugins != first.plugins || r.fonts != first.fonts) {
          any_churn = true;
        }
      }
    }
    CHECK(any_churn);
  }
}
