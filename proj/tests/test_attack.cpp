#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "fplink/archive.hpp"
#include "fplink/attack.hpp"
#include "helpers.hpp"

using namespace fplink;
namespace fs = std::filesystem;

namespace {

FingerprintStore tiny_stable_store() {
  SyntheticConfig cfg;
  cfg.n_users = 4;
  cfg.records_per_user = 5;
  cfg.span_days = 20;
  cfg.seed = 3;
  return synthesize(cfg);
}

CampaignConfig tiny_config() {
  CampaignConfig cfg;
  cfg.collect_freqs = {1, 4};
  cfg.seed = 3;
  return cfg;
}

const ForestModel& tiny_model() {
  static const ForestModel model = train(make_separable_pairs(64), ForestHyperparams{}, 17);
  return model;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("fplink_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("make_spoofs") {
  auto store = tiny_stable_store();
  AttackSpec spec;
  spec.victim_user_id = "u1";
  auto spoofs = make_spoofs(store, "u1", spec);
  REQUIRE(spoofs.size() == 9);

  const FingerprintRecord* oldest = nullptr;
  for (const auto& r : store.records) {
    if (r.user_id == "u1") {
      oldest = &r;
      break;
    }
  }
  REQUIRE(oldest != nullptr);

  SECTION("time gaps re-date the copies") {
    CHECK(spoofs[0].created_date == add_days(oldest->created_date, 1));
    CHECK(spoofs[8].created_date == add_days(oldest->created_date, 365));
    for (const auto& s : spoofs) {
      CHECK(s.expired_date == add_days(s.created_date, 5));
      CHECK_FALSE(s.updated_date.has_value());
      CHECK(s.user_id == spoof_user_id("u1"));
    }
  }

  SECTION("every fingerprint attribute is byte-identical to the source") {
    for (const auto& s : spoofs) {
      for (Attr a : kAllAttrs) {
        CHECK(attr_value(s, a) == attr_value(*oldest, a));
      }
      CHECK(s.extras == oldest->extras);
    }
  }

  SECTION("unknown victim and bad specs are errors") {
    CHECK_THROWS_WITH(make_spoofs(store, "nobody", spec),
                      Catch::Matchers::ContainsSubstring("unknown victim"));
    AttackSpec bad = spec;
    bad.gaps_days = {5, 5};
    CHECK_THROWS_AS(make_spoofs(store, "u1", bad), Error);
  }
}

TEST_CASE("inject_spoofs preserves order and reverts to the original bytes") {
  auto store = tiny_stable_store();
  const auto before = store;
  AttackSpec spec;
  spec.victim_user_id = "u0";
  auto counters = inject_spoofs(store, make_spoofs(store, "u0", spec));
  CHECK(store.size() == before.size() + 9);
  check_store(store);
  // pre-existing records keep their relative order
  std::vector<const FingerprintRecord*> genuine;
  for (const auto& r : store.records) {
    if (r.user_id.rfind("!attack!", 0) != 0) genuine.push_back(&r);
  }
  REQUIRE(genuine.size() == before.size());
  for (std::size_t i = 0; i < genuine.size(); ++i) {
    auto probe = *genuine[i];
    probe.counter = before.records[i].counter;
    CHECK(probe == before.records[i]);
  }
  remove_records(store, {counters.begin(), counters.end()});
  CHECK(store == before);
}

TEST_CASE("run_campaign on a stable store links every spoof to the victim") {
  auto store = tiny_stable_store();
  auto cfg = tiny_config();
  const auto before = store;
  auto result = run_campaign(store, "u2", cfg, &tiny_model());
  CHECK(store == before);  // side-effect free
  REQUIRE(result.spoof_counters.size() == 9);

  FingerprintStore attacked = store;
  auto counters = inject_spoofs(attacked, make_spoofs(store, "u2", AttackSpec{"u2"}));
  REQUIRE(counters == result.spoof_counters);
  const std::set<std::uint64_t> spoof_set(counters.begin(), counters.end());

  for (int freq : cfg.collect_freqs) {
    auto ea = expand(attacked, freq);
    for (Algorithm algo : cfg.algorithms) {
      auto labeled = label_log(ea, spoof_set, result.attack.at({algo, freq}), "u2");
      // the victim's chain is the chain of their first replayed record
      int victim_chain = -1;
      std::size_t spoof_instances = 0;
      for (const auto& e : labeled) {
        if (!e.is_spoof && e.user_id == "u2" && victim_chain < 0) victim_chain = e.chain_id;
        if (e.is_spoof) {
          ++spoof_instances;
          CHECK(e.chain_id == victim_chain);
        }
      }
      CHECK(spoof_instances > 0);
      auto series = fpr_by_day(labeled, "u2");
      for (const auto& [day, cell] : series) {
        CHECK(cell.value == 1.0);
        CHECK(cell.n == 1);  // one spoof instance per day
      }
    }
  }
}

TEST_CASE("attack replay restricted to genuine records equals the benign replay") {
  auto store = tiny_stable_store();
  auto cfg = tiny_config();
  auto result = run_campaign(store, "u1", cfg, &tiny_model());

  FingerprintStore attacked = store;
  auto counters = inject_spoofs(attacked, make_spoofs(store, "u1", AttackSpec{"u1"}));
  const std::set<std::uint64_t> spoof_set(counters.begin(), counters.end());

  for (int freq : cfg.collect_freqs) {
    auto eb = expand(store, freq);
    auto ea = expand(attacked, freq);
    for (Algorithm algo : cfg.algorithms) {
      auto benign = label_log(eb, {}, result.benign.at({algo, freq}));
      auto attack = label_log(ea, spoof_set, result.attack.at({algo, freq}), "u1");
      std::vector<std::pair<std::string, int>> benign_assign, attack_assign;
      for (const auto& e : benign) benign_assign.push_back({e.user_id, e.chain_id});
      for (const auto& e : attack) {
        if (!e.is_spoof) attack_assign.push_back({e.user_id, e.chain_id});
      }
      CHECK(benign_assign == attack_assign);
    }
  }
}

TEST_CASE("campaigns are deterministic and parallel run_all matches serial") {
  auto store = tiny_stable_store();
  auto cfg = tiny_config();
  auto r1 = run_all(store, cfg, &tiny_model(), 1);
  auto r2 = run_all(store, cfg, &tiny_model(), 3);
  REQUIRE(r1.size() == 4);
  REQUIRE(r2.size() == r1.size());
  for (std::size_t i = 0; i < r1.size(); ++i) {
    CHECK(r1[i].victim == r2[i].victim);
    CHECK(r1[i].spoof_counters == r2[i].spoof_counters);
    CHECK(r1[i].benign == r2[i].benign);
    CHECK(r1[i].attack == r2[i].attack);
  }
}

TEST_CASE("train_frac pins the boundary to the original record") {
  auto store = tiny_stable_store();
  auto cfg = tiny_config();
  cfg.train_frac = 0.4;
  cfg.collect_freqs = {2};
  auto result = run_campaign(store, "u0", cfg, &tiny_model());
  // the benign and attack streams must start at the same source record
  auto eb = expand(store, 2);
  const std::uint64_t boundary =
      static_cast<std::uint64_t>(0.4 * static_cast<double>(store.size()));
  const auto& first_benign =
      result.benign.at({Algorithm::panopticlick, 2}).front();
  CHECK(eb.origins[first_benign.counter].source_counter == boundary);
  CHECK(eb.origins[first_benign.counter].replica_index == 0);

  FingerprintStore attacked = store;
  std::vector<std::uint64_t> shadow = {boundary};
  inject_spoofs(attacked, make_spoofs(store, "u0", AttackSpec{"u0"}), &shadow);
  auto ea = expand(attacked, 2);
  const auto& first_attack = result.attack.at({Algorithm::panopticlick, 2}).front();
  CHECK(ea.origins[first_attack.counter].source_counter == shadow.front());
  CHECK(ea.origins[first_attack.counter].replica_index == 0);
  // same underlying record
  auto b = eb.store.records[first_benign.counter];
  auto a = ea.store.records[first_attack.counter];
  a.counter = b.counter;
  CHECK(a == b);
}

TEST_CASE("archive round trip, resume and corruption") {
  auto store = tiny_stable_store();
  auto cfg = tiny_config();
  auto dir = fresh_dir("archive");

  auto ran = run_all_to_archive(store, cfg, &tiny_model(), dir, 1);
  CHECK(ran.size() == 4);

  SECTION("logs round trip exactly") {
    auto manifest = load_run_manifest(dir);
    CHECK(manifest.dataset_hash == store_hash(store));
    auto result = run_campaign(store, "u0", cfg, &tiny_model());
    auto loaded = load_campaign(manifest, dir, "u0");
    CHECK(loaded.benign == result.benign);
    CHECK(loaded.attack == result.attack);
    CHECK(loaded.spoof_counters == result.spoof_counters);
  }

  SECTION("a complete archive is skipped on rerun") {
    std::vector<std::string> skipped;
    auto again = run_all_to_archive(store, cfg, &tiny_model(), dir, 1, &skipped);
    CHECK(again.empty());
    CHECK(skipped.size() == 4);
  }

  SECTION("reruns write byte-identical archives") {
    auto dir2 = fresh_dir("archive2");
    run_all_to_archive(store, cfg, &tiny_model(), dir2, 1);
    for (auto& p : fs::recursive_directory_iterator(dir)) {
      if (!p.is_regular_file()) continue;
      auto rel = fs::relative(p.path(), dir);
      CHECK(detail::read_text(p.path()) == detail::read_text(dir2 / rel));
    }
    fs::remove_all(dir2);
  }

  SECTION("corrupted victim directories are reported by name") {
    fs::remove(dir / "u1" / "pano_f1_attack.log");
    auto manifest = load_run_manifest(dir);
    CHECK_THROWS_WITH(campaign_complete(manifest, dir, "u1", true),
                      Catch::Matchers::ContainsSubstring("u1"));
  }

  fs::remove_all(dir);
}

TEST_CASE("hla campaigns require a model") {
  auto store = tiny_stable_store();
  auto cfg = tiny_config();
  CHECK_THROWS_WITH(run_campaign(store, "u0", cfg, nullptr),
                    Catch::Matchers::ContainsSubstring("model required"));
  cfg.algorithms = {Algorithm::panopticlick, Algorithm::rla};
  CHECK_NOTHROW(run_campaign(store, "u0", cfg, nullptr));
}
