#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fplink/dataset.hpp"
#include "fplink/error.hpp"
#include "fplink/forest.hpp"
#include "fplink/linkers.hpp"
#include "fplink/metrics.hpp"
#include "fplink/store.hpp"

namespace fplink {

inline constexpr std::array<int, 9> kDefaultGapsDays = {1, 7, 15, 30, 60, 90, 180, 270, 365};

struct AttackSpec {
  std::string victim_user_id;
  std::vector<int> gaps_days{kDefaultGapsDays.begin(), kDefaultGapsDays.end()};
  int spoof_validity_days = 5;
};

// In-band marker for spoofed records. Linkers never read user_id, so the tag
// is invisible to them; ground truth stays in the out-of-band counter set.
inline std::string spoof_user_id(const std::string& victim) { return "!attack!" + victim; }

inline void validate_spec(const AttackSpec& spec) {
  if (spec.gaps_days.empty()) throw Error("attack spec needs at least one time gap");
  int prev = 0;
  for (int g : spec.gaps_days) {
    if (g <= prev) throw Error("time gaps must be strictly increasing and positive");
    prev = g;
  }
  if (spec.spoof_validity_days < 0) throw Error("spoof validity must be non-negative");
}

// Byte-exact attribute copies of the victim's oldest record, re-dated by the
// configured time gaps, valid for spoof_validity_days, with updated_date
// absent.
inline std::vector<FingerprintRecord> make_spoofs(const FingerprintStore& store,
                                                  const std::string& victim_user_id,
                                                  const AttackSpec& spec) {
  validate_spec(spec);
  const FingerprintRecord* oldest = nullptr;
  const std::string tag = spoof_user_id(victim_user_id);
  for (const auto& r : store.records) {
    if (r.user_id == victim_user_id && oldest == nullptr) oldest = &r;
    if (r.user_id == tag) throw Error("store already contains attacker records for " + victim_user_id);
  }
  if (oldest == nullptr) throw Error("unknown victim: \"" + victim_user_id + "\"");
  std::vector<FingerprintRecord> spoofs;
  spoofs.reserve(spec.gaps_days.size());
  for (int gap : spec.gaps_days) {
    FingerprintRecord s = *oldest;
    s.user_id = tag;
    s.counter = 0;
    s.created_date = add_days(oldest->created_date, gap);
    s.expired_date = add_days(s.created_date, spec.spoof_validity_days);
    s.updated_date.reset();
    spoofs.push_back(std::move(s));
  }
  return spoofs;
}

// Inserts the spoofs, returning their final counters (later insertions shift
// earlier ones, which is tracked). `shadow` counters are shifted the same way
// so a split boundary pinned on the original store keeps its identity.
inline std::vector<std::uint64_t> inject_spoofs(FingerprintStore& store,
                                                std::vector<FingerprintRecord> spoofs,
                                                std::vector<std::uint64_t>* shadow = nullptr) {
  std::vector<std::uint64_t> counters;
  counters.reserve(spoofs.size());
  for (auto& s : spoofs) {
    std::uint64_t c = insert_record(store, std::move(s));
    for (auto& prev : counters) {
      if (prev >= c) ++prev;
    }
    if (shadow) {
      for (auto& sc : *shadow) {
        if (sc >= c) ++sc;
      }
    }
    counters.push_back(c);
  }
  return counters;
}

struct CampaignConfig {
  std::vector<Algorithm> algorithms = {Algorithm::panopticlick, Algorithm::rla, Algorithm::hla};
  std::vector<int> collect_freqs{kCollectFrequencies.begin(), kCollectFrequencies.end()};
  LinkerConfig thresholds;
  // Fraction of the original store (by counter order) whose expansion is
  // excluded from the replayed stream; 0 replays everything. The boundary is
  // pinned to the identity of the original record at floor(frac*n), so spoof
  // injection never shifts it.
  double train_frac = 0.0;
  std::vector<int> gaps_days{kDefaultGapsDays.begin(), kDefaultGapsDays.end()};
  int spoof_validity_days = 5;
  std::uint64_t seed = 0;
};

using CellKey = std::pair<Algorithm, int>;  // (algorithm, collect frequency)

struct CampaignResult {
  std::string victim;
  std::vector<std::uint64_t> spoof_counters;  // counters in the attacked original store
  std::map<CellKey, AssignmentLog> benign;
  std::map<CellKey, AssignmentLog> attack;
};

namespace detail {

inline std::uint64_t boundary_counter(const FingerprintStore& store, double train_frac) {
  if (train_frac <= 0.0) return 0;
  if (train_frac >= 1.0) throw Error("train_frac must be below 1");
  return static_cast<std::uint64_t>(train_frac * static_cast<double>(store.size()));
}

// Index of the boundary record's first replica in an expanded store; the
// replayed stream is everything from there on.
inline std::size_t test_start_index(const ExpansionResult& ex, std::uint64_t boundary_source) {
  if (boundary_source == 0) return 0;
  for (std::size_t i = 0; i < ex.origins.size(); ++i) {
    if (ex.origins[i].source_counter == boundary_source && ex.origins[i].replica_index == 0) {
      return i;
    }
  }
  throw Error("split boundary record produced no replicas");
}

}  // namespace detail

// Benign replays are victim-independent; run_all shares them across campaigns.
struct BenignCache {
  std::map<int, ExpansionResult> expansions;
  std::map<int, std::size_t> test_starts;
  std::map<CellKey, AssignmentLog> logs;
};

inline BenignCache build_benign_cache(const FingerprintStore& store, const CampaignConfig& cfg,
                                      const ForestModel* model) {
  BenignCache cache;
  const std::uint64_t boundary = detail::boundary_counter(store, cfg.train_frac);
  for (int freq : cfg.collect_freqs) {
    auto ex = expand(store, freq);
    std::size_t start = detail::test_start_index(ex, boundary);
    std::span<const FingerprintRecord> stream(ex.store.records);
    stream = stream.subspan(start);
    for (Algorithm algo : cfg.algorithms) {
      cache.logs[{algo, freq}] = replay(algo, stream, model, cfg.thresholds);
    }
    cache.test_starts[freq] = start;
    cache.expansions.emplace(freq, std::move(ex));
  }
  return cache;
}

// One victim: benign and attack replays for every (algorithm, frequency),
// spoofs injected before expansion and reverted afterwards. The input store
// is untouched; the working copy is verified byte-identical after revert.
inline CampaignResult run_campaign(const FingerprintStore& store, const std::string& victim,
                                   const CampaignConfig& cfg, const ForestModel* model,
                                   const BenignCache* cache = nullptr) {
  for (Algorithm a : cfg.algorithms) {
    if (a == Algorithm::hla && (model == nullptr || !model->trained())) {
      throw Error("model required");
    }
  }
  CampaignResult result;
  result.victim = victim;

  AttackSpec spec;
  spec.victim_user_id = victim;
  spec.gaps_days = cfg.gaps_days;
  spec.spoof_validity_days = cfg.spoof_validity_days;
  auto spoofs = make_spoofs(store, victim, spec);

  FingerprintStore attacked = store;
  std::vector<std::uint64_t> boundary_shadow = {detail::boundary_counter(store, cfg.train_frac)};
  result.spoof_counters = inject_spoofs(attacked, std::move(spoofs), &boundary_shadow);
  const std::uint64_t attack_boundary = boundary_shadow.front();
  const std::uint64_t benign_boundary = detail::boundary_counter(store, cfg.train_frac);
  const std::set<std::uint64_t> spoof_set(result.spoof_counters.begin(),
                                          result.spoof_counters.end());

  for (int freq : cfg.collect_freqs) {
    if (cache != nullptr) {
      for (Algorithm algo : cfg.algorithms) {
        result.benign[{algo, freq}] = cache->logs.at({algo, freq});
      }
    } else {
      auto eb = expand(store, freq);
      std::size_t start = detail::test_start_index(eb, benign_boundary);
      std::span<const FingerprintRecord> stream(eb.store.records);
      stream = stream.subspan(start);
      for (Algorithm algo : cfg.algorithms) {
        result.benign[{algo, freq}] = replay(algo, stream, model, cfg.thresholds);
      }
    }
    auto ea = expand(attacked, freq);
    std::size_t start = detail::test_start_index(ea, attack_boundary);
    std::span<const FingerprintRecord> stream(ea.store.records);
    stream = stream.subspan(start);
    for (Algorithm algo : cfg.algorithms) {
      result.attack[{algo, freq}] = replay(algo, stream, model, cfg.thresholds);
    }
  }

  remove_records(attacked, spoof_set);
  if (!(attacked == store)) throw Error("campaign revert left the store modified");
  return result;
}

// Joins an assignment log with the expanded records behind it: true user for
// genuine records, the victim plus a spoof flag for attacker replicas.
inline LabeledLog label_log(const ExpansionResult& ex,
                            const std::set<std::uint64_t>& spoof_sources,
                            const AssignmentLog& log, const std::string& victim = {}) {
  LabeledLog out;
  out.reserve(log.size());
  for (const auto& a : log) {
    const auto& rec = ex.store.records[a.counter];
    const auto& origin = ex.origins[a.counter];
    LoggedRecord e;
    e.counter = a.counter;
    e.created_date = rec.created_date;
    e.is_spoof = spoof_sources.count(origin.source_counter) > 0;
    e.user_id = e.is_spoof ? victim : rec.user_id;
    e.chain_id = a.chain_id;
    out.push_back(std::move(e));
  }
  return out;
}

// Users in order of first appearance; attacker tags never occur in cleaned
// stores but are skipped defensively on replays of attacked exports.
inline std::vector<std::string> store_users(const FingerprintStore& store) {
  std::vector<std::string> users;
  std::set<std::string> seen;
  for (const auto& r : store.records) {
    if (r.user_id.rfind("!attack!", 0) == 0) continue;
    if (seen.insert(r.user_id).second) users.push_back(r.user_id);
  }
  return users;
}

// Campaigns for every user; `jobs` threads, identical results to a serial
// run. `on_done` (if set) is called under a mutex in victim order.
inline std::vector<CampaignResult> run_all(const FingerprintStore& store,
                                           const CampaignConfig& cfg, const ForestModel* model,
                                           std::size_t jobs = 1) {
  const auto users = store_users(store);
  BenignCache cache = build_benign_cache(store, cfg, model);
  std::vector<CampaignResult> results(users.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < users.size(); ++i) {
      results[i] = run_campaign(store, users[i], cfg, model, &cache);
    }
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (;;) {
          std::size_t i = next.fetch_add(1);
          if (i >= users.size()) return;
          results[i] = run_campaign(store, users[i], cfg, model, &cache);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace fplink
