#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

#include "fplink/error.hpp"
#include "fplink/record.hpp"

namespace fplink {

// Ordered collection of records. Counters are dense 0..n-1 and their order is
// consistent with non-decreasing created_date. The store is a value: clone it
// per campaign run, share read-only across workers.
struct FingerprintStore {
  std::vector<FingerprintRecord> records;

  bool operator==(const FingerprintStore&) const = default;
  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

// Places rec immediately after the last record whose created_date <= rec's,
// shifts later counters by one, and returns the assigned counter.
inline std::uint64_t insert_record(FingerprintStore& store, FingerprintRecord rec) {
  auto pos = std::upper_bound(
      store.records.begin(), store.records.end(), rec.created_date,
      [](std::int64_t t, const FingerprintRecord& r) { return t < r.created_date; });
  std::uint64_t assigned = static_cast<std::uint64_t>(pos - store.records.begin());
  rec.counter = assigned;
  pos = store.records.insert(pos, std::move(rec));
  for (auto it = pos + 1; it != store.records.end(); ++it) ++it->counter;
  return assigned;
}

// Removes the given counters and reindexes the rest densely from 0. Removing
// exactly a set of previously inserted records restores the prior store
// byte for byte.
inline void remove_records(FingerprintStore& store, const std::set<std::uint64_t>& counters) {
  for (std::uint64_t c : counters) {
    if (c >= store.records.size()) throw Error("counter not present: " + std::to_string(c));
  }
  std::vector<FingerprintRecord> kept;
  kept.reserve(store.records.size() - counters.size());
  for (auto& r : store.records) {
    if (!counters.count(r.counter)) kept.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i].counter = i;
  store.records = std::move(kept);
}

// Invariant check used by tests and ingestion.
inline void check_store(const FingerprintStore& store) {
  for (std::size_t i = 0; i < store.records.size(); ++i) {
    const auto& r = store.records[i];
    if (r.counter != i) throw Error("store counters not dense at " + std::to_string(i));
    if (r.created_date > r.expired_date) {
      throw Error("record " + std::to_string(i) + ": created_date after expired_date");
    }
    if (i > 0 && store.records[i - 1].created_date > r.created_date) {
      throw Error("store not ordered by created_date at " + std::to_string(i));
    }
  }
}

}  // namespace fplink
