#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fplink/error.hpp"
#include "fplink/linkers.hpp"
#include "fplink/time.hpp"

namespace fplink {

// One replayed record joined with its ground truth and assigned chain.
struct LoggedRecord {
  std::uint64_t counter = 0;
  std::int64_t created_date = 0;
  std::string user_id;  // true user for genuine records; victim for spoofs
  bool is_spoof = false;
  int chain_id = 0;
};

using LabeledLog = std::vector<LoggedRecord>;

struct DayCell {
  double value = 0.0;
  std::size_t n = 0;
};

// day index -> (rate, instance count); days without instances are absent.
using DaySeries = std::map<int, DayCell>;

namespace detail {

struct UserAnchor {
  std::int64_t first_date = 0;
  int ref_chain = 0;  // chain of the user's first replayed record
};

inline std::map<std::string, UserAnchor> genuine_anchors(const LabeledLog& log) {
  std::map<std::string, UserAnchor> anchors;
  for (const auto& e : log) {
    if (e.is_spoof) continue;
    if (e.user_id.empty()) {
      throw Error("record " + std::to_string(e.counter) + " has no truth entry");
    }
    anchors.emplace(e.user_id, UserAnchor{e.created_date, e.chain_id});
  }
  return anchors;
}

inline int day_index(std::int64_t t, std::int64_t anchor) {
  std::int64_t d = t - anchor;
  // floor division for the (train-frac) edge case of spoofs before the anchor
  return static_cast<int>(d >= 0 ? d / kSecondsPerDay
                                 : -((-d + kSecondsPerDay - 1) / kSecondsPerDay));
}

}  // namespace detail

// Per-day true positive rate over genuine records. A record is a true
// positive when its chain equals the chain of that user's first replayed
// record; day 0 is each user's own first replayed record.
inline DaySeries tpr_by_day(const LabeledLog& log) {
  auto anchors = detail::genuine_anchors(log);
  std::map<int, std::pair<std::size_t, std::size_t>> buckets;  // day -> (tp, n)
  for (const auto& e : log) {
    if (e.is_spoof) continue;
    const auto& a = anchors.at(e.user_id);
    auto& [tp, n] = buckets[detail::day_index(e.created_date, a.first_date)];
    ++n;
    if (e.chain_id == a.ref_chain) ++tp;
  }
  DaySeries out;
  for (const auto& [day, cell] : buckets) {
    out[day] = {static_cast<double>(cell.first) / static_cast<double>(cell.second),
                cell.second};
  }
  return out;
}

// Per-day false positive rate over spoofed records: a spoof counts when it
// was assigned the victim's chain. Days are relative to the victim's first
// replayed genuine record.
inline DaySeries fpr_by_day(const LabeledLog& log, const std::string& victim_user) {
  auto anchors = detail::genuine_anchors(log);
  auto it = anchors.find(victim_user);
  if (it == anchors.end()) {
    throw Error("victim \"" + victim_user + "\" has no genuine records in the log");
  }
  std::map<int, std::pair<std::size_t, std::size_t>> buckets;  // day -> (fp, n)
  for (const auto& e : log) {
    if (!e.is_spoof) continue;
    auto& [fp, n] = buckets[detail::day_index(e.created_date, it->second.first_date)];
    ++n;
    if (e.chain_id == it->second.ref_chain) ++fp;
  }
  DaySeries out;
  for (const auto& [day, cell] : buckets) {
    out[day] = {static_cast<double>(cell.first) / static_cast<double>(cell.second),
                cell.second};
  }
  return out;
}

struct TrackingStats {
  double avg_tracking_duration_days = 0.0;
  double avg_max_tracking_duration_days = 0.0;
  double avg_ownership = 0.0;
  std::map<std::string, std::size_t> new_ids_per_user;

  double mean_new_ids() const {
    if (new_ids_per_user.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [u, n] : new_ids_per_user) sum += static_cast<double>(n);
    return sum / static_cast<double>(new_ids_per_user.size());
  }
};

// Tracking durations are the created-date spans of maximal same-chain runs of
// a user's records; ownership is the size-weighted majority-user fraction per
// chain. Spoof entries are ignored.
inline TrackingStats tracking_stats(const LabeledLog& log) {
  TrackingStats stats;
  std::map<std::string, std::vector<const LoggedRecord*>> per_user;
  for (const auto& e : log) {
    if (e.is_spoof) continue;
    if (e.user_id.empty()) {
      throw Error("record " + std::to_string(e.counter) + " has no truth entry");
    }
    per_user[e.user_id].push_back(&e);
  }
  double run_sum = 0.0;
  std::size_t run_count = 0;
  double max_sum = 0.0;
  for (const auto& [user, entries] : per_user) {
    double user_max = 0.0;
    std::size_t begin = 0;
    std::map<int, bool> chains_seen;
    for (std::size_t i = 0; i <= entries.size(); ++i) {
      if (i < entries.size()) chains_seen[entries[i]->chain_id] = true;
      if (i == entries.size() || entries[i]->chain_id != entries[begin]->chain_id) {
        const double days =
            static_cast<double>(entries[i - 1]->created_date - entries[begin]->created_date) /
            static_cast<double>(kSecondsPerDay);
        run_sum += days;
        ++run_count;
        user_max = std::max(user_max, days);
        begin = i;
      }
    }
    max_sum += user_max;
    stats.new_ids_per_user[user] = chains_seen.size();
  }
  if (run_count > 0) stats.avg_tracking_duration_days = run_sum / static_cast<double>(run_count);
  if (!per_user.empty()) {
    stats.avg_max_tracking_duration_days = max_sum / static_cast<double>(per_user.size());
  }

  std::map<int, std::map<std::string, std::size_t>> chain_users;
  std::size_t total = 0;
  for (const auto& e : log) {
    if (e.is_spoof) continue;
    ++chain_users[e.chain_id][e.user_id];
    ++total;
  }
  if (total > 0) {
    std::size_t majority_sum = 0;
    for (const auto& [chain, hist] : chain_users) {
      std::size_t best = 0;
      for (const auto& [user, n] : hist) best = std::max(best, n);
      majority_sum += best;
    }
    stats.avg_ownership = static_cast<double>(majority_sum) / static_cast<double>(total);
  }
  return stats;
}

}  // namespace fplink
