#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fplink/archive.hpp"
#include "fplink/attack.hpp"
#include "fplink/metrics.hpp"

namespace fplink {

namespace detail {

inline std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// Pools per-day series across campaigns: sum of numerators over sum of
// instance counts.
struct PooledSeries {
  std::map<int, std::pair<long long, long long>> buckets;

  void add(const DaySeries& s) {
    for (const auto& [day, cell] : s) {
      auto& [num, den] = buckets[day];
      num += std::llround(cell.value * static_cast<double>(cell.n));
      den += static_cast<long long>(cell.n);
    }
  }

  DaySeries series() const {
    DaySeries out;
    for (const auto& [day, nd] : buckets) {
      out[day] = {static_cast<double>(nd.first) / static_cast<double>(nd.second),
                  static_cast<std::size_t>(nd.second)};
    }
    return out;
  }
};

inline void write_series_csv(const fs::path& path, const DaySeries& s) {
  std::string out = "day,value,n\n";
  for (const auto& [day, cell] : s) {
    out += std::to_string(day) + "," + fmt_real(cell.value) + "," + std::to_string(cell.n) +
           "\n";
  }
  write_text(path, out);
}

}  // namespace detail

struct ReportChecks {
  double min_ownership = 1.0;
  double min_fpr = 1.0;        // minimum per-day pooled FPR over attack cells
  double max_tpr_delta = 0.0;  // max per-day |TPR_attack - TPR_benign|
  bool has_attack = false;
};

// Renders the archive into per-algorithm CSVs plus a summary. Record
// metadata (user, date, spoof origin) is rebuilt by re-running the
// deterministic expansion on the dataset behind the archive.
inline ReportChecks emit_report(const fs::path& archive_dir, const FingerprintStore& store,
                                const fs::path& out_dir) {
  RunManifest m = load_run_manifest(archive_dir);
  if (m.dataset_hash != store_hash(store)) {
    throw Error("archive was produced from a different dataset (hash mismatch)");
  }
  if (m.victims.empty()) throw Error("archive lists no victims");

  // Completeness check up front: name every missing cell.
  {
    std::vector<std::string> missing;
    for (const auto& victim : m.victims) {
      const fs::path dir = archive_dir / victim;
      for (Algorithm algo : m.algorithms) {
        for (int freq : m.collect_freqs) {
          if (!fs::exists(dir / detail::cell_file_name(algo, freq, false))) {
            missing.push_back(victim + "/" + detail::cell_file_name(algo, freq, false));
          }
          if (m.attack_setting &&
              !fs::exists(dir / detail::cell_file_name(algo, freq, true))) {
            missing.push_back(victim + "/" + detail::cell_file_name(algo, freq, true));
          }
        }
      }
    }
    if (!missing.empty()) {
      std::string msg = "incomplete archive, missing:";
      for (const auto& cell : missing) msg += " " + cell;
      throw Error(msg);
    }
  }

  std::vector<LoadedCampaign> campaigns;
  campaigns.reserve(m.victims.size());
  for (const auto& victim : m.victims) {
    campaigns.push_back(load_campaign(m, archive_dir, victim));
  }

  struct Cell {
    TrackingStats stats;
    DaySeries benign_tpr;
    DaySeries attack_tpr;
    DaySeries fpr;
  };
  std::map<CellKey, Cell> cells;

  for (int freq : m.collect_freqs) {
    const auto ex = expand(store, freq);
    for (Algorithm algo : m.algorithms) {
      // Benign replays are victim-independent; any campaign's cell serves.
      LabeledLog benign_labeled = label_log(ex, {}, campaigns.front().benign.at({algo, freq}));
      Cell& cell = cells[{algo, freq}];
      cell.stats = tracking_stats(benign_labeled);
      cell.benign_tpr = tpr_by_day(benign_labeled);
    }
    if (!m.attack_setting) continue;
    std::map<Algorithm, detail::PooledSeries> tpr_pools, fpr_pools;
    for (const auto& c : campaigns) {
      FingerprintStore attacked = store;
      AttackSpec spec;
      spec.victim_user_id = c.victim;
      spec.gaps_days = m.gaps_days;
      spec.spoof_validity_days = m.spoof_validity_days;
      auto counters = inject_spoofs(attacked, make_spoofs(store, c.victim, spec));
      if (counters != c.spoof_counters) {
        throw Error("archive for victim " + c.victim + " does not match the dataset");
      }
      auto ea = expand(attacked, freq);
      std::set<std::uint64_t> spoof_set(counters.begin(), counters.end());
      for (Algorithm algo : m.algorithms) {
        LabeledLog labeled = label_log(ea, spoof_set, c.attack.at({algo, freq}), c.victim);
        tpr_pools[algo].add(tpr_by_day(labeled));
        fpr_pools[algo].add(fpr_by_day(labeled, c.victim));
      }
    }
    for (Algorithm algo : m.algorithms) {
      cells[{algo, freq}].attack_tpr = tpr_pools[algo].series();
      cells[{algo, freq}].fpr = fpr_pools[algo].series();
    }
  }

  fs::create_directories(out_dir);
  ReportChecks checks;
  checks.has_attack = m.attack_setting;
  std::string summary = "# Tracking report\n\n";
  {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "dataset hash: %llu\nseed: %llu\ntrain_frac: %s\nvictims: %zu\n\n",
                  static_cast<unsigned long long>(m.dataset_hash),
                  static_cast<unsigned long long>(m.seed),
                  detail::fmt_real(m.train_frac).c_str(), m.victims.size());
    summary += buf;
  }
  for (const auto& note : m.notes) summary += "note: " + note + "\n";
  if (!m.notes.empty()) summary += "\n";

  for (Algorithm algo : m.algorithms) {
    const std::string aname(to_string(algo));
    summary += "## " + aname + "\n\n";
    std::string stats_csv = "frequency,avg_duration,avg_max_duration,ownership,mean_new_ids\n";
    for (int freq : m.collect_freqs) {
      const Cell& cell = cells.at({algo, freq});
      const TrackingStats& stats = cell.stats;
      stats_csv += std::to_string(freq) + "," +
                   detail::fmt_real(stats.avg_tracking_duration_days) + "," +
                   detail::fmt_real(stats.avg_max_tracking_duration_days) + "," +
                   detail::fmt_real(stats.avg_ownership) + "," +
                   detail::fmt_real(stats.mean_new_ids()) + "\n";
      checks.min_ownership = std::min(checks.min_ownership, stats.avg_ownership);
      detail::write_series_csv(
          out_dir / (aname + "_tpr_benign_f" + std::to_string(freq) + ".csv"), cell.benign_tpr);

      char line[200];
      std::snprintf(line, sizeof(line), "- f=%d: ownership %s, mean new ids %s\n", freq,
                    detail::fmt_real(stats.avg_ownership).c_str(),
                    detail::fmt_real(stats.mean_new_ids()).c_str());
      summary += line;

      if (!m.attack_setting) continue;
      detail::write_series_csv(
          out_dir / (aname + "_tpr_attack_f" + std::to_string(freq) + ".csv"), cell.attack_tpr);
      detail::write_series_csv(
          out_dir / (aname + "_fpr_by_day_f" + std::to_string(freq) + ".csv"), cell.fpr);

      double min_fpr = 1.0;
      for (const auto& [day, dc] : cell.fpr) min_fpr = std::min(min_fpr, dc.value);
      double max_delta = 0.0;
      std::size_t uncommon = 0;
      for (const auto& [day, dc] : cell.benign_tpr) {
        auto it = cell.attack_tpr.find(day);
        if (it == cell.attack_tpr.end()) {
          ++uncommon;
          continue;
        }
        max_delta = std::max(max_delta, std::abs(dc.value - it->second.value));
      }
      for (const auto& [day, dc] : cell.attack_tpr) {
        if (!cell.benign_tpr.count(day)) ++uncommon;
      }
      checks.min_fpr = std::min(checks.min_fpr, min_fpr);
      checks.max_tpr_delta = std::max(checks.max_tpr_delta, max_delta);
      std::snprintf(line, sizeof(line),
                    "  attack: min per-day FPR %s, max |TPR delta| %s, days only in one "
                    "setting: %zu\n",
                    detail::fmt_real(min_fpr).c_str(), detail::fmt_real(max_delta).c_str(),
                    uncommon);
      summary += line;
    }
    detail::write_text(out_dir / (aname + "_stats_by_frequency.csv"), stats_csv);
    summary += "\n";
  }

  summary += "## Threshold checks\n\n";
  summary += std::string("- ownership > 0.95: ") + detail::fmt_real(checks.min_ownership) +
             (checks.min_ownership > 0.95 ? " PASS" : " FAIL") + "\n";
  if (m.attack_setting) {
    summary += std::string("- per-day FPR > 0.95: ") + detail::fmt_real(checks.min_fpr) +
               (checks.min_fpr > 0.95 ? " PASS" : " FAIL") + "\n";
    summary += std::string("- max |TPR delta| <= 0.02: ") +
               detail::fmt_real(checks.max_tpr_delta) +
               (checks.max_tpr_delta <= 0.02 ? " PASS" : " FAIL") + "\n";
  }
  detail::write_text(out_dir / "summary.md", summary);
  return checks;
}

}  // namespace fplink
