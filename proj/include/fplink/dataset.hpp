#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fplink/error.hpp"
#include "fplink/record.hpp"
#include "fplink/rng.hpp"
#include "fplink/store.hpp"
#include "fplink/time.hpp"

namespace fplink {

inline constexpr std::string_view kDatasetHeader = "#fpds 1";
inline constexpr std::array<int, 11> kCollectFrequencies = {1, 2, 3, 4, 5, 6,
                                                            7, 8, 10, 15, 20};

struct DatasetSummary {
  std::size_t n_records = 0;
  std::size_t n_users = 0;
  std::size_t n_removed_inconsistent_users = 0;
  std::size_t n_removed_small_users = 0;
};

namespace detail {

inline std::string escape_field(std::string_view v) {
  std::string out;
  out.reserve(v.size());
  for (char c : v) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string unescape_field(std::string_view v, std::size_t line_no) {
  std::string out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != '\\') {
      out += v[i];
      continue;
    }
    if (i + 1 >= v.size()) throw Error("line " + std::to_string(line_no) + ": dangling escape");
    switch (v[++i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: throw Error("line " + std::to_string(line_no) + ": bad escape");
    }
  }
  return out;
}

inline void append_field(std::string& line, std::string_view key, std::string_view value) {
  if (!line.empty()) line += '\t';
  line += key;
  line += '=';
  line += escape_field(value);
}

}  // namespace detail

inline std::string serialize_record(const FingerprintRecord& r) {
  std::string line;
  detail::append_field(line, "counter", std::to_string(r.counter));
  detail::append_field(line, "user_id", r.user_id);
  detail::append_field(line, "created_date", format_timestamp(r.created_date));
  if (r.updated_date) {
    detail::append_field(line, "updated_date", format_timestamp(*r.updated_date));
  }
  detail::append_field(line, "expired_date", format_timestamp(r.expired_date));
  for (Attr a : kAllAttrs) detail::append_field(line, attr_name(a), attr_value(r, a));
  for (const auto& [k, v] : r.extras) detail::append_field(line, k, v);
  return line;
}

inline std::string export_store(const FingerprintStore& store) {
  std::string out(kDatasetHeader);
  out += '\n';
  for (const auto& r : store.records) {
    out += serialize_record(r);
    out += '\n';
  }
  return out;
}

namespace detail {

struct ParsedRecord {
  FingerprintRecord rec;
  std::optional<std::uint64_t> counter;
  std::size_t file_order = 0;
};

inline ParsedRecord parse_record_line(std::string_view line, std::size_t line_no) {
  ParsedRecord out;
  bool have_created = false, have_expired = false, have_user = false;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t tab = line.find('\t', pos);
    std::string_view field = line.substr(pos, tab == std::string_view::npos ? tab : tab - pos);
    pos = tab == std::string_view::npos ? line.size() + 1 : tab + 1;
    if (field.empty()) continue;
    std::size_t eq = field.find('=');
    if (eq == std::string_view::npos) {
      throw Error("line " + std::to_string(line_no) + ": field without '='");
    }
    std::string key(field.substr(0, eq));
    std::string value = unescape_field(field.substr(eq + 1), line_no);
    try {
      if (key == "counter") {
        if (out.counter) throw Error("duplicate counter field");
        out.counter = std::stoull(value);
      } else if (key == "user_id") {
        out.rec.user_id = value;
        have_user = true;
      } else if (key == "created_date") {
        out.rec.created_date = parse_timestamp(value);
        have_created = true;
      } else if (key == "updated_date") {
        out.rec.updated_date = parse_timestamp(value);
      } else if (key == "expired_date") {
        out.rec.expired_date = parse_timestamp(value);
        have_expired = true;
      } else if (key == "timezone") {
        out.rec.timezone = std::stoi(value);
      } else if (key == "cookies_enabled") {
        if (value != "yes" && value != "no") throw Error("bad cookies_enabled");
        out.rec.cookies_enabled = value == "yes";
      } else if (key == "local_storage") {
        out.rec.local_storage = local_storage_from(value);
      } else if (key == "do_not_track") {
        out.rec.do_not_track = do_not_track_from(value);
      } else if (auto a = attr_from_name(key)) {
        switch (*a) {
          case Attr::os: out.rec.os = value; break;
          case Attr::platform: out.rec.platform = value; break;
          case Attr::browser_name: out.rec.browser_name = value; break;
          case Attr::browser_version: out.rec.browser_version = value; break;
          case Attr::user_agent: out.rec.user_agent = value; break;
          case Attr::http_accept: out.rec.http_accept = value; break;
          case Attr::languages: out.rec.languages = value; break;
          case Attr::encoding: out.rec.encoding = value; break;
          case Attr::resolution: out.rec.resolution = value; break;
          case Attr::canvas_hash: out.rec.canvas_hash = value; break;
          case Attr::fonts: out.rec.fonts = value; break;
          case Attr::plugins: out.rec.plugins = value; break;
          case Attr::gpu_vendor: out.rec.gpu_vendor = value; break;
          case Attr::renderer: out.rec.renderer = value; break;
          default: break;  // typed attrs handled above
        }
      } else {
        out.rec.extras.emplace_back(std::move(key), std::move(value));
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error("line " + std::to_string(line_no) + ": bad value for " + key + " (" +
                  e.what() + ")");
    }
  }
  if (!have_created) throw Error("line " + std::to_string(line_no) + ": missing created_date");
  if (!have_expired) throw Error("line " + std::to_string(line_no) + ": missing expired_date");
  if (!have_user) throw Error("line " + std::to_string(line_no) + ": missing user_id");
  if (out.rec.created_date > out.rec.expired_date) {
    throw Error("line " + std::to_string(line_no) + ": created_date after expired_date");
  }
  return out;
}

}  // namespace detail

// Parses a dataset from text. Counters must be dense and date-consistent;
// otherwise every counter is reassigned by (created_date, file order) and a
// note is appended to `notes`.
inline FingerprintStore ingest_text(std::string_view text, std::vector<std::string>* notes = nullptr) {
  std::vector<detail::ParsedRecord> parsed;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool saw_header = false;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!saw_header) {
      if (line.substr(0, 5) != "#fpds") throw Error("missing #fpds header line");
      saw_header = true;
      continue;
    }
    if (line[0] == '#') continue;
    auto p = detail::parse_record_line(line, line_no);
    p.file_order = parsed.size();
    parsed.push_back(std::move(p));
  }
  if (!saw_header) throw Error("missing #fpds header line");

  bool reassign = false;
  std::map<std::uint64_t, std::size_t> seen;
  for (const auto& p : parsed) {
    if (!p.counter) {
      reassign = true;
      continue;
    }
    auto [it, inserted] = seen.emplace(*p.counter, p.file_order);
    if (!inserted) throw Error("duplicate counter " + std::to_string(*p.counter));
  }
  if (!reassign && !parsed.empty()) {
    if (seen.size() != parsed.size() || seen.rbegin()->first != parsed.size() - 1) {
      reassign = true;  // not dense
    }
  }
  FingerprintStore store;
  store.records.reserve(parsed.size());
  if (!reassign) {
    store.records.resize(parsed.size());
    for (auto& p : parsed) {
      p.rec.counter = *p.counter;
      store.records[*p.counter] = std::move(p.rec);
    }
    for (std::size_t i = 1; i < store.records.size(); ++i) {
      if (store.records[i - 1].created_date > store.records[i].created_date) {
        reassign = true;
        break;
      }
    }
    if (reassign) {
      // fall through to a full reassignment below
      parsed.clear();
      for (auto& r : store.records) {
        detail::ParsedRecord p;
        p.rec = std::move(r);
        p.file_order = p.rec.counter;
        parsed.push_back(std::move(p));
      }
      store.records.clear();
    }
  }
  if (reassign) {
    std::stable_sort(parsed.begin(), parsed.end(),
                     [](const auto& x, const auto& y) {
                       if (x.rec.created_date != y.rec.created_date) {
                         return x.rec.created_date < y.rec.created_date;
                       }
                       return x.file_order < y.file_order;
                     });
    store.records.clear();
    for (auto& p : parsed) store.records.push_back(std::move(p.rec));
    for (std::size_t i = 0; i < store.records.size(); ++i) store.records[i].counter = i;
    if (notes) notes->push_back("counters reassigned by (created_date, file order)");
  }
  check_store(store);
  return store;
}

inline FingerprintStore ingest(const std::string& path, std::vector<std::string>* notes = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ingest_text(buf.str(), notes);
}

inline void save_store(const FingerprintStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset: " + path);
  out << export_store(store);
  if (!out) throw Error("write failed: " + path);
}

// FNV-1a over the normalized export; manifests use it to pin datasets.
inline std::uint64_t store_hash(const FingerprintStore& store) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : export_store(store)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace detail {

inline std::vector<std::pair<std::string, std::vector<std::size_t>>> group_by_user(
    const FingerprintStore& store) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < store.records.size(); ++i) {
    const auto& uid = store.records[i].user_id;
    auto it = index.find(uid);
    if (it == index.end()) {
      index.emplace(uid, groups.size());
      groups.push_back({uid, {i}});
    } else {
      groups[it->second].second.push_back(i);
    }
  }
  return groups;
}

inline FingerprintStore rebuild(const FingerprintStore& store,
                                const std::vector<bool>& keep) {
  FingerprintStore out;
  for (std::size_t i = 0; i < store.records.size(); ++i) {
    if (keep[i]) out.records.push_back(store.records[i]);
  }
  for (std::size_t i = 0; i < out.records.size(); ++i) out.records[i].counter = i;
  return out;
}

}  // namespace detail

// Drops every record of any user whose series is internally inconsistent:
// os/platform/browser_name must stay constant and browser_version must be
// non-decreasing in created_date order.
inline std::pair<FingerprintStore, DatasetSummary> clean_consistency(
    const FingerprintStore& store) {
  auto groups = detail::group_by_user(store);
  std::vector<bool> keep(store.records.size(), true);
  std::size_t removed_users = 0;
  for (const auto& [uid, idxs] : groups) {
    bool ok = true;
    for (std::size_t k = 1; k < idxs.size() && ok; ++k) {
      const auto& prev = store.records[idxs[k - 1]];
      const auto& cur = store.records[idxs[k]];
      if (cur.os != prev.os || cur.browser_name != prev.browser_name ||
          cur.platform != prev.platform) {
        ok = false;
        break;
      }
      auto cmp = compare_versions(cur.browser_version, prev.browser_version);
      if (cmp && *cmp < 0) ok = false;
    }
    if (!ok) {
      ++removed_users;
      for (std::size_t i : idxs) keep[i] = false;
    }
  }
  FingerprintStore out = detail::rebuild(store, keep);
  DatasetSummary s;
  s.n_records = out.records.size();
  s.n_users = groups.size() - removed_users;
  s.n_removed_inconsistent_users = removed_users;
  return {std::move(out), s};
}

// Removes users with fewer than min_count records.
inline std::pair<FingerprintStore, DatasetSummary> filter_min_fingerprints(
    const FingerprintStore& store, std::size_t min_count = 7) {
  if (min_count < 1) throw Error("min_count must be >= 1");
  auto groups = detail::group_by_user(store);
  std::vector<bool> keep(store.records.size(), true);
  std::size_t removed_users = 0;
  for (const auto& [uid, idxs] : groups) {
    if (idxs.size() < min_count) {
      ++removed_users;
      for (std::size_t i : idxs) keep[i] = false;
    }
  }
  FingerprintStore out = detail::rebuild(store, keep);
  DatasetSummary s;
  s.n_records = out.records.size();
  s.n_users = groups.size() - removed_users;
  s.n_removed_small_users = removed_users;
  return {std::move(out), s};
}

// Chronological split by global counter order: first floor(frac*n) records.
inline std::pair<FingerprintStore, FingerprintStore> split(const FingerprintStore& store,
                                                           double train_frac = 0.4) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw Error("train_frac must be in (0,1)");
  }
  std::size_t k = static_cast<std::size_t>(train_frac * static_cast<double>(store.size()));
  if (k == 0 || k >= store.size()) throw Error("degenerate split");
  FingerprintStore train, test;
  train.records.assign(store.records.begin(), store.records.begin() + k);
  test.records.assign(store.records.begin() + k, store.records.end());
  for (std::size_t i = 0; i < test.records.size(); ++i) test.records[i].counter = i;
  return {std::move(train), std::move(test)};
}

struct ReplicaOrigin {
  std::uint64_t source_counter = 0;
  std::uint32_t replica_index = 0;

  bool operator==(const ReplicaOrigin&) const = default;
};

struct ExpansionResult {
  FingerprintStore store;
  std::vector<ReplicaOrigin> origins;  // aligned with store.records
  std::vector<std::string> warnings;
};

// Collect-frequency expansion: per user, each record is replicated at
// created, created+f_c, created+2*f_c, ... days while the replica time stays
// within the record's expiry and does not pass the user's next record.
// Replicas copy every attribute byte; the result is re-sorted by created_date
// with fresh dense counters.
inline ExpansionResult expand(const FingerprintStore& store, int collect_frequency_days) {
  if (collect_frequency_days < 1) throw Error("collect frequency must be >= 1 day");
  ExpansionResult res;
  if (std::find(kCollectFrequencies.begin(), kCollectFrequencies.end(),
                collect_frequency_days) == kCollectFrequencies.end()) {
    res.warnings.push_back("collect frequency " + std::to_string(collect_frequency_days) +
                           " is outside the standard set");
  }
  // Next same-user record per store index.
  std::vector<std::optional<std::int64_t>> next_created(store.size());
  {
    std::map<std::string, std::size_t> last_seen;
    for (std::size_t i = store.size(); i-- > 0;) {
      const auto& uid = store.records[i].user_id;
      auto it = last_seen.find(uid);
      if (it != last_seen.end()) next_created[i] = store.records[it->second].created_date;
      last_seen[uid] = i;
    }
  }

  struct Generated {
    FingerprintRecord rec;
    ReplicaOrigin origin;
  };
  std::vector<Generated> generated;
  const std::int64_t step = static_cast<std::int64_t>(collect_frequency_days) * kSecondsPerDay;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& src = store.records[i];
    if (src.expired_date < src.created_date) {
      res.warnings.push_back("record " + std::to_string(src.counter) +
                             " expired before creation; skipped");
      continue;
    }
    std::int64_t limit = src.expired_date;
    if (next_created[i] && *next_created[i] < limit) limit = *next_created[i];
    std::uint32_t idx = 0;
    for (std::int64_t t = src.created_date; t <= limit; t += step, ++idx) {
      Generated g;
      g.rec = src;
      g.rec.created_date = t;
      g.rec.expired_date = t + step;
      g.origin = {src.counter, idx};
      generated.push_back(std::move(g));
    }
  }
  std::stable_sort(generated.begin(), generated.end(), [](const Generated& a, const Generated& b) {
    return a.rec.created_date < b.rec.created_date;
  });
  res.store.records.reserve(generated.size());
  res.origins.reserve(generated.size());
  for (std::size_t i = 0; i < generated.size(); ++i) {
    generated[i].rec.counter = i;
    res.store.records.push_back(std::move(generated[i].rec));
    res.origins.push_back(generated[i].origin);
  }
  return res;
}

enum class DriftModel { stable, version_bump, attr_churn };

inline std::string_view to_string(DriftModel d) {
  switch (d) {
    case DriftModel::stable: return "stable";
    case DriftModel::version_bump: return "version_bump";
    case DriftModel::attr_churn: return "attr_churn";
  }
  return "stable";
}

inline DriftModel drift_from(std::string_view s) {
  if (s == "stable") return DriftModel::stable;
  if (s == "version_bump") return DriftModel::version_bump;
  if (s == "attr_churn") return DriftModel::attr_churn;
  throw Error("bad drift model: \"" + std::string(s) + "\"");
}

struct SyntheticConfig {
  std::size_t n_users = 20;
  std::size_t records_per_user = 10;
  std::int64_t span_days = 60;
  DriftModel drift = DriftModel::stable;
  double churn_rate = 0.05;  // used by attr_churn only
  std::uint64_t seed = 1;
};

// Deterministic desk-scale dataset. Distinct users always differ in
// user_agent, canvas_hash and fonts; same-user series follow the drift model.
inline FingerprintStore synthesize(const SyntheticConfig& cfg) {
  if (cfg.n_users < 1 || cfg.records_per_user < 1) {
    throw Error("synthetic config needs at least one user and one record");
  }
  static const std::int64_t kBase = parse_timestamp("2020-01-01 00:00:00");
  struct SystemProfile {
    const char* os;
    const char* platform;
    const char* gpu_vendor;
    const char* renderer;
  };
  static constexpr std::array<SystemProfile, 3> kSystems = {{
      {"Windows 10", "Win32", "Google Inc.", "ANGLE (Intel HD Graphics 630)"},
      {"macOS 10.15", "MacIntel", "Intel Inc.", "Intel Iris Plus Graphics"},
      {"Ubuntu 20.04", "Linux x86_64", "NVIDIA Corporation", "GeForce GTX 1060/PCIe"},
  }};
  static constexpr std::array<const char*, 3> kLanguages = {"en-US,en", "fr-FR,fr,en",
                                                            "de-DE,de,en"};
  static constexpr std::array<const char*, 3> kResolutions = {"1920x1080x24", "2560x1440x24",
                                                              "1366x768x24"};
  static constexpr std::array<int, 3> kTimezones = {-300, 0, 60};

  Rng master(cfg.seed);
  const std::int64_t spacing =
      cfg.span_days * kSecondsPerDay / static_cast<std::int64_t>(cfg.records_per_user);

  struct Pending {
    FingerprintRecord rec;
    std::size_t user_index;
    std::size_t step;
  };
  std::vector<Pending> pending;
  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    Rng rng = master.fork(u);
    const auto& sys = kSystems[u % kSystems.size()];
    FingerprintRecord base;
    base.user_id = "u" + std::to_string(u);
    base.os = sys.os;
    base.platform = sys.platform;
    base.gpu_vendor = sys.gpu_vendor;
    base.renderer = sys.renderer;
    base.browser_name = (u % 2 == 0) ? "Chrome" : "Firefox";
    base.browser_version = (u % 2 == 0) ? "87.0.4280" : "84.0.2";
    char canvas[24];
    std::snprintf(canvas, sizeof(canvas), "%016llx",
                  static_cast<unsigned long long>(rng.next()));
    base.canvas_hash = std::string(canvas) + "-u" + std::to_string(u);
    base.user_agent = "Mozilla/5.0 (" + std::string(sys.platform) + ") " + base.browser_name +
                      "/" + base.browser_version + " uid/" + std::to_string(u);
    base.http_accept = "text/html,application/xhtml+xml,application/xml;q=0.9";
    base.languages = kLanguages[u % kLanguages.size()];
    base.encoding = "gzip, deflate, br";
    base.timezone = kTimezones[u % kTimezones.size()];
    base.resolution = kResolutions[u % kResolutions.size()];
    base.cookies_enabled = true;
    base.local_storage = LocalStorage::yes;
    base.do_not_track = DoNotTrack::unset;
    base.fonts = "Arial,Calibri,Verdana,Face-" + std::to_string(u);
    base.plugins = "PDF Viewer,Chromium PDF Plugin";

    // Churn toggles flip between the base value and one alternate.
    bool tz_alt = false, res_alt = false, plugins_alt = false, fonts_alt = false;
    for (std::size_t i = 0; i < cfg.records_per_user; ++i) {
      if (cfg.drift == DriftModel::attr_churn && i > 0) {
        if (rng.real01() < cfg.churn_rate) tz_alt = !tz_alt;
        if (rng.real01() < cfg.churn_rate) res_alt = !res_alt;
        if (rng.real01() < cfg.churn_rate) plugins_alt = !plugins_alt;
        if (rng.real01() < cfg.churn_rate) fonts_alt = !fonts_alt;
      }
      FingerprintRecord rec = base;
      if (cfg.drift == DriftModel::version_bump && i >= cfg.records_per_user / 2 &&
          cfg.records_per_user > 1) {
        auto parsed = parse_version(base.browser_version);
        auto bumped = *parsed;
        bumped[0] += 1;
        std::string v;
        for (std::size_t k = 0; k < bumped.size(); ++k) {
          if (k) v += '.';
          v += std::to_string(bumped[k]);
        }
        rec.browser_version = v;
      }
      if (tz_alt) rec.timezone = base.timezone + 60;
      if (res_alt) rec.resolution = kResolutions[(u + 1) % kResolutions.size()];
      if (plugins_alt) rec.plugins = base.plugins + ",Extra Codec";
      if (fonts_alt) rec.fonts = base.fonts + ",Churn Sans";
      rec.created_date = kBase + static_cast<std::int64_t>(i) * spacing;
      rec.expired_date = rec.created_date + spacing;
      rec.updated_date = rec.created_date;
      pending.push_back({std::move(rec), u, i});
    }
  }
  std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    return a.rec.created_date < b.rec.created_date;
  });
  FingerprintStore store;
  store.records.reserve(pending.size());
  for (std::size_t i = 0; i < pending.size(); ++i) {
    pending[i].rec.counter = i;
    store.records.push_back(std::move(pending[i].rec));
  }
  check_store(store);
  return store;
}

}  // namespace fplink
