#pragma once

// Test-only helpers: independent oracles and record builders. The oracles
// deliberately take different routes than the library (naive scan instead of
// the DP matcher, closed form instead of date iteration) so agreement means
// something.

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>

#include "fplink/record.hpp"
#include "fplink/store.hpp"
#include "fplink/time.hpp"

namespace testutil {

// Reference Ratcliff-Obershelp: leftmost-longest common substring by naive
// scan, recursing on both sides.
inline std::size_t naive_matched(std::string_view a, std::string_view b) {
  std::size_t best_len = 0, best_i = 0, best_j = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      std::size_t k = 0;
      while (i + k < a.size() && j + k < b.size() && a[i + k] == b[j + k]) ++k;
      if (k > best_len) {
        best_len = k;
        best_i = i;
        best_j = j;
      }
    }
  }
  if (best_len == 0) return 0;
  return best_len + naive_matched(a.substr(0, best_i), b.substr(0, best_j)) +
         naive_matched(a.substr(best_i + best_len), b.substr(best_j + best_len));
}

inline double ratio_oracle(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  if (b < a) std::swap(a, b);  // same symmetrization as the library
  return 2.0 * static_cast<double>(naive_matched(a, b)) /
         static_cast<double>(a.size() + b.size());
}

// Closed-form replica count; the library iterates dates instead.
inline std::size_t replica_count_oracle(std::int64_t t, std::int64_t e,
                                        std::optional<std::int64_t> next_t, int fc_days) {
  if (e < t) return 0;
  std::int64_t limit = e;
  if (next_t && *next_t < limit) limit = *next_t;
  if (limit < t) return 0;
  return static_cast<std::size_t>((limit - t) /
                                  (static_cast<std::int64_t>(fc_days) * fplink::kSecondsPerDay)) +
         1;
}

inline fplink::FingerprintRecord make_record(const std::string& user, const std::string& created,
                                             const std::string& expired) {
  fplink::FingerprintRecord r;
  r.user_id = user;
  r.created_date = fplink::parse_timestamp(created);
  r.updated_date = r.created_date;
  r.expired_date = fplink::parse_timestamp(expired);
  r.os = "Windows 10";
  r.platform = "Win32";
  r.browser_name = "Chrome";
  r.browser_version = "87.0.4280";
  r.user_agent = "Mozilla/5.0 (Win32) Chrome/87.0.4280 uid/" + user;
  r.http_accept = "text/html,application/xhtml+xml";
  r.languages = "en-US,en";
  r.encoding = "gzip, deflate, br";
  r.timezone = -300;
  r.resolution = "1920x1080x24";
  r.cookies_enabled = true;
  r.local_storage = fplink::LocalStorage::yes;
  r.do_not_track = fplink::DoNotTrack::unset;
  r.canvas_hash = "c4nv4s-" + user;
  r.fonts = "Arial,Calibri,Verdana";
  r.plugins = "PDF Viewer,Chromium PDF Plugin";
  r.gpu_vendor = "Google Inc.";
  r.renderer = "ANGLE (Intel HD Graphics 630)";
  return r;
}

// A store whose users share every first-set attribute (so cross-user pairs
// pass the linker gates) but differ in user-agent and fonts.
inline fplink::FingerprintStore gate_friendly_store(std::size_t users, std::size_t records,
                                                    std::int64_t day_step = 3) {
  fplink::FingerprintStore store;
  for (std::size_t u = 0; u < users; ++u) {
    for (std::size_t i = 0; i < records; ++i) {
      auto rec = make_record("g" + std::to_string(u), "2020-01-01 00:00:00",
                             "2020-01-01 00:00:00");
      rec.canvas_hash = "shared-canvas";
      rec.user_agent = "Mozilla/5.0 (Win32) Chrome/87.0.4280 variant/" + std::to_string(u);
      rec.fonts = "Arial,Calibri,Face-" + std::to_string(u);
      rec.created_date =
          fplink::parse_timestamp("2020-01-01 00:00:00") +
          static_cast<std::int64_t>(i) * day_step * fplink::kSecondsPerDay;
      rec.updated_date = rec.created_date;
      rec.expired_date = rec.created_date + day_step * fplink::kSecondsPerDay;
      fplink::insert_record(store, std::move(rec));
    }
  }
  return store;
}

}  // namespace testutil
