#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fplink/error.hpp"
#include "fplink/time.hpp"

namespace fplink {

enum class LocalStorage { yes, no, unsupported };
enum class DoNotTrack { yes, no, unset };

inline std::string_view to_string(LocalStorage v) {
  switch (v) {
    case LocalStorage::yes: return "yes";
    case LocalStorage::no: return "no";
    case LocalStorage::unsupported: return "unsupported";
  }
  return "unsupported";
}

inline std::string_view to_string(DoNotTrack v) {
  switch (v) {
    case DoNotTrack::yes: return "yes";
    case DoNotTrack::no: return "no";
    case DoNotTrack::unset: return "unset";
  }
  return "unset";
}

inline LocalStorage local_storage_from(std::string_view s) {
  if (s == "yes") return LocalStorage::yes;
  if (s == "no") return LocalStorage::no;
  if (s == "unsupported") return LocalStorage::unsupported;
  throw Error("bad local_storage value: \"" + std::string(s) + "\"");
}

inline DoNotTrack do_not_track_from(std::string_view s) {
  if (s == "yes") return DoNotTrack::yes;
  if (s == "no") return DoNotTrack::no;
  if (s == "unset") return DoNotTrack::unset;
  throw Error("bad do_not_track value: \"" + std::string(s) + "\"");
}

// One captured fingerprint. String attributes compare byte-exactly; no
// normalization happens after ingestion. Unrecognized dataset columns ride
// along in `extras` so files round-trip losslessly.
struct FingerprintRecord {
  std::string user_id;
  std::uint64_t counter = 0;
  std::int64_t created_date = 0;
  std::optional<std::int64_t> updated_date;  // absent for spoofed records
  std::int64_t expired_date = 0;

  std::string os;
  std::string platform;
  std::string browser_name;
  std::string browser_version;  // dot-separated integers, possibly empty
  std::string user_agent;
  std::string http_accept;
  std::string languages;  // ordered, comma-joined
  std::string encoding;
  int timezone = 0;  // signed minutes offset
  std::string resolution;  // "WxHxD"
  bool cookies_enabled = false;
  LocalStorage local_storage = LocalStorage::unsupported;
  DoNotTrack do_not_track = DoNotTrack::unset;
  std::string canvas_hash;
  std::string fonts;    // ordered list, comma-joined
  std::string plugins;  // ordered list
  std::string gpu_vendor;
  std::string renderer;

  std::vector<std::pair<std::string, std::string>> extras;

  bool operator==(const FingerprintRecord&) const = default;
};

enum class Attr {
  os,
  platform,
  browser_name,
  browser_version,
  user_agent,
  http_accept,
  languages,
  encoding,
  timezone,
  resolution,
  cookies_enabled,
  local_storage,
  do_not_track,
  canvas_hash,
  fonts,
  plugins,
  gpu_vendor,
  renderer,
};

inline constexpr std::array<Attr, 18> kAllAttrs = {
    Attr::os,           Attr::platform,     Attr::browser_name, Attr::browser_version,
    Attr::user_agent,   Attr::http_accept,  Attr::languages,    Attr::encoding,
    Attr::timezone,     Attr::resolution,   Attr::cookies_enabled,
    Attr::local_storage, Attr::do_not_track, Attr::canvas_hash,
    Attr::fonts,        Attr::plugins,      Attr::gpu_vendor,   Attr::renderer,
};

inline std::string_view attr_name(Attr a) {
  switch (a) {
    case Attr::os: return "os";
    case Attr::platform: return "platform";
    case Attr::browser_name: return "browser_name";
    case Attr::browser_version: return "browser_version";
    case Attr::user_agent: return "user_agent";
    case Attr::http_accept: return "http_accept";
    case Attr::languages: return "languages";
    case Attr::encoding: return "encoding";
    case Attr::timezone: return "timezone";
    case Attr::resolution: return "resolution";
    case Attr::cookies_enabled: return "cookies_enabled";
    case Attr::local_storage: return "local_storage";
    case Attr::do_not_track: return "do_not_track";
    case Attr::canvas_hash: return "canvas_hash";
    case Attr::fonts: return "fonts";
    case Attr::plugins: return "plugins";
    case Attr::gpu_vendor: return "gpu_vendor";
    case Attr::renderer: return "renderer";
  }
  return "";
}

inline std::optional<Attr> attr_from_name(std::string_view name) {
  for (Attr a : kAllAttrs) {
    if (attr_name(a) == name) return a;
  }
  return std::nullopt;
}

// Canonical string rendering of an attribute; injective per attribute, so
// byte equality of renderings equals value equality.
inline std::string attr_value(const FingerprintRecord& r, Attr a) {
  switch (a) {
    case Attr::os: return r.os;
    case Attr::platform: return r.platform;
    case Attr::browser_name: return r.browser_name;
    case Attr::browser_version: return r.browser_version;
    case Attr::user_agent: return r.user_agent;
    case Attr::http_accept: return r.http_accept;
    case Attr::languages: return r.languages;
    case Attr::encoding: return r.encoding;
    case Attr::timezone: return std::to_string(r.timezone);
    case Attr::resolution: return r.resolution;
    case Attr::cookies_enabled: return r.cookies_enabled ? "yes" : "no";
    case Attr::local_storage: return std::string(to_string(r.local_storage));
    case Attr::do_not_track: return std::string(to_string(r.do_not_track));
    case Attr::canvas_hash: return r.canvas_hash;
    case Attr::fonts: return r.fonts;
    case Attr::plugins: return r.plugins;
    case Attr::gpu_vendor: return r.gpu_vendor;
    case Attr::renderer: return r.renderer;
  }
  return {};
}

// Allocation-free equality used by the linker inner loops.
inline bool attr_equal(const FingerprintRecord& x, const FingerprintRecord& y, Attr a) {
  switch (a) {
    case Attr::os: return x.os == y.os;
    case Attr::platform: return x.platform == y.platform;
    case Attr::browser_name: return x.browser_name == y.browser_name;
    case Attr::browser_version: return x.browser_version == y.browser_version;
    case Attr::user_agent: return x.user_agent == y.user_agent;
    case Attr::http_accept: return x.http_accept == y.http_accept;
    case Attr::languages: return x.languages == y.languages;
    case Attr::encoding: return x.encoding == y.encoding;
    case Attr::timezone: return x.timezone == y.timezone;
    case Attr::resolution: return x.resolution == y.resolution;
    case Attr::cookies_enabled: return x.cookies_enabled == y.cookies_enabled;
    case Attr::local_storage: return x.local_storage == y.local_storage;
    case Attr::do_not_track: return x.do_not_track == y.do_not_track;
    case Attr::canvas_hash: return x.canvas_hash == y.canvas_hash;
    case Attr::fonts: return x.fonts == y.fonts;
    case Attr::plugins: return x.plugins == y.plugins;
    case Attr::gpu_vendor: return x.gpu_vendor == y.gpu_vendor;
    case Attr::renderer: return x.renderer == y.renderer;
  }
  return false;
}

// Dot-separated integer version string; nullopt when it does not parse.
inline std::optional<std::vector<long long>> parse_version(std::string_view v) {
  if (v.empty()) return std::nullopt;
  std::vector<long long> parts;
  long long cur = 0;
  bool any_digit = false;
  for (char c : v) {
    if (c >= '0' && c <= '9') {
      cur = cur * 10 + (c - '0');
      any_digit = true;
    } else if (c == '.') {
      if (!any_digit) return std::nullopt;
      parts.push_back(cur);
      cur = 0;
      any_digit = false;
    } else {
      return std::nullopt;
    }
  }
  if (!any_digit) return std::nullopt;
  parts.push_back(cur);
  return parts;
}

// -1/0/+1 when both sides parse (missing segments read as 0); nullopt when
// either side is unparseable, which callers treat as "check passes".
inline std::optional<int> compare_versions(std::string_view a, std::string_view b) {
  auto pa = parse_version(a);
  auto pb = parse_version(b);
  if (!pa || !pb) return std::nullopt;
  std::size_t n = std::max(pa->size(), pb->size());
  for (std::size_t i = 0; i < n; ++i) {
    long long x = i < pa->size() ? (*pa)[i] : 0;
    long long y = i < pb->size() ? (*pb)[i] : 0;
    if (x < y) return -1;
    if (x > y) return 1;
  }
  return 0;
}

}  // namespace fplink
