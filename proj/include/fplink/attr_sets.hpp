#pragma once

#include <array>
#include <span>

#include "fplink/record.hpp"

namespace fplink {

// Attribute groups used by the three linking algorithms.

// Panopticlick's eight tracking attributes and its changeable subgroup.
inline constexpr std::array<Attr, 8> kPano8 = {
    Attr::user_agent, Attr::http_accept, Attr::cookies_enabled, Attr::resolution,
    Attr::timezone,   Attr::plugins,     Attr::fonts,           Attr::local_storage,
};
inline constexpr std::array<Attr, 4> kPanoChangeable = {
    Attr::cookies_enabled,
    Attr::resolution,
    Attr::timezone,
    Attr::local_storage,
};

// Rule-based linker sets; a difference anywhere in set 1 vetoes the pair.
inline constexpr std::array<Attr, 7> kRlaSet1 = {
    Attr::os,           Attr::platform,        Attr::browser_name, Attr::local_storage,
    Attr::do_not_track, Attr::cookies_enabled, Attr::canvas_hash,
};
inline constexpr std::array<Attr, 6> kRlaSet2 = {
    Attr::user_agent, Attr::gpu_vendor, Attr::renderer,
    Attr::plugins,    Attr::languages,  Attr::http_accept,
};
inline constexpr std::array<Attr, 3> kRlaSet3 = {
    Attr::resolution,
    Attr::timezone,
    Attr::encoding,
};

// The hybrid linker shares the rule-based first set.
inline constexpr const std::array<Attr, 7>& kHlaSet1 = kRlaSet1;

inline bool attrs_equal(const FingerprintRecord& a, const FingerprintRecord& b,
                        std::span<const Attr> attrs) {
  for (Attr x : attrs) {
    if (!attr_equal(a, b, x)) return false;
  }
  return true;
}

inline std::size_t count_diffs(const FingerprintRecord& a, const FingerprintRecord& b,
                               std::span<const Attr> attrs) {
  std::size_t n = 0;
  for (Attr x : attrs) {
    if (!attr_equal(a, b, x)) ++n;
  }
  return n;
}

}  // namespace fplink
