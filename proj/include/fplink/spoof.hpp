#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fplink/dataset.hpp"
#include "fplink/error.hpp"
#include "fplink/record.hpp"

namespace fplink {

// Portable spoof profile: the linker-relevant attributes of one record and
// nothing else. No user id, counter or timestamp ever enters the profile or
// the emitted script.
struct SpoofProfile {
  std::vector<std::pair<std::string, std::string>> attributes;  // canonical order
  std::string note = "fplink spoof profile";

  const std::string* find(std::string_view key) const {
    for (const auto& [k, v] : attributes) {
      if (k == key) return &v;
    }
    return nullptr;
  }

  bool operator==(const SpoofProfile& other) const { return attributes == other.attributes; }
};

inline SpoofProfile emit_profile(const FingerprintRecord& rec) {
  SpoofProfile p;
  p.attributes.reserve(kAllAttrs.size());
  for (Attr a : kAllAttrs) {
    p.attributes.emplace_back(std::string(attr_name(a)), attr_value(rec, a));
  }
  return p;
}

inline constexpr std::string_view kProfileHeader = "#fplink-profile 1";

inline std::string serialize_profile(const SpoofProfile& p) {
  std::string out(kProfileHeader);
  out += '\n';
  out += "note=" + detail::escape_field(p.note) + "\n";
  for (const auto& [k, v] : p.attributes) {
    out += k;
    out += '=';
    out += detail::escape_field(v);
    out += '\n';
  }
  return out;
}

inline SpoofProfile parse_profile(const std::string& text) {
  SpoofProfile p;
  p.attributes.clear();
  p.note.clear();
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? nl : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kProfileHeader) throw Error("missing profile header");
      saw_header = true;
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error("profile line " + std::to_string(line_no) + ": missing '='");
    }
    std::string key = line.substr(0, eq);
    std::string value = detail::unescape_field(line.substr(eq + 1), line_no);
    if (key == "note") {
      p.note = value;
    } else if (attr_from_name(key)) {
      p.attributes.emplace_back(std::move(key), std::move(value));
    } else {
      throw Error("profile line " + std::to_string(line_no) + ": unknown attribute " + key);
    }
  }
  if (!saw_header) throw Error("missing profile header");
  return p;
}

namespace detail {

// Attributes with a standard navigator/screen accessor the script overrides;
// everything else lands in the manifest block for the manual methods.
inline constexpr std::array<Attr, 8> kScriptAccessors = {
    Attr::platform,   Attr::user_agent, Attr::languages, Attr::cookies_enabled,
    Attr::resolution, Attr::timezone,   Attr::plugins,   Attr::do_not_track,
};

inline std::string js_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 8);
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\'': out += "\\'"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string js_string_list(std::string_view csv) {
  std::string out = "[";
  std::size_t pos = 0;
  bool first = true;
  while (pos <= csv.size()) {
    std::size_t comma = csv.find(',', pos);
    std::string_view item = csv.substr(pos, comma == std::string_view::npos ? comma : comma - pos);
    pos = comma == std::string_view::npos ? csv.size() + 1 : comma + 1;
    if (item.empty() && csv.empty()) break;
    if (!first) out += ", ";
    out += "'" + js_escape(item) + "'";
    first = false;
  }
  out += "]";
  return out;
}

inline void define_getter(std::string& js, std::string_view object, std::string_view prop,
                          const std::string& value_expr) {
  js += "    Object.defineProperty(" + std::string(object) + ", '" + std::string(prop) +
        "', { get: function () { return " + value_expr + "; }, configurable: true });\n";
}

}  // namespace detail

// Browser-executable override script for the profile. Accessor-backed
// attributes are redefined with property getters; attributes the script
// route cannot reach are listed in a commented manifest so the operator
// knows which ones still need the manual methods.
inline std::string emit_injection_script(const SpoofProfile& profile) {
  std::string body;
  auto value = [&](Attr a) -> const std::string* { return profile.find(attr_name(a)); };

  for (Attr a : detail::kScriptAccessors) {
    const std::string* v = value(a);
    if (v == nullptr) continue;
    switch (a) {
      case Attr::platform:
        detail::define_getter(body, "navigator", "platform", "'" + detail::js_escape(*v) + "'");
        break;
      case Attr::user_agent:
        detail::define_getter(body, "navigator", "userAgent", "'" + detail::js_escape(*v) + "'");
        break;
      case Attr::languages: {
        detail::define_getter(body, "navigator", "languages", detail::js_string_list(*v));
        std::string first = v->substr(0, v->find(','));
        detail::define_getter(body, "navigator", "language", "'" + detail::js_escape(first) + "'");
        break;
      }
      case Attr::cookies_enabled:
        detail::define_getter(body, "navigator", "cookieEnabled", *v == "yes" ? "true" : "false");
        break;
      case Attr::resolution: {
        // "WxHxD" -> screen.width / screen.height / screen.colorDepth
        std::string w, h, d;
        std::size_t x1 = v->find('x');
        std::size_t x2 = x1 == std::string::npos ? std::string::npos : v->find('x', x1 + 1);
        if (x1 != std::string::npos && x2 != std::string::npos) {
          w = v->substr(0, x1);
          h = v->substr(x1 + 1, x2 - x1 - 1);
          d = v->substr(x2 + 1);
          detail::define_getter(body, "screen", "width", w);
          detail::define_getter(body, "screen", "height", h);
          detail::define_getter(body, "screen", "colorDepth", d);
        }
        break;
      }
      case Attr::timezone:
        body += "    Date.prototype.getTimezoneOffset = function () { return " + *v + "; };\n";
        break;
      case Attr::plugins: {
        std::string names = detail::js_string_list(*v);
        body += "    Object.defineProperty(navigator, 'plugins', { get: function () {\n"
                "      return " + names + ".map(function (n) { return { name: n }; });\n"
                "    }, configurable: true });\n";
        break;
      }
      case Attr::do_not_track: {
        std::string expr = *v == "yes" ? "'1'" : (*v == "no" ? "'0'" : "null");
        detail::define_getter(body, "navigator", "doNotTrack", expr);
        break;
      }
      default:
        break;
    }
  }

  std::string manifest;
  for (const auto& [key, val] : profile.attributes) {
    auto a = attr_from_name(key);
    if (!a) continue;
    if (std::find(detail::kScriptAccessors.begin(), detail::kScriptAccessors.end(), *a) !=
        detail::kScriptAccessors.end()) {
      continue;
    }
    manifest += "  // " + key + ": " + detail::js_escape(val) + "\n";
  }

  std::string js;
  js += "(function () {\n";
  js += "  'use strict';\n";
  js += "  // attributes without a script accessor; apply via browser settings\n";
  js += "  // or script modification:\n";
  js += manifest;
  js += "  var overrides = function () {\n";
  js += body;
  js += "  };\n";
  js += "  var script = document.createElement('script');\n";
  js += "  script.appendChild(document.createTextNode('(' + overrides.toString() + ')();'));\n";
  js += "  (document.head || document.documentElement).appendChild(script);\n";
  js += "  script.parentNode.removeChild(script);\n";
  js += "})();\n";
  return js;
}

}  // namespace fplink
