#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fplink/attack.hpp"
#include "fplink/error.hpp"

namespace fplink {

namespace fs = std::filesystem;

// On-disk campaign archive: one directory per victim with one
// "<algo>_f<freq>_<setting>.log" per cell (lines of "counter chain_id
// reason") plus a manifest carrying seeds and thresholds.

struct RunManifest {
  std::vector<Algorithm> algorithms;
  std::vector<int> collect_freqs;
  LinkerConfig thresholds;
  double train_frac = 0.0;
  std::vector<int> gaps_days;
  int spoof_validity_days = 5;
  std::uint64_t seed = 0;
  std::uint64_t dataset_hash = 0;
  bool attack_setting = true;  // false for benign-only archives
  std::vector<std::string> victims;
  std::vector<std::string> notes;
};

inline RunManifest make_manifest(const CampaignConfig& cfg, const FingerprintStore& store,
                                 const std::vector<std::string>& victims) {
  RunManifest m;
  m.algorithms = cfg.algorithms;
  m.collect_freqs = cfg.collect_freqs;
  m.thresholds = cfg.thresholds;
  m.train_frac = cfg.train_frac;
  m.gaps_days = cfg.gaps_days;
  m.spoof_validity_days = cfg.spoof_validity_days;
  m.seed = cfg.seed;
  m.dataset_hash = store_hash(store);
  m.victims = victims;
  return m;
}

namespace detail {

inline nlohmann::json manifest_json(const RunManifest& m) {
  nlohmann::json j;
  std::vector<std::string> algos;
  for (Algorithm a : m.algorithms) algos.emplace_back(to_string(a));
  j["version"] = 1;
  j["algorithms"] = algos;
  j["collect_frequencies"] = m.collect_freqs;
  j["thresholds"] = {{"pano", m.thresholds.pano_threshold},
                     {"rla", m.thresholds.rla_threshold},
                     {"hla_lambda", m.thresholds.hla_lambda},
                     {"hla_diff", m.thresholds.hla_diff}};
  j["train_frac"] = m.train_frac;
  j["gaps_days"] = m.gaps_days;
  j["spoof_validity_days"] = m.spoof_validity_days;
  j["seed"] = m.seed;
  j["dataset_hash"] = m.dataset_hash;
  j["attack_setting"] = m.attack_setting;
  j["victims"] = m.victims;
  j["notes"] = m.notes;
  return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  for (const auto& a : j.at("algorithms")) m.algorithms.push_back(algorithm_from(a.get<std::string>()));
  m.collect_freqs = j.at("collect_frequencies").get<std::vector<int>>();
  m.thresholds.pano_threshold = j.at("thresholds").at("pano").get<double>();
  m.thresholds.rla_threshold = j.at("thresholds").at("rla").get<double>();
  m.thresholds.hla_lambda = j.at("thresholds").at("hla_lambda").get<double>();
  m.thresholds.hla_diff = j.at("thresholds").at("hla_diff").get<double>();
  m.train_frac = j.at("train_frac").get<double>();
  m.gaps_days = j.at("gaps_days").get<std::vector<int>>();
  m.spoof_validity_days = j.at("spoof_validity_days").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.dataset_hash = j.at("dataset_hash").get<std::uint64_t>();
  m.attack_setting = j.value("attack_setting", true);
  m.victims = j.at("victims").get<std::vector<std::string>>();
  if (j.contains("notes")) m.notes = j.at("notes").get<std::vector<std::string>>();
  return m;
}

inline std::string cell_file_name(Algorithm algo, int freq, bool attack) {
  std::string name(to_string(algo));
  name += "_f" + std::to_string(freq);
  name += attack ? "_attack.log" : "_benign.log";
  return name;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace detail

inline std::string serialize_log(const AssignmentLog& log) {
  std::string out;
  for (const auto& a : log) {
    out += std::to_string(a.counter);
    out += ' ';
    out += std::to_string(a.chain_id);
    out += ' ';
    out += to_string(a.reason);
    out += '\n';
  }
  return out;
}

inline AssignmentLog parse_log(const std::string& text) {
  AssignmentLog log;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Assignment a;
    std::string reason;
    if (!(ls >> a.counter >> a.chain_id >> reason)) throw Error("bad log line: " + line);
    a.reason = reason_from(reason);
    log.push_back(a);
  }
  return log;
}

inline void save_run_manifest(const RunManifest& m, const fs::path& dir) {
  fs::create_directories(dir);
  detail::write_text(dir / "manifest.json", detail::manifest_json(m).dump(2) + "\n");
}

inline RunManifest load_run_manifest(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  try {
    return detail::manifest_from_json(nlohmann::json::parse(detail::read_text(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad archive manifest " + path.string() + ": " + e.what());
  }
}

inline void save_campaign(const CampaignResult& result, const RunManifest& m,
                          const fs::path& archive_dir) {
  const fs::path dir = archive_dir / result.victim;
  fs::create_directories(dir);
  for (const auto& [key, log] : result.benign) {
    detail::write_text(dir / detail::cell_file_name(key.first, key.second, false),
                       serialize_log(log));
  }
  for (const auto& [key, log] : result.attack) {
    detail::write_text(dir / detail::cell_file_name(key.first, key.second, true),
                       serialize_log(log));
  }
  nlohmann::json j;
  j["victim"] = result.victim;
  j["spoof_counters"] = result.spoof_counters;
  j["complete"] = true;
  (void)m;
  detail::write_text(dir / "manifest.json", j.dump(2) + "\n");
}

// True when the victim directory holds a complete campaign. A directory with
// a manifest that is unreadable, or that claims completeness while log files
// are missing, is corrupt and raises an error naming the victim.
inline bool campaign_complete(const RunManifest& m, const fs::path& archive_dir,
                              const std::string& victim, bool attack_cells) {
  const fs::path dir = archive_dir / victim;
  if (!fs::exists(dir)) return false;
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) return false;  // interrupted run; redo
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_text(manifest));
  } catch (const std::exception&) {
    throw Error("archive for victim " + victim + " is corrupted (bad manifest)");
  }
  if (!j.value("complete", false)) {
    throw Error("archive for victim " + victim + " is corrupted (incomplete manifest)");
  }
  for (Algorithm algo : m.algorithms) {
    for (int freq : m.collect_freqs) {
      if (!fs::exists(dir / detail::cell_file_name(algo, freq, false)) ||
          (attack_cells && !fs::exists(dir / detail::cell_file_name(algo, freq, true)))) {
        throw Error("archive for victim " + victim + " is corrupted (missing log)");
      }
    }
  }
  return true;
}

struct LoadedCampaign {
  std::string victim;
  std::vector<std::uint64_t> spoof_counters;
  std::map<CellKey, AssignmentLog> benign;
  std::map<CellKey, AssignmentLog> attack;
};

inline LoadedCampaign load_campaign(const RunManifest& m, const fs::path& archive_dir,
                                    const std::string& victim) {
  const fs::path dir = archive_dir / victim;
  LoadedCampaign out;
  out.victim = victim;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_text(dir / "manifest.json"));
  } catch (const std::exception&) {
    throw Error("archive for victim " + victim + " is corrupted (bad manifest)");
  }
  if (j.contains("spoof_counters")) {
    out.spoof_counters = j.at("spoof_counters").get<std::vector<std::uint64_t>>();
  }
  for (Algorithm algo : m.algorithms) {
    for (int freq : m.collect_freqs) {
      const auto benign_path = dir / detail::cell_file_name(algo, freq, false);
      out.benign[{algo, freq}] = parse_log(detail::read_text(benign_path));
      const auto attack_path = dir / detail::cell_file_name(algo, freq, true);
      if (fs::exists(attack_path)) {
        out.attack[{algo, freq}] = parse_log(detail::read_text(attack_path));
      }
    }
  }
  return out;
}

// Benign-only run archived under the pseudo victim "_benign".
inline void run_benign_to_archive(const FingerprintStore& store, const CampaignConfig& cfg,
                                  const ForestModel* model, const fs::path& archive_dir,
                                  const std::vector<std::string>& notes = {}) {
  RunManifest manifest = make_manifest(cfg, store, {"_benign"});
  manifest.attack_setting = false;
  manifest.notes = notes;
  save_run_manifest(manifest, archive_dir);
  BenignCache cache = build_benign_cache(store, cfg, model);
  CampaignResult r;
  r.victim = "_benign";
  r.benign = cache.logs;
  save_campaign(r, manifest, archive_dir);
}

// Single-victim campaign archive.
inline CampaignResult run_attack_to_archive(const FingerprintStore& store,
                                            const std::string& victim,
                                            const CampaignConfig& cfg, const ForestModel* model,
                                            const fs::path& archive_dir,
                                            const std::vector<std::string>& notes = {}) {
  RunManifest manifest = make_manifest(cfg, store, {victim});
  manifest.notes = notes;
  save_run_manifest(manifest, archive_dir);
  CampaignResult r = run_campaign(store, victim, cfg, model);
  save_campaign(r, manifest, archive_dir);
  return r;
}

// Runs campaigns for every user and archives them; victims whose directory is
// already complete are skipped, so interrupted runs can resume.
inline std::vector<std::string> run_all_to_archive(const FingerprintStore& store,
                                                   const CampaignConfig& cfg,
                                                   const ForestModel* model,
                                                   const fs::path& archive_dir,
                                                   std::size_t jobs = 1,
                                                   std::vector<std::string>* skipped = nullptr) {
  const auto users = store_users(store);
  RunManifest manifest = make_manifest(cfg, store, users);
  save_run_manifest(manifest, archive_dir);
  std::vector<std::string> todo;
  for (const auto& u : users) {
    if (campaign_complete(manifest, archive_dir, u, true)) {
      if (skipped) skipped->push_back(u);
    } else {
      todo.push_back(u);
    }
  }
  if (todo.empty()) return todo;
  BenignCache cache = build_benign_cache(store, cfg, model);
  std::mutex io;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() -> std::exception_ptr {
    try {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= todo.size()) return nullptr;
        CampaignResult r = run_campaign(store, todo[i], cfg, model, &cache);
        std::lock_guard<std::mutex> lock(io);
        save_campaign(r, manifest, archive_dir);
      }
    } catch (...) {
      return std::current_exception();
    }
  };
  if (jobs <= 1) {
    if (auto e = worker()) std::rethrow_exception(e);
    return todo;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    threads.emplace_back([&, w] { errors[w] = worker(); });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return todo;
}

}  // namespace fplink
