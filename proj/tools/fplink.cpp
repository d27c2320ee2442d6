// Command-line front end: dataset pipeline, forest training, benign/attack
// campaigns, reports and spoof emission. Every command is deterministic under
// a fixed --seed; exit codes are 0 (ok), 1 (usage), 2 (data error).

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fplink/archive.hpp"
#include "fplink/report.hpp"
#include "fplink/spoof.hpp"

namespace fs = std::filesystem;
using namespace fplink;

namespace {

fs::path default_out(const std::string& explicit_path, const std::string& name) {
  if (!explicit_path.empty()) return explicit_path;
  if (const char* dir = std::getenv("FPLINK_OUT")) return fs::path(dir) / name;
  return name;
}

std::vector<Algorithm> parse_algos(const std::vector<std::string>& tokens) {
  std::vector<Algorithm> out;
  for (const auto& t : tokens) {
    if (t == "all") {
      return {Algorithm::panopticlick, Algorithm::rla, Algorithm::hla};
    }
    out.push_back(algorithm_from(t));
  }
  if (out.empty()) out = {Algorithm::panopticlick, Algorithm::rla, Algorithm::hla};
  return out;
}

void check_unit_interval(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) {
    throw Error(std::string(name) + " must be in (0,1)");
  }
}

struct RunFlags {
  std::string data;
  std::vector<std::string> algos;
  std::vector<int> freqs{kCollectFrequencies.begin(), kCollectFrequencies.end()};
  std::string model_path;
  std::string out;
  std::uint64_t seed = 0;
  double train_frac = 0.0;
  double pano_threshold = 0.85;
  double rla_threshold = 0.75;
  double hla_lambda = 0.994;
  double hla_diff = 0.1;
  std::vector<int> gaps{kDefaultGapsDays.begin(), kDefaultGapsDays.end()};
  int validity = 5;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool with_gaps) {
  cmd->add_option("--data", f.data, "dataset file (.fpds)")->required();
  cmd->add_option("--algo", f.algos, "algorithms: pano, rla, hla or all");
  cmd->add_option("--freq", f.freqs, "collect frequencies in days");
  cmd->add_option("--model", f.model_path, "trained forest model file");
  cmd->add_option("--out", f.out, "archive directory");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--train-frac", f.train_frac,
                  "fraction excluded from the replayed stream (0 replays everything)");
  cmd->add_option("--pano-threshold", f.pano_threshold, "similarity threshold");
  cmd->add_option("--rla-threshold", f.rla_threshold, "similarity threshold");
  cmd->add_option("--lambda", f.hla_lambda, "forest acceptance threshold");
  cmd->add_option("--diff", f.hla_diff, "top-1 vs top-2 score margin");
  if (with_gaps) {
    cmd->add_option("--gaps", f.gaps, "spoof time gaps in days");
    cmd->add_option("--validity", f.validity, "spoof validity in days");
  }
}

CampaignConfig make_config(const RunFlags& f) {
  check_unit_interval(f.pano_threshold, "--pano-threshold");
  check_unit_interval(f.rla_threshold, "--rla-threshold");
  check_unit_interval(f.hla_lambda, "--lambda");
  check_unit_interval(f.hla_diff, "--diff");
  if (f.train_frac < 0.0 || f.train_frac >= 1.0) throw Error("--train-frac must be in [0,1)");
  CampaignConfig cfg;
  cfg.algorithms = parse_algos(f.algos);
  cfg.collect_freqs = f.freqs;
  cfg.thresholds = {f.pano_threshold, f.rla_threshold, f.hla_lambda, f.hla_diff};
  cfg.train_frac = f.train_frac;
  cfg.gaps_days = f.gaps;
  cfg.spoof_validity_days = f.validity;
  cfg.seed = f.seed;
  return cfg;
}

// Loads --model, or trains the standard model when hla is requested without one.
ForestModel prepare_model(const RunFlags& f, const CampaignConfig& cfg,
                          const FingerprintStore& store, std::vector<std::string>& notes,
                          bool& needed) {
  needed = false;
  for (Algorithm a : cfg.algorithms) {
    if (a == Algorithm::hla) needed = true;
  }
  if (!needed) return {};
  if (!f.model_path.empty()) return load_model(f.model_path);
  notes.push_back("model auto-trained (no --model given)");
  return train_default_model(store, 0.4, 1, ForestHyperparams{}, f.seed, &notes);
}

int run_main(int argc, char** argv) {
  CLI::App app{"browser-fingerprint linking, spoof campaigns and tracking metrics"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a deterministic synthetic dataset");
  SyntheticConfig scfg;
  std::string drift = "stable";
  std::string synth_out;
  synth->add_option("--users", scfg.n_users, "number of users");
  synth->add_option("--records", scfg.records_per_user, "records per user");
  synth->add_option("--span-days", scfg.span_days, "days covered by each user's series");
  synth->add_option("--drift", drift, "stable, version_bump or attr_churn");
  synth->add_option("--churn-rate", scfg.churn_rate, "per-step flip probability");
  synth->add_option("--seed", scfg.seed, "rng seed");
  synth->add_option("--out", synth_out, "output dataset path");
  synth->callback([&] {
    scfg.drift = drift_from(drift);
    auto store = synthesize(scfg);
    auto path = default_out(synth_out, "synth.fpds");
    save_store(store, path.string());
    std::cout << "wrote " << store.size() << " records (" << scfg.n_users << " users) to "
              << path.string() << "\n";
  });

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "validate a dataset, optionally re-export");
  std::string ingest_in, ingest_out;
  ingest_cmd->add_option("--in", ingest_in, "dataset file")->required();
  ingest_cmd->add_option("--out", ingest_out, "normalized export path");
  ingest_cmd->callback([&] {
    std::vector<std::string> notes;
    auto store = ingest(ingest_in, &notes);
    for (const auto& n : notes) std::cout << "note: " << n << "\n";
    std::cout << store.size() << " records, " << store_users(store).size() << " users\n";
    if (!ingest_out.empty()) {
      save_store(store, ingest_out);
      std::cout << "normalized export written to " << ingest_out << "\n";
    }
  });

  // clean
  auto* clean_cmd = app.add_subcommand("clean", "drop inconsistent and small users");
  std::string clean_in, clean_out;
  std::size_t min_count = 7;
  bool no_filter = false;
  clean_cmd->add_option("--in", clean_in, "dataset file")->required();
  clean_cmd->add_option("--out", clean_out, "output dataset path");
  clean_cmd->add_option("--min-count", min_count, "minimum records per user");
  clean_cmd->add_flag("--no-filter", no_filter, "skip the minimum-record filter");
  clean_cmd->callback([&] {
    auto store = ingest(clean_in);
    auto [cleaned, s1] = clean_consistency(store);
    std::cout << "consistency: removed " << s1.n_removed_inconsistent_users << " users, "
              << s1.n_users << " remain\n";
    FingerprintStore final_store = std::move(cleaned);
    if (!no_filter) {
      auto [filtered, s2] = filter_min_fingerprints(final_store, min_count);
      std::cout << "min-count " << min_count << ": removed " << s2.n_removed_small_users
                << " users, " << s2.n_users << " remain\n";
      final_store = std::move(filtered);
    }
    auto path = default_out(clean_out, "clean.fpds");
    save_store(final_store, path.string());
    std::cout << "wrote " << final_store.size() << " records to " << path.string() << "\n";
  });

  // expand
  auto* expand_cmd = app.add_subcommand("expand", "collect-frequency expansion");
  std::string expand_in, expand_out;
  int expand_freq = 1;
  expand_cmd->add_option("--in", expand_in, "dataset file")->required();
  expand_cmd->add_option("--freq", expand_freq, "collect frequency in days")->required();
  expand_cmd->add_option("--out", expand_out, "output dataset path");
  expand_cmd->callback([&] {
    auto store = ingest(expand_in);
    auto ex = expand(store, expand_freq);
    for (const auto& w : ex.warnings) std::cout << "warning: " << w << "\n";
    auto path = default_out(expand_out, "expanded.fpds");
    save_store(ex.store, path.string());
    std::cout << store.size() << " records expanded to " << ex.store.size() << ", written to "
              << path.string() << "\n";
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "train the pair-classification forest");
  std::string train_in, train_out;
  std::uint64_t train_seed = 0;
  double train_frac = 0.4;
  std::size_t neg_per_pos = 1;
  ForestHyperparams hp;
  train_cmd->add_option("--data", train_in, "dataset file")->required();
  train_cmd->add_option("--out", train_out, "model output path");
  train_cmd->add_option("--seed", train_seed, "rng seed");
  train_cmd->add_option("--frac", train_frac, "training fraction of the store");
  train_cmd->add_option("--neg-per-pos", neg_per_pos, "negative pairs per positive");
  train_cmd->add_option("--trees", hp.n_trees, "number of trees");
  train_cmd->add_option("--max-depth", hp.max_depth, "maximum depth (0 = unlimited)");
  train_cmd->add_option("--min-leaf", hp.min_leaf, "minimum samples per leaf");
  train_cmd->add_option("--features-per-split", hp.features_per_split,
                        "features examined per split");
  train_cmd->callback([&] {
    auto store = ingest(train_in);
    std::vector<std::string> notes;
    auto model = train_default_model(store, train_frac, neg_per_pos, hp, train_seed, &notes);
    for (const auto& n : notes) std::cout << "note: " << n << "\n";
    auto path = default_out(train_out, "forest.fpm");
    save_model(model, path.string());
    std::cout << "model with " << model.trees.size() << " trees written to " << path.string()
              << "\n";
  });

  // run-benign
  auto* benign_cmd = app.add_subcommand("run-benign", "benign replays for every cell");
  RunFlags bf;
  add_run_flags(benign_cmd, bf, false);
  benign_cmd->callback([&] {
    auto cfg = make_config(bf);
    auto store = ingest(bf.data);
    std::vector<std::string> notes;
    bool need_model = false;
    ForestModel model = prepare_model(bf, cfg, store, notes, need_model);
    auto out = default_out(bf.out, "archive");
    run_benign_to_archive(store, cfg, need_model ? &model : nullptr, out, notes);
    std::cout << "benign archive written to " << out.string() << "\n";
  });

  // run-attack
  auto* attack_cmd = app.add_subcommand("run-attack", "spoof campaign for one victim");
  RunFlags af;
  std::string victim;
  add_run_flags(attack_cmd, af, true);
  attack_cmd->add_option("--victim", victim, "victim user id")->required();
  attack_cmd->callback([&] {
    auto cfg = make_config(af);
    auto store = ingest(af.data);
    std::vector<std::string> notes;
    bool need_model = false;
    ForestModel model = prepare_model(af, cfg, store, notes, need_model);
    auto out = default_out(af.out, "archive");
    auto result =
        run_attack_to_archive(store, victim, cfg, need_model ? &model : nullptr, out, notes);
    std::cout << "campaign for " << victim << " archived to " << out.string() << " ("
              << result.spoof_counters.size() << " spoofs injected and reverted)\n";
  });

  // run-all
  auto* all_cmd = app.add_subcommand("run-all", "spoof campaigns for every user");
  RunFlags rf;
  std::size_t jobs = 1;
  add_run_flags(all_cmd, rf, true);
  all_cmd->add_option("--jobs", jobs, "parallel campaigns");
  all_cmd->callback([&] {
    auto cfg = make_config(rf);
    auto store = ingest(rf.data);
    std::vector<std::string> notes;
    bool need_model = false;
    ForestModel model = prepare_model(rf, cfg, store, notes, need_model);
    auto out = default_out(rf.out, "archive");
    std::vector<std::string> skipped;
    auto ran = run_all_to_archive(store, cfg, need_model ? &model : nullptr, out,
                                  std::max<std::size_t>(1, jobs), &skipped);
    std::cout << "archived " << ran.size() << " campaigns (" << skipped.size()
              << " already complete) in " << out.string() << "\n";
  });

  // report
  auto* report_cmd = app.add_subcommand("report", "render CSVs and a summary from an archive");
  std::string rep_archive, rep_data, rep_out;
  report_cmd->add_option("--archive", rep_archive, "archive directory")->required();
  report_cmd->add_option("--data", rep_data, "dataset the archive was produced from")->required();
  report_cmd->add_option("--out", rep_out, "report output directory");
  report_cmd->callback([&] {
    auto store = ingest(rep_data);
    auto out = default_out(rep_out, "report");
    auto checks = emit_report(rep_archive, store, out);
    std::cout << "report written to " << out.string() << "\n";
    std::cout << "min ownership " << checks.min_ownership;
    if (checks.has_attack) {
      std::cout << ", min per-day FPR " << checks.min_fpr << ", max TPR delta "
                << checks.max_tpr_delta;
    }
    std::cout << "\n";
  });

  // spoof-emit
  auto* spoof_cmd = app.add_subcommand("spoof-emit", "emit a spoof profile and override script");
  std::string sp_data, sp_victim, sp_from, sp_profile_out, sp_script_out;
  std::int64_t sp_counter = -1;
  spoof_cmd->add_option("--data", sp_data, "dataset file");
  spoof_cmd->add_option("--victim", sp_victim, "use this user's oldest record");
  spoof_cmd->add_option("--counter", sp_counter, "use the record with this counter");
  spoof_cmd->add_option("--from-profile", sp_from, "reuse an existing profile file");
  spoof_cmd->add_option("--out-profile", sp_profile_out, "profile output path");
  spoof_cmd->add_option("--out-script", sp_script_out, "script output path");
  spoof_cmd->callback([&] {
    SpoofProfile profile;
    if (!sp_from.empty()) {
      profile = parse_profile(detail::read_text(sp_from));
    } else {
      if (sp_data.empty()) throw Error("spoof-emit needs --data or --from-profile");
      auto store = ingest(sp_data);
      const FingerprintRecord* rec = nullptr;
      if (sp_counter >= 0) {
        if (static_cast<std::size_t>(sp_counter) >= store.size()) {
          throw Error("counter not present: " + std::to_string(sp_counter));
        }
        rec = &store.records[static_cast<std::size_t>(sp_counter)];
      } else if (!sp_victim.empty()) {
        for (const auto& r : store.records) {
          if (r.user_id == sp_victim) {
            rec = &r;
            break;
          }
        }
        if (rec == nullptr) throw Error("unknown victim: \"" + sp_victim + "\"");
      } else {
        throw Error("spoof-emit needs --victim or --counter");
      }
      profile = emit_profile(*rec);
    }
    auto profile_path = default_out(sp_profile_out, "spoof.prof");
    detail::write_text(profile_path, serialize_profile(profile));
    auto script_path = default_out(sp_script_out, "spoof.js");
    detail::write_text(script_path, emit_injection_script(profile));
    std::cout << "profile: " << profile_path.string() << "\nscript:  " << script_path.string()
              << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_main(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
