// relcox: fit, bootstrap, diagnose and simulate multicast relational event models.
//
// Exit codes: 0 ok, 64 usage or configuration, 1 input error, 2 no convergence,
// 3 unidentifiable coefficients.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "manifest.hpp"
#include "relcox/bootstrap.hpp"
#include "relcox/diagnostics.hpp"
#include "relcox/error.hpp"
#include "relcox/json_io.hpp"
#include "relcox/likelihood.hpp"
#include "relcox/simulator.hpp"
#include "relcox/solver.hpp"

namespace fs = std::filesystem;
using namespace relcox;
using relcox::cli::Manifest;

namespace {

constexpr int kUsage = 64;
constexpr int kIngest = 1;
constexpr int kNoConvergence = 2;
constexpr int kUnidentifiable = 3;

struct ExitCode {
  int code;
  std::string message;
};

struct Inputs {
  fs::path events;
  fs::path traits;
  fs::path spec;
  std::string format;
  std::size_t cutoff = 5;
  std::size_t actors = 0;  // 0: densify the labels found in the file
  bool keep_self_loops = false;
};

void add_input_options(CLI::App* cmd, Inputs& in, bool events_required) {
  auto* ev = cmd->add_option("--events", in.events, "events file (.csv or .jsonl)");
  if (events_required) ev->required();
  ev->check(CLI::ExistingFile);
  cmd->add_option("--traits", in.traits, "traits.csv with header actor,<names>")->check(CLI::ExistingFile);
  cmd->add_option("--format", in.format, "csv or jsonl (default: from extension)");
  cmd->add_option("--recipient-cutoff", in.cutoff, "drop events with more receivers")->capture_default_str();
  cmd->add_option("--actors", in.actors, "labels are dense ids 0..N-1");
  cmd->add_flag("--keep-self-loops", in.keep_self_loops);
}

struct Loaded {
  EventStream stream;
  IngestReport report;
};

Loaded load_events(const Inputs& in, Manifest& m) {
  IngestOptions opt;
  opt.recipient_cutoff = in.cutoff;
  opt.exclude_self_loops = !in.keep_self_loops;
  std::optional<ActorTraits> traits;
  if (!in.traits.empty()) {
    traits = ingest_traits(in.traits, in.actors ? std::optional<std::size_t>(in.actors) : std::nullopt);
    m.input(in.traits);
    if (!in.actors && !traits->labels().empty()) opt.registry = IdMap(traits->labels());
  }
  if (in.actors) opt.actor_count = in.actors;
  const EventFormat fmt = in.format.empty() ? format_from_extension(in.events) : parse_event_format(in.format);
  IngestReport rep = ingest_events(in.events, fmt, opt);
  m.input(in.events);
  if (traits) rep.stream.set_traits(*traits);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  m.note("ingest", {{"rows", rep.total_rows},
                    {"retained", rep.retained()},
                    {"dropped_cutoff", rep.dropped_cutoff},
                    {"dropped_empty", rep.dropped_empty},
                    {"reordered", rep.reordered}});
  Loaded out{rep.stream, std::move(rep)};
  return out;
}

fs::path manifest_path(const fs::path& out, const std::string& override_path) {
  if (!override_path.empty()) return override_path;
  fs::path p = out;
  p += ".manifest.json";
  return p;
}

void write_text(const fs::path& path, const std::string& text, Manifest& m) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  f.close();
  m.output(path);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Resolve a deviance group list such as "static,send,receive,rest". "rest"
// stands for every group not yet named.
std::vector<std::string> deviance_groups(const std::string& arg, const std::vector<std::string>& coefficient_groups) {
  std::vector<std::string> known;
  for (const auto& g : coefficient_groups)
    if (std::find(known.begin(), known.end(), g) == known.end()) known.push_back(g);
  std::vector<std::string> rows = split(arg, ',');
  const auto rest = std::find(rows.begin(), rows.end(), "rest");
  if (rest != rows.end()) {
    std::vector<std::string> named;
    for (const auto& r : rows)
      for (const auto& g : split(r, '+')) named.push_back(g);
    std::vector<std::string> left;
    for (const auto& g : known)
      if (std::find(named.begin(), named.end(), g) == named.end()) left.push_back(g);
    std::string joined;
    for (const auto& g : left) joined += (joined.empty() ? "" : "+") + g;
    if (joined.empty())
      rows.erase(rest);
    else
      *rest = joined;
  }
  return rows;
}

std::string unidentifiable_message(const FitResult& f) {
  std::string msg = "unidentifiable coefficients:";
  for (auto k : f.unidentifiable) msg += " " + f.names[k];
  return msg;
}

struct FitArgs {
  Inputs in;
  std::string variant = "approx";
  fs::path out = "fit.json";
  std::string deviance;
  fs::path deviance_out;
  fs::path terms_out;
  std::string manifest;
  int max_iters = 100;
  double grad_tol = 1e-8;
  bool overdispersion = false;
};

int cmd_fit(const FitArgs& a, unsigned threads) {
  Manifest m("fit");
  auto [stream, report] = load_events(a.in, m);
  const Json spec_json = read_json(a.in.spec);
  m.input(a.in.spec);
  const CovariateSpec spec = spec_from_json(spec_json);
  const Variant variant = parse_variant(a.variant);

  SolverConfig cfg;
  cfg.max_iters = a.max_iters;
  cfg.grad_tol = a.grad_tol;
  cfg.threads = threads;
  m.config({{"variant", to_string(variant)},
            {"spec", spec_to_json(spec)},
            {"max_iters", a.max_iters},
            {"grad_tol", a.grad_tol},
            {"recipient_cutoff", a.in.cutoff},
            {"deviance", a.deviance}});

  DesignBuilder builder(stream, spec);
  CachedDesign design(builder);
  Likelihood lik(design);
  FitResult result = fit(lik, variant, cfg);

  Json j = fit_to_json(result);
  j["spec"] = spec_to_json(spec);
  j["actor_count"] = stream.actor_count();
  j["recipient_cutoff"] = a.in.cutoff;
  Json tests = Json::array();
  for (const auto& t : wald_tests(result, 1e-3, a.overdispersion))
    tests.push_back({{"name", t.name}, {"estimate", t.estimate}, {"se", t.se}, {"z", t.z},
                     {"p_value", t.p_value}, {"significant", t.significant}});
  j["wald"] = tests;
  if (a.overdispersion) j["se_overdispersion"] = standard_errors(result, true);

  if (!a.deviance.empty()) {
    const auto groups = deviance_groups(a.deviance, spec.coefficient_groups());
    DevianceTable table = deviance_table(lik, groups, spec.coefficient_groups(), variant, cfg);
    fs::path dpath = a.deviance_out;
    if (dpath.empty()) dpath = fs::path(a.out).replace_extension(".deviance.csv");
    std::ostringstream csv;
    write_deviance_csv(csv, table);
    write_text(dpath, csv.str(), m);
    j["deviance_table"] = dpath.string();
    j["deviance_df_convention"] = table.df_convention;
  }
  if (!a.terms_out.empty()) {
    LikelihoodOptions lo;
    lo.variant = variant;
    lo.order = 0;
    lo.keep_terms = true;
    lo.threads = threads;
    std::ostringstream csv;
    write_terms_csv(csv, design, lik.evaluate(result.beta, lo));
    write_text(a.terms_out, csv.str(), m);
  }

  write_json(a.out, j);
  m.output(a.out);
  m.write(manifest_path(a.out, a.manifest));

  if (!result.unidentifiable.empty()) throw ExitCode{kUnidentifiable, unidentifiable_message(result)};
  if (!result.converged)
    throw ExitCode{kNoConvergence, "no convergence after " + std::to_string(result.iterations) + " iterations"};
  std::cerr << "converged in " << result.iterations << " iterations, logpl " << format_time(result.logpl) << '\n';
  return 0;
}

struct BootArgs {
  Inputs in;
  fs::path fit_path;
  std::string variant = "approx";
  std::size_t replicates = 300;
  std::uint64_t seed = 0;
  std::string sampler = "successive";
  fs::path out = "bootstrap.json";
  fs::path summary_out;
  std::string manifest;
};

CovariateSpec spec_for(const Inputs& in, const Json* fit_json, Manifest& m) {
  if (!in.spec.empty()) {
    m.input(in.spec);
    return spec_from_json(read_json(in.spec));
  }
  if (fit_json && fit_json->contains("spec")) return spec_from_json(fit_json->at("spec"));
  throw ConfigError("--spec is required when the fit JSON carries no spec");
}

int cmd_bootstrap(const BootArgs& a, unsigned threads) {
  Manifest m("bootstrap");
  m.seed(a.seed);
  auto [stream, report] = load_events(a.in, m);
  Json fit_json;
  if (!a.fit_path.empty()) {
    fit_json = read_json(a.fit_path);
    m.input(a.fit_path);
  }
  const CovariateSpec spec = spec_for(a.in, a.fit_path.empty() ? nullptr : &fit_json, m);
  DesignBuilder builder(stream, spec);
  CachedDesign design(builder);
  Likelihood lik(design);

  SolverConfig scfg;
  scfg.threads = threads;
  FitResult original;
  if (!a.fit_path.empty()) {
    original = fit_from_json(fit_json);
    if (static_cast<std::size_t>(original.beta.size()) != spec.dimension())
      throw ConfigError("fit JSON does not match the covariate spec");
  } else {
    original = fit(lik, parse_variant(a.variant), scfg);
    if (!original.converged) throw ExitCode{kNoConvergence, "original fit did not converge"};
  }
  if (original.se.size() != original.beta.size()) original.se = standard_errors(original);

  BootstrapConfig bc;
  bc.replicates = a.replicates;
  bc.seed = a.seed;
  bc.sampler = parse_sampler(a.sampler);
  m.config({{"replicates", a.replicates}, {"seed", a.seed}, {"sampler", to_string(bc.sampler)},
            {"spec", spec_to_json(spec)}, {"max_iters", bc.max_iters}});

  BootstrapReport rep = bootstrap_bias(lik, original, bc, scfg);
  const auto names = spec.coefficient_names();
  write_json(a.out, bootstrap_to_json(rep, names, bc));
  m.output(a.out);
  fs::path spath = a.summary_out;
  if (spath.empty()) spath = fs::path(a.out).replace_extension(".summary.csv");
  std::ostringstream csv;
  write_bootstrap_summary_csv(csv, rep, names);
  write_text(spath, csv.str(), m);
  m.note("skipped", rep.skipped);
  m.write(manifest_path(a.out, a.manifest));
  if (rep.excessive_skips)
    std::cerr << "warning: " << rep.skipped << " of " << a.replicates << " replicate fits failed\n";
  return 0;
}

struct DiagArgs {
  Inputs in;
  fs::path fit_path;
  std::string mode;  // empty: follow the fitted variant
  fs::path out = "residuals.csv";
  fs::path summary_out;
  std::string manifest;
};

int cmd_diagnose(const DiagArgs& a) {
  Manifest m("diagnose");
  auto [stream, report] = load_events(a.in, m);
  const Json fit_json = read_json(a.fit_path);
  m.input(a.fit_path);
  const CovariateSpec spec = spec_for(a.in, &fit_json, m);
  const FitResult f = fit_from_json(fit_json);
  if (static_cast<std::size_t>(f.beta.size()) != spec.dimension())
    throw ConfigError("fit JSON does not match the covariate spec");
  const std::string mode_name =
      !a.mode.empty() ? a.mode : (f.variant == Variant::exact_multicast ? "multicast" : "duplication");
  const ExpectedMode mode = parse_expected_mode(mode_name);
  m.config({{"mode", mode_name}, {"spec", spec_to_json(spec)}});

  DesignBuilder builder(stream, spec);
  CachedDesign design(builder);
  const PairCounts counts = expected_counts(design, f.beta, mode);
  const ResidualReport res = residuals(counts, spec.dimension());
  std::ostringstream csv;
  write_residuals_csv(csv, res, stream.ids());
  write_text(a.out, csv.str(), m);

  Json summary = summary_to_json(residual_summary(res));
  summary["conservation_error"] = conservation_error(counts);
  summary["mode"] = mode_name;
  fs::path spath = a.summary_out;
  if (spath.empty()) spath = fs::path(a.out).replace_extension(".summary.json");
  write_json(spath, summary);
  m.output(spath);
  m.write(manifest_path(a.out, a.manifest));
  return 0;
}

struct SimArgs {
  fs::path config;
  fs::path out = "events.csv";
  fs::path truth_out;
  fs::path traits_out;
  std::string format;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> target_events;
  std::optional<double> horizon;
  std::string manifest;
};

int cmd_simulate(const SimArgs& a) {
  Manifest m("simulate");
  const Json cj = read_json(a.config);
  m.input(a.config);
  SimConfig cfg = sim_config_from_json(cj, a.config.parent_path());
  if (a.seed) cfg.seed = *a.seed;
  if (a.target_events) cfg.target_events = *a.target_events;
  if (a.horizon) cfg.horizon = *a.horizon;
  m.seed(cfg.seed);

  const EventStream stream = simulate(cfg);
  const EventFormat fmt = a.format.empty() ? format_from_extension(a.out) : parse_event_format(a.format);
  export_events(a.out, stream, fmt);
  m.output(a.out);

  Json truth = sim_truth_json(cfg, stream);
  m.config(truth["config"]);
  fs::path tpath = a.truth_out;
  if (tpath.empty()) tpath = fs::path(a.out).replace_extension(".truth.json");
  write_json(tpath, truth);
  m.output(tpath);
  if (cfg.traits) {
    fs::path trpath = a.traits_out;
    if (trpath.empty()) trpath = fs::path(a.out).replace_extension(".traits.csv");
    std::ostringstream csv;
    write_traits(csv, *cfg.traits);
    write_text(trpath, csv.str(), m);
  }
  m.write(manifest_path(a.out, a.manifest));
  std::cerr << "simulated " << stream.size() << " events\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cox relational event models for multicast interaction streams"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (default: RELCOX_THREADS or all cores)");

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "maximize the log partial likelihood");
  add_input_options(fit_cmd, fa.in, true);
  fit_cmd->add_option("--spec", fa.in.spec, "covariate spec JSON")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--variant", fa.variant, "pairwise, exact or approx")->capture_default_str();
  fit_cmd->add_option("--out", fa.out)->capture_default_str();
  fit_cmd->add_option("--deviance", fa.deviance, "comma-separated groups, e.g. static,send,receive,rest");
  fit_cmd->add_option("--deviance-out", fa.deviance_out);
  fit_cmd->add_option("--terms-out", fa.terms_out, "per-event log-likelihood terms CSV");
  fit_cmd->add_option("--max-iters", fa.max_iters)->capture_default_str();
  fit_cmd->add_option("--grad-tol", fa.grad_tol)->capture_default_str();
  fit_cmd->add_flag("--overdispersion", fa.overdispersion, "scale Wald tests by the dispersion estimate");
  fit_cmd->add_option("--manifest", fa.manifest);

  BootArgs ba;
  auto* boot_cmd = app.add_subcommand("bootstrap", "parametric bootstrap bias correction");
  add_input_options(boot_cmd, ba.in, true);
  boot_cmd->add_option("--spec", ba.in.spec)->check(CLI::ExistingFile);
  boot_cmd->add_option("--fit", ba.fit_path, "fit JSON; refits when absent")->check(CLI::ExistingFile);
  boot_cmd->add_option("--variant", ba.variant)->capture_default_str();
  boot_cmd->add_option("--replicates", ba.replicates)->capture_default_str()->check(CLI::PositiveNumber);
  boot_cmd->add_option("--seed", ba.seed)->capture_default_str();
  boot_cmd->add_option("--sampler", ba.sampler, "successive or conditional_poisson")->capture_default_str();
  boot_cmd->add_option("--out", ba.out)->capture_default_str();
  boot_cmd->add_option("--summary-out", ba.summary_out);
  boot_cmd->add_option("--manifest", ba.manifest);

  DiagArgs da;
  auto* diag_cmd = app.add_subcommand("diagnose", "per-pair martingale and Pearson residuals");
  add_input_options(diag_cmd, da.in, true);
  diag_cmd->add_option("--spec", da.in.spec)->check(CLI::ExistingFile);
  diag_cmd->add_option("--fit", da.fit_path)->required()->check(CLI::ExistingFile);
  diag_cmd->add_option("--mode", da.mode, "duplication or multicast (default: from the fitted variant)");
  diag_cmd->add_option("--out", da.out)->capture_default_str();
  diag_cmd->add_option("--summary-out", da.summary_out);
  diag_cmd->add_option("--manifest", da.manifest);

  SimArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "simulate a multicast event stream");
  sim_cmd->add_option("--config", sa.config)->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--out", sa.out)->capture_default_str();
  sim_cmd->add_option("--truth-out", sa.truth_out);
  sim_cmd->add_option("--traits-out", sa.traits_out);
  sim_cmd->add_option("--format", sa.format);
  sim_cmd->add_option("--seed", sa.seed);
  sim_cmd->add_option("--target-events", sa.target_events);
  sim_cmd->add_option("--horizon", sa.horizon);
  sim_cmd->add_option("--manifest", sa.manifest);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (*fit_cmd) return cmd_fit(fa, threads);
    if (*boot_cmd) return cmd_bootstrap(ba, threads);
    if (*diag_cmd) return cmd_diagnose(da);
    if (*sim_cmd) return cmd_simulate(sa);
  } catch (const ExitCode& e) {
    std::cerr << "error: " << e.message << '\n';
    return e.code;
  } catch (const SingularInformationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUnidentifiable;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIngest;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIngest;
  }
  return kUsage;
}
