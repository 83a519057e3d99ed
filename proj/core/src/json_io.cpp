#include "relcox/json_io.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include "relcox/error.hpp"

namespace relcox {

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw IngestError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& value) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << value.dump(2) << '\n';
}

namespace {

// NaN and infinities are not JSON numbers; they become null.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(number(v(k)));
  return a;
}

Eigen::VectorXd vector_from(const Json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k)
    v(static_cast<Eigen::Index>(k)) = a[k].is_null() ? std::nan("") : a[k].get<double>();
  return v;
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void add_effects(const Json& list, bool triadic, std::vector<DyadicTerm>& dy, std::vector<TriadicTerm>& tr) {
  if (!list.is_array()) throw ConfigError(std::string(triadic ? "triadic" : "dyadic") + " must be a list");
  for (const auto& item : list) {
    std::string name, form = "both";
    if (item.is_string()) {
      name = item.get<std::string>();
    } else {
      name = item.at("name").get<std::string>();
      form = get_or<std::string>(item, "form", "both");
    }
    std::vector<EffectForm> forms;
    if (form == "both")
      forms = {EffectForm::indicator, EffectForm::binned};
    else
      forms = {parse_form(form)};
    for (auto f : forms) {
      if (triadic)
        tr.push_back({parse_triadic(name), f});
      else
        dy.push_back({parse_dyadic(name), f});
    }
  }
}

}  // namespace

CovariateSpec spec_from_json(const Json& j) {
  try {
    IntervalScheme scheme;
    if (j.contains("intervals_seconds"))
      scheme = IntervalScheme(j.at("intervals_seconds").get<std::vector<double>>());
    else if (j.contains("preset"))
      scheme = IntervalScheme::enron_default();

    if (j.contains("preset")) {
      if (j.at("preset").get<std::string>() != "enron") throw ConfigError("unknown spec preset");
      return CovariateSpec::enron_preset(j.at("traits").get<std::vector<std::string>>(),
                                         get_or<bool>(j, "triadic", true), scheme);
    }
    std::vector<StaticTerm> st;
    if (j.contains("static"))
      for (const auto& s : j.at("static")) st.push_back(StaticTerm::parse(s.get<std::string>()));
    std::vector<DyadicTerm> dy;
    std::vector<TriadicTerm> tr;
    if (j.contains("dyadic")) add_effects(j.at("dyadic"), false, dy, tr);
    if (j.contains("triadic")) add_effects(j.at("triadic"), true, dy, tr);
    return CovariateSpec(std::move(st), std::move(dy), std::move(tr), std::move(scheme));
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("covariate spec: ") + e.what());
  }
}

Json spec_to_json(const CovariateSpec& spec) {
  Json j;
  j["static"] = Json::array();
  for (const auto& t : spec.static_terms()) j["static"].push_back(t.name());
  j["dyadic"] = Json::array();
  for (const auto& t : spec.dyadic_terms())
    j["dyadic"].push_back({{"name", to_string(t.effect)}, {"form", to_string(t.form)}});
  j["triadic"] = Json::array();
  for (const auto& t : spec.triadic_terms())
    j["triadic"].push_back({{"name", to_string(t.effect)}, {"form", to_string(t.form)}});
  j["intervals_seconds"] = spec.scheme().boundaries();
  return j;
}

Json fit_to_json(const FitResult& fit) {
  Json j;
  j["names"] = fit.names;
  j["variant"] = to_string(fit.variant);
  j["beta"] = vector_json(fit.beta);
  j["se"] = vector_json(fit.se);
  Json cov = Json::array();
  for (Eigen::Index r = 0; r < fit.cov.rows(); ++r)
    for (Eigen::Index c = 0; c < fit.cov.cols(); ++c) cov.push_back(number(fit.cov(r, c)));
  j["cov"] = cov;
  j["logpl"] = fit.logpl;
  j["deviance"] = fit.deviance();
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["n_events"] = fit.n_events;
  j["selections"] = fit.selections;
  j["residual_df"] = fit.residual_df;
  j["overdispersion"] = number(fit.overdispersion);
  j["ridge"] = fit.ridge_used;
  Json bad = Json::array();
  for (auto k : fit.unidentifiable) bad.push_back(k < fit.names.size() ? fit.names[k] : std::to_string(k));
  j["unidentifiable"] = bad;
  return j;
}

FitResult fit_from_json(const Json& j) {
  try {
    FitResult f;
    f.names = j.at("names").get<std::vector<std::string>>();
    f.beta = vector_from(j.at("beta"));
    if (j.contains("se")) f.se = vector_from(j.at("se"));
    if (j.contains("variant")) f.variant = parse_variant(j.at("variant").get<std::string>());
    const auto p = f.beta.size();
    if (j.contains("cov")) {
      const Eigen::VectorXd flat = vector_from(j.at("cov"));
      if (flat.size() != p * p) throw ConfigError("fit JSON: cov has the wrong size");
      f.cov.resize(p, p);
      for (Eigen::Index r = 0; r < p; ++r)
        for (Eigen::Index c = 0; c < p; ++c) f.cov(r, c) = flat(r * p + c);
    }
    f.logpl = get_or<double>(j, "logpl", 0.0);
    f.converged = get_or<bool>(j, "converged", false);
    f.iterations = get_or<int>(j, "iterations", 0);
    f.n_events = get_or<std::size_t>(j, "n_events", 0);
    if (j.contains("overdispersion") && !j.at("overdispersion").is_null())
      f.overdispersion = j.at("overdispersion").get<double>();
    return f;
  } catch (const Json::exception& e) {
    throw IngestError(std::string("fit JSON: ") + e.what());
  }
}

void write_deviance_csv(std::ostream& out, const DevianceTable& table) {
  out << "Term,Df,Deviance,Resid. Df,Resid. Dev\n";
  for (const auto& r : table.rows) {
    out << r.term << ',';
    if (r.term != "Null") out << r.df;
    out << ',';
    if (r.term != "Null") out << format_time(r.deviance);
    out << ',' << format_time(r.resid_df) << ',' << format_time(r.resid_dev) << '\n';
  }
}

Json bootstrap_to_json(const BootstrapReport& report, const std::vector<std::string>& names,
                       const BootstrapConfig& config) {
  Json j;
  j["names"] = names;
  j["beta_tilde"] = vector_json(report.beta_tilde);
  j["bias_hat"] = vector_json(report.bias_hat);
  j["beta_corrected"] = vector_json(report.beta_corrected);
  Json reps = Json::array();
  for (Eigen::Index r = 0; r < report.replicates.rows(); ++r) reps.push_back(vector_json(report.replicates.row(r).transpose()));
  j["replicates"] = reps;
  j["skipped"] = report.skipped;
  j["excessive_skips"] = report.excessive_skips;
  j["seed"] = config.seed;
  j["sampler"] = to_string(config.sampler);
  j["residual_mean"] = vector_json(report.residual_mean);
  j["residual_sd"] = vector_json(report.residual_sd);
  return j;
}

void write_bootstrap_summary_csv(std::ostream& out, const BootstrapReport& report,
                                 const std::vector<std::string>& names) {
  out << "coefficient,mean,sd\n";
  for (Eigen::Index k = 0; k < report.residual_mean.size(); ++k)
    out << names[static_cast<std::size_t>(k)] << ',' << format_time(report.residual_mean(k)) << ','
        << format_time(report.residual_sd(k)) << '\n';
}

Json summary_to_json(const ResidualSummary& s) {
  Json j;
  Json q = Json::object();
  for (std::size_t k = 0; k < s.probs.size(); ++k) q[format_time(s.probs[k])] = s.quantiles[k];
  j["quantiles_abs_pearson"] = q;
  j["max_abs_pearson"] = s.max_abs;
  j["x2"] = s.x2;
  j["df_approx"] = s.df_approx;
  j["pairs"] = s.pairs;
  j["anomalies"] = s.anomalies;
  return j;
}

Eigen::VectorXd beta_from_json(const Json& j, const CovariateSpec& spec) {
  const auto names = spec.coefficient_names();
  if (j.is_array()) {
    Eigen::VectorXd b = vector_from(j);
    if (static_cast<std::size_t>(b.size()) != names.size())
      throw ConfigError("beta has " + std::to_string(b.size()) + " entries, spec needs " +
                        std::to_string(names.size()));
    return b;
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(names.size()));
  for (const auto& [key, value] : j.items()) {
    auto it = std::find(names.begin(), names.end(), key);
    if (it == names.end()) throw ConfigError("beta names unknown coefficient '" + key + "'");
    b(it - names.begin()) = value.get<double>();
  }
  return b;
}

SimConfig sim_config_from_json(const Json& j, const std::filesystem::path& base) {
  const auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
  };
  try {
    SimConfig c;
    c.actor_count = j.at("actor_count").get<std::size_t>();
    if (j.contains("horizon")) c.horizon = j.at("horizon").get<double>();
    if (j.contains("target_events")) c.target_events = j.at("target_events").get<std::size_t>();
    c.start_time = get_or<double>(j, "start_time", 0.0);
    if (j.contains("baseline")) {
      const auto& b = j.at("baseline");
      c.baseline = b.is_number() ? std::vector<double>(c.actor_count, b.get<double>()) : b.get<std::vector<double>>();
    }
    if (j.contains("baseline_schedule"))
      for (const auto& seg : j.at("baseline_schedule")) {
        BaselineSegment s;
        s.start = seg.at("start").get<double>();
        const auto& r = seg.at("rates");
        s.rates = r.is_number() ? std::vector<double>(c.actor_count, r.get<double>()) : r.get<std::vector<double>>();
        c.schedule.push_back(std::move(s));
      }
    if (j.contains("size_probs")) c.size_probs = j.at("size_probs").get<std::vector<double>>();
    c.normalize_by_subsets = get_or<bool>(j, "normalize_by_subsets", false);
    c.seed = get_or<std::uint64_t>(j, "seed", 0);

    const auto& spec = j.at("spec");
    c.spec = spec.is_string() ? spec_from_json(read_json(resolve(spec.get<std::string>()))) : spec_from_json(spec);

    if (j.contains("traits_file")) {
      c.traits = ingest_traits(resolve(j.at("traits_file").get<std::string>()), c.actor_count);
    } else if (j.contains("random_traits")) {
      const auto& rt = j.at("random_traits");
      c.traits = random_traits(rt.at("names").get<std::vector<std::string>>(), c.actor_count,
                               get_or<double>(rt, "prob", 0.5), get_or<std::uint64_t>(rt, "seed", c.seed));
    }
    c.beta = j.contains("beta") ? beta_from_json(j.at("beta"), c.spec)
                                : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.spec.dimension()));
    return c;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("simulation config: ") + e.what());
  }
}

Json sim_truth_json(const SimConfig& c, const EventStream& stream) {
  Json j;
  j["beta_true"] = vector_json(c.beta);
  j["names"] = c.spec.coefficient_names();
  Json cfg;
  cfg["actor_count"] = c.actor_count;
  if (c.horizon) cfg["horizon"] = *c.horizon;
  if (c.target_events) cfg["target_events"] = *c.target_events;
  cfg["start_time"] = c.start_time;
  cfg["baseline"] = c.baseline;
  if (!c.schedule.empty()) {
    Json s = Json::array();
    for (const auto& seg : c.schedule) s.push_back({{"start", seg.start}, {"rates", seg.rates}});
    cfg["baseline_schedule"] = s;
  }
  cfg["size_probs"] = c.size_probs;
  cfg["normalize_by_subsets"] = c.normalize_by_subsets;
  cfg["seed"] = c.seed;
  cfg["spec"] = spec_to_json(c.spec);
  j["config"] = cfg;
  j["n_events"] = stream.size();
  j["metadata"] = {
      {"size_baseline", "factorized: lambda(i; L) = lambda(i) * q(L)" +
                            std::string(c.normalize_by_subsets ? " / C(|risk|, L)" : "")},
      {"size_baseline_is_model_assumption", false},
      {"receiver_law", "conditional_poisson"},
  };
  return j;
}

}  // namespace relcox
