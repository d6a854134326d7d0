#include "scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <set>

#include "csv.hpp"
#include "sha256.hpp"
#include "vacsing/cmcflow.hpp"
#include "vacsing/gowdy.hpp"
#include "vacsing/tsym.hpp"
#include "vacsing/version.hpp"

namespace vacsing::tools {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

// strict key policy: unknown keys are rejected, not ignored
void check_keys(const json& obj, const std::string& where, const std::set<std::string>& required,
                const std::set<std::string>& optional) {
  require_object(obj, where);
  for (const auto& key : required)
    if (!obj.contains(key)) throw ConfigError(where + ": missing required key '" + key + "'");
  for (const auto& item : obj.items())
    if (!required.count(item.key()) && !optional.count(item.key()))
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
}

double get_num(const json& obj, const std::string& where, const std::string& key) {
  if (!obj.at(key).is_number())
    throw ConfigError(where + "." + key + ": expected a number");
  return obj.at(key).get<double>();
}

double get_num(const json& obj, const std::string& where, const std::string& key, double dflt) {
  if (!obj.contains(key)) return dflt;
  return get_num(obj, where, key);
}

int get_int(const json& obj, const std::string& where, const std::string& key) {
  if (!obj.at(key).is_number_integer())
    throw ConfigError(where + "." + key + ": expected an integer");
  return obj.at(key).get<int>();
}

int get_int(const json& obj, const std::string& where, const std::string& key, int dflt) {
  if (!obj.contains(key)) return dflt;
  return get_int(obj, where, key);
}

std::string get_str(const json& obj, const std::string& where, const std::string& key) {
  if (!obj.at(key).is_string())
    throw ConfigError(where + "." + key + ": expected a string");
  return obj.at(key).get<std::string>();
}

std::string get_str(const json& obj, const std::string& where, const std::string& key,
                    const std::string& dflt) {
  if (!obj.contains(key)) return dflt;
  return get_str(obj, where, key);
}

bool get_bool(const json& obj, const std::string& where, const std::string& key, bool dflt) {
  if (!obj.contains(key)) return dflt;
  if (!obj.at(key).is_boolean()) throw ConfigError(where + "." + key + ": expected a boolean");
  return obj.at(key).get<bool>();
}

DerivScheme parse_scheme(const std::string& name, const std::string& where) {
  if (name == "spectral") return DerivScheme::Spectral;
  if (name == "fd4") return DerivScheme::FD4;
  throw ConfigError(where + ": scheme must be 'spectral' or 'fd4'");
}

struct Verdict {
  std::string name;
  bool pass = true;
  double value = 0.0;
  double threshold = 0.0;
};

struct ScenarioOutput {
  std::vector<std::string> files;  // relative to the output directory
  std::vector<Verdict> verdicts;
  json echo;          // grid / parameter echo for the manifest
  json certificates;  // written as certificates.json
};

Field parse_profile_field(const json& spec, const std::string& where, const CircleGrid& grid) {
  check_keys(spec, where, {}, {"const", "harmonics"});
  Field f(grid.size(), get_num(spec, where, "const", 0.0));
  if (spec.contains("harmonics")) {
    if (!spec.at("harmonics").is_array()) throw ConfigError(where + ".harmonics: expected array");
    for (const auto& h : spec.at("harmonics")) {
      if (!h.is_array() || h.size() < 2 || h.size() > 3)
        throw ConfigError(where + ".harmonics: entries are [m, amp] or [m, amp, phase]");
      const int m = h[0].get<int>();
      const double amp = h[1].get<double>();
      const double phase = h.size() == 3 ? h[2].get<double>() : 0.0;
      for (int j = 0; j < grid.size(); ++j)
        f[j] += amp * std::cos(2.0 * M_PI * m * grid.point(j) / grid.length() + phase);
    }
  }
  return f;
}

json verdict_json(const std::vector<Verdict>& verdicts) {
  json arr = json::array();
  for (const auto& v : verdicts)
    arr.push_back({{"name", v.name}, {"pass", v.pass}, {"value", v.value},
                   {"threshold", v.threshold}});
  return arr;
}

json certificate_json(const Certificate& cert) {
  json j = {{"name", cert.name}, {"verdict", cert.verdict}, {"pass", cert.pass},
            {"metrics", cert.metrics}, {"note", cert.note}};
  if (cert.fitted_exponent) j["fitted_exponent"] = *cert.fitted_exponent;
  json samples = json::array();
  for (const auto& s : cert.samples) samples.push_back({s[0], s[1]});
  j["samples"] = samples;
  if (!cert.series.empty()) j["series"] = cert.series;
  return j;
}

// ---------------------------------------------------------------- gowdy

gowdy::GowdyState build_gowdy_initial(const json& params, const std::string& where,
                                      const CircleGrid& grid, int dim, double s0,
                                      std::uint64_t seed) {
  const json& init = params.at("initial_data");
  const std::string iw = where + ".initial_data";
  const std::string type = get_str(init, iw, "type");
  if (type == "random") {
    check_keys(init, iw, {"type"}, {"amplitude", "band"});
    return gowdy::random_band_limited_state(grid, dim, s0, seed,
                                            get_num(init, iw, "amplitude", 0.25),
                                            get_int(init, iw, "band", 3));
  }
  if (type == "vtd") {
    check_keys(init, iw, {"type", "exponents"}, {});
    std::vector<double> q = init.at("exponents").get<std::vector<double>>();
    if (static_cast<int>(q.size()) != dim)
      throw ConfigError(iw + ".exponents: need exactly N entries");
    return gowdy::vtd_state(grid, q, s0);
  }
  if (type == "bessel") {
    check_keys(init, iw, {"type", "k"}, {});
    if (dim != 2) throw ConfigError(iw + ": bessel data requires N = 2");
    return gowdy::bessel_state(grid, get_int(init, iw, "k"), s0);
  }
  if (type == "pq") {
    check_keys(init, iw, {"type", "P", "Q", "P_s", "Q_s"}, {});
    if (dim != 2) throw ConfigError(iw + ": pq data requires N = 2");
    auto field = [&](const char* key) {
      Field f = init.at(key).get<Field>();
      if (static_cast<int>(f.size()) != grid.size())
        throw ConfigError(iw + "." + key + ": need n_y samples");
      return f;
    };
    return gowdy::init_from_pq(field("P"), field("Q"), field("P_s"), field("Q_s"), s0, grid);
  }
  throw ConfigError(iw + ".type: unknown initial data type '" + type + "'");
}

ScenarioOutput run_gowdy_evolve(const json& params, const json& tolerances, const fs::path& out,
                                std::uint64_t seed, int threads) {
  const std::string where = "params";
  check_keys(params, where,
             {"N", "n_y", "s0", "s_end", "initial_data"},
             {"L_c", "scheme", "cfl", "max_ds", "outputs", "decay", "decay_stride", "snapshots"});
  const int dim = get_int(params, where, "N");
  const int n_y = get_int(params, where, "n_y");
  const double length = get_num(params, where, "L_c", 2.0 * M_PI);
  CircleGrid grid(n_y, length, parse_scheme(get_str(params, where, "scheme", "fd4"), where));
  const double s0 = get_num(params, where, "s0");
  const double s_end = get_num(params, where, "s_end");

  gowdy::GowdyState initial = build_gowdy_initial(params, where, grid, dim, s0, seed);

  gowdy::EvolveOptions opts;
  opts.cfl = get_num(params, where, "cfl", 0.5);
  opts.max_ds = get_num(params, where, "max_ds", 0.01);
  opts.output_count = get_int(params, where, "outputs", 41);
  const int decay_stride = get_int(params, where, "decay_stride", 1);
  const bool with_decay = get_bool(params, where, "decay", true);
  const bool snapshots = get_bool(params, where, "snapshots", false);

  gowdy::Trajectory traj = gowdy::evolve(initial, s_end, opts);

  Certificate decay;
  if (with_decay) {
    // decay certificate on every decay_stride-th output
    gowdy::Trajectory thin;
    for (size_t i = 0; i < traj.outputs.size(); i += decay_stride)
      thin.outputs.push_back(traj.outputs[i]);
    decay = gowdy::decay_certificate(thin, threads);
  }
  Certificate identities = gowdy::energy_identities(traj);
  Certificate twist = gowdy::twist_density_check(traj);

  ScenarioOutput result;
  // per-output series; W is reported at the decay-sampled rows and carried
  // forward in between so the column stays numeric
  CsvWriter csv((out / "series.csv").string(),
                {"s", "T", "E", "Ehat", "Etilde", "W", "lipschitz_B", "det_residual",
                 "trace_atilde_residual", "sa_defect"});
  std::vector<double> w_at(traj.outputs.size(), std::nan(""));
  for (size_t i = 0, k = 0; with_decay && i < traj.outputs.size(); ++i) {
    if (i % decay_stride == 0 && k < decay.samples.size()) w_at[i] = decay.samples[k++][1];
    else w_at[i] = (i > 0) ? w_at[i - 1] : 0.0;
  }
  for (size_t i = 0; i < traj.outputs.size(); ++i) {
    const gowdy::GowdyState& st = traj.outputs[i];
    gowdy::GowdyEnergies en = gowdy::energies(st);
    csv.row({st.s, st.time_T(), en.e, en.ehat, en.etilde, w_at[i], gowdy::lipschitz_b(st),
             st.det_residual(), st.trace_atilde_residual(), st.atilde_self_adjoint_defect()});
  }
  csv.close();
  result.files.push_back("series.csv");

  if (snapshots) {
    gowdy::save_snapshot(traj.outputs.front(), (out / "initial.gowdy").string());
    gowdy::save_snapshot(traj.outputs.back(), (out / "final.gowdy").string());
    result.files.push_back("initial.gowdy");
    result.files.push_back("final.gowdy");
  }

  const double tol_constraints = get_num(tolerances, "tolerances", "constraints", 1e-8);
  const double tol_twist = get_num(tolerances, "tolerances", "twist_density", 1e-10);
  double worst_constraint = 0.0;
  for (const auto& st : traj.outputs)
    worst_constraint =
        std::max({worst_constraint, st.det_residual(), st.trace_atilde_residual()});

  result.verdicts.push_back({"constraints", worst_constraint <= tol_constraints,
                             worst_constraint, tol_constraints});
  result.verdicts.push_back({"monotonicity", identities.pass, 0.0, 0.0});
  result.verdicts.push_back({"twist_density", twist.metrics.at("max_deviation") <= tol_twist,
                             twist.metrics.at("max_deviation"), tol_twist});
  if (with_decay)
    result.verdicts.push_back({"decay_not_growing", decay.verdict != "growing",
                               decay.fitted_exponent.value_or(0.0), 0.0});

  const json& init = params.at("initial_data");
  if (get_str(init, "initial_data", "type") == "bessel") {
    const int k = get_int(init, "initial_data", "k");
    const gowdy::GowdyState& fin = traj.outputs.back();
    gowdy::PqFields f = gowdy::extract_pq(fin);
    double worst = 0.0;
    for (int j = 0; j < grid.size(); ++j)
      worst = std::max(worst, std::abs(f.p[j] - gowdy::bessel_solution_p(k, fin.time_T(),
                                                                         grid.point(j))));
    const double tol = get_num(tolerances, "tolerances", "bessel_max_error", 1e-6);
    result.verdicts.push_back({"bessel_oracle", worst < tol, worst, tol});
  }

  result.echo = {{"N", dim}, {"n_y", n_y}, {"L_c", length},
                 {"scheme", get_str(params, where, "scheme", "fd4")},
                 {"s0", s0}, {"s_end", s_end}, {"cfl", opts.cfl}, {"max_ds", opts.max_ds},
                 {"steps", traj.steps}, {"max_det_correction", traj.max_det_correction}};
  result.certificates = {{"energy_identities", certificate_json(identities)},
                         {"twist_density", certificate_json(twist)}};
  if (with_decay) result.certificates["decay"] = certificate_json(decay);
  return result;
}

ScenarioOutput run_gowdy_analyze(const json& params, const json&, const fs::path& out,
                                 std::uint64_t, int) {
  check_keys(params, "params", {"snapshot"}, {});
  gowdy::GowdyState st = gowdy::load_snapshot(get_str(params, "params", "snapshot"));
  gowdy::GowdyEnergies en = gowdy::energies(st);
  SelfAdjointSection defect = gowdy::avtd_defect(st);
  SpdField gf{st.g};
  const double norm = hminus_norm_matrix(defect, gf, st.mu, st.grid).value;

  ScenarioOutput result;
  CsvWriter csv((out / "analyze.csv").string(),
                {"s", "T", "E", "Ehat", "Etilde", "defect_hminus", "W", "lipschitz_B"});
  csv.row({st.s, st.time_T(), en.e, en.ehat, en.etilde, norm,
           std::exp(2.0 * st.s) * norm * norm, gowdy::lipschitz_b(st)});
  csv.close();
  result.files.push_back("analyze.csv");
  result.verdicts.push_back({"state_valid", true, st.det_residual(), 1e-8});
  result.echo = {{"N", st.dim}, {"n_y", st.grid.size()}, {"s", st.s}};
  result.certificates = json::object();
  return result;
}

// ----------------------------------------------------------------- tsym

ScenarioOutput run_tsym_analyze(const json& params, const json& tolerances, const fs::path& out,
                                std::uint64_t, int) {
  const std::string where = "params";
  check_keys(params, where, {"source"},
             {"n_y", "L_c", "scheme", "K", "tau_lo", "tau_hi", "count", "profile",
              "allow_wide_k", "history"});
  const std::string source = get_str(params, where, "source");

  tsym::TsymHistory hist;
  json echo;
  if (source == "expansion") {
    const int n_y = get_int(params, where, "n_y");
    const double length = get_num(params, where, "L_c", 2.0 * M_PI);
    CircleGrid grid(n_y, length,
                    parse_scheme(get_str(params, where, "scheme", "spectral"), where));
    const json& prof = params.at("profile");
    check_keys(prof, where + ".profile", {"k", "U_ss", "A_star", "A_ss", "a_star", "H_star"}, {});
    tsym::ExpansionProfile profile;
    profile.k = parse_profile_field(prof.at("k"), where + ".profile.k", grid);
    profile.u_ss = parse_profile_field(prof.at("U_ss"), where + ".profile.U_ss", grid);
    profile.A_star = parse_profile_field(prof.at("A_star"), where + ".profile.A_star", grid);
    profile.A_ss = parse_profile_field(prof.at("A_ss"), where + ".profile.A_ss", grid);
    profile.a_star = parse_profile_field(prof.at("a_star"), where + ".profile.a_star", grid);
    profile.h_star = parse_profile_field(prof.at("H_star"), where + ".profile.H_star", grid);
    profile.allow_wide_k = get_bool(params, where, "allow_wide_k", false);
    hist = tsym::expansion_history(profile, get_num(params, where, "tau_lo"),
                                   get_num(params, where, "tau_hi"),
                                   get_int(params, where, "count"), grid,
                                   get_num(params, where, "K", 1.0));
    echo = {{"source", "expansion"}, {"n_y", n_y}, {"L_c", length},
            {"K", get_num(params, where, "K", 1.0)}};
  } else if (source == "history") {
    hist = tsym::load_history(get_str(params, where, "history"));
    echo = {{"source", "history"}, {"n_y", hist.entries.front().grid.size()},
            {"K", hist.entries.front().K}};
  } else {
    throw ConfigError(where + ".source: expected 'expansion' or 'history'");
  }

  tsym::AvtdReport rep = tsym::avtd_quantities(hist);
  Certificate mono = tsym::monotonicity_residual(hist);
  tsym::FieldResiduals resid = tsym::field_residuals(hist);

  ScenarioOutput result;
  CsvWriter csv((out / "series.csv").string(),
                {"tau", "R", "Ehat_K", "Etilde_K", "holonomy", "norm_q_avtd", "norm_q_full",
                 "norm_aux", "integrand_q_avtd", "integrand_q_full", "integrand_aux"});
  for (size_t i = 0; i < hist.entries.size(); ++i) {
    tsym::KEnergies en = tsym::energies_k(hist.entries[i]);
    const double tau = rep.taus[i];
    const double w = std::exp(2.0 * tau);
    csv.row({tau, hist.entries[i].R, en.ehat_k, en.etilde_k, en.holonomy, rep.norm_q_avtd[i],
             rep.norm_q_full[i], rep.norm_aux[i], w * rep.norm_q_avtd[i] * rep.norm_q_avtd[i],
             w * rep.norm_q_full[i] * rep.norm_q_full[i],
             w * rep.norm_aux[i] * rep.norm_aux[i]});
  }
  csv.close();
  result.files.push_back("series.csv");

  const double tol_triangle = get_num(tolerances, "tolerances", "triangle", 1e-10);
  result.verdicts.push_back({"triangle_chain", rep.max_triangle_violation <= tol_triangle,
                             rep.max_triangle_violation, tol_triangle});
  result.verdicts.push_back({"prop_164_implication", rep.implication_holds, 0.0, 0.0});

  result.echo = echo;
  result.certificates = {{"aux_integrability", certificate_json(rep.cert_aux)},
                         {"q_full_integrability", certificate_json(rep.cert_q_full)},
                         {"q_avtd_integrability", certificate_json(rep.cert_q_avtd)},
                         {"monotonicity", certificate_json(mono)},
                         {"holonomy_min", rep.holonomy_min},
                         {"holonomy_bounded_below", rep.holonomy_bounded_below},
                         {"uwave_residual_sup", resid.uwave_sup},
                         {"twist_residual_available", resid.twist_available},
                         {"twist_residual_sup", resid.twist_sup}};
  return result;
}

// ------------------------------------------------------------------ cmc

cmc::Family parse_family(const json& spec, const std::string& where) {
  check_keys(spec, where, {"kind"},
             {"n", "cone_dim", "torus_dim", "mass", "p", "vol0"});
  const std::string kind = get_str(spec, where, "kind");
  const double vol0 = get_num(spec, where, "vol0", 1.0);
  if (kind == "cone") return cmc::make_cone(get_int(spec, where, "n", 3), vol0);
  if (kind == "cone_torus")
    return cmc::make_cone_torus(get_int(spec, where, "cone_dim", 2),
                                get_int(spec, where, "torus_dim", 1), vol0);
  if (kind == "kantowski_sachs") return cmc::make_kantowski_sachs(get_num(spec, where, "mass", 1.0));
  if (kind == "kasner") {
    if (!spec.contains("p")) throw ConfigError(where + ": kasner family needs exponents 'p'");
    return cmc::make_kasner(spec.at("p").get<std::vector<double>>(), vol0);
  }
  throw ConfigError(where + ".kind: unknown family '" + kind + "'");
}

void write_cmc_series(const fs::path& out, const cmc::CmcTrajectory& traj,
                      std::vector<std::string>& files) {
  const size_t nb = traj.samples.front().blocks.size();
  std::vector<std::string> cols{"t"};
  for (size_t i = 0; i < nb; ++i) cols.push_back("a_" + std::to_string(i));
  for (size_t i = 0; i < nb; ++i) cols.push_back("kappa_" + std::to_string(i));
  cols.insert(cols.end(), {"L", "R", "V_n", "V_1", "constraint_residual"});
  CsvWriter csv((out / "series.csv").string(), cols);
  const int n = traj.samples.front().dim();
  for (const auto& f : traj.samples) {
    std::vector<double> row{f.t};
    for (const auto& b : f.blocks) row.push_back(b.a);
    for (const auto& b : f.blocks) row.push_back(b.kappa);
    const double negh = -f.hubble();
    row.insert(row.end(), {f.lapse(), f.scalar_curvature(), std::pow(negh, n) * f.volume(),
                           negh * f.volume(), f.constraint_residual()});
    csv.row(row);
  }
  csv.close();
  files.push_back("series.csv");
}

void lapse_bound_verdicts(const Certificate& mono, int dim, std::vector<Verdict>& verdicts) {
  // families saturating L = 1 wobble at the integrator accuracy, so the
  // bound comparisons carry a 1e-9 tolerance
  verdicts.push_back({"lapse_upper_bound", mono.metrics.at("lapse_max") <= 1.0 + 1e-9,
                      mono.metrics.at("lapse_max"), 1.0});
  if (mono.metrics.at("r_nonpositive") == 1.0)
    verdicts.push_back({"lapse_lower_bound",
                        mono.metrics.at("lapse_min") >= 1.0 / dim - 1e-9,
                        mono.metrics.at("lapse_min"), 1.0 / dim});
}

ScenarioOutput run_cmc_evolve(const json& params, const json&, const fs::path& out,
                              std::uint64_t, int) {
  const std::string where = "params";
  check_keys(params, where, {"t_end", "steps"}, {"family", "t_start", "blocks", "t"});
  cmc::MultiWarpedFlow start;
  json echo;
  if (params.contains("family")) {
    cmc::Family fam = parse_family(params.at("family"), where + ".family");
    start = fam.at(get_num(params, where, "t_start"));
    echo = {{"family", params.at("family")}, {"t_start", start.t}};
  } else if (params.contains("blocks")) {
    start.t = get_num(params, where, "t");
    for (const auto& b : params.at("blocks")) {
      check_keys(b, where + ".blocks[]", {"n", "eps", "a", "kappa"}, {"vol0"});
      start.blocks.push_back({get_int(b, where, "n"), get_int(b, where, "eps"),
                              get_num(b, where, "a"), get_num(b, where, "kappa"),
                              get_num(b, where, "vol0", 1.0)});
    }
    echo = {{"blocks", params.at("blocks")}, {"t_start", start.t}};
  } else {
    throw ConfigError(where + ": need either 'family' + 't_start' or 'blocks' + 't'");
  }

  cmc::CmcTrajectory traj =
      cmc::evolve_cmc(start, get_num(params, where, "t_end"), get_int(params, where, "steps"));
  Certificate mono = cmc::monotone_quantities(traj);

  ScenarioOutput result;
  write_cmc_series(out, traj, result.files);
  result.verdicts.push_back({"constraint_drift", traj.max_constraint_residual <= 1e-6,
                             traj.max_constraint_residual, 1e-6});
  result.verdicts.push_back({"hubble_gauge", traj.max_hubble_residual <= 1e-10,
                             traj.max_hubble_residual, 1e-10});
  result.verdicts.push_back({"monotone_quantities", mono.pass, 0.0, 0.0});
  lapse_bound_verdicts(mono, start.dim(), result.verdicts);
  echo["steps"] = get_int(params, where, "steps");
  result.echo = echo;
  result.certificates = {{"monotone_quantities", certificate_json(mono)}};
  return result;
}

ScenarioOutput run_cmc_family(const json& params, const json&, const fs::path& out,
                              std::uint64_t, int) {
  const std::string where = "params";
  check_keys(params, where, {"family", "t_lo", "t_hi"},
             {"count", "lambda", "scales", "curvature_samples", "dvol0_t0"});
  cmc::Family fam = parse_family(params.at("family"), where + ".family");
  const double t_lo = get_num(params, where, "t_lo");
  const double t_hi = get_num(params, where, "t_hi");
  const int count = get_int(params, where, "count", 257);

  cmc::CmcTrajectory traj = cmc::sample_family(fam, t_lo, t_hi, count);
  Certificate mono = cmc::monotone_quantities(traj);
  cmc::Dvol0Result dvol0 = cmc::dvol0_limit(fam, get_num(params, where, "dvol0_t0", t_hi));

  std::vector<double> curvature_ts;
  if (params.contains("curvature_samples"))
    curvature_ts = params.at("curvature_samples").get<std::vector<double>>();
  else
    for (int i = 0; i < 5; ++i)
      curvature_ts.push_back(t_lo * std::pow(t_hi / t_lo, i / 4.0));
  cmc::CurvatureReport curv = cmc::curvature_report(fam, curvature_ts);

  const double lambda = get_num(params, where, "lambda", 2.0);
  std::vector<double> scales;
  if (params.contains("scales"))
    scales = params.at("scales").get<std::vector<double>>();
  else
    scales = {t_hi, t_hi * 1e-1, t_hi * 1e-2, t_hi * 1e-3, t_hi * 1e-4};
  json limit_json;
  bool limit_pass = true;
  try {
    Certificate limit = cmc::kasner_limit_check(fam, lambda, scales);
    limit_pass = limit.verdict != "not-converging";
    limit_json = certificate_json(limit);
  } catch (const std::exception& e) {
    limit_json = {{"skipped", e.what()}};
  }

  ScenarioOutput result;
  write_cmc_series(out, traj, result.files);
  result.verdicts.push_back({"monotone_quantities", mono.pass, 0.0, 0.0});
  result.verdicts.push_back({"kasner_limit", limit_pass, 0.0, 0.0});
  lapse_bound_verdicts(mono, fam.dim(), result.verdicts);

  json curv_samples = json::array();
  for (const auto& s : curv.samples) curv_samples.push_back({s[0], s[1]});
  result.echo = {{"family", params.at("family")}, {"t_lo", t_lo}, {"t_hi", t_hi},
                 {"count", count}, {"lambda", lambda}};
  result.certificates = {{"monotone_quantities", certificate_json(mono)},
                         {"dvol0", {{"value", dvol0.value}, {"nonzero", dvol0.nonzero},
                                    {"sequence", dvol0.sequence}}},
                         {"curvature", {{"samples", curv_samples},
                                        {"type_i_constant", curv.type_i_constant}}},
                         {"kasner_limit", limit_json}};
  return result;
}

ScenarioOutput run_cmc_causal(const json& params, const json&, const fs::path& out,
                              std::uint64_t, int) {
  const std::string where = "params";
  check_keys(params, where, {"family", "block", "t_lo", "t_hi"},
             {"lambda", "separation", "t", "bound_ref"});
  cmc::Family fam = parse_family(params.at("family"), where + ".family");
  const int block = get_int(params, where, "block");
  const double t_lo = get_num(params, where, "t_lo");
  const double t_hi = get_num(params, where, "t_hi");

  cmc::CausalRadius radius = cmc::causal_radius(fam, block, t_lo, t_hi);
  const double bound_ref = get_num(params, where, "bound_ref", t_hi);
  const double bound = cmc::causal_past_bound(fam, std::max(t_lo, 1e-12 * t_hi), t_hi, bound_ref);

  json causal = {{"block", block}, {"t_lo", t_lo}, {"t_hi", t_hi},
                 {"radius", radius.value}, {"divergent", radius.divergent},
                 {"divergence_exponent", radius.divergence_exponent},
                 {"past_bound", bound}};
  if (params.contains("separation")) {
    const double lambda = get_num(params, where, "lambda", 2.0);
    const double at_t = get_num(params, where, "t", t_hi);
    causal["disjoint"] =
        cmc::disjointness(fam, block, get_num(params, where, "separation"), lambda, at_t);
  }

  ScenarioOutput result;
  CsvWriter csv((out / "causal.csv").string(),
                {"block", "t_lo", "t_hi", "radius", "divergent", "divergence_exponent",
                 "past_bound"});
  csv.row({static_cast<double>(block), t_lo, t_hi, radius.value,
           radius.divergent ? 1.0 : 0.0, radius.divergence_exponent, bound});
  csv.close();
  result.files.push_back("causal.csv");
  result.verdicts.push_back({"computed", true, radius.value, 0.0});
  result.echo = {{"family", params.at("family")}, {"block", block}};
  result.certificates = {{"causal", causal}};
  return result;
}

}  // namespace

int run_scenario(const std::string& config_path, const std::string& out_override, int threads) {
  json config;
  {
    std::ifstream in(config_path);
    if (!in) throw ConfigError(config_path + ": cannot open config");
    try {
      in >> config;
    } catch (const std::exception& e) {
      throw ConfigError(config_path + ": JSON parse error: " + e.what());
    }
  }
  check_keys(config, config_path, {"schema", "kind", "params"},
             {"seed", "out", "tolerances"});
  if (get_str(config, config_path, "schema") != "vacsing-scenario-v1")
    throw ConfigError(config_path + ".schema: expected 'vacsing-scenario-v1'");
  const std::string kind = get_str(config, config_path, "kind");
  const std::uint64_t seed =
      static_cast<std::uint64_t>(get_int(config, config_path, "seed", 0));
  const json tolerances = config.value("tolerances", json::object());

  std::string out_dir = out_override;
  if (out_dir.empty()) out_dir = get_str(config, config_path, "out", "");
  if (out_dir.empty())
    throw ConfigError(config_path + ": no output directory (config 'out' or --out)");

  using Runner = ScenarioOutput (*)(const json&, const json&, const fs::path&, std::uint64_t, int);
  Runner runner = nullptr;
  if (kind == "gowdy-evolve") runner = run_gowdy_evolve;
  else if (kind == "gowdy-analyze") runner = run_gowdy_analyze;
  else if (kind == "tsym-analyze") runner = run_tsym_analyze;
  else if (kind == "cmc-evolve") runner = run_cmc_evolve;
  else if (kind == "cmc-family") runner = run_cmc_family;
  else if (kind == "cmc-causal") runner = run_cmc_causal;
  else throw ConfigError(config_path + ".kind: unknown scenario kind '" + kind + "'");

  const fs::path out(out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  const bool created = fs::create_directories(out);

  ScenarioOutput result;
  try {
    result = runner(config.at("params"), tolerances, out, seed, threads);
  } catch (...) {
    // a config rejected before any compute leaves no output behind
    if (created && fs::exists(out) && fs::is_empty(out)) fs::remove(out);
    throw;
  }

  {
    std::ofstream certs(out / "certificates.json");
    certs << result.certificates.dump(2) << "\n";
  }
  result.files.push_back("certificates.json");

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  bool all_pass = true;
  for (const auto& v : result.verdicts) all_pass = all_pass && v.pass;

  json files = json::array();
  for (const auto& rel : result.files)
    files.push_back({{"path", rel}, {"sha256", sha256_file((out / rel).string())},
                     {"bytes", fs::file_size(out / rel)}});

  json manifest = {{"schema", "vacsing-manifest-v1"},
                   {"version", vacsing::kVersion},
                   {"kind", kind},
                   {"scenario_hash", sha256_hex(config.dump())},
                   {"seed", seed},
                   {"grid_echo", result.echo},
                   {"tolerances", tolerances},
                   {"files", files},
                   {"wall_clock_s", wall},
                   {"verdicts", verdict_json(result.verdicts)},
                   {"summary_pass", all_pass}};

  // manifest last, atomically, so partial runs are detectable
  const fs::path tmp = out / "manifest.json.tmp";
  {
    std::ofstream m(tmp);
    m << manifest.dump(2) << "\n";
  }
  fs::rename(tmp, out / "manifest.json");

  std::cout << (all_pass ? "PASS " : "FAIL ") << kind << " -> " << out_dir << " ("
            << result.verdicts.size() << " verdicts)\n";
  return all_pass ? 0 : 1;
}

int report_manifests(const std::vector<std::string>& paths, const std::string& csv_path) {
  if (paths.empty()) throw ConfigError("report: no manifests given");

  struct Row {
    std::string path, kind, hash, status;
    int verdicts_total = 0, verdicts_passed = 0;
    double wall = 0.0;
    std::string exponents;
  };
  std::vector<Row> rows;
  bool any_digest_mismatch = false;

  for (const auto& path : paths) {
    Row row;
    row.path = path;
    std::ifstream in(path);
    if (!in) throw ConfigError("report: cannot open manifest " + path);
    json manifest;
    try {
      in >> manifest;
    } catch (const std::exception& e) {
      throw ConfigError("report: " + path + ": parse error: " + e.what());
    }
    row.kind = manifest.value("kind", "?");
    row.hash = manifest.value("scenario_hash", "").substr(0, 12);
    row.wall = manifest.value("wall_clock_s", 0.0);

    bool digests_ok = true;
    const fs::path base = fs::path(path).parent_path();
    for (const auto& f : manifest.value("files", json::array())) {
      const std::string rel = f.at("path").get<std::string>();
      const std::string expect = f.at("sha256").get<std::string>();
      std::string actual;
      try {
        actual = sha256_file((base / rel).string());
      } catch (...) {
        digests_ok = false;
        continue;
      }
      if (actual != expect) digests_ok = false;
    }
    if (!digests_ok) any_digest_mismatch = true;

    for (const auto& v : manifest.value("verdicts", json::array())) {
      row.verdicts_total++;
      if (v.value("pass", false)) row.verdicts_passed++;
    }
    const bool pass = manifest.value("summary_pass", false);
    row.status = !digests_ok ? "DIGEST-MISMATCH" : (pass ? "pass" : "fail");

    // fitted exponents from the certificate bundle, when present
    std::ifstream certs((base / "certificates.json").string());
    if (certs) {
      json bundle;
      try {
        certs >> bundle;
        for (const auto& item : bundle.items())
          if (item.value().is_object() && item.value().contains("fitted_exponent")) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%s=%.6g;", item.key().c_str(),
                          item.value().at("fitted_exponent").get<double>());
            row.exponents += buf;
          }
      } catch (...) {
      }
    }
    rows.push_back(std::move(row));
  }

  std::printf("%-40s %-14s %-13s %-9s %8s %10s  %s\n", "manifest", "kind", "hash", "status",
              "verdicts", "wall[s]", "fitted exponents");
  for (const auto& r : rows)
    std::printf("%-40s %-14s %-13s %-9s %4d/%-4d %10.3f  %s\n", r.path.c_str(), r.kind.c_str(),
                r.hash.c_str(), r.status.c_str(), r.verdicts_passed, r.verdicts_total, r.wall,
                r.exponents.c_str());

  if (!csv_path.empty()) {
    std::ofstream csv(csv_path);
    csv << "manifest,kind,scenario_hash,status,verdicts_passed,verdicts_total,wall_clock_s,"
           "fitted_exponents\n";
    for (const auto& r : rows) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", r.wall);
      csv << r.path << ',' << r.kind << ',' << r.hash << ',' << r.status << ','
          << r.verdicts_passed << ',' << r.verdicts_total << ',' << buf << ','
          << r.exponents << '\n';
    }
  }
  return any_digest_mismatch ? 1 : 0;
}

}  // namespace vacsing::tools
