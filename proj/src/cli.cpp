#include "vsg/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vsg/error.hpp"
#include "vsg/solver.hpp"

#ifndef VSG_DEFAULT_CASE_DIR
#define VSG_DEFAULT_CASE_DIR ""
#endif

namespace vsg::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunConfig {
  std::string command;
  std::string case_path;
  std::string format = "auto";
  std::string index_norm = "max-stress";
  std::string config_path;
  double gamma_a = 0.1;
  double gamma_d = 0.8;
  int levels_a = 3;
  int levels_d = 3;
  std::size_t subset = 0;  // 0 = every load
  std::vector<int> loads;
  double qd_max = 2.0;
  double qd_probe = 1.0;
  std::optional<double> vmin;
  std::optional<double> vmax;
  std::string grid_a = "0.05:1:0.05";
  std::string grid_d = "0.05:1:0.05";
  std::string out;
  std::string emit = "both";
  unsigned jobs = 0;
  double tol = 1e-9;
  std::string limits_cache;
  bool no_cache = false;
  bool no_io = false;
  bool inject_fault = false;
  std::string to;
};

json config_echo(const RunConfig& c) {
  json j = {{"command", c.command},   {"case", c.case_path},     {"format", c.format},
            {"index_norm", c.index_norm}, {"gamma_a", c.gamma_a}, {"gamma_d", c.gamma_d},
            {"levels_a", c.levels_a}, {"levels_d", c.levels_d},  {"subset", c.subset},
            {"loads", c.loads},       {"qd_max", c.qd_max},      {"qd_probe", c.qd_probe},
            {"grid_a", c.grid_a},     {"grid_d", c.grid_d},      {"jobs", c.jobs},
            {"tol", c.tol}};
  j["vmin"] = c.vmin ? json(*c.vmin) : json(nullptr);
  j["vmax"] = c.vmax ? json(*c.vmax) : json(nullptr);
  return j;
}

void validate_config(const RunConfig& c) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string(name) + " must be positive");
  };
  positive(c.gamma_a, "--gamma-a");
  positive(c.gamma_d, "--gamma-d");
  positive(c.qd_probe, "--qd-probe");
  positive(c.tol, "--tol");
  if (c.levels_a < 2 || c.levels_d < 2) throw ValidationError("--levels-a/--levels-d must be at least 2");
  if (!(c.qd_max >= 0.0)) throw ValidationError("--qd-max must be non-negative");
  const double lo = c.vmin.value_or(0.9);
  const double hi = c.vmax.value_or(1.1);
  if (!(lo > 0.0) || !(lo < hi)) throw ValidationError("voltage band needs 0 < vmin < vmax");
  if (c.emit != "csv" && c.emit != "json" && c.emit != "both") throw ValidationError("--emit must be csv, json or both");
  if (!parse_case_format(c.format)) throw ValidationError("unknown --format '" + c.format + "'");
  if (!parse_index_norm(c.index_norm)) throw ValidationError("unknown --index-norm '" + c.index_norm + "'");
  if (c.subset > 0 && !c.loads.empty()) throw ValidationError("--subset and --loads are mutually exclusive");
}

fs::path resolve_case_path(const std::string& path) {
  if (path.empty()) throw ValidationError("--case is required");
  const fs::path p(path);
  if (fs::exists(p) || p.is_absolute()) return p;
  const char* dirs[] = {std::getenv(kCaseDirEnv), VSG_DEFAULT_CASE_DIR};
  for (const char* dir : dirs) {
    if (dir && *dir && fs::exists(fs::path(dir) / p)) return fs::path(dir) / p;
  }
  throw ParseError("case file not found: '" + path + "'");
}

struct Loaded {
  PowerSystemCase power_case;
  std::shared_ptr<const StabilityModel> model;
  std::string hash;
  fs::path path;
};

Loaded load(const RunConfig& c) {
  Loaded l;
  l.path = resolve_case_path(c.case_path);
  l.power_case = load_case(l.path, *parse_case_format(c.format));
  l.model = std::make_shared<const StabilityModel>(build_stability_model(l.power_case, *parse_index_norm(c.index_norm)));
  l.hash = case_hash(l.power_case);
  return l;
}

BandCheckOptions band_options(const RunConfig& c) {
  BandCheckOptions opts;
  if (c.vmin || c.vmax) opts.band = VoltageBand{c.vmin.value_or(0.9), c.vmax.value_or(1.1)};
  return opts;
}

std::string band_key(const RunConfig& c) {
  if (!(c.vmin || c.vmax)) return "per-bus";
  std::ostringstream s;
  s << std::setprecision(10) << c.vmin.value_or(0.9) << ":" << c.vmax.value_or(1.1);
  return s.str();
}

json provenance(const RunConfig& c, const Loaded& l) {
  return {{"tool", "vsgame"},
          {"version", kVersion},
          {"case_name", l.power_case.name()},
          {"case_hash", l.hash},
          {"config", config_echo(c)},
          {"tolerances",
           {{"value_tol", c.tol},
            {"power_flow_mismatch", PowerFlowOptions{}.tolerance},
            {"power_flow_max_iterations", PowerFlowOptions{}.max_iterations},
            {"bisection_tol", CovertOptions{}.tolerance},
            {"bisection_ceiling", CovertOptions{}.ceiling},
            {"budget_slack", 1e-12}}}};
}

fs::path cache_path(const RunConfig& c, const Loaded& l) {
  if (!c.limits_cache.empty()) return c.limits_cache;
  return fs::path(l.path.string() + ".limits.json");
}

// Covert limits, reusing the sidecar cache when its key matches.
Vector covert_limits_cached(const RunConfig& c, const Loaded& l, std::ostream& err) {
  const std::string key = l.hash + "|" + band_key(c) + "|" + std::to_string(CovertOptions{}.tolerance);
  const fs::path path = cache_path(c, l);
  json cache = json::object();
  if (!c.no_cache && fs::exists(path)) {
    try {
      std::ifstream in(path);
      cache = json::parse(in);
      if (cache.contains(key)) {
        const auto values = cache.at(key).at("limits").get<std::vector<double>>();
        if (values.size() == l.model->num_loads()) return Eigen::Map<const Vector>(values.data(), values.size());
      }
    } catch (const std::exception& e) {
      err << "warning: ignoring unreadable limits cache " << path << ": " << e.what() << "\n";
      cache = json::object();
    }
  }
  CovertOptions opts;
  opts.check = band_options(c);
  const Vector limits = covert_limits(l.power_case, opts, c.jobs);
  if (!c.no_cache) {
    cache[key] = {{"case_hash", l.hash},
                  {"band", band_key(c)},
                  {"load_ids", l.model->load_ids},
                  {"limits", std::vector<double>(limits.data(), limits.data() + limits.size())}};
    std::ofstream o(path);
    if (o) o << cache.dump(2) << "\n";
  }
  return limits;
}

std::vector<std::size_t> resolve_subset(const RunConfig& c, const Loaded& l, const Vector& qa) {
  const StabilityModel& m = *l.model;
  if (!c.loads.empty()) {
    std::vector<std::size_t> out;
    for (int id : c.loads) {
      auto it = std::find(m.load_ids.begin(), m.load_ids.end(), id);
      if (it == m.load_ids.end()) throw ValidationError("--loads: bus " + std::to_string(id) + " is not a load bus");
      out.push_back(static_cast<std::size_t>(it - m.load_ids.begin()));
    }
    std::sort(out.begin(), out.end());
    if (std::adjacent_find(out.begin(), out.end()) != out.end()) throw ValidationError("--loads repeats a bus");
    return out;
  }
  if (c.subset > 0) return select_subset(importance_ranking(m, qa, c.qd_probe), c.subset);
  std::vector<std::size_t> all(m.num_loads());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return all;
}

GameSpec make_spec(const RunConfig& c, const Loaded& l, const Vector& qa) {
  GameSpec spec;
  spec.model = l.model;
  spec.load_subset = resolve_subset(c, l, qa);
  spec.gamma_a = c.gamma_a;
  spec.gamma_d = c.gamma_d;
  spec.levels_a = c.levels_a;
  spec.levels_d = c.levels_d;
  spec.qa_max = qa;
  spec.qd_max = Vector::Constant(qa.size(), c.qd_max);
  validate_game_spec(spec);
  return spec;
}

SolverOptions solver_options(const RunConfig& c) {
  SolverOptions o;
  o.value_tol = c.tol;
  o.jobs = c.jobs;
  return o;
}

std::vector<int> subset_ids(const GameSpec& spec) {
  std::vector<int> ids;
  for (std::size_t idx : spec.load_subset) ids.push_back(spec.model->load_ids[idx]);
  return ids;
}

std::string join_ids(const std::vector<int>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? "," : "") + std::to_string(ids[i]);
  return s;
}

std::vector<double> parse_grid(const std::string& text, const char* flag) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(std::string(flag) + ": expected lo:hi:step, got '" + text + "'");
    }
  }
  if (parts.size() != 3) throw ValidationError(std::string(flag) + ": expected lo:hi:step, got '" + text + "'");
  return make_grid(parts[0], parts[1], parts[2]);
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream o(path);
  if (!o) throw ValidationError("cannot write '" + path.string() + "'");
  o << text;
}

bool wants(const RunConfig& c, const char* kind) { return c.emit == "both" || c.emit == kind; }

// Output path with its extension replaced (or appended) by ext.
fs::path with_ext(const std::string& out, const char* ext) {
  fs::path p(out);
  if (p.extension() == ".csv" || p.extension() == ".json") p.replace_extension();
  return fs::path(p.string() + ext);
}

json equilibrium_json(const Equilibrium& eq) {
  return {{"u_attacker", eq.attacker_utility},
          {"u_defender", -eq.attacker_utility},
          {"delta_max", eq.post_attack_delta_max},
          {"attacker_cost", eq.attacker_cost},
          {"defender_cost", eq.defender_cost},
          {"a_levels", eq.attacker_action.to_string()},
          {"d_levels", eq.defender_action.to_string()},
          {"defender_candidates", eq.defender_candidates}};
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// ---------------------------------------------------------------------------

int cmd_delta(const RunConfig& c, std::ostream& out) {
  const Loaded l = load(c);
  const StabilityModel& m = *l.model;
  json doc = provenance(c, l);
  doc["delta0"] = m.delta0;
  doc["stressed_load"] = m.load_ids[m.stressed_load];
  doc["load_ids"] = m.load_ids;
  doc["v_open"] = std::vector<double>(m.v_open.data(), m.v_open.data() + m.v_open.size());
  doc["q_crit_rcond"] = m.q_crit_rcond;
  doc["q_crit_inv_nonpositive"] = m.sign_structure_ok();

  out << "case " << l.power_case.name() << " (" << m.num_loads() << " loads, hash " << l.hash << ")\n";
  out << "delta0 = " << fixed(doc["delta0"].get<double>()) << " (max stress at load " << doc["stressed_load"] << ")\n";
  out << "open-circuit load voltages:";
  for (std::size_t k = 0; k < m.num_loads(); ++k) out << " " << m.load_ids[k] << "=" << fixed(m.v_open(k));
  out << "\nQ_crit reciprocal condition = " << std::scientific << std::setprecision(3) << m.q_crit_rcond
      << std::defaultfloat << ", Q_crit^-1 entries all <= 0: " << (m.sign_structure_ok() ? "yes" : "no") << "\n";
  if (!c.out.empty()) write_file(with_ext(c.out, ".json"), doc.dump(2) + "\n");
  return kOk;
}

int cmd_limits(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Loaded l = load(c);
  const StabilityModel& m = *l.model;
  const Vector limits = covert_limits_cached(c, l, err);

  json doc = provenance(c, l);
  doc["band"] = band_key(c);
  json rows = json::array();
  bool all_ok = true;
  out << "load  covert_limit_pu  compensated_alone(" << fixed(c.qd_max, 2) << " pu)\n";
  const BandCheckOptions opts = band_options(c);
  for (std::size_t k = 0; k < m.num_loads(); ++k) {
    Vector comp = Vector::Zero(static_cast<Eigen::Index>(m.num_loads()));
    comp(static_cast<Eigen::Index>(k)) = c.qd_max;
    const VoltageCheck check = verify_voltage_range(l.power_case, comp, opts);
    all_ok = all_ok && check.in_band;
    json row = {{"load", m.load_ids[k]}, {"covert_limit", limits(static_cast<Eigen::Index>(k))},
                {"qd_in_band", check.in_band}};
    if (!check.in_band) {
      row["worst_bus"] = check.worst_bus_id;
      row["worst_voltage"] = check.converged ? json(check.worst_voltage) : json(nullptr);
    }
    out << std::setw(4) << m.load_ids[k] << "  " << std::setw(15) << fixed(limits(static_cast<Eigen::Index>(k)))
        << "  " << (check.in_band ? "in band" : "OUT OF BAND");
    if (!check.in_band) {
      out << (check.converged ? " (bus " + std::to_string(check.worst_bus_id) + " at " + fixed(check.worst_voltage) + " pu)"
                              : " (power flow does not converge)");
    }
    out << "\n";
    rows.push_back(std::move(row));
  }
  const VoltageCheck all_at_once =
      verify_voltage_range(l.power_case, Vector::Constant(static_cast<Eigen::Index>(m.num_loads()), c.qd_max), opts);
  doc["loads"] = std::move(rows);
  doc["qd_max"] = c.qd_max;
  doc["qd_verified"] = all_ok;
  doc["qd_all_loads_in_band"] = all_at_once.in_band;
  out << "compensation " << fixed(c.qd_max, 2) << " pu at every load simultaneously: "
      << (all_at_once.in_band ? "in band" : "OUT OF BAND") << "\n";
  if (!c.out.empty()) write_file(with_ext(c.out, ".json"), doc.dump(2) + "\n");
  if (!all_ok) {
    err << "verification failed: compensation of " << c.qd_max << " pu at a single load leaves the voltage band\n";
    return kVerificationFailed;
  }
  return kOk;
}

int cmd_rank(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Loaded l = load(c);
  const StabilityModel& m = *l.model;
  const Vector limits = covert_limits_cached(c, l, err);
  const ImportanceRanking r = importance_ranking(m, limits, c.qd_probe);

  std::string csv = "rank,attacker_load,attacker_score,defender_load,defender_score\n";
  json rows = json::array();
  out << "rank  attacker(load: delta increase)  defender(load: delta decrease)\n";
  for (std::size_t i = 0; i < m.num_loads(); ++i) {
    const std::size_t a = r.attacker_order[i];
    const std::size_t d = r.defender_order[i];
    rows.push_back({{"rank", i + 1},
                    {"attacker_load", m.load_ids[a]},
                    {"attacker_score", r.attacker_scores[a]},
                    {"defender_load", m.load_ids[d]},
                    {"defender_score", r.defender_scores[d]}});
    csv += std::to_string(i + 1) + "," + std::to_string(m.load_ids[a]) + "," + fixed(r.attacker_scores[a], 12) + "," +
           std::to_string(m.load_ids[d]) + "," + fixed(r.defender_scores[d], 12) + "\n";
    out << std::setw(4) << i + 1 << "  " << std::setw(6) << m.load_ids[a] << ": " << fixed(r.attacker_scores[a])
        << std::string(14, ' ') << std::setw(6) << m.load_ids[d] << ": " << fixed(r.defender_scores[d]) << "\n";
  }
  if (c.subset > 0) {
    std::vector<int> ids;
    for (std::size_t idx : select_subset(r, c.subset)) ids.push_back(m.load_ids[idx]);
    out << "subset (top " << c.subset << " of each player): {" << join_ids(ids) << "}\n";
  }
  if (!c.out.empty()) {
    json doc = provenance(c, l);
    doc["ranking"] = std::move(rows);
    if (wants(c, "csv")) write_file(with_ext(c.out, ".csv"), csv);
    if (wants(c, "json")) write_file(with_ext(c.out, ".json"), doc.dump(2) + "\n");
  }
  return kOk;
}

int cmd_solve(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Loaded l = load(c);
  const Vector limits = covert_limits_cached(c, l, err);
  const GameSpec spec = make_spec(c, l, limits);
  const Equilibrium eq = solve_cbse(spec, solver_options(c));

  json doc = provenance(c, l);
  doc["subset"] = subset_ids(spec);
  doc["equilibrium"] = equilibrium_json(eq);
  out << "loads {" << join_ids(subset_ids(spec)) << "}, gamma_a=" << c.gamma_a << ", gamma_d=" << c.gamma_d
      << ", L_a=" << c.levels_a << ", L_d=" << c.levels_d << "\n";
  out << "U^a = " << fixed(eq.attacker_utility) << ", U^d = " << fixed(-eq.attacker_utility)
      << ", delta after full attack = " << fixed(eq.post_attack_delta_max) << "\n";
  out << "attacker levels " << eq.attacker_action.to_string() << " (cost " << fixed(eq.attacker_cost) << ")\n";
  out << "defender levels " << eq.defender_action.to_string() << " (cost " << fixed(eq.defender_cost) << ", "
      << eq.defender_candidates << " payoff-optimal defenses)\n";
  out << "(levels are numerators over L-1, in load order)\n";
  if (!c.out.empty()) write_file(with_ext(c.out, ".json"), doc.dump(2) + "\n");
  return kOk;
}

int cmd_sweep(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Loaded l = load(c);
  const Vector limits = covert_limits_cached(c, l, err);
  const GameSpec spec = make_spec(c, l, limits);
  const auto grid_a = parse_grid(c.grid_a, "--grid-a");
  const auto grid_d = parse_grid(c.grid_d, "--grid-d");
  const SweepResult sweep = cost_sweep(spec, grid_a, grid_d, solver_options(c), !c.no_io);
  const MonotonicityAudit audit = audit_monotonicity(sweep);

  std::size_t failed = 0;
  for (const SweepCell& cell : sweep.cells) failed += cell.status != "ok";
  out << "sweep " << sweep.rows << "x" << sweep.cols << " over loads {" << join_ids(sweep.subset_ids) << "}, "
      << failed << " failed cells\n";
  out << "monotonicity audit: " << audit.checked << " comparisons, " << audit.violations.size() << " violations\n";
  for (const auto& v : audit.violations) out << "  " << v << "\n";

  if (!c.out.empty()) {
    if (wants(c, "csv")) write_file(with_ext(c.out, ".csv"), sweep_to_csv(sweep));
    if (wants(c, "json")) {
      json doc = json::parse(sweep_to_json(sweep));
      doc["provenance"] = provenance(c, l);
      doc["audit"] = {{"checked", audit.checked}, {"violations", audit.violations}};
      write_file(with_ext(c.out, ".json"), doc.dump(2) + "\n");
    }
  } else {
    out << sweep_to_csv(sweep);
  }
  if (!audit.ok()) {
    err << "verification failed: sweep violates cost monotonicity\n";
    return kVerificationFailed;
  }
  return failed == 0 ? kOk : kResourceCap;
}

int cmd_oracle(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Loaded l = load(c);
  const Vector limits = covert_limits_cached(c, l, err);
  const GameSpec spec = make_spec(c, l, limits);
  const SolverOptions opts = solver_options(c);
  const std::vector<StackelbergPoint> ses = enumerate_all_ses(spec, opts);
  Equilibrium eq = solve_cbse(spec, opts);
  if (c.inject_fault) {
    // Shift the reported payoff and, when one exists, swap in an attacker
    // action that is not a best response.
    eq.attacker_utility += 0.5;
    for (const ActionVector& a : enumerate_feasible_actions(spec, Player::kAttacker, opts.action_cap)) {
      const bool is_se = std::any_of(ses.begin(), ses.end(), [&](const StackelbergPoint& p) {
        return p.defender_action == eq.defender_action && p.attacker_action == a;
      });
      if (!is_se) {
        eq.attacker_action = a;
        eq.attacker_utility = expected_attacker_utility(a, per_outcome_utility(spec, eq.defender_action));
        break;
      }
    }
  }

  std::vector<std::string> failures;
  double lo = ses.front().attacker_utility;
  double hi = lo;
  for (const auto& p : ses) {
    lo = std::min(lo, p.attacker_utility);
    hi = std::max(hi, p.attacker_utility);
  }
  if (hi - lo > c.tol) failures.push_back("SE payoffs differ: " + fixed(lo, 12) + " vs " + fixed(hi, 12));
  if (std::abs(eq.attacker_utility - lo) > c.tol) {
    failures.push_back("CBSE payoff " + fixed(eq.attacker_utility, 12) + " differs from SE payoff " + fixed(lo, 12));
  }
  const auto member = std::find_if(ses.begin(), ses.end(), [&](const StackelbergPoint& p) {
    return p.defender_action == eq.defender_action && p.attacker_action == eq.attacker_action;
  });
  if (member == ses.end()) {
    failures.push_back("CBSE pair (a=" + eq.attacker_action.to_string() + ", d=" + eq.defender_action.to_string() +
                       ") is not a Stackelberg equilibrium");
  }
  for (const auto& p : ses) {
    const int pd = p.defender_action.l1_numerator();
    const int ed = eq.defender_action.l1_numerator();
    const bool cheaper_pair = pd < ed || (pd == ed && p.attacker_action.l1_numerator() < eq.attacker_action.l1_numerator());
    if (cheaper_pair) {
      failures.push_back("cheaper SE exists: (a=" + p.attacker_action.to_string() + ", d=" +
                         p.defender_action.to_string() + ")");
      break;
    }
  }

  out << "oracle: " << ses.size() << " Stackelberg equilibria, payoff range [" << fixed(lo, 12) << ", "
      << fixed(hi, 12) << "]\n";
  out << "CBSE: a=" << eq.attacker_action.to_string() << " d=" << eq.defender_action.to_string()
      << " U^a=" << fixed(eq.attacker_utility, 12) << "\n";
  if (!c.out.empty()) {
    json doc = provenance(c, l);
    doc["se_count"] = ses.size();
    doc["payoff_range"] = {lo, hi};
    doc["equilibrium"] = equilibrium_json(eq);
    doc["failures"] = failures;
    write_file(with_ext(c.out, ".json"), doc.dump(2) + "\n");
  }
  if (!failures.empty()) {
    for (const auto& f : failures) err << "oracle failure: " << f << "\n";
    return kVerificationFailed;
  }
  out << "oracle: pass\n";
  return kOk;
}

int cmd_convert(const RunConfig& c, std::ostream& out) {
  const fs::path path = resolve_case_path(c.case_path);
  const PowerSystemCase pc = load_case(path, *parse_case_format(c.format));
  const std::string text = serialize_native_case(pc);
  if (c.to.empty() || c.to == "-") {
    out << text;
  } else {
    write_file(c.to, text);
  }
  return kOk;
}

// `--config FILE` adds every key of a JSON object as `--key value` unless the
// same flag is already on the command line.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") path = args[i + 1];
  }
  for (const auto& a : args) {
    if (a.rfind("--config=", 0) == 0) path = a.substr(9);
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("config file '" + path + "': " + e.what());
  }
  if (!doc.is_object()) throw ParseError("config file '" + path + "' must hold a JSON object");

  std::set<std::string> given;
  for (const auto& a : args) {
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
  }
  for (const auto& [key, value] : doc.items()) {
    if (key == "config" || given.count(key)) continue;
    auto scalar = [&](const json& v) -> std::string {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_number_integer()) return std::to_string(v.get<long long>());
      if (v.is_number()) {
        std::ostringstream s;
        s << std::setprecision(17) << v.get<double>();
        return s.str();
      }
      throw ParseError("config key '" + key + "' has an unsupported value type");
    };
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back("--" + key);
    } else if (value.is_array()) {
      for (const auto& v : value) {
        args.push_back("--" + key);
        args.push_back(scalar(v));
      }
    } else {
      args.push_back("--" + key);
      args.push_back(scalar(value));
    }
  }
  return args;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Voltage-stability attacker/defender investment game"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--case", c.case_path, "case file (.m = MATPOWER, else native JSON); relative paths also "
                                           "searched in $" + std::string(kCaseDirEnv));
    sub->add_option("--format", c.format, "auto | native | matpower");
    sub->add_option("--index-norm", c.index_norm, "max-stress | abs");
    sub->add_option("--config", c.config_path, "JSON file of flag values; command-line flags take precedence");
    sub->add_option("--out", c.out, "artifact path (extension chosen by --emit)");
    sub->add_option("--emit", c.emit, "csv | json | both");
    sub->add_option("--jobs", c.jobs, "worker threads (0 = all cores)");
    sub->add_option("--tol", c.tol, "payoff tie tolerance");
  };
  auto banded = [&](CLI::App* sub) {
    sub->add_option("--vmin", c.vmin, "lower voltage limit for every load (default: per-bus data)");
    sub->add_option("--vmax", c.vmax, "upper voltage limit for every load (default: per-bus data)");
    sub->add_option("--limits-cache", c.limits_cache, "covert-limit cache file (default: <case>.limits.json)");
    sub->add_flag("--no-cache", c.no_cache, "always recompute covert limits");
    sub->add_option("--qd-max", c.qd_max, "defender compensation cap per load, pu");
    sub->add_option("--qd-probe", c.qd_probe, "single-load compensation used for the defender ranking, pu");
  };
  auto game = [&](CLI::App* sub) {
    sub->add_option("--gamma-a", c.gamma_a, "attacker cost per load");
    sub->add_option("--gamma-d", c.gamma_d, "defender cost per load");
    sub->add_option("--levels-a", c.levels_a, "attacker investment levels L_a");
    sub->add_option("--levels-d", c.levels_d, "defender investment levels L_d");
    sub->add_option("--subset", c.subset, "restrict the game to the union of both players' top-N loads");
    sub->add_option("--loads", c.loads, "restrict the game to these load bus ids")->delimiter(',');
  };

  std::map<std::string, CLI::App*> subs;
  subs["delta"] = app.add_subcommand("delta", "nominal instability index");
  subs["limits"] = app.add_subcommand("limits", "covert attack limits and compensation check");
  subs["rank"] = app.add_subcommand("rank", "load importance ranking");
  subs["solve"] = app.add_subcommand("solve", "cost-based Stackelberg equilibrium");
  subs["sweep"] = app.add_subcommand("sweep", "equilibria over a cost grid");
  subs["oracle"] = app.add_subcommand("oracle", "check the equilibrium against brute-force enumeration");
  subs["convert"] = app.add_subcommand("convert", "write a case in the native JSON format");
  for (auto& [name, sub] : subs) {
    common(sub);
    if (name != "delta" && name != "convert") banded(sub);
  }
  for (const char* name : {"rank", "solve", "sweep", "oracle"}) game(subs[name]);
  subs["sweep"]->add_option("--grid-a", c.grid_a, "gamma_a grid lo:hi:step");
  subs["sweep"]->add_option("--grid-d", c.grid_d, "gamma_d grid lo:hi:step");
  subs["sweep"]->add_flag("--no-io", c.no_io, "skip the individual-optimization baseline");
  subs["oracle"]->add_flag("--inject-fault", c.inject_fault, "corrupt the equilibrium (self-test of the checks)");
  subs["convert"]->add_option("--to", c.to, "output path ('-' = stdout)");

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  for (auto& [name, sub] : subs) {
    if (sub->parsed()) c.command = name;
  }

  try {
    validate_config(c);
    if (c.command == "sweep") {
      parse_grid(c.grid_a, "--grid-a");
      parse_grid(c.grid_d, "--grid-d");
    }
    if (c.command == "delta") return cmd_delta(c, out);
    if (c.command == "limits") return cmd_limits(c, out, err);
    if (c.command == "rank") return cmd_rank(c, out, err);
    if (c.command == "solve") return cmd_solve(c, out, err);
    if (c.command == "sweep") return cmd_sweep(c, out, err);
    if (c.command == "oracle") return cmd_oracle(c, out, err);
    if (c.command == "convert") return cmd_convert(c, out);
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << "\n"
        << "hint: restrict the game with --subset N or --loads, or raise the costs\n";
    return kResourceCap;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kVerificationFailed;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  err << "error: unknown command\n";
  return kInputError;
}

}  // namespace vsg::cli
