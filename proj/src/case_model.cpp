#include "vsg/case_model.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "vsg/error.hpp"

namespace vsg {

using nlohmann::json;

std::string_view to_string(BusKind kind) {
  switch (kind) {
    case BusKind::kSlack:
      return "slack";
    case BusKind::kGenerator:
      return "pv";
    case BusKind::kLoad:
      return "pq";
  }
  return "?";
}

std::optional<BusKind> parse_bus_kind(std::string_view text) {
  if (text == "slack") return BusKind::kSlack;
  if (text == "pv" || text == "generator") return BusKind::kGenerator;
  if (text == "pq" || text == "load") return BusKind::kLoad;
  return std::nullopt;
}

PowerSystemCase::PowerSystemCase(std::string name, double base_mva, std::vector<Bus> buses,
                                 std::vector<Branch> branches)
    : name_(std::move(name)), base_mva_(base_mva), branches_(std::move(branches)) {
  std::stable_sort(buses.begin(), buses.end(), [](const Bus& a, const Bus& b) {
    const bool la = a.kind == BusKind::kLoad;
    const bool lb = b.kind == BusKind::kLoad;
    if (la != lb) return la;
    return a.id < b.id;
  });
  num_loads_ = static_cast<std::size_t>(
      std::count_if(buses.begin(), buses.end(), [](const Bus& b) { return b.kind == BusKind::kLoad; }));
  buses_ = std::move(buses);
}

std::optional<std::size_t> PowerSystemCase::index_of(int bus_id) const {
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    if (buses_[i].id == bus_id) return i;
  }
  return std::nullopt;
}

std::vector<int> PowerSystemCase::load_ids() const {
  std::vector<int> ids;
  ids.reserve(num_loads_);
  for (std::size_t k = 0; k < num_loads_; ++k) ids.push_back(buses_[k].id);
  return ids;
}

std::optional<std::size_t> PowerSystemCase::slack_index() const {
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    if (buses_[i].kind == BusKind::kSlack) return i;
  }
  return std::nullopt;
}

PowerSystemCase PowerSystemCase::with_load_q_delta(const std::vector<double>& delta) const {
  if (delta.size() != num_loads_) {
    throw ValidationError("load delta has " + std::to_string(delta.size()) + " entries, case has " +
                          std::to_string(num_loads_) + " loads");
  }
  PowerSystemCase out = *this;
  for (std::size_t k = 0; k < num_loads_; ++k) out.buses_[k].q_demand += delta[k];
  return out;
}

PowerSystemCase PowerSystemCase::with_voltage_band(double v_min, double v_max) const {
  PowerSystemCase out = *this;
  for (auto& b : out.buses_) {
    b.v_min = v_min;
    b.v_max = v_max;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::ok() const { return error_count() == 0; }

std::size_t ValidationReport::error_count() const {
  return static_cast<std::size_t>(std::count_if(issues.begin(), issues.end(), [](const ValidationIssue& i) {
    return i.severity == Severity::kError;
  }));
}

std::size_t ValidationReport::warning_count() const { return issues.size() - error_count(); }

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (const auto& issue : issues) {
    os << (issue.severity == Severity::kError ? "error: " : "warning: ") << issue.message << '\n';
  }
  return os.str();
}

ValidationReport validate_case(const PowerSystemCase& c) {
  ValidationReport report;
  auto error = [&](std::string msg) { report.issues.push_back({Severity::kError, std::move(msg)}); };
  auto warn = [&](std::string msg) { report.issues.push_back({Severity::kWarning, std::move(msg)}); };

  if (!(c.base_mva() > 0.0)) error("base_mva must be positive");
  if (c.buses().empty()) {
    error("case has no buses");
    return report;
  }

  std::unordered_map<int, std::size_t> index;
  std::vector<int> slack_ids;
  for (std::size_t i = 0; i < c.buses().size(); ++i) {
    const Bus& b = c.buses()[i];
    if (b.id <= 0) error("bus id " + std::to_string(b.id) + " is not a positive integer");
    if (!index.emplace(b.id, i).second) error("duplicate bus id " + std::to_string(b.id));
    if (b.kind == BusKind::kSlack) slack_ids.push_back(b.id);
    if (!(b.v_min < b.v_max)) {
      error("bus " + std::to_string(b.id) + ": v_min must be below v_max");
    }
    if (b.kind != BusKind::kLoad && (b.v_setpoint < b.v_min || b.v_setpoint > b.v_max)) {
      error("bus " + std::to_string(b.id) + ": voltage setpoint " + std::to_string(b.v_setpoint) +
            " outside [v_min, v_max]");
    }
    if (b.kind != BusKind::kLoad && !(b.v_setpoint > 0.0)) {
      error("bus " + std::to_string(b.id) + ": voltage setpoint must be positive");
    }
    if (b.kind == BusKind::kLoad && b.q_demand < 0.0) {
      warn("load bus " + std::to_string(b.id) + " has capacitive reactive demand " +
           std::to_string(b.q_demand) + " pu");
    }
  }
  if (slack_ids.empty()) {
    error("case has no slack bus");
  } else if (slack_ids.size() > 1) {
    std::string ids;
    for (int id : slack_ids) ids += (ids.empty() ? "" : ", ") + std::to_string(id);
    error("case has " + std::to_string(slack_ids.size()) + " slack buses (ids " + ids + ")");
  }
  if (c.num_loads() == 0) error("case has no load buses");

  std::vector<std::vector<std::size_t>> adjacency(c.buses().size());
  for (std::size_t n = 0; n < c.branches().size(); ++n) {
    const Branch& br = c.branches()[n];
    const std::string tag = "branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
    auto f = index.find(br.from_bus);
    auto t = index.find(br.to_bus);
    if (f == index.end()) error(tag + " references unknown bus " + std::to_string(br.from_bus));
    if (t == index.end()) error(tag + " references unknown bus " + std::to_string(br.to_bus));
    if (br.from_bus == br.to_bus) error(tag + " connects a bus to itself");
    if (br.x == 0.0) error(tag + " has zero reactance");
    if (!(br.tap_ratio > 0.0)) error(tag + " has non-positive tap ratio");
    if (f != index.end() && t != index.end()) {
      adjacency[f->second].push_back(t->second);
      adjacency[t->second].push_back(f->second);
    }
  }

  std::vector<bool> seen(c.buses().size(), false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  while (!frontier.empty()) {
    const std::size_t i = frontier.front();
    frontier.pop();
    for (std::size_t j : adjacency[i]) {
      if (!seen[j]) {
        seen[j] = true;
        frontier.push(j);
      }
    }
  }
  std::set<int> unreachable;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) unreachable.insert(c.buses()[i].id);
  }
  if (!unreachable.empty()) {
    std::string ids;
    for (int id : unreachable) ids += (ids.empty() ? "" : ", ") + std::to_string(id);
    error("network is disconnected; unreachable from bus " + std::to_string(c.buses()[0].id) + ": {" + ids + "}");
  }
  return report;
}

namespace {

void require_valid(const PowerSystemCase& c) {
  const ValidationReport report = validate_case(c);
  if (!report.ok()) {
    std::string msg = "invalid case '" + c.name() + "':";
    for (const auto& issue : report.issues) {
      if (issue.severity == Severity::kError) msg += "\n  " + issue.message;
    }
    throw ValidationError(msg);
  }
}

// ---------------------------------------------------------------------------
// Native JSON

const json& require_field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field '" + key + "'");
  return *it;
}

double number_field(const json& obj, const char* key, const std::string& where,
                    std::optional<double> fallback = std::nullopt) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback) return *fallback;
    throw ParseError(where + ": missing field '" + key + "'");
  }
  if (!it->is_number()) throw ParseError(where + ": field '" + key + "' must be a number");
  return it->get<double>();
}

int integer_field(const json& obj, const char* key, const std::string& where) {
  const json& v = require_field(obj, key, where);
  if (!v.is_number_integer()) throw ParseError(where + ": field '" + key + "' must be an integer");
  return v.get<int>();
}

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ParseError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

}  // namespace

PowerSystemCase parse_native_case(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("case document must be a JSON object");
  reject_unknown_keys(doc, {"name", "base_mva", "buses", "branches"}, "case");

  const json& name = require_field(doc, "name", "case");
  if (!name.is_string()) throw ParseError("case: field 'name' must be a string");
  const double base = number_field(doc, "base_mva", "case");
  if (!(base > 0.0)) throw ValidationError("case: base_mva must be positive");

  const json& buses_json = require_field(doc, "buses", "case");
  if (!buses_json.is_array()) throw ParseError("case: field 'buses' must be an array");
  std::vector<Bus> buses;
  for (std::size_t n = 0; n < buses_json.size(); ++n) {
    const json& jb = buses_json[n];
    const std::string where = "buses[" + std::to_string(n) + "]";
    if (!jb.is_object()) throw ParseError(where + ": must be an object");
    reject_unknown_keys(jb, {"id", "kind", "pd", "qd", "gs", "bs", "pg", "vset", "vmin", "vmax"}, where);
    Bus b;
    b.id = integer_field(jb, "id", where);
    const json& kind = require_field(jb, "kind", where);
    if (!kind.is_string()) throw ParseError(where + ": field 'kind' must be a string");
    auto parsed_kind = parse_bus_kind(kind.get<std::string>());
    if (!parsed_kind) throw ParseError(where + ": unknown bus kind '" + kind.get<std::string>() + "'");
    b.kind = *parsed_kind;
    b.p_demand = number_field(jb, "pd", where, 0.0) / base;
    b.q_demand = number_field(jb, "qd", where, 0.0) / base;
    b.shunt_g = number_field(jb, "gs", where, 0.0) / base;
    b.shunt_b = number_field(jb, "bs", where, 0.0) / base;
    b.p_gen = number_field(jb, "pg", where, 0.0) / base;
    b.v_setpoint = number_field(jb, "vset", where, 1.0);
    b.v_min = number_field(jb, "vmin", where, 0.9);
    b.v_max = number_field(jb, "vmax", where, 1.1);
    buses.push_back(b);
  }

  const json& branches_json = require_field(doc, "branches", "case");
  if (!branches_json.is_array()) throw ParseError("case: field 'branches' must be an array");
  std::vector<Branch> branches;
  for (std::size_t n = 0; n < branches_json.size(); ++n) {
    const json& jb = branches_json[n];
    const std::string where = "branches[" + std::to_string(n) + "]";
    if (!jb.is_object()) throw ParseError(where + ": must be an object");
    reject_unknown_keys(jb, {"from", "to", "r", "x", "b", "tap"}, where);
    Branch br;
    br.from_bus = integer_field(jb, "from", where);
    br.to_bus = integer_field(jb, "to", where);
    br.r = number_field(jb, "r", where, 0.0);
    br.x = number_field(jb, "x", where);
    br.b_charging = number_field(jb, "b", where, 0.0);
    br.tap_ratio = number_field(jb, "tap", where, 1.0);
    branches.push_back(br);
  }

  PowerSystemCase c(name.get<std::string>(), base, std::move(buses), std::move(branches));
  require_valid(c);
  return c;
}

std::string serialize_native_case(const PowerSystemCase& c) {
  const double base = c.base_mva();
  json buses = json::array();
  for (const Bus& b : c.buses()) {
    json jb = {{"id", b.id},
               {"kind", std::string(to_string(b.kind))},
               {"pd", b.p_demand * base},
               {"qd", b.q_demand * base},
               {"gs", b.shunt_g * base},
               {"bs", b.shunt_b * base},
               {"vset", b.v_setpoint},
               {"vmin", b.v_min},
               {"vmax", b.v_max}};
    if (b.kind != BusKind::kLoad) jb["pg"] = b.p_gen * base;
    buses.push_back(std::move(jb));
  }
  json branches = json::array();
  for (const Branch& br : c.branches()) {
    branches.push_back({{"from", br.from_bus},
                        {"to", br.to_bus},
                        {"r", br.r},
                        {"x", br.x},
                        {"b", br.b_charging},
                        {"tap", br.tap_ratio}});
  }
  json doc = {{"name", c.name()}, {"base_mva", base}, {"buses", std::move(buses)}, {"branches", std::move(branches)}};
  return doc.dump(2) + "\n";
}

std::optional<CaseFormat> parse_case_format(std::string_view text) {
  if (text == "auto") return CaseFormat::kAuto;
  if (text == "native" || text == "json") return CaseFormat::kNative;
  if (text == "matpower" || text == "m") return CaseFormat::kMatpower;
  return std::nullopt;
}

PowerSystemCase load_case(const std::filesystem::path& path, CaseFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open case file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (format == CaseFormat::kAuto) {
    format = path.extension() == ".m" ? CaseFormat::kMatpower : CaseFormat::kNative;
  }
  return format == CaseFormat::kMatpower ? parse_matpower_case(buf.str()) : parse_native_case(buf.str());
}

std::string case_hash(const PowerSystemCase& c) {
  const std::string text = serialize_native_case(c);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace vsg
