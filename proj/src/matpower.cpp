#include <cmath>
#include <map>
#include <regex>
#include <string>
#include <vector>

#include "vsg/case_model.hpp"
#include "vsg/error.hpp"

namespace vsg {
namespace {

using Row = std::vector<double>;

std::string strip_comments(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_comment = false;
  for (char ch : text) {
    if (ch == '\n') {
      in_comment = false;
      out.push_back(ch);
    } else if (ch == '%') {
      in_comment = true;
    } else if (!in_comment) {
      out.push_back(ch);
    }
  }
  return out;
}

// Finds `mpc.<name> = [ ... ]` (or bare `<name> = [`) and returns its rows.
std::optional<std::vector<Row>> read_block(const std::string& text, const std::string& name) {
  const std::regex header("(^|[^A-Za-z0-9_.])(mpc\\.)?" + name + "\\s*=\\s*\\[");
  std::smatch m;
  if (!std::regex_search(text, m, header)) return std::nullopt;
  const std::size_t begin = static_cast<std::size_t>(m.position(0) + m.length(0));
  const std::size_t end = text.find(']', begin);
  if (end == std::string::npos) throw ParseError("block '" + name + "' is not terminated by ']'");

  std::vector<Row> rows;
  Row current;
  std::string token;
  auto flush_token = [&] {
    if (token.empty()) return;
    if (token == "...") {
      token.clear();
      return;
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      current.push_back(v);
    } catch (const std::exception&) {
      throw ParseError("block '" + name + "': non-numeric entry '" + token + "'");
    }
    token.clear();
  };
  auto flush_row = [&] {
    flush_token();
    if (!current.empty()) rows.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = begin; i < end; ++i) {
    const char ch = text[i];
    if (ch == ';' || ch == '\n') {
      flush_row();
    } else if (ch == ' ' || ch == '\t' || ch == ',' || ch == '\r') {
      flush_token();
    } else {
      token.push_back(ch);
    }
  }
  flush_row();
  return rows;
}

std::vector<Row> require_block(const std::string& text, const std::string& name, std::size_t min_cols) {
  auto rows = read_block(text, name);
  if (!rows) throw ParseError("missing block '" + name + "'");
  if (rows->empty()) throw ParseError("block '" + name + "' is empty");
  const std::size_t cols = rows->front().size();
  if (cols < min_cols) {
    throw ParseError("block '" + name + "' row 1 has " + std::to_string(cols) + " columns, expected at least " +
                     std::to_string(min_cols));
  }
  for (std::size_t r = 0; r < rows->size(); ++r) {
    if ((*rows)[r].size() != cols) {
      throw ParseError("block '" + name + "' row " + std::to_string(r + 1) + " has " +
                       std::to_string((*rows)[r].size()) + " columns, expected " + std::to_string(cols));
    }
  }
  return *rows;
}

int as_int(double v, const std::string& where) {
  if (v != std::floor(v)) throw ParseError(where + ": expected an integer, got " + std::to_string(v));
  return static_cast<int>(v);
}

}  // namespace

PowerSystemCase parse_matpower_case(std::string_view raw) {
  const std::string text = strip_comments(raw);

  std::string name = "case";
  std::smatch m;
  if (std::regex_search(text, m, std::regex("function\\s+mpc\\s*=\\s*([A-Za-z0-9_]+)"))) name = m[1];

  if (!std::regex_search(text, m, std::regex("(mpc\\.)?baseMVA\\s*=\\s*([^;\\n]+)"))) {
    throw ParseError("missing block 'baseMVA'");
  }
  double base = 0.0;
  try {
    base = std::stod(m[2].str());
  } catch (const std::exception&) {
    throw ParseError("baseMVA is not a number: '" + m[2].str() + "'");
  }
  if (!(base > 0.0)) throw ValidationError("baseMVA must be positive");

  const auto bus_rows = require_block(text, "bus", 13);
  const auto gen_rows = require_block(text, "gen", 8);
  const auto branch_rows = require_block(text, "branch", 11);

  std::vector<Bus> buses;
  std::map<int, std::size_t> position;
  for (std::size_t r = 0; r < bus_rows.size(); ++r) {
    const Row& row = bus_rows[r];
    const std::string where = "bus row " + std::to_string(r + 1);
    Bus b;
    b.id = as_int(row[0], where);
    switch (as_int(row[1], where)) {
      case 1:
        b.kind = BusKind::kLoad;
        break;
      case 2:
        b.kind = BusKind::kGenerator;
        break;
      case 3:
        b.kind = BusKind::kSlack;
        break;
      default:
        throw ParseError(where + ": unsupported bus type " + std::to_string(row[1]) + " (isolated buses are not modeled)");
    }
    b.p_demand = row[2] / base;
    b.q_demand = row[3] / base;
    b.shunt_g = row[4] / base;
    b.shunt_b = row[5] / base;
    b.v_setpoint = row[7];
    b.v_max = row[11];
    b.v_min = row[12];
    position.emplace(b.id, buses.size());
    buses.push_back(b);
  }

  std::vector<bool> has_gen(buses.size(), false);
  for (std::size_t r = 0; r < gen_rows.size(); ++r) {
    const Row& row = gen_rows[r];
    const std::string where = "gen row " + std::to_string(r + 1);
    if (row[7] <= 0.0) continue;  // out of service
    const int id = as_int(row[0], where);
    auto it = position.find(id);
    if (it == position.end()) throw ParseError(where + ": unknown bus " + std::to_string(id));
    Bus& b = buses[it->second];
    if (b.kind == BusKind::kLoad) throw ParseError(where + ": generator on PQ bus " + std::to_string(id));
    b.p_gen += row[1] / base;
    if (!has_gen[it->second]) b.v_setpoint = row[5];
    has_gen[it->second] = true;
  }
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].kind != BusKind::kLoad && !has_gen[i]) {
      throw ParseError("bus " + std::to_string(buses[i].id) + " is PV/slack but has no in-service generator");
    }
  }

  std::vector<Branch> branches;
  for (std::size_t r = 0; r < branch_rows.size(); ++r) {
    const Row& row = branch_rows[r];
    const std::string where = "branch row " + std::to_string(r + 1);
    if (row[10] <= 0.0) continue;  // out of service
    Branch br;
    br.from_bus = as_int(row[0], where);
    br.to_bus = as_int(row[1], where);
    br.r = row[2];
    br.x = row[3];
    br.b_charging = row[4];
    br.tap_ratio = row[8] == 0.0 ? 1.0 : row[8];
    if (row[9] != 0.0) {
      throw ParseError(where + ": unsupported feature: phase-shifting transformer on branch " +
                       std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) + " (shift " +
                       std::to_string(row[9]) + " deg)");
    }
    branches.push_back(br);
  }

  PowerSystemCase c(name, base, std::move(buses), std::move(branches));
  const ValidationReport report = validate_case(c);
  if (!report.ok()) throw ValidationError("invalid case '" + name + "':\n" + report.summary());
  return c;
}

}  // namespace vsg
