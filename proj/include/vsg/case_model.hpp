#pragma once

// Power-system case data: buses, branches and the canonical load-first
// ordering used by every downstream module. All electrical quantities held
// here are per-unit on the case MVA base.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vsg {

enum class BusKind { kSlack, kGenerator, kLoad };

std::string_view to_string(BusKind kind);

/// Accepts "slack", "pv"/"generator" and "pq"/"load".
std::optional<BusKind> parse_bus_kind(std::string_view text);

struct Bus {
  int id = 0;
  BusKind kind = BusKind::kLoad;
  double p_demand = 0.0;
  double q_demand = 0.0;  // positive = inductive consumption
  double shunt_g = 0.0;   // at 1.0 pu voltage
  double shunt_b = 0.0;
  double p_gen = 0.0;     // scheduled active generation, slack/PV only
  double v_setpoint = 1.0;
  double v_min = 0.9;
  double v_max = 1.1;

  bool operator==(const Bus&) const = default;
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double b_charging = 0.0;  // total line charging
  double tap_ratio = 1.0;   // off-nominal turns ratio on the from side

  bool operator==(const Branch&) const = default;
};

/// Immutable case in canonical order: load buses by ascending id, then the
/// slack and generator buses by ascending id. Internal index k < K is load k.
///
/// Construction canonicalizes but does not validate; use validate_case or
/// the parsers, which reject invalid data.
class PowerSystemCase {
 public:
  PowerSystemCase() = default;
  PowerSystemCase(std::string name, double base_mva, std::vector<Bus> buses,
                  std::vector<Branch> branches);

  const std::string& name() const noexcept { return name_; }
  double base_mva() const noexcept { return base_mva_; }
  const std::vector<Bus>& buses() const noexcept { return buses_; }
  const std::vector<Branch>& branches() const noexcept { return branches_; }

  std::size_t num_buses() const noexcept { return buses_.size(); }
  std::size_t num_loads() const noexcept { return num_loads_; }
  std::size_t num_generators() const noexcept { return buses_.size() - num_loads_; }

  /// Internal index of an external bus id.
  std::optional<std::size_t> index_of(int bus_id) const;
  int id_at(std::size_t index) const { return buses_.at(index).id; }
  std::vector<int> load_ids() const;
  std::optional<std::size_t> slack_index() const;

  /// Copy with q_demand of load k increased by delta[k].
  PowerSystemCase with_load_q_delta(const std::vector<double>& delta) const;
  PowerSystemCase with_voltage_band(double v_min, double v_max) const;

  bool operator==(const PowerSystemCase&) const = default;

 private:
  std::string name_;
  double base_mva_ = 100.0;
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::size_t num_loads_ = 0;
};

enum class Severity { kWarning, kError };

struct ValidationIssue {
  Severity severity;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const;  // no errors (warnings allowed)
  bool empty() const { return issues.empty(); }
  std::size_t error_count() const;
  std::size_t warning_count() const;
  std::string summary() const;
};

ValidationReport validate_case(const PowerSystemCase& c);

/// Native JSON document. Demands and shunts are MW/MVAr; voltages, impedances
/// and taps are per-unit. Throws ParseError or ValidationError.
PowerSystemCase parse_native_case(std::string_view json_text);

/// MATPOWER-style `mpc.baseMVA`, `mpc.bus`, `mpc.gen`, `mpc.branch` blocks.
PowerSystemCase parse_matpower_case(std::string_view text);

std::string serialize_native_case(const PowerSystemCase& c);

enum class CaseFormat { kAuto, kNative, kMatpower };

std::optional<CaseFormat> parse_case_format(std::string_view text);

/// Reads and parses a case file. kAuto picks by extension (.m = MATPOWER).
PowerSystemCase load_case(const std::filesystem::path& path, CaseFormat format = CaseFormat::kAuto);

/// FNV-1a hash of the canonical serialized case, as 16 hex digits.
std::string case_hash(const PowerSystemCase& c);

}  // namespace vsg
