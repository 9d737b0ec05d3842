#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mcode/dataset.hpp"
#include "mcode/random.hpp"

namespace mcode {

enum class InjectionProtocol { variable_level, instance_level };

/// What "rate" counts under the variable-level protocol.
enum class VariableNoiseUnit {
  cells,      ///< round(rate * n * d) distinct label cells
  instances,  ///< round(rate * n) distinct instances, one random label each
};

struct FlippedCell {
  std::size_t instance = 0;
  std::size_t label = 0;
  std::uint8_t old_value = 0;
  std::uint8_t new_value = 0;

  friend bool operator==(const FlippedCell&, const FlippedCell&) = default;
};

/// Ground truth of one injection run. flipped_cells is sorted by (instance, label).
struct InjectionReport {
  InjectionProtocol protocol = InjectionProtocol::variable_level;
  double rate = 0.0;
  std::size_t p = 0;
  Seed seed;
  std::vector<FlippedCell> flipped_cells;
  std::vector<std::uint8_t> outlier_mask;

  std::size_t outlier_count() const;
};

std::pair<Dataset, InjectionReport> inject_variable_noise(const Dataset& ds, double rate, Seed seed,
                                                          VariableNoiseUnit unit = VariableNoiseUnit::cells);

std::pair<Dataset, InjectionReport> inject_instance_noise(const Dataset& ds, double instance_rate, std::size_t p,
                                                          Seed seed);

/// Flips every recorded cell again. Applying a report to the dataset it
/// produced restores the original labels.
Dataset apply_flips(const Dataset& ds, const InjectionReport& report);

/// CSV with header instance,label,old,new.
std::string injection_audit_csv(const InjectionReport& report);
void write_injection_audit(const InjectionReport& report, const std::filesystem::path& path);

}  // namespace mcode
