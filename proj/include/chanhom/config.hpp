#pragma once

#include "chanhom/geometry.hpp"
#include "chanhom/grid.hpp"
#include "chanhom/kinetics.hpp"
#include "chanhom/microsim.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace chanhom {

inline constexpr int kSchemaVersion = 1;

/// Time step rule: a fixed value or factor * eps_min.
struct DtRule {
  bool scaled = false;
  Rational value{1, 128};
};

struct StudyConfig {
  std::string name = "study";
  double height = 1.0;
  std::vector<ChannelSegment> segments;  // resolved profile
  std::int64_t alignment = 0;
  std::shared_ptr<const CellGeometry> cell;

  DiffusionSpec diffusion;
  KineticsSpec kinetics;
  InitialData initial;

  double final_time = 0.5;
  DtRule dt_rule;
  std::vector<Rational> epsilon;  // strictly decreasing

  std::int64_t k = 4;
  std::int64_t m = 4;
  std::int64_t sigma_nodes = 0;  // 0: lcm of the eps columns
  std::int64_t bulk_sub = 1;
  GridOptions grid;

  std::size_t stride = 1;
  std::string out_dir = "out";
  std::uint64_t seed = 42;

  std::int64_t shift_l = 1;
  double shift_h = 0.25;
  double theta = 1.0;
  std::size_t random_fields = 100;

  double eps_min() const;
  double dt() const;
  std::size_t columns(std::size_t i) const;
};

/// Parses JSON text; throws ConfigError with a field path, AlignmentError
/// when the refinements do not resolve the profile.
StudyConfig parse_config(const std::string& text);
StudyConfig load_config(const std::filesystem::path& path);

/// Full configuration with all defaults filled in, as pretty JSON.
std::string config_echo(const StudyConfig& cfg);

/// Configuration of the shipped benchmark B1.
StudyConfig benchmark_b1();

}  // namespace chanhom
