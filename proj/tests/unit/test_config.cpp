#include "chanhom/config.hpp"
#include "chanhom/errors.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

using namespace chanhom;
using nlohmann::json;

namespace {

json b1_json() {
  std::ifstream in(std::string(CHANHOM_SOURCE_DIR) + "/configs/b1.json");
  return json::parse(in);
}

std::string error_of(const json& j) {
  try {
    parse_config(j.dump());
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("shipped B1 file equals the built-in benchmark") {
  const StudyConfig file = load_config(std::string(CHANHOM_SOURCE_DIR) + "/configs/b1.json");
  const StudyConfig b1 = benchmark_b1();
  CHECK(config_echo(file) == config_echo(b1));
  CHECK(file.epsilon.size() == 3);
  CHECK(file.eps_min() == 1.0 / 16);
  CHECK(file.dt() == 1.0 / 128);
  CHECK(file.columns(2) == 16);
  CHECK(file.sigma_nodes == 16);  // lcm of the eps columns
  CHECK(to_double(file.cell->area()) == 1.0);
}

TEST_CASE("echo is complete and round-trips") {
  const StudyConfig b1 = benchmark_b1();
  const std::string echo = config_echo(b1);
  const json j = json::parse(echo);
  CHECK(j.at("schema_version") == kSchemaVersion);
  CHECK(j.at("refinement").at("sigma_nodes") == 16);
  CHECK(j.at("epsilon").at(1) == "1/8");
  CHECK(j.contains("diagnostics"));
  CHECK(config_echo(parse_config(echo)) == echo);
}

TEST_CASE("scaled time step") {
  json j = b1_json();
  j["time"]["dt"] = {{"rule", "scaled"}, {"factor", "1/8"}};
  j["time"]["T"] = 0.5;
  const auto cfg = parse_config(j.dump());
  CHECK(cfg.dt() == doctest::Approx(1.0 / 128));
}

TEST_CASE("validation messages name the field") {
  json j = b1_json();
  j["epsilon"] = {"1/4", "3/10"};
  CHECK(error_of(j).find("epsilon[1]") != std::string::npos);

  j = b1_json();
  j["epsilon"] = {"1/8", "1/4"};
  CHECK(error_of(j).find("epsilon") != std::string::npos);

  j = b1_json();
  j["diffusivity"].erase("channel");
  CHECK(error_of(j).find("diffusivity.channel required") != std::string::npos);

  j = b1_json();
  j["kinetics"]["g"]["lamda"] = 1.0;
  CHECK(error_of(j).find("kinetics.g.lamda: unknown field") != std::string::npos);

  j = b1_json();
  j["kinetics"]["g"]["kind"] = "sqrt";
  CHECK_THROWS_AS(parse_config(j.dump()), ConfigError);

  j = b1_json();
  j["diffusivity"]["channel"] = {0.5, -1.0};
  CHECK_THROWS_AS(parse_config(j.dump()), ConfigError);

  j = b1_json();
  j["time"]["dt"]["value"] = "1/3";
  CHECK(error_of(j).find("time.dt must divide time.T") != std::string::npos);

  j = b1_json();
  j["schema_version"] = 7;
  CHECK_THROWS_AS(parse_config(j.dump()), ConfigError);

  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/b1.json"), ConfigError);
}

TEST_CASE("refinement alignment") {
  json j = b1_json();
  j["refinement"] = {{"k", 3}, {"m", 3}};
  CHECK_THROWS_AS(parse_config(j.dump()), AlignmentError);

  j = b1_json();
  j["refinement"] = {{"k", 4}, {"m", 8}};
  CHECK_THROWS_AS(parse_config(j.dump()), AlignmentError);

  j = b1_json();
  j["refinement"] = {{"k", 4}, {"m", 4}, {"sigma_nodes", 12}};
  CHECK_THROWS_AS(parse_config(j.dump()), ValidationError);

  j = b1_json();
  j["refinement"] = {{"k", 8}, {"m", 8}, {"sigma_nodes", 32}};
  const auto cfg = parse_config(j.dump());
  CHECK(cfg.k == 8);
  CHECK(cfg.sigma_nodes == 32);
}

TEST_CASE("segment profiles and per-segment diffusivities") {
  json j = b1_json();
  j["geometry"]["profile"] = {{"type", "segments"},
                              {"segments", json::array({{{"y_lo", "-1"}, {"y_hi", "-1/4"}, {"width", "3/4"}},
                                                        {{"y_lo", "-1/4"}, {"y_hi", "1/4"}, {"width", "1/4"}},
                                                        {{"y_lo", "1/4"}, {"y_hi", "1"}, {"width", "3/4"}}})}};
  j["diffusivity"]["channel"] = {{0.5, 0.5}, {1.0, 1.0}, {0.5, 0.5}};
  j["refinement"] = {{"k", 8}, {"m", 8}};
  const auto cfg = parse_config(j.dump());
  CHECK(cfg.segments.size() == 3);
  CHECK(cfg.diffusion.channel.size() == 3);
  j["refinement"] = {{"k", 4}, {"m", 4}};
  CHECK_THROWS_AS(parse_config(j.dump()), AlignmentError);
}
