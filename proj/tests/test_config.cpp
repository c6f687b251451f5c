#include <catch2/catch_amalgamated.hpp>

#include "starcool/config.hpp"

using namespace starcool::config;

TEST_CASE("config parsing: sections, comments, types") {
  const RunConfig cfg = RunConfig::parse_string(
      "# leading comment\n"
      "[system]\n"
      "n_reset = 12\n"
      "gamma = 5.03   # trailing comment\n"
      "\n"
      "[schedule]\n"
      "tau_hb = 9.5\n"
      "m = auto\n"
      "eta_lo_range = 0.0, 0.2\n"
      "m_schedule = 3,3,2\n"
      "seed = 12345\n");
  REQUIRE(cfg.get_int("system", "n_reset", 0) == 12);
  REQUIRE(cfg.get_real("system", "gamma", 0.0) == 5.03);
  REQUIRE(cfg.get_real("schedule", "tau_hb", 0.0) == 9.5);
  REQUIRE(cfg.get_string("schedule", "m", "") == "auto");
  REQUIRE(cfg.get_real_list("schedule", "eta_lo_range", {}) == std::vector<double>{0.0, 0.2});
  REQUIRE(cfg.get_int_list("schedule", "m_schedule", {}) == std::vector<int>{3, 3, 2});
  REQUIRE(cfg.get_seed("schedule", "seed", 0) == 12345);
  REQUIRE(cfg.get_real("system", "t1_comp", 150.0) == 150.0);  // default
  REQUIRE(cfg.has("system", "gamma"));
  REQUIRE_FALSE(cfg.has("system", "t1_comp"));
}

TEST_CASE("config errors carry line numbers") {
  try {
    RunConfig::parse_string("[system]\nn_reset = 12\nn_reset = 13\n");
    FAIL("expected duplicate-key error");
  } catch (const ConfigError& e) {
    REQUIRE(e.line() == 3);
  }

  try {
    RunConfig::parse_string("key_without_section = 1\n");
    FAIL("expected section error");
  } catch (const ConfigError& e) {
    REQUIRE(e.line() == 1);
  }

  try {
    RunConfig::parse_string("[system]\nbroken line\n");
    FAIL("expected key=value error");
  } catch (const ConfigError& e) {
    REQUIRE(e.line() == 2);
  }

  const RunConfig cfg = RunConfig::parse_string("[system]\ngamma = fast\n");
  try {
    cfg.get_real("system", "gamma", 1.0);
    FAIL("expected number error");
  } catch (const ConfigError& e) {
    REQUIRE(e.line() == 2);
  }
}

TEST_CASE("unknown keys and sections are rejected") {
  const std::map<std::string, std::set<std::string>> schema = {
      {"system", {"n_reset", "gamma"}},
  };
  const RunConfig good = RunConfig::parse_string("[system]\nn_reset = 3\n");
  REQUIRE_NOTHROW(good.require_known(schema));

  const RunConfig bad_key = RunConfig::parse_string("[system]\nn_resett = 3\n");
  try {
    bad_key.require_known(schema);
    FAIL("expected unknown-key error");
  } catch (const ConfigError& e) {
    REQUIRE(e.line() == 2);
    REQUIRE(std::string(e.what()).find("n_resett") != std::string::npos);
  }

  const RunConfig bad_section = RunConfig::parse_string("[systems]\nn_reset = 3\n");
  REQUIRE_THROWS_AS(bad_section.require_known(schema), ConfigError);
}

TEST_CASE("content hash is stable and content sensitive") {
  const RunConfig a = RunConfig::parse_string("[system]\nn_reset = 3\n");
  const RunConfig b = RunConfig::parse_string("[system]\nn_reset = 3\n");
  const RunConfig c = RunConfig::parse_string("[system]\nn_reset = 4\n");
  REQUIRE(a.content_hash() == b.content_hash());
  REQUIRE(a.content_hash() != c.content_hash());
}
