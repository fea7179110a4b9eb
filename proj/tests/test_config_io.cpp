#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ionreg/compiler.hpp"
#include "ionreg/config.hpp"
#include "ionreg/constants.hpp"
#include "ionreg/errors.hpp"
#include "ionreg/io.hpp"
#include "ionreg/simulate.hpp"
#include "ionreg/trap.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

using namespace ionreg;
namespace k = ionreg::constants;
namespace fs = std::filesystem;

namespace {

RunConfig sample_config() {
  RunConfig c;
  c.n_ions = 3;
  c.gradient_t_per_m = 380.0;
  c.b0_tesla = 1.25;
  c.rabi_rf_hz = 1.5e5;
  c.mode = "physical";
  c.seed = 42;
  c.delta_b_rms_tesla = 2.0e-9;
  c.method = "selective_line";
  c.nonselective_rf = false;
  c.format = "json";
  c.out_dir = "/tmp/run";
  return c;
}

TrapParams row1_trap(int n) {
  TrapParams t;
  t.nu1_rad_s = k::two_pi * 1.0e6;
  t.n_ions = n;
  t.species = ca43_defaults();
  t.gradient_t_per_m = 450.0;
  t.b0_tesla = 1.0;
  return t;
}

} // namespace

TEST_CASE("text round trip reproduces every field") {
  const RunConfig c = sample_config();
  const std::string text = emit_config(c);
  const RunConfig back = parse_config_text(text);
  CHECK(emit_config(back) == text);
  CHECK(back.n_ions == 3);
  CHECK(back.gradient_t_per_m == 380.0);
  CHECK(back.b0_tesla == 1.25);
  CHECK(back.rabi_rf_hz == 1.5e5);
  CHECK(back.mode == "physical");
  CHECK(back.seed == 42);
  CHECK(back.delta_b_rms_tesla == 2.0e-9);
  CHECK(back.method == "selective_line");
  CHECK(back.nonselective_rf == false);
  CHECK(back.format == "json");
  CHECK(back.out_dir == "/tmp/run");
  CHECK(back.species.name == "43Ca+");
}

TEST_CASE("defaults round trip and keep their documented values") {
  const RunConfig c;
  const RunConfig back = parse_config_text(emit_config(c));
  CHECK(emit_config(back) == emit_config(c));
  CHECK(c.species.hyperfine_a_hz == -806.4e6);
  CHECK(c.species.electron_gamma_hz_per_t == 28.02e9);
  CHECK(c.species.nuclear_gamma_hz_per_t == 2.85e6);
  CHECK(c.b0_tesla == 1.0);
  CHECK(c.rabi_mw_hz == 1.0e6);
  CHECK(c.rabi_rf_hz == 2.0e5);
}

TEST_CASE("comments, blank lines and spacing are ignored") {
  const RunConfig c = parse_config_text("# run setup\n"
                                        "\n"
                                        "  trap.n_ions   =  4   # register size\n"
                                        "simulate.mode=physical\n");
  CHECK(c.n_ions == 4);
  CHECK(c.mode == "physical");
  // untouched keys keep defaults
  CHECK(c.b0_tesla == 1.0);
}

TEST_CASE("unknown keys are rejected with the offending name") {
  CHECK_THROWS_AS(parse_config_text("trap.n_ionz = 3\n"), ConfigError);
  try {
    parse_config_text("trap.n_ionz = 3\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("trap.n_ionz") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_json_text(R"({"trap": {"frequency": 1.0}})"),
                  ConfigError);
}

TEST_CASE("malformed lines and values name the problem") {
  CHECK_THROWS_AS(parse_config_text("trap.n_ions 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("trap.n_ions = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("compile.nonselective_rf = yes\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_text("simulate.mode = warp\n"), ConfigError);
  try {
    parse_config_text("simulate.mode = warp\n");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("simulate.mode") != std::string::npos);
    CHECK(msg.find("warp") != std::string::npos);
  }
}

TEST_CASE("validation rejects out-of-range physics") {
  CHECK_THROWS_AS(parse_config_text("layout.b0_tesla = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("trap.n_ions = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("trap.n_ions = 11\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("species.nuclear_spin = 0.6\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_text("species.hyperfine_a_hz = 0\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_text("noise.trials = 0\n"), ConfigError);
  CHECK_THROWS_AS(
      parse_config_text("scan.rabi_min_hz = 2e6\nscan.rabi_max_hz = 1e6\n"),
      ConfigError);
  CHECK_THROWS_AS(parse_config_text("labframe.scale = 2\n"), ConfigError);
}

TEST_CASE("nested and flat json parse to the same config") {
  const RunConfig nested = parse_config_json_text(R"({
    "trap": {"n_ions": 3, "gradient_t_per_m": 380.0},
    "simulate": {"mode": "physical"},
    "compile": {"nonselective_rf": false},
    "seed": 42
  })");
  const RunConfig flat = parse_config_json_text(R"({
    "trap.n_ions": 3,
    "trap.gradient_t_per_m": 380.0,
    "simulate.mode": "physical",
    "compile.nonselective_rf": false,
    "seed": 42
  })");
  CHECK(emit_config(nested) == emit_config(flat));
  CHECK(nested.n_ions == 3);
  CHECK(nested.nonselective_rf == false);
  CHECK(nested.seed == 42);
}

TEST_CASE("leading whitespace still dispatches json by first character") {
  const RunConfig c = parse_config_any("  \n\t {\"trap\": {\"n_ions\": 5}}");
  CHECK(c.n_ions == 5);
  const RunConfig t = parse_config_any("trap.n_ions = 5\n");
  CHECK(t.n_ions == 5);
}

TEST_CASE("config hash is frozen for the defaults and sensitive to changes") {
  const RunConfig c;
  const std::string h = config_hash_hex(c);
  CHECK(h.size() == 16);
  // frozen so report provenance stays comparable across builds; an
  // intentional change to defaults or key order must update this value
  CHECK(h == "5e88b7c23d3fbb8a");
  RunConfig c2;
  c2.seed = 2;
  CHECK(config_hash_hex(c2) != h);
  RunConfig c3;
  CHECK(config_hash_hex(c3) == h);
}

TEST_CASE("fnv1a64 matches its published reference vectors") {
  CHECK(fnv1a64("") == 14695981039346656037ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("atomic write replaces files and leaves no temp behind") {
  const fs::path dir = fs::temp_directory_path() / "ionreg_io_test";
  fs::remove_all(dir);
  const fs::path target = dir / "sub" / "report.txt";
  atomic_write_file(target.string(), "first\n");
  CHECK(read_file(target.string()) == "first\n");
  atomic_write_file(target.string(), "second\n");
  CHECK(read_file(target.string()) == "second\n");
  CHECK(!fs::exists(target.string() + ".tmp"));
  fs::remove_all(dir);
}

TEST_CASE("schedule json round trip is byte stable and execution identical") {
  Circuit c;
  c.n_ions = 2;
  Gate g;
  g.kind = GateKind::cnot_nn;
  g.ion = 0;
  g.ion2 = 1;
  c.gates = {g};
  const Schedule s = compile(c, row1_trap(2), CompileOptions{});

  const nlohmann::ordered_json j1 = schedule_to_json(s, "deadbeefdeadbeef");
  const std::string text1 = j1.dump(2);
  const Schedule back = schedule_from_json(nlohmann::json::parse(text1));
  const std::string text2 = schedule_to_json(back, "deadbeefdeadbeef").dump(2);
  CHECK(text1 == text2);

  const cmat u1 = execute_ideal(s);
  const cmat u2 = execute_ideal(back);
  REQUIRE(u1.rows() == u2.rows());
  CHECK(std::memcmp(u1.data(), u2.data(),
                    sizeof(cxd) * static_cast<std::size_t>(u1.size())) == 0);
}

TEST_CASE("schedule json rejects foreign schema versions") {
  Circuit c;
  c.n_ions = 2;
  Gate g;
  g.kind = GateKind::swap_is;
  g.ion = 0;
  c.gates = {g};
  const Schedule s = compile(c, row1_trap(2), CompileOptions{});
  nlohmann::ordered_json j = schedule_to_json(s, "0000000000000000");
  j["schema_version"] = "ionreg/v2";
  CHECK_THROWS_AS(schedule_from_json(nlohmann::json::parse(j.dump())),
                  ConfigError);
}

TEST_CASE("channel and condition names round trip through their parsers") {
  for (Channel ch : {Channel::mw, Channel::rf})
    CHECK(channel_from_name(channel_name(ch)) == ch);
  for (SpinSel sel : {SpinSel::mi_top, SpinSel::mi_bottom, SpinSel::ms_up,
                      SpinSel::ms_down, SpinSel::both})
    CHECK(spin_sel_from_name(spin_sel_name(sel)) == sel);
  CHECK_THROWS_AS(channel_from_name("optical"), ConfigError);
  CHECK_THROWS_AS(spin_sel_from_name("sideways"), ConfigError);
}

TEST_CASE("derived trap and compile options mirror the config") {
  const RunConfig c = sample_config();
  const TrapParams t = trap_from_config(c);
  CHECK(t.n_ions == 3);
  CHECK(t.nu1_rad_s == doctest::Approx(k::two_pi * 1.0e6));
  CHECK(t.gradient_t_per_m == 380.0);
  const CompileOptions o = compile_options_from_config(c);
  CHECK(o.rabi_rf_hz == 1.5e5);
  CHECK(o.method == CnotMethod::selective_line);
  CHECK(o.nonselective_rf == false);
}
