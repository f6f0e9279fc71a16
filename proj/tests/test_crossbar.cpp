#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "enduromap/crossbar.hpp"
#include "enduromap/errors.hpp"

using namespace enduromap;

namespace {

CrossbarConfig config_for(int nm, int size, double temp_c = 25.0) {
  CrossbarConfig cfg;
  cfg.size = size;
  cfg.tech = TechnologyNode::standard(nm);
  cfg.temperature_c = temp_c;
  cfg.drive_voltage = default_drive_voltage(nm);
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("technology node parasitic defaults") {
  CHECK(TechnologyNode::standard(65).unit_parasitic_resistance == doctest::Approx(1.0));
  CHECK(TechnologyNode::standard(45).unit_parasitic_resistance == doctest::Approx(1.56).epsilon(0.01));
  CHECK(TechnologyNode::standard(32).unit_parasitic_resistance == doctest::Approx(2.44).epsilon(0.01));
  CHECK(TechnologyNode::standard(16).unit_parasitic_resistance == doctest::Approx(3.8));
  CHECK_THROWS_AS(TechnologyNode::standard(22), ConfigError);
}

TEST_CASE("temperature adjusted drive") {
  CrossbarConfig cfg = config_for(45, 4);
  cfg.drive_voltage = 1.0;

  cfg.temperature_c = 25.0;
  CHECK(temperature_adjusted_drive(cfg) == 1.0);

  cfg.temperature_c = 50.0;
  CHECK(temperature_adjusted_drive(cfg) == doctest::Approx(1.05).epsilon(1e-12));

  cfg.drive_temperature_coefficient = 0.0;
  CHECK(temperature_adjusted_drive(cfg) == 1.0);

  // clamped to [0, 100] C
  cfg.drive_temperature_coefficient = 0.002;
  cfg.temperature_c = 250.0;
  CHECK(temperature_adjusted_drive(cfg) == doctest::Approx(1.0 + 0.002 * 75.0));
  cfg.temperature_c = -40.0;
  CHECK(temperature_adjusted_drive(cfg) == doctest::Approx(1.0 - 0.002 * 25.0));
}

TEST_CASE("single-cell crossbar is a voltage divider") {
  CrossbarConfig cfg = config_for(65, 1);
  cfg.drive_voltage = 1.0;
  const double rp = cfg.tech.unit_parasitic_resistance;

  const auto lrs = solve_voltage_map(cfg, uniform_states(1, ResistanceState::LRS1));
  const double r_on = cfg.cell_on_resistance;
  CHECK(lrs.volts(0, 0) ==
        doctest::Approx(r_on / (r_on + 2 * rp + cfg.sense_resistance)).epsilon(1e-9));

  const auto hrs = solve_voltage_map(cfg, uniform_states(1, ResistanceState::HRS));
  const double r_off = cfg.cell_off_resistance;
  CHECK(hrs.volts(0, 0) ==
        doctest::Approx(r_off / (r_off + 2 * rp + cfg.sense_resistance)).epsilon(1e-9));
}

TEST_CASE("zero parasitic resistance gives a uniform map") {
  CrossbarConfig cfg = config_for(45, 8);
  cfg.tech.unit_parasitic_resistance = 0.0;
  const auto vm = solve_voltage_map(cfg, uniform_states(8, ResistanceState::LRS1));
  CHECK((vm.volts == vm.volts(0, 0)).all());
  // divider against the column's parallel cell load
  const double gsum = 8.0 / cfg.cell_on_resistance;
  const double vb = cfg.drive_voltage * gsum / (1.0 / cfg.sense_resistance + gsum);
  CHECK(vm.volts(0, 0) == doctest::Approx(cfg.drive_voltage - vb).epsilon(1e-12));
}

TEST_CASE("voltage map structure at a small size") {
  CrossbarConfig cfg = config_for(45, 16);
  const auto vm = solve_voltage_map(cfg, uniform_states(16, ResistanceState::LRS1));

  CHECK(vm.kirchhoff_residual < 1e-9);
  CHECK((vm.volts > 0.0).all());
  CHECK((vm.volts <= temperature_adjusted_drive(cfg)).all());
  // bottom-left is the shortest path, top-right the longest
  CHECK(vm.volts(15, 0) >= vm.volts(0, 15));
  // monotone non-increasing toward the top (k decreasing) and the right
  for (int k = 15; k > 0; --k) {
    for (int l = 0; l < 16; ++l) CHECK(vm.volts(k, l) >= vm.volts(k - 1, l));
  }
  for (int k = 0; k < 16; ++k) {
    for (int l = 0; l + 1 < 16; ++l) CHECK(vm.volts(k, l) >= vm.volts(k, l + 1));
  }
}

TEST_CASE("paper corner anchors at M = 128") {
  const auto v65 =
      solve_voltage_map(config_for(65, 128), uniform_states(128, ResistanceState::LRS1));
  CHECK(v65.volts.maxCoeff() == doctest::Approx(0.57).epsilon(0.005));

  const auto v16 =
      solve_voltage_map(config_for(16, 128), uniform_states(128, ResistanceState::LRS1));
  CHECK(v16.volts.maxCoeff() == doctest::Approx(1.1).epsilon(0.005));

  // voltage spread grows with technology scaling at identical drive
  CrossbarConfig same65 = config_for(65, 128);
  CrossbarConfig same16 = config_for(16, 128);
  same16.drive_voltage = same65.drive_voltage;
  const auto a = solve_voltage_map(same65, uniform_states(128, ResistanceState::LRS1));
  const auto b = solve_voltage_map(same16, uniform_states(128, ResistanceState::LRS1));
  CHECK(b.volts.maxCoeff() - b.volts.minCoeff() > a.volts.maxCoeff() - a.volts.minCoeff());
}

TEST_CASE("temperature raises every cell voltage") {
  const auto cold =
      solve_voltage_map(config_for(45, 16, 25.0), uniform_states(16, ResistanceState::LRS1));
  const auto hot =
      solve_voltage_map(config_for(45, 16, 50.0), uniform_states(16, ResistanceState::LRS1));
  CHECK((hot.volts > cold.volts).all());
}

TEST_CASE("mixed-state map stays within bounds") {
  CrossbarConfig cfg = config_for(32, 8);
  StateGrid states = uniform_states(8, ResistanceState::LRS1);
  for (int k = 0; k < 8; ++k) states(k, (k * 3) % 8) = static_cast<std::uint8_t>(ResistanceState::HRS);
  const auto vm = solve_voltage_map(cfg, states);
  CHECK(vm.kirchhoff_residual < 1e-9);
  CHECK((vm.volts > 0.0).all());
  CHECK((vm.volts <= temperature_adjusted_drive(cfg)).all());
}

TEST_CASE("dimension mismatch is rejected") {
  CHECK_THROWS_AS(solve_voltage_map(config_for(45, 8), uniform_states(4, ResistanceState::HRS)),
                  ConfigError);
}

TEST_CASE("endurance maps compose device model and voltage solve at M = 1") {
  CrossbarConfig cfg = config_for(65, 1);
  const DeviceParams dev;
  const auto maps = build_endurance_maps(cfg, dev);
  const auto vh = solve_voltage_map(cfg, uniform_states(1, ResistanceState::HRS));
  const auto vl = solve_voltage_map(cfg, uniform_states(1, ResistanceState::LRS1));
  const double t_kelvin = 273.15 + cfg.temperature_c;
  CHECK(maps.hrs(0, 0) ==
        read_endurance(ResistanceState::HRS, vh.volts(0, 0), t_kelvin, dev));
  CHECK(maps.lrs(0, 0) ==
        read_endurance(ResistanceState::LRS1, vl.volts(0, 0), t_kelvin, dev));
}

TEST_CASE("endurance map orderings") {
  const auto maps = build_endurance_maps(config_for(45, 128));
  // weak corner is bottom-left (highest voltage), strong corner top-right
  CHECK(maps.hrs(127, 0) < maps.hrs(0, 127));
  CHECK(maps.lrs(127, 0) < maps.lrs(0, 127));
  CHECK((maps.lrs >= maps.hrs).all());
}

TEST_CASE("raising the drive voltage lowers every endurance entry") {
  CrossbarConfig cfg = config_for(45, 8);
  const auto base = build_endurance_maps(cfg);
  cfg.drive_voltage *= 1.2;
  const auto hot = build_endurance_maps(cfg);
  CHECK((hot.hrs < base.hrs).all());
  CHECK((hot.lrs < base.lrs).all());
}

TEST_CASE("delay map follows the path-length formula") {
  CrossbarConfig cfg = config_for(45, 2);
  const auto d = build_delay_map(cfg, 0.1, 0.01);
  // rows top to bottom; bottom-left (1,0) is the shortest path
  CHECK(d.ms(1, 0) == doctest::Approx(0.10));
  CHECK(d.ms(0, 0) == doctest::Approx(0.11));
  CHECK(d.ms(1, 1) == doctest::Approx(0.11));
  CHECK(d.ms(0, 1) == doctest::Approx(0.12));

  CrossbarConfig big = config_for(45, 128);
  const auto d128 = build_delay_map(big);
  CHECK(d128.ms(127, 0) == doctest::Approx(d128.base_delay_ms));
  CHECK(d128.ms(0, 127) ==
        doctest::Approx(d128.base_delay_ms + 2 * 127 * d128.per_segment_delay_ms));
  // default constants put the longest/shortest ratio near 1.25 at M = 128
  CHECK(d128.ms.maxCoeff() / d128.ms.minCoeff() == doctest::Approx(1.25).epsilon(0.01));
}

TEST_CASE("map exports are byte-stable") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "enduromap_crossbar_test";
  fs::create_directories(dir);

  CrossbarConfig cfg = config_for(45, 8);
  const auto vm = solve_voltage_map(cfg, uniform_states(8, ResistanceState::LRS1));
  write_grid_csv(vm.volts, dir / "a.csv");
  write_grid_csv(vm.volts, dir / "b.csv");
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));

  write_map_metadata_json(cfg, "voltage_lrs", vm.volts, dir / "a.json");
  write_map_metadata_json(cfg, "voltage_lrs", vm.volts, dir / "b.json");
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  CHECK(slurp(dir / "a.json").find("\"technology_nm\": 45") != std::string::npos);
  fs::remove_all(dir);
}
