#include <doctest.h>

#include <random>

#include "softics/error.hpp"
#include "softics/process.hpp"

using namespace softics;
using namespace softics::process;

namespace {

ProcessState at(double x, double z, ConveyorCmd c = ConveyorCmd::stop, PunchCmd p = PunchCmd::stop) {
  ProcessState s;
  s.x = x;
  s.z = z;
  s.conveyor_cmd = c;
  s.punch_cmd = p;
  return s;
}

void check_close(const ProcessState& a, const ProcessState& b) {
  CHECK(a.x == doctest::Approx(b.x).epsilon(1e-9));
  CHECK(a.z == doctest::Approx(b.z).epsilon(1e-9));
  CHECK(a.damaged == b.damaged);
  CHECK(a.damage_reason == b.damage_reason);
}

}  // namespace

TEST_CASE("conveyor forward for one second moves twenty units") {
  const ProcessConfig cfg;
  CHECK(step_seconds(at(50, 100, ConveyorCmd::fwd), cfg, 1.0).x == doctest::Approx(70));
  CHECK(step_seconds(at(50, 100, ConveyorCmd::rev), cfg, 1.0).x == doctest::Approx(30));
  CHECK(step_seconds(at(95, 100, ConveyorCmd::fwd), cfg, 1.0).x == doctest::Approx(100));
}

TEST_CASE("punch driven down through the floor crashes and clamps at zero") {
  const ProcessConfig cfg;
  const auto s = step_seconds(at(50, 5, ConveyorCmd::stop, PunchCmd::down), cfg, 0.2);
  CHECK(s.z == 0.0);
  CHECK(s.damaged);
  CHECK(s.damage_reason == "punch crash");
  CHECK(s.damaged_component == Component::punch);
}

TEST_CASE("motion stops at the impact instant") {
  const ProcessConfig cfg;
  // Impact after 0.1 s; the belt only moves for that long.
  const auto s = step_seconds(at(50, 5, ConveyorCmd::fwd, PunchCmd::down), cfg, 0.5);
  CHECK(s.x == doctest::Approx(52));
}

TEST_CASE("stopped motors leave the state unchanged") {
  const ProcessConfig cfg;
  const auto s0 = at(33, 44);
  CHECK(step_seconds(s0, cfg, 3.0) == s0);
}

TEST_CASE("punch up clamps harmlessly at the top") {
  const ProcessConfig cfg;
  const auto s = step_seconds(at(5, 99, ConveyorCmd::stop, PunchCmd::up), cfg, 1.0);
  CHECK(s.z == 100.0);
  CHECK_FALSE(s.damaged);
}

TEST_CASE("sensor readout examples") {
  const ProcessConfig cfg;
  auto r = read_sensors(at(5, 50), cfg);
  CHECK(r.barrier_a);
  CHECK_FALSE(r.barrier_b);
  r = read_sensors(at(50, 100), cfg);
  CHECK(r.limit_upper);
  CHECK_FALSE(r.limit_lower);
  auto gone = at(95, 0);
  gone.workpiece_present = false;
  r = read_sensors(gone, cfg);
  CHECK_FALSE(r.barrier_a);
  CHECK_FALSE(r.barrier_b);
  CHECK(r.limit_lower);
  CHECK(read_sensors(at(97, 50), cfg).barrier_b);
  CHECK_FALSE(read_sensors(at(97.01, 50), cfg).barrier_b);
}

TEST_CASE("config validation names the offending field") {
  ProcessConfig cfg;
  cfg.belt_speed = 0;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "process.belt_speed");
  }
  ProcessConfig b;
  b.barrier_b_pos = 120;
  CHECK_THROWS_AS(b.validate(), ConfigError);
  ProcessConfig t;
  t.tick = Duration{0};
  CHECK_THROWS_AS(t.validate(), ConfigError);
  CHECK_NOTHROW(ProcessConfig{}.validate());
}

TEST_CASE("randomized command sequences keep the plant bounded and damage latched") {
  const ProcessConfig cfg;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> dt(0.0005, 0.5);
  int crashes = 0;
  for (int run = 0; run < 40; ++run) {
    ProcessState s = initial_state(cfg);
    s.x = std::uniform_real_distribution<double>(0, cfg.conveyor_length)(rng);
    s.z = std::uniform_real_distribution<double>(0, cfg.punch_travel)(rng);
    bool was_damaged = false;
    for (int i = 0; i < 500; ++i) {
      s.conveyor_cmd = static_cast<ConveyorCmd>(rng() % 3);
      // Bias towards up so runs survive long enough to explore.
      const auto r = rng() % 5;
      s.punch_cmd = r == 0 ? PunchCmd::down : r < 3 ? PunchCmd::up : PunchCmd::stop;
      if (rng() % 50 == 0) s.workpiece_present = !s.workpiece_present;
      const ProcessState before = s;
      s = step_seconds(s, cfg, dt(rng));
      REQUIRE(s.x >= 0.0);
      REQUIRE(s.x <= cfg.conveyor_length);
      REQUIRE(s.z >= 0.0);
      REQUIRE(s.z <= cfg.punch_travel);
      if (was_damaged) {
        REQUIRE(s.damaged);
        REQUIRE(s.x == before.x);
        REQUIRE(s.z == before.z);
      }
      was_damaged = s.damaged;
    }
    crashes += was_damaged;
  }
  CHECK(crashes > 0);
}

TEST_CASE("two steps of dt equal one step of 2 dt under constant commands") {
  const ProcessConfig cfg;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> pos(0, 100);
  std::uniform_real_distribution<double> dt(0.001, 2.0);
  for (int i = 0; i < 10000; ++i) {
    ProcessState s = at(pos(rng), pos(rng), static_cast<ConveyorCmd>(rng() % 3), static_cast<PunchCmd>(rng() % 3));
    s.workpiece_present = rng() % 4 != 0;
    const double h = dt(rng);
    const auto twice = step_seconds(step_seconds(s, cfg, h), cfg, h);
    const auto once = step_seconds(s, cfg, 2 * h);
    check_close(twice, once);
  }
}

TEST_CASE("microsecond steps agree with the closed form") {
  const ProcessConfig cfg;
  ProcessState s = at(10, 100, ConveyorCmd::fwd, PunchCmd::down);
  for (int i = 0; i < 150; ++i) s = step(s, cfg, std::chrono::milliseconds(10));
  CHECK(s.x == doctest::Approx(10 + 20 * 1.5));
  CHECK(s.z == doctest::Approx(100 - 50 * 1.5));
}

TEST_CASE("physical injections on the live process") {
  Kernel k;
  Process p(k, ProcessConfig{});
  p.start();

  SUBCASE("removing the workpiece blinds both barriers") {
    p.inject(RemoveWorkpiece{});
    k.run_until(std::chrono::milliseconds(20));
    CHECK_FALSE(p.state().workpiece_present);
    CHECK_FALSE(p.sensors().barrier_a);
    p.inject(PlaceWorkpiece{});
    k.run_until(std::chrono::milliseconds(40));
    CHECK(p.sensors().barrier_a);
  }
  SUBCASE("a forced lower limit lets a descending punch crash") {
    p.inject(ForceSensor{Sensor::limit_lower, false, std::chrono::seconds(5)});
    p.command_punch(PunchCmd::down);
    bool saw_lower = false;
    for (int i = 0; i < 300 && !p.state().damaged; ++i) {
      k.run_until(k.now() + std::chrono::milliseconds(10));
      saw_lower |= p.sensors().limit_lower;
    }
    CHECK_FALSE(saw_lower);
    CHECK(p.state().damaged);
    CHECK(p.state().damage_reason == "punch crash");
    CHECK(k.now() <= std::chrono::milliseconds(2010));
  }
  SUBCASE("forced values expire") {
    p.inject(ForceSensor{Sensor::limit_upper, false, std::chrono::seconds(1)});
    k.run_until(std::chrono::milliseconds(500));
    CHECK_FALSE(p.sensors().limit_upper);
    k.run_until(std::chrono::milliseconds(1500));
    CHECK(p.sensors().limit_upper);
  }
  SUBCASE("destroying the conveyor freezes the belt until reset") {
    p.command_conveyor(ConveyorCmd::fwd);
    k.run_until(std::chrono::milliseconds(500));
    p.inject(Destroy{Component::conveyor});
    const double x = p.state().x;
    CHECK(p.state().damaged);
    k.run_until(std::chrono::seconds(2));
    CHECK(p.state().x == x);
    CHECK(p.state().damaged);
    p.reset_process();
    CHECK_FALSE(p.state().damaged);
  }
  CHECK_THROWS_AS(component_from_string("gearbox"), ArgumentError);
  CHECK_THROWS_AS(sensor_from_string("thermometer"), ArgumentError);
}

TEST_CASE("damage never clears without reset under random live commands") {
  Kernel k(11);
  Process p(k, ProcessConfig{});
  p.start();
  std::mt19937_64 rng(1);
  bool damaged = false;
  int resets = 0;
  for (int i = 0; i < 10000; ++i) {
    switch (rng() % 8) {
      case 0:
        p.command_punch(PunchCmd::down);
        break;
      case 1:
      case 2:
        p.command_punch(PunchCmd::up);
        break;
      case 3:
        p.command_conveyor(static_cast<ConveyorCmd>(rng() % 3));
        break;
      case 4:
        if (rng() % 20 == 0) p.inject(Destroy{static_cast<Component>(1 + rng() % 2)});
        break;
      case 5:
        if (rng() % 40 == 0) {
          p.reset_process();
          ++resets;
          damaged = false;
        }
        break;
      default:
        p.command_punch(PunchCmd::stop);
    }
    k.run_until(k.now() + std::chrono::milliseconds(10));
    if (damaged) REQUIRE(p.state().damaged);
    damaged = p.state().damaged;
    REQUIRE(p.state().z >= 0);
    REQUIRE(p.state().z <= 100);
  }
  CHECK(resets > 0);
}

TEST_CASE("trace export writes one row per tick") {
  Kernel k;
  Process p(k, ProcessConfig{});
  p.set_trace(true);
  p.start();
  k.run_until(std::chrono::milliseconds(100));
  CHECK(p.trace().size() == 10);
}
