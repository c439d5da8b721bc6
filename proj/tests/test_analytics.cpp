#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "fixtures.hpp"
#include "softics/analytics.hpp"
#include "softics/error.hpp"

using namespace softics;
using namespace softics::analytics;

namespace {

DensityResult baseline_density() {
  DensityOptions o;
  o.from = SimTime{0};
  o.to = std::chrono::seconds(60);
  return packet_rate_density(fixtures::cached_run("baseline").log, o);
}

// Packets per second a device originates in steady state under the 4-packet
// rule: each transaction costs the client a request and an ACK, the server a
// response and an ACK.
constexpr double kPlcDerived = 2 * 40 + 2 * 3 * 2 + 2 * 5 * 1;
constexpr double kIoDerived = 2 * 20;
constexpr double kHmiDerived = 2 * 3 * 2;
constexpr double kScadaDerived = 2 * 5 * 1;

}  // namespace

TEST_CASE("modal rates match the poll schedule arithmetic") {
  const auto d = baseline_density();
  CHECK(d.devices.at("plc").mode == doctest::Approx(kPlcDerived).epsilon(0.03));
  CHECK(d.devices.at("io1").mode == doctest::Approx(kIoDerived).epsilon(0.03));
  CHECK(d.devices.at("io2").mode == doctest::Approx(kIoDerived).epsilon(0.03));
  CHECK(d.devices.at("hmi").mode == doctest::Approx(kHmiDerived).epsilon(0.1));
  CHECK(d.devices.at("scada").mode == doctest::Approx(kScadaDerived).epsilon(0.1));
}

TEST_CASE("modal rates fall within half of the reference magnitudes") {
  const auto d = baseline_density();
  const std::map<std::string, double> reference{{"plc", 110}, {"io1", 55}, {"io2", 55}, {"scada", 20}};
  for (const auto& [name, value] : reference) {
    CAPTURE(name);
    const double mode = d.devices.at(name).mode;
    CHECK(mode >= 0.5 * value);
    CHECK(mode <= 1.5 * value);
  }
  const double plc = d.devices.at("plc").mode;
  const double io1 = d.devices.at("io1").mode;
  const double io2 = d.devices.at("io2").mode;
  const double scada = d.devices.at("scada").mode;
  CHECK(plc > io1);
  CHECK(plc > io2);
  CHECK(std::min(io1, io2) > scada);
  CHECK(std::abs(io1 - io2) / std::max(io1, io2) < 0.10);
}

TEST_CASE("density accounting reconciles with the raw log") {
  const auto& log = fixtures::cached_run("baseline").log;
  DensityOptions o;
  o.from = SimTime{0};
  o.to = std::chrono::seconds(60);
  const auto d = packet_rate_density(log, o);

  std::map<std::string, std::uint64_t> direct;
  std::uint64_t all = 0;
  for (const auto& line : log.lines()) {
    const json j = json::parse(line);
    if (j["c"] != "packet") continue;
    const auto t = j["t"].get<std::int64_t>();
    if (t < 0 || t >= 60'000'000) continue;
    ++direct[j["p"]["sender"].get<std::string>()];
    ++all;
  }
  CHECK(d.total_packets == all);
  std::uint64_t sum = 0;
  for (const auto& [name, s] : d.devices) {
    CAPTURE(name);
    CHECK(s.samples.size() == 60);
    double samples = 0;
    for (double v : s.samples) samples += v;
    CHECK(samples == doctest::Approx(static_cast<double>(s.total)));
    CHECK(s.total == direct[name]);
    CHECK(s.mean == doctest::Approx(static_cast<double>(s.total) / 60.0));
    sum += s.total;
  }
  CHECK(sum == all);
}

TEST_CASE("unattacked PLC to IO latency stays below two milliseconds") {
  const auto& log = fixtures::cached_run("baseline").log;
  for (const char* io : {"192.168.0.51", "192.168.0.52"}) {
    TransactionFilter f;
    f.client = "plc";
    f.server = io;
    const auto s = latency_stats(log, f);
    CAPTURE(io);
    CHECK(s.count > 2000);
    CHECK(s.p95_ms < 2.0);
    CHECK(s.p50_ms <= s.p95_ms);
    CHECK(s.p95_ms <= s.max_ms);
  }
}

TEST_CASE("latency summary edge cases") {
  const auto one = summarize_latencies({3.25});
  CHECK(one.count == 1);
  CHECK(one.p50_ms == 3.25);
  CHECK(one.p95_ms == 3.25);
  CHECK(one.max_ms == 3.25);
  CHECK(summarize_latencies({}).empty());
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  const auto s = summarize_latencies(v);
  CHECK(s.p50_ms == 50);
  CHECK(s.p95_ms == 95);
  CHECK(s.max_ms == 100);
}

TEST_CASE("idle and empty inputs give zeros") {
  EventLog empty;
  CHECK(packet_rate_density(empty).devices.empty());
  TransactionFilter f;
  f.client = "nobody";
  CHECK(latency_stats(fixtures::cached_run("baseline").log, f).empty());
  DensityOptions o;
  o.from = std::chrono::seconds(10);
  o.to = std::chrono::seconds(10);
  CHECK(packet_rate_density(fixtures::cached_run("baseline").log, o).total_packets == 0);
  o.window = Duration{0};
  CHECK_THROWS_AS(packet_rate_density(empty, o), ArgumentError);
  CHECK(raw_mode({}) == 0);
}

TEST_CASE("raw mode and kernel density") {
  CHECK(raw_mode({1, 2, 2, 3, 3, 3}) == 3);
  // Ties resolve to the smallest value.
  CHECK(raw_mode({5, 4}) == 4);
  const auto curve = kde_curve({10, 10, 10}, 2.0);
  REQUIRE_FALSE(curve.empty());
  double area = 0;
  double peak_x = 0;
  double peak = 0;
  for (const auto& [x, density] : curve) {
    area += density;
    if (density > peak) {
      peak = density;
      peak_x = x;
    }
  }
  CHECK(peak_x == 10);
  CHECK(peak == doctest::Approx(1.0 / (2.0 * std::sqrt(2 * 3.141592653589793))));
  CHECK(area == doctest::Approx(1.0).epsilon(0.01));
  CHECK(kde_curve({}, 2.0).empty());
}

TEST_CASE("impact classification from the ground-truth log") {
  SUBCASE("limit switch spoof") {
    const auto r = impact_report(fixtures::cached_run("mitm-crash").log);
    CHECK(r.has(Impact::damaged));
    CHECK(r.cia == "CIA");
    CHECK(r.stride == "STRIDE");
    auto has = [&](const std::string& a) { return std::find(r.artifacts.begin(), r.artifacts.end(), a) != r.artifacts.end(); };
    CHECK(has("arp binding change"));
    CHECK(has("modbus value rewritten in transit"));
  }
  SUBCASE("PLC flood") {
    const auto r = impact_report(fixtures::cached_run("dos-plc").log);
    CHECK(r.has(Impact::halted));
    CHECK_FALSE(r.has(Impact::damaged));
    CHECK(r.cia == "A");
    CHECK(r.stride == "D");
  }
  SUBCASE("HMI blinding") {
    const auto r = impact_report(fixtures::cached_run("hmi-blind").log);
    CHECK(r.has(Impact::blinded));
  }
  SUBCASE("historian tamper") {
    const auto r = impact_report(fixtures::cached_run("scada-tamper").log);
    CHECK(r.has(Impact::tampered));
  }
  SUBCASE("clean run") {
    const auto r = impact_report(fixtures::cached_run("baseline").log);
    REQUIRE(r.classes.size() == 1);
    CHECK(r.classes[0] == Impact::normal);
    CHECK(r.artifacts.empty());
    CHECK(r.attacks.empty());
  }
}

TEST_CASE("density export") {
  fixtures::TempDir tmp;
  const auto d = baseline_density();
  export_density_csv(d, tmp / "density.csv");
  const std::string csv = fixtures::slurp(tmp / "density.csv");
  CHECK(csv.find("plc") != std::string::npos);
  const json j = density_json(d);
  CHECK(j["devices"]["plc"]["mode"].get<double>() == d.devices.at("plc").mode);
}
