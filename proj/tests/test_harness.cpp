#include "doctest.h"

#include <fstream>
#include <sstream>

#include "civsim/harness.hpp"

using namespace civsim;
using namespace civsim::harness;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "civsim-tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

Report random_report(Rng& rng) {
  std::uniform_int_distribution<int> cols(1, 6), rows(0, 8), kind(0, 3), len(0, 12);
  std::uniform_int_distribution<std::int64_t> ints(-1'000'000'000'000LL, 1'000'000'000'000LL);
  std::uniform_real_distribution<double> reals(-1e6, 1e6);
  std::uniform_int_distribution<int> ch(32, 126);
  Report r("random", {});
  const int nc = cols(rng);
  for (int c = 0; c < nc; ++c) r.columns.push_back("col \"" + std::to_string(c) + "\", x");
  const int nr = rows(rng);
  for (int i = 0; i < nr; ++i) {
    std::vector<Cell> row;
    for (int c = 0; c < nc; ++c) {
      switch (kind(rng)) {
        case 0: row.emplace_back(); break;
        case 1: row.emplace_back(ints(rng)); break;
        case 2: row.emplace_back(i % 3 == 0 ? std::round(reals(rng)) : reals(rng)); break;
        default: {
          std::string s;
          const int n = len(rng);
          for (int k = 0; k < n; ++k) s.push_back(static_cast<char>(ch(rng)));
          row.emplace_back(s);
        }
      }
    }
    r.add_row(std::move(row));
  }
  r.meta = {{"seed", 7}, {"note", "a,b \"c\""}};
  return r;
}

}  // namespace

TEST_CASE("reports round trip byte for byte") {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const auto r = random_report(rng);
    const auto csv = r.to_csv();
    const auto back = Report::from_csv(csv);
    CHECK(back == r);
    CHECK(back.to_csv() == csv);
    const auto js = r.to_json_text();
    const auto back_js = Report::from_json_text(js);
    CHECK(back_js == r);
    CHECK(back_js.to_json_text() == js);
  }
}

TEST_CASE("report cells") {
  Report r("t", {"a", "b"});
  CHECK_THROWS_AS(r.add_row({std::int64_t{1}}), Error);
  r.add_row({1.0, std::string("x")});
  CHECK(r.to_csv().find("1.0,\"x\"") != std::string::npos);
  CHECK(as_double(r.at(0, "a")) == 1.0);
  CHECK(as_string(r.at(0, "b")) == "x");
  CHECK_THROWS_AS(r.at(0, "c"), Error);
  CHECK_THROWS_AS(as_int(r.at(0, "a")), Error);
  Report bad("t", {"a"});
  bad.add_row({std::numeric_limits<double>::infinity()});
  CHECK_THROWS_AS(bad.to_csv(), Error);
  Report nl("t", {"a"});
  nl.add_row({std::string("two\nlines")});
  CHECK_THROWS_AS(nl.to_csv(), Error);
  CHECK_THROWS_AS(Report::from_csv("not a report\n"), Error);
  CHECK_THROWS_AS(Report::from_csv("# civsim.report/1 kind=x\n# meta: {}\n\"a\"\n1,2\n"), Error);
}

TEST_CASE("report files") {
  Report r("t", {"a"});
  r.add_row({std::int64_t{3}});
  const auto both = r.save(scratch("both"));
  REQUIRE(both.size() == 2);
  CHECK(slurp(both[0]) == r.to_csv());
  CHECK(slurp(both[1]) == r.to_json_text());
  const auto one = r.save(scratch("one.json"));
  CHECK(one.size() == 1);
}

TEST_CASE("least squares line") {
  const auto perfect = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
  CHECK(perfect.slope == doctest::Approx(2.0));
  CHECK(perfect.intercept == doctest::Approx(1.0));
  CHECK(perfect.r_squared == doctest::Approx(1.0));
  CHECK(fit_line({1, 2, 3}, {4, 4, 4}).r_squared == 1.0);
  // Sxx = 5, Sxy = 5.5, Syy = 8.75 for this set.
  const auto f = fit_line({0, 1, 2, 3}, {1, 3, 2, 5});
  CHECK(f.slope == doctest::Approx(1.1));
  CHECK(f.intercept == doctest::Approx(1.1));
  CHECK(f.r_squared == doctest::Approx(1.1 * 5.5 / 8.75));
  CHECK_THROWS_AS(fit_line({1}, {1}), Error);
}

TEST_CASE("config errors name the offending field") {
  auto expect = [](const char* text, const char* needle) {
    try {
      simnet::LatencyCalibration::from_json(jsonio::parse_text(text, "calibration"));
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigError);
      CAPTURE(e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect("{", "calibration");
  expect(R"({"schema": "civsim.calibration/1"})", "call_setup");
  auto doc = simnet::LatencyCalibration::load(data_dir() / "calibration.json").to_json();
  doc["hold_toggle_ms"] = -1.0;
  try {
    simnet::LatencyCalibration::from_json(doc);
    FAIL("negative accepted");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("hold_toggle_ms") != std::string::npos);
  }
  CHECK_THROWS_AS(signaling::Topology::from_json(jsonio::parse_text(R"({"schema": "civsim.topology/1",
    "networks": [{"id": "v", "kind": "voip-sip"}], "links": [],
    "endpoints": [{"id": "a", "number": "12x", "name": "A", "profile": "sip", "network": "v"}]})", "t")), Error);
}

TEST_CASE("calibration files round trip") {
  const auto cal = simnet::LatencyCalibration::load(data_dir() / "calibration.json");
  cal.save(scratch("cal.json"));
  CHECK(simnet::LatencyCalibration::load(scratch("cal.json")) == cal);
  CHECK(slurp(scratch("cal.json")) == slurp(data_dir() / "calibration.json"));
  for (const auto& p : simnet::calibration_parameters()) {
    auto c = cal;
    p.set(c, 123.5);
    CHECK(p.get(c) == 123.5);
    CHECK(&simnet::calibration_parameter(p.name) == &p);
  }
}

TEST_CASE("the fit reproduces the shipped calibration") {
  const auto targets = simnet::FitTargets::load(data_dir() / "targets.json");
  const auto bounds = simnet::FitBounds::load(data_dir() / "bounds.json");
  const auto fit = simnet::fit_calibration(targets, bounds);
  CHECK(fit.calibration == simnet::LatencyCalibration::load(data_dir() / "calibration.json"));
  for (const auto& r : fit.residuals) {
    CAPTURE(r.name);
    CHECK(std::abs(r.relative) <= targets.tolerance);
    CHECK(r.simulated_ms == doctest::Approx(r.target_ms * (1.0 + r.relative)));
  }
}

TEST_CASE("unreachable targets are reported as infeasible") {
  auto targets = simnet::FitTargets::load(data_dir() / "targets.json");
  const auto bounds = simnet::FitBounds::load(data_dir() / "bounds.json");
  targets.targets.push_back({"landline too fast", civ::ProfileName::landline_truecall,
                             civ::ProfileName::landline_truecall, std::nullopt, 500.0});
  try {
    simnet::fit_calibration(targets, bounds);
    FAIL("fitted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Infeasible);
  }
  auto noise = bounds.noise;
  noise.fail_mark_ms = 100.0;
  noise.pass_mark_ms = 20.0;
  noise.snr_min_db = 6.0;
  CHECK_THROWS_AS(simnet::calibrate_noise(noise), Error);
}

TEST_CASE("run command") {
  auto sc = simnet::Scenario::load(data_dir() / "scenarios" / "sip-sip.json");
  sc.repeat = 3;
  CommonOptions opts;
  opts.out = scratch("run");
  const auto r = cmd_run(sc, opts);
  REQUIRE(r.rows.size() == 4);
  CHECK(as_string(r.at(3, "row")) == "mean");
  for (std::size_t i = 0; i < 3; ++i) CHECK(as_string(r.at(i, "outcome")) == "Verified");
  CHECK(as_double(r.at(0, "total_ms")) == doctest::Approx(4700.0).epsilon(0.05));
  CHECK(slurp(scratch("run.csv")) == r.to_csv());
  CHECK(std::filesystem::exists(scratch("run.runs.jsonl")));
  // Same seed, same report.
  CHECK(cmd_run(sc, {}).to_csv() == r.to_csv());
  opts.seed = 5;
  opts.out.reset();
  CHECK(cmd_run(sc, opts).meta != r.meta);
}

TEST_CASE("sweeps") {
  const auto r = cmd_sweep_n(std::nullopt, {{civ::ProfileName::sip, civ::ProfileName::sip}}, 1, 4, {});
  REQUIRE(r.rows.size() == 5);
  CHECK(as_string(r.at(4, "row")) == "fit");
  CHECK(as_double(r.at(4, "r_squared")) > 0.99);
  CHECK_THROWS_AS(cmd_sweep_n(std::nullopt, {}, 3, 3, {}), Error);
  CHECK_THROWS_AS(cmd_sweep_n(std::nullopt, {}, 0, 3, {}), Error);

  const auto m = cmd_sweep_markspace({40, 100}, {150}, 20, {});
  REQUIRE(m.rows.size() == 2);
  CHECK(as_int(m.at(1, "successes")) == 20);
  CHECK_THROWS_AS(cmd_sweep_markspace({40}, {150}, 10, {}), Error);
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<int> hit(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hit[i] += 1; });
  CHECK(std::count(hit.begin(), hit.end(), 1) == 100);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw Error(ErrorCode::InvalidState, "boom");
                  }),
                  Error);
}
