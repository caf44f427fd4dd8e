#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fraccal/harness.hpp"
#include "oracles.hpp"

using namespace fraccal;

namespace {

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

ExperimentConfig small_config(const std::string& example = "ex4.1") {
  ExperimentConfig c;
  c.example = example;
  c.N = 32;
  c.delta = 1e-3;
  c.max_iter = 15;
  return c;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("smooth step") {
    CHECK(smooth_step(-1.0) == 0.0);
    CHECK(smooth_step(0.0) == 0.0);
    CHECK(smooth_step(1.0) == 1.0);
    CHECK(smooth_step(2.0) == 1.0);
    CHECK(smooth_step(0.5) == doctest::Approx(0.5));
    for (double t = 0.01; t < 1.0; t += 0.01) {
      CHECK(smooth_step(t) + smooth_step(1.0 - t) == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(smooth_step(t + 0.005) >= smooth_step(t));
    }
  }

  TEST_CASE("mollified indicator in 1D") {
    const auto set = ExteriorSet::symmetric_1d(1.25, 3.0);
    const auto f = mollified_indicator(set, 0.2);
    CHECK(f(2.0, 0.0) == 1.0);
    CHECK(f(-2.0, 0.0) == 1.0);
    CHECK(f(1.45, 0.0) == doctest::Approx(1.0));
    CHECK(f(1.25, 0.0) == 0.0);
    CHECK(f(1.0, 0.0) == 0.0);
    CHECK(f(0.0, 0.0) == 0.0);
    CHECK(f(3.0, 0.0) == 0.0);
    CHECK(f(1.3, 0.0) > 0.0);
    CHECK(f(1.3, 0.0) < 1.0);
    CHECK(set.contains(2.0));
    CHECK_FALSE(set.contains(1.0));
    CHECK(set.thickness() == doctest::Approx(1.75));
    CHECK_THROWS_AS(mollified_indicator(set, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(mollified_indicator(set, 0.0), std::invalid_argument);
  }

  TEST_CASE("mollified indicator in 2D") {
    const auto set = ExteriorSet::frame_2d(1.25, 3.0);
    const auto f = mollified_indicator(set, 0.2);
    CHECK(f(2.0, 0.0) == doctest::Approx(1.0));
    CHECK(f(2.0, 2.0) == doctest::Approx(1.0));
    CHECK(f(0.0, 0.0) == 0.0);
    CHECK(f(1.2, 0.5) == 0.0);
    CHECK(f(0.5, -1.25) == 0.0);
    CHECK(f(2.9, 0.0) < 1.0);
    CHECK(f(3.0, 1.0) == 0.0);
    for (double x = -3.0; x <= 3.0; x += 0.1)
      for (double y = -3.0; y <= 3.0; y += 0.1) {
        const double v = f(x, y);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        if (std::max(std::abs(x), std::abs(y)) <= 1.25) CHECK(v == 0.0);
      }
  }

  TEST_CASE("presets") {
    const auto p41 = make_preset(PresetId::Ex41);
    CHECK(p41.dim == 1);
    CHECK(p41.s == 0.4);
    CHECK(p41.q_true(0.5, 0.0) == doctest::Approx(1.0));
    CHECK(p41.noise_levels.size() == 5);
    const auto p42 = make_preset(PresetId::Ex42);
    CHECK(p42.q_true(0.0, 0.0) == doctest::Approx(5.625));
    CHECK(p42.q_true(0.8, 0.0) == 0.0);
    const auto p43 = make_preset(PresetId::Ex43);
    CHECK(p43.q_true(0.2, 0.0) == 1.0);
    CHECK(p43.q_true(0.7, 0.0) == 0.0);
    const auto p44 = make_preset(PresetId::Ex44);
    CHECK(p44.dim == 2);
    CHECK(p44.s == 0.5);
    CHECK(p44.N == 64);
    CHECK(p44.alpha_c == 0.1);
    CHECK(p44.stop_factor == 10.0);
    CHECK(p44.max_outer_iter == 100);
    CHECK(p44.q_true(0.0, 0.0) == doctest::Approx(100.0 * std::pow(0.5625, 6)));
    CHECK(p44.q_true(0.8, 0.0) == 0.0);
    for (auto id : {PresetId::Ex41, PresetId::Ex42, PresetId::Ex43, PresetId::Ex44, PresetId::Custom})
      CHECK(parse_preset(to_string(id)) == id);
    CHECK_THROWS_AS(parse_preset("ex9"), std::invalid_argument);
  }

  TEST_CASE("build_spec geometry") {
    const auto spec = build_spec(make_preset(PresetId::Ex41), 64, 0.25);
    CHECK_NOTHROW(spec.validate());
    CHECK(spec.W1 == spec.W2);
    for (const auto& n : spec.W2) CHECK(std::abs(spec.grid.coord(n.i)) > 1.25);
    CHECK(spec.f(2.0, 0.0) == 1.0);
  }

  TEST_CASE("noise generation") {
    const NodeSet pts(200, Node{});
    const std::vector<double> clean(200, 1.0);
    const auto a = gen_noise(pts, clean, 1e-3, 42);
    const auto b = gen_noise(pts, clean, 1e-3, 42);
    const auto c = gen_noise(pts, clean, 1e-3, 43);
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);
    CHECK(a.delta == 1e-3);
    CHECK(a.seed == 42);
    double mean = 0.0;
    for (double v : a.values) {
      CHECK(std::abs(v - 1.0) <= 1e-3);
      mean += v - 1.0;
    }
    CHECK(std::abs(mean / 200) < 2e-4);
    // reference draw: first value from mt19937_64 seeded with 42
    std::mt19937_64 rng(42);
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    CHECK(a.values[0] == 1.0 + 1e-3 * (2.0 * u - 1.0));
    CHECK(gen_noise(pts, clean, 0.0, 1).values == clean);
    CHECK_THROWS_AS(gen_noise(pts, clean, -1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(gen_noise(pts, std::vector<double>(3), 1.0, 1), std::invalid_argument);
    CHECK(uniform53(0) == 0.0);
    CHECK(uniform53(~0ULL) < 1.0);
  }

  TEST_CASE("config parsing") {
    std::istringstream in(
        "# comment\n"
        "example = ex4.4\n"
        "N=32   # trailing\n"
        "Data_N = 64\n"
        "delta = 1e-4\n"
        "alpha-rule = 0.5*delta^2\n"
        "seed = 7\n"
        "max_iter = 12\n"
        "eps = 0.2\n"
        "rtol = 1e-9\n"
        "allow-inverse-crime = yes\n"
        "format = json\n"
        "out = /tmp/x\n"
        "deltas = 1e-3, 1e-4,1e-5\n");
    const auto c = parse_config(in);
    CHECK(c.example == "ex4.4");
    CHECK(*c.N == 32);
    CHECK(*c.data_N == 64);
    CHECK(*c.delta == 1e-4);
    CHECK(*c.alpha_c == 0.5);
    CHECK(c.seed == 7);
    CHECK(*c.max_iter == 12);
    CHECK(*c.eps == 0.2);
    CHECK(c.rtol == 1e-9);
    CHECK(c.allow_inverse_crime);
    CHECK(c.format == "json");
    CHECK(c.out_dir == "/tmp/x");
    CHECK(c.deltas == std::vector<double>{1e-3, 1e-4, 1e-5});

    ExperimentConfig d;
    d.set("alpha-rule", "delta^2");
    CHECK(*d.alpha_c == 1.0);
    CHECK_THROWS_AS(d.set("alpha-rule", "delta^3"), std::invalid_argument);
    CHECK_THROWS_AS(d.set("alpha-rule", "-1*delta^2"), std::invalid_argument);
    CHECK_THROWS_AS(d.set("N", "3.5"), std::invalid_argument);
    CHECK_THROWS_AS(d.set("delta", "abc"), std::invalid_argument);
    CHECK_THROWS_AS(d.set("delta", "-1"), std::invalid_argument);
    CHECK_THROWS_AS(d.set("format", "xml"), std::invalid_argument);
    CHECK_THROWS_AS(d.set("colour", "red"), std::invalid_argument);
    CHECK_THROWS_AS(d.set("example", "ex5"), std::invalid_argument);
    std::istringstream bad("N 32\n");
    CHECK_THROWS_AS(parse_config(bad), std::invalid_argument);
    CHECK_THROWS(load_config("/nonexistent/path.cfg"));
  }

  TEST_CASE("environment overrides") {
    ::setenv("FRACCALTEST_DELTA", "3e-4", 1);
    ::setenv("FRACCALTEST_ALPHA_RULE", "2*delta^2", 1);
    ::setenv("FRACCALTEST_N", "48", 1);
    const auto c = apply_environment({}, "FRACCALTEST_");
    CHECK(*c.delta == 3e-4);
    CHECK(*c.alpha_c == 2.0);
    CHECK(*c.N == 48);
    ::setenv("FRACCALTEST_SEED", "x", 1);
    CHECK_THROWS_AS(apply_environment({}, "FRACCALTEST_"), std::invalid_argument);
    for (const char* k : {"FRACCALTEST_DELTA", "FRACCALTEST_ALPHA_RULE", "FRACCALTEST_N", "FRACCALTEST_SEED"})
      ::unsetenv(k);
  }

  TEST_CASE("pearson") {
    const std::vector<double> a{1, 2, 3, 4};
    const std::vector<double> b{2, 4, 6, 8};
    const std::vector<double> c{4, 3, 2, 1};
    const std::vector<double> d{1, 3, 2, 4};
    CHECK(pearson(a, b) == doctest::Approx(1.0));
    CHECK(pearson(a, c) == doctest::Approx(-1.0));
    // centred products sum to 4, both variances to 5
    CHECK(pearson(a, d) == doctest::Approx(0.8));
    CHECK_THROWS(pearson(std::vector<double>{1}, std::vector<double>{1}));
  }

  TEST_CASE("inverse crime guard") {
    auto c = small_config();
    c.data_N = 32;
    CHECK_THROWS_AS(run_experiment(c), std::invalid_argument);
    c.data_N = 48;
    CHECK_THROWS_AS(run_experiment(c), std::invalid_argument);
    c.data_N = 32;
    c.allow_inverse_crime = true;
    CHECK_NOTHROW(run_experiment(c));
  }

  TEST_CASE("run record contents, JSON round trip and CSV rows") {
    const auto c = small_config();
    const auto rec = run_experiment(c);
    CHECK(rec.preset == "ex4.1");
    CHECK(rec.N == 32);
    CHECK(rec.data_N == 64);
    CHECK(rec.alpha == doctest::Approx(1e-6));
    CHECK(rec.stop_threshold == doctest::Approx(2e-6));
    CHECK(rec.x.size() == 33);
    CHECK(rec.q_rec.size() == 33);
    CHECK(rec.trace.size() == static_cast<std::size_t>(rec.iterations));
    CHECK(rec.iterations <= 15);
    for (double n : rec.noise) CHECK(std::abs(n) <= 1e-3);
    CHECK(rec.error.empty());

    const auto text = record_to_json(rec, &c);
    CHECK(record_from_json(text) == rec);
    CHECK(text.find("git_hash") != std::string::npos);

    std::ostringstream a;
    write_reconstruction_csv(a, rec);
    CHECK(count_lines(a.str()) == 34);
    CHECK(a.str().rfind("x,q_true,q_rec,abs_err\n", 0) == 0);
    std::ostringstream t;
    write_trace_csv(t, rec);
    CHECK(count_lines(t.str()) == 1 + rec.iterations);

    // identical seeds give identical records apart from timings
    auto again = run_experiment(c);
    CHECK(again.noise == rec.noise);
    CHECK(again.q_rec == rec.q_rec);
    CHECK(again.linf_error == rec.linf_error);
  }

  TEST_CASE("export writes files") {
    auto c = small_config();
    const auto dir = std::filesystem::temp_directory_path() / "fraccal_export_test";
    std::filesystem::remove_all(dir);
    c.out_dir = dir.string();
    auto rec = run_experiment(c);
    export_record(rec, c);
    REQUIRE(rec.outputs.size() == 2);
    for (const auto& p : rec.outputs) CHECK(std::filesystem::exists(p));
    CHECK(rec.outputs[0].find("ex4.1_delta1e-03_seed1_reconstruction.csv") != std::string::npos);
    c.format = "json";
    RunRecord rec2 = rec;
    rec2.outputs.clear();
    export_record(rec2, c);
    REQUIRE(rec2.outputs.size() == 1);
    std::ifstream in(rec2.outputs[0]);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(record_from_json(ss.str()).q_rec == rec.q_rec);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("stability sweep") {
    auto c = small_config();
    c.deltas = {1e-2, 1e-3};
    CHECK_THROWS_AS(stability_sweep(c), std::invalid_argument);
    c.deltas = {1e-2, 1e-4, 1e-3};
    std::vector<RunRecord> recs;
    const auto rows = stability_sweep(c, &recs);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].delta == 1e-4);
    CHECK(rows[2].delta == 1e-2);
    CHECK(rows[0].inv_log_delta == doctest::Approx(0.25));
    CHECK(recs.size() == 3);
    std::ostringstream os;
    write_sweep_csv(os, rows);
    CHECK(count_lines(os.str()) == 4);
    CHECK(sweep_to_json(rows).find("\"rows\"") != std::string::npos);
    c.deltas = {0.0, 1e-3, 1e-4};
    CHECK_THROWS_AS(stability_sweep(c), std::invalid_argument);
  }

  TEST_CASE("2D experiment runs at a small size") {
    auto c = small_config("ex4.4");
    c.N = 16;
    c.delta = 1e-4;
    c.max_iter = 5;
    const auto rec = run_experiment(c);
    CHECK(rec.dim == 2);
    CHECK(rec.x.size() == 17u * 17u);
    CHECK(rec.y.size() == rec.x.size());
    CHECK(rec.alpha == doctest::Approx(1e-9));
    CHECK(std::isfinite(rec.linf_error));
  }
}
