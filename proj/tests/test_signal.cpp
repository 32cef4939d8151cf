#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "pdc/error.hpp"
#include "pdc/signal.hpp"

using namespace pdc;

namespace {

Recording white_recording(std::size_t n, std::size_t m, double fs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  SampleMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = normal(rng);
  }
  std::vector<std::string> labels;
  for (std::size_t c = 0; c < m; ++c) labels.push_back("ch" + std::to_string(c));
  return Recording(std::move(x), fs, labels);
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected pdc::Error");
  return ErrorKind::pipeline;
}

}  // namespace

TEST_CASE("Recording validates its invariants") {
  CHECK(kind_of([] { Recording(SampleMatrix::Zero(4, 2), 100.0, {"a"}); }) == ErrorKind::argument);
  CHECK(kind_of([] { Recording(SampleMatrix::Zero(4, 2), 0.0, {"a", "b"}); }) == ErrorKind::argument);
  CHECK(kind_of([] { Recording(SampleMatrix::Zero(4, 2), 100.0, {"a", "a"}); }) == ErrorKind::argument);
  SampleMatrix bad = SampleMatrix::Zero(4, 1);
  bad(2, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(kind_of([&] { Recording(bad, 100.0, {"a"}); }) == ErrorKind::argument);
}

TEST_CASE("extract_segments sizes epochs from length and rate") {
  SUBCASE("900 ms at 1000 Hz") {
    const auto rec = white_recording(10000, 2, 1000.0, 1);
    const auto segs = extract_segments(rec, 900.0, {0.0});
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].n_samples() == 900);
    CHECK(segs[0].channel_labels() == rec.channel_labels());
    CHECK(segs[0].sampling_rate_hz() == 1000.0);
  }
  SUBCASE("900 ms at 250 Hz") {
    const auto rec = white_recording(2500, 3, 250.0, 2);
    const auto segs = extract_segments(rec, 900.0, {0.0, 1000.0, 8000.0});
    REQUIRE(segs.size() == 3);
    for (const auto& s : segs) CHECK(s.n_samples() == 225);
    CHECK(segs[1].source_offset() == 250);
  }
  SUBCASE("whole recording is an identity slice") {
    const auto rec = white_recording(500, 2, 250.0, 3);
    const auto segs = extract_segments(rec, 2000.0, {0.0});
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].samples() == rec.samples());
  }
}

TEST_CASE("extract_segments copies rows exactly") {
  const auto rec = white_recording(3000, 2, 250.0, 4);
  const auto segs = extract_segments(rec, 900.0, {400.0, 2000.0});
  for (const auto& s : segs) {
    CHECK(s.samples() == rec.samples().middleRows(static_cast<Eigen::Index>(s.source_offset()), 225));
  }
}

TEST_CASE("extract_segments errors") {
  const auto rec = white_recording(1000, 2, 250.0, 5);
  SUBCASE("epoch past the end names the start") {
    try {
      extract_segments(rec, 900.0, {0.0, 3500.0});
      FAIL("expected range error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::range);
      CHECK(std::string(e.what()).find("3500") != std::string::npos);
    }
  }
  SUBCASE("negative start") { CHECK(kind_of([&] { extract_segments(rec, 900.0, {-10.0}); }) == ErrorKind::range); }
  SUBCASE("non-positive length") {
    CHECK(kind_of([&] { extract_segments(rec, 0.0, {0.0}); }) == ErrorKind::argument);
    CHECK(kind_of([&] { extract_segments(rec, -5.0, {0.0}); }) == ErrorKind::argument);
  }
  SUBCASE("length below two samples") {
    CHECK(kind_of([&] { extract_segments(rec, 4.0, {0.0}); }) == ErrorKind::argument);
  }
}

TEST_CASE("screen_stationarity passes white noise at the default tolerances") {
  // Monte Carlo over 1000 seeds. The pass rate falls with channel count, since
  // every channel must pass; two channels at N = 200 sit right at 0.95.
  const auto pass_rate = [](std::size_t n, std::size_t m, std::uint64_t base) {
    int passed = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      passed += screen_stationarity(oracle::segment_of(white_recording(n, m, 250.0, base + seed))).passed ? 1 : 0;
    }
    return passed / 1000.0;
  };
  CHECK(pass_rate(200, 1, 1000) >= 0.95);
  CHECK(pass_rate(225, 2, 3000) >= 0.95);
  CHECK(pass_rate(400, 2, 5000) >= 0.95);
}

TEST_CASE("screen_stationarity rejects a mean step") {
  auto rec = white_recording(400, 2, 250.0, 7);
  SampleMatrix x = rec.samples();
  const double sd = std::sqrt((x.col(0).array() - x.col(0).mean()).square().mean());
  x.col(0).tail(200).array() += 10.0 * sd;
  const auto report = screen_stationarity(Segment(x, 250.0, rec.channel_labels()));
  CHECK(report.mean_drift_score > 0.5);
  CHECK_FALSE(report.passed);
}

TEST_CASE("screen_stationarity rejects constant data") {
  const auto report = screen_stationarity(Segment(SampleMatrix::Constant(90, 2, 3.0), 250.0, {"a", "b"}));
  CHECK(std::isinf(report.variance_ratio_score));
  CHECK_FALSE(report.passed);
}

TEST_CASE("screen_stationarity window bookkeeping") {
  const auto rec = white_recording(100, 2, 250.0, 8);
  const auto report = screen_stationarity(oracle::segment_of(rec), {3, 0.5, 2.0});
  REQUIRE(report.per_window_means.size() == 3);
  // 100 rows / 3 windows: 33 rows each, last row dropped
  const auto third = rec.samples().middleRows(66, 33);
  CHECK(report.per_window_means[2](1) == doctest::Approx(third.col(1).mean()).epsilon(1e-14));
  CHECK(report.passed == (report.mean_drift_score <= 0.5 && report.variance_ratio_score <= 2.0));

  CHECK(kind_of([&] { screen_stationarity(oracle::segment_of(rec), {1, 0.5, 2.0}); }) == ErrorKind::argument);
  const Segment tiny(rec.samples().topRows(5), 250.0, rec.channel_labels());
  CHECK(kind_of([&] { screen_stationarity(tiny, {3, 0.5, 2.0}); }) == ErrorKind::argument);
}

TEST_CASE("screen_stationarity is invariant to per-channel affine maps and channel permutation") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coef(-5.0, 5.0);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto rec = white_recording(150, 3, 250.0, 5000 + seed);
    const auto base = screen_stationarity(oracle::segment_of(rec));

    SampleMatrix mapped = rec.samples();
    const auto c = static_cast<Eigen::Index>(seed % 3);
    double a = coef(rng);
    if (std::abs(a) < 0.1) a = 0.7;
    mapped.col(c) = (a * mapped.col(c)).array() + coef(rng);
    const auto affine = screen_stationarity(Segment(mapped, 250.0, rec.channel_labels()));
    CHECK(affine.mean_drift_score == doctest::Approx(base.mean_drift_score).epsilon(1e-9));
    CHECK(affine.variance_ratio_score == doctest::Approx(base.variance_ratio_score).epsilon(1e-9));
    CHECK(affine.passed == base.passed);

    const auto permuted = screen_stationarity(oracle::segment_of(rec).select_channels({2, 0, 1}));
    CHECK(permuted.passed == base.passed);
    CHECK(permuted.per_window_means[1](0) == base.per_window_means[1](2));
    CHECK(permuted.per_window_variances[0](1) == base.per_window_variances[0](0));
  }
}

TEST_CASE("recording and marker CSV round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "pdc_signal_test";
  std::filesystem::create_directories(dir);
  const auto rec = white_recording(50, 3, 128.0, 11);
  write_recording_csv(dir / "rec.csv", rec);
  const auto back = read_recording_csv(dir / "rec.csv", 128.0);
  CHECK(back.samples() == rec.samples());
  CHECK(back.channel_labels() == rec.channel_labels());

  {
    std::ofstream out(dir / "markers.csv");
    out << "start_ms\n0\n\n# comment\n1000.5\n";
  }
  CHECK(read_markers_csv(dir / "markers.csv") == std::vector<double>{0.0, 1000.5});

  {
    std::ofstream out(dir / "bad.csv");
    out << "a,b\n1,2\n3\n";
  }
  CHECK(kind_of([&] { read_recording_csv(dir / "bad.csv", 100.0); }) == ErrorKind::schema);
  CHECK(kind_of([&] { read_recording_csv(dir / "missing.csv", 100.0); }) == ErrorKind::io);
  CHECK(kind_of([&] { read_markers_csv(dir / "missing_markers.csv"); }) == ErrorKind::io);
  std::filesystem::remove_all(dir);
}
