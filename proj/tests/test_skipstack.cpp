#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include "mifs/error.hpp"
#include "mifs/matrix_io.hpp"
#include "mifs/skipstack.hpp"

using namespace mifs;

namespace {

// Columns as sortable tuples so multisets of columns can be compared.
std::multiset<std::vector<double>> column_multiset(const Eigen::MatrixXd& m) {
  std::multiset<std::vector<double>> out;
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.insert(std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows()));
  return out;
}

Eigen::MatrixXd sine_series(int frames, double period, int channels = 1, double phase = 0.3) {
  Eigen::MatrixXd s(frames, channels);
  for (int f = 0; f < frames; ++f)
    for (int c = 0; c < channels; ++c) s(f, c) = std::sin(2.0 * std::numbers::pi * f / period + phase * (c + 1));
  return s;
}

}  // namespace

TEST_SUITE("skipstack") {

TEST_CASE("schedule arithmetic") {
  const SkipSchedule s(0.01, 2);
  CHECK(s.budget(0) == 100);
  CHECK(s.budget(1) == 50);
  CHECK(s.budget(2) == 33);
  CHECK(s.total_budget() == 183);
  CHECK(s.label() == "L=2");
  for (int l = 1; l <= 2; ++l) {
    CHECK(s.tau(l) > s.tau(l - 1));
    CHECK(s.budget(l) <= s.budget(l - 1));
  }
  CHECK(SkipSchedule(0.01, 2, {0}).label() == "L=2-0");
  CHECK(SkipSchedule::single_level(0.01, 1).label() == "l=1");
  CHECK(SkipSchedule::single_level(0.01, 1).active_levels() == std::vector<int>{1});
  CHECK(SkipSchedule::for_frames(50, 3).base_tau() == doctest::Approx(0.02));
  CHECK_THROWS_AS(SkipSchedule(0.5, 2), ValidationError);
  CHECK_THROWS_AS(SkipSchedule(0.0, 0), ValidationError);
  CHECK_THROWS_AS(SkipSchedule(0.1, -1), ValidationError);
  CHECK_THROWS_AS(SkipSchedule(0.1, 1, {2}), ValidationError);
  CHECK_THROWS_AS(SkipSchedule(0.1, 0, {0}), ValidationError);
}

TEST_CASE("tau = 1 gives a single column") {
  const auto m = new_model(2, 3, {5.0, 6.0}, 0.0, 0.0, 1);
  Rng rng(1);
  CHECK(build_feature_matrix(m, 1.0, rng).columns() == 1);
}

TEST_CASE("coefficient differences take values in {-2, 0, 2}") {
  const auto m = new_model(4, 6, {1, 2, 4, 8}, 0.1, 0.0, 1);
  Rng rng(9);
  const auto fm = build_feature_matrix(m, 0.001, rng);
  CHECK(fm.p.rows() == 4);
  CHECK(fm.p.cols() == 1000);
  for (Eigen::Index i = 0; i < fm.p.size(); ++i) {
    const double v = fm.p.data()[i];
    CHECK((v == -2.0 || v == 0.0 || v == 2.0));
  }
}

TEST_CASE("fast signals at a coarse skip produce every difference value") {
  // gamma/tau = 1 makes flips frequent enough to see all three values
  const auto m = new_model(1, 1, {0.1}, 0.0, 0.0, 1);
  Rng rng(3);
  const auto fm = build_feature_matrix(m, 0.1, rng, FeatureOptions{5000, false, 0});
  std::set<double> values(fm.p.data(), fm.p.data() + fm.p.size());
  CHECK(values == std::set<double>{-2.0, 0.0, 2.0});
}

TEST_CASE("static model gives a zero P") {
  const auto m = new_model(3, 3, {1e6, 1e6, 1e6}, 0.0, 0.0, 1);
  Rng rng(1);
  CHECK(build_feature_matrix(m, 0.01, rng).p.isZero(0.0));
}

TEST_CASE("noise-free observation is Xbar P") {
  const auto m = new_model(3, 7, {0.02, 0.05, 0.1}, 0.2, 0.0, 4);
  Rng rng(4);
  const auto fm = build_feature_matrix(m, 0.05, rng);
  CHECK((fm.f - m.xbar * fm.p).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("observation noise is the difference of two draws") {
  const auto m = new_model(2, 4, {100.0, 100.0}, 0.0, 0.5, 4);
  Rng rng(4);
  const auto fm = build_feature_matrix(m, 0.5, rng, FeatureOptions{20000, true, 0});
  // P is zero, so f is pure noise with variance 2 sigma^2
  const double var = fm.f.squaredNorm() / static_cast<double>(fm.f.size());
  CHECK(var == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("gamma too small for tau propagates") {
  const auto m = new_model(1, 1, {0.01}, 0.9, 0.0, 1);
  Rng rng(1);
  CHECK_THROWS_WITH_AS(build_feature_matrix(m, 0.5, rng), doctest::Contains("gamma too small for tau"),
                       ValidationError);
}

TEST_CASE("level-0 stack equals the single-skip matrix") {
  const auto m = new_model(2, 3, {0.03, 0.06}, 0.1, 0.01, 2);
  const Rng rng(17);
  const auto stacked = mifs_stack(m, SkipSchedule(0.01, 0), rng);
  Rng level0 = rng.derive(0);
  const auto single = build_feature_matrix(m, 0.01, level0);
  CHECK(stacked.p == single.p);
  CHECK(stacked.f == single.f);
}

TEST_CASE("stacked column counts") {
  const auto m = new_model(2, 3, {0.3, 0.6}, 0.1, 0.0, 2);
  const Rng rng(5);
  const auto full = mifs_stack(m, SkipSchedule(0.01, 2), rng);
  CHECK(full.columns() == 183);
  CHECK(std::count(full.level_of_column.begin(), full.level_of_column.end(), 2) == 33);
  const auto masked = mifs_stack(m, SkipSchedule(0.01, 1, {0}), rng);
  CHECK(masked.columns() == 50);
  for (double t : masked.tau_of_column) CHECK(t == doctest::Approx(0.02));
}

TEST_CASE("property: stacking is the union of per-level matrices") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = new_model(3, 4, {0.05, 0.1, 0.2}, 0.2, 0.05, seed);
    const Rng rng(derive_seed(seed, 1));
    const int levels = static_cast<int>(seed % 4);
    const SkipSchedule schedule(0.02, levels);
    const auto stacked = mifs_stack(m, schedule, rng, true, 1 + static_cast<unsigned>(seed % 3));
    Eigen::MatrixXd joined(m.k + m.d, 0);
    for (int l = 0; l <= levels; ++l) {
      Rng sub = rng.derive(static_cast<std::uint64_t>(l));
      const auto part = build_feature_matrix(m, schedule.tau(l), sub);
      Eigen::MatrixXd both(m.k + m.d, part.columns());
      both << part.p, part.f;
      Eigen::MatrixXd grown(joined.rows(), joined.cols() + both.cols());
      grown << joined, both;
      joined = grown;
    }
    Eigen::MatrixXd got(m.k + m.d, stacked.columns());
    got << stacked.p, stacked.f;
    CHECK(column_multiset(got) == column_multiset(joined));
    CHECK(stacked.p.cwiseAbs().maxCoeff() <= 2.0);
  }
}

TEST_CASE("stack is independent of the thread count") {
  const auto m = new_model(2, 3, {0.05, 0.1}, 0.1, 0.1, 3);
  const Rng rng(8);
  const auto a = mifs_stack(m, SkipSchedule(0.01, 3), rng, true, 1);
  const auto b = mifs_stack(m, SkipSchedule(0.01, 3), rng, true, 4);
  CHECK(a.p == b.p);
  CHECK(a.f == b.f);
}

TEST_CASE("series descriptors") {
  SUBCASE("constant series") {
    const Eigen::MatrixXd s = Eigen::MatrixXd::Constant(30, 2, 3.5);
    const auto set = extract_series_descriptors(s, SkipSchedule::for_frames(30, 2), 4);
    CHECK(set.descriptors.isZero(0.0));
    CHECK(set.descriptors.cols() == 8);
  }
  SUBCASE("linear ramp") {
    const int k = 25;
    Eigen::MatrixXd s(k, 1);
    for (int f = 0; f < k; ++f) s(f, 0) = static_cast<double>(f) / (k - 1);
    const auto set = extract_series_descriptors(s, SkipSchedule::for_frames(k, 0), 2);
    CHECK(set.size() == k - 1 - 2 + 1);
    for (Eigen::Index r = 0; r < set.size(); ++r)
      for (Eigen::Index c = 0; c < 2; ++c) CHECK(set.descriptors(r, c) == doctest::Approx(1.0 / (k - 1)).epsilon(1e-12));
  }
  SUBCASE("a level-1 period-32 sine matches a level-0 period-16 sine") {
    const auto slow = sine_series(128, 32.0);
    const auto fast = sine_series(64, 16.0);
    const auto a = extract_series_descriptors(slow, SkipSchedule::single_level(1.0 / 128, 1), 5);
    const auto b = extract_series_descriptors(fast, SkipSchedule::for_frames(64, 0), 5);
    REQUIRE(a.size() == b.size());
    CHECK((a.descriptors - b.descriptors).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("locations and level tags") {
    const auto set = extract_series_descriptors(sine_series(40, 7.0, 3), SkipSchedule::for_frames(40, 3), 3);
    CHECK(set.descriptors.cols() == 9);
    CHECK(set.locations.minCoeff() >= 0.0);
    CHECK(set.locations.maxCoeff() <= 1.0);
    CHECK(std::is_sorted(set.level_of_row.begin(), set.level_of_row.end()));
    CHECK(set.level_of_row.back() == 3);
  }
  SUBCASE("too short") {
    CHECK_THROWS_AS(extract_series_descriptors(sine_series(12, 5.0), SkipSchedule(1.0 / 12, 2), 4), ValidationError);
    CHECK_THROWS_AS(extract_series_descriptors(sine_series(12, 5.0), SkipSchedule(1.0 / 12, 0), 0), ValidationError);
  }
}

TEST_CASE("property: speed shift") {
  for (int s = 1; s <= 4; ++s)
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const int k = 24 * s;
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
      Eigen::MatrixXd x(k, 2);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
      Eigen::MatrixXd compressed(k / s, 2);
      for (int j = 0; j < k / s; ++j) compressed.row(j) = x.row(j * s);
      const auto a = extract_series_descriptors(x, SkipSchedule::single_level(1.0 / k, s - 1), 3);
      const auto b = extract_series_descriptors(compressed, SkipSchedule::for_frames(k / s, 0), 3);
      REQUIRE(a.size() == b.size());
      CHECK(a.descriptors == b.descriptors);
    }
}

TEST_CASE("cost report") {
  const auto full = level_cost_report(SkipSchedule(1.0 / 1000, 2));
  REQUIRE(full.levels.size() == 3);
  CHECK(full.levels[0].relative == 1.0);
  CHECK(full.levels[1].relative == 0.5);
  CHECK(full.levels[2].relative == 0.333);
  CHECK(full.total_relative == doctest::Approx(1.833).epsilon(1e-12));
  CHECK(full.total_relative < 2.0);
  CHECK(level_cost_report(SkipSchedule(1.0 / 1000, 0)).total_relative == 1.0);
  const auto masked = level_cost_report(SkipSchedule(1.0 / 1000, 2, {0}));
  CHECK_FALSE(masked.levels[0].active);
  CHECK(masked.total_relative == doctest::Approx(0.833).epsilon(1e-12));
}

TEST_CASE("binary container round trip") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto m = new_model(2, 3, {0.05, 0.1}, 0.1, 0.0, 3);
  const auto fm = mifs_stack(m, SkipSchedule(0.05, 1), Rng(1));
  save_feature_matrix(dir / "mifs_p.bin", fm, false);
  const auto p = read_container(dir / "mifs_p.bin");
  CHECK(p.kind == "P");
  CHECK(p.data == fm.p);  // small integers survive float32
  CHECK(p.levels == fm.level_of_column);

  const auto set = extract_series_descriptors(sine_series(40, 9.0, 2), SkipSchedule::for_frames(40, 1), 3);
  save_descriptor_set(dir / "mifs_desc.bin", set);
  const auto back = load_descriptor_set(dir / "mifs_desc.bin");
  CHECK((back.descriptors - set.descriptors).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((back.locations - set.locations).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(back.level_of_row == set.level_of_row);

  // header line followed by exactly rows*cols float32 values
  std::filesystem::remove(dir / "mifs_p.bin");
  std::filesystem::remove(dir / "mifs_desc.bin");
  CHECK_THROWS_AS(read_container(dir / "mifs_missing.bin"), IoError);
}

}  // TEST_SUITE
