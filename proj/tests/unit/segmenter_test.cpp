#include "arcfit/segmenter.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "arcfit/errors.hpp"
#include "synth.hpp"

namespace arcfit {
namespace {

using testing::breakpoint_recall;
using testing::small_random_instance;
using testing::small_random_priors;

TempoSeries ramp(std::size_t n) {
  TempoSeries s;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i);
    s.points.push_back({x, 100.0 + 3.0 * std::sin(0.7 * x)});
  }
  return s;
}

void expect_continuous(const Segmentation& seg) {
  for (std::size_t i = 1; i < seg.arcs.size(); ++i) {
    EXPECT_LT(std::abs(seg.arcs[i - 1].end_value() - seg.arcs[i].params.a), 1e-9);
    EXPECT_EQ(seg.arcs[i - 1].end_pos, seg.arcs[i].start_pos);
  }
}

TEST(Update, FirstDatumCreatesSentinel) {
  SegmenterState st(PriorSet{}, 10);
  st.update({0.0, 100.0});
  ASSERT_EQ(st.size(), 1u);
  EXPECT_EQ(st.cells()[0].cum_log_map, 0.0);
  EXPECT_FALSE(st.cells()[0].arc.has_value());
  EXPECT_EQ(st.last_update_fits(), 0u);
  EXPECT_EQ(st.total_fits(), 0u);
}

TEST(Update, FourthDatumRunsThreeFits) {
  SegmenterState st(PriorSet{}, 10);
  const TempoSeries s = ramp(4);
  for (const auto& o : s.points) st.update(o);
  EXPECT_EQ(st.last_update_fits(), 3u);
  EXPECT_EQ(st.total_fits(), 0u + 1u + 2u + 3u);
}

TEST(Update, FitCountIsMinOfIndexAndLookback) {
  constexpr std::size_t kK = 5;
  SegmenterState st(PriorSet{}, kK);
  const TempoSeries s = ramp(20);
  std::uint64_t total = 0;
  for (std::size_t n = 0; n < s.size(); ++n) {
    st.update(s.points[n]);
    EXPECT_EQ(st.last_update_fits(), std::min(n, kK));
    total += std::min(n, kK);
    EXPECT_EQ(st.total_fits(), total);
    EXPECT_LE(st.total_fits(), kK * st.size());
  }
  EXPECT_EQ(st.cells().size(), st.positions().size());
}

TEST(Update, CellsPointBackwardsWithFiniteScores) {
  SegmenterState st(PriorSet{}, 6);
  for (const auto& o : ramp(15).points) st.update(o);
  for (std::size_t i = 1; i < st.size(); ++i) {
    const ViterbiCell& c = st.cells()[i];
    EXPECT_EQ(c.index, i);
    EXPECT_LT(c.back_index, c.index);
    EXPECT_GE(c.back_index + 6, c.index);
    EXPECT_TRUE(std::isfinite(c.cum_log_map));
    ASSERT_TRUE(c.arc.has_value());
    if (c.back_index > 0) {
      EXPECT_EQ(c.arc->params.a, st.cells()[c.back_index].arc->end_value());
    }
  }
}

TEST(Update, RejectsNonIncreasingAndNonFiniteWithoutChangingState) {
  SegmenterState st(PriorSet{}, 4);
  st.update({0.0, 1.0});
  st.update({1.0, 2.0});
  const SegmenterState before = st;
  EXPECT_THROW(st.update({1.0, 3.0}), DomainError);
  EXPECT_THROW(st.update({0.5, 3.0}), DomainError);
  EXPECT_THROW(st.update({2.0, std::nan("")}), DomainError);
  EXPECT_TRUE(st == before);
}

TEST(Update, RejectsZeroLookback) { EXPECT_THROW(SegmenterState(PriorSet{}, 0), DomainError); }

// Two arcs meeting at index 3, observed with little noise.
TempoSeries two_arc_series(PriorSet& priors) {
  priors.slope = {12.0, 3.0};
  priors.curvature = {std::log(12.0), 0.3};
  priors.duration = {std::log(3.0), 0.3};
  priors.noise_sd = 0.1;
  const FittedArc first{0.0, 3.0, {100.0, 12.0, std::log(12.0)}, 0.0};
  const FittedArc second{3.0, 6.0, {first.end_value(), 12.0, std::log(12.0)}, 0.0};
  const double jitter[] = {0.02, -0.03, 0.01, 0.0, -0.02, 0.03, -0.01};
  TempoSeries s;
  for (int i = 0; i <= 6; ++i) {
    const double x = i;
    const double v = (i <= 3 ? first.value_at(x) : second.value_at(x)) + jitter[i];
    s.points.push_back({x, v});
  }
  return s;
}

TEST(Finalize, SevenPointTwoArcExample) {
  PriorSet p;
  const TempoSeries s = two_arc_series(p);
  const Segmentation oracle = brute_force_segment(s, p);
  ASSERT_EQ(oracle.interior_breakpoint_indices(), std::vector<std::size_t>{3});

  SegmenterState st(p, 7);
  for (const auto& o : s.points) st.update(o);
  // walk cell 6's back pointers
  std::vector<std::size_t> chain;
  for (std::size_t i = 6; i > 0; i = st.cells()[i].back_index) chain.push_back(i);
  EXPECT_NE(std::find(chain.begin(), chain.end(), 3u), chain.end());
  const Segmentation seg = st.finalize();
  EXPECT_EQ(seg.interior_breakpoint_indices(), oracle.interior_breakpoint_indices());
  EXPECT_NEAR(seg.total_log_map, oracle.total_log_map, 1e-6);
}

TEST(Finalize, TwoDataGiveOneArc) {
  TempoSeries s;
  s.points = {{0.0, 90.0}, {2.0, 95.0}};
  const Segmentation seg = fit_series(s, PriorSet{}, 4);
  ASSERT_EQ(seg.arcs.size(), 1u);
  EXPECT_EQ(seg.arcs[0].start_pos, 0.0);
  EXPECT_EQ(seg.arcs[0].end_pos, 2.0);
  EXPECT_EQ(seg.breakpoints, (std::vector<double>{0.0, 2.0}));
  EXPECT_EQ(seg.breakpoint_indices, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(seg.total_log_map, seg.arcs[0].log_map);
}

TEST(Finalize, NeedsTwoData) {
  SegmenterState st(PriorSet{});
  EXPECT_THROW(st.finalize(), DomainError);
  st.update({0.0, 1.0});
  EXPECT_THROW(st.finalize(), DomainError);
  TempoSeries one;
  one.points = {{0.0, 1.0}};
  EXPECT_THROW(fit_series(one, PriorSet{}), DomainError);
}

TEST(FinalizeProperty, SegmentationInvariants) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto inst = small_random_instance(seed, 14);
    const PriorSet p = small_random_priors(seed);
    const Segmentation seg = fit_series(inst.series, p, 6);
    ASSERT_EQ(seg.breakpoints.size(), seg.arcs.size() + 1);
    ASSERT_EQ(seg.breakpoint_indices.size(), seg.arcs.size() + 1);
    EXPECT_EQ(seg.start_pos(), inst.series.points.front().position);
    EXPECT_EQ(seg.end_pos(), inst.series.points.back().position);
    double sum = 0.0;
    for (std::size_t i = 0; i < seg.arcs.size(); ++i) {
      EXPECT_EQ(seg.arcs[i].start_pos, seg.breakpoints[i]);
      EXPECT_EQ(seg.arcs[i].end_pos, seg.breakpoints[i + 1]);
      EXPECT_EQ(inst.series.points[seg.breakpoint_indices[i]].position, seg.breakpoints[i]);
      EXPECT_LT(seg.arcs[i].start_pos, seg.arcs[i].end_pos);
      sum += seg.arcs[i].log_map;
    }
    EXPECT_NEAR(seg.total_log_map, sum, 1e-9 * (1.0 + std::abs(sum)));
    expect_continuous(seg);
  }
}

TEST(FinalizeProperty, NeverBeatsAndUsuallyMatchesBruteForce) {
  std::size_t matched = 0, total = 0;
  for (std::uint64_t seed = 100; seed < 140; ++seed) {
    const std::size_t m = 4 + seed % 7;
    const auto inst = small_random_instance(seed, m);
    const PriorSet p = small_random_priors(seed);
    const auto oracle = brute_force_search(inst.series, p);
    const Segmentation dp = fit_series(inst.series, p, m);
    EXPECT_LE(dp.total_log_map, oracle.best.total_log_map + 1e-9) << seed;
    ++total;
    if (std::abs(dp.total_log_map - oracle.best.total_log_map) <= 1e-6) {
      ++matched;
      if (oracle.best.total_log_map - oracle.runner_up_log_map > 1e-4) {
        EXPECT_EQ(dp.breakpoint_indices, oracle.best.breakpoint_indices) << seed;
      }
    }
  }
  EXPECT_GE(matched + 2, total);
}

// Continuity couples each arc to its predecessor's end value, which the
// per-datum recursion does not track: the best chain into a datum can leave a
// worse start value for the arcs after it. Seed 123 is such a case.
TEST(FinalizeProperty, ContinuityCanHideTheGlobalOptimum) {
  const auto inst = small_random_instance(123, 10);
  const PriorSet p = small_random_priors(123);
  const Segmentation oracle = brute_force_segment(inst.series, p);
  SegmenterState st(p, 10);
  for (const auto& o : inst.series.points) st.update(o);
  const Segmentation dp = st.finalize();
  EXPECT_LT(dp.total_log_map, oracle.total_log_map - 1e-3);
  // The oracle's path passes through a datum whose DP cell chose a
  // higher-scoring prefix with a different end value.
  const std::size_t cut = oracle.breakpoint_indices[1];
  EXPECT_GT(st.cells()[cut].cum_log_map, oracle.arcs[0].log_map);
  EXPECT_NE(st.cells()[cut].arc->end_value(), oracle.arcs[0].end_value());
}

TEST(FitSeriesProperty, TimeTranslationEquivariance) {
  for (std::uint64_t seed = 200; seed < 215; ++seed) {
    const auto inst = small_random_instance(seed, 12);
    const PriorSet p = small_random_priors(seed);
    TempoSeries shifted = inst.series;
    const double delta = 64.0;
    for (auto& o : shifted.points) o.position += delta;
    const Segmentation a = fit_series(inst.series, p, 8);
    const Segmentation b = fit_series(shifted, p, 8);
    ASSERT_EQ(a.breakpoints.size(), b.breakpoints.size()) << seed;
    for (std::size_t i = 0; i < a.breakpoints.size(); ++i) {
      EXPECT_EQ(b.breakpoints[i], a.breakpoints[i] + delta);
    }
    for (std::size_t i = 0; i < a.arcs.size(); ++i) {
      EXPECT_NEAR(b.arcs[i].params.a, a.arcs[i].params.a, 1e-9);
      EXPECT_NEAR(b.arcs[i].params.b, a.arcs[i].params.b, 1e-9);
      EXPECT_NEAR(b.arcs[i].params.c, a.arcs[i].params.c, 1e-9);
    }
    EXPECT_NEAR(b.total_log_map, a.total_log_map, 1e-9 * (1.0 + std::abs(a.total_log_map)));
  }
}

TEST(FitSeriesProperty, StreamingEqualsBatch) {
  for (std::uint64_t seed = 300; seed < 310; ++seed) {
    const auto inst = small_random_instance(seed, 16);
    const PriorSet p = small_random_priors(seed);
    SegmenterState st(p, 5);
    for (const auto& o : inst.series.points) {
      st.update(o);
      if (st.size() >= 2) {
        (void)st.predict(st.default_grid());
      }
    }
    EXPECT_EQ(st.finalize(), fit_series(inst.series, p, 5));
  }
}

TEST(FitSeries, ConstantSeriesSpacingFollowsDurationPrior) {
  PriorSet p;
  p.slope = {8.0, 2.0};
  p.curvature = {std::log(8.0), 0.5};
  p.duration = {std::log(8.0), 0.1};
  p.noise_sd = 1.0;
  TempoSeries s;
  for (int i = 0; i <= 80; ++i) s.points.push_back({static_cast<double>(i), 100.0});
  const Segmentation seg = fit_series(s, p, 16);
  ASSERT_GE(seg.arcs.size(), 2u);
  for (const FittedArc& arc : seg.arcs) {
    EXPECT_NEAR(arc.duration(), 8.0, 0.3 * 8.0);
  }
}

TEST(FitSeries, RecoversThreeArcs) {
  std::size_t found = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto inst = testing::three_arc_instance(seed);
    const Segmentation seg = fit_series(inst.series, testing::three_arc_priors(), 40);
    const auto r = breakpoint_recall(inst.truth, seg, inst.series);
    found += r.found;
    total += r.total;
  }
  EXPECT_GE(static_cast<double>(found), 0.9 * static_cast<double>(total));
}

TEST(Predict, EmptyGridEqualsFinalize) {
  for (std::uint64_t seed = 400; seed < 410; ++seed) {
    const auto inst = small_random_instance(seed, 12);
    SegmenterState st(small_random_priors(seed), 6);
    for (const auto& o : inst.series.points) st.update(o);
    const Prediction pr = st.predict({});
    const Segmentation seg = st.finalize();
    EXPECT_FALSE(pr.hypothetical);
    EXPECT_EQ(pr.arc, seg.arcs.back());
    EXPECT_EQ(pr.total_log_map, seg.total_log_map);
    EXPECT_EQ(pr.chosen_end, seg.end_pos());
    EXPECT_EQ(pr.arc_start_index, seg.breakpoint_indices[seg.breakpoint_indices.size() - 2]);
  }
}

TEST(Predict, DoesNotModifyState) {
  const auto inst = small_random_instance(7, 12);
  const PriorSet p = small_random_priors(7);
  SegmenterState with(p, 6), without(p, 6);
  for (const auto& o : inst.series.points) {
    with.update(o);
    without.update(o);
    if (with.size() < 2) continue;
    const SegmenterState snapshot = with;
    (void)with.predict(with.default_grid());
    EXPECT_TRUE(with == snapshot);
  }
  EXPECT_TRUE(with == without);
}

TEST(Predict, OutputInvariants) {
  const auto inst = small_random_instance(8, 12);
  SegmenterState st(small_random_priors(8), 6);
  for (const auto& o : inst.series.points) st.update(o);
  const auto grid = st.default_grid();
  const Prediction pr = st.predict(grid);
  EXPECT_GE(pr.chosen_end, st.positions().back());
  EXPECT_EQ(pr.arc.end_pos, pr.chosen_end);
  EXPECT_TRUE(std::isfinite(pr.total_log_map));
  ASSERT_FALSE(pr.trajectory.empty());
  EXPECT_EQ(pr.trajectory.front().position, st.positions()[pr.arc_start_index]);
  for (const Observation& o : pr.trajectory) {
    EXPECT_EQ(o.value, eval_arc(pr.arc.params, pr.arc.normalized(o.position)));
    EXPECT_LE(o.position, pr.chosen_end);
  }
  EXPECT_GE(pr.total_log_map, st.finalize().total_log_map);
}

TEST(Predict, GridValidation) {
  SegmenterState st(PriorSet{}, 4);
  for (const auto& o : ramp(5).points) st.update(o);
  const std::vector<double> before_last{3.5, 6.0};
  const std::vector<double> at_last{4.0};
  const std::vector<double> unsorted{6.0, 5.0};
  EXPECT_THROW(st.predict(before_last), DomainError);
  EXPECT_THROW(st.predict(at_last), DomainError);
  EXPECT_THROW(st.predict(unsorted), DomainError);
  SegmenterState empty(PriorSet{}, 4);
  EXPECT_THROW(empty.predict({}), DomainError);
}

TEST(Predict, SingleDatumNeedsGrid) {
  SegmenterState st(PriorSet{}, 4);
  st.update({0.0, 60.0});
  EXPECT_THROW(st.predict({}), DomainError);
  const std::vector<double> grid{1.0, 2.0};
  const Prediction pr = st.predict(grid);
  EXPECT_TRUE(pr.hypothetical);
  EXPECT_EQ(pr.arc_start_index, 0u);
}

TEST(DefaultGrid, LookbackPointsAtMedianSpacing) {
  SegmenterState st(PriorSet{}, 5);
  EXPECT_TRUE(st.default_grid().empty());
  for (double x : {0.0, 1.0, 1.5, 2.0, 2.5, 4.0}) st.update({x, 100.0 - (x - 2.0) * (x - 2.0)});
  // gaps 1, 0.5, 0.5, 0.5, 1.5 -> median 0.5
  EXPECT_EQ(st.default_grid(), (std::vector<double>{4.5, 5.0, 5.5, 6.0, 6.5}));
}

TEST(BruteForce, ThreePointsEvaluatesTwo) {
  const TempoSeries s = ramp(3);
  const auto r = brute_force_search(s, PriorSet{});
  EXPECT_EQ(r.evaluated, 2u);
  EXPECT_TRUE(std::isfinite(r.runner_up_log_map));
}

TEST(BruteForce, EnumerationCount) {
  for (std::size_t m = 2; m <= 9; ++m) {
    EXPECT_EQ(brute_force_search(ramp(m), PriorSet{}).evaluated, std::size_t{1} << (m - 2));
  }
}

TEST(BruteForce, TwoPointsMatchFitSeries) {
  const TempoSeries s = ramp(2);
  const auto r = brute_force_search(s, PriorSet{});
  EXPECT_EQ(r.evaluated, 1u);
  EXPECT_EQ(r.runner_up_log_map, -std::numeric_limits<double>::infinity());
  EXPECT_EQ(r.best, fit_series(s, PriorSet{}));
}

TEST(BruteForce, RefusesLongSeries) {
  EXPECT_THROW(brute_force_search(ramp(17), PriorSet{}), DomainError);
  EXPECT_THROW(brute_force_search(ramp(1), PriorSet{}), DomainError);
}

TEST(SegmentationValueAt, UsesArcsAndRejectsOutOfSpan) {
  PriorSet p;
  const TempoSeries s = two_arc_series(p);
  const Segmentation seg = brute_force_segment(s, p);
  EXPECT_EQ(seg.value_at(1.0), seg.arcs[0].value_at(1.0));
  EXPECT_EQ(seg.value_at(3.0), seg.arcs[0].value_at(3.0));
  EXPECT_EQ(seg.value_at(5.0), seg.arcs[1].value_at(5.0));
  EXPECT_THROW(seg.value_at(-0.1), DomainError);
  EXPECT_THROW(seg.value_at(6.1), DomainError);
}

}  // namespace
}  // namespace arcfit
