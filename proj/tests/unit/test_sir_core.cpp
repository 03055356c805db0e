#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracle/likelihood_oracle.hpp"
#include "epicpt/simulate.hpp"
#include "epicpt/sir_core.hpp"

using namespace epicpt;

TEST_CASE("grid validates and locates intervals") {
  CHECK_THROWS_AS(ObservationGrid({0.0}), std::invalid_argument);
  CHECK_THROWS_AS(ObservationGrid({0.0, 1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(ObservationGrid({0.0, NAN}), std::invalid_argument);
  ObservationGrid g({0.0, 1.0, 2.5, 4.0});
  CHECK(g.intervals() == 3);
  CHECK(g.interval_of(0.5) == 1);
  CHECK(g.interval_of(1.0) == 1);
  CHECK(g.interval_of(1.0000001) == 2);
  CHECK(g.interval_of(4.0) == 3);
  CHECK(g.length(2) == doctest::Approx(1.5));
  CHECK(ObservationGrid::uniform(0.0, 1.0, 12).end() == 12.0);
}

TEST_CASE("incidence validation") {
  auto g = ObservationGrid::uniform(0, 1, 3);
  CHECK_NOTHROW(validate_incidence({{1, 2, 3}}, g, 6));
  CHECK_THROWS_AS(validate_incidence({{1, 2, 3}}, g, 5), ValidationError);
  CHECK_THROWS_AS(validate_incidence({{1, 2}}, g, 10), ValidationError);
  CHECK_THROWS_AS(validate_incidence({{1, -2, 3}}, g, 10), ValidationError);
}

TEST_CASE("change-point vectors") {
  auto d = ChangePointVector::parse("0101");
  CHECK(d.size() == 4);
  CHECK(d.popcount() == 2);
  CHECK(d.segments() == 3);
  CHECK(d.to_string() == "0101");
  CHECK(d.segment_of_interval() == std::vector<std::size_t>{0, 0, 0, 1, 1, 2});
  CHECK_THROWS(ChangePointVector::parse("01x"));
  CHECK(expand_to_intervals(d, std::vector<double>{1, 2, 3}) == std::vector<double>{1, 1, 2, 2, 3});
  CHECK_THROWS(expand_to_intervals(d, std::vector<double>{1, 2}));
}

TEST_CASE("transmission rate is right-continuous at change points") {
  TransmissionRate r(0, 12, {3, 10}, {1.75e-4, 1.25e-4, 0.75e-4});
  CHECK(rate_at(r, 0.0) == 1.75e-4);
  CHECK(rate_at(r, 2.999) == 1.75e-4);
  CHECK(rate_at(r, 3.0) == 1.25e-4);
  CHECK(rate_at(r, 10.0) == 0.75e-4);
  CHECK(rate_at(r, 12.0) == 0.75e-4);
  CHECK_THROWS_AS(rate_at(r, 12.5), std::domain_error);
  CHECK_THROWS(TransmissionRate(0, 12, {3, 10}, {1.0, 2.0}));
  CHECK_THROWS(TransmissionRate(0, 12, {10, 3}, {1.0, 2.0, 3.0}));
  CHECK_THROWS(TransmissionRate(0, 12, {3}, {1.0, -2.0}));

  auto g = ObservationGrid::uniform(0, 1, 12);
  auto d = ChangePointVector::parse("00100000010");
  auto built = segments_from_indicators(d, g, std::vector<double>{1.75e-4, 1.25e-4, 0.75e-4});
  CHECK(std::vector<double>(built.change_points().begin(), built.change_points().end()) == std::vector<double>{3, 10});
  auto per = rate_per_interval(r, g);
  CHECK(per[2] == 1.75e-4);
  CHECK(per[3] == 1.25e-4);
  CHECK(per[10] == 0.75e-4);
}

TEST_CASE("trajectory invariants") {
  InitialCounts init{2, 1, 0};
  CHECK_NOTHROW(LatentTrajectory(init, 0.0, {0.5}, {1.5, INFINITY}));
  // removal before infection
  CHECK_THROWS_AS(LatentTrajectory(init, 0.0, {0.5}, {1.5, 0.4}), InvariantError);
  // infection with no infective left
  CHECK_THROWS_AS(LatentTrajectory(init, 0.0, {0.5}, {0.2, INFINITY}), InvariantError);
  // more infections than susceptibles
  CHECK_THROWS_AS(LatentTrajectory(init, 0.0, {0.5, 0.6, 0.7}, {5, 5, 5, 5}), InvariantError);

  LatentTrajectory x(init, 0.0, {0.5}, {1.5, INFINITY});
  CHECK(compartments_at(x, 0.0) == Compartments{2, 1, 0});
  CHECK(compartments_at(x, 0.5) == Compartments{1, 2, 0});
  CHECK(compartments_at(x, 1.5) == Compartments{1, 1, 1});
  CHECK(x.events().size() == 2);
}

TEST_CASE("from_events pairs removals first in first out") {
  InitialCounts init{3, 1, 0};
  std::vector<Event> ev{{0.2, EventKind::infection}, {0.4, EventKind::removal}, {0.6, EventKind::infection},
                        {0.9, EventKind::removal}};
  auto x = LatentTrajectory::from_events(init, 0.0, ev);
  CHECK(x.removal_times()[0] == 0.4);
  CHECK(x.removal_times()[1] == 0.9);
  CHECK(std::isinf(x.removal_times()[2]));
}

TEST_CASE("interval statistics on a hand-built path") {
  InitialCounts init{2, 1, 0};
  LatentTrajectory x(init, 0.0, {0.5}, {1.5, INFINITY});
  ObservationGrid g({0.0, 1.0, 2.0});
  auto st = interval_stats(x, g);
  CHECK(st.infections == std::vector<long>{1, 0});
  CHECK(st.removals == std::vector<long>{0, 1});
  CHECK(st.int_si[0] == doctest::Approx(2.0));
  CHECK(st.int_i[0] == doctest::Approx(1.5));
  CHECK(st.int_si[1] == doctest::Approx(1.5));
  CHECK(st.int_i[1] == doctest::Approx(1.5));
  CHECK(st.sum_log_i[0] == doctest::Approx(0.0));

  // beta = (0.3, 0.1), gamma = 2
  ModelParams p{TransmissionRate(0, 2, {1.0}, {0.3, 0.1}), 2.0};
  auto seg = sufficient_stats(x, g, ChangePointVector::parse("1"));
  double expected = std::log(0.3) - 0.3 * 2.0 - 0.1 * 1.5 - 2.0 * 3.0 + std::log(2.0);
  CHECK(log_complete_likelihood(p, seg) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(log_likelihood_intervals(std::vector<double>{0.3, 0.1}, 2.0, st) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("events after the window are ignored") {
  InitialCounts init{2, 1, 0};
  LatentTrajectory x(init, 0.0, {0.5, 3.0}, {1.5, 3.5, INFINITY});
  ObservationGrid g({0.0, 1.0, 2.0});
  auto st = interval_stats(x, g);
  CHECK(st.infections == std::vector<long>{1, 0});
  CHECK(st.total_removals() == 1);
}

TEST_CASE("likelihood matches the brute-force replay on simulated paths") {
  Rng rng = make_stream(99, 0);
  auto g = ObservationGrid::uniform(0, 1, 6);
  for (int rep = 0; rep < 20; ++rep) {
    InitialCounts init{60 + rep * 7, 1 + rep % 4, 0};
    TransmissionRate rate(0, 6, {2, 4}, {0.02, 0.01, 0.005});
    auto sim = simulate_sir({init, rate, 0.8, 0.0, 6.0}, rng);
    const auto& x = sim.trajectory;
    oracle::Replay rp{init.s0, init.i0, {x.infection_times().begin(), x.infection_times().end()},
                      {x.removal_times().begin(), x.removal_times().end()}};
    std::vector<double> beta{0.02, 0.02, 0.01, 0.01, 0.005, 0.005};
    double want = oracle::log_likelihood(rp, {0, 1, 2, 3, 4, 5, 6}, beta, 0.8);
    ModelParams p{rate, 0.8};
    double got = log_complete_likelihood(p, sufficient_stats(x, g, ChangePointVector::parse("01010")));
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("non-finite likelihood is an error") {
  SegmentStats s{{1}, {1.0}, {1.0}, {NAN}, 0};
  ModelParams p{TransmissionRate::constant(0, 1, 0.1), 1.0};
  CHECK_THROWS_AS(log_complete_likelihood(p, s), NumericError);
}

TEST_CASE("effective reproduction number") {
  InitialCounts init{2, 1, 0};
  LatentTrajectory x(init, 0.0, {0.5}, {1.5, INFINITY});
  ObservationGrid g({0.0, 1.0, 2.0});
  ModelParams p{TransmissionRate(0, 2, {1.0}, {0.3, 0.1}), 2.0};
  auto r = effective_R(p, x, g);
  CHECK(r.size() == 3);
  CHECK(r[0] == doctest::Approx(0.3 * 2 / 2.0));
  CHECK(r[1] == doctest::Approx(0.1 * 1 / 2.0));
}
