#include <doctest.h>

#include <random>

#include "bdf/error.hpp"
#include "bdf/qmc.hpp"

using namespace bdf;

TEST_CASE("radical inverse") {
  CHECK(radical_inverse(1, 2) == 0.5);
  CHECK(radical_inverse(2, 2) == 0.25);
  CHECK(radical_inverse(3, 2) == 0.75);
  CHECK(radical_inverse(1, 3) == doctest::Approx(1.0 / 3.0));
  CHECK(radical_inverse(5, 3) == doctest::Approx(7.0 / 9.0));
}

TEST_CASE("sobol starts after the origin") {
  const Points p = qmc_unit_points(QmcSequence::sobol, 4);
  CHECK(p.row(0) == Eigen::RowVector3d(0.5, 0.5, 0.5));
  CHECK((p.array() >= 0.0).all());
  CHECK((p.array() < 1.0).all());
}

TEST_CASE("halton uses bases 2, 3, 5 from index 1") {
  const Points p = qmc_unit_points(QmcSequence::halton, 2);
  CHECK(p(0, 0) == 0.5);
  CHECK(p(0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(p(0, 2) == doctest::Approx(0.2));
  CHECK(p(1, 0) == 0.25);
}

TEST_CASE("low-discrepancy sequences cover axes more evenly than random points") {
  std::mt19937_64 rng(1024);
  std::uniform_real_distribution<double> u(0, 1);
  Points random(1024, 3);
  for (Index i = 0; i < random.size(); ++i) random.data()[i] = u(rng);
  const double random_gap = max_axis_gap(random);
  CHECK(max_axis_gap(qmc_unit_points(QmcSequence::sobol, 1024)) < random_gap);
  CHECK(max_axis_gap(qmc_unit_points(QmcSequence::halton, 1024)) < random_gap);
}

TEST_CASE("max_axis_gap counts the gaps to the unit interval ends") {
  Points p(1, 3);
  p << 0.5, 0.9, 0.2;
  CHECK(max_axis_gap(p) == doctest::Approx(0.9));
}

TEST_CASE("sequence names") {
  CHECK(parse_qmc_sequence("sobol") == QmcSequence::sobol);
  CHECK(parse_qmc_sequence("halton") == QmcSequence::halton);
  CHECK(std::string(to_string(QmcSequence::halton)) == "halton");
  CHECK_THROWS_AS(parse_qmc_sequence("random"), InvalidArgument);
}
