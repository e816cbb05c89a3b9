#include "doctest.h"
#include "oracles.hpp"

#include "react/formation.hpp"

#include <map>

using namespace react;
using namespace react::formation;

TEST_CASE("formation: edge weights") {
  const WeightParams a2{2.0, false};
  CHECK(edge_weight({1, 0}, {0, 0}, a2) == 4.0);
  CHECK(edge_weight({1, 1}, {0, 0}, a2) == 5.0);
  CHECK(edge_weight({0.3, -2}, {0.3, -2}, a2) == 0.0);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const Vec2 p = oracle::uniform_vec(rng, -5, 5);
    const Vec2 q = oracle::uniform_vec(rng, -5, 5);
    CHECK(edge_weight(p, q, a2) == edge_weight(q, p, a2));
  }
}

TEST_CASE("formation: matrices") {
  const std::vector<Vec2> two{{0, 0}, {2, 0}};
  const auto m = build_matrices(two, {});
  CHECK(m.laplacian(0, 0) == 4.0);
  CHECK(m.laplacian(0, 1) == -4.0);
  CHECK(m.laplacian(1, 1) == 4.0);

  const std::vector<Vec2> one{{3, 3}};
  CHECK(build_matrices(one, {}).laplacian.rows() == 1);
  CHECK(build_matrices(one, {}).laplacian(0, 0) == 0.0);

  const std::vector<Vec2> three{{0, 0}, {1, 0}, {2, 0}};
  CHECK(build_matrices(three, {}).degree(0, 0) == 5.0);

  const std::vector<Vec2> bad{{0, 0}, {std::nan(""), 0}};
  CHECK_THROWS_AS(build_matrices(bad, {}), InvalidArgument);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Vec2> p;
    for (int i = 0; i < 6; ++i) p.push_back(oracle::uniform_vec(rng, -3, 3));
    const auto mm = build_matrices(p, {oracle::uniform(rng, 0.5, 3.0), false});
    CHECK(mm.laplacian.rowwise().sum().cwiseAbs().maxCoeff() < 1e-9);
    CHECK((mm.laplacian - (mm.degree - mm.adjacency)).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        if (i != j) CHECK(mm.laplacian(i, j) <= 0.0);
      }
    }
  }
}

TEST_CASE("formation: normalized Laplacian keeps isolated vertices at zero") {
  const std::vector<Vec2> same{{1, 1}, {1, 1}};
  const auto m = build_matrices(same, {1.0, true});
  CHECK(m.laplacian.cwiseAbs().maxCoeff() == 0.0);
  const std::vector<Vec2> two{{0, 0}, {2, 0}};
  const auto n = build_matrices(two, {1.0, true});
  CHECK(n.laplacian(0, 0) == doctest::Approx(1.0));
  CHECK(n.laplacian(0, 1) == doctest::Approx(-1.0));
}

TEST_CASE("formation: error values") {
  const std::vector<Vec2> current{{0, 0}, {2, 0}};
  const std::vector<Vec2> desired{{0, 0}, {1, 0}};
  const auto d = build_matrices(desired, {});
  CHECK(formation_error(build_matrices(current, {}), d) == 36.0);
  CHECK(formation_error(d, d) == 0.0);
  CHECK_THROWS_AS(formation_error(build_matrices(current, {}), build_matrices(std::vector<Vec2>{{0, 0}}, {})),
                  InvalidArgument);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec2> p, q;
    for (int i = 0; i < 5; ++i) {
      p.push_back(oracle::uniform_vec(rng, -3, 3));
      q.push_back(oracle::uniform_vec(rng, -3, 3));
    }
    const WeightParams w{oracle::uniform(rng, 0.5, 2.0), false};
    const auto dq = build_matrices(q, w);
    const double base = formation_error(build_matrices(p, w), dq);
    CHECK(base >= 0.0);
    const Vec2 shift = oracle::uniform_vec(rng, -10, 10);
    auto shifted = p;
    for (auto& v : shifted) v += shift;
    CHECK(std::abs(formation_error(build_matrices(shifted, w), dq) - base) <= 1e-9 * std::max(1.0, base));
  }
}

TEST_CASE("formation: analytic gradient matches finite differences") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = oracle::uniform_int(rng, 2, 6);
    std::vector<Vec2> p, q;
    for (int i = 0; i < n; ++i) {
      p.push_back(oracle::uniform_vec(rng, -2, 2));
      q.push_back(oracle::uniform_vec(rng, -2, 2));
    }
    const WeightParams w{oracle::uniform(rng, 0.5, 2.0), false};
    const auto desired = build_matrices(q, w);
    const auto eval = formation_error_with_gradient(p, desired, w);
    CHECK(eval.value == doctest::Approx(formation_error(build_matrices(p, w), desired)).epsilon(1e-12));
    Eigen::VectorXd x(2 * n);
    for (int i = 0; i < n; ++i) x.segment<2>(2 * i) = p[static_cast<std::size_t>(i)];
    auto f = [&](const Eigen::VectorXd& v) {
      std::vector<Vec2> pts(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) pts[static_cast<std::size_t>(i)] = v.segment<2>(2 * i);
      return formation_error(build_matrices(pts, w), desired);
    };
    for (int k = 0; k < 2 * n; ++k) {
      const double fd = oracle::central_difference(f, x, k);
      const double an = eval.gradient[static_cast<std::size_t>(k / 2)](k % 2);
      CHECK(oracle::gradient_close(an, fd, 1e-6));
    }
  }
}

namespace {

std::map<double, int> column_occupancy(const FormationSpec& spec) {
  std::map<double, int> count;
  for (const auto& p : spec.relative_positions) count[std::round(p.y() * 1e9) / 1e9]++;
  return count;
}

}  // namespace

TEST_CASE("formation: interlaced structure") {
  const StructureParams params{0.6, 0.6, 0.6};
  const auto seven = generate_structure(7, 1.9, params);
  CHECK(seven.column_count == 3);
  const auto occ = column_occupancy(seven);
  REQUIRE(occ.size() == 3);
  CHECK(occ.at(0.6) == 3);
  CHECK(occ.at(0.0) == 2);
  CHECK(occ.at(-0.6) == 2);
  // Middle column is staggered by half a row.
  CHECK(seven.relative_positions[1].x() == doctest::Approx(-0.3));
  CHECK(seven.relative_positions[4].x() == doctest::Approx(-0.9));
  CHECK(seven.relative_positions[3].x() == doctest::Approx(-0.6));

  const auto single = generate_structure(1, 5.0, params);
  REQUIRE(single.size() == 1);
  CHECK(single.relative_positions[0].norm() == 0.0);
  CHECK(single.desired_laplacian.laplacian(0, 0) == 0.0);

  const auto four = generate_structure(4, 1.3, params);
  CHECK(four.column_count == 2);
  CHECK(four.relative_positions[0].y() == doctest::Approx(0.3));
  CHECK(four.relative_positions[1].y() == doctest::Approx(-0.3));
  CHECK(four.relative_positions[1].x() == doctest::Approx(-0.3));
  CHECK(four.relative_positions[3].x() == doctest::Approx(-0.9));

  CHECK_THROWS_AS(generate_structure(3, 0.5, params), InfeasibleStructure);
  CHECK(generate_structure(2, 100.0, params).column_count == 2);
}

TEST_CASE("formation: structure is laterally symmetric up to round-robin remainder") {
  const StructureParams params{0.6, 0.6, 0.6};
  for (int n = 1; n <= 12; ++n) {
    for (int c = 1; c <= 5; ++c) {
      const auto spec = structure_with_columns(n, c, params);
      const auto occ = column_occupancy(spec);
      double y_sum = 0.0;
      for (const auto& [y, count] : occ) {
        y_sum += y;
        const auto mirror = occ.find(std::round(-y * 1e9) / 1e9);
        REQUIRE(mirror != occ.end());
        CHECK(std::abs(mirror->second - count) <= 1);
      }
      CHECK(std::abs(y_sum) < 1e-9);
      if (n % std::min(n, c) == 0) {
        for (const auto& [y, count] : occ) CHECK(occ.at(std::round(-y * 1e9) / 1e9) == count);
      }
    }
  }
}
