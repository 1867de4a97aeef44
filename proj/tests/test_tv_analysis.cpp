#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "quadtv/pipelines.hpp"
#include "quadtv/tv_analysis.hpp"

using namespace quadtv;

namespace {

GridFunction random_function(const MeshPtr& m, std::mt19937& rng, int channels = 1) {
  std::uniform_real_distribution<double> unif(-1, 1);
  GridFunction u(m, channels);
  for (Eigen::Index i = 0; i < u.values().size(); ++i) u.values()[i] = unif(rng);
  return u;
}

}  // namespace

TEST_CASE("discrete TV by hand") {
  const MeshPtr m = make_mesh(QuadMesh::uniform(2, 2, {0, 0, 1, 1}));
  GridFunction u(m, 1);
  u.values() << 0, 1, 0, 1;
  CHECK(discrete_tv(u, 1) == doctest::Approx(1.0));
  CHECK(discrete_tv(u, 2) == doctest::Approx(1.0));
  CHECK(discrete_tv(GridFunction::constant(m, 1, 3.0), 2) == 0.0);
}

TEST_CASE("TV norm equivalence between r = 1 and r = 2") {
  std::mt19937 rng(2);
  const MeshPtr m = make_mesh(QuadMesh::uniform(5, 5, {0, 0, 1, 1}).refine(std::vector<int>{6, 12}));
  for (int k = 0; k < 20; ++k) {
    const GridFunction u = random_function(m, rng, 1 + k % 2);
    const double t1 = discrete_tv(u, 1), t2 = discrete_tv(u, 2);
    CHECK(t2 <= t1 + 1e-14);
    CHECK(t1 <= std::sqrt(2.0 * u.channels()) * t2 + 1e-14);
  }
}

TEST_CASE("weighted TV") {
  std::mt19937 rng(3);
  const MeshPtr m = make_mesh(QuadMesh::uniform(4, 4, {0, 0, 2, 2}).refine(std::vector<int>{5}));
  const GridFunction u = random_function(m, rng);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m->size());
  CHECK(weighted_tv(u, ones, 2) == doctest::Approx(discrete_tv(u, 2)).epsilon(1e-14));
  CHECK(weighted_tv(u, Eigen::VectorXd::Zero(m->size()), 2) == 0.0);
  std::uniform_real_distribution<double> unif(0, 2);
  Eigen::VectorXd mu(m->size());
  for (int i = 0; i < m->size(); ++i) mu[i] = unif(rng);
  const Eigen::VectorXd gn = gradient_norms(u, 1);
  double direct = 0.0;
  for (int i = 0; i < m->size(); ++i) direct += m->cell(i).h * m->cell(i).h * mu[i] * gn[i];
  CHECK(weighted_tv(u, mu, 1) == doctest::Approx(direct).epsilon(1e-14));
}

TEST_CASE("local refinement of one corner with r = 1") {
  // 2x2 roots, the bottom-right root split once.
  const MeshPtr coarse = make_mesh(QuadMesh::uniform(2, 2, {0, 0, 2, 2}));
  const MeshPtr fine = make_mesh(coarse->refine(std::vector<int>{3}));
  GridFunction u(coarse, 1);
  u.values() << 0.3, -1.2, 2.5, 0.7;
  const Eigen::VectorXd mu = compute_mu(u, fine, 1);
  REQUIRE(mu.size() == 7);
  const double expected[7] = {1.0, 0.75, 0.75, 1.0, 1.0, 1.0, 1.0};
  for (int i = 0; i < 7; ++i) CHECK(mu[i] == doctest::Approx(expected[i]).epsilon(1e-14));
  const CompensationReport rep = verify_compensation(u, fine, 1);
  CHECK(rep.holds);
}

TEST_CASE("uniform refinement with r = 1 keeps the TV") {
  std::mt19937 rng(4);
  const MeshPtr coarse = make_mesh(QuadMesh::uniform(6, 5, {0, 0, 6, 5}));
  const MeshPtr fine = make_mesh(coarse->refine_all());
  for (int k = 0; k < 5; ++k) {
    const GridFunction u = random_function(coarse, rng);
    const Eigen::VectorXd mu = compute_mu(u, fine, 1);
    CHECK((mu.array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK(discrete_tv(project_fine(u, fine), 1) == doctest::Approx(discrete_tv(u, 1)).epsilon(1e-13));
  }
}

TEST_CASE("uniform refinement with r = 2 raises the TV") {
  std::mt19937 rng(5);
  const MeshPtr coarse = make_mesh(QuadMesh::uniform(6, 6, {0, 0, 1, 1}));
  const MeshPtr fine = make_mesh(coarse->refine_all());
  bool some_below_one = false;
  for (int k = 0; k < 20; ++k) {
    const GridFunction u = random_function(coarse, rng);
    const Eigen::VectorXd mu = compute_mu(u, fine, 2);
    CHECK(mu.minCoeff() > 0.0);
    CHECK(mu.maxCoeff() <= 1.0 + 1e-12);
    some_below_one = some_below_one || mu.minCoeff() < 1.0 - 1e-6;
    CHECK(discrete_tv(project_fine(u, fine), 2) > discrete_tv(u, 2));
  }
  CHECK(some_below_one);
}

TEST_CASE("compensation identity on random adaptive refinements") {
  std::mt19937 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    MeshPtr coarse = make_mesh(QuadMesh::uniform(4, 4, {0, 0, 4, 4}).refine(std::vector<int>{trial % 16}));
    std::uniform_int_distribution<int> pick(0, coarse->size() - 1);
    std::vector<int> marked;
    for (int k = 0; k < 5; ++k) marked.push_back(pick(rng));
    MeshPtr fine = make_mesh(coarse->refine(marked));
    if (!is_one_step_refinement(*coarse, *fine)) continue;
    for (double r : {1.0, 2.0}) {
      const GridFunction u = random_function(coarse, rng, 1 + trial % 2);
      const CompensationReport rep = verify_compensation(u, fine, r);
      CHECK(rep.holds);
      CHECK(std::abs(rep.defect) <= 1e-10 * (1 + rep.tv_coarse));
      CHECK(rep.mu_min > 0.0);
    }
  }
}

TEST_CASE("disk data after one adaptive refinement") {
  const MeshPtr coarse = make_mesh(QuadMesh::uniform(16, 16, {-2, -2, 4, 4}));
  const GridFunction u = disk_data(coarse, 1.5);
  std::vector<int> cut;
  for (int i = 0; i < coarse->size(); ++i)
    if (u(0, i) > 0.0 && u(0, i) < 1.0) cut.push_back(i);
  const MeshPtr fine = make_mesh(coarse->refine(cut));
  REQUIRE(is_one_step_refinement(*coarse, *fine));
  const CompensationReport rep = verify_compensation(u, fine, 2);
  CHECK(rep.holds);
  CHECK(rep.tv_fine >= rep.tv_coarse);
}

TEST_CASE("constant functions are trivially compensated") {
  const MeshPtr coarse = make_mesh(QuadMesh::uniform(3, 3, {0, 0, 3, 3}));
  const MeshPtr fine = make_mesh(coarse->refine(std::vector<int>{4}));
  const CompensationReport rep = verify_compensation(GridFunction::constant(coarse, 1, 1.0), fine, 2);
  CHECK(rep.tv_coarse == 0.0);
  CHECK(rep.tv_fine_weighted == 0.0);
  CHECK(rep.holds);
  CHECK((rep.mu.array() == 1.0).all());
}

TEST_CASE("refining a cell twice is rejected") {
  const MeshPtr coarse = make_mesh(QuadMesh::uniform(2, 2, {0, 0, 2, 2}));
  const MeshPtr fine = make_mesh(coarse->refine(std::vector<int>{0}).refine(std::vector<int>{3}));
  CHECK_FALSE(is_one_step_refinement(*coarse, *fine));
  CHECK(is_one_step_refinement(*coarse, *make_mesh(coarse->refine(std::vector<int>{0}))));
  CHECK_THROWS_AS(compute_mu(GridFunction::constant(coarse, 1, 0.0), fine, 2), std::invalid_argument);
}
