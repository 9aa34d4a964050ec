#include <doctest.h>

#include <random>

#include "phl/error.hpp"
#include "phl/numerics.hpp"
#include "phl/system.hpp"
#include "support.hpp"

using namespace phl;
using phl::testing::max_diff;

namespace {

Matrix sample_covariance(const Matrix& rows, std::size_t skip) {
  const std::size_t n = rows.rows() - skip, d = rows.cols();
  Matrix s(d, d);
  for (std::size_t t = skip; t < rows.rows(); ++t)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) s(i, j) += rows(t, i) * rows(t, j);
  return s * (1.0 / static_cast<double>(n));
}

// Misspecified system with random stable A and a single noisy output.
LtiModel random_mis(std::mt19937_64& gen, std::size_t dx, std::size_t dy) {
  return {phl::testing::random_stable(gen, dx, 0.85), Matrix(dx, 0), Matrix::identity(dx),
          phl::testing::random_matrix(gen, dy, dx), Matrix::identity(dy)};
}

}  // namespace

TEST_CASE("model validation") {
  const Matrix a = Matrix::from_rows({{0.5}});
  CHECK_NOTHROW(LtiModel(a, Matrix(1, 0), Matrix::identity(1), Matrix::identity(1), Matrix(1, 1)));

  SUBCASE("unstable A") {
    try {
      LtiModel(Matrix::from_rows({{1.0}}), Matrix(1, 0), Matrix::identity(1), Matrix::identity(1),
               Matrix(1, 1));
      FAIL("expected UnstableA");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::UnstableA);
    }
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(LtiModel(a, Matrix(2, 1), Matrix::identity(1), Matrix::identity(1), Matrix(1, 1)),
                    Error);
  }
  SUBCASE("partial observation needs measurement noise") {
    try {
      LtiModel(Matrix::from_rows({{0.5, 0.0}, {0.0, 0.5}}), Matrix(2, 0), Matrix::identity(2),
               Matrix::from_rows({{1.0, 0.0}}), Matrix(1, 1));
      FAIL("expected InvalidModel");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidModel);
    }
  }
  SUBCASE("regime detection") {
    CHECK(eq10_system(0.5, true).well_specified());
    CHECK_FALSE(eq10_system(0.5, false).well_specified());
    CHECK_FALSE(example1_system().well_specified());
  }
}

TEST_CASE("simulation is deterministic and stream separated") {
  const LtiModel m = eq10_system(0.9, true);
  const Trajectory a = simulate(m, 200, 11);
  const Trajectory b = simulate(m, 200, 11);
  const Trajectory c = simulate(m, 200, 12);
  CHECK(a.y == b.y);
  CHECK(a.u == b.u);
  CHECK_FALSE(a.y == c.y);
  CHECK(a.y.rows() == 200);
  CHECK(a.u.cols() == 1);
  // x starts at rest.
  CHECK(a.y(0, 0) == 0.0);
  CHECK(a.y(0, 1) == 0.0);

  // Zeroing inputs leaves the process noise stream untouched.
  const Trajectory z = simulate(m, 200, 11, {true, false});
  CHECK(z.u.max_abs() == 0.0);
  CHECK(z.y(1, 0) == a.y(1, 0));
}

TEST_CASE("stationary covariance matches long simulation") {
  const LtiModel m = eq10_system(0.75, true);
  const CovarianceBundle b = covariances(m, 3);
  const Trajectory t = simulate(m, 400000, 3);
  const Matrix s = sample_covariance(t.y, 1000);
  CHECK(max_diff(s, b.sigma_x) < 0.03 * b.sigma_x.max_abs());
  CHECK(max_diff(b.sigma_y, b.sigma_x) == 0.0);
  CHECK(b.sigma_z.rows() == 2 + 3);
  CHECK(max_diff(b.sigma_z.block(2, 2, 3, 3), Matrix::identity(3)) == 0.0);
  CHECK_FALSE(b.has_kalman);
  CHECK_THROWS_AS(b.kalman_k(), Error);
}

TEST_CASE("well-specified rollout operators") {
  const double a = 0.8;
  const LtiModel m = eq10_system(a, true);
  const int h = 4;
  const SystemAnalysis sys = analyze(m, h);
  // G* blocks: [A^k | A^{k-1-j} B], Gamma_w blocks A^{k-1-j}.
  for (int k = 1; k <= h; ++k) {
    CHECK(max_diff(sys.ops.g_star.block(2 * (k - 1), 0, 2, 2), power(m.a(), k)) < 1e-14);
    for (int j = 0; j < h; ++j) {
      const Matrix gu = sys.ops.g_star.block(2 * (k - 1), 2 + j, 2, 1);
      const Matrix gw = sys.ops.gamma_w.block(2 * (k - 1), 2 * j, 2, 2);
      if (j < k) {
        CHECK(max_diff(gu, power(m.a(), k - 1 - j) * m.b()) < 1e-14);
        CHECK(max_diff(gw, power(m.a(), k - 1 - j)) < 1e-14);
      } else {
        CHECK(gu.max_abs() == 0.0);
        CHECK(gw.max_abs() == 0.0);
      }
    }
  }
}

TEST_CASE("innovations form reproduces the output covariance") {
  const LtiModel m = example1_system();
  const CovarianceBundle b = covariances(m, 2);
  REQUIRE(b.has_kalman);
  // Sigma_y = C Sigma_xhat C^T + D_e D_e^T in the innovations form.
  const Matrix sy = congruence(m.c(), b.sigma_xhat) + mul_transposed(b.d_e, b.d_e);
  CHECK(max_diff(sy, b.sigma_y) < 1e-9 * b.sigma_y.max_abs());

  const Trajectory orig = simulate(m, 300000, 5);
  const Trajectory innov = innovations_simulate(m, b, 300000, 5);
  const double s0 = sample_covariance(orig.y, 2000)(0, 0);
  const double s1 = sample_covariance(innov.y, 2000)(0, 0);
  CHECK(s0 == doctest::Approx(b.sigma_y(0, 0)).epsilon(0.05));
  CHECK(s1 == doctest::Approx(b.sigma_y(0, 0)).epsilon(0.05));
}

TEST_CASE("misspecified operators") {
  std::mt19937_64 gen(21);
  for (int rep = 0; rep < 20; ++rep) {
    const LtiModel m = random_mis(gen, 3, 1);
    const int h = 3;
    const SystemAnalysis sys = analyze(m, h);
    const Matrix& k = sys.bundle.kalman_k();
    CHECK(numerics::spectral_radius(m.a() - k * m.c()) < 1.0);
    for (int i = 1; i <= h; ++i) {
      const Matrix cak = m.c() * power(m.a(), i - 1);
      CHECK(max_diff(sys.ops.phi.block(i - 1, 0, 1, 3), cak * (m.a() - k * m.c())) < 1e-12);
      CHECK(max_diff(sys.ops.g_star.block(i - 1, 0, 1, 1), cak * k) < 1e-12);
      CHECK(sys.ops.gamma_e(i - 1, i - 1) == doctest::Approx(sys.bundle.d_e(0, 0)));
    }
  }
}

TEST_CASE("model JSON round trip") {
  const LtiModel m = eq10_system(0.75, true);
  const LtiModel back = model_from_json(model_to_json(m));
  CHECK(back.a() == m.a());
  CHECK(back.b() == m.b());
  CHECK(back.c() == m.c());
  CHECK(back.well_specified());

  const LtiModel scalar =
      model_from_json(R"({"A": 0.5, "B_w": 1, "C": 1, "D_v": 0})");
  CHECK(scalar.du() == 0);
  CHECK(scalar.a()(0, 0) == 0.5);

  CHECK_THROWS_AS(model_from_json(R"({"A": 0.5, "B_w": 1, "C": 1, "D_v": 0, "Q": 1})"), Error);
  CHECK_THROWS_AS(model_from_json("not json"), Error);
}
