#include <algorithm>
#include <cmath>
#include <random>
#include <boost/math/distributions/students_t.hpp>
#include <Eigen/LU>

#include "doctest.h"
#include "sgdlm/core/errors.hpp"
#include "sgdlm/core/special_functions.hpp"
#include "sgdlm/dlm/filter.hpp"
#include "support.hpp"

using namespace sgdlm;
using namespace sgdlm::dlm;

namespace {

NormalGamma scalar_prior(double a, double r_scale, double r, double c) {
  NormalGamma ng;
  ng.location = Vector::Constant(1, a);
  ng.scale_matrix = Matrix::Constant(1, 1, r_scale);
  ng.dof = r;
  ng.variance_estimate = c;
  return ng;
}

NormalGamma random_prior(std::mt19937_64& rng, int p) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  Matrix b(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) b(i, j) = n(rng);
  NormalGamma ng;
  ng.location = Vector(p);
  for (int i = 0; i < p; ++i) ng.location[i] = n(rng);
  ng.scale_matrix = b * b.transpose() / p + 0.1 * Matrix::Identity(p, p);
  ng.dof = u(rng) * 5.0;
  ng.variance_estimate = u(rng);
  return ng;
}

// Plain-array transcription of the update recursions.
struct Oracle {
  std::vector<double> m;
  std::vector<std::vector<double>> c;
  double n, s, e, q;
};

Oracle transcribe(const NormalGamma& prior, const Vector& f, double y) {
  const int p = static_cast<int>(f.size());
  double fa = 0.0;
  for (int i = 0; i < p; ++i) fa += f[i] * prior.location[i];
  std::vector<double> rf(p, 0.0);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) rf[i] += prior.scale_matrix(i, j) * f[j];
  double frf = 0.0;
  for (int i = 0; i < p; ++i) frf += f[i] * rf[i];
  Oracle o;
  o.e = y - fa;
  o.q = prior.variance_estimate + frf;
  std::vector<double> gain(p);
  for (int i = 0; i < p; ++i) gain[i] = rf[i] / o.q;
  const double r = prior.dof;
  const double z = (r + o.e * o.e / o.q) / (r + 1.0);
  o.m.resize(p);
  o.c.assign(p, std::vector<double>(p));
  for (int i = 0; i < p; ++i) {
    o.m[i] = prior.location[i] + gain[i] * o.e;
    for (int j = 0; j < p; ++j) o.c[i][j] = z * (prior.scale_matrix(i, j) - o.q * gain[i] * gain[j]);
  }
  o.n = r + 1.0;
  o.s = z * prior.variance_estimate;
  return o;
}

}  // namespace

TEST_CASE("kalman_update hand example") {
  const auto res = kalman_update(scalar_prior(0.0, 1.0, 4.0, 1.0), Vector::Ones(1), 1.0);
  CHECK(res.forecast_error == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(res.forecast_variance_factor == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(res.posterior.location[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(res.posterior.scale_matrix(0, 0) == doctest::Approx(0.45).epsilon(1e-15));
  CHECK(res.posterior.dof == 5.0);
  CHECK(res.posterior.variance_estimate == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("kalman_update with zero forecast error") {
  std::mt19937_64 rng(1);
  const auto prior = random_prior(rng, 3);
  Vector f(3);
  f << 1.0, 0.2, -0.3;
  const auto res = kalman_update(prior, f, f.dot(prior.location));
  CHECK((res.posterior.location - prior.location).norm() < 1e-14);
  CHECK(res.posterior.variance_estimate ==
        doctest::Approx(prior.variance_estimate * prior.dof / (prior.dof + 1.0)).epsilon(1e-14));
}

TEST_CASE("kalman_update agrees with a transcription oracle on random cases") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int c = 0; c < 1000; ++c) {
    const int p = 1 + c % 4;
    const auto prior = random_prior(rng, p);
    Vector f(p);
    for (int i = 0; i < p; ++i) f[i] = n(rng);
    const double y = 3.0 * n(rng);
    const auto res = kalman_update(prior, f, y);
    const auto o = transcribe(prior, f, y);
    CHECK(std::abs(res.forecast_error - o.e) <= 1e-12 * std::max(1.0, std::abs(o.e)));
    CHECK(std::abs(res.forecast_variance_factor - o.q) <= 1e-12 * std::max(1.0, o.q));
    for (int i = 0; i < p; ++i) {
      CHECK(std::abs(res.posterior.location[i] - o.m[i]) <= 1e-12 * std::max(1.0, std::abs(o.m[i])));
      for (int j = 0; j < p; ++j) {
        CHECK(std::abs(res.posterior.scale_matrix(i, j) - o.c[i][j]) <= 1e-12);
      }
    }
    CHECK(res.posterior.dof == o.n);
    CHECK(std::abs(res.posterior.variance_estimate - o.s) <= 1e-12 * o.s);
    CHECK(res.posterior.scale_matrix == res.posterior.scale_matrix.transpose());
  }
}

TEST_CASE("kalman_update rejects nonpositive q and bad dimensions") {
  auto prior = scalar_prior(0.0, 1.0, 4.0, 1.0);
  CHECK_THROWS_AS(kalman_update(prior, Vector::Ones(2), 1.0), DimensionError);
  prior.variance_estimate = -0.5;
  CHECK_THROWS_AS(kalman_update(prior, Vector::Zero(1), 1.0), NumericalDegeneracyError);
}

TEST_CASE("evolve examples") {
  NormalGamma post = scalar_prior(0.5, 0.45, 5.0, 0.9);
  const auto pr = evolve(post, 0.95, 0.9);
  CHECK(pr.location[0] == 0.5);
  CHECK(pr.scale_matrix(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pr.dof == doctest::Approx(4.75).epsilon(1e-15));
  CHECK(pr.variance_estimate == 0.9);
  CHECK(evolve(post, 1.0, 1.0) == post);
  std::mt19937_64 rng(3);
  const auto p3 = random_prior(rng, 3);
  CHECK(evolve(p3, 0.9, 0.5).scale_matrix == 2.0 * p3.scale_matrix);
  CHECK_THROWS_AS(evolve(post, 0.0, 0.9), DomainError);
  CHECK_THROWS_AS(evolve(post, 0.9, 1.1), DomainError);
}

TEST_CASE("evolve_block examples") {
  NormalGamma post;
  post.location = Vector::Zero(2);
  post.scale_matrix.resize(2, 2);
  post.scale_matrix << 0.04, 0.01, 0.01, 0.09;
  post.dof = 10.0;
  post.variance_estimate = 1.0;
  const auto pr = evolve_block(post, 0.95, 0.8, 0.9);
  CHECK(pr.scale_matrix(0, 0) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(pr.scale_matrix(1, 1) == doctest::Approx(0.10).epsilon(1e-15));
  CHECK(pr.scale_matrix(0, 1) == 0.0);
  CHECK(pr.scale_matrix(1, 0) == 0.0);
  CHECK(pr.dof == doctest::Approx(9.5).epsilon(1e-15));

  post.scale_matrix(0, 1) = post.scale_matrix(1, 0) = 0.0;
  CHECK(evolve_block(post, 0.97, 0.85, 0.85) == evolve(post, 0.97, 0.85));
  CHECK(evolve_block(post, 0.97, 0.85, 0.6).scale_matrix(0, 1) == 0.0);

  // Three dimensions: the gamma block keeps its internal covariance.
  std::mt19937_64 rng(4);
  const auto p3 = random_prior(rng, 3);
  const auto e3 = evolve_block(p3, 0.9, 0.8, 0.7);
  CHECK(e3.scale_matrix(1, 2) == doctest::Approx(p3.scale_matrix(1, 2) / 0.7).epsilon(1e-15));
  CHECK(e3.scale_matrix(0, 2) == 0.0);

  // A one-dimensional state only has the level block.
  CHECK(evolve_block(scalar_prior(0.5, 0.45, 5.0, 0.9), 0.95, 0.9, 0.3) ==
        evolve(scalar_prior(0.5, 0.45, 5.0, 0.9), 0.95, 0.9));
}

TEST_CASE("one_step_predictive") {
  const auto t = one_step_predictive(scalar_prior(0.0, 1.0, 4.0, 1.0), Vector::Ones(1));
  CHECK(t.dof == 4.0);
  CHECK(t.mode == 0.0);
  CHECK(t.scale == 2.0);
}

TEST_CASE("one_step_predictive matches forward-sampled observations") {
  NormalGamma prior = make_block_prior(2, 9.0, 0.4, 0.5, 0.3);
  prior.location << -0.2, 0.6;
  Vector f(2);
  f << 1.0, -1.3;
  const auto pred = one_step_predictive(prior, f);
  Engine rng = StreamKey(77).engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> ys;
  for (const auto& d : sample_normal_gamma(prior, 100000, rng)) {
    ys.push_back(f.dot(d.theta) + normal(rng) / std::sqrt(d.lambda));
  }
  const boost::math::students_t_distribution<double> t(pred.dof);
  CHECK(testing::ks_statistic(ys, [&](double y) {
          return boost::math::cdf(t, (y - pred.mode) / std::sqrt(pred.scale));
        }) < 0.01);
}

TEST_CASE("log_likelihood over one day is a single predictive density") {
  const auto prior = scalar_prior(0.1, 0.5, 6.0, 0.3);
  const std::vector<double> y{0.4, -0.2, 0.9};
  const Matrix f = Matrix::Ones(3, 1);
  const DiscountSet d{0.95, 0.9, 0.9};
  const double ll = log_likelihood(y, f, prior, d, 1, 1);
  CHECK(ll == doctest::Approx(student_t_log_density(-0.2, 6.0, 0.1, 0.8)).epsilon(1e-14));
}

TEST_CASE("log_likelihood is sequential") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> y(60);
  for (double& v : y) v = n(rng);
  y[50] = 4.0;
  const Matrix f = Matrix::Ones(60, 1);
  const auto prior = scalar_prior(0.0, 1.0, 5.0, 1.0);
  const DiscountSet d{0.95, 0.9, 0.9};
  const double base = log_likelihood(y, f, prior, d, 0, 59);
  auto shuffled = y;
  std::reverse(shuffled.begin() + 30, shuffled.end());
  CHECK(log_likelihood(shuffled, f, prior, d, 0, 59) != base);
}

TEST_CASE("log_likelihood per day approaches the normal entropy on iid N(0,1)") {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> n(0.0, 1.0);
  const int T = 500;
  std::vector<double> y(T);
  for (double& v : y) v = n(rng);
  const Matrix f = Matrix::Ones(T, 1);
  const DiscountSet d{0.99, 0.99, 0.99};
  const auto prior = scalar_prior(0.0, 1.0, 5.0, 1.0);
  // Days 300..499: the filter has adapted by then.
  Filter filter(prior, d);
  double late = 0.0;
  for (int t = 0; t < T; ++t) {
    const double ll = filter.step(Vector::Ones(1), y[t]);
    if (t >= 300) late += ll;
  }
  CHECK(std::abs(late / 200.0 - (-1.4189385332046727)) < 0.1);
}

TEST_CASE("log_likelihood alignment errors") {
  const std::vector<double> y{0.1, 0.2, 0.3};
  const auto prior = scalar_prior(0.0, 1.0, 5.0, 1.0);
  const DiscountSet d;
  CHECK_THROWS_AS(log_likelihood(y, Matrix::Ones(2, 1), prior, d, 0, 1), AlignmentError);
  CHECK_THROWS_AS(log_likelihood(y, Matrix::Ones(3, 1), prior, d, 1, 3), AlignmentError);
  CHECK_THROWS_AS(log_likelihood(y, Matrix::Ones(3, 1), prior, d, 2, 1), AlignmentError);
}

TEST_CASE("filter without discounting equals conjugate Bayesian regression") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  const int p = 3;
  const int T = 80;
  Matrix x(T, p);
  Vector y(T);
  for (int t = 0; t < T; ++t) {
    x(t, 0) = 1.0;
    x(t, 1) = n(rng);
    x(t, 2) = n(rng);
    y[t] = 0.3 - 0.5 * x(t, 1) + 0.8 * x(t, 2) + 0.7 * n(rng);
  }
  NormalGamma prior = make_block_prior(p, 4.0, 0.8, 2.0, 1.5);
  prior.location << 0.1, 0.0, -0.1;
  NormalGamma post = prior;
  for (int t = 0; t < T; ++t) {
    post = evolve(kalman_update(post, x.row(t).transpose(), y[t]).posterior, 1.0, 1.0);
  }

  // Closed form with theta | lambda ~ N(a, R / (c lambda)):
  // precision P = c R^{-1} + X'X, mean = P^{-1} (c R^{-1} a + X'y),
  // n = r + T, n s = r c + y'y + c a'R^{-1}a - mean' P mean, C = s P^{-1}.
  const Matrix rinv = prior.scale_matrix.inverse();
  const double c0 = prior.variance_estimate;
  const Matrix prec = c0 * rinv + x.transpose() * x;
  const Vector mean = prec.ldlt().solve(c0 * rinv * prior.location + x.transpose() * y);
  const double nT = prior.dof + T;
  const double ns = prior.dof * c0 + y.squaredNorm() + c0 * prior.location.dot(rinv * prior.location) -
                    mean.dot(prec * mean);
  const double s = ns / nT;
  const Matrix cov = s * prec.inverse();
  CHECK(post.dof == nT);
  CHECK(std::abs(post.variance_estimate - s) <= 1e-10 * s);
  CHECK((post.location - mean).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((post.scale_matrix - cov).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("dof recursions n = r + 1 and r' = beta n") {
  Filter filter(scalar_prior(0.0, 1.0, 5.0, 1.0), DiscountSet{0.9, 0.95, 0.95});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const double r = filter.prior().dof;
    filter.step(Vector::Ones(1), n(rng));
    CHECK(filter.state().posterior->dof == r + 1.0);
    CHECK(filter.prior().dof == doctest::Approx(0.9 * (r + 1.0)).epsilon(1e-15));
    CHECK(filter.state().posterior->scale_matrix.allFinite());
  }
}
