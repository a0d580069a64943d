#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fst/stream.hpp>

#include <Eigen/QR>

#include <random>
#include <thread>

using namespace fst;

namespace {

RowMatrix random_orthogonal(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = gauss(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return RowMatrix(q);
}

Eigen::VectorXd random_unit(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = gauss(rng);
  x.normalize();
  return x;
}

}  // namespace

TEST_CASE("choose_params fixed values") {
  {
    const auto [j, k] = choose_params(1.0, 1.0, 1.0, 1);  // ln(m/eta) = 0
    CHECK(j == 30);
    CHECK(k == 1);
  }
  {
    const auto [j, k] = choose_params(1.0, 0.5, 0.01, 4096);
    CHECK(j == 119);
    CHECK(k == 26);
  }
  CHECK_THROWS_AS(choose_params(1.0, 0.0, 0.5, 16), std::invalid_argument);
  CHECK_THROWS_AS(choose_params(1.0, -1.0, 0.5, 16), std::invalid_argument);
}

TEST_CASE("choose_params: doubling gamma divides J by 4 up to ceiling") {
  for (double gamma : {0.1, 0.25, 0.7, 1.3}) {
    const auto [j1, k1] = choose_params(1.0, gamma, 0.5, 64);
    const auto [j2, k2] = choose_params(1.0, 2 * gamma, 0.5, 64);
    CHECK(k1 == k2);
    // j1/4 <= j2 <= j1/4 + 1 by ceiling arithmetic.
    CHECK(j2 >= j1 / 4);
    CHECK(j2 <= j1 / 4 + 1);
  }
}

TEST_CASE("inner_product_with_design fixed values") {
  const DesignParams p = DesignParams::make(2);
  Eigen::VectorXd x(4);
  x << 1, 2, 3, 4;

  // Kerdock(0,0): the all-ones column.
  CHECK(inner_product_with_design(x, DesignIndex::kerdock(0, BitVector::zero(2)), p) ==
        doctest::Approx(10.0));
  // Signs (+,+,+,-) from the k=2, s=1, w=0 design vector.
  CHECK(inner_product_with_design(x, DesignIndex::kerdock(1, BitVector::zero(2)), p) ==
        doctest::Approx(2.0));
  // Identity past the projection is the zero column.
  Eigen::VectorXd short_x(3);
  short_x << 1, 2, 3;
  CHECK(inner_product_with_design(short_x, DesignIndex::identity(coords_of_position(3, 2)), p) == 0.0);
  // Identity inside the projection picks sqrt(d) x_w.
  CHECK(inner_product_with_design(short_x, DesignIndex::identity(coords_of_position(1, 2)), p) ==
        doctest::Approx(4.0));
}

TEST_CASE("inner_product_with_design matches the materialized oracle") {
  for (int k : {2, 4, 6}) {
    const DesignParams p = DesignParams::make(k);
    std::mt19937_64 rng(100u + static_cast<unsigned>(k));
    std::normal_distribution<double> gauss;
    for (std::int64_t n : {p.d, p.d - 3, std::int64_t{1} + (p.d / 3)}) {
      Eigen::VectorXd x(n);
      for (Eigen::Index i = 0; i < n; ++i) x[i] = gauss(rng);
      for (int trial = 0; trial < 100; ++trial) {
        const auto ell = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(p.L));
        const DesignIndex idx = DesignIndex::from_linear(p, ell);
        const double expect = projected_design_column(p, n, idx).dot(x);
        CHECK(inner_product_with_design(x, idx, p) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("median_of_means fixed values") {
  // K=1 is the plain mean.
  Eigen::MatrixXd one_batch(1, 4);
  one_batch << 1, 2, 3, 6;
  CHECK(median_of_means(one_batch, 4, 1).mu[0] == doctest::Approx(3.0));

  // J=2, K=3 with batches {1,3}, {2,4}, {100,-100}: means (2,3,0), median 2.
  Eigen::MatrixXd samples(1, 6);
  samples << 1, 3, 2, 4, 100, -100;
  const Estimate est = median_of_means(samples, 2, 3);
  CHECK(est.mu[0] == doctest::Approx(2.0));
  CHECK(est.samples_used == 6);

  CHECK_THROWS_AS(median_of_means(samples, 2, 2), std::invalid_argument);
}

TEST_CASE("median_of_means with K=2 reduces to the empirical mean") {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd samples(5, 12);
  for (Eigen::Index i = 0; i < samples.size(); ++i) samples.data()[i] = gauss(rng);
  const Estimate est = median_of_means(samples, 6, 2);
  const Eigen::VectorXd mean = samples.rowwise().mean();
  CHECK((est.mu - mean).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("median convention: even K uses the midpoint of the central pair") {
  Eigen::MatrixXd means(1, 4);
  means << 7, 1, 3, 100;  // sorted: 1 3 7 100 -> median 5
  CHECK(median_of_batch_means(means)[0] == doctest::Approx(5.0));
  Eigen::MatrixXd odd(1, 5);
  odd << 9, 1, 3, 100, -4;  // median 3
  CHECK(median_of_batch_means(odd)[0] == doctest::Approx(3.0));
}

TEST_CASE("hard_threshold fixed values and monotonicity") {
  Eigen::VectorXd v(3);
  v << 0.6, -0.3, 0.5;
  const Eigen::VectorXd h = hard_threshold(v, 0.5);
  CHECK(h[0] == 0.6);
  CHECK(h[1] == 0.0);
  CHECK(h[2] == 0.5);  // boundary kept

  CHECK(hard_threshold(v, 0.0) == v);
  CHECK(hard_threshold(Eigen::VectorXd::Zero(4), 0.3).isZero(0));

  std::mt19937_64 rng(55);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd r(32);
  for (auto& t : r.reshaped()) t = gauss(rng);
  for (double lo : {0.1, 0.4}) {
    const Eigen::VectorXd a = hard_threshold(r, lo);
    const Eigen::VectorXd b = hard_threshold(r, lo + 0.3);
    for (Eigen::Index i = 0; i < r.size(); ++i)
      if (b[i] != 0.0) CHECK(a[i] != 0.0);  // support shrinks as eps grows
  }
}

TEST_CASE("transform with widen*s >= m equals exact hard thresholding") {
  const RowMatrix a = random_orthogonal(16, 1);
  const Sketch sk = preprocess(a);
  const Eigen::VectorXd x = random_unit(16, 2);
  const Eigen::VectorXd ax = a * x;

  StreamParams p;
  p.epsilon = 0.2;
  p.s = 2;
  p.widen = 8;  // 16 >= m: every row refined
  p.J = 3;
  p.K = 2;
  p.seed = 42;
  const TransformResult res = transform(sk, x, p);

  const Eigen::VectorXd expect = hard_threshold(ax, p.epsilon);
  CHECK(res.candidate_set.size() == 16);
  std::size_t found = 0;
  for (Eigen::Index i = 0; i < 16; ++i) {
    if (expect[i] != 0.0) {
      REQUIRE(found < res.support.size());
      CHECK(res.support[found] == i);
      CHECK(res.values[found] == doctest::Approx(expect[i]).epsilon(1e-12));
      ++found;
    }
  }
  CHECK(found == res.support.size());
}

TEST_CASE("transform on x = 0 returns an empty support") {
  const Sketch sk = preprocess(random_orthogonal(16, 3));
  StreamParams p;
  p.epsilon = 0.1;
  p.s = 2;
  p.J = 5;
  p.K = 2;
  const TransformResult res = transform(sk, Eigen::VectorXd::Zero(16), p);
  CHECK(res.support.empty());
  CHECK(res.values.empty());
  CHECK(res.estimate.mu.isZero(0));
}

TEST_CASE("one-spike recovery succeeds on 100 out of 100 seeds") {
  const RowMatrix a = random_orthogonal(16, 4);
  const Sketch sk = preprocess(a);
  const Eigen::VectorXd x = a.row(0).transpose();  // Ax = e_0 exactly

  StreamParams p;
  p.epsilon = 0.5;
  p.s = 1;
  p.widen = 10;
  p.J = 500;
  p.K = 3;

  int successes = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    p.seed = seed;
    const TransformResult res = transform(sk, x, p);
    if (res.support.size() == 1 && res.support[0] == 0 &&
        std::abs(res.values[0] - 1.0) <= 1e-10)
      ++successes;
  }
  CHECK(successes == 100);
}

TEST_CASE("soundness: reported values are exact entries of Ax") {
  const RowMatrix a = random_orthogonal(32, 5);
  const Sketch sk = preprocess(a);
  const Eigen::VectorXd x = random_unit(32, 6);
  const Eigen::VectorXd ax = a * x;

  StreamParams p;
  p.epsilon = 0.05;
  p.s = 4;
  p.J = 40;
  p.K = 3;
  p.seed = 7;
  const TransformResult res = transform(sk, x, p);
  CHECK(res.candidate_set.size() == 32);  // widen*s = 40 capped at m
  for (std::size_t i = 0; i < res.support.size(); ++i) {
    CHECK(std::abs(res.values[i] - ax[res.support[i]]) <= 1e-12);
    CHECK(std::abs(res.values[i]) >= p.epsilon);
  }
  // support is a subset of the candidate set
  for (const auto idx : res.support)
    CHECK(std::find(res.candidate_set.begin(), res.candidate_set.end(), idx) !=
          res.candidate_set.end());
}

TEST_CASE("estimator is unbiased over a deterministic sweep of the design") {
  const RowMatrix a = random_orthogonal(16, 8);
  const Sketch sk = preprocess(a);
  const Eigen::VectorXd x = random_unit(16, 9);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(16);
  for (std::int64_t ell = 0; ell < sk.L(); ++ell) {
    const DesignIndex idx = DesignIndex::from_linear(sk.design(), ell);
    mean += sk.column(ell) * inner_product_with_design(x, idx, sk.design());
  }
  mean /= static_cast<double>(sk.L());
  CHECK((mean - a * x).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("exact variance over the design obeys the 2|A|^2 bound (k=4)") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 5; ++trial) {
    RowMatrix a(6, 13);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = gauss(rng);
    const Sketch sk = preprocess(a);
    const Eigen::VectorXd x = random_unit(13, rng());

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(6);
    Eigen::VectorXd second = Eigen::VectorXd::Zero(6);
    for (std::int64_t ell = 0; ell < sk.L(); ++ell) {
      const DesignIndex idx = DesignIndex::from_linear(sk.design(), ell);
      const Eigen::VectorXd y = sk.column(ell) * inner_product_with_design(x, idx, sk.design());
      mean += y;
      second += y.cwiseAbs2();
    }
    mean /= static_cast<double>(sk.L());
    second /= static_cast<double>(sk.L());
    const Eigen::VectorXd variance = second - mean.cwiseAbs2();
    const double bound = 2.0 * sk.row_norm_max() * sk.row_norm_max() + 1e-9;
    CHECK(variance.maxCoeff() <= bound);
  }
}

TEST_CASE("transform is deterministic and gather-independent") {
  const RowMatrix a = random_orthogonal(32, 10);
  const Sketch sk = preprocess(a);
  const Eigen::VectorXd x = random_unit(32, 11);

  StreamParams p;
  p.epsilon = 0.05;
  p.s = 3;
  p.J = 25;
  p.K = 4;
  p.seed = 1234;

  const TransformResult r1 = transform(sk, x, p);
  const TransformResult r2 = transform(sk, x, p);
  const TransformResult r3 = transform_with_samples(sk, x, p, draw_and_gather(sk, p));

  CHECK(r1.support == r2.support);
  CHECK(r1.values == r2.values);
  CHECK(r1.candidate_set == r2.candidate_set);
  CHECK(r1.estimate.mu == r2.estimate.mu);

  CHECK(r1.support == r3.support);
  CHECK(r1.values == r3.values);
  CHECK(r1.candidate_set == r3.candidate_set);
  CHECK(r1.estimate.mu == r3.estimate.mu);
}

TEST_CASE("transform's fused accumulation matches median_of_means") {
  const RowMatrix a = random_orthogonal(16, 12);
  const Sketch sk = preprocess(a);
  const Eigen::VectorXd x = random_unit(16, 13);

  StreamParams p;
  p.epsilon = 0.1;
  p.s = 2;
  p.J = 11;
  p.K = 3;
  p.seed = 99;

  const DrawnSamples drawn = draw_samples(sk, p);
  Eigen::MatrixXd samples(sk.m(), p.J * p.K);
  for (std::size_t j = 0; j < drawn.indices.size(); ++j) {
    const DesignIndex idx = DesignIndex::from_linear(sk.design(), drawn.indices[j]);
    samples.col(static_cast<Eigen::Index>(j)) =
        sk.column(drawn.indices[j]) * inner_product_with_design(x, idx, sk.design());
  }
  const Estimate direct = median_of_means(samples, p.J, p.K);
  const TransformResult res = transform_with_samples(sk, x, p, drawn);
  CHECK((res.estimate.mu - direct.mu).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(res.estimate.samples_used == direct.samples_used);
}

TEST_CASE("concurrent transforms over one shared sketch agree with serial runs") {
  const RowMatrix a = random_orthogonal(32, 20);
  const Sketch sk = preprocess(a);

  std::vector<Eigen::VectorXd> xs;
  std::vector<StreamParams> ps;
  for (int t = 0; t < 8; ++t) {
    xs.push_back(random_unit(32, 100u + static_cast<std::uint64_t>(t)));
    StreamParams p;
    p.epsilon = 0.05;
    p.s = 3;
    p.J = 30;
    p.K = 3;
    p.seed = 500u + static_cast<std::uint64_t>(t);
    ps.push_back(p);
  }

  std::vector<TransformResult> serial;
  for (int t = 0; t < 8; ++t) serial.push_back(transform(sk, xs[t], ps[t]));

  std::vector<TransformResult> parallel(8);
  std::vector<std::thread> pool;
  for (int t = 0; t < 8; ++t)
    pool.emplace_back([&, t] { parallel[t] = transform(sk, xs[t], ps[t]); });
  for (auto& th : pool) th.join();

  for (int t = 0; t < 8; ++t) {
    CHECK(parallel[t].support == serial[t].support);
    CHECK(parallel[t].values == serial[t].values);
    CHECK(parallel[t].estimate.mu == serial[t].estimate.mu);
  }
}

TEST_CASE("choose_params validates eta") {
  CHECK_THROWS_AS(choose_params(1.0, 0.5, 0.0, 16), std::invalid_argument);
  CHECK_THROWS_AS(choose_params(1.0, 0.5, 1.5, 16), std::invalid_argument);
  CHECK_NOTHROW(choose_params(1.0, 0.5, 1.0, 16));
  CHECK_THROWS_AS(choose_params(1.0, 0.5, 0.5, 0), std::invalid_argument);
}

TEST_CASE("transform validates dimensions and parameters") {
  const Sketch sk = preprocess(random_orthogonal(16, 14));
  StreamParams p;
  p.epsilon = 0.1;
  p.s = 1;
  p.J = 2;
  p.K = 2;
  CHECK_THROWS_AS(transform(sk, Eigen::VectorXd::Zero(15), p), std::invalid_argument);

  StreamParams bad = p;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(transform(sk, Eigen::VectorXd::Zero(16), bad), std::invalid_argument);
  bad = p;
  bad.delta = 0.2;  // delta >= epsilon
  CHECK_THROWS_AS(transform(sk, Eigen::VectorXd::Zero(16), bad), std::invalid_argument);
  bad = p;
  bad.J = std::numeric_limits<std::int64_t>::max() / 2;
  bad.K = 3;
  CHECK_THROWS_AS(transform(sk, Eigen::VectorXd::Zero(16), bad), std::overflow_error);
}
