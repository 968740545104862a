#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>

#include "helpers.hpp"
#include "invreg/dataset.hpp"
#include "invreg/linalg.hpp"
#include "invreg/moments.hpp"
#include "invreg/rng.hpp"

using namespace invreg;
using testutil::make_dataset;
using testutil::make_matrix;
using testutil::make_vector;

namespace {

MomentSummary summary_with_cov(const Eigen::MatrixXd& cov) {
  MomentSummary s;
  s.count = 2;
  s.mean = Eigen::VectorXd::Zero(cov.rows());
  s.cov = cov;
  return s;
}

MomentSummary summary_with_mean(const Eigen::VectorXd& mean) {
  MomentSummary s;
  s.count = 2;
  s.mean = mean;
  s.cov = Eigen::MatrixXd::Zero(mean.size(), mean.size());
  return s;
}

// the two-environment pair with covariances diag(2,1) and diag(1,2)
std::vector<MomentSummary> crossing_pair() {
  return {summary_with_cov(make_matrix({{2.0, 0.0}, {0.0, 1.0}})),
          summary_with_cov(make_matrix({{1.0, 0.0}, {0.0, 2.0}}))};
}

}  // namespace

TEST_CASE("env_moment_summaries uses divisor n") {
  const auto ds =
      make_dataset({{0.0, 0.0}, {2.0, 0.0}}, {}, {"a", "a"});
  const auto [_, view] = split_views(ds);
  const auto summaries = env_moment_summaries(view);
  REQUIRE(summaries.size() == 1);
  CHECK(summaries[0].mean == make_vector({1.0, 0.0}));
  CHECK(summaries[0].cov == make_matrix({{1.0, 0.0}, {0.0, 0.0}}));
  CHECK(summaries[0].count == 2);
}

TEST_CASE("single-row environment has zero covariance") {
  const auto ds = make_dataset({{5.0}}, {}, {"a"});
  const auto [_, view] = split_views(ds);
  const auto summaries = env_moment_summaries(view);
  CHECK(summaries[0].mean[0] == 5.0);
  CHECK(summaries[0].cov(0, 0) == 0.0);
}

TEST_CASE("duplicating every row leaves the summaries unchanged") {
  const auto ds = make_dataset({{1.0, 2.0}, {3.0, -1.0}}, {}, {"a", "a"});
  const auto ds2 = make_dataset(
      {{1.0, 2.0}, {3.0, -1.0}, {1.0, 2.0}, {3.0, -1.0}}, {},
      {"a", "a", "a", "a"});
  const auto s1 = env_moment_summaries(split_views(ds).second);
  const auto s2 = env_moment_summaries(split_views(ds2).second);
  CHECK((s1[0].mean - s2[0].mean).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((s1[0].cov - s2[0].cov).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("summaries follow registry order") {
  const auto ds = make_dataset({{1.0}, {2.0}, {3.0}}, {}, {"b", "a", "b"});
  const auto summaries = env_moment_summaries(split_views(ds).second);
  CHECK(summaries[0].env == "b");
  CHECK(summaries[1].env == "a");
}

TEST_CASE("mean-shift regularizer") {
  SUBCASE("two opposite means") {
    const std::vector<MomentSummary> summaries = {
        summary_with_mean(make_vector({1.0, 0.0})),
        summary_with_mean(make_vector({-1.0, 0.0}))};
    const RegularizerMatrix reg = mir_regularizer(summaries);
    CHECK((reg.h - make_matrix({{1.0, 0.0}, {0.0, 0.0}})).cwiseAbs().maxCoeff() <=
          1e-14);
    CHECK(reg.kind == RegularizerKind::Mir);
  }
  SUBCASE("equal means give zero") {
    const std::vector<MomentSummary> summaries = {
        summary_with_mean(make_vector({3.0, 4.0})),
        summary_with_mean(make_vector({3.0, 4.0}))};
    CHECK(mir_regularizer(summaries).h.cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("single environment gives zero") {
    const std::vector<MomentSummary> summaries = {
        summary_with_mean(make_vector({3.0, 4.0}))};
    CHECK(mir_regularizer(summaries).h.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("dimension mismatch") {
    const std::vector<MomentSummary> summaries = {
        summary_with_mean(make_vector({1.0, 0.0})),
        summary_with_mean(make_vector({1.0}))};
    CHECK_THROWS_AS(mir_regularizer(summaries), std::invalid_argument);
  }
}

TEST_CASE("covariance-shift regularizer") {
  SUBCASE("crossing pair") {
    const RegularizerMatrix reg = vir_regularizer(crossing_pair());
    CHECK((reg.h - make_matrix({{0.25, 0.0}, {0.0, 0.25}}))
              .cwiseAbs()
              .maxCoeff() <= 1e-14);
  }
  SUBCASE("equal covariances give zero") {
    const std::vector<MomentSummary> summaries = {
        summary_with_cov(make_matrix({{2.0, 0.5}, {0.5, 1.0}})),
        summary_with_cov(make_matrix({{2.0, 0.5}, {0.5, 1.0}}))};
    CHECK(vir_regularizer(summaries).h.cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("single environment gives zero") {
    const std::vector<MomentSummary> summaries = {
        summary_with_cov(make_matrix({{2.0, 0.5}, {0.5, 1.0}}))};
    CHECK(vir_regularizer(summaries).h.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("combined regularizer") {
  const std::vector<MomentSummary> mean_pair = {
      summary_with_mean(make_vector({1.0, 0.0})),
      summary_with_mean(make_vector({-1.0, 0.0}))};
  SUBCASE("degenerate weights reproduce the single penalties") {
    CHECK(combined_regularizer(mean_pair, 1.0, 0.0).h ==
          mir_regularizer(mean_pair).h);
    const auto pair = crossing_pair();
    CHECK(combined_regularizer(pair, 0.0, 1.0).h == vir_regularizer(pair).h);
  }
  SUBCASE("weighted sum of the two example matrices") {
    // means (+-1, 0) with covariances diag(2,1)/diag(1,2)
    std::vector<MomentSummary> both = crossing_pair();
    both[0].mean = make_vector({1.0, 0.0});
    both[1].mean = make_vector({-1.0, 0.0});
    const RegularizerMatrix reg = combined_regularizer(both, 2.0, 3.0);
    CHECK((reg.h - make_matrix({{2.75, 0.0}, {0.0, 0.75}}))
              .cwiseAbs()
              .maxCoeff() <= 1e-14);
    CHECK(reg.kind == RegularizerKind::Combined);
  }
  SUBCASE("negative weight rejected") {
    CHECK_THROWS_AS(combined_regularizer(mean_pair, -1.0, 0.0),
                    std::invalid_argument);
  }
}

TEST_CASE("covariance-shift penalties on the crossing pair") {
  const auto pair = crossing_pair();
  const Eigen::VectorXd diag_beta = make_vector({1.0, 1.0});

  CHECK(vir_penalty(pair, diag_beta) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(vir_alternative_penalty(pair, diag_beta) == doctest::Approx(0.0));
  CHECK(vir_alternative_penalty(pair, make_vector({1.0, 0.0})) ==
        doctest::Approx(0.25).epsilon(1e-12));
  CHECK(vir_penalty(pair, make_vector({0.0, 0.0})) == 0.0);
  CHECK(vir_alternative_penalty(pair, make_vector({0.0, 0.0})) == 0.0);

  // test-environment quadratic form from the same construction
  const Eigen::MatrixXd avg = 0.5 * (pair[0].cov + pair[1].cov);
  const Eigen::MatrixXd a_test =
      make_matrix({{3.0, 0.0}, {0.0, 1.0}}) - avg;
  CHECK((a_test - make_matrix({{1.5, 0.0}, {0.0, -0.5}})).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(diag_beta.dot(a_test * diag_beta) == doctest::Approx(1.0));

  SUBCASE("equal covariances zero out both penalties") {
    const std::vector<MomentSummary> equal = {
        summary_with_cov(make_matrix({{2.0, 0.0}, {0.0, 1.0}})),
        summary_with_cov(make_matrix({{2.0, 0.0}, {0.0, 1.0}}))};
    CHECK(vir_penalty(equal, diag_beta) == 0.0);
    CHECK(vir_alternative_penalty(equal, diag_beta) == 0.0);
  }
}

TEST_CASE("penalty agrees with the quadratic form of the matrix") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<MomentSummary> summaries;
    const int p = 2 + rng.uniform_index(4);
    for (int i = 0; i < p; ++i) {
      const Eigen::MatrixXd g = normal_matrix(rng, 3, 3);
      summaries.push_back(summary_with_cov(symmetrized(g * g.transpose())));
    }
    const Eigen::VectorXd beta = normal_vector(rng, 3);
    const RegularizerMatrix reg = vir_regularizer(summaries);
    CHECK(vir_penalty(summaries, beta) ==
          doctest::Approx(beta.dot(reg.h * beta)).epsilon(1e-10));
  }
}

TEST_CASE("shared eigenbasis penalty") {
  SUBCASE("identity basis matches the direct path") {
    const Eigen::MatrixXd lambda = make_matrix({{2.0, 1.0}, {1.0, 2.0}});
    const Eigen::VectorXd beta = make_vector({1.0, 1.0});
    const double value = shared_eigenbasis_penalty(
        Eigen::MatrixXd::Identity(2, 2), lambda, beta);
    CHECK(value == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(value ==
          doctest::Approx(vir_penalty(crossing_pair(), beta)).epsilon(1e-12));
  }
  SUBCASE("identical rows give zero") {
    const Eigen::MatrixXd lambda = make_matrix({{2.0, 1.0}, {2.0, 1.0}});
    CHECK(shared_eigenbasis_penalty(Eigen::MatrixXd::Identity(2, 2), lambda,
                                    make_vector({1.0, 1.0})) == 0.0);
  }
  SUBCASE("null direction gives zero") {
    const Eigen::MatrixXd lambda = make_matrix({{2.0, 1.0}, {1.0, 1.0}});
    CHECK(shared_eigenbasis_penalty(Eigen::MatrixXd::Identity(2, 2), lambda,
                                    make_vector({0.0, 1.0})) == 0.0);
  }
  SUBCASE("validation") {
    const Eigen::MatrixXd lambda = make_matrix({{2.0, 1.0}, {1.0, 2.0}});
    CHECK_THROWS_AS(
        shared_eigenbasis_penalty(make_matrix({{1.0, 0.1}, {0.0, 1.0}}),
                                  lambda, make_vector({1.0, 1.0})),
        std::invalid_argument);
    CHECK_THROWS_AS(
        shared_eigenbasis_penalty(Eigen::MatrixXd::Identity(2, 2),
                                  make_matrix({{-1.0, 1.0}, {1.0, 1.0}}),
                                  make_vector({1.0, 1.0})),
        std::invalid_argument);
  }
}

TEST_CASE("shared eigenbasis equivalence on random instances") {
  Rng rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 2 + rng.uniform_index(4);  // up to 5
    const int p = 2 + rng.uniform_index(7);  // up to 8
    const Eigen::MatrixXd q = random_orthogonal(rng, d);
    Eigen::MatrixXd lambda(p, d);
    std::vector<MomentSummary> summaries;
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < d; ++j) lambda(i, j) = rng.uniform(0.0, 3.0);
      summaries.push_back(summary_with_cov(symmetrized(
          q * lambda.row(i).asDiagonal() * q.transpose())));
    }
    for (int b = 0; b < 100; ++b) {
      const Eigen::VectorXd beta = normal_vector(rng, d);
      const double direct = vir_penalty(summaries, beta);
      const double basis = shared_eigenbasis_penalty(q, lambda, beta);
      CHECK(std::abs(direct - basis) <= 1e-10 * (1.0 + std::abs(direct)));
    }
  }
}

TEST_CASE("regularizers are PSD for random inputs") {
  Rng rng(55);
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 1 + rng.uniform_index(5);
    const int p = 1 + rng.uniform_index(6);
    std::vector<MomentSummary> summaries;
    for (int i = 0; i < p; ++i) {
      MomentSummary s;
      s.count = 3;
      s.mean = 3.0 * normal_vector(rng, d);
      const Eigen::MatrixXd g = normal_matrix(rng, d, d);
      s.cov = symmetrized(g * g.transpose());
      summaries.push_back(std::move(s));
    }
    const Eigen::MatrixXd hm = mir_regularizer(summaries).h;
    const Eigen::MatrixXd hv = vir_regularizer(summaries).h;
    const double scale_m = std::max(1.0, hm.cwiseAbs().maxCoeff());
    const double scale_v = std::max(1.0, hv.cwiseAbs().maxCoeff());
    CHECK(min_eigenvalue(hm) >= -1e-10 * scale_m);
    CHECK(min_eigenvalue(hv) >= -1e-10 * scale_v);
    CHECK(asymmetry(hm) <= 1e-12 * scale_m);
    CHECK(asymmetry(hv) <= 1e-12 * scale_v);
  }
}

TEST_CASE("shift behavior of the regularizers") {
  Rng rng(77);
  const int d = 3;
  std::vector<MomentSummary> summaries;
  for (int i = 0; i < 4; ++i) {
    MomentSummary s;
    s.count = 5;
    s.mean = normal_vector(rng, d);
    const Eigen::MatrixXd g = normal_matrix(rng, d, d);
    s.cov = symmetrized(g * g.transpose());
    summaries.push_back(std::move(s));
  }

  SUBCASE("per-environment translations leave the covariance penalty alone") {
    std::vector<MomentSummary> shifted = summaries;
    for (auto& s : shifted) s.mean += 10.0 * normal_vector(rng, d);
    CHECK((vir_regularizer(summaries).h - vir_regularizer(shifted).h)
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
  }
  SUBCASE("a common translation leaves the mean penalty alone") {
    const Eigen::VectorXd c = 10.0 * normal_vector(rng, d);
    std::vector<MomentSummary> shifted = summaries;
    for (auto& s : shifted) s.mean += c;
    CHECK((mir_regularizer(summaries).h - mir_regularizer(shifted).h)
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
  }
  SUBCASE("environment order does not matter") {
    std::vector<MomentSummary> reversed(summaries.rbegin(), summaries.rend());
    CHECK((mir_regularizer(summaries).h - mir_regularizer(reversed).h)
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
    CHECK((vir_regularizer(summaries).h - vir_regularizer(reversed).h)
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
  }
}

TEST_CASE("zero covariance penalty implies zero alternative penalty") {
  // the converse fails: (1,1) on the crossing pair has alternative penalty 0
  // but covariance penalty 0.5
  Rng rng(88);
  const auto pair = crossing_pair();
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd beta = normal_vector(rng, 2);
    if (vir_penalty(pair, beta) <= 1e-14)
      CHECK(vir_alternative_penalty(pair, beta) <= 1e-14);
  }
  CHECK(vir_penalty(pair, make_vector({1.0, 1.0})) > 0.1);
  CHECK(vir_alternative_penalty(pair, make_vector({1.0, 1.0})) <= 1e-14);
}

TEST_CASE("matrix file round trip") {
  Rng rng(3);
  const Eigen::MatrixXd g = normal_matrix(rng, 3, 3);
  const Eigen::MatrixXd h = symmetrized(g * g.transpose());
  const std::string path = testutil::temp_path("reg.mat");
  write_matrix_file(path, h);
  const Eigen::MatrixXd back = read_matrix_file(path);
  CHECK(back == h);
}
