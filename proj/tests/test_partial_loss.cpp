#include <cmath>
#include <random>

#include "doctest.h"
#include "muscdb/errors.hpp"
#include "muscdb/partial_loss.hpp"
#include "oracles.hpp"

using namespace muscdb;

namespace {

ProposalSample positive(std::vector<double> logits, int target) {
  ProposalSample s;
  s.logits = std::move(logits);
  s.target_class = target;
  s.is_positive = true;
  return s;
}

ProposalSample partial_negative(std::vector<double> logits, double mu) {
  ProposalSample s;
  s.logits = std::move(logits);
  s.target_class = static_cast<int>(s.logits.size()) - 1;
  s.from_partial_image = true;
  s.background_score = mu;
  return s;
}

}  // namespace

TEST_CASE("smooth l1") {
  CHECK(smooth_l1(0.0) == 0.0);
  CHECK(smooth_l1(0.5) == 0.125);
  CHECK(smooth_l1(2.0) == 1.5);
  CHECK(smooth_l1(-2.0) == 1.5);
  CHECK(smooth_l1_grad(2.0) == 1.0);
  CHECK(smooth_l1_grad(-0.3) == -0.3);
}

TEST_CASE("adaptive weight") {
  CHECK(adaptive_weight(positive({0, 0, 0}, 0)) == 1.0);
  CHECK(adaptive_weight(partial_negative({0, 0, 0}, 0.2)) == 0.2);
  ProposalSample full = partial_negative({0, 0, 0}, 0.2);
  full.from_partial_image = false;
  CHECK(adaptive_weight(full) == 1.0);
  ProposalSample missing = partial_negative({0, 0, 0}, 0.2);
  missing.background_score.reset();
  CHECK_THROWS_AS(adaptive_weight(missing), Error);
}

TEST_CASE("closed-form loss values") {
  std::vector<ProposalSample> one{positive({1.0, 2.0, 0.5}, 1)};
  const double p = std::exp(2.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(0.5));
  auto l = bbox_loss(one);
  CHECK(l.cls_loss == doctest::Approx(-std::log(p)).epsilon(1e-14));
  CHECK(l.reg_loss == 0.0);
  one[0].reg_pred = {2.0, 0.5, 0, 0, 0};
  l = bbox_loss(one);
  CHECK(l.reg_loss == doctest::Approx(1.625));
  CHECK(l.total == doctest::Approx(l.cls_loss + l.reg_loss));

  std::vector<ProposalSample> zero{partial_negative({5.0, -3.0, 1.0}, 0.0)};
  CHECK(bbox_loss(zero).cls_loss == 0.0);
  const auto g = bbox_loss_grad(zero);
  for (double x : g.logits[0]) CHECK(x == 0.0);
  CHECK(finite_diff_check(zero, 1e-4) < 1e-10);
}

TEST_CASE("closed-form gradient") {
  std::vector<ProposalSample> b{positive({0.0, 0.0, 0.0}, 0)};
  b[0].reg_pred = {2.0, 0, 0, 0, 0};
  const auto g = bbox_loss_grad(b);
  CHECK(g.logits[0][0] == doctest::Approx(1.0 / 3.0 - 1.0));
  CHECK(g.logits[0][1] == doctest::Approx(1.0 / 3.0));
  CHECK(g.logits[0][2] == doctest::Approx(1.0 / 3.0));
  CHECK(g.reg_pred[0][0] == 1.0);
}

TEST_CASE("loss matches the reference and is linear in mu") {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 200; ++i) {
    const auto batch = oracle::random_batch(rng, 16, 4);
    const auto l = bbox_loss(batch);
    REQUIRE(l.total >= 0.0);
    REQUIRE(l.total == doctest::Approx(oracle::reference_loss(batch)).epsilon(1e-12));
  }
  std::vector<double> c;
  for (double mu : {0.0, 0.5, 1.0}) {
    std::vector<ProposalSample> b{positive({0.3, -0.2, 0.1}, 0), partial_negative({1.0, 2.0, -1.0}, mu)};
    c.push_back(bbox_loss(b).cls_loss);
  }
  CHECK(c[1] - c[0] == doctest::Approx(c[2] - c[1]).epsilon(1e-12));
}

TEST_CASE("without partial images the loss is plain cross-entropy plus smooth l1") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 50; ++i) {
    auto batch = oracle::random_batch(rng, 16, 3);
    for (auto& s : batch) {
      s.from_partial_image = false;
      s.background_score.reset();
    }
    REQUIRE(bbox_loss(batch).total == doctest::Approx(oracle::reference_loss(batch)).epsilon(1e-12));
  }
}

TEST_CASE("gradients agree with central differences") {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 20; ++i) {
    const auto batch = oracle::random_batch(rng, 16, 5);
    REQUIRE(finite_diff_check(batch, 1e-4) < 1e-5);
  }
  CHECK_THROWS_AS(finite_diff_check(oracle::random_batch(rng, 4, 2), 1e-2), Error);
}

TEST_CASE("pairwise sum") {
  std::vector<double> v(1000, 0.1);
  CHECK(pairwise_sum(v) == doctest::Approx(100.0).epsilon(1e-13));
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
  CHECK(pairwise_sum(std::vector<double>{1.0, 2.0, 3.0}) == 6.0);
}

TEST_CASE("batch validation") {
  CHECK_THROWS_AS(bbox_loss(std::vector<ProposalSample>{}), Error);
  CHECK_THROWS_AS(bbox_loss(std::vector<ProposalSample>{positive({0, 0, 0}, 2)}), Error);
  CHECK_THROWS_AS(bbox_loss(std::vector<ProposalSample>{partial_negative({0, 0, 0}, 1.5)}), Error);
  CHECK_THROWS_AS(bbox_loss(std::vector<ProposalSample>{positive({0, NAN, 0}, 0)}), Error);
  ProposalSample neg = partial_negative({0, 0, 0}, 0.5);
  neg.target_class = 0;
  CHECK_THROWS_AS(bbox_loss(std::vector<ProposalSample>{neg}), Error);
  // All-negative batch: the regression normaliser falls back to 1.
  const auto l = bbox_loss(std::vector<ProposalSample>{partial_negative({0, 0, 0}, 0.5)});
  CHECK(l.lambda_reg == 1.0);
}
