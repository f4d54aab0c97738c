#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <tuple>

#include "tvae/network.hpp"

namespace tvae {
namespace {

using Case = std::tuple<Variant, TemporalEstimator>;

class ElboGradientTest : public ::testing::TestWithParam<Case> {
 protected:
  void SetUp() override {
    config_ = ModelConfig::miniature(std::get<0>(GetParam()));
    config_.temporal_estimator = std::get<1>(GetParam());
    net_ = std::make_unique<Network<double>>(config_, params_);
    net_->initialize(params_, 7);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    // The spectral head starts at zero; move it off so its gradients are exercised.
    for (std::size_t t = 0; t < params_.count(); ++t)
      if (params_.name(t).starts_with("encoder.temporal.out"))
        for (auto& w : params_[t].data) w = 0.05 * normal(rng);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    input_ = Tensor<double>(Shape{2, config_.frames, config_.height, config_.width});
    // A shared brightness oscillation gives the phase fit a well-defined peak.
    const std::size_t plane = static_cast<std::size_t>(config_.height) * config_.width;
    for (int b = 0; b < 2; ++b)
      for (int j = 0; j < config_.frames; ++j)
        for (std::size_t q = 0; q < plane; ++q)
          input_.sample(b)[j * plane + q] =
              0.5 + 0.2 * std::cos(2.3 * j + b) + 0.25 * (unit(rng) - 0.5);
    noise_.resize(noise_size(config_, 2));
    for (auto& v : noise_) v = normal(rng);
  }

  double loss() { return negative_elbo(*net_, params_, input_, noise_, ObjectiveOptions{}, nullptr).loss; }

  static double rel_error(double a, double n) {
    return std::abs(n - a) / std::max({std::abs(n), std::abs(a), 1e-3});
  }

  ModelConfig config_;
  nn::ParameterSet<double> params_;
  std::unique_ptr<Network<double>> net_;
  Tensor<double> input_;
  std::vector<double> noise_;
};

// Central differences of the negative ELBO with the reparameterization noise fixed.
TEST_P(ElboGradientTest, WeightsMatchFiniteDifferences) {
  ObjectiveOptions opts;
  opts.param_grads = true;
  auto grads = params_.zeros_like();
  negative_elbo(*net_, params_, input_, noise_, opts, &grads);

  const double h = 1e-5;
  double worst = 0;
  std::string worst_name;
  for (std::size_t t = 0; t < params_.count(); ++t) {
    for (std::size_t i = 0; i < params_[t].size(); ++i) {
      const double saved = params_[t].data[i];
      params_[t].data[i] = saved + h;
      const double up = loss();
      params_[t].data[i] = saved - h;
      const double down = loss();
      params_[t].data[i] = saved;
      const double rel = rel_error(grads[t].data[i], (up - down) / (2 * h));
      if (rel > worst) {
        worst = rel;
        worst_name = params_.name(t) + "[" + std::to_string(i) + "]";
      }
    }
  }
  EXPECT_LT(worst, 1e-4) << "worst weight " << worst_name;
}

TEST_P(ElboGradientTest, InputMatchesFiniteDifferences) {
  ObjectiveOptions opts;
  opts.input_grads = true;
  const auto res = negative_elbo(*net_, params_, input_, noise_, opts, nullptr);
  ASSERT_EQ(res.input_grad.size(), input_.size());

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, input_.size() - 1);
  const double h = 1e-6;
  double worst = 0;
  for (int k = 0; k < 60; ++k) {
    const std::size_t i = pick(rng);
    const double saved = input_.data[i];
    input_.data[i] = saved + h;
    const double up = loss();
    input_.data[i] = saved - h;
    const double down = loss();
    input_.data[i] = saved;
    worst = std::max(worst, rel_error(res.input_grad.data[i], (up - down) / (2 * h)));
  }
  EXPECT_LT(worst, 1e-4);
}

std::string case_name(const ::testing::TestParamInfo<Case>& info) {
  std::string n = to_string(std::get<0>(info.param)) + "_" + to_string(std::get<1>(info.param));
  for (auto& ch : n)
    if (ch == '-') ch = '_';
  return n;
}

INSTANTIATE_TEST_SUITE_P(Trajectory, ElboGradientTest,
                         ::testing::Combine(::testing::Values(Variant::tvae_c, Variant::tvae_r, Variant::tvae_s,
                                                              Variant::tae_r),
                                            ::testing::Values(TemporalEstimator::spectral,
                                                              TemporalEstimator::learned)),
                         case_name);
INSTANTIATE_TEST_SUITE_P(Framewise, ElboGradientTest,
                         ::testing::Combine(::testing::Values(Variant::vae),
                                            ::testing::Values(TemporalEstimator::spectral)),
                         case_name);

TEST(Decoder, CountsCalls) {
  const ModelConfig config = ModelConfig::miniature(Variant::tvae_r);
  nn::ParameterSet<float> params;
  Network<float> net(config, params);
  net.initialize(params, 1);
  Tensor<float> z(Shape{3, config.latent_dim, 1, 1});
  net.decode(params, z, nullptr);
  net.decode(params, z, nullptr);
  EXPECT_EQ(net.decoder_calls(), 2u);
}

}  // namespace
}  // namespace tvae
