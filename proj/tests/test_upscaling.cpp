#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "memcem/errors.hpp"
#include "memcem/upscaling.hpp"

using namespace memcem;

namespace {

LayeredMedium random_medium(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 6);
  std::uniform_real_distribution<double> width(0.05, 1.0), velocity(-1.0, 1.0);
  LayeredMedium m;
  const int n = count(rng);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    m.widths.push_back(width(rng));
    m.velocities.push_back(velocity(rng));
    total += m.widths.back();
  }
  for (double& w : m.widths) w /= total;
  return m;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("memcem_upscaling_" + name);
}

} // namespace

TEST(Upscaling, TwoLayerExactValues) {
  const UpscaledKernel k = upscale({{0.5, 0.5}, {0.0, 1.0}});
  EXPECT_NEAR(k.mean_velocity, 0.5, 1e-12);
  EXPECT_NEAR(k.variance, 0.25, 1e-12);
  ASSERT_EQ(k.nodes.size(), 1u);
  EXPECT_NEAR(k.nodes[0], 0.5, 1e-12);
  EXPECT_NEAR(k.weights[0], 0.25, 1e-12);
  EXPECT_TRUE(k.weights_nonnegative);
}

TEST(Upscaling, SymmetricMediumHasSymmetricNodes) {
  const UpscaledKernel k = upscale({{0.25, 0.25, 0.25, 0.25}, {-3.0, -1.0, 1.0, 3.0}});
  ASSERT_EQ(k.nodes.size(), 3u);
  EXPECT_NEAR(k.nodes[1], 0.0, 1e-14);
  EXPECT_NEAR(k.nodes[0], -k.nodes[2], 1e-13);
  EXPECT_NEAR(k.weights[0], k.weights[2], 1e-12);
}

TEST(Upscaling, CanonicalizeSortsAndMerges) {
  const LayeredMedium c = canonicalize({{0.2, 0.3, 0.5}, {1.0, -1.0, 1.0}});
  EXPECT_EQ(c.velocities, (std::vector<double>{-1.0, 1.0}));
  EXPECT_NEAR(c.widths[1], 0.7, 1e-15);
  const UpscaledKernel single = upscale({{0.5, 0.5}, {2.0, 2.0}});
  EXPECT_TRUE(single.nodes.empty());
  EXPECT_TRUE(single.weights.empty());
  EXPECT_EQ(single.variance, 0.0);
  EXPECT_THROW(canonicalize({{0.5, 0.4}, {0, 1}}), std::invalid_argument);
  EXPECT_THROW(canonicalize({{1.5, -0.5}, {0, 1}}), std::invalid_argument);
  EXPECT_THROW(canonicalize({{1.0}, {NAN}}), std::invalid_argument);
  EXPECT_THROW(canonicalize({{}, {}}), std::invalid_argument);
  EXPECT_THROW(canonicalize({{1.0}, {0.0, 1.0}}), std::invalid_argument);
}

TEST(Upscaling, RandomMediaProperties) {
  std::mt19937_64 rng(20240601);
  for (int trial = 0; trial < 1000; ++trial) {
    const LayeredMedium raw = random_medium(rng);
    const LayeredMedium m = canonicalize(raw);
    const UpscaledKernel k = upscale(raw);
    ASSERT_EQ(static_cast<int>(k.nodes.size()), m.size() - 1);
    double sum = 0.0;
    for (int i = 0; i + 1 < m.size(); ++i) {
      ASSERT_GT(k.nodes[i], m.velocities[i]) << trial;
      ASSERT_LT(k.nodes[i], m.velocities[i + 1]) << trial;
      // residue of the node function's reciprocal at u_i
      double d = 0.0;
      for (int j = 0; j < m.size(); ++j) d += m.widths[j] / std::pow(k.nodes[i] - m.velocities[j], 2);
      EXPECT_NEAR(k.weights[i], 1.0 / d, 1e-8 * std::max(1.0, 1.0 / d)) << trial;
      EXPECT_GE(k.weights[i], 0.0);
      sum += k.weights[i];
    }
    ASSERT_LE(std::abs(sum - k.variance), 1e-10) << trial;
  }
}

TEST(Upscaling, TranslationAndScalingCovariance) {
  const LayeredMedium m{{0.2, 0.5, 0.3}, {-0.4, 0.1, 0.9}};
  const UpscaledKernel k = upscale(m);
  LayeredMedium shifted = m, scaled = m;
  for (double& a : shifted.velocities) a += 2.0;
  for (double& a : scaled.velocities) a *= 3.0;
  const UpscaledKernel ks = upscale(shifted), kc = upscale(scaled);
  EXPECT_NEAR(ks.mean_velocity, k.mean_velocity + 2.0, 1e-14);
  EXPECT_NEAR(kc.variance, 9.0 * k.variance, 1e-13);
  for (std::size_t i = 0; i < k.nodes.size(); ++i) {
    EXPECT_NEAR(ks.nodes[i], k.nodes[i] + 2.0, 1e-13);
    EXPECT_NEAR(ks.weights[i], k.weights[i], 1e-12);
    EXPECT_NEAR(kc.nodes[i], 3.0 * k.nodes[i], 1e-13);
    EXPECT_NEAR(kc.weights[i], 9.0 * k.weights[i], 1e-12);
  }
}

TEST(Upscaling, WeightSystemChecksSizes) {
  const LayeredMedium m = canonicalize({{0.5, 0.5}, {0.0, 1.0}});
  EXPECT_THROW(solve_kernel_weights(m, {}), std::invalid_argument);
  // a node away from the root leaves an inconsistent system
  EXPECT_THROW(solve_kernel_weights(canonicalize({{0.2, 0.3, 0.5}, {0.0, 1.0, 2.0}}), {0.5, 1.5}), NumericalError);
}

TEST(Upscaling, AveragedHeavisideSolution) {
  const LayeredMedium m{{0.25, 0.75}, {0.0, 1.0}};
  EXPECT_EQ(averaged_heaviside_solution(m, 0.0, 0.0), 1.0);
  EXPECT_EQ(averaged_heaviside_solution(m, 0.5, 1.0), 0.25);
  EXPECT_EQ(averaged_heaviside_solution(m, 1.0, 1.0), 1.0);
  EXPECT_EQ(averaged_heaviside_solution(m, -0.1, 1.0), 0.0);
  EXPECT_THROW(averaged_heaviside_solution(m, 0.0, -1.0), std::invalid_argument);
}

TEST(Upscaling, ContinuousStability) {
  const GridHierarchy g(4, 4);
  const auto constant = constant_field(g, 3.0);
  EXPECT_TRUE(check_continuous_stability(g, constant, {1.0, 0.0}, 1.0).violating_cells.empty());

  // kappa = exp(-c x): beta kappa + kappa_x = (beta - c) kappa up to O(h)
  PermeabilityField decay = constant;
  const double c = 2.0;
  for (int j = 0; j < g.fine_n(); ++j)
    for (int i = 0; i < g.fine_n(); ++i) decay.values[g.cell(i, j)] = std::exp(-c * g.cell_center(g.cell(i, j))[0]);
  EXPECT_TRUE(check_continuous_stability(g, decay, {1.0, 0.0}, 1.5 * c).violating_cells.empty());
  const auto bad = check_continuous_stability(g, decay, {1.0, 0.0}, 0.5 * c);
  EXPECT_EQ(static_cast<int>(bad.violating_cells.size()), g.num_cells());
  EXPECT_LT(bad.min_value, 0.0);
  // flow the other way sees an increasing field
  EXPECT_TRUE(check_continuous_stability(g, decay, {-1.0, 0.0}, 0.0).violating_cells.empty());
}

TEST(Upscaling, MediumFileAndKernelOutput) {
  const auto p = temp_file("medium.csv");
  std::ofstream(p) << "# two layers\nm,a\n0.5, 0\n0.5 1\n";
  const LayeredMedium m = load_medium(p);
  EXPECT_EQ(m.widths, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(m.velocities, (std::vector<double>{0.0, 1.0}));
  std::ofstream(p) << "m,a\n0.5,0\n0.5,x\n";
  EXPECT_THROW(load_medium(p), std::runtime_error);
  std::ofstream(p) << "0.5,0,7\n";
  EXPECT_THROW(load_medium(p), std::runtime_error);
  EXPECT_THROW(load_medium(temp_file("missing.csv")), std::runtime_error);

  const auto out = temp_file("kernel.csv");
  save_kernel(out, upscale({{0.5, 0.5}, {0.0, 1.0}}), "test");
  std::ifstream in(out);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  EXPECT_NE(text.find("kind,index,value,residual"), std::string::npos);
  EXPECT_NE(text.find("node,1,0.5,"), std::string::npos);
  const auto at = text.find("weight,1,");
  ASSERT_NE(at, std::string::npos);
  EXPECT_NEAR(std::stod(text.substr(at + 9)), 0.25, 1e-15);
}
