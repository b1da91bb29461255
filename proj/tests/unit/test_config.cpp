#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "rdmd/config.hpp"

using namespace rdmd;

TEST(Config, EmptyTextGivesDefaults) {
  const auto c = ExperimentConfig::parse("");
  EXPECT_EQ(c.seed, 0u);
  EXPECT_EQ(c.schedule.sigma_max, 80.0);
  EXPECT_EQ(c.rdmd.train.generator_lr, 2e-5);
  EXPECT_EQ(c.rdmd.train.fake_lr, 1e-4);
  EXPECT_EQ(c.dsm.batch, 1024u);
  EXPECT_EQ(c.rdmd.lambdas, (std::vector<double>{0.0, 0.05, 0.2, 1.0, 10.0}));
  EXPECT_EQ(c.network.preconditioning, Preconditioning::edm);
}

TEST(Config, NetworkScalingKeys) {
  const auto c = ExperimentConfig::parse("[network]\npreconditioning = none\nsigma_data = 7\n[dsm]\nweight = uniform\n");
  EXPECT_EQ(c.network.preconditioning, Preconditioning::none);
  EXPECT_EQ(c.network.sigma_data, 7.0);
  EXPECT_EQ(c.dsm.weight, LossWeight::uniform);
  EXPECT_EQ(*c.sigma_data, 7.0);
  // Scaling changes the function, so it is part of the model identity.
  EXPECT_NE(c.model_hash(), ExperimentConfig::parse("").model_hash());
}

TEST(Config, ParsesSectionsCommentsAndLists) {
  const auto c = ExperimentConfig::parse(R"(
# comment line
seed = 17

[data]
target = gaussian   # inline comment
target_std = 1.5

[rdmd]
lambda = 0.05
lambdas = 0.5, 0.1 ,0.02
omega = sigma_squared
generator = linear

[network]
encoder_dims = 8,8
decoder_dims = 16, 2
)");
  EXPECT_EQ(c.seed, 17u);
  EXPECT_EQ(c.data.target, TargetKind::gaussian);
  EXPECT_EQ(c.rdmd.train.lambda, 0.05);
  EXPECT_EQ(c.rdmd.lambdas, (std::vector<double>{0.5, 0.1, 0.02}));
  EXPECT_EQ(c.rdmd.train.omega, OmegaMode::sigma_squared);
  EXPECT_EQ(c.network.encoder_dims, (std::vector<std::size_t>{8, 8}));
  // The seed reaches the nested trainer configs.
  EXPECT_EQ(c.dsm.seed, 17u);
  EXPECT_EQ(c.rdmd.train.seed, 17u);
}

TEST(Config, AutoSigmaDataFollowsTarget) {
  auto c = ExperimentConfig::parse("");
  EXPECT_FALSE(c.sigma_data.has_value());
  EXPECT_NEAR(c.network.sigma_data, std::sqrt(50.25), 1e-15);
  c.data.target = TargetKind::gaussian;
  c.data.target_std = 1.5;
  c.resolve();
  EXPECT_EQ(c.network.sigma_data, 1.5);
  EXPECT_NE(c.to_text().find("sigma_data = auto"), std::string::npos);
  // Same text, different resolved scale: the model hash must differ.
  EXPECT_NE(c.model_hash(), ExperimentConfig::parse("").model_hash());
  EXPECT_EQ(ExperimentConfig::parse("[network]\nsigma_data = 0.5\n").network.sigma_data, 0.5);
}

TEST(Config, UnknownKeyNamesKeyAndLine) {
  try {
    ExperimentConfig::parse("seed = 1\n[rdmd]\nlamda = 0.2\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.key(), "rdmd.lamda");
    EXPECT_NE(std::string(e.what()).find("lamda"), std::string::npos);
  }
}

TEST(Config, UnknownSectionRejected) {
  try {
    ExperimentConfig::parse("[rdmdd]\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(Config, BadValuesRejectedWithLine) {
  auto line_of = [](const std::string& text) {
    try {
      ExperimentConfig::parse(text);
    } catch (const ConfigError& e) {
      return e.line();
    }
    return std::size_t{9999};
  };
  EXPECT_EQ(line_of("[dsm]\nlr = fast\n"), 2u);
  EXPECT_EQ(line_of("[dsm]\nbatch = -3\n"), 2u);
  EXPECT_EQ(line_of("[network]\nzero_init_output = yes\n"), 2u);
  EXPECT_EQ(line_of("[rdmd]\nomega = magic\n"), 2u);
  EXPECT_EQ(line_of("[network]\n\npreconditioning = karras\n"), 3u);
  EXPECT_EQ(line_of("[dsm]\nweight = uniform\nweight = flat\n"), 3u);
  EXPECT_EQ(line_of("seed 3\n"), 1u);
  EXPECT_EQ(line_of("[dsm\n"), 1u);
  EXPECT_EQ(line_of("seed = 1\nseed = 2\n"), 2u);
}

TEST(Config, SemanticValidation) {
  EXPECT_THROW(ExperimentConfig::parse("[schedule]\nsigma_min = 5\nsigma_max = 1\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("[network]\ndecoder_dims = 16, 3\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("[rdmd]\ngenerator = cnn\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("[rdmd]\nlambda = -1\n"), ConfigError);
}

TEST(Config, CanonicalTextRoundTrips) {
  const auto c = ExperimentConfig::parse("seed = 5\n[rdmd]\nlambda = 0.1\n[data]\nradius = 3.25\n");
  const std::string text = c.to_text();
  const auto again = ExperimentConfig::parse(text);
  EXPECT_EQ(again.to_text(), text);
  EXPECT_EQ(again.data.geometry.radius, 3.25);
  EXPECT_NE(text.find("[rdmd]"), std::string::npos);
  EXPECT_NE(text.find("lambda = 0.1\n"), std::string::npos);
}

TEST(Config, ModelHashCoversScheduleAndNetworkOnly) {
  const auto a = ExperimentConfig::parse("");
  const auto b = ExperimentConfig::parse("seed = 9\n[rdmd]\nlambda = 3\n");
  const auto c = ExperimentConfig::parse("[network]\nembed_dim = 32\n");
  const auto d = ExperimentConfig::parse("[schedule]\nsigma_max = 40\n");
  EXPECT_EQ(a.model_hash(), b.model_hash());
  EXPECT_NE(a.model_hash(), c.model_hash());
  EXPECT_NE(a.model_hash(), d.model_hash());
}

TEST(Config, FormatDoubleRoundTrips) {
  for (double v : {0.1, 2e-5, 1.0 / 3.0, 80.0, -0.0, 1e300}) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(0.2), "0.2");
  EXPECT_EQ(format_hash(255), "00000000000000ff");
}

TEST(Config, ShippedExamplesLoad) {
  const std::filesystem::path dir = RDMD_EXAMPLE_CONFIGS;
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".ini") continue;
    SCOPED_TRACE(e.path().string());
    EXPECT_NO_THROW(ExperimentConfig::load(e.path()));
    ++n;
  }
  EXPECT_EQ(n, 3u);
  const auto eight = ExperimentConfig::load(dir / "eight_gaussians.ini");
  EXPECT_EQ(eight.data.geometry.radius, 2.0 * std::sqrt(2.0));
  EXPECT_EQ(eight.data.geometry.std, std::sqrt(2.0) / 4.0);
}
