#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "ensgan/artifact.hpp"
#include "ensgan/common.hpp"
#include "test_support.hpp"

using namespace ensgan;

TEST(Seeds, DeriveSeedIsDeterministicAndTagSensitive) {
  EXPECT_EQ(derive_seed(42, {"a", "b"}), derive_seed(42, {"a", "b"}));
  EXPECT_NE(derive_seed(42, {"a", "b"}), derive_seed(42, {"b", "a"}));
  EXPECT_NE(derive_seed(42, {"ab"}), derive_seed(42, {"a", "b"}));
  EXPECT_NE(derive_seed(42, {"a"}), derive_seed(43, {"a"}));
}

TEST(Seeds, FractionKeyIsCanonical) {
  EXPECT_EQ(fraction_key(0.0), "0");
  EXPECT_EQ(fraction_key(0.05), "50000");
  EXPECT_EQ(fraction_key(0.1 + 0.2), fraction_key(0.3));
  EXPECT_EQ(fraction_key(10.0), "10000000");
}

TEST(Seeds, RngStreamsDifferBySeed) {
  Rng a(1), b(1), c(2);
  for (int i = 0; i < 10; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
  }
  std::set<double> seen;
  for (int i = 0; i < 10; ++i) seen.insert(c.uniform());
  EXPECT_EQ(seen.size(), 10u);
}

TEST(Numerics, RoundingToleratesRepresentationError) {
  EXPECT_EQ(floor_tol(0.65 * 40), 26);
  EXPECT_EQ(floor_tol(2.999), 2);
  EXPECT_EQ(round_half_up(0.5), 1);
  EXPECT_EQ(round_half_up(2.5), 3);
  EXPECT_EQ(round_half_up(2.49), 2);
  EXPECT_EQ(round_half_up(0.05 * 100), 5);
  EXPECT_EQ(round_half_up(0.35 * 151), 53);
}

TEST(Errors, ExitCodes) {
  EXPECT_EQ(exit_code_for(ConfigError("x").kind()), 2);
  EXPECT_EQ(exit_code_for(ParseError("x").kind()), 3);
  EXPECT_EQ(exit_code_for(ArtifactError("x").kind()), 3);
  EXPECT_EQ(exit_code_for(TrainingError("x").kind()), 4);
  EXPECT_EQ(exit_code_for(MetricUndefinedError("x").kind()), 4);
  EXPECT_EQ(exit_code_for(SweepError("x").kind()), 5);
}

TEST(Warnings, SinkCapturesMessages) {
  std::vector<std::string> got;
  auto previous = set_warning_sink([&](std::string_view m) { got.emplace_back(m); });
  warn("hello");
  set_warning_sink(previous);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0], "hello");
}

TEST(Artifact, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Artifact, ContainerRoundTrip) {
  const auto dir = testing_support::temp_dir("container");
  const nlohmann::json payload = {{"a", 1}, {"b", {1.5, 2.5}}, {"s", "text"}};
  write_container(dir / "x.bin", "TESTMAGC", 3, payload);
  EXPECT_EQ(read_container(dir / "x.bin", "TESTMAGC", 3), payload);
  EXPECT_THROW(read_container(dir / "x.bin", "OTHERMAG", 3), ArtifactError);
  EXPECT_THROW(read_container(dir / "x.bin", "TESTMAGC", 4), ArtifactError);
  EXPECT_THROW(read_container(dir / "missing.bin", "TESTMAGC", 3), ArtifactError);
}

TEST(Artifact, TruncatedOrCorruptContainerIsRejected) {
  const auto dir = testing_support::temp_dir("container_bad");
  write_container(dir / "x.bin", "TESTMAGC", 1, {{"weights", std::vector<double>(100, 0.25)}});
  const std::string bytes = read_text_file(dir / "x.bin");
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{19}, bytes.size() / 2,
                          bytes.size() - 1}) {
    write_text_file(dir / "t.bin", bytes.substr(0, cut));
    EXPECT_THROW(read_container(dir / "t.bin", "TESTMAGC", 1), ArtifactError) << cut;
  }
  std::string flipped = bytes;
  flipped[30] ^= 0x01;
  write_text_file(dir / "f.bin", flipped);
  EXPECT_THROW(read_container(dir / "f.bin", "TESTMAGC", 1), ArtifactError);
}
