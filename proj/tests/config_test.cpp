#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "ksd/config.hpp"
#include "ksd/errors.hpp"
#include "ksd/experiment.hpp"

using namespace ksd;

TEST(Config, TextAndJsonAgree) {
  const Config text = Config::parse(R"(
# a comment
system = driven_oscillator
beta = 1
protocol.points = 0:1, 1:4
partitions = grid:disk:2x2@4, trivial
kse.method = orbit
)");
  const Config json = Config::parse(R"({
  "system": "driven_oscillator",
  "beta": 1.0,
  "protocol": {"points": [[0, 1], [1, 4]]},
  "partitions": ["grid:disk:2x2@4", "trivial"],
  "kse": {"method": "orbit"}
})");
  EXPECT_EQ(text.canonical(), json.canonical());
  EXPECT_EQ(text.hash(), json.hash());
  EXPECT_EQ(text.points("protocol.points"), (PointList{{0, 1.0}, {1, 4.0}}));
  EXPECT_EQ(text.strings("partitions").size(), 2u);
  EXPECT_EQ(text.string("kse.method"), "orbit");
}

TEST(Config, DefaultsAreApplied) {
  const Config c = Config::parse("system = disk_rotation\n");
  EXPECT_EQ(c.integer("depth"), 32);
  EXPECT_EQ(c.integer("samples"), 100000);
  EXPECT_NEAR(c.real("alpha_top"), std::numbers::pi / 2, 1e-15);
  EXPECT_TRUE(c.boolean("renormalize"));
  EXPECT_FALSE(c.has("h_value"));
}

TEST(Config, HashIgnoresLayoutButNotValues) {
  const Config a = Config::parse("system = kicked_top\nseed = 3\n");
  const Config b = Config::parse("seed=3\n\n   system   =   kicked_top   # trailing\n");
  const Config c = Config::parse("system = kicked_top\nseed = 4\n");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(a.hash().size(), 64u);
  // defaults written out explicitly do not change the hash
  EXPECT_EQ(a.hash(), Config::parse("system = kicked_top\nseed = 3\ndepth = 32\n").hash());
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(Config::parse("sistem = disk_rotation\n"), ConfigError);
  EXPECT_THROW(Config::parse("system = pendulum\n"), ConfigError);
  EXPECT_THROW(Config::parse("samples = 0\n"), ConfigError);
  EXPECT_THROW(Config::parse("beta = -1\n"), ConfigError);
  EXPECT_THROW(Config::parse("depth = 2.5\n"), ConfigError);
  EXPECT_THROW(Config::parse("renormalize = maybe\n"), ConfigError);
  EXPECT_THROW(Config::parse("seed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(Config::parse("just some words\n"), ConfigError);
  EXPECT_THROW(Config::parse("protocol.points = 0-1\n"), ConfigError);
  EXPECT_THROW(Config::parse("{ \"seed\": }"), ConfigError);
  EXPECT_THROW(Config::load("/nonexistent/file.cfg"), ConfigError);
}

TEST(Config, SetChecksAgainstTheSchema) {
  Config c = Config::parse("system = disk_rotation\n");
  c.set("seed", "17");
  EXPECT_EQ(c.integer("seed"), 17);
  EXPECT_THROW(c.set("seed", "-1"), ConfigError);
  EXPECT_THROW(c.set("colour", "red"), ConfigError);
  EXPECT_THROW(c.real("seed"), ConfigError);
}

TEST(ParseReal, AcceptsPiForms) {
  const double pi = std::numbers::pi;
  EXPECT_EQ(parse_real("1.5"), 1.5);
  EXPECT_NEAR(parse_real("pi"), pi, 1e-15);
  EXPECT_NEAR(parse_real("pi/2"), pi / 2, 1e-15);
  EXPECT_NEAR(parse_real("2*pi"), 2 * pi, 1e-15);
  EXPECT_NEAR(parse_real("-pi/4"), -pi / 4, 1e-15);
  EXPECT_THROW(parse_real("tau"), ConfigError);
  EXPECT_THROW(parse_real("1.5x"), ConfigError);
}

TEST(FormatReal, RoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, std::numbers::pi, -2.5e-17, 1e300}) EXPECT_EQ(parse_real(format_real(x)), x);
}

TEST(Schema, MarkdownListsEveryKey) {
  const std::string md = schema_markdown();
  for (const auto& e : config_schema()) EXPECT_NE(md.find(e.key), std::string::npos) << e.key;
}

TEST(Schema, BundledConfigsLoad) {
  int n = 0;
  for (const auto& f : std::filesystem::directory_iterator(KSD_CONFIG_DIR)) {
    if (f.path().extension() != ".cfg") continue;
    EXPECT_NO_THROW(Config::load(f.path())) << f.path();
    ++n;
  }
  EXPECT_GE(n, 10);
}

TEST(Experiment, ProtocolFromConfig) {
  const ControlProtocol p = make_protocol(Config::parse("protocol.points = 0:1, 10:4\nprotocol.horizon = 20\n"));
  EXPECT_EQ(p.horizon(), 20);
  EXPECT_DOUBLE_EQ(p.at(0), 1.0);
  EXPECT_DOUBLE_EQ(p.at(5), 2.5);
  EXPECT_DOUBLE_EQ(p.at(20), 4.0);
  const ControlProtocol c = make_protocol(Config::parse("lambda0 = 2\ndepth = 7\n"));
  EXPECT_EQ(c.horizon(), 7);
  EXPECT_TRUE(c.is_constant());
  EXPECT_EQ(c.at(3), 2.0);
}

TEST(Experiment, CommandNames) {
  for (Command c : {Command::kRun, Command::kKse, Command::kLyapunov, Command::kWork, Command::kBound,
                    Command::kOracle})
    EXPECT_EQ(parse_command(command_name(c)), c);
  EXPECT_THROW(parse_command("fly"), ConfigError);
}
