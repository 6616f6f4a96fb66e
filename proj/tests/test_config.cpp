#include <cstdlib>

#include <gtest/gtest.h>

#include "pulseprep/config.hpp"

using namespace pulseprep;

TEST(RunConfig, DefaultsPerQubitCount) {
  const RunConfig one = RunConfig::defaults(1);
  EXPECT_EQ(one.train.epochs, 200);
  EXPECT_EQ(one.train.batch_size, 64);
  EXPECT_EQ(one.suite, "bloch128");
  const RunConfig two = RunConfig::defaults(2);
  EXPECT_EQ(two.train.epochs, 100);
  EXPECT_EQ(two.train.batch_size, 128);
  EXPECT_DOUBLE_EQ(two.train.learning_rate, 1e-3);
  EXPECT_NEAR(two.control.dt, std::numbers::pi / 2, 1e-15);
  EXPECT_EQ(two.suite, "hypersphere256");
  EXPECT_NO_THROW(two.validate());
}

TEST(RunConfig, ParsesSectionsAndOverridesDefaults) {
  const RunConfig c = parse_run_config(
      "[run]\nseed=7\n[control]\nqubits=2\n[train]\nepochs=3\n[dataset]\nsamples=100\nnoisy=true\n"
      "channel=phaseflip\np=0.01\n[bench]\nsuite_seed=4\n");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.control.qubits, 2);
  EXPECT_EQ(c.dataset.qubits, 2);
  EXPECT_EQ(c.train.epochs, 3);
  EXPECT_EQ(c.train.batch_size, 128);
  EXPECT_EQ(c.dataset.sample_count, 100u);
  EXPECT_TRUE(c.dataset.noisy);
  EXPECT_EQ(c.dataset.channel, ChannelKind::PhaseFlip);
  EXPECT_EQ(c.suite_seed, 4u);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_run_config("[train]\nepoch=3\n"), TaskError);
  EXPECT_THROW(parse_run_config("[nope]\nx=1\n"), TaskError);
  EXPECT_THROW(parse_run_config("[train]\nepochs=many\n"), TaskError);
  EXPECT_THROW(parse_run_config("[dataset]\nnoisy=maybe\n"), TaskError);
  EXPECT_THROW(parse_run_config("[control]\nqubits=3\n"), TaskError);
  EXPECT_THROW(load_run_config("/nonexistent/file.ini"), TaskError);
}

TEST(RunConfig, ScheduleKeysRecomputeDt) {
  const RunConfig c = parse_run_config("[control]\ntotal_time=10\nsteps=40\n");
  EXPECT_DOUBLE_EQ(c.control.dt, 0.25);
  EXPECT_EQ(c.dataset.rollout_cap, 40);
}

TEST(RunConfig, DigestTracksResultAffectingValues) {
  RunConfig a = RunConfig::defaults(1);
  RunConfig b = a;
  EXPECT_EQ(config_digest(a), config_digest(b));
  b.out_dir = "/elsewhere";
  b.workers = 8;
  EXPECT_EQ(config_digest(a), config_digest(b));
  b.seed = 1;
  EXPECT_NE(config_digest(a), config_digest(b));
  EXPECT_EQ(config_digest(a).size(), 16u);
  // The canonical text parses back to the same configuration.
  const RunConfig c = parse_run_config(canonical_config(b));
  EXPECT_EQ(config_digest(c), config_digest(b));
}

TEST(RunConfig, StageSeedsDiffer) {
  RunConfig c;
  c.seed = 42;
  c.sync_seeds();
  EXPECT_EQ(c.dataset.rng_seed, 42u);
  EXPECT_EQ(c.train.rng_seed, derive_seed(42, "shuffle"));
  EXPECT_NE(c.stage_seed("init"), c.stage_seed("shuffle"));
  EXPECT_NE(c.stage_seed("rg"), c.stage_seed("crab"));
}

TEST(RunConfig, OutDirPrecedence) {
  RunConfig c;
  c.out_dir = "from-file";
  ::unsetenv(kOutDirEnv);
  EXPECT_EQ(resolve_out_dir(c).string(), "from-file");
  ::setenv(kOutDirEnv, "from-env", 1);
  EXPECT_EQ(resolve_out_dir(c).string(), "from-env");
  EXPECT_EQ(resolve_out_dir(c, "from-flag").string(), "from-flag");
  ::unsetenv(kOutDirEnv);
}

TEST(Seeds, SplitRule) {
  EXPECT_EQ(derive_seed(1, "data"), splitmix64(1 ^ fnv1a64("data")));
  EXPECT_NE(substream_seed(1, 0), substream_seed(1, 1));
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}
