#include <gtest/gtest.h>

#include <fstream>

#include "shnet/run_config.hpp"
#include "temp_dir.hpp"

using namespace shnet;

TEST(RunConfig, DefaultsAreTheDeskScaleOperatingPoint) {
  RunConfig c;
  EXPECT_EQ(c.lr0, 1.2e-4);
  EXPECT_EQ(c.weight_decay, 9e-5);
  EXPECT_EQ(c.power, 0.7);
  EXPECT_EQ(c.batch, 8u);
  EXPECT_EQ(c.steps, 3000u);
  EXPECT_EQ(c.resolution, 64u);
  EXPECT_NO_THROW(validate(c));
  EXPECT_EQ(c.seed_list(), (std::vector<std::uint64_t>{0, 1, 2}));
}

TEST(RunConfig, SetGetEveryKey) {
  RunConfig c;
  for (const auto& key : config_keys()) {
    const std::string value = get_config_value(c, key);
    RunConfig d;
    set_config_value(d, key, value);
    EXPECT_EQ(get_config_value(d, key), value) << key;
  }
  set_config_value(c, "lr0", "3.5e-4");
  EXPECT_EQ(c.lr0, 3.5e-4);
  set_config_value(c, "variant", "only_sfm");
  EXPECT_EQ(c.model_config().variant, Variant::kOnlySfm);
  EXPECT_THROW(set_config_value(c, "lr", "1"), ConfigError);
  EXPECT_THROW(set_config_value(c, "steps", "12x"), ConfigError);
  EXPECT_THROW(set_config_value(c, "steps", "-3"), ConfigError);
}

TEST(RunConfig, FileParsingWithComments) {
  testutil::TempDir dir;
  std::ofstream(dir / "run.cfg") << "# desk run\n"
                                  << "variant = baseline\n"
                                  << "\n"
                                  << "steps=10   # short\n"
                                  << "  seeds = 4, 5 \n";
  RunConfig c;
  apply_config_file(c, dir / "run.cfg");
  EXPECT_EQ(c.variant, "baseline");
  EXPECT_EQ(c.steps, 10u);
  EXPECT_EQ(c.seed_list(), (std::vector<std::uint64_t>{4, 5}));

  std::ofstream(dir / "bad.cfg") << "steps = 10\nthis line has no equals\n";
  try {
    apply_config_file(c, dir / "bad.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.cfg:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(apply_config_file(c, dir / "missing.cfg"), ConfigError);
}

TEST(RunConfig, ValidateRejectsBadValues) {
  auto rejects = [](const std::string& key, const std::string& value) {
    RunConfig c;
    set_config_value(c, key, value);
    EXPECT_THROW(validate(c), ConfigError) << key << "=" << value;
  };
  rejects("variant", "nope");
  rejects("steps", "0");
  rejects("batch", "0");
  rejects("lr0", "0");
  rejects("power", "-1");
  rejects("resolution", "40");
  rejects("channels", "30");
  rejects("seeds", ",");
}

TEST(RunConfig, TextRoundTrip) {
  testutil::TempDir dir;
  RunConfig c;
  c.variant = "sfm_conv3d";
  c.lr0 = 0.1 + 0.2;
  c.seeds = "7";
  std::ofstream(dir / "copy.cfg") << to_text(c);
  RunConfig d;
  apply_config_file(d, dir / "copy.cfg");
  EXPECT_EQ(to_text(d), to_text(c));
  EXPECT_EQ(d.lr0, c.lr0);
}
