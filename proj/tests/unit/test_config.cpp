#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "mmw/codebook.hpp"
#include "mmw/config.hpp"

namespace fs = std::filesystem;
using namespace mmw;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mmw_config_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

}  // namespace

TEST(Config, DefaultsMatchReferenceSetup) {
  const SystemConfig cfg;
  EXPECT_EQ(cfg.num_users, 20);
  EXPECT_EQ(cfg.max_selected, 10);
  EXPECT_EQ(cfg.num_rf_chains, 10);
  EXPECT_DOUBLE_EQ(cfg.tx_power_w, 2.0);
  EXPECT_DOUBLE_EQ(cfg.noise_power_w, 1e-15);
  EXPECT_DOUBLE_EQ(cfg.ema_delta, 0.1);
  EXPECT_DOUBLE_EQ(cfg.carrier_hz, 28e9);
  EXPECT_EQ(cfg.num_antennas(), 16);
  EXPECT_EQ(cfg.slots_per_long_block, 40);
  EXPECT_EQ(cfg.slots_per_episode, 120);
  EXPECT_DOUBLE_EQ(cfg.cell_radius_m, 100.0);
  EXPECT_DOUBLE_EQ(cfg.bs_height_m, 7.0);
  EXPECT_DOUBLE_EQ(cfg.downtilt_deg, 10.0);
  EXPECT_DOUBLE_EQ(cfg.user_speed_kmh, 4.0);
  EXPECT_EQ(cfg.ml_hidden, (std::vector<int>{500, 200}));
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, PaperFileLoadsReferenceValuesAnd256Beams) {
  const auto cfg = load_config(fs::path(MMW_SOURCE_DIR) / "configs" / "paper.toml");
  EXPECT_EQ(cfg.num_users, 20);
  EXPECT_EQ(cfg.max_selected, 10);
  EXPECT_EQ(cfg.train_episodes, 12000);
  EXPECT_EQ(cfg.ml_epochs, 300);
  EXPECT_EQ(build_grid_codebook(cfg).size(), 256);
}

TEST(Config, DeskExtendsPaper) {
  const auto cfg = load_config(fs::path(MMW_SOURCE_DIR) / "configs" / "desk.toml");
  EXPECT_EQ(cfg.train_episodes, 500);
  EXPECT_EQ(cfg.test_episodes, 200);
  EXPECT_EQ(cfg.ml_epochs, 50);
  EXPECT_EQ(cfg.num_users, 20);
}

TEST(Config, ExtendsIsRelativeAndLaterKeysWin) {
  const auto dir = temp_dir("extends");
  fs::create_directories(dir / "sub");
  write_file(dir / "base.toml", "num_users = 7\nmax_selected = 2\n");
  write_file(dir / "sub" / "child.toml", "extends = ../base.toml\n[section]\nmax_selected = 3 # comment\n");
  const auto cfg = load_config(dir / "sub" / "child.toml");
  EXPECT_EQ(cfg.num_users, 7);
  EXPECT_EQ(cfg.max_selected, 3);
}

TEST(Config, ExtendsCycleIsRejected) {
  const auto dir = temp_dir("cycle");
  write_file(dir / "a.toml", "extends = b.toml\n");
  write_file(dir / "b.toml", "extends = a.toml\n");
  EXPECT_THROW(load_config(dir / "a.toml"), ConfigError);
}

TEST(Config, UnknownKeyAndBadValueAreConfigErrors) {
  const auto dir = temp_dir("bad");
  write_file(dir / "unknown.toml", "num_userz = 3\n");
  write_file(dir / "value.toml", "num_users = three\n");
  write_file(dir / "syntax.toml", "num_users 3\n");
  EXPECT_THROW(load_config(dir / "unknown.toml"), ConfigError);
  EXPECT_THROW(load_config(dir / "value.toml"), ConfigError);
  EXPECT_THROW(load_config(dir / "syntax.toml"), ConfigError);
  EXPECT_THROW(load_config(dir / "missing.toml"), ConfigError);
}

TEST(Config, ValidateRejectsMoreSelectedThanRfChains) {
  SystemConfig cfg;
  cfg.max_selected = 11;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.max_selected = 10;
  cfg.num_users = 5;  // fewer users than N_max is allowed
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, DumpRoundTrips) {
  SystemConfig cfg;
  cfg.num_users = 9;
  cfg.ml_hidden = {32, 16, 8};
  cfg.evolve_gains = false;
  cfg.ml_inputs = "W+C(D)";
  const auto dir = temp_dir("dump");
  write_file(dir / "dump.toml", dump_config(cfg));
  const auto back = load_config(dir / "dump.toml");
  EXPECT_EQ(dump_config(back), dump_config(cfg));
  EXPECT_EQ(fnv1a64(dump_config(back)), fnv1a64(dump_config(cfg)));
}

TEST(Config, SeedStreamsAreDistinctAndDeterministic) {
  EXPECT_EQ(derive_seed(1, SeedStream::kTrain, 5), derive_seed(1, SeedStream::kTrain, 5));
  EXPECT_NE(derive_seed(1, SeedStream::kTrain, 5), derive_seed(1, SeedStream::kTest, 5));
  EXPECT_NE(derive_seed(1, SeedStream::kTrain, 5), derive_seed(1, SeedStream::kTrain, 6));
  EXPECT_NE(derive_seed(1, SeedStream::kTrain, 5), derive_seed(2, SeedStream::kTrain, 5));
}
