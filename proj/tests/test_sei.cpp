#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "cfmsd/graph.hpp"
#include "cfmsd/sei.hpp"

using namespace cfmsd;
namespace fs = std::filesystem;

namespace {

SeiRow obs(std::string name, double lumo, double f, double cap) { return {std::move(name), lumo, f, cap, true}; }

}  // namespace

TEST(Sei, BundledTable) {
  const auto rows = read_sei_table(fs::path(CFMSD_DATA_DIR) / "sei_dft.csv");
  ASSERT_EQ(rows.size(), 6u);
  const SeiFit fit = sei_regression(rows);
  EXPECT_EQ(fit.n_observed, 4u);
  EXPECT_NEAR(fit.theta_lumo, -35.1, 2.0);
  EXPECT_NEAR(fit.theta_f, 24.2, 3.0);
  EXPECT_GE(fit.r2, 0.90);
  ASSERT_EQ(fit.predictions.size(), 2u);
  for (const auto& p : fit.predictions) {
    EXPECT_NEAR(p.capacity_pct, 44.0, 3.0) << p.additive;
    EXPECT_EQ(p.anchor, "EC");
  }
}

TEST(Sei, ExactLinearData) {
  std::vector<SeiRow> rows{obs("a", -0.5, 0, 10 + 17.5), obs("b", -1.0, 1, 10 + 35), obs("c", -1.5, 0, 10 + 52.5),
                           obs("d", -2.0, 2, 10 + 70)};
  rows.push_back({"p", -0.7, 0, std::nullopt, false});
  const SeiFit fit = sei_regression(rows);
  EXPECT_NEAR(fit.theta_lumo, -35.0, 1e-10);
  EXPECT_NEAR(fit.theta0, 10.0, 1e-10);
  EXPECT_NEAR(fit.theta_f, 0.0, 1e-10);
  EXPECT_NEAR(fit.r2, 1.0, 1e-12);
  // on exact data both predictions agree
  EXPECT_NEAR(fit.predictions[0].capacity_pct, 10 + 35 * 0.7, 1e-9);
  EXPECT_NEAR(fit.predictions[0].regression_capacity_pct, 10 + 35 * 0.7, 1e-9);
}

TEST(Sei, TooFewObservations) {
  std::vector<SeiRow> rows{obs("a", -0.5, 0, 20), obs("b", -1.0, 1, 40)};
  EXPECT_THROW(sei_regression(rows), Error);
  rows.push_back(obs("c", -1.5, 1, 60));
  EXPECT_NO_THROW(sei_regression(rows));
}

TEST(Sei, MalformedTable) {
  const fs::path dir = fs::temp_directory_path() / "cfmsd_test_sei";
  fs::create_directories(dir);
  std::ofstream(dir / "bad_type.csv") << "additive,lumo_ev,f_count,capacity_pct,type\nEC,-0.78,0,53,Maybe\n";
  EXPECT_THROW(read_sei_table(dir / "bad_type.csv"), Error);
  std::ofstream(dir / "no_col.csv") << "additive,lumo_ev,capacity_pct,type\nEC,-0.78,53,Obs\n";
  EXPECT_THROW(read_sei_table(dir / "no_col.csv"), Error);
  std::ofstream(dir / "no_cap.csv") << "additive,lumo_ev,f_count,capacity_pct,type\nEC,-0.78,0,,Obs\n";
  EXPECT_THROW(read_sei_table(dir / "no_cap.csv"), Error);
}
