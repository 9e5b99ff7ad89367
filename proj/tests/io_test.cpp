#include <gtest/gtest.h>

#include <filesystem>

#include "parbayes/io.hpp"

using namespace parbayes;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("parbayes_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(DataFile, RoundTripIsExact) {
  const LGSSM m = make_random_lgssm(3, 2, 25, 4);
  const DataFile data{m, simulate(m, 4)};
  const fs::path path = scratch_dir("roundtrip") / "data.json";
  write_data_file(path, data);
  const DataFile back = read_data_file(path);
  EXPECT_EQ(back.model.m0, m.m0);
  EXPECT_EQ(back.model.P0, m.P0);
  EXPECT_EQ(back.model.steps[0].F, m.steps[0].F);
  EXPECT_EQ(back.model.steps[0].R, m.steps[0].R);
  EXPECT_EQ(back.model.n, m.n);
  EXPECT_EQ(back.sim.states, data.sim.states);
  EXPECT_EQ(back.sim.measurements, data.sim.measurements);
  EXPECT_EQ(back.sim.seed, 4u);
}

TEST(DataFile, SameContentSerializesIdentically) {
  const LGSSM m = make_default_tracking_model(30);
  const std::string a = to_json(DataFile{m, simulate(m, 1)}).dump(1);
  const std::string b = to_json(DataFile{m, simulate(m, 1)}).dump(1);
  EXPECT_EQ(a, b);
}

TEST(DataFile, MeasurementCountMismatchIsDescriptive) {
  const LGSSM m = make_default_tracking_model(5);
  Json j = to_json(DataFile{m, simulate(m, 1)});
  j["measurements"].erase(0);
  try {
    data_from_json(j);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("n=5"), std::string::npos) << e.what();
  }
  j = to_json(DataFile{m, simulate(m, 1)});
  j["measurements"][2] = Json::array({1.0});
  EXPECT_THROW(data_from_json(j), IoError);
}

TEST(ModelJson, RejectsMalformedModels) {
  Json j = to_json(make_default_tracking_model(3));
  j["steps"][0]["F"] = Json::array({Json::array({1, 2}), Json::array({3})});
  EXPECT_THROW(model_from_json(j), IoError);
  j = to_json(make_default_tracking_model(3));
  j.erase("P0");
  EXPECT_THROW(model_from_json(j), IoError);
  j = to_json(make_default_tracking_model(3));
  j["steps"][0]["H"] = Json::array({Json::array({1, 0})});
  EXPECT_THROW(model_from_json(j), IoError);
  j = to_json(make_default_tracking_model(3));
  j["m0"][1] = "x";
  EXPECT_THROW(model_from_json(j), IoError);
}

TEST(ModelJson, ReadsBareOrWrappedModel) {
  const fs::path dir = scratch_dir("model");
  const LGSSM m = make_random_lgssm(2, 1, 7, 2);
  write_text(dir / "bare.json", to_json(m).dump());
  write_text(dir / "wrapped.json", Json{{"model", to_json(m)}}.dump());
  EXPECT_EQ(read_model_file(dir / "bare.json").steps[0].Q, m.steps[0].Q);
  EXPECT_EQ(read_model_file(dir / "wrapped.json").m0, m.m0);
  write_text(dir / "broken.json", "{ not json");
  EXPECT_THROW(read_model_file(dir / "broken.json"), IoError);
}

TEST(Files, UnwritablePathNamesThePath) {
  const fs::path bad = "/nonexistent_dir_for_parbayes/out.json";
  try {
    write_text(bad, "x");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(bad.string()), std::string::npos);
  }
  EXPECT_THROW(read_text("/nonexistent_dir_for_parbayes/in.json"), IoError);
}

TEST(MomentsCsv, HeaderAndRows) {
  const std::vector<GaussianMoment> ms{{Vector{1, 2}, Matrix{{1, 0.5}, {0.5, 2}}}, {Vector{3, 4}, Matrix::identity(2)}};
  const std::vector<double> dens{-1.5, -2.5}, pre{-1.5, -4.0};
  const std::string csv = moments_csv(ms, &dens, &pre);
  const CsvTable t = parse_numeric_csv(csv);
  EXPECT_EQ(t.header, (std::vector<std::string>{"k", "mean_0", "mean_1", "cov_0_0", "cov_0_1", "cov_1_0", "cov_1_1",
                                                "log_density", "log_prefix"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0], (std::vector<double>{1, 1, 2, 1, 0.5, 0.5, 2, -1.5, -1.5}));
  EXPECT_EQ(t.rows[1][8], -4.0);
  EXPECT_EQ(parse_numeric_csv(moments_csv(ms)).header.size(), 7u);
}

TEST(MomentsCsv, FullPrecisionRoundTrip) {
  const std::vector<GaussianMoment> ms{{Vector{1.0 / 3.0}, Matrix{{2.0 / 7.0}}}};
  const CsvTable t = parse_numeric_csv(moments_csv(ms));
  EXPECT_EQ(t.rows[0][1], 1.0 / 3.0);
  EXPECT_EQ(t.rows[0][2], 2.0 / 7.0);
}

TEST(NumericCsv, ErrorsCarryLineNumbers) {
  try {
    parse_numeric_csv("a,b\n1,2\n3,x\n");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  try {
    parse_numeric_csv("a,b\n1,2,3\n");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}
