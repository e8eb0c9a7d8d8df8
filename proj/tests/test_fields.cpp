#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include "memcem/fields.hpp"
#include "test_util.hpp"

using namespace memcem;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("memcem_fields_" + name);
}

void write_text(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string load_error(const std::string& text) {
  const auto p = temp_file("bad.txt");
  write_text(p, text);
  try {
    load_field(p);
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  return {};
}

} // namespace

TEST(Fields, SaveLoadRoundTripIsExact) {
  const GridHierarchy g(3, 3);
  const auto f = test::random_field(g, 1e4, 11);
  const auto p = temp_file("roundtrip.txt");
  save_field(p, f, "random test field");
  const auto back = load_field(p);
  EXPECT_EQ(back.rows, f.rows);
  EXPECT_EQ(back.cols, f.cols);
  EXPECT_EQ(back.values, f.values);
}

TEST(Fields, LoadAcceptsCommentsAndSeparators) {
  const auto p = temp_file("mixed.txt");
  write_text(p, "# comment\n# another\n2 3\n1,2,3\n4\t5 6\n");
  const auto f = load_field(p);
  EXPECT_EQ(f.rows, 2);
  EXPECT_EQ(f.at(2, 0), 3.0);
  EXPECT_EQ(f.at(0, 1), 4.0);
}

TEST(Fields, LoadErrorsNamePosition) {
  EXPECT_NE(load_error("2 2\n1 2\n3 x\n").find("row 1, col 1"), std::string::npos);
  EXPECT_NE(load_error("2 2\n1 2\n3 -1\n").find("row 1, col 1"), std::string::npos);
  EXPECT_NE(load_error("2 2\n1 2 3\n").find("row 0"), std::string::npos);
  EXPECT_NE(load_error("2 2\n1 2\n").find("header says 2"), std::string::npos);
  EXPECT_NE(load_error("2\n").find("rows cols"), std::string::npos);
}

TEST(Fields, ValidationAndGridMatch) {
  const GridHierarchy g(2, 2);
  auto f = constant_field(g, 2.0);
  EXPECT_NO_THROW(f.check_matches(g));
  EXPECT_THROW(f.check_matches(GridHierarchy(2, 3)), std::invalid_argument);
  f.values[5] = 0.0;
  EXPECT_THROW(f.validate(), std::invalid_argument);
  EXPECT_THROW(constant_field(g, -1.0), std::invalid_argument);
  KernelSpec k;
  EXPECT_THROW(k.validate(), std::invalid_argument);
  k.terms.push_back({constant_field(g, 1.0), 0.0});
  EXPECT_THROW(k.validate(), std::invalid_argument);
}

TEST(Fields, SyntheticChannelsAreDeterministic) {
  const GridHierarchy g(10, 10);
  const auto spec = example1_channel_spec(g);
  const auto a = synth_channel_field(g, spec, 5);
  const auto b = synth_channel_field(g, spec, 5);
  const auto c = synth_channel_field(g, spec, 6);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
  const auto s = field_stats(a);
  EXPECT_DOUBLE_EQ(s.min, 1.0);
  EXPECT_DOUBLE_EQ(s.max, 1e4);
  EXPECT_DOUBLE_EQ(s.contrast, 1e4);
  EXPECT_GT(s.channel_fraction, 0.03);
  EXPECT_LT(s.channel_fraction, 0.3);
  // the third stand-in has more channels
  EXPECT_GT(field_stats(synth_channel_field(g, example3_channel_spec(g), 5)).channel_fraction, s.channel_fraction);
}

TEST(Fields, ChannelRectanglesAreChecked) {
  const GridHierarchy g(2, 2);
  ChannelSpec spec;
  spec.channels = {{0, 5, 0, 1}};
  EXPECT_THROW(synth_channel_field(g, spec, 1), std::invalid_argument);
  spec.channels = {{1, 3, 2, 3}};
  const auto f = synth_channel_field(g, spec, 1);
  EXPECT_EQ(f.at(1, 2), spec.channel);
  EXPECT_EQ(f.at(0, 2), spec.background);
}
