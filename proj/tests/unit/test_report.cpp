#include <gtest/gtest.h>

#include <cmath>

#include "rdmd/report.hpp"
#include "testing.hpp"

using namespace rdmd;

TEST(Csv, RoundTripsExactly) {
  CsvTable t{{"a", "b"}, {{0.1, -2e-300}, {1.0 / 3.0, 5.0}}};
  const std::string text = csv_text(t);
  EXPECT_EQ(text.substr(0, 4), "a,b\n");
  const CsvTable back = parse_csv(text);
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(csv_text(back), text);
}

TEST(Csv, NanAndInfSurvive) {
  CsvTable t{{"v"}, {{std::nan("")}, {INFINITY}, {-INFINITY}}};
  const CsvTable back = parse_csv(csv_text(t));
  EXPECT_TRUE(std::isnan(back.rows[0][0]));
  EXPECT_EQ(back.rows[1][0], INFINITY);
  EXPECT_EQ(back.rows[2][0], -INFINITY);
}

TEST(Csv, ErrorsNameTheLine) {
  try {
    parse_csv("a,b\n1,2\n3\n");
    FAIL();
  } catch (const CsvError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  try {
    parse_csv("a,b\n1,x\n");
    FAIL();
  } catch (const CsvError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_csv(""), CsvError);
  EXPECT_THROW(read_csv("/nonexistent/file.csv"), std::runtime_error);
}

TEST(Csv, PairsTableLayout) {
  const PairSet p(Tensor({2, 2}, {1, 2, 3, 4}), Tensor({2, 2}, {5, 6, 7, 8}));
  const CsvTable t = pairs_table(p);
  EXPECT_EQ(t.header, (std::vector<std::string>{"x0", "x1", "g0", "g1"}));
  EXPECT_EQ(t.rows[1], (std::vector<double>{3, 4, 7, 8}));
  const PairSet back = pairs_from_table(t);
  EXPECT_EQ(back.inputs, p.inputs);
  EXPECT_EQ(back.outputs, p.outputs);
}

TEST(Csv, FileRoundTrip) {
  const auto dir = support::scratch_dir("report_csv");
  const CsvTable t{{"x"}, {{1.5}}};
  write_csv(dir / "t.csv", t);
  EXPECT_EQ(read_csv(dir / "t.csv").rows, t.rows);
  EXPECT_EQ(read_text(dir / "t.csv"), "x\n1.5\n");
}

namespace {

SurfaceGrid bowl(std::size_t n) {
  SurfaceGrid g;
  for (std::size_t i = 0; i < n; ++i) g.r.push_back(0.5 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1));
  for (std::size_t j = 0; j < n; ++j) g.alpha.push_back(-3.0 + 6.0 * static_cast<double>(j) / static_cast<double>(n - 1));
  for (double r : g.r)
    for (double a : g.alpha) g.values.push_back((r - 1.5) * (r - 1.5) + 0.1 * a * a);
  return g;
}

}  // namespace

TEST(Svg, SurfaceIsDeterministicAndWellFormed) {
  const SurfaceGrid g = bowl(16);
  const std::string a = surface_svg(g, "bowl");
  EXPECT_EQ(a, surface_svg(g, "bowl"));
  EXPECT_EQ(a.rfind("<svg", 0), 0u);
  EXPECT_NE(a.find("</svg>"), std::string::npos);
  EXPECT_NE(a.find("bowl"), std::string::npos);
  EXPECT_NE(a.find("fill=\"red\""), std::string::npos);  // argmin marker
}

TEST(Svg, PairsAndLines) {
  const PairSet p(Tensor({2, 2}, {0, 0, 1, 1}), Tensor({2, 2}, {1, 0, 0, 1}));
  const std::string s = pairs_svg(p, Tensor({1, 2}, {0.5, 0.5}), "pairs");
  EXPECT_EQ(s, pairs_svg(p, Tensor({1, 2}, {0.5, 0.5}), "pairs"));
  EXPECT_NE(s.find("<line"), std::string::npos);
  const std::string empty = pairs_svg(std::nullopt);
  EXPECT_NE(empty.find("</svg>"), std::string::npos);
  const std::string l = line_svg({0.01, 0.1, 1.0}, {{3, 2, 1}}, {"cost"}, "lambda", "t", true);
  EXPECT_NE(l.find("<polyline"), std::string::npos);
  EXPECT_NE(l.find("cost"), std::string::npos);
}
