#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "rdid/csv.hpp"
#include "rdid/normal.hpp"
#include "rdid/rng.hpp"

using namespace rdid;

// Reference quantiles from a 30-digit evaluation of sqrt(2) erfinv(2p - 1).
TEST(NormalQuantile, MatchesHighPrecisionConstants) {
  const std::pair<double, double> cases[] = {
      {0.5, 0.0},
      {0.9, 1.28155156554460046696510332945},
      {0.95, 1.64485362695147271486384890799},
      {0.975, 1.95996398454005423552459443052},
      {0.995, 2.5758293035489007609785767486},
      {0.001, -3.09023230616781354154039983011},
      {1e-10, -6.36134090240405620469535501582},
  };
  for (auto [p, q] : cases) EXPECT_NEAR(normal::quantile(p), q, 1e-9) << "p=" << p;
}

TEST(NormalQuantile, SymmetricAndInvertsCdf) {
  for (double p = 0.01; p < 1.0; p += 0.01) {
    EXPECT_NEAR(normal::quantile(p), -normal::quantile(1.0 - p), 1e-12);
    EXPECT_NEAR(normal::cdf(normal::quantile(p)), p, 1e-13);
  }
  EXPECT_TRUE(std::isinf(normal::quantile(0.0)));
  EXPECT_TRUE(std::isinf(normal::quantile(1.0)));
  EXPECT_THROW(normal::quantile(1.5), Error);
}

TEST(NormalQuantile, TwoSidedCritical) {
  EXPECT_NEAR(normal::two_sided_critical(95.0), 1.95996398454005423552459443052, 1e-9);
  EXPECT_NEAR(normal::two_sided_critical(90.0), 1.64485362695147271486384890799, 1e-9);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a = Rng::stream(42, {3, 7});
  Rng b = Rng::stream(42, {3, 7});
  Rng c = Rng::stream(42, {3, 8});
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
  EXPECT_NE(derive_seed(1, {0}), derive_seed(1, {1}));
  EXPECT_NE(derive_seed(1, {0}), derive_seed(2, {0}));
}

TEST(Rng, UniformOpenIntervalAndBelowRange) {
  Rng r(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(r.below(7), 7u);
  }
}

TEST(Rng, NormalMoments) {
  Rng r(5);
  const int n = 200000;
  double s = 0, ss = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    ss += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(ss / n, 1.0, 0.02);
}

TEST(Csv, FormatRoundTripsExactly) {
  Rng r(11);
  for (int i = 0; i < 1000; ++i) {
    const double x = r.normal() * std::pow(10.0, r.uniform(-8, 8));
    EXPECT_EQ(*csv::parse_double(csv::format_double(x)), x);
  }
  EXPECT_EQ(csv::format_double(17.0), "17");
  EXPECT_EQ(csv::format_double(-2.0), "-2");
}

TEST(Csv, ParsesQuotedFieldsAndBom) {
  std::istringstream in("\xEF\xBB\xBF" "a, b ,c\r\n1,\"x,\"\"y\"\"\",3\n4,5\n");
  const auto t = csv::read(in);
  ASSERT_EQ(t.header.size(), 3u);
  EXPECT_EQ(t.header[1], "b");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][1], "x,\"y\"");
  EXPECT_EQ(t.rows[1].size(), 3u);
  EXPECT_TRUE(csv::is_missing(t.rows[1][2]));
}

TEST(Csv, RejectsNonNumericText) {
  EXPECT_FALSE(csv::parse_double("abc"));
  EXPECT_FALSE(csv::parse_double("1.5x"));
  EXPECT_FALSE(csv::parse_double("nan"));
  EXPECT_EQ(*csv::parse_double(" 2.5 "), 2.5);
}
