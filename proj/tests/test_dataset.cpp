#include "catch_amalgamated.hpp"

#include <sstream>

#include "bnpmeta/dataset.hpp"
#include "bnpmeta/key_value.hpp"
#include "fixtures.hpp"

using namespace bnpmeta;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

ModeratorSchema two_column_schema() {
  return ModeratorSchema({{"SE", ModeratorKind::continuous, ""}, {"mom", ModeratorKind::binary, ""}});
}

std::vector<RowDiagnostic> diagnostics_of(const std::string& text, const ModeratorSchema& schema) {
  std::istringstream in(text);
  try {
    parse_dataset(in, schema);
  } catch (const DatasetError& e) {
    return e.diagnostics();
  }
  return {};
}

}  // namespace

TEST_CASE("the canonical schema has 29 unique moderators") {
  const auto s = ModeratorSchema::canonical();
  REQUIRE(s.size() == 29);
  CHECK(s[0].name == "SE");
  CHECK(s[28].name == "longitude");
  CHECK(s[*s.index_of("white60")].kind == ModeratorKind::binary);
  CHECK(s[*s.index_of("teacher")].kind == ModeratorKind::proportion);
  CHECK(s[*s.index_of("age")].kind == ModeratorKind::continuous);
  CHECK_THROWS_AS(ModeratorSchema({{"a", ModeratorKind::binary, ""}, {"a", ModeratorKind::binary, ""}}),
                  std::invalid_argument);
}

TEST_CASE("a valid file loads in any column order") {
  std::istringstream in(
      "mom,var,study_id,SE,h2\n"
      "1,0.04,s1,0.2,0.5\n"
      "0,0.01,s2,0.1,0.3\n");
  const auto recs = parse_dataset(in, two_column_schema());
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].study_id == "s1");
  CHECK(recs[0].y == 0.5);
  CHECK(recs[0].var == 0.04);
  CHECK(recs[0].x == std::vector<double>{0.2, 1.0});
}

TEST_CASE("SE is recomputed from var and checked") {
  std::istringstream in("study_id,h2,var,SE,mom\ns1,0.5,0.0004,0.0200000004,1\n");
  const auto recs = parse_dataset(in, two_column_schema());
  CHECK(recs[0].x[0] == std::sqrt(0.0004));
  const auto d = diagnostics_of("study_id,h2,var,SE,mom\ns1,0.5,0.04,0.3,1\n", two_column_schema());
  REQUIRE(d.size() == 1);
  CHECK(d[0].column == "SE");
  CHECK(d[0].line == 2);
}

TEST_CASE("bad rows are reported with line and column") {
  const auto schema = two_column_schema();
  auto d = diagnostics_of("study_id,h2,var,SE,mom\ns1,0.5,0,0,1\n", schema);
  REQUIRE(d.size() == 1);
  CHECK(d[0].column == "var");
  CHECK(d[0].line == 2);

  d = diagnostics_of("study_id,h2,var,SE,mom\ns1,0.5,0.04,0.2,1\ns2,NA,0.04,0.2,1\ns3,0.5,0.04,0.2,0.5\n", schema);
  REQUIRE(d.size() == 2);
  CHECK(d[0].line == 3);
  CHECK(d[0].column == "h2");
  CHECK(d[1].line == 4);
  CHECK(d[1].column == "mom");

  d = diagnostics_of("study_id,h2,var,SE,mom\ns1,0.5,0.04,,1\n", schema);
  REQUIRE(d.size() == 1);
  CHECK(d[0].column == "SE");
}

TEST_CASE("header problems are hard failures") {
  const auto schema = two_column_schema();
  auto d = diagnostics_of("study_id,h2,var,SE\ns1,0.5,0.04,0.2\n", schema);
  REQUIRE(d.size() == 1);
  CHECK(d[0].column == "mom");
  d = diagnostics_of("study_id,h2,var,SE,mom,extra\n", schema);
  REQUIRE(d.size() == 1);
  CHECK(d[0].column == "extra");
  std::istringstream empty("study_id,h2,var,SE,mom\n");
  CHECK_THROWS_WITH(parse_dataset(empty, schema), ContainsSubstring("no records"));
}

TEST_CASE("loading is deterministic and round-trips through write_dataset") {
  const auto recs = fixtures::random_records(25, 3);
  const auto text = fixtures::to_csv(recs);
  std::istringstream a(text), b(text);
  const auto schema = ModeratorSchema::canonical();
  const auto ra = parse_dataset(a, schema);
  const auto rb = parse_dataset(b, schema);
  std::ostringstream wa, wb;
  write_dataset(wa, ra, schema);
  write_dataset(wb, rb, schema);
  CHECK(wa.str() == wb.str());
  CHECK(wa.str() == text);
}

TEST_CASE("standardize uses the n-1 standard deviation") {
  std::vector<EffectSizeRecord> recs;
  for (double v : {0.0, 0.0, 1.0, 1.0}) recs.push_back({"s", 0.5, 0.01, {v}});
  const auto st = standardize(recs, std::vector<std::string>{"mom"}, nullptr);
  CHECK_THAT(st.standardization.scales[0], WithinAbs(0.5773502691896258, 1e-15));
  const double z[] = {-0.8660254037844386, -0.8660254037844386, 0.8660254037844386, 0.8660254037844386};
  for (std::size_t i = 0; i < 4; ++i) CHECK_THAT(st.records[i].x[0], WithinAbs(z[i], 1e-15));
}

TEST_CASE("standardize is idempotent on z-scores") {
  auto recs = fixtures::random_records(30, 5);
  const auto once = standardize(recs, ModeratorSchema::canonical(), nullptr);
  const auto twice = standardize(once.records, ModeratorSchema::canonical(), nullptr);
  for (std::size_t i = 0; i < recs.size(); ++i)
    for (std::size_t k = 0; k < 29; ++k)
      CHECK_THAT(twice.records[i].x[k], WithinAbs(once.records[i].x[k], 1e-9));
}

TEST_CASE("constant columns are centered, flagged and warned about") {
  std::vector<EffectSizeRecord> recs;
  for (int i = 0; i < 4; ++i) recs.push_back({"s", 0.5, 0.01, {1.0, static_cast<double>(i)}});
  std::ostringstream warnings;
  const auto st = standardize(recs, std::vector<std::string>{"white60", "age"}, &warnings);
  CHECK(st.standardization.constant[0]);
  CHECK_FALSE(st.standardization.constant[1]);
  CHECK(st.standardization.scales[0] == 1.0);
  for (const auto& r : st.records) CHECK(r.x[0] == 0.0);
  CHECK_THAT(warnings.str(), ContainsSubstring("white60"));
  CHECK(st.constant_columns() == std::vector<std::size_t>{0});
}

TEST_CASE("standardized columns have mean 0 and sd 1, and destandardize inverts") {
  const auto recs = fixtures::random_records(40, 9);
  const auto st = standardize(recs, ModeratorSchema::canonical(), nullptr);
  const auto desc = describe(st.records, ModeratorSchema::canonical());
  for (std::size_t k = 2; k < desc.size(); ++k) {
    if (st.standardization.constant[k - 2]) continue;
    CHECK_THAT(desc[k].mean, WithinAbs(0.0, 1e-9));
    CHECK_THAT(desc[k].sd, WithinAbs(1.0, 1e-9));
  }
  const auto back = st.destandardize();
  for (std::size_t i = 0; i < recs.size(); ++i)
    for (std::size_t k = 0; k < 29; ++k) CHECK_THAT(back[i].x[k], WithinAbs(recs[i].x[k], 1e-9 * std::max(1.0, std::abs(recs[i].x[k]))));
}

TEST_CASE("standardize needs two records") {
  std::vector<EffectSizeRecord> one{{"s", 0.5, 0.01, {1.0}}};
  CHECK_THROWS_AS(standardize(one, std::vector<std::string>{"age"}, nullptr), std::invalid_argument);
}

TEST_CASE("describe reports means and sds in reporting order") {
  std::vector<EffectSizeRecord> recs{{"a", 0.4, 0.01, {1.0}}, {"b", 0.6, 0.03, {3.0}}};
  const auto d = describe(recs, std::vector<std::string>{"age"});
  REQUIRE(d.size() == 3);
  CHECK(d[0].variable == "h2");
  CHECK_THAT(d[0].mean, WithinAbs(0.5, 1e-15));
  CHECK_THAT(d[0].sd, WithinAbs(0.1414213562373095, 1e-12));
  CHECK(d[1].variable == "var");
  CHECK(d[2].variable == "age");
  CHECK_FALSE(d[0].sd_degenerate);

  const auto single = describe(std::vector<EffectSizeRecord>{recs[0]}, std::vector<std::string>{"age"});
  CHECK(single[0].sd == 0.0);
  CHECK(single[0].sd_degenerate);
  CHECK_THROWS(describe(std::vector<EffectSizeRecord>{}, std::vector<std::string>{"age"}));

  std::ostringstream out;
  write_description_csv(out, d);
  CHECK(out.str().rfind("variable,mean,SD\nh2,0.5,", 0) == 0);
}

TEST_CASE("design rows map original-scale moderators") {
  std::vector<EffectSizeRecord> recs{{"a", 0.4, 0.01, {10.0, 1.0}}, {"b", 0.6, 0.03, {30.0, 0.0}}};
  const auto st = standardize(recs, std::vector<std::string>{"age", "mom"}, nullptr);
  const std::vector<std::optional<double>> x{20.0, std::nullopt};
  const auto row = st.standardization.design_row(x);
  CHECK(row.size() == 3);
  CHECK(row[0] == 1.0);
  CHECK_THAT(row[1], WithinAbs(0.0, 1e-15));
  CHECK(row[2] == 0.0);
  CHECK(st.standardization.matches(st.standardization));
}

TEST_CASE("key-value files") {
  const auto kv = parse_key_values("# comment\n[prior]\nslope_var = 2.5 ; trailing\n\nseed=7\n");
  CHECK(kv.at("slope_var") == "2.5");
  CHECK(key_value_double(kv, "slope_var", 0.0) == 2.5);
  CHECK(key_value_integer(kv, "seed", 0) == 7);
  CHECK(key_value_double(kv, "absent", 3.0) == 3.0);
  CHECK_THROWS(key_value_double(parse_key_values("x = abc\n"), "x", 0.0));
}
