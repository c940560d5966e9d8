#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace malfam;
using namespace malfam::testing;

TEST_SUITE("schema") {

TEST_CASE("canonical schema has 141 features in six groups") {
  const auto& schema = *canonical_schema();
  CHECK(schema.size() == 141);
  std::map<FeatureGroup, std::size_t> groups;
  for (const auto& f : schema.features()) ++groups[f.group];
  CHECK(groups.size() == 6);
  CHECK(schema[0].id == "F1");
  CHECK(schema[140].id == "F141");
  CHECK(schema.find("Memory_PssTotal") == std::size_t{0});
  CHECK(schema.find_id("F76").has_value());
}

TEST_CASE("duplicate feature names are rejected") {
  const auto doc = R"({"features": [{"name": "Memory_PssTotal", "group": "Memory"},
                                     {"name": "Memory_PssTotal", "group": "Memory"}]})";
  CHECK_THROWS_AS(load_schema(doc), DataError);
}

TEST_CASE("single-feature schema has a stable fingerprint") {
  const auto doc = R"({"features": [{"id": "F1", "name": "Memory_PssTotal", "group": "Memory"}]})";
  const auto a = load_schema(doc);
  const auto b = load_schema(doc);
  CHECK(a.size() == 1);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint().size() == 16);
}

TEST_CASE("schema fingerprint depends on order") {
  const auto a = load_schema(R"({"features": [{"name": "x", "group": "API"}, {"name": "y", "group": "API"}]})");
  const auto b = load_schema(R"({"features": [{"name": "y", "group": "API"}, {"name": "x", "group": "API"}]})");
  CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("projection keeps ids and records the mask") {
  const auto& schema = *canonical_schema();
  const std::vector<std::size_t> ordinals{0, 75, 140};
  const auto projected = schema.project(ordinals);
  CHECK(projected.size() == 3);
  CHECK(projected[1].id == "F76");
  CHECK(projected.fingerprint() == mask_fingerprint(schema.fingerprint(), ordinals));
  CHECK(projected.fingerprint() != schema.fingerprint());
}

TEST_CASE("taxonomy has 14 categories and 180 families") {
  const auto& taxonomy = *canonical_taxonomy();
  CHECK(taxonomy.class_count(Task::category) == 14);
  CHECK(taxonomy.class_count(Task::family) == 180);
  const auto jisut = taxonomy.family_index("Jisut ");
  REQUIRE(jisut.has_value());
  CHECK(taxonomy.categories()[static_cast<std::size_t>(taxonomy.owning_category(*jisut))] == "Ransomware");
  CHECK(taxonomy.category_index("adware") == 0);
}

TEST_CASE("three-row CSV ingests in any column order") {
  std::istringstream csv("Family,f2,Category,f1\na1,2,A,1\nb1,4,B,3\nc1,6,C,5\n");
  const auto ds = ingest_csv(csv, small_schema(2), small_taxonomy());
  CHECK(ds.size() == 3);
  CHECK(ds.values()(1, 0) == 3.0);
  CHECK(ds.values()(1, 1) == 4.0);
  CHECK(ds.categories() == Labels{0, 1, 2});
  CHECK(ds.sample_ids().empty());
}

TEST_CASE("CSV ingestion errors") {
  const auto schema = small_schema(2);
  const auto taxonomy = small_taxonomy();
  auto ingest = [&](const std::string& text) {
    std::istringstream in(text);
    return ingest_csv(in, schema, taxonomy);
  };
  CHECK_THROWS_AS(ingest("f1,f2,Category,Family\n1,2,A,notafamily\n"), DataError);
  CHECK_THROWS_AS(ingest("f1,f2,Category,Family\n1,2,Z,a1\n"), DataError);
  CHECK_THROWS_AS(ingest("f1,f2,Category,Family\n1,2,B,a1\n"), DataError);
  CHECK_THROWS_AS(ingest("f1,f2,Category,Family\n1,x,A,a1\n"), DataError);
  CHECK_THROWS_AS(ingest("f1,Category,Family\n1,A,a1\n"), DataError);
  CHECK_THROWS_AS(ingest("f1,f2,f3,Category,Family\n1,2,3,A,a1\n"), DataError);
  CHECK_THROWS_AS(ingest("f1,f2\n1,2\n"), DataError);
  CHECK_THROWS_AS(ingest("f1,f2,Category,Family\n1,2,A\n"), DataError);
}

TEST_CASE("empty cells and NaN text ingest as NaN") {
  std::istringstream csv("f1,f2,Category,Family\n,NaN,A,a1\n");
  const auto ds = ingest_csv(csv, small_schema(2), small_taxonomy());
  CHECK(std::isnan(ds.values()(0, 0)));
  CHECK(std::isnan(ds.values()(0, 1)));
}

TEST_CASE("column map renames and drops columns") {
  const auto map = load_column_map(R"({"A1": "f1", "junk": null})");
  std::istringstream csv("\xEF\xBB\xBF" "A1,junk,f2,Category,Family\n1,zzz,2,A,a1\n");
  const auto ds = ingest_csv(csv, small_schema(2), small_taxonomy(), map);
  CHECK(ds.values()(0, 0) == 1.0);
  CHECK(ds.values()(0, 1) == 2.0);
}

TEST_CASE("CSV round trip is exact") {
  auto spec = default_synthetic_spec(*canonical_schema());
  spec.class_count = 3;
  spec.samples_per_class = 5;
  const auto ds = generate_synthetic(spec, canonical_schema(), canonical_taxonomy());
  std::stringstream buffer;
  write_csv(buffer, ds);
  const auto back = ingest_csv(buffer, canonical_schema(), canonical_taxonomy());
  CHECK(back == ds);
}

TEST_CASE("unlabeled feature table") {
  std::istringstream csv("SampleId,f2,f1\nx,2,1\n");
  const auto table = ingest_features_csv(csv, *small_schema(2));
  CHECK(table.values.rows() == 1);
  CHECK(table.values(0, 0) == 1.0);
  CHECK(table.sample_ids == std::vector<std::string>{"x"});
}

TEST_CASE("validation report") {
  SUBCASE("empty dataset") {
    std::istringstream csv("f1,f2,Category,Family\n");
    const auto report = validate_dataset(ingest_csv(csv, small_schema(2), small_taxonomy()));
    CHECK(report.empty);
    CHECK(report.samples == 0);
    CHECK(report.category_count("A") == 0);
  }
  SUBCASE("one NaN cell") {
    std::istringstream csv("f1,f2,Category,Family\n1,NaN,A,a1\n1,2,B,b1\n1,2,B,b1\n");
    const auto report = validate_dataset(ingest_csv(csv, small_schema(2), small_taxonomy()));
    CHECK_FALSE(report.empty);
    CHECK(report.non_finite_cells == 1);
    CHECK(report.rows_with_non_finite == 1);
    CHECK(report.duplicate_rows == 1);
    CHECK(report.category_count("b") == 2);
    CHECK(report.categories_present == 2);
  }
}

TEST_CASE("synthetic generator") {
  const auto schema = canonical_schema();
  const auto taxonomy = canonical_taxonomy();
  auto spec = default_synthetic_spec(*schema);
  spec.class_count = 2;
  spec.samples_per_class = 50;
  const auto a = generate_synthetic(spec, schema, taxonomy);
  const auto b = generate_synthetic(spec, schema, taxonomy);
  CHECK(a == b);
  CHECK(a.size() == 100);
  CHECK(std::count(a.categories().begin(), a.categories().end(), 0) == 50);
  CHECK(std::count(a.categories().begin(), a.categories().end(), 1) == 50);
  CHECK((a.values().array() >= 0.0).all());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(taxonomy->owning_category(a.families()[i]) == a.categories()[i]);
  }
  spec.seed = 8;
  CHECK_FALSE(generate_synthetic(spec, schema, taxonomy) == a);
}

TEST_CASE("default synthetic spec") {
  const auto spec = default_synthetic_spec(*canonical_schema());
  CHECK(spec.class_count == 14);
  CHECK(spec.samples_per_class == 300);
  CHECK(spec.informative_feature_ids.size() == 40);
  CHECK(spec.class_separation == 2.0);
  CHECK(spec.noise_scale == 1.0);
  CHECK(spec.seed == 7);
}

}
