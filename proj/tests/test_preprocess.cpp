#include "support.hpp"

#include <doctest.h>

#include <limits>

using namespace malfam;
using namespace malfam::testing;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

TEST_SUITE("preprocess") {

TEST_CASE("drop_incomplete") {
  Matrix x(3, 2);
  x << 1, 2, 3, kNaN, 5, 6;
  const auto ds = small_dataset(x, {0, 1, 2});
  const auto kept = drop_incomplete(ds);
  CHECK(kept.size() == 2);
  CHECK(kept.values()(1, 0) == 5.0);
  CHECK(kept.categories() == Labels{0, 2});

  const auto finite = small_dataset(Matrix::Ones(2, 2), {0, 1});
  CHECK(drop_incomplete(finite) == finite);

  Matrix all_bad(2, 1);
  all_bad << kNaN, std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(drop_incomplete(small_dataset(all_bad, {0, 1})), DataError);
}

TEST_CASE("dedupe keeps the first of each triple") {
  Matrix x(4, 2);
  x << 1, 2, 1, 2, 1, 2, 3, 4;
  auto ds = small_dataset(x, {0, 0, 1, 0});
  const auto unique = dedupe(ds);
  CHECK(unique.size() == 3);
  CHECK(unique.categories() == Labels{0, 1, 0});

  const Dataset families(ds.schema_ptr(), ds.taxonomy_ptr(), Matrix::Ones(2, 2), {0, 0}, {0, 3});
  CHECK(dedupe(families).size() == 2);

  const auto distinct = small_dataset(Matrix::Identity(3, 3), {0, 1, 2});
  CHECK(dedupe(distinct) == distinct);
}

TEST_CASE("minmax fit") {
  Matrix x(3, 2);
  x << 2, 5, 4, 5, 6, 5;
  const auto params = fit_minmax(small_dataset(x, {0, 1, 2}));
  CHECK(params.min[0] == 2.0);
  CHECK(params.max[0] == 6.0);
  CHECK(params.min[1] == 5.0);
  CHECK(params.max[1] == 5.0);

  Matrix row(1, 2);
  row << 3, 7;
  const auto single = fit_minmax(small_dataset(row, {0}));
  CHECK(single.min == single.max);
}

TEST_CASE("minmax apply") {
  Matrix x(3, 2);
  x << 2, 5, 4, 5, 6, 5;
  const auto ds = small_dataset(x, {0, 1, 2});
  const auto params = fit_minmax(ds);
  const auto scaled = apply_minmax(ds, params);
  CHECK(scaled.clamped == 0);
  CHECK(scaled.data.values()(0, 0) == 0.0);
  CHECK(scaled.data.values()(1, 0) == 0.5);
  CHECK(scaled.data.values()(2, 0) == 1.0);
  CHECK(scaled.data.values().col(1).isZero());

  Matrix outside(1, 2);
  outside << 8, 5;
  const auto clamped = apply_minmax(small_dataset(outside, {0}), params);
  CHECK(clamped.data.values()(0, 0) == 1.0);
  CHECK(clamped.clamped == 1);
}

TEST_CASE("minmax is idempotent") {
  auto spec = default_synthetic_spec(*canonical_schema());
  spec.class_count = 4;
  spec.samples_per_class = 10;
  const auto ds = generate_synthetic(spec, canonical_schema(), canonical_taxonomy());
  const auto once = apply_minmax(ds, fit_minmax(ds)).data;
  const auto twice = apply_minmax(once, fit_minmax(once)).data;
  CHECK((once.values() - twice.values()).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((once.values().array() >= 0.0).all());
  CHECK((once.values().array() <= 1.0).all());
}

TEST_CASE("scale params are bound to the schema") {
  const auto ds = small_dataset(Matrix::Identity(2, 2), {0, 1});
  const auto params = fit_minmax(ds);
  CHECK(ScaleParams::from_json(params.to_json()) == params);
  const auto other = small_dataset(Matrix::Identity(3, 3), {0, 1, 2});
  CHECK_THROWS_AS(apply_minmax(other, params), DataError);
}

TEST_CASE("pipeline order leaves finite unique scaled rows") {
  Matrix x(4, 2);
  x << 1, 2, kNaN, 1, 1, 2, 3, 8;
  const auto clean = dedupe(drop_incomplete(small_dataset(x, {0, 1, 0, 1})));
  CHECK(clean.size() == 2);
  const auto scaled = apply_minmax(clean, fit_minmax(clean)).data;
  CHECK(scaled.values().allFinite());
}

}
