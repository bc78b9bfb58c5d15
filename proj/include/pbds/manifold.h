#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbds/linalg.h"

namespace pbds {

enum class ManifoldKind { kEuclidean, kPositiveReals, kCircle, kSphere2, kProduct };

// Chart ids for S^1 and S^2. The south chart is the stereographic projection
// from the south pole: chart coordinate 0 is the north pole and the south pole
// is excluded. The north chart mirrors it.
inline constexpr int kSouthChart = 0;
inline constexpr int kNorthChart = 1;

// Immutable description of a configuration or task manifold as a collection
// of charts with a canonical Euclidean embedding.
class Manifold {
 public:
  static Manifold Euclidean(int dim);
  static Manifold PositiveReals();
  static Manifold Circle();
  static Manifold Sphere2();
  static Manifold Product(std::vector<Manifold> factors);

  ManifoldKind kind() const { return kind_; }
  int dimension() const { return dimension_; }
  int embedding_dimension() const { return embedding_dimension_; }
  int chart_count() const { return chart_count_; }

  // Product factors; a non-product manifold is its own single factor.
  const std::vector<Manifold>& factors() const { return factors_; }
  bool is_product() const { return kind_ == ManifoldKind::kProduct; }
  bool is_sphere() const {
    return kind_ == ManifoldKind::kCircle || kind_ == ManifoldKind::kSphere2;
  }

  std::string describe() const;

  friend bool operator==(const Manifold& a, const Manifold& b);

 private:
  Manifold() = default;

  ManifoldKind kind_ = ManifoldKind::kEuclidean;
  int dimension_ = 0;
  int embedding_dimension_ = 0;
  int chart_count_ = 1;
  std::vector<Manifold> factors_;
};

struct ChartPoint {
  int chart = 0;
  Vector coords;
};

struct TangentState {
  ChartPoint point;
  Vector velocity;
};

struct EmbeddedPoint {
  Vector coords;
};

// Throws Error(kDimensionMismatch / kOutOfDomain) if p is not a valid point.
void validate(const Manifold& m, const ChartPoint& p);
void validate(const Manifold& m, const TangentState& s);

EmbeddedPoint chart_to_embedding(const Manifold& m, const ChartPoint& p);

// Jacobian of the chart-to-embedding map, embedding_dimension x dimension.
Matrix embedding_jacobian(const Manifold& m, const ChartPoint& p);

// Second derivatives of the embedding, one dimension x dimension matrix per
// ambient coordinate.
std::vector<Matrix> embedding_hessian(const Manifold& m, const ChartPoint& p);

// Velocity-contracted second derivative d/dt J(p) along p' = v.
Matrix embedding_jacobian_dot(const Manifold& m, const ChartPoint& p, const Vector& v);

// Points within 1e-9 of the manifold are projected onto it; `chart` selects a
// chart, nullopt applies the hemisphere rule.
ChartPoint embedding_to_chart(const Manifold& m, const EmbeddedPoint& e,
                              std::optional<int> chart = std::nullopt);

ChartPoint chart_transition(const Manifold& m, const ChartPoint& p, int target);

// Jacobian of the transition map from p's chart to `target`, evaluated at p.
Matrix transition_jacobian(const Manifold& m, const ChartPoint& p, int target);

TangentState transition_tangent(const Manifold& m, const TangentState& s, int target);

struct ChartScheme {
  enum class Kind { kFixed, kHemisphere };
  Kind kind = Kind::kHemisphere;
  int chart = 0;

  static ChartScheme Fixed(int chart) { return {Kind::kFixed, chart}; }
  static ChartScheme Hemisphere() { return {Kind::kHemisphere, 0}; }

  std::string describe() const;
};

// Hemisphere: spheres use the south chart when the last embedded coordinate is
// >= 0 and the north chart otherwise; applied factorwise on products.
int select_chart(const Manifold& m, const EmbeddedPoint& e, const ChartScheme& scheme);

// Product helpers. Chart ids of products are mixed-radix encodings of the
// factor chart ids, first factor least significant.
int encode_chart(const Manifold& m, std::span<const int> factor_charts);
std::vector<int> decode_chart(const Manifold& m, int chart);
std::vector<int> factor_offsets(const Manifold& m);
std::vector<int> factor_embedding_offsets(const Manifold& m);
ChartPoint join_points(const Manifold& m, std::span<const ChartPoint> parts);
std::vector<ChartPoint> split_point(const Manifold& m, const ChartPoint& p);
Vector join_vectors(const Manifold& m, std::span<const Vector> parts);
std::vector<Vector> split_vector(const Manifold& m, const Vector& v);

}  // namespace pbds
