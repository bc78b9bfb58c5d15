#include "pbds/manifold.h"

#include <cmath>
#include <sstream>

#include "pbds/error.h"

namespace pbds {

namespace {

// Embedded points of spheres farther than this from the unit sphere are
// rejected; closer ones are renormalized.
constexpr double kOnManifoldTolerance = 1e-9;

Error dimension_error(const std::string& what, Eigen::Index got, Eigen::Index want) {
  std::ostringstream os;
  os << what << ": got length " << got << ", expected " << want;
  return Error(ErrorKind::kDimensionMismatch, os.str());
}

double chart_sign(int chart) { return chart == kSouthChart ? 1.0 : -1.0; }

// Inverse stereographic projection for S^n, n = coords.size().
Vector sphere_embed(int chart, const Vector& x) {
  const Eigen::Index n = x.size();
  const double a = 1.0 + x.squaredNorm();
  Vector e(n + 1);
  e.head(n) = 2.0 * x / a;
  e(n) = chart_sign(chart) * (2.0 - a) / a;
  return e;
}

Matrix sphere_jacobian(int chart, const Vector& x) {
  const Eigen::Index n = x.size();
  const double a = 1.0 + x.squaredNorm();
  Matrix j(n + 1, n);
  j.topRows(n) = (2.0 / a) * Matrix::Identity(n, n) - (4.0 / (a * a)) * x * x.transpose();
  j.row(n) = chart_sign(chart) * (-4.0 / (a * a)) * x.transpose();
  return j;
}

std::vector<Matrix> sphere_hessian(int chart, const Vector& x) {
  const Eigen::Index n = x.size();
  const double a = 1.0 + x.squaredNorm();
  const double a2 = a * a;
  const double a3 = a2 * a;
  std::vector<Matrix> h(n + 1, Matrix::Zero(n, n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index k = 0; k < n; ++k) {
        const double delta_terms = (i == j ? x(k) : 0.0) + (i == k ? x(j) : 0.0) +
                                   (j == k ? x(i) : 0.0);
        h[i](j, k) = -4.0 * delta_terms / a2 + 16.0 * x(i) * x(j) * x(k) / a3;
      }
    }
  }
  h[n] = chart_sign(chart) *
         ((-4.0 / a2) * Matrix::Identity(n, n) + (16.0 / a3) * x * x.transpose());
  return h;
}

Vector sphere_chart(int chart, const Vector& e) {
  const Eigen::Index n = e.size() - 1;
  const double denom = 1.0 + chart_sign(chart) * e(n);
  if (denom <= 1e-14) {
    throw Error(ErrorKind::kOutOfDomain,
                "embedded point is the excluded pole of chart " + std::to_string(chart));
  }
  return e.head(n) / denom;
}

Vector inversion(const Vector& x) {
  const double r2 = x.squaredNorm();
  if (!(r2 > 0.0)) {
    throw Error(ErrorKind::kSingular,
                "chart transition undefined at the chart origin (excluded pole of the other chart)");
  }
  return x / r2;
}

Matrix inversion_jacobian(const Vector& x) {
  const double r2 = x.squaredNorm();
  if (!(r2 > 0.0)) {
    throw Error(ErrorKind::kSingular, "chart transition undefined at the chart origin");
  }
  const Eigen::Index n = x.size();
  return (r2 * Matrix::Identity(n, n) - 2.0 * x * x.transpose()) / (r2 * r2);
}

void check_chart(const Manifold& m, int chart) {
  if (chart < 0 || chart >= m.chart_count()) {
    throw Error(ErrorKind::kOutOfDomain, "chart id " + std::to_string(chart) +
                                             " out of range for " + m.describe());
  }
}

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

}  // namespace

Manifold Manifold::Euclidean(int dim) {
  if (dim < 1) throw Error(ErrorKind::kDimensionMismatch, "Euclidean dimension must be >= 1");
  Manifold m;
  m.kind_ = ManifoldKind::kEuclidean;
  m.dimension_ = dim;
  m.embedding_dimension_ = dim;
  m.chart_count_ = 1;
  return m;
}

Manifold Manifold::PositiveReals() {
  Manifold m;
  m.kind_ = ManifoldKind::kPositiveReals;
  m.dimension_ = 1;
  m.embedding_dimension_ = 1;
  m.chart_count_ = 1;
  return m;
}

Manifold Manifold::Circle() {
  Manifold m;
  m.kind_ = ManifoldKind::kCircle;
  m.dimension_ = 1;
  m.embedding_dimension_ = 2;
  m.chart_count_ = 2;
  return m;
}

Manifold Manifold::Sphere2() {
  Manifold m;
  m.kind_ = ManifoldKind::kSphere2;
  m.dimension_ = 2;
  m.embedding_dimension_ = 3;
  m.chart_count_ = 2;
  return m;
}

Manifold Manifold::Product(std::vector<Manifold> factors) {
  if (factors.empty()) {
    throw Error(ErrorKind::kDimensionMismatch, "product manifold needs at least one factor");
  }
  Manifold m;
  m.kind_ = ManifoldKind::kProduct;
  m.dimension_ = 0;
  m.embedding_dimension_ = 0;
  m.chart_count_ = 1;
  for (const auto& f : factors) {
    m.dimension_ += f.dimension();
    m.embedding_dimension_ += f.embedding_dimension();
    m.chart_count_ *= f.chart_count();
  }
  m.factors_ = std::move(factors);
  return m;
}

std::string Manifold::describe() const {
  switch (kind_) {
    case ManifoldKind::kEuclidean: return "R^" + std::to_string(dimension_);
    case ManifoldKind::kPositiveReals: return "R+";
    case ManifoldKind::kCircle: return "S^1";
    case ManifoldKind::kSphere2: return "S^2";
    case ManifoldKind::kProduct: {
      std::string s;
      for (size_t i = 0; i < factors_.size(); ++i) {
        if (i) s += " x ";
        s += factors_[i].describe();
      }
      return s;
    }
  }
  return "?";
}

bool operator==(const Manifold& a, const Manifold& b) {
  return a.kind_ == b.kind_ && a.dimension_ == b.dimension_ &&
         a.embedding_dimension_ == b.embedding_dimension_ && a.factors_ == b.factors_;
}

std::string ChartScheme::describe() const {
  if (kind == Kind::kHemisphere) return "hemisphere";
  return chart == kSouthChart ? "fixed_south" : chart == kNorthChart ? "fixed_north"
                                                                      : "fixed_" + std::to_string(chart);
}

void validate(const Manifold& m, const ChartPoint& p) {
  check_chart(m, p.chart);
  if (p.coords.size() != m.dimension()) {
    throw dimension_error("chart coordinates", p.coords.size(), m.dimension());
  }
  if (!p.coords.allFinite()) {
    throw Error(ErrorKind::kOutOfDomain, "chart coordinates are not finite");
  }
  switch (m.kind()) {
    case ManifoldKind::kPositiveReals:
      if (!(p.coords(0) > 0.0)) {
        throw Error(ErrorKind::kOutOfDomain, "positive-reals coordinate must be > 0");
      }
      break;
    case ManifoldKind::kProduct: {
      const auto parts = split_point(m, p);
      for (size_t i = 0; i < parts.size(); ++i) validate(m.factors()[i], parts[i]);
      break;
    }
    default:
      break;
  }
}

void validate(const Manifold& m, const TangentState& s) {
  validate(m, s.point);
  if (s.velocity.size() != m.dimension()) {
    throw dimension_error("velocity", s.velocity.size(), m.dimension());
  }
}

EmbeddedPoint chart_to_embedding(const Manifold& m, const ChartPoint& p) {
  validate(m, p);
  switch (m.kind()) {
    case ManifoldKind::kEuclidean:
    case ManifoldKind::kPositiveReals:
      return {p.coords};
    case ManifoldKind::kCircle:
    case ManifoldKind::kSphere2:
      return {sphere_embed(p.chart, p.coords)};
    case ManifoldKind::kProduct: {
      const auto parts = split_point(m, p);
      Vector e(m.embedding_dimension());
      Eigen::Index off = 0;
      for (size_t i = 0; i < parts.size(); ++i) {
        const auto& f = m.factors()[i];
        e.segment(off, f.embedding_dimension()) = chart_to_embedding(f, parts[i]).coords;
        off += f.embedding_dimension();
      }
      return {e};
    }
  }
  return {};
}

Matrix embedding_jacobian(const Manifold& m, const ChartPoint& p) {
  switch (m.kind()) {
    case ManifoldKind::kEuclidean:
    case ManifoldKind::kPositiveReals:
      return Matrix::Identity(m.dimension(), m.dimension());
    case ManifoldKind::kCircle:
    case ManifoldKind::kSphere2:
      return sphere_jacobian(p.chart, p.coords);
    case ManifoldKind::kProduct: {
      const auto parts = split_point(m, p);
      std::vector<Matrix> blocks;
      for (size_t i = 0; i < parts.size(); ++i) {
        blocks.push_back(embedding_jacobian(m.factors()[i], parts[i]));
      }
      return block_diagonal(blocks);
    }
  }
  return {};
}

std::vector<Matrix> embedding_hessian(const Manifold& m, const ChartPoint& p) {
  switch (m.kind()) {
    case ManifoldKind::kEuclidean:
    case ManifoldKind::kPositiveReals:
      return std::vector<Matrix>(m.dimension(), Matrix::Zero(m.dimension(), m.dimension()));
    case ManifoldKind::kCircle:
    case ManifoldKind::kSphere2:
      return sphere_hessian(p.chart, p.coords);
    case ManifoldKind::kProduct: {
      const auto parts = split_point(m, p);
      const auto offs = factor_offsets(m);
      std::vector<Matrix> out;
      out.reserve(m.embedding_dimension());
      for (size_t i = 0; i < parts.size(); ++i) {
        for (const auto& h : embedding_hessian(m.factors()[i], parts[i])) {
          Matrix full = Matrix::Zero(m.dimension(), m.dimension());
          full.block(offs[i], offs[i], h.rows(), h.cols()) = h;
          out.push_back(std::move(full));
        }
      }
      return out;
    }
  }
  return {};
}

Matrix embedding_jacobian_dot(const Manifold& m, const ChartPoint& p, const Vector& v) {
  const auto h = embedding_hessian(m, p);
  Matrix out(h.size(), m.dimension());
  for (size_t i = 0; i < h.size(); ++i) out.row(i) = (h[i] * v).transpose();
  return out;
}

ChartPoint embedding_to_chart(const Manifold& m, const EmbeddedPoint& e,
                              std::optional<int> chart) {
  if (e.coords.size() != m.embedding_dimension()) {
    throw dimension_error("embedded point", e.coords.size(), m.embedding_dimension());
  }
  const int target = chart ? *chart : select_chart(m, e, ChartScheme::Hemisphere());
  check_chart(m, target);
  switch (m.kind()) {
    case ManifoldKind::kEuclidean:
      return {0, e.coords};
    case ManifoldKind::kPositiveReals:
      if (!(e.coords(0) > 0.0)) {
        throw Error(ErrorKind::kOutOfDomain, "positive-reals coordinate must be > 0");
      }
      return {0, e.coords};
    case ManifoldKind::kCircle:
    case ManifoldKind::kSphere2: {
      const double norm = e.coords.norm();
      if (std::abs(norm - 1.0) > kOnManifoldTolerance) {
        std::ostringstream os;
        os << "embedded point is off the unit sphere by " << std::abs(norm - 1.0);
        throw Error(ErrorKind::kOutOfDomain, os.str());
      }
      return {target, sphere_chart(target, e.coords / norm)};
    }
    case ManifoldKind::kProduct: {
      const auto charts = decode_chart(m, target);
      const auto eoffs = factor_embedding_offsets(m);
      std::vector<ChartPoint> parts;
      for (size_t i = 0; i < m.factors().size(); ++i) {
        const auto& f = m.factors()[i];
        parts.push_back(embedding_to_chart(
            f, {e.coords.segment(eoffs[i], f.embedding_dimension())}, charts[i]));
      }
      return join_points(m, parts);
    }
  }
  return {};
}

ChartPoint chart_transition(const Manifold& m, const ChartPoint& p, int target) {
  validate(m, p);
  check_chart(m, target);
  if (target == p.chart) return p;
  switch (m.kind()) {
    case ManifoldKind::kCircle:
    case ManifoldKind::kSphere2:
      return {target, inversion(p.coords)};
    case ManifoldKind::kProduct: {
      const auto parts = split_point(m, p);
      const auto charts = decode_chart(m, target);
      std::vector<ChartPoint> out;
      for (size_t i = 0; i < parts.size(); ++i) {
        out.push_back(chart_transition(m.factors()[i], parts[i], charts[i]));
      }
      return join_points(m, out);
    }
    default:
      return p;  // single-chart manifolds
  }
}

Matrix transition_jacobian(const Manifold& m, const ChartPoint& p, int target) {
  check_chart(m, target);
  if (target == p.chart) return Matrix::Identity(m.dimension(), m.dimension());
  switch (m.kind()) {
    case ManifoldKind::kCircle:
    case ManifoldKind::kSphere2:
      return inversion_jacobian(p.coords);
    case ManifoldKind::kProduct: {
      const auto parts = split_point(m, p);
      const auto charts = decode_chart(m, target);
      std::vector<Matrix> blocks;
      for (size_t i = 0; i < parts.size(); ++i) {
        blocks.push_back(transition_jacobian(m.factors()[i], parts[i], charts[i]));
      }
      return block_diagonal(blocks);
    }
    default:
      return Matrix::Identity(m.dimension(), m.dimension());
  }
}

TangentState transition_tangent(const Manifold& m, const TangentState& s, int target) {
  validate(m, s);
  if (target == s.point.chart) return s;
  return {chart_transition(m, s.point, target),
          transition_jacobian(m, s.point, target) * s.velocity};
}

int select_chart(const Manifold& m, const EmbeddedPoint& e, const ChartScheme& scheme) {
  if (scheme.kind == ChartScheme::Kind::kFixed) {
    check_chart(m, scheme.chart);
    return scheme.chart;
  }
  switch (m.kind()) {
    case ManifoldKind::kCircle:
    case ManifoldKind::kSphere2:
      return e.coords(e.coords.size() - 1) >= 0.0 ? kSouthChart : kNorthChart;
    case ManifoldKind::kProduct: {
      const auto eoffs = factor_embedding_offsets(m);
      std::vector<int> charts;
      for (size_t i = 0; i < m.factors().size(); ++i) {
        const auto& f = m.factors()[i];
        charts.push_back(
            select_chart(f, {e.coords.segment(eoffs[i], f.embedding_dimension())}, scheme));
      }
      return encode_chart(m, charts);
    }
    default:
      return 0;
  }
}

int encode_chart(const Manifold& m, std::span<const int> factor_charts) {
  if (!m.is_product()) {
    if (factor_charts.size() != 1) throw dimension_error("factor charts", factor_charts.size(), 1);
    return factor_charts[0];
  }
  if (factor_charts.size() != m.factors().size()) {
    throw dimension_error("factor charts", factor_charts.size(), m.factors().size());
  }
  int id = 0;
  int radix = 1;
  for (size_t i = 0; i < factor_charts.size(); ++i) {
    check_chart(m.factors()[i], factor_charts[i]);
    id += factor_charts[i] * radix;
    radix *= m.factors()[i].chart_count();
  }
  return id;
}

std::vector<int> decode_chart(const Manifold& m, int chart) {
  check_chart(m, chart);
  if (!m.is_product()) return {chart};
  std::vector<int> out;
  for (const auto& f : m.factors()) {
    out.push_back(chart % f.chart_count());
    chart /= f.chart_count();
  }
  return out;
}

std::vector<int> factor_offsets(const Manifold& m) {
  if (!m.is_product()) return {0};
  std::vector<int> offs;
  int off = 0;
  for (const auto& f : m.factors()) {
    offs.push_back(off);
    off += f.dimension();
  }
  return offs;
}

std::vector<int> factor_embedding_offsets(const Manifold& m) {
  if (!m.is_product()) return {0};
  std::vector<int> offs;
  int off = 0;
  for (const auto& f : m.factors()) {
    offs.push_back(off);
    off += f.embedding_dimension();
  }
  return offs;
}

ChartPoint join_points(const Manifold& m, std::span<const ChartPoint> parts) {
  if (!m.is_product()) {
    if (parts.size() != 1) throw dimension_error("factor points", parts.size(), 1);
    return parts[0];
  }
  if (parts.size() != m.factors().size()) {
    throw dimension_error("factor points", parts.size(), m.factors().size());
  }
  std::vector<int> charts;
  Vector coords(m.dimension());
  Eigen::Index off = 0;
  for (size_t i = 0; i < parts.size(); ++i) {
    const int d = m.factors()[i].dimension();
    if (parts[i].coords.size() != d) throw dimension_error("factor coordinates", parts[i].coords.size(), d);
    coords.segment(off, d) = parts[i].coords;
    charts.push_back(parts[i].chart);
    off += d;
  }
  return {encode_chart(m, charts), coords};
}

std::vector<ChartPoint> split_point(const Manifold& m, const ChartPoint& p) {
  if (!m.is_product()) return {p};
  if (p.coords.size() != m.dimension()) {
    throw dimension_error("chart coordinates", p.coords.size(), m.dimension());
  }
  const auto charts = decode_chart(m, p.chart);
  const auto vs = split_vector(m, p.coords);
  std::vector<ChartPoint> out;
  for (size_t i = 0; i < vs.size(); ++i) out.push_back({charts[i], vs[i]});
  return out;
}

Vector join_vectors(const Manifold& m, std::span<const Vector> parts) {
  if (!m.is_product()) {
    if (parts.size() != 1) throw dimension_error("factor vectors", parts.size(), 1);
    return parts[0];
  }
  if (parts.size() != m.factors().size()) {
    throw dimension_error("factor vectors", parts.size(), m.factors().size());
  }
  Vector out(m.dimension());
  Eigen::Index off = 0;
  for (size_t i = 0; i < parts.size(); ++i) {
    const int d = m.factors()[i].dimension();
    if (parts[i].size() != d) throw dimension_error("factor vector", parts[i].size(), d);
    out.segment(off, d) = parts[i];
    off += d;
  }
  return out;
}

std::vector<Vector> split_vector(const Manifold& m, const Vector& v) {
  if (v.size() != m.dimension()) throw dimension_error("vector", v.size(), m.dimension());
  if (!m.is_product()) return {v};
  std::vector<Vector> out;
  Eigen::Index off = 0;
  for (const auto& f : m.factors()) {
    out.push_back(v.segment(off, f.dimension()));
    off += f.dimension();
  }
  return out;
}

}  // namespace pbds
