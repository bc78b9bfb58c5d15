#include "pbds/tree.h"

#include <limits>

#include "pbds/error.h"

namespace pbds {

TreeNodeData TreeNodeData::Zero(int dim) {
  TreeNodeData d;
  d.P = Matrix::Zero(dim, dim);
  d.A = Matrix::Zero(dim, dim);
  d.B = Matrix::Zero(dim, dim);
  d.F = Vector::Zero(dim);
  d.xi.assign(dim, Matrix::Zero(dim, dim));
  return d;
}

TreeNodeData tree_leaf_init(const TaskSpec& task, const ChartPoint& p, const Vector& v) {
  const MapEvaluation e = evaluate(task.map, p, v);
  const int m = static_cast<int>(e.J.cols());
  const Matrix w = task.weight(e.y, e.y_dot);
  TreeNodeData d = TreeNodeData::Zero(m);
  if (weight_is_zero(w)) return d;
  d.active = 1;
  const Matrix jtw = e.J.transpose() * w;
  d.P = jtw * e.J;
  d.B = d.P;
  d.A = jtw * e.J_dot;
  const Vector forcing = task.dissipative_force(e.y, e.y_dot) - task.potential_gradient(e.y);
  d.F = jtw * solve_metric(task.metric.value(e.y), forcing);
  const Christoffel gamma = christoffel(task.metric, e.y);
  // xi^q_sr = (J^T w)_{q eta} (J^T Gamma^eta J)_{sr}
  const int n = gamma.dimension();
  std::vector<Matrix> pulled(n);
  for (int eta = 0; eta < n; ++eta) pulled[eta] = e.J.transpose() * gamma.slice(eta) * e.J;
  for (int q = 0; q < m; ++q) {
    for (int eta = 0; eta < n; ++eta) {
      if (jtw(q, eta) != 0.0) d.xi[q] += jtw(q, eta) * pulled[eta];
    }
  }
  return d;
}

namespace {

TreeNodeData sum(const std::vector<TreeNodeData>& children) {
  if (children.empty()) throw Error(ErrorKind::kDimensionMismatch, "tree node has no children");
  TreeNodeData s = TreeNodeData::Zero(static_cast<int>(children.front().F.size()));
  for (const auto& c : children) {
    if (c.F.size() != s.F.size()) {
      throw Error(ErrorKind::kDimensionMismatch, "tree children disagree on dimension");
    }
    s.P += c.P;
    s.A += c.A;
    s.B += c.B;
    s.F += c.F;
    for (size_t q = 0; q < s.xi.size(); ++q) s.xi[q] += c.xi[q];
    s.active += c.active;
  }
  return s;
}

}  // namespace

TreeNodeData tree_intermediate_combine(const std::vector<TreeNodeData>& children,
                                       const TaskMap& f, const ChartPoint& p, const Vector& v) {
  const TreeNodeData s = sum(children);
  const Matrix j = jacobian(f, p);
  if (j.rows() != s.F.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "edge codomain differs from child dimension");
  }
  const Matrix j_dot = jacobian_dot(f, p, v);
  const int m = static_cast<int>(j.cols());
  const int n = static_cast<int>(j.rows());
  TreeNodeData d = TreeNodeData::Zero(m);
  d.active = s.active;
  d.P = j.transpose() * s.P * j;
  d.B = j.transpose() * s.B * j;
  d.A = j.transpose() * (s.A * j + s.B * j_dot);
  d.F = j.transpose() * s.F;
  // xi^k_hl = J_qk J_sh xi^q_sr J_rl
  std::vector<Matrix> inner(n);
  for (int q = 0; q < n; ++q) inner[q] = j.transpose() * s.xi[q] * j;
  for (int k = 0; k < m; ++k) {
    for (int q = 0; q < n; ++q) {
      if (j(q, k) != 0.0) d.xi[k] += j(q, k) * inner[q];
    }
  }
  return d;
}

PolicyOutput tree_root_combine(const std::vector<TreeNodeData>& children, const Vector& v) {
  const TreeNodeData s = sum(children);
  const int m = static_cast<int>(s.F.size());
  PolicyOutput out;
  out.active_tasks = s.active;
  if (s.active == 0) {
    out.acceleration = Vector::Zero(m);
    out.all_weights_zero = true;
    out.condition_number = std::numeric_limits<double>::infinity();
    return out;
  }
  // xi_kl = xi^k_hl v^h
  Matrix xi(m, m);
  for (int k = 0; k < m; ++k) xi.row(k) = v.transpose() * s.xi[k];
  out.acceleration = pseudo_inverse(s.P) * (s.F - (s.A + xi) * v);
  out.condition_number = condition_number(s.P);
  if (!out.acceleration.allFinite()) {
    throw Error(ErrorKind::kNonFinite, "tree policy acceleration is not finite");
  }
  return out;
}

TreeNode TreeNode::Leaf(TaskSpec task) {
  TreeNode n;
  n.task = std::move(task);
  return n;
}

TreeNode TreeNode::Intermediate(TaskMap edge, std::vector<TreeNode> children) {
  TreeNode n;
  n.edge = std::move(edge);
  n.children = std::move(children);
  return n;
}

namespace {

TreeNodeData node_data(const TreeNode& node, const ChartPoint& p, const Vector& v) {
  if (node.task) return tree_leaf_init(*node.task, p, v);
  if (!node.edge) throw Error(ErrorKind::kSchema, "tree node is neither leaf nor intermediate");
  const ChartPoint y = node.edge->value(p);
  const Vector y_dot = jacobian(*node.edge, p) * v;
  std::vector<TreeNodeData> children;
  children.reserve(node.children.size());
  for (const auto& c : node.children) children.push_back(node_data(c, y, y_dot));
  return tree_intermediate_combine(children, *node.edge, p, v);
}

void flatten_into(const TreeNode& node, const std::optional<TaskMap>& prefix,
                  std::vector<TaskSpec>& out) {
  if (node.task) {
    TaskSpec t = *node.task;
    if (prefix) t.map = compose(*prefix, t.map);
    out.push_back(std::move(t));
    return;
  }
  const TaskMap chain = prefix ? compose(*prefix, *node.edge) : *node.edge;
  for (const auto& c : node.children) flatten_into(c, chain, out);
}

}  // namespace

PolicyOutput evaluate_tree(const TaskTree& tree, const ChartPoint& p, const Vector& v) {
  std::vector<TreeNodeData> children;
  children.reserve(tree.children.size());
  for (const auto& c : tree.children) children.push_back(node_data(c, p, v));
  return tree_root_combine(children, v);
}

std::vector<TaskSpec> flatten(const TaskTree& tree) {
  std::vector<TaskSpec> out;
  for (const auto& c : tree.children) flatten_into(c, std::nullopt, out);
  return out;
}

}  // namespace pbds
