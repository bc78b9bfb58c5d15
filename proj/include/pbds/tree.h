#pragma once

#include <optional>
#include <vector>

#include "pbds/policy.h"

namespace pbds {

// Quantities a node hands to its parent, sized by the node's input
// (parent-manifold) dimension m'.
struct TreeNodeData {
  Matrix P;                 // m' x m'
  Matrix A;                 // m' x m'
  Matrix B;                 // m' x m'
  Vector F;                 // m'
  std::vector<Matrix> xi;   // xi[q](s, r), m' slices of m' x m'
  int active = 0;           // leaves with nonzero weight below this node

  static TreeNodeData Zero(int dim);
};

// Leaf whose task map is the edge from its parent; p, v are parent coords.
TreeNodeData tree_leaf_init(const TaskSpec& task, const ChartPoint& p, const Vector& v);

// Children were evaluated at (f(p), Jf v); f is the edge into this node.
TreeNodeData tree_intermediate_combine(const std::vector<TreeNodeData>& children,
                                       const TaskMap& f, const ChartPoint& p, const Vector& v);

PolicyOutput tree_root_combine(const std::vector<TreeNodeData>& children, const Vector& v);

struct TreeNode {
  std::optional<TaskSpec> task;   // leaf
  std::optional<TaskMap> edge;    // intermediate
  std::vector<TreeNode> children;

  static TreeNode Leaf(TaskSpec task);
  static TreeNode Intermediate(TaskMap edge, std::vector<TreeNode> children);
};

struct TaskTree {
  Manifold robot;
  std::vector<TreeNode> children;
};

PolicyOutput evaluate_tree(const TaskTree& tree, const ChartPoint& p, const Vector& v);

// Leaves with their edge chains composed into single robot-level task maps.
std::vector<TaskSpec> flatten(const TaskTree& tree);

}  // namespace pbds
