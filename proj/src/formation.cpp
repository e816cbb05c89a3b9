#include "react/formation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace react::formation {

namespace {

void require_finite(std::span<const Position2D> positions) {
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!is_finite(positions[i])) {
      throw InvalidArgument("non-finite position at index " + std::to_string(i));
    }
  }
}

// D^-1/2 L D^-1/2 in place; rows/columns of isolated vertices stay zero.
void normalize_in_place(Eigen::MatrixXd& laplacian, const Eigen::MatrixXd& degree) {
  const Eigen::Index n = laplacian.rows();
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = degree(i, i);
    inv_sqrt(i) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (inv_sqrt(i) == 0.0) continue;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (inv_sqrt(j) == 0.0) continue;
      laplacian(i, j) *= inv_sqrt(i) * inv_sqrt(j);
    }
  }
}

}  // namespace

double edge_weight(const Position2D& p_u, const Position2D& p_v, const WeightParams& params) {
  const double dx = params.a * (p_u.x() - p_v.x());
  const double dy = p_u.y() - p_v.y();
  return dx * dx + dy * dy;
}

FormationMatrices build_matrices(std::span<const Position2D> positions, const WeightParams& params) {
  if (positions.empty()) throw InvalidArgument("build_matrices: at least one position required");
  require_finite(positions);
  const auto n = static_cast<Eigen::Index>(positions.size());
  FormationMatrices m;
  m.adjacency = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double w = edge_weight(positions[i], positions[j], params);
      m.adjacency(i, j) = w;
      m.adjacency(j, i) = w;
    }
  }
  m.degree = m.adjacency.rowwise().sum().asDiagonal();
  m.laplacian = m.degree - m.adjacency;
  if (params.normalize) normalize_in_place(m.laplacian, m.degree);
  return m;
}

double formation_error(const FormationMatrices& current, const FormationMatrices& desired) {
  if (current.laplacian.rows() != desired.laplacian.rows() ||
      current.laplacian.cols() != desired.laplacian.cols()) {
    throw InvalidArgument("formation_error: dimension mismatch (" +
                          std::to_string(current.laplacian.rows()) + " vs " +
                          std::to_string(desired.laplacian.rows()) + ")");
  }
  return (current.laplacian - desired.laplacian).squaredNorm();
}

FormationErrorEval formation_error_with_gradient(std::span<const Position2D> positions,
                                                  const FormationMatrices& desired,
                                                  const WeightParams& params) {
  const auto n = static_cast<Eigen::Index>(positions.size());
  if (desired.laplacian.rows() != n) {
    throw InvalidArgument("formation_error_with_gradient: dimension mismatch");
  }
  WeightParams raw = params;
  raw.normalize = false;
  const FormationMatrices current = build_matrices(positions, raw);
  const Eigen::MatrixXd diff = current.laplacian - desired.laplacian;

  FormationErrorEval out;
  out.value = diff.squaredNorm();
  out.gradient.assign(positions.size(), Vec2::Zero());
  const Eigen::Vector2d w2(params.a * params.a, 1.0);
  // w_kj enters L at (k,j), (j,k) with sign -1 and at (k,k), (j,j) with +1.
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index j = k + 1; j < n; ++j) {
      const double df_dw = 2.0 * (diff(k, k) + diff(j, j) - diff(k, j) - diff(j, k));
      const Vec2 dw_dpk = 2.0 * w2.cwiseProduct(positions[k] - positions[j]);
      out.gradient[k] += df_dw * dw_dpk;
      out.gradient[j] -= df_dw * dw_dpk;
    }
  }
  return out;
}

double normalized_formation_error(std::span<const Position2D> positions,
                                  std::span<const Position2D> desired_positions,
                                  const WeightParams& params) {
  WeightParams norm = params;
  norm.normalize = true;
  return formation_error(build_matrices(positions, norm), build_matrices(desired_positions, norm));
}

void FormationSpec::refresh() {
  desired_laplacian = build_matrices(relative_positions, weights);
}

int admissible_columns(int n_robots, double navigable_width, const StructureParams& params) {
  if (params.lane_width <= 0.0) throw InvalidArgument("lane_width must be positive");
  const double raw = std::floor(navigable_width / params.lane_width);
  if (!(raw >= 1.0)) return 0;
  return static_cast<int>(std::min<double>(raw, std::max(n_robots, 1)));
}

FormationSpec structure_with_columns(int n_robots, int columns, const StructureParams& params,
                                     const WeightParams& weights) {
  if (n_robots < 1) throw InvalidArgument("structure needs at least one robot");
  if (columns < 1) throw InfeasibleStructure("no feasible structure: zero columns");
  columns = std::min(columns, n_robots);

  FormationSpec spec;
  spec.column_count = columns;
  spec.column_spacing = params.column_spacing;
  spec.row_spacing = params.row_spacing;
  spec.weights = weights;
  spec.relative_positions.reserve(static_cast<std::size_t>(n_robots));
  const double half_span = 0.5 * static_cast<double>(columns - 1);
  for (int k = 0; k < n_robots; ++k) {
    const int column = k % columns;
    const int row = k / columns;
    double x = -row * params.row_spacing;
    if (column % 2 == 1) x -= 0.5 * params.row_spacing;
    // Column 0 is the leftmost (largest y).
    const double y = (half_span - column) * params.column_spacing;
    spec.relative_positions.emplace_back(x, y);
  }
  spec.refresh();
  return spec;
}

FormationSpec generate_structure(int n_robots, double navigable_width, const StructureParams& params,
                                 const WeightParams& weights) {
  if (n_robots < 1) throw InvalidArgument("structure needs at least one robot");
  const int columns = admissible_columns(n_robots, navigable_width, params);
  if (columns < 1) {
    throw InfeasibleStructure("no feasible structure: navigable width " +
                              std::to_string(navigable_width) + " m is below one lane");
  }
  return structure_with_columns(n_robots, columns, params, weights);
}

}  // namespace react::formation
