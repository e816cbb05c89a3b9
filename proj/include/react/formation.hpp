#pragma once

#include "react/common.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace react::formation {

/// Edge-weight shaping. The weight matrix is W = diag(a, 1).
struct WeightParams {
  double a = 1.0;
  /// Use D^-1/2 L D^-1/2 instead of the raw Laplacian.
  bool normalize = false;
};

/// Adjacency, degree and Laplacian of the complete formation graph.
struct FormationMatrices {
  Eigen::MatrixXd adjacency;
  Eigen::MatrixXd degree;
  Eigen::MatrixXd laplacian;

  Eigen::Index size() const { return laplacian.rows(); }
};

/// Parameters of the interlaced column structure.
struct StructureParams {
  /// Lateral width reserved per column; decides how many columns fit.
  double lane_width = 0.6;
  double column_spacing = 0.6;
  double row_spacing = 0.6;
};

/// Desired team geometry, relative to a front-centre anchor.
struct FormationSpec {
  std::vector<Position2D> relative_positions;
  FormationMatrices desired_laplacian;
  int column_count = 1;
  double column_spacing = 0.0;
  double row_spacing = 0.0;
  WeightParams weights;

  /// Rebuilds desired_laplacian from relative_positions.
  void refresh();
  std::size_t size() const { return relative_positions.size(); }
};

class InfeasibleStructure : public Error {
 public:
  using Error::Error;
};

/// ||W (p_u - p_v)||^2.
double edge_weight(const Position2D& p_u, const Position2D& p_v, const WeightParams& params);

FormationMatrices build_matrices(std::span<const Position2D> positions, const WeightParams& params);

/// Squared Frobenius distance between two Laplacians.
double formation_error(const FormationMatrices& current, const FormationMatrices& desired);

/// Value and per-robot position gradient of the unnormalised formation error
/// between the Laplacian of `positions` and `desired`.
struct FormationErrorEval {
  double value = 0.0;
  std::vector<Vec2> gradient;
};

FormationErrorEval formation_error_with_gradient(std::span<const Position2D> positions,
                                                  const FormationMatrices& desired,
                                                  const WeightParams& params);

/// Formation error with both sides symmetrically normalised; used as the
/// scale-free evaluation metric.
double normalized_formation_error(std::span<const Position2D> positions,
                                  std::span<const Position2D> desired_positions,
                                  const WeightParams& params);

/// Number of columns a corridor of the given width admits, clamped to
/// [1, n_robots]. Returns 0 when not even one column fits.
int admissible_columns(int n_robots, double navigable_width, const StructureParams& params);

/// Interlaced formation: robot k sits in column k mod C, row k div C;
/// odd columns are staggered half a row backwards.
FormationSpec generate_structure(int n_robots, double navigable_width, const StructureParams& params,
                                 const WeightParams& weights = {});

/// Same as generate_structure with an explicit column count.
FormationSpec structure_with_columns(int n_robots, int columns, const StructureParams& params,
                                     const WeightParams& weights = {});

}  // namespace react::formation
