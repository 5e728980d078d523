#pragma once

#include "fracdiff/duhamel.hpp"
#include "fracdiff/spectral_core.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fracdiff {

struct ObservationTrace {
    std::size_t x0 = 0;       ///< interior node index
    Series values;            ///< u(x0, t_j), values[0] = 0
    double noise_level = 0.0; ///< relative, informational
};

enum class Regularization { None, SecondDifference };
enum class InverseSolver { Triangular, NormalEquations };

struct InverseConfig {
    Regularization regularization = Regularization::None;
    double gamma_reg = 0.0;
    InverseSolver solver = InverseSolver::Triangular;
};

/// Linear map from the cell values w_i of the Duhamel density
/// mu(s) = s^{alpha-1} w_i on (t_i, t_{i+1}) to the trace (u(x0, t_j))_{j=1..M}:
///   matrix(j-1, i) = int_{t_i}^{t_{i+1}} s^{alpha-1} v(x0, t_j - s) ds,
/// with v(x0, .) the homogeneous trace for initial data g, linear between nodes.
/// The matrix is lower triangular with positive diagonal.
struct ForwardMap {
    Eigen::MatrixXd matrix;
    Series v_trace;
    TimeMesh mesh;
    double alpha;
    std::size_t x0;
    double g_scale = 1.0;  ///< max |g|

    /// Trace (with the leading zero at t_0) produced by cell values w.
    Series apply(const Eigen::VectorXd& w) const;
};

/// Throws DegenerateDataError when g vanishes identically, has no positive value,
/// or v(x0, .) is not positive after t_0; MeshError on a nonuniform mesh.
ForwardMap forward_map(const EigenSystem& es, const Eigen::VectorXd& g, std::size_t x0, const TimeMesh& mesh,
                       double alpha);

/// Cell values w_i = int_cell mu / int_cell s^{alpha-1} of a Duhamel kernel.
Eigen::VectorXd cell_values(const DuhamelKernel& mu);

/// rho(t_j) = (g_{1-alpha} * mu)(t_j) for mu = s^{alpha-1} w, evaluated exactly
/// with regularized incomplete Beta functions.
Series rho_from_cells(const Eigen::VectorXd& w, const TimeMesh& mesh, double alpha);

struct InverseDiagnostics {
    double residual_norm = 0.0;      ///< ||F w - d|| / ||d|| (absolute when d = 0)
    double seminorm = 0.0;           ///< ||D2 w||
    double condition_estimate = 0.0; ///< 1-norm condition of the solved system
    double min_diagonal = 0.0;
    double gamma_reg = 0.0;
    std::string solver;
    std::string regularization;

    nlohmann::ordered_json to_json() const;
};

struct InverseResult {
    Series rho;
    Eigen::VectorXd cells;
    InverseDiagnostics diagnostics;
};

/// Causal deconvolution of the trace followed by rho = g_{1-alpha} * mu.
/// The unregularized triangular solve throws IllPosedError when v(x0, .) near
/// t = 0, read off the diagonal, is negligible against max |g|.
InverseResult reconstruct_rho(const ObservationTrace& trace, const ForwardMap& fm, const InverseConfig& cfg);

/// Convenience overload that builds the forward map.
InverseResult reconstruct_rho(const ObservationTrace& trace, const EigenSystem& es, const Eigen::VectorXd& g,
                              const InverseConfig& cfg, const TimeMesh& mesh, double alpha);

struct SweepPoint {
    double gamma_reg;
    double residual_norm;
    double seminorm;
    std::optional<double> error;  ///< relative L2 error against rho_true when supplied
};

struct SweepResult {
    std::vector<SweepPoint> points;
    std::size_t best = 0;  ///< minimal error when rho_true is given, else the L-curve corner
    InverseResult best_result;
};

/// Second-difference regularized reconstructions over a gamma grid (in parallel).
SweepResult sweep_regularization(const ObservationTrace& trace, const ForwardMap& fm,
                                 const std::vector<double>& gammas, const std::optional<Series>& rho_true);

/// Log grid gamma_k = scale * 10^{e}, e from lo to hi in `count` steps, where
/// scale = ||F||_F^2 / M.
std::vector<double> gamma_grid(const ForwardMap& fm, double lo_exp, double hi_exp, int count);

/// Relative L2 error on the mesh (trapezoid rule).
double relative_l2(const Series& approx, const Series& exact, const TimeMesh& mesh);

/// Discrete L1 norm on the mesh (trapezoid rule).
double l1_norm(const Series& s, const TimeMesh& mesh);

ObservationTrace read_trace_csv(const std::string& path, std::size_t x0, TimeMesh* mesh_out = nullptr);
void write_reconstruction_csv(const std::string& path, const TimeMesh& mesh, const InverseResult& r,
                              const ObservationTrace& trace, const ForwardMap& fm,
                              const std::optional<Series>& rho_true);

}  // namespace fracdiff
