#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "fraclane/core.hpp"
#include "fraclane/parallel.hpp"

namespace fraclane {

/// Numeric failures that should map to a nonzero exit rather than a crash.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
/// int_0^r0 t^(s-1) (1+t)^(-N/2) dt by adaptive Gauss-Kronrod after removing
/// the endpoint singularity; relative error <= tol.
double incomplete_kernel_integral(double s, int N, double r0, double tol = 1e-10);
/// Complete value (r0 = infinity): Beta(s, N/2 - s).
double complete_kernel_integral(double s, int N);
}  // namespace detail

/// Ball Green kernel of the s-fractional Laplacian with exterior zero
/// condition: k(N,s) |x-y|^(2s-N) * F(r0) with
/// r0 = (R^2-|x|^2)(R^2-|y|^2) / (R^2 |x-y|^2) and
/// k(N,s) = Gamma(N/2) / (4^s pi^(N/2) Gamma(s)^2).
double kernel_eval(const Point& x, const Point& y, const SystemParams& params,
                   double radius = 1.0);

/// Dense discrete Green operator: entries[i][j] ~ int_{cell j} G(x_i, y) dy.
/// Off-diagonal entries by midpoint quadrature, near-diagonal cells by
/// subdivided midpoints, the self cell by splitting off the |x-y|^(2s-N)
/// singularity and integrating it in closed form in the radial variable.
struct GreenMatrix {
    GridPtr grid;
    double s = 0.25;
    Eigen::MatrixXd entries;

    struct QuadratureMeta {
        int singular_subcells = 64;
        int near_subcells = 64;
        double assembly_error = 0.0;   // self-cell refinement estimate
        double symmetry_defect = 0.0;  // max |K_ij - K_ji| of the kernel matrix
    } meta;

    int size() const { return static_cast<int>(entries.rows()); }
};

GreenMatrix assemble_green(GridPtr grid, const SystemParams& params,
                           Execution exec = Execution::parallel);

/// Green application to a plain density (matrix-vector product).
GridFunction apply_green(const GreenMatrix& G, const GridFunction& density);

/// Green application to a measure: density part by matrix-vector product,
/// atoms by direct kernel columns; an atom colliding with a node falls back
/// to the mass-preserving cell mollification.
GridFunction apply_green(const GreenMatrix& G, const Measure& m,
                         const SystemParams& params);

/// Discrete Green application evaluated at arbitrary interior points with the
/// same quadrature rules as the assembly (self-refinement studies). dim = 1.
std::vector<double> green_apply_at_points(const Grid& grid, const SystemParams& params,
                                          const std::vector<double>& xs,
                                          const std::vector<double>& density);

/// Eigenpairs of the discrete operator: lambda_1 < lambda_2 <= ..., nodal
/// eigenvectors orthonormal in the weighted L^2 inner product, phi_1 > 0.
struct SpectralData {
    GridPtr grid;
    std::vector<double> eigenvalues;  // increasing
    Eigen::MatrixXd phi;              // n x count, column k = phi_k nodal values
    int count = 0;

    double lambda1() const { return eigenvalues.front(); }
    GridFunction eigenfunction(int k) const;
};

/// count defaults to min(n, 200) when count <= 0.
SpectralData spectral_decompose(const GreenMatrix& G, int count = 0);

/// L^2(grid, w) coefficients of f against the retained eigenbasis.
Eigen::VectorXd spectral_coeffs(const GridFunction& f, const SpectralData& spec);
GridFunction spectral_reconstruct(const Eigen::VectorXd& coeffs, const SpectralData& spec);

/// Relative Parseval defect (||f||^2_{L2} - sum c_k^2) / ||f||^2_{L2}.
double parseval_defect(const GridFunction& f, const SpectralData& spec);

/// Discrete energy norm ||f||_{X0} = (sum_k lambda_k c_k^2)^(1/2); warns
/// through the registered handler when the Parseval defect exceeds 1%.
double xnorm(const GridFunction& f, const SpectralData& spec);
double xinner(const GridFunction& f, const GridFunction& g, const SpectralData& spec);

double l2_inner(const GridFunction& f, const GridFunction& g);
double l2_norm(const GridFunction& f);

void set_warning_handler(std::function<void(const std::string&)> handler);
void warn(const std::string& message);

/// Binary persistence: header {dim, s, n, assembly_error} + row-major doubles,
/// with a JSON sidecar (<path>.json) carrying the grid metadata.
void green_save(const GreenMatrix& G, const std::string& path);
GreenMatrix green_load(const std::string& path);

}  // namespace fraclane
