#ifndef SCHRO2D_NUMERICS_HPP
#define SCHRO2D_NUMERICS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "schro2d/errors.hpp"

namespace schro2d {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;
using SparseMatrix = Eigen::SparseMatrix<Complex>;
using Triplet = Eigen::Triplet<Complex>;
using Index = Eigen::Index;

/// Builds a sparse matrix from (row, col, value) entries; duplicates are summed.
inline SparseMatrix from_triplets(Index rows, Index cols, const std::vector<Triplet>& entries) {
    SparseMatrix A(rows, cols);
    A.setFromTriplets(entries.begin(), entries.end());
    A.makeCompressed();
    return A;
}

/// Abstract linear map x -> apply(x) on C^dim. apply must be pure and reentrant.
struct LinearOperator {
    Index dim = 0;
    std::function<ComplexVector(const ComplexVector&)> apply;

    ComplexVector operator()(const ComplexVector& x) const {
        if (x.size() != dim) throw DimensionMismatch("operator applied to vector of wrong size");
        return apply(x);
    }
};

inline LinearOperator make_operator(const SparseMatrix& A) {
    if (A.rows() != A.cols()) throw DimensionMismatch("operator matrix must be square");
    return LinearOperator{A.rows(), [A](const ComplexVector& x) -> ComplexVector { return A * x; }};
}

struct SolveReport {
    Index iterations = 0;
    std::vector<double> residual_history; // iterations + 1 entries, [0] is the initial residual
    bool converged = false;
};

struct LuOptions {
    /// A factorization is rejected as singular when the estimated smallest
    /// singular value drops below pivot_rel_threshold * max|A_ij|.
    double pivot_rel_threshold = 1e-14;
};

/// Direct solver for sparse complex systems, reusable across right-hand sides.
class Factorization {
public:
    explicit Factorization(const SparseMatrix& A, const LuOptions& opts = {}) : A_(A), dim_(A.rows()) {
        if (A.rows() != A.cols()) throw SingularMatrix("matrix is not square");
        if (dim_ == 0) throw SingularMatrix("matrix is empty");
        max_abs_ = 0.0;
        for (int k = 0; k < A_.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(A_, k); it; ++it)
                max_abs_ = std::max(max_abs_, std::abs(it.value()));
        if (max_abs_ == 0.0) throw SingularMatrix("matrix is identically zero");
        lu_.compute(A_);
        if (lu_.info() != Eigen::Success) throw SingularMatrix("sparse LU factorization failed");
        check_near_singular(opts.pivot_rel_threshold);
    }

    Index dim() const { return dim_; }

    ComplexVector solve(const ComplexVector& b) const {
        if (b.size() != dim_) throw DimensionMismatch("rhs size does not match factorization");
        ComplexVector x = lu_.solve(b);
#ifndef NDEBUG
        const double bn = b.norm();
        if (bn > 0.0 && (A_ * x - b).norm() / bn > 1e-10)
            throw SingularMatrix("direct solve residual exceeds 1e-10");
#endif
        return x;
    }

    const SparseMatrix& matrix() const { return A_; }

private:
    // The backend hides pivots, so near-singularity is detected from a short
    // inverse power iteration estimating 1/sigma_min.
    void check_near_singular(double rel_threshold) {
        ComplexVector w(dim_);
        for (Index i = 0; i < dim_; ++i) w[i] = Complex(1.0 + static_cast<double>(i % 3), static_cast<double>(i % 2));
        w /= w.norm();
        double inv_sigma = 0.0;
        for (int it = 0; it < 2; ++it) {
            ComplexVector y = lu_.solve(w);
            ComplexVector z = lu_.adjoint().solve(y);
            inv_sigma = std::sqrt(z.norm());
            if (!std::isfinite(inv_sigma)) throw SingularMatrix("factorization produced non-finite solve");
            if (z.norm() == 0.0) break;
            w = z / z.norm();
        }
        if (inv_sigma > 0.0 && 1.0 / inv_sigma < rel_threshold * max_abs_)
            throw SingularMatrix("matrix is numerically singular (pivot below threshold)");
    }

    SparseMatrix A_;
    Index dim_;
    double max_abs_ = 0.0;
    Eigen::SparseLU<SparseMatrix> lu_;
};

inline Factorization lu_factorize(const SparseMatrix& A, const LuOptions& opts = {}) {
    return Factorization(A, opts);
}

struct KrylovOptions {
    double tol = 1e-10;
    Index max_iter = 2000;
    Index restart = 200; // effectively unrestarted at desk scale
};

namespace detail {
inline double safe_div(double num, double den) { return num / std::max(den, 1e-300); }
}

/// Restarted GMRES with modified Gram-Schmidt and one reorthogonalization pass.
inline std::pair<ComplexVector, SolveReport> gmres(const LinearOperator& op, const ComplexVector& b,
                                                   const ComplexVector& x0, const KrylovOptions& opts = {}) {
    if (b.size() != op.dim || x0.size() != op.dim) throw DimensionMismatch("gmres: inconsistent dimensions");
    if (opts.tol <= 0.0) throw BadConfig("gmres: tol must be positive");
    SolveReport rep;
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        rep.residual_history = {0.0};
        rep.converged = true;
        return {ComplexVector::Zero(op.dim), rep};
    }
    ComplexVector x = x0;
    ComplexVector r = b - op(x);
    rep.residual_history.push_back(detail::safe_div(r.norm(), bnorm));
    if (rep.residual_history.back() <= opts.tol) {
        rep.converged = true;
        return {x, rep};
    }

    const Index m = std::max<Index>(1, opts.restart);
    std::vector<ComplexVector> V;
    ComplexMatrix H;
    std::vector<Complex> cs, sn;
    ComplexVector gamma;

    while (rep.iterations < opts.max_iter) {
        double beta = r.norm();
        V.assign(1, r / beta);
        H = ComplexMatrix::Zero(m + 1, m);
        cs.assign(m, Complex(0));
        sn.assign(m, Complex(0));
        gamma = ComplexVector::Zero(m + 1);
        gamma[0] = beta;

        Index k = 0;
        bool cycle_done = false;
        while (k < m && rep.iterations < opts.max_iter && !cycle_done) {
            ComplexVector w = op(V[k]);
            // MGS + one reorthogonalization pass
            for (int pass = 0; pass < 2; ++pass) {
                for (Index i = 0; i <= k; ++i) {
                    Complex h = V[i].dot(w);
                    H(i, k) += h;
                    w -= h * V[i];
                }
            }
            const double hkk = w.norm();
            H(k + 1, k) = hkk;
            const bool tiny = hkk <= 1e-14 * beta;
            if (!tiny) V.push_back(w / hkk);

            // Givens update of the Hessenberg least-squares problem
            for (Index i = 0; i < k; ++i) {
                Complex t = std::conj(cs[i]) * H(i, k) + std::conj(sn[i]) * H(i + 1, k);
                H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
                H(i, k) = t;
            }
            const double denom = std::sqrt(std::norm(H(k, k)) + std::norm(H(k + 1, k)));
            if (denom == 0.0) {
                if (detail::safe_div(std::abs(gamma[k]), bnorm) <= opts.tol) {
                    cycle_done = true;
                    break;
                }
                throw Breakdown("gmres: Arnoldi breakdown before convergence");
            }
            cs[k] = H(k, k) / denom;
            sn[k] = H(k + 1, k) / denom;
            H(k, k) = std::conj(cs[k]) * H(k, k) + std::conj(sn[k]) * H(k + 1, k);
            H(k + 1, k) = Complex(0);
            gamma[k + 1] = -sn[k] * gamma[k];
            gamma[k] = std::conj(cs[k]) * gamma[k];

            ++k;
            ++rep.iterations;
            rep.residual_history.push_back(detail::safe_div(std::abs(gamma[k]), bnorm));

            if (rep.residual_history.back() <= opts.tol) cycle_done = true;
            if (tiny && !cycle_done) {
                if (rep.residual_history.back() <= opts.tol)
                    cycle_done = true;
                else
                    throw Breakdown("gmres: Arnoldi produced a zero vector before convergence");
            }
        }

        // reconstruct iterate from the k Arnoldi steps of this cycle
        if (k > 0) {
            ComplexVector y(k);
            for (Index i = k - 1; i >= 0; --i) {
                Complex s = gamma[i];
                for (Index j = i + 1; j < k; ++j) s -= H(i, j) * y[j];
                y[i] = s / H(i, i);
            }
            for (Index i = 0; i < k; ++i) x += y[i] * V[i];
        }
        r = b - op(x);
        const double true_rel = detail::safe_div(r.norm(), bnorm);
        if (true_rel <= opts.tol) {
            rep.converged = true;
            return {x, rep};
        }
        if (rep.iterations >= opts.max_iter) break;
    }
    rep.converged = false;
    return {x, rep};
}

/// BiCGStab for complex nonsymmetric systems.
inline std::pair<ComplexVector, SolveReport> bicgstab(const LinearOperator& op, const ComplexVector& b,
                                                      const ComplexVector& x0, const KrylovOptions& opts = {}) {
    if (b.size() != op.dim || x0.size() != op.dim) throw DimensionMismatch("bicgstab: inconsistent dimensions");
    if (opts.tol <= 0.0) throw BadConfig("bicgstab: tol must be positive");
    SolveReport rep;
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        rep.residual_history = {0.0};
        rep.converged = true;
        return {ComplexVector::Zero(op.dim), rep};
    }
    ComplexVector x = x0;
    ComplexVector r = b - op(x);
    rep.residual_history.push_back(detail::safe_div(r.norm(), bnorm));
    if (rep.residual_history.back() <= opts.tol) {
        rep.converged = true;
        return {x, rep};
    }
    const ComplexVector r0 = r;
    Complex rho(1), alpha(1), omega(1);
    ComplexVector p = ComplexVector::Zero(op.dim), v = ComplexVector::Zero(op.dim);
    const double rho_floor = 1e-300;

    while (rep.iterations < opts.max_iter) {
        Complex rho_new = r0.dot(r);
        if (std::abs(rho_new) < rho_floor) throw Breakdown("bicgstab: rho breakdown");
        if (rep.iterations == 0) {
            p = r;
        } else {
            if (std::abs(omega) < rho_floor) throw Breakdown("bicgstab: omega breakdown");
            Complex beta = (rho_new / rho) * (alpha / omega);
            p = r + beta * (p - omega * v);
        }
        rho = rho_new;
        v = op(p);
        Complex r0v = r0.dot(v);
        if (std::abs(r0v) < rho_floor) throw Breakdown("bicgstab: stagnation breakdown");
        alpha = rho / r0v;
        ComplexVector s = r - alpha * v;
        ++rep.iterations;
        if (detail::safe_div(s.norm(), bnorm) <= opts.tol) {
            x += alpha * p;
            r = s;
            rep.residual_history.push_back(detail::safe_div((b - op(x)).norm(), bnorm));
            rep.converged = rep.residual_history.back() <= 10 * opts.tol;
            return {x, rep};
        }
        ComplexVector t = op(s);
        double tn2 = t.squaredNorm();
        if (tn2 == 0.0) throw Breakdown("bicgstab: t vanished");
        omega = t.dot(s) / tn2;
        x += alpha * p + omega * s;
        r = s - omega * t;
        rep.residual_history.push_back(detail::safe_div(r.norm(), bnorm));
        if (rep.residual_history.back() <= opts.tol) {
            const double true_rel = detail::safe_div((b - op(x)).norm(), bnorm);
            rep.residual_history.back() = true_rel;
            if (true_rel <= opts.tol) {
                rep.converged = true;
                return {x, rep};
            }
        }
    }
    rep.converged = false;
    return {x, rep};
}

struct FixedPointOptions {
    double tol = 1e-10;
    Index max_iter = 10000;
    /// When set, convergence is measured as |g_{k+1}-g_k| / residual_scale
    /// instead of the default |g_{k+1}-g_k| / |g_k|.
    std::optional<double> residual_scale;
};

/// Fixed-point iteration g <- op_R(g) + d. op_R must be the map whose fixed
/// point solves (I - op_R) g = d, i.e. the iteration matrix itself.
inline std::pair<ComplexVector, SolveReport> fixed_point(const LinearOperator& op_R, const ComplexVector& d,
                                                         const ComplexVector& g0, const FixedPointOptions& opts = {}) {
    if (d.size() != op_R.dim || g0.size() != op_R.dim) throw DimensionMismatch("fixed_point: inconsistent dimensions");
    if (opts.tol <= 0.0) throw BadConfig("fixed_point: tol must be positive");
    SolveReport rep;
    ComplexVector g = g0;
    const double scale0 = std::max({g0.norm(), d.norm(), 1.0});

    while (true) {
        ComplexVector step = op_R(g) + d - g; // g_next - g
        const double denom = opts.residual_scale ? std::max(*opts.residual_scale, 1e-300)
                                                 : std::max(g.norm(), 1e-300);
        rep.residual_history.push_back(step.norm() / denom);
        if (rep.residual_history.back() <= opts.tol) {
            rep.converged = true;
            return {g, rep};
        }
        if (rep.iterations >= opts.max_iter) {
            rep.converged = false;
            return {g, rep};
        }
        g += step;
        ++rep.iterations;
        if (g.norm() > 1e12 * scale0) throw Diverged("fixed_point: iterate norm exceeded 1e12 x initial norm");
    }
}

} // namespace schro2d

#endif
