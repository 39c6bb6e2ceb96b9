#ifndef SCHRO2D_TRANSMISSION_HPP
#define SCHRO2D_TRANSMISSION_HPP

#include <cmath>
#include <numbers>
#include <vector>

#include "schro2d/mesh.hpp"

namespace schro2d {

enum class TransmissionKind { Robin, Pade };

struct TransmissionSpec {
    TransmissionKind kind = TransmissionKind::Robin;
    double p = 15.0;                   // Robin impedance, any sign
    Index m = 5;                       // Pade order
    double theta = std::numbers::pi / 4;

    void validate() const {
        if (kind == TransmissionKind::Pade && m < 1)
            throw BadConfig("Pade transmission requires m >= 1");
    }
    bool is_pade() const { return kind == TransmissionKind::Pade; }
};

/// Coefficients of the rotated-branch Pade approximation of sqrt:
/// sqrt(z) ~ sum_{s=0}^m a_s - sum_{s=1}^m a_s d_s / (z + d_s), with a_0 = 0.
struct PadeCoefficients {
    Index m = 0;
    double theta = 0.0;
    std::vector<Complex> a; // a[0] == 0, a[1..m]
    std::vector<Complex> d; // d[0] unused, d[1..m]
    Complex c_a;            // i * sum_s a_s

    Complex a_sum() const { return c_a / Complex(0, 1); }
};

inline PadeCoefficients pade_coefficients(Index m, double theta = std::numbers::pi / 4) {
    if (m < 1) throw BadConfig("pade_coefficients: m >= 1 required");
    PadeCoefficients c;
    c.m = m;
    c.theta = theta;
    c.a.assign(m + 1, Complex(0));
    c.d.assign(m + 1, Complex(0));
    const Complex half_rot = std::exp(Complex(0, theta / 2));
    const Complex full_rot = std::exp(Complex(0, theta));
    for (Index s = 1; s <= m; ++s) {
        const double arg = (2.0 * static_cast<double>(s) - 1.0) * std::numbers::pi / (4.0 * static_cast<double>(m));
        const double cs = std::cos(arg), ts = std::tan(arg);
        c.a[s] = half_rot / (static_cast<double>(m) * cs * cs);
        c.d[s] = full_rot * ts * ts;
    }
    Complex sum(0);
    for (Index s = 0; s <= m; ++s) sum += c.a[s];
    c.c_a = Complex(0, 1) * sum;
    return c;
}

/// R_m(z), the rational approximation of sqrt(z) realized by the coefficients.
inline Complex pade_sqrt(const PadeCoefficients& c, Complex z) {
    Complex r(0);
    for (Index s = 0; s <= c.m; ++s) r += c.a[s];
    for (Index s = 1; s <= c.m; ++s) r -= c.a[s] * c.d[s] / (z + c.d[s]);
    return r;
}

/// ip * M_gamma over the interface segments, the boundary term added to A_n
/// in the Robin system.
inline SparseMatrix robin_boundary_block(const SubdomainFem& fem, double p) {
    return (Complex(0, 1) * p * fem.M_gamma().cast<Complex>()).eval();
}

/// Which vertical edges of a strip carry the transmission/boundary operator.
struct ActiveEdges {
    bool left = true;
    bool right = true;
    Index count() const { return (left ? 1 : 0) + (right ? 1 : 0); }
};

/// Trace history of the Pade auxiliary functions phi_s on the operator-carrying
/// edges of one subdomain. phi_s^0 = 0; after each step phi_s^n = 2 phi_s^{n-1/2} - phi_s^{n-1}.
struct AuxiliaryState {
    Index m = 0, N_y = 0;
    ActiveEdges edges;
    ComplexMatrix left_prev, right_prev; // phi_s^{n-1}, one row per s
    ComplexMatrix left_half, right_half; // phi_s^{n-1/2}

    static AuxiliaryState zero(Index m, Index N_y, ActiveEdges e) {
        AuxiliaryState st;
        st.m = m;
        st.N_y = N_y;
        st.edges = e;
        st.left_prev = ComplexMatrix::Zero(m, N_y);
        st.right_prev = ComplexMatrix::Zero(m, N_y);
        st.left_half = ComplexMatrix::Zero(m, N_y);
        st.right_half = ComplexMatrix::Zero(m, N_y);
        return st;
    }

    void advance() {
        left_prev = 2.0 * left_half - left_prev;
        right_prev = 2.0 * right_half - right_prev;
    }
};

/// Layout of the augmented Pade linear system over (v, phi_1, ..., phi_m),
/// each phi_s stacked over the active edges (left first).
struct PadeSystemLayout {
    Index n_vol = 0;
    Index N_y = 0;
    Index m = 0;
    ActiveEdges edges;

    Index trace_dim() const { return edges.count() * N_y; }
    Index dim() const { return n_vol + m * trace_dim(); }
    Index phi_offset(Index s, bool right_edge) const { // s in 1..m
        Index off = n_vol + (s - 1) * trace_dim();
        if (right_edge && edges.left) off += N_y;
        return off;
    }
};

namespace detail {
/// 1D trace-space matrix W = Q X Q^T for a volume-indexed edge matrix X.
inline SparseMatrix edge_trace_matrix(const SparseMatrix& Q, const SparseMatrix& X) {
    return (Q * X * Q.transpose()).eval();
}
} // namespace detail

/// Assembles the augmented matrix of the semi-discrete Pade step: top-left
/// A_n + i(sum a_s) M_gamma, couplings B_s = -i a_s d_s M_gamma Q^T,
/// C = -Q M_gamma and diagonal blocks D_s^n over the active edges.
inline SparseMatrix assemble_pade_system(const SubdomainFem& fem, const PadeCoefficients& coeffs,
                                         const GeneralizedMass& gm, double dt, ActiveEdges edges,
                                         PadeSystemLayout* layout_out = nullptr) {
    if (coeffs.m < 1) throw BadConfig("assemble_pade_system: m >= 1 required");
    PadeSystemLayout lay;
    lay.n_vol = fem.nodes();
    lay.N_y = fem.N_y;
    lay.m = coeffs.m;
    lay.edges = edges;
    if (layout_out) *layout_out = lay;

    const Complex two_i_dt = Complex(0, 2.0 / dt);
    const Complex a_sum = coeffs.a_sum();

    SparseMatrix M_gamma_act(lay.n_vol, lay.n_vol);
    if (edges.left) M_gamma_act += fem.left.M_gamma;
    if (edges.right) M_gamma_act += fem.right.M_gamma;

    // top-left block A_n + i (sum a_s) M_gamma
    SparseMatrix top = (two_i_dt * fem.M.cast<Complex>() - fem.S.cast<Complex>() + gm.M_W.cast<Complex>() +
                        Complex(0, 1) * a_sum * M_gamma_act.cast<Complex>())
                           .eval();

    std::vector<Triplet> t;
    t.reserve(top.nonZeros() + 6 * lay.m * lay.trace_dim() * 3);
    for (int k = 0; k < top.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(top, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());

    auto add_edge_blocks = [&](bool right_edge) {
        const EdgeFem& e = right_edge ? fem.right : fem.left;
        const SparseMatrix& MgW = right_edge ? gm.M_gamma_W_right : gm.M_gamma_W_left;
        const SparseMatrix MQt = (e.M_gamma * e.Q.transpose()).eval(); // n x N_y
        const SparseMatrix m1d = detail::edge_trace_matrix(e.Q, e.M_gamma);
        const SparseMatrix s1d = detail::edge_trace_matrix(e.Q, e.S_gamma);
        const SparseMatrix mw1d = detail::edge_trace_matrix(e.Q, MgW);
        for (Index s = 1; s <= lay.m; ++s) {
            const Index off = lay.phi_offset(s, right_edge);
            const Complex bs = -Complex(0, 1) * coeffs.a[s] * coeffs.d[s];
            for (int k = 0; k < MQt.outerSize(); ++k)
                for (SparseMatrix::InnerIterator it(MQt, k); it; ++it) {
                    t.emplace_back(it.row(), off + it.col(), bs * it.value());   // B_s block
                    t.emplace_back(off + it.col(), it.row(), -it.value());      // C block (-Q M_gamma)
                }
            SparseMatrix Ds = (two_i_dt * m1d - s1d + mw1d + coeffs.d[s] * m1d).eval();
            for (int k = 0; k < Ds.outerSize(); ++k)
                for (SparseMatrix::InnerIterator it(Ds, k); it; ++it)
                    t.emplace_back(off + it.row(), off + it.col(), it.value());
        }
    };
    if (edges.left) add_edge_blocks(false);
    if (edges.right) add_edge_blocks(true);
    return from_triplets(lay.dim(), lay.dim(), t);
}

/// The action of S-tilde on a trace: Robin -ip v; Pade -i(sum a_s) v + i sum a_s d_s phi_s^{n-1/2}.
inline ComplexVector transmission_trace(const TransmissionSpec& spec, const PadeCoefficients* coeffs,
                                        const ComplexVector& v_trace, const ComplexMatrix* phi_half) {
    if (spec.kind == TransmissionKind::Robin) return (-Complex(0, 1) * spec.p * v_trace).eval();
    if (!coeffs || !phi_half) throw BadConfig("Pade trace requires coefficients and auxiliary traces");
    if (phi_half->rows() != coeffs->m || phi_half->cols() != v_trace.size())
        throw DimensionMismatch("auxiliary trace shape mismatch");
    ComplexVector out = -Complex(0, 1) * coeffs->a_sum() * v_trace;
    for (Index s = 1; s <= coeffs->m; ++s)
        out += Complex(0, 1) * coeffs->a[s] * coeffs->d[s] * phi_half->row(s - 1).transpose();
    return out;
}

/// Flux handed to the neighbour: outgoing = -incoming + 2 S-tilde v|edge.
inline ComplexVector trace_update(const TransmissionSpec& spec, const PadeCoefficients* coeffs,
                                  const ComplexVector& v_trace, const ComplexMatrix* phi_half,
                                  const ComplexVector& incoming_flux) {
    if (incoming_flux.size() != v_trace.size()) throw DimensionMismatch("flux/trace length mismatch");
    return (-incoming_flux + 2.0 * transmission_trace(spec, coeffs, v_trace, phi_half)).eval();
}

/// The time-lower-triangular family L_s^{n,p} with phi_s^{n-1/2} = sum_p L_s^{n,p} v_p,
/// built from the auxiliary recursion. Desk-scale sizes only (dense trace x volume
/// matrices); used to cross-check the augmented solves by Schur elimination.
struct LRecursion {
    Index m = 0, N_T = 0;
    // L[s-1][n-1][p-1], each trace_dim x n_vol; empty matrix means zero block
    std::vector<std::vector<std::vector<ComplexMatrix>>> L;
};

inline LRecursion build_L_recursion(const SubdomainFem& fem, const PadeCoefficients& coeffs,
                                    double dt, const std::vector<GeneralizedMass>& gm_per_step,
                                    bool time_independent_W, Index N_T, ActiveEdges edges) {
    if (gm_per_step.empty()) throw BadConfig("build_L_recursion: need generalized mass data");
    const Index tdim = edges.count() * fem.N_y;
    const Complex two_i_dt = Complex(0, 2.0 / dt);

    // stacked trace-space operators
    auto stack_edges = [&](auto&& per_edge) {
        ComplexMatrix out = ComplexMatrix::Zero(tdim, tdim);
        Index off = 0;
        if (edges.left) {
            out.block(off, off, fem.N_y, fem.N_y) = per_edge(false);
            off += fem.N_y;
        }
        if (edges.right) out.block(off, off, fem.N_y, fem.N_y) = per_edge(true);
        return out;
    };
    ComplexMatrix QMg = ComplexMatrix::Zero(tdim, fem.nodes()); // Q M_gamma (volume -> trace)
    {
        Index off = 0;
        if (edges.left) {
            QMg.middleRows(off, fem.N_y) = ComplexMatrix(SparseMatrix((fem.left.Q * fem.left.M_gamma).eval()));
            off += fem.N_y;
        }
        if (edges.right) QMg.middleRows(off, fem.N_y) = ComplexMatrix(SparseMatrix((fem.right.Q * fem.right.M_gamma).eval()));
    }
    ComplexMatrix m1d = stack_edges([&](bool r) {
        const EdgeFem& e = r ? fem.right : fem.left;
        return ComplexMatrix(SparseMatrix(detail::edge_trace_matrix(e.Q, e.M_gamma)));
    });

    LRecursion rec;
    rec.m = coeffs.m;
    rec.N_T = N_T;
    rec.L.assign(coeffs.m, std::vector<std::vector<ComplexMatrix>>(N_T, std::vector<ComplexMatrix>(N_T)));

    for (Index s = 1; s <= coeffs.m; ++s) {
        std::vector<Eigen::PartialPivLU<ComplexMatrix>> Dlu;
        Dlu.reserve(N_T);
        const Index factor_count = time_independent_W ? 1 : N_T;
        for (Index n = 1; n <= factor_count; ++n) {
            const GeneralizedMass& gm = gm_per_step[std::min<std::size_t>(n - 1, gm_per_step.size() - 1)];
            ComplexMatrix s1d = stack_edges([&](bool r) {
                const EdgeFem& e = r ? fem.right : fem.left;
                return ComplexMatrix(SparseMatrix(detail::edge_trace_matrix(e.Q, e.S_gamma)));
            });
            ComplexMatrix mw1d = stack_edges([&](bool r) {
                const EdgeFem& e = r ? fem.right : fem.left;
                return ComplexMatrix(
                    SparseMatrix(detail::edge_trace_matrix(e.Q, r ? gm.M_gamma_W_right : gm.M_gamma_W_left)));
            });
            ComplexMatrix Ds = two_i_dt * m1d - s1d + mw1d + coeffs.d[s] * m1d;
            Dlu.emplace_back(Ds);
        }
        // G[p-1] = coefficient of v_p in phi_s^{n-1} at the start of step n;
        // updated in place via G^{n,p} = 2 L^{n,p} - G^{n-1,p}
        std::vector<ComplexMatrix> G(N_T);
        for (Index n = 1; n <= N_T; ++n) {
            const auto& lu = Dlu[time_independent_W ? 0 : (n - 1)];
            rec.L[s - 1][n - 1][n - 1] = lu.solve(QMg);
            for (Index p = 1; p < n; ++p) {
                if (G[p - 1].size() == 0) continue;
                rec.L[s - 1][n - 1][p - 1] = lu.solve((two_i_dt * m1d * G[p - 1]).eval());
            }
            for (Index p = 1; p <= n; ++p) {
                const ComplexMatrix& l = rec.L[s - 1][n - 1][p - 1];
                if (G[p - 1].size() == 0) {
                    if (l.size()) G[p - 1] = 2.0 * l;
                } else {
                    G[p - 1] = (l.size() ? (2.0 * l - G[p - 1]).eval() : (-G[p - 1]).eval());
                }
            }
        }
    }
    return rec;
}

} // namespace schro2d

#endif
