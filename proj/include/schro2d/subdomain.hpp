#ifndef SCHRO2D_SUBDOMAIN_HPP
#define SCHRO2D_SUBDOMAIN_HPP

#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "schro2d/potential.hpp"
#include "schro2d/transmission.hpp"

namespace schro2d {

/// Interface traces of one subdomain over a time window, time-major blocks of
/// N_y nodal values. l is absent for j=1, r for j=N.
struct TraceSeries {
    Index N_y = 0, N_T = 0;
    bool has_left = false, has_right = false;
    ComplexVector left, right; // each of length N_T*N_y when present

    static TraceSeries zero(Index N_y, Index N_T, bool has_left, bool has_right) {
        TraceSeries t;
        t.N_y = N_y;
        t.N_T = N_T;
        t.has_left = has_left;
        t.has_right = has_right;
        if (has_left) t.left = ComplexVector::Zero(N_T * N_y);
        if (has_right) t.right = ComplexVector::Zero(N_T * N_y);
        return t;
    }
    Eigen::Ref<const ComplexVector> left_at(Index n) const { return left.segment((n - 1) * N_y, N_y); }
    Eigen::Ref<const ComplexVector> right_at(Index n) const { return right.segment((n - 1) * N_y, N_y); }
    Eigen::Ref<ComplexVector> left_at(Index n) { return left.segment((n - 1) * N_y, N_y); }
    Eigen::Ref<ComplexVector> right_at(Index n) { return right.segment((n - 1) * N_y, N_y); }
};

/// Marching state of one strip: previous field, auxiliary traces, step index.
struct SubdomainState {
    ComplexVector u_prev;
    AuxiliaryState aux;
    Index n = 0;
};

namespace detail {

inline SparseMatrix robin_system(const SubdomainFem& fem, const SparseMatrix& M_W, double p, double dt,
                                 ActiveEdges op_edges) {
    SparseMatrix A = (Complex(0, 2.0 / dt) * fem.M.cast<Complex>() - fem.S.cast<Complex>() + M_W.cast<Complex>()).eval();
    if (op_edges.left) A += (Complex(0, 1) * p * fem.left.M_gamma.cast<Complex>()).eval();
    if (op_edges.right) A += (Complex(0, 1) * p * fem.right.M_gamma.cast<Complex>()).eval();
    return A;
}

inline ComplexVector flux_rhs(const SubdomainFem& fem, const ComplexVector& flux_l, const ComplexVector& flux_r) {
    ComplexVector r = ComplexVector::Zero(fem.nodes());
    if (flux_l.size()) {
        if (flux_l.size() != fem.N_y) throw DimensionMismatch("left flux length != N_y");
        r -= fem.left.M_gamma.cast<Complex>() * (fem.left.Q.cast<Complex>().transpose() * flux_l);
    }
    if (flux_r.size()) {
        if (flux_r.size() != fem.N_y) throw DimensionMismatch("right flux length != N_y");
        r -= fem.right.M_gamma.cast<Complex>() * (fem.right.Q.cast<Complex>().transpose() * flux_r);
    }
    return r;
}

} // namespace detail

/// One Crank-Nicolson step with the Robin condition: solves
/// (A_n + ip M_gamma) v_n = (2i/dt) M u_{n-1} - M_gamma Q^T (l_n; r_n),
/// then u_n = 2 v_n - u_{n-1}. Empty flux means a physical edge.
inline std::pair<ComplexVector, ComplexVector> cn_step_robin(const SubdomainFem& fem, const GeneralizedMass& gm,
                                                             double p, const ComplexVector& u_prev,
                                                             const ComplexVector& flux_l, const ComplexVector& flux_r,
                                                             double dt, ActiveEdges op_edges = {}) {
    const SparseMatrix A = detail::robin_system(fem, gm.M_W, p, dt, op_edges);
    Factorization lu(A);
    ComplexVector rhs = Complex(0, 2.0 / dt) * (fem.M.cast<Complex>() * u_prev) + detail::flux_rhs(fem, flux_l, flux_r);
    ComplexVector v = lu.solve(rhs);
    ComplexVector u = 2.0 * v - u_prev;
    return {std::move(v), std::move(u)};
}

/// One Crank-Nicolson step with the Pade condition via the augmented system.
/// Returns (v_n, u_n) and advances state.aux.
inline std::pair<ComplexVector, ComplexVector> cn_step_pade(const SubdomainFem& fem, const PadeCoefficients& coeffs,
                                                            const GeneralizedMass& gm, SubdomainState& state,
                                                            const ComplexVector& flux_l, const ComplexVector& flux_r,
                                                            double dt, ActiveEdges op_edges = {}) {
    PadeSystemLayout lay;
    const SparseMatrix A = assemble_pade_system(fem, coeffs, gm, dt, op_edges, &lay);
    Factorization lu(A);
    ComplexVector rhs = ComplexVector::Zero(lay.dim());
    rhs.head(fem.nodes()) =
        Complex(0, 2.0 / dt) * (fem.M.cast<Complex>() * state.u_prev) + detail::flux_rhs(fem, flux_l, flux_r);
    const Complex two_i_dt(0, 2.0 / dt);
    auto fill_phi_rhs = [&](bool right_edge) {
        const EdgeFem& e = right_edge ? fem.right : fem.left;
        const SparseMatrix m1d = (e.Q * e.M_gamma * e.Q.transpose()).eval();
        const ComplexMatrix& prev = right_edge ? state.aux.right_prev : state.aux.left_prev;
        for (Index s = 1; s <= coeffs.m; ++s)
            rhs.segment(lay.phi_offset(s, right_edge), fem.N_y) =
                two_i_dt * (m1d * ComplexVector(prev.row(s - 1).transpose()));
    };
    if (op_edges.left) fill_phi_rhs(false);
    if (op_edges.right) fill_phi_rhs(true);

    ComplexVector sol = lu.solve(rhs);
    ComplexVector v = sol.head(fem.nodes());
    for (Index s = 1; s <= coeffs.m; ++s) {
        if (op_edges.left) state.aux.left_half.row(s - 1) = sol.segment(lay.phi_offset(s, false), fem.N_y).transpose();
        if (op_edges.right) state.aux.right_half.row(s - 1) = sol.segment(lay.phi_offset(s, true), fem.N_y).transpose();
    }
    state.aux.advance();
    ComplexVector u = 2.0 * v - state.u_prev;
    return {std::move(v), std::move(u)};
}

/// Crank-Nicolson time stepping on one strip with cached factorizations.
/// Owns all per-subdomain matrices; one worker owns one solver.
class SubdomainSolver {
public:
    struct Options {
        /// Replace the outer boundary operator S_b by a homogeneous Neumann
        /// condition on physical edges (conservation tests).
        bool neumann_outer = false;
    };

    SubdomainSolver(const DecompositionPlan& plan, Index j, const TransmissionSpec& spec, const PotentialExpr& V,
                    Options opts = {})
        : plan_(plan), j_(j), spec_(spec), V_(V), opts_(opts) {
        spec_.validate();
        fem_ = assemble_fem(plan, j);
        if (spec_.is_pade()) coeffs_ = pade_coefficients(spec_.m, spec_.theta);
        op_edges_.left = fem_.left_is_interface || !opts.neumann_outer;
        op_edges_.right = fem_.right_is_interface || !opts.neumann_outer;
        time_independent_ = V_.time_independent();
    }

    const SubdomainFem& fem() const { return fem_; }
    const DecompositionPlan& plan() const { return plan_; }
    const TransmissionSpec& spec() const { return spec_; }
    const PadeCoefficients& coeffs() const { return coeffs_; }
    ActiveEdges op_edges() const { return op_edges_; }
    Index j() const { return j_; }

    /// Nodal initial datum u0 restricted to this strip.
    template <class F>
    ComplexVector sample_field(F&& f) const {
        ComplexVector u(fem_.nodes());
        for (Index id = 0; id < fem_.nodes(); ++id) u[id] = f(fem_.node_x(id), fem_.node_y(id));
        return u;
    }

    /// Builds (or reuses) the factorization for global time step n.
    const Factorization& factor_for_step(Index n) {
        const Index key = time_independent_ ? 1 : n;
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return *it->second;
        auto [it2, inserted] = cache_.emplace(key, build_factorization(key));
        return *it2->second;
    }

    struct WindowResult {
        ComplexVector u_final;
        TraceSeries outgoing;
        std::vector<ComplexVector> u_history; // filled when requested
        Index solves = 0;
    };

    /// Marches num_steps Crank-Nicolson steps starting at global step
    /// first_step, with incoming interface fluxes per step; emits outgoing
    /// fluxes from the trace update at every step. Auxiliary functions start
    /// at zero for the window.
    WindowResult solve_window(const ComplexVector& u0, const TraceSeries& incoming, Index first_step,
                              Index num_steps, bool keep_history = false) {
        if (u0.size() != fem_.nodes()) throw DimensionMismatch("initial datum size mismatch");
        if ((fem_.left_is_interface && (!incoming.has_left || incoming.N_T < num_steps)) ||
            (fem_.right_is_interface && (!incoming.has_right || incoming.N_T < num_steps)))
            throw DimensionMismatch("incoming traces do not cover the window");
        if ((fem_.left_is_interface || fem_.right_is_interface) && incoming.N_y != fem_.N_y)
            throw DimensionMismatch("incoming trace N_y mismatch");

        WindowResult res;
        res.outgoing = TraceSeries::zero(fem_.N_y, num_steps, fem_.left_is_interface, fem_.right_is_interface);
        SubdomainState st;
        st.u_prev = u0;
        if (spec_.is_pade()) st.aux = AuxiliaryState::zero(spec_.m, fem_.N_y, op_edges_);
        if (keep_history) res.u_history.reserve(num_steps);

        for (Index k = 1; k <= num_steps; ++k) {
            const Index n = first_step + k - 1;
            const Factorization& lu = factor_for_step(n);
            const ComplexVector fl = fem_.left_is_interface ? ComplexVector(incoming.left_at(k)) : ComplexVector();
            const ComplexVector fr = fem_.right_is_interface ? ComplexVector(incoming.right_at(k)) : ComplexVector();

            ComplexVector v;
            if (!spec_.is_pade()) {
                ComplexVector rhs = Complex(0, 2.0 / plan_.dt) * (fem_.M.cast<Complex>() * st.u_prev) +
                                    detail::flux_rhs(fem_, fl, fr);
                v = lu.solve(rhs);
            } else {
                ComplexVector rhs = ComplexVector::Zero(pade_layout_.dim());
                rhs.head(fem_.nodes()) = Complex(0, 2.0 / plan_.dt) * (fem_.M.cast<Complex>() * st.u_prev) +
                                         detail::flux_rhs(fem_, fl, fr);
                const Complex two_i_dt(0, 2.0 / plan_.dt);
                auto fill = [&](bool right_edge) {
                    const ComplexMatrix& prev = right_edge ? st.aux.right_prev : st.aux.left_prev;
                    const SparseMatrix& m1d = right_edge ? m1d_right_ : m1d_left_;
                    for (Index s = 1; s <= spec_.m; ++s)
                        rhs.segment(pade_layout_.phi_offset(s, right_edge), fem_.N_y) =
                            two_i_dt * (m1d * ComplexVector(prev.row(s - 1).transpose()));
                };
                if (op_edges_.left) fill(false);
                if (op_edges_.right) fill(true);
                ComplexVector sol = lu.solve(rhs);
                v = sol.head(fem_.nodes());
                for (Index s = 1; s <= spec_.m; ++s) {
                    if (op_edges_.left)
                        st.aux.left_half.row(s - 1) = sol.segment(pade_layout_.phi_offset(s, false), fem_.N_y).transpose();
                    if (op_edges_.right)
                        st.aux.right_half.row(s - 1) = sol.segment(pade_layout_.phi_offset(s, true), fem_.N_y).transpose();
                }
            }
            ++res.solves;

            // outgoing fluxes across interfaces (eq. of the Comm. step)
            if (fem_.left_is_interface) {
                const ComplexVector vt = fem_.left.Q.cast<Complex>() * v;
                const ComplexMatrix* phi = spec_.is_pade() ? &st.aux.left_half : nullptr;
                res.outgoing.left_at(k) = trace_update(spec_, spec_.is_pade() ? &coeffs_ : nullptr, vt, phi, fl);
            }
            if (fem_.right_is_interface) {
                const ComplexVector vt = fem_.right.Q.cast<Complex>() * v;
                const ComplexMatrix* phi = spec_.is_pade() ? &st.aux.right_half : nullptr;
                res.outgoing.right_at(k) = trace_update(spec_, spec_.is_pade() ? &coeffs_ : nullptr, vt, phi, fr);
            }

            if (spec_.is_pade()) st.aux.advance();
            st.u_prev = 2.0 * v - st.u_prev;
            st.n = n;
            if (keep_history) res.u_history.push_back(st.u_prev);
        }
        res.u_final = std::move(st.u_prev);
        return res;
    }

    /// Pre-builds all factorizations a window will need (lets concurrent
    /// probe solves share this solver read-only afterwards).
    void warm_up(Index first_step, Index num_steps) {
        if (time_independent_) {
            factor_for_step(1);
        } else {
            for (Index k = 0; k < num_steps; ++k) factor_for_step(first_step + k);
        }
    }

private:
    std::unique_ptr<Factorization> build_factorization(Index n) {
        const Index sample_step = std::max<Index>(1, std::min(n, plan_.N_T));
        AveragedPotential w = sample_W(V_, plan_, j_, sample_step);
        GeneralizedMass gm = assemble_generalized_mass(fem_, w.values, n);
        if (!spec_.is_pade()) {
            return std::make_unique<Factorization>(detail::robin_system(fem_, gm.M_W, spec_.p, plan_.dt, op_edges_));
        }
        SparseMatrix A = assemble_pade_system(fem_, coeffs_, gm, plan_.dt, op_edges_, &pade_layout_);
        if (m1d_left_.rows() == 0) {
            m1d_left_ = (fem_.left.Q * fem_.left.M_gamma * fem_.left.Q.transpose()).eval();
            m1d_right_ = (fem_.right.Q * fem_.right.M_gamma * fem_.right.Q.transpose()).eval();
        }
        return std::make_unique<Factorization>(A);
    }

    DecompositionPlan plan_;
    Index j_;
    TransmissionSpec spec_;
    PotentialExpr V_;
    Options opts_;
    SubdomainFem fem_;
    PadeCoefficients coeffs_;
    ActiveEdges op_edges_;
    bool time_independent_ = false;
    PadeSystemLayout pade_layout_;
    SparseMatrix m1d_left_, m1d_right_;

    std::mutex cache_mutex_;
    std::map<Index, std::unique_ptr<Factorization>> cache_;
};

} // namespace schro2d

#endif
