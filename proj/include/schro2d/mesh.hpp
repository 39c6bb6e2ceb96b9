#ifndef SCHRO2D_MESH_HPP
#define SCHRO2D_MESH_HPP

#include <array>
#include <cmath>
#include <vector>

#include "schro2d/numerics.hpp"

namespace schro2d {

struct PlanConfig {
    double x_l = -16.0, x_r = 16.0;
    double y_b = -8.0, y_u = 8.0;
    Index subdomains = 2;
    double dx = 1.0 / 128.0, dy = 1.0 / 8.0;
    double T = 0.5, dt = 0.01;
};

/// Strip decomposition of (x_l,x_r)x(y_b,y_u) into N equal subdomains plus the
/// uniform space-time grid. Adjacent strips share the interface node line.
struct DecompositionPlan {
    double x_l, x_r, y_b, y_u;
    Index N;        // subdomain count
    double dx, dy;
    double T, dt;
    Index N_x, N_y; // nodes per subdomain in x and y
    Index N_T;      // time steps

    double strip_width() const { return (x_r - x_l) / static_cast<double>(N); }
    double a(Index j) const { return x_l + static_cast<double>(j - 1) * strip_width(); } // j in 1..N
    double b(Index j) const { return a(j) + strip_width(); }
    Index nodes() const { return N_x * N_y; }
    bool has_left_interface(Index j) const { return j > 1; }
    bool has_right_interface(Index j) const { return j < N; }
    /// Interface count in the flux vector sense: 2N-2 one-sided traces.
    Index trace_sides() const { return 2 * N - 2; }
};

namespace detail {
inline Index checked_count(double length, double step, const char* what) {
    const double q = length / step;
    const double r = std::round(q);
    if (r < 1.0 || std::abs(q - r) > 1e-9 * std::max(1.0, std::abs(q)))
        throw BadGeometry(std::string(what) + " does not tile the interval");
    return static_cast<Index>(r);
}
} // namespace detail

inline DecompositionPlan build_plan(const PlanConfig& c) {
    if (!(c.x_r > c.x_l) || !(c.y_u > c.y_b)) throw BadGeometry("domain bounds are not increasing");
    if (c.subdomains < 1) throw BadGeometry("subdomain count must be >= 1");
    if (c.dx <= 0 || c.dy <= 0 || c.dt <= 0 || c.T <= 0) throw BadGeometry("steps must be positive");
    const Index ex_total = detail::checked_count(c.x_r - c.x_l, c.dx, "dx");
    if (ex_total % c.subdomains != 0)
        throw BadGeometry("dx does not tile the subinterval: (x_r-x_l)/N must be a multiple of dx");
    const Index ey = detail::checked_count(c.y_u - c.y_b, c.dy, "dy");
    const Index nt = detail::checked_count(c.T, c.dt, "dt");
    DecompositionPlan p;
    p.x_l = c.x_l; p.x_r = c.x_r; p.y_b = c.y_b; p.y_u = c.y_u;
    p.N = c.subdomains;
    p.dx = c.dx; p.dy = c.dy;
    p.T = c.T; p.dt = c.dt;
    p.N_x = ex_total / c.subdomains + 1;
    p.N_y = ey + 1;
    p.N_T = nt;
    return p;
}

/// Q1 element mass matrix on a dx-by-dy cell, local nodes (x0y0, x1y0, x0y1, x1y1).
inline Eigen::Matrix4d element_mass(double dx, double dy) {
    Eigen::Matrix4d m;
    m << 4, 2, 2, 1,
         2, 4, 1, 2,
         2, 1, 4, 2,
         1, 2, 2, 4;
    return (dx * dy / 36.0) * m;
}

inline Eigen::Matrix4d element_stiffness(double dx, double dy) {
    Eigen::Matrix4d kx, ky;
    kx << 2, -2, 1, -1,
         -2, 2, -1, 1,
          1, -1, 2, -2,
         -1, 1, -2, 2;
    ky << 2, 1, -2, -1,
          1, 2, -1, -2,
         -2, -1, 2, 1,
         -1, -2, 1, 2;
    return (dy / dx / 6.0) * kx + (dx / dy / 6.0) * ky;
}

/// Element generalized mass for int W phi_i phi_j with W bilinear from nodal
/// values, integrated by 2x2 Gauss (exact for this integrand).
inline Eigen::Matrix4d element_generalized_mass(double dx, double dy, const std::array<double, 4>& w) {
    static const double g = 1.0 / std::sqrt(3.0);
    Eigen::Matrix4d ke = Eigen::Matrix4d::Zero();
    for (double xi : {-g, g}) {
        for (double eta : {-g, g}) {
            Eigen::Vector4d n;
            n << (1 - xi) * (1 - eta), (1 + xi) * (1 - eta), (1 - xi) * (1 + eta), (1 + xi) * (1 + eta);
            n *= 0.25;
            const double wq = n[0] * w[0] + n[1] * w[1] + n[2] * w[2] + n[3] * w[3];
            ke += wq * (n * n.transpose()) * (dx * dy / 4.0);
        }
    }
    return ke;
}

/// Boundary matrices and trace restriction for one vertical edge of a strip.
struct EdgeFem {
    SparseMatrix M_gamma; // volume-indexed boundary mass, support on edge nodes
    SparseMatrix S_gamma; // volume-indexed boundary stiffness (d/dy terms)
    SparseMatrix Q;       // N_y x n, 0/1 trace restriction
};

/// All Q1 finite element matrices for one strip subdomain.
struct SubdomainFem {
    Index j = 1;    // subdomain index, 1-based
    Index N_x = 0, N_y = 0;
    double dx = 0, dy = 0;
    double x0 = 0;  // x coordinate of the left node column
    double y0 = 0;
    bool left_is_interface = false;
    bool right_is_interface = false;

    SparseMatrix M; // mass
    SparseMatrix S; // stiffness
    EdgeFem left, right;

    Index nodes() const { return N_x * N_y; }
    Index node_id(Index ix, Index iy) const { return ix * N_y + iy; } // y-fastest
    double node_x(Index id) const { return x0 + static_cast<double>(id / N_y) * dx; }
    double node_y(Index id) const { return y0 + static_cast<double>(id % N_y) * dy; }

    /// Boundary mass over the interface segments Gamma_j only.
    SparseMatrix M_gamma() const {
        SparseMatrix g(nodes(), nodes());
        if (left_is_interface) g += left.M_gamma;
        if (right_is_interface) g += right.M_gamma;
        return g;
    }
    SparseMatrix S_gamma() const {
        SparseMatrix g(nodes(), nodes());
        if (left_is_interface) g += left.S_gamma;
        if (right_is_interface) g += right.S_gamma;
        return g;
    }
    const SparseMatrix& Q_l() const { return left.Q; }
    const SparseMatrix& Q_r() const { return right.Q; }
};

namespace detail {
inline EdgeFem assemble_edge(Index N_x, Index N_y, double dy, Index col) {
    const Index n = N_x * N_y;
    std::vector<Triplet> tm, ts, tq;
    for (Index iy = 0; iy + 1 < N_y; ++iy) {
        const Index a = col * N_y + iy, b = a + 1;
        tm.emplace_back(a, a, dy / 3.0);
        tm.emplace_back(a, b, dy / 6.0);
        tm.emplace_back(b, a, dy / 6.0);
        tm.emplace_back(b, b, dy / 3.0);
        ts.emplace_back(a, a, 1.0 / dy);
        ts.emplace_back(a, b, -1.0 / dy);
        ts.emplace_back(b, a, -1.0 / dy);
        ts.emplace_back(b, b, 1.0 / dy);
    }
    for (Index iy = 0; iy < N_y; ++iy) tq.emplace_back(iy, col * N_y + iy, 1.0);
    EdgeFem e;
    e.M_gamma = from_triplets(n, n, tm);
    e.S_gamma = from_triplets(n, n, ts);
    e.Q = from_triplets(N_y, n, tq);
    return e;
}
} // namespace detail

inline SubdomainFem assemble_fem(const DecompositionPlan& plan, Index j) {
    if (j < 1 || j > plan.N) throw BadGeometry("subdomain index out of range");
    SubdomainFem f;
    f.j = j;
    f.N_x = plan.N_x;
    f.N_y = plan.N_y;
    f.dx = plan.dx;
    f.dy = plan.dy;
    f.x0 = plan.a(j);
    f.y0 = plan.y_b;
    f.left_is_interface = plan.has_left_interface(j);
    f.right_is_interface = plan.has_right_interface(j);

    const Index n = f.nodes();
    const Eigen::Matrix4d me = element_mass(plan.dx, plan.dy);
    const Eigen::Matrix4d se = element_stiffness(plan.dx, plan.dy);
    std::vector<Triplet> tm, ts;
    tm.reserve(16 * (f.N_x - 1) * (f.N_y - 1));
    ts.reserve(16 * (f.N_x - 1) * (f.N_y - 1));
    for (Index ex = 0; ex + 1 < f.N_x; ++ex) {
        for (Index ey = 0; ey + 1 < f.N_y; ++ey) {
            const std::array<Index, 4> id = {f.node_id(ex, ey), f.node_id(ex + 1, ey),
                                             f.node_id(ex, ey + 1), f.node_id(ex + 1, ey + 1)};
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) {
                    tm.emplace_back(id[a], id[b], me(a, b));
                    ts.emplace_back(id[a], id[b], se(a, b));
                }
        }
    }
    f.M = from_triplets(n, n, tm);
    f.S = from_triplets(n, n, ts);
    f.left = detail::assemble_edge(f.N_x, f.N_y, plan.dy, 0);
    f.right = detail::assemble_edge(f.N_x, f.N_y, plan.dy, f.N_x - 1);
    return f;
}

/// Generalized mass matrices for the averaged potential W_n at one time step.
struct GeneralizedMass {
    Index n = 0; // time index
    SparseMatrix M_W;              // volume
    SparseMatrix M_gamma_W_left;   // boundary, left edge, volume-indexed
    SparseMatrix M_gamma_W_right;
};

/// Assembles int W v phi over the strip and int W v phi dGamma over both
/// vertical edges, with W bilinear from nodal values (y-fastest ordering).
inline GeneralizedMass assemble_generalized_mass(const SubdomainFem& f, const std::vector<double>& W_nodal,
                                                 Index time_index = 0) {
    const Index n = f.nodes();
    if (static_cast<Index>(W_nodal.size()) != n) throw DimensionMismatch("W_nodal size mismatch");
    GeneralizedMass g;
    g.n = time_index;
    std::vector<Triplet> tv;
    tv.reserve(16 * (f.N_x - 1) * (f.N_y - 1));
    for (Index ex = 0; ex + 1 < f.N_x; ++ex) {
        for (Index ey = 0; ey + 1 < f.N_y; ++ey) {
            const std::array<Index, 4> id = {f.node_id(ex, ey), f.node_id(ex + 1, ey),
                                             f.node_id(ex, ey + 1), f.node_id(ex + 1, ey + 1)};
            const std::array<double, 4> w = {W_nodal[id[0]], W_nodal[id[1]], W_nodal[id[2]], W_nodal[id[3]]};
            const Eigen::Matrix4d ke = element_generalized_mass(f.dx, f.dy, w);
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) tv.emplace_back(id[a], id[b], ke(a, b));
        }
    }
    g.M_W = from_triplets(n, n, tv);

    auto edge_gen = [&](Index col) {
        std::vector<Triplet> t;
        for (Index iy = 0; iy + 1 < f.N_y; ++iy) {
            const Index a = col * f.N_y + iy, b = a + 1;
            const double w0 = W_nodal[a], w1 = W_nodal[b];
            // exact integrals of W phi_i phi_j on a dy element with linear W
            const double m00 = f.dy * (3 * w0 + w1) / 12.0;
            const double m01 = f.dy * (w0 + w1) / 12.0;
            const double m11 = f.dy * (w0 + 3 * w1) / 12.0;
            t.emplace_back(a, a, m00);
            t.emplace_back(a, b, m01);
            t.emplace_back(b, a, m01);
            t.emplace_back(b, b, m11);
        }
        return from_triplets(n, n, t);
    };
    g.M_gamma_W_left = edge_gen(0);
    g.M_gamma_W_right = edge_gen(f.N_x - 1);
    return g;
}

} // namespace schro2d

#endif
