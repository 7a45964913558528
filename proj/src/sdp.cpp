#include "ncts/sdp.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "ncts/log.hpp"

namespace ncts {

const char* to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::feasible:
        return "feasible";
    case SolveStatus::infeasible_certificate:
        return "infeasible_certificate";
    case SolveStatus::max_iter:
        return "max_iter";
    case SolveStatus::numerical_failure:
        return "numerical_failure";
    }
    return "?";
}

const ConstraintResidual& SdpSolution::residual(const std::string& name) const {
    for (const auto& r : residuals) {
        if (r.name == name) {
            return r;
        }
    }
    throw std::out_of_range("no residual for constraint '" + name + "'");
}

nlohmann::json SdpSolution::to_json() const {
    nlohmann::json res = nlohmann::json::array();
    for (const auto& r : residuals) {
        res.push_back({{"name", r.name},
                       {"sense", ncts::to_string(r.sense)},
                       {"min_eig", r.min_eig},
                       {"max_eig", r.max_eig},
                       {"margin", r.margin},
                       {"satisfied", r.satisfied}});
    }
    return {{"status", ncts::to_string(status)},
            {"t", t},
            {"delta", delta},
            {"newton_iterations", newton_iterations},
            {"outer_iterations", outer_iterations},
            {"residuals", res}};
}

std::vector<ConstraintResidual> residuals(const LmiSystem& sys, const Vec& x) {
    std::vector<ConstraintResidual> out;
    for (const auto& c : sys.constraints) {
        ConstraintResidual r;
        r.name = c.name;
        r.sense = c.sense;
        const Vec ev = eigenvalues_sym(c.evaluate(x));
        r.min_eig = ev.minCoeff();
        r.max_eig = ev.maxCoeff();
        switch (c.sense) {
        case Sense::negative_definite:
            r.strict_margin = c.strict_margin();
            r.margin = -r.max_eig;
            r.satisfied = r.margin >= 0.5 * r.strict_margin;
            break;
        case Sense::positive_semidefinite:
            r.margin = r.min_eig;
            r.satisfied = r.margin >= -1e-9;
            break;
        case Sense::zero:
            r.margin = -std::max(std::abs(r.min_eig), std::abs(r.max_eig));
            r.satisfied = r.margin >= -1e-9;
            break;
        }
        out.push_back(r);
    }
    return out;
}

std::vector<ConstraintResidual> residuals(const LmiSystem& sys, const std::map<std::string, Mat>& assignment) {
    return residuals(sys, sys.registry.pack(assignment));
}

namespace {

// One barrier term -log det(S), S = s0 * (C0 + sum x_k C_k) + t I.
struct Term {
    const LmiConstraint* c;
    double sign; // -1 for "< 0" (S = tI - C), +1 for ">= 0" (S = C + tI)
    std::vector<int> vars;
    std::vector<std::vector<Eigen::Index>> support; // nonzero rows of each coefficient
    std::vector<Mat> compressed;                    // coefficient restricted to its support
};

Term make_term(const LmiConstraint& c) {
    Term t;
    t.c = &c;
    t.sign = c.sense == Sense::negative_definite ? -1.0 : 1.0;
    for (const auto& [k, coef] : c.coefficients) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < coef.rows(); ++i) {
            if (!coef.row(i).isZero(0.0)) {
                rows.push_back(i);
            }
        }
        Mat sub(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
        for (std::size_t a = 0; a < rows.size(); ++a) {
            for (std::size_t b = 0; b < rows.size(); ++b) {
                sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = coef(rows[a], rows[b]);
            }
        }
        t.vars.push_back(k);
        t.support.push_back(std::move(rows));
        t.compressed.push_back(t.sign * sub);
    }
    return t;
}

struct Problem {
    const LmiSystem* sys;
    std::vector<Term> terms;
    int nx;
    double box;

    Mat slack(const Term& term, const Vec& x, double t) const {
        Mat s = term.sign * term.c->evaluate(x);
        s.diagonal().array() += t;
        return s;
    }

    // Barrier value; +inf outside the domain.
    double barrier(const Vec& x, double t) const {
        double phi = 0.0;
        for (const auto& term : terms) {
            Eigen::LLT<Mat> llt(slack(term, x, t));
            if (llt.info() != Eigen::Success) {
                return std::numeric_limits<double>::infinity();
            }
            const Mat& l = llt.matrixLLT();
            for (Eigen::Index i = 0; i < l.rows(); ++i) {
                if (!(l(i, i) > 0.0)) {
                    return std::numeric_limits<double>::infinity();
                }
                phi -= 2.0 * std::log(l(i, i));
            }
        }
        for (int k = 0; k < nx; ++k) {
            const double lo = box + x(k);
            const double hi = box - x(k);
            if (!(lo > 0.0 && hi > 0.0)) {
                return std::numeric_limits<double>::infinity();
            }
            phi -= std::log(lo) + std::log(hi);
        }
        if (!(t + box > 0.0)) {
            return std::numeric_limits<double>::infinity();
        }
        phi -= std::log(t + box);
        return phi;
    }

    // Gradient and Hessian of the barrier over z = (x, t).
    bool derivatives(const Vec& x, double t, Vec& g, Mat& h) const {
        const int nz = nx + 1;
        g = Vec::Zero(nz);
        h = Mat::Zero(nz, nz);
        for (const auto& term : terms) {
            Eigen::LLT<Mat> llt(slack(term, x, t));
            if (llt.info() != Eigen::Success) {
                return false;
            }
            const Eigen::Index n = term.c->size();
            const Mat linv = llt.matrixL().solve(Mat::Identity(n, n));
            const auto nv = static_cast<Eigen::Index>(term.vars.size());
            // columns: vec(L^-1 dS L^-T) per variable, then t (dS = I)
            Mat k(n * n, nv + 1);
            for (Eigen::Index a = 0; a < nv; ++a) {
                const auto& rows = term.support[static_cast<std::size_t>(a)];
                Mat lsub(n, static_cast<Eigen::Index>(rows.size()));
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    lsub.col(static_cast<Eigen::Index>(r)) = linv.col(rows[r]);
                }
                const Mat at = lsub * term.compressed[static_cast<std::size_t>(a)] * lsub.transpose();
                k.col(a) = Eigen::Map<const Vec>(at.data(), n * n);
            }
            const Mat at = linv * linv.transpose();
            k.col(nv) = Eigen::Map<const Vec>(at.data(), n * n);
            const Mat hk = k.transpose() * k;
            for (Eigen::Index a = 0; a <= nv; ++a) {
                const int ia = a < nv ? term.vars[static_cast<std::size_t>(a)] : nx;
                double tr = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    tr += k(i * n + i, a);
                }
                g(ia) -= tr;
                for (Eigen::Index b = 0; b <= nv; ++b) {
                    const int ib = b < nv ? term.vars[static_cast<std::size_t>(b)] : nx;
                    h(ia, ib) += hk(a, b);
                }
            }
        }
        for (int k = 0; k < nx; ++k) {
            const double lo = box + x(k);
            const double hi = box - x(k);
            g(k) += -1.0 / lo + 1.0 / hi;
            h(k, k) += 1.0 / (lo * lo) + 1.0 / (hi * hi);
        }
        g(nx) += -1.0 / (t + box);
        h(nx, nx) += 1.0 / ((t + box) * (t + box));
        return true;
    }
};

} // namespace

SdpSolution solve(const LmiSystem& sys, const SolveOptions& opts) {
    const auto start = std::chrono::steady_clock::now();
    SdpSolution sol;
    for (const auto& c : sys.constraints) {
        if (c.sense == Sense::zero) {
            throw std::invalid_argument("solve: equality constraint '" + c.name + "' must be eliminated first");
        }
    }
    Problem p;
    p.sys = &sys;
    p.nx = sys.registry.scalar_count();
    p.box = opts.box_bound;
    for (const auto& c : sys.constraints) {
        p.terms.push_back(make_term(c));
    }
    sol.delta = sys.strict_margin();

    Vec x = Vec::Zero(p.nx);
    double t = 0.0;
    for (const auto& term : p.terms) {
        const Vec ev = eigenvalues_sym(term.sign * term.c->evaluate(x));
        t = std::max(t, -ev.minCoeff());
    }
    t += 1.0;
    double nu = 2.0 * p.nx + 1.0;
    for (const auto& c : sys.constraints) {
        nu += static_cast<double>(c.size());
    }

    auto finish = [&](SolveStatus status) {
        sol.status = status;
        sol.x = x;
        sol.t = t;
        sol.assignment = sys.registry.assignment(x);
        sol.residuals = residuals(sys, x);
        sol.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log_info("sdp: status=" + std::string(to_string(status)) + " t=" + std::to_string(t) +
                 " newton=" + std::to_string(sol.newton_iterations) + " time=" + std::to_string(sol.wall_time) + "s");
        return sol;
    };
    auto verdict_or = [&](SolveStatus fallback) {
        return t < -0.5 * sol.delta ? SolveStatus::feasible : fallback;
    };
    if (sys.constraints.empty()) {
        t = -1.0;
        return finish(SolveStatus::feasible);
    }

    double mu = opts.mu_start;
    const int nz = p.nx + 1;
    for (int outer = 0; outer < opts.max_outer; ++outer) {
        sol.outer_iterations = outer + 1;
        for (int inner = 0; inner < opts.max_inner; ++inner) {
            Vec g;
            Mat h;
            if (!p.derivatives(x, t, g, h)) {
                return finish(verdict_or(SolveStatus::numerical_failure));
            }
            // objective t/mu + barrier
            g(p.nx) += 1.0 / mu;
            Vec dz = Vec::Zero(nz);
            {
                Eigen::LLT<Mat> llt(h);
                if (llt.info() == Eigen::Success) {
                    dz = -llt.solve(g);
                } else {
                    dz = -h.ldlt().solve(g);
                }
            }
            if (dz(p.nx) > 0.0) {
                // keep t non-increasing: center x with t held fixed
                const Mat hx = h.topLeftCorner(p.nx, p.nx);
                Eigen::LLT<Mat> llt(hx);
                dz.setZero();
                if (p.nx > 0) {
                    dz.head(p.nx) = llt.info() == Eigen::Success ? Vec(-llt.solve(g.head(p.nx)))
                                                                 : Vec(-hx.ldlt().solve(g.head(p.nx)));
                }
            }
            if (!dz.allFinite()) {
                return finish(verdict_or(SolveStatus::numerical_failure));
            }
            const double decrement = -g.dot(dz);
            if (decrement <= 2.0 * opts.newton_tol) {
                break;
            }
            const double f0 = t / mu + p.barrier(x, t);
            double step = 1.0;
            bool accepted = false;
            while (step > 1e-14) {
                const Vec xn = x + step * dz.head(p.nx);
                const double tn = t + step * dz(p.nx);
                const double f1 = tn / mu + p.barrier(xn, tn);
                if (std::isfinite(f1) && f1 <= f0 - 0.25 * step * decrement) {
                    x = xn;
                    t = tn;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) {
                break;
            }
            ++sol.newton_iterations;
            sol.t_history.push_back(t);
        }
        if (mu * nu < opts.gap_tol * (1.0 + std::abs(t))) {
            return finish(t < -0.5 * sol.delta ? SolveStatus::feasible : SolveStatus::infeasible_certificate);
        }
        mu *= opts.mu_factor;
    }
    return finish(verdict_or(SolveStatus::max_iter));
}

} // namespace ncts
