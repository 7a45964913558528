#include "ncts/analysis.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace ncts {

using nlohmann::json;

// ---------------------------------------------------------------- dissipativity

json DissipativityReport::to_json(bool with_samples) const {
    json j = {{"terminal", terminal},
              {"min_J", min_J},
              {"gamma", gamma},
              {"tolerance", tolerance},
              {"nonnegative", ok()},
              {"violation_count", violations.size()},
              {"first_violation", violations.empty() ? json(nullptr) : json(violations.front())},
              {"zero_initial_state", zero_initial_state}};
    if (!zero_initial_state) {
        j["warning"] = "trace does not start from the zero state; the index is only meaningful from rest";
    }
    if (with_samples) {
        j["t"] = t;
        j["J"] = J;
    }
    return j;
}

DissipativityReport dissipativity_index(const SimTrace& tr, const DissipativityTriple& tp, double tolerance) {
    if (tr.y1.size() != tr.t.size() || tr.w.size() != tr.t.size()) {
        throw std::invalid_argument("dissipativity_index: trace must carry y1 and w on every row");
    }
    DissipativityReport rep;
    rep.gamma = tp.gamma;
    rep.tolerance = tolerance;
    if (tr.t.empty()) {
        return rep;
    }
    auto supply = [&](std::size_t i) {
        const Vec& y = tr.y1[i];
        const Vec& w = tr.w[i];
        if (y.size() != tp.Q.rows() || w.size() != tp.R.rows() || tp.S.rows() != y.size() || tp.S.cols() != w.size()) {
            throw DimensionError("dissipativity_index: triple does not match y1/w dimensions");
        }
        return y.dot(tp.Q * y) + 2.0 * y.dot(tp.S * w) + w.dot(tp.R * w) - tp.gamma * w.squaredNorm();
    };
    rep.t = tr.t;
    rep.J.assign(tr.t.size(), 0.0);
    double prev = supply(0);
    for (std::size_t i = 1; i < tr.t.size(); ++i) {
        const double cur = supply(i);
        rep.J[i] = rep.J[i - 1] + 0.5 * (tr.t[i] - tr.t[i - 1]) * (prev + cur);
        prev = cur;
    }
    rep.terminal = rep.J.back();
    rep.min_J = *std::min_element(rep.J.begin(), rep.J.end());
    for (std::size_t i = 0; i < rep.J.size(); ++i) {
        if (rep.J[i] < -tolerance) {
            rep.violations.push_back(rep.t[i]);
        }
    }
    const bool x1_zero = tr.x1.empty() || tr.x1[0].size() == 0 || tr.x1[0].cwiseAbs().maxCoeff() <= 1e-12;
    const bool x2_zero = tr.x2.empty() || tr.x2[0].size() == 0 || tr.x2[0].cwiseAbs().maxCoeff() <= 1e-12;
    rep.zero_initial_state = x1_zero && x2_zero;
    return rep;
}

// ---------------------------------------------------------------- LKF

LkfWeights lkf_weights(const CascadeModel& md, const GainCertificate& cert) {
    auto get = [&](const char* name) -> const Mat& {
        auto it = cert.decision.find(name);
        if (it == cert.decision.end()) {
            throw std::invalid_argument(std::string("lkf_weights: certificate lacks decision value '") + name + "'");
        }
        return it->second;
    };
    const Mat X1inv = get("X1").inverse();
    const Mat X2inv = get("X2").inverse();
    auto back1 = [&](const char* name) { return Mat(sym_part(X1inv.transpose() * get(name) * X1inv)); };
    auto back2 = [&](const char* name) { return Mat(sym_part(X2inv.transpose() * get(name) * X2inv)); };
    LkfWeights w;
    w.E = md.E;
    w.P1 = sym_part(X1inv);
    w.P2 = X2inv;
    w.Q1 = back1("Q1");
    w.Q2 = back1("Q2");
    w.Q3 = back1("Q3");
    w.R1 = back1("R1");
    w.R2 = back1("R2");
    w.R3 = back1("R3");
    w.Q4 = back2("Q4");
    w.Q4_tilde = back2("Q4_tilde");
    w.Z1 = back2("Z1");
    w.Z2 = back2("Z2");
    w.zeta2 = md.zeta2;
    w.d2 = md.d2;
    w.tau2 = md.tau2;
    w.theta_bar = md.theta_bar;
    return w;
}

namespace {

double quad(const Vec& x, const Mat& W) { return x.dot(W * x); }

// Central differences in the interior, one-sided at the ends.
Vec derivative_at(const std::vector<Vec>& v, const std::vector<double>& t, std::size_t i) {
    const std::size_t n = v.size();
    if (n < 2) {
        return Vec::Zero(v[i].size());
    }
    if (i == 0) {
        return (v[1] - v[0]) / (t[1] - t[0]);
    }
    if (i == n - 1) {
        return (v[n - 1] - v[n - 2]) / (t[n - 1] - t[n - 2]);
    }
    return (v[i + 1] - v[i - 1]) / (t[i + 1] - t[i - 1]);
}

} // namespace

LkfTerms lkf_terms(const SimTrace& tr, const LkfWeights& w, double t, double theta) {
    if (tr.size() < 2) {
        throw std::out_of_range("lkf_value: trace too short");
    }
    const double t0 = tr.t.front();
    const double dt = tr.t[1] - tr.t[0];
    const double max_delay = std::max({w.zeta2, w.d2, w.tau2, w.theta_bar, theta});
    if (t - max_delay < t0 - 1e-9 * dt || t > tr.t.back() + 1e-9 * dt) {
        throw std::out_of_range("lkf_value: t = " + std::to_string(t) + " outside [" + std::to_string(t0 + max_delay) +
                                ", " + std::to_string(tr.t.back()) + "]");
    }
    const auto k = static_cast<std::size_t>(std::llround((t - t0) / dt));

    // integral over [t - r, t] of weight(s - t + r) * g(s) by the trapezoid rule
    auto window = [&](double r, bool ramp, auto&& g) {
        const auto len = static_cast<std::size_t>(std::llround(r / dt));
        if (len == 0) {
            return 0.0;
        }
        double acc = 0.0;
        for (std::size_t j = k - len; j <= k; ++j) {
            const double s = static_cast<double>(j - (k - len)) * dt;
            double v = g(j) * (ramp ? s : 1.0);
            if (j == k - len || j == k) {
                v *= 0.5;
            }
            acc += v;
        }
        return acc * dt;
    };

    LkfTerms out;
    const Vec& x1 = tr.x1[k];
    const Vec& x2 = tr.x2[k];
    out.V1 = quad(x1, w.P1) + x2.dot(w.E.transpose() * w.P2 * x2);

    out.V2 = window(w.zeta2, false, [&](std::size_t j) { return quad(tr.x1[j], w.Q1); }) +
             window(w.d2, false, [&](std::size_t j) { return quad(tr.x1[j], w.Q2); }) +
             window(w.tau2, false, [&](std::size_t j) { return quad(tr.x1[j], w.Q3); }) +
             window(theta, false, [&](std::size_t j) { return quad(tr.x2[j], w.Q4_tilde); }) +
             window(w.theta_bar, false, [&](std::size_t j) { return quad(tr.x2[j], w.Q4); });

    auto dx1 = [&](std::size_t j) { return derivative_at(tr.x1, tr.t, j); };
    out.V3 = w.zeta2 * window(w.zeta2, true, [&](std::size_t j) { return quad(dx1(j), w.R1); }) +
             w.d2 * window(w.d2, true, [&](std::size_t j) { return quad(dx1(j), w.R2); }) +
             w.tau2 * window(w.tau2, true, [&](std::size_t j) { return quad(dx1(j), w.R3); });

    auto edx2 = [&](std::size_t j) { return Vec(w.E * derivative_at(tr.x2, tr.t, j)); };
    out.V4 = window(w.theta_bar, true, [&](std::size_t j) { return quad(tr.x2[j], w.Z1); }) +
             w.theta_bar * window(w.theta_bar, true, [&](std::size_t j) { return quad(edx2(j), w.Z2); });
    return out;
}

double lkf_value(const SimTrace& tr, const LkfWeights& w, double t, double theta) {
    return lkf_terms(tr, w, t, theta).total();
}

// ---------------------------------------------------------------- lemmas

double simpson(const std::vector<double>& f, double h) {
    if (f.size() < 3 || f.size() % 2 == 0) {
        throw std::invalid_argument("simpson: need an odd number (>= 3) of samples");
    }
    double acc = f.front() + f.back();
    for (std::size_t i = 1; i + 1 < f.size(); ++i) {
        acc += (i % 2 == 1 ? 4.0 : 2.0) * f[i];
    }
    return acc * h / 3.0;
}

const char* to_string(Lemma l) {
    switch (l) {
    case Lemma::schur:
        return "schur";
    case Lemma::norm_bound:
        return "norm_bound";
    case Lemma::wirtinger_split:
        return "wirtinger_split";
    case Lemma::recip_convex:
        return "recip_convex";
    case Lemma::jensen:
        return "jensen";
    case Lemma::wirtinger_pi:
        return "wirtinger_pi";
    }
    return "?";
}

const std::vector<Lemma>& all_lemmas() {
    static const std::vector<Lemma> all = {Lemma::schur,        Lemma::norm_bound, Lemma::wirtinger_split,
                                           Lemma::recip_convex, Lemma::jensen,     Lemma::wirtinger_pi};
    return all;
}

Lemma lemma_from_string(const std::string& s) {
    for (Lemma l : all_lemmas()) {
        if (s == to_string(l)) {
            return l;
        }
    }
    throw std::invalid_argument("unknown lemma '" + s + "'");
}

namespace {

void check_samples(const SampledFunction& f, bool need_dx, Eigen::Index n) {
    if (f.x.size() < 201 || f.x.size() % 2 == 0) {
        throw std::invalid_argument("lemma_gap: need an odd number (>= 201) of samples");
    }
    if (!(f.b > f.a)) {
        throw std::invalid_argument("lemma_gap: need a < b");
    }
    if (need_dx && f.dx.size() != f.x.size()) {
        throw std::invalid_argument("lemma_gap: derivative samples missing");
    }
    for (std::size_t i = 0; i < f.x.size(); ++i) {
        if (f.x[i].size() != n || (need_dx && f.dx[i].size() != n)) {
            throw DimensionError("lemma_gap: sample dimension does not match the weight");
        }
    }
}

void check_spd(const Mat& R, const char* what) {
    if (R.rows() != R.cols() || R.rows() == 0) {
        throw DimensionError(std::string("lemma_gap: ") + what + " must be square");
    }
    if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + R.cwiseAbs().maxCoeff()) || min_eig_sym(R) <= 0.0) {
        throw std::invalid_argument(std::string("lemma_gap: ") + what + " must be symmetric positive definite");
    }
}

double integral_quad(const std::vector<Vec>& v, const Mat& R, double h) {
    std::vector<double> f(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        f[i] = v[i].dot(R * v[i]);
    }
    return simpson(f, h);
}

Vec integral(const std::vector<Vec>& v, double h) {
    Vec out(v.front().size());
    std::vector<double> f(v.size());
    for (Eigen::Index c = 0; c < out.size(); ++c) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            f[i] = v[i](c);
        }
        out(c) = simpson(f, h);
    }
    return out;
}

} // namespace

double lemma_gap(Lemma lemma, const LemmaInputs& in) {
    switch (lemma) {
    case Lemma::schur: {
        const Mat& O1 = in.A;
        const Mat& O2 = in.B;
        const Mat& O3 = in.C;
        if (O1.rows() != O1.cols() || O3.cols() != O1.rows() || O3.rows() != O2.rows()) {
            throw DimensionError("schur: Omega1 n x n, Omega2 p x p, Omega3 p x n expected");
        }
        check_spd(O2, "Omega2");
        const Mat reduced = sym_part(O1 + O3.transpose() * O2.ldlt().solve(O3));
        BlockLayout lay;
        const auto r1 = lay.append(O1.rows());
        const auto r2 = lay.append(O2.rows());
        Mat big = Mat::Zero(lay.total(), lay.total());
        set_block(big, lay, r1, r1, sym_part(O1));
        set_sym_block(big, lay, r2, r1, O3);
        set_block(big, lay, r2, r2, -O2);
        const bool v_reduced = max_eig_sym(reduced) < 0.0;
        const bool v_block = max_eig_sym(big) < 0.0;
        return v_reduced == v_block ? 0.0 : -1.0;
    }
    case Lemma::norm_bound: {
        const Mat& M = in.A;
        const Mat& F = in.B;
        const Mat& N = in.C;
        if (M.cols() != F.rows() || F.cols() != N.rows() || M.rows() != N.cols()) {
            throw DimensionError("norm_bound: M n x k, F k x l, N l x n expected");
        }
        if (!(in.eps > 0.0)) {
            throw std::invalid_argument("norm_bound: eps must be positive");
        }
        if (max_eig_sym(F.transpose() * F) > 1.0 + 1e-12) {
            throw std::invalid_argument("norm_bound: F'F <= I violated");
        }
        const Mat MFN = M * F * N;
        return min_eig_sym(sym_part(M * M.transpose() / in.eps + in.eps * N.transpose() * N - MFN - MFN.transpose()));
    }
    case Lemma::wirtinger_split: {
        const Mat& R = in.A;
        check_spd(R, "R");
        check_samples(in.f, true, R.rows());
        const double h = in.f.step();
        const double L = in.f.b - in.f.a;
        const Vec& xb = in.f.x.back();
        const Vec& xa = in.f.x.front();
        const Vec pi1 = xb - xa;
        const Vec pi2 = xb + xa - 2.0 / L * integral(in.f.x, h);
        return integral_quad(in.f.dx, R, h) - (pi1.dot(R * pi1) + 3.0 * pi2.dot(R * pi2)) / L;
    }
    case Lemma::recip_convex: {
        const Mat& R = in.A;
        const Mat& M = in.B;
        check_spd(R, "R");
        if (M.rows() != R.rows() || M.cols() != R.cols()) {
            throw DimensionError("recip_convex: M must match R");
        }
        if (!(in.theta > 0.0 && in.theta < 1.0)) {
            throw std::invalid_argument("recip_convex: theta must lie in (0, 1)");
        }
        const Eigen::Index n = R.rows();
        Mat pair(2 * n, 2 * n);
        pair << R, M.transpose(), M, R;
        if (min_eig_sym(pair) < -1e-10 * (1.0 + R.norm())) {
            throw std::invalid_argument("recip_convex: [R M'; M R] must be positive semidefinite");
        }
        Mat lhs = Mat::Zero(2 * n, 2 * n);
        lhs.topLeftCorner(n, n) = R / in.theta;
        lhs.bottomRightCorner(n, n) = R / (1.0 - in.theta);
        return min_eig_sym(sym_part(lhs - pair));
    }
    case Lemma::jensen: {
        const Mat& W = in.A;
        check_spd(W, "W1");
        check_samples(in.f, false, W.rows());
        const double h = in.f.step();
        const Vec ix = integral(in.f.x, h);
        return (in.f.b - in.f.a) * integral_quad(in.f.x, W, h) - ix.dot(W * ix);
    }
    case Lemma::wirtinger_pi: {
        const Mat& R = in.A;
        check_spd(R, "R");
        check_samples(in.f, true, R.rows());
        const double h = in.f.step();
        const double L = in.f.b - in.f.a;
        const Vec& wb = in.f.x.back();
        const Vec& wa = in.f.x.front();
        const Vec mean = integral(in.f.x, h) / L;
        const Vec w1 = wb - wa;
        const Vec w2 = 0.5 * wb + 0.5 * wa - mean;
        constexpr double pi2 = std::numbers::pi * std::numbers::pi;
        return integral_quad(in.f.dx, R, h) - (w1.dot(R * w1) + pi2 * w2.dot(R * w2)) / L;
    }
    }
    throw std::invalid_argument("unknown lemma");
}

json LemmaSweep::to_json() const {
    return {{"lemma", to_string(lemma)}, {"draws", draws}, {"min_gap", min_gap}, {"failures", failures}};
}

namespace {

struct Draw {
    std::mt19937_64 rng;
    explicit Draw(std::uint64_t seed) : rng(seed) {}
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    }
    Mat matrix(Eigen::Index r, Eigen::Index c) {
        Mat m(r, c);
        for (Eigen::Index i = 0; i < r; ++i) {
            for (Eigen::Index j = 0; j < c; ++j) {
                m(i, j) = uniform(-1.0, 1.0);
            }
        }
        return m;
    }
    Mat spd(Eigen::Index n) {
        const Mat a = matrix(n, n);
        return sym_part(a * a.transpose()) + uniform(0.05, 1.0) * Mat::Identity(n, n);
    }
    // Polynomial vector function of degree <= 6 sampled with its derivative.
    SampledFunction poly(Eigen::Index n, std::size_t samples) {
        SampledFunction f;
        f.a = uniform(-1.0, 1.0);
        f.b = f.a + uniform(0.25, 2.0);
        const int deg = static_cast<int>(rng() % 7);
        const Mat coef = matrix(n, deg + 1);
        f.x.resize(samples);
        f.dx.resize(samples);
        const double h = (f.b - f.a) / static_cast<double>(samples - 1);
        for (std::size_t i = 0; i < samples; ++i) {
            const double s = f.a + static_cast<double>(i) * h;
            Vec x = Vec::Zero(n);
            Vec dx = Vec::Zero(n);
            for (int p = deg; p >= 0; --p) {
                dx = dx * s + x;
                x = x * s + coef.col(p);
            }
            f.x[i] = x;
            f.dx[i] = dx;
        }
        return f;
    }
};

} // namespace

LemmaInputs random_lemma_inputs(Lemma lemma, std::uint64_t seed, int n, std::size_t samples) {
    Draw d(seed);
    LemmaInputs in;
    const Eigen::Index k = n;
    switch (lemma) {
    case Lemma::schur: {
        const Eigen::Index p = 1 + static_cast<Eigen::Index>(d.rng() % 3);
        in.A = -d.spd(k);
        in.B = d.spd(p);
        in.C = d.uniform(0.0, 1.5) * d.matrix(p, k);
        break;
    }
    case Lemma::norm_bound: {
        in.A = d.matrix(k, k);
        Mat F = d.matrix(k, k);
        const double smax = std::sqrt(std::max(max_eig_sym(F.transpose() * F), 1e-300));
        in.B = F * (d.uniform(0.0, 1.0) / smax);
        in.C = d.matrix(k, k);
        in.eps = std::exp(d.uniform(std::log(0.1), std::log(10.0)));
        break;
    }
    case Lemma::recip_convex: {
        in.A = d.spd(k);
        const Mat half = sqrtm_psd(in.A);
        Mat C = d.matrix(k, k);
        const double smax = std::sqrt(std::max(max_eig_sym(C.transpose() * C), 1e-300));
        C *= d.uniform(0.0, 1.0) / smax;
        in.B = half * C * half;
        in.theta = d.uniform(0.01, 0.99);
        break;
    }
    case Lemma::wirtinger_split:
    case Lemma::jensen:
    case Lemma::wirtinger_pi:
        in.A = d.spd(k);
        in.f = d.poly(k, samples);
        break;
    }
    return in;
}

LemmaSweep lemma_sweep(Lemma lemma, int draws, std::uint64_t seed, double tol) {
    LemmaSweep s;
    s.lemma = lemma;
    s.draws = draws;
    s.min_gap = std::numeric_limits<double>::infinity();
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(draws));
    std::mt19937_64 master(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(lemma));
    for (auto& v : seeds) {
        v = master();
    }
    for (int i = 0; i < draws; ++i) {
        const double g = lemma_gap(lemma, random_lemma_inputs(lemma, seeds[static_cast<std::size_t>(i)]));
        s.min_gap = std::min(s.min_gap, g);
        if (g < -tol) {
            ++s.failures;
        }
    }
    if (draws == 0) {
        s.min_gap = 0.0;
    }
    return s;
}

} // namespace ncts
