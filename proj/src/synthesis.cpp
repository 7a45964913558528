#include "ncts/synthesis.hpp"

#include <cmath>
#include <fstream>

#include "ncts/log.hpp"

namespace ncts {

using nlohmann::json;

const char* to_string(SynthesisStatus s) {
    switch (s) {
    case SynthesisStatus::feasible:
        return "feasible";
    case SynthesisStatus::infeasible:
        return "infeasible";
    case SynthesisStatus::not_admissible:
        return "not_admissible";
    case SynthesisStatus::solver_failure:
        return "solver_failure";
    }
    return "?";
}

json CertReport::to_json() const {
    json ev = json::array();
    for (const auto& l : slow_eigenvalues) {
        ev.push_back({l.real(), l.imag()});
    }
    return {{"regular", regular},       {"impulse_free", impulse_free}, {"degree", degree},
            {"rank_E", rank_e},         {"slow_eigenvalues", ev},       {"slow_stable", slow_stable},
            {"admissible", admissible()}};
}

json GainCertificate::to_json() const {
    json dec = json::object();
    for (const auto& [name, value] : decision) {
        dec[name] = matrix_to_json(value);
    }
    return {{"K1", matrix_to_json(K1)},
            {"K2", matrix_to_json(K2)},
            {"W", matrix_to_json(W)},
            {"cond_X1", cond_X1},
            {"cond_X2", cond_X2},
            {"admissibility", admissibility.to_json()},
            {"decision", dec},
            {"solver", solver}};
}

GainCertificate certificate_from_json(const json& j) {
    const json& body = j.contains("certificate") ? j.at("certificate") : j;
    if (!body.is_object() || !body.contains("K1") || !body.contains("K2") || !body.contains("W")) {
        throw ModelFormatError("certificate: expected keys K1, K2, W");
    }
    GainCertificate c;
    c.K1 = matrix_from_json(body.at("K1"), "K1");
    c.K2 = matrix_from_json(body.at("K2"), "K2");
    c.W = matrix_from_json(body.at("W"), "W");
    if (body.contains("decision")) {
        for (const auto& item : body.at("decision").items()) {
            c.decision[item.key()] = matrix_from_json(item.value(), "decision." + item.key());
        }
    }
    c.cond_X1 = body.value("cond_X1", 0.0);
    c.cond_X2 = body.value("cond_X2", 0.0);
    return c;
}

GainCertificate load_certificate(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open certificate file '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ModelFormatError(path + ": " + e.what());
    }
    return certificate_from_json(j);
}

json SynthesisResult::to_json() const {
    json j{{"status", ncts::to_string(status)}, {"message", message}, {"solver", solution.to_json()}};
    if (certificate) {
        j["certificate"] = certificate->to_json();
    }
    return j;
}

CertReport certify_closed_loop(const CascadeModel& md, const Mat& K2) {
    if (K2.rows() != md.B2.cols() || K2.cols() != md.A2.cols()) {
        throw DimensionError("certify_closed_loop: K2 must be m x n2");
    }
    const Mat acl = md.A2 + md.B2 * K2;
    const PencilReport pencil = is_regular_impulse_free(md.E, acl);
    CertReport r;
    r.regular = pencil.regular;
    r.impulse_free = pencil.impulse_free;
    r.degree = pencil.degree;
    r.rank_e = pencil.rank_e;
    if (!r.regular || !r.impulse_free) {
        return r;
    }
    const DaeDecomposition d = dae_coordinates(md.E);
    const auto k = static_cast<Eigen::Index>(d.rank);
    const Mat at = d.U.transpose() * acl * d.V;
    Mat slow;
    if (k == at.rows()) {
        slow = at;
    } else {
        const Mat a22 = at.bottomRightCorner(at.rows() - k, at.cols() - k);
        slow = at.topLeftCorner(k, k) -
               at.topRightCorner(k, at.cols() - k) * a22.fullPivLu().solve(at.bottomLeftCorner(at.rows() - k, k));
    }
    slow = d.sigma.head(k).cwiseInverse().asDiagonal() * slow;
    r.slow_stable = true;
    if (k > 0) {
        Eigen::EigenSolver<Mat> es(slow);
        for (Eigen::Index i = 0; i < k; ++i) {
            r.slow_eigenvalues.push_back(es.eigenvalues()(i));
            if (!(es.eigenvalues()(i).real() < 0.0)) {
                r.slow_stable = false;
            }
        }
    }
    return r;
}

namespace {

double condition_number(const Mat& m) {
    Eigen::JacobiSVD<Mat> svd(m);
    const Vec s = svd.singularValues();
    if (s.size() == 0) {
        return 1.0;
    }
    const double smin = s(s.size() - 1);
    return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

} // namespace

GainCertificate extract_gains(const CascadeModel& md, const std::map<std::string, Mat>& decision) {
    auto get = [&](const char* name) -> const Mat& {
        auto it = decision.find(name);
        if (it == decision.end()) {
            throw ExtractionError(std::string("decision value '") + name + "' missing");
        }
        return it->second;
    };
    const Mat& X1 = get("X1");
    const Mat& X2 = get("X2");
    GainCertificate c;
    c.cond_X1 = condition_number(X1);
    c.cond_X2 = condition_number(X2);
    if (!(c.cond_X1 <= kMaxConditionNumber)) {
        throw ExtractionError("X1 is near-singular (condition " + std::to_string(c.cond_X1) + ")");
    }
    if (!(c.cond_X2 <= kMaxConditionNumber)) {
        throw ExtractionError("X2 is near-singular (condition " + std::to_string(c.cond_X2) + ")");
    }
    const Mat X1inv = X1.fullPivLu().inverse();
    const Mat X2inv = X2.fullPivLu().inverse();
    c.K1 = get("Y1") * X1inv;
    c.K2 = get("Y2") * X2inv;
    c.W = sym_part(X1inv.transpose() * get("W_hat") * X1inv);
    c.decision = decision;
    c.admissibility = certify_closed_loop(md, c.K2);
    return c;
}

LmiSystem build_for(const CascadeModel& md, const TheoremScalars& sc, const FaultSpec& fault) {
    if (fault.mode == FaultMode::known) {
        return build_theorem1(md, fault.G, sc);
    }
    return build_theorem2(md, sc);
}

SynthesisResult synthesize(const CascadeModel& md, const TheoremScalars& sc, const FaultSpec& fault,
                           const SolveOptions& opts) {
    const LmiSystem sys = build_for(md, sc, fault);
    SynthesisResult out;
    out.solution = solve(sys, opts);
    switch (out.solution.status) {
    case SolveStatus::feasible:
        break;
    case SolveStatus::infeasible_certificate:
        out.status = SynthesisStatus::infeasible;
        out.message = "phase-1 optimum t* = " + std::to_string(out.solution.t) + " is not below -delta/2";
        return out;
    case SolveStatus::max_iter:
    case SolveStatus::numerical_failure:
        out.status = SynthesisStatus::solver_failure;
        out.message = std::string("solver stopped: ") + to_string(out.solution.status);
        return out;
    }
    GainCertificate cert = extract_gains(md, out.solution.assignment);
    cert.solver = out.solution.to_json();
    if (!cert.admissibility.admissible()) {
        out.status = SynthesisStatus::not_admissible;
        out.message = cert.admissibility.impulse_free ? "closed loop has a non-decaying slow mode"
                                                      : "closed loop is not regular and impulse-free";
    } else {
        out.status = SynthesisStatus::feasible;
    }
    out.certificate = std::move(cert);
    return out;
}

GammaSweep gamma_threshold(const CascadeModel& md, const TheoremScalars& sc, const FaultSpec& fault, double lo,
                           double hi, double tol, const SolveOptions& opts) {
    GammaSweep s{lo, hi, 0};
    CascadeModel probe = md;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        probe.dissipativity.gamma = mid;
        const auto r = synthesize(probe, sc, fault, opts);
        ++s.solves;
        if (r.ok()) {
            lo = mid;
        } else {
            hi = mid;
        }
        log_debug("gamma sweep: " + std::to_string(mid) + " -> " + to_string(r.status));
    }
    s.feasible_gamma = lo;
    s.infeasible_gamma = hi;
    return s;
}

} // namespace ncts
