#include "ncts/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ncts {

using nlohmann::json;

Mat DissipativityTriple::Q_bar() const { return sqrtm_psd(-sym_part(Q)); }

bool ValidationReport::mentions(const std::string& field) const {
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.field == field; });
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& v : violations) {
        os << v.field << ": " << v.message << "\n";
    }
    return os.str();
}

namespace {

struct Checker {
    ValidationReport report;

    void fail(const std::string& field, const std::string& msg) { report.violations.push_back({field, msg}); }

    void dims(const std::string& field, const Mat& m, Eigen::Index rows, Eigen::Index cols) {
        if (m.rows() != rows || m.cols() != cols) {
            std::ostringstream os;
            os << "expected " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
            fail(field, os.str());
        } else if (!m.allFinite()) {
            fail(field, "non-finite entry");
        }
    }

    void range(const std::string& field, double v, double lo, double hi, bool lo_open, bool hi_open) {
        const bool below = lo_open ? !(v > lo) : !(v >= lo);
        const bool above = hi_open ? !(v < hi) : !(v <= hi);
        if (below || above || !std::isfinite(v)) {
            std::ostringstream os;
            os << "value " << v << " outside " << (lo_open ? "(" : "[") << lo << ", " << hi << (hi_open ? ")" : "]");
            fail(field, os.str());
        }
    }
};

} // namespace

ValidationReport validate(const CascadeModel& md) {
    Checker c;
    const auto n1 = md.A1.rows();
    const auto n2 = md.A2.rows();
    const auto m = md.B2.cols();
    const auto q = md.B3.cols();
    const auto qy = md.C1.rows();
    const auto p2 = md.C2.rows();
    const double inf = std::numeric_limits<double>::infinity();

    c.dims("A1", md.A1, n1, n1);
    c.dims("B1", md.B1, n1, p2);
    c.dims("C1", md.C1, qy, n1);
    c.dims("D1", md.D1, qy, q);
    c.dims("E", md.E, n2, n2);
    c.dims("A2", md.A2, n2, n2);
    c.dims("A3", md.A3, n2, n2);
    c.dims("B2", md.B2, n2, m);
    c.dims("B3", md.B3, n2, q);
    c.dims("C2", md.C2, p2, n2);
    c.dims("D2", md.D2, p2, q);
    c.dims("F", md.F, n1, n1);
    if (n1 == 0 || n2 == 0 || m == 0 || q == 0 || qy == 0) {
        c.fail("dimensions", "all state/input/disturbance/output dimensions must be positive");
    }

    c.range("zeta2", md.zeta2, 0.0, inf, false, true);
    c.range("d2", md.d2, 0.0, inf, false, true);
    c.range("tau2", md.tau2, 0.0, inf, false, true);
    c.range("theta_bar", md.theta_bar, 0.0, inf, false, true);
    c.range("lambda", md.lambda, -inf, 1.0, true, true);
    c.range("h", md.h, 0.0, inf, true, true);
    c.range("mu", md.mu, 0.0, 1.0, false, true);
    c.range("alpha_bar", md.alpha_bar, 0.0, 1.0, false, false);
    c.range("beta_bar", md.beta_bar, 0.0, 1.0, false, false);
    c.range("saturation_slope", md.saturation_slope, 0.0, 1.0, true, true);

    if (md.saturation_limits.size() != m) {
        c.fail("saturation_limits", "expected " + std::to_string(m) + " limits");
    } else if (!(md.saturation_limits.array() > 0.0).all()) {
        c.fail("saturation_limits", "limits must be positive");
    }

    const auto& f = md.fault;
    if (f.lower.size() != m || f.upper.size() != m) {
        c.fail("fault", "expected " + std::to_string(m) + " channel bounds");
    } else {
        for (Eigen::Index k = 0; k < m; ++k) {
            if (!(0.0 <= f.lower(k) && f.lower(k) <= f.upper(k) && f.upper(k) <= 1.0)) {
                c.fail("fault", "need 0 <= lower <= upper <= 1 on channel " + std::to_string(k + 1));
            }
        }
        if (f.realized) {
            if (f.realized->size() != m) {
                c.fail("fault.realized", "expected " + std::to_string(m) + " entries");
            } else {
                for (Eigen::Index k = 0; k < m; ++k) {
                    const double g = (*f.realized)(k);
                    if (g < f.lower(k) - 1e-12 || g > f.upper(k) + 1e-12) {
                        c.fail("fault.realized", "entry outside fault interval on channel " + std::to_string(k + 1));
                    }
                }
            }
        }
    }

    const auto& d = md.dissipativity;
    c.dims("Q", d.Q, qy, qy);
    c.dims("S", d.S, qy, q);
    c.dims("R", d.R, q, q);
    if (d.Q.rows() == qy && d.Q.cols() == qy && qy > 0) {
        if ((d.Q - d.Q.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
            c.fail("Q", "must be symmetric");
        } else if (max_eig_sym(d.Q) > 1e-12) {
            c.fail("Q", "must be negative semidefinite");
        }
    }
    if (d.R.rows() == q && d.R.cols() == q && q > 0 && (d.R - d.R.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        c.fail("R", "must be symmetric");
    }
    c.range("gamma", d.gamma, 0.0, inf, true, true);
    return c.report;
}

BernoulliMoments bernoulli_moments(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::domain_error("Bernoulli probability outside [0,1]");
    }
    return {p, p * (1.0 - p)};
}

PencilReport is_regular_impulse_free(const Mat& e, const Mat& a) {
    if (e.rows() != e.cols() || a.rows() != a.cols() || e.rows() != a.rows()) {
        throw DimensionError("pencil matrices must be square and of equal size");
    }
    PencilReport out;
    const auto n = e.rows();
    out.rank_e = numeric_rank(e);
    if (n == 0) {
        out.regular = true;
        out.impulse_free = true;
        out.degree = 0;
        out.coefficients = {1.0};
        return out;
    }
    const double ne = e.norm();
    const double na = a.norm();
    // Sample radius on the scale where sE and A are comparable.
    const double rho = ne > 0.0 ? std::max(1.0, na / ne) : 1.0;
    const Eigen::Index samples = n + 2;
    Mat vander(samples, n + 1);
    Vec values(samples);
    for (Eigen::Index k = 0; k < samples; ++k) {
        const double u = std::cos(std::numbers::pi * (2.0 * static_cast<double>(k) + 1.0) /
                                  (2.0 * static_cast<double>(samples)));
        double p = 1.0;
        for (Eigen::Index j = 0; j <= n; ++j) {
            vander(k, j) = p;
            p *= u;
        }
        values(k) = pencil_det(e, a, rho * u);
    }
    const Vec scaled = vander.colPivHouseholderQr().solve(values);
    // Magnitude reference: a Hadamard-type bound on |det(sE - A)| over the samples.
    const double ref = std::pow(rho * ne + na, static_cast<double>(n));
    const double cmax = scaled.cwiseAbs().maxCoeff();
    out.coefficients.resize(static_cast<std::size_t>(n + 1));
    for (Eigen::Index j = 0; j <= n; ++j) {
        out.coefficients[static_cast<std::size_t>(j)] = scaled(j) / std::pow(rho, static_cast<double>(j));
    }
    if (ref == 0.0 || cmax <= 1e-9 * ref) {
        out.regular = false;
        out.degree = -1;
        out.impulse_free = false;
        return out;
    }
    out.regular = true;
    for (Eigen::Index j = n; j >= 0; --j) {
        if (std::abs(scaled(j)) > 1e-9 * cmax) {
            out.degree = static_cast<int>(j);
            break;
        }
    }
    out.impulse_free = out.degree == static_cast<int>(out.rank_e);
    return out;
}

// ---------------------------------------------------------------- JSON

json matrix_to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(row);
    }
    return rows;
}

Mat matrix_from_json(const json& j, const std::string& field) {
    if (j.is_number()) {
        Mat m(1, 1);
        m(0, 0) = j.get<double>();
        return m;
    }
    if (!j.is_array()) {
        throw ModelFormatError(field + ": expected a matrix (array of rows)");
    }
    std::vector<std::vector<double>> rows;
    for (const auto& r : j) {
        if (r.is_number()) {
            rows.push_back({r.get<double>()});
            continue;
        }
        if (!r.is_array()) {
            throw ModelFormatError(field + ": rows must be arrays");
        }
        std::vector<double> row;
        for (const auto& v : r) {
            if (!v.is_number()) {
                throw ModelFormatError(field + ": non-numeric entry");
            }
            row.push_back(v.get<double>());
        }
        rows.push_back(std::move(row));
    }
    try {
        return mat_from_rows(rows);
    } catch (const DimensionError& e) {
        throw ModelFormatError(field + ": " + e.what());
    }
}

json vector_to_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(v(i));
    }
    return a;
}

Vec vector_from_json(const json& j, const std::string& field) {
    if (j.is_number()) {
        Vec v(1);
        v(0) = j.get<double>();
        return v;
    }
    if (!j.is_array()) {
        throw ModelFormatError(field + ": expected an array");
    }
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
            throw ModelFormatError(field + ": non-numeric entry");
        }
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
        throw ModelFormatError(where + ": expected an object");
    }
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            if (item.key() == a) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw ModelFormatError(where + ": unknown key '" + item.key() + "'");
        }
    }
}

const json& need(const json& obj, const std::string& where, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw ModelFormatError(where + ": missing key '" + key + "'");
    }
    return *it;
}

double need_scalar(const json& obj, const std::string& where, const char* key) {
    const json& v = need(obj, where, key);
    if (!v.is_number()) {
        throw ModelFormatError(where + "." + key + ": expected a number");
    }
    return v.get<double>();
}

Mat need_mat(const json& obj, const std::string& where, const char* key) {
    return matrix_from_json(need(obj, where, key), where + "." + key);
}

} // namespace

CascadeModel model_from_json(const json& j) {
    reject_unknown(j, "model", {"primary", "secondary", "delays", "trigger", "attack", "fault", "dissipativity"});
    CascadeModel md;

    const json& p = need(j, "model", "primary");
    reject_unknown(p, "primary", {"A1", "B1", "C1", "D1"});
    md.A1 = need_mat(p, "primary", "A1");
    md.B1 = need_mat(p, "primary", "B1");
    md.C1 = need_mat(p, "primary", "C1");
    md.D1 = need_mat(p, "primary", "D1");

    const json& s = need(j, "model", "secondary");
    reject_unknown(s, "secondary",
                   {"E", "A2", "A3", "B2", "B3", "C2", "D2", "saturation_limits", "saturation_slope"});
    md.E = need_mat(s, "secondary", "E");
    md.A2 = need_mat(s, "secondary", "A2");
    md.A3 = need_mat(s, "secondary", "A3");
    md.B2 = need_mat(s, "secondary", "B2");
    md.B3 = need_mat(s, "secondary", "B3");
    md.C2 = need_mat(s, "secondary", "C2");
    md.D2 = need_mat(s, "secondary", "D2");
    md.saturation_limits = vector_from_json(need(s, "secondary", "saturation_limits"), "secondary.saturation_limits");
    md.saturation_slope = need_scalar(s, "secondary", "saturation_slope");

    const json& d = need(j, "model", "delays");
    reject_unknown(d, "delays", {"zeta2", "d2", "tau2", "theta_bar", "lambda"});
    md.zeta2 = need_scalar(d, "delays", "zeta2");
    md.d2 = need_scalar(d, "delays", "d2");
    md.tau2 = need_scalar(d, "delays", "tau2");
    md.theta_bar = need_scalar(d, "delays", "theta_bar");
    md.lambda = need_scalar(d, "delays", "lambda");

    const json& t = need(j, "model", "trigger");
    reject_unknown(t, "trigger", {"h", "mu", "alpha_bar"});
    md.h = need_scalar(t, "trigger", "h");
    md.mu = need_scalar(t, "trigger", "mu");
    md.alpha_bar = need_scalar(t, "trigger", "alpha_bar");

    const json& a = need(j, "model", "attack");
    reject_unknown(a, "attack", {"beta_bar", "F"});
    md.beta_bar = need_scalar(a, "attack", "beta_bar");
    md.F = need_mat(a, "attack", "F");

    const json& f = need(j, "model", "fault");
    reject_unknown(f, "fault", {"lower", "upper", "realized"});
    md.fault.lower = vector_from_json(need(f, "fault", "lower"), "fault.lower");
    md.fault.upper = vector_from_json(need(f, "fault", "upper"), "fault.upper");
    if (f.contains("realized") && !f["realized"].is_null()) {
        md.fault.realized = vector_from_json(f["realized"], "fault.realized");
    }

    const json& q = need(j, "model", "dissipativity");
    reject_unknown(q, "dissipativity", {"Q", "S", "R", "gamma"});
    md.dissipativity.Q = need_mat(q, "dissipativity", "Q");
    md.dissipativity.S = need_mat(q, "dissipativity", "S");
    md.dissipativity.R = need_mat(q, "dissipativity", "R");
    md.dissipativity.gamma = need_scalar(q, "dissipativity", "gamma");
    return md;
}

json model_to_json(const CascadeModel& md) {
    json j;
    j["primary"] = {{"A1", matrix_to_json(md.A1)},
                    {"B1", matrix_to_json(md.B1)},
                    {"C1", matrix_to_json(md.C1)},
                    {"D1", matrix_to_json(md.D1)}};
    j["secondary"] = {{"E", matrix_to_json(md.E)},
                      {"A2", matrix_to_json(md.A2)},
                      {"A3", matrix_to_json(md.A3)},
                      {"B2", matrix_to_json(md.B2)},
                      {"B3", matrix_to_json(md.B3)},
                      {"C2", matrix_to_json(md.C2)},
                      {"D2", matrix_to_json(md.D2)},
                      {"saturation_limits", vector_to_json(md.saturation_limits)},
                      {"saturation_slope", md.saturation_slope}};
    j["delays"] = {{"zeta2", md.zeta2},
                   {"d2", md.d2},
                   {"tau2", md.tau2},
                   {"theta_bar", md.theta_bar},
                   {"lambda", md.lambda}};
    j["trigger"] = {{"h", md.h}, {"mu", md.mu}, {"alpha_bar", md.alpha_bar}};
    j["attack"] = {{"beta_bar", md.beta_bar}, {"F", matrix_to_json(md.F)}};
    j["fault"] = {{"lower", vector_to_json(md.fault.lower)}, {"upper", vector_to_json(md.fault.upper)}};
    if (md.fault.realized) {
        j["fault"]["realized"] = vector_to_json(*md.fault.realized);
    }
    j["dissipativity"] = {{"Q", matrix_to_json(md.dissipativity.Q)},
                          {"S", matrix_to_json(md.dissipativity.S)},
                          {"R", matrix_to_json(md.dissipativity.R)},
                          {"gamma", md.dissipativity.gamma}};
    return j;
}

CascadeModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open model file '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ModelFormatError(path + ": " + e.what());
    }
    if (j.contains("model") && j.is_object() && !j.contains("primary")) {
        return model_from_json(j["model"]);
    }
    return model_from_json(j);
}

namespace {

double* scalar_slot(CascadeModel& md, const std::string& key) {
    if (key == "zeta2") return &md.zeta2;
    if (key == "d2") return &md.d2;
    if (key == "tau2") return &md.tau2;
    if (key == "theta_bar") return &md.theta_bar;
    if (key == "lambda") return &md.lambda;
    if (key == "h") return &md.h;
    if (key == "mu") return &md.mu;
    if (key == "alpha_bar") return &md.alpha_bar;
    if (key == "beta_bar") return &md.beta_bar;
    if (key == "saturation_slope" || key == "epsilon") return &md.saturation_slope;
    if (key == "gamma") return &md.dissipativity.gamma;
    return nullptr;
}

} // namespace

bool is_model_scalar(const std::string& key) {
    CascadeModel probe;
    return scalar_slot(probe, key) != nullptr;
}

void apply_override(CascadeModel& model, const std::string& key, double value) {
    double* slot = scalar_slot(model, key);
    if (slot == nullptr) {
        throw std::invalid_argument("unknown scalar '" + key + "'");
    }
    *slot = value;
}

} // namespace ncts
