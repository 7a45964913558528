#include "ncts/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace ncts {

using nlohmann::json;

// ---------------------------------------------------------------- signals

SignalSpec SignalSpec::zero(Eigen::Index dim) {
    SignalSpec s;
    s.kind = Kind::zero;
    s.dim = dim;
    return s;
}

SignalSpec SignalSpec::constant(const Vec& v) {
    SignalSpec s;
    s.kind = Kind::constant;
    s.dim = v.size();
    s.value = v;
    return s;
}

SignalSpec SignalSpec::sin_window(const Vec& amplitude, double frequency, double start, double end) {
    SignalSpec s;
    s.kind = Kind::sin_window;
    s.dim = amplitude.size();
    s.amplitude = amplitude;
    s.frequency = frequency;
    s.start = start;
    s.end = end;
    return s;
}

SignalSpec SignalSpec::table(std::vector<double> times, std::vector<Vec> values) {
    if (times.empty() || times.size() != values.size()) {
        throw std::invalid_argument("table signal: times and values must be non-empty and of equal length");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) {
            throw std::invalid_argument("table signal: times must be strictly increasing");
        }
    }
    SignalSpec s;
    s.kind = Kind::table;
    s.dim = values.front().size();
    for (const auto& v : values) {
        if (v.size() != s.dim) {
            throw DimensionError("table signal: ragged values");
        }
    }
    s.times = std::move(times);
    s.values = std::move(values);
    return s;
}

Vec eval_signal(const SignalSpec& s, double t) {
    switch (s.kind) {
    case SignalSpec::Kind::zero:
        return Vec::Zero(s.dim);
    case SignalSpec::Kind::constant:
        return s.value;
    case SignalSpec::Kind::sin_window:
        if (t >= s.start && t < s.end) {
            return s.amplitude * std::sin(s.frequency * t);
        }
        return Vec::Zero(s.dim);
    case SignalSpec::Kind::table: {
        if (t <= s.times.front()) {
            return s.values.front();
        }
        if (t >= s.times.back()) {
            return s.values.back();
        }
        const auto it = std::upper_bound(s.times.begin(), s.times.end(), t);
        const auto hi = static_cast<std::size_t>(it - s.times.begin());
        const std::size_t lo = hi - 1;
        if (t == s.times[lo]) {
            return s.values[lo];
        }
        const double a = (t - s.times[lo]) / (s.times[hi] - s.times[lo]);
        return (1.0 - a) * s.values[lo] + a * s.values[hi];
    }
    }
    throw std::invalid_argument("unknown signal kind");
}

namespace {

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) {
        throw ModelFormatError(where + ": expected an object");
    }
    for (const auto& item : j.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return item.key() == k; })) {
            throw ModelFormatError(where + ": unknown key '" + item.key() + "'");
        }
    }
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) {
        throw ModelFormatError(where + ": expected a number");
    }
    return j.get<double>();
}

Vec sized(const Vec& v, Eigen::Index dim, const std::string& where) {
    if (v.size() == 1 && dim > 1) {
        return Vec::Constant(dim, v(0));
    }
    if (v.size() != dim) {
        throw ModelFormatError(where + ": expected " + std::to_string(dim) + " entries");
    }
    return v;
}

} // namespace

SignalSpec signal_from_json(const json& j, Eigen::Index dim, const std::string& field) {
    if (j.is_number() || j.is_array()) {
        return SignalSpec::constant(sized(vector_from_json(j, field), dim, field));
    }
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
        throw ModelFormatError(field + ": expected an object with a 'kind'");
    }
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "zero") {
        only_keys(j, field, {"kind"});
        return SignalSpec::zero(dim);
    }
    if (kind == "constant") {
        only_keys(j, field, {"kind", "value"});
        return SignalSpec::constant(sized(vector_from_json(j.at("value"), field + ".value"), dim, field));
    }
    if (kind == "sin_window") {
        only_keys(j, field, {"kind", "amplitude", "frequency", "start", "end"});
        return SignalSpec::sin_window(sized(vector_from_json(j.at("amplitude"), field), dim, field),
                                      number(j.value("frequency", json(1.0)), field + ".frequency"),
                                      number(j.at("start"), field + ".start"), number(j.at("end"), field + ".end"));
    }
    if (kind == "table") {
        only_keys(j, field, {"kind", "times", "values"});
        std::vector<double> times;
        for (const auto& v : j.at("times")) {
            times.push_back(number(v, field + ".times"));
        }
        std::vector<Vec> values;
        for (const auto& v : j.at("values")) {
            values.push_back(sized(vector_from_json(v, field + ".values"), dim, field));
        }
        try {
            return SignalSpec::table(std::move(times), std::move(values));
        } catch (const std::invalid_argument& e) {
            throw ModelFormatError(field + ": " + e.what());
        }
    }
    throw ModelFormatError(field + ": unknown signal kind '" + kind + "'");
}

json signal_to_json(const SignalSpec& s) {
    switch (s.kind) {
    case SignalSpec::Kind::zero:
        return {{"kind", "zero"}};
    case SignalSpec::Kind::constant:
        return {{"kind", "constant"}, {"value", vector_to_json(s.value)}};
    case SignalSpec::Kind::sin_window:
        return {{"kind", "sin_window"},
                {"amplitude", vector_to_json(s.amplitude)},
                {"frequency", s.frequency},
                {"start", s.start},
                {"end", s.end}};
    case SignalSpec::Kind::table: {
        json values = json::array();
        for (const auto& v : s.values) {
            values.push_back(vector_to_json(v));
        }
        return {{"kind", "table"}, {"times", s.times}, {"values", values}};
    }
    }
    return {};
}

Vec eval_attack(const AttackSpec& a, const Vec& x, double t) {
    switch (a.kind) {
    case AttackSpec::Kind::zero:
        return Vec::Zero(x.size());
    case AttackSpec::Kind::tanh: {
        if (a.gains.size() != x.size() || a.scale.size() != x.size()) {
            throw DimensionError("attack: gains/scale must match the primary state dimension");
        }
        Vec f(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            f(i) = a.scale(i) * std::tanh(a.gains(i) * x(i));
        }
        return f;
    }
    case AttackSpec::Kind::table:
        return eval_signal(a.table, t);
    }
    throw std::invalid_argument("unknown attack kind");
}

AttackSpec attack_from_json(const json& j, Eigen::Index n1) {
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
        throw ModelFormatError("scenario.attack: expected an object with a 'kind'");
    }
    AttackSpec a;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "zero") {
        only_keys(j, "scenario.attack", {"kind"});
        a.kind = AttackSpec::Kind::zero;
    } else if (kind == "tanh") {
        only_keys(j, "scenario.attack", {"kind", "gains", "scale"});
        a.kind = AttackSpec::Kind::tanh;
        a.gains = sized(vector_from_json(j.at("gains"), "scenario.attack.gains"), n1, "scenario.attack.gains");
        a.scale = j.contains("scale")
                      ? sized(vector_from_json(j.at("scale"), "scenario.attack.scale"), n1, "scenario.attack.scale")
                      : Vec(Vec::Constant(n1, -1.0));
    } else if (kind == "table") {
        a.kind = AttackSpec::Kind::table;
        a.table = signal_from_json(j, n1, "scenario.attack");
    } else {
        throw ModelFormatError("scenario.attack: unknown kind '" + kind + "'");
    }
    return a;
}

json attack_to_json(const AttackSpec& a) {
    switch (a.kind) {
    case AttackSpec::Kind::zero:
        return {{"kind", "zero"}};
    case AttackSpec::Kind::tanh:
        return {{"kind", "tanh"}, {"gains", vector_to_json(a.gains)}, {"scale", vector_to_json(a.scale)}};
    case AttackSpec::Kind::table:
        return signal_to_json(a.table);
    }
    return {};
}

// ---------------------------------------------------------------- scenario

Scenario default_scenario(const CascadeModel& md, double delay_fraction) {
    Scenario s;
    s.x1_0 = Vec::Zero(static_cast<Eigen::Index>(md.n1()));
    if (md.n1() == 2) {
        s.x1_0 << -5.5, -2.5;
    }
    Vec phi = Vec::Zero(static_cast<Eigen::Index>(md.n2()));
    if (md.n2() == 2) {
        phi << 6.0, -12.96;
    }
    s.x2_history = SignalSpec::constant(phi);
    s.disturbance = SignalSpec::sin_window(Vec::Ones(static_cast<Eigen::Index>(md.q())), 1.0, 0.0, 5.0);
    s.attack.kind = AttackSpec::Kind::tanh;
    const auto n1 = static_cast<Eigen::Index>(md.n1());
    s.attack.gains = md.F.diagonal().size() == n1 ? Vec(md.F.diagonal()) : Vec(Vec::Zero(n1));
    s.attack.scale = Vec::Constant(n1, -1.0);
    auto c = [](double v) { return SignalSpec::constant(Vec::Constant(1, v)); };
    s.zeta = c(delay_fraction * md.zeta2);
    s.d = c(delay_fraction * md.d2);
    s.tau = c(delay_fraction * md.tau2);
    s.theta = c(delay_fraction * md.theta_bar);
    s.fault = md.fault.mean().diagonal();
    return s;
}

Scenario zero_initial(Scenario s) {
    s.x1_0.setZero();
    s.x2_history = SignalSpec::zero(s.x2_history.dim);
    return s;
}

Scenario scenario_from_json(const json& j, const CascadeModel& md) {
    only_keys(j, "scenario",
              {"x1_0", "x2_history", "disturbance", "attack", "delays", "fault", "seed", "horizon", "step",
               "delay_fraction", "zero_initial_state"});
    const double frac = j.contains("delay_fraction") ? number(j.at("delay_fraction"), "scenario.delay_fraction") : 1.0;
    Scenario s = default_scenario(md, frac);
    const auto n1 = static_cast<Eigen::Index>(md.n1());
    const auto n2 = static_cast<Eigen::Index>(md.n2());
    if (j.contains("x1_0")) {
        s.x1_0 = vector_from_json(j.at("x1_0"), "scenario.x1_0");
    }
    if (j.contains("x2_history")) {
        s.x2_history = signal_from_json(j.at("x2_history"), n2, "scenario.x2_history");
    }
    if (j.contains("disturbance")) {
        s.disturbance = signal_from_json(j.at("disturbance"), static_cast<Eigen::Index>(md.q()), "scenario.disturbance");
    }
    if (j.contains("attack")) {
        s.attack = attack_from_json(j.at("attack"), n1);
    }
    if (j.contains("delays")) {
        const json& d = j.at("delays");
        only_keys(d, "scenario.delays", {"zeta", "d", "tau", "theta"});
        if (d.contains("zeta")) s.zeta = signal_from_json(d.at("zeta"), 1, "scenario.delays.zeta");
        if (d.contains("d")) s.d = signal_from_json(d.at("d"), 1, "scenario.delays.d");
        if (d.contains("tau")) s.tau = signal_from_json(d.at("tau"), 1, "scenario.delays.tau");
        if (d.contains("theta")) s.theta = signal_from_json(d.at("theta"), 1, "scenario.delays.theta");
    }
    if (j.contains("fault")) {
        s.fault = vector_from_json(j.at("fault"), "scenario.fault");
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer()) {
            throw ModelFormatError("scenario.seed: expected an integer");
        }
        s.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("horizon")) s.horizon = number(j.at("horizon"), "scenario.horizon");
    if (j.contains("step")) s.step = number(j.at("step"), "scenario.step");
    if (j.value("zero_initial_state", false)) {
        s = zero_initial(std::move(s));
    }
    return s;
}

json scenario_to_json(const Scenario& s) {
    return {{"x1_0", vector_to_json(s.x1_0)},
            {"x2_history", signal_to_json(s.x2_history)},
            {"disturbance", signal_to_json(s.disturbance)},
            {"attack", attack_to_json(s.attack)},
            {"delays",
             {{"zeta", signal_to_json(s.zeta)},
              {"d", signal_to_json(s.d)},
              {"tau", signal_to_json(s.tau)},
              {"theta", signal_to_json(s.theta)}}},
            {"fault", vector_to_json(s.fault)},
            {"seed", s.seed},
            {"horizon", s.horizon},
            {"step", s.step}};
}

namespace {

// Range [lo, hi] and max slope of a scalar signal over [0, horizon].
struct SignalRange {
    double lo;
    double hi;
    double max_slope;
};

SignalRange range_of(const SignalSpec& s, double horizon) {
    SignalRange r{0.0, 0.0, 0.0};
    switch (s.kind) {
    case SignalSpec::Kind::zero:
        return r;
    case SignalSpec::Kind::constant:
        r.lo = r.hi = s.value(0);
        return r;
    case SignalSpec::Kind::sin_window:
        r.lo = -std::abs(s.amplitude(0));
        r.hi = std::abs(s.amplitude(0));
        r.max_slope = std::abs(s.amplitude(0) * s.frequency);
        return r;
    case SignalSpec::Kind::table:
        r.lo = r.hi = s.values.front()(0);
        for (std::size_t i = 0; i < s.times.size(); ++i) {
            if (s.times[i] > horizon && i > 0 && s.times[i - 1] > horizon) {
                break;
            }
            r.lo = std::min(r.lo, s.values[i](0));
            r.hi = std::max(r.hi, s.values[i](0));
            if (i > 0) {
                r.max_slope = std::max(r.max_slope,
                                       (s.values[i](0) - s.values[i - 1](0)) / (s.times[i] - s.times[i - 1]));
            }
        }
        return r;
    }
    return r;
}

} // namespace

ValidationReport validate_scenario(const Scenario& s, const CascadeModel& md) {
    ValidationReport rep;
    auto fail = [&](const std::string& f, const std::string& m) { rep.violations.push_back({f, m}); };
    if (s.x1_0.size() != static_cast<Eigen::Index>(md.n1())) fail("x1_0", "wrong dimension");
    if (s.x2_history.dim != static_cast<Eigen::Index>(md.n2())) fail("x2_history", "wrong dimension");
    if (s.disturbance.dim != static_cast<Eigen::Index>(md.q())) fail("disturbance", "wrong dimension");
    if (!(s.step > 0.0)) fail("step", "must be positive");
    if (!(s.horizon > 0.0)) fail("horizon", "must be positive");
    if (s.step > 0.0) {
        const double ratio = md.h / s.step;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio) || std::round(ratio) < 1.0) {
            fail("step", "must divide the sampling period h");
        }
    }
    const struct {
        const char* name;
        const SignalSpec* sig;
        double bound;
    } delays[] = {{"zeta", &s.zeta, md.zeta2}, {"d", &s.d, md.d2}, {"tau", &s.tau, md.tau2}, {"theta", &s.theta, md.theta_bar}};
    for (const auto& d : delays) {
        if (d.sig->dim != 1) {
            fail(d.name, "delay signal must be scalar");
            continue;
        }
        const auto r = range_of(*d.sig, s.horizon);
        if (r.lo < 0.0 || r.hi > d.bound + 1e-12) {
            fail(d.name, "delay outside [0, bound]");
        }
    }
    if (s.theta.dim == 1 && range_of(s.theta, s.horizon).max_slope > md.lambda + 1e-12) {
        fail("theta", "delay rate exceeds lambda");
    }
    if (s.fault.size() != static_cast<Eigen::Index>(md.m())) {
        fail("fault", "wrong dimension");
    } else if (md.fault.lower.size() == s.fault.size()) {
        for (Eigen::Index k = 0; k < s.fault.size(); ++k) {
            if (s.fault(k) < md.fault.lower(k) - 1e-12 || s.fault(k) > md.fault.upper(k) + 1e-12) {
                fail("fault", "realized fault outside the fault interval");
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------- run

namespace {

// Uniform history on a fixed grid; older entries are overwritten. Each grid
// point keeps its left and right limit so jumps of the algebraic state stay
// sharp under interpolation.
class DelayBuffer {
public:
    DelayBuffer(double dt, std::size_t capacity, const SignalSpec* history, Vec before_zero)
        : dt_(dt), right_(capacity), left_(capacity), history_(history), before_zero_(std::move(before_zero)) {}

    void push(const Vec& right, const Vec& left) {
        right_[count_ % right_.size()] = right;
        left_[count_ % left_.size()] = left;
        ++count_;
    }
    void push(const Vec& v) { push(v, v); }

    Vec at(double t, bool from_left = false) const {
        if (t < 0.0 || count_ == 0) {
            return history_ != nullptr ? eval_signal(*history_, t) : before_zero_;
        }
        double pos = t / dt_;
        if (std::abs(pos - std::round(pos)) < 1e-9) {
            pos = std::round(pos);
        }
        const auto last = count_ - 1;
        if (pos >= static_cast<double>(last)) {
            return slot(from_left && pos == static_cast<double>(last) ? left_ : right_, last);
        }
        const auto i = static_cast<std::size_t>(std::floor(pos));
        if (count_ - i > right_.size()) {
            throw std::logic_error("delay buffer: lookup older than capacity");
        }
        const double a = pos - static_cast<double>(i);
        if (a == 0.0) {
            return slot(from_left ? left_ : right_, i);
        }
        return (1.0 - a) * slot(right_, i) + a * slot(left_, i + 1);
    }

private:
    const Vec& slot(const std::vector<Vec>& ring, std::size_t i) const { return ring[i % ring.size()]; }

    double dt_;
    std::vector<Vec> right_;
    std::vector<Vec> left_;
    std::size_t count_ = 0;
    const SignalSpec* history_;
    Vec before_zero_;
};

struct Uniform01 {
    std::mt19937_64 rng;
    explicit Uniform01(std::uint64_t seed) : rng(seed) {}
    double operator()() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
};

} // namespace

Vec SimTrace::state(std::size_t i) const {
    Vec s(x1[i].size() + x2[i].size());
    s << x1[i], x2[i];
    return s;
}

SimTrace run(const CascadeModel& md, const GainCertificate& gains, const Scenario& sc) {
    {
        const auto rep = validate_scenario(sc, md);
        if (!rep.ok()) {
            throw SimulationError(SimulationError::Kind::invalid, 0.0, "invalid scenario:\n" + rep.summary());
        }
    }
    const auto n1 = static_cast<Eigen::Index>(md.n1());
    const auto n2 = static_cast<Eigen::Index>(md.n2());
    const auto m = static_cast<Eigen::Index>(md.m());
    if (gains.K1.rows() != m || gains.K1.cols() != n1 || gains.K2.rows() != m || gains.K2.cols() != n2) {
        throw SimulationError(SimulationError::Kind::invalid, 0.0, "gain dimensions do not match the model");
    }
    const CertReport cert = certify_closed_loop(md, gains.K2);
    if (!cert.regular || !cert.impulse_free) {
        throw SimulationError(SimulationError::Kind::not_impulse_free, 0.0,
                              "closed loop is not regular and impulse-free; the algebraic part has no unique solution");
    }

    const DaeDecomposition dae = dae_coordinates(md.E);
    const auto r = static_cast<Eigen::Index>(dae.rank);
    const Mat Ud = dae.U_diff();
    const Mat Ua = dae.U_alg();
    const Mat Vd = dae.V_diff();
    const Mat Va = dae.V_alg();
    const Vec sigma_inv = dae.sigma.head(r).cwiseInverse();
    const Mat G = sc.fault.asDiagonal();
    const Mat GK1 = G * gains.K1;
    const Vec& xi = md.saturation_limits;

    const double dt = sc.step;
    const auto steps = static_cast<std::size_t>(std::llround(sc.horizon / dt));
    const auto stride = static_cast<std::size_t>(std::llround(md.h / dt));

    const double max_delay = std::max({md.theta_bar, md.tau2, md.zeta2, md.d2});
    const auto capacity = static_cast<std::size_t>(std::ceil(max_delay / dt)) + 4;
    DelayBuffer x2_hist(dt, capacity, &sc.x2_history, Vec());
    DelayBuffer x1_hist(dt, capacity, nullptr, sc.x1_0);

    // Algebraic coordinates z2 given z1, by semi-smooth Newton over the
    // saturation active set.
    auto solve_alg = [&](double t, const Vec& z1, const Vec& rest, const Vec& u1g, Vec& z2) -> Vec {
        const Vec base = Vd * z1;
        if (n2 - r == 0) {
            return base;
        }
        for (int it = 0; it < 60; ++it) {
            const Vec x2 = base + Va * z2;
            const Vec u = u1g + gains.K2 * x2;
            const Vec res = Ua.transpose() * (md.A2 * x2 + md.B2 * saturate(u, xi) + rest);
            const double scale = 1.0 + (md.A2 * x2).cwiseAbs().maxCoeff() + rest.cwiseAbs().maxCoeff();
            if (res.cwiseAbs().maxCoeff() <= 1e-14 * scale && it > 0) {
                return x2;
            }
            Vec active = Vec::Ones(m);
            for (Eigen::Index i = 0; i < m; ++i) {
                if (std::abs(u(i)) > xi(i)) {
                    active(i) = 0.0;
                }
            }
            Mat J = Ua.transpose() * (md.A2 + md.B2 * active.asDiagonal() * gains.K2) * Va;
            Eigen::FullPivLU<Mat> lu(J);
            if (!lu.isInvertible()) {
                J = Ua.transpose() * (md.A2 + md.B2 * gains.K2) * Va;
                lu.compute(J);
                if (!lu.isInvertible()) {
                    throw SimulationError(SimulationError::Kind::algebraic_singular, t,
                                          "algebraic subsystem singular at t = " + std::to_string(t));
                }
            }
            const Vec dz = lu.solve(res);
            z2 -= dz;
            if (dz.cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + z2.cwiseAbs().maxCoeff())) {
                return base + Va * z2;
            }
        }
        const Vec x2 = base + Va * z2;
        const Vec res = Ua.transpose() * (md.A2 * x2 + md.B2 * saturate(u1g + gains.K2 * x2, xi) + rest);
        if (res.cwiseAbs().maxCoeff() > 1e-9) {
            throw SimulationError(SimulationError::Kind::algebraic_singular, t,
                                  "algebraic subsystem has no solution at t = " + std::to_string(t));
        }
        return x2;
    };

    // Delayed/exogenous part of the secondary right-hand side.
    auto rest_of = [&](double t, const Vec& w, bool from_left) {
        const double theta = eval_signal(sc.theta, t)(0);
        return Vec(md.A3 * x2_hist.at(t - theta, from_left) + md.B3 * w);
    };

    struct Deriv {
        Vec dx1;
        Vec dz1;
    };
    Vec z2_guess = Va.transpose() * eval_signal(sc.x2_history, 0.0);
    // from_left: evaluate exogenous and delayed terms as limits from below, for
    // the stage that closes a step onto a jump.
    auto deriv = [&](double t, const Vec& x1, const Vec& z1, const Vec& u1g, bool from_left) {
        const Vec w = eval_signal(sc.disturbance, from_left ? std::nextafter(t, -1.0) : t);
        const Vec rest = rest_of(t, w, from_left);
        Vec z2 = z2_guess;
        const Vec x2 = solve_alg(t, z1, rest, u1g, z2);
        const Vec g = md.A2 * x2 + md.B2 * saturate(u1g + gains.K2 * x2, xi) + rest;
        Deriv d;
        d.dx1 = md.A1 * x1 + md.B1 * (md.C2 * x2 + md.D2 * w);
        d.dz1 = sigma_inv.asDiagonal() * (Ud.transpose() * g);
        return d;
    };

    SimTrace tr;
    const std::size_t rows = steps + 1;
    for (auto* v : {&tr.x1, &tr.x2, &tr.xhat, &tr.u1g, &tr.u2, &tr.sat_u2, &tr.psi_u2, &tr.y1, &tr.w}) {
        v->reserve(rows);
    }
    tr.t.reserve(rows);

    Vec x1 = sc.x1_0;
    Vec z1 = Vd.transpose() * eval_signal(sc.x2_history, 0.0);
    Vec x2_left = eval_signal(sc.x2_history, 0.0);
    Vec u1g = Vec::Zero(m);
    Vec xhat = Vec::Zero(n1);
    Vec x_last = x1;
    int alpha = 0;
    int beta = 0;
    Uniform01 uni(sc.seed);

    for (std::size_t i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) * dt;
        bool released = false;
        if (i % stride == 0) {
            alpha = uni() < md.alpha_bar ? 1 : 0;
            beta = uni() < md.beta_bar ? 1 : 0;
            SampleRecord rec;
            rec.step = i;
            rec.time = t;
            rec.alpha = alpha;
            rec.beta = beta;
            if (i == 0 || alpha == 1) {
                released = true;
            } else {
                const TriggerDecision dec = event_release(x_last - x1, x1, gains.W, md.mu);
                released = dec.released;
                rec.error_norm_sq = dec.error_norm_sq;
                rec.threshold = dec.threshold;
            }
            if (released) {
                x_last = x1;
            }
            const double tau = eval_signal(sc.tau, t)(0);
            const Vec f = eval_attack(sc.attack, x1_hist.at(t - tau), t);
            const auto sample = primary_input(alpha, beta, x1, x1, x_last - x1, f);
            xhat = sample.value;
            u1g = GK1 * xhat;
            rec.released = released;
            rec.source = sample.source;
            tr.samples.push_back(rec);
        }

        const Vec w = eval_signal(sc.disturbance, t);
        const Vec rest = rest_of(t, w, false);
        Vec z2 = z2_guess;
        const Vec x2 = solve_alg(t, z1, rest, u1g, z2);
        z2_guess = z2;
        const Vec u2 = u1g + gains.K2 * x2;
        const Vec sat = saturate(u2, xi);
        const Vec psi = u2 - sat;
        if (!x1.allFinite() || !x2.allFinite() || x1.norm() > 1e12 || x2.norm() > 1e12) {
            throw SimulationError(SimulationError::Kind::divergence, t,
                                  "state diverged at t = " + std::to_string(t));
        }

        tr.t.push_back(t);
        tr.x1.push_back(x1);
        tr.x2.push_back(x2);
        tr.xhat.push_back(xhat);
        tr.u1g.push_back(u1g);
        tr.u2.push_back(u2);
        tr.sat_u2.push_back(sat);
        tr.psi_u2.push_back(psi);
        tr.y1.push_back(md.C1 * x1 + md.D1 * w);
        tr.w.push_back(w);
        tr.alpha.push_back(alpha);
        tr.beta.push_back(beta);
        tr.released.push_back(released);
        tr.eq5_violation.push_back(psi.squaredNorm() > md.saturation_slope * u2.squaredNorm());
        tr.alg_residual.push_back(
            n2 - r == 0 ? 0.0 : (Ua.transpose() * (md.A2 * x2 + md.B2 * sat + rest)).cwiseAbs().maxCoeff());

        x2_hist.push(x2, x2_left);
        x1_hist.push(x1);
        if (i == steps) {
            break;
        }

        const Deriv k1 = deriv(t, x1, z1, u1g, false);
        const Deriv k2 = deriv(t + 0.5 * dt, x1 + 0.5 * dt * k1.dx1, z1 + 0.5 * dt * k1.dz1, u1g, false);
        const Deriv k3 = deriv(t + 0.5 * dt, x1 + 0.5 * dt * k2.dx1, z1 + 0.5 * dt * k2.dz1, u1g, false);
        const Deriv k4 = deriv(t + dt, x1 + dt * k3.dx1, z1 + dt * k3.dz1, u1g, true);
        x1 += dt / 6.0 * (k1.dx1 + 2.0 * k2.dx1 + 2.0 * k3.dx1 + k4.dx1);
        z1 += dt / 6.0 * (k1.dz1 + 2.0 * k2.dz1 + 2.0 * k3.dz1 + k4.dz1);

        const double tn = t + dt;
        const Vec w_left = eval_signal(sc.disturbance, std::nextafter(tn, -1.0));
        Vec z2_left = z2_guess;
        x2_left = solve_alg(tn, z1, rest_of(tn, w_left, true), u1g, z2_left);
    }
    return tr;
}

json TransmissionStats::to_json() const {
    return {{"samples", samples},   {"released", released},       {"ratio", ratio},
            {"time_path", time_path}, {"event_path", event_path}, {"attack_path", attack_path}};
}

TransmissionStats transmission_stats(const SimTrace& tr) {
    TransmissionStats s;
    s.samples = tr.samples.size();
    for (const auto& rec : tr.samples) {
        s.released += rec.released ? 1 : 0;
        switch (rec.source) {
        case InputSource::time_path:
            ++s.time_path;
            break;
        case InputSource::event_path:
            ++s.event_path;
            break;
        case InputSource::attack_path:
            ++s.attack_path;
            break;
        }
    }
    s.ratio = s.samples > 0 ? static_cast<double>(s.released) / static_cast<double>(s.samples) : 0.0;
    return s;
}

// ---------------------------------------------------------------- CSV

namespace {

void header_group(std::ostream& os, const char* name, Eigen::Index dim, bool always_index) {
    for (Eigen::Index i = 0; i < dim; ++i) {
        os << ',' << name;
        if (always_index || dim > 1) {
            os << '_' << (i + 1);
        }
    }
}

void value(std::ostream& os, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    os << buf;
}

void row_group(std::ostream& os, const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        os << ',';
        value(os, v(i));
    }
}

} // namespace

void write_csv(const SimTrace& tr, std::ostream& os) {
    if (tr.size() == 0) {
        os << "t\n";
        return;
    }
    os << 't';
    header_group(os, "x1", tr.x1[0].size(), true);
    header_group(os, "x2", tr.x2[0].size(), true);
    header_group(os, "xhat", tr.xhat[0].size(), true);
    header_group(os, "u1g", tr.u1g[0].size(), false);
    header_group(os, "u2", tr.u2[0].size(), false);
    header_group(os, "sat_u2", tr.sat_u2[0].size(), false);
    header_group(os, "psi_u2", tr.psi_u2[0].size(), false);
    header_group(os, "y1", tr.y1[0].size(), false);
    header_group(os, "w", tr.w[0].size(), false);
    os << ",alpha,beta,released,eq5_violation\n";
    for (std::size_t i = 0; i < tr.size(); ++i) {
        value(os, tr.t[i]);
        row_group(os, tr.x1[i]);
        row_group(os, tr.x2[i]);
        row_group(os, tr.xhat[i]);
        row_group(os, tr.u1g[i]);
        row_group(os, tr.u2[i]);
        row_group(os, tr.sat_u2[i]);
        row_group(os, tr.psi_u2[i]);
        row_group(os, tr.y1[i]);
        row_group(os, tr.w[i]);
        os << ',' << tr.alpha[i] << ',' << tr.beta[i] << ',' << (tr.released[i] ? 1 : 0) << ','
           << (tr.eq5_violation[i] ? 1 : 0) << '\n';
    }
}

SimTrace read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) {
        throw std::invalid_argument("trace csv: empty input");
    }
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) {
            cols.push_back(c);
        }
    }
    // column group name -> column indices in order
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t k = 0; k < cols.size(); ++k) {
        std::string name = cols[k];
        const auto us = name.rfind('_');
        if (us != std::string::npos && us + 1 < name.size() &&
            std::all_of(name.begin() + static_cast<std::ptrdiff_t>(us + 1), name.end(), ::isdigit)) {
            name = name.substr(0, us);
        }
        groups[name].push_back(k);
    }
    for (const char* need : {"t", "y1", "w"}) {
        if (groups.count(need) == 0) {
            throw std::invalid_argument(std::string("trace csv: missing column '") + need + "'");
        }
    }
    SimTrace tr;
    std::vector<double> vals;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        vals.clear();
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) {
            vals.push_back(std::stod(c));
        }
        if (vals.size() != cols.size()) {
            throw std::invalid_argument("trace csv: ragged row");
        }
        auto grab = [&](const std::string& name) {
            auto it = groups.find(name);
            if (it == groups.end()) {
                return Vec();
            }
            Vec v(static_cast<Eigen::Index>(it->second.size()));
            for (std::size_t k = 0; k < it->second.size(); ++k) {
                v(static_cast<Eigen::Index>(k)) = vals[it->second[k]];
            }
            return v;
        };
        tr.t.push_back(vals[groups["t"][0]]);
        tr.x1.push_back(grab("x1"));
        tr.x2.push_back(grab("x2"));
        tr.xhat.push_back(grab("xhat"));
        tr.u1g.push_back(grab("u1g"));
        tr.u2.push_back(grab("u2"));
        tr.sat_u2.push_back(grab("sat"));
        tr.psi_u2.push_back(grab("psi"));
        tr.y1.push_back(grab("y1"));
        tr.w.push_back(grab("w"));
        const Vec a = grab("alpha");
        const Vec b = grab("beta");
        const Vec rel = grab("released");
        const Vec e5 = grab("eq5");
        tr.alpha.push_back(a.size() ? static_cast<int>(a(0)) : 0);
        tr.beta.push_back(b.size() ? static_cast<int>(b(0)) : 0);
        tr.released.push_back(rel.size() && rel(0) != 0.0);
        tr.eq5_violation.push_back(e5.size() && e5(0) != 0.0);
        tr.alg_residual.push_back(0.0);
    }
    return tr;
}

} // namespace ncts
