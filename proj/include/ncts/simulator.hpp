#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncts/model.hpp"
#include "ncts/synthesis.hpp"
#include "ncts/trigger.hpp"

namespace ncts {

// Time signal: zero, constant, amplitude*sin(frequency*t) on [start, end), or a
// linearly interpolated table (held constant outside its range).
struct SignalSpec {
    enum class Kind { zero, constant, sin_window, table };
    Kind kind = Kind::zero;
    Eigen::Index dim = 1;
    Vec value;     // constant
    Vec amplitude; // sin_window
    double frequency = 1.0;
    double start = 0.0;
    double end = 0.0;
    std::vector<double> times; // table
    std::vector<Vec> values;

    static SignalSpec zero(Eigen::Index dim);
    static SignalSpec constant(const Vec& v);
    static SignalSpec sin_window(const Vec& amplitude, double frequency, double start, double end);
    static SignalSpec table(std::vector<double> times, std::vector<Vec> values);
};
Vec eval_signal(const SignalSpec& spec, double t);
SignalSpec signal_from_json(const nlohmann::json& j, Eigen::Index dim, const std::string& field);
nlohmann::json signal_to_json(const SignalSpec& s);

// Attack signal f(x): scale_i * tanh(gain_i * x_i), zero, or a time table.
struct AttackSpec {
    enum class Kind { zero, tanh, table };
    Kind kind = Kind::zero;
    Vec gains;
    Vec scale;
    SignalSpec table;
};
Vec eval_attack(const AttackSpec& spec, const Vec& x_delayed, double t);
AttackSpec attack_from_json(const nlohmann::json& j, Eigen::Index n1);
nlohmann::json attack_to_json(const AttackSpec& a);

struct Scenario {
    Vec x1_0;
    SignalSpec x2_history; // phi on [-theta_bar, 0]
    SignalSpec disturbance;
    AttackSpec attack;
    // Delay signals in seconds.
    SignalSpec zeta, d, tau, theta;
    Vec fault; // realized fault diagonal
    std::uint64_t seed = 1;
    double horizon = 15.0;
    double step = 1e-3;
};

// Reference scenario: the preset initial states, sin disturbance on [0,5),
// tanh attack, delays at `delay_fraction` of their bounds, fault at the mean.
Scenario default_scenario(const CascadeModel& model, double delay_fraction = 1.0);
Scenario zero_initial(Scenario s);
Scenario scenario_from_json(const nlohmann::json& j, const CascadeModel& model);
nlohmann::json scenario_to_json(const Scenario& s);
ValidationReport validate_scenario(const Scenario& s, const CascadeModel& model);

struct SampleRecord {
    std::size_t step = 0;
    double time = 0.0;
    int alpha = 0;
    int beta = 0;
    bool released = false;
    InputSource source = InputSource::time_path;
    double error_norm_sq = 0.0;
    double threshold = 0.0;
};

struct SimTrace {
    std::vector<double> t;
    std::vector<Vec> x1, x2, xhat, u1g, u2, sat_u2, psi_u2, y1, w;
    std::vector<int> alpha, beta; // draws held since the last sampling instant
    std::vector<bool> released;   // true only on sampling rows that released
    std::vector<bool> eq5_violation;
    std::vector<double> alg_residual; // inf-norm of the algebraic rows
    std::vector<SampleRecord> samples;

    std::size_t size() const { return t.size(); }
    Vec state(std::size_t i) const; // (x1, x2)
};

struct SimulationError : std::runtime_error {
    enum class Kind { invalid, not_impulse_free, algebraic_singular, divergence };
    SimulationError(Kind k, double time, const std::string& msg)
        : std::runtime_error(msg), kind(k), time(time) {}
    Kind kind;
    double time;
};

SimTrace run(const CascadeModel& model, const GainCertificate& gains, const Scenario& scenario);

struct TransmissionStats {
    std::size_t samples = 0;
    std::size_t released = 0;
    double ratio = 0.0;
    std::size_t time_path = 0;
    std::size_t event_path = 0;
    std::size_t attack_path = 0;
    nlohmann::json to_json() const;
};
TransmissionStats transmission_stats(const SimTrace& trace);

void write_csv(const SimTrace& trace, std::ostream& os);
// Reads a trace written by write_csv (columns inferred from the header).
SimTrace read_csv(std::istream& is);

} // namespace ncts
