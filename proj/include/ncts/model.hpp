#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ncts/numerics.hpp"

namespace ncts {

// Actuator effectiveness interval per channel; G = G0 + G1 * diag(l), |l_k| <= 1.
struct FaultModel {
    Vec lower;
    Vec upper;
    std::optional<Vec> realized;

    Mat mean() const { return (0.5 * (upper + lower)).asDiagonal(); }
    Mat radius() const { return (0.5 * (upper - lower)).asDiagonal(); }
    Mat realized_or_mean() const { return realized ? Mat(realized->asDiagonal()) : mean(); }
};

// Supply-rate weights: y'Qy + 2y'Sw + w'Rw >= gamma w'w with Q <= 0.
struct DissipativityTriple {
    Mat Q;
    Mat S;
    Mat R;
    double gamma = 0.0;

    Mat Q_bar() const; // sqrt(-Q)
};

struct CascadeModel {
    // primary plant
    Mat A1, B1, C1, D1;
    // secondary (descriptor) plant
    Mat E, A2, A3, B2, B3, C2, D2;

    // delay bounds [s] and delay-rate bound
    double zeta2 = 0.0;
    double d2 = 0.0;
    double tau2 = 0.0;
    double theta_bar = 0.0;
    double lambda = 0.0;

    double h = 0.1;          // sampling period [s]
    double mu = 0.0;         // event threshold
    double alpha_bar = 0.0;  // P(time-triggered path)
    double beta_bar = 0.0;   // P(attack)
    Mat F;                   // attack bound ||f(x)|| <= ||F x||

    Vec saturation_limits;   // Xi_i
    double saturation_slope = 0.5; // epsilon in Psi'Psi <= eps u'u

    FaultModel fault;
    DissipativityTriple dissipativity;

    std::size_t n1() const { return static_cast<std::size_t>(A1.rows()); }
    std::size_t n2() const { return static_cast<std::size_t>(A2.rows()); }
    std::size_t m() const { return static_cast<std::size_t>(B2.cols()); }
    std::size_t q() const { return static_cast<std::size_t>(B3.cols()); }
    std::size_t qy() const { return static_cast<std::size_t>(C1.rows()); }
};

struct Violation {
    std::string field;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    bool mentions(const std::string& field) const;
    std::string summary() const;
};

ValidationReport validate(const CascadeModel& model);

struct BernoulliMoments {
    double mean;
    double variance;
};
BernoulliMoments bernoulli_moments(double p);

struct PencilReport {
    bool regular = false;
    bool impulse_free = false;
    int degree = -1;          // degree of det(sE - A); -1 when identically zero
    std::size_t rank_e = 0;
    std::vector<double> coefficients; // ascending powers of s
};

// Regularity / impulse-freeness of the pair (E, A) from a polynomial fit of
// det(sE - A) through n+2 Chebyshev-spaced samples.
PencilReport is_regular_impulse_free(const Mat& e, const Mat& a);

// JSON model schema. Unknown keys are rejected with ModelFormatError.
struct ModelFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

CascadeModel model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const CascadeModel& model);
CascadeModel load_model(const std::string& path);

nlohmann::json matrix_to_json(const Mat& m);
Mat matrix_from_json(const nlohmann::json& j, const std::string& field);
nlohmann::json vector_to_json(const Vec& v);
Vec vector_from_json(const nlohmann::json& j, const std::string& field);

// Scalar override by name ("gamma", "mu", "alpha_bar", ...). Throws
// std::invalid_argument for unknown names.
void apply_override(CascadeModel& model, const std::string& key, double value);
bool is_model_scalar(const std::string& key);

} // namespace ncts
