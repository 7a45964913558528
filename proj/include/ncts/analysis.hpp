#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncts/model.hpp"
#include "ncts/numerics.hpp"
#include "ncts/simulator.hpp"
#include "ncts/synthesis.hpp"

namespace ncts {

struct DissipativityReport {
    std::vector<double> t;
    std::vector<double> J;
    double terminal = 0.0;
    double min_J = 0.0;
    double gamma = 0.0;
    double tolerance = 1e-6;
    std::vector<double> violations; // times with J < -tolerance
    bool zero_initial_state = true;

    bool ok() const { return violations.empty(); }
    nlohmann::json to_json(bool with_samples = false) const;
};

// Running supply integral y'Qy + 2y'Sw + w'Rw - gamma w'w by the trapezoid rule.
DissipativityReport dissipativity_index(const SimTrace& trace, const DissipativityTriple& triple,
                                        double tolerance = 1e-6);

struct LkfWeights {
    Mat E;
    Mat P1, P2;
    Mat Q1, Q2, Q3, Q4, Q4_tilde;
    Mat R1, R2, R3;
    Mat Z1, Z2;
    double zeta2 = 0.0, d2 = 0.0, tau2 = 0.0, theta_bar = 0.0;
};

// P-scaled weights from the X-scaled decision values of a certificate.
LkfWeights lkf_weights(const CascadeModel& model, const GainCertificate& cert);

struct LkfTerms {
    double V1 = 0.0, V2 = 0.0, V3 = 0.0, V4 = 0.0;
    double total() const { return V1 + V2 + V3 + V4; }
};

// theta is the realized delay theta(t); t must leave room for the largest delay bound.
LkfTerms lkf_terms(const SimTrace& trace, const LkfWeights& w, double t, double theta);
double lkf_value(const SimTrace& trace, const LkfWeights& w, double t, double theta);

double simpson(const std::vector<double>& f, double h);

enum class Lemma { schur, norm_bound, wirtinger_split, recip_convex, jensen, wirtinger_pi };
const char* to_string(Lemma l);
Lemma lemma_from_string(const std::string& s);
const std::vector<Lemma>& all_lemmas();

// Uniform samples of x and x' on [a, b]; an odd sample count >= 201.
struct SampledFunction {
    double a = 0.0;
    double b = 1.0;
    std::vector<Vec> x;
    std::vector<Vec> dx;

    double step() const { return (b - a) / static_cast<double>(x.size() - 1); }
};

struct LemmaInputs {
    Mat A; // schur: Omega1 | norm_bound: M | recip_convex, wirtinger_*, jensen: R or W
    Mat B; // schur: Omega2 | norm_bound: F | recip_convex: M
    Mat C; // schur: Omega3 | norm_bound: N
    double eps = 1.0;
    double theta = 0.5;
    SampledFunction f;
};

// Oriented so that the inequality holds iff the gap is >= 0. For schur the gap
// is 0 when both verdicts agree and -1 otherwise.
double lemma_gap(Lemma lemma, const LemmaInputs& in);

struct LemmaSweep {
    Lemma lemma;
    int draws = 0;
    double min_gap = 0.0;
    int failures = 0; // draws with gap < -tol

    nlohmann::json to_json() const;
};

// Random admissible inputs per lemma: random SPD weights, polynomial sample
// functions of degree <= 6 with coefficients in [-1, 1].
LemmaInputs random_lemma_inputs(Lemma lemma, std::uint64_t seed, int n = 3, std::size_t samples = 401);
LemmaSweep lemma_sweep(Lemma lemma, int draws, std::uint64_t seed, double tol = 1e-8);

} // namespace ncts
