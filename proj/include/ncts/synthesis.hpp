#pragma once

#include <complex>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncts/lmi.hpp"
#include "ncts/model.hpp"
#include "ncts/sdp.hpp"

namespace ncts {

struct CertReport {
    bool regular = false;
    bool impulse_free = false;
    int degree = -1;
    std::size_t rank_e = 0;
    std::vector<std::complex<double>> slow_eigenvalues;
    bool slow_stable = false; // every slow eigenvalue has negative real part

    bool admissible() const { return regular && impulse_free && slow_stable; }
    nlohmann::json to_json() const;
};

struct GainCertificate {
    Mat K1;
    Mat K2;
    Mat W;
    std::map<std::string, Mat> decision; // raw decision values (X1, X2, W_hat, Y1, Y2, ...)
    CertReport admissibility;
    double cond_X1 = 0.0;
    double cond_X2 = 0.0;
    nlohmann::json solver; // residual summary and stats

    nlohmann::json to_json() const;
};
GainCertificate certificate_from_json(const nlohmann::json& j);
GainCertificate load_certificate(const std::string& path);

enum class FaultMode { known, unknown };
struct FaultSpec {
    FaultMode mode = FaultMode::unknown;
    Mat G; // realized fault for FaultMode::known

    static FaultSpec known(const Mat& g) { return {FaultMode::known, g}; }
    static FaultSpec unknown() { return {FaultMode::unknown, Mat()}; }
};

enum class SynthesisStatus { feasible, infeasible, not_admissible, solver_failure };
const char* to_string(SynthesisStatus s);

struct SynthesisResult {
    SynthesisStatus status = SynthesisStatus::solver_failure;
    std::optional<GainCertificate> certificate;
    SdpSolution solution;
    std::string message;

    bool ok() const { return status == SynthesisStatus::feasible; }
    nlohmann::json to_json() const;
};

struct ExtractionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kMaxConditionNumber = 1e10;

LmiSystem build_for(const CascadeModel& model, const TheoremScalars& scalars, const FaultSpec& fault);

SynthesisResult synthesize(const CascadeModel& model, const TheoremScalars& scalars, const FaultSpec& fault,
                           const SolveOptions& opts = {});

// Gains from a solved decision assignment; throws ExtractionError when X1 or
// X2 is too ill-conditioned.
GainCertificate extract_gains(const CascadeModel& model, const std::map<std::string, Mat>& decision);

// Regularity / impulse-freeness of the delay-free pair (E, A2 + B2 K2) and the slow
// modes of its reduced form.
CertReport certify_closed_loop(const CascadeModel& model, const Mat& K2);

// Largest gamma in [lo, hi] for which synthesis stays feasible, by bisection.
struct GammaSweep {
    double feasible_gamma;
    double infeasible_gamma;
    int solves;
};
GammaSweep gamma_threshold(const CascadeModel& model, const TheoremScalars& scalars, const FaultSpec& fault,
                           double lo, double hi, double tol = 1e-3, const SolveOptions& opts = {});

} // namespace ncts
