#include "ncts/roundtrip.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ncts/preset.hpp"
#include "ncts/sdp.hpp"

namespace ncts {

using nlohmann::json;

LmiSystem toy_system() {
    LmiSystem sys;
    const AffineMat x = sys.registry.add_scalar("x");
    BlockLayout layout;
    const auto b = layout.append(1, "x");
    BlockAssembler a(layout);
    a.add(b, b, x - AffineMat(Mat::Ones(1, 1)));
    sys.constraints.push_back(a.finalize("toy", Sense::positive_semidefinite));
    return sys;
}

std::vector<double> block_min_eigs(const SdpaProblem& p, const Vec& x) {
    if (x.size() != p.m) {
        throw DimensionError("block_min_eigs: x has " + std::to_string(x.size()) + " entries, problem has " +
                             std::to_string(p.m));
    }
    std::vector<double> out;
    for (int b = 1; b <= static_cast<int>(p.block_struct.size()); ++b) {
        Mat v = -p.matrix(0, b);
        for (int k = 1; k <= p.m; ++k) {
            v += x(k - 1) * p.matrix(k, b);
        }
        out.push_back(min_eig_sym(v));
    }
    return out;
}

std::vector<double> system_block_min_eigs(const LmiSystem& sys, const SdpaOptions& opts, const Vec& x) {
    const int nx = sys.registry.scalar_count();
    const bool epi = opts.objective == SdpaObjective::max_eig;
    const Vec xs = x.head(nx);
    const double t = epi ? x(nx) : 0.0;
    std::vector<double> out;
    for (const auto& c : sys.constraints) {
        const Mat v = c.evaluate(xs);
        if (c.sense == Sense::negative_definite) {
            out.push_back(-max_eig_sym(v) + t - (epi ? 0.0 : c.strict_margin()));
        } else {
            out.push_back(min_eig_sym(v) + t);
        }
    }
    if (opts.box_bound && nx + (epi ? 1 : 0) > 0) {
        double lo = std::numeric_limits<double>::infinity();
        for (int k = 0; k < nx; ++k) {
            lo = std::min({lo, *opts.box_bound - xs(k), *opts.box_bound + xs(k)});
        }
        if (epi) {
            lo = std::min(lo, t + *opts.box_bound);
        }
        out.push_back(lo);
    }
    return out;
}

json FixtureCheck::to_json() const {
    return {{"name", name},
            {"ok", ok},
            {"export_diff", export_diff},
            {"file_vs_external", file_vs_external},
            {"system_vs_external", system_vs_external},
            {"strict_satisfied", strict_satisfied},
            {"message", message}};
}

LmiSystem fixture_system(const json& fx) {
    const std::string system = fx.at("system").get<std::string>();
    if (system == "toy") {
        return toy_system();
    }
    const Preset p = load_preset(resolve_preset(system));
    const int theorem = fx.value("theorem", 2);
    if (theorem == 1) {
        return build_theorem1(p.model, p.model.fault.realized_or_mean(), p.scalars);
    }
    return build_theorem2(p.model, p.scalars);
}

SdpaOptions fixture_options(const json& fx) {
    SdpaOptions o;
    if (fx.contains("box_bound") && !fx.at("box_bound").is_null()) {
        o.box_bound = fx.at("box_bound").get<double>();
    }
    o.objective = fx.value("objective", std::string("feasibility")) == "max_eig" ? SdpaObjective::max_eig
                                                                               : SdpaObjective::feasibility;
    return o;
}

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) {
        throw std::runtime_error("cannot open '" + p.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Largest entry difference between two parsed problems of the same shape.
double problem_diff(const SdpaProblem& a, const SdpaProblem& b) {
    if (a.m != b.m || a.block_struct != b.block_struct) {
        return std::numeric_limits<double>::infinity();
    }
    double d = 0.0;
    for (int k = 0; k <= a.m; ++k) {
        for (int blk = 1; blk <= static_cast<int>(a.block_struct.size()); ++blk) {
            d = std::max(d, (a.matrix(k, blk) - b.matrix(k, blk)).cwiseAbs().maxCoeff());
        }
    }
    return d;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        return std::numeric_limits<double>::infinity();
    }
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a[i] - b[i]));
    }
    return d;
}

} // namespace

FixtureCheck check_fixture(const std::filesystem::path& path, double tol) {
    FixtureCheck out;
    out.name = path.stem().string();
    const json fx = json::parse(slurp(path));
    const LmiSystem sys = fixture_system(fx);
    const SdpaOptions opts = fixture_options(fx);

    const SdpaProblem recorded = parse_sdpa(slurp(path.parent_path() / fx.at("sdpa").get<std::string>()));
    const SdpaProblem fresh = parse_sdpa(export_sdpa(sys, opts));
    out.export_diff = problem_diff(recorded, fresh);

    const json& ext = fx.at("external");
    const auto xs = ext.at("x").get<std::vector<double>>();
    const Vec x = Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
    const auto ext_eigs = ext.at("block_min_eig").get<std::vector<double>>();
    out.file_vs_external = max_abs_diff(block_min_eigs(recorded, x), ext_eigs);
    out.system_vs_external = max_abs_diff(system_block_min_eigs(sys, opts, x), ext_eigs);

    const Vec xv = x.head(sys.registry.scalar_count());
    const auto res = residuals(sys, xv);
    out.strict_satisfied = std::all_of(res.begin(), res.end(), [](const ConstraintResidual& r) {
        return r.sense != Sense::negative_definite || r.margin > 0.0;
    });
    const bool external_feasible = ext.value("status", std::string()) == "optimal";
    out.ok = external_feasible && out.strict_satisfied && out.export_diff <= 1e-12 &&
             out.file_vs_external <= tol && out.system_vs_external <= tol;
    if (!external_feasible) {
        out.message = "external solver status '" + ext.value("status", std::string()) + "'";
    } else if (!out.ok) {
        out.message = "round-trip mismatch";
    }
    return out;
}

} // namespace ncts
