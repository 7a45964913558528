#include "ncts/trigger.hpp"

#include <string>

namespace ncts {

namespace {

void check_limits(const Vec& u, const Vec& limits) {
    if (u.size() != limits.size()) {
        throw DimensionError("saturation: input has " + std::to_string(u.size()) + " channels, limits have " +
                             std::to_string(limits.size()));
    }
    if (!(limits.array() > 0.0).all()) {
        throw std::invalid_argument("saturation: limits must be positive");
    }
}

} // namespace

Vec saturate(const Vec& u, const Vec& limits) {
    check_limits(u, limits);
    return u.cwiseMax(-limits).cwiseMin(limits);
}

Vec deadzone(const Vec& u, const Vec& limits) { return u - saturate(u, limits); }

TriggerDecision event_release(const Vec& e_k, const Vec& x_sampled, const Mat& W, double mu) {
    const auto n = W.rows();
    if (W.cols() != n || e_k.size() != n || x_sampled.size() != n) {
        throw DimensionError("event_release: W, e_k and x must share dimension");
    }
    if (!(mu >= 0.0 && mu < 1.0)) {
        throw std::invalid_argument("event_release: mu outside [0,1)");
    }
    if (min_eig_sym(W) <= 0.0) {
        throw std::invalid_argument("event_release: W is not positive definite");
    }
    TriggerDecision d;
    d.error_norm_sq = e_k.dot(W * e_k);
    d.threshold = mu * x_sampled.dot(W * x_sampled);
    d.released = d.error_norm_sq > d.threshold;
    return d;
}

const char* to_string(InputSource s) {
    switch (s) {
    case InputSource::time_path:
        return "time";
    case InputSource::event_path:
        return "event";
    case InputSource::attack_path:
        return "attack";
    }
    return "?";
}

ControllerInputSample primary_input(int alpha, int beta, const Vec& x_time_path, const Vec& x_event_path,
                                    const Vec& e_k, const Vec& f_delayed) {
    if ((alpha != 0 && alpha != 1) || (beta != 0 && beta != 1)) {
        throw std::invalid_argument("primary_input: draws must be 0 or 1");
    }
    const auto n = x_time_path.size();
    if (x_event_path.size() != n || e_k.size() != n || f_delayed.size() != n) {
        throw DimensionError("primary_input: all signals must have the primary state dimension");
    }
    ControllerInputSample s;
    s.alpha = alpha;
    s.beta = beta;
    if (beta == 1) {
        s.value = f_delayed;
        s.source = InputSource::attack_path;
    } else if (alpha == 1) {
        s.value = x_time_path;
        s.source = InputSource::time_path;
    } else {
        s.value = x_event_path + e_k;
        s.source = InputSource::event_path;
    }
    return s;
}

} // namespace ncts
